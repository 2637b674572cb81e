//! Small-dimensional optimizers for likelihood fitting.
//!
//! Every fitter in the crate minimizes a negative log-likelihood over at most a
//! handful of parameters, so a bounded Nelder-Mead simplex plus Brent's scalar
//! method cover all needs. Standard errors come from a finite-difference Hessian.

use crate::error::{Error, Result};

/// Stopping rules shared by the optimizers.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Objective spread below which the search stops, relative to `max(1, |f|)`.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { f_tol: 1e-8, max_iter: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn clamp_to(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (xi, &(lo, hi)) in x.iter_mut().zip(bounds) {
        *xi = xi.clamp(lo, hi);
    }
}

fn eval<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Box-constrained Nelder-Mead. Trial points are clamped into `bounds`; a NaN
/// objective is treated as `+inf`.
///
/// After the first convergence the simplex is rebuilt around the best point and
/// the search resumes once, which guards against collapsed simplices. The
/// iteration cap covers both passes.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    bounds: &[(f64, f64)],
    tol: Tolerance,
) -> Result<Minimum> {
    let n = x0.len();
    assert!(n >= 1 && step.len() == n && bounds.len() == n);
    let mut iterations = 0;
    let mut start = x0.to_vec();
    clamp_to(&mut start, bounds);
    let mut scale = 1.0;
    let mut best_prev = f64::INFINITY;

    for pass in 0..2 {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let v0 = eval(&mut f, &start);
        simplex.push((start.clone(), v0));
        for i in 0..n {
            let mut x = start.clone();
            x[i] += step[i] * scale;
            clamp_to(&mut x, bounds);
            if x[i] == start[i] {
                x[i] -= step[i] * scale;
                clamp_to(&mut x, bounds);
            }
            let v = eval(&mut f, &x);
            simplex.push((x, v));
        }

        let mut converged = false;
        while iterations < tol.max_iter {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            if best.is_finite() && (worst - best).abs() <= tol.f_tol * best.abs().max(1.0) {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |coef: f64| -> Vec<f64> {
                let mut p: Vec<f64> = centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + coef * (c - w))
                    .collect();
                clamp_to(&mut p, bounds);
                p
            };

            let xr = along(1.0);
            let fr = eval(&mut f, &xr);
            if fr < simplex[0].1 {
                let xe = along(2.0);
                let fe = eval(&mut f, &xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(0.5);
                    let fc = eval(&mut f, &xc);
                    (xc, fc)
                } else {
                    let xc = along(-0.5);
                    let fc = eval(&mut f, &xc);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x_best = simplex[0].0.clone();
                    for item in simplex.iter_mut().skip(1) {
                        let mut x: Vec<f64> = x_best.iter().zip(&item.0).map(|(b, xi)| b + 0.5 * (xi - b)).collect();
                        clamp_to(&mut x, bounds);
                        let v = eval(&mut f, &x);
                        *item = (x, v);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x_best, f_best) = simplex.swap_remove(0);
        if !converged {
            return Err(Error::NonConvergence {
                iterations,
                context: format!("Nelder-Mead, best objective {f_best}"),
            });
        }
        let settled = pass == 1 && (best_prev - f_best).abs() <= tol.f_tol * f_best.abs().max(1.0);
        if pass == 1 || settled {
            return Ok(Minimum { x: x_best, value: f_best, iterations });
        }
        best_prev = f_best;
        start = x_best;
        scale = 0.1;
    }
    unreachable!("loop returns on the second pass")
}

/// Brent's method for a scalar minimum on `[lo, hi]`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, x_tol: f64, max_iter: usize) -> Result<Minimum> {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = eval1(&mut f, x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    for iter in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = x_tol * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            return Ok(Minimum { x: vec![x], value: fx, iterations: iter });
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else if d > 0.0 { x + tol1 } else { x - tol1 };
        let fu = eval1(&mut f, u);
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, context: "Brent scalar search".into() })
}

fn eval1<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> f64 {
    let v = f(x);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Central finite-difference Hessian of `f` at `x`.
pub fn hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|xi| 1e-4 * xi.abs().max(1e-2)).collect();
    let mut hess = vec![vec![0.0; n]; n];
    let f0 = f(x);
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h[i];
        let fp = f(&p);
        p[i] = x[i] - h[i];
        let fm = f(&p);
        p[i] = x[i];
        hess[i][i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * h[i];
                p[j] = x[j] + sj * h[j];
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Inverse of a small symmetric positive-definite matrix by Gauss-Jordan with pivoting.
pub fn invert(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        let p = a[col][col];
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let factor = a[row][col];
                if factor != 0.0 {
                    for k in 0..2 * n {
                        a[row][k] -= factor * a[col][k];
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Standard errors from the observed information (Hessian of the negative
/// log-likelihood). Entries are NaN when the information matrix is singular
/// or a variance comes out non-positive.
pub fn standard_errors<F: FnMut(&[f64]) -> f64>(neg_loglik: F, x: &[f64]) -> Vec<f64> {
    let hess = hessian(neg_loglik, x);
    match invert(&hess) {
        Some(cov) => (0..x.len())
            .map(|i| if cov[i][i] > 0.0 { cov[i][i].sqrt() } else { f64::NAN })
            .collect(),
        None => vec![f64::NAN; x.len()],
    }
}
