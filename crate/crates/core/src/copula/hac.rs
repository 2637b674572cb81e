use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use super::family::{CopulaFamily, FamilyTag};
use super::tv::CopulaSpec;
use crate::error::{Error, Result};
use crate::numerics::optim;

/// Two-level copula `D{C_1(u1, u2), C_2(u3, u4)}` across two claim types.
///
/// A proper 4-dimensional copula requires the outer and leaf generators to nest:
/// either the outer copula is independence, or outer and leaves share one
/// Archimedean family (Clayton or Gumbel) with the outer parameter no larger than
/// either leaf parameter at every `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HacSpec {
    pub outer: CopulaFamily,
    pub leaves: [CopulaSpec; 2],
}

impl HacSpec {
    pub fn new(outer: CopulaFamily, leaves: [CopulaSpec; 2]) -> Result<HacSpec> {
        outer.validate()?;
        for l in &leaves {
            l.validate()?;
        }
        match outer.tag() {
            FamilyTag::Independence => {}
            FamilyTag::Clayton | FamilyTag::Gumbel => {
                for (i, l) in leaves.iter().enumerate() {
                    if l.family != outer.tag() {
                        return Err(Error::InvalidParameter(format!(
                            "leaf {i} is {:?} but the outer copula is {:?}; nesting needs one family",
                            l.family,
                            outer.tag()
                        )));
                    }
                    // The leaf path is weakest as τ → ∞.
                    let inner = l.limit();
                    if outer.kendall_tau() > inner.kendall_tau() + 1e-12 {
                        return Err(Error::InvalidParameter(format!(
                            "nesting violated: outer Kendall tau {:.4} exceeds leaf {i} tau {:.4}",
                            outer.kendall_tau(),
                            inner.kendall_tau()
                        )));
                    }
                }
            }
            other => {
                return Err(Error::Unsupported(format!("{other:?} is not supported as outer copula")));
            }
        }
        Ok(HacSpec { outer, leaves })
    }

    /// Independent claim types.
    pub fn independent(leaves: [CopulaSpec; 2]) -> HacSpec {
        HacSpec { outer: CopulaFamily::Independence, leaves }
    }

    /// `D(C_1(u1, u2), C_2(u3, u4))` with leaf parameters at internal times `taus`.
    pub fn cdf(&self, taus: [f64; 2], u: [f64; 4]) -> f64 {
        let a = self.leaves[0].at(taus[0]).cdf(u[0], u[1]);
        let b = self.leaves[1].at(taus[1]).cdf(u[2], u[3]);
        self.outer.cdf(a, b)
    }

    /// Nested Marshall-Olkin draw with leaf parameters frozen at internal times `taus`.
    pub fn sample<R: Rng + ?Sized>(&self, taus: [f64; 2], rng: &mut R) -> [f64; 4] {
        let leaves = [self.leaves[0].at(taus[0]), self.leaves[1].at(taus[1])];
        match self.outer {
            CopulaFamily::Clayton { theta: t0 } => {
                let v0 = Gamma::new(1.0 / t0, 1.0).expect("positive shape").sample(rng);
                let mut out = [0.0; 4];
                for (k, leaf) in leaves.iter().enumerate() {
                    let tk = leaf.parameter();
                    let vk = tilted_stable(t0 / tk, v0, rng);
                    for j in 0..2 {
                        let e: f64 = Exp1.sample(rng);
                        out[2 * k + j] = (e / vk).ln_1p().mul_add(-1.0 / tk, 0.0).exp();
                    }
                }
                out
            }
            CopulaFamily::Gumbel { theta: t0 } => {
                let v0 = positive_stable(1.0 / t0, rng);
                let mut out = [0.0; 4];
                for (k, leaf) in leaves.iter().enumerate() {
                    let tk = leaf.parameter();
                    let alpha = t0 / tk;
                    let vk = v0.powf(1.0 / alpha) * positive_stable(alpha, rng);
                    for j in 0..2 {
                        let e: f64 = Exp1.sample(rng);
                        out[2 * k + j] = (-(e / vk).powf(1.0 / tk)).exp();
                    }
                }
                out
            }
            _ => {
                let (a, b) = leaves[0].sample(rng);
                let (c, d) = leaves[1].sample(rng);
                [a, b, c, d]
            }
        }
    }
}

/// Positive stable variate with Laplace transform `exp(-s^α)`, `α ∈ (0, 1]` (Kanter).
pub(crate) fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 - 1e-12 {
        return 1.0;
    }
    let u = std::f64::consts::PI * (1.0 - rng.random::<f64>());
    let e: f64 = Exp1.sample(rng);
    let a = ((alpha * u).sin().ln() * alpha + ((1.0 - alpha) * u).sin().ln() * (1.0 - alpha) - u.sin().ln())
        / (1.0 - alpha);
    ((a - e.ln()) * (1.0 - alpha) / alpha).exp()
}

/// Variate with Laplace transform `exp(-v ((1 + s)^α - 1))`.
///
/// The exponentially tilted stable law is sampled as a sum of `ceil(v)` pieces, each
/// by rejection from a stable proposal with acceptance probability at least `e^{-1}`.
pub(crate) fn tilted_stable<R: Rng + ?Sized>(alpha: f64, v: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 - 1e-12 {
        return v;
    }
    let m = v.ceil().max(1.0);
    let c = v / m;
    let scale = c.powf(1.0 / alpha);
    let mut total = 0.0;
    for _ in 0..m as usize {
        loop {
            let s = scale * positive_stable(alpha, rng);
            if rng.random::<f64>() <= (-s).exp() {
                total += s;
                break;
            }
        }
    }
    total
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterFit {
    pub outer: CopulaFamily,
    pub log_likelihood: f64,
    pub std_error: f64,
    pub n_pairs: usize,
    /// The unconstrained estimate violated nesting and was moved onto the boundary.
    pub projected: bool,
}

/// Fits the outer copula on matched delay pseudo-observations `(H(w_1), H̃(w_2))`,
/// the bivariate margin of the nested copula, then enforces nesting.
pub fn fit_outer(pairs: &[(f64, f64)], family: FamilyTag, leaves: &[CopulaSpec; 2]) -> Result<OuterFit> {
    if pairs.len() < 30 {
        return Err(Error::InsufficientData(format!("outer copula needs at least 30 matched pairs, got {}", pairs.len())));
    }
    let ll = |c: &CopulaFamily| -> f64 {
        pairs.iter().map(|&(a, b)| c.pdf(a.clamp(1e-12, 1.0 - 1e-12), b.clamp(1e-12, 1.0 - 1e-12)).max(1e-300).ln()).sum()
    };
    if family == FamilyTag::Independence {
        return Ok(OuterFit {
            outer: CopulaFamily::Independence,
            log_likelihood: 0.0,
            std_error: f64::NAN,
            n_pairs: pairs.len(),
            projected: false,
        });
    }
    if !matches!(family, FamilyTag::Clayton | FamilyTag::Gumbel) {
        return Err(Error::Unsupported(format!("{family:?} is not supported as outer copula")));
    }
    let (lo, hi) = family.link_bounds();
    let m = optim::brent(|eta| -ll(&family.from_link(eta)), lo, hi, 1e-9, 500)?;
    let mut outer = family.from_link(m.x[0]);
    let cap = leaves
        .iter()
        .filter(|l| l.family == family)
        .map(|l| l.limit().parameter())
        .fold(f64::INFINITY, f64::min);
    if leaves.iter().any(|l| l.family != family) {
        return Err(Error::InvalidParameter("leaf families differ from the outer family".into()));
    }
    let projected = outer.parameter() > cap;
    if projected {
        log::warn!("outer copula parameter {:.4} exceeds the leaf bound {cap:.4}; projected", outer.parameter());
        outer = match family {
            FamilyTag::Clayton => CopulaFamily::Clayton { theta: cap },
            _ => CopulaFamily::Gumbel { theta: cap },
        };
    }
    let se = optim::standard_errors(
        |x| {
            let c = match family {
                FamilyTag::Clayton => CopulaFamily::Clayton { theta: x[0] },
                _ => CopulaFamily::Gumbel { theta: x[0] },
            };
            if c.validate().is_err() {
                return f64::INFINITY;
            }
            -ll(&c)
        },
        &[outer.parameter()],
    );
    Ok(OuterFit { outer, log_likelihood: ll(&outer), std_error: se[0], n_pairs: pairs.len(), projected })
}
