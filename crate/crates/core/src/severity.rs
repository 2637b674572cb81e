//! Payment amounts: iid severity families, an order-autoregressive alternative and
//! normal-score diagnostics.
//!
//! Only positive amounts are modelled; recoveries in the data are left out of the
//! fits and never simulated.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::freq::FamilyChoice;
use crate::numerics::optim;
use crate::numerics::special::{ln_gamma, norm_ppf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum SeverityFamily {
    /// `ln X ~ N(mu, sigma²)`.
    LogNormal { mu: f64, sigma: f64 },
    Gamma { shape: f64, rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IidFamily {
    LogNormal,
    Gamma,
}

impl SeverityFamily {
    pub fn mean(&self) -> f64 {
        match *self {
            SeverityFamily::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            SeverityFamily::Gamma { shape, rate } => shape / rate,
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            SeverityFamily::LogNormal { mu, sigma } => {
                let z = (x.ln() - mu) / sigma;
                -0.5 * z * z - x.ln() - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
            SeverityFamily::Gamma { shape, rate } => {
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SeverityFamily::LogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
            SeverityFamily::Gamma { shape, rate } => {
                Gamma::new(shape, 1.0 / rate).expect("validated parameters").sample(rng)
            }
        }
    }

    /// Multiplies every amount by `c > 0`.
    pub fn scaled(&self, c: f64) -> SeverityFamily {
        match *self {
            SeverityFamily::LogNormal { mu, sigma } => SeverityFamily::LogNormal { mu: mu + c.ln(), sigma },
            SeverityFamily::Gamma { shape, rate } => SeverityFamily::Gamma { shape, rate: rate / c },
        }
    }
}

/// Disturbance of the order-autoregressive recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Innovation {
    /// Centred normal with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Draw from a positive severity family.
    Severity { family: SeverityFamily },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum SeverityModel {
    Iid { family: SeverityFamily },
    /// `X_1 ~ first`, `X_j = max(α_j X_{j-1} + ε_j, floor)` for `j >= 2`.
    OrderAr {
        first: SeverityFamily,
        /// `alphas[j - 2]` is `α_j`; orders past the end reuse the last coefficient.
        alphas: Vec<f64>,
        innovation: Innovation,
        floor: f64,
    },
}

/// Smallest amount the recursion may produce.
pub const DEFAULT_FLOOR: f64 = 0.01;

impl SeverityModel {
    /// Expected amount of the first payment.
    pub fn first_mean(&self) -> f64 {
        match self {
            SeverityModel::Iid { family } | SeverityModel::OrderAr { first: family, .. } => family.mean(),
        }
    }

    fn alpha(alphas: &[f64], order: usize) -> f64 {
        alphas[(order.max(2) - 2).min(alphas.len() - 1)]
    }

    /// Amounts for payments of order `start_order, start_order + 1, ...` (1-based),
    /// continuing from the amount of the previous payment when there is one.
    pub fn simulate_from<R: Rng + ?Sized>(
        &self,
        start_order: usize,
        previous: Option<f64>,
        n: usize,
        rng: &mut R,
    ) -> Vec<f64> {
        match self {
            SeverityModel::Iid { family } => (0..n).map(|_| family.sample(rng)).collect(),
            SeverityModel::OrderAr { first, alphas, innovation, floor } => {
                let mut out = Vec::with_capacity(n);
                let mut prev = previous;
                for i in 0..n {
                    let order = start_order + i;
                    let x = match prev {
                        Some(p) if order >= 2 => {
                            let eps = match innovation {
                                Innovation::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
                                Innovation::Severity { family } => family.sample(rng),
                            };
                            (Self::alpha(alphas, order) * p + eps).max(*floor)
                        }
                        _ => first.sample(rng),
                    };
                    out.push(x);
                    prev = Some(x);
                }
                out
            }
        }
    }

    /// Amounts of a claim's first `n` payments.
    pub fn simulate_amounts<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        self.simulate_from(1, None, n, rng)
    }

    /// Multiplies every simulated amount by `c > 0`.
    pub fn scaled(&self, c: f64) -> SeverityModel {
        match self {
            SeverityModel::Iid { family } => SeverityModel::Iid { family: family.scaled(c) },
            SeverityModel::OrderAr { first, alphas, innovation, floor } => SeverityModel::OrderAr {
                first: first.scaled(c),
                alphas: alphas.clone(),
                innovation: match innovation {
                    Innovation::Gaussian { sigma } => Innovation::Gaussian { sigma: sigma * c },
                    Innovation::Severity { family } => Innovation::Severity { family: family.scaled(c) },
                },
                floor: floor * c,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyFit {
    pub family: SeverityFamily,
    pub log_likelihood: f64,
    pub parameters: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_obs: usize,
    /// Zero spread: every amount identical.
    pub degenerate: bool,
}

impl FamilyFit {
    pub fn aic(&self) -> f64 {
        4.0 - 2.0 * self.log_likelihood
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeverityFit {
    pub model: SeverityModel,
    /// Fit of the iid family, or of the first-payment family for the autoregression.
    pub family_fit: FamilyFit,
    pub excluded_non_positive: usize,
    /// Pairs used per order `j >= 2`.
    pub pairs_per_order: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeverityVariant {
    Iid(FamilyChoice<IidFamily>),
    /// Coefficients for orders `2..=max_order`.
    OrderAr { max_order: usize, first: FamilyChoice<IidFamily> },
}

const MIN_AMOUNTS: usize = 50;

/// Maximum-likelihood fit of one family to positive amounts.
pub fn fit_family(amounts: &[f64], family: IidFamily) -> Result<FamilyFit> {
    let n = amounts.len();
    if n < MIN_AMOUNTS {
        return Err(Error::InsufficientData(format!("severity fit needs at least {MIN_AMOUNTS} positive amounts, got {n}")));
    }
    if amounts.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter("severity fit needs positive amounts".into()));
    }
    let nf = n as f64;
    let mean_ln = amounts.iter().map(|x| x.ln()).sum::<f64>() / nf;
    match family {
        IidFamily::LogNormal => {
            let var = amounts.iter().map(|x| (x.ln() - mean_ln).powi(2)).sum::<f64>() / nf;
            let degenerate = amounts.iter().all(|&x| x == amounts[0]);
            let sigma = if degenerate { 0.0 } else { var.sqrt() };
            let f = SeverityFamily::LogNormal { mu: mean_ln, sigma };
            let log_likelihood =
                if degenerate { f64::INFINITY } else { amounts.iter().map(|&x| f.ln_pdf(x)).sum() };
            Ok(FamilyFit {
                family: f,
                log_likelihood,
                parameters: vec!["mu".into(), "sigma".into()],
                estimates: vec![mean_ln, sigma],
                std_errors: vec![sigma / nf.sqrt(), sigma / (2.0 * nf).sqrt()],
                n_obs: n,
                degenerate,
            })
        }
        IidFamily::Gamma => {
            let mean = amounts.iter().sum::<f64>() / nf;
            let s = mean.ln() - mean_ln;
            if s <= 1e-14 {
                return Err(Error::Degenerate("all amounts equal; gamma shape unbounded".into()));
            }
            // Profile likelihood in the shape, with rate = shape / mean.
            let profile = |ln_shape: f64| {
                let a = ln_shape.exp();
                -(a * (a / mean).ln() - ln_gamma(a) + (a - 1.0) * mean_ln - a)
            };
            let m = optim::brent(profile, -10.0, 20.0, 1e-12, 500)?;
            let shape = m.x[0].exp();
            let rate = shape / mean;
            let f = SeverityFamily::Gamma { shape, rate };
            let ll = |p: &[f64]| -> f64 {
                if p[0] <= 0.0 || p[1] <= 0.0 {
                    return f64::INFINITY;
                }
                let g = SeverityFamily::Gamma { shape: p[0], rate: p[1] };
                -amounts.iter().map(|&x| g.ln_pdf(x)).sum::<f64>()
            };
            let std_errors = optim::standard_errors(ll, &[shape, rate]);
            Ok(FamilyFit {
                family: f,
                log_likelihood: amounts.iter().map(|&x| f.ln_pdf(x)).sum(),
                parameters: vec!["shape".into(), "rate".into()],
                estimates: vec![shape, rate],
                std_errors,
                n_obs: n,
                degenerate: false,
            })
        }
    }
}

fn choose_family(amounts: &[f64], choice: &FamilyChoice<IidFamily>) -> Result<FamilyFit> {
    match choice {
        FamilyChoice::Fixed(f) => fit_family(amounts, *f),
        FamilyChoice::Aic(candidates) => {
            let mut best: Option<FamilyFit> = None;
            let mut last_err = None;
            for &f in candidates {
                match fit_family(amounts, f) {
                    Ok(fit) if best.as_ref().is_none_or(|b| fit.aic() < b.aic()) => best = Some(fit),
                    Ok(_) => {}
                    Err(e) => last_err = Some(e),
                }
            }
            best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidParameter("no candidate families".into())))
        }
    }
}

/// Fits a severity model to per-claim payment sequences (in payment order).
pub fn fit_severity(claims: &[Vec<f64>], variant: &SeverityVariant) -> Result<SeverityFit> {
    let mut warnings = Vec::new();
    match variant {
        SeverityVariant::Iid(choice) => {
            let all: Vec<f64> = claims.iter().flatten().copied().collect();
            let positive: Vec<f64> = all.iter().copied().filter(|&x| x > 0.0).collect();
            let excluded = all.len() - positive.len();
            if excluded > 0 {
                warnings.push(format!("{excluded} non-positive amounts excluded from the severity fit"));
            }
            let fit = choose_family(&positive, choice)?;
            if fit.degenerate {
                warnings.push("all amounts identical: zero severity spread".into());
            }
            Ok(SeverityFit {
                model: SeverityModel::Iid { family: fit.family },
                family_fit: fit,
                excluded_non_positive: excluded,
                pairs_per_order: Vec::new(),
                warnings,
            })
        }
        SeverityVariant::OrderAr { max_order, first } => {
            if *max_order < 2 {
                return Err(Error::InvalidParameter("order autoregression needs max_order >= 2".into()));
            }
            let firsts: Vec<f64> = claims.iter().filter_map(|c| c.first().copied()).filter(|&x| x > 0.0).collect();
            let excluded = claims.iter().filter(|c| c.first().is_some_and(|&x| x <= 0.0)).count();
            let first_fit = choose_family(&firsts, first)?;
            let mut alphas = Vec::new();
            let mut pairs_per_order = Vec::new();
            let mut residuals = Vec::new();
            for j in 2..=*max_order {
                let pairs: Vec<(f64, f64)> = claims
                    .iter()
                    .filter(|c| c.len() >= j && c[j - 2] > 0.0 && c[j - 1] > 0.0)
                    .map(|c| (c[j - 2], c[j - 1]))
                    .collect();
                pairs_per_order.push(pairs.len());
                let alpha = if pairs.len() >= MIN_AMOUNTS {
                    let sxy: f64 = pairs.iter().map(|(x, y)| x * y).sum();
                    let sxx: f64 = pairs.iter().map(|(x, _)| x * x).sum();
                    Some(sxy / sxx)
                } else {
                    None
                };
                match (alpha, alphas.last().copied()) {
                    (Some(a), _) => {
                        residuals.extend(pairs.iter().map(|(x, y)| y - a * x));
                        alphas.push(a);
                    }
                    (None, Some(prev)) => {
                        warnings.push(format!("order {j}: {} pairs, coefficient inherited from order {}", pairs.len(), j - 1));
                        alphas.push(prev);
                    }
                    (None, None) => {
                        return Err(Error::InsufficientData(format!(
                            "order autoregression needs at least {MIN_AMOUNTS} pairs of first and second payments, got {}",
                            pairs.len()
                        )))
                    }
                }
            }
            let fitted = pairs_per_order.iter().filter(|&&n| n >= MIN_AMOUNTS).count();
            let dof = residuals.len().saturating_sub(fitted).max(1);
            let sigma = (residuals.iter().map(|r| r * r).sum::<f64>() / dof as f64).sqrt();
            Ok(SeverityFit {
                model: SeverityModel::OrderAr {
                    first: first_fit.family,
                    alphas,
                    innovation: Innovation::Gaussian { sigma },
                    floor: DEFAULT_FLOOR,
                },
                family_fit: first_fit,
                excluded_non_positive: excluded,
                pairs_per_order,
                warnings,
            })
        }
    }
}

/// Amounts of payment orders `j` and `k` (1-based) for claims having both.
pub fn order_pairs(claims: &[Vec<f64>], j: usize, k: usize) -> Vec<(f64, f64)> {
    claims
        .iter()
        .filter(|c| j >= 1 && k >= 1 && c.len() >= j.max(k))
        .map(|c| (c[j - 1], c[k - 1]))
        .collect()
}

/// Mid-ranks (1-based) with ties averaged.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// `(Φ⁻¹(F̂_j(x)), Φ⁻¹(F̂_k(y)))` with empirical cdfs rescaled by `n/(n+1)`.
pub fn normal_scores(pairs: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("normal scores need at least one pair".into()));
    }
    let n1 = pairs.len() as f64 + 1.0;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (rx, ry) = (ranks(&xs), ranks(&ys));
    Ok(rx.iter().zip(&ry).map(|(a, b)| (norm_ppf(a / n1), norm_ppf(b / n1))).collect())
}

/// Writes pairs and their normal scores as plot-ready CSV.
pub fn write_normal_scores_csv<W: Write>(out: W, j: usize, k: usize, pairs: &[(f64, f64)]) -> Result<()> {
    let scores = normal_scores(pairs)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["order_j", "order_k", "x_j", "x_k", "z_j", "z_k"])?;
    for ((x, y), (zx, zy)) in pairs.iter().zip(&scores) {
        w.write_record([j.to_string(), k.to_string(), x.to_string(), y.to_string(), zx.to_string(), zy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Amounts (to the cent) occurring more than `threshold` times, most frequent first.
pub fn repeated_amounts(amounts: &[f64], threshold: usize) -> Vec<(f64, usize)> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &x in amounts {
        *counts.entry((x * 100.0).round() as i64).or_insert(0) += 1;
    }
    let mut out: Vec<(f64, usize)> =
        counts.into_iter().filter(|&(_, c)| c > threshold).map(|(k, c)| (k as f64 / 100.0, c)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.total_cmp(&b.0)));
    out
}
