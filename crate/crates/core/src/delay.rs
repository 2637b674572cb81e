//! Reporting delay given the accident time.
//!
//! Accident times `t` are day counts from the epoch. A claim occurring on day `t`
//! with continuous delay `w` is reported on day `t + floor(w)`, so a recorded
//! integer delay `d` is the event `d <= W < d + 1`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::claims::Portfolio;
use crate::error::{Error, Result};
use crate::numerics::optim::{self, Tolerance};
use crate::numerics::special::ln_gamma;
use crate::time::{Day, DAYS_PER_YEAR};

/// Observed delays (days) of the claims occurring in a span of accident years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayCohort {
    pub first_year: i32,
    pub last_year: i32,
    /// Sorted ascending.
    pub delays: Vec<u32>,
}

impl DelayCohort {
    fn cdf(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        let below = self.delays.partition_point(|&d| f64::from(d) <= w);
        below as f64 / self.delays.len() as f64
    }

    fn quantile(&self, u: f64) -> f64 {
        let n = self.delays.len();
        let idx = ((u * n as f64).ceil() as usize).clamp(1, n) - 1;
        f64::from(self.delays[idx])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum DelayModel {
    /// Weibull with constant shape and scale `exp(c0 + c1 * t_years)` days.
    WeibullTv { shape: f64, c0: f64, c1: f64 },
    /// One empirical cdf per accident-year cohort, ascending and contiguous.
    EmpiricalCohort { cohorts: Vec<DelayCohort> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelayVariant {
    WeibullTv,
    EmpiricalCohort,
}

impl DelayModel {
    pub fn weibull_tv(shape: f64, c0: f64, c1: f64) -> Result<DelayModel> {
        if !(shape > 0.0 && shape.is_finite()) || !c0.is_finite() || !(c1 <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Weibull delay needs shape > 0 and c1 <= 0, got shape={shape}, c0={c0}, c1={c1}"
            )));
        }
        Ok(DelayModel::WeibullTv { shape, c0, c1 })
    }

    /// Weibull scale in days for accident time `t` (days since epoch).
    pub fn scale(&self, t: f64) -> Option<f64> {
        match *self {
            DelayModel::WeibullTv { c0, c1, .. } => Some((c0 + c1 * t / DAYS_PER_YEAR).exp()),
            DelayModel::EmpiricalCohort { .. } => None,
        }
    }

    fn cohort(&self, t: f64) -> &DelayCohort {
        let DelayModel::EmpiricalCohort { cohorts } = self else { unreachable!() };
        let year = Day(t.floor() as i32).year();
        let first = cohorts.first().expect("fitted model has cohorts");
        let last = cohorts.last().expect("fitted model has cohorts");
        if year < first.first_year || year > last.last_year {
            log::warn!("accident year {year} outside the fitted cohorts; using the nearest");
        }
        cohorts
            .iter()
            .find(|c| year <= c.last_year)
            .unwrap_or(last)
    }

    /// `H_t(w) = P[W <= w | T = t]`.
    pub fn cdf(&self, t: f64, w: f64) -> f64 {
        match *self {
            DelayModel::WeibullTv { shape, .. } => {
                if w <= 0.0 {
                    return 0.0;
                }
                let z = (w / self.scale(t).expect("weibull")).powf(shape);
                -(-z).exp_m1()
            }
            DelayModel::EmpiricalCohort { .. } => self.cohort(t).cdf(w),
        }
    }

    /// `1 - H_t(w)` without cancellation.
    pub fn survival(&self, t: f64, w: f64) -> f64 {
        match *self {
            DelayModel::WeibullTv { shape, .. } => {
                if w <= 0.0 {
                    return 1.0;
                }
                (-(w / self.scale(t).expect("weibull")).powf(shape)).exp()
            }
            DelayModel::EmpiricalCohort { .. } => 1.0 - self.cdf(t, w),
        }
    }

    /// Density `dH_t/dw` per day.
    pub fn density(&self, t: f64, w: f64) -> Result<f64> {
        match *self {
            DelayModel::WeibullTv { shape, .. } => {
                if w < 0.0 {
                    return Ok(0.0);
                }
                let s = self.scale(t).expect("weibull");
                let x = w / s;
                Ok(shape / s * x.powf(shape - 1.0) * (-x.powf(shape)).exp())
            }
            DelayModel::EmpiricalCohort { .. } => Err(Error::Unsupported(
                "the empirical cohort delay has no density; fit the WeibullTv variant instead".into(),
            )),
        }
    }

    /// Smallest `w` with `H_t(w) >= u`.
    pub fn quantile(&self, t: f64, u: f64) -> f64 {
        match *self {
            DelayModel::WeibullTv { shape, .. } => {
                self.scale(t).expect("weibull") * (-(-u).ln_1p()).powf(1.0 / shape)
            }
            DelayModel::EmpiricalCohort { .. } => self.cohort(t).quantile(u),
        }
    }

    /// `E[W | T = t]` in days.
    pub fn mean(&self, t: f64) -> f64 {
        match *self {
            DelayModel::WeibullTv { shape, .. } => self.scale(t).expect("weibull") * ln_gamma(1.0 + 1.0 / shape).exp(),
            DelayModel::EmpiricalCohort { .. } => {
                let c = self.cohort(t);
                c.delays.iter().map(|&d| f64::from(d)).sum::<f64>() / c.delays.len() as f64
            }
        }
    }

    /// Draws a continuous delay by inversion.
    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        self.quantile(t, rng.random::<f64>())
    }

    /// Delay beyond which at most `eps` of the mass lies, maximised over `t` in `[t_lo, t_hi]`.
    pub fn support_bound(&self, t_lo: f64, t_hi: f64, eps: f64) -> f64 {
        match self {
            DelayModel::WeibullTv { .. } => self.quantile(t_lo, 1.0 - eps).max(self.quantile(t_hi, 1.0 - eps)),
            DelayModel::EmpiricalCohort { cohorts } => {
                cohorts.iter().filter_map(|c| c.delays.last()).map(|&d| f64::from(d) + 1.0).fold(0.0, f64::max)
            }
        }
    }
}

/// Outcome of a delay fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DelayFit {
    pub model: DelayModel,
    /// NaN for the empirical variant.
    pub log_likelihood: f64,
    pub parameters: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_obs: usize,
    /// The unconstrained optimum had `c1 > 0` and was projected onto `c1 = 0`.
    pub c1_projected: bool,
    pub warnings: Vec<String>,
}

/// `ln P[d <= W < d + 1]` for a Weibull with the given shape and scale.
fn ln_interval_prob(d: f64, shape: f64, scale: f64) -> f64 {
    let lo = (d / scale).powf(shape);
    let hi = ((d + 1.0) / scale).powf(shape);
    -lo + (-(lo - hi).exp()).ln_1p()
}

fn weibull_loglik(obs: &[(f64, f64)], shape: f64, c0: f64, c1: f64) -> f64 {
    obs.iter()
        .map(|&(t_years, d)| ln_interval_prob(d, shape, (c0 + c1 * t_years).exp()))
        .sum()
}

const MIN_COHORT: usize = 30;

/// Fits the delay model on the reported claims of `p`.
///
/// Recent accidents with long delays are not yet reported, so the fit is biased
/// towards short delays near the data cutoff.
pub fn fit_delay(p: &Portfolio, variant: DelayVariant) -> Result<DelayFit> {
    if p.len() < 100 {
        return Err(Error::InsufficientData(format!("delay fit needs at least 100 reported claims, got {}", p.len())));
    }
    match variant {
        DelayVariant::WeibullTv => fit_weibull_tv(p),
        DelayVariant::EmpiricalCohort => fit_empirical(p),
    }
}

fn fit_weibull_tv(p: &Portfolio) -> Result<DelayFit> {
    let obs: Vec<(f64, f64)> = p
        .claims()
        .iter()
        .map(|c| (c.accident_date.years_since_epoch(), f64::from(c.reporting_delay())))
        .collect();
    let n = obs.len() as f64;
    let t_bar = obs.iter().map(|o| o.0).sum::<f64>() / n;
    let mean_delay = obs.iter().map(|o| o.1).sum::<f64>() / n + 0.5;
    let mut warnings = Vec::new();

    let years: std::collections::BTreeSet<i32> = p.claims().iter().map(|c| c.accident_date.year()).collect();
    let single_year = years.len() < 2;
    if single_year {
        warnings.push("single accident year: trend c1 unidentified, fixed to 0".to_string());
    }

    // Optimise over (ln shape, centred intercept, c1) to decorrelate intercept and slope.
    let fit = |free_slope: bool| -> Result<(f64, f64, f64, f64)> {
        let obj = |x: &[f64]| {
            let c1 = if free_slope { x[2] } else { 0.0 };
            -weibull_loglik(&obs, x[0].exp(), x[1] - c1 * t_bar, c1)
        };
        let mut x0 = vec![0.0, mean_delay.ln()];
        let mut step = vec![0.3, 0.3];
        let mut bounds = vec![(-6.0, 5.0), (-10.0, 15.0)];
        if free_slope {
            x0.push(0.0);
            step.push(0.05);
            bounds.push((-5.0, 5.0));
        }
        let m = optim::nelder_mead(obj, &x0, &step, &bounds, Tolerance { f_tol: 1e-10, max_iter: 500 })?;
        let c1 = if free_slope { m.x[2] } else { 0.0 };
        Ok((m.x[0].exp(), m.x[1] - c1 * t_bar, c1, -m.value))
    };

    let mut c1_projected = false;
    let (shape, c0, c1, log_likelihood) = if single_year {
        fit(false)?
    } else {
        let full = fit(true)?;
        if full.2 > 0.0 {
            c1_projected = true;
            warnings.push(format!("fitted delay trend c1 = {:.4} > 0 projected onto c1 = 0", full.2));
            fit(false)?
        } else {
            full
        }
    };

    let std_errors = if c1_projected || single_year {
        let mut se = optim::standard_errors(|x| -weibull_loglik(&obs, x[0], x[1], 0.0), &[shape, c0]);
        se.push(f64::NAN);
        se
    } else {
        optim::standard_errors(|x| -weibull_loglik(&obs, x[0], x[1], x[2]), &[shape, c0, c1])
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(DelayFit {
        model: DelayModel::WeibullTv { shape, c0, c1 },
        log_likelihood,
        parameters: vec!["shape".into(), "c0".into(), "c1".into()],
        estimates: vec![shape, c0, c1],
        std_errors,
        n_obs: obs.len(),
        c1_projected,
        warnings,
    })
}

fn fit_empirical(p: &Portfolio) -> Result<DelayFit> {
    let mut by_year: BTreeMap<i32, Vec<u32>> = BTreeMap::new();
    for c in p.claims() {
        by_year.entry(c.accident_date.year()).or_default().push(c.reporting_delay() as u32);
    }
    let first = *by_year.keys().next().expect("non-empty");
    let last = *by_year.keys().next_back().expect("non-empty");
    let mut warnings = Vec::new();
    let mut cohorts: Vec<DelayCohort> = Vec::new();
    let mut cur: Option<DelayCohort> = None;
    for year in first..=last {
        let delays = by_year.remove(&year).unwrap_or_default();
        let c = cur.get_or_insert(DelayCohort { first_year: year, last_year: year, delays: Vec::new() });
        c.last_year = year;
        c.delays.extend(delays);
        if c.delays.len() >= MIN_COHORT {
            cohorts.push(cur.take().expect("set above"));
        }
    }
    if let Some(rest) = cur {
        match cohorts.last_mut() {
            Some(prev) => {
                warnings.push(format!(
                    "cohort {}-{} has fewer than {MIN_COHORT} claims; merged with {}-{}",
                    rest.first_year, rest.last_year, prev.first_year, prev.last_year
                ));
                prev.last_year = rest.last_year;
                prev.delays.extend(rest.delays);
            }
            None => cohorts.push(rest),
        }
    }
    for c in &mut cohorts {
        c.delays.sort_unstable();
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(DelayFit {
        model: DelayModel::EmpiricalCohort { cohorts },
        log_likelihood: f64::NAN,
        parameters: Vec::new(),
        estimates: Vec::new(),
        std_errors: Vec::new(),
        n_obs: p.len(),
        c1_projected: false,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::{ClaimRecord, ClaimType};
    use crate::numerics::quad;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp10() -> DelayModel {
        DelayModel::weibull_tv(1.0, 10f64.ln(), 0.0).unwrap()
    }

    fn portfolio(rows: &[(i32, i32)]) -> Portfolio {
        let claims = rows
            .iter()
            .enumerate()
            .map(|(i, &(t, d))| {
                ClaimRecord::new(format!("c{i}"), ClaimType::MaterialDamage, Day(t), Day(t + d), vec![]).unwrap()
            })
            .collect();
        Portfolio::from_claims(claims).unwrap()
    }

    #[test]
    fn exponential_special_case() {
        let m = exp10();
        assert!((m.cdf(0.0, 10.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(m.cdf(0.0, 0.0), 0.0);
        assert!((m.density(0.0, 1e-12).unwrap() - 0.1).abs() < 1e-12);
        assert!((m.quantile(0.0, 1.0 - (-1.0f64).exp()) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn density_matches_finite_difference() {
        let m = DelayModel::weibull_tv(1.5, 3.0, -0.05).unwrap();
        let (t, w, eps) = (2000.0, 5.0, 1e-4);
        let fd = (m.cdf(t, w + eps) - m.cdf(t, w - eps)) / (2.0 * eps);
        let d = m.density(t, w).unwrap();
        assert!((fd - d).abs() / d < 1e-6);
    }

    #[test]
    fn rayleigh_mode() {
        let m = DelayModel::weibull_tv(2.0, 20f64.ln(), 0.0).unwrap();
        let mode = 20.0 / 2f64.sqrt();
        let f = |w: f64| m.density(0.0, w).unwrap();
        assert!(f(mode) > f(mode - 1e-3) && f(mode) > f(mode + 1e-3));
    }

    #[test]
    fn density_integrates_to_one() {
        for shape in [0.7, 1.0, 1.5, 3.0] {
            let m = DelayModel::weibull_tv(shape, 3.0, -0.05).unwrap();
            let total = quad::integrate_to_inf(|w| m.density(1000.0, w).unwrap(), 0.0, 1e-12, 1e-10);
            assert!((total - 1.0).abs() < 1e-6, "shape {shape}: {total}");
        }
    }

    #[test]
    fn quantile_round_trip_and_tail() {
        let m = DelayModel::weibull_tv(0.8, 4.0, -0.1).unwrap();
        for i in 1..100 {
            let u = f64::from(i) / 100.0;
            assert!((m.cdf(3000.0, m.quantile(3000.0, u)) - u).abs() < 1e-10);
        }
        let s = m.scale(3000.0).unwrap();
        assert!(m.cdf(3000.0, 50.0 * s) >= 1.0 - 1e-6);
    }

    #[test]
    fn empirical_cdf_definition() {
        let rows: Vec<(i32, i32)> = (0..120).map(|i| (i, 1 + i % 3)).collect();
        let fit = fit_delay(&portfolio(&rows), DelayVariant::EmpiricalCohort).unwrap();
        assert!((fit.model.cdf(10.0, 2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!(fit.model.density(10.0, 2.0).is_err());
        assert_eq!(fit.model.quantile(10.0, 1.0), 3.0);
    }

    #[test]
    fn sparse_cohorts_are_merged() {
        let mut rows: Vec<(i32, i32)> = (0..120).map(|i| (i, 2)).collect();
        rows.extend((0..10).map(|i| (400 + i, 5)));
        let fit = fit_delay(&portfolio(&rows), DelayVariant::EmpiricalCohort).unwrap();
        let DelayModel::EmpiricalCohort { cohorts } = &fit.model else { panic!() };
        assert_eq!(cohorts.len(), 1);
        assert_eq!((cohorts[0].first_year, cohorts[0].last_year), (2000, 2001));
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn increasing_delays_project_trend_to_zero() {
        let rows: Vec<(i32, i32)> = (0..400).map(|i| (i * 5, 1 + i / 20 + i % 7)).collect();
        let fit = fit_delay(&portfolio(&rows), DelayVariant::WeibullTv).unwrap();
        assert!(fit.c1_projected);
        assert_eq!(fit.estimates[2], 0.0);
    }

    #[test]
    fn single_year_fixes_trend() {
        let rows: Vec<(i32, i32)> = (0..200).map(|i| (i, i % 11)).collect();
        let fit = fit_delay(&portfolio(&rows), DelayVariant::WeibullTv).unwrap();
        assert_eq!(fit.estimates[2], 0.0);
        assert!(!fit.warnings.is_empty());
    }

    #[test]
    fn sample_reproducible() {
        let m = DelayModel::weibull_tv(1.5, 3.0, -0.05).unwrap();
        let a = m.sample(100.0, &mut ChaCha8Rng::seed_from_u64(4));
        let b = m.sample(100.0, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_positive_trend() {
        assert!(DelayModel::weibull_tv(1.0, 1.0, 0.1).is_err());
        assert!(DelayModel::weibull_tv(0.0, 1.0, 0.0).is_err());
    }
}
