//! Accident occurrence: count distributions for the day gaps between consecutive
//! accidents, their maximum-likelihood fits, and arrival simulation.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::claims::Portfolio;
use crate::error::{Error, Result};
use crate::numerics::optim::{self, Tolerance};
use crate::numerics::special::{ln_factorial, ln_gamma};
use crate::time::Day;

/// Untruncated base of a count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum CountBase {
    Poisson { mean: f64 },
    /// `pmf(k) = Γ(k+r) / (Γ(r) k!) p^r (1-p)^k`.
    NegativeBinomial { size: f64, prob: f64 },
}

/// Distribution of a non-negative integer count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum CountDistribution {
    Poisson { mean: f64 },
    NegativeBinomial { size: f64, prob: f64 },
    /// Mass `zero_mass` at zero; the base conditioned on `k >= 1` elsewhere.
    ZeroModified { base: CountBase, zero_mass: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CountFamily {
    Poisson,
    NegativeBinomial,
    ZeroModifiedPoisson,
    ZeroModifiedNegativeBinomial,
}

impl CountFamily {
    pub const ALL: [CountFamily; 4] = [
        CountFamily::Poisson,
        CountFamily::NegativeBinomial,
        CountFamily::ZeroModifiedPoisson,
        CountFamily::ZeroModifiedNegativeBinomial,
    ];
}

impl CountBase {
    fn validate(&self) -> Result<()> {
        match *self {
            CountBase::Poisson { mean } if !(mean > 0.0 && mean.is_finite()) => {
                Err(Error::InvalidParameter(format!("Poisson mean must be positive, got {mean}")))
            }
            CountBase::NegativeBinomial { size, prob }
                if !(size > 0.0 && size.is_finite() && prob > 0.0 && prob < 1.0) =>
            {
                Err(Error::InvalidParameter(format!(
                    "negative binomial needs size > 0 and prob in (0,1), got ({size}, {prob})"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            CountBase::Poisson { mean } => kf * mean.ln() - mean - ln_factorial(k),
            CountBase::NegativeBinomial { size, prob } => {
                ln_gamma(kf + size) - ln_gamma(size) - ln_factorial(k) + size * prob.ln() + kf * (-prob).ln_1p()
            }
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CountBase::Poisson { mean } => mean,
            CountBase::NegativeBinomial { size, prob } => size * (1.0 - prob) / prob,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            CountBase::Poisson { mean } => mean,
            CountBase::NegativeBinomial { size, prob } => size * (1.0 - prob) / (prob * prob),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            CountBase::Poisson { mean } => sample_poisson(mean, rng),
            CountBase::NegativeBinomial { size, prob } => {
                let lambda = Gamma::new(size, (1.0 - prob) / prob).expect("validated parameters").sample(rng);
                sample_poisson(lambda, rng)
            }
        }
    }
}

impl From<CountBase> for CountDistribution {
    fn from(b: CountBase) -> Self {
        match b {
            CountBase::Poisson { mean } => CountDistribution::Poisson { mean },
            CountBase::NegativeBinomial { size, prob } => CountDistribution::NegativeBinomial { size, prob },
        }
    }
}

/// Poisson draw that tolerates a zero mean.
pub(crate) fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 30.0 {
        // Inversion keeps the draw count per variate at one uniform.
        let mut u: f64 = rng.random();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        loop {
            if u <= p || p == 0.0 {
                return k;
            }
            u -= p;
            k += 1;
            p *= mean / k as f64;
        }
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

impl CountDistribution {
    pub fn poisson(mean: f64) -> Result<Self> {
        let b = CountBase::Poisson { mean };
        b.validate()?;
        Ok(b.into())
    }

    pub fn negative_binomial(size: f64, prob: f64) -> Result<Self> {
        let b = CountBase::NegativeBinomial { size, prob };
        b.validate()?;
        Ok(b.into())
    }

    pub fn zero_modified(base: CountBase, zero_mass: f64) -> Result<Self> {
        base.validate()?;
        if !(0.0..1.0).contains(&zero_mass) {
            return Err(Error::InvalidParameter(format!("zero mass must lie in [0,1), got {zero_mass}")));
        }
        Ok(CountDistribution::ZeroModified { base, zero_mass })
    }

    pub fn family(&self) -> CountFamily {
        match self {
            CountDistribution::Poisson { .. } => CountFamily::Poisson,
            CountDistribution::NegativeBinomial { .. } => CountFamily::NegativeBinomial,
            CountDistribution::ZeroModified { base: CountBase::Poisson { .. }, .. } => CountFamily::ZeroModifiedPoisson,
            CountDistribution::ZeroModified { base: CountBase::NegativeBinomial { .. }, .. } => {
                CountFamily::ZeroModifiedNegativeBinomial
            }
        }
    }

    fn as_base(&self) -> Option<CountBase> {
        match *self {
            CountDistribution::Poisson { mean } => Some(CountBase::Poisson { mean }),
            CountDistribution::NegativeBinomial { size, prob } => Some(CountBase::NegativeBinomial { size, prob }),
            CountDistribution::ZeroModified { .. } => None,
        }
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        match (self.as_base(), self) {
            (Some(b), _) => b.ln_pmf(k),
            (None, CountDistribution::ZeroModified { base, zero_mass }) => {
                if k == 0 {
                    zero_mass.ln()
                } else {
                    (-zero_mass).ln_1p() + base.ln_pmf(k) - ln_one_minus_exp(base.ln_pmf(0))
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    pub fn cdf(&self, k: u64) -> f64 {
        (0..=k).map(|i| self.pmf(i)).sum::<f64>().min(1.0)
    }

    pub fn mean(&self) -> f64 {
        match (self.as_base(), self) {
            (Some(b), _) => b.mean(),
            (None, CountDistribution::ZeroModified { base, zero_mass }) => {
                (1.0 - zero_mass) * base.mean() / (1.0 - base.pmf(0))
            }
            _ => unreachable!(),
        }
    }

    pub fn variance(&self) -> f64 {
        match (self.as_base(), self) {
            (Some(b), _) => b.variance(),
            (None, CountDistribution::ZeroModified { base, zero_mass }) => {
                let scale = (1.0 - zero_mass) / (1.0 - base.pmf(0));
                let second = base.variance() + base.mean() * base.mean();
                let m = scale * base.mean();
                scale * second - m * m
            }
            _ => unreachable!(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match (self.as_base(), self) {
            (Some(b), _) => b.sample(rng),
            (None, CountDistribution::ZeroModified { base, zero_mass }) => {
                if rng.random::<f64>() < *zero_mass {
                    return 0;
                }
                for _ in 0..64 {
                    let k = base.sample(rng);
                    if k > 0 {
                        return k;
                    }
                }
                // Base mass sits almost entirely at zero: invert the truncated cdf.
                let p0 = base.pmf(0);
                let mut u = rng.random::<f64>() * (1.0 - p0);
                let mut k = 1;
                loop {
                    let p = base.pmf(k);
                    if u <= p || p == 0.0 {
                        return k;
                    }
                    u -= p;
                    k += 1;
                }
            }
            _ => unreachable!(),
        }
    }
}

/// `ln(1 - exp(x))` for `x <= 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// Outcome of a count-distribution fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountFit {
    pub distribution: CountDistribution,
    #[serde(deserialize_with = "crate::numerics::serde_nan::f64")]
    pub log_likelihood: f64,
    /// Parameter names in the order used by `estimates` and `std_errors`.
    pub parameters: Vec<String>,
    pub estimates: Vec<f64>,
    /// From the observed information; NaN where not identified.
    #[serde(deserialize_with = "crate::numerics::serde_nan::vec_f64")]
    pub std_errors: Vec<f64>,
    pub n_obs: usize,
    /// Set when an estimate sits on a search bound.
    pub boundary: bool,
}

impl CountFit {
    pub fn aic(&self) -> f64 {
        2.0 * self.estimates.len() as f64 - 2.0 * self.log_likelihood
    }
}

/// Sorted `(value, multiplicity)` pairs.
fn histogram(obs: &[u64]) -> Vec<(u64, f64)> {
    let mut map = BTreeMap::new();
    for &k in obs {
        *map.entry(k).or_insert(0.0) += 1.0;
    }
    map.into_iter().collect()
}

fn nb_loglik(hist: &[(u64, f64)], size: f64, prob: f64) -> f64 {
    let base = CountBase::NegativeBinomial { size, prob };
    hist.iter().map(|&(k, c)| c * base.ln_pmf(k)).sum()
}

fn truncated_loglik(hist: &[(u64, f64)], base: CountBase) -> f64 {
    let norm = ln_one_minus_exp(base.ln_pmf(0));
    hist.iter().filter(|(k, _)| *k > 0).map(|&(k, c)| c * (base.ln_pmf(k) - norm)).sum()
}

const LN_SIZE_BOUNDS: (f64, f64) = (-9.0, 18.0);
const ITER_CAP: usize = 500;

fn fit_negative_binomial(hist: &[(u64, f64)], n: f64, truncated: bool) -> Result<(f64, f64, bool)> {
    let total: f64 = hist.iter().map(|&(k, c)| k as f64 * c).sum();
    let mean = total / n;
    if truncated {
        // Two free parameters: profile is not closed form under truncation.
        let obj = |x: &[f64]| {
            let size = x[0].exp();
            let prob = 1.0 / (1.0 + (-x[1]).exp());
            -truncated_loglik(hist, CountBase::NegativeBinomial { size, prob })
        };
        let start_prob: f64 = 0.5;
        let m = optim::nelder_mead(
            obj,
            &[0.0, (start_prob / (1.0 - start_prob)).ln()],
            &[0.5, 0.5],
            &[LN_SIZE_BOUNDS, (-30.0, 30.0)],
            Tolerance { f_tol: 1e-10, max_iter: ITER_CAP },
        )?;
        let boundary = m.x[0] <= LN_SIZE_BOUNDS.0 + 1e-6 || m.x[0] >= LN_SIZE_BOUNDS.1 - 1e-6;
        return Ok((m.x[0].exp(), 1.0 / (1.0 + (-m.x[1]).exp()), boundary));
    }
    // For fixed size the MLE of prob is size / (size + mean).
    let profile = |ln_size: f64| {
        let size = ln_size.exp();
        -nb_loglik(hist, size, size / (size + mean))
    };
    let m = optim::brent(profile, LN_SIZE_BOUNDS.0, LN_SIZE_BOUNDS.1, 1e-10, ITER_CAP)?;
    let ln_size = m.x[0];
    let boundary = ln_size <= LN_SIZE_BOUNDS.0 + 1e-4 || ln_size >= LN_SIZE_BOUNDS.1 - 1e-4;
    let size = ln_size.exp();
    Ok((size, size / (size + mean), boundary))
}

fn fit_truncated_poisson(hist: &[(u64, f64)]) -> Result<f64> {
    let obj = |ln_mean: f64| -truncated_loglik(hist, CountBase::Poisson { mean: ln_mean.exp() });
    let m = optim::brent(obj, -20.0, 10.0, 1e-12, ITER_CAP)?;
    Ok(m.x[0].exp())
}

/// Maximum-likelihood fit of a count family.
///
/// Poisson is closed form. The zero-modified families split into the observed
/// zero fraction and a zero-truncated base fit on the positive counts.
pub fn fit_count_mle(observations: &[u64], family: CountFamily) -> Result<CountFit> {
    let n = observations.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("count fit needs at least 10 observations, got {n}")));
    }
    let nf = n as f64;
    let hist = histogram(observations);
    let zeros = hist.first().filter(|(k, _)| *k == 0).map_or(0.0, |h| h.1);
    let mean = observations.iter().map(|&k| k as f64).sum::<f64>() / nf;

    let (distribution, parameters, boundary): (CountDistribution, Vec<&str>, bool) = match family {
        CountFamily::Poisson => {
            if mean == 0.0 {
                return Err(Error::Degenerate("all observations are zero".into()));
            }
            (CountDistribution::Poisson { mean }, vec!["mean"], false)
        }
        CountFamily::NegativeBinomial => {
            if mean == 0.0 {
                return Err(Error::Degenerate("all observations are zero; negative binomial unidentified".into()));
            }
            let (size, prob, boundary) = fit_negative_binomial(&hist, nf, false)?;
            (CountDistribution::NegativeBinomial { size, prob }, vec!["size", "prob"], boundary)
        }
        CountFamily::ZeroModifiedPoisson | CountFamily::ZeroModifiedNegativeBinomial => {
            if zeros == nf {
                return Err(Error::Degenerate("all observations are zero; zero mass would be 1".into()));
            }
            let zero_mass = zeros / nf;
            if family == CountFamily::ZeroModifiedPoisson {
                let m = fit_truncated_poisson(&hist)?;
                let d = CountDistribution::ZeroModified { base: CountBase::Poisson { mean: m }, zero_mass };
                (d, vec!["zero_mass", "mean"], false)
            } else {
                let (size, prob, boundary) = fit_negative_binomial(&hist, nf - zeros, true)?;
                let d = CountDistribution::ZeroModified { base: CountBase::NegativeBinomial { size, prob }, zero_mass };
                (d, vec!["zero_mass", "size", "prob"], boundary)
            }
        }
    };

    let estimates = params_of(&distribution);
    let loglik_at = |theta: &[f64]| -> f64 {
        match from_params(family, theta) {
            Some(d) => hist.iter().map(|&(k, c)| c * d.ln_pmf(k)).sum(),
            None => f64::NEG_INFINITY,
        }
    };
    let log_likelihood = loglik_at(&estimates);
    let std_errors = match family {
        CountFamily::Poisson => vec![(mean / nf).sqrt()],
        _ => {
            let mut se = optim::standard_errors(|t| -loglik_at(t), &estimates);
            if matches!(family, CountFamily::ZeroModifiedPoisson | CountFamily::ZeroModifiedNegativeBinomial) {
                let p0 = estimates[0];
                se[0] = (p0 * (1.0 - p0) / nf).sqrt();
            }
            se
        }
    };
    Ok(CountFit {
        distribution,
        log_likelihood,
        parameters: parameters.into_iter().map(String::from).collect(),
        estimates,
        std_errors,
        n_obs: n,
        boundary,
    })
}

fn params_of(d: &CountDistribution) -> Vec<f64> {
    match *d {
        CountDistribution::Poisson { mean } => vec![mean],
        CountDistribution::NegativeBinomial { size, prob } => vec![size, prob],
        CountDistribution::ZeroModified { base: CountBase::Poisson { mean }, zero_mass } => vec![zero_mass, mean],
        CountDistribution::ZeroModified { base: CountBase::NegativeBinomial { size, prob }, zero_mass } => {
            vec![zero_mass, size, prob]
        }
    }
}

fn from_params(family: CountFamily, t: &[f64]) -> Option<CountDistribution> {
    let d = match family {
        CountFamily::Poisson => CountDistribution::poisson(t[0]),
        CountFamily::NegativeBinomial => CountDistribution::negative_binomial(t[0], t[1]),
        CountFamily::ZeroModifiedPoisson => CountDistribution::zero_modified(CountBase::Poisson { mean: t[1] }, t[0]),
        CountFamily::ZeroModifiedNegativeBinomial => {
            CountDistribution::zero_modified(CountBase::NegativeBinomial { size: t[1], prob: t[2] }, t[0])
        }
    };
    d.ok()
}

/// Fits every family in `candidates` and returns the one with the lowest AIC.
pub fn select_count_family(observations: &[u64], candidates: &[CountFamily]) -> Result<CountFit> {
    let mut best: Option<CountFit> = None;
    let mut last_err = None;
    for &f in candidates {
        match fit_count_mle(observations, f) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.aic() < b.aic()) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::InvalidParameter("no candidate families".into())))
}

/// Gaps between consecutive accident dates, `V_i = T_i - T_{i-1}` with `T_0 = 0`
/// (the epoch), each tagged with the calendar year of `T_{i-1}`.
pub fn date_differences(p: &Portfolio) -> Result<Vec<(i32, u64)>> {
    if p.len() < 2 {
        return Err(Error::InsufficientData("date differences need at least two claims".into()));
    }
    let mut prev = Day::EPOCH;
    let mut out = Vec::with_capacity(p.len());
    for c in p.claims() {
        let gap = prev.days_until(c.accident_date);
        if gap < 0 {
            return Err(Error::Data(format!("accident date {} precedes the epoch", c.accident_date)));
        }
        out.push((prev.year(), gap as u64));
        prev = c.accident_date;
    }
    Ok(out)
}

/// Date-difference distribution for one calendar year.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YearlyCount {
    pub year: i32,
    pub fit: CountFit,
}

/// Piecewise-constant-by-year occurrence model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccurrenceModel {
    /// Contiguous years, ascending.
    pub years: Vec<YearlyCount>,
    /// Years after this one reuse its distribution (their own data being
    /// incomplete because of late reporting).
    pub last_complete_year: Option<i32>,
}

/// Compares fitted distributions only; fit diagnostics may hold NaN.
impl PartialEq for OccurrenceModel {
    fn eq(&self, other: &Self) -> bool {
        self.last_complete_year == other.last_complete_year
            && self.years.len() == other.years.len()
            && self
                .years
                .iter()
                .zip(&other.years)
                .all(|(a, b)| a.year == b.year && a.fit.distribution == b.fit.distribution)
    }
}

/// How the per-year family is chosen.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub enum FamilyChoice<F> {
    Fixed(F),
    /// Lowest AIC among the listed families.
    Aic(Vec<F>),
}

/// Minimum observations per fitted year; sparser years are pooled with a neighbour.
const MIN_YEAR_OBS: usize = 30;

impl OccurrenceModel {
    /// Fits one distribution per calendar year of the preceding accident.
    ///
    /// The gap from the epoch anchor to the first accident is excluded, since it is
    /// an inter-arrival only if observation starts at the epoch. Years with fewer
    /// than 30 gaps are pooled with the following year (or the preceding one at the end).
    pub fn fit(p: &Portfolio, choice: &FamilyChoice<CountFamily>) -> Result<OccurrenceModel> {
        let diffs = date_differences(p)?;
        let diffs = &diffs[1..];
        if diffs.len() < 10 {
            return Err(Error::InsufficientData("occurrence model needs at least 10 date differences".into()));
        }
        let first = diffs.first().expect("non-empty").0;
        let last = diffs.last().expect("non-empty").0;
        let mut by_year: BTreeMap<i32, Vec<u64>> = (first..=last).map(|y| (y, Vec::new())).collect();
        for &(y, v) in diffs {
            by_year.get_mut(&y).expect("year in range").push(v);
        }

        // Group consecutive years until each group has enough observations.
        let mut groups: Vec<(Vec<i32>, Vec<u64>)> = Vec::new();
        let mut cur: (Vec<i32>, Vec<u64>) = (Vec::new(), Vec::new());
        for (y, obs) in by_year {
            cur.0.push(y);
            cur.1.extend(obs);
            if cur.1.len() >= MIN_YEAR_OBS {
                groups.push(std::mem::take(&mut cur));
            }
        }
        if !cur.0.is_empty() {
            match groups.last_mut() {
                Some(g) => {
                    log::warn!("years {:?} have too few accidents; pooled with {:?}", cur.0, g.0);
                    g.0.extend(cur.0);
                    g.1.extend(cur.1);
                }
                None => groups.push(cur),
            }
        }

        let mut years = Vec::new();
        for (ys, obs) in groups {
            let fit = match choice {
                FamilyChoice::Fixed(f) => fit_count_mle(&obs, *f)?,
                FamilyChoice::Aic(c) => select_count_family(&obs, c)?,
            };
            years.extend(ys.into_iter().map(|year| YearlyCount { year, fit: fit.clone() }));
        }
        Ok(OccurrenceModel { years, last_complete_year: None })
    }

    /// A single distribution valid for every year.
    pub fn constant(distribution: CountDistribution) -> OccurrenceModel {
        let fit = CountFit {
            distribution,
            log_likelihood: f64::NAN,
            parameters: Vec::new(),
            estimates: params_of(&distribution),
            std_errors: Vec::new(),
            n_obs: 0,
            boundary: false,
        };
        OccurrenceModel { years: vec![YearlyCount { year: 2000, fit }], last_complete_year: None }
    }

    /// Distribution applying to gaps that start in `year`.
    pub fn distribution_for(&self, year: i32) -> &CountDistribution {
        let year = match self.last_complete_year {
            Some(c) => year.min(c),
            None => year,
        };
        let first = self.years.first().expect("fitted model has years").year;
        let idx = (year - first).clamp(0, self.years.len() as i32 - 1) as usize;
        &self.years[idx].fit.distribution
    }

    /// Simulates accident dates in `[from, to]`, restarting the gap sequence at `from`.
    pub fn simulate_arrivals<R: Rng + ?Sized>(&self, from: Day, to: Day, rng: &mut R) -> Result<Vec<Day>> {
        simulate_arrivals_with(|d, rng: &mut R| self.distribution_for(d.year()).sample(rng), from, to, rng)
    }

    /// Expected number of accidents per day implied by the distribution for `year`.
    pub fn daily_rate(&self, year: i32) -> f64 {
        1.0 / self.distribution_for(year).mean()
    }
}

/// Accumulates gaps drawn by `draw_gap` from `from` and returns every arrival up to
/// and including `to`.
pub fn simulate_arrivals_with<R, F>(mut draw_gap: F, from: Day, to: Day, rng: &mut R) -> Result<Vec<Day>>
where
    R: Rng + ?Sized,
    F: FnMut(Day, &mut R) -> u64,
{
    if from >= to {
        return Err(Error::InvalidParameter(format!("arrival window [{from}, {to}] is empty")));
    }
    let mut out = Vec::new();
    let mut t = from;
    loop {
        let gap = draw_gap(t, rng);
        let next = i64::from(t.0) + gap as i64;
        if next > i64::from(to.0) {
            return Ok(out);
        }
        t = Day(next as i32);
        out.push(t);
    }
}
