//! Payment counts as an inhomogeneous Poisson process in internal claim time.
//!
//! Internal time `τ` is measured in years from the reporting date. A payment made
//! `d` days after the reporting day is observed at `τ = (d + 0.5) / 365.25`.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::claims::ClaimRecord;
use crate::error::{Error, Result};
use crate::freq::sample_poisson;
use crate::numerics::optim;
use crate::numerics::special::ln_factorial;
use crate::time::{Day, DAYS_PER_YEAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum IntensityFunction {
    /// `λ(τ) = λ0 exp(-β τ)`.
    ExponentialDecay { lambda0: f64, beta: f64 },
    /// `λ(τ) = λ0 (1 + τ)^(-β)` with `β > 1`.
    PowerDecay { lambda0: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntensityVariant {
    ExponentialDecay,
    PowerDecay,
}

impl IntensityFunction {
    pub fn exponential(lambda0: f64, beta: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && beta > 0.0 && lambda0.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exponential decay needs lambda0 > 0, beta > 0, got ({lambda0}, {beta})"
            )));
        }
        Ok(IntensityFunction::ExponentialDecay { lambda0, beta })
    }

    pub fn power(lambda0: f64, beta: f64) -> Result<Self> {
        if !(lambda0 > 0.0 && beta > 1.0 && lambda0.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "power decay needs lambda0 > 0, beta > 1, got ({lambda0}, {beta})"
            )));
        }
        Ok(IntensityFunction::PowerDecay { lambda0, beta })
    }

    pub fn variant(&self) -> IntensityVariant {
        match self {
            IntensityFunction::ExponentialDecay { .. } => IntensityVariant::ExponentialDecay,
            IntensityFunction::PowerDecay { .. } => IntensityVariant::PowerDecay,
        }
    }

    pub fn lambda0(&self) -> f64 {
        match *self {
            IntensityFunction::ExponentialDecay { lambda0, .. } | IntensityFunction::PowerDecay { lambda0, .. } => {
                lambda0
            }
        }
    }

    pub fn rate(&self, tau: f64) -> f64 {
        match *self {
            IntensityFunction::ExponentialDecay { lambda0, beta } => lambda0 * (-beta * tau).exp(),
            IntensityFunction::PowerDecay { lambda0, beta } => lambda0 * (1.0 + tau).powf(-beta),
        }
    }

    /// `Λ(τ) = ∫_0^τ λ(s) ds`.
    pub fn cumulative(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        match *self {
            IntensityFunction::ExponentialDecay { lambda0, beta } => -lambda0 * (-beta * tau).exp_m1() / beta,
            IntensityFunction::PowerDecay { lambda0, beta } => {
                lambda0 * ((1.0 - beta) * tau.ln_1p()).exp_m1() / (1.0 - beta)
            }
        }
    }

    /// `Λ(τ2) - Λ(τ1)` computed without subtracting two large values.
    pub fn increment(&self, tau1: f64, tau2: f64) -> f64 {
        let tau1 = tau1.max(0.0);
        if tau2 <= tau1 {
            return 0.0;
        }
        match *self {
            IntensityFunction::ExponentialDecay { lambda0, beta } => {
                lambda0 * (-beta * tau1).exp() * -(-beta * (tau2 - tau1)).exp_m1() / beta
            }
            IntensityFunction::PowerDecay { lambda0, beta } => {
                let r = ((1.0 - beta) * ((1.0 + tau2) / (1.0 + tau1)).ln()).exp_m1();
                lambda0 * (1.0 + tau1).powf(1.0 - beta) * r / (1.0 - beta)
            }
        }
    }

    /// `Λ(∞)`, the expected lifetime number of payments.
    pub fn total(&self) -> f64 {
        match *self {
            IntensityFunction::ExponentialDecay { lambda0, beta } => lambda0 / beta,
            IntensityFunction::PowerDecay { lambda0, beta } => lambda0 / (beta - 1.0),
        }
    }

    /// Solves `Λ(τ) = y`; infinite when `y >= Λ(∞)`.
    pub fn inverse_cumulative(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= self.total() {
            return f64::INFINITY;
        }
        match *self {
            IntensityFunction::ExponentialDecay { lambda0, beta } => -(-beta * y / lambda0).ln_1p() / beta,
            IntensityFunction::PowerDecay { lambda0, beta } => {
                (((1.0 - beta) * y / lambda0).ln_1p() / (1.0 - beta)).exp_m1()
            }
        }
    }
}

/// Counting process `N(τ)` of payments after reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountProcess {
    pub intensity: IntensityFunction,
}

fn poisson_pmf(mean: f64, n: u64) -> f64 {
    if mean <= 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mean.ln() - mean - ln_factorial(n)).exp()
}

/// `P[Poisson(mean) <= n]`, summed in log space from the mode outward.
pub(crate) fn poisson_cdf(mean: f64, n: i64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    if mean <= 0.0 {
        return 1.0;
    }
    if (n as f64) > mean {
        return 1.0 - poisson_sf(mean, n);
    }
    // Left tail: terms grow towards n, sum from n downward.
    let mut term = poisson_pmf(mean, n as u64);
    let mut sum = 0.0;
    let mut k = n;
    while k >= 0 {
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        term *= k as f64 / mean;
        k -= 1;
    }
    sum.min(1.0)
}

/// `P[Poisson(mean) > n]`.
pub(crate) fn poisson_sf(mean: f64, n: i64) -> f64 {
    if n < 0 {
        return 1.0;
    }
    if mean <= 0.0 {
        return 0.0;
    }
    if (n as f64) < mean {
        return 1.0 - poisson_cdf(mean, n);
    }
    let mut k = n + 1;
    let mut term = poisson_pmf(mean, k as u64);
    let mut sum = 0.0;
    loop {
        sum += term;
        k += 1;
        term *= mean / k as f64;
        if term < sum * 1e-17 || term == 0.0 {
            return sum.min(1.0);
        }
    }
}

impl CountProcess {
    pub fn new(intensity: IntensityFunction) -> Self {
        CountProcess { intensity }
    }

    /// `P[N(τ) = n]`.
    pub fn count_pmf(&self, tau: f64, n: u64) -> f64 {
        poisson_pmf(self.intensity.cumulative(tau), n)
    }

    /// `Q_τ(n) = P[N(τ) <= n]`; zero for `n < 0`.
    pub fn count_cdf(&self, tau: f64, n: i64) -> f64 {
        poisson_cdf(self.intensity.cumulative(tau), n)
    }

    /// `1 - Q_τ(n)`, accurate in the upper tail.
    pub fn count_sf(&self, tau: f64, n: i64) -> f64 {
        poisson_sf(self.intensity.cumulative(tau), n)
    }

    /// `P[N(τ2) - N(τ1) = n]`, independent of the history up to `τ1`.
    pub fn increment_pmf(&self, tau1: f64, tau2: f64, n: u64) -> Result<f64> {
        if tau1 > tau2 || tau1 < 0.0 {
            return Err(Error::InvalidParameter(format!("increment needs 0 <= τ1 <= τ2, got ({tau1}, {tau2})")));
        }
        Ok(poisson_pmf(self.intensity.increment(tau1, tau2), n))
    }

    /// `∂Q_τ(n)/∂τ = -λ(τ) Λ(τ)^n e^{-Λ(τ)} / n!`.
    ///
    /// `Q_τ(n)` decreases in `τ`, hence the minus sign.
    pub fn dq_dtau(&self, tau: f64, n: u64) -> f64 {
        -self.intensity.rate(tau) * self.count_pmf(tau, n)
    }

    /// Ordered payment times on `(0, horizon]` by thinning a homogeneous process at rate `λ(0)`.
    pub fn simulate_payment_times<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Vec<f64> {
        let envelope = self.intensity.rate(0.0);
        let mut out = Vec::new();
        if horizon <= 0.0 {
            return out;
        }
        let mut s = 0.0;
        loop {
            let e: f64 = Exp1.sample(rng);
            s += e / envelope;
            if s > horizon {
                return out;
            }
            if rng.random::<f64>() * envelope <= self.intensity.rate(s) {
                out.push(s);
            }
        }
    }

    /// Ordered payment times on `(τ1, τ2]`, drawn with a Poisson count and then
    /// placed by thinning on the sub-interval.
    pub fn simulate_increment<R: Rng + ?Sized>(&self, tau1: f64, tau2: f64, rng: &mut R) -> Vec<f64> {
        let n = sample_poisson(self.intensity.increment(tau1, tau2), rng);
        self.place_times(tau1, tau2, n, rng)
    }

    /// `n` ordered iid times on `(τ1, τ2]` with density proportional to `λ`.
    pub fn place_times<R: Rng + ?Sized>(&self, tau1: f64, tau2: f64, n: u64, rng: &mut R) -> Vec<f64> {
        let tau1 = tau1.max(0.0);
        let mut out = Vec::with_capacity(n as usize);
        if n == 0 || tau2 <= tau1 {
            return out;
        }
        let envelope = self.intensity.rate(tau1);
        let width = tau2 - tau1;
        let mass = self.intensity.increment(tau1, tau2);
        let acceptance = mass / (envelope * width);
        while (out.len() as u64) < n {
            if acceptance > 0.02 {
                let s = tau1 + width * (1.0 - rng.random::<f64>());
                if rng.random::<f64>() * envelope <= self.intensity.rate(s) {
                    out.push(s);
                }
            } else {
                // Long intervals on a fast decay: invert the cumulative intensity instead.
                let base = self.intensity.cumulative(tau1);
                let y = base + mass * (1.0 - rng.random::<f64>());
                out.push(self.intensity.inverse_cumulative(y).clamp(tau1, tau2));
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }
}

/// Payment times and observation horizon of one reported claim, in internal years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentHistory {
    pub times: Vec<f64>,
    pub horizon: f64,
}

impl PaymentHistory {
    /// Payments observed through the end of day `cutoff`.
    pub fn from_claim(c: &ClaimRecord, cutoff: Day) -> PaymentHistory {
        let r = c.reporting_date;
        let times = c
            .payments
            .iter()
            .filter(|p| p.date <= cutoff)
            .map(|p| (f64::from(r.days_until(p.date)) + 0.5) / DAYS_PER_YEAR)
            .collect();
        let horizon = (f64::from(r.days_until(cutoff)) + 1.0).max(0.0) / DAYS_PER_YEAR;
        PaymentHistory { times, horizon }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityFit {
    pub intensity: IntensityFunction,
    pub log_likelihood: f64,
    pub parameters: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_events: usize,
    pub n_claims: usize,
    /// An estimate sits on a search bound.
    pub at_bound: bool,
}

const LN_LAMBDA0_BOUNDS: (f64, f64) = (-12.0, 10.0);
const LN_BETA_BOUNDS: (f64, f64) = (-10.0, 8.0);

fn unit_cumulative(variant: IntensityVariant, beta: f64, tau: f64) -> f64 {
    match variant {
        IntensityVariant::ExponentialDecay => IntensityFunction::ExponentialDecay { lambda0: 1.0, beta }.cumulative(tau),
        IntensityVariant::PowerDecay => IntensityFunction::PowerDecay { lambda0: 1.0, beta }.cumulative(tau),
    }
}

fn make(variant: IntensityVariant, lambda0: f64, beta: f64) -> IntensityFunction {
    match variant {
        IntensityVariant::ExponentialDecay => IntensityFunction::ExponentialDecay { lambda0, beta },
        IntensityVariant::PowerDecay => IntensityFunction::PowerDecay { lambda0, beta },
    }
}

fn loglik(data: &[PaymentHistory], f: &IntensityFunction) -> f64 {
    data.iter()
        .map(|h| h.times.iter().map(|&s| f.rate(s).ln()).sum::<f64>() - f.cumulative(h.horizon))
        .sum()
}

/// Maximum-likelihood fit of the intensity on censored payment histories.
///
/// For fixed decay `β` the likelihood is maximised by `λ0 = E / Σ Λ_1(h_i)`, where
/// `E` is the event count and `Λ_1` the unit-level cumulative intensity, leaving a
/// one-dimensional search over `β`.
pub fn fit_intensity(data: &[PaymentHistory], variant: IntensityVariant) -> Result<IntensityFit> {
    let n_events: usize = data.iter().map(|h| h.times.len()).sum();
    if n_events < 100 {
        return Err(Error::InsufficientData(format!("intensity fit needs at least 100 payments, got {n_events}")));
    }
    if data.iter().all(|h| h.horizon <= 0.0) {
        return Err(Error::Degenerate("every observation horizon is zero".into()));
    }
    let events = n_events as f64;
    let to_beta = |x: f64| match variant {
        IntensityVariant::ExponentialDecay => x.exp(),
        IntensityVariant::PowerDecay => 1.0 + x.exp(),
    };
    let profile_lambda0 = |beta: f64| {
        let exposure: f64 = data.iter().map(|h| unit_cumulative(variant, beta, h.horizon)).sum();
        (events / exposure).clamp(LN_LAMBDA0_BOUNDS.0.exp(), LN_LAMBDA0_BOUNDS.1.exp())
    };
    let objective = |x: f64| {
        let beta = to_beta(x);
        -loglik(data, &make(variant, profile_lambda0(beta), beta))
    };
    let m = optim::brent(objective, LN_BETA_BOUNDS.0, LN_BETA_BOUNDS.1, 1e-10, 500)?;
    let x = m.x[0];
    let beta = to_beta(x);
    let lambda0 = profile_lambda0(beta);
    let intensity = make(variant, lambda0, beta);
    let ln_l0 = lambda0.ln();
    let at_bound = x <= LN_BETA_BOUNDS.0 + 1e-6
        || x >= LN_BETA_BOUNDS.1 - 1e-6
        || ln_l0 <= LN_LAMBDA0_BOUNDS.0 + 1e-9
        || ln_l0 >= LN_LAMBDA0_BOUNDS.1 - 1e-9;
    if at_bound {
        log::warn!("intensity estimate on a search bound: lambda0={lambda0:.4e}, beta={beta:.4e}");
    }
    let estimates = vec![lambda0, beta];
    let std_errors = optim::standard_errors(
        |p| {
            if p[0] <= 0.0 || p[1] <= 0.0 || (variant == IntensityVariant::PowerDecay && p[1] <= 1.0) {
                return f64::INFINITY;
            }
            -loglik(data, &make(variant, p[0], p[1]))
        },
        &estimates,
    );
    Ok(IntensityFit {
        intensity,
        log_likelihood: loglik(data, &intensity),
        parameters: vec!["lambda0".into(), "beta".into()],
        estimates,
        std_errors,
        n_events,
        n_claims: data.len(),
        at_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn families() -> [IntensityFunction; 2] {
        [IntensityFunction::exponential(2.0, 1.0).unwrap(), IntensityFunction::power(3.0, 2.5).unwrap()]
    }

    #[test]
    fn cumulative_closed_forms() {
        let f = IntensityFunction::exponential(2.0, 1.0).unwrap();
        assert!((f.cumulative(1e6) - 2.0).abs() < 1e-15);
        for f in families() {
            assert_eq!(f.cumulative(0.0), 0.0);
            for tau in [0.1, 1.0, 10.0] {
                let q = quad::integrate(|s| f.rate(s), 0.0, tau, 1e-14, 1e-14);
                assert!((q - f.cumulative(tau)).abs() < 1e-10);
                assert!((f.inverse_cumulative(f.cumulative(tau)) - tau).abs() < 1e-9 * (1.0 + tau));
                assert!((f.increment(tau, 2.0 * tau) - (f.cumulative(2.0 * tau) - f.cumulative(tau))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn count_distribution_basics() {
        let c = CountProcess::new(IntensityFunction::exponential(1.0, 1e-9).unwrap());
        let tau = 1.0;
        assert!((c.count_pmf(tau, 0) - (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(c.count_pmf(0.0, 0), 1.0);
        assert_eq!(c.count_cdf(0.0, 5), 1.0);
        assert!((c.count_cdf(tau, 50) - 1.0).abs() < 1e-12);
        assert_eq!(c.count_cdf(tau, -1), 0.0);
        assert!((c.increment_pmf(0.0, 1.0, 0).unwrap() - (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(c.increment_pmf(0.7, 0.7, 0).unwrap(), 1.0);
        assert!(c.increment_pmf(1.0, 0.5, 0).is_err());
    }

    #[test]
    fn cdf_and_sf_complement() {
        for mean in [0.01, 0.7, 3.0, 40.0, 400.0] {
            for n in [0i64, 1, 2, 5, 30, 60, 500] {
                let s = poisson_cdf(mean, n) + poisson_sf(mean, n);
                assert!((s - 1.0).abs() < 1e-13, "mean {mean} n {n}");
            }
        }
    }

    #[test]
    fn dq_dtau_specialisations() {
        for f in families() {
            let c = CountProcess::new(f);
            let tau = 0.8;
            assert!((c.dq_dtau(tau, 0) + f.rate(tau) * (-f.cumulative(tau)).exp()).abs() < 1e-15);
            assert!(c.dq_dtau(1e4, 3).abs() < 1e-6);
        }
    }

    #[test]
    fn thinning_count_mean() {
        let c = CountProcess::new(IntensityFunction::exponential(3.0, 2.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let runs = 20_000;
        let total: usize = (0..runs).map(|_| c.simulate_payment_times(0.7, &mut rng).len()).sum();
        let expected = c.intensity.cumulative(0.7);
        let se = (expected / runs as f64).sqrt();
        assert!((total as f64 / runs as f64 - expected).abs() < 4.0 * se);
        assert!(c.simulate_payment_times(0.0, &mut rng).is_empty());
    }

    #[test]
    fn placed_times_inside_interval() {
        let c = CountProcess::new(IntensityFunction::exponential(50.0, 40.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (a, b) in [(0.0, 15.0), (0.5, 0.6)] {
            let ts = c.place_times(a, b, 200, &mut rng);
            assert_eq!(ts.len(), 200);
            assert!(ts.iter().all(|&s| s > a && s <= b));
            assert!(ts.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn fit_preconditions() {
        let few = vec![PaymentHistory { times: vec![0.1; 5], horizon: 1.0 }];
        assert!(fit_intensity(&few, IntensityVariant::ExponentialDecay).is_err());
        let zero = vec![PaymentHistory { times: vec![0.0; 200], horizon: 0.0 }];
        assert!(matches!(fit_intensity(&zero, IntensityVariant::ExponentialDecay), Err(Error::Degenerate(_))));
    }

    #[test]
    fn tiny_horizons_flag_bound() {
        let data: Vec<_> = (0..200).map(|_| PaymentHistory { times: vec![0.0], horizon: 1e-7 }).collect();
        let fit = fit_intensity(&data, IntensityVariant::ExponentialDecay).unwrap();
        assert!(fit.at_bound);
    }

    #[test]
    fn history_from_claim() {
        use crate::claims::{ClaimType, PaymentEvent};
        let c = ClaimRecord::new(
            "x",
            ClaimType::BodilyInjury,
            Day(0),
            Day(10),
            vec![PaymentEvent { date: Day(10), amount: 1.0 }, PaymentEvent { date: Day(40), amount: 1.0 }],
        )
        .unwrap();
        let h = PaymentHistory::from_claim(&c, Day(20));
        assert_eq!(h.times, vec![0.5 / DAYS_PER_YEAR]);
        assert_eq!(h.horizon, 11.0 / DAYS_PER_YEAR);
    }
}
