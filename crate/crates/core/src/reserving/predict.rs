use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{GranularModel, TypeModel};
use super::ValuationWindow;
use crate::claims::{ClaimRecord, ClaimType, PaymentEvent};
use crate::copula::{conditional_count_pmf, conditional_count_quantile};
use crate::error::{Error, Result};
use crate::freq::sample_poisson;
use crate::payment::poisson_cdf;
use crate::time::{Day, DAYS_PER_YEAR};

/// Occurrences are simulated back to where at most this much delay mass remains.
const DELAY_TAIL: f64 = 1e-6;
/// Longest look-back for IBNR occurrences, in days.
const MAX_LOOKBACK: f64 = 60.0 * DAYS_PER_YEAR;
/// Delays are capped before conversion to whole days.
const MAX_DELAY_DAYS: f64 = 1e7;

/// `P[a < T + W <= b | T = t] = H_t(b - t) - H_t(a - t)` with `t` in days since epoch.
pub fn reporting_prob_window(m: &TypeModel, window: &ValuationWindow, t: f64) -> f64 {
    let a = f64::from(window.a.0);
    let b = f64::from(window.b.0);
    (m.delay.cdf(t, b - t) - m.delay.cdf(t, a - t)).max(0.0)
}

fn window_check(window: &ValuationWindow, t: f64, w: f64) -> Result<f64> {
    let a = f64::from(window.a.0);
    let b = f64::from(window.b.0);
    if !(t + w > a && t + w <= b) || w < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "reporting time t + w = {} lies outside the window ({a}, {b}]",
            t + w
        )));
    }
    Ok((b - t - w) / DAYS_PER_YEAR)
}

/// `P[N(b-t-w) = n | T = t, W = w]` from the copula at horizon `b - t - w`.
///
/// Sums to one over `n >= 0`.
pub fn ibnr_count_pmf(m: &TypeModel, window: &ValuationWindow, t: f64, w: f64, n: u64) -> Result<f64> {
    let tau = window_check(window, t, w)?;
    let mean = m.payments.intensity.cumulative(tau);
    let c = m.copula.at(tau);
    let u = m.delay.cdf(t, w);
    let n = n as i64;
    Ok(conditional_count_pmf(&c, u, poisson_cdf(mean, n), poisson_cdf(mean, n - 1)))
}

/// The IBNR count display evaluated as written: the mixed density at horizon
/// `b - t - w` divided by `H_t'(w) P[a < T + W <= b | T = t]`.
///
/// The delay density cancels against the chain-rule factor of the copula
/// derivative, leaving the conditional count pmf over the window probability.
/// Integrated against `H_t'(w)` over the admissible delays and summed over `n`
/// the result is one.
pub fn ibnr_count_conditional(m: &TypeModel, window: &ValuationWindow, t: f64, w: f64, n: u64) -> Result<f64> {
    let pmf = ibnr_count_pmf(m, window, t, w, n)?;
    let p = reporting_prob_window(m, window, t);
    if p <= 0.0 {
        return Err(Error::Degenerate(format!("no delay mass inside the window for t = {t}")));
    }
    Ok(pmf / p)
}

/// A claim produced by the simulation, with its payments inside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedClaim {
    pub claim_type: ClaimType,
    pub accident_date: Day,
    pub reporting_date: Day,
    pub payments: Vec<PaymentEvent>,
}

/// Continuation state of a reported claim.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RbnsState {
    pub reporting_date: Day,
    pub tau1: f64,
    pub tau2: f64,
    pub mass: f64,
    pub paid_count: usize,
    pub last_amount: Option<f64>,
}

impl RbnsState {
    pub fn new(m: &TypeModel, claim: &ClaimRecord, window: &ValuationWindow) -> Option<RbnsState> {
        let r = claim.reporting_date;
        if r > window.a {
            return None;
        }
        let tau1 = (f64::from(r.days_until(window.a)) + 1.0) / DAYS_PER_YEAR;
        let tau2 = (f64::from(r.days_until(window.b)) + 1.0) / DAYS_PER_YEAR;
        let observed: Vec<&PaymentEvent> = claim.payments.iter().filter(|p| p.date <= window.a).collect();
        Some(RbnsState {
            reporting_date: r,
            tau1,
            tau2,
            mass: m.payments.intensity.increment(tau1, tau2),
            paid_count: observed.len(),
            last_amount: observed.last().map(|p| p.amount).filter(|&x| x > 0.0),
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, m: &TypeModel, window: &ValuationWindow, rng: &mut R) -> Vec<PaymentEvent> {
        let n = sample_poisson(self.mass, rng);
        if n == 0 {
            return Vec::new();
        }
        let times = m.payments.place_times(self.tau1, self.tau2, n, rng);
        let amounts = m.severity.simulate_from(self.paid_count + 1, self.last_amount, n as usize, rng);
        let lo = window.a.offset(1);
        times
            .into_iter()
            .zip(amounts)
            .map(|(s, amount)| PaymentEvent { date: to_day(self.reporting_date, s, lo, window.b), amount })
            .collect()
    }
}

fn to_day(r: Day, tau: f64, lo: Day, hi: Day) -> Day {
    let d = r.offset((tau * DAYS_PER_YEAR).floor() as i32);
    d.clamp(lo, hi)
}

/// Future payments in `(a, b]` of a claim reported by `a`.
///
/// The count is the Poisson increment of the payment process over the window, so
/// the prediction does not depend on how many payments were observed by `a`.
/// Amounts continue the claim's payment order. Claims reported after `a` yield
/// nothing.
pub fn rbns_predict<R: Rng + ?Sized>(
    m: &TypeModel,
    claim: &ClaimRecord,
    window: &ValuationWindow,
    rng: &mut R,
) -> Vec<PaymentEvent> {
    RbnsState::new(m, claim, window).map_or_else(Vec::new, |s| s.draw(m, window, rng))
}

/// First day from which IBNR occurrences are simulated.
pub(crate) fn occurrence_start(m: &TypeModel, window: &ValuationWindow) -> Day {
    let a = f64::from(window.a.0);
    let lo = f64::from(m.exposure_start.0).max(a - MAX_LOOKBACK);
    let reach = m.delay.support_bound(lo, a, DELAY_TAIL).min(MAX_LOOKBACK);
    Day((a - reach.ceil()) as i32).max(m.exposure_start)
}

/// Develops an accident at `t` whose delay has probability-integral value `u`;
/// `None` unless it is reported inside the window.
pub(crate) fn develop<R: Rng + ?Sized>(
    m: &TypeModel,
    window: &ValuationWindow,
    t: Day,
    u: f64,
    rng: &mut R,
) -> Option<SimulatedClaim> {
    let w = m.delay.quantile(f64::from(t.0), u).min(MAX_DELAY_DAYS);
    let r = t.offset(w.floor() as i32);
    if !window.contains(r) {
        return None;
    }
    let tau_end = (f64::from(r.days_until(window.b)) + 1.0) / DAYS_PER_YEAR;
    let mean = m.payments.intensity.cumulative(tau_end);
    let v: f64 = rng.random();
    let n = conditional_count_quantile(&m.copula.at(tau_end), u, mean, v);
    let times = m.payments.place_times(0.0, tau_end, n, rng);
    let amounts = m.severity.simulate_amounts(n as usize, rng);
    let payments = times
        .into_iter()
        .zip(amounts)
        .map(|(s, amount)| PaymentEvent { date: to_day(r, s, r, window.b), amount })
        .collect();
    Some(SimulatedClaim { claim_type: m.claim_type, accident_date: t, reporting_date: r, payments })
}

/// Delay uniforms for the accidents of each type. Accidents of the two types on the
/// same day are paired in order and, when the model couples the types, their
/// uniforms are drawn from the outer copula.
pub(crate) fn delay_uniforms<R: Rng + ?Sized>(
    model: &GranularModel,
    arrivals: &[Vec<Day>],
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = arrivals.iter().map(|a| Vec::with_capacity(a.len())).collect();
    let coupled = model.coupling().filter(|_| arrivals.len() == 2);
    let Some(hac) = coupled else {
        for (k, a) in arrivals.iter().enumerate() {
            out[k].extend((0..a.len()).map(|_| rng.random::<f64>()));
        }
        return out;
    };
    // Both lists are sorted; walk them day by day.
    let (x, y) = (&arrivals[0], &arrivals[1]);
    let (mut i, mut j) = (0, 0);
    while i < x.len() || j < y.len() {
        let day = match (x.get(i), y.get(j)) {
            (Some(&d1), Some(&d2)) => d1.min(d2),
            (Some(&d), None) | (None, Some(&d)) => d,
            (None, None) => unreachable!(),
        };
        let ni = x[i..].iter().take_while(|&&d| d == day).count();
        let nj = y[j..].iter().take_while(|&&d| d == day).count();
        let paired = ni.min(nj);
        for _ in 0..paired {
            let (u1, u2) = hac.outer.sample(rng);
            out[0].push(u1);
            out[1].push(u2);
        }
        out[0].extend((paired..ni).map(|_| rng.random::<f64>()));
        out[1].extend((paired..nj).map(|_| rng.random::<f64>()));
        i += ni;
        j += nj;
    }
    out
}

/// IBNR claims reported inside the window, with their payments up to `b`.
///
/// Accidents are simulated from the occurrence model over the span in which a claim
/// can still be unreported at `a`; each draws a delay and is kept when reported in
/// `(a, b]`. The payment count over `(0, b - r]` is drawn from the copula-conditional
/// law given the delay, and the times by thinning on that interval.
pub fn ibnr_simulate<R: Rng + ?Sized>(
    model: &GranularModel,
    window: &ValuationWindow,
    rng: &mut R,
) -> Result<Vec<SimulatedClaim>> {
    let mut arrivals = Vec::with_capacity(model.types.len());
    for m in &model.types {
        let from = occurrence_start(m, window);
        if from >= window.a {
            arrivals.push(Vec::new());
        } else {
            arrivals.push(m.occurrence.simulate_arrivals(from, window.a, rng)?);
        }
    }
    let uniforms = delay_uniforms(model, &arrivals, rng);
    let mut out = Vec::new();
    for ((m, days), us) in model.types.iter().zip(&arrivals).zip(uniforms) {
        for (&t, u) in days.iter().zip(us) {
            if let Some(c) = develop(m, window, t, u, rng) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{CopulaFamily, CopulaSpec};
    use crate::delay::DelayModel;
    use crate::freq::{CountDistribution, OccurrenceModel};
    use crate::numerics::quad::integrate;
    use crate::payment::{CountProcess, IntensityFunction};
    use crate::severity::{SeverityFamily, SeverityModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn type_model(copula: CopulaSpec) -> TypeModel {
        TypeModel {
            claim_type: ClaimType::BodilyInjury,
            exposure_start: Day(0),
            occurrence: OccurrenceModel::constant(CountDistribution::poisson(2.0).unwrap()),
            delay: DelayModel::weibull_tv(1.5, 30f64.ln(), 0.0).unwrap(),
            payments: CountProcess::new(IntensityFunction::exponential(3.0, 1.2).unwrap()),
            severity: SeverityModel::Iid { family: SeverityFamily::LogNormal { mu: 7.0, sigma: 1.0 } },
            copula,
        }
    }

    #[test]
    fn window_probability_exponential() {
        // Weibull with shape 1 is the exponential; scale 10 days.
        let mut m = type_model(CopulaSpec::independence());
        m.delay = DelayModel::weibull_tv(1.0, 10f64.ln(), 0.0).unwrap();
        let a = Day(1000);
        let w = ValuationWindow::new(a, a.offset(10)).unwrap();
        let p = reporting_prob_window(&m, &w, 995.0);
        assert!((p - ((-0.5f64).exp() - (-1.5f64).exp())).abs() < 1e-12);
        assert!((p - 0.3834).abs() < 1e-4);
        let far = ValuationWindow::new(a, a.offset(1_000_000)).unwrap();
        assert!((reporting_prob_window(&m, &far, 1000.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independence_is_truncated_poisson() {
        let m = type_model(CopulaSpec::independence());
        let w = ValuationWindow::new(Day(1000), Day(1200)).unwrap();
        let (t, d) = (990.0, 40.0);
        let p = reporting_prob_window(&m, &w, t);
        let tau = (1200.0 - t - d) / DAYS_PER_YEAR;
        for n in 0..8 {
            let got = ibnr_count_conditional(&m, &w, t, d, n).unwrap();
            let want = m.payments.count_pmf(tau, n) / p;
            assert!((got - want).abs() < 1e-12 * want.max(1.0));
        }
        assert!(ibnr_count_conditional(&m, &w, t, 5.0, 1).is_err());
    }

    #[test]
    fn eq2_integrates_to_one() {
        let m = type_model(CopulaSpec::fixed(CopulaFamily::Clayton { theta: 2.0 }).unwrap());
        let w = ValuationWindow::new(Day(1000), Day(1100)).unwrap();
        let t = 980.0;
        let (lo, hi) = (1000.0 - t, 1100.0 - t);
        let f = |x: f64| {
            let dens = m.delay.density(t, x).unwrap();
            (0..60u64).map(|n| ibnr_count_conditional(&m, &w, t, x, n).unwrap()).sum::<f64>() * dens
        };
        let total = integrate(|x| f(x.max(lo + 1e-9)), lo, hi, 1e-10, 1e-10);
        assert!((total - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn short_window_leaves_no_payments() {
        let m = type_model(CopulaSpec::fixed(CopulaFamily::Gumbel { theta: 2.0 }).unwrap());
        let w = ValuationWindow::new(Day(1000), Day(1100)).unwrap();
        let p0 = ibnr_count_pmf(&m, &w, 1050.0, 50.0 - 1e-9, 0).unwrap();
        assert!(p0 > 1.0 - 1e-9);
    }

    #[test]
    fn rbns_ignores_observed_count() {
        let m = type_model(CopulaSpec::independence());
        let w = ValuationWindow::one_year(Day(2000));
        let pay = |d: i32| PaymentEvent { date: Day(d), amount: 50.0 };
        let quiet = ClaimRecord::new("a", ClaimType::BodilyInjury, Day(1800), Day(1850), vec![]).unwrap();
        let busy = ClaimRecord::new("b", ClaimType::BodilyInjury, Day(1800), Day(1850), vec![pay(1860), pay(1900)])
            .unwrap();
        let x = rbns_predict(&m, &quiet, &w, &mut ChaCha8Rng::seed_from_u64(4));
        let y = rbns_predict(&m, &busy, &w, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(x, y);
        assert!(x.iter().all(|p| w.contains(p.date)));
    }

    #[test]
    fn rbns_mean_count() {
        let m = type_model(CopulaSpec::independence());
        let w = ValuationWindow::one_year(Day(2000));
        let c = ClaimRecord::new("a", ClaimType::BodilyInjury, Day(1900), Day(1950), vec![]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let counts: Vec<f64> = (0..n).map(|_| rbns_predict(&m, &c, &w, &mut rng).len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / n as f64;
        let tau1 = 51.0 / DAYS_PER_YEAR;
        let tau2 = 416.0 / DAYS_PER_YEAR;
        let expect = m.payments.intensity.increment(tau1, tau2);
        assert!((mean - expect).abs() < 3.0 * (expect / n as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn no_ibnr_when_delays_are_short() {
        let mut m = type_model(CopulaSpec::independence());
        m.delay = DelayModel::weibull_tv(5.0, 0.5f64.ln(), 0.0).unwrap();
        m.exposure_start = Day(0);
        let model = GranularModel { types: vec![m], inter_type: None };
        let w = ValuationWindow::one_year(Day(3000));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            // Every delay is under a day, so no accident up to `a` is reported after it.
            assert!(ibnr_simulate(&model, &w, &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn ibnr_deterministic() {
        let model = GranularModel { types: vec![type_model(CopulaSpec::independence())], inter_type: None };
        let w = ValuationWindow::one_year(Day(3000));
        let a = ibnr_simulate(&model, &w, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let b = ibnr_simulate(&model, &w, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for c in &a {
            assert!(w.contains(c.reporting_date));
            assert!(c.payments.iter().all(|p| w.contains(p.date) && p.date >= c.reporting_date));
        }
    }
}
