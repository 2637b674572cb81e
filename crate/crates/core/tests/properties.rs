use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use granular_core::claims::{split_rbns_ibnr, ClaimRecord, ClaimType, PaymentEvent, Portfolio};
use granular_core::copula::{conditional_count_pmf, CopulaFamily, CopulaSpec};
use granular_core::freq::{CountBase, CountDistribution};
use granular_core::reserving::{
    ibnr_count_pmf, ibnr_simulate, rbns_predict, reserve_summary, simulate_reserves, ReserveDistribution, Scenario,
    ValuationWindow, DEFAULT_LEVELS,
};
use granular_core::synth::{generate_portfolio, SynthConfig};
use granular_core::Day;

fn family() -> impl Strategy<Value = CopulaFamily> {
    prop_oneof![
        Just(CopulaFamily::Independence),
        (0.01f64..20.0).prop_map(|theta| CopulaFamily::Clayton { theta }),
        (1.0f64..15.0).prop_map(|theta| CopulaFamily::Gumbel { theta }),
        (-25.0f64..25.0).prop_map(|theta| CopulaFamily::Frank { theta }),
        (-0.95f64..0.95).prop_map(|rho| CopulaFamily::Gaussian { rho }),
    ]
}

fn count_distribution() -> impl Strategy<Value = CountDistribution> {
    prop_oneof![
        (0.05f64..30.0).prop_map(|m| CountDistribution::poisson(m).unwrap()),
        (0.2f64..10.0, 0.1f64..0.95).prop_map(|(r, p)| CountDistribution::negative_binomial(r, p).unwrap()),
        (0.1f64..10.0, 0.0f64..0.9)
            .prop_map(|(m, z)| CountDistribution::zero_modified(CountBase::Poisson { mean: m }, z).unwrap()),
        (0.3f64..5.0, 0.2f64..0.9, 0.0f64..0.9).prop_map(|(r, p, z)| {
            CountDistribution::zero_modified(CountBase::NegativeBinomial { size: r, prob: p }, z).unwrap()
        }),
    ]
}

fn poisson_cdf(mean: f64, n: i64) -> f64 {
    let mut term = (-mean).exp();
    let mut acc = 0.0;
    for k in 0..=n {
        if k > 0 {
            term *= mean / k as f64;
        }
        acc += term;
    }
    acc.min(1.0)
}

fn small_model() -> SynthConfig {
    let mut cfg = SynthConfig::default();
    cfg.start = Day::from_ymd(2013, 1, 1).unwrap();
    cfg.end = Day::from_ymd(2015, 12, 31).unwrap();
    cfg.with_expected_claims(600).unwrap()
}

proptest! {
    #[test]
    fn copula_within_frechet_bounds(c in family(), u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let x = c.cdf(u, v);
        prop_assert!(x >= (u + v - 1.0).max(0.0) - 1e-12 && x <= u.min(v) + 1e-12, "{c:?} C({u},{v}) = {x}");
    }

    #[test]
    fn h_function_is_a_conditional_cdf(c in family(), u in 0.001f64..0.999, v1 in 0.0f64..=1.0, v2 in 0.0f64..=1.0) {
        let (lo, hi) = (v1.min(v2), v1.max(v2));
        let (a, b) = (c.h(u, lo), c.h(u, hi));
        prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        prop_assert!(a <= b + 1e-12, "{c:?} h({u}, .) decreasing: {a} > {b}");
        prop_assert!(c.h(u, 0.0).abs() < 1e-12 && (c.h(u, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h_inverse_inverts(c in family(), u in 0.01f64..0.99, p in 0.01f64..0.99) {
        let v = c.h_inv(u, p);
        prop_assert!((c.h(u, v) - p).abs() < 1e-7, "{c:?} h(u, h_inv(u, {p})) = {}", c.h(u, v));
    }

    #[test]
    fn count_pmf_has_unit_mass(d in count_distribution()) {
        let total: f64 = (0..5_000).map(|k| d.pmf(k)).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{d:?}: {total}");
    }

    #[test]
    fn conditional_count_pmf_has_unit_mass(c in family(), u in 0.001f64..0.999, mean in 0.01f64..40.0) {
        let total: f64 = (0..400i64)
            .map(|n| conditional_count_pmf(&c, u, poisson_cdf(mean, n), poisson_cdf(mean, n - 1)))
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{c:?} u={u} mean={mean}: {total}");
    }

    #[test]
    fn ibnr_count_pmf_has_unit_mass(c in family(), lag in 1i32..300, days in 1i32..400) {
        let mut m = small_model().model.types[0].clone();
        m.copula = CopulaSpec::fixed(c).unwrap();
        let a = Day::from_ymd(2015, 12, 31).unwrap();
        let window = ValuationWindow::one_year(a);
        let t = f64::from(a.0 - lag);
        let w = f64::from(lag + days.min(365));
        let total: f64 = (0..400).map(|n| ibnr_count_pmf(&m, &window, t, w, n).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn quantiles_are_monotone(totals in prop::collection::vec(0.0f64..1e7, 1..300)) {
        let a = Day::from_ymd(2016, 12, 31).unwrap();
        let mut d = ReserveDistribution {
            window: ValuationWindow::one_year(a),
            seed: 0,
            claim_types: vec![ClaimType::BodilyInjury],
            period_days: 365.25 / 12.0,
            scenarios: Vec::new(),
        };
        let n_per = d.n_periods();
        d.scenarios = totals
            .iter()
            .map(|&x| Scenario {
                rbns: 0.25 * x,
                ibnr: 0.75 * x,
                by_type: vec![x],
                cash_flows: vec![x / n_per as f64; n_per],
                rbns_payments: 1,
                ibnr_payments: 1,
                ibnr_claims: 1,
            })
            .collect();
        let s = reserve_summary(&d, &[0.9, 0.1, 0.5]).unwrap();
        let q: Vec<(f64, f64)> = s.total.quantiles.iter().map(|q| (q.level, q.value)).collect();
        prop_assert!(q.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1), "{q:?}");
        prop_assert!(q.iter().any(|p| p.0 == 0.995));
        let (lo, hi) = totals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        prop_assert!(q.iter().all(|p| p.1 >= lo && p.1 <= hi));
        prop_assert!(s.total.mean >= lo - 1e-6 && s.total.mean <= hi + 1e-6);
    }
}

fn claim_strategy() -> impl Strategy<Value = (i32, i32, Vec<(i32, f64)>)> {
    (0i32..3000, 0i32..400, prop::collection::vec((0i32..1500, 1.0f64..1e4), 0..5))
}

proptest! {
    #[test]
    fn split_partitions_the_incurred_claims(raw in prop::collection::vec(claim_strategy(), 1..60), a_off in 0i32..4000) {
        let claims: Vec<ClaimRecord> = raw
            .iter()
            .enumerate()
            .map(|(i, (t, delay, pays))| {
                let t = Day(*t);
                let r = t.offset(*delay);
                let pays = pays.iter().map(|&(d, x)| PaymentEvent { date: r.offset(d), amount: x }).collect();
                ClaimRecord::new(format!("C{i}"), ClaimType::BodilyInjury, t, r, pays).unwrap()
            })
            .collect();
        let p = Portfolio::from_claims(claims).unwrap();
        let a = Day(a_off.min(p.data_cutoff().0));
        let (rbns, future) = split_rbns_ibnr(&p, a).unwrap();
        let incurred = p.claims().iter().filter(|c| c.accident_date <= a).count();
        prop_assert_eq!(rbns.len() + future.len(), incurred);
        prop_assert!(rbns.iter().all(|c| c.reporting_date <= a && c.payments.iter().all(|x| x.date <= a)));
        prop_assert!(future.iter().all(|c| c.accident_date <= a && c.reporting_date > a));
        let mut ids: Vec<&str> = rbns.iter().chain(&future).map(|c| c.claim_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), incurred);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scenarios_conserve_amounts(seed in 0u64..1000, days in 30i32..2000) {
        let cfg = small_model();
        let p = generate_portfolio(&cfg, seed).unwrap();
        let a = p.data_cutoff();
        let window = ValuationWindow::new(a, a.offset(days)).unwrap();
        let d = simulate_reserves(&cfg.model, &p, &window, 20, seed).unwrap();
        for s in &d.scenarios {
            let total = s.total();
            let scale = total.abs().max(1.0);
            prop_assert!((s.rbns + s.ibnr - total).abs() <= 1e-9 * scale);
            prop_assert!((s.by_type.iter().sum::<f64>() - total).abs() <= 1e-9 * scale);
            prop_assert!((s.cash_flows.iter().sum::<f64>() - total).abs() <= 1e-9 * scale);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in p.claims() {
            let m = cfg.model.type_model(c.claim_type).unwrap();
            prop_assert!(rbns_predict(m, c, &window, &mut rng).iter().all(|x| window.contains(x.date)));
        }
        for c in ibnr_simulate(&cfg.model, &window, &mut rng).unwrap() {
            prop_assert!(c.accident_date <= a && window.contains(c.reporting_date));
            prop_assert!(c.payments.iter().all(|x| window.contains(x.date) && x.date >= c.reporting_date));
        }
    }

    #[test]
    fn rbns_prediction_ignores_the_observed_count(seed in 0u64..1000, k in 0usize..6, theta in 0.1f64..8.0) {
        let mut m = small_model().model.types[0].clone();
        m.copula = CopulaSpec::fixed(CopulaFamily::Clayton { theta }).unwrap();
        let a = Day::from_ymd(2015, 12, 31).unwrap();
        let window = ValuationWindow::one_year(a);
        let r = a.offset(-200);
        let claim = |n: usize| {
            let pays = (0..n).map(|i| PaymentEvent { date: r.offset(10 * i as i32), amount: 50.0 + i as f64 }).collect();
            ClaimRecord::new("X", ClaimType::BodilyInjury, r.offset(-30), r, pays).unwrap()
        };
        let draw = |c: &ClaimRecord| rbns_predict(&m, c, &window, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(draw(&claim(0)), draw(&claim(k)));
    }
}

#[test]
fn default_levels_include_solvency_quantile() {
    assert!(DEFAULT_LEVELS.contains(&0.995));
}
