use serde::{Deserialize, Serialize};

use super::family::FamilyTag;
use super::tv::{CopulaSpec, ParamPath};
use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::numerics::optim::{self, Tolerance};
use crate::payment::CountProcess;

/// A claim's delay and payment count at the end of its observation horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayCountPair {
    /// Accident time, days since epoch.
    pub t: f64,
    /// Reporting delay, days.
    pub w: f64,
    /// Payments observed within the horizon.
    pub n: u64,
    /// Observation horizon in internal years.
    pub tau: f64,
}

/// Margin-transformed pair: `u = H_t(w)`, `q_n = Q_τ(n)`, `q_prev = Q_τ(n - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaObs {
    pub u: f64,
    pub q_n: f64,
    pub q_prev: f64,
    pub tau: f64,
}

/// Applies the fitted margins; their parameters stay fixed while the copula is fitted.
pub fn copula_observations(pairs: &[DelayCountPair], delay: &DelayModel, counts: &CountProcess) -> Vec<CopulaObs> {
    pairs
        .iter()
        .map(|p| CopulaObs {
            u: delay.cdf(p.t, p.w),
            q_n: counts.count_cdf(p.tau, p.n as i64),
            q_prev: counts.count_cdf(p.tau, p.n as i64 - 1),
            tau: p.tau,
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CopulaFit {
    pub spec: CopulaSpec,
    /// Copula part of the log-likelihood; the delay density term is common to all families.
    pub log_likelihood: f64,
    pub aic: f64,
    pub parameters: Vec<String>,
    /// Natural parameter for a static fit; `(eta0, eta_inf, kappa)` on the link scale otherwise.
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_obs: usize,
    /// An estimate sits on a search bound.
    pub boundary: bool,
}

fn loglik(obs: &[CopulaObs], spec: &CopulaSpec) -> f64 {
    obs.iter()
        .map(|o| {
            let c = spec.at(o.tau);
            (c.h(o.u, o.q_n) - c.h(o.u, o.q_prev)).max(1e-300).ln()
        })
        .sum()
}

const MIN_PAIRS: usize = 200;
const DELTA_MAX: f64 = 20.0;
const KAPPA_MAX: f64 = 50.0;

/// Maximum likelihood for the copula with margins held fixed.
pub fn fit_copula(obs: &[CopulaObs], family: FamilyTag, time_varying: bool) -> Result<CopulaFit> {
    if obs.len() < MIN_PAIRS {
        return Err(Error::InsufficientData(format!(
            "copula fit needs at least {MIN_PAIRS} pairs, got {}",
            obs.len()
        )));
    }
    let n_obs = obs.len();
    if family == FamilyTag::Independence {
        let spec = CopulaSpec::independence();
        let ll = loglik(obs, &spec);
        return Ok(CopulaFit {
            spec,
            log_likelihood: ll,
            aic: -2.0 * ll,
            parameters: Vec::new(),
            estimates: Vec::new(),
            std_errors: Vec::new(),
            n_obs,
            boundary: false,
        });
    }
    let (lo, hi) = family.link_bounds();
    let static_spec = |eta: f64| CopulaSpec { family, path: ParamPath::Static { eta } };
    let m = optim::brent(|eta| -loglik(obs, &static_spec(eta)), lo, hi, 1e-9, 500)?;
    let eta = m.x[0];
    let near = |x: f64, b: f64| (x - b).abs() < 1e-5 * (1.0 + b.abs());

    if !time_varying {
        let spec = static_spec(eta);
        let natural = spec.at(0.0).parameter();
        let nat_spec = |p: f64| -> Option<CopulaSpec> {
            let c = match family {
                FamilyTag::Clayton => super::CopulaFamily::Clayton { theta: p },
                FamilyTag::Gumbel => super::CopulaFamily::Gumbel { theta: p },
                FamilyTag::Frank => super::CopulaFamily::Frank { theta: p },
                FamilyTag::Gaussian => super::CopulaFamily::Gaussian { rho: p },
                FamilyTag::Independence => unreachable!(),
            };
            CopulaSpec::fixed(c).ok()
        };
        let se = optim::standard_errors(
            |x| nat_spec(x[0]).map_or(f64::INFINITY, |s| -loglik(obs, &s)),
            &[natural],
        );
        let ll = -m.value;
        return Ok(CopulaFit {
            spec,
            log_likelihood: ll,
            aic: 2.0 - 2.0 * ll,
            parameters: vec![match family {
                FamilyTag::Gaussian => "rho".into(),
                _ => "theta".into(),
            }],
            estimates: vec![natural],
            std_errors: se,
            n_obs,
            boundary: near(eta, lo) || near(eta, hi),
        });
    }

    let tv_spec = |x: &[f64]| CopulaSpec {
        family,
        path: ParamPath::TimeVarying { eta0: x[1] + x[0], eta_inf: x[1], kappa: x[2] },
    };
    // x = (delta, eta_inf, kappa) with eta0 = eta_inf + delta.
    let obj = |x: &[f64]| -loglik(obs, &tv_spec(x));
    let bounds = [(0.0, DELTA_MAX), (lo, hi), (0.0, KAPPA_MAX)];
    let tol = Tolerance { f_tol: 1e-9, max_iter: 500 };
    let mut best = optim::nelder_mead(obj, &[0.5, eta - 0.25, 1.0], &[0.5, 0.5, 1.0], &bounds, tol)?;
    // The static optimum is a point of the time-varying family; never return worse.
    if best.value > m.value {
        best.x = vec![0.0, eta, 0.0];
        best.value = m.value;
    }
    let x = best.x.clone();
    let spec = tv_spec(&x);
    let boundary = bounds.iter().zip(&x).any(|(&(l, h), &v)| near(v, l) || near(v, h));
    let estimates = vec![x[1] + x[0], x[1], x[2]];
    let std_errors = optim::standard_errors(
        |p| {
            if p[0] < p[1] || p[2] < 0.0 {
                return f64::INFINITY;
            }
            -loglik(obs, &CopulaSpec { family, path: ParamPath::TimeVarying { eta0: p[0], eta_inf: p[1], kappa: p[2] } })
        },
        &estimates,
    );
    let ll = -best.value;
    Ok(CopulaFit {
        spec,
        log_likelihood: ll,
        aic: 6.0 - 2.0 * ll,
        parameters: vec!["eta0".into(), "eta_inf".into(), "kappa".into()],
        estimates,
        std_errors,
        n_obs,
        boundary,
    })
}

/// Fits every candidate and orders the fits by AIC, best first.
pub fn select_copula(obs: &[CopulaObs], candidates: &[FamilyTag], time_varying: bool) -> Result<Vec<CopulaFit>> {
    let mut fits = Vec::new();
    let mut last_err = None;
    for &f in candidates {
        match fit_copula(obs, f, time_varying) {
            Ok(fit) => fits.push(fit),
            Err(e) => {
                log::warn!("copula family {f:?} failed to fit: {e}");
                last_err = Some(e);
            }
        }
    }
    if fits.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::InvalidParameter("no candidate copula families".into())));
    }
    fits.sort_by(|a, b| a.aic.total_cmp(&b.aic));
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{simulate_delay_count, CopulaFamily};
    use crate::payment::IntensityFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic(spec: &CopulaSpec, n: usize, seed: u64) -> Vec<CopulaObs> {
        let delay = DelayModel::weibull_tv(1.2, 3.0, 0.0).unwrap();
        let counts = CountProcess::new(IntensityFunction::exponential(4.0, 0.8).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<DelayCountPair> = (0..n)
            .map(|_| {
                let tau = rng.random_range(0.2..6.0);
                let (w, n) = simulate_delay_count(&delay, &counts, spec, 0.0, tau, &mut rng);
                DelayCountPair { t: 0.0, w, n, tau }
            })
            .collect();
        copula_observations(&pairs, &delay, &counts)
    }

    #[test]
    fn static_clayton_recovered() {
        let spec = CopulaSpec::fixed(CopulaFamily::Clayton { theta: 2.0 }).unwrap();
        let obs = synthetic(&spec, 3000, 1);
        let fit = fit_copula(&obs, FamilyTag::Clayton, false).unwrap();
        assert!((fit.estimates[0] - 2.0).abs() < 4.0 * fit.std_errors[0], "{:?}", fit.estimates);
    }

    #[test]
    fn time_varying_constraints_hold() {
        let spec = CopulaSpec::time_varying(FamilyTag::Clayton, 1.5, -0.5, 1.0).unwrap();
        let obs = synthetic(&spec, 1500, 2);
        let fit = fit_copula(&obs, FamilyTag::Clayton, true).unwrap();
        let ParamPath::TimeVarying { eta0, eta_inf, kappa } = fit.spec.path else { panic!() };
        assert!(kappa >= 0.0 && eta0 >= eta_inf);
        let st = fit_copula(&obs, FamilyTag::Clayton, false).unwrap();
        assert!(fit.log_likelihood >= st.log_likelihood - 1e-9);
    }

    #[test]
    fn too_few_pairs() {
        let obs = vec![CopulaObs { u: 0.5, q_n: 0.5, q_prev: 0.2, tau: 1.0 }; 10];
        assert!(fit_copula(&obs, FamilyTag::Clayton, false).is_err());
    }
}
