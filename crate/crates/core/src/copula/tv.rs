use serde::{Deserialize, Serialize};

use super::family::{CopulaFamily, FamilyTag};
use crate::error::{Error, Result};

/// Parameter path `ϑ(τ) = g⁻¹(η∞ + (η0 - η∞) e^{-κτ})` on the family's link scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ParamPath {
    Static { eta: f64 },
    /// `eta0 >= eta_inf` and `kappa >= 0`, so dependence weakens with `τ`.
    TimeVarying { eta0: f64, eta_inf: f64, kappa: f64 },
}

impl ParamPath {
    pub fn eta(&self, tau: f64) -> f64 {
        match *self {
            ParamPath::Static { eta } => eta,
            ParamPath::TimeVarying { eta0, eta_inf, kappa } => eta_inf + (eta0 - eta_inf) * (-kappa * tau.max(0.0)).exp(),
        }
    }

    /// The weakest point of the path, reached as `τ → ∞`.
    pub fn eta_limit(&self) -> f64 {
        match *self {
            ParamPath::Static { eta } => eta,
            ParamPath::TimeVarying { eta_inf, kappa, eta0 } => {
                if kappa > 0.0 {
                    eta_inf
                } else {
                    eta0
                }
            }
        }
    }
}

/// Copula between the reporting delay and the payment count of one claim type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: FamilyTag,
    pub path: ParamPath,
}

impl CopulaSpec {
    pub fn independence() -> CopulaSpec {
        CopulaSpec { family: FamilyTag::Independence, path: ParamPath::Static { eta: 0.0 } }
    }

    pub fn fixed(c: CopulaFamily) -> Result<CopulaSpec> {
        c.validate()?;
        Ok(CopulaSpec { family: c.tag(), path: ParamPath::Static { eta: c.to_link() } })
    }

    pub fn time_varying(family: FamilyTag, eta0: f64, eta_inf: f64, kappa: f64) -> Result<CopulaSpec> {
        let s = CopulaSpec { family, path: ParamPath::TimeVarying { eta0, eta_inf, kappa } };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let ParamPath::TimeVarying { eta0, eta_inf, kappa } = self.path {
            if !(kappa >= 0.0) || !(eta0 >= eta_inf) || !eta0.is_finite() || !eta_inf.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "time-varying copula needs kappa >= 0 and eta0 >= eta_inf, got ({eta0}, {eta_inf}, {kappa})"
                )));
            }
        }
        Ok(())
    }

    /// Copula in force at internal time `τ` (years).
    pub fn at(&self, tau: f64) -> CopulaFamily {
        self.family.from_link(self.path.eta(tau))
    }

    /// Copula reached as `τ → ∞`.
    pub fn limit(&self) -> CopulaFamily {
        self.family.from_link(self.path.eta_limit())
    }

    pub fn n_params(&self) -> usize {
        match (self.family, self.path) {
            (FamilyTag::Independence, _) => 0,
            (_, ParamPath::Static { .. }) => 1,
            (_, ParamPath::TimeVarying { .. }) => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_weakens_dependence() {
        for tag in [FamilyTag::Clayton, FamilyTag::Gumbel, FamilyTag::Frank, FamilyTag::Gaussian] {
            let s = CopulaSpec::time_varying(tag, 1.2, -0.5, 0.8).unwrap();
            let taus: Vec<f64> = (0..50).map(|i| s.at(f64::from(i) * 0.3).kendall_tau()).collect();
            assert!(taus.windows(2).all(|w| w[0] >= w[1]), "{tag:?}");
            assert!((s.limit().kendall_tau() - s.at(1e6).kendall_tau()).abs() < 1e-12);
        }
    }

    #[test]
    fn constraint_rejected() {
        assert!(CopulaSpec::time_varying(FamilyTag::Clayton, 0.0, 1.0, 1.0).is_err());
        assert!(CopulaSpec::time_varying(FamilyTag::Clayton, 1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn static_spec_ignores_tau() {
        let s = CopulaSpec::fixed(CopulaFamily::Clayton { theta: 2.0 }).unwrap();
        assert!((s.at(0.0).parameter() - 2.0).abs() < 1e-15);
        assert_eq!(s.at(0.0), s.at(30.0));
    }
}
