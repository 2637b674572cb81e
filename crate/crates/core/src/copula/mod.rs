//! Dependence between reporting delay and payment count within a claim type, and
//! between claim types.
//!
//! The count margin is discrete, so the copula is identified only on the range of
//! `Q_τ`. Estimation targets the likelihood of the mixed density evaluated at the
//! lattice points `Q_τ(n)`.

mod family;
mod fit;
mod hac;
mod mixed;
mod tv;

pub use family::{CopulaFamily, FamilyTag};
pub use fit::{copula_observations, fit_copula, select_copula, CopulaFit, CopulaObs, DelayCountPair};
pub use hac::{fit_outer, HacSpec, OuterFit};
pub use mixed::{
    conditional_count_pmf, conditional_count_quantile, mixed_density, simulate_delay_count, sklar_joint_cdf,
};
pub use tv::{CopulaSpec, ParamPath};
