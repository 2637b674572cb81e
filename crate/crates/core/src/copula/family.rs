use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad;
use crate::numerics::special::{bvn_cdf, norm_cdf, norm_ppf};

/// Family label without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyTag {
    Independence,
    Clayton,
    Gumbel,
    Frank,
    Gaussian,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 5] =
        [FamilyTag::Independence, FamilyTag::Clayton, FamilyTag::Gumbel, FamilyTag::Frank, FamilyTag::Gaussian];

    /// Number of free parameters of a static copula.
    pub fn n_params(self) -> usize {
        usize::from(self != FamilyTag::Independence)
    }

    /// Maps the link scale `η ∈ ℝ` to the natural parameter.
    pub fn from_link(self, eta: f64) -> CopulaFamily {
        match self {
            FamilyTag::Independence => CopulaFamily::Independence,
            FamilyTag::Clayton => CopulaFamily::Clayton { theta: eta.exp() },
            FamilyTag::Gumbel => CopulaFamily::Gumbel { theta: 1.0 + eta.exp() },
            FamilyTag::Frank => CopulaFamily::Frank { theta: eta },
            FamilyTag::Gaussian => CopulaFamily::Gaussian { rho: eta.tanh() },
        }
    }

    /// Bounds of the link scale searched during fitting.
    pub fn link_bounds(self) -> (f64, f64) {
        match self {
            FamilyTag::Independence => (0.0, 0.0),
            FamilyTag::Clayton | FamilyTag::Gumbel => (-9.0, 4.5),
            FamilyTag::Frank => (-60.0, 60.0),
            FamilyTag::Gaussian => (-4.0, 4.0),
        }
    }
}

impl std::str::FromStr for FamilyTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "independence" | "indep" => Ok(FamilyTag::Independence),
            "clayton" => Ok(FamilyTag::Clayton),
            "gumbel" => Ok(FamilyTag::Gumbel),
            "frank" => Ok(FamilyTag::Frank),
            "gaussian" | "normal" => Ok(FamilyTag::Gaussian),
            _ => Err(Error::InvalidParameter(format!("unknown copula family '{s}'"))),
        }
    }
}

/// Bivariate copula with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum CopulaFamily {
    Independence,
    Clayton { theta: f64 },
    Gumbel { theta: f64 },
    /// `theta = 0` is the independence limit.
    Frank { theta: f64 },
    Gaussian { rho: f64 },
}

/// Below this `|θ|` the Frank copula is evaluated as independence.
const FRANK_EPS: f64 = 1e-9;

impl CopulaFamily {
    pub fn tag(&self) -> FamilyTag {
        match self {
            CopulaFamily::Independence => FamilyTag::Independence,
            CopulaFamily::Clayton { .. } => FamilyTag::Clayton,
            CopulaFamily::Gumbel { .. } => FamilyTag::Gumbel,
            CopulaFamily::Frank { .. } => FamilyTag::Frank,
            CopulaFamily::Gaussian { .. } => FamilyTag::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CopulaFamily::Independence => true,
            CopulaFamily::Clayton { theta } => theta > 0.0 && theta.is_finite(),
            CopulaFamily::Gumbel { theta } => theta >= 1.0 && theta.is_finite(),
            CopulaFamily::Frank { theta } => theta.is_finite(),
            CopulaFamily::Gaussian { rho } => rho > -1.0 && rho < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("copula parameter out of range: {self:?}")))
        }
    }

    /// The parameter on the natural scale (NaN for independence).
    pub fn parameter(&self) -> f64 {
        match *self {
            CopulaFamily::Independence => f64::NAN,
            CopulaFamily::Clayton { theta } | CopulaFamily::Gumbel { theta } | CopulaFamily::Frank { theta } => theta,
            CopulaFamily::Gaussian { rho } => rho,
        }
    }

    /// Inverse of `FamilyTag::from_link`.
    pub fn to_link(&self) -> f64 {
        match *self {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Clayton { theta } => theta.ln(),
            CopulaFamily::Gumbel { theta } => (theta - 1.0).ln(),
            CopulaFamily::Frank { theta } => theta,
            CopulaFamily::Gaussian { rho } => rho.atanh(),
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        match *self {
            CopulaFamily::Independence => u * v,
            CopulaFamily::Clayton { theta } => {
                // C = u (1 + u^θ (v^-θ - 1))^(-1/θ), free of overflow for small u.
                let a = (theta * u.ln()).exp() * (-theta * v.ln()).exp_m1();
                u * (-a.ln_1p() / theta).exp()
            }
            CopulaFamily::Gumbel { theta } => {
                let (x, y) = (-u.ln(), -v.ln());
                (-gumbel_a(x, y, theta)).exp()
            }
            CopulaFamily::Frank { theta } => {
                if theta.abs() < FRANK_EPS {
                    return u * v;
                }
                let num = (-theta * u).exp_m1() * (-theta * v).exp_m1();
                -(num / (-theta).exp_m1()).ln_1p() / theta
            }
            CopulaFamily::Gaussian { rho } => {
                if u == 1.0 {
                    return v;
                }
                if v == 1.0 {
                    return u;
                }
                bvn_cdf(norm_ppf(u), norm_ppf(v), rho)
            }
        }
    }

    /// `∂C(u, v)/∂u`: the conditional cdf of `V` at `v` given `U = u`.
    pub fn h(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if v == 0.0 {
            return 0.0;
        }
        if v == 1.0 {
            return 1.0;
        }
        match *self {
            CopulaFamily::Independence => v,
            CopulaFamily::Clayton { theta } => {
                if u == 0.0 {
                    return 1.0;
                }
                let a = (theta * u.ln()).exp() * (-theta * v.ln()).exp_m1();
                (-(1.0 + 1.0 / theta) * a.ln_1p()).exp()
            }
            CopulaFamily::Gumbel { theta } => {
                if u == 0.0 {
                    return 1.0;
                }
                let (x, y) = (-u.ln(), -v.ln());
                if x == 0.0 {
                    return if theta == 1.0 { v } else { 0.0 };
                }
                let a = gumbel_a(x, y, theta);
                // h = exp(x - A) (x / A)^(θ-1); x - A loses digits when y << x.
                let x_minus_a = if x >= y {
                    -x * (((theta * (y / x).ln()).exp().ln_1p()) / theta).exp_m1()
                } else {
                    x - a
                };
                (x_minus_a + (theta - 1.0) * (x / a).ln()).exp().min(1.0)
            }
            CopulaFamily::Frank { theta } => {
                if theta.abs() < FRANK_EPS {
                    return v;
                }
                // Both denominator terms share the sign of the numerator, so nothing
                // cancels for large |θ|.
                let a = -(-theta * v).exp_m1();
                let b = (-theta * (1.0 - u)).exp() * (theta * (1.0 - v)).exp_m1();
                (a / (a + b)).clamp(0.0, 1.0)
            }
            CopulaFamily::Gaussian { rho } => {
                if rho == 0.0 {
                    return v;
                }
                let x = norm_ppf(u);
                let y = norm_ppf(v);
                norm_cdf((y - rho * x) / (1.0 - rho * rho).sqrt())
            }
        }
    }

    /// Solves `h(u, v) = p` for `v`.
    pub fn h_inv(&self, u: f64, p: f64) -> f64 {
        let (u, p) = (u.clamp(0.0, 1.0), p.clamp(0.0, 1.0));
        if p == 0.0 || p == 1.0 {
            return p;
        }
        match *self {
            CopulaFamily::Independence => p,
            CopulaFamily::Clayton { theta } => {
                if u == 0.0 {
                    return 1.0;
                }
                let a = (-theta / (1.0 + theta) * p.ln()).exp_m1();
                (-(a * (-theta * u.ln()).exp()).ln_1p() / theta).exp()
            }
            CopulaFamily::Frank { theta } => {
                if theta.abs() < FRANK_EPS {
                    return p;
                }
                let em_1 = (-theta).exp_m1();
                let eu = (-theta * u).exp();
                let q = p * em_1 / (p + (1.0 - p) * eu);
                (-q.ln_1p() / theta).clamp(0.0, 1.0)
            }
            CopulaFamily::Gaussian { rho } => {
                norm_cdf(rho * norm_ppf(u) + (1.0 - rho * rho).sqrt() * norm_ppf(p))
            }
            CopulaFamily::Gumbel { .. } => self.h_inv_bisect(u, p),
        }
    }

    /// Bisection on `ln(-ln v)`, which resolves both tails in relative terms.
    fn h_inv_bisect(&self, u: f64, p: f64) -> f64 {
        let to_v = |z: f64| (-z.exp()).exp();
        // h(u, v) increases in v, so decreases in z.
        let (mut lo, mut hi) = (-40.0_f64, 7.0_f64);
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if self.h(u, to_v(mid)) >= p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        to_v(0.5 * (lo + hi))
    }

    /// Copula density `∂²C/∂u∂v` on the open square.
    pub fn pdf(&self, u: f64, v: f64) -> f64 {
        match *self {
            CopulaFamily::Independence => 1.0,
            CopulaFamily::Clayton { theta } => {
                let a = (theta * u.ln()).exp() * (-theta * v.ln()).exp_m1();
                // (1+θ) (uv)^(-θ-1) (u^-θ + v^-θ - 1)^(-2-1/θ), with u^-θ factored out.
                let ln = (1.0 + theta).ln() - (theta + 1.0) * (u.ln() + v.ln()) + (2.0 * theta + 1.0) * u.ln()
                    - (2.0 + 1.0 / theta) * a.ln_1p();
                ln.exp()
            }
            CopulaFamily::Gumbel { theta } => {
                let (x, y) = (-u.ln(), -v.ln());
                let a = gumbel_a(x, y, theta);
                let ln = -a + (theta - 1.0) * (x.ln() + y.ln()) + x + y + (1.0 - 2.0 * theta) * a.ln()
                    + (a + theta - 1.0).ln();
                ln.exp()
            }
            CopulaFamily::Frank { theta } => {
                if theta.abs() < FRANK_EPS {
                    return 1.0;
                }
                let em_1 = (-theta).exp_m1();
                let d = em_1 + (-theta * u).exp_m1() * (-theta * v).exp_m1();
                -theta * em_1 * (-theta * (u + v)).exp() / (d * d)
            }
            CopulaFamily::Gaussian { rho } => {
                let (x, y) = (norm_ppf(u), norm_ppf(v));
                let s = 1.0 - rho * rho;
                let q = (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * s);
                (-q).exp() / s.sqrt()
            }
        }
    }

    /// Kendall's τ.
    pub fn kendall_tau(&self) -> f64 {
        match *self {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Clayton { theta } => theta / (theta + 2.0),
            CopulaFamily::Gumbel { theta } => 1.0 - 1.0 / theta,
            CopulaFamily::Frank { theta } => frank_tau(theta),
            CopulaFamily::Gaussian { rho } => 2.0 / std::f64::consts::PI * rho.asin(),
        }
    }

    /// Member of `tag` with Kendall's τ equal to `tau`, clamped into the family's range.
    pub fn from_kendall_tau(tag: FamilyTag, tau: f64) -> CopulaFamily {
        let t = tau.clamp(-0.999, 0.999);
        match tag {
            FamilyTag::Independence => CopulaFamily::Independence,
            FamilyTag::Clayton => CopulaFamily::Clayton { theta: (2.0 * t / (1.0 - t)).max(1e-6) },
            FamilyTag::Gumbel => CopulaFamily::Gumbel { theta: (1.0 / (1.0 - t)).max(1.0) },
            FamilyTag::Gaussian => CopulaFamily::Gaussian { rho: (std::f64::consts::FRAC_PI_2 * t).sin() },
            FamilyTag::Frank => {
                let (mut lo, mut hi) = (-200.0, 200.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if frank_tau(mid) < t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                CopulaFamily::Frank { theta: 0.5 * (lo + hi) }
            }
        }
    }

    /// Draws `(u, v)` by conditional inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random();
        let p: f64 = rng.random();
        (u, self.h_inv(u, p))
    }
}

/// `((x^θ + y^θ)^(1/θ))` scaled by the larger argument to avoid overflow.
fn gumbel_a(x: f64, y: f64, theta: f64) -> f64 {
    let (m, s) = if x >= y { (x, y) } else { (y, x) };
    if m == 0.0 {
        return 0.0;
    }
    if m.is_infinite() {
        return f64::INFINITY;
    }
    m * ((theta * (s / m).ln()).exp().ln_1p() / theta).exp()
}

/// Kendall's τ of the Frank copula, `1 - 4/θ (1 - D_1(θ))` with the Debye function `D_1`.
fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-6 {
        return theta / 9.0;
    }
    let a = theta.abs();
    let integrand = |t: f64| if t == 0.0 { 1.0 } else { t / t.exp_m1() };
    let d1 = quad::integrate(integrand, 0.0, a, 1e-14, 1e-13) / a;
    let tau = 1.0 - 4.0 / a * (1.0 - d1);
    tau.copysign(theta)
}
