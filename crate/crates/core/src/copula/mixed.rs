use rand::Rng;

use super::family::CopulaFamily;
use super::tv::CopulaSpec;
use crate::delay::DelayModel;
use crate::error::Result;
use crate::payment::{poisson_cdf, CountProcess};

/// `P[W <= w, N(τ) <= n | T = t] = C_τ(H_t(w), Q_τ(n))`; zero for `n < 0`.
pub fn sklar_joint_cdf(
    delay: &DelayModel,
    counts: &CountProcess,
    spec: &CopulaSpec,
    t: f64,
    w: f64,
    tau: f64,
    n: i64,
) -> f64 {
    spec.at(tau).cdf(delay.cdf(t, w), counts.count_cdf(tau, n))
}

/// `P[N = n | U = u]` for a count with cdf values `q_n = Q(n)` and `q_prev = Q(n-1)`.
pub fn conditional_count_pmf(c: &CopulaFamily, u: f64, q_n: f64, q_prev: f64) -> f64 {
    (c.h(u, q_n) - c.h(u, q_prev)).max(0.0)
}

/// Joint density in `w` and mass in `n`:
/// `h_t(w) [∂_u C_τ(H_t(w), Q_τ(n)) - ∂_u C_τ(H_t(w), Q_τ(n-1))]`.
pub fn mixed_density(
    delay: &DelayModel,
    counts: &CountProcess,
    spec: &CopulaSpec,
    t: f64,
    w: f64,
    tau: f64,
    n: u64,
) -> Result<f64> {
    let dens = delay.density(t, w)?;
    let u = delay.cdf(t, w);
    let c = spec.at(tau);
    let n = n as i64;
    Ok(dens * conditional_count_pmf(&c, u, counts.count_cdf(tau, n), counts.count_cdf(tau, n - 1)))
}

/// Smallest `n` with `h(u, Q(n)) >= v`, where `Q` is the Poisson(`mean`) cdf.
pub fn conditional_count_quantile(c: &CopulaFamily, u: f64, mean: f64, v: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // Start far enough left that the pmf recursion does not underflow.
    let start = if mean > 600.0 { (mean - 40.0 * mean.sqrt()).max(0.0).floor() as u64 } else { 0 };
    let mut n = start;
    let mut pmf = (n as f64 * mean.ln() - mean - crate::numerics::special::ln_factorial(n)).exp();
    let mut q = poisson_cdf(mean, n as i64);
    loop {
        if c.h(u, q) >= v || q >= 1.0 || (pmf == 0.0 && n as f64 > mean) {
            return n;
        }
        n += 1;
        pmf *= mean / n as f64;
        q = (q + pmf).min(1.0);
    }
}

/// Draws `(w, n)` from the joint law of the delay and the count at horizon `τ`.
pub fn simulate_delay_count<R: Rng + ?Sized>(
    delay: &DelayModel,
    counts: &CountProcess,
    spec: &CopulaSpec,
    t: f64,
    tau: f64,
    rng: &mut R,
) -> (f64, u64) {
    let u: f64 = rng.random();
    let w = delay.quantile(t, u);
    let v: f64 = rng.random();
    let n = conditional_count_quantile(&spec.at(tau), u, counts.intensity.cumulative(tau), v);
    (w, n)
}
