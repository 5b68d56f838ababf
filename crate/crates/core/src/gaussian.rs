//! Normal-distribution interval masses via the complementary error function.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Upper tail `P(Z > z)` for a standard normal.
fn upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// `P(Z <= z)` for a standard normal.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Mass of `N(mu, sigma^2)` on `[lo, hi)`. Either bound may be infinite.
///
/// Each branch subtracts tails on the same side of the mean so that the
/// result keeps full relative accuracy far out in the tails.
pub fn interval_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let za = (lo - mu) / sigma;
    let zb = (hi - mu) / sigma;
    let mass = if za >= 0.0 {
        upper_tail(za) - upper_tail(zb)
    } else if zb <= 0.0 {
        std_normal_cdf(zb) - std_normal_cdf(za)
    } else {
        1.0 - std_normal_cdf(za) - upper_tail(zb)
    };
    mass.max(0.0)
}

/// Mean of `N(mu, sigma^2)` conditioned on `[lo, hi)`, or `None` when the
/// interval carries (numerically) no mass.
pub fn truncated_mean(mu: f64, sigma: f64, lo: f64, hi: f64) -> Option<f64> {
    let mass = interval_mass(mu, sigma, lo, hi);
    if mass <= 0.0 {
        return None;
    }
    let pdf = |x: f64| {
        if x.is_infinite() {
            0.0
        } else {
            std_normal_pdf((x - mu) / sigma)
        }
    };
    Some(mu + sigma * (pdf(lo) - pdf(hi)) / mass)
}
