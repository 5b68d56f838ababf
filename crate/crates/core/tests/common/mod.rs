//! Independent numerical oracles shared by the integration tests.

#![allow(dead_code)]

use std::path::PathBuf;

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Normal density integrated over `[lo, hi)`, with infinite ends clipped at 40 sigma.
pub fn gaussian_mass_by_quadrature(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let pdf = |x: f64| {
        let z = (x - mu) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    };
    let lo = lo.max(mu - 40.0 * sigma);
    let hi = hi.min(mu + 40.0 * sigma);
    // split at the mean so the peak is never straddled by a coarse panel
    if lo < mu && mu < hi {
        integrate(&pdf, lo, mu, 1e-14) + integrate(&pdf, mu, hi, 1e-14)
    } else {
        integrate(&pdf, lo, hi, 1e-14)
    }
}

/// Row-normalized interval masses on `[0, x1)`, `[x1, x2)` and `[x2, inf)`.
pub fn assignment_row_by_quadrature(mu: f64, sigma: f64, x1: f64, x2: f64) -> [f64; 3] {
    let raw = [
        gaussian_mass_by_quadrature(mu, sigma, 0.0, x1),
        gaussian_mass_by_quadrature(mu, sigma, x1, x2),
        gaussian_mass_by_quadrature(mu, sigma, x2, f64::INFINITY),
    ];
    let total: f64 = raw.iter().sum();
    raw.map(|p| p / total)
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// Parsed CSV file: header plus rows of string fields.
pub fn read_csv(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}
