//! Reference evaluators used as independent test oracles.
//!
//! Only compiled with the `test-oracles` feature, which the test suites
//! enable; nothing in the production path may call into this module.
//!
//! The noncentral chi-square density is evaluated through its modified
//! Bessel function form,
//!
//! ```text
//! f(x; nu, lambda) = 1/2 exp(-(x + lambda)/2) (x/lambda)^(nu/4 - 1/2)
//!                    I_{nu/2-1}(sqrt(lambda x))
//! ```
//!
//! (power series for `I`), and CDFs/moments are recovered by adaptive
//! Simpson integration. This shares no code with the Poisson-mixture
//! production route beyond `ln_gamma`.

use statrs::function::gamma::ln_gamma;

/// Modified Bessel function of the first kind, via its power series in log
/// space. Adequate for the moderate arguments the oracles need.
fn bessel_i_series(order: f64, z: f64) -> f64 {
    let half = (z / 2.0).ln();
    let mut sum = 0.0;
    for m in 0..500 {
        let mf = m as f64;
        let ln_term =
            (2.0 * mf + order) * half - ln_gamma(mf + 1.0) - ln_gamma(mf + order + 1.0);
        let term = ln_term.exp();
        sum += term;
        if m > 4 && term < sum.abs() * 1e-18 {
            break;
        }
    }
    sum
}

/// Density of the noncentral chi-square distribution.
pub fn noncentral_pdf(df: u32, noncentrality: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let nu = df as f64;
    if noncentrality == 0.0 {
        return ((nu / 2.0 - 1.0) * x.ln()
            - x / 2.0
            - (nu / 2.0) * std::f64::consts::LN_2
            - ln_gamma(nu / 2.0))
        .exp();
    }
    let order = nu / 2.0 - 1.0;
    let z = (noncentrality * x).sqrt();
    0.5 * (-(x + noncentrality) / 2.0).exp()
        * (x / noncentrality).powf(nu / 4.0 - 0.5)
        * bessel_i_series(order, z)
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
    }
    // Seed with a fixed partition so narrow bulk regions inside a long
    // interval cannot be skipped by an early coarse estimate.
    const SEED_PANELS: usize = 256;
    let width = (b - a) / SEED_PANELS as f64;
    let mut total = 0.0;
    for i in 0..SEED_PANELS {
        let lo = a + i as f64 * width;
        let hi = if i == SEED_PANELS - 1 { b } else { lo + width };
        let flo = f(lo);
        let fhi = f(hi);
        let (whole, m, fm) = simpson(f, lo, flo, hi, fhi);
        total += recurse(
            f,
            lo,
            flo,
            hi,
            fhi,
            whole,
            m,
            fm,
            tol / SEED_PANELS as f64,
            48,
        );
    }
    total
}

fn upper_limit(df: u32, noncentrality: f64) -> f64 {
    df as f64 + noncentrality + 400.0
}

/// CDF by integrating the density from 0.
pub fn cdf_oracle(df: u32, noncentrality: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let f = |t: f64| noncentral_pdf(df, noncentrality, t);
    adaptive_simpson(&f, 1e-12, x, 1e-13)
}

/// `E[X^-j]` by quadrature over the full support.
pub fn inverse_moment_oracle(df: u32, noncentrality: f64, j: u32) -> f64 {
    truncated_inverse_moment_oracle(df, noncentrality, j, upper_limit(df, noncentrality), true)
}

/// `E[X^-j I(X <= cutoff)]` (or the complement) by quadrature.
pub fn truncated_inverse_moment_oracle(
    df: u32,
    noncentrality: f64,
    j: u32,
    cutoff: f64,
    below: bool,
) -> f64 {
    let g = |t: f64| t.powi(-(j as i32)) * noncentral_pdf(df, noncentrality, t);
    let (lo, hi) = if below {
        (1e-12, cutoff.min(upper_limit(df, noncentrality)))
    } else {
        (cutoff.max(1e-12), upper_limit(df, noncentrality))
    };
    if hi <= lo {
        return 0.0;
    }
    adaptive_simpson(&g, lo, hi, 1e-13)
}
