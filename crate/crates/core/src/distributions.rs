//! Chi-square and noncentral chi-square kernels.
//!
//! Everything here reduces to Poisson mixtures of central chi-square
//! quantities: for noncentrality `lambda`,
//!
//! ```text
//! P[X <= x]            = sum_k w_k F(nu + 2k, x)
//! E[X^-j I(X <= c)]    = sum_k w_k g_j(nu + 2k) F(nu + 2k - 2j, c)
//! ```
//!
//! with `w_k = exp(-lambda/2) (lambda/2)^k / k!`, `F` the central CDF
//! (regularized incomplete gamma), and
//! `g_j(m) = 1 / ((m - 2)(m - 4) ... (m - 2j))` the central inverse moment.
//! The mixture is truncated once the Poisson weights have accumulated all but
//! `1e-14` of their mass (at most 10 000 terms). Quantiles come from
//! bracketed bisection on the CDF.

use statrs::function::gamma::{gamma, gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

/// Poisson weights are accumulated until the remaining tail mass drops
/// below this tolerance.
const POISSON_TAIL_TOL: f64 = 1e-14;

/// Hard cap on the number of mixture terms.
const MAX_MIXTURE_TERMS: usize = 10_000;

/// A noncentral chi-square distribution with integer degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoncentralChiSq {
    df: u32,
    noncentrality: f64,
}

impl NoncentralChiSq {
    pub fn new(df: u32, noncentrality: f64) -> Result<Self> {
        if df == 0 {
            return Err(Error::InvalidConfig("degrees of freedom must be >= 1".into()));
        }
        if !noncentrality.is_finite() || noncentrality < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noncentrality must be finite and >= 0, got {noncentrality}"
            )));
        }
        Ok(Self { df, noncentrality })
    }

    pub fn df(&self) -> u32 {
        self.df
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    /// `P[X <= x]`; 0 for negative `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_with_tol(x, POISSON_TAIL_TOL)
    }

    pub(crate) fn cdf_with_tol(&self, x: f64, tail_tol: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let v = poisson_mixture(self.noncentrality / 2.0, tail_tol, |k| {
            central_cdf(self.df + 2 * k, x)
        });
        v.clamp(0.0, 1.0)
    }

    /// `E[X^-j]`, which exists only for `df > 2j`.
    pub fn inverse_moment(&self, j: u32) -> Result<f64> {
        self.check_order(j)?;
        Ok(poisson_mixture(
            self.noncentrality / 2.0,
            POISSON_TAIL_TOL,
            |k| central_inverse_moment(self.df + 2 * k, j),
        ))
    }

    /// `E[X^-j I(X <= cutoff)]` when `below`, `E[X^-j I(X > cutoff)]`
    /// otherwise.
    ///
    /// The moment requires `df > 2j` whenever the integration region touches
    /// 0 (always for `below`, and for the complement only when `cutoff = 0`).
    pub fn truncated_inverse_moment(&self, j: u32, cutoff: f64, below: bool) -> Result<f64> {
        if !(cutoff >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cutoff must be >= 0, got {cutoff}"
            )));
        }
        if below || cutoff == 0.0 {
            self.check_order(j)?;
        }
        if below && cutoff == 0.0 {
            return Ok(0.0);
        }
        let half = self.noncentrality / 2.0;
        let v = if below {
            poisson_mixture(half, POISSON_TAIL_TOL, |k| {
                let m = self.df + 2 * k;
                central_inverse_moment(m, j) * central_cdf(m - 2 * j, cutoff)
            })
        } else {
            poisson_mixture(half, POISSON_TAIL_TOL, |k| {
                central_upper_inverse_moment(self.df + 2 * k, j, cutoff)
            })
        };
        Ok(v.max(0.0))
    }

    fn check_order(&self, j: u32) -> Result<()> {
        if j == 0 {
            return Err(Error::InvalidConfig("moment order must be >= 1".into()));
        }
        if self.df <= 2 * j {
            return Err(Error::DivergentMoment {
                df: self.df,
                order: j,
            });
        }
        Ok(())
    }
}

/// Central chi-square CDF, `P(df/2, x/2)` in regularized-incomplete-gamma
/// form.
pub fn central_cdf(df: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    gamma_lr(df as f64 / 2.0, x / 2.0)
}

/// The upper-`alpha` quantile of the central chi-square: the `x` with
/// `1 - CDF(x) = upper_alpha`, located by bracketed bisection.
pub fn central_quantile(df: u32, upper_alpha: f64) -> Result<f64> {
    if !(upper_alpha > 0.0 && upper_alpha < 1.0) {
        return Err(Error::InvalidLevel { alpha: upper_alpha });
    }
    let target = 1.0 - upper_alpha;
    let mut lo = 0.0_f64;
    let mut hi = df as f64 + 10.0 * (2.0 * df as f64).sqrt() + 10.0;
    while central_cdf(df, hi) < target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::InvalidConfig("quantile bracket overflow".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if central_cdf(df, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `E[(chi2_m)^-j] = 1 / ((m-2)(m-4)...(m-2j))` for `m > 2j`.
fn central_inverse_moment(m: u32, j: u32) -> f64 {
    debug_assert!(m > 2 * j);
    let mut denom = 1.0;
    for i in 1..=j {
        denom *= (m - 2 * i) as f64;
    }
    1.0 / denom
}

/// `E[(chi2_m)^-j I(chi2_m > c)]` for `c > 0`, valid for every `m >= 1`.
///
/// Equals `g_j(m) (1 - F(m - 2j, c))` when `m > 2j`; otherwise it falls back
/// to `2^-j Gamma(m/2 - j, c/2) / Gamma(m/2)` with the upper incomplete gamma
/// continued to non-positive first arguments.
fn central_upper_inverse_moment(m: u32, j: u32, c: f64) -> f64 {
    if m > 2 * j {
        central_inverse_moment(m, j) * (1.0 - central_cdf(m - 2 * j, c))
    } else {
        let a = m as f64 / 2.0 - j as f64;
        let x = c / 2.0;
        (0.5_f64).powi(j as i32) * upper_incomplete_gamma(a, x)
            / (ln_gamma(m as f64 / 2.0)).exp()
    }
}

/// Unnormalized upper incomplete gamma `Gamma(a, x)` for `x > 0` and any
/// real `a`, extended below zero by the downward recurrence
/// `Gamma(a, x) = (Gamma(a+1, x) - x^a e^-x) / a`.
fn upper_incomplete_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x == f64::INFINITY {
        return 0.0;
    }
    if a > 0.0 {
        return gamma_ur(a, x) * gamma(a);
    }
    let steps = (-a).floor() as usize + 1;
    let a0 = a + steps as f64;
    let mut g = if a0 == 1.0 {
        (-x).exp()
    } else {
        gamma_ur(a0, x) * gamma(a0)
    };
    let mut cur = a0;
    for _ in 0..steps {
        cur -= 1.0;
        if cur == 0.0 {
            g = exponential_integral_e1(x);
        } else {
            g = (g - x.powf(cur) * (-x).exp()) / cur;
        }
    }
    g
}

/// `E1(x) = Gamma(0, x)` for `x > 0`: series for small arguments, a
/// continued fraction (modified Lentz) otherwise.
fn exponential_integral_e1(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    if x <= 2.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-300 || add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // Gamma(0, x) = e^-x / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))
        let tiny = 1e-300;
        let mut f = x + 1.0;
        let mut c = f;
        let mut d = 0.0;
        for n in 1..500 {
            let an = -(n as f64) * (n as f64);
            let bn = x + 2.0 * n as f64 + 1.0;
            d = bn + an * d;
            if d.abs() < tiny {
                d = tiny;
            }
            d = 1.0 / d;
            c = bn + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x).exp() / f
    }
}

/// Sums `sum_k w_k term(k)` over Poisson(`half_nc`) weights `w_k`, stopping
/// once the accumulated weight exceeds `1 - tail_tol`.
fn poisson_mixture<F: Fn(u32) -> f64>(half_nc: f64, tail_tol: f64, term: F) -> f64 {
    if half_nc == 0.0 {
        return term(0);
    }
    let ln_l = half_nc.ln();
    let mut total = 0.0;
    let mut weight_sum = 0.0;
    for k in 0..MAX_MIXTURE_TERMS {
        let w = (-half_nc + k as f64 * ln_l - ln_gamma(k as f64 + 1.0)).exp();
        if w > 0.0 {
            total += w * term(k as u32);
            weight_sum += w;
        }
        if weight_sum > 1.0 - tail_tol {
            break;
        }
    }
    total
}
