//! Stein-type, positive-part Stein, and pretest estimators.
//!
//! All three combine an unrestricted and a restricted fit through the test
//! statistic `psi`:
//!
//! ```text
//! S  : b_R + (b_UR - b_R) (1 - k/psi),            k = p2 - 2, p2 >= 3
//! S+ : b_R + (b_UR - b_R) max(0, 1 - k/psi)
//! PT : b_R if psi < c(p2, alpha), else b_UR
//! ```
//!
//! where `c(p2, alpha)` is the upper-`alpha` central chi-square quantile.
//! Ties `psi == c` choose the unrestricted fit (the indicator is strict).
//! The combination is applied to the full coefficient vector; consumers that
//! only need the main-effects block slice it afterwards.

use crate::distributions::central_quantile;
use crate::error::{Error, Result};
use crate::regression::{EstimatorKind, FitResult, LeastSquares, LinearRestriction, RegressionData};

/// Everything the shrinkage-family estimators consume: the two base fits,
/// the test statistic, and the restricted dimension.
#[derive(Debug, Clone)]
pub struct ShrinkageContext {
    unrestricted: FitResult,
    restricted: FitResult,
    psi: f64,
    p2: usize,
}

impl ShrinkageContext {
    pub fn new(
        unrestricted: FitResult,
        restricted: FitResult,
        psi: f64,
        p2: usize,
    ) -> Result<Self> {
        if unrestricted.kind != EstimatorKind::Unrestricted
            || restricted.kind != EstimatorKind::Restricted
        {
            return Err(Error::InvalidConfig(
                "context needs one UR and one R fit".into(),
            ));
        }
        if unrestricted.beta.len() != restricted.beta.len() {
            return Err(Error::InvalidConfig(
                "UR and R fits have different coefficient lengths".into(),
            ));
        }
        if !(psi >= 0.0) {
            return Err(Error::InvalidConfig(format!("psi must be >= 0, got {psi}")));
        }
        if p2 == 0 {
            return Err(Error::InvalidConfig("p2 must be >= 1".into()));
        }
        Ok(Self {
            unrestricted,
            restricted,
            psi,
            p2,
        })
    }

    /// Fits both base estimators and the statistic in one pass over the data.
    pub fn fit(data: &RegressionData, r: &LinearRestriction) -> Result<Self> {
        let ls = LeastSquares::fit(data)?;
        Self::from_least_squares(&ls, r)
    }

    /// As [`ShrinkageContext::fit`] but reusing an existing factorization.
    pub fn from_least_squares(ls: &LeastSquares, r: &LinearRestriction) -> Result<Self> {
        let (beta_r, quad) = ls.restricted(r)?;
        let s2 = ls.s2();
        let psi = if s2 > 0.0 {
            quad / s2
        } else if quad <= f64::EPSILON * f64::EPSILON {
            0.0
        } else {
            f64::INFINITY
        };
        let unrestricted = FitResult {
            beta: ls.beta().clone(),
            s2,
            psi: 0.0,
            kind: EstimatorKind::Unrestricted,
            alpha: None,
            degenerate: false,
        };
        let restricted = FitResult {
            beta: beta_r,
            s2,
            psi,
            kind: EstimatorKind::Restricted,
            alpha: None,
            degenerate: false,
        };
        Self::new(unrestricted, restricted, psi, r.p2())
    }

    pub fn unrestricted(&self) -> &FitResult {
        &self.unrestricted
    }

    pub fn restricted(&self) -> &FitResult {
        &self.restricted
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn p2(&self) -> usize {
        self.p2
    }

    /// The shrinkage constant `p2 - 2` (negative for `p2 < 2`; the Stein
    /// operations reject those cases).
    pub fn kappa(&self) -> f64 {
        self.p2 as f64 - 2.0
    }

    fn combine(&self, factor: f64, kind: EstimatorKind) -> FitResult {
        let beta = &self.restricted.beta
            + (&self.unrestricted.beta - &self.restricted.beta) * factor;
        FitResult {
            beta,
            s2: self.unrestricted.s2,
            psi: self.psi,
            kind,
            alpha: None,
            degenerate: false,
        }
    }

    fn require_stein(&self) -> Result<()> {
        if self.p2 < 3 {
            return Err(Error::TooFewRestrictions { p2: self.p2 });
        }
        Ok(())
    }
}

/// The Stein-type estimator with shrink factor `1 - k/psi`.
///
/// `psi = 0` would send the factor to negative infinity; that probability-
/// zero event falls back to the restricted coefficients with the
/// `degenerate` flag set.
pub fn stein_estimate(ctx: &ShrinkageContext) -> Result<FitResult> {
    ctx.require_stein()?;
    if ctx.psi == 0.0 {
        let mut fit = ctx.combine(0.0, EstimatorKind::Stein);
        fit.degenerate = true;
        return Ok(fit);
    }
    Ok(ctx.combine(1.0 - ctx.kappa() / ctx.psi, EstimatorKind::Stein))
}

/// The positive-part Stein estimator: shrink factor `max(0, 1 - k/psi)`.
pub fn positive_stein_estimate(ctx: &ShrinkageContext) -> Result<FitResult> {
    ctx.require_stein()?;
    let raw = 1.0 - ctx.kappa() / ctx.psi;
    Ok(ctx.combine(raw.max(0.0), EstimatorKind::PositiveStein))
}

/// The pretest estimator: restricted fit when `psi < c(p2, alpha)`,
/// unrestricted otherwise (ties choose the unrestricted fit).
pub fn pretest_estimate(ctx: &ShrinkageContext, alpha: f64) -> Result<FitResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidLevel { alpha });
    }
    let critical = central_quantile(ctx.p2 as u32, alpha)?;
    pretest_with_critical(ctx, alpha, critical)
}

/// Pretest with a precomputed critical value (for callers that evaluate the
/// same quantile many times).
pub fn pretest_with_critical(
    ctx: &ShrinkageContext,
    alpha: f64,
    critical: f64,
) -> Result<FitResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidLevel { alpha });
    }
    let source = if ctx.psi < critical {
        &ctx.restricted
    } else {
        &ctx.unrestricted
    };
    let mut fit = source.clone();
    fit.kind = EstimatorKind::Pretest;
    fit.psi = ctx.psi;
    fit.alpha = Some(alpha);
    Ok(fit)
}
