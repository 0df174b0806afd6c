//! Ordinary and restricted least squares with the Wald-type restriction test.
//!
//! The unrestricted fit solves the normal equations `C b = X'y` with
//! `C = X'X` through a QR factorization of `X`; products with `C^-1` are
//! obtained from triangular solves against the factor `R` (so `C` is never
//! inverted explicitly). The restricted fit projects the unrestricted
//! coefficients onto the affine subspace `{b : H b = h}`:
//!
//! ```text
//! b_R = b_UR - C^-1 H' (H C^-1 H')^-1 (H b_UR - h)
//! ```
//!
//! and the test statistic for `H0: H b = h` is
//!
//! ```text
//! psi = (H b_UR - h)' (H C^-1 H')^-1 (H b_UR - h) / s2
//! ```
//!
//! with `s2` the residual variance of the *unrestricted* fit (divisor
//! `n - p`). Under the null, `psi` is asymptotically chi-square with as many
//! degrees of freedom as there are restricted directions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative condition-number bound used for rank and singularity checks.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Residual sums of squares below `‖y‖² · PERFECT_FIT_TOL` are treated as an
/// exact interpolation (`s2 = 0`).
const PERFECT_FIT_TOL: f64 = 1e-24;

/// A response vector paired with a full-column-rank design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    y: DVector<f64>,
    x: DMatrix<f64>,
    column_names: Vec<String>,
    intercept_col: Option<usize>,
    standardized: bool,
}

impl RegressionData {
    /// Validates dimensions (`n > p`, matching lengths) and full column rank
    /// (column-pivoted QR, relative condition bound `1e12`).
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::DimensionMismatch { y_len: y.len(), rows: n });
        }
        if n <= p {
            return Err(Error::TooFewObservations { n, p });
        }
        if column_names.len() != p {
            return Err(Error::InvalidConfig(format!(
                "{} column names for {} columns",
                column_names.len(),
                p
            )));
        }
        check_full_rank(&x)?;
        Ok(Self {
            y,
            x,
            column_names,
            intercept_col: None,
            standardized: false,
        })
    }

    /// Marks `idx` as the intercept column. The column must be identically 1.
    pub fn with_intercept(mut self, idx: usize) -> Result<Self> {
        if idx >= self.p() || self.x.column(idx).iter().any(|&v| v != 1.0) {
            return Err(Error::InvalidConfig(format!(
                "column {idx} is not an all-ones intercept column"
            )));
        }
        self.intercept_col = Some(idx);
        Ok(self)
    }

    /// Sets the standardized flag after verifying that every non-intercept
    /// column has sample mean within 1e-10 of 0 and sample standard deviation
    /// (divisor `n - 1`) within 1e-10 of 1.
    pub fn with_standardized_flag(mut self) -> Result<Self> {
        let n = self.n() as f64;
        for (j, col) in self.x.column_iter().enumerate() {
            if self.intercept_col == Some(j) {
                continue;
            }
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            if mean.abs() > 1e-10 || (var.sqrt() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidConfig(format!(
                    "column '{}' is not standardized (mean {mean:.3e}, sd {:.6})",
                    self.column_names[j],
                    var.sqrt()
                )));
            }
        }
        self.standardized = true;
        Ok(self)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn intercept_col(&self) -> Option<usize> {
        self.intercept_col
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Sub-dataset containing the rows in `idx` (same columns and flags).
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let x = DMatrix::from_fn(idx.len(), self.p(), |i, j| self.x[(idx[i], j)]);
        let y = DVector::from_fn(idx.len(), |i, _| self.y[idx[i]]);
        let mut out = Self::new(y, x, self.column_names.clone())?;
        out.intercept_col = self.intercept_col;
        Ok(out)
    }
}

fn check_full_rank(x: &DMatrix<f64>) -> Result<()> {
    let p = x.ncols();
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0_f64, f64::max);
    let tol = max / CONDITION_LIMIT;
    let rank = diag.iter().filter(|&&d| d > tol).count();
    if max == 0.0 || rank < p {
        return Err(Error::RankDeficient { rank, cols: p });
    }
    Ok(())
}

/// A linear restriction `H b = h` with `H` of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRestriction {
    h_matrix: DMatrix<f64>,
    h_vector: DVector<f64>,
}

impl LinearRestriction {
    pub fn new(h_matrix: DMatrix<f64>, h_vector: DVector<f64>) -> Result<Self> {
        let (p2, p) = h_matrix.shape();
        if p2 == 0 || p2 > p {
            return Err(Error::InvalidRestriction(format!(
                "H is {p2} x {p}; need 1 <= rows <= columns"
            )));
        }
        if h_vector.len() != p2 {
            return Err(Error::InvalidRestriction(format!(
                "h has {} entries for {} restrictions",
                h_vector.len(),
                p2
            )));
        }
        // Full row rank of H == full column rank of H'.
        check_full_rank(&h_matrix.transpose())
            .map_err(|_| Error::InvalidRestriction("H does not have full row rank".into()))?;
        Ok(Self { h_matrix, h_vector })
    }

    /// The nuisance-subset restriction: the trailing `p2` of `p` coefficients
    /// are zero, i.e. `H = [0 | I]` and `h = 0`.
    pub fn zero_trailing(p: usize, p2: usize) -> Result<Self> {
        if p2 == 0 || p2 > p {
            return Err(Error::InvalidRestriction(format!(
                "cannot restrict trailing {p2} of {p} coefficients"
            )));
        }
        let mut h = DMatrix::zeros(p2, p);
        for i in 0..p2 {
            h[(i, p - p2 + i)] = 1.0;
        }
        Ok(Self {
            h_matrix: h,
            h_vector: DVector::zeros(p2),
        })
    }

    pub fn h_matrix(&self) -> &DMatrix<f64> {
        &self.h_matrix
    }

    pub fn h_vector(&self) -> &DVector<f64> {
        &self.h_vector
    }

    /// Number of restricted directions.
    pub fn p2(&self) -> usize {
        self.h_matrix.nrows()
    }

    /// True when this is a trailing-block zero restriction.
    pub fn is_zero_trailing(&self) -> bool {
        let (p2, p) = self.h_matrix.shape();
        self.h_vector.iter().all(|&v| v == 0.0)
            && (0..p2).all(|i| {
                (0..p).all(|j| {
                    let expect = if j == p - p2 + i { 1.0 } else { 0.0 };
                    self.h_matrix[(i, j)] == expect
                })
            })
    }
}

/// Tag identifying which estimator produced a `FitResult`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "UR")]
    Unrestricted,
    #[serde(rename = "R")]
    Restricted,
    #[serde(rename = "S")]
    Stein,
    #[serde(rename = "S+")]
    PositiveStein,
    #[serde(rename = "PT")]
    Pretest,
}

impl EstimatorKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EstimatorKind::Unrestricted => "UR",
            EstimatorKind::Restricted => "R",
            EstimatorKind::Stein => "S",
            EstimatorKind::PositiveStein => "S+",
            EstimatorKind::Pretest => "PT",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UR" | "ur" => Ok(EstimatorKind::Unrestricted),
            "R" | "r" => Ok(EstimatorKind::Restricted),
            "S" | "s" => Ok(EstimatorKind::Stein),
            "S+" | "s+" | "PS" | "ps" => Ok(EstimatorKind::PositiveStein),
            "PT" | "pt" => Ok(EstimatorKind::Pretest),
            _ => Err(Error::InvalidConfig(format!("unknown estimator kind '{s}'"))),
        }
    }
}

/// Coefficients plus the scalars every downstream consumer needs.
///
/// `psi` is 0 for a plain unrestricted fit and `f64::INFINITY` when the
/// unrestricted residuals vanish while the restriction is violated (the
/// statistic overflows; see [`wald_statistic`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: DVector<f64>,
    pub s2: f64,
    pub psi: f64,
    pub kind: EstimatorKind,
    pub alpha: Option<f64>,
    /// Set when a Stein fit hit `psi = 0` and fell back to the restricted
    /// coefficients instead of an unbounded negative shrink factor.
    pub degenerate: bool,
}

impl FitResult {
    fn new(beta: DVector<f64>, s2: f64, psi: f64, kind: EstimatorKind) -> Self {
        Self {
            beta,
            s2,
            psi,
            kind,
            alpha: None,
            degenerate: false,
        }
    }
}

/// One-time QR factorization of a dataset, from which the unrestricted fit,
/// restricted fits, and the test statistic are all derived.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    r_factor: DMatrix<f64>,
    beta: DVector<f64>,
    rss: f64,
    s2: f64,
    p: usize,
}

impl LeastSquares {
    pub fn fit(data: &RegressionData) -> Result<Self> {
        let (n, p) = (data.n(), data.p());
        let qr = data.x().clone().qr();
        let r_factor = qr.r();
        let cond = triangular_condition(&r_factor);
        if !(cond <= CONDITION_LIMIT) {
            // The constructor's pivoted check normally catches this first.
            return Err(Error::RankDeficient { rank: 0, cols: p });
        }
        let qty = qr.q().transpose() * data.y();
        let beta = r_factor
            .solve_upper_triangular(&qty)
            .ok_or(Error::RankDeficient { rank: 0, cols: p })?;
        let resid = data.y() - data.x() * &beta;
        let mut rss = resid.norm_squared();
        if rss < data.y().norm_squared() * PERFECT_FIT_TOL {
            rss = 0.0;
        }
        let s2 = rss / (n - p) as f64;
        Ok(Self {
            r_factor,
            beta,
            rss,
            s2,
            p,
        })
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn rss(&self) -> f64 {
        self.rss
    }

    /// Residual variance `RSS / (n - p)` of the unrestricted fit.
    pub fn s2(&self) -> f64 {
        self.s2
    }

    /// `C^-1 v` via two triangular solves against the QR factor.
    fn cinv(&self, v: &DVector<f64>) -> DVector<f64> {
        let z = self
            .r_factor
            .tr_solve_upper_triangular(v)
            .expect("factor validated nonsingular");
        self.r_factor
            .solve_upper_triangular(&z)
            .expect("factor validated nonsingular")
    }

    /// `C^-1 H'` columnwise, plus `M = H C^-1 H'` and its Cholesky factor.
    fn restriction_system(&self, r: &LinearRestriction) -> Result<RestrictionSystem> {
        if r.h_matrix().ncols() != self.p {
            return Err(Error::InvalidRestriction(format!(
                "restriction has {} columns for {} coefficients",
                r.h_matrix().ncols(),
                self.p
            )));
        }
        let p2 = r.p2();
        let mut cinv_ht = DMatrix::zeros(self.p, p2);
        for i in 0..p2 {
            let row = r.h_matrix().row(i).transpose();
            cinv_ht.set_column(i, &self.cinv(&row));
        }
        let m = r.h_matrix() * &cinv_ht;
        let m = (&m + m.transpose()) * 0.5;
        let chol = nalgebra::Cholesky::new(m).ok_or(Error::SingularRestriction {
            cond: f64::INFINITY,
        })?;
        let diag: Vec<f64> = (0..p2).map(|i| chol.l_dirty()[(i, i)]).collect();
        let dmax = diag.iter().cloned().fold(0.0_f64, f64::max);
        let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let cond = (dmax / dmin).powi(2);
        if !(cond <= CONDITION_LIMIT) {
            return Err(Error::SingularRestriction { cond });
        }
        let gap = r.h_matrix() * &self.beta - r.h_vector();
        Ok(RestrictionSystem { cinv_ht, chol, gap })
    }

    /// Restricted coefficients together with the quadratic form
    /// `(H b - h)' M^-1 (H b - h)` the test statistic is built from.
    pub fn restricted(&self, r: &LinearRestriction) -> Result<(DVector<f64>, f64)> {
        let sys = self.restriction_system(r)?;
        let u = sys.chol.solve(&sys.gap);
        let quad = sys.gap.dot(&u);
        let beta = &self.beta - &sys.cinv_ht * u;
        Ok((beta, quad.max(0.0)))
    }

    /// The Wald-type statistic for `H0: H b = h`.
    ///
    /// With zero residual variance the statistic overflows; it is reported as
    /// `f64::INFINITY` unless the restriction is satisfied exactly, in which
    /// case it is 0.
    pub fn wald(&self, r: &LinearRestriction) -> Result<f64> {
        let (_, quad) = self.restricted(r)?;
        Ok(psi_from_parts(quad, self.s2))
    }
}

struct RestrictionSystem {
    cinv_ht: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    gap: DVector<f64>,
}

fn triangular_condition(r: &DMatrix<f64>) -> f64 {
    let diag: Vec<f64> = (0..r.ncols().min(r.nrows()))
        .map(|i| r[(i, i)].abs())
        .collect();
    let max = diag.iter().cloned().fold(0.0_f64, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

fn psi_from_parts(quad: f64, s2: f64) -> f64 {
    if s2 > 0.0 {
        quad / s2
    } else if quad <= f64::EPSILON * f64::EPSILON {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Ordinary least squares. `psi` is left at 0.
pub fn ols_fit(data: &RegressionData) -> Result<FitResult> {
    let ls = LeastSquares::fit(data)?;
    let s2 = ls.s2();
    let beta = ls.beta;
    Ok(FitResult::new(beta, s2, 0.0, EstimatorKind::Unrestricted))
}

/// Least squares under `H b = h`.
///
/// `s2` and `psi` are reported from the *unrestricted* residuals, which is
/// what the shrinkage and pretest estimators consume.
pub fn restricted_fit(data: &RegressionData, r: &LinearRestriction) -> Result<FitResult> {
    let ls = LeastSquares::fit(data)?;
    let (beta, quad) = ls.restricted(r)?;
    let psi = psi_from_parts(quad, ls.s2());
    Ok(FitResult::new(beta, ls.s2(), psi, EstimatorKind::Restricted))
}

/// The Wald-type statistic for `H0: H b = h`; see [`LeastSquares::wald`].
pub fn wald_statistic(data: &RegressionData, r: &LinearRestriction) -> Result<f64> {
    LeastSquares::fit(data)?.wald(r)
}
