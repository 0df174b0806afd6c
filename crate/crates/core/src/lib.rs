pub mod asymptotics;
pub mod distributions;
pub mod estimators;
pub mod error;
pub mod numeric;
#[cfg(feature = "test-oracles")]
pub mod oracle;
pub mod regression;
pub mod table;

pub use asymptotics::{adb, adqr, adqr_with_variant, aqdb, risk_curve, LocalAlternative, RiskFormulaVariant};
pub use distributions::{central_cdf, central_quantile, NoncentralChiSq};
pub use error::{Error, Result};
pub use estimators::{positive_stein_estimate, pretest_estimate, stein_estimate, ShrinkageContext};
pub use regression::{
    ols_fit, restricted_fit, wald_statistic, EstimatorKind, FitResult, LeastSquares,
    LinearRestriction, RegressionData,
};
pub use table::{RmseRow, RmseTable};
