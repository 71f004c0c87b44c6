//! Multivariate regression with heteroskedastic, VAR(p)-autocorrelated
//! errors: stacked OLS, Prais-Winsten and Cochrane-Orcutt feasible GLS,
//! Wald / HAR Wald / GRS tests of zero intercepts, and a Monte Carlo engine
//! for their rejection rates.
//!
//! ```
//! use mvgls::{build_stacked, ols_fit, fit_var, pw_fgls, wald_alpha, Matrix, PanelData};
//!
//! let t = 40;
//! let f = Matrix::new(t, 1, (0..t).map(|s| ((s * 7) % 11) as f64).collect());
//! let y = Matrix::new(t, 2, (0..2 * t).map(|i| ((i * 5) % 13) as f64 * 0.1).collect());
//! let panel = PanelData::with_common_factors(y, &f).unwrap();
//! let model = build_stacked(panel);
//! let ols = ols_fit(&model).unwrap();
//! let var = fit_var(&ols.residuals, 1).unwrap();
//! let test = wald_alpha(&pw_fgls(&model, &var).unwrap()).unwrap();
//! assert!((0.0..=1.0).contains(&test.p_value));
//! ```

// Index loops mirror the matrix algebra; `!(x > tol)` deliberately catches NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod error;
pub mod fgls;
pub mod hypothesis;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod simulate;
pub mod var_errors;

pub use dist::{chi2_sf, f_sf, quantile, DistError, RefDist};
pub use error::{Error, Result};
pub use fgls::{co_fgls, pw_fgls, quasi_difference, GlsFit, GlsKind, QdModel};
pub use hypothesis::{
    bartlett_lag, grs, har_wald, har_wald_with_lag, newey_west_lrv, wald_alpha, wald_fgls, GrsComponents,
    Restriction, TestName, TestResult,
};
pub use linalg::{LinalgError, Matrix};
pub use model::{build_stacked, ols_fit, OlsFit, PanelData, StackedModel};
pub use simulate::{
    run_experiment, run_experiment_with, run_replication, AlphaMode, Execution, LagChoice, OmegaMode,
    RejectionTable, SimConfig, TestRow,
};
pub use var_errors::{check_stationarity, fit_var, gamma_e_infinity, select_lag_bic, select_lag_bic_range, VarFit};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
