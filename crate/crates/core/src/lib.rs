//! Improved Laplace approximation of integrals `∫ exp(-h(x)) dx` over `R^d`.
//!
//! The standard Laplace value is corrected by `d` scalar re-normalization
//! constants of sequential profile densities, each found by adaptive
//! Gauss-Kronrod quadrature.
//!
//! ```
//! use ilaplace::{improved_laplace, EngineOptions};
//! use ilaplace::models::SkewTParams;
//!
//! let p = SkewTParams::new(3, 1.5, 1.5, 5.0).unwrap();
//! let r = improved_laplace(&p.objective(), &[0.0; 3], &EngineOptions::default()).unwrap();
//! assert!(r.log_i_il.abs() < 0.05);
//! ```

pub mod engine;
pub mod error;
pub mod linalg;
pub mod models;
pub mod objective;
pub mod optimize;
pub mod profile;
pub mod quad;

pub use engine::{
    glmm_marginal_loglik, improved_laplace, standard_laplace, EngineOptions, ILaplaceResult,
    PermutationChoice, StageTimings,
};
pub use error::{Error, Result};
pub use objective::{EvaluationBudget, Objective};
pub use optimize::{
    approx_conditional_minimum, conditional_minimize, minimize, ConditionalMinimum, ModeInfo,
};
pub use profile::{log_laplace, LaplaceResult, ProfileContext, Strategy};
pub use quad::{find_support_bounds, normalize_profile, QuadratureResult};
