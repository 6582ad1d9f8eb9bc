//! Built-in integrands.

pub mod gaussian;
pub mod glmm;
pub mod gompertz;
pub mod registry;
pub mod skew_t;

pub use gaussian::{random_spd, IsotropicGaussian, Quadratic};
pub use glmm::{glmm_joint_neg_log, BinaryGlmm, GlmmSpec};
pub use gompertz::{gompertz_cdf, gompertz_neg_log_posterior, gompertz_sample, GompertzPosterior};
pub use registry::{build_model, ModelInstance, ModelParams, MODEL_NAMES};
pub use skew_t::{skew_t_neg_log_density, SkewTParams};
