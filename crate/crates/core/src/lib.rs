//! Robust one-step estimation and bias-aware inference for dyadic bipartite
//! network models under local misspecification.
//!
//! Pipeline: [`simulate`] or [`ingest`] produce a [`BipartiteNetwork`];
//! [`glm`] fits the initial estimator; [`sieve`] builds instruments;
//! [`moments`] estimates bias and variance components; [`robust`] computes
//! the minimax sensitivity, the one-step estimate and its interval; [`mc`]
//! repeats all of it over simulated designs.

// `!(x > 0.0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod glm;
pub mod ingest;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod moments;
pub mod robust;
pub mod sieve;
pub mod simulate;

pub use error::{Error, Result};
pub use ingest::{fit_report, load_network, FeatureKind, FeatureSpec, ReportOptions};
pub use mc::{run_mc, McConfig, McSummary};
pub use glm::{fit_logistic, fit_poisson, Family, FitOptions, FitResult};
pub use model::{
    builtin_target, AttributeNames, BipartiteNetwork, Dyad, Link, MisspecNeighborhood,
    NetworkParts, TargetFunctional, TargetKind, Theta,
};
pub use moments::MomentComponents;
pub use robust::{
    bias_aware_ci, cv_alpha, kappa_star, mse_h, one_step, worst_case_bias, CvMode,
    EstimateOptions, Estimator, RobustEstimate,
};
pub use sieve::{SieveBasis, SieveSpec};
pub use simulate::{simulate_network, true_psi_oracle, Design, SimulationDesign};
