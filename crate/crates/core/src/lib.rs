//! Traffic-matrix estimation from link counts with a spatiotemporally
//! regularized nonnegative factorization.
//!
//! Training learns `X ~ W H` on a window of fully or partially observed OD
//! flows. At test time only link flows `y = A x` are seen; each snapshot is
//! mapped to a latent vector through the compact routing matrix `A W` and
//! then polished with Vardi's EM.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod fastgrad;
pub mod init;
pub mod io;
pub mod lags;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod network;
pub mod synth;
pub mod temporal;
pub mod trainer;

pub use error::{Result, TomographyError};
pub use io::{ModelArchive, RunConfig};
pub use estimator::{estimate_latent, estimate_od_flow, estimate_window, refine_em, EstimatorConfig};
pub use lags::LagSet;
pub use model::{FactorModel, RegularizationWeights};
pub use network::{compute_link_flows, split_train_test, LinkFlowMatrix, RoutingMatrix, TrafficMatrix};
pub use metrics::{cdf_points, sre, summary_stats, tre, ErrorVector, SummaryStats};
pub use synth::{generate_synthetic, random_mask, SyntheticScenario};
pub use trainer::{train, MissingMode, TrainConfig, TrainReport};
