//! File formats: matrix CSV, the model archive and the run configuration.

pub mod archive;
pub mod config;
pub mod matrix_csv;

pub use archive::ModelArchive;
pub use config::{Profile, RunConfig};
pub use matrix_csv::{load_matrix_csv, write_matrix_csv, MatrixKind};
