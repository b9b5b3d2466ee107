//! Seeded experiment runs, sweeps and result aggregation.

pub mod aggregate;
pub mod config;
pub mod heatmap;
pub mod run;
pub mod sweep;

pub use config::{Algorithm, EnvKind, RunConfig};
pub use run::{run, train, EvalRecord, RunOutput};
