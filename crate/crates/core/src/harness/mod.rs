//! Training loop, configuration, metrics, checkpoints and evaluation.

pub mod agent;
pub mod checkpoint;
pub mod codec;
pub mod config;
pub mod evaluate;
pub mod metrics;
pub mod train;

pub use agent::{Agent, StateScaler};
pub use checkpoint::Checkpoint;
pub use config::{Algo, TrainConfig};
pub use metrics::{MetricsRow, MetricsWriter};
pub use train::Trainer;
