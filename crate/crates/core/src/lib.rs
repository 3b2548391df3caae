//! ReF-ER experience replay for off-policy continuous control: replayed samples far from
//! the current policy are filtered out and a KL penalty keeps the policy near past behaviors.
//!
//! The crate bundles a small exact-gradient MLP, Adam with the c_max / learning-rate
//! annealing schedule, truncated diagonal-Gaussian policies, a replay memory that tracks
//! near/far-policy samples and the penalty coefficient, the V-RACER, DDPG and NAF learners,
//! two built-in ODE control tasks and a deterministic training harness.
//!
//! Batch gradient evaluation is split into fixed-size chunks. With the `parallel` feature
//! (default) the chunks run on the rayon pool; without it they run sequentially. Chunk
//! boundaries never depend on the thread count, so both paths produce identical bits.

pub mod envs;
pub mod error;
pub mod harness;
pub mod learners;
pub mod nncore;
pub mod optim;
pub mod par;
pub mod policy;
pub mod replay;
pub mod rng;

pub use error::{Error, Result};
