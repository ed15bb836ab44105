//! Deterministic federated-learning simulator with an adaptive participant-count
//! controller.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! threads or the command line lives in the `ispfl` companion crate.
//!
//! Layout:
//! - [`numkit`]: parameter vectors, the two fixed models, optimizers and local training.
//! - [`datasim`]: synthetic data, Dirichlet label partitioning and per-client splits.
//! - [`sampling`]: client-sampling strategies behind one interface.
//! - [`compress`]: TopK / RandK sparsification of update deltas.
//! - [`ispcore`]: the participant-count controller and the baseline schedules.
//! - [`orchestrator`]: the round loop, aggregation, evaluation and the communication ledger.

#![no_std]

extern crate alloc;

pub mod compress;
pub mod datasim;
mod error;
pub mod exec;
pub mod ispcore;
pub mod numkit;
pub mod orchestrator;
pub mod sampling;
pub mod seed;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use numkit::ParamVector;
