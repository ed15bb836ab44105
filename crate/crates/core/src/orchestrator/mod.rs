//! The federated round loop, aggregation, global evaluation and the
//! communication ledger.

mod aggregate;
mod federation;
mod ledger;
mod run;

pub use aggregate::aggregate;
pub use federation::{DataConfig, Federation, ModelConfig};
pub use ledger::{CommunicationLedger, CountMode, RoundRecord};
pub use run::{apply_compression, run_training, RunHooks, RunResult, RunSpec};
