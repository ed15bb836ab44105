use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ispcore::SolveReport;

/// Count of model-payload client-to-server exchanges, intermediate rounds included.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunicationLedger {
    total: usize,
    deltas: Vec<usize>,
}

impl CommunicationLedger {
    pub fn record(&mut self, exchanges: usize) -> usize {
        self.total += exchanges;
        self.deltas.push(exchanges);
        self.total
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn deltas(&self) -> &[usize] {
        &self.deltas
    }
}

/// Which rounds count toward a run's reported communications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Exchanges up to and including the best validation round.
    #[default]
    ToBest,
    /// Every exchange of the run.
    Total,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub is_intermediate: bool,
    pub is_solve_round: bool,
    /// Number of participants in this (ordinary or intermediate) round.
    pub m: usize,
    pub participants: Vec<usize>,
    /// Loss of the new global model over the participants' training splits.
    pub train_loss: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub ledger_delta: usize,
    pub ledger_total: usize,
    pub solve: Option<SolveReport>,
}
