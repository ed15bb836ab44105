//! Per-run files: the JSONL round stream and the summary JSON.
//!
//! A JSONL stream is a `header` line, one `round` line per executed round
//! (intermediate rounds included, flagged `is_intermediate`) and an `end`
//! line. Nothing in it depends on wall-clock time, so identical runs produce
//! identical bytes.

use std::io::{self, Write};
use std::time::Instant;

use ispfl_core::orchestrator::{CountMode, RoundRecord, RunHooks, RunResult};
use serde::{Deserialize, Serialize};

use crate::config::{MethodConfig, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub config_hash: String,
    pub name: String,
    pub label: String,
    pub seed: u64,
    pub method: MethodConfig,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct End {
    pub rounds_run: usize,
    pub stopped_early: bool,
    pub best_round: Option<usize>,
    pub ledger_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Line {
    Header(Box<Header>),
    Round(RoundRecord),
    End(End),
}

impl Header {
    pub fn new(cfg: &RunConfig, hash: &str, method: usize, seed: u64) -> Self {
        Header {
            schema_version: SCHEMA_VERSION,
            config_hash: hash.to_owned(),
            name: cfg.name.clone(),
            label: cfg.methods[method].label.clone(),
            seed,
            method: cfg.methods[method].clone(),
            config: cfg.clone(),
        }
    }
}

pub fn write_jsonl<W: Write>(mut w: W, header: &Header, result: &RunResult) -> io::Result<()> {
    let mut line = |l: &Line| -> io::Result<()> {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")
    };
    line(&Line::Header(Box::new(header.clone())))?;
    for r in &result.records {
        line(&Line::Round(r.clone()))?;
    }
    line(&Line::End(End {
        rounds_run: result.records.iter().filter(|r| !r.is_intermediate).count(),
        stopped_early: result.stopped_early,
        best_round: result.best().map(|r| r.round),
        ledger_total: result.ledger.total(),
    }))?;
    w.flush()
}

/// Wall-clock time per round, split by round kind.
#[derive(Debug)]
pub struct Timing {
    started: Instant,
    round_start: Option<Instant>,
    pub ordinary: Vec<f64>,
    pub intermediate: Vec<f64>,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            started: Instant::now(),
            round_start: None,
            ordinary: Vec::new(),
            intermediate: Vec::new(),
        }
    }
}

impl RunHooks for Timing {
    fn round_started(&mut self, _round: usize, _intermediate: bool) {
        self.round_start = Some(Instant::now());
    }

    fn round_finished(&mut self, _round: usize, intermediate: bool) {
        if let Some(t) = self.round_start.take() {
            let secs = t.elapsed().as_secs_f64();
            if intermediate {
                self.intermediate.push(secs);
            } else {
                self.ordinary.push(secs);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub round: usize,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub test_loss: Option<f64>,
    pub test_accuracy: Option<f64>,
}

impl From<&RoundRecord> for Metrics {
    fn from(r: &RoundRecord) -> Self {
        Metrics {
            round: r.round,
            val_loss: r.val_loss,
            val_accuracy: r.val_accuracy,
            test_loss: r.test_loss,
            test_accuracy: r.test_accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub total_seconds: f64,
    pub mean_round_seconds: Option<f64>,
    pub mean_intermediate_seconds: Option<f64>,
    /// Mean intermediate-round time over mean ordinary-round time.
    pub intermediate_relative: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config_hash: String,
    pub name: String,
    pub label: String,
    pub seed: u64,
    pub rounds_run: usize,
    pub stopped_early: bool,
    pub communication_count: CountMode,
    pub communications: usize,
    pub communications_total: usize,
    pub best: Option<Metrics>,
    pub last: Option<Metrics>,
    pub timing: TimingSummary,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl Summary {
    pub fn new(header: &Header, result: &RunResult, timing: &Timing) -> Self {
        let mode = header.config.training.communication_count;
        let round = mean(&timing.ordinary);
        let inter = mean(&timing.intermediate);
        Summary {
            schema_version: SCHEMA_VERSION,
            config_hash: header.config_hash.clone(),
            name: header.name.clone(),
            label: header.label.clone(),
            seed: header.seed,
            rounds_run: result.records.iter().filter(|r| !r.is_intermediate).count(),
            stopped_early: result.stopped_early,
            communication_count: mode,
            communications: result.communications(mode),
            communications_total: result.ledger.total(),
            best: result.best().map(Metrics::from),
            last: result
                .records
                .iter()
                .rev()
                .find(|r| !r.is_intermediate)
                .map(Metrics::from),
            timing: TimingSummary {
                total_seconds: timing.started.elapsed().as_secs_f64(),
                mean_round_seconds: round,
                mean_intermediate_seconds: inter,
                intermediate_relative: round.zip(inter).map(|(r, i)| i / r),
            },
        }
    }
}
