//! Runs every (method, seed) cell of a config and writes its artifacts.
//!
//! Output layout under the run directory:
//!
//! ```text
//! config.json                      echo of the parsed config plus its hash
//! <label>/seed-<s>/rounds.jsonl    round stream
//! <label>/seed-<s>/summary.json    best and last metrics, timing
//! partitions/seed-<s>.json         only with `output.export_partition`
//! report.csv                       recomputed from the JSONL files
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::Context;
use ispfl_core::orchestrator::{run_training, Federation};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};
use crate::exec::Rayon;
use crate::records::{write_jsonl, Header, Summary, Timing};
use crate::report::{self, RUN_FILE};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides `output.dir`.
    pub out_dir: Option<PathBuf>,
    /// Added to every configured seed.
    pub seed_offset: u64,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(anyhow::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error: {e}"),
            RunError::Io(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Io(e)
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub cells: usize,
    pub failures: Vec<String>,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    config_hash: &'a str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct ClientExport<'a> {
    client_id: usize,
    rows: &'a [usize],
    train: &'a [usize],
    val: &'a [usize],
    weight: f64,
}

#[derive(Serialize)]
struct PartitionExport<'a> {
    config_hash: &'a str,
    seed: u64,
    alpha: f64,
    clients: Vec<ClientExport<'a>>,
}

pub fn cell_dir(out: &Path, label: &str, seed: u64) -> PathBuf {
    out.join(label).join(format!("seed-{seed}"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn export_partition(out: &Path, hash: &str, seed: u64, fed: &Federation) -> anyhow::Result<()> {
    let dir = out.join("partitions");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let clients = fed
        .handles
        .iter()
        .map(|h| ClientExport {
            client_id: h.client_id,
            rows: &fed.partition.client_indices[h.client_id],
            train: &h.train_indices,
            val: &h.val_indices,
            weight: h.weight,
        })
        .collect();
    write_json(
        &dir.join(format!("seed-{seed}.json")),
        &PartitionExport {
            config_hash: hash,
            seed,
            alpha: fed.partition.alpha,
            clients,
        },
    )
}

fn run_cell(cfg: &RunConfig, hash: &str, out: &Path, method: usize, seed: u64, fed: &Federation) -> anyhow::Result<()> {
    let label = &cfg.methods[method].label;
    let spec = cfg.run_spec(method, seed);
    let mut timing = Timing::default();
    let result = run_training(fed, &spec, &Rayon, &mut timing)
        .with_context(|| format!("{label} seed {seed}"))?;
    let dir = cell_dir(out, label, seed);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let header = Header::new(cfg, hash, method, seed);
    let path = dir.join(RUN_FILE);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_jsonl(BufWriter::new(file), &header, &result).with_context(|| format!("writing {}", path.display()))?;
    write_json(&dir.join("summary.json"), &Summary::new(&header, &result, &timing))
}

/// Runs the whole grid. Data problems found while building the federations
/// surface as `RunError::Config` before any training starts; failed cells are
/// listed in the outcome and do not stop the others.
pub fn run_experiment(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, RunError> {
    let hash = cfg.hash();
    let out = opts.out_dir.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let seeds: Vec<u64> = cfg
        .training
        .seeds
        .iter()
        .map(|s| s.wrapping_add(opts.seed_offset))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .context("starting worker pool")?;

    let feds = pool.install(|| {
        seeds
            .par_iter()
            .map(|&s| Federation::build(&cfg.data, s))
            .collect::<Result<Vec<_>, _>>()
    });
    let feds = feds.map_err(|e| RunError::Config(e.into()))?;

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_json(
        &out.join("config.json"),
        &ConfigEcho {
            config_hash: &hash,
            config: cfg,
        },
    )?;
    if cfg.output.export_partition {
        for (&seed, fed) in seeds.iter().zip(&feds) {
            export_partition(&out, &hash, seed, fed)?;
        }
    }

    let cells: Vec<(usize, usize)> = (0..cfg.methods.len())
        .flat_map(|m| (0..seeds.len()).map(move |s| (m, s)))
        .collect();
    let total = cells.len();
    let results: Vec<Option<String>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(m, s)| {
                let label = &cfg.methods[m].label;
                eprintln!("[start] {label} seed {}", seeds[s]);
                match run_cell(cfg, &hash, &out, m, seeds[s], &feds[s]) {
                    Ok(()) => {
                        eprintln!("[done]  {label} seed {}", seeds[s]);
                        None
                    }
                    Err(e) => {
                        let msg = format!("{e:#}");
                        eprintln!("[fail]  {msg}");
                        Some(msg)
                    }
                }
            })
            .collect()
    });
    let finished: Vec<PathBuf> = cells
        .iter()
        .zip(&results)
        .filter(|(_, r)| r.is_none())
        .map(|(&(m, s), _)| cell_dir(&out, &cfg.methods[m].label, seeds[s]).join(RUN_FILE))
        .collect();
    let failures: Vec<String> = results.into_iter().flatten().collect();

    if !finished.is_empty() {
        let path = out.join("report.csv");
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        report::report(&finished, BufWriter::new(file))?;
    }
    Ok(Outcome {
        out_dir: out,
        cells: total,
        failures,
    })
}
