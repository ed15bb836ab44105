//! Comparison table recomputed from JSONL round streams.
//!
//! Column order is fixed per `REPORT_VERSION`; see `docs/formats.md`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use ispfl_core::orchestrator::{CountMode, RoundRecord};
use walkdir::WalkDir;

use crate::records::{Header, Line, SCHEMA_VERSION};

pub const REPORT_VERSION: u32 = 1;
pub const RUN_FILE: &str = "rounds.jsonl";

pub const COLUMNS: [&str; 19] = [
    "report_version",
    "label",
    "seeds",
    "communications_mean",
    "communications_std",
    "best_round_mean",
    "best_round_std",
    "best_val_loss_mean",
    "best_val_loss_std",
    "best_val_accuracy_mean",
    "best_val_accuracy_std",
    "best_test_loss_mean",
    "best_test_loss_std",
    "best_test_accuracy_mean",
    "best_test_accuracy_std",
    "final_test_loss_mean",
    "final_test_loss_std",
    "communication_count",
    "config_hash",
];

/// One parsed run file.
#[derive(Debug, Clone)]
pub struct Run {
    pub path: PathBuf,
    pub header: Header,
    pub records: Vec<RoundRecord>,
}

impl Run {
    pub fn parse(path: &Path, text: &str) -> anyhow::Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(raw)
                .with_context(|| format!("{}: line {} is not a valid record", path.display(), i + 1))?;
            match line {
                Line::Header(h) if header.is_none() && i == 0 => header = Some(*h),
                Line::Header(_) => bail!("{}: unexpected header at line {}", path.display(), i + 1),
                Line::Round(r) => records.push(r),
                Line::End(_) => {}
            }
        }
        let header = header.with_context(|| format!("{}: missing header line", path.display()))?;
        if header.schema_version != SCHEMA_VERSION {
            bail!(
                "{}: schema version {} (expected {SCHEMA_VERSION})",
                path.display(),
                header.schema_version
            );
        }
        Ok(Run {
            path: path.to_owned(),
            header,
            records,
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Run::parse(path, &text)
    }

    pub fn ordinary(&self) -> impl Iterator<Item = &RoundRecord> {
        self.records.iter().filter(|r| !r.is_intermediate)
    }

    /// First ordinary round with the lowest validation loss.
    pub fn best(&self) -> Option<&RoundRecord> {
        let mut best: Option<&RoundRecord> = None;
        for r in self.ordinary() {
            if let Some(v) = r.val_loss {
                if best.is_none_or(|b| v < b.val_loss.unwrap_or(f64::INFINITY)) {
                    best = Some(r);
                }
            }
        }
        best
    }

    pub fn communications(&self, mode: CountMode) -> usize {
        match mode {
            CountMode::Total => self.records.last().map_or(0, |r| r.ledger_total),
            CountMode::ToBest => self.best().map_or(0, |r| r.ledger_total),
        }
    }
}

/// Every run file below `dirs`, in path order.
pub fn find_runs(dirs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for dir in dirs {
        if dir.is_file() {
            out.push(dir.clone());
            continue;
        }
        for entry in WalkDir::new(dir).sort_by_file_name() {
            let entry = entry.with_context(|| format!("scanning {}", dir.display()))?;
            if entry.file_type().is_file() && entry.file_name() == RUN_FILE {
                out.push(entry.into_path());
            }
        }
    }
    if out.is_empty() {
        bail!("no {RUN_FILE} files found");
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; absent below two values.
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2).then(|| {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        });
        Some(Stat { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub label: String,
    pub seeds: usize,
    pub communications: Option<Stat>,
    pub best_round: Option<Stat>,
    pub best_val_loss: Option<Stat>,
    pub best_val_accuracy: Option<Stat>,
    pub best_test_loss: Option<Stat>,
    pub best_test_accuracy: Option<Stat>,
    pub final_test_loss: Option<Stat>,
    pub communication_count: CountMode,
    pub config_hash: String,
}

/// One row per method label, in order of first appearance.
pub fn rows(runs: &[Run]) -> Vec<Row> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&Run>> = BTreeMap::new();
    for run in runs {
        let label = run.header.label.as_str();
        if !groups.contains_key(label) {
            order.push(label);
        }
        groups.entry(label).or_default().push(run);
    }
    order
        .into_iter()
        .map(|label| {
            let group = &groups[label];
            let mode = group[0].header.config.training.communication_count;
            let collect = |f: &dyn Fn(&Run) -> Option<f64>| -> Option<Stat> {
                Stat::of(&group.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            let mut hashes: Vec<&str> = group.iter().map(|r| r.header.config_hash.as_str()).collect();
            hashes.dedup();
            Row {
                label: label.to_owned(),
                seeds: group.len(),
                communications: collect(&|r| Some(r.communications(mode) as f64)),
                best_round: collect(&|r| r.best().map(|b| b.round as f64)),
                best_val_loss: collect(&|r| r.best().and_then(|b| b.val_loss)),
                best_val_accuracy: collect(&|r| r.best().and_then(|b| b.val_accuracy)),
                best_test_loss: collect(&|r| r.best().and_then(|b| b.test_loss)),
                best_test_accuracy: collect(&|r| r.best().and_then(|b| b.test_accuracy)),
                final_test_loss: collect(&|r| r.ordinary().last().and_then(|b| b.test_loss)),
                communication_count: mode,
                config_hash: hashes.join("+"),
            }
        })
        .collect()
}

pub fn write_csv<W: Write>(w: W, rows: &[Row]) -> anyhow::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COLUMNS)?;
    for row in rows {
        let mut fields = vec![REPORT_VERSION.to_string(), row.label.clone(), row.seeds.to_string()];
        for stat in [
            row.communications,
            row.best_round,
            row.best_val_loss,
            row.best_val_accuracy,
            row.best_test_loss,
            row.best_test_accuracy,
            row.final_test_loss,
        ] {
            fields.push(stat.map_or(String::new(), |s| s.mean.to_string()));
            fields.push(stat.and_then(|s| s.std).map_or(String::new(), |v| v.to_string()));
        }
        fields.push(match row.communication_count {
            CountMode::ToBest => "to_best".into(),
            CountMode::Total => "total".into(),
        });
        fields.push(row.config_hash.clone());
        out.write_record(&fields)?;
    }
    out.flush()?;
    Ok(())
}

/// Loads every run below `dirs` and writes the table.
pub fn report<W: Write>(dirs: &[PathBuf], w: W) -> anyhow::Result<Vec<Row>> {
    let runs = find_runs(dirs)?
        .iter()
        .map(|p| Run::load(p))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let rows = rows(&runs);
    write_csv(w, &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_needs_two_values_for_std() {
        assert_eq!(Stat::of(&[]), None);
        assert_eq!(Stat::of(&[2.0]), Some(Stat { mean: 2.0, std: None }));
        let s = Stat::of(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, Some(1.0));
    }

    #[test]
    fn malformed_line_names_the_file() {
        let err = Run::parse(Path::new("x/rounds.jsonl"), "{not json}\n").unwrap_err();
        assert!(format!("{err:#}").contains("x/rounds.jsonl"));
        let err = Run::parse(Path::new("y.jsonl"), "").unwrap_err();
        assert!(format!("{err:#}").contains("missing header"));
    }
}
