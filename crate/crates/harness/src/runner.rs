//! Seeded experiment grid: data preparation, training, evaluation, records.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use rfr_core::data::{load_csv, load_dataset, make_toy, split_by_column, Dataset, RawTable, SchemaConfig};
use rfr_core::losses::{train, LossBreakdown, TrainConfig};
use rfr_core::shift::{biased_sample, first_pc, ShiftConfig};
use serde::{Deserialize, Serialize};

use crate::bound::{check_bound, BoundReport};
use crate::config::{DatasetSpec, ExperimentConfig, Method, ShiftSpec};
use crate::metrics::{evaluate, FairnessReport};
use crate::report::{summarize, tradeoff_rows};
use crate::{Error, Result};

/// Bumped whenever a record field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to rerun one cell, embedded in its record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub experiment: String,
    pub hidden: Vec<usize>,
    pub threshold: f64,
    pub dataset: DatasetSpec,
    pub shift: ShiftSpec,
    /// Effective training settings (method-adjusted `lambda` and `rho`).
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Ok {
        source: FairnessReport,
        target: FairnessReport,
        bound: BoundReport,
        final_loss: Option<LossBreakdown>,
        /// Perturbation radius in parameter units after `rho_scale`.
        rho_absolute: f64,
        flat_gradient_events: usize,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub method: Method,
    pub lambda: f64,
    pub seed: u64,
    pub n_source: usize,
    pub n_target: usize,
    pub outcome: Outcome,
    pub config: RunSettings,
}

impl RunRecord {
    pub fn is_ok(&self) -> bool {
        matches!(self.outcome, Outcome::Ok { .. })
    }

    pub fn target(&self) -> Option<&FairnessReport> {
        match &self.outcome {
            Outcome::Ok { target, .. } => Some(target),
            Outcome::Failed { .. } => None,
        }
    }

    pub fn source(&self) -> Option<&FairnessReport> {
        match &self.outcome {
            Outcome::Ok { source, .. } => Some(source),
            Outcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SourceTarget {
    pub source: Dataset,
    pub target: Dataset,
}

enum Base {
    /// Regenerated per seed.
    Toy,
    Table(Dataset),
    Split(SourceTarget),
}

fn require(key: &'static str, path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingInput {
            key,
            path: path.to_path_buf(),
        })
    }
}

fn load_base(cfg: &ExperimentConfig) -> Result<(Base, Option<usize>)> {
    match &cfg.dataset {
        DatasetSpec::Csv { path, schema } => {
            require("dataset.path", path)?;
            require("dataset.schema", schema)?;
        }
        DatasetSpec::Saved { path } => require("dataset.path", path)?,
        DatasetSpec::Toy { .. } => {}
    }
    Ok(match (&cfg.dataset, &cfg.shift) {
        (DatasetSpec::Toy { .. }, _) => (Base::Toy, None),
        (DatasetSpec::Csv { path, schema }, ShiftSpec::SplitColumn) => {
            let schema = SchemaConfig::from_file(schema)?;
            let split = split_by_column(&RawTable::read(path)?, &schema)?;
            (
                Base::Split(SourceTarget {
                    source: split.source,
                    target: split.target,
                }),
                None,
            )
        }
        (DatasetSpec::Csv { path, schema }, ShiftSpec::Synthetic { .. }) => {
            let schema = SchemaConfig::from_file(schema)?;
            let (data, _) = load_csv(path, &schema)?;
            (Base::Table(data), Some(schema.numeric.len()))
        }
        (DatasetSpec::Saved { path }, _) => (Base::Table(load_dataset(path)?), None),
    })
}

/// Refits standardization of the leading `k` columns on the source rows and
/// applies it to both sides.
fn restandardize(split: &mut SourceTarget, k: usize) {
    for j in 0..k {
        let col = split.source.x.column(j);
        let mean = col.mean().unwrap_or(0.0);
        let sd = col.std(0.0);
        let sd = if sd > 0.0 { sd } else { 1.0 };
        for d in [&mut split.source, &mut split.target] {
            d.x.column_mut(j).mapv_inplace(|v| (v - mean) / sd);
        }
    }
}

fn shift_split(data: &Dataset, shift: &ShiftSpec, seed: u64) -> Result<SourceTarget> {
    let ShiftSpec::Synthetic {
        alpha,
        beta,
        n_source,
        n_target,
        orientation,
    } = shift
    else {
        return Err(Error::Config("split-column shift needs a CSV dataset".into()));
    };
    let pc = first_pc(data.features())?;
    let split = biased_sample(
        data,
        &pc,
        &ShiftConfig {
            alpha: *alpha,
            beta: *beta,
            n_source: *n_source,
            n_target: *n_target,
            seed,
            orientation: *orientation,
        },
    )?;
    Ok(SourceTarget {
        source: split.source,
        target: split.target,
    })
}

/// Source and target for every configured seed, in seed order.
pub fn prepare_splits(cfg: &ExperimentConfig) -> Result<Vec<(u64, SourceTarget)>> {
    let (base, numeric) = load_base(cfg)?;
    cfg.seeds
        .iter()
        .map(|&seed| {
            let split = match (&base, &cfg.dataset) {
                (Base::Toy, DatasetSpec::Toy { n, spec }) => shift_split(&make_toy(spec, *n, seed)?, &cfg.shift, seed)?,
                (Base::Table(data), _) => {
                    let mut s = shift_split(data, &cfg.shift, seed)?;
                    if let Some(k) = numeric {
                        restandardize(&mut s, k);
                    }
                    s
                }
                (Base::Split(s), _) => s.clone(),
                (Base::Toy, _) => unreachable!("toy base only comes from a toy dataset"),
            };
            Ok((seed, split))
        })
        .collect()
}

/// Trains and evaluates one `(method, lambda, seed)` cell. Training or
/// evaluation failures become a failed record instead of an error.
pub fn run_cell(cfg: &ExperimentConfig, method: Method, lambda: f64, seed: u64, split: &SourceTarget) -> RunRecord {
    let train_cfg = cfg.train_config(method, lambda, seed);
    let outcome = (|| -> rfr_core::Result<Outcome> {
        let trained = train(&split.source, &cfg.hidden, &train_cfg)?;
        Ok(Outcome::Ok {
            source: evaluate(&trained.params, &split.source, cfg.threshold)?,
            target: evaluate(&trained.params, &split.target, cfg.threshold)?,
            bound: check_bound(&trained.params, &split.source, &split.target)?,
            final_loss: trained.trace.last().copied(),
            rho_absolute: trained.perturbation.rho,
            flat_gradient_events: trained.flat_gradient_events,
        })
    })()
    .unwrap_or_else(|e| Outcome::Failed { error: e.to_string() });
    RunRecord {
        schema_version: SCHEMA_VERSION,
        method,
        lambda: train_cfg.lambda,
        seed,
        n_source: split.source.len(),
        n_target: split.target.len(),
        outcome,
        config: RunSettings {
            experiment: cfg.name.clone(),
            hidden: cfg.hidden.clone(),
            threshold: cfg.threshold,
            dataset: cfg.dataset.clone(),
            shift: cfg.shift.clone(),
            train: train_cfg,
        },
    }
}

/// Every cell for every seed. Runs in parallel; records come back ordered by
/// method, lambda, then seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let splits = prepare_splits(cfg)?;
    let jobs: Vec<(Method, f64, usize)> = cfg
        .cells()
        .into_iter()
        .flat_map(|(m, l)| (0..splits.len()).map(move |k| (m, l, k)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(m, l, k)| run_cell(cfg, m, l, splits[k].0, &splits[k].1))
        .collect())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `records.jsonl`, `records.csv`, `summary.csv` and `tradeoff.csv`
/// into `dir`.
pub fn write_outputs(records: &[RunRecord], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join("records.jsonl");
    let mut w = create(&path)?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let csv_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e: csv::Error| Error::io(p.clone(), std::io::Error::other(e))
    };
    let path = dir.join("records.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record([
        "method", "lambda", "seed", "status", "source_accuracy", "source_delta_dp", "target_accuracy",
        "target_delta_dp", "target_delta_eo", "soft_dp_source", "soft_dp_target", "bound", "bound_satisfied",
    ])
    .map_err(csv_err(&path))?;
    for r in records {
        let mut row = vec![r.method.to_string(), r.lambda.to_string(), r.seed.to_string()];
        match &r.outcome {
            Outcome::Ok {
                source, target, bound, ..
            } => row.extend([
                "ok".to_string(),
                source.accuracy.to_string(),
                source.delta_dp.to_string(),
                target.accuracy.to_string(),
                target.delta_dp.to_string(),
                target.delta_eo.map_or_else(|| "undefined".to_string(), |v| v.to_string()),
                bound.dp_source.to_string(),
                bound.dp_target.to_string(),
                bound.bound.to_string(),
                bound.satisfied.to_string(),
            ]),
            Outcome::Failed { .. } => {
                row.push("failed".to_string());
                row.extend(std::iter::repeat_n(String::new(), 9));
            }
        }
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for row in crate::report::summary_rows(&summarize(records)) {
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("tradeoff.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    for row in tradeoff_rows(&summarize(records)) {
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Reads records from `records.jsonl` files, or directories holding one.
pub fn read_records(paths: &[impl AsRef<Path>]) -> Result<Vec<RunRecord>> {
    let mut out = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let file = if p.is_dir() { p.join("records.jsonl") } else { p.to_path_buf() };
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let record: RunRecord = serde_json::from_str(line)?;
            if record.schema_version != SCHEMA_VERSION {
                return Err(Error::Config(format!(
                    "{}: record schema version {} is not {SCHEMA_VERSION}",
                    file.display(),
                    record.schema_version
                )));
            }
            out.push(record);
        }
    }
    Ok(out)
}
