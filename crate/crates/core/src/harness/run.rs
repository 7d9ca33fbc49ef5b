//! Multi-seed training runs and standalone evaluation.
//!
//! A run directory holds `manifest.toml`, the combined `metrics.csv`, and one
//! `seed-N/` directory per seed with `losses.csv`, its own `metrics.csv` and
//! `checkpoints/DDDDDD.ckpt` at every evaluation point. A seed whose
//! `metrics.csv` exists is finished; any other seed directory is discarded and
//! retrained when the run is resumed.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{load_ontology, ExperimentConfig};
use crate::episode::{write_trajectory, EpisodeResult, Metrics};
use crate::error::{Error, Result};
use crate::learn::{evaluate_oracle, evaluate_policy, GoalOptions, Losses, Trainer};
use crate::ontology::Ontology;
use crate::policy::Policy;

pub const MANIFEST: &str = "manifest.toml";
pub const METRICS: &str = "metrics.csv";
pub const LOSSES: &str = "losses.csv";

/// One line of a metrics report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config: String,
    pub seed: u64,
    #[serde(rename = "dialogues-trained")]
    pub dialogues_trained: usize,
    #[serde(rename = "inform-P")]
    pub inform_p: f64,
    #[serde(rename = "inform-R")]
    pub inform_r: f64,
    #[serde(rename = "inform-F1")]
    pub inform_f1: f64,
    #[serde(rename = "book-rate")]
    pub book_rate: f64,
    pub success: f64,
    pub complete: f64,
    #[serde(rename = "avg-turns-success")]
    pub avg_turns_success: f64,
    #[serde(rename = "avg-turns-all")]
    pub avg_turns_all: f64,
    #[serde(rename = "avg-reward")]
    pub avg_reward: f64,
}

impl MetricsRow {
    pub fn new(config: &str, seed: u64, dialogues_trained: usize, m: &Metrics) -> Self {
        MetricsRow {
            config: config.to_string(),
            seed,
            dialogues_trained,
            inform_p: m.inform_precision,
            inform_r: m.inform_recall,
            inform_f1: m.inform_f1,
            book_rate: m.book_rate,
            success: m.success,
            complete: m.complete,
            avg_turns_success: m.turns_success,
            avg_turns_all: m.turns_all,
            avg_reward: m.reward,
        }
    }

    /// Metric columns by name, in report order.
    pub fn values(&self) -> [(&'static str, f64); 9] {
        [
            ("inform-P", self.inform_p),
            ("inform-R", self.inform_r),
            ("inform-F1", self.inform_f1),
            ("book-rate", self.book_rate),
            ("success", self.success),
            ("complete", self.complete),
            ("avg-turns-success", self.avg_turns_success),
            ("avg-turns-all", self.avg_turns_all),
            ("avg-reward", self.avg_reward),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub episode: usize,
    #[serde(rename = "L_Q")]
    pub q: f64,
    #[serde(rename = "L_pi")]
    pub pi: f64,
    #[serde(rename = "L_IL")]
    pub il: f64,
    #[serde(rename = "L_ent")]
    pub entropy: f64,
    #[serde(rename = "buffer-size")]
    pub buffer_size: usize,
    #[serde(rename = "oracle-fraction")]
    pub oracle_fraction: f64,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err(path))
}

pub fn seed_dir(run: &Path, seed: u64) -> PathBuf {
    run.join(format!("seed-{seed}"))
}

pub fn checkpoint_path(run: &Path, seed: u64, dialogues: usize) -> PathBuf {
    seed_dir(run, seed).join("checkpoints").join(format!("{dialogues:06}.ckpt"))
}

/// Progress events emitted while training.
#[derive(Clone, Debug, PartialEq)]
pub enum Progress {
    SeedSkipped(u64),
    Evaluated(MetricsRow),
}

/// Trains every seed of `config` into `dir`, resuming finished seeds.
pub fn train(config: &ExperimentConfig, dir: &Path, progress: &mut dyn FnMut(Progress)) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let ontology = config.load_ontology()?;
    let manifest = config.manifest(&ontology);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST);
    match fs::read_to_string(&manifest_path) {
        Ok(existing) if existing != manifest => {
            return Err(Error::Config(format!(
                "{} belongs to a different experiment; use a fresh directory",
                dir.display()
            )))
        }
        Ok(_) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            fs::write(&manifest_path, &manifest).map_err(|e| Error::io(&manifest_path, e))?;
        }
        Err(e) => return Err(Error::io(&manifest_path, e)),
    }

    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let done = seed_dir(dir, seed).join(METRICS);
        if done.exists() {
            rows.extend(read_metrics(&done)?);
            progress(Progress::SeedSkipped(seed));
        } else {
            rows.extend(train_seed(config, &ontology, dir, seed, progress)?);
        }
    }
    write_metrics(&dir.join(METRICS), &rows)?;
    Ok(rows)
}

fn train_seed(
    config: &ExperimentConfig,
    ontology: &Arc<Ontology>,
    dir: &Path,
    seed: u64,
    progress: &mut dyn FnMut(Progress),
) -> Result<Vec<MetricsRow>> {
    let sd = seed_dir(dir, seed);
    if sd.exists() {
        fs::remove_dir_all(&sd).map_err(|e| Error::io(&sd, e))?;
    }
    let ck_dir = sd.join("checkpoints");
    fs::create_dir_all(&ck_dir).map_err(|e| Error::io(&ck_dir, e))?;

    let policy = Policy::new(config.policy, ontology.clone(), seed)?;
    let mut trainer = Trainer::new(policy, config.mode, config.hyper, config.goals(), seed)?;
    let loss_path = sd.join(LOSSES);
    let mut losses = csv::Writer::from_path(&loss_path).map_err(csv_err(&loss_path))?;
    let schedule = config.schedule();
    let mut rows = Vec::with_capacity(schedule.len());
    for episode in 1..=config.train_dialogues {
        let (_, l): (_, Losses) = trainer.train_episode()?;
        losses
            .serialize(LossRow {
                episode,
                q: l.q,
                pi: l.pi,
                il: l.il,
                entropy: l.entropy,
                buffer_size: trainer.buffer.len(),
                oracle_fraction: trainer.buffer.oracle_fraction(),
            })
            .map_err(csv_err(&loss_path))?;
        if episode % config.eval_every == 0 {
            let results = evaluate_policy(&trainer.policy, config.eval_dialogues, seed, config.goals())?;
            let row = MetricsRow::new(&config.name, seed, episode, &Metrics::from_results(&results));
            trainer
                .policy
                .save(&checkpoint_path(dir, seed, episode), Some(&trainer.adam))?;
            progress(Progress::Evaluated(row.clone()));
            rows.push(row);
        }
    }
    losses.flush().map_err(|e| Error::io(&loss_path, e))?;
    let tmp = sd.join("metrics.csv.partial");
    write_metrics(&tmp, &rows)?;
    let done = sd.join(METRICS);
    fs::rename(&tmp, &done).map_err(|e| Error::io(&done, e))?;
    Ok(rows)
}

/// Standalone evaluation of a checkpoint, or of the oracle when `checkpoint` is `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRequest {
    pub checkpoint: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    /// Defaults to the domains recorded in the checkpoint.
    pub domains: Option<Vec<String>>,
    pub dialogues: usize,
    pub seed: u64,
    pub goals: GoalOptions,
    /// Write one JSON line per turn here.
    pub trajectories: Option<PathBuf>,
    /// Label for the report row.
    pub label: String,
}

impl Default for EvalRequest {
    fn default() -> Self {
        EvalRequest {
            checkpoint: None,
            ontology: None,
            domains: None,
            dialogues: 500,
            seed: 0,
            goals: GoalOptions::default(),
            trajectories: None,
            label: "oracle".into(),
        }
    }
}

/// Loads a checkpoint, restricting the ontology to its recorded domains unless told otherwise.
pub fn load_policy(checkpoint: &Path, ontology: Option<&Path>, domains: Option<&[String]>) -> Result<Policy> {
    let recorded = match domains {
        Some(_) => None,
        None => Policy::checkpoint_domains(checkpoint)?,
    };
    let ont = load_ontology(ontology, domains.or(recorded.as_deref()))?;
    Ok(Policy::load(checkpoint, ont)?.0)
}

pub fn evaluate(request: &EvalRequest) -> Result<(MetricsRow, Vec<EpisodeResult>)> {
    if request.dialogues == 0 {
        return Err(Error::Invalid("evaluation needs at least one dialogue".into()));
    }
    let (results, ontology) = match &request.checkpoint {
        Some(path) => {
            let policy = load_policy(path, request.ontology.as_deref(), request.domains.as_deref())?;
            let results = evaluate_policy(&policy, request.dialogues, request.seed, request.goals)?;
            (results, policy.ontology().clone())
        }
        None => {
            let ont = load_ontology(request.ontology.as_deref(), request.domains.as_deref())?;
            (evaluate_oracle(&ont, request.dialogues, request.seed, request.goals)?, ont)
        }
    };
    if let Some(path) = &request.trajectories {
        let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        for r in &results {
            write_trajectory(&mut w, r, &ontology).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    let row = MetricsRow::new(&request.label, request.seed, 0, &Metrics::from_results(&results));
    Ok((row, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_header_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let row = MetricsRow::new("x", 3, 10, &Metrics::default());
        write_metrics(&p, std::slice::from_ref(&row)).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "config,seed,dialogues-trained,inform-P,inform-R,inform-F1,book-rate,success,complete,avg-turns-success,avg-turns-all,avg-reward"
        );
        assert_eq!(read_metrics(&p).unwrap(), vec![row]);
    }

    #[test]
    fn zero_dialogues_is_an_error() {
        let req = EvalRequest {
            dialogues: 0,
            ..EvalRequest::default()
        };
        assert!(evaluate(&req).is_err());
    }
}
