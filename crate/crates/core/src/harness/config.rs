//! Experiment configuration (TOML) and the run manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{GoalOptions, Hyper, Mode};
use crate::ontology::Ontology;
use crate::policy::PolicyKind;

/// Named shorthand for the structured policy trained with imitation from oracle supervision.
pub const ACGOS: &str = "acgos";

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub policy: PolicyKind,
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub train_dialogues: usize,
    pub eval_every: usize,
    pub eval_dialogues: usize,
    pub max_goal_domains: usize,
    pub patience: usize,
    /// Ontology JSON; the bundled ontology when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ontology: Option<PathBuf>,
    /// Restrict the ontology to these domains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domains: Option<Vec<String>>,
    pub hyper: Hyper,
}

/// What a config file may contain. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    preset: Option<String>,
    policy: Option<PolicyKind>,
    mode: Option<Mode>,
    seeds: Option<Vec<u64>>,
    train_dialogues: Option<usize>,
    eval_every: Option<usize>,
    eval_dialogues: Option<usize>,
    max_goal_domains: Option<usize>,
    patience: Option<usize>,
    ontology: Option<PathBuf>,
    domains: Option<Vec<String>>,
    #[serde(default)]
    hyper: Hyper,
    /// Present in manifests; ignored on input.
    #[allow(dead_code)]
    provenance: Option<toml::Value>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "fnn-rl".into(),
            policy: PolicyKind::Fnn,
            mode: Mode::Rl,
            seeds: (0..10).collect(),
            train_dialogues: 10_000,
            eval_every: 1_000,
            eval_dialogues: 500,
            max_goal_domains: GoalOptions::default().max_domains,
            patience: GoalOptions::default().patience,
            ontology: None,
            domains: None,
            hyper: Hyper::default(),
        }
    }
}

impl ExperimentConfig {
    /// A default experiment for one policy and mode.
    pub fn new(policy: PolicyKind, mode: Mode) -> Self {
        ExperimentConfig {
            name: format!("{policy}-{mode}"),
            policy,
            mode,
            ..ExperimentConfig::default()
        }
    }

    /// The ACGOS preset: UHGNN trained with ILfOS.
    pub fn acgos() -> Self {
        ExperimentConfig {
            name: ACGOS.into(),
            ..ExperimentConfig::new(PolicyKind::Uhgnn, Mode::Ilfos)
        }
    }

    /// Parses TOML. Relative ontology paths are resolved against `base`.
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut config = match raw.preset.as_deref() {
            None => {
                let policy = raw.policy.unwrap_or(PolicyKind::Fnn);
                let mode = raw.mode.unwrap_or(Mode::Rl);
                ExperimentConfig::new(policy, mode)
            }
            Some(p) if p.eq_ignore_ascii_case(ACGOS) => {
                let preset = ExperimentConfig::acgos();
                if raw.policy.is_some_and(|k| k != preset.policy) || raw.mode.is_some_and(|m| m != preset.mode) {
                    return Err(Error::Config("preset `acgos` fixes policy = uhgnn and mode = ilfos".into()));
                }
                preset
            }
            Some(p) => return Err(Error::Config(format!("unknown preset `{p}`"))),
        };
        if let Some(v) = raw.name {
            config.name = v;
        }
        if let Some(v) = raw.seeds {
            config.seeds = v;
        }
        if let Some(v) = raw.train_dialogues {
            config.train_dialogues = v;
        }
        if let Some(v) = raw.eval_every {
            config.eval_every = v;
        }
        if let Some(v) = raw.eval_dialogues {
            config.eval_dialogues = v;
        }
        if let Some(v) = raw.max_goal_domains {
            config.max_goal_domains = v;
        }
        if let Some(v) = raw.patience {
            config.patience = v;
        }
        config.ontology = raw.ontology.map(|p| match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        });
        config.domains = raw.domains;
        config.hyper = raw.hyper;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.name.is_empty() || self.name.contains([',', '"', '\n']) {
            return bad("name must be non-empty and free of commas, quotes and newlines");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.eval_every == 0 || self.eval_dialogues == 0 {
            return bad("eval_every and eval_dialogues must be positive");
        }
        if self.train_dialogues < self.eval_every || !self.train_dialogues.is_multiple_of(self.eval_every) {
            return bad("train_dialogues must be a positive multiple of eval_every");
        }
        if self.max_goal_domains == 0 || self.patience == 0 {
            return bad("max_goal_domains and patience must be positive");
        }
        self.hyper.validate()
    }

    /// Dialogue counts at which the policy is evaluated and checkpointed.
    pub fn schedule(&self) -> Vec<usize> {
        (1..=self.train_dialogues / self.eval_every)
            .map(|k| k * self.eval_every)
            .collect()
    }

    pub fn goals(&self) -> GoalOptions {
        GoalOptions {
            max_domains: self.max_goal_domains,
            patience: self.patience,
        }
    }

    pub fn load_ontology(&self) -> Result<Arc<Ontology>> {
        load_ontology(self.ontology.as_deref(), self.domains.as_deref())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// The config followed by a provenance table; loadable as a config.
    pub fn manifest(&self, ontology: &Ontology) -> String {
        let provenance = toml::toml! {
            [provenance]
            crate_version = (env!("CARGO_PKG_VERSION"))
            ontology_fingerprint = (ontology.fingerprint())
            domains = (ontology.domains().iter().map(|d| d.name.clone()).collect::<Vec<_>>())
            schedule = (self.schedule().iter().map(|&s| s as i64).collect::<Vec<_>>())
        };
        format!("{}\n{}", self.to_toml(), toml::to_string(&provenance).expect("table serializes"))
    }
}

/// The bundled ontology or a JSON file, optionally restricted to some domains.
pub fn load_ontology(path: Option<&Path>, domains: Option<&[String]>) -> Result<Arc<Ontology>> {
    let base = match path {
        Some(p) => Ontology::load(p)?,
        None => Ontology::bundled(),
    };
    Ok(Arc::new(match domains {
        Some(d) => base.restrict(d)?,
        None => base,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_protocol() {
        let c = ExperimentConfig::from_toml_str("", None).unwrap();
        assert_eq!(c.seeds.len(), 10);
        assert_eq!((c.train_dialogues, c.eval_every, c.eval_dialogues), (10_000, 1_000, 500));
        assert_eq!(c.schedule().len(), 10);
    }

    #[test]
    fn preset_and_conflicts() {
        let c = ExperimentConfig::from_toml_str("preset = \"acgos\"", None).unwrap();
        assert_eq!((c.policy, c.mode), (PolicyKind::Uhgnn, Mode::Ilfos));
        assert!(ExperimentConfig::from_toml_str("preset = \"acgos\"\npolicy = \"fnn\"", None).is_err());
        assert!(ExperimentConfig::from_toml_str("preset = \"best\"", None).is_err());
        assert!(ExperimentConfig::from_toml_str("typo = 1", None).is_err());
        assert!(ExperimentConfig::from_toml_str("seeds = []", None).is_err());
        assert!(ExperimentConfig::from_toml_str("[hyper]\ndropout = 1.5", None).is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let mut c = ExperimentConfig::acgos();
        c.domains = Some(vec!["restaurant".into(), "hotel".into()]);
        c.hyper.weights.entropy = 0.02;
        let ont = c.load_ontology().unwrap();
        let m = c.manifest(&ont);
        assert_eq!(ExperimentConfig::from_toml_str(&m, None).unwrap(), c);
    }

    #[test]
    fn schedule_arithmetic() {
        let c = ExperimentConfig {
            train_dialogues: 2_000,
            eval_every: 500,
            ..ExperimentConfig::default()
        };
        assert_eq!(c.schedule(), vec![500, 1000, 1500, 2000]);
        assert!(ExperimentConfig { train_dialogues: 2_300, ..c }.validate().is_err());
    }
}
