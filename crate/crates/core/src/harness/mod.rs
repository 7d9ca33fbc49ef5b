//! Experiment orchestration: configs, multi-seed runs, evaluation, aggregation,
//! gradient checks and the interactive session.

pub mod aggregate;
pub mod chat;
pub mod config;
pub mod gradcheck;
pub mod run;

use std::fmt::Write;
use std::sync::Arc;

pub use aggregate::{aggregate, aggregate_rows, box_stats, write_aggregate, AggregateRow, BoxStats};
pub use chat::{run_chat, ChatAgent, ChatReply, ChatSession, Verdict, CHAT_USAGE};
pub use config::{load_ontology, ExperimentConfig, ACGOS};
pub use gradcheck::{gradcheck, GradcheckOptions, GradcheckReport};
pub use run::{evaluate, load_policy, read_metrics, train, EvalRequest, MetricsRow, Progress};

use crate::error::Result;
use crate::featurize::{FlatLayout, INDEPENDENT_DIM, SLOT_DIM};
use crate::ontology::Ontology;
use crate::policy::{Policy, PolicyKind};

/// Ontology summary, state sizes and the parameter table of a freshly built policy.
pub fn describe(kind: PolicyKind, ontology: &Arc<Ontology>) -> Result<String> {
    let mut out = String::new();
    let layout = FlatLayout::new(ontology);
    writeln!(out, "ontology {}", ontology.fingerprint()).unwrap();
    for d in ontology.domains() {
        writeln!(
            out,
            "  {:<12} {:>2} slots  {:>3} entities",
            d.name,
            d.slot_count(),
            d.database.len()
        )
        .unwrap();
    }
    writeln!(
        out,
        "state: flat {} dims; DIP independent node {}, slot node {}",
        layout.dim, INDEPENDENT_DIM, SLOT_DIM
    )
    .unwrap();
    out.push_str(&Policy::new(kind, ontology.clone(), 0)?.describe());
    Ok(out)
}
