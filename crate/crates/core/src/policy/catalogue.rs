//! Composite actions for the flat reference policy.
//!
//! The catalogue holds every valid single summary action of every domain plus
//! the multi-action turns the oracle produced in self-play (at most three
//! actions each).

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::dialogue::goal::sample_goal_seeded;
use crate::dialogue::oracle::oracle_summary;
use crate::dialogue::user::{AgendaUser, DEFAULT_PATIENCE};
use crate::episode::{run_episode, EpisodeOptions, OracleAgent};
use crate::error::{Error, Result};
use crate::featurize::{action_at, ActionSpace, SummaryAction};
use crate::ontology::Ontology;

pub const MAX_COMPOSITE: usize = 3;
pub const SELF_PLAY_DIALOGUES: u64 = 1000;
const BUNDLED_JSON: &str = include_str!("../../data/fnnref_catalogue.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeAction {
    pub domain: usize,
    /// Indices in the domain's native action space.
    pub actions: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalogue {
    pub fingerprint: String,
    pub entries: Vec<CompositeAction>,
}

fn native(ontology: &Ontology, domain: usize, actions: &[SummaryAction]) -> Vec<usize> {
    let space = ActionSpace::for_domain(ontology, domain);
    actions
        .iter()
        .filter_map(|a| space.index_of(*a))
        .take(MAX_COMPOSITE)
        .collect()
}

impl Catalogue {
    /// Builds the catalogue from oracle self-play on `ontology`.
    pub fn generate(ontology: &Arc<Ontology>) -> Result<Catalogue> {
        let mut seen: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
        for d in 0..ontology.len() {
            let space = ActionSpace::for_domain(ontology, d);
            for (i, ok) in space.mask.iter().enumerate() {
                if *ok {
                    seen.insert((d, vec![i]));
                }
            }
        }
        for seed in 0..SELF_PLAY_DIALOGUES {
            let goal = sample_goal_seeded(ontology, seed, 3);
            let mut user = AgendaUser::new(ontology.clone(), goal, DEFAULT_PATIENCE);
            let result = run_episode(ontology, &mut user, &mut OracleAgent::default(), EpisodeOptions::default())?;
            for turn in &result.turns {
                let summary = oracle_summary(&turn.belief, turn.domain, ontology);
                seen.insert((turn.domain, native(ontology, turn.domain, &summary)));
            }
        }
        Ok(Catalogue {
            fingerprint: ontology.fingerprint(),
            entries: seen
                .into_iter()
                .map(|(domain, actions)| CompositeAction { domain, actions })
                .collect(),
        })
    }

    /// The committed catalogue when it belongs to `ontology`, else a fresh one.
    pub fn for_ontology(ontology: &Arc<Ontology>) -> Result<Catalogue> {
        let bundled: Catalogue = serde_json::from_str(BUNDLED_JSON).map_err(|e| Error::Parse {
            context: "bundled catalogue".into(),
            message: e.to_string(),
        })?;
        if bundled.fingerprint == ontology.fingerprint() {
            Ok(bundled)
        } else {
            Catalogue::generate(ontology)
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mask(&self, domain: usize) -> Vec<bool> {
        self.entries.iter().map(|e| e.domain == domain).collect()
    }

    pub fn position(&self, domain: usize, actions: &[usize]) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.domain == domain && e.actions == actions)
    }

    pub fn summary(&self, ontology: &Ontology, index: usize) -> Vec<SummaryAction> {
        let e = &self.entries[index];
        let slots = 2 * ontology.domain(e.domain).slot_count();
        e.actions.iter().filter_map(|&i| action_at(i, slots)).collect()
    }

    /// Oracle label: its exact turn when catalogued, else its first action alone.
    pub fn oracle_label(&self, belief: &BeliefState, domain: usize, ontology: &Ontology) -> Option<usize> {
        let summary = oracle_summary(belief, domain, ontology);
        let full = native(ontology, domain, &summary);
        self.position(domain, &full)
            .or_else(|| self.position(domain, &full[..1.min(full.len())]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn committed_catalogue_matches_generator() {
        let ont = Arc::new(Ontology::bundled());
        let bundled: Catalogue = serde_json::from_str(BUNDLED_JSON).unwrap();
        assert_eq!(bundled, Catalogue::generate(&ont).unwrap());
    }

    #[test]
    fn every_domain_has_all_singletons() {
        let ont = Arc::new(Ontology::bundled());
        let cat = Catalogue::for_ontology(&ont).unwrap();
        for d in 0..ont.len() {
            let space = ActionSpace::for_domain(&ont, d);
            for (i, ok) in space.mask.iter().enumerate() {
                assert_eq!(cat.position(d, &[i]).is_some(), *ok);
            }
        }
        assert!(cat.entries.iter().all(|e| (1..=MAX_COMPOSITE).contains(&e.actions.len())));
        assert!(cat.entries.iter().any(|e| e.actions.len() > 1));
    }
}
