use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ontology::{query, Constraint, Ontology, SlotKind, DONTCARE};

/// Largest number of request slots drawn per domain.
pub const MAX_REQUESTS: usize = 3;

/// The user's objective in one domain. Pairs are kept in schema slot order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainGoal {
    pub domain: String,
    pub find: Vec<(String, String)>,
    pub requests: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub book: Option<Vec<(String, String)>>,
}

impl DomainGoal {
    pub fn find_value(&self, slot: &str) -> Option<&str> {
        self.find
            .iter()
            .find(|(s, _)| s == slot)
            .map(|(_, v)| v.as_str())
    }

    pub fn book_value(&self, slot: &str) -> Option<&str> {
        self.book
            .as_ref()?
            .iter()
            .find(|(s, _)| s == slot)
            .map(|(_, v)| v.as_str())
    }

    pub fn find_map(&self) -> BTreeMap<String, String> {
        self.find.iter().cloned().collect()
    }

    /// Find constraints as coded `(slot index, constraint)` pairs.
    pub fn coded_find(&self, ontology: &Ontology) -> Vec<(usize, Constraint)> {
        let Some(domain) = ontology.domain_index(&self.domain) else {
            return Vec::new();
        };
        let schema = ontology.domain(domain);
        self.find
            .iter()
            .filter_map(|(slot, value)| {
                let index = schema.slot_index(slot)?;
                if value == DONTCARE {
                    return Some((index, Constraint::Dontcare));
                }
                schema.slots[index]
                    .value_index(value)
                    .map(|v| (index, Constraint::Value(v as u16)))
            })
            .collect()
    }
}

/// Ordered per-domain objectives for one dialogue.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    pub domains: Vec<DomainGoal>,
}

impl UserGoal {
    pub fn domain(&self, name: &str) -> Option<&DomainGoal> {
        self.domains.iter().find(|g| g.domain == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|g| g.domain == name)
    }

    pub fn book_tasks(&self) -> usize {
        self.domains.iter().filter(|g| g.book.is_some()).count()
    }

    /// Every goal domain has a non-empty result for its find constraints.
    pub fn is_satisfiable(&self, ontology: &Ontology) -> bool {
        self.domains.iter().all(|g| {
            ontology
                .domain_by_name(&g.domain)
                .ok()
                .and_then(|db| query(db, &g.find_map()).ok())
                .is_some_and(|hits| !hits.is_empty())
        })
    }
}

/// Samples a satisfiable goal over `1..=max_domains` distinct domains.
///
/// Find values are copied from one database entity, so the conjunction always
/// matches at least that entity.
pub fn sample_goal<R: Rng + ?Sized>(ontology: &Ontology, rng: &mut R, max_domains: usize) -> UserGoal {
    let max_domains = max_domains.clamp(1, ontology.len());
    let count = rng.gen_range(1..=max_domains);
    let mut order: Vec<usize> = (0..ontology.len()).collect();
    order.shuffle(rng);
    order.truncate(count);
    let domains = order
        .into_iter()
        .map(|d| {
            let schema = ontology.domain(d);
            let entity = &schema.database[rng.gen_range(0..schema.database.len())];

            let find_slots: Vec<usize> = schema.slots_of(SlotKind::Find).map(|(i, _)| i).collect();
            let mut chosen = Vec::new();
            if !find_slots.is_empty() {
                let n = rng.gen_range(1..=find_slots.len());
                chosen = find_slots.choose_multiple(rng, n).copied().collect();
                chosen.sort_unstable();
            }
            let find = chosen
                .into_iter()
                .map(|i| {
                    let slot = &schema.slots[i].name;
                    (slot.clone(), entity.get(slot).expect("validated entity").to_string())
                })
                .collect();

            let request_slots: Vec<usize> =
                schema.slots_of(SlotKind::Request).map(|(i, _)| i).collect();
            let mut requests = Vec::new();
            if !request_slots.is_empty() {
                let n = rng.gen_range(1..=request_slots.len().min(MAX_REQUESTS));
                let mut picked: Vec<usize> =
                    request_slots.choose_multiple(rng, n).copied().collect();
                picked.sort_unstable();
                requests = picked
                    .into_iter()
                    .map(|i| schema.slots[i].name.clone())
                    .collect();
            }

            let book = if schema.has_book_task() && rng.gen_bool(0.5) {
                Some(
                    schema
                        .slots_of(SlotKind::Book)
                        .map(|(_, s)| (s.name.clone(), s.values.choose(rng).unwrap().clone()))
                        .collect(),
                )
            } else {
                None
            };
            DomainGoal {
                domain: schema.name.clone(),
                find,
                requests,
                book,
            }
        })
        .collect();
    UserGoal { domains }
}

/// [`sample_goal`] from a fresh seeded stream.
pub fn sample_goal_seeded(ontology: &Ontology, seed: u64, max_domains: usize) -> UserGoal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_goal(ontology, &mut rng, max_domains)
}
