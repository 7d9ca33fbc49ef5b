//! Deterministic dialogue-state tracking and domain selection.
//!
//! Every component is exact: constraint beliefs hold a value index, `dontcare`
//! or `none`; request beliefs, termination and booking are plain flags; the
//! degree pointer is recomputed from the database after each update.

use serde::Serialize;

use crate::dialogue::act::DialogueAct;
use crate::error::{Error, Result};
use crate::ontology::{degree_pointer, Constraint, DomainSchema, Intent, Ontology, SlotKind, DONTCARE, NONE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum BeliefValue {
    None,
    Dontcare,
    Value(u16),
}

impl BeliefValue {
    pub fn is_known(self) -> bool {
        self != BeliefValue::None
    }

    fn render(self, schema: &DomainSchema, slot: usize) -> String {
        match self {
            BeliefValue::None => NONE.to_string(),
            BeliefValue::Dontcare => DONTCARE.to_string(),
            BeliefValue::Value(v) => schema.slots[slot].values[v as usize].clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Booking {
    pub entity: Option<usize>,
    /// Snapshot of the per-slot constraint values when the booking was made.
    pub values: Vec<BeliefValue>,
    pub reference: String,
}

/// Belief for one domain. Per-slot vectors follow schema slot order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainBelief {
    /// Constraint beliefs (meaningful for find and book slots).
    pub values: Vec<BeliefValue>,
    /// Requestable slots asked by the user and not yet informed.
    pub requested: Vec<bool>,
    /// Requestable slots the system has informed so far.
    pub informed: Vec<bool>,
    /// Last entity offered by the system.
    pub offered: Option<usize>,
    pub booking: Option<Booking>,
    pub match_count: usize,
}

impl DomainBelief {
    fn new(schema: &DomainSchema) -> Self {
        let n = schema.slot_count();
        let mut b = DomainBelief {
            values: vec![BeliefValue::None; n],
            requested: vec![false; n],
            informed: vec![false; n],
            offered: None,
            booking: None,
            match_count: 0,
        };
        b.recount(schema);
        b
    }

    /// Non-`none` find constraints.
    pub fn find_constraints(&self, schema: &DomainSchema) -> Vec<(usize, Constraint)> {
        schema
            .slots_of(SlotKind::Find)
            .filter_map(|(i, _)| match self.values[i] {
                BeliefValue::None => None,
                BeliefValue::Dontcare => Some((i, Constraint::Dontcare)),
                BeliefValue::Value(v) => Some((i, Constraint::Value(v))),
            })
            .collect()
    }

    fn recount(&mut self, schema: &DomainSchema) {
        self.match_count = schema.count_matching(&self.find_constraints(schema));
    }

    pub fn degree(&self) -> [f64; 6] {
        degree_pointer(self.match_count)
    }

    /// An entity has been offered and still satisfies the current find constraints.
    pub fn offer_valid(&self, schema: &DomainSchema) -> bool {
        self.offered
            .is_some_and(|e| schema.entity_matches(e, &self.find_constraints(schema)))
    }

    /// The user has given at least one concrete booking detail.
    pub fn wants_booking(&self, schema: &DomainSchema) -> bool {
        schema
            .slots_of(SlotKind::Book)
            .any(|(i, _)| matches!(self.values[i], BeliefValue::Value(_)))
    }

    /// A booking exists for the offered entity with the current booking details.
    pub fn booking_current(&self, schema: &DomainSchema) -> bool {
        self.booking.as_ref().is_some_and(|b| {
            b.entity.is_some()
                && b.entity == self.offered
                && schema
                    .slots_of(SlotKind::Book)
                    .all(|(i, _)| b.values[i] == self.values[i])
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeliefState {
    pub domains: Vec<DomainBelief>,
    pub terminated: bool,
    pub last_user_acts: Vec<DialogueAct>,
    pub last_system_acts: Vec<DialogueAct>,
    pub active_domain: Option<usize>,
}

fn resolve<'a>(ontology: &'a Ontology, act: &DialogueAct) -> Result<(usize, &'a DomainSchema)> {
    let d = ontology
        .domain_index(&act.domain)
        .ok_or_else(|| Error::UnknownDomain(act.domain.clone()))?;
    Ok((d, ontology.domain(d)))
}

fn resolve_slot(schema: &DomainSchema, act: &DialogueAct) -> Result<usize> {
    let slot = act
        .slot
        .as_deref()
        .ok_or_else(|| Error::InvalidAct(format!("`{act}` needs a slot")))?;
    schema.slot_index(slot).ok_or_else(|| Error::UnknownSlot {
        domain: schema.name.clone(),
        slot: slot.to_string(),
    })
}

impl BeliefState {
    pub fn new(ontology: &Ontology) -> Self {
        BeliefState {
            domains: ontology.domains().iter().map(DomainBelief::new).collect(),
            terminated: false,
            last_user_acts: Vec::new(),
            last_system_acts: Vec::new(),
            active_domain: None,
        }
    }

    /// Applies a user turn. Pure: returns the successor belief.
    pub fn update(&self, ontology: &Ontology, user_acts: &[DialogueAct]) -> Result<BeliefState> {
        let mut next = self.clone();
        let mut touched = Vec::new();
        for act in user_acts {
            match act.intent {
                Intent::Inform => {
                    let (d, schema) = resolve(ontology, act)?;
                    let s = resolve_slot(schema, act)?;
                    let def = &schema.slots[s];
                    if !def.kind.is_constraint() {
                        return Err(Error::InvalidAct(format!(
                            "user inform on requestable slot in `{act}`"
                        )));
                    }
                    let value = act.value.as_deref().unwrap_or(NONE);
                    next.domains[d].values[s] = match value {
                        DONTCARE => BeliefValue::Dontcare,
                        NONE => BeliefValue::None,
                        v => BeliefValue::Value(def.value_index(v).ok_or_else(|| {
                            Error::InvalidAct(format!("value `{v}` not in slot `{}.{}`", schema.name, def.name))
                        })? as u16),
                    };
                    touched.push(d);
                }
                Intent::Request => {
                    let (d, schema) = resolve(ontology, act)?;
                    let s = resolve_slot(schema, act)?;
                    if schema.slots[s].kind != SlotKind::Request {
                        return Err(Error::InvalidAct(format!(
                            "user request on constraint slot in `{act}`"
                        )));
                    }
                    next.domains[d].requested[s] = true;
                }
                Intent::Bye => next.terminated = true,
                intent if intent.is_general() => {}
                _ => {
                    return Err(Error::InvalidAct(format!("`{act}` is not a user act")));
                }
            }
        }
        for d in touched {
            next.domains[d].recount(ontology.domain(d));
        }
        next.last_user_acts = user_acts.to_vec();
        Ok(next)
    }

    /// Records a system turn: offers, bookings and answered requests.
    pub fn update_system(&self, ontology: &Ontology, system_acts: &[DialogueAct]) -> Result<BeliefState> {
        let mut next = self.clone();
        for act in system_acts {
            match act.intent {
                Intent::Inform => {
                    let (d, schema) = resolve(ontology, act)?;
                    let s = resolve_slot(schema, act)?;
                    if schema.slots[s].kind == SlotKind::Request {
                        next.domains[d].informed[s] = true;
                        next.domains[d].requested[s] = false;
                    }
                }
                Intent::Offer => {
                    let (d, schema) = resolve(ontology, act)?;
                    next.domains[d].offered =
                        act.value.as_deref().and_then(|name| schema.entity_index(name));
                }
                Intent::Book => {
                    let (d, _) = resolve(ontology, act)?;
                    let b = &mut next.domains[d];
                    b.booking = Some(Booking {
                        entity: b.offered,
                        values: b.values.clone(),
                        reference: act.value.clone().unwrap_or_default(),
                    });
                }
                Intent::Request | Intent::Nooffer | Intent::Nobook => {
                    resolve(ontology, act)?;
                }
                _ => {}
            }
        }
        next.last_system_acts = system_acts.to_vec();
        Ok(next)
    }

    pub fn with_active(mut self, domain: usize) -> Self {
        self.active_domain = Some(domain);
        self
    }

    /// Stable one-line summary for trajectory logs.
    pub fn digest(&self, ontology: &Ontology) -> BeliefDigest {
        let domains = self
            .domains
            .iter()
            .enumerate()
            .filter(|(_, b)| {
                b.values.iter().any(|v| v.is_known())
                    || b.requested.iter().any(|&r| r)
                    || b.offered.is_some()
            })
            .map(|(d, b)| {
                let schema = ontology.domain(d);
                DomainDigest {
                    domain: schema.name.clone(),
                    constraints: schema
                        .slots
                        .iter()
                        .enumerate()
                        .filter(|(i, s)| s.kind.is_constraint() && b.values[*i].is_known())
                        .map(|(i, s)| (s.name.clone(), b.values[i].render(schema, i)))
                        .collect(),
                    requested: schema
                        .slots
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| b.requested[*i])
                        .map(|(_, s)| s.name.clone())
                        .collect(),
                    offered: b.offered.map(|e| schema.database[e].name.clone()),
                    booked: b.booking.as_ref().map(|bk| bk.reference.clone()),
                    matches: b.match_count,
                }
            })
            .collect();
        BeliefDigest {
            active: self.active_domain.map(|d| ontology.domain(d).name.clone()),
            terminated: self.terminated,
            domains,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BeliefDigest {
    pub active: Option<String>,
    pub terminated: bool,
    pub domains: Vec<DomainDigest>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DomainDigest {
    pub domain: String,
    pub constraints: Vec<(String, String)>,
    pub requested: Vec<String>,
    pub offered: Option<String>,
    pub booked: Option<String>,
    pub matches: usize,
}

/// Picks the domain of the last domain-bearing user act, else keeps the previous one.
///
/// With neither available, falls back to the first ontology domain.
pub fn select_domain(belief: &BeliefState, user_acts: &[DialogueAct], ontology: &Ontology) -> usize {
    user_acts
        .iter()
        .rev()
        .find_map(|a| (!a.is_general()).then(|| ontology.domain_index(&a.domain)).flatten())
        .or(belief.active_domain)
        .unwrap_or(0)
}

/// The belief restricted to one domain plus the global fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainView {
    pub domain: usize,
    pub belief: DomainBelief,
    pub terminated: bool,
    /// Last user acts on this domain or `general`.
    pub user_acts: Vec<DialogueAct>,
    /// Last system acts on this domain or `general`.
    pub system_acts: Vec<DialogueAct>,
}

impl DomainView {
    pub fn slot_count(&self) -> usize {
        self.belief.values.len()
    }

    /// Restricting a view to its own domain is the identity.
    pub fn project(&self, domain: usize) -> Option<DomainView> {
        (domain == self.domain).then(|| self.clone())
    }
}

pub fn project(belief: &BeliefState, domain: usize, ontology: &Ontology) -> DomainView {
    let name = &ontology.domain(domain).name;
    let keep = |acts: &[DialogueAct]| {
        acts.iter()
            .filter(|a| a.is_general() || &a.domain == name)
            .cloned()
            .collect()
    };
    DomainView {
        domain,
        belief: belief.domains[domain].clone(),
        terminated: belief.terminated,
        user_acts: keep(&belief.last_user_acts),
        system_acts: keep(&belief.last_system_acts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ont() -> Ontology {
        Ontology::bundled()
    }

    #[test]
    fn inform_sets_constraint_and_recounts() {
        let ont = ont();
        let b0 = BeliefState::new(&ont);
        let r = ont.domain_index("restaurant").unwrap();
        assert_eq!(b0.domains[r].match_count, ont.domain(r).database.len());
        let b1 = b0
            .update(&ont, &[DialogueAct::inform("restaurant", "food", "italian")])
            .unwrap();
        let brute = ont
            .domain(r)
            .database
            .iter()
            .filter(|e| e.get("food") == Some("italian"))
            .count();
        assert_eq!(b1.domains[r].match_count, brute);
        assert_eq!(b1.domains[r].degree(), degree_pointer(brute));
        assert_eq!(b1.domains[r].values[0], BeliefValue::Value(0));
    }

    #[test]
    fn bye_only_sets_terminated() {
        let ont = ont();
        let b0 = BeliefState::new(&ont);
        let bye = [DialogueAct::general(Intent::Bye)];
        let b1 = b0.update(&ont, &bye).unwrap();
        assert!(b1.terminated);
        assert_eq!(b1.domains, b0.domains);
        assert_eq!(b1.last_user_acts, bye.to_vec());
    }

    #[test]
    fn last_inform_wins() {
        let ont = ont();
        let b = BeliefState::new(&ont)
            .update(
                &ont,
                &[
                    DialogueAct::inform("restaurant", "area", "north"),
                    DialogueAct::inform("restaurant", "area", "south"),
                ],
            )
            .unwrap();
        assert_eq!(b.domains[0].values[2], BeliefValue::Value(1));
    }

    #[test]
    fn unknown_slot_is_an_error() {
        let ont = ont();
        let err = BeliefState::new(&ont)
            .update(&ont, &[DialogueAct::inform("restaurant", "colour", "red")])
            .unwrap_err();
        assert!(matches!(err, Error::UnknownSlot { .. }));
        let err = BeliefState::new(&ont)
            .update(&ont, &[DialogueAct::inform("spaceport", "x", "y")])
            .unwrap_err();
        assert!(matches!(err, Error::UnknownDomain(_)));
    }

    #[test]
    fn select_domain_rules() {
        let ont = ont();
        let b = BeliefState::new(&ont);
        let hotel = ont.domain_index("hotel").unwrap();
        let train = ont.domain_index("train").unwrap();
        let restaurant = ont.domain_index("restaurant").unwrap();
        assert_eq!(
            select_domain(&b, &[DialogueAct::inform("hotel", "area", "north")], &ont),
            hotel
        );
        let sticky = b.clone().with_active(train);
        assert_eq!(
            select_domain(&sticky, &[DialogueAct::general(Intent::Thank)], &ont),
            train
        );
        let mixed = [
            DialogueAct::inform("hotel", "area", "north"),
            DialogueAct::request("restaurant", "phone"),
        ];
        assert_eq!(select_domain(&b, &mixed, &ont), restaurant);
    }

    #[test]
    fn projection_is_a_view() {
        let ont = ont();
        let r = ont.domain_index("restaurant").unwrap();
        let b = BeliefState::new(&ont)
            .update(
                &ont,
                &[
                    DialogueAct::inform("restaurant", "food", "thai"),
                    DialogueAct::inform("hotel", "area", "east"),
                ],
            )
            .unwrap();
        let v = project(&b, r, &ont);
        let schema = ont.domain(r);
        assert_eq!(
            v.slot_count(),
            schema.count_of(SlotKind::Find) + schema.count_of(SlotKind::Book) + schema.count_of(SlotKind::Request)
        );
        assert_eq!(v.belief, b.domains[r]);
        assert_eq!(v.user_acts, vec![DialogueAct::inform("restaurant", "food", "thai")]);
        assert_eq!(v.project(r), Some(v.clone()));
    }

    #[test]
    fn projection_ignores_other_domains() {
        let ont = ont();
        let r = ont.domain_index("restaurant").unwrap();
        let base = BeliefState::new(&ont);
        let mut planted = base.clone();
        for (d, b) in planted.domains.iter_mut().enumerate() {
            if d != r {
                b.offered = Some(0);
                b.requested.iter_mut().for_each(|x| *x = true);
                b.match_count = 999;
            }
        }
        assert_eq!(project(&base, r, &ont), project(&planted, r, &ont));
    }

    #[test]
    fn system_acts_update_offer_booking_and_requests() {
        let ont = ont();
        let r = ont.domain_index("restaurant").unwrap();
        let b = BeliefState::new(&ont)
            .update(&ont, &[DialogueAct::request("restaurant", "phone")])
            .unwrap();
        let phone = ont.domain(r).slot_index("phone").unwrap();
        assert!(b.domains[r].requested[phone]);
        let name = ont.domain(r).database[3].name.clone();
        let b = b
            .update_system(
                &ont,
                &[
                    DialogueAct::scoped(Intent::Offer, "restaurant", Some(name)),
                    DialogueAct::inform("restaurant", "phone", "x"),
                    DialogueAct::scoped(Intent::Book, "restaurant", Some("ref".into())),
                ],
            )
            .unwrap();
        assert_eq!(b.domains[r].offered, Some(3));
        assert!(!b.domains[r].requested[phone]);
        assert!(b.domains[r].informed[phone]);
        assert_eq!(b.domains[r].booking.as_ref().unwrap().entity, Some(3));
    }

    mod props {
        use super::*;
        use crate::dialogue::goal::sample_goal_seeded;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn degree_tracks_database_after_updates(seed in 0u64..2_000) {
                let ont = Ontology::bundled();
                let goal = sample_goal_seeded(&ont, seed, 3);
                let mut b = BeliefState::new(&ont);
                for g in &goal.domains {
                    for (s, v) in &g.find {
                        b = b.update(&ont, &[DialogueAct::inform(&g.domain, s, v)]).unwrap();
                    }
                }
                for (d, db) in b.domains.iter().enumerate() {
                    let schema = ont.domain(d);
                    let brute = (0..schema.database.len())
                        .filter(|&e| schema.entity_matches(e, &db.find_constraints(schema)))
                        .count();
                    prop_assert_eq!(db.match_count, brute);
                    prop_assert_eq!(db.degree().iter().sum::<f64>(), 1.0);
                }
            }
        }
    }
}
