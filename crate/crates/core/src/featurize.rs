//! State parametrisations and the summary-action abstraction.
//!
//! * flat state: one-hot constraint beliefs over every domain, multi-hot act
//!   histories, the terminated flag, per-domain offer flags and degree pointers;
//! * DIP state: one slot-independent vector for the active domain plus one
//!   fixed-width vector per slot node.
//!
//! Flat layout, in order:
//!
//! | block | width |
//! |---|---|
//! | constraint beliefs | `Σ_d Σ_{s constraint} (|V_s| + 2)` (`none`, `dontcare`, values) |
//! | last user acts | `Σ_d 2·|S_d| + 5` (inform/request per slot, general user intents) |
//! | last system acts | `Σ_d 2·|S_d| + 4·|D| + 2` (inform/request per slot, offer/book/nooffer/nobook per domain, reqmore/bye) |
//! | terminated | 1 |
//! | offer flag per domain | `|D|` |
//! | degree pointer per domain | `6·|D|` |

use crate::belief::{project, BeliefState, BeliefValue, DomainView};
use crate::dialogue::act::DialogueAct;
use crate::error::{Error, Result};
use crate::ontology::{
    Intent, Ontology, SlotKind, SLOT_INTENTS, SYSTEM_GENERAL_INTENTS, USER_GENERAL_INTENTS,
};

/// Width of the slot-independent (I-node) vector.
pub const INDEPENDENT_DIM: usize = USER_GENERAL_INTENTS.len() + SYSTEM_GENERAL_INTENTS.len() + 1 + 1 + 6;
/// Width of every slot (S-node) vector.
pub const SLOT_DIM: usize = 2 * SLOT_INTENTS.len() + 3;
/// Number of general summary actions (one per general system intent).
pub const GENERAL_ACTIONS: usize = SYSTEM_GENERAL_INTENTS.len();

const SCOPED_SYSTEM: [Intent; 4] = [Intent::Offer, Intent::Book, Intent::Nooffer, Intent::Nobook];
const GLOBAL_SYSTEM: [Intent; 2] = [Intent::Reqmore, Intent::Bye];

/// Offsets of every block of the flat vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatLayout {
    /// Per domain, per slot: offset of the constraint one-hot (constraint slots only).
    pub constraint_offsets: Vec<Vec<Option<usize>>>,
    /// Per domain: first global slot number (slots are numbered across domains).
    pub slot_base: Vec<usize>,
    pub user_acts: usize,
    pub system_acts: usize,
    pub terminated: usize,
    pub offered: usize,
    pub degree: usize,
    pub dim: usize,
}

impl FlatLayout {
    pub fn new(ontology: &Ontology) -> Self {
        let mut offset = 0;
        let mut constraint_offsets = Vec::new();
        let mut slot_base = Vec::new();
        let mut total_slots = 0;
        for d in ontology.domains() {
            slot_base.push(total_slots);
            total_slots += d.slot_count();
            let mut row = Vec::new();
            for s in &d.slots {
                if s.kind.is_constraint() {
                    row.push(Some(offset));
                    offset += s.values.len() + 2;
                } else {
                    row.push(None);
                }
            }
            constraint_offsets.push(row);
        }
        let n_domains = ontology.len();
        let user_acts = offset;
        offset += 2 * total_slots + USER_GENERAL_INTENTS.len();
        let system_acts = offset;
        offset += 2 * total_slots + SCOPED_SYSTEM.len() * n_domains + GLOBAL_SYSTEM.len();
        let terminated = offset;
        offset += 1;
        let offered = offset;
        offset += n_domains;
        let degree = offset;
        offset += 6 * n_domains;
        FlatLayout {
            constraint_offsets,
            slot_base,
            user_acts,
            system_acts,
            terminated,
            offered,
            degree,
            dim: offset,
        }
    }

    fn act_slot(&self, ontology: &Ontology, act: &DialogueAct) -> Option<(usize, usize)> {
        let d = ontology.domain_index(&act.domain)?;
        let s = ontology.domain(d).slot_index(act.slot.as_deref()?)?;
        Some((d, self.slot_base[d] + s))
    }

    fn total_slots(&self, ontology: &Ontology) -> usize {
        ontology.domains().iter().map(|d| d.slot_count()).sum()
    }
}

/// Indices of the non-zero coordinates of [`flat_state`] (the vector is binary).
pub fn flat_state_indices(belief: &BeliefState, ontology: &Ontology, layout: &FlatLayout) -> Vec<u32> {
    let mut on = Vec::new();
    for (d, db) in belief.domains.iter().enumerate() {
        for (s, off) in layout.constraint_offsets[d].iter().enumerate() {
            if let Some(off) = off {
                let k = match db.values[s] {
                    BeliefValue::None => 0,
                    BeliefValue::Dontcare => 1,
                    BeliefValue::Value(v) => 2 + v as usize,
                };
                on.push(off + k);
            }
        }
    }
    let total_slots = layout.total_slots(ontology);
    let mut acts = Vec::new();
    for act in &belief.last_user_acts {
        if let Some(i) = act.intent.slot_index() {
            if let Some((_, g)) = layout.act_slot(ontology, act) {
                acts.push(layout.user_acts + 2 * g + i);
            }
        } else if let Some(i) = act.intent.user_general_index() {
            acts.push(layout.user_acts + 2 * total_slots + i);
        }
    }
    for act in &belief.last_system_acts {
        if let Some(i) = act.intent.slot_index() {
            if let Some((_, g)) = layout.act_slot(ontology, act) {
                acts.push(layout.system_acts + 2 * g + i);
            }
        } else if let Some(i) = SCOPED_SYSTEM.iter().position(|&x| x == act.intent) {
            if let Some(d) = ontology.domain_index(&act.domain) {
                acts.push(layout.system_acts + 2 * total_slots + SCOPED_SYSTEM.len() * d + i);
            }
        } else if let Some(i) = GLOBAL_SYSTEM.iter().position(|&x| x == act.intent) {
            acts.push(
                layout.system_acts + 2 * total_slots + SCOPED_SYSTEM.len() * ontology.len() + i,
            );
        }
    }
    acts.sort_unstable();
    acts.dedup();
    on.extend(acts);
    if belief.terminated {
        on.push(layout.terminated);
    }
    for (d, db) in belief.domains.iter().enumerate() {
        if db.offer_valid(ontology.domain(d)) {
            on.push(layout.offered + d);
        }
    }
    for (d, db) in belief.domains.iter().enumerate() {
        on.push(layout.degree + 6 * d + db.match_count.min(5));
    }
    on.into_iter().map(|i| i as u32).collect()
}

/// The flat (native) state vector.
pub fn flat_state(belief: &BeliefState, ontology: &Ontology) -> Vec<f64> {
    let layout = FlatLayout::new(ontology);
    let mut v = vec![0.0; layout.dim];
    for i in flat_state_indices(belief, ontology, &layout) {
        v[i as usize] = 1.0;
    }
    v
}

/// Slot-independent vector plus one vector per slot node of the active domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DipState {
    pub domain: usize,
    pub independent: Vec<f64>,
    /// Row-major `slot_count × SLOT_DIM`.
    slots: Vec<f64>,
}

impl DipState {
    pub fn new(domain: usize, independent: Vec<f64>, slots: Vec<Vec<f64>>) -> Self {
        assert_eq!(independent.len(), INDEPENDENT_DIM);
        assert!(slots.iter().all(|s| s.len() == SLOT_DIM));
        DipState {
            domain,
            independent,
            slots: slots.concat(),
        }
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len() / SLOT_DIM
    }

    pub fn slot(&self, i: usize) -> &[f64] {
        &self.slots[i * SLOT_DIM..(i + 1) * SLOT_DIM]
    }

    pub fn slot_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.slots.chunks_exact(SLOT_DIM)
    }

    /// `(slot name, vector)` pairs in schema order.
    pub fn named_slots<'a>(&'a self, ontology: &'a Ontology) -> Vec<(&'a str, &'a [f64])> {
        ontology
            .domain(self.domain)
            .slots
            .iter()
            .map(|s| s.name.as_str())
            .zip(self.slot_rows())
            .collect()
    }

    /// Independent vector followed by slot vectors, zero-padded to `max_slots` nodes.
    pub fn padded(&self, max_slots: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(INDEPENDENT_DIM + max_slots * SLOT_DIM);
        v.extend_from_slice(&self.independent);
        v.extend_from_slice(&self.slots);
        v.resize(INDEPENDENT_DIM + max_slots * SLOT_DIM, 0.0);
        v
    }
}

pub fn dip_from_view(view: &DomainView, ontology: &Ontology) -> DipState {
    let schema = ontology.domain(view.domain);
    let mut independent = vec![0.0; INDEPENDENT_DIM];
    let n_user = USER_GENERAL_INTENTS.len();
    let n_sys = SYSTEM_GENERAL_INTENTS.len();
    for act in &view.user_acts {
        if let Some(i) = act.intent.user_general_index() {
            independent[i] = 1.0;
        }
    }
    for act in &view.system_acts {
        if act.intent.is_slot_intent() {
            continue;
        }
        if let Some(i) = act.intent.system_general_index() {
            independent[n_user + i] = 1.0;
        }
    }
    independent[n_user + n_sys] = if view.terminated { 1.0 } else { 0.0 };
    independent[n_user + n_sys + 1] = if view.belief.offer_valid(schema) { 1.0 } else { 0.0 };
    independent[n_user + n_sys + 2 + view.belief.match_count.min(5)] = 1.0;

    let mut slots = vec![0.0; schema.slot_count() * SLOT_DIM];
    let mark = |acts: &[DialogueAct], base: usize, slots: &mut [f64]| {
        for act in acts {
            let (Some(i), Some(slot)) = (act.intent.slot_index(), act.slot.as_deref()) else {
                continue;
            };
            if let Some(s) = schema.slot_index(slot) {
                slots[s * SLOT_DIM + base + i] = 1.0;
            }
        }
    };
    mark(&view.user_acts, 0, &mut slots);
    mark(&view.system_acts, 2, &mut slots);
    for (s, def) in schema.slots.iter().enumerate() {
        let row = &mut slots[s * SLOT_DIM..(s + 1) * SLOT_DIM];
        let known = match def.kind {
            SlotKind::Request => view.belief.requested[s],
            _ => view.belief.values[s].is_known(),
        };
        row[4] = f64::from(u8::from(known));
        row[5] = f64::from(u8::from(def.kind == SlotKind::Find));
        row[6] = f64::from(u8::from(def.kind == SlotKind::Request));
    }
    DipState {
        domain: view.domain,
        independent,
        slots,
    }
}

pub fn dip_state(belief: &BeliefState, domain: usize, ontology: &Ontology) -> DipState {
    dip_from_view(&project(belief, domain, ontology), ontology)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotAct {
    Request,
    Inform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SummaryAction {
    Slot { slot: usize, act: SlotAct },
    General(Intent),
}

impl SummaryAction {
    pub fn describe(&self, ontology: &Ontology, domain: usize) -> String {
        match self {
            SummaryAction::Slot { slot, act } => format!(
                "{}({})",
                match act {
                    SlotAct::Request => "request",
                    SlotAct::Inform => "inform",
                },
                ontology.domain(domain).slots[*slot].name
            ),
            SummaryAction::General(i) => i.to_string(),
        }
    }
}

/// Summary actions of one domain: `[request, inform]` per slot, then the general intents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSpace {
    pub domain: usize,
    pub actions: Vec<SummaryAction>,
    pub mask: Vec<bool>,
}

impl ActionSpace {
    pub fn for_domain(ontology: &Ontology, domain: usize) -> Self {
        let schema = ontology.domain(domain);
        let mut actions = Vec::new();
        let mut mask = Vec::new();
        for (slot, def) in schema.slots.iter().enumerate() {
            actions.push(SummaryAction::Slot {
                slot,
                act: SlotAct::Request,
            });
            mask.push(def.kind.is_constraint());
            actions.push(SummaryAction::Slot {
                slot,
                act: SlotAct::Inform,
            });
            mask.push(def.kind == SlotKind::Request);
        }
        for intent in SYSTEM_GENERAL_INTENTS {
            actions.push(SummaryAction::General(intent));
            mask.push(true);
        }
        ActionSpace {
            domain,
            actions,
            mask,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn index_of(&self, action: SummaryAction) -> Option<usize> {
        action_index(action, self.actions.len() - GENERAL_ACTIONS)
    }
}

/// Position of `action` in a layout with `slot_entries` slot-action entries before the general block.
pub fn action_index(action: SummaryAction, slot_entries: usize) -> Option<usize> {
    match action {
        SummaryAction::Slot { slot, act } => {
            let i = 2 * slot
                + match act {
                    SlotAct::Request => 0,
                    SlotAct::Inform => 1,
                };
            (i < slot_entries).then_some(i)
        }
        SummaryAction::General(intent) => intent.system_general_index().map(|g| slot_entries + g),
    }
}

/// Inverse of [`action_index`].
pub fn action_at(index: usize, slot_entries: usize) -> Option<SummaryAction> {
    if index < slot_entries {
        Some(SummaryAction::Slot {
            slot: index / 2,
            act: if index.is_multiple_of(2) {
                SlotAct::Request
            } else {
                SlotAct::Inform
            },
        })
    } else {
        SYSTEM_GENERAL_INTENTS
            .get(index - slot_entries)
            .map(|&i| SummaryAction::General(i))
    }
}

pub fn action_valid(ontology: &Ontology, domain: usize, action: SummaryAction) -> bool {
    match action {
        SummaryAction::Slot { slot, act } => ontology
            .domain(domain)
            .slots
            .get(slot)
            .is_some_and(|def| match act {
                SlotAct::Request => def.kind.is_constraint(),
                SlotAct::Inform => def.kind == SlotKind::Request,
            }),
        SummaryAction::General(intent) => intent.system_general_index().is_some(),
    }
}

fn booking_reference(domain: usize, entity: Option<usize>) -> String {
    match entity {
        Some(e) => format!("REF{domain:02}{e:04}"),
        None => format!("REF{domain:02}XXXX"),
    }
}

/// Restores values for a summary action (value abstraction, reverse direction).
///
/// `inform` draws from the offered entity, else the top query result; with no
/// matching entity it degrades to `nooffer`. `offer` names the first match in
/// database order.
pub fn to_master(
    action: SummaryAction,
    belief: &BeliefState,
    domain: usize,
    ontology: &Ontology,
) -> Result<Vec<DialogueAct>> {
    let schema = ontology.domain(domain);
    if !action_valid(ontology, domain, action) {
        let index = ActionSpace::for_domain(ontology, domain)
            .index_of(action)
            .unwrap_or(usize::MAX);
        return Err(Error::MaskedAction {
            domain: schema.name.clone(),
            index,
        });
    }
    let db = &belief.domains[domain];
    let first_match = || {
        let c = db.find_constraints(schema);
        (0..schema.database.len()).find(|&e| schema.entity_matches(e, &c))
    };
    let nooffer = || vec![DialogueAct::scoped(Intent::Nooffer, &schema.name, None)];
    Ok(match action {
        SummaryAction::Slot { slot, act } => {
            let name = &schema.slots[slot].name;
            match act {
                SlotAct::Request => vec![DialogueAct::request(&schema.name, name)],
                SlotAct::Inform => match db.offered.or_else(first_match) {
                    Some(e) => vec![DialogueAct::inform(
                        &schema.name,
                        name,
                        schema.database[e].get(name).unwrap_or_default(),
                    )],
                    None => nooffer(),
                },
            }
        }
        SummaryAction::General(Intent::Offer) => match first_match() {
            Some(e) => vec![DialogueAct::scoped(
                Intent::Offer,
                &schema.name,
                Some(schema.database[e].name.clone()),
            )],
            None => nooffer(),
        },
        SummaryAction::General(Intent::Book) => vec![DialogueAct::scoped(
            Intent::Book,
            &schema.name,
            Some(booking_reference(domain, db.offered)),
        )],
        SummaryAction::General(intent @ (Intent::Nooffer | Intent::Nobook)) => {
            vec![DialogueAct::scoped(intent, &schema.name, None)]
        }
        SummaryAction::General(intent) => vec![DialogueAct::general(intent)],
    })
}

/// Maps a system act back to its summary action (domain, action).
pub fn to_summary(act: &DialogueAct, ontology: &Ontology) -> Option<(usize, SummaryAction)> {
    if act.intent.is_slot_intent() {
        let d = ontology.domain_index(&act.domain)?;
        let slot = ontology.domain(d).slot_index(act.slot.as_deref()?)?;
        let kind = if act.intent == Intent::Request {
            SlotAct::Request
        } else {
            SlotAct::Inform
        };
        return Some((d, SummaryAction::Slot { slot, act: kind }));
    }
    act.intent.system_general_index()?;
    let d = if act.is_general() {
        usize::MAX
    } else {
        ontology.domain_index(&act.domain)?
    };
    Some((d, SummaryAction::General(act.intent)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::DONTCARE;

    #[test]
    fn fresh_flat_state() {
        let ont = Ontology::bundled();
        let b = BeliefState::new(&ont);
        let layout = FlatLayout::new(&ont);
        let v = flat_state(&b, &ont);
        assert_eq!(v.len(), layout.dim);
        for (d, row) in layout.constraint_offsets.iter().enumerate() {
            for off in row.iter().flatten() {
                assert_eq!(v[*off], 1.0, "domain {d} none");
                assert_eq!(v[off + 1], 0.0);
            }
        }
        assert_eq!(v[layout.terminated], 0.0);
        for d in 0..ont.len() {
            let n = ont.domain(d).database.len();
            assert_eq!(v[layout.degree + 6 * d + n.min(5)], 1.0);
        }
    }

    #[test]
    fn flat_dimension_matches_closed_form() {
        let ont = Ontology::bundled();
        let constraint: usize = ont
            .domains()
            .iter()
            .flat_map(|d| d.slots.iter())
            .filter(|s| s.kind.is_constraint())
            .map(|s| s.values.len() + 2)
            .sum();
        let slots: usize = ont.domains().iter().map(|d| d.slot_count()).sum();
        let user = 2 * slots + 5;
        let system = 2 * slots + 4 * 7 + 2;
        assert_eq!(FlatLayout::new(&ont).dim, constraint + user + system + 1 + 7 + 42);
    }

    #[test]
    fn dip_dimensions() {
        assert_eq!(INDEPENDENT_DIM, 19);
        assert_eq!(SLOT_DIM, 7);
        let ont = Ontology::bundled();
        let b = BeliefState::new(&ont);
        for d in 0..ont.len() {
            let dip = dip_state(&b, d, &ont);
            assert_eq!(dip.independent.len(), 19);
            assert_eq!(dip.slot_count(), ont.domain(d).slot_count());
            assert!(dip.slot_rows().all(|r| r.len() == 7));
        }
    }

    #[test]
    fn dontcare_counts_as_known_value() {
        let ont = Ontology::bundled();
        let r = ont.domain_index("restaurant").unwrap();
        let b = BeliefState::new(&ont)
            .update(&ont, &[DialogueAct::inform("restaurant", "area", DONTCARE)])
            .unwrap();
        let dip = dip_state(&b, r, &ont);
        let area = ont.domain(r).slot_index("area").unwrap();
        assert_eq!(dip.slot(area)[4], 1.0);
        assert_eq!(dip.slot(area)[0], 1.0, "user inform marker");
    }

    #[test]
    fn inform_uses_offered_entity() {
        let ont = Ontology::bundled();
        let r = ont.domain_index("restaurant").unwrap();
        let schema = ont.domain(r);
        let e = &schema.database[7];
        let b = BeliefState::new(&ont)
            .update_system(
                &ont,
                &[DialogueAct::scoped(Intent::Offer, "restaurant", Some(e.name.clone()))],
            )
            .unwrap();
        let phone = schema.slot_index("phone").unwrap();
        let acts = to_master(
            SummaryAction::Slot {
                slot: phone,
                act: SlotAct::Inform,
            },
            &b,
            r,
            &ont,
        )
        .unwrap();
        assert_eq!(acts, vec![DialogueAct::inform("restaurant", "phone", e.get("phone").unwrap())]);
    }

    #[test]
    fn offer_names_first_match_in_database_order() {
        let ont = Ontology::bundled();
        let r = ont.domain_index("restaurant").unwrap();
        let schema = ont.domain(r);
        // Find a constraint value with at least three matches.
        let (value, matches) = schema.slots[0]
            .values
            .iter()
            .map(|v| {
                let hits: Vec<usize> = (0..schema.database.len())
                    .filter(|&e| schema.database[e].get("food") == Some(v))
                    .collect();
                (v.clone(), hits)
            })
            .find(|(_, hits)| hits.len() >= 3)
            .unwrap();
        let b = BeliefState::new(&ont)
            .update(&ont, &[DialogueAct::inform("restaurant", "food", &value)])
            .unwrap();
        let acts = to_master(SummaryAction::General(Intent::Offer), &b, r, &ont).unwrap();
        assert_eq!(acts[0].value.as_deref(), Some(schema.database[matches[0]].name.as_str()));
    }

    #[test]
    fn masked_action_is_rejected() {
        let ont = Ontology::bundled();
        let r = ont.domain_index("restaurant").unwrap();
        let b = BeliefState::new(&ont);
        let food = ont.domain(r).slot_index("food").unwrap();
        let err = to_master(
            SummaryAction::Slot {
                slot: food,
                act: SlotAct::Inform,
            },
            &b,
            r,
            &ont,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MaskedAction { .. }));
    }

    #[test]
    fn action_space_counts() {
        let ont = Ontology::bundled();
        for d in 0..ont.len() {
            let space = ActionSpace::for_domain(&ont, d);
            let schema = ont.domain(d);
            let constraint = schema.count_of(SlotKind::Find) + schema.count_of(SlotKind::Book);
            let req = schema.count_of(SlotKind::Request);
            assert_eq!(space.valid_count(), constraint + req + GENERAL_ACTIONS);
            for (i, a) in space.actions.iter().enumerate() {
                assert_eq!(space.index_of(*a), Some(i));
                assert_eq!(action_at(i, 2 * schema.slot_count()), Some(*a));
            }
        }
    }
}
