//! Handcrafted system policy used as the demonstrator.

use crate::belief::{BeliefState, BeliefValue};
use crate::dialogue::act::DialogueAct;
use crate::error::Result;
use crate::featurize::{to_master, SlotAct, SummaryAction};
use crate::ontology::{Intent, Ontology, SlotKind};

/// Result counts at or above this keep the oracle asking for constraints.
pub const NARROW_THRESHOLD: usize = 5;

/// Summary actions the oracle takes in `domain`, in the order they are spoken.
pub fn oracle_summary(belief: &BeliefState, domain: usize, ontology: &Ontology) -> Vec<SummaryAction> {
    let schema = ontology.domain(domain);
    let b = &belief.domains[domain];
    if belief.terminated {
        return vec![SummaryAction::General(Intent::Bye)];
    }
    if b.match_count == 0 {
        return vec![SummaryAction::General(Intent::Nooffer)];
    }
    let mut out = Vec::new();
    if !b.offer_valid(schema) {
        let unfilled = schema
            .slots_of(SlotKind::Find)
            .find(|(i, _)| b.values[*i] == BeliefValue::None);
        if let (true, Some((slot, _))) = (b.match_count >= NARROW_THRESHOLD, unfilled) {
            return vec![SummaryAction::Slot {
                slot,
                act: SlotAct::Request,
            }];
        }
        out.push(SummaryAction::General(Intent::Offer));
    }
    for (slot, _) in schema.slots_of(SlotKind::Request) {
        if b.requested[slot] {
            out.push(SummaryAction::Slot {
                slot,
                act: SlotAct::Inform,
            });
        }
    }
    if b.wants_booking(schema) && !b.booking_current(schema) {
        let missing = schema
            .slots_of(SlotKind::Book)
            .find(|(i, _)| b.values[*i] == BeliefValue::None);
        out.push(match missing {
            Some((slot, _)) => SummaryAction::Slot {
                slot,
                act: SlotAct::Request,
            },
            None => SummaryAction::General(Intent::Book),
        });
    }
    if out.is_empty() {
        out.push(SummaryAction::General(Intent::Reqmore));
    }
    out
}

/// First oracle summary action: the single-action demonstrator used for imitation.
pub fn oracle_action(belief: &BeliefState, domain: usize, ontology: &Ontology) -> SummaryAction {
    oracle_summary(belief, domain, ontology)[0]
}

/// Expands `actions` into master acts, folding each into the belief before the next.
pub fn expand(
    actions: &[SummaryAction],
    belief: &BeliefState,
    domain: usize,
    ontology: &Ontology,
) -> Result<Vec<DialogueAct>> {
    let mut b = belief.clone();
    let mut acts = Vec::new();
    for &a in actions {
        let step = to_master(a, &b, domain, ontology)?;
        b = b.update_system(ontology, &step)?;
        acts.extend(step);
    }
    Ok(acts)
}

/// The full multi-act oracle turn.
pub fn oracle_acts(belief: &BeliefState, domain: usize, ontology: &Ontology) -> Result<Vec<DialogueAct>> {
    expand(&oracle_summary(belief, domain, ontology), belief, domain, ontology)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terminated_says_bye() {
        let ont = Ontology::bundled();
        let b = BeliefState::new(&ont)
            .update(&ont, &[DialogueAct::general(Intent::Bye)])
            .unwrap();
        assert_eq!(oracle_summary(&b, 0, &ont), vec![SummaryAction::General(Intent::Bye)]);
    }

    #[test]
    fn wide_result_asks_first_unfilled_find_slot() {
        let ont = Ontology::bundled();
        let r = ont.domain_index("restaurant").unwrap();
        let b = BeliefState::new(&ont);
        let food = ont.domain(r).slot_index("food").unwrap();
        assert_eq!(
            oracle_action(&b, r, &ont),
            SummaryAction::Slot {
                slot: food,
                act: SlotAct::Request
            }
        );
    }

    #[test]
    fn offer_then_answers_pending_requests() {
        let ont = Ontology::bundled();
        let p = ont.domain_index("police").unwrap();
        let b = BeliefState::new(&ont)
            .update(&ont, &[DialogueAct::request("police", "phone")])
            .unwrap();
        let acts = oracle_acts(&b, p, &ont).unwrap();
        assert_eq!(acts[0].intent, Intent::Offer);
        assert_eq!(acts[1].intent, Intent::Inform);
        let entity = ont.domain(p).entity_index(acts[0].value.as_deref().unwrap()).unwrap();
        assert_eq!(
            acts[1].value.as_deref(),
            ont.domain(p).database[entity].get("phone")
        );
    }
}
