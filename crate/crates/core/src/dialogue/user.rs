//! Agenda-based simulated user.
//!
//! The agenda is a stack of pending acts derived from the goal. Each turn the
//! user first reacts to the system acts (which may push, reorder or drop
//! agenda items), then pops up to [`ACTS_PER_TURN`] acts as its reply.

use std::sync::Arc;

use crate::ontology::{Intent, Ontology, SlotKind, DONTCARE};

use super::act::DialogueAct;
use super::goal::UserGoal;

/// Default remaining-turn budget.
pub const DEFAULT_PATIENCE: usize = 40;
/// Maximum number of acts in one user turn.
pub const ACTS_PER_TURN: usize = 2;

/// User-side bookkeeping for one goal domain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DomainStatus {
    pub offer_received: bool,
    pub offered: Option<String>,
    /// Parallel to the goal's request list.
    pub answered: Vec<bool>,
    pub booked: bool,
    pub abandoned: bool,
    requests_pushed: bool,
    /// Find slots in the order they were informed.
    spoken: Vec<String>,
}

impl DomainStatus {
    pub fn all_answered(&self) -> bool {
        self.answered.iter().all(|&a| a)
    }
}

#[derive(Clone, Debug)]
pub struct AgendaUser {
    ontology: Arc<Ontology>,
    goal: UserGoal,
    agenda: Vec<DialogueAct>,
    status: Vec<DomainStatus>,
    current: usize,
    patience: usize,
    terminated: bool,
    reqmore_pending: bool,
    out_of_patience: bool,
}

impl AgendaUser {
    pub fn new(ontology: Arc<Ontology>, goal: UserGoal, patience: usize) -> Self {
        let status = goal
            .domains
            .iter()
            .map(|g| DomainStatus {
                answered: vec![false; g.requests.len()],
                ..DomainStatus::default()
            })
            .collect();
        let mut user = AgendaUser {
            ontology,
            goal,
            agenda: Vec::new(),
            status,
            current: 0,
            patience,
            terminated: false,
            reqmore_pending: false,
            out_of_patience: false,
        };
        user.open_domain(0);
        user
    }

    pub fn goal(&self) -> &UserGoal {
        &self.goal
    }

    pub fn status(&self) -> &[DomainStatus] {
        &self.status
    }

    pub fn agenda(&self) -> &[DialogueAct] {
        &self.agenda
    }

    pub fn patience(&self) -> usize {
        self.patience
    }

    pub fn is_terminated(&self) -> bool {
        self.terminated
    }

    /// Satisfied from the user's point of view with patience to spare.
    pub fn is_complete(&self) -> bool {
        !self.out_of_patience && (0..self.goal.domains.len()).all(|i| self.domain_satisfied(i))
    }

    fn domain_satisfied(&self, i: usize) -> bool {
        let st = &self.status[i];
        let goal = &self.goal.domains[i];
        !st.abandoned
            && st.offer_received
            && st.all_answered()
            && (goal.book.is_none() || st.booked)
    }

    fn domain_finished(&self, i: usize) -> bool {
        let name = &self.goal.domains[i].domain;
        self.status[i].abandoned
            || (self.domain_satisfied(i) && !self.agenda.iter().any(|a| &a.domain == name))
    }

    fn open_domain(&mut self, i: usize) {
        let Some(goal) = self.goal.domains.get(i) else {
            return;
        };
        if goal.find.is_empty() {
            let requests: Vec<DialogueAct> = goal
                .requests
                .iter()
                .map(|s| DialogueAct::request(&goal.domain, s))
                .collect();
            self.status[i].requests_pushed = true;
            self.agenda.extend(requests.into_iter().rev());
        } else {
            let informs: Vec<DialogueAct> = goal
                .find
                .iter()
                .map(|(s, v)| DialogueAct::inform(&goal.domain, s, v))
                .collect();
            self.agenda.extend(informs.into_iter().rev());
        }
    }

    fn remove_matching(&mut self, domain: &str, slot: &str, intent: Intent) {
        self.agenda.retain(|a| {
            !(a.intent == intent && a.domain == domain && a.slot.as_deref() == Some(slot))
        });
    }

    fn on_offer(&mut self, gi: usize, entity: Option<&str>) {
        self.status[gi].offer_received = true;
        self.status[gi].offered = entity.map(str::to_string);
        if self.status[gi].requests_pushed {
            return;
        }
        self.status[gi].requests_pushed = true;
        let goal = self.goal.domains[gi].clone();
        if let Some(book) = &goal.book {
            // Booking details go below everything else for this domain.
            let informs: Vec<DialogueAct> = book
                .iter()
                .map(|(s, v)| DialogueAct::inform(&goal.domain, s, v))
                .collect();
            for act in informs {
                self.agenda.insert(0, act);
            }
        }
        for (k, slot) in goal.requests.iter().enumerate().rev() {
            if !self.status[gi].answered[k] {
                self.remove_matching(&goal.domain, slot, Intent::Request);
                self.agenda.push(DialogueAct::request(&goal.domain, slot));
            }
        }
    }

    fn on_system_request(&mut self, gi: usize, slot: &str) {
        let goal = &self.goal.domains[gi];
        let Ok(schema) = self.ontology.domain_by_name(&goal.domain) else {
            return;
        };
        let Ok(def) = schema.slot(slot) else {
            return;
        };
        let value = match def.kind {
            SlotKind::Find => goal.find_value(slot).unwrap_or(DONTCARE).to_string(),
            SlotKind::Book => goal.book_value(slot).unwrap_or(DONTCARE).to_string(),
            SlotKind::Request => return,
        };
        let domain = goal.domain.clone();
        self.remove_matching(&domain, slot, Intent::Inform);
        self.agenda.push(DialogueAct::inform(&domain, slot, &value));
    }

    /// Relaxes the most recently informed constraint; abandons the domain if none is left.
    fn on_nooffer(&mut self, gi: usize) {
        let relaxable = self.status[gi]
            .spoken
            .iter()
            .rev()
            .find(|slot| {
                self.goal.domains[gi]
                    .find_value(slot)
                    .is_some_and(|v| v != DONTCARE)
            })
            .cloned();
        match relaxable {
            Some(slot) => {
                let goal = &mut self.goal.domains[gi];
                for (s, v) in &mut goal.find {
                    if *s == slot {
                        *v = DONTCARE.to_string();
                    }
                }
                let domain = goal.domain.clone();
                self.remove_matching(&domain, &slot, Intent::Inform);
                self.agenda
                    .push(DialogueAct::inform(&domain, &slot, DONTCARE));
            }
            None => {
                self.status[gi].abandoned = true;
                let domain = self.goal.domains[gi].domain.clone();
                self.agenda.retain(|a| a.domain != domain);
            }
        }
    }

    fn react(&mut self, act: &DialogueAct) -> bool {
        let gi = self.goal.position(&act.domain);
        match act.intent {
            Intent::Bye => return true,
            Intent::Reqmore => self.reqmore_pending = true,
            Intent::Offer => {
                if let Some(gi) = gi {
                    self.on_offer(gi, act.value.as_deref());
                }
            }
            Intent::Book => {
                if let Some(gi) = gi {
                    if self.status[gi].offer_received && self.goal.domains[gi].book.is_some() {
                        self.status[gi].booked = true;
                    }
                }
            }
            Intent::Nooffer => {
                if let Some(gi) = gi {
                    self.on_nooffer(gi);
                }
            }
            Intent::Inform => {
                if let (Some(gi), Some(slot)) = (gi, act.slot.as_deref()) {
                    if let Some(k) = self.goal.domains[gi].requests.iter().position(|r| r == slot) {
                        self.status[gi].answered[k] = true;
                        let domain = self.goal.domains[gi].domain.clone();
                        self.remove_matching(&domain, slot, Intent::Request);
                    }
                }
            }
            Intent::Request => {
                if let (Some(gi), Some(slot)) = (gi, act.slot.as_deref()) {
                    self.on_system_request(gi, slot);
                }
            }
            _ => {}
        }
        false
    }

    fn finish(&mut self) -> (Vec<DialogueAct>, bool) {
        self.terminated = true;
        (vec![DialogueAct::general(Intent::Bye)], true)
    }

    /// Reacts to the system turn and returns the user's reply and whether the dialogue ended.
    pub fn step(&mut self, system_acts: &[DialogueAct]) -> (Vec<DialogueAct>, bool) {
        assert!(!self.terminated, "user already terminated");
        for act in system_acts {
            if self.react(act) {
                return self.finish();
            }
        }
        while self.current < self.goal.domains.len() && self.domain_finished(self.current) {
            let name = self.goal.domains[self.current].domain.clone();
            self.agenda.retain(|a| a.domain != name);
            self.current += 1;
            self.open_domain(self.current);
        }
        if self.current >= self.goal.domains.len() {
            return self.finish();
        }
        if self.patience == 0 {
            self.out_of_patience = true;
            return self.finish();
        }
        self.patience -= 1;

        let mut turn = Vec::with_capacity(ACTS_PER_TURN);
        while turn.len() < ACTS_PER_TURN {
            let Some(act) = self.agenda.pop() else { break };
            if act.intent == Intent::Inform {
                if let (Some(gi), Some(slot)) = (self.goal.position(&act.domain), &act.slot) {
                    let st = &mut self.status[gi];
                    st.spoken.retain(|s| s != slot);
                    if act.value.as_deref() != Some(DONTCARE) {
                        st.spoken.push(slot.clone());
                    }
                }
            }
            turn.push(act);
        }
        if self.reqmore_pending && turn.is_empty() {
            turn.push(DialogueAct::general(Intent::ReqmoreAnswer));
        }
        self.reqmore_pending = false;
        (turn, false)
    }
}

/// `user_step` in free-function form.
pub fn user_step(user: &mut AgendaUser, system_acts: &[DialogueAct]) -> (Vec<DialogueAct>, bool) {
    user.step(system_acts)
}
