//! The simulated dialogue loop, rewards and evaluation metrics.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::belief::{select_domain, BeliefDigest, BeliefState, BeliefValue};
use crate::dialogue::act::DialogueAct;
use crate::dialogue::goal::{DomainGoal, UserGoal};
use crate::dialogue::oracle::{expand, oracle_summary};
use crate::dialogue::user::AgendaUser;
use crate::error::{Error, Result};
use crate::featurize::ActionSpace;
use crate::ontology::{Ontology, SlotKind};

pub const TURN_PENALTY: f64 = -1.0;
pub const DOMAIN_REWARD: f64 = 5.0;
pub const SUCCESS_REWARD: f64 = 40.0;

/// What a system agent did in one turn.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub acts: Vec<DialogueAct>,
    /// Chosen index in the domain's native [`ActionSpace`], when the agent picks single actions.
    pub action: Option<usize>,
    /// Behaviour probability of `action`.
    pub behaviour_prob: f64,
    /// The turn was produced by the oracle.
    pub from_oracle: bool,
}

pub trait Agent {
    fn decide(&mut self, belief: &BeliefState, domain: usize, ontology: &Ontology) -> Result<Decision>;
}

/// The handcrafted policy, either speaking its full turn or only its first summary action.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleAgent {
    pub single_action: bool,
}

impl Agent for OracleAgent {
    fn decide(&mut self, belief: &BeliefState, domain: usize, ontology: &Ontology) -> Result<Decision> {
        let mut summary = oracle_summary(belief, domain, ontology);
        if self.single_action {
            summary.truncate(1);
        }
        let action = ActionSpace::for_domain(ontology, domain).index_of(summary[0]);
        Ok(Decision {
            acts: expand(&summary, belief, domain, ontology)?,
            action,
            behaviour_prob: 1.0,
            from_oracle: true,
        })
    }
}

/// One system turn as seen by learners and logs.
#[derive(Clone, Debug)]
pub struct TurnRecord {
    /// Belief after the user turn, with the active domain set.
    pub belief: Arc<BeliefState>,
    pub domain: usize,
    pub user_acts: Vec<DialogueAct>,
    pub decision: Decision,
    /// Total reward of the turn, including `bonus`.
    pub reward: f64,
    /// Terminal success bonus (0 or 40).
    pub bonus: f64,
    pub terminal: bool,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub goal: UserGoal,
    pub turns: Vec<TurnRecord>,
    pub success: bool,
    pub complete: bool,
    pub total_reward: f64,
    pub inform_hits: usize,
    pub informed: usize,
    pub requested: usize,
    pub book_correct: usize,
    pub book_tasks: usize,
}

impl EpisodeResult {
    pub fn turn_count(&self) -> usize {
        self.turns.len()
    }

    pub fn precision(&self) -> f64 {
        match (self.informed, self.requested) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            (n, _) => self.inform_hits as f64 / n as f64,
        }
    }

    pub fn recall(&self) -> f64 {
        if self.requested == 0 {
            1.0
        } else {
            self.inform_hits as f64 / self.requested as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn booking_correct(belief: &BeliefState, goal: &DomainGoal, ontology: &Ontology) -> bool {
    let Some(d) = ontology.domain_index(&goal.domain) else {
        return false;
    };
    let schema = ontology.domain(d);
    let Some(booking) = &belief.domains[d].booking else {
        return false;
    };
    let Some(entity) = booking.entity else {
        return false;
    };
    let find: Vec<_> = goal
        .coded_find(ontology)
        .into_iter()
        .filter(|(_, c)| *c != crate::ontology::Constraint::Dontcare)
        .collect();
    schema.entity_matches(entity, &find)
        && goal.book.iter().flatten().all(|(slot, value)| {
            schema.slot_index(slot).is_some_and(|s| {
                booking.values[s]
                    == schema.slots[s]
                        .value_index(value)
                        .map_or(BeliefValue::None, |v| BeliefValue::Value(v as u16))
            })
        })
}

/// The goal domain is objectively solved by what the system has said so far.
pub fn domain_solved(belief: &BeliefState, goal: &DomainGoal, ontology: &Ontology) -> bool {
    let Some(d) = ontology.domain_index(&goal.domain) else {
        return false;
    };
    let schema = ontology.domain(d);
    let b = &belief.domains[d];
    let find: Vec<_> = goal
        .coded_find(ontology)
        .into_iter()
        .filter(|(_, c)| *c != crate::ontology::Constraint::Dontcare)
        .collect();
    let offered = b.offered.is_some_and(|e| schema.entity_matches(e, &find));
    let answered = goal
        .requests
        .iter()
        .all(|r| schema.slot_index(r).is_some_and(|s| b.informed[s]));
    offered && answered && (goal.book.is_none() || booking_correct(belief, goal, ontology))
}

/// Options for [`run_episode`].
#[derive(Clone, Copy, Debug)]
pub struct EpisodeOptions {
    /// Hard cap on system turns, on top of the user's patience.
    pub max_turns: usize,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        EpisodeOptions { max_turns: 60 }
    }
}

/// Runs one dialogue between `user` and `agent`.
///
/// Per system turn the reward is `-1`, or `+5` when some goal domain becomes
/// solved for the first time; the final turn adds `+40` if every goal domain is solved.
pub fn run_episode(
    ontology: &Ontology,
    user: &mut AgendaUser,
    agent: &mut dyn Agent,
    options: EpisodeOptions,
) -> Result<EpisodeResult> {
    let mut belief = BeliefState::new(ontology);
    let (mut user_acts, mut user_done) = user.step(&[]);
    let mut rewarded = vec![false; user.goal().domains.len()];
    let mut informed: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut turns = Vec::new();
    let mut total_reward = 0.0;
    loop {
        let tracked = belief.update(ontology, &user_acts)?;
        let domain = select_domain(&tracked, &user_acts, ontology);
        let tracked = Arc::new(tracked.with_active(domain));
        let decision = agent.decide(&tracked, domain, ontology)?;
        for act in &decision.acts {
            if act.intent == crate::ontology::Intent::Inform {
                if let (Some(d), Some(slot)) = (ontology.domain_index(&act.domain), act.slot.as_deref()) {
                    if let Some(s) = ontology.domain(d).slot_index(slot) {
                        if ontology.domain(d).slots[s].kind == SlotKind::Request {
                            informed.insert((d, s));
                        }
                    }
                }
            }
        }
        belief = tracked.update_system(ontology, &decision.acts)?;

        let mut reward = TURN_PENALTY;
        for (i, g) in user.goal().domains.iter().enumerate() {
            if !rewarded[i] && domain_solved(&belief, g, ontology) {
                rewarded[i] = true;
                reward = DOMAIN_REWARD;
            }
        }
        let terminal = user_done || turns.len() + 1 >= options.max_turns;
        let bonus = if terminal && rewarded.iter().all(|&r| r) {
            SUCCESS_REWARD
        } else {
            0.0
        };
        reward += bonus;
        total_reward += reward;
        let spoken = decision.acts.clone();
        turns.push(TurnRecord {
            belief: tracked,
            domain,
            user_acts: std::mem::take(&mut user_acts),
            decision,
            reward,
            bonus,
            terminal,
        });
        if terminal {
            break;
        }
        (user_acts, user_done) = user.step(&spoken);
    }

    let goal = user.goal().clone();
    let mut requested = 0;
    let mut inform_hits = 0;
    for g in &goal.domains {
        let d = ontology
            .domain_index(&g.domain)
            .ok_or_else(|| Error::UnknownDomain(g.domain.clone()))?;
        for r in &g.requests {
            requested += 1;
            if let Some(s) = ontology.domain(d).slot_index(r) {
                inform_hits += usize::from(informed.contains(&(d, s)));
            }
        }
    }
    let book_tasks = goal.book_tasks();
    let book_correct = goal
        .domains
        .iter()
        .filter(|g| g.book.is_some() && booking_correct(&belief, g, ontology))
        .count();
    Ok(EpisodeResult {
        success: rewarded.iter().all(|&r| r),
        complete: user.is_complete(),
        goal,
        turns,
        total_reward,
        inform_hits,
        informed: informed.len(),
        requested,
        book_correct,
        book_tasks,
    })
}

/// Averages over a batch of evaluation dialogues.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub dialogues: usize,
    pub inform_precision: f64,
    pub inform_recall: f64,
    pub inform_f1: f64,
    /// Pooled over all book tasks; 1 when there are none.
    pub book_rate: f64,
    pub success: f64,
    pub complete: f64,
    /// Mean turns over successful dialogues (0 when none succeeded).
    pub turns_success: f64,
    pub turns_all: f64,
    pub reward: f64,
}

impl Metrics {
    pub fn from_results(results: &[EpisodeResult]) -> Metrics {
        let n = results.len();
        if n == 0 {
            return Metrics::default();
        }
        let mean = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n as f64;
        let tasks: usize = results.iter().map(|r| r.book_tasks).sum();
        let booked: usize = results.iter().map(|r| r.book_correct).sum();
        let successes: Vec<&EpisodeResult> = results.iter().filter(|r| r.success).collect();
        Metrics {
            dialogues: n,
            inform_precision: mean(&|r| r.precision()),
            inform_recall: mean(&|r| r.recall()),
            inform_f1: mean(&|r| r.f1()),
            book_rate: if tasks == 0 { 1.0 } else { booked as f64 / tasks as f64 },
            success: mean(&|r| f64::from(u8::from(r.success))),
            complete: mean(&|r| f64::from(u8::from(r.complete))),
            turns_success: if successes.is_empty() {
                0.0
            } else {
                successes.iter().map(|r| r.turn_count() as f64).sum::<f64>() / successes.len() as f64
            },
            turns_all: mean(&|r| r.turn_count() as f64),
            reward: mean(&|r| r.total_reward),
        }
    }
}

#[derive(Serialize)]
struct LogLine<'a> {
    turn: usize,
    user: Vec<String>,
    domain: &'a str,
    belief: BeliefDigest,
    system: Vec<String>,
    reward: f64,
}

/// Writes one JSON line per system turn.
pub fn write_trajectory<W: Write>(out: &mut W, result: &EpisodeResult, ontology: &Ontology) -> std::io::Result<()> {
    for (t, turn) in result.turns.iter().enumerate() {
        let line = LogLine {
            turn: t,
            user: turn.user_acts.iter().map(ToString::to_string).collect(),
            domain: &ontology.domain(turn.domain).name,
            belief: turn.belief.digest(ontology),
            system: turn.decision.acts.iter().map(ToString::to_string).collect(),
            reward: turn.reward,
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::goal::sample_goal_seeded;
    use crate::dialogue::user::DEFAULT_PATIENCE;

    fn run(ont: &Arc<Ontology>, seed: u64, max_domains: usize, single: bool) -> EpisodeResult {
        let goal = sample_goal_seeded(ont, seed, max_domains);
        let mut user = AgendaUser::new(ont.clone(), goal, DEFAULT_PATIENCE);
        let mut agent = OracleAgent { single_action: single };
        run_episode(ont, &mut user, &mut agent, EpisodeOptions::default()).unwrap()
    }

    #[test]
    fn oracle_solves_single_domain_goals() {
        let ont = Arc::new(Ontology::bundled());
        let results: Vec<_> = (0..200).map(|s| run(&ont, s, 1, false)).collect();
        let m = Metrics::from_results(&results);
        assert!(m.success > 0.95, "{m:?}");
    }

    #[test]
    fn reward_matches_closed_form() {
        let ont = Arc::new(Ontology::bundled());
        for seed in 0..50 {
            let r = run(&ont, seed, 3, true);
            let solved_turns = r.turns.iter().filter(|t| t.reward - t.bonus == DOMAIN_REWARD).count();
            let domains = r.goal.domains.len();
            let expected = -(r.turn_count() as f64)
                + solved_turns as f64 * (DOMAIN_REWARD - TURN_PENALTY)
                + if r.success { SUCCESS_REWARD } else { 0.0 };
            assert!((r.total_reward - expected).abs() < 1e-9);
            assert!(solved_turns <= domains);
            assert!(r.turns.last().unwrap().terminal);
        }
    }

    #[test]
    fn success_implies_full_recall_and_booking() {
        let ont = Arc::new(Ontology::bundled());
        for seed in 0..100 {
            let r = run(&ont, seed, 3, false);
            if r.success {
                assert_eq!(r.recall(), 1.0);
                assert_eq!(r.book_correct, r.book_tasks);
            }
        }
    }

    #[test]
    fn trajectory_has_one_line_per_turn() {
        let ont = Arc::new(Ontology::bundled());
        let r = run(&ont, 4, 2, false);
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &r, &ont).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), r.turn_count());
        for line in text.lines() {
            serde_json::from_str::<serde_json::Value>(line).unwrap();
        }
    }

    #[test]
    fn oracle_handles_every_goal_size() {
        let ont = Arc::new(Ontology::bundled());
        for max in 1..=3 {
            let results: Vec<_> = (0..300).map(|s| run(&ont, s, max, false)).collect();
            let m = Metrics::from_results(&results);
            assert!(m.success >= 0.95 && m.complete >= 0.95, "max {max}: {m:?}");
        }
    }
}
