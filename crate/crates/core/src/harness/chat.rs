//! Interactive session: a person plays the user by typing dialogue acts.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::rngs::mock::StepRng;

use crate::belief::{select_domain, BeliefDigest, BeliefState};
use crate::dialogue::{DialogueAct, DomainGoal, Speaker};
use crate::episode::{domain_solved, Agent, OracleAgent};
use crate::error::{Error, Result};
use crate::learn::{Behaviour, PolicyAgent};
use crate::ontology::{Intent, Ontology, SlotKind};
use crate::policy::Policy;

pub const CHAT_USAGE: &str = "\
Type one or more user acts separated by `;`, for example
  inform[restaurant.food=italian]; inform[restaurant.area=centre]
  request[restaurant.phone]
  inform[hotel.parking=dontcare]
  hello | thank | reqmore-answer | bye
`bye` ends the dialogue and prints a verdict; `quit` leaves.";

/// Who answers.
pub enum ChatAgent {
    Oracle,
    Policy(Box<Policy>),
}

impl ChatAgent {
    fn decide(&self, belief: &BeliefState, domain: usize, ontology: &Ontology) -> Result<Vec<DialogueAct>> {
        match self {
            ChatAgent::Oracle => Ok(OracleAgent::default().decide(belief, domain, ontology)?.acts),
            ChatAgent::Policy(p) => {
                let mut rng = StepRng::new(0, 0);
                Ok(PolicyAgent::new(p, Behaviour::Greedy, &mut rng).decide(belief, domain, ontology)?.acts)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verdict {
    /// Every domain the user touched was solved against what the user said.
    pub success: bool,
    /// Every request was answered, an entity offered and any booking made.
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChatReply {
    pub system: Vec<DialogueAct>,
    pub belief: BeliefDigest,
    pub verdict: Option<Verdict>,
}

pub struct ChatSession {
    ontology: Arc<Ontology>,
    agent: ChatAgent,
    belief: BeliefState,
    said: Vec<DialogueAct>,
}

/// Parses `act; act; ...` and checks each act as a user act.
pub fn parse_user_acts(line: &str, ontology: &Ontology) -> Result<Vec<DialogueAct>> {
    let acts = line
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(DialogueAct::parse)
        .collect::<Result<Vec<_>>>()?;
    if acts.is_empty() {
        return Err(Error::Invalid("no acts given".into()));
    }
    for a in &acts {
        a.validate(ontology, Speaker::User)?;
    }
    Ok(acts)
}

impl ChatSession {
    pub fn new(ontology: Arc<Ontology>, agent: ChatAgent) -> Self {
        ChatSession {
            belief: BeliefState::new(&ontology),
            ontology,
            agent,
            said: Vec::new(),
        }
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    pub fn reset(&mut self) {
        self.belief = BeliefState::new(&self.ontology);
        self.said.clear();
    }

    /// Plays one user turn. A `bye` ends the dialogue and starts a fresh one.
    pub fn send(&mut self, line: &str) -> Result<ChatReply> {
        let acts = parse_user_acts(line, &self.ontology)?;
        let ont = &*self.ontology;
        let tracked = self.belief.update(ont, &acts)?;
        let domain = select_domain(&tracked, &acts, ont);
        let tracked = tracked.with_active(domain);
        let system = self.agent.decide(&tracked, domain, ont)?;
        self.belief = tracked.update_system(ont, &system)?;
        self.said.extend(acts.iter().cloned());
        let digest = self.belief.digest(ont);
        let verdict = acts.iter().any(|a| a.intent == Intent::Bye).then(|| self.verdict());
        if verdict.is_some() {
            self.reset();
        }
        Ok(ChatReply {
            system,
            belief: digest,
            verdict,
        })
    }

    /// The goal implied by everything the user has said so far.
    pub fn implied_goal(&self) -> Vec<DomainGoal> {
        let ont = &*self.ontology;
        let mut goals: BTreeMap<usize, (BTreeMap<usize, String>, Vec<usize>)> = BTreeMap::new();
        let mut order = Vec::new();
        for a in &self.said {
            let (Some(d), Some(slot)) = (ont.domain_index(&a.domain), a.slot.as_deref()) else {
                continue;
            };
            let Some(s) = ont.domain(d).slot_index(slot) else {
                continue;
            };
            if !order.contains(&d) {
                order.push(d);
            }
            let g = goals.entry(d).or_default();
            match a.intent {
                Intent::Inform => {
                    if let Some(v) = &a.value {
                        g.0.insert(s, v.clone());
                    }
                }
                Intent::Request if !g.1.contains(&s) => g.1.push(s),
                _ => {}
            }
        }
        order
            .into_iter()
            .map(|d| {
                let schema = ont.domain(d);
                let (values, requests) = &goals[&d];
                let of = |kind: SlotKind| -> Vec<(String, String)> {
                    values
                        .iter()
                        .filter(|(s, _)| schema.slots[**s].kind == kind)
                        .map(|(s, v)| (schema.slots[*s].name.clone(), v.clone()))
                        .collect()
                };
                let book = of(SlotKind::Book);
                DomainGoal {
                    domain: schema.name.clone(),
                    find: of(SlotKind::Find),
                    requests: requests.iter().map(|s| schema.slots[*s].name.clone()).collect(),
                    book: (!book.is_empty()).then_some(book),
                }
            })
            .collect()
    }

    pub fn verdict(&self) -> Verdict {
        let ont = &*self.ontology;
        let goals = self.implied_goal();
        let success = !goals.is_empty() && goals.iter().all(|g| domain_solved(&self.belief, g, ont));
        let complete = !goals.is_empty()
            && goals.iter().all(|g| {
                let d = ont.domain_index(&g.domain).expect("goal domains come from the ontology");
                let b = &self.belief.domains[d];
                let schema = ont.domain(d);
                b.offered.is_some()
                    && g.requests
                        .iter()
                        .all(|r| schema.slot_index(r).is_some_and(|s| b.informed[s]))
                    && (g.book.is_none() || b.booking.is_some())
            });
        Verdict { success, complete }
    }
}

/// Line-oriented loop until `quit` or end of input.
pub fn run_chat<R: BufRead, W: Write>(session: &mut ChatSession, input: R, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CHAT_USAGE}")?;
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "quit" {
            break;
        }
        if line == "help" {
            writeln!(out, "{CHAT_USAGE}")?;
            continue;
        }
        match session.send(line) {
            Ok(reply) => {
                let acts: Vec<String> = reply.system.iter().map(ToString::to_string).collect();
                writeln!(out, "system: {}", acts.join("; "))?;
                writeln!(out, "belief: {}", serde_json::to_string(&reply.belief).unwrap_or_default())?;
                if let Some(v) = reply.verdict {
                    writeln!(out, "verdict: success={} complete={}", v.success, v.complete)?;
                    writeln!(out, "-- new dialogue --")?;
                }
            }
            Err(e) => {
                writeln!(out, "error: {e}")?;
                writeln!(out, "{CHAT_USAGE}")?;
            }
        }
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transcript(input: &str) -> String {
        let mut s = ChatSession::new(Arc::new(Ontology::bundled()), ChatAgent::Oracle);
        let mut out = Vec::new();
        run_chat(&mut s, input.as_bytes(), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn garbage_prints_usage_and_continues() {
        let t = transcript("garbage(\ninform[restaurant.food=italian]\nquit\ninform[restaurant.area=north]\n");
        assert!(t.contains("error:"));
        assert_eq!(t.matches("system:").count(), 1);
        assert_eq!(t.matches("Type one or more").count(), 2);
    }

    #[test]
    fn bye_prints_verdict() {
        let t = transcript("inform[restaurant.food=italian]\nbye\n");
        assert!(t.contains("verdict: success="), "{t}");
    }

    #[test]
    fn implied_goal_tracks_what_was_said() {
        let ont = Arc::new(Ontology::bundled());
        let mut s = ChatSession::new(ont.clone(), ChatAgent::Oracle);
        s.send("inform[restaurant.food=italian]; request[restaurant.phone]").unwrap();
        let g = s.implied_goal();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].find, vec![("food".to_string(), "italian".to_string())]);
        assert_eq!(g[0].requests, vec!["phone".to_string()]);
        assert!(s.send("inform[restaurant.phone=123]").is_err());
    }
}
