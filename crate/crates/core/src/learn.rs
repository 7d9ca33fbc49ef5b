//! Replay, action selection and the actor-critic / imitation updates.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::dialogue::oracle::expand;
use crate::dialogue::goal::sample_goal;
use crate::dialogue::user::AgendaUser;
use crate::episode::{run_episode, Agent, Decision, EpisodeOptions, EpisodeResult, OracleAgent};
use crate::error::{Error, Result};
use crate::nncore::{Adam, Tape};
use crate::ontology::Ontology;
use crate::policy::{masked_softmax, ActorCritic, Observation, Policy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Actor-critic from self-generated experience only.
    Rl,
    /// Cross-entropy against oracle labels only.
    Bc,
    /// Actor-critic plus a margin loss on oracle-generated transitions.
    Ilfod,
    /// Actor-critic plus a margin loss on every transition, labelled by the oracle.
    Ilfos,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Rl, Mode::Bc, Mode::Ilfod, Mode::Ilfos];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rl => "rl",
            Mode::Bc => "bc",
            Mode::Ilfod => "ilfod",
            Mode::Ilfos => "ilfos",
        }
    }

    pub fn uses_oracle(self) -> bool {
        self != Mode::Rl
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown mode `{s}` (expected rl, bc, ilfod or ilfos)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub q: f64,
    pub pi: f64,
    pub il: f64,
    pub entropy: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            q: 0.5,
            pi: 1.0,
            il: 1.0,
            entropy: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub gamma: f64,
    pub buffer_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weights: LossWeights,
    /// Margin added to non-expert actions in the imitation loss.
    pub margin: f64,
    /// Boltzmann temperature for exploration.
    pub temperature: f64,
    /// Truncation of the importance weight.
    pub rho_clip: f64,
    /// Probability that a training episode is run by the oracle (imitation modes only).
    pub oracle_episode_prob: f64,
    pub dropout: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            gamma: 0.99,
            buffer_size: 50_000,
            batch_size: 64,
            learning_rate: 1e-3,
            weights: LossWeights::default(),
            margin: std::f64::consts::LN_2,
            temperature: 1.0,
            rho_clip: 10.0,
            oracle_episode_prob: 0.5,
            dropout: 0.1,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("hyper-parameter {what}")));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.buffer_size == 0 || self.batch_size == 0 {
            return bad("buffer_size and batch_size must be positive");
        }
        if !(self.learning_rate > 0.0) || !(self.temperature > 0.0) || !(self.rho_clip > 0.0) {
            return bad("learning_rate, temperature and rho_clip must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.oracle_episode_prob) {
            return bad("oracle_episode_prob must lie in [0, 1]");
        }
        let w = self.weights;
        if [w.q, w.pi, w.il, w.entropy, self.margin].iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("loss weights and margin must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Transition<O> {
    pub obs: Arc<O>,
    pub action: usize,
    pub reward: f64,
    /// `None` at the end of an episode.
    pub next: Option<Arc<O>>,
    /// Behaviour probability of `action`.
    pub mu: f64,
    /// Oracle label in the learner's action layout.
    pub label: Option<usize>,
    pub from_oracle: bool,
    pub episode_start: bool,
}

/// FIFO replay memory with uniform sampling (with replacement).
#[derive(Clone, Debug)]
pub struct ReplayBuffer<O> {
    capacity: usize,
    items: VecDeque<Transition<O>>,
    starts: usize,
    oracle_starts: usize,
}

impl<O> ReplayBuffer<O> {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            starts: 0,
            oracle_starts: 0,
        }
    }

    pub fn push(&mut self, t: Transition<O>) {
        if self.items.len() == self.capacity {
            if let Some(old) = self.items.pop_front() {
                self.count(&old, false);
            }
        }
        self.count(&t, true);
        self.items.push_back(t);
    }

    fn count(&mut self, t: &Transition<O>, add: bool) {
        if t.episode_start {
            let (s, o) = (&mut self.starts, &mut self.oracle_starts);
            if add {
                *s += 1;
                *o += usize::from(t.from_oracle);
            } else {
                *s -= 1;
                *o -= usize::from(t.from_oracle);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, i: usize) -> &Transition<O> {
        &self.items[i]
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<&Transition<O>> {
        self.sample_indices(rng, n).into_iter().map(|i| &self.items[i]).collect()
    }

    /// Share of stored episodes that were run by the oracle.
    pub fn oracle_fraction(&self) -> f64 {
        if self.starts == 0 {
            0.0
        } else {
            self.oracle_starts as f64 / self.starts as f64
        }
    }
}

/// Mean loss components of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Losses {
    pub q: f64,
    pub pi: f64,
    pub il: f64,
    pub entropy: f64,
}

/// Samples from the Boltzmann distribution over valid actions; returns `(index, probability)`.
pub fn boltzmann<R: Rng + ?Sized>(logits: &[f64], mask: &[bool], temperature: f64, rng: &mut R) -> Result<(usize, f64)> {
    if !mask.iter().any(|&m| m) {
        return Err(Error::AllMasked);
    }
    let p = masked_softmax(logits, mask, temperature);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            acc += pi;
            last = i;
            if u < acc {
                return Ok((i, pi));
            }
        }
    }
    Ok((last, p[last]))
}

/// Highest-logit valid action (first on ties).
pub fn greedy(logits: &[f64], mask: &[bool]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, (&l, &m)) in logits.iter().zip(mask).enumerate() {
        if m && best.is_none_or(|b| l > logits[b]) {
            best = Some(i);
        }
    }
    best.ok_or(Error::AllMasked)
}

/// One gradient step on a sampled batch. Returns the mean loss components.
pub fn acer_update<M: ActorCritic>(
    model: &mut M,
    adam: &mut Adam,
    batch: &[&Transition<M::Obs>],
    hyper: &Hyper,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> Result<Losses> {
    if batch.is_empty() {
        return Ok(Losses::default());
    }
    let targets = bootstrap_targets(model, batch, hyper, mode, rng)?;
    let (losses, grads, _) = loss_and_gradients(model, batch, &targets, hyper, mode, true, rng, None)?;
    adam.update(model.params_mut(), &grads);
    Ok(losses)
}

/// `r + γ Σ_a π(a|s') Q(s', a)` from the current network in inference mode (0 bootstrap at episode ends).
pub fn bootstrap_targets<M: ActorCritic>(
    model: &M,
    batch: &[&Transition<M::Obs>],
    hyper: &Hyper,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    let mut targets = vec![0.0; batch.len()];
    if mode == Mode::Bc {
        return Ok(targets);
    }
    let next: Vec<(usize, &M::Obs)> = batch
        .iter()
        .enumerate()
        .filter_map(|(i, t)| t.next.as_deref().map(|o| (i, o)))
        .collect();
    if !next.is_empty() {
        let mut tape = Tape::new(model.params());
        let obs: Vec<&M::Obs> = next.iter().map(|(_, o)| *o).collect();
        let h = model.heads(&mut tape, &obs, false, rng)?;
        for (k, (i, _)) in next.iter().enumerate() {
            let p = masked_softmax(&h.logits[k], &h.masks[k], 1.0);
            targets[*i] = p.iter().zip(&h.q[k]).map(|(a, b)| a * b).sum();
        }
    }
    for (i, t) in batch.iter().enumerate() {
        targets[i] = t.reward + if t.next.is_some() { hyper.gamma * targets[i] } else { 0.0 };
    }
    Ok(targets)
}

/// Batch-mean loss and its gradient with respect to every parameter.
///
/// Also returns the per-sample `(rho, advantage)` used; passing them back as
/// `frozen` evaluates the same surrogate at other parameter values.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_gradients<M: ActorCritic>(
    model: &M,
    batch: &[&Transition<M::Obs>],
    targets: &[f64],
    hyper: &Hyper,
    mode: Mode,
    train: bool,
    rng: &mut dyn RngCore,
    frozen: Option<&[(f64, f64)]>,
) -> Result<(Losses, Vec<crate::nncore::Tensor>, Vec<(f64, f64)>)> {
    let n = batch.len() as f64;
    let mut tape = Tape::new(model.params());
    let obs: Vec<&M::Obs> = batch.iter().map(|t| &*t.obs).collect();
    let h = model.heads(&mut tape, &obs, train, rng)?;
    let mut g_logits = Vec::with_capacity(batch.len());
    let mut g_q = Vec::with_capacity(batch.len());
    let mut losses = Losses::default();
    let mut used = Vec::with_capacity(batch.len());
    for (i, t) in batch.iter().enumerate() {
        if !h.masks[i].get(t.action).copied().unwrap_or(false) {
            return Err(Error::MaskedAction {
                domain: String::from("replay"),
                index: t.action,
            });
        }
        let s = SampleLoss {
            action: t.action,
            mu: t.mu,
            target: targets[i],
            label: t.label,
            from_oracle: t.from_oracle,
        };
        let f = frozen.map(|f| f[i]);
        let (l, mut gl, mut gq, u) = s.evaluate(&h.logits[i], &h.q[i], &h.masks[i], hyper, mode, f);
        used.push(u);
        losses.q += l.q / n;
        losses.pi += l.pi / n;
        losses.il += l.il / n;
        losses.entropy += l.entropy / n;
        gl.iter_mut().chain(gq.iter_mut()).for_each(|x| *x /= n);
        g_logits.push(gl);
        g_q.push(gq);
    }
    let seeds = h.seeds(&tape, &g_logits, &g_q);
    Ok((losses, tape.backward(&seeds), used))
}

/// Forward pass only: each sample's (unscaled) loss components under fixed
/// `(rho, advantage)`, plus a signature of every piecewise choice made (ReLU
/// signs and margin winners). Equal signatures mean the same smooth piece.
#[allow(clippy::too_many_arguments)]
pub fn sample_losses<M: ActorCritic>(
    model: &M,
    batch: &[&Transition<M::Obs>],
    targets: &[f64],
    hyper: &Hyper,
    mode: Mode,
    train: bool,
    rng: &mut dyn RngCore,
    frozen: &[(f64, f64)],
) -> Result<(Vec<Losses>, Vec<usize>)> {
    let mut tape = Tape::new(model.params());
    let obs: Vec<&M::Obs> = batch.iter().map(|t| &*t.obs).collect();
    let h = model.heads(&mut tape, &obs, train, rng)?;
    let mut signature: Vec<usize> = tape.relu_pattern().into_iter().map(usize::from).collect();
    let losses = batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let s = SampleLoss {
                action: t.action,
                mu: t.mu,
                target: targets[i],
                label: t.label,
                from_oracle: t.from_oracle,
            };
            if let Some(e) = t.label {
                signature.push(margin_winner(&h.q[i], &h.masks[i], e, hyper.margin).0);
            }
            s.evaluate(&h.logits[i], &h.q[i], &h.masks[i], hyper, mode, Some(frozen[i])).0
        })
        .collect();
    Ok((losses, signature))
}

/// `argmax_a Q(a) + margin·[a ≠ expert]` (the expert wins ties) and its value.
fn margin_winner(q: &[f64], mask: &[bool], expert: usize, margin: f64) -> (usize, f64) {
    let mut best = expert;
    let mut best_val = q[expert];
    for j in 0..q.len() {
        if !mask[j] {
            continue;
        }
        let val = q[j] + if j == expert { 0.0 } else { margin };
        if val > best_val {
            best = j;
            best_val = val;
        }
    }
    (best, best_val)
}

impl Losses {
    pub fn total(&self) -> f64 {
        self.q + self.pi + self.il + self.entropy
    }
}

/// Loss terms of one transition with their gradients.
///
/// The importance weight and the advantage are treated as constants, as are the
/// bootstrapped target and the policy inside it.
#[derive(Clone, Copy, Debug)]
struct SampleLoss {
    action: usize,
    mu: f64,
    target: f64,
    label: Option<usize>,
    from_oracle: bool,
}

impl SampleLoss {
    /// Returns `(losses, d/d logits, d/d q)`. `frozen` overrides `(rho, advantage)`.
    fn evaluate(
        &self,
        logits: &[f64],
        q: &[f64],
        mask: &[bool],
        hyper: &Hyper,
        mode: Mode,
        frozen: Option<(f64, f64)>,
    ) -> (Losses, Vec<f64>, Vec<f64>, (f64, f64)) {
        let w = hyper.weights;
        let p = masked_softmax(logits, mask, 1.0);
        let mut gl = vec![0.0; logits.len()];
        let mut gq = vec![0.0; q.len()];
        let mut losses = Losses::default();
        let mut used = None;
        let a = self.action;

        if mode != Mode::Bc {
            let td = q[a] - self.target;
            losses.q = w.q * td * td;
            gq[a] += w.q * 2.0 * td;

            let (rho, adv) = *used.insert(frozen.unwrap_or_else(|| {
                let v: f64 = p.iter().zip(q).map(|(x, y)| x * y).sum();
                ((p[a] / self.mu.max(1e-12)).min(hyper.rho_clip), q[a] - v)
            }));
            losses.pi = -w.pi * rho * adv * p[a].max(1e-300).ln();
            for j in 0..gl.len() {
                if mask[j] {
                    let e = if j == a { 1.0 } else { 0.0 };
                    gl[j] += -w.pi * rho * adv * (e - p[j]);
                }
            }

            let entropy: f64 = -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>();
            losses.entropy = -w.entropy * entropy;
            for j in 0..gl.len() {
                if p[j] > 0.0 {
                    gl[j] += w.entropy * p[j] * (p[j].ln() + entropy);
                }
            }
        }

        let used = used.unwrap_or_default();
        let Some(e) = self.label else {
            return (losses, gl, gq, used);
        };
        match mode {
            Mode::Bc => {
                losses.il = -w.il * p[e].max(1e-300).ln();
                for j in 0..gl.len() {
                    if mask[j] {
                        let ind = if j == e { 1.0 } else { 0.0 };
                        gl[j] += w.il * (p[j] - ind);
                    }
                }
            }
            Mode::Ilfos | Mode::Ilfod if mode == Mode::Ilfos || self.from_oracle => {
                let (best, best_val) = margin_winner(q, mask, e, hyper.margin);
                losses.il = w.il * (best_val - q[e]);
                if best != e {
                    gq[best] += w.il;
                    gq[e] -= w.il;
                }
            }
            _ => {}
        }
        (losses, gl, gq, used)
    }
}

/// How a [`PolicyAgent`] picks actions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Behaviour {
    Greedy,
    Boltzmann(f64),
    /// Speak the oracle's choice in the policy's layout.
    Oracle,
}

/// Runs a [`Policy`] inside the dialogue loop and keeps the observations it saw.
pub struct PolicyAgent<'a, R: Rng> {
    pub policy: &'a Policy,
    pub behaviour: Behaviour,
    pub rng: &'a mut R,
    pub observations: Vec<Arc<Observation>>,
}

impl<'a, R: Rng> PolicyAgent<'a, R> {
    pub fn new(policy: &'a Policy, behaviour: Behaviour, rng: &'a mut R) -> Self {
        PolicyAgent {
            policy,
            behaviour,
            rng,
            observations: Vec::new(),
        }
    }
}

impl<R: Rng> Agent for PolicyAgent<'_, R> {
    fn decide(&mut self, belief: &BeliefState, domain: usize, ontology: &Ontology) -> Result<Decision> {
        let obs = self.policy.observe(belief, domain);
        let (index, prob) = match self.behaviour {
            Behaviour::Oracle => (
                self.policy
                    .oracle_label(belief, domain)
                    .ok_or(Error::MissingOracle(domain))?,
                1.0,
            ),
            Behaviour::Greedy => {
                let (logits, _, mask) = self.policy.evaluate(&obs)?;
                let i = greedy(&logits, &mask)?;
                (i, masked_softmax(&logits, &mask, 1.0)[i])
            }
            Behaviour::Boltzmann(tau) => {
                let (logits, _, mask) = self.policy.evaluate(&obs)?;
                boltzmann(&logits, &mask, tau, &mut *self.rng)?
            }
        };
        self.observations.push(Arc::new(obs));
        let summary = self.policy.summary_actions(domain, index)?;
        Ok(Decision {
            acts: expand(&summary, belief, domain, ontology)?,
            action: Some(index),
            behaviour_prob: prob,
            from_oracle: self.behaviour == Behaviour::Oracle,
        })
    }
}

/// Turns an episode played by a [`PolicyAgent`] into transitions.
pub fn episode_transitions(
    policy: &Policy,
    result: &EpisodeResult,
    observations: &[Arc<Observation>],
    mode: Mode,
) -> Result<Vec<Transition<Observation>>> {
    let mut out = Vec::with_capacity(result.turns.len());
    for (t, turn) in result.turns.iter().enumerate() {
        let action = turn
            .decision
            .action
            .ok_or_else(|| Error::Invalid("turn without a policy action".into()))?;
        let label = match mode {
            Mode::Rl => None,
            Mode::Ilfod if !turn.decision.from_oracle => None,
            Mode::Ilfod => Some(action),
            Mode::Bc | Mode::Ilfos => policy.oracle_label(&turn.belief, turn.domain),
        };
        out.push(Transition {
            obs: observations[t].clone(),
            action,
            reward: turn.reward,
            next: (!turn.terminal).then(|| observations[t + 1].clone()),
            mu: turn.decision.behaviour_prob,
            label,
            from_oracle: turn.decision.from_oracle,
            episode_start: t == 0,
        });
    }
    Ok(out)
}

/// Goal-sampling options shared by training and evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoalOptions {
    pub max_domains: usize,
    pub patience: usize,
}

impl Default for GoalOptions {
    fn default() -> Self {
        GoalOptions {
            max_domains: 3,
            patience: crate::dialogue::user::DEFAULT_PATIENCE,
        }
    }
}

/// Per-seed learner: policy, optimiser, replay memory and random streams.
pub struct Trainer {
    pub policy: Policy,
    pub adam: Adam,
    pub buffer: ReplayBuffer<Observation>,
    pub hyper: Hyper,
    pub mode: Mode,
    pub goals: GoalOptions,
    pub episodes: usize,
    rng: ChaCha8Rng,
    goal_rng: ChaCha8Rng,
}

/// Streams derived from one seed: learning, training goals, evaluation goals.
/// Parameter initialisation uses the seed directly.
pub fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

pub const STREAM_LEARN: u64 = 2;
pub const STREAM_TRAIN_GOALS: u64 = 3;
pub const STREAM_EVAL_GOALS: u64 = 4;

impl Trainer {
    pub fn new(mut policy: Policy, mode: Mode, hyper: Hyper, goals: GoalOptions, seed: u64) -> Result<Self> {
        hyper.validate()?;
        policy.set_dropout(hyper.dropout);
        Ok(Trainer {
            adam: Adam::new(policy.params(), hyper.learning_rate),
            policy,
            buffer: ReplayBuffer::new(hyper.buffer_size),
            hyper,
            mode,
            goals,
            episodes: 0,
            rng: stream(seed, STREAM_LEARN),
            goal_rng: stream(seed, STREAM_TRAIN_GOALS),
        })
    }

    /// Plays one training dialogue, stores its transitions and takes one update step.
    pub fn train_episode(&mut self) -> Result<(EpisodeResult, Losses)> {
        let ontology = self.policy.ontology().clone();
        let goal = sample_goal(&ontology, &mut self.goal_rng, self.goals.max_domains);
        let mut user = AgendaUser::new(ontology.clone(), goal, self.goals.patience);
        let oracle = self.mode.uses_oracle() && self.rng.gen_bool(self.hyper.oracle_episode_prob);
        let behaviour = if oracle {
            Behaviour::Oracle
        } else {
            Behaviour::Boltzmann(self.hyper.temperature)
        };
        let mut agent = PolicyAgent::new(&self.policy, behaviour, &mut self.rng);
        let result = run_episode(&ontology, &mut user, &mut agent, EpisodeOptions::default())?;
        let observations = std::mem::take(&mut agent.observations);
        for t in episode_transitions(&self.policy, &result, &observations, self.mode)? {
            self.buffer.push(t);
        }
        let batch = self.buffer.sample(&mut self.rng, self.hyper.batch_size);
        let losses = acer_update(&mut self.policy, &mut self.adam, &batch, &self.hyper, self.mode, &mut self.rng)?;
        self.episodes += 1;
        Ok((result, losses))
    }
}

/// Greedy evaluation on `dialogues` goals drawn from the seed's evaluation stream.
pub fn evaluate_policy(policy: &Policy, dialogues: usize, seed: u64, goals: GoalOptions) -> Result<Vec<EpisodeResult>> {
    let mut rng = stream(seed, STREAM_EVAL_GOALS);
    let mut unused = stream(seed, 0);
    let ontology = policy.ontology().clone();
    (0..dialogues)
        .map(|_| {
            let goal = sample_goal(&ontology, &mut rng, goals.max_domains);
            let mut user = AgendaUser::new(ontology.clone(), goal, goals.patience);
            let mut agent = PolicyAgent::new(policy, Behaviour::Greedy, &mut unused);
            run_episode(&ontology, &mut user, &mut agent, EpisodeOptions::default())
        })
        .collect()
}

/// The oracle on the same evaluation goals as [`evaluate_policy`].
pub fn evaluate_oracle(ontology: &Arc<Ontology>, dialogues: usize, seed: u64, goals: GoalOptions) -> Result<Vec<EpisodeResult>> {
    let mut rng = stream(seed, STREAM_EVAL_GOALS);
    (0..dialogues)
        .map(|_| {
            let goal = sample_goal(ontology, &mut rng, goals.max_domains);
            let mut user = AgendaUser::new(ontology.clone(), goal, goals.patience);
            run_episode(ontology, &mut user, &mut OracleAgent::default(), EpisodeOptions::default())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{ParamId, ParamStore, Tensor};
    use crate::policy::Heads;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Tabular actor-critic: logits and Q are rows of two tables indexed by a one-hot state.
    struct Table {
        params: ParamStore,
        pi: ParamId,
        q: ParamId,
        states: usize,
        actions: usize,
    }

    impl Table {
        fn new(states: usize, actions: usize) -> Self {
            let mut params = ParamStore::new();
            let pi = params.insert("pi", Tensor::zeros(&[actions, states]));
            let q = params.insert("q", Tensor::zeros(&[actions, states]));
            Table { params, pi, q, states, actions }
        }
    }

    impl ActorCritic for Table {
        type Obs = usize;

        fn params(&self) -> &ParamStore {
            &self.params
        }

        fn params_mut(&mut self) -> &mut ParamStore {
            &mut self.params
        }

        fn heads<'p>(&'p self, tape: &mut Tape<'p>, batch: &[&usize], _: bool, _: &mut dyn RngCore) -> Result<Heads> {
            let mut x = vec![0.0; batch.len() * self.states];
            for (r, &&s) in batch.iter().enumerate() {
                x[r * self.states + s] = 1.0;
            }
            let xi = tape.input(batch.len(), self.states, x);
            let l = tape.affine(xi, self.pi, None);
            let q = tape.affine(xi, self.q, None);
            let mut h = Heads::with_capacity(batch.len());
            for r in 0..batch.len() {
                let el: Vec<Option<usize>> = (0..self.actions).map(|a| Some(r * self.actions + a)).collect();
                h.fill(tape, r, l, q, &el, vec![true; self.actions]);
            }
            Ok(h)
        }
    }

    /// Two states, two actions. Action 1 in state 0 moves to state 1 (reward 0);
    /// action 0 stays (reward 0.02). In state 1, action 0 pays 1 and ends; action 1 pays 0 and returns.
    fn step(s: usize, a: usize) -> (f64, Option<usize>) {
        match (s, a) {
            (0, 0) => (0.02, Some(0)),
            (0, _) => (0.0, Some(1)),
            (1, 0) => (1.0, None),
            _ => (0.0, Some(0)),
        }
    }

    fn value_iteration(gamma: f64) -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..10_000 {
            let v = [q[0][0].max(q[0][1]), q[1][0].max(q[1][1])];
            for s in 0..2 {
                for a in 0..2 {
                    let (r, n) = step(s, a);
                    q[s][a] = r + n.map_or(0.0, |n| gamma * v[n]);
                }
            }
        }
        q
    }

    /// Exact Q of a stochastic policy by iterating the Bellman expectation operator.
    fn policy_q(pi: &[[f64; 2]; 2], gamma: f64) -> [[f64; 2]; 2] {
        let mut q = [[0.0f64; 2]; 2];
        for _ in 0..20_000 {
            let v = [0, 1].map(|s| pi[s][0] * q[s][0] + pi[s][1] * q[s][1]);
            for s in 0..2 {
                for a in 0..2 {
                    let (r, n) = step(s, a);
                    q[s][a] = r + n.map_or(0.0, |n| gamma * v[n]);
                }
            }
        }
        q
    }

    #[test]
    fn actor_critic_solves_toy_mdp() {
        let gamma = 0.9;
        let hyper = Hyper {
            gamma,
            batch_size: 32,
            learning_rate: 0.05,
            ..Hyper::default()
        };
        let mut model = Table::new(2, 2);
        let mut adam = Adam::new(&model.params, hyper.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut buffer = ReplayBuffer::new(5_000);
        let obs = [Arc::new(0usize), Arc::new(1usize)];
        for _ in 0..1500 {
            let mut s = 0;
            for t in 0..20 {
                let mut tape = Tape::new(&model.params);
                let h = model.heads(&mut tape, &[&s], false, &mut rng).unwrap();
                let (a, mu) = boltzmann(&h.logits[0], &h.masks[0], 1.0, &mut rng).unwrap();
                let (r, next) = step(s, a);
                let next = if t == 19 { None } else { next };
                buffer.push(Transition {
                    obs: obs[s].clone(),
                    action: a,
                    reward: r,
                    next: next.map(|n| obs[n].clone()),
                    mu,
                    label: None,
                    from_oracle: false,
                    episode_start: t == 0,
                });
                match next {
                    Some(n) => s = n,
                    None => break,
                }
            }
            let batch = buffer.sample(&mut rng, hyper.batch_size);
            acer_update(&mut model, &mut adam, &batch, &hyper, Mode::Rl, &mut rng).unwrap();
        }
        let qstar = value_iteration(gamma);
        let table = |id: ParamId| {
            let t = &model.params.get(id).data;
            [[t[0], t[2]], [t[1], t[3]]]
        };
        let (logits, q) = (table(model.pi), table(model.q));
        let mut pi = [[0.0; 2]; 2];
        for s in 0..2 {
            let p = masked_softmax(&logits[s], &[true, true], 1.0);
            pi[s] = [p[0], p[1]];
            let best = if qstar[s][0] >= qstar[s][1] { 0 } else { 1 };
            assert!(pi[s][best] > 0.8, "state {s}: pi {:?} q* {:?}", pi[s], qstar[s]);
        }
        let qpi = policy_q(&pi, gamma);
        for s in 0..2 {
            for a in 0..2 {
                assert!((q[s][a] - qpi[s][a]).abs() < 0.1, "Q[{s}][{a}] {} vs {}", q[s][a], qpi[s][a]);
            }
        }
    }

    #[test]
    fn sample_loss_gradients_match_finite_differences() {
        let hyper = Hyper::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mask = [true, false, true, true, true];
        for mode in Mode::ALL {
            for trial in 0..20 {
                let logits: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let q: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let s = SampleLoss {
                    action: [0, 2, 3, 4][trial % 4],
                    mu: rng.gen_range(0.05..1.0),
                    target: rng.gen_range(-3.0..3.0),
                    label: Some([4, 3, 2, 0][trial % 4]),
                    from_oracle: trial % 2 == 0,
                };
                let p = masked_softmax(&logits, &mask, 1.0);
                let v: f64 = p.iter().zip(&q).map(|(x, y)| x * y).sum();
                let frozen = Some(((p[s.action] / s.mu).min(hyper.rho_clip), q[s.action] - v));
                let total = |l: &[f64], qq: &[f64]| {
                    let (x, _, _, _) = s.evaluate(l, qq, &mask, &hyper, mode, frozen);
                    x.q + x.pi + x.il + x.entropy
                };
                let (_, gl, gq, _) = s.evaluate(&logits, &q, &mask, &hyper, mode, None);
                let h = 1e-6;
                for j in 0..5 {
                    let mut up = logits.clone();
                    up[j] += h;
                    let mut down = logits.clone();
                    down[j] -= h;
                    let numeric = (total(&up, &q) - total(&down, &q)) / (2.0 * h);
                    assert!((numeric - gl[j]).abs() < 1e-5, "{mode} logit {j}: {numeric} vs {}", gl[j]);
                    let mut up = q.clone();
                    up[j] += h;
                    let mut down = q.clone();
                    down[j] -= h;
                    let numeric = (total(&logits, &up) - total(&logits, &down)) / (2.0 * h);
                    assert!((numeric - gq[j]).abs() < 1e-5, "{mode} q {j}: {numeric} vs {}", gq[j]);
                }
            }
        }
    }

    #[test]
    fn buffer_is_fifo_and_uniform() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..25usize {
            b.push(Transition {
                obs: Arc::new(i),
                action: 0,
                reward: 0.0,
                next: None,
                mu: 1.0,
                label: None,
                from_oracle: i % 2 == 0,
                episode_start: true,
            });
        }
        assert_eq!(b.len(), 10);
        assert_eq!(*b.get(0).obs, 15);
        assert!((b.oracle_fraction() - 0.5).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mut counts = [0usize; 10];
        for i in b.sample_indices(&mut rng, n) {
            counts[i] += 1;
        }
        let e = n as f64 / 10.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 99.9% quantile of chi-squared with 9 degrees of freedom.
        assert!(chi2 < 27.88, "chi2 {chi2}");
    }

    #[test]
    fn greedy_and_boltzmann_respect_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let logits = [5.0, 1.0, 3.0];
        let mask = [false, true, true];
        assert_eq!(greedy(&logits, &mask).unwrap(), 2);
        for _ in 0..200 {
            let (i, p) = boltzmann(&logits, &mask, 1.0, &mut rng).unwrap();
            assert_ne!(i, 0);
            assert!(p > 0.0);
        }
        assert!(matches!(greedy(&logits, &[false; 3]), Err(Error::AllMasked)));
    }
}
