//! Trainable dialogue policies.
//!
//! | kind | input | parameters |
//! |---|---|---|
//! | `fnn` | DIP vector padded to the largest domain | one MLP shared by all domains |
//! | `fnn-ref` | flat state | one MLP over the composite-action catalogue |
//! | `hfnn` | DIP vector of the domain | one MLP per domain |
//! | `hgnn` | DIP graph | one GNN per domain |
//! | `uhgnn` | DIP graph | one GNN shared by all domains |

pub mod catalogue;
pub mod nets;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::BeliefState;
use crate::dialogue::oracle::oracle_action;
use crate::error::{Error, Result};
use crate::featurize::{
    action_at, action_index, dip_state, flat_state_indices, ActionSpace, DipState, FlatLayout, SummaryAction,
    GENERAL_ACTIONS, INDEPENDENT_DIM, SLOT_DIM,
};
use crate::nncore::{load_checkpoint, save_checkpoint, Adam, Checkpoint, NodeId, ParamStore, Segments, Tape};
use crate::ontology::Ontology;

pub use catalogue::{Catalogue, CompositeAction};
pub use nets::{GnnIds, MlpIds};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Fnn,
    FnnRef,
    Hfnn,
    Hgnn,
    Uhgnn,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Fnn,
        PolicyKind::FnnRef,
        PolicyKind::Hfnn,
        PolicyKind::Hgnn,
        PolicyKind::Uhgnn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Fnn => "fnn",
            PolicyKind::FnnRef => "fnn-ref",
            PolicyKind::Hfnn => "hfnn",
            PolicyKind::Hgnn => "hgnn",
            PolicyKind::Uhgnn => "uhgnn",
        }
    }

    pub fn uses_flat_state(self) -> bool {
        self == PolicyKind::FnnRef
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown policy `{s}` (expected one of fnn, fnn-ref, hfnn, hgnn, uhgnn)"
                ))
            })
    }
}

/// Policy input for one turn.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation {
    Dip(DipState),
    /// Non-zero coordinates of the binary flat state.
    Flat { domain: usize, active: Vec<u32> },
}

impl Observation {
    pub fn domain(&self) -> usize {
        match self {
            Observation::Dip(d) => d.domain,
            Observation::Flat { domain, .. } => *domain,
        }
    }
}

/// Forward outputs for a batch, plus the links needed to push gradients back.
#[derive(Clone, Debug, Default)]
pub struct Heads {
    pub logits: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
    /// Per sample and action: `(logit node, q node, element)`.
    links: Vec<Vec<Option<(NodeId, NodeId, usize)>>>,
}

impl Heads {
    pub fn with_capacity(n: usize) -> Self {
        Heads {
            logits: vec![Vec::new(); n],
            q: vec![Vec::new(); n],
            masks: vec![Vec::new(); n],
            links: vec![Vec::new(); n],
        }
    }

    /// Fills sample `i` from rows of head nodes: action `a` reads element `elements[a]`.
    pub fn fill(&mut self, tape: &Tape, i: usize, logit_node: NodeId, q_node: NodeId, elements: &[Option<usize>], mask: Vec<bool>) {
        let lv = tape.value(logit_node);
        let qv = tape.value(q_node);
        self.logits[i] = elements.iter().map(|e| e.map_or(0.0, |k| lv[k])).collect();
        self.q[i] = elements.iter().map(|e| e.map_or(0.0, |k| qv[k])).collect();
        self.links[i] = elements.iter().map(|e| e.map(|k| (logit_node, q_node, k))).collect();
        self.masks[i] = mask;
    }

    /// Like [`Heads::fill`] with per-action nodes.
    pub fn fill_mixed(&mut self, tape: &Tape, i: usize, links: Vec<Option<(NodeId, NodeId, usize)>>, mask: Vec<bool>) {
        self.logits[i] = links.iter().map(|l| l.map_or(0.0, |(n, _, k)| tape.value(n)[k])).collect();
        self.q[i] = links.iter().map(|l| l.map_or(0.0, |(_, n, k)| tape.value(n)[k])).collect();
        self.links[i] = links;
        self.masks[i] = mask;
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    /// Seeds for [`Tape::backward`] from gradients with respect to logits and Q values.
    pub fn seeds(&self, tape: &Tape, grad_logits: &[Vec<f64>], grad_q: &[Vec<f64>]) -> Vec<(NodeId, Vec<f64>)> {
        let mut acc: HashMap<NodeId, Vec<f64>> = HashMap::new();
        let mut add = |node: NodeId, k: usize, g: f64| {
            if g != 0.0 {
                let (r, c) = tape.shape(node);
                acc.entry(node).or_insert_with(|| vec![0.0; r * c])[k] += g;
            }
        };
        for (i, links) in self.links.iter().enumerate() {
            for (a, link) in links.iter().enumerate() {
                if let Some((ln, qn, k)) = *link {
                    add(ln, k, grad_logits[i][a]);
                    add(qn, k, grad_q[i][a]);
                }
            }
        }
        let mut seeds: Vec<_> = acc.into_iter().collect();
        seeds.sort_by_key(|(n, _)| n.0);
        seeds
    }
}

/// Anything with a policy head and a Q head over a masked discrete action set.
pub trait ActorCritic {
    type Obs;
    fn params(&self) -> &ParamStore;
    fn params_mut(&mut self) -> &mut ParamStore;
    fn heads<'p>(&'p self, tape: &mut Tape<'p>, batch: &[&Self::Obs], train: bool, rng: &mut dyn RngCore) -> Result<Heads>;
}

#[derive(Clone, Debug, PartialEq)]
enum Arch {
    Fnn(MlpIds),
    FnnRef(MlpIds),
    Hfnn(Vec<MlpIds>),
    Hgnn(Vec<GnnIds>),
    Uhgnn(GnnIds),
}

#[derive(Clone, Debug)]
pub struct Policy {
    kind: PolicyKind,
    ontology: Arc<Ontology>,
    params: ParamStore,
    arch: Arch,
    max_slots: usize,
    layout: FlatLayout,
    catalogue: Option<Catalogue>,
    dropout: f64,
}

fn prefix(kind: PolicyKind, ontology: &Ontology, domain: usize) -> String {
    match kind {
        PolicyKind::Fnn => "fnn".into(),
        PolicyKind::FnnRef => "fnn_ref".into(),
        PolicyKind::Hfnn => format!("hfnn.{}", ontology.domain(domain).name),
        PolicyKind::Hgnn => format!("hgnn.{}", ontology.domain(domain).name),
        PolicyKind::Uhgnn => "gnn".into(),
    }
}

impl Policy {
    pub fn new(kind: PolicyKind, ontology: Arc<Ontology>, seed: u64) -> Result<Self> {
        let catalogue = match kind {
            PolicyKind::FnnRef => Some(Catalogue::for_ontology(&ontology)?),
            _ => None,
        };
        Ok(Self::build(kind, ontology, catalogue, seed))
    }

    fn build(kind: PolicyKind, ontology: Arc<Ontology>, catalogue: Option<Catalogue>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let max_slots = ontology.max_slots();
        let layout = FlatLayout::new(&ontology);
        let ont = &ontology;
        let arch = match kind {
            PolicyKind::Fnn => Arch::Fnn(MlpIds::new(
                &mut params,
                &prefix(kind, ont, 0),
                INDEPENDENT_DIM + max_slots * SLOT_DIM,
                2 * max_slots + GENERAL_ACTIONS,
                &mut rng,
            )),
            PolicyKind::FnnRef => Arch::FnnRef(MlpIds::new(
                &mut params,
                &prefix(kind, ont, 0),
                layout.dim,
                catalogue.as_ref().map_or(0, Catalogue::len),
                &mut rng,
            )),
            PolicyKind::Hfnn => Arch::Hfnn(
                (0..ont.len())
                    .map(|d| {
                        let n = ont.domain(d).slot_count();
                        MlpIds::new(
                            &mut params,
                            &prefix(kind, ont, d),
                            INDEPENDENT_DIM + n * SLOT_DIM,
                            2 * n + GENERAL_ACTIONS,
                            &mut rng,
                        )
                    })
                    .collect(),
            ),
            PolicyKind::Hgnn => Arch::Hgnn(
                (0..ont.len())
                    .map(|d| GnnIds::new(&mut params, &prefix(kind, ont, d), &mut rng))
                    .collect(),
            ),
            PolicyKind::Uhgnn => Arch::Uhgnn(GnnIds::new(&mut params, &prefix(kind, ont, 0), &mut rng)),
        };
        Policy {
            kind,
            ontology,
            params,
            arch,
            max_slots,
            layout,
            catalogue,
            dropout: nets::DROPOUT,
        }
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// Dropout rate applied after hidden layers in training mode.
    pub fn set_dropout(&mut self, rate: f64) {
        self.dropout = rate;
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    pub fn catalogue(&self) -> Option<&Catalogue> {
        self.catalogue.as_ref()
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    pub fn observe(&self, belief: &BeliefState, domain: usize) -> Observation {
        if self.kind.uses_flat_state() {
            Observation::Flat {
                domain,
                active: flat_state_indices(belief, &self.ontology, &self.layout),
            }
        } else {
            Observation::Dip(dip_state(belief, domain, &self.ontology))
        }
    }

    /// Size of the policy's action vector in `domain`.
    pub fn action_count(&self, domain: usize) -> usize {
        match self.kind {
            PolicyKind::Fnn => 2 * self.max_slots + GENERAL_ACTIONS,
            PolicyKind::FnnRef => self.catalogue.as_ref().map_or(0, Catalogue::len),
            _ => 2 * self.ontology.domain(domain).slot_count() + GENERAL_ACTIONS,
        }
    }

    pub fn mask(&self, domain: usize) -> Vec<bool> {
        if let Some(cat) = &self.catalogue {
            return cat.mask(domain);
        }
        let native = ActionSpace::for_domain(&self.ontology, domain).mask;
        let n = native.len() - GENERAL_ACTIONS;
        let slots = self.action_count(domain) - GENERAL_ACTIONS;
        let mut mask = vec![false; slots];
        mask[..n].copy_from_slice(&native[..n]);
        mask.extend_from_slice(&native[n..]);
        mask
    }

    /// Summary actions spoken for policy action `index` in `domain`.
    pub fn summary_actions(&self, domain: usize, index: usize) -> Result<Vec<SummaryAction>> {
        let masked = || Error::MaskedAction {
            domain: self.ontology.domain(domain).name.clone(),
            index,
        };
        if !self.mask(domain).get(index).copied().unwrap_or(false) {
            return Err(masked());
        }
        if let Some(cat) = &self.catalogue {
            return Ok(cat.summary(&self.ontology, index));
        }
        let slots = self.action_count(domain) - GENERAL_ACTIONS;
        action_at(index, slots).map(|a| vec![a]).ok_or_else(masked)
    }

    /// Policy index of a single summary action (composite catalogues use singletons).
    pub fn index_of(&self, domain: usize, action: SummaryAction) -> Option<usize> {
        if let Some(cat) = &self.catalogue {
            let native = ActionSpace::for_domain(&self.ontology, domain).index_of(action)?;
            return cat.position(domain, &[native]);
        }
        action_index(action, self.action_count(domain) - GENERAL_ACTIONS)
    }

    /// The oracle's choice in the policy's action layout.
    pub fn oracle_label(&self, belief: &BeliefState, domain: usize) -> Option<usize> {
        match &self.catalogue {
            Some(cat) => cat.oracle_label(belief, domain, &self.ontology),
            None => self.index_of(domain, oracle_action(belief, domain, &self.ontology)),
        }
    }

    /// Inference-mode outputs for one observation.
    pub fn evaluate(&self, obs: &Observation) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
        let mut tape = Tape::new(&self.params);
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut h = self.heads(&mut tape, &[obs], false, &mut rng)?;
        Ok((h.logits.pop().unwrap(), h.q.pop().unwrap(), h.masks.pop().unwrap()))
    }

    /// Parameter table: one line per tensor, then the total.
    pub fn describe(&self) -> String {
        let mut out = format!(
            "policy {} over {} domain(s), max slots {}\n",
            self.kind,
            self.ontology.len(),
            self.max_slots
        );
        if let Some(cat) = &self.catalogue {
            out.push_str(&format!("catalogue: {} composite actions\n", cat.len()));
        }
        let width = self.params.iter().map(|(n, _)| n.len()).max().unwrap_or(4).max(4);
        out.push_str(&format!("{:<width$}  {:>12}  {:>8}\n", "name", "shape", "count"));
        for (name, t) in self.params.iter() {
            let shape = t.shape.iter().map(ToString::to_string).collect::<Vec<_>>().join("x");
            out.push_str(&format!("{name:<width$}  {shape:>12}  {:>8}\n", t.len()));
        }
        out.push_str(&format!("{:<width$}  {:>12}  {:>8}\n", "total", "", self.param_count()));
        out
    }

    pub fn save(&self, path: &Path, optimizer: Option<&Adam>) -> Result<()> {
        let metadata = serde_json::json!({
            "kind": self.kind,
            "ontology": self.ontology.fingerprint(),
            "domains": self.ontology.domains().iter().map(|d| d.name.as_str()).collect::<Vec<_>>(),
            "catalogue": self.catalogue,
        });
        save_checkpoint(
            path,
            &Checkpoint {
                metadata,
                params: self.params.clone(),
                optimizer: optimizer.cloned(),
            },
        )
    }

    /// Domain names recorded in a checkpoint, if any.
    pub fn checkpoint_domains(path: &Path) -> Result<Option<Vec<String>>> {
        let ck = load_checkpoint(path)?;
        Ok(serde_json::from_value(ck.metadata["domains"].clone()).ok())
    }

    /// Loads a checkpoint written for the same ontology.
    pub fn load(path: &Path, ontology: Arc<Ontology>) -> Result<(Self, Option<Adam>)> {
        let ck = load_checkpoint(path)?;
        let kind: PolicyKind = serde_json::from_value(ck.metadata["kind"].clone())
            .map_err(|e| Error::Checkpoint(format!("policy kind: {e}")))?;
        let fingerprint = ck.metadata["ontology"].as_str().unwrap_or_default();
        if fingerprint != ontology.fingerprint() {
            return Err(Error::Checkpoint(format!(
                "{} was trained on a different ontology",
                path.display()
            )));
        }
        let catalogue: Option<Catalogue> = serde_json::from_value(ck.metadata["catalogue"].clone())
            .map_err(|e| Error::Checkpoint(format!("catalogue: {e}")))?;
        if kind == PolicyKind::FnnRef && catalogue.is_none() {
            return Err(Error::Checkpoint("missing composite-action catalogue".into()));
        }
        let mut policy = Self::build(kind, ontology, catalogue, 0);
        policy
            .params
            .copy_from(&ck.params)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Ok((policy, ck.optimizer))
    }

    fn group_of(&self, domain: usize) -> usize {
        match self.arch {
            Arch::Hfnn(_) | Arch::Hgnn(_) => domain,
            _ => 0,
        }
    }

    fn dip<'a>(&self, obs: &'a Observation) -> Result<&'a DipState> {
        match obs {
            Observation::Dip(d) => Ok(d),
            Observation::Flat { .. } => Err(Error::Shape(format!("{} expects a DIP observation", self.kind))),
        }
    }

    fn check_domain(&self, obs: &Observation) -> Result<usize> {
        let d = obs.domain();
        if d >= self.ontology.len() {
            return Err(Error::Shape(format!("observation domain {d} out of range")));
        }
        if let Observation::Dip(dip) = obs {
            if dip.slot_count() != self.ontology.domain(d).slot_count() {
                return Err(Error::Shape(format!(
                    "observation has {} slots, domain {} has {}",
                    dip.slot_count(),
                    self.ontology.domain(d).name,
                    self.ontology.domain(d).slot_count()
                )));
            }
        }
        Ok(d)
    }
}

impl ActorCritic for Policy {
    type Obs = Observation;

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn heads<'p>(&'p self, tape: &mut Tape<'p>, batch: &[&Observation], train: bool, rng: &mut dyn RngCore) -> Result<Heads> {
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, obs) in batch.iter().enumerate() {
            let g = self.group_of(self.check_domain(obs)?);
            match groups.iter_mut().find(|(k, _)| *k == g) {
                Some((_, members)) => members.push(i),
                None => groups.push((g, vec![i])),
            }
        }
        let mut heads = Heads::with_capacity(batch.len());
        let dropout = if train { self.dropout } else { 0.0 };
        for (g, members) in groups {
            match &self.arch {
                Arch::Fnn(ids) | Arch::FnnRef(ids) => self.mlp_group(tape, ids, batch, &members, &mut heads, dropout, rng)?,
                Arch::Hfnn(nets) => self.mlp_group(tape, &nets[g], batch, &members, &mut heads, dropout, rng)?,
                Arch::Hgnn(nets) => self.gnn_group(tape, &nets[g], batch, &members, &mut heads, dropout, rng)?,
                Arch::Uhgnn(ids) => self.gnn_group(tape, ids, batch, &members, &mut heads, dropout, rng)?,
            }
        }
        Ok(heads)
    }
}

impl Policy {
    #[allow(clippy::too_many_arguments)]
    fn mlp_group<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        ids: &MlpIds,
        batch: &[&Observation],
        members: &[usize],
        heads: &mut Heads,
        dropout: f64,
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        let mut x = vec![0.0; members.len() * ids.input];
        for (r, &i) in members.iter().enumerate() {
            let row = &mut x[r * ids.input..(r + 1) * ids.input];
            match batch[i] {
                Observation::Flat { active, .. } => {
                    if self.kind != PolicyKind::FnnRef {
                        return Err(Error::Shape(format!("{} expects a DIP observation", self.kind)));
                    }
                    for &k in active {
                        *row.get_mut(k as usize)
                            .ok_or_else(|| Error::Shape(format!("flat index {k} out of range")))? = 1.0;
                    }
                }
                Observation::Dip(dip) => {
                    if self.kind == PolicyKind::FnnRef {
                        return Err(Error::Shape("fnn-ref expects a flat observation".into()));
                    }
                    let slots = (ids.input - INDEPENDENT_DIM) / SLOT_DIM;
                    row.copy_from_slice(&dip.padded(slots));
                }
            }
        }
        let xi = tape.input(members.len(), ids.input, x);
        let (logits, q) = ids.forward(tape, xi, dropout, rng);
        for (r, &i) in members.iter().enumerate() {
            let domain = batch[i].domain();
            let elements: Vec<Option<usize>> = (0..ids.outputs).map(|a| Some(r * ids.outputs + a)).collect();
            heads.fill(tape, i, logits, q, &elements, self.mask(domain));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn gnn_group<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        ids: &GnnIds,
        batch: &[&Observation],
        members: &[usize],
        heads: &mut Heads,
        dropout: f64,
        rng: &mut dyn RngCore,
    ) -> Result<()> {
        let dips: Vec<&DipState> = members.iter().map(|&i| self.dip(batch[i])).collect::<Result<_>>()?;
        let sizes: Vec<usize> = dips.iter().map(|d| d.slot_count()).collect();
        let seg = Segments::from_sizes(&sizes);
        let mut slots = Vec::with_capacity(seg.total_rows() * SLOT_DIM);
        let mut indep = Vec::with_capacity(dips.len() * INDEPENDENT_DIM);
        for d in &dips {
            d.slot_rows().for_each(|r| slots.extend_from_slice(r));
            indep.extend_from_slice(&d.independent);
        }
        let s = tape.input(seg.total_rows(), SLOT_DIM, slots);
        let ind = tape.input(dips.len(), INDEPENDENT_DIM, indep);
        let out = ids.forward(tape, s, ind, &seg, dropout, rng);
        for (r, &i) in members.iter().enumerate() {
            let range = seg.ranges[r].clone();
            let mut links = Vec::with_capacity(2 * range.len() + GENERAL_ACTIONS);
            for row in range {
                for k in 0..2 {
                    links.push(Some((out.slot_logits, out.slot_q, 2 * row + k)));
                }
            }
            for g in 0..GENERAL_ACTIONS {
                links.push(Some((out.general_logits, out.general_q, r * GENERAL_ACTIONS + g)));
            }
            heads.fill_mixed(tape, i, links, self.mask(batch[i].domain()));
        }
        Ok(())
    }
}

/// Masked softmax of `logits / temperature`; masked entries get probability 0.
pub fn masked_softmax(logits: &[f64], mask: &[bool], temperature: f64) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(l, _)| l / temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits
        .iter()
        .zip(mask)
        .map(|(l, m)| if *m { (l / temperature - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::act::DialogueAct;

    fn ont() -> Arc<Ontology> {
        Arc::new(Ontology::bundled())
    }

    #[test]
    fn gnn_parameter_count_is_domain_independent() {
        let o = ont();
        let h = GNN_PARAMS;
        assert_eq!(Policy::new(PolicyKind::Uhgnn, o.clone(), 0).unwrap().param_count(), h);
        let small = Arc::new(o.restrict(&["restaurant"]).unwrap());
        assert_eq!(Policy::new(PolicyKind::Uhgnn, small, 0).unwrap().param_count(), h);
        assert_eq!(Policy::new(PolicyKind::Hgnn, o.clone(), 0).unwrap().param_count(), h * o.len());
    }

    const GNN_PARAMS: usize = {
        let h = 32;
        (7 * h + h) + (19 * h + h) + 3 * h * h + 2 * (2 * h + 2) + 2 * (6 * h + 6)
    };

    #[test]
    fn fnn_parameter_count_closed_form() {
        let o = ont();
        let input = 19 + o.max_slots() * 7;
        let out = 2 * o.max_slots() + 6;
        let expected = input * 128 + 128 + 128 * 128 + 128 + 2 * (128 * out + out);
        assert_eq!(Policy::new(PolicyKind::Fnn, o, 0).unwrap().param_count(), expected);
    }

    #[test]
    fn masks_follow_slot_kinds() {
        let o = ont();
        for kind in PolicyKind::ALL {
            let p = Policy::new(kind, o.clone(), 1).unwrap();
            for d in 0..o.len() {
                let mask = p.mask(d);
                assert_eq!(mask.len(), p.action_count(d));
                for (i, ok) in mask.iter().enumerate() {
                    assert_eq!(p.summary_actions(d, i).is_ok(), *ok);
                }
            }
        }
    }

    #[test]
    fn every_kind_produces_finite_heads() {
        let o = ont();
        let b = BeliefState::new(&o)
            .update(&o, &[DialogueAct::inform("hotel", "area", "north")])
            .unwrap();
        for kind in PolicyKind::ALL {
            let p = Policy::new(kind, o.clone(), 2).unwrap();
            for d in 0..o.len() {
                let (logits, q, mask) = p.evaluate(&p.observe(&b, d)).unwrap();
                assert_eq!(logits.len(), p.action_count(d));
                assert!(logits.iter().chain(&q).all(|x| x.is_finite()));
                assert!(mask.iter().any(|&m| m));
            }
        }
    }

    #[test]
    fn wrong_observation_is_rejected() {
        let o = ont();
        let b = BeliefState::new(&o);
        let gnn = Policy::new(PolicyKind::Uhgnn, o.clone(), 0).unwrap();
        let flat = Policy::new(PolicyKind::FnnRef, o.clone(), 0).unwrap();
        assert!(gnn.evaluate(&flat.observe(&b, 0)).is_err());
        assert!(flat.evaluate(&gnn.observe(&b, 0)).is_err());
    }

    #[test]
    fn oracle_label_is_valid() {
        let o = ont();
        let b = BeliefState::new(&o)
            .update(&o, &[DialogueAct::request("police", "phone")])
            .unwrap();
        let police = o.domain_index("police").unwrap();
        for kind in PolicyKind::ALL {
            let p = Policy::new(kind, o.clone(), 0).unwrap();
            let label = p.oracle_label(&b, police).unwrap();
            assert!(p.mask(police)[label], "{kind}");
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let o = ont();
        let dir = tempfile::tempdir().unwrap();
        for kind in PolicyKind::ALL {
            let p = Policy::new(kind, o.clone(), 5).unwrap();
            let path = dir.path().join(format!("{kind}.ckpt"));
            p.save(&path, None).unwrap();
            let (q, adam) = Policy::load(&path, o.clone()).unwrap();
            assert!(adam.is_none());
            assert_eq!(p.params, q.params);
            assert_eq!(p.catalogue, q.catalogue);
        }
        let other = Arc::new(o.restrict(&["hotel"]).unwrap());
        assert!(Policy::load(&dir.path().join("uhgnn.ckpt"), other).is_err());
    }

    #[test]
    fn softmax_respects_mask() {
        let p = masked_softmax(&[1.0, 50.0, 2.0], &[true, false, true], 1.0);
        assert_eq!(p[1], 0.0);
        assert!((p[0] + p[2] - 1.0).abs() < 1e-12);
        assert!((p[2] / p[0] - std::f64::consts::E).abs() < 1e-9);
    }
}
