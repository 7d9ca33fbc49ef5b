//! Network bodies: a two-layer MLP with twin heads, and the slot/independent-node GNN.

use std::sync::Arc;

use rand::Rng;

use crate::featurize::{GENERAL_ACTIONS, INDEPENDENT_DIM, SLOT_DIM};
use crate::nncore::{NodeId, ParamId, ParamStore, Segments, Tape};

pub const HIDDEN: usize = 128;
pub const GNN_HIDDEN: usize = 32;
pub const DROPOUT: f64 = 0.1;

/// Two hidden ReLU layers, then separate policy-logit and Q heads.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpIds {
    pub input: usize,
    pub outputs: usize,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
    wp: ParamId,
    bp: ParamId,
    wq: ParamId,
    bq: ParamId,
}

impl MlpIds {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, input: usize, outputs: usize, rng: &mut R) -> Self {
        let p = |s: &str| format!("{prefix}.{s}");
        MlpIds {
            input,
            outputs,
            w1: store.weight(&p("hidden1.weight"), HIDDEN, input, rng),
            b1: store.bias(&p("hidden1.bias"), HIDDEN, input, rng),
            w2: store.weight(&p("hidden2.weight"), HIDDEN, HIDDEN, rng),
            b2: store.bias(&p("hidden2.bias"), HIDDEN, HIDDEN, rng),
            wp: store.weight(&p("policy.weight"), outputs, HIDDEN, rng),
            bp: store.bias(&p("policy.bias"), outputs, HIDDEN, rng),
            wq: store.weight(&p("q.weight"), outputs, HIDDEN, rng),
            bq: store.bias(&p("q.bias"), outputs, HIDDEN, rng),
        }
    }

    /// `x: [batch, input]` → `(logits, q)`, each `[batch, outputs]`.
    pub fn forward<R: Rng + ?Sized>(&self, tape: &mut Tape, x: NodeId, dropout: f64, rng: &mut R) -> (NodeId, NodeId) {
        let p = dropout;
        let h = tape.affine(x, self.w1, Some(self.b1));
        let h = tape.relu(h);
        let h = tape.dropout(h, p, rng);
        let h = tape.affine(h, self.w2, Some(self.b2));
        let h = tape.relu(h);
        let h = tape.dropout(h, p, rng);
        (tape.affine(h, self.wp, Some(self.bp)), tape.affine(h, self.wq, Some(self.bq)))
    }
}

/// Parameters of one message-passing network. Slot nodes share all slot weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GnnIds {
    ws: ParamId,
    bs: ParamId,
    wi: ParamId,
    bi: ParamId,
    s2s: ParamId,
    i2s: ParamId,
    s2i: ParamId,
    slot_pi_w: ParamId,
    slot_pi_b: ParamId,
    slot_q_w: ParamId,
    slot_q_b: ParamId,
    gen_pi_w: ParamId,
    gen_pi_b: ParamId,
    gen_q_w: ParamId,
    gen_q_b: ParamId,
}

pub struct GnnOutput {
    /// `[Σ slots, 2]`: request / inform per slot node.
    pub slot_logits: NodeId,
    pub slot_q: NodeId,
    /// `[graphs, GENERAL_ACTIONS]`.
    pub general_logits: NodeId,
    pub general_q: NodeId,
}

const GNN_NAMES: [&str; 15] = [
    "slot_input.weight",
    "slot_input.bias",
    "independent_input.weight",
    "independent_input.bias",
    "slot_to_slot.weight",
    "independent_to_slot.weight",
    "slot_to_independent.weight",
    "slot_policy.weight",
    "slot_policy.bias",
    "slot_q.weight",
    "slot_q.bias",
    "general_policy.weight",
    "general_policy.bias",
    "general_q.weight",
    "general_q.bias",
];

impl GnnIds {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, rng: &mut R) -> Self {
        let p = |s: &str| format!("{prefix}.{s}");
        let h = GNN_HIDDEN;
        GnnIds {
            ws: store.weight(&p(GNN_NAMES[0]), h, SLOT_DIM, rng),
            bs: store.bias(&p(GNN_NAMES[1]), h, SLOT_DIM, rng),
            wi: store.weight(&p(GNN_NAMES[2]), h, INDEPENDENT_DIM, rng),
            bi: store.bias(&p(GNN_NAMES[3]), h, INDEPENDENT_DIM, rng),
            s2s: store.weight(&p(GNN_NAMES[4]), h, h, rng),
            i2s: store.weight(&p(GNN_NAMES[5]), h, h, rng),
            s2i: store.weight(&p(GNN_NAMES[6]), h, h, rng),
            slot_pi_w: store.weight(&p(GNN_NAMES[7]), 2, h, rng),
            slot_pi_b: store.bias(&p(GNN_NAMES[8]), 2, h, rng),
            slot_q_w: store.weight(&p(GNN_NAMES[9]), 2, h, rng),
            slot_q_b: store.bias(&p(GNN_NAMES[10]), 2, h, rng),
            gen_pi_w: store.weight(&p(GNN_NAMES[11]), GENERAL_ACTIONS, h, rng),
            gen_pi_b: store.bias(&p(GNN_NAMES[12]), GENERAL_ACTIONS, h, rng),
            gen_q_w: store.weight(&p(GNN_NAMES[13]), GENERAL_ACTIONS, h, rng),
            gen_q_b: store.bias(&p(GNN_NAMES[14]), GENERAL_ACTIONS, h, rng),
        }
    }

    /// One round of message passing over stacked graphs.
    ///
    /// `slots` is `[Σ n_g, SLOT_DIM]` grouped by `seg`; `independent` is `[graphs, INDEPENDENT_DIM]`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        slots: NodeId,
        independent: NodeId,
        seg: &Arc<Segments>,
        dropout: f64,
        rng: &mut R,
    ) -> GnnOutput {
        let p = dropout;
        let hs0 = tape.affine(slots, self.ws, Some(self.bs));
        let hs0 = tape.relu(hs0);
        let hs0 = tape.dropout(hs0, p, rng);
        let hi0 = tape.affine(independent, self.wi, Some(self.bi));
        let hi0 = tape.relu(hi0);
        let hi0 = tape.dropout(hi0, p, rng);

        let others = tape.mean_excluding(hs0, seg);
        let from_slots = tape.affine(others, self.s2s, None);
        let from_indep = tape.affine(hi0, self.i2s, None);
        let hs1 = tape.add(from_slots, hs0);
        let hs1 = tape.add_segment(hs1, from_indep, seg);
        let hs1 = tape.relu(hs1);
        let hs1 = tape.dropout(hs1, p, rng);

        let pooled = tape.segment_mean(hs0, seg);
        let to_indep = tape.affine(pooled, self.s2i, None);
        let hi1 = tape.add(to_indep, hi0);
        let hi1 = tape.relu(hi1);
        let hi1 = tape.dropout(hi1, p, rng);

        GnnOutput {
            slot_logits: tape.affine(hs1, self.slot_pi_w, Some(self.slot_pi_b)),
            slot_q: tape.affine(hs1, self.slot_q_w, Some(self.slot_q_b)),
            general_logits: tape.affine(hi1, self.gen_pi_w, Some(self.gen_pi_b)),
            general_q: tape.affine(hi1, self.gen_q_w, Some(self.gen_q_b)),
        }
    }
}
