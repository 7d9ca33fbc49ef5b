//! End-to-end gradient check: analytic parameter gradients of the full training
//! loss against central differences.
//!
//! The batch comes from a few real training dialogues. Bootstrapped targets,
//! importance weights and advantages are held fixed (the update treats them as
//! constants), and every loss evaluation replays the same dropout masks.
//! Differences are taken per sample and per loss term before summing, so terms
//! that a coordinate does not touch cancel exactly instead of drowning the
//! signal in rounding error.
//!
//! A coordinate whose stencil `θ ± ε` crosses a kink (some ReLU changes sign or
//! a margin winner changes) has no central-difference derivative to compare
//! with; it is counted in `kinks` and replaced by another random coordinate.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::learn::{bootstrap_targets, loss_and_gradients, sample_losses, stream, GoalOptions, Hyper, Mode, Trainer, Transition};
use crate::ontology::Ontology;
use crate::policy::{ActorCritic, Observation, Policy, PolicyKind};

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;
/// Gradients smaller than this are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Random stream for batch and coordinate sampling, apart from the trainer's.
const STREAM_BATCH: u64 = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckReport {
    pub policy: PolicyKind,
    pub mode: Mode,
    pub seed: u64,
    pub coordinates: usize,
    /// Coordinates skipped because their stencil straddled a kink.
    pub kinks: usize,
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: (String, usize),
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= GRADCHECK_TOL
    }
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR)
}

#[derive(Clone, Copy, Debug)]
pub struct GradcheckOptions {
    pub warmup_dialogues: usize,
    pub batch: usize,
    /// Random coordinates per tensor, on top of its largest-gradient coordinate.
    pub per_tensor: usize,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            warmup_dialogues: 3,
            batch: 12,
            per_tensor: 4,
        }
    }
}

pub fn gradcheck(
    kind: PolicyKind,
    mode: Mode,
    seed: u64,
    ontology: &Arc<Ontology>,
    options: GradcheckOptions,
) -> Result<GradcheckReport> {
    let hyper = Hyper {
        batch_size: options.batch,
        ..Hyper::default()
    };
    let goals = GoalOptions {
        max_domains: 2,
        ..GoalOptions::default()
    };
    let policy = Policy::new(kind, ontology.clone(), seed)?;
    let mut trainer = Trainer::new(policy, mode, hyper, goals, seed)?;
    for _ in 0..options.warmup_dialogues {
        trainer.train_episode()?;
    }
    let mut rng = stream(seed, STREAM_BATCH);
    let owned: Vec<Transition<Observation>> = trainer
        .buffer
        .sample(&mut rng, options.batch)
        .into_iter()
        .cloned()
        .collect();
    let batch: Vec<&Transition<Observation>> = owned.iter().collect();
    let mut policy = trainer.policy;
    let targets = bootstrap_targets(&policy, &batch, &hyper, mode, &mut rng)?;
    let mask_seed: u64 = rng.gen();
    let masks = || ChaCha8Rng::seed_from_u64(mask_seed);

    let (_, grads, frozen) = loss_and_gradients(&policy, &batch, &targets, &hyper, mode, true, &mut masks(), None)?;
    let loss_at = |p: &Policy| sample_losses(p, &batch, &targets, &hyper, mode, true, &mut masks(), &frozen);
    let n = batch.len() as f64;

    let names: Vec<String> = policy.params().iter().map(|(n, _)| n.to_string()).collect();
    let mut report = GradcheckReport {
        policy: kind,
        mode,
        seed,
        coordinates: 0,
        kinks: 0,
        max_rel_error: 0.0,
        worst: (String::new(), 0),
    };
    let (_, centre) = loss_at(&policy)?;
    for (t, g) in grads.iter().enumerate() {
        let len = g.data.len();
        let largest = (0..len)
            .max_by(|&a, &b| g.data[a].abs().total_cmp(&g.data[b].abs()))
            .unwrap_or(0);
        let mut queue = vec![largest];
        queue.extend(sample(&mut rng, len, (4 * options.per_tensor).min(len)).into_iter().filter(|&i| i != largest));
        let mut checked = 0;
        for i in queue {
            if checked > options.per_tensor {
                break;
            }
            let original = policy.params().tensors()[t].data[i];
            policy.params_mut().tensors_mut()[t].data[i] = original + GRADCHECK_EPS;
            let (up, sig_up) = loss_at(&policy)?;
            policy.params_mut().tensors_mut()[t].data[i] = original - GRADCHECK_EPS;
            let (down, sig_down) = loss_at(&policy)?;
            policy.params_mut().tensors_mut()[t].data[i] = original;
            if sig_up != centre || sig_down != centre {
                report.kinks += 1;
                continue;
            }
            checked += 1;
            let numeric = up
                .iter()
                .zip(&down)
                .map(|(u, d)| (u.q - d.q) + (u.pi - d.pi) + (u.il - d.il) + (u.entropy - d.entropy))
                .sum::<f64>()
                / (2.0 * GRADCHECK_EPS * n);
            let err = relative_error(g.data[i], numeric);
            report.coordinates += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (names[t].clone(), i);
            }
        }
    }
    Ok(report)
}
