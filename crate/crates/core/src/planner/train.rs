//! Synchronous n-step advantage actor-critic.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::questions::{stable_hash, DatasetItem, QuestionType};
use crate::world::RoomSpec;

use super::action::{PlannerAction, NUM_ACTIONS};
use super::agent::PlannerAgent;
use super::episode::{Episode, EpisodeConfig, EpisodeError};
use super::features::{extract_features, FeatureConfig};
use super::policy::{
    accumulate_gradient, Adam, LossTerms, LossWeights, PolicyError, PolicyParams, Sample,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub workers: usize,
    pub n_steps: usize,
    pub gamma: f64,
    pub lr: f64,
    pub clip_norm: f64,
    pub loss: LossWeights,
    pub features: FeatureConfig,
    /// Gate the policy by predicted validity.
    pub gate: bool,
    pub updates: usize,
    /// Updates per reported epoch.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            workers: 8,
            n_steps: 5,
            gamma: 0.99,
            lr: 0.001,
            clip_norm: 5.0,
            loss: LossWeights::default(),
            features: FeatureConfig::default(),
            gate: true,
            updates: 12000,
            log_every: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training items")]
    Empty,
    #[error("item {0} references unknown room {1:?}")]
    UnknownRoom(String, String),
    #[error("non-finite loss at update {update}")]
    DivergenceDetected {
        update: usize,
        /// Parameters before the diverging update.
        params: Box<PolicyParams>,
    },
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Training statistics over the episodes that ended within one epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub updates: usize,
    pub episodes: usize,
    pub correct: [usize; 3],
    pub per_type: [usize; 3],
    pub primitive_steps: usize,
    pub planner_steps: usize,
    pub invalid: usize,
    pub mean_return: f64,
    pub loss: LossTerms,
}

impl EpochStats {
    pub fn accuracy(&self, q: QuestionType) -> f64 {
        let i = q.index();
        if self.per_type[i] == 0 {
            return 0.0;
        }
        self.correct[i] as f64 / self.per_type[i] as f64
    }

    pub fn invalid_pct(&self) -> f64 {
        100.0 * self.invalid as f64 / self.planner_steps.max(1) as f64
    }

    pub fn mean_length(&self) -> f64 {
        self.primitive_steps as f64 / self.episodes.max(1) as f64
    }
}

pub const CURVE_CSV_HEADER: &str =
    "epoch,updates,episodes,acc_existence,acc_counting,acc_spatial,mean_length,invalid_pct,mean_return,loss";

pub fn curves_csv(curves: &[EpochStats]) -> String {
    let mut out = String::from(CURVE_CSV_HEADER);
    out.push('\n');
    for e in curves {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{:.4},{:.4},{:.2},{:.3},{:.4},{:.5}",
            e.epoch,
            e.updates,
            e.episodes,
            e.accuracy(QuestionType::Existence),
            e.accuracy(QuestionType::Counting),
            e.accuracy(QuestionType::SpatialRelationship),
            e.mean_length(),
            e.invalid_pct(),
            e.mean_return,
            e.loss.total
        );
    }
    out
}

/// Sample an action index from a probability vector.
pub fn sample_index(pi: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in pi.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pi.len() - 1
}

/// Planner agent driven by trained parameters.
#[derive(Clone, Debug)]
pub struct PolicyAgent {
    pub params: PolicyParams,
    pub features: FeatureConfig,
    pub greedy: bool,
    /// Never pick actions the validity head predicts invalid.
    pub mask_invalid: bool,
    rng: ChaCha8Rng,
}

impl PolicyAgent {
    pub fn new(params: PolicyParams, features: FeatureConfig, seed: u64) -> Self {
        PolicyAgent {
            params,
            features,
            greedy: false,
            mask_invalid: false,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl PlannerAgent for PolicyAgent {
    fn act(&mut self, ep: &Episode) -> PlannerAction {
        let x = extract_features(ep, &self.features);
        let out = self
            .params
            .forward(&x)
            .expect("feature layout matches parameters");
        let mut pi = out.pi;
        if self.mask_invalid {
            for (i, p) in pi.iter_mut().enumerate() {
                if !out.predicted_valid(i) {
                    *p = 0.0;
                }
            }
            let total: f64 = pi.iter().sum();
            if total > 0.0 {
                pi.iter_mut().for_each(|p| *p /= total);
            } else {
                pi = out.pi;
            }
        }
        let i = if self.greedy {
            (0..NUM_ACTIONS)
                .max_by(|&a, &b| pi[a].total_cmp(&pi[b]).then(b.cmp(&a)))
                .unwrap_or(0)
        } else {
            sample_index(&pi, &mut self.rng)
        };
        PlannerAction::from_index(i).expect("index in range")
    }
}

struct Worker {
    rng: ChaCha8Rng,
    ep: Option<Episode>,
    episodes_started: u64,
}

/// What one worker produced in one rollout.
struct Rollout {
    samples: Vec<Sample>,
    finished: Vec<Episode>,
}

struct Env<'a> {
    rooms: BTreeMap<&'a str, &'a RoomSpec>,
    items: &'a [DatasetItem],
    cfg: &'a EpisodeConfig,
    seed: u64,
}

impl Env<'_> {
    fn fresh(&self, w: &mut Worker, worker: usize) -> Result<Episode, TrainError> {
        let item = &self.items[w.rng.random_range(0..self.items.len())];
        let room = self
            .rooms
            .get(item.config.room_id.as_str())
            .ok_or_else(|| {
                TrainError::UnknownRoom(item.item_id.clone(), item.config.room_id.clone())
            })?;
        let seed = stable_hash(&[
            &self.seed.to_string(),
            "train",
            &worker.to_string(),
            &w.episodes_started.to_string(),
        ]);
        w.episodes_started += 1;
        Ok(Episode::new(room, item, self.cfg, seed)?)
    }
}

fn rollout(
    env: &Env<'_>,
    w: &mut Worker,
    worker: usize,
    params: &PolicyParams,
    tc: &TrainConfig,
) -> Result<Rollout, TrainError> {
    let mut xs = Vec::new();
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    let mut values = Vec::new();
    let mut masks = Vec::new();
    let mut dones = Vec::new();
    let mut finished = Vec::new();
    for _ in 0..tc.n_steps {
        if w.ep.is_none() {
            w.ep = Some(env.fresh(w, worker)?);
        }
        let ep = w.ep.as_mut().expect("episode present");
        let x = extract_features(ep, &tc.features);
        let out = params.forward(&x)?;
        let a = sample_index(&out.pi, &mut w.rng);
        let mask = ep.valid_actions();
        let info = ep.step_planner(PlannerAction::from_index(a).expect("index in range"))?;
        xs.push(x);
        actions.push(a);
        rewards.push(info.reward);
        values.push(out.value);
        masks.push(mask);
        dones.push(info.done);
        if info.done {
            finished.push(w.ep.take().expect("episode present"));
        }
    }
    let mut ret = match &w.ep {
        Some(ep) if !dones.last().copied().unwrap_or(true) => {
            params.forward(&extract_features(ep, &tc.features))?.value
        }
        _ => 0.0,
    };
    let mut samples = Vec::with_capacity(xs.len());
    for t in (0..xs.len()).rev() {
        if dones[t] {
            ret = 0.0;
        }
        ret = rewards[t] + tc.gamma * ret;
        samples.push(Sample {
            x: std::mem::take(&mut xs[t]),
            action: actions[t],
            advantage: ret - values[t],
            ret,
            valid: masks[t],
        });
    }
    samples.reverse();
    Ok(Rollout { samples, finished })
}

/// Per-update hook: `(update index, current parameters)`.
pub type UpdateHook<'a> = dyn FnMut(usize, &PolicyParams) + 'a;

/// Train from zero parameters. Returns the final parameters and one
/// [`EpochStats`] per `log_every` updates.
pub fn train_actor_critic(
    rooms: &[RoomSpec],
    items: &[DatasetItem],
    cfg: &EpisodeConfig,
    tc: &TrainConfig,
    dim: usize,
    mut hook: Option<&mut UpdateHook<'_>>,
) -> Result<(PolicyParams, Vec<EpochStats>), TrainError> {
    if items.is_empty() {
        return Err(TrainError::Empty);
    }
    let env = Env {
        rooms: rooms.iter().map(|r| (r.room_id.as_str(), r)).collect(),
        items,
        cfg,
        seed: tc.seed,
    };
    let mut params = PolicyParams::zeros(dim, tc.gate);
    let mut opt = Adam::new(params.theta.len(), tc.lr, tc.clip_norm);
    let mut workers: Vec<Worker> = (0..tc.workers.max(1))
        .map(|i| Worker {
            rng: ChaCha8Rng::seed_from_u64(stable_hash(&[
                &tc.seed.to_string(),
                "worker",
                &i.to_string(),
            ])),
            ep: None,
            episodes_started: 0,
        })
        .collect();
    let mut curves = Vec::new();
    let mut epoch = EpochStats::default();
    let mut returns = 0.0;
    let mut loss_sum = LossTerms::default();
    let mut loss_n = 0usize;
    let mut grad = vec![0.0; params.theta.len()];

    for update in 0..tc.updates {
        let run = |(i, w): (usize, &mut Worker)| rollout(&env, w, i, &params, tc);
        #[cfg(feature = "parallel")]
        let rollouts: Vec<Result<Rollout, TrainError>> = {
            use rayon::prelude::*;
            workers.par_iter_mut().enumerate().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let rollouts: Vec<Result<Rollout, TrainError>> =
            workers.iter_mut().enumerate().map(run).collect();

        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut n = 0usize;
        let mut update_loss = LossTerms::default();
        for r in rollouts {
            let r = r?;
            for s in &r.samples {
                let l = accumulate_gradient(&params, s, &tc.loss, &mut grad)?;
                update_loss.policy += l.policy;
                update_loss.value += l.value;
                update_loss.entropy += l.entropy;
                update_loss.validity += l.validity;
                update_loss.total += l.total;
                n += 1;
            }
            for ep in r.finished {
                let q = ep.question.qtype.index();
                epoch.episodes += 1;
                epoch.per_type[q] += 1;
                epoch.correct[q] += usize::from(ep.correct());
                epoch.primitive_steps += ep.primitive_steps();
                epoch.planner_steps += ep.planner_steps();
                epoch.invalid += ep.invalid_count();
                returns += ep.total_reward();
            }
        }
        if !update_loss.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::DivergenceDetected {
                update,
                params: Box::new(params),
            });
        }
        let scale = 1.0 / n.max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        opt.step(&mut params.theta, &grad);
        loss_sum.total += update_loss.total * scale;
        loss_sum.policy += update_loss.policy * scale;
        loss_sum.value += update_loss.value * scale;
        loss_sum.entropy += update_loss.entropy * scale;
        loss_sum.validity += update_loss.validity * scale;
        loss_n += 1;
        if let Some(h) = hook.as_deref_mut() {
            h(update, &params);
        }
        if (update + 1) % tc.log_every.max(1) == 0 || update + 1 == tc.updates {
            epoch.epoch = curves.len();
            epoch.updates = update + 1;
            epoch.mean_return = returns / epoch.episodes.max(1) as f64;
            let k = loss_n.max(1) as f64;
            epoch.loss = LossTerms {
                policy: loss_sum.policy / k,
                value: loss_sum.value / k,
                entropy: loss_sum.entropy / k,
                validity: loss_sum.validity / k,
                total: loss_sum.total / k,
            };
            curves.push(std::mem::take(&mut epoch));
            returns = 0.0;
            loss_sum = LossTerms::default();
            loss_n = 0;
        }
    }
    Ok((params, curves))
}

/// Feature dimension for a configuration, measured on a throwaway episode.
pub fn feature_dim(
    room: &RoomSpec,
    item: &DatasetItem,
    cfg: &EpisodeConfig,
    features: &FeatureConfig,
) -> Result<usize, EpisodeError> {
    let ep = Episode::new(room, item, cfg, 0)?;
    Ok(extract_features(&ep, features).len())
}
