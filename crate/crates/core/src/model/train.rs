//! Deterministic minibatch training.
//!
//! Every step draws its batch from a fresh RNG seeded by
//! `derive_seed(seed, step)`, so resuming from a checkpoint at step `k`
//! reproduces the uninterrupted run bit for bit: no RNG position needs
//! to be carried across runs.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{loss_and_grad, Batch, HeadKind, ModelParams, RegressionObjective, MIN_POINTS};
use crate::error::{Error, Result};
use crate::geometry::{apply_rotation, normalize, PointCloud};
use crate::octa::{Flip, FLIP_COUNT};
use crate::so3::{derive_seed, random_rotation, seeded_rng, RngState, Rotation, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { lr: f64 },
    Momentum { lr: f64, momentum: f64 },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam { lr: 1e-3 }
    }
}

/// Optimizer running buffers; serialized into checkpoints so a resumed
/// run continues the same trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptState {
    Adam { m: Vec<f64>, v: Vec<f64>, t: u64 },
    Momentum { velocity: Vec<f64> },
}

impl OptState {
    pub fn fresh(kind: &OptimizerKind, param_count: usize) -> Self {
        match kind {
            OptimizerKind::Adam { .. } => {
                OptState::Adam { m: vec![0.0; param_count], v: vec![0.0; param_count], t: 0 }
            }
            OptimizerKind::Momentum { .. } => {
                OptState::Momentum { velocity: vec![0.0; param_count] }
            }
        }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn apply_update(
    kind: &OptimizerKind,
    opt: &mut OptState,
    params: &mut [f64],
    grad: &[f64],
) -> Result<()> {
    match (kind, opt) {
        (OptimizerKind::Adam { lr }, OptState::Adam { m, v, t }) => {
            *t += 1;
            let bc1 = 1.0 - ADAM_BETA1.powi(*t as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(*t as i32);
            for i in 0..params.len() {
                let g = grad[i];
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
            Ok(())
        }
        (OptimizerKind::Momentum { lr, momentum }, OptState::Momentum { velocity }) => {
            for i in 0..params.len() {
                velocity[i] = momentum * velocity[i] + grad[i];
                params[i] -= lr * velocity[i];
            }
            Ok(())
        }
        _ => Err(Error::Mismatch("optimizer state does not match the configured optimizer".into())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// Points subsampled from each cloud per example.
    pub points_per_cloud: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Degree range of the random small rotation applied on top of the
    /// flip when training the flip classifier.
    pub flip_jitter_deg: [f64; 2],
    /// Keep a parameter snapshot every this many steps (0 = never).
    pub snapshot_every: usize,
    /// Loss for the orientation head; ignored by the flip head.
    pub objective: RegressionObjective,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 600,
            batch_size: 16,
            points_per_cloud: 256,
            optimizer: OptimizerKind::default(),
            seed: 0,
            flip_jitter_deg: [0.0, 10.0],
            snapshot_every: 0,
            objective: RegressionObjective::Quotient,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.points_per_cloud < MIN_POINTS {
            return Err(Error::Config(format!(
                "points per cloud must be at least {MIN_POINTS}"
            )));
        }
        let [lo, hi] = self.flip_jitter_deg;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::Config("flip jitter range must satisfy 0 <= lo <= hi".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub params: ModelParams,
    pub opt: OptState,
    pub step: usize,
}

impl TrainState {
    pub fn fresh(params: ModelParams, kind: &OptimizerKind) -> Self {
        let opt = OptState::fresh(kind, params.values.len());
        TrainState { params, opt, step: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub state: TrainState,
    /// `(step, batch loss)` for every step executed in this call.
    pub loss_curve: Vec<(usize, f64)>,
    /// `(steps completed, params)` at each snapshot interval.
    pub snapshots: Vec<(usize, ModelParams)>,
}

fn random_unit_axis(rng: &mut RngState) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if v.norm() > 1e-6 {
            return v / v.norm();
        }
    }
}

fn subsample(cloud: &PointCloud, count: usize, rng: &mut RngState) -> PointCloud {
    if count >= cloud.len() {
        return cloud.clone();
    }
    let picked = rand::seq::index::sample(rng, cloud.len(), count);
    PointCloud::new(picked.iter().map(|i| cloud.points[i]).collect())
}

/// Draw one batch of augmented examples from the canonical clouds.
pub fn make_batch(
    clouds: &[PointCloud],
    head: HeadKind,
    cfg: &TrainConfig,
    rng: &mut RngState,
) -> Result<Batch> {
    if clouds.is_empty() {
        return Err(Error::InvalidInput("no training clouds".into()));
    }
    match head {
        HeadKind::Orienter => {
            let mut pairs = Vec::with_capacity(cfg.batch_size);
            for _ in 0..cfg.batch_size {
                let cloud = &clouds[rng.random_range(0..clouds.len())];
                let sub = subsample(cloud, cfg.points_per_cloud, rng);
                let r = random_rotation(rng);
                pairs.push((normalize(&apply_rotation(&sub, &r))?, r));
            }
            Ok(Batch::Orient { pairs, objective: cfg.objective })
        }
        HeadKind::Flipper => {
            let [lo, hi] = cfg.flip_jitter_deg;
            let mut pairs = Vec::with_capacity(cfg.batch_size);
            for _ in 0..cfg.batch_size {
                let cloud = &clouds[rng.random_range(0..clouds.len())];
                let sub = subsample(cloud, cfg.points_per_cloud, rng);
                let flip = Flip::from_index(rng.random_range(0..FLIP_COUNT)).expect("in range");
                let axis = random_unit_axis(rng);
                let deg = if hi > lo { rng.random_range(lo..hi) } else { lo };
                let jitter = Rotation::from_axis_angle(&axis, deg.to_radians())?;
                let moved = apply_rotation(&sub, &(jitter * *flip.rotation()));
                pairs.push((normalize(&moved)?, flip));
            }
            Ok(Batch::Flip { pairs })
        }
    }
}

/// Run (or resume) training up to `cfg.steps` total steps.
pub fn train(mut state: TrainState, cfg: &TrainConfig, clouds: &[PointCloud]) -> Result<TrainOutcome> {
    cfg.validate()?;
    if state.step > cfg.steps {
        return Err(Error::Config(format!(
            "checkpoint is at step {} but the run only has {} steps",
            state.step, cfg.steps
        )));
    }
    let head = state.params.arch.head_kind;
    let mut loss_curve = Vec::new();
    let mut snapshots = Vec::new();
    for step in state.step..cfg.steps {
        let mut rng = seeded_rng(derive_seed(cfg.seed, step as u64));
        let batch = make_batch(clouds, head, cfg, &mut rng)?;
        let (loss, grad) = match loss_and_grad(&state.params, &batch) {
            Ok(pair) => pair,
            Err(Error::Numeric(_)) => return Err(Error::TrainingDiverged { step }),
            Err(e) => return Err(e),
        };
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { step });
        }
        apply_update(&cfg.optimizer, &mut state.opt, &mut state.params.values, &grad)?;
        if !state.params.values.iter().all(|x| x.is_finite()) {
            return Err(Error::TrainingDiverged { step });
        }
        state.step = step + 1;
        loss_curve.push((step, loss));
        if cfg.snapshot_every > 0 && state.step % cfg.snapshot_every == 0 {
            snapshots.push((state.step, state.params.clone()));
        }
    }
    Ok(TrainOutcome { state, loss_curve, snapshots })
}
