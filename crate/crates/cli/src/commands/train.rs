use std::path::{Path, PathBuf};
use std::str::FromStr;

use orient_core::error::{Error, Result};
use orient_core::model::{
    init_params, train, HeadKind, ModelArch, OptimizerKind, RegressionObjective, TrainConfig,
    TrainState,
};
use orient_core::so3::derive_seed;
use serde::Serialize;

use super::{load_model, seeds};
use crate::artifacts::{atomic_write, loss_csv, save_checkpoint, write_json};
use crate::config::{RoleConfig, RunConfig};
use crate::dataset::{self, Split};

/// Steps per call into the trainer; purely a progress-reporting grain
/// (resume exactness makes chunked and single-call runs identical).
const CHUNK: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Orienter,
    Flipper,
}

impl Role {
    pub fn head_kind(self) -> HeadKind {
        match self {
            Role::Orienter => HeadKind::Orienter,
            Role::Flipper => HeadKind::Flipper,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Orienter => "orienter",
            Role::Flipper => "flipper",
        }
    }

    fn init_tag(self) -> u64 {
        match self {
            Role::Orienter => seeds::ORIENTER_INIT,
            Role::Flipper => seeds::FLIPPER_INIT,
        }
    }

    fn train_tag(self) -> u64 {
        match self {
            Role::Orienter => seeds::ORIENTER_TRAIN,
            Role::Flipper => seeds::FLIPPER_TRAIN,
        }
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orienter" => Ok(Role::Orienter),
            "flipper" => Ok(Role::Flipper),
            other => Err(Error::Config(format!("role must be orienter or flipper, got {other:?}"))),
        }
    }
}

pub struct TrainArgs<'a> {
    pub cfg: &'a RunConfig,
    pub role: Role,
    pub dataset_dir: &'a Path,
    /// Checkpoint output path; the loss curve lands next to it.
    pub out: &'a Path,
    pub resume: bool,
    pub quiet: bool,
}

pub struct TrainSummary {
    pub steps: usize,
    pub steps_run: usize,
    pub final_loss: Option<f64>,
    pub checkpoint: PathBuf,
    pub loss_curve: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

#[derive(Serialize)]
struct SnapshotFile<'a> {
    step: usize,
    arch: &'a ModelArch,
    values: &'a [f64],
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let cfg = args.cfg;
    cfg.validate()?;
    let role_cfg: &RoleConfig = match args.role {
        Role::Orienter => &cfg.orienter,
        Role::Flipper => &cfg.flipper,
    };
    let head = args.role.head_kind();
    let role_hash = cfg.role_hash(role_cfg);

    let ds = dataset::load(args.dataset_dir, Some(&cfg.dataset_hash()))?;
    let clouds = ds.clouds(Split::Train);
    if clouds.is_empty() {
        return Err(Error::InvalidInput("dataset has no training shapes".into()));
    }

    let mut state = if args.resume && args.out.exists() {
        load_model(args.out, &role_hash, head)?
    } else {
        let params = init_params(&role_cfg.arch(head), derive_seed(cfg.seed, args.role.init_tag()))?;
        TrainState::fresh(params, &OptimizerKind::Adam { lr: 0.0 })
    };

    let total = role_cfg.total_steps();
    if state.step > total {
        return Err(Error::Config(format!(
            "checkpoint is at step {} but the schedule ends at {total}",
            state.step
        )));
    }

    let mut curve: Vec<(usize, f64)> = Vec::new();
    let mut snapshots: Vec<(usize, Vec<f64>)> = Vec::new();
    for phase in &role_cfg.phases {
        while state.step < phase.steps {
            let chunk_end = ((state.step / CHUNK + 1) * CHUNK).min(phase.steps);
            let tc = TrainConfig {
                steps: chunk_end,
                batch_size: role_cfg.batch_size,
                points_per_cloud: role_cfg.points_per_cloud,
                optimizer: OptimizerKind::Adam { lr: phase.lr },
                seed: derive_seed(cfg.seed, args.role.train_tag()),
                flip_jitter_deg: role_cfg.flip_jitter_deg,
                snapshot_every: role_cfg.snapshot_every,
                objective: RegressionObjective::Quotient,
            };
            let outcome = train(state, &tc, &clouds)?;
            state = outcome.state;
            curve.extend(outcome.loss_curve);
            snapshots.extend(outcome.snapshots.into_iter().map(|(s, p)| (s, p.values)));
            if !args.quiet {
                let recent = curve.iter().rev().take(200).map(|(_, l)| l).sum::<f64>()
                    / curve.len().min(200).max(1) as f64;
                eprintln!(
                    "{}: step {}/{} lr {:.1e} loss {recent:.4}",
                    args.role.name(),
                    state.step,
                    total,
                    phase.lr
                );
            }
        }
    }

    let arch = &state.params.arch;
    let mut snapshot_paths = Vec::new();
    for (step, values) in &snapshots {
        let path = sibling(args.out, &format!("_step{step:06}.json"));
        write_json(&path, &SnapshotFile { step: *step, arch, values })?;
        snapshot_paths.push(path);
    }
    let loss_path = sibling(args.out, "_loss.csv");
    atomic_write(&loss_path, loss_csv(&curve).as_bytes())?;
    save_checkpoint(args.out, &state, &role_hash)?;

    Ok(TrainSummary {
        steps: state.step,
        steps_run: curve.len(),
        final_loss: curve.last().map(|(_, l)| *l),
        checkpoint: args.out.to_path_buf(),
        loss_curve: loss_path,
        snapshots: snapshot_paths,
    })
}
