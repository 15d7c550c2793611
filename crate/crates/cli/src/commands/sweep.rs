use std::path::{Path, PathBuf};

use orient_core::error::Result;
use orient_core::geometry::{make_shape, normalize, symmetrized_sample, ShapeSpec};
use orient_core::model::HeadKind;
use orient_core::pipeline::{rotation_sweep, SweepRow};
use orient_core::so3::{derive_seed, seeded_rng};

use super::{load_model, seeds};
use crate::artifacts::atomic_write;
use crate::config::{family_by_name, RunConfig};

pub struct SweepArgs<'a> {
    pub cfg: &'a RunConfig,
    pub orienter: &'a Path,
    pub out: &'a Path,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("angle_deg,quotient_loss,consecutive_chamfer\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.angle_deg, r.quotient_loss, r.consecutive_chamfer));
    }
    out
}

/// Rotate the configured family's default shape through a full turn and
/// record how the stage-1 estimate behaves at each step.
pub fn cmd_sweep(args: &SweepArgs) -> Result<(PathBuf, Vec<SweepRow>)> {
    let cfg = args.cfg;
    cfg.validate()?;
    let orienter = load_model(args.orienter, &cfg.role_hash(&cfg.orienter), HeadKind::Orienter)?;

    let family = family_by_name(&cfg.sweep.family)?;
    let spec = ShapeSpec::with_default_params(family);
    let mesh = make_shape(&spec)?;
    let mut rng = seeded_rng(derive_seed(cfg.seed, seeds::SWEEP_SAMPLE));
    let cloud = normalize(&symmetrized_sample(
        &mesh,
        cfg.dataset.points_per_cloud,
        spec.declared_symmetries().flips(),
        &mut rng,
    )?)?;

    let axis = cfg.sweep.axis_vector()?;
    let rows = rotation_sweep(&orienter.params, &cloud, &axis, cfg.sweep.step_deg)?;
    atomic_write(args.out, sweep_csv(&rows).as_bytes())?;
    Ok((args.out.to_path_buf(), rows))
}
