use std::path::{Path, PathBuf};

use orient_core::conformal::{calibrate, calibration_score, ConformalCalibration};
use orient_core::error::{Error, Result};
use orient_core::geometry::apply_rotation;
use orient_core::model::HeadKind;
use orient_core::octa::nearest_flip;
use orient_core::pipeline::{canonicalize, PipelineConfig};
use orient_core::so3::{derive_seed, random_rotation, seeded_rng};
use serde::{Deserialize, Serialize};

use super::{load_model, seeds};
use crate::artifacts::{file_sha256, read_json, write_json};
use crate::config::RunConfig;
use crate::dataset::{self, Split};

/// Calibration bound to the exact model files and the configuration
/// sections that influence it; applying it elsewhere is refused.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredCalibration {
    pub calibration_hash: String,
    pub orienter_sha256: String,
    pub flipper_sha256: String,
    pub calibration: ConformalCalibration,
}

impl StoredCalibration {
    pub fn load(path: &Path) -> Result<Self> {
        let stored: StoredCalibration = read_json(path)?;
        stored.calibration.validate()?;
        Ok(stored)
    }

    /// Refuse to pair this calibration with model files it was not
    /// produced from.
    pub fn check_models(&self, orienter: &Path, flipper: &Path) -> Result<()> {
        if file_sha256(orienter)? != self.orienter_sha256 {
            return Err(Error::Mismatch(format!(
                "calibration was produced from a different orienter checkpoint than {}",
                orienter.display()
            )));
        }
        if file_sha256(flipper)? != self.flipper_sha256 {
            return Err(Error::Mismatch(format!(
                "calibration was produced from a different flipper checkpoint than {}",
                flipper.display()
            )));
        }
        Ok(())
    }
}

pub struct CalibrateArgs<'a> {
    pub cfg: &'a RunConfig,
    pub dataset_dir: &'a Path,
    pub orienter: &'a Path,
    pub flipper: &'a Path,
    pub out: &'a Path,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<(PathBuf, ConformalCalibration)> {
    let cfg = args.cfg;
    cfg.validate()?;
    let orienter = load_model(args.orienter, &cfg.role_hash(&cfg.orienter), HeadKind::Orienter)?;
    let flipper = load_model(args.flipper, &cfg.role_hash(&cfg.flipper), HeadKind::Flipper)?;
    let ds = dataset::load(args.dataset_dir, Some(&cfg.dataset_hash()))?;

    let mut rot_rng = seeded_rng(derive_seed(cfg.seed, seeds::CAL_ROTATIONS));
    let pipe_seed = derive_seed(cfg.seed, seeds::CAL_PIPELINE);
    let mut scores = Vec::new();
    for (i, shape) in ds.split(Split::Cal).enumerate() {
        let truth = random_rotation(&mut rot_rng);
        let observed = apply_rotation(&shape.cloud, &truth);
        let pipe = PipelineConfig {
            orient_tta_k: cfg.pipeline.orient_tta_k,
            flip_tta_k: cfg.pipeline.flip_tta_k,
            seed: derive_seed(pipe_seed, i as u64),
        };
        let (_, estimate) = canonicalize(&orienter.params, &flipper.params, &observed, &pipe)?;
        // The label the flipper should have produced: the residual flip
        // between the stage-1 frame and the rotation actually applied.
        let label = nearest_flip(&(estimate.stage1.inverse() * truth));
        scores.push(calibration_score(&estimate.flip_distribution, label)?);
    }

    let calibration = calibrate(&scores, cfg.alpha)?;
    let stored = StoredCalibration {
        calibration_hash: cfg.calibration_hash(),
        orienter_sha256: file_sha256(args.orienter)?,
        flipper_sha256: file_sha256(args.flipper)?,
        calibration: calibration.clone(),
    };
    write_json(args.out, &stored)?;
    Ok((args.out.to_path_buf(), calibration))
}
