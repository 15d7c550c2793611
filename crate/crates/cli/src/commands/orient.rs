use std::path::Path;

use orient_core::conformal::{candidate_orientations, prediction_set};
use orient_core::error::{Error, Result};
use orient_core::geometry::{
    apply_rotation, normalize, parse_cloud_json, parse_cloud_text, parse_obj, recenter,
    sample_surface, write_cloud_json, PointCloud,
};
use orient_core::model::{HeadKind, MIN_POINTS};
use orient_core::pipeline::{canonicalize, PipelineConfig};
use orient_core::so3::{derive_seed, seeded_rng, Rotation};
use serde::Serialize;

use super::seeds;
use crate::artifacts::{atomic_write, load_checkpoint_unchecked, write_json};
use crate::commands::StoredCalibration;

pub struct OrientArgs<'a> {
    pub input: &'a Path,
    pub orienter: &'a Path,
    pub flipper: &'a Path,
    pub calibration: Option<&'a Path>,
    /// Directory for the canonicalized cloud (and per-candidate clouds
    /// with `aps`); `None` emits JSON only.
    pub out_dir: Option<&'a Path>,
    pub aps: bool,
    pub tta_k: usize,
    /// Surface samples drawn when the input is a mesh.
    pub points: usize,
    pub seed: u64,
}

#[derive(Serialize)]
pub struct CandidateOut {
    pub rank: usize,
    pub flip: usize,
    pub prob: f64,
    pub rotation: Rotation,
    /// Written cloud file for this candidate, when an output directory
    /// was given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
}

#[derive(Serialize)]
pub struct OrientResult {
    pub input: String,
    pub points: usize,
    pub stage1: Rotation,
    pub stage1_degenerate: bool,
    pub flip: usize,
    pub composed: Rotation,
    pub flip_probs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub canonical_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<CandidateOut>>,
}

/// Read a shape by extension: `.obj` meshes are surface-sampled, `.json`
/// clouds parsed directly, anything else read as whitespace text rows.
fn read_input(path: &Path, points: usize, seed: u64) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "obj" => {
            let mesh = parse_obj(&text)?;
            let mut rng = seeded_rng(derive_seed(seed, seeds::ORIENT_SAMPLE));
            sample_surface(&mesh, points, &mut rng)
        }
        "json" => parse_cloud_json(&text),
        _ => parse_cloud_text(&text),
    }
}

pub fn cmd_orient(args: &OrientArgs) -> Result<OrientResult> {
    if args.points < MIN_POINTS {
        return Err(Error::Config(format!("--points must be at least {MIN_POINTS}")));
    }
    if args.aps && args.calibration.is_none() {
        return Err(Error::Config("--aps needs a calibration file".into()));
    }
    let orienter = load_checkpoint_unchecked(args.orienter)?;
    let flipper = load_checkpoint_unchecked(args.flipper)?;
    if orienter.params.arch.head_kind != HeadKind::Orienter {
        return Err(Error::Mismatch(format!(
            "{} does not hold an orienter model",
            args.orienter.display()
        )));
    }
    if flipper.params.arch.head_kind != HeadKind::Flipper {
        return Err(Error::Mismatch(format!(
            "{} does not hold a flipper model",
            args.flipper.display()
        )));
    }
    let calibration = match args.calibration {
        Some(path) => {
            let stored = StoredCalibration::load(path)?;
            stored.check_models(args.orienter, args.flipper)?;
            Some(stored.calibration)
        }
        None => None,
    };

    let cloud = normalize(&read_input(args.input, args.points, args.seed)?)?;
    let pipe = PipelineConfig {
        orient_tta_k: args.tta_k,
        flip_tta_k: 0,
        seed: derive_seed(args.seed, seeds::ORIENT_PIPELINE),
    };
    let (canonical, estimate) = canonicalize(&orienter.params, &flipper.params, &cloud, &pipe)?;

    let canonical_file = match args.out_dir {
        Some(dir) => {
            let path = dir.join("canonical.json");
            atomic_write(&path, write_cloud_json(&canonical).as_bytes())?;
            Some("canonical.json".to_string())
        }
        None => None,
    };

    let (tau, alpha, candidates) = match (&calibration, args.aps) {
        (Some(cal), true) => {
            let set = prediction_set(&estimate.flip_distribution, cal)?;
            let ranked = candidate_orientations(&estimate, &set);
            let intermediate = recenter(&apply_rotation(&cloud, &estimate.stage1.inverse()));
            let mut outs = Vec::with_capacity(ranked.len());
            for (rank, cand) in ranked.iter().enumerate() {
                let file = match args.out_dir {
                    Some(dir) => {
                        let name = format!("candidate_{rank:02}_flip{:02}.json", cand.flip.index());
                        let aligned =
                            apply_rotation(&intermediate, &cand.flip.rotation().inverse());
                        atomic_write(&dir.join(&name), write_cloud_json(&aligned).as_bytes())?;
                        Some(name)
                    }
                    None => None,
                };
                outs.push(CandidateOut {
                    rank,
                    flip: cand.flip.index(),
                    prob: cand.prob,
                    rotation: cand.rotation,
                    file,
                });
            }
            (Some(cal.tau), Some(cal.alpha), Some(outs))
        }
        _ => (None, None, None),
    };

    let result = OrientResult {
        input: args.input.display().to_string(),
        points: cloud.len(),
        stage1: estimate.stage1,
        stage1_degenerate: estimate.stage1_degenerate,
        flip: estimate.flip.index(),
        composed: estimate.composed,
        flip_probs: estimate.flip_distribution.probs.to_vec(),
        canonical_file,
        tau,
        alpha,
        candidates,
    };
    if let Some(dir) = args.out_dir {
        write_json(&dir.join("result.json"), &result)?;
    }
    Ok(result)
}
