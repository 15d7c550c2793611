use std::path::{Path, PathBuf};

use orient_core::error::{Error, Result};
use orient_core::eval::{ecdf_csv, records_csv, evaluate_suite, EvalReport, ShapeEvalInput};
use orient_core::geometry::{apply_rotation, PointCloud};
use orient_core::model::HeadKind;
use orient_core::pipeline::PipelineConfig;
use orient_core::so3::{derive_seed, random_rotation, seeded_rng, Rotation};

use super::{load_model, seeds, StoredCalibration};
use crate::artifacts::atomic_write;
use crate::config::RunConfig;
use crate::dataset::{self, Split};

pub struct EvalArgs<'a> {
    pub cfg: &'a RunConfig,
    pub dataset_dir: &'a Path,
    pub orienter: &'a Path,
    pub flipper: &'a Path,
    pub calibration: Option<&'a Path>,
    pub out_dir: &'a Path,
}

#[derive(Debug)]
pub struct EvalOutputs {
    pub report: EvalReport,
    pub report_path: PathBuf,
    pub records_path: PathBuf,
    pub ecdf_path: PathBuf,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalOutputs> {
    let cfg = args.cfg;
    cfg.validate()?;
    let orienter = load_model(args.orienter, &cfg.role_hash(&cfg.orienter), HeadKind::Orienter)?;
    let flipper = load_model(args.flipper, &cfg.role_hash(&cfg.flipper), HeadKind::Flipper)?;
    let calibration = match args.calibration {
        Some(path) => {
            let stored = StoredCalibration::load(path)?;
            stored.check_models(args.orienter, args.flipper)?;
            if stored.calibration_hash != cfg.calibration_hash() {
                return Err(Error::Mismatch(
                    "calibration was produced under a different configuration".into(),
                ));
            }
            Some(stored.calibration)
        }
        None => None,
    };

    let ds = dataset::load(args.dataset_dir, Some(&cfg.dataset_hash()))?;
    let test: Vec<_> = ds.split(Split::Test).collect();
    if test.is_empty() {
        return Err(Error::InvalidInput("dataset has no test shapes".into()));
    }

    let mut rot_rng = seeded_rng(derive_seed(cfg.seed, seeds::EVAL_ROTATIONS));
    let truths: Vec<Rotation> = test.iter().map(|_| random_rotation(&mut rot_rng)).collect();
    let observed: Vec<PointCloud> =
        test.iter().zip(&truths).map(|(s, r)| apply_rotation(&s.cloud, r)).collect();
    let inputs: Vec<ShapeEvalInput> = test
        .iter()
        .zip(&truths)
        .zip(&observed)
        .map(|((shape, &truth), obs)| ShapeEvalInput {
            shape_id: shape.entry.id.clone(),
            canonical: &shape.cloud,
            observed: obs,
            true_rotation: truth,
            symmetry: &shape.symmetry,
        })
        .collect();

    let pipe = PipelineConfig {
        orient_tta_k: cfg.pipeline.orient_tta_k,
        flip_tta_k: cfg.pipeline.flip_tta_k,
        seed: derive_seed(cfg.seed, seeds::EVAL_PIPELINE),
    };
    let records = evaluate_suite(&orienter.params, &flipper.params, &inputs, &pipe, calibration.as_ref())?;
    let report = EvalReport::from_records(records, cfg.threshold_deg)?;

    let report_path = args.out_dir.join("report.json");
    let records_path = args.out_dir.join("records.csv");
    let ecdf_path = args.out_dir.join("ecdf.csv");
    atomic_write(&report_path, report.to_json()?.as_bytes())?;
    atomic_write(&records_path, records_csv(&report.records).as_bytes())?;
    atomic_write(&ecdf_path, ecdf_csv(&report.angular_error_ecdf).as_bytes())?;
    Ok(EvalOutputs { report, report_path, records_path, ecdf_path })
}
