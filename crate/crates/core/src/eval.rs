//! Evaluation protocol: up-axis accuracy, full-orientation chamfer,
//! prediction-set size and min-chamfer summaries, and ECDF tables, plus
//! the per-shape driver that produces the records.

use serde::{Deserialize, Serialize};

use crate::conformal::{candidate_orientations, prediction_set, Candidate, ConformalCalibration};
use crate::error::{Error, Result};
use crate::geometry::{apply_rotation, chamfer, PointCloud};
use crate::octa::FLIP_COUNT;
use crate::pipeline::{canonicalize, Flipper, Orienter, PipelineConfig};
use crate::so3::{axis_angular_error, derive_seed, Rotation, Vec3};
use crate::symmetry::SymmetryGroup;

/// Everything measured for one evaluated shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeRecord {
    pub shape_id: String,
    pub true_rotation: Rotation,
    pub predicted_rotation: Rotation,
    /// Up-axis angular error in degrees, minimized over the shape's
    /// declared symmetry group.
    pub angular_error_deg: f64,
    /// Chamfer between the canonicalized output and the canonical cloud.
    pub chamfer: f64,
    pub aps_size: usize,
    /// Minimum chamfer over the prediction set's candidate orientations.
    pub min_aps_chamfer: f64,
}

/// Angle in degrees between the predicted up axis and the closest
/// symmetry-equivalent true up axis.  The up axis is the image of e_y.
pub fn up_axis_error_deg(
    predicted: &Rotation,
    truth: &Rotation,
    sym: &SymmetryGroup,
) -> Result<f64> {
    let e_y = Vec3::y();
    let pred_up = predicted.apply(&e_y);
    let mut best = f64::INFINITY;
    for f in sym.flips() {
        let true_up = truth.apply(&f.rotation().apply(&e_y));
        best = best.min(axis_angular_error(&pred_up, &true_up)?);
    }
    Ok(best.to_degrees())
}

/// Fraction of records whose angular error is strictly below the
/// threshold.
pub fn up_axis_accuracy(records: &[ShapeRecord], threshold_deg: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidInput("accuracy of an empty record set".into()));
    }
    let hits = records.iter().filter(|r| r.angular_error_deg < threshold_deg).count();
    Ok(hits as f64 / records.len() as f64)
}

pub const DEFAULT_THRESHOLD_DEG: f64 = 10.0;

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and std of the full-orientation chamfer column.
pub fn full_orientation_eval(records: &[ShapeRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::InvalidInput("chamfer summary of an empty record set".into()));
    }
    let values: Vec<f64> = records.iter().map(|r| r.chamfer).collect();
    Ok(mean_std(&values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApsSummary {
    pub min_chamfer_mean: f64,
    pub min_chamfer_std: f64,
    /// Histogram of set sizes; bin i counts sets of size i + 1.
    pub size_histogram: Vec<usize>,
}

/// Min-chamfer summary and set-size histogram (bins 1..=24).
pub fn aps_eval(records: &[ShapeRecord]) -> Result<ApsSummary> {
    if records.is_empty() {
        return Err(Error::InvalidInput("APS summary of an empty record set".into()));
    }
    let mut size_histogram = vec![0usize; FLIP_COUNT];
    for r in records {
        if r.aps_size == 0 || r.aps_size > FLIP_COUNT {
            return Err(Error::InvalidInput(format!(
                "prediction-set size {} outside 1..={FLIP_COUNT}",
                r.aps_size
            )));
        }
        size_histogram[r.aps_size - 1] += 1;
    }
    let values: Vec<f64> = records.iter().map(|r| r.min_aps_chamfer).collect();
    let (min_chamfer_mean, min_chamfer_std) = mean_std(&values);
    Ok(ApsSummary { min_chamfer_mean, min_chamfer_std, size_histogram })
}

/// Sorted (value, cumulative fraction) pairs.
pub fn ecdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::InvalidInput("ECDF of an empty sample".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().map(|(i, &v)| (v, (i + 1) as f64 / n)).collect())
}

/// Smallest chamfer to the canonical cloud over candidate alignments of
/// the observed cloud.
pub fn min_candidate_chamfer(
    observed: &PointCloud,
    candidates: &[Candidate],
    canonical: &PointCloud,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no candidate orientations".into()));
    }
    let mut best = f64::INFINITY;
    for cand in candidates {
        let aligned = apply_rotation(observed, &cand.rotation.transpose());
        best = best.min(chamfer(&aligned, canonical)?);
    }
    Ok(best)
}

/// One shape to evaluate: the canonical cloud, the observed (rotated)
/// cloud, the rotation that produced it, and the declared symmetries.
pub struct ShapeEvalInput<'a> {
    pub shape_id: String,
    pub canonical: &'a PointCloud,
    pub observed: &'a PointCloud,
    pub true_rotation: Rotation,
    pub symmetry: &'a SymmetryGroup,
}

/// Run the pipeline on one observed cloud and measure everything.  With a
/// calibration the prediction set drives the APS columns; without one they
/// fall back to the top-1 singleton.
pub fn evaluate_shape<O, F>(
    orienter: &O,
    flipper: &F,
    input: &ShapeEvalInput,
    cfg: &PipelineConfig,
    cal: Option<&ConformalCalibration>,
) -> Result<ShapeRecord>
where
    O: Orienter + ?Sized,
    F: Flipper + ?Sized,
{
    let (output, estimate) = canonicalize(orienter, flipper, input.observed, cfg)?;
    let full_chamfer = chamfer(&output, input.canonical)?;
    let angular_error_deg =
        up_axis_error_deg(&estimate.composed, &input.true_rotation, input.symmetry)?;
    let (aps_size, min_aps_chamfer) = match cal {
        Some(cal) => {
            let set = prediction_set(&estimate.flip_distribution, cal)?;
            let candidates = candidate_orientations(&estimate, &set);
            (set.len(), min_candidate_chamfer(input.observed, &candidates, input.canonical)?)
        }
        None => (1, full_chamfer),
    };
    Ok(ShapeRecord {
        shape_id: input.shape_id.clone(),
        true_rotation: input.true_rotation,
        predicted_rotation: estimate.composed,
        angular_error_deg,
        chamfer: full_chamfer,
        aps_size,
        min_aps_chamfer,
    })
}

/// Evaluate a whole slate, decorrelating per-shape augmentation draws by
/// deriving a fresh pipeline seed for each index.
pub fn evaluate_suite<O, F>(
    orienter: &O,
    flipper: &F,
    inputs: &[ShapeEvalInput],
    cfg: &PipelineConfig,
    cal: Option<&ConformalCalibration>,
) -> Result<Vec<ShapeRecord>>
where
    O: Orienter + ?Sized,
    F: Flipper + ?Sized,
{
    inputs
        .iter()
        .enumerate()
        .map(|(i, input)| {
            let shape_cfg = PipelineConfig { seed: derive_seed(cfg.seed, i as u64), ..*cfg };
            evaluate_shape(orienter, flipper, input, &shape_cfg, cal)
        })
        .collect()
}

/// Records plus aggregates; the aggregates are recomputable from the
/// records and `verify` checks exactly that.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub threshold_deg: f64,
    pub records: Vec<ShapeRecord>,
    pub accuracy: f64,
    pub chamfer_mean: f64,
    pub chamfer_std: f64,
    pub aps: ApsSummary,
    pub angular_error_ecdf: Vec<(f64, f64)>,
}

impl EvalReport {
    pub fn from_records(records: Vec<ShapeRecord>, threshold_deg: f64) -> Result<Self> {
        let accuracy = up_axis_accuracy(&records, threshold_deg)?;
        let (chamfer_mean, chamfer_std) = full_orientation_eval(&records)?;
        let aps = aps_eval(&records)?;
        let errors: Vec<f64> = records.iter().map(|r| r.angular_error_deg).collect();
        let angular_error_ecdf = ecdf(&errors)?;
        Ok(EvalReport {
            threshold_deg,
            records,
            accuracy,
            chamfer_mean,
            chamfer_std,
            aps,
            angular_error_ecdf,
        })
    }

    /// Recompute every aggregate from the records and demand equality.
    pub fn verify(&self) -> Result<()> {
        let fresh = EvalReport::from_records(self.records.clone(), self.threshold_deg)?;
        if fresh != *self {
            return Err(Error::Mismatch(
                "report aggregates do not match their records".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: EvalReport = serde_json::from_str(text)?;
        report.verify()?;
        Ok(report)
    }
}

pub fn records_csv(records: &[ShapeRecord]) -> String {
    let mut out = String::from("shape_id,angular_error_deg,chamfer,aps_size,min_aps_chamfer\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.shape_id, r.angular_error_deg, r.chamfer, r.aps_size, r.min_aps_chamfer
        ));
    }
    out
}

pub fn ecdf_csv(pairs: &[(f64, f64)]) -> String {
    let mut out = String::from("value,cum_fraction\n");
    for (v, c) in pairs {
        out.push_str(&format!("{v},{c}\n"));
    }
    out
}
