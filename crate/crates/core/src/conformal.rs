//! Adaptive prediction sets over the 24 flips.  Calibration learns a mass
//! threshold tau from held-out scores; inference takes the smallest
//! descending-probability prefix whose total mass reaches tau.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::octa::{ordering_fingerprint, Flip, FLIP_COUNT};
use crate::pipeline::{FlipDistribution, OrientationEstimate};
use crate::so3::Rotation;

/// Calibrated threshold plus the settings it was produced under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConformalCalibration {
    pub tau: f64,
    pub alpha: f64,
    pub n_cal: usize,
    /// Flip-ordering fingerprint the scores were computed under.
    pub flip_fingerprint: String,
}

impl ConformalCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::Config(format!("tau {} outside [0, 1]", self.tau)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.n_cal < MIN_CALIBRATION_SCORES {
            return Err(Error::Config(format!(
                "calibration used {} scores; at least {MIN_CALIBRATION_SCORES} required",
                self.n_cal
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cal: ConformalCalibration = serde_json::from_str(text)?;
        cal.validate()?;
        Ok(cal)
    }
}

pub const MIN_CALIBRATION_SCORES: usize = 10;

/// Flip indices in descending-probability order (ties by lowest index).
fn ranked(dist: &FlipDistribution) -> Result<[usize; FLIP_COUNT]> {
    let sum: f64 = dist.probs.iter().sum();
    if dist.probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "flip distribution is not a probability vector (sum {sum})"
        )));
    }
    let mut order = [0usize; FLIP_COUNT];
    for (i, slot) in order.iter_mut().enumerate() {
        *slot = i;
    }
    order.sort_by(|&a, &b| dist.probs[b].total_cmp(&dist.probs[a]).then(a.cmp(&b)));
    Ok(order)
}

/// Cumulative descending-order mass up to and including the true class.
pub fn calibration_score(dist: &FlipDistribution, true_flip: Flip) -> Result<f64> {
    let order = ranked(dist)?;
    let mut cum = 0.0;
    for idx in order {
        cum += dist.probs[idx];
        if idx == true_flip.index() {
            return Ok(cum);
        }
    }
    unreachable!("every flip index appears in the ranking");
}

/// Finite-sample conformal quantile: the ceil((n+1)(1-alpha))-th smallest
/// score, clamped to the largest score when the rank exceeds n.
pub fn calibrate(scores: &[f64], alpha: f64) -> Result<ConformalCalibration> {
    if scores.len() < MIN_CALIBRATION_SCORES {
        return Err(Error::InvalidInput(format!(
            "calibration needs at least {MIN_CALIBRATION_SCORES} scores, got {}",
            scores.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha {alpha} outside (0, 1)")));
    }
    if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::InvalidInput("calibration scores must lie in [0, 1]".into()));
    }
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((n + 1) as f64 * (1.0 - alpha)).ceil() as usize;
    let tau = sorted[rank.clamp(1, n) - 1];
    Ok(ConformalCalibration {
        tau,
        alpha,
        n_cal: n,
        flip_fingerprint: ordering_fingerprint().to_string(),
    })
}

/// Flips in descending probability order whose total mass reaches tau.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionSet {
    pub flips: Vec<Flip>,
    pub probs: Vec<f64>,
    pub total_mass: f64,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.flips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flips.is_empty()
    }

    pub fn contains(&self, flip: Flip) -> bool {
        self.flips.contains(&flip)
    }
}

/// Minimal descending-probability prefix with cumulative mass >= tau.
/// tau = 0 still yields one element; tau within 1e-12 of 1 forces the
/// full set (rounding could otherwise leave the total just short).
pub fn prediction_set(
    dist: &FlipDistribution,
    cal: &ConformalCalibration,
) -> Result<PredictionSet> {
    if cal.flip_fingerprint != ordering_fingerprint() {
        return Err(Error::Config(format!(
            "calibration fingerprint {} does not match flip ordering {}",
            cal.flip_fingerprint,
            ordering_fingerprint()
        )));
    }
    let order = ranked(dist)?;
    let take_all = cal.tau > 1.0 - 1e-12;
    let mut flips = Vec::new();
    let mut probs = Vec::new();
    let mut total_mass = 0.0;
    for idx in order {
        flips.push(Flip::from_index(idx).expect("in range"));
        probs.push(dist.probs[idx]);
        total_mass += dist.probs[idx];
        if !take_all && total_mass >= cal.tau {
            break;
        }
    }
    Ok(PredictionSet { flips, probs, total_mass })
}

/// One ranked orientation hypothesis from a prediction set.
#[derive(Clone, Debug, Serialize)]
pub struct Candidate {
    pub flip: Flip,
    pub rotation: Rotation,
    pub prob: f64,
}

/// Compose the stage-1 estimate with every flip in the set, keeping the
/// set's ranking and probabilities.
pub fn candidate_orientations(
    estimate: &OrientationEstimate,
    set: &PredictionSet,
) -> Vec<Candidate> {
    set.flips
        .iter()
        .zip(&set.probs)
        .map(|(&flip, &prob)| Candidate {
            flip,
            rotation: estimate.stage1 * *flip.rotation(),
            prob,
        })
        .collect()
}

/// Evaluation-side coverage: the true flip is only defined up to the
/// shape's symmetries, so any symmetry-equivalent of it inside the set
/// counts as a hit.  Calibration itself always uses the raw label.
pub fn symmetry_covered(
    set: &PredictionSet,
    true_flip: Flip,
    symmetry: &crate::symmetry::SymmetryGroup,
) -> bool {
    symmetry.flips().iter().any(|&f| set.contains(true_flip.compose(f)))
}
