//! Two-stage inference: a regression stage proposes an orientation, the
//! cloud is rotated back by it, and a 24-way classifier names the residual
//! flip.  Both stages support test-time augmentation; the composition
//! `stage1 * flip` is the full orientation estimate.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{apply_rotation, chamfer, recenter, PointCloud};
use crate::model::{forward, output_as_logits, output_as_matrix, HeadKind, ModelParams};
use crate::objectives::softmax;
use crate::octa::{quotient_distance_sq, Flip, FLIP_COUNT};
use crate::so3::{
    derive_seed, procrustes_project, random_rotation, seeded_rng, Mat3, Projection, RngState,
    Rotation, Vec3,
};

/// First-stage model: raw 3x3 orientation estimate for a normalized cloud.
pub trait Orienter {
    fn orient_raw(&self, cloud: &PointCloud) -> Result<Mat3>;
}

/// Second-stage model: one logit per flip for a stage-1-aligned cloud.
pub trait Flipper {
    fn flip_logits(&self, cloud: &PointCloud) -> Result<[f64; FLIP_COUNT]>;
}

impl Orienter for ModelParams {
    fn orient_raw(&self, cloud: &PointCloud) -> Result<Mat3> {
        if self.arch.head_kind != HeadKind::Orienter {
            return Err(Error::Mismatch("model head does not produce orientations".into()));
        }
        Ok(output_as_matrix(&forward(self, cloud)?))
    }
}

impl Flipper for ModelParams {
    fn flip_logits(&self, cloud: &PointCloud) -> Result<[f64; FLIP_COUNT]> {
        if self.arch.head_kind != HeadKind::Flipper {
            return Err(Error::Mismatch("model head does not produce flip logits".into()));
        }
        Ok(output_as_logits(&forward(self, cloud)?))
    }
}

/// Softmax class probabilities over the 24 flips.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlipDistribution {
    pub probs: [f64; FLIP_COUNT],
}

impl FlipDistribution {
    /// Highest-probability flip, lowest index on ties.
    pub fn argmax(&self) -> Flip {
        let mut best = 0;
        for i in 1..FLIP_COUNT {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        Flip::from_index(best).expect("in range")
    }
}

/// Project the raw stage-1 output onto a rotation.
pub fn orient_stage1<O: Orienter + ?Sized>(orienter: &O, cloud: &PointCloud) -> Result<Projection> {
    procrustes_project(&orienter.orient_raw(cloud)?)
}

/// One test-time-augmentation candidate for the first stage.
#[derive(Clone, Debug, Serialize)]
pub struct OrientVote {
    pub rotation: Rotation,
    pub degenerate: bool,
    /// Mean squared quotient distance to the other candidates.
    pub consensus_sq: f64,
}

/// Augmented first stage: re-orient the cloud by `k` random rotations,
/// run the orienter on each, pull every estimate back, and keep the
/// candidate closest (in mean squared quotient distance) to the others.
pub fn tta_orient<O: Orienter + ?Sized>(
    orienter: &O,
    cloud: &PointCloud,
    k: usize,
    rng: &mut RngState,
) -> Result<(Projection, Vec<OrientVote>)> {
    if k == 0 {
        return Err(Error::InvalidInput("test-time augmentation needs at least one draw".into()));
    }
    let mut candidates = Vec::with_capacity(k);
    for _ in 0..k {
        let draw = random_rotation(rng);
        let stage = orient_stage1(orienter, &apply_rotation(cloud, &draw))?;
        candidates.push((draw.inverse() * stage.rotation, stage.degenerate));
    }
    let mut votes = Vec::with_capacity(k);
    for (i, (rot, degenerate)) in candidates.iter().enumerate() {
        let mut total = 0.0;
        for (j, (other, _)) in candidates.iter().enumerate() {
            if i != j {
                total += quotient_distance_sq(rot, other).0;
            }
        }
        let consensus_sq = if k > 1 { total / (k - 1) as f64 } else { 0.0 };
        votes.push(OrientVote { rotation: *rot, degenerate: *degenerate, consensus_sq });
    }
    let mut best = 0;
    for i in 1..k {
        if votes[i].consensus_sq < votes[best].consensus_sq {
            best = i;
        }
    }
    let projection =
        Projection { rotation: votes[best].rotation, degenerate: votes[best].degenerate };
    Ok((projection, votes))
}

/// Single-pass flip probabilities for a stage-1-aligned cloud.
pub fn flip_distribution<F: Flipper + ?Sized>(
    flipper: &F,
    cloud: &PointCloud,
) -> Result<FlipDistribution> {
    Ok(FlipDistribution { probs: softmax(&flipper.flip_logits(cloud)?) })
}

/// Augmented second stage: apply `k` random flips, classify each moved
/// cloud, conjugate every prediction back, and take the plurality vote.
/// Also returns the normalized vote histogram.
pub fn tta_flip<F: Flipper + ?Sized>(
    flipper: &F,
    cloud: &PointCloud,
    k: usize,
    rng: &mut RngState,
) -> Result<(Flip, FlipDistribution)> {
    if k == 0 {
        return Err(Error::InvalidInput("test-time augmentation needs at least one draw".into()));
    }
    let mut counts = [0usize; FLIP_COUNT];
    for _ in 0..k {
        let moved_by = Flip::from_index(rng.random_range(0..FLIP_COUNT)).expect("in range");
        let dist = flip_distribution(flipper, &apply_rotation(cloud, moved_by.rotation()))?;
        let vote = moved_by.inverse().compose(dist.argmax());
        counts[vote.index()] += 1;
    }
    let mut best = 0;
    for i in 1..FLIP_COUNT {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    let mut probs = [0.0; FLIP_COUNT];
    for (p, c) in probs.iter_mut().zip(&counts) {
        *p = *c as f64 / k as f64;
    }
    Ok((Flip::from_index(best).expect("in range"), FlipDistribution { probs }))
}

/// Test-time augmentation draws per stage; 0 disables that stage's
/// augmentation.  Draws are seeded from `seed`, so results are
/// deterministic per configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PipelineConfig {
    pub orient_tta_k: usize,
    pub flip_tta_k: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { orient_tta_k: 8, flip_tta_k: 0, seed: 0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VoteDiagnostics {
    /// Stage-1 candidates when orienter augmentation ran (empty otherwise).
    pub orient_votes: Vec<OrientVote>,
    /// Conjugated vote histogram when flip augmentation ran.
    pub flip_votes: Option<FlipDistribution>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrientationEstimate {
    pub stage1: Rotation,
    pub stage1_degenerate: bool,
    /// Residual flip of the aligned cloud relative to canonical pose.
    pub flip: Flip,
    /// Single-pass class probabilities on the aligned cloud (the
    /// distribution conformal calibration operates on).
    pub flip_distribution: FlipDistribution,
    /// Full orientation estimate `stage1 * flip`.
    pub composed: Rotation,
    pub diagnostics: VoteDiagnostics,
}

/// Run the full two-stage pipeline on a normalized cloud.  Returns the
/// canonicalized cloud and the orientation estimate.
pub fn canonicalize<O, F>(
    orienter: &O,
    flipper: &F,
    cloud: &PointCloud,
    cfg: &PipelineConfig,
) -> Result<(PointCloud, OrientationEstimate)>
where
    O: Orienter + ?Sized,
    F: Flipper + ?Sized,
{
    let (stage, orient_votes) = if cfg.orient_tta_k >= 1 {
        let mut rng = seeded_rng(derive_seed(cfg.seed, 0));
        let (stage, votes) = tta_orient(orienter, cloud, cfg.orient_tta_k, &mut rng)?;
        (stage, votes)
    } else {
        (orient_stage1(orienter, cloud)?, Vec::new())
    };

    let intermediate = recenter(&apply_rotation(cloud, &stage.rotation.transpose()));
    let dist = flip_distribution(flipper, &intermediate)?;
    let (flip, flip_votes) = if cfg.flip_tta_k >= 1 {
        let mut rng = seeded_rng(derive_seed(cfg.seed, 1));
        let (flip, votes) = tta_flip(flipper, &intermediate, cfg.flip_tta_k, &mut rng)?;
        (flip, Some(votes))
    } else {
        (dist.argmax(), None)
    };

    let output = apply_rotation(&intermediate, &flip.rotation().transpose());
    let estimate = OrientationEstimate {
        stage1: stage.rotation,
        stage1_degenerate: stage.degenerate,
        flip,
        flip_distribution: dist,
        composed: stage.rotation * *flip.rotation(),
        diagnostics: VoteDiagnostics { orient_votes, flip_votes },
    };
    Ok((output, estimate))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SweepRow {
    pub angle_deg: f64,
    /// Squared quotient distance between the stage-1 estimate and the
    /// rotation actually applied.
    pub quotient_loss: f64,
    /// Chamfer between this angle's stage-1-aligned cloud and the next
    /// angle's (wrapping around at 360).
    pub consecutive_chamfer: f64,
}

/// Rotate the cloud about `axis` in `step_deg` increments through a full
/// turn, recording stage-1 quotient loss and the chamfer between aligned
/// clouds at consecutive angles.
pub fn rotation_sweep<O: Orienter + ?Sized>(
    orienter: &O,
    cloud: &PointCloud,
    axis: &Vec3,
    step_deg: f64,
) -> Result<Vec<SweepRow>> {
    if !(step_deg.is_finite() && step_deg > 0.0) {
        return Err(Error::Config("sweep step must be positive".into()));
    }
    let count = 360.0 / step_deg;
    if (count - count.round()).abs() > 1e-9 {
        return Err(Error::Config(format!("sweep step {step_deg} does not divide 360")));
    }
    let count = count.round() as usize;
    let mut aligned = Vec::with_capacity(count);
    let mut losses = Vec::with_capacity(count);
    for i in 0..count {
        let angle = i as f64 * step_deg;
        let r = Rotation::from_axis_angle(axis, angle.to_radians())?;
        let input = apply_rotation(cloud, &r);
        let stage = orient_stage1(orienter, &input)?;
        losses.push(quotient_distance_sq(&stage.rotation, &r).0);
        aligned.push(apply_rotation(&input, &stage.rotation.transpose()));
    }
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        rows.push(SweepRow {
            angle_deg: i as f64 * step_deg,
            quotient_loss: losses[i],
            consecutive_chamfer: chamfer(&aligned[i], &aligned[(i + 1) % count])?,
        });
    }
    Ok(rows)
}

/// Reference stages built from the canonical cloud itself.  They assume
/// the input points correspond one-to-one, in order, with the canonical
/// points (true for clouds produced by rotating the canonical cloud), and
/// are used to test the pipeline plumbing independently of any training.
pub mod oracle {
    use super::*;

    /// Recovers the rotation by projecting the order-aligned
    /// cross-covariance between the input and the canonical cloud.
    pub struct OracleOrienter {
        pub canonical: PointCloud,
    }

    impl Orienter for OracleOrienter {
        fn orient_raw(&self, cloud: &PointCloud) -> Result<Mat3> {
            if cloud.len() != self.canonical.len() {
                return Err(Error::InvalidInput(
                    "oracle orienter needs order-aligned clouds of equal size".into(),
                ));
            }
            let mut h = Mat3::zeros();
            for (p, q) in cloud.points.iter().zip(&self.canonical.points) {
                h += p * q.transpose();
            }
            Ok(h)
        }
    }

    /// Scores each flip by the order-aligned residual to the flipped
    /// canonical cloud; exactly equivariant under flips of the input.
    pub struct OracleFlipper {
        pub canonical: PointCloud,
        pub sharpness: f64,
    }

    impl OracleFlipper {
        pub fn new(canonical: PointCloud) -> Self {
            OracleFlipper { canonical, sharpness: 50.0 }
        }
    }

    impl Flipper for OracleFlipper {
        fn flip_logits(&self, cloud: &PointCloud) -> Result<[f64; FLIP_COUNT]> {
            if cloud.len() != self.canonical.len() {
                return Err(Error::InvalidInput(
                    "oracle flipper needs order-aligned clouds of equal size".into(),
                ));
            }
            let mut logits = [0.0; FLIP_COUNT];
            for flip in Flip::all() {
                let m = flip.rotation().matrix();
                let mut residual = 0.0;
                for (p, q) in cloud.points.iter().zip(&self.canonical.points) {
                    residual += (p - m * q).norm_squared();
                }
                logits[flip.index()] = -self.sharpness * residual / cloud.len() as f64;
            }
            Ok(logits)
        }
    }
}
