//! Run configuration: dataset recipe, both model roles, inference and
//! evaluation knobs.  Unknown keys are rejected; artifacts embed hashes
//! of the sections that produced them.

use orient_core::error::{Error, Result};
use orient_core::geometry::ShapeFamily;
use orient_core::model::{sha256_hex, HeadKind, ModelArch, MIN_POINTS};
use orient_core::so3::Vec3;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub families: Vec<String>,
    /// Canonical shape variants per family in the training split.
    pub train_per_family: usize,
    /// Total calibration shapes, distributed round-robin over families.
    pub cal_total: usize,
    /// Total held-out test shapes, distributed round-robin over families.
    pub test_total: usize,
    pub points_per_cloud: usize,
    /// Relative jitter applied to each family's default parameters.
    pub param_jitter: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            families: ShapeFamily::all().iter().map(|f| f.name().to_string()).collect(),
            train_per_family: 3,
            cal_total: 200,
            test_total: 500,
            points_per_cloud: 512,
            param_jitter: 0.08,
        }
    }
}

/// One constant-learning-rate stretch; `steps` is the absolute step count
/// at which the phase ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub steps: usize,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleConfig {
    pub trunk: Vec<usize>,
    pub head: Vec<usize>,
    pub batch_size: usize,
    /// Points subsampled per training example.
    pub points_per_cloud: usize,
    /// Degree range of the random jitter applied to flipper inputs.
    pub flip_jitter_deg: [f64; 2],
    pub snapshot_every: usize,
    pub phases: Vec<Phase>,
}

impl RoleConfig {
    pub fn arch(&self, head_kind: HeadKind) -> ModelArch {
        ModelArch {
            trunk: self.trunk.clone(),
            head: self.head.clone(),
            head_kind,
            leaky_slope: 0.01,
        }
    }

    pub fn total_steps(&self) -> usize {
        self.phases.last().map(|p| p.steps).unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtaConfig {
    pub orient_tta_k: usize,
    pub flip_tta_k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub family: String,
    /// Rotation axis: "x", "y", or "z".
    pub axis: String,
    pub step_deg: f64,
}

impl SweepConfig {
    pub fn axis_vector(&self) -> Result<Vec3> {
        match self.axis.as_str() {
            "x" => Ok(Vec3::x()),
            "y" => Ok(Vec3::y()),
            "z" => Ok(Vec3::z()),
            other => Err(Error::Config(format!("sweep axis must be x, y, or z, got \"{other}\""))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub orienter: RoleConfig,
    pub flipper: RoleConfig,
    pub pipeline: TtaConfig,
    pub alpha: f64,
    pub threshold_deg: f64,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            dataset: DatasetConfig::default(),
            orienter: RoleConfig {
                trunk: vec![128],
                head: vec![64],
                batch_size: 16,
                points_per_cloud: 128,
                flip_jitter_deg: [0.0, 10.0],
                snapshot_every: 0,
                phases: vec![
                    Phase { steps: 15_000, lr: 3e-3 },
                    Phase { steps: 30_000, lr: 1e-3 },
                    Phase { steps: 40_000, lr: 3e-4 },
                ],
            },
            flipper: RoleConfig {
                trunk: vec![128],
                head: vec![64],
                batch_size: 16,
                points_per_cloud: 128,
                flip_jitter_deg: [0.0, 10.0],
                snapshot_every: 0,
                phases: vec![
                    Phase { steps: 12_000, lr: 3e-3 },
                    Phase { steps: 18_000, lr: 1e-3 },
                ],
            },
            pipeline: TtaConfig { orient_tta_k: 8, flip_tta_k: 0 },
            alpha: 0.3,
            threshold_deg: 10.0,
            sweep: SweepConfig { family: "box_with_back".into(), axis: "y".into(), step_deg: 1.0 },
        }
    }
}

pub fn family_by_name(name: &str) -> Result<ShapeFamily> {
    name.parse()
}

fn validate_role(label: &str, role: &RoleConfig) -> Result<()> {
    role.arch(HeadKind::Orienter).validate()?;
    if role.batch_size == 0 {
        return Err(Error::Config(format!("{label}: batch size must be positive")));
    }
    if role.points_per_cloud < MIN_POINTS {
        return Err(Error::Config(format!(
            "{label}: points per cloud must be at least {MIN_POINTS}"
        )));
    }
    let [lo, hi] = role.flip_jitter_deg;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
        return Err(Error::Config(format!("{label}: bad flip jitter range [{lo}, {hi}]")));
    }
    if role.phases.is_empty() {
        return Err(Error::Config(format!("{label}: at least one training phase required")));
    }
    let mut prev = 0;
    for (i, phase) in role.phases.iter().enumerate() {
        if phase.steps <= prev && !(i == 0 && phase.steps > 0) {
            return Err(Error::Config(format!(
                "{label}: phase step counts must increase (phase {i} ends at {})",
                phase.steps
            )));
        }
        if !(phase.lr.is_finite() && phase.lr > 0.0) {
            return Err(Error::Config(format!("{label}: phase {i} learning rate {}", phase.lr)));
        }
        prev = phase.steps;
    }
    Ok(())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dataset.families.is_empty() {
            return Err(Error::Config("dataset: at least one family required".into()));
        }
        for name in &self.dataset.families {
            family_by_name(name)?;
        }
        let mut unique = self.dataset.families.clone();
        unique.sort();
        unique.dedup();
        if unique.len() != self.dataset.families.len() {
            return Err(Error::Config("dataset: duplicate family".into()));
        }
        if self.dataset.train_per_family == 0 {
            return Err(Error::Config("dataset: train_per_family must be positive".into()));
        }
        if self.dataset.cal_total == 0 || self.dataset.test_total == 0 {
            return Err(Error::Config("dataset: empty calibration or test split".into()));
        }
        if self.dataset.points_per_cloud < MIN_POINTS {
            return Err(Error::Config(format!(
                "dataset: points per cloud must be at least {MIN_POINTS}"
            )));
        }
        if !(0.0..0.5).contains(&self.dataset.param_jitter) {
            return Err(Error::Config(format!(
                "dataset: param jitter {} outside [0, 0.5)",
                self.dataset.param_jitter
            )));
        }
        validate_role("orienter", &self.orienter)?;
        validate_role("flipper", &self.flipper)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.threshold_deg.is_finite() && self.threshold_deg > 0.0) {
            return Err(Error::Config(format!("threshold {} degrees", self.threshold_deg)));
        }
        family_by_name(&self.sweep.family)?;
        self.sweep.axis_vector()?;
        if !(self.sweep.step_deg.is_finite() && self.sweep.step_deg > 0.0) {
            return Err(Error::Config(format!("sweep step {} degrees", self.sweep.step_deg)));
        }
        Ok(())
    }

    /// Parse and validate; malformed JSON is a configuration error here
    /// (the text came from a config file, not a data artifact).
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hash of the whole configuration.
    pub fn config_hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }

    /// Hash of the dataset section only; datasets stay valid when
    /// unrelated settings change.
    pub fn dataset_hash(&self) -> String {
        sha256_hex(serde_json::to_string(&self.dataset).expect("config serializes").as_bytes())
    }

    /// Identity hash for a trained model: the seed plus everything about
    /// the role except its training schedule, so a checkpoint can be
    /// resumed after extending the phases but never reused across a
    /// different architecture, data recipe, or seed.
    pub fn role_hash(&self, role: &RoleConfig) -> String {
        let identity = (
            self.seed,
            &self.dataset,
            &role.trunk,
            &role.head,
            role.batch_size,
            role.points_per_cloud,
            role.flip_jitter_deg,
        );
        sha256_hex(serde_json::to_string(&identity).expect("config serializes").as_bytes())
    }

    /// Hash of every section a conformal calibration depends on (models,
    /// data, augmentation, alpha, seed); evaluation knobs are excluded.
    pub fn calibration_hash(&self) -> String {
        let parts =
            (self.seed, &self.dataset, &self.orienter, &self.flipper, &self.pipeline, self.alpha);
        sha256_hex(serde_json::to_string(&parts).expect("config serializes").as_bytes())
    }
}
