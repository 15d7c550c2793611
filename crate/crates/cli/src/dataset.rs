//! Dataset generation and loading.
//!
//! A dataset is a directory holding `manifest.json` plus one canonical
//! point cloud per shape.  Shapes are jittered variants of the configured
//! families, split into train / calibration / test.  Calibration and test
//! shapes are assigned round-robin over the families so the requested
//! totals are hit exactly.  Every generated cloud is verified against its
//! family's declared symmetries before it is written; loading re-verifies
//! structure everywhere and re-runs the geometric check on a spot-check
//! subset.

use std::fmt;
use std::path::Path;

use orient_core::error::{Error, Result};
use orient_core::geometry::{
    apply_rotation, chamfer, make_shape, normalize, parse_cloud_json, symmetrized_sample,
    write_cloud_json, PointCloud, ShapeFamily, ShapeSpec,
};
use orient_core::model::MIN_POINTS;
use orient_core::octa::{ordering_fingerprint, Flip, FLIP_COUNT};
use orient_core::so3::{derive_seed, seeded_rng};
use orient_core::symmetry::{detect_symmetries, SymmetryGroup, TOL_SYMMETRIZED};
use serde::{Deserialize, Serialize};

use crate::artifacts::{atomic_write, read_json, safe_relative, write_json};
use crate::config::{family_by_name, RunConfig};

/// Seed-stream tag for dataset generation (training, calibration, and
/// evaluation each use their own tag, so streams never overlap).
pub const GEN_SEED_TAG: u64 = 0xDA7A;

/// Every this-many shapes gets the full geometric symmetry re-check at
/// load time (generation always checks every shape).
const SPOT_CHECK_STRIDE: usize = 37;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Cal,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Cal => "cal",
            Split::Test => "test",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeEntry {
    pub id: String,
    pub family: String,
    pub params: Vec<f64>,
    /// Indices into the flip table of this shape's declared symmetries.
    pub symmetry_flips: Vec<usize>,
    pub split: Split,
    pub points: usize,
    /// Cloud file, relative to the dataset directory.
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub flip_fingerprint: String,
    /// Hash of the dataset section of the run configuration.
    pub dataset_hash: String,
    pub seed: u64,
    pub shapes: Vec<ShapeEntry>,
}

pub struct LoadedShape {
    pub entry: ShapeEntry,
    pub family: ShapeFamily,
    pub symmetry: SymmetryGroup,
    pub cloud: PointCloud,
}

pub struct Dataset {
    pub manifest: Manifest,
    pub shapes: Vec<LoadedShape>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &LoadedShape> {
        self.shapes.iter().filter(move |s| s.entry.split == split)
    }

    pub fn clouds(&self, split: Split) -> Vec<PointCloud> {
        self.split(split).map(|s| s.cloud.clone()).collect()
    }
}

fn group_indices(group: &SymmetryGroup) -> Vec<usize> {
    group.flips().iter().map(|f| f.index()).collect()
}

/// Generate every shape of a dataset into `dir` and return the manifest
/// (also written to `dir/manifest.json`).
pub fn generate(cfg: &RunConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let families: Vec<ShapeFamily> =
        cfg.dataset.families.iter().map(|n| family_by_name(n)).collect::<Result<_>>()?;
    let mut slots: Vec<(Split, ShapeFamily)> = Vec::new();
    for &family in &families {
        for _ in 0..cfg.dataset.train_per_family {
            slots.push((Split::Train, family));
        }
    }
    for i in 0..cfg.dataset.cal_total {
        slots.push((Split::Cal, families[i % families.len()]));
    }
    for i in 0..cfg.dataset.test_total {
        slots.push((Split::Test, families[i % families.len()]));
    }

    let mut rng = seeded_rng(derive_seed(cfg.seed, GEN_SEED_TAG));
    let mut shapes = Vec::with_capacity(slots.len());
    let mut split_counter = [0usize; 3];
    for (split, family) in slots {
        let idx = &mut split_counter[split as usize];
        let id = format!("{split}{idx:03}_{family}");
        *idx += 1;

        let spec = ShapeSpec::jittered(family, cfg.dataset.param_jitter, &mut rng);
        let mesh = make_shape(&spec)?;
        let group = spec.declared_symmetries();
        let cloud = normalize(&symmetrized_sample(
            &mesh,
            cfg.dataset.points_per_cloud,
            group.flips(),
            &mut rng,
        )?)?;
        let detected = detect_symmetries(&cloud, TOL_SYMMETRIZED)?;
        if detected != group {
            return Err(Error::Structure(format!(
                "shape {id}: jittered parameters changed the symmetries \
                 (declared flips {:?}, detected {:?}); lower the parameter jitter",
                group_indices(&group),
                group_indices(&detected),
            )));
        }

        let file = format!("shapes/{id}.json");
        atomic_write(&dir.join(&file), write_cloud_json(&cloud).as_bytes())?;
        shapes.push(ShapeEntry {
            id,
            family: family.name().to_string(),
            params: spec.params,
            symmetry_flips: group_indices(&group),
            split,
            points: cloud.len(),
            file,
        });
    }

    let manifest = Manifest {
        flip_fingerprint: ordering_fingerprint().to_string(),
        dataset_hash: cfg.dataset_hash(),
        seed: cfg.seed,
        shapes,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Load a dataset directory.  When `expected_hash` is given, the manifest
/// must have been generated from the same dataset configuration.
pub fn load(dir: &Path, expected_hash: Option<&str>) -> Result<Dataset> {
    let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
    if manifest.flip_fingerprint != ordering_fingerprint() {
        return Err(Error::Mismatch(format!(
            "dataset flip ordering fingerprint {} does not match this build's {}",
            manifest.flip_fingerprint,
            ordering_fingerprint()
        )));
    }
    if let Some(hash) = expected_hash {
        if manifest.dataset_hash != hash {
            return Err(Error::Mismatch(
                "dataset was generated from a different dataset configuration".into(),
            ));
        }
    }

    let mut seen = std::collections::HashSet::new();
    let mut shapes = Vec::with_capacity(manifest.shapes.len());
    for (i, entry) in manifest.shapes.iter().enumerate() {
        if !seen.insert(entry.id.as_str()) {
            return Err(Error::Structure(format!("duplicate shape id {}", entry.id)));
        }
        let family = family_by_name(&entry.family)?;
        for &f in &entry.symmetry_flips {
            if f >= FLIP_COUNT {
                return Err(Error::Structure(format!(
                    "shape {}: flip index {f} out of range",
                    entry.id
                )));
            }
        }
        let flips: Vec<Flip> =
            entry.symmetry_flips.iter().map(|&f| Flip::from_index(f).unwrap()).collect();
        let symmetry = SymmetryGroup::from_flips(flips)
            .map_err(|e| Error::Structure(format!("shape {}: {e}", entry.id)))?;
        let path = dir.join(safe_relative(&entry.file)?);
        let cloud = parse_cloud_json(&std::fs::read_to_string(&path)?)?;
        if cloud.len() != entry.points || cloud.len() < MIN_POINTS {
            return Err(Error::Structure(format!(
                "shape {}: cloud has {} points, manifest says {}",
                entry.id,
                cloud.len(),
                entry.points
            )));
        }
        if i % SPOT_CHECK_STRIDE == 0 {
            for flip in symmetry.flips() {
                let d = chamfer(&apply_rotation(&cloud, flip.rotation()), &cloud)?;
                if d > TOL_SYMMETRIZED {
                    return Err(Error::Structure(format!(
                        "shape {}: cloud is not symmetric under declared flip {} \
                         (chamfer {d:.2e})",
                        entry.id,
                        flip.index()
                    )));
                }
            }
        }
        shapes.push(LoadedShape { entry: entry.clone(), family, symmetry, cloud });
    }
    Ok(Dataset { manifest, shapes })
}
