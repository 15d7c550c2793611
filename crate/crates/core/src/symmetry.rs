//! Rotational symmetry groups of shapes, detected from point clouds, and
//! the closed-form naive orientation minimizer they induce.
//!
//! A symmetry group is a closed subset of the 24 flips.  Detection marks
//! every flip whose chamfer distance to the original cloud falls under a
//! tolerance, then returns the largest subgroup contained in that candidate
//! set, so the result is always closed even when sampling noise lets a
//! stray flip through.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{apply_rotation, chamfer, PointCloud};
use crate::octa::{Flip, FLIP_COUNT};
use crate::so3::{procrustes_project, Mat3, Projection, Rotation};

/// Default chamfer tolerance for clouds closed exactly under their group.
pub const TOL_SYMMETRIZED: f64 = 1e-3;
/// Default chamfer tolerance for independently sampled clouds.
pub const TOL_SAMPLED: f64 = 5e-3;

/// A closed set of flips containing the identity, stored as sorted indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymmetryGroup {
    flips: Vec<Flip>,
}

impl SymmetryGroup {
    pub fn trivial() -> Self {
        SymmetryGroup { flips: vec![Flip::IDENTITY] }
    }

    pub fn full() -> Self {
        SymmetryGroup { flips: Flip::all().collect() }
    }

    /// Validates closure under composition and inverse; the identity must be
    /// present.
    pub fn from_flips(mut flips: Vec<Flip>) -> Result<Self> {
        flips.sort();
        flips.dedup();
        if !flips.contains(&Flip::IDENTITY) {
            return Err(Error::InvalidInput("symmetry group must contain the identity".into()));
        }
        for &a in &flips {
            if !flips.contains(&a.inverse()) {
                return Err(Error::InvalidInput(format!(
                    "symmetry set is not closed: inverse of flip {} missing",
                    a.index()
                )));
            }
            for &b in &flips {
                if !flips.contains(&a.compose(b)) {
                    return Err(Error::InvalidInput(format!(
                        "symmetry set is not closed: product of flips {} and {} missing",
                        a.index(),
                        b.index()
                    )));
                }
            }
        }
        Ok(SymmetryGroup { flips })
    }

    /// Smallest closed group containing the generators.
    pub fn generated_by(generators: &[Flip]) -> Self {
        let mut members = vec![false; FLIP_COUNT];
        members[Flip::IDENTITY.index()] = true;
        let mut frontier: Vec<Flip> = vec![Flip::IDENTITY];
        while let Some(f) = frontier.pop() {
            for &g in generators {
                let p = f.compose(g);
                if !members[p.index()] {
                    members[p.index()] = true;
                    frontier.push(p);
                }
            }
        }
        let flips = Flip::all().filter(|f| members[f.index()]).collect();
        SymmetryGroup { flips }
    }

    pub fn flips(&self) -> &[Flip] {
        &self.flips
    }

    pub fn order(&self) -> usize {
        self.flips.len()
    }

    pub fn contains(&self, f: Flip) -> bool {
        self.flips.binary_search(&f).is_ok()
    }
}

/// Every subgroup of the flip group (there are 30), each sorted by index.
/// All of them are generated by at most two elements, so closing every
/// singleton and pair enumerates the full lattice.
static SUBGROUPS: LazyLock<Vec<Vec<Flip>>> = LazyLock::new(|| {
    let mut found: Vec<Vec<Flip>> = Vec::new();
    let mut push = |g: SymmetryGroup| {
        let v = g.flips;
        if !found.contains(&v) {
            found.push(v);
        }
    };
    for a in Flip::all() {
        push(SymmetryGroup::generated_by(&[a]));
        for b in Flip::all() {
            push(SymmetryGroup::generated_by(&[a, b]));
        }
    }
    found.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    found
});

/// Chamfer distance from the cloud to each of its 24 flipped copies, in
/// canonical flip order.
pub fn flip_chamfers(cloud: &PointCloud) -> Result<Vec<f64>> {
    Flip::all()
        .map(|f| chamfer(&apply_rotation(cloud, f.rotation()), cloud))
        .collect()
}

/// Largest subgroup whose members are all flagged as candidates.  Ties on
/// order break towards the lexicographically smallest index set.
fn largest_subgroup_within(candidate: &[bool; FLIP_COUNT]) -> Vec<Flip> {
    let mut best: &Vec<Flip> = &SUBGROUPS[0];
    for sub in SUBGROUPS.iter() {
        if sub.iter().all(|f| candidate[f.index()]) {
            let better = sub.len() > best.len() || (sub.len() == best.len() && sub < best);
            if better {
                best = sub;
            }
        }
    }
    best.clone()
}

/// Flips that map the cloud onto itself within `tol` of chamfer distance.
pub fn detect_symmetries(cloud: &PointCloud, tol: f64) -> Result<SymmetryGroup> {
    assert!(tol > 0.0, "symmetry tolerance must be positive");
    let distances = flip_chamfers(cloud)?;
    let mut candidate = [false; FLIP_COUNT];
    for (i, d) in distances.iter().enumerate() {
        candidate[i] = *d < tol;
    }
    candidate[Flip::IDENTITY.index()] = true;
    Ok(SymmetryGroup { flips: largest_subgroup_within(&candidate) })
}

/// Arithmetic mean of the rotation matrices, projected back onto the
/// rotation group.  Degenerate whenever the mean loses rank, e.g. for a
/// 180-degree pair.
pub fn euclidean_mean(rotations: &[Rotation]) -> Result<Projection> {
    if rotations.is_empty() {
        return Err(Error::InvalidInput("euclidean mean of no rotations".into()));
    }
    let mut sum = Mat3::zeros();
    for r in rotations {
        sum += r.matrix();
    }
    procrustes_project(&(sum / rotations.len() as f64))
}

/// The best single rotation under the plain (quotient-free) L2 objective
/// for a shape with symmetry group `sym`, true rotation `r`, and canonical
/// orientation `omega`: the projected mean of the orbit `{r Q omega}`.
pub fn naive_minimizer(sym: &SymmetryGroup, omega: &Rotation, r: &Rotation) -> Result<Projection> {
    let orbit: Vec<Rotation> = sym.flips.iter().map(|q| *r * *q.rotation() * *omega).collect();
    euclidean_mean(&orbit)
}

/// Mean squared Frobenius distance from `x` to the orbit `{r Q omega}`;
/// the objective the naive minimizer optimizes.
pub fn orbit_l2_objective(sym: &SymmetryGroup, omega: &Rotation, r: &Rotation, x: &Rotation) -> f64 {
    let mut total = 0.0;
    for q in &sym.flips {
        let target = *r * *q.rotation() * *omega;
        total += crate::so3::frobenius_sq(x.matrix(), target.matrix());
    }
    total / sym.flips.len() as f64
}
