//! Synthetic shape families with known rotational symmetry groups.
//!
//! Every family is built in canonical pose: up is +y, and the declared
//! symmetry group is exact for the mesh (verified against the detection
//! oracle when datasets are generated).  Parameters are half-extents
//! unless noted; jitter stays inside limits that preserve the declared
//! group (e.g. box extents remain well separated).

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::octa::{flip_of, Flip};
use crate::so3::{Rotation, RngState, Vec3};
use crate::symmetry::SymmetryGroup;

use super::TriangleMesh;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    /// Equal extents; all 24 flips.
    Cube,
    /// Three distinct half-extents; the three 180-degree flips.
    Box,
    /// Bench-like: a seat slab with a narrower riser on top; 180 about y.
    BoxWithBack,
    /// Two slabs joined at a right angle; trivial.
    LBracket,
    /// Plus-shaped arms in the xz plane with a square cap; 90 steps about y.
    CrossPrism,
    /// Four vertices in generic position; trivial.
    TetraAsym,
    /// Three shrinking square slabs; 90 steps about y.
    SteppedPyramid,
    /// T cross-section extruded along z; 180 about y.
    TPrism,
    /// Right-triangular prism; trivial.
    Wedge,
    /// Arms along all three axes; all 24 flips.
    Cross3d,
    /// H cross-section extruded along z; the three 180-degree flips.
    HPrism,
    /// Square rod with equal cubes at both ends; the 8-element group fixing y.
    Dumbbell,
    /// Square base with an apex; 90 steps about y.
    Pyramid,
    /// Three steps of increasing height; trivial.
    Staircase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub family: ShapeFamily,
    pub params: Vec<f64>,
}

struct FlipBasis {
    rx180: Flip,
    ry180: Flip,
    rz180: Flip,
    ry90: Flip,
}

static BASIS: LazyLock<FlipBasis> = LazyLock::new(|| FlipBasis {
    rx180: flip_of(&Rotation::about_x(std::f64::consts::PI)).unwrap(),
    ry180: flip_of(&Rotation::about_y(std::f64::consts::PI)).unwrap(),
    rz180: flip_of(&Rotation::about_z(std::f64::consts::PI)).unwrap(),
    ry90: flip_of(&Rotation::about_y(std::f64::consts::FRAC_PI_2)).unwrap(),
});

impl ShapeFamily {
    pub fn all() -> [ShapeFamily; 14] {
        use ShapeFamily::*;
        [
            Cube, Box, BoxWithBack, LBracket, CrossPrism, TetraAsym, SteppedPyramid,
            TPrism, Wedge, Cross3d, HPrism, Dumbbell, Pyramid, Staircase,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Cube => "cube",
            ShapeFamily::Box => "box",
            ShapeFamily::BoxWithBack => "box_with_back",
            ShapeFamily::LBracket => "l_bracket",
            ShapeFamily::CrossPrism => "cross_prism",
            ShapeFamily::TetraAsym => "tetra_asym",
            ShapeFamily::SteppedPyramid => "stepped_pyramid",
            ShapeFamily::TPrism => "t_prism",
            ShapeFamily::Wedge => "wedge",
            ShapeFamily::Cross3d => "cross3d",
            ShapeFamily::HPrism => "h_prism",
            ShapeFamily::Dumbbell => "dumbbell",
            ShapeFamily::Pyramid => "pyramid",
            ShapeFamily::Staircase => "staircase",
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ShapeFamily::Cube => &["half_extent"],
            ShapeFamily::Box => &["half_x", "half_y", "half_z"],
            ShapeFamily::BoxWithBack => &[
                "seat_half_x", "seat_half_y", "seat_half_z",
                "back_half_x", "back_half_y", "back_half_z",
            ],
            ShapeFamily::LBracket => &["arm_half", "thickness_half", "upright_half", "depth_half"],
            ShapeFamily::CrossPrism => &[
                "arm_half", "bar_half", "height_half", "cap_half", "cap_height_half",
            ],
            ShapeFamily::TetraAsym => &[
                "v0x", "v0y", "v0z", "v1x", "v1y", "v1z",
                "v2x", "v2y", "v2z", "v3x", "v3y", "v3z",
            ],
            ShapeFamily::SteppedPyramid => &["base_half", "step_ratio", "step_height_half"],
            ShapeFamily::TPrism => &[
                "bar_half_x", "bar_half_y", "stem_half_x", "stem_half_y", "depth_half",
            ],
            ShapeFamily::Wedge => &["half_x", "base_half_z", "height"],
            ShapeFamily::Cross3d => &["arm_half", "bar_half"],
            ShapeFamily::HPrism => &[
                "post_half_x", "post_half_y", "post_offset_x", "bar_half_y", "depth_half",
            ],
            ShapeFamily::Dumbbell => &["rod_half", "rod_half_len", "end_half"],
            ShapeFamily::Pyramid => &["base_half", "height"],
            ShapeFamily::Staircase => &["step_half_x", "depth_half", "step_height_half"],
        }
    }

    pub fn default_params(self) -> Vec<f64> {
        match self {
            ShapeFamily::Cube => vec![0.8],
            ShapeFamily::Box => vec![1.0, 0.62, 0.35],
            ShapeFamily::BoxWithBack => vec![1.0, 0.22, 0.55, 0.55, 0.5, 0.16],
            ShapeFamily::LBracket => vec![0.9, 0.18, 0.55, 0.4],
            ShapeFamily::CrossPrism => vec![0.95, 0.28, 0.3, 0.2, 0.22],
            ShapeFamily::TetraAsym => vec![
                1.0, -0.2, 0.1, -0.55, -0.35, 0.75, -0.6, -0.3, -0.8, 0.1, 0.95, -0.05,
            ],
            ShapeFamily::SteppedPyramid => vec![0.9, 0.68, 0.25],
            ShapeFamily::TPrism => vec![0.85, 0.2, 0.22, 0.55, 0.38],
            ShapeFamily::Wedge => vec![0.75, 0.6, 0.9],
            ShapeFamily::Cross3d => vec![0.95, 0.3],
            ShapeFamily::HPrism => vec![0.2, 0.85, 0.75, 0.16, 0.3],
            ShapeFamily::Dumbbell => vec![0.14, 0.62, 0.34],
            ShapeFamily::Pyramid => vec![0.85, 1.1],
            ShapeFamily::Staircase => vec![0.32, 0.55, 0.3],
        }
    }

    /// Rotations that map the canonical mesh onto itself.
    pub fn declared_symmetries(self) -> SymmetryGroup {
        let b = &*BASIS;
        match self {
            ShapeFamily::Cube | ShapeFamily::Cross3d => SymmetryGroup::full(),
            ShapeFamily::Box | ShapeFamily::HPrism => {
                SymmetryGroup::generated_by(&[b.rx180, b.rz180])
            }
            ShapeFamily::BoxWithBack | ShapeFamily::TPrism => {
                SymmetryGroup::generated_by(&[b.ry180])
            }
            ShapeFamily::CrossPrism | ShapeFamily::SteppedPyramid | ShapeFamily::Pyramid => {
                SymmetryGroup::generated_by(&[b.ry90])
            }
            ShapeFamily::Dumbbell => SymmetryGroup::generated_by(&[b.ry90, b.rx180]),
            ShapeFamily::LBracket
            | ShapeFamily::TetraAsym
            | ShapeFamily::Wedge
            | ShapeFamily::Staircase => SymmetryGroup::trivial(),
        }
    }
}

impl fmt::Display for ShapeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeFamily::all()
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown shape family {s:?}; valid families: {}",
                    ShapeFamily::all().map(|f| f.name()).join(", ")
                ))
            })
    }
}

impl ShapeSpec {
    pub fn with_default_params(family: ShapeFamily) -> Self {
        ShapeSpec { family, params: family.default_params() }
    }

    /// Default parameters perturbed by a relative `amount` (additive for the
    /// tetrahedron's raw coordinates), staying within symmetry-preserving
    /// limits for jitter up to ~10%.
    pub fn jittered(family: ShapeFamily, amount: f64, rng: &mut RngState) -> Self {
        let mut params = family.default_params();
        for p in &mut params {
            let u: f64 = rng.random_range(-amount..amount);
            if family == ShapeFamily::TetraAsym {
                *p += u;
            } else {
                *p *= 1.0 + u;
            }
        }
        ShapeSpec { family, params }
    }

    pub fn declared_symmetries(&self) -> SymmetryGroup {
        self.family.declared_symmetries()
    }
}

fn check(ok: bool, family: ShapeFamily, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{family}: {msg}")))
    }
}

/// Canonical-pose mesh for a shape spec.  Parameter problems are config
/// errors naming the offending field.
pub fn make_shape(spec: &ShapeSpec) -> Result<TriangleMesh> {
    let family = spec.family;
    let expected = family.param_names().len();
    check(
        spec.params.len() == expected,
        family,
        &format!("expects {expected} parameters, got {}", spec.params.len()),
    )?;
    if family != ShapeFamily::TetraAsym {
        for (name, value) in family.param_names().iter().zip(&spec.params) {
            check(value.is_finite() && *value > 0.0, family, &format!("{name} must be positive"))?;
        }
    }
    let p = &spec.params;

    let mut b = MeshBuilder::default();
    match family {
        ShapeFamily::Cube => {
            b.push_box(Vec3::zeros(), Vec3::new(p[0], p[0], p[0]));
        }
        ShapeFamily::Box => {
            let mut sorted = [p[0], p[1], p[2]];
            sorted.sort_by(f64::total_cmp);
            check(
                sorted[1] / sorted[0] > 1.2 && sorted[2] / sorted[1] > 1.2,
                family,
                "half_x, half_y, half_z must stay well separated (ratio above 1.2)",
            )?;
            b.push_box(Vec3::zeros(), Vec3::new(p[0], p[1], p[2]));
        }
        ShapeFamily::BoxWithBack => {
            let (sx, sy, sz, bx, by, bz) = (p[0], p[1], p[2], p[3], p[4], p[5]);
            check(bx < sx, family, "back_half_x must be smaller than seat_half_x")?;
            check(bz < sz, family, "back_half_z must be smaller than seat_half_z")?;
            b.push_box(Vec3::zeros(), Vec3::new(sx, sy, sz));
            b.push_box(Vec3::new(0.0, sy + by, 0.0), Vec3::new(bx, by, bz));
        }
        ShapeFamily::LBracket => {
            let (arm, t, up, d) = (p[0], p[1], p[2], p[3]);
            check(t < arm, family, "thickness_half must be smaller than arm_half")?;
            b.push_box(Vec3::zeros(), Vec3::new(arm, t, d));
            b.push_box(Vec3::new(-arm + t, t + up, 0.0), Vec3::new(t, up, d));
        }
        ShapeFamily::CrossPrism => {
            let (arm, bar, h, cap, ch) = (p[0], p[1], p[2], p[3], p[4]);
            check(bar < 0.75 * arm, family, "bar_half must be under three quarters of arm_half")?;
            check(cap <= bar, family, "cap_half must not exceed bar_half")?;
            b.push_box(Vec3::zeros(), Vec3::new(arm, h, bar));
            b.push_box(Vec3::zeros(), Vec3::new(bar, h, arm));
            b.push_box(Vec3::new(0.0, h + ch, 0.0), Vec3::new(cap, ch, cap));
        }
        ShapeFamily::TetraAsym => {
            let v: Vec<Vec3> = p.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
            check(v.iter().all(|q| q.iter().all(|c| c.is_finite())), family, "coordinates must be finite")?;
            let volume = ((v[1] - v[0]).cross(&(v[2] - v[0]))).dot(&(v[3] - v[0])).abs() / 6.0;
            check(volume > 0.02, family, "vertices are too close to coplanar")?;
            b.verts = v;
            b.tris = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
        }
        ShapeFamily::SteppedPyramid => {
            let (base, ratio, h) = (p[0], p[1], p[2]);
            check((0.4..=0.85).contains(&ratio), family, "step_ratio must lie in [0.4, 0.85]")?;
            for k in 0..3 {
                let s = base * ratio.powi(k);
                b.push_box(Vec3::new(0.0, (2 * k + 1) as f64 * h, 0.0), Vec3::new(s, h, s));
            }
        }
        ShapeFamily::TPrism => {
            let (bx, by, sx, sy, d) = (p[0], p[1], p[2], p[3], p[4]);
            check(sx < bx, family, "stem_half_x must be smaller than bar_half_x")?;
            b.push_box(Vec3::zeros(), Vec3::new(sx, sy, d));
            b.push_box(Vec3::new(0.0, sy + by, 0.0), Vec3::new(bx, by, d));
        }
        ShapeFamily::Wedge => {
            let (hx, c, h) = (p[0], p[1], p[2]);
            b.verts = vec![
                Vec3::new(-hx, 0.0, -c),
                Vec3::new(hx, 0.0, -c),
                Vec3::new(hx, 0.0, c),
                Vec3::new(-hx, 0.0, c),
                Vec3::new(-hx, h, -c),
                Vec3::new(hx, h, -c),
            ];
            b.push_quad(0, 1, 2, 3);
            b.push_quad(0, 1, 5, 4);
            b.push_quad(3, 2, 5, 4);
            b.tris.push([0, 4, 3]);
            b.tris.push([1, 2, 5]);
        }
        ShapeFamily::Cross3d => {
            let (arm, bar) = (p[0], p[1]);
            check(bar < 0.8 * arm, family, "bar_half must be under 0.8 of arm_half")?;
            b.push_box(Vec3::zeros(), Vec3::new(arm, bar, bar));
            b.push_box(Vec3::zeros(), Vec3::new(bar, arm, bar));
            b.push_box(Vec3::zeros(), Vec3::new(bar, bar, arm));
        }
        ShapeFamily::HPrism => {
            let (px, py, ox, by, d) = (p[0], p[1], p[2], p[3], p[4]);
            check(px < ox, family, "post_half_x must be smaller than post_offset_x")?;
            check(by < py, family, "bar_half_y must be smaller than post_half_y")?;
            b.push_box(Vec3::new(-ox, 0.0, 0.0), Vec3::new(px, py, d));
            b.push_box(Vec3::new(ox, 0.0, 0.0), Vec3::new(px, py, d));
            b.push_box(Vec3::zeros(), Vec3::new(ox, by, d));
        }
        ShapeFamily::Dumbbell => {
            let (rw, len, s) = (p[0], p[1], p[2]);
            check(rw < s, family, "rod_half must be smaller than end_half")?;
            b.push_box(Vec3::zeros(), Vec3::new(rw, len, rw));
            b.push_box(Vec3::new(0.0, len + s, 0.0), Vec3::new(s, s, s));
            b.push_box(Vec3::new(0.0, -(len + s), 0.0), Vec3::new(s, s, s));
        }
        ShapeFamily::Pyramid => {
            let (s, h) = (p[0], p[1]);
            b.verts = vec![
                Vec3::new(-s, 0.0, -s),
                Vec3::new(s, 0.0, -s),
                Vec3::new(s, 0.0, s),
                Vec3::new(-s, 0.0, s),
                Vec3::new(0.0, h, 0.0),
            ];
            b.tris = vec![[0, 1, 2], [0, 2, 3], [0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        }
        ShapeFamily::Staircase => {
            let (sx, d, h) = (p[0], p[1], p[2]);
            for k in 0..3i32 {
                let height = h * (k + 1) as f64;
                b.push_box(
                    Vec3::new(2.0 * sx * (k - 1) as f64, height, 0.0),
                    Vec3::new(sx, height, d),
                );
            }
        }
    }
    TriangleMesh::new(b.verts, b.tris)
}

#[derive(Default)]
struct MeshBuilder {
    verts: Vec<Vec3>,
    tris: Vec<[usize; 3]>,
}

impl MeshBuilder {
    fn push_quad(&mut self, a: usize, b: usize, c: usize, d: usize) {
        self.tris.push([a, b, c]);
        self.tris.push([a, c, d]);
    }

    fn push_box(&mut self, center: Vec3, half: Vec3) {
        let base = self.verts.len();
        for (sx, sy, sz) in [
            (-1.0, -1.0, -1.0),
            (1.0, -1.0, -1.0),
            (1.0, 1.0, -1.0),
            (-1.0, 1.0, -1.0),
            (-1.0, -1.0, 1.0),
            (1.0, -1.0, 1.0),
            (1.0, 1.0, 1.0),
            (-1.0, 1.0, 1.0),
        ] {
            self.verts.push(center + Vec3::new(sx * half.x, sy * half.y, sz * half.z));
        }
        for [a, b, c, d] in [
            [0, 1, 2, 3],
            [4, 5, 6, 7],
            [0, 1, 5, 4],
            [3, 2, 6, 7],
            [0, 3, 7, 4],
            [1, 2, 6, 5],
        ] {
            self.push_quad(base + a, base + b, base + c, base + d);
        }
    }
}
