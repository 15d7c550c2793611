//! Rotation matrices, the special-orthogonal Procrustes projection, and
//! Haar-uniform rotation sampling.
//!
//! All rotations are plain 3x3 `f64` matrices.  `Rotation` is a validated
//! wrapper: orthonormal and determinant +1 within [`ORTHO_TOL`].  Raw
//! (unconstrained) matrices use [`Mat3`] directly, e.g. model outputs
//! before projection.

use nalgebra::linalg::SVD;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Mat3 = nalgebra::Matrix3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Deterministic random stream; a fixed 64-bit seed reproduces the exact
/// sequence on every platform.
pub type RngState = rand_chacha::ChaCha8Rng;

/// Max deviation from orthonormality / unit determinant for a valid rotation.
pub const ORTHO_TOL: f64 = 1e-9;

/// A projected matrix is degenerate when its smallest singular value falls
/// below this ratio of the largest.
pub const DEGENERACY_RATIO: f64 = 1e-7;

pub fn seeded_rng(seed: u64) -> RngState {
    RngState::seed_from_u64(seed)
}

/// Derive an independent seed from a base seed and a stream tag, so that
/// per-step or per-shape streams can be reproduced without tracking stream
/// positions (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(tag.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A rotation matrix: orthonormal with determinant +1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Validates orthonormality and determinant before wrapping.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("rotation matrix has non-finite entries".into()));
        }
        let gram = m.transpose() * m;
        let ortho_dev = (gram - Mat3::identity()).abs().max();
        if ortho_dev > ORTHO_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not orthonormal: max |R^T R - I| = {ortho_dev:.3e}"
            )));
        }
        let det_dev = (m.determinant() - 1.0).abs();
        if det_dev > ORTHO_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix determinant is not +1: |det - 1| = {det_dev:.3e}"
            )));
        }
        Ok(Rotation(m))
    }

    /// For matrices known valid by construction (products of rotations,
    /// projection outputs).
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn about_x(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Rotation(Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn about_y(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Rotation(Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn about_z(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Rotation(Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Rodrigues formula; the axis need not be unit length but must be nonzero.
    pub fn from_axis_angle(axis: &Vec3, radians: f64) -> Result<Self> {
        let n = axis.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::InvalidInput("rotation axis must be a nonzero finite vector".into()));
        }
        let u = axis / n;
        let k = Mat3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0);
        let m = Mat3::identity() + k * radians.sin() + k * k * (1.0 - radians.cos());
        Ok(Rotation(m))
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotation angle in radians, in [0, pi].
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

impl std::ops::Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Serialize for Rotation {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let m = &self.0;
        let row_major: [f64; 9] = [
            m[(0, 0)], m[(0, 1)], m[(0, 2)],
            m[(1, 0)], m[(1, 1)], m[(1, 2)],
            m[(2, 0)], m[(2, 1)], m[(2, 2)],
        ];
        row_major.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let v = <[f64; 9]>::deserialize(de)?;
        let m = Mat3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
        Rotation::from_matrix(m).map_err(D::Error::custom)
    }
}

/// Result of projecting a raw matrix onto the rotation group.
#[derive(Clone, Copy, Debug)]
pub struct Projection {
    pub rotation: Rotation,
    /// True when the input was rank-deficient enough that the projection is
    /// not unique; the returned rotation is then the deterministic one
    /// induced by the canonical singular-vector sign convention below.
    pub degenerate: bool,
}

/// Nearest rotation to `m` in Frobenius norm: from the SVD `m = U S V^T`,
/// returns `U diag(1, 1, det(U V^T)) V^T`.
///
/// Singular vectors are canonicalized before recomposition: the
/// largest-magnitude entry of each right singular vector is made positive
/// (flipping the paired left vector), so degenerate inputs map to a stable,
/// reproducible rotation.
pub fn procrustes_project(m: &Mat3) -> Result<Projection> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidInput("projection input has non-finite entries".into()));
    }
    let svd = SVD::try_new(*m, true, true, f64::EPSILON, 1000)
        .ok_or_else(|| Error::Numeric("SVD did not converge".into()))?;
    let mut u = svd.u.expect("u requested");
    let mut v_t = svd.v_t.expect("v_t requested");
    let s = svd.singular_values;

    for i in 0..3 {
        let mut k = 0;
        for j in 1..3 {
            if v_t[(i, j)].abs() > v_t[(i, k)].abs() {
                k = j;
            }
        }
        if v_t[(i, k)] < 0.0 {
            for j in 0..3 {
                v_t[(i, j)] = -v_t[(i, j)];
                u[(j, i)] = -u[(j, i)];
            }
        }
    }

    let degenerate = s[0] <= 0.0 || s[2] < DEGENERACY_RATIO * s[0];
    let d = if (u * v_t).determinant() < 0.0 { -1.0 } else { 1.0 };
    let r = u * Mat3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * v_t;
    Ok(Projection { rotation: Rotation::from_matrix_unchecked(r), degenerate })
}

/// Haar-uniform random rotation: four standard normals normalized to a unit
/// quaternion, then converted to a matrix.
pub fn random_rotation(rng: &mut RngState) -> Rotation {
    loop {
        let w: f64 = rng.sample(StandardNormal);
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n < 1e-6 {
            continue;
        }
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        let m = Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        );
        return Rotation(m);
    }
}

/// Squared Frobenius distance between two matrices.
pub fn frobenius_sq(a: &Mat3, b: &Mat3) -> f64 {
    (a - b).norm_squared()
}

/// Angle in radians between two direction vectors.  Inputs are normalized
/// defensively; a near-zero vector is an error.
pub fn axis_angular_error(u: &Vec3, v: &Vec3) -> Result<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if !nu.is_finite() || !nv.is_finite() || nu < 1e-9 || nv < 1e-9 {
        return Err(Error::InvalidInput("axis angular error of a zero-length vector".into()));
    }
    Ok((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0).acos())
}
