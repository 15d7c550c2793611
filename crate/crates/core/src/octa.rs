//! The 24 rotational symmetries of the axis-aligned cube ("flips"), with a
//! fixed canonical ordering, a precomputed composition table, and the
//! quotient distance between rotations modulo flips.
//!
//! The ordering is pinned so that flip indices are stable across builds and
//! artifacts: the group is generated from the 90-degree rotations about +z
//! and +x by breadth-first closure, then sorted by the flattened row-major
//! integer entries in descending lexicographic order.  That places the
//! identity at index 0.  A fingerprint of the ordered matrices is embedded
//! in checkpoints and calibrations so stale artifacts are rejected.

use std::sync::LazyLock;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::so3::{frobenius_sq, Mat3, Rotation};

pub const FLIP_COUNT: usize = 24;

type IntMat = [[i8; 3]; 3];

const IDENT: IntMat = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
const ROT_Z_90: IntMat = [[0, -1, 0], [1, 0, 0], [0, 0, 1]];
const ROT_X_90: IntMat = [[1, 0, 0], [0, 0, -1], [0, 1, 0]];

fn int_mul(a: &IntMat, b: &IntMat) -> IntMat {
    let mut c = [[0i8; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn int_transpose(a: &IntMat) -> IntMat {
    let mut t = [[0i8; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

fn flatten(a: &IntMat) -> [i8; 9] {
    [
        a[0][0], a[0][1], a[0][2],
        a[1][0], a[1][1], a[1][2],
        a[2][0], a[2][1], a[2][2],
    ]
}

struct Group {
    ints: Vec<IntMat>,
    rots: Vec<Rotation>,
    compose: [[u8; FLIP_COUNT]; FLIP_COUNT],
    inverse: [u8; FLIP_COUNT],
    fingerprint: String,
}

impl Group {
    fn build() -> Group {
        let mut ints: Vec<IntMat> = vec![IDENT];
        let mut frontier = vec![IDENT];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for m in &frontier {
                for g in [&ROT_Z_90, &ROT_X_90] {
                    let p = int_mul(m, g);
                    if !ints.contains(&p) {
                        ints.push(p);
                        next.push(p);
                    }
                }
            }
            frontier = next;
        }
        assert_eq!(ints.len(), FLIP_COUNT, "octahedral closure must have 24 elements");

        ints.sort_by(|a, b| flatten(b).cmp(&flatten(a)));
        assert_eq!(ints[0], IDENT, "canonical ordering must start at the identity");

        let index_of = |m: &IntMat| -> u8 {
            ints.iter().position(|x| x == m).expect("product stays in the group") as u8
        };
        let mut compose = [[0u8; FLIP_COUNT]; FLIP_COUNT];
        let mut inverse = [0u8; FLIP_COUNT];
        for a in 0..FLIP_COUNT {
            inverse[a] = index_of(&int_transpose(&ints[a]));
            for b in 0..FLIP_COUNT {
                compose[a][b] = index_of(&int_mul(&ints[a], &ints[b]));
            }
        }

        let mut hasher = Sha256::new();
        for m in &ints {
            hasher.update(flatten(m).map(|x| x as u8));
        }
        let fingerprint = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>();

        let rots = ints
            .iter()
            .map(|m| {
                let mut f = Mat3::zeros();
                for i in 0..3 {
                    for j in 0..3 {
                        f[(i, j)] = m[i][j] as f64;
                    }
                }
                Rotation::from_matrix(f).expect("signed permutation with det +1")
            })
            .collect();

        Group { ints, rots, compose, inverse, fingerprint }
    }
}

static GROUP: LazyLock<Group> = LazyLock::new(Group::build);

/// Index into the canonical flip ordering; 0 is the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Flip(u8);

impl Flip {
    pub const IDENTITY: Flip = Flip(0);

    pub fn from_index(i: usize) -> Option<Flip> {
        (i < FLIP_COUNT).then_some(Flip(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = Flip> {
        (0..FLIP_COUNT as u8).map(Flip)
    }

    pub fn rotation(self) -> &'static Rotation {
        &GROUP.rots[self.0 as usize]
    }

    /// Row-major integer entries of this flip's matrix.
    pub fn int_matrix(self) -> [[i8; 3]; 3] {
        GROUP.ints[self.0 as usize]
    }

    /// Index of `self * other` (matrix product order).
    pub fn compose(self, other: Flip) -> Flip {
        Flip(GROUP.compose[self.0 as usize][other.0 as usize])
    }

    pub fn inverse(self) -> Flip {
        Flip(GROUP.inverse[self.0 as usize])
    }
}

impl Serialize for Flip {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Flip {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let i = u8::deserialize(de)?;
        Flip::from_index(i as usize)
            .ok_or_else(|| D::Error::custom(format!("flip index {i} out of range")))
    }
}

/// The 24 flip rotations in canonical order.
pub fn elements() -> &'static [Rotation] {
    &GROUP.rots
}

/// Hash of the canonical ordering, embedded in artifacts so that a
/// checkpoint or calibration built against a different ordering is refused.
pub fn ordering_fingerprint() -> &'static str {
    &GROUP.fingerprint
}

/// Exact lookup of a flip rotation (entries within 1e-9 of integers).
pub fn flip_of(r: &Rotation) -> Option<Flip> {
    let m = r.matrix();
    let mut int = [[0i8; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let e = m[(i, j)];
            let rounded = e.round();
            if (e - rounded).abs() > 1e-9 {
                return None;
            }
            int[i][j] = rounded as i8;
        }
    }
    GROUP.ints.iter().position(|x| *x == int).map(|i| Flip(i as u8))
}

/// Squared Frobenius distance from `a` to the orbit `{b Q}` over all flips
/// `Q`, together with the minimizing flip (lowest index on ties).
pub fn quotient_distance_sq(a: &Rotation, b: &Rotation) -> (f64, Flip) {
    let mut best = f64::INFINITY;
    let mut arg = 0u8;
    for (q, rot) in GROUP.rots.iter().enumerate() {
        let d = frobenius_sq(a.matrix(), &(b.matrix() * rot.matrix()));
        if d < best {
            best = d;
            arg = q as u8;
        }
    }
    (best, Flip(arg))
}

/// Residual rotation angle (radians) between `a` and the nearest element of
/// `{b Q}`.
pub fn quotient_angle(a: &Rotation, b: &Rotation) -> f64 {
    let (_, q) = quotient_distance_sq(a, b);
    (a.transpose() * (*b * *q.rotation())).angle()
}

/// The flip nearest to `r` in Frobenius norm (lowest index on ties).
pub fn nearest_flip(r: &Rotation) -> Flip {
    let m = r.matrix();
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0u8;
    for (q, int) in GROUP.ints.iter().enumerate() {
        let mut tr = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if int[i][j] != 0 {
                    tr += int[i][j] as f64 * m[(i, j)];
                }
            }
        }
        if tr > best {
            best = tr;
            arg = q as u8;
        }
    }
    Flip(arg)
}

/// Human-readable dump of the canonical ordering.
pub fn ordering_document() -> String {
    let mut out = String::new();
    out.push_str("canonical octahedral flip ordering\n");
    out.push_str(&format!("fingerprint: {}\n", ordering_fingerprint()));
    for (i, m) in GROUP.ints.iter().enumerate() {
        out.push_str(&format!("\nflip {i:2}:\n"));
        for row in m {
            out.push_str(&format!("  [{:3}{:3}{:3} ]\n", row[0], row[1], row[2]));
        }
    }
    out
}
