//! Triangle meshes, point clouds, surface sampling, and the chamfer
//! pseudo-distance used throughout evaluation and the symmetry oracle.

mod chamfer;
mod io;
mod obj;
mod sample;
mod shapes;

pub use chamfer::chamfer;
pub use io::{parse_cloud_json, parse_cloud_text, write_cloud_json, write_cloud_text};
pub use obj::parse_obj;
pub use sample::{sample_surface, symmetrized_sample};
pub use shapes::{make_shape, ShapeFamily, ShapeSpec};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::so3::{Rotation, Vec3};

/// Indexed triangle mesh.  Construction validates index ranges and that the
/// surface has usable area.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Structure("mesh has no triangles".into()));
        }
        for (i, t) in triangles.iter().enumerate() {
            for &v in t {
                if v >= vertices.len() {
                    return Err(Error::Structure(format!(
                        "triangle {i} references vertex {v} but the mesh has {} vertices",
                        vertices.len()
                    )));
                }
            }
        }
        if !vertices.iter().all(|v| v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
            return Err(Error::Structure("mesh has non-finite vertex coordinates".into()));
        }
        let mesh = TriangleMesh { vertices, triangles };
        if !mesh.triangle_areas().iter().any(|&a| a > 1e-12) {
            return Err(Error::Structure("mesh has no triangle with area above 1e-12".into()));
        }
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_areas(&self) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
                (b - a).cross(&(c - a)).norm() * 0.5
            })
            .collect()
    }

    /// Vertices mapped by `r`; topology unchanged.
    pub fn rotated(&self, r: &Rotation) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| r.apply(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// An ordered set of 3D points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let mut c = Vec3::zeros();
        for p in &self.points {
            c += p;
        }
        c / self.points.len() as f64
    }

    /// Ascending sorted point norms (used to check rigidity of transforms).
    pub fn sorted_norms(&self) -> Vec<f64> {
        let mut n: Vec<f64> = self.points.iter().map(|p| p.norm()).collect();
        n.sort_by(f64::total_cmp);
        n
    }
}

impl Serialize for PointCloud {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<[f64; 3]> = self.points.iter().map(|p| [p.x, p.y, p.z]).collect();
        rows.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<[f64; 3]>::deserialize(de)?;
        Ok(PointCloud::new(rows.into_iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect()))
    }
}

/// Translate the centroid to the origin and scale the farthest point to
/// norm 1.  Rotation-equivariant: `normalize(R P) = R normalize(P)`.
pub fn normalize(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty cloud".into()));
    }
    let c = cloud.centroid();
    let centered: Vec<Vec3> = cloud.points.iter().map(|p| p - c).collect();
    let max_norm = centered.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if !max_norm.is_finite() || max_norm < 1e-12 {
        return Err(Error::InvalidInput("cloud has no spatial extent to normalize".into()));
    }
    Ok(PointCloud::new(centered.into_iter().map(|p| p / max_norm).collect()))
}

/// Map every point through `r`, preserving order.
pub fn apply_rotation(cloud: &PointCloud, r: &Rotation) -> PointCloud {
    PointCloud::new(cloud.points.iter().map(|p| r.apply(p)).collect())
}

/// Translate the centroid to the origin without rescaling.
pub fn recenter(cloud: &PointCloud) -> PointCloud {
    let c = cloud.centroid();
    PointCloud::new(cloud.points.iter().map(|p| p - c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::{random_rotation, seeded_rng};
    use approx::assert_relative_eq;

    #[test]
    fn mesh_rejects_bad_indices_and_flat_geometry() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriangleMesh::new(v.clone(), vec![]).is_err());
        assert!(TriangleMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 2]]).is_err());
        assert!(TriangleMesh::new(v, vec![[0, 1, 2]]).is_ok());
    }

    #[test]
    fn normalize_centers_and_scales() {
        let cloud = PointCloud::new(vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(3.0, 1.0, 1.0),
            Vec3::new(2.0, 4.0, 1.0),
        ]);
        let n = normalize(&cloud).unwrap();
        assert!(n.centroid().norm() < 1e-12);
        let max = n.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        assert_relative_eq!(max, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn normalize_rejects_degenerate_clouds() {
        assert!(normalize(&PointCloud::new(vec![])).is_err());
        assert!(normalize(&PointCloud::new(vec![Vec3::new(2.0, 1.0, 0.5); 4])).is_err());
    }

    #[test]
    fn normalize_commutes_with_rotation() {
        let mut rng = seeded_rng(31);
        let cloud = PointCloud::new(
            (0..40)
                .map(|i| Vec3::new((i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 * 0.01))
                .collect(),
        );
        for _ in 0..10 {
            let r = random_rotation(&mut rng);
            let a = normalize(&apply_rotation(&cloud, &r)).unwrap();
            let b = apply_rotation(&normalize(&cloud).unwrap(), &r);
            for (p, q) in a.points.iter().zip(&b.points) {
                assert!((p - q).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cloud_json_round_trip() {
        let cloud = PointCloud::new(vec![Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.0, 2.0, -3.0)]);
        let json = serde_json::to_string(&cloud).unwrap();
        let back: PointCloud = serde_json::from_str(&json).unwrap();
        assert_eq!(cloud, back);
    }
}
