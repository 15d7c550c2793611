//! Area-weighted surface sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::octa::Flip;
use crate::so3::RngState;

use super::{PointCloud, TriangleMesh};

/// Draw `n` i.i.d. points on the mesh surface: triangles chosen with
/// probability proportional to area, positions uniform via the square-root
/// barycentric trick.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, rng: &mut RngState) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidInput("cannot sample zero points".into()));
    }
    let areas = mesh.triangle_areas();
    let mut cumulative = Vec::with_capacity(areas.len());
    let mut total = 0.0;
    for a in &areas {
        total += a;
        cumulative.push(total);
    }
    if total <= 1e-12 {
        return Err(Error::Structure("mesh surface area is zero".into()));
    }

    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random_range(0.0..total);
        let t = cumulative.partition_point(|&c| c <= u).min(areas.len() - 1);
        let tri = mesh.triangles()[t];
        let (a, b, c) = (
            mesh.vertices()[tri[0]],
            mesh.vertices()[tri[1]],
            mesh.vertices()[tri[2]],
        );
        let r1: f64 = rng.random_range(0.0..1.0);
        let r2: f64 = rng.random_range(0.0..1.0);
        let s = r1.sqrt();
        points.push(a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2));
    }
    Ok(PointCloud::new(points))
}

/// Sample `n / |flips|` base points and replicate them through every flip,
/// producing a cloud that is exactly closed under the given group (flip
/// matrices are signed permutations, so the mapped coordinates are exact).
/// The result has `|flips| * floor(n / |flips|)` points.
pub fn symmetrized_sample(
    mesh: &TriangleMesh,
    n: usize,
    flips: &[Flip],
    rng: &mut RngState,
) -> Result<PointCloud> {
    if flips.is_empty() {
        return Err(Error::InvalidInput("symmetrized sampling needs at least one flip".into()));
    }
    let base_count = (n / flips.len()).max(1);
    let base = sample_surface(mesh, base_count, rng)?;
    let mut points = Vec::with_capacity(base_count * flips.len());
    for f in flips {
        let m = f.rotation();
        for p in &base.points {
            points.push(m.apply(p));
        }
    }
    Ok(PointCloud::new(points))
}
