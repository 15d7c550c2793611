//! Symmetric chamfer pseudo-distance: the mean squared nearest-neighbour
//! distance from each cloud to the other, summed over both directions.
//!
//! Nearest neighbours are exact.  Points are sorted along one axis and the
//! scan is pruned once the axis gap alone exceeds the best squared distance
//! found, which keeps desk-scale clouds (hundreds to a few thousand points)
//! fast without an approximate structure.

use crate::error::{Error, Result};
use crate::so3::Vec3;

use super::PointCloud;

pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("chamfer distance of an empty cloud".into()));
    }
    Ok(one_way_mean_sq(&a.points, &b.points) + one_way_mean_sq(&b.points, &a.points))
}

fn one_way_mean_sq(from: &[Vec3], to: &[Vec3]) -> f64 {
    let mut sorted: Vec<Vec3> = to.to_vec();
    sorted.sort_by(|p, q| p.x.total_cmp(&q.x));
    let xs: Vec<f64> = sorted.iter().map(|p| p.x).collect();

    let mut sum = 0.0;
    for p in from {
        let start = xs.partition_point(|&x| x < p.x);
        let mut best = f64::INFINITY;
        let (mut lo, mut hi) = (start as isize - 1, start);
        loop {
            let lo_gap = if lo >= 0 { p.x - xs[lo as usize] } else { f64::INFINITY };
            let hi_gap = if hi < xs.len() { xs[hi] - p.x } else { f64::INFINITY };
            if lo_gap == f64::INFINITY && hi_gap == f64::INFINITY {
                break;
            }
            // Advancing the side with the smaller axis gap means that once
            // that gap alone exceeds the best squared distance, no remaining
            // point on either side can improve it.
            if lo_gap <= hi_gap {
                if lo_gap * lo_gap >= best {
                    break;
                }
                let d = (sorted[lo as usize] - p).norm_squared();
                if d < best {
                    best = d;
                }
                lo -= 1;
            } else {
                if hi_gap * hi_gap >= best {
                    break;
                }
                let d = (sorted[hi] - p).norm_squared();
                if d < best {
                    best = d;
                }
                hi += 1;
            }
        }
        sum += best;
    }
    sum / from.len() as f64
}
