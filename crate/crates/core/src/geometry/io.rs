//! Point-cloud text and JSON formats.  Floats are written with 17
//! significant digits, which round-trips `f64` exactly.

use crate::error::{Error, Result};
use crate::so3::Vec3;

use super::PointCloud;

/// One `x y z` triple per line.
pub fn write_cloud_text(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 72);
    for p in &cloud.points {
        out.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", p.x, p.y, p.z));
    }
    out
}

pub fn parse_cloud_text(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected three coordinates, found {}", tokens.len()),
            });
        }
        let mut coords = [0.0f64; 3];
        for (c, tok) in coords.iter_mut().zip(&tokens) {
            *c = tok.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad coordinate {tok:?}"),
            })?;
        }
        if !coords.iter().all(|c| c.is_finite()) {
            return Err(Error::Parse { line, msg: "non-finite coordinate".into() });
        }
        points.push(Vec3::new(coords[0], coords[1], coords[2]));
    }
    if points.is_empty() {
        return Err(Error::Structure("cloud file contains no points".into()));
    }
    Ok(PointCloud::new(points))
}

pub fn write_cloud_json(cloud: &PointCloud) -> String {
    serde_json::to_string(cloud).expect("cloud serialization cannot fail")
}

pub fn parse_cloud_json(text: &str) -> Result<PointCloud> {
    let cloud: PointCloud = serde_json::from_str(text)?;
    if cloud.is_empty() {
        return Err(Error::Structure("cloud JSON contains no points".into()));
    }
    if !cloud.points.iter().all(|p| p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
        return Err(Error::Structure("cloud JSON has non-finite coordinates".into()));
    }
    Ok(cloud)
}
