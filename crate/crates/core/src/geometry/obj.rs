//! Minimal OBJ reader: `v` and `f` records, everything else skipped.
//! Faces with more than three vertices are fan-triangulated.  Indices are
//! 1-based; negative indices count back from the most recent vertex.

use crate::error::{Error, Result};
use crate::so3::Vec3;

use super::TriangleMesh;

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in &mut coords {
                    let tok = tokens.next().ok_or_else(|| Error::Parse {
                        line,
                        msg: "vertex needs three coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| Error::Parse {
                        line,
                        msg: format!("bad vertex coordinate {tok:?}"),
                    })?;
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in tokens {
                    face.push(resolve_index(tok, vertices.len(), line)?);
                }
                if face.len() < 3 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("face needs at least three vertices, has {}", face.len()),
                    });
                }
                for i in 1..face.len() - 1 {
                    triangles.push([face[0], face[i], face[i + 1]]);
                }
            }
            _ => {}
        }
    }

    TriangleMesh::new(vertices, triangles)
}

fn resolve_index(token: &str, vertex_count: usize, line: usize) -> Result<usize> {
    let index_part = token.split('/').next().unwrap_or("");
    let value: isize = index_part.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad face index {token:?}"),
    })?;
    let resolved = if value > 0 {
        value as usize - 1
    } else if value < 0 {
        let back = (-value) as usize;
        if back > vertex_count {
            return Err(Error::Parse {
                line,
                msg: format!("relative index {value} reaches before the first vertex"),
            });
        }
        vertex_count - back
    } else {
        return Err(Error::Parse { line, msg: "face index 0 is not valid in OBJ".into() });
    };
    if resolved >= vertex_count {
        return Err(Error::Parse {
            line,
            msg: format!("face index {value} exceeds the {vertex_count} vertices seen so far"),
        });
    }
    Ok(resolved)
}
