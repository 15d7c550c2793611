use std::path::Path;

use orient_core::error::Result;
use orient_core::octa::{ordering_fingerprint, Flip};

use crate::artifacts::atomic_write;

/// The frozen flip table, index-annotated, so external tools can align
/// class labels with rotation matrices.
pub fn flip_table_text() -> String {
    let mut out = String::new();
    out.push_str("24 octahedral flips in canonical order (row-major matrices)\n");
    out.push_str(&format!("ordering fingerprint: {}\n", ordering_fingerprint()));
    for flip in Flip::all() {
        out.push_str(&format!("\nflip {:02}\n", flip.index()));
        let m = flip.rotation().matrix();
        for i in 0..3 {
            out.push_str(&format!(
                "  {:>2} {:>2} {:>2}\n",
                m[(i, 0)] as i32,
                m[(i, 1)] as i32,
                m[(i, 2)] as i32
            ));
        }
    }
    out
}

pub fn cmd_flips(out: Option<&Path>) -> Result<String> {
    let text = flip_table_text();
    if let Some(path) = out {
        atomic_write(path, text.as_bytes())?;
    }
    Ok(text)
}
