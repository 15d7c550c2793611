//! Checkpoint serialization.
//!
//! A checkpoint freezes the architecture, flat parameter vector, optimizer
//! buffers, and step counter.  It also embeds the flip-ordering fingerprint
//! of the group tables it was trained against; loading refuses a checkpoint
//! whose fingerprint differs, since flip indices would silently mean
//! different rotations.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ModelArch, ModelParams, OptState, TrainState};
use crate::error::{Error, Result};
use crate::octa;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub flip_fingerprint: String,
    pub arch: ModelArch,
    pub params: Vec<f64>,
    pub opt: OptState,
    pub step: usize,
}

impl Checkpoint {
    pub fn from_state(state: &TrainState) -> Self {
        Checkpoint {
            flip_fingerprint: octa::ordering_fingerprint().to_string(),
            arch: state.params.arch.clone(),
            params: state.params.values.clone(),
            opt: state.opt.clone(),
            step: state.step,
        }
    }

    pub fn into_state(self) -> Result<TrainState> {
        if self.flip_fingerprint != octa::ordering_fingerprint() {
            return Err(Error::Mismatch(format!(
                "checkpoint flip ordering fingerprint {} does not match this build's {}",
                self.flip_fingerprint,
                octa::ordering_fingerprint()
            )));
        }
        let params = ModelParams::from_values(self.arch, self.params)?;
        Ok(TrainState { params, opt: self.opt, step: self.step })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Hex digest used to bind downstream artifacts (for example a conformal
/// calibration) to the exact model bytes they were produced from.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
