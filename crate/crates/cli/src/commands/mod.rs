mod calibrate;
mod eval;
mod flips;
mod gen;
mod orient;
mod sweep;
mod train;

pub use calibrate::{cmd_calibrate, CalibrateArgs, StoredCalibration};
pub use eval::{cmd_eval, EvalArgs, EvalOutputs};
pub use flips::{cmd_flips, flip_table_text};
pub use gen::cmd_gen;
pub use orient::{cmd_orient, CandidateOut, OrientArgs, OrientResult};
pub use sweep::{cmd_sweep, sweep_csv, SweepArgs};
pub use train::{cmd_train, Role, TrainArgs, TrainSummary};

use orient_core::error::{Error, Result};
use orient_core::model::{HeadKind, TrainState};
use std::path::Path;

use crate::artifacts::load_checkpoint;

/// Seed-stream tags: every stage of the toolchain derives its RNG stream
/// from the run seed with its own tag so streams never overlap.
pub mod seeds {
    pub const ORIENTER_INIT: u64 = 0x1A01;
    pub const FLIPPER_INIT: u64 = 0x1A02;
    pub const ORIENTER_TRAIN: u64 = 0x7301;
    pub const FLIPPER_TRAIN: u64 = 0x7302;
    pub const CAL_ROTATIONS: u64 = 0xCA10;
    pub const CAL_PIPELINE: u64 = 0xCA11;
    pub const EVAL_ROTATIONS: u64 = 0xE0A1;
    pub const EVAL_PIPELINE: u64 = 0xE0A2;
    pub const ORIENT_SAMPLE: u64 = 0x0B51;
    pub const ORIENT_PIPELINE: u64 = 0x0B52;
    pub const SWEEP_SAMPLE: u64 = 0x50EE;
}

fn load_model(path: &Path, role_hash: &str, expected: HeadKind) -> Result<TrainState> {
    let state = load_checkpoint(path, role_hash)?;
    if state.params.arch.head_kind != expected {
        return Err(Error::Mismatch(format!(
            "{} holds a {:?} model, expected {:?}",
            path.display(),
            state.params.arch.head_kind,
            expected
        )));
    }
    Ok(state)
}
