//! Coder-controllers built from spanning sets and networked stabilization
//! over a noiseless digital channel.

mod coder;
mod simulate;

pub use coder::{build_coder_controller, CoderController};
pub use simulate::{
    bit_rate, cell_sample_states, critical_rate_scan, random_initial_states, replay_transcript,
    simulate_many, simulate_networked, summary_csv, FailReason, Failure, RateScanRow, ReplayReport,
    StepRecord, Transcript,
};
