//! Command implementations behind the `speckle-monitor` binary: synthesize,
//! train, evaluate, benchmark and predict, all driven by one TOML config and
//! writing only below its output directory.

mod commands;
mod config;
mod synth;

pub use commands::{
    cmd_bench, cmd_eval, cmd_predict, cmd_synth, cmd_train, load_split, mode_name, BenchSummary, BenchThresholds,
    Check, DatasetInfo, EvalSummary, FramesFile, Layout, ModeThresholds, PredictOutput, Thresholds, TrainSummary,
    WindowPrediction,
};
pub use config::{
    BenchConfig, DetectorConfig, DrillSweep, GrooveSweep, HarnessConfig, TripletConfig, DEFAULT_CONFIG_TOML,
};
pub use synth::{derive_seed, preprocess_frame, synth_drill, synth_groove, volume_grid, write_labels_csv, SynthOutput};
