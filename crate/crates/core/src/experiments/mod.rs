//! Command layer: run configuration, the experiment commands and their
//! CSV/JSON outputs.

mod commands;
mod config;
mod output;

pub use commands::{
    cmd_mesh, cmd_permeability, cmd_regime_table, cmd_sweep_amplitude, cmd_sweep_rotation, cmd_validate,
    reference_regime_table, regime_table, Check, MeshOutcome, PermeabilityOutcome, RegimeTable, SweepEvaluator,
    SweepOutcome, SweepRecord, ValidationReport, AMPLITUDE_HEADER, PERMEABILITY_HEADER, ROTATION_HEADER,
};
pub use config::{
    default_f1_grid, parse_resolution, AmplitudeSweep, Fault, OutputConfig, PermeabilityConfig, RegimeTableConfig,
    RotationSweep, RunConfig, SweepModel, ValidateConfig,
};
pub use output::{fmt_sig, CsvTable};
