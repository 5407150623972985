//! Configuration, presets, run orchestration and file output.
//!
//! Config files are TOML with sections `grid`, `gas` (with `gas.h`),
//! `solver`, `time`, `initial`, `output`, `mms`, `validate_h` and an
//! optional `sweep`, plus top-level `preset` and `strict`. Every key not
//! given takes the preset's default; unknown keys are rejected.

mod config;
mod initial;
mod output;
mod run;

pub use config::{
    load_config, parse_config, parse_override, Field, Format, GasConfig, GridConfig, HConfig, HKindName,
    InitialConfig, LoadedConfig, MmsConfig, OutputConfig, Preset, RunConfig, SweepConfig, SweepParam, TimeConfig,
    ValidateHConfig,
};
pub use initial::{initial_profile, make_initial_data};
pub use output::{fmt_num, write_json, write_profile, PROFILE_COLUMNS, TIMESERIES_COLUMNS};
pub use run::{
    execute, mms, output_dir, run, sweep, validate_h_cli, RunStatus, RunSummary, SweepEntry, OUTPUT_ENV,
};
