use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Format, Preset, RunConfig, SweepParam};
use super::initial::make_initial_data;
use super::output::{ensure_dir, write_json, write_profile, write_text, TimeseriesWriter};
use crate::constitutive::{validate_h, AdmissibilityReport, GasModel};
use crate::diagnostics::{
    decay_metrics, theta_floor_fit_records, DecayReport, DiagnosticsRecord, DriftReport, InitialDataReport,
    Monitor,
};
use crate::grid::{Grid, State};
use crate::solver::{advance, AdvanceStats, Observer, Schedule, StepStats};
use crate::verification::{convergence_study, ManufacturedCase, OrderReport, StudyConfig};
use crate::{Error, Result};

/// Environment variable overriding `output.directory`.
pub const OUTPUT_ENV: &str = "NS1D_OUT";

pub fn output_dir(config: &RunConfig) -> PathBuf {
    std::env::var_os(OUTPUT_ENV).map_or_else(|| PathBuf::from(&config.output.directory), PathBuf::from)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub status: RunStatus,
    pub exit_code: i32,
    pub error: Option<String>,
    pub config: RunConfig,
    pub initial: Option<InitialDataReport>,
    pub records: usize,
    pub final_record: Option<DiagnosticsRecord>,
    pub c4_fit: Option<f64>,
    pub decay: Option<DecayReport>,
    pub drift: Option<DriftReport>,
    pub stats: Option<AdvanceStats>,
    pub mms: Option<OrderReport>,
    pub wall_time_s: Option<f64>,
}

impl RunSummary {
    fn new(config: &RunConfig) -> Self {
        Self {
            status: RunStatus::Completed,
            exit_code: 0,
            error: None,
            config: config.clone(),
            initial: None,
            records: 0,
            final_record: None,
            c4_fit: None,
            decay: None,
            drift: None,
            stats: None,
            mms: None,
            wall_time_s: None,
        }
    }

    fn fail(&mut self, err: &Error) {
        self.status = RunStatus::Failed;
        self.exit_code = err.exit_code();
        self.error = Some(err.to_string());
    }
}

/// Monitor plus streaming CSV output.
struct RunObserver {
    monitor: Monitor,
    timeseries: Option<TimeseriesWriter>,
    profiles: Option<PathBuf>,
    /// Outputs between profile snapshots; 0 for first and last only.
    profile_stride: usize,
    outputs: usize,
    last_profile: Option<usize>,
}

impl RunObserver {
    fn profile(&mut self, grid: &Grid, state: &State, index: usize) -> Result<()> {
        if let Some(dir) = &self.profiles {
            write_profile(&dir.join(format!("profile_{index:05}.csv")), grid, state)?;
            self.last_profile = Some(index);
        }
        Ok(())
    }
}

impl Observer for RunObserver {
    fn on_step(&mut self, grid: &Grid, state: &State, model: &GasModel, stats: &StepStats) -> Result<()> {
        self.monitor.on_step(grid, state, model, stats)
    }

    fn on_output(&mut self, grid: &Grid, state: &State, model: &GasModel) -> Result<()> {
        self.monitor.on_output(grid, state, model)?;
        let index = self.outputs;
        self.outputs += 1;
        if let (Some(ts), Some(r)) = (self.timeseries.as_mut(), self.monitor.records().last()) {
            ts.push(r)?;
        }
        let due = if self.profile_stride == 0 { index == 0 } else { index % self.profile_stride == 0 };
        if due {
            self.profile(grid, state, index)?;
        }
        Ok(())
    }
}

/// Runs one configuration, writing outputs into `dir`. Numerical failures
/// are recorded in the summary with the outputs gathered so far; only I/O
/// errors are returned as `Err`.
pub fn execute(config: &RunConfig, dir: &Path) -> Result<(RunSummary, Option<Error>)> {
    let started = Instant::now();
    let mut summary = RunSummary::new(config);
    ensure_dir(dir)?;
    write_text(&dir.join("config.toml"), &config.to_toml()?)?;

    let outcome = if config.preset == Preset::Mms {
        run_mms(config, dir).map(|r| summary.mms = Some(r))
    } else {
        simulate(config, dir, &mut summary)
    };
    let err = match outcome {
        Ok(()) => None,
        Err(e) if matches!(e.root(), Error::Io { .. }) => return Err(e),
        Err(e) => {
            summary.fail(&e);
            Some(e)
        }
    };
    if config.output.include_wall_time {
        summary.wall_time_s = Some(started.elapsed().as_secs_f64());
    }
    if config.output.formats.contains(&Format::Json) {
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok((summary, err))
}

fn simulate(config: &RunConfig, dir: &Path, summary: &mut RunSummary) -> Result<()> {
    let grid = config.grid()?;
    let model = config.model()?;
    let (state, report) = make_initial_data(config, &grid, &model)?;
    summary.initial = Some(report);

    let csv = config.output.formats.contains(&Format::Csv);
    let h3 = config.output.h3_interior;
    let timeseries = if csv { Some(TimeseriesWriter::create(dir.join("timeseries.csv"), h3)?) } else { None };
    let profiles = if csv {
        let p = dir.join("profiles");
        ensure_dir(&p)?;
        Some(p)
    } else {
        None
    };
    let stride = if config.output.profile_every > 0.0 {
        (config.output.profile_every / config.time.output_every).round() as usize
    } else {
        0
    };
    let mut obs = RunObserver {
        monitor: Monitor::new(&model)?.with_h3_interior(h3),
        timeseries,
        profiles,
        profile_stride: stride,
        outputs: 0,
        last_profile: None,
    };
    let schedule = Schedule { t_end: config.time.t_end, output_every: config.time.output_every };
    let result = advance(&grid, state, &model, &config.solver, schedule, &mut obs, None);

    let records = obs.monitor.records();
    summary.records = records.len();
    summary.final_record = records.last().cloned();
    summary.c4_fit = theta_floor_fit_records(records).ok();
    summary.decay = decay_metrics(records).ok();
    summary.drift = Some(obs.monitor.drift());
    if let Some(ts) = obs.timeseries.take() {
        ts.finish()?;
    }
    let (final_state, stats) = result?;
    summary.stats = Some(stats);
    if obs.outputs > 0 && obs.last_profile != Some(obs.outputs - 1) {
        obs.profile(&grid, &final_state, obs.outputs - 1)?;
    }
    Ok(())
}

/// Single run; numerical failures are returned as `Err` after the outputs
/// are written.
pub fn run(config: &RunConfig, dir: &Path) -> Result<RunSummary> {
    if config.sweep.is_some() {
        return Err(Error::Argument(format!("preset '{}' is a sweep", config.preset.name())));
    }
    match execute(config, dir)? {
        (summary, None) => Ok(summary),
        (_, Some(e)) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepEntry {
    pub param: SweepParam,
    pub value: f64,
    pub directory: String,
    pub summary: RunSummary,
}

/// Independent runs of `base` with `param` set to each value, in parallel,
/// one subdirectory each; all entries are collected into `sweep.json`.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[f64], dir: &Path) -> Result<Vec<SweepEntry>> {
    let configs: Vec<RunConfig> = values
        .iter()
        .map(|&v| {
            if !v.is_finite() {
                return Err(Error::Argument(format!("sweep value {v} is not finite")));
            }
            let c = base.with_param(param, v);
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    ensure_dir(dir)?;
    let entries: Vec<SweepEntry> = configs
        .par_iter()
        .zip(values.par_iter())
        .enumerate()
        .map(|(k, (c, &value))| {
            let name = format!("{}-{k:02}", param.name());
            let (summary, _) = execute(c, &dir.join(&name))?;
            Ok(SweepEntry { param, value, directory: name, summary })
        })
        .collect::<Result<_>>()?;
    write_json(&dir.join("sweep.json"), &entries)?;
    Ok(entries)
}

fn study_inputs(config: &RunConfig) -> Result<(ManufacturedCase, GasModel, StudyConfig)> {
    let m = &config.mms;
    let case = ManufacturedCase::new(m.amplitude, m.omega)?;
    let mut study = StudyConfig::new(m.integrator, m.t_end);
    study.half_length = m.half_length;
    study.ghost = config.grid.ghost_depth;
    study.solver = crate::solver::SolverConfig { integrator: m.integrator, ..config.solver };
    Ok((case, config.model()?, study))
}

fn run_mms(config: &RunConfig, dir: &Path) -> Result<OrderReport> {
    let (case, model, study) = study_inputs(config)?;
    let report = convergence_study(&case, &model, &config.mms.levels, &study)?;
    write_json(&dir.join("mms.json"), &report)?;
    Ok(report)
}

/// Convergence study from the `[mms]` section, written to `mms.json`.
pub fn mms(config: &RunConfig, dir: &Path) -> Result<OrderReport> {
    ensure_dir(dir)?;
    run_mms(config, dir)
}

/// Admissibility check of the configured `h` over `validate_h.range`,
/// written to `validate_h.json`.
pub fn validate_h_cli(config: &RunConfig, dir: &Path) -> Result<AdmissibilityReport> {
    let v = &config.validate_h;
    let (lo, hi) = match v.range[..] {
        [lo, hi] if lo > 0.0 && hi > lo && hi.is_finite() => (lo, hi),
        _ => return Err(Error::Argument(format!("validate_h.range must be 0 < lo < hi, got {:?}", v.range))),
    };
    let report = validate_h(&config.h_profile()?, (lo, hi), v.samples, v.c_cap)?;
    ensure_dir(dir)?;
    write_json(&dir.join("validate_h.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(preset: Preset) -> RunConfig {
        let mut c = RunConfig::preset(preset);
        c.grid.cells = 128;
        c.time.t_end = 0.3;
        c
    }

    #[test]
    fn constant_run_stays_at_equilibrium() {
        let dir = tempfile::tempdir().unwrap();
        let s = run(&small(Preset::Constant), dir.path()).unwrap();
        let f = s.final_record.unwrap();
        assert_eq!(s.status, RunStatus::Completed);
        assert!(f.sup_dev <= 1e-13 && f.eta_total.abs() <= 1e-13);
        assert_eq!(s.records, 4);
        let ts = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
        assert_eq!(ts.lines().count(), 5);
        assert!(dir.path().join("profiles/profile_00003.csv").exists());
    }

    #[test]
    fn failure_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(Preset::GaussPulse);
        c.solver.integrator = crate::solver::Integrator::Imex;
        c.solver.newton_tol = 1e-14;
        c.solver.newton_max_iter = 1;
        let (s, err) = execute(&c, dir.path()).unwrap();
        let err = err.unwrap();
        assert!(matches!(err.root(), Error::NewtonDivergence { .. }));
        assert_eq!(s.status, RunStatus::Failed);
        assert_eq!(s.exit_code, 3);
        assert_eq!(s.records, 1);
        assert!(dir.path().join("summary.json").exists());
        let ts = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
        assert_eq!(ts.lines().count(), 2);
    }

    #[test]
    fn empty_sweep() {
        let dir = tempfile::tempdir().unwrap();
        let e = sweep(&small(Preset::GaussPulse), SweepParam::Alpha, &[], dir.path()).unwrap();
        assert!(e.is_empty());
        assert_eq!(std::fs::read_to_string(dir.path().join("sweep.json")).unwrap().trim(), "[]");
    }

    #[test]
    fn sweep_aborts_on_bad_value() {
        let dir = tempfile::tempdir().unwrap();
        assert!(sweep(&small(Preset::GaussPulse), SweepParam::Gamma, &[1.4, 0.9], dir.path()).is_err());
    }

    #[test]
    fn validate_h_rejects_bad_range() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = RunConfig::preset(Preset::GaussPulse);
        c.validate_h.range = vec![2.0, 1.0];
        assert!(matches!(validate_h_cli(&c, dir.path()), Err(Error::Argument(_))));
        c.validate_h.range = vec![0.1, 10.0];
        let r = validate_h_cli(&c, dir.path()).unwrap();
        assert!(r.admissible);
    }
}
