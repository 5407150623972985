//! Time integration on the staggered grid.
//!
//! Semi-discretization (cell `c` between nodes `c` and `c + 1`):
//!
//! ```text
//! U_c      = (u_{c+1} - u_c) / dx
//! sigma_c  = -theta_c / v_c + (mu_c / v_c) U_c
//! dv_c/dt  = U_c
//! du_n/dt  = (sigma_n - sigma_{n-1}) / dx
//! q_n      = K_n (theta_n - theta_{n-1}) / dx,   K_n = avg(kappa / v) over the two cells
//! c_v dtheta_c/dt = -(theta_c / v_c) U_c + (mu_c / v_c) U_c^2 + (q_{c+1} - q_c) / dx
//! ```
//!
//! The heating term uses the same `U_c` and `mu_c / v_c` as the momentum
//! flux, so kinetic energy lost to viscosity reappears as internal energy and
//! total energy is conserved by the semi-discrete system.

mod explicit;
mod imex;
mod tridiag;

pub use explicit::step_explicit;
pub use imex::step_imex;
pub use tridiag::solve_tridiagonal;

use serde::{Deserialize, Serialize};

use crate::constitutive::GasModel;
use crate::grid::{Grid, State};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Explicit,
    Imex,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub integrator: Integrator,
    pub cfl_advective: f64,
    pub cfl_parabolic: f64,
    pub newton_tol: f64,
    pub newton_max_iter: u32,
    pub positivity_floor: f64,
    pub max_dt_halvings: u32,
    /// Optional upper bound on the step size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_dt: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::Explicit,
            cfl_advective: 0.4,
            cfl_parabolic: 0.4,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            positivity_floor: 1e-8,
            max_dt_halvings: 10,
            max_dt: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let cfl_ok = |c: f64| c > 0.0 && c <= 1.0;
        if !cfl_ok(self.cfl_advective) {
            return Err(Error::Validation(format!(
                "cfl_advective must lie in (0, 1], got {}",
                self.cfl_advective
            )));
        }
        if !cfl_ok(self.cfl_parabolic) {
            return Err(Error::Validation(format!(
                "cfl_parabolic must lie in (0, 1], got {}",
                self.cfl_parabolic
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::Validation(format!("newton_tol must be positive, got {}", self.newton_tol)));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::Validation("newton_max_iter must be at least 1".into()));
        }
        if !(self.positivity_floor > 0.0 && self.positivity_floor < 1.0) {
            return Err(Error::Validation(format!(
                "positivity_floor must lie in (0, 1), got {}",
                self.positivity_floor
            )));
        }
        if let Some(m) = self.max_dt {
            if !(m > 0.0) {
                return Err(Error::Validation(format!("max_dt must be positive, got {m}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStats {
    pub dt_used: f64,
    pub newton_iters: u32,
    pub rejected_substeps: u32,
    pub max_residual: f64,
}

/// Time derivatives on the full ghosted layout; ghost entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates {
    pub dv_dt: Vec<f64>,
    pub du_dt: Vec<f64>,
    pub dtheta_dt: Vec<f64>,
}

impl Rates {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            dv_dt: vec![0.0; grid.cell_len()],
            du_dt: vec![0.0; grid.node_len()],
            dtheta_dt: vec![0.0; grid.cell_len()],
        }
    }
}

/// Extra source terms added to the right-hand side (manufactured solutions).
pub trait Forcing: Sync {
    /// Adds sources at time `t` to `rates`; the temperature source is the
    /// rate of `theta`, i.e. already divided by `c_v`.
    fn add(&self, grid: &Grid, model: &GasModel, t: f64, rates: &mut Rates);
}

/// Cell and node quantities shared by the update and the dissipation
/// diagnostics.
#[derive(Clone, Debug)]
pub struct Fluxes {
    /// `(u_{c+1} - u_c) / dx` on every cell.
    pub u_x: Vec<f64>,
    /// `mu / v` on every cell.
    pub mu_over_v: Vec<f64>,
    /// `kappa / v` on every cell.
    pub kappa_over_v: Vec<f64>,
    /// Cell pressure `theta / v`.
    pub pressure: Vec<f64>,
    /// Node face average of `kappa / v`; outermost nodes unused.
    pub kappa_face: Vec<f64>,
    /// `(theta_n - theta_{n-1}) / dx` at nodes; outermost nodes 0.
    pub theta_x: Vec<f64>,
}

/// Fails on any nonpositive or non-finite `v`, `theta` (ghosts included).
pub fn check_state(grid: &Grid, state: &State) -> Result<()> {
    state.check_layout(grid)?;
    for c in 0..grid.cell_len() {
        let (v, th) = (state.v[c], state.theta[c]);
        if !(v > 0.0 && v.is_finite() && th > 0.0 && th.is_finite()) {
            return Err(Error::Positivity(format!(
                "v = {v}, theta = {th} at x = {}",
                grid.cell_x(c)
            )));
        }
    }
    Ok(())
}

pub fn fluxes(grid: &Grid, state: &State, model: &GasModel) -> Result<Fluxes> {
    check_state(grid, state)?;
    let nc = grid.cell_len();
    let u_x = grid.cell_diff(&state.u)?;
    let mut mu_over_v = Vec::with_capacity(nc);
    let mut kappa_over_v = Vec::with_capacity(nc);
    let mut pressure = Vec::with_capacity(nc);
    for c in 0..nc {
        let (v, th) = (state.v[c], state.theta[c]);
        let tr = model.transport_unchecked(v, th);
        mu_over_v.push(tr.mu / v);
        kappa_over_v.push(tr.kappa / v);
        pressure.push(th / v);
    }
    let kappa_face = grid.face_average(&kappa_over_v)?;
    let theta_x = grid.node_diff(&state.theta)?;
    Ok(Fluxes { u_x, mu_over_v, kappa_over_v, pressure, kappa_face, theta_x })
}

/// Right-hand side of the semi-discrete system.
pub fn rhs(grid: &Grid, state: &State, model: &GasModel) -> Result<Rates> {
    let f = fluxes(grid, state, model)?;
    let inv_dx = 1.0 / grid.dx();
    let inv_cv = 1.0 / model.cv();
    let mut rates = Rates::zeros(grid);

    let sigma: Vec<f64> = (0..grid.cell_len())
        .map(|c| -f.pressure[c] + f.mu_over_v[c] * f.u_x[c])
        .collect();
    for n in grid.interior_nodes() {
        rates.du_dt[n] = (sigma[n] - sigma[n - 1]) * inv_dx;
    }
    for c in grid.interior_cells() {
        let ux = f.u_x[c];
        let q_right = f.kappa_face[c + 1] * f.theta_x[c + 1];
        let q_left = f.kappa_face[c] * f.theta_x[c];
        rates.dv_dt[c] = ux;
        rates.dtheta_dt[c] = (-f.pressure[c] * ux
            + f.mu_over_v[c] * ux * ux
            + (q_right - q_left) * inv_dx)
            * inv_cv;
    }
    Ok(rates)
}

/// Explicit stability limit
/// `min(cfl_a dx / max c, cfl_p dx^2 / (2 max D))` with `c = sqrt(gamma theta) / v`
/// and `D = max(mu / v, kappa / (c_v v))`.
pub fn stable_dt(grid: &Grid, state: &State, model: &GasModel, config: &SolverConfig) -> Result<f64> {
    let (adv, par) = dt_bounds(grid, state, model)?;
    Ok((config.cfl_advective * adv).min(config.cfl_parabolic * par))
}

/// Advective limit only, used by the IMEX integrator.
pub fn advective_dt(grid: &Grid, state: &State, model: &GasModel, config: &SolverConfig) -> Result<f64> {
    Ok(config.cfl_advective * dt_bounds(grid, state, model)?.0)
}

fn dt_bounds(grid: &Grid, state: &State, model: &GasModel) -> Result<(f64, f64)> {
    check_state(grid, state)?;
    let mut max_c = 0.0_f64;
    let mut max_d = 0.0_f64;
    for c in 0..grid.cell_len() {
        let (v, th) = (state.v[c], state.theta[c]);
        let tr = model.transport_unchecked(v, th);
        max_c = max_c.max(model.sound_speed(v, th));
        max_d = max_d.max((tr.mu / v).max(tr.kappa / (model.cv() * v)));
    }
    let dx = grid.dx();
    Ok((dx / max_c, dx * dx / (2.0 * max_d)))
}

/// Output times `t0 + k * every`, `k = 0..=K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub t_end: f64,
    pub output_every: f64,
}

impl Schedule {
    /// Number of outputs from `t0`: `floor((t_end - t0) / every) + 1`, with a
    /// relative slack of 1e-9 against round-off in the quotient.
    pub fn output_count(&self, t0: f64) -> usize {
        ((self.t_end - t0) / self.output_every + 1e-9).floor() as usize + 1
    }
}

pub trait Observer {
    /// Called after every accepted step.
    fn on_step(&mut self, _grid: &Grid, _state: &State, _model: &GasModel, _stats: &StepStats) -> Result<()> {
        Ok(())
    }

    /// Called at each scheduled output time, including the start.
    fn on_output(&mut self, grid: &Grid, state: &State, model: &GasModel) -> Result<()>;
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {
    fn on_output(&mut self, _: &Grid, _: &State, _: &GasModel) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct AdvanceStats {
    pub steps: u64,
    pub rejected_substeps: u64,
    pub newton_iters: u64,
    pub max_newton_iters: u32,
    pub max_residual: f64,
    pub min_dt: f64,
    pub max_dt: f64,
}

/// Takes one step of the configured integrator.
pub fn step(
    grid: &Grid,
    state: &State,
    model: &GasModel,
    config: &SolverConfig,
    dt: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<(State, StepStats)> {
    match config.integrator {
        Integrator::Explicit => step_explicit(grid, state, model, config, dt, forcing),
        Integrator::Imex => step_imex(grid, state, model, config, dt, forcing),
    }
}

/// Advances to `schedule.t_end`, landing exactly on every output time.
pub fn advance(
    grid: &Grid,
    mut state: State,
    model: &GasModel,
    config: &SolverConfig,
    schedule: Schedule,
    observer: &mut dyn Observer,
    forcing: Option<&dyn Forcing>,
) -> Result<(State, AdvanceStats)> {
    config.validate()?;
    if !(schedule.t_end >= state.t) {
        return Err(Error::Argument(format!(
            "t_end = {} precedes the state time {}",
            schedule.t_end, state.t
        )));
    }
    if !(schedule.output_every > 0.0) {
        return Err(Error::Argument(format!("output_every must be positive, got {}", schedule.output_every)));
    }
    let t0 = state.t;
    let outputs = schedule.output_count(t0);
    let output_time = |k: usize| t0 + k as f64 * schedule.output_every;

    let mut stats = AdvanceStats { min_dt: f64::INFINITY, ..Default::default() };
    observer.on_output(grid, &state, model).map_err(|e| e.at_time(state.t))?;
    let mut next_output = 1;

    while state.t < schedule.t_end {
        let is_output = next_output < outputs;
        let target = if is_output {
            output_time(next_output).min(schedule.t_end)
        } else {
            schedule.t_end
        };
        let limit = match config.integrator {
            Integrator::Explicit => stable_dt(grid, &state, model, config),
            Integrator::Imex => advective_dt(grid, &state, model, config),
        }
        .map_err(|e| e.at_time(state.t))?;
        let limit = config.max_dt.map_or(limit, |m| limit.min(m));
        let remaining = target - state.t;
        let (dt, lands) = if limit >= remaining * (1.0 - 1e-12) {
            (remaining, true)
        } else {
            (limit, false)
        };

        let t_before = state.t;
        let (mut next, step_stats) =
            step(grid, &state, model, config, dt, forcing).map_err(|e| e.at_time(t_before))?;
        if lands && step_stats.dt_used == dt {
            next.t = target;
        }
        state = next;

        stats.steps += 1;
        stats.rejected_substeps += u64::from(step_stats.rejected_substeps);
        stats.newton_iters += u64::from(step_stats.newton_iters);
        stats.max_newton_iters = stats.max_newton_iters.max(step_stats.newton_iters);
        stats.max_residual = stats.max_residual.max(step_stats.max_residual);
        stats.min_dt = stats.min_dt.min(step_stats.dt_used);
        stats.max_dt = stats.max_dt.max(step_stats.dt_used);

        observer.on_step(grid, &state, model, &step_stats).map_err(|e| e.at_time(state.t))?;
        if is_output && state.t == target {
            observer.on_output(grid, &state, model).map_err(|e| e.at_time(state.t))?;
            next_output += 1;
        }
    }
    if stats.steps == 0 {
        stats.min_dt = 0.0;
    }
    Ok((state, stats))
}

/// `a + s * b` elementwise into a new vector.
pub(crate) fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}
