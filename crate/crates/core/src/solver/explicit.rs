//! Two-stage strong-stability-preserving Runge-Kutta (Heun).

use super::{axpy, rhs, Forcing, Rates, SolverConfig, StepStats};
use crate::constitutive::GasModel;
use crate::grid::{Grid, State};
use crate::{Error, Result};

fn rates_at(
    grid: &Grid,
    state: &State,
    model: &GasModel,
    forcing: Option<&dyn Forcing>,
) -> Result<Rates> {
    let mut r = rhs(grid, state, model)?;
    if let Some(f) = forcing {
        f.add(grid, model, state.t, &mut r);
    }
    Ok(r)
}

fn euler(grid: &Grid, state: &State, r: &Rates, dt: f64) -> State {
    let mut next = State {
        t: state.t + dt,
        v: axpy(&state.v, dt, &r.dv_dt),
        u: axpy(&state.u, dt, &r.du_dt),
        theta: axpy(&state.theta, dt, &r.dtheta_dt),
    };
    next.apply_farfield(grid);
    next
}

fn average(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * x + 0.5 * y).collect()
}

fn heun(
    grid: &Grid,
    state: &State,
    model: &GasModel,
    config: &SolverConfig,
    dt: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<State> {
    let r0 = rates_at(grid, state, model, forcing)?;
    let stage = euler(grid, state, &r0, dt);
    stage.check_positivity(grid, config.positivity_floor)?;
    let r1 = rates_at(grid, &stage, model, forcing)?;
    let predicted = euler(grid, &stage, &r1, dt);
    let mut next = State {
        t: state.t + dt,
        v: average(&state.v, &predicted.v),
        u: average(&state.u, &predicted.u),
        theta: average(&state.theta, &predicted.theta),
    };
    next.apply_farfield(grid);
    next.check_positivity(grid, config.positivity_floor)?;
    Ok(next)
}

/// One SSP-RK2 step of size `dt`. A positivity violation at either stage
/// rejects the attempt and retries with half the step, up to
/// `max_dt_halvings` times; `StepStats::dt_used` reports the step taken.
pub fn step_explicit(
    grid: &Grid,
    state: &State,
    model: &GasModel,
    config: &SolverConfig,
    dt: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<(State, StepStats)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Argument(format!("step size must be positive, got {dt}")));
    }
    let mut trial = dt;
    for rejected in 0..=config.max_dt_halvings {
        match heun(grid, state, model, config, trial, forcing) {
            Ok(next) => {
                let stats = StepStats { dt_used: trial, rejected_substeps: rejected, ..Default::default() };
                return Ok((next, stats));
            }
            Err(e) if e.is_positivity() => trial *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PositivityExhausted { halvings: config.max_dt_halvings, dt: trial * 2.0 })
}
