use rayon::prelude::*;
use serde::Serialize;

use super::convergence::{check_levels, fitted_order, pairwise_orders, Order};
use crate::constitutive::GasModel;
use crate::grid::{Grid, NormKind, State};
use crate::solver::{advance, Integrator, Observer, Schedule, SolverConfig};
use crate::{Error, Result};

/// Initial profile `x -> (v, u, theta)` shared by coarse and fine runs.
pub type Profile = dyn Fn(f64) -> (f64, f64, f64) + Sync;

/// Restricts a fine state to `coarse`: cell averages of `r` fine cells and
/// hat-weighted full weighting of `2r - 1` fine nodes.
pub fn restrict(fine_grid: &Grid, fine: &State, coarse: &Grid, refinement: usize) -> Result<State> {
    if fine_grid.cells() != refinement * coarse.cells() || fine_grid.half_length() != coarse.half_length() {
        return Err(Error::Argument(format!(
            "fine grid with {} cells is not a {refinement}x refinement of {}",
            fine_grid.cells(),
            coarse.cells()
        )));
    }
    fine.check_layout(fine_grid)?;
    let r = refinement;
    let (gf, gc) = (fine_grid.ghost() as isize, coarse.ghost() as isize);
    let mut out = State::equilibrium(coarse);
    out.t = fine.t;
    for c in coarse.interior_cells() {
        let first = ((c as isize - gc) * r as isize + gf) as usize;
        out.v[c] = fine.v[first..first + r].iter().sum::<f64>() / r as f64;
        out.theta[c] = fine.theta[first..first + r].iter().sum::<f64>() / r as f64;
    }
    let rf = r as f64;
    for n in coarse.interior_nodes() {
        let centre = (n as isize - gc) * r as isize + gf;
        let mut acc = 0.0;
        for j in -(r as isize - 1)..=(r as isize - 1) {
            let idx = centre + j;
            // nodes past the ghost layer are at the far field
            if idx >= 0 && (idx as usize) < fine.u.len() {
                acc += (rf - j.abs() as f64) * fine.u[idx as usize];
            }
        }
        out.u[n] = acc / (rf * rf);
    }
    Ok(out)
}

struct Restricting<'a> {
    fine_grid: &'a Grid,
    coarse: &'a Grid,
    refinement: usize,
    snapshots: Vec<State>,
}

impl Observer for Restricting<'_> {
    fn on_output(&mut self, grid: &Grid, state: &State, _: &GasModel) -> Result<()> {
        debug_assert_eq!(grid.cells(), self.fine_grid.cells());
        self.snapshots.push(restrict(self.fine_grid, state, self.coarse, self.refinement)?);
        Ok(())
    }
}

/// Runs `profile` at `refinement` times the resolution of `coarse` with the
/// explicit integrator and returns the restricted state at every output.
pub fn fine_grid_reference(
    coarse: &Grid,
    model: &GasModel,
    profile: &Profile,
    refinement: usize,
    config: &SolverConfig,
    schedule: Schedule,
) -> Result<Vec<State>> {
    if refinement < 4 {
        return Err(Error::Argument(format!("refinement must be at least 4, got {refinement}")));
    }
    let fine_grid = Grid::new(coarse.half_length(), coarse.cells() * refinement, coarse.ghost())?;
    let config = SolverConfig { integrator: Integrator::Explicit, ..*config };
    let mut obs = Restricting { fine_grid: &fine_grid, coarse, refinement, snapshots: Vec::new() };
    let init = State::from_profile(&fine_grid, 0.0, profile);
    advance(&fine_grid, init, model, &config, schedule, &mut obs, None)?;
    Ok(obs.snapshots)
}

/// Combined L2 norm of the difference of two states on the same grid.
pub fn state_distance(grid: &Grid, a: &State, b: &State) -> f64 {
    let diff = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(p, q)| p - q).collect() };
    let dv = diff(a.interior_v(grid), b.interior_v(grid));
    let du = diff(a.interior_u(grid), b.interior_u(grid));
    let dth = diff(a.interior_theta(grid), b.interior_theta(grid));
    [dv, du, dth].iter().map(|d| grid.discrete_norm(d, NormKind::L2).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelfConvergenceReport {
    pub cells: Vec<usize>,
    pub refinement: usize,
    pub t_end: f64,
    /// L2 distance between each coarse run and its restricted reference at
    /// `t_end`.
    pub errors: Vec<f64>,
    pub pairwise: Vec<Order>,
    pub fitted: Order,
}

/// Runs each coarse level with `config` and compares against its own
/// `refinement`x explicit reference at `t_end`.
pub fn self_convergence(
    half_length: f64,
    levels: &[usize],
    refinement: usize,
    model: &GasModel,
    profile: &Profile,
    config: &SolverConfig,
    t_end: f64,
) -> Result<SelfConvergenceReport> {
    check_levels(levels)?;
    let schedule = Schedule { t_end, output_every: t_end };
    let errors: Vec<f64> = levels
        .par_iter()
        .map(|&n| {
            let go = || -> Result<f64> {
                let grid = Grid::new(half_length, n, 2)?;
                let reference = fine_grid_reference(&grid, model, profile, refinement, config, schedule)?;
                let init = State::from_profile(&grid, 0.0, profile);
                let mut obs = crate::solver::NoObserver;
                let (coarse, _) = advance(&grid, init, model, config, schedule, &mut obs, None)?;
                let last = reference.last().ok_or_else(|| Error::Argument("empty reference".into()))?;
                Ok(state_distance(&grid, &coarse, last))
            };
            go().map_err(|e| e.at_level(n))
        })
        .collect::<Result<_>>()?;
    Ok(SelfConvergenceReport {
        cells: levels.to_vec(),
        refinement,
        t_end,
        pairwise: pairwise_orders(&errors),
        fitted: fitted_order(levels, &errors),
        errors,
    })
}
