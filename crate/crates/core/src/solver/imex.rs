//! Semi-implicit step: pressure, pressure work and viscous heating explicit,
//! viscous and thermal diffusion backward Euler.
//!
//! Order of updates:
//! 1. `u`: `u* - dt [ (mu/v)^n u*_x ]_x = u^n - dt P^n_x` (linear in `u*`).
//! 2. `v`: `v* = v^n + dt u*_x`.
//! 3. `theta`: `c_v (theta* - theta^n) - dt [ kappa(v*, theta*) theta*_x / v* ]_x
//!    = dt (-P^n u*_x + (mu/v)^n (u*_x)^2)`, nonlinear through `theta^alpha`.
//!
//! Both implicit systems are tridiagonal and solved by Newton iteration with
//! the analytic Jacobian.

use super::{check_state, fluxes, solve_tridiagonal, Forcing, Rates, SolverConfig, StepStats};
use crate::constitutive::GasModel;
use crate::grid::{Grid, State};
use crate::{Error, Result};

struct Newton {
    iterations: u32,
    residual: f64,
}

/// Runs Newton on `residual(x) = 0` for a tridiagonal Jacobian. `eval` fills
/// `(r, lower, diag, upper)` at `x`. Counts residual evaluations, so a
/// converged initial guess reports one iteration.
fn newton<F>(x: &mut [f64], config: &SolverConfig, mut eval: F) -> Result<Newton>
where
    F: FnMut(&[f64], &mut [f64], &mut [f64], &mut [f64], &mut [f64]) -> Result<()>,
{
    let n = x.len();
    let (mut r, mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut residual = f64::INFINITY;
    for it in 1..=config.newton_max_iter {
        eval(x, &mut r, &mut lo, &mut di, &mut up)?;
        residual = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !residual.is_finite() {
            return Err(Error::Positivity("non-finite Newton residual".into()));
        }
        if residual <= config.newton_tol {
            return Ok(Newton { iterations: it, residual });
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = solve_tridiagonal(&lo, &di, &up, &neg)?;
        for (xi, d) in x.iter_mut().zip(delta) {
            *xi += d;
        }
    }
    Err(Error::NewtonDivergence { iterations: config.newton_max_iter, residual })
}

fn attempt(
    grid: &Grid,
    state: &State,
    model: &GasModel,
    config: &SolverConfig,
    dt: f64,
    forcing: Option<&dyn Forcing>,
) -> Result<(State, StepStats)> {
    let old = fluxes(grid, state, model)?;
    let sources = forcing.map(|f| {
        let mut r = Rates::zeros(grid);
        f.add(grid, model, state.t + dt, &mut r);
        r
    });
    let dx = grid.dx();
    let g = grid.ghost();
    let cv = model.cv();

    // 1. momentum, unknowns on interior nodes
    let nodes = grid.interior_nodes();
    let m = &old.mu_over_v;
    let k = dt / (dx * dx);
    let base: Vec<f64> = nodes
        .clone()
        .map(|n| {
            let s = sources.as_ref().map_or(0.0, |r| r.du_dt[n]);
            state.u[n] - dt * (old.pressure[n] - old.pressure[n - 1]) / dx + dt * s
        })
        .collect();
    let mut u_new = state.u.clone();
    let mut u_int: Vec<f64> = state.u[nodes.clone()].to_vec();
    let u_solve = newton(&mut u_int, config, |x, r, lo, di, up| {
        let at = |i: isize| -> f64 {
            if i < 0 || i as usize >= x.len() {
                0.0
            } else {
                x[i as usize]
            }
        };
        for i in 0..x.len() {
            let n = g + i;
            let (ml, mr) = (m[n - 1], m[n]);
            let ii = i as isize;
            let tau_r = mr * (at(ii + 1) - x[i]);
            let tau_l = ml * (x[i] - at(ii - 1));
            r[i] = x[i] - base[i] - k * (tau_r - tau_l);
            lo[i] = -k * ml;
            di[i] = 1.0 + k * (ml + mr);
            up[i] = -k * mr;
        }
        Ok(())
    })?;
    u_new[nodes.clone()].copy_from_slice(&u_int);

    // 2. specific volume
    let u_x = grid.cell_diff(&u_new)?;
    let mut next = State { t: state.t + dt, v: state.v.clone(), u: u_new, theta: state.theta.clone() };
    for c in grid.interior_cells() {
        let s = sources.as_ref().map_or(0.0, |r| r.dv_dt[c]);
        next.v[c] = state.v[c] + dt * (u_x[c] + s);
    }
    next.apply_farfield(grid);
    next.check_positivity(grid, config.positivity_floor)?;

    // 3. temperature, unknowns on interior cells
    let cells = grid.interior_cells();
    let explicit: Vec<f64> = cells
        .clone()
        .map(|c| {
            let s = sources.as_ref().map_or(0.0, |r| cv * r.dtheta_dt[c]);
            -old.pressure[c] * u_x[c] + old.mu_over_v[c] * u_x[c] * u_x[c] + s
        })
        .collect();
    let v_new = &next.v;
    let theta_old = &state.theta;
    let ncell = grid.cells();
    let mut kv = vec![0.0; ncell + 2];
    let mut dkv = vec![0.0; ncell + 2];
    let far = model.transport_unchecked(1.0, 1.0).kappa;
    let mut th_int: Vec<f64> = theta_old[cells.clone()].to_vec();
    let th_solve = newton(&mut th_int, config, |x, r, lo, di, up| {
        // padded arrays: index 0 and ncell+1 are the far-field neighbours
        for (i, &th) in x.iter().enumerate() {
            if !(th > 0.0 && th.is_finite()) {
                return Err(Error::Positivity(format!("theta iterate {th} at x = {}", grid.cell_x(g + i))));
            }
            let v = v_new[g + i];
            let d = model.transport_derivatives_unchecked(v, th);
            kv[i + 1] = model.transport_unchecked(v, th).kappa / v;
            dkv[i + 1] = d.dkappa_dtheta / v;
        }
        kv[0] = far;
        kv[ncell + 1] = far;
        let th = |p: usize| -> f64 {
            if p == 0 || p == ncell + 1 {
                1.0
            } else {
                x[p - 1]
            }
        };
        for i in 0..ncell {
            let p = i + 1;
            let (tl, tc, tr) = (th(p - 1), th(p), th(p + 1));
            let face_l = 0.5 * (kv[p - 1] + kv[p]);
            let face_r = 0.5 * (kv[p] + kv[p + 1]);
            let q_l = face_l * (tc - tl) / dx;
            let q_r = face_r * (tr - tc) / dx;
            r[i] = cv * (tc - theta_old[g + i]) - dt * explicit[i] - dt * (q_r - q_l) / dx;
            // dq_r/dtheta_c, dq_r/dtheta_{c+1}, dq_l/dtheta_{c-1}, dq_l/dtheta_c
            let dqr_dc = -face_r / dx + 0.5 * dkv[p] * (tr - tc) / dx;
            let dqr_dr = face_r / dx + 0.5 * dkv[p + 1] * (tr - tc) / dx;
            let dql_dl = -face_l / dx + 0.5 * dkv[p - 1] * (tc - tl) / dx;
            let dql_dc = face_l / dx + 0.5 * dkv[p] * (tc - tl) / dx;
            di[i] = cv - dt / dx * (dqr_dc - dql_dc);
            up[i] = -dt / dx * dqr_dr;
            lo[i] = dt / dx * dql_dl;
        }
        Ok(())
    })?;
    next.theta[cells].copy_from_slice(&th_int);
    next.apply_farfield(grid);
    next.check_positivity(grid, config.positivity_floor)?;

    let stats = StepStats {
        dt_used: dt,
        newton_iters: u_solve.iterations.max(th_solve.iterations),
        rejected_substeps: 0,
        max_residual: u_solve.residual.max(th_solve.residual),
    };
    Ok((next, stats))
}

/// One IMEX step of size `dt`, halving on positivity violations like
/// [`super::step_explicit`]. Newton failure is returned as an error.
pub fn step_imex(
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
    check_state(grid, state)?;
    let mut trial = dt;
    for rejected in 0..=config.max_dt_halvings {
        match attempt(grid, state, model, config, trial, forcing) {
            Ok((next, mut stats)) => {
                stats.rejected_substeps = rejected;
                return Ok((next, stats));
            }
            Err(e) if e.is_positivity() => trial *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Err(Error::PositivityExhausted { halvings: config.max_dt_halvings, dt: trial * 2.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::HProfile;
    use crate::solver::{advance, stable_dt, Integrator, NoObserver, Schedule};

    #[test]
    fn equilibrium_needs_one_iteration() {
        let g = Grid::new(5.0, 32, 2).unwrap();
        let m = GasModel::new(1.4, 1.0, 1.0, 0.2, HProfile::power_sum(1.0, 1.0).unwrap()).unwrap();
        let s = State::equilibrium(&g);
        let (next, st) = step_imex(&g, &s, &m, &SolverConfig::default(), 0.5, None).unwrap();
        assert_eq!(next.v, s.v);
        assert_eq!(next.u, s.u);
        assert_eq!(next.theta, s.theta);
        assert_eq!(st.newton_iters, 1);
        assert_eq!(st.max_residual, 0.0);
    }

    #[test]
    fn newton_converges_quadratically_for_nonlinear_conduction() {
        let g = Grid::new(5.0, 64, 2).unwrap();
        let m = GasModel::new(1.4, 1.0, 1.0, 0.8, HProfile::power_sum(1.0, 1.0).unwrap()).unwrap();
        let s = State::from_profile(&g, 0.0, |x| (1.0, 0.0, 1.0 + 0.8 * (-x * x).exp()));
        let cfg = SolverConfig { newton_tol: 1e-12, ..Default::default() };
        let (_, st) = step_imex(&g, &s, &m, &cfg, 0.05, None).unwrap();
        assert!(st.newton_iters <= 6, "{} iterations", st.newton_iters);
        assert!(st.max_residual <= 1e-12);
    }

    #[test]
    fn newton_failure_is_reported() {
        let g = Grid::new(5.0, 64, 2).unwrap();
        let m = GasModel::new(1.4, 1.0, 1.0, 0.8, HProfile::power_sum(1.0, 1.0).unwrap()).unwrap();
        let s = State::from_profile(&g, 0.0, |x| (1.0, 0.0, 1.0 + 0.8 * (-x * x).exp()));
        let cfg = SolverConfig { newton_tol: 1e-14, newton_max_iter: 1, ..Default::default() };
        let err = step_imex(&g, &s, &m, &cfg, 0.05, None).unwrap_err();
        assert!(matches!(err, Error::NewtonDivergence { .. }));
    }

    #[test]
    fn momentum_and_mass_conserved() {
        let g = Grid::new(16.0, 128, 2).unwrap();
        let m = GasModel::new(1.4, 1.0, 1.0, 0.1, HProfile::power_sum(1.0, 1.0).unwrap()).unwrap();
        let s = State::from_profile(&g, 0.0, |x| {
            let e = (-x * x).exp();
            (1.0 + 0.2 * e, 0.1 * x * e + 0.05 * e, 1.0 - 0.1 * e)
        });
        let (next, _) = step_imex(&g, &s, &m, &SolverConfig::default(), 0.05, None).unwrap();
        let mass = |s: &State| s.interior_v(&g).iter().map(|v| v - 1.0).sum::<f64>() * g.dx();
        let mom = |s: &State| s.interior_u(&g).iter().sum::<f64>() * g.dx();
        assert!((mass(&next) - mass(&s)).abs() < 1e-13);
        assert!((mom(&next) - mom(&s)).abs() < 1e-12);
    }

    #[test]
    fn large_steps_stay_positive() {
        let g = Grid::new(20.0, 512, 2).unwrap();
        let m = GasModel::new(5.0 / 3.0, 1.0, 1.0, 0.05, HProfile::power_sum(1.0, 1.0).unwrap()).unwrap();
        let s = State::from_profile(&g, 0.0, |x| {
            let e = (-x * x).exp();
            (1.0 + 0.3 * e, 0.0, 1.0 + 0.3 * e)
        });
        let cfg = SolverConfig { integrator: Integrator::Imex, ..Default::default() };
        let explicit = stable_dt(&g, &s, &m, &cfg).unwrap();
        let dt = 100.0 * explicit;
        let mut state = s;
        for _ in 0..20 {
            let (next, st) = step_imex(&g, &state, &m, &cfg, dt, None).unwrap();
            assert_eq!(st.rejected_substeps, 0);
            state = next;
        }
        assert!(state.sup_deviation(&g) < 0.3);

        let (end, _) = advance(&g, State::equilibrium(&g), &m, &cfg, Schedule { t_end: 1.0, output_every: 0.5 }, &mut NoObserver, None).unwrap();
        assert_eq!(end.sup_deviation(&g), 0.0);
    }
}
