//! Monitored functionals of a run.
//!
//! Discrete conventions (interior entries only, ghosts are at equilibrium):
//!
//! * cell kinetic energy `k_c = (u_c^2 + u_{c+1}^2) / 4`;
//! * `eta_total = sum_c [phi(v_c) + k_c + c_v phi(theta_c)] dx`;
//! * dissipation rate
//!   `sum_c (mu/v)_c U_c^2 / theta_c dx + sum_n K_n (theta_x)_n^2 / (theta_{n-1} theta_n) dx`,
//!   built from the same cell velocity gradient `U_c`, face conductivity `K_n`
//!   and node gradient `(theta_x)_n` as the solver, so that
//!   `eta_total(t) + int_0^t rate = eta_total(0)` holds for the semi-discrete
//!   system up to far-field boundary terms;
//! * `v_x` at cells is the mean of the two adjacent node differences.

mod kanel_table;

pub use kanel_table::KanelTable;

use serde::Serialize;

use crate::constitutive::{h_envelope, phi_unchecked, GasModel};
use crate::grid::{discrete_norm, Grid, NormKind, State};
use crate::solver::{fluxes, Observer, StepStats};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass_dev: f64,
    pub momentum: f64,
    pub energy_dev: f64,
    pub eta_total: f64,
    pub dissipation_accum: f64,
    pub identity_residual: f64,
    pub sup_dev: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub mu_vx_norm: f64,
    pub kanel_lhs: f64,
    pub kanel_rhs: f64,
    pub norm_h1: f64,
    pub norm_h2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_h3_interior: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConservedTotals {
    pub mass_dev: f64,
    pub momentum: f64,
    pub energy_dev: f64,
}

pub fn conserved_totals(grid: &Grid, state: &State, model: &GasModel) -> ConservedTotals {
    let dx = grid.dx();
    let cv = model.cv();
    let mut mass = 0.0;
    let mut energy = 0.0;
    for c in grid.interior_cells() {
        mass += state.v[c] - 1.0;
        let k = 0.25 * (state.u[c] * state.u[c] + state.u[c + 1] * state.u[c + 1]);
        energy += cv * (state.theta[c] - 1.0) + k;
    }
    let momentum: f64 = state.interior_u(grid).iter().sum();
    ConservedTotals { mass_dev: mass * dx, momentum: momentum * dx, energy_dev: energy * dx }
}

/// `sum eta dx` with the cell kinetic energy convention.
pub fn eta_total(grid: &Grid, state: &State, model: &GasModel) -> Result<f64> {
    crate::solver::check_state(grid, state)?;
    let cv = model.cv();
    let sum: f64 = grid
        .interior_cells()
        .map(|c| {
            let k = 0.25 * (state.u[c] * state.u[c] + state.u[c + 1] * state.u[c + 1]);
            phi_unchecked(state.v[c]) + k + cv * phi_unchecked(state.theta[c])
        })
        .sum();
    Ok(sum * grid.dx())
}

/// Discrete `int [mu u_x^2 / (v theta) + kappa theta_x^2 / (v theta^2)] dx`.
pub fn dissipation_rate(grid: &Grid, state: &State, model: &GasModel) -> Result<f64> {
    let f = fluxes(grid, state, model)?;
    let viscous: f64 = grid
        .interior_cells()
        .map(|c| f.mu_over_v[c] * f.u_x[c] * f.u_x[c] / state.theta[c])
        .sum();
    let thermal: f64 = grid
        .interior_nodes()
        .map(|n| {
            let g = f.theta_x[n];
            f.kappa_face[n] * g * g / (state.theta[n - 1] * state.theta[n])
        })
        .sum();
    Ok((viscous + thermal) * grid.dx())
}

fn cell_gradient(grid: &Grid, field: &[f64], c: usize) -> f64 {
    (field[c + 1] - field[c - 1]) / (2.0 * grid.dx())
}

/// L2 norm of `mu v_x / v` over interior cells.
pub fn mu_vx_norm(grid: &Grid, state: &State, model: &GasModel) -> Result<f64> {
    crate::solver::check_state(grid, state)?;
    let vals: Vec<f64> = grid
        .interior_cells()
        .map(|c| {
            let mu = model.transport_unchecked(state.v[c], state.theta[c]).mu;
            mu * cell_gradient(grid, &state.v, c) / state.v[c]
        })
        .collect();
    Ok(discrete_norm(&vals, grid.dx(), NormKind::L2))
}

/// `(max_x |Phi(v)|, ||sqrt(phi(v))|| * ||h(v) v_x / v||)`.
pub fn kanel_bound_pair(grid: &Grid, state: &State, table: &mut KanelTable) -> Result<(f64, f64)> {
    let v = state.interior_v(grid);
    let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &x| (a.min(x), b.max(x)));
    if !(lo > 0.0) {
        return Err(Error::Positivity(format!("min v = {lo}")));
    }
    table.ensure(lo, hi)?;
    let mut lhs = 0.0_f64;
    for &x in v {
        lhs = lhs.max(table.eval(x)?.abs());
    }
    let dx = grid.dx();
    let root_phi: Vec<f64> = v.iter().map(|&x| phi_unchecked(x).sqrt()).collect();
    let weighted: Vec<f64> = grid
        .interior_cells()
        .map(|c| table.h().value(state.v[c]) * cell_gradient(grid, &state.v, c) / state.v[c])
        .collect();
    let rhs = discrete_norm(&root_phi, dx, NormKind::L2) * discrete_norm(&weighted, dx, NormKind::L2);
    Ok((lhs, rhs))
}

/// Combined norm of `(v - 1, u, theta - 1)`.
pub fn deviation_norm(grid: &Grid, state: &State, kind: NormKind) -> f64 {
    let dv: Vec<f64> = state.interior_v(grid).iter().map(|v| v - 1.0).collect();
    let dth: Vec<f64> = state.interior_theta(grid).iter().map(|t| t - 1.0).collect();
    let parts = [
        grid.discrete_norm(&dv, kind),
        grid.discrete_norm(state.interior_u(grid), kind),
        grid.discrete_norm(&dth, kind),
    ];
    parts.iter().map(|p| p * p).sum::<f64>().sqrt()
}

pub fn energy_identity_residual(now: &DiagnosticsRecord, initial: &DiagnosticsRecord) -> f64 {
    now.eta_total + now.dissipation_accum - initial.eta_total
}

/// Size of the initial data: discrete H2 norm of the deviation and pointwise
/// bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitialDataReport {
    pub pi0_discrete: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi0_h3_interior: Option<f64>,
    pub min_v0: f64,
    pub max_v0: f64,
    pub min_theta0: f64,
    /// `min(min v0, 1 / max v0, min theta0)`.
    pub v0_bound: f64,
    /// Envelope of `h` on `[v0_bound, 1 / v0_bound]`.
    pub h_envelope: f64,
}

pub fn initial_data_report(
    grid: &Grid,
    state: &State,
    model: &GasModel,
    with_h3: bool,
) -> Result<InitialDataReport> {
    crate::solver::check_state(grid, state)?;
    let v = state.interior_v(grid);
    let th = state.interior_theta(grid);
    let min_v0 = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max_v0 = v.iter().copied().fold(0.0, f64::max);
    let min_theta0 = th.iter().copied().fold(f64::INFINITY, f64::min);
    let v0_bound = min_v0.min(1.0 / max_v0).min(min_theta0).min(1.0);
    Ok(InitialDataReport {
        pi0_discrete: deviation_norm(grid, state, NormKind::H2),
        pi0_h3_interior: with_h3.then(|| deviation_norm(grid, state, NormKind::H3Interior)),
        min_v0,
        max_v0,
        min_theta0,
        v0_bound,
        h_envelope: h_envelope(model.h(), v0_bound)?,
    })
}

/// Smallest `C >= 0` with `1/m(t) - 1/m(s) <= C (t - s)` for every pair of
/// samples `s < t` of `m = min theta`.
pub fn theta_floor_fit(series: &[(f64, f64)]) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 records, got {}", series.len())));
    }
    if let Some(&(t, m)) = series.iter().find(|(_, m)| !(*m > 0.0)) {
        return Err(Error::Argument(format!("min theta = {m} at t = {t} is not positive")));
    }
    let mut c = 0.0_f64;
    for (i, &(s, ms)) in series.iter().enumerate() {
        for &(t, mt) in &series[i + 1..] {
            if t > s {
                c = c.max((1.0 / mt - 1.0 / ms) / (t - s));
            }
        }
    }
    Ok(c)
}

pub fn theta_floor_fit_records(records: &[DiagnosticsRecord]) -> Result<f64> {
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.min_theta)).collect();
    theta_floor_fit(&series)
}

pub const DECAY_FRACTIONS: [f64; 3] = [0.5, 0.25, 0.1];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdCrossing {
    pub fraction: f64,
    /// First record time with `sup_dev <= fraction * sup_dev(0)`; `None` if never.
    pub time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayReport {
    pub times: Vec<f64>,
    pub sup_dev: Vec<f64>,
    pub thresholds: Vec<ThresholdCrossing>,
    /// `sup_dev` non-increasing over records in the second half of the run.
    pub monotone_last_half: bool,
}

pub fn decay_metrics(records: &[DiagnosticsRecord]) -> Result<DecayReport> {
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.sup_dev)).collect();
    decay_metrics_series(&series)
}

pub fn decay_metrics_series(series: &[(f64, f64)]) -> Result<DecayReport> {
    let Some(&(t0, s0)) = series.first() else {
        return Err(Error::Argument("decay metrics need at least one record".into()));
    };
    let thresholds = DECAY_FRACTIONS
        .iter()
        .map(|&fraction| ThresholdCrossing {
            fraction,
            time: series.iter().find(|(_, s)| *s <= fraction * s0).map(|(t, _)| *t),
        })
        .collect();
    let t_last = series.last().map_or(t0, |p| p.0);
    let mid = t0 + 0.5 * (t_last - t0);
    let tail: Vec<f64> = series.iter().filter(|(t, _)| *t >= mid).map(|(_, s)| *s).collect();
    Ok(DecayReport {
        times: series.iter().map(|p| p.0).collect(),
        sup_dev: series.iter().map(|p| p.1).collect(),
        thresholds,
        monotone_last_half: tail.windows(2).all(|w| w[1] <= w[0]),
    })
}

/// Largest deviations of the conserved totals from their initial values,
/// relative to the L1 size of the initial perturbation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DriftReport {
    pub reference_scale: f64,
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
}

/// Accumulates dissipation every step (trapezoid rule) and records
/// diagnostics at output times.
pub struct Monitor {
    kanel: KanelTable,
    with_h3: bool,
    records: Vec<DiagnosticsRecord>,
    accum: f64,
    last_rate: Option<f64>,
    last_t: f64,
    eta0: Option<f64>,
    reference_scale: f64,
}

impl Monitor {
    pub fn new(model: &GasModel) -> Result<Self> {
        Ok(Self {
            kanel: KanelTable::new(model.h().clone())?,
            with_h3: false,
            records: Vec::new(),
            accum: 0.0,
            last_rate: None,
            last_t: 0.0,
            eta0: None,
            reference_scale: 0.0,
        })
    }

    pub fn with_h3_interior(mut self, on: bool) -> Self {
        self.with_h3 = on;
        self
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<DiagnosticsRecord> {
        self.records
    }

    pub fn drift(&self) -> DriftReport {
        let Some(first) = self.records.first() else {
            return DriftReport::default();
        };
        let scale = self.reference_scale.max(f64::MIN_POSITIVE);
        let max_dev = |f: fn(&DiagnosticsRecord) -> f64| {
            self.records.iter().map(|r| (f(r) - f(first)).abs()).fold(0.0, f64::max) / scale
        };
        DriftReport {
            reference_scale: self.reference_scale,
            mass: max_dev(|r| r.mass_dev),
            momentum: max_dev(|r| r.momentum),
            energy: max_dev(|r| r.energy_dev),
        }
    }

    fn start(&mut self, grid: &Grid, state: &State, model: &GasModel) -> Result<()> {
        if self.last_rate.is_none() {
            self.last_rate = Some(dissipation_rate(grid, state, model)?);
            self.last_t = state.t;
            let dx = grid.dx();
            self.reference_scale = (state.interior_v(grid).iter().map(|v| (v - 1.0).abs()).sum::<f64>()
                + state.interior_u(grid).iter().map(|u| u.abs()).sum::<f64>()
                + state.interior_theta(grid).iter().map(|t| (t - 1.0).abs()).sum::<f64>())
                * dx;
        }
        Ok(())
    }

    pub fn record(&mut self, grid: &Grid, state: &State, model: &GasModel) -> Result<DiagnosticsRecord> {
        self.start(grid, state, model)?;
        let totals = conserved_totals(grid, state, model);
        let eta = eta_total(grid, state, model)?;
        let eta0 = *self.eta0.get_or_insert(eta);
        let v = state.interior_v(grid);
        let th = state.interior_theta(grid);
        let (kanel_lhs, kanel_rhs) = kanel_bound_pair(grid, state, &mut self.kanel)?;
        let rec = DiagnosticsRecord {
            t: state.t,
            mass_dev: totals.mass_dev,
            momentum: totals.momentum,
            energy_dev: totals.energy_dev,
            eta_total: eta,
            dissipation_accum: self.accum,
            identity_residual: eta + self.accum - eta0,
            sup_dev: state.sup_deviation(grid),
            min_v: v.iter().copied().fold(f64::INFINITY, f64::min),
            max_v: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_theta: th.iter().copied().fold(f64::INFINITY, f64::min),
            max_theta: th.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mu_vx_norm: mu_vx_norm(grid, state, model)?,
            kanel_lhs,
            kanel_rhs,
            norm_h1: deviation_norm(grid, state, NormKind::H1),
            norm_h2: deviation_norm(grid, state, NormKind::H2),
            norm_h3_interior: self.with_h3.then(|| deviation_norm(grid, state, NormKind::H3Interior)),
        };
        Ok(rec)
    }
}

impl Observer for Monitor {
    fn on_step(&mut self, grid: &Grid, state: &State, model: &GasModel, stats: &StepStats) -> Result<()> {
        let rate = dissipation_rate(grid, state, model)?;
        let prev = self.last_rate.unwrap_or(rate);
        // state.t may have been snapped to an output time; use the actual span
        let span = state.t - self.last_t;
        debug_assert!((span - stats.dt_used).abs() <= 1e-9 * stats.dt_used.max(1.0));
        self.accum += 0.5 * span * (prev + rate);
        self.last_rate = Some(rate);
        self.last_t = state.t;
        Ok(())
    }

    fn on_output(&mut self, grid: &Grid, state: &State, model: &GasModel) -> Result<()> {
        let rec = self.record(grid, state, model)?;
        self.records.push(rec);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::HProfile;
    use crate::solver::{advance, step_explicit, stable_dt, Schedule, SolverConfig};

    fn unit_model() -> GasModel {
        GasModel::new(5.0 / 3.0, 1.0, 1.0, 0.0, HProfile::constant(1.0, 0.0, 0.0).unwrap()).unwrap()
    }

    fn pulse(grid: &Grid) -> State {
        State::from_profile(grid, 0.0, |x| {
            let e = (-x * x).exp();
            (1.0 + 0.3 * e, 0.1 * x * e, 1.0 + 0.2 * e)
        })
    }

    #[test]
    fn equilibrium_totals_vanish() {
        let g = Grid::new(5.0, 100, 2).unwrap();
        let s = State::equilibrium(&g);
        let t = conserved_totals(&g, &s, &unit_model());
        assert_eq!((t.mass_dev, t.momentum, t.energy_dev), (0.0, 0.0, 0.0));
        assert_eq!(dissipation_rate(&g, &s, &unit_model()).unwrap(), 0.0);
        let mut tab = KanelTable::new(unit_model().h().clone()).unwrap();
        assert_eq!(kanel_bound_pair(&g, &s, &mut tab).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn unit_bump_mass() {
        let g = Grid::new(1.0, 200, 2).unwrap();
        let mut s = State::equilibrium(&g);
        s.v[50] = 2.0;
        let t = conserved_totals(&g, &s, &unit_model());
        assert!((t.mass_dev - 0.01).abs() < 1e-16);
    }

    #[test]
    fn linear_velocity_dissipation() {
        let g = Grid::new(2.0, 64, 2).unwrap();
        let sigma = 0.3;
        let s = State::from_profile(&g, 0.0, |x| (1.0, sigma * x, 1.0));
        let rate = dissipation_rate(&g, &s, &unit_model()).unwrap();
        assert!((rate - sigma * sigma * 4.0).abs() < 1e-13);
    }

    #[test]
    fn totals_unchanged_by_explicit_step() {
        let g = Grid::new(8.0, 128, 2).unwrap();
        let m = unit_model();
        let s = pulse(&g);
        let cfg = SolverConfig::default();
        let dt = stable_dt(&g, &s, &m, &cfg).unwrap();
        let (n, _) = step_explicit(&g, &s, &m, &cfg, dt, None).unwrap();
        let (a, b) = (conserved_totals(&g, &s, &m), conserved_totals(&g, &n, &m));
        assert!((a.mass_dev - b.mass_dev).abs() <= 1e-13 * a.mass_dev.abs());
        assert!((a.momentum - b.momentum).abs() <= 1e-13 * a.mass_dev.abs());
    }

    #[test]
    fn mu_vx_norm_constant_coefficients() {
        let g = Grid::new(8.0, 128, 2).unwrap();
        let m = GasModel::new(1.4, 2.5, 1.0, 0.0, HProfile::constant(1.0, 0.0, 0.0).unwrap()).unwrap();
        let s = pulse(&g);
        let bare: Vec<f64> = g.interior_cells().map(|c| cell_gradient(&g, &s.v, c) / s.v[c]).collect();
        let expected = 2.5 * g.discrete_norm(&bare, NormKind::L2);
        assert!((mu_vx_norm(&g, &s, &m).unwrap() - expected).abs() <= 1e-14 * expected);
    }

    #[test]
    fn kanel_pair_satisfies_cauchy_schwarz() {
        let g = Grid::new(8.0, 256, 2).unwrap();
        let m = GasModel::new(1.4, 1.0, 1.0, 0.0, HProfile::power_sum(1.0, 1.0).unwrap()).unwrap();
        let mut tab = KanelTable::new(m.h().clone()).unwrap();
        for amp in [0.1, 0.5, 2.0, -0.6] {
            let s = State::from_profile(&g, 0.0, |x| (1.0 + amp * (-(x - 1.0) * (x - 1.0)).exp(), 0.0, 1.0));
            let (l, r) = kanel_bound_pair(&g, &s, &mut tab).unwrap();
            assert!(l > 0.0 && l <= r + 1e-8, "amp={amp}: {l} vs {r}");
        }
    }

    #[test]
    fn floor_fit_examples() {
        let constant: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 0.7)).collect();
        assert_eq!(theta_floor_fit(&constant).unwrap(), 0.0);
        let hyper: Vec<(f64, f64)> = (0..20).map(|k| {
            let t = 0.25 * k as f64;
            (t, 1.0 / (2.0 * t + 1.0))
        }).collect();
        assert_eq!(theta_floor_fit(&hyper).unwrap(), 2.0);
        assert!(theta_floor_fit(&hyper[..2]).is_err());
        assert!(theta_floor_fit(&[(0.0, 1.0), (1.0, 0.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn floor_fit_scales_inversely_with_time() {
        let series: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 1.0 / (1.0 + 0.3 * (k as f64).sqrt()))).collect();
        let c = theta_floor_fit(&series).unwrap();
        let stretched: Vec<(f64, f64)> = series.iter().map(|&(t, m)| (4.0 * t, m)).collect();
        assert!((theta_floor_fit(&stretched).unwrap() - c / 4.0).abs() < 1e-15);
    }

    #[test]
    fn decay_examples() {
        let flat: Vec<(f64, f64)> = (0..4).map(|k| (k as f64, 0.0)).collect();
        let r = decay_metrics_series(&flat).unwrap();
        assert!(r.thresholds.iter().all(|c| c.time == Some(0.0)));
        let halving: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 0.5f64.powi(k))).collect();
        let r = decay_metrics_series(&halving).unwrap();
        assert_eq!(r.thresholds[0].time, Some(1.0));
        assert_eq!(r.thresholds[1].time, Some(2.0));
        assert_eq!(r.thresholds[2].time, Some(4.0));
        assert!(r.monotone_last_half);
        let short: Vec<(f64, f64)> = vec![(0.0, 1.0), (1.0, 0.9)];
        assert_eq!(decay_metrics_series(&short).unwrap().thresholds[0].time, None);
    }

    #[test]
    fn initial_report_bounds() {
        let g = Grid::new(8.0, 256, 2).unwrap();
        let m = unit_model();
        let s = State::from_profile(&g, 0.0, |x| {
            let e = 0.5 * (-x * x).exp();
            (1.0 + e, 0.0, 1.0 - e)
        });
        let r = initial_data_report(&g, &s, &m, true).unwrap();
        assert_eq!(r.min_v0, 1.0);
        assert_eq!(r.max_v0, s.interior_v(&g).iter().copied().fold(0.0, f64::max));
        assert_eq!(r.min_theta0, s.interior_theta(&g).iter().copied().fold(2.0, f64::min));
        assert!(r.v0_bound > 0.0 && r.pi0_discrete > 0.0);
        assert!(r.pi0_h3_interior.unwrap() >= r.pi0_discrete * 0.0);
    }

    #[test]
    fn identity_residual_is_second_order_in_time() {
        let g = Grid::new(16.0, 256, 2).unwrap();
        let m = GasModel::new(1.4, 1.0, 1.0, 0.1, HProfile::power_sum(1.0, 1.0).unwrap()).unwrap();
        let run = |max_dt: f64| {
            let mut mon = Monitor::new(&m).unwrap();
            let cfg = SolverConfig { max_dt: Some(max_dt), ..Default::default() };
            let sched = Schedule { t_end: 0.5, output_every: 0.05 };
            advance(&g, pulse(&g), &m, &cfg, sched, &mut mon, None).unwrap();
            mon.into_records()
        };
        let coarse = run(4e-4);
        assert_eq!(coarse.len(), 11);
        assert_eq!(coarse[0].identity_residual, 0.0);
        for w in coarse.windows(2) {
            assert!(w[1].dissipation_accum >= w[0].dissipation_accum);
            assert!(w[1].eta_total <= coarse[0].eta_total + w[1].identity_residual.abs());
        }
        let last = coarse.last().unwrap();
        assert_eq!(energy_identity_residual(last, &coarse[0]), last.identity_residual);
        let fine = run(2e-4);
        let ratio = last.identity_residual / fine.last().unwrap().identity_residual;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }
}
