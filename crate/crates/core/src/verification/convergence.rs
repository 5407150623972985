use rayon::prelude::*;
use serde::{Serialize, Serializer};

use super::mms::{ManufacturedCase, ManufacturedForcing};
use crate::constitutive::GasModel;
use crate::grid::{Grid, NormKind, State};
use crate::solver::{advance, Integrator, NoObserver, Schedule, SolverConfig};
use crate::{Error, Result};

/// Errors below this are treated as round-off when fitting orders.
pub const ROUNDOFF_ERROR: f64 = 1e-13;

/// A fitted convergence order, or `indeterminate` when the errors are at
/// round-off.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Order {
    Fitted(f64),
    Indeterminate,
}

impl Order {
    pub fn value(self) -> Option<f64> {
        match self {
            Order::Fitted(p) => Some(p),
            Order::Indeterminate => None,
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Fitted(p) => s.serialize_f64(*p),
            Order::Indeterminate => s.serialize_str("indeterminate"),
        }
    }
}

/// `log2(e_k / e_{k+1})` for successive pairs, assuming resolution doubles.
pub fn pairwise_orders(errors: &[f64]) -> Vec<Order> {
    errors
        .windows(2)
        .map(|w| {
            if w[0] <= ROUNDOFF_ERROR || w[1] <= ROUNDOFF_ERROR {
                Order::Indeterminate
            } else {
                Order::Fitted((w[0] / w[1]).log2())
            }
        })
        .collect()
}

/// Least-squares slope of `-log2 e` against `log2 N`.
pub fn fitted_order(cells: &[usize], errors: &[f64]) -> Order {
    if cells.len() < 2 || errors.iter().any(|&e| !(e > ROUNDOFF_ERROR)) {
        return Order::Indeterminate;
    }
    let xs: Vec<f64> = cells.iter().map(|&n| (n as f64).log2()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.log2()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Order::Fitted(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldErrors {
    pub l2: Vec<f64>,
    pub linf: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldOrders {
    pub pairwise_l2: Vec<Order>,
    pub pairwise_linf: Vec<Order>,
    pub fitted_l2: Order,
    pub fitted_linf: Order,
}

impl FieldOrders {
    fn from_errors(cells: &[usize], e: &FieldErrors) -> Self {
        Self {
            pairwise_l2: pairwise_orders(&e.l2),
            pairwise_linf: pairwise_orders(&e.linf),
            fitted_l2: fitted_order(cells, &e.l2),
            fitted_linf: fitted_order(cells, &e.linf),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderReport {
    pub case: ManufacturedCase,
    pub integrator: Integrator,
    pub t_end: f64,
    pub half_length: f64,
    pub cells: Vec<usize>,
    /// Largest step taken on each level.
    pub max_dt: Vec<f64>,
    pub steps: Vec<u64>,
    pub errors_v: FieldErrors,
    pub errors_u: FieldErrors,
    pub errors_theta: FieldErrors,
    pub orders_v: FieldOrders,
    pub orders_u: FieldOrders,
    pub orders_theta: FieldOrders,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyConfig {
    pub integrator: Integrator,
    /// Half-length of the domain.
    pub half_length: f64,
    pub ghost: usize,
    pub t_end: f64,
    pub solver: SolverConfig,
}

impl StudyConfig {
    pub fn new(integrator: Integrator, t_end: f64) -> Self {
        Self {
            integrator,
            half_length: 6.0,
            ghost: 2,
            t_end,
            solver: SolverConfig { integrator, ..SolverConfig::default() },
        }
    }
}

pub(crate) fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 levels, got {}", levels.len())));
    }
    if let Some(w) = levels.windows(2).find(|w| w[1] != 2 * w[0]) {
        return Err(Error::Argument(format!("levels must double, got {} then {}", w[0], w[1])));
    }
    Ok(())
}

/// Errors `(v, u, theta)` of `state` against the manufactured solution at
/// `state.t`, point values at cell centres and nodes: `[(l2, linf); 3]`.
pub fn manufactured_errors(grid: &Grid, state: &State, case: &ManufacturedCase) -> [(f64, f64); 3] {
    let t = state.t;
    let ev: Vec<f64> = grid.interior_cells().map(|c| state.v[c] - case.exact(t, grid.cell_x(c)).0).collect();
    let eth: Vec<f64> = grid.interior_cells().map(|c| state.theta[c] - case.exact(t, grid.cell_x(c)).2).collect();
    let eu: Vec<f64> = grid.interior_nodes().map(|n| state.u[n] - case.exact(t, grid.node_x(n)).1).collect();
    let both = |e: &[f64]| (grid.discrete_norm(e, NormKind::L2), grid.discrete_norm(e, NormKind::Linf));
    [both(&ev), both(&eu), both(&eth)]
}

struct Level {
    errors: [(f64, f64); 3],
    max_dt: f64,
    steps: u64,
}

fn run_level(case: &ManufacturedCase, model: &GasModel, cfg: &StudyConfig, cells: usize) -> Result<Level> {
    let grid = Grid::new(cfg.half_length, cells, cfg.ghost)?;
    let forcing = ManufacturedForcing { case: case.clone() };
    let schedule = Schedule { t_end: cfg.t_end, output_every: cfg.t_end.max(f64::MIN_POSITIVE) };
    let solver = SolverConfig { integrator: cfg.integrator, ..cfg.solver };
    let (state, stats) = advance(
        &grid,
        case.exact_state(&grid, 0.0),
        model,
        &solver,
        schedule,
        &mut NoObserver,
        Some(&forcing),
    )?;
    Ok(Level { errors: manufactured_errors(&grid, &state, case), max_dt: stats.max_dt, steps: stats.steps })
}

/// Runs the source-augmented system from the exact initial data on every
/// level (in parallel) and fits orders from the errors at `t_end`.
///
/// The explicit integrator takes its stability-limited step, which scales
/// with `dx^2`; IMEX takes the advective step, which scales with `dx`.
pub fn convergence_study(
    case: &ManufacturedCase,
    model: &GasModel,
    levels: &[usize],
    config: &StudyConfig,
) -> Result<OrderReport> {
    case.validate()?;
    check_levels(levels)?;
    if case.support_radius() > config.half_length {
        return Err(Error::Argument(format!(
            "domain half-length {} is inside the manufactured support {}",
            config.half_length,
            case.support_radius()
        )));
    }
    let results: Vec<Level> = levels
        .par_iter()
        .map(|&n| run_level(case, model, config, n).map_err(|e| e.at_level(n)))
        .collect::<Result<_>>()?;

    let field = |i: usize| FieldErrors {
        l2: results.iter().map(|r| r.errors[i].0).collect(),
        linf: results.iter().map(|r| r.errors[i].1).collect(),
    };
    let (ev, eu, eth) = (field(0), field(1), field(2));
    Ok(OrderReport {
        case: case.clone(),
        integrator: config.integrator,
        t_end: config.t_end,
        half_length: config.half_length,
        cells: levels.to_vec(),
        max_dt: results.iter().map(|r| r.max_dt).collect(),
        steps: results.iter().map(|r| r.steps).collect(),
        orders_v: FieldOrders::from_errors(levels, &ev),
        orders_u: FieldOrders::from_errors(levels, &eu),
        orders_theta: FieldOrders::from_errors(levels, &eth),
        errors_v: ev,
        errors_u: eu,
        errors_theta: eth,
    })
}
