use super::config::{Field, Preset, RunConfig, TWO_BUMP_OFFSET_THETA, TWO_BUMP_OFFSET_V};
use crate::constitutive::GasModel;
use crate::diagnostics::{initial_data_report, InitialDataReport};
use crate::grid::{Grid, State};
use crate::Result;

/// Initial profile `x -> (v, u, theta)` of a preset.
///
/// * gauss-pulse: `1 + a e^{-(x/w)^2}` in each perturbed thermodynamic field,
///   `u = a (x/w) e^{-(x/w)^2}` if `u` is perturbed;
/// * two-bump: `v` bump of amplitude `a` at `x = -2`, `theta` bump of
///   amplitude `0.8 a` at `x = 1.5`, velocity shear `0.5 a (x/w) e^{-(x/w)^2}`;
/// * constant: the far field.
pub fn initial_profile(config: &RunConfig) -> impl Fn(f64) -> (f64, f64, f64) + Sync + 'static {
    let a = config.initial.amplitude;
    let w = config.initial.width;
    let has = |f: Field| config.initial.perturb.contains(&f);
    let (pv, pu, pt) = (has(Field::V), has(Field::U), has(Field::Theta));
    let preset = config.preset;
    let bump = move |x: f64, c: f64| {
        let s = (x - c) / w;
        (-s * s).exp()
    };
    move |x: f64| {
        let on = |p: bool| if p { 1.0 } else { 0.0 };
        match preset {
            Preset::Constant => (1.0, 0.0, 1.0),
            Preset::TwoBump => (
                1.0 + on(pv) * a * bump(x, TWO_BUMP_OFFSET_V),
                on(pu) * 0.5 * a * (x / w) * bump(x, 0.0),
                1.0 + on(pt) * 0.8 * a * bump(x, TWO_BUMP_OFFSET_THETA),
            ),
            _ => {
                let e = bump(x, 0.0);
                (1.0 + on(pv) * a * e, on(pu) * a * (x / w) * e, 1.0 + on(pt) * a * e)
            }
        }
    }
}

/// Samples the preset on `grid`, checks positivity and reports the size of
/// the data.
pub fn make_initial_data(config: &RunConfig, grid: &Grid, model: &GasModel) -> Result<(State, InitialDataReport)> {
    config.validate()?;
    let state = State::from_profile(grid, 0.0, initial_profile(config));
    state.check_positivity(grid, config.solver.positivity_floor)?;
    let report = initial_data_report(grid, &state, model, config.output.h3_interior)?;
    Ok((state, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(preset: Preset, a: f64) -> (RunConfig, Grid, GasModel) {
        let mut c = RunConfig::preset(preset);
        c.initial.amplitude = a;
        c.grid.cells = 600;
        (c.clone(), c.grid().unwrap(), c.model().unwrap())
    }

    #[test]
    fn zero_amplitude_is_equilibrium() {
        let (c, g, m) = setup(Preset::GaussPulse, 0.0);
        let (s, _) = make_initial_data(&c, &g, &m).unwrap();
        assert_eq!(s, State::equilibrium(&g));
    }

    #[test]
    fn report_matches_grid_extrema() {
        let (c, g, m) = setup(Preset::GaussPulse, -0.5);
        let (s, r) = make_initial_data(&c, &g, &m).unwrap();
        let min_v = s.interior_v(&g).iter().copied().fold(f64::INFINITY, f64::min);
        let min_t = s.interior_theta(&g).iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(r.min_v0, min_v);
        assert_eq!(r.min_theta0, min_t);
        // cell centres straddle x = 0, so the minimum is just above 1 - 0.5
        let dx = g.dx();
        assert!(min_v >= 0.5 && min_v <= 1.0 - 0.5 * (-(dx * dx / 4.0)).exp() + 1e-15);
    }

    #[test]
    fn large_amplitude_rejected() {
        let (c, g, m) = setup(Preset::GaussPulse, 1.2);
        assert!(make_initial_data(&c, &g, &m).is_err());
    }

    #[test]
    fn two_bump_is_asymmetric() {
        let (c, g, m) = setup(Preset::TwoBump, 0.3);
        let (s, _) = make_initial_data(&c, &g, &m).unwrap();
        let f = initial_profile(&c);
        assert!((f(-2.0).0 - 1.3).abs() < 1e-15);
        assert!((f(1.5).2 - 1.24).abs() < 1e-15);
        assert!(f(0.5).1 > 0.0 && f(-0.5).1 < 0.0);
        assert!(s.interior_u(&g).iter().any(|&u| u != 0.0));
    }
}
