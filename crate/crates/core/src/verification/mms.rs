use std::f64::consts::FRAC_PI_4;

use serde::Serialize;

use crate::constitutive::GasModel;
use crate::grid::{Grid, State};
use crate::solver::{Forcing, Rates};
use crate::{Error, Result};

/// Value and derivatives `(f, f_t, f_x, f_xx)` of a closed-form field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub val: f64,
    pub t: f64,
    pub x: f64,
    pub xx: f64,
}

/// Gaussian-envelope manufactured solution
///
/// ```text
/// v     = 1 + a g(x) cos(w t)
/// u     = a x g(x) sin(w t)
/// theta = 1 + a g(x) cos(w t + pi/4)
/// ```
///
/// with `g(x) = exp(-x^2)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManufacturedCase {
    pub name: String,
    pub amplitude: f64,
    pub omega: f64,
}

impl Default for ManufacturedCase {
    fn default() -> Self {
        Self { name: "gaussian-modes".into(), amplitude: 0.1, omega: 1.0 }
    }
}

impl ManufacturedCase {
    pub fn new(amplitude: f64, omega: f64) -> Result<Self> {
        let case = Self { amplitude, omega, ..Self::default() };
        case.validate()?;
        Ok(case)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.abs() < 1.0) {
            return Err(Error::Validation(format!(
                "manufactured amplitude must satisfy |a| < 1, got {}",
                self.amplitude
            )));
        }
        if !self.omega.is_finite() {
            return Err(Error::Validation(format!("manufactured frequency must be finite, got {}", self.omega)));
        }
        Ok(())
    }

    /// Half-width beyond which every field is within 1e-12 of the far field.
    pub fn support_radius(&self) -> f64 {
        // |x| e^{-x^2} <= 1e-12 / |a| is implied by e^{-x^2} <= 1e-13
        (13.0 * std::f64::consts::LN_10).sqrt()
    }

    /// Jets of `(v, u, theta)` at `(t, x)`.
    pub fn jets(&self, t: f64, x: f64) -> [Jet; 3] {
        let (a, w) = (self.amplitude, self.omega);
        let g = (-x * x).exp();
        let g1 = -2.0 * x * g;
        let g2 = (4.0 * x * x - 2.0) * g;
        // f = x g
        let f = x * g;
        let f1 = (1.0 - 2.0 * x * x) * g;
        let f2 = (4.0 * x * x * x - 6.0 * x) * g;

        let (s, c) = (w * t).sin_cos();
        let (s4, c4) = (w * t + FRAC_PI_4).sin_cos();
        [
            Jet { val: 1.0 + a * g * c, t: -a * w * g * s, x: a * g1 * c, xx: a * g2 * c },
            Jet { val: a * f * s, t: a * w * f * c, x: a * f1 * s, xx: a * f2 * s },
            Jet { val: 1.0 + a * g * c4, t: -a * w * g * s4, x: a * g1 * c4, xx: a * g2 * c4 },
        ]
    }

    /// Exact `(v, u, theta)`.
    pub fn exact(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let [v, u, th] = self.jets(t, x);
        (v.val, u.val, th.val)
    }

    /// Exact fields sampled on `grid` at time `t`.
    pub fn exact_state(&self, grid: &Grid, t: f64) -> State {
        State::from_profile(grid, t, |x| self.exact(t, x))
    }
}

/// Residuals of the three balance laws under the exact fields:
///
/// ```text
/// S_v     = v_t - u_x
/// S_u     = u_t + P_x - [mu u_x / v]_x
/// S_theta = c_v theta_t + theta u_x / v - [kappa theta_x / v]_x - mu u_x^2 / v
/// ```
pub fn mms_sources(case: &ManufacturedCase, model: &GasModel, t: f64, x: f64) -> (f64, f64, f64) {
    let [v, u, th] = case.jets(t, x);
    let alpha = model.alpha();
    let [h, h1, _, _] = model.h().jet(v.val);
    let ta = (alpha * th.val.ln()).exp();
    // q = h(v) theta^alpha / v and its x-derivative
    let q = h * ta / v.val;
    let q_x = ta * ((h1 / v.val - h / (v.val * v.val)) * v.x + h / v.val * alpha * th.x / th.val);

    let (mu_v, mu_v_x) = (model.mu_tilde() * q, model.mu_tilde() * q_x);
    let (ka_v, ka_v_x) = (model.kappa_tilde() * q, model.kappa_tilde() * q_x);

    let p_x = th.x / v.val - th.val * v.x / (v.val * v.val);
    let s_v = v.t - u.x;
    let s_u = u.t + p_x - (mu_v_x * u.x + mu_v * u.xx);
    let s_theta = model.cv() * th.t + th.val * u.x / v.val - (ka_v_x * th.x + ka_v * th.xx) - mu_v * u.x * u.x;
    (s_v, s_u, s_theta)
}

/// Adds the manufactured sources: `S_v` and `S_theta / c_v` at cell
/// centres, `S_u` at nodes.
#[derive(Clone, Debug)]
pub struct ManufacturedForcing {
    pub case: ManufacturedCase,
}

impl Forcing for ManufacturedForcing {
    fn add(&self, grid: &Grid, model: &GasModel, t: f64, rates: &mut Rates) {
        let cv = model.cv();
        for c in grid.interior_cells() {
            let (s_v, _, s_th) = mms_sources(&self.case, model, t, grid.cell_x(c));
            rates.dv_dt[c] += s_v;
            rates.dtheta_dt[c] += s_th / cv;
        }
        for n in grid.interior_nodes() {
            rates.du_dt[n] += mms_sources(&self.case, model, t, grid.node_x(n)).1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::HProfile;
    use proptest::prelude::*;

    fn model(alpha: f64) -> GasModel {
        GasModel::new(1.4, 1.0, 1.0, alpha, HProfile::power_sum(1.0, 1.0).unwrap()).unwrap()
    }

    /// Sixth-order central first derivative.
    fn d6(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        let w = [(1.0, 3.0 / 4.0), (2.0, -3.0 / 20.0), (3.0, 1.0 / 60.0)];
        w.iter().map(|&(k, c)| c * (f(x + k * h) - f(x - k * h))).sum::<f64>() / h
    }

    /// Sources assembled from fluxes evaluated pointwise, every derivative
    /// by finite differences of the exact fields.
    fn fd_sources(case: &ManufacturedCase, m: &GasModel, t: f64, x: f64) -> (f64, f64, f64) {
        let h = 1e-3;
        let f = |t: f64, x: f64| case.exact(t, x);
        let v = |x: f64| f(t, x).0;
        let u = |x: f64| f(t, x).1;
        let th = |x: f64| f(t, x).2;
        let v_t = d6(&|s| f(s, x).0, t, h);
        let u_t = d6(&|s| f(s, x).1, t, h);
        let th_t = d6(&|s| f(s, x).2, t, h);
        let u_x = |y: f64| d6(&u, y, h);
        let stress = |y: f64| {
            let mu = m.transport(v(y), th(y)).unwrap().mu;
            th(y) / v(y) - mu * u_x(y) / v(y)
        };
        let heat = |y: f64| m.transport(v(y), th(y)).unwrap().kappa * d6(&th, y, h) / v(y);
        let (vx, thx) = (v(x), th(x));
        let mu = m.transport(vx, thx).unwrap().mu;
        let ux = u_x(x);
        (
            v_t - ux,
            u_t + d6(&stress, x, h),
            m.cv() * th_t + thx * ux / vx - d6(&heat, x, h) - mu * ux * ux / vx,
        )
    }

    #[test]
    fn jets_match_finite_differences() {
        let case = ManufacturedCase::new(0.3, 1.7).unwrap();
        let h = 1e-3;
        for &(t, x) in &[(0.0, 0.3), (0.7, -1.1), (2.3, 0.05)] {
            let jets = case.jets(t, x);
            for (i, j) in jets.iter().enumerate() {
                let pick = |s: f64, y: f64| {
                    let e = case.exact(s, y);
                    [e.0, e.1, e.2][i]
                };
                assert!((d6(&|s| pick(s, x), t, h) - j.t).abs() < 1e-10);
                assert!((d6(&|y| pick(t, y), x, h) - j.x).abs() < 1e-10);
                let dx = |y: f64| d6(&|z| pick(t, z), y, h);
                assert!((d6(&dx, x, h) - j.xx).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sources_match_finite_difference_oracle() {
        let case = ManufacturedCase::default();
        let m = model(0.1);
        for &(t, x) in &[(0.0, 0.4), (0.3, -0.8), (1.0, 1.3), (2.5, -0.2), (0.9, 0.0)] {
            let exact = mms_sources(&case, &m, t, x);
            let oracle = fd_sources(&case, &m, t, x);
            let scale = exact.0.abs().max(exact.1.abs()).max(exact.2.abs());
            for (a, b) in [(exact.0, oracle.0), (exact.1, oracle.1), (exact.2, oracle.2)] {
                assert!((a - b).abs() <= 1e-8 * scale, "t={t} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_amplitude_has_no_sources() {
        let case = ManufacturedCase::new(0.0, 1.0).unwrap();
        for &x in &[-2.0, 0.0, 0.5] {
            assert_eq!(mms_sources(&case, &model(0.1), 0.7, x), (0.0, 0.0, 0.0));
            assert_eq!(case.exact(0.7, x), (1.0, 0.0, 1.0));
        }
    }

    #[test]
    fn rejects_large_amplitude() {
        assert!(ManufacturedCase::new(1.0, 1.0).is_err());
        assert!(ManufacturedCase::new(-1.5, 1.0).is_err());
    }

    #[test]
    fn far_field_tails() {
        let case = ManufacturedCase::new(0.99, 1.0).unwrap();
        let r = case.support_radius();
        for t in [0.0, 0.4, 3.0] {
            let (v, u, th) = case.exact(t, r);
            assert!((v - 1.0).abs() < 1e-12 && u.abs() < 1e-12 && (th - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn fields_bounded_below(a in -0.95f64..0.95, t in 0.0f64..10.0, x in -5.0f64..5.0) {
            let case = ManufacturedCase::new(a, 1.3).unwrap();
            let (v, _, th) = case.exact(t, x);
            prop_assert!(v >= 1.0 - a.abs() - 1e-15 && th >= 1.0 - a.abs() - 1e-15);
        }
    }
}
