//! Ideal polytropic gas closure and transport laws.
//!
//! Gas constants are normalized so that `P = theta / v`, `e = c_v theta` with
//! `c_v = 1 / (gamma - 1)`. The far-field state `(v, u, theta) = (1, 0, 1)` is
//! the entropy zero point. Transport coefficients are
//! `mu = mu_tilde h(v) theta^alpha` and `kappa = kappa_tilde h(v) theta^alpha`,
//! with `theta^alpha` evaluated as `exp(alpha ln theta)` so any real `alpha`
//! is accepted.
//!
//! The envelope of `h` uses the Euclidean norm of `(h, h', h'', h''')`.

mod hprofile;
pub mod quadrature;

pub use hprofile::{
    h_envelope, validate_h, AdmissibilityReport, HJet, HKind, HProfile, DEFAULT_C_CAP,
};

use crate::{Error, Result};

/// Absolute tolerance of [`kanel_potential`].
pub const KANEL_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct GasModel {
    gamma: f64,
    cv: f64,
    mu_tilde: f64,
    kappa_tilde: f64,
    alpha: f64,
    h: HProfile,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transport {
    pub mu: f64,
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportDerivatives {
    pub dmu_dv: f64,
    pub dmu_dtheta: f64,
    pub dkappa_dv: f64,
    pub dkappa_dtheta: f64,
}

impl GasModel {
    pub fn new(gamma: f64, mu_tilde: f64, kappa_tilde: f64, alpha: f64, h: HProfile) -> Result<Self> {
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::Argument(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(mu_tilde > 0.0 && mu_tilde.is_finite()) {
            return Err(Error::Argument(format!("mu_tilde must be positive, got {mu_tilde}")));
        }
        if !(kappa_tilde > 0.0 && kappa_tilde.is_finite()) {
            return Err(Error::Argument(format!("kappa_tilde must be positive, got {kappa_tilde}")));
        }
        if !alpha.is_finite() {
            return Err(Error::Argument(format!("alpha must be finite, got {alpha}")));
        }
        Ok(Self { gamma, cv: 1.0 / (gamma - 1.0), mu_tilde, kappa_tilde, alpha, h })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cv(&self) -> f64 {
        self.cv
    }

    pub fn mu_tilde(&self) -> f64 {
        self.mu_tilde
    }

    pub fn kappa_tilde(&self) -> f64 {
        self.kappa_tilde
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn h(&self) -> &HProfile {
        &self.h
    }

    pub fn internal_energy(&self, theta: f64) -> Result<f64> {
        positive("theta", theta)?;
        Ok(self.cv * theta)
    }

    /// Specific entropy with `s(1, 1) = 0`: `s = c_v ln theta + ln v`.
    pub fn entropy(&self, v: f64, theta: f64) -> Result<f64> {
        positive("v", v)?;
        positive("theta", theta)?;
        Ok(self.cv * theta.ln() + v.ln())
    }

    /// Unchecked transport evaluation for inner loops; callers ensure `v, theta > 0`.
    #[inline]
    pub fn transport_unchecked(&self, v: f64, theta: f64) -> Transport {
        let scale = self.h.value(v) * (self.alpha * theta.ln()).exp();
        Transport { mu: self.mu_tilde * scale, kappa: self.kappa_tilde * scale }
    }

    pub fn transport(&self, v: f64, theta: f64) -> Result<Transport> {
        positive("v", v)?;
        positive("theta", theta)?;
        self.h.check_domain(v)?;
        Ok(self.transport_unchecked(v, theta))
    }

    #[inline]
    pub fn transport_derivatives_unchecked(&self, v: f64, theta: f64) -> TransportDerivatives {
        let power = (self.alpha * theta.ln()).exp();
        let hv = self.h.value(v);
        let dh = self.h.derivative(v);
        let mu = self.mu_tilde * hv * power;
        let kappa = self.kappa_tilde * hv * power;
        TransportDerivatives {
            dmu_dv: self.mu_tilde * dh * power,
            dmu_dtheta: self.alpha * mu / theta,
            dkappa_dv: self.kappa_tilde * dh * power,
            dkappa_dtheta: self.alpha * kappa / theta,
        }
    }

    pub fn transport_derivatives(&self, v: f64, theta: f64) -> Result<TransportDerivatives> {
        positive("v", v)?;
        positive("theta", theta)?;
        self.h.check_domain(v)?;
        Ok(self.transport_derivatives_unchecked(v, theta))
    }

    /// `phi(v) + u^2/2 + c_v phi(theta)`.
    pub fn eta(&self, v: f64, u: f64, theta: f64) -> Result<f64> {
        Ok(phi(v)? + 0.5 * u * u + self.cv * phi(theta)?)
    }

    /// Lagrangian sound speed `sqrt(gamma theta) / v`.
    #[inline]
    pub fn sound_speed(&self, v: f64, theta: f64) -> f64 {
        (self.gamma * theta).sqrt() / v
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
    }
}

pub fn pressure(v: f64, theta: f64) -> Result<f64> {
    positive("v", v)?;
    positive("theta", theta)?;
    Ok(theta / v)
}

/// `z - ln z - 1`, evaluated without cancellation near `z = 1`.
pub fn phi(z: f64) -> Result<f64> {
    positive("z", z)?;
    Ok(phi_unchecked(z))
}

#[inline]
pub fn phi_unchecked(z: f64) -> f64 {
    let x = z - 1.0;
    if x.abs() < 1e-3 {
        // x^2/2 - x^3/3 + ... through x^7
        let x2 = x * x;
        x2 * (0.5 - x * (1.0 / 3.0 - x * (0.25 - x * (0.2 - x * (1.0 / 6.0 - x / 7.0)))))
    } else {
        (x - x.ln_1p()).max(0.0)
    }
}

/// Integrand of the Kanel' potential: `sqrt(phi(z)) h(z) / z`.
#[inline]
pub fn kanel_integrand(h: &HProfile, z: f64) -> f64 {
    phi_unchecked(z).sqrt() * h.value(z) / z
}

/// `Phi(v) = int_1^v sqrt(phi(z)) h(z) / z dz` by adaptive Simpson.
///
/// The integrand has a `|z - 1|` kink at `z = 1`, which is always an endpoint,
/// so each call integrates a smooth function.
pub fn kanel_potential(h: &HProfile, v: f64) -> Result<f64> {
    positive("v", v)?;
    h.check_domain(v)?;
    kanel_increment(h, 1.0, v, KANEL_TOL)
}

/// `Phi(b) - Phi(a)`; `a` and `b` must lie on the same side of 1.
pub(crate) fn kanel_increment(h: &HProfile, a: f64, b: f64, tol: f64) -> Result<f64> {
    quadrature::adaptive_simpson(&|z: f64| kanel_integrand(h, z), a, b, tol)
}
