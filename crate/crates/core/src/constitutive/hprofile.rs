use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{Error, Result};

/// Closure returning `(h, h', h'', h''')` at a point.
pub type HJet = dyn Fn(f64) -> [f64; 4] + Send + Sync;

/// Shape of the volume factor `h(v)` in the transport laws.
#[derive(Clone)]
pub enum HKind {
    /// `h(v) = v^ell1 + v^(-ell2)`.
    PowerSum { ell1: f64, ell2: f64 },
    /// `h(v) = c`.
    Constant(f64),
    /// User supplied `h` and derivatives, valid on `domain`.
    Custom {
        name: String,
        jet: Arc<HJet>,
        domain: (f64, f64),
    },
}

impl fmt::Debug for HKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HKind::PowerSum { ell1, ell2 } => write!(f, "PowerSum({ell1}, {ell2})"),
            HKind::Constant(c) => write!(f, "Constant({c})"),
            HKind::Custom { name, domain, .. } => {
                write!(f, "Custom({name}, [{}, {}])", domain.0, domain.1)
            }
        }
    }
}

/// The profile `h` together with its declared growth exponents.
#[derive(Clone, Debug)]
pub struct HProfile {
    kind: HKind,
    ell1: f64,
    ell2: f64,
    c_admissible: Option<f64>,
}

impl HProfile {
    pub fn power_sum(ell1: f64, ell2: f64) -> Result<Self> {
        if !(ell1 >= 0.0 && ell2 >= 0.0 && ell1.is_finite() && ell2.is_finite()) {
            return Err(Error::Argument(format!(
                "power-sum exponents must be finite and nonnegative, got ({ell1}, {ell2})"
            )));
        }
        Ok(Self { kind: HKind::PowerSum { ell1, ell2 }, ell1, ell2, c_admissible: None })
    }

    /// Constant profile with declared exponents `ell1`, `ell2` (used only by
    /// admissibility checks).
    pub fn constant(c: f64, ell1: f64, ell2: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Argument(format!("constant h must be positive, got {c}")));
        }
        Ok(Self { kind: HKind::Constant(c), ell1, ell2, c_admissible: None })
    }

    pub fn custom(
        name: impl Into<String>,
        jet: Arc<HJet>,
        domain: (f64, f64),
        ell1: f64,
        ell2: f64,
    ) -> Result<Self> {
        if !(domain.0 >= 0.0 && domain.0 < domain.1) {
            return Err(Error::Argument(format!("invalid custom h domain {domain:?}")));
        }
        Ok(Self {
            kind: HKind::Custom { name: name.into(), jet, domain },
            ell1,
            ell2,
            c_admissible: None,
        })
    }

    pub fn kind(&self) -> &HKind {
        &self.kind
    }

    pub fn ell1(&self) -> f64 {
        self.ell1
    }

    pub fn ell2(&self) -> f64 {
        self.ell2
    }

    /// Constant recorded by a previous [`validate_h`]; `None` means unverified.
    pub fn c_admissible(&self) -> Option<f64> {
        self.c_admissible
    }

    pub fn with_admissibility(mut self, report: &AdmissibilityReport) -> Self {
        self.c_admissible = report.admissible.then_some(report.c_required);
        self
    }

    /// `h(v)`. Callers guarantee `v > 0`.
    #[inline]
    pub fn value(&self, v: f64) -> f64 {
        match &self.kind {
            HKind::PowerSum { ell1, ell2 } => v.powf(*ell1) + v.powf(-*ell2),
            HKind::Constant(c) => *c,
            HKind::Custom { jet, .. } => jet(v)[0],
        }
    }

    #[inline]
    pub fn derivative(&self, v: f64) -> f64 {
        match &self.kind {
            HKind::PowerSum { ell1, ell2 } => {
                ell1 * v.powf(ell1 - 1.0) - ell2 * v.powf(-ell2 - 1.0)
            }
            HKind::Constant(_) => 0.0,
            HKind::Custom { jet, .. } => jet(v)[1],
        }
    }

    /// `(h, h', h'', h''')` at `v`.
    pub fn jet(&self, v: f64) -> [f64; 4] {
        match &self.kind {
            HKind::PowerSum { ell1: a, ell2: b } => {
                let (a, b) = (*a, *b);
                [
                    v.powf(a) + v.powf(-b),
                    a * v.powf(a - 1.0) - b * v.powf(-b - 1.0),
                    a * (a - 1.0) * v.powf(a - 2.0) + b * (b + 1.0) * v.powf(-b - 2.0),
                    a * (a - 1.0) * (a - 2.0) * v.powf(a - 3.0)
                        - b * (b + 1.0) * (b + 2.0) * v.powf(-b - 3.0),
                ]
            }
            HKind::Constant(c) => [*c, 0.0, 0.0, 0.0],
            HKind::Custom { jet, .. } => jet(v),
        }
    }

    /// Checks `v` lies where `h` is defined and positive.
    pub fn check_domain(&self, v: f64) -> Result<()> {
        let ok = match &self.kind {
            HKind::Custom { domain, .. } => v >= domain.0 && v <= domain.1,
            _ => v > 0.0 && v.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("h evaluated outside its domain at v = {v}")))
        }
    }
}

/// Sup of the Euclidean norm of `(h, h', h'', h''')` over `[w, 1/w]`.
///
/// Geometric sampling including both endpoints, doubled until two successive
/// refinements agree to relative 1e-6.
pub fn h_envelope(h: &HProfile, w: f64) -> Result<f64> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::Domain(format!("envelope argument must lie in (0, 1], got {w}")));
    }
    let norm = |s: f64| {
        let j = h.jet(s);
        (j[0] * j[0] + j[1] * j[1] + j[2] * j[2] + j[3] * j[3]).sqrt()
    };
    if w == 1.0 {
        h.check_domain(1.0)?;
        return Ok(norm(1.0));
    }
    h.check_domain(w)?;
    h.check_domain(1.0 / w)?;

    let sample_sup = |n: usize| {
        let span = -2.0 * w.ln();
        (0..n)
            .map(|k| {
                let s = if k == n - 1 { 1.0 / w } else { w * (span * k as f64 / (n - 1) as f64).exp() };
                norm(s)
            })
            .fold(0.0_f64, f64::max)
    };

    let mut n = 1025;
    let mut prev = sample_sup(n);
    loop {
        n = 2 * n - 1;
        let next = sample_sup(n);
        if (next - prev).abs() <= 1e-6 * next.abs() || n > (1 << 22) {
            return Ok(next);
        }
        prev = next;
    }
}

/// Result of sampling the two growth conditions on `h` over a finite range.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub v_min: f64,
    pub v_max: f64,
    pub samples: usize,
    pub ell1: f64,
    pub ell2: f64,
    /// Smallest `C` with `C h(v) >= v^ell1 + v^(-ell2)` on the grid.
    pub c_growth: f64,
    /// Smallest `C` with `h'(v)^2 v <= C h(v)^3` on the grid.
    pub c_derivative: f64,
    /// `max(c_growth, c_derivative)`.
    pub c_required: f64,
    /// Sample where the binding ratio is attained.
    pub worst_v: f64,
    /// Whether the binding ratio peaks at an end of the sampled range.
    pub peaks_at_boundary: bool,
    pub c_cap: f64,
    pub admissible: bool,
}

/// Default ceiling on the empirical constant for a profile to count as admissible.
pub const DEFAULT_C_CAP: f64 = 1.0e3;

/// Empirical constant for the growth conditions on `h` over a geometric
/// grid on `v_range`. The profile is admissible when the required constant is
/// finite and does not exceed `c_cap`.
pub fn validate_h(
    h: &HProfile,
    v_range: (f64, f64),
    samples: usize,
    c_cap: f64,
) -> Result<AdmissibilityReport> {
    let (lo, hi) = v_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Domain(format!("invalid v range [{lo}, {hi}]")));
    }
    if samples < 2 {
        return Err(Error::Argument(format!("need at least 2 samples, got {samples}")));
    }
    if !(c_cap > 0.0) {
        return Err(Error::Argument(format!("c_cap must be positive, got {c_cap}")));
    }
    h.check_domain(lo)?;
    h.check_domain(hi)?;

    let (ell1, ell2) = (h.ell1(), h.ell2());
    let ratio = (hi / lo).ln();
    let mut c_growth = 0.0_f64;
    let mut c_derivative = 0.0_f64;
    let mut worst = (0.0_f64, lo, 0usize);
    for k in 0..samples {
        let v = if k == samples - 1 {
            hi
        } else {
            lo * (ratio * k as f64 / (samples - 1) as f64).exp()
        };
        let hv = h.value(v);
        let dh = h.derivative(v);
        let growth = if hv > 0.0 { (v.powf(ell1) + v.powf(-ell2)) / hv } else { f64::INFINITY };
        let deriv = if hv > 0.0 { dh * dh * v / (hv * hv * hv) } else { f64::INFINITY };
        c_growth = c_growth.max(growth);
        c_derivative = c_derivative.max(deriv);
        let binding = growth.max(deriv);
        if binding > worst.0 || k == 0 {
            worst = (binding, v, k);
        }
    }
    let c_required = c_growth.max(c_derivative);
    let admissible = c_required.is_finite() && c_required <= c_cap;
    Ok(AdmissibilityReport {
        v_min: lo,
        v_max: hi,
        samples,
        ell1,
        ell2,
        c_growth,
        c_derivative,
        c_required,
        worst_v: worst.1,
        peaks_at_boundary: worst.2 == 0 || worst.2 == samples - 1,
        c_cap,
        admissible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_sum_records_exponents() {
        let h = HProfile::power_sum(1.5, 2.0).unwrap();
        assert_eq!((h.ell1(), h.ell2()), (1.5, 2.0));
        assert!(h.c_admissible().is_none());
        assert!(HProfile::power_sum(-1.0, 1.0).is_err());
        assert!(HProfile::constant(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn power_sum_jet_matches_finite_differences() {
        let h = HProfile::power_sum(1.3, 2.1).unwrap();
        for &v in &[0.3, 0.9, 1.0, 2.7] {
            let j = h.jet(v);
            let e = 1e-5;
            for k in 0..3 {
                let fd = (h.jet(v + e)[k] - h.jet(v - e)[k]) / (2.0 * e);
                assert!((fd - j[k + 1]).abs() <= 1e-6 * (1.0 + j[k + 1].abs()), "k={k} v={v}");
            }
            assert_eq!(h.value(v), j[0]);
            assert_eq!(h.derivative(v), j[1]);
        }
    }

    #[test]
    fn envelope_constant_is_one() {
        let h = HProfile::constant(1.0, 0.0, 0.0).unwrap();
        assert_eq!(h_envelope(&h, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn envelope_at_w_one_is_single_point() {
        let h = HProfile::power_sum(1.0, 1.0).unwrap();
        let expected = 44.0_f64.sqrt();
        assert!((h_envelope(&h, 1.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn envelope_matches_dense_uniform_sampling() {
        // independent oracle: 1e5 uniform samples on [w, 1/w]
        let h = HProfile::power_sum(1.0, 1.0).unwrap();
        let w = 0.5;
        let n = 100_000;
        let dense = (0..=n)
            .map(|k| {
                let s = w + (1.0 / w - w) * k as f64 / n as f64;
                let (a, b, c, d) = (s + 1.0 / s, 1.0 - 1.0 / (s * s), 2.0 / s.powi(3), -6.0 / s.powi(4));
                (a * a + b * b + c * c + d * d).sqrt()
            })
            .fold(0.0_f64, f64::max);
        let got = h_envelope(&h, w).unwrap();
        assert!((got - dense).abs() <= 1e-6 * dense, "{got} vs {dense}");
        assert!((got - 9487.25_f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn envelope_rejects_bad_w() {
        let h = HProfile::power_sum(1.0, 1.0).unwrap();
        assert!(h_envelope(&h, 0.0).is_err());
        assert!(h_envelope(&h, 1.5).is_err());
    }

    #[test]
    fn power_sum_is_admissible_with_unit_constant() {
        let h = HProfile::power_sum(1.0, 1.0).unwrap();
        let r = validate_h(&h, (0.1, 10.0), 1000, DEFAULT_C_CAP).unwrap();
        assert!(r.admissible);
        assert_eq!(r.c_growth, 1.0);
    }

    #[test]
    fn power_sum_derivative_condition_dense_grid() {
        // grid search over 1e6 points for sup h'^2 v / h^3, written out by hand
        let n = 1_000_000;
        let (lo, hi) = (0.01_f64, 100.0_f64);
        let mut sup = 0.0_f64;
        for k in 0..n {
            let v = lo * ((hi / lo).ln() * k as f64 / (n - 1) as f64).exp();
            let hv = v + 1.0 / v;
            let dh = 1.0 - 1.0 / (v * v);
            sup = sup.max(dh * dh * v / hv.powi(3));
        }
        assert!(sup <= 1.0);
        let h = HProfile::power_sum(1.0, 1.0).unwrap();
        let r = validate_h(&h, (lo, hi), 10_000, DEFAULT_C_CAP).unwrap();
        assert!(r.c_derivative <= 1.0);
        assert!((r.c_derivative - sup).abs() < 1e-6);
    }

    #[test]
    fn constant_with_zero_exponents_needs_c_two() {
        let h = HProfile::constant(1.0, 0.0, 0.0).unwrap();
        let r = validate_h(&h, (0.5, 2.0), 100, DEFAULT_C_CAP).unwrap();
        assert!(r.admissible);
        assert_eq!(r.c_required, 2.0);
        assert_eq!(r.c_derivative, 0.0);
    }

    #[test]
    fn constant_with_unit_exponents_fails_on_wide_range() {
        let h = HProfile::constant(1.0, 1.0, 1.0).unwrap();
        let r = validate_h(&h, (1e-4, 1e4), 2000, DEFAULT_C_CAP).unwrap();
        assert!(!r.admissible);
        assert!(r.peaks_at_boundary);
        assert!(r.c_required > 1e4);
    }

    #[test]
    fn validate_h_rejects_bad_input() {
        let h = HProfile::power_sum(1.0, 1.0).unwrap();
        assert!(validate_h(&h, (0.0, 1.0), 10, 1e3).is_err());
        assert!(validate_h(&h, (2.0, 1.0), 10, 1e3).is_err());
        assert!(validate_h(&h, (0.5, 1.0), 1, 1e3).is_err());
    }

    #[test]
    fn custom_profile_uses_supplied_jet() {
        let jet: Arc<HJet> = Arc::new(|v: f64| [1.0 + v * v, 2.0 * v, 2.0, 0.0]);
        let h = HProfile::custom("quadratic", jet, (0.0, 1e6), 2.0, 0.0).unwrap();
        assert_eq!(h.value(2.0), 5.0);
        assert_eq!(h.derivative(2.0), 4.0);
        assert!(h.check_domain(2e6).is_err());
        let r = validate_h(&h, (0.1, 10.0), 500, DEFAULT_C_CAP).unwrap();
        assert!(r.admissible);
        let h = h.with_admissibility(&r);
        assert_eq!(h.c_admissible(), Some(r.c_required));
    }
}
