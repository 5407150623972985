use crate::constitutive::{kanel_increment, kanel_integrand, HProfile};
use crate::{Error, Result};

/// Memoized Kanel' potential on nodes `z_k = exp(k * STEP)` with cubic
/// Hermite interpolation between nodes, using the exact derivative
/// `sqrt(phi(z)) h(z) / z`. Node `k = 0` is `z = 1`, where the integrand has
/// its kink, so every interpolation interval is smooth.
#[derive(Clone, Debug)]
pub struct KanelTable {
    h: HProfile,
    lo: i64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const STEP: f64 = 1.0 / 256.0;
const MARGIN: i64 = 64;
const PIECE_TOL: f64 = 1e-13;

impl KanelTable {
    pub fn new(h: HProfile) -> Result<Self> {
        let mut t = Self { h, lo: 0, values: vec![0.0], slopes: vec![0.0] };
        t.rebuild(-MARGIN, MARGIN)?;
        Ok(t)
    }

    pub fn h(&self) -> &HProfile {
        &self.h
    }

    fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    fn node(k: i64) -> f64 {
        (k as f64 * STEP).exp()
    }

    fn rebuild(&mut self, lo: i64, hi: i64) -> Result<()> {
        let lo = lo.min(0);
        let hi = hi.max(0);
        self.h.check_domain(Self::node(lo))?;
        self.h.check_domain(Self::node(hi))?;
        let len = (hi - lo + 1) as usize;
        let mut values = vec![0.0; len];
        let at = |k: i64| (k - lo) as usize;
        for k in 1..=hi {
            values[at(k)] = values[at(k - 1)]
                + kanel_increment(&self.h, Self::node(k - 1), Self::node(k), PIECE_TOL)?;
        }
        for k in (lo..0).rev() {
            values[at(k)] = values[at(k + 1)]
                - kanel_increment(&self.h, Self::node(k), Self::node(k + 1), PIECE_TOL)?;
        }
        self.slopes = (lo..=hi).map(|k| kanel_integrand(&self.h, Self::node(k))).collect();
        self.values = values;
        self.lo = lo;
        Ok(())
    }

    /// Grows the table so `[v_min, v_max]` is covered.
    pub fn ensure(&mut self, v_min: f64, v_max: f64) -> Result<()> {
        if !(v_min > 0.0 && v_max.is_finite()) {
            return Err(Error::Domain(format!("Kanel table range [{v_min}, {v_max}] invalid")));
        }
        let need_lo = (v_min.ln() / STEP).floor() as i64 - 1;
        let need_hi = (v_max.ln() / STEP).ceil() as i64 + 1;
        if need_lo < self.lo || need_hi > self.hi() {
            let lo = if need_lo < self.lo { need_lo - MARGIN } else { self.lo };
            let hi = if need_hi > self.hi() { need_hi + MARGIN } else { self.hi() };
            self.rebuild(lo, hi)?;
        }
        Ok(())
    }

    /// Interpolated `Phi(v)`; call [`ensure`](Self::ensure) first for values
    /// outside the current range.
    pub fn eval(&self, v: f64) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::Domain(format!("Kanel potential needs v > 0, got {v}")));
        }
        let s = v.ln() / STEP;
        let mut k = s.floor() as i64;
        if k < self.lo || k + 1 > self.hi() {
            return Err(Error::Domain(format!("v = {v} outside the Kanel table range")));
        }
        let (z0, z1) = (Self::node(k), Self::node(k + 1));
        // round-off in ln may put v just outside [z0, z1]
        if v < z0 && k > self.lo {
            k -= 1;
        }
        let (z0, z1) = if v < z0 { (Self::node(k), z0) } else { (z0, z1) };
        let i = (k - self.lo) as usize;
        let width = z1 - z0;
        let t = (v - z0) / width;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * self.values[i]
            + h10 * width * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * width * self.slopes[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::kanel_potential;

    #[test]
    fn matches_direct_quadrature() {
        let h = HProfile::power_sum(1.0, 1.0).unwrap();
        let mut t = KanelTable::new(h.clone()).unwrap();
        t.ensure(0.05, 20.0).unwrap();
        for k in 0..400 {
            let v = 0.05 * (400f64.ln() * k as f64 / 399.0).exp();
            let direct = kanel_potential(&h, v).unwrap();
            let interp = t.eval(v).unwrap();
            assert!((direct - interp).abs() < 1e-9 * (1.0 + direct.abs()), "v={v}: {direct} vs {interp}");
        }
        assert_eq!(t.eval(1.0).unwrap(), 0.0);
    }

    #[test]
    fn grows_on_demand() {
        let mut t = KanelTable::new(HProfile::constant(1.0, 0.0, 0.0).unwrap()).unwrap();
        assert!(t.eval(5.0).is_err());
        t.ensure(0.9, 5.0).unwrap();
        assert!((t.eval(5.0).unwrap() - kanel_potential(t.h(), 5.0).unwrap()).abs() < 1e-9);
    }
}
