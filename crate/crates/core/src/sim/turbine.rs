//! Ground-truth turbine response.
//!
//! The rotor speed follows the tip-speed ratio of peak Cp through a
//! first-order lag; power is the truth Cp at the resulting ratio times the
//! available wind power at standard air density.

use crate::model::{TurbineGeometry, BETZ_LIMIT};

use super::env::EnvState;

/// Air density used inside the truth model, independent of sensed T and p.
pub const RHO_STD: f64 = 1.225;

/// Piecewise-linear Cp(λ). Values beyond the end knots are held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CpCurve {
    knots: Vec<(f64, f64)>,
}

impl CpCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Self {
        assert!(knots.len() >= 2, "curve needs two knots");
        assert!(
            knots.windows(2).all(|w| w[1].0 > w[0].0),
            "knots must increase in tsr"
        );
        Self { knots }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, tsr: f64) -> f64 {
        let k = &self.knots;
        if tsr <= k[0].0 {
            return k[0].1;
        }
        let last = k[k.len() - 1];
        if tsr >= last.0 {
            return last.1;
        }
        let i = k.partition_point(|&(l, _)| l <= tsr);
        let (l0, c0) = k[i - 1];
        let (l1, c1) = k[i];
        c0 + (c1 - c0) * (tsr - l0) / (l1 - l0)
    }

    /// Knot with the highest Cp.
    pub fn peak(&self) -> (f64, f64) {
        self.knots
            .iter()
            .copied()
            .fold((0.0, f64::NEG_INFINITY), |best, k| if k.1 > best.1 { k } else { best })
    }

    /// Mean of the curve over `[lo, hi)` by the trapezoid rule on a fine
    /// grid; exact enough for piecewise-linear shapes.
    pub fn mean_over(&self, lo: f64, hi: f64) -> f64 {
        let n = 2000;
        let h = (hi - lo) / n as f64;
        let mut acc = 0.5 * (self.eval(lo) + self.eval(hi));
        for i in 1..n {
            acc += self.eval(lo + i as f64 * h);
        }
        acc / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbineTruth {
    pub omega_rad_s: f64,
    pub power_w: f64,
    pub cp_true: f64,
    pub tsr_true: f64,
}

/// Rotor dynamics carrying the lagged angular velocity between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TurbineModel {
    pub geometry: TurbineGeometry,
    pub curve: CpCurve,
    pub time_constant_s: f64,
    omega_rad_s: f64,
}

impl TurbineModel {
    pub fn new(geometry: TurbineGeometry, curve: CpCurve, time_constant_s: f64) -> Self {
        assert!(curve.peak().1 <= BETZ_LIMIT, "truth curve exceeds the Betz limit");
        Self {
            geometry,
            curve,
            time_constant_s,
            omega_rad_s: 0.0,
        }
    }

    /// Starts the rotor already tracking the peak ratio at `wind_mps`.
    pub fn spun_up(mut self, wind_mps: f64) -> Self {
        self.omega_rad_s = self.curve.peak().0 * wind_mps / self.geometry.rotor_radius_m;
        self
    }

    pub fn omega(&self) -> f64 {
        self.omega_rad_s
    }

    /// Advances the rotor by `dt` under `env` and returns the truth sample.
    pub fn respond(&mut self, env: &EnvState, dt: f64) -> TurbineTruth {
        let r = self.geometry.rotor_radius_m;
        let v = env.true_wind_mps;
        let target = self.curve.peak().0 * v / r;
        let blend = 1.0 - (-dt / self.time_constant_s).exp();
        self.omega_rad_s += (target - self.omega_rad_s) * blend;
        if self.omega_rad_s < 0.0 {
            self.omega_rad_s = 0.0;
        }
        let (tsr, cp) = if v > 0.0 {
            let tsr = self.omega_rad_s * r / v;
            (tsr, self.curve.eval(tsr).clamp(0.0, BETZ_LIMIT))
        } else {
            (0.0, 0.0)
        };
        TurbineTruth {
            omega_rad_s: self.omega_rad_s,
            power_w: available_power(cp, RHO_STD, self.geometry.swept_area_m2, v),
            cp_true: cp,
            tsr_true: tsr,
        }
    }
}

/// `cp · ½ · ρ · A · v³`
pub fn available_power(cp: f64, rho: f64, area_m2: f64, wind_mps: f64) -> f64 {
    cp * 0.5 * rho * area_m2 * wind_mps.powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_cp_curve, DEFAULT_CP_CURVE};

    fn model() -> TurbineModel {
        TurbineModel::new(
            TurbineGeometry::new(0.5, 2.0, 4),
            CpCurve::new(parse_cp_curve(DEFAULT_CP_CURVE).unwrap()),
            5.0,
        )
    }

    fn env(v: f64) -> EnvState {
        EnvState {
            true_wind_mps: v,
            true_temp_c: 15.0,
            true_pressure_pa: 101_325.0,
            true_humidity_pct: 70.0,
            sim_time_s: 0.0,
        }
    }

    #[test]
    fn power_formula_direct_evaluation() {
        // 0.2 · 0.5 · 1.225 · 2 · 10³
        assert!((available_power(0.2, RHO_STD, 2.0, 10.0) - 245.0).abs() < 1e-9);
    }

    #[test]
    fn no_wind_no_power_and_rotor_decays() {
        let mut m = model().spun_up(6.0);
        let start = m.omega();
        let mut last = start;
        for _ in 0..20 {
            let t = m.respond(&env(0.0), 1.0);
            assert_eq!(t.power_w, 0.0);
            assert!(t.omega_rad_s < last);
            last = t.omega_rad_s;
        }
        assert!(last < 0.05 * start);
    }

    #[test]
    fn steady_wind_converges_to_peak() {
        let mut m = model();
        let mut t = m.respond(&env(8.0), 1.0);
        for _ in 0..200 {
            t = m.respond(&env(8.0), 1.0);
        }
        assert!((t.tsr_true - 2.1).abs() < 1e-6);
        assert!((t.cp_true - 0.30).abs() < 1e-6);
        assert!((t.power_w - available_power(0.30, RHO_STD, 2.0, 8.0)).abs() < 1e-6);
    }

    #[test]
    fn curve_interpolates_and_holds_ends() {
        let c = CpCurve::new(vec![(0.0, 0.0), (2.0, 0.4), (4.0, 0.0)]);
        assert_eq!(c.eval(1.0), 0.2);
        assert_eq!(c.eval(3.0), 0.2);
        assert_eq!(c.eval(-1.0), 0.0);
        assert_eq!(c.eval(9.0), 0.0);
        assert_eq!(c.peak(), (2.0, 0.4));
        assert!((c.mean_over(0.0, 2.0) - 0.2).abs() < 1e-9);
    }

    #[test]
    fn cp_never_exceeds_betz_under_gusts() {
        let mut m = model().spun_up(6.0);
        for i in 0..10_000 {
            let v = 6.0 + 5.0 * ((i as f64) * 0.37).sin();
            let t = m.respond(&env(v.max(0.0)), 1.0);
            assert!(t.cp_true >= 0.0 && t.cp_true <= BETZ_LIMIT);
        }
    }
}
