//! First-order uncertainty propagation for Cp and λ, and a Monte Carlo
//! cross-check.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::config::Config;
use crate::model::{Channel, Record};

/// Standard uncertainties of the measurement inputs. `u_v` is absolute
/// (m/s); the rest are relative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UncertaintyInputs {
    pub u_v: f64,
    pub u_p_rel: f64,
    pub u_rho_rel: f64,
    pub u_a_rel: f64,
    pub u_omega_rel: f64,
    pub u_r_rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyBudget {
    pub u_v: f64,
    pub u_p_rel: f64,
    pub u_rho_rel: f64,
    pub u_a_rel: f64,
    pub u_cp_rel: f64,
    pub u_lambda_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UncertaintyError {
    #[error("wind speed must be > 0, got {0}")]
    NonPositiveWind(f64),
    #[error("uncertainty {0} must be finite and >= 0")]
    Negative(&'static str),
}

pub fn propagate_uncertainty(
    inputs: &UncertaintyInputs,
    v: f64,
) -> Result<UncertaintyBudget, UncertaintyError> {
    if v.is_nan() || v <= 0.0 {
        return Err(UncertaintyError::NonPositiveWind(v));
    }
    for (name, x) in [
        ("u_v", inputs.u_v),
        ("u_p_rel", inputs.u_p_rel),
        ("u_rho_rel", inputs.u_rho_rel),
        ("u_a_rel", inputs.u_a_rel),
        ("u_omega_rel", inputs.u_omega_rel),
        ("u_r_rel", inputs.u_r_rel),
    ] {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(UncertaintyError::Negative(name));
        }
    }
    let v_rel = inputs.u_v / v;
    let u_cp_rel = (inputs.u_p_rel.powi(2)
        + (3.0 * v_rel).powi(2)
        + inputs.u_rho_rel.powi(2)
        + inputs.u_a_rel.powi(2))
    .sqrt();
    let u_lambda_rel =
        (v_rel.powi(2) + inputs.u_omega_rel.powi(2) + inputs.u_r_rel.powi(2)).sqrt();
    Ok(UncertaintyBudget {
        u_v: inputs.u_v,
        u_p_rel: inputs.u_p_rel,
        u_rho_rel: inputs.u_rho_rel,
        u_a_rel: inputs.u_a_rel,
        u_cp_rel,
        u_lambda_rel,
    })
}

/// Relative uncertainty of ρ = p/(R·T) from the sensor noise.
pub fn density_rel_uncertainty(temp_c: f64, pressure_pa: f64, u_temp: f64, u_pressure: f64) -> f64 {
    let t_k = temp_c + 273.15;
    ((u_pressure / pressure_pa).powi(2) + (u_temp / t_k).powi(2)).sqrt()
}

/// Relative uncertainty of P = V·I.
pub fn power_rel_uncertainty(voltage: f64, current: f64, u_voltage: f64, u_current: f64) -> f64 {
    ((u_voltage / voltage).powi(2) + (u_current / current).powi(2)).sqrt()
}

/// Per-record inputs from the configured sensor noise.
pub fn record_inputs(config: &Config, r: &Record) -> UncertaintyInputs {
    let s = |c: Channel| config.sensor(c).noise_std;
    // Guard against dividing by a near-zero reading.
    let v_floor = config.sensor(Channel::Voltage).quantum().max(1e-3);
    let i_floor = config.sensor(Channel::Current).quantum().max(1e-3);
    UncertaintyInputs {
        u_v: s(Channel::Wind),
        u_p_rel: power_rel_uncertainty(
            r.voltage_v.abs().max(v_floor),
            r.current_a.abs().max(i_floor),
            s(Channel::Voltage),
            s(Channel::Current),
        ),
        u_rho_rel: density_rel_uncertainty(
            r.temp_c,
            r.pressure_pa,
            s(Channel::Temp),
            s(Channel::Pressure),
        ),
        ..Default::default()
    }
}

/// Operating point for the Monte Carlo check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub v: f64,
    pub p: f64,
    pub rho: f64,
    pub area: f64,
}

/// Relative standard deviation of Cp when v, P, ρ and A are perturbed with
/// independent normal errors.
pub fn monte_carlo_cp_rel<R: Rng>(
    inputs: &UncertaintyInputs,
    op: &OperatingPoint,
    samples: usize,
    rng: &mut R,
) -> f64 {
    let dist = |mean: f64, sd: f64| Normal::new(mean, sd).expect("finite std");
    let v = dist(op.v, inputs.u_v);
    let p = dist(op.p, inputs.u_p_rel * op.p);
    let rho = dist(op.rho, inputs.u_rho_rel * op.rho);
    let a = dist(op.area, inputs.u_a_rel * op.area);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        let vv = v.sample(rng);
        let cp = p.sample(rng) / (0.5 * rho.sample(rng) * a.sample(rng) * vv * vv * vv);
        let d = cp - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (cp - mean);
    }
    (m2 / samples as f64).sqrt() / mean
}
