//! Adiabatic cavity field for a frozen atomic configuration.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::Params;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FieldSnapshot {
    #[serde(serialize_with = "ser_complex")]
    pub alpha: Complex64,
    pub kappa_eff: f64,
    pub delta_eff: f64,
    pub n_photons: f64,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

/// `Σ cos(x_j)` and `Σ cos²(x_j)`.
#[inline]
pub fn cos_sums(positions: &[f64]) -> (f64, f64) {
    positions.iter().fold((0.0, 0.0), |(c, c2), &x| {
        let v = x.cos();
        (c + v, c2 + v * v)
    })
}

/// `Δ_c′ = Δ_c − U Σ cos²(x_j)`.
pub fn effective_detuning(positions: &[f64], params: &Params) -> f64 {
    params.delta_c - params.shift_u() * cos_sums(positions).1
}

/// `κ′ = κ + Γ Σ cos²(x_j)`, or exactly `κ` with spontaneous emission off.
pub fn effective_kappa(positions: &[f64], params: &Params, spontaneous: bool) -> f64 {
    if spontaneous {
        params.kappa + params.gamma_half_prime() * cos_sums(positions).1
    } else {
        params.kappa
    }
}

pub fn coherent_amplitude(positions: &[f64], params: &Params, spontaneous: bool) -> Complex64 {
    snapshot(positions, params, spontaneous).alpha
}

pub fn snapshot(positions: &[f64], params: &Params, spontaneous: bool) -> FieldSnapshot {
    let (c, c2) = cos_sums(positions);
    let delta_eff = params.delta_c - params.shift_u() * c2;
    let (kappa_eff, absorb) = if spontaneous {
        let gh = params.gamma_half_prime();
        (params.kappa + gh * c2, gh * params.ratio_s())
    } else {
        (params.kappa, 0.0)
    };
    let alpha = Complex64::new(params.pump_s(), -absorb) * c / Complex64::new(delta_eff, kappa_eff);
    FieldSnapshot {
        alpha,
        kappa_eff,
        delta_eff,
        n_photons: alpha.norm_sqr(),
    }
}

/// `δ = Δ_c − N U / 2`.
pub fn shifted_detuning(params: &Params, n_atoms: usize) -> f64 {
    params.delta_c - 0.5 * n_atoms as f64 * params.shift_u()
}

/// Self-organization threshold `Ω_c = (κ² + δ²)/(2|δ|√N) · |Δ_a|/g`.
pub fn threshold_pump(params: &Params, n_atoms: usize) -> Result<f64> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter("need at least one atom".into()));
    }
    let delta = shifted_detuning(params, n_atoms);
    if delta == 0.0 {
        return Err(Error::ThresholdDiverges);
    }
    let k = params.kappa;
    Ok(
        (k * k + delta * delta) / (2.0 * delta.abs() * (n_atoms as f64).sqrt())
            * params.delta_a.abs()
            / params.g,
    )
}

/// Mean photon number for uniformly distributed atoms, `N S² / 2 / (Δ_c² + κ²)`.
pub fn mean_photon_number_uniform(params: &Params, n_atoms: usize) -> f64 {
    let s = params.pump_s();
    0.5 * n_atoms as f64 * s * s / (params.delta_c.powi(2) + params.kappa.powi(2))
}

/// Same quantity written through the pump-to-threshold ratio,
/// `(Ω/Ω_c)² (Δ_c² + κ²)/(8 Δ_c²)`.
pub fn mean_photon_number_from_threshold(pump_over_threshold: f64, params: &Params) -> f64 {
    let dc2 = params.delta_c * params.delta_c;
    pump_over_threshold.powi(2) * (dc2 + params.kappa * params.kappa) / (8.0 * dc2)
}
