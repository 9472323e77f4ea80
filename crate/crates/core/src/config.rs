//! TOML run configuration and the run manifest.
//!
//! All frequencies are in units of `γ/2` of the reference line, momenta in
//! `ħk`, times in `2/γ`. Every key is optional; the defaults describe the
//! Rb-85 reference setup.
//!
//! ```toml
//! [atom]
//! n = 5
//! detuning = -500.0
//! collective_shift = 0.05   # N U / Δ_c; or set vacuum_rabi instead
//!
//! [cavity]
//! linewidth = 0.5
//! detuning = -0.5
//!
//! [drive]
//! rabi = 21.0               # or over_threshold = 0.3
//!
//! [run]
//! trajectories = 5000
//! model = "A"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Params, UnitSystem};
use crate::sde::{FieldInit, IntegratorConfig, Model, Scheme};
use crate::stats::InitialCondition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomConfig {
    pub n: usize,
    /// `γ`.
    pub linewidth: f64,
    /// `Δ_a`.
    pub detuning: f64,
    /// `g`. Exclusive with `collective_shift`.
    pub vacuum_rabi: Option<f64>,
    /// `N U / Δ_c`, solved for `g` at the configured `Δ_c`; 0.05 when
    /// neither coupling key is set.
    pub collective_shift: Option<f64>,
    /// Dipole-pattern second moment `ū²`.
    pub u2: f64,
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self {
            n: 5,
            linewidth: 2.0,
            detuning: -500.0,
            vacuum_rabi: None,
            collective_shift: None,
            u2: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CavityConfig {
    pub linewidth: f64,
    pub detuning: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        Self {
            linewidth: 0.5,
            detuning: -0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    /// `Ω`. Exclusive with `over_threshold`; 21 when neither is set.
    pub rabi: Option<f64>,
    /// `Ω / Ω_c`.
    pub over_threshold: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitsConfig {
    /// `ω_r`; Rb-85 at 780 nm when absent.
    pub recoil: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub trajectories: usize,
    /// Use [`FAST_TRAJECTORIES`] instead of `trajectories`.
    pub fast: bool,
    pub seed: u64,
    /// 0 lets the thread pool decide.
    pub workers: usize,
    pub model: Model,
    pub scheme: Scheme,
    /// Step size; model and scheme dependent default when absent.
    pub dt: Option<f64>,
    pub spontaneous: bool,
    pub cross_noise: bool,
    pub frozen_detuning: bool,
    pub field_init: FieldInit,
    /// `k_B T_in`; Doppler temperature `ħγ/2` when absent.
    pub kbt_in: Option<f64>,
    /// Steady runs last this many `1/Γ_cool`.
    pub horizon_rates: f64,
    pub window_fraction: f64,
    pub window_samples: usize,
}

pub const FAST_TRAJECTORIES: usize = 200;

impl Default for RunSection {
    fn default() -> Self {
        Self {
            trajectories: 5000,
            fast: false,
            seed: 1,
            workers: 0,
            model: Model::A,
            scheme: Scheme::Splitting,
            dt: None,
            spontaneous: false,
            cross_noise: false,
            frozen_detuning: false,
            field_init: FieldInit::default(),
            kbt_in: None,
            horizon_rates: 8.0,
            window_fraction: 0.2,
            window_samples: 200,
        }
    }
}

impl RunSection {
    pub fn n_trajectories(&self) -> usize {
        if self.fast {
            FAST_TRAJECTORIES
        } else {
            self.trajectories
        }
    }

    pub fn initial(&self, params: &Params) -> InitialCondition {
        match self.kbt_in {
            Some(kbt_in) => InitialCondition { kbt_in },
            None => InitialCondition::doppler(params),
        }
    }

    /// Integrator settings with `dt` resolved against `params`.
    pub fn integrator(&self, params: &Params, n_atoms: usize, n_steps: usize) -> IntegratorConfig {
        let dp_ref = self.initial(params).momentum_width(params);
        IntegratorConfig {
            dt: self.dt.unwrap_or_else(|| {
                crate::sde::default_dt(params, n_atoms, self.model, self.scheme, dp_ref)
            }),
            n_steps,
            seed: self.seed,
            scheme: self.scheme,
            model: self.model,
            spontaneous: self.spontaneous,
            cross_noise: self.cross_noise,
            frozen_detuning: self.frozen_detuning,
            field_init: self.field_init,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxSection {
    pub t_end_ms: f64,
    pub outputs: usize,
    pub snapshots_ms: Vec<f64>,
}

impl Default for RelaxSection {
    fn default() -> Self {
        Self {
            t_end_ms: 9.0,
            outputs: 18,
            snapshots_ms: vec![0.1, 1.0, 9.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `Δ_c / κ` values.
    pub detunings: Vec<f64>,
    /// `Ω / Ω_c`, re-evaluated at every detuning.
    pub pump_ratio: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            detunings: vec![-1.5, -1.25, -1.0, -0.8, -0.6, -0.45, -0.3],
            pump_ratio: 0.3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub configurations: usize,
    pub n_max: usize,
    /// Largest accepted relative deviation.
    pub bound: f64,
    pub seed: u64,
    /// Only configurations with `|α(x)|²` at most this value are compared.
    pub max_photons: f64,
    pub spontaneous: bool,
    /// Explicit configurations; random ones are drawn when empty.
    pub positions: Vec<Vec<f64>>,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            configurations: 32,
            n_max: 3,
            bound: 0.01,
            seed: 7,
            max_photons: 0.02,
            spontaneous: true,
            positions: Vec::new(),
        }
    }
}

/// Everything a run needs; echoed into the manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomConfig,
    pub cavity: CavityConfig,
    pub drive: DriveConfig,
    pub units: UnitsConfig,
    pub run: RunSection,
    pub relax: RelaxSection,
    pub sweep: SweepSection,
    pub oracle: OracleSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn n_atoms(&self) -> usize {
        self.atom.n
    }

    fn builder_at(&self, delta_c: f64) -> Result<crate::params::ParamsBuilder> {
        let mut b = Params::builder()
            .gamma(self.atom.linewidth)
            .delta_a(self.atom.detuning)
            .u2(self.atom.u2)
            .kappa(self.cavity.linewidth)
            .delta_c(delta_c);
        if let Some(w) = self.units.recoil {
            b = b.omega_r(w);
        }
        Ok(match (self.atom.vacuum_rabi, self.atom.collective_shift) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set only one of atom.vacuum_rabi and atom.collective_shift".into(),
                ))
            }
            (Some(g), None) => b.g(g),
            (None, Some(r)) => b.collective_shift(r, self.atom.n),
            (None, None) => b.collective_shift(0.05, self.atom.n),
        })
    }

    pub fn params(&self) -> Result<Params> {
        let b = self.builder_at(self.cavity.detuning)?;
        let b = match (self.drive.rabi, self.drive.over_threshold) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set only one of drive.rabi and drive.over_threshold".into(),
                ))
            }
            (Some(o), None) => b.pump(o),
            (None, Some(r)) => b.pump_over_threshold(r, self.atom.n),
            (None, None) => b.pump(21.0),
        };
        b.build()
    }

    /// Parameters at `Δ_c = ratio · κ` with `Ω = pump_ratio · Ω_c`. A configured
    /// collective shift `NU/Δ_c` is held fixed by re-solving for `g`.
    pub fn sweep_params(&self, ratio: f64) -> Result<Params> {
        if ratio >= 0.0 {
            return Err(Error::InvalidParameter(
                "sweep detunings must be negative".into(),
            ));
        }
        self.builder_at(ratio * self.cavity.linewidth)?
            .pump_over_threshold(self.sweep.pump_ratio, self.atom.n)
            .build()
    }

    pub fn units(&self) -> UnitSystem {
        UnitSystem::rb85()
    }

    pub fn validate(&self) -> Result<()> {
        if self.atom.n == 0 {
            return Err(Error::Config("atom.n must be positive".into()));
        }
        if self.run.n_trajectories() == 0 {
            return Err(Error::Config("run.trajectories must be positive".into()));
        }
        if !(self.run.window_fraction > 0.0 && self.run.window_fraction <= 1.0) {
            return Err(Error::Config(
                "run.window_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.run.cross_noise && self.run.model == Model::B {
            return Err(Error::Config("cross_noise applies to model A only".into()));
        }
        self.params().map(|_| ())
    }
}

/// Written next to every output set; enough to reproduce the run bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    pub config: RunConfig,
    pub params: Params,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, params: &Params) -> Self {
        Self {
            version: version_string(),
            command: command.to_string(),
            seed: config.run.seed,
            workers: config.run.workers,
            config: config.clone(),
            params: *params,
            outputs: Vec::new(),
        }
    }
}

/// `cavcool <version>`, with the source revision appended when the build set
/// `CAVCOOL_REVISION`.
pub fn version_string() -> String {
    match option_env!("CAVCOOL_REVISION") {
        Some(rev) => format!("cavcool {} ({rev})", env!("CARGO_PKG_VERSION")),
        None => format!("cavcool {}", env!("CARGO_PKG_VERSION")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_are_reference_parameters() {
        let c = RunConfig::default();
        assert_eq!(c.params().unwrap(), Params::reference());
        assert_eq!(RunConfig::from_toml("").unwrap(), c);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.run.model = Model::B;
        c.run.field_init = FieldInit::Sampled { re: 5.0, im: 0.0 };
        c.run.dt = Some(0.25);
        c.drive = DriveConfig {
            rabi: None,
            over_threshold: Some(0.3),
        };
        let text = c.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::from_toml("[atom]\nmass = 3\n").is_err());
    }

    #[test]
    fn rejects_conflicting_inputs() {
        let c = RunConfig::from_toml("[drive]\nrabi = 5.0\nover_threshold = 0.3\n").unwrap();
        assert!(c.params().is_err());
        let c =
            RunConfig::from_toml("[atom]\nvacuum_rabi = 1.0\ncollective_shift = 0.1\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml("[drive]\nover_threshold = 0.3\n").unwrap();
        let p = c.params().unwrap();
        assert!((p.omega / crate::field::threshold_pump(&p, 5).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn sweep_holds_collective_shift_and_threshold_ratio() {
        let c = RunConfig::default();
        for r in [-1.5, -0.3] {
            let p = c.sweep_params(r).unwrap();
            assert_relative_eq!(p.delta_c, r * 0.5, max_relative = 1e-15);
            assert_relative_eq!(5.0 * p.shift_u() / p.delta_c, 0.05, max_relative = 1e-12);
            let oc = crate::field::threshold_pump(&p, 5).unwrap();
            assert_relative_eq!(p.omega, 0.3 * oc, max_relative = 1e-12);
        }
        assert!(c.sweep_params(0.5).is_err());
    }

    #[test]
    fn fast_mode_uses_small_ensembles() {
        let mut c = RunConfig::default();
        c.run.fast = true;
        assert_eq!(c.run.n_trajectories(), FAST_TRAJECTORIES);
    }
}
