//! Physical constants, dispersive couplings and the internal unit system.
//!
//! Everything the simulation touches is dimensionless: frequencies in units of
//! `γ/2` of the atom, momenta in `ħk`, positions in `1/k`, time in `2/γ` and
//! energies in `ħγ/2`. In these units `ħ = k = 1` and `1/m = 2 ω_r`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SI constants (CODATA 2018).
pub mod si {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    pub const AMU: f64 = 1.660_539_066_60e-27;
    pub const RB85_MASS_AMU: f64 = 84.911_789_738;
    /// D2 line wavelength used for the cavity mode.
    pub const RB85_D2_WAVELENGTH: f64 = 780e-9;
    /// `γ/2` of the Rb D2 line, cyclic frequency.
    pub const RB85_D2_HALF_LINEWIDTH_HZ: f64 = 3e6;
}

/// Atomic transition and drive. Frequencies are angular (rad/s), mass in kg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub mass: f64,
    /// Full linewidth `γ`.
    pub linewidth: f64,
    /// `Δ_a = ω_L − ω_a`.
    pub detuning: f64,
    /// Vacuum Rabi frequency `g`.
    pub vacuum_rabi: f64,
    /// Transverse pump Rabi frequency `Ω`.
    pub pump_rabi: f64,
    /// Second moment of the dipole emission pattern along the cavity axis.
    pub u2: f64,
}

/// Cavity mode. Frequencies angular (rad/s), wavenumber in 1/m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    /// Field decay rate `κ`.
    pub linewidth: f64,
    /// `Δ_c = ω_L − ω_c`.
    pub detuning: f64,
    pub wavenumber: f64,
}

impl AtomSpec {
    pub fn validate(&self) -> Result<()> {
        check(self.mass > 0.0, "atom mass must be positive")?;
        check(self.linewidth > 0.0, "atomic linewidth must be positive")?;
        check(
            self.vacuum_rabi > 0.0,
            "vacuum Rabi frequency must be positive",
        )?;
        check(
            self.pump_rabi >= 0.0,
            "pump Rabi frequency must be non-negative",
        )?;
        check(
            self.u2 > 0.0 && self.u2 <= 1.0,
            "dipole-pattern second moment must lie in (0, 1]",
        )?;
        check(self.detuning.is_finite(), "atomic detuning must be finite")
    }
}

impl CavitySpec {
    pub fn validate(&self) -> Result<()> {
        check(self.linewidth > 0.0, "cavity linewidth must be positive")?;
        check(self.wavenumber > 0.0, "wavenumber must be positive")?;
        check(self.detuning.is_finite(), "cavity detuning must be finite")
    }
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.to_string()))
    }
}

/// Couplings obtained after eliminating the excited state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedCouplings {
    /// Per-atom cavity frequency shift `U`.
    pub shift_u: f64,
    /// Coherent scattering amplitude `S`.
    pub pump_s: f64,
    /// Incoherent scattering rate `γ′`.
    pub gamma_prime: f64,
    /// `s = Ω/g`.
    pub ratio_s: f64,
    /// Recoil frequency `ω_r = ħk²/2m`.
    pub recoil: f64,
    /// `C = g²/(κγ/2)`.
    pub cooperativity: f64,
}

/// `U`, `S`, `γ′`, `s`, `C` in whatever (consistent) frequency unit the inputs use.
fn dispersive(gamma: f64, delta_a: f64, g: f64, omega: f64, kappa: f64) -> [f64; 5] {
    let denom = delta_a * delta_a + 0.25 * gamma * gamma;
    [
        delta_a * g * g / denom,
        delta_a * g * omega / denom,
        gamma * g * g / denom,
        omega / g,
        g * g / (kappa * 0.5 * gamma),
    ]
}

pub fn derive_couplings(atom: &AtomSpec, cavity: &CavitySpec) -> Result<DerivedCouplings> {
    atom.validate()?;
    cavity.validate()?;
    if atom.detuning == 0.0 {
        return Err(Error::ZeroAtomDetuning);
    }
    let [u, s, gp, ratio, coop] = dispersive(
        atom.linewidth,
        atom.detuning,
        atom.vacuum_rabi,
        atom.pump_rabi,
        cavity.linewidth,
    );
    Ok(DerivedCouplings {
        shift_u: u,
        pump_s: s,
        gamma_prime: gp,
        ratio_s: ratio,
        recoil: si::HBAR * cavity.wavenumber * cavity.wavenumber / (2.0 * atom.mass),
        cooperativity: coop,
    })
}

/// Scales used to nondimensionalize. All fields are SI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// `γ/2` in rad/s.
    pub frequency: f64,
    /// `ħk` in kg m/s.
    pub momentum: f64,
    /// `1/k` in m.
    pub length: f64,
    /// `2/γ` in s.
    pub time: f64,
}

impl UnitSystem {
    pub fn new(linewidth: f64, wavenumber: f64) -> Self {
        let half = 0.5 * linewidth;
        Self {
            frequency: half,
            momentum: si::HBAR * wavenumber,
            length: 1.0 / wavenumber,
            time: 1.0 / half,
        }
    }

    /// Reference Rb-85 D2 line at 780 nm.
    pub fn rb85() -> Self {
        let half = 2.0 * std::f64::consts::PI * si::RB85_D2_HALF_LINEWIDTH_HZ;
        Self::new(
            2.0 * half,
            2.0 * std::f64::consts::PI / si::RB85_D2_WAVELENGTH,
        )
    }

    /// `ħγ/2` in J.
    pub fn energy(&self) -> f64 {
        si::HBAR * self.frequency
    }

    pub fn time_to_ms(&self, t: f64) -> f64 {
        t * self.time * 1e3
    }

    pub fn ms_to_time(&self, ms: f64) -> f64 {
        ms * 1e-3 / self.time
    }

    /// Temperature in kelvin for a dimensionless `k_B T`.
    pub fn kelvin(&self, kbt: f64) -> f64 {
        kbt * self.energy() / si::BOLTZMANN
    }
}

/// Dimensionless parameter set for identical atoms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub gamma: f64,
    pub delta_a: f64,
    pub g: f64,
    pub omega: f64,
    pub u2: f64,
    pub kappa: f64,
    pub delta_c: f64,
    pub omega_r: f64,
    pub couplings: DerivedCouplings,
}

impl Params {
    pub fn from_specs(atom: &AtomSpec, cavity: &CavitySpec) -> Result<(Self, UnitSystem)> {
        let c = derive_couplings(atom, cavity)?;
        let units = UnitSystem::new(atom.linewidth, cavity.wavenumber);
        let f = units.frequency;
        let params = Self::assemble(
            atom.linewidth / f,
            atom.detuning / f,
            atom.vacuum_rabi / f,
            atom.pump_rabi / f,
            atom.u2,
            cavity.linewidth / f,
            cavity.detuning / f,
            c.recoil / f,
        )?;
        Ok((params, units))
    }

    pub fn to_specs(&self, units: &UnitSystem) -> (AtomSpec, CavitySpec) {
        let f = units.frequency;
        let k = 1.0 / units.length;
        let recoil = self.omega_r * f;
        (
            AtomSpec {
                mass: si::HBAR * k * k / (2.0 * recoil),
                linewidth: self.gamma * f,
                detuning: self.delta_a * f,
                vacuum_rabi: self.g * f,
                pump_rabi: self.omega * f,
                u2: self.u2,
            },
            CavitySpec {
                linewidth: self.kappa * f,
                detuning: self.delta_c * f,
                wavenumber: k,
            },
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        gamma: f64,
        delta_a: f64,
        g: f64,
        omega: f64,
        u2: f64,
        kappa: f64,
        delta_c: f64,
        omega_r: f64,
    ) -> Result<Self> {
        check(gamma > 0.0, "atomic linewidth must be positive")?;
        check(g > 0.0, "vacuum Rabi frequency must be positive")?;
        check(omega >= 0.0, "pump Rabi frequency must be non-negative")?;
        check(kappa > 0.0, "cavity linewidth must be positive")?;
        check(omega_r > 0.0, "recoil frequency must be positive")?;
        check(
            u2 > 0.0 && u2 <= 1.0,
            "dipole-pattern second moment must lie in (0, 1]",
        )?;
        if delta_a == 0.0 {
            return Err(Error::ZeroAtomDetuning);
        }
        let [u, s, gp, ratio, coop] = dispersive(gamma, delta_a, g, omega, kappa);
        Ok(Self {
            gamma,
            delta_a,
            g,
            omega,
            u2,
            kappa,
            delta_c,
            omega_r,
            couplings: DerivedCouplings {
                shift_u: u,
                pump_s: s,
                gamma_prime: gp,
                ratio_s: ratio,
                recoil: omega_r,
                cooperativity: coop,
            },
        })
    }

    pub fn builder() -> ParamsBuilder {
        ParamsBuilder::default()
    }

    /// Rb-85 setup with `κ = 0.5`, `Δ_a = −500`, `Δ_c = −κ`, `NU/Δ_c = 0.05`
    /// for five atoms and `Ω = 21`.
    pub fn reference() -> Self {
        Self::builder()
            .build()
            .expect("reference parameters are valid")
    }

    #[inline]
    pub fn shift_u(&self) -> f64 {
        self.couplings.shift_u
    }

    #[inline]
    pub fn pump_s(&self) -> f64 {
        self.couplings.pump_s
    }

    #[inline]
    pub fn gamma_prime(&self) -> f64 {
        self.couplings.gamma_prime
    }

    /// `Γ = γ′/2`.
    #[inline]
    pub fn gamma_half_prime(&self) -> f64 {
        0.5 * self.couplings.gamma_prime
    }

    #[inline]
    pub fn ratio_s(&self) -> f64 {
        self.couplings.ratio_s
    }

    #[inline]
    pub fn cooperativity(&self) -> f64 {
        self.couplings.cooperativity
    }

    /// `1/m` in internal units.
    #[inline]
    pub fn inv_mass(&self) -> f64 {
        2.0 * self.omega_r
    }

    pub fn with_delta_c(&self, delta_c: f64) -> Result<Self> {
        self.rebuild(|p| p.delta_c = delta_c)
    }

    pub fn with_pump(&self, omega: f64) -> Result<Self> {
        self.rebuild(|p| p.omega = omega)
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        self.rebuild(|p| p.g = g)
    }

    pub fn with_u2(&self, u2: f64) -> Result<Self> {
        self.rebuild(|p| p.u2 = u2)
    }

    fn rebuild(&self, f: impl FnOnce(&mut Self)) -> Result<Self> {
        let mut p = *self;
        f(&mut p);
        Self::assemble(
            p.gamma, p.delta_a, p.g, p.omega, p.u2, p.kappa, p.delta_c, p.omega_r,
        )
    }
}

/// Vacuum Rabi frequency that produces a given collective shift `N U / Δ_c`.
pub fn g_from_collective_shift(
    ratio: f64,
    n_atoms: usize,
    delta_c: f64,
    delta_a: f64,
    gamma: f64,
) -> Result<f64> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter("need at least one atom".into()));
    }
    if delta_a == 0.0 {
        return Err(Error::ZeroAtomDetuning);
    }
    let u = ratio * delta_c / n_atoms as f64;
    let g2 = u * (delta_a * delta_a + 0.25 * gamma * gamma) / delta_a;
    if !(g2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "collective shift N U / Delta_c = {ratio} needs sign(U) = sign(Delta_a)"
        )));
    }
    Ok(g2.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CouplingInput {
    VacuumRabi(f64),
    /// `N U / Δ_c` for `n` atoms.
    CollectiveShift {
        ratio: f64,
        n_atoms: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PumpInput {
    Rabi(f64),
    /// `Ω / Ω_c` for `n` atoms.
    OverThreshold {
        ratio: f64,
        n_atoms: usize,
    },
}

/// Dimensionless parameter builder. Defaults reproduce [`Params::reference`].
#[derive(Clone, Copy, Debug)]
pub struct ParamsBuilder {
    pub gamma: f64,
    pub delta_a: f64,
    pub coupling: CouplingInput,
    pub pump: PumpInput,
    pub u2: f64,
    pub kappa: f64,
    pub delta_c: f64,
    pub omega_r: f64,
}

impl Default for ParamsBuilder {
    fn default() -> Self {
        let units = UnitSystem::rb85();
        let mass = si::RB85_MASS_AMU * si::AMU;
        let k = 1.0 / units.length;
        Self {
            gamma: 2.0,
            delta_a: -500.0,
            coupling: CouplingInput::CollectiveShift {
                ratio: 0.05,
                n_atoms: 5,
            },
            pump: PumpInput::Rabi(21.0),
            u2: 0.4,
            kappa: 0.5,
            delta_c: -0.5,
            omega_r: si::HBAR * k * k / (2.0 * mass) / units.frequency,
        }
    }
}

impl ParamsBuilder {
    pub fn gamma(mut self, v: f64) -> Self {
        self.gamma = v;
        self
    }
    pub fn delta_a(mut self, v: f64) -> Self {
        self.delta_a = v;
        self
    }
    pub fn g(mut self, v: f64) -> Self {
        self.coupling = CouplingInput::VacuumRabi(v);
        self
    }
    pub fn collective_shift(mut self, ratio: f64, n_atoms: usize) -> Self {
        self.coupling = CouplingInput::CollectiveShift { ratio, n_atoms };
        self
    }
    pub fn pump(mut self, omega: f64) -> Self {
        self.pump = PumpInput::Rabi(omega);
        self
    }
    pub fn pump_over_threshold(mut self, ratio: f64, n_atoms: usize) -> Self {
        self.pump = PumpInput::OverThreshold { ratio, n_atoms };
        self
    }
    pub fn u2(mut self, v: f64) -> Self {
        self.u2 = v;
        self
    }
    pub fn kappa(mut self, v: f64) -> Self {
        self.kappa = v;
        self
    }
    pub fn delta_c(mut self, v: f64) -> Self {
        self.delta_c = v;
        self
    }
    pub fn omega_r(mut self, v: f64) -> Self {
        self.omega_r = v;
        self
    }

    pub fn build(&self) -> Result<Params> {
        let g = match self.coupling {
            CouplingInput::VacuumRabi(g) => g,
            CouplingInput::CollectiveShift { ratio, n_atoms } => {
                g_from_collective_shift(ratio, n_atoms, self.delta_c, self.delta_a, self.gamma)?
            }
        };
        let base = Params::assemble(
            self.gamma,
            self.delta_a,
            g,
            0.0,
            self.u2,
            self.kappa,
            self.delta_c,
            self.omega_r,
        )?;
        let omega = match self.pump {
            PumpInput::Rabi(o) => o,
            PumpInput::OverThreshold { ratio, n_atoms } => {
                ratio * crate::field::threshold_pump(&base, n_atoms)?
            }
        };
        base.with_pump(omega)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: &'static str,
    pub ratio: f64,
    pub limit: f64,
    pub verdict: Verdict,
}

impl Diagnostic {
    fn new(name: &'static str, ratio: f64, limit: f64) -> Self {
        let verdict = if ratio < limit {
            Verdict::Pass
        } else {
            Verdict::Warn
        };
        Self {
            name,
            ratio,
            limit,
            verdict,
        }
    }
}

/// Ratio above which a "much smaller than" condition is reported as a warning.
pub const REGIME_LIMIT: f64 = 0.2;
/// The spontaneous/cavity diffusion ratio enters the width as `sqrt(1 + r)`;
/// it is flagged once it would broaden the width by more than ~22%.
pub const SPONTANEOUS_RATIO_LIMIT: f64 = 0.5;

/// Checks the semiclassical and low-field assumptions for a momentum width
/// `dp` (in `ħk`) and `n_atoms` atoms. Never fails; every check carries its ratio.
pub fn validate_regime(params: &Params, dp: f64, n_atoms: usize) -> Vec<Diagnostic> {
    let n = n_atoms as f64;
    let u = params.shift_u();
    let s = params.pump_s();
    let kappa = params.kappa;
    let dc = params.delta_c;

    let pump_ratio = if s == 0.0 {
        0.0
    } else if u == 0.0 {
        f64::INFINITY
    } else {
        n.sqrt() * s.abs() / (kappa * (kappa / u.abs()).sqrt())
    };
    let spont =
        2.0 * params.u2 / params.cooperativity() * (dc * dc + kappa * kappa) / (kappa * kappa);
    let ratio_s = params.ratio_s();

    vec![
        Diagnostic::new("recoil_over_width", 1.0 / dp, REGIME_LIMIT),
        Diagnostic::new(
            "doppler_over_cavity_rate",
            params.inv_mass() * dp / kappa.hypot(dc),
            REGIME_LIMIT,
        ),
        Diagnostic::new("pump_over_localization", pump_ratio, REGIME_LIMIT),
        Diagnostic::new(
            "spontaneous_over_cavity_diffusion",
            spont,
            SPONTANEOUS_RATIO_LIMIT,
        ),
        Diagnostic::new(
            "collective_shift_over_detuning",
            n * u.abs() / dc.abs(),
            REGIME_LIMIT,
        ),
        Diagnostic::new(
            "linewidth_over_atomic_detuning",
            0.5 * params.gamma / params.delta_a.abs(),
            REGIME_LIMIT,
        ),
        // s = Ω/g ≳ 1 is needed for the low-field coefficients; report 1/s.
        Diagnostic::new(
            "inverse_pump_ratio",
            if ratio_s > 0.0 {
                1.0 / ratio_s
            } else {
                f64::INFINITY
            },
            1.0 + 1e-12,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rb85_specs() -> (AtomSpec, CavitySpec) {
        let units = UnitSystem::rb85();
        let p = Params::reference();
        p.to_specs(&units)
    }

    #[test]
    fn small_linewidth_limit_of_shift() {
        let atom = AtomSpec {
            mass: 1e-25,
            linewidth: 1e-9,
            detuning: 3.0,
            vacuum_rabi: 3.0,
            pump_rabi: 0.0,
            u2: 0.4,
        };
        let cav = CavitySpec {
            linewidth: 1.0,
            detuning: -1.0,
            wavenumber: 1e7,
        };
        let c = derive_couplings(&atom, &cav).unwrap();
        assert_relative_eq!(c.shift_u, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn far_detuned_shift() {
        let p = Params::builder()
            .delta_a(-1000.0)
            .g(1.0)
            .pump(0.0)
            .build()
            .unwrap();
        assert_relative_eq!(p.shift_u(), -1000.0 / (1e6 + 1.0), max_relative = 1e-14);
        assert_eq!(p.pump_s(), 0.0);
    }

    #[test]
    fn zero_atomic_detuning_rejected() {
        let (mut atom, cav) = rb85_specs();
        atom.detuning = 0.0;
        assert!(matches!(
            derive_couplings(&atom, &cav),
            Err(Error::ZeroAtomDetuning)
        ));
    }

    #[test]
    fn reference_setup_numbers() {
        let p = Params::reference();
        // N U / Δ_c = 0.05 with five atoms.
        assert_relative_eq!(5.0 * p.shift_u() / p.delta_c, 0.05, max_relative = 1e-12);
        // ω_r of Rb-85 at 780 nm is 2π × 3.86 kHz.
        let units = UnitSystem::rb85();
        let wr_hz = p.omega_r * units.frequency / (2.0 * std::f64::consts::PI);
        assert!((wr_hz - 3.86e3).abs() < 0.01e3, "{wr_hz}");
        assert!(p.gamma_prime() / p.gamma < 1.0);
        assert_relative_eq!(
            p.gamma_prime() / p.gamma,
            p.g * p.g / (p.delta_a * p.delta_a + 1.0),
            max_relative = 1e-14
        );
    }

    #[test]
    fn shift_and_pump_share_denominator() {
        let p = Params::reference();
        assert_relative_eq!(
            p.shift_u() / p.pump_s(),
            p.g / p.omega,
            max_relative = 1e-15
        );
        assert_relative_eq!(p.pump_s(), p.ratio_s() * p.shift_u(), max_relative = 1e-15);
    }

    #[test]
    fn regime_checks() {
        let p = Params::reference();
        let dp_doppler = (1.0 / p.inv_mass()).sqrt();
        let diags = validate_regime(&p, dp_doppler, 5);
        assert!(
            diags.iter().all(|d| d.verdict == Verdict::Pass),
            "{diags:?}"
        );

        let at_recoil = validate_regime(&p, 1.0, 5);
        assert_eq!(at_recoil[0].ratio, 1.0);
        assert_eq!(at_recoil[0].verdict, Verdict::Warn);

        let undriven = p.with_pump(0.0).unwrap();
        let d = validate_regime(&undriven, dp_doppler, 5);
        assert_eq!(d[2].ratio, 0.0);
        assert_eq!(d[2].verdict, Verdict::Pass);
    }

    #[test]
    fn collective_shift_sign_mismatch() {
        assert!(g_from_collective_shift(0.05, 5, 0.5, -500.0, 2.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn couplings_are_homogeneous(
            scale in 0.01f64..100.0,
            da in -1e3f64..-1.0,
            g in 0.1f64..10.0,
            om in 0.0f64..50.0,
        ) {
            let atom = AtomSpec { mass: 1e-25, linewidth: 2.0, detuning: da, vacuum_rabi: g, pump_rabi: om, u2: 0.4 };
            let cav = CavitySpec { linewidth: 0.5, detuning: -0.5, wavenumber: 8e6 };
            let scaled = AtomSpec {
                linewidth: 2.0 * scale, detuning: da * scale, vacuum_rabi: g * scale, pump_rabi: om * scale, ..atom
            };
            let a = derive_couplings(&atom, &cav).unwrap();
            let b = derive_couplings(&scaled, &cav).unwrap();
            proptest::prop_assert!((b.shift_u - scale * a.shift_u).abs() <= 1e-12 * (scale * a.shift_u).abs());
            proptest::prop_assert!((b.pump_s - scale * a.pump_s).abs() <= 1e-12 * (scale * a.pump_s).abs().max(1e-300));
            proptest::prop_assert!((b.gamma_prime - scale * a.gamma_prime).abs() <= 1e-12 * scale * a.gamma_prime);
            proptest::prop_assert!((b.ratio_s - a.ratio_s).abs() <= 1e-12 * a.ratio_s.max(1e-300));
        }

        #[test]
        fn unit_round_trip(
            da in -2e3f64..-10.0,
            g in 0.5f64..5.0,
            om in 0.0f64..40.0,
            kappa in 0.05f64..5.0,
            dc in -5.0f64..5.0,
            u2 in 0.05f64..1.0,
        ) {
            let units = UnitSystem::rb85();
            let f = units.frequency;
            let atom = AtomSpec {
                mass: si::RB85_MASS_AMU * si::AMU,
                linewidth: 2.0 * f,
                detuning: da * f,
                vacuum_rabi: g * f,
                pump_rabi: om * f,
                u2,
            };
            let cav = CavitySpec { linewidth: kappa * f, detuning: dc * f, wavenumber: 1.0 / units.length };
            let (p, u) = Params::from_specs(&atom, &cav).unwrap();
            let (a2, c2) = p.to_specs(&u);
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
            proptest::prop_assert!(close(atom.mass, a2.mass));
            proptest::prop_assert!(close(atom.linewidth, a2.linewidth));
            proptest::prop_assert!(close(atom.detuning, a2.detuning));
            proptest::prop_assert!(close(atom.vacuum_rabi, a2.vacuum_rabi));
            proptest::prop_assert!(close(atom.pump_rabi, a2.pump_rabi));
            proptest::prop_assert!(close(cav.linewidth, c2.linewidth));
            proptest::prop_assert!(close(cav.detuning, c2.detuning));
            proptest::prop_assert!(close(cav.wavenumber, c2.wavenumber));
        }
    }
}
