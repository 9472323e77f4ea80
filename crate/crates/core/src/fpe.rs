//! Low-field Fokker-Planck coefficients and the closed-form relaxation analytics.
//!
//! Conventions: the momentum drift is `Φ − γ p`, the momentum noise satisfies
//! `⟨dP dPᵀ⟩ = 2 D dt` and `⟨dP_j dX_ℓ⟩ = η_jℓ dt`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::params::Params;

/// Position-dependent cavity response entering every low-field coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityResponse {
    pub delta_eff: f64,
    /// `Δ_c′² + κ²`.
    pub lorentz: f64,
    pub sum_cos: f64,
}

impl CavityResponse {
    pub fn at(positions: &[f64], params: &Params, frozen_detuning: bool) -> Self {
        let (c, c2) = crate::field::cos_sums(positions);
        let delta_eff = if frozen_detuning {
            crate::field::shifted_detuning(params, positions.len())
        } else {
            params.delta_c - params.shift_u() * c2
        };
        Self {
            delta_eff,
            lorentz: delta_eff * delta_eff + params.kappa * params.kappa,
            sum_cos: c,
        }
    }

    /// `2 S² Δ′/(Δ′² + κ²)`: force on atom n is this times `sin_n Σ cos`.
    pub fn force_scale(&self, params: &Params) -> f64 {
        2.0 * params.pump_s().powi(2) * self.delta_eff / self.lorentz
    }

    /// `−8 ω_r S² Δ′κ/(Δ′² + κ²)²`: `γ_nℓ` is this times `sin_n sin_ℓ`.
    pub fn friction_scale(&self, params: &Params) -> f64 {
        -8.0 * params.omega_r * params.pump_s().powi(2) * self.delta_eff * params.kappa
            / (self.lorentz * self.lorentz)
    }

    /// `S² κ/(Δ′² + κ²)`: cavity part of `D_nℓ` is this times `sin_n sin_ℓ`.
    pub fn diffusion_scale(&self, params: &Params) -> f64 {
        params.pump_s().powi(2) * params.kappa / self.lorentz
    }

    /// `2 ω_r S² (κ² − Δ′²)/(Δ′² + κ²)²`.
    pub fn cross_scale(&self, params: &Params) -> f64 {
        let k2 = params.kappa * params.kappa;
        2.0 * params.omega_r * params.pump_s().powi(2) * (k2 - self.delta_eff * self.delta_eff)
            / (self.lorentz * self.lorentz)
    }
}

/// Diagonal spontaneous-emission diffusion `Γ s² ū²`.
pub fn spontaneous_diffusion(params: &Params) -> f64 {
    params.gamma_half_prime() * params.ratio_s().powi(2) * params.u2
}

fn sines(positions: &[f64]) -> DVector<f64> {
    DVector::from_iterator(positions.len(), positions.iter().map(|x| x.sin()))
}

pub fn drift_force(positions: &[f64], params: &Params) -> DVector<f64> {
    let r = CavityResponse::at(positions, params, false);
    sines(positions) * (r.force_scale(params) * r.sum_cos)
}

/// `γ` with the damping sign convention (momentum drift `−γ p`).
pub fn friction_matrix(positions: &[f64], params: &Params) -> DMatrix<f64> {
    let r = CavityResponse::at(positions, params, false);
    let v = sines(positions);
    &v * v.transpose() * r.friction_scale(params)
}

/// Momentum drift `−γ p` contributed by friction.
pub fn friction_term(positions: &[f64], momenta: &[f64], params: &Params) -> DVector<f64> {
    let r = CavityResponse::at(positions, params, false);
    let v = sines(positions);
    let proj: f64 = v.iter().zip(momenta).map(|(s, p)| s * p).sum();
    v * (-r.friction_scale(params) * proj)
}

pub fn diffusion_matrix(positions: &[f64], params: &Params, spontaneous: bool) -> DMatrix<f64> {
    let r = CavityResponse::at(positions, params, false);
    let v = sines(positions);
    let mut d = &v * v.transpose() * r.diffusion_scale(params);
    if spontaneous {
        let sp = spontaneous_diffusion(params);
        for i in 0..positions.len() {
            d[(i, i)] += sp;
        }
    }
    d
}

pub fn cross_matrix(positions: &[f64], params: &Params) -> DMatrix<f64> {
    let r = CavityResponse::at(positions, params, false);
    let v = sines(positions);
    &v * v.transpose() * r.cross_scale(params)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowFieldCoefficients {
    pub drift: DVector<f64>,
    pub friction: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub cross: DMatrix<f64>,
}

impl LowFieldCoefficients {
    pub fn at(positions: &[f64], params: &Params, spontaneous: bool) -> Self {
        Self {
            drift: drift_force(positions, params),
            friction: friction_matrix(positions, params),
            diffusion: diffusion_matrix(positions, params, spontaneous),
            cross: cross_matrix(positions, params),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct RelaxationAnalytics {
    /// Drift rate of `p` in the position-averaged equation.
    pub a: f64,
    pub b: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// `None` unless `A < 0`.
    pub dp_inf: Option<f64>,
    /// `k_B T` in units of `ħγ/2`.
    pub kbt: Option<f64>,
    pub gamma_cool: f64,
    pub dp_inf_spont: Option<f64>,
    /// Spontaneous-to-cavity diffusion ratio; `dp_inf_spont = dp_inf √(1 + r)`.
    pub spontaneous_ratio: f64,
}

pub fn relaxation_analytics(params: &Params, n_atoms: usize) -> RelaxationAnalytics {
    let n = n_atoms as f64;
    let dc = params.delta_c;
    let k = params.kappa;
    let l = dc * dc + k * k;
    let s2 = params.pump_s().powi(2);
    let corr = 0.5 * n * params.shift_u() / dc * (2.0 * n - 1.0) / (2.0 * n);
    let delta1 = 1.0 + (3.0 * dc * dc - k * k) / l * corr;
    let delta2 = 1.0 + 2.0 * dc * dc / l * corr;
    let a = 4.0 * params.omega_r * s2 * dc * k * delta1 / (l * l);
    let b = 0.5 * s2 * k * delta2 / l;
    let da = params.delta_a;
    let spontaneous_ratio =
        2.0 * params.u2 * (da * da + 0.25 * params.gamma * params.gamma) / (da * da) * l
            / (k * k * params.cooperativity() * delta2);
    let dp_inf = (a < 0.0).then(|| (-b / a).sqrt());
    RelaxationAnalytics {
        a,
        b,
        delta1,
        delta2,
        dp_inf,
        kbt: dp_inf.map(|w| params.inv_mass() * w * w),
        gamma_cool: -2.0 * a,
        dp_inf_spont: dp_inf.map(|w| w * (1.0 + spontaneous_ratio).sqrt()),
        spontaneous_ratio,
    }
}

impl RelaxationAnalytics {
    /// Same analytics with the asymptote replaced by the spontaneous-emission width.
    pub fn with_spontaneous(mut self) -> Self {
        self.dp_inf = self.dp_inf_spont;
        self
    }
}

/// `Δp(t) = {Δp(0)² e^{2At} + (1 − e^{2At}) Δp_∞²}^{1/2}`.
///
/// For `A ≥ 0` there is no asymptote; the variance is continued as
/// `Δp(0)² e^{2At} + B (e^{2At} − 1)/A`, which reduces to free diffusion at `A = 0`.
pub fn width_evolution(dp0: f64, t: f64, analytics: &RelaxationAnalytics) -> f64 {
    let e = (2.0 * analytics.a * t).exp();
    match analytics.dp_inf {
        Some(w) => (dp0 * dp0 * e + (1.0 - e) * w * w).sqrt(),
        None if analytics.a == 0.0 => (dp0 * dp0 + 2.0 * analytics.b * t).sqrt(),
        None => (dp0 * dp0 * e + analytics.b * (e - 1.0) / analytics.a).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn rank_one_residual(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
        let vv = v.dot(v);
        if vv == 0.0 {
            return m.amax();
        }
        let c = v.dot(&(m * v)) / (vv * vv);
        (m - v * v.transpose() * c).amax() / m.amax().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn antinodes_feel_no_force() {
        let p = Params::reference();
        let f = drift_force(&[0.0, PI, 2.0 * PI], &p);
        assert!(f.amax() < 1e-15);
    }

    #[test]
    fn red_detuning_pulls_to_antinode() {
        let p = Params::reference();
        let f = drift_force(&[FRAC_PI_4], &p);
        assert!(f[0] < 0.0);
    }

    #[test]
    fn zero_momentum_no_friction() {
        let p = Params::reference();
        assert_eq!(friction_term(&[0.3, 1.0], &[0.0, 0.0], &p).amax(), 0.0);
    }

    #[test]
    fn red_detuning_damps() {
        let p = Params::reference();
        let g = friction_matrix(&[0.7, 2.0, 4.0], &p);
        for i in 0..3 {
            assert!(g[(i, i)] > 0.0);
        }
    }

    #[test]
    fn diffusion_vanishes_at_antinodes_without_spontaneous() {
        let p = Params::reference();
        let x = [0.0, PI];
        assert!(diffusion_matrix(&x, &p, false).amax() < 1e-30);
        let d = diffusion_matrix(&x, &p, true);
        assert_relative_eq!(d[(0, 0)], spontaneous_diffusion(&p), max_relative = 1e-15);
        assert_eq!(d[(0, 1)], 0.0);
    }

    #[test]
    fn coincident_atoms_have_equal_diffusion_entries() {
        let p = Params::reference();
        let d = diffusion_matrix(&[0.9, 0.9], &p, false);
        assert_eq!(d[(0, 0)], d[(1, 1)]);
        assert_eq!(d[(0, 0)], d[(0, 1)]);
        assert!(d.determinant().abs() < 1e-20 * d.amax());
    }

    #[test]
    fn diffusion_spectrum_is_rank_one_plus_diagonal() {
        let p = Params::reference();
        let x = [0.2, 1.4, 2.9, 4.1, 5.5];
        let d = diffusion_matrix(&x, &p, true);
        let mut ev: Vec<f64> = d.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let sp = spontaneous_diffusion(&p);
        let r = CavityResponse::at(&x, &p, false);
        let s2: f64 = x.iter().map(|v| v.sin().powi(2)).sum();
        for e in &ev[..4] {
            assert_relative_eq!(*e, sp, max_relative = 1e-8);
        }
        assert_relative_eq!(ev[4], sp + r.diffusion_scale(&p) * s2, max_relative = 1e-12);
    }

    #[test]
    fn cross_vanishes_at_minus_kappa() {
        let p = Params::reference();
        // choose x with Σcos² = 0 so Δ′ = Δ_c = −κ
        let x = [PI / 2.0, -PI / 2.0];
        assert_eq!(cross_matrix(&x, &p).amax(), 0.0);
        let q = p.with_delta_c(0.0).unwrap();
        let e = cross_matrix(&x, &q);
        let want = 2.0 * q.omega_r * q.pump_s().powi(2) / q.kappa.powi(2);
        assert_relative_eq!(e[(0, 0)], want, max_relative = 1e-14);
        assert_relative_eq!(e[(0, 1)], -want, max_relative = 1e-14);
    }

    #[test]
    fn minus_kappa_analytics() {
        // U → 0 gives δ₁ = δ₂ = 1, k_B T = κ/2 and Γ_cool = 2 ω_r (S/κ)².
        let p = Params::builder()
            .collective_shift(1e-12, 5)
            .build()
            .unwrap();
        let a = relaxation_analytics(&p, 5);
        assert_relative_eq!(a.delta1, 1.0, epsilon = 1e-11);
        assert_relative_eq!(a.delta2, 1.0, epsilon = 1e-11);
        assert_relative_eq!(a.kbt.unwrap(), 0.5 * p.kappa, max_relative = 1e-10);
        assert_relative_eq!(
            a.gamma_cool,
            2.0 * p.omega_r * (p.pump_s() / p.kappa).powi(2),
            max_relative = 1e-10
        );
    }

    #[test]
    fn reference_analytics() {
        let p = Params::reference();
        let a = relaxation_analytics(&p, 5);
        // δ₁ = δ₂ = 1 + (NU/2Δ_c)(2N−1)/2N at Δ_c = −κ
        assert_relative_eq!(a.delta1, 1.0 + 0.025 * 0.9, max_relative = 1e-12);
        assert_relative_eq!(a.delta2, a.delta1, max_relative = 1e-12);
        let dp = a.dp_inf.unwrap();
        assert_relative_eq!(dp, (-a.b / a.a).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(a.gamma_cool, -2.0 * a.a, max_relative = 1e-15);
        assert_relative_eq!(
            a.kbt.unwrap(),
            (p.delta_c.powi(2) + p.kappa.powi(2)) / (-4.0 * p.delta_c) * a.delta2 / a.delta1,
            max_relative = 1e-12
        );
        assert!(dp > 5.0 && dp < 20.0, "{dp}");
        let broadening = a.dp_inf_spont.unwrap() / dp - 1.0;
        assert!((broadening - 0.15).abs() < 0.02, "{broadening}");
    }

    #[test]
    fn no_steady_state_for_blue_detuning() {
        let p = Params::reference().with_delta_c(0.5).unwrap();
        let a = relaxation_analytics(&p, 5);
        assert!(a.a > 0.0);
        assert!(a.dp_inf.is_none() && a.kbt.is_none() && a.dp_inf_spont.is_none());
    }

    #[test]
    fn width_evolution_limits() {
        let p = Params::reference();
        let a = relaxation_analytics(&p, 5);
        let w = a.dp_inf.unwrap();
        let dp0 = 20.0;
        assert_relative_eq!(width_evolution(dp0, 0.0, &a), dp0, max_relative = 1e-15);
        assert_relative_eq!(width_evolution(dp0, 1e9, &a), w, max_relative = 1e-12);
        let half = 2f64.ln() / (-2.0 * a.a);
        assert_relative_eq!(
            width_evolution(dp0, half, &a),
            ((dp0 * dp0 + w * w) / 2.0).sqrt(),
            max_relative = 1e-12
        );
        let mut prev = dp0;
        for i in 1..50 {
            let v = width_evolution(dp0, i as f64 * 5e3, &a);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn position_average_reproduces_a_and_b() {
        let p = Params::reference();
        let an = relaxation_analytics(&p, 5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples = 1_000_000;
        let (mut gsum, mut dsum) = (0.0, 0.0);
        let mut x = [0.0; 5];
        for _ in 0..samples {
            for v in x.iter_mut() {
                *v = rng.gen::<f64>() * 2.0 * PI;
            }
            let r = CavityResponse::at(&x, &p, false);
            let s0 = x[0].sin().powi(2);
            gsum += r.friction_scale(&p) * s0;
            dsum += r.diffusion_scale(&p) * s0;
        }
        let g = gsum / samples as f64;
        let d = dsum / samples as f64;
        assert!((g / -an.a - 1.0).abs() < 0.01, "{g} vs {}", -an.a);
        assert!((d / an.b - 1.0).abs() < 0.01, "{d} vs {}", an.b);
    }

    proptest! {
        #[test]
        fn coefficients_factor_through_sines(x in proptest::collection::vec(-10.0f64..10.0, 1..7)) {
            let p = Params::reference();
            let c = LowFieldCoefficients::at(&x, &p, false);
            let v = sines(&x);
            if v.amax() > 1e-3 {
                prop_assert!(rank_one_residual(&c.friction, &v) < 1e-12);
                prop_assert!(rank_one_residual(&c.diffusion, &v) < 1e-12);
                prop_assert!(rank_one_residual(&c.cross, &v) < 1e-12);
            }
            prop_assert!((&c.diffusion - c.diffusion.transpose()).amax() == 0.0);
        }

        #[test]
        fn coefficients_periodic_and_permutation_covariant(
            x in proptest::collection::vec(-10.0f64..10.0, 2..7),
            m in -2i32..3,
            spont in any::<bool>(),
        ) {
            let p = Params::reference();
            let n = x.len();
            let c = LowFieldCoefficients::at(&x, &p, spont);
            let shifted: Vec<f64> = x.iter().map(|v| v + 2.0 * PI * f64::from(m)).collect();
            let cs = LowFieldCoefficients::at(&shifted, &p, spont);
            let tol = 1e-9;
            prop_assert!((&c.drift - &cs.drift).amax() <= tol * c.drift.amax().max(1e-30));
            prop_assert!((&c.diffusion - &cs.diffusion).amax() <= tol * c.diffusion.amax().max(1e-30));
            prop_assert!((&c.friction - &cs.friction).amax() <= tol * c.friction.amax().max(1e-30));

            let perm: Vec<usize> = (0..n).rev().collect();
            let xp: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
            let cp = LowFieldCoefficients::at(&xp, &p, spont);
            for a in 0..n {
                prop_assert!((cp.drift[a] - c.drift[perm[a]]).abs() <= 1e-12 * c.drift.amax().max(1e-30));
                for b in 0..n {
                    prop_assert!((cp.diffusion[(a, b)] - c.diffusion[(perm[a], perm[b])]).abs() <= 1e-12 * c.diffusion.amax().max(1e-30));
                    prop_assert!((cp.cross[(a, b)] - c.cross[(perm[a], perm[b])]).abs() <= 1e-12 * c.cross.amax().max(1e-30));
                }
            }
        }

        #[test]
        fn doubling_drive_quadruples(x in proptest::collection::vec(-10.0f64..10.0, 1..6)) {
            let p = Params::reference();
            let q = p.with_pump(2.0 * p.omega).unwrap();
            let mom: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
            let f1 = drift_force(&x, &p);
            let f2 = drift_force(&x, &q);
            let g1 = friction_term(&x, &mom, &p);
            let g2 = friction_term(&x, &mom, &q);
            prop_assert!((f2 - f1 * 4.0).amax() <= 1e-12 * (1e-30 + drift_force(&x, &q).amax()));
            prop_assert!((g2 - g1 * 4.0).amax() <= 1e-12 * (1e-30 + friction_term(&x, &mom, &q).amax()));
        }
    }
}
