//! Itô integration of the two trajectory models.
//!
//! Model A evolves `(x, p)` with the cavity eliminated. Model B keeps the
//! cavity amplitude `α` as a classical variable with vacuum-level noise.
//!
//! Two schemes are available. `EulerMaruyama` is the plain explicit step.
//! `Splitting` drifts positions by half a step, applies the momentum impulse
//! with coefficients frozen at the midpoint positions, then drifts again. In
//! model B the impulse integrates the field exactly over the step as an
//! Ornstein-Uhlenbeck process (atoms frozen at the midpoint), jointly with the
//! time integral of `α` that enters the force.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::factorize_diffusion;
use crate::params::Params;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    Splitting,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    A,
    B,
}

/// Initial cavity amplitude for model B.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldInit {
    /// Deterministic `α(0)`.
    Fixed { re: f64, im: f64 },
    /// Coherent-state Wigner sampling: variance 1/4 per quadrature.
    Sampled { re: f64, im: f64 },
}

impl Default for FieldInit {
    fn default() -> Self {
        FieldInit::Fixed { re: 5.0, im: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub model: Model,
    pub spontaneous: bool,
    pub cross_noise: bool,
    pub frozen_detuning: bool,
    pub field_init: FieldInit,
}

impl IntegratorConfig {
    pub fn new(model: Model, dt: f64, n_steps: usize, seed: u64) -> Self {
        Self {
            dt,
            n_steps,
            seed,
            scheme: Scheme::Splitting,
            model,
            spontaneous: false,
            cross_noise: false,
            frozen_detuning: false,
            field_init: FieldInit::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter("time step must be positive".into()));
        }
        if self.cross_noise && self.model == Model::B {
            return Err(Error::InvalidParameter(
                "position noise only exists in model A".into(),
            ));
        }
        Ok(())
    }

    /// `dt · max(rates)` for the rates the scheme must resolve. Values above
    /// [`STABILITY_WARN`] are logged when an ensemble starts.
    pub fn stiffness(&self, params: &Params, n_atoms: usize) -> f64 {
        let an = crate::fpe::relaxation_analytics(params, n_atoms);
        let mut rate = an.gamma_cool.abs();
        if self.model == Model::B || self.scheme == Scheme::EulerMaruyama {
            let n = n_atoms as f64;
            let kappa_max = params.kappa + n * params.gamma_half_prime();
            let delta_max = params.delta_c.abs() + n * params.shift_u().abs();
            rate = rate.max(kappa_max.hypot(delta_max));
        }
        self.dt * rate
    }
}

pub const STABILITY_WARN: f64 = 0.1;

/// Time step used when a run does not set one.
///
/// Model A resolves atomic motion only, so the step is bounded by the position
/// advance per step at the momentum width `dp_ref`: `2 ω_r dp_ref dt ≤ 0.05`.
/// Model B also resolves the cavity response, `dt ≤ 0.35/|κ + iΔ_c|`; the field
/// sub-step is exact, so this only bounds the atom-field splitting error.
/// Euler–Maruyama keeps the conservative `min(10⁻³/Γ_cool, 10⁻²)`.
pub fn default_dt(
    params: &Params,
    n_atoms: usize,
    model: Model,
    scheme: Scheme,
    dp_ref: f64,
) -> f64 {
    let an = crate::fpe::relaxation_analytics(params, n_atoms);
    let cool = if an.gamma_cool > 0.0 {
        1e-3 / an.gamma_cool
    } else {
        f64::INFINITY
    };
    match scheme {
        Scheme::EulerMaruyama => cool.min(1e-2),
        Scheme::Splitting => {
            let motion = 0.05 / (params.inv_mass() * dp_ref.max(1.0));
            match model {
                Model::A => motion.min(1.0),
                Model::B => motion
                    .min(0.35 / params.kappa.hypot(params.delta_c))
                    .min(1.0),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStateA {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStateB {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha_r: f64,
    pub alpha_i: f64,
    pub t: f64,
}

impl TrajectoryStateB {
    pub fn alpha(&self) -> C64 {
        C64::new(self.alpha_r, self.alpha_i)
    }
}

/// Per-step diagnostics accumulated by the kernels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepCounters {
    /// Steps whose noise covariance needed eigenvalue clipping.
    pub clipped_steps: u64,
    /// Largest clipped mass relative to the covariance trace.
    pub max_clipped_fraction: f64,
    /// Steps in which a conditional field-noise variance was clipped at zero.
    pub residual_clips: u64,
}

impl StepCounters {
    pub fn merge(&mut self, o: &StepCounters) {
        self.clipped_steps += o.clipped_steps;
        self.max_clipped_fraction = self.max_clipped_fraction.max(o.max_clipped_fraction);
        self.residual_clips += o.residual_clips;
    }
}

#[inline]
fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Coefficient scales shared by both models, precomputed once.
#[derive(Clone, Copy, Debug)]
struct Consts {
    s: f64,
    s2: f64,
    u: f64,
    kappa: f64,
    delta_c: f64,
    omega_r: f64,
    inv_m: f64,
    /// `Γ`, zero when spontaneous emission is off.
    gh: f64,
    ratio_s: f64,
    u2: f64,
    /// `Γ s² ū²`, zero when spontaneous emission is off.
    d_sp: f64,
    frozen_delta: Option<f64>,
}

impl Consts {
    fn new(params: &Params, cfg: &IntegratorConfig, n_atoms: usize) -> Self {
        let gh = if cfg.spontaneous {
            params.gamma_half_prime()
        } else {
            0.0
        };
        Self {
            s: params.pump_s(),
            s2: params.pump_s().powi(2),
            u: params.shift_u(),
            kappa: params.kappa,
            delta_c: params.delta_c,
            omega_r: params.omega_r,
            inv_m: params.inv_mass(),
            gh,
            ratio_s: params.ratio_s(),
            u2: params.u2,
            d_sp: gh * params.ratio_s().powi(2) * params.u2,
            frozen_delta: cfg
                .frozen_detuning
                .then(|| crate::field::shifted_detuning(params, n_atoms)),
        }
    }

    #[inline]
    fn delta_eff(&self, c2: f64) -> f64 {
        self.frozen_delta.unwrap_or(self.delta_c - self.u * c2)
    }
}

/// Model A kernel with scratch space for one trajectory at a time.
#[derive(Clone, Debug)]
pub struct KernelA {
    k: Consts,
    dt: f64,
    scheme: Scheme,
    cross: bool,
    sin: Vec<f64>,
}

impl KernelA {
    pub fn new(params: &Params, cfg: &IntegratorConfig, n_atoms: usize) -> Self {
        Self {
            k: Consts::new(params, cfg, n_atoms),
            dt: cfg.dt,
            scheme: cfg.scheme,
            cross: cfg.cross_noise,
            sin: vec![0.0; n_atoms],
        }
    }

    /// Fills the sines and returns `(F/sin, γ/(sin sin), D_cav/(sin sin), η/(sin sin))`.
    #[inline]
    fn coefficients(&mut self, x: &[f64]) -> (f64, f64, f64, f64) {
        let (mut c, mut c2) = (0.0, 0.0);
        for (s, &xi) in self.sin.iter_mut().zip(x) {
            let (sn, cs) = xi.sin_cos();
            *s = sn;
            c += cs;
            c2 += cs * cs;
        }
        let k = &self.k;
        let de = k.delta_eff(c2);
        let l = de * de + k.kappa * k.kappa;
        let force = 2.0 * k.s2 * de / l * c;
        let fric = -8.0 * k.omega_r * k.s2 * de * k.kappa / (l * l);
        let diff = k.s2 * k.kappa / l;
        let cross = 2.0 * k.omega_r * k.s2 * (k.kappa * k.kappa - de * de) / (l * l);
        (force, fric, diff, cross)
    }

    /// Momentum impulse over `dt` with coefficients at `x`; returns `vᵀdP`
    /// weight needed for the position noise.
    #[inline]
    fn kick<R: Rng + ?Sized>(
        &mut self,
        x: &[f64],
        p: &mut [f64],
        dx_noise: &mut [f64],
        rng: &mut R,
    ) {
        let (force, fric, diff, cross) = self.coefficients(x);
        let dt = self.dt;
        let proj: f64 = self.sin.iter().zip(p.iter()).map(|(s, q)| s * q).sum();
        let shared = (2.0 * diff * dt).sqrt() * normal(rng);
        let sp = (2.0 * self.k.d_sp * dt).sqrt();
        let mut vdp = 0.0;
        for (j, q) in p.iter_mut().enumerate() {
            let s = self.sin[j];
            let mut dp = s * shared;
            if sp > 0.0 {
                dp += sp * normal(rng);
            }
            vdp += s * dp;
            *q += (force - fric * proj) * s * dt + dp;
        }
        if self.cross {
            // minimal completion: dX = η/(2c|v|² + 2d) · v (vᵀ dP)
            let v2: f64 = self.sin.iter().map(|s| s * s).sum();
            let denom = 2.0 * diff * v2 + 2.0 * self.k.d_sp;
            let gain = if denom > 0.0 {
                cross / denom * vdp
            } else {
                0.0
            };
            for (d, s) in dx_noise.iter_mut().zip(&self.sin) {
                *d = gain * s;
            }
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, st: &mut TrajectoryStateA, rng: &mut R) {
        let n = st.x.len();
        let dt = self.dt;
        let inv_m = self.k.inv_m;
        let mut dxn = [0.0f64; 16];
        let mut heap;
        let dx_noise: &mut [f64] = if n <= 16 {
            &mut dxn[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        match self.scheme {
            Scheme::EulerMaruyama => {
                let x0 = st.x.clone();
                for (x, &q) in st.x.iter_mut().zip(&st.p) {
                    *x += inv_m * q * dt;
                }
                self.kick(&x0, &mut st.p, dx_noise, rng);
            }
            Scheme::Splitting => {
                for (x, &q) in st.x.iter_mut().zip(&st.p) {
                    *x += 0.5 * inv_m * q * dt;
                }
                let xm = std::mem::take(&mut st.x);
                self.kick(&xm, &mut st.p, dx_noise, rng);
                st.x = xm;
                for (x, &q) in st.x.iter_mut().zip(&st.p) {
                    *x += 0.5 * inv_m * q * dt;
                }
            }
        }
        if self.cross {
            for (x, d) in st.x.iter_mut().zip(dx_noise.iter()) {
                *x += d;
            }
        }
        st.t += dt;
    }
}

/// One model-A step. Builds a kernel per call; ensembles reuse [`KernelA`].
pub fn step_model_a<R: Rng + ?Sized>(
    state: &mut TrajectoryStateA,
    params: &Params,
    config: &IntegratorConfig,
    rng: &mut R,
) -> Result<()> {
    KernelA::new(params, config, state.x.len()).step(state, rng);
    finite_a(state).then_some(()).ok_or(Error::NonFinite {
        trajectory: 0,
        step: 0,
    })
}

pub(crate) fn finite_a(st: &TrajectoryStateA) -> bool {
    st.x.iter().chain(&st.p).all(|v| v.is_finite())
}

pub(crate) fn finite_b(st: &TrajectoryStateB) -> bool {
    st.alpha_r.is_finite()
        && st.alpha_i.is_finite()
        && st.x.iter().chain(&st.p).all(|v| v.is_finite())
}

/// `(e^z − 1)/z`.
fn phi1(z: C64) -> C64 {
    if z.norm() < 1e-2 {
        C64::new(1.0, 0.0) + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0))))
    } else {
        (z.exp() - 1.0) / z
    }
}

/// `(e^z − 1 − z)/z²`.
fn phi2(z: C64) -> C64 {
    if z.norm() < 1e-2 {
        C64::new(0.5, 0.0) + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z / 720.0)))
    } else {
        (z.exp() - 1.0 - z) / (z * z)
    }
}

/// Second moments of `(X, Y, Z)` for the complex OU process
/// `dα = (λα + u)dt + dA`, `⟨dA dA*⟩ = 2a dt`, over one step `h`:
/// `X = ∫e^{λ(h−s)}dA`, `Y = ∫(e^{λ(h−s)} − 1)/λ dA`, `Z = ∫dA`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OuStep {
    pub decay: C64,
    /// `∫₀^h e^{λs} ds`.
    pub phi: C64,
    pub zz: f64,
    pub xz: C64,
    pub yz: C64,
    pub xx: f64,
    pub yy: f64,
    pub xy: C64,
}

impl OuStep {
    pub fn new(lambda: C64, a: f64, h: f64) -> Self {
        let z = lambda * h;
        let mu = lambda.re;
        let p1 = phi1(z);
        let phi = p1 * h;
        let w = 2.0 * mu * h;
        let (pw1, pw2) = (phi1(C64::new(w, 0.0)).re, phi2(C64::new(w, 0.0)).re);
        let q2 = phi2(z);
        let two_a = 2.0 * a;
        // φ − h = h z φ₂(z);  (e^{2μh} − 1)/(2μ) = h φ₁(2μh)
        let phi_minus_h = z * q2 * h;
        let e2 = pw1 * h;
        let xy = (C64::new(e2, 0.0) - phi) * two_a / lambda.conj();
        // (e^{2μh}−1)/(2μ) − 2Re φ + h = h[w φ₂(w) − 2 Re(z φ₂(z))]
        let yy_bracket = h * (w * pw2 - 2.0 * (z * q2).re);
        Self {
            decay: z.exp(),
            phi,
            zz: two_a * h,
            xz: phi * two_a,
            yz: phi_minus_h * two_a / lambda,
            xx: two_a * e2,
            yy: (two_a / lambda.norm_sqr() * yy_bracket).max(0.0),
            xy,
        }
    }

    /// Draws `(X, Y)` given `Z`. Returns `true` if a residual variance had to be clipped.
    pub fn conditional<R: Rng + ?Sized>(&self, z: C64, rng: &mut R) -> (C64, C64, bool) {
        let kx = self.xz / self.zz;
        let ky = self.yz / self.zz;
        let rxx = self.xx - self.xz.norm_sqr() / self.zz;
        let ryy = self.yy - self.yz.norm_sqr() / self.zz;
        let rxy = self.xy - self.xz * self.yz.conj() / self.zz;
        let mut clipped = false;
        let (l11, l21) = if rxx > 0.0 {
            let l11 = rxx.sqrt();
            (l11, rxy.conj() / l11)
        } else {
            clipped |= rxx < -1e-12 * self.xx;
            (0.0, C64::new(0.0, 0.0))
        };
        let r22 = ryy - l21.norm_sqr();
        if r22 < -1e-9 * self.yy.max(f64::MIN_POSITIVE) {
            clipped = true;
        }
        let l22 = r22.max(0.0).sqrt();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let w1 = C64::new(normal(rng), normal(rng)) * h;
        let w2 = C64::new(normal(rng), normal(rng)) * h;
        (kx * z + w1 * l11, ky * z + l21 * w1 + w2 * l22, clipped)
    }
}

/// Model B kernel.
#[derive(Clone, Debug)]
pub struct KernelB {
    k: Consts,
    dt: f64,
    scheme: Scheme,
    sin: Vec<f64>,
    cos: Vec<f64>,
    xi: Vec<f64>,
    cov: DMatrix<f64>,
    pub counters: StepCounters,
}

impl KernelB {
    pub fn new(params: &Params, cfg: &IntegratorConfig, n_atoms: usize) -> Self {
        Self {
            k: Consts::new(params, cfg, n_atoms),
            dt: cfg.dt,
            scheme: cfg.scheme,
            sin: vec![0.0; n_atoms],
            cos: vec![0.0; n_atoms],
            xi: vec![0.0; n_atoms + 2],
            cov: DMatrix::zeros(n_atoms + 2, n_atoms + 2),
            counters: StepCounters::default(),
        }
    }

    /// Fills sines/cosines; returns `(Σcos, Δ′, κ′)`.
    #[inline]
    fn geometry(&mut self, x: &[f64]) -> (f64, f64, f64) {
        let (mut c, mut c2) = (0.0, 0.0);
        for ((s, co), &xi) in self.sin.iter_mut().zip(self.cos.iter_mut()).zip(x) {
            let (sn, cs) = xi.sin_cos();
            *s = sn;
            *co = cs;
            c += cs;
            c2 += cs * cs;
        }
        (c, self.k.delta_eff(c2), self.k.kappa + self.k.gh * c2)
    }

    /// Joint covariance of `(Re ∫dA, Im ∫dA, ∫dP_1, …)` over `h` at the
    /// current geometry, written into `self.cov`.
    fn fill_covariance(&mut self, alpha: C64, kappa_eff: f64, h: f64) {
        let n = self.sin.len();
        let a = 0.5 * kappa_eff;
        let k = self.k;
        let cov = &mut self.cov;
        cov.fill(0.0);
        cov[(0, 0)] = a * h;
        cov[(1, 1)] = a * h;
        let n2 = alpha.norm_sqr();
        for j in 0..n {
            let (s, c) = (self.sin[j], self.cos[j]);
            let b = -k.gh * s * c; // −(Γ/2) sin 2x
            cov[(0, j + 2)] = -b * alpha.im * h;
            cov[(j + 2, 0)] = -b * alpha.im * h;
            cov[(1, j + 2)] = b * alpha.re * h;
            cov[(j + 2, 1)] = b * alpha.re * h;
            cov[(j + 2, j + 2)] = 2.0
                * k.gh
                * (n2 * (s * s + k.u2 * c * c)
                    + k.ratio_s * k.u2 * (2.0 * alpha.re * c + k.ratio_s))
                * h;
        }
    }

    /// The noise covariance a step of length `h` would factorize at `(x, α)`.
    pub fn noise_covariance(&mut self, positions: &[f64], alpha: C64, h: f64) -> DMatrix<f64> {
        let (_, _, kappa_eff) = self.geometry(positions);
        self.fill_covariance(alpha, kappa_eff, h);
        self.cov.clone()
    }

    /// Samples `(Re ∫dA, Im ∫dA, ∫dP_1, …)` over `h` into `self.xi`.
    fn sample_noise<R: Rng + ?Sized>(&mut self, alpha: C64, kappa_eff: f64, h: f64, rng: &mut R) {
        if self.k.gh == 0.0 {
            let amp = (0.5 * kappa_eff * h).sqrt();
            self.xi[0] = amp * normal(rng);
            self.xi[1] = amp * normal(rng);
            for v in &mut self.xi[2..] {
                *v = 0.0;
            }
            return;
        }
        self.fill_covariance(alpha, kappa_eff, h);
        let cov = &self.cov;
        for v in self.xi.iter_mut() {
            *v = normal(rng);
        }
        let w = nalgebra::DVector::from_column_slice(&self.xi);
        let out = match cov.clone().cholesky() {
            Some(ch) => ch.l() * w,
            None => {
                let f = factorize_diffusion(cov).expect("covariance is symmetric by construction");
                if f.clipped_mass > 0.0 {
                    self.counters.clipped_steps += 1;
                    self.counters.max_clipped_fraction =
                        self.counters.max_clipped_fraction.max(f.clipped_fraction());
                }
                f.factor * w
            }
        };
        self.xi.copy_from_slice(out.as_slice());
    }

    pub fn step<R: Rng + ?Sized>(&mut self, st: &mut TrajectoryStateB, rng: &mut R) {
        let dt = self.dt;
        let inv_m = self.k.inv_m;
        let k = self.k;
        match self.scheme {
            Scheme::EulerMaruyama => {
                let (c, de, ke) = self.geometry(&st.x);
                let alpha = st.alpha();
                self.sample_noise(alpha, ke, dt, rng);
                let n2 = alpha.norm_sqr();
                for j in 0..st.x.len() {
                    let (s, co) = (self.sin[j], self.cos[j]);
                    let f = 2.0 * k.u * n2 * s * co + 2.0 * k.s * alpha.re * s
                        - 2.0 * k.gh * k.ratio_s * alpha.im * s;
                    st.x[j] += inv_m * st.p[j] * dt;
                    st.p[j] += f * dt + self.xi[j + 2];
                }
                let lambda = C64::new(-ke, de);
                let u = C64::new(-k.gh * k.ratio_s * c, -k.s * c);
                st.set_alpha(alpha + (lambda * alpha + u) * dt + C64::new(self.xi[0], self.xi[1]));
            }
            Scheme::Splitting => {
                for (x, &q) in st.x.iter_mut().zip(&st.p) {
                    *x += 0.5 * inv_m * q * dt;
                }
                let (c, de, ke) = self.geometry(&st.x);
                let alpha0 = st.alpha();
                self.sample_noise(alpha0, ke, dt, rng);
                let lambda = C64::new(-ke, de);
                let u = C64::new(-k.gh * k.ratio_s * c, -k.s * c);
                let ss = -u / lambda;
                let ou = OuStep::new(lambda, 0.5 * ke, dt);
                let zn = C64::new(self.xi[0], self.xi[1]);
                let (xn, yn, clipped) = ou.conditional(zn, rng);
                if clipped {
                    self.counters.residual_clips += 1;
                }
                let alpha1 = ss + (alpha0 - ss) * ou.decay + xn;
                let integral = ss * dt + (alpha0 - ss) * ou.phi + yn;
                let n2_int = 0.5 * (alpha0.norm_sqr() + alpha1.norm_sqr()) * dt;
                for j in 0..st.x.len() {
                    let (s, co) = (self.sin[j], self.cos[j]);
                    st.p[j] += 2.0 * k.u * s * co * n2_int + 2.0 * k.s * s * integral.re
                        - 2.0 * k.gh * k.ratio_s * s * integral.im
                        + self.xi[j + 2];
                }
                st.set_alpha(alpha1);
                for (x, &q) in st.x.iter_mut().zip(&st.p) {
                    *x += 0.5 * inv_m * q * dt;
                }
            }
        }
        st.t += dt;
    }
}

impl TrajectoryStateB {
    fn set_alpha(&mut self, a: C64) {
        self.alpha_r = a.re;
        self.alpha_i = a.im;
    }
}

/// One model-B step. Builds a kernel per call; ensembles reuse [`KernelB`].
pub fn step_model_b<R: Rng + ?Sized>(
    state: &mut TrajectoryStateB,
    params: &Params,
    config: &IntegratorConfig,
    rng: &mut R,
) -> Result<StepCounters> {
    let mut k = KernelB::new(params, config, state.x.len());
    k.step(state, rng);
    if !finite_b(state) {
        return Err(Error::NonFinite {
            trajectory: 0,
            step: 0,
        });
    }
    Ok(k.counters)
}
