//! Truncated-Fock evaluation of the general Fokker-Planck coefficients for
//! pinned atoms.
//!
//! Density matrices are vectorized by stacking columns, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. The time integrals over the cavity
//! propagator are done exactly on the trace-free subspace:
//! with `M = L − vec(σ) vec(1)ᵀ`, for traceless `Y`
//! `∫ e^{Lτ} Y dτ = −M⁻¹ Y` and `∫ τ e^{Lτ} Y dτ = M⁻² Y`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fpe::{CavityResponse, LowFieldCoefficients};
use crate::params::Params;

type CMat = DMatrix<C64>;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const SOLVE_TOL: f64 = 1e-8;

/// Field operators on the truncated space `{|0⟩, …, |n_max⟩}`.
#[derive(Clone, Debug)]
struct Ladder {
    a: CMat,
    ad: CMat,
    n: CMat,
    id: CMat,
}

impl Ladder {
    fn new(n_max: usize) -> Self {
        let d = n_max + 1;
        let mut a = CMat::zeros(d, d);
        for k in 1..d {
            a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
        }
        let ad = a.adjoint();
        let n = &ad * &a;
        Self {
            a,
            ad,
            n,
            id: CMat::identity(d, d),
        }
    }
}

fn left(op: &CMat, id: &CMat) -> CMat {
    id.kronecker(op)
}

fn right(op: &CMat, id: &CMat) -> CMat {
    op.transpose().kronecker(id)
}

fn vec_of(m: &CMat) -> DVector<C64> {
    DVector::from_column_slice(m.as_slice())
}

fn unvec(v: &DVector<C64>, d: usize) -> CMat {
    CMat::from_column_slice(d, d, v.as_slice())
}

fn cmax<'a>(m: impl IntoIterator<Item = &'a C64>) -> f64 {
    m.into_iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `Tr(A B)` without forming the product.
fn trace_prod(a: &CMat, b: &CMat) -> C64 {
    let d = a.nrows();
    let mut t = C64::new(0.0, 0.0);
    for i in 0..d {
        for k in 0..d {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

#[derive(Clone, Debug)]
pub struct TruncatedLiouvillian {
    pub n_max: usize,
    /// `(n_max + 1)²`.
    pub dim: usize,
    pub matrix: CMat,
    pub positions: Vec<f64>,
    pub spontaneous: bool,
    ladder: Ladder,
}

/// Builds `L₀` for atoms pinned at `positions`.
pub fn build_liouvillian(
    positions: &[f64],
    params: &Params,
    n_max: usize,
    spontaneous: bool,
) -> Result<TruncatedLiouvillian> {
    if n_max < 1 {
        return Err(Error::InvalidParameter(
            "photon cutoff must be at least 1".into(),
        ));
    }
    let ladder = Ladder::new(n_max);
    let (c, c2) = crate::field::cos_sums(positions);
    let gh = if spontaneous {
        params.gamma_half_prime()
    } else {
        0.0
    };
    let delta_eff = params.delta_c - params.shift_u() * c2;
    let kappa_eff = params.kappa + gh * c2;
    let s = params.ratio_s();

    // L ρ = [K, ρ] + κ′(2 a ρ a† − a†a ρ − ρ a†a)
    let x = &ladder.a + &ladder.ad;
    let y = &ladder.a - &ladder.ad;
    let k = ladder.n.map(|v| v * I * delta_eff)
        + x.map(|v| v * (-I * params.pump_s() * c))
        + y.map(|v| v * (gh * s * c));
    let id = &ladder.id;
    let jump = ladder.a.map(|v| v.conj()).kronecker(&ladder.a) * C64::new(2.0, 0.0);
    let decay = jump - left(&ladder.n, id) - right(&ladder.n, id);
    let matrix = left(&k, id) - right(&k, id) + decay * C64::new(kappa_eff, 0.0);

    Ok(TruncatedLiouvillian {
        n_max,
        dim: (n_max + 1) * (n_max + 1),
        matrix,
        positions: positions.to_vec(),
        spontaneous,
        ladder,
    })
}

impl TruncatedLiouvillian {
    pub fn apply(&self, rho: &CMat) -> CMat {
        unvec(&(&self.matrix * vec_of(rho)), self.n_max + 1)
    }

    /// `vec(1)`, the left null vector.
    fn vec_identity(&self) -> DVector<C64> {
        vec_of(&self.ladder.id)
    }
}

#[derive(Clone, Debug)]
pub struct SteadyFieldState {
    pub rho: CMat,
    /// Sum of negative eigenvalues removed by the PSD projection.
    pub clipped_mass: f64,
    /// `‖L₀ σ‖_max` after projection.
    pub residual: f64,
}

impl SteadyFieldState {
    pub fn expect(&self, op: &CMat) -> C64 {
        trace_prod(&self.rho, op)
    }

    pub fn mean_amplitude(&self) -> C64 {
        let d = self.rho.nrows();
        let mut a = C64::new(0.0, 0.0);
        for k in 1..d {
            a += self.rho[(k, k - 1)] * (k as f64).sqrt();
        }
        a
    }

    pub fn photon_number(&self) -> f64 {
        (0..self.rho.nrows())
            .map(|k| self.rho[(k, k)].re * k as f64)
            .sum()
    }
}

/// Null vector of `L₀` with unit trace, Hermitized and projected onto PSD matrices.
pub fn steady_state(l: &TruncatedLiouvillian) -> Result<SteadyFieldState> {
    let d = l.n_max + 1;
    let w = l.vec_identity() / C64::new(d as f64, 0.0);
    let bordered = &l.matrix + &w * l.vec_identity().transpose();
    let raw = bordered.lu().solve(&w).ok_or(Error::DegenerateNullSpace)?;
    let m = unvec(&raw, d);
    let herm = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut clipped_mass = 0.0;
    let vals: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&e| {
            if e < 0.0 {
                clipped_mass -= e;
                0.0
            } else {
                e
            }
        })
        .collect();
    let total: f64 = vals.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateNullSpace);
    }
    let mut rho = CMat::zeros(d, d);
    for (k, &v) in vals.iter().enumerate() {
        if v > 0.0 {
            let col = eig.eigenvectors.column(k);
            rho += &col * col.adjoint() * C64::new(v / total, 0.0);
        }
    }
    let residual = cmax(&l.apply(&rho));
    if residual > 1e-6 {
        return Err(Error::DegenerateNullSpace);
    }
    Ok(SteadyFieldState {
        rho,
        clipped_mass,
        residual,
    })
}

/// `F̂_j = S sin x_j (a + a†) + U sin 2x_j a†a − i Γ s sin x_j (a† − a)`, one per atom.
#[derive(Clone, Debug)]
pub struct ForceOperator {
    pub ops: Vec<CMat>,
}

pub fn force_operators(l: &TruncatedLiouvillian, params: &Params) -> ForceOperator {
    let lad = &l.ladder;
    let gh = if l.spontaneous {
        params.gamma_half_prime()
    } else {
        0.0
    };
    let x = &lad.a + &lad.ad;
    let y = &lad.ad - &lad.a;
    let ops = l
        .positions
        .iter()
        .map(|&xj| {
            let s = xj.sin();
            x.map(|v| v * (params.pump_s() * s))
                + lad.n.map(|v| v * (params.shift_u() * (2.0 * xj).sin()))
                + y.map(|v| v * (-I * gh * params.ratio_s() * s))
        })
        .collect();
    ForceOperator { ops }
}

#[derive(Clone, Debug)]
pub struct OracleCoefficients {
    pub drift: DVector<f64>,
    /// Damping convention, momentum drift `−γ p`.
    pub friction: DMatrix<f64>,
    /// Symmetric part of the diffusion integral.
    pub diffusion: DMatrix<f64>,
    pub cross: DMatrix<f64>,
    /// `max |D − Dᵀ| / max |D|` before symmetrization.
    pub diffusion_asymmetry: f64,
    /// Largest imaginary part dropped from a trace, relative to its family scale.
    pub imaginary_residue: f64,
    /// 1-norm condition estimate of the deflated Liouvillian.
    pub condition: f64,
}

/// Deflated Liouvillian `M = L − vec(σ) vec(1)ᵀ` with an explicit inverse.
struct Resolvent {
    m: CMat,
    inv: CMat,
    condition: f64,
}

impl Resolvent {
    fn new(l: &TruncatedLiouvillian, sigma: &SteadyFieldState) -> Result<Self> {
        let m = &l.matrix - vec_of(&sigma.rho) * l.vec_identity().transpose();
        let inv = m.clone().try_inverse().ok_or(Error::SolverResidual {
            residual: f64::INFINITY,
            tolerance: SOLVE_TOL,
            condition: f64::INFINITY,
        })?;
        let norm1 = |a: &CMat| {
            a.column_iter()
                .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let condition = norm1(&m) * norm1(&inv);
        Ok(Self { m, inv, condition })
    }

    /// `M⁻¹ y`, with the residual checked against `SOLVE_TOL`.
    fn solve(&self, y: &DVector<C64>) -> Result<DVector<C64>> {
        let x = &self.inv * y;
        let scale = cmax(y).max(f64::MIN_POSITIVE);
        let residual = cmax(&(&self.m * &x - y)) / scale;
        if residual > SOLVE_TOL {
            return Err(Error::SolverResidual {
                residual,
                tolerance: SOLVE_TOL,
                condition: self.condition,
            });
        }
        Ok(x)
    }
}

/// Evaluates `{Φ, γ, D, η}` (with the spontaneous-emission parts when `L` has them).
pub fn coefficient_integrals(
    l: &TruncatedLiouvillian,
    forces: &ForceOperator,
    sigma: &SteadyFieldState,
    params: &Params,
) -> Result<OracleCoefficients> {
    let n = forces.ops.len();
    let d = l.n_max + 1;
    let rho = &sigma.rho;
    let res = Resolvent::new(l, sigma)?;
    let inv_mass = params.inv_mass();
    let half = C64::new(0.5, 0.0);

    let mean: Vec<f64> = forces.ops.iter().map(|f| sigma.expect(f).re).collect();
    let drift = DVector::from_vec(mean.clone());

    let mut friction = DMatrix::zeros(n, n);
    let mut diffusion = DMatrix::zeros(n, n);
    let mut cross = DMatrix::zeros(n, n);
    let mut imag = [0.0f64; 3];

    // integrals ∫e^{Lτ}Y and ∫τe^{Lτ}Y, as matrices
    let integrals = |y: &CMat| -> Result<(CMat, CMat)> {
        let x1 = res.solve(&vec_of(y))?;
        let x2 = res.solve(&x1)?;
        Ok((unvec(&(-x1), d), unvec(&x2, d)))
    };

    for (l_idx, f_l) in forces.ops.iter().enumerate() {
        let comm = (f_l * rho - rho * f_l) * I;
        let sym = (rho * f_l + f_l * rho) * half - rho * C64::new(mean[l_idx], 0.0);
        let (_, t_comm) = integrals(&comm)?;
        let (i_sym, t_sym) = integrals(&sym)?;
        for (j, f_j) in forces.ops.iter().enumerate() {
            let g = trace_prod(f_j, &t_comm) * inv_mass;
            let dd = trace_prod(f_j, &i_sym);
            let e = trace_prod(f_j, &t_sym) * inv_mass;
            friction[(j, l_idx)] = g.re;
            diffusion[(j, l_idx)] = dd.re;
            cross[(j, l_idx)] = e.re;
            imag[0] = imag[0].max(g.im.abs());
            imag[1] = imag[1].max(dd.im.abs());
            imag[2] = imag[2].max(e.im.abs());
        }
    }

    if l.spontaneous {
        let lad = &l.ladder;
        let gh = params.gamma_half_prime();
        let s = params.ratio_s();
        let loss = &lad.n * rho + rho * &lad.n - &lad.a * rho * &lad.ad * C64::new(2.0, 0.0);
        let shift = &lad.n * rho - rho * &lad.n;
        let (_, t_loss) = integrals(&loss)?;
        let (i_shift, t_shift) = integrals(&shift)?;
        let n_mean = sigma.photon_number();
        let x_mean = sigma.expect(&(&lad.a + &lad.ad)).re;
        let fj_terms: Vec<(C64, C64, C64)> = forces
            .ops
            .iter()
            .map(|f| {
                (
                    trace_prod(f, &t_loss),
                    trace_prod(f, &i_shift),
                    trace_prod(f, &t_shift),
                )
            })
            .collect();
        for (l_idx, &xl) in l.positions.iter().enumerate() {
            let s2x = (2.0 * xl).sin();
            for (j, &(tl, is, ts)) in fj_terms.iter().enumerate() {
                let g = tl * (gh * inv_mass * s2x);
                let dd = is * (-I * 0.5 * gh * s2x);
                let e = ts * (-I * 0.5 * gh * inv_mass * s2x);
                friction[(j, l_idx)] += g.re;
                diffusion[(j, l_idx)] += dd.re;
                cross[(j, l_idx)] += e.re;
            }
            let (sn, cs) = xl.sin_cos();
            diffusion[(l_idx, l_idx)] +=
                gh * (n_mean * (sn * sn + params.u2 * cs * cs) + s * params.u2 * (x_mean * cs + s));
        }
    }

    let dscale = diffusion.amax().max(f64::MIN_POSITIVE);
    let diffusion_asymmetry = (&diffusion - diffusion.transpose()).amax() / dscale;
    let diffusion = (&diffusion + diffusion.transpose()) * 0.5;
    let imaginary_residue = [
        imag[0] / friction.amax().max(f64::MIN_POSITIVE),
        imag[1] / dscale,
        imag[2] / cross.amax().max(f64::MIN_POSITIVE),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    Ok(OracleCoefficients {
        drift,
        friction,
        diffusion,
        cross,
        diffusion_asymmetry,
        imaginary_residue,
        condition: res.condition,
    })
}

/// Builds the Liouvillian, solves for `σ_s` and evaluates all coefficients.
pub fn oracle_coefficients(
    positions: &[f64],
    params: &Params,
    n_max: usize,
    spontaneous: bool,
) -> Result<OracleCoefficients> {
    let l = build_liouvillian(positions, params, n_max, spontaneous)?;
    let sigma = steady_state(&l)?;
    let forces = force_operators(&l, params);
    coefficient_integrals(&l, &forces, &sigma, params)
}

/// Max-norm relative deviation of each coefficient family.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Deviation {
    pub drift: f64,
    pub friction: f64,
    pub diffusion: f64,
    pub cross: f64,
}

impl Deviation {
    pub fn max(&self) -> f64 {
        self.drift
            .max(self.friction)
            .max(self.diffusion)
            .max(self.cross)
    }

    /// Largest of two deviations, family by family.
    pub fn worst(self, other: Self) -> Self {
        Self {
            drift: self.drift.max(other.drift),
            friction: self.friction.max(other.friction),
            diffusion: self.diffusion.max(other.diffusion),
            cross: self.cross.max(other.cross),
        }
    }
}

impl Default for Deviation {
    fn default() -> Self {
        Self {
            drift: 0.0,
            friction: 0.0,
            diffusion: 0.0,
            cross: 0.0,
        }
    }
}

/// Natural magnitude of `η`: `2 ω_r S² max|sin_j sin_ℓ| / (Δ′² + κ²)`.
///
/// `η` itself crosses zero at `|Δ′| = κ`, so it cannot serve as its own scale.
pub fn cross_scale(positions: &[f64], params: &Params) -> f64 {
    let r = CavityResponse::at(positions, params, false);
    let smax = positions.iter().map(|x| x.sin().abs()).fold(0.0, f64::max);
    2.0 * params.omega_r * params.pump_s().powi(2) * smax * smax / r.lorentz
}

pub fn analytic_deviation(
    oracle: &OracleCoefficients,
    analytic: &LowFieldCoefficients,
    positions: &[f64],
    params: &Params,
) -> Deviation {
    let rel_v = |a: &DVector<f64>, b: &DVector<f64>| {
        (a - b).amax() / b.amax().max(a.amax()).max(f64::MIN_POSITIVE)
    };
    let rel_m = |a: &DMatrix<f64>, b: &DMatrix<f64>, scale: f64| {
        (a - b).amax() / scale.max(f64::MIN_POSITIVE)
    };
    Deviation {
        drift: rel_v(&oracle.drift, &analytic.drift),
        friction: rel_m(
            &oracle.friction,
            &analytic.friction,
            analytic.friction.amax().max(oracle.friction.amax()),
        ),
        diffusion: rel_m(
            &oracle.diffusion,
            &analytic.diffusion,
            analytic.diffusion.amax().max(oracle.diffusion.amax()),
        ),
        cross: rel_m(
            &oracle.cross,
            &analytic.cross,
            cross_scale(positions, params),
        ),
    }
}

/// Raises the cutoff until every family changes by less than `tol` (relative,
/// max-norm) from one cutoff to the next.
pub fn converged_coefficients(
    positions: &[f64],
    params: &Params,
    spontaneous: bool,
    n_start: usize,
    n_cap: usize,
    tol: f64,
) -> Result<(OracleCoefficients, usize)> {
    let mut prev = oracle_coefficients(positions, params, n_start, spontaneous)?;
    for n_max in n_start + 1..=n_cap {
        let next = oracle_coefficients(positions, params, n_max, spontaneous)?;
        if relative_change(&prev, &next, positions, params) < tol {
            return Ok((next, n_max));
        }
        prev = next;
    }
    Err(Error::InvalidParameter(format!(
        "oracle coefficients not converged to {tol:e} by photon cutoff {n_cap}"
    )))
}

pub fn relative_change(
    a: &OracleCoefficients,
    b: &OracleCoefficients,
    positions: &[f64],
    params: &Params,
) -> f64 {
    let rel = |x: f64, s: f64| x / s.max(f64::MIN_POSITIVE);
    [
        rel((&a.drift - &b.drift).amax(), b.drift.amax()),
        rel((&a.friction - &b.friction).amax(), b.friction.amax()),
        rel((&a.diffusion - &b.diffusion).amax(), b.diffusion.amax()),
        rel((&a.cross - &b.cross).amax(), cross_scale(positions, params)),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field;
    use approx::assert_relative_eq;

    fn trace(m: &CMat) -> C64 {
        m.diagonal().iter().sum()
    }

    #[test]
    fn columns_are_trace_annihilating() {
        let p = Params::reference();
        let l = build_liouvillian(&[0.3, 1.7, 2.2], &p, 4, true).unwrap();
        let d = l.n_max + 1;
        for col in 0..l.dim {
            let mut e = DVector::zeros(l.dim);
            e[col] = C64::new(1.0, 0.0);
            let out = unvec(&(&l.matrix * e), d);
            assert!(trace(&out).norm() < 1e-12);
        }
    }

    #[test]
    fn spectrum_has_single_zero() {
        let p = Params::reference();
        let l = build_liouvillian(&[0.3, 1.7, 2.2, 4.0, 5.5], &p, 3, true).unwrap();
        let ev = l.matrix.clone().schur().eigenvalues().unwrap();
        let zeros = ev.iter().filter(|z| z.norm() < 1e-9).count();
        assert_eq!(zeros, 1);
        for z in ev.iter().filter(|z| z.norm() >= 1e-9) {
            assert!(z.re < 0.0, "{z}");
        }
    }

    #[test]
    fn empty_cavity_relaxes_to_vacuum() {
        let p = Params::reference()
            .with_pump(0.0)
            .unwrap()
            .with_g(1e-12)
            .unwrap();
        let l = build_liouvillian(&[0.4], &p, 3, false).unwrap();
        let sigma = steady_state(&l).unwrap();
        assert!((sigma.rho[(0, 0)].re - 1.0).abs() < 1e-12);
        let ev = l.matrix.clone().schur().eigenvalues().unwrap();
        for z in ev.iter() {
            // real parts are multiples of −κ (rates κ(n + m) for |n⟩⟨m|)
            let m = -z.re / p.kappa;
            assert!((m - m.round()).abs() < 1e-8, "{z}");
        }
        let c = oracle_coefficients(&[0.4], &p, 3, false).unwrap();
        assert!(c.drift.amax() < 1e-20);
        assert!(c.friction.amax() < 1e-20);
        assert!(c.diffusion.amax() < 1e-20);
        assert!(c.cross.amax() < 1e-20);
    }

    #[test]
    fn steady_state_is_a_density_matrix() {
        let p = Params::reference();
        let l = build_liouvillian(&[0.1, 0.5, 2.0, 3.0, 6.0], &p, 3, true).unwrap();
        let sigma = steady_state(&l).unwrap();
        assert!((trace(&sigma.rho) - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(sigma.residual < 1e-10);
        let ev = sigma.rho.clone().symmetric_eigen().eigenvalues;
        assert!(ev.iter().all(|&e| e >= -1e-14));
    }

    #[test]
    fn weak_drive_amplitude_matches_adiabatic_field() {
        let p = Params::reference().with_pump(2.0).unwrap();
        let x = [0.1, 0.5, 2.0, 3.0, 6.0];
        for spont in [false, true] {
            let l = build_liouvillian(&x, &p, 4, spont).unwrap();
            let sigma = steady_state(&l).unwrap();
            let alpha = field::coherent_amplitude(&x, &p, spont);
            let got = sigma.mean_amplitude();
            assert!((got - alpha).norm() < 1e-3 * alpha.norm(), "{got} {alpha}");
        }
    }

    #[test]
    fn force_operators_are_hermitian() {
        let p = Params::reference();
        let l = build_liouvillian(&[0.3, 1.2], &p, 3, true).unwrap();
        for f in force_operators(&l, &p).ops {
            assert!(cmax(&(&f - f.adjoint())) < 1e-15);
        }
    }

    #[test]
    fn single_atom_diffusion_matches_low_field_form() {
        let p = Params::reference();
        let x = [1.4];
        let o = oracle_coefficients(&x, &p, 2, true).unwrap();
        let a = LowFieldCoefficients::at(&x, &p, true);
        assert_relative_eq!(
            o.diffusion[(0, 0)],
            a.diffusion[(0, 0)],
            max_relative = 1e-3
        );
    }

    #[test]
    fn low_field_residual_is_first_order_in_cavity_shift() {
        // the neglected terms scale as U|α| cos/S, i.e. with U at fixed S
        let x = [0.3, 1.1, 2.5, 4.4, 5.9];
        let dev = |p: &Params| {
            let o = oracle_coefficients(&x, p, 4, false).unwrap();
            analytic_deviation(&o, &LowFieldCoefficients::at(&x, p, false), &x, p)
        };
        let p = Params::reference();
        let full = dev(&p);
        let r = std::f64::consts::SQRT_2;
        let q = p.with_g(p.g / r).unwrap().with_pump(p.omega * r).unwrap();
        assert_relative_eq!(q.pump_s(), p.pump_s(), max_relative = 1e-12);
        let half = dev(&q);
        for (f, h) in [
            (full.drift, half.drift),
            (full.friction, half.friction),
            (full.diffusion, half.diffusion),
        ] {
            assert!((f / h - 2.0).abs() < 0.1, "{f} {h}");
        }
    }

    #[test]
    fn cross_vanishes_where_detuning_equals_minus_kappa() {
        let p = Params::reference();
        // Σcos² = 0 pins Δ′ = Δ_c = −κ while keeping the sines nonzero
        let x = [
            std::f64::consts::FRAC_PI_2,
            -std::f64::consts::FRAC_PI_2,
            1.5,
        ];
        let q = p
            .with_delta_c(-p.kappa + p.shift_u() * field::cos_sums(&x).1)
            .unwrap();
        assert_relative_eq!(field::effective_detuning(&x, &q), -q.kappa, epsilon = 1e-15);
        let o = oracle_coefficients(&x, &q, 3, false).unwrap();
        assert!(o.cross.amax() < 1e-3 * cross_scale(&x, &q), "{}", o.cross);
    }

    #[test]
    fn oracle_diffusion_is_symmetric_psd() {
        let p = Params::reference();
        let x = [0.3, 1.1, 2.5, 4.4, 5.9];
        let o = oracle_coefficients(&x, &p, 3, true).unwrap();
        // the raw integral is only symmetric to leading order in |α|/s
        assert!(o.diffusion_asymmetry < 0.05, "{}", o.diffusion_asymmetry);
        assert_eq!(o.diffusion, o.diffusion.transpose());
        let tr = o.diffusion.trace();
        let ev = o.diffusion.clone().symmetric_eigen().eigenvalues;
        assert!(ev.iter().all(|&e| e >= -1e-9 * tr), "{ev}");
    }

    #[test]
    fn cutoff_convergence() {
        let p = Params::reference();
        let x = [0.3, 1.1, 2.5, 4.4, 5.9];
        let c2 = oracle_coefficients(&x, &p, 2, true).unwrap();
        let c3 = oracle_coefficients(&x, &p, 3, true).unwrap();
        let c4 = oracle_coefficients(&x, &p, 4, true).unwrap();
        assert!(relative_change(&c2, &c3, &x, &p) < 5e-3);
        assert!(relative_change(&c3, &c4, &x, &p) < 1e-4);
        let (_, n) = converged_coefficients(&x, &p, true, 1, 6, 1e-6).unwrap();
        assert!(n <= 6);
    }

    #[test]
    fn rejects_zero_cutoff() {
        assert!(build_liouvillian(&[0.0], &Params::reference(), 0, false).is_err());
    }
}
