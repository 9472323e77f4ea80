//! Initial-condition samplers, momentum statistics and CSV output.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Params, UnitSystem};
use crate::sde::{StepCounters, TrajectoryStateA, TrajectoryStateB};

/// Thermal initial ensemble: uniform positions over one wavelength and
/// Maxwell–Boltzmann momenta of width `√(m k_B T_in)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    /// `k_B T_in` in units of `ħγ/2`.
    pub kbt_in: f64,
}

impl InitialCondition {
    /// Doppler temperature, `k_B T = ħγ/2`.
    pub fn doppler(params: &Params) -> Self {
        Self {
            kbt_in: 0.5 * params.gamma,
        }
    }

    pub fn momentum_width(&self, params: &Params) -> f64 {
        (self.kbt_in / params.inv_mass()).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.kbt_in > 0.0 && self.kbt_in.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(
                "initial temperature must be positive".into(),
            ))
        }
    }
}

pub fn sample_initial<R: Rng + ?Sized>(
    params: &Params,
    n_atoms: usize,
    ic: &InitialCondition,
    rng: &mut R,
) -> TrajectoryStateA {
    let w = ic.momentum_width(params);
    let mut x = Vec::with_capacity(n_atoms);
    let mut p = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        x.push(rng.gen::<f64>() * std::f64::consts::TAU);
        p.push(w * rng.sample::<f64, _>(StandardNormal));
    }
    TrajectoryStateA { x, p, t: 0.0 }
}

/// Same atoms as [`sample_initial`], plus the cavity amplitude.
pub fn sample_initial_b<R: Rng + ?Sized>(
    params: &Params,
    n_atoms: usize,
    ic: &InitialCondition,
    field: crate::sde::FieldInit,
    rng: &mut R,
) -> TrajectoryStateB {
    let a = sample_initial(params, n_atoms, ic, rng);
    let (alpha_r, alpha_i) = match field {
        crate::sde::FieldInit::Fixed { re, im } => (re, im),
        crate::sde::FieldInit::Sampled { re, im } => (
            re + 0.5 * rng.sample::<f64, _>(StandardNormal),
            im + 0.5 * rng.sample::<f64, _>(StandardNormal),
        ),
    };
    TrajectoryStateB {
        x: a.x,
        p: a.p,
        alpha_r,
        alpha_i,
        t: 0.0,
    }
}

/// Power sums up to fourth order. Merging is exact addition, so any
/// fixed merge order gives reproducible results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, v: f64) {
        let v2 = v * v;
        self.n += 1;
        self.s1 += v;
        self.s2 += v2;
        self.s3 += v2 * v;
        self.s4 += v2 * v2;
    }

    pub fn extend(&mut self, vs: &[f64]) {
        for &v in vs {
            self.push(v);
        }
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s3 += o.s3;
        self.s4 += o.s4;
    }

    pub fn mean(&self) -> f64 {
        self.s1 / self.n as f64
    }

    /// Unbiased variance.
    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        let m = self.mean();
        ((self.s2 - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn width(&self) -> Result<WidthEstimate> {
        if self.n < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.n as usize,
            });
        }
        let w = self.variance().sqrt();
        Ok(WidthEstimate {
            width: w,
            stderr: w / (2.0 * (self.n as f64 - 1.0)).sqrt(),
            n: self.n,
        })
    }

    /// `m₄/m₂² − 3` from biased central moments.
    pub fn excess_kurtosis(&self) -> f64 {
        let n = self.n as f64;
        let m = self.mean();
        let (e2, e3, e4) = (self.s2 / n, self.s3 / n, self.s4 / n);
        let c2 = e2 - m * m;
        let c4 = e4 - 4.0 * m * e3 + 6.0 * m * m * e2 - 3.0 * m.powi(4);
        if c2 > 0.0 {
            c4 / (c2 * c2) - 3.0
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub width: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Unbiased standard deviation of the pooled sample, with the asymptotic
/// normal standard error `Δp/√(2(n−1))`.
pub fn pooled_width(momenta: &[f64]) -> Result<WidthEstimate> {
    let mut m = Moments::default();
    m.extend(momenta);
    m.width()
}

/// Mean of independent per-trajectory values with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchMean {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl BatchMean {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&mut self, o: &BatchMean) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    pub fn stderr(&self) -> f64 {
        let n = self.n as f64;
        let m = self.mean();
        (((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt()
    }
}

/// Stationary width from per-trajectory window averages of `p²` and `p`.
///
/// Each trajectory contributes one independent sample of its time-and-atom
/// averaged `p²` and `p`; the standard error propagates their
/// trajectory-to-trajectory scatter through `Δp = √(⟨p²⟩ − ⟨p⟩²)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowWidth {
    pub p: BatchMean,
    pub p2: BatchMean,
    /// `Σ p·p²` for the covariance term of the delta method.
    pub cross: f64,
}

impl WindowWidth {
    pub fn push(&mut self, mean_p: f64, mean_p2: f64) {
        self.p.push(mean_p);
        self.p2.push(mean_p2);
        self.cross += mean_p * mean_p2;
    }

    pub fn merge(&mut self, o: &WindowWidth) {
        self.p.merge(&o.p);
        self.p2.merge(&o.p2);
        self.cross += o.cross;
    }

    pub fn estimate(&self) -> Result<WidthEstimate> {
        let n = self.p.n;
        if n < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: n as usize,
            });
        }
        let nf = n as f64;
        let (m1, m2) = (self.p.mean(), self.p2.mean());
        let var = (m2 - m1 * m1).max(0.0);
        let w = var.sqrt();
        let v1 = self.p.stderr().powi(2);
        let v2 = self.p2.stderr().powi(2);
        let c12 = (self.cross - nf * m1 * m2) / (nf - 1.0) / nf;
        // ∂var/∂m2 = 1, ∂var/∂m1 = −2 m1
        let var_se2 = v2 + 4.0 * m1 * m1 * v1 - 4.0 * m1 * c12;
        let stderr = if w > 0.0 {
            var_se2.max(0.0).sqrt() / (2.0 * w)
        } else {
            0.0
        };
        Ok(WidthEstimate {
            width: w,
            stderr,
            n,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussianity {
    pub excess_kurtosis: f64,
    /// `√(24/n)`.
    pub kurtosis_stderr: f64,
    /// Largest `|histogram − Gaussian|` density difference, relative to the Gaussian peak.
    pub histogram_deviation: f64,
}

impl Gaussianity {
    pub fn is_gaussian(&self, sigmas: f64) -> bool {
        self.excess_kurtosis.abs() <= sigmas * self.kurtosis_stderr
    }
}

pub fn gaussianity(momenta: &[f64]) -> Result<Gaussianity> {
    let mut m = Moments::default();
    m.extend(momenta);
    let w = m.width()?.width;
    let h = histogram(momenta, Binning::FreedmanDiaconis)?;
    let peak = gaussian_density(0.0, 0.0, w);
    let mean = m.mean();
    let dev = h
        .centers
        .iter()
        .zip(&h.densities)
        .map(|(&c, &d)| (d - gaussian_density(c, mean, w)).abs())
        .fold(0.0, f64::max);
    Ok(Gaussianity {
        excess_kurtosis: m.excess_kurtosis(),
        kurtosis_stderr: (24.0 / momenta.len() as f64).sqrt(),
        histogram_deviation: if peak > 0.0 { dev / peak } else { 0.0 },
    })
}

pub fn gaussian_density(x: f64, mean: f64, width: f64) -> f64 {
    if width <= 0.0 {
        return 0.0;
    }
    let z = (x - mean) / width;
    (-0.5 * z * z).exp() / (width * (std::f64::consts::TAU).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Binning {
    FreedmanDiaconis,
    Fixed { bins: usize, lo: f64, hi: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub bin_width: f64,
    /// Samples outside a fixed range.
    pub outside: u64,
}

impl Histogram {
    pub fn integral(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.bin_width
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let f = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

/// Density histogram normalized over the counted samples.
pub fn histogram(data: &[f64], binning: Binning) -> Result<Histogram> {
    if data.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let (bins, lo, hi) = match binning {
        Binning::Fixed { bins, lo, hi } => {
            if bins == 0 || !(hi > lo) {
                return Err(Error::InvalidParameter("empty histogram range".into()));
            }
            (bins, lo, hi)
        }
        Binning::FreedmanDiaconis => {
            let mut s = data.to_vec();
            s.sort_by(f64::total_cmp);
            let (lo, hi) = (s[0], s[s.len() - 1]);
            let iqr = quantile(&s, 0.75) - quantile(&s, 0.25);
            let h = 2.0 * iqr / (s.len() as f64).cbrt();
            if !(hi > lo) || !(h > 0.0) {
                // degenerate sample: one bin of unit width around the value
                (1, lo - 0.5, lo + 0.5)
            } else {
                let bins = (((hi - lo) / h).ceil() as usize).clamp(1, 10_000);
                (bins, lo, lo + bins as f64 * h)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut outside = 0;
    for &v in data {
        if v < lo || v > hi || !v.is_finite() {
            outside += 1;
            continue;
        }
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let inside = (data.len() as u64 - outside) as f64;
    let norm = if inside > 0.0 {
        1.0 / (inside * width)
    } else {
        0.0
    };
    Ok(Histogram {
        centers: (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        densities: counts.iter().map(|&c| c as f64 * norm).collect(),
        bin_width: width,
        outside,
    })
}

/// `|Σ_j cos x_j| / N` for one configuration.
pub fn order_parameter(positions: &[f64]) -> f64 {
    if positions.is_empty() {
        return 0.0;
    }
    crate::field::cos_sums(positions).0.abs() / positions.len() as f64
}

/// Ensemble mean of [`order_parameter`].
pub fn spatial_order_diagnostic<'a, I>(configurations: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let (mut s, mut n) = (0.0, 0usize);
    for c in configurations {
        s += order_parameter(c);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Momentum snapshot pooled over atoms and trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub momenta: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub time: f64,
    pub time_ms: f64,
    pub width: f64,
    pub stderr: f64,
    pub analytic: Option<f64>,
    pub excess_kurtosis: f64,
    pub order: f64,
    /// Ensemble mean of `|α|²` (model B only).
    pub photons: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_trajectories: usize,
    pub n_atoms: usize,
    pub points: Vec<TimePoint>,
    pub snapshots: Vec<Snapshot>,
    pub steady: Option<WidthEstimate>,
    /// Window-averaged photon number with its standard error (model B).
    pub steady_photons: Option<(f64, f64)>,
    pub aborted: usize,
    pub counters: StepCounters,
}

impl EnsembleSummary {
    /// Fills the analytic overlay `Δp(t)` from the measured initial width.
    pub fn overlay(&mut self, analytics: &crate::fpe::RelaxationAnalytics) {
        let Some(dp0) = self.points.first().map(|p| p.width) else {
            return;
        };
        for p in &mut self.points {
            p.analytic =
                (analytics.a < 0.0).then(|| crate::fpe::width_evolution(dp0, p.time, analytics));
        }
    }

    /// Largest `|Δp − Δp_analytic| / stderr` over output times.
    pub fn max_overlay_z(&self) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|p| p.analytic.map(|a| (p.width - a).abs() / p.stderr))
            .reduce(f64::max)
    }

    pub fn set_times_ms(&mut self, units: &UnitSystem) {
        for p in &mut self.points {
            p.time_ms = units.time_to_ms(p.time);
        }
    }
}

/// `t, t_ms, dp, stderr, dp_analytic, excess_kurtosis, order, photons`.
pub fn write_width_csv(path: &Path, s: &EnsembleSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t",
        "t_ms",
        "dp",
        "stderr",
        "dp_analytic",
        "excess_kurtosis",
        "order",
        "photons",
    ])?;
    for p in &s.points {
        w.write_record([
            p.time.to_string(),
            p.time_ms.to_string(),
            p.width.to_string(),
            p.stderr.to_string(),
            opt(p.analytic),
            p.excess_kurtosis.to_string(),
            p.order.to_string(),
            opt(p.photons),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `bin_center, density, gaussian_overlay`.
pub fn write_histogram_csv(path: &Path, h: &Histogram, mean: f64, width: f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_center", "density", "gaussian_overlay"])?;
    for (&c, &d) in h.centers.iter().zip(&h.densities) {
        w.write_record([
            c.to_string(),
            d.to_string(),
            gaussian_density(c, mean, width).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Config(e.to_string()))?;
    f.write_all(b"\n")?;
    Ok(())
}
