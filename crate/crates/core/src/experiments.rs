//! Numerical experiments built from ensembles: relaxation curves, steady
//! states, detuning sweeps, model comparison and the oracle check.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, RunSection};
use crate::ensemble::{run_ensemble, EnsembleConfig, OutputPlan};
use crate::error::{Error, Result};
use crate::fpe::{relaxation_analytics, LowFieldCoefficients, RelaxationAnalytics};
use crate::oracle::{analytic_deviation, oracle_coefficients, Deviation};
use crate::params::Params;
use crate::stats::{gaussianity, opt, EnsembleSummary, Gaussianity, WidthEstimate};

/// Analytics matching the run: the spontaneous width when the run includes it.
pub fn run_analytics(params: &Params, n_atoms: usize, spontaneous: bool) -> RelaxationAnalytics {
    let an = relaxation_analytics(params, n_atoms);
    if spontaneous {
        an.with_spontaneous()
    } else {
        an
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxOutcome {
    pub analytics: RelaxationAnalytics,
    pub dt: f64,
    pub summary: EnsembleSummary,
}

/// Ensemble from the thermal initial state up to `t_end`, with `outputs`
/// evenly spaced width samples plus one at every snapshot time.
pub fn relax(
    params: &Params,
    run: &RunSection,
    n_atoms: usize,
    t_end: f64,
    outputs: usize,
    snapshot_times: &[f64],
) -> Result<RelaxOutcome> {
    let probe = run.integrator(params, n_atoms, 0);
    let n_steps = ((t_end / probe.dt).round() as usize).max(1);
    let snaps: Vec<usize> = snapshot_times
        .iter()
        .map(|t| ((t / probe.dt).round() as usize).min(n_steps))
        .collect();
    let mut plan = OutputPlan::uniform(n_steps, outputs).with_snapshots(snaps.clone());
    plan.width_steps.extend(snaps);
    plan.width_steps.sort_unstable();
    plan.width_steps.dedup();
    let cfg = EnsembleConfig {
        n_atoms,
        n_trajectories: run.n_trajectories(),
        integrator: run.integrator(params, n_atoms, n_steps),
        initial: run.initial(params),
        plan,
        workers: run.workers,
    };
    let analytics = run_analytics(params, n_atoms, run.spontaneous);
    let mut summary = run_ensemble(params, &cfg)?;
    summary.overlay(&analytics);
    Ok(RelaxOutcome {
        analytics,
        dt: probe.dt,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyOutcome {
    pub delta_c: f64,
    pub params: Params,
    pub analytics: RelaxationAnalytics,
    pub dt: f64,
    pub steady: WidthEstimate,
    /// `Δp_∞` predicted for this run (spontaneous-aware).
    pub analytic: Option<f64>,
    /// Implied `k_B T = Δp_∞²/m` and its standard error.
    pub kbt: (f64, f64),
    pub gaussianity: Gaussianity,
    pub summary: EnsembleSummary,
}

impl SteadyOutcome {
    /// `(Δp_∞ − analytic) / stderr`.
    pub fn z(&self) -> Option<f64> {
        self.analytic
            .map(|a| (self.steady.width - a) / self.steady.stderr)
    }
}

/// Runs for `horizon_rates / Γ_cool` and averages the last `window_fraction`.
pub fn steady(params: &Params, run: &RunSection, n_atoms: usize) -> Result<SteadyOutcome> {
    let analytics = run_analytics(params, n_atoms, run.spontaneous);
    if analytics.gamma_cool <= 0.0 {
        return Err(Error::InvalidParameter(
            "no steady state: the cooling rate is not positive (need Δ_c < 0)".into(),
        ));
    }
    let probe = run.integrator(params, n_atoms, 0);
    let n_steps = (run.horizon_rates / analytics.gamma_cool / probe.dt).ceil() as usize;
    let plan = OutputPlan::uniform(n_steps, 20)
        .with_tail_window(n_steps, run.window_fraction, run.window_samples)
        .with_snapshots(vec![n_steps]);
    let cfg = EnsembleConfig {
        n_atoms,
        n_trajectories: run.n_trajectories(),
        integrator: run.integrator(params, n_atoms, n_steps),
        initial: run.initial(params),
        plan,
        workers: run.workers,
    };
    let mut summary = run_ensemble(params, &cfg)?;
    summary.overlay(&analytics);
    let steady = summary.steady.expect("window was requested");
    let last = &summary.snapshots[0].momenta;
    let gauss = gaussianity(last)?;
    let inv_m = params.inv_mass();
    let kbt = (
        steady.width * steady.width * inv_m,
        2.0 * steady.width * steady.stderr * inv_m,
    );
    let analytic = if run.spontaneous {
        analytics.dp_inf_spont
    } else {
        analytics.dp_inf
    };
    Ok(SteadyOutcome {
        delta_c: params.delta_c,
        params: *params,
        analytics,
        dt: probe.dt,
        steady,
        analytic,
        kbt,
        gaussianity: gauss,
        summary,
    })
}

/// Steady states over `config.sweep.detunings` (in units of `κ`), each at
/// `Ω = pump_ratio · Ω_c`. All points share the seed.
pub fn sweep_detuning(config: &RunConfig, run: &RunSection) -> Result<Vec<SteadyOutcome>> {
    config
        .sweep
        .detunings
        .iter()
        .map(|&r| {
            let p = config.sweep_params(r)?;
            log::info!("sweep point Δc/κ = {r}");
            steady(&p, run, config.n_atoms())
        })
        .collect()
}

/// Index of the smallest simulated width.
pub fn argmin_width(points: &[SteadyOutcome]) -> Option<usize> {
    points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.steady.width.total_cmp(&b.1.steady.width))
        .map(|(i, _)| i)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelAgreement {
    pub delta_c: f64,
    pub a: WidthEstimate,
    pub b: WidthEstimate,
    /// `|Δp_A − Δp_B| / √(se_A² + se_B²)`.
    pub z: f64,
}

pub fn model_agreement(a: &[SteadyOutcome], b: &[SteadyOutcome]) -> Vec<ModelAgreement> {
    a.iter()
        .zip(b)
        .map(|(a, b)| ModelAgreement {
            delta_c: a.delta_c,
            a: a.steady,
            b: b.steady,
            z: (a.steady.width - b.steady.width).abs() / a.steady.stderr.hypot(b.steady.stderr),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub positions: Vec<f64>,
    pub photons: f64,
    pub deviation: Deviation,
    pub condition: f64,
    pub diffusion_asymmetry: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n_max: usize,
    pub bound: f64,
    pub rows: Vec<OracleRow>,
    pub worst: Deviation,
    /// `max|η_oracle| / (S²/κ)` with `Δ_c` tuned so that `Δ_c′ = −κ`.
    pub zero_crossing_residual: f64,
    /// Same residual against the natural size of `η` away from the crossing.
    pub zero_crossing_relative: f64,
}

impl OracleReport {
    pub fn passes(&self) -> bool {
        self.worst.max() <= self.bound && self.zero_crossing_residual <= 1e-3
    }
}

/// Configurations with `|α(x)|² ≤ max_photons`, drawn uniformly, or the explicit list.
pub fn oracle_configurations(config: &RunConfig, params: &Params) -> Vec<Vec<f64>> {
    let o = &config.oracle;
    if !o.positions.is_empty() {
        return o.positions.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut out = Vec::with_capacity(o.configurations);
    let mut tries = 0;
    while out.len() < o.configurations && tries < 1000 * o.configurations.max(1) {
        tries += 1;
        let x: Vec<f64> = (0..config.n_atoms())
            .map(|_| rng.gen::<f64>() * std::f64::consts::TAU)
            .collect();
        if crate::field::snapshot(&x, params, o.spontaneous).n_photons <= o.max_photons {
            out.push(x);
        }
    }
    out
}

pub fn oracle_check(config: &RunConfig, params: &Params) -> Result<OracleReport> {
    let o = &config.oracle;
    let mut rows = Vec::new();
    let mut worst = Deviation::default();
    for x in oracle_configurations(config, params) {
        let oracle = oracle_coefficients(&x, params, o.n_max, o.spontaneous)?;
        let analytic = LowFieldCoefficients::at(&x, params, o.spontaneous);
        let deviation = analytic_deviation(&oracle, &analytic, &x, params);
        worst = worst.worst(deviation);
        rows.push(OracleRow {
            photons: crate::field::snapshot(&x, params, o.spontaneous).n_photons,
            positions: x,
            deviation,
            condition: oracle.condition,
            diffusion_asymmetry: oracle.diffusion_asymmetry,
        });
    }
    // Δ_c′ = Δ_c − U Σcos² = −κ for a fixed generic configuration
    let x = [0.4, 1.3, 2.2, 3.9, 5.0];
    let x = &x[..config.n_atoms().min(5)];
    let (_, c2) = crate::field::cos_sums(x);
    let tuned = params.with_delta_c(-params.kappa + params.shift_u() * c2)?;
    let eta = oracle_coefficients(x, &tuned, o.n_max, false)?.cross;
    let zero_crossing_residual = eta.amax() * tuned.kappa / tuned.pump_s().powi(2);
    let zero_crossing_relative = eta.amax() / crate::oracle::cross_scale(x, &tuned);
    Ok(OracleReport {
        n_max: o.n_max,
        bound: o.bound,
        rows,
        worst,
        zero_crossing_residual,
        zero_crossing_relative,
    })
}

/// `delta_c, delta_c_over_kappa, dp_inf, stderr, dp_analytic, dp_analytic_spont, excess_kurtosis, kbt, kbt_stderr`.
pub fn write_sweep_csv(path: &Path, points: &[SteadyOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "delta_c",
        "delta_c_over_kappa",
        "dp_inf",
        "stderr",
        "dp_analytic",
        "dp_analytic_spont",
        "excess_kurtosis",
        "kbt",
        "kbt_stderr",
    ])?;
    for p in points {
        w.write_record([
            p.delta_c.to_string(),
            (p.delta_c / p.params.kappa).to_string(),
            p.steady.width.to_string(),
            p.steady.stderr.to_string(),
            opt(p.analytics.dp_inf),
            opt(p.analytics.dp_inf_spont),
            p.gaussianity.excess_kurtosis.to_string(),
            p.kbt.0.to_string(),
            p.kbt.1.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `delta_c, dp_a, stderr_a, dp_b, stderr_b, z`.
pub fn write_comparison_csv(path: &Path, rows: &[ModelAgreement]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["delta_c", "dp_a", "stderr_a", "dp_b", "stderr_b", "z"])?;
    for r in rows {
        w.write_record([
            r.delta_c.to_string(),
            r.a.width.to_string(),
            r.a.stderr.to_string(),
            r.b.width.to_string(),
            r.b.stderr.to_string(),
            r.z.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `positions, photons, drift, friction, diffusion, cross, max`.
pub fn write_oracle_csv(path: &Path, report: &OracleReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "positions",
        "photons",
        "drift",
        "friction",
        "diffusion",
        "cross",
        "max",
    ])?;
    for r in &report.rows {
        let pos = r
            .positions
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(" ");
        w.write_record([
            pos,
            r.photons.to_string(),
            r.deviation.drift.to_string(),
            r.deviation.friction.to_string(),
            r.deviation.diffusion.to_string(),
            r.deviation.cross.to_string(),
            r.deviation.max().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::Model;

    fn quick_run() -> RunSection {
        RunSection {
            trajectories: 40,
            horizon_rates: 0.2,
            window_samples: 20,
            ..RunSection::default()
        }
    }

    #[test]
    fn steady_rejects_blue_detuning() {
        let p = Params::reference().with_delta_c(0.5).unwrap();
        assert!(steady(&p, &quick_run(), 5).is_err());
    }

    #[test]
    fn relax_includes_snapshot_times() {
        let p = Params::reference();
        let r = relax(&p, &quick_run(), 5, 200.0, 4, &[10.0, 200.0]).unwrap();
        assert_eq!(r.summary.snapshots.len(), 2);
        let ts = r.summary.snapshots[0].time;
        assert!((ts - 10.0).abs() <= r.dt);
        assert!(r.summary.points.iter().any(|q| q.time == ts));
        assert_eq!(
            r.summary.points[0].analytic,
            Some(r.summary.points[0].width)
        );
    }

    #[test]
    fn sweep_and_compare_shapes() {
        let mut c = RunConfig::default();
        c.sweep.detunings = vec![-1.0, -0.5];
        let mut run = quick_run();
        run.trajectories = 20;
        run.horizon_rates = 0.05;
        let a = sweep_detuning(&c, &run).unwrap();
        run.model = Model::B;
        let b = sweep_detuning(&c, &run).unwrap();
        let cmp = model_agreement(&a, &b);
        assert_eq!(cmp.len(), 2);
        assert!(cmp.iter().all(|r| r.z.is_finite()));
        let dir = tempfile::tempdir().unwrap();
        write_sweep_csv(&dir.path().join("s.csv"), &a).unwrap();
        write_comparison_csv(&dir.path().join("c.csv"), &cmp).unwrap();
        let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn oracle_configurations_respect_photon_bound() {
        let c = RunConfig::default();
        let p = c.params().unwrap();
        let xs = oracle_configurations(&c, &p);
        assert_eq!(xs.len(), c.oracle.configurations);
        for x in xs {
            assert!(crate::field::snapshot(&x, &p, true).n_photons <= 0.02);
        }
    }
}
