//! Parallel trajectory ensembles with scheduling-independent results.
//!
//! Trajectory `i` draws from `ChaCha8(seed)` on stream `i`, so its path does not
//! depend on which worker runs it. Trajectories are processed in fixed-size
//! blocks; each block is mapped in parallel and then folded into the summary
//! in trajectory order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;
use crate::sde::{
    finite_a, finite_b, IntegratorConfig, KernelA, KernelB, Model, StepCounters, TrajectoryStateA,
    TrajectoryStateB,
};
use crate::stats::{
    order_parameter, sample_initial, sample_initial_b, BatchMean, EnsembleSummary,
    InitialCondition, Moments, Snapshot, TimePoint, WindowWidth,
};

const BLOCK: usize = 64;

/// Largest tolerated fraction of aborted trajectories.
pub const ABORT_LIMIT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyWindow {
    pub start_step: usize,
    /// Sample every `stride` steps inside the window.
    pub stride: usize,
}

/// Which steps produce output. Step `k` is the state after `k` steps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPlan {
    pub width_steps: Vec<usize>,
    pub snapshot_steps: Vec<usize>,
    pub window: Option<SteadyWindow>,
}

impl OutputPlan {
    /// `count` output steps spaced evenly over `n_steps`, including 0 and `n_steps`.
    pub fn uniform(n_steps: usize, count: usize) -> Self {
        let count = count.max(1);
        let mut steps: Vec<usize> = (0..=count).map(|i| i * n_steps / count).collect();
        steps.dedup();
        Self {
            width_steps: steps,
            ..Self::default()
        }
    }

    /// Window over the last `fraction` of the run.
    pub fn with_tail_window(mut self, n_steps: usize, fraction: f64, samples: usize) -> Self {
        let start = ((1.0 - fraction) * n_steps as f64).round() as usize;
        let stride = ((n_steps - start) / samples.max(1)).max(1);
        self.window = Some(SteadyWindow {
            start_step: start,
            stride,
        });
        self
    }

    pub fn with_snapshots(mut self, steps: Vec<usize>) -> Self {
        self.snapshot_steps = steps;
        self
    }

    fn normalized(&self) -> Self {
        let mut s = self.clone();
        s.width_steps.sort_unstable();
        s.width_steps.dedup();
        s.snapshot_steps.sort_unstable();
        s.snapshot_steps.dedup();
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_atoms: usize,
    pub n_trajectories: usize,
    pub integrator: IntegratorConfig,
    pub initial: InitialCondition,
    pub plan: OutputPlan,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        self.initial.validate()?;
        if self.n_atoms == 0 || self.n_trajectories == 0 {
            return Err(Error::InvalidParameter(
                "need at least one atom and one trajectory".into(),
            ));
        }
        if let Some(w) = self.plan.window {
            if w.stride == 0 || w.start_step > self.integrator.n_steps {
                return Err(Error::InvalidParameter(
                    "steady window outside the run".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct TrajectoryRecord {
    widths: Vec<Moments>,
    order: Vec<f64>,
    photons: Vec<f64>,
    snapshots: Vec<Vec<f64>>,
    window: Option<(f64, f64, f64)>,
    counters: StepCounters,
    aborted: bool,
}

enum Kernel {
    A(KernelA, TrajectoryStateA),
    B(KernelB, TrajectoryStateB),
}

impl Kernel {
    fn step(&mut self, rng: &mut ChaCha8Rng) {
        match self {
            Kernel::A(k, s) => k.step(s, rng),
            Kernel::B(k, s) => k.step(s, rng),
        }
    }

    fn x(&self) -> &[f64] {
        match self {
            Kernel::A(_, s) => &s.x,
            Kernel::B(_, s) => &s.x,
        }
    }

    fn p(&self) -> &[f64] {
        match self {
            Kernel::A(_, s) => &s.p,
            Kernel::B(_, s) => &s.p,
        }
    }

    fn photons(&self) -> f64 {
        match self {
            Kernel::A(..) => 0.0,
            Kernel::B(_, s) => s.alpha_r * s.alpha_r + s.alpha_i * s.alpha_i,
        }
    }

    fn finite(&self) -> bool {
        match self {
            Kernel::A(_, s) => finite_a(s),
            Kernel::B(_, s) => finite_b(s),
        }
    }

    fn counters(&self) -> StepCounters {
        match self {
            Kernel::A(..) => StepCounters::default(),
            Kernel::B(k, _) => k.counters,
        }
    }
}

fn run_trajectory(
    params: &Params,
    cfg: &EnsembleConfig,
    plan: &OutputPlan,
    index: usize,
) -> TrajectoryRecord {
    let ic = &cfg.integrator;
    let mut rng = ChaCha8Rng::seed_from_u64(ic.seed);
    rng.set_stream(index as u64);
    let mut kernel = match ic.model {
        Model::A => Kernel::A(
            KernelA::new(params, ic, cfg.n_atoms),
            sample_initial(params, cfg.n_atoms, &cfg.initial, &mut rng),
        ),
        Model::B => Kernel::B(
            KernelB::new(params, ic, cfg.n_atoms),
            sample_initial_b(params, cfg.n_atoms, &cfg.initial, ic.field_init, &mut rng),
        ),
    };
    let mut rec = TrajectoryRecord::default();
    let (mut wi, mut si) = (0, 0);
    let (mut w_p, mut w_p2, mut w_ph, mut w_n) = (0.0, 0.0, 0.0, 0u64);
    let n_atoms = cfg.n_atoms as f64;
    for step in 0..=ic.n_steps {
        if step > 0 {
            kernel.step(&mut rng);
            // checking every step costs more than the step itself
            if step % 64 == 0 || step == ic.n_steps {
                if !kernel.finite() {
                    log::debug!("trajectory {index} non-finite near step {step}");
                    rec.aborted = true;
                    return rec;
                }
            }
        }
        while wi < plan.width_steps.len() && plan.width_steps[wi] == step {
            let mut m = Moments::default();
            m.extend(kernel.p());
            rec.widths.push(m);
            rec.order.push(order_parameter(kernel.x()));
            rec.photons.push(kernel.photons());
            wi += 1;
        }
        while si < plan.snapshot_steps.len() && plan.snapshot_steps[si] == step {
            rec.snapshots.push(kernel.p().to_vec());
            si += 1;
        }
        if let Some(w) = plan.window {
            if step >= w.start_step && (step - w.start_step) % w.stride == 0 {
                let p = kernel.p();
                w_p += p.iter().sum::<f64>() / n_atoms;
                w_p2 += p.iter().map(|v| v * v).sum::<f64>() / n_atoms;
                w_ph += kernel.photons();
                w_n += 1;
            }
        }
    }
    if w_n > 0 {
        let n = w_n as f64;
        rec.window = Some((w_p / n, w_p2 / n, w_ph / n));
    }
    rec.counters = kernel.counters();
    rec
}

/// Runs `cfg.n_trajectories` independent trajectories and reduces them.
pub fn run_ensemble(params: &Params, cfg: &EnsembleConfig) -> Result<EnsembleSummary> {
    cfg.validate()?;
    let stiff = cfg.integrator.stiffness(params, cfg.n_atoms);
    if stiff > crate::sde::STABILITY_WARN {
        log::warn!(
            "dt = {} is large against the fastest rate (dt·rate = {stiff:.3})",
            cfg.integrator.dt
        );
    }
    let plan = cfg.plan.normalized();
    let pool = if cfg.workers > 0 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?,
        )
    } else {
        None
    };

    let k = plan.width_steps.len();
    let mut widths = vec![Moments::default(); k];
    let mut order = vec![0.0; k];
    let mut photons = vec![0.0; k];
    let mut snaps: Vec<Vec<f64>> = vec![Vec::new(); plan.snapshot_steps.len()];
    let mut window = WindowWidth::default();
    let mut window_ph = BatchMean::default();
    let mut counters = StepCounters::default();
    let (mut aborted, mut kept) = (0usize, 0usize);

    let mut start = 0;
    while start < cfg.n_trajectories {
        let end = (start + BLOCK).min(cfg.n_trajectories);
        let map = || -> Vec<TrajectoryRecord> {
            (start..end)
                .into_par_iter()
                .map(|i| run_trajectory(params, cfg, &plan, i))
                .collect()
        };
        let block = match &pool {
            Some(p) => p.install(map),
            None => map(),
        };
        for r in block {
            if r.aborted {
                aborted += 1;
                continue;
            }
            kept += 1;
            for i in 0..k {
                widths[i].merge(&r.widths[i]);
                order[i] += r.order[i];
                photons[i] += r.photons[i];
            }
            for (s, v) in snaps.iter_mut().zip(&r.snapshots) {
                s.extend_from_slice(v);
            }
            if let Some((m1, m2, ph)) = r.window {
                window.push(m1, m2);
                window_ph.push(ph);
            }
            counters.merge(&r.counters);
        }
        start = end;
    }
    if aborted as f64 > ABORT_LIMIT * cfg.n_trajectories as f64 {
        return Err(Error::AbortRate {
            aborted,
            total: cfg.n_trajectories,
        });
    }
    if aborted > 0 {
        log::warn!("{aborted} trajectories became non-finite and were dropped");
    }
    if counters.clipped_steps > 0 || counters.residual_clips > 0 {
        log::warn!(
            "noise covariance clipped in {} steps (max fraction {:e}), {} conditional clips",
            counters.clipped_steps,
            counters.max_clipped_fraction,
            counters.residual_clips
        );
    }

    let dt = cfg.integrator.dt;
    let is_b = cfg.integrator.model == Model::B;
    let mut points = Vec::with_capacity(k);
    for (i, &step) in plan.width_steps.iter().enumerate() {
        let w = widths[i].width()?;
        points.push(TimePoint {
            time: step as f64 * dt,
            time_ms: 0.0,
            width: w.width,
            stderr: w.stderr,
            analytic: None,
            excess_kurtosis: widths[i].excess_kurtosis(),
            order: order[i] / kept as f64,
            photons: is_b.then(|| photons[i] / kept as f64),
        });
    }
    let snapshots = plan
        .snapshot_steps
        .iter()
        .zip(snaps)
        .map(|(&s, momenta)| Snapshot {
            time: s as f64 * dt,
            momenta,
        })
        .collect();
    let steady = match plan.window {
        Some(_) => Some(window.estimate()?),
        None => None,
    };
    Ok(EnsembleSummary {
        n_trajectories: kept,
        n_atoms: cfg.n_atoms,
        points,
        snapshots,
        steady,
        steady_photons: (is_b && plan.window.is_some())
            .then(|| (window_ph.mean(), window_ph.stderr())),
        aborted,
        counters,
    })
}
