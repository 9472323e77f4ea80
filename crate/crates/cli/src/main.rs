use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cavcool::config::{RunConfig, RunManifest};
use cavcool::experiments::{self, SteadyOutcome};
use cavcool::params::{validate_regime, Verdict};
use cavcool::sde::Model;
use cavcool::stats::{self, Binning};
use cavcool::{Error, Params};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "cavcool",
    version,
    about = "Semiclassical cavity cooling simulator"
)]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    trajectories: Option<usize>,
    /// Use the small ensemble size (200 trajectories)
    #[arg(long, global = true)]
    fast: bool,
    #[arg(long, global = true)]
    spontaneous: bool,
    #[arg(long, global = true)]
    cross_noise: bool,
    #[arg(long, global = true, value_enum)]
    model: Option<ModelArg>,
    /// Time step in units of 2/γ
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    A,
    B,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Momentum width from the thermal start up to t_end
    Relax {
        #[arg(long)]
        t_end_ms: Option<f64>,
    },
    /// Stationary width at the configured detuning
    Steady,
    /// Stationary width over Δc at fixed Ω/Ω_c
    SweepDetuning {
        /// Δc/κ values, comma separated
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        detunings: Option<Vec<f64>>,
    },
    /// Sweep with both trajectory models side by side
    CompareModels {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        detunings: Option<Vec<f64>>,
        /// Trajectories for model B (defaults to the model A count)
        #[arg(long)]
        trajectories_b: Option<usize>,
    },
    /// Analytic low-field coefficients against the truncated-Fock oracle
    OracleCheck {
        #[arg(long)]
        bound: Option<f64>,
        #[arg(long)]
        configurations: Option<usize>,
    },
    /// Couplings, threshold, photon number and regime checks
    FieldInfo {
        /// Atom positions (units of 1/k), comma separated
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        positions: Option<Vec<f64>>,
    },
    /// Closed-form relaxation analytics
    Analytics,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Relax { .. } => "relax",
            Command::Steady => "steady",
            Command::SweepDetuning { .. } => "sweep-detuning",
            Command::CompareModels { .. } => "compare-models",
            Command::OracleCheck { .. } => "oracle-check",
            Command::FieldInfo { .. } => "field-info",
            Command::Analytics => "analytics",
        }
    }
}

enum Failure {
    Usage(String),
    Numerical(String),
    Bound(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_)
            | Error::Config(_)
            | Error::ZeroAtomDetuning
            | Error::ThresholdDiverges
            | Error::Io(_)
            | Error::Csv(_) => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Bound(m)) => {
            eprintln!("acceptance bound violated: {m}");
            ExitCode::from(3)
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut c = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.run.seed = s;
    }
    if let Some(w) = cli.workers {
        c.run.workers = w;
    }
    if let Some(n) = cli.trajectories {
        c.run.trajectories = n;
    }
    c.run.fast |= cli.fast;
    c.run.spontaneous |= cli.spontaneous;
    c.run.cross_noise |= cli.cross_noise;
    if let Some(m) = cli.model {
        c.run.model = match m {
            ModelArg::A => Model::A,
            ModelArg::B => Model::B,
        };
    }
    if cli.dt.is_some() {
        c.run.dt = cli.dt;
    }
    match &cli.command {
        Command::Relax { t_end_ms: Some(t) } => c.relax.t_end_ms = *t,
        Command::SweepDetuning { detunings: Some(d) }
        | Command::CompareModels {
            detunings: Some(d), ..
        } => c.sweep.detunings = d.clone(),
        Command::OracleCheck {
            bound,
            configurations,
        } => {
            if let Some(b) = bound {
                c.oracle.bound = *b;
            }
            if let Some(n) = configurations {
                c.oracle.configurations = *n;
            }
        }
        _ => {}
    }
    c.validate()?;
    Ok(c)
}

struct Outputs {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Outputs {
    fn new(dir: &Path, manifest: RunManifest) -> Result<Self, Failure> {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(mut self) -> Result<(), Failure> {
        let p = self.path("manifest.json");
        stats::write_json(&p, &self.manifest)?;
        println!(
            "wrote {} files to {}",
            self.manifest.outputs.len(),
            self.dir.display()
        );
        Ok(())
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = resolve_config(cli)?;
    let params = config.params()?;
    let n = config.n_atoms();
    let units = config.units();
    let name = cli.command.name();
    match &cli.command {
        Command::Analytics => {
            print_analytics(&params, n, &units);
            Ok(())
        }
        Command::FieldInfo { positions } => field_info(&params, n, positions.as_deref()),
        Command::Relax { .. } => {
            let mut out = Outputs::new(&cli.out_dir, RunManifest::new(name, &config, &params))?;
            let t_end = units.ms_to_time(config.relax.t_end_ms);
            let snaps: Vec<f64> = config
                .relax
                .snapshots_ms
                .iter()
                .map(|&ms| units.ms_to_time(ms))
                .collect();
            let mut r =
                experiments::relax(&params, &config.run, n, t_end, config.relax.outputs, &snaps)?;
            r.summary.set_times_ms(&units);
            stats::write_width_csv(&out.path("relax_widths.csv"), &r.summary)?;
            for s in &r.summary.snapshots {
                write_snapshot(
                    &mut out,
                    &format!("relax_hist_{:.3}ms.csv", units.time_to_ms(s.time)),
                    &s.momenta,
                )?;
            }
            println!(
                "{:>10} {:>10} {:>8} {:>10} {:>6}",
                "t_ms", "dp", "stderr", "analytic", "z"
            );
            for p in &r.summary.points {
                let a = p.analytic.unwrap_or(f64::NAN);
                println!(
                    "{:>10.4} {:>10.4} {:>8.4} {:>10.4} {:>6.2}",
                    p.time_ms,
                    p.width,
                    p.stderr,
                    a,
                    (p.width - a) / p.stderr
                );
            }
            report_counters(&r.summary);
            stats::write_json(&out.path("report.json"), &r)?;
            out.finish()
        }
        Command::Steady => {
            let mut out = Outputs::new(&cli.out_dir, RunManifest::new(name, &config, &params))?;
            let mut s = experiments::steady(&params, &config.run, n)?;
            s.summary.set_times_ms(&units);
            stats::write_width_csv(&out.path("steady_widths.csv"), &s.summary)?;
            write_snapshot(&mut out, "steady_hist.csv", &s.summary.snapshots[0].momenta)?;
            print_steady_table(std::slice::from_ref(&s), &units);
            report_counters(&s.summary);
            stats::write_json(&out.path("report.json"), &s)?;
            out.finish()
        }
        Command::SweepDetuning { .. } => {
            let mut out = Outputs::new(&cli.out_dir, RunManifest::new(name, &config, &params))?;
            let pts = experiments::sweep_detuning(&config, &config.run)?;
            experiments::write_sweep_csv(&out.path("sweep.csv"), &pts)?;
            for p in &pts {
                let f = format!("sweep_hist_{:.3}.csv", p.delta_c / p.params.kappa);
                write_snapshot(&mut out, &f, &p.summary.snapshots[0].momenta)?;
            }
            print_steady_table(&pts, &units);
            if let Some(i) = experiments::argmin_width(&pts) {
                println!(
                    "smallest width at Δc/κ = {:.3}",
                    pts[i].delta_c / pts[i].params.kappa
                );
            }
            stats::write_json(&out.path("report.json"), &pts)?;
            out.finish()
        }
        Command::CompareModels { trajectories_b, .. } => {
            let mut out = Outputs::new(&cli.out_dir, RunManifest::new(name, &config, &params))?;
            let mut run_a = config.run.clone();
            run_a.model = Model::A;
            let mut run_b = config.run.clone();
            run_b.model = Model::B;
            run_b.cross_noise = false;
            if let Some(nb) = trajectories_b {
                run_b.trajectories = *nb;
            }
            let a = experiments::sweep_detuning(&config, &run_a)?;
            let b = experiments::sweep_detuning(&config, &run_b)?;
            experiments::write_sweep_csv(&out.path("sweep_a.csv"), &a)?;
            experiments::write_sweep_csv(&out.path("sweep_b.csv"), &b)?;
            let rows = experiments::model_agreement(&a, &b);
            experiments::write_comparison_csv(&out.path("compare.csv"), &rows)?;
            println!(
                "{:>8} {:>10} {:>8} {:>10} {:>8} {:>6}",
                "dc/k", "dp_A", "se_A", "dp_B", "se_B", "z"
            );
            for r in &rows {
                println!(
                    "{:>8.3} {:>10.4} {:>8.4} {:>10.4} {:>8.4} {:>6.2}",
                    r.delta_c / params.kappa,
                    r.a.width,
                    r.a.stderr,
                    r.b.width,
                    r.b.stderr,
                    r.z
                );
            }
            let worst = rows.iter().map(|r| r.z).fold(0.0, f64::max);
            println!("largest combined z = {worst:.2}");
            stats::write_json(&out.path("report.json"), &rows)?;
            out.finish()
        }
        Command::OracleCheck { .. } => {
            let mut out = Outputs::new(&cli.out_dir, RunManifest::new(name, &config, &params))?;
            let rep = experiments::oracle_check(&config, &params)?;
            experiments::write_oracle_csv(&out.path("oracle.csv"), &rep)?;
            println!(
                "{:>4} {:>9} {:>10} {:>10} {:>10} {:>10}",
                "#", "photons", "drift", "friction", "diffusion", "cross"
            );
            for (i, r) in rep.rows.iter().enumerate() {
                let d = r.deviation;
                println!(
                    "{:>4} {:>9.5} {:>10.2e} {:>10.2e} {:>10.2e} {:>10.2e}",
                    i, r.photons, d.drift, d.friction, d.diffusion, d.cross
                );
            }
            println!(
                "worst: drift {:.2e} friction {:.2e} diffusion {:.2e} cross {:.2e} (bound {:.1e})",
                rep.worst.drift,
                rep.worst.friction,
                rep.worst.diffusion,
                rep.worst.cross,
                rep.bound
            );
            println!(
                "η at Δc' = −κ: {:.2e} of S²/κ ({:.2e} of its off-crossing size)",
                rep.zero_crossing_residual, rep.zero_crossing_relative
            );
            stats::write_json(&out.path("report.json"), &rep)?;
            let pass = rep.passes();
            out.finish()?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Bound(format!(
                    "largest deviation {:.3e} exceeds {:.1e}",
                    rep.worst.max(),
                    rep.bound
                )))
            }
        }
    }
}

fn write_snapshot(out: &mut Outputs, name: &str, momenta: &[f64]) -> Result<(), Failure> {
    let w = stats::pooled_width(momenta)?;
    let mean = momenta.iter().sum::<f64>() / momenta.len() as f64;
    let h = stats::histogram(momenta, Binning::FreedmanDiaconis)?;
    stats::write_histogram_csv(&out.path(name), &h, mean, w.width)?;
    Ok(())
}

fn report_counters(s: &stats::EnsembleSummary) {
    println!(
        "trajectories {} (aborted {}), clipped steps {}, conditional clips {}",
        s.n_trajectories, s.aborted, s.counters.clipped_steps, s.counters.residual_clips
    );
}

fn print_steady_table(points: &[SteadyOutcome], units: &cavcool::params::UnitSystem) {
    println!(
        "{:>8} {:>10} {:>8} {:>10} {:>6} {:>9} {:>10}",
        "dc/k", "dp_inf", "stderr", "analytic", "z", "kurtosis", "T_uK"
    );
    for p in points {
        println!(
            "{:>8.3} {:>10.4} {:>8.4} {:>10.4} {:>6.2} {:>9.3} {:>10.3}",
            p.delta_c / p.params.kappa,
            p.steady.width,
            p.steady.stderr,
            p.analytic.unwrap_or(f64::NAN),
            p.z().unwrap_or(f64::NAN),
            p.gaussianity.excess_kurtosis,
            units.kelvin(p.kbt.0) * 1e6
        );
    }
}

fn print_analytics(params: &Params, n: usize, units: &cavcool::params::UnitSystem) {
    let an = cavcool::fpe::relaxation_analytics(params, n);
    let na = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.6}"));
    println!("A            {:.6e}", an.a);
    println!("B            {:.6e}", an.b);
    println!("delta1       {:.6}", an.delta1);
    println!("delta2       {:.6}", an.delta2);
    println!("dp_inf       {}", na(an.dp_inf));
    println!("kBT          {}", na(an.kbt));
    println!("T_uK         {}", na(an.kbt.map(|k| units.kelvin(k) * 1e6)));
    println!("gamma_cool   {:.6e}", an.gamma_cool);
    println!("gamma_cool/ms {:.6}", an.gamma_cool / units.time_to_ms(1.0));
    println!("dp_inf_spont {}", na(an.dp_inf_spont));
    println!("spont_ratio  {:.6}", an.spontaneous_ratio);
}

fn field_info(params: &Params, n: usize, positions: Option<&[f64]>) -> Result<(), Failure> {
    println!("U            {:.6e}", params.shift_u());
    println!("S            {:.6e}", params.pump_s());
    println!("s = S/U      {:.6}", params.ratio_s());
    println!("gamma'       {:.6e}", params.gamma_prime());
    println!("cooperativity {:.6}", params.cooperativity());
    println!("omega_r      {:.6e}", params.omega_r);
    println!(
        "NU/dc        {:.6}",
        n as f64 * params.shift_u() / params.delta_c
    );
    match cavcool::field::threshold_pump(params, n) {
        Ok(oc) => println!(
            "Omega_c      {oc:.6}  (Omega/Omega_c = {:.4})",
            params.omega / oc
        ),
        Err(e) => println!("Omega_c      {e}"),
    }
    println!(
        "n_cav        {:.6}",
        cavcool::field::mean_photon_number_uniform(params, n)
    );
    if let Some(x) = positions {
        let f = cavcool::field::snapshot(x, params, true);
        println!(
            "alpha        {:.6e} {:+.6e}i  |alpha|^2 {:.6e}  kappa' {:.6}  delta_c' {:.6}",
            f.alpha.re, f.alpha.im, f.n_photons, f.kappa_eff, f.delta_eff
        );
    }
    let dp = cavcool::fpe::relaxation_analytics(params, n)
        .dp_inf
        .unwrap_or(10.0);
    for d in validate_regime(params, dp, n) {
        let v = match d.verdict {
            Verdict::Pass => "ok",
            Verdict::Warn => "WARN",
        };
        println!(
            "{:<36} {:>10.4} (limit {:.2}) {v}",
            d.name, d.ratio, d.limit
        );
    }
    Ok(())
}
