//! Public-API round trips: configuration to ensemble to files.

use cavcool::config::{RunConfig, RunManifest};
use cavcool::experiments;
use cavcool::fpe::{relaxation_analytics, width_evolution};
use cavcool::sde::Model;
use cavcool::stats::{self, Binning};

fn short_config(text: &str) -> RunConfig {
    let mut c = RunConfig::from_toml(text).unwrap();
    c.run.trajectories = 96;
    c
}

#[test]
fn toml_overrides_reach_the_parameters() {
    let c = RunConfig::from_toml(
        "[atom]\nn = 3\ncollective_shift = 0.1\n[cavity]\nlinewidth = 1.0\ndetuning = -1.0\n[drive]\nover_threshold = 0.2\n",
    )
    .unwrap();
    let p = c.params().unwrap();
    assert_eq!(c.n_atoms(), 3);
    assert_eq!(p.kappa, 1.0);
    assert!((3.0 * p.shift_u() / p.delta_c - 0.1).abs() < 1e-12);
    let oc = cavcool::field::threshold_pump(&p, 3).unwrap();
    assert!((p.omega / oc - 0.2).abs() < 1e-9);
}

#[test]
fn relaxation_files_are_consistent_with_the_summary() {
    let c = short_config("");
    let p = c.params().unwrap();
    let units = c.units();
    let t_end = units.ms_to_time(0.3);
    let mut r = experiments::relax(&p, &c.run, 5, t_end, 6, &[t_end]).unwrap();
    r.summary.set_times_ms(&units);

    let dir = tempfile::tempdir().unwrap();
    let widths = dir.path().join("w.csv");
    stats::write_width_csv(&widths, &r.summary).unwrap();
    let mut rdr = csv::Reader::from_path(&widths).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), r.summary.points.len());
    for (row, pt) in rows.iter().zip(&r.summary.points) {
        let dp: f64 = row[2].parse().unwrap();
        assert_eq!(dp, pt.width);
        let an: f64 = row[4].parse().unwrap();
        let expect = width_evolution(r.summary.points[0].width, pt.time, &r.analytics);
        assert!((an - expect).abs() < 1e-12);
    }

    let snap = &r.summary.snapshots[0].momenta;
    assert_eq!(snap.len(), 96 * 5);
    let h = stats::histogram(snap, Binning::FreedmanDiaconis).unwrap();
    assert!((h.integral() - 1.0).abs() < 1e-12);
    let w = stats::pooled_width(snap).unwrap();
    stats::write_histogram_csv(&dir.path().join("h.csv"), &h, 0.0, w.width).unwrap();

    let manifest = RunManifest::new("relax", &c, &p);
    stats::write_json(&dir.path().join("m.json"), &manifest).unwrap();
    let back: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(back["seed"], 1);
}

#[test]
fn short_sweep_and_comparison_shapes() {
    let mut c = short_config("[sweep]\ndetunings = [-1.25, -0.6]\n[run]\nhorizon_rates = 0.02\n");
    c.run.trajectories = 64;
    let a = experiments::sweep_detuning(&c, &c.run).unwrap();
    let mut run_b = c.run.clone();
    run_b.model = Model::B;
    let b = experiments::sweep_detuning(&c, &run_b).unwrap();
    assert_eq!(a.len(), 2);
    for (pa, pb) in a.iter().zip(&b) {
        assert_eq!(pa.delta_c, pb.delta_c);
        assert!(pa.steady.width > 0.0 && pb.steady.width > 0.0);
        assert!(pb.summary.steady_photons.is_some());
        assert!(pa.summary.steady_photons.is_none());
    }
    let rows = experiments::model_agreement(&a, &b);
    let dir = tempfile::tempdir().unwrap();
    experiments::write_sweep_csv(&dir.path().join("s.csv"), &a).unwrap();
    experiments::write_comparison_csv(&dir.path().join("c.csv"), &rows).unwrap();
    let n = csv::Reader::from_path(dir.path().join("c.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(n, 2);
}

#[test]
fn analytics_match_reference_numbers() {
    let p = RunConfig::default().params().unwrap();
    let an = relaxation_analytics(&p, 5);
    assert!((an.dp_inf.unwrap() - 9.854).abs() < 1e-3);
    assert!((an.kbt.unwrap() - 0.25).abs() < 1e-9);
}
