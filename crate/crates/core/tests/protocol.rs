use std::fs;

use quads_core::ec3::generate_usa_instance;
use quads_core::experiments::{
    campaign_instances, median_with_ci, read_summary_csv, records_path, run_noiseless_campaign,
    run_noisy_campaign, CampaignConfig,
};
use quads_core::noise::{NoiseParams, Polarization};
use quads_core::protocol::{
    hunt_runtime, read_records_jsonl, run_once, EngineSettings, HuntConfig, SeedLineage,
};
use quads_core::Seed;
use rand::Rng;

fn lineage(k: u64) -> SeedLineage {
    SeedLineage {
        master: Seed(0),
        instance: Seed(k),
        realization: None,
    }
}

#[test]
fn noiseless_hunts_land_in_window_near_reported_scale() {
    let cfg = HuntConfig::default();
    let mut ts = Vec::new();
    let mut integrations = 0;
    for k in 0..40 {
        let inst = generate_usa_instance(7, Seed(1000 + k)).unwrap();
        let r = hunt_runtime(&inst, None, k as usize, 0, &cfg, &lineage(k)).unwrap();
        assert!((0.12..=0.13).contains(&r.p_success));
        assert_eq!(r.integrations, r.trace.len());
        integrations += r.integrations;
        ts.push(r.t_star);
    }
    let m = median_with_ci(7, &ts).unwrap();
    let reference = 0.11966 * 7f64.powf(2.0034);
    println!(
        "N=7 median T* = {:.3} (reference {reference:.3}), mean integrations {:.2}",
        m.median,
        integrations as f64 / 40.0
    );
    assert!((m.median / reference - 1.0).abs() <= 0.5);
}

#[test]
fn hunts_are_deterministic() {
    let inst = generate_usa_instance(7, Seed(5)).unwrap();
    let noise = NoiseParams::new(0.005, 0.04, 1.0, Polarization::Y).unwrap();
    let seeds = SeedLineage {
        realization: Some(Seed(9)),
        ..lineage(5)
    };
    let a = hunt_runtime(&inst, Some(&noise), 5, 2, &HuntConfig::default(), &seeds).unwrap();
    let b = hunt_runtime(&inst, Some(&noise), 5, 2, &HuntConfig::default(), &seeds).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert!((0.12..=0.13).contains(&a.p_success));
    assert!(hunt_runtime(
        &inst,
        Some(&noise),
        5,
        2,
        &HuntConfig::default(),
        &lineage(5)
    )
    .is_err());
}

#[test]
fn exhausted_hunt_reports_trace() {
    let inst = generate_usa_instance(6, Seed(5)).unwrap();
    let cfg = HuntConfig {
        max_integrations: 2,
        initial_guess: 1e-3,
        ..HuntConfig::default()
    };
    match hunt_runtime(&inst, None, 0, 0, &cfg, &lineage(0)) {
        Err(quads_core::Error::HuntFailed {
            integrations,
            trace,
        }) => {
            assert_eq!(integrations, 2);
            assert_eq!(trace.len(), 2);
            assert!(trace[1].t > trace[0].t);
        }
        other => panic!("expected a hunt failure, got {other:?}"),
    }
}

#[test]
fn hunt_stops_at_the_runtime_ceiling() {
    let inst = generate_usa_instance(6, Seed(5)).unwrap();
    let cfg = HuntConfig {
        initial_guess: 1e-3,
        max_time_factor: 4.0,
        ..HuntConfig::default()
    };
    match hunt_runtime(&inst, None, 0, 0, &cfg, &lineage(0)) {
        Err(quads_core::Error::HuntFailed { trace, .. }) => {
            assert_eq!(trace.len(), 4);
            assert!(trace.iter().all(|p| p.t <= 4e-3));
        }
        other => panic!("expected a hunt failure, got {other:?}"),
    }
}

#[test]
fn adiabatic_limit_is_reachable() {
    let inst = generate_usa_instance(8, Seed(88)).unwrap();
    let engine = EngineSettings::default();
    let r = hunt_runtime(&inst, None, 0, 0, &HuntConfig::default(), &lineage(88)).unwrap();
    let mut t = r.t_star;
    let mut best = 0.0f64;
    while t <= 50.0 * r.t_star {
        let (p, _) = run_once(&inst, None, t, &engine).unwrap();
        best = best.max(p);
        if p >= 0.9 {
            break;
        }
        t *= 2.0;
    }
    assert!(
        best >= 0.9,
        "best P_s {best} up to 50 T* = {}",
        50.0 * r.t_star
    );
}

#[test]
fn median_ci_coverage() {
    let mut rng = Seed(2024).rng();
    let reps = 10_000;
    let mut covered = 0;
    for _ in 0..reps {
        let xs: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let m = median_with_ci(0, &xs).unwrap();
        if m.ci_low <= 0.5 && 0.5 <= m.ci_high {
            covered += 1;
        }
    }
    let rate = covered as f64 / reps as f64;
    // Exact coverage for n = 100 is 1 - 2 P(B <= 39) = 0.9648.
    let se = (0.9648f64 * 0.0352 / reps as f64).sqrt();
    assert!((rate - 0.9648).abs() < 4.0 * se, "coverage {rate}");
}

fn small_config(dir: &std::path::Path, workers: usize) -> CampaignConfig {
    CampaignConfig {
        n_min: 5,
        n_max: 7,
        instances_per_n: 6,
        master_seed: Seed(31),
        workers,
        output_dir: Some(dir.to_path_buf()),
        ..CampaignConfig::default()
    }
}

#[test]
fn archives_are_independent_of_worker_count() {
    let one = tempfile::tempdir().unwrap();
    let many = tempfile::tempdir().unwrap();
    let a = run_noiseless_campaign(&small_config(one.path(), 1)).unwrap();
    let b = run_noiseless_campaign(&small_config(many.path(), 4)).unwrap();
    assert_eq!(a.estimates, b.estimates);
    for n in 5..=7 {
        let ra = fs::read(records_path(one.path(), "none", n)).unwrap();
        let rb = fs::read(records_path(many.path(), "none", n)).unwrap();
        assert_eq!(ra, rb, "N = {n}");
    }
    assert_eq!(
        fs::read(one.path().join("summary.csv")).unwrap(),
        fs::read(many.path().join("summary.csv")).unwrap()
    );

    // Every median is recomputable from the archive alone.
    let rows = read_summary_csv(fs::File::open(one.path().join("summary.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let recs = read_records_jsonl(std::io::BufReader::new(
            fs::File::open(records_path(one.path(), "none", row.n)).unwrap(),
        ))
        .unwrap();
        let ts: Vec<f64> = recs.iter().map(|r| r.t_star).collect();
        let m = median_with_ci(row.n, &ts).unwrap();
        assert_eq!(
            (m.median, m.ci_low, m.ci_high),
            (row.median_t, row.ci_low, row.ci_high)
        );
        assert_eq!(recs.len(), row.n_samples);
    }
}

#[test]
fn noisy_campaigns_share_instances() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for pol in [Polarization::X, Polarization::Y] {
        let cfg = CampaignConfig {
            n_min: 5,
            n_max: 6,
            instances_per_n: 4,
            realizations_per_instance: 2,
            noise: Some(NoiseParams::new(0.005, 0.04, 1.0, pol).unwrap()),
            master_seed: Seed(8),
            output_dir: Some(dir.path().to_path_buf()),
            ..CampaignConfig::default()
        };
        let r = run_noisy_campaign(&cfg).unwrap();
        assert!(r.estimates.iter().all(|m| m.n_samples == 8));
        assert!(r
            .records
            .windows(2)
            .all(|w| (w[0].n_bits, w[0].instance, w[0].realization())
                < (w[1].n_bits, w[1].instance, w[1].realization())));
        files.push(fs::read(dir.path().join("instances").join("N06.jsonl")).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert_eq!(campaign_instances(Seed(8), 6, 4).unwrap().len(), 4);
    let rows = read_summary_csv(fs::File::open(dir.path().join("summary.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    let manifest: serde_json::Value =
        serde_json::from_reader(fs::File::open(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["campaigns"]["x_p0.005"]["complete"]
        .as_bool()
        .unwrap());
    assert!(manifest["campaigns"]["y_p0.005"]["complete"]
        .as_bool()
        .unwrap());
}

#[test]
fn campaign_kind_is_checked() {
    let noisy = CampaignConfig {
        realizations_per_instance: 1,
        ..CampaignConfig::default()
    };
    assert!(run_noiseless_campaign(&noisy).is_err());
    assert!(run_noisy_campaign(&CampaignConfig::default()).is_err());
}
