//! Statistical checks of the simulator and estimators against closed forms.

mod common;

use aoi_core::analytics;
use aoi_core::estimators::{default_s_grid, ReplicationSummary};
use aoi_core::simulator::{self, validate_interval_law, SimConfig};
use aoi_core::validation::{compare, exceedances};
use aoi_core::{ModelParams, SimEstimates};

fn summaries(p: &ModelParams, seed: u64, arrivals: u64, reps: usize) -> Vec<ReplicationSummary> {
    let grids = default_s_grid(p);
    let cfg = SimConfig::new(p.clone(), seed).with_arrivals(arrivals);
    simulator::run_replications(&cfg, reps, |path| ReplicationSummary::from_path(path, &grids))
        .unwrap()
        .into_iter()
        .collect::<Result<_, _>>()
        .unwrap()
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn valid_packet_law() {
    let p = ModelParams::two_source(0.5, 3.0, 2.0).unwrap();
    let reps = summaries(&p, 11, 200_000, 10);
    let rows = compare(&p, &reps).unwrap();
    for name in ["valid_fraction", "service_mean", "service_variance"] {
        let r = rows.iter().find(|r| r.quantity == name).unwrap();
        assert!(r.within(4.0), "{r:?}");
    }
    let lambda = p.total_rate();
    let q = reps.iter().map(|r| r.valid_fraction).sum::<f64>() / reps.len() as f64;
    assert!((q - 2.0 / (lambda + 2.0)).abs() < 0.005);
}

#[test]
fn update_share_tracks_rate_share() {
    let p = ModelParams::new(vec![0.3, 1.2, 2.5], 1.7).unwrap();
    let grids = default_s_grid(&p);
    let path = simulator::run(&SimConfig::new(p.clone(), 2).with_arrivals(500_000)).unwrap();
    let summary = ReplicationSummary::from_path(&path, &grids).unwrap();
    let n = summary.window_updates as f64;
    assert!(n >= 1e5, "{n} updates");
    for k in 1..=3 {
        let q = p.lambda(k).unwrap() / p.total_rate();
        let share = summary.per_source[k - 1].update_share;
        let sigma = (q * (1.0 - q) / n).sqrt();
        assert!((share - q).abs() <= 3.0 * sigma, "source {k}: {share} vs {q} (sigma {sigma})");
    }
}

#[test]
fn reported_standard_errors_match_seed_spread() {
    let p = ModelParams::two_source(0.5, 3.0, 2.0).unwrap();
    let mut rho = Vec::new();
    let mut rho_se = Vec::new();
    let mut mean = Vec::new();
    let mut mean_se = Vec::new();
    for seed in 0..30 {
        let est = SimEstimates::aggregate(&summaries(&p, 1000 + seed, 20_000, 5)).unwrap();
        let r = est.rho_hat().unwrap();
        rho.push(r.value);
        rho_se.push(r.se.unwrap());
        mean.push(est.sources[0].mean.value);
        mean_se.push(est.sources[0].mean.se.unwrap());
    }
    for (name, values, ses) in [("rho", rho, rho_se), ("mean", mean, mean_se)] {
        let ratio = sd(&values) / common::median(ses);
        assert!((0.5..=2.0).contains(&ratio), "{name}: SD/SE = {ratio}");
    }
}

#[test]
fn errors_shrink_with_horizon() {
    let p = ModelParams::two_source(1.0, 1.0, 1.0).unwrap();
    let target = analytics::mean_aoi(&p, 1).unwrap();
    let target_cross = analytics::stationary_cross_moment(&p).unwrap();
    let mut med_mean = Vec::new();
    let mut med_cross = Vec::new();
    for arrivals in [10_000u64, 100_000, 1_000_000] {
        let reps = summaries(&p, 1234, arrivals, 20);
        let errs: Vec<f64> = reps.iter().map(|r| (r.per_source[0].mean - target).abs()).collect();
        let cross: Vec<f64> = reps.iter().map(|r| (r.pairs[0].cross_moment - target_cross).abs()).collect();
        med_mean.push(common::median(errs));
        med_cross.push(common::median(cross));
    }
    // Expected shrink is √100 = 10 from the shortest to the longest horizon.
    assert!(med_mean[2] * 3.0 < med_mean[0] && med_mean[2] < med_mean[1], "{med_mean:?}");
    assert!(med_cross[2] * 3.0 < med_cross[0] && med_cross[2] < med_cross[1], "{med_cross:?}");
    assert!(med_mean[2] / target < 0.01);
}

#[test]
fn spread_scales_like_inverse_root_horizon() {
    let p = ModelParams::two_source(2.0, 2.0, 4.0).unwrap();
    let short = summaries(&p, 77, 20_000, 30);
    let long = summaries(&p, 78, 200_000, 30);
    let ratio = |f: &dyn Fn(&ReplicationSummary) -> f64| {
        let a: Vec<f64> = short.iter().map(f).collect();
        let b: Vec<f64> = long.iter().map(f).collect();
        sd(&a) / sd(&b) / 10f64.sqrt()
    };
    for (name, r) in [
        ("mean", ratio(&|s| s.per_source[0].mean)),
        ("variance", ratio(&|s| s.per_source[1].variance)),
        ("cross", ratio(&|s| s.pairs[0].cross_moment)),
        ("rho", ratio(&|s| s.pairs[0].rho)),
    ] {
        assert!((0.5..=2.0).contains(&r), "{name}: normalized SD ratio {r}");
    }
}

#[test]
fn interval_law_single_path() {
    let p = ModelParams::two_source(1.0, 2.0, 1.5).unwrap();
    let path = simulator::run(&SimConfig::new(p.clone(), 8).with_arrivals(500_000)).unwrap();
    let rows = validate_interval_law(&path, &p).unwrap();
    assert!(rows.iter().any(|r| r.quantity == "interval_m3"));
    assert!(exceedances(&rows, 4.5).is_empty(), "{rows:?}");
}

#[test]
fn three_sources_per_source_rows() {
    let p = ModelParams::new(vec![0.5, 1.0, 1.5], 2.0).unwrap();
    let reps = summaries(&p, 19, 200_000, 12);
    let rows = compare(&p, &reps).unwrap();
    assert!(rows.iter().all(|r| r.quantity != "rho" && r.quantity != "cross_moment"));
    assert!(rows.iter().any(|r| r.quantity == "mean_aoi[3]"));
    assert_eq!(reps[0].pairs.len(), 3);
    let bad = exceedances(&rows, 4.5);
    assert!(bad.len() <= 1, "{bad:?}");
}

#[test]
fn tiny_horizon_is_reported_not_fatal() {
    let p = ModelParams::new(vec![0.01, 5.0], 1.0).unwrap();
    let path = simulator::run(&SimConfig::new(p, 3).with_arrivals(20)).unwrap();
    assert!(path.coverage_error().is_some());
}
