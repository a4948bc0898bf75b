//! Theory-vs-simulation tables assembled from replication summaries.

use crate::analytics;
use crate::error::{AoiError, Result};
use crate::estimators::{Estimate, ReplicationSummary};
use crate::model::ModelParams;
use crate::report::Comparison;

pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

fn row(name: impl Into<String>, analytic: f64, reps: &[ReplicationSummary], f: impl Fn(&ReplicationSummary) -> f64) -> Comparison {
    let e = Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>());
    Comparison::new(name, analytic, e.value, e.se)
}

/// One row per closed-form quantity: valid-packet law, update-interval law,
/// per-source AoI moments and transform, and (two sources only) post-update
/// moments, stationary cross-moment and ρ.
///
/// Standard errors are taken across replications; with a single replication
/// only the valid fraction carries one (binomial).
pub fn compare(p: &ModelParams, reps: &[ReplicationSummary]) -> Result<Vec<Comparison>> {
    let first = reps.first().ok_or(AoiError::InsufficientReplications { needed: 1, got: 0 })?;
    if first.per_source.len() != p.sources() {
        return Err(AoiError::InvalidConfig(format!(
            "summaries have {} sources, model has {}",
            first.per_source.len(),
            p.sources()
        )));
    }
    let mut rows = Vec::new();

    let mut valid = row("valid_fraction", p.valid_packet_probability(), reps, |r| r.valid_fraction);
    if reps.len() == 1 {
        let q = p.valid_packet_probability();
        let se = (q * (1.0 - q) / first.arrivals as f64).sqrt();
        valid = Comparison::new(valid.quantity, valid.analytic, valid.simulated, Some(se));
    }
    rows.push(valid);
    rows.push(row("service_mean", analytics::valid_service_mean(p), reps, |r| r.service_mean));
    rows.push(row("service_variance", analytics::valid_service_variance(p), reps, |r| r.service_variance));

    let m = analytics::update_interval_moments(p);
    rows.push(row("interval_mean", m.first, reps, |r| r.interval_moments[0]));
    rows.push(row("interval_m2", m.second, reps, |r| r.interval_moments[1]));
    rows.push(row("interval_m3", m.third, reps, |r| r.interval_moments[2]));
    rows.push(row("update_rate", 1.0 / m.first, reps, |r| r.update_rate));

    for k in 1..=p.sources() {
        let i = k - 1;
        rows.push(row(format!("update_share[{k}]"), p.lambda(k)? / p.total_rate(), reps, |r| {
            r.per_source[i].update_share
        }));
        if reps.iter().all(|r| r.per_source[i].interval_mean.is_some()) {
            rows.push(row(
                format!("source_interval_mean[{k}]"),
                analytics::update_interval_mean_per_source(p, k)?,
                reps,
                |r| r.per_source[i].interval_mean.unwrap_or(f64::NAN),
            ));
        }
        rows.push(row(format!("mean_aoi[{k}]"), analytics::mean_aoi(p, k)?, reps, |r| r.per_source[i].mean));
        rows.push(row(format!("var_aoi[{k}]"), analytics::var_aoi(p, k)?, reps, |r| r.per_source[i].variance));
        for (idx, &s) in first.per_source[i].lst_s.iter().enumerate() {
            rows.push(row(format!("aoi_lst[{k}](s={s:.6})"), analytics::aoi_lst(p, k, s)?, reps, |r| {
                r.per_source[i].lst[idx]
            }));
        }
    }

    if p.sources() == 2 {
        for k in 1..=2 {
            rows.push(row(
                format!("post_update_mean[{k}]"),
                analytics::post_update_age_mean(p, k)?,
                reps,
                |r| r.per_source[k - 1].post_update_mean,
            ));
        }
        rows.push(row("post_update_cross", analytics::post_update_cross_moment(p)?, reps, |r| {
            r.pairs[0].post_update_cross
        }));
        rows.push(row("cross_moment", analytics::stationary_cross_moment(p)?, reps, |r| r.pairs[0].cross_moment));
        rows.push(row("rho", analytics::correlation_closed_form(p)?, reps, |r| r.pairs[0].rho));
    }
    Ok(rows)
}

/// Rows whose |z| exceeds the threshold.
pub fn exceedances(rows: &[Comparison], z_threshold: f64) -> Vec<&Comparison> {
    rows.iter().filter(|r| !r.within(z_threshold)).collect()
}
