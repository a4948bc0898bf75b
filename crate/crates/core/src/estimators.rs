//! Exact time averages over piecewise-linear AoI sample paths.
//!
//! All integrals run over the path's measurement window, which begins and
//! ends on global update epochs. Within a segment of length R starting at age
//! a, the age is a + u for u ∈ [0, R), so every integral has a closed form.

use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{AoiError, Result};
use crate::model::ModelParams;
use crate::simulator::SamplePath;

pub const MIN_UPDATE_EPOCHS: usize = 1_000;

/// Default transform arguments in units of 1/E[A_k].
pub const DEFAULT_S_MULTIPLIERS: [f64; 6] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0];

/// Per-source transform grids {0.1, 0.2, 0.5, 1, 2, 5}/E[A_k].
pub fn default_s_grid(p: &ModelParams) -> Vec<Vec<f64>> {
    (1..=p.sources())
        .map(|k| {
            let mean = analytics::mean_aoi(p, k).expect("k in range");
            DEFAULT_S_MULTIPLIERS.iter().map(|m| m / mean).collect()
        })
        .collect()
}

fn window_span(path: &SamplePath) -> Result<(usize, usize, f64, f64)> {
    let w = path.window().ok_or(AoiError::EmptyWindow)?;
    let (start, end) = path.window_bounds().expect("window present");
    Ok((w.first, w.last, start, end))
}

/// Segments `(start_age, length)` of source `k` inside the window. The first
/// segment starts at the window start with whatever age source `k` has there.
fn segments(path: &SamplePath, k: usize) -> Result<Vec<(f64, f64)>> {
    let updates = path.source_updates(k)?;
    let (first, _, start, end) = window_span(path)?;
    let mut out = Vec::new();
    let mut seg_start = start;
    let mut age = path.post_update_ages(first)[k - 1];
    let from = updates.partition_point(|u| u.epoch <= start);
    for u in &updates[from..] {
        if u.epoch > end {
            break;
        }
        out.push((age, u.epoch - seg_start));
        seg_start = u.epoch;
        age = u.post_update_age;
    }
    if end > seg_start {
        out.push((age, end - seg_start));
    }
    Ok(out)
}

/// Time averages of A_k(t) and A_k(t)² over the window.
pub fn time_average_moments(path: &SamplePath, k: usize) -> Result<(f64, f64)> {
    let segs = segments(path, k)?;
    let (_, _, start, end) = window_span(path)?;
    let (mut first, mut second) = (0.0, 0.0);
    for (a, r) in segs {
        first += a * r + 0.5 * r * r;
        second += a * a * r + a * r * r + r * r * r / 3.0;
    }
    let t = end - start;
    Ok((first / t, second / t))
}

/// Time average of A_i(t)A_j(t), accumulated interval by interval from the
/// post-update ages: F_n = R³/3 + (R²/2)(A†_i + A†_j) + R·A†_i·A†_j.
pub fn pair_cross_moment(path: &SamplePath, i: usize, j: usize) -> Result<f64> {
    path.source_updates(i)?;
    path.source_updates(j)?;
    let (first, last, start, end) = window_span(path)?;
    let g = path.global_updates();
    let mut total = 0.0;
    for n in first..last {
        let r = g[n + 1].epoch - g[n].epoch;
        let ages = path.post_update_ages(n);
        let (a, b) = (ages[i - 1], ages[j - 1]);
        total += r * r * r / 3.0 + 0.5 * r * r * (a + b) + r * a * b;
    }
    Ok(total / (end - start))
}

/// Two-source Ê[A₁A₂] via the interval decomposition.
pub fn cross_moment(path: &SamplePath) -> Result<f64> {
    if path.sources() != 2 {
        return Err(AoiError::RequiresTwoSources(path.sources()));
    }
    pair_cross_moment(path, 1, 2)
}

/// Time average of A_i(t)A_j(t) computed only from the two per-source update
/// lists: breakpoints are merged and each quadratic piece is integrated with
/// Simpson's rule, which is exact for polynomials of degree two.
pub fn pair_cross_moment_direct(path: &SamplePath, i: usize, j: usize) -> Result<f64> {
    let (_, _, start, end) = window_span(path)?;
    let ui = path.source_updates(i)?;
    let uj = path.source_updates(j)?;
    let ages_at = |t: f64| -> Result<(f64, f64)> {
        let a = path.age_at(i, t)?.ok_or(AoiError::EmptyWindow)?;
        let b = path.age_at(j, t)?.ok_or(AoiError::EmptyWindow)?;
        Ok((a, b))
    };
    let mut cuts: Vec<f64> = ui
        .iter()
        .chain(uj)
        .map(|u| u.epoch)
        .filter(|&e| e > start && e < end)
        .collect();
    cuts.push(start);
    cuts.push(end);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for piece in cuts.windows(2) {
        let (lo, hi) = (piece[0], piece[1]);
        let h = hi - lo;
        let (a, b) = ages_at(lo)?;
        let (ma, mb) = ages_at(lo + 0.5 * h)?;
        // The right endpoint belongs to the next piece; extend this one's lines.
        let right = (a + h) * (b + h);
        total += h / 6.0 * (a * b + 4.0 * ma * mb + right);
    }
    Ok(total / (end - start))
}

/// (1/T)∫ e^{−s A_k(t)} dt over the window for each `s > 0`.
pub fn empirical_lst(path: &SamplePath, k: usize, s_grid: &[f64]) -> Result<Vec<f64>> {
    if let Some(&bad) = s_grid.iter().find(|s| !(**s > 0.0)) {
        return Err(AoiError::NegativeTransformArgument(bad));
    }
    let segs = segments(path, k)?;
    let (_, _, start, end) = window_span(path)?;
    let t = end - start;
    Ok(s_grid
        .iter()
        .map(|&s| {
            let sum: f64 = segs
                .iter()
                .map(|&(a, r)| (-s * a).exp() * -(-s * r).exp_m1() / s)
                .sum();
            sum / t
        })
        .collect())
}

/// Means of A†₁, A†₂ and A†₁A†₂ over the global update epochs in the window.
pub fn update_epoch_moments(path: &SamplePath) -> Result<(f64, f64, f64)> {
    if path.sources() != 2 {
        return Err(AoiError::RequiresTwoSources(path.sources()));
    }
    let (first, last, _, _) = window_span(path)?;
    let n = last - first + 1;
    if n < MIN_UPDATE_EPOCHS {
        return Err(AoiError::InsufficientSamples {
            needed: MIN_UPDATE_EPOCHS,
            got: n,
        });
    }
    let (mut a1, mut a2, mut a12) = (0.0, 0.0, 0.0);
    for idx in first..=last {
        let ages = path.post_update_ages(idx);
        a1 += ages[0];
        a2 += ages[1];
        a12 += ages[0] * ages[1];
    }
    let n = n as f64;
    Ok((a1 / n, a2 / n, a12 / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSummary {
    pub source: usize,
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
    /// Fraction of global updates delivered by this source.
    pub update_share: f64,
    pub interval_mean: Option<f64>,
    pub post_update_mean: f64,
    pub lst_s: Vec<f64>,
    pub lst: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub sources: [usize; 2],
    pub cross_moment: f64,
    pub post_update_cross: f64,
    pub rho: f64,
}

/// Every per-replication statistic needed by [`SimEstimates`] and the
/// validation tables, so a path can be dropped right after it is summarized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub arrivals: u64,
    pub valid: u64,
    pub window_length: f64,
    pub window_updates: usize,
    pub valid_fraction: f64,
    pub service_mean: f64,
    pub service_variance: f64,
    pub interval_moments: [f64; 3],
    pub update_rate: f64,
    pub per_source: Vec<SourceSummary>,
    pub pairs: Vec<PairSummary>,
}

impl ReplicationSummary {
    /// `s_grids[k-1]` holds the transform arguments for source k.
    pub fn from_path(path: &SamplePath, s_grids: &[Vec<f64>]) -> Result<Self> {
        let (first, last, start, end) = window_span(path)?;
        let k_count = path.sources();
        let g = path.global_updates();
        let window_updates = last - first + 1;
        let t = end - start;

        let services: Vec<f64> = g
            .iter()
            .enumerate()
            .map(|(n, u)| path.post_update_ages(n)[u.source - 1])
            .collect();
        let nserv = services.len() as f64;
        let service_mean = services.iter().sum::<f64>() / nserv;
        let service_variance = if services.len() > 1 {
            services.iter().map(|x| (x - service_mean).powi(2)).sum::<f64>() / (nserv - 1.0)
        } else {
            0.0
        };

        let mut interval_moments = [0.0; 3];
        for n in first..last {
            let r = g[n + 1].epoch - g[n].epoch;
            interval_moments[0] += r;
            interval_moments[1] += r * r;
            interval_moments[2] += r * r * r;
        }
        let intervals = (last - first) as f64;
        interval_moments.iter_mut().for_each(|m| *m /= intervals);

        let mut per_source = Vec::with_capacity(k_count);
        for k in 1..=k_count {
            let (mean, second_moment) = time_average_moments(path, k)?;
            let lst_s = s_grids.get(k - 1).cloned().unwrap_or_default();
            let lst = empirical_lst(path, k, &lst_s)?;
            let own: Vec<f64> = path
                .source_updates(k)?
                .iter()
                .map(|u| u.epoch)
                .filter(|&e| e >= start && e <= end)
                .collect();
            let interval_mean = (own.len() >= 2)
                .then(|| (own[own.len() - 1] - own[0]) / (own.len() - 1) as f64);
            let delivered = g[first..=last].iter().filter(|u| u.source == k).count();
            let post_update_mean = (first..=last)
                .map(|n| path.post_update_ages(n)[k - 1])
                .sum::<f64>()
                / window_updates as f64;
            per_source.push(SourceSummary {
                source: k,
                mean,
                second_moment,
                variance: second_moment - mean * mean,
                update_share: delivered as f64 / window_updates as f64,
                interval_mean,
                post_update_mean,
                lst_s,
                lst,
            });
        }

        let mut pairs = Vec::new();
        for i in 1..=k_count {
            for j in i + 1..=k_count {
                let cross = pair_cross_moment(path, i, j)?;
                let (si, sj) = (&per_source[i - 1], &per_source[j - 1]);
                let denom = (si.variance * sj.variance).sqrt();
                let rho = if denom > 0.0 {
                    ((cross - si.mean * sj.mean) / denom).clamp(-1.0, 1.0)
                } else {
                    f64::NAN
                };
                let post_update_cross = (first..=last)
                    .map(|n| {
                        let a = path.post_update_ages(n);
                        a[i - 1] * a[j - 1]
                    })
                    .sum::<f64>()
                    / window_updates as f64;
                pairs.push(PairSummary {
                    sources: [i, j],
                    cross_moment: cross,
                    post_update_cross,
                    rho,
                });
            }
        }

        Ok(Self {
            arrivals: path.arrivals(),
            valid: path.valid_packets(),
            window_length: t,
            window_updates,
            valid_fraction: path.valid_packets() as f64 / path.arrivals() as f64,
            service_mean,
            service_variance,
            interval_moments,
            update_rate: intervals / t,
            per_source,
            pairs,
        })
    }
}

/// Mean across replications with standard error SD/√n (absent for n < 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let value = xs.iter().sum::<f64>() / n;
        let se = (xs.len() >= 2).then(|| {
            let var = xs.iter().map(|x| (x - value).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Self { value, se }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LstEstimate {
    pub s: f64,
    pub value: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEstimates {
    pub source: usize,
    pub mean: Estimate,
    pub second_moment: Estimate,
    pub variance: Estimate,
    /// Set when some replication produced a negative variance estimate.
    pub negative_variance: bool,
    pub lst: Vec<LstEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimates {
    pub sources: [usize; 2],
    pub cross_moment: Estimate,
    pub rho: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimates {
    pub replications: usize,
    pub sources: Vec<SourceEstimates>,
    pub pairs: Vec<PairEstimates>,
    /// Pairwise correlations for more than two sources have no closed form
    /// to compare against.
    pub beyond_closed_form: bool,
}

impl SimEstimates {
    pub fn aggregate(reps: &[ReplicationSummary]) -> Result<Self> {
        let first = reps.first().ok_or(AoiError::InsufficientReplications { needed: 1, got: 0 })?;
        let k_count = first.per_source.len();
        let column = |f: &dyn Fn(&ReplicationSummary) -> f64| -> Estimate {
            Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>())
        };
        let sources = (0..k_count)
            .map(|k| {
                let lst = first.per_source[k]
                    .lst_s
                    .iter()
                    .enumerate()
                    .map(|(idx, &s)| LstEstimate {
                        s,
                        value: column(&|r| r.per_source[k].lst[idx]),
                    })
                    .collect();
                SourceEstimates {
                    source: k + 1,
                    mean: column(&|r| r.per_source[k].mean),
                    second_moment: column(&|r| r.per_source[k].second_moment),
                    variance: column(&|r| r.per_source[k].variance),
                    negative_variance: reps.iter().any(|r| r.per_source[k].variance < 0.0),
                    lst,
                }
            })
            .collect();
        let pairs = (0..first.pairs.len())
            .map(|p| PairEstimates {
                sources: first.pairs[p].sources,
                cross_moment: column(&|r| r.pairs[p].cross_moment),
                rho: column(&|r| r.pairs[p].rho),
            })
            .collect();
        Ok(Self {
            replications: reps.len(),
            sources,
            pairs,
            beyond_closed_form: k_count > 2,
        })
    }

    /// ρ̂ between sources 1 and 2, when there are exactly two.
    pub fn rho_hat(&self) -> Option<Estimate> {
        (!self.beyond_closed_form)
            .then(|| self.pairs.first().map(|p| p.rho))
            .flatten()
    }
}

/// Two-source estimate of moments, cross-moment and ρ from independent
/// replications.
pub fn correlation_estimate(paths: &[SamplePath], s_grids: &[Vec<f64>]) -> Result<SimEstimates> {
    if let Some(p) = paths.iter().find(|p| p.sources() != 2) {
        return Err(AoiError::RequiresTwoSources(p.sources()));
    }
    if paths.len() < 2 {
        return Err(AoiError::InsufficientReplications {
            needed: 2,
            got: paths.len(),
        });
    }
    let reps = paths
        .iter()
        .map(|p| ReplicationSummary::from_path(p, s_grids))
        .collect::<Result<Vec<_>>>()?;
    SimEstimates::aggregate(&reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_segment() {
        // One source, updates at 0 and 1 with age 0 at the first.
        let path = SamplePath::from_updates(1, &[(0.0, 1, 0.0), (1.0, 1, 0.2)]).unwrap();
        let (m1, m2) = time_average_moments(&path, 1).unwrap();
        assert_relative_eq!(m1, 0.5, max_relative = 1e-15);
        assert_relative_eq!(m2, 1.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn lst_single_segment_matches_closed_form() {
        let t = 4.0;
        let path = SamplePath::from_updates(1, &[(0.0, 1, 0.0), (t, 1, 0.1)]).unwrap();
        for s in [0.3, 1.0, 2.5] {
            let v = empirical_lst(&path, 1, &[s]).unwrap()[0];
            assert_relative_eq!(v, (1.0 - (-s * t).exp()) / (s * t), max_relative = 1e-14);
        }
        let v = empirical_lst(&path, 1, &[1e-8]).unwrap()[0];
        assert!((v - 1.0).abs() < 1e-6);
        assert!(matches!(
            empirical_lst(&path, 1, &[0.0]),
            Err(AoiError::NegativeTransformArgument(_))
        ));
    }

    #[test]
    fn cross_moment_one_interval() {
        let path = SamplePath::from_updates(2, &[(1.0, 2, 1.0), (2.0, 1, 0.0), (3.0, 2, 0.5)]).unwrap();
        // Window starts at t=2 with ages (0, 2), length 1.
        // ∫₀¹ u(u+2) du = 1/3 + 1 = 4/3.
        assert_relative_eq!(cross_moment(&path).unwrap(), 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(
            pair_cross_moment_direct(&path, 1, 2).unwrap(),
            4.0 / 3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn errors() {
        let one = SamplePath::from_updates(1, &[(0.0, 1, 0.0), (1.0, 1, 0.2)]).unwrap();
        assert_eq!(cross_moment(&one), Err(AoiError::RequiresTwoSources(1)));
        assert_eq!(update_epoch_moments(&one), Err(AoiError::RequiresTwoSources(1)));
        let empty = SamplePath::from_updates(1, &[(0.0, 1, 0.0)]).unwrap();
        assert_eq!(time_average_moments(&empty, 1), Err(AoiError::EmptyWindow));
        assert!(matches!(
            correlation_estimate(&[], &[]),
            Err(AoiError::InsufficientReplications { .. })
        ));
    }

    #[test]
    fn estimate_se() {
        let e = Estimate::from_samples(&[2.0, 2.0, 2.0]);
        assert_eq!(e.value, 2.0);
        assert_eq!(e.se, Some(0.0));
        assert_eq!(Estimate::from_samples(&[1.0]).se, None);
        let e = Estimate::from_samples(&[1.0, 3.0]);
        assert_relative_eq!(e.se.unwrap(), 1.0, max_relative = 1e-15);
    }
}
