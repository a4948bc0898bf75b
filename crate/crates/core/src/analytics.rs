//! Closed-form AoI quantities for the preemptive M/M/1/1 queue.
//!
//! Notation: λ_k is the rate of source k, λ the aggregate rate, μ the service
//! rate. Valid packets (those not pushed out by a later arrival) have
//! Exp(λ+μ) service times, and the interval between consecutive deliveries of
//! any source is the sum of independent Exp(λ) and Exp(μ) variables.

use serde::{Deserialize, Serialize};

use crate::error::{AoiError, Result};
use crate::model::ModelParams;

/// Relative discriminant below which the two decay rates are treated as equal.
pub const CONFLUENT_TOLERANCE: f64 = 1e-12;

fn check_transform_arg(s: f64) -> Result<()> {
    if s.is_nan() || s < 0.0 {
        return Err(AoiError::NegativeTransformArgument(s));
    }
    Ok(())
}

/// Denominator shared by the AoI transform and the per-source interval
/// transform: (s+λ)(s+μ) − (λ−λ_k)μ.
fn two_rate_denominator(p: &ModelParams, lambda_k: f64, s: f64) -> f64 {
    let l = p.total_rate();
    let mu = p.mu();
    (s + l) * (s + mu) - (l - lambda_k) * mu
}

/// Laplace-Stieltjes transform of the stationary AoI of source `k`.
pub fn aoi_lst(p: &ModelParams, k: usize, s: f64) -> Result<f64> {
    let lk = p.lambda(k)?;
    check_transform_arg(s)?;
    Ok(lk * p.mu() / two_rate_denominator(p, lk, s))
}

/// Transform of the age immediately after an update of source `k`; equal to
/// the transform of a valid packet's service time, (λ+μ)/(s+λ+μ).
pub fn aoi_lst_post(p: &ModelParams, k: usize, s: f64) -> Result<f64> {
    p.check_index(k)?;
    check_transform_arg(s)?;
    let rate = p.total_rate() + p.mu();
    Ok(rate / (s + rate))
}

/// Transform of the age immediately before an update of source `k`: the
/// previous post-update age plus an independent per-source update interval.
pub fn aoi_lst_pre(p: &ModelParams, k: usize, s: f64) -> Result<f64> {
    Ok(aoi_lst_post(p, k, s)? * update_interval_lst_per_source(p, k, s)?)
}

/// E[A_k] = (1/λ_k)(1 + λ/μ).
pub fn mean_aoi(p: &ModelParams, k: usize) -> Result<f64> {
    let lk = p.lambda(k)?;
    Ok((1.0 + p.total_rate() / p.mu()) / lk)
}

/// V[A_k] = (1/λ_k²)(1 + 2(λ−λ_k)/μ + λ²/μ²).
pub fn var_aoi(p: &ModelParams, k: usize) -> Result<f64> {
    let lk = p.lambda(k)?;
    let l = p.total_rate();
    let mu = p.mu();
    Ok((1.0 + 2.0 * (l - lk) / mu + (l * l) / (mu * mu)) / (lk * lk))
}

/// Transform of the gap between consecutive updates of source `k`.
///
/// The number of deliveries between two source-`k` deliveries is geometric
/// with success probability λ_k/λ; composing that with the global interval
/// transform gives λ_kμ / ((s+λ)(s+μ) − (λ−λ_k)μ).
pub fn update_interval_lst_per_source(p: &ModelParams, k: usize, s: f64) -> Result<f64> {
    let lk = p.lambda(k)?;
    check_transform_arg(s)?;
    let l = p.total_rate();
    let global = update_interval_lst_global(p, s)?;
    let q = lk / l;
    Ok(q * global / (1.0 - (1.0 - q) * global))
}

/// Mean gap between consecutive source-`k` updates, (λ+μ)/(λ_kμ).
pub fn update_interval_mean_per_source(p: &ModelParams, k: usize) -> Result<f64> {
    let lk = p.lambda(k)?;
    Ok((p.total_rate() + p.mu()) / (lk * p.mu()))
}

/// Transform of the gap between consecutive updates of any source,
/// (λ/(s+λ))(μ/(s+μ)).
pub fn update_interval_lst_global(p: &ModelParams, s: f64) -> Result<f64> {
    check_transform_arg(s)?;
    let l = p.total_rate();
    let mu = p.mu();
    Ok((l / (s + l)) * (mu / (s + mu)))
}

/// Raw moments E[R], E[R²], E[R³] of the global update interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalMoments {
    pub first: f64,
    pub second: f64,
    pub third: f64,
}

pub fn update_interval_moments(p: &ModelParams) -> IntervalMoments {
    let a = 1.0 / p.total_rate();
    let b = 1.0 / p.mu();
    IntervalMoments {
        first: a + b,
        second: 2.0 * (a * a + a * b + b * b),
        third: 6.0 * (a * a * a + a * a * b + a * b * b + b * b * b),
    }
}

/// Mean service time of a valid packet, 1/(λ+μ).
pub fn valid_service_mean(p: &ModelParams) -> f64 {
    1.0 / (p.total_rate() + p.mu())
}

/// Variance of a valid packet's service time, 1/(λ+μ)².
pub fn valid_service_variance(p: &ModelParams) -> f64 {
    let m = valid_service_mean(p);
    m * m
}

/// E[A†_k]: mean age of source `k` sampled just after any update (two-source
/// model only).
pub fn post_update_age_mean(p: &ModelParams, k: usize) -> Result<f64> {
    p.require_two_sources()?;
    let lk = p.lambda(k)?;
    let l = p.total_rate();
    let mu = p.mu();
    Ok(1.0 / (l + mu) + ((l - lk) / lk) * (1.0 / l + 1.0 / mu))
}

/// E[A†₁A†₂]: mean product of both ages sampled just after any update.
pub fn post_update_cross_moment(p: &ModelParams) -> Result<f64> {
    let (l1, l2) = p.require_two_sources()?;
    let l = p.total_rate();
    let mu = p.mu();
    let service = 1.0 / (l + mu);
    let interval = 1.0 / l + 1.0 / mu;
    Ok(2.0 * service * service + (l * l / (l1 * l2) - 2.0) * interval * service)
}

/// E[A₁A₂] for the stationary ages of the two sources.
pub fn stationary_cross_moment(p: &ModelParams) -> Result<f64> {
    let (l1, l2) = p.require_two_sources()?;
    let l = p.total_rate();
    let mu = p.mu();
    let interval = 1.0 / l + 1.0 / mu;
    Ok((l * l / (l1 * l2)) * interval * interval - 2.0 * interval / (l + mu))
}

/// E[F₀], the expected integral of A₁(t)A₂(t) over one global update interval.
pub fn segment_integral_mean(p: &ModelParams) -> Result<f64> {
    let (l1, l2) = p.require_two_sources()?;
    let l = p.total_rate();
    let mu = p.mu();
    let interval = 1.0 / l + 1.0 / mu;
    Ok((l * l / (l1 * l2)) * interval.powi(3) - 2.0 * interval * interval / (l + mu))
}

/// E[F₀] assembled from the interval moments and the post-update moments,
/// E[R³]/3 + E[R²]/2·E[A†₁+A†₂] + E[R]·E[A†₁A†₂].
pub fn segment_integral_mean_from_moments(p: &ModelParams) -> Result<f64> {
    let m = update_interval_moments(p);
    let a1 = post_update_age_mean(p, 1)?;
    let a2 = post_update_age_mean(p, 2)?;
    let cross = post_update_cross_moment(p)?;
    Ok(m.third / 3.0 + m.second / 2.0 * (a1 + a2) + m.first * cross)
}

/// Closed-form correlation coefficient of the two stationary ages.
pub fn correlation_closed_form(p: &ModelParams) -> Result<f64> {
    let (l1, l2) = p.require_two_sources()?;
    let l = p.total_rate();
    let mu = p.mu();
    let f1 = l * l + 2.0 * l1 * mu + mu * mu;
    let f2 = l * l + 2.0 * l2 * mu + mu * mu;
    Ok(-2.0 * l1 * l2 * mu / (l * (f1 * f2).sqrt()))
}

/// Moments and correlation of the two stationary ages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rho: f64,
    pub cov: f64,
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cross_moment: f64,
}

impl CorrelationReport {
    /// ρ recomputed from the moment fields.
    pub fn assembled_rho(&self) -> f64 {
        self.cov / (self.var1 * self.var2).sqrt()
    }
}

pub fn correlation_coefficient(p: &ModelParams) -> Result<CorrelationReport> {
    let cross_moment = stationary_cross_moment(p)?;
    let mean1 = mean_aoi(p, 1)?;
    let mean2 = mean_aoi(p, 2)?;
    Ok(CorrelationReport {
        rho: correlation_closed_form(p)?,
        cov: cross_moment - mean1 * mean2,
        mean1,
        mean2,
        var1: var_aoi(p, 1)?,
        var2: var_aoi(p, 2)?,
        cross_moment,
    })
}

/// Explicit stationary AoI law of one source, obtained from the partial
/// fraction expansion of its transform.
///
/// The density is λ_kμ(e^{−r1 t} − e^{−r2 t})/(r2 − r1) where r1 ≤ r2 are the
/// roots of s² − (λ+μ)s + λ_kμ, or λ_kμ·t·e^{−rt} when the roots coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiDistribution {
    pub r1: f64,
    pub r2: f64,
    pub scale: f64,
    pub confluent: bool,
}

pub fn aoi_distribution(p: &ModelParams, k: usize) -> Result<AoiDistribution> {
    let lk = p.lambda(k)?;
    Ok(AoiDistribution::from_rates(p.total_rate() + p.mu(), lk * p.mu()))
}

impl AoiDistribution {
    /// Decay rates with sum `sum` and product `product`.
    pub fn from_rates(sum: f64, product: f64) -> Self {
        // (λ+μ)² − 4λ_kμ = (λ−μ)² + 4(λ−λ_k)μ ≥ 0; clamp rounding noise.
        let disc = (sum * sum - 4.0 * product).max(0.0);
        if disc < CONFLUENT_TOLERANCE * sum * sum {
            let r = 0.5 * sum;
            return Self {
                r1: r,
                r2: r,
                scale: product,
                confluent: true,
            };
        }
        let root = disc.sqrt();
        let r2 = 0.5 * (sum + root);
        // product/r2 avoids cancellation in (sum − root)/2.
        let r1 = product / r2;
        Self {
            r1,
            r2,
            scale: product,
            confluent: false,
        }
    }

    /// (e^{−r1 t} − e^{−r2 t})/(r2 − r1), continuous through the confluent
    /// limit t·e^{−rt}.
    fn kernel(&self, t: f64) -> f64 {
        let e1 = (-self.r1 * t).exp();
        if self.confluent {
            return t * e1;
        }
        let d = self.r2 - self.r1;
        -e1 * (-d * t).exp_m1() / d
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(AoiError::NegativeTime(t));
        }
        Ok(self.scale * self.kernel(t))
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(AoiError::NegativeTime(t));
        }
        if t.is_infinite() {
            return Ok(1.0);
        }
        // 1 − (r2 e^{−r1 t} − r1 e^{−r2 t})/(r2 − r1) = 1 − e^{−r1 t} − r1·kernel(t)
        let one_minus_e1 = -(-self.r1 * t).exp_m1();
        Ok((one_minus_e1 - self.r1 * self.kernel(t)).clamp(0.0, 1.0))
    }

    /// Transform of the inverted density, (r1 r2)/((s+r1)(s+r2)).
    pub fn lst(&self, s: f64) -> Result<f64> {
        check_transform_arg(s)?;
        Ok(self.scale / ((s + self.r1) * (s + self.r2)))
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.r1 + 1.0 / self.r2
    }

    pub fn variance(&self) -> f64 {
        1.0 / (self.r1 * self.r1) + 1.0 / (self.r2 * self.r2)
    }
}

/// Thresholds for [`rho_properties_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoPropertyConfig {
    /// Rate substituted for one coordinate when probing the vanishing limit.
    pub tail_rate: f64,
    /// Largest |ρ| tolerated at `tail_rate`.
    pub tail_tolerance: f64,
    /// Slack around the −1/6 lower bound.
    pub bound_tolerance: f64,
}

impl Default for RhoPropertyConfig {
    fn default() -> Self {
        Self {
            tail_rate: 1e6,
            tail_tolerance: 1e-4,
            bound_tolerance: 1e-12,
        }
    }
}

pub const RHO_LOWER_BOUND: f64 = -1.0 / 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Lambda1,
    Lambda2,
    Mu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RhoViolation {
    InvalidPoint { point: [f64; 3], reason: String },
    NotNegative { point: [f64; 3], rho: f64 },
    BelowLowerBound { point: [f64; 3], rho: f64 },
    MinimizerMismatch { point: [f64; 3], rho: f64 },
    TailNotVanishing { point: [f64; 3], axis: Axis, rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoPropertyReport {
    pub points: usize,
    pub min_rho: f64,
    pub argmin: [f64; 3],
    pub max_rho: f64,
    /// Largest |ρ| seen after pushing one coordinate to the tail rate.
    pub max_tail_abs: f64,
    /// Whether some grid point reaches −1/6 within the bound tolerance.
    pub attains_lower_bound: bool,
    pub violations: Vec<RhoViolation>,
}

impl RhoPropertyReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn rho_at(point: [f64; 3]) -> Result<f64> {
    correlation_closed_form(&ModelParams::two_source(point[0], point[1], point[2])?)
}

/// Checks sign, lower bound, minimizer and vanishing-limit properties of ρ on
/// a grid of (λ₁, λ₂, μ) triples.
pub fn rho_properties_check(grid: &[[f64; 3]], cfg: &RhoPropertyConfig) -> RhoPropertyReport {
    let mut report = RhoPropertyReport {
        points: grid.len(),
        min_rho: f64::INFINITY,
        argmin: [f64::NAN; 3],
        max_rho: f64::NEG_INFINITY,
        max_tail_abs: 0.0,
        attains_lower_bound: false,
        violations: Vec::new(),
    };
    for &point in grid {
        let rho = match rho_at(point) {
            Ok(r) => r,
            Err(e) => {
                report.violations.push(RhoViolation::InvalidPoint {
                    point,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        if rho < report.min_rho {
            report.min_rho = rho;
            report.argmin = point;
        }
        report.max_rho = report.max_rho.max(rho);
        if rho >= 0.0 {
            report.violations.push(RhoViolation::NotNegative { point, rho });
        }
        if rho < RHO_LOWER_BOUND - cfg.bound_tolerance {
            report.violations.push(RhoViolation::BelowLowerBound { point, rho });
        }
        if (rho - RHO_LOWER_BOUND).abs() <= cfg.bound_tolerance {
            report.attains_lower_bound = true;
        }
        let [l1, l2, mu] = point;
        // ρ = −1/6 exactly on the ray λ₁ = λ₂ = μ/2.
        let on_minimizer_line = (l1 - l2).abs() <= 1e-12 * l1 && (2.0 * l1 - mu).abs() <= 1e-12 * mu;
        if on_minimizer_line && (rho - RHO_LOWER_BOUND).abs() > cfg.bound_tolerance {
            report.violations.push(RhoViolation::MinimizerMismatch { point, rho });
        }
        for (axis, idx) in [(Axis::Lambda1, 0), (Axis::Lambda2, 1), (Axis::Mu, 2)] {
            let mut probe = point;
            probe[idx] = cfg.tail_rate;
            // Valid by construction: the base point already validated.
            let tail = rho_at(probe).expect("tail probe is a valid point");
            report.max_tail_abs = report.max_tail_abs.max(tail.abs());
            if tail.abs() >= cfg.tail_tolerance {
                report.violations.push(RhoViolation::TailNotVanishing {
                    point,
                    axis,
                    rho: tail,
                });
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> ModelParams {
        ModelParams::two_source(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn lst_examples() {
        let p = unit();
        assert_eq!(aoi_lst(&p, 1, 0.0).unwrap(), 1.0);
        assert_relative_eq!(aoi_lst(&p, 1, 1.0).unwrap(), 0.2, max_relative = 1e-15);
        assert_relative_eq!(aoi_lst_post(&p, 1, 1.0).unwrap(), 0.75, max_relative = 1e-15);
        assert_relative_eq!(aoi_lst_pre(&p, 1, 1.0).unwrap(), 0.15, max_relative = 1e-15);
        assert_eq!(aoi_lst_post(&p, 2, 0.0).unwrap(), 1.0);
        assert_eq!(
            aoi_lst(&p, 1, -0.5),
            Err(AoiError::NegativeTransformArgument(-0.5))
        );
        assert!(matches!(
            aoi_lst(&p, 3, 1.0),
            Err(AoiError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn moment_examples() {
        let single = ModelParams::new(vec![1.0], 1.0).unwrap();
        assert_eq!(mean_aoi(&single, 1).unwrap(), 2.0);
        assert_eq!(var_aoi(&single, 1).unwrap(), 2.0);
        let single = ModelParams::new(vec![3.0], 3.0).unwrap();
        assert_relative_eq!(var_aoi(&single, 1).unwrap(), 2.0 / 9.0, max_relative = 1e-15);

        let p = unit();
        assert_eq!(mean_aoi(&p, 1).unwrap(), 3.0);
        assert_eq!(mean_aoi(&p, 2).unwrap(), 3.0);
        assert_eq!(var_aoi(&p, 1).unwrap(), 7.0);
    }

    #[test]
    fn interval_examples() {
        let p = unit();
        assert_eq!(update_interval_lst_per_source(&p, 1, 0.0).unwrap(), 1.0);
        assert_eq!(update_interval_lst_global(&p, 0.0).unwrap(), 1.0);
        assert_eq!(update_interval_mean_per_source(&p, 1).unwrap(), 3.0);
        assert_relative_eq!(
            1.0 / p.effective_update_rate(1).unwrap(),
            3.0,
            max_relative = 1e-15
        );
        let m = update_interval_moments(&p);
        assert_eq!(m.first, 1.5);
        assert_eq!(m.second, 3.5);
        assert_eq!(m.third, 11.25);
    }

    #[test]
    fn post_update_examples() {
        let p = unit();
        assert_relative_eq!(post_update_age_mean(&p, 1).unwrap(), 11.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(post_update_age_mean(&p, 2).unwrap(), 11.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(post_update_cross_moment(&p).unwrap(), 11.0 / 9.0, max_relative = 1e-15);
        let single = ModelParams::new(vec![1.0], 1.0).unwrap();
        assert_eq!(
            post_update_age_mean(&single, 1),
            Err(AoiError::RequiresTwoSources(1))
        );
        let three = ModelParams::new(vec![1.0; 3], 1.0).unwrap();
        assert_eq!(
            post_update_cross_moment(&three),
            Err(AoiError::RequiresTwoSources(3))
        );
    }

    #[test]
    fn cross_moment_examples() {
        let p = unit();
        assert_relative_eq!(stationary_cross_moment(&p).unwrap(), 8.0, max_relative = 1e-15);
        let r = correlation_coefficient(&p).unwrap();
        assert_relative_eq!(r.cov, -1.0, max_relative = 1e-14);
        assert_relative_eq!(r.rho, -1.0 / 7.0, max_relative = 1e-15);
        assert_relative_eq!(segment_integral_mean(&p).unwrap(), 12.0, max_relative = 1e-15);
        assert_relative_eq!(
            segment_integral_mean_from_moments(&p).unwrap(),
            12.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn rho_minimum() {
        let p = ModelParams::two_source(2.0, 2.0, 4.0).unwrap();
        assert_relative_eq!(correlation_closed_form(&p).unwrap(), -1.0 / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn distribution_confluent_only_for_single_balanced_source() {
        let d = aoi_distribution(&ModelParams::new(vec![2.0], 2.0).unwrap(), 1).unwrap();
        assert!(d.confluent);
        assert_eq!(d.r1, 2.0);
        let d = aoi_distribution(&unit(), 1).unwrap();
        assert!(!d.confluent);
        assert!(d.r1 < d.r2);
        assert_eq!(d.cdf(0.0).unwrap(), 0.0);
        assert_eq!(d.pdf(0.0).unwrap(), 0.0);
        assert_eq!(d.cdf(-1.0), Err(AoiError::NegativeTime(-1.0)));
        assert!((d.cdf(1e3).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn near_confluent_is_continuous() {
        // Roots 1 ± ε: density must approach t·e^{−t} smoothly.
        let exact = AoiDistribution::from_rates(2.0, 1.0);
        assert!(exact.confluent);
        let near = AoiDistribution::from_rates(2.0, 1.0 - 1e-10);
        assert!(!near.confluent);
        for t in [0.1, 1.0, 5.0] {
            assert_relative_eq!(near.pdf(t).unwrap(), exact.pdf(t).unwrap(), max_relative = 1e-4);
            assert_relative_eq!(near.cdf(t).unwrap(), exact.cdf(t).unwrap(), max_relative = 1e-4);
        }
    }

    #[test]
    fn property_report_flags_invalid_points() {
        let report = rho_properties_check(
            &[[2.0, 2.0, 4.0], [-1.0, 1.0, 1.0]],
            &RhoPropertyConfig::default(),
        );
        assert_eq!(report.violations.len(), 1);
        assert!(matches!(report.violations[0], RhoViolation::InvalidPoint { .. }));
        assert!(report.attains_lower_bound);
        assert_eq!(report.argmin, [2.0, 2.0, 4.0]);
    }
}
