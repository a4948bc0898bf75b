//! Seeded simulation of the K-source preemptive M/M/1/1 queue.
//!
//! Arrivals of all sources form one Poisson stream of rate λ; each arrival is
//! tagged with source k with probability λ_k/λ and draws an Exp(μ) service
//! time. Any new arrival pushes out the packet in service, so a packet is
//! delivered exactly when the next interarrival time exceeds its service time.
//! A delivery of source k at epoch β = α + S resets A_k to S.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{AoiError, Result};
use crate::model::ModelParams;
use crate::report::Comparison;

/// Recorded in run metadata so paths can be regenerated elsewhere.
pub const GENERATOR: &str =
    "ChaCha8 (rand_chacha 0.9): seed_from_u64(seed), set_stream(replication); exponentials via rand_distr::Exp1 (ziggurat); source via WeightedIndex";

pub const DEFAULT_ARRIVALS: u64 = 1_000_000;
pub const DEFAULT_WARMUP_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Total number of arrivals (all sources).
    Arrivals(u64),
    /// Total simulated time.
    Time(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub seed: u64,
    /// Independent stream of the generator; replications use 0, 1, 2, ...
    #[serde(default)]
    pub stream: u64,
    pub horizon: Horizon,
    /// Fraction of the run discarded before measurement starts, on top of
    /// waiting for every source to deliver once.
    pub warmup_fraction: f64,
}

impl SimConfig {
    pub fn new(params: ModelParams, seed: u64) -> Self {
        Self {
            params,
            seed,
            stream: 0,
            horizon: Horizon::Arrivals(DEFAULT_ARRIVALS),
            warmup_fraction: DEFAULT_WARMUP_FRACTION,
        }
    }

    pub fn with_arrivals(mut self, arrivals: u64) -> Self {
        self.horizon = Horizon::Arrivals(arrivals);
        self
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.horizon = Horizon::Time(time);
        self
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }

    pub fn with_warmup_fraction(mut self, fraction: f64) -> Self {
        self.warmup_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.horizon {
            Horizon::Arrivals(0) => {
                return Err(AoiError::InvalidConfig("horizon must contain at least one arrival".into()))
            }
            Horizon::Time(t) if !(t > 0.0 && t.is_finite()) => {
                return Err(AoiError::InvalidConfig(format!("horizon time must be positive and finite, got {t}")))
            }
            _ => {}
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(AoiError::InvalidConfig(format!(
                "warmup fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Update {
    pub epoch: f64,
    pub post_update_age: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalUpdate {
    pub epoch: f64,
    /// 1-based source of the delivered packet.
    pub source: usize,
}

/// Global update indices delimiting the measurement window. Every estimator
/// integrates over `[global[first].epoch, global[last].epoch]`, so only
/// complete update intervals are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub first: usize,
    pub last: usize,
}

/// Exact AoI trajectories of every source.
///
/// Between updates A_k(t) = (t − β) + A†, where β is the last update epoch of
/// source k and A† its post-update age.
#[derive(Debug, Clone)]
pub struct SamplePath {
    sources: usize,
    per_source: Vec<Vec<Update>>,
    global: Vec<GlobalUpdate>,
    /// Row n holds every source's age right after global update n; NaN for
    /// sources that have not delivered yet.
    ages: Vec<f64>,
    arrivals: u64,
    valid: u64,
    end_time: f64,
    window: Option<Window>,
}

/// Bitwise equality; the NaN placeholders in the age table compare equal.
impl PartialEq for SamplePath {
    fn eq(&self, other: &Self) -> bool {
        self.sources == other.sources
            && self.per_source == other.per_source
            && self.global == other.global
            && self.ages.len() == other.ages.len()
            && self.ages.iter().zip(&other.ages).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.arrivals == other.arrivals
            && self.valid == other.valid
            && self.end_time.to_bits() == other.end_time.to_bits()
            && self.window == other.window
    }
}

/// Incrementally assembles a [`SamplePath`] from deliveries in time order.
#[derive(Debug)]
pub struct PathBuilder {
    sources: usize,
    per_source: Vec<Vec<Update>>,
    global: Vec<GlobalUpdate>,
    ages: Vec<f64>,
    last: Vec<Option<Update>>,
}

impl PathBuilder {
    pub fn new(sources: usize) -> Self {
        Self {
            sources,
            per_source: vec![Vec::new(); sources],
            global: Vec::new(),
            ages: Vec::new(),
            last: vec![None; sources],
        }
    }

    /// Records a delivery of `source` (1-based) at `epoch`.
    pub fn push(&mut self, epoch: f64, source: usize, post_update_age: f64) -> Result<()> {
        if source == 0 || source > self.sources {
            return Err(AoiError::IndexOutOfRange {
                index: source,
                sources: self.sources,
            });
        }
        if let Some(prev) = self.global.last() {
            if epoch <= prev.epoch {
                return Err(AoiError::InvalidConfig(format!(
                    "update epochs must increase strictly: {epoch} after {}",
                    prev.epoch
                )));
            }
        }
        if post_update_age.is_nan() || post_update_age < 0.0 {
            return Err(AoiError::NegativeTime(post_update_age));
        }
        let update = Update {
            epoch,
            post_update_age,
        };
        self.per_source[source - 1].push(update);
        self.last[source - 1] = Some(update);
        self.global.push(GlobalUpdate { epoch, source });
        for slot in &self.last {
            self.ages.push(match slot {
                Some(u) => epoch - u.epoch + u.post_update_age,
                None => f64::NAN,
            });
        }
        Ok(())
    }

    /// Closes the path. The window starts at the first global update that is
    /// at or after `warmup_time` and after every source has delivered.
    pub fn finish(self, arrivals: u64, valid: u64, end_time: f64, warmup_time: f64) -> SamplePath {
        let k = self.sources;
        let first = (0..self.global.len()).find(|&n| {
            self.global[n].epoch >= warmup_time && self.ages[n * k..(n + 1) * k].iter().all(|a| !a.is_nan())
        });
        let window = match first {
            Some(first) if first + 1 < self.global.len() => Some(Window {
                first,
                last: self.global.len() - 1,
            }),
            _ => None,
        };
        SamplePath {
            sources: k,
            per_source: self.per_source,
            global: self.global,
            ages: self.ages,
            arrivals,
            valid,
            end_time,
            window,
        }
    }
}

impl SamplePath {
    /// Builds a path from `(epoch, source, post_update_age)` triples with no
    /// warm-up; mostly useful for hand-built fixtures.
    pub fn from_updates(sources: usize, updates: &[(f64, usize, f64)]) -> Result<Self> {
        let mut b = PathBuilder::new(sources);
        for &(epoch, source, age) in updates {
            b.push(epoch, source, age)?;
        }
        let n = updates.len() as u64;
        let end = updates.last().map_or(0.0, |u| u.0);
        Ok(b.finish(n, n, end, 0.0))
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    /// Updates of source `k` (1-based).
    pub fn source_updates(&self, k: usize) -> Result<&[Update]> {
        if k == 0 || k > self.sources {
            return Err(AoiError::IndexOutOfRange {
                index: k,
                sources: self.sources,
            });
        }
        Ok(&self.per_source[k - 1])
    }

    pub fn global_updates(&self) -> &[GlobalUpdate] {
        &self.global
    }

    /// Ages of all sources immediately after global update `n`.
    pub fn post_update_ages(&self, n: usize) -> &[f64] {
        &self.ages[n * self.sources..(n + 1) * self.sources]
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn valid_packets(&self) -> u64 {
        self.valid
    }

    pub fn end_time(&self) -> f64 {
        self.end_time
    }

    pub fn window(&self) -> Option<Window> {
        self.window
    }

    /// Measurement window in time units.
    pub fn window_bounds(&self) -> Option<(f64, f64)> {
        self.window
            .map(|w| (self.global[w.first].epoch, self.global[w.last].epoch))
    }

    /// Non-fatal coverage problem: some source never delivered, or the window
    /// holds no complete interval.
    pub fn coverage_error(&self) -> Option<AoiError> {
        if self.window.is_some() {
            return None;
        }
        let silent: Vec<usize> = (1..=self.sources)
            .filter(|&k| self.per_source[k - 1].is_empty())
            .collect();
        Some(AoiError::HorizonTooSmall(if silent.is_empty() {
            format!("{} global updates leave no complete interval after warm-up", self.global.len())
        } else {
            format!("sources {silent:?} never delivered an update")
        }))
    }

    /// A_k(t), or `None` before the first update of source `k`.
    pub fn age_at(&self, k: usize, t: f64) -> Result<Option<f64>> {
        let updates = self.source_updates(k)?;
        let idx = updates.partition_point(|u| u.epoch <= t);
        Ok(idx.checked_sub(1).map(|i| {
            let u = updates[i];
            t - u.epoch + u.post_update_age
        }))
    }

    /// Writes `epoch,source,post_update_age` for every delivery in time order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "source", "post_update_age"])?;
        for (n, g) in self.global.iter().enumerate() {
            let age = self.post_update_ages(n)[g.source - 1];
            w.serialize((g.epoch, g.source, age))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs one replication. Coverage problems are reported through
/// [`SamplePath::coverage_error`], not as errors.
pub fn run(cfg: &SimConfig) -> Result<SamplePath> {
    cfg.validate()?;
    let p = &cfg.params;
    let lambda = p.total_rate();
    let mu = p.mu();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(cfg.stream);
    let picker = WeightedIndex::new(p.lambdas()).expect("rates validated positive");
    let exp = |rate: f64, rng: &mut ChaCha8Rng| -> f64 {
        let e: f64 = Exp1.sample(rng);
        e / rate
    };

    let mut builder = PathBuilder::new(p.sources());
    let mut arrivals = 0u64;
    let mut valid = 0u64;
    let mut t = exp(lambda, &mut rng);
    let end_time = loop {
        match cfg.horizon {
            Horizon::Arrivals(n) if arrivals >= n => break t,
            Horizon::Time(limit) if t >= limit => break limit,
            _ => {}
        }
        arrivals += 1;
        let source = picker.sample(&mut rng) + 1;
        let service = exp(mu, &mut rng);
        let gap = exp(lambda, &mut rng);
        if gap > service {
            let epoch = t + service;
            let inside = match cfg.horizon {
                Horizon::Time(limit) => epoch <= limit,
                Horizon::Arrivals(_) => true,
            };
            if inside {
                valid += 1;
                builder.push(epoch, source, service)?;
            }
        }
        t += gap;
    };
    Ok(builder.finish(arrivals, valid, end_time, cfg.warmup_fraction * end_time))
}

/// Runs replications on streams `0..reps` of `cfg.seed` and maps each path
/// through `f`. Output order follows the stream index.
pub fn run_replications<T, F>(cfg: &SimConfig, reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&SamplePath) -> T + Sync,
{
    cfg.validate()?;
    (0..reps as u64)
        .into_par_iter()
        .map(|stream| run(&cfg.clone().with_stream(stream)).map(|path| f(&path)))
        .collect()
}

pub const MIN_INTERVAL_SAMPLES: usize = 10_000;

fn mean_and_se(samples: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for x in samples {
        n += 1;
        let d = x - mean;
        mean += d / n as f64;
        m2 += d * (x - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, (var / n as f64).sqrt(), n)
}

/// Compares the update-interval law of one path against its closed forms:
/// the first three moments of the global interval, the long-run update rate
/// and each source's mean interval. Intervals are i.i.d., so standard errors
/// come from the sample itself.
pub fn validate_interval_law(path: &SamplePath, p: &ModelParams) -> Result<Vec<Comparison>> {
    if path.sources() != p.sources() {
        return Err(AoiError::InvalidConfig(format!(
            "path has {} sources, model has {}",
            path.sources(),
            p.sources()
        )));
    }
    let w = path.window().ok_or(AoiError::EmptyWindow)?;
    let epochs: Vec<f64> = path.global[w.first..=w.last].iter().map(|g| g.epoch).collect();
    let gaps: Vec<f64> = epochs.windows(2).map(|e| e[1] - e[0]).collect();
    if gaps.len() < MIN_INTERVAL_SAMPLES {
        return Err(AoiError::InsufficientSamples {
            needed: MIN_INTERVAL_SAMPLES,
            got: gaps.len(),
        });
    }
    let theory = analytics::update_interval_moments(p);
    let mut rows = Vec::new();
    for (name, power, analytic) in [
        ("interval_mean", 1, theory.first),
        ("interval_m2", 2, theory.second),
        ("interval_m3", 3, theory.third),
    ] {
        let (m, se, _) = mean_and_se(gaps.iter().map(|g| g.powi(power)));
        rows.push(Comparison::new(name, analytic, m, Some(se)));
    }
    let (mean_gap, se_gap, _) = mean_and_se(gaps.iter().copied());
    let (start, end) = (epochs[0], epochs[epochs.len() - 1]);
    rows.push(Comparison::new(
        "update_rate",
        1.0 / theory.first,
        gaps.len() as f64 / (end - start),
        Some(se_gap / (mean_gap * mean_gap)),
    ));
    for k in 1..=p.sources() {
        let own: Vec<f64> = path.per_source[k - 1]
            .iter()
            .map(|u| u.epoch)
            .filter(|&e| e >= start && e <= end)
            .collect();
        if own.len() < 3 {
            continue;
        }
        let (m, se, _) = mean_and_se(own.windows(2).map(|e| e[1] - e[0]));
        rows.push(Comparison::new(
            format!("source_interval_mean[{k}]"),
            analytics::update_interval_mean_per_source(p, k)?,
            m,
            Some(se),
        ));
    }
    Ok(rows)
}
