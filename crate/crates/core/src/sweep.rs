//! Parameter sweeps of the two-source correlation coefficient over λ₁ with λ₂
//! fixed and one curve per service rate.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{AoiError, Result};
use crate::estimators::{default_s_grid, Estimate, ReplicationSummary};
use crate::model::ModelParams;
use crate::simulator::{self, SimConfig, GENERATOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Analytic,
    Simulate,
    Both,
}

impl SweepMode {
    pub fn simulates(self) -> bool {
        !matches!(self, SweepMode::Analytic)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub lambda2: f64,
    pub mus: Vec<f64>,
    pub lambda1_min: f64,
    pub lambda1_max: f64,
    pub points: usize,
    pub scale: GridScale,
    pub mode: SweepMode,
    pub arrivals: u64,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SweepSpec {
    /// λ₂ = 2, μ ∈ {1, 2, 4, 8}, 200 linear points of λ₁ in [0.1, 20].
    fn default() -> Self {
        Self {
            lambda2: 2.0,
            mus: vec![1.0, 2.0, 4.0, 8.0],
            lambda1_min: 0.1,
            lambda1_max: 20.0,
            points: 200,
            scale: GridScale::Linear,
            mode: SweepMode::Analytic,
            arrivals: 100_000,
            reps: 10,
            seed: 0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(AoiError::InvalidConfig("sweep grid is empty".into()));
        }
        if self.mus.is_empty() {
            return Err(AoiError::InvalidConfig("no service rates given".into()));
        }
        if !(self.lambda1_min <= self.lambda1_max) {
            return Err(AoiError::InvalidConfig(format!(
                "lambda1 range [{}, {}] is empty",
                self.lambda1_min, self.lambda1_max
            )));
        }
        if self.points == 1 && self.lambda1_min != self.lambda1_max {
            return Err(AoiError::InvalidConfig("a single grid point needs lambda1_min == lambda1_max".into()));
        }
        for &mu in &self.mus {
            for l1 in [self.lambda1_min, self.lambda1_max] {
                ModelParams::two_source(l1, self.lambda2, mu)?;
            }
        }
        if self.mode.simulates() && (self.reps == 0 || self.arrivals == 0) {
            return Err(AoiError::InvalidConfig("simulation needs reps > 0 and arrivals > 0".into()));
        }
        Ok(())
    }

    pub fn lambda1_grid(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.lambda1_min];
        }
        let (lo, hi) = (self.lambda1_min, self.lambda1_max);
        (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                match self.scale {
                    GridScale::Linear => lo + f * (hi - lo),
                    GridScale::Log => (lo.ln() + f * (hi.ln() - lo.ln())).exp(),
                }
            })
            .collect()
    }

    /// Service rates in ascending order without duplicates.
    pub fn sorted_mus(&self) -> Vec<f64> {
        let mut mus = self.mus.clone();
        mus.sort_by(f64::total_cmp);
        mus.dedup();
        mus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub mu: f64,
    pub rho_analytic: f64,
    pub rho_sim: Option<f64>,
    pub rho_se: Option<f64>,
}

/// Smallest analytic ρ on one μ curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveMinimum {
    pub mu: f64,
    pub lambda1: f64,
    pub rho: f64,
    /// False when the minimum sits on either end of the λ₁ grid.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub seed: u64,
    pub generator: String,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub spec: SweepSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub minima: Vec<CurveMinimum>,
    pub meta: SweepMeta,
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn simulate_point(spec: &SweepSpec, p: &ModelParams, point_index: u64) -> Result<Estimate> {
    let grids = default_s_grid(p);
    let reps = spec.reps as u64;
    let rhos = (0..reps)
        .map(|r| {
            let cfg = SimConfig::new(p.clone(), spec.seed)
                .with_arrivals(spec.arrivals)
                .with_stream(point_index * reps + r);
            let path = simulator::run(&cfg)?;
            Ok(ReplicationSummary::from_path(&path, &grids)?.pairs[0].rho)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Estimate::from_samples(&rhos))
}

/// Runs the sweep curve by curve, handing each finished curve to `on_curve`
/// (for incremental output) before starting the next one. Rows are ordered
/// by μ, then λ₁.
pub fn run_sweep<F>(spec: &SweepSpec, mut on_curve: F) -> Result<SweepResult>
where
    F: FnMut(&[SweepRow]) -> Result<()>,
{
    use rayon::prelude::*;

    spec.validate()?;
    let started_unix = unix_now();
    let grid = spec.lambda1_grid();
    let mut rows = Vec::with_capacity(grid.len() * spec.mus.len());
    let mut minima = Vec::new();
    for (curve, mu) in spec.sorted_mus().into_iter().enumerate() {
        let curve_rows = grid
            .par_iter()
            .enumerate()
            .map(|(i, &l1)| {
                let p = ModelParams::two_source(l1, spec.lambda2, mu)?;
                let rho_analytic = analytics::correlation_closed_form(&p)?;
                let (rho_sim, rho_se) = if spec.mode.simulates() {
                    let e = simulate_point(spec, &p, (curve * grid.len() + i) as u64)?;
                    (Some(e.value), e.se)
                } else {
                    (None, None)
                };
                Ok(SweepRow {
                    lambda1: l1,
                    lambda2: spec.lambda2,
                    mu,
                    rho_analytic,
                    rho_sim,
                    rho_se,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (idx, best) = curve_rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.rho_analytic.total_cmp(&b.1.rho_analytic))
            .expect("grid is nonempty");
        minima.push(CurveMinimum {
            mu,
            lambda1: best.lambda1,
            rho: best.rho_analytic,
            interior: idx > 0 && idx + 1 < curve_rows.len(),
        });
        on_curve(&curve_rows)?;
        rows.extend(curve_rows);
    }
    Ok(SweepResult {
        rows,
        minima,
        meta: SweepMeta {
            seed: spec.seed,
            generator: GENERATOR.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix,
            finished_unix: unix_now(),
            spec: spec.clone(),
        },
    })
}

/// CSV writer for sweep rows: `lambda1,lambda2,mu,rho_analytic` plus
/// `rho_sim,rho_se` when the sweep simulates.
pub struct SweepCsvWriter<W: Write> {
    inner: csv::Writer<W>,
    with_sim: bool,
}

impl<W: Write> SweepCsvWriter<W> {
    pub fn new(out: W, with_sim: bool) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        if with_sim {
            inner.write_record(["lambda1", "lambda2", "mu", "rho_analytic", "rho_sim", "rho_se"])?;
        } else {
            inner.write_record(["lambda1", "lambda2", "mu", "rho_analytic"])?;
        }
        inner.flush()?;
        Ok(Self { inner, with_sim })
    }

    /// Writes and flushes, so completed curves survive an interrupted run.
    pub fn write_rows(&mut self, rows: &[SweepRow]) -> Result<()> {
        for r in rows {
            if self.with_sim {
                let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
                self.inner.write_record([
                    r.lambda1.to_string(),
                    r.lambda2.to_string(),
                    r.mu.to_string(),
                    r.rho_analytic.to_string(),
                    opt(r.rho_sim),
                    opt(r.rho_se),
                ])?;
            } else {
                self.inner.serialize((r.lambda1, r.lambda2, r.mu, r.rho_analytic))?;
            }
        }
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_sweep_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let with_sim = r.headers()?.len() == 6;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<Option<f64>> {
            match rec.get(i).unwrap_or("") {
                "" => Ok(None),
                s => s
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|e| AoiError::Io(format!("bad number {s:?}: {e}"))),
            }
        };
        let req = |i: usize| -> Result<f64> { num(i)?.ok_or_else(|| AoiError::Io(format!("missing column {i}"))) };
        rows.push(SweepRow {
            lambda1: req(0)?,
            lambda2: req(1)?,
            mu: req(2)?,
            rho_analytic: req(3)?,
            rho_sim: if with_sim { num(4)? } else { None },
            rho_se: if with_sim { num(5)? } else { None },
        });
    }
    Ok(rows)
}
