//! Analytic-vs-simulated comparison rows and their CSV form.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One quantity compared between its closed form and a simulation estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    pub analytic: f64,
    pub simulated: f64,
    #[serde(rename = "se")]
    pub standard_error: Option<f64>,
    #[serde(rename = "z")]
    pub z_score: Option<f64>,
}

impl Comparison {
    pub fn new(quantity: impl Into<String>, analytic: f64, simulated: f64, standard_error: Option<f64>) -> Self {
        let diff = simulated - analytic;
        let z_score = standard_error.map(|se| {
            if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        });
        Self {
            quantity: quantity.into(),
            analytic,
            simulated,
            standard_error,
            z_score,
        }
    }

    pub fn relative_error(&self) -> f64 {
        ((self.simulated - self.analytic) / self.analytic).abs()
    }

    /// `false` only when a z-score exists and exceeds the threshold.
    pub fn within(&self, z_threshold: f64) -> bool {
        self.z_score.map_or(true, |z| z.abs() <= z_threshold)
    }
}

/// Writes rows as `quantity,analytic,simulated,se,z`; missing values are empty.
pub fn write_comparisons_csv<W: Write>(rows: &[Comparison], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparisons_csv<R: std::io::Read>(input: R) -> Result<Vec<Comparison>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
