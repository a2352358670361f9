//! Week-indexed per-patch series and incidence extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::dynamics::Trajectory;
use super::params::DiseaseParams;

pub const DAYS_PER_WEEK: f64 = 7.0;

/// Whether a series came out of the model or out of surveillance data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Model,
    Data,
}

/// Time-indexed per-patch scalar series (weekly case counts, weekly model
/// incidence, or aggregated patch series), tagged with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicSeries {
    pub provenance: Provenance,
    pub patch_ids: Vec<String>,
    /// Week index of the first value (1-based for dataset-aligned series).
    pub start_week: u32,
    /// Patch-major values: `values[patch][week]`.
    pub values: Vec<Vec<f64>>,
}

impl EpidemicSeries {
    pub fn new(
        provenance: Provenance,
        patch_ids: Vec<String>,
        start_week: u32,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if patch_ids.len() != values.len() {
            return Err(Error::DimensionMismatch {
                context: "series patch ids vs value rows",
                expected: patch_ids.len(),
                actual: values.len(),
            });
        }
        let weeks = values.first().map(Vec::len).unwrap_or(0);
        for row in &values {
            if row.len() != weeks {
                return Err(Error::DimensionMismatch {
                    context: "series row lengths",
                    expected: weeks,
                    actual: row.len(),
                });
            }
        }
        Ok(Self {
            provenance,
            patch_ids,
            start_week,
            values,
        })
    }

    pub fn weeks(&self) -> usize {
        self.values.first().map(Vec::len).unwrap_or(0)
    }

    pub fn patch_count(&self) -> usize {
        self.patch_ids.len()
    }

    /// Absolute week indices covered by the series.
    pub fn week_indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.start_week..self.start_week + self.weeks() as u32
    }

    pub fn patch_values(&self, id: &str) -> Result<&[f64]> {
        let idx = self
            .patch_ids
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| Error::UnknownPatch(id.to_string()))?;
        Ok(&self.values[idx])
    }

    /// Week-by-week sum over all patches.
    pub fn total(&self) -> Vec<f64> {
        let weeks = self.weeks();
        let mut out = vec![0.0; weeks];
        for row in &self.values {
            for (acc, v) in out.iter_mut().zip(row) {
                *acc += v;
            }
        }
        out
    }
}

/// Weekly new-case counts per patch: the integral of `lambda * E_h` over each
/// 7-day window, by trapezoidal quadrature of the sampled trajectory.
///
/// Requires a sampling stride of at most one day that divides the week.
pub fn weekly_incidence(
    trajectory: &Trajectory,
    params: &[DiseaseParams],
) -> Result<EpidemicSeries> {
    let stride = trajectory.stride_days();
    if stride > 1.0 + 1e-9 {
        return Err(Error::Config(format!(
            "weekly incidence needs a stride of at most 1 day, got {stride}"
        )));
    }
    if params.len() != trajectory.patch_count() {
        return Err(Error::DimensionMismatch {
            context: "incidence params vs trajectory patches",
            expected: trajectory.patch_count(),
            actual: params.len(),
        });
    }
    let per_week = DAYS_PER_WEEK / stride;
    if (per_week - per_week.round()).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "stride {stride} does not divide a 7-day week"
        )));
    }
    let per_week = per_week.round() as usize;
    let weeks = (trajectory.len().saturating_sub(1)) / per_week;
    if weeks == 0 {
        return Err(Error::InsufficientData(format!(
            "trajectory covers {} samples at stride {stride}, less than one week",
            trajectory.len()
        )));
    }

    let n = trajectory.patch_count();
    let mut values = vec![Vec::with_capacity(weeks); n];
    for (patch, row) in values.iter_mut().enumerate() {
        let lambda = params[patch].lambda;
        for w in 0..weeks {
            let lo = w * per_week;
            let mut acc = 0.0;
            for k in lo..lo + per_week {
                let a = trajectory.state(k, patch).e_h;
                let b = trajectory.state(k + 1, patch).e_h;
                acc += 0.5 * (a + b) * stride;
            }
            row.push(lambda * acc);
        }
    }
    EpidemicSeries::new(
        Provenance::Model,
        (0..n).map(|i| format!("patch_{i}")).collect(),
        1,
        values,
    )
}

/// As [`weekly_incidence`], but labeling patches with the given ids.
pub fn weekly_incidence_with_ids(
    trajectory: &Trajectory,
    params: &[DiseaseParams],
    ids: &[String],
) -> Result<EpidemicSeries> {
    let mut series = weekly_incidence(trajectory, params)?;
    if ids.len() != series.patch_count() {
        return Err(Error::DimensionMismatch {
            context: "incidence ids vs patches",
            expected: series.patch_count(),
            actual: ids.len(),
        });
    }
    series.patch_ids = ids.to_vec();
    Ok(series)
}
