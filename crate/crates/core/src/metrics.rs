//! Landmark displacement metrics and cross-method comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{PeelError, Result};
use crate::peeler::{RunRecord, RunStatus};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub indices: Vec<usize>,
    pub rest_positions: Vec<Vec3>,
}

/// `series[t][i]` is the displacement magnitude (meters) of landmark `i` after step `t + 1`.
pub type DisplacementSeries = Vec<Vec<f64>>;

fn check_frames(run: &RunRecord, landmarks: &LandmarkSet) -> Result<()> {
    if run.landmark_frames.len() != run.steps() {
        return Err(PeelError::Metrics(format!(
            "run has {} steps but {} landmark frames",
            run.steps(),
            run.landmark_frames.len()
        )));
    }
    if let Some(t) = run
        .landmark_frames
        .iter()
        .position(|f| f.len() != landmarks.indices.len())
    {
        return Err(PeelError::Metrics(format!(
            "landmark frame {} has the wrong number of rows",
            t + 1
        )));
    }
    Ok(())
}

pub fn displacement_series(run: &RunRecord, landmarks: &LandmarkSet) -> Result<DisplacementSeries> {
    check_frames(run, landmarks)?;
    Ok(run
        .landmark_frames
        .iter()
        .map(|frame| {
            frame
                .iter()
                .zip(&landmarks.rest_positions)
                .map(|(p, r)| (p - r).norm())
                .collect()
        })
        .collect())
}

/// Raw displacement vectors per step and landmark, for external plotting.
pub fn displacement_components(
    run: &RunRecord,
    landmarks: &LandmarkSet,
) -> Result<Vec<Vec<Vec3>>> {
    check_frames(run, landmarks)?;
    Ok(run
        .landmark_frames
        .iter()
        .map(|frame| {
            frame
                .iter()
                .zip(&landmarks.rest_positions)
                .map(|(p, r)| p - r)
                .collect()
        })
        .collect())
}

fn nonempty(series: &DisplacementSeries) -> Result<()> {
    if series.is_empty() || series.iter().all(|row| row.is_empty()) {
        return Err(PeelError::Metrics("empty displacement series".to_string()));
    }
    Ok(())
}

/// Largest displacement over all landmarks and steps, in millimeters.
pub fn d_max(series: &DisplacementSeries) -> Result<f64> {
    nonempty(series)?;
    Ok(series
        .iter()
        .flatten()
        .fold(0.0_f64, |m, &d| m.max(d))
        * 1e3)
}

/// Mean displacement over all landmark-step samples, in millimeters.
pub fn d_mean(series: &DisplacementSeries) -> Result<f64> {
    nonempty(series)?;
    let count: usize = series.iter().map(Vec::len).sum();
    let sum: f64 = series.iter().flatten().sum();
    Ok(sum / count as f64 * 1e3)
}

/// Mean displacement (mm) over the first `fraction` of a run's steps.
pub fn early_mean(series: &DisplacementSeries, fraction: f64) -> Result<f64> {
    nonempty(series)?;
    let n = ((series.len() as f64 * fraction).ceil() as usize).clamp(1, series.len());
    d_mean(&series[..n].to_vec())
}

/// Contents of a run's `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub method: String,
    pub d_max_mm: f64,
    pub d_mean_mm: f64,
    pub steps: usize,
    pub fractures: usize,
    pub status: String,
    pub rng_seed: u64,
    /// Fingerprint of the resolved scene configuration.
    pub scene_id: String,
}

impl RunMetrics {
    pub fn from_run(
        run: &RunRecord,
        landmarks: &LandmarkSet,
        rng_seed: u64,
        scene_id: &str,
    ) -> Result<Self> {
        let series = displacement_series(run, landmarks)?;
        let (d_max_mm, d_mean_mm) = if series.is_empty() {
            (0.0, 0.0)
        } else {
            (d_max(&series)?, d_mean(&series)?)
        };
        Ok(RunMetrics {
            method: run.method.name().to_string(),
            d_max_mm,
            d_mean_mm,
            steps: run.steps(),
            fractures: run.fractures.len() + run.bootstrap_detached.len(),
            status: match &run.status {
                RunStatus::Complete => "complete".to_string(),
                RunStatus::Incomplete => "incomplete".to_string(),
                RunStatus::Failed(r) => format!("failed: {r}"),
            },
            rng_seed,
            scene_id: scene_id.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub n: usize,
    pub d_max_mean: f64,
    pub d_max_std: f64,
    pub d_mean_mean: f64,
    pub d_mean_std: f64,
}

/// Mean and sample standard deviation; a single sample has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// One row per method, in order of first appearance.
pub fn compare_table(runs: &[RunMetrics]) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&RunMetrics>> = BTreeMap::new();
    for r in runs {
        if !groups.contains_key(r.method.as_str()) {
            order.push(&r.method);
        }
        groups.entry(&r.method).or_default().push(r);
    }
    order
        .into_iter()
        .map(|m| {
            let g = &groups[m];
            let maxes: Vec<f64> = g.iter().map(|r| r.d_max_mm).collect();
            let means: Vec<f64> = g.iter().map(|r| r.d_mean_mm).collect();
            let (d_max_mean, d_max_std) = mean_std(&maxes);
            let (d_mean_mean, d_mean_std) = mean_std(&means);
            MethodSummary {
                method: m.to_string(),
                n: g.len(),
                d_max_mean,
                d_max_std,
                d_mean_mean,
                d_mean_std,
            }
        })
        .collect()
}

pub fn table_to_csv(rows: &[MethodSummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn table_to_text(rows: &[MethodSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>18} {:>18}", "method", "D_max (mm)", "D_mean (mm)");
    for r in rows {
        let label = format!("{} (n={})", r.method, r.n);
        let _ = writeln!(
            s,
            "{:<16} {:>18} {:>18}",
            label,
            format!("{:.2} ± {:.2}", r.d_max_mean, r.d_max_std),
            format!("{:.2} ± {:.2}", r.d_mean_mean, r.d_mean_std),
        );
    }
    s
}
