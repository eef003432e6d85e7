//! Vertical-pull calibration of adhesion stiffness and fracture threshold.
//!
//! For each `(adhesion_stiffness, eps)` on the sweep grid the Up baseline is run on the
//! configured phantom. We record how far the skin landmarks have lifted at the moment the
//! grasped row of the dressing finishes detaching. A pair passes when that lift is visible
//! (inside `[lift_min, lift_max]`) and the peel still completes. Among passing pairs the one
//! closest to `lift_target` wins.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{PeelError, Result};
use crate::metrics::displacement_series;
use crate::peeler::{run_baseline, Method, RunRecord};
use crate::scene::{build_scene, Scene};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSweep {
    pub adhesion_stiffness: Vec<f64>,
    pub eps: Vec<f64>,
    /// Band of acceptable skin lift (m) when the first row lets go.
    pub lift_min: f64,
    pub lift_max: f64,
    pub lift_target: f64,
}

impl Default for CalibrationSweep {
    fn default() -> Self {
        CalibrationSweep {
            adhesion_stiffness: vec![0.3, 1.0, 3.0, 10.0],
            eps: vec![1e-5, 2e-5, 5e-5, 1e-4, 2e-4],
            lift_min: 0.005,
            lift_max: 0.020,
            lift_target: 0.010,
        }
    }
}

impl CalibrationSweep {
    pub fn validate(&self) -> Result<()> {
        if self.adhesion_stiffness.is_empty()
            || self.adhesion_stiffness.iter().any(|k| !(k.is_finite() && *k > 0.0))
        {
            return Err(PeelError::config(
                "adhesion_stiffness",
                "sweep needs at least one finite positive stiffness",
            ));
        }
        if self.eps.is_empty() || self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(PeelError::config("eps", "sweep needs at least one finite positive eps"));
        }
        if !(0.0 <= self.lift_min && self.lift_min <= self.lift_target && self.lift_target <= self.lift_max) {
            return Err(PeelError::config("lift_target", "need lift_min <= lift_target <= lift_max"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub adhesion_stiffness: f64,
    pub eps: f64,
    /// Max landmark displacement (m) when the grasped row is gone. `None` if it never was.
    pub lift_at_first_row: Option<f64>,
    pub first_row_step: Option<usize>,
    pub steps: usize,
    pub complete: bool,
    pub passes: bool,
}

impl CalibrationPoint {
    fn miss(&self, target: f64) -> f64 {
        match self.lift_at_first_row {
            Some(l) if self.complete => (l - target).abs(),
            Some(l) => (l - target).abs() + 1.0,
            None => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub chosen: Option<CalibrationPoint>,
    /// Every sweep point, nearest to the target lift first.
    pub ranked: Vec<CalibrationPoint>,
}

impl CalibrationReport {
    /// Closest `n` points, for when nothing met the criterion.
    pub fn closest(&self, n: usize) -> &[CalibrationPoint] {
        &self.ranked[..n.min(self.ranked.len())]
    }
}

/// Dressing particles in the grid row that holds the grasp.
fn grasp_row(scene: &Scene) -> Vec<usize> {
    let g = scene.dressing_grid;
    let (row, _) = g.row_col(scene.particles.driven_index);
    (0..g.cols).map(|c| g.index(row, c)).collect()
}

/// Step (1-based) at which every adhesion pair in the grasped row has fractured.
fn first_row_step(scene: &Scene, record: &RunRecord) -> Option<usize> {
    let row = grasp_row(scene);
    let adhesive: Vec<usize> = row
        .into_iter()
        .filter(|d| scene.graph.adhesion_pairs.iter().any(|&(a, _)| a == *d))
        .collect();
    let mut last = 0;
    for d in adhesive {
        let pair = scene.graph.adhesion_pairs.iter().position(|&(a, _)| a == d)?;
        if record.bootstrap_detached.contains(&pair) {
            continue;
        }
        let ev = record.fractures.iter().find(|e| e.pair == pair)?;
        last = last.max(ev.step);
    }
    Some(last.max(1))
}

pub fn probe_point(base: &ExperimentConfig, adhesion_stiffness: f64, eps: f64, sweep: &CalibrationSweep) -> Result<CalibrationPoint> {
    let mut scene_cfg = base.scene.clone();
    scene_cfg.adhesion_stiffness = adhesion_stiffness;
    scene_cfg.fracture_threshold_eps = eps;
    let scene = build_scene(&scene_cfg)?;
    let record = run_baseline(Method::Up, &scene, base.mpc.step_size, &base.solver, &base.limits)?;
    let series = displacement_series(&record, &scene.landmarks)?;
    let first = first_row_step(&scene, &record);
    let lift = first.and_then(|t| series.get(t - 1)).map(|frame| frame.iter().copied().fold(0.0, f64::max));
    let complete = record.is_complete();
    let passes = complete && lift.is_some_and(|l| l >= sweep.lift_min && l <= sweep.lift_max);
    Ok(CalibrationPoint {
        adhesion_stiffness,
        eps,
        lift_at_first_row: lift,
        first_row_step: first,
        steps: record.steps(),
        complete,
        passes,
    })
}

pub fn calibrate(base: &ExperimentConfig, sweep: &CalibrationSweep) -> Result<CalibrationReport> {
    base.validate()?;
    sweep.validate()?;
    let mut ranked = Vec::new();
    for &k in &sweep.adhesion_stiffness {
        for &e in &sweep.eps {
            ranked.push(probe_point(base, k, e, sweep)?);
        }
    }
    // stable sort keeps grid order among ties
    ranked.sort_by(|a, b| a.miss(sweep.lift_target).total_cmp(&b.miss(sweep.lift_target)));
    let chosen = ranked.iter().find(|p| p.passes).cloned();
    Ok(CalibrationReport { chosen, ranked })
}
