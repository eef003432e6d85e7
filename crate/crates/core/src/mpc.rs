//! Sampled, gradient-refined model predictive control of the end effector.
//!
//! Each control step samples candidate directions around the previous action, refines each
//! by finite-difference gradient descent on its rollout loss, and commits the argmin.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adhesion::AdhesionBook;
use crate::error::{PeelError, Result};
use crate::objectives::{Action, LossBreakdown, LossParams};
use crate::rollout::{loss_gradient, rollout, RolloutSpec};
use crate::scene::Sdf;
use crate::sim::{ConstraintSet, ParticleSystem, SolverParams};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcParams {
    pub num_seeds: usize,
    pub horizon: usize,
    pub gd_iterations: usize,
    pub learning_rate: f64,
    pub sample_sigma: f64,
    /// Meters per control step.
    pub step_size: f64,
    pub rng_seed: u64,
    pub fd_delta: f64,
    /// First-step direction; defaults to the 45° peel-back direction at the grasp corner.
    pub initial_direction: Option<[f64; 3]>,
    /// Keep every candidate's (action, loss, gradient) in the run diagnostics.
    pub debug_candidates: bool,
}

impl Default for MpcParams {
    fn default() -> Self {
        MpcParams {
            num_seeds: 60,
            horizon: 10,
            gd_iterations: 1,
            learning_rate: 0.5,
            sample_sigma: 0.05,
            step_size: 0.002,
            rng_seed: 0,
            fd_delta: 1e-4,
            initial_direction: None,
            debug_candidates: false,
        }
    }
}

impl MpcParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_seeds == 0 {
            return Err(PeelError::config("mpc.num_seeds", "must be >= 1"));
        }
        if self.horizon == 0 {
            return Err(PeelError::config("mpc.horizon", "must be >= 1"));
        }
        if !(self.sample_sigma > 0.0 && self.sample_sigma.is_finite()) {
            return Err(PeelError::config("mpc.sample_sigma", "must be > 0"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(PeelError::config("mpc.step_size", "must be > 0"));
        }
        if !(self.fd_delta > 0.0 && self.fd_delta.is_finite()) {
            return Err(PeelError::config("mpc.fd_delta", "must be > 0"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(PeelError::config("mpc.learning_rate", "must be >= 0"));
        }
        if let Some(d) = self.initial_direction {
            if Action::new(Vec3::new(d[0], d[1], d[2]), 1.0).is_none() {
                return Err(PeelError::config("mpc.initial_direction", "must be nonzero"));
            }
        }
        Ok(())
    }
}

const MAX_RESAMPLES: usize = 16;

/// `normalize(prev + N(0, σ²) per axis)` for each seed.
pub fn sample_seeds<R: Rng + ?Sized>(
    prev: &Action,
    num_seeds: usize,
    sigma: f64,
    rng: &mut R,
) -> Vec<Action> {
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    (0..num_seeds)
        .map(|_| {
            for _ in 0..MAX_RESAMPLES {
                let d = prev.direction
                    + Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
                if let Some(a) = Action::new(d, prev.step_size) {
                    return a;
                }
            }
            *prev
        })
        .collect()
}

/// Per-candidate record of one control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateReport {
    pub id: usize,
    pub initial_direction: Vec3,
    pub initial_loss: f64,
    pub direction: Vec3,
    pub loss: f64,
    /// Last gradient evaluated, if any succeeded.
    pub gradient: Option<Vec3>,
    pub accepted_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcDiagnostics {
    pub candidates: Vec<CandidateReport>,
    pub best: usize,
    pub best_loss: LossBreakdown,
    /// Minimum initial loss minus the selected loss (non-negative).
    pub gd_improvement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcOutput {
    pub next_u: Vec3,
    pub action: Action,
    pub diagnostics: MpcDiagnostics,
}

/// Index of the smallest finite loss; ties go to the lowest index.
pub fn select_best(losses: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &l) in losses.iter().enumerate() {
        if !l.is_finite() {
            continue;
        }
        match best {
            Some(b) if losses[b] <= l => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(feature = "parallel")]
fn map_candidates<T, F>(items: &[Action], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &Action) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().enumerate().map(|(i, a)| f(i, a)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_candidates<T, F>(items: &[Action], f: F) -> Vec<T>
where
    F: Fn(usize, &Action) -> T,
{
    items.iter().enumerate().map(|(i, a)| f(i, a)).collect()
}

fn refine(spec: &RolloutSpec<'_>, id: usize, seed: &Action, params: &MpcParams) -> CandidateReport {
    let initial_loss = rollout(spec, seed)
        .map(|o| o.loss.total)
        .unwrap_or(f64::INFINITY);
    let mut report = CandidateReport {
        id,
        initial_direction: seed.direction,
        initial_loss,
        direction: seed.direction,
        loss: initial_loss,
        gradient: None,
        accepted_steps: 0,
    };
    if !initial_loss.is_finite() {
        return report;
    }
    let mut current = *seed;
    for _ in 0..params.gd_iterations {
        let Ok(g) = loss_gradient(spec, &current) else {
            break;
        };
        report.gradient = Some(g);
        let Some(trial) = Action::new(current.direction - g * params.learning_rate, current.step_size)
        else {
            continue;
        };
        let trial_loss = rollout(spec, &trial)
            .map(|o| o.loss.total)
            .unwrap_or(f64::INFINITY);
        if trial_loss <= report.loss {
            current = trial;
            report.loss = trial_loss;
            report.direction = trial.direction;
            report.accepted_steps += 1;
        }
    }
    report
}

/// Refine the given candidates and commit the best one.
pub fn mpc_step_with_candidates(
    spec: &RolloutSpec<'_>,
    candidates: &[Action],
    params: &MpcParams,
) -> Result<MpcOutput> {
    let reports = map_candidates(candidates, |i, a| refine(spec, i, a, params));
    let losses: Vec<f64> = reports.iter().map(|r| r.loss).collect();
    let best = select_best(&losses).ok_or_else(|| {
        PeelError::Controller(format!(
            "all {} candidate rollouts failed",
            candidates.len()
        ))
    })?;
    let chosen = Action {
        direction: reports[best].direction,
        step_size: candidates[best].step_size,
    };
    let best_loss = rollout(spec, &chosen)?.loss;
    let min_initial = reports
        .iter()
        .map(|r| r.initial_loss)
        .fold(f64::INFINITY, f64::min);
    Ok(MpcOutput {
        next_u: spec.start_u + chosen.displacement(),
        action: chosen,
        diagnostics: MpcDiagnostics {
            gd_improvement: (min_initial - reports[best].loss).max(0.0),
            candidates: reports,
            best,
            best_loss,
        },
    })
}

/// One MPC control step from `state` using the layers currently stored in `book`.
#[allow(clippy::too_many_arguments)]
pub fn mpc_step<R: Rng + ?Sized>(
    book: &AdhesionBook,
    prev_action: &Action,
    state: &ParticleSystem,
    constraints: &ConstraintSet,
    params: &MpcParams,
    sdf: &Sdf,
    loss: &LossParams,
    solver: &SolverParams,
    rng: &mut R,
) -> Result<MpcOutput> {
    let spec = RolloutSpec {
        horizon: params.horizon,
        start_state: state,
        start_u: state.driven_position(),
        constraints,
        book,
        layer1: &book.layer1,
        layer2: &book.layer2,
        prev_action,
        loss,
        solver,
        sdf,
        fd_delta: params.fd_delta,
    };
    let candidates = sample_seeds(prev_action, params.num_seeds, params.sample_sigma, rng);
    mpc_step_with_candidates(&spec, &candidates, params)
}
