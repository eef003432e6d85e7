//! Linear-trajectory prediction rollouts and the finite-difference gradient of their loss
//! with respect to the action direction.

use crate::adhesion::{AdhesionBook, PairSet};
use crate::error::Result;
use crate::objectives::{mpc_loss, Action, LossBreakdown, LossParams};
use crate::scene::Sdf;
use crate::sim::{step, ConstraintSet, ParticleSystem, SolverParams};
use crate::Vec3;

/// Everything a prediction needs. Borrowed snapshots are never mutated; adhesion stiffness
/// is frozen for the whole horizon and the peel objective uses the layers given here.
#[derive(Debug, Clone, Copy)]
pub struct RolloutSpec<'a> {
    pub horizon: usize,
    pub start_state: &'a ParticleSystem,
    pub start_u: Vec3,
    pub constraints: &'a ConstraintSet,
    pub book: &'a AdhesionBook,
    pub layer1: &'a PairSet,
    pub layer2: &'a PairSet,
    pub prev_action: &'a Action,
    pub loss: &'a LossParams,
    pub solver: &'a SolverParams,
    pub sdf: &'a Sdf,
    /// Central-difference perturbation applied to each direction component.
    pub fd_delta: f64,
}

#[derive(Debug, Clone)]
pub struct RolloutOutcome {
    pub final_state: ParticleSystem,
    pub u_path: Vec<Vec3>,
    pub loss: LossBreakdown,
}

pub fn rollout(spec: &RolloutSpec<'_>, action: &Action) -> Result<RolloutOutcome> {
    let mut state = spec.start_state.clone();
    let mut u = spec.start_u;
    let mut u_path = Vec::with_capacity(spec.horizon);
    let disp = action.displacement();
    for _ in 0..spec.horizon {
        u += disp;
        state = step(&state, spec.constraints, u, spec.solver)?;
        u_path.push(u);
    }
    let loss = mpc_loss(
        &state.positions,
        spec.book,
        spec.layer1,
        spec.layer2,
        &u_path,
        action,
        spec.prev_action,
        spec.loss,
        spec.sdf,
    );
    Ok(RolloutOutcome {
        final_state: state,
        u_path,
        loss,
    })
}

/// Loss only; a failed rollout scores `+∞`.
pub fn rollout_loss(spec: &RolloutSpec<'_>, action: &Action) -> f64 {
    rollout(spec, action)
        .map(|o| o.loss.total)
        .unwrap_or(f64::INFINITY)
}

/// Central-difference `∂L/∂v`, re-normalizing each perturbed direction before its rollout.
pub fn loss_gradient(spec: &RolloutSpec<'_>, action: &Action) -> Result<Vec3> {
    loss_gradient_with_delta(spec, action, spec.fd_delta)
}

pub fn loss_gradient_with_delta(
    spec: &RolloutSpec<'_>,
    action: &Action,
    delta: f64,
) -> Result<Vec3> {
    let mut grad = Vec3::zeros();
    for axis in 0..3 {
        let mut offset = Vec3::zeros();
        offset[axis] = delta;
        let perturbed = |d: Vec3| {
            Action::new(d, action.step_size).ok_or_else(|| {
                crate::error::PeelError::Controller("degenerate perturbed direction".into())
            })
        };
        let plus = rollout(spec, &perturbed(action.direction + offset)?)?;
        let minus = rollout(spec, &perturbed(action.direction - offset)?)?;
        grad[axis] = (plus.loss.total - minus.loss.total) / (2.0 * delta);
    }
    Ok(grad)
}
