//! Cost terms: boundary peel objective, SDF penetration penalty, direction smoothness and
//! the assembled MPC loss.

use serde::{Deserialize, Serialize};

use crate::adhesion::{AdhesionBook, PairSet};
use crate::error::{PeelError, Result};
use crate::scene::Sdf;
use crate::Vec3;

/// Sign applied to the smoothness term in the MPC loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessSign {
    /// `L = H + αΣP − βS`
    #[default]
    Subtract,
    /// `L = H + αΣP + βS`
    Add,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossParams {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// SDF margin in meters. Taken from the scene's `sdf_margin_sigma` at run time.
    #[serde(skip)]
    pub sigma: f64,
    pub smoothness_sign: SmoothnessSign,
}

impl Default for LossParams {
    fn default() -> Self {
        LossParams {
            gamma: 1.0,
            alpha: 0.1,
            beta: 0.01,
            sigma: 0.005,
            smoothness_sign: SmoothnessSign::Subtract,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("loss.gamma", self.gamma),
            ("loss.alpha", self.alpha),
            ("loss.beta", self.beta),
            ("loss.sigma", self.sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PeelError::config(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// A control direction and step size. Directions are kept unit length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub direction: Vec3,
    pub step_size: f64,
}

impl Action {
    /// Normalizes `direction`. Returns `None` for a zero or non-finite direction.
    pub fn new(direction: Vec3, step_size: f64) -> Option<Self> {
        let n = direction.norm();
        if !(n.is_finite() && n > 1e-12) {
            return None;
        }
        Some(Action {
            direction: direction / n,
            step_size,
        })
    }

    pub fn displacement(&self) -> Vec3 {
        self.direction * self.step_size
    }
}

fn mean_stretch(positions: &[Vec3], book: &AdhesionBook, layer: &PairSet) -> f64 {
    if layer.is_empty() {
        return 0.0;
    }
    let sum: f64 = layer.iter().map(|&p| book.stretch(positions, p)).sum();
    sum / layer.len() as f64
}

/// `H = −mean_{V¹} C + γ · mean_{V²} C`, with empty layers contributing zero.
pub fn peel_objective_layers(
    positions: &[Vec3],
    book: &AdhesionBook,
    layer1: &PairSet,
    layer2: &PairSet,
    gamma: f64,
) -> f64 {
    -mean_stretch(positions, book, layer1) + gamma * mean_stretch(positions, book, layer2)
}

/// Peel objective against the layers stored in `book`.
pub fn peel_objective(positions: &[Vec3], book: &AdhesionBook, gamma: f64) -> f64 {
    peel_objective_layers(positions, book, &book.layer1, &book.layer2, gamma)
}

/// `exp(−min(φ(u) − σ, 0))`.
pub fn penetration_penalty(u: Vec3, sdf: &Sdf, sigma: f64) -> f64 {
    penalty_from_distance(sdf.eval(u), sigma)
}

pub fn penalty_from_distance(phi: f64, sigma: f64) -> f64 {
    (-(phi - sigma).min(0.0)).exp()
}

/// `‖v_now − v_prev‖`.
pub fn smoothness(now: &Action, prev: &Action) -> f64 {
    (now.direction - prev.direction).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LossBreakdown {
    pub peel: f64,
    pub penalty_sum: f64,
    pub smoothness: f64,
    pub total: f64,
}

/// Assemble the rollout loss from its parts.
pub fn combine_loss(peel: f64, penalty_sum: f64, smooth: f64, params: &LossParams) -> LossBreakdown {
    let smooth_term = match params.smoothness_sign {
        SmoothnessSign::Subtract => -params.beta * smooth,
        SmoothnessSign::Add => params.beta * smooth,
    };
    LossBreakdown {
        peel,
        penalty_sum,
        smoothness: smooth,
        total: peel + params.alpha * penalty_sum + smooth_term,
    }
}

/// Full MPC loss of a rollout ending in `final_positions` along `u_path`.
#[allow(clippy::too_many_arguments)]
pub fn mpc_loss(
    final_positions: &[Vec3],
    book: &AdhesionBook,
    layer1: &PairSet,
    layer2: &PairSet,
    u_path: &[Vec3],
    now: &Action,
    prev: &Action,
    params: &LossParams,
    sdf: &Sdf,
) -> LossBreakdown {
    let peel = peel_objective_layers(final_positions, book, layer1, layer2, params.gamma);
    let penalty_sum: f64 = u_path
        .iter()
        .map(|&u| penetration_penalty(u, sdf, params.sigma))
        .sum();
    combine_loss(peel, penalty_sum, smoothness(now, prev), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, SQRT_2};

    #[test]
    fn penalty_examples() {
        let sigma = 0.01;
        assert_eq!(penalty_from_distance(sigma, sigma), 1.0);
        assert_eq!(penalty_from_distance(sigma + 0.3, sigma), 1.0);
        assert!((penalty_from_distance(sigma - 1.0, sigma) - E).abs() < 1e-12);
        let plane = Sdf::Plane { height: 0.0 };
        assert_eq!(penetration_penalty(Vec3::new(0.0, 0.0, 0.5), &plane, sigma), 1.0);
    }

    #[test]
    fn smoothness_examples() {
        let a = Action::new(Vec3::x(), 0.002).unwrap();
        let b = Action::new(-Vec3::x(), 0.002).unwrap();
        let c = Action::new(Vec3::y(), 0.002).unwrap();
        assert_eq!(smoothness(&a, &a), 0.0);
        assert_eq!(smoothness(&a, &b), 2.0);
        assert!((smoothness(&a, &c) - SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn action_normalizes() {
        let a = Action::new(Vec3::new(0.0, 3.0, 4.0), 0.01).unwrap();
        assert!((a.direction.norm() - 1.0).abs() < 1e-15);
        assert!(Action::new(Vec3::zeros(), 0.01).is_none());
        assert!(Action::new(Vec3::new(f64::NAN, 0.0, 0.0), 0.01).is_none());
    }

    #[test]
    fn loss_assembly_examples() {
        let p = LossParams::default();
        let l = combine_loss(-0.02, 10.0, 0.0, &p);
        assert!((l.total - 0.98).abs() < 1e-12);
        let l = combine_loss(-0.02, 10.0, 2.0, &p);
        assert!((l.total - 0.96).abs() < 1e-12);
        let zero = LossParams {
            alpha: 0.0,
            beta: 0.0,
            ..p
        };
        assert_eq!(combine_loss(-0.3, 17.0, 1.3, &zero).total, -0.3);
        let add = LossParams {
            smoothness_sign: SmoothnessSign::Add,
            ..p
        };
        assert!((combine_loss(-0.02, 10.0, 2.0, &add).total - 1.0).abs() < 1e-12);
    }
}
