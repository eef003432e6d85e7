//! Quasi-static XPBD stepper.
//!
//! Each call to [`step`] places the driven particle at the end-effector target and then
//! runs Gauss-Seidel sweeps of compliant distance-constraint projection. Lagrange
//! multipliers start from zero every step and the pseudo-timestep is 1, so the compliance
//! of a constraint is simply `1 / k`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{PeelError, Result};
use crate::Vec3;

/// Which body a particle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Body {
    Skin,
    Dressing,
}

impl Body {
    pub fn tag(self) -> &'static str {
        match self {
            Body::Skin => "skin",
            Body::Dressing => "dressing",
        }
    }
}

/// Full skin + dressing state.
///
/// Skin particles occupy `0..n_skin`, dressing particles `n_skin..len`. The driven
/// particle is a dressing particle that follows the end effector exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem {
    pub positions: Vec<Vec3>,
    /// Zero means pinned.
    pub inverse_mass: Vec<f64>,
    pub n_skin: usize,
    pub driven_index: usize,
    /// Dressing particles carrying an adhesion pair, sorted.
    pub adhesive: Vec<usize>,
}

impl ParticleSystem {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn skin_range(&self) -> Range<usize> {
        0..self.n_skin
    }

    pub fn dressing_range(&self) -> Range<usize> {
        self.n_skin..self.positions.len()
    }

    pub fn body_of(&self, index: usize) -> Body {
        if index < self.n_skin {
            Body::Skin
        } else {
            Body::Dressing
        }
    }

    pub fn is_pinned(&self, index: usize) -> bool {
        self.inverse_mass[index] == 0.0
    }

    pub fn driven_position(&self) -> Vec3 {
        self.positions[self.driven_index]
    }

    /// Bitwise fingerprint of the positions, used to check snapshot immutability and replay.
    pub fn fingerprint(&self) -> u64 {
        fnv1a(
            self.positions
                .iter()
                .flat_map(|p| p.iter().flat_map(|c| c.to_bits().to_le_bytes()).collect::<Vec<_>>()),
        )
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    SkinInternal,
    DressingInternal,
    Adhesion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub i: usize,
    pub j: usize,
    pub rest_length: f64,
    /// Energy weight `k`. Zero disables the constraint; `f64::INFINITY` makes it rigid.
    pub stiffness: f64,
    pub kind: ConstraintKind,
    /// Fracture energy, only meaningful for adhesion constraints.
    pub fracture_threshold: f64,
}

impl Constraint {
    pub fn new(i: usize, j: usize, rest_length: f64, stiffness: f64, kind: ConstraintKind) -> Self {
        Constraint {
            i,
            j,
            rest_length,
            stiffness,
            kind,
            fracture_threshold: f64::INFINITY,
        }
    }

    pub fn adhesion(i: usize, j: usize, stiffness: f64, fracture_threshold: f64) -> Self {
        Constraint {
            i,
            j,
            rest_length: 0.0,
            stiffness,
            kind: ConstraintKind::Adhesion,
            fracture_threshold,
        }
    }

    pub fn compliance(&self) -> f64 {
        1.0 / self.stiffness
    }
}

/// Constraints in solve order: skin, dressing, adhesion.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        ConstraintSet { constraints }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter()
    }

    pub fn total_energy(&self, positions: &[Vec3]) -> f64 {
        self.constraints
            .iter()
            .map(|c| constraint_energy(positions, c))
            .sum()
    }

    pub fn max_abs_violation(&self, positions: &[Vec3]) -> f64 {
        self.constraints
            .iter()
            .filter(|c| c.stiffness > 0.0)
            .map(|c| constraint_value(positions, c).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub iterations: usize,
    /// Optional per-step displacement applied to free particles before projection.
    pub gravity: Option<[f64; 3]>,
    /// Any coordinate beyond this magnitude aborts the step. Filled from the scene diagonal.
    pub divergence_bound: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            iterations: 30,
            gravity: None,
            divergence_bound: None,
        }
    }
}

/// `‖x_i − x_j‖ − rest`.
pub fn constraint_value(positions: &[Vec3], c: &Constraint) -> f64 {
    (positions[c.i] - positions[c.j]).norm() - c.rest_length
}

/// `½ k C²`. A satisfied rigid constraint has zero energy.
pub fn constraint_energy(positions: &[Vec3], c: &Constraint) -> f64 {
    let value = constraint_value(positions, c);
    if c.stiffness == 0.0 || value == 0.0 {
        return 0.0;
    }
    0.5 * c.stiffness * value * value
}

/// Advance the system one quasi-static step toward `u_target`.
pub fn step(
    state: &ParticleSystem,
    constraints: &ConstraintSet,
    u_target: Vec3,
    solver: &SolverParams,
) -> Result<ParticleSystem> {
    if !(u_target.x.is_finite() && u_target.y.is_finite() && u_target.z.is_finite()) {
        return Err(PeelError::Divergence {
            particle: state.driven_index,
            detail: format!("non-finite end-effector target {u_target:?}"),
        });
    }
    let mut next = state.clone();
    let x = &mut next.positions;
    let driven = state.driven_index;
    x[driven] = u_target;

    if let Some(g) = solver.gravity {
        let g = Vec3::new(g[0], g[1], g[2]);
        for (k, p) in x.iter_mut().enumerate() {
            if k != driven && state.inverse_mass[k] > 0.0 {
                *p += g;
            }
        }
    }

    // Active constraints with their weights and denominators resolved once per step.
    struct Active {
        i: usize,
        j: usize,
        rest: f64,
        alpha: f64,
        inv_denom: f64,
        wi: f64,
        wj: f64,
    }
    let weight = |k: usize| if k == driven { 0.0 } else { state.inverse_mass[k] };
    let active: Vec<Active> = constraints
        .constraints
        .iter()
        .filter(|c| c.stiffness != 0.0)
        .filter_map(|c| {
            let (wi, wj) = (weight(c.i), weight(c.j));
            let alpha = c.compliance();
            (wi + wj != 0.0).then(|| Active {
                i: c.i,
                j: c.j,
                rest: c.rest_length,
                alpha,
                inv_denom: 1.0 / (wi + wj + alpha),
                wi,
                wj,
            })
        })
        .collect();

    let mut lambda = vec![0.0; active.len()];
    for _ in 0..solver.iterations {
        for (c, lam) in active.iter().zip(lambda.iter_mut()) {
            let d = x[c.i] - x[c.j];
            let len = d.norm();
            if len <= f64::EPSILON * 1e-3 {
                continue;
            }
            let dlam = (c.rest - len - c.alpha * *lam) * c.inv_denom;
            *lam += dlam;
            let corr = d * (dlam / len);
            x[c.i] += corr * c.wi;
            x[c.j] -= corr * c.wj;
        }
    }

    for (k, p) in x.iter().enumerate() {
        let finite = p.x.is_finite() && p.y.is_finite() && p.z.is_finite();
        let bounded = solver
            .divergence_bound
            .is_none_or(|b| p.amax() <= b);
        if !finite || !bounded {
            return Err(PeelError::Divergence {
                particle: k,
                detail: format!("position {p:?} after {} iterations", solver.iterations),
            });
        }
    }
    Ok(next)
}
