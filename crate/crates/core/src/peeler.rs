//! The outer peeling loop and the two heuristic baselines.
//!
//! Every controller shares the same commit machinery: predict with the current stiffness,
//! fracture on the prediction, then re-solve the step from the previous state with the
//! updated stiffness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adhesion::{check_removal, refresh_layers, update_adhesion, AdhesionBook, FractureEvent};
use crate::error::{PeelError, Result};
use crate::mpc::{mpc_step, CandidateReport, MpcParams};
use crate::objectives::{Action, LossBreakdown, LossParams};
use crate::scene::{Scene, Sdf};
use crate::sim::{constraint_energy, step, ConstraintSet, ParticleSystem, SolverParams};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunLimits {
    pub max_steps: usize,
    /// Keep a full-state snapshot every this many committed steps (0 disables).
    pub snapshot_every: usize,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits {
            max_steps: 2000,
            snapshot_every: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mpc,
    Up,
    Arc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mpc => "mpc",
            Method::Up => "up",
            Method::Arc => "arc",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mpc" => Ok(Method::Mpc),
            "up" => Ok(Method::Up),
            "arc" => Ok(Method::Arc),
            other => Err(format!("unknown method `{other}` (expected mpc, up or arc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    Incomplete,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub candidates: usize,
    pub best_loss: f64,
    pub direction: Vec3,
    pub gd_improvement: f64,
    pub loss: LossBreakdown,
    /// Filled only when `MpcParams::debug_candidates` is set.
    pub candidate_detail: Vec<CandidateReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: Method,
    pub status: RunStatus,
    pub initial_state: ParticleSystem,
    pub final_state: ParticleSystem,
    /// End-effector position after each committed step.
    pub trajectory: Vec<Vec3>,
    pub actions: Vec<Action>,
    pub fractures: Vec<FractureEvent>,
    /// Pairs fractured before the first step (grasped corner).
    pub bootstrap_detached: Vec<usize>,
    /// Landmark positions after each committed step.
    pub landmark_frames: Vec<Vec<Vec3>>,
    /// `(step, positions)`; step 0 is the initial state.
    pub snapshots: Vec<(usize, Vec<Vec3>)>,
    pub detached_counts: Vec<usize>,
    /// Largest `E / ε` over alive adhesion pairs on each prediction, after its fracture update.
    pub post_fracture_energy_ratio: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub notes: Vec<String>,
    pub total_pairs: usize,
}

impl RunRecord {
    pub fn steps(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_complete(&self) -> bool {
        self.status == RunStatus::Complete
    }
}

/// Chooses the next end-effector position given the committed state.
pub trait Controller {
    fn next_target(
        &mut self,
        step_index: usize,
        state: &ParticleSystem,
        constraints: &ConstraintSet,
        book: &AdhesionBook,
    ) -> Result<(Vec3, Action)>;

    fn diagnostics(&mut self) -> Option<StepDiagnostics> {
        None
    }
}

/// Moves along the skin normal at the grasp point.
pub struct UpController {
    pub normal: Vec3,
    pub step_size: f64,
}

impl Controller for UpController {
    fn next_target(
        &mut self,
        _step_index: usize,
        state: &ParticleSystem,
        _constraints: &ConstraintSet,
        _book: &AdhesionBook,
    ) -> Result<(Vec3, Action)> {
        let a = Action {
            direction: self.normal,
            step_size: self.step_size,
        };
        Ok((state.driven_position() + a.displacement(), a))
    }
}

/// Circle about the dressing center in the plane spanned by the in-surface direction to the
/// grasp point and the surface normal. Sweeps from the grasp point over the center to the
/// far side, then continues along the normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcPath {
    pub center: Vec3,
    pub radius: f64,
    pub outward: Vec3,
    pub normal: Vec3,
    pub start_angle: f64,
    pub step_size: f64,
}

impl ArcPath {
    pub fn new(center: Vec3, normal: Vec3, grasp: Vec3, step_size: f64) -> Self {
        let rel = grasp - center;
        let along_n = rel.dot(&normal);
        let tangential = rel - normal * along_n;
        let outward = tangential.try_normalize(1e-15).unwrap_or_else(|| {
            // grasp directly above the center: any in-plane direction works
            normal.cross(&Vec3::x()).normalize()
        });
        ArcPath {
            center,
            radius: rel.norm(),
            outward,
            normal,
            start_angle: along_n.atan2(tangential.norm()),
            step_size,
        }
    }

    pub fn angle_at(&self, step_index: usize) -> f64 {
        self.start_angle + step_index as f64 * self.step_size / self.radius
    }

    pub fn on_circle(&self, angle: f64) -> Vec3 {
        self.center + (self.outward * angle.cos() + self.normal * angle.sin()) * self.radius
    }

    /// Target after `step_index` steps (0 is the grasp point).
    pub fn point(&self, step_index: usize) -> Vec3 {
        let angle = self.angle_at(step_index);
        let end = std::f64::consts::PI;
        if angle <= end {
            return self.on_circle(angle);
        }
        let past = (angle - end) * self.radius;
        self.on_circle(end) + self.normal * past
    }
}

pub struct ArcController {
    pub path: ArcPath,
}

impl Controller for ArcController {
    fn next_target(
        &mut self,
        step_index: usize,
        state: &ParticleSystem,
        _constraints: &ConstraintSet,
        _book: &AdhesionBook,
    ) -> Result<(Vec3, Action)> {
        let target = self.path.point(step_index + 1);
        let prev = state.driven_position();
        let action = Action::new(target - prev, self.path.step_size).unwrap_or(Action {
            direction: self.path.normal,
            step_size: self.path.step_size,
        });
        Ok((target, action))
    }
}

pub struct MpcController {
    pub params: MpcParams,
    pub loss: LossParams,
    pub solver: SolverParams,
    pub sdf: Sdf,
    pub prev: Action,
    rng: ChaCha8Rng,
    last: Option<StepDiagnostics>,
}

impl MpcController {
    pub fn new(scene: &Scene, params: MpcParams, loss: LossParams, solver: SolverParams) -> Self {
        let prev = match params.initial_direction {
            Some(d) => Action::new(Vec3::new(d[0], d[1], d[2]), params.step_size),
            None => None,
        }
        .unwrap_or_else(|| Action {
            direction: default_initial_direction(scene),
            step_size: params.step_size,
        });
        MpcController {
            params,
            loss,
            solver,
            sdf: scene.sdf,
            prev,
            rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
            last: None,
        }
    }
}

/// Peel-back start: the grasp normal tilted 45° toward the dressing center, so the flap
/// folds back over the still-attached dressing.
pub fn default_initial_direction(scene: &Scene) -> Vec3 {
    let grasp = scene.particles.driven_position();
    let n = scene.grasp_normal();
    let rel = scene.dressing_center - grasp;
    let inward = (rel - n * rel.dot(&n)).try_normalize(1e-15).unwrap_or_else(Vec3::zeros);
    (n + inward).normalize()
}

impl Controller for MpcController {
    fn next_target(
        &mut self,
        step_index: usize,
        state: &ParticleSystem,
        constraints: &ConstraintSet,
        book: &AdhesionBook,
    ) -> Result<(Vec3, Action)> {
        let out = mpc_step(
            book,
            &self.prev,
            state,
            constraints,
            &self.params,
            &self.sdf,
            &self.loss,
            &self.solver,
            &mut self.rng,
        )?;
        self.prev = out.action;
        self.last = Some(StepDiagnostics {
            step: step_index + 1,
            candidates: out.diagnostics.candidates.len(),
            best_loss: out.diagnostics.best_loss.total,
            direction: out.action.direction,
            gd_improvement: out.diagnostics.gd_improvement,
            loss: out.diagnostics.best_loss,
            candidate_detail: if self.params.debug_candidates {
                out.diagnostics.candidates
            } else {
                Vec::new()
            },
        });
        Ok((out.next_u, out.action))
    }

    fn diagnostics(&mut self) -> Option<StepDiagnostics> {
        self.last.take()
    }
}

/// Solver parameters with the scene's divergence guard filled in.
pub fn guarded_solver(scene: &Scene, solver: &SolverParams) -> SolverParams {
    SolverParams {
        divergence_bound: Some(solver.divergence_bound.unwrap_or(scene.divergence_bound())),
        ..*solver
    }
}

/// Mutable loop state shared by live runs, replay and interactive stepping.
#[derive(Debug, Clone)]
pub struct PeelState {
    pub state: ParticleSystem,
    pub constraints: ConstraintSet,
    pub book: AdhesionBook,
}

impl PeelState {
    /// Fresh state with the grasp bootstrap applied. Also returns the bootstrap pairs.
    pub fn start(scene: &Scene) -> (Self, Vec<usize>) {
        let mut constraints = scene.constraints.clone();
        let mut book = AdhesionBook::new(&scene.graph, &constraints, scene.particles.driven_index);
        let boot = book.bootstrap_grasp(&mut constraints).into_iter().collect();
        (
            PeelState {
                state: scene.particles.clone(),
                constraints,
                book,
            },
            boot,
        )
    }

    /// Predict, fracture, re-solve. Returns the fracture events and the post-update ratio.
    pub fn commit(
        &mut self,
        target: Vec3,
        step_index: usize,
        solver: &SolverParams,
    ) -> Result<(Vec<FractureEvent>, f64)> {
        let predicted = step(&self.state, &self.constraints, target, solver)?;
        let (constraints, book, events) =
            update_adhesion(&predicted, &self.constraints, &self.book, step_index);
        let ratio = book
            .constraint_index
            .iter()
            .zip(&book.alive)
            .filter(|(_, &alive)| alive)
            .map(|(&k, _)| {
                let c = &constraints.constraints[k];
                constraint_energy(&predicted.positions, c) / c.fracture_threshold
            })
            .fold(0.0, f64::max);
        let committed = step(&self.state, &constraints, target, solver)?;
        self.state = committed;
        self.constraints = constraints;
        self.book = book;
        debug_assert_eq!(check_removal(&self.constraints, &self.book), self.book.detached);
        Ok((events, ratio))
    }
}

/// Run a controller to completion, the step limit, or failure.
pub fn run_with_controller<C: Controller>(
    scene: &Scene,
    method: Method,
    controller: &mut C,
    solver: &SolverParams,
    limits: &RunLimits,
) -> RunRecord {
    let solver = guarded_solver(scene, solver);
    let (mut lp, boot) = PeelState::start(scene);
    let mut record = RunRecord {
        method,
        status: RunStatus::Incomplete,
        initial_state: scene.particles.clone(),
        final_state: scene.particles.clone(),
        trajectory: Vec::new(),
        actions: Vec::new(),
        fractures: Vec::new(),
        bootstrap_detached: boot,
        landmark_frames: Vec::new(),
        snapshots: vec![(0, scene.particles.positions.clone())],
        detached_counts: Vec::new(),
        post_fracture_energy_ratio: Vec::new(),
        diagnostics: Vec::new(),
        notes: Vec::new(),
        total_pairs: lp.book.len(),
    };
    if !record.bootstrap_detached.is_empty() {
        record
            .notes
            .push("grasped corner's adhesion pair fractured at t=0".to_string());
    }
    if method == Method::Arc {
        record.notes.push(
            "arc: circle about the dressing center through the grasp point, in the plane of \
             the surface normal; sweeps to the far side, then continues along the normal"
                .to_string(),
        );
    }

    let mut t = 0;
    record.status = loop {
        if lp.book.all_detached() {
            break RunStatus::Complete;
        }
        if t >= limits.max_steps {
            break RunStatus::Incomplete;
        }
        refresh_layers(&mut lp.book, &scene.graph);
        let (target, action) =
            match controller.next_target(t, &lp.state, &lp.constraints, &lp.book) {
                Ok(v) => v,
                Err(e) => break RunStatus::Failed(e.to_string()),
            };
        let (events, ratio) = match lp.commit(target, t + 1, &solver) {
            Ok(v) => v,
            Err(e) => break RunStatus::Failed(e.to_string()),
        };
        t += 1;
        record.trajectory.push(target);
        record.actions.push(action);
        record.fractures.extend(events);
        record.post_fracture_energy_ratio.push(ratio);
        record.detached_counts.push(lp.book.detached.len());
        record.landmark_frames.push(
            scene
                .landmarks
                .indices
                .iter()
                .map(|&k| lp.state.positions[k])
                .collect(),
        );
        if let Some(d) = controller.diagnostics() {
            record.diagnostics.push(d);
        }
        if limits.snapshot_every > 0 && t % limits.snapshot_every == 0 {
            record.snapshots.push((t, lp.state.positions.clone()));
        }
    };
    record.final_state = lp.state;
    record
}

pub fn run_peel(
    scene: &Scene,
    mpc: &MpcParams,
    loss: &LossParams,
    solver: &SolverParams,
    limits: &RunLimits,
) -> RunRecord {
    let mut loss = *loss;
    loss.sigma = scene.config.sdf_margin_sigma.meters();
    let mut controller = MpcController::new(scene, *mpc, loss, guarded_solver(scene, solver));
    run_with_controller(scene, Method::Mpc, &mut controller, solver, limits)
}

pub fn arc_path(scene: &Scene, step_size: f64) -> ArcPath {
    ArcPath::new(
        scene.dressing_center,
        scene.sdf.normal(scene.dressing_center),
        scene.particles.driven_position(),
        step_size,
    )
}

pub fn run_baseline(
    kind: Method,
    scene: &Scene,
    step_size: f64,
    solver: &SolverParams,
    limits: &RunLimits,
) -> Result<RunRecord> {
    match kind {
        Method::Up => {
            let mut c = UpController {
                normal: scene.grasp_normal(),
                step_size,
            };
            Ok(run_with_controller(scene, kind, &mut c, solver, limits))
        }
        Method::Arc => {
            let mut c = ArcController {
                path: arc_path(scene, step_size),
            };
            Ok(run_with_controller(scene, kind, &mut c, solver, limits))
        }
        Method::Mpc => Err(PeelError::Controller(
            "run_baseline expects up or arc".to_string(),
        )),
    }
}

/// Re-simulate a recorded end-effector sequence open loop. Returns the final state.
pub fn replay(scene: &Scene, trajectory: &[Vec3], solver: &SolverParams) -> Result<ParticleSystem> {
    let solver = guarded_solver(scene, solver);
    let (mut lp, _) = PeelState::start(scene);
    for (t, &u) in trajectory.iter().enumerate() {
        refresh_layers(&mut lp.book, &scene.graph);
        lp.commit(u, t + 1, &solver)?;
    }
    Ok(lp.state)
}
