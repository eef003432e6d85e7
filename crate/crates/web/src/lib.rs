//! Browser bindings: a boundary-layer explorer, a step-through peel, and a loss landscape.
//!
//! The demo scene is smaller than the experiment default so MPC steps stay interactive.

use wasm_bindgen::prelude::*;

use peel_core::adhesion::{boundary_layers, refresh_layers, AdhesionBook};
use peel_core::config::{Length, INCH};
use peel_core::mpc::MpcParams;
use peel_core::objectives::{penalty_from_distance, Action};
use peel_core::peeler::{
    arc_path, guarded_solver, ArcController, Controller, MpcController, PeelState, UpController,
};
use peel_core::rollout::{rollout_loss, RolloutSpec};
use peel_core::{build_scene, LossParams, Method, Scene, SceneConfig, SolverParams, Vec3};

/// Node states reported to JS, one byte per dressing node.
pub const ATTACHED: u8 = 0;
pub const DETACHED: u8 = 1;
pub const LAYER1: u8 = 2;
pub const LAYER2: u8 = 3;
/// Dressing node with no adhesion pair under it.
pub const LOOSE: u8 = 4;

pub fn demo_scene_config(dressing: usize) -> SceneConfig {
    // skin and dressing share a one-inch pitch so every adhesive node sits on a skin node
    let d = dressing.clamp(2, 12);
    let skin = d + 4;
    SceneConfig {
        skin_grid: [skin, skin],
        skin_extent: [Length(INCH * (skin - 1) as f64); 2],
        dressing_grid: [d, d],
        dressing_extent: [Length(INCH * (d - 1) as f64); 2],
        dressing_offset: [Length(2.0 * INCH); 2],
        landmark_grid: [4, 4],
        ..SceneConfig::default()
    }
}

fn node_states(scene: &Scene, book: &AdhesionBook, l1: &peel_core::PairSet, l2: &peel_core::PairSet) -> Vec<u8> {
    let n_skin = scene.particles.n_skin;
    (0..scene.dressing_grid.len())
        .map(|k| match book.pair_of_dressing(n_skin + k) {
            None => LOOSE,
            Some(p) if book.detached.contains(&p) => DETACHED,
            Some(p) if l1.contains(&p) => LAYER1,
            Some(p) if l2.contains(&p) => LAYER2,
            Some(_) => ATTACHED,
        })
        .collect()
}

fn flatten(points: &[Vec3]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

/// Click dressing nodes to detach or reattach them and watch V¹ and V² follow.
#[wasm_bindgen]
pub struct BoundaryExplorer {
    scene: Scene,
    book: AdhesionBook,
}

#[wasm_bindgen]
impl BoundaryExplorer {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize) -> Result<BoundaryExplorer, JsError> {
        let scene = build_scene(&demo_scene_config(size)).map_err(|e| JsError::new(&e.to_string()))?;
        let book = AdhesionBook::new(&scene.graph, &scene.constraints, scene.particles.driven_index);
        Ok(BoundaryExplorer { scene, book })
    }

    pub fn rows(&self) -> usize {
        self.scene.dressing_grid.rows
    }

    pub fn cols(&self) -> usize {
        self.scene.dressing_grid.cols
    }

    /// Flip the pair under dressing node `node` (row-major, 0-based).
    pub fn toggle(&mut self, node: usize) {
        let Some(pair) = self.book.pair_of_dressing(self.scene.particles.n_skin + node) else {
            return;
        };
        if self.book.detached.remove(&pair) {
            self.book.alive[pair] = true;
        } else {
            self.book.detached.insert(pair);
            self.book.alive[pair] = false;
        }
    }

    pub fn reset(&mut self) {
        self.book = AdhesionBook::new(&self.scene.graph, &self.scene.constraints, self.scene.particles.driven_index);
    }

    /// Dressing node currently standing in for an empty detached set.
    pub fn grasp_node(&self) -> usize {
        self.scene.particles.driven_index - self.scene.particles.n_skin
    }

    pub fn states(&self) -> Vec<u8> {
        let (l1, l2) = boundary_layers(&self.book, &self.scene.graph);
        node_states(&self.scene, &self.book, &l1, &l2)
    }
}

enum Driver {
    Up(UpController),
    Arc(ArcController),
    Mpc(Box<MpcController>),
}

impl Driver {
    fn as_controller(&mut self) -> &mut dyn Controller {
        match self {
            Driver::Up(c) => c,
            Driver::Arc(c) => c,
            Driver::Mpc(c) => c.as_mut(),
        }
    }
}

/// One peel, advanced a control step at a time from JS.
#[wasm_bindgen]
pub struct PeelDemo {
    scene: Scene,
    run: PeelState,
    driver: Driver,
    solver: SolverParams,
    loss: LossParams,
    mpc: MpcParams,
    steps: usize,
    status: String,
    effector: Vec<Vec3>,
    mean_mm: Vec<f64>,
    max_mm: Vec<f64>,
    prev: Action,
}

#[wasm_bindgen]
impl PeelDemo {
    /// `method` is `up`, `arc` or `mpc`. `seeds` and `horizon` only matter for MPC.
    #[wasm_bindgen(constructor)]
    pub fn new(method: &str, size: usize, seeds: usize, horizon: usize, rng_seed: u32) -> Result<PeelDemo, JsError> {
        let err = |e: peel_core::PeelError| JsError::new(&e.to_string());
        let method: Method = method.parse().map_err(|e: String| JsError::new(&e))?;
        let scene = build_scene(&demo_scene_config(size)).map_err(err)?;
        let solver = guarded_solver(&scene, &SolverParams::default());
        let mut loss = LossParams::default();
        loss.sigma = scene.config.sdf_margin_sigma.meters();
        let mpc = MpcParams {
            num_seeds: seeds.max(1),
            horizon: horizon.max(1),
            rng_seed: rng_seed as u64,
            ..MpcParams::default()
        };
        mpc.validate().map_err(err)?;
        let step = mpc.step_size;
        let driver = match method {
            Method::Up => Driver::Up(UpController {
                normal: scene.grasp_normal(),
                step_size: step,
            }),
            Method::Arc => Driver::Arc(ArcController {
                path: arc_path(&scene, step),
            }),
            Method::Mpc => Driver::Mpc(Box::new(MpcController::new(&scene, mpc, loss, solver))),
        };
        let prev = Action {
            direction: peel_core::peeler::default_initial_direction(&scene),
            step_size: step,
        };
        let (run, _) = PeelState::start(&scene);
        let u0 = scene.particles.driven_position();
        Ok(PeelDemo {
            scene,
            run,
            driver,
            solver,
            loss,
            mpc,
            steps: 0,
            status: "running".into(),
            effector: vec![u0],
            mean_mm: vec![0.0],
            max_mm: vec![0.0],
            prev,
        })
    }

    pub fn done(&self) -> bool {
        self.status != "running"
    }

    pub fn status(&self) -> String {
        self.status.clone()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advance one control step. Returns false once the peel has finished or failed.
    pub fn step(&mut self) -> bool {
        if self.done() {
            return false;
        }
        if self.run.book.all_detached() {
            self.status = "complete".into();
            return false;
        }
        if self.steps >= 600 {
            self.status = "incomplete".into();
            return false;
        }
        refresh_layers(&mut self.run.book, &self.scene.graph);
        let next = self
            .driver
            .as_controller()
            .next_target(self.steps, &self.run.state, &self.run.constraints, &self.run.book);
        let (target, action) = match next {
            Ok(v) => v,
            Err(e) => {
                self.status = format!("failed: {e}");
                return false;
            }
        };
        if let Err(e) = self.run.commit(target, self.steps + 1, &self.solver) {
            self.status = format!("failed: {e}");
            return false;
        }
        self.steps += 1;
        self.prev = action;
        self.effector.push(target);
        let d = self.landmark_displacements();
        self.mean_mm.push(d.iter().sum::<f64>() / d.len().max(1) as f64);
        self.max_mm.push(d.iter().copied().fold(0.0, f64::max));
        if self.run.book.all_detached() {
            self.status = "complete".into();
        }
        true
    }

    pub fn skin_rows(&self) -> usize {
        self.scene.skin_grid.rows
    }

    pub fn dressing_rows(&self) -> usize {
        self.scene.dressing_grid.rows
    }

    /// Skin grid node positions, xyz interleaved, row-major.
    pub fn skin_positions(&self) -> Vec<f64> {
        let g = self.scene.skin_grid;
        flatten(&self.run.state.positions[g.first..g.first + g.len()])
    }

    pub fn dressing_positions(&self) -> Vec<f64> {
        let g = self.scene.dressing_grid;
        flatten(&self.run.state.positions[g.first..g.first + g.len()])
    }

    pub fn landmark_positions(&self) -> Vec<f64> {
        let pts: Vec<Vec3> = self.scene.landmarks.indices.iter().map(|&k| self.run.state.positions[k]).collect();
        flatten(&pts)
    }

    /// Current displacement of each landmark from rest, mm.
    pub fn landmark_displacements(&self) -> Vec<f64> {
        let lm = &self.scene.landmarks;
        lm.indices
            .iter()
            .zip(&lm.rest_positions)
            .map(|(&k, r)| (self.run.state.positions[k] - r).norm() * 1e3)
            .collect()
    }

    pub fn dressing_states(&self) -> Vec<u8> {
        let (l1, l2) = boundary_layers(&self.run.book, &self.scene.graph);
        node_states(&self.scene, &self.run.book, &l1, &l2)
    }

    pub fn effector_path(&self) -> Vec<f64> {
        flatten(&self.effector)
    }

    /// Mean landmark displacement per step, mm.
    pub fn mean_history(&self) -> Vec<f64> {
        self.mean_mm.clone()
    }

    pub fn max_history(&self) -> Vec<f64> {
        self.max_mm.clone()
    }

    pub fn detached_count(&self) -> usize {
        self.run.book.detached.len()
    }

    pub fn pair_count(&self) -> usize {
        self.run.book.len()
    }

    /// MPC loss for repeating each direction over the horizon from the current state.
    /// Directions cover azimuth `[0, 2π)` × elevation `[-15°, 90°]`, row-major by elevation.
    pub fn loss_map(&self, n_azimuth: usize, n_elevation: usize) -> Vec<f64> {
        let mut book = self.run.book.clone();
        refresh_layers(&mut book, &self.scene.graph);
        let spec = RolloutSpec {
            horizon: self.mpc.horizon,
            start_state: &self.run.state,
            start_u: self.run.state.driven_position(),
            constraints: &self.run.constraints,
            book: &book,
            layer1: &book.layer1,
            layer2: &book.layer2,
            prev_action: &self.prev,
            loss: &self.loss,
            solver: &self.solver,
            sdf: &self.scene.sdf,
            fd_delta: self.mpc.fd_delta,
        };
        let mut out = Vec::with_capacity(n_azimuth * n_elevation);
        for e in 0..n_elevation {
            let el = elevation(e, n_elevation);
            for a in 0..n_azimuth {
                let az = std::f64::consts::TAU * a as f64 / n_azimuth as f64;
                let dir = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
                let action = Action::new(dir, self.mpc.step_size).expect("unit direction");
                out.push(rollout_loss(&spec, &action));
            }
        }
        out
    }

    /// Last committed direction as `[azimuth, elevation]` in radians.
    pub fn last_direction(&self) -> Vec<f64> {
        let d = self.prev.direction;
        vec![d.y.atan2(d.x).rem_euclid(std::f64::consts::TAU), d.z.clamp(-1.0, 1.0).asin()]
    }
}

fn elevation(i: usize, n: usize) -> f64 {
    let lo = -15f64.to_radians();
    let hi = std::f64::consts::FRAC_PI_2;
    if n <= 1 {
        return 0.5 * (lo + hi);
    }
    lo + (hi - lo) * i as f64 / (n - 1) as f64
}

/// `exp(−min(φ − σ, 0))`, both lengths in mm.
#[wasm_bindgen]
pub fn penalty(phi_mm: f64, sigma_mm: f64) -> f64 {
    penalty_from_distance(phi_mm * 1e-3, sigma_mm * 1e-3)
}
