#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use peel_core::adhesion::{adhesion_boundary, boundary_layers, refresh_layers, AdhesionBook, PairSet};
use peel_core::objectives::{Action, LossParams};
use peel_core::peeler::{guarded_solver, PeelState};
use peel_core::rollout::{loss_gradient_with_delta, RolloutSpec};
use peel_core::sim::{Constraint, ConstraintKind, ConstraintSet, ParticleSystem};
use peel_core::{build_scene, ConnectivityGraph, Length, Scene, SceneConfig, SolverParams, Vec3};
use rand::Rng;

/// Unit-square skin with an aligned dressing of the same resolution, no pretension.
pub fn aligned_scene(n: usize) -> Scene {
    build_scene(&SceneConfig {
        skin_grid: [n, n],
        skin_extent: [Length(1.0), Length(1.0)],
        dressing_grid: [n, n],
        dressing_extent: [Length(1.0), Length(1.0)],
        dressing_offset: [Length(0.0), Length(0.0)],
        skin_pretension: 0.0,
        landmark_grid: [2, 2],
        ..SceneConfig::default()
    })
    .unwrap()
}

/// A few centimeters of skin with a small dressing, cheap enough to run to completion.
pub fn tiny_config() -> SceneConfig {
    SceneConfig {
        skin_grid: [5, 5],
        skin_extent: [Length(0.04), Length(0.04)],
        dressing_grid: [3, 3],
        dressing_extent: [Length(0.02), Length(0.02)],
        dressing_offset: [Length(0.01), Length(0.01)],
        landmark_grid: [2, 2],
        adhesion_stiffness: 1.0,
        fracture_threshold_eps: 1e-5,
        ..SceneConfig::default()
    }
}

pub fn fresh_book(scene: &Scene) -> AdhesionBook {
    AdhesionBook::new(&scene.graph, &scene.constraints, scene.particles.driven_index)
}

/// Grid distance from `sources` to every dressing node, by plain BFS over (row, col).
pub fn bfs_distances(rows: usize, cols: usize, sources: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut dist = vec![vec![None; cols]; rows];
    let mut queue = VecDeque::new();
    for &(r, c) in sources {
        if dist[r][c].is_none() {
            dist[r][c] = Some(0);
            queue.push_back((r, c));
        }
    }
    while let Some((r, c)) = queue.pop_front() {
        let d = dist[r][c].unwrap();
        let mut next = Vec::new();
        if r > 0 {
            next.push((r - 1, c));
        }
        if r + 1 < rows {
            next.push((r + 1, c));
        }
        if c > 0 {
            next.push((r, c - 1));
        }
        if c + 1 < cols {
            next.push((r, c + 1));
        }
        for (nr, nc) in next {
            if dist[nr][nc].is_none() {
                dist[nr][nc] = Some(d + 1);
                queue.push_back((nr, nc));
            }
        }
    }
    dist
}

fn seed_cells(scene: &Scene, book: &AdhesionBook, seed: &PairSet) -> Vec<(usize, usize)> {
    let g = scene.dressing_grid;
    let mut cells: Vec<_> = seed.iter().map(|&p| g.row_col(book.pairs[p].0)).collect();
    if cells.is_empty() {
        cells.push(g.row_col(book.grasp_particle));
    }
    cells
}

/// Alive pairs whose dressing node sits at exactly `layer` edges from the seed.
fn alive_at(scene: &Scene, book: &AdhesionBook, dist: &[Vec<Option<usize>>], layer: usize) -> PairSet {
    let g = scene.dressing_grid;
    let mut out = BTreeSet::new();
    for r in 0..g.rows {
        for c in 0..g.cols {
            if dist[r][c] == Some(layer) {
                if let Some(p) = book.pair_of_dressing(g.index(r, c)) {
                    if book.alive[p] {
                        out.insert(p);
                    }
                }
            }
        }
    }
    out
}

pub fn oracle_boundary(scene: &Scene, book: &AdhesionBook, seed: &PairSet) -> PairSet {
    let g = scene.dressing_grid;
    let dist = bfs_distances(g.rows, g.cols, &seed_cells(scene, book, seed));
    alive_at(scene, book, &dist, 1)
}

/// On a fully adhesive grid every node outside the detached set is alive, so the layers
/// are simply the rings at distance 1 and 2.
pub fn oracle_layers(scene: &Scene, book: &AdhesionBook) -> (PairSet, PairSet) {
    let g = scene.dressing_grid;
    let dist = bfs_distances(g.rows, g.cols, &seed_cells(scene, book, &book.detached));
    (alive_at(scene, book, &dist, 1), alive_at(scene, book, &dist, 2))
}

/// Random detachment pattern on an aligned `n × n` scene. Density is drawn per case so
/// both sparse and nearly complete patterns show up.
pub fn random_book<R: Rng>(scene: &Scene, rng: &mut R) -> AdhesionBook {
    let mut constraints = scene.constraints.clone();
    let mut book = fresh_book(scene);
    let density: f64 = rng.random_range(0.0..1.0);
    for p in 0..book.len() {
        if rng.random_bool(density) {
            book.force_detach(&mut constraints, p);
        }
    }
    book
}

/// Runs `cases` randomized patterns over grids 3×3 to 8×8. Returns the first mismatch.
pub fn boundary_oracle_sweep<R: Rng>(cases: usize, rng: &mut R) -> Result<(), String> {
    let scenes: Vec<Scene> = (3..=8).map(aligned_scene).collect();
    for case in 0..cases {
        let scene = &scenes[rng.random_range(0..scenes.len())];
        let book = random_book(scene, rng);
        let (v1, v2) = boundary_layers(&book, &scene.graph);
        let (o1, o2) = oracle_layers(scene, &book);
        if v1 != o1 || v2 != o2 {
            return Err(format!(
                "case {case} on {}x{}: layers {v1:?}/{v2:?}, oracle {o1:?}/{o2:?}, detached {:?}",
                scene.dressing_grid.rows, scene.dressing_grid.cols, book.detached
            ));
        }
        // arbitrary seeds, not just the detached set
        let seed: PairSet = (0..book.len()).filter(|_| rng.random_bool(0.2)).collect();
        let b = adhesion_boundary(&seed, &scene.graph, &book);
        let o = oracle_boundary(scene, &book, &seed);
        if b != o {
            return Err(format!("case {case}: boundary of {seed:?} is {b:?}, oracle {o:?}"));
        }
    }
    Ok(())
}

/// One adhesive dressing node on a spring-held skin node, the driven node 5 mm above it,
/// and a pinned dressing node standing in for the rest of the still-attached dressing.
pub struct SinglePair {
    pub state: ParticleSystem,
    pub constraints: ConstraintSet,
    pub book: AdhesionBook,
}

pub fn single_pair() -> SinglePair {
    let h = 0.01;
    let positions = vec![
        Vec3::new(-h, 0.0, 0.0),  // 0 skin anchor, pinned
        Vec3::zeros(),            // 1 skin node
        Vec3::new(h, 0.0, 0.0),   // 2 skin anchor, pinned
        Vec3::zeros(),            // 3 adhesive dressing node
        Vec3::new(0.0, 0.0, 0.005), // 4 driven
        Vec3::new(h, 0.0, 0.0),   // 5 dressing, pinned
    ];
    let state = ParticleSystem {
        positions,
        inverse_mass: vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
        n_skin: 3,
        driven_index: 4,
        adhesive: vec![3],
    };
    let constraints = ConstraintSet::new(vec![
        Constraint::new(0, 1, h, 1e3, ConstraintKind::SkinInternal),
        Constraint::new(1, 2, h, 1e3, ConstraintKind::SkinInternal),
        Constraint::new(3, 4, 0.005, 1e4, ConstraintKind::DressingInternal),
        Constraint::new(3, 5, h, 1e4, ConstraintKind::DressingInternal),
        Constraint::adhesion(3, 1, 1.0, f64::INFINITY),
    ]);
    let graph = ConnectivityGraph {
        skin_edges: vec![(0, 1), (1, 2)],
        dressing_edges: vec![(3, 4), (3, 5)],
        adhesion_pairs: vec![(3, 1)],
        dressing_adjacency: vec![vec![4, 5], vec![3], vec![3]],
        n_skin: 3,
    };
    let mut book = AdhesionBook::new(&graph, &constraints, 4);
    refresh_layers(&mut book, &graph);
    assert_eq!(book.layer1.len(), 1);
    SinglePair {
        state,
        constraints,
        book,
    }
}

/// A small scene with random resolution and stiffness, advanced a few vertical steps so the
/// peel front is somewhere in the middle.
fn random_small_scene<R: Rng>(rng: &mut R) -> (Scene, PeelState) {
    let n = rng.random_range(4..=6);
    let m = rng.random_range(2..=3);
    let cfg = SceneConfig {
        skin_grid: [n, n],
        skin_extent: [Length(0.05), Length(0.05)],
        dressing_grid: [m, m],
        dressing_extent: [Length(0.02), Length(0.02)],
        dressing_offset: [Length(rng.random_range(0.005..0.025)), Length(rng.random_range(0.005..0.025))],
        skin_stiffness: 10f64.powf(rng.random_range(2.0..3.5)),
        adhesion_stiffness: 10f64.powf(rng.random_range(-0.5..0.5)),
        fracture_threshold_eps: f64::INFINITY,
        landmark_grid: [2, 2],
        ..SceneConfig::default()
    };
    let scene = build_scene(&cfg).unwrap();
    let solver = guarded_solver(&scene, &SolverParams::default());
    let (mut lp, _) = PeelState::start(&scene);
    let up = scene.grasp_normal() * 0.002;
    for t in 0..rng.random_range(1..4) {
        let target = lp.state.driven_position() + up;
        lp.commit(target, t + 1, &solver).unwrap();
    }
    refresh_layers(&mut lp.book, &scene.graph);
    (scene, lp)
}

/// Central differences at δ and δ/2 must agree to 1% wherever a component exceeds 1e-8.
/// Returns how many components were compared.
pub fn step_halving_sweep<R: Rng>(cases: usize, rng: &mut R) -> Result<usize, String> {
    let mut checked = 0;
    for case in 0..cases {
        let (scene, lp) = random_small_scene(rng);
        let solver = guarded_solver(&scene, &SolverParams::default());
        let loss = LossParams {
            sigma: scene.config.sdf_margin_sigma.meters(),
            ..LossParams::default()
        };
        let prev = Action::new(Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0), 0.002).unwrap();
        let action = Action::new(prev.direction + Vec3::new(0.1, -0.1, 0.05), 0.002).unwrap();
        let spec = RolloutSpec {
            horizon: 4,
            start_state: &lp.state,
            start_u: lp.state.driven_position(),
            constraints: &lp.constraints,
            book: &lp.book,
            layer1: &lp.book.layer1,
            layer2: &lp.book.layer2,
            prev_action: &prev,
            loss: &loss,
            solver: &solver,
            sdf: &scene.sdf,
            fd_delta: 1e-4,
        };
        let full = loss_gradient_with_delta(&spec, &action, 1e-4).map_err(|e| e.to_string())?;
        let half = loss_gradient_with_delta(&spec, &action, 5e-5).map_err(|e| e.to_string())?;
        for k in 0..3 {
            if full[k].abs() > 1e-8 {
                let rel = (full[k] - half[k]).abs() / full[k].abs();
                if rel > 1e-2 {
                    return Err(format!("case {case} axis {k}: {} vs {} ({rel:e})", full[k], half[k]));
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}
