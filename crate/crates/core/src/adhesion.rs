//! Adhesion fracture bookkeeping and boundary-layer extraction.
//!
//! Pairs are identified by their position in [`ConnectivityGraph::adhesion_pairs`].
//! The boundary operator `D(S)` collects the dressing particles of `S`, grows that set by
//! one axis-aligned dressing edge, drops the original set, and returns every still-alive
//! adhesion pair whose dressing particle landed in the difference.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::scene::ConnectivityGraph;
use crate::sim::{constraint_energy, ConstraintKind, ConstraintSet, ParticleSystem};

pub type PairSet = BTreeSet<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractureEvent {
    pub step: usize,
    pub pair: usize,
    pub dressing_index: usize,
    pub skin_index: usize,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdhesionBook {
    /// `(dressing, skin)` per pair id.
    pub pairs: Vec<(usize, usize)>,
    /// Constraint index backing each pair.
    pub constraint_index: Vec<usize>,
    pub alive: Vec<bool>,
    pub detached: PairSet,
    pub layer1: PairSet,
    pub layer2: PairSet,
    /// Dressing particle used as the peel origin while nothing has fractured.
    pub grasp_particle: usize,
    dressing_pair: Vec<Option<usize>>,
    n_skin: usize,
}

impl AdhesionBook {
    /// Book for a freshly built scene. Pairs are matched to adhesion constraints in order.
    pub fn new(
        graph: &ConnectivityGraph,
        constraints: &ConstraintSet,
        grasp_particle: usize,
    ) -> Self {
        let constraint_index: Vec<usize> = constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ConstraintKind::Adhesion)
            .map(|(k, _)| k)
            .collect();
        assert_eq!(
            constraint_index.len(),
            graph.adhesion_pairs.len(),
            "constraint set and graph disagree on adhesion pairs"
        );
        let n_dressing = graph.dressing_adjacency.len();
        let mut dressing_pair = vec![None; n_dressing];
        for (p, &(d, _)) in graph.adhesion_pairs.iter().enumerate() {
            dressing_pair[d - graph.n_skin] = Some(p);
        }
        let alive: Vec<bool> = constraint_index
            .iter()
            .map(|&k| constraints.constraints[k].stiffness > 0.0)
            .collect();
        let detached = alive
            .iter()
            .enumerate()
            .filter(|(_, a)| !**a)
            .map(|(p, _)| p)
            .collect();
        AdhesionBook {
            pairs: graph.adhesion_pairs.clone(),
            constraint_index,
            alive,
            detached,
            layer1: PairSet::new(),
            layer2: PairSet::new(),
            grasp_particle,
            dressing_pair,
            n_skin: graph.n_skin,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn all_detached(&self) -> bool {
        self.detached.len() == self.pairs.len()
    }

    pub fn pair_of_dressing(&self, dressing: usize) -> Option<usize> {
        self.dressing_pair
            .get(dressing.wrapping_sub(self.n_skin))
            .copied()
            .flatten()
    }

    /// Fracture `pair` outright (used for the grasp bootstrap and scripted tests).
    pub fn force_detach(&mut self, constraints: &mut ConstraintSet, pair: usize) {
        constraints.constraints[self.constraint_index[pair]].stiffness = 0.0;
        self.alive[pair] = false;
        self.detached.insert(pair);
    }

    /// Fracture the grasped corner's own pair, if it has one. Returns the pair id.
    pub fn bootstrap_grasp(&mut self, constraints: &mut ConstraintSet) -> Option<usize> {
        let pair = self.pair_of_dressing(self.grasp_particle)?;
        self.force_detach(constraints, pair);
        Some(pair)
    }

    /// Current stretch of `pair` (its adhesion rest length is zero).
    pub fn stretch(&self, positions: &[crate::Vec3], pair: usize) -> f64 {
        let (d, s) = self.pairs[pair];
        (positions[d] - positions[s]).norm()
    }
}

/// Apply the energy fracture rule to every alive adhesion constraint.
pub fn update_adhesion(
    state: &ParticleSystem,
    constraints: &ConstraintSet,
    book: &AdhesionBook,
    step: usize,
) -> (ConstraintSet, AdhesionBook, Vec<FractureEvent>) {
    let mut constraints = constraints.clone();
    let mut book = book.clone();
    let mut events = Vec::new();
    for pair in 0..book.pairs.len() {
        if !book.alive[pair] {
            continue;
        }
        let c = &mut constraints.constraints[book.constraint_index[pair]];
        let energy = constraint_energy(&state.positions, c);
        if energy >= c.fracture_threshold {
            c.stiffness = 0.0;
            book.alive[pair] = false;
            book.detached.insert(pair);
            let (d, s) = book.pairs[pair];
            events.push(FractureEvent {
                step,
                pair,
                dressing_index: d,
                skin_index: s,
                energy,
            });
        }
    }
    (constraints, book, events)
}

/// Pairs whose backing constraint has zero stiffness.
pub fn check_removal(constraints: &ConstraintSet, book: &AdhesionBook) -> PairSet {
    book.constraint_index
        .iter()
        .enumerate()
        .filter(|(_, &k)| constraints.constraints[k].stiffness == 0.0)
        .map(|(p, _)| p)
        .collect()
}

/// Dressing particles of `seed`, or the grasp particle when `seed` is empty.
fn seed_particles(seed: &PairSet, book: &AdhesionBook) -> BTreeSet<usize> {
    let mut inner: BTreeSet<usize> = seed.iter().map(|&p| book.pairs[p].0).collect();
    if inner.is_empty() {
        inner.insert(book.grasp_particle);
    }
    inner
}

fn expand(inner: &BTreeSet<usize>, graph: &ConnectivityGraph, book: &AdhesionBook) -> PairSet {
    let mut added = BTreeSet::new();
    for &d in inner {
        for &n in graph.dressing_neighbors(d) {
            if !inner.contains(&n) {
                added.insert(n);
            }
        }
    }
    added
        .into_iter()
        .filter_map(|d| book.pair_of_dressing(d))
        .filter(|&p| book.alive[p])
        .collect()
}

/// One-edge boundary expansion of `seed`. An empty seed grows from the grasp particle.
pub fn adhesion_boundary(seed: &PairSet, graph: &ConnectivityGraph, book: &AdhesionBook) -> PairSet {
    expand(&seed_particles(seed, book), graph, book)
}

/// `V¹ = D(V_det)`, `V² = D(V_det ∪ V¹)`. While nothing has fractured the grasp particle
/// stands in for the detached region in both expansions.
pub fn boundary_layers(book: &AdhesionBook, graph: &ConnectivityGraph) -> (PairSet, PairSet) {
    let mut inner = seed_particles(&book.detached, book);
    let v1 = expand(&inner, graph, book);
    inner.extend(v1.iter().map(|&p| book.pairs[p].0));
    let v2 = expand(&inner, graph, book);
    (v1, v2)
}

/// Recompute and store the layers in `book`.
pub fn refresh_layers(book: &mut AdhesionBook, graph: &ConnectivityGraph) {
    let (v1, v2) = boundary_layers(book, graph);
    book.layer1 = v1;
    book.layer2 = v2;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Length, SceneConfig};
    use crate::scene::{build_scene, Scene};
    use crate::Vec3;

    fn grid_scene(n: usize) -> Scene {
        let cfg = SceneConfig {
            skin_grid: [n, n],
            skin_extent: [Length(1.0), Length(1.0)],
            dressing_grid: [n, n],
            dressing_extent: [Length(1.0), Length(1.0)],
            dressing_offset: [Length(0.0), Length(0.0)],
            landmark_grid: [2, 2],
            ..SceneConfig::default()
        };
        build_scene(&cfg).unwrap()
    }

    fn book_for(scene: &Scene) -> AdhesionBook {
        AdhesionBook::new(&scene.graph, &scene.constraints, scene.particles.driven_index)
    }

    fn pair_at(scene: &Scene, book: &AdhesionBook, r: usize, c: usize) -> usize {
        book.pair_of_dressing(scene.dressing_grid.index(r, c)).unwrap()
    }

    #[test]
    fn fracture_threshold_arithmetic() {
        // one pair stretched vertically by `stretch`, k = 1, eps = 0.01
        for (stretch, fractures) in [(0.1, false), (0.2, true)] {
            let scene = grid_scene(3);
            let mut constraints = scene.constraints.clone();
            for c in &mut constraints.constraints {
                if c.kind == ConstraintKind::Adhesion {
                    c.stiffness = 1.0;
                    c.fracture_threshold = 0.01;
                }
            }
            let book = AdhesionBook::new(&scene.graph, &constraints, scene.particles.driven_index);
            let pair = pair_at(&scene, &book, 1, 1);
            let mut state = scene.particles.clone();
            state.positions[book.pairs[pair].0] += Vec3::new(0.0, 0.0, stretch);
            let (cs, b, events) = update_adhesion(&state, &constraints, &book, 7);
            assert_eq!(b.detached.contains(&pair), fractures);
            assert_eq!(events.len(), fractures as usize);
            if fractures {
                assert_eq!(cs.constraints[book.constraint_index[pair]].stiffness, 0.0);
                assert_eq!(events[0].step, 7);
                assert!((events[0].energy - 0.02).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fully_detached_update_is_identity() {
        let scene = grid_scene(3);
        let mut constraints = scene.constraints.clone();
        let mut book = book_for(&scene);
        for p in 0..book.len() {
            book.force_detach(&mut constraints, p);
        }
        let mut state = scene.particles.clone();
        state.positions[book.pairs[0].0].z += 1.0;
        let (cs, b, events) = update_adhesion(&state, &constraints, &book, 1);
        assert_eq!(cs, constraints);
        assert_eq!(b, book);
        assert!(events.is_empty());
    }

    #[test]
    fn check_removal_filters_zero_stiffness() {
        let scene = grid_scene(4);
        let mut constraints = scene.constraints.clone();
        let mut book = book_for(&scene);
        assert!(check_removal(&constraints, &book).is_empty());
        for p in [2, 5, 11] {
            book.force_detach(&mut constraints, p);
        }
        let removed = check_removal(&constraints, &book);
        assert_eq!(removed, PairSet::from([2, 5, 11]));
        assert_eq!(removed, book.detached);
    }

    #[test]
    fn corner_seed_on_3x3() {
        let scene = grid_scene(3);
        let book = book_for(&scene);
        let seed = PairSet::from([pair_at(&scene, &book, 0, 0)]);
        let got = adhesion_boundary(&seed, &scene.graph, &book);
        let want = PairSet::from([pair_at(&scene, &book, 0, 1), pair_at(&scene, &book, 1, 0)]);
        assert_eq!(got, want);
        let all: PairSet = (0..book.len()).collect();
        assert!(adhesion_boundary(&all, &scene.graph, &book).is_empty());
    }

    #[test]
    fn layers_on_fresh_4x4() {
        let scene = grid_scene(4);
        let book = book_for(&scene);
        let (v1, v2) = boundary_layers(&book, &scene.graph);
        let at = |r, c| pair_at(&scene, &book, r, c);
        assert_eq!(v1, PairSet::from([at(0, 1), at(1, 0)]));
        assert_eq!(v2, PairSet::from([at(0, 2), at(1, 1), at(2, 0)]));
    }

    #[test]
    fn single_survivor() {
        let scene = grid_scene(3);
        let mut constraints = scene.constraints.clone();
        let mut book = book_for(&scene);
        let keep = pair_at(&scene, &book, 2, 2);
        for p in 0..book.len() {
            if p != keep {
                book.force_detach(&mut constraints, p);
            }
        }
        let (v1, v2) = boundary_layers(&book, &scene.graph);
        assert_eq!(v1, PairSet::from([keep]));
        assert!(v2.is_empty());
        book.force_detach(&mut constraints, keep);
        let (v1, v2) = boundary_layers(&book, &scene.graph);
        assert!(v1.is_empty() && v2.is_empty());
        assert!(book.all_detached());
    }

    #[test]
    fn layer_progression() {
        let scene = grid_scene(6);
        let mut constraints = scene.constraints.clone();
        let mut book = book_for(&scene);
        book.bootstrap_grasp(&mut constraints);
        for _ in 0..4 {
            let (v1, v2) = boundary_layers(&book, &scene.graph);
            for &p in &v1 {
                book.force_detach(&mut constraints, p);
            }
            let (next_v1, _) = boundary_layers(&book, &scene.graph);
            let alive_v2: PairSet = v2.into_iter().filter(|&p| book.alive[p]).collect();
            assert_eq!(next_v1, alive_v2);
        }
    }
}
