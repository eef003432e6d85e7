//! Scene construction: skin and dressing grids, connectivity, adhesion pairing, pins,
//! landmarks and the analytic SDF of the skin surface.

use std::collections::BTreeSet;

use crate::config::{Geometry, GraspSite, PinSpec, SceneConfig};
use crate::error::{PeelError, Result};
use crate::metrics::LandmarkSet;
use crate::sim::{step, Constraint, ConstraintKind, ConstraintSet, ParticleSystem, SolverParams};
use crate::Vec3;

/// Analytic signed distance to the forbidden region under the skin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sdf {
    /// Half-space at and below `z = height`.
    Plane { height: f64 },
    /// Solid cylinder with axis parallel to y through `(axis_x, ·, axis_z)`.
    Cylinder {
        axis_x: f64,
        axis_z: f64,
        radius: f64,
    },
}

impl Sdf {
    pub fn eval(&self, p: Vec3) -> f64 {
        match *self {
            Sdf::Plane { height } => p.z - height,
            Sdf::Cylinder {
                axis_x,
                axis_z,
                radius,
            } => (p.x - axis_x).hypot(p.z - axis_z) - radius,
        }
    }

    /// Outward unit normal of the level set through `p`.
    pub fn normal(&self, p: Vec3) -> Vec3 {
        match *self {
            Sdf::Plane { .. } => Vec3::z(),
            Sdf::Cylinder { axis_x, axis_z, .. } => {
                let r = Vec3::new(p.x - axis_x, 0.0, p.z - axis_z);
                let n = r.norm();
                if n == 0.0 {
                    Vec3::z()
                } else {
                    r / n
                }
            }
        }
    }
}

/// Graph views over the particle indices. All indices are global particle indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConnectivityGraph {
    pub skin_edges: Vec<(usize, usize)>,
    pub dressing_edges: Vec<(usize, usize)>,
    /// `(dressing, skin)` pairs, in pair-id order.
    pub adhesion_pairs: Vec<(usize, usize)>,
    /// Axis-aligned neighbors of each dressing particle, indexed by `global - n_skin`.
    pub dressing_adjacency: Vec<Vec<usize>>,
    pub n_skin: usize,
}

impl ConnectivityGraph {
    pub fn dressing_neighbors(&self, dressing: usize) -> &[usize] {
        &self.dressing_adjacency[dressing - self.n_skin]
    }
}

/// Regular grid bookkeeping for one body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    /// Global index of grid node (0, 0).
    pub first: usize,
}

impl GridLayout {
    pub fn index(&self, row: usize, col: usize) -> usize {
        self.first + row * self.cols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        let local = index - self.first;
        (local / self.cols, local % self.cols)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut tris = Vec::with_capacity(2 * (self.rows - 1) * (self.cols - 1));
        for r in 0..self.rows - 1 {
            for c in 0..self.cols - 1 {
                let a = self.index(r, c);
                let b = self.index(r, c + 1);
                let d = self.index(r + 1, c);
                let e = self.index(r + 1, c + 1);
                tris.push([a, b, e]);
                tris.push([a, e, d]);
            }
        }
        tris
    }
}

/// Output of [`build_scene`]. Immutable once built.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub particles: ParticleSystem,
    pub constraints: ConstraintSet,
    pub graph: ConnectivityGraph,
    pub sdf: Sdf,
    pub landmarks: LandmarkSet,
    pub skin_grid: GridLayout,
    pub dressing_grid: GridLayout,
    /// Surface point under the dressing center.
    pub dressing_center: Vec3,
    /// Length of the skin bounding-box diagonal.
    pub diagonal: f64,
}

impl Scene {
    pub fn grasp_normal(&self) -> Vec3 {
        self.sdf.normal(self.particles.driven_position())
    }

    pub fn divergence_bound(&self) -> f64 {
        10.0 * self.diagonal
    }

    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut t = self.skin_grid.triangles();
        t.extend(self.dressing_grid.triangles());
        t
    }
}

/// Maps flat surface coordinates `(u, v)` onto the skin geometry.
struct Surface {
    geometry: Geometry,
    width: f64,
}

impl Surface {
    fn point(&self, u: f64, v: f64) -> Vec3 {
        match self.geometry {
            Geometry::FlatSheet => Vec3::new(u, v, 0.0),
            Geometry::Cylinder { radius, arc_span } => {
                let r = radius.meters();
                let theta = (u / self.width - 0.5) * arc_span;
                Vec3::new(r * theta.sin(), v, r * theta.cos() - r)
            }
        }
    }

    fn sdf(&self) -> Sdf {
        match self.geometry {
            Geometry::FlatSheet => Sdf::Plane { height: 0.0 },
            Geometry::Cylinder { radius, .. } => Sdf::Cylinder {
                axis_x: 0.0,
                axis_z: -radius.meters(),
                radius: radius.meters(),
            },
        }
    }
}

fn grid_edges(layout: &GridLayout, diagonals: bool) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for r in 0..layout.rows {
        for c in 0..layout.cols {
            let a = layout.index(r, c);
            if c + 1 < layout.cols {
                edges.push((a, layout.index(r, c + 1)));
            }
            if r + 1 < layout.rows {
                edges.push((a, layout.index(r + 1, c)));
            }
            if diagonals && r + 1 < layout.rows && c + 1 < layout.cols {
                edges.push((a, layout.index(r + 1, c + 1)));
                edges.push((layout.index(r, c + 1), layout.index(r + 1, c)));
            }
        }
    }
    edges
}

/// Reorder edges by greedy colouring so that consecutive edges rarely share a particle.
/// The solver's inner loop is latency bound, and independent neighbours let it overlap.
fn colour_order(edges: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    let mut classes: Vec<(BTreeSet<usize>, Vec<(usize, usize)>)> = Vec::new();
    for (a, b) in edges {
        match classes
            .iter_mut()
            .find(|(used, _)| !used.contains(&a) && !used.contains(&b))
        {
            Some((used, list)) => {
                used.insert(a);
                used.insert(b);
                list.push((a, b));
            }
            None => classes.push((BTreeSet::from([a, b]), vec![(a, b)])),
        }
    }
    classes.into_iter().flat_map(|(_, list)| list).collect()
}

fn skin_pins(config: &SceneConfig, grid: &GridLayout, inverse_mass: &mut [f64]) {
    let last_r = grid.rows - 1;
    let last_c = grid.cols - 1;
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let corner = (r == 0 || r == last_r) && (c == 0 || c == last_c);
            let edge = r == 0 || r == last_r || c == 0 || c == last_c;
            let pinned = match config.pinned {
                PinSpec::Corners => corner,
                PinSpec::Edges => edge,
                PinSpec::None => false,
            };
            if pinned {
                inverse_mass[grid.index(r, c)] = 0.0;
            }
        }
    }
}

/// Settle the pre-tensioned skin to equilibrium with the pins held.
fn relax_skin(positions: &mut [Vec3], inverse_mass: &[f64], constraints: &[Constraint]) {
    let pinned = inverse_mass.iter().position(|&w| w == 0.0);
    let mut state = ParticleSystem {
        positions: positions.to_vec(),
        inverse_mass: inverse_mass.to_vec(),
        n_skin: positions.len(),
        // a pinned node, or node 0 of an unpinned sheet, doubles as the "driven" anchor
        driven_index: pinned.unwrap_or(0),
        adhesive: Vec::new(),
    };
    let set = ConstraintSet::new(constraints.to_vec());
    // Same iteration count as the default run solver, so a default step is a fixed point.
    let solver = SolverParams::default();
    for _ in 0..RELAX_MAX_STEPS {
        let anchor = state.driven_position();
        let next = step(&state, &set, anchor, &solver).expect("relaxation stays finite");
        let moved = next
            .positions
            .iter()
            .zip(&state.positions)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        state = next;
        if moved < RELAX_TOLERANCE {
            break;
        }
    }
    positions.copy_from_slice(&state.positions);
}

const RELAX_MAX_STEPS: usize = 4000;
const RELAX_TOLERANCE: f64 = 1e-13;

pub fn build_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let [skin_rows, skin_cols] = config.skin_grid;
    let [dr_rows, dr_cols] = config.dressing_grid;
    let skin_w = config.skin_extent[0].meters();
    let skin_h = config.skin_extent[1].meters();
    let dr_w = config.dressing_extent[0].meters();
    let dr_h = config.dressing_extent[1].meters();
    let off_u = config.dressing_offset[0].meters();
    let off_v = config.dressing_offset[1].meters();
    let surface = Surface {
        geometry: config.geometry,
        width: skin_w,
    };
    let hx = skin_w / (skin_cols - 1) as f64;
    let hy = skin_h / (skin_rows - 1) as f64;

    let skin_grid = GridLayout {
        rows: skin_rows,
        cols: skin_cols,
        first: 0,
    };
    let n_grid = skin_grid.len();

    let mut positions: Vec<Vec3> = Vec::with_capacity(n_grid);
    for r in 0..skin_rows {
        for c in 0..skin_cols {
            positions.push(surface.point(c as f64 * hx, r as f64 * hy));
        }
    }

    let adhesive_local: Vec<(usize, usize)> = {
        let [[r0, c0], [r1, c1]] = config
            .adhesive_window
            .unwrap_or([[0, 0], [dr_rows - 1, dr_cols - 1]]);
        (r0..=r1)
            .flat_map(|r| (c0..=c1).map(move |c| (r, c)))
            .collect()
    };

    // Skin partner for each adhesive dressing node: an existing grid node when the
    // grids line up, otherwise an embedded skin particle tied to its enclosing quad.
    let tol_u = 1e-9 * hx;
    let tol_v = 1e-9 * hy;
    let dressing_uv = |r: usize, c: usize| {
        (
            off_u + c as f64 * dr_w / (dr_cols - 1) as f64,
            off_v + r as f64 * dr_h / (dr_rows - 1) as f64,
        )
    };
    let mut skin_edges = grid_edges(&skin_grid, true);
    let mut partner = vec![None; dr_rows * dr_cols];
    for &(r, c) in &adhesive_local {
        let (u, v) = dressing_uv(r, c);
        let fc = u / hx;
        let fr = v / hy;
        let (nc, nr) = (fc.round(), fr.round());
        if (u - nc * hx).abs() <= tol_u && (v - nr * hy).abs() <= tol_v {
            partner[r * dr_cols + c] = Some(skin_grid.index(nr as usize, nc as usize));
            continue;
        }
        let c0 = (fc.floor() as usize).min(skin_cols - 2);
        let r0 = (fr.floor() as usize).min(skin_rows - 2);
        let embedded = positions.len();
        positions.push(surface.point(u, v));
        let mut anchors = BTreeSet::new();
        for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            anchors.insert(skin_grid.index(r0 + dr, c0 + dc));
        }
        for a in anchors {
            skin_edges.push((a, embedded));
        }
        partner[r * dr_cols + c] = Some(embedded);
    }
    let n_skin = positions.len();
    let skin_edges = colour_order(skin_edges);

    let mut inverse_mass = vec![1.0; n_skin];
    skin_pins(config, &skin_grid, &mut inverse_mass);

    // Grid edges carry the pre-tension; links to embedded particles do not.
    let shrink = 1.0 - config.skin_pretension;
    let skin_constraints: Vec<Constraint> = skin_edges
        .iter()
        .map(|&(a, b)| {
            let d = (positions[a] - positions[b]).norm();
            let rest = if a < n_grid && b < n_grid { d * shrink } else { d };
            Constraint::new(a, b, rest, config.skin_stiffness, ConstraintKind::SkinInternal)
        })
        .collect();
    let relaxed = config.skin_pretension > 0.0 && config.skin_stiffness > 0.0;
    if relaxed {
        relax_skin(&mut positions, &inverse_mass, &skin_constraints);
    }

    // Points on the (possibly relaxed) skin surface, by bilinear interpolation of the grid.
    let skin_point = |u: f64, v: f64| -> Vec3 {
        if !relaxed {
            return surface.point(u, v);
        }
        let fc = (u / hx).clamp(0.0, (skin_cols - 1) as f64);
        let fr = (v / hy).clamp(0.0, (skin_rows - 1) as f64);
        let c0 = (fc.floor() as usize).min(skin_cols - 2);
        let r0 = (fr.floor() as usize).min(skin_rows - 2);
        let (tc, tr) = (fc - c0 as f64, fr - r0 as f64);
        let p = |r, c| positions[skin_grid.index(r, c)];
        (p(r0, c0) * (1.0 - tc) + p(r0, c0 + 1) * tc) * (1.0 - tr)
            + (p(r0 + 1, c0) * (1.0 - tc) + p(r0 + 1, c0 + 1) * tc) * tr
    };

    let dressing_grid = GridLayout {
        rows: dr_rows,
        cols: dr_cols,
        first: n_skin,
    };
    let mut dressing_positions = Vec::with_capacity(dressing_grid.len());
    for r in 0..dr_rows {
        for c in 0..dr_cols {
            dressing_positions.push(match partner[r * dr_cols + c] {
                Some(s) => positions[s],
                None => {
                    let (u, v) = dressing_uv(r, c);
                    skin_point(u, v)
                }
            });
        }
    }
    let (cu, cv) = (off_u + 0.5 * dr_w, off_v + 0.5 * dr_h);
    let dressing_center = skin_point(cu, cv);
    positions.extend(dressing_positions);
    inverse_mass.resize(positions.len(), 1.0);
    let dressing_edges = colour_order(grid_edges(&dressing_grid, true));

    let mut dressing_adjacency = vec![Vec::new(); dressing_grid.len()];
    for (a, b) in grid_edges(&dressing_grid, false) {
        dressing_adjacency[a - n_skin].push(b);
        dressing_adjacency[b - n_skin].push(a);
    }
    for n in &mut dressing_adjacency {
        n.sort_unstable();
    }

    let mut adhesion_pairs = Vec::with_capacity(adhesive_local.len());
    for &(r, c) in &adhesive_local {
        let s = partner[r * dr_cols + c].expect("adhesive node has a partner");
        adhesion_pairs.push((dressing_grid.index(r, c), s));
    }

    let (gr, gc) = match config.grasp_site {
        GraspSite::MinMin => (0, 0),
        GraspSite::MaxMin => (0, dr_cols - 1),
        GraspSite::MinMax => (dr_rows - 1, 0),
        GraspSite::MaxMax => (dr_rows - 1, dr_cols - 1),
    };
    let driven_index = dressing_grid.index(gr, gc);
    let mut adhesive: Vec<usize> = adhesion_pairs.iter().map(|&(d, _)| d).collect();
    adhesive.sort_unstable();

    let particles = ParticleSystem {
        positions,
        inverse_mass,
        n_skin,
        driven_index,
        adhesive,
    };

    let rest = |a: usize, b: usize| (particles.positions[a] - particles.positions[b]).norm();
    let mut constraints = skin_constraints;
    for &(a, b) in &dressing_edges {
        constraints.push(Constraint::new(
            a,
            b,
            rest(a, b),
            config.dressing_stiffness,
            ConstraintKind::DressingInternal,
        ));
    }
    for &(d, s) in &adhesion_pairs {
        constraints.push(Constraint::adhesion(
            d,
            s,
            config.adhesion_stiffness,
            config.fracture_threshold_eps,
        ));
    }

    let landmarks = place_landmarks(config, &skin_grid, &particles)?;
    let diagonal = skin_w.hypot(skin_h);

    Ok(Scene {
        config: config.clone(),
        particles,
        constraints: ConstraintSet::new(constraints),
        graph: ConnectivityGraph {
            skin_edges,
            dressing_edges,
            adhesion_pairs,
            dressing_adjacency,
            n_skin,
        },
        sdf: surface.sdf(),
        landmarks,
        skin_grid,
        dressing_grid,
        dressing_center,
        diagonal,
    })
}

/// Landmarks are the skin grid nodes nearest a cell-centered `landmark_grid` sampling.
fn place_landmarks(
    config: &SceneConfig,
    skin: &GridLayout,
    particles: &ParticleSystem,
) -> Result<LandmarkSet> {
    let [rows, cols] = config.landmark_grid;
    let mut indices = Vec::with_capacity(rows * cols);
    let mut seen = BTreeSet::new();
    for i in 0..rows {
        for j in 0..cols {
            let fr = (i as f64 + 0.5) / rows as f64 * (skin.rows - 1) as f64;
            let fc = (j as f64 + 0.5) / cols as f64 * (skin.cols - 1) as f64;
            let idx = skin.index(fr.round() as usize, fc.round() as usize);
            if !seen.insert(idx) {
                return Err(PeelError::config(
                    "landmark_grid",
                    format!(
                        "skin grid {}x{} too coarse to host {}x{} distinct landmarks",
                        skin.rows, skin.cols, rows, cols
                    ),
                ));
            }
            indices.push(idx);
        }
    }
    let rest_positions = indices.iter().map(|&k| particles.positions[k]).collect();
    Ok(LandmarkSet {
        indices,
        rest_positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Length;

    fn tiny_flat() -> SceneConfig {
        SceneConfig {
            skin_grid: [3, 3],
            skin_extent: [Length(1.0), Length(1.0)],
            dressing_grid: [2, 2],
            dressing_extent: [Length(0.5), Length(0.5)],
            dressing_offset: [Length(0.25), Length(0.25)],
            landmark_grid: [2, 2],
            ..SceneConfig::default()
        }
    }

    #[test]
    fn tiny_flat_pairs_coincide() {
        let scene = build_scene(&tiny_flat()).unwrap();
        assert_eq!(scene.graph.adhesion_pairs.len(), 4);
        for &(d, s) in &scene.graph.adhesion_pairs {
            assert_eq!(scene.particles.positions[d], scene.particles.positions[s]);
            assert_eq!(scene.particles.body_of(d), crate::sim::Body::Dressing);
            assert_eq!(scene.particles.body_of(s), crate::sim::Body::Skin);
        }
    }

    #[test]
    fn aligned_grids_reuse_skin_nodes() {
        let scene = build_scene(&SceneConfig::default()).unwrap();
        assert_eq!(scene.particles.n_skin, 15 * 15);
        assert_eq!(scene.graph.adhesion_pairs.len(), 81);
        for &(d, s) in &scene.graph.adhesion_pairs {
            assert_eq!(scene.particles.positions[d], scene.particles.positions[s]);
            assert!(s < 225);
        }
        assert_eq!(scene.landmarks.indices.len(), 48);
    }

    #[test]
    fn corner_pins_only() {
        let scene = build_scene(&tiny_flat()).unwrap();
        let pinned: Vec<usize> = (0..scene.particles.len())
            .filter(|&k| scene.particles.is_pinned(k))
            .collect();
        assert_eq!(pinned, vec![0, 2, 6, 8]);
    }

    #[test]
    fn rest_lengths_match_initial_distances() {
        let cfg = SceneConfig {
            skin_pretension: 0.0,
            ..SceneConfig::default()
        };
        let scene = build_scene(&cfg).unwrap();
        let x = &scene.particles.positions;
        for c in scene.constraints.iter() {
            let d = (x[c.i] - x[c.j]).norm();
            if c.kind == ConstraintKind::Adhesion {
                assert_eq!(c.rest_length, 0.0);
            }
            assert_eq!(c.rest_length, d);
        }
    }

    #[test]
    fn pretensioned_skin_starts_in_equilibrium() {
        let scene = build_scene(&SceneConfig::default()).unwrap();
        let cs = &scene.constraints;
        let stretch: Vec<f64> = cs
            .constraints
            .iter()
            .filter(|c| c.kind == ConstraintKind::SkinInternal)
            .map(|c| crate::sim::constraint_value(&scene.particles.positions, c))
            .collect();
        let taut = stretch.iter().filter(|&&v| v > 0.0).count();
        assert!(2 * taut > stretch.len(), "skin carries tension: {taut}/{}", stretch.len());
        let still = step(
            &scene.particles,
            cs,
            scene.particles.driven_position(),
            &SolverParams::default(),
        )
        .unwrap();
        let drift = still
            .positions
            .iter()
            .zip(&scene.particles.positions)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        // Dressing and adhesion links perturb the Gauss-Seidel sweep slightly; a micron is far
        // below the millimetre scale of the displacement metrics.
        assert!(drift < 1e-6, "drift {drift}");
        for &(d, s) in &scene.graph.adhesion_pairs {
            assert_eq!(scene.particles.positions[d], scene.particles.positions[s]);
        }
    }

    #[test]
    fn cylinder_nodes_on_shell() {
        let cfg = SceneConfig {
            skin_pretension: 0.0,
            geometry: Geometry::Cylinder {
                radius: Length(0.06),
                arc_span: 2.0,
            },
            skin_grid: [5, 5],
            skin_extent: [Length(0.12), Length(0.12)],
            dressing_grid: [3, 3],
            dressing_extent: [Length(0.06), Length(0.06)],
            dressing_offset: [Length(0.03), Length(0.03)],
            landmark_grid: [2, 2],
            ..SceneConfig::default()
        };
        let scene = build_scene(&cfg).unwrap();
        for k in scene.particles.skin_range() {
            let p = scene.particles.positions[k];
            let r = p.x.hypot(p.z + 0.06);
            assert!((r - 0.06).abs() < 1e-9, "particle {k} at radius {r}");
        }
    }

    #[test]
    fn landmark_grid_too_dense_is_rejected() {
        let mut cfg = tiny_flat();
        cfg.landmark_grid = [6, 8];
        let err = build_scene(&cfg).unwrap_err().to_string();
        assert!(err.contains("landmark_grid"), "{err}");
    }

    #[test]
    fn adjacency_is_symmetric_and_axis_only() {
        let scene = build_scene(&SceneConfig::default()).unwrap();
        let g = &scene.graph;
        for d in scene.particles.dressing_range() {
            let (r, c) = scene.dressing_grid.row_col(d);
            for &n in g.dressing_neighbors(d) {
                assert!(g.dressing_neighbors(n).contains(&d));
                let (nr, nc) = scene.dressing_grid.row_col(n);
                assert_eq!(r.abs_diff(nr) + c.abs_diff(nc), 1);
            }
        }
    }

    #[test]
    fn sdf_examples() {
        let plane = Sdf::Plane { height: 0.0 };
        assert_eq!(plane.eval(Vec3::new(0.0, 0.0, 0.05)), 0.05);
        assert_eq!(plane.eval(Vec3::new(0.3, -2.0, 0.0)), 0.0);
        let cyl = Sdf::Cylinder {
            axis_x: 0.0,
            axis_z: 0.0,
            radius: 0.06,
        };
        assert!((cyl.eval(Vec3::new(0.1, 0.7, 0.0)) - 0.04).abs() < 1e-15);
        assert!((cyl.eval(Vec3::new(0.0, 0.0, 0.06))).abs() < 1e-15);
        assert!(cyl.eval(Vec3::new(0.0, 0.0, 0.01)) < 0.0);
    }
}
