mod common;

use peel_core::adhesion::{check_removal, refresh_layers, update_adhesion, PairSet};
use peel_core::mpc::MpcParams;
use peel_core::peeler::{arc_path, guarded_solver, replay, run_baseline, run_peel, PeelState};
use peel_core::sim::{step, ConstraintKind};
use peel_core::{build_scene, Length, LossParams, Method, RunLimits, RunStatus, SceneConfig, SolverParams};

use common::tiny_config;

fn quick_mpc() -> MpcParams {
    MpcParams {
        num_seeds: 4,
        horizon: 2,
        ..MpcParams::default()
    }
}

#[test]
fn nothing_to_peel_means_no_steps() {
    let mut scene = build_scene(&tiny_config()).unwrap();
    for c in &mut scene.constraints.constraints {
        if c.kind == ConstraintKind::Adhesion {
            c.stiffness = 0.0;
        }
    }
    let rec = run_peel(&scene, &quick_mpc(), &LossParams::default(), &SolverParams::default(), &RunLimits::default());
    assert_eq!(rec.status, RunStatus::Complete);
    assert!(rec.trajectory.is_empty());
}

#[test]
fn two_by_two_dressing_peels_completely() {
    let cfg = SceneConfig {
        dressing_grid: [2, 2],
        fracture_threshold_eps: 1e-7,
        ..tiny_config()
    };
    let scene = build_scene(&cfg).unwrap();
    assert_eq!(scene.graph.adhesion_pairs.len(), 4);
    let rec = run_peel(&scene, &quick_mpc(), &LossParams::default(), &SolverParams::default(), &RunLimits::default());
    assert_eq!(rec.status, RunStatus::Complete);
    assert_eq!(rec.total_pairs, 4);
    let fractured: PairSet = rec.fractures.iter().map(|e| e.pair).chain(rec.bootstrap_detached.iter().copied()).collect();
    assert_eq!(fractured, (0..4).collect());
}

#[test]
fn unbreakable_adhesion_stops_at_the_step_limit() {
    let cfg = SceneConfig {
        fracture_threshold_eps: f64::INFINITY,
        ..tiny_config()
    };
    let scene = build_scene(&cfg).unwrap();
    let limits = RunLimits {
        max_steps: 5,
        ..RunLimits::default()
    };
    let rec = run_peel(&scene, &quick_mpc(), &LossParams::default(), &SolverParams::default(), &limits);
    assert_eq!(rec.status, RunStatus::Incomplete);
    assert_eq!(rec.steps(), 5);
}

#[test]
fn up_rises_exactly_two_millimeters_per_step() {
    let cfg = SceneConfig {
        fracture_threshold_eps: f64::INFINITY,
        ..tiny_config()
    };
    let scene = build_scene(&cfg).unwrap();
    let limits = RunLimits {
        max_steps: 10,
        ..RunLimits::default()
    };
    let rec = run_baseline(Method::Up, &scene, 0.002, &SolverParams::default(), &limits).unwrap();
    assert_eq!(rec.steps(), 10);
    let start = scene.particles.driven_position();
    let end = rec.final_state.driven_position();
    assert_eq!(end, rec.trajectory[9]);
    assert!((end.z - start.z - 0.020).abs() < 1e-15, "rose {}", end.z - start.z);
    assert_eq!((end.x, end.y), (start.x, start.y));
}

#[test]
fn arc_targets_lie_on_the_circle() {
    let scene = build_scene(&tiny_config()).unwrap();
    let rec = run_baseline(Method::Arc, &scene, 0.002, &SolverParams::default(), &RunLimits::default()).unwrap();
    assert!(rec.is_complete());
    let path = arc_path(&scene, 0.002);
    let mut on_arc = 0;
    for (t, u) in rec.trajectory.iter().enumerate() {
        if path.angle_at(t + 1) > std::f64::consts::PI {
            break;
        }
        let rel = u - path.center;
        assert!((rel.norm() - path.radius).abs() < 1e-9);
        // in the plane spanned by the outward and normal directions
        assert!(rel.dot(&path.outward.cross(&path.normal)).abs() < 1e-9);
        on_arc += 1;
    }
    assert!(on_arc > 0);
    // the circle passes through the grasp point and is centered on the dressing center
    assert!((path.point(0) - scene.particles.driven_position()).norm() < 1e-12);
    assert_eq!(path.center, scene.dressing_center);
}

#[test]
fn replay_reproduces_the_final_state_bitwise() {
    let scene = build_scene(&tiny_config()).unwrap();
    for method in [Method::Up, Method::Arc, Method::Mpc] {
        let rec = match method {
            Method::Mpc => run_peel(&scene, &quick_mpc(), &LossParams::default(), &SolverParams::default(), &RunLimits::default()),
            m => run_baseline(m, &scene, 0.002, &SolverParams::default(), &RunLimits::default()).unwrap(),
        };
        assert!(rec.is_complete(), "{method:?}: {:?}", rec.status);
        let again = replay(&scene, &rec.trajectory, &SolverParams::default()).unwrap();
        assert_eq!(again.fingerprint(), rec.final_state.fingerprint(), "{method:?}");
    }
}

/// Re-runs the recorded trajectory one step at a time with the public pieces and checks
/// fracture exactness, monotone detachment and the zero-stiffness bookkeeping on each step.
#[test]
fn fracture_rule_holds_on_every_committed_step() {
    let scene = build_scene(&SceneConfig {
        skin_grid: [7, 7],
        skin_extent: [Length(0.06), Length(0.06)],
        dressing_grid: [4, 4],
        dressing_extent: [Length(0.03), Length(0.03)],
        dressing_offset: [Length(0.015), Length(0.015)],
        ..tiny_config()
    })
    .unwrap();
    let rec = run_peel(&scene, &quick_mpc(), &LossParams::default(), &SolverParams::default(), &RunLimits::default());
    assert!(rec.is_complete());
    assert!(rec.post_fracture_energy_ratio.iter().all(|&r| r < 1.0));

    let solver = guarded_solver(&scene, &SolverParams::default());
    let (mut lp, _) = PeelState::start(&scene);
    let eps = scene.config.fracture_threshold_eps;
    let k = scene.config.adhesion_stiffness;
    let mut previous = lp.book.detached.clone();
    for (t, &u) in rec.trajectory.iter().enumerate() {
        refresh_layers(&mut lp.book, &scene.graph);
        let predicted = step(&lp.state, &lp.constraints, u, &solver).unwrap();
        let (constraints, book, _) = update_adhesion(&predicted, &lp.constraints, &lp.book, t + 1);
        for (p, &(d, s)) in book.pairs.iter().enumerate() {
            let stretch = (predicted.positions[d] - predicted.positions[s]).norm();
            let energy = 0.5 * k * stretch * stretch;
            if book.alive[p] {
                assert!(energy < eps, "step {t}: pair {p} alive at E = {energy:e}");
            }
        }
        assert!(previous.is_subset(&book.detached));
        assert_eq!(check_removal(&constraints, &book), book.detached);
        previous = book.detached.clone();
        lp.commit(u, t + 1, &solver).unwrap();
        assert_eq!(lp.book.detached, book.detached);
        assert_eq!(lp.book.detached.len(), rec.detached_counts[t]);
    }
    assert_eq!(lp.book.detached.len(), rec.total_pairs);
    assert_eq!(lp.state.fingerprint(), rec.final_state.fingerprint());
}

#[test]
fn detached_count_never_drops() {
    let scene = build_scene(&tiny_config()).unwrap();
    let rec = run_baseline(Method::Up, &scene, 0.002, &SolverParams::default(), &RunLimits::default()).unwrap();
    assert!(rec.detached_counts.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*rec.detached_counts.last().unwrap(), rec.total_pairs);
}

#[test]
fn same_seed_same_run() {
    let scene = build_scene(&tiny_config()).unwrap();
    let params = MpcParams {
        rng_seed: 11,
        ..quick_mpc()
    };
    let a = run_peel(&scene, &params, &LossParams::default(), &SolverParams::default(), &RunLimits::default());
    let b = run_peel(&scene, &params, &LossParams::default(), &SolverParams::default(), &RunLimits::default());
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.final_state.fingerprint(), b.final_state.fingerprint());
}
