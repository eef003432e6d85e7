//! Soft-body dressing peeling: a quasi-static XPBD skin/dressing model with energy-based
//! adhesion fracture, adhesion-boundary objectives, and a sampled gradient-refined MPC
//! controller compared against vertical-pull and arc baselines.

pub mod adhesion;
pub mod calibrate;
pub mod config;
pub mod error;
pub mod export;
pub mod metrics;
pub mod mpc;
pub mod objectives;
pub mod peeler;
pub mod rollout;
pub mod scene;
pub mod sim;

pub type Vec3 = nalgebra::Vector3<f64>;

pub use adhesion::{AdhesionBook, FractureEvent, PairSet};
pub use config::{ExperimentConfig, Geometry, Length, SceneConfig};
pub use error::{PeelError, Result};
pub use metrics::{LandmarkSet, RunMetrics};
pub use objectives::{Action, LossParams};
pub use peeler::{Method, RunLimits, RunRecord, RunStatus};
pub use scene::{build_scene, ConnectivityGraph, Scene, Sdf};
pub use sim::{Constraint, ConstraintKind, ConstraintSet, ParticleSystem, SolverParams};
