//! On-disk formats: point CSVs, OBJ meshes, run directories and metrics files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::adhesion::FractureEvent;
use crate::config::ExperimentConfig;
use crate::error::{PeelError, Result};
use crate::mpc::CandidateReport;
use crate::metrics::{displacement_components, LandmarkSet, RunMetrics};
use crate::peeler::RunRecord;
use crate::sim::ParticleSystem;
use crate::Vec3;

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> PeelError {
    PeelError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| PeelError::io(path, e))
}

/// Like `write_rows` but writes the header even when there are no rows.
fn write_table<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    if !rows.is_empty() {
        return write_rows(path, rows);
    }
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    w.flush().map_err(|e| PeelError::io(path, e))
}

#[derive(Serialize)]
struct PointRow {
    index: usize,
    body: &'static str,
    x: f64,
    y: f64,
    z: f64,
}

pub fn write_points_csv(path: &Path, state: &ParticleSystem, positions: &[Vec3]) -> Result<()> {
    write_rows(
        path,
        positions.iter().enumerate().map(|(k, p)| PointRow {
            index: k,
            body: state.body_of(k).tag(),
            x: p.x,
            y: p.y,
            z: p.z,
        }),
    )
}

/// Wavefront OBJ with one `o` group per body.
pub fn obj_string(positions: &[Vec3], groups: &[(&str, Vec<[usize; 3]>)]) -> String {
    let mut s = String::new();
    for p in positions {
        s.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
    }
    for (name, tris) in groups {
        s.push_str(&format!("o {name}\n"));
        for t in tris {
            s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
    }
    s
}

pub fn write_obj(path: &Path, positions: &[Vec3], groups: &[(&str, Vec<[usize; 3]>)]) -> Result<()> {
    fs::write(path, obj_string(positions, groups)).map_err(|e| PeelError::io(path, e))
}

#[derive(Serialize)]
struct TrajectoryRow {
    step: usize,
    u_x: f64,
    u_y: f64,
    u_z: f64,
    dir_x: f64,
    dir_y: f64,
    dir_z: f64,
    detached: usize,
}

#[derive(Serialize)]
struct FractureRow {
    step: usize,
    dressing_index: usize,
    skin_index: usize,
    energy_at_fracture: f64,
}

impl From<&FractureEvent> for FractureRow {
    fn from(e: &FractureEvent) -> Self {
        FractureRow {
            step: e.step,
            dressing_index: e.dressing_index,
            skin_index: e.skin_index,
            energy_at_fracture: e.energy,
        }
    }
}

#[derive(Serialize)]
struct LossRow {
    step: usize,
    peel: f64,
    penalty_sum: f64,
    smoothness: f64,
    total: f64,
    gamma: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Serialize)]
struct DiagnosticsRow {
    step: usize,
    candidates: usize,
    best_loss: f64,
    dir_x: f64,
    dir_y: f64,
    dir_z: f64,
    gd_improvement: f64,
}

#[derive(Serialize)]
struct LandmarkRow {
    step: usize,
    landmark: usize,
    particle: usize,
    dx: f64,
    dy: f64,
    dz: f64,
    magnitude: f64,
}

#[derive(Serialize)]
struct RunMeta<'a> {
    method: &'a str,
    status: &'a crate::peeler::RunStatus,
    steps: usize,
    total_pairs: usize,
    bootstrap_detached: &'a [usize],
    notes: &'a [String],
}

/// Writes every run artifact into `dir` (created if missing).
pub fn write_run_dir(
    dir: &Path,
    record: &RunRecord,
    config: &ExperimentConfig,
    landmarks: &LandmarkSet,
    metrics: &RunMetrics,
    state_template: &ParticleSystem,
    triangles: &[(&str, Vec<[usize; 3]>)],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| PeelError::io(dir, e))?;
    let join = |name: &str| dir.join(name);

    let cfg = join("config.toml");
    fs::write(&cfg, config.to_resolved_toml()).map_err(|e| PeelError::io(&cfg, e))?;

    let traj: Vec<TrajectoryRow> = record
        .trajectory
        .iter()
        .zip(&record.actions)
        .zip(&record.detached_counts)
        .enumerate()
        .map(|(t, ((u, a), &det))| TrajectoryRow {
            step: t + 1,
            u_x: u.x,
            u_y: u.y,
            u_z: u.z,
            dir_x: a.direction.x,
            dir_y: a.direction.y,
            dir_z: a.direction.z,
            detached: det,
        })
        .collect();
    write_table(
        &join("trajectory.csv"),
        &["step", "u_x", "u_y", "u_z", "dir_x", "dir_y", "dir_z", "detached"],
        &traj,
    )?;

    let fr: Vec<FractureRow> = record.fractures.iter().map(FractureRow::from).collect();
    write_table(
        &join("fractures.csv"),
        &["step", "dressing_index", "skin_index", "energy_at_fracture"],
        &fr,
    )?;

    if !record.diagnostics.is_empty() {
        let loss = config.loss;
        write_rows(
            &join("losses.csv"),
            record.diagnostics.iter().map(|d| LossRow {
                step: d.step,
                peel: d.loss.peel,
                penalty_sum: d.loss.penalty_sum,
                smoothness: d.loss.smoothness,
                total: d.loss.total,
                gamma: loss.gamma,
                alpha: loss.alpha,
                beta: loss.beta,
            }),
        )?;
        write_rows(
            &join("diagnostics.csv"),
            record.diagnostics.iter().map(|d| DiagnosticsRow {
                step: d.step,
                candidates: d.candidates,
                best_loss: d.best_loss,
                dir_x: d.direction.x,
                dir_y: d.direction.y,
                dir_z: d.direction.z,
                gd_improvement: d.gd_improvement,
            }),
        )?;
    }

    let detail: Vec<CandidateRow> = record
        .diagnostics
        .iter()
        .flat_map(|d| d.candidate_detail.iter().map(move |c| CandidateRow::new(d.step, c)))
        .collect();
    if !detail.is_empty() {
        write_candidates_csv(&join("candidates.csv"), &detail)?;
    }

    let comps = displacement_components(record, landmarks)?;
    let mut rows = Vec::new();
    for (t, frame) in comps.iter().enumerate() {
        for (i, d) in frame.iter().enumerate() {
            rows.push(LandmarkRow {
                step: t + 1,
                landmark: i,
                particle: landmarks.indices[i],
                dx: d.x,
                dy: d.y,
                dz: d.z,
                magnitude: d.norm(),
            });
        }
    }
    write_table(
        &join("landmarks.csv"),
        &["step", "landmark", "particle", "dx", "dy", "dz", "magnitude"],
        &rows,
    )?;

    if !record.snapshots.is_empty() {
        let snap_dir = join("snapshots");
        fs::create_dir_all(&snap_dir).map_err(|e| PeelError::io(&snap_dir, e))?;
        for (t, pos) in &record.snapshots {
            write_points_csv(&snap_dir.join(format!("frame_{t:05}.csv")), state_template, pos)?;
        }
        write_obj(&join("final.obj"), &record.final_state.positions, triangles)?;
    }

    write_json(&join("metrics.json"), metrics)?;
    write_json(
        &join("run.json"),
        &RunMeta {
            method: record.method.name(),
            status: &record.status,
            steps: record.steps(),
            total_pairs: record.total_pairs,
            bootstrap_detached: &record.bootstrap_detached,
            notes: &record.notes,
        },
    )?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| PeelError::io(path, e))?;
    let text = serde_json::to_string_pretty(value).expect("serializable");
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| PeelError::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<RunMetrics> {
    let text = fs::read_to_string(path).map_err(|e| PeelError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| PeelError::Parse {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// All `metrics.json` files directly in `dir` or one level below it, sorted.
pub fn find_metrics(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let direct = dir.join("metrics.json");
    if direct.is_file() {
        found.push(direct);
    }
    let entries = fs::read_dir(dir).map_err(|e| PeelError::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| PeelError::io(dir, e))?;
        let candidate = entry.path().join("metrics.json");
        if candidate.is_file() {
            found.push(candidate);
        }
    }
    found.sort();
    Ok(found)
}

#[derive(Serialize)]
pub struct CandidateRow {
    pub step: usize,
    pub candidate: usize,
    pub dir_x: f64,
    pub dir_y: f64,
    pub dir_z: f64,
    pub initial_loss: f64,
    pub loss: f64,
    pub grad_x: f64,
    pub grad_y: f64,
    pub grad_z: f64,
}

impl CandidateRow {
    /// A missing gradient (every finite-difference rollout failed) is written as NaN.
    pub fn new(step: usize, c: &CandidateReport) -> Self {
        let g = c.gradient.unwrap_or(Vec3::repeat(f64::NAN));
        CandidateRow {
            step,
            candidate: c.id,
            dir_x: c.direction.x,
            dir_y: c.direction.y,
            dir_z: c.direction.z,
            initial_loss: c.initial_loss,
            loss: c.loss,
            grad_x: g.x,
            grad_y: g.y,
            grad_z: g.z,
        }
    }
}

/// Debug dump of per-candidate (action, loss, gradient) rows.
pub fn write_candidates_csv(path: &Path, rows: &[CandidateRow]) -> Result<()> {
    write_rows(path, rows)
}
