//! Declarative configuration. Lengths accept explicit unit tags (`"7 in"`, `"5 mm"`) and
//! are stored in meters; the resolved form serializes back as plain meters.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{PeelError, Result};
use crate::mpc::MpcParams;
use crate::objectives::LossParams;
use crate::peeler::RunLimits;
use crate::sim::SolverParams;

pub const INCH: f64 = 0.0254;

/// A length in meters.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Length(pub f64);

impl Length {
    pub fn meters(self) -> f64 {
        self.0
    }

    pub fn inches(v: f64) -> Self {
        Length(v * INCH)
    }

    pub fn parse(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let split = s
            .find(|c: char| c.is_ascii_alphabetic())
            .ok_or_else(|| format!("missing unit in `{s}` (use m, cm, mm or in)"))?;
        let (num, unit) = s.split_at(split);
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| format!("bad number in `{s}`"))?;
        let scale = match unit.trim() {
            "m" => 1.0,
            "cm" => 0.01,
            "mm" => 0.001,
            "in" | "inch" | "inches" => INCH,
            other => return Err(format!("unknown unit `{other}`")),
        };
        Ok(Length(value * scale))
    }
}

impl std::str::FromStr for Length {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Length::parse(s)
    }
}

impl Serialize for Length {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct LengthVisitor;
        impl Visitor<'_> for LengthVisitor {
            type Value = Length;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a length in meters or a string with a unit tag")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Length, E> {
                Ok(Length(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Length, E> {
                Ok(Length(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Length, E> {
                Ok(Length(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Length, E> {
                Length::parse(v).map_err(E::custom)
            }
        }
        d.deserialize_any(LengthVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    FlatSheet,
    /// Skin columns wrap around an axis parallel to y; `arc_span` is the angle covered by
    /// the skin width, in radians.
    Cylinder { radius: Length, arc_span: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PinSpec {
    Corners,
    Edges,
    None,
}

/// Dressing corner held by the end effector, named by (x, y) extremes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspSite {
    MinMin,
    MaxMin,
    MinMax,
    MaxMax,
}

/// Inclusive dressing-grid rectangle `[[row0, col0], [row1, col1]]` that carries adhesive.
pub type GridWindow = [[usize; 2]; 2];

/// Grid sizes are `[rows, cols]` with rows along y and cols along x; extents and offsets
/// are `[x, y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub geometry: Geometry,
    pub skin_grid: [usize; 2],
    pub skin_extent: [Length; 2],
    pub dressing_grid: [usize; 2],
    pub dressing_extent: [Length; 2],
    pub dressing_offset: [Length; 2],
    pub adhesive_window: Option<GridWindow>,
    pub skin_stiffness: f64,
    /// Fractional shortening of skin grid-edge rest lengths; the skin is relaxed to
    /// equilibrium under this tension before the dressing is placed.
    pub skin_pretension: f64,
    pub dressing_stiffness: f64,
    pub adhesion_stiffness: f64,
    pub fracture_threshold_eps: f64,
    pub pinned: PinSpec,
    pub landmark_grid: [usize; 2],
    pub grasp_site: GraspSite,
    pub sdf_margin_sigma: Length,
}

pub const DEFAULT_SKIN_STIFFNESS: f64 = 1.0e3;
pub const DEFAULT_ADHESION_STIFFNESS: f64 = 0.3;
pub const DEFAULT_FRACTURE_EPS: f64 = 2.0e-5;
pub const DEFAULT_PRETENSION: f64 = 0.02;

impl Default for SceneConfig {
    /// The 7 in phantom with a centered 4 in dressing.
    fn default() -> Self {
        SceneConfig {
            geometry: Geometry::FlatSheet,
            skin_grid: [15, 15],
            skin_extent: [Length::inches(7.0), Length::inches(7.0)],
            dressing_grid: [9, 9],
            dressing_extent: [Length::inches(4.0), Length::inches(4.0)],
            dressing_offset: [Length::inches(1.5), Length::inches(1.5)],
            adhesive_window: None,
            skin_stiffness: DEFAULT_SKIN_STIFFNESS,
            skin_pretension: DEFAULT_PRETENSION,
            dressing_stiffness: 10.0 * DEFAULT_SKIN_STIFFNESS,
            adhesion_stiffness: DEFAULT_ADHESION_STIFFNESS,
            fracture_threshold_eps: DEFAULT_FRACTURE_EPS,
            pinned: PinSpec::Corners,
            landmark_grid: [6, 8],
            grasp_site: GraspSite::MinMin,
            sdf_margin_sigma: Length(0.005),
        }
    }
}

impl SceneConfig {
    /// Short stable id of the scene settings, used to spot comparisons across scenes.
    pub fn scene_id(&self) -> String {
        let text = toml::to_string(self).expect("scene config serializes");
        format!("{:016x}", crate::sim::fnv1a(text.bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let grid_ok = |g: [usize; 2]| g[0] >= 2 && g[1] >= 2;
        if !grid_ok(self.skin_grid) {
            return Err(PeelError::config("skin_grid", "counts must be >= 2"));
        }
        if !grid_ok(self.dressing_grid) {
            return Err(PeelError::config("dressing_grid", "counts must be >= 2"));
        }
        if !grid_ok(self.landmark_grid) {
            return Err(PeelError::config("landmark_grid", "counts must be >= 2"));
        }
        for (name, e) in [
            ("skin_extent", self.skin_extent),
            ("dressing_extent", self.dressing_extent),
        ] {
            if !(e[0].0 > 0.0 && e[1].0 > 0.0 && e[0].0.is_finite() && e[1].0.is_finite()) {
                return Err(PeelError::config(name, "extents must be positive and finite"));
            }
        }
        if !(self.adhesion_stiffness > 0.0) {
            return Err(PeelError::config("adhesion_stiffness", "must be > 0"));
        }
        if !(self.fracture_threshold_eps > 0.0) {
            return Err(PeelError::config("fracture_threshold_eps", "must be > 0"));
        }
        if !(self.skin_stiffness >= 0.0) {
            return Err(PeelError::config("skin_stiffness", "must be >= 0"));
        }
        if !(self.skin_pretension >= 0.0 && self.skin_pretension < 0.5) {
            return Err(PeelError::config("skin_pretension", "must lie in [0, 0.5)"));
        }
        if !(self.dressing_stiffness >= 0.0) {
            return Err(PeelError::config("dressing_stiffness", "must be >= 0"));
        }
        if !(self.sdf_margin_sigma.0 >= 0.0) {
            return Err(PeelError::config("sdf_margin_sigma", "must be >= 0"));
        }
        let off = self.dressing_offset;
        if off[0].0 < 0.0 || off[1].0 < 0.0 {
            return Err(PeelError::config("dressing_offset", "must be non-negative"));
        }
        let tol = 1e-12;
        for axis in 0..2 {
            if self.dressing_extent[axis].0 > self.skin_extent[axis].0 + tol {
                return Err(PeelError::config(
                    "dressing_extent",
                    "dressing is larger than the skin",
                ));
            }
            if off[axis].0 + self.dressing_extent[axis].0 > self.skin_extent[axis].0 + tol {
                return Err(PeelError::config(
                    "dressing_offset",
                    "dressing footprint extends past the skin",
                ));
            }
        }
        if let Some([[r0, c0], [r1, c1]]) = self.adhesive_window {
            let [rows, cols] = self.dressing_grid;
            if r0 > r1 || c0 > c1 || r1 >= rows || c1 >= cols {
                return Err(PeelError::config(
                    "adhesive_window",
                    "window must be an ordered rectangle inside the dressing grid",
                ));
            }
        }
        if let Geometry::Cylinder { radius, arc_span } = self.geometry {
            if !(radius.0 > 0.0) {
                return Err(PeelError::config("geometry.radius", "must be > 0"));
            }
            if !(arc_span > 0.0 && arc_span < std::f64::consts::TAU) {
                return Err(PeelError::config("geometry.arc_span", "must lie in (0, 2π)"));
            }
        }
        Ok(())
    }
}

/// Everything a run needs, as read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub solver: SolverParams,
    pub loss: LossParams,
    pub mpc: MpcParams,
    pub limits: RunLimits,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| PeelError::Parse {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PeelError::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.solver.iterations == 0 {
            return Err(PeelError::config("solver.iterations", "must be >= 1"));
        }
        self.loss.validate()?;
        self.mpc.validate()?;
        Ok(())
    }

    /// Resolved configuration with every length in meters.
    pub fn to_resolved_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_units() {
        assert_eq!(Length::parse("7 in").unwrap().0, 7.0 * 0.0254);
        assert_eq!(Length::parse("5mm").unwrap().0, 0.005);
        assert_eq!(Length::parse("0.06 m").unwrap().0, 0.06);
        assert!(Length::parse("3 furlongs").is_err());
        assert!(Length::parse("12").is_err());
    }

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn dressing_larger_than_skin_names_field() {
        let mut cfg = SceneConfig::default();
        cfg.dressing_extent = [Length::inches(8.0), Length::inches(4.0)];
        cfg.dressing_offset = [Length(0.0), Length(0.0)];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("dressing_extent"), "{err}");
    }

    #[test]
    fn toml_with_units_round_trips_in_meters() {
        let text = r#"
            [scene]
            skin_extent = ["7 in", "7 in"]
            dressing_extent = ["10 cm", 0.1]
            dressing_offset = ["1 in", "1 in"]
            geometry = { kind = "cylinder", radius = "6 cm", arc_span = 2.0 }
            [mpc]
            num_seeds = 8
        "#;
        let cfg = ExperimentConfig::from_toml_str(text, "inline").unwrap();
        assert!((cfg.scene.dressing_extent[0].0 - 0.1).abs() < 1e-15);
        assert_eq!(
            cfg.scene.geometry,
            Geometry::Cylinder {
                radius: Length(0.06),
                arc_span: 2.0
            }
        );
        let echoed = cfg.to_resolved_toml();
        let again = ExperimentConfig::from_toml_str(&echoed, "echo").unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = ExperimentConfig::from_toml_str("[scene]\nbogus = 1\n", "inline").unwrap_err();
        assert!(err.to_string().contains("bogus"));
    }
}
