//! Run configuration: parsing, validation with field paths, and hashing.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, FlowError, Result};
use crate::gas::{sound, AdmissibleRegion, GasModel};
use crate::glimm::{GlimmConstants, TestFunction};
use crate::tracker::{InflowBand, Tolerances, TrackerParams};
use crate::wall::{build_mesh, Wall, WallMesh, DEFAULT_SLOPE_BOUNDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub h: f64,
    pub nu: usize,
    pub x_max: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub lambda_hat: Option<f64>,
    #[serde(default = "default_bounds")]
    pub slope_bounds: (f64, f64),
}

fn default_bounds() -> (f64, f64) {
    DEFAULT_SLOPE_BOUNDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Stations at which slices are exported; x_max is always included.
    #[serde(default)]
    pub slices: Vec<f64>,
    #[serde(default = "all_streams")]
    pub streams: Vec<Stream>,
    /// Test functions whose weak-form residuals go into the report.
    #[serde(default)]
    pub test_functions: Vec<TestFunction>,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { slices: Vec::new(), streams: all_streams(), test_functions: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Events,
    Slices,
    Glimm,
    Report,
}

fn all_streams() -> Vec<Stream> {
    vec![Stream::Events, Stream::Slices, Stream::Glimm, Stream::Report]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gas: GasModel,
    pub inflow: Vec<InflowBand>,
    pub wall: Wall,
    pub numerics: Numerics,
    #[serde(default)]
    pub glimm: GlimmConstants,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Parse and validate; errors name the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path.is_empty() || path == "." { "<document>".to_string() } else { path };
        config_err(&field, inner.to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Err((f, m)) = self.gas.validate() {
            return Err(config_err(&format!("gas.{f}"), m));
        }
        if self.inflow.is_empty() {
            return Err(config_err("inflow", "at least one band is required"));
        }
        if self.inflow[0].y != 0.0 {
            return Err(config_err("inflow[0].y", "the first band must start on the wall (y = 0)"));
        }
        for (i, b) in self.inflow.iter().enumerate() {
            if !b.y.is_finite() || (i > 0 && !(b.y > self.inflow[i - 1].y)) {
                return Err(config_err(&format!("inflow[{i}].y"), "breakpoints must be finite and strictly increasing"));
            }
            if let Err(e) = b.state.check() {
                return Err(config_err(&format!("inflow[{i}].state"), e.to_string()));
            }
            if !(b.state.u > sound(&b.state, &self.gas)) {
                return Err(config_err(&format!("inflow[{i}].state.u"), "inflow must satisfy u > c"));
            }
        }
        let bottom = self.inflow[0].state;
        if bottom.v.abs() > 1e-10 * bottom.speed() {
            return Err(config_err("inflow[0].state.v", "bottom state must be tangent to the wall at x = 0 (v = 0)"));
        }
        let n = &self.numerics;
        if !(n.h.is_finite() && n.h > 0.0) {
            return Err(config_err("numerics.h", format!("must be positive, got {}", n.h)));
        }
        if n.nu == 0 || n.nu > 60 {
            return Err(config_err("numerics.nu", format!("must lie in 1..=60, got {}", n.nu)));
        }
        if !(n.x_max.is_finite() && n.x_max > 0.0) {
            return Err(config_err("numerics.x_max", format!("must be positive, got {}", n.x_max)));
        }
        if let Some(l) = n.lambda_hat {
            if !l.is_finite() {
                return Err(config_err("numerics.lambda_hat", "must be finite"));
            }
        }
        let t = &n.tolerances;
        for (name, v) in [("drop", t.drop), ("absorb", t.absorb), ("np_absorb", t.np_absorb), ("reaction_emit", t.reaction_emit), ("np_merge", t.np_merge)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config_err(&format!("numerics.tolerances.{name}"), "must be finite and >= 0"));
            }
        }
        if let Err(e) = self.wall.validate() {
            return Err(config_err("wall.vertices", e));
        }
        let mesh = self.mesh().map_err(|e| config_err("wall.vertices", e.to_string()))?;
        let region = AdmissibleRegion::new(bottom, 1.0, &self.gas).map_err(|e| config_err("inflow[0].state", e.to_string()))?;
        let mut cum = 0.0;
        for (k, w) in mesh.turning_angles.iter().enumerate() {
            cum += w;
            if cum <= region.theta_crit {
                return Err(config_err(
                    "wall",
                    format!(
                        "hypothesis A3 violated: cumulative turning {cum} at corner {k} is beyond theta_crit = {}",
                        region.theta_crit
                    ),
                ));
            }
        }
        if let Err((f, m)) = self.glimm.validate() {
            return Err(config_err(&format!("glimm.{f}"), m));
        }
        for (i, x) in self.outputs.slices.iter().enumerate() {
            if !(*x >= 0.0 && *x <= n.x_max) {
                return Err(config_err(&format!("outputs.slices[{i}]"), format!("station {x} outside [0, x_max]")));
            }
        }
        for (i, tf) in self.outputs.test_functions.iter().enumerate() {
            let (_, x1) = tf.x_range();
            if x1 > n.x_max {
                return Err(config_err(&format!("outputs.test_functions[{i}]"), "support extends beyond x_max"));
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<WallMesh> {
        build_mesh(&self.wall, self.numerics.h, self.numerics.x_max, self.numerics.slope_bounds)
    }

    pub fn tracker_params(&self) -> TrackerParams {
        let n = &self.numerics;
        TrackerParams { nu: n.nu, h: n.h, seed: n.seed, lambda_hat: n.lambda_hat, tol: n.tolerances }
    }

    pub fn wants(&self, s: Stream) -> bool {
        self.outputs.streams.contains(&s)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let d = Sha256::digest(canon.as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn is_inert(&self) -> bool {
        self.inflow.iter().all(|b| b.state.z == 0.0)
    }
}

impl From<serde_json::Error> for FlowError {
    fn from(e: serde_json::Error) -> Self {
        config_err("<document>", e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "gas": {"gamma": 1.4, "R": 1.0},
        "inflow": [{"y": 0.0, "state": {"u": 2.0, "v": 0.0, "p": 0.7142857142857143, "rho": 1.0, "Z": 0.0}}],
        "wall": {"vertices": [[0.0, 0.0], [1.0, 0.0]]},
        "numerics": {"h": 0.1, "nu": 8, "x_max": 1.0}
    }"#;

    fn field_of(text: &str) -> String {
        match parse_config(text).unwrap_err() {
            FlowError::Config { field, .. } => field,
            e => panic!("{e}"),
        }
    }

    #[test]
    fn minimal_accepted() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.glimm, GlimmConstants::default());
        assert_eq!(c.hash(), parse_config(MINIMAL).unwrap().hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn gamma_named() {
        assert_eq!(field_of(&MINIMAL.replace("\"gamma\": 1.4", "\"gamma\": 1.0")), "gas.gamma");
    }

    #[test]
    fn unknown_key_has_path_and_position() {
        let t = MINIMAL.replace("\"nu\": 8", "\"nu\": 8, \"speed\": 3");
        let e = parse_config(&t).unwrap_err();
        let s = e.to_string();
        assert!(s.contains("numerics") && s.contains("speed") && s.contains("line"), "{s}");
        let e = parse_config("{ \"gas\": ").unwrap_err().to_string();
        assert!(e.contains("line"), "{e}");
    }

    #[test]
    fn turning_beyond_cone_cites_a3() {
        let t = MINIMAL
            .replace("\"u\": 2.0", "\"u\": 1.2")
            .replace("[[0.0, 0.0], [1.0, 0.0]]", "[[0.0, 0.0], [0.5, 0.0], [1.5, -2.2344]]");
        let e = parse_config(&t).unwrap_err();
        match &e {
            FlowError::Config { field, msg } => {
                assert_eq!(field, "wall");
                assert!(msg.contains("A3"), "{msg}");
            }
            _ => panic!("{e}"),
        }
    }

    #[test]
    fn subsonic_and_tilted_inflow_rejected() {
        assert_eq!(field_of(&MINIMAL.replace("\"u\": 2.0", "\"u\": 0.5")), "inflow[0].state.u");
        assert_eq!(field_of(&MINIMAL.replace("\"v\": 0.0", "\"v\": 0.1")), "inflow[0].state.v");
        assert_eq!(field_of(&MINIMAL.replace("\"nu\": 8", "\"nu\": 0")), "numerics.nu");
        assert!(field_of(&MINIMAL.replace("\"Z\": 0.0", "\"Z\": 0.0, \"T\": 1")).starts_with("inflow[0].state"));
    }
}
