//! Run configuration: TOML sections mapped onto the library types, plus
//! dotted-path overrides applied to the raw document before it is
//! deserialized, so an override can target any key, including ones the
//! file leaves at their defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{Chart, ChartError, SqrtChart, Vec2};
use crate::initial::{deformation_at, velocity_at, F0Spec, SideStream};
use crate::mesh::{Mesh, MeshError};
use crate::norms::NormConfig;
use crate::solver::{MarchParams, PicardParams};
use crate::state::{MatrixField, VectorField};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse failed: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize failed: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("override {0:?} is not of the form KEY=VALUE")]
    OverrideSyntax(String),
    #[error("override key {0:?} walks through a non-table entry")]
    OverridePath(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("mesh construction failed: {0}")]
    Mesh(#[from] MeshError),
    #[error("chart rejected a node: {0}")]
    Chart(#[from] ChartError),
}

/// Structured mesh in the working (chart) plane. Node counts are per axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryConfig {
    Sector {
        center: [f64; 2],
        r0: f64,
        r1: f64,
        theta0: f64,
        theta1: f64,
        n1: usize,
        n2: usize,
    },
    Rect {
        p0: [f64; 2],
        p1: [f64; 2],
        n1: usize,
        n2: usize,
    },
    Ring {
        center: [f64; 2],
        r0: f64,
        r1: f64,
        n1: usize,
        n2: usize,
    },
}

impl GeometryConfig {
    pub fn build(&self) -> Result<Mesh, MeshError> {
        match *self {
            GeometryConfig::Sector { center, r0, r1, theta0, theta1, n1, n2 } => {
                Mesh::sector(Vec2::new(center[0], center[1]), r0, r1, theta0, theta1, n1, n2)
            }
            GeometryConfig::Rect { p0, p1, n1, n2 } => {
                Mesh::rect(Vec2::new(p0[0], p0[1]), Vec2::new(p1[0], p1[1]), n1, n2)
            }
            GeometryConfig::Ring { center, r0, r1, n1, n2 } => {
                Mesh::ring(Vec2::new(center[0], center[1]), r0, r1, n1, n2)
            }
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig::Sector {
            center: [0.0, 0.0],
            r0: 0.6,
            r1: 1.4,
            theta0: -0.9,
            theta1: 0.9,
            n1: 16,
            n2: 24,
        }
    }
}

fn default_cut_angle() -> f64 {
    std::f64::consts::PI
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartConfig {
    Identity,
    Sqrt {
        #[serde(default)]
        center: [f64; 2],
        #[serde(default = "default_cut_angle")]
        cut_angle: f64,
    },
}

impl ChartConfig {
    pub fn build(&self) -> Chart {
        match *self {
            ChartConfig::Identity => Chart::Identity,
            ChartConfig::Sqrt { center, cut_angle } => Chart::Sqrt(SqrtChart {
                center,
                cut_angle,
                ..SqrtChart::default()
            }),
        }
    }
}

impl Default for ChartConfig {
    fn default() -> Self {
        ChartConfig::Sqrt { center: [0.0, 0.0], cut_angle: default_cut_angle() }
    }
}

/// Initial data: boundary stream profiles plus a deformation template,
/// both given in the physical plane.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub f0: F0Spec,
    pub sides: Vec<SideStream>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Length of one solve window.
    pub horizon: f64,
    /// Time levels per window.
    pub k_levels: usize,
    /// Number of chained windows.
    pub windows: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { horizon: 0.2, k_levels: 16, windows: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Pressure stabilization weight.
    pub beta: f64,
    /// Smallest admissible flow-map Jacobian determinant.
    pub det_floor: f64,
    pub max_iters: usize,
    /// Convergence tolerance, relative to the first iterate difference.
    pub tol: f64,
    /// Under-relaxation factor in (0, 1].
    pub relax: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        let p = PicardParams::default();
        NumericsConfig {
            beta: p.beta,
            det_floor: p.det_floor,
            max_iters: p.max_iters,
            tol: p.tol,
            relax: p.relax,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardConfig {
    /// Abort when boundary curvature exceeds this multiple of its initial max.
    pub curvature_factor: f64,
    /// Abort when the boundary comes within this fraction of the initial
    /// diameter of the chart cut.
    pub cut_abort_rel: f64,
    /// Gap threshold as a fraction of the initial physical diameter.
    pub splash_rel: f64,
    /// Arc-length exclusion for the gap monitor, in mean boundary spacings.
    pub exclusion_factor: f64,
}

impl Default for GuardConfig {
    fn default() -> Self {
        let p = MarchParams::default();
        GuardConfig {
            curvature_factor: p.curvature_factor,
            cut_abort_rel: p.cut_abort_rel,
            splash_rel: p.splash_rel,
            exclusion_factor: p.exclusion_factor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplashConfig {
    /// Number of dt-halving re-runs of the bracketing window.
    pub bisect_depth: usize,
}

impl Default for SplashConfig {
    fn default() -> Self {
        SplashConfig { bisect_depth: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    /// Perturbation sizes, largest first.
    pub epsilons: Vec<f64>,
    /// Unit shift direction in the physical plane.
    pub shift: [f64; 2],
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig { epsilons: vec![0.02, 0.01, 0.005], shift: [1.0, 0.0] }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub chart: ChartConfig,
    pub initial: InitialConfig,
    pub window: WindowConfig,
    pub numerics: NumericsConfig,
    pub norms: NormConfig,
    pub guards: GuardConfig,
    pub splash: SplashConfig,
    pub stability: StabilityConfig,
}

/// Mesh, chart, and nodal initial data built from one config.
pub struct Setup {
    pub mesh: Mesh,
    pub chart: Chart,
    pub v0: VectorField,
    pub g0: MatrixField,
}

impl RunConfig {
    pub fn picard_params(&self) -> PicardParams {
        PicardParams {
            max_iters: self.numerics.max_iters,
            tol: self.numerics.tol,
            relax: self.numerics.relax,
            det_floor: self.numerics.det_floor,
            beta: self.numerics.beta,
            norms: self.norms.clone(),
        }
    }

    pub fn march_params(&self) -> MarchParams {
        MarchParams {
            windows: self.window.windows,
            window_t: self.window.horizon,
            k_levels: self.window.k_levels,
            picard: self.picard_params(),
            curvature_factor: self.guards.curvature_factor,
            cut_abort_rel: self.guards.cut_abort_rel,
            splash_rel: self.guards.splash_rel,
            exclusion_factor: self.guards.exclusion_factor,
            threshold_abs: None,
            exclusion_abs: None,
        }
    }

    pub fn build(&self) -> Result<Setup, ConfigError> {
        self.build_shifted(Vec2::new(0.0, 0.0))
    }

    /// Build with every physical node translated by `delta`, keeping the
    /// nodal data values: the same fluid state rigidly shifted, expressed
    /// in the same chart.
    pub fn build_shifted(&self, delta: Vec2) -> Result<Setup, ConfigError> {
        let base = self.geometry.build()?;
        let chart = self.chart.build();
        let phys0: Vec<Vec2> = base.nodes().iter().map(|&z| chart.inverse(z)).collect();
        let mesh = if delta == Vec2::new(0.0, 0.0) {
            base
        } else {
            let shifted = phys0
                .iter()
                .map(|&x| chart.forward(x + delta))
                .collect::<Result<Vec<Vec2>, ChartError>>()?;
            Mesh::from_nodes(shifted, base.n1, base.n2, base.periodic1, base.periodic2)?
        };
        let v0 = velocity_at(&phys0, &self.initial.sides, &self.initial.f0);
        let g0 = deformation_at(&phys0, &self.initial.f0);
        Ok(Setup { mesh, chart, v0, g0 })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let (n1, n2) = match self.geometry {
            GeometryConfig::Sector { r0, r1, theta0, theta1, n1, n2, .. } => {
                if !(r0 > 0.0 && r1 > r0) {
                    return bad(format!("geometry radii must satisfy 0 < r0 < r1, got {r0} and {r1}"));
                }
                if theta1 <= theta0 {
                    return bad(format!("sector needs theta0 < theta1, got {theta0} and {theta1}"));
                }
                (n1, n2)
            }
            GeometryConfig::Ring { r0, r1, n1, n2, .. } => {
                if !(r0 > 0.0 && r1 > r0) {
                    return bad(format!("geometry radii must satisfy 0 < r0 < r1, got {r0} and {r1}"));
                }
                (n1, n2)
            }
            GeometryConfig::Rect { p0, p1, n1, n2 } => {
                if !(p1[0] > p0[0] && p1[1] > p0[1]) {
                    return bad("rect needs p0 < p1 componentwise".into());
                }
                (n1, n2)
            }
        };
        if n1 < 3 || n2 < 3 {
            return bad(format!("geometry needs at least 3 nodes per axis, got {n1}x{n2}"));
        }
        if !(self.window.horizon > 0.0) {
            return bad(format!("window.horizon must be positive, got {}", self.window.horizon));
        }
        if self.window.k_levels < 1 || self.window.windows < 1 {
            return bad("window.k_levels and window.windows must be at least 1".into());
        }
        if !(self.numerics.relax > 0.0 && self.numerics.relax <= 1.0) {
            return bad(format!("numerics.relax must lie in (0, 1], got {}", self.numerics.relax));
        }
        if !(self.numerics.det_floor > 0.0 && self.numerics.det_floor < 1.0) {
            return bad(format!(
                "numerics.det_floor must lie in (0, 1), got {}",
                self.numerics.det_floor
            ));
        }
        if !(self.numerics.beta >= 0.0) {
            return bad(format!("numerics.beta must be nonnegative, got {}", self.numerics.beta));
        }
        if !(self.numerics.tol >= 0.0) || self.numerics.max_iters < 1 {
            return bad("numerics.tol must be nonnegative and max_iters at least 1".into());
        }
        if !(self.norms.s > 1.0) {
            return bad(format!("norms.s must exceed 1, got {}", self.norms.s));
        }
        if !(self.norms.gamma > 1.0) {
            return bad(format!("norms.gamma must exceed 1, got {}", self.norms.gamma));
        }
        for side in &self.initial.sides {
            if !(side.width_out > side.width_in && side.width_in >= 0.0) {
                return bad(format!(
                    "side collar needs 0 <= width_in < width_out, got {} and {}",
                    side.width_in, side.width_out
                ));
            }
            for bump in &side.bumps {
                if !(bump.width > 0.0) {
                    return bad(format!("bump width must be positive, got {}", bump.width));
                }
            }
        }
        if self.stability.epsilons.is_empty()
            || self.stability.epsilons.iter().any(|&e| !(e > 0.0))
        {
            return bad("stability.epsilons must be a nonempty list of positive values".into());
        }
        if !(self.guards.splash_rel > 0.0 && self.guards.cut_abort_rel > 0.0) {
            return bad("guards.splash_rel and guards.cut_abort_rel must be positive".into());
        }
        Ok(())
    }

    /// Collar transitions narrower than a few cells alias badly; flag them.
    pub fn resolution_warnings(&self, mesh: &Mesh) -> Vec<String> {
        let h = mesh.mean_phys_spacing();
        let mut out = Vec::new();
        for (i, side) in self.initial.sides.iter().enumerate() {
            let span = side.width_out - side.width_in;
            if span < 8.0 * h {
                out.push(format!(
                    "side {i}: collar transition {span:.3e} spans fewer than 8 cells (h = {h:.3e})"
                ));
            }
            for (j, bump) in side.bumps.iter().enumerate() {
                if bump.width < 4.0 * h {
                    out.push(format!(
                        "side {i} bump {j}: width {:.3e} spans fewer than 4 cells (h = {h:.3e})",
                        bump.width
                    ));
                }
            }
        }
        out
    }
}

/// Parse one `key.path=value` override and splice it into the document,
/// creating intermediate tables as needed. The value is parsed as TOML;
/// anything that does not parse is taken as a bare string.
fn apply_override(doc: &mut toml::Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::OverrideSyntax(spec.to_string()))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(|seg| seg.is_empty()) {
        return Err(ConfigError::OverrideSyntax(spec.to_string()));
    }
    let value = parse_toml_scalar(raw.trim());
    let mut cursor = doc;
    let segs: Vec<&str> = key.split('.').collect();
    for seg in &segs[..segs.len() - 1] {
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| ConfigError::OverridePath(key.to_string()))?;
        cursor = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = cursor
        .as_table_mut()
        .ok_or_else(|| ConfigError::OverridePath(key.to_string()))?;
    table.insert(segs[segs.len() - 1].to_string(), value);
    Ok(())
}

fn parse_toml_scalar(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {raw}")) {
        Ok(w) => w.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Load a config file (or start from defaults when `path` is `None`), apply
/// overrides, then deserialize and validate.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut doc: toml::Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.display().to_string(),
                source,
            })?;
            text.parse()?
        }
        None => toml::Value::Table(Default::default()),
    };
    for spec in overrides {
        apply_override(&mut doc, spec)?;
    }
    let cfg: RunConfig = doc.try_into()?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build_a_usable_setup() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let setup = cfg.build().unwrap();
        assert_eq!(setup.mesh.len(), 16 * 24);
        assert!(setup.v0.max_norm() == 0.0);
        for g in &setup.g0.0 {
            assert!((g - Mat2::identity()).abs().max() == 0.0);
        }
    }

    #[test]
    fn toml_round_trips_through_serde() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(toml::to_string(&back).unwrap(), text);
    }

    #[test]
    fn file_sections_and_overrides_compose() {
        let dir = std::env::temp_dir().join("splash2d-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("case.toml");
        std::fs::write(
            &path,
            r#"
seed = 7

[geometry]
kind = "rect"
p0 = [0.0, 0.0]
p1 = [1.0, 2.0]
n1 = 9
n2 = 11

[chart]
kind = "identity"

[[initial.sides]]
width_in = 0.05
width_out = 0.3

[initial.sides.frame]
kind = "segment"
a = [0.0, 0.0]
b = [1.0, 0.0]

[[initial.sides.bumps]]
center = 0.5
width = 0.3
amp = 0.02

[window]
horizon = 0.1
k_levels = 4
"#,
        )
        .unwrap();
        let cfg = load_config(
            Some(&path),
            &[
                "window.k_levels=8".to_string(),
                "numerics.beta = 0.05".to_string(),
                "initial.f0.kind=shear".to_string(),
                "initial.f0.c=0.25".to_string(),
                "stability.epsilons=[0.04, 0.02]".to_string(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.window.k_levels, 8);
        assert_eq!(cfg.window.windows, 1);
        assert!((cfg.numerics.beta - 0.05).abs() < 1e-15);
        assert!(matches!(cfg.initial.f0, F0Spec::Shear { c } if (c - 0.25).abs() < 1e-15));
        assert_eq!(cfg.stability.epsilons, vec![0.04, 0.02]);
        assert!(matches!(cfg.chart.build(), Chart::Identity));
        let setup = cfg.build().unwrap();
        assert!(setup.v0.max_norm() > 0.0);
    }

    #[test]
    fn bad_inputs_are_rejected_with_reasons() {
        assert!(matches!(
            load_config(None, &["window.k_levels".to_string()]),
            Err(ConfigError::OverrideSyntax(_))
        ));
        assert!(matches!(
            load_config(None, &["seed=3".to_string(), "seed.deep=1".to_string()]),
            Err(ConfigError::OverridePath(_))
        ));
        assert!(matches!(
            load_config(None, &["window.horizon=-1.0".to_string()]),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            load_config(None, &["window.nope=3".to_string()]),
            Err(ConfigError::Parse(_))
        ));
        assert!(load_config(Some(Path::new("/nonexistent/x.toml")), &[]).is_err());
    }

    #[test]
    fn shifted_build_translates_the_physical_nodes_only() {
        let cfg = RunConfig::default();
        let base = cfg.build().unwrap();
        let delta = Vec2::new(0.013, -0.007);
        let moved = cfg.build_shifted(delta).unwrap();
        for (a, b) in base.mesh.nodes().iter().zip(moved.mesh.nodes()) {
            let pa = base.chart.inverse(*a);
            let pb = moved.chart.inverse(*b);
            assert!((pb - pa - delta).norm() < 1e-12);
        }
        assert_eq!(base.v0.0.len(), moved.v0.0.len());
    }

    use crate::chart::Mat2;
}
