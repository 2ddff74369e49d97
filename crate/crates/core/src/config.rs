//! Run configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::charts::{ChartKind, ChartSpec, Rect};
use crate::conformal::{ConformalMap, KillingField};
use crate::error::{Error, Result};
use crate::spaceform::Epsilon;
use crate::tolerances::Tolerances;

/// `(P, Q, R)` given explicitly or fitted from the chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeingartenSpec {
    Explicit {
        #[serde(rename = "P")]
        p: f64,
        #[serde(rename = "Q")]
        q: f64,
        #[serde(rename = "R")]
        r: f64,
    },
    Mode(WeingartenMode),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeingartenMode {
    Fit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n1: usize,
    pub n2: usize,
    pub ns: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n1: 24, n2: 24, ns: 12 }
    }
}

impl GridSpec {
    pub fn dims(&self) -> [usize; 3] {
        [self.n1, self.n2, self.ns]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridFormat {
    #[default]
    Binary,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub grid_format: GridFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out"), grid_format: GridFormat::Binary }
    }
}

/// Linear map `R⁴ → R³` used for mesh export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Projection {
    /// Drop one coordinate (1-based).
    Drop(usize),
    /// Rows of a 3×4 matrix.
    Matrix([[f64; 4]; 3]),
}

impl Default for Projection {
    fn default() -> Self {
        Projection::Drop(4)
    }
}

impl Projection {
    pub fn matrix(&self) -> Result<[[f64; 4]; 3]> {
        match *self {
            Projection::Drop(k) if (1..=4).contains(&k) => {
                let mut m = [[0.0; 4]; 3];
                let keep: Vec<usize> = (0..4).filter(|&i| i + 1 != k).collect();
                for (row, &col) in keep.iter().enumerate() {
                    m[row][col] = 1.0;
                }
                Ok(m)
            }
            Projection::Drop(k) => Err(Error::Config(format!("cannot drop axis {k} of R^4"))),
            Projection::Matrix(m) => {
                if m.iter().flatten().all(|x| x.is_finite()) {
                    Ok(m)
                } else {
                    Err(Error::Config("projection matrix has non-finite entries".into()))
                }
            }
        }
    }

    pub fn apply(m: &[[f64; 4]; 3], x: &[f64]) -> [f64; 3] {
        m.map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportItem {
    Slices,
    Lines,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    #[default]
    Obj,
    Ply,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSpec {
    pub what: Vec<ExportItem>,
    pub projection: Projection,
    pub format: MeshFormat,
    /// Vertices per side of each slice mesh.
    pub mesh: [usize; 2],
}

impl Default for ExportSpec {
    fn default() -> Self {
        ExportSpec {
            what: vec![ExportItem::Slices, ExportItem::Lines],
            projection: Projection::default(),
            format: MeshFormat::Obj,
            mesh: [16, 16],
        }
    }
}

/// Sampling of the cyclic suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CyclicSpec {
    /// Number of `e₁`-traces.
    pub traces: usize,
    /// Number of `s = const` leaves fitted by hyperspheres.
    pub slices: usize,
    /// Integration steps per trace.
    pub steps: usize,
    /// Random interior points for the pointwise criteria.
    pub points: usize,
    /// Conformal Killing field checked for alignment; defaults per `ε`.
    pub killing: Option<KillingField>,
}

impl Default for CyclicSpec {
    fn default() -> Self {
        CyclicSpec { traces: 20, slices: 12, steps: 160, points: 24, killing: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub eps: Epsilon,
    pub chart: ChartSpec,
    pub weingarten: WeingartenSpec,
    #[serde(default)]
    pub s0: f64,
    #[serde(default = "default_scan")]
    pub scan: [f64; 2],
    #[serde(default = "default_scan_points")]
    pub scan_points: usize,
    /// Which admissible interval to use; by default the one containing `s0`.
    #[serde(default)]
    pub interval_index: Option<usize>,
    /// `s`-range of the grid; by default the middle 80% of the interval.
    #[serde(default)]
    pub s_window: Option<[f64; 2]>,
    #[serde(default)]
    pub grid: GridSpec,
    /// Replaces `a(s)` by `a(s) + c s²`.
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub maps: Vec<ConformalMap>,
    #[serde(default, alias = "thresholds")]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub cyclic: CyclicSpec,
    #[serde(default)]
    pub export: ExportSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_scan() -> [f64; 2] {
    [-2.0, 2.0]
}

fn default_scan_points() -> usize {
    400
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let g = self.grid;
        if g.n1 < 4 || g.n2 < 4 || g.ns < 4 {
            return Err(Error::Config(format!("grid sizes must be at least 4, got {:?}", g.dims())));
        }
        if !(self.scan[0] < self.scan[1]) || self.scan.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config(format!("invalid scan range {:?}", self.scan)));
        }
        if self.scan_points < 64 {
            return Err(Error::Config(format!("scan needs at least 64 points, got {}", self.scan_points)));
        }
        if let Some(w) = self.s_window {
            if !(w[0] < w[1]) {
                return Err(Error::Config(format!("invalid s_window {w:?}")));
            }
        }
        if self.cyclic.traces == 0 || self.cyclic.steps < 4 || self.cyclic.slices == 0 {
            return Err(Error::Config("cyclic sampling needs traces, slices and at least 4 steps".into()));
        }
        if self.export.mesh.iter().any(|&n| n < 2) {
            return Err(Error::Config("export meshes need at least 2 vertices per side".into()));
        }
        self.export.projection.matrix()?;
        if let Some(k) = self.cyclic.killing {
            k.validate()?;
        }
        self.tolerances.validate()
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<(RunConfig, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok((RunConfig::from_json(&text)?, text))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Hex SHA-256 of the configuration text.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The four reference builds.
pub fn catalog_configs() -> Vec<(&'static str, RunConfig)> {
    let tube_h = 0.5 * (1f64.tanh() + 1.0 / 1f64.tanh());
    let build = |eps, kind, domain, pqr: [f64; 3], window: [f64; 2]| RunConfig {
        eps,
        chart: ChartSpec { kind, domain, umbilic_gap: None },
        weingarten: WeingartenSpec::Explicit { p: pqr[0], q: pqr[1], r: pqr[2] },
        s0: 0.0,
        scan: default_scan(),
        scan_points: default_scan_points(),
        interval_index: None,
        s_window: Some(window),
        grid: GridSpec::default(),
        perturbation: 0.0,
        maps: vec![ConformalMap::Phi],
        tolerances: Tolerances::default(),
        outputs: OutputSpec::default(),
        cyclic: CyclicSpec::default(),
        export: ExportSpec::default(),
        seed: 0,
    };
    vec![
        (
            "cylinder",
            build(
                Epsilon::Flat,
                ChartKind::CylinderOverPlaneCurve { radius: Some(1.0), plane_curve: None },
                None,
                [-1.0, 1.0, 0.5],
                [-0.5, 0.6],
            ),
        ),
        (
            "pseudosphere",
            build(Epsilon::Flat, ChartKind::Pseudosphere, None, [-1.0, 0.0, 1.0], [-0.35, 0.35]),
        ),
        (
            "flat_torus",
            build(
                Epsilon::Spherical,
                ChartKind::FlatTorus { r1: 0.6 },
                None,
                [-1.0, 1.0, 31.0 / 24.0],
                [-0.3, 0.3],
            ),
        ),
        (
            "equidistant_tube",
            build(
                Epsilon::Hyperbolic,
                ChartKind::EquidistantTube { d: 1.0 },
                Some(Rect { x1: [-0.75, 0.75], x2: [0.0, 1.5] }),
                [-1.0, 1.0, -1.0 + tube_h],
                [-0.4, 0.5],
            ),
        ),
    ]
}
