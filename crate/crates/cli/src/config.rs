//! Experiment configuration files.
//!
//! ```toml
//! [experiment]
//! kind = "nu-sweep"          # or a list of kinds, run as a batch
//!
//! [geometry]
//! a = 1.5707963267948966
//! L = 30.0
//! N1 = 241
//! N2 = 17
//!
//! [curvature]
//! kind = "ruled"
//! amplitude = 0.44
//! radius = 6.0
//!
//! [numerics]
//! s_values = [0.0, 2.0, 4.0, 8.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use strip_lab_core::geometry::{
    CurvatureProfile, FlatMetric, Metric, RuledMetric, StripGeometry, TabulatedCurvature, ThetaDot,
};
use strip_lab_core::{LabError, Region};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Jacobi,
    Spectrum,
    Mu,
    NuSweep,
    Hardy,
    Evolve,
    Mc,
    Report,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Jacobi => "jacobi",
            ExperimentKind::Spectrum => "spectrum",
            ExperimentKind::Mu => "mu",
            ExperimentKind::NuSweep => "nu-sweep",
            ExperimentKind::Hardy => "hardy",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Mc => "mc",
            ExperimentKind::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KindList {
    One(ExperimentKind),
    Many(Vec<ExperimentKind>),
}

impl KindList {
    pub fn kinds(&self) -> Vec<ExperimentKind> {
        match self {
            KindList::One(k) => vec![*k],
            KindList::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub kind: KindList,
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBlock {
    pub a: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N1")]
    pub n1: usize,
    #[serde(rename = "N2")]
    pub n2: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurvatureBlock {
    Zero,
    GaussianBump {
        amplitude: f64,
        #[serde(default)]
        center: [f64; 2],
        widths: [f64; 2],
        radius: f64,
    },
    ConstantOnBox {
        value: f64,
        half_length: f64,
    },
    /// Ruled strip with `theta' = amplitude * bump(x1 / radius)`.
    Ruled {
        amplitude: f64,
        radius: f64,
    },
    /// CSV with columns `x1, x2, K` listed on a tensor table, `x2` fastest.
    Tabulated {
        file: PathBuf,
        support_radius: f64,
    },
}

impl Default for CurvatureBlock {
    fn default() -> Self {
        CurvatureBlock::Zero
    }
}

fn default_tol() -> f64 {
    1e-8
}
fn default_eigen_count() -> usize {
    4
}
fn default_alpha() -> f64 {
    1.0
}
fn default_window() -> [f64; 2] {
    [5.0, 100.0]
}
fn default_paths() -> usize {
    100_000
}
fn default_mc_dt() -> f64 {
    1e-3
}
fn default_trials() -> usize {
    100
}
fn default_s_values() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 4.0, 8.0]
}
fn default_t_values() -> Vec<f64> {
    vec![1.0]
}
fn default_columns() -> usize {
    121
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_eigen_count")]
    pub eigen_count: usize,
    /// Heat-equation step; chosen from the fit window when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_mc_dt")]
    pub mc_dt: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_s_values")]
    pub s_values: Vec<f64>,
    /// Monte Carlo checkpoints.
    #[serde(default = "default_t_values")]
    pub t_values: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub x0: [f64; 2],
    /// `[x1_lo, x1_hi, x2_lo, x2_hi]`; the whole strip when absent.
    #[serde(default)]
    pub region: Option<[f64; 4]>,
    /// Hardy interval `J`; the curvature support when absent.
    #[serde(default)]
    pub hardy_interval: Option<[f64; 2]>,
    #[serde(default = "default_columns")]
    pub hardy_columns: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Acceptance criteria run by `report`; all when empty.
    #[serde(default)]
    pub criteria: Vec<u32>,
}

impl Default for NumericsBlock {
    fn default() -> Self {
        toml::from_str("").expect("numerics defaults")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentBlock,
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub curvature: CurvatureBlock,
    #[serde(default)]
    pub numerics: NumericsBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// Directory of the config file, for relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::ConfigInvalid(e.message().to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    /// SHA-256 of the canonical serialization, after any overrides.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn validate(&self) -> CliResult<()> {
        let g = &self.geometry;
        let invalid = |m: String| Err(CliError::ConfigInvalid(m));
        if self.experiment.kind.kinds().is_empty() {
            return invalid("experiment.kind is empty".into());
        }
        if !(g.a > 0.0 && g.a.is_finite()) {
            return invalid(format!("geometry.a = {} must be positive", g.a));
        }
        if let CurvatureBlock::Tabulated { file, .. } = &self.curvature {
            let p = self.resolve(file);
            if !p.is_file() {
                return invalid(format!("curvature file {} does not exist", p.display()));
            }
        }
        let profile = self.profile()?;
        let xi = g.a * g.a * profile.sup_norm();
        if !(xi < 0.5) {
            return invalid(format!("a^2 sup|K| = {xi} must be below 1/2"));
        }
        self.strip().map_err(|e| CliError::ConfigInvalid(e.to_string()))?;
        let n = &self.numerics;
        let [t0, t1] = n.window;
        if !(t1 > t0 && t0 >= 0.0) {
            return invalid(format!("numerics.window = [{t0}, {t1}] is not an interval"));
        }
        if n.t_values.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("numerics.t_values must be increasing".into());
        }
        if n.eigen_count == 0 || n.n_paths == 0 {
            return invalid("eigen_count and n_paths must be positive".into());
        }
        if n.criteria.iter().any(|c| !(1..=10).contains(c)) {
            return invalid("numerics.criteria entries must lie in 1..=10".into());
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn profile(&self) -> CliResult<CurvatureProfile> {
        Ok(match &self.curvature {
            CurvatureBlock::Zero => CurvatureProfile::Zero,
            CurvatureBlock::GaussianBump {
                amplitude,
                center,
                widths,
                radius,
            } => CurvatureProfile::GaussianBump {
                amplitude: *amplitude,
                center: *center,
                widths: *widths,
                radius: *radius,
            },
            CurvatureBlock::ConstantOnBox { value, half_length } => CurvatureProfile::ConstantOnBox {
                value: *value,
                half_length: *half_length,
            },
            CurvatureBlock::Ruled { amplitude, radius } => CurvatureProfile::Ruled {
                theta_dot: ThetaDot::Bump {
                    amplitude: *amplitude,
                    radius: *radius,
                },
            },
            CurvatureBlock::Tabulated { file, support_radius } => {
                CurvatureProfile::Tabulated(read_table(&self.resolve(file), *support_radius)?)
            }
        })
    }

    pub fn strip(&self) -> Result<StripGeometry, LabError> {
        let g = &self.geometry;
        StripGeometry::new(g.a, g.l, g.n1, g.n2, &self.profile().map_err(|e| LabError::InvalidArgument(e.to_string()))?)
    }

    pub fn region(&self) -> Region {
        match self.numerics.region {
            None => Region::Whole,
            Some([a, b, c, d]) => Region::rect((a, b), (c, d)),
        }
    }

    pub fn output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        if let Some(p) = cli_out {
            return p.to_path_buf();
        }
        if let Ok(p) = std::env::var("OUTPUT_DIR") {
            if !p.is_empty() {
                return PathBuf::from(p);
            }
        }
        self.output
            .dir
            .as_ref()
            .map(|d| self.resolve(d))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// The metric used by the experiments: closed forms for flat and ruled
/// strips, the Jacobi solution otherwise.
pub enum StripMetric {
    Flat(FlatMetric),
    Ruled(RuledMetric),
    Field(strip_lab_core::geometry::MetricField),
}

impl StripMetric {
    pub fn build(cfg: &ExperimentConfig) -> CliResult<(Self, CurvatureProfile, StripGeometry)> {
        let profile = cfg.profile()?;
        let geom = cfg.strip()?;
        let a = cfg.geometry.a;
        let m = match &profile {
            CurvatureProfile::Zero => StripMetric::Flat(FlatMetric { a }),
            CurvatureProfile::Ruled { theta_dot } => StripMetric::Ruled(RuledMetric {
                theta_dot: *theta_dot,
                a,
            }),
            p => StripMetric::Field(strip_lab_core::geometry::solve_jacobi(p, &geom)?),
        };
        Ok((m, profile, geom))
    }

    pub fn as_dyn(&self) -> &dyn Metric {
        match self {
            StripMetric::Flat(m) => m,
            StripMetric::Ruled(m) => m,
            StripMetric::Field(m) => m,
        }
    }
}

#[derive(Deserialize)]
struct TableRow {
    x1: f64,
    x2: f64,
    #[serde(rename = "K")]
    k: f64,
}

fn read_table(path: &Path, support_radius: f64) -> CliResult<TabulatedCurvature> {
    let bad = |m: String| CliError::ConfigInvalid(format!("{}: {m}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    // header names may carry units, e.g. "x1 [length]"
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(crate::table::bare_name)
        .collect();
    reader.set_headers(csv::StringRecord::from(headers));
    let rows: Vec<TableRow> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| bad(e.to_string()))?;
    let mut x1: Vec<f64> = Vec::new();
    let mut x2: Vec<f64> = Vec::new();
    for r in &rows {
        if x1.last() != Some(&r.x1) {
            x1.push(r.x1);
        }
        if x1.len() == 1 {
            x2.push(r.x2);
        }
    }
    if x1.len() < 2 || x2.len() < 2 || rows.len() != x1.len() * x2.len() {
        return Err(bad("rows do not form a tensor table with x2 varying fastest".into()));
    }
    for (k, r) in rows.iter().enumerate() {
        if r.x1 != x1[k / x2.len()] || r.x2 != x2[k % x2.len()] {
            return Err(bad(format!("row {} breaks the tensor ordering", k + 2)));
        }
    }
    Ok(TabulatedCurvature {
        x1,
        x2,
        values: rows.iter().map(|r| r.k).collect(),
        support_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULED: &str = r#"
[experiment]
kind = "nu-sweep"
[geometry]
a = 1.5707963267948966
L = 30.0
N1 = 241
N2 = 17
[curvature]
kind = "ruled"
amplitude = 0.44
radius = 6.0
"#;

    #[test]
    fn parses_and_hashes_stably() {
        let a = ExperimentConfig::parse(RULED, Path::new(".")).unwrap();
        let b = ExperimentConfig::parse(&RULED.replace("L = 30.0", "L = 30"), Path::new(".")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.numerics.eigen_count, 4);
        assert_eq!(a.experiment.kind.kinds(), vec![ExperimentKind::NuSweep]);
    }

    #[test]
    fn rejects_strong_curvature() {
        let text = RULED.replace("amplitude = 0.44", "amplitude = 0.5");
        let e = ExperimentConfig::parse(&text, Path::new(".")).unwrap_err();
        assert!(matches!(e, CliError::ConfigInvalid(_)));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_files() {
        let text = RULED.replace("N2 = 17", "N2 = 17\nN3 = 1");
        assert!(ExperimentConfig::parse(&text, Path::new(".")).is_err());
        let text = RULED.replace("kind = \"ruled\"\namplitude = 0.44\nradius = 6.0", "kind = \"tabulated\"\nfile = \"missing.csv\"\nsupport_radius = 2.0");
        assert!(matches!(
            ExperimentConfig::parse(&text, Path::new("/nonexistent")),
            Err(CliError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn batch_kinds() {
        let text = RULED.replace("kind = \"nu-sweep\"", "kind = [\"mu\", \"hardy\"]");
        let c = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(c.experiment.kind.kinds(), vec![ExperimentKind::Mu, ExperimentKind::Hardy]);
    }
}
