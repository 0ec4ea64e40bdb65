//! JSON run configuration.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ghd_core::{
    Boundary, KernelModel, KernelOperator, MomentumGrid, NamedFunction, Profile, QuadratureRule, Rectangle,
    ScatteringKernel, Scenario, SeedGridSpec, SolverConfig, TabulatedKernel, TabulatedXY, Velocity,
};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub kernel: KernelConfig,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub seed_grid: SeedGridSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub solve: Option<SolveConfig>,
    #[serde(default)]
    pub conserve: Option<ConserveConfig>,
    #[serde(default)]
    pub weakcheck: Option<WeakcheckConfig>,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub plotdata: Option<PlotConfig>,
    /// Directory that relative paths in the config resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub count: usize,
    #[serde(default = "default_rule")]
    pub rule: QuadratureRule,
}

fn default_rule() -> QuadratureRule {
    QuadratureRule::GaussLegendre
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    LiebLiniger {
        c: f64,
        #[serde(default)]
        velocity: VelocityConfig,
    },
    SinhGordon {
        #[serde(default)]
        velocity: VelocityConfig,
    },
    HardRods {
        d: f64,
        #[serde(default)]
        velocity: VelocityConfig,
    },
    /// Square CSV table, header row of nodes.
    Tabulated {
        path: PathBuf,
        #[serde(default)]
        velocity: VelocityConfig,
    },
    Zero {
        #[serde(default)]
        velocity: VelocityConfig,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityConfig {
    #[default]
    Identity,
    Relativistic {
        m: f64,
    },
    Tabulated {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub initial: InitialConfig,
    #[serde(default)]
    pub momentum_support: Option<(f64, f64)>,
    #[serde(default)]
    pub x_support: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    GaussianBump { a: f64, sigma: f64, gamma: f64 },
    Partitioning { left: Profile, right: Profile },
    /// CSV with header `label, p_1, …` and rows `x_i, n₀(x_i, p_1), …`.
    Tabulated { path: PathBuf },
}

/// `count` evenly spaced points from `min` to `max`.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Range {
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if self.count < 2 || !(self.min < self.max) {
            return Err(CliError::invalid(format!(
                "range needs min < max and count >= 2, got {self:?}"
            )));
        }
        let n = self.count - 1;
        Ok((0..self.count)
            .map(|i| self.min + (self.max - self.min) * i as f64 / n as f64)
            .collect())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub times: Vec<f64>,
    pub x: Range,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConserveConfig {
    pub times: Vec<f64>,
    pub x: Range,
    pub functions: Vec<String>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-4
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakcheckConfig {
    #[serde(default)]
    pub rectangles: Vec<Rectangle>,
    #[serde(default)]
    pub random: Option<RandomRectangles>,
    #[serde(default = "default_edge_nodes")]
    pub edge_nodes: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_edge_nodes() -> usize {
    16
}

/// Rectangles drawn from a seeded generator.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomRectangles {
    pub count: usize,
    pub seed: u64,
    pub x_range: (f64, f64),
    pub t_range: (f64, f64),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub window: (f64, f64),
    pub dxs: Vec<f64>,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub boundary: Boundary,
    /// Largest admissible L1 gap at every resolution.
    #[serde(default)]
    pub max_gap: Option<f64>,
    /// Admissible interval for the fitted convergence order.
    #[serde(default)]
    pub order_range: Option<(f64, f64)>,
}

fn default_cfl() -> f64 {
    0.9
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub times: Vec<f64>,
    pub x: Range,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| CliError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn open(&self, p: &Path) -> Result<File, CliError> {
        let full = self.resolve(p);
        File::open(&full).map_err(|e| CliError::Io { path: full, source: e })
    }

    pub fn operator(&self) -> Result<Arc<KernelOperator>, CliError> {
        let g = self.grid;
        let grid = MomentumGrid::new(g.p_min, g.p_max, g.count, g.rule)?;
        Ok(Arc::new(KernelOperator::new(self.kernel()?, Arc::new(grid))))
    }

    pub fn kernel(&self) -> Result<ScatteringKernel, CliError> {
        let (model, velocity) = match &self.kernel {
            KernelConfig::LiebLiniger { c, velocity } => (KernelModel::LiebLiniger { c: *c }, velocity),
            KernelConfig::SinhGordon { velocity } => (KernelModel::SinhGordon, velocity),
            KernelConfig::HardRods { d, velocity } => (KernelModel::HardRods { d: *d }, velocity),
            KernelConfig::Tabulated { path, velocity } => {
                (KernelModel::Tabulated(TabulatedKernel::from_csv(self.open(path)?)?), velocity)
            }
            KernelConfig::Zero { velocity } => (KernelModel::Zero, velocity),
        };
        let velocity = match velocity {
            VelocityConfig::Identity => Velocity::Identity,
            VelocityConfig::Relativistic { m } => Velocity::Relativistic { m: *m },
            VelocityConfig::Tabulated { nodes, values } => Velocity::Tabulated {
                nodes: nodes.clone(),
                values: values.clone(),
            },
        };
        Ok(ScatteringKernel::new(model, velocity)?)
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let mut sc = match &self.scenario.initial {
            InitialConfig::GaussianBump { a, sigma, gamma } => Scenario::gaussian_bump(*a, *sigma, *gamma)?,
            InitialConfig::Partitioning { left, right } => Scenario::partitioning(*left, *right)?,
            InitialConfig::Tabulated { path } => Scenario::tabulated(TabulatedXY::from_csv(self.open(path)?)?),
        };
        if let Some((lo, hi)) = self.scenario.momentum_support {
            sc = sc.with_momentum_support(lo, hi)?;
        }
        if let Some((lo, hi)) = self.scenario.x_support {
            sc = sc.with_x_support(lo, hi)?;
        }
        Ok(sc)
    }

    /// Resolves the named functions of the `conserve` section.
    pub fn named_functions(&self, names: &[String]) -> Result<Vec<NamedFunction>, CliError> {
        let kernel = self.kernel()?;
        names
            .iter()
            .map(|n| NamedFunction::parse(n, kernel.velocity()).map_err(CliError::from))
            .collect()
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section
            .as_ref()
            .ok_or_else(|| CliError::invalid(format!("missing \"{name}\" section in the config")))
    }
}
