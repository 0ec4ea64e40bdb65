//! Seed occupation functions `n₀(x, p)`.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GhdError, Result};

/// Momentum profile of one reservoir in a partitioning protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// `1/(1 + exp((p²/2 − μ)/T))`
    Fermi { mu: f64, temperature: f64 },
}

impl Profile {
    pub fn eval(&self, p: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Gaussian {
                amplitude,
                center,
                width,
            } => {
                let d = (p - center) / width;
                amplitude * (-0.5 * d * d).exp()
            }
            Profile::Fermi { mu, temperature } => {
                1.0 / (1.0 + ((0.5 * p * p - mu) / temperature).exp())
            }
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Gaussian { amplitude, .. } => amplitude,
            Profile::Fermi { mu, temperature } => 1.0 / (1.0 + (-mu / temperature).exp()),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Profile::Constant { value } => value >= 0.0 && value.is_finite(),
            Profile::Gaussian {
                amplitude, width, ..
            } => amplitude >= 0.0 && amplitude.is_finite() && width > 0.0,
            Profile::Fermi { mu, temperature } => mu.is_finite() && temperature > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(GhdError::config(format!("invalid profile {self:?}")))
        }
    }
}

/// `n₀` sampled on an `(x, p)` table, bilinearly interpolated and held
/// constant beyond the table edges.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedXY {
    x: Vec<f64>,
    p: Vec<f64>,
    // row-major, rows indexed by x
    values: Vec<f64>,
}

impl TabulatedXY {
    pub fn new(x: Vec<f64>, p: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || p.len() < 2 || values.len() != x.len() * p.len() {
            return Err(GhdError::config(format!(
                "tabulated n0 needs >= 2x2 nodes and {}x{} values, got {}",
                x.len(),
                p.len(),
                values.len()
            )));
        }
        if !x.windows(2).all(|w| w[0] < w[1]) || !p.windows(2).all(|w| w[0] < w[1]) {
            return Err(GhdError::config("tabulated n0 nodes must be strictly increasing"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GhdError::config("tabulated n0 must be finite and non-negative"));
        }
        Ok(TabulatedXY { x, p, values })
    }

    /// Header row `label, p_1, …, p_m`, then rows `x_i, n₀(x_i, p_1), …`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| GhdError::config("empty n0 CSV"))??;
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| GhdError::config(format!("bad n0 CSV entry {s:?}: {e}")))
        };
        let p = header.iter().skip(1).map(parse).collect::<Result<Vec<_>>>()?;
        let mut x = Vec::new();
        let mut values = Vec::new();
        for rec in records {
            let rec = rec?;
            if rec.len() != p.len() + 1 {
                return Err(GhdError::config("n0 CSV rows must match the header length"));
            }
            let mut it = rec.iter();
            x.push(parse(it.next().unwrap_or_default())?);
            for s in it {
                values.push(parse(s)?);
            }
        }
        TabulatedXY::new(x, p, values)
    }

    pub fn eval(&self, x: f64, p: f64) -> f64 {
        let m = self.p.len();
        let (i, s) = locate(&self.x, x);
        let (j, u) = locate(&self.p, p);
        let at = |a: usize, b: usize| self.values[a * m + b];
        (1.0 - s) * ((1.0 - u) * at(i, j) + u * at(i, j + 1))
            + s * ((1.0 - u) * at(i + 1, j) + u * at(i + 1, j + 1))
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `sup_x n₀(x, p)`; bilinear interpolation attains it on a row.
    pub fn envelope(&self, p: f64) -> f64 {
        let (j, u) = locate(&self.p, p);
        let m = self.p.len();
        (0..self.x.len())
            .map(|i| (1.0 - u) * self.values[i * m + j] + u * self.values[i * m + j + 1])
            .fold(0.0, f64::max)
    }
}

fn locate(nodes: &[f64], x: f64) -> (usize, f64) {
    let n = nodes.len();
    if x <= nodes[0] {
        return (0, 0.0);
    }
    if x >= nodes[n - 1] {
        return (n - 2, 1.0);
    }
    let i = (nodes.partition_point(|&v| v <= x) - 1).min(n - 2);
    (i, (x - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioKind {
    /// `a·exp(−x²/2σ²)·exp(−p²/2γ²)`
    GaussianBump { a: f64, sigma: f64, gamma: f64 },
    /// `left(p)` for `x < 0`, `right(p)` for `x ≥ 0`.
    Partitioning { left: Profile, right: Profile },
    TabulatedXY(TabulatedXY),
    Custom,
}

pub type N0Fn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A seed occupation function together with its declared bounds.
#[derive(Clone)]
pub struct Scenario {
    kind: ScenarioKind,
    custom: Option<N0Fn>,
    declared_sup_n: f64,
    x_support: (f64, f64),
    p_support: Option<(f64, f64)>,
}

impl fmt::Debug for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scenario")
            .field("kind", &self.kind)
            .field("declared_sup_n", &self.declared_sup_n)
            .field("x_support", &self.x_support)
            .field("p_support", &self.p_support)
            .finish()
    }
}

impl Scenario {
    pub fn gaussian_bump(a: f64, sigma: f64, gamma: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite() && sigma > 0.0 && gamma > 0.0) {
            return Err(GhdError::config(format!(
                "gaussian bump needs a >= 0, sigma > 0, gamma > 0 (got {a}, {sigma}, {gamma})"
            )));
        }
        Ok(Scenario {
            kind: ScenarioKind::GaussianBump { a, sigma, gamma },
            custom: None,
            declared_sup_n: a,
            x_support: (-9.0 * sigma, 9.0 * sigma),
            p_support: None,
        })
    }

    pub fn partitioning(left: Profile, right: Profile) -> Result<Self> {
        left.validate()?;
        right.validate()?;
        Ok(Scenario {
            kind: ScenarioKind::Partitioning { left, right },
            custom: None,
            declared_sup_n: left.sup().max(right.sup()),
            x_support: (-1.0, 1.0),
            p_support: None,
        })
    }

    pub fn tabulated(table: TabulatedXY) -> Self {
        let sup = table.sup();
        let x_support = table.x_range();
        Scenario {
            kind: ScenarioKind::TabulatedXY(table),
            custom: None,
            declared_sup_n: sup,
            x_support,
            p_support: None,
        }
    }

    /// An arbitrary `n₀`. Outside `x_support` it should be constant in `x`
    /// or negligible.
    pub fn custom(n0: N0Fn, declared_sup_n: f64, x_support: (f64, f64)) -> Result<Self> {
        if !(declared_sup_n >= 0.0 && declared_sup_n.is_finite()) {
            return Err(GhdError::config("declared sup of n0 must be finite and >= 0"));
        }
        if !(x_support.0 < x_support.1) {
            return Err(GhdError::config("x support must be a non-empty interval"));
        }
        Ok(Scenario {
            kind: ScenarioKind::Custom,
            custom: Some(n0),
            declared_sup_n,
            x_support,
            p_support: None,
        })
    }

    /// Sets `n₀ = 0` for momenta outside `[lo, hi]`.
    pub fn with_momentum_support(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(GhdError::config("momentum support must be a non-empty interval"));
        }
        self.p_support = Some((lo, hi));
        Ok(self)
    }

    pub fn with_x_support(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(GhdError::config("x support must be a non-empty interval"));
        }
        self.x_support = (lo, hi);
        Ok(self)
    }

    pub fn kind(&self) -> &ScenarioKind {
        &self.kind
    }

    pub fn declared_sup_n(&self) -> f64 {
        self.declared_sup_n
    }

    pub fn x_support(&self) -> (f64, f64) {
        self.x_support
    }

    pub fn p_support(&self) -> Option<(f64, f64)> {
        self.p_support
    }

    fn in_p_support(&self, p: f64) -> bool {
        self.p_support.is_none_or(|(lo, hi)| p >= lo && p <= hi)
    }

    pub fn n0(&self, x: f64, p: f64) -> f64 {
        if !self.in_p_support(p) {
            return 0.0;
        }
        match &self.kind {
            ScenarioKind::GaussianBump { a, sigma, gamma } => {
                a * (-0.5 * (x / sigma).powi(2)).exp() * (-0.5 * (p / gamma).powi(2)).exp()
            }
            ScenarioKind::Partitioning { left, right } => {
                if x < 0.0 {
                    left.eval(p)
                } else {
                    right.eval(p)
                }
            }
            ScenarioKind::TabulatedXY(t) => t.eval(x, p),
            ScenarioKind::Custom => self.custom.as_ref().map_or(0.0, |f| f(x, p)),
        }
    }

    /// `sup_x n₀(x, p)` when it is known in closed form.
    pub fn exact_envelope(&self, p: f64) -> Option<f64> {
        if !self.in_p_support(p) {
            return Some(0.0);
        }
        match &self.kind {
            ScenarioKind::GaussianBump { a, gamma, .. } => {
                Some(a * (-0.5 * (p / gamma).powi(2)).exp())
            }
            ScenarioKind::Partitioning { left, right } => Some(left.eval(p).max(right.eval(p))),
            ScenarioKind::TabulatedXY(t) => Some(t.envelope(p)),
            ScenarioKind::Custom => None,
        }
    }

    pub fn is_partitioning(&self) -> bool {
        matches!(self.kind, ScenarioKind::Partitioning { .. })
    }

    /// `(n_L(p), n_R(p))` for partitioning scenarios.
    pub fn reservoirs(&self, p: f64) -> Option<(f64, f64)> {
        match &self.kind {
            ScenarioKind::Partitioning { .. } => Some((self.n0(-1.0, p), self.n0(0.0, p))),
            _ => None,
        }
    }

    /// Points in `x` where `n₀` may jump.
    pub fn jumps(&self) -> Vec<f64> {
        if self.is_partitioning() {
            vec![0.0]
        } else {
            Vec::new()
        }
    }

    /// Whether `n₀` is continuously differentiable in `x`.
    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, ScenarioKind::GaussianBump { .. })
    }

    /// Returns the same scenario with `n₀` multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(GhdError::config("scale factor must be finite and >= 0"));
        }
        let base = self.clone();
        let f: N0Fn = Arc::new(move |x, p| alpha * base.n0(x, p));
        let mut out = Scenario::custom(f, alpha * self.declared_sup_n, self.x_support)?;
        if let ScenarioKind::GaussianBump { a, sigma, gamma } = self.kind {
            out.kind = ScenarioKind::GaussianBump {
                a: alpha * a,
                sigma,
                gamma,
            };
            out.custom = None;
        }
        out.p_support = self.p_support;
        Ok(out)
    }
}
