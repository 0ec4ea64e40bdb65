//! Truncated momentum grids and quadrature helpers.
//!
//! Every function of momentum lives on a [`MomentumGrid`]: a finite window
//! `[p_min, p_max]` of the real line together with quadrature nodes and
//! positive weights. Integrals over momentum become weighted sums.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GhdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    GaussLegendre,
    Trapezoid,
    UniformMidpoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumGrid {
    p_min: f64,
    p_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    rule: QuadratureRule,
}

impl MomentumGrid {
    /// Builds a grid with `count` nodes on `[p_min, p_max]`.
    pub fn new(p_min: f64, p_max: f64, count: usize, rule: QuadratureRule) -> Result<Self> {
        if !(p_min.is_finite() && p_max.is_finite()) || p_min >= p_max {
            return Err(GhdError::config(format!(
                "momentum bounds must satisfy p_min < p_max, got [{p_min}, {p_max}]"
            )));
        }
        if count < 2 {
            return Err(GhdError::config(format!(
                "momentum grid needs at least 2 nodes, got {count}"
            )));
        }
        let len = p_max - p_min;
        let (nodes, weights) = match rule {
            QuadratureRule::GaussLegendre => {
                let (x, w) = gauss_legendre_unit(count);
                let half = 0.5 * len;
                let mid = 0.5 * (p_min + p_max);
                let nodes = x.iter().map(|&s| mid + half * s).collect();
                let weights = w.iter().map(|&s| half * s).collect();
                (nodes, weights)
            }
            QuadratureRule::Trapezoid => {
                let h = len / (count - 1) as f64;
                let nodes = (0..count)
                    .map(|i| if i == count - 1 { p_max } else { p_min + h * i as f64 })
                    .collect();
                let weights = (0..count)
                    .map(|i| if i == 0 || i == count - 1 { 0.5 * h } else { h })
                    .collect();
                (nodes, weights)
            }
            QuadratureRule::UniformMidpoint => {
                let h = len / count as f64;
                let nodes = (0..count).map(|i| p_min + h * (i as f64 + 0.5)).collect();
                (nodes, vec![h; count])
            }
        };
        let grid = MomentumGrid {
            p_min,
            p_max,
            nodes,
            weights,
            rule,
        };
        grid.validate()?;
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        let increasing = self.nodes.windows(2).all(|w| w[0] < w[1]);
        let inside = self
            .nodes
            .iter()
            .all(|&p| p >= self.p_min && p <= self.p_max);
        if !increasing || !inside {
            return Err(GhdError::Numerical(
                "momentum nodes not strictly increasing inside the window".into(),
            ));
        }
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(GhdError::Numerical("non-positive quadrature weight".into()));
        }
        let len = self.p_max - self.p_min;
        let total: f64 = self.weights.iter().sum();
        if ((total - len) / len).abs() > 1e-12 {
            return Err(GhdError::Numerical(format!(
                "weights sum to {total}, expected {len}"
            )));
        }
        Ok(())
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Weighted sum `Σ w_i f_i` of values sampled at the nodes.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, f)| w * f).sum()
    }

    /// Samples `f` at every node.
    pub fn sample(self: &Arc<Self>, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: Arc::clone(self),
            values: self.nodes.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Index of the node closest to `p`.
    pub fn nearest_index(&self, p: f64) -> usize {
        let idx = self.nodes.partition_point(|&q| q < p);
        if idx == 0 {
            0
        } else if idx == self.nodes.len() {
            idx - 1
        } else if (self.nodes[idx] - p).abs() < (p - self.nodes[idx - 1]).abs() {
            idx
        } else {
            idx - 1
        }
    }
}

/// A function of momentum sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Arc<MomentumGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<MomentumGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GhdError::config(format!(
                "grid function has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: Arc<MomentumGrid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<MomentumGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn integrate(&self) -> f64 {
        integrate(self)
    }
}

/// `Σ_i w_i f(p_i)` over the function's grid.
pub fn integrate(f: &GridFunction) -> f64 {
    f.grid.integrate_values(&f.values)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (z * pn - p0) / (z * z - 1.0);
    (pn, dp)
}

/// Gauss–Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre_unit(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&s| mid + half * s).collect(),
        w.iter().map(|&s| half * s).collect(),
    )
}

/// Composite Simpson weights for `n` equispaced samples with spacing `h`.
///
/// An odd number of intervals closes with Simpson's 3/8 rule on the last
/// three. Two samples fall back to the trapezoid rule.
pub fn composite_simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    match n {
        0 | 1 => return w,
        2 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
            return w;
        }
        _ => {}
    }
    let intervals = n - 1;
    let simpson_intervals = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    let mut k = 0;
    while k < simpson_intervals {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
        k += 2;
    }
    if simpson_intervals < intervals {
        let s = simpson_intervals;
        w[s] += 3.0 * h / 8.0;
        w[s + 1] += 9.0 * h / 8.0;
        w[s + 2] += 9.0 * h / 8.0;
        w[s + 3] += 3.0 * h / 8.0;
    }
    w
}
