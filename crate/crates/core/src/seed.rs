//! Seed tables: `X̂₀(x,p) = ∫₀ˣ 1₀^dr`, its inverse `X₀`, and the seed
//! height function `N̂₀(x̂,p) = B(X₀(x̂,p),p)` with `B(x,p) = ∫₀ˣ n₀ 1₀^dr`.
//!
//! Both tables are stored per momentum node as values plus exact
//! derivatives (`1₀^dr` and `n₀ 1₀^dr`) at the spatial nodes, and
//! interpolated by cubic Hermite polynomials. Because `1^dr = 1 + T̂(n 1^dr)`
//! holds at every node, the interpolants satisfy `A = x + T̂B` identically.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::{check_assumptions, AssumptionReport};
use crate::dressing::{DressingBounds, DressingProblem};
use crate::error::{GhdError, Result};
use crate::kernel::KernelOperator;
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedGridSpec {
    /// Spatial step; defaults to a 2000th of the support length.
    pub dx: Option<f64>,
    /// Fraction of the support length added on each side.
    pub extension: f64,
    /// Explicit `[lo, hi]`, overriding support and extension.
    pub window: Option<(f64, f64)>,
    /// Largest admissible truncated momentum tail.
    pub tail_tol: f64,
}

impl Default for SeedGridSpec {
    fn default() -> Self {
        SeedGridSpec {
            dx: None,
            extension: 0.2,
            window: None,
            tail_tol: 1e-6,
        }
    }
}

impl SeedGridSpec {
    /// Uniform nodes `k·dx` covering the window; `x = 0` is always a node.
    pub fn nodes(&self, sc: &Scenario) -> Result<Vec<f64>> {
        let (lo, hi) = match self.window {
            Some(w) => w,
            None => {
                let (a, b) = sc.x_support();
                let ext = self.extension * (b - a);
                (a - ext, b + ext)
            }
        };
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(GhdError::config(format!("invalid seed window [{lo}, {hi}]")));
        }
        let (s0, s1) = sc.x_support();
        let dx = self.dx.unwrap_or((s1 - s0) / 2000.0);
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(GhdError::config(format!("seed dx must be > 0, got {dx}")));
        }
        let kmin = (lo.min(0.0) / dx).floor() as i64;
        let kmax = (hi.max(0.0) / dx).ceil() as i64;
        if kmax - kmin > 10_000_000 {
            return Err(GhdError::config("seed grid too fine for the window"));
        }
        let mut nodes: Vec<f64> = (kmin..=kmax).map(|k| k as f64 * dx).collect();
        if nodes.len() < 3 {
            nodes = vec![-dx, 0.0, dx];
        }
        Ok(nodes)
    }
}

/// One momentum column: values and one-sided slopes at every spatial node.
#[derive(Clone, Debug)]
struct Column {
    a: Vec<f64>,
    b: Vec<f64>,
    // slopes approaching each node from the left and from the right
    da_minus: Vec<f64>,
    da_plus: Vec<f64>,
    db_minus: Vec<f64>,
    db_plus: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SeedTables {
    op: Arc<KernelOperator>,
    scenario: Scenario,
    x: Vec<f64>,
    cols: Vec<Column>,
    report: AssumptionReport,
    max_tn_norm: f64,
    worst_bounds: Option<DressingBounds>,
    free_jumps: Vec<f64>,
}

/// Builds the seed tables after checking the assumptions on `n₀`.
pub fn build_seed(sc: &Scenario, op: Arc<KernelOperator>, spec: &SeedGridSpec) -> Result<SeedTables> {
    let nodes = spec.nodes(sc)?;
    let report = check_assumptions(sc, &op, &nodes, spec.tail_tol);
    if !report.admits_seed() {
        return Err(report.to_error());
    }
    if sc.is_partitioning() {
        build_partitioning(sc, op, report)
    } else {
        build_quadrature(sc, op, report, nodes)
    }
}

struct Sample {
    one_dr: Vec<f64>,
    n_one_dr: Vec<f64>,
    tn_norm: f64,
}

fn dress_at(sc: &Scenario, op: &KernelOperator, x: f64) -> Result<Sample> {
    let n: Vec<f64> = op.grid().nodes().iter().map(|&p| sc.n0(x, p)).collect();
    let prob = DressingProblem::direct(op, n)?;
    let one_dr = prob.one_dr()?;
    let n_one_dr = prob.occupation().iter().zip(&one_dr).map(|(n, g)| n * g).collect();
    Ok(Sample {
        one_dr,
        n_one_dr,
        tn_norm: prob.tn_norm(),
    })
}

fn build_quadrature(
    sc: &Scenario,
    op: Arc<KernelOperator>,
    report: AssumptionReport,
    x: Vec<f64>,
) -> Result<SeedTables> {
    let nx = x.len();
    let np = op.len();
    let dx = x[1] - x[0];
    // nodes at even indices, cell midpoints at odd ones
    let points: Vec<f64> = (0..2 * nx - 1)
        .map(|m| {
            if m % 2 == 0 {
                x[m / 2]
            } else {
                0.5 * (x[m / 2] + x[m / 2 + 1])
            }
        })
        .collect();
    let samples = points
        .par_iter()
        .map(|&z| dress_at(sc, &op, z))
        .collect::<Result<Vec<_>>>()?;
    let max_tn_norm = samples.iter().map(|s| s.tn_norm).fold(0.0, f64::max);
    let origin = x
        .iter()
        .position(|&v| v == 0.0)
        .ok_or_else(|| GhdError::Numerical("seed grid misses the origin".into()))?;

    let cols = (0..np)
        .map(|j| {
            let g = |m: usize| samples[m].one_dr[j];
            let h = |m: usize| samples[m].n_one_dr[j];
            let a = cumulative_simpson(nx, origin, dx, g);
            let b = cumulative_simpson(nx, origin, dx, h);
            let da: Vec<f64> = (0..nx).map(|k| g(2 * k)).collect();
            let db: Vec<f64> = (0..nx).map(|k| h(2 * k)).collect();
            Column {
                a,
                b,
                da_minus: da.clone(),
                da_plus: da,
                db_minus: db.clone(),
                db_plus: db,
            }
        })
        .collect::<Vec<_>>();

    let tables = SeedTables {
        worst_bounds: DressingBounds::new(max_tn_norm, op.metadata().sign_class).ok(),
        op,
        scenario: sc.clone(),
        x,
        cols,
        report,
        max_tn_norm,
        free_jumps: Vec::new(),
    };
    tables.check_monotone()?;
    Ok(tables)
}

/// Origin-anchored cumulative Simpson integral; `f(m)` samples point `m`
/// where even `m` are nodes and odd `m` are cell midpoints.
fn cumulative_simpson(nx: usize, origin: usize, dx: f64, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; nx];
    let cell = |k: usize| dx / 6.0 * (f(2 * k) + 4.0 * f(2 * k + 1) + f(2 * k + 2));
    for k in origin + 1..nx {
        out[k] = out[k - 1] + cell(k - 1);
    }
    for k in (0..origin).rev() {
        out[k] = out[k + 1] - cell(k);
    }
    out
}

fn build_partitioning(sc: &Scenario, op: Arc<KernelOperator>, report: AssumptionReport) -> Result<SeedTables> {
    let left = dress_at(sc, &op, -1.0)?;
    let right = dress_at(sc, &op, 0.0)?;
    let max_tn_norm = left.tn_norm.max(right.tn_norm);
    let cols = (0..op.len())
        .map(|j| {
            let (gl, gr) = (left.one_dr[j], right.one_dr[j]);
            let (hl, hr) = (left.n_one_dr[j], right.n_one_dr[j]);
            Column {
                a: vec![-gl, 0.0, gr],
                b: vec![-hl, 0.0, hr],
                da_minus: vec![gl, gl, gr],
                da_plus: vec![gl, gr, gr],
                db_minus: vec![hl, hl, hr],
                db_plus: vec![hl, hr, hr],
            }
        })
        .collect();
    Ok(SeedTables {
        worst_bounds: DressingBounds::new(max_tn_norm, op.metadata().sign_class).ok(),
        op,
        scenario: sc.clone(),
        x: vec![-1.0, 0.0, 1.0],
        cols,
        report,
        max_tn_norm,
        free_jumps: vec![0.0],
    })
}

/// Cubic Hermite value and derivative on `[x0, x1]`.
#[inline]
fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, m0: f64, m1: f64, x: f64) -> (f64, f64) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * m1;
    let d = (6.0 * s2 - 6.0 * s) * (y0 - y1) / h + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (3.0 * s2 - 2.0 * s) * m1;
    (v, d)
}

impl SeedTables {
    pub fn operator(&self) -> &Arc<KernelOperator> {
        &self.op
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn report(&self) -> &AssumptionReport {
        &self.report
    }

    /// Contraction rate `r = ‖T̂ sup_x n₀‖_op`.
    pub fn rate(&self) -> f64 {
        self.report.tn_norm
    }

    /// Largest `‖T̂n₀(x,·)‖_op` over the seed nodes.
    pub fn max_tn_norm(&self) -> f64 {
        self.max_tn_norm
    }

    /// Bounds on `1₀^dr` at the worst spatial node, if the norm admits them.
    pub fn bounds(&self) -> Option<DressingBounds> {
        self.worst_bounds
    }

    /// Free coordinates at which `n₀(X₀(x̂,p),p)` jumps.
    pub fn free_jumps(&self) -> &[f64] {
        &self.free_jumps
    }

    pub fn sup_n(&self) -> f64 {
        self.report.sup_n0
    }

    fn check_monotone(&self) -> Result<()> {
        for (j, c) in self.cols.iter().enumerate() {
            for k in 0..self.x.len() - 1 {
                let h = self.x[k + 1] - self.x[k];
                let secant = (c.a[k + 1] - c.a[k]) / h;
                let (m0, m1) = (c.da_plus[k], c.da_minus[k + 1]);
                // Fritsch–Carlson: alpha, beta in (0, 3] keeps the cubic monotone
                if !(secant > 0.0 && m0 > 0.0 && m1 > 0.0 && m0 <= 3.0 * secant && m1 <= 3.0 * secant) {
                    return Err(GhdError::Numerical(format!(
                        "seed coordinate not monotone at x = {}, p node {j}",
                        self.x[k]
                    )));
                }
            }
        }
        Ok(())
    }

    fn cell_of(&self, x: f64) -> usize {
        let n = self.x.len();
        (self.x.partition_point(|&v| v <= x).max(1) - 1).min(n - 2)
    }

    fn eval_col(&self, y: &[f64], dm: &[f64], dp: &[f64], x: f64) -> (f64, f64) {
        let n = self.x.len();
        if x <= self.x[0] {
            return (y[0] + dm[0] * (x - self.x[0]), dm[0]);
        }
        if x >= self.x[n - 1] {
            return (y[n - 1] + dp[n - 1] * (x - self.x[n - 1]), dp[n - 1]);
        }
        let k = self.cell_of(x);
        hermite(self.x[k], self.x[k + 1], y[k], y[k + 1], dp[k], dm[k + 1], x)
    }

    /// `X̂₀(x, p_j)`.
    pub fn a_value(&self, x: f64, j: usize) -> f64 {
        let c = &self.cols[j];
        self.eval_col(&c.a, &c.da_minus, &c.da_plus, x).0
    }

    /// `∂ₓX̂₀(x, p_j)`, which approximates `1₀^dr`.
    pub fn a_slope(&self, x: f64, j: usize) -> f64 {
        let c = &self.cols[j];
        self.eval_col(&c.a, &c.da_minus, &c.da_plus, x).1
    }

    /// `B(x, p_j) = ∫₀ˣ n₀ 1₀^dr`.
    pub fn b_value(&self, x: f64, j: usize) -> f64 {
        let c = &self.cols[j];
        self.eval_col(&c.b, &c.db_minus, &c.db_plus, x).0
    }

    /// `X₀(x̂, p_j)`, the inverse of `X̂₀(·, p_j)`.
    pub fn x0_inverse(&self, xhat: f64, j: usize) -> f64 {
        self.invert(xhat, j).0
    }

    /// `N̂₀(x̂, p_j)`.
    pub fn n0hat(&self, xhat: f64, j: usize) -> f64 {
        self.x0_and_n0hat(xhat, j).1
    }

    /// `(X₀(x̂, p_j), N̂₀(x̂, p_j))` with a single inversion.
    pub fn x0_and_n0hat(&self, xhat: f64, j: usize) -> (f64, f64) {
        let (x, cell) = self.invert(xhat, j);
        let c = &self.cols[j];
        let b = match cell {
            Some(k) => {
                hermite(self.x[k], self.x[k + 1], c.b[k], c.b[k + 1], c.db_plus[k], c.db_minus[k + 1], x).0
            }
            None => self.eval_col(&c.b, &c.db_minus, &c.db_plus, x).0,
        };
        (x, b)
    }

    /// Inverse together with the table cell it fell in (`None` when
    /// extrapolating).
    fn invert(&self, xhat: f64, j: usize) -> (f64, Option<usize>) {
        let c = &self.cols[j];
        let n = self.x.len();
        if xhat <= c.a[0] {
            return (self.x[0] + (xhat - c.a[0]) / c.da_minus[0], None);
        }
        if xhat >= c.a[n - 1] {
            return (self.x[n - 1] + (xhat - c.a[n - 1]) / c.da_plus[n - 1], None);
        }
        let k = (c.a.partition_point(|&v| v <= xhat).max(1) - 1).min(n - 2);
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let (y0, y1) = (c.a[k], c.a[k + 1]);
        if xhat == y0 {
            return (x0, Some(k));
        }
        let (m0, m1) = (c.da_plus[k], c.da_minus[k + 1]);
        let (mut lo, mut hi) = (x0, x1);
        let mut x = x0 + (x1 - x0) * (xhat - y0) / (y1 - y0);
        let tol = 2.0 * f64::EPSILON * x0.abs().max(x1.abs()).max(x1 - x0);
        for _ in 0..60 {
            let (v, d) = hermite(x0, x1, y0, y1, m0, m1, x);
            let f = v - xhat;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let mut next = x - f / d;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step <= tol || hi - lo <= tol {
                break;
            }
        }
        (x, Some(k))
    }
}
