//! Assumption checks before solving; conservation, entropy and weak-form
//! residual checks after.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{GhdError, Result};
use crate::fixed_point::{illinois, Solver, StateSlice, Sweep};
use crate::grid::{composite_simpson_weights, gauss_legendre_on};
use crate::kernel::{eval_kernel, KernelOperator, SignClass, Velocity};
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Clause {
    pub name: &'static str,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub sign_class: SignClass,
    /// `‖T̂ sup_x n₀‖_op`
    pub tn_norm: f64,
    pub threshold_used: f64,
    /// `sup |v(p)| n₀(x,p)` over the samples.
    pub vn_sup: f64,
    pub min_n0: f64,
    /// Largest value of the envelope `sup_x n₀(x,·)` on the grid.
    pub sup_n0: f64,
    pub declared_sup_n: f64,
    /// Largest `∫ |T(p,q)| sup_x n₀(x,q) dq` over momenta outside the grid.
    pub tail: f64,
    pub tail_tol: f64,
    /// Hard rods may violate the norm clause; the solver handles them
    /// through a scalar equation.
    pub norm_exempt: bool,
    pub failures: Vec<Clause>,
    #[serde(skip)]
    pub envelope: Vec<f64>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Whether seed tables may be built: pass, or only the norm clause fails
    /// on an exempt kernel.
    pub fn admits_seed(&self) -> bool {
        self.failures
            .iter()
            .all(|c| self.norm_exempt && c.name == "norm")
    }

    pub fn to_error(&self) -> GhdError {
        match self.failures.iter().find(|c| !(self.norm_exempt && c.name == "norm")) {
            Some(c) => GhdError::Assumption {
                clause: c.name.to_string(),
                value: c.value,
                bound: c.bound,
            },
            None => GhdError::Diagnostic("assumption report has no blocking failure".into()),
        }
    }
}

/// Checks boundedness, sign, the norm condition, finiteness of `v n₀` and
/// the truncated momentum tail, sampling `n₀` at `x_samples`.
pub fn check_assumptions(
    sc: &Scenario,
    op: &KernelOperator,
    x_samples: &[f64],
    tail_tol: f64,
) -> AssumptionReport {
    let nodes = op.grid().nodes();
    let v = op.velocity();
    let mut min_n0 = f64::INFINITY;
    let mut vn_sup = 0.0f64;
    let mut envelope = vec![0.0f64; nodes.len()];
    for &x in x_samples {
        for (j, &p) in nodes.iter().enumerate() {
            let n = sc.n0(x, p);
            min_n0 = min_n0.min(n);
            envelope[j] = envelope[j].max(n);
            vn_sup = vn_sup.max((v[j] * n).abs());
        }
    }
    if x_samples.is_empty() {
        min_n0 = 0.0;
    }
    for (j, &p) in nodes.iter().enumerate() {
        if let Some(e) = sc.exact_envelope(p) {
            envelope[j] = envelope[j].max(e);
        }
    }
    let sup_n0 = envelope.iter().copied().fold(0.0, f64::max);
    let sign_class = op.metadata().sign_class;
    let threshold_used = sign_class.norm_threshold();
    let tn_norm = op.norm_with(&envelope);
    let tail = truncation_tail(sc, op, x_samples);
    let norm_exempt = matches!(op.constant_value(), Some(c) if c <= 0.0);
    let declared = sc.declared_sup_n();

    let mut failures = Vec::new();
    if min_n0 < 0.0 || min_n0.is_nan() {
        failures.push(Clause {
            name: "nonnegative",
            value: min_n0,
            bound: 0.0,
        });
    }
    if sup_n0 > declared * (1.0 + 1e-12) + 1e-15 {
        failures.push(Clause {
            name: "declared_bound",
            value: sup_n0,
            bound: declared,
        });
    }
    if !(tn_norm < threshold_used) {
        failures.push(Clause {
            name: "norm",
            value: tn_norm,
            bound: threshold_used,
        });
    }
    if !vn_sup.is_finite() {
        failures.push(Clause {
            name: "velocity",
            value: vn_sup,
            bound: f64::MAX,
        });
    }
    if !(tail <= tail_tol) {
        failures.push(Clause {
            name: "truncation",
            value: tail,
            bound: tail_tol,
        });
    }
    AssumptionReport {
        sign_class,
        tn_norm,
        threshold_used,
        vn_sup,
        min_n0,
        sup_n0,
        declared_sup_n: declared,
        tail,
        tail_tol,
        norm_exempt,
        failures,
        envelope,
    }
}

/// `max_p ∫_{q ∉ [p_min, p_max]} |T(p,q)| sup_x n₀(x,q) dq`, with each half
/// line mapped onto `[0, 1)` by `q = edge ± u/(1−u)`.
fn truncation_tail(sc: &Scenario, op: &KernelOperator, x_samples: &[f64]) -> f64 {
    let grid = op.grid();
    let panels = 32;
    let mut qs = Vec::new();
    let mut ws = Vec::new();
    for k in 0..panels {
        let (u, w) = gauss_legendre_on(k as f64 / panels as f64, (k + 1) as f64 / panels as f64, 8);
        for (u, w) in u.into_iter().zip(w) {
            let s = u / (1.0 - u);
            let jac = w / ((1.0 - u) * (1.0 - u));
            qs.push(grid.p_max() + s);
            ws.push(jac);
            qs.push(grid.p_min() - s);
            ws.push(jac);
        }
    }
    let env: Vec<f64> = qs
        .iter()
        .map(|&q| {
            sc.exact_envelope(q)
                .unwrap_or_else(|| x_samples.iter().map(|&x| sc.n0(x, q)).fold(0.0, f64::max))
        })
        .collect();
    if env.iter().all(|&e| e == 0.0) {
        return 0.0;
    }
    let k = op.kernel();
    grid.nodes()
        .iter()
        .map(|&p| {
            qs.iter()
                .zip(&ws)
                .zip(&env)
                .map(|((&q, &w), &e)| if e == 0.0 { 0.0 } else { w * eval_kernel(k, p, q).abs() * e })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservationSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub relative_drift: f64,
}

impl ConservationSeries {
    fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        let q0 = values.first().copied().unwrap_or(0.0);
        let dev = values.iter().map(|v| (v - q0).abs()).fold(0.0, f64::max);
        ConservationSeries {
            times,
            values,
            relative_drift: dev / q0.abs().max(1e-12),
        }
    }

    /// `|Q(t_i) − Q(0)| / max(|Q(0)|, 1e-12)` per time.
    pub fn drifts(&self) -> Vec<f64> {
        let q0 = self.values.first().copied().unwrap_or(0.0);
        self.values
            .iter()
            .map(|v| (v - q0).abs() / q0.abs().max(1e-12))
            .collect()
    }
}

/// `ρ_p` summed over momenta at the edges of the window may not exceed this
/// fraction of its peak.
pub const WINDOW_TOL: f64 = 1e-10;

fn spatial_series(sweep: &Sweep, op: &KernelOperator, density: impl Fn(&StateSlice, usize) -> f64) -> Result<ConservationSeries> {
    let nx = sweep.xs.len();
    if nx < 2 {
        return Err(GhdError::config("conservation needs at least 2 x points"));
    }
    let h = sweep.xs[1] - sweep.xs[0];
    let uniform = sweep
        .xs
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1.0));
    if !(h > 0.0) || !uniform {
        return Err(GhdError::config("conservation needs a uniform increasing x grid"));
    }
    let wx = composite_simpson_weights(nx, h);
    let wp = op.grid().weights();
    let mass = |s: &StateSlice| s.rho_p.iter().zip(wp).map(|(r, w)| r * w).sum::<f64>();
    let mut values = Vec::with_capacity(sweep.times.len());
    for (ti, &t) in sweep.times.iter().enumerate() {
        let row = sweep.at_time(ti);
        let peak = row.iter().map(mass).fold(0.0, f64::max);
        let edge = mass(&row[0]).max(mass(&row[nx - 1]));
        if peak > 0.0 && edge > WINDOW_TOL * peak {
            return Err(GhdError::Window(format!(
                "at t = {t} the density at the edge of [{}, {}] is {edge:.3e} (peak {peak:.3e}); widen the window",
                sweep.xs[0],
                sweep.xs[nx - 1]
            )));
        }
        let total: f64 = row
            .iter()
            .zip(&wx)
            .map(|(s, w)| w * (0..wp.len()).map(|j| wp[j] * density(s, j)).sum::<f64>())
            .sum();
        values.push(total);
    }
    Ok(ConservationSeries::new(sweep.times.clone(), values))
}

/// `Q[h](t) = ∫dx dp ρ_p h(p)` at every time of the sweep.
pub fn conserved_charge(sweep: &Sweep, op: &KernelOperator, h: impl Fn(f64) -> f64) -> Result<ConservationSeries> {
    let hv: Vec<f64> = op.grid().nodes().iter().map(|&p| h(p)).collect();
    spatial_series(sweep, op, |s, j| s.rho_p[j] * hv[j])
}

/// `S[g](t) = (1/2π) ∫dx dp g(n,p) 1^dr` at every time of the sweep.
pub fn entropy(sweep: &Sweep, op: &KernelOperator, g: impl Fn(f64, f64) -> f64) -> Result<ConservationSeries> {
    let nodes = op.grid().nodes().to_vec();
    spatial_series(sweep, op, |s, j| g(s.n[j], nodes[j]) * s.one_dr[j] / (2.0 * PI))
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Named momentum weights `h(p)` and entropy densities `g(n, p)`.
#[derive(Clone, Debug)]
pub enum NamedFunction {
    One,
    Momentum,
    /// `E(p) = ∫₀ᵖ v`, the energy whose derivative is the bare velocity.
    Energy(Velocity),
    FermiEntropy,
    ClassicalEntropy,
    BosonEntropy,
}

impl NamedFunction {
    pub const NAMES: [&'static str; 6] = [
        "one",
        "momentum",
        "energy:v",
        "fermi_entropy",
        "classical_entropy",
        "boson_entropy",
    ];

    pub fn parse(name: &str, velocity: &Velocity) -> Result<Self> {
        Ok(match name {
            "one" => NamedFunction::One,
            "momentum" => NamedFunction::Momentum,
            "energy:v" => NamedFunction::Energy(velocity.clone()),
            "fermi_entropy" => NamedFunction::FermiEntropy,
            "classical_entropy" => NamedFunction::ClassicalEntropy,
            "boson_entropy" => NamedFunction::BosonEntropy,
            other => {
                return Err(GhdError::config(format!(
                    "unknown function {other:?}; expected one of {:?}",
                    Self::NAMES
                )))
            }
        })
    }

    pub fn is_entropy(&self) -> bool {
        matches!(
            self,
            NamedFunction::FermiEntropy | NamedFunction::ClassicalEntropy | NamedFunction::BosonEntropy
        )
    }

    /// Momentum weight `h(p)`; entropies return `None`.
    pub fn weight(&self, p: f64) -> Option<f64> {
        match self {
            NamedFunction::One => Some(1.0),
            NamedFunction::Momentum => Some(p),
            NamedFunction::Energy(v) => Some(v.energy(p)),
            _ => None,
        }
    }

    /// `g(n, p)`; charges become `n h(p)`.
    pub fn density(&self, n: f64, p: f64) -> f64 {
        match self {
            NamedFunction::FermiEntropy => -xlogx(n) - xlogx(1.0 - n),
            NamedFunction::ClassicalEntropy => -xlogx(n),
            NamedFunction::BosonEntropy => -xlogx(n) + xlogx(1.0 + n),
            other => n * other.weight(p).unwrap_or(0.0),
        }
    }

    /// The charge or entropy series for this function.
    pub fn series(&self, sweep: &Sweep, op: &KernelOperator) -> Result<ConservationSeries> {
        if self.is_entropy() {
            entropy(sweep, op, |n, p| self.density(n, p))
        } else {
            conserved_charge(sweep, op, |p| self.weight(p).unwrap_or(0.0))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Rectangle {
    pub x1: f64,
    pub x2: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Per-momentum integral-form residuals on one rectangle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakFormResult {
    pub rect: Rectangle,
    /// `(E_top − E_bottom + E_right − E_left) / max |E|` per momentum node.
    pub residuals: Vec<f64>,
    pub top: Vec<f64>,
    pub bottom: Vec<f64>,
    pub right: Vec<f64>,
    pub left: Vec<f64>,
}

impl WeakFormResult {
    pub fn max_abs(&self) -> f64 {
        self.residuals.iter().map(|r| r.abs()).fold(0.0, f64::max)
    }
}

/// Integral-form residual of `∂ₜ(n 1^dr) + ∂ₓ(n v^dr) = 0` on `rect` for
/// every momentum node. Edges are integrated by Gauss–Legendre with `count`
/// nodes, split into panels at the points where the solution jumps.
pub fn weak_form_residuals(solver: &Solver, rect: Rectangle, count: usize) -> Result<WeakFormResult> {
    if rect.x1 == rect.x2 || rect.t1 == rect.t2 || count == 0 {
        return Err(GhdError::config("degenerate rectangle or edge quadrature"));
    }
    let density = |s: &StateSlice| -> Vec<f64> { s.n.iter().zip(&s.one_dr).map(|(n, g)| n * g).collect() };
    let flux = |s: &StateSlice| -> Vec<f64> { s.n.iter().zip(&s.v_dr).map(|(n, g)| n * g).collect() };
    let top = space_edge(solver, rect.t2, rect.x1, rect.x2, count, &density)?;
    let bottom = space_edge(solver, rect.t1, rect.x1, rect.x2, count, &density)?;
    let right = time_edge(solver, rect.x2, rect.t1, rect.t2, count, &flux)?;
    let left = time_edge(solver, rect.x1, rect.t1, rect.t2, count, &flux)?;
    let residuals = (0..top.len())
        .map(|j| {
            let scale = top[j].abs().max(bottom[j].abs()).max(right[j].abs()).max(left[j].abs());
            let sum = top[j] - bottom[j] + right[j] - left[j];
            if scale == 0.0 {
                0.0
            } else {
                sum / scale
            }
        })
        .collect();
    Ok(WeakFormResult {
        rect,
        residuals,
        top,
        bottom,
        right,
        left,
    })
}

/// Residual for the single momentum node `j`.
pub fn weak_form_residual(solver: &Solver, rect: Rectangle, j: usize, count: usize) -> Result<f64> {
    let res = weak_form_residuals(solver, rect, count)?;
    res.residuals
        .get(j)
        .copied()
        .ok_or_else(|| GhdError::config(format!("momentum index {j} out of range")))
}

/// Integrates `f` over panels of `[lo, hi]` split at `breaks`, then orients.
fn integrate_panels(
    a: f64,
    b: f64,
    mut breaks: Vec<f64>,
    count: usize,
    mut slice_at: impl FnMut(f64, Option<&[f64]>) -> Result<StateSlice>,
    f: &dyn Fn(&StateSlice) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let (lo, hi) = (a.min(b), a.max(b));
    let tol = 1e-13 * (1.0 + hi.abs().max(lo.abs()));
    breaks.retain(|&c| c > lo + tol && c < hi - tol);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|x, y| (*x - *y).abs() <= tol);
    let mut edges = vec![lo];
    edges.extend(breaks);
    edges.push(hi);
    let panels = edges.len() - 1;
    let per_panel = if panels == 1 { count } else { count.div_ceil(panels).max(4) };
    let mut total: Option<Vec<f64>> = None;
    let mut warm: Option<Vec<f64>> = None;
    for w in edges.windows(2) {
        let (nodes, weights) = gauss_legendre_on(w[0], w[1], per_panel);
        for (s, wt) in nodes.into_iter().zip(weights) {
            let slice = slice_at(s, warm.as_deref())?;
            let vals = f(&slice);
            let acc = total.get_or_insert_with(|| vec![0.0; vals.len()]);
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += wt * v;
            }
            warm = Some(slice.xhat);
        }
    }
    let sign = if b >= a { 1.0 } else { -1.0 };
    Ok(total.unwrap_or_default().into_iter().map(|v| sign * v).collect())
}

fn space_edge(
    solver: &Solver,
    t: f64,
    xa: f64,
    xb: f64,
    count: usize,
    f: &dyn Fn(&StateSlice) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let jumps = solver.seed().free_jumps();
    let mut breaks = Vec::new();
    if !jumps.is_empty() {
        let (lo, hi) = (xa.min(xb), xa.max(xb));
        let sl = solver.eval_state(t, lo, None)?;
        let sh = solver.eval_state(t, hi, Some(&sl.xhat))?;
        let v = solver.operator().velocity();
        for (j, &vj) in v.iter().enumerate() {
            for &s in jumps {
                let target = s + vj * t;
                // X̂ is increasing in x, so at most one crossing per jump
                if (sl.xhat[j] - target) < 0.0 && (sh.xhat[j] - target) > 0.0 {
                    breaks.push(solver.invert_xhat(t, target, j, Some(0.5 * (lo + hi)))?);
                }
            }
        }
    }
    integrate_panels(xa, xb, breaks, count, |x, w| solver.eval_state(t, x, w), f)
}

/// Samples used to detect jump crossings along a time edge.
const TIME_EDGE_SAMPLES: usize = 24;

fn time_edge(
    solver: &Solver,
    x: f64,
    ta: f64,
    tb: f64,
    count: usize,
    f: &dyn Fn(&StateSlice) -> Vec<f64>,
) -> Result<Vec<f64>> {
    let jumps = solver.seed().free_jumps();
    let mut breaks = Vec::new();
    if !jumps.is_empty() {
        let (lo, hi) = (ta.min(tb), ta.max(tb));
        let v = solver.operator().velocity().to_vec();
        let ts: Vec<f64> = (0..=TIME_EDGE_SAMPLES)
            .map(|k| lo + (hi - lo) * k as f64 / TIME_EDGE_SAMPLES as f64)
            .collect();
        let mut xh = Vec::with_capacity(ts.len());
        let mut warm: Option<Vec<f64>> = None;
        for &t in &ts {
            let sol = solver.solve_xhat(t, x, warm.as_deref())?;
            warm = Some(sol.xhat.clone());
            xh.push(sol.xhat);
        }
        for (j, &vj) in v.iter().enumerate() {
            for &s in jumps {
                let phi = |k: usize| xh[k][j] - vj * ts[k] - s;
                for k in 0..TIME_EDGE_SAMPLES {
                    let (f0, f1) = (phi(k), phi(k + 1));
                    if f0 == 0.0 {
                        breaks.push(ts[k]);
                        continue;
                    }
                    if f0.signum() == f1.signum() || f1 == 0.0 {
                        continue;
                    }
                    let mut err = None;
                    let mut g = |t: f64| match solver.solve_xhat(t, x, Some(&xh[k])) {
                        Ok(sol) => sol.xhat[j] - vj * t - s,
                        Err(e) => {
                            err = Some(e);
                            0.0
                        }
                    };
                    let (a, fa, b, fb) = if f0 < 0.0 {
                        (ts[k], f0, ts[k + 1], f1)
                    } else {
                        (ts[k + 1], f1, ts[k], f0)
                    };
                    let root = illinois(&mut g, a, fa, b, fb, 200);
                    if let Some(e) = err {
                        return Err(e);
                    }
                    breaks.push(root);
                }
            }
        }
    }
    integrate_panels(ta, tb, breaks, count, |t, w| solver.eval_state(t, x, w), f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{MomentumGrid, QuadratureRule};
    use crate::kernel::{KernelModel, ScatteringKernel, TabulatedKernel};
    use crate::scenario::Profile;
    use crate::seed::{build_seed, SeedGridSpec};
    use crate::fixed_point::SolverConfig;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn op(k: ScatteringKernel, a: f64, b: f64, n: usize) -> KernelOperator {
        let g = Arc::new(MomentumGrid::new(a, b, n, QuadratureRule::GaussLegendre).unwrap());
        KernelOperator::new(k, g)
    }

    fn xs(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn lieb_liniger_gaussian_passes() {
        let o = op(ScatteringKernel::lieb_liniger(1.0).unwrap(), -40.0, 40.0, 200);
        let sc = Scenario::gaussian_bump(0.9, 1.0, 1.0).unwrap();
        let rep = check_assumptions(&sc, &o, &xs(-10.0, 10.0, 101), 1e-6);
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.threshold_used, 1.0);
        assert!(rep.tn_norm <= 0.9 * 0.985);
    }

    #[test]
    fn mixed_kernel_uses_half_threshold() {
        // nodes ±1 with unit weights and |T| = 1/2, so ||T n0|| = n0
        let tab = TabulatedKernel::new(vec![-1.0, 1.0], vec![0.5, -0.5, -0.5, 0.5]).unwrap();
        let k = ScatteringKernel::new(KernelModel::Tabulated(tab), Velocity::Identity).unwrap();
        let g = Arc::new(MomentumGrid::new(-1.0, 1.0, 2, QuadratureRule::Trapezoid).unwrap());
        let o = KernelOperator::new(k, g);
        let sc = Scenario::partitioning(Profile::Constant { value: 0.6 }, Profile::Constant { value: 0.6 })
            .unwrap()
            .with_momentum_support(-1.0, 1.0)
            .unwrap();
        let rep = check_assumptions(&sc, &o, &[0.0], 1e-6);
        assert!((rep.tn_norm - 0.6).abs() < 1e-12);
        assert_eq!(rep.threshold_used, 0.5);
        assert!(!rep.passed());
        assert_eq!(rep.failures[0].name, "norm");
        assert!(!rep.admits_seed());
    }

    #[test]
    fn zero_occupation_passes() {
        let o = op(ScatteringKernel::lieb_liniger(1.0).unwrap(), -5.0, 5.0, 20);
        let sc = Scenario::gaussian_bump(0.0, 1.0, 1.0).unwrap();
        let rep = check_assumptions(&sc, &o, &xs(-3.0, 3.0, 11), 1e-6);
        assert!(rep.passed());
        assert_eq!(rep.tn_norm, 0.0);
    }

    #[test]
    fn detects_negative_and_truncated() {
        let o = op(ScatteringKernel::lieb_liniger(1.0).unwrap(), -2.0, 2.0, 20);
        let neg = Scenario::custom(Arc::new(|x: f64, _| -0.1 * (-x * x).exp()), 0.1, (-3.0, 3.0)).unwrap();
        let rep = check_assumptions(&neg, &o, &xs(-3.0, 3.0, 11), 1e-6);
        assert!(rep.failures.iter().any(|c| c.name == "nonnegative"));
        let wide = Scenario::gaussian_bump(0.5, 1.0, 3.0).unwrap();
        let rep = check_assumptions(&wide, &o, &xs(-3.0, 3.0, 11), 1e-6);
        assert!(rep.failures.iter().any(|c| c.name == "truncation"), "{rep:?}");
    }

    #[test]
    fn hard_rods_exempt_from_norm() {
        let o = op(ScatteringKernel::hard_rods(2.0).unwrap(), -1.0, 1.0, 8);
        let sc = Scenario::partitioning(Profile::Constant { value: 0.5 }, Profile::Constant { value: 0.5 })
            .unwrap()
            .with_momentum_support(-1.0, 1.0)
            .unwrap();
        let rep = check_assumptions(&sc, &o, &[0.0], 1e-6);
        assert!(!rep.passed());
        assert!(rep.admits_seed());
    }

    #[test]
    fn entropy_densities() {
        let v = Velocity::Identity;
        let f = NamedFunction::parse("fermi_entropy", &v).unwrap();
        assert!((f.density(0.5, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(f.density(0.0, 1.0), 0.0);
        assert_eq!(f.density(1.0, 1.0), 0.0);
        let b = NamedFunction::parse("boson_entropy", &v).unwrap();
        assert!((b.density(1.0, 0.0) - 2.0 * 2f64.ln()).abs() < 1e-15);
        let e = NamedFunction::parse("energy:v", &v).unwrap();
        assert_eq!(e.weight(2.0), Some(2.0));
        assert!(NamedFunction::parse("nope", &v).is_err());
    }

    fn solver(k: ScatteringKernel, sc: Scenario, np: usize, pmax: f64) -> Solver {
        let g = Arc::new(MomentumGrid::new(-pmax, pmax, np, QuadratureRule::GaussLegendre).unwrap());
        let o = Arc::new(KernelOperator::new(k, g));
        let spec = SeedGridSpec {
            dx: Some(0.02),
            ..SeedGridSpec::default()
        };
        Solver::new(Arc::new(build_seed(&sc, o, &spec).unwrap()), SolverConfig::default()).unwrap()
    }

    #[test]
    fn charge_equals_entropy_with_linear_g() {
        let s = solver(
            ScatteringKernel::lieb_liniger(1.0).unwrap(),
            Scenario::gaussian_bump(0.7, 1.0, 1.0).unwrap(),
            20,
            6.0,
        );
        let sw = s.sweep(&[0.0, 0.5], &xs(-12.0, 12.0, 121)).unwrap();
        let q = conserved_charge(&sw, s.operator(), |p| p * p).unwrap();
        let e = entropy(&sw, s.operator(), |n, p| n * p * p).unwrap();
        for (a, b) in q.values.iter().zip(&e.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(q.relative_drift < 1e-4, "{q:?}");
        let narrow = s.sweep(&[0.0], &xs(-1.0, 1.0, 21)).unwrap();
        assert!(matches!(
            conserved_charge(&narrow, s.operator(), |_| 1.0),
            Err(GhdError::Window(_))
        ));
    }

    #[test]
    fn zero_occupation_charge_and_residual_vanish() {
        let s = solver(
            ScatteringKernel::lieb_liniger(1.0).unwrap(),
            Scenario::gaussian_bump(0.0, 1.0, 1.0).unwrap(),
            12,
            4.0,
        );
        let sw = s.sweep(&[0.0, 1.0], &xs(-3.0, 3.0, 31)).unwrap();
        let q = conserved_charge(&sw, s.operator(), |_| 1.0).unwrap();
        assert!(q.values.iter().all(|&v| v == 0.0));
        let r = weak_form_residuals(
            &s,
            Rectangle {
                x1: -1.0,
                x2: 1.0,
                t1: 0.0,
                t2: 1.0,
            },
            20,
        )
        .unwrap();
        assert!(r.residuals.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn free_gas_residual_is_quadrature_small() {
        let s = solver(ScatteringKernel::zero(), Scenario::gaussian_bump(0.8, 1.0, 1.0).unwrap(), 12, 4.0);
        let rect = Rectangle {
            x1: -0.7,
            x2: 1.1,
            t1: 0.2,
            t2: 1.3,
        };
        let r = weak_form_residuals(&s, rect, 200).unwrap();
        assert!(r.max_abs() < 1e-8, "{:?}", r.residuals);
    }

    #[test]
    fn partitioning_residual_across_the_jump() {
        let s = solver(
            ScatteringKernel::lieb_liniger(1.0).unwrap(),
            Scenario::partitioning(
                Profile::Fermi {
                    mu: 1.0,
                    temperature: 0.5,
                },
                Profile::Gaussian {
                    amplitude: 0.3,
                    center: 0.0,
                    width: 1.0,
                },
            )
            .unwrap(),
            16,
            6.0,
        );
        let rect = Rectangle {
            x1: -0.5,
            x2: 0.8,
            t1: 0.2,
            t2: 1.0,
        };
        let r = weak_form_residuals(&s, rect, 40).unwrap();
        assert!(r.max_abs() < 1e-4, "{:?}", r.residuals);
        let swapped = weak_form_residuals(
            &s,
            Rectangle {
                t1: rect.t2,
                t2: rect.t1,
                ..rect
            },
            40,
        )
        .unwrap();
        for (a, b) in r.residuals.iter().zip(&swapped.residuals) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn verdict_monotone_under_scaling(amp in 0.0f64..1.5, alpha in 0.0f64..1.0) {
            let o = op(ScatteringKernel::lieb_liniger(1.0).unwrap(), -8.0, 8.0, 40);
            let sc = Scenario::gaussian_bump(amp, 1.0, 1.0).unwrap();
            let x = xs(-6.0, 6.0, 25);
            let base = check_assumptions(&sc, &o, &x, 1e-6);
            let scaled = check_assumptions(&sc.scaled(alpha).unwrap(), &o, &x, 1e-6);
            if base.passed() {
                prop_assert!(scaled.passed());
            }
        }
    }
}
