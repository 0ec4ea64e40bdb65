//! The fixed-point problem `X̂(t,x,p) = x + T̂N̂₀(X̂(t,x,p) − v(p)t, p)` and
//! reconstruction of the full state at a space-time point.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressing::{DressingBounds, DressingProblem};
use crate::error::{GhdError, Result};
use crate::kernel::KernelOperator;
use crate::seed::SeedTables;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    FromX,
    FromNeighbor,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Target for the a-posteriori error bound, sup norm.
    pub fp_tol: f64,
    pub max_iters: usize,
    pub warm_start: WarmStart,
    /// Tolerance on `|X̂(t,x,p) − x̂|` when inverting in `x`.
    pub inv_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            fp_tol: 1e-10,
            max_iters: 500,
            warm_start: WarmStart::FromNeighbor,
            inv_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fp_tol > 0.0) || !(self.inv_tol > 0.0) {
            return Err(GhdError::config("fp_tol and inv_tol must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(GhdError::config("max_iters must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct XhatSolution {
    pub xhat: Vec<f64>,
    pub iters: usize,
    pub final_residual: f64,
    pub contraction_ratios: Vec<f64>,
}

/// The solved state at one `(t, x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateSlice {
    pub t: f64,
    pub x: f64,
    pub xhat: Vec<f64>,
    /// Height field `N(t,x,·)`.
    pub big_n: Vec<f64>,
    pub n: Vec<f64>,
    pub rho_s: Vec<f64>,
    pub rho_p: Vec<f64>,
    pub v_eff: Vec<f64>,
    pub one_dr: Vec<f64>,
    pub v_dr: Vec<f64>,
    /// Characteristic `u(t,x,·)`.
    pub u: Vec<f64>,
    /// `‖T̂n(t,x,·)‖_op`.
    pub tn_norm: f64,
    pub iters: usize,
    pub final_residual: f64,
    pub contraction_ratios: Vec<f64>,
}

impl StateSlice {
    /// `max_p |X̂ − x − T̂N|`.
    pub fn potential_mismatch(&self, op: &KernelOperator) -> f64 {
        let tn = op.apply(&self.big_n);
        self.xhat
            .iter()
            .zip(tn)
            .map(|(xh, t)| (xh - self.x - t).abs())
            .fold(0.0, f64::max)
    }
}

/// Slices on a `times × xs` lattice, stored time-major.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub times: Vec<f64>,
    pub xs: Vec<f64>,
    pub slices: Vec<StateSlice>,
}

impl Sweep {
    pub fn slice(&self, ti: usize, xi: usize) -> &StateSlice {
        &self.slices[ti * self.xs.len() + xi]
    }

    pub fn at_time(&self, ti: usize) -> &[StateSlice] {
        let nx = self.xs.len();
        &self.slices[ti * nx..(ti + 1) * nx]
    }
}

/// Central-difference mismatches of the derivative identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivativeCheck {
    /// `max_p |∂ₓX̂ − 1^dr|`
    pub dx_xhat: f64,
    /// `max_p |∂ₜX̂ + v^dr − v|`
    pub dt_xhat: f64,
    /// `max_p |∂ₓN − n 1^dr|`
    pub dx_n: f64,
    /// `max_p |∂ₜN + n v^dr|`
    pub dt_n: f64,
}

impl DerivativeCheck {
    pub fn max(&self) -> f64 {
        self.dx_xhat.max(self.dt_xhat).max(self.dx_n).max(self.dt_n)
    }
}

#[derive(Clone, Debug)]
pub struct Solver {
    seed: Arc<SeedTables>,
    cfg: SolverConfig,
    rate: f64,
    // Some(d) for hard rods, solved through the scalar equation
    rod_length: Option<f64>,
}

impl Solver {
    pub fn new(seed: Arc<SeedTables>, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let op = seed.operator();
        let rod_length = op.constant_value().filter(|&c| c < 0.0).map(|c| -c);
        let rate = seed.rate();
        let threshold = op.metadata().sign_class.norm_threshold();
        if rod_length.is_none() && rate >= threshold {
            return Err(GhdError::Assumption {
                clause: "contraction rate ||T sup n0||_op".into(),
                value: rate,
                bound: threshold,
            });
        }
        Ok(Solver {
            seed,
            cfg,
            rate,
            rod_length,
        })
    }

    pub fn seed(&self) -> &Arc<SeedTables> {
        &self.seed
    }

    pub fn operator(&self) -> &Arc<KernelOperator> {
        self.seed.operator()
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Contraction rate `r`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    fn heights(&self, t: f64, f: &[f64], out: &mut [f64]) {
        let v = self.operator().velocity();
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.seed.n0hat(f[j] - v[j] * t, j);
        }
    }

    /// One application of `G_{t,x}`.
    pub fn apply_g(&self, t: f64, x: f64, f: &[f64]) -> Vec<f64> {
        let mut nh = vec![0.0; f.len()];
        self.heights(t, f, &mut nh);
        let mut out = self.operator().apply(&nh);
        for o in &mut out {
            *o += x;
        }
        out
    }

    pub fn solve_xhat(&self, t: f64, x: f64, warm: Option<&[f64]>) -> Result<XhatSolution> {
        if let Some(d) = self.rod_length {
            return self.solve_rods(t, x, d);
        }
        let len = self.operator().len();
        let mut f = match warm {
            Some(w) if w.len() == len => w.to_vec(),
            _ => vec![x; len],
        };
        let r = self.rate;
        let factor = r / (1.0 - r);
        let mut ratios = Vec::new();
        let mut prev: Option<f64> = None;
        let mut nh = vec![0.0; len];
        let mut g = vec![0.0; len];
        for it in 1..=self.cfg.max_iters {
            self.heights(t, &f, &mut nh);
            self.operator().apply_into(&nh, &mut g);
            let mut step = 0.0f64;
            for (gi, fi) in g.iter_mut().zip(&f) {
                *gi += x;
                step = step.max((*gi - fi).abs());
            }
            std::mem::swap(&mut f, &mut g);
            if let Some(p) = prev.filter(|&p| p > 0.0) {
                ratios.push(step / p);
            }
            let bound = step * factor;
            if bound <= self.cfg.fp_tol {
                return Ok(XhatSolution {
                    xhat: f,
                    iters: it,
                    final_residual: bound,
                    contraction_ratios: ratios,
                });
            }
            prev = Some(step);
        }
        Err(GhdError::Convergence {
            iters: self.cfg.max_iters,
            last_step: prev.unwrap_or(f64::NAN),
            ratios,
        })
    }

    /// Constant kernel `T = −d`: `X̂` is the root of the increasing scalar
    /// map `h(s) = s − x + d Σ_j w_j N̂₀(s − v_j t, p_j)`, whose slope is at
    /// least one.
    fn solve_rods(&self, t: f64, x: f64, d: f64) -> Result<XhatSolution> {
        let op = self.operator();
        let w = op.grid().weights();
        let v = op.velocity();
        let mut evals = 0usize;
        let mut h = |s: f64| {
            evals += 1;
            let sum: f64 = (0..w.len()).map(|j| w[j] * self.seed.n0hat(s - v[j] * t, j)).sum();
            s - x + d * sum
        };
        let hx = h(x);
        let root = if hx == 0.0 {
            x
        } else {
            let other = x - hx;
            let ho = h(other);
            let (a, fa, b, fb) = if hx > 0.0 { (other, ho, x, hx) } else { (x, hx, other, ho) };
            illinois(&mut h, a, fa, b, fb, 200)
        };
        let residual = h(root).abs();
        let len = w.len();
        Ok(XhatSolution {
            xhat: vec![root; len],
            iters: evals,
            final_residual: residual,
            contraction_ratios: Vec::new(),
        })
    }

    pub fn eval_state(&self, t: f64, x: f64, warm: Option<&[f64]>) -> Result<StateSlice> {
        let sol = self.solve_xhat(t, x, warm)?;
        self.complete(t, x, sol)
    }

    fn complete(&self, t: f64, x: f64, sol: XhatSolution) -> Result<StateSlice> {
        let op = self.operator();
        let sc = self.seed.scenario();
        let v = op.velocity();
        let nodes = op.grid().nodes();
        let len = op.len();
        let mut u = Vec::with_capacity(len);
        let mut big_n = Vec::with_capacity(len);
        let mut n = Vec::with_capacity(len);
        for j in 0..len {
            let (uj, nj) = self.seed.x0_and_n0hat(sol.xhat[j] - v[j] * t, j);
            u.push(uj);
            big_n.push(nj);
            n.push(sc.n0(uj, nodes[j]));
        }
        let prob = DressingProblem::direct(op, n)?;
        let one_dr = prob.one_dr()?;
        let v_dr = prob.v_dr()?;
        let tn_norm = prob.tn_norm();
        let n = prob.occupation().to_vec();
        let rho_s: Vec<f64> = one_dr.iter().map(|g| g / (2.0 * PI)).collect();
        let rho_p = n.iter().zip(&rho_s).map(|(n, r)| n * r).collect();
        let v_eff = v_dr.iter().zip(&one_dr).map(|(a, b)| a / b).collect();
        Ok(StateSlice {
            t,
            x,
            xhat: sol.xhat,
            big_n,
            n,
            rho_s,
            rho_p,
            v_eff,
            one_dr,
            v_dr,
            u,
            tn_norm,
            iters: sol.iters,
            final_residual: sol.final_residual,
            contraction_ratios: sol.contraction_ratios,
        })
    }

    /// `u(t, x, p_j)`, the initial point of the characteristic through `(t, x)`.
    pub fn characteristic_u(&self, t: f64, x: f64, j: usize) -> Result<f64> {
        Ok(self.eval_state(t, x, None)?.u[j])
    }

    /// Solves `X̂(t, x, p_j) = target` for `x`.
    pub fn invert_xhat(&self, t: f64, target: f64, j: usize, hint: Option<f64>) -> Result<f64> {
        Ok(self.invert_xhat_slice(t, target, j, hint)?.x)
    }

    /// As [`Solver::invert_xhat`], returning the slice at the solution.
    pub fn invert_xhat_slice(&self, t: f64, target: f64, j: usize, hint: Option<f64>) -> Result<StateSlice> {
        let tol = self.cfg.inv_tol;
        let x0 = hint.unwrap_or(target);
        let s0 = self.eval_state(t, x0, None)?;
        let g0 = s0.xhat[j] - target;
        if g0.abs() <= tol {
            return Ok(s0);
        }
        let bounds = DressingBounds::new(self.rate, self.operator().metadata().sign_class).ok();
        let eval = |x: f64, warm: &[f64]| -> Result<(f64, StateSlice)> {
            let s = self.eval_state(t, x, Some(warm))?;
            Ok((s.xhat[j] - target, s))
        };

        // bracket [lo, hi] with g(lo) < 0 < g(hi)
        let (mut lo, glo, mut hi, ghi);
        let mut best = s0;
        match bounds {
            Some(b) => {
                let pad = 1e-12 * (1.0 + x0.abs());
                let (a, c) = if g0 > 0.0 {
                    (x0 - g0 / b.r_value - pad, x0 - g0 / b.upper)
                } else {
                    (x0 - g0 / b.upper, x0 - g0 / b.r_value + pad)
                };
                let (ga, sa) = eval(a, &best.xhat)?;
                let (gc, sc) = eval(c, &best.xhat)?;
                if !(ga <= 0.0 && gc >= 0.0) {
                    return Err(GhdError::Range(format!(
                        "slope bounds failed to bracket X̂ = {target} at t = {t}"
                    )));
                }
                (lo, glo, hi, ghi) = (a, ga, c, gc);
                best = if ga.abs() < gc.abs() { sa } else { sc };
            }
            None => {
                let mut step = 2.0 * g0.abs().max(tol);
                let dir = if g0 > 0.0 { -1.0 } else { 1.0 };
                let mut found = None;
                for _ in 0..80 {
                    let x = x0 + dir * step;
                    let (g, s) = eval(x, &best.xhat)?;
                    if g.signum() != g0.signum() {
                        found = Some((x, g, s));
                        break;
                    }
                    step *= 2.0;
                }
                let (x, g, s) = found.ok_or_else(|| {
                    GhdError::Range(format!("no bracket for X̂ = {target} at t = {t}"))
                })?;
                if g0 > 0.0 {
                    (lo, glo, hi, ghi) = (x, g, x0, g0);
                } else {
                    (lo, glo, hi, ghi) = (x0, g0, x, g);
                }
                best = s;
            }
        }
        if glo.abs() <= tol {
            return self.eval_state(t, lo, None);
        }
        if ghi.abs() <= tol {
            return self.eval_state(t, hi, None);
        }

        // safeguarded Newton with slope 1^dr
        let mut x = best.x;
        let mut s = best;
        for _ in 0..200 {
            let g = s.xhat[j] - target;
            if g.abs() <= tol {
                return Ok(s);
            }
            if g < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let mut next = x - g / s.one_dr[j];
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (hi - lo) <= 4.0 * f64::EPSILON * (1.0 + x.abs()) {
                return Ok(s);
            }
            let (_, ns) = eval(next, &s.xhat)?;
            x = next;
            s = ns;
        }
        Err(GhdError::Range(format!(
            "inversion of X̂ = {target} at t = {t} did not converge"
        )))
    }

    /// Solves every `(t, x)` pair; parallel over times, warm-started along `x`.
    pub fn sweep(&self, times: &[f64], xs: &[f64]) -> Result<Sweep> {
        let rows = times
            .par_iter()
            .map(|&t| {
                let mut row: Vec<StateSlice> = Vec::with_capacity(xs.len());
                for &x in xs {
                    let warm = match (self.cfg.warm_start, row.last()) {
                        (WarmStart::FromNeighbor, Some(prev)) => Some(prev.xhat.as_slice()),
                        _ => None,
                    };
                    let s = self.eval_state(t, x, warm)?;
                    row.push(s);
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Sweep {
            times: times.to_vec(),
            xs: xs.to_vec(),
            slices: rows.into_iter().flatten().collect(),
        })
    }

    /// Compares central differences of `X̂` and `N` with step `h` against
    /// `1^dr`, `−(v^dr − v)`, `n 1^dr` and `−n v^dr`.
    pub fn derivative_identities(&self, t: f64, x: f64, h: f64) -> Result<DerivativeCheck> {
        let c = self.eval_state(t, x, None)?;
        let w = Some(c.xhat.as_slice());
        let xp = self.eval_state(t, x + h, w)?;
        let xm = self.eval_state(t, x - h, w)?;
        let tp = self.eval_state(t + h, x, w)?;
        let tm = self.eval_state(t - h, x, w)?;
        let v = self.operator().velocity();
        let mut out = DerivativeCheck {
            dx_xhat: 0.0,
            dt_xhat: 0.0,
            dx_n: 0.0,
            dt_n: 0.0,
        };
        for j in 0..v.len() {
            let dxx = (xp.xhat[j] - xm.xhat[j]) / (2.0 * h);
            let dtx = (tp.xhat[j] - tm.xhat[j]) / (2.0 * h);
            let dxn = (xp.big_n[j] - xm.big_n[j]) / (2.0 * h);
            let dtn = (tp.big_n[j] - tm.big_n[j]) / (2.0 * h);
            out.dx_xhat = out.dx_xhat.max((dxx - c.one_dr[j]).abs());
            out.dt_xhat = out.dt_xhat.max((dtx + c.v_dr[j] - v[j]).abs());
            out.dx_n = out.dx_n.max((dxn - c.n[j] * c.one_dr[j]).abs());
            out.dt_n = out.dt_n.max((dtn + c.n[j] * c.v_dr[j]).abs());
        }
        Ok(out)
    }
}

/// Illinois regula falsi on a bracket with `f(a) ≤ 0 ≤ f(b)`.
pub(crate) fn illinois(
    f: &mut impl FnMut(f64) -> f64,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
    max_iters: usize,
) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    let mut c = 0.5 * (a + b);
    for _ in 0..max_iters {
        c = (a * fb - b * fa) / (fb - fa);
        if !(c > a.min(b) && c < a.max(b)) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if (fc < 0.0) == (fa < 0.0) {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= 2.0 * f64::EPSILON * (1.0 + c.abs()) {
            break;
        }
    }
    c
}
