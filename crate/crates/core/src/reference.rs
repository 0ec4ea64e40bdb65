//! First-order upwind finite volumes for `∂ₜρ_p + ∂ₓ(v^eff ρ_p) = 0`.
//!
//! Independent of the fixed-point code path: it shares only the kernel
//! matrix and the dressing of `v^eff` per cell.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressing::{effective_velocity_into, DressWorkspace, DressingProblem};
use crate::error::{GhdError, Result};
use crate::fixed_point::Solver;
use crate::kernel::KernelOperator;
use crate::scenario::Scenario;

pub const CFL_LIMIT: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    #[default]
    Outflow,
}

/// `ρ_p` on uniform cells, stored cell-major (`cell * n_p + j`).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub x_cells: Vec<f64>,
    pub dx: f64,
    pub rho_p: Vec<f64>,
    pub t: f64,
}

impl FieldState {
    pub fn cells(&self) -> usize {
        self.x_cells.len()
    }

    pub fn cell(&self, i: usize, np: usize) -> &[f64] {
        &self.rho_p[i * np..(i + 1) * np]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub dt: f64,
    pub courant: f64,
    /// Mass that left through the boundaries during the step.
    pub outflow: f64,
}

#[derive(Clone, Debug)]
pub struct UpwindSolver {
    op: Arc<KernelOperator>,
    boundary: Boundary,
}

impl UpwindSolver {
    pub fn new(op: Arc<KernelOperator>, boundary: Boundary) -> Self {
        UpwindSolver { op, boundary }
    }

    pub fn operator(&self) -> &Arc<KernelOperator> {
        &self.op
    }

    /// Cell centres of a uniform partition of `[lo, hi]` with spacing
    /// close to `dx`.
    pub fn cells(lo: f64, hi: f64, dx: f64) -> Result<(Vec<f64>, f64)> {
        if !(lo < hi && dx > 0.0) {
            return Err(GhdError::config(format!("invalid reference window [{lo}, {hi}] / dx {dx}")));
        }
        let n = ((hi - lo) / dx).round().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        Ok(((0..n).map(|i| lo + h * (i as f64 + 0.5)).collect(), h))
    }

    /// `ρ_p = n₀ 1₀^dr / 2π` at each cell centre.
    pub fn initial_state(&self, sc: &Scenario, lo: f64, hi: f64, dx: f64) -> Result<FieldState> {
        let (x_cells, h) = Self::cells(lo, hi, dx)?;
        let nodes = self.op.grid().nodes();
        let rows = x_cells
            .par_iter()
            .map(|&x| {
                let n: Vec<f64> = nodes.iter().map(|&p| sc.n0(x, p)).collect();
                let prob = DressingProblem::direct(&self.op, n)?;
                let g = prob.one_dr()?;
                Ok(prob.occupation().iter().zip(g).map(|(n, g)| n * g / (2.0 * PI)).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FieldState {
            x_cells,
            dx: h,
            rho_p: rows.concat(),
            t: 0.0,
        })
    }

    /// Total `Σ_cells Δx Σ_j w_j ρ_p`.
    pub fn mass(&self, s: &FieldState) -> f64 {
        let w = self.op.grid().weights();
        let np = w.len();
        s.rho_p
            .chunks(np)
            .map(|c| c.iter().zip(w).map(|(r, w)| r * w).sum::<f64>())
            .sum::<f64>()
            * s.dx
    }

    /// `v^eff` per cell from `ρ_s = 1/2π + T̂ρ_p`, `n = ρ_p/ρ_s`.
    pub fn velocities(&self, s: &FieldState) -> Result<Vec<f64>> {
        let np = self.op.len();
        let mut out = vec![0.0; s.rho_p.len()];
        out.par_chunks_mut(np).zip(s.rho_p.par_chunks(np)).try_for_each_init(
            || (DressWorkspace::default(), vec![0.0; np], vec![0.0; np]),
            |(ws, trho, n), (o, rho)| -> Result<()> {
                self.op.apply_into(rho, trho);
                for j in 0..np {
                    n[j] = (rho[j] / (1.0 / (2.0 * PI) + trho[j])).max(0.0);
                }
                effective_velocity_into(&self.op, n, ws, o)?;
                Ok(())
            },
        )?;
        Ok(out)
    }

    /// One upwind step; fails if `dt·max|v^eff|/Δx` exceeds [`CFL_LIMIT`].
    pub fn step(&self, s: &FieldState, dt: f64) -> Result<(FieldState, StepReport)> {
        let v = self.velocities(s)?;
        self.step_with(s, &v, dt)
    }

    fn step_with(&self, s: &FieldState, v: &[f64], dt: f64) -> Result<(FieldState, StepReport)> {
        let np = self.op.len();
        let nc = s.cells();
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let courant = dt * vmax / s.dx;
        if courant > CFL_LIMIT * (1.0 + 1e-12) {
            return Err(GhdError::Cfl {
                courant,
                limit: CFL_LIMIT,
            });
        }
        let rho = &s.rho_p;
        // flux through the interface between cells a and b (a left of b)
        let flux = |a: usize, b: usize, j: usize| {
            v[a * np + j].max(0.0) * rho[a * np + j] + v[b * np + j].min(0.0) * rho[b * np + j]
        };
        let lam = dt / s.dx;
        // interfaces i + 1/2 for i = 0..nc-1, plus the left boundary
        let mut right_face = vec![0.0; nc * np];
        for i in 0..nc {
            for j in 0..np {
                right_face[i * np + j] = if i + 1 < nc {
                    flux(i, i + 1, j)
                } else {
                    match self.boundary {
                        Boundary::Periodic => flux(nc - 1, 0, j),
                        Boundary::Outflow => v[i * np + j] * rho[i * np + j],
                    }
                };
            }
        }
        let left_boundary: Vec<f64> = (0..np)
            .map(|j| match self.boundary {
                Boundary::Periodic => right_face[(nc - 1) * np + j],
                Boundary::Outflow => v[j] * rho[j],
            })
            .collect();
        let mut next = rho.clone();
        for i in 0..nc {
            for j in 0..np {
                let left = if i == 0 { left_boundary[j] } else { right_face[(i - 1) * np + j] };
                next[i * np + j] -= lam * (right_face[i * np + j] - left);
            }
        }
        let w = self.op.grid().weights();
        let outflow = match self.boundary {
            Boundary::Periodic => 0.0,
            Boundary::Outflow => {
                dt * (0..np)
                    .map(|j| w[j] * (right_face[(nc - 1) * np + j] - left_boundary[j]))
                    .sum::<f64>()
            }
        };
        Ok((
            FieldState {
                x_cells: s.x_cells.clone(),
                dx: s.dx,
                rho_p: next,
                t: s.t + dt,
            },
            StepReport { dt, courant, outflow },
        ))
    }

    /// Evolves `s` to `t_end` with time steps at Courant number `cfl`.
    pub fn evolve(&self, mut s: FieldState, t_end: f64, cfl: f64) -> Result<FieldState> {
        if !(cfl > 0.0 && cfl <= CFL_LIMIT) {
            return Err(GhdError::config(format!("cfl must lie in (0, {CFL_LIMIT}], got {cfl}")));
        }
        while s.t < t_end {
            let v = self.velocities(&s)?;
            let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut dt = if vmax > 0.0 { cfl * s.dx / vmax } else { t_end - s.t };
            let last = s.t + dt >= t_end - 1e-14 * t_end.abs().max(1.0);
            if last {
                dt = t_end - s.t;
            }
            s = self.step_with(&s, &v, dt)?.0;
            if last {
                s.t = t_end;
            }
        }
        Ok(s)
    }

    /// Initial data from `sc` evolved to `t_end`.
    pub fn integrate(&self, sc: &Scenario, window: (f64, f64), dx: f64, t_end: f64, cfl: f64) -> Result<FieldState> {
        let s = self.initial_state(sc, window.0, window.1, dx)?;
        self.evolve(s, t_end, cfl)
    }
}

/// `Σ Δx w_j |ρ_ref − ρ_fp| / Σ Δx w_j |ρ_fp|` at the cell centres.
pub fn l1_gap(solver: &Solver, state: &FieldState) -> Result<f64> {
    let op = solver.operator();
    let w = op.grid().weights();
    let np = w.len();
    let sweep = solver.sweep(&[state.t], &state.x_cells)?;
    let (mut diff, mut norm) = (0.0, 0.0);
    for (i, sl) in sweep.slices.iter().enumerate() {
        for j in 0..np {
            let fp = sl.rho_p[j];
            diff += w[j] * (state.rho_p[i * np + j] - fp).abs();
            norm += w[j] * fp.abs();
        }
    }
    if norm == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(diff / norm)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub dxs: Vec<f64>,
    pub gaps: Vec<f64>,
    /// `log2`-type orders between consecutive resolutions.
    pub pairwise_orders: Vec<f64>,
    /// Least-squares slope of `ln gap` against `ln Δx`.
    pub fitted_order: f64,
}

pub fn convergence_study(
    solver: &Solver,
    upwind: &UpwindSolver,
    window: (f64, f64),
    dxs: &[f64],
    t_end: f64,
    cfl: f64,
) -> Result<ConvergenceStudy> {
    let sc = solver.seed().scenario();
    let gaps = dxs
        .iter()
        .map(|&dx| {
            let state = upwind.integrate(sc, window, dx, t_end, cfl)?;
            l1_gap(solver, &state)
        })
        .collect::<Result<Vec<_>>>()?;
    let pairwise_orders = dxs
        .windows(2)
        .zip(gaps.windows(2))
        .map(|(d, g)| (g[0] / g[1]).ln() / (d[0] / d[1]).ln())
        .collect();
    let lx: Vec<f64> = dxs.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = gaps.iter().map(|g| g.ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let fitted_order = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    Ok(ConvergenceStudy {
        dxs: dxs.to_vec(),
        gaps,
        pairwise_orders,
        fitted_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{MomentumGrid, QuadratureRule};
    use crate::kernel::ScatteringKernel;

    fn op(k: ScatteringKernel, n: usize, pmax: f64) -> Arc<KernelOperator> {
        let g = Arc::new(MomentumGrid::new(-pmax, pmax, n, QuadratureRule::GaussLegendre).unwrap());
        Arc::new(KernelOperator::new(k, g))
    }

    #[test]
    fn empty_state_is_stationary() {
        let up = UpwindSolver::new(op(ScatteringKernel::lieb_liniger(1.0).unwrap(), 8, 2.0), Boundary::Outflow);
        let sc = Scenario::gaussian_bump(0.0, 1.0, 1.0).unwrap();
        let s = up.initial_state(&sc, -2.0, 2.0, 0.1).unwrap();
        let (next, rep) = up.step(&s, 0.01).unwrap();
        assert_eq!(next.rho_p, s.rho_p);
        assert_eq!(rep.outflow, 0.0);
        let same = up.integrate(&sc, (-2.0, 2.0), 0.1, 0.0, 0.9).unwrap();
        assert_eq!(same.rho_p, s.rho_p);
    }

    #[test]
    fn one_step_conserves_mass() {
        for boundary in [Boundary::Periodic, Boundary::Outflow] {
            let up = UpwindSolver::new(op(ScatteringKernel::lieb_liniger(1.0).unwrap(), 10, 2.0), boundary);
            let sc = Scenario::gaussian_bump(0.8, 0.5, 0.5).unwrap();
            let s = up.initial_state(&sc, -1.0, 1.0, 0.02).unwrap();
            let m0 = up.mass(&s);
            let (next, rep) = up.step(&s, 0.005).unwrap();
            let m1 = up.mass(&next);
            assert!(((m1 + rep.outflow) - m0).abs() <= 1e-12 * m0, "{boundary:?}");
            assert!(next.rho_p.iter().all(|&r| r >= -1e-12));
        }
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let up = UpwindSolver::new(op(ScatteringKernel::zero(), 6, 2.0), Boundary::Outflow);
        let sc = Scenario::gaussian_bump(0.5, 0.5, 0.5).unwrap();
        let s = up.initial_state(&sc, -2.0, 2.0, 0.1).unwrap();
        assert!(matches!(up.step(&s, 0.1), Err(GhdError::Cfl { .. })));
    }

    #[test]
    fn free_advection_error_is_first_order() {
        let up = UpwindSolver::new(op(ScatteringKernel::zero(), 6, 1.0), Boundary::Outflow);
        let sc = Scenario::gaussian_bump(0.5, 0.5, 1.0).unwrap();
        let nodes = up.operator().grid().nodes().to_vec();
        let w = up.operator().grid().weights().to_vec();
        let err = |dx: f64| {
            let s = up.integrate(&sc, (-4.0, 4.0), dx, 1.0, 0.9).unwrap();
            let mut e = 0.0;
            for (i, &x) in s.x_cells.iter().enumerate() {
                for j in 0..6 {
                    let exact = sc.n0(x - nodes[j], nodes[j]) / (2.0 * PI);
                    e += s.dx * w[j] * (s.rho_p[i * 6 + j] - exact).abs();
                }
            }
            e
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!(e1 < 0.05 && (0.7..=1.3).contains(&order), "{e1} {e2} {order}");
    }
}
