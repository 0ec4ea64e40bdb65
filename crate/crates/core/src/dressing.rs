//! The dressing equation `f^dr = f + T̂ n f^dr` at a fixed occupation `n`.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::Serialize;

use crate::error::{GhdError, Result};
use crate::kernel::{KernelOperator, SignClass};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DressingMethod {
    /// Dense LU of `I − [w_j T_ij n_j]`.
    DirectSolve,
    /// Partial sums of `Σ_k (T̂n)^k f`.
    NeumannSeries { max_terms: usize, tol: f64 },
}

/// Bounds on `1^dr` from the norm `‖T̂n‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DressingBounds {
    pub tn_norm: f64,
    pub r_value: f64,
    pub upper: f64,
}

impl DressingBounds {
    pub fn new(tn_norm: f64, sign: SignClass) -> Result<Self> {
        let r_value = compute_r(tn_norm, sign)?;
        Ok(DressingBounds {
            tn_norm,
            r_value,
            upper: 1.0 / (1.0 - tn_norm),
        })
    }
}

/// `R(z) = 1 − z` for kernels of fixed sign, `(1 − 2z)/(1 − z)` otherwise.
pub fn compute_r(z: f64, sign: SignClass) -> Result<f64> {
    let bound = sign.norm_threshold();
    if !(z >= 0.0 && z < bound) {
        return Err(GhdError::Assumption {
            clause: format!("R(z) requires 0 <= z < {bound} for {sign:?} kernels"),
            value: z,
            bound,
        });
    }
    Ok(match sign {
        SignClass::Mixed => (1.0 - 2.0 * z) / (1.0 - z),
        _ => 1.0 - z,
    })
}

pub struct DressingProblem<'a> {
    op: &'a KernelOperator,
    n: Vec<f64>,
    method: DressingMethod,
    tn_norm: f64,
    lu: Option<LU<f64, Dyn, Dyn>>,
}

impl<'a> DressingProblem<'a> {
    /// Validates `n` and the norm condition, factorizing for `DirectSolve`.
    ///
    /// Constant non-positive kernels (hard rods) skip the norm condition:
    /// the system is then rank-one and solvable for any `n ≥ 0`.
    pub fn new(op: &'a KernelOperator, n: Vec<f64>, method: DressingMethod) -> Result<Self> {
        if n.len() != op.len() {
            return Err(GhdError::config(format!(
                "occupation has {} values for {} nodes",
                n.len(),
                op.len()
            )));
        }
        if let Some((i, &v)) = n.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(GhdError::Assumption {
                clause: format!("occupation must be finite and non-negative (node {i})"),
                value: v,
                bound: 0.0,
            });
        }
        let tn_norm = op.norm_with(&n);
        let sign = op.metadata().sign_class;
        let exempt = matches!(op.constant_value(), Some(c) if c <= 0.0);
        if !exempt && tn_norm >= sign.norm_threshold() {
            return Err(GhdError::Assumption {
                clause: format!("dressing needs ||T n||_op below the {sign:?} threshold"),
                value: tn_norm,
                bound: sign.norm_threshold(),
            });
        }
        let lu = match method {
            DressingMethod::DirectSolve => Some(factorize(op, &n)),
            DressingMethod::NeumannSeries { .. } => None,
        };
        Ok(DressingProblem {
            op,
            n,
            method,
            tn_norm,
            lu,
        })
    }

    pub fn direct(op: &'a KernelOperator, n: Vec<f64>) -> Result<Self> {
        Self::new(op, n, DressingMethod::DirectSolve)
    }

    pub fn operator(&self) -> &KernelOperator {
        self.op
    }

    pub fn occupation(&self) -> &[f64] {
        &self.n
    }

    pub fn method(&self) -> DressingMethod {
        self.method
    }

    /// Discrete `‖T̂n‖_op`.
    pub fn tn_norm(&self) -> f64 {
        self.tn_norm
    }

    pub fn bounds(&self) -> Result<DressingBounds> {
        DressingBounds::new(self.tn_norm, self.op.metadata().sign_class)
    }

    /// Solves `f^dr = f + T̂(n f^dr)`.
    pub fn dress(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.n.len() {
            return Err(GhdError::config("function and occupation lengths differ"));
        }
        match self.method {
            DressingMethod::DirectSolve => self.solve(f.to_vec()),
            DressingMethod::NeumannSeries { max_terms, tol } => self.neumann(f, max_terms, tol),
        }
    }

    /// `(1 − T̂n)⁻¹ T̂(n f)`, i.e. `f^dr − f`.
    pub fn dress_increment(&self, f: &[f64]) -> Result<Vec<f64>> {
        let nf: Vec<f64> = self.n.iter().zip(f).map(|(n, f)| n * f).collect();
        let rhs = self.op.apply(&nf);
        match self.method {
            DressingMethod::DirectSolve => self.solve(rhs),
            DressingMethod::NeumannSeries { max_terms, tol } => self.neumann(&rhs, max_terms, tol),
        }
    }

    /// `1^dr`.
    pub fn one_dr(&self) -> Result<Vec<f64>> {
        self.dress(&vec![1.0; self.n.len()])
    }

    /// `v^dr = v + (1 − T̂n)⁻¹T̂(n v)` for the kernel's bare velocity.
    pub fn v_dr(&self) -> Result<Vec<f64>> {
        let v = self.op.velocity();
        let inc = self.dress_increment(v)?;
        Ok(v.iter().zip(inc).map(|(v, d)| v + d).collect())
    }

    /// `‖f^dr − f − T̂(n f^dr)‖_∞`.
    pub fn residual(&self, f: &[f64], fdr: &[f64]) -> f64 {
        let nf: Vec<f64> = self.n.iter().zip(fdr).map(|(n, g)| n * g).collect();
        let t = self.op.apply(&nf);
        fdr.iter()
            .zip(f)
            .zip(t)
            .map(|((d, f), t)| (d - f - t).abs())
            .fold(0.0, f64::max)
    }

    fn solve(&self, rhs: Vec<f64>) -> Result<Vec<f64>> {
        let lu = match &self.lu {
            Some(lu) => lu,
            None => return Err(GhdError::Numerical("missing factorization".into())),
        };
        let b = DVector::from_vec(rhs);
        lu.solve(&b)
            .map(|x| x.data.into())
            .ok_or_else(|| GhdError::Numerical("singular dressing system".into()))
    }

    fn neumann(&self, f: &[f64], max_terms: usize, tol: f64) -> Result<Vec<f64>> {
        let mut sum = f.to_vec();
        let mut term = f.to_vec();
        let mut buf = vec![0.0; f.len()];
        for _ in 0..max_terms {
            for (t, n) in term.iter_mut().zip(&self.n) {
                *t *= n;
            }
            self.op.apply_into(&term, &mut buf);
            std::mem::swap(&mut term, &mut buf);
            let size = term.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
            if size <= tol {
                return Ok(sum);
            }
        }
        Err(GhdError::Numerical(format!(
            "Neumann series did not reach {tol:e} in {max_terms} terms"
        )))
    }
}

fn factorize(op: &KernelOperator, n: &[f64]) -> LU<f64, Dyn, Dyn> {
    let len = n.len();
    let k = op.weighted_matrix();
    let m = DMatrix::from_fn(len, len, |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        d - k[i * len + j] * n[j]
    });
    m.lu()
}

/// Scratch space for repeated small solves of `1^dr` and `v^dr`.
#[derive(Clone, Debug, Default)]
pub struct DressWorkspace {
    m: Vec<f64>,
    rhs: Vec<f64>,
    nv: Vec<f64>,
}

/// Writes `v^eff = v^dr / 1^dr` into `out` by Gaussian elimination with
/// partial pivoting, reusing `ws`. Returns `‖T̂n‖_op`.
pub fn effective_velocity_into(
    op: &KernelOperator,
    n: &[f64],
    ws: &mut DressWorkspace,
    out: &mut [f64],
) -> Result<f64> {
    let len = op.len();
    let tn_norm = op.norm_with(n);
    let exempt = matches!(op.constant_value(), Some(c) if c <= 0.0);
    let threshold = op.metadata().sign_class.norm_threshold();
    if !exempt && tn_norm >= threshold {
        return Err(GhdError::Assumption {
            clause: "dressing needs ||T n||_op below the threshold".into(),
            value: tn_norm,
            bound: threshold,
        });
    }
    let k = op.weighted_matrix();
    let v = op.velocity();
    ws.m.clear();
    ws.m.extend((0..len * len).map(|idx| {
        let (i, j) = (idx / len, idx % len);
        let d = if i == j { 1.0 } else { 0.0 };
        d - k[idx] * n[j]
    }));
    ws.nv.clear();
    ws.nv.extend(n.iter().zip(v).map(|(n, v)| n * v));
    // columns: 1 and T(n v), interleaved per row
    ws.rhs.clear();
    for i in 0..len {
        ws.rhs.push(1.0);
        ws.rhs.push(op.row(i).iter().zip(&ws.nv).map(|(a, b)| a * b).sum());
    }
    let (m, rhs) = (&mut ws.m, &mut ws.rhs);
    for c in 0..len {
        let piv = (c..len)
            .max_by(|&a, &b| m[a * len + c].abs().total_cmp(&m[b * len + c].abs()))
            .unwrap_or(c);
        if m[piv * len + c] == 0.0 {
            return Err(GhdError::Numerical("singular dressing system".into()));
        }
        if piv != c {
            for j in 0..len {
                m.swap(c * len + j, piv * len + j);
            }
            rhs.swap(2 * c, 2 * piv);
            rhs.swap(2 * c + 1, 2 * piv + 1);
        }
        let d = m[c * len + c];
        for r in c + 1..len {
            let f = m[r * len + c] / d;
            if f != 0.0 {
                for j in c..len {
                    m[r * len + j] -= f * m[c * len + j];
                }
                rhs[2 * r] -= f * rhs[2 * c];
                rhs[2 * r + 1] -= f * rhs[2 * c + 1];
            }
        }
    }
    for c in (0..len).rev() {
        let (mut a, mut b) = (rhs[2 * c], rhs[2 * c + 1]);
        for j in c + 1..len {
            a -= m[c * len + j] * rhs[2 * j];
            b -= m[c * len + j] * rhs[2 * j + 1];
        }
        let d = m[c * len + c];
        rhs[2 * c] = a / d;
        rhs[2 * c + 1] = b / d;
    }
    for (i, o) in out.iter_mut().enumerate().take(len) {
        *o = (v[i] + rhs[2 * i + 1]) / rhs[2 * i];
    }
    Ok(tn_norm)
}

/// Result of checking `R(‖T̂n‖) ≤ 1^dr ≤ 1/(1 − ‖T̂n‖)` node by node.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundsCheck {
    pub bounds: DressingBounds,
    pub one_dr: Vec<f64>,
    /// First offending node and its value, if any.
    pub violation: Option<(usize, f64)>,
}

impl BoundsCheck {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

pub const BOUNDS_EPS: f64 = 1e-9;

pub fn check_1dr_bounds(prob: &DressingProblem) -> Result<BoundsCheck> {
    let bounds = prob.bounds()?;
    let one_dr = prob.one_dr()?;
    let violation = one_dr
        .iter()
        .copied()
        .enumerate()
        .find(|&(_, v)| v < bounds.r_value - BOUNDS_EPS || v > bounds.upper + BOUNDS_EPS);
    Ok(BoundsCheck {
        bounds,
        one_dr,
        violation,
    })
}
