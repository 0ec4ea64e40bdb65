//! Scattering kernels `T(p,q)` and bare velocities `v(p)`.
//!
//! [`ScatteringKernel`] is the continuous model. [`KernelOperator`] is its
//! discretization on a [`MomentumGrid`]: the dense matrix `w_j T(p_i, p_j)`
//! is built once and shared by every dressing solve and fixed-point sweep.

use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{GhdError, Result};
use crate::grid::{gauss_legendre_on, GridFunction, MomentumGrid};

/// Entries with magnitude below this count as zero when classifying signs.
pub const SIGN_ZERO_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub enum KernelModel {
    /// Repulsive Lieb–Liniger gas, `T = (1/2π)·2c/(c² + (p−q)²)`.
    LiebLiniger { c: f64 },
    /// Sinh-Gordon in rapidity variables, `T = (1/2π)·2/cosh(p−q)`.
    SinhGordon,
    /// Hard rods of length `d`, `T = −d`.
    HardRods { d: f64 },
    Tabulated(TabulatedKernel),
    Zero,
}

/// Kernel values on a square table of nodes, bilinearly interpolated.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedKernel {
    nodes: Vec<f64>,
    // row-major, rows indexed by p
    values: Vec<f64>,
}

impl TabulatedKernel {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Err(GhdError::config("tabulated kernel needs at least 2 nodes"));
        }
        if values.len() != n * n {
            return Err(GhdError::config(format!(
                "tabulated kernel has {} entries, expected {}x{}",
                values.len(),
                n,
                n
            )));
        }
        if !nodes.windows(2).all(|w| w[0] < w[1]) {
            return Err(GhdError::config("tabulated kernel nodes must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GhdError::config("tabulated kernel contains non-finite entries"));
        }
        Ok(TabulatedKernel { nodes, values })
    }

    /// Reads a CSV table: a header row of q nodes, then one row of values
    /// per p node (same node set).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| GhdError::config(format!("bad kernel CSV entry {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let Some((header, body)) = rows.split_first() else {
            return Err(GhdError::config("empty kernel CSV"));
        };
        if body.len() != header.len() || body.iter().any(|r| r.len() != header.len()) {
            return Err(GhdError::config(format!(
                "kernel CSV must be square: header has {} nodes, body {} rows",
                header.len(),
                body.len()
            )));
        }
        TabulatedKernel::new(header.clone(), body.concat())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn eval(&self, p: f64, q: f64) -> f64 {
        let n = self.nodes.len();
        let (i, s) = locate(&self.nodes, p);
        let (j, u) = locate(&self.nodes, q);
        let at = |a: usize, b: usize| self.values[a * n + b];
        (1.0 - s) * ((1.0 - u) * at(i, j) + u * at(i, j + 1))
            + s * ((1.0 - u) * at(i + 1, j) + u * at(i + 1, j + 1))
    }
}

/// Cell index and fractional position of `x` in `nodes`, clamped to the ends.
fn locate(nodes: &[f64], x: f64) -> (usize, f64) {
    let n = nodes.len();
    if x <= nodes[0] {
        return (0, 0.0);
    }
    if x >= nodes[n - 1] {
        return (n - 2, 1.0);
    }
    let i = nodes.partition_point(|&v| v <= x) - 1;
    let i = i.min(n - 2);
    (i, (x - nodes[i]) / (nodes[i + 1] - nodes[i]))
}

#[derive(Clone)]
pub struct VelocityFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for VelocityFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("VelocityFn(..)")
    }
}

#[derive(Clone, Debug)]
pub enum Velocity {
    /// `v(p) = p`
    Identity,
    /// `v(p) = p / sqrt(p² + m²)`
    Relativistic { m: f64 },
    /// Piecewise-linear through `(nodes, values)`, constant beyond the ends.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
    Custom(VelocityFn),
}

impl Velocity {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Velocity::Identity => p,
            Velocity::Relativistic { m } => p / (p * p + m * m).sqrt(),
            Velocity::Tabulated { nodes, values } => {
                let (i, s) = locate(nodes, p);
                (1.0 - s) * values[i] + s * values[i + 1]
            }
            Velocity::Custom(f) => (f.0)(p),
        }
    }

    /// Energy `E(p) = ∫₀ᵖ v(q) dq`, whose derivative is the velocity.
    pub fn energy(&self, p: f64) -> f64 {
        match self {
            Velocity::Identity => 0.5 * p * p,
            Velocity::Relativistic { m } => (p * p + m * m).sqrt() - m,
            _ => {
                if p == 0.0 {
                    return 0.0;
                }
                // piecewise smooth integrand; panels keep this accurate for tables
                let panels = 64;
                let h = p / panels as f64;
                (0..panels)
                    .map(|k| {
                        let a = h * k as f64;
                        let (x, w) = gauss_legendre_on(a, a + h, 8);
                        x.iter().zip(&w).map(|(&q, &wq)| wq * self.eval(q)).sum::<f64>()
                    })
                    .sum()
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScatteringKernel {
    model: KernelModel,
    velocity: Velocity,
}

impl ScatteringKernel {
    pub fn new(model: KernelModel, velocity: Velocity) -> Result<Self> {
        match &model {
            KernelModel::LiebLiniger { c } if !(*c > 0.0 && c.is_finite()) => {
                return Err(GhdError::config(format!("Lieb-Liniger coupling must be > 0, got {c}")))
            }
            KernelModel::HardRods { d } if !(*d > 0.0 && d.is_finite()) => {
                return Err(GhdError::config(format!("hard-rod length must be > 0, got {d}")))
            }
            _ => {}
        }
        match &velocity {
            Velocity::Relativistic { m } if !(*m > 0.0 && m.is_finite()) => {
                return Err(GhdError::config(format!("relativistic mass must be > 0, got {m}")))
            }
            Velocity::Tabulated { nodes, values } => {
                if nodes.len() < 2 || nodes.len() != values.len() {
                    return Err(GhdError::config(
                        "tabulated velocity needs matching node/value lists of length >= 2",
                    ));
                }
                if !nodes.windows(2).all(|w| w[0] < w[1]) {
                    return Err(GhdError::config("tabulated velocity nodes must increase"));
                }
            }
            _ => {}
        }
        Ok(ScatteringKernel { model, velocity })
    }

    pub fn lieb_liniger(c: f64) -> Result<Self> {
        Self::new(KernelModel::LiebLiniger { c }, Velocity::Identity)
    }

    pub fn hard_rods(d: f64) -> Result<Self> {
        Self::new(KernelModel::HardRods { d }, Velocity::Identity)
    }

    pub fn zero() -> Self {
        ScatteringKernel {
            model: KernelModel::Zero,
            velocity: Velocity::Identity,
        }
    }

    pub fn model(&self) -> &KernelModel {
        &self.model
    }

    pub fn velocity(&self) -> &Velocity {
        &self.velocity
    }

    pub fn eval(&self, p: f64, q: f64) -> f64 {
        eval_kernel(self, p, q)
    }

    pub fn eval_velocity(&self, p: f64) -> f64 {
        self.velocity.eval(p)
    }

    /// `Some(τ)` when `T(p,q) ≡ τ` for all momenta.
    pub fn constant_value(&self) -> Option<f64> {
        match self.model {
            KernelModel::HardRods { d } => Some(-d),
            KernelModel::Zero => Some(0.0),
            _ => None,
        }
    }
}

pub fn eval_kernel(k: &ScatteringKernel, p: f64, q: f64) -> f64 {
    match &k.model {
        KernelModel::LiebLiniger { c } => {
            let d = p - q;
            c / (PI * (c * c + d * d))
        }
        KernelModel::SinhGordon => 1.0 / (PI * (p - q).cosh()),
        KernelModel::HardRods { d } => -d,
        KernelModel::Tabulated(t) => t.eval(p, q),
        KernelModel::Zero => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignClass {
    NonNegative,
    NonPositive,
    Mixed,
}

impl SignClass {
    /// Fixed-sign kernels allow `‖T̂n‖ < 1`; mixed ones need `< 1/2`.
    pub fn norm_threshold(self) -> f64 {
        match self {
            SignClass::Mixed => 0.5,
            _ => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelMetadata {
    pub op_norm: f64,
    pub sign_class: SignClass,
}

/// `max_p Σ_q w_q |T(p,q)| envelope(q)`; the envelope defaults to 1.
pub fn operator_norm(k: &ScatteringKernel, g: &MomentumGrid, envelope: Option<&GridFunction>) -> f64 {
    let nodes = g.nodes();
    let w = g.weights();
    nodes
        .iter()
        .map(|&p| {
            nodes
                .iter()
                .enumerate()
                .map(|(j, &q)| {
                    let e = envelope.map_or(1.0, |e| e.values()[j].abs());
                    w[j] * eval_kernel(k, p, q).abs() * e
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

pub fn sign_class(k: &ScatteringKernel, g: &MomentumGrid) -> SignClass {
    let nodes = g.nodes();
    let mut pos = false;
    let mut neg = false;
    for &p in nodes {
        for &q in nodes {
            let t = eval_kernel(k, p, q);
            if t > SIGN_ZERO_TOL {
                pos = true;
            } else if t < -SIGN_ZERO_TOL {
                neg = true;
            }
        }
    }
    match (pos, neg) {
        (true, true) => SignClass::Mixed,
        (false, true) => SignClass::NonPositive,
        _ => SignClass::NonNegative,
    }
}

/// A scattering kernel discretized on a momentum grid.
#[derive(Clone, Debug)]
pub struct KernelOperator {
    kernel: ScatteringKernel,
    grid: Arc<MomentumGrid>,
    // row-major w_j T(p_i, p_j)
    weighted: Vec<f64>,
    velocity: Vec<f64>,
    metadata: KernelMetadata,
}

impl KernelOperator {
    pub fn new(kernel: ScatteringKernel, grid: Arc<MomentumGrid>) -> Self {
        let nodes = grid.nodes();
        let w = grid.weights();
        let n = nodes.len();
        let mut weighted = Vec::with_capacity(n * n);
        for &p in nodes {
            for (j, &q) in nodes.iter().enumerate() {
                weighted.push(w[j] * eval_kernel(&kernel, p, q));
            }
        }
        let velocity = nodes.iter().map(|&p| kernel.eval_velocity(p)).collect();
        let metadata = KernelMetadata {
            op_norm: operator_norm(&kernel, &grid, None),
            sign_class: sign_class(&kernel, &grid),
        };
        KernelOperator {
            kernel,
            grid,
            weighted,
            velocity,
            metadata,
        }
    }

    pub fn kernel(&self) -> &ScatteringKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Arc<MomentumGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn metadata(&self) -> KernelMetadata {
        self.metadata
    }

    /// Bare velocity at the grid nodes.
    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    /// Row `i` of the weighted matrix `w_j T(p_i, p_j)`.
    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.weighted[i * n..(i + 1) * n]
    }

    pub fn weighted_matrix(&self) -> &[f64] {
        &self.weighted
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.kernel.constant_value()
    }

    /// `‖T̂ m‖_op = max_i Σ_j |w_j T_ij| |m_j|` for a diagonal multiplier `m`.
    pub fn norm_with(&self, multiplier: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(multiplier)
                    .map(|(k, m)| (k * m).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// `(T̂f)(p_i) = Σ_j w_j T(p_i,p_j) f_j`, written into `out`.
    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(f).map(|(k, v)| k * v).sum();
        }
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.apply_into(f, &mut out);
        out
    }

    pub fn apply_t(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.grid().as_ref() != self.grid.as_ref() {
            return Err(GhdError::config("grid function lives on a different grid"));
        }
        GridFunction::new(Arc::clone(&self.grid), self.apply(f.values()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::QuadratureRule;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gl(a: f64, b: f64, n: usize) -> Arc<MomentumGrid> {
        Arc::new(MomentumGrid::new(a, b, n, QuadratureRule::GaussLegendre).unwrap())
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn lieb_liniger_on_diagonal() {
        let k = ScatteringKernel::lieb_liniger(1.0).unwrap();
        assert!((k.eval(0.7, 0.7) - 1.0 / PI).abs() < 1e-15);
        assert!((k.eval(0.7, 0.7) - 0.3183099).abs() < 1e-7);
    }

    #[test]
    fn hard_rods_and_zero_are_constant() {
        let k = ScatteringKernel::hard_rods(0.3).unwrap();
        assert_eq!(k.eval(-4.0, 2.5), -0.3);
        assert_eq!(ScatteringKernel::zero().eval(1.0, 2.0), 0.0);
    }

    #[test]
    fn sinh_gordon_formula() {
        let k = ScatteringKernel::new(KernelModel::SinhGordon, Velocity::Identity).unwrap();
        assert!((k.eval(1.0, 0.0) - 1.0 / (PI * 1f64.cosh())).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ScatteringKernel::lieb_liniger(0.0).is_err());
        assert!(ScatteringKernel::hard_rods(-1.0).is_err());
        assert!(ScatteringKernel::new(KernelModel::Zero, Velocity::Relativistic { m: 0.0 }).is_err());
    }

    #[test]
    fn operator_norms() {
        let g = gl(-1.0, 1.0, 16);
        assert_eq!(operator_norm(&ScatteringKernel::zero(), &g, None), 0.0);
        let hr = operator_norm(&ScatteringKernel::hard_rods(0.3).unwrap(), &g, None);
        assert!((hr - 0.6).abs() < 1e-14);

        let g = gl(-40.0, 40.0, 401);
        let ll = operator_norm(&ScatteringKernel::lieb_liniger(1.0).unwrap(), &g, None);
        let exact = 2.0 / PI * 40f64.atan();
        assert!((ll - exact).abs() < 1e-6, "{ll} vs {exact}");
        assert!((exact - 0.98409).abs() < 1e-5);
        let wider = gl(-200.0, 200.0, 1601);
        let ll_wide = operator_norm(&ScatteringKernel::lieb_liniger(1.0).unwrap(), &wider, None);
        assert!(ll_wide > ll && ll_wide < 1.0);
    }

    #[test]
    fn envelope_scales_norm() {
        let g = gl(-1.0, 1.0, 8);
        let env = g.sample(|_| 0.5);
        let k = ScatteringKernel::hard_rods(0.3).unwrap();
        assert!((operator_norm(&k, &g, Some(&env)) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn sign_classes() {
        let g = gl(-3.0, 3.0, 10);
        assert_eq!(sign_class(&ScatteringKernel::lieb_liniger(2.0).unwrap(), &g), SignClass::NonNegative);
        assert_eq!(sign_class(&ScatteringKernel::hard_rods(0.1).unwrap(), &g), SignClass::NonPositive);
        let tab = TabulatedKernel::new(vec![-3.0, 3.0], vec![-1.0, 1.0, 1.0, -1.0]).unwrap();
        let k = ScatteringKernel::new(KernelModel::Tabulated(tab), Velocity::Identity).unwrap();
        assert_eq!(sign_class(&k, &g), SignClass::Mixed);
    }

    #[test]
    fn apply_t_examples() {
        let g = gl(-1.0, 1.0, 12);
        let op = KernelOperator::new(ScatteringKernel::hard_rods(0.3).unwrap(), Arc::clone(&g));
        assert!(op.apply(&[0.0; 12]).iter().all(|&v| v == 0.0));
        for v in op.apply(&[1.0; 12]) {
            assert!((v + 0.6).abs() < 1e-14);
        }

        let g = gl(-6.0, 6.0, 40);
        let op = KernelOperator::new(ScatteringKernel::lieb_liniger(1.0).unwrap(), Arc::clone(&g));
        let f = g.sample(|p| (-p * p).exp() + 0.3 * p.cos());
        let out = op.apply_t(&f).unwrap();
        let v = out.values();
        for i in 0..v.len() {
            assert!((v[i] - v[v.len() - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_kernel_csv_and_interpolation() {
        let csv = "0.0, 1.0\n1.0, 2.0\n3.0, 4.0\n";
        let t = TabulatedKernel::from_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.eval(0.0, 0.0), 1.0);
        assert_eq!(t.eval(1.0, 1.0), 4.0);
        assert!((t.eval(0.5, 0.5) - 2.5).abs() < 1e-15);
        // clamped outside the table
        assert_eq!(t.eval(-3.0, 9.0), 2.0);
        assert!(TabulatedKernel::from_csv("0,1\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn energy_matches_velocity_integral() {
        let tab = Velocity::Tabulated {
            nodes: vec![-5.0, 5.0],
            values: vec![-5.0, 5.0],
        };
        assert!((tab.energy(2.0) - 2.0).abs() < 1e-12);
        let rel = Velocity::Relativistic { m: 1.5 };
        let custom = Velocity::Custom(VelocityFn(Arc::new(|p: f64| p / (p * p + 2.25).sqrt())));
        assert!((rel.energy(3.0) - custom.energy(3.0)).abs() < 1e-12);
    }

    #[test]
    fn bounded_by_operator_norm_on_random_inputs() {
        let g = gl(-5.0, 5.0, 30);
        let op = KernelOperator::new(ScatteringKernel::lieb_liniger(0.7).unwrap(), Arc::clone(&g));
        let norm = op.metadata().op_norm;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let f: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
            let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let out = op.apply(&f);
            let out_sup = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(out_sup <= norm * sup + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn builtin_kernels_are_symmetric(p in -50.0f64..50.0, q in -50.0f64..50.0, c in 0.01f64..10.0) {
            let ll = ScatteringKernel::lieb_liniger(c).unwrap();
            prop_assert_eq!(ll.eval(p, q), ll.eval(q, p));
            let sg = ScatteringKernel::new(KernelModel::SinhGordon, Velocity::Identity).unwrap();
            prop_assert_eq!(sg.eval(p, q), sg.eval(q, p));
        }

        #[test]
        fn apply_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let g = gl(-4.0, 4.0, 20);
            let op = KernelOperator::new(ScatteringKernel::lieb_liniger(1.0).unwrap(), Arc::clone(&g));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mix: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
            let lhs = op.apply(&mix);
            let (tf, th) = (op.apply(&f), op.apply(&h));
            for i in 0..20 {
                prop_assert!((lhs[i] - (a * tf[i] + b * th[i])).abs() < 1e-12);
            }
        }
    }
}
