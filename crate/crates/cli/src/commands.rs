use std::sync::Arc;

use clap::ValueEnum;
use ghd_core::{
    build_seed, check_assumptions, convergence_study, weak_form_residuals, Rectangle, Solver, UpwindSolver,
    WeakFormResult,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RandomRectangles, RunConfig};
use crate::error::CliError;
use crate::output::{Cell, OutDir, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Check the assumptions on the initial data.
    Check,
    /// Build and dump the seed tables.
    Seed,
    /// Solve on a (t, x) lattice.
    Solve,
    /// Conserved charges and entropies over time.
    Conserve,
    /// Integral-form residuals on rectangles.
    Weakcheck,
    /// Compare against the upwind reference scheme.
    CompareReference,
    /// Columnar files for gnuplot.
    Plotdata,
}

/// Runs `cmd`, writing artifacts to `out`. Returns a one-line summary.
pub fn run(cmd: Command, cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    match cmd {
        Command::Check => check(cfg, out),
        Command::Seed => seed(cfg, out),
        Command::Solve => solve(cfg, out),
        Command::Conserve => conserve(cfg, out),
        Command::Weakcheck => weakcheck(cfg, out),
        Command::CompareReference => compare_reference(cfg, out),
        Command::Plotdata => plotdata(cfg, out),
    }
}

fn solver(cfg: &RunConfig) -> Result<Solver, CliError> {
    let sc = cfg.scenario()?;
    let seed = build_seed(&sc, cfg.operator()?, &cfg.seed_grid)?;
    Ok(Solver::new(Arc::new(seed), cfg.solver)?)
}

fn check(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct CheckOutput<'a> {
        verdict: &'a str,
        report: &'a ghd_core::AssumptionReport,
    }
    let sc = cfg.scenario()?;
    let op = cfg.operator()?;
    let nodes = cfg.seed_grid.nodes(&sc)?;
    let report = check_assumptions(&sc, &op, &nodes, cfg.seed_grid.tail_tol);
    let verdict = if report.admits_seed() { "pass" } else { "fail" };
    out.json("check.json", &CheckOutput {
        verdict,
        report: &report,
    })?;
    if !report.admits_seed() {
        return Err(report.to_error().into());
    }
    Ok(format!("verdict {verdict}, tn_norm {:.6e}", report.tn_norm))
}

fn seed(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct SeedSummary<'a> {
        x_nodes: usize,
        x_min: f64,
        x_max: f64,
        p_nodes: usize,
        rate: f64,
        max_tn_norm: f64,
        bounds: Option<ghd_core::DressingBounds>,
        free_jumps: &'a [f64],
        report: &'a ghd_core::AssumptionReport,
    }
    let s = solver(cfg)?;
    let seed = s.seed();
    let xs = seed.x_nodes();
    let ps = s.operator().grid().nodes();
    let mut table = Table::new(&["x", "p", "a", "b"]);
    for &x in xs {
        for (j, &p) in ps.iter().enumerate() {
            table.row(&[Cell::F(x), Cell::F(p), Cell::F(seed.a_value(x, j)), Cell::F(seed.b_value(x, j))]);
        }
    }
    out.write("seed_tables.csv", &table.into_string())?;
    out.json("seed_summary.json", &SeedSummary {
        x_nodes: xs.len(),
        x_min: xs[0],
        x_max: xs[xs.len() - 1],
        p_nodes: ps.len(),
        rate: seed.rate(),
        max_tn_norm: seed.max_tn_norm(),
        bounds: seed.bounds(),
        free_jumps: seed.free_jumps(),
        report: seed.report(),
    })?;
    Ok(format!("{} x nodes, {} momenta, rate {:.6e}", xs.len(), ps.len(), seed.rate()))
}

fn solve(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct SolveSummary {
        slices: usize,
        rate: f64,
        max_iters: usize,
        mean_iters: f64,
        max_final_residual: f64,
        max_contraction_ratio: f64,
    }
    let sec = cfg.section(&cfg.solve, "solve")?;
    let s = solver(cfg)?;
    let sweep = s.sweep(&sec.times, &sec.x.points()?)?;
    let ps = s.operator().grid().nodes();
    let mut table = Table::new(&["t", "x", "p", "n", "rho_p", "rho_s", "v_eff", "u"]);
    for sl in &sweep.slices {
        for (j, &p) in ps.iter().enumerate() {
            table.row(&[
                Cell::F(sl.t),
                Cell::F(sl.x),
                Cell::F(p),
                Cell::F(sl.n[j]),
                Cell::F(sl.rho_p[j]),
                Cell::F(sl.rho_s[j]),
                Cell::F(sl.v_eff[j]),
                Cell::F(sl.u[j]),
            ]);
        }
    }
    out.write("solve.csv", &table.into_string())?;
    let count = sweep.slices.len();
    let summary = SolveSummary {
        slices: count,
        rate: s.rate(),
        max_iters: sweep.slices.iter().map(|sl| sl.iters).max().unwrap_or(0),
        mean_iters: sweep.slices.iter().map(|sl| sl.iters as f64).sum::<f64>() / count.max(1) as f64,
        max_final_residual: sweep.slices.iter().map(|sl| sl.final_residual).fold(0.0, f64::max),
        max_contraction_ratio: sweep
            .slices
            .iter()
            .flat_map(|sl| sl.contraction_ratios.iter().copied())
            .fold(0.0, f64::max),
    };
    out.json("solve_summary.json", &summary)?;
    Ok(format!("{count} slices, mean iterations {:.2}", summary.mean_iters))
}

fn conserve(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Series<'a> {
        function: &'a str,
        series: ghd_core::ConservationSeries,
    }
    let sec = cfg.section(&cfg.conserve, "conserve")?;
    let functions = cfg.named_functions(&sec.functions)?;
    let s = solver(cfg)?;
    let sweep = s.sweep(&sec.times, &sec.x.points()?)?;
    let mut table = Table::new(&["function", "t", "value", "drift"]);
    let mut all = Vec::new();
    for (name, f) in sec.functions.iter().zip(&functions) {
        let series = f.series(&sweep, s.operator())?;
        for ((t, v), d) in series.times.iter().zip(&series.values).zip(series.drifts()) {
            table.row(&[Cell::S(name), Cell::F(*t), Cell::F(*v), Cell::F(d)]);
        }
        all.push(Series { function: name, series });
    }
    out.write("conserve.csv", &table.into_string())?;
    out.json("conserve.json", &all)?;
    let worst = all
        .iter()
        .max_by(|a, b| a.series.relative_drift.total_cmp(&b.series.relative_drift));
    match worst {
        Some(w) if w.series.relative_drift > sec.tolerance => Err(CliError::Tolerance(format!(
            "relative drift of {} is {:.3e} > {:.3e}",
            w.function, w.series.relative_drift, sec.tolerance
        ))),
        Some(w) => Ok(format!("largest drift {:.3e} ({})", w.series.relative_drift, w.function)),
        None => Ok("no functions requested".into()),
    }
}

fn random_rectangles(r: &RandomRectangles) -> Result<Vec<Rectangle>, CliError> {
    let (x_lo, x_hi) = r.x_range;
    let (t_lo, t_hi) = r.t_range;
    if !(x_lo < x_hi && t_lo < t_hi) {
        return Err(CliError::invalid("random rectangles need non-empty x_range and t_range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let mut draw = |lo: f64, hi: f64| {
        let a = rng.random_range(lo..hi);
        let b = rng.random_range(lo..hi);
        (a.min(b), a.max(b))
    };
    let mut rects = Vec::with_capacity(r.count);
    while rects.len() < r.count {
        let (x1, x2) = draw(x_lo, x_hi);
        let (t1, t2) = draw(t_lo, t_hi);
        if x2 > x1 && t2 > t1 {
            rects.push(Rectangle { x1, x2, t1, t2 });
        }
    }
    Ok(rects)
}

fn weakcheck(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let sec = cfg.section(&cfg.weakcheck, "weakcheck")?;
    let mut rects = sec.rectangles.clone();
    if let Some(r) = &sec.random {
        rects.extend(random_rectangles(r)?);
    }
    if rects.is_empty() {
        return Err(CliError::invalid("weakcheck needs at least one rectangle"));
    }
    let s = solver(cfg)?;
    let results = rects
        .par_iter()
        .map(|&r| weak_form_residuals(&s, r, sec.edge_nodes))
        .collect::<Result<Vec<WeakFormResult>, _>>()?;
    let ps = s.operator().grid().nodes();
    let mut table = Table::new(&["rect", "x1", "x2", "t1", "t2", "p", "residual"]);
    for (k, res) in results.iter().enumerate() {
        let r = res.rect;
        for (j, &p) in ps.iter().enumerate() {
            table.row(&[
                Cell::I(k),
                Cell::F(r.x1),
                Cell::F(r.x2),
                Cell::F(r.t1),
                Cell::F(r.t2),
                Cell::F(p),
                Cell::F(res.residuals[j]),
            ]);
        }
    }
    out.write("weakcheck.csv", &table.into_string())?;
    let maxima: Vec<f64> = results.iter().map(WeakFormResult::max_abs).collect();
    out.json("weakcheck.json", &serde_json::json!({
        "tolerance": sec.tolerance,
        "rectangles": rects,
        "max_residual": maxima,
    }))?;
    let (k, worst) = maxima
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (k, m)| if m > acc.1 { (k, m) } else { acc });
    if worst > sec.tolerance {
        return Err(CliError::Tolerance(format!(
            "weak-form residual {worst:.3e} on rectangle {k} exceeds {:.3e}",
            sec.tolerance
        )));
    }
    Ok(format!("{} rectangles, max residual {worst:.3e}", rects.len()))
}

fn compare_reference(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let sec = cfg.section(&cfg.reference, "reference")?;
    if sec.dxs.len() < 2 {
        return Err(CliError::invalid("reference.dxs needs at least two resolutions"));
    }
    let s = solver(cfg)?;
    let upwind = UpwindSolver::new(s.operator().clone(), sec.boundary);
    let study = convergence_study(&s, &upwind, sec.window, &sec.dxs, sec.t_end, sec.cfl)?;
    let mut table = Table::new(&["dx", "l1_gap"]);
    for (dx, gap) in study.dxs.iter().zip(&study.gaps) {
        table.row(&[Cell::F(*dx), Cell::F(*gap)]);
    }
    out.write("compare.csv", &table.into_string())?;
    out.json("compare.json", &study)?;
    let worst_gap = study.gaps.iter().copied().fold(0.0, f64::max);
    if let Some(max_gap) = sec.max_gap {
        if worst_gap > max_gap {
            return Err(CliError::Tolerance(format!("L1 gap {worst_gap:.3e} exceeds {max_gap:.3e}")));
        }
    }
    if let Some((lo, hi)) = sec.order_range {
        if !(study.fitted_order >= lo && study.fitted_order <= hi) {
            return Err(CliError::Tolerance(format!(
                "convergence order {:.3} outside [{lo}, {hi}]",
                study.fitted_order
            )));
        }
    }
    Ok(format!("largest L1 gap {worst_gap:.3e}, order {:.3}", study.fitted_order))
}

fn plotdata(cfg: &RunConfig, out: &mut OutDir) -> Result<String, CliError> {
    let sec = cfg.section(&cfg.plotdata, "plotdata")?;
    let s = solver(cfg)?;
    let sweep = s.sweep(&sec.times, &sec.x.points()?)?;
    let ps = s.operator().grid().nodes();
    let w = s.operator().grid().weights();
    let mut profile = String::from("# t x density mean_v_eff\n");
    for (ti, &t) in sweep.times.iter().enumerate() {
        let mut block = format!("# t = {}\n# x p n rho_p v_eff\n", crate::output::float(t));
        for sl in sweep.at_time(ti) {
            for (j, &p) in ps.iter().enumerate() {
                block.push_str(&columns(&[sl.x, p, sl.n[j], sl.rho_p[j], sl.v_eff[j]]));
            }
            block.push('\n');
            let density: f64 = sl.rho_p.iter().zip(w).map(|(r, w)| r * w).sum();
            let current: f64 = sl.rho_p.iter().zip(&sl.v_eff).zip(w).map(|((r, v), w)| r * v * w).sum();
            let mean_v = if density > 0.0 { current / density } else { 0.0 };
            profile.push_str(&columns(&[t, sl.x, density, mean_v]));
        }
        profile.push('\n');
        out.write(&format!("state_t{ti}.dat"), &block)?;
    }
    out.write("profile.dat", &profile)?;
    Ok(format!("{} time blocks", sweep.times.len()))
}

fn columns(values: &[f64]) -> String {
    let mut line = values
        .iter()
        .map(|&v| crate::output::float(v))
        .collect::<Vec<_>>()
        .join(" ");
    line.push('\n');
    line
}
