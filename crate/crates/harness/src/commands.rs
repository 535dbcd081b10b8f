//! The three subcommands. Each returns its exit code and the report it wrote.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use nonlocal_tv::geometry::el_residual;
use nonlocal_tv::{
    holder_seminorm, perimeter, save_csv, total_energy, DualField64, LevelSet, LogRecord, PairWeights64, SynthKind,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{DatumSpec, RunConfig, Setup};
use crate::reference;
use crate::report::{Check, GridSummary, Relation, Report, SolveSummary, SuiteResult};
use crate::suites::{levels_for, Context, Suite, HOLDER_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    SuiteFailure = 1,
    Usage = 2,
    NotConverged = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Outcome of a command: the exit code and, unless the config was rejected,
/// the report.
pub struct Outcome {
    pub exit: Exit,
    pub report: Option<Report>,
    pub message: Option<String>,
}

impl Outcome {
    fn usage(msg: impl Into<String>) -> Self {
        Self { exit: Exit::Usage, report: None, message: Some(msg.into()) }
    }
}

fn grid_summary(w: &PairWeights64) -> GridSummary {
    let g = w.grid();
    GridSummary {
        dim: g.dim(),
        shape: g.shape(),
        h: g.spacing(),
        origin: g.origin(),
        pairs: w.len(),
        exterior_couplings: w.exterior().len(),
    }
}

fn prepare(cfg: &RunConfig) -> Result<Setup, Outcome> {
    let setup = Setup::build(cfg).map_err(Outcome::usage)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Outcome::usage(format!("{}: {e}", cfg.out_dir.display())))?;
    Ok(setup)
}

fn io_failure(report: Report, e: std::io::Error) -> Outcome {
    Outcome { exit: Exit::Usage, report: Some(report), message: Some(format!("writing outputs: {e}")) }
}

/// Counts of saturated and interior dual values, pairs and exterior
/// couplings separately.
#[derive(Debug, Clone, Serialize)]
pub struct DualSummary {
    pub pairs: PatternCounts,
    pub exterior: PatternCounts,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PatternCounts {
    pub plus_one: usize,
    pub minus_one: usize,
    pub interior: usize,
}

impl PatternCounts {
    fn add(&mut self, z: f64) {
        const SAT: f64 = 1.0 - 1e-9;
        if z >= SAT {
            self.plus_one += 1;
        } else if z <= -SAT {
            self.minus_one += 1;
        } else {
            self.interior += 1;
        }
    }
}

pub fn dual_summary(z: &DualField64, w: &PairWeights64) -> DualSummary {
    let mut pairs = PatternCounts::default();
    let mut exterior = PatternCounts::default();
    for (k, &v) in z.values().iter().enumerate() {
        if k < w.len() {
            pairs.add(v);
        } else {
            exterior.add(v);
        }
    }
    let max_abs = z.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    DualSummary { pairs, exterior, max_abs }
}

fn write_log(path: &Path, log: &[LogRecord]) -> std::io::Result<()> {
    let mut out = fs::File::create(path)?;
    for rec in log {
        writeln!(out, "{}", serde_json::to_string(rec).expect("log record serializes"))?;
    }
    Ok(())
}

/// Solves the configured problem and writes `u.csv`, `z_summary.json`,
/// `solver_log.jsonl` and `report.json`.
pub fn denoise(cfg: &RunConfig) -> Outcome {
    let setup = match prepare(cfg) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let mut report = Report::new("denoise", cfg);
    report.grid = Some(grid_summary(&setup.weights));
    let mut ctx = Context::new(cfg, setup);
    let clock = Instant::now();
    if let Err(e) = ctx.solution() {
        return Outcome::usage(format!("solve: {e}"));
    }
    report.timings.insert("solve".into(), clock.elapsed().as_secs_f64());
    report.push(ctx.certificate());
    if cfg.oracle {
        report.push(ctx.oracle());
    }
    let sol = ctx.solved().expect("solved above").clone();
    let w = &ctx.setup.weights;
    report.solve = Some(solve_summary(&sol, &ctx.setup));
    let dir = &cfg.out_dir;
    let written = (|| {
        save_csv(&sol.u, dir.join("u.csv")).map_err(std::io::Error::other)?;
        report.artifacts.push("u.csv".into());
        let z = serde_json::to_string_pretty(&dual_summary(&sol.z, w)).expect("summary serializes");
        fs::write(dir.join("z_summary.json"), z + "\n")?;
        report.artifacts.push("z_summary.json".into());
        write_log(&dir.join("solver_log.jsonl"), &ctx.log)?;
        report.artifacts.push("solver_log.jsonl".into());
        report.write(dir, "report.json")
    })();
    if let Err(e) = written {
        return io_failure(report, e);
    }
    let exit = if !sol.converged {
        Exit::NotConverged
    } else if report.passed {
        Exit::Pass
    } else {
        Exit::SuiteFailure
    };
    Outcome { exit, report: Some(report), message: None }
}

fn solve_summary(sol: &nonlocal_tv::SolveResult64, setup: &Setup) -> SolveSummary {
    let e = total_energy(&sol.u, &setup.datum, &setup.weights).expect("same grid");
    SolveSummary {
        converged: sol.converged,
        polished: sol.polished,
        iters: sol.iters,
        final_gap: sol.final_gap,
        seminorm_term: e.seminorm_term,
        exterior_term: e.exterior_term,
        fidelity_term: e.fidelity_term,
        total_energy: e.total,
        tail_bound: e.tail_bound,
    }
}

/// Runs the selected suites (all when empty) and writes `report.json`.
pub fn verify(cfg: &RunConfig, suites: &[Suite]) -> Outcome {
    let setup = match prepare(cfg) {
        Ok(s) => s,
        Err(o) => return o,
    };
    let mut selected: Vec<Suite> = if suites.is_empty() { Suite::ALL.to_vec() } else { suites.to_vec() };
    selected.sort();
    selected.dedup();
    let mut report = Report::new("verify", cfg);
    report.grid = Some(grid_summary(&setup.weights));
    let mut ctx = Context::new(cfg, setup);
    for suite in selected {
        let clock = Instant::now();
        let result = ctx.run(suite);
        report.timings.insert(suite.name().into(), clock.elapsed().as_secs_f64());
        report.push(result);
    }
    let not_converged = ctx.solved().is_some_and(|s| !s.converged);
    if let Some(sol) = ctx.solved() {
        report.solve = Some(solve_summary(sol, &ctx.setup));
    }
    if let Err(e) = report.write(&cfg.out_dir, "report.json") {
        return io_failure(report, e);
    }
    let exit = if not_converged {
        Exit::NotConverged
    } else if report.passed {
        Exit::Pass
    } else {
        Exit::SuiteFailure
    };
    Outcome { exit, report: Some(report), message: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    S,
    Beta,
    H,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::S => "s",
            SweepParam::Beta => "beta",
            SweepParam::H => "h",
        }
    }

    /// The base config with the parameter replaced. A radial Hölder datum
    /// follows a `beta` sweep.
    fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut cfg = base.clone();
        match self {
            SweepParam::S => cfg.s = value,
            SweepParam::Beta => {
                cfg.beta = value;
                if let DatumSpec::Synth(SynthKind::RadialHolder { beta, .. }) = &mut cfg.datum {
                    *beta = value;
                }
            }
            SweepParam::H => cfg.h = value,
        }
        cfg
    }
}

/// Parses `a,b,c` where each entry is a number or a fraction `p/q`.
pub fn parse_values(csv: &str) -> Result<Vec<f64>, String> {
    csv.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            let parsed = match v.split_once('/') {
                Some((p, q)) => p.trim().parse::<f64>().and_then(|p| q.trim().parse::<f64>().map(|q| p / q)),
                None => v.parse::<f64>(),
            };
            parsed.ok().filter(|x| x.is_finite()).ok_or_else(|| format!("bad value {v:?}"))
        })
        .collect()
}

/// One row of the consolidated sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub converged: bool,
    pub iters: usize,
    pub final_gap: f64,
    pub energy: f64,
    /// Largest truncated Euler–Lagrange residual over the levels (2D).
    pub el_residual: Option<f64>,
    pub el_residual_full: Option<f64>,
    /// Unit-interval perimeter and its bracket (1D).
    pub perimeter: Option<[f64; 3]>,
    pub perimeter_exact: Option<f64>,
    pub u_exponent: Option<f64>,
}

impl SweepRow {
    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let p = |k: usize| opt(self.perimeter.map(|p| p[k]));
        format!(
            "{:e},{},{},{:e},{:e},{},{},{},{},{},{},{}",
            self.value,
            self.converged,
            self.iters,
            self.final_gap,
            self.energy,
            opt(self.el_residual),
            opt(self.el_residual_full),
            p(0),
            p(1),
            p(2),
            opt(self.perimeter_exact),
            opt(self.u_exponent)
        )
    }
}

const SWEEP_HEADER: &str =
    "value,converged,iters,final_gap,energy,el_residual,el_residual_full,perimeter,perimeter_lower,perimeter_upper,perimeter_exact,u_exponent";

/// Measurements at one sweep value.
fn sweep_point(cfg: &RunConfig) -> Result<(SweepRow, Report), Outcome> {
    let setup = prepare(cfg)?;
    let mut report = Report::new("sweep", cfg);
    report.grid = Some(grid_summary(&setup.weights));
    let mut ctx = Context::new(cfg, setup);
    let clock = Instant::now();
    if let Err(e) = ctx.solution() {
        return Err(Outcome::usage(format!("solve: {e}")));
    }
    report.timings.insert("solve".into(), clock.elapsed().as_secs_f64());
    report.push(ctx.certificate());
    let sol = ctx.solved().expect("solved above").clone();
    let setup = &ctx.setup;
    let g = setup.grid;
    report.solve = Some(solve_summary(&sol, setup));
    let mut row = SweepRow {
        value: 0.0,
        converged: sol.converged,
        iters: sol.iters,
        final_gap: sol.final_gap,
        energy: sol.energy,
        el_residual: None,
        el_residual_full: None,
        perimeter: None,
        perimeter_exact: None,
        u_exponent: None,
    };
    let mut m = SuiteResult::new("measurements");
    let mut levels_data = Vec::new();
    if g.dim() == 2 {
        let (mut worst, mut worst_full) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for t in levels_for(&sol.u, &cfg.levels) {
            match el_residual(&sol.u, &setup.datum, t, &setup.spec) {
                Ok(el) => {
                    worst = worst.max(el.max_residual);
                    worst_full = worst_full.max(el.max_residual_full);
                    levels_data.push(json!({ "level": t, "el": el }));
                }
                Err(e) => m.fail(format!("level {t}: {e}")),
            }
        }
        if worst.is_finite() {
            row.el_residual = Some(worst);
            row.el_residual_full = Some(worst_full);
        } else {
            m.fail("no level set gave an Euler-Lagrange residual");
        }
    } else {
        let e = LevelSet::from_fn(g, |x| 0.5 - x[0].abs());
        match perimeter(&e, &setup.weights, true) {
            Ok(p) => {
                let exact = reference::interval_perimeter(1.0, cfg.s);
                row.perimeter = Some([p.value, p.lower, p.upper]);
                row.perimeter_exact = Some(exact);
                m.check(Check::at_least("exact_above_lower", exact - p.lower, 0.0));
                m.check(Check::at_least("upper_above_exact", p.upper - exact, 0.0));
            }
            Err(e) => m.fail(format!("unit interval perimeter: {e}")),
        }
    }
    let r_min = cfg.holder.r_min.unwrap_or(2.0 * g.spacing());
    let r_max = cfg.holder.r_max.unwrap_or(0.25 * g.diameter());
    match holder_seminorm(&sol.u, cfg.beta, &LevelSet::full(g), r_min, r_max) {
        Ok(est) => row.u_exponent = est.fitted_exponent,
        Err(e) => m.diagnostics.push(format!("holder scan: {e}")),
    }
    m.data = json!({ "levels": levels_data });
    report.push(m);
    Ok((row, report))
}

/// Runs the base config at every value, writing one report per value under
/// `<param>_<k>/` plus `sweep.csv` and `sweep_report.json`.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[f64]) -> Outcome {
    if values.len() < 2 {
        return Outcome::usage("a sweep needs at least two values");
    }
    if let Err(e) = base.validate() {
        return Outcome::usage(e);
    }
    let mut rows = Vec::new();
    let mut summary = Report::new("sweep", base);
    let mut any_unconverged = false;
    for (k, &v) in values.iter().enumerate() {
        let mut cfg = param.apply(base, v);
        let sub = format!("{}_{k}", param.name());
        cfg.out_dir = base.out_dir.join(&sub);
        let (mut row, mut report) = match sweep_point(&cfg) {
            Ok(x) => x,
            Err(o) => return o,
        };
        row.value = v;
        any_unconverged |= !row.converged;
        if let Err(e) = report.write(&cfg.out_dir, "report.json") {
            return io_failure(report, e);
        }
        summary.artifacts.push(format!("{sub}/report.json"));
        for (name, t) in &report.timings {
            summary.timings.insert(format!("{sub}/{name}"), *t);
        }
        let mut point = SuiteResult::new(&sub);
        point.passed = report.passed;
        point.diagnostics = report.suites.iter().flat_map(|s| s.diagnostics.clone()).collect();
        summary.push(point);
        rows.push(row);
    }
    summary.push(trend(param, base, &rows));
    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for row in &rows {
        let _ = writeln!(csv, "{}", row.csv_line());
    }
    let written = (|| {
        fs::write(base.out_dir.join("sweep.csv"), csv)?;
        summary.artifacts.push("sweep.csv".into());
        summary.write(&base.out_dir, "sweep_report.json")
    })();
    if let Err(e) = written {
        return io_failure(summary, e);
    }
    let exit = if any_unconverged {
        Exit::NotConverged
    } else if summary.passed {
        Exit::Pass
    } else {
        Exit::SuiteFailure
    };
    Outcome { exit, report: Some(summary), message: None }
}

/// The refinement-table verdict: EL residuals fall as `h` shrinks, the 1D
/// perimeter sits in its bracket at every `s`, and fitted exponents track
/// `beta`.
fn trend(param: SweepParam, base: &RunConfig, rows: &[SweepRow]) -> SuiteResult {
    let mut r = SuiteResult::new("trend");
    match param {
        SweepParam::H if base.dim == 2 => {
            let mut by_h: Vec<&SweepRow> = rows.iter().collect();
            by_h.sort_by(|a, b| b.value.total_cmp(&a.value));
            for pair in by_h.windows(2) {
                let (coarse, fine) = (pair[0].el_residual, pair[1].el_residual);
                r.check(Check::new(
                    format!("el_residual@h={}", pair[1].value),
                    fine.unwrap_or(f64::NAN),
                    Relation::Below,
                    coarse.unwrap_or(f64::NAN),
                ));
            }
        }
        SweepParam::Beta => {
            for row in rows {
                r.check(Check::at_least(
                    format!("u_exponent@beta={}", row.value),
                    row.u_exponent.unwrap_or(f64::NAN),
                    row.value - HOLDER_SLACK,
                ));
            }
        }
        _ => {}
    }
    for row in rows {
        if let (Some([_, lo, hi]), Some(exact)) = (row.perimeter, row.perimeter_exact) {
            r.check(Check::holds(format!("perimeter_in_bracket@{}={}", param.name(), row.value), lo <= exact && exact <= hi));
        }
    }
    r.data = json!({ "rows": rows });
    r
}
