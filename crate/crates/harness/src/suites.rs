//! Property suites run by `verify`. Each suite owns its data and returns a
//! self-contained verdict; suites that audit the configured solve share one
//! solution through [`Context`].

use clap::ValueEnum;
use nonlocal_tv::geometry::{
    first_variation_check, mean_curvature_with, midpoint_thresholds, nearest_boundary_point, CurvatureOptions,
};
use nonlocal_tv::oracle::enumerate_minimizer;
use nonlocal_tv::{
    coarea_gap, comparison_experiment, holder_seminorm, key_inequality_experiment, levelset_minimality_margin,
    minimize_with, modulus_inheritance_report, perimeter, seminorm, submodularity_gap, synth_field, Field64,
    LevelSet, LevelSet64, LogRecord, SolveResult64, SynthKind,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{LevelsSpec, RunConfig, Setup};
use crate::reference;
use crate::report::{Check, Relation, SuiteResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Certificate,
    Order,
    Coarea,
    Submodularity,
    Minimality,
    Curvature,
    Variation,
    Holder,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Certificate,
        Suite::Order,
        Suite::Coarea,
        Suite::Submodularity,
        Suite::Minimality,
        Suite::Curvature,
        Suite::Variation,
        Suite::Holder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Certificate => "certificate",
            Suite::Order => "order",
            Suite::Coarea => "coarea",
            Suite::Submodularity => "submodularity",
            Suite::Minimality => "minimality",
            Suite::Curvature => "curvature",
            Suite::Variation => "variation",
            Suite::Holder => "holder",
        }
    }

    /// Whether the suite audits the solve of the configured datum.
    pub fn needs_solution(self) -> bool {
        matches!(self, Suite::Certificate | Suite::Minimality | Suite::Holder)
    }
}

/// Alignment bound on active pairs.
pub const ALIGNMENT_TOL: f64 = 1e-6;
/// Order and bound margins.
pub const ORDER_TOL: f64 = 1e-6;
pub const COAREA_TOL: f64 = 1e-10;
pub const SUBMODULARITY_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-8;
/// Relative curvature error against closed forms.
pub const CURVATURE_TOL: f64 = 0.03;
/// Half-space curvature, relative to the interval-endpoint scale `2^{1-s}/s`.
pub const HALF_SPACE_TOL: f64 = 0.02;
pub const VARIATION_TOL: f64 = 0.05;
/// Smallest probe set, in cells across.
pub const MIN_PROBE_CELLS: f64 = 8.0;
/// Allowed shortfall of the fitted exponent of `u` below `beta`.
pub const HOLDER_SLACK: f64 = 0.1;
/// Allowed shortfall of the key-inequality exponent below `beta`.
pub const KEY_SLACK: f64 = 0.15;
pub const SPEARMAN_MIN: f64 = 0.9;

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub setup: Setup,
    solution: Option<Result<SolveResult64, String>>,
    pub log: Vec<LogRecord>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig, setup: Setup) -> Self {
        Self { cfg, setup, solution: None, log: Vec::new() }
    }

    /// Solves the configured problem once; later calls reuse the result.
    pub fn solution(&mut self) -> Result<&SolveResult64, String> {
        if self.solution.is_none() {
            let log = &mut self.log;
            let r = minimize_with(&self.setup.datum, &self.setup.weights, &self.cfg.solver, None, &mut |rec| {
                log.push(*rec)
            })
            .map_err(|e| e.to_string());
            self.solution = Some(r);
        }
        self.solution.as_ref().expect("just set").as_ref().map_err(Clone::clone)
    }

    pub fn solved(&self) -> Option<&SolveResult64> {
        self.solution.as_ref().and_then(|r| r.as_ref().ok())
    }

    /// The configured solve, or a failed suite explaining why it is unusable.
    fn converged(&mut self, name: &str) -> Result<SolveResult64, SuiteResult> {
        match self.solution() {
            Ok(sol) if sol.converged => Ok(sol.clone()),
            Ok(sol) => Err(SuiteResult::failed(name, format!("solver did not converge: final gap {:e}", sol.final_gap))),
            Err(e) => Err(SuiteResult::failed(name, format!("solve failed: {e}"))),
        }
    }

    pub fn run(&mut self, suite: Suite) -> SuiteResult {
        match suite {
            Suite::Certificate => self.certificate(),
            Suite::Order => order(self.cfg, &self.setup),
            Suite::Coarea => coarea(self.cfg, &self.setup),
            Suite::Submodularity => submodularity(self.cfg, &self.setup),
            Suite::Minimality => self.minimality(),
            Suite::Curvature => curvature(self.cfg, &self.setup),
            Suite::Variation => variation(self.cfg, &self.setup),
            Suite::Holder => self.holder(),
        }
    }

    pub fn certificate(&mut self) -> SuiteResult {
        let name = Suite::Certificate.name();
        let gap_tol = self.cfg.solver.gap_tol;
        let sol = match self.solution() {
            Ok(sol) => sol,
            Err(e) => return SuiteResult::failed(name, format!("solve failed: {e}")),
        };
        let c = sol.certificate;
        let mut r = SuiteResult::new(name);
        r.check(Check::at_most("relative_gap", sol.final_gap, gap_tol));
        r.check(Check::at_most("dual_bound_excess", c.bound, 0.0));
        r.check(Check::at_most("alignment", c.alignment, ALIGNMENT_TOL));
        r.check(Check::at_most("stationarity", c.stationarity, 10.0 * gap_tol));
        r.data = json!({ "certificate": c, "iters": sol.iters, "polished": sol.polished });
        r
    }

    /// Sup distance to the exhaustive minimizer (at most 6 cells).
    pub fn oracle(&mut self) -> SuiteResult {
        let name = "oracle";
        let exact = match enumerate_minimizer(&self.setup.datum, &self.setup.weights) {
            Ok(u) => u,
            Err(e) => return SuiteResult::failed(name, format!("oracle unavailable: {e}")),
        };
        let sol = match self.solution() {
            Ok(sol) => sol,
            Err(e) => return SuiteResult::failed(name, format!("solve failed: {e}")),
        };
        let mut r = SuiteResult::new(name);
        r.check(Check::at_most("sup_error", sup_diff(&sol.u, &exact), ORACLE_TOL));
        r.data = json!({ "oracle_u": exact.values() });
        r
    }

    fn minimality(&mut self) -> SuiteResult {
        let name = Suite::Minimality.name();
        let sol = match self.converged(name) {
            Ok(sol) => sol,
            Err(r) => return r,
        };
        let levels = levels_for(&sol.u, &self.cfg.levels);
        let mut r = SuiteResult::new(name);
        if levels.is_empty() {
            r.fail("solution is constant: no nontrivial level set to audit");
            return r;
        }
        let mut rows = Vec::new();
        for t in levels {
            match levelset_minimality_margin(&sol, &self.setup.datum, t, &self.setup.weights, &self.cfg.competitors) {
                Ok(m) => {
                    r.check(Check::at_least(format!("slack@{t}"), m.slack, 0.0));
                    rows.push(json!({ "level": t, "report": m }));
                }
                Err(e) => r.fail(format!("level {t}: {e}")),
            }
        }
        r.data = json!({ "levels": rows });
        r
    }

    fn holder(&mut self) -> SuiteResult {
        let name = Suite::Holder.name();
        let sol = match self.converged(name) {
            Ok(sol) => sol,
            Err(r) => return r,
        };
        let cfg = self.cfg;
        let (f, w, spec) = (&self.setup.datum, &self.setup.weights, &self.setup.spec);
        let g = self.setup.grid;
        let region = LevelSet::full(g);
        let r_min = cfg.holder.r_min.unwrap_or(2.0 * g.spacing());
        let r_max = cfg.holder.r_max.unwrap_or(0.25 * g.diameter());
        let mut r = SuiteResult::new(name);
        let est = match holder_seminorm(&sol.u, cfg.beta, &region, r_min, r_max) {
            Ok(e) => e,
            Err(e) => return SuiteResult::failed(name, format!("holder scan: {e}")),
        };
        // a flat solution is Hölder of every order
        let exponent = est.fitted_exponent.unwrap_or(if est.seminorm == 0.0 { f64::INFINITY } else { f64::NAN });
        r.check(Check::at_least("u_fitted_exponent", exponent, cfg.beta - HOLDER_SLACK));
        let modulus = match modulus_inheritance_report(f, &sol.u, cfg.beta, &region, r_min, r_max) {
            Ok(m) => {
                r.check(Check::new("modulus_ratio", m.ratio, Relation::Below, f64::INFINITY));
                Some(m)
            }
            Err(e) => {
                r.fail(format!("modulus scan: {e}"));
                None
            }
        };
        let levels = levels_for(&sol.u, &cfg.levels);
        let key = if levels.len() >= 2 {
            match key_inequality_experiment(&sol.u, f, &levels, cfg.beta, w, spec) {
                Ok(k) => {
                    r.check(Check::at_least("key_fitted_exponent", k.fitted_exponent.unwrap_or(f64::NAN), cfg.beta - KEY_SLACK));
                    r.check(Check::new("gap_distance_spearman", k.spearman.unwrap_or(f64::NAN), Relation::Above, SPEARMAN_MIN));
                    if k.outside_hypothesis {
                        r.diagnostics.push(format!("beta = {} is at most 1 - s: outside the regime of the estimate", cfg.beta));
                    }
                    Some(k)
                }
                Err(e) => {
                    r.fail(format!("key inequality: {e}"));
                    None
                }
            }
        } else {
            r.fail("key inequality needs at least two nontrivial levels");
            None
        };
        r.data = json!({ "u": est, "modulus": modulus, "key_inequality": key });
        r
    }
}

fn sup_diff(a: &Field64, b: &Field64) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Thresholds strictly inside the range of `u`. A count spreads targets
/// evenly and snaps each to the nearest midpoint between distinct values,
/// so no threshold coincides with a sample.
pub fn levels_for(u: &Field64, spec: &LevelsSpec) -> Vec<f64> {
    match spec {
        LevelsSpec::List(v) => v.clone(),
        LevelsSpec::Count(k) => {
            let mids = midpoint_thresholds(u, 1e-9 * u.max_abs().max(1.0));
            if mids.is_empty() {
                return Vec::new();
            }
            let (lo, hi) = (u.min_value(), u.max_value());
            let mut out: Vec<f64> = (1..=*k)
                .map(|j| {
                    let target = lo + (hi - lo) * j as f64 / (*k + 1) as f64;
                    *mids.iter().min_by(|a, b| (*a - target).abs().total_cmp(&(*b - target).abs())).expect("nonempty")
                })
                .collect();
            out.dedup();
            out
        }
    }
}

fn random(seed: u64, amplitude: f64, setup: &Setup) -> Field64 {
    synth_field(&SynthKind::Random { seed, amplitude }, &setup.grid).expect("valid amplitude")
}

/// Comparison, maximum principle and sign preservation on random ordered
/// data pairs `f1 ≤ f2` with `f2 ≥ 0`.
pub fn order(cfg: &RunConfig, setup: &Setup) -> SuiteResult {
    let mut r = SuiteResult::new(Suite::Order.name());
    let amp = setup.datum.max_abs().max(1.0);
    let (mut margin, mut excess, mut nonneg) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    let mut converged = true;
    for k in 0..cfg.trials as u64 {
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(k);
        let f1 = random(seed, amp, setup);
        let shift = random(seed ^ 0x5eed_0f_0de5, 0.5 * amp, setup);
        let f2 = f1.zip_map(&shift, |a, b| a.abs() + b.abs()).expect("same grid");
        match comparison_experiment(&f1, &f2, &setup.weights, &cfg.solver) {
            Ok(c) => {
                margin = margin.min(c.order_margin);
                excess = excess.max(c.sup_excess);
                nonneg = nonneg.min(c.min_nonneg.unwrap_or(f64::NAN));
                converged &= c.converged;
            }
            Err(e) => {
                r.fail(format!("trial {k}: {e}"));
                return r;
            }
        }
    }
    r.check(Check::holds("all_converged", converged));
    r.check(Check::at_least("order_margin", margin, -ORDER_TOL));
    r.check(Check::at_most("sup_excess", excess, ORDER_TOL));
    r.check(Check::at_least("min_u_for_nonnegative_f", nonneg, -ORDER_TOL));
    r.data = json!({ "trials": cfg.trials });
    r
}

/// Coarea identity on random fields quantized to a few values, so that
/// level sets have ties.
pub fn coarea(cfg: &RunConfig, setup: &Setup) -> SuiteResult {
    let mut r = SuiteResult::new(Suite::Coarea.name());
    let mut worst: f64 = 0.0;
    for k in 0..cfg.trials as u64 {
        let f = random(cfg.seed.wrapping_add(k), 2.0, setup).map(|x| (4.0 * x).round() / 4.0).expect("finite");
        let gap = coarea_gap(&f, &setup.weights).and_then(|g| Ok(g / (1.0 + seminorm(&f, &setup.weights)?)));
        match gap {
            Ok(g) => worst = worst.max(g),
            Err(e) => r.fail(format!("trial {k}: {e}")),
        }
    }
    r.check(Check::at_most("relative_gap", worst, COAREA_TOL));
    r
}

fn random_set(seed: u64, setup: &Setup) -> LevelSet64 {
    let f = random(seed, 1.0, setup);
    LevelSet::from_mask(setup.grid, f.values().iter().map(|&v| v > 0.0).collect()).expect("mask length")
}

pub fn submodularity(cfg: &RunConfig, setup: &Setup) -> SuiteResult {
    let mut r = SuiteResult::new(Suite::Submodularity.name());
    let w = &setup.weights;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..cfg.trials as u64 {
        let seed = cfg.seed.wrapping_mul(2).wrapping_add(2 * k);
        let (e, f) = (random_set(seed, setup), random_set(seed + 1, setup));
        let res = (|| {
            let scale = 1.0 + perimeter(&e, w, false)?.value + perimeter(&f, w, false)?.value;
            Ok::<_, nonlocal_tv::Error>(submodularity_gap(&e, &f, w)? / scale)
        })();
        match res {
            Ok(g) => worst = worst.max(g),
            Err(e) => r.fail(format!("trial {k}: {e}")),
        }
    }
    r.check(Check::at_most("relative_gap", worst, SUBMODULARITY_TOL));
    r
}

/// Probe radius and its resolution in cells across.
fn probe(cfg: &RunConfig, setup: &Setup) -> (f64, f64) {
    let g = &setup.grid;
    let shape = g.shape();
    let half = (0..g.dim()).map(|k| 0.5 * shape[k] as f64 * g.spacing()).fold(f64::INFINITY, f64::min);
    let radius = cfg.curvature.radius.unwrap_or(0.6 * half);
    (radius, 2.0 * radius / g.spacing())
}

fn under_resolved(r: &mut SuiteResult, cells: f64) -> bool {
    r.check(Check::at_least("probe_cells_across", cells, MIN_PROBE_CELLS));
    if cells < MIN_PROBE_CELLS {
        r.diagnostics.push(format!("under-resolved: probe set spans {cells:.1} cells, at least {MIN_PROBE_CELLS} needed"));
        return true;
    }
    false
}

/// Curvature of a centred disc (interval in 1D) against its closed form and
/// of a half-space against zero.
pub fn curvature(cfg: &RunConfig, setup: &Setup) -> SuiteResult {
    let mut r = SuiteResult::new(Suite::Curvature.name());
    let (radius, cells) = probe(cfg, setup);
    if under_resolved(&mut r, cells) {
        return r;
    }
    let (g, spec, s) = (setup.grid, &setup.spec, cfg.s);
    let scale = reference::interval_endpoint_curvature(2.0, s);
    let res = (|| -> nonlocal_tv::Result<()> {
        let plain = CurvatureOptions::default();
        let open = CurvatureOptions { allow_open: true, ..plain };
        if g.dim() == 1 {
            let e = LevelSet::from_fn(g, |x| radius - x[0].abs());
            let p = nearest_boundary_point(&e, [radius, 0.0])?;
            let hv = mean_curvature_with(&e, &p, spec, plain)?;
            let want = reference::interval_endpoint_curvature(2.0 * radius, s);
            r.check(Check::at_most("interval_endpoint_rel_error", (hv / want - 1.0).abs(), CURVATURE_TOL));
            let half = LevelSet::from_fn(g, |x| -x[0]);
            let p = nearest_boundary_point(&half, [0.0, 0.0])?;
            let hv = mean_curvature_with(&half, &p, spec, open)?;
            r.check(Check::at_most("half_line_rel_scale", hv.abs() / scale, HALF_SPACE_TOL));
        } else {
            let e = LevelSet::from_fn(g, |x| radius - x[0].hypot(x[1]));
            let want = reference::disc_curvature(radius, s);
            for angle in [0.0, 0.4, 1.3] {
                let p = nearest_boundary_point(&e, [radius * f64::cos(angle), radius * f64::sin(angle)])?;
                let hv = mean_curvature_with(&e, &p, spec, plain)?;
                r.check(Check::at_most(format!("disc_rel_error@{angle}"), (hv / want - 1.0).abs(), CURVATURE_TOL));
            }
            let half = LevelSet::from_fn(g, |x| -x[0]);
            let p = nearest_boundary_point(&half, [0.0, 0.0])?;
            let hv = mean_curvature_with(&half, &p, spec, open)?;
            r.check(Check::at_most("half_plane_rel_scale", hv.abs() / scale, HALF_SPACE_TOL));
        }
        Ok(())
    })();
    if let Err(e) = res {
        r.fail(e.to_string());
    }
    r.data = json!({ "probe_radius": radius, "cells_across": cells });
    r
}

/// Finite-difference slope of the disc curvature under inward translation
/// against the boundary-integral formula; a half-plane moves without
/// changing its curvature.
pub fn variation(cfg: &RunConfig, setup: &Setup) -> SuiteResult {
    let mut r = SuiteResult::new(Suite::Variation.name());
    let g = setup.grid;
    if g.dim() != 2 {
        r.fail("variation suite needs a 2D grid");
        return r;
    }
    let (radius, cells) = probe(cfg, setup);
    if under_resolved(&mut r, cells) {
        return r;
    }
    let deltas: Vec<f64> = [0.0, 0.025, 0.05, 0.075, 0.1].iter().map(|d| d * radius).collect();
    let res = (|| -> nonlocal_tv::Result<_> {
        let e = LevelSet::from_fn(g, |x| radius - x[0].hypot(x[1]));
        let p = nearest_boundary_point(&e, [0.6 * radius, 0.8 * radius])?;
        let disc = first_variation_check(&e, &p, &setup.spec, &deltas, CurvatureOptions::default())?;
        r.check(Check::at_most("disc_rel_mismatch", disc.relative_mismatch, VARIATION_TOL));
        let half = LevelSet::from_fn(g, |x| -x[0]);
        let p = nearest_boundary_point(&half, [0.0, 0.0])?;
        let open = CurvatureOptions { allow_open: true, ..Default::default() };
        let plane = first_variation_check(&half, &p, &setup.spec, &deltas[..3], open)?;
        let floor = 1e-6 * disc.formula_slope.abs().max(1.0);
        r.check(Check::at_most("half_plane_slope", plane.fd_slope.abs(), floor));
        Ok(json!({ "disc": disc, "half_plane": plane }))
    })();
    match res {
        Ok(data) => r.data = data,
        Err(e) => r.fail(e.to_string()),
    }
    r
}
