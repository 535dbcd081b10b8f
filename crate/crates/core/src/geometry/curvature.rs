//! Fractional mean curvature and the operations built on it: Euler–Lagrange
//! residuals of level sets, inclusion comparison, inward normal translation
//! and the first variation of the curvature under that translation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::boundary::{Boundary, BoundaryPoint};
use crate::geometry::{superlevel_set, LevelSet};
use crate::grid::ScalarField;
use crate::kernel::KernelSpec;
use crate::scalar::Real;

/// How the curvature integral is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CurvatureOptions {
    /// Restrict the kernel to the ball of radius `trunc_radius`, matching the
    /// truncated discrete problem.
    pub truncated: bool,
    /// Accept sets touching the grid edge; their boundary is cut there, which
    /// is exact only when it continues straight beyond the grid.
    pub allow_open: bool,
}

/// Boundary samples of `E` with outer unit normals.
pub fn boundary_points<T: Real>(e: &LevelSet<T>) -> Result<Vec<BoundaryPoint<T>>> {
    let b = Boundary::extract(e, true)?;
    Ok(b.points().iter().map(BoundaryPoint::cast).collect())
}

/// Nearest boundary point of `E` to `x`.
pub fn nearest_boundary_point<T: Real>(e: &LevelSet<T>, x: [T; 2]) -> Result<BoundaryPoint<T>> {
    let b = Boundary::extract(e, true)?;
    let x = [x[0].to_f64_lossy(), x[1].to_f64_lossy()];
    b.project(x)
        .map(|(_, bp, _)| bp.cast())
        .ok_or_else(|| Error::EmptySet("set has no boundary".into()))
}

/// `H^s_E(p) = p.v. ∫ (χ_{Eᶜ} - χ_E)(y) |y - p|^{-(n+s)} dy`, positive for
/// convex sets. `p` is snapped to the nearest boundary point.
pub fn mean_curvature<T: Real>(e: &LevelSet<T>, p: &BoundaryPoint<T>, spec: &KernelSpec<T>) -> Result<T> {
    mean_curvature_with(e, p, spec, CurvatureOptions::default())
}

pub fn mean_curvature_with<T: Real>(
    e: &LevelSet<T>,
    p: &BoundaryPoint<T>,
    spec: &KernelSpec<T>,
    opts: CurvatureOptions,
) -> Result<T> {
    check_spec(e, spec)?;
    let b = Boundary::extract(e, opts.allow_open)?;
    let (loc, _) = b.locate(p.to_f64().position)?;
    let radius = opts.truncated.then(|| spec.trunc_radius.to_f64_lossy());
    Ok(T::lit(b.curvature_at(loc, spec.s.to_f64_lossy(), radius)))
}

fn check_spec<T: Real>(e: &LevelSet<T>, spec: &KernelSpec<T>) -> Result<()> {
    spec.validate()?;
    if spec.dim != e.grid().dim() {
        return Err(Error::InvalidParameter(format!(
            "kernel dimension {} does not match grid dimension {}",
            spec.dim,
            e.grid().dim()
        )));
    }
    Ok(())
}

/// Euler–Lagrange residual `|H(p) + t - f(p)|` over the boundary of `{u > t}`.
#[derive(Debug, Clone, Serialize)]
pub struct ElResidual<T = f64> {
    /// Maximum residual with the curvature truncated at the kernel radius,
    /// which is the equation the discrete minimizer satisfies.
    pub max_residual: T,
    pub mean_residual: T,
    /// Maximum residual with the untruncated curvature.
    pub max_residual_full: T,
    /// `h^{min(1, 1 - s)}`.
    pub scale: T,
    pub points: usize,
    /// `E_t` spans fewer than 4 cells along every axis.
    pub under_resolved: bool,
}

pub fn el_residual<T: Real>(
    u: &ScalarField<T>,
    f: &ScalarField<T>,
    t: T,
    spec: &KernelSpec<T>,
) -> Result<ElResidual<T>> {
    u.check_same_grid(f)?;
    let e = superlevel_set(u, t)?;
    check_spec(&e, spec)?;
    if e.is_empty() || e.is_full() {
        return Err(Error::EmptySet("superlevel set is empty or full".into()));
    }
    let b = Boundary::extract(&e, false)?;
    let pts = b.points();
    if pts.is_empty() {
        return Err(Error::EmptySet("superlevel set has no boundary".into()));
    }
    let s = spec.s.to_f64_lossy();
    let r = spec.trunc_radius.to_f64_lossy();
    let tf = t.to_f64_lossy();
    let mut max_trunc: f64 = 0.0;
    let mut max_full: f64 = 0.0;
    let mut sum = 0.0;
    for bp in &pts {
        let (loc, _) = b.locate(bp.position)?;
        let fp = f.interpolate([T::lit(bp.position[0]), T::lit(bp.position[1])]).to_f64_lossy();
        let trunc = (b.curvature_at(loc, s, Some(r)) + tf - fp).abs();
        let full = (b.curvature_at(loc, s, None) + tf - fp).abs();
        max_trunc = max_trunc.max(trunc);
        max_full = max_full.max(full);
        sum += trunc;
    }
    let h = e.grid().spacing().to_f64_lossy();
    let scale = h.powf(1.0f64.min(1.0 - s));
    Ok(ElResidual {
        max_residual: T::lit(max_trunc),
        mean_residual: T::lit(sum / pts.len() as f64),
        max_residual_full: T::lit(max_full),
        scale: T::lit(scale),
        points: pts.len(),
        under_resolved: cell_extent(&e) < 4,
    })
}

/// Largest per-axis extent of `E` in cells.
fn cell_extent<T: Real>(e: &LevelSet<T>) -> usize {
    let g = e.grid();
    let mut lo = [usize::MAX; 2];
    let mut hi = [0usize; 2];
    for c in e.cells() {
        let (a, b) = g.unravel(c);
        lo = [lo[0].min(a), lo[1].min(b)];
        hi = [hi[0].max(a), hi[1].max(b)];
    }
    if lo[0] == usize::MAX {
        return 0;
    }
    let ext0 = hi[0] - lo[0] + 1;
    if g.dim() == 1 {
        ext0
    } else {
        ext0.max(hi[1] - lo[1] + 1)
    }
}

/// `H_E(p) - H_F(p)` for `E ⊆ F` sharing the boundary point `p`; nonnegative
/// up to quadrature error since the integrand of `H_E - H_F` is `2K χ_{F∖E}`.
pub fn inclusion_curvature_check<T: Real>(
    e: &LevelSet<T>,
    f: &LevelSet<T>,
    p: &BoundaryPoint<T>,
    spec: &KernelSpec<T>,
) -> Result<T> {
    if !e.is_subset_of(f)? {
        return Err(Error::Precondition("E is not contained in F".into()));
    }
    let he = mean_curvature(e, p, spec)?;
    let hf = mean_curvature(f, p, spec)?;
    Ok(he - hf)
}

/// Moves the boundary of `E` inward by `delta · speed(y)` along the outer
/// normal, via the signed distance to the extracted boundary. The result
/// carries a level function, so its boundary is again located below cell
/// resolution.
pub fn translate_along_normal<T: Real>(
    e: &LevelSet<T>,
    delta: T,
    speed: impl Fn(&BoundaryPoint<T>) -> T,
) -> Result<LevelSet<T>> {
    let delta = delta.to_f64_lossy();
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be finite and nonnegative")));
    }
    let b = Boundary::extract(e, false)?;
    if b.is_empty() {
        return Err(Error::EmptySet("set has no boundary".into()));
    }
    let speed64 = |bp: &BoundaryPoint<f64>| speed(&bp.cast()).to_f64_lossy();
    let vmax = b.points().iter().map(|bp| speed64(bp).abs()).fold(0.0, f64::max);
    let reach = b.reach();
    if delta * vmax >= reach {
        return Err(Error::Precondition(format!("translation {} exceeds the boundary reach {reach}", delta * vmax)));
    }
    let g = e.grid();
    let h = b.spacing();
    let band = delta * vmax + 3.0 * h;
    let mask = e.mask();
    let mut phi: Vec<f64> = mask.iter().map(|&m| if m { band - delta * vmax } else { -band }).collect();
    let center = |i: usize| {
        let c = g.center(i);
        [c[0].to_f64_lossy(), c[1].to_f64_lossy()]
    };
    if g.dim() == 1 {
        let cr = b.crossings();
        for (i, v) in phi.iter_mut().enumerate() {
            let x = center(i)[0];
            let (k, d) = cr
                .iter()
                .enumerate()
                .map(|(k, c)| (k, (c.0 - x).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty boundary");
            let signed = if mask[i] { d } else { -d };
            let sp = speed64(&b.boundary_point_1d(k));
            *v = signed - delta * sp;
        }
    } else {
        let [n0, n1] = g.shape();
        let o = center(0);
        let reach_cells = (band / h).ceil() as isize + 1;
        let mut best = vec![f64::INFINITY; g.len()];
        let mut side = vec![0.0f64; g.len()];
        let mut at = vec![None; g.len()];
        for (pts, closed) in b.polylines(8) {
            let m = pts.len();
            let nseg = if closed { m } else { m.saturating_sub(1) };
            for k in 0..nseg {
                let (a, la) = pts[k];
                let (bb, lb) = pts[(k + 1) % m];
                let lo = [a[0].min(bb[0]), a[1].min(bb[1])];
                let hi = [a[0].max(bb[0]), a[1].max(bb[1])];
                let i_lo = (((lo[0] - o[0]) / h).floor() as isize - reach_cells).max(0);
                let i_hi = (((hi[0] - o[0]) / h).ceil() as isize + reach_cells).min(n0 as isize - 1);
                let j_lo = (((lo[1] - o[1]) / h).floor() as isize - reach_cells).max(0);
                let j_hi = (((hi[1] - o[1]) / h).ceil() as isize + reach_cells).min(n1 as isize - 1);
                let ab = [bb[0] - a[0], bb[1] - a[1]];
                let ab2 = ab[0] * ab[0] + ab[1] * ab[1];
                for i in i_lo..=i_hi {
                    for j in j_lo..=j_hi {
                        let idx = i as usize * n1 + j as usize;
                        let x = center(idx);
                        let ax = [x[0] - a[0], x[1] - a[1]];
                        let tt = if ab2 > 0.0 { ((ax[0] * ab[0] + ax[1] * ab[1]) / ab2).clamp(0.0, 1.0) } else { 0.0 };
                        let q = [a[0] + tt * ab[0], a[1] + tt * ab[1]];
                        let d = (x[0] - q[0]).hypot(x[1] - q[1]);
                        if d < best[idx] {
                            best[idx] = d;
                            side[idx] = ab[0] * ax[1] - ab[1] * ax[0];
                            at[idx] = Some(if tt < 0.5 { la } else { lb });
                        } else if d == best[idx] {
                            // shared vertex: sum the sides of both segments
                            side[idx] += ab[0] * ax[1] - ab[1] * ax[0];
                        }
                    }
                }
            }
        }
        for idx in 0..g.len() {
            if let Some(loc) = at[idx] {
                if best[idx] <= band {
                    let inside = if best[idx] > 0.5 * h { mask[idx] } else { side[idx] > 0.0 };
                    let signed = if inside { best[idx] } else { -best[idx] };
                    phi[idx] = signed - delta * speed64(&b.boundary_point(loc));
                }
            }
        }
    }
    let phi: Vec<T> = phi.into_iter().map(T::lit).collect();
    LevelSet::from_level_function(*g, phi)
}

/// Finite-difference versus boundary-integral slope of `δ ↦ H(E^δ, p_δ)`.
#[derive(Debug, Clone, Serialize)]
pub struct FirstVariationReport<T = f64> {
    /// `(δ, H(E^δ, p - δν))`, starting with `δ = 0`.
    pub samples: Vec<(T, T)>,
    /// Linear coefficient of a least-squares polynomial fit to `samples`.
    pub fd_slope: T,
    /// `∫ |ν(y) - ν(p)|² |y - p|^{-(2+s)} dσ(y)`.
    pub formula_slope: T,
    /// `|fd - formula| / |formula|`; infinite when the formula vanishes.
    pub relative_mismatch: T,
    pub absolute_mismatch: T,
}

/// Compares the derivative of the curvature under unit-speed inward
/// translation with the normal-alignment integral (2D only).
pub fn first_variation_check<T: Real>(
    e: &LevelSet<T>,
    p: &BoundaryPoint<T>,
    spec: &KernelSpec<T>,
    deltas: &[T],
    opts: CurvatureOptions,
) -> Result<FirstVariationReport<T>> {
    check_spec(e, spec)?;
    if e.grid().dim() != 2 {
        return Err(Error::InvalidParameter("first variation check is two-dimensional".into()));
    }
    if deltas.is_empty() {
        return Err(Error::InvalidParameter("no translation distances".into()));
    }
    let s = spec.s.to_f64_lossy();
    let b = Boundary::extract(e, opts.allow_open)?;
    let (loc, bp) = b.locate(p.to_f64().position)?;
    let h0 = b.curvature_at(loc, s, None);
    let formula = b.alignment_at(loc, s);
    let mut samples = vec![(0.0, h0)];
    for &d in deltas {
        let d = d.to_f64_lossy();
        let moved = if opts.allow_open {
            translate_open(e, d, bp)?
        } else {
            translate_along_normal(e, T::lit(d), |_| T::one())?
        };
        let bd = Boundary::extract(&moved, opts.allow_open)?;
        let target = [bp.position[0] - d * bp.normal[0], bp.position[1] - d * bp.normal[1]];
        let (ld, _) = bd.locate(target)?;
        samples.push((d, bd.curvature_at(ld, s, None)));
    }
    let fd = fit_slope(&samples);
    let abs = (fd - formula).abs();
    let rel = if formula != 0.0 { abs / formula.abs() } else { f64::INFINITY };
    Ok(FirstVariationReport {
        samples: samples.iter().map(|&(a, b)| (T::lit(a), T::lit(b))).collect(),
        fd_slope: T::lit(fd),
        formula_slope: T::lit(formula),
        relative_mismatch: T::lit(rel),
        absolute_mismatch: T::lit(abs),
    })
}

/// Translation of a set with a straight open boundary: shift the level
/// function along the normal at `bp`, extrapolating linearly past the grid
/// (exact for half-planes).
fn translate_open<T: Real>(e: &LevelSet<T>, d: f64, bp: BoundaryPoint<f64>) -> Result<LevelSet<T>> {
    let g = *e.grid();
    let phi: Vec<f64> = e.level_function().iter().map(|v| v.to_f64_lossy()).collect();
    let [n0, n1] = g.shape();
    if n0 < 2 || n1 < 2 {
        return Err(Error::InvalidGrid("open translation needs at least 2 cells per axis".into()));
    }
    let h = g.spacing().to_f64_lossy();
    let o = g.origin();
    let o = [o[0].to_f64_lossy(), o[1].to_f64_lossy()];
    let at = |i: usize, j: usize| phi[i * n1 + j];
    let new: Vec<T> = (0..g.len())
        .map(|idx| {
            let c = g.center(idx);
            let x = [c[0].to_f64_lossy() + d * bp.normal[0], c[1].to_f64_lossy() + d * bp.normal[1]];
            let q = [(x[0] - o[0]) / h, (x[1] - o[1]) / h];
            let i = (q[0].floor().max(0.0) as usize).min(n0 - 2);
            let j = (q[1].floor().max(0.0) as usize).min(n1 - 2);
            let (a, b) = (q[0] - i as f64, q[1] - j as f64);
            T::lit(
                at(i, j) * (1.0 - a) * (1.0 - b)
                    + at(i + 1, j) * a * (1.0 - b)
                    + at(i, j + 1) * (1.0 - a) * b
                    + at(i + 1, j + 1) * a * b,
            )
        })
        .collect();
    LevelSet::from_level_function(g, new)
}

/// Slope at the first abscissa of a least-squares polynomial (degree ≤ 2).
fn fit_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 0.0;
    }
    let deg = (n - 1).min(2);
    let x0 = samples[0].0;
    let scale = samples.iter().map(|s| (s.0 - x0).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // normal equations in the scaled variable; at most 3 unknowns
    let m = deg + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for &(x, y) in samples {
        let xi = (x - x0) / scale;
        let pw: Vec<f64> = (0..m).map(|k| xi.powi(k as i32)).collect();
        for r in 0..m {
            for c in 0..m {
                a[r][c] += pw[r] * pw[c];
            }
            a[r][m] += pw[r] * y;
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).expect("rows");
        a.swap(col, piv);
        for r in 0..m {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=m {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    a[1][m] / a[1][1] / scale
}

/// Smallest distance between boundary samples of the two sets.
pub fn boundary_distance<T: Real>(e1: &LevelSet<T>, e2: &LevelSet<T>) -> Result<T> {
    e1.check_same_grid(e2)?;
    let p1 = Boundary::extract(e1, true)?.points();
    let p2 = Boundary::extract(e2, true)?.points();
    if p1.is_empty() || p2.is_empty() {
        return Err(Error::EmptySet("boundary has no points".into()));
    }
    let mut best = f64::INFINITY;
    for a in &p1 {
        for b in &p2 {
            best = best.min((a.position[0] - b.position[0]).hypot(a.position[1] - b.position[1]));
        }
    }
    Ok(T::lit(best))
}

/// Largest distance from `center` to a cell center of `E`; 0 for `∅`.
pub fn support_radius<T: Real>(e: &LevelSet<T>, center: [T; 2]) -> T {
    let g = e.grid();
    e.cells()
        .map(|i| {
            let c = g.center(i);
            let dx = c[0] - center[0];
            if g.dim() == 1 {
                dx.abs()
            } else {
                dx.hypot(c[1] - center[1])
            }
        })
        .fold(T::zero(), T::max)
}
