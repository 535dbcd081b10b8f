//! Hölder modulus estimates and the level-gap versus boundary-distance
//! experiment behind the regularity theorem.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{boundary_distance, superlevel_set, support_radius, LevelSet};
use crate::grid::ScalarField;
use crate::kernel::{KernelSpec, PairWeights};
use crate::scalar::Real;

/// Pair scans beyond this many candidates are thinned by a fixed stride.
pub const MAX_PAIRS: usize = 1_000_000;

/// Sup-based Hölder estimate over cell pairs of a region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderEstimate<T = f64> {
    pub beta: T,
    /// `max |u(x) - u(y)| / |x - y|^β` over the admitted pairs.
    pub seminorm: T,
    /// Slope of the log upper envelope of increments against log distance;
    /// `None` when fewer than two distance bins carry a nonzero increment.
    pub fitted_exponent: Option<T>,
    pub pair_range: [T; 2],
    /// Pairs actually visited.
    pub pairs: usize,
    /// Upper envelope: per distance bin, the distance and increment of the
    /// largest increment.
    pub envelope: Vec<(T, T)>,
}

/// Estimates `[u]_β` over pairs of cells of `region` with distance in
/// `[r_min, r_max]`. `r_max` is clipped to the grid diameter.
pub fn holder_seminorm<T: Real>(
    u: &ScalarField<T>,
    beta: T,
    region: &LevelSet<T>,
    r_min: T,
    r_max: T,
) -> Result<HolderEstimate<T>> {
    let g = u.grid();
    if region.grid() != g {
        return Err(Error::GridMismatch);
    }
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(Error::InvalidParameter(format!("beta = {beta} outside (0, 1]")));
    }
    if region.is_empty() {
        return Err(Error::EmptySet("Hölder region is empty".into()));
    }
    let h = g.spacing().to_f64_lossy();
    let [n0, n1] = g.shape();
    let diameter = h * ((n0 * n0 + n1 * n1) as f64).sqrt();
    let (lo, hi) = (r_min.to_f64_lossy(), r_max.to_f64_lossy().min(diameter));
    if !(lo >= 2.0 * h * (1.0 - 1e-12) && lo < hi) {
        return Err(Error::InvalidParameter(format!(
            "pair range [{r_min}, {r_max}] must satisfy 2h <= r_min < r_max with h = {h}"
        )));
    }

    // lexicographically positive offsets with distance in range
    let reach = (hi / h).floor() as i64;
    let mut offsets: Vec<(i64, i64, f64)> = Vec::new();
    let b_range = if g.dim() == 2 { -reach..=reach } else { 0..=0 };
    for a in 0..=reach {
        for b in b_range.clone() {
            if a == 0 && b <= 0 {
                continue;
            }
            let d = h * ((a * a + b * b) as f64).sqrt();
            if d >= lo * (1.0 - 1e-12) && d <= hi * (1.0 + 1e-12) {
                offsets.push((a, b, d));
            }
        }
    }
    let cells: Vec<usize> = region.cells().collect();
    let candidates = cells.len() * offsets.len();
    let mut stride = candidates.div_ceil(MAX_PAIRS).max(1);
    // a stride sharing a factor with the offset count would revisit the
    // same offsets in every cell
    while stride > 1 && gcd(stride, offsets.len()) != 1 {
        stride += 1;
    }

    let bins = ((4.0 * (hi / lo).log2()).round() as usize).clamp(4, 24);
    let log_lo = lo.ln();
    let width = (hi.ln() - log_lo) / bins as f64;
    let mut envelope = vec![(0.0f64, 0.0f64); bins];
    let v = u.values();
    let b = beta.to_f64_lossy();
    let mut seminorm = 0.0f64;
    let mut visited = 0usize;
    let mut k = 0usize;
    for &c in &cells {
        let (i0, i1) = g.unravel(c);
        for &(da, db, d) in &offsets {
            k += 1;
            if !(k - 1).is_multiple_of(stride) {
                continue;
            }
            let (a, bb) = (i0 as i64 + da, i1 as i64 + db);
            if a >= n0 as i64 || bb < 0 || bb >= n1 as i64 {
                continue;
            }
            let j = a as usize * n1 + bb as usize;
            if !region.contains(j) {
                continue;
            }
            visited += 1;
            let inc = (v[c] - v[j]).abs().to_f64_lossy();
            seminorm = seminorm.max(inc / d.powf(b));
            let bin = (((d.ln() - log_lo) / width) as usize).min(bins - 1);
            if inc > envelope[bin].1 {
                envelope[bin] = (d, inc);
            }
        }
    }
    if visited == 0 {
        return Err(Error::EmptySet("no cell pairs of the region in the distance range".into()));
    }
    let points: Vec<(f64, f64)> =
        envelope.iter().filter(|e| e.1 > 0.0).map(|&(d, inc)| (d.ln(), inc.ln())).collect();
    let fitted_exponent = (points.len() >= 2).then(|| T::lit(ls_slope(&points)));
    Ok(HolderEstimate {
        beta,
        seminorm: T::lit(seminorm),
        fitted_exponent,
        pair_range: [r_min, T::lit(hi)],
        pairs: visited,
        envelope: envelope.into_iter().filter(|e| e.1 > 0.0).map(|(d, i)| (T::lit(d), T::lit(i))).collect(),
    })
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Least-squares slope of `y` on `x`.
fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        f64::NAN
    }
}

/// Spearman rank correlation with average ranks for ties. Values within
/// `1e-12` of the largest magnitude count as tied, so that differences of
/// equally spaced levels stay tied after rounding.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let rank = |v: &[f64]| -> Vec<f64> {
        let tol = 1e-12 * v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] - v[idx[i]] <= tol {
                j += 1;
            }
            let avg = 0.5 * (i + j) as f64 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// One ordered level pair of the key-inequality experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelPair<T = f64> {
    pub t1: T,
    pub t2: T,
    /// `t2 - t1`.
    pub gap: T,
    /// Distance between the boundaries of `{u > t1}` and `{u > t2}`.
    pub distance: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyInequalityReport<T = f64> {
    pub beta: T,
    /// `[f]_β` over the smallest centred ball holding the lowest level set.
    pub f_seminorm: T,
    /// Smallest `C ≥ 0` with `gap ≤ ([f]_β + C δ^{1-β}) δ^β` on every pair;
    /// infinite if some pair has coinciding boundaries.
    pub c_fit: T,
    /// Least-squares slope of `log gap` against `log δ`.
    pub fitted_exponent: Option<T>,
    /// Rank correlation between gaps and distances.
    pub spearman: Option<T>,
    /// `β ≤ 1 - s`: the regularity theorem does not cover this datum.
    pub outside_hypothesis: bool,
    pub pairs: Vec<LevelPair<T>>,
}

/// Measures `t2 - t1` against the boundary distance of the level sets for
/// every ordered pair of `levels`.
pub fn key_inequality_experiment<T: Real>(
    u: &ScalarField<T>,
    f: &ScalarField<T>,
    levels: &[T],
    beta: T,
    w: &PairWeights<T>,
    spec: &KernelSpec<T>,
) -> Result<KeyInequalityReport<T>> {
    u.check_same_grid(f)?;
    if u.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    if levels.len() < 2 {
        return Err(Error::InvalidParameter("at least two levels are needed".into()));
    }
    if levels.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidParameter("levels must be strictly increasing".into()));
    }
    let (umin, umax) = (u.min_value(), u.max_value());
    if let Some(t) = levels.iter().find(|&&t| !(t > umin && t < umax)) {
        return Err(Error::InvalidParameter(format!("level {t} outside ({umin}, {umax})")));
    }
    let sets: Vec<LevelSet<T>> = levels.iter().map(|&t| superlevel_set(u, t)).collect::<Result<_>>()?;
    if sets.iter().any(|e| e.is_empty() || e.is_full()) {
        return Err(Error::EmptySet("a level set is empty or full".into()));
    }

    // [f]_β on a ball around the lowest (largest) level set
    let g = u.grid();
    let h = g.spacing();
    let lowest = &sets[0];
    let count = T::from_usize_lossy(lowest.count());
    let mut centre = [T::zero(); 2];
    for c in lowest.cells() {
        let x = g.center(c);
        centre = [centre[0] + x[0], centre[1] + x[1]];
    }
    centre = [centre[0] / count, centre[1] / count];
    let radius = support_radius(lowest, centre) + h;
    let dim2 = g.dim() == 2;
    let ball = LevelSet::from_fn(*g, |x| {
        let dx = x[0] - centre[0];
        let d = if dim2 { dx.hypot(x[1] - centre[1]) } else { dx.abs() };
        radius - d
    });
    let r_hi = (T::lit(2.0) * radius).max(T::lit(3.0) * h);
    let f_est = holder_seminorm(f, beta, &ball, T::lit(2.0) * h, r_hi)?;
    let fb = f_est.seminorm.to_f64_lossy();
    let b = beta.to_f64_lossy();

    let mut pairs = Vec::new();
    let mut c_fit = 0.0f64;
    for i in 0..levels.len() {
        for j in i + 1..levels.len() {
            let distance = boundary_distance(&sets[i], &sets[j])?;
            let gap = levels[j] - levels[i];
            let (d, gp) = (distance.to_f64_lossy(), gap.to_f64_lossy());
            let need = if d > 0.0 { (gp - fb * d.powf(b)) / d } else { f64::INFINITY };
            c_fit = c_fit.max(need);
            pairs.push(LevelPair { t1: levels[i], t2: levels[j], gap, distance });
        }
    }
    let logs: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|p| p.distance > T::zero())
        .map(|p| (p.distance.to_f64_lossy().ln(), p.gap.to_f64_lossy().ln()))
        .collect();
    let fitted_exponent = (logs.len() >= 2).then(|| T::lit(ls_slope(&logs)));
    let gaps: Vec<f64> = pairs.iter().map(|p| p.gap.to_f64_lossy()).collect();
    let dists: Vec<f64> = pairs.iter().map(|p| p.distance.to_f64_lossy()).collect();
    Ok(KeyInequalityReport {
        beta,
        f_seminorm: f_est.seminorm,
        c_fit: T::lit(c_fit),
        fitted_exponent,
        spearman: spearman(&gaps, &dists).map(T::lit),
        outside_hypothesis: beta <= T::one() - spec.s,
        pairs,
    })
}

/// `[u]_β / [f]_β` over a region, with both estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusReport<T = f64> {
    pub u: HolderEstimate<T>,
    pub f: HolderEstimate<T>,
    /// Zero when both seminorms vanish, infinite when only `[f]_β` does.
    pub ratio: T,
}

pub fn modulus_inheritance_report<T: Real>(
    f: &ScalarField<T>,
    u: &ScalarField<T>,
    beta: T,
    region: &LevelSet<T>,
    r_min: T,
    r_max: T,
) -> Result<ModulusReport<T>> {
    u.check_same_grid(f)?;
    let ue = holder_seminorm(u, beta, region, r_min, r_max)?;
    let fe = holder_seminorm(f, beta, region, r_min, r_max)?;
    let ratio = if fe.seminorm > T::zero() {
        ue.seminorm / fe.seminorm
    } else if ue.seminorm == T::zero() {
        T::zero()
    } else {
        T::infinity()
    };
    Ok(ModulusReport { u: ue, f: fe, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_handles_ties_and_order() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        let r = spearman(&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn stride_is_coprime() {
        assert_eq!(gcd(12, 18), 6);
        assert_eq!(gcd(7, 5), 1);
    }
}
