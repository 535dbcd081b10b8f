//! Subcell boundary extraction and the boundary-integral form of the
//! fractional curvature.
//!
//! In 2D the zero level of the (bilinearly interpolated) level function is
//! traced by marching squares and the crossings are joined by a cubic spline,
//! oriented so that the set lies on the left. In 1D the boundary is the list
//! of crossings between adjacent cell centers.
//!
//! The divergence theorem applied to `(y - p) |y - p|^{-(n+s)}` turns the
//! principal-value volume integral into
//! `H(p) = (2/s) ∮ (y - p)·ν(y) |y - p|^{-(n+s)} dσ(y)`,
//! whose integrand is bounded by `κ |y - p|^{-s}` near `p` and is integrated
//! with a singularity-removing substitution.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::LevelSet;
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;

/// A point on the boundary of a set with its outer unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint<T = f64> {
    pub position: [T; 2],
    pub normal: [T; 2],
}

impl BoundaryPoint<f64> {
    pub(crate) fn cast<T: Real>(&self) -> BoundaryPoint<T> {
        BoundaryPoint {
            position: [T::lit(self.position[0]), T::lit(self.position[1])],
            normal: [T::lit(self.normal[0]), T::lit(self.normal[1])],
        }
    }
}

impl<T: Real> BoundaryPoint<T> {
    pub(crate) fn to_f64(self) -> BoundaryPoint<f64> {
        BoundaryPoint {
            position: [self.position[0].to_f64_lossy(), self.position[1].to_f64_lossy()],
            normal: [self.normal[0].to_f64_lossy(), self.normal[1].to_f64_lossy()],
        }
    }
}

type V = [f64; 2];

#[inline]
fn add(a: V, b: V) -> V {
    [a[0] + b[0], a[1] + b[1]]
}
#[inline]
fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1]]
}
#[inline]
fn scale(a: V, k: f64) -> V {
    [a[0] * k, a[1] * k]
}
#[inline]
fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}
#[inline]
fn cross(a: V, b: V) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}
#[inline]
fn norm(a: V) -> f64 {
    a[0].hypot(a[1])
}
/// Outer normal direction for a tangent with the set on its left.
#[inline]
fn right_perp(a: V) -> V {
    [a[1], -a[0]]
}

fn rule(n: usize) -> &'static GaussLegendre {
    static R10: OnceLock<GaussLegendre> = OnceLock::new();
    static R20: OnceLock<GaussLegendre> = OnceLock::new();
    match n {
        10 => R10.get_or_init(|| GaussLegendre::new(10)),
        _ => R20.get_or_init(|| GaussLegendre::new(20)),
    }
}

/// `y(t) = c0 + c1 t + c2 t² + c3 t³` on `[0, len]`.
#[derive(Debug, Clone, Copy)]
struct Cubic {
    c: [V; 4],
    len: f64,
}

impl Cubic {
    fn eval(&self, t: f64) -> V {
        let [c0, c1, c2, c3] = self.c;
        add(c0, scale(add(c1, scale(add(c2, scale(c3, t)), t)), t))
    }

    fn d1(&self, t: f64) -> V {
        let [_, c1, c2, c3] = self.c;
        add(c1, scale(add(scale(c2, 2.0), scale(c3, 3.0 * t)), t))
    }

    fn d2(&self, t: f64) -> V {
        add(scale(self.c[2], 2.0), scale(self.c[3], 6.0 * t))
    }

    /// Taylor coefficients about `t0`: `y(t0 + Δ) - y(t0) = a1 Δ + a2 Δ² + a3 Δ³`.
    fn taylor(&self, t0: f64) -> [V; 3] {
        [self.d1(t0), scale(self.d2(t0), 0.5), self.c[3]]
    }

    fn curvature(&self, t: f64) -> f64 {
        let d1 = self.d1(t);
        cross(d1, self.d2(t)) / norm(d1).powi(3)
    }
}

#[derive(Debug, Clone)]
struct Contour {
    knots: Vec<V>,
    closed: bool,
    segs: Vec<Cubic>,
}

/// Location on a 2D boundary: contour, segment and local parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Loc {
    contour: usize,
    seg: usize,
    t: f64,
}

/// Which boundary functional to integrate.
#[derive(Debug, Clone, Copy)]
enum Integrand {
    /// `(y - p)·ν(y) |y - p|^{-(2+s)}`.
    Curvature,
    /// `|ν(y) - ν(p)|² |y - p|^{-(2+s)}`.
    Alignment(V),
}

/// Extracted boundary of a [`LevelSet`], in `f64`.
#[derive(Debug, Clone)]
pub struct Boundary {
    dim: usize,
    h: f64,
    origin: V,
    shape: [usize; 2],
    phi: Vec<f64>,
    contours: Vec<Contour>,
    /// 1D crossings `(x, outer normal sign)`, sorted by `x`.
    crossings: Vec<(f64, f64)>,
}

impl Boundary {
    /// Extracts the boundary. Sets that touch the grid edge are rejected unless
    /// `allow_open`, in which case the boundary is cut at the grid edge.
    pub fn extract<T: Real>(e: &LevelSet<T>, allow_open: bool) -> Result<Self> {
        if !allow_open && e.touches_edge() {
            return Err(Error::TouchesBoundary);
        }
        let g = e.grid();
        let h = g.spacing().to_f64_lossy();
        let o = g.origin();
        let origin = [o[0].to_f64_lossy(), o[1].to_f64_lossy()];
        let phi: Vec<f64> = e.level_function().iter().map(|v| v.to_f64_lossy()).collect();
        let mut b = Self { dim: g.dim(), h, origin, shape: g.shape(), phi, contours: Vec::new(), crossings: Vec::new() };
        if b.dim == 1 {
            b.crossings = b.crossings_1d();
        } else {
            b.contours = b.marching_squares().into_iter().map(|(pts, closed)| fit_contour(pts, closed, h)).collect();
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn is_empty(&self) -> bool {
        if self.dim == 1 {
            self.crossings.is_empty()
        } else {
            self.contours.iter().all(|c| c.knots.is_empty())
        }
    }

    pub fn contour_count(&self) -> usize {
        if self.dim == 1 {
            self.crossings.len()
        } else {
            self.contours.len()
        }
    }

    fn node(&self, i0: usize, i1: usize) -> V {
        [self.origin[0] + i0 as f64 * self.h, self.origin[1] + i1 as f64 * self.h]
    }

    fn phi_at(&self, i0: usize, i1: usize) -> f64 {
        self.phi[i0 * self.shape[1] + i1]
    }

    fn crossings_1d(&self) -> Vec<(f64, f64)> {
        let n = self.shape[0];
        let mut out = Vec::new();
        for i in 0..n.saturating_sub(1) {
            let (a, b) = (self.phi_at(i, 0), self.phi_at(i + 1, 0));
            if (a > 0.0) != (b > 0.0) {
                let t = self.edge_fraction((i, 0), (i + 1, 0));
                let x = self.node(i, 0)[0] + t * self.h;
                out.push((x, if a > 0.0 { 1.0 } else { -1.0 }));
            }
        }
        out
    }

    /// Zero crossing on the grid edge between two nodes (lower node first):
    /// root of the cubic through four collinear nodes when it is unambiguous,
    /// otherwise of the linear interpolant.
    fn edge_point(&self, a: (usize, usize), b: (usize, usize)) -> V {
        let t = self.edge_fraction(a, b);
        let pa = self.node(a.0, a.1);
        add(pa, scale(sub(self.node(b.0, b.1), pa), t))
    }

    fn edge_fraction(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let (fa, fb) = (self.phi_at(a.0, a.1), self.phi_at(b.0, b.1));
        let linear = fa / (fa - fb);
        let step = (b.0 - a.0, b.1 - a.1);
        let [n0, n1] = self.shape;
        let before = (a.0.checked_sub(step.0), a.1.checked_sub(step.1));
        let after = (b.0 + step.0, b.1 + step.1);
        let (Some(p0), Some(p1)) = before else { return linear };
        if after.0 >= n0 || after.1 >= n1 {
            return linear;
        }
        let fm = self.phi_at(p0, p1);
        let fp = self.phi_at(after.0, after.1);
        // Lagrange cubic through x = -1, 0, 1, 2
        let cubic = |x: f64| {
            -fm * x * (x - 1.0) * (x - 2.0) / 6.0 + fa * (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0
                - fb * (x + 1.0) * x * (x - 2.0) / 2.0
                + fp * (x + 1.0) * x * (x - 1.0) / 6.0
        };
        const SAMPLES: usize = 8;
        let mut changes = 0;
        let mut prev = fa;
        for k in 1..=SAMPLES {
            let v = cubic(k as f64 / SAMPLES as f64);
            if (v > 0.0) != (prev > 0.0) {
                changes += 1;
            }
            prev = v;
        }
        if changes != 1 {
            return linear;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if (cubic(m) > 0.0) == (fa > 0.0) {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    /// Oriented polylines through the edge crossings, set on the left.
    fn marching_squares(&self) -> Vec<(Vec<V>, bool)> {
        let [n0, n1] = self.shape;
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        let mut pos: BTreeMap<usize, V> = BTreeMap::new();
        let hid = |i: usize, j: usize| 2 * (i * n1 + j);
        let vid = |i: usize, j: usize| 2 * (i * n1 + j) + 1;
        for i in 0..n0.saturating_sub(1) {
            for j in 0..n1.saturating_sub(1) {
                let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                let vals = corners.map(|(a, b)| self.phi_at(a, b));
                let inside = vals.map(|v| v > 0.0);
                // edge k joins corner k and corner k+1
                let ids = [hid(i, j), vid(i + 1, j), hid(i, j + 1), vid(i, j)];
                let ends = [(0, 1), (1, 2), (3, 2), (0, 3)];
                let cut: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
                let mut segs: Vec<(usize, usize)> = Vec::new();
                match cut.len() {
                    2 => segs.push((cut[0], cut[1])),
                    4 => {
                        let center = vals.iter().sum::<f64>() > 0.0;
                        for k in 0..4 {
                            // isolate the corners on the minority side of the saddle
                            if inside[k] != center {
                                segs.push(((k + 3) % 4, k));
                            }
                        }
                    }
                    _ => {}
                }
                for (ka, kb) in segs {
                    let pa = self.edge_point(corners[ends[ka].0], corners[ends[ka].1]);
                    let pb = self.edge_point(corners[ends[kb].0], corners[ends[kb].1]);
                    let ca = if inside[ends[ka].0] { ends[ka].0 } else { ends[ka].1 };
                    let pin = self.node(corners[ca].0, corners[ca].1);
                    pos.insert(ids[ka], pa);
                    pos.insert(ids[kb], pb);
                    if cross(sub(pb, pa), sub(pin, pa)) > 0.0 {
                        next.insert(ids[ka], ids[kb]);
                    } else {
                        next.insert(ids[kb], ids[ka]);
                    }
                }
            }
        }
        let targets: std::collections::BTreeSet<usize> = next.values().copied().collect();
        let mut used = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        let starts: Vec<usize> = next.keys().copied().filter(|k| !targets.contains(k)).collect();
        let walk = |start: usize, used: &mut std::collections::BTreeSet<usize>| {
            let mut pts = vec![pos[&start]];
            used.insert(start);
            let mut cur = start;
            let mut closed = false;
            while let Some(&nx) = next.get(&cur) {
                if nx == start {
                    closed = true;
                    break;
                }
                pts.push(pos[&nx]);
                if !used.insert(nx) {
                    break;
                }
                cur = nx;
            }
            (pts, closed)
        };
        for s in starts {
            out.push(walk(s, &mut used));
        }
        let keys: Vec<usize> = next.keys().copied().collect();
        for k in keys {
            if !used.contains(&k) {
                out.push(walk(k, &mut used));
            }
        }
        out
    }

    /// Whether a physical point lies in the set (bilinear level function).
    pub fn contains(&self, x: V) -> bool {
        let q = [(x[0] - self.origin[0]) / self.h, (x[1] - self.origin[1]) / self.h];
        let [n0, n1] = self.shape;
        let at = |a: isize, b: isize| -> f64 {
            if a < 0 || b < 0 || a as usize >= n0 || b as usize >= n1 {
                -1.0
            } else {
                self.phi[a as usize * n1 + b as usize]
            }
        };
        let f0 = q[0].floor();
        let a = q[0] - f0;
        let i0 = f0 as isize;
        if self.dim == 1 {
            return at(i0, 0) * (1.0 - a) + at(i0 + 1, 0) * a > 0.0;
        }
        let f1 = q[1].floor();
        let b = q[1] - f1;
        let i1 = f1 as isize;
        let v = at(i0, i1) * (1.0 - a) * (1.0 - b)
            + at(i0 + 1, i1) * a * (1.0 - b)
            + at(i0, i1 + 1) * (1.0 - a) * b
            + at(i0 + 1, i1 + 1) * a * b;
        v > 0.0
    }

    /// Boundary samples: spline knots in 2D, crossings in 1D.
    pub fn points(&self) -> Vec<BoundaryPoint<f64>> {
        if self.dim == 1 {
            return self.crossings.iter().map(|&(x, n)| BoundaryPoint { position: [x, 0.0], normal: [n, 0.0] }).collect();
        }
        let mut out = Vec::new();
        for (ci, c) in self.contours.iter().enumerate() {
            for k in 0..c.knots.len() {
                let loc = if k < c.segs.len() {
                    Loc { contour: ci, seg: k, t: 0.0 }
                } else {
                    Loc { contour: ci, seg: k - 1, t: c.segs[k - 1].len }
                };
                out.push(self.point_at(loc));
            }
        }
        out
    }

    fn point_at(&self, loc: Loc) -> BoundaryPoint<f64> {
        let seg = &self.contours[loc.contour].segs[loc.seg];
        let d = seg.d1(loc.t);
        BoundaryPoint { position: seg.eval(loc.t), normal: scale(right_perp(d), 1.0 / norm(d)) }
    }

    /// Nearest boundary point to `x` and its distance.
    pub(crate) fn project(&self, x: V) -> Option<(Loc, BoundaryPoint<f64>, f64)> {
        if self.dim == 1 {
            let (k, &(c, n)) = self
                .crossings
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 .0 - x[0]).abs().total_cmp(&(b.1 .0 - x[0]).abs()))?;
            let bp = BoundaryPoint { position: [c, 0.0], normal: [n, 0.0] };
            return Some((Loc { contour: k, seg: 0, t: 0.0 }, bp, (c - x[0]).abs()));
        }
        let mut best: Option<(Loc, f64)> = None;
        for (ci, c) in self.contours.iter().enumerate() {
            for (k, seg) in c.segs.iter().enumerate() {
                let lower = norm(sub(seg.c[0], x)) - 2.0 * seg.len;
                if let Some((_, d)) = best {
                    if lower > d {
                        continue;
                    }
                }
                let (t, d) = closest_on_segment(seg, x);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((Loc { contour: ci, seg: k, t }, d));
                }
            }
        }
        best.map(|(loc, d)| (loc, self.point_at(loc), d))
    }

    /// Locates `p` on the boundary, failing when it is farther than one cell.
    pub(crate) fn locate(&self, p: V) -> Result<(Loc, BoundaryPoint<f64>)> {
        match self.project(p) {
            Some((loc, bp, d)) if d <= self.h => Ok((loc, bp)),
            Some((_, _, d)) => Err(Error::NotOnBoundary(d)),
            None => Err(Error::EmptySet("set has no boundary".into())),
        }
    }

    /// Fractional curvature at the located point; `radius` restricts the
    /// kernel to the ball of that radius.
    pub(crate) fn curvature_at(&self, loc: Loc, s: f64, radius: Option<f64>) -> f64 {
        if self.dim == 1 {
            return self.curvature_1d(loc.contour, s, radius);
        }
        let p = self.point_at(loc).position;
        let body = self.integrate(loc, p, s, radius, Integrand::Curvature);
        let mut h = 2.0 / s * body;
        if let Some(r) = radius {
            let inside = self.circle_measure_inside(p, r);
            h += 2.0 / s * r.powf(-1.0 - s) * inside - 2.0 * PI * r.powf(-s) / s;
        }
        h
    }

    fn curvature_1d(&self, k: usize, s: f64, radius: Option<f64>) -> f64 {
        let (xp, _) = self.crossings[k];
        let mut acc = 0.0;
        for (j, &(x, n)) in self.crossings.iter().enumerate() {
            let d = x - xp;
            if j == k || radius.is_some_and(|r| d.abs() >= r) {
                continue;
            }
            acc += d * n * d.abs().powf(-1.0 - s);
        }
        let mut h = 2.0 / s * acc;
        if let Some(r) = radius {
            let inside = [xp - r, xp + r].iter().filter(|&&y| self.contains_1d(y)).count() as f64;
            h += 2.0 / s * r.powf(-s) * inside - 2.0 * r.powf(-s) / s;
        }
        h
    }

    /// Membership in 1D from the crossing list, so that the set extends past
    /// the grid when it touches an edge.
    fn contains_1d(&self, y: f64) -> bool {
        match self.crossings.iter().rev().find(|c| c.0 < y) {
            Some(&(_, n)) => n < 0.0,
            None => self.crossings.first().is_some_and(|c| c.1 > 0.0),
        }
    }

    /// `∫ |ν(y) - ν(p)|² |y - p|^{-(2+s)} dσ(y)`: the normal-alignment term of
    /// the first variation under unit-speed inward translation.
    pub(crate) fn alignment_at(&self, loc: Loc, s: f64) -> f64 {
        if self.dim == 1 {
            return 0.0;
        }
        let bp = self.point_at(loc);
        self.integrate(loc, bp.position, s, None, Integrand::Alignment(bp.normal))
    }

    fn integrand(&self, seg: &Cubic, t: f64, p: V, s: f64, kind: Integrand) -> f64 {
        let y = seg.eval(t);
        let d = seg.d1(t);
        let r = sub(y, p);
        let r2 = dot(r, r);
        match kind {
            Integrand::Curvature => cross(r, d) * r2.powf(-1.0 - 0.5 * s),
            Integrand::Alignment(np) => {
                let nd = norm(d);
                let nu = scale(right_perp(d), 1.0 / nd);
                let dn = sub(nu, np);
                dot(dn, dn) * r2.powf(-1.0 - 0.5 * s) * nd
            }
        }
    }

    /// Integrand times `|Δ|^s` on the segment through `p`, written with the
    /// Taylor expansion about `t0` so that nothing cancels near `p`.
    fn regular_part(&self, seg: &Cubic, t0: f64, delta: f64, s: f64, kind: Integrand) -> f64 {
        let [a1, a2, a3] = seg.taylor(t0);
        let v = add(a1, scale(add(a2, scale(a3, delta)), delta));
        let vn = dot(v, v).powf(-1.0 - 0.5 * s);
        match kind {
            Integrand::Curvature => {
                (cross(a1, a2) + 2.0 * delta * cross(a1, a3) + delta * delta * cross(a2, a3)) * vn
            }
            Integrand::Alignment(np) => {
                let d = seg.d1(t0 + delta);
                let nd = norm(d);
                let nu = scale(right_perp(d), 1.0 / nd);
                let dn = sub(nu, np);
                if delta == 0.0 {
                    return 0.0;
                }
                dot(dn, dn) / (delta * delta) * vn * nd
            }
        }
    }

    fn integrate(&self, loc: Loc, p: V, s: f64, radius: Option<f64>, kind: Integrand) -> f64 {
        let mut total = 0.0;
        for (ci, c) in self.contours.iter().enumerate() {
            let nseg = c.segs.len();
            for (k, seg) in c.segs.iter().enumerate() {
                // parameter of p on this segment, when p is on it
                let mut t0 = None;
                if ci == loc.contour {
                    let tol = 1e-9 * seg.len;
                    if k == loc.seg {
                        t0 = Some(loc.t);
                    } else if loc.t <= tol && (k + 1 == loc.seg || (c.closed && loc.seg == 0 && k + 1 == nseg)) {
                        t0 = Some(seg.len);
                    } else if loc.t >= c.segs[loc.seg].len - tol
                        && (k == loc.seg + 1 || (c.closed && k == 0 && loc.seg + 1 == nseg))
                    {
                        t0 = Some(0.0);
                    }
                }
                let mut cuts = vec![0.0, seg.len];
                if let Some(r) = radius {
                    cuts.extend(sphere_crossings(seg, p, r));
                }
                if let Some(t) = t0 {
                    cuts.push(t);
                }
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if b - a <= 0.0 {
                        continue;
                    }
                    if let Some(r) = radius {
                        let m = seg.eval(0.5 * (a + b));
                        if norm(sub(m, p)) >= r {
                            continue;
                        }
                    }
                    total += match t0 {
                        Some(t) if t == a => self.singular(seg, t, b - a, s, kind),
                        Some(t) if t == b => self.singular(seg, t, a - b, s, kind),
                        _ => self.adaptive(seg, a, b, p, s, kind, 0),
                    };
                }
            }
        }
        total
    }

    /// `∫` from `t0` to `t0 + ell` of an integrand with an `|Δ|^{-s}` singularity
    /// at `t0`, via `Δ = ell w^q`, `q = 1/(1-s)`, which makes it smooth.
    fn singular(&self, seg: &Cubic, t0: f64, ell: f64, s: f64, kind: Integrand) -> f64 {
        let q = 1.0 / (1.0 - s);
        let gl = rule(20);
        let mut acc = 0.0;
        for (w, ww) in gl.unit() {
            let delta = ell * w.powf(q);
            acc += ww * self.regular_part(seg, t0, delta, s, kind);
        }
        acc * q * ell.abs().powf(1.0 - s)
    }

    #[allow(clippy::too_many_arguments)]
    fn adaptive(&self, seg: &Cubic, a: f64, b: f64, p: V, s: f64, kind: Integrand, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let ya = seg.eval(a);
        let yb = seg.eval(b);
        let len = norm(sub(yb, ya)).max(norm(seg.d1(m)) * (b - a));
        let dist = norm(sub(seg.eval(m), p));
        if depth >= 40 || dist > 1.5 * len {
            return rule(10).integrate(a, b, |t| self.integrand(seg, t, p, s, kind));
        }
        self.adaptive(seg, a, m, p, s, kind, depth + 1) + self.adaptive(seg, m, b, p, s, kind, depth + 1)
    }

    /// Length of the circle `|y - p| = r` inside the set.
    fn circle_measure_inside(&self, p: V, r: f64) -> f64 {
        let mut angles = Vec::new();
        for c in &self.contours {
            for seg in &c.segs {
                for t in sphere_crossings(seg, p, r) {
                    let y = sub(seg.eval(t), p);
                    angles.push(y[1].atan2(y[0]));
                }
            }
        }
        let on_circle = |th: f64| add(p, [r * th.cos(), r * th.sin()]);
        if angles.is_empty() {
            return if self.contains(on_circle(0.0)) { 2.0 * PI * r } else { 0.0 };
        }
        angles.sort_by(f64::total_cmp);
        let mut inside = 0.0;
        for k in 0..angles.len() {
            let a = angles[k];
            let b = if k + 1 < angles.len() { angles[k + 1] } else { angles[0] + 2.0 * PI };
            if b > a && self.contains(on_circle(0.5 * (a + b))) {
                inside += b - a;
            }
        }
        inside * r
    }

    /// Smallest osculating radius of the boundary (1D: half the smallest gap
    /// between crossings).
    pub fn reach(&self) -> f64 {
        if self.dim == 1 {
            let gaps = self.crossings.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0));
            return gaps.fold(f64::INFINITY, f64::min);
        }
        let mut kmax: f64 = 0.0;
        for c in &self.contours {
            for seg in &c.segs {
                for j in 0..=4 {
                    kmax = kmax.max(seg.curvature(seg.len * j as f64 / 4.0).abs());
                }
            }
        }
        1.0 / kmax
    }

    /// Dense polyline samples of each contour: `(point, location)` lists.
    pub(crate) fn polylines(&self, per_segment: usize) -> Vec<(Vec<(V, Loc)>, bool)> {
        let mut out = Vec::new();
        for (ci, c) in self.contours.iter().enumerate() {
            let mut pts = Vec::new();
            for (k, seg) in c.segs.iter().enumerate() {
                for j in 0..per_segment {
                    let t = seg.len * j as f64 / per_segment as f64;
                    pts.push((seg.eval(t), Loc { contour: ci, seg: k, t }));
                }
            }
            if !c.closed {
                if let Some(seg) = c.segs.last() {
                    pts.push((seg.eval(seg.len), Loc { contour: ci, seg: c.segs.len() - 1, t: seg.len }));
                }
            }
            out.push((pts, c.closed));
        }
        out
    }

    pub(crate) fn boundary_point(&self, loc: Loc) -> BoundaryPoint<f64> {
        if self.dim == 1 {
            let (x, n) = self.crossings[loc.contour];
            return BoundaryPoint { position: [x, 0.0], normal: [n, 0.0] };
        }
        self.point_at(loc)
    }

    pub(crate) fn boundary_point_1d(&self, k: usize) -> BoundaryPoint<f64> {
        let (x, n) = self.crossings[k];
        BoundaryPoint { position: [x, 0.0], normal: [n, 0.0] }
    }

    pub(crate) fn crossings(&self) -> &[(f64, f64)] {
        &self.crossings
    }

    /// CSV of the boundary samples: `contour,x,y,nx,ny`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("contour,x,y,nx,ny\n");
        if self.dim == 1 {
            for (k, &(x, n)) in self.crossings.iter().enumerate() {
                out.push_str(&format!("{k},{x},0,{n},0\n"));
            }
            return out;
        }
        for (ci, c) in self.contours.iter().enumerate() {
            for k in 0..c.knots.len() {
                let loc = if k < c.segs.len() {
                    Loc { contour: ci, seg: k, t: 0.0 }
                } else {
                    Loc { contour: ci, seg: k - 1, t: c.segs[k - 1].len }
                };
                let bp = self.point_at(loc);
                out.push_str(&format!(
                    "{ci},{},{},{},{}\n",
                    bp.position[0], bp.position[1], bp.normal[0], bp.normal[1]
                ));
            }
        }
        out
    }
}

/// Parameters where `|seg(t) - p| = r`.
fn sphere_crossings(seg: &Cubic, p: V, r: f64) -> Vec<f64> {
    const SAMPLES: usize = 16;
    let g = |t: f64| {
        let d = sub(seg.eval(t), p);
        dot(d, d) - r * r
    };
    let mut out = Vec::new();
    let mut ta = 0.0;
    let mut ga = g(0.0);
    for j in 1..=SAMPLES {
        let tb = seg.len * j as f64 / SAMPLES as f64;
        let gb = g(tb);
        if (ga < 0.0) != (gb < 0.0) {
            let (mut lo, mut hi) = (ta, tb);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if (g(m) < 0.0) == (ga < 0.0) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        ta = tb;
        ga = gb;
    }
    out
}

/// Closest parameter on a segment to `x` and the distance.
fn closest_on_segment(seg: &Cubic, x: V) -> (f64, f64) {
    const SAMPLES: usize = 8;
    let dist = |t: f64| norm(sub(seg.eval(t), x));
    let mut bt = 0.0;
    let mut bd = dist(0.0);
    for j in 1..=SAMPLES {
        let t = seg.len * j as f64 / SAMPLES as f64;
        let d = dist(t);
        if d < bd {
            bd = d;
            bt = t;
        }
    }
    // Newton on (y - x)·y' = 0, kept inside the segment
    let mut t = bt;
    for _ in 0..30 {
        let r = sub(seg.eval(t), x);
        let d1 = seg.d1(t);
        let f = dot(r, d1);
        let fp = dot(d1, d1) + dot(r, seg.d2(t));
        if fp <= 0.0 {
            break;
        }
        let nt = (t - f / fp).clamp(0.0, seg.len);
        if (nt - t).abs() <= 1e-15 * seg.len.max(1e-300) {
            t = nt;
            break;
        }
        t = nt;
    }
    let d = dist(t);
    if d < bd {
        (t, d)
    } else {
        (bt, bd)
    }
}

/// Drops near-duplicate crossings (averaging would move knots off the curve)
/// and fits a chord-length cubic spline
/// (periodic when closed, natural when open).
fn fit_contour(pts: Vec<V>, closed: bool, h: f64) -> Contour {
    let merge = 0.2 * h;
    let mut knots: Vec<V> = Vec::with_capacity(pts.len());
    for p in pts {
        match knots.last_mut() {
            Some(last) if norm(sub(p, *last)) < merge => {}
            _ => knots.push(p),
        }
    }
    if closed && knots.len() > 1 && norm(sub(knots[0], knots[knots.len() - 1])) < merge {
        knots.pop();
    }
    let m = knots.len();
    let closed = closed && m >= 3;
    let nseg = if closed { m } else { m.saturating_sub(1) };
    if nseg == 0 {
        return Contour { knots, closed, segs: Vec::new() };
    }
    let pt = |k: usize| knots[k % m];
    let len: Vec<f64> = (0..nseg).map(|k| norm(sub(pt(k + 1), pt(k)))).collect();
    let slope: Vec<V> = (0..nseg).map(|k| scale(sub(pt(k + 1), pt(k)), 1.0 / len[k])).collect();
    // second derivatives at the knots
    let mut second = vec![[0.0; 2]; m];
    if closed {
        let lower: Vec<f64> = (0..m).map(|k| len[(k + m - 1) % m]).collect();
        let diag: Vec<f64> = (0..m).map(|k| 2.0 * (len[(k + m - 1) % m] + len[k])).collect();
        let upper: Vec<f64> = len.clone();
        for axis in 0..2 {
            let rhs: Vec<f64> = (0..m).map(|k| 6.0 * (slope[k][axis] - slope[(k + m - 1) % m][axis])).collect();
            let sol = solve_cyclic(&lower, &diag, &upper, &rhs);
            for k in 0..m {
                second[k][axis] = sol[k];
            }
        }
    } else if m >= 3 {
        let inner = m - 2;
        let lower: Vec<f64> = (1..=inner).map(|k| len[k - 1]).collect();
        let diag: Vec<f64> = (1..=inner).map(|k| 2.0 * (len[k - 1] + len[k])).collect();
        let upper: Vec<f64> = (1..=inner).map(|k| len[k]).collect();
        for axis in 0..2 {
            let rhs: Vec<f64> = (1..=inner).map(|k| 6.0 * (slope[k][axis] - slope[k - 1][axis])).collect();
            let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs);
            for k in 0..inner {
                second[k + 1][axis] = sol[k];
            }
        }
    }
    let segs = (0..nseg)
        .map(|k| {
            let l = len[k];
            let (ma, mb) = (second[k], second[(k + 1) % m]);
            let c1 = sub(slope[k], scale(add(scale(ma, 2.0), mb), l / 6.0));
            let c2 = scale(ma, 0.5);
            let c3 = scale(sub(mb, ma), 1.0 / (6.0 * l));
            Cubic { c: [pt(k), c1, c2, c3], len: l }
        })
        .collect();
    Contour { knots, closed, segs }
}

/// Thomas algorithm; `lower[0]` and `upper[n-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let a = if i > 0 { lower[i] } else { 0.0 };
        let denom = diag[i] - if i > 0 { a * c[i - 1] } else { 0.0 };
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { a * d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// Cyclic tridiagonal solve (Sherman–Morrison); `lower[0]` couples row 0 to
/// the last unknown and `upper[n-1]` couples the last row to unknown 0.
fn solve_cyclic(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut bb = diag.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &bb, upper, rhs);
    let mut uvec = vec![0.0; n];
    uvec[0] = gamma;
    uvec[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &bb, upper, &uvec);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}
