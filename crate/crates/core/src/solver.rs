//! Primal–dual solver for the discrete functional and the dual field that
//! certifies its minimizer.
//!
//! With `(Du)_p = w_p (u_j - u_i)` over stored pairs `p = (i, j)`, the problem
//! is the saddle point `min_u max_{|z|≤1} <z, Du> + ½ h^d ‖u - f‖²`. At the
//! optimum `Σ_j w_ij z_ij = (u_i - f_i) h^d` and `z_ij = sign(u_j - u_i)`
//! wherever `u_i ≠ u_j`. Zero-extended weights add one row per exterior
//! coupling, a pair whose second end is a ghost node held at zero.

use serde::Serialize;

use crate::energy::seminorm;
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::grid::ScalarField;
use crate::kernel::PairWeights;
use crate::scalar::{compensated_sum, CompensatedSum, Real};

/// Iterations between gap evaluations.
const CHECK_EVERY: usize = 20;
/// Relative gap below which plateau polishing is attempted.
const POLISH_START: f64 = 1e-4;
/// Longest stretch between step rebalancing restarts.
const RESTART_MAX: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverOptions<T = f64> {
    pub max_iters: usize,
    /// Relative primal–dual gap target.
    pub gap_tol: T,
    /// `τ / σ`; both steps satisfy `σ τ ‖D‖² ≤ 1`.
    pub step_ratio: T,
    /// Relaxation factor in `[1, 2)`.
    pub overrelax: T,
    /// Emit a log record every `log_every` iterations (0 disables).
    pub log_every: usize,
    /// Snap near-tied cells to exact plateau values once the gap is small.
    pub polish: bool,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            gap_tol: T::lit(1e-8),
            step_ratio: T::one(),
            overrelax: T::one(),
            log_every: 0,
            polish: true,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.gap_tol > T::zero() && self.gap_tol < T::one()) {
            return Err(Error::InvalidParameter(format!("gap_tol {} must lie in (0, 1)", self.gap_tol)));
        }
        if !(self.step_ratio > T::zero() && self.step_ratio.is_finite()) {
            return Err(Error::InvalidParameter(format!("step_ratio {} must be positive", self.step_ratio)));
        }
        if !(self.overrelax >= T::one() && self.overrelax < T::lit(2.0)) {
            return Err(Error::InvalidParameter(format!("overrelax {} must lie in [1, 2)", self.overrelax)));
        }
        Ok(())
    }
}

/// Antisymmetric pair field: `z[p]` is the value on `(i, j)` of pair `p`,
/// the value on `(j, i)` is its negation. Exterior couplings follow the
/// pairs, each oriented from its cell to the exterior.
#[derive(Debug, Clone, PartialEq)]
pub struct DualField<T = f64> {
    z: Vec<T>,
}

impl<T: Real> DualField<T> {
    pub fn zeros(w: &PairWeights<T>) -> Self {
        Self { z: vec![T::zero(); w.dual_len()] }
    }

    /// Values are clipped to `[-1, 1]`.
    pub fn from_values(w: &PairWeights<T>, mut z: Vec<T>) -> Result<Self> {
        if z.len() != w.dual_len() {
            return Err(Error::PatternMismatch);
        }
        for v in &mut z {
            *v = clip(*v);
        }
        Ok(Self { z })
    }

    pub fn values(&self) -> &[T] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Value on the ordered pair; `reversed` selects `(j, i)`.
    pub fn get(&self, p: usize, reversed: bool) -> T {
        if reversed {
            -self.z[p]
        } else {
            self.z[p]
        }
    }

    fn check(&self, w: &PairWeights<T>) -> Result<()> {
        if self.z.len() == w.dual_len() {
            Ok(())
        } else {
            Err(Error::PatternMismatch)
        }
    }
}

#[inline]
fn clip<T: Real>(v: T) -> T {
    v.max(-T::one()).min(T::one())
}

/// Residuals of the three optimality conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateReport<T = f64> {
    /// `max |z| - 1`.
    pub bound: T,
    /// Worst `|z_ij sign(u_j - u_i) - 1|` over active pairs.
    pub alignment: T,
    /// Worst `|Σ_j w_ij z_ij - (u_i - f_i) h^d|` over cells.
    pub stationarity: T,
    pub active_pairs: usize,
    pub activity_threshold: T,
}

#[derive(Debug, Clone)]
pub struct SolveResult<T = f64> {
    pub u: ScalarField<T>,
    pub z: DualField<T>,
    pub iters: usize,
    /// Relative gap `(F(u) - D(z)) / (1 + |F(u)|)`.
    pub final_gap: T,
    pub converged: bool,
    /// Whether the returned pair comes from plateau polishing.
    pub polished: bool,
    pub energy: T,
    pub certificate: CertificateReport<T>,
}

/// One solver diagnostics line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRecord {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Pairs followed by exterior couplings, the latter as pairs `(i, ghost)`
/// with a ghost node fixed at zero. Node vectors have `nodes` entries; the
/// ghost slot, when present, is the last one and always holds zero.
struct Edges<T> {
    ends: Vec<[u32; 2]>,
    w: Vec<T>,
    cells: usize,
    nodes: usize,
    /// Row length of the grid, for the checkerboard start vector.
    row: usize,
}

impl<T: Real> Edges<T> {
    fn new(pw: &PairWeights<T>) -> Self {
        let cells = pw.grid().len();
        let ghost = cells as u32;
        let mut ends = pw.pairs().to_vec();
        let mut w = pw.weights().to_vec();
        for &(i, e) in pw.exterior() {
            ends.push([i, ghost]);
            w.push(e);
        }
        let nodes = if pw.zero_extended() { cells + 1 } else { cells };
        Self { ends, w, cells, nodes, row: pw.grid().shape()[1] }
    }

    fn len(&self) -> usize {
        self.ends.len()
    }

    /// `Du` per edge.
    fn apply_d(&self, u: &[T], out: &mut [T]) {
        for (p, (&[i, j], &wp)) in self.ends.iter().zip(&self.w).enumerate() {
            out[p] = wp * (u[j as usize] - u[i as usize]);
        }
    }

    /// `Dᵀz` per node; the ghost entry is cleared.
    fn apply_dt(&self, z: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|v| *v = T::zero());
        for (&[i, j], (&wp, &zp)) in self.ends.iter().zip(self.w.iter().zip(z)) {
            let v = wp * zp;
            out[j as usize] += v;
            out[i as usize] -= v;
        }
        out[self.cells..].iter_mut().for_each(|v| *v = T::zero());
    }

    /// `‖D‖` from power iteration on `DᵀD`, capped by the Gershgorin bound.
    fn operator_norm(&self) -> T {
        if self.ends.is_empty() {
            return T::zero();
        }
        let mut row = vec![T::zero(); self.nodes];
        for (&[i, j], &wp) in self.ends.iter().zip(&self.w) {
            row[i as usize] += wp * wp;
            row[j as usize] += wp * wp;
        }
        let gersh = row[..self.cells].iter().fold(T::zero(), |a, &b| a.max(b)) * T::lit(2.0);
        // deterministic start with energy at high frequencies
        let mut x: Vec<T> = (0..self.nodes)
            .map(|k| {
                if k >= self.cells {
                    return T::zero();
                }
                let sign = if (k / self.row + k % self.row).is_multiple_of(2) { T::one() } else { -T::one() };
                sign * (T::one() + T::lit(0.1) * T::from_usize_lossy(k % 7))
            })
            .collect();
        let mut dx = vec![T::zero(); self.len()];
        let mut y = vec![T::zero(); self.nodes];
        let mut lambda = T::zero();
        for _ in 0..100 {
            let nx = compensated_sum(x.iter().map(|v| *v * *v)).sqrt();
            if nx == T::zero() {
                break;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            self.apply_d(&x, &mut dx);
            self.apply_dt(&dx, &mut y);
            lambda = compensated_sum(x.iter().zip(&y).map(|(a, b)| *a * *b));
            std::mem::swap(&mut x, &mut y);
        }
        (lambda * T::lit(1.1)).min(gersh).max(lambda).sqrt()
    }
}

struct Objective<'a, T> {
    f: &'a [T],
    e: &'a Edges<T>,
    hd: T,
}

impl<T: Real> Objective<'_, T> {
    fn primal(&self, u: &[T]) -> T {
        let mut acc = CompensatedSum::new();
        for (&[i, j], &wp) in self.e.ends.iter().zip(&self.e.w) {
            acc.add(wp * (u[j as usize] - u[i as usize]).abs());
        }
        let fid = compensated_sum(u.iter().zip(self.f).map(|(a, b)| (*a - *b) * (*a - *b)));
        acc.value() + T::lit(0.5) * self.hd * fid
    }

    /// Dual value from `Dᵀz`.
    fn dual(&self, dtz: &[T]) -> T {
        let lin = compensated_sum(dtz.iter().zip(self.f).map(|(a, b)| *a * *b));
        let quad = compensated_sum(dtz.iter().map(|a| *a * *a));
        lin - quad / (T::lit(2.0) * self.hd)
    }

    /// Primal point induced by a dual field: `f - Dᵀz / h^d`.
    fn induced(&self, dtz: &[T], out: &mut [T]) {
        for ((o, &f), &d) in out.iter_mut().zip(self.f).zip(dtz) {
            *o = f - d / self.hd;
        }
    }
}

/// Minimizes the discrete functional starting from `u = f`, `z = 0`.
pub fn minimize<T: Real>(f: &ScalarField<T>, w: &PairWeights<T>, opts: &SolverOptions<T>) -> Result<SolveResult<T>> {
    minimize_with(f, w, opts, None, &mut |_| {})
}

/// Minimizes from an explicit primal start, streaming diagnostics to `log`.
pub fn minimize_with<T: Real>(
    f: &ScalarField<T>,
    w: &PairWeights<T>,
    opts: &SolverOptions<T>,
    u0: Option<&ScalarField<T>>,
    log: &mut dyn FnMut(&LogRecord),
) -> Result<SolveResult<T>> {
    opts.validate()?;
    if f.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    if let Some(u0) = u0 {
        u0.check_same_grid(f)?;
    }
    if w.weights().iter().chain(w.exterior().iter().map(|(_, e)| e)).any(|v| !(v.is_finite() && *v > T::zero())) {
        return Err(Error::DegenerateWeights("pair weights must be positive and finite".into()));
    }
    let n = f.len();
    let edges = Edges::new(w);
    let m = edges.len();
    let nodes = edges.nodes;
    let fv = f.values();
    let hd = w.grid().cell_volume();
    let obj = Objective { f: fv, e: &edges, hd };

    let norm = edges.operator_norm();
    let (mut tau, mut sigma) = if norm > T::zero() {
        (opts.step_ratio.sqrt() / norm, T::one() / (opts.step_ratio.sqrt() * norm))
    } else {
        (T::one(), T::one())
    };
    let rho = opts.overrelax;
    let mut ratio = opts.step_ratio;

    let mut u: Vec<T> = u0.map_or_else(|| fv.to_vec(), |x| x.values().to_vec());
    u.resize(nodes, T::zero());
    let mut ubar = vec![T::zero(); nodes];
    let mut z = vec![T::zero(); m];
    let mut zhat = vec![T::zero(); m];
    let mut uhat = vec![T::zero(); nodes];
    let mut dtz = vec![T::zero(); nodes];
    let mut uz = vec![T::zero(); nodes];

    let mut restart_u = u.clone();
    let mut restart_z = z.clone();
    let mut restart_gap = T::infinity();
    let mut restart_at = 0usize;
    let mut best_u = u.clone();
    let mut best_primal = obj.primal(&u);
    let mut best_z = z.clone();
    let mut best_dual = obj.dual(&dtz);
    let mut polished = false;
    let mut iters = 0;
    let mut gap_reached_at: Option<usize> = None;
    let mut last_polish_gap = T::infinity();

    for k in 1..=opts.max_iters {
        iters = k;
        // exact proximal map of the fidelity
        edges.apply_dt(&z, &mut dtz);
        let denom = T::one() + tau * hd;
        for c in 0..n {
            uhat[c] = (u[c] - tau * dtz[c] + tau * hd * fv[c]) / denom;
            ubar[c] = T::lit(2.0) * uhat[c] - u[c];
        }
        // dual ascent on the extrapolated point, projected onto the box
        for (p, (&[i, j], &wp)) in edges.ends.iter().zip(&edges.w).enumerate() {
            zhat[p] = clip(z[p] + sigma * wp * (ubar[j as usize] - ubar[i as usize]));
        }
        if rho == T::one() {
            std::mem::swap(&mut u, &mut uhat);
            z.copy_from_slice(&zhat);
        } else {
            for c in 0..n {
                let d = uhat[c] - u[c];
                u[c] += rho * d;
            }
            for p in 0..m {
                let d = zhat[p] - z[p];
                z[p] += rho * d;
            }
        }
        let logging = opts.log_every > 0 && k % opts.log_every == 0;
        if k % CHECK_EVERY != 0 && !logging && k != opts.max_iters {
            continue;
        }
        let primal_iterate: &[T] = if rho == T::one() { &u } else { &uhat };
        let p_u = obj.primal(primal_iterate);
        if p_u < best_primal {
            best_primal = p_u;
            best_u.copy_from_slice(primal_iterate);
        }
        edges.apply_dt(&zhat, &mut dtz);
        let d = obj.dual(&dtz);
        if d > best_dual {
            best_dual = d;
            best_z.copy_from_slice(&zhat);
        }
        obj.induced(&dtz, &mut uz);
        let p_uz = obj.primal(&uz);
        if p_uz < best_primal {
            best_primal = p_uz;
            best_u.copy_from_slice(&uz);
        }
        let gap = relative_gap(best_primal, best_dual);

        // restart bookkeeping: rebalance the primal and dual steps from the
        // distance travelled since the last restart
        let current_gap = relative_gap(p_u.min(p_uz), d);
        if current_gap <= T::lit(0.2) * restart_gap || k - restart_at >= RESTART_MAX {
            let du = compensated_sum(u.iter().zip(&restart_u).map(|(a, b)| (*a - *b) * (*a - *b))).sqrt();
            let dz = compensated_sum(z.iter().zip(&restart_z).map(|(a, b)| (*a - *b) * (*a - *b))).sqrt();
            if du > T::zero() && dz > T::zero() && norm > T::zero() {
                ratio = (ratio * (du / dz) * (du / dz)).sqrt();
                tau = ratio.sqrt() / norm;
                sigma = T::one() / (ratio.sqrt() * norm);
            }
            restart_u.copy_from_slice(&u);
            restart_z.copy_from_slice(&z);
            restart_gap = current_gap;
            restart_at = k;
        }
        if logging {
            log(&LogRecord {
                iter: k,
                primal: best_primal.to_f64_lossy(),
                dual: best_dual.to_f64_lossy(),
                gap: gap.to_f64_lossy(),
            });
        }
        if gap <= opts.gap_tol && gap_reached_at.is_none() {
            gap_reached_at = Some(k);
        }
        if opts.polish && gap <= T::lit(POLISH_START) && gap <= last_polish_gap * T::lit(0.1) {
            last_polish_gap = gap;
            let abs_gap = (best_primal - best_dual).max(T::zero());
            if let Some((pu, pz)) = polish(&obj, &best_u, &best_z, abs_gap) {
                let pp = obj.primal(&pu);
                edges.apply_dt(&pz, &mut dtz);
                let pd = obj.dual(&dtz);
                if pp <= best_primal && relative_gap(pp, pd) <= gap {
                    best_primal = pp;
                    best_dual = pd;
                    best_u = pu;
                    best_z = pz;
                    polished = true;
                    break;
                }
            }
        }
        if let Some(at) = gap_reached_at {
            // keep iterating for a while to give polishing a chance
            if !opts.polish || k >= at.saturating_mul(2).max(at + 200) {
                break;
            }
        }
    }

    let final_gap = relative_gap(best_primal, best_dual);
    best_u.truncate(n);
    let u = ScalarField::new(*f.grid(), best_u)?;
    let z = DualField::from_values(w, best_z)?;
    let certificate = certificate_check(&u, &z, f, w)?;
    Ok(SolveResult {
        energy: best_primal,
        u,
        z,
        iters,
        final_gap,
        converged: final_gap <= opts.gap_tol,
        polished,
        certificate,
    })
}

fn relative_gap<T: Real>(primal: T, dual: T) -> T {
    (primal - dual).max(T::zero()) / (T::one() + primal.abs())
}

/// Snaps clusters of near-tied cells to their exact plateau values and
/// repairs the dual field inside each cluster. Returns `None` when the
/// resulting pair is not an exact certificate.
fn polish<T: Real>(obj: &Objective<'_, T>, u: &[T], z: &[T], abs_gap: T) -> Option<(Vec<T>, Vec<T>)> {
    // ‖u - u*‖ ≤ sqrt(2 gap / h^d) by strong convexity of the fidelity
    let err = (T::lit(2.0) * abs_gap / obj.hd).sqrt();
    let scale = u.iter().fold(T::zero(), |a, b| a.max(b.abs())).max(T::min_positive_value());
    for factor in [4.0, 0.5, 30.0] {
        let eps = (err * T::lit(factor)).max(scale * T::lit(1e-13));
        if let Some(r) = polish_at(obj, u, z, eps) {
            return Some(r);
        }
    }
    None
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn polish_at<T: Real>(obj: &Objective<'_, T>, u: &[T], z: &[T], eps: T) -> Option<(Vec<T>, Vec<T>)> {
    let edges = obj.e;
    let (cells, nodes) = (edges.cells, edges.nodes);
    let ends = &edges.ends;
    let weights = &edges.w;
    let mut parent: Vec<usize> = (0..nodes).collect();
    for &[i, j] in ends {
        let (i, j) = (i as usize, j as usize);
        if (u[i] - u[j]).abs() <= eps {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let label: Vec<usize> = (0..nodes).map(|c| find(&mut parent, c)).collect();
    // the cluster holding the ghost is pinned at zero
    let pinned = (nodes > cells).then(|| label[cells]);

    // plateau values from the cluster-summed stationarity condition
    let mut num = vec![CompensatedSum::new(); nodes];
    let mut count = vec![0usize; nodes];
    for c in 0..cells {
        num[label[c]].add(obj.f[c] * obj.hd);
        count[label[c]] += 1;
    }
    let mut znew = vec![T::zero(); ends.len()];
    let mut intra = vec![false; ends.len()];
    for (p, &[i, j]) in ends.iter().enumerate() {
        let (i, j) = (i as usize, j as usize);
        if label[i] == label[j] {
            intra[p] = true;
            znew[p] = clip(z[p]);
        } else {
            let s = if u[j] > u[i] { T::one() } else { -T::one() };
            znew[p] = s;
            num[label[i]].add(weights[p] * s);
            num[label[j]].add(-weights[p] * s);
        }
    }
    let value: Vec<T> = (0..nodes)
        .map(|c| {
            if Some(c) == pinned || count[c] == 0 {
                T::zero()
            } else {
                num[c].value() / (T::from_usize_lossy(count[c]) * obj.hd)
            }
        })
        .collect();
    let unew: Vec<T> = (0..nodes).map(|c| value[label[c]]).collect();
    for (p, &[i, j]) in ends.iter().enumerate() {
        if !intra[p] {
            let d = unew[j as usize] - unew[i as usize];
            if d * znew[p] <= T::zero() {
                return None;
            }
        }
    }

    // intra-cluster z: a feasible flow with net outflow b_i and |flow_p| ≤ w_p;
    // the ghost absorbs the imbalance of its cluster
    let mut b = vec![T::zero(); nodes];
    stationarity_residual(edges, &znew_inter_only(&znew, &intra), &unew, obj.f, obj.hd, &mut b);
    let mut total = vec![CompensatedSum::new(); nodes];
    for c in 0..cells {
        total[label[c]].add(b[c]);
    }
    for c in 0..cells {
        if Some(label[c]) != pinned {
            b[c] -= total[label[c]].value() / T::from_usize_lossy(count[label[c]]);
        }
    }
    if let Some(root) = pinned {
        b[cells] = -total[root].value();
    }
    let (src, sink) = (nodes, nodes + 1);
    let mut net = FlowNetwork::new(nodes + 2);
    let wmax = weights.iter().fold(0.0f64, |a, &v| a.max(v.to_f64_lossy()));
    let mut arcs = vec![usize::MAX; ends.len()];
    for (p, &[i, j]) in ends.iter().enumerate() {
        if intra[p] {
            let c = weights[p].to_f64_lossy();
            arcs[p] = net.add_edge(i as usize, j as usize, c, c);
        }
    }
    let mut supply = 0.0;
    for (c, &bc) in b.iter().enumerate() {
        let v = bc.to_f64_lossy();
        if v > 0.0 {
            supply += v;
            net.add_edge(src, c, v, 0.0);
        } else if v < 0.0 {
            net.add_edge(c, sink, -v, 0.0);
        }
    }
    let flow = net.max_flow(src, sink, 1e-15 * wmax);
    if flow < supply * (1.0 - 1e-9) - 1e-15 * wmax {
        return None;
    }
    for p in 0..ends.len() {
        if intra[p] {
            let c = weights[p].to_f64_lossy();
            let phi = c - net.residual(arcs[p]);
            znew[p] = clip(T::lit(phi / c));
        }
    }
    let tol = T::lit(1e-12)
        * (obj.hd * (T::one() + unew.iter().fold(T::zero(), |a, v| a.max(v.abs()))) + T::lit(wmax));
    let mut resid = vec![T::zero(); nodes];
    stationarity_residual(edges, &znew, &unew, obj.f, obj.hd, &mut resid);
    let worst = resid.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    (worst <= tol).then_some((unew, znew))
}

fn znew_inter_only<T: Real>(z: &[T], intra: &[bool]) -> Vec<T> {
    z.iter().zip(intra).map(|(&v, &i)| if i { T::zero() } else { v }).collect()
}

/// `r_i = (u_i - f_i) h^d - Σ_j w_ij z_ij` on cells; zero on the ghost.
fn stationarity_residual<T: Real>(e: &Edges<T>, z: &[T], u: &[T], f: &[T], hd: T, out: &mut [T]) {
    e.apply_dt(z, out);
    // Σ_j w_ij z_ij = -(Dᵀz)_i
    for c in 0..e.cells {
        out[c] = (u[c] - f[c]) * hd + out[c];
    }
}

/// Residuals of the optimality conditions for `(u, z)`. Pairs with
/// `|u_i - u_j| ≤ 1e-9 ‖u‖_∞` are inactive and exempt from alignment.
/// Exterior couplings count as pairs with a partner fixed at zero.
pub fn certificate_check<T: Real>(
    u: &ScalarField<T>,
    z: &DualField<T>,
    f: &ScalarField<T>,
    w: &PairWeights<T>,
) -> Result<CertificateReport<T>> {
    u.check_same_grid(f)?;
    if u.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    z.check(w)?;
    let edges = Edges::new(w);
    let mut uv = u.values().to_vec();
    uv.resize(edges.nodes, T::zero());
    let zv = z.values();
    let bound = zv.iter().fold(T::zero(), |a, b| a.max(b.abs())) - T::one();
    let threshold = T::lit(1e-9) * u.max_abs();
    let mut alignment = T::zero();
    let mut active = 0usize;
    for (p, &[i, j]) in edges.ends.iter().enumerate() {
        let d = uv[j as usize] - uv[i as usize];
        if d.abs() > threshold {
            active += 1;
            let s = if d > T::zero() { T::one() } else { -T::one() };
            alignment = alignment.max((zv[p] * s - T::one()).abs());
        }
    }
    let mut resid = vec![T::zero(); edges.nodes];
    stationarity_residual(&edges, zv, &uv, f.values(), w.grid().cell_volume(), &mut resid);
    let stationarity = resid.iter().fold(T::zero(), |a, b| a.max(b.abs()));
    Ok(CertificateReport { bound, alignment, stationarity, active_pairs: active, activity_threshold: threshold })
}

/// Order and bound margins from solving two ordered data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport<T = f64> {
    /// `min_i (u2_i - u1_i)`; non-negative by the comparison principle.
    pub order_margin: T,
    /// `max_k (‖u_k‖_∞ - ‖f_k‖_∞)`; non-positive by the maximum principle.
    pub sup_excess: T,
    /// `min u_k` over data with `f_k ≥ 0`, if any.
    pub min_nonneg: Option<T>,
    pub converged: bool,
    pub final_gap: T,
}

/// Solves for `f1 ≤ f2` and reports the order margins.
pub fn comparison_experiment<T: Real>(
    f1: &ScalarField<T>,
    f2: &ScalarField<T>,
    w: &PairWeights<T>,
    opts: &SolverOptions<T>,
) -> Result<ComparisonReport<T>> {
    f1.check_same_grid(f2)?;
    if f1.values().iter().zip(f2.values()).any(|(a, b)| a > b) {
        return Err(Error::Precondition("comparison needs f1 <= f2 pointwise".into()));
    }
    let r1 = minimize(f1, w, opts)?;
    let r2 = minimize(f2, w, opts)?;
    let order_margin = r1
        .u
        .values()
        .iter()
        .zip(r2.u.values())
        .map(|(a, b)| *b - *a)
        .fold(T::infinity(), T::min);
    let mut sup_excess = T::neg_infinity();
    let mut min_nonneg: Option<T> = None;
    for (r, f) in [(&r1, f1), (&r2, f2)] {
        sup_excess = sup_excess.max(r.u.max_abs() - f.max_abs());
        if f.min_value() >= T::zero() {
            let m = r.u.min_value();
            min_nonneg = Some(min_nonneg.map_or(m, |x: T| x.min(m)));
        }
    }
    Ok(ComparisonReport {
        order_margin,
        sup_excess,
        min_nonneg,
        converged: r1.converged && r2.converged,
        final_gap: r1.final_gap.max(r2.final_gap),
    })
}

/// Seminorm of a solve's output; convenience for reports.
pub fn solution_seminorm<T: Real>(r: &SolveResult<T>, w: &PairWeights<T>) -> Result<T> {
    seminorm(&r.u, w)
}
