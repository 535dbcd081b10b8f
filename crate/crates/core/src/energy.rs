//! Scalar energies: the nonlocal seminorm, the fidelity term, nonlocal
//! perimeters and the coarea and submodularity identities they satisfy.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::LevelSet;
use crate::grid::{Grid, ScalarField};
use crate::kernel::{tail_mass, PairWeights};
use crate::scalar::{compensated_sum, CompensatedSum, Real};

/// The discrete functional split into its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown<T = f64> {
    pub seminorm_term: T,
    /// `Σ_i ext_i |u_i|`; zero unless the weights are zero-extended.
    pub exterior_term: T,
    pub fidelity_term: T,
    pub total: T,
    /// Upper bound on the seminorm mass dropped by truncating the kernel.
    pub tail_bound: T,
}

/// Perimeter with a bracket for the part beyond the truncation radius.
/// Without far field all three values coincide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerimeterValue<T = f64> {
    pub value: T,
    pub lower: T,
    pub upper: T,
}

impl<T: Real> PerimeterValue<T> {
    fn exact(v: T) -> Self {
        Self { value: v, lower: v, upper: v }
    }

    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}

fn check_grid<T: Real>(a: &Grid<T>, b: &Grid<T>) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `Σ_pairs w_ij |u_i - u_j|`.
pub fn seminorm<T: Real>(u: &ScalarField<T>, w: &PairWeights<T>) -> Result<T> {
    check_grid(u.grid(), w.grid())?;
    let v = u.values();
    Ok(compensated_sum(w.iter().map(|(i, j, wij)| wij * (v[i] - v[j]).abs())))
}

/// `Σ_i ext_i |u_i|` over the exterior couplings of zero-extended weights.
pub fn exterior_term<T: Real>(u: &ScalarField<T>, w: &PairWeights<T>) -> Result<T> {
    check_grid(u.grid(), w.grid())?;
    let v = u.values();
    Ok(compensated_sum(w.exterior().iter().map(|&(i, e)| e * v[i as usize].abs())))
}

/// `½ Σ (u_i - f_i)^2 h^dim`.
pub fn fidelity<T: Real>(u: &ScalarField<T>, f: &ScalarField<T>, grid: &Grid<T>) -> Result<T> {
    check_grid(u.grid(), grid)?;
    check_grid(f.grid(), grid)?;
    let s = compensated_sum(u.values().iter().zip(f.values()).map(|(&a, &b)| (a - b) * (a - b)));
    Ok(T::lit(0.5) * s * grid.cell_volume())
}

/// Seminorm, exterior coupling and fidelity. `tail_bound` is `‖u‖_1 · tail_mass(R)`, which is
/// at most `‖u‖_∞ |grid| tail_mass(R)`.
pub fn total_energy<T: Real>(u: &ScalarField<T>, f: &ScalarField<T>, w: &PairWeights<T>) -> Result<EnergyBreakdown<T>> {
    let seminorm_term = seminorm(u, w)?;
    let exterior_term = exterior_term(u, w)?;
    let fidelity_term = fidelity(u, f, w.grid())?;
    let l1 = compensated_sum(u.values().iter().map(|v| v.abs())) * w.grid().cell_volume();
    let tail_bound = l1 * tail_mass(w.spec(), w.spec().trunc_radius)?;
    Ok(EnergyBreakdown {
        seminorm_term,
        exterior_term,
        fidelity_term,
        total: seminorm_term + exterior_term + fidelity_term,
        tail_bound,
    })
}

/// Far-field part of the perimeter of `E`: interaction of each cell of `E`
/// with everything outside the stencil, minus far pairs inside `E`.
/// Returns (point, lower, upper).
fn far_field_part<T: Real>(e: &LevelSet<T>, w: &PairWeights<T>) -> Result<(T, T, T)> {
    let g = w.grid();
    let spec = w.spec();
    let h = g.spacing();
    let vol = g.cell_volume();
    let r = spec.trunc_radius;
    let rho = T::from_usize_lossy(g.dim()).sqrt() * h;
    let cells: Vec<usize> = e.cells().collect();
    let n = T::from_usize_lossy(cells.len());
    let mut exterior = CompensatedSum::new();
    for &i in &cells {
        exterior.add(w.exterior_weight(i));
    }
    let exterior = exterior.value();

    // far pairs inside E, skipped entirely when E fits inside one stencil
    let reach2 = (r / h).powi(2) * T::lit(1.0 + 2e-12);
    let mut far_mid = CompensatedSum::new();
    let mut far_low = CompensatedSum::new();
    let (lo, hi) = bounding_box(g, &cells);
    let span2 = T::from_usize_lossy((hi[0] - lo[0]).pow(2) + (hi[1] - lo[1]).pow(2));
    if span2 > reach2 {
        let vol2 = vol * vol;
        let p = spec.exponent();
        let idx: Vec<(i64, i64)> = cells.iter().map(|&c| { let (a, b) = g.unravel(c); (a as i64, b as i64) }).collect();
        for (k, &(a0, b0)) in idx.iter().enumerate() {
            for &(a1, b1) in &idx[k + 1..] {
                let d2 = T::from_usize_lossy(((a1 - a0).pow(2) + (b1 - b0).pow(2)) as usize);
                if d2 > reach2 {
                    let d = d2.sqrt() * h;
                    far_mid.add(vol2 * d.powf(-p));
                    far_low.add(vol2 * (d - rho).powf(-p));
                }
            }
        }
    }
    let two = T::lit(2.0);
    let point = exterior + n * vol * tail_mass(spec, r)? - two * far_mid.value();
    let lower = exterior + n * vol * tail_mass(spec, r + rho)? - two * far_low.value();
    let upper = exterior + n * vol * tail_mass(spec, r - rho)?;
    Ok((point, lower.max(T::zero()), upper))
}

fn bounding_box<T: Real>(g: &Grid<T>, cells: &[usize]) -> ([usize; 2], [usize; 2]) {
    let mut lo = [usize::MAX; 2];
    let mut hi = [0usize; 2];
    for &c in cells {
        let (a, b) = g.unravel(c);
        lo = [lo[0].min(a), lo[1].min(b)];
        hi = [hi[0].max(a), hi[1].max(b)];
    }
    if cells.is_empty() {
        ([0, 0], [0, 0])
    } else {
        (lo, hi)
    }
}

/// In-grid part: `Σ w_ij` over pairs with exactly one endpoint in `E`.
fn pair_perimeter<T: Real>(e: &LevelSet<T>, w: &PairWeights<T>) -> T {
    let m = e.mask();
    compensated_sum(w.iter().filter(|&(i, j, _)| m[i] != m[j]).map(|(_, _, wij)| wij))
}

/// Nonlocal perimeter of `E`. With `far_field` the complement is taken to be
/// all of space outside `E`: stencil partners outside the grid and the tail
/// beyond the truncation radius are added, the latter with a bracket.
pub fn perimeter<T: Real>(e: &LevelSet<T>, w: &PairWeights<T>, far_field: bool) -> Result<PerimeterValue<T>> {
    check_grid(e.grid(), w.grid())?;
    let inner = pair_perimeter(e, w);
    if !far_field {
        return Ok(PerimeterValue::exact(inner));
    }
    if e.touches_edge() {
        return Err(Error::TouchesBoundary);
    }
    let (p, lo, hi) = far_field_part(e, w)?;
    Ok(PerimeterValue { value: inner + p, lower: inner + lo, upper: inner + hi })
}

/// Perimeter of `E` relative to `Ω`: pairs inside `Ω` across `∂E`, plus pairs
/// from `Ω∩E` to `Ωᶜ∩Eᶜ` and from `Ω∩Eᶜ` to `Ωᶜ∩E`.
pub fn localized_perimeter<T: Real>(e: &LevelSet<T>, omega: &LevelSet<T>, w: &PairWeights<T>) -> Result<T> {
    check_grid(e.grid(), w.grid())?;
    e.check_same_grid(omega)?;
    let (me, mo) = (e.mask(), omega.mask());
    let counts = |i: usize, j: usize| {
        if me[i] == me[j] {
            return false;
        }
        // one of the two lies in Ω, since pairs with both outside Ω are excluded
        mo[i] || mo[j]
    };
    Ok(compensated_sum(w.iter().filter(|&(i, j, _)| counts(i, j)).map(|(_, _, wij)| wij)))
}

/// `P(E) + Σ_{i∈E} (t - f_i) h^dim` with the far-field perimeter.
pub fn prescribed_energy<T: Real>(e: &LevelSet<T>, f: &ScalarField<T>, t: T, w: &PairWeights<T>) -> Result<PerimeterValue<T>> {
    check_grid(f.grid(), w.grid())?;
    let p = perimeter(e, w, true)?;
    let bulk = compensated_sum(e.cells().map(|i| t - f.values()[i])) * w.grid().cell_volume();
    Ok(PerimeterValue { value: p.value + bulk, lower: p.lower + bulk, upper: p.upper + bulk })
}

/// `|seminorm(u) - Σ_k (t_{k+1} - t_k) P({u > τ_k})|` over the sorted
/// distinct values `t_k` of `u`.
pub fn coarea_gap<T: Real>(u: &ScalarField<T>, w: &PairWeights<T>) -> Result<T> {
    let direct = seminorm(u, w)?;
    let mut levels: Vec<T> = u.values().to_vec();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    levels.dedup();
    let mut acc = CompensatedSum::new();
    for k in 0..levels.len().saturating_sub(1) {
        let (lo, hi) = (levels[k], levels[k + 1]);
        // {u > τ} for τ in (lo, hi) is {u >= hi}
        let mask: Vec<bool> = u.values().iter().map(|&v| v >= hi).collect();
        let e = LevelSet::from_mask(*u.grid(), mask)?;
        acc.add((hi - lo) * pair_perimeter(&e, w));
    }
    Ok((direct - acc.value()).abs())
}

/// `P(E∪F) + P(E∩F) - P(E) - P(F)` for the truncated perimeter; never
/// positive beyond rounding.
pub fn submodularity_gap<T: Real>(e: &LevelSet<T>, f: &LevelSet<T>, w: &PairWeights<T>) -> Result<T> {
    check_grid(e.grid(), w.grid())?;
    let u = e.union(f)?;
    let n = e.intersection(f)?;
    Ok(pair_perimeter(&u, w) + pair_perimeter(&n, w) - pair_perimeter(e, w) - pair_perimeter(f, w))
}

/// `P(E) / |E|^{(n-s)/n}` using the far-field perimeter point value.
pub fn isoperimetric_ratio<T: Real>(e: &LevelSet<T>, w: &PairWeights<T>) -> Result<T> {
    if e.is_empty() {
        return Err(Error::EmptySet("isoperimetric ratio of an empty set".into()));
    }
    let p = perimeter(e, w, true)?;
    let n = T::from_usize_lossy(w.grid().dim());
    Ok(p.value / e.volume().powf((n - w.spec().s) / n))
}
