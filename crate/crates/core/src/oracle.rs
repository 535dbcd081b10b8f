//! Exhaustive reference minimizer for problems with a handful of cells.
//!
//! Every candidate ordering of the cell values (with ties) fixes the sign of
//! each pair difference; the plateau values then follow from summing the
//! stationarity condition over each tie block, and the tie is admissible when
//! a bounded dual field inside the block exists (checked through the cut
//! condition on every subset of the block). Exterior couplings enter as
//! pairs with an extra node pinned at zero.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::kernel::PairWeights;
use crate::scalar::Real;

/// Largest problem the enumeration accepts.
pub const MAX_CELLS: usize = 6;

/// Exact minimizer of the discrete functional by enumeration of weak orderings.
pub fn enumerate_minimizer<T: Real>(f: &ScalarField<T>, w: &PairWeights<T>) -> Result<ScalarField<T>> {
    if f.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    let n = f.len();
    if n == 0 || n > MAX_CELLS {
        return Err(Error::InvalidParameter(format!("enumeration needs 1..={MAX_CELLS} cells, got {n}")));
    }
    let fv: Vec<f64> = f.values().iter().map(|v| v.to_f64_lossy()).collect();
    let hd = w.grid().cell_volume().to_f64_lossy();
    let ghost = w.zero_extended().then_some(n);
    let nodes = n + usize::from(ghost.is_some());
    let mut wm = vec![vec![0.0f64; nodes]; nodes];
    for (i, j, wij) in w.iter() {
        wm[i][j] += wij.to_f64_lossy();
        wm[j][i] += wij.to_f64_lossy();
    }
    for &(i, e) in w.exterior() {
        wm[i as usize][n] += e.to_f64_lossy();
        wm[n][i as usize] += e.to_f64_lossy();
    }
    let scale = 1.0 + fv.iter().fold(0.0f64, |a, v| a.max(v.abs())) * hd + wm.iter().flatten().fold(0.0f64, |a, &v| a.max(v));
    let tol = 1e-11 * scale;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut rank = vec![0usize; nodes];
    loop {
        if let Some(u) = candidate(&rank, &fv, &wm, hd, tol, ghost) {
            let e = energy(&u, &fv, &wm, hd);
            if best.as_ref().is_none_or(|(b, _)| e < *b) {
                best = Some((e, u));
            }
        }
        // next rank vector in base n
        let mut k = 0;
        while k < nodes {
            rank[k] += 1;
            if rank[k] < nodes {
                break;
            }
            rank[k] = 0;
            k += 1;
        }
        if k == nodes {
            break;
        }
    }
    let (_, u) = best.ok_or_else(|| Error::NotConverged("no admissible ordering found".into()))?;
    ScalarField::new(*f.grid(), u.into_iter().take(n).map(T::lit).collect())
}

fn energy(u: &[f64], f: &[f64], wm: &[Vec<f64>], hd: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..u.len() {
        if i < f.len() {
            e += 0.5 * (u[i] - f[i]).powi(2) * hd;
        }
        for j in i + 1..u.len() {
            e += wm[i][j] * (u[i] - u[j]).abs();
        }
    }
    e
}

/// Plateau values for the weak ordering `rank`, if it is admissible. The
/// block holding `ghost` is fixed at zero and has no fidelity.
fn candidate(rank: &[usize], f: &[f64], wm: &[Vec<f64>], hd: f64, tol: f64, ghost: Option<usize>) -> Option<Vec<f64>> {
    let n = rank.len();
    let k = rank.iter().max().map_or(0, |m| m + 1);
    // ranks must use every level below the top one
    if (0..k).any(|r| !rank.contains(&r)) {
        return None;
    }
    let sign = |i: usize, j: usize| -> f64 {
        match rank[j].cmp(&rank[i]) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => -1.0,
            std::cmp::Ordering::Equal => 0.0,
        }
    };
    // b_i = (u_i - f_i) h^d - Σ_{j outside the block} w_ij sign(u_j - u_i) must be carried inside the block
    let mut value = vec![0.0; k];
    let pinned = ghost.map(|g| rank[g]);
    for (r, v) in value.iter_mut().enumerate() {
        if Some(r) == pinned {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&i| rank[i] == r).collect();
        let mut num = 0.0;
        for &i in &members {
            num += f[i] * hd;
            for j in 0..n {
                num += wm[i][j] * sign(i, j);
            }
        }
        *v = num / (members.len() as f64 * hd);
    }
    if value.windows(2).any(|p| p[1] <= p[0]) {
        return None;
    }
    for r in 0..k {
        let members: Vec<usize> = (0..n).filter(|&i| rank[i] == r).collect();
        let mut b: Vec<f64> = members
            .iter()
            .map(|&i| {
                let fid = if Some(i) == ghost { 0.0 } else { (value[r] - f[i]) * hd };
                fid - (0..n).map(|j| wm[i][j] * sign(i, j)).sum::<f64>()
            })
            .collect();
        if let Some(g) = members.iter().position(|&i| Some(i) == ghost) {
            b[g] = 0.0;
            b[g] = -b.iter().sum::<f64>();
        }
        let m = members.len();
        for mask in 1..(1usize << m) - 1 {
            let demand: f64 = (0..m).filter(|a| mask >> a & 1 == 1).map(|a| b[a]).sum();
            let mut cut = 0.0;
            for a in 0..m {
                for c in 0..m {
                    if mask >> a & 1 == 1 && mask >> c & 1 == 0 {
                        cut += wm[members[a]][members[c]];
                    }
                }
            }
            if demand > cut + tol {
                return None;
            }
        }
    }
    Some(rank.iter().map(|&r| value[r]).collect())
}
