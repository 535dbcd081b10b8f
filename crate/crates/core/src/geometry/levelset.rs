use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::scalar::{Point, Real};

/// A set represented by the cells it contains, optionally carrying a level
/// function `phi` (positive inside) that locates the boundary below cell
/// resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet<T = f64> {
    grid: Grid<T>,
    mask: Vec<bool>,
    phi: Option<Vec<T>>,
}

impl<T: Real> LevelSet<T> {
    pub fn from_mask(grid: Grid<T>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: mask.len() });
        }
        Ok(Self { grid, mask, phi: None })
    }

    /// `{phi > 0}` with `phi` kept for subcell boundary location.
    pub fn from_level_function(grid: Grid<T>, phi: Vec<T>) -> Result<Self> {
        if phi.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: phi.len() });
        }
        let mask = phi.iter().map(|&v| v > T::zero()).collect();
        Ok(Self { grid, mask, phi: Some(phi) })
    }

    pub fn from_fn(grid: Grid<T>, f: impl Fn(Point<T>) -> T) -> Self {
        let phi: Vec<T> = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::from_level_function(grid, phi).expect("length matches grid")
    }

    pub fn empty(grid: Grid<T>) -> Self {
        Self { grid, mask: vec![false; grid.len()], phi: None }
    }

    pub fn full(grid: Grid<T>) -> Self {
        Self { grid, mask: vec![true; grid.len()], phi: None }
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn phi(&self) -> Option<&[T]> {
        self.phi.as_deref()
    }

    /// Level function: the stored one, or `±1/2` from the mask.
    pub fn level_function(&self) -> Vec<T> {
        match &self.phi {
            Some(p) => p.clone(),
            None => {
                let half = T::lit(0.5);
                self.mask.iter().map(|&m| if m { half } else { -half }).collect()
            }
        }
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }

    pub fn is_full(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// `count * h^dim`.
    pub fn volume(&self) -> T {
        T::from_usize_lossy(self.count()) * self.grid.cell_volume()
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            grid: self.grid,
            mask: self.mask.iter().map(|m| !m).collect(),
            phi: self.phi.as_ref().map(|p| p.iter().map(|&v| -v).collect()),
        }
    }

    fn combine(&self, other: &Self, op: impl Fn(bool, bool) -> bool, phi_op: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_grid(other)?;
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| op(a, b)).collect();
        let phi = match (&self.phi, &other.phi) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(&x, &y)| phi_op(x, y)).collect()),
            _ => None,
        };
        Ok(Self { grid: self.grid, mask, phi })
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a || b, T::max)
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a && b, T::min)
    }

    pub fn is_subset_of(&self, other: &Self) -> Result<bool> {
        self.check_same_grid(other)?;
        Ok(self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b))
    }

    /// Copy with the listed cells toggled; the level function is dropped.
    pub fn with_flipped(&self, cells: &[usize]) -> Self {
        let mut mask = self.mask.clone();
        for &c in cells {
            mask[c] = !mask[c];
        }
        Self { grid: self.grid, mask, phi: None }
    }

    /// Cells with at least one face neighbor of opposite membership.
    pub fn boundary_cells(&self) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&i| self.grid.face_neighbors(i).any(|j| self.mask[j] != self.mask[i]))
            .collect()
    }

    pub fn touches_edge(&self) -> bool {
        self.cells().any(|i| self.grid.on_edge(i))
    }

    /// One-cell morphological dilation (face neighbors).
    pub fn dilate(&self) -> Self {
        let mask = (0..self.grid.len())
            .map(|i| self.mask[i] || self.grid.face_neighbors(i).any(|j| self.mask[j]))
            .collect();
        Self { grid: self.grid, mask, phi: None }
    }

    /// One-cell morphological erosion (face neighbors; outside counts as empty).
    pub fn erode(&self) -> Self {
        let full_neighbors = if self.grid.dim() == 1 { 2 } else { 4 };
        let mask = (0..self.grid.len())
            .map(|i| {
                self.mask[i]
                    && self.grid.face_neighbors(i).count() == full_neighbors
                    && self.grid.face_neighbors(i).all(|j| self.mask[j])
            })
            .collect();
        Self { grid: self.grid, mask, phi: None }
    }

    /// CSV mask export (`1`/`0`, one row per axis-0 index).
    pub fn to_csv(&self) -> String {
        let n1 = self.grid.shape()[1];
        let mut s = String::new();
        for row in self.mask.chunks(n1) {
            let line: Vec<&str> = row.iter().map(|&m| if m { "1" } else { "0" }).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// `{u > t}`. `t` must not coincide with any sample of `u`.
pub fn superlevel_set<T: Real>(u: &ScalarField<T>, t: T) -> Result<LevelSet<T>> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter("threshold must be finite".into()));
    }
    if u.values().contains(&t) {
        return Err(Error::ThresholdCollision(t.to_f64_lossy()));
    }
    let phi = u.values().iter().map(|&v| v - t).collect();
    LevelSet::from_level_function(*u.grid(), phi)
}

/// Sorted values of `u` with entries closer than `tol` merged into clusters;
/// returns the cluster representatives (cluster maxima).
pub fn distinct_levels<T: Real>(u: &ScalarField<T>, tol: T) -> Vec<T> {
    let mut v: Vec<T> = u.values().to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut out: Vec<T> = Vec::new();
    let mut cluster_start = T::nan();
    for x in v {
        match out.last_mut() {
            Some(last) if x - cluster_start <= tol || x == *last => *last = x,
            _ => {
                cluster_start = x;
                out.push(x);
            }
        }
    }
    out
}

/// Thresholds placed midway between consecutive clusters of `u`'s values.
pub fn midpoint_thresholds<T: Real>(u: &ScalarField<T>, tol: T) -> Vec<T> {
    let levels = distinct_levels(u, tol);
    let mut v: Vec<T> = u.values().to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    // lower edge of each cluster is the first sample above the previous representative
    let mut out = Vec::with_capacity(levels.len().saturating_sub(1));
    let mut k = 0usize;
    for w in levels.windows(2) {
        while k < v.len() && v[k] <= w[0] {
            k += 1;
        }
        let next_low = v[k];
        out.push(w[0] + (next_low - w[0]) * T::lit(0.5));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(n: usize) -> Grid<f64> {
        Grid::new_1d(n, 1.0, 0.0).unwrap()
    }

    #[test]
    fn superlevel_examples() {
        let u = ScalarField::new(g1(3), vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(superlevel_set(&u, 0.5).unwrap().mask(), &[false, true, true]);
        assert!(superlevel_set(&u, -1.0).unwrap().is_full());
        assert!(superlevel_set(&u, 3.0).unwrap().is_empty());
        assert!(matches!(superlevel_set(&u, 1.0), Err(Error::ThresholdCollision(_))));
    }

    #[test]
    fn thresholds_skip_clusters() {
        let u = ScalarField::new(g1(5), vec![0.0, 1.0, 1.0 + 1e-12, 2.0, 2.0]).unwrap();
        let t = midpoint_thresholds(&u, 1e-9);
        assert_eq!(t.len(), 2);
        assert!((t[0] - 0.5).abs() < 1e-15);
        assert!((t[1] - (1.0 + 1e-12 + 2.0) / 2.0).abs() < 1e-12);
        for &x in &t {
            assert!(superlevel_set(&u, x).is_ok());
        }
    }

    #[test]
    fn boundary_and_morphology() {
        let e = LevelSet::from_mask(g1(6), vec![false, true, true, true, false, false]).unwrap();
        assert_eq!(e.boundary_cells(), vec![0, 1, 3, 4]);
        assert_eq!(e.dilate().count(), 5);
        assert_eq!(e.erode().mask(), &[false, false, true, false, false, false]);
        assert!(!e.touches_edge());
        assert!(e.complement().touches_edge());
    }
}
