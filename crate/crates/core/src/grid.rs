//! Regular grids, scalar fields sampled on them, and field I/O.
//!
//! Cells are addressed by a linear index. In 2D the index is row-major over
//! `shape = [n0, n1]`: cell `(i0, i1)` has index `i0 * n1 + i1` and center
//! `origin + (i0 * h, i1 * h)`. Axis 0 is the first coordinate. Outside the
//! grid every field is taken to be identically zero.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{norm, sub, Point, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<T = f64> {
    dim: usize,
    shape: [usize; 2],
    spacing: T,
    origin: Point<T>,
}

impl<T: Real> Grid<T> {
    pub fn new_1d(n: usize, spacing: T, origin: T) -> Result<Self> {
        Self::new(1, [n, 1], spacing, [origin, T::zero()])
    }

    pub fn new_2d(shape: [usize; 2], spacing: T, origin: Point<T>) -> Result<Self> {
        Self::new(2, shape, spacing, origin)
    }

    fn new(dim: usize, shape: [usize; 2], spacing: T, origin: Point<T>) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1,2}}")));
        }
        if shape[..dim].iter().any(|&n| n < 2) {
            return Err(Error::InvalidGrid(format!("shape {:?} has an axis shorter than 2", &shape[..dim])));
        }
        if !(spacing.is_finite() && spacing > T::zero()) {
            return Err(Error::InvalidGrid(format!("spacing {spacing} must be finite and positive")));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { dim, shape, spacing, origin })
    }

    /// Grid covering the box `[lo, hi]` (per axis) with `pad_fraction` of the
    /// box width added on each side. Cell centers start at the padded lower
    /// corner plus half a cell.
    pub fn covering(dim: usize, lo: Point<T>, hi: Point<T>, spacing: T, pad_fraction: T) -> Result<Self> {
        if pad_fraction < T::zero() {
            return Err(Error::InvalidGrid("pad fraction must be non-negative".into()));
        }
        let half = T::lit(0.5);
        let mut shape = [1usize; 2];
        let mut origin = [T::zero(); 2];
        for axis in 0..dim {
            let width = hi[axis] - lo[axis];
            if !(width > T::zero()) {
                return Err(Error::InvalidGrid(format!("empty extent on axis {axis}")));
            }
            let pad = width * pad_fraction;
            let total = width + pad + pad;
            let n = (total / spacing).ceil().to_usize().unwrap_or(0).max(2);
            let excess = T::from_usize_lossy(n) * spacing - total;
            origin[axis] = lo[axis] - pad - excess * half + spacing * half;
            shape[axis] = n;
        }
        Self::new(dim, shape, spacing, origin)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> [usize; 2] {
        self.shape
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn origin(&self) -> Point<T> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `h^dim`.
    pub fn cell_volume(&self) -> T {
        self.spacing.powi(self.dim as i32)
    }

    #[inline]
    pub fn index(&self, i0: usize, i1: usize) -> usize {
        i0 * self.shape[1] + i1
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize) {
        (idx / self.shape[1], idx % self.shape[1])
    }

    #[inline]
    pub fn center(&self, idx: usize) -> Point<T> {
        let (i0, i1) = self.unravel(idx);
        [
            self.origin[0] + T::from_usize_lossy(i0) * self.spacing,
            self.origin[1] + T::from_usize_lossy(i1) * self.spacing,
        ]
    }

    /// Fractional index coordinates of a physical point.
    #[inline]
    pub fn to_index_coords(&self, p: Point<T>) -> Point<T> {
        [
            (p[0] - self.origin[0]) / self.spacing,
            (p[1] - self.origin[1]) / self.spacing,
        ]
    }

    /// Whether the cell lies on the outermost ring of the grid.
    pub fn on_edge(&self, idx: usize) -> bool {
        let (i0, i1) = self.unravel(idx);
        let e0 = i0 == 0 || i0 + 1 == self.shape[0];
        if self.dim == 1 {
            e0
        } else {
            e0 || i1 == 0 || i1 + 1 == self.shape[1]
        }
    }

    /// Distance from a cell center to the nearest outer cell face.
    pub fn distance_to_edge(&self, idx: usize) -> T {
        let (i0, i1) = self.unravel(idx);
        let h = self.spacing;
        let half = T::lit(0.5);
        let along = |i: usize, n: usize| T::from_usize_lossy(i.min(n - 1 - i)) * h + h * half;
        let d0 = along(i0, self.shape[0]);
        if self.dim == 1 {
            d0
        } else {
            d0.min(along(i1, self.shape[1]))
        }
    }

    /// Face neighbors (2 in 1D, 4 in 2D) that exist inside the grid.
    pub fn face_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let (i0, i1) = self.unravel(idx);
        let (n0, n1) = (self.shape[0], self.shape[1]);
        let two_d = self.dim == 2;
        let cand: [Option<(usize, usize)>; 4] = [
            i0.checked_sub(1).map(|a| (a, i1)),
            (i0 + 1 < n0).then_some((i0 + 1, i1)),
            i1.checked_sub(1).filter(|_| two_d).map(|b| (i0, b)),
            (two_d && i1 + 1 < n1).then_some((i0, i1 + 1)),
        ];
        cand.into_iter().flatten().map(move |(a, b)| a * n1 + b)
    }

    /// Diameter of the grid box spanned by cell centers.
    pub fn diameter(&self) -> T {
        let last = self.center(self.len() - 1);
        norm(sub(last, self.origin))
    }
}

/// Real-valued function sampled at the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T = f64> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: grid.len(), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid<T>, c: T) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid<T>, mut f: impl FnMut(Point<T>) -> T) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Applies `g` pointwise; the result must stay finite.
    pub fn map(&self, mut g: impl FnMut(T) -> T) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| g(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, mut g: impl FnMut(T, T) -> T) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(self.grid, self.values.iter().zip(&other.values).map(|(&a, &b)| g(a, b)).collect())
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Piecewise-linear (1D) or bilinear (2D) interpolation between cell
    /// centers, zero outside the grid.
    pub fn interpolate(&self, p: Point<T>) -> T {
        let g = &self.grid;
        let q = g.to_index_coords(p);
        let [n0, n1] = g.shape;
        let at = |i0: isize, i1: isize| -> T {
            if i0 < 0 || i1 < 0 || i0 as usize >= n0 || i1 as usize >= n1 {
                T::zero()
            } else {
                self.values[i0 as usize * n1 + i1 as usize]
            }
        };
        let f0 = q[0].floor();
        let a = q[0] - f0;
        let i0 = f0.to_isize().unwrap_or(isize::MIN / 2);
        if g.dim == 1 {
            return at(i0, 0) * (T::one() - a) + at(i0 + 1, 0) * a;
        }
        let f1 = q[1].floor();
        let b = q[1] - f1;
        let i1 = f1.to_isize().unwrap_or(isize::MIN / 2);
        let one = T::one();
        at(i0, i1) * (one - a) * (one - b)
            + at(i0 + 1, i1) * a * (one - b)
            + at(i0, i1 + 1) * (one - a) * b
            + at(i0 + 1, i1 + 1) * a * b
    }
}

/// Test-data generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    Constant { value: f64 },
    /// `height` on the box `|x_k - center_k| <= half_width`, zero elsewhere.
    Step { height: f64, center: [f64; 2], half_width: f64 },
    /// `max(cap - |x - center|^beta, 0)`.
    RadialHolder { beta: f64, center: [f64; 2], cap: f64 },
    /// `height * exp(1 - 1/(1 - r^2/radius^2))` inside the ball, zero outside.
    SmoothBump { height: f64, center: [f64; 2], radius: f64 },
    /// Independent uniform samples in `[-amplitude, amplitude]`.
    Random { seed: u64, amplitude: f64 },
}

pub fn synth_field<T: Real>(kind: &SynthKind, grid: &Grid<T>) -> Result<ScalarField<T>> {
    let dist = |p: Point<T>, c: [f64; 2]| -> f64 {
        let d0 = p[0].to_f64_lossy() - c[0];
        let d1 = if grid.dim() == 2 { p[1].to_f64_lossy() - c[1] } else { 0.0 };
        d0.hypot(d1)
    };
    match *kind {
        SynthKind::Constant { value } => Ok(ScalarField::constant(*grid, T::lit(value))),
        SynthKind::Step { height, center, half_width } => ScalarField::from_fn(*grid, |p| {
            let inside = (0..grid.dim()).all(|k| (p[k].to_f64_lossy() - center[k]).abs() <= half_width);
            if inside {
                T::lit(height)
            } else {
                T::zero()
            }
        }),
        SynthKind::RadialHolder { beta, center, cap } => {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::InvalidParameter(format!("beta = {beta} outside (0, 1]")));
            }
            if !(cap > 0.0) {
                return Err(Error::InvalidParameter(format!("cap = {cap} must be positive")));
            }
            ScalarField::from_fn(*grid, |p| T::lit((cap - dist(p, center).powf(beta)).max(0.0)))
        }
        SynthKind::SmoothBump { height, center, radius } => {
            if !(radius > 0.0) {
                return Err(Error::InvalidParameter(format!("radius = {radius} must be positive")));
            }
            ScalarField::from_fn(*grid, |p| {
                let q = dist(p, center) / radius;
                if q < 1.0 {
                    T::lit(height * (1.0 - 1.0 / (1.0 - q * q)).exp())
                } else {
                    T::zero()
                }
            })
        }
        SynthKind::Random { seed, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values = (0..grid.len()).map(|_| T::lit(rng.gen_range(-amplitude..=amplitude))).collect();
            ScalarField::new(*grid, values)
        }
    }
}

/// Loads a field from CSV or binary PGM (`P5`), detected from the file header.
pub fn load_field<T: Real>(path: impl AsRef<Path>, grid: &Grid<T>) -> Result<ScalarField<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") {
        return parse_pgm(path, &bytes, grid);
    }
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P6") || bytes.starts_with(b"P3") {
        return Err(Error::UnsupportedFormat(format!("{}: only binary grayscale PGM (P5) is accepted", path.display())));
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Error::UnsupportedFormat(format!("{}: not UTF-8 text ({e})", path.display())))?;
    parse_csv(path, text, grid)
}

fn parse_csv<T: Real>(path: &Path, text: &str, grid: &Grid<T>) -> Result<ScalarField<T>> {
    let mut values = Vec::with_capacity(grid.len());
    let mut rows = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row_len = 0usize;
        for (col, tok) in line.split(',').enumerate() {
            let tok = tok.trim();
            let v: T = tok.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("entry {} ({tok:?}) is not a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("entry {} is not finite", col + 1),
                });
            }
            values.push(v);
            row_len += 1;
        }
        if grid.dim() == 2 && row_len != grid.shape()[1] {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("row has {row_len} entries, grid expects {}", grid.shape()[1]),
            });
        }
        rows += 1;
    }
    if values.len() != grid.len() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: rows,
            msg: Error::ShapeMismatch { expected: grid.len(), found: values.len() }.to_string(),
        });
    }
    ScalarField::new(*grid, values)
}

fn parse_pgm<T: Real>(path: &Path, bytes: &[u8], grid: &Grid<T>) -> Result<ScalarField<T>> {
    let perr = |pos: usize, msg: String| Error::Parse { path: path.to_path_buf(), line: pos, msg };
    if grid.dim() != 2 {
        return Err(Error::UnsupportedFormat("PGM input requires a 2D grid".into()));
    }
    // Header: magic, width, height, maxval separated by whitespace and comments.
    let mut pos = 2usize;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        *slot = tok.parse().map_err(|_| perr(start, format!("bad PGM header field at byte {start}")))?;
    }
    pos += 1; // single whitespace after maxval
    let [width, height, maxval] = header;
    if maxval == 0 || maxval > 65535 {
        return Err(perr(pos, format!("maxval {maxval} out of range")));
    }
    if height != grid.shape()[0] || width != grid.shape()[1] {
        return Err(perr(
            pos,
            format!("image is {width}x{height}, grid expects {}x{}", grid.shape()[1], grid.shape()[0]),
        ));
    }
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = width * height * bpp;
    let data = bytes.get(pos..pos + need).ok_or_else(|| {
        perr(pos, format!("pixel data truncated: need {need} bytes, found {}", bytes.len().saturating_sub(pos)))
    })?;
    let scale = T::from_usize_lossy(maxval);
    let values = data
        .chunks(bpp)
        .map(|c| {
            let raw = if bpp == 1 { c[0] as usize } else { (c[0] as usize) << 8 | c[1] as usize };
            T::from_usize_lossy(raw) / scale
        })
        .collect();
    ScalarField::new(*grid, values)
}

/// Writes a field as CSV with round-trip precision (one row per axis-0 index).
pub fn save_csv<T: Real>(field: &ScalarField<T>, path: impl AsRef<Path>) -> Result<()> {
    let mut out = fs::File::create(path)?;
    out.write_all(field_to_csv(field).as_bytes())?;
    Ok(())
}

pub fn field_to_csv<T: Real>(field: &ScalarField<T>) -> String {
    let n1 = field.grid().shape()[1];
    let mut s = String::new();
    for row in field.values().chunks(n1) {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

/// Writes a 2D field as 8-bit binary PGM, clamping to `[0, 1]`.
pub fn save_pgm<T: Real>(field: &ScalarField<T>, path: impl AsRef<Path>) -> Result<()> {
    let g = field.grid();
    if g.dim() != 2 {
        return Err(Error::UnsupportedFormat("PGM output requires a 2D grid".into()));
    }
    let mut out = fs::File::create(path)?;
    write!(out, "P5\n{} {}\n255\n", g.shape()[1], g.shape()[0])?;
    let bytes: Vec<u8> = field
        .values()
        .iter()
        .map(|v| (v.to_f64_lossy().clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(bytes: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(bytes).unwrap();
        f
    }

    #[test]
    fn csv_1d_parse() {
        let g = Grid::<f64>::new_1d(3, 1.0, 0.0).unwrap();
        let f = write_tmp(b"0\n1\n2");
        let field = load_field(f.path(), &g).unwrap();
        assert_eq!(field.values(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn pgm_rescale() {
        let g = Grid::<f64>::new_2d([2, 2], 1.0, [0.0, 0.0]).unwrap();
        let mut bytes = b"P5\n# comment\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 255, 0]);
        let f = write_tmp(&bytes);
        let field = load_field(f.path(), &g).unwrap();
        assert_eq!(field.values(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn csv_shape_mismatch() {
        let g = Grid::<f64>::new_1d(4, 1.0, 0.0).unwrap();
        let f = write_tmp(b"0\n1\n2\n");
        let err = load_field(f.path(), &g).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("expected 4"));
    }

    #[test]
    fn csv_non_numeric_reports_line() {
        let g = Grid::<f64>::new_1d(3, 1.0, 0.0).unwrap();
        let f = write_tmp(b"0\nabc\n2\n");
        match load_field(f.path(), &g).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ascii_pgm_rejected() {
        let g = Grid::<f64>::new_2d([2, 2], 1.0, [0.0, 0.0]).unwrap();
        let f = write_tmp(b"P2\n2 2\n255\n0 1 2 3\n");
        assert!(matches!(load_field(f.path(), &g), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn grid_rejects_short_axis_and_bad_spacing() {
        assert!(Grid::<f64>::new_1d(1, 1.0, 0.0).is_err());
        assert!(Grid::<f64>::new_1d(3, 0.0, 0.0).is_err());
        assert!(Grid::<f64>::new_1d(3, f64::NAN, 0.0).is_err());
        assert!(Grid::<f64>::new_2d([3, 1], 1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn field_rejects_nan() {
        let g = Grid::<f64>::new_1d(2, 1.0, 0.0).unwrap();
        assert!(matches!(ScalarField::new(g, vec![0.0, f64::NAN]), Err(Error::NonFinite(1))));
    }

    #[test]
    fn covering_grid_pads_both_sides() {
        let g = Grid::<f64>::covering(2, [-1.0, -1.0], [1.0, 1.0], 0.125, 0.25).unwrap();
        assert_eq!(g.shape(), [24, 24]);
        let c0 = g.center(0);
        assert!((c0[0] + 1.5 - 0.0625).abs() < 1e-12);
        let last = g.center(g.len() - 1);
        assert!((last[0] - 1.5 + 0.0625).abs() < 1e-12);
    }

    #[test]
    fn synth_examples() {
        let g = Grid::<f64>::new_1d(5, 0.25, -0.5).unwrap();
        let c = synth_field(&SynthKind::Constant { value: 3.0 }, &g).unwrap();
        assert!(c.values().iter().all(|&v| v == 3.0));
        let rh = synth_field(&SynthKind::RadialHolder { beta: 1.0, center: [0.0, 0.0], cap: 1.0 }, &g).unwrap();
        assert!((rh.values()[0] - 0.5).abs() < 1e-15);
        let kind = SynthKind::Random { seed: 7, amplitude: 1.0 };
        assert_eq!(synth_field(&kind, &g).unwrap(), synth_field(&kind, &g).unwrap());
        let bad = SynthKind::RadialHolder { beta: 1.5, center: [0.0, 0.0], cap: 1.0 };
        assert!(synth_field(&bad, &g).is_err());
    }

    #[test]
    fn interpolation_reproduces_linear_function() {
        let g = Grid::<f64>::new_2d([4, 5], 0.5, [1.0, -1.0]).unwrap();
        let f = ScalarField::from_fn(g, |p| 2.0 * p[0] - 3.0 * p[1] + 1.0).unwrap();
        let v = f.interpolate([1.3, -0.2]);
        assert!((v - (2.0 * 1.3 + 0.6 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn f32_fields_work() {
        let g = Grid::<f32>::new_1d(3, 0.5, 0.0).unwrap();
        let f = synth_field(&SynthKind::Step { height: 2.0, center: [0.5, 0.0], half_width: 0.3 }, &g).unwrap();
        assert_eq!(f.values(), &[0.0f32, 2.0, 0.0]);
    }
}
