//! Uniform grids over a box `[-L, L)^n`, grid-aligned cubes and cell-sampled
//! functions.
//!
//! Every integral is a midpoint sum: the value at a cell center times the cell
//! volume. Cell-constant data is therefore integrated exactly, which keeps the
//! discrete identities used downstream (dyadic additivity, level-set
//! measures) free of quadrature error.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

/// Uniform grid with `resolution` cells per axis over `[-half_width, half_width)^dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    resolution: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, resolution: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension n = {dim} must be 1, 2 or 3"
            )));
        }
        if !resolution.is_power_of_two() || resolution < 4 {
            return Err(Error::InvalidGrid(format!(
                "resolution N = {resolution} must be a power of two >= 4"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width L = {half_width} must be positive"
            )));
        }
        Ok(Self {
            dim,
            half_width,
            resolution,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Cell width `h = 2L / N`.
    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_width / self.resolution as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dim as i32)
    }

    /// Total number of cells, `N^n`.
    pub fn len(&self) -> usize {
        self.resolution.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of dyadic levels below the whole box (`log2 N`).
    pub fn depth(&self) -> usize {
        self.resolution.trailing_zeros() as usize
    }

    /// Cell-center coordinate of axis index `i`.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.cell_width()
    }

    /// Row-major multi-index of a linear cell index; unused axes are zero.
    pub fn unravel(&self, mut lin: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            idx[axis] = lin % self.resolution;
            lin /= self.resolution;
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.resolution + i)
    }

    pub fn center(&self, lin: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(lin);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    /// The whole box as a cube.
    pub fn whole(&self) -> Cube {
        Cube {
            lo: [0; MAX_DIM],
            extent: [self.resolution; MAX_DIM],
            side_cells: self.resolution,
            clipped: false,
        }
    }

    /// All dyadic subcubes of the box, from the box itself down to single
    /// cells, level by level in row-major order.
    pub fn dyadic_cubes(&self) -> Vec<Cube> {
        (0..=self.depth())
            .flat_map(|level| self.dyadic_level(level))
            .collect()
    }

    /// Dyadic cubes of side `N / 2^level` cells, row-major.
    pub fn dyadic_level(&self, level: usize) -> Vec<Cube> {
        let per_axis = 1usize << level;
        let side = self.resolution >> level;
        let count = per_axis.pow(self.dim as u32);
        (0..count)
            .map(|k| {
                let mut lo = [0; MAX_DIM];
                let mut rest = k;
                for axis in (0..self.dim).rev() {
                    lo[axis] = (rest % per_axis) * side;
                    rest /= per_axis;
                }
                Cube::new_unchecked(lo, side)
            })
            .collect()
    }

    /// Cubes centered at every cell with half-width `r` cells for
    /// `r ∈ {0, 1, 2, 4, …, N}`, clipped to the box and deduplicated.
    pub fn centered_cubes(&self) -> Vec<Cube> {
        let n = self.resolution as isize;
        let mut radii = vec![0isize];
        let mut r = 1;
        while r <= n {
            radii.push(r);
            r *= 2;
        }
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &r in &radii {
            for lin in 0..self.len() {
                let idx = self.unravel(lin);
                let mut lo = [0; MAX_DIM];
                let mut extent = [1; MAX_DIM];
                let mut clipped = false;
                for axis in 0..self.dim {
                    let a = idx[axis] as isize - r;
                    let b = idx[axis] as isize + r + 1;
                    let (ca, cb) = (a.max(0), b.min(n));
                    clipped |= ca != a || cb != b;
                    lo[axis] = ca as usize;
                    extent[axis] = (cb - ca) as usize;
                }
                if seen.insert((lo, extent)) {
                    out.push(Cube {
                        lo,
                        extent,
                        side_cells: (2 * r + 1) as usize,
                        clipped,
                    });
                }
            }
        }
        out
    }

    pub fn cube_family(&self, kind: FamilyKind) -> Vec<Cube> {
        match kind {
            FamilyKind::Dyadic => self.dyadic_cubes(),
            FamilyKind::Centered => self.centered_cubes(),
        }
    }
}

/// Finite cube families standing in for "all cubes".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Dyadic,
    Centered,
}

impl std::str::FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dyadic" => Ok(Self::Dyadic),
            "centered" | "centered-dyadic-lengths" => Ok(Self::Centered),
            other => Err(Error::Parse(format!("unknown cube family `{other}`"))),
        }
    }
}

/// A grid-aligned box of cells. Unclipped cubes have equal extent on every
/// axis; cubes cut by the box boundary carry `clipped = true`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    lo: [usize; MAX_DIM],
    extent: [usize; MAX_DIM],
    side_cells: usize,
    clipped: bool,
}

impl Cube {
    fn new_unchecked(lo: [usize; MAX_DIM], side: usize) -> Self {
        Self {
            lo,
            extent: [side; MAX_DIM],
            side_cells: side,
            clipped: false,
        }
    }

    /// Cube with lower corner at `corner` (coordinates) and side `side`,
    /// both of which must fall on the cell lattice.
    pub fn from_coords(grid: &Grid, corner: &[f64], side: f64) -> Result<Self> {
        if corner.len() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "corner has {} coordinates, grid has dimension {}",
                corner.len(),
                grid.dim()
            )));
        }
        let h = grid.cell_width();
        let snap = |v: f64, what: &str| -> Result<isize> {
            let k = (v / h).round();
            if (k * h - v).abs() > 1e-9 * h.max(v.abs()) {
                return Err(Error::Misaligned(format!(
                    "{what} {v} is not a multiple of the cell width {h}"
                )));
            }
            Ok(k as isize)
        };
        let side_cells = snap(side, "side")?;
        if side_cells <= 0 {
            return Err(Error::InvalidParameter(format!(
                "cube side {side} must be positive"
            )));
        }
        let mut lo = [0; MAX_DIM];
        for (axis, &c) in corner.iter().enumerate() {
            let k = snap(c + grid.half_width(), "corner coordinate")?;
            if k < 0 || k + side_cells > grid.resolution() as isize {
                return Err(Error::Misaligned(format!(
                    "cube [{c}, {}) leaves the box on axis {axis}",
                    c + side
                )));
            }
            lo[axis] = k as usize;
        }
        Ok(Self::new_unchecked(lo, side_cells as usize))
    }

    pub fn lo(&self) -> &[usize; MAX_DIM] {
        &self.lo
    }

    pub fn extent(&self) -> &[usize; MAX_DIM] {
        &self.extent
    }

    pub fn is_clipped(&self) -> bool {
        self.clipped
    }

    /// Nominal side in cells (before clipping).
    pub fn side_cells(&self) -> usize {
        self.side_cells
    }

    /// Nominal side length `l(Q)`.
    pub fn side(&self, grid: &Grid) -> f64 {
        self.side_cells as f64 * grid.cell_width()
    }

    pub fn cell_count(&self, grid: &Grid) -> usize {
        self.extent[..grid.dim()].iter().product()
    }

    /// Lebesgue measure of the (clipped) cube.
    pub fn measure(&self, grid: &Grid) -> f64 {
        self.cell_count(grid) as f64 * grid.cell_volume()
    }

    /// Lower corner in coordinates.
    pub fn corner(&self, grid: &Grid) -> Vec<f64> {
        let h = grid.cell_width();
        (0..grid.dim())
            .map(|a| -grid.half_width() + self.lo[a] as f64 * h)
            .collect()
    }

    pub fn contains(&self, grid: &Grid, lin: usize) -> bool {
        let idx = grid.unravel(lin);
        (0..grid.dim()).all(|a| idx[a] >= self.lo[a] && idx[a] < self.lo[a] + self.extent[a])
    }

    /// The concentric dilate `3Q`, clipped to the box.
    pub fn dilate3(&self, grid: &Grid) -> Cube {
        let n = grid.resolution() as isize;
        let mut lo = [0; MAX_DIM];
        let mut extent = [1; MAX_DIM];
        let mut clipped = false;
        for axis in 0..grid.dim() {
            let e = self.extent[axis] as isize;
            let a = self.lo[axis] as isize - e;
            let b = self.lo[axis] as isize + 2 * e;
            let (ca, cb) = (a.max(0), b.min(n));
            clipped |= ca != a || cb != b;
            lo[axis] = ca as usize;
            extent[axis] = (cb - ca) as usize;
        }
        Cube {
            lo,
            extent,
            side_cells: 3 * self.side_cells,
            clipped,
        }
    }

    /// Dyadic children (only meaningful for unclipped cubes of even side).
    pub fn children(&self, grid: &Grid) -> Vec<Cube> {
        let half = self.side_cells / 2;
        if half == 0 {
            return Vec::new();
        }
        (0..1usize << grid.dim())
            .map(|mask| {
                let mut lo = self.lo;
                for (axis, v) in lo.iter_mut().enumerate().take(grid.dim()) {
                    if mask >> (grid.dim() - 1 - axis) & 1 == 1 {
                        *v += half;
                    }
                }
                Cube::new_unchecked(lo, half)
            })
            .collect()
    }

    /// Visits the linear indices of the cube's cells in row-major order.
    pub fn for_each_cell(&self, grid: &Grid, mut f: impl FnMut(usize)) {
        let n = grid.resolution();
        let [l0, l1, l2] = self.lo;
        let [e0, e1, e2] = self.extent;
        match grid.dim() {
            1 => (l0..l0 + e0).for_each(f),
            2 => {
                for i in l0..l0 + e0 {
                    for j in l1..l1 + e1 {
                        f(i * n + j);
                    }
                }
            }
            _ => {
                for i in l0..l0 + e0 {
                    for j in l1..l1 + e1 {
                        let row = (i * n + j) * n;
                        for k in l2..l2 + e2 {
                            f(row + k);
                        }
                    }
                }
            }
        }
    }

    pub fn cells(&self, grid: &Grid) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cell_count(grid));
        self.for_each_cell(grid, |c| out.push(c));
        out
    }
}

/// A real function sampled at the cell centers of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    nonnegative: bool,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value {} at cell {i}",
                values[i]
            )));
        }
        let nonnegative = values.iter().all(|&v| v >= 0.0);
        Ok(Self {
            grid,
            values,
            nonnegative,
        })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|lin| f(&grid.center(lin)[..dim]))
            .collect();
        Self::new(grid.clone(), values)
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::new(grid.clone(), vec![c; grid.len()])
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            nonnegative: true,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.abs()).collect(),
            nonnegative: true,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch(
                "functions live on different grids".into(),
            ));
        }
        Ok(())
    }

    /// Midpoint integral over the whole box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Midpoint integral over a grid-aligned cube.
    pub fn integral_over(&self, cube: &Cube) -> f64 {
        let mut s = 0.0;
        cube.for_each_cell(&self.grid, |c| s += self.values[c]);
        s * self.grid.cell_volume()
    }

    /// Average over a cube (normalized by its clipped measure).
    pub fn average_over(&self, cube: &Cube) -> f64 {
        let mut s = 0.0;
        cube.for_each_cell(&self.grid, |c| s += self.values[c]);
        s / cube.cell_count(&self.grid) as f64
    }

    /// Values on the cells of `cube`, row-major.
    pub fn restrict(&self, cube: &Cube) -> Vec<f64> {
        let mut out = Vec::with_capacity(cube.cell_count(&self.grid));
        cube.for_each_cell(&self.grid, |c| out.push(self.values[c]));
        out
    }

    /// Writes `# n,L,N` (with the actual values) and one value per line.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let mut s = String::new();
        writeln!(
            s,
            "# {},{},{}",
            self.grid.dim(),
            self.grid.half_width(),
            self.grid.resolution()
        )
        .expect("write to string");
        for v in &self.values {
            writeln!(s, "{v}").expect("write to string");
        }
        w.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid function file".into()))??;
        let header = header
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing `# n,L,N` header".into()))?;
        let parts: Vec<&str> = header.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("bad header `#{header}`")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad header field `{s}`: {e}")))
        };
        let grid = Grid::new(
            num(parts[0])? as usize,
            num(parts[1])?,
            num(parts[2])? as usize,
        )?;
        let mut values = Vec::with_capacity(grid.len());
        for line in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(
                t.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("bad value `{t}`: {e}")))?,
            );
        }
        Self::new(grid, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_grid_layout() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        assert_eq!(g.cell_width(), 0.25);
        for k in 0..8 {
            assert!((g.coord(k) - (-1.0 + 0.125 + 0.25 * k as f64)).abs() < 1e-15);
        }
        let g2 = Grid::new(2, 2.0, 4).unwrap();
        assert_eq!(g2.len(), 16);
        assert_eq!(g2.cell_width(), 1.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(Grid::new(1, 1.0, 3), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(1, 1.0, 2), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(4, 1.0, 8), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::new(0, 1.0, 8), Err(Error::InvalidGrid(_))));
        assert!(Grid::new(1, 0.0, 8).is_err());
    }

    #[test]
    fn ravel_roundtrip() {
        let g = Grid::new(3, 1.0, 4).unwrap();
        for lin in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(lin)), lin);
        }
    }

    #[test]
    fn integrate_simple_cases() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        assert_eq!(GridFunction::zeros(&g).integral(), 0.0);
        assert!((GridFunction::constant(&g, 1.0).unwrap().integral() - 2.0).abs() < 1e-15);
        let ind = |g: &Grid| {
            GridFunction::from_fn(g, |x| if (0.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 })
                .unwrap()
        };
        assert!((ind(&g).integral() - 1.0).abs() < 1e-15);
        let g16 = Grid::new(1, 1.0, 16).unwrap();
        assert!((ind(&g16).integral() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_over_aligned_cube() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let f = GridFunction::from_fn(&g, |x| x[0] + 2.0).unwrap();
        let q = Cube::from_coords(&g, &[0.0], 0.5).unwrap();
        // midpoints 0.125, 0.375
        assert!((f.integral_over(&q) - (2.125 + 2.375) * 0.25).abs() < 1e-15);
        assert!(matches!(
            Cube::from_coords(&g, &[0.1], 0.5),
            Err(Error::Misaligned(_))
        ));
        assert!(matches!(
            Cube::from_coords(&g, &[0.0], 0.3),
            Err(Error::Misaligned(_))
        ));
        assert!(Cube::from_coords(&g, &[0.5], 1.0).is_err());
    }

    #[test]
    fn dyadic_counts() {
        let g = Grid::new(1, 1.0, 4).unwrap();
        let fam = g.cube_family(FamilyKind::Dyadic);
        assert_eq!(fam.len(), 7);
        assert_eq!(fam.iter().filter(|q| q.side_cells() == 4).count(), 1);
        assert_eq!(fam.iter().filter(|q| q.side_cells() == 2).count(), 2);
        assert_eq!(fam.iter().filter(|q| q.side_cells() == 1).count(), 4);
        let g2 = Grid::new(2, 1.0, 4).unwrap();
        assert_eq!(g2.cube_family(FamilyKind::Dyadic).len(), 21);
    }

    #[test]
    fn centered_family_matches_enumeration() {
        // Independent enumeration of clipped intervals [c-r, c+r] for
        // r in {0,1,2,4}, deduplicated as (lo, hi) pairs.
        let g = Grid::new(1, 1.0, 4).unwrap();
        let mut expected = BTreeSet::new();
        for r in [0i32, 1, 2, 4] {
            for c in 0i32..4 {
                expected.insert(((c - r).max(0), (c + r).min(3)));
            }
        }
        let fam = g.cube_family(FamilyKind::Centered);
        let got: BTreeSet<(i32, i32)> = fam
            .iter()
            .map(|q| (q.lo()[0] as i32, (q.lo()[0] + q.extent()[0] - 1) as i32))
            .collect();
        assert_eq!(fam.len(), got.len());
        assert_eq!(got, expected);
        assert_eq!(fam.len(), 9);
    }

    #[test]
    fn every_cell_is_covered_by_centered_family() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let mut covered = vec![false; g.len()];
        for q in g.centered_cubes() {
            q.for_each_cell(&g, |c| covered[c] = true);
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn children_sum_to_parent() {
        let g = Grid::new(2, 1.0, 16).unwrap();
        let f = GridFunction::from_fn(&g, |x| (3.0 * x[0]).sin() + x[1] * x[1]).unwrap();
        let ints = GridFunction::from_fn(&g, |x| ((x[0] + 1.0) * 8.0).floor() + x[1].signum())
            .unwrap();
        for q in g.dyadic_cubes().iter().filter(|q| q.side_cells() > 1) {
            let parent = f.integral_over(q);
            let kids: f64 = q.children(&g).iter().map(|c| f.integral_over(c)).sum();
            assert!((parent - kids).abs() <= 1e-12 * parent.abs().max(1.0));
            let parent = ints.integral_over(q);
            let kids: f64 = q.children(&g).iter().map(|c| ints.integral_over(c)).sum();
            assert_eq!(parent, kids);
        }
    }

    #[test]
    fn dilate_is_clipped_at_boundary() {
        let g = Grid::new(1, 1.0, 8).unwrap();
        let q = Cube::from_coords(&g, &[-1.0], 0.5).unwrap();
        let d = q.dilate3(&g);
        assert!(d.is_clipped());
        assert_eq!(d.cell_count(&g), 4);
        let inner = Cube::from_coords(&g, &[0.0], 0.25).unwrap().dilate3(&g);
        assert!(!inner.is_clipped());
        assert_eq!(inner.cell_count(&g), 3);
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        // Errors for a smooth integrand at N, 2N, 4N should shrink by ~4.
        let exact = 2.0 * (1.0f64).sin(); // ∫_{-1}^{1} cos
        let err = |n: usize| {
            let g = Grid::new(1, 1.0, n).unwrap();
            (GridFunction::from_fn(&g, |x| x[0].cos()).unwrap().integral() - exact).abs()
        };
        let (e1, e2, e3) = (err(16), err(32), err(64));
        for r in [e1 / e2, e2 / e3] {
            assert!((r - 4.0).abs() < 0.05, "ratio {r}");
        }
    }

    #[test]
    fn csv_roundtrip() {
        let g = Grid::new(2, 1.5, 4).unwrap();
        let f = GridFunction::from_fn(&g, |x| x[0] - 0.3 * x[1]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# 2,1.5,4\n"));
        let back = GridFunction::read_csv(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn integral_is_linear(
                vals in proptest::collection::vec(-10.0f64..10.0, 16),
                wals in proptest::collection::vec(-10.0f64..10.0, 16),
                a in -5.0f64..5.0,
                b in -5.0f64..5.0,
            ) {
                let g = Grid::new(1, 1.0, 16).unwrap();
                let f = GridFunction::new(g.clone(), vals).unwrap();
                let h = GridFunction::new(g.clone(), wals).unwrap();
                let combo = f.zip_with(&h, |x, y| a * x + b * y).unwrap();
                let q = Cube::from_coords(&g, &[-0.5], 1.0).unwrap();
                let lhs = combo.integral_over(&q);
                let rhs = a * f.integral_over(&q) + b * h.integral_over(&q);
                let scale = (a.abs() * f.abs().integral_over(&q) + b.abs() * h.abs().integral_over(&q)).max(1e-300);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            }
        }
    }
}
