//! Dyadic lattice of the grid box, the maximal function `ℳ_{3𝒟}`, the
//! Calderón–Zygmund selection of maximal cubes at thresholds `a^k`, and the
//! two discretized sums that bound `∫[|𝒯 f⃗| u]^q`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, Grid, GridFunction};
use crate::kernels::{phi_bar, phi_theta, Kernel};
use crate::operators::PotentialOperator;
use crate::orlicz::{luxemburg_norm, NormSpec, DEFAULT_TOL};

/// Most levels `k` kept in one decomposition.
pub const MAX_LEVELS: usize = 64;

/// Dyadic subcubes of the grid box, level 0 being the box itself.
#[derive(Clone, Debug)]
pub struct DyadicLattice {
    grid: Grid,
    levels: Vec<Vec<Cube>>,
}

impl DyadicLattice {
    pub fn new(grid: &Grid) -> Self {
        let levels = (0..=grid.depth()).map(|l| grid.dyadic_level(l)).collect();
        Self {
            grid: grid.clone(),
            levels,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, level: usize) -> &[Cube] {
        &self.levels[level]
    }

    /// Index within `level` of the cube containing cell `lin`.
    pub fn index_of(&self, level: usize, lin: usize) -> usize {
        let idx = self.grid.unravel(lin);
        let per_axis = 1usize << level;
        let side = self.grid.resolution() >> level;
        (0..self.grid.dim()).fold(0, |acc, a| acc * per_axis + idx[a] / side)
    }

    /// Parent index at `level - 1` of cube `k` at `level`.
    fn parent_of(&self, level: usize, k: usize) -> usize {
        let per_axis = 1usize << level;
        let mut rest = k;
        let mut digits = [0usize; 3];
        for a in (0..self.grid.dim()).rev() {
            digits[a] = rest % per_axis;
            rest /= per_axis;
        }
        (0..self.grid.dim()).fold(0, |acc, a| acc * (per_axis / 2) + digits[a] / 2)
    }
}

fn check_inputs(hs: &[&GridFunction], lat: &DyadicLattice) -> Result<()> {
    if hs.is_empty() {
        return Err(Error::DimensionMismatch("no input functions".into()));
    }
    for h in hs {
        if h.grid() != lat.grid() {
            return Err(Error::DimensionMismatch("function not on the lattice grid".into()));
        }
        if !h.is_nonnegative() {
            return Err(Error::InvalidParameter("ℳ_3D needs nonnegative functions".into()));
        }
    }
    Ok(())
}

/// `∏ ‖h_i‖_{L,3Q}` for every dyadic cube, level by level; averages over
/// `3Q` clipped to the box and normalized by the clipped measure.
pub fn cube_products(hs: &[&GridFunction], lat: &DyadicLattice) -> Result<Vec<Vec<f64>>> {
    check_inputs(hs, lat)?;
    let grid = lat.grid();
    Ok(lat
        .levels
        .iter()
        .map(|cubes| {
            cubes
                .par_iter()
                .map(|q| {
                    let big = q.dilate3(grid);
                    hs.iter().map(|h| h.average_over(&big)).product()
                })
                .collect()
        })
        .collect())
}

/// `ℳ_{3𝒟}h⃗(x) = sup_{x ∈ Q ∈ 𝒟} ∏ ‖h_i‖_{L,3Q}`.
pub fn m3d(hs: &[&GridFunction], lat: &DyadicLattice) -> Result<GridFunction> {
    let prods = cube_products(hs, lat)?;
    Ok(m3d_from(&prods, lat))
}

fn m3d_from(prods: &[Vec<f64>], lat: &DyadicLattice) -> GridFunction {
    let grid = lat.grid();
    let values = (0..grid.len())
        .map(|lin| {
            (0..prods.len())
                .map(|l| prods[l][lat.index_of(l, lin)])
                .fold(0.0, f64::max)
        })
        .collect();
    GridFunction::new(grid.clone(), values).expect("finite products")
}

/// A selected maximal cube `Q_{k,η}` with its carved set `E_{k,η}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CzCube {
    pub cube: Cube,
    pub level: usize,
    /// `∏ ‖h_i‖_{L,3Q}`.
    pub prod_norm: f64,
    /// Cells of `E_{k,η} = Q_{k,η} \ 𝒟_{k+1}`, ascending.
    pub e_cells: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CzLevel {
    pub k: i32,
    pub cubes: Vec<CzCube>,
}

/// Calderón–Zygmund decomposition of `h⃗` with base `a`.
#[derive(Clone, Debug)]
pub struct CzDecomposition {
    pub a: f64,
    pub n: usize,
    pub m: usize,
    pub grid: Grid,
    pub levels: Vec<CzLevel>,
    /// `ℳ_{3𝒟}h⃗` on the grid.
    pub m3d: GridFunction,
}

/// Default base `a = 2·4^{nm}`.
pub fn default_base(n: usize, m: usize) -> f64 {
    2.0 * 4f64.powi((n * m) as i32)
}

/// Selects, for each `k` in the band, the maximal dyadic cubes with
/// `∏ ‖h_i‖_{L,3Q} > a^k`, and carves `E_{k,η}`.
///
/// The band starts at the smallest `k` with `2^{nm} a^k ≥ ∏ ‖h_i‖_{L,3Q_top}`
/// (so the upper selection bound also holds for the whole box, which has no
/// parent) and ends at the largest `k` with `a^k < max ℳ_{3𝒟}h⃗`.
pub fn cz_decompose(hs: &[&GridFunction], a: f64, lat: &DyadicLattice) -> Result<CzDecomposition> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("CZ base needs a > 1, got {a}")));
    }
    let prods = cube_products(hs, lat)?;
    let grid = lat.grid().clone();
    let n = grid.dim();
    let m = hs.len();
    let mfun = m3d_from(&prods, lat);
    let max = mfun.values().iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::InvalidParameter("CZ decomposition of a zero tuple".into()));
    }
    let top = prods[0][0];
    let ln_a = a.ln();
    let k_hi = ((max.ln() / ln_a).ceil() - 1.0) as i32;
    let k_lo = if top > 0.0 {
        ((top.ln() - (n * m) as f64 * 2f64.ln()) / ln_a).ceil() as i32
    } else {
        let min_pos = mfun
            .values()
            .iter()
            .copied()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
        (min_pos.ln() / ln_a).floor() as i32
    };
    let k_lo = k_lo.max(k_hi + 1 - MAX_LEVELS as i32);

    let mut levels = Vec::new();
    for k in k_lo..=k_hi {
        let thr = a.powi(k);
        let next = a.powi(k + 1);
        let mut cubes = Vec::new();
        // top-down: a cube is maximal when it exceeds the threshold and no
        // ancestor does
        let mut covered: Vec<bool> = vec![false; 1];
        for (l, cubes_l) in lat.levels.iter().enumerate() {
            let mut now = vec![false; cubes_l.len()];
            for (idx, q) in cubes_l.iter().enumerate() {
                let above = l > 0 && covered[lat.parent_of(l, idx)];
                if above {
                    now[idx] = true;
                    continue;
                }
                let p = prods[l][idx];
                if p > thr {
                    now[idx] = true;
                    let mut e_cells = Vec::new();
                    q.for_each_cell(&grid, |c| {
                        if mfun.values()[c] <= next {
                            e_cells.push(c);
                        }
                    });
                    e_cells.sort_unstable();
                    cubes.push(CzCube {
                        cube: q.clone(),
                        level: l,
                        prod_norm: p,
                        e_cells,
                    });
                }
            }
            covered = now;
        }
        levels.push(CzLevel { k, cubes });
    }
    Ok(CzDecomposition {
        a,
        n,
        m,
        grid,
        levels,
        m3d: mfun,
    })
}

/// Checked properties of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzInvariants {
    pub cube_count: usize,
    pub e_disjoint: bool,
    pub e_inside_q: bool,
    pub selection_bound: bool,
    pub union_identity: bool,
    /// `max |Q| / |E|` over selected cubes (infinite when some `E` is empty).
    pub max_q_over_e: f64,
}

impl CzDecomposition {
    pub fn invariants(&self) -> CzInvariants {
        let grid = &self.grid;
        let mut owner = vec![false; grid.len()];
        let mut e_disjoint = true;
        let mut e_inside_q = true;
        let mut selection_bound = true;
        let mut union_identity = true;
        let mut max_ratio: f64 = 0.0;
        let mut count = 0;
        let upper = 2f64.powi((self.n * self.m) as i32);
        for level in &self.levels {
            let thr = self.a.powi(level.k);
            let mut in_union = vec![false; grid.len()];
            for c in &level.cubes {
                count += 1;
                if !(c.prod_norm > thr && c.prod_norm <= upper * thr * (1.0 + 1e-12)) {
                    selection_bound = false;
                }
                c.cube.for_each_cell(grid, |x| in_union[x] = true);
                for &x in &c.e_cells {
                    if owner[x] {
                        e_disjoint = false;
                    }
                    owner[x] = true;
                    if !c.cube.contains(grid, x) {
                        e_inside_q = false;
                    }
                }
                let q = c.cube.cell_count(grid) as f64;
                let e = c.e_cells.len() as f64;
                max_ratio = max_ratio.max(if e > 0.0 { q / e } else { f64::INFINITY });
            }
            for (x, &inside) in in_union.iter().enumerate() {
                if inside != (self.m3d.values()[x] > thr) {
                    union_identity = false;
                }
            }
        }
        CzInvariants {
            cube_count: count,
            e_disjoint,
            e_inside_q,
            selection_bound,
            union_identity,
            max_q_over_e: max_ratio,
        }
    }

    pub fn cube_count(&self) -> usize {
        self.levels.iter().map(|l| l.cubes.len()).sum()
    }

    /// Export form `{a, levels: [{k, cubes: [{corner, side, prod_norm}], E_masks}]}`,
    /// each mask a list of `[start, length]` runs of linear cell indices.
    pub fn export(&self) -> CzExport {
        let grid = &self.grid;
        CzExport {
            a: self.a,
            levels: self
                .levels
                .iter()
                .map(|l| CzExportLevel {
                    k: l.k,
                    cubes: l
                        .cubes
                        .iter()
                        .map(|c| CzExportCube {
                            corner: c.cube.corner(grid),
                            side: c.cube.side(grid),
                            prod_norm: c.prod_norm,
                        })
                        .collect(),
                    e_masks: l.cubes.iter().map(|c| run_length(&c.e_cells)).collect(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzExport {
    pub a: f64,
    pub levels: Vec<CzExportLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzExportLevel {
    pub k: i32,
    pub cubes: Vec<CzExportCube>,
    #[serde(rename = "E_masks")]
    pub e_masks: Vec<Vec<[usize; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzExportCube {
    pub corner: Vec<f64>,
    pub side: f64,
    pub prod_norm: f64,
}

/// `[start, length]` runs of a sorted index list.
pub fn run_length(sorted: &[usize]) -> Vec<[usize; 2]> {
    let mut runs: Vec<[usize; 2]> = Vec::new();
    for &i in sorted {
        match runs.last_mut() {
            Some(r) if r[0] + r[1] == i => r[1] += 1,
            _ => runs.push([i, 1]),
        }
    }
    runs
}

pub fn expand_runs(runs: &[[usize; 2]]) -> Vec<usize> {
    runs.iter().flat_map(|r| r[0]..r[0] + r[1]).collect()
}

/// `Φ_q(side)^q`, memoized by side.
struct PhiCache<'a> {
    kernel: &'a Kernel,
    q: f64,
    delta: f64,
    epsilon: f64,
    values: HashMap<u64, f64>,
}

impl<'a> PhiCache<'a> {
    fn get(&mut self, side: f64) -> Result<f64> {
        if let Some(v) = self.values.get(&side.to_bits()) {
            return Ok(*v);
        }
        let v = phi_theta(self.kernel, self.q, side, self.delta, self.epsilon)?
            .value
            .powf(self.q);
        self.values.insert(side.to_bits(), v);
        Ok(v)
    }
}

/// Both sums of the discretization bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationRhs {
    pub first: f64,
    pub second: f64,
    pub total: f64,
}

/// The right side of the discretization bound without the constant:
///
/// `Σ_{k,η} Φ_q(l(Q⁰))^q ‖u^q‖_{L(log L)^{ℓq},3Q⁰} ∏‖f_i‖^q_{L,3Q⁰} |E⁰|`
/// `+ ℓ Σ_{k,η} Φ_q(l(Qʲ))^q ‖u‖^q_{L,3Qʲ} ∏‖f_i‖^q_{L(log L)^{δ_ij},3Qʲ} |Eʲ|`.
///
/// `cz0` is built from `f⃗`; `czj` (needed when `ell = 1`) from `f⃗` with
/// `u` in slot `j`.
#[allow(clippy::too_many_arguments)]
pub fn discretization_rhs(
    kernel: &Kernel,
    fs: &[&GridFunction],
    u: &GridFunction,
    q: f64,
    ell: u8,
    j: usize,
    cz0: &CzDecomposition,
    czj: Option<&CzDecomposition>,
    delta: f64,
    epsilon: f64,
) -> Result<DiscretizationRhs> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("discretization needs 0 < q <= 1, got {q}")));
    }
    if ell > 1 || j >= fs.len() {
        return Err(Error::InvalidParameter(format!("bad ell = {ell} or j = {j}")));
    }
    if fs.iter().any(|f| f.is_zero()) {
        return Ok(DiscretizationRhs {
            first: 0.0,
            second: 0.0,
            total: 0.0,
        });
    }
    if cz0.cube_count() == 0 {
        return Err(Error::InvalidParameter("empty decomposition".into()));
    }
    let grid = cz0.grid.clone();
    let cell = grid.cell_volume();
    let mut cache = PhiCache {
        kernel,
        q,
        delta,
        epsilon,
        values: HashMap::new(),
    };
    let uq = u.map(|v| v.abs().powf(q))?;
    let llog_uq = if ell == 0 {
        NormSpec::lebesgue(1.0)?
    } else {
        NormSpec::llog(q)
    };
    let l1 = NormSpec::lebesgue(1.0)?;
    let llog1 = NormSpec::llog(1.0);

    let mut first = 0.0;
    for level in &cz0.levels {
        for c in &level.cubes {
            if c.e_cells.is_empty() {
                continue;
            }
            let big = c.cube.dilate3(&grid);
            let phi = cache.get(c.cube.side(&grid))?;
            let mut term = phi * luxemburg_norm(&uq, &big, &llog_uq, DEFAULT_TOL)?;
            for f in fs {
                term *= luxemburg_norm(f, &big, &l1, DEFAULT_TOL)?.powf(q);
            }
            first += term * c.e_cells.len() as f64 * cell;
        }
    }
    let mut second = 0.0;
    if ell == 1 {
        let czj = czj.ok_or_else(|| {
            Error::InvalidParameter("ell = 1 needs the second decomposition".into())
        })?;
        for level in &czj.levels {
            for c in &level.cubes {
                if c.e_cells.is_empty() {
                    continue;
                }
                let big = c.cube.dilate3(&grid);
                let phi = cache.get(c.cube.side(&grid))?;
                let mut term = phi * luxemburg_norm(u, &big, &l1, DEFAULT_TOL)?.powf(q);
                for (i, f) in fs.iter().enumerate() {
                    let spec = if i == j { &llog1 } else { &l1 };
                    term *= luxemburg_norm(f, &big, spec, DEFAULT_TOL)?.powf(q);
                }
                second += term * c.e_cells.len() as f64 * cell;
            }
        }
    }
    Ok(DiscretizationRhs {
        first,
        second,
        total: first + second,
    })
}

/// `∫ [|𝒯_{b_j^ℓ,φ}(f⃗)| u]^q`, where `ℓ = 0` is `𝒯_φ` and `ℓ = 1` the `j`-th
/// commutator term `b_j 𝒯_φ(f⃗) − 𝒯_φ(…, b_j f_j, …)`.
pub fn discretization_lhs(
    op: &PotentialOperator,
    symbol: Option<(&GridFunction, usize)>,
    fs: &[&GridFunction],
    u: &GridFunction,
    q: f64,
) -> Result<f64> {
    let t = op.apply(fs)?;
    let out = match symbol {
        None => t,
        Some((b, j)) => {
            if j >= fs.len() {
                return Err(Error::InvalidParameter(format!("slot {j} out of range")));
            }
            let bf = b.mul(fs[j])?;
            let mut moved = fs.to_vec();
            moved[j] = &bf;
            b.mul(&t)?.sub(&op.apply(&moved)?)?
        }
    };
    Ok(out.zip_with(u, |a, w| (a.abs() * w).powf(q))?.integral())
}

/// `Σ_{Q ⊆ Q₀} φ̄(l(Q)/2)^q |3Q|^{mq+1} ‖f‖_{ψ,3Q}` divided by
/// `Φ_q(l(Q₀))^q |3Q₀| ‖f‖_{ψ,3Q₀}`; `0` when both vanish.
pub fn dyadic_tail_check(
    kernel: &Kernel,
    q0: &Cube,
    psi: &NormSpec,
    f: &GridFunction,
    q: f64,
    seed: u64,
) -> Result<f64> {
    let grid = f.grid().clone();
    if q0.is_clipped() || !q0.side_cells().is_power_of_two() {
        return Err(Error::InvalidParameter("tail check needs a dyadic cube".into()));
    }
    let m = kernel.m() as f64;
    let mut lhs = 0.0;
    let mut bar_cache: HashMap<u64, f64> = HashMap::new();
    let mut layer = vec![q0.clone()];
    while !layer.is_empty() {
        let side = layer[0].side(&grid);
        let bar = match bar_cache.get(&side.to_bits()) {
            Some(v) => *v,
            None => {
                let v = phi_bar(kernel, side / 2.0, seed)?;
                bar_cache.insert(side.to_bits(), v);
                v
            }
        };
        for c in &layer {
            let big = c.dilate3(&grid);
            let norm = luxemburg_norm(f, &big, psi, DEFAULT_TOL)?;
            lhs += bar.powf(q) * big.measure(&grid).powf(m * q + 1.0) * norm;
        }
        layer = layer.iter().flat_map(|c| c.children(&grid)).collect();
    }
    let big0 = q0.dilate3(&grid);
    let phi = phi_theta(
        kernel,
        q,
        q0.side(&grid),
        crate::kernels::DEFAULT_DELTA,
        crate::kernels::DEFAULT_EPSILON,
    )?
    .value
    .powf(q);
    let rhs = phi * big0.measure(&grid) * luxemburg_norm(f, &big0, psi, DEFAULT_TOL)?;
    if rhs == 0.0 {
        if lhs == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::InvalidParameter("tail check: RHS vanishes with LHS > 0".into()));
    }
    Ok(lhs / rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indicator(grid: &Grid, a: f64, b: f64) -> GridFunction {
        GridFunction::from_fn(grid, |x| if x[0] >= a && x[0] < b { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn lattice_indices() {
        let g = Grid::new(2, 1.0, 8).unwrap();
        let lat = DyadicLattice::new(&g);
        assert_eq!(lat.depth(), 3);
        for l in 0..=3 {
            for (k, q) in lat.level(l).iter().enumerate() {
                q.for_each_cell(&g, |c| assert_eq!(lat.index_of(l, c), k));
                if l > 0 {
                    let p = &lat.level(l - 1)[lat.parent_of(l, k)];
                    q.for_each_cell(&g, |c| assert!(p.contains(&g, c)));
                }
            }
        }
    }

    #[test]
    fn m3d_constants() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let lat = DyadicLattice::new(&g);
        let a = GridFunction::constant(&g, 2.0).unwrap();
        let b = GridFunction::constant(&g, 0.5).unwrap();
        let v = m3d(&[&a, &b], &lat).unwrap();
        assert!(v.values().iter().all(|x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn m3d_indicator_brute_force() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let lat = DyadicLattice::new(&g);
        let h = indicator(&g, 0.0, 1.0);
        let v = m3d(&[&h], &lat).unwrap();
        for lin in 0..g.len() {
            let brute = g
                .dyadic_cubes()
                .iter()
                .filter(|q| q.contains(&g, lin))
                .map(|q| h.average_over(&q.dilate3(&g)))
                .fold(0.0, f64::max);
            assert_eq!(v.values()[lin], brute);
            if (0.0..1.0).contains(&g.coord(lin)) {
                assert!(v.values()[lin] >= 1.0 / 3.0);
            }
        }
    }

    #[test]
    fn m3d_monotone() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let lat = DyadicLattice::new(&g);
        let h = indicator(&g, 0.0, 1.0);
        let k = GridFunction::from_fn(&g, |x| if (0.0..1.0).contains(&x[0]) { 1.5 } else { 0.2 })
            .unwrap();
        let a = m3d(&[&h, &h], &lat).unwrap();
        let b = m3d(&[&k, &h], &lat).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!(x <= y);
        }
    }

    #[test]
    fn constant_function_single_top_cube() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let lat = DyadicLattice::new(&g);
        let h = GridFunction::constant(&g, 5.0).unwrap();
        let cz = cz_decompose(&[&h], 3.0, &lat).unwrap();
        for level in &cz.levels {
            assert!(3f64.powi(level.k) < 5.0);
            assert_eq!(level.cubes.len(), 1);
            assert_eq!(level.cubes[0].level, 0);
        }
        let inv = cz.invariants();
        assert!(inv.e_disjoint && inv.selection_bound && inv.union_identity);
        assert!(cz_decompose(&[&h], 1.0, &lat).is_err());
    }

    #[test]
    fn two_bumps_separate() {
        let g = Grid::new(1, 4.0, 128).unwrap();
        let lat = DyadicLattice::new(&g);
        let h = GridFunction::from_fn(&g, |x| {
            if (-3.0..-2.5).contains(&x[0]) || (2.5..3.0).contains(&x[0]) {
                8.0
            } else {
                0.0
            }
        })
        .unwrap();
        let cz = cz_decompose(&[&h], 4.0, &lat).unwrap();
        let inv = cz.invariants();
        assert!(inv.e_disjoint && inv.e_inside_q && inv.selection_bound && inv.union_identity);
        let top = cz.levels.last().unwrap();
        assert!(top.cubes.len() >= 2);
        let left = top.cubes.iter().any(|c| c.cube.corner(&g)[0] < 0.0);
        let right = top.cubes.iter().any(|c| c.cube.corner(&g)[0] > 0.0);
        assert!(left && right);
    }

    #[test]
    fn export_roundtrip() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        let lat = DyadicLattice::new(&g);
        let h = GridFunction::from_fn(&g, |x| (1.0 - x[0].abs()).max(0.0)).unwrap();
        let cz = cz_decompose(&[&h, &h], default_base(1, 2), &lat).unwrap();
        let json = serde_json::to_string(&cz.export()).unwrap();
        assert!(json.contains("\"E_masks\""));
        let back: CzExport = serde_json::from_str(&json).unwrap();
        for (l, el) in cz.levels.iter().zip(&back.levels) {
            for (c, runs) in l.cubes.iter().zip(&el.e_masks) {
                assert_eq!(expand_runs(runs), c.e_cells);
            }
        }
    }

    #[test]
    fn run_length_encoding() {
        assert_eq!(run_length(&[1, 2, 3, 7, 9, 10]), vec![[1, 3], [7, 1], [9, 2]]);
        assert!(run_length(&[]).is_empty());
    }

    #[test]
    fn zero_component_gives_zero_sums() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let lat = DyadicLattice::new(&g);
        let k = Kernel::fractional(1, 2, 1.0).unwrap();
        let f = indicator(&g, 0.0, 1.0);
        let z = GridFunction::zeros(&g);
        let u = GridFunction::constant(&g, 1.0).unwrap();
        let cz = cz_decompose(&[&f, &f], 32.0, &lat).unwrap();
        let rhs = discretization_rhs(&k, &[&f, &z], &u, 1.0, 0, 0, &cz, None, 1.0, 0.5).unwrap();
        assert_eq!(rhs.total, 0.0);
        let op = PotentialOperator::new(k, g.clone()).unwrap();
        assert_eq!(discretization_lhs(&op, None, &[&f, &z], &u, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn discretization_ratio_stable() {
        let k = Kernel::fractional(1, 1, 0.5).unwrap();
        let mut ratios = Vec::new();
        for res in [64, 128] {
            let g = Grid::new(1, 2.0, res).unwrap();
            let lat = DyadicLattice::new(&g);
            let f = indicator(&g, 0.0, 1.0);
            let u = GridFunction::constant(&g, 1.0).unwrap();
            let cz = cz_decompose(&[&f], default_base(1, 1), &lat).unwrap();
            let rhs = discretization_rhs(&k, &[&f], &u, 1.0, 0, 0, &cz, None, 1.0, 0.5).unwrap();
            let op = PotentialOperator::new(k.clone(), g.clone()).unwrap();
            let lhs = discretization_lhs(&op, None, &[&f], &u, 1.0).unwrap();
            ratios.push(lhs / rhs.total);
        }
        assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
        assert!((ratios[0] - ratios[1]).abs() / ratios[1] < 0.25, "{ratios:?}");
    }

    #[test]
    fn tail_check_levels() {
        let g = Grid::new(1, 4.0, 64).unwrap();
        let k = Kernel::fractional(1, 1, 0.5).unwrap();
        let f = GridFunction::constant(&g, 1.0).unwrap();
        let l1 = NormSpec::lebesgue(1.0).unwrap();
        let mut ratios = Vec::new();
        for level in 2..=4 {
            // a dyadic cube away from the boundary so 3Q is not clipped
            let q0 = g.dyadic_level(level)[(1 << level) / 2].clone();
            ratios.push(dyadic_tail_check(&k, &q0, &l1, &f, 1.0, 0).unwrap());
        }
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 1.2 * 1.2, "{ratios:?}");
        let z = GridFunction::zeros(&g);
        let q0 = g.dyadic_level(2)[1].clone();
        assert_eq!(dyadic_tail_check(&k, &q0, &l1, &z, 1.0, 0).unwrap(), 0.0);
    }
}
