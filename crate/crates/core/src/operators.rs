//! The multilinear potential operator `𝒯_φ`, its commutator with a symbol
//! `b⃗`, and the multilinear Orlicz maximal operators `ℳ_{φ,X⃗}`.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, Grid, GridFunction};
use crate::kernels::{phi_theta, Kernel};
use crate::orlicz::{luxemburg_norm, NormSpec, YoungFunction, DEFAULT_TOL};

/// Largest kernel table (entries) built by [`PotentialOperator`].
pub const MAX_TABLE: usize = 1 << 24;

/// `1/p = Σ 1/p_i` for exponents `p_i > 1`, with the target `q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentTuple {
    pub p: Vec<f64>,
    pub q: f64,
}

impl ExponentTuple {
    pub fn new(p: Vec<f64>, q: f64) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&pi| !(pi > 1.0 && pi.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "exponents p_i must lie in (1, inf), got {p:?}"
            )));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("target exponent q = {q}")));
        }
        Ok(Self { p, q })
    }

    pub fn m(&self) -> usize {
        self.p.len()
    }

    pub fn harmonic(&self) -> f64 {
        1.0 / self.p.iter().map(|pi| 1.0 / pi).sum::<f64>()
    }

    /// Checks `1/m < p ≤ q`.
    pub fn check_ordering(&self) -> Result<()> {
        let p = self.harmonic();
        if !(p > 1.0 / self.m() as f64 && p <= self.q) {
            return Err(Error::HypothesisUnmet(format!(
                "need 1/m < p <= q, got p = {p}, q = {}",
                self.q
            )));
        }
        Ok(())
    }
}

/// `𝒯_φ` on a fixed grid, with the kernel values of all cell offsets
/// tabulated once when the table fits in [`MAX_TABLE`] entries.
#[derive(Clone, Debug)]
pub struct PotentialOperator {
    kernel: Kernel,
    grid: Grid,
    table: Option<Vec<f64>>,
}

impl PotentialOperator {
    pub fn new(kernel: Kernel, grid: Grid) -> Result<Self> {
        if grid.dim() != kernel.n() {
            return Err(Error::DimensionMismatch(format!(
                "grid dimension {} vs kernel n = {}",
                grid.dim(),
                kernel.n()
            )));
        }
        let d = kernel.dim();
        let width = 2 * grid.resolution() - 1;
        let size = (width as f64).powi(d as i32);
        let table = if size <= MAX_TABLE as f64 {
            let size = size as usize;
            let h = grid.cell_width();
            let res = grid.resolution();
            let half = res - 1;
            // Cell values only see per-block Euclidean norms, so they are even
            // in every offset coordinate: evaluate the orthant of offsets >= 0
            // and mirror.
            let orthant: Vec<f64> = (0..res.pow(d as u32))
                .into_par_iter()
                .map_init(|| vec![0.0; d], |lo, k| {
                    let mut rest = k;
                    for axis in (0..d).rev() {
                        lo[axis] = ((rest % res) as f64 - 0.5) * h;
                        rest /= res;
                    }
                    kernel.cell_value(lo, h)
                })
                .collect();
            let values = (0..size)
                .into_par_iter()
                .map(|k| {
                    let (mut rest, mut idx, mut stride) = (k, 0, 1);
                    for _ in 0..d {
                        idx += (rest % width).abs_diff(half) * stride;
                        rest /= width;
                        stride *= res;
                    }
                    orthant[idx]
                })
                .collect();
            Some(values)
        } else {
            None
        };
        Ok(Self {
            kernel,
            grid,
            table,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check_inputs(&self, fs: &[&GridFunction]) -> Result<()> {
        if fs.len() != self.kernel.m() {
            return Err(Error::DimensionMismatch(format!(
                "{} functions for an m = {} linear operator",
                fs.len(),
                self.kernel.m()
            )));
        }
        for f in fs {
            if f.grid() != &self.grid {
                return Err(Error::DimensionMismatch(
                    "input function lives on a different grid".into(),
                ));
            }
        }
        Ok(())
    }

    /// `𝒯_φ(f⃗)` at every cell center.
    pub fn apply(&self, fs: &[&GridFunction]) -> Result<GridFunction> {
        self.check_inputs(fs)?;
        let grid = &self.grid;
        if fs.iter().any(|f| f.is_zero()) {
            return Ok(GridFunction::zeros(grid));
        }
        let n = grid.dim();
        let m = fs.len();
        let res = grid.resolution();
        let width = 2 * res - 1;
        let scale = grid.cell_width().powi((n * m) as i32);

        // support lists: (table index contribution, multi-index, value)
        let supports: Vec<Vec<(usize, [usize; 3], f64)>> = fs
            .iter()
            .enumerate()
            .map(|(slot, f)| {
                f.values()
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(lin, &v)| {
                        let idx = grid.unravel(lin);
                        let mut part = 0usize;
                        for a in 0..n {
                            part += (res - 1 - idx[a]) * stride(width, n * m, slot * n + a);
                        }
                        (part, idx, v)
                    })
                    .collect()
            })
            .collect();
        let x_strides: Vec<usize> = (0..n)
            .map(|a| (0..m).map(|slot| stride(width, n * m, slot * n + a)).sum())
            .collect();

        let values: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|lin| {
                let x = grid.unravel(lin);
                match &self.table {
                    Some(table) => {
                        let base: usize = (0..n).map(|a| x[a] * x_strides[a]).sum();
                        sum_table(table, &supports, 0, base, 1.0)
                    }
                    None => {
                        let mut lo = vec![0.0; n * m];
                        self.sum_direct(&supports, &x, 0, &mut lo, 1.0)
                    }
                }
            })
            .map(|v| v * scale)
            .collect();
        GridFunction::new(grid.clone(), values)
    }

    fn sum_direct(
        &self,
        supports: &[Vec<(usize, [usize; 3], f64)>],
        x: &[usize; 3],
        slot: usize,
        lo: &mut [f64],
        prod: f64,
    ) -> f64 {
        let n = self.grid.dim();
        let h = self.grid.cell_width();
        if slot == supports.len() {
            return prod * self.kernel.cell_value(lo, h);
        }
        let mut acc = 0.0;
        for (_, idx, v) in &supports[slot] {
            for a in 0..n {
                lo[slot * n + a] = ((x[a] as f64 - idx[a] as f64) - 0.5) * h;
            }
            acc += self.sum_direct(supports, x, slot + 1, lo, prod * v);
        }
        acc
    }
}

fn stride(width: usize, dims: usize, axis: usize) -> usize {
    width.pow((dims - 1 - axis) as u32)
}

fn sum_table(
    table: &[f64],
    supports: &[Vec<(usize, [usize; 3], f64)>],
    slot: usize,
    index: usize,
    prod: f64,
) -> f64 {
    if slot + 1 == supports.len() {
        let mut acc = 0.0;
        for (part, _, v) in &supports[slot] {
            acc += table[index + part] * v;
        }
        return acc * prod;
    }
    let mut acc = 0.0;
    for (part, _, v) in &supports[slot] {
        acc += sum_table(table, supports, slot + 1, index + part, prod * v);
    }
    acc
}

/// `𝒯_φ(f⃗)` on the common grid of `f⃗`.
pub fn apply_potential(kernel: &Kernel, fs: &[&GridFunction]) -> Result<GridFunction> {
    let grid = fs
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no input functions".into()))?
        .grid()
        .clone();
    PotentialOperator::new(kernel.clone(), grid)?.apply(fs)
}

/// Plain nested-loop evaluation of `𝒯_φ(f⃗)`, single threaded, calling
/// [`Kernel::cell_value`] for every tuple of cells. Kept as a slow oracle.
pub fn reference(kernel: &Kernel, fs: &[&GridFunction]) -> Result<GridFunction> {
    let grid = fs
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no input functions".into()))?
        .grid()
        .clone();
    let m = kernel.m();
    let n = grid.dim();
    if fs.len() != m || n != kernel.n() {
        return Err(Error::DimensionMismatch("reference: bad inputs".into()));
    }
    let h = grid.cell_width();
    let total = grid.len();
    let tuples = total.pow(m as u32);
    let mut lo = vec![0.0; n * m];
    let mut out = vec![0.0; total];
    for (x, slot_out) in out.iter_mut().enumerate() {
        let xc = grid.center(x);
        let mut acc = 0.0;
        for t in 0..tuples {
            let mut rest = t;
            let mut prod = 1.0;
            for slot in (0..m).rev() {
                let y = rest % total;
                rest /= total;
                prod *= fs[slot].values()[y];
                let yc = grid.center(y);
                for a in 0..n {
                    lo[slot * n + a] = xc[a] - yc[a] - 0.5 * h;
                }
            }
            if prod != 0.0 {
                acc += kernel.cell_value(&lo, h) * prod;
            }
        }
        *slot_out = acc * h.powi((n * m) as i32);
    }
    GridFunction::new(grid, out)
}

/// `Σ_j [b_j 𝒯_φ(f⃗) − 𝒯_φ(f_1, …, b_j f_j, …, f_m)]`.
pub fn apply_commutator(
    op: &PotentialOperator,
    bs: &[&GridFunction],
    fs: &[&GridFunction],
) -> Result<GridFunction> {
    op.check_inputs(fs)?;
    if bs.len() != fs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbols for {} functions",
            bs.len(),
            fs.len()
        )));
    }
    let base = op.apply(fs)?;
    let mut out = GridFunction::zeros(op.grid());
    for (j, b) in bs.iter().enumerate() {
        b.check_same_grid(&base)?;
        let bf = b.mul(fs[j])?;
        let mut moved: Vec<&GridFunction> = fs.to_vec();
        moved[j] = &bf;
        let shifted = op.apply(&moved)?;
        let term = b.mul(&base)?.sub(&shifted)?;
        out = out.add(&term)?;
    }
    Ok(out)
}

/// Convenience wrapper building the operator from `kernel`.
pub fn commutator(kernel: &Kernel, bs: &[&GridFunction], fs: &[&GridFunction]) -> Result<GridFunction> {
    let grid = fs
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no input functions".into()))?
        .grid()
        .clone();
    apply_commutator(&PotentialOperator::new(kernel.clone(), grid)?, bs, fs)
}

/// The scale factor `φ(|Q|)` of a maximal operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiScaling {
    Constant { value: f64 },
    /// `coef · t^exponent`.
    Power { coef: f64, exponent: f64 },
    /// `Φ_θ(t^{1/n})^power` for the kernel.
    PhiTheta {
        kernel: Kernel,
        theta: f64,
        delta: f64,
        epsilon: f64,
        power: f64,
    },
    /// `𝓑(φ(t)^{1/root})`, e.g. `ψ = 𝓑^m ∘ φ^{1/m}`.
    YoungOf {
        young: YoungFunction,
        inner: Box<PhiScaling>,
        root: f64,
    },
    /// `factor · φ(t)`.
    Scaled { factor: f64, inner: Box<PhiScaling> },
}

/// Sampled evidence about a [`PhiScaling`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiWitness {
    /// `max_{t ≤ s} φ(t)/φ(s)` over the sample; `φ` is essentially
    /// nondecreasing with constant `rho`.
    pub rho: f64,
    /// `φ(t)/t` at the largest sampled `t`.
    pub tail_ratio: f64,
    /// Whether `φ(t)/t` drops across the last decade of samples.
    pub sublinear: bool,
}

impl PhiScaling {
    pub fn one() -> Self {
        Self::Constant { value: 1.0 }
    }

    pub fn phi_theta(kernel: &Kernel, theta: f64, power: f64) -> Self {
        Self::PhiTheta {
            kernel: kernel.clone(),
            theta,
            delta: crate::kernels::DEFAULT_DELTA,
            epsilon: crate::kernels::DEFAULT_EPSILON,
            power,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("φ(t) needs t > 0, got {t}")));
        }
        match self {
            Self::Constant { value } => Ok(*value),
            Self::Power { coef, exponent } => Ok(coef * t.powf(*exponent)),
            Self::PhiTheta {
                kernel,
                theta,
                delta,
                epsilon,
                power,
            } => {
                let side = t.powf(1.0 / kernel.n() as f64);
                Ok(phi_theta(kernel, *theta, side, *delta, *epsilon)?.value.powf(*power))
            }
            Self::YoungOf { young, inner, root } => {
                Ok(young.eval(inner.eval(t)?.powf(1.0 / root)))
            }
            Self::Scaled { factor, inner } => Ok(factor * inner.eval(t)?),
        }
    }

    /// Multiplies the scaling by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Self::Constant { value } => Self::Constant { value: c * value },
            Self::Power { coef, exponent } => Self::Power {
                coef: c * coef,
                exponent: *exponent,
            },
            other => Self::Scaled {
                factor: c,
                inner: Box::new(other.clone()),
            },
        }
    }

    pub fn witness(&self, ts: &[f64]) -> Result<PhiWitness> {
        let vals: Vec<f64> = ts.iter().map(|&t| self.eval(t)).collect::<Result<_>>()?;
        let mut rho: f64 = 1.0;
        let mut running_max: f64 = 0.0;
        // ts ascending: for each s, compare with the max over earlier t
        for &v in &vals {
            if running_max > 0.0 {
                rho = rho.max(if v > 0.0 { running_max / v } else { f64::INFINITY });
            }
            running_max = running_max.max(v);
        }
        let last = ts.len() - 1;
        let tail_ratio = vals[last] / ts[last];
        let cut = ts.iter().position(|&t| t >= ts[last] / 10.0).unwrap_or(0);
        let ratios: Vec<f64> = (cut..=last).map(|k| vals[k] / ts[k]).collect();
        let sublinear = ratios[ratios.len() - 1] < ratios[0];
        Ok(PhiWitness {
            rho,
            tail_ratio,
            sublinear,
        })
    }
}

/// `ℳ_{φ,X⃗}f⃗(x) = max_{Q ∋ x, Q ∈ family} φ(|Q|) ∏ ‖f_i‖_{X_i,Q}`.
pub fn maximal(
    phi: &PhiScaling,
    specs: &[NormSpec],
    fs: &[&GridFunction],
    family: &[Cube],
) -> Result<GridFunction> {
    let first = fs
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no input functions".into()))?;
    let grid = first.grid().clone();
    if specs.len() != fs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} norms for {} functions",
            specs.len(),
            fs.len()
        )));
    }
    for f in fs {
        f.check_same_grid(first)?;
    }
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty cube family".into()));
    }
    let scales = scale_values(phi, family, &grid)?;
    let per_cube: Vec<f64> = family
        .par_iter()
        .map(|q| {
            let s = scales[&q.measure(&grid).to_bits()];
            if s == 0.0 {
                return Ok(0.0);
            }
            let mut prod = s;
            for (f, spec) in fs.iter().zip(specs) {
                prod *= luxemburg_norm(f, q, spec, DEFAULT_TOL)?;
                if prod == 0.0 {
                    break;
                }
            }
            Ok(prod)
        })
        .collect::<Result<_>>()?;
    let mut out = vec![f64::NEG_INFINITY; grid.len()];
    for (q, v) in family.iter().zip(per_cube) {
        q.for_each_cell(&grid, |c| {
            if v > out[c] {
                out[c] = v;
            }
        });
    }
    if let Some(idx) = out.iter().position(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::Uncovered(idx));
    }
    GridFunction::new(grid, out)
}

/// `φ(|Q|)` for every distinct cube measure, keyed by the measure's bits.
fn scale_values(phi: &PhiScaling, family: &[Cube], grid: &Grid) -> Result<HashMap<u64, f64>> {
    let mut measures: Vec<f64> = family.iter().map(|q| q.measure(grid)).collect();
    measures.sort_by(|a, b| a.total_cmp(b));
    measures.dedup();
    let out = Mutex::new(HashMap::new());
    measures.par_iter().try_for_each(|&t| -> Result<()> {
        let v = phi.eval(t)?;
        out.lock().expect("poisoned").insert(t.to_bits(), v);
        Ok(())
    })?;
    Ok(out.into_inner().expect("poisoned"))
}

/// `M_{φ,X}u`, the `m = 1` case.
pub fn maximal_single(
    phi: &PhiScaling,
    spec: &NormSpec,
    u: &GridFunction,
    family: &[Cube],
) -> Result<GridFunction> {
    maximal(phi, std::slice::from_ref(spec), &[u], family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::FamilyKind;
    use crate::kernels::Profile;

    fn indicator(grid: &Grid, a: f64, b: f64) -> GridFunction {
        GridFunction::from_fn(grid, |x| if x[0] >= a && x[0] < b { 1.0 } else { 0.0 }).unwrap()
    }

    fn nearest(grid: &Grid, x: f64) -> usize {
        ((x + grid.half_width()) / grid.cell_width()).floor() as usize
    }

    #[test]
    fn zero_factor_gives_zero() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let k = Kernel::fractional(1, 2, 1.0).unwrap();
        let f = indicator(&g, 0.0, 1.0);
        let z = GridFunction::zeros(&g);
        assert!(apply_potential(&k, &[&f, &z]).unwrap().is_zero());
    }

    #[test]
    fn indicator_convolution() {
        let g = Grid::new(1, 2.0, 128).unwrap();
        let h = g.cell_width();
        let k = Kernel::radial(1, 1, Profile::Indicator { radius: 1.0 }).unwrap();
        let f = indicator(&g, 0.0, 1.0);
        let t = apply_potential(&k, &[&f]).unwrap();
        let i = nearest(&g, 0.0);
        // exact value at x is |[x-1, x+1] ∩ [0, 1)|
        let x = g.coord(i);
        let exact = (x + 1.0).min(1.0) - (x - 1.0).max(0.0);
        assert!((t.values()[i] - exact).abs() <= 2.0 * h);
        assert!((t.values()[i] - 1.0).abs() <= 2.0 * h);
    }

    #[test]
    fn bilinear_matches_reference() {
        let g = Grid::new(1, 2.0, 16).unwrap();
        let k = Kernel::fractional(1, 2, 1.0).unwrap();
        let f = indicator(&g, 0.0, 1.0);
        let fast = apply_potential(&k, &[&f, &f]).unwrap();
        let slow = reference(&k, &[&f, &f]).unwrap();
        for (a, b) in fast.values().iter().zip(slow.values()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn direct_path_matches_table() {
        let g = Grid::new(2, 1.0, 4).unwrap();
        let k = Kernel::fractional(2, 2, 1.5).unwrap();
        let f = GridFunction::from_fn(&g, |x| 1.0 + x[0] * x[0] + 0.5 * x[1]).unwrap();
        let op = PotentialOperator::new(k.clone(), g.clone()).unwrap();
        let direct = PotentialOperator {
            kernel: k.clone(),
            grid: g.clone(),
            table: None,
        };
        let a = op.apply(&[&f, &f]).unwrap();
        let b = direct.apply(&[&f, &f]).unwrap();
        let c = reference(&k, &[&f, &f]).unwrap();
        for i in 0..g.len() {
            assert!((a.values()[i] - b.values()[i]).abs() <= 1e-12 * a.values()[i]);
            assert!((a.values()[i] - c.values()[i]).abs() <= 1e-12 * a.values()[i]);
        }
    }

    #[test]
    fn commutator_identity_symbol() {
        let g = Grid::new(1, 2.0, 128).unwrap();
        let h = g.cell_width();
        let k = Kernel::radial(1, 1, Profile::Indicator { radius: 1.0 }).unwrap();
        let f = indicator(&g, 0.0, 1.0);
        let b = GridFunction::from_fn(&g, |x| x[0]).unwrap();
        let c = commutator(&k, &[&b], &[&f]).unwrap();
        let i = nearest(&g, 0.0);
        // at x: ∫_{[x-1,x+1]∩[0,1)} (x - y) dy, which is -0.5 at x = 0
        assert!((c.values()[i] + 0.5).abs() <= 2.0 * h, "{}", c.values()[i]);
    }

    #[test]
    fn commutator_constant_symbols_vanish() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let k = Kernel::fractional(1, 2, 1.0).unwrap();
        let f1 = GridFunction::from_fn(&g, |x| (x[0] * 3.0).sin().abs()).unwrap();
        let f2 = indicator(&g, -1.0, 0.5);
        let b1 = GridFunction::constant(&g, 2.5).unwrap();
        let b2 = GridFunction::constant(&g, -1.0).unwrap();
        let c = commutator(&k, &[&b1, &b2], &[&f1, &f2]).unwrap();
        assert!(c.max_abs() < 1e-10);
    }

    #[test]
    fn maximal_constants_and_family_oracle() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let fam = g.cube_family(FamilyKind::Centered);
        let c1 = GridFunction::constant(&g, 2.0).unwrap();
        let c2 = GridFunction::constant(&g, 3.0).unwrap();
        let specs = [NormSpec::lebesgue(2.0).unwrap(), NormSpec::lebesgue(3.0).unwrap()];
        let out = maximal(&PhiScaling::one(), &specs, &[&c1, &c2], &fam).unwrap();
        for v in out.values() {
            assert!((v - 6.0).abs() < 1e-9);
        }

        let f = indicator(&g, 0.0, 1.0);
        let l1 = [NormSpec::lebesgue(1.0).unwrap()];
        let m = maximal(&PhiScaling::one(), &l1, &[&f], &fam).unwrap();
        let last = g.len() - 1;
        let brute = fam
            .iter()
            .filter(|q| q.contains(&g, last))
            .map(|q| f.average_over(q))
            .fold(0.0, f64::max);
        assert!((m.values()[last] - brute).abs() < 1e-12);
        // clipped cubes average over their part inside the box
        assert!(brute > 0.0 && brute <= 0.5 + 1e-12);
    }

    #[test]
    fn maximal_below_product_of_maximals() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let fam = g.cube_family(FamilyKind::Dyadic);
        let f1 = GridFunction::from_fn(&g, |x| (x[0] * 2.0).cos().abs()).unwrap();
        let f2 = indicator(&g, -0.5, 1.5);
        let x = [NormSpec::llog(1.0), NormSpec::lebesgue(2.0).unwrap()];
        let joint = maximal(&PhiScaling::one(), &x, &[&f1, &f2], &fam).unwrap();
        let m1 = maximal_single(&PhiScaling::one(), &x[0], &f1, &fam).unwrap();
        let m2 = maximal_single(&PhiScaling::one(), &x[1], &f2, &fam).unwrap();
        for i in 0..g.len() {
            assert!(joint.values()[i] <= m1.values()[i] * m2.values()[i] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn maximal_single_constant_weight() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let fam = g.cube_family(FamilyKind::Centered);
        let u = GridFunction::constant(&g, 1.0).unwrap();
        let l1 = NormSpec::lebesgue(1.0).unwrap();
        let m = maximal_single(&PhiScaling::one(), &l1, &u, &fam).unwrap();
        assert!(m.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let llog = NormSpec::llog(1.0);
        let m = maximal_single(&PhiScaling::one(), &llog, &u, &fam).unwrap();
        // ‖1‖_{L log L} solves (1/λ)(1 + log⁺(1/λ)) = 1, i.e. λ = 1
        assert!(m.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn maximal_dominates_continuous_function() {
        let g = Grid::new(1, 2.0, 64).unwrap();
        let fam = g.cube_family(FamilyKind::Centered);
        let u = GridFunction::from_fn(&g, |x| 1.0 + x[0].sin()).unwrap();
        let l1 = NormSpec::lebesgue(1.0).unwrap();
        let m = maximal_single(&PhiScaling::one(), &l1, &u, &fam).unwrap();
        for (a, b) in m.values().iter().zip(u.values()) {
            assert!(*a >= b - 1e-12);
        }
    }

    #[test]
    fn maximal_scaling_and_coverage() {
        let g = Grid::new(1, 2.0, 16).unwrap();
        let fam = g.cube_family(FamilyKind::Dyadic);
        let f = indicator(&g, 0.0, 1.0);
        let l1 = NormSpec::lebesgue(1.0).unwrap();
        let phi = PhiScaling::Power {
            coef: 1.0,
            exponent: 0.5,
        };
        let a = maximal_single(&phi, &l1, &f, &fam).unwrap();
        let b = maximal_single(&phi.scaled(3.0), &l1, &f, &fam).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert_eq!(3.0 * x, *y);
        }
        let partial: Vec<Cube> = g.dyadic_level(1).into_iter().take(1).collect();
        assert!(matches!(
            maximal_single(&phi, &l1, &f, &partial),
            Err(Error::Uncovered(_))
        ));
    }

    #[test]
    fn phi_witness() {
        let ts: Vec<f64> = (0..60).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)).collect();
        let w = PhiScaling::Power {
            coef: 1.0,
            exponent: 0.5,
        }
        .witness(&ts)
        .unwrap();
        assert_eq!(w.rho, 1.0);
        assert!(w.sublinear);
        let k = Kernel::fractional(1, 1, 0.5).unwrap();
        let w = PhiScaling::phi_theta(&k, 1.0, 1.0).witness(&ts).unwrap();
        assert!(w.rho < 1.0 + 1e-9 && w.sublinear);
    }

    #[test]
    fn exponent_tuple() {
        let e = ExponentTuple::new(vec![2.0, 2.0], 1.0).unwrap();
        assert!((e.harmonic() - 1.0).abs() < 1e-15);
        assert!(e.check_ordering().is_ok());
        let e = ExponentTuple::new(vec![2.0, 2.0], 0.8).unwrap();
        assert!(matches!(e.check_ordering(), Err(Error::HypothesisUnmet(_))));
        assert!(ExponentTuple::new(vec![1.0], 1.0).is_err());
    }
}
