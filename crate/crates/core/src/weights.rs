//! Test weights and symbols, and the cube-family certifiers for BMO,
//! reverse Hölder `RH(s)` and `RH_∞`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, FamilyKind, Grid, GridFunction};
use crate::orlicz::{luxemburg_of_values, NormSpec, YoungFunction, DEFAULT_TOL};

/// Largest RH constant accepted by [`certify_rh`] by default.
pub const RH_CAP: f64 = 100.0;

const SUB_DEPTH: usize = 6;

/// Weight or symbol named in a config: `pow{beta}`, `one`, `bmolog` or `file:path.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WeightSpec {
    Power(f64),
    One,
    BmoLog,
    File(PathBuf),
}

impl WeightSpec {
    pub fn build(&self, grid: &Grid) -> Result<GridFunction> {
        match self {
            Self::Power(beta) => gen_power_weight(*beta, grid),
            Self::One => GridFunction::constant(grid, 1.0),
            Self::BmoLog => gen_bmo_log(grid),
            Self::File(path) => {
                let f = GridFunction::load(path)?;
                if f.grid() != grid {
                    return Err(Error::DimensionMismatch(format!(
                        "{} lives on a different grid",
                        path.display()
                    )));
                }
                Ok(f)
            }
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "one" {
            return Ok(Self::One);
        }
        if s == "bmolog" {
            return Ok(Self::BmoLog);
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(Self::File(PathBuf::from(path)));
        }
        if let Some(b) = s.strip_prefix("pow") {
            let beta = b
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad power in weight `{s}`")))?;
            return Ok(Self::Power(beta));
        }
        Err(Error::Parse(format!(
            "unknown weight `{s}` (expected pow<beta>, one, bmolog or file:<path>)"
        )))
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Power(b) => write!(f, "pow{b}"),
            Self::One => write!(f, "one"),
            Self::BmoLog => write!(f, "bmolog"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

fn touches_origin(lo: &[f64], width: f64) -> bool {
    lo.iter().all(|&c| c <= 0.0 && c + width >= 0.0)
}

/// Cell average of a radial function by recursive `4^n` subsampling into
/// the sub-cells that touch the origin.
fn radial_cell_average(lo: &[f64], width: f64, depth: usize, f: &impl Fn(f64) -> f64) -> f64 {
    let n = lo.len();
    let sub = width / 4.0;
    let count = 4usize.pow(n as u32);
    let mut corner = vec![0.0; n];
    let mut total = 0.0;
    for k in 0..count {
        let mut rest = k;
        for a in (0..n).rev() {
            corner[a] = lo[a] + (rest % 4) as f64 * sub;
            rest /= 4;
        }
        if depth > 0 && touches_origin(&corner, sub) {
            total += radial_cell_average(&corner, sub, depth - 1, f);
        } else {
            let r = corner.iter().map(|c| (c + 0.5 * sub).powi(2)).sum::<f64>().sqrt();
            total += f(r);
        }
    }
    total / count as f64
}

/// Samples `g(|x|)` at cell centers, replacing cells whose closure holds the
/// origin by `origin(h)` for `n = 1` or a subsampled average otherwise.
fn radial_weight(
    grid: &Grid,
    g: impl Fn(f64) -> f64,
    origin_1d: impl Fn(f64) -> f64,
) -> Result<GridFunction> {
    let h = grid.cell_width();
    let n = grid.dim();
    let values = (0..grid.len())
        .map(|lin| {
            let x = grid.center(lin);
            let lo: Vec<f64> = (0..n).map(|a| x[a] - 0.5 * h).collect();
            if touches_origin(&lo, h) {
                if n == 1 {
                    origin_1d(h)
                } else {
                    radial_cell_average(&lo, h, SUB_DEPTH, &g)
                }
            } else {
                g(x[..n].iter().map(|v| v * v).sum::<f64>().sqrt())
            }
        })
        .collect();
    GridFunction::new(grid.clone(), values)
}

/// `w(x) = |x|^β`.
pub fn gen_power_weight(beta: f64, grid: &Grid) -> Result<GridFunction> {
    let n = grid.dim() as f64;
    if !(beta > -n) {
        return Err(Error::InvalidParameter(format!(
            "|x|^beta is not locally integrable for beta = {beta} <= -n"
        )));
    }
    if beta == 0.0 {
        return GridFunction::constant(grid, 1.0);
    }
    radial_weight(grid, |r| r.powf(beta), |h| h.powf(beta) / (beta + 1.0))
}

/// `b(x) = log|x|`.
pub fn gen_bmo_log(grid: &Grid) -> Result<GridFunction> {
    radial_weight(grid, f64::ln, |h| h.ln() - 1.0)
}

/// Oscillation of a symbol over a cube family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmoNorm {
    /// `sup_Q (1/|Q|) ∫_Q |b − b_Q|`.
    pub l1: f64,
    /// `sup_Q ‖b − b_Q‖_{exp L, Q}`.
    pub exp_l: f64,
}

pub fn bmo_norm(b: &GridFunction, family: &[Cube]) -> Result<BmoNorm> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty cube family".into()));
    }
    let exp = NormSpec::Young(YoungFunction::Exp);
    let per: Vec<(f64, f64)> = family
        .par_iter()
        .map(|q| {
            let vals = b.restrict(q);
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let dev: Vec<f64> = vals.iter().map(|v| (v - mean).abs()).collect();
            let l1 = dev.iter().sum::<f64>() / dev.len() as f64;
            let e = luxemburg_of_values(&dev, &exp, DEFAULT_TOL)?;
            Ok((l1, e))
        })
        .collect::<Result<_>>()?;
    Ok(BmoNorm {
        l1: per.iter().map(|p| p.0).fold(0.0, f64::max),
        exp_l: per.iter().map(|p| p.1).fold(0.0, f64::max),
    })
}

/// `max_Q ((1/|Q|)∫_Q w^s)^{1/s} / ((1/|Q|)∫_Q w)`; cubes where `w`
/// vanishes count as ratio 1.
pub fn rh_check(w: &GridFunction, s: f64, family: &[Cube]) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::InvalidParameter(format!("RH(s) needs s > 1, got {s}")));
    }
    check_weight(w, family)?;
    Ok(family
        .par_iter()
        .map(|q| {
            let vals = w.restrict(q);
            let len = vals.len() as f64;
            let avg = vals.iter().sum::<f64>() / len;
            if avg == 0.0 {
                return 1.0;
            }
            let big = vals.iter().copied().fold(0.0, f64::max);
            // scaled to keep w^s finite
            let avg_s = vals.iter().map(|v| (v / big).powf(s)).sum::<f64>() / len;
            big * avg_s.powf(1.0 / s) / avg
        })
        .reduce(|| 0.0, f64::max))
}

/// `max_Q (sup_Q w) / ((1/|Q|)∫_Q w)`.
pub fn rh_inf_check(w: &GridFunction, family: &[Cube]) -> Result<f64> {
    check_weight(w, family)?;
    Ok(family
        .par_iter()
        .map(|q| {
            let vals = w.restrict(q);
            let avg = vals.iter().sum::<f64>() / vals.len() as f64;
            if avg == 0.0 {
                return 1.0;
            }
            vals.iter().copied().fold(0.0, f64::max) / avg
        })
        .reduce(|| 0.0, f64::max))
}

fn check_weight(w: &GridFunction, family: &[Cube]) -> Result<()> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty cube family".into()));
    }
    if !w.is_nonnegative() {
        return Err(Error::InvalidParameter("weights must be nonnegative".into()));
    }
    Ok(())
}

/// `rh_check` with a certification threshold: errors with
/// [`Error::HypothesisUnmet`] when the constant is not finite or exceeds `cap`.
pub fn certify_rh(w: &GridFunction, s: f64, family: &[Cube], cap: f64) -> Result<f64> {
    let c = rh_check(w, s, family)?;
    if !c.is_finite() || c > cap {
        return Err(Error::HypothesisUnmet(format!(
            "weight is not RH({s}) on the family: constant {c} exceeds {cap}"
        )));
    }
    Ok(c)
}

/// RH(s) constants of one weight spec over a sequence of grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhSweep {
    pub resolutions: Vec<usize>,
    pub ratios: Vec<f64>,
    /// Ratios grow by at least 3% at every refinement.
    pub diverging: bool,
}

pub fn rh_refinement(spec: &WeightSpec, s: f64, grids: &[Grid], kind: FamilyKind) -> Result<RhSweep> {
    let mut ratios = Vec::new();
    for g in grids {
        let w = spec.build(g)?;
        ratios.push(rh_check(&w, s, &g.cube_family(kind))?);
    }
    let diverging = ratios.len() >= 2
        && ratios.windows(2).all(|r| r[1] > 1.03 * r[0]);
    Ok(RhSweep {
        resolutions: grids.iter().map(|g| g.resolution()).collect(),
        ratios,
        diverging,
    })
}
