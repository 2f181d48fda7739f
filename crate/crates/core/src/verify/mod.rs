//! Harnesses that evaluate both sides of each weighted inequality on a
//! corpus of test tuples and report empirical constants.
//!
//! Every harness runs at resolution `N` and again at `2N`; the corpus max
//! ratio must move by less than [`STABILITY_TOL`] for the report to be
//! marked stable. Constants are measured, never compared against a value.

mod corpus;
mod coifman;
mod strong;
mod weak;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::grid::{Cube, FamilyKind, Grid, GridFunction};
use crate::kernels::Kernel;
use crate::operators::{apply_commutator, PotentialOperator};
use crate::weights::WeightSpec;

pub use coifman::{verify_coifman, verify_ftd, AINF_RH};
pub use corpus::{corpus, corpus_function, CorpusKind};
pub use strong::{
    testing_condition_w, verify_fefferman_stein, verify_strong, StrongBundle, StrongSetup,
    TestingCondition,
};
pub use weak::{
    level_curve, lorentz_weak_quasinorm, verify_control, verify_weak_maximal, weak_maximal_lhs,
    ControlWeight, WeakLhs, CONTROL_DELTAS, LAMBDA_POINTS,
};

/// Largest relative change of the corpus max ratio between `N` and `2N`
/// for a report to count as stable.
pub const STABILITY_TOL: f64 = 0.25;

/// Default number of tuples per corpus.
pub const CORPUS_SIZE: usize = 20;

/// Shared setup of every harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub n: usize,
    pub m: usize,
    /// Half width `L` of the box `[-L, L)^n`.
    pub half_width: f64,
    /// Cells per axis `N`.
    pub resolution: usize,
    pub kernel: Kernel,
    pub corpus_size: usize,
    pub seed: u64,
    /// Cube family of the maximal operators.
    pub family: FamilyKind,
    /// Also run at `2N` and judge stability.
    pub refine: bool,
    /// Symbol `b_j` used by every commutator slot.
    pub symbol: WeightSpec,
    /// Factor applied to slot `i` of every corpus tuple; missing entries are 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slot_scale: Vec<f64>,
}

impl HarnessConfig {
    pub fn new(n: usize, m: usize, half_width: f64, resolution: usize, kernel: Kernel) -> Self {
        Self {
            n,
            m,
            half_width,
            resolution,
            kernel,
            corpus_size: CORPUS_SIZE,
            seed: 0,
            family: FamilyKind::Centered,
            refine: true,
            symbol: WeightSpec::BmoLog,
            slot_scale: Vec::new(),
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.kernel.n() != self.n || self.kernel.m() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "kernel is for (n, m) = ({}, {}), harness for ({}, {})",
                self.kernel.n(),
                self.kernel.m(),
                self.n,
                self.m
            )));
        }
        if self.corpus_size == 0 {
            return Err(Error::InvalidParameter("empty corpus".into()));
        }
        Grid::new(self.n, self.half_width, self.resolution)?;
        Ok(())
    }

    pub(crate) fn grid(&self, resolution: usize) -> Result<Grid> {
        Grid::new(self.n, self.half_width, resolution)
    }

    pub(crate) fn resolutions(&self) -> Vec<usize> {
        if self.refine {
            vec![self.resolution, 2 * self.resolution]
        } else {
            vec![self.resolution]
        }
    }

    pub(crate) fn params(&self) -> Value {
        serde_json::json!({
            "n": self.n,
            "m": self.m,
            "L": self.half_width,
            "N": self.resolution,
            "kernel": self.kernel.to_string(),
            "corpus_size": self.corpus_size,
            "seed": self.seed,
            "family": format!("{:?}", self.family).to_lowercase(),
            "symbol": self.symbol.to_string(),
            "slot_scale": self.slot_scale,
        })
    }
}

/// Theorem case `i`, `ii` or `iii`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    I,
    Ii,
    Iii,
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "i" | "1" => Ok(Self::I),
            "ii" | "2" => Ok(Self::Ii),
            "iii" | "3" => Ok(Self::Iii),
            other => Err(Error::Parse(format!("unknown case `{other}` (expected i, ii or iii)"))),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::I => "i",
            Self::Ii => "ii",
            Self::Iii => "iii",
        })
    }
}

/// One corpus tuple's two sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl Instance {
    /// `lhs / rhs`, with `0/0 = 0`; an error when only the right side vanishes.
    pub fn new(index: usize, lhs: f64, rhs: f64) -> Result<Self> {
        let ratio = ratio(lhs, rhs)?;
        Ok(Self {
            index,
            lhs,
            rhs,
            ratio,
        })
    }
}

pub fn ratio(lhs: f64, rhs: f64) -> Result<f64> {
    if !(lhs.is_finite() && rhs.is_finite()) {
        return Err(Error::NonConvergence(format!(
            "non-finite side: lhs = {lhs}, rhs = {rhs}"
        )));
    }
    if lhs == 0.0 {
        return Ok(0.0);
    }
    if rhs == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "right side vanishes while the left side is {lhs}"
        )));
    }
    Ok(lhs / rhs)
}

/// Corpus max ratio at `N` and `2N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub coarse_n: usize,
    pub fine_n: usize,
    pub coarse_max_ratio: f64,
    pub fine_max_ratio: f64,
    pub relative_change: f64,
}

/// Two-column plot series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<[f64; 2]>,
}

/// Result of one harness run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub theorem: String,
    pub case: String,
    pub params: Value,
    /// Instances at the base resolution `N`.
    pub instances: Vec<Instance>,
    pub max_ratio: f64,
    pub stable: Option<bool>,
    pub refinement: Option<Refinement>,
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<Series>,
}

impl InequalityReport {
    /// Assembles a report from per-resolution instance lists (`[N]` or `[N, 2N]`).
    pub(crate) fn assemble(
        theorem: &str,
        case: &str,
        params: Value,
        resolutions: &[usize],
        mut runs: Vec<Vec<Instance>>,
        notes: Vec<String>,
    ) -> Self {
        let max_of = |v: &[Instance]| v.iter().map(|i| i.ratio).fold(0.0, f64::max);
        let maxes: Vec<f64> = runs.iter().map(|r| max_of(r)).collect();
        let refinement = if runs.len() >= 2 {
            let (c, f) = (maxes[0], maxes[1]);
            let rel = if c == f { 0.0 } else { (c - f).abs() / c.max(f) };
            Some(Refinement {
                coarse_n: resolutions[0],
                fine_n: resolutions[1],
                coarse_max_ratio: c,
                fine_max_ratio: f,
                relative_change: rel,
            })
        } else {
            None
        };
        let stable = refinement.as_ref().map(|r| r.relative_change < STABILITY_TOL);
        Self {
            theorem: theorem.into(),
            case: case.into(),
            params,
            instances: runs.swap_remove(0),
            max_ratio: maxes[0],
            stable,
            refinement,
            notes,
            series: Vec::new(),
        }
    }
}

/// Per-resolution context shared by the harnesses.
pub(crate) struct Level {
    pub grid: Grid,
    pub op: PotentialOperator,
    pub family: Vec<Cube>,
    pub tuples: Vec<Vec<GridFunction>>,
    pub symbols: Vec<GridFunction>,
}

impl Level {
    pub fn new(cfg: &HarnessConfig, resolution: usize, with_symbol: bool) -> Result<Self> {
        let grid = cfg.grid(resolution)?;
        let op = PotentialOperator::new(cfg.kernel.clone(), grid.clone())?;
        let family = grid.cube_family(cfg.family);
        let mut tuples = corpus(&grid, cfg.m, cfg.corpus_size, cfg.seed)?;
        for tuple in &mut tuples {
            for (f, c) in tuple.iter_mut().zip(&cfg.slot_scale) {
                if *c != 1.0 {
                    *f = f.scale(*c)?;
                }
            }
        }
        let symbols = if with_symbol {
            let b = cfg.symbol.build(&grid)?;
            vec![b; cfg.m]
        } else {
            Vec::new()
        };
        Ok(Self {
            grid,
            op,
            family,
            tuples,
            symbols,
        })
    }

    /// `𝒯_{b⃗^ℓ,φ}(f⃗)`: the operator for `ℓ = 0`, the full commutator for `ℓ = 1`.
    pub fn apply(&self, ell: u8, fs: &[&GridFunction]) -> Result<GridFunction> {
        if ell == 0 {
            self.op.apply(fs)
        } else {
            let bs: Vec<&GridFunction> = self.symbols.iter().collect();
            apply_commutator(&self.op, &bs, fs)
        }
    }
}

pub(crate) fn check_ell(ell: u8) -> Result<()> {
    if ell > 1 {
        return Err(Error::InvalidParameter(format!("ell must be 0 or 1, got {ell}")));
    }
    Ok(())
}

/// `∫ |g|^p w` on the grid.
pub(crate) fn weighted_power_integral(g: &GridFunction, w: &GridFunction, p: f64) -> Result<f64> {
    Ok(g.zip_with(w, |a, b| a.abs().powf(p) * b)?.integral())
}

/// `∏ u_i^{e}` pointwise.
pub(crate) fn weight_product(us: &[GridFunction], exponents: &[f64]) -> Result<GridFunction> {
    let mut out = GridFunction::constant(us[0].grid(), 1.0)?;
    for (u, e) in us.iter().zip(exponents) {
        out = out.zip_with(u, |a, b| a * b.powf(*e))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(ratio(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(ratio(1.0, 2.0).unwrap(), 0.5);
        assert!(ratio(1.0, 0.0).is_err());
        assert!(ratio(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn case_strings() {
        for c in ["i", "ii", "iii"] {
            assert_eq!(c.parse::<Case>().unwrap().to_string(), c);
        }
        assert!("iv".parse::<Case>().is_err());
    }

    #[test]
    fn assemble_marks_stability() {
        let a = vec![Instance::new(0, 1.0, 2.0).unwrap()];
        let b = vec![Instance::new(0, 1.1, 2.0).unwrap()];
        let r = InequalityReport::assemble("t", "i", Value::Null, &[8, 16], vec![a, b], vec![]);
        assert_eq!(r.max_ratio, 0.5);
        assert_eq!(r.stable, Some(true));
        let c = vec![Instance::new(0, 1.0, 1.0).unwrap()];
        let d = vec![Instance::new(0, 2.0, 1.0).unwrap()];
        let r = InequalityReport::assemble("t", "i", Value::Null, &[8, 16], vec![c, d], vec![]);
        assert_eq!(r.stable, Some(false));
    }
}
