//! Two-weight strong type bounds and their Fefferman–Stein weighted form.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_ell, weight_product, HarnessConfig, Instance, InequalityReport, Level, Case};
use crate::error::{Error, Result};
use crate::grid::{Cube, FamilyKind, Grid, GridFunction};
use crate::kernels::Kernel;
use crate::operators::{maximal_single, ExponentTuple, PhiScaling};
use crate::orlicz::{luxemburg_norm, NormSpec, DEFAULT_TOL};
use crate::weights::{bmo_norm, WeightSpec};

/// Inputs of the testing quantity
/// `W = max_j sup_Q Φ_θ(l(Q)) |Q|^{1/q−1/p} ‖u^γ‖_{X,Q}^{1/γ} ∏_i ‖v_i^{-1}‖_{Y_ij,Q}`.
#[derive(Clone, Debug)]
pub struct TestingCondition {
    pub theta: f64,
    pub gamma: f64,
    pub x: NormSpec,
    /// `y[i][j]`, an `m × m` matrix.
    pub y: Vec<Vec<NormSpec>>,
    pub u: GridFunction,
    pub v: Vec<GridFunction>,
    pub kernel: Kernel,
    pub exponents: ExponentTuple,
    pub family: FamilyKind,
}

pub fn testing_condition_w(tc: &TestingCondition) -> Result<f64> {
    let m = tc.exponents.m();
    if tc.v.len() != m || tc.y.len() != m || tc.y.iter().any(|row| row.len() != m) {
        return Err(Error::DimensionMismatch(format!(
            "testing condition needs {m} weights and an {m}x{m} norm matrix"
        )));
    }
    if !(tc.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", tc.gamma)));
    }
    let grid = tc.u.grid().clone();
    let mut vinv = Vec::with_capacity(m);
    for (i, v) in tc.v.iter().enumerate() {
        v.check_same_grid(&tc.u)?;
        if let Some(c) = v.values().iter().position(|x| !(*x > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "weight v_{} vanishes on cell {c}, so v^-1 is not defined",
                i + 1
            )));
        }
        vinv.push(v.map(|x| 1.0 / x)?);
    }
    let ug = tc.u.map(|x| x.abs().powf(tc.gamma))?;
    let expo = 1.0 / tc.exponents.q - 1.0 / tc.exponents.harmonic();
    let family = grid.cube_family(tc.family);
    let phi = PhiScaling::phi_theta(&tc.kernel, tc.theta, 1.0);
    let scales = measure_scales(&phi, &family, &grid)?;
    let per: Vec<f64> = family
        .par_iter()
        .map(|q| {
            let mu = q.measure(&grid);
            let lead = scales[&mu.to_bits()] * mu.powf(expo);
            let un = luxemburg_norm(&ug, q, &tc.x, DEFAULT_TOL)?;
            if un == 0.0 || lead == 0.0 {
                return Ok(0.0);
            }
            let lead = lead * un.powf(1.0 / tc.gamma);
            let vn: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    (0..m)
                        .map(|j| luxemburg_norm(&vinv[i], q, &tc.y[i][j], DEFAULT_TOL))
                        .collect::<Result<_>>()
                })
                .collect::<Result<_>>()?;
            let best = (0..m)
                .map(|j| (0..m).map(|i| vn[i][j]).product::<f64>())
                .fold(0.0, f64::max);
            Ok(lead * best)
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().fold(0.0, f64::max))
}

fn measure_scales(phi: &PhiScaling, family: &[Cube], grid: &Grid) -> Result<HashMap<u64, f64>> {
    let mut ms: Vec<f64> = family.iter().map(|q| q.measure(grid)).collect();
    ms.sort_by(|a, b| a.total_cmp(b));
    ms.dedup();
    let vals: Vec<f64> = ms.par_iter().map(|&t| phi.eval(t)).collect::<Result<_>>()?;
    Ok(ms.into_iter().map(f64::to_bits).zip(vals).collect())
}

/// Norm bundles `X^0, X^1, Y^0, Y^1` of the testing conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrongBundle {
    /// Logarithmic bumps with slack `delta`:
    /// `X^0 = L^q(log L)^{q−1+δ}`, `X^1 = L^q(log L)^{2q−1+δ}`,
    /// `Y_ij = L^{p_i'}(log L)^{p_i'−1+δ}` and, for `ℓ = 1`, the diagonal
    /// `Y^1_jj = L^{p_j'}(log L)^{2p_j'−1+δ}`.
    LogBump { delta: f64 },
    /// Power bumps `X = L^{qr}`, `Y_ij = L^{r p_i'}`, `r > 1`.
    PowerBump { r: f64 },
    /// Any bundle; its maximal operators are not known to be bounded.
    Custom {
        x0: NormSpec,
        x1: NormSpec,
        y0: Vec<Vec<NormSpec>>,
        y1: Vec<Vec<NormSpec>>,
    },
}

impl Default for StrongBundle {
    fn default() -> Self {
        Self::LogBump { delta: 0.5 }
    }
}

struct Bundle {
    x0: NormSpec,
    x1: NormSpec,
    y0: Vec<Vec<NormSpec>>,
    y1: Vec<Vec<NormSpec>>,
}

fn power_log(p: f64, alpha: f64) -> Result<NormSpec> {
    Ok(NormSpec::Young(crate::orlicz::YoungFunction::power_log(p, alpha)?))
}

impl StrongBundle {
    fn resolve(&self, e: &ExponentTuple) -> Result<Bundle> {
        let m = e.m();
        let q = e.q;
        let conj: Vec<f64> = e.p.iter().map(|p| p / (p - 1.0)).collect();
        match self {
            Self::LogBump { delta } => {
                if !(*delta > 0.0) {
                    return Err(Error::InvalidParameter(format!("bundle needs delta > 0, got {delta}")));
                }
                // L^q needs q >= 1 to be a Young function
                let qq = q.max(1.0);
                let y0: Vec<Vec<NormSpec>> = (0..m)
                    .map(|i| {
                        let s = power_log(conj[i], conj[i] - 1.0 + delta)?;
                        Ok(vec![s; m])
                    })
                    .collect::<Result<_>>()?;
                let mut y1 = y0.clone();
                for j in 0..m {
                    y1[j][j] = power_log(conj[j], 2.0 * conj[j] - 1.0 + delta)?;
                }
                Ok(Bundle {
                    x0: power_log(qq, qq - 1.0 + delta)?,
                    x1: power_log(qq, 2.0 * qq - 1.0 + delta)?,
                    y0,
                    y1,
                })
            }
            Self::PowerBump { r } => {
                if !(*r > 1.0) {
                    return Err(Error::InvalidParameter(format!("power bump needs r > 1, got {r}")));
                }
                let x = NormSpec::lebesgue((q * r).max(1.0))?;
                let y: Vec<Vec<NormSpec>> = conj
                    .iter()
                    .map(|c| Ok(vec![NormSpec::lebesgue(r * c)?; m]))
                    .collect::<Result<_>>()?;
                Ok(Bundle {
                    x0: x.clone(),
                    x1: x,
                    y0: y.clone(),
                    y1: y,
                })
            }
            Self::Custom { x0, x1, y0, y1 } => Ok(Bundle {
                x0: x0.clone(),
                x1: x1.clone(),
                y0: y0.clone(),
                y1: y1.clone(),
            }),
        }
    }
}

/// Parameters of [`verify_strong`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongSetup {
    pub ell: u8,
    pub exponents: ExponentTuple,
    pub u: WeightSpec,
    pub v: Vec<WeightSpec>,
    pub bundle: StrongBundle,
    /// Must be set to run a [`StrongBundle::Custom`] bundle.
    pub unchecked: bool,
}

/// Testing conditions for one resolution: `(label, W)` pairs.
fn testing_values(
    cfg: &HarnessConfig,
    setup: &StrongSetup,
    bundle: &Bundle,
    u: &GridFunction,
    v: &[GridFunction],
) -> Result<Vec<(String, f64)>> {
    let e = &setup.exponents;
    let q = e.q;
    let make = |theta: f64, gamma: f64, x: &NormSpec, y: &Vec<Vec<NormSpec>>| TestingCondition {
        theta,
        gamma,
        x: x.clone(),
        y: y.clone(),
        u: u.clone(),
        v: v.to_vec(),
        kernel: cfg.kernel.clone(),
        exponents: e.clone(),
        family: cfg.family,
    };
    let mut out = Vec::new();
    if q > 1.0 {
        let x = if setup.ell == 0 { &bundle.x0 } else { &bundle.x1 };
        out.push(("W(1,1,X^l,Y^0)".to_string(), testing_condition_w(&make(1.0, 1.0, x, &bundle.y0))?));
        if setup.ell == 1 {
            out.push((
                "W(1,1,X^0,Y^1)".to_string(),
                testing_condition_w(&make(1.0, 1.0, &bundle.x0, &bundle.y1))?,
            ));
        }
    } else {
        let x = NormSpec::llog(setup.ell as f64 * q);
        out.push(("W(q,q,L(logL)^{lq},Y^0)".to_string(), testing_condition_w(&make(q, q, &x, &bundle.y0))?));
        if setup.ell == 1 {
            out.push((
                "W(q,1,L,Y^1)".to_string(),
                testing_condition_w(&make(q, 1.0, &NormSpec::lebesgue(1.0)?, &bundle.y1))?,
            ));
        }
    }
    Ok(out)
}

/// `(∫ (|𝒯 f⃗| u)^q)^{1/q}` against `∏ (∫ (|f_i| v_i)^{p_i})^{1/p_i}`.
///
/// Refuses to run (hypothesis unmet) unless `1/m < p ≤ q` and every
/// testing condition is finite.
pub fn verify_strong(cfg: &HarnessConfig, setup: &StrongSetup) -> Result<InequalityReport> {
    cfg.check()?;
    check_ell(setup.ell)?;
    let e = &setup.exponents;
    if e.m() != cfg.m || setup.v.len() != cfg.m {
        return Err(Error::DimensionMismatch(format!(
            "harness has m = {}, got {} exponents and {} weights v",
            cfg.m,
            e.m(),
            setup.v.len()
        )));
    }
    e.check_ordering()?;
    let mut notes = vec![format!("cube family: {:?}", cfg.family).to_lowercase()];
    if matches!(setup.bundle, StrongBundle::Custom { .. }) {
        if !setup.unchecked {
            return Err(Error::HypothesisUnmet(
                "custom bundles need the unchecked flag: boundedness of their maximal operators is not known".into(),
            ));
        }
        notes.push("unverified-hypothesis: custom norm bundle".into());
    }
    let bundle = setup.bundle.resolve(e)?;
    let resolutions = cfg.resolutions();
    let mut runs = Vec::new();
    for &res in &resolutions {
        let level = Level::new(cfg, res, setup.ell == 1)?;
        let u = setup.u.build(&level.grid)?;
        let v: Vec<GridFunction> = setup.v.iter().map(|s| s.build(&level.grid)).collect::<Result<_>>()?;
        for (label, w) in testing_values(cfg, setup, &bundle, &u, &v)? {
            if !w.is_finite() {
                return Err(Error::HypothesisUnmet(format!("testing condition {label} is infinite at N = {res}")));
            }
            notes.push(format!("N = {res}: {label} = {w:.6e}"));
        }
        if setup.ell == 1 {
            let b = bmo_norm(&level.symbols[0], &level.family)?;
            if !b.l1.is_finite() {
                return Err(Error::HypothesisUnmet("symbol is not in BMO on the grid".into()));
            }
            notes.push(format!("N = {res}: symbol BMO norm {:.6e}", b.l1));
        }
        let q = e.q;
        let inst: Vec<Instance> = level
            .tuples
            .par_iter()
            .enumerate()
            .map(|(k, fs)| {
                let refs: Vec<&GridFunction> = fs.iter().collect();
                let t = level.apply(setup.ell, &refs)?;
                let lhs = t.zip_with(&u, |a, b| (a.abs() * b).powf(q))?.integral().powf(1.0 / q);
                let mut rhs = 1.0;
                for ((f, vi), pi) in fs.iter().zip(&v).zip(&e.p) {
                    rhs *= f.zip_with(vi, |a, b| (a.abs() * b).powf(*pi))?.integral().powf(1.0 / pi);
                }
                Instance::new(k, lhs, rhs)
            })
            .collect::<Result<_>>()?;
        runs.push(inst);
    }
    let mut params = cfg.params();
    params["ell"] = setup.ell.into();
    params["p"] = serde_json::to_value(&e.p).expect("serializable");
    params["q"] = e.q.into();
    params["u"] = setup.u.to_string().into();
    params["v"] = setup.v.iter().map(|s| s.to_string()).collect::<Vec<_>>().into();
    params["bundle"] = serde_json::to_value(&setup.bundle).expect("serializable");
    Ok(InequalityReport::assemble(
        "strong",
        if e.q > 1.0 { "q-gt-1" } else { "q-le-1" },
        params,
        &resolutions,
        runs,
        notes,
    ))
}

/// Weighted bound `(∫ |𝒯 f⃗|^p ∏ u_i^{p/p_i})^{1/p} ≤ C ∏ (∫ |f_i|^{p_i} M u_i)^{1/p_i}`
/// with the maximal operator fixed by the case:
/// i: `M_{Φ_1^p, L(log L)^{p(1+ℓ)−1+δ}}` for `p > 1`;
/// ii: `M_{Φ_p^p, L}` for `p ≤ 1`, `ℓ = 0`;
/// iii: `M_{Φ_p^p, L^{1/p}}` for `p ≤ 1`, `ℓ = 1`.
pub fn verify_fefferman_stein(
    cfg: &HarnessConfig,
    case: Case,
    ell: u8,
    ps: &[f64],
    delta: f64,
    us: &[WeightSpec],
) -> Result<InequalityReport> {
    cfg.check()?;
    check_ell(ell)?;
    let e = ExponentTuple::new(ps.to_vec(), 1.0)?;
    if e.m() != cfg.m || us.len() != cfg.m {
        return Err(Error::DimensionMismatch(format!(
            "harness has m = {}, got {} exponents and {} weights",
            cfg.m,
            e.m(),
            us.len()
        )));
    }
    let p = e.harmonic();
    let (phi, spec) = match case {
        Case::I => {
            if !(p > 1.0) || !(delta > 0.0 && delta < 1.0) {
                return Err(Error::HypothesisUnmet(format!(
                    "case i needs p > 1 and 0 < delta < 1, got p = {p}, delta = {delta}"
                )));
            }
            (
                PhiScaling::phi_theta(&cfg.kernel, 1.0, p),
                NormSpec::llog(p * (1.0 + ell as f64) - 1.0 + delta),
            )
        }
        Case::Ii | Case::Iii => {
            let want = if case == Case::Ii { 0 } else { 1 };
            if !(p <= 1.0 && p > 1.0 / cfg.m as f64) || ell != want {
                return Err(Error::HypothesisUnmet(format!(
                    "case {case} needs 1/m < p <= 1 and ell = {want}, got p = {p}, ell = {ell}"
                )));
            }
            let spec = if case == Case::Ii {
                NormSpec::lebesgue(1.0)?
            } else {
                NormSpec::lebesgue(1.0 / p)?
            };
            (PhiScaling::phi_theta(&cfg.kernel, p, p), spec)
        }
    };
    let resolutions = cfg.resolutions();
    let mut runs = Vec::new();
    for &res in &resolutions {
        let level = Level::new(cfg, res, ell == 1)?;
        let u: Vec<GridFunction> = us.iter().map(|s| s.build(&level.grid)).collect::<Result<_>>()?;
        let mu: Vec<GridFunction> = u
            .iter()
            .map(|w| maximal_single(&phi, &spec, w, &level.family))
            .collect::<Result<_>>()?;
        let exps: Vec<f64> = ps.iter().map(|pi| p / pi).collect();
        let left_weight = weight_product(&u, &exps)?;
        let inst: Vec<Instance> = level
            .tuples
            .par_iter()
            .enumerate()
            .map(|(k, fs)| {
                let refs: Vec<&GridFunction> = fs.iter().collect();
                let t = level.apply(ell, &refs)?;
                let lhs = t.zip_with(&left_weight, |a, w| a.abs().powf(p) * w)?.integral().powf(1.0 / p);
                let mut rhs = 1.0;
                for ((f, w), pi) in fs.iter().zip(&mu).zip(ps) {
                    rhs *= f.zip_with(w, |a, b| a.abs().powf(*pi) * b)?.integral().powf(1.0 / pi);
                }
                Instance::new(k, lhs, rhs)
            })
            .collect::<Result<_>>()?;
        runs.push(inst);
    }
    let mut params = cfg.params();
    params["ell"] = ell.into();
    params["p"] = serde_json::to_value(ps).expect("serializable");
    params["delta"] = delta.into();
    params["u"] = us.iter().map(|s| s.to_string()).collect::<Vec<_>>().into();
    params["rhs_maximal"] = format!("phi = {phi:?}, X = {spec}").into();
    let notes = vec![format!("cube family: {:?}", cfg.family).to_lowercase()];
    Ok(InequalityReport::assemble(
        "fefferman-stein",
        &case.to_string(),
        params,
        &resolutions,
        runs,
        notes,
    ))
}
