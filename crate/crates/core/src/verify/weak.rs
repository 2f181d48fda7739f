//! Weak type estimates: the multilinear Orlicz maximal operator and the
//! `L^{1/m,∞}` control of the potential operator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_ell, weight_product, HarnessConfig, Instance, InequalityReport, Level, Series};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operators::{maximal, maximal_single, PhiScaling};
use crate::orlicz::{NormSpec, YoungFunction};
use crate::weights::WeightSpec;

/// Default size of the logarithmic λ-grid.
pub const LAMBDA_POINTS: usize = 64;

/// Values of `δ_ℓ` swept by the control harness.
pub const CONTROL_DELTAS: [f64; 3] = [0.25, 0.5, 1.0];

/// `‖g‖_{L^{p,∞}(u)} = sup_λ λ u({|g| > λ})^{1/p}`, evaluated exactly: the
/// sup is approached from below each distinct value `v` of `|g|`, where it
/// equals `v · u({|g| ≥ v})^{1/p}`.
pub fn lorentz_weak_quasinorm(g: &GridFunction, u: &GridFunction, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("weak L^p needs p > 0, got {p}")));
    }
    g.check_same_grid(u)?;
    let vol = g.grid().cell_volume();
    let mut cells: Vec<(f64, f64)> = g
        .values()
        .iter()
        .zip(u.values())
        .map(|(a, w)| (a.abs(), w * vol))
        .filter(|(a, _)| *a > 0.0)
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best: f64 = 0.0;
    let mut mass = 0.0;
    let mut k = 0;
    while k < cells.len() {
        let v = cells[k].0;
        while k < cells.len() && cells[k].0 == v {
            mass += cells[k].1;
            k += 1;
        }
        best = best.max(v * mass.powf(1.0 / p));
    }
    Ok(best)
}

/// `u({|g| > λ})` at each `λ`, as `[λ, measure]` pairs.
pub fn level_curve(g: &GridFunction, u: &GridFunction, lambdas: &[f64]) -> Result<Vec<[f64; 2]>> {
    g.check_same_grid(u)?;
    let vol = g.grid().cell_volume();
    let mut cells: Vec<(f64, f64)> =
        g.values().iter().zip(u.values()).map(|(a, w)| (a.abs(), w * vol)).collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    // suffix sums over the descending order
    let mut prefix = Vec::with_capacity(cells.len() + 1);
    prefix.push(0.0);
    for c in &cells {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + c.1);
    }
    Ok(lambdas
        .iter()
        .map(|&l| {
            let count = cells.partition_point(|c| c.0 > l);
            [l, prefix[count]]
        })
        .collect())
}

/// Logarithmic grid of `points` values spanning `[lo, hi]`.
fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points < 2 || lo >= hi {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Left side `sup_λ u({ℳ f⃗ > λ^m})^m / 𝓑^m(1/λ)` of the weak maximal bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakLhs {
    /// Max over the logarithmic λ-grid spanning `[min⁺, max]^{1/m}`.
    pub grid: f64,
    /// Sup over all `λ > 0`.
    pub exact: f64,
}

pub fn weak_maximal_lhs(
    mf: &GridFunction,
    u: &GridFunction,
    young_m: &YoungFunction,
    m: usize,
    points: usize,
) -> Result<WeakLhs> {
    let vals = mf.values();
    let max = vals.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(WeakLhs { grid: 0.0, exact: 0.0 });
    }
    let min = vals.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let mf_pow = m as f64;
    let term = |lambda: f64, measure: f64| measure.powf(mf_pow) / young_m.eval(1.0 / lambda);
    let lambdas = log_grid(min.powf(1.0 / mf_pow), max.powf(1.0 / mf_pow), points);
    let levels: Vec<f64> = lambdas.iter().map(|l| l.powf(mf_pow)).collect();
    let curve = level_curve(mf, u, &levels)?;
    let grid = lambdas
        .iter()
        .zip(&curve)
        .map(|(l, c)| term(*l, c[1]))
        .fold(0.0, f64::max);
    // exact: λ^m just below each distinct value v, measure u({ℳ ≥ v})
    let mut distinct: Vec<f64> = vals.iter().copied().filter(|v| *v > 0.0).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    let below: Vec<f64> = distinct.iter().map(|v| v * (1.0 - 1e-15)).collect();
    let curve = level_curve(mf, u, &below)?;
    let exact = distinct
        .iter()
        .zip(&curve)
        .map(|(v, c)| term(v.powf(1.0 / mf_pow), c[1]))
        .fold(0.0, f64::max);
    Ok(WeakLhs { grid, exact })
}

/// `sup_λ u({ℳ_{φ,𝓑} f⃗ > λ^m})^m / 𝓑^m(1/λ) ≤ C ∏ ∫ 𝓑^m(|f_i|) M_{ψ,L} u_i`
/// with `ψ = 𝓑^m ∘ φ^{1/m}`, `u = ∏ u_i^{1/m}` and `𝓑^m` the `m`-fold
/// composition. The left side is taken on the λ-grid.
pub fn verify_weak_maximal(
    cfg: &HarnessConfig,
    phi: &PhiScaling,
    young: &YoungFunction,
    us: &[WeightSpec],
    lambda_points: usize,
) -> Result<InequalityReport> {
    cfg.check()?;
    young.validate()?;
    if !young.is_submultiplicative(0.01) {
        return Err(Error::HypothesisUnmet(format!("{young} is not submultiplicative")));
    }
    if us.len() != cfg.m {
        return Err(Error::DimensionMismatch(format!("{} weights for m = {}", us.len(), cfg.m)));
    }
    let m = cfg.m;
    let young_m = YoungFunction::iterate(young.clone(), m);
    let psi = PhiScaling::YoungOf {
        young: young_m.clone(),
        inner: Box::new(phi.clone()),
        root: m as f64,
    };
    let specs = vec![NormSpec::Young(young.clone()); m];
    let l1 = NormSpec::lebesgue(1.0)?;
    let resolutions = cfg.resolutions();
    let mut runs = Vec::new();
    let mut notes = vec![format!("cube family: {:?}", cfg.family).to_lowercase()];
    let mut series = Vec::new();
    for &res in &resolutions {
        let level = Level::new(cfg, res, false)?;
        let u: Vec<GridFunction> = us.iter().map(|s| s.build(&level.grid)).collect::<Result<_>>()?;
        let prod = weight_product(&u, &vec![1.0 / m as f64; m])?;
        let mpsi: Vec<GridFunction> = u
            .iter()
            .map(|w| maximal_single(&psi, &l1, w, &level.family))
            .collect::<Result<_>>()?;
        let out: Vec<(Instance, WeakLhs)> = level
            .tuples
            .par_iter()
            .enumerate()
            .map(|(k, fs)| {
                let refs: Vec<&GridFunction> = fs.iter().collect();
                let mf = maximal(phi, &specs, &refs, &level.family)?;
                let lhs = weak_maximal_lhs(&mf, &prod, &young_m, m, lambda_points)?;
                let mut rhs = 1.0;
                for (f, w) in fs.iter().zip(&mpsi) {
                    rhs *= f.zip_with(w, |a, b| young_m.eval(a.abs()) * b)?.integral();
                }
                Ok((Instance::new(k, lhs.grid, rhs)?, lhs))
            })
            .collect::<Result<_>>()?;
        let gap = out
            .iter()
            .map(|(_, l)| if l.exact > 0.0 { 1.0 - l.grid / l.exact } else { 0.0 })
            .fold(0.0, f64::max);
        notes.push(format!("N = {res}: largest shortfall of the λ-grid sup against the exact sup {gap:.4e}"));
        if series.is_empty() {
            if let Some(fs) = level.tuples.first() {
                let refs: Vec<&GridFunction> = fs.iter().collect();
                let mf = maximal(phi, &specs, &refs, &level.family)?;
                let max = mf.max_abs();
                let min = mf.values().iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
                if max > 0.0 {
                    let lambdas = log_grid(min.powf(1.0 / m as f64), max.powf(1.0 / m as f64), lambda_points);
                    let levels: Vec<f64> = lambdas.iter().map(|l| l.powi(m as i32)).collect();
                    let curve = level_curve(&mf, &prod, &levels)?;
                    series.push(Series {
                        name: "lambda-level".into(),
                        points: lambdas.iter().zip(&curve).map(|(l, c)| [*l, c[1]]).collect(),
                    });
                }
            }
        }
        runs.push(out.into_iter().map(|(i, _)| i).collect());
    }
    let mut params = cfg.params();
    params["phi"] = serde_json::to_value(phi).expect("serializable");
    params["young"] = young.to_string().into();
    params["u"] = us.iter().map(|s| s.to_string()).collect::<Vec<_>>().into();
    params["lambda_points"] = lambda_points.into();
    let mut r = InequalityReport::assemble("weak-maximal", "", params, &resolutions, runs, notes);
    r.series = series;
    Ok(r)
}

/// Weight of the control harness: a single `u`, or factors `u_i` with
/// `u = ∏ u_i^{1/m}`, which also runs the product form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlWeight {
    Single(WeightSpec),
    Product(Vec<WeightSpec>),
}

/// `‖𝒯 f⃗‖_{L^{1/m,∞}(u)} ≤ C ‖ℳ_{Φ_1, L(log L)^ℓ} f⃗‖_{L^{1/m,∞}(M_{L(log L)^{ℓ+δ}} u)}`.
///
/// With [`ControlWeight::Product`] and `ℓ = 0` a second report compares the
/// left side with `∏ ∫ |f_i| M_{Φ_1^{1/m}, L}(M_{L(log L)^δ} u_i)`.
pub fn verify_control(
    cfg: &HarnessConfig,
    ell: u8,
    delta: f64,
    weight: &ControlWeight,
) -> Result<Vec<InequalityReport>> {
    cfg.check()?;
    check_ell(ell)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let m = cfg.m;
    let p = 1.0 / m as f64;
    let factors = match weight {
        ControlWeight::Single(_) => None,
        ControlWeight::Product(us) if us.len() == m => Some(us.clone()),
        ControlWeight::Product(us) => {
            return Err(Error::DimensionMismatch(format!("{} weight factors for m = {m}", us.len())))
        }
    };
    let corollary = factors.is_some() && ell == 0;
    let phi1 = PhiScaling::phi_theta(&cfg.kernel, 1.0, 1.0);
    let phi_root = PhiScaling::phi_theta(&cfg.kernel, 1.0, p);
    let specs = vec![NormSpec::llog(ell as f64); m];
    let bump = NormSpec::llog(ell as f64 + delta);
    let bump_delta = NormSpec::llog(delta);
    let l1 = NormSpec::lebesgue(1.0)?;
    let resolutions = cfg.resolutions();
    let (mut runs, mut cor_runs) = (Vec::new(), Vec::new());
    for &res in &resolutions {
        let level = Level::new(cfg, res, ell == 1)?;
        let (u, parts) = match weight {
            ControlWeight::Single(s) => (s.build(&level.grid)?, Vec::new()),
            ControlWeight::Product(us) => {
                let parts: Vec<GridFunction> =
                    us.iter().map(|s| s.build(&level.grid)).collect::<Result<_>>()?;
                (weight_product(&parts, &vec![p; m])?, parts)
            }
        };
        if !u.is_nonnegative() {
            return Err(Error::InvalidParameter("weight u must be nonnegative".into()));
        }
        let mu = maximal_single(&PhiScaling::one(), &bump, &u, &level.family)?;
        let cor_w: Vec<GridFunction> = if corollary {
            parts
                .iter()
                .map(|ui| {
                    let inner = maximal_single(&PhiScaling::one(), &bump_delta, ui, &level.family)?;
                    maximal_single(&phi_root, &l1, &inner, &level.family)
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let out: Vec<(Instance, Option<Instance>)> = level
            .tuples
            .par_iter()
            .enumerate()
            .map(|(k, fs)| {
                let refs: Vec<&GridFunction> = fs.iter().collect();
                let t = level.apply(ell, &refs)?;
                let lhs = lorentz_weak_quasinorm(&t, &u, p)?;
                let mf = maximal(&phi1, &specs, &refs, &level.family)?;
                let rhs = lorentz_weak_quasinorm(&mf, &mu, p)?;
                let cor = if corollary {
                    let mut r = 1.0;
                    for (f, w) in fs.iter().zip(&cor_w) {
                        r *= f.zip_with(w, |a, b| a.abs() * b)?.integral();
                    }
                    Some(Instance::new(k, lhs, r)?)
                } else {
                    None
                };
                Ok((Instance::new(k, lhs, rhs)?, cor))
            })
            .collect::<Result<_>>()?;
        let (main, cor): (Vec<_>, Vec<_>) = out.into_iter().unzip();
        runs.push(main);
        cor_runs.push(cor.into_iter().flatten().collect::<Vec<_>>());
    }
    let mut params = cfg.params();
    params["ell"] = ell.into();
    params["delta"] = delta.into();
    params["u"] = serde_json::to_value(weight).expect("serializable");
    let notes = vec![format!("cube family: {:?}", cfg.family).to_lowercase()];
    let mut reports = vec![InequalityReport::assemble(
        "control",
        &format!("delta={delta}"),
        params.clone(),
        &resolutions,
        runs,
        notes.clone(),
    )];
    if corollary {
        reports.push(InequalityReport::assemble(
            "control-product",
            &format!("delta={delta}"),
            params,
            &resolutions,
            cor_runs,
            notes,
        ));
    } else if factors.is_some() {
        reports[0].notes.push("product form only applies to ell = 0; skipped".into());
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernels::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weak_norm_of_indicator() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let one = GridFunction::constant(&g, 1.0).unwrap();
        let f = GridFunction::from_fn(&g, |x| if x[0] >= 0.0 && x[0] < 1.0 { 3.0 } else { 0.0 }).unwrap();
        for p in [0.5, 1.0, 2.0] {
            let v = lorentz_weak_quasinorm(&f, &one, p).unwrap();
            assert!((v - 3.0 * 1f64.powf(1.0 / p)).abs() < 1e-12);
        }
        let f2 = f.scale(1.0 / 3.0).unwrap().map(|v| v * 2.0).unwrap();
        let v = lorentz_weak_quasinorm(&f2, &one, 0.5).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert_eq!(lorentz_weak_quasinorm(&GridFunction::zeros(&g), &one, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn weak_norm_matches_dense_scan() {
        let g = Grid::new(1, 1.0, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = GridFunction::from_fn(&g, |_| 0.0).unwrap();
        let vals: Vec<f64> = (0..f.values().len()).map(|_| rng.gen_range(0.0..3.0)).collect();
        let f = GridFunction::new(g.clone(), vals).unwrap();
        let w = GridFunction::from_fn(&g, |x| 1.0 + x[0] * x[0]).unwrap();
        let exact = lorentz_weak_quasinorm(&f, &w, 0.5).unwrap();
        let max = f.max_abs();
        let lambdas: Vec<f64> = (0..10_000).map(|k| max * k as f64 / 10_000.0).collect();
        let scan = level_curve(&f, &w, &lambdas)
            .unwrap()
            .into_iter()
            .map(|[l, mu]| l * mu.powf(2.0))
            .fold(0.0, f64::max);
        assert!(scan <= exact * (1.0 + 1e-12));
        assert!((exact - scan) / exact < 1e-3);
    }

    fn cfg2() -> HarnessConfig {
        let mut c = HarnessConfig::new(1, 2, 2.0, 16, Kernel::fractional(1, 2, 1.0).unwrap());
        c.corpus_size = 4;
        c
    }

    #[test]
    fn weak_maximal_runs() {
        let one = vec![WeightSpec::One, WeightSpec::One];
        for young in [YoungFunction::Identity, YoungFunction::llog(1.0)] {
            let r = verify_weak_maximal(&cfg2(), &PhiScaling::one(), &young, &one, LAMBDA_POINTS).unwrap();
            assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
            assert_eq!(r.series.len(), 1);
        }
        let bad = YoungFunction::Exp;
        assert!(verify_weak_maximal(&cfg2(), &PhiScaling::one(), &bad, &one, 64).is_err());
    }

    #[test]
    fn weak_lhs_grid_below_exact() {
        let g = Grid::new(1, 2.0, 32).unwrap();
        let one = GridFunction::constant(&g, 1.0).unwrap();
        let mf = GridFunction::from_fn(&g, |x| 1.0 / (0.1 + x[0].abs())).unwrap();
        let y = YoungFunction::iterate(YoungFunction::Identity, 2);
        let l = weak_maximal_lhs(&mf, &one, &y, 2, 64).unwrap();
        assert!(l.grid <= l.exact * (1.0 + 1e-12));
        assert!(l.grid > 0.5 * l.exact);
    }

    #[test]
    fn control_reports_both_forms() {
        let w = ControlWeight::Product(vec![WeightSpec::One, WeightSpec::Power(0.3)]);
        let r = verify_control(&cfg2(), 0, 0.5, &w).unwrap();
        assert_eq!(r.len(), 2);
        for rep in &r {
            assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
        }
        let r = verify_control(&cfg2(), 1, 0.5, &w).unwrap();
        assert_eq!(r.len(), 1);
    }
}
