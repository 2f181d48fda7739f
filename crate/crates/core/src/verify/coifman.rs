//! Coifman type estimates: the operator dominated by a multilinear
//! maximal operator in `L^p(w)`.

use rayon::prelude::*;

use super::{check_ell, weighted_power_integral, Case, HarnessConfig, Instance, InequalityReport, Level};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::operators::{maximal, maximal_single, PhiScaling};
use crate::orlicz::NormSpec;
use crate::weights::{certify_rh, WeightSpec, RH_CAP};

/// RH exponent used as the `A_∞` surrogate.
pub const AINF_RH: f64 = 2.0;

fn instances(
    level: &Level,
    ell: u8,
    p: f64,
    phi: &PhiScaling,
    spec: &NormSpec,
    left: &GridFunction,
    right: &GridFunction,
) -> Result<Vec<Instance>> {
    let specs = vec![spec.clone(); level.tuples.first().map_or(0, Vec::len)];
    level
        .tuples
        .par_iter()
        .enumerate()
        .map(|(k, fs)| {
            let refs: Vec<&GridFunction> = fs.iter().collect();
            let t = level.apply(ell, &refs)?;
            let lhs = weighted_power_integral(&t, left, p)?;
            let mf = maximal(phi, &specs, &refs, &level.family)?;
            let rhs = weighted_power_integral(&mf, right, p)?;
            Instance::new(k, lhs, rhs)
        })
        .collect()
}

/// `∫ |𝒯 f⃗|^p w ≤ C ∫ (ℳ f⃗)^p w` with
/// i: `ℳ_{Φ_p, L}`, `p ≤ 1`, `ℓ = 0`;
/// ii: `ℳ_{Φ_p, L log L}`, `p ≤ 1`, `ℓ = 1`, `w ∈ RH(1/p)`;
/// iii: `ℳ_{Φ_1, L(log L)^ℓ}`, `p > 1`.
///
/// `w` is certified through RH(2) on the cube family.
pub fn verify_coifman(
    cfg: &HarnessConfig,
    case: Case,
    ell: u8,
    p: f64,
    w: &WeightSpec,
) -> Result<InequalityReport> {
    cfg.check()?;
    check_ell(ell)?;
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
    }
    let (phi, spec, rh_extra) = match case {
        Case::I => {
            if !(p <= 1.0) || ell != 0 {
                return Err(Error::HypothesisUnmet(format!(
                    "case i needs p <= 1 and ell = 0, got p = {p}, ell = {ell}"
                )));
            }
            (PhiScaling::phi_theta(&cfg.kernel, p, 1.0), NormSpec::lebesgue(1.0)?, None)
        }
        Case::Ii => {
            if !(p <= 1.0) || ell != 1 {
                return Err(Error::HypothesisUnmet(format!(
                    "case ii needs p <= 1 and ell = 1, got p = {p}, ell = {ell}"
                )));
            }
            let extra = if p < 1.0 { Some(1.0 / p) } else { None };
            (PhiScaling::phi_theta(&cfg.kernel, p, 1.0), NormSpec::llog(1.0), extra)
        }
        Case::Iii => {
            if !(p > 1.0) {
                return Err(Error::HypothesisUnmet(format!("case iii needs p > 1, got p = {p}")));
            }
            (
                PhiScaling::phi_theta(&cfg.kernel, 1.0, 1.0),
                NormSpec::llog(ell as f64),
                None,
            )
        }
    };
    let resolutions = cfg.resolutions();
    let mut runs = Vec::new();
    let mut notes = vec![format!("cube family: {:?}", cfg.family).to_lowercase()];
    for &res in &resolutions {
        let level = Level::new(cfg, res, ell == 1)?;
        let wf = w.build(&level.grid)?;
        let c = certify_rh(&wf, AINF_RH, &level.family, RH_CAP)?;
        notes.push(format!("N = {res}: RH({AINF_RH}) constant {c:.6e}"));
        if let Some(s) = rh_extra {
            let c = certify_rh(&wf, s, &level.family, RH_CAP)?;
            notes.push(format!("N = {res}: RH({s}) constant {c:.6e}"));
        }
        runs.push(instances(&level, ell, p, &phi, &spec, &wf, &wf)?);
    }
    let mut params = cfg.params();
    params["ell"] = ell.into();
    params["p"] = p.into();
    params["w"] = w.to_string().into();
    params["rhs_maximal"] = format!("phi = {phi:?}, X = {spec}").into();
    Ok(InequalityReport::assemble("coifman", &case.to_string(), params, &resolutions, runs, notes))
}

/// `∫ |𝒯 f⃗|^p u ≤ C ∫ (ℳ_{Φ_1, L(log L)^ℓ} f⃗)^p M_{L(log L)^γ} u`, with
/// `γ = ℓ` in case i (`0 < p ≤ 1`) and `γ = ⌊ℓp + p⌋` in case ii (`p > 1`).
pub fn verify_ftd(
    cfg: &HarnessConfig,
    case: Case,
    ell: u8,
    p: f64,
    u: &WeightSpec,
) -> Result<InequalityReport> {
    cfg.check()?;
    check_ell(ell)?;
    let gamma = match case {
        Case::I if p > 0.0 && p <= 1.0 => ell as f64,
        Case::Ii if p > 1.0 && p.is_finite() => (ell as f64 * p + p).floor(),
        _ => {
            return Err(Error::HypothesisUnmet(format!(
                "case {case} does not apply to p = {p} (case i: 0 < p <= 1, case ii: p > 1)"
            )))
        }
    };
    let phi = PhiScaling::phi_theta(&cfg.kernel, 1.0, 1.0);
    let spec = NormSpec::llog(ell as f64);
    let uspec = NormSpec::llog(gamma);
    let resolutions = cfg.resolutions();
    let mut runs = Vec::new();
    for &res in &resolutions {
        let level = Level::new(cfg, res, ell == 1)?;
        let uf = u.build(&level.grid)?;
        if !uf.is_nonnegative() {
            return Err(Error::InvalidParameter("weight u must be nonnegative".into()));
        }
        let mu = maximal_single(&PhiScaling::one(), &uspec, &uf, &level.family)?;
        runs.push(instances(&level, ell, p, &phi, &spec, &uf, &mu)?);
    }
    let mut params = cfg.params();
    params["ell"] = ell.into();
    params["p"] = p.into();
    params["u"] = u.to_string().into();
    params["gamma"] = gamma.into();
    let notes = vec![format!("cube family: {:?}", cfg.family).to_lowercase()];
    Ok(InequalityReport::assemble("for-t-d", &case.to_string(), params, &resolutions, runs, notes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;

    fn cfg(m: usize) -> HarnessConfig {
        let alpha = if m == 1 { 0.5 } else { 1.0 };
        let mut c = HarnessConfig::new(1, m, 2.0, 16, Kernel::fractional(1, m, alpha).unwrap());
        c.corpus_size = 4;
        c
    }

    #[test]
    fn coifman_case_i_runs() {
        let r = verify_coifman(&cfg(2), Case::I, 0, 1.0, &WeightSpec::One).unwrap();
        assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
        assert!(r.stable.is_some());
    }

    #[test]
    fn coifman_case_checks() {
        assert!(matches!(
            verify_coifman(&cfg(2), Case::I, 0, 2.0, &WeightSpec::One),
            Err(Error::HypothesisUnmet(_))
        ));
        assert!(verify_coifman(&cfg(2), Case::Ii, 0, 0.5, &WeightSpec::One).is_err());
        let r = verify_coifman(&cfg(2), Case::Ii, 1, 0.5, &WeightSpec::Power(0.2)).unwrap();
        assert!(r.max_ratio.is_finite());
    }

    #[test]
    fn ftd_matches_coifman_for_unit_weight() {
        // M_{L(log L)^γ} 1 = 1, so the right sides coincide exactly
        for ell in [0u8, 1] {
            let a = verify_coifman(&cfg(2), Case::Iii, ell, 2.0, &WeightSpec::One).unwrap();
            let b = verify_ftd(&cfg(2), Case::Ii, ell, 2.0, &WeightSpec::One).unwrap();
            for (x, y) in a.instances.iter().zip(&b.instances) {
                assert!((x.ratio - y.ratio).abs() <= 1e-9 * x.ratio.max(1e-300));
            }
        }
    }

    #[test]
    fn ftd_case_ranges() {
        assert!(verify_ftd(&cfg(1), Case::I, 0, 2.0, &WeightSpec::One).is_err());
        let r = verify_ftd(&cfg(1), Case::I, 0, 1.0, &WeightSpec::One).unwrap();
        assert!(r.max_ratio.is_finite());
    }
}
