//! Young functions and Luxemburg averages over cubes.
//!
//! A [`NormSpec`] names either a plain `L^r` average or an Orlicz space
//! `L^B`; [`luxemburg_norm`] evaluates `‖f‖_{X,Q}` for either. Textual specs
//! (`L^2`, `Lp1logL1`, `expL`, `expL^{1/0.5}`, `B^2(Lp1logL1)`) parse and print
//! losslessly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cube, GridFunction};

/// Default relative tolerance of Luxemburg bisections.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_BISECTIONS: usize = 200;

/// `log⁺ t = max(log t, 0)`, with `log⁺ 0 = 0`.
pub fn log_plus(t: f64) -> f64 {
    if t > 1.0 {
        t.ln()
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum YoungFunction {
    /// `t^p (1 + log⁺ t)^alpha`.
    PowerLog { p: f64, alpha: f64 },
    /// `e^t - 1`.
    Exp,
    /// `e^{t^{1/q}} - 1`.
    ExpPower { q: f64 },
    /// `t`.
    Identity,
    /// `base ∘ base ∘ … ∘ base` (`times` factors).
    Composed {
        base: Box<YoungFunction>,
        times: usize,
    },
}

impl YoungFunction {
    pub fn power_log(p: f64, alpha: f64) -> Result<Self> {
        let y = Self::PowerLog { p, alpha };
        y.validate()?;
        Ok(y)
    }

    /// `L(log L)^alpha`, i.e. `t (1 + log⁺ t)^alpha`.
    pub fn llog(alpha: f64) -> Self {
        Self::PowerLog { p: 1.0, alpha }
    }

    /// The `times`-fold composition of `base` with itself.
    pub fn iterate(base: YoungFunction, times: usize) -> Self {
        if times == 1 {
            base
        } else {
            Self::Composed {
                base: Box::new(base),
                times,
            }
        }
    }

    /// Evaluates at `t ≥ 0`. May return `+inf` for exponential families.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::PowerLog { p, alpha } => {
                if t == 0.0 {
                    0.0
                } else if *alpha == 0.0 {
                    t.powf(*p)
                } else {
                    t.powf(*p) * (1.0 + log_plus(t)).powf(*alpha)
                }
            }
            Self::Exp => t.exp_m1(),
            Self::ExpPower { q } => t.powf(1.0 / q).exp_m1(),
            Self::Identity => t,
            Self::Composed { base, times } => {
                let mut v = t;
                for _ in 0..*times {
                    v = base.eval(v);
                }
                v
            }
        }
    }

    /// Parameter checks plus a sampled convexity/monotonicity check on `[0, 1e6]`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PowerLog { p, alpha } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power-log Young function needs p >= 1, got {p}"
                    )));
                }
                if !(alpha.is_finite() && *alpha >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "power-log Young function needs alpha >= 0, got {alpha}"
                    )));
                }
            }
            Self::ExpPower { q } => {
                if !(q.is_finite() && *q > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exp-power Young function needs q > 0, got {q}"
                    )));
                }
            }
            Self::Composed { base, times } => {
                if *times == 0 {
                    return Err(Error::InvalidParameter(
                        "composition needs at least one factor".into(),
                    ));
                }
                base.validate()?;
            }
            Self::Exp | Self::Identity => {}
        }
        self.check_shape()
    }

    fn check_shape(&self) -> Result<()> {
        if self.eval(0.0) != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{self} does not vanish at 0"
            )));
        }
        let samples: Vec<f64> = std::iter::once(0.0)
            .chain((0..=240).map(|k| 10f64.powf(-6.0 + k as f64 * 0.05)))
            .collect();
        let vals: Vec<f64> = samples.iter().map(|&t| self.eval(t)).collect();
        for w in vals.windows(2) {
            if w[1].is_finite() && w[1] < w[0] {
                return Err(Error::InvalidParameter(format!("{self} is not increasing")));
            }
        }
        for w in samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (fa, fb, fm) = (self.eval(a), self.eval(b), self.eval(0.5 * (a + b)));
            if fa.is_finite() && fb.is_finite() && fm > 0.5 * (fa + fb) * (1.0 + 1e-9) + 1e-300 {
                return Err(Error::InvalidParameter(format!(
                    "{self} is not convex near t = {a:e}"
                )));
            }
        }
        Ok(())
    }

    /// The `t` with `|B(t) - s| ≤ tol·max(1, s)`, by bracketing bisection.
    pub fn inverse(&self, s: f64, tol: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Young inverse needs s >= 0, got {s}"
            )));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        match self {
            Self::Identity => return Ok(s),
            Self::PowerLog { p, alpha } if *alpha == 0.0 => return Ok(s.powf(1.0 / p)),
            Self::Exp => return Ok(s.ln_1p()),
            _ => {}
        }
        let target = tol * s.max(1.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut guard = 0;
        while self.eval(hi) < s {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::NonConvergence(format!(
                    "could not bracket {self}^{{-1}}({s})"
                )));
            }
        }
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            let v = self.eval(mid);
            if (v - s).abs() <= target {
                return Ok(mid);
            }
            if mid <= lo || mid >= hi {
                break;
            }
            if v < s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = 0.5 * (lo + hi);
        if (self.eval(mid) - s).abs() <= target.max(s * 1e-12) {
            return Ok(mid);
        }
        Err(Error::NonConvergence(format!(
            "bisection for {self}^{{-1}}({s}) did not reach tolerance {tol}"
        )))
    }

    /// Checks `B(st) ≤ B(s) B(t)` on a sampled lattice with relative slack `slack`.
    pub fn is_submultiplicative(&self, slack: f64) -> bool {
        let pts: Vec<f64> = (0..=40).map(|k| 10f64.powf(-4.0 + 0.2 * k as f64)).collect();
        pts.iter().all(|&s| {
            pts.iter().all(|&t| {
                let lhs = self.eval(s * t);
                let rhs = self.eval(s) * self.eval(t);
                !rhs.is_finite() || lhs <= rhs * (1.0 + slack)
            })
        })
    }
}

impl fmt::Display for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLog { p, alpha } => write!(f, "Lp{p}logL{alpha}"),
            Self::Exp => write!(f, "expL"),
            Self::ExpPower { q } => write!(f, "expL^{{1/{q}}}"),
            Self::Identity => write!(f, "Lp1logL0"),
            Self::Composed { base, times } => write!(f, "B^{times}({base})"),
        }
    }
}

/// Names a cube average `‖·‖_{X,Q}`: plain `L^r` or an Orlicz space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormSpec {
    Lebesgue(f64),
    Young(YoungFunction),
}

impl NormSpec {
    pub fn lebesgue(r: f64) -> Result<Self> {
        let spec = Self::Lebesgue(r);
        spec.validate()?;
        Ok(spec)
    }

    /// `L(log L)^alpha`.
    pub fn llog(alpha: f64) -> Self {
        Self::Young(YoungFunction::llog(alpha))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Lebesgue(r) if !(r.is_finite() && *r >= 1.0) => Err(Error::InvalidParameter(
                format!("L^r needs r >= 1, got {r}"),
            )),
            Self::Lebesgue(_) => Ok(()),
            Self::Young(y) => y.validate(),
        }
    }

    /// The Young function inverse (`t^{1/r}` for `L^r`).
    pub fn inverse(&self, s: f64, tol: f64) -> Result<f64> {
        match self {
            Self::Lebesgue(r) => Ok(s.powf(1.0 / r)),
            Self::Young(y) => y.inverse(s, tol),
        }
    }

    pub fn young(&self) -> YoungFunction {
        match self {
            Self::Lebesgue(r) if *r == 1.0 => YoungFunction::Identity,
            Self::Lebesgue(r) => YoungFunction::PowerLog { p: *r, alpha: 0.0 },
            Self::Young(y) => y.clone(),
        }
    }

    /// Whether this is exactly the `L¹` average.
    pub fn is_l1(&self) -> bool {
        match self {
            Self::Lebesgue(r) => *r == 1.0,
            Self::Young(YoungFunction::Identity) => true,
            Self::Young(YoungFunction::PowerLog { p, alpha }) => *p == 1.0 && *alpha == 0.0,
            Self::Young(_) => false,
        }
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Lebesgue(r) => write!(f, "L^{r}"),
            Self::Young(y) => write!(f, "{y}"),
        }
    }
}

fn parse_num(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse(format!("bad {what} `{s}`")))
}

fn parse_young(s: &str) -> Result<YoungFunction> {
    if s == "expL" {
        return Ok(YoungFunction::Exp);
    }
    if let Some(rest) = s.strip_prefix("expL^{1/") {
        let q = rest
            .strip_suffix('}')
            .ok_or_else(|| Error::Parse(format!("unterminated `{s}`")))?;
        return Ok(YoungFunction::ExpPower {
            q: parse_num(q, "exp-power q")?,
        });
    }
    if let Some(rest) = s.strip_prefix("Lp") {
        let (p, alpha) = rest
            .split_once("logL")
            .ok_or_else(|| Error::Parse(format!("expected `Lp{{p}}logL{{alpha}}`, got `{s}`")))?;
        return Ok(YoungFunction::PowerLog {
            p: parse_num(p, "power p")?,
            alpha: parse_num(alpha, "log power alpha")?,
        });
    }
    if let Some(rest) = s.strip_prefix("B^") {
        let (m, inner) = rest
            .split_once('(')
            .ok_or_else(|| Error::Parse(format!("expected `B^m(...)`, got `{s}`")))?;
        let inner = inner
            .strip_suffix(')')
            .ok_or_else(|| Error::Parse(format!("unbalanced parentheses in `{s}`")))?;
        let times: usize = m
            .parse()
            .map_err(|_| Error::Parse(format!("bad composition count `{m}`")))?;
        if times == 0 {
            return Err(Error::Parse("composition count must be >= 1".into()));
        }
        let base = match inner.parse::<NormSpec>()? {
            NormSpec::Young(y) => y,
            NormSpec::Lebesgue(r) => YoungFunction::PowerLog { p: r, alpha: 0.0 },
        };
        return Ok(YoungFunction::Composed {
            base: Box::new(base),
            times,
        });
    }
    Err(Error::Parse(format!("unknown norm spec `{s}`")))
}

impl FromStr for YoungFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let y = parse_young(s.trim())?;
        y.validate()?;
        Ok(y)
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = if let Some(r) = s.strip_prefix("L^") {
            NormSpec::Lebesgue(parse_num(r, "exponent r")?)
        } else {
            NormSpec::Young(parse_young(s)?)
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `‖f‖_{X,Q}` for sampled values of `f` on the cells of `Q` (equal weights).
pub fn luxemburg_of_values(values: &[f64], spec: &NormSpec, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if values.is_empty() {
        return Err(Error::InvalidParameter("empty cube".into()));
    }
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Ok(0.0);
    }
    let count = values.len() as f64;
    match spec {
        NormSpec::Lebesgue(r) if *r == 1.0 => {
            Ok(values.iter().map(|v| v.abs()).sum::<f64>() / count)
        }
        NormSpec::Lebesgue(r) => {
            // scale by max to avoid overflow in |f|^r
            let s: f64 = values.iter().map(|v| (v.abs() / max).powf(*r)).sum();
            Ok(max * (s / count).powf(1.0 / r))
        }
        NormSpec::Young(YoungFunction::Identity) => {
            Ok(values.iter().map(|v| v.abs()).sum::<f64>() / count)
        }
        NormSpec::Young(y) => luxemburg_bisect(values, y, max, tol),
    }
}

fn luxemburg_bisect(values: &[f64], y: &YoungFunction, max: f64, tol: f64) -> Result<f64> {
    let count = values.len() as f64;
    // average of B(|f|/λ), minus one; decreasing in λ
    let excess = |lambda: f64| -> f64 {
        let inv = 1.0 / lambda;
        values.iter().map(|v| y.eval(v.abs() * inv)).sum::<f64>() / count - 1.0
    };
    let mut hi = max / y.inverse(1.0, 1e-12)?;
    let mut lo = max / y.inverse(count, 1e-12)?;
    let mut guard = 0;
    while excess(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::NonConvergence("Luxemburg upper bracket".into()));
        }
    }
    while lo > 0.0 && excess(lo) <= 0.0 {
        hi = lo;
        lo *= 0.5;
        guard += 1;
        if guard > 400 {
            return Err(Error::NonConvergence("Luxemburg lower bracket".into()));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol * hi {
            return Ok(0.5 * (lo + hi));
        }
        let mid = if lo > 0.0 && hi / lo > 4.0 {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NonConvergence(format!(
        "Luxemburg bisection for {y} did not converge"
    )))
}

/// `‖f‖_{X,Q}`; `L^r` in closed form, Orlicz spaces by bisection on `λ`.
pub fn luxemburg_norm(f: &GridFunction, cube: &Cube, spec: &NormSpec, tol: f64) -> Result<f64> {
    luxemburg_of_values(&f.restrict(cube), spec, tol)
}

/// `sup_t A^{-1}(t) B^{-1}(t) / C^{-1}(t)` over `t ∈ [1e-3, 1e6]`.
///
/// A value `κ ≤ 1` means the triple satisfies the inverse inequality exactly;
/// in general `‖fg‖_C ≤ 2κ ‖f‖_A ‖g‖_B`.
pub fn holder_defect(a: &NormSpec, b: &NormSpec, c: &NormSpec) -> Result<f64> {
    let mut kappa: f64 = 0.0;
    for k in 0..=180 {
        let t = 10f64.powf(-3.0 + k as f64 * 0.05);
        let num = a.inverse(t, 1e-12)? * b.inverse(t, 1e-12)?;
        let den = c.inverse(t, 1e-12)?;
        kappa = kappa.max(num / den);
    }
    Ok(kappa)
}

/// Relative slack allowed when validating a Hölder triple.
pub const HOLDER_TRIPLE_SLACK: f64 = 0.01;

/// `‖fg‖_{C,Q} / (‖f‖_{A,Q} ‖g‖_{B,Q})` for a validated triple
/// (`A^{-1}B^{-1} ≤ C^{-1}` within 1% on the sampled range).
pub fn holder_check(
    f: &GridFunction,
    g: &GridFunction,
    cube: &Cube,
    a: &NormSpec,
    b: &NormSpec,
    c: &NormSpec,
) -> Result<f64> {
    let kappa = holder_defect(a, b, c)?;
    if kappa > 1.0 + HOLDER_TRIPLE_SLACK {
        return Err(Error::InvalidParameter(format!(
            "({a}, {b}, {c}) is not a Hölder triple: A^-1 B^-1 / C^-1 reaches {kappa:.4}"
        )));
    }
    holder_ratio(f, g, cube, a, b, c)
}

/// The Hölder ratio without triple validation.
pub fn holder_ratio(
    f: &GridFunction,
    g: &GridFunction,
    cube: &Cube,
    a: &NormSpec,
    b: &NormSpec,
    c: &NormSpec,
) -> Result<f64> {
    let fg = f.mul(g)?;
    let num = luxemburg_norm(&fg, cube, c, DEFAULT_TOL)?;
    let den = luxemburg_norm(f, cube, a, DEFAULT_TOL)? * luxemburg_norm(g, cube, b, DEFAULT_TOL)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::E;

    #[test]
    fn young_eval_examples() {
        assert_eq!(YoungFunction::llog(1.0).eval(1.0), 1.0);
        assert_eq!(YoungFunction::Exp.eval(0.0), 0.0);
        let v = YoungFunction::PowerLog { p: 2.0, alpha: 1.0 }.eval(E);
        assert!((v - 2.0 * E * E).abs() < 1e-12);
        // alpha = 0 reduces exactly to t^p
        let y = YoungFunction::PowerLog { p: 2.5, alpha: 0.0 };
        assert_eq!(y.eval(3.7), 3.7f64.powf(2.5));
    }

    #[test]
    fn composition_evaluates_right_to_left() {
        let b = YoungFunction::PowerLog { p: 2.0, alpha: 0.0 };
        let b2 = YoungFunction::iterate(b, 2);
        assert_eq!(b2.eval(3.0), 81.0);
        let c: YoungFunction = "B^2(Lp1logL1)".parse().unwrap();
        let inner = YoungFunction::llog(1.0).eval(E);
        assert!((c.eval(E) - YoungFunction::llog(1.0).eval(inner)).abs() < 1e-12);
    }

    #[test]
    fn young_inverse_examples() {
        assert_eq!(YoungFunction::Identity.inverse(5.0, 1e-12).unwrap(), 5.0);
        let sq = YoungFunction::PowerLog { p: 2.0, alpha: 0.0 };
        assert!((sq.inverse(9.0, 1e-12).unwrap() - 3.0).abs() < 1e-12);
        let ll = YoungFunction::llog(1.0);
        let t = ll.inverse(2.0 * E, 1e-12).unwrap();
        assert!((ll.eval(t) - 2.0 * E).abs() <= 1e-12 * 2.0 * E);
        assert!((t - E).abs() < 1e-10);
        assert!(ll.inverse(-1.0, 1e-12).is_err());
    }

    #[test]
    fn validation_rejects_non_young() {
        assert!(YoungFunction::power_log(0.5, 0.0).is_err());
        assert!(YoungFunction::power_log(1.0, -1.0).is_err());
        // e^{sqrt t} - 1 is concave near the origin
        assert!("expL^{1/2}".parse::<YoungFunction>().is_err());
        assert!("expL^{1/0.5}".parse::<YoungFunction>().is_ok());
        assert!("B^0(expL)".parse::<YoungFunction>().is_err());
    }

    #[test]
    fn parse_examples() {
        assert_eq!("L^2".parse::<NormSpec>().unwrap(), NormSpec::Lebesgue(2.0));
        assert_eq!(
            "Lp2logL0.5".parse::<NormSpec>().unwrap(),
            NormSpec::Young(YoungFunction::PowerLog { p: 2.0, alpha: 0.5 })
        );
        assert_eq!(
            "expL".parse::<NormSpec>().unwrap(),
            NormSpec::Young(YoungFunction::Exp)
        );
        assert_eq!(
            "expL^{1/0.6}".parse::<NormSpec>().unwrap(),
            NormSpec::Young(YoungFunction::ExpPower { q: 0.6 })
        );
        assert!("L^0.5".parse::<NormSpec>().is_err());
        assert!("Lq2".parse::<NormSpec>().is_err());
        assert!("B^2(Lp1logL1".parse::<NormSpec>().is_err());
    }

    fn unit_grid() -> (Grid, Cube) {
        let g = Grid::new(1, 1.0, 16).unwrap();
        let q = Cube::from_coords(&g, &[0.0], 1.0).unwrap();
        (g, q)
    }

    #[test]
    fn luxemburg_closed_forms() {
        let (g, q) = unit_grid();
        let three = GridFunction::constant(&g, 3.0).unwrap();
        let l1 = NormSpec::Lebesgue(1.0);
        assert!((luxemburg_norm(&three, &q, &l1, DEFAULT_TOL).unwrap() - 3.0).abs() < 1e-14);

        // e^{1/λ} - 1 = 1  ⇒  λ = 1/ln 2
        let one = GridFunction::constant(&g, 1.0).unwrap();
        let expl = NormSpec::Young(YoungFunction::Exp);
        let v = luxemburg_norm(&one, &q, &expl, DEFAULT_TOL).unwrap();
        assert!((v - 1.0 / 2f64.ln()).abs() < 1e-8, "{v}");

        // f = 2 on [0, 1/2), 0 on [1/2, 1): (avg f²)^{1/2} = √2
        let two_level =
            GridFunction::from_fn(&g, |x| if (0.0..0.5).contains(&x[0]) { 2.0 } else { 0.0 })
                .unwrap();
        let l2 = NormSpec::Lebesgue(2.0);
        let v = luxemburg_norm(&two_level, &q, &l2, DEFAULT_TOL).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-12);
        let t2 = NormSpec::Young(YoungFunction::PowerLog { p: 2.0, alpha: 0.0 });
        let v = luxemburg_norm(&two_level, &q, &t2, DEFAULT_TOL).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-8);

        assert_eq!(
            luxemburg_norm(&GridFunction::zeros(&g), &q, &expl, DEFAULT_TOL).unwrap(),
            0.0
        );
        assert!(luxemburg_norm(&one, &q, &expl, 0.0).is_err());
    }

    #[test]
    fn llog_of_constant_one_is_one() {
        let (g, q) = unit_grid();
        let one = GridFunction::constant(&g, 1.0).unwrap();
        for alpha in [0.5, 1.0, 2.0] {
            let v = luxemburg_norm(&one, &q, &NormSpec::llog(alpha), DEFAULT_TOL).unwrap();
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn holder_constants_give_one() {
        let (g, q) = unit_grid();
        let one = GridFunction::constant(&g, 1.0).unwrap();
        let l2 = NormSpec::Lebesgue(2.0);
        let l1 = NormSpec::Lebesgue(1.0);
        let r = holder_check(&one, &one, &q, &l2, &l2, &l1).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn llog_exp_pair_holds_only_up_to_a_constant() {
        // (t(1+log⁺t))^{-1}(t) · log(1+t) exceeds t near t = e^{e²}
        let a = NormSpec::llog(1.0);
        let b = NormSpec::Young(YoungFunction::Exp);
        let c = NormSpec::Lebesgue(1.0);
        let kappa = holder_defect(&a, &b, &c).unwrap();
        assert!(kappa > 1.1 && kappa < 1.2, "{kappa}");
        let (g, q) = unit_grid();
        let one = GridFunction::constant(&g, 1.0).unwrap();
        assert!(holder_check(&one, &one, &q, &a, &b, &c).is_err());
    }

    #[test]
    fn submultiplicativity() {
        assert!(YoungFunction::Identity.is_submultiplicative(0.01));
        assert!(YoungFunction::llog(1.0).is_submultiplicative(0.01));
        assert!(!YoungFunction::Exp.is_submultiplicative(0.01));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn young_strategy() -> impl Strategy<Value = NormSpec> {
            prop_oneof![
                (1.0f64..4.0).prop_map(NormSpec::Lebesgue),
                ((1.0f64..3.0), (0.0f64..2.0))
                    .prop_map(|(p, alpha)| NormSpec::Young(YoungFunction::PowerLog { p, alpha })),
                Just(NormSpec::Young(YoungFunction::Exp)),
                (0.3f64..1.0).prop_map(|q| NormSpec::Young(YoungFunction::ExpPower { q })),
            ]
        }

        fn values() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0f64..5.0, 1..40)
        }

        proptest! {
            #[test]
            fn display_parses_back(spec in young_strategy()) {
                let text = spec.to_string();
                prop_assert_eq!(text.parse::<NormSpec>().unwrap(), spec);
            }

            #[test]
            fn homogeneous(v in values(), c in 0.01f64..20.0, spec in young_strategy()) {
                let tol = 1e-10;
                let base = luxemburg_of_values(&v, &spec, tol).unwrap();
                let scaled: Vec<f64> = v.iter().map(|x| -c * x).collect();
                let s = luxemburg_of_values(&scaled, &spec, tol).unwrap();
                prop_assert!((s - c * base).abs() <= 4.0 * tol * c * base + 1e-300);
            }

            #[test]
            fn monotone(v in values(), frac in proptest::collection::vec(0.0f64..1.0, 40), spec in young_strategy()) {
                let tol = 1e-10;
                let smaller: Vec<f64> = v.iter().zip(&frac).map(|(x, t)| x * t).collect();
                let big = luxemburg_of_values(&v, &spec, tol).unwrap();
                let small = luxemburg_of_values(&smaller, &spec, tol).unwrap();
                prop_assert!(small <= big * (1.0 + 4.0 * tol));
            }

            #[test]
            fn power_young_matches_lebesgue(v in values(), r in 1.0f64..4.0) {
                let tol = 1e-10;
                let fast = luxemburg_of_values(&v, &NormSpec::Lebesgue(r), tol).unwrap();
                let slow = luxemburg_of_values(
                    &v,
                    &NormSpec::Young(YoungFunction::PowerLog { p: r, alpha: 0.0 }),
                    tol,
                ).unwrap();
                prop_assert!((fast - slow).abs() <= 10.0 * tol * fast.max(1e-300));
            }

            // With K = golden ratio, t(1+log⁺t)^a ≤ t + t² (a ≤ 1) gives
            // avg B(f/(K‖f‖₂)) ≤ 1/K + 1/K² = 1.
            #[test]
            fn llog_nested_in_l2(v in values(), a in prop_oneof![Just(0.5f64), Just(1.0f64)]) {
                let tol = 1e-10;
                let golden = 0.5 * (1.0 + 5f64.sqrt());
                let ll = luxemburg_of_values(&v, &NormSpec::llog(a), tol).unwrap();
                let l2 = luxemburg_of_values(&v, &NormSpec::Lebesgue(2.0), tol).unwrap();
                prop_assert!(ll <= golden * l2 * (1.0 + 4.0 * tol));
            }

            #[test]
            fn cauchy_schwarz(f in proptest::collection::vec(0.0f64..3.0, 16), g in proptest::collection::vec(0.0f64..3.0, 16)) {
                let grid = Grid::new(1, 1.0, 16).unwrap();
                let q = grid.whole();
                let f = GridFunction::new(grid.clone(), f).unwrap();
                let g = GridFunction::new(grid.clone(), g).unwrap();
                let l2 = NormSpec::Lebesgue(2.0);
                let r = holder_check(&f, &g, &q, &l2, &l2, &NormSpec::Lebesgue(1.0)).unwrap();
                prop_assert!(r <= 1.0 + 1e-12);
            }

            #[test]
            fn llog_exp_ratio_within_scaled_bound(f in proptest::collection::vec(0.0f64..50.0, 16)) {
                let grid = Grid::new(1, 1.0, 16).unwrap();
                let q = grid.whole();
                let f = GridFunction::new(grid.clone(), f).unwrap();
                let one = GridFunction::constant(&grid, 1.0).unwrap();
                let (a, b, c) = (NormSpec::llog(1.0), NormSpec::Young(YoungFunction::Exp), NormSpec::Lebesgue(1.0));
                let kappa = holder_defect(&a, &b, &c).unwrap();
                let r = holder_ratio(&f, &one, &q, &a, &b, &c).unwrap();
                prop_assert!(r <= 2.0 * kappa);
            }
        }
    }
}
