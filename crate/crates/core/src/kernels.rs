//! Kernels `φ` on `(ℝⁿ)^m`, annulus masses, the scaling functions `Φ̃` and
//! `Φ_θ`, the growth-condition certifier, and the multilinear Bessel kernel.
//!
//! Every supported kernel depends on `y⃗` only through `s = Σ|y_i|`, so each
//! has a radial profile and annulus masses reduce to one-dimensional
//! integrals against the slice measure `σ(s) = c_{n,m} s^{nm-1}` of the
//! ℓ¹-type sphere `{Σ|y_i| = s}`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::quad;

/// Points sampled per annulus when estimating `sup_{𝒜} φ`.
pub const ANNULUS_SAMPLES: usize = 10_000;

/// Default `(δ, ε)` of the annulus `𝒜_{(t,δ,ε)}` in `Φ_θ` and the growth condition.
pub const DEFAULT_DELTA: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.5;

/// Default Bessel quadrature: `t ∈ [1/T, T]` with `M_t` log-spaced midpoints.
pub const BESSEL_TRUNCATION: f64 = 1e3;
pub const BESSEL_NODES: usize = 4096;

/// Recursion depth of the singular-cell average.
const CELL_DEPTH: usize = 8;

/// Radial profile `s ↦ φ` for kernels given by a profile of `s = Σ|y_i|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    Constant { value: f64 },
    /// `χ_{s ≤ radius}`.
    Indicator { radius: f64 },
    /// `e^{rate·s}`.
    Exponential { rate: f64 },
    /// `s^exponent` for `s > 0`.
    Power { exponent: f64 },
    /// Piecewise linear through `(s_k, v_k)`; constant below the first
    /// sample and zero beyond the last.
    Tabulated { s: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Indicator { radius } => {
                if s <= *radius {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Exponential { rate } => (rate * s).exp(),
            Self::Power { exponent } => {
                if s == 0.0 {
                    if *exponent < 0.0 {
                        f64::INFINITY
                    } else if *exponent == 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    s.powf(*exponent)
                }
            }
            Self::Tabulated { s: xs, values } => {
                if s <= xs[0] {
                    return values[0];
                }
                let last = xs.len() - 1;
                if s > xs[last] {
                    return 0.0;
                }
                let k = xs.partition_point(|&x| x < s).max(1);
                let (x0, x1) = (xs[k - 1], xs[k]);
                let w = (s - x0) / (x1 - x0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Indicator { radius } => vec![*radius],
            Self::Tabulated { s, .. } => s.clone(),
            _ => Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Tabulated { s, values } => {
                if s.len() < 2 || s.len() != values.len() {
                    return Err(Error::InvalidParameter(
                        "tabulated profile needs at least two (s, value) pairs".into(),
                    ));
                }
                if s.windows(2).any(|w| w[1] <= w[0]) || s[0] < 0.0 {
                    return Err(Error::InvalidParameter(
                        "tabulated profile needs strictly increasing s >= 0".into(),
                    ));
                }
            }
            Self::Indicator { radius } if !(*radius > 0.0) => {
                return Err(Error::InvalidParameter("indicator radius must be > 0".into()))
            }
            _ => {}
        }
        // nonnegative and monotone on a sample of s
        let samples: Vec<f64> = (0..=400).map(|k| 10f64.powf(-6.0 + 0.025 * k as f64)).collect();
        let vals: Vec<f64> = samples.iter().map(|&s| self.eval(s)).collect();
        if vals.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidParameter("kernel profile must be nonnegative".into()));
        }
        let up = vals.windows(2).all(|w| w[1] >= w[0]);
        let down = vals.windows(2).all(|w| w[1] <= w[0]);
        if !(up || down) {
            return Err(Error::InvalidParameter("kernel profile must be monotone".into()));
        }
        Ok(())
    }

    /// Reads `s,value` rows; a non-numeric first line is treated as a header.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (a, b) = (parts.next(), parts.next());
            match (a.map(str::parse::<f64>), b.map(str::parse::<f64>)) {
                (Some(Ok(x)), Some(Ok(v))) => {
                    s.push(x);
                    values.push(v);
                }
                _ if i == 0 => continue,
                _ => return Err(Error::Parse(format!("bad profile row `{line}`"))),
            }
        }
        let p = Self::Tabulated { s, values };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `(Σ|y_i|)^{α - nm}`, `0 < α < nm`.
    Fractional { alpha: f64 },
    Radial { profile: Profile },
    /// Multilinear Bessel kernel `G_α`.
    Bessel {
        alpha: f64,
        truncation: f64,
        nodes: usize,
    },
}

/// A nonnegative kernel on `(ℝⁿ)^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    n: usize,
    m: usize,
    family: KernelFamily,
}

impl Kernel {
    pub fn fractional(n: usize, m: usize, alpha: f64) -> Result<Self> {
        check_dims(n, m)?;
        let nm = (n * m) as f64;
        if !(alpha > 0.0 && alpha < nm) {
            return Err(Error::InvalidParameter(format!(
                "fractional kernel needs alpha in (0, nm) = (0, {nm}), got {alpha}"
            )));
        }
        Ok(Self {
            n,
            m,
            family: KernelFamily::Fractional { alpha },
        })
    }

    pub fn radial(n: usize, m: usize, profile: Profile) -> Result<Self> {
        check_dims(n, m)?;
        profile.validate()?;
        Ok(Self {
            n,
            m,
            family: KernelFamily::Radial { profile },
        })
    }

    pub fn bessel(n: usize, m: usize, alpha: f64) -> Result<Self> {
        Self::bessel_with(n, m, alpha, BESSEL_TRUNCATION, BESSEL_NODES)
    }

    pub fn bessel_with(n: usize, m: usize, alpha: f64, truncation: f64, nodes: usize) -> Result<Self> {
        check_dims(n, m)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Bessel kernel needs alpha > 0, got {alpha}"
            )));
        }
        if !(truncation > 1.0) || nodes < 16 {
            return Err(Error::InvalidParameter(
                "Bessel quadrature needs T > 1 and at least 16 nodes".into(),
            ));
        }
        Ok(Self {
            n,
            m,
            family: KernelFamily::Bessel {
                alpha,
                truncation,
                nodes,
            },
        })
    }

    /// Parses `frac{alpha}`, `bessel{alpha}` or `profile:path.csv`.
    pub fn parse(text: &str, n: usize, m: usize) -> Result<Self> {
        let text = text.trim();
        if let Some(a) = text.strip_prefix("frac") {
            let alpha = a
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad fractional order in `{text}`")))?;
            return Self::fractional(n, m, alpha);
        }
        if let Some(a) = text.strip_prefix("bessel") {
            let alpha = a
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad Bessel order in `{text}`")))?;
            return Self::bessel(n, m, alpha);
        }
        if let Some(path) = text.strip_prefix("profile:") {
            return Self::radial(n, m, Profile::load_csv(Path::new(path))?);
        }
        Err(Error::Parse(format!(
            "unknown kernel `{text}` (expected frac<alpha>, bessel<alpha> or profile:<file.csv>)"
        )))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `nm`, the dimension of the kernel's domain.
    pub fn dim(&self) -> usize {
        self.n * self.m
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    /// Whether `φ` blows up at the origin.
    pub fn is_singular(&self) -> bool {
        match &self.family {
            KernelFamily::Fractional { .. } => true,
            KernelFamily::Bessel { alpha, .. } => *alpha <= self.dim() as f64,
            KernelFamily::Radial { profile } => profile.eval(0.0).is_infinite(),
        }
    }

    /// `φ` as a function of `s = Σ|y_i|`.
    pub fn profile(&self, s: f64) -> f64 {
        match &self.family {
            KernelFamily::Fractional { alpha } => {
                if s == 0.0 {
                    f64::INFINITY
                } else {
                    s.powf(alpha - self.dim() as f64)
                }
            }
            KernelFamily::Radial { profile } => profile.eval(s),
            KernelFamily::Bessel {
                alpha,
                truncation,
                nodes,
            } => bessel_profile(*alpha, self.dim(), *truncation, *nodes, s),
        }
    }

    /// `s = Σ_i |y_i|` for a flat point of `(ℝⁿ)^m`.
    pub fn l1_radius(&self, y: &[f64]) -> f64 {
        y.chunks(self.n)
            .map(|yi| yi.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum()
    }

    /// `φ(y⃗)` for a flat point `y⃗ = (y_1, …, y_m)` of length `nm`.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "kernel point has {} coordinates, expected nm = {}",
                y.len(),
                self.dim()
            )));
        }
        let s = self.l1_radius(y);
        if s == 0.0 && self.is_singular() {
            return Err(Error::Singular("the origin of (R^n)^m".into()));
        }
        Ok(self.profile(s))
    }

    /// Value assigned to the axis-aligned cell `lo + [0, width)^{nm}`: the
    /// center value, or, when the closed cell touches the origin, the cell
    /// average by recursive `4^{nm}`-point subsampling.
    pub fn cell_value(&self, lo: &[f64], width: f64) -> f64 {
        debug_assert_eq!(lo.len(), self.dim());
        if touches_origin(lo, width) {
            self.cell_average(lo, width, CELL_DEPTH)
        } else {
            // l1_radius of the cell center, without allocating
            let r = lo
                .chunks(self.n)
                .map(|b| b.iter().map(|c| (c + 0.5 * width).powi(2)).sum::<f64>().sqrt())
                .sum();
            self.profile(r)
        }
    }

    fn cell_average(&self, lo: &[f64], width: f64, depth: usize) -> f64 {
        let d = self.dim();
        let sub = width / 4.0;
        let count = 4usize.pow(d as u32);
        let mut corner = vec![0.0; d];
        let mut center = vec![0.0; d];
        let mut total = 0.0;
        for k in 0..count {
            let mut rest = k;
            for axis in (0..d).rev() {
                corner[axis] = lo[axis] + (rest % 4) as f64 * sub;
                rest /= 4;
            }
            if depth > 0 && touches_origin(&corner, sub) {
                total += self.cell_average(&corner, sub, depth - 1);
            } else {
                for axis in 0..d {
                    center[axis] = corner[axis] + 0.5 * sub;
                }
                total += self.profile(self.l1_radius(&center));
            }
        }
        total / count as f64
    }

    /// `c_{n,m}` in `σ(s) = c_{n,m} s^{nm-1}`, the surface measure of
    /// `{Σ|y_i| = s}`: `ω_n^m Γ(n)^m / Γ(nm)` with `ω_n = 2π^{n/2}/Γ(n/2)`.
    pub fn slice_constant(&self) -> f64 {
        let n = self.n as f64;
        let omega = 2.0 * PI.powf(n / 2.0) / gamma(n / 2.0);
        (omega * gamma(n)).powi(self.m as i32) / gamma(n * self.m as f64)
    }

    /// `∫_{a < Σ|y_i| ≤ b} φ`, by the one-dimensional radial reduction.
    pub fn shell_mass(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0 && b >= a) {
            return Err(Error::InvalidParameter(format!("bad shell ({a}, {b}]")));
        }
        if a == b {
            return Ok(0.0);
        }
        if a == 0.0 {
            return self.mass_below(b);
        }
        let c = self.slice_constant();
        let d = self.dim() as f64;
        Ok(match &self.family {
            KernelFamily::Fractional { alpha } => c * (b.powf(*alpha) - a.powf(*alpha)) / alpha,
            KernelFamily::Radial {
                profile: Profile::Constant { value },
            } => c * value * (b.powf(d) - a.powf(d)) / d,
            KernelFamily::Radial {
                profile: Profile::Indicator { radius },
            } => {
                if a >= *radius {
                    0.0
                } else {
                    c * (b.min(*radius).powf(d) - a.powf(d)) / d
                }
            }
            KernelFamily::Radial { profile } => {
                let breaks = profile.breakpoints();
                quad::geometric(a, b, 1.5, &breaks, |s| profile.eval(s) * c * s.powf(d - 1.0))
            }
            KernelFamily::Bessel {
                alpha,
                truncation,
                nodes,
            } => bessel_shell_mass(*alpha, self.dim(), *truncation, *nodes, a, b) * c,
        })
    }

    /// `Φ̃(t) = ∫_{Σ|y_i| ≤ t} φ`.
    pub fn mass_below(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("Φ̃ needs t > 0, got {t}")));
        }
        let c = self.slice_constant();
        let d = self.dim() as f64;
        match &self.family {
            KernelFamily::Fractional { alpha } => return Ok(c * t.powf(*alpha) / alpha),
            KernelFamily::Radial {
                profile: Profile::Constant { value },
            } => return Ok(c * value * t.powf(d) / d),
            KernelFamily::Radial {
                profile: Profile::Indicator { radius },
            } => return Ok(c * t.min(*radius).powf(d) / d),
            KernelFamily::Bessel {
                alpha,
                truncation,
                nodes,
            } => return Ok(bessel_shell_mass(*alpha, self.dim(), *truncation, *nodes, 0.0, t) * c),
            _ => {}
        }
        // dyadic shells (t/2^{j+1}, t/2^j] down to negligible mass
        let mut sum = 0.0;
        let mut prev = f64::INFINITY;
        let mut rising = 0;
        for j in 0..4000 {
            let hi = t * 0.5f64.powi(j);
            let term = self.shell_mass(hi * 0.5, hi)?;
            sum += term;
            if term >= prev && term > 0.0 {
                rising += 1;
                if rising >= 10 {
                    return Err(Error::Divergent(format!(
                        "mass of the kernel near the origin does not converge (t = {t})"
                    )));
                }
            } else {
                rising = 0;
            }
            if j >= 4 && term <= 1e-15 * sum {
                let r = term / prev;
                let tail = if r < 1.0 { term * r / (1.0 - r) } else { 0.0 };
                return Ok(sum + tail);
            }
            prev = term;
        }
        Err(Error::NonConvergence(format!("Φ̃({t}) did not converge")))
    }

    /// Mass of `φ` over the annulus `𝒜_{(t,δ,ε)}`, radial reduction.
    pub fn annulus_mass(&self, annulus: &AnnulusSpec) -> Result<f64> {
        self.shell_mass(annulus.inner(), annulus.outer())
    }
}

fn check_dims(n: usize, m: usize) -> Result<()> {
    if !(1..=3).contains(&n) || m == 0 {
        return Err(Error::InvalidParameter(format!(
            "kernel dimensions need n in 1..=3 and m >= 1, got n = {n}, m = {m}"
        )));
    }
    Ok(())
}

fn touches_origin(lo: &[f64], width: f64) -> bool {
    lo.iter().all(|&c| c <= 0.0 && c + width >= 0.0)
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            KernelFamily::Fractional { alpha } => write!(f, "frac{alpha}"),
            KernelFamily::Bessel { alpha, .. } => write!(f, "bessel{alpha}"),
            KernelFamily::Radial { profile } => match profile {
                Profile::Constant { value } => write!(f, "const{value}"),
                Profile::Indicator { radius } => write!(f, "indicator{radius}"),
                Profile::Exponential { rate } => write!(f, "exp{rate}"),
                Profile::Power { exponent } => write!(f, "power{exponent}"),
                Profile::Tabulated { s, .. } => write!(f, "profile[{} samples]", s.len()),
            },
        }
    }
}

/// `C_{α,n,m} = 1 / (2^{nm} Γ(α/2) π^{nm/2})`.
pub fn bessel_constant(alpha: f64, nm: usize) -> f64 {
    let d = nm as f64;
    1.0 / (2f64.powf(d) * gamma(alpha / 2.0) * PI.powf(d / 2.0))
}

/// `G_α` at `s = Σ|x_i|` by log-spaced midpoint quadrature of
/// `∫ e^{-t} e^{-s²/(4t)} t^{(α-nm)/2} dt/t` on `[1/T, T]` with `nodes`
/// nodes. When `s²/200 < 1/T` the lower limit moves down to `s²/200` at the
/// same node density, so the Gaussian factor is resolved for small `s`;
/// at `s = 0` (only finite for `α > nm`) the piece below `1/T` is added in
/// closed form.
pub fn bessel_profile(alpha: f64, nm: usize, truncation: f64, nodes: usize, s: f64) -> f64 {
    let beta = 0.5 * (alpha - nm as f64);
    if s == 0.0 && beta <= 0.0 {
        return f64::INFINITY;
    }
    let log_t = truncation.ln();
    let mut lo = -log_t;
    if s > 0.0 {
        lo = lo.min((s * s / 200.0).ln());
    }
    let span = log_t - lo;
    let count = ((nodes as f64) * span / (2.0 * log_t)).ceil() as usize;
    let du = span / count as f64;
    let s2 = 0.25 * s * s;
    let mut acc = 0.0;
    for k in 0..count {
        let u = lo + (k as f64 + 0.5) * du;
        let t = u.exp();
        acc += (-t - s2 / t + beta * u).exp();
    }
    acc *= du;
    if s == 0.0 {
        acc += (beta * lo).exp() / beta;
    }
    bessel_constant(alpha, nm) * acc
}

/// `∫_{a<s≤b} G_α(s) s^{nm-1} ds` with the `s`-integral done first: for
/// fixed `t` it is an incomplete gamma function, leaving one log-spaced
/// quadrature in `t`.
fn bessel_shell_mass(alpha: f64, nm: usize, truncation: f64, nodes: usize, a: f64, b: f64) -> f64 {
    let half = 0.5 * nm as f64;
    let g = 0.5 * alpha;
    let log_t = truncation.ln();
    let near = if a > 0.0 { a } else { b };
    let lo = ((1.0 / truncation).min(near * near / 200.0) * 1e-2).ln();
    let span = log_t - lo;
    let count = ((nodes as f64) * span / (2.0 * log_t)).ceil() as usize;
    let du = span / count as f64;
    let mut acc = 0.0;
    for k in 0..count {
        let u = lo + (k as f64 + 0.5) * du;
        let t = u.exp();
        let (xa, xb) = (a * a / (4.0 * t), b * b / (4.0 * t));
        let diff = if xa > half {
            gamma_ur(half, xa) - gamma_ur(half, xb)
        } else {
            gamma_lr(half, xb) - if a > 0.0 { gamma_lr(half, xa) } else { 0.0 }
        };
        if diff > 0.0 {
            acc += (-t + g * u).exp() * diff;
        }
    }
    acc *= du;
    if a == 0.0 {
        let l = lo.exp();
        acc += l.powf(g) / g - l.powf(g + 1.0) / (g + 1.0);
    }
    bessel_constant(alpha, nm) * 2f64.powf(nm as f64 - 1.0) * gamma(half) * acc
}

/// Leading-order `H_α(x⃗)` near the origin, `0 < |x⃗| < 2` (Euclidean norm on `ℝ^{nm}`).
pub fn h_alpha(alpha: f64, n: usize, m: usize, x: &[f64]) -> Result<f64> {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(r > 0.0 && r < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "H_alpha is defined for 0 < |x| < 2, got |x| = {r}"
        )));
    }
    let nm = (n * m) as f64;
    Ok(if alpha < nm {
        r.powf(alpha - nm) + 1.0
    } else if alpha == nm {
        (1.0 / r).ln() + 1.0
    } else {
        1.0
    })
}

/// `𝒜_{(t,δ,ε)} = {δ(1-ε)t < Σ|y_i| ≤ δ(1+ε)2t}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnulusSpec {
    pub t: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl AnnulusSpec {
    pub fn new(t: f64, delta: f64, epsilon: f64) -> Result<Self> {
        if !(t > 0.0 && delta > 0.0 && (0.0..1.0).contains(&epsilon)) {
            return Err(Error::InvalidParameter(format!(
                "annulus needs t > 0, delta > 0, 0 <= epsilon < 1; got ({t}, {delta}, {epsilon})"
            )));
        }
        Ok(Self { t, delta, epsilon })
    }

    pub fn inner(&self) -> f64 {
        self.delta * (1.0 - self.epsilon) * self.t
    }

    pub fn outer(&self) -> f64 {
        self.delta * (1.0 + self.epsilon) * 2.0 * self.t
    }
}

/// `∫_{𝒜} φ` by cell quadrature on the grid's lattice in `(ℝⁿ)^m`. Cells
/// inside the annulus use [`Kernel::cell_value`]; cells cut by its boundary
/// are weighted by `4^{nm}`-point subsampling. Annuli that do not fit inside
/// the box `[-L, L)^{nm}` fall back to the radial formula.
pub fn annulus_integral(kernel: &Kernel, annulus: &AnnulusSpec, grid: &Grid) -> Result<f64> {
    if grid.dim() != kernel.n() {
        return Err(Error::DimensionMismatch(format!(
            "grid dimension {} vs kernel n = {}",
            grid.dim(),
            kernel.n()
        )));
    }
    let (inner, outer) = (annulus.inner(), annulus.outer());
    if outer > grid.half_width() {
        return kernel.annulus_mass(annulus);
    }
    let d = kernel.dim();
    let n = kernel.n();
    let res = grid.resolution();
    let h = grid.cell_width();
    let total = res.pow(d as u32);
    let sub = h / 4.0;
    let sub_count = 4usize.pow(d as u32);
    let mut lo = vec![0.0; d];
    let mut point = vec![0.0; d];
    let mut acc = 0.0;
    for k in 0..total {
        let mut rest = k;
        for axis in (0..d).rev() {
            lo[axis] = -grid.half_width() + (rest % res) as f64 * h;
            rest /= res;
        }
        let (mut smin, mut smax) = (0.0, 0.0);
        for slot in lo.chunks(n) {
            let (mut near, mut far) = (0.0, 0.0);
            for &c in slot {
                let (a, b) = (c, c + h);
                let nearest = if a > 0.0 { a } else if b < 0.0 { b } else { 0.0 };
                let farthest = a.abs().max(b.abs());
                near += nearest * nearest;
                far += farthest * farthest;
            }
            smin += near.sqrt();
            smax += far.sqrt();
        }
        if smax <= inner || smin > outer {
            continue;
        }
        if smin > inner && smax <= outer {
            acc += kernel.cell_value(&lo, h);
            continue;
        }
        let mut part = 0.0;
        for j in 0..sub_count {
            let mut rest = j;
            for axis in (0..d).rev() {
                point[axis] = lo[axis] + ((rest % 4) as f64 + 0.5) * sub;
                rest /= 4;
            }
            let s = kernel.l1_radius(&point);
            if s > inner && s <= outer {
                part += kernel.profile(s);
            }
        }
        acc += part / sub_count as f64;
    }
    Ok(acc * h.powi(d as i32))
}

/// `Φ̃(t)`.
pub fn tilde_phi(kernel: &Kernel, t: f64) -> Result<f64> {
    kernel.mass_below(t)
}

/// `Φ_θ(t)` with the terms that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiTheta {
    pub value: f64,
    /// First index `ν₀ = ⌈log_{1/2} t⌉`.
    pub first_nu: i64,
    /// Annulus masses `∫_{𝒜(2^{-ν},δ,ε)} φ` for `ν = ν₀, ν₀+1, …`.
    pub terms: Vec<f64>,
    /// Geometric estimate of the omitted `θ`-powered tail.
    pub tail: f64,
}

/// `Φ_θ(t) = [Σ_{ν ≥ log_{1/2} t} (∫_{𝒜(2^{-ν},δ,ε)} φ)^θ]^{1/θ}`, summed until
/// the terms are negligible, plus a geometric tail estimate.
pub fn phi_theta(kernel: &Kernel, theta: f64, t: f64, delta: f64, epsilon: f64) -> Result<PhiTheta> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Φ_θ needs 0 < θ <= 1, got {theta}"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("Φ_θ needs t > 0, got {t}")));
    }
    let x = -t.log2();
    let first_nu = (x - 1e-12).ceil() as i64;
    let mut terms = Vec::new();
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut rising = 0;
    for k in 0..4000i64 {
        let nu = first_nu + k;
        let annulus = AnnulusSpec::new(2f64.powi(-nu as i32), delta, epsilon)?;
        let mass = kernel.annulus_mass(&annulus)?;
        let term = mass.powf(theta);
        terms.push(mass);
        sum += term;
        if term >= prev && term > 0.0 {
            rising += 1;
            if rising >= 10 {
                return Err(Error::Divergent(format!(
                    "Φ_θ series is not summable (t = {t}, θ = {theta})"
                )));
            }
        } else {
            rising = 0;
        }
        if sum > 0.0 && k >= 2 && term <= 1e-14 * sum {
            let r = term / prev;
            let tail = if r < 1.0 { term * r / (1.0 - r) } else { 0.0 };
            return Ok(PhiTheta {
                value: (sum + tail).powf(1.0 / theta),
                first_nu,
                terms,
                tail,
            });
        }
        if sum == 0.0 && annulus.outer() < 1e-250 {
            break;
        }
        prev = term;
    }
    if sum == 0.0 {
        return Ok(PhiTheta {
            value: 0.0,
            first_nu,
            terms,
            tail: 0.0,
        });
    }
    Err(Error::NonConvergence(format!("Φ_θ({t}) did not converge")))
}

/// Deterministic low-discrepancy points of an annulus `{a < Σ|y_i| ≤ b}`.
///
/// Uses an additive recurrence (generalized golden ratio) with a seeded
/// random shift: `s` takes the first coordinate, the split of `s` between
/// the `m` slots and each slot's direction take the rest.
pub struct AnnulusSampler {
    n: usize,
    m: usize,
    steps: Vec<f64>,
    shift: Vec<f64>,
}

impl AnnulusSampler {
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        let dir_dims = if n == 3 { 2 } else { 1 };
        let dims = 1 + (m - 1) + m * dir_dims;
        // root of x^{d+1} = x + 1
        let mut g = 2.0f64;
        for _ in 0..64 {
            g = (1.0 + g).powf(1.0 / (dims as f64 + 1.0));
        }
        let steps = (1..=dims).map(|j| (1.0 / g.powi(j as i32)).fract()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dims).map(|_| rng.gen::<f64>()).collect();
        Self { n, m, steps, shift }
    }

    /// The `i`-th point with `s ∈ (a, b]`, written into `out` (length `nm`).
    pub fn point(&self, i: usize, a: f64, b: f64, out: &mut [f64]) {
        let u = |j: usize| (self.shift[j] + (i as f64 + 1.0) * self.steps[j]).fract();
        let s = a + (b - a) * (1.0 - u(0));
        // split s among slots via sorted uniforms
        let mut cuts: Vec<f64> = (0..self.m - 1).map(|j| u(1 + j)).collect();
        cuts.sort_by(|x, y| x.total_cmp(y));
        let mut prev = 0.0;
        let mut radii = Vec::with_capacity(self.m);
        for c in cuts.iter().chain(std::iter::once(&1.0)) {
            radii.push(s * (c - prev));
            prev = *c;
        }
        let base = self.m;
        for (slot, r) in radii.iter().enumerate() {
            let y = &mut out[slot * self.n..(slot + 1) * self.n];
            match self.n {
                1 => y[0] = if u(base + slot) < 0.5 { -r } else { *r },
                2 => {
                    let th = 2.0 * PI * u(base + slot);
                    y[0] = r * th.cos();
                    y[1] = r * th.sin();
                }
                _ => {
                    let z = 2.0 * u(base + 2 * slot) - 1.0;
                    let th = 2.0 * PI * u(base + 2 * slot + 1);
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    y[0] = r * rho * th.cos();
                    y[1] = r * rho * th.sin();
                    y[2] = r * z;
                }
            }
        }
    }
}

/// `φ̄(t) = sup_{𝒜_{(t,1,0)}} φ`, estimated on [`ANNULUS_SAMPLES`] points.
pub fn phi_bar(kernel: &Kernel, t: f64, seed: u64) -> Result<f64> {
    let annulus = AnnulusSpec::new(t, 1.0, 0.0)?;
    sampled_sup(kernel, annulus.inner(), annulus.outer(), seed)
}

fn sampled_sup(kernel: &Kernel, a: f64, b: f64, seed: u64) -> Result<f64> {
    let sampler = AnnulusSampler::new(kernel.n(), kernel.m(), seed);
    let mut y = vec![0.0; kernel.dim()];
    let mut sup: f64 = 0.0;
    let mut seen = 0;
    for i in 0..ANNULUS_SAMPLES {
        sampler.point(i, a, b, &mut y);
        let s = kernel.l1_radius(&y);
        if s > a && s <= b {
            sup = sup.max(kernel.profile(s));
            seen += 1;
        }
    }
    if seen == 0 {
        return Err(Error::InvalidParameter(format!(
            "no sampled point fell in the annulus ({a}, {b}]"
        )));
    }
    Ok(sup)
}

/// Per-scale ratios of the growth condition
/// `sup_{𝒜(2^k,1,0)} φ ≤ C 2^{-knm} ∫_{𝒜(2^k,δ,ε)} φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionDReport {
    pub delta: f64,
    pub epsilon: f64,
    pub k: Vec<i32>,
    pub sup: Vec<f64>,
    pub integral: Vec<f64>,
    pub ratio: Vec<f64>,
    pub c_max: f64,
    /// Ratios strictly increase across the whole range.
    pub unbounded_growth: bool,
}

pub fn condition_d_check(
    kernel: &Kernel,
    delta: f64,
    epsilon: f64,
    k_range: std::ops::RangeInclusive<i32>,
    seed: u64,
) -> Result<ConditionDReport> {
    let nm = kernel.dim() as i32;
    let mut report = ConditionDReport {
        delta,
        epsilon,
        k: Vec::new(),
        sup: Vec::new(),
        integral: Vec::new(),
        ratio: Vec::new(),
        c_max: 0.0,
        unbounded_growth: false,
    };
    for k in k_range {
        let t = 2f64.powi(k);
        let sup = phi_bar(kernel, t, seed)?;
        let integral = kernel.annulus_mass(&AnnulusSpec::new(t, delta, epsilon)?)?;
        let scaled = 2f64.powi(-k * nm) * integral;
        let ratio = if sup == 0.0 { 0.0 } else { sup / scaled };
        report.k.push(k);
        report.sup.push(sup);
        report.integral.push(integral);
        report.ratio.push(ratio);
        report.c_max = report.c_max.max(ratio);
    }
    report.unbounded_growth =
        report.ratio.len() >= 3 && report.ratio.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
    Ok(report)
}

/// Numerical Fourier transform of `G_α` compared against two closed forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesselProbe {
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    pub xi: Vec<Vec<f64>>,
    pub numeric: Vec<f64>,
    /// `(1 + 4π²|ξ|)^{-α/2}`.
    pub linear_candidate: Vec<f64>,
    /// `(1 + 4π²|ξ|²)^{-α/2}`.
    pub quadratic_candidate: Vec<f64>,
    pub linear_max_rel_err: f64,
    pub quadratic_max_rel_err: f64,
    /// `"linear"`, `"quadratic"` or `"neither"` (5% relative threshold).
    pub matches: String,
}

/// Computes `Ĝ_α(ξ⃗) = ∫ G_α(x⃗) e^{-2πi x⃗·ξ⃗} dx⃗` numerically for `n = 1`,
/// `m ∈ {1, 2}` at the given frequencies.
pub fn bessel_fourier_probe(kernel: &Kernel, xis: &[Vec<f64>]) -> Result<BesselProbe> {
    let KernelFamily::Bessel { alpha, .. } = kernel.family() else {
        return Err(Error::InvalidParameter("Fourier probe needs a Bessel kernel".into()));
    };
    if kernel.n() != 1 || kernel.m() > 2 {
        return Err(Error::InvalidParameter(
            "Fourier probe supports n = 1 and m in {1, 2}".into(),
        ));
    }
    let m = kernel.m();
    let (lo, hi) = (1e-20, 40.0);
    let mut numeric = Vec::new();
    let mut lin = Vec::new();
    let mut quad_c = Vec::new();
    for xi in xis {
        if xi.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "frequency has {} components, expected {m}",
                xi.len()
            )));
        }
        let value = if m == 1 {
            let w = 2.0 * PI * xi[0];
            2.0 * quad::geometric(lo, hi, 1.25, &[], |x| kernel.profile(x) * (w * x).cos())
        } else {
            let (w1, w2) = (2.0 * PI * xi[0], 2.0 * PI * xi[1]);
            // x1 = s w, x2 = s (1 - w), dx = s ds dw on the positive quadrant
            let inner = |s: f64| {
                let a = s * w2;
                let b = s * (w1 - w2);
                let c = s * (w1 + w2);
                let plus = if b.abs() < 1e-12 { a.cos() } else { ((a + b).sin() - a.sin()) / b };
                let minus = if c.abs() < 1e-12 {
                    (-a).cos()
                } else {
                    ((c - a).sin() + a.sin()) / c
                };
                0.5 * (plus + minus)
            };
            4.0 * quad::geometric(lo, hi, 1.25, &[], |s| kernel.profile(s) * s * inner(s))
        };
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        numeric.push(value);
        lin.push((1.0 + 4.0 * PI * PI * r).powf(-alpha / 2.0));
        quad_c.push((1.0 + 4.0 * PI * PI * r * r).powf(-alpha / 2.0));
    }
    let rel = |cand: &[f64]| {
        numeric
            .iter()
            .zip(cand)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max)
    };
    let (le, qe) = (rel(&lin), rel(&quad_c));
    let matches = if le.min(qe) > 0.05 {
        "neither"
    } else if le < qe {
        "linear"
    } else {
        "quadratic"
    };
    Ok(BesselProbe {
        alpha: *alpha,
        n: kernel.n(),
        m,
        xi: xis.to_vec(),
        numeric,
        linear_candidate: lin,
        quadratic_candidate: quad_c,
        linear_max_rel_err: le,
        quadratic_max_rel_err: qe,
        matches: matches.into(),
    })
}
