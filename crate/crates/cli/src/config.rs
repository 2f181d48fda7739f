//! Run configuration: a JSON file, command-line flags layered on top, and
//! defaults for whatever is still missing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Weight and symbol strings (`pow{beta}`, `one`, `bmolog`, `file:path.csv`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    /// `u`, or its factors `u_i` where a product weight is meant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<String>,
    /// Symbol of the commutator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    /// `p_i`; harnesses with a single `p` take the one entry, or the
    /// harmonic combination `1/p = Σ 1/p_i` when several are given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

/// Everything a run can be told. Every field is optional so files and
/// flags can be merged; [`Config::resolve`] fills the gaps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Weights>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Exponents>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,

    // command specific
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theorem: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
    /// CZ base `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Range `lo..hi` of dyadic exponents for the growth check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<String>,
    /// Orlicz function of the weak maximal harness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub young: Option<String>,
    /// Scale of maximal operators: `one`, `pow{e}` or `phi{theta}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_points: Option<usize>,
    /// Bundle for the strong harness: `log{delta}` or `pow{r}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unchecked: Option<bool>,
    /// Input functions as grid CSV files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<PathBuf>>,
    /// Frequencies for the Fourier probe; components separated by `:`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<String>>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `flags` win.
    pub fn overlay(mut self, flags: &Config) -> Self {
        overlay!(
            self, flags, command, m, n, resolution, half_width, kernel, norms, ell, seed, out_dir,
            theorem, case, delta, epsilon, corpus_size, family, refine, a, k, young, phi,
            lambda_points, bundle, unchecked, inputs, xi
        );
        if let Some(fw) = &flags.weights {
            let w = self.weights.get_or_insert_with(Weights::default);
            overlay!(w, fw, u, v, w, b);
        }
        if let Some(fe) = &flags.exponents {
            let e = self.exponents.get_or_insert_with(Exponents::default);
            overlay!(e, fe, p, q);
        }
        self
    }

    /// Fills defaults for the shared keys; command specific keys stay
    /// optional and are defaulted where they are used.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        if self.command.is_none() {
            return Err(CliError::Config("no command given".into()));
        }
        let n = *self.n.get_or_insert(1);
        let m = *self.m.get_or_insert(1);
        if n == 0 || m == 0 {
            return Err(CliError::Config("n and m must be at least 1".into()));
        }
        self.resolution.get_or_insert(64);
        self.half_width.get_or_insert(2.0);
        self.kernel.get_or_insert_with(|| format!("frac{}", (n * m) as f64 / 2.0));
        self.ell.get_or_insert(0);
        self.seed.get_or_insert(0);
        self.out_dir.get_or_insert_with(|| PathBuf::from("out"));
        let w = self.weights.get_or_insert_with(Weights::default);
        w.u.get_or_insert_with(|| vec!["one".into()]);
        w.v.get_or_insert_with(|| vec!["one".into(); m]);
        w.w.get_or_insert_with(|| "one".into());
        w.b.get_or_insert_with(|| "bmolog".into());
        let e = self.exponents.get_or_insert_with(Exponents::default);
        let p = e.p.get_or_insert_with(|| vec![2.0; m]).clone();
        if p.is_empty() {
            return Err(CliError::Config("exponents.p is empty".into()));
        }
        let harmonic = 1.0 / p.iter().map(|x| 1.0 / x).sum::<f64>();
        e.q.get_or_insert(harmonic);
        Ok(self)
    }

    pub fn command(&self) -> &str {
        self.command.as_deref().unwrap_or("")
    }

    pub fn m(&self) -> usize {
        self.m.unwrap_or(1)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(1)
    }

    pub fn resolution(&self) -> usize {
        self.resolution.unwrap_or(64)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width.unwrap_or(2.0)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn ell(&self) -> u8 {
        self.ell.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn weights(&self) -> Weights {
        self.weights.clone().unwrap_or_default()
    }

    pub fn p_list(&self) -> Vec<f64> {
        self.exponents.as_ref().and_then(|e| e.p.clone()).unwrap_or_else(|| vec![2.0; self.m()])
    }

    /// The single exponent `p` of harnesses that take one.
    pub fn p_scalar(&self) -> f64 {
        let p = self.p_list();
        if p.len() == 1 {
            p[0]
        } else {
            1.0 / p.iter().map(|x| 1.0 / x).sum::<f64>()
        }
    }

    pub fn q(&self) -> f64 {
        self.exponents.as_ref().and_then(|e| e.q).unwrap_or_else(|| self.p_scalar())
    }
}
