//! Batch runner behind the `mlpot` binary.
//!
//! Exit codes: 0 on success, 2 when a run refuses because a hypothesis of
//! the inequality is not met, 1 on any other error.

pub mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use mlpot::dyadic::{cz_decompose, default_base, CzInvariants, DyadicLattice};
use mlpot::grid::{FamilyKind, Grid, GridFunction};
use mlpot::kernels::{
    bessel_fourier_probe, condition_d_check, Kernel, DEFAULT_DELTA, DEFAULT_EPSILON,
};
use mlpot::operators::{
    apply_commutator, maximal, ExponentTuple, PhiScaling, PotentialOperator,
};
use mlpot::orlicz::{NormSpec, YoungFunction};
use mlpot::verify::{
    corpus, verify_coifman, verify_control, verify_fefferman_stein, verify_ftd, verify_strong,
    verify_weak_maximal, Case, ControlWeight, HarnessConfig, InequalityReport, StrongBundle,
    StrongSetup, CONTROL_DELTAS, LAMBDA_POINTS,
};
use mlpot::weights::WeightSpec;

pub use config::{Config, Exponents, Weights};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed header of the CSV summary.
pub const CSV_HEADER: [&str; 10] = [
    "theorem", "case", "m", "n", "N", "kernel", "ell", "max_ratio", "stable", "wall_ms",
];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] mlpot::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Lib(mlpot::Error::HypothesisUnmet(_)) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "mlpot", version, about = "Multilinear potential operators on grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply the potential operator to the input tuple.
    EvalOp(Flags),
    /// Apply the commutator with symbol `--b`.
    EvalCommutator(Flags),
    /// Multilinear Orlicz maximal function of the input tuple.
    Maximal(Flags),
    /// Dyadic Calderón–Zygmund decomposition, exported as JSON.
    CzDecompose(Flags),
    /// Growth condition of the kernel across dyadic scales.
    CheckConditionD(Flags),
    /// Run a theorem harness and write its report.
    Verify(Flags),
    /// Compare the Bessel kernel's Fourier transform with the candidates.
    BesselProbe(Flags),
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Self::EvalOp(f) => ("eval-op", f),
            Self::EvalCommutator(f) => ("eval-commutator", f),
            Self::Maximal(f) => ("maximal", f),
            Self::CzDecompose(f) => ("cz-decompose", f),
            Self::CheckConditionD(f) => ("check-condition-d", f),
            Self::Verify(f) => ("verify", f),
            Self::BesselProbe(f) => ("bessel-probe", f),
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON config file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long = "N")]
    pub resolution: Option<usize>,
    #[arg(long = "L")]
    pub half_width: Option<f64>,
    /// `frac<alpha>`, `bessel<alpha>` or `profile:<file.csv>`.
    #[arg(long, allow_hyphen_values = true)]
    pub kernel: Option<String>,
    /// Weight `u` (comma separated factors for product weights).
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    /// Weights `v_i`, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub w: Option<String>,
    /// Commutator symbol.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Norm specs, comma separated.
    #[arg(long)]
    pub norms: Option<String>,
    /// Exponents `p_i`, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<f64>,
    #[arg(long)]
    pub ell: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub theorem: Option<String>,
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub corpus_size: Option<usize>,
    /// `centered` or `dyadic`.
    #[arg(long)]
    pub family: Option<String>,
    /// Skip the `2N` refinement run.
    #[arg(long)]
    pub no_refine: bool,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Dyadic exponent range `lo..hi`.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<String>,
    #[arg(long)]
    pub young: Option<String>,
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub lambda_points: Option<usize>,
    #[arg(long)]
    pub bundle: Option<String>,
    /// Allow norm bundles whose maximal operators are not known to be bounded.
    #[arg(long)]
    pub unchecked: bool,
    /// Input function CSV files, comma separated.
    #[arg(long)]
    pub inputs: Option<String>,
    /// Frequencies, comma separated; vector components joined by `:`.
    #[arg(long, allow_hyphen_values = true)]
    pub xi: Option<String>,
}

impl Flags {
    fn to_config(&self, command: &str) -> Result<Config> {
        let floats = |s: &str| -> Result<Vec<f64>> {
            split_list(s)
                .iter()
                .map(|x| x.parse::<f64>().map_err(|_| CliError::Config(format!("bad number `{x}`"))))
                .collect()
        };
        let weights = Weights {
            u: self.u.as_deref().map(split_list),
            v: self.v.as_deref().map(split_list),
            w: self.w.clone(),
            b: self.b.clone(),
        };
        let exponents = Exponents {
            p: self.p.as_deref().map(floats).transpose()?,
            q: self.q,
        };
        Ok(Config {
            command: Some(command.into()),
            m: self.m,
            n: self.n,
            resolution: self.resolution,
            half_width: self.half_width,
            kernel: self.kernel.clone(),
            weights: (weights != Weights::default()).then_some(weights),
            norms: self.norms.as_deref().map(split_list),
            exponents: (exponents != Exponents::default()).then_some(exponents),
            ell: self.ell,
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            theorem: self.theorem.clone(),
            case: self.case.clone(),
            delta: self.delta,
            epsilon: self.epsilon,
            corpus_size: self.corpus_size,
            family: self.family.clone(),
            refine: self.no_refine.then_some(false),
            a: self.a,
            k: self.k.clone(),
            young: self.young.clone(),
            phi: self.phi.clone(),
            lambda_points: self.lambda_points,
            bundle: self.bundle.clone(),
            unchecked: self.unchecked.then_some(true),
            inputs: self.inputs.as_deref().map(|s| split_list(s).into_iter().map(PathBuf::from).collect()),
            xi: self.xi.as_deref().map(split_list),
        })
    }
}

/// Parses the command line, merges it with the config file and runs.
pub fn execute(cli: &Cli) -> Result<()> {
    let (name, flags) = cli.command.parts();
    let from_flags = flags.to_config(name)?;
    let base = match &flags.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let cfg = base.overlay(&from_flags).resolve()?;
    run(&cfg)
}

/// Runs a resolved config.
pub fn run(cfg: &Config) -> Result<()> {
    match cfg.command() {
        "eval-op" => eval_op(cfg, false),
        "eval-commutator" => eval_op(cfg, true),
        "maximal" => run_maximal(cfg),
        "cz-decompose" => run_cz(cfg),
        "check-condition-d" => run_condition_d(cfg),
        "verify" => run_verify(cfg),
        "bessel-probe" => run_bessel_probe(cfg),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

fn kernel(cfg: &Config) -> Result<Kernel> {
    let text = cfg.kernel.clone().unwrap_or_default();
    Ok(Kernel::parse(&text, cfg.n(), cfg.m())?)
}

fn grid(cfg: &Config) -> Result<Grid> {
    Ok(Grid::new(cfg.n(), cfg.half_width(), cfg.resolution())?)
}

fn family(cfg: &Config) -> Result<FamilyKind> {
    Ok(cfg.family.as_deref().unwrap_or("centered").parse::<FamilyKind>()?)
}

fn weight(s: &str) -> Result<WeightSpec> {
    Ok(s.parse::<WeightSpec>()?)
}

fn weight_list(list: &[String], m: usize, what: &str) -> Result<Vec<WeightSpec>> {
    let specs: Vec<WeightSpec> = list.iter().map(|s| weight(s)).collect::<Result<_>>()?;
    match specs.len() {
        1 => Ok(vec![specs[0].clone(); m]),
        k if k == m => Ok(specs),
        k => Err(CliError::Config(format!("{k} weights `{what}` given for m = {m}"))),
    }
}

/// Input tuple: CSV files when given, else the first corpus tuple.
fn inputs(cfg: &Config) -> Result<Vec<GridFunction>> {
    match &cfg.inputs {
        Some(paths) => {
            if paths.len() != cfg.m() {
                return Err(CliError::Config(format!("{} input files for m = {}", paths.len(), cfg.m())));
            }
            let fs: Vec<GridFunction> =
                paths.iter().map(|p| GridFunction::load(p)).collect::<mlpot::Result<_>>()?;
            for f in &fs[1..] {
                f.check_same_grid(&fs[0])?;
            }
            Ok(fs)
        }
        None => Ok(corpus(&grid(cfg)?, cfg.m(), 1, cfg.seed())?.remove(0)),
    }
}

fn parse_phi(s: &str, kernel: &Kernel) -> Result<PhiScaling> {
    let num = |x: &str| x.parse::<f64>().map_err(|_| CliError::Config(format!("bad phi `{s}`")));
    if s == "one" {
        Ok(PhiScaling::one())
    } else if let Some(e) = s.strip_prefix("pow") {
        Ok(PhiScaling::Power { coef: 1.0, exponent: num(e)? })
    } else if let Some(t) = s.strip_prefix("phi") {
        Ok(PhiScaling::phi_theta(kernel, num(t)?, 1.0))
    } else {
        Err(CliError::Config(format!("unknown phi `{s}` (expected one, pow<e> or phi<theta>)")))
    }
}

fn ensure_dir(cfg: &Config) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    version: &'a str,
    config: &'a Config,
    result: T,
}

fn write_json<T: Serialize>(path: &Path, cfg: &Config, result: T) -> Result<()> {
    let env = Envelope {
        version: VERSION,
        config: cfg,
        result,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Two-column whitespace separated text.
fn write_plot(path: &Path, rows: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let mut out = String::new();
    for (x, y) in rows {
        out.push_str(&format!("{x:e} {y:e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

fn function_plot(f: &GridFunction) -> Vec<(f64, f64)> {
    let g = f.grid();
    f.values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = if g.dim() == 1 { g.coord(i) } else { i as f64 };
            (x, *v)
        })
        .collect()
}

#[derive(Serialize)]
struct FieldSummary {
    cells: usize,
    min: f64,
    max: f64,
    integral: f64,
}

fn summarize(f: &GridFunction) -> FieldSummary {
    FieldSummary {
        cells: f.values().len(),
        min: f.values().iter().copied().fold(f64::INFINITY, f64::min),
        max: f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max),
        integral: f.integral(),
    }
}

fn emit_field(cfg: &Config, stem: &str, f: &GridFunction) -> Result<()> {
    let dir = ensure_dir(cfg)?;
    f.save(&dir.join(format!("{stem}.csv")))?;
    write_plot(&dir.join(format!("{stem}.dat")), function_plot(f))?;
    let s = summarize(f);
    println!("{stem}: {} cells, max {:.6e}, integral {:.6e}", s.cells, s.max, s.integral);
    write_json(&dir.join(format!("{stem}.json")), cfg, s)
}

fn eval_op(cfg: &Config, commutator: bool) -> Result<()> {
    let k = kernel(cfg)?;
    let fs = inputs(cfg)?;
    let refs: Vec<&GridFunction> = fs.iter().collect();
    let op = PotentialOperator::new(k, fs[0].grid().clone())?;
    let (stem, out) = if commutator {
        let b = weight(cfg.weights().b.as_deref().unwrap_or("bmolog"))?.build(fs[0].grid())?;
        let bs = vec![&b; fs.len()];
        ("eval-commutator", apply_commutator(&op, &bs, &refs)?)
    } else {
        ("eval-op", op.apply(&refs)?)
    };
    emit_field(cfg, stem, &out)
}

fn run_maximal(cfg: &Config) -> Result<()> {
    let k = kernel(cfg)?;
    let fs = inputs(cfg)?;
    let refs: Vec<&GridFunction> = fs.iter().collect();
    let norms = cfg.norms.clone().unwrap_or_else(|| vec!["L^1".into()]);
    let specs: Vec<NormSpec> = norms.iter().map(|s| s.parse::<NormSpec>()).collect::<mlpot::Result<_>>()?;
    let specs = match specs.len() {
        1 => vec![specs[0].clone(); fs.len()],
        n if n == fs.len() => specs,
        n => return Err(CliError::Config(format!("{n} norms for m = {}", fs.len()))),
    };
    let phi = parse_phi(cfg.phi.as_deref().unwrap_or("one"), &k)?;
    let fam = fs[0].grid().cube_family(family(cfg)?);
    let out = maximal(&phi, &specs, &refs, &fam)?;
    emit_field(cfg, "maximal", &out)
}

#[derive(Serialize)]
struct CzSummary {
    a: f64,
    levels: usize,
    invariants: CzInvariants,
}

fn run_cz(cfg: &Config) -> Result<()> {
    let fs = inputs(cfg)?;
    let refs: Vec<&GridFunction> = fs.iter().collect();
    let g = fs[0].grid().clone();
    let a = cfg.a.unwrap_or_else(|| default_base(g.dim(), fs.len()));
    let lat = DyadicLattice::new(&g);
    let cz = cz_decompose(&refs, a, &lat)?;
    let dir = ensure_dir(cfg)?;
    let mut text = serde_json::to_string_pretty(&cz.export()).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(dir.join("cz.json"), text)?;
    let inv = cz.invariants();
    println!(
        "cz-decompose: a = {a}, {} levels, {} cubes, max |Q|/|E| = {:.4}",
        cz.levels.len(),
        inv.cube_count,
        inv.max_q_over_e
    );
    write_json(
        &dir.join("cz-summary.json"),
        cfg,
        CzSummary {
            a,
            levels: cz.levels.len(),
            invariants: inv,
        },
    )
}

fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<i32>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| CliError::Config(format!("expected `lo..hi`, got `{s}`")))?;
    let num = |x: &str| x.trim().parse::<i32>().map_err(|_| CliError::Config(format!("bad range `{s}`")));
    let (lo, hi) = (num(a)?, num(b)?);
    if lo > hi {
        return Err(CliError::Config(format!("empty range `{s}`")));
    }
    Ok(lo..=hi)
}

fn run_condition_d(cfg: &Config) -> Result<()> {
    let k = kernel(cfg)?;
    let range = parse_range(cfg.k.as_deref().unwrap_or("-6..0"))?;
    let delta = cfg.delta.unwrap_or(DEFAULT_DELTA);
    let eps = cfg.epsilon.unwrap_or(DEFAULT_EPSILON);
    let rep = condition_d_check(&k, delta, eps, range, cfg.seed())?;
    println!("{:>4} {:>14} {:>14} {:>10}", "k", "sup", "integral", "ratio");
    for i in 0..rep.k.len() {
        println!("{:>4} {:>14.6e} {:>14.6e} {:>10.6}", rep.k[i], rep.sup[i], rep.integral[i], rep.ratio[i]);
    }
    println!("C = {:.6}{}", rep.c_max, if rep.unbounded_growth { " (ratios keep growing)" } else { "" });
    let dir = ensure_dir(cfg)?;
    write_plot(
        &dir.join("condition-d.dat"),
        rep.k.iter().zip(&rep.ratio).map(|(k, r)| (*k as f64, *r)),
    )?;
    write_json(&dir.join("condition-d.json"), cfg, &rep)
}

fn run_bessel_probe(cfg: &Config) -> Result<()> {
    let k = kernel(cfg)?;
    let dim = k.dim();
    let raw = cfg.xi.clone().unwrap_or_else(|| ["0.1", "0.5", "1", "2"].map(String::from).to_vec());
    let xis: Vec<Vec<f64>> = raw
        .iter()
        .map(|s| {
            let parts: Vec<f64> = s
                .split(':')
                .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad frequency `{s}`"))))
                .collect::<Result<_>>()?;
            match parts.len() {
                1 => Ok(vec![parts[0]; dim]),
                d if d == dim => Ok(parts),
                d => Err(CliError::Config(format!("frequency `{s}` has {d} components, kernel needs {dim}"))),
            }
        })
        .collect::<Result<_>>()?;
    let rep = bessel_fourier_probe(&k, &xis)?;
    println!(
        "bessel-probe: linear err {:.3e}, quadratic err {:.3e}, matches {}",
        rep.linear_max_rel_err, rep.quadratic_max_rel_err, rep.matches
    );
    let dir = ensure_dir(cfg)?;
    write_plot(
        &dir.join("bessel-probe.dat"),
        xis.iter().zip(&rep.numeric).map(|(x, v)| (x.iter().map(|c| c * c).sum::<f64>().sqrt(), *v)),
    )?;
    write_json(&dir.join("bessel-probe.json"), cfg, &rep)
}

fn harness(cfg: &Config) -> Result<HarnessConfig> {
    let mut h = HarnessConfig::new(cfg.n(), cfg.m(), cfg.half_width(), cfg.resolution(), kernel(cfg)?);
    h.seed = cfg.seed();
    h.family = family(cfg)?;
    if let Some(c) = cfg.corpus_size {
        h.corpus_size = c;
    }
    h.refine = cfg.refine.unwrap_or(true);
    h.symbol = weight(cfg.weights().b.as_deref().unwrap_or("bmolog"))?;
    Ok(h)
}

fn parse_bundle(s: &str) -> Result<StrongBundle> {
    let num = |x: &str| x.parse::<f64>().map_err(|_| CliError::Config(format!("bad bundle `{s}`")));
    if let Some(d) = s.strip_prefix("log") {
        Ok(StrongBundle::LogBump { delta: num(d)? })
    } else if let Some(r) = s.strip_prefix("pow") {
        Ok(StrongBundle::PowerBump { r: num(r)? })
    } else {
        Err(CliError::Config(format!("unknown bundle `{s}` (expected log<delta> or pow<r>)")))
    }
}

/// Runs the harness named by `cfg.theorem`.
pub fn verify_reports(cfg: &Config) -> Result<Vec<InequalityReport>> {
    let h = harness(cfg)?;
    let m = cfg.m();
    let w = cfg.weights();
    let ell = cfg.ell();
    let case = || -> Result<Case> { Ok(cfg.case.as_deref().unwrap_or("i").parse::<Case>()?) };
    let theorem = cfg
        .theorem
        .as_deref()
        .ok_or_else(|| CliError::Config("verify needs --theorem".into()))?;
    let us = || weight_list(w.u.as_deref().unwrap_or(&["one".to_string()]), m, "u");
    let single = |s: Option<&str>| weight(s.unwrap_or("one"));
    Ok(match theorem {
        "strong" => {
            let setup = StrongSetup {
                ell,
                exponents: ExponentTuple::new(cfg.p_list(), cfg.q())?,
                u: single(w.u.as_ref().and_then(|v| v.first()).map(String::as_str))?,
                v: weight_list(w.v.as_deref().unwrap_or(&["one".to_string()]), m, "v")?,
                bundle: parse_bundle(cfg.bundle.as_deref().unwrap_or("log0.5"))?,
                unchecked: cfg.unchecked.unwrap_or(false),
            };
            vec![verify_strong(&h, &setup)?]
        }
        "fefferman-stein" => {
            vec![verify_fefferman_stein(&h, case()?, ell, &cfg.p_list(), cfg.delta.unwrap_or(0.5), &us()?)?]
        }
        "coifman" => vec![verify_coifman(&h, case()?, ell, cfg.p_scalar(), &single(w.w.as_deref())?)?],
        "for-t-d" => {
            let u = single(w.u.as_ref().and_then(|v| v.first()).map(String::as_str))?;
            vec![verify_ftd(&h, case()?, ell, cfg.p_scalar(), &u)?]
        }
        "weak-maximal" => {
            let young: YoungFunction = cfg.young.as_deref().unwrap_or("Lp1logL0").parse()?;
            let phi = parse_phi(cfg.phi.as_deref().unwrap_or("one"), &h.kernel)?;
            let points = cfg.lambda_points.unwrap_or(LAMBDA_POINTS);
            vec![verify_weak_maximal(&h, &phi, &young, &us()?, points)?]
        }
        "control" => {
            let list = w.u.clone().unwrap_or_else(|| vec!["one".into()]);
            let weight_arg = if list.len() == 1 {
                ControlWeight::Single(weight(&list[0])?)
            } else {
                ControlWeight::Product(weight_list(&list, m, "u")?)
            };
            let deltas: Vec<f64> = match cfg.delta {
                Some(d) => vec![d],
                None => CONTROL_DELTAS.to_vec(),
            };
            let mut out = Vec::new();
            for d in deltas {
                out.extend(verify_control(&h, ell, d, &weight_arg)?);
            }
            out
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown theorem `{other}` (expected strong, fefferman-stein, coifman, for-t-d, weak-maximal or control)"
            )))
        }
    })
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn run_verify(cfg: &Config) -> Result<()> {
    let start = Instant::now();
    let reports = verify_reports(cfg)?;
    let wall_ms = start.elapsed().as_millis();
    let dir = ensure_dir(cfg)?;
    let theorem = cfg.theorem.clone().unwrap_or_default();
    let stem = match &cfg.case {
        Some(c) => file_stem(&format!("{theorem}-{c}")),
        None => file_stem(&theorem),
    };
    write_json(&dir.join(format!("{stem}.json")), cfg, &reports)?;
    let mut csv = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    csv.write_record(CSV_HEADER)?;
    for r in &reports {
        let p = &r.params;
        let field = |k: &str| match &p[k] {
            Value::String(s) => s.clone(),
            Value::Null => String::new(),
            v => v.to_string(),
        };
        csv.write_record([
            r.theorem.clone(),
            r.case.clone(),
            field("m"),
            field("n"),
            field("N"),
            field("kernel"),
            if p["ell"].is_null() { "0".into() } else { field("ell") },
            format!("{:e}", r.max_ratio),
            r.stable.map(|s| s.to_string()).unwrap_or_default(),
            wall_ms.to_string(),
        ])?;
        let tag = if r.case.is_empty() {
            file_stem(&r.theorem)
        } else {
            file_stem(&format!("{}-{}", r.theorem, r.case))
        };
        let mut rows = vec![(field("N").parse::<f64>().unwrap_or(0.0), r.max_ratio)];
        if let Some(rf) = &r.refinement {
            rows.push((rf.fine_n as f64, rf.fine_max_ratio));
        }
        write_plot(&dir.join(format!("{tag}-ratio-vs-N.dat")), rows)?;
        for s in &r.series {
            write_plot(&dir.join(format!("{tag}-{}.dat", file_stem(&s.name))), s.points.iter().map(|p| (p[0], p[1])))?;
        }
        println!(
            "{} {}: max ratio {:.6e}, stable {}",
            r.theorem,
            r.case,
            r.max_ratio,
            r.stable.map(|s| s.to_string()).unwrap_or_else(|| "n/a".into())
        );
    }
    csv.flush()?;
    std::io::stdout().flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let e = CliError::Lib(mlpot::Error::HypothesisUnmet("x".into()));
        assert_eq!(e.exit_code(), 2);
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("-6..0").unwrap(), -6..=0);
        assert!(parse_range("3..1").is_err());
        assert!(parse_range("3").is_err());
    }

    #[test]
    fn stems_are_safe() {
        assert_eq!(file_stem("control-delta=0.5"), "control-delta_0.5");
        assert_eq!(file_stem("strong-q>1"), "strong-q_1");
    }
}
