//! Command-line front end: reads a chain, runs one computation and writes a
//! versioned JSON report.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use curvkit::curvature::{curvature_profile, lichnerowicz_check};
use curvkit::geometry::{cheeger_bounds, d_gamma, d_gamma_matrix, diam_combinatorial, diam_gamma};
use curvkit::heat::{avg_mixing_time, spectral_decompose};
use curvkit::inequalities::{
    check_heat_kernel_bound, check_tau_lower_bound, heat_flow_reports, inequality_battery, BatteryOptions,
    CurvatureEvidence, InequalityReport, Verdict,
};
use curvkit::io::{chain_to_json, format_n, parse_chain_json, parse_edge_list, parse_generator, parse_n, parse_rho};
use curvkit::optimal::{check_equilibrium_optimality, optimal_complex};
use curvkit::{
    bakry_emery_global, curvature_estimate, curvature_of_measure, ChainStats, CurvError, EntropicOptions, MarkovChain,
    Mean,
};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

pub const SCHEMA: &str = "curvkit-report/1";
pub const SEED_ENV: &str = "CURVKIT_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

/// Dimension `n ∈ (0, ∞]`, serialized as a number or `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dim(pub f64);

impl FromStr for Dim {
    type Err = CurvError;

    fn from_str(s: &str) -> Result<Self, CurvError> {
        parse_n(s).map(Dim)
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_n(self.0))
    }
}

impl Serialize for Dim {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

impl<'de> Deserialize<'de> for Dim {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        let text = match Repr::deserialize(d)? {
            Repr::Num(v) => v.to_string(),
            Repr::Text(s) => s,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CurvVertex,
    CurvMeasure,
    CurvEntropic,
    Spectrum,
    OptimalSets,
    Heat,
    Mixing,
    Dgamma,
    Cheeger,
    Verify,
    Gen,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CurvVertex => "curv-vertex",
            Command::CurvMeasure => "curv-measure",
            Command::CurvEntropic => "curv-entropic",
            Command::Spectrum => "spectrum",
            Command::OptimalSets => "optimal-sets",
            Command::Heat => "heat",
            Command::Mixing => "mixing",
            Command::Dgamma => "dgamma",
            Command::Cheeger => "cheeger",
            Command::Verify => "verify",
            Command::Gen => "gen",
        }
    }

    /// Mean used when `--mean` is absent.
    pub fn default_mean(self) -> &'static str {
        match self {
            Command::CurvEntropic | Command::Verify => "logarithmic",
            _ => "arithmetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSource {
    File { path: PathBuf },
    Generator { spec: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Heat,
    Spectral,
    Diameter,
    #[default]
    All,
}

impl Suite {
    fn contains(self, report: &str) -> bool {
        let suite = match report {
            "heat_kernel_decay" | "linf_gradient_decay" | "gradient_estimate" | "reverse_poincare" => Suite::Heat,
            n if n.contains("diameter") => Suite::Diameter,
            _ => Suite::Spectral,
        };
        self == Suite::All || self == suite
    }
}

/// Numeric budgets and grids. Every field has a default and all of them are
/// echoed in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Random samples per sampled inequality.
    pub trials: usize,
    pub t_grid: Vec<f64>,
    /// Dimensions scanned for a positive dimensional curvature.
    pub n_grid: Vec<Dim>,
    pub starts: usize,
    pub dirac_starts: usize,
    pub max_iters: usize,
    pub opt_tol: f64,
    /// Target distance of the average mixing time.
    pub eps: f64,
    /// Facet-size cap for optimal-set enumeration; `None` means `|X|`.
    pub max_size: Option<usize>,
}

impl Default for Tolerances {
    fn default() -> Self {
        let b = BatteryOptions::default();
        let e = EntropicOptions::default();
        Tolerances {
            trials: b.trials,
            t_grid: b.t_grid,
            n_grid: b.n_grid.into_iter().map(Dim).collect(),
            starts: e.starts,
            dirac_starts: e.dirac_starts,
            max_iters: e.max_iters,
            opt_tol: e.tol,
            eps: 0.25,
            max_size: None,
        }
    }
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub input: InputSource,
    pub mean: String,
    pub n: Dim,
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Density spec for `curv-measure`.
    #[serde(default)]
    pub rho: Option<String>,
    /// Dimension grid for a `curv-measure` profile.
    #[serde(default)]
    pub profile: Option<Vec<Dim>>,
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub suite: Suite,
    /// State pair for a single `dgamma` solve.
    #[serde(default)]
    pub pair: Option<(String, String)>,
    /// Curvature lower bound supplied by the user, treated as proven.
    #[serde(default)]
    pub assume_k: Option<f64>,
    /// Extra plain chain JSON written by `gen`.
    #[serde(default)]
    pub chain_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, input: InputSource) -> Self {
        RunConfig {
            command,
            input,
            mean: command.default_mean().into(),
            n: Dim(f64::INFINITY),
            seed: 0,
            tolerances: Tolerances::default(),
            output: None,
            rho: None,
            profile: None,
            csv: None,
            suite: Suite::All,
            pair: None,
            assume_k: None,
            chain_out: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("run config: {e}")))
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: RunConfig,
    pub chain_stats: ChainStats,
    pub results: Value,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Curv(CurvError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => f.write_str(m),
            CliError::Curv(e) => write!(f, "{e}"),
        }
    }
}

impl From<CurvError> for CliError {
    fn from(e: CurvError) -> Self {
        CliError::Curv(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Curv(CurvError::NumericalFailure(_)) => EXIT_NUMERICAL,
            _ => EXIT_INVALID,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "curvkit", version, about = "Curvature, heat flow and geometry of finite reversible Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Chain file: JSON `{states, Q, pi?}` or a tab-separated edge list.
    #[arg(long = "in", value_name = "PATH", conflicts_with = "gen", required_unless_present = "gen")]
    input: Option<PathBuf>,
    /// Built-in chain: hypercube:N, cycle:n, complete:n, path:n, random-regular:d:n:seed.
    #[arg(long, value_name = "SPEC")]
    gen: Option<String>,
    /// arithmetic | logarithmic | geometric
    #[arg(long)]
    mean: Option<String>,
    /// Dimension: `inf` or a positive number.
    #[arg(long, default_value = "inf")]
    n: String,
    /// Overridden by the CURVKIT_SEED environment variable.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report path; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
struct Budget {
    /// Random samples per sampled inequality.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated times.
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default)]
struct Optimizer {
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Bakry-Émery curvature at every vertex.
    CurvVertex {
        #[command(flatten)]
        common: Common,
    },
    /// Curvature of one measure, optionally over a grid of dimensions.
    CurvMeasure {
        #[command(flatten)]
        common: Common,
        /// ones | uniform | dirac:<id> | JSON array | JSON object keyed by state id.
        #[arg(long, default_value = "ones")]
        rho: String,
        /// Comma-separated dimensions for a curvature profile.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<String>>,
        /// Write the profile as CSV.
        #[arg(long, value_name = "PATH", requires = "n_grid")]
        csv: Option<PathBuf>,
    },
    /// Multi-start estimate of the infimum of the curvature over measures.
    CurvEntropic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        opt: Optimizer,
    },
    /// Laplacian spectrum and Lichnerowicz comparison.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Facets of the complex of optimal sets.
    OptimalSets {
        #[command(flatten)]
        common: Common,
        /// Largest facet size to enumerate.
        #[arg(long)]
        max_size: Option<usize>,
    },
    /// Heat kernel matrices and the heat kernel decay bound.
    Heat {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        budget: Budget,
    },
    /// Average mixing time and its lower bound.
    Mixing {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
    },
    /// The Γ-distance for one pair or all pairs.
    Dgamma {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "y")]
        x: Option<String>,
        #[arg(long, requires = "x")]
        y: Option<String>,
    },
    /// Cheeger constant (exact up to 24 states, bounds beyond).
    Cheeger {
        #[command(flatten)]
        common: Common,
    },
    /// Numerical check of the heat-flow, spectral and diameter inequalities.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        budget: Budget,
        #[command(flatten)]
        opt: Optimizer,
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
        /// Known curvature lower bound for the selected mean, treated as proven.
        #[arg(long)]
        assume_k: Option<f64>,
    },
    /// Generate a chain and report its statistics.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Also write the plain chain JSON here.
        #[arg(long, value_name = "PATH")]
        chain_out: Option<PathBuf>,
    },
}

fn invalid(e: impl fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

fn config_from_cli(sub: Sub) -> Result<(RunConfig, Option<usize>), CliError> {
    let mut tol = Tolerances::default();
    let apply_budget = |tol: &mut Tolerances, b: &Budget| {
        if let Some(v) = b.trials {
            tol.trials = v;
        }
        if let Some(t) = &b.t {
            tol.t_grid = t.clone();
        }
    };
    let apply_opt = |tol: &mut Tolerances, o: &Optimizer| {
        if let Some(v) = o.starts {
            tol.starts = v;
        }
        if let Some(v) = o.max_iters {
            tol.max_iters = v;
        }
        if let Some(v) = o.tol {
            tol.opt_tol = v;
        }
    };
    let (command, common) = match &sub {
        Sub::CurvVertex { common } => (Command::CurvVertex, common),
        Sub::CurvMeasure { common, .. } => (Command::CurvMeasure, common),
        Sub::CurvEntropic { common, opt } => {
            apply_opt(&mut tol, opt);
            (Command::CurvEntropic, common)
        }
        Sub::Spectrum { common } => (Command::Spectrum, common),
        Sub::OptimalSets { common, max_size } => {
            tol.max_size = *max_size;
            (Command::OptimalSets, common)
        }
        Sub::Heat { common, budget } => {
            apply_budget(&mut tol, budget);
            (Command::Heat, common)
        }
        Sub::Mixing { common, eps } => {
            tol.eps = *eps;
            (Command::Mixing, common)
        }
        Sub::Dgamma { common, .. } => (Command::Dgamma, common),
        Sub::Cheeger { common } => (Command::Cheeger, common),
        Sub::Verify { common, budget, opt, .. } => {
            apply_budget(&mut tol, budget);
            apply_opt(&mut tol, opt);
            (Command::Verify, common)
        }
        Sub::Gen { common, .. } => (Command::Gen, common),
    };
    let input = match (&common.input, &common.gen) {
        (Some(p), None) => InputSource::File { path: p.clone() },
        (None, Some(g)) => InputSource::Generator { spec: g.clone() },
        _ => return Err(invalid("exactly one of --in and --gen is required")),
    };
    let mut cfg = RunConfig::new(command, input);
    cfg.mean = common.mean.clone().unwrap_or_else(|| command.default_mean().into());
    cfg.n = common.n.parse()?;
    cfg.seed = common.seed;
    cfg.output = common.out.clone();
    cfg.tolerances = tol;
    let jobs = common.jobs;
    match sub {
        Sub::CurvMeasure { rho, n_grid, csv, .. } => {
            cfg.rho = Some(rho);
            cfg.profile = n_grid.map(|g| g.iter().map(|s| s.parse()).collect::<Result<Vec<Dim>, _>>()).transpose()?;
            cfg.csv = csv;
        }
        Sub::Dgamma { x: Some(x), y: Some(y), .. } => cfg.pair = Some((x, y)),
        Sub::Verify { suite, assume_k, .. } => {
            cfg.suite = suite;
            cfg.assume_k = assume_k;
        }
        Sub::Gen { chain_out, .. } => cfg.chain_out = chain_out,
        _ => {}
    }
    Ok((cfg, jobs))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

/// Loads the chain named by `source`. Files starting with `{` are chain JSON,
/// anything else is an edge list.
pub fn load_chain(source: &InputSource) -> Result<MarkovChain, CliError> {
    match source {
        InputSource::Generator { spec } => Ok(parse_generator(spec)?.build()?),
        InputSource::File { path } => {
            let text = read_text(path)?;
            if text.trim_start().starts_with('{') {
                Ok(parse_chain_json(&text)?)
            } else {
                Ok(parse_edge_list(&text)?)
            }
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn states_of(chain: &MarkovChain, set: &[usize]) -> Vec<String> {
    set.iter().map(|&x| chain.states()[x].clone()).collect()
}

fn battery_options(cfg: &RunConfig) -> BatteryOptions {
    BatteryOptions {
        trials: cfg.tolerances.trials,
        t_grid: cfg.tolerances.t_grid.clone(),
        n_grid: cfg.tolerances.n_grid.iter().map(|d| d.0).collect(),
        seed: cfg.seed,
    }
}

fn entropic_options(cfg: &RunConfig) -> EntropicOptions {
    EntropicOptions {
        starts: cfg.tolerances.starts,
        max_iters: cfg.tolerances.max_iters,
        tol: cfg.tolerances.opt_tol,
        seed: cfg.seed,
        dirac_starts: cfg.tolerances.dirac_starts,
    }
}

/// Curvature evidence for `mean` at dimension `n`: the user's bound, the exact
/// vertex minimum for the arithmetic mean, or the optimizer estimate.
fn evidence_for(
    chain: &MarkovChain,
    mean: &Mean,
    n: f64,
    cfg: &RunConfig,
    warnings: &mut Vec<String>,
) -> Result<CurvatureEvidence, CliError> {
    if let Some(k) = cfg.assume_k {
        return Ok(CurvatureEvidence::exact(k, "user-supplied bound"));
    }
    if matches!(mean, Mean::Arithmetic) {
        let g = bakry_emery_global(chain, n)?;
        return Ok(CurvatureEvidence::exact(g.value, "minimum vertex curvature"));
    }
    let est = curvature_estimate(chain, mean, n, &entropic_options(cfg))?;
    warnings.push(format!(
        "{} curvature {} is a multi-start estimate; reports depending on it are heuristic",
        mean.name(),
        est.k_hat
    ));
    Ok(CurvatureEvidence::from_estimate(&est))
}

/// One row per profile point, in the profile's order of increasing `s = 1/n`.
fn profile_csv(profile: &curvkit::curvature::CurvatureProfile) -> String {
    let mut out = String::from("n,s,k\n");
    for p in &profile.points {
        out.push_str(&format!("{},{},{}\n", Dim(1.0 / p.s), p.s, p.k));
    }
    out
}

fn execute_inner(cfg: &RunConfig, chain: &MarkovChain, warnings: &mut Vec<String>) -> Result<Value, CliError> {
    let mean: Mean = cfg.mean.parse()?;
    let n = cfg.n.0;
    Ok(match cfg.command {
        Command::CurvVertex => {
            let per_vertex: Vec<f64> = if matches!(mean, Mean::Arithmetic) {
                bakry_emery_global(chain, n)?.per_vertex
            } else {
                (0..chain.len())
                    .map(|x| curvature_of_measure(chain, &mean, &chain.dirac(x), n).map(|r| r.value))
                    .collect::<Result<_, _>>()?
            };
            let (argmin, min) =
                per_vertex
                    .iter()
                    .copied()
                    .enumerate()
                    .fold((0, f64::INFINITY), |a, (x, k)| if k < a.1 { (x, k) } else { a });
            json!({
                "vertices": chain.states().iter().zip(&per_vertex)
                    .map(|(s, k)| json!({"state": s, "k": to_value(&ExtF64(*k))}))
                    .collect::<Vec<_>>(),
                "min": to_value(&ExtF64(min)),
                "argmin": chain.states()[argmin],
            })
        }
        Command::CurvMeasure => {
            let rho = parse_rho(cfg.rho.as_deref().unwrap_or("ones"), chain)?;
            let result = curvature_of_measure(chain, &mean, &rho, n)?;
            let mut v = json!({"rho": rho.as_slice(), "curvature": to_value(&result)});
            if let Some(grid) = &cfg.profile {
                let dims: Vec<f64> = grid.iter().map(|d| d.0).collect();
                let profile = curvature_profile(chain, &mean, &rho, &dims)?;
                if let Some(path) = &cfg.csv {
                    write_text(path, &profile_csv(&profile))?;
                }
                v["profile"] = to_value(&profile);
            }
            v
        }
        Command::CurvEntropic => {
            let est = curvature_estimate(chain, &mean, n, &entropic_options(cfg))?;
            warnings.push("k_hat is an upper bound on the infimum over measures; it is not certified".into());
            to_value(&est)
        }
        Command::Spectrum => {
            let sys = spectral_decompose(chain);
            let lich = lichnerowicz_check(chain, &mean, cfg.seed)?;
            if !lich.exact {
                warnings.push("k_inf comes from the multi-start optimizer".into());
            }
            json!({
                "eigenvalues": sys.eigenvalues.as_slice(),
                "lambda1": sys.lambda1(),
                "lichnerowicz": to_value(&lich),
            })
        }
        Command::OptimalSets => {
            let max_size = cfg.tolerances.max_size.unwrap_or(chain.len());
            let cx = optimal_complex(chain, n, max_size)?;
            let eq = check_equilibrium_optimality(chain)?;
            json!({
                "facets": cx.facet_states,
                "dimension": cx.dimension,
                "zero_cells": states_of(chain, &cx.zero_cells),
                "k": to_value(&ExtF64(cx.k)),
                "sets_tested": cx.sets_tested,
                "max_size": cx.max_size,
                "equilibrium": to_value(&eq),
            })
        }
        Command::Heat => {
            let sys = spectral_decompose(chain);
            let kernels = cfg
                .tolerances
                .t_grid
                .iter()
                .map(|&t| {
                    let p = sys.kernel_matrix(t)?;
                    let rows: Vec<Vec<f64>> = (0..p.nrows()).map(|x| p.row(x).iter().copied().collect()).collect();
                    Ok(json!({"t": t, "kernel": rows}))
                })
                .collect::<Result<Vec<_>, CurvError>>()?;
            let bound = check_heat_kernel_bound(chain, &sys, &cfg.tolerances.t_grid)?;
            json!({"kernels": kernels, "heat_kernel_decay": to_value(&bound)})
        }
        Command::Mixing => {
            let sys = spectral_decompose(chain);
            let tau = avg_mixing_time(&sys, cfg.tolerances.eps)?;
            let lower = check_tau_lower_bound(chain, &sys)?;
            json!({"mixing_time": to_value(&tau), "lower_bound": to_value(&lower), "lambda1": sys.lambda1()})
        }
        Command::Dgamma => match &cfg.pair {
            Some((x, y)) => {
                let r = d_gamma(chain, chain.state_index(x)?, chain.state_index(y)?)?;
                if !r.converged {
                    warnings.push(format!("barrier solve for ({x}, {y}) stopped at gap {:e}", r.gap));
                }
                to_value(&r)
            }
            None => {
                let m = d_gamma_matrix(chain)?;
                if !m.unconverged.is_empty() {
                    warnings.push(format!("{} pair(s) did not reach the gap tolerance", m.unconverged.len()));
                }
                json!({
                    "states": chain.states(),
                    "values": m.values,
                    "unconverged": m.unconverged,
                    "diam_gamma": diam_gamma(chain)?,
                    "diam_combinatorial": diam_combinatorial(chain),
                })
            }
        },
        Command::Cheeger => {
            let b = cheeger_bounds(chain)?;
            if !b.exact {
                warnings.push(format!("Cheeger constant only bracketed: [{}, {}]", b.lower, b.upper));
            }
            let mut v = to_value(&b);
            v["set_states"] = json!(states_of(chain, &b.set));
            v
        }
        Command::Verify => {
            let opts = battery_options(cfg);
            let log = Mean::Logarithmic;
            // --assume-k refers to the selected mean, so it only carries over when that is the log mean
            let entropic = if matches!(mean, Mean::Logarithmic) {
                evidence_for(chain, &log, f64::INFINITY, cfg, warnings)?
            } else {
                evidence_for(chain, &log, f64::INFINITY, &RunConfig { assume_k: None, ..cfg.clone() }, warnings)?
            };
            let mut reports: Vec<InequalityReport> = inequality_battery(chain, &entropic, &opts)?;
            if matches!(cfg.suite, Suite::Heat | Suite::All) {
                let evidence = if matches!(mean, Mean::Logarithmic) {
                    entropic.clone()
                } else {
                    evidence_for(chain, &mean, n, cfg, warnings)?
                };
                reports.extend(heat_flow_reports(chain, &mean, &evidence, n, &opts)?);
            }
            reports.retain(|r| cfg.suite.contains(&r.name));
            let violated: Vec<&str> =
                reports.iter().filter(|r| r.verdict == Verdict::Violated).map(|r| r.name.as_str()).collect();
            let heuristic = reports.iter().filter(|r| r.verdict == Verdict::Violated && !r.exact()).count();
            if heuristic > 0 {
                warnings.push(format!("{heuristic} violation(s) rest on heuristic preconditions"));
            }
            json!({
                "entropic_evidence": to_value(&entropic),
                "reports": to_value(&reports),
                "violated": violated,
                "exact_violation": reports.iter().any(|r| r.exact_violation()),
            })
        }
        Command::Gen => {
            let text = chain_to_json(chain);
            if let Some(path) = &cfg.chain_out {
                write_text(path, &text)?;
            }
            json!({"chain": serde_json::from_str::<Value>(&text).expect("chain JSON parses")})
        }
    })
}

/// `f64` that serializes infinities as strings.
struct ExtF64(f64);

impl Serialize for ExtF64 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        curvkit::serde_ext::ext_f64(&self.0, s)
    }
}

/// Runs `cfg` and assembles the report.
pub fn execute(cfg: &RunConfig) -> Result<Report, CliError> {
    let chain = load_chain(&cfg.input)?;
    let mut warnings = Vec::new();
    let results = execute_inner(cfg, &chain, &mut warnings)?;
    Ok(Report { schema: SCHEMA, config: cfg.clone(), chain_stats: chain.stats(), results, warnings })
}

pub fn report_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn summary(report: &Report) -> String {
    let r = &report.results;
    let line = match report.config.command {
        Command::CurvVertex => format!("min vertex curvature {} at {}", r["min"], r["argmin"]),
        Command::CurvMeasure => format!("K = {}", r["curvature"]["value"]),
        Command::CurvEntropic => format!("k_hat = {}", r["k_hat"]),
        Command::Spectrum => format!("lambda1 = {}", r["lambda1"]),
        Command::OptimalSets => {
            format!("{} facet(s), dimension {}", r["facets"].as_array().map_or(0, Vec::len), r["dimension"])
        }
        Command::Heat => format!("heat kernel decay: {}", r["heat_kernel_decay"]["verdict"]),
        Command::Mixing => format!("tau = {}", r["mixing_time"]["tau"]),
        Command::Dgamma => match r.get("diam_gamma") {
            Some(d) => format!("diam_gamma = {d}"),
            None => format!("d_gamma = {}", r["value"]),
        },
        Command::Cheeger => format!("h in [{}, {}]", r["lower"], r["upper"]),
        Command::Verify => {
            let reports = r["reports"].as_array().cloned().unwrap_or_default();
            let count = |v: &str| reports.iter().filter(|x| x["verdict"] == v).count();
            format!(
                "{} hold, {} violated, {} not applicable",
                count("holds"),
                count("violated"),
                count("not_applicable")
            )
        }
        Command::Gen => format!("{} states", report.chain_stats.size),
    };
    format!("{}: {line}", report.config.command.name())
}

fn seed_override() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| invalid(format!("{SEED_ENV}={v} is not a nonnegative integer")))
        }
        Err(_) => Ok(None),
    }
}

fn run_config(cfg: &RunConfig, jobs: Option<usize>) -> Result<i32, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(invalid("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| invalid(format!("thread pool: {e}")))?;
    let report = pool.install(|| execute(cfg))?;
    let text = report_json(&report);
    match &cfg.output {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    eprintln!("{}", summary(&report));
    if report.config.command == Command::Verify && report.results["exact_violation"] == true {
        return Ok(EXIT_VIOLATION);
    }
    Ok(EXIT_OK)
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = config_from_cli(cli.command).and_then(|(mut cfg, jobs)| {
        if let Some(seed) = seed_override()? {
            cfg.seed = seed;
        }
        run_config(&cfg, jobs)
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
