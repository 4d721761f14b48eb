//! Command-line front end. Every command prints (or writes to `--output`)
//! a document that records the tool version, the resolved configuration and
//! the seed; identical command lines give byte-identical output.
//!
//! Exit codes: 0 success, 1 computation failure, 2 usage error.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{mixing_curve, si_check, PinningPolicy};
use crate::exact::{config_string, Fugacities, Oracle, Side, ENUM_CAP_ENV};
use crate::graph::{parse_graph, BipartiteGraph};
use crate::ising::{reduce_general, verify_reduction};
use crate::recursion::{find_fixpoints, TreeParams};
use crate::samplers::{
    block_dynamics_step, glauber_mu_step, replica_stream, ChainSpec, ChainState, FieldDynamics, FieldDynamicsParams,
    InnerMode, NuKernel, Spin, PLUS,
};
use crate::uniqueness::{
    certify_delta, closed_form_pair, is_delta_unique, linspace, phase_table, solve_critical_system, PhaseRow,
};

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser, Serialize)]
#[command(name = "biphc", version, about = "Bipartite hardcore model: thresholds, exact oracle, samplers, diagnostics")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for replicas and grid rows (output does not depend on it).
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Uniqueness thresholds: closed form for (d, w), implicit system for (d, α, δ).
    Threshold(ThresholdArgs),
    /// Decide δ-uniqueness of (λ, d, α) or of a tuple (λ, d, α, w).
    Check(CheckArgs),
    /// Phase-diagram table of λ_c(d, w), α_c(d, w) and λ_low(d, w).
    Phase(PhaseArgs),
    /// Draw independent samples with one of the Markov chains.
    Sample(SampleArgs),
    /// Exact partition function, marginals or distribution by enumeration.
    Exact(ExactArgs),
    /// Empirical mixing curve against the exact left marginal.
    TvTest(TvTestArgs),
    /// Spectral-independence check over pinnings.
    SiCheck(SiCheckArgs),
    /// Reduce a left-degree-2 instance to a ferromagnetic Ising model.
    IsingReduce(IsingArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub d: f64,
    /// Right-side degree parameter: selects the closed-form pair.
    #[arg(long, conflicts_with_all = ["alpha", "delta"])]
    pub w: Option<f64>,
    /// Right fugacity: selects the implicit critical system.
    #[arg(long, requires = "delta")]
    pub alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    pub delta: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub d: f64,
    /// Defaults to λ.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Check the single tuple (λ, d, α, w) by locating all fixpoints.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PhaseArgs {
    #[arg(long)]
    pub d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_min: f64,
    #[arg(long, default_value_t = 8.0)]
    pub w_max: f64,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    /// Emit natural logarithms of the fugacities.
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Nu,
    Mu,
    Block,
    Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerKind {
    Glauber,
    Exact,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Edge-list file: header `n_left n_right n_edges`, then `u v` lines.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    /// Defaults to λ.
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ChainArgs {
    #[arg(long, value_enum, default_value_t = SamplerKind::Nu)]
    pub sampler: SamplerKind,
    /// Single-site steps per sample (nu, mu, block).
    #[arg(long, default_value_t = 10_000)]
    pub steps: u64,
    /// Field dynamics retention probability.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Field dynamics outer iterations [default: ⌈10 log(1/ε)⌉].
    #[arg(long)]
    pub t: Option<u64>,
    /// Field dynamics inner Glauber steps [default: ⌈21 nL log max(2, nL)⌉].
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long, value_enum, default_value_t = InnerKind::Glauber)]
    pub inner: InnerKind,
    /// Target accuracy used for the default T.
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 1)]
    pub n_samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExactWhat {
    Z,
    Marginals,
    Dist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    L,
    R,
    Full,
}

#[derive(Debug, Args, Serialize)]
pub struct ExactArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value_t = ExactWhat::Z)]
    pub what: ExactWhat,
    #[arg(long, value_enum, default_value_t = SideArg::L)]
    pub side: SideArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct TvTestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 1000)]
    pub replicas: u64,
    /// Comma-separated, strictly increasing checkpoints.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 10, 100, 1000])]
    pub times: Vec<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct SiCheckArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Gap δ; certified numerically for d = Δ − 1 when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Largest pinned set (capped at nL − 2) [default: nL − 2].
    #[arg(long, conflicts_with = "no_pinnings")]
    pub max_pinned: Option<usize>,
    /// Only the empty pinning.
    #[arg(long)]
    pub no_pinnings: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct IsingArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    /// Separate right fugacity (extension beyond λ_L = λ_R; field
    /// consistency is then not guaranteed).
    #[arg(long)]
    pub lambda_right: Option<f64>,
    /// Compare the reconstructed marginal with the exact right marginal.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) => 1,
        }
    }
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    seed: u64,
    config: C,
    result: R,
}

fn json<C: Serialize, R: Serialize>(cli: &Cli, name: &str, config: C, result: R) -> Result<String, CliError> {
    let env = Envelope {
        tool: TOOL,
        version: VERSION,
        command: name,
        seed: cli.seed,
        config,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(compute)?;
    s.push('\n');
    Ok(s)
}

/// `#`-prefixed provenance lines for text outputs.
fn preamble<C: Serialize>(cli: &Cli, name: &str, config: C) -> Result<String, CliError> {
    let config = serde_json::to_string(&config).map_err(compute)?;
    Ok(format!(
        "# {TOOL} {VERSION} {name}\n# seed: {}\n# config: {config}\n",
        cli.seed
    ))
}

fn read_graph(path: &PathBuf) -> Result<BipartiteGraph, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse_graph(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

impl ModelArgs {
    fn fugacities(&self) -> Result<Fugacities, CliError> {
        Fugacities::new(self.lambda, self.alpha.unwrap_or(self.lambda)).map_err(|e| usage(e.to_string()))
    }
}

/// Sampler settings after defaults are filled in.
#[derive(Debug, Clone, Copy, Serialize)]
struct ResolvedChain {
    sampler: SamplerKind,
    steps: Option<u64>,
    field: Option<FieldDynamicsParams>,
}

impl ChainArgs {
    fn resolve(&self, n_left: usize) -> Result<(ChainSpec, ResolvedChain), CliError> {
        let spec = match self.sampler {
            SamplerKind::Nu => ChainSpec::Nu,
            SamplerKind::Mu => ChainSpec::Mu,
            SamplerKind::Block => ChainSpec::Block,
            SamplerKind::Field => {
                let inner = match self.inner {
                    InnerKind::Glauber => InnerMode::Glauber,
                    InnerKind::Exact => InnerMode::Exact,
                };
                let d = FieldDynamicsParams::practical(n_left, self.epsilon, inner).map_err(|e| usage(e.to_string()))?;
                let p = FieldDynamicsParams::new(self.theta, self.t.unwrap_or(d.t), self.m.unwrap_or(d.m), inner)
                    .map_err(|e| usage(e.to_string()))?;
                ChainSpec::Field(p)
            }
        };
        let resolved = ResolvedChain {
            sampler: self.sampler,
            steps: (self.sampler != SamplerKind::Field).then_some(self.steps),
            field: match spec {
                ChainSpec::Field(p) => Some(p),
                _ => None,
            },
        };
        Ok((spec, resolved))
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(compute)
}

/// Runs a parsed command line and returns the document to emit.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let pool = pool(cli.jobs)?;
    pool.install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Threshold(a) => cmd_threshold(cli, a),
        Command::Check(a) => cmd_check(cli, a),
        Command::Phase(a) => cmd_phase(cli, a),
        Command::Sample(a) => cmd_sample(cli, a),
        Command::Exact(a) => cmd_exact(cli, a),
        Command::TvTest(a) => cmd_tv_test(cli, a),
        Command::SiCheck(a) => cmd_si_check(cli, a),
        Command::IsingReduce(a) => cmd_ising(cli, a),
    }
}

fn cmd_threshold(cli: &Cli, a: &ThresholdArgs) -> Result<String, CliError> {
    match (a.w, a.alpha, a.delta) {
        (Some(w), None, None) => {
            let pair = closed_form_pair(a.d, w).map_err(compute)?;
            json(cli, "threshold", a, pair)
        }
        (None, Some(alpha), Some(delta)) => {
            let report = solve_critical_system(a.d, alpha, delta).map_err(compute)?;
            json(cli, "threshold", a, report)
        }
        _ => Err(usage("give either --w, or --alpha together with --delta")),
    }
}

#[derive(Serialize)]
struct CheckResult {
    delta_unique: bool,
    lambda_2c: Option<f64>,
    fixpoints: Option<crate::recursion::FixpointReport>,
}

fn cmd_check(cli: &Cli, a: &CheckArgs) -> Result<String, CliError> {
    let alpha = a.alpha.unwrap_or(a.lambda);
    let result = match a.w {
        Some(w) => {
            let p = TreeParams::new(a.d, w, a.lambda, alpha, a.delta).map_err(|e| usage(e.to_string()))?;
            let report = find_fixpoints(&p);
            CheckResult {
                delta_unique: report.delta_unique,
                lambda_2c: None,
                fixpoints: Some(report),
            }
        }
        None => {
            let t = solve_critical_system(a.d, alpha, a.delta).map_err(compute)?;
            CheckResult {
                delta_unique: is_delta_unique(a.lambda, a.d, alpha, a.delta).map_err(compute)?,
                lambda_2c: Some(t.lambda_2c),
                fixpoints: None,
            }
        }
    };
    json(cli, "check", a, result)
}

fn cmd_phase(cli: &Cli, a: &PhaseArgs) -> Result<String, CliError> {
    if a.steps < 2 || !(a.w_min < a.w_max) {
        return Err(usage("need --steps ≥ 2 and --w-min < --w-max"));
    }
    let grid = linspace(a.w_min, a.w_max, a.steps);
    let rows: Vec<PhaseRow> = grid
        .par_iter()
        .map(|&w| phase_table(a.d, &[w]).map(|r| r[0]))
        .collect::<Result<_, _>>()
        .map_err(compute)?;
    let mut out = preamble(cli, "phase", a)?;
    if a.log {
        out.push_str("w,log_alpha_c,log_lambda_c,log_lambda_low\n");
        for r in &rows {
            writeln!(out, "{:?},{:?},{:?},{:?}", r.w, r.alpha_c.ln(), r.lambda_c.ln(), r.lambda_low.ln()).unwrap();
        }
    } else {
        out.push_str(&crate::uniqueness::phase_csv(&rows));
    }
    Ok(out)
}

fn spins_line(out: &mut String, left: &[Spin], right: Option<&[Spin]>) {
    let all = left.iter().chain(right.into_iter().flatten());
    let words: Vec<&str> = all.map(|&s| if s == PLUS { "+1" } else { "-1" }).collect();
    out.push_str(&words.join(" "));
    out.push('\n');
}

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> Result<String, CliError> {
    let g = read_graph(&a.model.graph)?;
    let f = a.model.fugacities()?;
    let (spec, resolved) = a.chain.resolve(g.n_left())?;
    let oracle = Oracle::default();
    let seed = cli.seed;
    let states: Vec<ChainState> = (0..a.n_samples)
        .into_par_iter()
        .map(|r| -> Result<ChainState, CliError> {
            let rng = replica_stream(seed, r);
            Ok(match spec {
                ChainSpec::Nu => {
                    let mut s = ChainState::new(&g, rng);
                    NuKernel::new(&g, f).run(&mut s, a.chain.steps);
                    s
                }
                ChainSpec::Mu => {
                    let mut s = ChainState::new_two_sided(&g, rng);
                    (0..a.chain.steps).for_each(|_| glauber_mu_step(&mut s, &g, f));
                    s
                }
                ChainSpec::Block => {
                    let mut s = ChainState::new_two_sided(&g, rng);
                    (0..a.chain.steps).for_each(|_| block_dynamics_step(&mut s, &g, f));
                    s
                }
                ChainSpec::Field(p) => FieldDynamics::new(&g, f, p, oracle)
                    .and_then(|mut fd| fd.run_replica(seed, r))
                    .map_err(compute)?,
            })
        })
        .collect::<Result<_, _>>()?;

    #[derive(Serialize)]
    struct Config<'a> {
        args: &'a SampleArgs,
        resolved: ResolvedChain,
        fugacities: Fugacities,
    }
    let mut out = preamble(
        cli,
        "sample",
        Config {
            args: a,
            resolved,
            fugacities: f,
        },
    )?;
    let nr = if spec.two_sided() { g.n_right() } else { 0 };
    writeln!(out, "# n_left: {} n_right: {} samples: {}", g.n_left(), nr, a.n_samples).unwrap();
    out.push_str("# one sample per line: left spins, then right spins; +1 = occupied\n");
    for s in &states {
        spins_line(&mut out, s.spins_left(), s.spins_right());
    }
    Ok(out)
}

#[derive(Serialize)]
struct DistEntry {
    config: String,
    prob: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ExactResult {
    Z { z: f64, log_z: f64 },
    Marginals { marginals: Vec<f64> },
    Dist { dist: Vec<DistEntry> },
}

fn cmd_exact(cli: &Cli, a: &ExactArgs) -> Result<String, CliError> {
    let g = read_graph(&a.model.graph)?;
    let f = a.model.fugacities()?;
    let oracle = Oracle::default();
    let side = match a.side {
        SideArg::L => Side::L,
        SideArg::R => Side::R,
        SideArg::Full => Side::Full,
    };
    let result = match a.what {
        ExactWhat::Z => {
            let log_z = oracle.log_partition_function(&g, f).map_err(compute)?;
            ExactResult::Z { z: log_z.exp(), log_z }
        }
        ExactWhat::Marginals => ExactResult::Marginals {
            marginals: oracle.dist_side(&g, f, side).map_err(compute)?.marginals(),
        },
        ExactWhat::Dist => {
            let d = oracle.dist_side(&g, f, side).map_err(compute)?;
            ExactResult::Dist {
                dist: d
                    .iter()
                    .map(|(c, p)| DistEntry {
                        config: config_string(c, d.width()),
                        prob: p,
                    })
                    .collect(),
            }
        }
    };
    #[derive(Serialize)]
    struct Config<'a> {
        args: &'a ExactArgs,
        enumeration_cap: usize,
        cap_env: &'static str,
    }
    let config = Config {
        args: a,
        enumeration_cap: oracle.cap(),
        cap_env: ENUM_CAP_ENV,
    };
    json(cli, "exact", config, result)
}

fn cmd_tv_test(cli: &Cli, a: &TvTestArgs) -> Result<String, CliError> {
    let g = read_graph(&a.model.graph)?;
    let f = a.model.fugacities()?;
    let (spec, resolved) = a.chain.resolve(g.n_left())?;
    let curve = mixing_curve(spec, &g, f, &a.times, a.replicas, cli.seed, Oracle::default()).map_err(|e| match e {
        crate::diagnostics::DiagnosticsError::Times | crate::diagnostics::DiagnosticsError::NoReplicas => {
            usage(e.to_string())
        }
        e => compute(e),
    })?;
    #[derive(Serialize)]
    struct Config<'a> {
        args: &'a TvTestArgs,
        resolved: ResolvedChain,
    }
    let config = Config { args: a, resolved };
    match a.format {
        Format::Json => json(cli, "tv-test", config, curve),
        Format::Csv => {
            let mut out = preamble(cli, "tv-test", config)?;
            writeln!(out, "# chain: {} start: {}", curve.chain, curve.start).unwrap();
            out.push_str(&curve.to_csv());
            Ok(out)
        }
    }
}

fn cmd_si_check(cli: &Cli, a: &SiCheckArgs) -> Result<String, CliError> {
    let g = read_graph(&a.model.graph)?;
    let f = a.model.fugacities()?;
    let d = (g.max_deg_left().max(2) - 1) as f64;
    let (delta, certified) = match a.delta {
        Some(delta) => (delta, false),
        None => match certify_delta(f.lambda, d, f.alpha).map_err(compute)? {
            Some(delta) => (delta, true),
            None => (0.0, true),
        },
    };
    let policy = if a.no_pinnings {
        PinningPolicy::None
    } else {
        let n = g.n_left().saturating_sub(2);
        PinningPolicy::AllUpTo(a.max_pinned.map_or(n, |k| k.min(n)))
    };
    let report = si_check(&g, f, delta, policy, Oracle::default()).map_err(compute)?;
    #[derive(Serialize)]
    struct Config<'a> {
        args: &'a SiCheckArgs,
        delta: f64,
        delta_certified: bool,
        policy: PinningPolicy,
    }
    json(
        cli,
        "si-check",
        Config {
            args: a,
            delta,
            delta_certified: certified,
            policy,
        },
        report,
    )
}

fn cmd_ising(cli: &Cli, a: &IsingArgs) -> Result<String, CliError> {
    let g = read_graph(&a.graph)?;
    let inst = reduce_general(&g, a.lambda, a.lambda_right.unwrap_or(a.lambda)).map_err(compute)?;
    let deviation = if a.verify {
        Some(verify_reduction(&g, &inst, Oracle::default()).map_err(compute)?)
    } else {
        None
    };
    #[derive(Serialize)]
    struct Result<'a> {
        instance: &'a crate::ising::IsingInstance,
        max_deviation: Option<f64>,
    }
    json(
        cli,
        "ising-reduce",
        a,
        Result {
            instance: &inst,
            max_deviation: deviation,
        },
    )
}

/// Parses `args`, runs the command and writes the output; returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let out = match execute(&cli) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let written = match &cli.output {
        Some(path) => std::fs::write(path, out).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(out.as_bytes()).map_err(|e| e.to_string())
        }
    };
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
