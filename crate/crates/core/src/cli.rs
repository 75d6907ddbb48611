//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when a check runs and fails, 2 on usage or
//! runtime errors. Every randomized command requires `--seed`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{certify, Budgets, CertifyRequest, SparseSignal};
use crate::experiments::{
    self, decay_check, lebesgue_check, qoga_lebesgue_dnorm_check, theorem21_diagnostic, CheckStatus,
    CoefficientLaw, DictionaryLaw, McConfig,
};
use crate::greedy::{run_wcga_observed, run_womp_observed, run_wqoga_observed, Algorithm, GreedyConfig, IterationState};
use crate::space::{Dictionary, SpaceSpec, Vector};

#[derive(Debug, Parser)]
#[command(name = "lpgreedy", version, about = "Greedy sparse approximation in l_p spaces")]
pub struct Cli {
    /// Print progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a dictionary file.
    GenDict(GenDictArgs),
    /// Write a random sparse signal for a dictionary.
    GenSignal(GenSignalArgs),
    /// Compute dictionary and signal constants.
    Certify(CertifyArgs),
    /// Run one greedy pursuit and emit a JSON-lines trace.
    Run(RunArgs),
    /// Monte Carlo recovery sweep.
    Mc(McArgs),
    /// Single-instance checks.
    #[command(subcommand)]
    Check(CheckCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DictLawArg {
    Gaussian,
    Identity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CoeffLawArg {
    UniformPm1,
    Rademacher,
    UniformFloor,
}

impl From<CoeffLawArg> for CoefficientLaw {
    fn from(v: CoeffLawArg) -> Self {
        match v {
            CoeffLawArg::UniformPm1 => Self::UniformPm1,
            CoeffLawArg::Rademacher => Self::Rademacher,
            CoeffLawArg::UniformFloor => Self::UniformFloor,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDictArgs {
    #[arg(long)]
    pub dim: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = DictLawArg::Gaussian)]
    pub law: DictLawArg,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenSignalArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = CoeffLawArg::UniformPm1)]
    pub law: CoeffLawArg,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RipMethodArg {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub dict: PathBuf,
    /// Signal file; needed for `--c1-r` and `--a2-d`.
    #[arg(long)]
    pub signal: Option<PathBuf>,
    /// Sparsity levels for the RIP constant (repeatable or comma separated).
    #[arg(long = "rip-s", value_delimiter = ',')]
    pub rip_s: Vec<usize>,
    #[arg(long, value_enum, default_value_t = RipMethodArg::Exhaustive)]
    pub method: RipMethodArg,
    /// Sampled supports per sparsity level.
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Exponent `r` of the Nikol'skii-type constant `C_1`.
    #[arg(long = "c1-r")]
    pub c1_r: Option<f64>,
    /// Depth `D` of the incoherence constant `U`.
    #[arg(long = "a2-d")]
    pub a2_d: Option<usize>,
    #[arg(long)]
    pub budget_rip: Option<u128>,
    #[arg(long)]
    pub budget_c1: Option<u128>,
    #[arg(long)]
    pub budget_u: Option<u128>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Target `f0`: a signal synthesized on the dictionary, optionally
/// replaced by an explicit vector.
#[derive(Debug, Args)]
pub struct TargetArgs {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub signal: Option<PathBuf>,
    /// JSON array used as `f0` instead of the synthesized signal.
    #[arg(long)]
    pub f0: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_parser = parse_algorithm)]
    pub alg: Algorithm,
    #[command(flatten)]
    pub target: TargetArgs,
    /// Expected exponent; must match the dictionary file.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Defaults to `min(dim, N)`.
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum McDictArg {
    Gaussian,
    Identity,
    File,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long)]
    pub trials: u64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = CoeffLawArg::UniformPm1)]
    pub coeff_law: CoeffLawArg,
    #[arg(long)]
    pub eps1: Option<f64>,
    #[arg(long, value_enum, default_value_t = McDictArg::Gaussian)]
    pub dict_law: McDictArg,
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// `nu` levels for `N(x, nu)` (repeatable or comma separated).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub nu: Vec<f64>,
    /// Worker thread cap; results are identical for every value.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Writes `<out>.csv` (per trial) and `<out>.json` (aggregate).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Geometric decay of the WCGA residual against certified constants.
    Decay(DecayArgs),
    /// Residual after the prescribed WCGA iteration count.
    Lebesgue(LebesgueArgs),
    /// D-norm Lebesgue inequality for QOGA on coherent dictionaries.
    QogaDnorm(QogaArgs),
    /// OMP iteration count against `K + 6 N(x, c delta^{1/2} K)`.
    Thm21(Thm21Args),
}

#[derive(Debug, Args)]
pub struct DecayArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LebesgueArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub big_c: f64,
    #[arg(long)]
    pub max_ratio: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct QogaArgs {
    #[command(flatten)]
    pub target: TargetArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Thm21Args {
    #[arg(long)]
    pub dict: PathBuf,
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long, default_value_t = 1_000_000)]
    pub delta_budget: u128,
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,5,10")]
    pub c_grid: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Result of a successfully executed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailed,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::CheckFailed => 1,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => o.exit_code(),
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

pub fn execute(cli: &Cli) -> anyhow::Result<Outcome> {
    let verbose = cli.verbose;
    match &cli.command {
        Command::GenDict(a) => cmd_gen_dict(a),
        Command::GenSignal(a) => cmd_gen_signal(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Run(a) => cmd_run(a),
        Command::Mc(a) => cmd_mc(a, verbose),
        Command::Check(c) => cmd_check(c),
    }
}

fn require_seed(seed: Option<u64>, what: &str) -> anyhow::Result<u64> {
    seed.ok_or_else(|| anyhow!("{what} requires --seed"))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

/// Serializes `report` and adds the echoed configuration under `"config"`.
fn with_config<T: Serialize>(config: Value, report: &T) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if let Value::Object(map) = &mut v {
        map.insert("config".into(), config);
    }
    v
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn cmd_gen_dict(a: &GenDictArgs) -> anyhow::Result<Outcome> {
    let space = SpaceSpec::new(a.dim, a.p)?;
    let dict = match a.law {
        DictLawArg::Identity => {
            if a.n != a.dim {
                bail!("identity dictionary needs --n equal to --dim");
            }
            Dictionary::identity(space)
        }
        DictLawArg::Gaussian => {
            let seed = require_seed(a.seed, "a gaussian dictionary")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            experiments::gaussian_dictionary(a.dim, a.n, a.p, &mut rng)?
        }
    };
    let mut text = dict.to_json();
    text.push('\n');
    emit(a.out.as_deref(), &text)?;
    Ok(Outcome::Success)
}

fn cmd_gen_signal(a: &GenSignalArgs) -> anyhow::Result<Outcome> {
    let seed = require_seed(a.seed, "gen-signal")?;
    let dict = Dictionary::read_json(&a.dict)?;
    if a.k == 0 || a.k > dict.n_atoms() {
        bail!("--k must lie in 1..={}", dict.n_atoms());
    }
    let law = CoefficientLaw::from(a.law);
    if law == CoefficientLaw::UniformFloor && !a.eps1.is_some_and(|e| e > 0.0 && e < 1.0) {
        bail!("uniform-floor needs --eps1 in (0, 1)");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support = sample(&mut rng, dict.n_atoms(), a.k).into_vec();
    support.sort_unstable();
    let coeffs = experiments::draw_coefficients(law, a.k, a.eps1, &mut rng);
    let signal = SparseSignal::new(support, coeffs)?;
    let mut text = serde_json::to_string(&signal)?;
    text.push('\n');
    emit(a.out.as_deref(), &text)?;
    Ok(Outcome::Success)
}

fn read_signal(path: &Path) -> anyhow::Result<SparseSignal> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing signal {}", path.display()))
}

fn read_vector(path: &Path) -> anyhow::Result<Vector> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Vec<f64> = serde_json::from_str(&text).with_context(|| format!("parsing vector {}", path.display()))?;
    Ok(Vector::from_vec(v))
}

struct Target {
    dict: Dictionary,
    signal: Option<SparseSignal>,
    f0: Vector,
}

fn load_target(t: &TargetArgs) -> anyhow::Result<Target> {
    let dict = Dictionary::read_json(&t.dict)?;
    let signal = t.signal.as_deref().map(read_signal).transpose()?;
    if let Some(s) = &signal {
        s.check_fits(&dict)?;
    }
    let f0 = match (&t.f0, &signal) {
        (Some(path), _) => read_vector(path)?,
        (None, Some(s)) => s.synthesize(&dict)?,
        (None, None) => bail!("need --signal or --f0"),
    };
    if f0.len() != dict.dim() {
        bail!("f0 has length {}, dictionary dimension is {}", f0.len(), dict.dim());
    }
    Ok(Target { dict, signal, f0 })
}

fn target_config(t: &TargetArgs) -> Value {
    json!({
        "dict": path_str(&t.dict),
        "signal": t.signal.as_deref().map(path_str),
        "f0": t.f0.as_deref().map(path_str),
    })
}

fn need_signal(t: &Target) -> anyhow::Result<&SparseSignal> {
    t.signal.as_ref().ok_or_else(|| anyhow!("this check needs --signal"))
}

fn cmd_certify(a: &CertifyArgs) -> anyhow::Result<Outcome> {
    let dict = Dictionary::read_json(&a.dict)?;
    let signal = a.signal.as_deref().map(read_signal).transpose()?;
    if let Some(s) = &signal {
        s.check_fits(&dict)?;
    }
    let sampled = matches!(a.method, RipMethodArg::Sampled);
    let seed = if sampled && !a.rip_s.is_empty() {
        Some(require_seed(a.seed, "sampled RIP estimation")?)
    } else {
        a.seed
    };
    if (a.c1_r.is_some() || a.a2_d.is_some()) && signal.is_none() {
        bail!("--c1-r and --a2-d need --signal");
    }
    let defaults = Budgets::default();
    let budgets = Budgets {
        rip_subsets: a.budget_rip.unwrap_or(defaults.rip_subsets),
        nikolskii_subsets: a.budget_c1.unwrap_or(defaults.nikolskii_subsets),
        incoherence_evaluations: a.budget_u.unwrap_or(defaults.incoherence_evaluations),
        best_term_supports: defaults.best_term_supports,
    };
    let req = CertifyRequest {
        rip: a.rip_s.iter().map(|&s| (s, sampled.then_some(a.trials))).collect(),
        rip_seed: seed.unwrap_or(0),
        signal,
        c1_r: a.c1_r,
        u_d: a.a2_d,
        budgets,
    };
    let report = certify(&dict, &req)?;
    let config = json!({
        "command": "certify",
        "dict": path_str(&a.dict),
        "signal": a.signal.as_deref().map(path_str),
        "p": dict.space().p(),
        "rip_s": a.rip_s,
        "method": a.method,
        "trials": sampled.then_some(a.trials),
        "seed": seed,
        "c1_r": a.c1_r,
        "a2_d": a.a2_d,
        "budgets": budgets,
    });
    emit(a.out.as_deref(), &pretty(&with_config(config, &report)))?;
    Ok(Outcome::Success)
}

fn cmd_run(a: &RunArgs) -> anyhow::Result<Outcome> {
    let target = load_target(&a.target)?;
    let dict = &target.dict;
    if let Some(p) = a.p {
        if p != dict.space().p() {
            bail!("--p {p} does not match the dictionary (p = {})", dict.space().p());
        }
    }
    let max_iter = a.max_iter.unwrap_or(dict.dim().min(dict.n_atoms()));
    let cfg = GreedyConfig::new(a.t, max_iter, a.tol)?;
    let truth = target.signal.as_ref();

    let mut lines = Vec::new();
    lines.push(json!({"config": {
        "command": "run",
        "algorithm": a.alg,
        "target": target_config(&a.target),
        "p": dict.space().p(),
        "t": a.t,
        "max_iterations": max_iter,
        "tol": a.tol,
    }}));
    lines.push(json!({"iteration": 0, "atom": null, "residual_norm": null}));
    let mut observer = |s: &IterationState<'_>| {
        lines.push(json!({
            "iteration": s.iteration,
            "atom": s.selected.last(),
            "residual_norm": s.residual_norm,
        }));
    };
    let trace = match a.alg {
        Algorithm::Womp => run_womp_observed(&target.f0, dict, &cfg, truth, &mut observer)?,
        Algorithm::Wcga => run_wcga_observed(&target.f0, dict, &cfg, truth, &mut observer)?,
        Algorithm::Wqoga => run_wqoga_observed(&target.f0, dict, &cfg, truth, &mut observer)?,
    };
    lines[1]["residual_norm"] = json!(trace.residual_norms[0]);
    lines.push(json!({ "summary": trace }));
    let mut text = String::new();
    for l in &lines {
        text.push_str(&serde_json::to_string(l)?);
        text.push('\n');
    }
    emit(a.out.as_deref(), &text)?;
    Ok(Outcome::Success)
}

fn cmd_mc(a: &McArgs, verbose: bool) -> anyhow::Result<Outcome> {
    let seed = require_seed(a.seed, "mc")?;
    let mut cfg = McConfig::new(a.m, a.n, a.k, a.eps, a.trials, seed);
    cfg.coefficient_law = a.coeff_law.into();
    cfg.epsilon1 = a.eps1;
    cfg.nu_grid = a.nu.clone();
    cfg.dictionary_law = match a.dict_law {
        McDictArg::Gaussian => DictionaryLaw::GaussianNormalized,
        McDictArg::Identity => DictionaryLaw::Identity,
        McDictArg::File => DictionaryLaw::FromFile,
    };
    cfg.dictionary_path = a.dict.clone();
    if verbose {
        eprintln!("mc: {} trials, budget {}", cfg.trials, cfg.iteration_budget());
    }
    let res = experiments::mc_recovery_with_jobs(&cfg, a.jobs)?;
    let csv_path = a.out.with_extension("csv");
    let json_path = a.out.with_extension("json");
    let mut csv = Vec::new();
    res.write_csv(&mut csv)?;
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    let mut agg = res.aggregate_json();
    agg.push('\n');
    fs::write(&json_path, agg).with_context(|| format!("writing {}", json_path.display()))?;
    if verbose {
        eprintln!("mc: frequency {} ci95 {:?}", res.frequency, res.ci95);
    }
    Ok(Outcome::Success)
}

fn status_outcome(s: CheckStatus) -> Outcome {
    match s {
        CheckStatus::Fail => Outcome::CheckFailed,
        _ => Outcome::Success,
    }
}

fn cmd_check(c: &CheckCommand) -> anyhow::Result<Outcome> {
    match c {
        CheckCommand::Decay(a) => {
            let target = load_target(&a.target)?;
            let truth = need_signal(&target)?;
            let cfg = GreedyConfig::new(a.t, target.dict.n_atoms().max(1), 0.0)?;
            let rep = decay_check(&target.f0, &target.dict, truth, &cfg, a.r, a.d)?;
            let config = json!({"command": "check decay", "target": target_config(&a.target), "r": a.r, "d": a.d, "t": a.t});
            emit(a.out.as_deref(), &pretty(&with_config(config, &rep)))?;
            Ok(status_outcome(rep.status))
        }
        CheckCommand::Lebesgue(a) => {
            let target = load_target(&a.target)?;
            let truth = need_signal(&target)?;
            let cfg = GreedyConfig::new(a.t, 1, 0.0)?;
            let rep = lebesgue_check(&target.f0, &target.dict, truth, &cfg, a.r, a.big_c, a.d, a.max_ratio)?;
            let config = json!({
                "command": "check lebesgue", "target": target_config(&a.target),
                "r": a.r, "d": a.d, "big_c": a.big_c, "max_ratio": a.max_ratio, "t": a.t,
            });
            emit(a.out.as_deref(), &pretty(&with_config(config, &rep)))?;
            Ok(status_outcome(rep.status))
        }
        CheckCommand::QogaDnorm(a) => {
            let target = load_target(&a.target)?;
            let rep = qoga_lebesgue_dnorm_check(&target.f0, &target.dict, a.m)?;
            let config = json!({"command": "check qoga-dnorm", "target": target_config(&a.target), "m": a.m});
            emit(a.out.as_deref(), &pretty(&with_config(config, &rep)))?;
            Ok(status_outcome(rep.status))
        }
        CheckCommand::Thm21(a) => {
            let dict = Dictionary::read_json(&a.dict)?;
            let signal = read_signal(&a.signal)?;
            signal.check_fits(&dict)?;
            let rep = theorem21_diagnostic(&dict, &signal, a.delta_budget, &a.c_grid)?;
            let config = json!({
                "command": "check thm21", "dict": path_str(&a.dict), "signal": path_str(&a.signal),
                "delta_budget": a.delta_budget.to_string(), "c_grid": a.c_grid,
            });
            emit(a.out.as_deref(), &pretty(&with_config(config, &rep)))?;
            Ok(status_outcome(rep.status))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_from_args(["lpgreedy", "gen-dict", "--dim", "4"]), 2);
        assert_eq!(run_from_args(["lpgreedy", "nonsense"]), 2);
        assert_eq!(run_from_args(["lpgreedy", "gen-dict", "--dim", "4", "--n", "4", "--p", "1.5", "--law", "identity"]), 2);
        assert_eq!(run_from_args(["lpgreedy", "gen-dict", "--dim", "4", "--n", "8"]), 2);
    }
}
