//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 no result (no block length,
//! no crossing), 4 budget exceeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::action::FreeWord;
use crate::classify::{self, Classification};
use crate::error::Error;
use crate::json::{format_g17, to_json_string, to_value};
use crate::measure::{self, DiscreteMeasure, MeasurePair};
use crate::simulate::{self, PercolationOptions, DEFAULT_EPSILON};
use crate::tree::{self, TreeSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NO_RESULT: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

/// Consulted for the worker count when `--threads` is absent.
pub const THREADS_ENV: &str = "BERNOULLI_PHASE_THREADS";

const CERTIFIED: &str = "theorem-certified";
const EVIDENCE: &str = "evidence";

#[derive(Parser, Debug)]
#[command(name = "bernoulli-phase", version, about = "Phase diagrams of nonsingular Bernoulli actions on trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hellinger distance and affinity of two measures (--mu, --nu).
    Hellinger(Common),
    /// (1 − t)·ν + t·μ (--nu, --mu, --t).
    Mix(Common),
    /// Minimum of the moment generating function of Z (--mu0, --mu1).
    Chernoff(Common),
    /// Closed subgroup generated by the log-ratio differences.
    RangeGroup(Common),
    /// Poincaré exponent of a tree, or a regression estimate from --counts.
    Poincare(Common),
    /// Threshold verdict for the tree action.
    Classify(Common),
    /// Krieger type from the essential range.
    Krieger(Common),
    /// Spectral radius of the averaged Koopman operator on 𝔽_d.
    Spectral(Common),
    /// Scan t ↦ affinity(mix(ν, μ₀, t), mix(ν, μ₁, t)) for the phase transition.
    PhaseScan(Common),
    /// Monte Carlo diagnostics.
    #[command(subcommand)]
    Simulate(SimCommand),
    /// Block-edge percolation and Galton–Watson survival.
    Percolation(Common),
    /// Smallest block length M with P(R_M ≥ 0) > exp(−Mδ).
    BlockLength(Common),
}

#[derive(Subcommand, Debug)]
enum SimCommand {
    /// Sample means of the critical martingale W_n.
    Martingale(Common),
    /// Growth of T_n = Σ_{|v| ≤ n} exp(S_v).
    Recurrence(Common),
    /// χ² test of the coupling pushforward against mix(ν, μ, t).
    Coupling(Common),
    /// Truncated recurrence diagnostic for the ℤ-shift family μ_n^t.
    Shift(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Comma-separated weights.
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    mu0: Option<String>,
    #[arg(long)]
    mu1: Option<String>,
    /// JSON file of the form {"weights": [...]}; an inline flag wins.
    #[arg(long)]
    mu_file: Option<PathBuf>,
    #[arg(long)]
    nu_file: Option<PathBuf>,
    #[arg(long)]
    mu0_file: Option<PathBuf>,
    #[arg(long)]
    mu1_file: Option<PathBuf>,
    /// `regular:q` or `cayley:d`.
    #[arg(long)]
    tree: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    /// Poincaré exponent; defaults to the one of --tree.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Grid points for phase-scan.
    #[arg(long, default_value_t = 1001)]
    grid: usize,
    /// Bisection tolerance for phase-scan.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Cauchy threshold for recurrence verdicts.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Largest block length tried by block-length.
    #[arg(long, default_value_t = 64)]
    mmax: usize,
    /// Block length for percolation.
    #[arg(long, default_value_t = 1)]
    block: usize,
    /// Monte Carlo trials for percolation survival.
    #[arg(long)]
    mc_trials: Option<usize>,
    #[arg(long, default_value_t = 14)]
    mc_depth: usize,
    /// Samples for the coupling test.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Window for the shift diagnostic.
    #[arg(long, default_value_t = 256)]
    window: usize,
    /// Extra generators joined to the range group (comma-separated reals).
    #[arg(long)]
    generators: Option<String>,
    /// Apply the critical-case rule for a full vertex orbit of a regular tree.
    #[arg(long)]
    full_orbit: bool,
    /// Sphere counts for the exponent regression (comma-separated).
    #[arg(long)]
    counts: Option<String>,
    /// Regression window `n0,n1`.
    #[arg(long)]
    fit_window: Option<String>,
    /// Free-group word, for `simulate martingale` on a Cayley tree.
    #[arg(long)]
    word: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

/// Failure with an exit code and a message for stderr.
struct Failure {
    code: i32,
    message: String,
    /// Output still written before exiting (no-result cases).
    output: Option<String>,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
            output: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoBlockLength(_) => EXIT_NO_RESULT,
            Error::AtomBudgetExceeded { .. } | Error::DepthBudget { .. } | Error::Overflow(_) => EXIT_BUDGET,
            _ => EXIT_INVALID,
        };
        Self {
            code,
            message: e.to_string(),
            output: None,
        }
    }
}

type CliResult = std::result::Result<String, Failure>;

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (common, outcome) = dispatch(cli.command);
    let (text, code, message) = match outcome {
        Ok(text) => (Some(text), EXIT_OK, None),
        Err(f) => (f.output, f.code, Some(f.message)),
    };
    if let Some(text) = text {
        if let Err(e) = emit(common.out.as_deref(), &text) {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    }
    if let Some(m) = message {
        eprintln!("error: {m}");
    }
    code
}

fn emit(out: Option<&Path>, text: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

fn dispatch(command: Command) -> (Common, CliResult) {
    let (c, f): (Common, fn(&Common, usize) -> CliResult) = match command {
        Command::Hellinger(c) => (c, hellinger),
        Command::Mix(c) => (c, mix),
        Command::Chernoff(c) => (c, chernoff),
        Command::RangeGroup(c) => (c, range_group),
        Command::Poincare(c) => (c, poincare),
        Command::Classify(c) => (c, classify_cmd),
        Command::Krieger(c) => (c, krieger),
        Command::Spectral(c) => (c, spectral),
        Command::PhaseScan(c) => (c, phase_scan),
        Command::Percolation(c) => (c, percolation),
        Command::BlockLength(c) => (c, block_length),
        Command::Simulate(SimCommand::Martingale(c)) => (c, sim_martingale),
        Command::Simulate(SimCommand::Recurrence(c)) => (c, sim_recurrence),
        Command::Simulate(SimCommand::Coupling(c)) => (c, sim_coupling),
        Command::Simulate(SimCommand::Shift(c)) => (c, sim_shift),
    };
    let result = workers(&c).and_then(|w| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Failure::invalid(format!("--threads: {e}")))?;
        pool.install(|| f(&c, w))
    });
    (c, result)
}

fn workers(c: &Common) -> std::result::Result<usize, Failure> {
    if let Some(n) = c.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("{THREADS_ENV}: expected a non-negative integer, got `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn parse_reals(flag: &str, s: &str) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Failure::invalid(format!("--{flag}: cannot parse `{x}` as a real")))
        })
        .collect()
}

fn measure(
    flag: &str,
    inline: &Option<String>,
    file: &Option<PathBuf>,
) -> std::result::Result<DiscreteMeasure, Failure> {
    let with_flag = |e: Error| Failure::invalid(format!("--{flag}: {e}"));
    match (inline, file) {
        (Some(s), file) => {
            if file.is_some() {
                eprintln!("warning: both --{flag} and --{flag}-file given; using --{flag}");
            }
            DiscreteMeasure::new(parse_reals(flag, s)?).map_err(with_flag)
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::invalid(format!("--{flag}-file {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("--{flag}-file {}: {e}", path.display())))
        }
        (None, None) => Err(Failure::invalid(format!("missing --{flag} (or --{flag}-file)"))),
    }
}

impl Common {
    fn mu(&self) -> std::result::Result<DiscreteMeasure, Failure> {
        measure("mu", &self.mu, &self.mu_file)
    }

    fn nu(&self) -> std::result::Result<DiscreteMeasure, Failure> {
        measure("nu", &self.nu, &self.nu_file)
    }

    fn pair(&self) -> std::result::Result<MeasurePair, Failure> {
        let mu0 = measure("mu0", &self.mu0, &self.mu0_file)?;
        let mu1 = measure("mu1", &self.mu1, &self.mu1_file)?;
        MeasurePair::new(mu0, mu1).map_err(|e| Failure::invalid(format!("--mu0/--mu1: {e}")))
    }

    fn tree(&self) -> std::result::Result<TreeSpec, Failure> {
        let s = self.tree.as_deref().ok_or_else(|| Failure::invalid("missing --tree"))?;
        s.parse().map_err(|e: Error| Failure::invalid(format!("--tree: {e}")))
    }

    fn t(&self) -> std::result::Result<f64, Failure> {
        self.t.ok_or_else(|| Failure::invalid("missing --t"))
    }

    /// `--delta` if given, else the Poincaré exponent of `--tree`.
    fn delta(&self) -> std::result::Result<f64, Failure> {
        match (self.delta, &self.tree) {
            (Some(d), _) => Ok(d),
            (None, Some(_)) => Ok(self.tree()?.poincare_exponent()),
            (None, None) => Err(Failure::invalid("missing --delta (or --tree)")),
        }
    }

    fn depth(&self) -> std::result::Result<usize, Failure> {
        self.depth.ok_or_else(|| Failure::invalid("missing --depth"))
    }

    fn trials(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    fn json_only(&self, command: &str) -> std::result::Result<(), Failure> {
        match self.format {
            Format::Json => Ok(()),
            Format::Csv => Err(Failure::invalid(format!("--format: `{command}` only supports json"))),
        }
    }
}

fn flag_err(flag: &'static str) -> impl Fn(Error) -> Failure {
    move |e| {
        let mut f = Failure::from(e);
        f.message = format!("--{flag}: {}", f.message);
        f
    }
}

fn hellinger(c: &Common, _: usize) -> CliResult {
    c.json_only("hellinger")?;
    let (mu, nu) = (c.mu()?, c.nu()?);
    let h2 = measure::hellinger_sq(&mu, &nu).map_err(flag_err("nu"))?;
    let affinity = measure::affinity(&mu, &nu).map_err(flag_err("nu"))?;
    Ok(to_json_string(&json!({ "h2": h2, "affinity": affinity })))
}

fn mix(c: &Common, _: usize) -> CliResult {
    c.json_only("mix")?;
    let m = measure::mix(&c.nu()?, &c.mu()?, c.t()?).map_err(flag_err("t"))?;
    Ok(to_json_string(&json!({ "t": c.t, "weights": m.weights() })))
}

fn chernoff(c: &Common, _: usize) -> CliResult {
    c.json_only("chernoff")?;
    let pair = c.pair()?;
    let m = measure::chernoff_min(&pair)?;
    let a = pair.affinity();
    Ok(to_json_string(&json!({
        "t_star": m.t_star,
        "value": m.value,
        "affinity": a,
        "affinity_squared": a * a,
    })))
}

fn generators(c: &Common) -> std::result::Result<Option<Vec<f64>>, Failure> {
    c.generators.as_deref().map(|s| parse_reals("generators", s)).transpose()
}

fn range_group(c: &Common, _: usize) -> CliResult {
    c.json_only("range-group")?;
    let report = measure::essential_range_group(&c.pair()?, generators(c)?.as_deref());
    Ok(to_json_string(&report))
}

fn poincare(c: &Common, _: usize) -> CliResult {
    c.json_only("poincare")?;
    if let Some(counts) = &c.counts {
        let counts: Vec<u64> = counts
            .split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Failure::invalid(format!("--counts: cannot parse `{x}` as a count")))
            })
            .collect::<std::result::Result<_, _>>()?;
        let window = match &c.fit_window {
            Some(w) => {
                let parts: Vec<usize> = w
                    .split(',')
                    .map(|x| x.trim().parse().map_err(|_| Failure::invalid("--fit-window: expected `n0,n1`")))
                    .collect::<std::result::Result<_, _>>()?;
                match parts.as_slice() {
                    [a, b] => (*a, *b),
                    _ => return Err(Failure::invalid("--fit-window: expected `n0,n1`")),
                }
            }
            None => (counts.len() / 2, counts.len().saturating_sub(1)),
        };
        let estimate = tree::estimate_exponent(&counts, window).map_err(flag_err("fit-window"))?;
        return Ok(to_json_string(&json!({ "estimate": estimate, "window": [window.0, window.1] })));
    }
    let spec = c.tree()?;
    Ok(to_json_string(&json!({
        "tree": spec.to_string(),
        "delta": spec.poincare_exponent(),
        "branching": spec.branching(),
    })))
}

#[derive(Serialize)]
struct Labeled<'a, T: Serialize> {
    label: &'a str,
    #[serde(flatten)]
    body: T,
}

fn classification(c: &Common) -> std::result::Result<Classification, Failure> {
    let pair = c.pair()?;
    classify::classify_tree_action(c.delta()?, &pair, c.full_orbit).map_err(flag_err("delta"))
}

fn classify_cmd(c: &Common, _: usize) -> CliResult {
    c.json_only("classify")?;
    Ok(to_json_string(&Labeled {
        label: CERTIFIED,
        body: classification(c)?,
    }))
}

fn krieger(c: &Common, _: usize) -> CliResult {
    c.json_only("krieger")?;
    let report = classify::krieger_type(&c.pair()?, generators(c)?.as_deref());
    Ok(to_json_string(&report))
}

fn spectral(c: &Common, _: usize) -> CliResult {
    c.json_only("spectral")?;
    let d = match c.tree()? {
        TreeSpec::Cayley { d } => d,
        other => return Err(Failure::invalid(format!("--tree: spectral needs cayley:d, got {other}"))),
    };
    let report = classify::spectral_radius_free(d, &c.pair()?).map_err(flag_err("tree"))?;
    Ok(to_json_string(&report))
}

fn phase_scan(c: &Common, _: usize) -> CliResult {
    let (nu, pair) = (c.nu()?, c.pair()?);
    let scan = classify::phase_scan(c.delta()?, &nu, &pair, c.grid, c.tol).map_err(|e| match e {
        Error::ParameterOutOfRange { name: "grid_points", .. } => flag_err("grid")(e),
        Error::ParameterOutOfRange { name: "bisect_tol", .. } => flag_err("tol")(e),
        e => Failure::from(e),
    })?;
    let text = match c.format {
        Format::Json => to_json_string(&Labeled {
            label: CERTIFIED,
            body: &scan,
        }),
        Format::Csv => {
            let mut s = String::from("t,affinity,threshold,phase\n");
            for (&(t, a), phase) in scan.grid.iter().zip(scan.phases()) {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    format_g17(t),
                    format_g17(a),
                    format_g17(scan.threshold),
                    phase.as_str()
                );
            }
            s
        }
    };
    match scan.t1 {
        Some(_) => Ok(text),
        None => Err(Failure {
            code: EXIT_NO_RESULT,
            message: format!("no single crossing of the threshold ({} sign changes on the grid)", scan.crossings),
            output: Some(text),
        }),
    }
}

fn percolation(c: &Common, w: usize) -> CliResult {
    c.json_only("percolation")?;
    let options = PercolationOptions {
        mc_trials: c.mc_trials,
        mc_depth: c.mc_depth,
        seed: c.seed,
        workers: w,
    };
    let report = simulate::percolation_report(&c.tree()?, &c.pair()?, c.block, options).map_err(|e| match e {
        Error::ParameterOutOfRange { name: "M", .. } => flag_err("block")(e),
        e => Failure::from(e),
    })?;
    let label = if c.mc_trials.is_some() { EVIDENCE } else { CERTIFIED };
    Ok(to_json_string(&Labeled { label, body: report }))
}

fn block_length(c: &Common, _: usize) -> CliResult {
    c.json_only("block-length")?;
    let pair = c.pair()?;
    match simulate::find_block_length(&pair, c.delta()?, c.mmax) {
        Ok(m) => {
            let p = simulate::block_sum_distribution(&pair, m)?.prob_at_least(0.0);
            Ok(to_json_string(&json!({ "M": m, "p": p })))
        }
        Err(Error::NoBlockLength(reason)) => Err(Failure {
            code: EXIT_NO_RESULT,
            message: format!("no block length: {reason}"),
            output: Some(to_json_string(&json!({ "M": null, "reason": reason.as_str() }))),
        }),
        Err(e @ Error::ParameterOutOfRange { name: "delta", .. }) => Err(flag_err("delta")(e)),
        Err(e @ Error::ParameterOutOfRange { name: "M_max", .. }) => Err(flag_err("mmax")(e)),
        Err(e) => Err(e.into()),
    }
}

fn sim_martingale(c: &Common, w: usize) -> CliResult {
    let spec = c.tree()?;
    let pair = c.pair()?;
    if let Some(word) = &c.word {
        c.json_only("simulate martingale --word")?;
        let d = match spec {
            TreeSpec::Cayley { d } => d,
            other => return Err(Failure::invalid(format!("--word needs a cayley tree, got {other}"))),
        };
        let g = FreeWord::parse(d, word).map_err(flag_err("word"))?;
        let trials = c.trials(10_000);
        let est = simulate::rn_sqrt_mean(&spec, &pair, &g, trials, c.seed, w)?;
        let closed_form = pair.affinity().powi(2 * g.len() as i32);
        return Ok(to_json_string(&json!({
            "label": EVIDENCE,
            "word": g.to_string(),
            "trials": trials,
            "seed": c.seed,
            "mean_sqrt_rn": est.mean,
            "std_err": est.std_err,
            "closed_form": closed_form,
        })));
    }
    let stats = simulate::martingale_stats(&spec, &pair, c.depth()?, c.trials(10_000), c.seed, w)
        .map_err(|e| match e {
            Error::ParameterOutOfRange { .. } => flag_err("trials")(e),
            Error::SpecMismatch(_) => flag_err("tree")(e),
            e => e.into(),
        })?;
    match c.format {
        Format::Json => Ok(to_json_string(&Labeled {
            label: EVIDENCE,
            body: stats,
        })),
        Format::Csv => {
            let mut s = String::from("depth,mean_W,std_err,expected\n");
            for (n, (est, e)) in stats.w.iter().zip(&stats.expected).enumerate() {
                let _ = writeln!(s, "{n},{},{},{}", format_g17(est.mean), format_g17(est.std_err), format_g17(*e));
            }
            Ok(s)
        }
    }
}

fn recurrence_output(c: &Common, d: &simulate::RecurrenceDiagnostic, certified: Option<Classification>) -> String {
    match c.format {
        Format::Json => {
            let mut v = to_value(&Labeled { label: EVIDENCE, body: d });
            if let Some(cls) = certified {
                v["theorem_certified"] = to_value(&Labeled {
                    label: CERTIFIED,
                    body: cls,
                });
            }
            let mut s = serde_json::to_string_pretty(&v).expect("json value");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = String::from("trial,depth,log_T\n");
            for (trial, row) in d.log_t.iter().enumerate() {
                for (depth, x) in d.depths.iter().zip(row) {
                    let _ = writeln!(s, "{trial},{depth},{}", format_g17(*x));
                }
            }
            s
        }
    }
}

fn sim_recurrence(c: &Common, w: usize) -> CliResult {
    let spec = c.tree()?;
    let pair = c.pair()?;
    let d = simulate::recurrence_diagnostic(&spec, &pair, c.depth()?, c.trials(200), c.seed, c.epsilon, w)
        .map_err(|e| match e {
            Error::ParameterOutOfRange { name, .. } => flag_err(name)(e),
            e => e.into(),
        })?;
    let certified = classify::classify_tree_action(c.delta()?, &pair, c.full_orbit).ok();
    Ok(recurrence_output(c, &d, certified))
}

fn sim_coupling(c: &Common, _: usize) -> CliResult {
    c.json_only("simulate coupling")?;
    let r = simulate::coupling_pushforward_test(&c.nu()?, &c.mu()?, c.t()?, c.samples, c.seed).map_err(|e| match e {
        Error::ParameterOutOfRange { name: "samples", .. } => flag_err("samples")(e),
        Error::ParameterOutOfRange { .. } => flag_err("t")(e),
        e => e.into(),
    })?;
    Ok(to_json_string(&Labeled { label: EVIDENCE, body: r }))
}

fn sim_shift(c: &Common, w: usize) -> CliResult {
    let d = simulate::shift_recurrence_diagnostic(c.t()?, c.window, c.trials(30), c.seed, w).map_err(|e| match e {
        Error::ParameterOutOfRange { name, .. } => flag_err(name)(e),
        e => e.into(),
    })?;
    Ok(recurrence_output(c, &d, None))
}
