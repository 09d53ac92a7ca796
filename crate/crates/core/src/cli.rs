//! Command-line front end. Every run writes its outputs and a `manifest.json`
//! (argv, resolved configuration and seed) under `--out DIR`.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 on numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::guarantees::{erc_analysis, gap_relation_residual, heuristic_row_l2, nsc_sampled, Certificate};
use crate::harness::{
    derive_seed, run_phantom_recovery, run_phase_diagram, run_snr_vs_lines, snr_rows_to_csv, PhantomAlgorithm,
    PhantomConfig, PhantomVariant, PhaseAlgorithm, PhaseConfig,
};
use crate::io::{read_vector, write_matrix_text, write_vector};
use crate::model::{
    cosupport_of, generate_cosparse_signal, kappa_brute_force, kappa_dif_bounds, kappa_general_position,
    uniqueness_verdict, Cosupport, KappaValue, DEFAULT_ZERO_TOL,
};
use crate::operators::{finite_difference_2d, AnalysisOperator, MeasurementDescriptor, MeasurementSystem, OperatorDescriptor};
use crate::solvers::{
    analysis_l1_solve_with, debias, gap_solve, write_trace_csv, Algorithm, GapConfig, L1Config, LsMode,
    ProblemDescriptor, RecoveryResult, ResultSummary, VectorSource,
};

/// Environment variable overriding the default seed of a run.
pub const SEED_ENV: &str = "COSPARSE_SEED";
/// Seed used when neither `--seed` nor the environment provide one.
pub const DEFAULT_SEED: u64 = 2024;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "cosparse", version, about = "Cosparse analysis model toolkit")]
pub struct Cli {
    /// Directory receiving all outputs and the run manifest.
    #[arg(long, global = true, default_value = "cosparse-out")]
    pub out: PathBuf,
    /// Base seed; takes precedence over COSPARSE_SEED.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an analysis operator and write its descriptor.
    GenOperator(GenOperatorArgs),
    /// Draw an ℓ-cosparse signal, optionally with Gaussian measurements.
    GenSignal(GenSignalArgs),
    /// Recover a signal from measurements.
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Evaluate a recovery certificate.
    #[command(subcommand)]
    Certify(CertifyCommand),
    /// Subspace dimension function κ(ℓ).
    #[command(subcommand)]
    Kappa(KappaCommand),
    /// Uniqueness verdict for m measurements.
    Unique(UniqueArgs),
    /// Empirical phase-transition diagram on tight frames.
    PhaseDiagram(PhaseArgs),
    /// Head-phantom recovery from radial Fourier lines.
    Phantom(PhantomArgs),
    /// Phantom SNR over a range of radial-line counts.
    SnrSweep(SnrArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Dif2d,
    TightFrame,
}

#[derive(Debug, Args)]
pub struct GenOperatorArgs {
    #[arg(long, value_enum)]
    pub kind: OperatorKind,
    /// Lattice side for dif2d.
    #[arg(long)]
    pub n: Option<usize>,
    /// Rows of a tight frame.
    #[arg(long)]
    pub p: Option<usize>,
    /// Signal dimension of a tight frame.
    #[arg(long)]
    pub d: Option<usize>,
    /// Also write the dense matrix as operator.txt.
    #[arg(long)]
    pub write_matrix: bool,
}

#[derive(Debug, Args)]
pub struct GenSignalArgs {
    /// Operator descriptor (JSON).
    #[arg(long)]
    pub operator: PathBuf,
    /// Cosparsity ℓ.
    #[arg(long)]
    pub l: usize,
    /// Number of Gaussian measurements; writes y.txt and problem.json.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum SolveCommand {
    /// Greedy analysis pursuit.
    Gap(GapArgs),
    /// Analysis ℓ1 minimization followed by debiasing.
    L1(L1Args),
}

#[derive(Debug, Args)]
pub struct ProblemInput {
    /// Problem descriptor (JSON); replaces --operator/--measurement/--y.
    #[arg(long, conflicts_with_all = ["operator", "measurement", "y"])]
    pub problem: Option<PathBuf>,
    /// Operator descriptor (JSON).
    #[arg(long, required_unless_present = "problem")]
    pub operator: Option<PathBuf>,
    /// Measurement descriptor (JSON).
    #[arg(long, required_unless_present = "problem")]
    pub measurement: Option<PathBuf>,
    /// Measurement vector (text, or raw f64 for .f64/.raw/.bin).
    #[arg(long, required_unless_present = "problem")]
    pub y: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[command(flatten)]
    pub input: ProblemInput,
    /// Selection factor t in (0, 1].
    #[arg(long)]
    pub t: Option<f64>,
    /// Use the regularized subproblem with this λ.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Stop once the cosupport estimate has this size.
    #[arg(long)]
    pub target_cosparsity: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// CG subproblems on operator actions.
    #[arg(long)]
    pub matrix_free: bool,
}

#[derive(Debug, Args)]
pub struct L1Args {
    #[command(flatten)]
    pub input: ProblemInput,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub matrix_free: bool,
    /// Return the raw ℓ1 minimizer.
    #[arg(long)]
    pub no_debias: bool,
}

#[derive(Debug, Subcommand)]
pub enum CertifyCommand {
    /// Exact recovery condition ‖R‖₁→₁.
    Erc(CertArgs),
    /// Sign-aware condition, enumerated or sampled.
    Nsc(NscArgs),
    /// Residual of the initializer relation.
    GapRelation(RelationArgs),
    /// Row-ℓ2 heuristic.
    Heuristic(CertArgs),
}

#[derive(Debug, Args)]
pub struct CertArgs {
    #[arg(long)]
    pub operator: PathBuf,
    #[arg(long)]
    pub measurement: PathBuf,
    /// Cosupport row indices (whitespace separated).
    #[arg(long, required_unless_present = "x0")]
    pub cosupport: Option<PathBuf>,
    /// Signal whose cosupport is used.
    #[arg(long)]
    pub x0: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
}

#[derive(Debug, Args)]
pub struct NscArgs {
    #[command(flatten)]
    pub cert: CertArgs,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct RelationArgs {
    #[arg(long)]
    pub operator: PathBuf,
    #[arg(long)]
    pub measurement: PathBuf,
    /// The cosparse signal x₀.
    #[arg(long)]
    pub x0: PathBuf,
    /// Cosupport of x₀; derived from x₀ when absent.
    #[arg(long)]
    pub cosupport: Option<PathBuf>,
    /// Measurements; `M x₀` when absent.
    #[arg(long)]
    pub y: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    pub zero_tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum KappaCommand {
    /// κ(ℓ) = max(d − ℓ, 0) for an operator in general position.
    Exact(KappaExactArgs),
    /// Interval bounds for the 2D finite-difference operator.
    Bounds(KappaDifArgs),
    /// Exhaustive enumeration over all ℓ-subsets of rows.
    Brute(KappaBruteArgs),
}

#[derive(Debug, Args)]
pub struct KappaExactArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub l: usize,
}

#[derive(Debug, Args)]
pub struct KappaDifArgs {
    /// 2D finite-difference operator on an N×N lattice.
    #[arg(long, required = true)]
    pub dif: bool,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub l: usize,
}

#[derive(Debug, Args)]
pub struct KappaBruteArgs {
    /// Operator descriptor (JSON).
    #[arg(long, conflicts_with = "dif", required_unless_present = "dif")]
    pub operator: Option<PathBuf>,
    /// Use the finite-difference operator on an N×N lattice.
    #[arg(long, requires = "n")]
    pub dif: bool,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub l: usize,
}

#[derive(Debug, Args)]
pub struct UniqueArgs {
    /// Number of measurements.
    #[arg(long)]
    pub m: usize,
    /// Cosparsity ℓ.
    #[arg(long)]
    pub l: usize,
    /// Signal dimension of a general-position operator.
    #[arg(long, required_unless_present = "dif", conflicts_with = "dif")]
    pub d: Option<usize>,
    /// 2D finite-difference operator on an N×N lattice.
    #[arg(long, requires = "n")]
    pub dif: bool,
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Smoke,
    Full,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PhaseAlg {
    Gap,
    L1,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    /// Redundancy p/d.
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "smoke")]
    pub preset: Preset,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gap,l1")]
    pub alg: Vec<PhaseAlg>,
    /// Override the preset's trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Override the preset's signal dimension.
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PhantomAlg {
    Gap,
    L1,
    Backprojection,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Variant {
    Original,
    Modified,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 13)]
    pub lines: usize,
    #[arg(long, value_enum, default_value = "gap")]
    pub alg: PhantomAlg,
    #[arg(long, value_enum, default_value = "original")]
    pub variant: Variant,
    /// GAP selection factor.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SnrArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Radial-line counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lines: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gap,l1,backprojection")]
    pub alg: Vec<PhantomAlg>,
    #[arg(long, value_enum, default_value = "original")]
    pub variant: Variant,
}

impl From<PhaseAlg> for PhaseAlgorithm {
    fn from(a: PhaseAlg) -> Self {
        match a {
            PhaseAlg::Gap => PhaseAlgorithm::Gap,
            PhaseAlg::L1 => PhaseAlgorithm::L1,
        }
    }
}

impl From<PhantomAlg> for PhantomAlgorithm {
    fn from(a: PhantomAlg) -> Self {
        match a {
            PhantomAlg::Gap => PhantomAlgorithm::Gap,
            PhantomAlg::L1 => PhantomAlgorithm::L1,
            PhantomAlg::Backprojection => PhantomAlgorithm::Backprojection,
        }
    }
}

impl From<Variant> for PhantomVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Original => PhantomVariant::Original,
            Variant::Modified => PhantomVariant::Modified,
        }
    }
}

/// Failure of a CLI run, mapped onto an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) => match e {
                Error::Numerical(_) | Error::RankDeficient { .. } | Error::NonFinite(_) => EXIT_NUMERICAL,
                _ => EXIT_USAGE,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(s) => write!(f, "usage error: {s}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(&cli, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("cosparse: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command inside a worker pool sized by `--jobs`.
pub fn execute(cli: &Cli, argv: &[String]) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| usage(format!("cannot start worker pool: {e}")))?;
    let seed = resolve_seed(cli.seed, std::env::var(SEED_ENV).ok().as_deref())?;
    let ctx = Context { out: cli.out.clone(), argv: argv.to_vec(), seed, jobs: pool.current_num_threads() };
    fs::create_dir_all(&ctx.out)?;
    pool.install(|| dispatch(&cli.command, &ctx))
}

/// Where the resolved seed came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Flag,
    Env,
    Default,
}

/// `--seed`, else `COSPARSE_SEED`, else [`DEFAULT_SEED`].
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>) -> CliResult<(u64, SeedSource)> {
    if let Some(s) = flag {
        return Ok((s, SeedSource::Flag));
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map(|s| (s, SeedSource::Env))
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        None => Ok((DEFAULT_SEED, SeedSource::Default)),
    }
}

struct Context {
    out: PathBuf,
    argv: Vec<String>,
    seed: (u64, SeedSource),
    jobs: usize,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let p = self.path(name);
        fs::write(&p, serde_json::to_string_pretty(value).map_err(Error::from)? + "\n")?;
        Ok(p)
    }

    fn manifest(&self, command: &str, config: Value, outputs: &[PathBuf]) -> CliResult<()> {
        let outputs: Vec<String> = outputs
            .iter()
            .map(|p| p.strip_prefix(&self.out).unwrap_or(p).display().to_string())
            .collect();
        let m = json!({
            "tool": "cosparse",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "argv": self.argv,
            "seed": self.seed.0,
            "seed_source": self.seed.1,
            "jobs": self.jobs,
            "config": config,
            "outputs": outputs,
        });
        self.write_json("manifest.json", &m)?;
        Ok(())
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("config serializes")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn base_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_operator(path: &Path) -> CliResult<(OperatorDescriptor, AnalysisOperator)> {
    let d: OperatorDescriptor = read_json(path)?;
    let op = d.build(&base_of(path))?;
    Ok((d, op))
}

fn load_measurement(path: &Path) -> CliResult<(MeasurementDescriptor, MeasurementSystem)> {
    let d: MeasurementDescriptor = read_json(path)?;
    let m = d.build(&base_of(path))?;
    Ok((d, m))
}

fn read_indices(path: &Path, p: usize) -> CliResult<Cosupport> {
    let text = fs::read_to_string(path)?;
    let idx = text
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| usage(format!("bad cosupport index {t:?} in {}", path.display()))))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Cosupport::new(idx, p)?)
}

fn write_indices(path: &Path, cos: &Cosupport) -> CliResult<()> {
    let s: Vec<String> = cos.indices().iter().map(|i| i.to_string()).collect();
    fs::write(path, s.join("\n") + "\n")?;
    Ok(())
}

/// Descriptor with dense paths made absolute, so it can be copied elsewhere.
fn absolute_operator(d: OperatorDescriptor, base: &Path) -> CliResult<OperatorDescriptor> {
    Ok(match d {
        OperatorDescriptor::Dense { path } => OperatorDescriptor::Dense { path: fs::canonicalize(base.join(path))? },
        other => other,
    })
}

fn dispatch(cmd: &Command, ctx: &Context) -> CliResult<()> {
    match cmd {
        Command::GenOperator(a) => gen_operator(a, ctx),
        Command::GenSignal(a) => gen_signal(a, ctx),
        Command::Solve(SolveCommand::Gap(a)) => solve_gap(a, ctx),
        Command::Solve(SolveCommand::L1(a)) => solve_l1(a, ctx),
        Command::Certify(c) => certify(c, ctx),
        Command::Kappa(k) => kappa(k, ctx),
        Command::Unique(a) => unique(a, ctx),
        Command::PhaseDiagram(a) => phase_diagram(a, ctx),
        Command::Phantom(a) => phantom(a, ctx),
        Command::SnrSweep(a) => snr_sweep(a, ctx),
    }
}

fn gen_operator(a: &GenOperatorArgs, ctx: &Context) -> CliResult<()> {
    let desc = match a.kind {
        OperatorKind::Dif2d => OperatorDescriptor::Dif2d { n: a.n.ok_or_else(|| usage("dif2d needs --n"))? },
        OperatorKind::TightFrame => OperatorDescriptor::TightFrame {
            p: a.p.ok_or_else(|| usage("tight-frame needs --p"))?,
            d: a.d.ok_or_else(|| usage("tight-frame needs --d"))?,
            seed: derive_seed(ctx.seed.0, &[0]),
        },
    };
    let op = desc.build(Path::new("."))?;
    let mut outputs = vec![ctx.write_json("operator.json", &desc)?];
    if a.write_matrix {
        let p = ctx.path("operator.txt");
        write_matrix_text(&p, &op.to_dense()?)?;
        outputs.push(p);
    }
    println!("operator: p = {}, d = {}", op.p(), op.d());
    ctx.manifest("gen-operator", json!({ "operator": desc }), &outputs)
}

fn gen_signal(a: &GenSignalArgs, ctx: &Context) -> CliResult<()> {
    let (desc, op) = load_operator(&a.operator)?;
    if a.l >= op.d() {
        return Err(usage(format!("cosparsity must be below d = {}", op.d())));
    }
    let sig_seed = derive_seed(ctx.seed.0, &[1]);
    let sig = generate_cosparse_signal(&op, a.l, sig_seed)?;
    let mut outputs = vec![ctx.path("x0.txt"), ctx.path("cosupport.txt")];
    write_vector(&outputs[0], &sig.x)?;
    write_indices(&outputs[1], &sig.cosupport)?;
    let mut config = json!({ "operator": desc, "l": a.l, "signal_seed": sig_seed });
    if let Some(m) = a.m {
        let meas = MeasurementDescriptor::Gaussian { m, d: op.d(), seed: derive_seed(ctx.seed.0, &[2]) };
        let sys = meas.build(Path::new("."))?;
        let y = sys.apply(&sig.x)?;
        write_vector(&ctx.path("y.txt"), &y)?;
        let problem = ProblemDescriptor {
            operator: absolute_operator(desc, &base_of(&a.operator))?,
            measurement: meas.clone(),
            y: VectorSource::Path("y.txt".into()),
            gap: GapConfig::default(),
            l1: L1Config::default(),
            debias: true,
            zero_tol: DEFAULT_ZERO_TOL,
        };
        outputs.push(ctx.path("y.txt"));
        outputs.push(ctx.write_json("measurement.json", &meas)?);
        outputs.push(ctx.write_json("problem.json", &problem)?);
        config["measurement"] = to_value(&meas);
    }
    println!("signal: d = {}, cosparsity = {}", op.d(), sig.cosparsity);
    ctx.manifest("gen-signal", config, &outputs)
}

struct Loaded {
    problem: Option<ProblemDescriptor>,
    m: MeasurementSystem,
    omega: AnalysisOperator,
    y: DVector<f64>,
    config: Value,
}

fn load_problem(input: &ProblemInput) -> CliResult<Loaded> {
    if let Some(path) = &input.problem {
        let pd = ProblemDescriptor::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let (m, omega, y) = pd.build(&base_of(path))?;
        let config = json!({ "problem": path, "problem_descriptor": pd });
        return Ok(Loaded { problem: Some(pd), m, omega, y, config });
    }
    let need = |o: &Option<PathBuf>, flag: &str| o.clone().ok_or_else(|| usage(format!("missing {flag}")));
    let (op_path, m_path, y_path) =
        (need(&input.operator, "--operator")?, need(&input.measurement, "--measurement")?, need(&input.y, "--y")?);
    let (od, omega) = load_operator(&op_path)?;
    let (md, m) = load_measurement(&m_path)?;
    let y = read_vector(&y_path)?;
    let config = json!({ "operator": od, "measurement": md, "y": y_path });
    Ok(Loaded { problem: None, m, omega, y, config })
}

fn write_recovery(
    ctx: &Context,
    alg: Algorithm,
    l: &Loaded,
    r: &RecoveryResult,
) -> CliResult<Vec<PathBuf>> {
    let x_path = ctx.path("x_hat.txt");
    write_vector(&x_path, &r.x_hat)?;
    let resid = (l.m.apply(&r.x_hat)? - &l.y).norm() / l.y.norm().max(f64::MIN_POSITIVE);
    let summary = ResultSummary::new(alg, "x_hat.txt".into(), r, resid);
    let res_path = ctx.write_json("result.json", &summary)?;
    println!(
        "status {}, iterations {}, cosparsity {}, relative residual {:.3e}",
        r.status.as_str(),
        r.iterations,
        r.estimated_cosupport.len(),
        resid
    );
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(vec![x_path, res_path])
}

fn solve_gap(a: &GapArgs, ctx: &Context) -> CliResult<()> {
    let l = load_problem(&a.input)?;
    let mut cfg = l.problem.as_ref().map(|p| p.gap.clone()).unwrap_or_default();
    if a.matrix_free {
        cfg = GapConfig { matrix_free: true, ..cfg };
    }
    if let Some(t) = a.t {
        cfg.selection_factor = t;
    }
    if let Some(lam) = a.lambda {
        cfg.lambda = Some(lam);
        cfg.ls_mode = LsMode::Regularized;
    }
    if a.target_cosparsity.is_some() {
        cfg.target_cosparsity = a.target_cosparsity;
    }
    if a.max_iter.is_some() {
        cfg.max_iterations = a.max_iter;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let r = gap_solve(&l.m, &l.y, &l.omega, &cfg)?;
    let mut outputs = write_recovery(ctx, Algorithm::Gap, &l, &r)?;
    let trace = ctx.path("trace.csv");
    write_trace_csv(&trace, &r.trace)?;
    outputs.push(trace);
    let mut config = l.config.clone();
    config["gap"] = to_value(&cfg);
    ctx.manifest("solve gap", config, &outputs)
}

fn solve_l1(a: &L1Args, ctx: &Context) -> CliResult<()> {
    let l = load_problem(&a.input)?;
    let mut cfg = l.problem.as_ref().map(|p| p.l1.clone()).unwrap_or_default();
    let (do_debias, zero_tol) = l.problem.as_ref().map(|p| (p.debias, p.zero_tol)).unwrap_or((true, DEFAULT_ZERO_TOL));
    let do_debias = do_debias && !a.no_debias;
    if let Some(t) = a.tol {
        cfg.tol = t;
    }
    if let Some(k) = a.max_iter {
        cfg.max_iter = k;
    }
    cfg.matrix_free |= a.matrix_free || l.m.dense().is_none();
    let out = analysis_l1_solve_with(&l.m, &l.y, &l.omega, &cfg)?;
    let mut r = if do_debias {
        debias(&out.x, &l.omega, &l.m, &l.y, zero_tol)?
    } else {
        RecoveryResult {
            estimated_cosupport: cosupport_of(&l.omega, &out.x, zero_tol)?,
            x_hat: out.x.clone(),
            iterations: 0,
            status: crate::solvers::RecoveryStatus::Converged,
            trace: Vec::new(),
            indeterminate: false,
            warnings: Vec::new(),
        }
    };
    r.iterations = out.iterations;
    if !out.converged {
        r.status = crate::solvers::RecoveryStatus::MaxIter;
        r.warnings.push(format!("l1 iteration stopped at the cap of {}", cfg.max_iter));
    }
    let outputs = write_recovery(ctx, Algorithm::L1, &l, &r)?;
    let mut config = l.config.clone();
    config["l1"] = to_value(&cfg);
    config["debias"] = json!(do_debias);
    config["zero_tol"] = json!(zero_tol);
    ctx.manifest("solve l1", config, &outputs)
}

fn cosupport_from(
    omega: &AnalysisOperator,
    cos: &Option<PathBuf>,
    x0: Option<&DVector<f64>>,
    zero_tol: f64,
) -> CliResult<Cosupport> {
    match (cos, x0) {
        (Some(p), _) => read_indices(p, omega.p()),
        (None, Some(x)) => Ok(cosupport_of(omega, x, zero_tol)?),
        (None, None) => Err(usage("need --cosupport or --x0")),
    }
}

fn certify(c: &CertifyCommand, ctx: &Context) -> CliResult<()> {
    let (name, cert, config): (&str, Certificate, Value) = match c {
        CertifyCommand::Erc(a) | CertifyCommand::Heuristic(a) => {
            let (od, omega) = load_operator(&a.operator)?;
            let (md, m) = load_measurement(&a.measurement)?;
            let x0 = a.x0.as_deref().map(read_vector).transpose()?;
            let cos = cosupport_from(&omega, &a.cosupport, x0.as_ref(), a.zero_tol)?;
            let (name, cert) = if matches!(c, CertifyCommand::Erc(_)) {
                ("certify erc", erc_analysis(&omega, &cos, &m)?)
            } else {
                ("certify heuristic", heuristic_row_l2(&omega, &cos, &m)?)
            };
            (name, cert, json!({ "operator": od, "measurement": md, "cosparsity": cos.len() }))
        }
        CertifyCommand::Nsc(a) => {
            let (od, omega) = load_operator(&a.cert.operator)?;
            let (md, m) = load_measurement(&a.cert.measurement)?;
            let x0 = a.cert.x0.as_deref().map(read_vector).transpose()?;
            let cos = cosupport_from(&omega, &a.cert.cosupport, x0.as_ref(), a.cert.zero_tol)?;
            let seed = derive_seed(ctx.seed.0, &[3]);
            let cert = nsc_sampled(&omega, &cos, &m, a.samples, seed)?;
            let config = json!({ "operator": od, "measurement": md, "cosparsity": cos.len(),
                                 "samples": a.samples, "sample_seed": seed });
            ("certify nsc", cert, config)
        }
        CertifyCommand::GapRelation(a) => {
            let (od, omega) = load_operator(&a.operator)?;
            let (md, m) = load_measurement(&a.measurement)?;
            let x0 = read_vector(&a.x0)?;
            let cos = cosupport_from(&omega, &a.cosupport, Some(&x0), a.zero_tol)?;
            let y = match &a.y {
                Some(p) => read_vector(p)?,
                None => m.apply(&x0)?,
            };
            let cert = gap_relation_residual(&omega, &cos, &m, &y, &x0)?;
            ("certify gap-relation", cert, json!({ "operator": od, "measurement": md, "cosparsity": cos.len() }))
        }
    };
    let path = ctx.write_json("certificate.json", &cert)?;
    let holds = match cert.holds {
        Some(true) => "holds",
        Some(false) => "fails",
        None => "inconclusive",
    };
    println!(
        "{:?}: value {} threshold {} ({holds}{})",
        cert.kind,
        fmt_value(cert.value),
        cert.threshold.map(|t| t.to_string()).unwrap_or_else(|| "none".into()),
        if cert.exact { "" } else { ", sampled" }
    );
    ctx.manifest(name, config, &[path])
}

fn fmt_value(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else {
        format!("{v:.6}")
    }
}

fn kappa(k: &KappaCommand, ctx: &Context) -> CliResult<()> {
    let (name, report) = match k {
        KappaCommand::Exact(a) => {
            let v = kappa_general_position(a.d, a.l);
            println!("kappa({}) = {v} (general position, d = {})", a.l, a.d);
            ("kappa exact", json!({ "model": "general_position", "d": a.d, "l": a.l, "kappa": v }))
        }
        KappaCommand::Bounds(a) => {
            let d = a.n * a.n;
            let b = kappa_dif_bounds(d, a.l)?;
            let (lo, hi) = KappaValue::from(b).integer_range();
            let v = uniqueness_verdict(b.into(), 0);
            match b.lower {
                Some(l) => println!("formula bounds: {l:.4} <= kappa <= {:.4}", b.upper),
                None => println!("formula bounds: kappa <= {:.4} (lower bound needs l >= 5)", b.upper),
            }
            println!("integer interval: [{lo}, {hi}]");
            println!(
                "sufficient m: known cosupport [{}, {}], unknown cosupport [{}, {}]",
                v.thresholds.known_min_m[0], v.thresholds.known_min_m[1],
                v.thresholds.unknown_min_m[0], v.thresholds.unknown_min_m[1]
            );
            let rep = json!({ "model": "dif2d", "n": a.n, "d": d, "l": a.l, "bounds": b,
                              "integer_interval": [lo, hi], "thresholds": v.thresholds });
            ("kappa bounds", rep)
        }
        KappaCommand::Brute(a) => {
            let (op, desc) = match (&a.operator, a.n) {
                (Some(p), _) => {
                    let (d, op) = load_operator(p)?;
                    (op, to_value(&d))
                }
                (None, Some(n)) => (finite_difference_2d(n)?, to_value(&OperatorDescriptor::Dif2d { n })),
                (None, None) => return Err(usage("need --operator or --dif --n")),
            };
            let v = kappa_brute_force(&op, a.l)?;
            println!("kappa({}) = {v} (exhaustive, p = {}, d = {})", a.l, op.p(), op.d());
            ("kappa brute", json!({ "operator": desc, "l": a.l, "kappa": v }))
        }
    };
    let path = ctx.write_json("kappa.json", &report)?;
    ctx.manifest(name, report, &[path])
}

fn unique(a: &UniqueArgs, ctx: &Context) -> CliResult<()> {
    let (kappa, model) = match (a.d, a.n) {
        (Some(d), _) => (KappaValue::Exact(kappa_general_position(d, a.l) as f64), json!({ "general_position": { "d": d } })),
        (None, Some(n)) => (kappa_dif_bounds(n * n, a.l)?.into(), json!({ "dif2d": { "n": n } })),
        (None, None) => return Err(usage("need --d or --dif --n")),
    };
    let v = uniqueness_verdict(kappa, a.m);
    println!(
        "m = {}: known cosupport {:?}, unknown cosupport {:?}",
        a.m, v.known_unique, v.unknown_unique
    );
    let path = ctx.write_json("verdict.json", &v)?;
    ctx.manifest("unique", json!({ "model": model, "l": a.l, "m": a.m }), &[path])
}

fn phase_diagram(a: &PhaseArgs, ctx: &Context) -> CliResult<()> {
    let algs: Vec<PhaseAlgorithm> = a.alg.iter().map(|&x| x.into()).collect();
    let mut cfg = match a.preset {
        Preset::Smoke => PhaseConfig::smoke(a.sigma, algs.clone(), ctx.seed.0),
        Preset::Full => PhaseConfig::full(a.sigma, algs.clone(), ctx.seed.0),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(d) = a.d {
        cfg.d = d;
    }
    let grid = run_phase_diagram(&cfg)?;
    let mut outputs = Vec::new();
    for alg in &algs {
        let p = ctx.path(&format!("phase_{}.csv", alg.name()));
        grid.write_csv(*alg, &p)?;
        outputs.push(p);
        println!("{} success rate (rows delta, columns rho):", alg.name());
        for i in 0..cfg.deltas.len() {
            let row: Vec<String> = (0..cfg.rhos.len())
                .map(|j| grid.rate(*alg, i, j).map(|r| format!("{r:4.2}")).unwrap_or_else(|| "  NA".into()))
                .collect();
            println!("  {:5.3} {}", cfg.deltas[i], row.join(" "));
        }
    }
    ctx.manifest("phase-diagram", json!({ "preset": a.preset, "phase": cfg }), &outputs)
}

fn phantom_config(n: usize, lines: usize, alg: PhantomAlg, variant: Variant, t: Option<f64>) -> CliResult<PhantomConfig> {
    let mut cfg = PhantomConfig::new(n, lines, alg.into());
    cfg.variant = variant.into();
    if let Some(t) = t {
        cfg.gap.selection_factor = t;
    }
    cfg.gap.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn phantom(a: &PhantomArgs, ctx: &Context) -> CliResult<()> {
    let cfg = phantom_config(a.n, a.lines, a.alg, a.variant, a.t)?;
    let r = run_phantom_recovery(&cfg)?;
    let mut outputs = r.write_outputs(&ctx.out)?;
    let summary = json!({
        "n": r.n, "lines": r.lines, "m": r.m, "algorithm": r.algorithm,
        "snr_db": r.snr_db, "exact": r.exact, "relative_error": r.relative_error,
        "status": r.status, "iterations": r.iterations, "missed_edges": r.missed_count(),
        "warnings": r.warnings,
    });
    outputs.push(ctx.write_json("summary.json", &summary)?);
    println!(
        "N = {}, L = {}, m = {}: SNR {:.2} dB{}, relative error {:.3e}, status {}",
        r.n, r.lines, r.m, r.snr_db, if r.exact { " (exact)" } else { "" }, r.relative_error, r.status
    );
    ctx.manifest("phantom", to_value(&cfg), &outputs)
}

fn snr_sweep(a: &SnrArgs, ctx: &Context) -> CliResult<()> {
    let base = phantom_config(a.n, 1, PhantomAlg::Gap, a.variant, None)?;
    let algs: Vec<PhantomAlgorithm> = a.alg.iter().map(|&x| x.into()).collect();
    let rows = run_snr_vs_lines(a.n, &a.lines, &algs, &base);
    let csv = snr_rows_to_csv(&rows);
    let p = ctx.path("snr.csv");
    fs::write(&p, &csv)?;
    print!("{csv}");
    let config = json!({ "n": a.n, "lines": a.lines, "algorithms": algs, "base": base });
    ctx.manifest("snr-sweep", config, &[p])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some("9")).unwrap(), (3, SeedSource::Flag));
        assert_eq!(resolve_seed(None, Some(" 9 ")).unwrap(), (9, SeedSource::Env));
        assert_eq!(resolve_seed(None, None).unwrap(), (DEFAULT_SEED, SeedSource::Default));
        assert_eq!(resolve_seed(None, Some("x")).unwrap_err().exit_code(), EXIT_USAGE);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["cosparse", "--help"]), EXIT_OK);
        assert_eq!(run(["cosparse", "kappa", "bounds", "--help"]), EXIT_OK);
        assert_eq!(run(["cosparse", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["cosparse", "solve", "gap", "--operator", "a.json", "--measurement", "b.json"]), EXIT_USAGE);
        assert_eq!(CliError::Lib(Error::Numerical("x".into())).exit_code(), EXIT_NUMERICAL);
    }
}
