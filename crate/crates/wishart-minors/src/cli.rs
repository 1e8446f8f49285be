//! Command-line interface.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use wishart_minors_core::gpi::{self, CorrelationModel, SearchConfig, SearchKind, TrialRecord, DEFAULT_NU_GRID};
use wishart_minors_core::moments::{check_block_diagonal, disjoint_moment_block_diag_log, embedded_moment_log};
use wishart_minors_core::montecarlo::{compare, estimate_disjoint, estimate_embedded};
use wishart_minors_core::rng::ChunkPlan;
use wishart_minors_core::specfun::log_multigamma_ratio;
use wishart_minors_core::wishart::{sample_chunk, Sampler};
use wishart_minors_core::{
    BlockPartition, Error, Executor, McEstimate, Method, MomentQuery, Regime, SpdMatrix, SymMatrix, Verdict,
    WishartParams,
};

use crate::error::CliError;
use crate::exec::{default_workers, ThreadPool};
use crate::io::{read_spd_matrix, write_sample_rows, SAMPLE_HEADER};

pub const TOOL: &str = "wishart-minors";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_INCONSISTENT: i32 = 3;

const EXIT_CODES: &str = "\
Exit codes:
  0  success (verify: estimate consistent with the exact value)
  1  I/O or parse error, including invalid command-line usage
  2  domain error (invalid parameters, matrix not positive definite, ...)
  3  verify: estimate inconsistent with the exact value";

/// Exact moments of Wishart principal minors, Monte Carlo checks and
/// product-inequality searches.
#[derive(Debug, Parser)]
#[command(name = TOOL, version, after_help = EXIT_CODES)]
pub struct Cli {
    /// Master random seed
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads [default: available parallelism]
    #[arg(long, global = true, value_parser = parse_workers)]
    pub workers: Option<usize>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Output path [default: stdout]; required by `sample`
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact joint moment of nested leading principal minors
    Exact(ExactArgs),
    /// Compare the exact moment with a Monte Carlo estimate
    Verify(VerifyArgs),
    /// Write Wishart draws as CSV
    Sample(SampleArgs),
    /// Search for violations of the product inequality
    Gpi(GpiArgs),
}

#[derive(Debug, Args)]
pub struct MomentArgs {
    /// Degrees of freedom
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,

    /// Scale matrix as CSV, one row per line
    #[arg(long)]
    pub sigma: PathBuf,

    /// Block sizes p1,...,pd
    #[arg(long, value_delimiter = ',', required = true)]
    pub partition: Vec<usize>,

    /// Exponents nu1,...,nud
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub nu: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub moment: MomentArgs,

    /// Moment of the disjoint diagonal blocks instead; the scale matrix must
    /// be block-diagonal
    #[arg(long)]
    pub disjoint_blockdiag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Nested leading minors
    Embedded,
    /// Disjoint diagonal blocks
    Disjoint,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub moment: MomentArgs,

    /// Monte Carlo sample size
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,

    #[arg(long, value_enum, default_value_t = Mode::Embedded)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bartlett,
    GaussianSum,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Degrees of freedom
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,

    /// Scale matrix as CSV, one row per line
    #[arg(long)]
    pub sigma: PathBuf,

    /// Number of draws
    #[arg(long)]
    pub count: usize,

    #[arg(long, value_enum, default_value_t = MethodArg::Bartlett)]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Wishart,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CorrelationArg {
    Random,
    BlockDiagonal,
    Equicorrelation,
}

#[derive(Debug, Args)]
pub struct GpiArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Wishart)]
    pub kind: KindArg,

    /// Number of blocks: `d` or `lo..hi`
    #[arg(long, value_parser = parse_usize_range, default_value = "2..3")]
    pub dims: (usize, usize),

    /// Block size (Wishart): `p` or `lo..hi`
    #[arg(long, value_parser = parse_usize_range, default_value = "1")]
    pub block_sizes: (usize, usize),

    /// Degrees of freedom range `lo,hi` (Wishart) [default: p-0.5,p+5 for the
    /// largest reachable p]
    #[arg(long, value_parser = parse_f64_pair)]
    pub alpha_range: Option<(f64, f64)>,

    /// Exponent grid; each exponent is drawn from it
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub nu_grid: Vec<f64>,

    /// Equicorrelation grid, cycled by trial index
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho_grid: Vec<f64>,

    /// Correlation model [default: equicorrelation with --rho-grid, otherwise
    /// random]
    #[arg(long, value_enum)]
    pub correlation: Option<CorrelationArg>,

    #[arg(long, default_value_t = 100)]
    pub trials: usize,

    /// Monte Carlo samples per trial
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,

    /// Run only this trial of the configured search
    #[arg(long)]
    pub replay_trial: Option<usize>,
}

fn parse_workers(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_usize_range(s: &str) -> Result<(usize, usize), String> {
    let one = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    match s.split_once("..") {
        Some((lo, hi)) => Ok((one(lo)?, one(hi.trim_start_matches('='))?)),
        None => {
            let v = one(s)?;
            Ok((v, v))
        }
    }
}

fn parse_f64_pair(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').or_else(|| s.split_once("..")).ok_or("expected `lo,hi`")?;
    let one = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((one(lo)?, one(hi)?))
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_IO } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let pool = ThreadPool::new(cli.workers.unwrap_or_else(default_workers));
    match &cli.command {
        Command::Exact(args) => cmd_exact(cli, args),
        Command::Verify(args) => cmd_verify(cli, args, &pool),
        Command::Sample(args) => cmd_sample(cli, args, &pool),
        Command::Gpi(args) => cmd_gpi(cli, args, &pool),
    }
}

/// JSON number, or `"inf"`, `"-inf"`, `"nan"` for non-finite values.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn matrix_json(m: &SymMatrix) -> Value {
    Value::Array((0..m.dim()).map(|i| Value::Array(m.row(i).iter().map(|&v| num(v)).collect())).collect())
}

fn workers(cli: &Cli) -> usize {
    cli.workers.unwrap_or_else(default_workers)
}

/// The fields every artifact starts with.
fn envelope(cli: &Cli, command: &str, config: Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("tool".into(), json!(TOOL));
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), config);
    m.insert("seed".into(), json!(cli.seed));
    m.insert("workers".into(), json!(workers(cli)));
    m
}

fn open_output(cli: &Cli) -> Result<Box<dyn Write>, CliError> {
    match &cli.out {
        Some(path) => {
            let f = File::create(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

/// Flattens nested objects and arrays into `(dotted.key, scalar)` pairs.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Null => out.push((prefix.to_string(), String::new())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn write_record(cli: &Cli, record: &Map<String, Value>) -> Result<(), CliError> {
    let mut w = open_output(cli)?;
    let value = Value::Object(record.clone());
    match cli.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &value).map_err(io::Error::from)?;
            writeln!(w)?;
        }
        Format::Csv | Format::Table => {
            let mut pairs = Vec::new();
            flatten("", &value, &mut pairs);
            if cli.format == Format::Csv {
                let mut csv = csv::Writer::from_writer(&mut w);
                csv.write_record(["field", "value"]).map_err(csv_err)?;
                for (k, v) in &pairs {
                    csv.write_record([k, v]).map_err(csv_err)?;
                }
                csv.flush()?;
            } else {
                let width = pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                for (k, v) in &pairs {
                    writeln!(w, "{k:<width$}  {v}")?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Output(e.into())
}

struct MomentInput {
    sigma: SpdMatrix,
    query: MomentQuery,
    config: Map<String, Value>,
}

fn load_moment(args: &MomentArgs) -> Result<MomentInput, CliError> {
    let sigma = read_spd_matrix(&args.sigma)?;
    let query = MomentQuery::new(BlockPartition::new(args.partition.clone())?, args.nu.clone())?;
    if query.partition().total() != sigma.dim() {
        return Err(Error::DimensionMismatch { expected: sigma.dim(), found: query.partition().total() }.into());
    }
    let mut config = Map::new();
    config.insert("alpha".into(), num(args.alpha));
    config.insert("sigma_path".into(), json!(args.sigma.display().to_string()));
    config.insert("sigma".into(), matrix_json(sigma.matrix()));
    config.insert("partition".into(), json!(args.partition));
    config.insert("nu".into(), Value::Array(args.nu.iter().map(|&v| num(v)).collect()));
    Ok(MomentInput { sigma, query, config })
}

fn value_or_inf(log_value: f64) -> Value {
    num(log_value.exp())
}

fn factor_json(block: usize, size: usize, nu: f64, log_det_term: f64, log_gamma_term: f64) -> Value {
    json!({
        "block": block,
        "size": size,
        "nu": num(nu),
        "log_det_term": num(log_det_term),
        "log_gamma_term": num(log_gamma_term),
    })
}

fn cmd_exact(cli: &Cli, args: &ExactArgs) -> Result<i32, CliError> {
    let alpha = args.moment.alpha;
    let MomentInput { sigma, query, mut config } = load_moment(&args.moment)?;
    let partition = query.partition();
    let (log_value, factors, formula) = if args.disjoint_blockdiag {
        let log_value = disjoint_moment_block_diag_log(alpha, &sigma, &query)?;
        let factors = (0..partition.len())
            .map(|i| {
                let size = partition.sizes()[i];
                let nu = query.nu()[i];
                let block = SpdMatrix::new(sigma.matrix().principal(partition.block_range(i)))?;
                let det = if nu == 0.0 { 0.0 } else { nu * (size as f64 * std::f64::consts::LN_2 + block.log_det()) };
                let gamma = log_multigamma_ratio(size, alpha / 2.0, nu)?;
                Ok(factor_json(i, size, nu, det, gamma))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        (log_value, factors, "disjoint-blockdiag")
    } else {
        let exact = embedded_moment_log(alpha, &sigma, &query)?;
        let factors = exact
            .factors
            .iter()
            .map(|f| {
                factor_json(f.block, partition.sizes()[f.block], query.nu()[f.block], f.log_det_term, f.log_gamma_term)
            })
            .collect();
        (exact.log_value, factors, "embedded")
    };
    config.insert("formula".into(), json!(formula));
    let mut record = envelope(cli, "exact", Value::Object(config));
    record.insert("log_value".into(), num(log_value));
    record.insert("value_or_inf".into(), value_or_inf(log_value));
    record.insert("factors".into(), Value::Array(factors));
    write_record(cli, &record)?;
    Ok(EXIT_OK)
}

fn mc_json(record: &mut Map<String, Value>, mc: &McEstimate) {
    record.insert("n".into(), json!(mc.n));
    record.insert("chunks".into(), json!(mc.chunks));
    record.insert("mean_log".into(), num(mc.mean_log));
    record.insert("mean".into(), num(mc.mean));
    record.insert("stderr".into(), num(mc.stderr));
    record.insert("stderr_log".into(), num(mc.stderr_log));
    record.insert("max_share_log".into(), num(mc.max_share_log()));
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs, pool: &ThreadPool) -> Result<i32, CliError> {
    let alpha = args.moment.alpha;
    let MomentInput { sigma, query, mut config } = load_moment(&args.moment)?;
    config.insert("mode".into(), json!(args.mode.to_possible_value().unwrap().get_name()));
    config.insert("samples".into(), json!(args.samples));
    let params = WishartParams::new(alpha, sigma.clone())?;
    let (exact_log, mc) = match args.mode {
        Mode::Embedded => {
            let exact = embedded_moment_log(alpha, &sigma, &query)?;
            (Some(exact.log_value), estimate_embedded(&params, &query, args.samples, cli.seed, pool)?)
        }
        Mode::Disjoint => {
            let exact = match check_block_diagonal(sigma.matrix(), query.partition()) {
                Ok(()) => Some(disjoint_moment_block_diag_log(alpha, &sigma, &query)?),
                Err(Error::NotBlockDiagonal { row, col, value }) => {
                    eprintln!(
                        "note: no closed form for disjoint blocks of a scale matrix that is not block-diagonal \
                         (entry ({row}, {col}) = {value}); reporting the Monte Carlo estimate only"
                    );
                    None
                }
                Err(e) => return Err(e.into()),
            };
            (exact, estimate_disjoint(&params, &query, args.samples, cli.seed, pool)?)
        }
    };

    let mut record = envelope(cli, "verify", Value::Object(config));
    mc_json(&mut record, &mc);
    let mut flags = Vec::new();
    if mc.is_unreliable() {
        flags.push("unreliable");
    }
    let (z, verdict) = match exact_log {
        Some(exact) => match compare(exact, &mc) {
            Ok(report) => (num(report.z), Some(report.verdict)),
            Err(Error::DegenerateEstimate) => {
                flags.push("degenerate");
                (num(f64::INFINITY), Some(Verdict::Inconsistent))
            }
            Err(e) => return Err(e.into()),
        },
        None => {
            flags.push("mc_only");
            (Value::Null, None)
        }
    };
    record.insert("exact_log".into(), exact_log.map_or(Value::Null, num));
    record.insert("exact_value_or_inf".into(), exact_log.map_or(Value::Null, value_or_inf));
    record.insert("z".into(), z);
    record.insert("verdict".into(), verdict.map_or(Value::Null, |v| json!(v.as_str())));
    record.insert("flags".into(), json!(flags));
    record.insert("worker_count".into(), json!(workers(cli)));
    write_record(cli, &record)?;
    Ok(if verdict == Some(Verdict::Inconsistent) { EXIT_INCONSISTENT } else { EXIT_OK })
}

fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn cmd_sample(cli: &Cli, args: &SampleArgs, pool: &ThreadPool) -> Result<i32, CliError> {
    let out = cli.out.as_ref().ok_or_else(|| CliError::Usage("sample requires --out <path>".into()))?;
    let sigma = read_spd_matrix(&args.sigma)?;
    let params = WishartParams::new(args.alpha, sigma)?;
    let method = match args.method {
        MethodArg::Bartlett => Method::Bartlett,
        MethodArg::GaussianSum => Method::GaussianSum,
    };
    let sampler = Sampler::new(&params, method)?;

    let file = File::create(out).map_err(|source| CliError::Io { path: out.clone(), source })?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{SAMPLE_HEADER}")?;
    let plan = ChunkPlan::new(args.count);
    let group = pool.workers().max(1);
    let mut chunk = 0;
    while chunk < plan.chunks() {
        let len = group.min(plan.chunks() - chunk);
        for (k, draws) in pool.map(len, |k| sample_chunk(&sampler, &plan, chunk + k, cli.seed)).into_iter().enumerate()
        {
            let first = plan.range(chunk + k).start;
            for (offset, draw) in draws.iter().enumerate() {
                write_sample_rows(first + offset, &draw.matrix, &mut w)?;
            }
        }
        chunk += len;
    }
    w.flush()?;

    let regime = match params.regime() {
        Regime::Nonsingular => "nonsingular",
        Regime::SingularInteger => "singular-integer",
    };
    let config = json!({
        "alpha": num(args.alpha),
        "sigma_path": args.sigma.display().to_string(),
        "sigma": matrix_json(params.sigma().matrix()),
        "count": args.count,
        "method": args.method.to_possible_value().unwrap().get_name(),
        "regime": regime,
        "out": out.display().to_string(),
    });
    let mut meta = envelope(cli, "sample", config);
    meta.insert("columns".into(), json!(SAMPLE_HEADER.split(',').collect::<Vec<_>>()));
    meta.insert("chunks".into(), json!(plan.chunks()));
    let path = meta_path(out);
    let f = File::create(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, &Value::Object(meta)).map_err(io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(EXIT_OK)
}

fn search_config(cli: &Cli, args: &GpiArgs) -> SearchConfig {
    let kind = match args.kind {
        KindArg::Wishart => SearchKind::Wishart,
        KindArg::Gaussian => SearchKind::Gaussian,
    };
    let correlation = match args.correlation {
        Some(CorrelationArg::Random) => CorrelationModel::Random,
        Some(CorrelationArg::BlockDiagonal) => CorrelationModel::BlockDiagonal,
        Some(CorrelationArg::Equicorrelation) => CorrelationModel::Equicorrelation(args.rho_grid.clone()),
        None if !args.rho_grid.is_empty() => CorrelationModel::Equicorrelation(args.rho_grid.clone()),
        None => CorrelationModel::Random,
    };
    let max_p = args.dims.1 * args.block_sizes.1;
    let alpha_range = args.alpha_range.unwrap_or((max_p as f64 - 0.5, max_p as f64 + 5.0));
    SearchConfig {
        kind,
        dims: args.dims,
        block_sizes: args.block_sizes,
        alpha_range,
        nu_grid: if args.nu_grid.is_empty() { DEFAULT_NU_GRID.to_vec() } else { args.nu_grid.clone() },
        correlation,
        trials: args.trials,
        samples: args.samples,
        seed: cli.seed,
    }
}

fn search_config_json(c: &SearchConfig, replay: Option<usize>) -> Value {
    let (correlation, rho_grid) = match &c.correlation {
        CorrelationModel::Random => ("random", Value::Null),
        CorrelationModel::BlockDiagonal => ("block-diagonal", Value::Null),
        CorrelationModel::Equicorrelation(g) => ("equicorrelation", Value::Array(g.iter().map(|&v| num(v)).collect())),
    };
    let wishart = c.kind == SearchKind::Wishart;
    json!({
        "kind": if wishart { "wishart" } else { "gaussian" },
        "dims": [c.dims.0, c.dims.1],
        "block_sizes": if wishart { json!([c.block_sizes.0, c.block_sizes.1]) } else { Value::Null },
        "alpha_range": if wishart { json!([num(c.alpha_range.0), num(c.alpha_range.1)]) } else { Value::Null },
        "nu_grid": c.nu_grid.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "correlation": correlation,
        "rho_grid": rho_grid,
        "trials": c.trials,
        "samples": c.samples,
        "replay_trial": replay,
    })
}

fn pass_json(p: &gpi::Pass) -> Value {
    let r = &p.result;
    json!({
        "seed": p.seed,
        "samples": p.samples,
        "ratio": num(r.ratio),
        "ratio_log": num(r.ratio_log),
        "ratio_stderr": num(r.ratio_stderr),
        "violation_z": num(r.violation_z),
        "verdict": r.verdict.as_str(),
        "numerator_log": num(r.numerator.mean_log),
        "numerator_stderr_log": num(r.numerator.stderr_log),
        "denominator_log": num(r.denominator_log),
        "unreliable": r.numerator.is_unreliable(),
    })
}

fn trial_json(cli: &Cli, config: &SearchConfig, config_json: &Value, rank: Option<usize>, t: &TrialRecord) -> Value {
    let inst = &t.first.result.instance;
    let (alpha, partition) = match &inst.kind {
        gpi::GpiKind::Wishart { params, query } => (num(params.alpha()), json!(query.partition().sizes())),
        gpi::GpiKind::Gaussian { nu, .. } => (Value::Null, json!(vec![1; nu.len()])),
    };
    let reported = t.reported();
    let mut flags = Vec::new();
    if t.escalated.is_some() {
        flags.push("escalated");
    }
    if reported.result.numerator.is_unreliable() {
        flags.push("unreliable");
    }
    let mut m = envelope(cli, "gpi", config_json.clone());
    m.insert("rank".into(), json!(rank));
    m.insert("trial".into(), json!(t.trial));
    m.insert("instance_seed".into(), json!(t.instance_seed));
    m.insert(
        "instance".into(),
        json!({
            "label": inst.label,
            "alpha": alpha,
            "partition": partition,
            "nu": inst.nu().iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "matrix": matrix_json(inst.matrix().matrix()),
            "rho": t.rho.map_or(Value::Null, num),
        }),
    );
    m.insert("first".into(), pass_json(&t.first));
    m.insert("escalated".into(), t.escalated.as_ref().map_or(Value::Null, pass_json));
    m.insert("ratio".into(), num(reported.result.ratio));
    m.insert("ratio_stderr".into(), num(reported.result.ratio_stderr));
    m.insert("violation_z".into(), num(reported.result.violation_z));
    m.insert("verdict".into(), json!(reported.result.verdict.as_str()));
    m.insert("flags".into(), json!(flags));
    m.insert("replay".into(), json!(replay_args(config, t.trial)));
    Value::Object(m)
}

/// Command line that re-runs one trial.
fn replay_args(c: &SearchConfig, trial: usize) -> String {
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let mut s = format!(
        "gpi --seed {} --kind {} --dims {}..{} --nu-grid {} --trials {} --samples {}",
        c.seed,
        if c.kind == SearchKind::Wishart { "wishart" } else { "gaussian" },
        c.dims.0,
        c.dims.1,
        list(&c.nu_grid),
        c.trials,
        c.samples,
    );
    if c.kind == SearchKind::Wishart {
        s += &format!(
            " --block-sizes {}..{} --alpha-range {},{}",
            c.block_sizes.0, c.block_sizes.1, c.alpha_range.0, c.alpha_range.1
        );
    }
    match &c.correlation {
        CorrelationModel::Random => s += " --correlation random",
        CorrelationModel::BlockDiagonal => s += " --correlation block-diagonal",
        CorrelationModel::Equicorrelation(g) => s += &format!(" --correlation equicorrelation --rho-grid {}", list(g)),
    }
    s + &format!(" --replay-trial {trial}")
}

fn summary_table<W: Write>(trials: &[(Option<usize>, &TrialRecord)], mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "{:>5} {:>6} {:>3} {:>8} {:>22} {:>12} {:>12} {:>9} {:<13} escalated",
        "rank", "trial", "d", "alpha", "nu", "ratio", "stderr", "z", "verdict"
    )?;
    let mut counts = [0usize; 3];
    for (rank, t) in trials {
        let r = &t.reported().result;
        let alpha = match &r.instance.kind {
            gpi::GpiKind::Wishart { params, .. } => format!("{:.4}", params.alpha()),
            gpi::GpiKind::Gaussian { .. } => "-".into(),
        };
        let nu = r.instance.nu().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        counts[r.verdict as usize] += 1;
        writeln!(
            w,
            "{:>5} {:>6} {:>3} {:>8} {:>22} {:>12.6} {:>12.3e} {:>9.3} {:<13} {}",
            rank.map_or("-".into(), |r| r.to_string()),
            t.trial,
            r.instance.nu().len(),
            alpha,
            nu,
            r.ratio,
            r.ratio_stderr,
            r.violation_z,
            r.verdict.as_str(),
            if t.escalated.is_some() { "yes" } else { "no" },
        )?;
    }
    writeln!(
        w,
        "trials: {}  consistent: {}  suspicious: {}  inconsistent: {}",
        trials.len(),
        counts[Verdict::Consistent as usize],
        counts[Verdict::Suspicious as usize],
        counts[Verdict::Inconsistent as usize],
    )
}

const CSV_COLUMNS: [&str; 16] = [
    "rank",
    "trial",
    "instance_seed",
    "alpha",
    "partition",
    "nu",
    "rho",
    "ratio",
    "ratio_stderr",
    "violation_z",
    "verdict",
    "pass_seed",
    "pass_samples",
    "escalated",
    "seed",
    "workers",
];

fn trial_csv(cli: &Cli, rank: &Option<usize>, t: &TrialRecord) -> Vec<String> {
    let p = t.reported();
    let r = &p.result;
    let join = |v: Vec<String>| v.join(";");
    let (alpha, partition) = match &r.instance.kind {
        gpi::GpiKind::Wishart { params, query } => {
            (params.alpha().to_string(), join(query.partition().sizes().iter().map(|s| s.to_string()).collect()))
        }
        gpi::GpiKind::Gaussian { nu, .. } => (String::new(), join(vec!["1".to_string(); nu.len()])),
    };
    vec![
        rank.map_or(String::new(), |r| r.to_string()),
        t.trial.to_string(),
        t.instance_seed.to_string(),
        alpha,
        partition,
        join(r.instance.nu().iter().map(|v| v.to_string()).collect()),
        t.rho.map_or(String::new(), |v| v.to_string()),
        r.ratio.to_string(),
        r.ratio_stderr.to_string(),
        r.violation_z.to_string(),
        r.verdict.as_str().to_string(),
        p.seed.to_string(),
        p.samples.to_string(),
        t.escalated.is_some().to_string(),
        cli.seed.to_string(),
        workers(cli).to_string(),
    ]
}

fn cmd_gpi(cli: &Cli, args: &GpiArgs, pool: &ThreadPool) -> Result<i32, CliError> {
    let config = search_config(cli, args);
    config.validate()?;
    let records = match args.replay_trial {
        Some(t) => vec![(None, gpi::run_trial(&config, t, pool)?)],
        None => gpi::search(&config, pool)?.trials.into_iter().enumerate().map(|(i, t)| (Some(i + 1), t)).collect(),
    };
    let config_json = search_config_json(&config, args.replay_trial);
    let rows: Vec<(Option<usize>, &TrialRecord)> = records.iter().map(|(r, t)| (*r, t)).collect();
    let mut w = open_output(cli)?;
    match cli.format {
        Format::Json => {
            for (rank, t) in &rows {
                serde_json::to_writer(&mut w, &trial_json(cli, &config, &config_json, *rank, t))
                    .map_err(io::Error::from)?;
                writeln!(w)?;
            }
            summary_table(&rows, io::stderr().lock())?;
        }
        Format::Table => summary_table(&rows, &mut w)?,
        Format::Csv => {
            let mut csv = csv::Writer::from_writer(&mut w);
            csv.write_record(CSV_COLUMNS).map_err(csv_err)?;
            for (rank, t) in &rows {
                csv.write_record(trial_csv(cli, rank, t)).map_err(csv_err)?;
            }
            csv.flush()?;
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}
