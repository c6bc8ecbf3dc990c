//! Command-line front end. Every subcommand writes a single CSV or JSON
//! document to `--out` (or stdout) and echoes its effective configuration
//! to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::experiments::{divergence_table, negspace_experiment, toy_figure, NegspaceSpec, TableSpec};
use crate::format::{csv_num, csv_writer};
use crate::optimizers::{escape_time, run_accelerated, IterationTrace, PreviousPoint, TraceColumns};
use crate::problems::{random_problem, toy_problem, ProblemFile, Projector, QuadraticProblem};
use crate::rates::{b_limit, b_sequence, product_series, rate_report};
use crate::rng;
use crate::schedules::{verify_tk_properties, MomentumSchedule};
use crate::spectral::{block_eigenvalues, classify_saddle_map, BlockRecord};

/// Exit code for a usage error or an I/O failure.
pub const EXIT_USAGE: i32 = 1;
/// Exit code when a verification command finds a violated property.
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "accel-saddle", version, about = "Momentum methods near strict saddle points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Steepest descent and heavy-ball trajectories on f(x) = ½x₁² − ½δx₂².
    Toy(ToyArgs),
    /// Eigenvalues of the heavy-ball Jacobian at a saddle.
    Spectrum(SpectrumArgs),
    /// Divergence-rate sequence b_k and its limit for one eigenvalue.
    Rates(RatesArgs),
    /// Run the accelerated framework on a quadratic.
    Simulate(SimulateArgs),
    /// Iterations to leave the saddle region, averaged over random problems.
    Table(TableArgs),
    /// Check the Nesterov t_k sequence properties.
    VerifyTk(VerifyTkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct Output {
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Shorthand for --format json.
    #[arg(long, conflicts_with = "format")]
    #[serde(skip)]
    pub json: bool,
}

impl Output {
    fn resolved(&self, default: Format) -> Format {
        if self.json {
            Format::Json
        } else {
            self.format.unwrap_or(default)
        }
    }
}

/// Parsed `--schedule` value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScheduleSpec {
    Nesterov,
    Attouch { eta: f64 },
    Constant { beta: f64, gamma: f64 },
    Polyak { m: f64, l: f64 },
    /// `β = 1 − αδ − γ̂`, `γ = 0`, filled in from --alpha, --delta and --gamma.
    Toy,
}

fn parse_schedule(s: &str) -> std::result::Result<ScheduleSpec, String> {
    let (name, rest) = match s.split_once(':') {
        Some((a, b)) => (a, Some(b)),
        None => (s, None),
    };
    let nums = |r: Option<&str>, want: usize| -> std::result::Result<Vec<f64>, String> {
        let r = r.ok_or_else(|| format!("schedule '{name}' needs {want} parameter(s)"))?;
        let v: Vec<f64> = r
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("bad number '{t}': {e}")))
            .collect::<std::result::Result<_, _>>()?;
        if v.len() != want {
            return Err(format!("schedule '{name}' needs {want} parameter(s), got {}", v.len()));
        }
        Ok(v)
    };
    match name {
        "nesterov" if rest.is_none() => Ok(ScheduleSpec::Nesterov),
        "toy" if rest.is_none() => Ok(ScheduleSpec::Toy),
        "attouch" => Ok(ScheduleSpec::Attouch { eta: nums(rest, 1)?[0] }),
        "constant" => {
            let v = nums(rest, 2)?;
            Ok(ScheduleSpec::Constant { beta: v[0], gamma: v[1] })
        }
        "polyak" => {
            let v = nums(rest, 2)?;
            Ok(ScheduleSpec::Polyak { m: v[0], l: v[1] })
        }
        _ => Err(format!(
            "unknown schedule '{s}' (expected nesterov, attouch:ETA, constant:B,G, polyak:M,L or toy)"
        )),
    }
}

impl ScheduleSpec {
    fn resolve(self, alpha: f64, delta: f64, gamma_hat: f64) -> MomentumSchedule {
        match self {
            ScheduleSpec::Nesterov => MomentumSchedule::Nesterov,
            ScheduleSpec::Attouch { eta } => MomentumSchedule::Attouch { eta },
            ScheduleSpec::Constant { beta, gamma } => MomentumSchedule::Constant { beta, gamma },
            ScheduleSpec::Polyak { m, l } => MomentumSchedule::Polyak { m, l },
            ScheduleSpec::Toy => MomentumSchedule::Toy {
                alpha,
                delta,
                gamma_hat,
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ToyArgs {
    /// Magnitude of the negative eigenvalue.
    #[arg(long, default_value_t = 0.02)]
    pub delta: f64,
    /// Step size for both methods.
    #[arg(long, default_value_t = 0.75)]
    pub alpha: f64,
    /// Heavy-ball momentum.
    #[arg(long, default_value_t = 0.985)]
    pub beta: f64,
    /// Start point as x1,x2.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.25, 0.01])]
    pub x0: Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Keep every n-th iterate.
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    /// Single Hessian eigenvalue; reports one 2×2 block.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta: f64,
    /// Dimension of a random problem; the toy problem is used when omitted.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of negative eigenvalues of the random problem.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 0.02)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct RatesArgs {
    /// Negative Hessian eigenvalue.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_parser = parse_schedule, default_value = "nesterov")]
    pub schedule: ScheduleSpec,
    /// δ for the toy schedule; defaults to |λ|.
    #[arg(long)]
    pub delta: Option<f64>,
    /// γ̂ for the toy schedule.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    /// Length K of the sequence.
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    /// Initial coordinate along the eigenvector.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.01)]
    pub x0: f64,
    /// Magnitude used for the predicted escape count.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Dimension of a random problem; the toy problem is used when omitted.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of negative eigenvalues of the random problem.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Step size; defaults to 1/L.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Constant momentum when --schedule is omitted; heavy-ball β with --negspace.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Constant extrapolation when --schedule is omitted; γ̂ for the toy schedule.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, value_parser = parse_schedule)]
    pub schedule: Option<ScheduleSpec>,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Reports the first iteration whose negative-space norm reaches this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Start the previous point at x¹ + ε·N(0, I) instead of x¹.
    #[arg(long)]
    pub eps_perturb: Option<f64>,
    /// Start point; drawn uniformly from the unit ball when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    /// Compare the negative-space growth of GD, heavy-ball and Nesterov.
    #[arg(long)]
    pub negspace: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct TableArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [100])]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3])]
    pub delta: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Per-trial iteration cap.
    #[arg(long, default_value_t = 1_000_000)]
    pub iters: usize,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyTkArgs {
    /// Largest index checked.
    #[arg(long = "K", visible_alias = "k", default_value_t = 100_000)]
    pub k_max: usize,
    #[command(flatten)]
    pub output: Output,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
        }
    };
    eprintln!(
        "config: {}",
        serde_json::to_string(&cli.command).unwrap_or_else(|_| format!("{:?}", cli.command))
    );
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Toy(a) => toy(a).map(|_| 0),
        Command::Spectrum(a) => spectrum(a).map(|_| 0),
        Command::Rates(a) => rates(a).map(|_| 0),
        Command::Simulate(a) => simulate(a).map(|_| 0),
        Command::Table(a) => table(a).map(|_| 0),
        Command::VerifyTk(a) => verify_tk(a),
    }
}

fn emit(output: &Output, bytes: &[u8]) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_bytes(v: &impl Serialize) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn trace_json(trace: &IterationTrace, thin: usize, projector: Option<&Projector>) -> Value {
    let rows: Vec<Value> = (0..trace.iterates.len())
        .step_by(thin.max(1))
        .map(|k| {
            let x = &trace.iterates[k];
            let mut row = json!({ "iter": k, "f": trace.values[k], "grad_norm": trace.grad_norms[k] });
            match projector {
                Some(p) => row["proj_norm"] = json!(p.norm(x)),
                None => row["x"] = json!(x.as_slice()),
            }
            row
        })
        .collect();
    json!({ "steps": trace.steps(), "diverged": trace.diverged, "rows": rows })
}

fn toy(a: &ToyArgs) -> Result<()> {
    if a.x0.len() != 2 {
        return Err(Error::Config(format!("--x0 needs 2 values, got {}", a.x0.len())));
    }
    let fig = toy_figure(a.delta, a.alpha, a.beta, [a.x0[0], a.x0[1]], a.iters, a.thin)?;
    let bytes = match a.output.resolved(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            fig.write_csv(&mut buf)?;
            buf
        }
        Format::Json => json_bytes(&json!({
            "delta": a.delta,
            "alpha": a.alpha,
            "beta": a.beta,
            "thin": a.thin,
            "steepest_descent": trace_json(&fig.steepest_descent, a.thin, None),
            "heavy_ball": trace_json(&fig.heavy_ball, a.thin, None),
        }))?,
    };
    emit(&a.output, &bytes)
}

fn block_csv(blocks: &[BlockRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv_writer(&mut buf);
        w.write_record(["lambda", "mu_hi_re", "mu_hi_im", "mu_lo_re", "mu_lo_im", "class"])?;
        for b in blocks {
            let class = serde_json::to_value(b.class)?;
            w.write_record([
                csv_num(b.lambda),
                csv_num(b.mu_hi.re),
                csv_num(b.mu_hi.im),
                csv_num(b.mu_lo.re),
                csv_num(b.mu_lo.im),
                class.as_str().unwrap_or_default().to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(buf)
}

fn spectrum(a: &SpectrumArgs) -> Result<()> {
    let format = a.output.resolved(Format::Csv);
    let bytes = if let Some(lambda) = a.lambda {
        let pair = block_eigenvalues(lambda, a.alpha, a.beta);
        let rec = BlockRecord::from(&pair);
        match format {
            Format::Csv => block_csv(&[rec])?,
            Format::Json => json_bytes(&json!({
                "alpha": a.alpha,
                "beta": a.beta,
                "lambda": lambda,
                "is_real": pair.is_real,
                "mu_hi": rec.mu_hi,
                "mu_lo": rec.mu_lo,
                "class": rec.class,
            }))?,
        }
    } else {
        let problem = match a.n {
            Some(n) => random_problem(n, a.p, a.delta, a.seed)?,
            None => toy_problem(a.delta)?,
        };
        let report = classify_saddle_map(&problem, a.alpha, a.beta)?.report();
        match format {
            Format::Csv => block_csv(&report.blocks)?,
            Format::Json => json_bytes(&report)?,
        }
    };
    emit(&a.output, &bytes)
}

fn rates(a: &RatesArgs) -> Result<()> {
    let delta = a.delta.unwrap_or(a.lambda.abs());
    let schedule = a.schedule.resolve(a.alpha, delta, a.gamma);
    let seq = b_sequence(a.lambda, a.alpha, &schedule, a.iters)?;
    let bytes = match a.output.resolved(Format::Csv) {
        Format::Csv => {
            let xs = product_series(a.x0, &seq);
            let mut buf = Vec::new();
            {
                let mut w = csv_writer(&mut buf);
                w.write_record(["k", "b", "x"])?;
                for (k, (b, x)) in seq.values.iter().zip(&xs).enumerate() {
                    w.write_record([k.to_string(), csv_num(*b), csv_num(*x)])?;
                }
                w.flush()?;
            }
            buf
        }
        Format::Json => {
            let report = rate_report(a.lambda, a.alpha, &schedule, a.iters, a.x0.abs(), a.threshold)?;
            let (bb, gb) = schedule.limits();
            let lim = b_limit(a.lambda, a.alpha, bb, gb)?;
            json_bytes(&json!({
                "report": report,
                "beta_bar": bb,
                "gamma_bar": gb,
                "limit_residual": lim.residual(),
                "gap": (report.b_final - report.b_limit).abs(),
            }))?
        }
    };
    emit(&a.output, &bytes)
}

fn start_point(a: &SimulateArgs, n: usize) -> Result<DVector<f64>> {
    match &a.x0 {
        Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
        Some(v) => Err(Error::Config(format!("--x0 has {} values but the problem has n = {n}", v.len()))),
        None => Ok(rng::unit_ball(&mut rng::stream(a.seed, 1), n)),
    }
}

/// Seed offset so the perturbation stream differs from the problem stream.
const PERTURB_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

fn simulate(a: &SimulateArgs) -> Result<()> {
    let format = a.output.resolved(Format::Csv);
    if a.negspace {
        let spec = NegspaceSpec {
            n: a.n.unwrap_or(100),
            delta: a.delta,
            seed: a.seed,
            iters: a.iters,
            gamma_hat: a.gamma.unwrap_or(0.0),
            beta: a.beta,
        };
        let res = negspace_experiment(&spec)?;
        eprintln!(
            "resolved: L={} alpha_gd={} beta_hb={} alpha_ag={} bar_b={}",
            res.lipschitz, res.alpha_gd, res.beta_hb, res.alpha_ag, res.bar_b
        );
        let bytes = match format {
            Format::Csv => {
                let mut buf = Vec::new();
                res.write_csv(&mut buf)?;
                buf
            }
            Format::Json => json_bytes(&res)?,
        };
        return emit(&a.output, &bytes);
    }

    let problem: QuadraticProblem = match a.n {
        Some(n) => random_problem(n, a.p, a.delta, a.seed)?,
        None => toy_problem(a.delta)?,
    };
    let n = problem.n();
    let alpha = a.alpha.unwrap_or(1.0 / problem.lipschitz());
    let schedule = match a.schedule {
        Some(s) => s.resolve(alpha, a.delta, a.gamma.unwrap_or(0.0)),
        None => MomentumSchedule::Constant {
            beta: a.beta.unwrap_or(0.0),
            gamma: a.gamma.unwrap_or(0.0),
        },
    };
    let previous = match a.eps_perturb {
        Some(eps) => PreviousPoint::Perturbed {
            eps,
            seed: a.seed ^ PERTURB_SEED_MIX,
        },
        None => PreviousPoint::EqualToX0,
    };
    let x0 = start_point(a, n)?;
    let trace = run_accelerated(&problem, alpha, &schedule, &x0, previous, a.iters)?;
    let projector = problem.negative_projector();
    let escape = a.threshold.map(|t| escape_time(&trace, &projector, t));
    eprintln!(
        "resolved: n={n} alpha={alpha} schedule={} steps={} diverged={} escape={:?}",
        schedule.label(),
        trace.steps(),
        trace.diverged,
        escape.flatten()
    );

    let bytes = match format {
        Format::Csv => {
            let cols = if n <= 10 {
                TraceColumns::Coordinates
            } else {
                TraceColumns::Projection(projector)
            };
            let mut buf = Vec::new();
            trace.write_csv(&mut buf, &cols, a.thin)?;
            buf
        }
        Format::Json => json_bytes(&json!({
            "problem": ProblemFile::from(&problem),
            "alpha": alpha,
            "schedule": schedule,
            "escape_time": escape.flatten(),
            "trace": trace_json(&trace, a.thin, (n > 10).then_some(&projector)),
        }))?,
    };
    emit(&a.output, &bytes)
}

fn table(a: &TableArgs) -> Result<()> {
    let spec = TableSpec {
        ns: a.n.clone(),
        deltas: a.delta.clone(),
        p: a.p,
        trials: a.trials,
        seed: a.seed,
        max_iters: a.iters,
    };
    let res = divergence_table(&spec)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    let bytes = match a.output.resolved(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            res.write_csv(&mut buf)?;
            buf
        }
        Format::Json => json_bytes(&res)?,
    };
    emit(&a.output, &bytes)
}

fn verify_tk(a: &VerifyTkArgs) -> Result<i32> {
    let report = verify_tk_properties(a.k_max)?;
    let bytes = match a.output.resolved(Format::Json) {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let v = serde_json::to_value(&report)?;
            let mut buf = Vec::new();
            {
                let mut w = csv_writer(&mut buf);
                w.write_record(["property", "value"])?;
                if let Value::Object(map) = v {
                    for (k, val) in map {
                        let cell = match val.as_f64() {
                            Some(x) if !val.is_u64() => csv_num(x),
                            _ => val.to_string(),
                        };
                        w.write_record([k, cell])?;
                    }
                }
                w.flush()?;
            }
            buf
        }
    };
    emit(&a.output, &bytes)?;
    if report.passed() {
        Ok(0)
    } else {
        eprintln!("verify-tk: property violated");
        Ok(EXIT_VIOLATION)
    }
}
