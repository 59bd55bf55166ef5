//! Command-line front end. The binary only parses arguments, calls [`run`]
//! and writes the returned text.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::value::RawValue;
use serde_json::{json, Value};

use crate::distribution::{self, DistributionDocument, FiniteDistribution};
use crate::exec::Execution;
use crate::optimizer::{self, OptimizerError, OptimizerOptions};
use crate::polyhedron::{self, PolyhedronError, StandardPolyhedron};
use crate::rates::{self, ChiConstraint, Engine, EngineConfig, RateContext, RateReport, RatesError, SurvivalCurve};
use crate::rational::{self, Rational};
use crate::reduction;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;
pub const EXIT_NO_CONVERGENCE: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "orthant-exit", version, about = "Decay rates of random walks confined to the positive orthant")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads; changes wall time only, never the output.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Dp,
    Spectral,
    Mc,
    McTilted,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Dp => Engine::Dp,
            EngineArg::Spectral => Engine::Spectral,
            EngineArg::Mc => Engine::Mc,
            EngineArg::McTilted => Engine::McTilted,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct EngineArgs {
    #[arg(long, value_enum, default_value_t = EngineArg::Dp)]
    pub engine: EngineArg,
    /// Horizon.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, env = "ORTHANT_EXIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Upper limit for every coordinate of the truncation box.
    #[arg(long)]
    pub trunc: Option<i64>,
    /// Tilt point for mc-tilted, e.g. "0,0.5"; defaults to the minimizer.
    #[arg(long)]
    pub tilt: Option<String>,
    /// Also require the walk to stay within this χ-distance of its start.
    #[arg(long)]
    pub chi: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reduced support, infimum of the Laplace transform and minimizer.
    Analyze {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Survival curve and rate estimate from one start point.
    Rate {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        start: String,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Rate estimates over several start points, ordered by depth.
    Sweep {
        #[arg(long)]
        dist: PathBuf,
        /// Repeat for each start point.
        #[arg(long, required = true)]
        start: Vec<String>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Exact routines on standard-form polyhedra.
    Poly {
        #[command(subcommand)]
        action: PolyAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum PolyAction {
    MinimalCheck {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        point: String,
    },
    Reduce {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        point: String,
    },
    Decompose {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        point: String,
    },
    Vertices {
        #[arg(long)]
        poly: PathBuf,
    },
    Bound {
        #[arg(long)]
        poly: PathBuf,
    },
    /// Polyhedron file holds {"L", "phi", "b", "c"}.
    ExtendedReduce {
        #[arg(long)]
        poly: PathBuf,
        #[arg(long)]
        point: String,
    },
}

/// Text to emit and the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
    pub message: Option<String>,
}

struct Failure {
    code: i32,
    message: String,
    /// Report still printed despite the nonzero code.
    output: Option<String>,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
            output: None,
        }
    }
}

impl From<RatesError> for Failure {
    fn from(e: RatesError) -> Self {
        let code = match e {
            RatesError::NonConvergence { .. } => EXIT_NO_CONVERGENCE,
            _ => EXIT_DOMAIN,
        };
        Failure {
            code,
            message: e.to_string(),
            output: None,
        }
    }
}

impl From<OptimizerError> for Failure {
    fn from(e: OptimizerError) -> Self {
        let code = match e {
            OptimizerError::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
            OptimizerError::DegenerateZero => EXIT_DEGENERATE,
            OptimizerError::BadTolerance => EXIT_PARSE,
        };
        Failure {
            code,
            message: e.to_string(),
            output: None,
        }
    }
}

impl From<PolyhedronError> for Failure {
    fn from(e: PolyhedronError) -> Self {
        Failure {
            code: EXIT_DOMAIN,
            message: e.to_string(),
            output: None,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

#[derive(Deserialize)]
struct Embedded<'a> {
    #[serde(borrow)]
    distribution: &'a RawValue,
}

/// Reads a distribution file, or the distribution embedded in an analysis
/// report.
pub fn load_distribution(path: &Path) -> Result<FiniteDistribution, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_distribution(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse_distribution(text: &str) -> Result<FiniteDistribution, distribution::FileError> {
    if let Ok(e) = serde_json::from_str::<Embedded>(text) {
        return distribution::from_json(e.distribution.get());
    }
    distribution::from_json(text)
}

fn parse_point(text: &str, what: &str) -> Result<Vec<Rational>, Failure> {
    rational::parse_list(text).map_err(|e| Failure::parse(format!("bad {what} \"{text}\": {e}")))
}

fn strings(v: &[Rational]) -> Vec<String> {
    rational::format_vec(v)
}

fn one_based(v: &[usize]) -> Vec<usize> {
    v.iter().map(|i| i + 1).collect()
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        Value::Null
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn numbers(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| number(x)).collect())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn analyze(dist_path: &Path, tol: Option<f64>) -> Result<String, Failure> {
    let dist = load_distribution(dist_path).map_err(Failure::parse)?;
    let rs = reduction::build_reduced_support(&dist);
    let opts = OptimizerOptions {
        tol: tol.unwrap_or(OptimizerOptions::default().tol),
        ..OptimizerOptions::default()
    };
    let minimized = optimizer::minimize_on_vplus_with(&dist, &rs, &opts);
    let (report, degenerate) = match minimized {
        Ok(r) => (r, false),
        Err(OptimizerError::DegenerateZero) => (optimizer::zero_mass_report(dist.dimension()), true),
        Err(e) => return Err(e.into()),
    };
    let doc = json!({
        "well_oriented": rs.well_oriented,
        "tuple": rs.tuple.iter().map(|u| strings(u)).collect::<Vec<_>>(),
        "V_basis": rs.v.basis().iter().map(|u| strings(u)).collect::<Vec<_>>(),
        "I": one_based(&rs.i_set),
        "I_perp": one_based(&rs.i_perp),
        "muV": rational::format(&report.mu_v),
        "inf_value": number(report.inf_value),
        "v0": numbers(&report.v0),
        "lambda": number(report.lambda),
        "K": one_based(&report.k_set),
        "attained": report.attained,
        "kkt_residual": number(report.kkt_residual),
        "tilt_drift": numbers(&report.tilt_drift),
        "iterations": report.iterations,
        "distribution": DistributionDocument::from(&dist),
    });
    let text = pretty(&doc);
    if degenerate {
        return Err(Failure {
            code: EXIT_DEGENERATE,
            message: "μ(V) = 0: the infimum over the orthant is 0".into(),
            output: Some(text),
        });
    }
    Ok(text)
}

fn engine_config(args: &EngineArgs, dist: &FiniteDistribution, ctx: &RateContext, start: &[Rational]) -> Result<EngineConfig, Failure> {
    if args.n == 0 {
        return Err(Failure::parse("--n must be positive"));
    }
    if args.samples == 0 {
        return Err(Failure::parse("--samples must be positive"));
    }
    let tilt = match &args.tilt {
        Some(t) => {
            let v = parse_point(t, "tilt")?;
            if v.len() != dist.dimension() {
                return Err(Failure::parse(format!("tilt has {} coordinates, expected {}", v.len(), dist.dimension())));
            }
            Some(rational::vec_to_f64(&v))
        }
        None => None,
    };
    let chi = match args.chi {
        Some(r) if r > 0.0 => Some(ChiConstraint {
            center: rational::vec_to_f64(start),
            coordinates: ctx.minimizer.as_ref().map_or_else(Vec::new, |m| m.k_set.clone()),
            plane: optimizer::v2_orthonormal_basis(&ctx.reduced),
            radius: r,
        }),
        Some(_) => return Err(Failure::parse("--chi must be positive")),
        None => None,
    };
    Ok(EngineConfig {
        engine: args.engine.into(),
        n: args.n,
        samples: args.samples,
        seed: args.seed,
        trunc: args.trunc,
        tilt,
        chi,
    })
}

fn curve_json(c: &SurvivalCurve) -> Value {
    json!({
        "horizons": c.horizons,
        "probabilities": numbers(&c.probabilities),
        "stderr": c.stderr.as_ref().map(|s| numbers(s)),
        "ess": c.ess.as_ref().map(|s| numbers(s)),
        "truncation": c.truncation,
    })
}

fn report_json(r: &RateReport) -> Value {
    json!({
        "engine": r.engine.as_str(),
        "start": strings(&r.start),
        "rate": number(r.rate),
        "method": r.method.as_str(),
        "nth_root": number(r.nth_root),
        "bound": number(r.bound),
        "within_bound": r.within_bound(),
        "d_of_x": number(r.d_of_x),
        "truncation_converged": r.truncation_converged,
        "spectral": r.spectral.as_ref().map(|s| json!({
            "states": s.states,
            "classes": s.classes,
            "iterations": s.iterations,
            "gap": number(s.gap),
        })),
        "curve": curve_json(&r.curve),
    })
}

/// One row per horizon: `engine,start_1..start_d,n,probability,stderr`.
pub fn curves_csv(curves: &[&SurvivalCurve]) -> String {
    let d = curves.first().map_or(0, |c| c.start.len());
    let mut out = String::from("engine");
    for i in 1..=d {
        out.push_str(&format!(",start_{i}"));
    }
    out.push_str(",n,probability,stderr\n");
    for c in curves {
        let start = strings(&c.start).join(",");
        for (k, (&n, p)) in c.horizons.iter().zip(&c.probabilities).enumerate() {
            let se = c.stderr.as_ref().map_or(String::new(), |s| s[k].to_string());
            out.push_str(&format!("{},{start},{n},{p},{se}\n", c.engine.as_str()));
        }
    }
    out
}

fn rate(dist_path: &Path, starts: &[String], args: &EngineArgs, format: Format, sweep: bool) -> Result<String, Failure> {
    let dist = load_distribution(dist_path).map_err(Failure::parse)?;
    let xs = starts
        .iter()
        .map(|s| parse_point(s, "start"))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(x) = xs.iter().find(|x| x.len() != dist.dimension()) {
        return Err(Failure::parse(format!("start has {} coordinates, expected {}", x.len(), dist.dimension())));
    }
    let ctx = RateContext::new(&dist)?;
    let cfg = engine_config(args, &dist, &ctx, &xs[0])?;
    let exec = Execution::Parallel;
    let reports = if sweep {
        if cfg.chi.is_some() {
            return Err(Failure::parse("--chi is only available for single-start runs"));
        }
        rates::rate_sweep(&dist, &ctx, &xs, &cfg, exec)?
    } else {
        vec![rates::estimate_rate(&dist, &ctx, &xs[0], &cfg, exec)?]
    };
    Ok(match format {
        Format::Csv => curves_csv(&reports.iter().map(|r| &r.curve).collect::<Vec<_>>()),
        Format::Json if sweep => pretty(&Value::Array(reports.iter().map(report_json).collect())),
        Format::Json => pretty(&report_json(&reports[0])),
    })
}

fn load_polyhedron(path: &Path) -> Result<StandardPolyhedron, Failure> {
    polyhedron::polyhedron_from_json(&read(path)?).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn poly(action: &PolyAction) -> Result<String, Failure> {
    let doc = match action {
        PolyAction::MinimalCheck { poly, point } => {
            let p = load_polyhedron(poly)?;
            let x = parse_point(point, "point")?;
            json!({
                "point": strings(&x),
                "active_set": one_based(&polyhedron::active_set(&p, &x)?),
                "is_vertex": polyhedron::is_vertex(&p, &x)?,
                "is_minimal": polyhedron::is_minimal(&p, &x)?,
            })
        }
        PolyAction::Reduce { poly, point } => {
            let p = load_polyhedron(poly)?;
            let x = parse_point(point, "point")?;
            let (y, steps) = polyhedron::reduce_to_minimal_counted(&p, &x)?;
            json!({ "point": strings(&x), "minimal": strings(&y), "steps": steps })
        }
        PolyAction::Decompose { poly, point } => {
            let p = load_polyhedron(poly)?;
            let x = parse_point(point, "point")?;
            let parts = polyhedron::decompose_minimal(&p, &x)?;
            json!({
                "point": strings(&x),
                "vertices": parts
                    .iter()
                    .map(|(v, w)| json!({ "vertex": strings(v), "weight": rational::format(w) }))
                    .collect::<Vec<_>>(),
            })
        }
        PolyAction::Vertices { poly } => {
            let p = load_polyhedron(poly)?;
            let vs = polyhedron::enumerate_vertices(&p)?;
            json!({ "vertices": vs.iter().map(|v| strings(v)).collect::<Vec<_>>() })
        }
        PolyAction::Bound { poly } => {
            let p = load_polyhedron(poly)?;
            json!({ "M": rational::format(&polyhedron::bound_m(&p)?) })
        }
        PolyAction::ExtendedReduce { poly, point } => {
            let ep = polyhedron::extended_from_json(&read(poly)?).map_err(|e| Failure::parse(format!("{}: {e}", poly.display())))?;
            let x = parse_point(point, "point")?;
            let y = polyhedron::extended_reduce(&ep, &x)?;
            let m = polyhedron::bound_m(&ep.lift()).ok();
            let scale = rational::l1_norm(&ep.b) + num_traits::Signed::abs(&ep.c);
            json!({
                "point": strings(&x),
                "minimal": strings(&y),
                "M_lifted": m.as_ref().map(rational::format),
                "norm_bound": m.as_ref().map(|m| rational::format(&(m * &scale))),
            })
        }
    };
    Ok(pretty(&doc))
}

fn dispatch(cli: &Cli) -> Result<String, Failure> {
    let json_only = |what: &str| -> Result<(), Failure> {
        if cli.format == Format::Csv {
            Err(Failure::parse(format!("{what} only writes JSON")))
        } else {
            Ok(())
        }
    };
    match &cli.command {
        Command::Analyze { dist, tol } => {
            json_only("analyze")?;
            analyze(dist, *tol)
        }
        Command::Rate { dist, start, engine } => rate(dist, std::slice::from_ref(start), engine, cli.format, false),
        Command::Sweep { dist, start, engine } => rate(dist, start, engine, cli.format, true),
        Command::Poly { action } => {
            json_only("poly")?;
            poly(action)
        }
    }
}

/// Runs a parsed command line, honouring `--threads`.
pub fn run(cli: &Cli) -> Outcome {
    let result = match cli.threads {
        Some(0) => Err(Failure::parse("--threads must be positive")),
        #[cfg(feature = "parallel")]
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| dispatch(cli)),
            Err(e) => Err(Failure::parse(format!("thread pool: {e}"))),
        },
        _ => dispatch(cli),
    };
    match result {
        Ok(output) => Outcome {
            code: EXIT_OK,
            output,
            message: None,
        },
        Err(f) => Outcome {
            code: f.code,
            output: f.output.unwrap_or_default(),
            message: Some(f.message),
        },
    }
}

/// Full entry point: parse `args`, run, write output. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let outcome = run(&cli);
    if !outcome.output.is_empty() {
        match &cli.out {
            Some(path) => {
                if let Err(e) = std::fs::write(path, &outcome.output) {
                    eprintln!("error: {}: {e}", path.display());
                    return EXIT_PARSE;
                }
            }
            None => print!("{}", outcome.output),
        }
    }
    if let Some(m) = &outcome.message {
        eprintln!("error: {m}");
    }
    outcome.code
}
