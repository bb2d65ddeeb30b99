//! Command-line front end.
//!
//! Every subcommand writes a JSON report `<out>/<id>.json` (plus a timing
//! sidecar and a CSV summary) and exits with 0 when all thresholds hold, 1 on
//! a property failure or numerical error, and 2 on usage or input errors.
//!
//! `--config file.json` supplies the same keys as the flags (snake_case, plus
//! `seed`, `out`, `threads`); flags take precedence.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::algebra::{sample_algebras, Algebra};
use crate::data::{DataFormat, Dataset};
use crate::error::{Error, Result};
use crate::experiments::{
    run_algebra_check, run_convexity, run_equivariance, run_expressiveness, run_norm_comparison, run_rkhm_regression,
    write_file, write_summary_csv, Comparison, ConvexityConfig, ExperimentReport, KernelConfig, RegressionConfig,
};
use crate::hilbert::ModuleVector;
use crate::net::{loss, optimize_measure, train, Activation, CStarNet, ProbabilityWeights, TrainConfig};
use crate::rkhm::{mmd, AKernel, DiscreteAMeasure, RkhmRegressor};

#[derive(Parser, Debug)]
#[command(name = "cstar", version, about = "C*-algebra valued kernel methods and networks")]
struct Cli {
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw (required here or in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// C*-identity, involution and inner-product checks on random elements.
    AlgebraCheck(AlgebraCheckArgs),
    /// Kernel ridge regression with a train/test split.
    RkhmFit(RkhmFitArgs),
    /// Predictions of a fitted regressor.
    RkhmPredict(RkhmPredictArgs),
    /// Maximum mean discrepancy between two discrete A-valued measures.
    Mmd(MmdArgs),
    /// Gradient-descent training of a network.
    NetTrain(NetTrainArgs),
    /// Outputs and loss of a network on a dataset.
    NetEval(NetEvalArgs),
    /// Optimal averaging measure for a fixed grid network.
    MeasureOpt(MeasureOptArgs),
    /// Polynomial degree of basis networks with linear activations.
    PropPoly(PropPolyArgs),
    /// Convexity of the averaged-network loss in the measure.
    PropConvex(PropConvexArgs),
    /// Operator against Hilbert-Schmidt norms of random matrices.
    NormCompare(NormCompareArgs),
    /// Right-translation equivariance of group-algebra networks.
    Equivariance(EquivarianceArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlgebraCheckArgs {
    /// Algebra to check (repeatable); all kinds when absent.
    #[arg(long = "algebra")]
    #[serde(skip_serializing_if = "Option::is_none")]
    algebras: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelArgs {
    /// Include a Gaussian term (default true).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gaussian: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    /// Include a linear term (default false).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    linear: Option<bool>,
    /// JSON kernel file; overrides the other kernel flags.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<PathBuf>,
}

impl KernelArgs {
    fn config(&self) -> Result<KernelConfig> {
        let kernel = match &self.kernel {
            Some(p) => Some(serde_json::from_str::<AKernel>(&read(p)?)?),
            None => None,
        };
        Ok(KernelConfig {
            gaussian: self.gaussian.unwrap_or(true).then(|| self.gamma.unwrap_or(1.0)),
            linear: self.linear.unwrap_or(false),
            kernel,
        })
    }
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RkhmFitArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
    /// Algebra descriptor overriding the one in the data file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    algebra: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    test_fraction: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_sweep: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_test_error: Option<f64>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RkhmPredictArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MmdArgs {
    /// Samples of the first measure; a single target column gives the weights.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    first: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    second: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    algebra: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    kernel: KernelArgs,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetTrainArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    algebra: Option<String>,
    /// Hidden widths, e.g. `8,8` (default 8).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden: Option<Vec<usize>>,
    /// One activation per layer (default tanh, identity on the output).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    activations: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    step_size: Option<f64>,
    /// Start from this model instead of a random one.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetEvalArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureOptArgs {
    /// Network over a grid algebra.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PathBuf>,
    /// Samples with scalar targets.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<PathBuf>,
    /// Grid indices carrying the measure (default all).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    support: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropPolyArgs {
    /// Largest depth checked.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    depth: Option<usize>,
    /// Number of basis functions.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    basis_dim: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropConvexArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    segments: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormCompareArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    dims: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EquivarianceArgs {
    /// Group algebra (repeatable); `cyclic:4` and `s3` when absent.
    #[arg(long = "group")]
    #[serde(skip_serializing_if = "Option::is_none")]
    groups: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
}

/// Errors sorted by exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Run(e.into())
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Run(Error::Numerical(_)) => 1,
            Failure::Run(_) => 2,
        }
    }
}

struct Context {
    seed: u64,
    out: PathBuf,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        write_file(&path, &text)?;
        Ok(path)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn required<T: Clone>(value: &Option<T>, name: &str) -> std::result::Result<T, Failure> {
    value
        .clone()
        .ok_or_else(|| Failure::Usage(format!("missing required option --{}", name.replace('_', "-"))))
}

fn parse_algebra(spec: &Option<String>) -> std::result::Result<Option<Algebra>, Failure> {
    spec.as_deref()
        .map(|s| s.parse::<Algebra>().map_err(|e| Failure::Usage(e.to_string())))
        .transpose()
}

fn load(path: &Path, algebra: Option<&Algebra>) -> Result<Dataset> {
    Dataset::load(path, None, algebra)
}

/// Overlays the flags on the config values and re-reads the result.
fn merged<T: Serialize + DeserializeOwned>(config: &Map<String, Value>, flags: &T) -> std::result::Result<T, Failure> {
    let mut map = config.clone();
    if let Value::Object(f) = serde_json::to_value(flags)? {
        map.extend(f);
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| Failure::Usage(format!("config: {e}")))
}

/// Runs the command line `argv` (including the program name) and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("CSTAR_LOG")).try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(report) => {
            println!("{}: {}", report.id, if report.passed { "pass" } else { "FAIL" });
            for t in report.failures() {
                let value = report.metrics.get(&t.metric).copied().unwrap_or(f64::NAN);
                eprintln!("  {} = {value:e} violates {:?} {:e}", t.metric, t.comparison, t.bound);
            }
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Run(e) => eprintln!("error: {e}"),
            }
            f.code()
        }
    }
}

fn run(cli: Cli) -> std::result::Result<ExperimentReport, Failure> {
    let mut config = match &cli.config {
        Some(p) => match serde_json::from_str::<Value>(&read(p)?) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(Failure::Usage(format!("{}: config must be a JSON object", p.display()))),
            Err(e) => return Err(Failure::Usage(format!("{}: {e}", p.display()))),
        },
        None => Map::new(),
    };
    let mut global = |key: &str| config.remove(key);
    let seed = match (cli.seed, global("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => v
            .as_u64()
            .ok_or_else(|| Failure::Usage("config: seed must be a nonnegative integer".into()))?,
        (None, None) => {
            return Err(Failure::Usage(
                "a seed is required (--seed or \"seed\" in the config)".into(),
            ))
        }
    };
    let out = match (cli.out, global("out")) {
        (Some(p), _) => p,
        (None, Some(Value::String(s))) => PathBuf::from(s),
        (None, Some(_)) => return Err(Failure::Usage("config: out must be a string".into())),
        (None, None) => PathBuf::from("."),
    };
    let threads = match (cli.threads, global("threads")) {
        (Some(t), _) => Some(t),
        (None, Some(v)) => Some(
            v.as_u64()
                .ok_or_else(|| Failure::Usage("config: threads must be a positive integer".into()))?
                as usize,
        ),
        (None, None) => None,
    };
    std::fs::create_dir_all(&out).map_err(|source| Error::Io {
        path: out.clone(),
        source,
    })?;
    let ctx = Context { seed, out };
    let start = Instant::now();
    let report = match threads {
        Some(0) => return Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Usage(e.to_string()))?
            .install(|| command(&cli.command, &config, &ctx))?,
        None => command(&cli.command, &config, &ctx)?,
    };
    let path = report.write(&ctx.out, Some(start.elapsed()))?;
    write_summary_csv(
        &ctx.path(&format!("{}.summary.csv", report.id)),
        std::slice::from_ref(&report),
    )?;
    log::info!("report written to {}", path.display());
    Ok(report)
}

fn command(
    cmd: &Command,
    config: &Map<String, Value>,
    ctx: &Context,
) -> std::result::Result<ExperimentReport, Failure> {
    match cmd {
        Command::AlgebraCheck(a) => algebra_check(merged(config, a)?, ctx),
        Command::RkhmFit(a) => rkhm_fit(merged(config, a)?, ctx),
        Command::RkhmPredict(a) => rkhm_predict(merged(config, a)?, ctx),
        Command::Mmd(a) => mmd_cmd(merged(config, a)?, ctx),
        Command::NetTrain(a) => net_train(merged(config, a)?, ctx),
        Command::NetEval(a) => net_eval(merged(config, a)?, ctx),
        Command::MeasureOpt(a) => measure_opt(merged(config, a)?, ctx),
        Command::PropPoly(a) => {
            let a: PropPolyArgs = merged(config, a)?;
            Ok(run_expressiveness(
                a.depth.unwrap_or(3),
                a.basis_dim.unwrap_or(2),
                ctx.seed,
            )?)
        }
        Command::PropConvex(a) => {
            let a: PropConvexArgs = merged(config, a)?;
            let d = ConvexityConfig::default();
            let cfg = ConvexityConfig {
                segments: a.segments.unwrap_or(d.segments),
                grid: a.grid.unwrap_or(d.grid),
                samples: a.samples.unwrap_or(d.samples),
                steps: a.steps.unwrap_or(d.steps),
            };
            Ok(run_convexity(ctx.seed, cfg)?)
        }
        Command::NormCompare(a) => {
            let a: NormCompareArgs = merged(config, a)?;
            let dims = a.dims.unwrap_or_else(|| vec![2, 4, 8, 16]);
            Ok(run_norm_comparison(&dims, a.trials.unwrap_or(1000), ctx.seed)?)
        }
        Command::Equivariance(a) => {
            let a: EquivarianceArgs = merged(config, a)?;
            let groups = match a.groups {
                Some(specs) => parse_all(&specs)?,
                None => vec![Algebra::cyclic_group(4)?, Algebra::symmetric_group(3)?],
            };
            Ok(run_equivariance(&groups, a.trials.unwrap_or(10), ctx.seed)?)
        }
    }
}

fn parse_all(specs: &[String]) -> std::result::Result<Vec<Algebra>, Failure> {
    specs
        .iter()
        .map(|s| s.parse::<Algebra>().map_err(|e| Failure::Usage(e.to_string())))
        .collect()
}

fn algebra_check(a: AlgebraCheckArgs, ctx: &Context) -> std::result::Result<ExperimentReport, Failure> {
    let algebras = match &a.algebras {
        Some(specs) => parse_all(specs)?,
        None => sample_algebras(),
    };
    Ok(run_algebra_check(&algebras, a.trials.unwrap_or(100), ctx.seed)?)
}

fn rkhm_fit(a: RkhmFitArgs, ctx: &Context) -> std::result::Result<ExperimentReport, Failure> {
    let path = required(&a.data, "data")?;
    let data = load(&path, parse_algebra(&a.algebra)?.as_ref())?;
    let d = RegressionConfig::default();
    let cfg = RegressionConfig {
        kernel: a.kernel.config()?,
        lambda: a.lambda.unwrap_or(d.lambda),
        test_fraction: a.test_fraction.unwrap_or(d.test_fraction),
        lambda_sweep: a.lambda_sweep.clone().unwrap_or(d.lambda_sweep),
        max_test_error: a.max_test_error,
    };
    let (mut report, model) = run_rkhm_regression(&data, &cfg, ctx.seed)?;
    report.param("data", path.display().to_string());
    ctx.write_json("model.json", &model)?;
    Ok(report)
}

/// Dataset with the given targets in place of the original ones.
fn with_targets(data: &Dataset, algebra: &Algebra, targets: Vec<Vec<crate::algebra::Element>>) -> Result<Dataset> {
    Dataset::new(algebra.clone(), data.inputs().to_vec(), targets)
}

fn write_predictions(ctx: &Context, source: &Path, predictions: &Dataset) -> Result<()> {
    let format = DataFormat::from_path(source).unwrap_or(DataFormat::Json);
    let name = match format {
        DataFormat::Csv => "predictions.csv",
        DataFormat::Json => "predictions.json",
    };
    predictions.save(&ctx.path(name), Some(format))
}

fn rkhm_predict(a: RkhmPredictArgs, ctx: &Context) -> std::result::Result<ExperimentReport, Failure> {
    let model_path = required(&a.model, "model")?;
    let data_path = required(&a.data, "data")?;
    let model: RkhmRegressor = serde_json::from_str(&read(&model_path)?)?;
    let algebra = model.kernel.algebra().clone();
    let data = load(&data_path, Some(&algebra))?;
    let preds = data
        .inputs()
        .iter()
        .map(|x| Ok(vec![model.predict(x)?]))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ExperimentReport::new("rkhm-predict", ctx.seed);
    report.param("model", model_path.display().to_string());
    report.param("data", data_path.display().to_string());
    report.param("n", data.len());
    if data.output_dim() == 1 {
        let errs = preds
            .iter()
            .zip(data.targets())
            .map(|(p, t)| Ok(p[0].sub(&t[0])?.norm()))
            .collect::<Result<Vec<f64>>>()?;
        report.metric("error_max", errs.iter().copied().fold(0.0, f64::max));
        report.metric(
            "error_rms",
            (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt(),
        );
    }
    write_predictions(ctx, &data_path, &with_targets(&data, &algebra, preds)?)?;
    Ok(report.finish())
}

/// Weights from a single target column, or `1/n` each when unlabelled.
fn measure_from(data: &Dataset) -> Result<DiscreteAMeasure> {
    let weights = match data.output_dim() {
        0 => {
            let w = data
                .algebra()
                .identity()
                .scale(Complex64::new(1.0 / data.len() as f64, 0.0));
            vec![w; data.len()]
        }
        _ => data.single_targets()?,
    };
    DiscreteAMeasure::new(data.inputs().to_vec(), weights)
}

fn mmd_cmd(a: MmdArgs, ctx: &Context) -> std::result::Result<ExperimentReport, Failure> {
    let p_path = required(&a.first, "first")?;
    let q_path = required(&a.second, "second")?;
    let algebra = parse_algebra(&a.algebra)?;
    let p = load(&p_path, algebra.as_ref())?;
    let q = load(&q_path, Some(algebra.as_ref().unwrap_or(p.algebra())))?;
    if p.input_dim() != q.input_dim() {
        return Err(Error::shape(format!("{} inputs in both files", p.input_dim()), q.input_dim()).into());
    }
    let kernel = a.kernel.config()?.build(p.algebra(), p.input_dim())?;
    let result = mmd(&kernel, &measure_from(&p)?, &measure_from(&q)?)?;
    let mut report = ExperimentReport::new("mmd", ctx.seed);
    report.param("first", p_path.display().to_string());
    report.param("second", q_path.display().to_string());
    report.param("kernel", &kernel);
    report.metric("mmd", result.norm);
    report.metric("squared_norm", result.squared.norm());
    let positive = result.squared.is_positive(crate::algebra::DEFAULT_POSITIVITY_TOL);
    report.metric("squared_is_positive", if positive { 1.0 } else { 0.0 });
    report.require("squared_is_positive", Comparison::AtLeast, 1.0);
    ctx.write_json("mmd_squared.json", &result.squared)?;
    Ok(report.finish())
}

fn net_train(a: NetTrainArgs, ctx: &Context) -> std::result::Result<ExperimentReport, Failure> {
    let path = required(&a.data, "data")?;
    let data = load(&path, parse_algebra(&a.algebra)?.as_ref())?;
    if data.output_dim() == 0 {
        return Err(Error::invalid("training data needs target columns").into());
    }
    let init = match &a.init {
        Some(p) => serde_json::from_str::<CStarNet>(&read(p)?)?,
        None => {
            let hidden = a.hidden.clone().unwrap_or_else(|| vec![8]);
            let mut widths = vec![data.input_dim()];
            widths.extend(&hidden);
            widths.push(data.output_dim());
            let acts = match &a.activations {
                Some(names) => names
                    .iter()
                    .map(|n| n.parse::<Activation>())
                    .collect::<Result<Vec<_>>>()?,
                None => {
                    let mut acts = vec![Activation::Tanh; hidden.len()];
                    acts.push(Activation::Identity);
                    acts
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            CStarNet::random(data.algebra(), &widths, &acts, &mut rng)?
        }
    };
    if init.algebra() != data.algebra() {
        return Err(Error::DescriptorMismatch {
            left: init.algebra().to_string(),
            right: data.algebra().to_string(),
        }
        .into());
    }
    let cfg = TrainConfig {
        steps: a.steps.unwrap_or(500),
        step_size: a.step_size.unwrap_or(0.05),
    };
    let samples = data.net_samples()?;
    ctx.write_json("model_init.json", &init)?;
    let outcome = train(&init, &samples, cfg)?;
    ctx.write_json("model.json", &outcome.model)?;
    let mut trace = String::from("step,loss\n");
    for (i, l) in outcome.trace.iter().enumerate() {
        trace.push_str(&format!("{i},{l:?}\n"));
    }
    write_file(&ctx.path("loss_trace.csv"), &trace)?;

    let mut report = ExperimentReport::new("net-train", ctx.seed);
    report.param("data", path.display().to_string());
    report.param("algebra", data.algebra().to_string());
    report.param("widths", init.widths());
    report.param(
        "activations",
        init.layers()
            .iter()
            .map(|l| l.activation.to_string())
            .collect::<Vec<_>>(),
    );
    report.param("steps", cfg.steps);
    report.param("step_size", cfg.step_size);
    report.metric("initial_loss", outcome.trace.first().copied().unwrap_or(f64::NAN));
    report.metric("final_loss", outcome.trace.last().copied().unwrap_or(f64::NAN));
    report.metric("diverged", if outcome.diverged { 1.0 } else { 0.0 });
    report.require("diverged", Comparison::AtMost, 0.0);
    Ok(report.finish())
}

fn net_eval(a: NetEvalArgs, ctx: &Context) -> std::result::Result<ExperimentReport, Failure> {
    let model_path = required(&a.model, "model")?;
    let data_path = required(&a.data, "data")?;
    let net: CStarNet = serde_json::from_str(&read(&model_path)?)?;
    let data = load(&data_path, Some(net.algebra()))?;
    if data.input_dim() != net.input_dim() {
        return Err(Error::shape(format!("{} inputs", net.input_dim()), data.input_dim()).into());
    }
    let mut outputs = Vec::with_capacity(data.len());
    for x in data.inputs() {
        let values: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let input = ModuleVector::constant(net.algebra(), &values)?;
        outputs.push(net.forward(&input)?.into_entries());
    }
    let mut report = ExperimentReport::new("net-eval", ctx.seed);
    report.param("model", model_path.display().to_string());
    report.param("data", data_path.display().to_string());
    report.param("n", data.len());
    if data.output_dim() > 0 {
        report.metric("loss", loss(&net, &data.net_samples()?)?);
    }
    write_predictions(ctx, &data_path, &with_targets(&data, net.algebra(), outputs)?)?;
    Ok(report.finish())
}

fn measure_opt(a: MeasureOptArgs, ctx: &Context) -> std::result::Result<ExperimentReport, Failure> {
    let model_path = required(&a.model, "model")?;
    let data_path = required(&a.data, "data")?;
    let net: CStarNet = serde_json::from_str(&read(&model_path)?)?;
    let grid = net
        .algebra()
        .grid_weights()
        .ok_or_else(|| Error::Unsupported(format!("averaging needs a grid network, got {}", net.algebra())))?
        .len();
    let data = load(&data_path, Some(&Algebra::scalar()))?;
    let samples = data.measure_samples(net.algebra())?;
    let support = a.support.clone().unwrap_or_else(|| (0..grid).collect());
    let p0 = ProbabilityWeights::uniform(support)?;
    let steps = a.steps.unwrap_or(1000);
    let out = optimize_measure(&net, &samples, &p0, steps)?;
    ctx.write_json("weights.json", &out.weights)?;
    let mut report = ExperimentReport::new("measure-opt", ctx.seed);
    report.param("model", model_path.display().to_string());
    report.param("data", data_path.display().to_string());
    report.param("support", p0.support());
    report.param("steps", steps);
    report.metric("initial_objective", out.initial_objective);
    report.metric("objective", out.objective);
    report.metric("objective_decrease", out.initial_objective - out.objective);
    report.metric("simplex_defect", out.weights.simplex_defect());
    report.metric("step_size", out.step_size);
    report.require("objective_decrease", Comparison::AtLeast, 0.0);
    report.require("simplex_defect", Comparison::AtMost, 1e-12);
    Ok(report.finish())
}
