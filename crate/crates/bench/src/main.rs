use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ilaplace::models::ModelParams;
use ilaplace::{EngineOptions, PermutationChoice, Strategy};
use ilaplace_bench::{
    cmd_approx, cmd_bench_gompertz, cmd_bench_skewt, BenchError, BenchResult, GompertzBench,
    Method, SkewtGrid,
};

#[derive(Parser)]
#[command(name = "ilaplace-bench", version, about = "Improved Laplace approximation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate log ∫ exp(-h) for one registered model; prints one JSON line.
    Approx(ApproxArgs),
    /// Skew-t normalizing constants over a grid of dimensions and degrees of freedom.
    BenchSkewt(SkewtArgs),
    /// Relative errors and convergence slopes on Gompertz posteriors.
    BenchGompertz(GompertzArgs),
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Worker threads.
    #[arg(long, env = "ILAPLACE_THREADS", default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = ilaplace::quad::DEFAULT_REL_TOL)]
    quad_rel_tol: f64,
    #[arg(long, default_value_t = ilaplace::optimize::DEFAULT_GRAD_TOL)]
    grad_tol: f64,
    /// identity, auto, or a 1-based comma list such as 3,1,2.
    #[arg(long, default_value = "identity")]
    permutation: String,
    /// exact or approx.
    #[arg(long, default_value = "exact")]
    strategy: String,
}

impl EngineArgs {
    fn options(&self) -> BenchResult<EngineOptions> {
        let strategy: Strategy = self.strategy.parse()?;
        let permutation: PermutationChoice = self.permutation.parse()?;
        let mut opts = EngineOptions::default()
            .with_strategy(strategy)
            .with_permutation(permutation)
            .with_parallelism(self.threads);
        opts.quad_rel_tol = self.quad_rel_tol;
        opts.opt_grad_tol = self.grad_tol;
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Args)]
struct ApproxArgs {
    /// gaussian, quadratic, skew-t, gompertz-posterior or glmm-binary.
    #[arg(long)]
    model: String,
    /// laplace, ilaplace (same as ilaplace-exact), ilaplace-exact, ilaplace-approx or bruteforce.
    #[arg(long, default_value = "ilaplace-exact")]
    method: String,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model parameter as key=value; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Also append the JSON line to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct SkewtArgs {
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10, 20, 50])]
    dims: Vec<usize>,
    /// Comma-separated degrees of freedom.
    #[arg(long, value_delimiter = ',', default_values_t = [3.0f64, 5.0, 10.0, 20.0])]
    nus: Vec<f64>,
    /// Scenarios as a:c pairs, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = ["1.5:1.5".to_string(), "12:0.5".to_string()])]
    scenarios: Vec<String>,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_values_t = ["laplace".to_string(), "ilaplace-exact".to_string(), "ilaplace-approx".to_string()])]
    methods: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct GompertzArgs {
    #[arg(long, default_value_t = 20)]
    n_start: usize,
    /// Number of sample sizes.
    #[arg(long, default_value_t = 15)]
    steps: usize,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

fn parse_params(raw: &[String]) -> BenchResult<ModelParams> {
    raw.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| BenchError::Usage(format!("expected key=value, got `{kv}`")))
        })
        .collect()
}

fn parse_scenario(s: &str) -> BenchResult<(f64, f64)> {
    let bad = || BenchError::Usage(format!("expected a:c, got `{s}`"));
    let (a, c) = s.split_once(':').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

fn approx(args: ApproxArgs) -> BenchResult<()> {
    let opts = args.engine.options()?;
    let method: Method = args.method.parse()?;
    let mut params = parse_params(&args.params)?;
    if let Some(d) = args.dim {
        params.insert("dim".into(), d.to_string());
    }
    if let Some(s) = args.seed {
        params.insert("seed".into(), s.to_string());
    }
    let record = cmd_approx(&args.model, &params, method, &opts)?;
    let line = record.to_json_line()?;
    println!("{line}");
    if let Some(path) = args.out {
        use std::io::Write;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        writeln!(f, "{line}")?;
    }
    Ok(())
}

fn bench_skewt(args: SkewtArgs) -> BenchResult<()> {
    let opts = args.engine.options()?;
    let grid = SkewtGrid {
        dims: args.dims,
        nus: args.nus,
        scenarios: args
            .scenarios
            .iter()
            .map(|s| parse_scenario(s))
            .collect::<BenchResult<_>>()?,
        methods: args
            .methods
            .iter()
            .map(|m| m.parse())
            .collect::<BenchResult<_>>()?,
    };
    let rows = cmd_bench_skewt(&grid, &opts, Some(&args.out))?;
    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    eprintln!("{} rows written to {} ({failed} failed)", rows.len(), args.out.display());
    Ok(())
}

fn bench_gompertz(args: GompertzArgs) -> BenchResult<()> {
    let opts = args.engine.options()?;
    let cfg = GompertzBench {
        n_start: args.n_start,
        steps: args.steps,
        reps: args.reps,
        seed: args.seed,
        ..GompertzBench::default()
    };
    let report = cmd_bench_gompertz(&cfg, &opts, Some(&args.out))?;
    for s in &report.slopes {
        match s.slope {
            Some(v) => eprintln!("{}: slope {v:.3} over {} sizes", s.method, s.sizes_used),
            None => eprintln!("{}: slope undefined ({} sizes)", s.method, s.sizes_used),
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Approx(a) => approx(a),
        Command::BenchSkewt(a) => bench_skewt(a),
        Command::BenchGompertz(a) => bench_gompertz(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
