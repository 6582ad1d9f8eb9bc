use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use ilaplace::models::{build_model, ModelParams};
use ilaplace::{improved_laplace, minimize, standard_laplace, EngineOptions, Objective};

use crate::bruteforce::brute_force_integral;
use crate::error::{BenchError, BenchResult};
use crate::record::{Method, RunRecord};

/// Evaluation ceiling for the cubature oracle, far above the engine's.
const ORACLE_MAX_EVALS: u64 = 1 << 40;

/// `log I` by `method`, plus the re-normalization constants when the method
/// produces them.
pub fn run_method(
    obj: &Objective,
    start: &[f64],
    method: Method,
    opts: &EngineOptions,
) -> ilaplace::Result<(f64, Vec<f64>)> {
    match method {
        Method::Laplace => Ok((standard_laplace(obj, start, opts)?.log_i, Vec::new())),
        Method::IlaplaceExact | Method::IlaplaceApprox => {
            let mut o = opts.clone();
            o.strategy = method.strategy().expect("ilaplace methods carry a strategy");
            let r = improved_laplace(obj, start, &o)?;
            Ok((r.log_i_il, r.log_c_q))
        }
        Method::Bruteforce => {
            let obj = obj.clone().with_budget(ORACLE_MAX_EVALS);
            let mode = minimize(&obj, start, opts.opt_grad_tol, opts.max_iter)?;
            Ok((brute_force_integral(&obj, &mode, opts.quad_rel_tol)?, Vec::new()))
        }
    }
}

fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

fn thread_pool(threads: usize) -> BenchResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| BenchError::Usage(format!("cannot build thread pool: {e}")))
}

/// Runs one model/method combination and returns its record.
pub fn cmd_approx(
    model: &str,
    params: &ModelParams,
    method: Method,
    opts: &EngineOptions,
) -> BenchResult<RunRecord> {
    let m = build_model(model, params)?;
    let t = Instant::now();
    let (log_i, log_c_q) = run_method(&m.objective, &m.start, method, opts)?;
    let seed = m.params.get("seed").and_then(|s| s.parse().ok());
    Ok(RunRecord {
        model: m.name,
        params: m.params,
        method,
        log_i,
        log_c_q,
        log_truth: m.log_truth,
        wall_time_ms: elapsed_ms(t),
        seed,
        quad_rel_tol: opts.quad_rel_tol,
        grad_tol: opts.opt_grad_tol,
        permutation: opts.permutation.to_string(),
        threads: opts.parallelism,
    })
}

/// Repeats the run described by `record`.
pub fn rerun(record: &RunRecord, opts: &EngineOptions) -> BenchResult<RunRecord> {
    let mut o = opts.clone();
    o.quad_rel_tol = record.quad_rel_tol;
    o.opt_grad_tol = record.grad_tol;
    o.permutation = record.permutation.parse()?;
    o.parallelism = record.threads;
    cmd_approx(&record.model, &record.params, record.method, &o)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.csv"))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> BenchResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Grid for the skew-t normalizing-constant sweep.
#[derive(Debug, Clone)]
pub struct SkewtGrid {
    pub dims: Vec<usize>,
    pub nus: Vec<f64>,
    /// `(a, c)` pairs.
    pub scenarios: Vec<(f64, f64)>,
    pub methods: Vec<Method>,
}

impl Default for SkewtGrid {
    fn default() -> Self {
        Self {
            dims: vec![2, 5, 10, 20, 50],
            nus: vec![3.0, 5.0, 10.0, 20.0],
            scenarios: vec![(1.5, 1.5), (12.0, 0.5)],
            methods: vec![Method::Laplace, Method::IlaplaceExact, Method::IlaplaceApprox],
        }
    }
}

/// One cell of the skew-t sweep. Column order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewtRow {
    pub a: f64,
    pub c: f64,
    pub d: usize,
    pub nu: f64,
    pub method: Method,
    pub log_i: Option<f64>,
    pub log_truth: f64,
    pub abs_log_error: Option<f64>,
    pub wall_time_ms: u64,
    pub error: String,
}

/// Approximates the log normalizing constant (truth 0) of the skew-t on
/// every grid cell. Rows are ordered by scenario, then `d`, `ν`, method.
/// Failed cells carry the message in `error` instead of aborting the sweep.
pub fn cmd_bench_skewt(
    grid: &SkewtGrid,
    opts: &EngineOptions,
    out: Option<&Path>,
) -> BenchResult<Vec<SkewtRow>> {
    if grid.dims.is_empty() || grid.nus.is_empty() || grid.scenarios.is_empty() {
        return Err(BenchError::Usage("skew-t grid must be non-empty".into()));
    }
    let mut cells = Vec::new();
    for &(a, c) in &grid.scenarios {
        for &d in &grid.dims {
            for &nu in &grid.nus {
                for &method in &grid.methods {
                    cells.push((a, c, d, nu, method));
                }
            }
        }
    }
    let cell_opts = opts.clone().with_parallelism(1);
    let rows: Vec<SkewtRow> = thread_pool(opts.parallelism)?.install(|| {
        cells
            .par_iter()
            .map(|&(a, c, d, nu, method)| {
                let params: ModelParams = [
                    ("dim", d.to_string()),
                    ("a", a.to_string()),
                    ("c", c.to_string()),
                    ("nu", nu.to_string()),
                ]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
                let t = Instant::now();
                let outcome = build_model("skew-t", &params)
                    .and_then(|m| run_method(&m.objective, &m.start, method, &cell_opts));
                let (log_i, error) = match outcome {
                    Ok((v, _)) => (Some(v), String::new()),
                    Err(e) => (None, e.to_string()),
                };
                SkewtRow {
                    a,
                    c,
                    d,
                    nu,
                    method,
                    log_i,
                    log_truth: 0.0,
                    abs_log_error: log_i.map(f64::abs),
                    wall_time_ms: elapsed_ms(t),
                    error,
                }
            })
            .collect()
    });
    if let Some(path) = out {
        write_csv(path, &rows)?;
    }
    Ok(rows)
}

/// Convergence experiment on Gompertz posteriors of growing sample size.
#[derive(Debug, Clone)]
pub struct GompertzBench {
    pub n_start: usize,
    pub steps: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for GompertzBench {
    fn default() -> Self {
        Self {
            n_start: 20,
            steps: 15,
            reps: 20,
            seed: 1,
            alpha: 2.0,
            beta: 3.0,
        }
    }
}

/// `n_0 = n_start`, `n_i = ceil(n_{i-1} + 1.2 sqrt(n_{i-1}))`; `steps`
/// sizes in total.
pub fn sample_sizes(n_start: usize, steps: usize) -> Vec<usize> {
    let mut sizes = Vec::with_capacity(steps);
    let mut n = n_start;
    for _ in 0..steps {
        sizes.push(n);
        n = (n as f64 + 1.2 * (n as f64).sqrt()).ceil() as usize;
    }
    sizes
}

/// Seed of the dataset for sample-size index `step` and replicate `rep`.
pub fn cell_seed(seed: u64, step: usize, rep: usize) -> u64 {
    seed.wrapping_mul(1_000_000)
        .wrapping_add(step as u64 * 1_000)
        .wrapping_add(rep as u64)
}

/// One (dataset, method) cell. Column order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GompertzRow {
    pub step: usize,
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub method: Method,
    pub log_i: Option<f64>,
    pub log_truth: Option<f64>,
    /// `|I^/I - 1|`; empty for the reference method itself.
    pub rel_error: Option<f64>,
    pub wall_time_ms: u64,
    pub error: String,
}

/// Least-squares fit of `log(mean relative error)` on `log n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeRow {
    pub method: Method,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Sample sizes with at least one successful cell.
    pub sizes_used: usize,
    /// Successful cells entering the fit.
    pub cells_used: usize,
}

#[derive(Debug, Clone)]
pub struct GompertzReport {
    pub rows: Vec<GompertzRow>,
    pub slopes: Vec<SlopeRow>,
}

impl GompertzReport {
    pub fn slope(&self, method: Method) -> Option<f64> {
        self.slopes
            .iter()
            .find(|s| s.method == method)
            .and_then(|s| s.slope)
    }
}

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

fn fit_slope(rows: &[GompertzRow], method: Method) -> SlopeRow {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.method == method) {
        if let Some(e) = r.rel_error {
            by_n.entry(r.n).or_default().push(e);
        }
    }
    let cells_used = by_n.values().map(Vec::len).sum();
    let points: Vec<(f64, f64)> = by_n
        .iter()
        .filter_map(|(&n, errs)| {
            let mean = errs.iter().sum::<f64>() / errs.len() as f64;
            (mean > 0.0).then(|| ((n as f64).ln(), mean.ln()))
        })
        .collect();
    let fit = least_squares(&points);
    SlopeRow {
        method,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        sizes_used: points.len(),
        cells_used,
    }
}

/// For every sample size and replicate, draws a Gompertz dataset, computes
/// the log posterior normalizing constant by standard and improved Laplace
/// and by cubature, and reports relative errors and convergence slopes.
///
/// With `out`, rows go to `out` and slopes to `<out stem>_slopes.csv`.
pub fn cmd_bench_gompertz(
    cfg: &GompertzBench,
    opts: &EngineOptions,
    out: Option<&Path>,
) -> BenchResult<GompertzReport> {
    if cfg.n_start < 2 || cfg.reps == 0 || cfg.steps == 0 {
        return Err(BenchError::Usage(
            "gompertz benchmark needs n_start >= 2, steps >= 1 and reps >= 1".into(),
        ));
    }
    let sizes = sample_sizes(cfg.n_start, cfg.steps);
    let cells: Vec<(usize, usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(step, &n)| (0..cfg.reps).map(move |rep| (step, n, rep)))
        .collect();
    let cell_opts = opts.clone().with_parallelism(1);
    let per_cell: Vec<Vec<GompertzRow>> = thread_pool(opts.parallelism)?.install(|| {
        cells
            .par_iter()
            .map(|&(step, n, rep)| gompertz_cell(cfg, &cell_opts, step, n, rep))
            .collect()
    });
    let rows: Vec<GompertzRow> = per_cell.into_iter().flatten().collect();
    let slopes = vec![
        fit_slope(&rows, Method::Laplace),
        fit_slope(&rows, Method::IlaplaceExact),
    ];
    if let Some(path) = out {
        write_csv(path, &rows)?;
        write_csv(&with_suffix(path, "_slopes"), &slopes)?;
    }
    Ok(GompertzReport { rows, slopes })
}

fn gompertz_cell(
    cfg: &GompertzBench,
    opts: &EngineOptions,
    step: usize,
    n: usize,
    rep: usize,
) -> Vec<GompertzRow> {
    let seed = cell_seed(cfg.seed, step, rep);
    let params: ModelParams = [
        ("n", n.to_string()),
        ("alpha", cfg.alpha.to_string()),
        ("beta", cfg.beta.to_string()),
        ("seed", seed.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let model = build_model("gompertz-posterior", &params);

    let run = |method: Method| {
        let t = Instant::now();
        let outcome = model
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|m| run_method(&m.objective, &m.start, method, opts));
        (outcome.map(|(v, _)| v), elapsed_ms(t))
    };
    let truth = run(Method::Bruteforce);
    let truth_value = truth.0.as_ref().ok().copied();

    let row = |method: Method, res: (ilaplace::Result<f64>, u64)| {
        let (value, ms) = res;
        let (log_i, error) = match value {
            Ok(v) => (Some(v), String::new()),
            Err(e) => (None, e.to_string()),
        };
        let rel_error = match (method, log_i, truth_value) {
            (Method::Bruteforce, _, _) => None,
            (_, Some(v), Some(t)) => Some((v - t).exp_m1().abs()),
            _ => None,
        };
        GompertzRow {
            step,
            n,
            rep,
            seed,
            method,
            log_i,
            log_truth: truth_value,
            rel_error,
            wall_time_ms: ms,
            error,
        }
    };
    let laplace = run(Method::Laplace);
    let ilaplace = run(Method::IlaplaceExact);
    vec![
        row(Method::Laplace, laplace),
        row(Method::IlaplaceExact, ilaplace),
        row(Method::Bruteforce, truth),
    ]
}
