use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, ValueEnum};
use otfs::exact::{wasserstein_lp, CostSpec};
use otfs::io::{measure_from_pgm_path, read_csv_measure};
use otfs::measures::DiscreteMeasure;
use otfs::nfft_sinkhorn::{nfft_sinkhorn, NfftSinkhornConfig};
use otfs::sinkhorn::{sinkhorn_iterate, SinkhornOptions};
use otfs::util::MemoryLog;
use otfs::{Error, Result};

use crate::report::{InputSummary, MemoryReport, ResultSummary, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Exact,
    Sinkhorn,
    #[value(name = "nfft-sinkhorn")]
    NfftSinkhorn,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Sinkhorn => "sinkhorn",
            Method::NfftSinkhorn => "nfft-sinkhorn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct DistanceArgs {
    #[arg(long, value_enum, env = "OTFS_METHOD")]
    pub method: Method,

    /// First measure as CSV (columns x1..xD, optional named weight column).
    #[arg(long, env = "OTFS_A")]
    pub a: Option<PathBuf>,
    /// Second measure as CSV.
    #[arg(long, env = "OTFS_B")]
    pub b: Option<PathBuf>,
    /// First measure as a PGM image (P2 or P5).
    #[arg(long, env = "OTFS_IMAGE_A")]
    pub image_a: Option<PathBuf>,
    /// Second measure as a PGM image.
    #[arg(long, env = "OTFS_IMAGE_B")]
    pub image_b: Option<PathBuf>,

    /// Cost order (Euclidean distance to the power r).
    #[arg(long, default_value_t = 2.0, env = "OTFS_R")]
    pub r: f64,
    /// Entropic regularization strength.
    #[arg(long, default_value_t = 20.0, env = "OTFS_LAMBDA")]
    pub lambda: f64,
    /// l1 residual stopping tolerance of the Sinkhorn iteration.
    #[arg(long, default_value_t = 1e-9, env = "OTFS_EPS")]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000, env = "OTFS_MAX_ITER")]
    pub max_iter: usize,

    /// Fourier bandwidth per axis of the fast summation (default: 256 for
    /// D = 1, 2 and 64 for D = 3).
    #[arg(long, env = "OTFS_BANDWIDTH")]
    pub bandwidth: Option<usize>,
    /// NFFT window cutoff m.
    #[arg(long, default_value_t = 8, env = "OTFS_CUTOFF")]
    pub cutoff: usize,
    /// Two-point Taylor order p of the kernel regularization.
    #[arg(long, default_value_t = 10, env = "OTFS_TAYLOR_ORDER")]
    pub taylor_order: usize,

    #[arg(long, value_enum, default_value_t = Format::Json, env = "OTFS_FORMAT")]
    pub format: Format,
}

/// Loads one side of the pair from either a CSV cloud or a PGM image.
pub fn load_measure(
    csv: &Option<PathBuf>,
    image: &Option<PathBuf>,
    side: &str,
) -> Result<DiscreteMeasure<f64>> {
    match (csv, image) {
        (Some(path), None) => read_csv_measure(path),
        (None, Some(path)) => measure_from_pgm_path(path),
        (Some(_), Some(_)) => Err(Error::Domain(format!(
            "give measure {side} either as CSV or as image, not both"
        ))),
        (None, None) => Err(Error::Domain(format!(
            "measure {side} missing: use --{side} FILE.csv or --image-{side} FILE.pgm"
        ))),
    }
}

pub fn run(args: &DistanceArgs) -> Result<ExitCode> {
    let t0 = Instant::now();
    let a = load_measure(&args.a, &args.image_a, "a")?;
    let b = load_measure(&args.b, &args.image_b, "b")?;
    let load_ms = t0.elapsed().as_secs_f64() * 1e3;

    let mut timings = BTreeMap::new();
    timings.insert("load".to_string(), load_ms);

    let inputs = InputSummary {
        n: a.len(),
        n_tilde: b.len(),
        dim: a.dim(),
        r: args.r,
        lambda: (args.method != Method::Exact).then_some(args.lambda),
        eps: (args.method != Method::Exact).then_some(args.eps),
        max_iter: (args.method != Method::Exact).then_some(args.max_iter),
    };

    let solve_start = Instant::now();
    let (results, memory) = match args.method {
        Method::Exact => {
            let spec = CostSpec::new(args.r)?;
            let (d, plan) = wasserstein_lp(&a, &b, &spec)?;
            let mut log = MemoryLog::new();
            log.record(
                "cost_matrix",
                a.len() * b.len() * std::mem::size_of::<f64>(),
            );
            log.record(
                "transport_plan",
                std::mem::size_of_val(plan.entries()),
            );
            (
                ResultSummary {
                    distance: Some(d),
                    distance_pow: Some(d.powf(args.r)),
                    ..Default::default()
                },
                log,
            )
        }
        Method::Sinkhorn => {
            let options = SinkhornOptions {
                epsilon: args.eps,
                max_iter: args.max_iter,
                ..Default::default()
            };
            let res = sinkhorn_iterate(&a, &b, args.lambda, args.r, &options)?;
            (summarize(&res, args.r), res.memory)
        }
        Method::NfftSinkhorn => {
            let mut config = NfftSinkhornConfig::new(args.lambda, args.r);
            config.epsilon = args.eps;
            config.max_iter = args.max_iter;
            config.bandwidth = args.bandwidth;
            config.cutoff = args.cutoff;
            config.smoothness = args.taylor_order;
            let res = nfft_sinkhorn(&a, &b, &config)?;
            (summarize(&res, args.r), res.memory)
        }
    };
    timings.insert(
        "solve".to_string(),
        solve_start.elapsed().as_secs_f64() * 1e3,
    );
    timings.insert("total".to_string(), t0.elapsed().as_secs_f64() * 1e3);

    let report = RunReport {
        method: args.method.tag().to_string(),
        inputs,
        results,
        timings_ms: timings,
        memory: MemoryReport::from(&memory),
    };
    if !report.all_finite() {
        return Err(Error::Domain(
            "non-finite value in the run report".to_string(),
        ));
    }
    match args.format {
        Format::Json => println!("{}", report.to_json()),
        Format::Csv => println!("{}", report.to_csv()),
    }
    Ok(ExitCode::SUCCESS)
}

fn summarize(res: &otfs::sinkhorn::SinkhornResult<f64>, r: f64) -> ResultSummary {
    ResultSummary {
        lower: Some(res.lower),
        upper: Some(res.upper),
        upper_root: Some(res.upper.max(0.0).powf(1.0 / r)),
        dual: Some(res.dual),
        iterations: Some(res.iterations),
        residual: Some(res.residual),
        converged: Some(res.converged),
        ..Default::default()
    }
}
