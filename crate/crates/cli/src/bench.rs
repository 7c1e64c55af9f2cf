use std::process::ExitCode;
use std::time::Instant;

use clap::Args;
use otfs::measures::DiscreteMeasure;
use otfs::nfft_sinkhorn::{nfft_sinkhorn, NfftSinkhornConfig};
use otfs::sinkhorn::{sinkhorn_iterate, SinkhornOptions, DEFAULT_DENSE_ENTRY_CAP};
use otfs::{Error, Result};

use crate::synth;

/// Timing/memory scaling over synthetic instance sizes. One CSV row per
/// (size, method): `n,method,wall_ms,peak_bytes,status`. Dense methods
/// above the kernel entry cap are recorded as `skipped: cap` instead of
/// being run.
#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated instance sizes.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1000,10000",
        env = "OTFS_SIZES"
    )]
    pub sizes: Vec<usize>,

    /// 1: quantile quantizer vs empirical measure on the line;
    /// 2: two uniform clouds on the unit square.
    #[arg(long, default_value_t = 1, env = "OTFS_DIM")]
    pub dim: usize,

    #[arg(long, default_value_t = 2.0, env = "OTFS_R")]
    pub r: f64,
    #[arg(long, default_value_t = 20.0, env = "OTFS_LAMBDA")]
    pub lambda: f64,
    #[arg(long, default_value_t = 1e-9, env = "OTFS_EPS")]
    pub eps: f64,
    /// Iteration budget per run; benchmarks compare fixed work, not
    /// convergence luck.
    #[arg(long, default_value_t = 50, env = "OTFS_MAX_ITER")]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1, env = "OTFS_SEED")]
    pub seed: u64,
    #[arg(long, env = "OTFS_BANDWIDTH")]
    pub bandwidth: Option<usize>,
    /// Also run the exact LP solver where it fits under its cap.
    #[arg(long, default_value_t = false)]
    pub with_exact: bool,
}

fn instance(
    seed: u64,
    n: usize,
    dim: usize,
) -> Result<(DiscreteMeasure<f64>, DiscreteMeasure<f64>)> {
    let mut rng = synth::rng(seed);
    match dim {
        1 => Ok(synth::quantizer_vs_empirical(&mut rng, n)),
        2 => Ok((
            synth::uniform_cloud(&mut rng, n, 2),
            synth::uniform_cloud(&mut rng, n, 2),
        )),
        other => Err(Error::Dimension(format!(
            "bench generates dimensions 1 and 2, got {other}"
        ))),
    }
}

pub fn run(args: &BenchArgs) -> Result<ExitCode> {
    println!("n,method,wall_ms,peak_bytes,status");
    for &n in &args.sizes {
        let (a, b) = instance(args.seed, n, args.dim)?;

        if args.with_exact {
            let spec = otfs::exact::CostSpec::new(args.r)?;
            if a.len().saturating_mul(b.len()) <= spec.entry_cap {
                let start = Instant::now();
                let (_d, plan) = otfs::exact::wasserstein_lp(&a, &b, &spec)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                let bytes = 2 * plan.entries().len() * std::mem::size_of::<f64>();
                println!("{n},exact,{ms:.3},{bytes},ok");
            } else {
                println!("{n},exact,,,skipped: cap");
            }
        }

        if a.len().saturating_mul(b.len()) <= DEFAULT_DENSE_ENTRY_CAP {
            let options = SinkhornOptions {
                epsilon: args.eps,
                max_iter: args.max_iter,
                ..Default::default()
            };
            let start = Instant::now();
            let res = sinkhorn_iterate(&a, &b, args.lambda, args.r, &options)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            println!("{n},sinkhorn,{ms:.3},{},ok", res.memory.peak_bytes());
        } else {
            println!("{n},sinkhorn,,,skipped: cap");
        }

        let mut config = NfftSinkhornConfig::new(args.lambda, args.r);
        config.epsilon = args.eps;
        config.max_iter = args.max_iter;
        config.bandwidth = args.bandwidth;
        let start = Instant::now();
        let res = nfft_sinkhorn(&a, &b, &config)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        println!("{n},nfft-sinkhorn,{ms:.3},{},ok", res.memory.peak_bytes());
    }
    Ok(ExitCode::SUCCESS)
}
