use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use otfs::exact::{wasserstein_lp, CostSpec, DEFAULT_LP_ENTRY_CAP};
use otfs::nfft_sinkhorn::{nfft_sinkhorn, NfftSinkhornConfig};
use otfs::Result;

use crate::distance::load_measure;
use crate::synth;

/// Sweep the regularization strength and emit one CSV row per lambda:
/// `lambda,lower,upper,exact`. The exact column is filled by the LP
/// solver when the instance fits under its entry cap and left empty
/// otherwise.
#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated list of lambdas.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "5,10,15,20,25",
        env = "OTFS_LAMBDAS"
    )]
    pub lambdas: Vec<f64>,

    #[arg(long, env = "OTFS_A")]
    pub a: Option<PathBuf>,
    #[arg(long, env = "OTFS_B")]
    pub b: Option<PathBuf>,
    #[arg(long, env = "OTFS_IMAGE_A")]
    pub image_a: Option<PathBuf>,
    #[arg(long, env = "OTFS_IMAGE_B")]
    pub image_b: Option<PathBuf>,

    /// Synthetic fallback when no files are given: two uniform clouds of
    /// this many points.
    #[arg(long, default_value_t = 1000, env = "OTFS_N")]
    pub n: usize,
    /// Dimension of the synthetic clouds.
    #[arg(long, default_value_t = 2, env = "OTFS_DIM")]
    pub dim: usize,
    #[arg(long, default_value_t = 7, env = "OTFS_SEED")]
    pub seed: u64,

    #[arg(long, default_value_t = 2.0, env = "OTFS_R")]
    pub r: f64,
    #[arg(long, default_value_t = 1e-9, env = "OTFS_EPS")]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000, env = "OTFS_MAX_ITER")]
    pub max_iter: usize,
    #[arg(long, env = "OTFS_BANDWIDTH")]
    pub bandwidth: Option<usize>,
}

pub fn run(args: &SweepArgs) -> Result<ExitCode> {
    let from_files =
        args.a.is_some() || args.b.is_some() || args.image_a.is_some() || args.image_b.is_some();
    let (a, b) = if from_files {
        (
            load_measure(&args.a, &args.image_a, "a")?,
            load_measure(&args.b, &args.image_b, "b")?,
        )
    } else {
        let mut rng = synth::rng(args.seed);
        (
            synth::uniform_cloud(&mut rng, args.n, args.dim),
            synth::uniform_cloud(&mut rng, args.n, args.dim),
        )
    };

    // d_r does not depend on lambda; compute the exact column once.
    let exact = if a.len().saturating_mul(b.len()) <= DEFAULT_LP_ENTRY_CAP {
        let spec = CostSpec::new(args.r)?;
        let (d, _) = wasserstein_lp(&a, &b, &spec)?;
        Some(d.powf(args.r))
    } else {
        None
    };

    println!("lambda,lower,upper,exact");
    for &lambda in &args.lambdas {
        let mut config = NfftSinkhornConfig::new(lambda, args.r);
        config.epsilon = args.eps;
        config.max_iter = args.max_iter;
        config.bandwidth = args.bandwidth;
        let res = nfft_sinkhorn(&a, &b, &config)?;
        let exact_field = exact.map(|e| format!("{e:.12e}")).unwrap_or_default();
        println!(
            "{lambda},{:.12e},{:.12e},{exact_field}",
            res.lower, res.upper
        );
    }
    Ok(ExitCode::SUCCESS)
}
