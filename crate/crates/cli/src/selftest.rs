use std::process::ExitCode;

use clap::Args;
use otfs::exact::{wasserstein_lp, CostSpec};
use otfs::fastsum::{
    direct_sum, FastsumOperator, FastsumParams, KernelGeometry, KernelProfile, RegularizedKernel,
};
use otfs::nfft::{ndft_direct, NfftParams, NfftPlan, SpectralCoefficients};
use otfs::nfft_sinkhorn::{nfft_sinkhorn, NfftSinkhornConfig};
use otfs::sinkhorn::{sinkhorn_iterate, SinkhornOptions};
use otfs::nfft::Complex;
use otfs::Result;
use rand::prelude::*;

use crate::synth;

/// Desk-scale oracle suites: NFFT vs exact NDFT, fast summation vs direct
/// summation, dense vs NFFT Sinkhorn, and the divergence sandwich against
/// the exact LP. Prints one line per suite; nonzero exit on any failure.
#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 1, env = "OTFS_SEED")]
    pub seed: u64,
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            println!("selftest {name}: pass ({detail})");
        } else {
            println!("selftest {name}: FAIL ({detail})");
            self.failures += 1;
        }
    }
}

pub fn run(args: &SelftestArgs) -> Result<ExitCode> {
    let mut suite = Suite { failures: 0 };
    let mut rng = synth::rng(args.seed);

    // NFFT vs exact NDFT
    {
        let mut worst = 0.0f64;
        for dim in [1usize, 2] {
            let bands = vec![16usize; dim];
            let n_nodes = 40;
            let nodes: Vec<f64> = (0..n_nodes * dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let len: usize = bands.iter().product();
            let data: Vec<Complex<f64>> = (0..len)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let coeffs = SpectralCoefficients::from_vec(&bands, data)?;
            let plan = NfftPlan::new(dim, &bands, &nodes, NfftParams::default())?;
            let fast = plan.trafo(&coeffs)?;
            let exact = ndft_direct(&coeffs, dim, &nodes)?;
            let scale = exact.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let err = fast
                .iter()
                .zip(&exact)
                .map(|(f, e)| (f - e).norm())
                .fold(0.0, f64::max)
                / scale;
            worst = worst.max(err);
        }
        suite.check(
            "nfft-vs-ndft",
            worst <= 1e-10,
            format!("max rel err {worst:.2e}, tol 1e-10"),
        );
    }

    // fast summation vs direct summation
    {
        let geometry = KernelGeometry::<f64>::default_for_dim(2);
        let params = FastsumParams::default();
        let mut worst_r2 = 0.0f64;
        let mut worst_r1 = 0.0f64;
        for trial in 0..4 {
            let n = 80;
            let radius = geometry.support_radius / 2.0;
            let mut pts = |count: usize| -> Vec<f64> {
                let mut v = Vec::with_capacity(2 * count);
                while v.len() < 2 * count {
                    let x = rng.gen_range(-radius..radius);
                    let y = rng.gen_range(-radius..radius);
                    if (x * x + y * y).sqrt() <= radius {
                        v.push(x);
                        v.push(y);
                    }
                }
                v
            };
            let sources = pts(n);
            let targets = pts(n);
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let lambda = 5.0 + 10.0 * trial as f64;
            for r in [2.0f64, 1.0] {
                let profile = KernelProfile::for_order(lambda, r, false)?;
                let kernel = RegularizedKernel::build(profile, geometry, 2, &params)?;
                let op = FastsumOperator::new(2, &sources, &targets, geometry, &params)?;
                let fast = op.apply(&kernel, &weights)?;
                let exact = direct_sum(&profile, 2, &sources, &weights, &targets, 1 << 22)?;
                let scale = exact.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
                let err = fast
                    .iter()
                    .zip(&exact)
                    .fold(0.0f64, |m, (&f, &e)| m.max((f - e).abs()))
                    / scale;
                if r == 2.0 {
                    worst_r2 = worst_r2.max(err);
                } else {
                    worst_r1 = worst_r1.max(err);
                }
            }
        }
        suite.check(
            "fastsum-vs-direct",
            worst_r2 <= 1e-9 && worst_r1 <= 1e-6,
            format!("max rel err r=2: {worst_r2:.2e} (tol 1e-9), r=1: {worst_r1:.2e} (tol 1e-6)"),
        );
    }

    // dense vs NFFT Sinkhorn
    {
        let a = synth::weighted_cloud(&mut rng, 80, 2);
        let b = synth::weighted_cloud(&mut rng, 70, 2);
        let lambda = 15.0;
        let dense = sinkhorn_iterate(&a, &b, lambda, 2.0, &SinkhornOptions::default())?;
        let fast = nfft_sinkhorn(&a, &b, &NfftSinkhornConfig::new(lambda, 2.0))?;
        let dl = (dense.lower - fast.lower).abs();
        let du = (dense.upper - fast.upper).abs();
        suite.check(
            "dense-vs-nfft-sinkhorn",
            dl <= 1e-8 && du <= 1e-8,
            format!("|lower gap| {dl:.2e}, |upper gap| {du:.2e}, tol 1e-8"),
        );
    }

    // sandwich bounds against the exact LP
    {
        let mut ok = true;
        let mut detail = String::new();
        for trial in 0..3 {
            let a = synth::weighted_cloud(&mut rng, 30 + 5 * trial, 2);
            let b = synth::weighted_cloud(&mut rng, 25 + 5 * trial, 2);
            let eps_quality = 0.1;
            let lambda = (a.entropy() + b.entropy()) / eps_quality;
            let spec = CostSpec::new(2.0)?;
            let (d, _) = wasserstein_lp(&a, &b, &spec)?;
            let exact_pow = d * d;
            let options = SinkhornOptions {
                epsilon: 1e-12,
                max_iter: 200_000,
                ..Default::default()
            };
            let res = sinkhorn_iterate(&a, &b, lambda, 2.0, &options)?;
            let pass = res.lower <= exact_pow + 1e-7 && exact_pow <= res.upper + eps_quality + 1e-7;
            if !pass {
                ok = false;
            }
            detail = format!(
                "lower {:.6} <= d^r {:.6} <= upper {:.6} + eps {eps_quality}",
                res.lower, exact_pow, res.upper
            );
        }
        suite.check("sandwich-bounds", ok, detail);
    }

    if suite.failures == 0 {
        println!("selftest: all suites passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("selftest: {} suite(s) FAILED", suite.failures);
        Ok(ExitCode::FAILURE)
    }
}
