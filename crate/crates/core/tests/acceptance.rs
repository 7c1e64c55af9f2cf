//! Acceptance suite: every numbered criterion below prints one pass/fail
//! line and asserts it. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use otfs::exact::{wasserstein_lp, CostSpec};
use otfs::fastsum::{
    direct_sum, FastsumOperator, FastsumParams, KernelGeometry, KernelProfile, RegularizedKernel,
};
use otfs::measures::{measure_from_image, DiscreteMeasure, GrayscaleImage};
use otfs::nfft::{ndft_adjoint_direct, ndft_direct, Complex, NfftParams, NfftPlan, SpectralCoefficients};
use otfs::nfft_sinkhorn::{nfft_sinkhorn, NfftSinkhornConfig};
use otfs::sinkhorn::{
    convergence_diagnostics, sinkhorn_iterate, SinkhornOptions,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn report(id: &str, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "pass" } else { "FAIL" };
    println!("ACCEPTANCE {id} {name}: {verdict} ({detail})");
    assert!(pass, "{id} {name}: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn weighted_cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> DiscreteMeasure<f64> {
    let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(0.0..1.0)).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    DiscreteMeasure::new(dim, coords, weights).unwrap()
}

fn ball_points(rng: &mut ChaCha8Rng, n: usize, dim: usize, radius: f64) -> Vec<f64> {
    let mut pts = Vec::with_capacity(n * dim);
    while pts.len() < n * dim {
        let cand: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..radius)).collect();
        if cand.iter().map(|c| c * c).sum::<f64>().sqrt() <= radius {
            pts.extend(cand);
        }
    }
    pts
}

fn random_image_measure(rng: &mut ChaCha8Rng, side: usize) -> DiscreteMeasure<f64> {
    let pixels: Vec<f64> = (0..side * side).map(|_| rng.gen_range(0.05..1.0)).collect();
    let img = GrayscaleImage::new(side, side, pixels).unwrap();
    measure_from_image(&img).unwrap()
}

/// Criterion 1: NFFT against the exact NDFT, 50 random configurations,
/// both directions, relative max error <= 1e-10 at the defaults.
#[test]
fn accept_01_nfft_oracle() {
    let start = Instant::now();
    let mut rng = rng(101);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let dim = if rng.gen_bool(0.5) { 1 } else { 2 };
        // window support 2m+2 = 18 needs sigma N >= 18
        let bands: Vec<usize> = (0..dim).map(|_| 2 * rng.gen_range(5..=16)).collect();
        let n_nodes = rng.gen_range(1..=if dim == 1 { 128 } else { 64 });
        let nodes: Vec<f64> = (0..n_nodes * dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let len: usize = bands.iter().product();
        let coeffs = SpectralCoefficients::from_vec(
            &bands,
            (0..len)
                .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let plan = NfftPlan::new(dim, &bands, &nodes, NfftParams::default()).unwrap();

        let fast = plan.trafo(&coeffs).unwrap();
        let exact = ndft_direct(&coeffs, dim, &nodes).unwrap();
        let scale = exact.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = fast
            .iter()
            .zip(&exact)
            .map(|(f, e)| (f - e).norm())
            .fold(0.0, f64::max)
            / scale;
        worst = worst.max(err);

        let values: Vec<Complex<f64>> = (0..n_nodes)
            .map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let fast_adj = plan.adjoint(&values).unwrap();
        let exact_adj = ndft_adjoint_direct(&values, dim, &nodes, &bands).unwrap();
        let scale = exact_adj.data().iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = fast_adj
            .data()
            .iter()
            .zip(exact_adj.data())
            .map(|(f, e)| (f - e).norm())
            .fold(0.0, f64::max)
            / scale;
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "01",
        "nfft-oracle",
        worst <= 1e-10 && secs < 10.0,
        &format!("max rel err {worst:.2e} <= 1e-10 over 50 configs, {secs:.1} s < 10 s"),
    );
}

/// Criterion 2: fast summation against direct summation, 200 random
/// instances across r = 2 (tol 1e-9) and r = 1 with nearfield (tol 1e-6).
#[test]
fn accept_02_fastsum_oracle() {
    let start = Instant::now();
    let mut rng = rng(202);
    let params = FastsumParams::default();
    let mut worst_r2 = 0.0f64;
    let mut worst_r1 = 0.0f64;
    for trial in 0..200 {
        let r = if trial % 2 == 0 { 2.0 } else { 1.0 };
        let dim = if rng.gen_bool(0.5) { 1 } else { 2 };
        let geometry = KernelGeometry::<f64>::default_for_dim(dim);
        let lambda = rng.gen_range(1.0..=50.0);
        let n = rng.gen_range(8..=256);
        let m = rng.gen_range(8..=256);
        let radius = geometry.support_radius / 2.0;
        let sources = ball_points(&mut rng, m, dim, radius);
        let targets = ball_points(&mut rng, n, dim, radius);
        let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();

        let profile = KernelProfile::for_order(lambda, r, false).unwrap();
        let kernel = RegularizedKernel::build(profile, geometry, dim, &params).unwrap();
        let op = FastsumOperator::new(dim, &sources, &targets, geometry, &params).unwrap();
        let fast = op.apply(&kernel, &weights).unwrap();
        let exact = direct_sum(&profile, dim, &sources, &weights, &targets, 1 << 22).unwrap();
        let scale = exact.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
        let err = fast
            .iter()
            .zip(&exact)
            .fold(0.0f64, |acc, (&f, &d)| acc.max((f - d).abs()))
            / scale;
        if r == 2.0 {
            worst_r2 = worst_r2.max(err);
        } else {
            worst_r1 = worst_r1.max(err);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "02",
        "fastsum-oracle",
        worst_r2 <= 1e-9 && worst_r1 <= 1e-6 && secs < 60.0,
        &format!(
            "max rel err r=2 {worst_r2:.2e} <= 1e-9, r=1 {worst_r1:.2e} <= 1e-6, 200 instances, {secs:.1} s < 60 s"
        ),
    );
}

/// Criterion 3: dense and NFFT Sinkhorn agree to 1e-8 on both divergences
/// at n = n-tilde = 1024 (synthetic 32x32 images and 2-D clouds).
#[test]
fn accept_03_dense_nfft_agreement() {
    let start = Instant::now();
    let mut rng = rng(303);
    let lambda = 20.0;
    let mut worst_lower = 0.0f64;
    let mut worst_upper = 0.0f64;
    for trial in 0..20 {
        let (a, b) = if trial % 2 == 0 {
            (
                random_image_measure(&mut rng, 32),
                random_image_measure(&mut rng, 32),
            )
        } else {
            (
                weighted_cloud(&mut rng, 1024, 2),
                weighted_cloud(&mut rng, 1024, 2),
            )
        };
        let options = SinkhornOptions {
            epsilon: 1e-10,
            ..Default::default()
        };
        let dense = sinkhorn_iterate(&a, &b, lambda, 2.0, &options).unwrap();
        let mut config = NfftSinkhornConfig::new(lambda, 2.0);
        config.epsilon = 1e-10;
        let fast = nfft_sinkhorn(&a, &b, &config).unwrap();
        assert!(dense.converged && fast.converged);
        worst_lower = worst_lower.max((dense.lower - fast.lower).abs());
        worst_upper = worst_upper.max((dense.upper - fast.upper).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "03",
        "dense-nfft-agreement",
        worst_lower <= 1e-8 && worst_upper <= 1e-8 && secs < 120.0,
        &format!(
            "max |lower gap| {worst_lower:.2e}, max |upper gap| {worst_upper:.2e} <= 1e-8, 20 instances at n=1024, {secs:.1} s < 120 s"
        ),
    );
}

/// Criteria 4 and 5 share instances: the sandwich
/// lower <= d^r <= upper + eps for lambda = (H(P)+H(Q))/eps, and the
/// plan-entropy inequalities of both divergence gaps.
#[test]
fn accept_04_05_sandwich_and_entropy_bounds() {
    let start = Instant::now();
    let mut rng = rng(404);
    let eps_quality = 0.1;
    let slack = 1e-7;
    let prop_slack = 1e-9;
    let mut sandwich_ok = true;
    let mut proposition_ok = true;
    let mut worst_sandwich = f64::NEG_INFINITY;
    let mut detail5 = String::new();
    for _ in 0..100 {
        let n = rng.gen_range(5..=60);
        let m = rng.gen_range(5..=60);
        let a = weighted_cloud(&mut rng, n, 2);
        let b = weighted_cloud(&mut rng, m, 2);
        let lambda = (a.entropy() + b.entropy()) / eps_quality;

        let spec = CostSpec::new(2.0).unwrap();
        let (d, lp_plan) = wasserstein_lp(&a, &b, &spec).unwrap();
        let exact_pow = d * d;

        let options = SinkhornOptions {
            epsilon: 1e-10,
            max_iter: 500_000,
            ..Default::default()
        };
        let res = sinkhorn_iterate(&a, &b, lambda, 2.0, &options).unwrap();
        assert!(res.converged, "sandwich instance did not converge");

        // criterion 4: s <= d^r <= s~ + eps
        let lo_violation = res.lower - exact_pow; // must be <= slack
        let hi_violation = exact_pow - (res.upper + eps_quality); // must be <= slack
        worst_sandwich = worst_sandwich.max(lo_violation).max(hi_violation);
        if lo_violation > slack || hi_violation > slack {
            sandwich_ok = false;
        }

        // criterion 5: 0 <= s~ - d^r <= (H(pi_s) - H(pi_W))/lambda and
        // 0 <= d^r - s <= H(pi_s)/lambda <= H(p q^T)/lambda
        let h_s = res.plan_entropy;
        let h_w = lp_plan.entropy();
        let upper_gap = res.upper - exact_pow;
        let lower_gap = exact_pow - res.lower;
        let ok = upper_gap >= -prop_slack
            && upper_gap <= (h_s - h_w) / lambda + prop_slack
            && lower_gap >= -prop_slack
            && lower_gap <= h_s / lambda + prop_slack
            && h_s / lambda <= (a.entropy() + b.entropy()) / lambda + prop_slack;
        if !ok {
            proposition_ok = false;
            detail5 = format!(
                "violated: upper_gap {upper_gap:.3e} vs {:.3e}, lower_gap {lower_gap:.3e} vs {:.3e}",
                (h_s - h_w) / lambda,
                h_s / lambda
            );
        }
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        "04",
        "sandwich-bound",
        sandwich_ok && secs < 120.0,
        &format!(
            "worst violation {worst_sandwich:.2e} <= {slack:.0e}, 100 instances, {secs:.1} s < 120 s"
        ),
    );
    report(
        "05",
        "proposition-bounds",
        proposition_ok,
        &format!("both plan-entropy inequalities held on all 100 instances {detail5}"),
    );
}

/// Criterion 6: the objective decrease equals the KL sum at every
/// iteration, to 1e-10 absolute, on 20 random 50-atom instances.
#[test]
fn accept_06_kl_telescoping() {
    let mut rng = rng(606);
    let mut worst = 0.0f64;
    let mut total_steps = 0usize;
    for _ in 0..20 {
        let a = weighted_cloud(&mut rng, 50, 2);
        let b = weighted_cloud(&mut rng, 50, 2);
        let lambda = rng.gen_range(5.0..30.0);
        let diag = convergence_diagnostics(&a, &b, lambda, 2.0, 1e-9, 50_000).unwrap();
        assert!(diag.converged);
        for step in &diag.steps {
            worst = worst.max((step.f_decrease - step.kl_sum).abs());
        }
        total_steps += diag.steps.len();
    }
    report(
        "06",
        "kl-telescoping",
        worst <= 1e-10,
        &format!("max |f-decrease - KL sum| {worst:.2e} <= 1e-10 over {total_steps} iterations"),
    );
}

/// Criterion 7: the iteration count never exceeds
/// 2 eps^-2 log(kappa / jmin) on 50 square instances at eps = 0.05.
#[test]
fn accept_07_iteration_bound() {
    let mut rng = rng(707);
    let mut ok = true;
    let mut tightest = f64::INFINITY;
    for _ in 0..50 {
        let n = rng.gen_range(5..=100);
        let a = weighted_cloud(&mut rng, n, 2);
        let b = weighted_cloud(&mut rng, n, 2);
        let lambda = rng.gen_range(2.0..25.0);
        let diag = convergence_diagnostics(&a, &b, lambda, 2.0, 0.05, 100_000).unwrap();
        assert!(diag.converged);
        if !diag.bound.within_bound {
            ok = false;
        }
        tightest = tightest.min(diag.bound.bound / diag.bound.iterations as f64);
        // the objective-drop lemma backing the theorem
        assert!(diag.objective_drop <= diag.log_kappa_over_jmin + 1e-10);
    }
    report(
        "07",
        "iteration-bound",
        ok,
        &format!("Delta* within 2 eps^-2 log(kappa/jmin) on 50 square instances (tightest margin factor {tightest:.1})"),
    );
}

/// Criterion 8: lambda sweep. At n = 300 (exact column available) both
/// gaps shrink monotonically and the sandwich holds per lambda; at
/// n = 1000 the bracket tightens monotonically.
#[test]
fn accept_08_lambda_sweep() {
    let start = Instant::now();
    let mut rng = rng(808);
    let lambdas = [5.0, 10.0, 15.0, 20.0, 25.0];
    let tol = 1e-6;

    let run = |a: &DiscreteMeasure<f64>, b: &DiscreteMeasure<f64>, lambda: f64| {
        let mut config = NfftSinkhornConfig::new(lambda, 2.0);
        config.epsilon = 1e-10;
        config.max_iter = 200_000;
        nfft_sinkhorn(a, b, &config).unwrap()
    };

    // n = 300: full check against the exact LP value
    let a300 = DiscreteMeasure::empirical(
        2,
        (0..600).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<f64>>(),
    )
    .unwrap();
    let b300 = DiscreteMeasure::empirical(
        2,
        (0..600).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<f64>>(),
    )
    .unwrap();
    let spec = CostSpec::new(2.0).unwrap();
    let (d, _) = wasserstein_lp(&a300, &b300, &spec).unwrap();
    let exact_pow = d * d;

    let mut ok300 = true;
    let mut prev_upper_gap = f64::INFINITY;
    let mut prev_lower_gap = f64::INFINITY;
    for &lambda in &lambdas {
        let res = run(&a300, &b300, lambda);
        assert!(res.converged);
        let upper_gap = (res.upper - exact_pow).abs();
        let lower_gap = (exact_pow - res.lower).abs();
        if !(res.lower <= exact_pow + 1e-7 && exact_pow <= res.upper + 1e-7) {
            ok300 = false;
        }
        if upper_gap > prev_upper_gap + tol || lower_gap > prev_lower_gap + tol {
            ok300 = false;
        }
        prev_upper_gap = upper_gap;
        prev_lower_gap = lower_gap;
    }

    // n = 1000: bracketing via monotonicity only
    let a1k = weighted_cloud(&mut rng, 1000, 2);
    let b1k = weighted_cloud(&mut rng, 1000, 2);
    let mut ok1k = true;
    let mut prev_lower = f64::NEG_INFINITY;
    let mut prev_upper = f64::INFINITY;
    for &lambda in &lambdas {
        let res = run(&a1k, &b1k, lambda);
        assert!(res.converged);
        if res.lower < prev_lower - tol || res.upper > prev_upper + tol || res.lower > res.upper {
            ok1k = false;
        }
        prev_lower = res.lower;
        prev_upper = res.upper;
    }

    let secs = start.elapsed().as_secs_f64();
    report(
        "08",
        "lambda-sweep",
        ok300 && ok1k,
        &format!(
            "n=300 sandwich + monotone gaps vs exact, n=1000 monotone bracket, lambda in {{5..25}}, {secs:.1} s"
        ),
    );
}

/// Criterion 9: near-linear scaling of the NFFT path over
/// n in {1e3, 1e4, 1e5} (D = 1, lambda = 20, 50-iteration budget), and
/// the dense path capped (or 10x slower) at n = 1e4.
#[test]
fn accept_09_scaling() {
    let start = Instant::now();
    let sizes = [1_000usize, 10_000, 100_000];
    let budget = 50usize;
    let lambda = 20.0;

    let instance = |n: usize| {
        let mut rng = rng(909);
        let quantized =
            otfs::measures::quantile_quantizer(|u: f64| u, n).unwrap();
        let coords: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let empirical = DiscreteMeasure::empirical(1, coords).unwrap();
        (quantized, empirical)
    };

    let mut times = Vec::new();
    for &n in &sizes {
        let (a, b) = instance(n);
        let mut config = NfftSinkhornConfig::new(lambda, 2.0);
        config.epsilon = 1e-300; // never converges: fixed 50-step budget
        config.max_iter = budget;
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t0 = Instant::now();
            let res = nfft_sinkhorn(&a, &b, &config).unwrap();
            assert_eq!(res.iterations, budget);
            best = best.min(t0.elapsed().as_secs_f64());
        }
        times.push(best);
    }

    // least-squares slope of ln t against ln n
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|&t| t.ln()).collect();
    let xm = xs.iter().sum::<f64>() / xs.len() as f64;
    let ym = ys.iter().sum::<f64>() / ys.len() as f64;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / xs.iter().map(|&x| (x - xm) * (x - xm)).sum::<f64>();

    // dense at n = 1e4 must be capped by the default entry cap (or, were
    // it raised, at least 10x slower; the cap branch is what the default
    // configuration produces)
    let (a, b) = instance(10_000);
    let options = SinkhornOptions {
        epsilon: 1e-300,
        max_iter: budget,
        ..Default::default()
    };
    let dense_outcome = sinkhorn_iterate(&a, &b, lambda, 2.0, &options);
    let dense_capped_or_slow = match dense_outcome {
        Err(otfs::Error::SizeCapExceeded { .. }) => true,
        Ok(_) => {
            let t0 = Instant::now();
            let _ = sinkhorn_iterate(&a, &b, lambda, 2.0, &options).unwrap();
            let dense_t = t0.elapsed().as_secs_f64();
            dense_t >= 10.0 * times[1]
        }
        Err(e) => panic!("unexpected dense failure: {e}"),
    };

    let secs = start.elapsed().as_secs_f64();
    report(
        "09",
        "scaling",
        (0.8..=1.3).contains(&slope) && dense_capped_or_slow && secs < 600.0,
        &format!(
            "fitted exponent {slope:.2} in [0.8, 1.3] over t = {:?} ms, dense at 1e4 capped, {secs:.1} s < 600 s",
            times.iter().map(|t| (t * 1e3).round()).collect::<Vec<_>>()
        ),
    );
}

/// Criterion 10: the NFFT path at n = n-tilde = 1024 allocates no array
/// of n * n-tilde size; the dense path allocates exactly one such kernel.
#[test]
fn accept_10_memory() {
    let mut rng = rng(1010);
    let a = random_image_measure(&mut rng, 32);
    let b = random_image_measure(&mut rng, 32);
    assert_eq!(a.len(), 1024);
    assert_eq!(b.len(), 1024);
    let quadratic = a.len() * b.len() * std::mem::size_of::<f64>();

    let config = NfftSinkhornConfig::new(20.0, 2.0);
    let fast = nfft_sinkhorn(&a, &b, &config).unwrap();
    let fast_ok = fast.memory.largest_entry_bytes() < quadratic;

    let dense = sinkhorn_iterate(&a, &b, 20.0, 2.0, &SinkhornOptions::default()).unwrap();
    let quadratic_entries: Vec<_> = dense
        .memory
        .entries()
        .iter()
        .filter(|(_, bytes)| *bytes >= quadratic)
        .collect();
    let dense_ok = quadratic_entries.len() == 1 && quadratic_entries[0].0 == "dense_kernel_matrix";

    report(
        "10",
        "memory",
        fast_ok && dense_ok,
        &format!(
            "NFFT largest allocation {} B < n*m*8 = {quadratic} B; dense holds exactly one n x m kernel",
            fast.memory.largest_entry_bytes()
        ),
    );
}
