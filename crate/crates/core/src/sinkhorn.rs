//! Dense matrix-scaling Sinkhorn iteration with the full convergence
//! diagnostics: dual objective, divergence bounds, residual stopping,
//! KL telescoping and the iteration-count bound.
//!
//! The only n x n-tilde array the solver holds is the kernel matrix
//! itself; cost values are recomputed on the fly where needed so the
//! dense path's footprint stays at one kernel (plus an optional plan).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::TransportPlan;
use crate::measures::DiscreteMeasure;
use crate::real::Real;
use crate::util::{compensated_sum, dist_pow, MemoryLog};

/// Default cap on dense kernel entries (n * n-tilde).
pub const DEFAULT_DENSE_ENTRY_CAP: usize = 10_000_000;

/// Row count above which kernel matvecs parallelize. Each output entry is
/// reduced serially, so results do not depend on the thread count.
const PAR_ROWS_MIN: usize = 512;

/// Dense Gibbs kernel k_ij = exp(-lambda d_ij^r) together with the
/// support points it came from.
#[derive(Debug, Clone)]
pub struct KernelMatrix<T: Real = f64> {
    n: usize,
    m: usize,
    lambda: T,
    r: T,
    data: Vec<T>,
    dim: usize,
    source_coords: Vec<T>,
    target_coords: Vec<T>,
}

impl<T: Real> KernelMatrix<T> {
    /// Builds the kernel between two measures. Fails with
    /// [`Error::SizeCapExceeded`] above `entry_cap`.
    ///
    /// Large `lambda` drives entries toward the subnormal range (already
    /// e^-20 ~ 2e-9 at unit distance); once row or column sums underflow
    /// entirely, the iteration reports [`Error::NumericalUnderflow`]
    /// rather than dividing by zero.
    pub fn build(
        a: &DiscreteMeasure<T>,
        b: &DiscreteMeasure<T>,
        lambda: T,
        r: T,
        entry_cap: usize,
    ) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension(format!(
                "measures of dimension {} and {}",
                a.dim(),
                b.dim()
            )));
        }
        if !(lambda > T::zero()) {
            return Err(Error::Domain(format!("lambda = {lambda} must be > 0")));
        }
        if !(r >= T::one()) {
            return Err(Error::Domain(format!("cost order r = {r} must be >= 1")));
        }
        let (n, m) = (a.len(), b.len());
        if n.saturating_mul(m) > entry_cap {
            return Err(Error::SizeCapExceeded {
                rows: n,
                cols: m,
                cap: entry_cap,
            });
        }
        let dim = a.dim();
        let mut data = vec![T::zero(); n * m];
        data.par_chunks_mut(m)
            .enumerate()
            .for_each(|(i, row)| {
                let xi = &a.coords()[i * dim..(i + 1) * dim];
                for (j, out) in row.iter_mut().enumerate() {
                    let yj = &b.coords()[j * dim..(j + 1) * dim];
                    *out = (-lambda * dist_pow(xi, yj, r)).exp();
                }
            });
        Ok(Self {
            n,
            m,
            lambda,
            r,
            data,
            dim,
            source_coords: a.coords().to_vec(),
            target_coords: b.coords().to_vec(),
        })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn entries(&self) -> &[T] {
        &self.data
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.data[i * self.m + j]
    }

    /// Ground cost d_ij^r, recomputed from the support points.
    pub fn cost(&self, i: usize, j: usize) -> T {
        let xi = &self.source_coords[i * self.dim..(i + 1) * self.dim];
        let yj = &self.target_coords[j * self.dim..(j + 1) * self.dim];
        dist_pow(xi, yj, self.r)
    }

    /// t = k v.
    pub fn matvec(&self, v: &[T], out: &mut [T]) {
        debug_assert_eq!(v.len(), self.m);
        debug_assert_eq!(out.len(), self.n);
        if self.n >= PAR_ROWS_MIN {
            out.par_iter_mut().enumerate().for_each(|(i, o)| {
                let row = &self.data[i * self.m..(i + 1) * self.m];
                let mut acc = T::zero();
                for (kij, &vj) in row.iter().zip(v) {
                    acc += *kij * vj;
                }
                *o = acc;
            });
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                let row = &self.data[i * self.m..(i + 1) * self.m];
                let mut acc = T::zero();
                for (kij, &vj) in row.iter().zip(v) {
                    acc += *kij * vj;
                }
                *o = acc;
            }
        }
    }

    /// t = k^T v.
    pub fn matvec_t(&self, v: &[T], out: &mut [T]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.m);
        if self.m >= PAR_ROWS_MIN {
            out.par_iter_mut().enumerate().for_each(|(j, o)| {
                let mut acc = T::zero();
                for i in 0..self.n {
                    acc += self.data[i * self.m + j] * v[i];
                }
                *o = acc;
            });
        } else {
            for (j, o) in out.iter_mut().enumerate() {
                let mut acc = T::zero();
                for i in 0..self.n {
                    acc += self.data[i * self.m + j] * v[i];
                }
                *o = acc;
            }
        }
    }

    /// Sum of all kernel entries and the smallest entry, used by the
    /// convergence diagnostics (normalization and the bound's jmin).
    pub fn sum_and_min(&self) -> (T, T) {
        let sum = compensated_sum(self.data.iter().copied());
        let min = self
            .data
            .iter()
            .fold(T::infinity(), |acc, &x| acc.min(x));
        (sum, min)
    }

    /// One fused pass over the implied plan pi = diag(alpha) k
    /// diag(alpha_tilde): returns (mass, transport cost sum pi d^r,
    /// entropy H(pi)).
    pub fn plan_statistics(&self, alpha: &[T], alpha_tilde: &[T]) -> (T, T, T) {
        let stats: Vec<(T, T, T)> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let xi = &self.source_coords[i * self.dim..(i + 1) * self.dim];
                let ai = alpha[i];
                let mut mass = T::zero();
                let mut cost = T::zero();
                let mut ent = T::zero();
                for j in 0..self.m {
                    let pij = ai * self.data[i * self.m + j] * alpha_tilde[j];
                    if pij > T::zero() {
                        let yj = &self.target_coords[j * self.dim..(j + 1) * self.dim];
                        let c = dist_pow(xi, yj, self.r);
                        mass += pij;
                        cost += pij * c;
                        ent -= pij * pij.ln();
                    }
                }
                (mass, cost, ent)
            })
            .collect();
        let mass = compensated_sum(stats.iter().map(|s| s.0));
        let cost = compensated_sum(stats.iter().map(|s| s.1));
        let ent = compensated_sum(stats.iter().map(|s| s.2));
        (mass, cost, ent)
    }
}

/// Dual scaling vectors with their iteration count.
#[derive(Debug, Clone)]
pub struct ScalingVectors<T: Real = f64> {
    pub alpha: Vec<T>,
    pub alpha_tilde: Vec<T>,
    pub iterations: usize,
}

/// Outcome of a Sinkhorn run (dense or NFFT-accelerated).
#[derive(Debug, Clone)]
pub struct SinkhornResult<T: Real = f64> {
    /// Divergence including the entropy term (lower bound on d_r^r).
    pub lower: T,
    /// Transport cost of the scaled plan, sum pi d^r (upper bound).
    pub upper: T,
    /// Dual objective at the final scalings.
    pub dual: T,
    /// Entropy H(pi) of the final scaled plan.
    pub plan_entropy: T,
    /// Total mass of the final scaled plan.
    pub plan_mass: T,
    /// Final iteration count Delta*.
    pub iterations: usize,
    /// l1 residual at the final iterate.
    pub residual: T,
    /// Residuals at each checkpoint, in checking order (every iteration
    /// on the dense path, every even iteration on the NFFT path).
    pub residual_history: Vec<T>,
    /// False when the iteration hit `max_iter` before the residual
    /// dropped below epsilon; the fields still hold the best iterate.
    pub converged: bool,
    pub scalings: ScalingVectors<T>,
    /// Ledger of the major allocations made by the run.
    pub memory: MemoryLog,
}

/// Options for [`sinkhorn_iterate`].
#[derive(Debug, Clone)]
pub struct SinkhornOptions<T: Real = f64> {
    pub epsilon: T,
    pub max_iter: usize,
    pub entry_cap: usize,
    /// Optional warm start for alpha_tilde; defaults to the all-ones
    /// vector.
    pub warm_start: Option<Vec<T>>,
}

impl<T: Real> Default for SinkhornOptions<T> {
    fn default() -> Self {
        Self {
            epsilon: T::of(1e-9),
            max_iter: 10_000,
            entry_cap: DEFAULT_DENSE_ENTRY_CAP,
            warm_start: None,
        }
    }
}

/// l1 residual of a plan against target marginals:
/// `|pi 1 - p|_1 + |pi^T 1 - q|_1`.
pub fn residual<T: Real>(plan: &TransportPlan<T>, p: &[T], q: &[T]) -> Result<T> {
    if plan.rows() != p.len() || plan.cols() != q.len() {
        return Err(Error::Dimension(format!(
            "plan {} x {} against marginals {} and {}",
            plan.rows(),
            plan.cols(),
            p.len(),
            q.len()
        )));
    }
    let rows: T = plan
        .row_sums()
        .iter()
        .zip(p)
        .map(|(&s, &pi)| (s - pi).abs())
        .sum();
    let cols: T = plan
        .col_sums()
        .iter()
        .zip(q)
        .map(|(&s, &qj)| (s - qj).abs())
        .sum();
    Ok(rows + cols)
}

/// Dual objective
/// `1/lambda (1 + sum p log alpha + sum q log alpha_tilde - alpha^T k alpha_tilde)`.
pub fn dual_value<T: Real>(
    alpha: &[T],
    alpha_tilde: &[T],
    kernel: &KernelMatrix<T>,
    p: &[T],
    q: &[T],
) -> T {
    let mut t = vec![T::zero(); kernel.rows()];
    kernel.matvec(alpha_tilde, &mut t);
    let mass = compensated_sum(alpha.iter().zip(&t).map(|(&a, &ti)| a * ti));
    dual_value_from_mass(alpha, alpha_tilde, p, q, kernel.lambda(), mass)
}

/// Dual objective when `alpha^T k alpha_tilde` (the plan mass) is already
/// known, e.g. from the iteration's own kernel products.
pub fn dual_value_from_mass<T: Real>(
    alpha: &[T],
    alpha_tilde: &[T],
    p: &[T],
    q: &[T],
    lambda: T,
    mass: T,
) -> T {
    let log_a = compensated_sum(p.iter().zip(alpha).map(|(&pi, &a)| pi * a.ln()));
    let log_b = compensated_sum(q.iter().zip(alpha_tilde).map(|(&qj, &b)| qj * b.ln()));
    (T::one() + log_a + log_b - mass) / lambda
}

/// pi = diag(alpha) k diag(alpha_tilde), materialized. Gated by the cap
/// because this is the one optional n x n-tilde allocation of the
/// pipeline.
pub fn plan_from_scalings<T: Real>(
    kernel: &KernelMatrix<T>,
    alpha: &[T],
    alpha_tilde: &[T],
    p: &[T],
    q: &[T],
    entry_cap: usize,
) -> Result<TransportPlan<T>> {
    let (n, m) = (kernel.rows(), kernel.cols());
    if n.saturating_mul(m) > entry_cap {
        return Err(Error::SizeCapExceeded {
            rows: n,
            cols: m,
            cap: entry_cap,
        });
    }
    let mut entries = vec![T::zero(); n * m];
    for i in 0..n {
        for j in 0..m {
            entries[i * m + j] = alpha[i] * kernel.entry(i, j) * alpha_tilde[j];
        }
    }
    TransportPlan::new(n, m, entries, p.to_vec(), q.to_vec())
}

/// Sinkhorn's iteration on the dense kernel.
///
/// Alternates `alpha = p ./ (k alpha_tilde)` (odd steps) and
/// `alpha_tilde = q ./ (k^T alpha)` (even steps) from the all-ones start,
/// stopping once the l1 marginal residual drops below
/// `options.epsilon`. Each iteration costs one kernel product; the
/// residual reuses the product needed by the next step, so checking every
/// iteration adds no extra matvec.
pub fn sinkhorn_iterate<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    lambda: T,
    r: T,
    options: &SinkhornOptions<T>,
) -> Result<SinkhornResult<T>> {
    if !(options.epsilon > T::zero()) {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let kernel = KernelMatrix::build(a, b, lambda, r, options.entry_cap)?;
    let mut memory = MemoryLog::new();
    memory.record(
        "dense_kernel_matrix",
        kernel.rows() * kernel.cols() * std::mem::size_of::<T>(),
    );
    let result = sinkhorn_iterate_kernel(&kernel, a.weights(), b.weights(), options, memory)?;
    Ok(result)
}

/// Iteration core, reusable with a caller-built kernel (the convergence
/// diagnostics run it on the normalized kernel).
pub fn sinkhorn_iterate_kernel<T: Real>(
    kernel: &KernelMatrix<T>,
    p: &[T],
    q: &[T],
    options: &SinkhornOptions<T>,
    mut memory: MemoryLog,
) -> Result<SinkhornResult<T>> {
    let n = kernel.rows();
    let m = kernel.cols();
    if p.len() != n || q.len() != m {
        return Err(Error::Dimension(
            "marginals do not match the kernel shape".into(),
        ));
    }
    if let Some(ws) = &options.warm_start {
        if ws.len() != m {
            return Err(Error::Dimension("warm start has wrong length".into()));
        }
        if ws.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::Domain("warm start must be strictly positive".into()));
        }
    }

    let mut alpha = vec![T::one(); n];
    let mut alpha_tilde = options
        .warm_start
        .clone()
        .unwrap_or_else(|| vec![T::one(); m]);
    let mut t = vec![T::zero(); n];
    let mut t_tilde = vec![T::zero(); m];

    let tiny = T::min_positive_value();
    let mut delta = 0usize;
    let mut res = T::infinity();
    let mut converged = false;
    let mut history = Vec::new();

    kernel.matvec(&alpha_tilde, &mut t);
    while delta < options.max_iter {
        // odd step: scale rows to p
        delta += 1;
        for i in 0..n {
            if t[i] < tiny {
                return Err(Error::NumericalUnderflow);
            }
            alpha[i] = p[i] / t[i];
        }
        kernel.matvec_t(&alpha, &mut t_tilde);
        // after an odd step the row marginals are exact; the column
        // residual is |alpha_tilde .* (k^T alpha) - q|_1
        res = compensated_sum(
            t_tilde
                .iter()
                .zip(alpha_tilde.iter())
                .zip(q)
                .map(|((&tt, &at), &qj)| (at * tt - qj).abs()),
        );
        history.push(res);
        if res <= options.epsilon {
            converged = true;
            break;
        }
        if delta >= options.max_iter {
            break;
        }

        // even step: scale columns to q
        delta += 1;
        for j in 0..m {
            if t_tilde[j] < tiny {
                return Err(Error::NumericalUnderflow);
            }
            alpha_tilde[j] = q[j] / t_tilde[j];
        }
        kernel.matvec(&alpha_tilde, &mut t);
        res = compensated_sum(
            t.iter()
                .zip(alpha.iter())
                .zip(p)
                .map(|((&ti, &ai), &pi)| (ai * ti - pi).abs()),
        );
        history.push(res);
        if res <= options.epsilon {
            converged = true;
            break;
        }
    }

    let (mass, cost, entropy) = kernel.plan_statistics(&alpha, &alpha_tilde);
    let lambda = kernel.lambda();
    let upper = cost;
    let lower = upper - entropy / lambda;
    let dual = dual_value_from_mass(&alpha, &alpha_tilde, p, q, lambda, mass);

    memory.record("scaling_vectors", (n + m) * std::mem::size_of::<T>());

    Ok(SinkhornResult {
        lower,
        upper,
        dual,
        plan_entropy: entropy,
        plan_mass: mass,
        iterations: delta,
        residual: res,
        residual_history: history,
        converged,
        scalings: ScalingVectors {
            alpha,
            alpha_tilde,
            iterations: delta,
        },
        memory,
    })
}

/// Objective of the matrix-scaling view,
/// `f(alpha, alpha_tilde) = alpha^T k_norm alpha_tilde - sum p log alpha - sum q log alpha_tilde`,
/// evaluated against an entrywise-sum-normalized kernel. Only the
/// convergence diagnostics use this normalization; the solver iterates on
/// the plain kernel.
pub fn objective_f<T: Real>(
    alpha: &[T],
    alpha_tilde: &[T],
    normalized_kernel: &KernelMatrix<T>,
    p: &[T],
    q: &[T],
) -> T {
    let mut t = vec![T::zero(); normalized_kernel.rows()];
    normalized_kernel.matvec(alpha_tilde, &mut t);
    let mass = compensated_sum(alpha.iter().zip(&t).map(|(&a, &ti)| a * ti));
    let log_a = compensated_sum(p.iter().zip(alpha).map(|(&pi, &a)| pi * a.ln()));
    let log_b = compensated_sum(q.iter().zip(alpha_tilde).map(|(&qj, &b)| qj * b.ln()));
    mass - log_a - log_b
}

/// Report of the iteration-count bound `Delta* <= 2 eps^-2 log(kappa/jmin)`.
#[derive(Debug, Clone)]
pub struct IterationBoundReport<T: Real = f64> {
    /// Total mass of the final plan.
    pub kappa: T,
    /// Smallest entry of the sum-normalized kernel.
    pub jmin: T,
    pub bound: T,
    pub iterations: usize,
    pub within_bound: bool,
}

/// Per-iteration record of the diagnostic run on the normalized kernel.
#[derive(Debug, Clone)]
pub struct DiagnosticStep<T: Real = f64> {
    /// f before this step minus f after it.
    pub f_decrease: T,
    /// KL(p | pi 1) + KL(q | pi^T 1) at the pre-step plan.
    pub kl_sum: T,
    pub residual: T,
}

/// Full convergence diagnostics: runs the iteration on the normalized
/// kernel k / sum(k), recording the objective decrease and the KL sum it
/// must equal at every step, and evaluates the iteration bound.
///
/// Scaling the kernel by a constant leaves every plan iterate, residual
/// and the stopping index unchanged, so the bound verified here applies
/// verbatim to the plain-kernel run.
#[derive(Debug, Clone)]
pub struct ConvergenceDiagnostics<T: Real = f64> {
    pub steps: Vec<DiagnosticStep<T>>,
    pub bound: IterationBoundReport<T>,
    /// f(1, 1) - f at the final iterate; the theory caps it by
    /// log(kappa/jmin).
    pub objective_drop: T,
    pub log_kappa_over_jmin: T,
    pub converged: bool,
}

pub fn convergence_diagnostics<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    lambda: T,
    r: T,
    epsilon: T,
    max_iter: usize,
) -> Result<ConvergenceDiagnostics<T>> {
    let kernel = KernelMatrix::build(a, b, lambda, r, DEFAULT_DENSE_ENTRY_CAP)?;
    let (sum, min) = kernel.sum_and_min();
    let mut normalized = kernel;
    let inv = T::one() / sum;
    for e in normalized.data.iter_mut() {
        *e *= inv;
    }
    let jmin = min * inv;

    let p = a.weights();
    let q = b.weights();
    let n = normalized.rows();
    let m = normalized.cols();

    let mut alpha = vec![T::one(); n];
    let mut alpha_tilde = vec![T::one(); m];
    let mut t = vec![T::zero(); n];
    let mut t_tilde = vec![T::zero(); m];

    let kl = |target: &[T], marginal: &[T]| -> T {
        compensated_sum(target.iter().zip(marginal).map(|(&pi, &mi)| {
            if pi == T::zero() {
                T::zero()
            } else {
                pi * (pi / mi).ln()
            }
        }))
    };

    let f_start = objective_f(&alpha, &alpha_tilde, &normalized, p, q);
    let mut f_prev = f_start;
    let mut steps = Vec::new();
    let mut delta = 0usize;
    let mut converged = false;

    normalized.matvec(&alpha_tilde, &mut t);
    while delta < max_iter {
        delta += 1;
        // KL of the pre-step plan's row marginals; columns are exact
        // after the previous even step (or both at the start).
        let row_marginal: Vec<T> = alpha.iter().zip(&t).map(|(&ai, &ti)| ai * ti).collect();
        let kl_pre = kl(p, &row_marginal);
        for i in 0..n {
            if t[i] < T::min_positive_value() {
                return Err(Error::NumericalUnderflow);
            }
            alpha[i] = p[i] / t[i];
        }
        normalized.matvec_t(&alpha, &mut t_tilde);
        let res = compensated_sum(
            t_tilde
                .iter()
                .zip(alpha_tilde.iter())
                .zip(q)
                .map(|((&tt, &at), &qj)| (at * tt - qj).abs()),
        );
        let f_now = objective_f(&alpha, &alpha_tilde, &normalized, p, q);
        steps.push(DiagnosticStep {
            f_decrease: f_prev - f_now,
            kl_sum: kl_pre,
            residual: res,
        });
        f_prev = f_now;
        if res <= epsilon {
            converged = true;
            break;
        }
        if delta >= max_iter {
            break;
        }

        delta += 1;
        let col_marginal: Vec<T> = alpha_tilde
            .iter()
            .zip(&t_tilde)
            .map(|(&aj, &tj)| aj * tj)
            .collect();
        let kl_pre = kl(q, &col_marginal);
        for j in 0..m {
            if t_tilde[j] < T::min_positive_value() {
                return Err(Error::NumericalUnderflow);
            }
            alpha_tilde[j] = q[j] / t_tilde[j];
        }
        normalized.matvec(&alpha_tilde, &mut t);
        let res = compensated_sum(
            t.iter()
                .zip(alpha.iter())
                .zip(p)
                .map(|((&ti, &ai), &pi)| (ai * ti - pi).abs()),
        );
        let f_now = objective_f(&alpha, &alpha_tilde, &normalized, p, q);
        steps.push(DiagnosticStep {
            f_decrease: f_prev - f_now,
            kl_sum: kl_pre,
            residual: res,
        });
        f_prev = f_now;
        if res <= epsilon {
            converged = true;
            break;
        }
    }

    // kappa: mass of the final plan under the normalized kernel's
    // scalings; identical to the plain-kernel plan mass.
    let (kappa, _, _) = normalized.plan_statistics(&alpha, &alpha_tilde);
    let log_ratio = (kappa / jmin).ln();
    let bound_value = T::of(2.0) / (epsilon * epsilon) * log_ratio;
    let bound = IterationBoundReport {
        kappa,
        jmin,
        bound: bound_value,
        iterations: delta,
        within_bound: T::of(delta) <= bound_value,
    };

    Ok(ConvergenceDiagnostics {
        steps,
        bound,
        objective_drop: f_start - f_prev,
        log_kappa_over_jmin: log_ratio,
        converged,
    })
}

/// One-call check of the divergence bounds against an exact transport
/// value; used by the acceptance suite and the CLI selftest.
#[derive(Debug, Clone)]
pub struct BoundsReport<T: Real = f64> {
    pub lower: T,
    pub upper: T,
    pub exact_pow: T,
    /// (1/lambda) H(pi_sinkhorn)
    pub entropy_gap: T,
    /// (1/lambda) (H(pi_sinkhorn) - H(pi_lp))
    pub upper_gap_bound: T,
    /// (1/lambda) H(p q^T)
    pub product_entropy_bound: T,
    pub sandwich_ok: bool,
    pub upper_bound_ok: bool,
    pub lower_bound_ok: bool,
}

/// Verifies `lower <= exact <= upper + eps_quality` for
/// `lambda >= (H(P) + H(Q)) / eps_quality`, plus the two plan-entropy
/// inequalities. `slack` absorbs the iteration tolerance.
#[allow(clippy::too_many_arguments)]
pub fn divergence_bounds_check<T: Real>(
    a: &DiscreteMeasure<T>,
    b: &DiscreteMeasure<T>,
    lambda: T,
    r: T,
    eps_quality: T,
    exact_pow: T,
    lp_plan: &TransportPlan<T>,
    options: &SinkhornOptions<T>,
    slack: T,
) -> Result<BoundsReport<T>> {
    let result = sinkhorn_iterate(a, b, lambda, r, options)?;
    let h_lp = lp_plan.entropy();
    let entropy_gap = result.plan_entropy / lambda;
    let upper_gap_bound = (result.plan_entropy - h_lp) / lambda;
    let product_entropy = a.entropy() + b.entropy();
    let product_entropy_bound = product_entropy / lambda;

    let sandwich_ok = result.lower <= exact_pow + slack
        && exact_pow <= result.upper + eps_quality + slack;
    let upper_gap = result.upper - exact_pow;
    let upper_bound_ok = upper_gap >= -slack && upper_gap <= upper_gap_bound + slack;
    let lower_gap = exact_pow - result.lower;
    let lower_bound_ok = lower_gap >= -slack
        && lower_gap <= entropy_gap + slack
        && entropy_gap <= product_entropy_bound + slack;

    Ok(BoundsReport {
        lower: result.lower,
        upper: result.upper,
        exact_pow,
        entropy_gap,
        upper_gap_bound,
        product_entropy_bound,
        sandwich_ok,
        upper_bound_ok,
        lower_bound_ok,
    })
}
