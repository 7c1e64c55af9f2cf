//! Truncated Taylor-series arithmetic and confluent Newton interpolation.
//!
//! The kernel regularization needs derivatives of radial profiles like
//! exp(-lambda x^r) up to order p-1 at the matching points. Rather than
//! hand-deriving formulas per kernel, profiles are evaluated in truncated
//! power-series arithmetic (a "jet"), which yields all derivatives at a
//! point to machine precision. The two-point Taylor interpolants are kept
//! in Newton form with confluent divided differences and evaluated by
//! nested multiplication; expanding them into monomials at order 10 loses
//! several digits.

use crate::real::Real;

/// Coefficients c_k = f^(k)(x0)/k! of a series truncated at fixed length.
#[derive(Debug, Clone)]
pub(crate) struct Jet<T: Real> {
    c: Vec<T>,
}

impl<T: Real> Jet<T> {
    /// The identity function x, developed at x0.
    pub fn variable(x0: T, len: usize) -> Self {
        let mut c = vec![T::zero(); len];
        c[0] = x0;
        if len > 1 {
            c[1] = T::one();
        }
        Self { c }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            c: self.c.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let n = self.len();
        let mut c = vec![T::zero(); n];
        for i in 0..n {
            if self.c[i] == T::zero() {
                continue;
            }
            for j in 0..n - i {
                c[i + j] += self.c[i] * other.c[j];
            }
        }
        Self { c }
    }

    /// exp of a series: f = exp(g) satisfies f' = g' f, giving the
    /// recurrence f_n = (1/n) sum_{k=1..n} k g_k f_{n-k}.
    pub fn exp(&self) -> Self {
        let n = self.len();
        let mut f = vec![T::zero(); n];
        f[0] = self.c[0].exp();
        for m in 1..n {
            let mut acc = T::zero();
            for k in 1..=m {
                acc += T::of(k) * self.c[k] * f[m - k];
            }
            f[m] = acc / T::of(m);
        }
        Self { c: f }
    }

    /// Derivative values f^(k)(x0) = k! c_k, k = 0..len.
    pub fn derivatives(&self) -> Vec<T> {
        let mut fact = T::one();
        self.c
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                if k > 0 {
                    fact *= T::of(k);
                }
                c * fact
            })
            .collect()
    }
}

/// Polynomial in Newton form over repeated nodes: the two-point Taylor
/// (Hermite) interpolant matching prescribed derivatives at two points.
#[derive(Debug, Clone)]
pub(crate) struct HermiteInterpolant<T: Real> {
    nodes: Vec<T>,
    coeffs: Vec<T>,
}

impl<T: Real> HermiteInterpolant<T> {
    /// Interpolant with f^(k)(xa) = derivs_a[k] and f^(k)(xb) =
    /// derivs_b[k]; degree derivs_a.len() + derivs_b.len() - 1.
    pub fn two_point(xa: T, derivs_a: &[T], xb: T, derivs_b: &[T]) -> Self {
        let pa = derivs_a.len();
        let pb = derivs_b.len();
        let total = pa + pb;
        let mut nodes = Vec::with_capacity(total);
        nodes.extend(std::iter::repeat_n(xa, pa));
        nodes.extend(std::iter::repeat_n(xb, pb));

        // Confluent divided differences: within a block of repeated
        // nodes dd[i..i+k] = f^(k)/k!; across blocks the usual quotient.
        let value_at = |i: usize| if i < pa { derivs_a[0] } else { derivs_b[0] };
        let scaled_deriv = |i: usize, k: usize| {
            // k-th divided difference within the block containing node i
            let (derivs, _start) = if i < pa { (derivs_a, 0) } else { (derivs_b, pa) };
            let mut fact = T::one();
            for f in 1..=k {
                fact *= T::of(f);
            }
            derivs[k] / fact
        };

        let mut table: Vec<T> = (0..total).map(value_at).collect();
        let mut coeffs = Vec::with_capacity(total);
        coeffs.push(table[0]);
        for order in 1..total {
            // table[i] currently holds dd of order-1 spanning nodes
            // i..=i+order-1
            for i in 0..total - order {
                let lo = nodes[i];
                let hi = nodes[i + order];
                table[i] = if hi == lo {
                    scaled_deriv(i, order)
                } else {
                    (table[i + 1] - table[i]) / (hi - lo)
                };
            }
            coeffs.push(table[0]);
        }

        Self { nodes, coeffs }
    }

    /// Nested-multiplication evaluation.
    pub fn eval(&self, x: T) -> T {
        let n = self.coeffs.len();
        let mut acc = self.coeffs[n - 1];
        for k in (0..n - 1).rev() {
            acc = acc * (x - self.nodes[k]) + self.coeffs[k];
        }
        acc
    }
}
