//! Nonequispaced discrete Fourier transforms on the torus [-1/2, 1/2)^D,
//! D in {1, 2, 3}.
//!
//! `ndft_direct` / `ndft_adjoint_direct` are the exact O(N^D n) references.
//! [`NfftPlan`] evaluates the same sums in O((sigma N)^D log(sigma N) + n)
//! through the usual window trick: deconvolve the coefficients by the
//! window's Fourier transform, run an oversampled FFT, then gather (or, in
//! the adjoint, spread) through a compactly supported Kaiser-Bessel window
//! around each node.
//!
//! Window: psi(x) = I0(beta sqrt(1 - (x n1/m)^2)) / I0(beta) on
//! |x| <= m/n1, with beta = pi m (2 - 1/sigma). Its Fourier transform is
//! the sinh-kernel in closed form, so no quadrature is involved, and the
//! compact support makes the gather width exactly 2m+2 cells per axis.

use std::sync::Arc;

pub use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::real::{two_pi, Real};

/// Modified Bessel function of the first kind, order zero, by its power
/// series. Arguments here stay below ~50 where the series is accurate and
/// overflow-free.
pub(crate) fn bessel_i0<T: Real>(x: T) -> T {
    let q = x * x / T::of(4.0);
    let mut term = T::one();
    let mut sum = T::one();
    let mut k = 1usize;
    loop {
        let kt = T::of(k);
        term *= q / (kt * kt);
        sum += term;
        if term <= sum * T::epsilon() || k > 1000 {
            return sum;
        }
        k += 1;
    }
}

/// sinh(z)/z continued through zero, and its oscillatory continuation
/// sin(z)/z for imaginary arguments (z*z given with sign).
fn sinhc_signed<T: Real>(z_sq: T) -> T {
    if z_sq > T::zero() {
        let z = z_sq.sqrt();
        z.sinh() / z
    } else if z_sq < T::zero() {
        let z = (-z_sq).sqrt();
        z.sin() / z
    } else {
        T::one()
    }
}

/// Dense complex array over the centered frequency box
/// `prod_a {-N_a/2, ..., N_a/2 - 1}`, row-major.
#[derive(Debug, Clone)]
pub struct SpectralCoefficients<T: Real = f64> {
    dims: Vec<usize>,
    data: Vec<Complex<T>>,
}

impl<T: Real> SpectralCoefficients<T> {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        Self {
            dims: dims.to_vec(),
            data: vec![Complex::new(T::zero(), T::zero()); len],
        }
    }

    pub fn from_vec(dims: &[usize], data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::PlanMismatch(format!(
                "{} coefficients do not fill the frequency box {dims:?}",
                data.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    /// Frequency multi-index of the flat position, axis by axis, in
    /// {-N/2, ..., N/2 - 1}.
    pub fn frequency_of(&self, mut flat: usize) -> Vec<i64> {
        let mut k = vec![0i64; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            let n = self.dims[a];
            k[a] = (flat % n) as i64 - (n / 2) as i64;
            flat /= n;
        }
        k
    }
}

/// Precomputed plan: node set, FFT sizes, window tables, deconvolution
/// factors. Immutable after construction; `trafo`/`adjoint` allocate
/// their work buffers per call, so one plan may serve several threads.
pub struct NfftPlan<T: Real = f64> {
    dim: usize,
    bandwidth: Vec<usize>,
    n_over: Vec<usize>,
    cutoff: usize,
    node_count: usize,
    /// Per node and axis: first oversampled-grid cell of the support.
    base: Vec<i64>,
    /// Per node and axis: 2m+2 window values on those cells.
    table: Vec<T>,
    /// Per axis: n1 * psi_hat(k) over the centered band (deconvolution
    /// denominators).
    deconv: Vec<Vec<T>>,
    fft_fwd: Vec<Arc<dyn Fft<T>>>,
    fft_inv: Vec<Arc<dyn Fft<T>>>,
}

impl<T: Real> std::fmt::Debug for NfftPlan<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NfftPlan")
            .field("dim", &self.dim)
            .field("bandwidth", &self.bandwidth)
            .field("n_over", &self.n_over)
            .field("cutoff", &self.cutoff)
            .field("node_count", &self.node_count)
            .finish()
    }
}

/// Tunables for plan construction.
#[derive(Debug, Clone, Copy)]
pub struct NfftParams {
    /// Oversampling factor sigma >= 2; the oversampled length per axis is
    /// round(sigma N) forced even.
    pub sigma: f64,
    /// Window cutoff m: support half-width in oversampled grid cells.
    pub cutoff: usize,
}

impl Default for NfftParams {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            cutoff: 8,
        }
    }
}

impl<T: Real> NfftPlan<T> {
    /// Builds a plan for `nodes` (flat, `dim`-major) on the torus.
    pub fn new(dim: usize, bandwidth: &[usize], nodes: &[T], params: NfftParams) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(format!(
                "NFFT dimension must be 1..=3, got {dim}"
            )));
        }
        if bandwidth.len() != dim {
            return Err(Error::Dimension(
                "bandwidth list does not match dimension".into(),
            ));
        }
        if params.sigma < 2.0 {
            return Err(Error::Domain(format!(
                "oversampling sigma = {} must be >= 2",
                params.sigma
            )));
        }
        if !nodes.len().is_multiple_of(dim) {
            return Err(Error::Dimension(
                "node coordinates are not a multiple of the dimension".into(),
            ));
        }
        let m = params.cutoff;
        if m == 0 {
            return Err(Error::Domain("window cutoff must be positive".into()));
        }

        let half = T::of(0.5);
        for &x in nodes {
            if !(x >= -half && x < half) {
                return Err(Error::GeometryViolation(format!(
                    "node coordinate {x} outside [-1/2, 1/2)"
                )));
            }
        }

        let mut n_over = Vec::with_capacity(dim);
        for &n in bandwidth {
            if n < 2 || n % 2 != 0 {
                return Err(Error::Domain(format!(
                    "bandwidth {n} must be even and at least 2"
                )));
            }
            let mut n1 = (params.sigma * n as f64).round() as usize;
            if n1 % 2 == 1 {
                n1 += 1;
            }
            if 2 * m + 2 > n1 {
                return Err(Error::Domain(format!(
                    "window support 2m+2 = {} exceeds oversampled length {n1}",
                    2 * m + 2
                )));
            }
            n_over.push(n1);
        }

        let node_count = nodes.len() / dim;
        let width = 2 * m + 2;

        // Per-axis window shape; beta depends on sigma and m only.
        let beta = T::of(std::f64::consts::PI * params.cutoff as f64 * (2.0 - 1.0 / params.sigma));
        let i0_beta = bessel_i0(beta);

        let window = |axis: usize, x: T| -> T {
            let c = T::of(m) / T::of(n_over[axis]);
            let u = x / c;
            let arg = T::one() - u * u;
            if arg <= T::zero() {
                T::zero()
            } else {
                bessel_i0(beta * arg.sqrt()) / i0_beta
            }
        };

        let mut base = vec![0i64; node_count * dim];
        let mut table = vec![T::zero(); node_count * dim * width];
        for j in 0..node_count {
            for a in 0..dim {
                let x = nodes[j * dim + a];
                let n1 = T::of(n_over[a]);
                let b = (x * n1).floor().to_i64().unwrap() - m as i64;
                base[j * dim + a] = b;
                for t in 0..width {
                    let cell = T::of(b + t as i64) / n1;
                    table[(j * dim + a) * width + t] = window(a, x - cell);
                }
            }
        }

        // Deconvolution: n1 * psihat(k), with
        // psihat(k) = (2c / I0(beta)) sinhc(sqrt(beta^2 - (2 pi c k)^2)).
        let mut deconv = Vec::with_capacity(dim);
        for a in 0..dim {
            let n = bandwidth[a];
            let c = T::of(m) / T::of(n_over[a]);
            let front = T::of(n_over[a]) * (c + c) / i0_beta;
            let mut row = Vec::with_capacity(n);
            for idx in 0..n {
                let k = idx as i64 - (n / 2) as i64;
                let omega = two_pi::<T>() * c * T::of(k);
                row.push(front * sinhc_signed(beta * beta - omega * omega));
            }
            deconv.push(row);
        }

        let mut planner = FftPlanner::<T>::new();
        let fft_fwd = n_over
            .iter()
            .map(|&n1| planner.plan_fft_forward(n1))
            .collect();
        let fft_inv = n_over
            .iter()
            .map(|&n1| planner.plan_fft_inverse(n1))
            .collect();

        Ok(Self {
            dim,
            bandwidth: bandwidth.to_vec(),
            n_over,
            cutoff: m,
            node_count,
            base,
            table,
            deconv,
            fft_fwd,
            fft_inv,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> &[usize] {
        &self.bandwidth
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn oversampled_len(&self) -> usize {
        self.n_over.iter().product()
    }

    fn coeff_len(&self) -> usize {
        self.bandwidth.iter().product()
    }

    /// Bytes of the plan's own precomputed state (window tables).
    pub fn table_bytes(&self) -> usize {
        self.table.len() * std::mem::size_of::<T>()
            + self.base.len() * std::mem::size_of::<i64>()
    }

    /// Evaluates `f(x_j) = sum_k coeffs_k exp(2 pi i k . x_j)` at every node.
    pub fn trafo(&self, coeffs: &SpectralCoefficients<T>) -> Result<Vec<Complex<T>>> {
        if coeffs.dims() != self.bandwidth.as_slice() {
            return Err(Error::PlanMismatch(format!(
                "coefficients over {:?} against a plan of bandwidth {:?}",
                coeffs.dims(),
                self.bandwidth
            )));
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.oversampled_len()];

        // Deconvolve and place on the oversampled grid, frequencies
        // wrapped into 0..n1 per axis.
        let nb = self.coeff_len();
        let mut k_idx = vec![0usize; self.dim];
        for flat in 0..nb {
            let mut rem = flat;
            for a in (0..self.dim).rev() {
                k_idx[a] = rem % self.bandwidth[a];
                rem /= self.bandwidth[a];
            }
            let mut denom = T::one();
            let mut pos = 0usize;
            for a in 0..self.dim {
                let n = self.bandwidth[a];
                let n1 = self.n_over[a] as i64;
                let k = k_idx[a] as i64 - (n / 2) as i64;
                let wrapped = k.rem_euclid(n1) as usize;
                pos = pos * self.n_over[a] + wrapped;
                denom *= self.deconv[a][k_idx[a]];
            }
            let v = coeffs.data()[flat];
            buf[pos] = Complex::new(v.re / denom, v.im / denom);
        }

        for a in 0..self.dim {
            fft_axis(&mut buf, &self.n_over, a, &self.fft_inv[a]);
        }

        let width = 2 * self.cutoff + 2;
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.node_count];
        match self.dim {
            1 => {
                let n1 = self.n_over[0] as i64;
                for (j, o) in out.iter_mut().enumerate() {
                    let b = self.base[j];
                    let tab = &self.table[j * width..(j + 1) * width];
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (t, &w) in tab.iter().enumerate() {
                        let l = (b + t as i64).rem_euclid(n1) as usize;
                        acc += buf[l] * w;
                    }
                    *o = acc;
                }
            }
            2 => {
                let (n0, n1) = (self.n_over[0] as i64, self.n_over[1] as i64);
                for (j, o) in out.iter_mut().enumerate() {
                    let b0 = self.base[j * 2];
                    let b1 = self.base[j * 2 + 1];
                    let t0 = &self.table[(j * 2) * width..(j * 2 + 1) * width];
                    let t1 = &self.table[(j * 2 + 1) * width..(j * 2 + 2) * width];
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (s0, &w0) in t0.iter().enumerate() {
                        let l0 = (b0 + s0 as i64).rem_euclid(n0) as usize;
                        let row = l0 * self.n_over[1];
                        let mut inner = Complex::new(T::zero(), T::zero());
                        for (s1, &w1) in t1.iter().enumerate() {
                            let l1 = (b1 + s1 as i64).rem_euclid(n1) as usize;
                            inner += buf[row + l1] * w1;
                        }
                        acc += inner * w0;
                    }
                    *o = acc;
                }
            }
            _ => {
                let (n0, n1, n2) = (
                    self.n_over[0] as i64,
                    self.n_over[1] as i64,
                    self.n_over[2] as i64,
                );
                for (j, o) in out.iter_mut().enumerate() {
                    let b = &self.base[j * 3..(j + 1) * 3];
                    let t0 = &self.table[(j * 3) * width..(j * 3 + 1) * width];
                    let t1 = &self.table[(j * 3 + 1) * width..(j * 3 + 2) * width];
                    let t2 = &self.table[(j * 3 + 2) * width..(j * 3 + 3) * width];
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (s0, &w0) in t0.iter().enumerate() {
                        let l0 = (b[0] + s0 as i64).rem_euclid(n0) as usize;
                        let plane = l0 * self.n_over[1];
                        let mut acc1 = Complex::new(T::zero(), T::zero());
                        for (s1, &w1) in t1.iter().enumerate() {
                            let l1 = (b[1] + s1 as i64).rem_euclid(n1) as usize;
                            let row = (plane + l1) * self.n_over[2];
                            let mut acc2 = Complex::new(T::zero(), T::zero());
                            for (s2, &w2) in t2.iter().enumerate() {
                                let l2 = (b[2] + s2 as i64).rem_euclid(n2) as usize;
                                acc2 += buf[row + l2] * w2;
                            }
                            acc1 += acc2 * w1;
                        }
                        acc += acc1 * w0;
                    }
                    *o = acc;
                }
            }
        }
        Ok(out)
    }

    /// Adjoint transform: `c_k = sum_j values_j exp(-2 pi i k . x_j)` over
    /// the centered frequency box.
    ///
    /// The spreading loop is per-node serial, so results are bitwise
    /// reproducible regardless of the caller's thread pool.
    pub fn adjoint(&self, values: &[Complex<T>]) -> Result<SpectralCoefficients<T>> {
        if values.len() != self.node_count {
            return Err(Error::PlanMismatch(format!(
                "{} values against a plan with {} nodes",
                values.len(),
                self.node_count
            )));
        }
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.oversampled_len()];
        let width = 2 * self.cutoff + 2;

        match self.dim {
            1 => {
                let n1 = self.n_over[0] as i64;
                for (j, &v) in values.iter().enumerate() {
                    let b = self.base[j];
                    let tab = &self.table[j * width..(j + 1) * width];
                    for (t, &w) in tab.iter().enumerate() {
                        let l = (b + t as i64).rem_euclid(n1) as usize;
                        buf[l] += v * w;
                    }
                }
            }
            2 => {
                let (n0, n1) = (self.n_over[0] as i64, self.n_over[1] as i64);
                for (j, &v) in values.iter().enumerate() {
                    let b0 = self.base[j * 2];
                    let b1 = self.base[j * 2 + 1];
                    let t0 = &self.table[(j * 2) * width..(j * 2 + 1) * width];
                    let t1 = &self.table[(j * 2 + 1) * width..(j * 2 + 2) * width];
                    for (s0, &w0) in t0.iter().enumerate() {
                        let l0 = (b0 + s0 as i64).rem_euclid(n0) as usize;
                        let row = l0 * self.n_over[1];
                        let vw0 = v * w0;
                        for (s1, &w1) in t1.iter().enumerate() {
                            let l1 = (b1 + s1 as i64).rem_euclid(n1) as usize;
                            buf[row + l1] += vw0 * w1;
                        }
                    }
                }
            }
            _ => {
                let (n0, n1, n2) = (
                    self.n_over[0] as i64,
                    self.n_over[1] as i64,
                    self.n_over[2] as i64,
                );
                for (j, &v) in values.iter().enumerate() {
                    let b = &self.base[j * 3..(j + 1) * 3];
                    let t0 = &self.table[(j * 3) * width..(j * 3 + 1) * width];
                    let t1 = &self.table[(j * 3 + 1) * width..(j * 3 + 2) * width];
                    let t2 = &self.table[(j * 3 + 2) * width..(j * 3 + 3) * width];
                    for (s0, &w0) in t0.iter().enumerate() {
                        let l0 = (b[0] + s0 as i64).rem_euclid(n0) as usize;
                        let plane = l0 * self.n_over[1];
                        let vw0 = v * w0;
                        for (s1, &w1) in t1.iter().enumerate() {
                            let l1 = (b[1] + s1 as i64).rem_euclid(n1) as usize;
                            let row = (plane + l1) * self.n_over[2];
                            let vw01 = vw0 * w1;
                            for (s2, &w2) in t2.iter().enumerate() {
                                let l2 = (b[2] + s2 as i64).rem_euclid(n2) as usize;
                                buf[row + l2] += vw01 * w2;
                            }
                        }
                    }
                }
            }
        }

        for a in 0..self.dim {
            fft_axis(&mut buf, &self.n_over, a, &self.fft_fwd[a]);
        }

        let mut coeffs = SpectralCoefficients::zeros(&self.bandwidth);
        let nb = self.coeff_len();
        let mut k_idx = vec![0usize; self.dim];
        for flat in 0..nb {
            let mut rem = flat;
            for a in (0..self.dim).rev() {
                k_idx[a] = rem % self.bandwidth[a];
                rem /= self.bandwidth[a];
            }
            let mut denom = T::one();
            let mut pos = 0usize;
            for a in 0..self.dim {
                let n = self.bandwidth[a];
                let n1 = self.n_over[a] as i64;
                let k = k_idx[a] as i64 - (n / 2) as i64;
                let wrapped = k.rem_euclid(n1) as usize;
                pos = pos * self.n_over[a] + wrapped;
                denom *= self.deconv[a][k_idx[a]];
            }
            let v = buf[pos];
            coeffs.data_mut()[flat] = Complex::new(v.re / denom, v.im / denom);
        }
        Ok(coeffs)
    }
}

/// In-place FFT along one axis of a row-major multidimensional buffer.
pub(crate) fn fft_axis<T: Real>(
    buf: &mut [Complex<T>],
    dims: &[usize],
    axis: usize,
    fft: &Arc<dyn Fft<T>>,
) {
    let len = dims[axis];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];

    // Row-major: stride of `axis` is the product of the later dims.
    let stride: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();

    if stride == 1 {
        for o in 0..outer {
            let start = o * len;
            fft.process_with_scratch(&mut buf[start..start + len], &mut scratch);
        }
    } else {
        let mut line = vec![Complex::new(T::zero(), T::zero()); len];
        for o in 0..outer {
            for s in 0..stride {
                let base = o * len * stride + s;
                for (i, l) in line.iter_mut().enumerate() {
                    *l = buf[base + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, &l) in line.iter().enumerate() {
                    buf[base + i * stride] = l;
                }
            }
        }
    }
}

/// Exact nonequispaced evaluation
/// `f(x_j) = sum_k coeffs_k exp(2 pi i k . x_j)`; the oracle `trafo`
/// approximates.
pub fn ndft_direct<T: Real>(
    coeffs: &SpectralCoefficients<T>,
    dim: usize,
    nodes: &[T],
) -> Result<Vec<Complex<T>>> {
    if coeffs.dims().len() != dim || !nodes.len().is_multiple_of(dim) {
        return Err(Error::Dimension("dimension mismatch in ndft_direct".into()));
    }
    let n_nodes = nodes.len() / dim;
    let mut out = Vec::with_capacity(n_nodes);
    for j in 0..n_nodes {
        let x = &nodes[j * dim..(j + 1) * dim];
        let mut acc = Complex::new(T::zero(), T::zero());
        for (flat, &c) in coeffs.data().iter().enumerate() {
            let k = coeffs.frequency_of(flat);
            let mut phase = T::zero();
            for a in 0..dim {
                phase += T::of(k[a]) * x[a];
            }
            let angle = two_pi::<T>() * phase;
            acc += c * Complex::new(angle.cos(), angle.sin());
        }
        out.push(acc);
    }
    Ok(out)
}

/// Exact adjoint `c_k = sum_j values_j exp(-2 pi i k . x_j)`.
pub fn ndft_adjoint_direct<T: Real>(
    values: &[Complex<T>],
    dim: usize,
    nodes: &[T],
    bandwidth: &[usize],
) -> Result<SpectralCoefficients<T>> {
    if bandwidth.len() != dim || !nodes.len().is_multiple_of(dim) {
        return Err(Error::Dimension(
            "dimension mismatch in ndft_adjoint_direct".into(),
        ));
    }
    if values.len() != nodes.len() / dim {
        return Err(Error::Dimension("values do not match node count".into()));
    }
    let mut coeffs = SpectralCoefficients::zeros(bandwidth);
    for flat in 0..coeffs.data().len() {
        let k = coeffs.frequency_of(flat);
        let mut acc = Complex::new(T::zero(), T::zero());
        for (j, &v) in values.iter().enumerate() {
            let x = &nodes[j * dim..(j + 1) * dim];
            let mut phase = T::zero();
            for a in 0..dim {
                phase += T::of(k[a]) * x[a];
            }
            let angle = -two_pi::<T>() * phase;
            acc += v * Complex::new(angle.cos(), angle.sin());
        }
        coeffs.data_mut()[flat] = acc;
    }
    Ok(coeffs)
}
