//! Discrete probability measures on R^D, D in {1, 2, 3}, and the
//! information functionals (entropy, Kullback-Leibler divergence) the
//! divergence bounds are phrased in.
//!
//! All logarithms are natural. Atoms with zero weight are dropped at
//! construction, so `log w` is always finite downstream.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::util::compensated_sum;

/// Absolute tolerance on `sum(weights) == 1` after construction.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A weighted point cloud: `n` support points in R^D with strictly
/// positive probability weights summing to one.
///
/// Coordinates are stored flat, row-major (`coords[i*dim..(i+1)*dim]` is
/// atom `i`), so a million 1-D atoms cost two arrays and nothing else.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T: Real = f64> {
    dim: usize,
    coords: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> DiscreteMeasure<T> {
    /// Builds a measure from flat coordinates and weights.
    ///
    /// Weights may arrive unnormalized; they are validated (finite,
    /// nonnegative, not all zero), zero-weight atoms are dropped, and the
    /// remainder is normalized with compensated summation.
    pub fn new(dim: usize, coords: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(format!(
                "support dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if weights.is_empty() {
            return Err(Error::EmptySample);
        }
        if coords.len() != weights.len() * dim {
            return Err(Error::Dimension(format!(
                "{} coordinates do not match {} atoms of dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite support coordinate".into()));
        }
        for &w in &weights {
            if !w.is_finite() || w < T::zero() {
                return Err(Error::Domain(format!("invalid weight {w}")));
            }
        }

        let total = compensated_sum(weights.iter().copied());
        if total <= T::zero() {
            return Err(Error::Domain("weights sum to zero".into()));
        }

        let mut kept_coords = Vec::with_capacity(coords.len());
        let mut kept_weights = Vec::with_capacity(weights.len());
        for (i, &w) in weights.iter().enumerate() {
            if w > T::zero() {
                kept_coords.extend_from_slice(&coords[i * dim..(i + 1) * dim]);
                kept_weights.push(w / total);
            }
        }
        if kept_weights.is_empty() {
            return Err(Error::Domain("all atoms have zero weight".into()));
        }

        // One correction pass: compensated normalization leaves a residual
        // below 1e-15 relative, folded into the largest weight so the sum
        // is exact to the working precision.
        let sum_after = compensated_sum(kept_weights.iter().copied());
        let correction = T::one() - sum_after;
        if correction != T::zero() {
            let (argmax, _) = kept_weights
                .iter()
                .enumerate()
                .fold((0, T::zero()), |acc, (i, &w)| {
                    if w > acc.1 {
                        (i, w)
                    } else {
                        acc
                    }
                });
            kept_weights[argmax] += correction;
        }

        Ok(Self {
            dim,
            coords: kept_coords,
            weights: kept_weights,
        })
    }

    /// Uniform measure (weight 1/n each) on the given points, merging
    /// bitwise-identical points first.
    ///
    /// Exact bitwise equality is deliberate: ties produced by resampling
    /// the same RNG draw are the realistic duplicate source, and bitwise
    /// comparison keeps the merge deterministic.
    pub fn empirical(dim: usize, coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptySample);
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::Dimension(format!(
                "support dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "{} coordinates are not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        let mut first_index: HashMap<[u64; 3], usize> = HashMap::new();
        let mut unique_coords: Vec<T> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for i in 0..n {
            let p = &coords[i * dim..(i + 1) * dim];
            let mut key = [0u64; 3];
            for (k, &c) in p.iter().enumerate() {
                key[k] = c.bit_key();
            }
            match first_index.get(&key) {
                Some(&u) => counts[u] += 1,
                None => {
                    first_index.insert(key, counts.len());
                    unique_coords.extend_from_slice(p);
                    counts.push(1);
                }
            }
        }
        let inv_n = T::one() / T::of(n);
        let weights = counts.iter().map(|&c| T::of(c) * inv_n).collect();
        Self::new(dim, unique_coords, weights)
    }

    /// Number of atoms.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Shannon entropy H(P) = -sum p_i log p_i, in nats. Zero for a Dirac
    /// measure, log n for the uniform measure on n atoms.
    pub fn entropy(&self) -> T {
        compensated_sum(self.weights.iter().map(|&w| -w * w.ln()))
    }
}

/// Kullback-Leibler divergence sum_i p_i log(p_i / q_i).
///
/// `p` must be a probability vector (nonnegative, summing to one within
/// 1e-9); `q` must be strictly positive but need not be normalized.
/// Entries with p_i = 0 contribute zero.
pub fn kl_divergence<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!(
            "KL divergence needs equal lengths, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    if q.iter().any(|&x| x <= T::zero() || !x.is_finite()) {
        return Err(Error::Domain(
            "KL divergence requires strictly positive q".into(),
        ));
    }
    if p.iter().any(|&x| x < T::zero() || !x.is_finite()) {
        return Err(Error::Domain("negative entry in p".into()));
    }
    let total = compensated_sum(p.iter().copied());
    if (total - T::one()).abs() > T::of(1e-9) {
        return Err(Error::Domain(format!(
            "p is not a probability vector (sums to {total})"
        )));
    }
    Ok(compensated_sum(p.iter().zip(q).map(|(&pi, &qi)| {
        if pi == T::zero() {
            T::zero()
        } else {
            pi * (pi / qi).ln()
        }
    })))
}

/// A grayscale raster: `rows * cols` gray levels in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayscaleImage<T: Real = f64> {
    rows: usize,
    cols: usize,
    pixels: Vec<T>,
}

impl<T: Real> GrayscaleImage<T> {
    pub fn new(rows: usize, cols: usize, pixels: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Domain("image dimensions must be positive".into()));
        }
        if pixels.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} pixels do not fill a {rows} x {cols} image",
                pixels.len()
            )));
        }
        if pixels
            .iter()
            .any(|&g| !g.is_finite() || g < T::zero() || g > T::one())
        {
            return Err(Error::Domain("gray level outside [0, 1]".into()));
        }
        if compensated_sum(pixels.iter().copied()) <= T::zero() {
            return Err(Error::AllBlackImage);
        }
        Ok(Self { rows, cols, pixels })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[T] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.pixels[row * self.cols + col]
    }

    pub fn transposed(&self) -> Self {
        let mut pixels = vec![T::zero(); self.pixels.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                pixels[j * self.rows + i] = self.get(i, j);
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            pixels,
        }
    }
}

/// Normalizes an image to a probability measure: one atom per nonzero
/// pixel at the grid coordinate (row/rows, col/cols) in [0, 1]^2, with
/// weight g_ij / sum g.
///
/// The unit-square placement bounds the support diameter, which the fast
/// summation geometry relies on.
pub fn measure_from_image<T: Real>(img: &GrayscaleImage<T>) -> Result<DiscreteMeasure<T>> {
    let total = compensated_sum(img.pixels.iter().copied());
    if total <= T::zero() {
        return Err(Error::AllBlackImage);
    }
    let rows_t = T::of(img.rows);
    let cols_t = T::of(img.cols);
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for i in 0..img.rows {
        for j in 0..img.cols {
            let g = img.get(i, j);
            if g > T::zero() {
                coords.push(T::of(i) / rows_t);
                coords.push(T::of(j) / cols_t);
                weights.push(g);
            }
        }
    }
    DiscreteMeasure::new(2, coords, weights)
}

/// Best n-point approximation of a 1-D distribution given by its quantile
/// function: atoms at the quantiles s_i = cdf_inverse(i/(n+1)) and, as
/// weights, the probability mass of each atom's midpoint cell.
///
/// Cell masses need the CDF itself; it is recovered from the quantile
/// function by monotone bisection, with the end cells receiving the full
/// tail mass.
pub fn quantile_quantizer<T: Real>(
    cdf_inverse: impl Fn(T) -> T,
    n_atoms: usize,
) -> Result<DiscreteMeasure<T>> {
    if n_atoms < 1 {
        return Err(Error::Domain("quantizer needs at least one atom".into()));
    }
    let n_t = T::of(n_atoms as f64 + 1.0);
    let atoms: Vec<T> = (1..=n_atoms)
        .map(|i| cdf_inverse(T::of(i) / n_t))
        .collect();
    for pair in atoms.windows(2) {
        if pair[1] < pair[0] {
            return Err(Error::Domain(
                "cdf_inverse is not monotonically non-decreasing".into(),
            ));
        }
    }

    // cdf(m) = sup { u in (0,1) : cdf_inverse(u) <= m }.
    let cdf = |m: T| -> T {
        let mut lo = T::zero();
        let mut hi = T::one();
        for _ in 0..128 {
            let mid = (lo + hi) / T::of(2.0);
            if cdf_inverse(mid) <= m {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= T::epsilon() {
                break;
            }
        }
        lo
    };

    let mut cuts = Vec::with_capacity(n_atoms + 1);
    cuts.push(T::zero());
    for w in atoms.windows(2) {
        cuts.push(cdf((w[0] + w[1]) / T::of(2.0)));
    }
    cuts.push(T::one());
    let weights: Vec<T> = cuts.windows(2).map(|c| c[1] - c[0]).collect();

    DiscreteMeasure::new(1, atoms, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn measure(coords: Vec<f64>, weights: Vec<f64>) -> DiscreteMeasure<f64> {
        DiscreteMeasure::new(1, coords, weights).unwrap()
    }

    #[test]
    fn construction_drops_zero_weights_and_normalizes() {
        let m = measure(vec![0.0, 1.0, 2.0], vec![0.2, 0.0, 0.6]);
        assert_eq!(m.len(), 2);
        assert_eq!(m.coords(), &[0.0, 2.0]);
        assert_relative_eq!(m.weights()[0], 0.25, max_relative = 1e-14);
        assert_relative_eq!(m.weights()[1], 0.75, max_relative = 1e-14);
        let sum: f64 = m.weights().iter().sum();
        assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(
            DiscreteMeasure::<f64>::new(1, vec![], vec![]),
            Err(Error::EmptySample)
        ));
        assert!(DiscreteMeasure::new(1, vec![0.0], vec![-0.5]).is_err());
        assert!(DiscreteMeasure::new(1, vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(4, vec![0.0; 4], vec![1.0]).is_err());
        assert!(DiscreteMeasure::new(1, vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn entropy_of_uniform_and_dirac() {
        let uniform = measure(vec![0.0, 1.0, 2.0, 3.0], vec![0.25; 4]);
        assert_relative_eq!(uniform.entropy(), 4.0f64.ln(), max_relative = 1e-14);

        let dirac = measure(vec![7.0], vec![1.0]);
        assert_eq!(dirac.entropy(), 0.0);

        // (0.5, 0.25, 0.25) -> 1.5 log 2
        let skew = measure(vec![0.0, 1.0, 2.0], vec![0.5, 0.25, 0.25]);
        assert_relative_eq!(skew.entropy(), 1.5 * 2.0f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn entropy_bounded_by_log_n() {
        let m = measure(vec![0.0, 1.0, 2.0], vec![0.6, 0.3, 0.1]);
        assert!(m.entropy() <= 3.0f64.ln());
    }

    #[test]
    fn kl_divergence_values() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(kl_divergence(&[1.0], &[1.0]).unwrap(), 0.0);
        // 0.75 ln 1.5 + 0.25 ln 0.5
        let expected = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
        assert_relative_eq!(
            kl_divergence(&[0.75, 0.25], &[0.5, 0.5]).unwrap(),
            expected,
            max_relative = 1e-14
        );
        assert_relative_eq!(expected, 0.130812035941137, max_relative = 1e-12);
    }

    #[test]
    fn kl_divergence_rejects_bad_input() {
        assert!(kl_divergence(&[1.0], &[1.0, 2.0]).is_err());
        assert!(kl_divergence(&[1.0], &[0.0]).is_err());
        assert!(kl_divergence(&[1.0], &[-1.0]).is_err());
        assert!(kl_divergence(&[0.9], &[1.0]).is_err());
    }

    #[test]
    fn empirical_merges_duplicates() {
        let m = DiscreteMeasure::empirical(1, vec![0.1, 0.1]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);

        let m = DiscreteMeasure::empirical(1, vec![0.1]).unwrap();
        assert_eq!(m.len(), 1);

        let m = DiscreteMeasure::empirical(2, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(m.len(), 2);
        assert_relative_eq!(m.weights()[0], 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn quantile_quantizer_uniform() {
        let m = quantile_quantizer(|u: f64| u, 3).unwrap();
        assert_eq!(m.len(), 3);
        assert_relative_eq!(m.coords()[0], 0.25, max_relative = 1e-12);
        assert_relative_eq!(m.coords()[1], 0.50, max_relative = 1e-12);
        assert_relative_eq!(m.coords()[2], 0.75, max_relative = 1e-12);
        // Midpoint cells (-inf, .375], (.375, .625], (.625, inf) under
        // uniform[0,1] carry masses .375, .25, .375.
        assert_relative_eq!(m.weights()[0], 0.375, epsilon = 1e-10);
        assert_relative_eq!(m.weights()[1], 0.250, epsilon = 1e-10);
        assert_relative_eq!(m.weights()[2], 0.375, epsilon = 1e-10);

        let single = quantile_quantizer(|u: f64| u, 1).unwrap();
        assert_eq!(single.len(), 1);
        assert_relative_eq!(single.coords()[0], 0.5, max_relative = 1e-12);
        assert_eq!(single.weights(), &[1.0]);

        let nine = quantile_quantizer(|u: f64| u, 9).unwrap();
        for (i, &s) in nine.coords().iter().enumerate() {
            assert_relative_eq!(s, (i as f64 + 1.0) / 10.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn empirical_of_many_draws_is_uniform() {
        // 1000 distinct draws: one atom each at weight 1/1000
        let coords: Vec<f64> = (0..1000).map(|i| (i as f64) * 0.001 + 0.0001).collect();
        let m = DiscreteMeasure::empirical(1, coords).unwrap();
        assert_eq!(m.len(), 1000);
        assert!(m.weights().iter().all(|&w| (w - 0.001).abs() < 1e-15));
        let sum: f64 = m.weights().iter().sum();
        assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
    }

    #[test]
    fn quantile_quantizer_rejects_zero_atoms() {
        assert!(quantile_quantizer(|u: f64| u, 0).is_err());
    }

    #[test]
    fn image_to_measure() {
        let img = GrayscaleImage::new(1, 1, vec![0.7]).unwrap();
        let m = measure_from_image(&img).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[1.0]);

        let img = GrayscaleImage::new(2, 1, vec![0.2, 0.6]).unwrap();
        let m = measure_from_image(&img).unwrap();
        assert_relative_eq!(m.weights()[0], 0.25, max_relative = 1e-14);
        assert_relative_eq!(m.weights()[1], 0.75, max_relative = 1e-14);
        // atoms live on (row/rows, col/cols)
        assert_eq!(m.point(0), &[0.0, 0.0]);
        assert_eq!(m.point(1), &[0.5, 0.0]);
    }

    #[test]
    fn all_black_image_is_rejected() {
        assert!(matches!(
            GrayscaleImage::new(2, 2, vec![0.0; 4]),
            Err(Error::AllBlackImage)
        ));
    }

    #[test]
    fn image_entropy_invariant_under_transposition() {
        let pixels: Vec<f64> = (0..12).map(|i| (i as f64) / 20.0).collect();
        let img = GrayscaleImage::new(3, 4, pixels).unwrap();
        let e1 = measure_from_image(&img).unwrap().entropy();
        let e2 = measure_from_image(&img.transposed()).unwrap().entropy();
        assert_relative_eq!(e1, e2, max_relative = 1e-13);
    }

    #[test]
    fn product_measure_entropy_is_additive() {
        let p = measure(vec![0.0, 1.0, 2.0], vec![0.5, 0.3, 0.2]);
        let q = measure(vec![0.0, 1.0], vec![0.4, 0.6]);
        let mut prod = Vec::new();
        for &a in p.weights() {
            for &b in q.weights() {
                prod.push(a * b);
            }
        }
        let h_prod: f64 = prod.iter().map(|&w| -w * w.ln()).sum();
        assert_relative_eq!(h_prod, p.entropy() + q.entropy(), max_relative = 1e-12);
    }
}
