use crate::real::Real;

/// Neumaier-compensated sum. Weight vectors must sum to 1 within 1e-12
/// even at n = 10^6 and higher, which plain accumulation does not deliver.
pub fn compensated_sum<T: Real>(values: impl IntoIterator<Item = T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// l1 distance between two equal-length vectors.
pub fn l1_distance<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    compensated_sum(a.iter().zip(b).map(|(&x, &y)| (x - y).abs()))
}

/// Squared Euclidean distance between two points given as coordinate slices.
#[inline]
pub fn dist_sq<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Euclidean distance raised to the power `r`, with the common r = 1, 2
/// cases kept free of `powf`.
#[inline]
pub fn dist_pow<T: Real>(a: &[T], b: &[T], r: T) -> T {
    let sq = dist_sq(a, b);
    if r == T::of(2.0) {
        sq
    } else if r == T::one() {
        sq.sqrt()
    } else {
        sq.sqrt().powf(r)
    }
}

/// Ledger of the major allocations a computation performed, in bytes.
///
/// This is bookkeeping, not an allocator hook: each solver records the
/// arrays it allocates whose size depends on the problem, so tests and the
/// CLI report can assert e.g. that the NFFT path never holds an n x n-tilde
/// array.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog {
    entries: Vec<(String, usize)>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, label: impl Into<String>, bytes: usize) {
        self.entries.push((label.into(), bytes));
    }

    pub fn entries(&self) -> &[(String, usize)] {
        &self.entries
    }

    /// Upper estimate of the peak footprint: all major arrays live at once.
    pub fn peak_bytes(&self) -> usize {
        self.entries.iter().map(|(_, b)| b).sum()
    }

    pub fn largest_entry_bytes(&self) -> usize {
        self.entries.iter().map(|(_, b)| *b).max().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &MemoryLog) {
        self.entries.extend(other.entries.iter().cloned());
    }
}
