//! Confluent divided differences `f^[n]` and the memo cache that backs every
//! operator-integral contraction.
//!
//! The primary evaluator applies `f` to the Opitz matrix — the upper
//! bidiagonal matrix with the points on the diagonal and ones on the
//! superdiagonal — by the triangular recurrence on its entries: the `(i, j)`
//! entry of `f` of that matrix is `f^[j-i](x_i, …, x_j)`, so columns are
//! filled by difference quotients with a derivative (Taylor) branch once
//! points coincide, and the top-right entry is the answer. Points are sorted
//! first so that clustered arguments sit in contiguous blocks.
//!
//! Divided differences are symmetric in their arguments, so cache keys are
//! multisets of eigenvalue indices; the cache stores one table per
//! `(spectrum, tuple size)` pair, densely indexed by multiset rank.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use num_complex::Complex64;

use crate::functions::OperatorFunction;
use crate::util::binomial_u64;

/// Points closer than `1e-9·(1+|x|)` are treated as coincident; below that
/// gap the difference quotient loses more than half the mantissa.
pub const CONFLUENCE_TOL: f64 = 1e-9;

/// `f^[n](x_0, …, x_n)` for the `n+1` given points (any order, repeats fine).
///
/// ```
/// use spectral_action::divdiff::divided_difference;
/// use spectral_action::functions::ScalarFunction;
///
/// // The second divided difference of x² is its leading coefficient,
/// let xsq = ScalarFunction::rational(&[0.0, 0.0, 1.0], &[1.0]).unwrap();
/// let v = divided_difference(&xsq, &[0.3, 1.7, -2.2]);
/// assert!((v.re - 1.0).abs() < 1e-12);
///
/// // and coincident points take the derivative branch: f^[1](0,0) = f'(0).
/// let f = ScalarFunction::gaussian(1.0).unwrap();
/// assert_eq!(divided_difference(&f, &[0.0, 0.0]).re, 0.0);
/// ```
pub fn divided_difference(f: &dyn OperatorFunction, points: &[f64]) -> Complex64 {
    assert!(!points.is_empty(), "divided difference needs at least one point");
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    divided_difference_sorted(f, &pts)
}

/// Same, but the caller guarantees ascending points.
pub fn divided_difference_sorted(f: &dyn OperatorFunction, pts: &[f64]) -> Complex64 {
    let n = pts.len() - 1;
    if n == 0 {
        return f.derivative(0, pts[0]);
    }
    // Upper-triangular table, row-major in a flat vec; entry (i, j) at
    // i*(n+1)+j holds f^[j-i](x_i, …, x_j).
    let w = n + 1;
    let mut table = vec![Complex64::new(0.0, 0.0); w * w];
    for i in 0..w {
        table[i * w + i] = f.derivative(0, pts[i]);
    }
    let mut fact = 1.0;
    for off in 1..=n {
        fact *= off as f64;
        for i in 0..(w - off) {
            let j = i + off;
            let gap = pts[j] - pts[i];
            table[i * w + j] = if gap <= CONFLUENCE_TOL * (1.0 + pts[i].abs()) {
                f.derivative(off, pts[i]) / fact
            } else {
                (table[(i + 1) * w + j] - table[i * w + j - 1]) / gap
            };
        }
    }
    table[n]
}

/// The textbook recursion, literally: drop the last point two ways and take
/// the difference quotient. Exponential in `n` and unstable for clustered
/// points; kept as an independent oracle for tests and the bench baseline.
/// The trailing pair must be distinct.
#[doc(hidden)]
pub fn divided_difference_recursive(f: &dyn OperatorFunction, points: &[f64]) -> Complex64 {
    let n = points.len() - 1;
    if n == 0 {
        return f.derivative(0, points[0]);
    }
    let mut left = points.to_vec();
    left.pop();
    let mut right = points.to_vec();
    right.remove(n - 1);
    let dx = points[n - 1] - points[n];
    assert!(dx != 0.0, "recursive oracle needs distinct trailing points");
    (divided_difference_recursive(f, &left) - divided_difference_recursive(f, &right)) / dx
}

// ---------------------------------------------------------------------------
// Multiset ranking
// ---------------------------------------------------------------------------

/// Ranks multisets of a fixed size over `0..d` densely into `0..count()`.
#[derive(Debug, Clone)]
pub struct MultisetIndexer {
    d: usize,
    size: usize,
    /// Row `d'` holds the counts of multisets of size `j ≤ size` over `d'`
    /// symbols, flattened with stride `size + 1`.
    m: Vec<u64>,
    stride: usize,
}

impl MultisetIndexer {
    pub fn new(d: usize, size: usize) -> Self {
        let stride = size + 1;
        let mut m = vec![0u64; (d + 1) * stride];
        m[0] = 1;
        for dp in 1..=d {
            for j in 0..=size {
                m[dp * stride + j] = binomial_u64((dp - 1 + j) as u64, j as u64);
            }
        }
        Self { d, size, m, stride }
    }

    pub fn count(&self) -> usize {
        self.m[self.d * self.stride + self.size] as usize
    }

    /// Rank of the multiset given by symbol counts (must sum to `size`).
    #[inline]
    pub fn rank_counts(&self, counts: &[u32]) -> usize {
        debug_assert_eq!(counts.len(), self.d);
        let mut rank = 0u64;
        let mut remaining = self.size;
        for (sym, &c) in counts.iter().enumerate() {
            let c = c as usize;
            if c > 0 {
                let row = &self.m[(self.d - sym - 1) * self.stride..];
                for t in 0..c {
                    rank += row[remaining - t];
                }
                remaining -= c;
                if remaining == 0 {
                    break;
                }
            }
        }
        rank as usize
    }

    /// Rank of `counts` with one extra copy of `extra` added on the fly.
    #[inline]
    pub fn rank_counts_plus(&self, counts: &[u32], extra: usize) -> usize {
        let mut rank = 0u64;
        let mut remaining = self.size;
        for (sym, &c) in counts.iter().enumerate() {
            let c = c as usize + usize::from(sym == extra);
            if c > 0 {
                let row = &self.m[(self.d - sym - 1) * self.stride..];
                for t in 0..c {
                    rank += row[remaining - t];
                }
                remaining -= c;
                if remaining == 0 {
                    break;
                }
            }
        }
        rank as usize
    }

    /// Ranks of `counts + e_j` for every symbol `j` at once, in two sweeps.
    /// `counts` must sum to `size - 1`; `out` has length `d`.
    #[inline]
    pub fn rank_counts_plus_each(&self, counts: &[u32], out: &mut [usize]) {
        let d = self.d;
        debug_assert!(d < 32);
        // Backward pass: suffix[j] = contribution of symbols > j when the
        // extra copy sits at or before j (remaining excludes it).
        let mut suffix = 0u64;
        let mut consumed_after = 0usize; // Σ_{s>sym} c_s
        let mut suffixes = [0u64; 33];
        for sym in (0..d).rev() {
            suffixes[sym + 1] = suffix;
            let c = counts[sym] as usize;
            if c > 0 {
                // remaining before sym with the extra already placed earlier:
                // R = c_sym + consumed_after.
                let r = c + consumed_after;
                let row = &self.m[(d - sym - 1) * self.stride..];
                for t in 0..c {
                    suffix += row[r - t];
                }
                consumed_after += c;
            }
        }
        suffixes[0] = suffix;

        // Forward pass: prefix contributions with the extra placed later
        // (remaining includes it), plus the diagonal term.
        let mut prefix = 0u64;
        let mut remaining = self.size; // size = (Σ counts) + 1
        for sym in 0..d {
            let c = counts[sym] as usize;
            let row = &self.m[(d - sym - 1) * self.stride..];
            // Diagonal: this symbol holds the extra copy: c+1 terms.
            let mut diag = 0u64;
            for t in 0..=c {
                diag += row[remaining - t];
            }
            out[sym] = (prefix + diag + suffixes[sym + 1]) as usize;
            // Advance prefix with the plain c terms (extra placed later).
            for t in 0..c {
                prefix += row[remaining - t];
            }
            remaining -= c;
        }
    }

    /// All multisets as count vectors, in rank order.
    pub fn enumerate(&self) -> Vec<Vec<u32>> {
        let mut out = Vec::with_capacity(self.count());
        let mut counts = vec![0u32; self.d];
        self.enumerate_rec(0, self.size, &mut counts, &mut out);
        out
    }

    fn enumerate_rec(
        &self,
        sym: usize,
        remaining: usize,
        counts: &mut [u32],
        out: &mut Vec<Vec<u32>>,
    ) {
        if sym == self.d - 1 {
            counts[sym] = remaining as u32;
            out.push(counts.to_vec());
            counts[sym] = 0;
            return;
        }
        for c in 0..=remaining {
            counts[sym] = c as u32;
            self.enumerate_rec(sym + 1, remaining - c, counts, out);
        }
        counts[sym] = 0;
    }
}

// ---------------------------------------------------------------------------
// The cache
// ---------------------------------------------------------------------------

/// Key of an interned spectrum inside a [`DividedDifferenceCache`].
pub type SpectrumId = u32;

/// Memoized divided differences over fixed spectra.
///
/// Keys never touch raw floats: a spectrum is interned once (bitwise
/// comparison), and a value is addressed by the multiset of indices into it.
/// Whole tables are built per `(spectrum, tuple size)` on first use, so a
/// trace contraction touching `d^n` index paths reads at most
/// `C(d+n, n+1)`-many distinct entries. Reads are concurrent; a racing first
/// build computes the same table twice and keeps one copy.
pub struct DividedDifferenceCache {
    spectra: RwLock<Vec<Arc<Vec<f64>>>>,
    tables: RwLock<HashMap<(SpectrumId, u32), Arc<Vec<Complex64>>>>,
    lookups: AtomicU64,
}

impl Default for DividedDifferenceCache {
    fn default() -> Self {
        Self::new()
    }
}

impl DividedDifferenceCache {
    pub fn new() -> Self {
        Self {
            spectra: RwLock::new(Vec::new()),
            tables: RwLock::new(HashMap::new()),
            lookups: AtomicU64::new(0),
        }
    }

    /// Intern a point list; equal lists (bitwise) share an id.
    pub fn intern_spectrum(&self, points: &[f64]) -> SpectrumId {
        {
            let spectra = self.spectra.read().unwrap();
            for (i, s) in spectra.iter().enumerate() {
                if s.as_slice() == points {
                    return i as SpectrumId;
                }
            }
        }
        let mut spectra = self.spectra.write().unwrap();
        for (i, s) in spectra.iter().enumerate() {
            if s.as_slice() == points {
                return i as SpectrumId;
            }
        }
        spectra.push(Arc::new(points.to_vec()));
        (spectra.len() - 1) as SpectrumId
    }

    pub fn spectrum(&self, id: SpectrumId) -> Arc<Vec<f64>> {
        self.spectra.read().unwrap()[id as usize].clone()
    }

    /// The dense table of `f^[size-1]` values for all index multisets of
    /// `size` points from the spectrum, built once.
    pub fn table(
        &self,
        f: &dyn OperatorFunction,
        spectrum: SpectrumId,
        size: u32,
    ) -> Arc<Vec<Complex64>> {
        if let Some(t) = self.tables.read().unwrap().get(&(spectrum, size)) {
            return t.clone();
        }
        let points = self.spectrum(spectrum);
        let indexer = MultisetIndexer::new(points.len(), size as usize);
        let mut values = Vec::with_capacity(indexer.count());
        let mut tuple = Vec::with_capacity(size as usize);
        for counts in indexer.enumerate() {
            tuple.clear();
            for (sym, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    tuple.push(points[sym]);
                }
            }
            values.push(divided_difference(f, &tuple));
        }
        let fresh = Arc::new(values);
        let mut tables = self.tables.write().unwrap();
        tables.entry((spectrum, size)).or_insert(fresh).clone()
    }

    /// Memoized `f^[n]` at the points selected by `indices` (any order).
    pub fn value(
        &self,
        f: &dyn OperatorFunction,
        spectrum: SpectrumId,
        indices: &[usize],
    ) -> Complex64 {
        self.lookups.fetch_add(1, Ordering::Relaxed);
        let points = self.spectrum(spectrum);
        let indexer = MultisetIndexer::new(points.len(), indices.len());
        let mut counts = vec![0u32; points.len()];
        for &i in indices {
            counts[i] += 1;
        }
        let table = self.table(f, spectrum, indices.len() as u32);
        table[indexer.rank_counts(&counts)]
    }

    /// Total number of stored kernel values across all tables.
    pub fn entry_count(&self) -> usize {
        self.tables.read().unwrap().values().map(|t| t.len()).sum()
    }

    pub fn lookup_count(&self) -> u64 {
        self.lookups.load(Ordering::Relaxed)
    }
}
