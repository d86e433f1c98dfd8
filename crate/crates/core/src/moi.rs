//! Multiple operator integrals `T_{f^[n]}^{D_0,…,D_n}(V_1, …, V_n)` on
//! finite-dimensional Hilbert spaces.
//!
//! In finite dimensions the defining simplex/Fourier integral collapses to an
//! exact sum over eigenprojections,
//!
//! ```text
//! T = Σ  f^[n](λ⁰_{i₀}, …, λⁿ_{iₙ}) · P⁰_{i₀} V₁ P¹_{i₁} ⋯ Vₙ Pⁿ_{iₙ},
//! ```
//!
//! which this module evaluates with cached divided differences. Traces of the
//! all-equal-base form are contracted over closed index paths without ever
//! materializing the operator. The simplex/Fourier quadrature of the defining
//! integral is kept as an independent cross-check.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::divdiff::{divided_difference, DividedDifferenceCache, MultisetIndexer};
use crate::error::{Error, Result};
use crate::functions::{OperatorFunction, ScalarFunction};
use crate::matrix::ComplexMatrix;
use crate::operator::{schatten_norm, HermitianOperator, SpectralTriple};
use crate::quadrature::simplex_rule;

/// Refuse contractions touching more index paths than this.
pub const PATH_GUARD: f64 = 1e8;

/// Evaluation context: one scalar function plus its divided-difference cache.
/// All operator-integral evaluations against the same function should share a
/// context, so kernel values are computed once per spectrum.
///
/// ```
/// use std::sync::Arc;
/// use num_complex::Complex64;
/// use spectral_action::functions::ScalarFunction;
/// use spectral_action::matrix::ComplexMatrix;
/// use spectral_action::moi::MoiContext;
/// use spectral_action::operator::HermitianOperator;
///
/// // tr T_{f^[1]}^D(V) = tr(f'(D) V): the first derivative of the
/// // spectral action.
/// let f = ScalarFunction::gaussian(1.0).unwrap();
/// let d = HermitianOperator::new(ComplexMatrix::diag_real(&[0.7, -0.4])).unwrap();
/// let v = ComplexMatrix::from_real_rows(&[&[0.2, 0.5], &[0.5, -0.1]]).unwrap();
/// let ctx = MoiContext::new(Arc::new(f.clone()));
/// let tr = ctx.trace(&[&d, &d], &[&v]).unwrap();
/// let fprime = d.apply_function(|l| Complex64::new(f.eval(l, 1), 0.0));
/// let expected = (&fprime * &v).trace();
/// assert!((tr - expected).norm() < 1e-13);
/// ```
pub struct MoiContext {
    f: Arc<dyn OperatorFunction>,
    cache: DividedDifferenceCache,
}

impl MoiContext {
    pub fn new(f: Arc<dyn OperatorFunction>) -> Self {
        Self { f, cache: DividedDifferenceCache::new() }
    }

    pub fn function(&self) -> &Arc<dyn OperatorFunction> {
        &self.f
    }

    pub fn cache(&self) -> &DividedDifferenceCache {
        &self.cache
    }

    fn check_problem(
        bases: &[&HermitianOperator],
        args: &[&ComplexMatrix],
    ) -> Result<usize> {
        if bases.len() != args.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{} bases for {} arguments (need n+1)",
                bases.len(),
                args.len()
            )));
        }
        let dim = bases[0].dim();
        for b in bases {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch("base dimensions differ".into()));
            }
        }
        for a in args {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch("argument dimension differs".into()));
            }
        }
        Ok(dim)
    }

    fn all_bases_equal(bases: &[&HermitianOperator]) -> bool {
        bases.windows(2).all(|w| {
            w[0].eigenvalues() == w[1].eigenvalues()
                && w[0].matrix() == w[1].matrix()
        })
    }

    /// `T_{f^[n]}^{D_0,…,D_n}(V_1,…,V_n)` as a matrix.
    pub fn eigenbasis(
        &self,
        bases: &[&HermitianOperator],
        args: &[&ComplexMatrix],
    ) -> Result<ComplexMatrix> {
        let dim = Self::check_problem(bases, args)?;
        let n = args.len();
        if n == 0 {
            let f = &self.f;
            return Ok(bases[0].apply_function(|l| f.derivative(0, l)));
        }
        if (dim as f64).powi(n as i32 + 1) > PATH_GUARD {
            return Err(Error::GuardExceeded(format!("dim^(n+1) = {dim}^{}", n + 1)));
        }

        let tildes: Vec<ComplexMatrix> = (0..n)
            .map(|k| {
                &(&bases[k].eigenvectors().adjoint() * args[k]) * bases[k + 1].eigenvectors()
            })
            .collect();

        let mut w = ComplexMatrix::zeros(dim);
        if Self::all_bases_equal(bases) {
            let spec = self.cache.intern_spectrum(bases[0].eigenvalues());
            let table = self.cache.table(self.f.as_ref(), spec, n as u32 + 1);
            let indexer = MultisetIndexer::new(dim, n + 1);
            let mut counts = vec![0u32; dim];
            for i0 in 0..dim {
                counts[i0] += 1;
                fill_operator_equal(
                    1,
                    i0,
                    i0,
                    Complex64::new(1.0, 0.0),
                    &mut counts,
                    &mut w,
                    &table,
                    &indexer,
                    &tildes,
                    dim,
                    n,
                );
                counts[i0] -= 1;
            }
        } else {
            let (offsets, flat) = flatten_spectra(bases);
            let mut memo: HashMap<Vec<u16>, Complex64> = HashMap::new();
            let mut idxs = vec![0usize; n + 1];
            fill_operator_general(
                0,
                Complex64::new(1.0, 0.0),
                &mut idxs,
                &mut w,
                &mut memo,
                self.f.as_ref(),
                &offsets,
                &flat,
                &tildes,
                dim,
                n,
            );
        }
        // Back to the standard basis: U_0 W U_n†.
        Ok(&(bases[0].eigenvectors() * &w) * &bases[n].eigenvectors().adjoint())
    }

    /// `tr T_{f^[n]}^{D_0,…,D_n}(V_1,…,V_n)` via closed index paths.
    pub fn trace(
        &self,
        bases: &[&HermitianOperator],
        args: &[&ComplexMatrix],
    ) -> Result<Complex64> {
        let dim = Self::check_problem(bases, args)?;
        let n = args.len();
        if n == 0 {
            let f = &self.f;
            return Ok(bases[0].eigenvalues().iter().map(|&l| f.derivative(0, l)).sum());
        }
        if (dim as f64).powi(n as i32) > PATH_GUARD {
            return Err(Error::GuardExceeded(format!("dim^n = {dim}^{n}")));
        }

        if Self::all_bases_equal(bases) {
            let tildes: Vec<ComplexMatrix> =
                args.iter().map(|v| bases[0].to_eigenbasis(v)).collect();
            let spec = self.cache.intern_spectrum(bases[0].eigenvalues());
            let table = self.cache.table(self.f.as_ref(), spec, n as u32 + 1);
            let indexer = MultisetIndexer::new(dim, n + 1);
            let flat: Vec<&[Complex64]> = tildes.iter().map(|t| t.data()).collect();
            // Parallel over the leading index; per-branch sums stay ordered.
            let partials: Vec<Complex64> = (0..dim)
                .into_par_iter()
                .map(|i0| {
                    // i0 enters the closed tuple twice: once as the path
                    // start, once as the closing point.
                    let mut counts = vec![0u32; dim];
                    counts[i0] += 2;
                    let mut ranks = vec![0usize; dim];
                    let mut acc = Complex64::new(0.0, 0.0);
                    trace_closed_equal(
                        1,
                        i0,
                        i0,
                        Complex64::new(1.0, 0.0),
                        &mut counts,
                        &mut ranks,
                        &mut acc,
                        &table,
                        &indexer,
                        &flat,
                        dim,
                        n,
                    );
                    acc
                })
                .collect();
            return Ok(partials.into_iter().sum());
        }

        // Mixed bases: closing factor B = U_n† U_0 re-expresses the trace in
        // the leading eigenbasis.
        let tildes: Vec<ComplexMatrix> = (0..n)
            .map(|k| {
                &(&bases[k].eigenvectors().adjoint() * args[k]) * bases[k + 1].eigenvectors()
            })
            .collect();
        let closing = &bases[n].eigenvectors().adjoint() * bases[0].eigenvectors();
        let (offsets, flat) = flatten_spectra(bases);
        let mut memo: HashMap<Vec<u16>, Complex64> = HashMap::new();
        let mut idxs = vec![0usize; n + 1];
        let mut acc = Complex64::new(0.0, 0.0);
        trace_closed_general(
            0,
            Complex64::new(1.0, 0.0),
            &mut idxs,
            &mut acc,
            &mut memo,
            self.f.as_ref(),
            &offsets,
            &flat,
            &tildes,
            &closing,
            dim,
            n,
        );
        Ok(acc)
    }

    /// Taylor remainder after order `k_order`:
    /// `tr T^{D+V, D, …, D}_{f^[k+1]}(V, …, V)`.
    pub fn taylor_remainder(
        &self,
        d: &HermitianOperator,
        v: &ComplexMatrix,
        k_order: usize,
    ) -> Result<Complex64> {
        if v.frobenius_norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let perturbed = HermitianOperator::new(d.matrix() + v)?;
        let mut bases: Vec<&HermitianOperator> = vec![&perturbed];
        for _ in 0..=k_order {
            bases.push(d);
        }
        let args: Vec<&ComplexMatrix> = (0..=k_order).map(|_| v).collect();
        self.trace(&bases, &args)
    }
}

/// The closed-path trace contraction with no divided-difference reuse at
/// all: every index path recomputes its kernel value from scratch. This is
/// the baseline the memoized path is benchmarked against; it produces the
/// same value as [`MoiContext::trace`] with all-equal bases.
pub fn trace_contraction_uncached(
    f: &dyn OperatorFunction,
    d: &HermitianOperator,
    args: &[&ComplexMatrix],
) -> Result<Complex64> {
    let n = args.len();
    let dim = d.dim();
    if n == 0 {
        return Ok(d.eigenvalues().iter().map(|&l| f.derivative(0, l)).sum());
    }
    if (dim as f64).powi(n as i32) > PATH_GUARD {
        return Err(Error::GuardExceeded(format!("dim^n = {dim}^{n}")));
    }
    let tildes: Vec<ComplexMatrix> = args.iter().map(|v| d.to_eigenbasis(v)).collect();
    let eigs = d.eigenvalues();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut points = vec![0.0; n + 1];
    for i0 in 0..dim {
        points[0] = eigs[i0];
        uncached_walk(1, i0, i0, Complex64::new(1.0, 0.0), &mut points, &mut acc, f, eigs, &tildes, dim, n);
    }
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn uncached_walk(
    level: usize,
    i0: usize,
    prev: usize,
    partial: Complex64,
    points: &mut [f64],
    acc: &mut Complex64,
    f: &dyn OperatorFunction,
    eigs: &[f64],
    tildes: &[ComplexMatrix],
    dim: usize,
    n: usize,
) {
    if level == n {
        let closing = tildes[n - 1].get(prev, i0);
        if closing.re == 0.0 && closing.im == 0.0 {
            return;
        }
        points[n] = eigs[i0];
        *acc += partial * closing * divided_difference(f, points);
        return;
    }
    for cur in 0..dim {
        let edge = tildes[level - 1].get(prev, cur);
        if edge.re == 0.0 && edge.im == 0.0 {
            continue;
        }
        points[level] = eigs[cur];
        uncached_walk(level + 1, i0, cur, partial * edge, points, acc, f, eigs, tildes, dim, n);
    }
}

fn flatten_spectra(bases: &[&HermitianOperator]) -> (Vec<usize>, Vec<f64>) {
    // Bases with identical spectra (bitwise) share a segment of the flat
    // point list, so index multisets stay canonical.
    let mut segments: Vec<&[f64]> = Vec::new();
    let mut offsets = Vec::with_capacity(bases.len());
    for b in bases {
        let eigs = b.eigenvalues();
        let pos = segments.iter().position(|s| *s == eigs);
        match pos {
            Some(i) => {
                let off: usize = segments[..i].iter().map(|s| s.len()).sum();
                offsets.push(off);
            }
            None => {
                let off: usize = segments.iter().map(|s| s.len()).sum();
                offsets.push(off);
                segments.push(eigs);
            }
        }
    }
    let flat: Vec<f64> = segments.iter().flat_map(|s| s.iter().copied()).collect();
    (offsets, flat)
}

/// Closed-path walker over equal bases. `counts` carries the leading index
/// twice (path start and closing point), so at the fused last level the leaf
/// multiset is `counts + e_cur` and all `dim` leaf ranks come from one sweep.
#[allow(clippy::too_many_arguments)]
fn trace_closed_equal(
    level: usize,
    i0: usize,
    prev: usize,
    partial: Complex64,
    counts: &mut [u32],
    ranks: &mut [usize],
    acc: &mut Complex64,
    table: &[Complex64],
    indexer: &MultisetIndexer,
    flat: &[&[Complex64]],
    dim: usize,
    n: usize,
) {
    if level == n {
        // Only n = 1 lands here: the single closed path (i0, i0).
        let closing = flat[n - 1][prev * dim + i0];
        if closing.re != 0.0 || closing.im != 0.0 {
            *acc += partial * closing * table[indexer.rank_counts(counts)];
        }
        return;
    }
    if level + 1 == n {
        // Fused last level: the edge into i_{n-1} and the closing edge back
        // to i0 combine at each leaf.
        let row = &flat[n - 2][prev * dim..prev * dim + dim];
        let closing_col = flat[n - 1];
        indexer.rank_counts_plus_each(counts, ranks);
        for (cur, &edge) in row.iter().enumerate() {
            if edge.re == 0.0 && edge.im == 0.0 {
                continue;
            }
            let closing = closing_col[cur * dim + i0];
            if closing.re == 0.0 && closing.im == 0.0 {
                continue;
            }
            *acc += partial * edge * closing * table[ranks[cur]];
        }
        return;
    }
    let row = &flat[level - 1][prev * dim..prev * dim + dim];
    for (cur, &edge) in row.iter().enumerate() {
        if edge.re == 0.0 && edge.im == 0.0 {
            continue;
        }
        counts[cur] += 1;
        trace_closed_equal(
            level + 1,
            i0,
            cur,
            partial * edge,
            counts,
            ranks,
            acc,
            table,
            indexer,
            flat,
            dim,
            n,
        );
        counts[cur] -= 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn fill_operator_equal(
    level: usize,
    i0: usize,
    prev: usize,
    partial: Complex64,
    counts: &mut [u32],
    w: &mut ComplexMatrix,
    table: &[Complex64],
    indexer: &MultisetIndexer,
    tildes: &[ComplexMatrix],
    dim: usize,
    n: usize,
) {
    if level == n {
        // prev = i_{n-1}; choose the final index and weight the multiset.
        for last in 0..dim {
            let edge = tildes[n - 1].get(prev, last);
            if edge.re == 0.0 && edge.im == 0.0 {
                continue;
            }
            let weight = table[indexer.rank_counts_plus(counts, last)];
            let val = partial * edge * weight;
            w.set(i0, last, w.get(i0, last) + val);
        }
        return;
    }
    for cur in 0..dim {
        let edge = tildes[level - 1].get(prev, cur);
        if edge.re == 0.0 && edge.im == 0.0 {
            continue;
        }
        counts[cur] += 1;
        fill_operator_equal(
            level + 1,
            i0,
            cur,
            partial * edge,
            counts,
            w,
            table,
            indexer,
            tildes,
            dim,
            n,
        );
        counts[cur] -= 1;
    }
}

#[allow(clippy::too_many_arguments)]
fn fill_operator_general(
    level: usize,
    partial: Complex64,
    idxs: &mut [usize],
    w: &mut ComplexMatrix,
    memo: &mut HashMap<Vec<u16>, Complex64>,
    f: &dyn OperatorFunction,
    offsets: &[usize],
    flat: &[f64],
    tildes: &[ComplexMatrix],
    dim: usize,
    n: usize,
) {
    if level == n + 1 {
        let mut key: Vec<u16> =
            idxs.iter().enumerate().map(|(k, &i)| (offsets[k] + i) as u16).collect();
        key.sort_unstable();
        let weight = *memo.entry(key.clone()).or_insert_with(|| {
            let pts: Vec<f64> = key.iter().map(|&i| flat[i as usize]).collect();
            divided_difference(f, &pts)
        });
        let val = partial * weight;
        w.set(idxs[0], idxs[n], w.get(idxs[0], idxs[n]) + val);
        return;
    }
    for cur in 0..dim {
        let edge = if level == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            tildes[level - 1].get(idxs[level - 1], cur)
        };
        if edge.re == 0.0 && edge.im == 0.0 {
            continue;
        }
        idxs[level] = cur;
        fill_operator_general(
            level + 1,
            partial * edge,
            idxs,
            w,
            memo,
            f,
            offsets,
            flat,
            tildes,
            dim,
            n,
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn trace_closed_general(
    level: usize,
    partial: Complex64,
    idxs: &mut [usize],
    acc: &mut Complex64,
    memo: &mut HashMap<Vec<u16>, Complex64>,
    f: &dyn OperatorFunction,
    offsets: &[usize],
    flat: &[f64],
    tildes: &[ComplexMatrix],
    closing: &ComplexMatrix,
    dim: usize,
    n: usize,
) {
    if level == n + 1 {
        let close = closing.get(idxs[n], idxs[0]);
        if close.re == 0.0 && close.im == 0.0 {
            return;
        }
        let mut key: Vec<u16> =
            idxs.iter().enumerate().map(|(k, &i)| (offsets[k] + i) as u16).collect();
        key.sort_unstable();
        let weight = *memo.entry(key.clone()).or_insert_with(|| {
            let pts: Vec<f64> = key.iter().map(|&i| flat[i as usize]).collect();
            divided_difference(f, &pts)
        });
        *acc += partial * close * weight;
        return;
    }
    for cur in 0..dim {
        let edge = if level == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            tildes[level - 1].get(idxs[level - 1], cur)
        };
        if edge.re == 0.0 && edge.im == 0.0 {
            continue;
        }
        idxs[level] = cur;
        trace_closed_general(
            level + 1,
            partial * edge,
            idxs,
            acc,
            memo,
            f,
            offsets,
            flat,
            tildes,
            closing,
            dim,
            n,
        );
    }
}

// ---------------------------------------------------------------------------
// Simplex / Fourier quadrature cross-check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct QuadratureSettings {
    /// Gauss–Legendre points per simplex dimension.
    pub simplex_points: usize,
    /// Use every `t_stride`-th point of the Fourier grid.
    pub t_stride: usize,
    /// Drop grid points whose transform magnitude is below this times the peak.
    pub relative_cutoff: f64,
    /// Error estimate above this fails the call.
    pub fail_above: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self { simplex_points: 24, t_stride: 1, relative_cutoff: 1e-14, fail_above: 1e-4 }
    }
}

/// `T_{f^[n]}` by direct quadrature of the defining integral over
/// `Δ_n × R` against `σ × (f^{(n)})^∧`: the independent cross-check of the
/// eigenbasis evaluation. Returns the operator and an error estimate taken
/// from a coarser re-evaluation.
pub fn moi_quadrature(
    f: &ScalarFunction,
    bases: &[&HermitianOperator],
    args: &[&ComplexMatrix],
    settings: &QuadratureSettings,
) -> Result<(ComplexMatrix, f64)> {
    let n = args.len();
    if n > 3 {
        return Err(Error::GuardExceeded(format!(
            "quadrature cross-check supports n ≤ 3, got {n}"
        )));
    }
    MoiContext::check_problem(bases, args)?;

    let full = quadrature_pass(f, bases, args, settings.simplex_points, settings)?;
    let coarse_pts = (settings.simplex_points / 2).max(4);
    let coarse = quadrature_pass(f, bases, args, coarse_pts, settings)?;
    let err = (&full - &coarse).frobenius_norm()
        + f.profile(0)?.tail_bound * args.iter().map(|a| a.max_abs().max(1.0)).product::<f64>();
    if err > settings.fail_above {
        return Err(Error::QuadratureFailure(format!(
            "error estimate {err:.3e} above {:.3e}",
            settings.fail_above
        )));
    }
    Ok((full, err))
}

fn quadrature_pass(
    f: &ScalarFunction,
    bases: &[&HermitianOperator],
    args: &[&ComplexMatrix],
    simplex_points: usize,
    settings: &QuadratureSettings,
) -> Result<ComplexMatrix> {
    let n = args.len();
    let dim = bases[0].dim();
    let profile = f.profile(0)?;

    // (f^{(n)})^∧(t) = (it)^n f̂(t), restricted to points that matter.
    let peak = profile.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut t_points: Vec<(f64, Complex64)> = Vec::new();
    let mut i = 0;
    while i < profile.len() {
        let v = profile.values[i];
        if v.norm() >= settings.relative_cutoff * peak {
            let t = profile.t_at(i);
            let it = Complex64::new(0.0, t);
            t_points.push((t, it.powu(n as u32) * v * profile.step * settings.t_stride as f64));
        }
        i += settings.t_stride;
    }

    let (s_nodes, s_weights) = simplex_rule(n, simplex_points);

    // Work in per-base eigenbases: the (i0, …, in) entry couples through
    // e^{i t Σ_j s_j λ_{i_j}}; assemble entrywise, then map back.
    let tildes: Vec<ComplexMatrix> = (0..n)
        .map(|k| &(&bases[k].eigenvectors().adjoint() * args[k]) * bases[k + 1].eigenvectors())
        .collect();

    let mut w = ComplexMatrix::zeros(dim);
    let mut idxs = vec![0usize; n + 1];
    quadrature_fill(
        0,
        Complex64::new(1.0, 0.0),
        &mut idxs,
        &mut w,
        &t_points,
        &s_nodes,
        &s_weights,
        bases,
        &tildes,
        dim,
        n,
    );
    Ok(&(bases[0].eigenvectors() * &w) * &bases[n].eigenvectors().adjoint())
}

#[allow(clippy::too_many_arguments)]
fn quadrature_fill(
    level: usize,
    partial: Complex64,
    idxs: &mut [usize],
    w: &mut ComplexMatrix,
    t_points: &[(f64, Complex64)],
    s_nodes: &[Vec<f64>],
    s_weights: &[f64],
    bases: &[&HermitianOperator],
    tildes: &[ComplexMatrix],
    dim: usize,
    n: usize,
) {
    if level == n + 1 {
        let mut kernel = Complex64::new(0.0, 0.0);
        for (node, &sw) in s_nodes.iter().zip(s_weights) {
            let mut freq = 0.0;
            for (j, &i) in idxs.iter().enumerate() {
                freq += node[j] * bases[j].eigenvalues()[i];
            }
            let mut inner = Complex64::new(0.0, 0.0);
            for &(t, c) in t_points {
                inner += c * Complex64::new(0.0, t * freq).exp();
            }
            kernel += sw * inner;
        }
        let val = partial * kernel;
        w.set(idxs[0], idxs[n], w.get(idxs[0], idxs[n]) + val);
        return;
    }
    for cur in 0..dim {
        let edge = if level == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            tildes[level - 1].get(idxs[level - 1], cur)
        };
        if edge.re == 0.0 && edge.im == 0.0 {
            continue;
        }
        idxs[level] = cur;
        quadrature_fill(
            level + 1,
            partial * edge,
            idxs,
            w,
            t_points,
            s_nodes,
            s_weights,
            bases,
            tildes,
            dim,
            n,
        );
    }
}

// ---------------------------------------------------------------------------
// Bound verification
// ---------------------------------------------------------------------------

/// Outcome of checking the weighted-resolvent rewriting of `T_{f^[n]}`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AddedWeightsReport {
    pub s: u32,
    pub n: usize,
    pub lhs_norm: f64,
    pub max_deviation: f64,
    pub term_count: usize,
}

/// Evaluates both sides of the resolvent-weight identity
///
/// ```text
/// T_{f^[n]}^{D_0..D_n}(V_1..V_n) =
///   Σ_{k=0}^{min(s,n)} (-1)^k Σ_{j_0≥0, j_1..j_k≥1, Σ j = s}
///     T_{(f u^{s-k})^[n-k]}^{D_0..D_{n-k}}(V_1..V_{n-k}) (D_{n-k}-i)^{-j_0}
///     · V_{n-k+1}(D_{n-k+1}-i)^{-j_1} ⋯ V_n (D_n-i)^{-j_k}
/// ```
///
/// and reports the largest entrywise deviation.
pub fn verify_added_weights(
    f: &ScalarFunction,
    bases: &[&HermitianOperator],
    args: &[&ComplexMatrix],
    s: u32,
) -> Result<AddedWeightsReport> {
    let n = args.len();
    let lhs = MoiContext::new(Arc::new(f.clone())).eigenbasis(bases, args)?;

    let dim = bases[0].dim();
    let mut rhs = ComplexMatrix::zeros(dim);
    let mut term_count = 0;
    for k in 0..=(s as usize).min(n) {
        let weighted = Arc::new(f.weighted(s - k as u32));
        let ctx = MoiContext::new(weighted);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        for comp in weight_compositions(s as usize, k) {
            term_count += 1;
            let head =
                ctx.eigenbasis(&bases[..=(n - k)], &args[..(n - k)])?;
            let mut term = &head * &bases[n - k].resolvent_power(comp[0] as u32);
            for (l, &j) in comp[1..].iter().enumerate() {
                let pos = n - k + 1 + l; // argument index V_pos (1-based pos)
                term = &term * args[pos - 1];
                term = &term * &bases[pos].resolvent_power(j as u32);
            }
            rhs = &rhs + &term.scale_re(sign);
        }
    }
    let max_deviation = (&lhs - &rhs).max_abs();
    Ok(AddedWeightsReport { s, n, lhs_norm: lhs.frobenius_norm(), max_deviation, term_count })
}

/// All `(j_0, j_1, …, j_k)` with `j_0 ≥ 0`, `j_1..j_k ≥ 1`, summing to `s`.
fn weight_compositions(s: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == current.len() {
            if left == 0 {
                out.push(current.clone());
            }
            return;
        }
        let lo = usize::from(pos != 0);
        if left < lo {
            return;
        }
        for j in lo..=left {
            current[pos] = j;
            rec(pos + 1, left - j, current, out);
        }
    }
    let mut out = Vec::new();
    let mut current = vec![0usize; k + 1];
    rec(0, s, &mut current, &mut out);
    out
}

/// Outcome of the trace-norm inequality check
/// `‖T_{f^[n]}(V_1..V_n)‖₁ ≤ c_{s,n}(f) Π‖V_j‖ ‖(D-i)^{-1}‖_s^s`
/// (with the `(1+‖V‖)^{2s}` factor when the first base is perturbed).
#[derive(Debug, Clone, serde::Serialize)]
pub struct TraceBoundReport {
    pub s: u32,
    pub n: usize,
    pub trace_norm: f64,
    pub bound: f64,
    pub ratio: f64,
    pub holds: bool,
    pub perturbed: bool,
}

pub fn verify_trace_bound(
    triple: &SpectralTriple,
    f: &ScalarFunction,
    args: &[&ComplexMatrix],
    perturbation: Option<&ComplexMatrix>,
) -> Result<TraceBoundReport> {
    let n = args.len();
    let s = triple.summability();
    let d = triple.d_op().as_ref();
    let ctx = MoiContext::new(Arc::new(f.clone()));

    let (t_op, factor, perturbed) = match perturbation {
        None => {
            let bases: Vec<&HermitianOperator> = vec![d; n + 1];
            (ctx.eigenbasis(&bases, args)?, 1.0, false)
        }
        Some(v) => {
            let dv = HermitianOperator::new(d.matrix() + v)?;
            let mut bases: Vec<&HermitianOperator> = vec![&dv];
            bases.extend(std::iter::repeat_n(d, n));
            let v_norm = schatten_norm(v, f64::INFINITY)?;
            (ctx.eigenbasis(&bases, args)?, (1.0 + v_norm).powi(2 * s as i32), true)
        }
    };

    let trace_norm = schatten_norm(&t_op, 1.0)?;
    let mut prod = 1.0;
    for a in args {
        prod *= schatten_norm(a, f64::INFINITY)?;
    }
    let bound = f.bound_constant(s, n as u32)? * prod * factor * triple.resolvent_power_norm();
    Ok(TraceBoundReport {
        s,
        n,
        trace_norm,
        bound,
        ratio: if bound > 0.0 { trace_norm / bound } else { f64::INFINITY },
        holds: trace_norm <= bound * (1.0 + 1e-12) + 1e-300,
        perturbed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ComplexMatrix;

    fn xsq() -> ScalarFunction {
        ScalarFunction::rational(&[0.0, 0.0, 1.0], &[1.0]).unwrap()
    }

    fn diag_pm1() -> HermitianOperator {
        HermitianOperator::new(ComplexMatrix::diag_real(&[1.0, -1.0])).unwrap()
    }

    #[test]
    fn order_zero_is_function_of_base() {
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = diag_pm1();
        let ctx = MoiContext::new(Arc::new(f.clone()));
        let t = ctx.eigenbasis(&[&d], &[]).unwrap();
        let expected = d.apply_function(|l| Complex64::new(f.eval(l, 0), 0.0));
        assert!((&t - &expected).frobenius_norm() < 1e-14);
    }

    #[test]
    fn first_order_for_square_is_anticommutator() {
        // f = x², D = diag(1,-1): T_{f^[1]}(V) = DV + VD since
        // f^[1](λ_i, λ_j) = λ_i + λ_j.
        let f = xsq();
        let d = diag_pm1();
        let v = ComplexMatrix::from_real_rows(&[&[0.3, 0.7], &[0.7, -0.1]]).unwrap();
        let ctx = MoiContext::new(Arc::new(f));
        let t = ctx.eigenbasis(&[&d, &d], &[&v]).unwrap();
        let expected = &(d.matrix() * &v) + &(&v * d.matrix());
        assert!((&t - &expected).frobenius_norm() < 1e-13);
    }

    #[test]
    fn trace_matches_materialized_operator() {
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = HermitianOperator::new(
            ComplexMatrix::from_real_rows(&[&[0.4, 0.2], &[0.2, -0.6]]).unwrap(),
        )
        .unwrap();
        let v1 = ComplexMatrix::from_real_rows(&[&[0.1, 0.5], &[0.5, 0.2]]).unwrap();
        let v2 = ComplexMatrix::from_real_rows(&[&[-0.3, 0.1], &[0.1, 0.8]]).unwrap();
        let ctx = MoiContext::new(Arc::new(f));
        let full = ctx.eigenbasis(&[&d, &d, &d], &[&v1, &v2]).unwrap();
        let tr = ctx.trace(&[&d, &d, &d], &[&v1, &v2]).unwrap();
        assert!((tr - full.trace()).norm() < 1e-12);
    }

    #[test]
    fn first_order_trace_is_derivative_pairing() {
        // tr T_{f^[1]}^D(V) = Σ_i f'(λ_i) V_ii = tr(f'(D) V)
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = HermitianOperator::new(
            ComplexMatrix::from_real_rows(&[&[0.9, 0.3], &[0.3, -0.2]]).unwrap(),
        )
        .unwrap();
        let v = ComplexMatrix::from_real_rows(&[&[0.2, -0.4], &[-0.4, 0.6]]).unwrap();
        let ctx = MoiContext::new(Arc::new(f.clone()));
        let tr = ctx.trace(&[&d, &d], &[&v]).unwrap();
        let fprime = d.apply_function(|l| Complex64::new(f.eval(l, 1), 0.0));
        let expected = (&fprime * &v).trace();
        assert!((tr - expected).norm() < 1e-13);
    }

    #[test]
    fn trace_derivative_finite_difference() {
        // tr T_{f^[1]}^D(V) vs (tr f(D+hV) - tr f(D-hV)) / 2h
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = HermitianOperator::new(
            ComplexMatrix::from_real_rows(&[&[0.5, 0.1], &[0.1, -0.7]]).unwrap(),
        )
        .unwrap();
        let v = ComplexMatrix::from_real_rows(&[&[0.3, 0.2], &[0.2, -0.5]]).unwrap();
        let ctx = MoiContext::new(Arc::new(f.clone()));
        let tr = ctx.trace(&[&d, &d], &[&v]).unwrap();

        let h = 1e-4;
        let spectral_sum = |m: &ComplexMatrix| -> f64 {
            HermitianOperator::new(m.clone())
                .unwrap()
                .eigenvalues()
                .iter()
                .map(|&l| f.eval(l, 0))
                .sum()
        };
        let plus = spectral_sum(&(d.matrix() + &v.scale_re(h)));
        let minus = spectral_sum(&(d.matrix() + &v.scale_re(-h)));
        let fd = (plus - minus) / (2.0 * h);
        assert!((tr.re - fd).abs() < 1e-6, "{} vs {}", tr.re, fd);
        assert!(tr.im.abs() < 1e-12);
    }

    #[test]
    fn multilinearity_in_each_argument() {
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = HermitianOperator::new(
            ComplexMatrix::from_real_rows(&[&[0.2, 0.4], &[0.4, -0.3]]).unwrap(),
        )
        .unwrap();
        let a = ComplexMatrix::from_real_rows(&[&[0.1, 0.9], &[0.9, 0.4]]).unwrap();
        let b = ComplexMatrix::from_real_rows(&[&[0.7, -0.2], &[-0.2, 0.0]]).unwrap();
        let v2 = ComplexMatrix::from_real_rows(&[&[0.5, 0.1], &[0.1, -0.1]]).unwrap();
        let ctx = MoiContext::new(Arc::new(f));
        let bases = [&d, &d, &d];
        let combo = &a.scale_re(2.0) + &b.scale_re(-3.5);
        let lhs = ctx.eigenbasis(&bases, &[&combo, &v2]).unwrap();
        let ta = ctx.eigenbasis(&bases, &[&a, &v2]).unwrap();
        let tb = ctx.eigenbasis(&bases, &[&b, &v2]).unwrap();
        let rhs = &ta.scale_re(2.0) + &tb.scale_re(-3.5);
        assert!((&lhs - &rhs).frobenius_norm() < 1e-12);
    }

    #[test]
    fn taylor_remainder_vanishes_for_zero_perturbation() {
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = diag_pm1();
        let ctx = MoiContext::new(Arc::new(f));
        let zero = ComplexMatrix::zeros(2);
        let r = ctx.taylor_remainder(&d, &zero, 2).unwrap();
        assert_eq!(r, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn remainder_order_zero_is_trace_difference() {
        // K = 0: tr T^{D+V,D}_{f^[1]}(V) = tr(f(D+V) - f(D)).
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = HermitianOperator::new(
            ComplexMatrix::from_real_rows(&[&[0.6, 0.2], &[0.2, -0.4]]).unwrap(),
        )
        .unwrap();
        let v = ComplexMatrix::from_real_rows(&[&[0.2, 0.3], &[0.3, -0.1]]).unwrap();
        let ctx = MoiContext::new(Arc::new(f.clone()));
        let r = ctx.taylor_remainder(&d, &v, 0).unwrap();
        let dv = HermitianOperator::new(d.matrix() + &v).unwrap();
        let direct: f64 = dv.eigenvalues().iter().map(|&l| f.eval(l, 0)).sum::<f64>()
            - d.eigenvalues().iter().map(|&l| f.eval(l, 0)).sum::<f64>();
        assert!((r.re - direct).abs() < 1e-9, "{} vs {}", r.re, direct);
        assert!(r.im.abs() < 1e-10);
    }

    #[test]
    fn added_weights_trivial_when_s_zero() {
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = diag_pm1();
        let v = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let report = verify_added_weights(&f, &[&d, &d], &[&v], 0).unwrap();
        assert!(report.max_deviation < 1e-14);
        assert_eq!(report.term_count, 1);
    }

    #[test]
    fn weight_compositions_enumerate_correctly() {
        // s = 2, k = 1: (j0, j1) ∈ {(0,2), (1,1)}
        let comps = weight_compositions(2, 1);
        assert_eq!(comps, vec![vec![0, 2], vec![1, 1]]);
        // s = 3, k = 2: j0 ≥ 0, j1, j2 ≥ 1
        let comps = weight_compositions(3, 2);
        assert_eq!(comps, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 1, 1]]);
        // k = 0: single composition (s)
        assert_eq!(weight_compositions(2, 0), vec![vec![2]]);
    }

    #[test]
    fn cost_guard_trips() {
        let f = ScalarFunction::gaussian(1.0).unwrap();
        let d = HermitianOperator::new(ComplexMatrix::zeros(12)).unwrap();
        let v = ComplexMatrix::identity(12);
        let ctx = MoiContext::new(Arc::new(f));
        let bases: Vec<&HermitianOperator> = vec![&d; 9];
        let args: Vec<&ComplexMatrix> = vec![&v; 8];
        assert!(matches!(ctx.trace(&bases, &args), Err(Error::GuardExceeded(_))));
    }
}
