//! Dense Hermitian eigensolver and singular values, via cyclic Jacobi sweeps.
//!
//! Desk-scale dimensions only; quadratic convergence makes Jacobi both simple
//! and accurate to a few ulps, which the downstream divided-difference and
//! trace-contraction layers rely on.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

const MAX_SWEEPS: usize = 60;

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns `(eigenvalues ascending, eigenvectors)` with the i-th column of the
/// eigenvector matrix matching`eigenvalues[i]`. The input must already be
/// Hermitian; only the Hermitian part of each off-diagonal pair is consulted.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = m.dim();
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n);

    if n == 1 {
        return Ok((vec![a.get(0, 0).re], v));
    }

    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let target = scale * 1e-15 * (n as f64);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        // One last check; quadratic convergence can land exactly on the edge.
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() > target * 10.0 {
            return Err(Error::EigenFailure(MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let eigs: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| eigs[i].partial_cmp(&eigs[j]).unwrap());

    let sorted_eigs: Vec<f64> = order.iter().map(|&i| eigs[i]).collect();
    let mut sorted_vecs = ComplexMatrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            sorted_vecs.set(row, new_col, v.get(row, old_col));
        }
    }
    Ok((sorted_eigs, sorted_vecs))
}

/// One complex Jacobi rotation zeroing the (p, q) entry of the Hermitian `a`,
/// accumulated into `v`.
fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = (a.get(p, q) + a.get(q, p).conj()) * 0.5;
    let norm = apq.norm();
    if norm < f64::MIN_POSITIVE {
        return;
    }
    let phase = apq / norm; // e^{i phi}
    let alpha = a.get(p, p).re;
    let gamma = a.get(q, q).re;

    // Real 2x2 rotation for [[alpha, |apq|], [|apq|, gamma]].
    let tau = (gamma - alpha) / (2.0 * norm);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // J = diag(1, conj(phase)) * [[c, s], [-s, c]] acting on coordinates (p, q).
    let jpp = Complex64::new(c, 0.0);
    let jpq = Complex64::new(s, 0.0);
    let jqp = phase.conj() * (-s);
    let jqq = phase.conj() * c;

    let n = a.dim();
    // A <- A J (columns p, q).
    for i in 0..n {
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set(i, p, aip * jpp + aiq * jqp);
        a.set(i, q, aip * jpq + aiq * jqq);
    }
    // A <- J* A (rows p, q).
    for j in 0..n {
        let apj = a.get(p, j);
        let aqj = a.get(q, j);
        a.set(p, j, jpp.conj() * apj + jqp.conj() * aqj);
        a.set(q, j, jpq.conj() * apj + jqq.conj() * aqj);
    }
    // Clean the pivot pair; the rotation zeroes it analytically.
    let sym = (a.get(p, q) + a.get(q, p).conj()) * 0.5;
    a.set(p, q, a.get(p, q) - sym);
    a.set(q, p, a.get(q, p) - sym.conj());

    // V <- V J.
    for i in 0..n {
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip * jpp + viq * jqp);
        v.set(i, q, vip * jpq + viq * jqq);
    }
}

/// Singular values of an arbitrary complex square matrix, descending,
/// by one-sided Jacobi orthogonalization of the columns.
pub fn singular_values(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = m.dim();
    let mut w = m.clone();
    let scale = w.frobenius_norm();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let tol = 1e-15;

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let wip = w.get(i, p);
                    let wiq = w.get(i, q);
                    app += wip.norm_sqr();
                    aqq += wiq.norm_sqr();
                    apq += wip.conj() * wiq;
                }
                let norm = apq.norm();
                if norm <= tol * (app * aqq).sqrt() + f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let phase = apq / norm;
                let tau = (aqq - app) / (2.0 * norm);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(s, 0.0);
                let jqp = phase.conj() * (-s);
                let jqq = phase.conj() * c;
                for i in 0..n {
                    let wip = w.get(i, p);
                    let wiq = w.get(i, q);
                    w.set(i, p, wip * jpp + wiq * jqp);
                    w.set(i, q, wip * jpq + wiq * jqq);
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::EigenFailure(MAX_SWEEPS));
    }

    let mut sigmas: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| w.get(i, j).norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sigmas.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sigmas)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pauli_x_eigenvalues() {
        let x = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let (eigs, vecs) = hermitian_eigen(&x).unwrap();
        assert!((eigs[0] + 1.0).abs() < 1e-14);
        assert!((eigs[1] - 1.0).abs() < 1e-14);
        assert!(vecs.unitary_deviation() < 1e-14);
    }

    #[test]
    fn pauli_y_eigenvalues() {
        let y = ComplexMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(0.0, -1.0)],
            vec![c(0.0, 1.0), c(0.0, 0.0)],
        ])
        .unwrap();
        let (eigs, _) = hermitian_eigen(&y).unwrap();
        assert!((eigs[0] + 1.0).abs() < 1e-14);
        assert!((eigs[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reconstructs_hermitian_input() {
        // Fixed 4x4 Hermitian matrix with degenerate-ish spectrum.
        let mut m = ComplexMatrix::zeros(4);
        let vals = [
            (0, 0, 1.0, 0.0),
            (1, 1, 1.0, 0.0),
            (2, 2, -0.5, 0.0),
            (3, 3, 2.0, 0.0),
            (0, 1, 0.3, 0.1),
            (0, 2, -0.2, 0.4),
            (1, 3, 0.05, -0.7),
            (2, 3, 0.6, 0.0),
        ];
        for &(i, j, re, im) in &vals {
            m.set(i, j, c(re, im));
            if i != j {
                m.set(j, i, c(re, -im));
            }
        }
        let (eigs, u) = hermitian_eigen(&m).unwrap();
        // U diag(eigs) U* == m
        let lambda = ComplexMatrix::diag_real(&eigs);
        let rebuilt = &(&u * &lambda) * &u.adjoint();
        assert!((&rebuilt - &m).frobenius_norm() < 1e-13 * m.frobenius_norm().max(1.0));
        assert!(u.unitary_deviation() < 1e-13);
        for w in eigs.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn singular_values_of_diag() {
        let m = ComplexMatrix::diag_real(&[3.0, -4.0, 0.0]);
        let s = singular_values(&m).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-14);
        assert!((s[1] - 3.0).abs() < 1e-14);
        assert!(s[2].abs() < 1e-14);
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let m = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.5), c(-0.3, 0.2), c(0.0, 1.0)],
            vec![c(0.7, 0.0), c(0.4, -0.6), c(0.1, 0.1)],
            vec![c(-0.2, 0.9), c(0.0, 0.0), c(1.5, 0.0)],
        ])
        .unwrap();
        let s = singular_values(&m).unwrap();
        let gram = &m.adjoint() * &m;
        let (mut eigs, _) = hermitian_eigen(&gram).unwrap();
        eigs.reverse();
        for (sv, ev) in s.iter().zip(eigs.iter()) {
            assert!((sv * sv - ev).abs() < 1e-12);
        }
    }
}
