//! Hermitian operators with cached eigendecompositions, Schatten norms,
//! spectral triples, and the representation of universal one-forms.

use std::sync::Arc;

use num_complex::Complex64;

use crate::eig;
use crate::error::{Error, Result};
use crate::matrix::{commutator_matrices, ComplexMatrix};

/// Relative Hermiticity drift tolerated (and silently symmetrized away).
const HERMITICITY_TOL: f64 = 1e-10;

/// A self-adjoint operator together with its eigendecomposition.
///
/// The decomposition is computed once at construction and shared read-only
/// afterwards; every multiple-operator-integral evaluation reads it.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
    eigenvalues: Vec<f64>,
    eigenvectors: ComplexMatrix,
}

impl HermitianOperator {
    /// Symmetrizes input whose Hermiticity drift is within `1e-10` relative,
    /// rejects anything further from self-adjoint.
    ///
    /// ```
    /// use spectral_action::matrix::ComplexMatrix;
    /// use spectral_action::operator::{schatten_norm, HermitianOperator};
    ///
    /// let flip = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
    /// let op = HermitianOperator::new(flip).unwrap();
    /// assert!((op.eigenvalues()[0] + 1.0).abs() < 1e-14);
    /// assert!((op.eigenvalues()[1] - 1.0).abs() < 1e-14);
    /// assert!((schatten_norm(op.matrix(), 1.0).unwrap() - 2.0).abs() < 1e-14);
    /// ```
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let scale = matrix.frobenius_norm().max(1.0);
        let deviation = matrix.hermitian_deviation();
        if deviation > HERMITICITY_TOL * scale {
            return Err(Error::NotHermitian { deviation, tolerance: HERMITICITY_TOL * scale });
        }
        let sym = matrix.symmetrized();
        let (eigenvalues, eigenvectors) = eig::hermitian_eigen(&sym)?;
        Ok(Self { matrix: sym, eigenvalues, eigenvectors })
    }

    /// Assemble from known spectral data (eigenvalues ascending, unitary
    /// column eigenvectors). Used to amplify a triple without re-decomposing.
    pub fn from_eigen_data(eigenvalues: Vec<f64>, eigenvectors: ComplexMatrix) -> Result<Self> {
        if eigenvalues.len() != eigenvectors.dim() {
            return Err(Error::DimensionMismatch("eigen data".into()));
        }
        let lambda = ComplexMatrix::diag_real(&eigenvalues);
        let matrix = &(&eigenvectors * &lambda) * &eigenvectors.adjoint();
        Ok(Self { matrix: matrix.symmetrized(), eigenvalues, eigenvectors })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns match `eigenvalues()`.
    pub fn eigenvectors(&self) -> &ComplexMatrix {
        &self.eigenvectors
    }

    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }

    /// `U* m U`: the matrix of `m` in the eigenbasis of this operator.
    pub fn to_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        &(&self.eigenvectors.adjoint() * m) * &self.eigenvectors
    }

    /// Inverse of [`Self::to_eigenbasis`].
    pub fn from_eigenbasis(&self, m: &ComplexMatrix) -> ComplexMatrix {
        &(&self.eigenvectors * m) * &self.eigenvectors.adjoint()
    }

    /// `g(D) = U diag(g(lambda_i)) U*` for a scalar function of the spectrum.
    pub fn apply_function(&self, g: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let values: Vec<Complex64> = self.eigenvalues.iter().map(|&l| g(l)).collect();
        self.from_eigenbasis(&ComplexMatrix::diag(&values))
    }

    /// `(D - i)^{-j}`.
    pub fn resolvent_power(&self, j: u32) -> ComplexMatrix {
        self.apply_function(|l| Complex64::new(l, -1.0).powi(-(j as i32)))
    }
}

/// `[D, a] = D·a − a·D`.
pub fn commutator(d: &HermitianOperator, a: &ComplexMatrix) -> Result<ComplexMatrix> {
    commutator_matrices(d.matrix(), a)
}

/// Schatten p-norm `(Σ σ_i^p)^{1/p}`; the operator norm for `p = ∞`.
pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("Schatten exponent p = {p} must be >= 1")));
    }
    let sigmas = eig::singular_values(m)?;
    if p.is_infinite() {
        return Ok(sigmas.first().copied().unwrap_or(0.0));
    }
    Ok(sigmas.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// A finite-dimensional s-summable spectral triple `(A, H, D)`.
///
/// The algebra is unital; the identity is always available in addition to the
/// named generator list.
#[derive(Debug, Clone)]
pub struct SpectralTriple {
    d: Arc<HermitianOperator>,
    generators: Vec<(String, ComplexMatrix)>,
    summability: u32,
}

impl SpectralTriple {
    pub fn new(
        d: Arc<HermitianOperator>,
        generators: Vec<(String, ComplexMatrix)>,
        summability: u32,
    ) -> Result<Self> {
        if summability == 0 {
            return Err(Error::InvalidParameter("summability s must be positive".into()));
        }
        for (name, g) in &generators {
            if g.dim() != d.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "generator `{name}` has dim {} but D has dim {}",
                    g.dim(),
                    d.dim()
                )));
            }
        }
        Ok(Self { d, generators, summability })
    }

    pub fn dim(&self) -> usize {
        self.d.dim()
    }

    pub fn d_op(&self) -> &Arc<HermitianOperator> {
        &self.d
    }

    pub fn generators(&self) -> &[(String, ComplexMatrix)] {
        &self.generators
    }

    pub fn generator(&self, name: &str) -> Option<&ComplexMatrix> {
        self.generators.iter().find(|(n, _)| n == name).map(|(_, g)| g)
    }

    pub fn summability(&self) -> u32 {
        self.summability
    }

    /// `‖(D−i)^{-1}‖_s^s = Σ_i (λ_i² + 1)^{-s/2}`.
    pub fn resolvent_power_norm(&self) -> f64 {
        let s = self.summability as f64;
        self.d.eigenvalues().iter().map(|&l| (l * l + 1.0).powf(-s / 2.0)).sum()
    }

    /// The amplified triple `(M_q(C) ⊗ A, C^q ⊗ H, I_q ⊗ D)`.
    ///
    /// Eigen data of `I_q ⊗ D` is assembled directly from the base
    /// decomposition (eigenvalues replicated q times, eigenvectors block
    /// diagonal), so no new eigensolve happens.
    pub fn amplify(&self, q: usize) -> Result<SpectralTriple> {
        if q == 0 {
            return Err(Error::InvalidParameter("amplification q must be positive".into()));
        }
        let d = self.dim();
        let nd = q * d;
        let mut eigs = Vec::with_capacity(nd);
        let mut vecs = ComplexMatrix::zeros(nd);
        for block in 0..q {
            for i in 0..d {
                eigs.push(self.d.eigenvalues()[i]);
                for r in 0..d {
                    vecs.set(block * d + r, block * d + i, self.d.eigenvectors().get(r, i));
                }
            }
        }
        // Re-sort ascending across blocks (replication interleaves equal runs).
        let mut order: Vec<usize> = (0..nd).collect();
        order.sort_by(|&a, &b| eigs[a].partial_cmp(&eigs[b]).unwrap());
        let sorted_eigs: Vec<f64> = order.iter().map(|&i| eigs[i]).collect();
        let mut sorted_vecs = ComplexMatrix::zeros(nd);
        for (new_col, &old_col) in order.iter().enumerate() {
            for r in 0..nd {
                sorted_vecs.set(r, new_col, vecs.get(r, old_col));
            }
        }
        let amp_d = HermitianOperator::from_eigen_data(sorted_eigs, sorted_vecs)?;
        let gens = self
            .generators
            .iter()
            .map(|(n, g)| (n.clone(), kron_identity(q, g)))
            .collect();
        SpectralTriple::new(Arc::new(amp_d), gens, self.summability)
    }
}

/// `I_q ⊗ m`.
pub fn kron_identity(q: usize, m: &ComplexMatrix) -> ComplexMatrix {
    let d = m.dim();
    let mut out = ComplexMatrix::zeros(q * d);
    for block in 0..q {
        for i in 0..d {
            for j in 0..d {
                out.set(block * d + i, block * d + j, m.get(i, j));
            }
        }
    }
    out
}

/// A represented universal one-form `V = Σ_j a_j [D, b_j]`.
#[derive(Debug, Clone)]
pub struct OneFormRep {
    terms: Vec<(ComplexMatrix, ComplexMatrix)>,
    v: ComplexMatrix,
}

impl OneFormRep {
    pub fn terms(&self) -> &[(ComplexMatrix, ComplexMatrix)] {
        &self.terms
    }

    pub fn v(&self) -> &ComplexMatrix {
        &self.v
    }

    /// `‖V − V*‖ ≤ 1e−12·‖V‖` check for forms meant to be self-adjoint.
    pub fn is_self_adjoint(&self) -> bool {
        self.v.hermitian_deviation() <= 1e-12 * self.v.frobenius_norm().max(1e-300)
    }
}

/// `V = Σ_j a_j [D, b_j]` from pairs `(a_j, b_j)`.
pub fn represent_one_form(
    triple: &SpectralTriple,
    terms: &[(ComplexMatrix, ComplexMatrix)],
) -> Result<OneFormRep> {
    let mut v = ComplexMatrix::zeros(triple.dim());
    for (a, b) in terms {
        a.check_same_dim(triple.d_op().matrix())?;
        b.check_same_dim(triple.d_op().matrix())?;
        let db = commutator(triple.d_op(), b)?;
        v = &v + &(a * &db);
    }
    Ok(OneFormRep { terms: terms.to_vec(), v })
}
