//! Numerical operator calculus on finite-dimensional spectral triples.
//!
//! The crate evaluates the perturbed spectral action `tr(f(D+V) - f(D))` in two
//! independent ways and checks that they agree:
//!
//! * directly, from the eigenvalues of `D` and `D+V`;
//! * as a series of Chern–Simons and Yang–Mills terms, obtained by integrating
//!   universal forms against the cyclic cochains `psi` and `phi` that are built
//!   from traces of multiple operator integrals.
//!
//! The layers, bottom up:
//!
//! * [`matrix`], [`operator`] — dense complex matrices, Hermitian
//!   eigendecompositions, Schatten norms, spectral triples and represented
//!   one-forms.
//! * [`functions`] — models of the scalar function `f` (Gaussian, rational,
//!   polynomial × Gaussian) with exact derivatives, Fourier transforms and the
//!   weighted `L^1` norms that drive the trace-class bounds.
//! * [`divdiff`] — confluent divided differences `f^[n]` with a
//!   multiset-keyed memo cache.
//! * [`moi`] — multiple operator integrals: exact eigenbasis evaluation,
//!   closed-path trace contraction, simplex/Fourier quadrature cross-checks,
//!   Taylor remainders and trace-norm bound verification.
//! * [`cochains`] — the bracket, the Hochschild cochains `phi_n`, the cyclic
//!   cochains `psi_{2k-1}`, and the `b`, `B`, `B0` operators.
//! * [`forms`] — an exact symbolic engine for the universal differential
//!   graded algebra: normalization, Chern–Simons forms, curvature powers,
//!   the 2×2 expansion and the truncation index sets.
//! * [`expansion`] — the expansion of `tr(f(D+V) - f(D))` order by order,
//!   remainder envelopes, gauge transformations and the `K_1` pairing.
//! * [`lab`] — deterministic experiment generation and the batch runners
//!   behind the `sa-lab` command line tool.
//!
//! ```
//! use spectral_action::matrix::ComplexMatrix;
//! use spectral_action::operator::{HermitianOperator, SpectralTriple};
//! use spectral_action::functions::ScalarFunction;
//! use spectral_action::expansion::lhs_trace;
//! use std::sync::Arc;
//!
//! // A two-level system: D = diag(1, -1), perturbed by a small Hermitian V.
//! let d = HermitianOperator::new(ComplexMatrix::diag_real(&[1.0, -1.0])).unwrap();
//! let v = ComplexMatrix::from_real_rows(&[&[0.0, 0.1], &[0.1, 0.0]]).unwrap();
//! let triple = SpectralTriple::new(Arc::new(d), vec![], 1).unwrap();
//! let f = ScalarFunction::gaussian(1.0).unwrap();
//!
//! let delta = lhs_trace(&triple, &v, &f).unwrap();
//! // tr f(D+V) - tr f(D) with f(x) = exp(-x^2), spectra +/- sqrt(1.01) vs +/- 1.
//! let expected = 2.0 * ((-1.01f64).exp() - (-1.0f64).exp());
//! assert!((delta - expected).abs() < 1e-12);
//! ```

pub mod cochains;
pub mod divdiff;
mod eig;
pub mod error;
pub mod expansion;
pub mod forms;
pub mod functions;
pub mod lab;
pub mod matrix;
pub mod moi;
pub mod operator;
pub mod quadrature;
mod util;

pub use error::{Error, Result};
