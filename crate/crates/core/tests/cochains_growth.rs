//! Entire-growth behavior of the rescaled odd cochains: on norm-bounded
//! tuples, |ψ̃_{2k+1}| decays like 1/k! with a constant fitted once per
//! triple on the first two orders.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use spectral_action::cochains::CochainContext;
use spectral_action::functions::ScalarFunction;
use spectral_action::lab::{gaussian_hermitian, trial_rng};
use spectral_action::matrix::ComplexMatrix;
use spectral_action::operator::{HermitianOperator, SpectralTriple};

fn bounded_tuple(rng: &mut rand_chacha::ChaCha8Rng, dim: usize, len: usize) -> Vec<ComplexMatrix> {
    (0..len)
        .map(|_| {
            let mut m = ComplexMatrix::zeros(dim);
            for i in 0..dim {
                for j in 0..dim {
                    m.set(i, j, Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
                }
            }
            // Normalize to operator norm ≤ 1.
            let norm = spectral_action::operator::schatten_norm(&m, f64::INFINITY).unwrap();
            m.scale_re(1.0 / norm.max(1.0))
        })
        .collect()
}

#[test]
fn psi_tilde_decays_factorially() {
    let mut rng = trial_rng(2718, 0);
    let d = Arc::new(HermitianOperator::new(gaussian_hermitian(&mut rng, 2, 0.8)).unwrap());
    let triple = Arc::new(SpectralTriple::new(d, vec![], 1).unwrap());
    let f = Arc::new(ScalarFunction::gaussian(1.0).unwrap());
    let ctx = CochainContext::new(triple, f, 12);

    let factorial = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let tuples_per_order = 6;

    // Largest |ψ̃_{2k+1}|·k! seen at each order.
    let mut scaled_max = vec![0.0f64; 5];
    for (k, slot) in scaled_max.iter_mut().enumerate() {
        for _ in 0..tuples_per_order {
            let args = bounded_tuple(&mut rng, 2, 2 * k + 2);
            let value = ctx.psi_tilde(&args).unwrap().norm();
            *slot = slot.max(value * factorial(k));
        }
    }

    // Fit C_Σ on k = 0, 1; the bound |ψ̃_{2k+1}| ≤ C_Σ/k! must then hold for
    // k = 2, 3, 4 (with slack for sampling the sup over the bounded set).
    let c_sigma = 2.0 * scaled_max[0].max(scaled_max[1]);
    for k in 2..=4usize {
        assert!(
            scaled_max[k] <= c_sigma,
            "k = {k}: k!·|ψ̃| = {} above fitted C_Σ = {c_sigma}",
            scaled_max[k]
        );
    }
}
