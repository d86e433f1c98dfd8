//! The algebraic backbone of the expansion, checked numerically under the
//! integration functional: near-traciality and its corollaries, the
//! degree-lowering lemmas, the per-order regrouping, the small-perturbation
//! corollary, and the gauge sector.

use std::sync::Arc;

use num_complex::Complex64;
use spectral_action::cochains::CochainContext;
use spectral_action::expansion::{
    expansion_terms, gauge_transform, k1_pairing, lhs_trace, represent_form,
    taylor_term_via_forms, yang_mills_gauge_residual,
};
use spectral_action::forms::{
    chern_simons, curvature_power, curvature_t, integrate_phi, integrate_psi,
    regrouped_order_term, FormAlgebra, FormPoly, GeneratorBindings,
};
use spectral_action::functions::ScalarFunction;
use spectral_action::lab::{gaussian_hermitian, random_unitary, trial_rng};
use spectral_action::operator::{HermitianOperator, SpectralTriple};

struct Setup {
    ctx: CochainContext,
    alg: FormAlgebra,
    bindings: GeneratorBindings,
    a: FormPoly,
}

fn setup(dim: usize, seed: u64, scale: f64, d_scale: f64) -> Setup {
    let mut rng = trial_rng(seed, 0);
    let d = Arc::new(HermitianOperator::new(gaussian_hermitian(&mut rng, dim, d_scale)).unwrap());
    let triple = Arc::new(SpectralTriple::new(d, vec![], 1).unwrap());
    let f = Arc::new(ScalarFunction::gaussian(1.0).unwrap());
    let ctx = CochainContext::new(triple, f, 14);
    let alg = FormAlgebra::new();
    let a = alg.generator("a").mul(&alg.generator("b").d());
    let mut bindings = GeneratorBindings::new();
    bindings.insert("a", gaussian_hermitian(&mut rng, dim, scale));
    bindings.insert("b", gaussian_hermitian(&mut rng, dim, scale));
    bindings.insert("c", gaussian_hermitian(&mut rng, dim, scale));
    bindings.insert("e", gaussian_hermitian(&mut rng, dim, scale));
    Setup { ctx, alg, bindings, a }
}

#[test]
fn near_traciality_of_the_integral() {
    // ∫_φ XY − ∫_φ YX = odd(Y)·∫_φ Y dX − odd(X)·∫_φ X dY.
    let s = setup(3, 101, 0.6, 0.8);
    let a = s.alg.generator("a");
    let b = s.alg.generator("b");
    let c = s.alg.generator("c");
    let e = s.alg.generator("e");
    // Forms of degree 1, 2, and a degree-0 element.
    let candidates: Vec<FormPoly> = vec![
        a.mul(&b.d()),                  // degree 1
        c.mul(&e.d()),                  // degree 1
        a.d().mul(&b.d()),              // degree 2
        c.clone(),                      // degree 0
        e.mul(&a.d()).mul(&b.d()),      // degree 2
    ];
    for (i, x) in candidates.iter().enumerate() {
        for (j, y) in candidates.iter().enumerate() {
            let deg_x = x.homogeneous_degree().unwrap();
            let deg_y = y.homogeneous_degree().unwrap();
            if deg_x + deg_y > 4 {
                continue;
            }
            let lhs = integrate_phi(&s.ctx, &s.bindings, &x.mul(y)).unwrap()
                - integrate_phi(&s.ctx, &s.bindings, &y.mul(x)).unwrap();
            let mut rhs = Complex64::new(0.0, 0.0);
            if deg_y % 2 == 1 {
                rhs += integrate_phi(&s.ctx, &s.bindings, &y.mul(&x.d())).unwrap();
            }
            if deg_x % 2 == 1 {
                rhs -= integrate_phi(&s.ctx, &s.bindings, &x.mul(&y.d())).unwrap();
            }
            assert!(
                (lhs - rhs).norm() < 1e-8,
                "pair ({i},{j}) degrees ({deg_x},{deg_y}): lhs {lhs} rhs {rhs}"
            );
        }
    }
}

#[test]
fn cyclic_corollary_rules() {
    let s = setup(3, 103, 0.6, 0.8);
    let a_form = &s.a;
    let alg = &s.alg;
    let c = alg.generator("c");
    let e = alg.generator("e");

    // (i) even–even commutation under the integral.
    let x = a_form.d(); // degree 2
    let y = c.mul(&e.d()).mul(&a_form.clone()); // degree 2
    let lhs = integrate_phi(&s.ctx, &s.bindings, &x.mul(&y)).unwrap();
    let rhs = integrate_phi(&s.ctx, &s.bindings, &y.mul(&x)).unwrap();
    assert!((lhs - rhs).norm() < 1e-8, "(i): {lhs} vs {rhs}");

    // (ii) odd X: ∫(AX − XA) = ∫ d(AX).
    let x_odd = c.mul(&e.d()); // degree 1
    let lhs = integrate_phi(
        &s.ctx,
        &s.bindings,
        &a_form.mul(&x_odd).sub(&x_odd.mul(a_form)),
    )
    .unwrap();
    let rhs = integrate_phi(&s.ctx, &s.bindings, &a_form.mul(&x_odd).d()).unwrap();
    assert!((lhs - rhs).norm() < 1e-8, "(ii): {lhs} vs {rhs}");

    // (iii) even X: ∫(XA − AX) = ∫ dX·A + ∫ dA·dX.
    let x_even = c.mul(&e.d()).mul(&a_form.clone()); // degree 2
    let lhs = integrate_phi(
        &s.ctx,
        &s.bindings,
        &x_even.mul(a_form).sub(&a_form.mul(&x_even)),
    )
    .unwrap();
    let rhs = integrate_phi(&s.ctx, &s.bindings, &x_even.d().mul(a_form)).unwrap()
        + integrate_phi(&s.ctx, &s.bindings, &a_form.d().mul(&x_even.d())).unwrap();
    assert!((lhs - rhs).norm() < 1e-8, "(iii): {lhs} vs {rhs}");
}

#[test]
fn exact_forms_with_quadratic_head_integrate_to_zero() {
    // ∫_φ d(A_t² F_t^m)|_{t=1} = 0 for m ≤ 2.
    let s = setup(2, 107, 0.7, 0.8);
    let at = s.a.times_t(1);
    let ft = curvature_t(&s.a).unwrap();
    for m in 0..=2usize {
        let form = at.mul(&at).mul(&ft.pow(m)).d().at_t_one();
        let value = integrate_phi(&s.ctx, &s.bindings, &form).unwrap();
        assert!(value.norm() < 1e-8, "m = {m}: ∫ d(A_t²F_t^m) = {value}");
    }
}

#[test]
fn t_integral_collapses_to_curvature_power() {
    // ∫₀¹ ∫_φ (½dA + tA²) F_t^{k-1} dt = (1/2k) ∫_φ F^k for k ≤ 3.
    let s = setup(2, 109, 0.7, 0.8);
    let ft = curvature_t(&s.a).unwrap();
    let asq = s.a.mul(&s.a);
    for k in 1..=3usize {
        let integrand = s
            .a
            .d()
            .scale_int(1, 2)
            .add(&asq.times_t(1))
            .mul(&ft.pow(k - 1))
            .t_integrate();
        let lhs = integrate_phi(&s.ctx, &s.bindings, &integrand).unwrap();
        let fk = curvature_power(&s.a, k).unwrap();
        let rhs = integrate_phi(&s.ctx, &s.bindings, &fk).unwrap() / (2.0 * k as f64);
        assert!((lhs - rhs).norm() < 1e-8, "k = {k}: {lhs} vs {rhs}");
    }
}

#[test]
fn per_order_regrouping_identity() {
    // ∫_φ (cs_{2k-1}(A) + ∫₀¹ A F_t^{k-1} tA dt) =
    //   ∫_{ψ_{2k-1}} cs_{2k-1}(A) + (1/2k) ∫_{φ_{2k}} F^k.
    let s = setup(3, 113, 0.5, 0.8);
    for k in 1..=3usize {
        let lhs_form = regrouped_order_term(&s.a, k).unwrap();
        let lhs = integrate_phi(&s.ctx, &s.bindings, &lhs_form).unwrap();
        let cs = chern_simons(&s.a, k).unwrap();
        let rhs = integrate_psi(&s.ctx, &s.bindings, &cs).unwrap()
            + integrate_phi(&s.ctx, &s.bindings, &curvature_power(&s.a, k).unwrap()).unwrap()
                / (2.0 * k as f64);
        assert!((lhs - rhs).norm() < 1e-9, "k = {k}: {lhs} vs {rhs}");
    }
}

#[test]
fn first_order_terms_match_grouped_example() {
    // The K = 1 expansion terms equal ∫_{ψ₁}A + ½∫_{φ₂}(A² + dA).
    let s = setup(3, 127, 0.5, 0.8);
    let terms = expansion_terms(&s.ctx, &s.a, &s.bindings, 1).unwrap();
    let total = terms[0].total();
    let direct = integrate_psi(&s.ctx, &s.bindings, &s.a).unwrap()
        + integrate_phi(
            &s.ctx,
            &s.bindings,
            &s.a.mul(&s.a).add(&s.a.d()).scale_int(1, 2),
        )
        .unwrap();
    assert!((total - direct).norm() < 1e-10, "{total} vs {direct}");
}

#[test]
fn taylor_route_matches_spectral_route() {
    // Σ_{n≤K} (1/n)∫_φ (2×2 expansion) converges to tr f(D+V) − tr f(D),
    // here for the general Hermitian completion a·db + b*·d(a*) − d(b*a*).
    let s = setup(2, 131, 0.3, 0.5);
    let f = ScalarFunction::gaussian(1.0).unwrap();
    let alg = FormAlgebra::new();
    let a = spectral_action::forms::hermitian_one_form(&alg, &[("a".into(), "b".into())]);
    let mut rng = trial_rng(131, 7);
    let ma = gaussian_hermitian(&mut rng, 2, 0.2);
    let mb = gaussian_hermitian(&mut rng, 2, 0.2);
    let mut bindings = GeneratorBindings::new();
    bindings.insert("a*", ma.adjoint());
    bindings.insert("b*", mb.adjoint());
    bindings.insert("a", ma);
    bindings.insert("b", mb);
    let v = represent_form(s.ctx.triple(), &a, &bindings).unwrap();
    let lhs = lhs_trace(s.ctx.triple(), &v, &f).unwrap();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut gap = f64::INFINITY;
    for n in 1..=5usize {
        sum += taylor_term_via_forms(&s.ctx, &a, &bindings, n).unwrap();
        gap = (lhs - sum.re).abs();
    }
    assert!(gap < 1e-6, "lhs {lhs} vs Taylor sum {sum}");
}

#[test]
fn small_perturbation_scaling_is_monotone() {
    // Scaling the bindings by √t (so A by t) makes the per-order errors
    // decrease strictly from the first order on.
    let s = setup(3, 137, 1.0, 1.0);
    let f = ScalarFunction::gaussian(1.0).unwrap();
    let t_small = 0.04f64;
    let mut scaled = GeneratorBindings::new();
    for name in ["a", "b"] {
        scaled.insert(name, s.bindings.get(name).unwrap().scale_re(t_small.sqrt()));
    }
    // Scalar-head form keeps the represented matrix Hermitian.
    let alg = FormAlgebra::new();
    let a = alg.generator("h").mul(&alg.generator("b").d());
    let dim = 3;
    let head = spectral_action::matrix::ComplexMatrix::identity(dim)
        .scale(Complex64::new(0.0, t_small.sqrt()));
    let mut bindings = GeneratorBindings::new();
    bindings.insert("h", head);
    bindings.insert("b", scaled.get("b").unwrap().clone());
    let v = represent_form(s.ctx.triple(), &a, &bindings).unwrap();
    let lhs = lhs_trace(s.ctx.triple(), &v, &f).unwrap();
    let terms = expansion_terms(&s.ctx, &a, &bindings, 4).unwrap();
    let mut running = Complex64::new(0.0, 0.0);
    let mut errors = Vec::new();
    for term in &terms {
        running += term.total();
        errors.push((lhs - running.re).abs());
    }
    for w in errors.windows(2) {
        assert!(w[1] < w[0], "errors not monotone: {errors:?}");
    }
}

#[test]
fn yang_mills_terms_are_gauge_invariant() {
    let s = setup(3, 139, 0.5, 0.8);
    let mut rng = trial_rng(139, 3);
    let u = random_unitary(&mut rng, 3);
    for k in 1..=2usize {
        let residual =
            yang_mills_gauge_residual(&s.ctx, &s.a, &s.bindings, &u, "g", k).unwrap();
        assert!(residual < 1e-8, "k = {k}: YM gauge residual {residual}");
    }
}

#[test]
fn pure_gauge_pairing_reduces_to_cs_terms() {
    // With A = u*du the curvature vanishes symbolically, so the Yang–Mills
    // column of the expansion is exactly zero and only Chern–Simons terms
    // feed the pairing.
    let alg = FormAlgebra::new();
    let (u_sym, ustar_sym) = alg.unitary_pair("u");
    let a = ustar_sym.mul(&u_sym.d());
    for k in 1..=3usize {
        assert!(curvature_power(&a, k).unwrap().is_zero());
    }

    // And the truncated pairing is small because the CS partial sums vanish.
    let mut rng = trial_rng(141, 0);
    let d = Arc::new(HermitianOperator::new(gaussian_hermitian(&mut rng, 3, 0.3)).unwrap());
    let triple = SpectralTriple::new(d, vec![], 1).unwrap();
    let f = ScalarFunction::gaussian(1.0).unwrap();
    let u = random_unitary(&mut rng, 3);
    let report = k1_pairing(&triple, &f, &u, 1, 3).unwrap();
    assert!(
        report.magnitude <= report.truncation_tolerance,
        "pairing {} above tolerance {}",
        report.magnitude,
        report.truncation_tolerance
    );
}

#[test]
fn gauge_transformed_form_represents_transformed_matrix() {
    let s = setup(2, 149, 0.5, 0.8);
    let mut rng = trial_rng(149, 5);
    let u = random_unitary(&mut rng, 2);
    let (a_u, extended) = gauge_transform(&s.a, &s.bindings, &u, "w").unwrap();
    assert_eq!(a_u.homogeneous_degree(), Some(1));
    let v = represent_form(s.ctx.triple(), &s.a, &s.bindings).unwrap();
    let vu_direct =
        spectral_action::expansion::gauge_transform_matrix(s.ctx.triple(), &v, &u).unwrap();
    let vu_symbolic = represent_form(s.ctx.triple(), &a_u, &extended).unwrap();
    assert!((&vu_direct - &vu_symbolic).frobenius_norm() < 1e-12);
}
