//! The expansion of `tr(f(D+V) − f(D))` into Chern–Simons and Yang–Mills
//! terms, order by order, with remainder envelopes, gauge transformations,
//! and the pairing of the odd cocycle with unitaries.

use num_complex::Complex64;
use serde::Serialize;

use crate::cochains::CochainContext;
use crate::error::{Error, Result};
use crate::forms::{
    chern_simons, curvature_power, integrate_phi, integrate_psi, regrouped_order_term,
    truncation_correction, two_by_two_expansion, FormPoly, GeneratorBindings,
};
use crate::functions::ScalarFunction;
use crate::matrix::ComplexMatrix;
use crate::operator::{commutator, schatten_norm, HermitianOperator, SpectralTriple};
use crate::util::factorial;

/// `tr f(D+V) − tr f(D)` from the two spectra.
///
/// ```
/// use std::sync::Arc;
/// use spectral_action::expansion::lhs_trace;
/// use spectral_action::functions::ScalarFunction;
/// use spectral_action::matrix::ComplexMatrix;
/// use spectral_action::operator::{HermitianOperator, SpectralTriple};
///
/// let d = HermitianOperator::new(ComplexMatrix::diag_real(&[1.0, -1.0])).unwrap();
/// let triple = SpectralTriple::new(Arc::new(d), vec![], 1).unwrap();
/// let f = ScalarFunction::gaussian(1.0).unwrap();
/// // V = ε on the off-diagonal moves the eigenvalues to ±√(1+ε²).
/// let v = ComplexMatrix::from_real_rows(&[&[0.0, 0.1], &[0.1, 0.0]]).unwrap();
/// let delta = lhs_trace(&triple, &v, &f).unwrap();
/// let expected = 2.0 * ((-1.01f64).exp() - (-1.0f64).exp());
/// assert!((delta - expected).abs() < 1e-12);
/// ```
pub fn lhs_trace(triple: &SpectralTriple, v: &ComplexMatrix, f: &ScalarFunction) -> Result<f64> {
    v.check_same_dim(triple.d_op().matrix())?;
    let scale = v.frobenius_norm().max(1e-300);
    if v.hermitian_deviation() > 1e-10 * scale.max(1.0) {
        return Err(Error::NotHermitian {
            deviation: v.hermitian_deviation(),
            tolerance: 1e-10 * scale.max(1.0),
        });
    }
    let perturbed = HermitianOperator::new(triple.d_op().matrix() + v)?;
    let after: f64 = perturbed.eigenvalues().iter().map(|&l| f.eval(l, 0)).sum();
    let before: f64 = triple.d_op().eigenvalues().iter().map(|&l| f.eval(l, 0)).sum();
    Ok(after - before)
}

/// `V = π_D(A)`: bind a degree-1 universal form to its represented matrix
/// `Σ c·h·[D, m]`.
pub fn represent_form(
    triple: &SpectralTriple,
    a: &FormPoly,
    bindings: &GeneratorBindings,
) -> Result<ComplexMatrix> {
    if a.homogeneous_degree() != Some(1) || !a.is_t_free() {
        return Err(Error::InvalidParameter(
            "only t-free one-forms can be represented".into(),
        ));
    }
    let dim = triple.dim();
    let alg = a.algebra();
    let mut v = ComplexMatrix::zeros(dim);
    for ((word, _), coeff) in a.terms() {
        let head = bind_monomial_checked(alg, bindings, &word.head, dim)?;
        let letter = bind_monomial_checked(alg, bindings, &word.letters[0], dim)?;
        let c = num_traits::ToPrimitive::to_f64(coeff).expect("coefficient fits f64");
        let term = &head * &commutator(triple.d_op(), &letter)?;
        v = &v + &term.scale_re(c);
    }
    Ok(v)
}

fn bind_monomial_checked(
    alg: &crate::forms::FormAlgebra,
    bindings: &GeneratorBindings,
    mon: &[crate::forms::GenId],
    dim: usize,
) -> Result<ComplexMatrix> {
    let mut acc = ComplexMatrix::identity(dim);
    for id in mon {
        let name = alg.symbol_name(*id);
        let m = bindings
            .get(&name)
            .ok_or_else(|| Error::UnboundGenerator(name.clone()))?;
        acc = &acc * m;
    }
    Ok(acc)
}

/// The largest of `‖g‖` and `‖[D, g]‖` over all bound generators — the
/// radius `R` entering the remainder envelope.
pub fn binding_radius(
    triple: &SpectralTriple,
    bindings: &GeneratorBindings,
    names: &[String],
) -> Result<f64> {
    let mut r: f64 = 0.0;
    for name in names {
        let g = bindings
            .get(name)
            .ok_or_else(|| Error::UnboundGenerator(name.clone()))?;
        r = r.max(schatten_norm(g, f64::INFINITY)?);
        r = r.max(schatten_norm(&commutator(triple.d_op(), g)?, f64::INFINITY)?);
    }
    Ok(r)
}

/// One order of the expansion: the Chern–Simons term integrated against
/// `psi_{2k-1}` and the Yang–Mills term `1/(2k) ∫_φ F^k`.
#[derive(Debug, Clone, Serialize)]
pub struct OrderTerm {
    pub k: usize,
    pub cs_psi_re: f64,
    pub cs_psi_im: f64,
    pub ym_re: f64,
    pub ym_im: f64,
}

impl OrderTerm {
    pub fn total(&self) -> Complex64 {
        Complex64::new(self.cs_psi_re + self.ym_re, self.cs_psi_im + self.ym_im)
    }
}

/// Per-order values `(∫_{ψ_{2k-1}} cs_{2k-1}(A), 1/(2k) ∫_{φ_{2k}} F^k)` for
/// `k = 1..=k_max`.
pub fn expansion_terms(
    ctx: &CochainContext,
    a: &FormPoly,
    bindings: &GeneratorBindings,
    k_max: usize,
) -> Result<Vec<OrderTerm>> {
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let cs = chern_simons(a, k)?;
        let cs_val = integrate_psi(ctx, bindings, &cs)?;
        let fk = curvature_power(a, k)?;
        let ym_val = integrate_phi(ctx, bindings, &fk)? / (2.0 * k as f64);
        out.push(OrderTerm {
            k,
            cs_psi_re: cs_val.re,
            cs_psi_im: cs_val.im,
            ym_re: ym_val.re,
            ym_im: ym_val.im,
        });
    }
    Ok(out)
}

/// The order-n Taylor term expressed through universal forms:
/// `(1/n) ∫_φ (A 0) M^{n-1} e₁`.
pub fn taylor_term_via_forms(
    ctx: &CochainContext,
    a: &FormPoly,
    bindings: &GeneratorBindings,
    n: usize,
) -> Result<Complex64> {
    let form = two_by_two_expansion(a, n)?;
    Ok(integrate_phi(ctx, bindings, &form)? / n as f64)
}

/// Both sides of the truncation identity at order `K`: the Taylor partial
/// sum, the regrouped Chern–Simons/Yang–Mills partial sum (in its `∫_φ`
/// form), the correction sum over `T_K`, and the operator-integral remainder.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationCheck {
    pub k: usize,
    pub taylor_sum: f64,
    pub regrouped_sum: f64,
    pub correction: f64,
    pub remainder: f64,
    pub lhs: f64,
    /// `|taylor − regrouped + correction|` (exact algebra, no remainder).
    pub algebraic_residual: f64,
    /// `|lhs − regrouped − remainder + correction|` (Taylor remainder form).
    pub full_residual: f64,
}

pub fn truncation_check(
    ctx: &CochainContext,
    a: &FormPoly,
    bindings: &GeneratorBindings,
    cap_k: usize,
) -> Result<TruncationCheck> {
    let triple = ctx.triple();
    let v = represent_form(triple, a, bindings)?;

    let mut taylor_sum = Complex64::new(0.0, 0.0);
    for n in 1..=cap_k {
        taylor_sum += taylor_term_via_forms(ctx, a, bindings, n)?;
    }
    let mut regrouped_sum = Complex64::new(0.0, 0.0);
    for k in 1..=cap_k {
        let term = regrouped_order_term(a, k)?;
        regrouped_sum += integrate_phi(ctx, bindings, &term)?;
    }
    let correction_form = truncation_correction(a, cap_k)?;
    let correction = integrate_phi(ctx, bindings, &correction_form)?;

    let f = ctx.moi();
    let remainder = f.taylor_remainder(triple.d_op(), &v, cap_k)?;

    // A scalar-function handle is needed for the direct trace; recover it
    // through the spectra.
    let lhs = {
        let perturbed = HermitianOperator::new(triple.d_op().matrix() + &v)?;
        let f_obj = ctx.moi().function();
        let after: Complex64 =
            perturbed.eigenvalues().iter().map(|&l| f_obj.derivative(0, l)).sum();
        let before: Complex64 =
            triple.d_op().eigenvalues().iter().map(|&l| f_obj.derivative(0, l)).sum();
        (after - before).re
    };

    let algebraic_residual = (taylor_sum - regrouped_sum + correction).norm();
    let full_residual =
        (Complex64::new(lhs, 0.0) - regrouped_sum - remainder + correction).norm();
    Ok(TruncationCheck {
        k: cap_k,
        taylor_sum: taylor_sum.re,
        regrouped_sum: regrouped_sum.re,
        correction: correction.re,
        remainder: remainder.re,
        lhs,
        algebraic_residual,
        full_residual,
    })
}

/// Fitted remainder envelope
/// `bound(K) = C^{K+1}/K!^{1-γ} · max(R^{2K+2}, R^{4K+2+4s}) · tr|(D-i)^{-s}|`
/// with `C` the smallest constant covering all measured remainders.
#[derive(Debug, Clone, Serialize)]
pub struct RemainderEnvelope {
    pub fitted_c: f64,
    pub gamma: f64,
    pub radius: f64,
    pub bounds: Vec<f64>,
}

impl RemainderEnvelope {
    pub fn bound(&self, k: usize, s: u32, trace_resolvent: f64) -> f64 {
        envelope_shape(self.fitted_c, self.gamma, self.radius, k, s, trace_resolvent)
    }
}

fn envelope_shape(c: f64, gamma: f64, r: f64, k: usize, s: u32, trace_resolvent: f64) -> f64 {
    let kf = factorial(k).powf(1.0 - gamma);
    let r_term = r.powi(2 * k as i32 + 2).max(r.powi(4 * k as i32 + 2 + 4 * s as i32));
    c.powi(k as i32 + 1) / kf * r_term * trace_resolvent
}

/// Fit the smallest `C ≥ 1` making the envelope dominate every measured
/// remainder `|lhs − S_K|`, `K = 1..=remainders.len()`. Fitted, not derived:
/// used for tolerance budgets only.
pub fn fit_remainder_envelope(
    remainders: &[f64],
    gamma: f64,
    radius: f64,
    s: u32,
    trace_resolvent: f64,
) -> RemainderEnvelope {
    let mut c: f64 = 1.0;
    for (i, &rem) in remainders.iter().enumerate() {
        let k = i + 1;
        let base = envelope_shape(1.0, gamma, radius, k, s, trace_resolvent);
        if base > 0.0 && rem > 0.0 {
            let needed = (rem / base).powf(1.0 / (k as f64 + 1.0));
            c = c.max(needed);
        }
    }
    let bounds = (1..=remainders.len())
        .map(|k| envelope_shape(c, gamma, radius, k, s, trace_resolvent))
        .collect();
    RemainderEnvelope { fitted_c: c, gamma, radius, bounds }
}

// ---------------------------------------------------------------------------
// Gauge sector
// ---------------------------------------------------------------------------

/// `A ↦ A^u = u·du* + u·A·u*` symbolically, with the new unitary pair bound
/// to the given matrix. Returns the transformed form and extended bindings.
pub fn gauge_transform(
    a: &FormPoly,
    bindings: &GeneratorBindings,
    u_matrix: &ComplexMatrix,
    name: &str,
) -> Result<(FormPoly, GeneratorBindings)> {
    let dev = u_matrix.unitary_deviation();
    if dev > 1e-12 * u_matrix.dim() as f64 {
        return Err(Error::NotUnitary(dev));
    }
    let alg = a.algebra();
    let (u, ustar) = alg.unitary_pair(name);
    let transformed = u.mul(&ustar.d()).add(&u.mul(a).mul(&ustar));
    let mut extended = bindings.clone();
    extended.insert(name, u_matrix.clone());
    extended.insert(&format!("{name}*"), u_matrix.adjoint());
    Ok((transformed, extended))
}

/// `V ↦ V^u = u[D,u*] + uVu*` on represented matrices.
pub fn gauge_transform_matrix(
    triple: &SpectralTriple,
    v: &ComplexMatrix,
    u: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    let dev = u.unitary_deviation();
    if dev > 1e-12 * u.dim() as f64 {
        return Err(Error::NotUnitary(dev));
    }
    let du_star = commutator(triple.d_op(), &u.adjoint())?;
    Ok(&(u * &du_star) + &(&(u * v) * &u.adjoint()))
}

/// `|∫_φ F(A^u)^k − ∫_φ F(A)^k|`: the Yang–Mills terms are gauge invariant.
pub fn yang_mills_gauge_residual(
    ctx: &CochainContext,
    a: &FormPoly,
    bindings: &GeneratorBindings,
    u_matrix: &ComplexMatrix,
    name: &str,
    k: usize,
) -> Result<f64> {
    let (a_u, extended) = gauge_transform(a, bindings, u_matrix, name)?;
    let original = integrate_phi(ctx, bindings, &curvature_power(a, k)?)?;
    let transformed = integrate_phi(ctx, &extended, &curvature_power(&a_u, k)?)?;
    Ok((original - transformed).norm())
}

// ---------------------------------------------------------------------------
// Pairing with unitaries
// ---------------------------------------------------------------------------

/// One order of the pairing series.
#[derive(Debug, Clone, Serialize)]
pub struct PairingOrder {
    pub k: usize,
    pub term_re: f64,
    pub term_im: f64,
    /// `|∫_{ψ_{2k+1}} cs_{2k+1}(u*du) − k!²/(2k+1)!·ψ_{2k+1}(u*,u,…)|`.
    pub cs_identity_residual: f64,
}

/// The truncated pairing `⟨u, ψ̃⟩` on the amplified triple.
#[derive(Debug, Clone, Serialize)]
pub struct PairingReport {
    pub q: usize,
    pub k_max: usize,
    pub value_re: f64,
    pub value_im: f64,
    pub magnitude: f64,
    /// Estimated bound on the dropped tail (geometric extrapolation of the
    /// measured per-order terms; an estimate, reported alongside the value).
    pub truncation_tolerance: f64,
    pub orders: Vec<PairingOrder>,
}

/// `⟨u, ψ̃⟩ = (2πi)^{-1/2} Σ_k (-1)^k k! ψ̃^q_{2k+1}(u*, u, …, u*, u)`,
/// truncated at `k_max`, evaluated on the amplified triple
/// `(M_q ⊗ A, C^q ⊗ H, I_q ⊗ D)`. Also checks, per order, the closed form
/// `∫_{ψ^q_{2k+1}} cs_{2k+1}(u*du) = k!²/(2k+1)! ψ^q_{2k+1}(u*,u,…)`.
pub fn k1_pairing(
    triple: &SpectralTriple,
    f: &ScalarFunction,
    u_matrix: &ComplexMatrix,
    q: usize,
    k_max: usize,
) -> Result<PairingReport> {
    let amplified = triple.amplify(q)?;
    if u_matrix.dim() != amplified.dim() {
        return Err(Error::DimensionMismatch(format!(
            "unitary has dim {} but the amplified space has dim {}",
            u_matrix.dim(),
            amplified.dim()
        )));
    }
    let dev = u_matrix.unitary_deviation();
    if dev > 1e-12 * u_matrix.dim() as f64 {
        return Err(Error::NotUnitary(dev));
    }

    let ctx = CochainContext::new(
        std::sync::Arc::new(amplified),
        std::sync::Arc::new(f.clone()),
        2 * k_max + 2,
    );

    let alg = crate::forms::FormAlgebra::new();
    let (u_sym, ustar_sym) = alg.unitary_pair("u");
    let a_sym = ustar_sym.mul(&u_sym.d());
    let mut bindings = GeneratorBindings::new();
    bindings.insert("u", u_matrix.clone());
    bindings.insert("u*", u_matrix.adjoint());

    let ustar = u_matrix.adjoint();
    let mut orders = Vec::with_capacity(k_max + 1);
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..=k_max {
        let mut args = Vec::with_capacity(2 * k + 2);
        for _ in 0..=k {
            args.push(ustar.clone());
            args.push(u_matrix.clone());
        }
        let psi_val = ctx.psi(&args)?;
        let coeff = factorial(k) * factorial(k) / factorial(2 * k + 1);
        let term = coeff * psi_val;

        let cs = chern_simons(&a_sym, k + 1)?;
        let cs_val = integrate_psi(&ctx, &bindings, &cs)?;
        let cs_identity_residual = (cs_val - term).norm();

        sum += term;
        orders.push(PairingOrder { k, term_re: term.re, term_im: term.im, cs_identity_residual });
    }

    // (2πi)^{-1/2} on the principal branch.
    let prefactor = Complex64::new(0.0, 2.0 * std::f64::consts::PI).powf(-0.5);
    let value = prefactor * sum;

    // Tail estimate from the decay of the measured terms.
    let mags: Vec<f64> = orders.iter().map(|o| Complex64::new(o.term_re, o.term_im).norm()).collect();
    let mut ratio: f64 = 0.0;
    for w in mags.windows(2) {
        if w[0] > 0.0 {
            ratio = ratio.max(w[1] / w[0]);
        }
    }
    let last = mags.last().copied().unwrap_or(0.0);
    let geometric = if ratio < 1.0 && ratio > 0.0 {
        2.0 * last * ratio / (1.0 - ratio) / (2.0 * std::f64::consts::PI).sqrt()
    } else {
        2.0 * last / (2.0 * std::f64::consts::PI).sqrt()
    };
    // Below the rounding floor of the evaluated cochains the geometric model
    // is meaningless; don't report a tolerance tighter than that.
    let noise_floor = 1e-12 * (1.0 + mags.iter().fold(0.0_f64, |a, &b| a.max(b)));
    let truncation_tolerance = geometric.max(noise_floor);

    Ok(PairingReport {
        q,
        k_max,
        value_re: value.re,
        value_im: value.im,
        magnitude: value.norm(),
        truncation_tolerance,
        orders,
    })
}
