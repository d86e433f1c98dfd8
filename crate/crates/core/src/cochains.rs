//! The bracket, the Hochschild cochains `phi_n`, the cyclic combinations
//! `psi_{2k-1}`, and the coboundary operators `b`, `B`, `B_0`.
//!
//! Everything is evaluated on demand at concrete tuples of algebra elements;
//! no multilinear tensor is ever stored. The `b`/`B`/`B_0` operators act on
//! any [`Cochain`] evaluator, so the same implementation exercises the
//! cocycle identities for `phi`, `psi`, and compositions like `b B_0 phi`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::functions::OperatorFunction;
use crate::matrix::ComplexMatrix;
use crate::moi::MoiContext;
use crate::operator::{commutator, HermitianOperator, SpectralTriple};
use crate::util::factorial;

/// Shared state for cochain evaluation: the spectral triple, the scalar
/// function (behind its operator-integral context), and the largest cochain
/// order the function model is trusted for.
pub struct CochainContext {
    triple: Arc<SpectralTriple>,
    moi: MoiContext,
    max_order: usize,
}

impl CochainContext {
    pub fn new(
        triple: Arc<SpectralTriple>,
        f: Arc<dyn OperatorFunction>,
        max_order: usize,
    ) -> Self {
        Self { triple, moi: MoiContext::new(f), max_order }
    }

    pub fn triple(&self) -> &Arc<SpectralTriple> {
        &self.triple
    }

    pub fn moi(&self) -> &MoiContext {
        &self.moi
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn dim(&self) -> usize {
        self.triple.dim()
    }

    fn d_op(&self) -> &HermitianOperator {
        self.triple.d_op()
    }

    /// `⟨V₁,…,Vₙ⟩ = Σ_{j=1}^n tr T^D_{f^[n]}(V_j,…,Vₙ,V₁,…,V_{j-1})`.
    ///
    /// Cyclic in its arguments by construction.
    pub fn bracket(&self, vs: &[ComplexMatrix]) -> Result<Complex64> {
        let n = vs.len();
        if n == 0 {
            return Err(Error::InvalidParameter("bracket needs at least one argument".into()));
        }
        let d = self.d_op();
        let bases: Vec<&HermitianOperator> = vec![d; n + 1];
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let rotated: Vec<&ComplexMatrix> = vs[j..].iter().chain(vs[..j].iter()).collect();
            acc += self.moi.trace(&bases, &rotated)?;
        }
        Ok(acc)
    }

    /// `phi_n(a₀,…,aₙ) = ⟨a₀[D,a₁], [D,a₂], …, [D,aₙ]⟩`; `phi_0 = 0`.
    pub fn phi(&self, args: &[ComplexMatrix]) -> Result<Complex64> {
        if args.is_empty() {
            return Err(Error::InvalidParameter("phi needs a₀".into()));
        }
        let n = args.len() - 1;
        if n == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if n > self.max_order {
            return Err(Error::GuardExceeded(format!(
                "cochain order {n} above context limit {}",
                self.max_order
            )));
        }
        let d = self.d_op();
        let mut vs = Vec::with_capacity(n);
        vs.push(&args[0] * &commutator(d, &args[1])?);
        for a in &args[2..] {
            vs.push(commutator(d, a)?);
        }
        self.bracket(&vs)
    }

    /// `psi_{2k-1}(a₀,…,a_{2k-1}) = phi_{2k-1}(…) − ½ phi_{2k}(1, …)`.
    /// The argument count `2k` determines `k`.
    pub fn psi(&self, args: &[ComplexMatrix]) -> Result<Complex64> {
        if args.is_empty() || args.len() % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "psi_(2k-1) takes an even number of arguments, got {}",
                args.len()
            )));
        }
        let odd_part = self.phi(args)?;
        let mut extended = Vec::with_capacity(args.len() + 1);
        extended.push(ComplexMatrix::identity(self.dim()));
        extended.extend_from_slice(args);
        let even_part = self.phi(&extended)?;
        Ok(odd_part - 0.5 * even_part)
    }

    /// `psĩ_{2k-1} = (-1)^{k-1} (k-1)!/(2k-1)! · psi_{2k-1}`.
    ///
    /// ```
    /// use spectral_action::cochains::psi_tilde_scale;
    ///
    /// assert_eq!(psi_tilde_scale(1), 1.0);          // ψ̃₁ = ψ₁
    /// assert_eq!(psi_tilde_scale(2), -1.0 / 6.0);   // ψ̃₃ = −ψ₃/6
    /// ```
    pub fn psi_tilde(&self, args: &[ComplexMatrix]) -> Result<Complex64> {
        let k = args.len() / 2;
        let scale = psi_tilde_scale(k);
        Ok(self.psi(args)? * scale)
    }
}

/// `(-1)^{k-1} (k-1)!/(2k-1)!`.
pub fn psi_tilde_scale(k: usize) -> f64 {
    let sign = if (k + 1) % 2 == 0 { 1.0 } else { -1.0 };
    sign * factorial(k - 1) / factorial(2 * k - 1)
}

// ---------------------------------------------------------------------------
// Generic cochain evaluators and the b / B / B0 operators
// ---------------------------------------------------------------------------

/// An `n`-cochain: an `(n+1)`-linear functional on the algebra.
pub trait Cochain: Sync {
    /// The cochain order `n` (takes `n + 1` arguments).
    fn order(&self) -> usize;

    fn eval(&self, args: &[ComplexMatrix]) -> Result<Complex64>;
}

/// `phi_n` as a [`Cochain`].
pub struct PhiCochain<'a> {
    pub ctx: &'a CochainContext,
    pub n: usize,
}

impl Cochain for PhiCochain<'_> {
    fn order(&self) -> usize {
        self.n
    }

    fn eval(&self, args: &[ComplexMatrix]) -> Result<Complex64> {
        debug_assert_eq!(args.len(), self.n + 1);
        self.ctx.phi(args)
    }
}

/// `psi_{2k-1}` as a [`Cochain`] of order `2k-1`.
pub struct PsiCochain<'a> {
    pub ctx: &'a CochainContext,
    pub k: usize,
}

impl Cochain for PsiCochain<'_> {
    fn order(&self) -> usize {
        2 * self.k - 1
    }

    fn eval(&self, args: &[ComplexMatrix]) -> Result<Complex64> {
        self.ctx.psi(args)
    }
}

/// `b c(a₀,…,a_{n+1}) = Σ_{j=0}^n (-1)^j c(a₀,…,a_j a_{j+1},…,a_{n+1})
///                      + (-1)^{n+1} c(a_{n+1} a₀, a₁,…,aₙ)`.
pub fn coboundary_b(c: &dyn Cochain, args: &[ComplexMatrix]) -> Result<Complex64> {
    let n = c.order();
    if args.len() != n + 2 {
        return Err(Error::InvalidParameter(format!(
            "b of an order-{n} cochain takes {} arguments, got {}",
            n + 2,
            args.len()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..=n {
        let mut merged = Vec::with_capacity(n + 1);
        merged.extend_from_slice(&args[..j]);
        merged.push(&args[j] * &args[j + 1]);
        merged.extend_from_slice(&args[j + 2..]);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * c.eval(&merged)?;
    }
    let mut wrapped = Vec::with_capacity(n + 1);
    wrapped.push(&args[n + 1] * &args[0]);
    wrapped.extend_from_slice(&args[1..=n]);
    let sign = if (n + 1) % 2 == 0 { 1.0 } else { -1.0 };
    acc += sign * c.eval(&wrapped)?;
    Ok(acc)
}

/// `B₀ c(a₀,…,a_{n-1}) = c(1, a₀,…,a_{n-1})` for an order-`n` cochain.
pub fn connes_b0(c: &dyn Cochain, args: &[ComplexMatrix]) -> Result<Complex64> {
    if args.len() != c.order() || args.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "B₀ of an order-{} cochain takes {} arguments, got {}",
            c.order(),
            c.order(),
            args.len()
        )));
    }
    let mut extended = Vec::with_capacity(args.len() + 1);
    extended.push(ComplexMatrix::identity(args[0].dim()));
    extended.extend_from_slice(args);
    c.eval(&extended)
}

/// `B c(a₀,…,aₙ) = Σ_{j=0}^n (-1)^{nj} c(1, a_j, a_{j+1},…,a_{j-1})`
/// (cyclic antisymmetrization of `B₀`; the output has order `c.order() - 1`).
pub fn connes_b(c: &dyn Cochain, args: &[ComplexMatrix]) -> Result<Complex64> {
    if args.len() != c.order() || args.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "B of an order-{} cochain takes {} arguments, got {}",
            c.order(),
            c.order(),
            args.len()
        )));
    }
    let n = args.len() - 1;
    let identity = ComplexMatrix::identity(args[0].dim());
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..=n {
        let mut cycled = Vec::with_capacity(args.len() + 1);
        cycled.push(identity.clone());
        cycled.extend(args[j..].iter().cloned());
        cycled.extend(args[..j].iter().cloned());
        let sign = if (n * j) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * c.eval(&cycled)?;
    }
    Ok(acc)
}

/// `B₀ c` as a composable [`Cochain`] (order drops by one).
pub struct BZeroCochain<'a>(pub &'a dyn Cochain);

impl Cochain for BZeroCochain<'_> {
    fn order(&self) -> usize {
        self.0.order() - 1
    }

    fn eval(&self, args: &[ComplexMatrix]) -> Result<Complex64> {
        connes_b0(self.0, args)
    }
}

/// `b c` as a composable [`Cochain`] (order rises by one).
pub struct CoboundaryCochain<'a>(pub &'a dyn Cochain);

impl Cochain for CoboundaryCochain<'_> {
    fn order(&self) -> usize {
        self.0.order() + 1
    }

    fn eval(&self, args: &[ComplexMatrix]) -> Result<Complex64> {
        coboundary_b(self.0, args)
    }
}
