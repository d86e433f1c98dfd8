//! Models of the scalar function `f`.
//!
//! Three closed-form families are supported: Gaussians `exp(-(x/σ)²)`,
//! rational functions with real coefficients and no real poles, and
//! polynomial × Gaussian products. Each carries exact derivatives of any
//! order, a Fourier transform, and the weighted norms
//! `‖((f·u^m)^{(k)})^∧‖₁` with `u(x) = x - i` that control the trace-class
//! bounds on multiple operator integrals. All norm outputs are upper
//! estimates: quadrature plus an explicit tail bound.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{bucket_size, gauss_legendre_cached, gauss_legendre_on};
use crate::util::{binomial, factorial};

// ---------------------------------------------------------------------------
// Polynomials with complex coefficients
// ---------------------------------------------------------------------------

/// Dense polynomial, coefficients low to high.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<Complex64>,
}

impl Poly {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![] }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    fn trim(&mut self) {
        while let Some(last) = self.coeffs.last() {
            if last.norm() == 0.0 {
                self.coeffs.pop();
            } else {
                break;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs.last().copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn eval(&self, x: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_real(&self, x: f64) -> Complex64 {
        self.eval(Complex64::new(x, 0.0))
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| c * ((i + 1) as f64))
                .collect(),
        )
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            out[i] += c;
        }
        Poly::new(out)
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn scale(&self, factor: Complex64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// All complex roots, by Durand–Kerner iteration. Degree must be ≥ 1.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        let deg = self.degree();
        if self.is_zero() || deg == 0 {
            return Err(Error::InvalidParameter("roots of a constant polynomial".into()));
        }
        let lead = self.leading();
        let monic: Vec<Complex64> = self.coeffs.iter().map(|c| c / lead).collect();
        let radius =
            1.0 + monic[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);
        let seed = Complex64::new(0.4, 0.9);
        let scale = radius.max(1.0) * 0.5;
        let mut z: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32) * scale).collect();
        let eval_monic = |x: Complex64| -> Complex64 {
            let mut acc = Complex64::new(1.0, 0.0);
            for c in monic[..deg].iter().rev() {
                acc = acc * x + c;
            }
            acc
        };
        for _ in 0..600 {
            let mut moved = 0.0_f64;
            for k in 0..deg {
                let mut denom = Complex64::new(1.0, 0.0);
                for j in 0..deg {
                    if j != k {
                        denom *= z[k] - z[j];
                    }
                }
                if denom.norm() < 1e-300 {
                    z[k] += Complex64::new(1e-8, 1e-8);
                    continue;
                }
                let step = eval_monic(z[k]) / denom;
                z[k] -= step;
                moved = moved.max(step.norm());
            }
            if moved < 1e-14 * radius {
                return Ok(z);
            }
        }
        Ok(z)
    }
}

/// `(x - i)^m` as a polynomial.
fn u_power(m: u32) -> Poly {
    Poly::new(vec![Complex64::new(0.0, -1.0), Complex64::new(1.0, 0.0)]).pow(m)
}

// ---------------------------------------------------------------------------
// The function trait consumed by divided differences / operator integrals
// ---------------------------------------------------------------------------

/// A scalar function with derivatives of every needed order, as consumed by
/// the divided-difference kernel. Values may be complex (the weighted
/// functions `f·u^m` are).
pub trait OperatorFunction: Send + Sync {
    fn derivative(&self, order: usize, x: f64) -> Complex64;

    fn value(&self, x: f64) -> Complex64 {
        self.derivative(0, x)
    }
}

// ---------------------------------------------------------------------------
// Scalar function models
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum FunctionKind {
    /// `exp(-(x/scale)²)`
    Gaussian { scale: f64 },
    /// `num(x)/den(x)`, `den` without real roots
    Rational { num: Poly, den: Poly },
    /// `poly(x)·exp(-(x/scale)²)`
    PolyGaussian { poly: Poly, scale: f64 },
}

/// Grid on which Fourier-transform samples are held: `t ∈ [-W, W]` in steps
/// of `step`. The default (`W = 40`, `h = 1/128`) is wide enough that
/// Gaussian tails underflow.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub half_width: f64,
    pub step: f64,
}

impl Default for ProfileGrid {
    fn default() -> Self {
        Self { half_width: 40.0, step: 1.0 / 128.0 }
    }
}

/// Samples of `(f·u^m)^∧` on a symmetric uniform grid.
///
/// `tail_bound` dominates the transform mass outside the grid;
/// `value_error` bounds the absolute error of each stored sample;
/// for numerically transformed kinds `decay` holds the fitted
/// `amp·e^{-rate·|t|}` envelope valid beyond `decay.2`.
#[derive(Debug, Clone)]
pub struct FourierProfile {
    pub m: u32,
    pub half_width: f64,
    pub step: f64,
    pub values: Vec<Complex64>,
    pub tail_bound: f64,
    pub value_error: f64,
    decay: Option<(f64, f64, f64)>, // (amp, rate, from)
}

impl FourierProfile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_at(&self, idx: usize) -> f64 {
        -self.half_width + idx as f64 * self.step
    }

    /// `∫ |t|^k |v(t)| dt` over the grid, by composite Simpson on each
    /// half-axis (the integrand has a kink at `t = 0`, which sits on a node).
    pub fn weighted_mass(&self, k: u32) -> f64 {
        let n = self.values.len();
        let mid = n / 2; // t = 0 for the symmetric grid
        let g: Vec<f64> = (0..n)
            .map(|i| self.t_at(i).abs().powi(k as i32) * self.values[i].norm())
            .collect();
        simpson(&g[..=mid], self.step) + simpson(&g[mid..], self.step)
    }

    /// Upper bound on `∫_{|t| > from} |t|^k |v(t)| dt` via the fitted
    /// exponential envelope: `2·amp·e^{-c·T}·Σ_{j≤k} (k!/j!) T^j / c^{k+1-j}`.
    fn weighted_tail(&self, k: u32) -> f64 {
        match self.decay {
            None => {
                // Gaussian-kind profiles carry an explicit k = 0 bound; the
                // grid is wide enough that reweighting by |t|^k ≤ W^k keeps
                // it astronomically small.
                self.tail_bound * self.half_width.powi(k as i32)
            }
            Some((amp, c, from)) => {
                let mut sum = 0.0;
                for j in 0..=k {
                    sum += factorial(k as usize) / factorial(j as usize)
                        * from.powi(j as i32)
                        / c.powi((k - j) as i32 + 1);
                }
                2.0 * amp * (-c * from).exp() * sum
            }
        }
    }
}

/// A model of the scalar function `f`, immutable after construction.
/// Fourier profiles are computed lazily, once per weight `m`, and shared.
#[derive(Clone)]
pub struct ScalarFunction {
    kind: FunctionKind,
    grid: ProfileGrid,
    /// For the rational kind: roots of the denominator.
    den_roots: Vec<Complex64>,
    /// Lazily filled caches; concurrent first access recomputes idempotently.
    profiles: Arc<RwLock<HashMap<u32, Arc<FourierProfile>>>>,
    deriv_polys: Arc<RwLock<Vec<Poly>>>,
}

impl std::fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScalarFunction({:?})", self.kind)
    }
}

impl ScalarFunction {
    /// `f(x) = exp(-(x/scale)²)`.
    ///
    /// ```
    /// use spectral_action::functions::ScalarFunction;
    ///
    /// let f = ScalarFunction::gaussian(1.0).unwrap();
    /// assert_eq!(f.eval(0.0, 0), 1.0);
    /// assert_eq!(f.eval(0.0, 1), 0.0);
    /// // ‖f̂‖₁ = 1 for this normalization.
    /// assert!((f.fourier_weight_norm(0, 0).unwrap() - 1.0).abs() < 1e-10);
    /// ```
    pub fn gaussian(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter("gaussian scale must be positive".into()));
        }
        Ok(Self::build(FunctionKind::Gaussian { scale }, vec![]))
    }

    pub fn poly_gaussian(poly: &[f64], scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter("gaussian scale must be positive".into()));
        }
        let p = Poly::from_real(poly);
        if p.is_zero() {
            return Err(Error::InvalidParameter("polynomial factor must be nonzero".into()));
        }
        Ok(Self::build(FunctionKind::PolyGaussian { poly: p, scale }, vec![]))
    }

    pub fn rational(num: &[f64], den: &[f64]) -> Result<Self> {
        let num_p = Poly::from_real(num);
        let den_p = Poly::from_real(den);
        if num_p.is_zero() {
            return Err(Error::InvalidParameter("numerator must be nonzero".into()));
        }
        if den_p.is_zero() {
            return Err(Error::InvalidParameter("denominator must be nonzero".into()));
        }
        // Constant denominators (plain polynomials like x²) are allowed for
        // evaluation; the Fourier side rejects them since nothing decays.
        let roots = if den_p.degree() == 0 { vec![] } else { den_p.roots()? };
        for r in &roots {
            if r.im.abs() <= 1e-9 * (1.0 + r.re.abs()) {
                return Err(Error::InvalidParameter(format!(
                    "denominator root {r} is (numerically) real"
                )));
            }
        }
        Ok(Self::build(FunctionKind::Rational { num: num_p, den: den_p }, roots))
    }

    fn build(kind: FunctionKind, den_roots: Vec<Complex64>) -> Self {
        Self {
            kind,
            grid: ProfileGrid::default(),
            den_roots,
            profiles: Arc::new(RwLock::new(HashMap::new())),
            deriv_polys: Arc::new(RwLock::new(Vec::new())),
        }
    }

    /// Same function with a custom Fourier grid (profiles start fresh).
    pub fn with_profile_grid(mut self, grid: ProfileGrid) -> Self {
        self.grid = grid;
        self.profiles = Arc::new(RwLock::new(HashMap::new()));
        self
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    /// Growth exponent γ of the entire class the model belongs to:
    /// 1/2 for Gaussian kinds, 1 for the rational kind.
    pub fn gamma(&self) -> f64 {
        match self.kind {
            FunctionKind::Rational { .. } => 1.0,
            _ => 0.5,
        }
    }

    /// Largest weight `m` for which `f·u^m` still decays (None = unlimited).
    /// Negative means the model itself does not decay.
    pub fn max_weight(&self) -> Option<i64> {
        match &self.kind {
            FunctionKind::Rational { num, den } => {
                Some(den.degree() as i64 - num.degree() as i64 - 1)
            }
            _ => None,
        }
    }

    /// `f^{(k)}(x)`, exact.
    pub fn eval(&self, x: f64, derivative_order: usize) -> f64 {
        match &self.kind {
            FunctionKind::Gaussian { scale } => {
                gaussian_derivative(1.0 / scale, x, derivative_order)
            }
            FunctionKind::PolyGaussian { scale, .. } => {
                let q = self.derivative_poly(derivative_order);
                let y = x / scale;
                q.eval_real(x).re * (-y * y).exp()
            }
            FunctionKind::Rational { den, .. } => {
                let p = self.derivative_poly(derivative_order);
                let d = den.eval_real(x).re;
                p.eval_real(x).re / d.powi(derivative_order as i32 + 1)
            }
        }
    }

    /// Cached numerator/factor polynomial of the k-th derivative
    /// (quotient-rule recursion for the rational kind, Gaussian-factor
    /// recursion for poly × Gaussian).
    fn derivative_poly(&self, k: usize) -> Poly {
        {
            let cache = self.deriv_polys.read().unwrap();
            if let Some(p) = cache.get(k) {
                return p.clone();
            }
        }
        let mut cache = self.deriv_polys.write().unwrap();
        if cache.is_empty() {
            cache.push(match &self.kind {
                FunctionKind::Rational { num, .. } => num.clone(),
                FunctionKind::PolyGaussian { poly, .. } => poly.clone(),
                FunctionKind::Gaussian { .. } => Poly::one(),
            });
        }
        while cache.len() <= k {
            let j = cache.len() - 1;
            let prev = cache[j].clone();
            let next = match &self.kind {
                // f^{(j)} = p_j / den^{j+1}  =>  p_{j+1} = p_j' den - (j+1) p_j den'
                FunctionKind::Rational { den, .. } => prev.derivative().mul(den).sub(
                    &prev.mul(&den.derivative()).scale(Complex64::new(j as f64 + 1.0, 0.0)),
                ),
                // f^{(j)} = q_j e^{-(x/σ)²}  =>  q_{j+1} = q_j' - (2x/σ²) q_j
                FunctionKind::PolyGaussian { scale, .. } | FunctionKind::Gaussian { scale } => {
                    let two_over_s2 = 2.0 / (scale * scale);
                    prev.derivative().sub(&prev.mul(&Poly::from_real(&[0.0, two_over_s2])))
                }
            };
            cache.push(next);
        }
        cache[k].clone()
    }

    /// `f·u^m` as a bound function object (for weighted operator integrals).
    pub fn weighted(&self, m: u32) -> WeightedFunction {
        WeightedFunction { base: self.clone(), m }
    }

    /// `(f·u^m)^∧` as `P(t)·e^{-a t²}`, for the closed-form kinds.
    fn closed_form_transform(&self, m: u32) -> Option<(Poly, f64)> {
        let (poly, scale) = match &self.kind {
            FunctionKind::Gaussian { scale } => (Poly::one(), *scale),
            FunctionKind::PolyGaussian { poly, scale } => (poly.clone(), *scale),
            FunctionKind::Rational { .. } => return None,
        };
        let q = poly.mul(&u_power(m));
        Some(gaussian_poly_transform(&q, scale))
    }

    /// The Fourier profile of `f·u^m`, computed once and shared.
    pub fn profile(&self, m: u32) -> Result<Arc<FourierProfile>> {
        if let Some(p) = self.profiles.read().unwrap().get(&m) {
            return Ok(p.clone());
        }
        let fresh = Arc::new(self.build_profile(m)?);
        let mut cache = self.profiles.write().unwrap();
        Ok(cache.entry(m).or_insert(fresh).clone())
    }

    fn build_profile(&self, m: u32) -> Result<FourierProfile> {
        if let Some(limit) = self.max_weight() {
            if m as i64 > limit {
                return Err(Error::InvalidParameter(format!(
                    "weight m = {m} exceeds the decay order {limit} of the rational model"
                )));
            }
        }
        let step = self.grid.step;
        let n = (self.grid.half_width / step).round() as usize;
        let half_width = n as f64 * step;

        if let Some((p, a)) = self.closed_form_transform(m) {
            let values: Vec<Complex64> = (0..=2 * n)
                .map(|i| {
                    let t = -half_width + i as f64 * step;
                    p.eval_real(t) * (-a * t * t).exp()
                })
                .collect();
            let tail_bound = gaussian_poly_tail(&p, a, half_width, 0);
            return Ok(FourierProfile {
                m,
                half_width,
                step,
                values,
                tail_bound,
                value_error: 0.0,
                decay: None,
            });
        }

        self.build_rational_profile(m, half_width, step, n)
    }

    /// Numerical transform of the rational kind: oscillation-aware panel
    /// quadrature of the defining integral, with the two leading `1/u`,
    /// `1/u²` tails split off and transformed in closed form.
    fn build_rational_profile(
        &self,
        m: u32,
        half_width: f64,
        step: f64,
        n: usize,
    ) -> Result<FourierProfile> {
        let (num, den) = match &self.kind {
            FunctionKind::Rational { num, den } => (num.clone(), den.clone()),
            _ => unreachable!(),
        };
        let r_num = num.mul(&u_power(m)); // f·u^m = r_num / den
        let delta = den.degree() - r_num.degree(); // ≥ 1 by construction

        // Peel off γ₁/u + γ₂/u² so the residual decays at least like y^{-3}.
        let mut gamma1 = Complex64::new(0.0, 0.0);
        let mut gamma2 = Complex64::new(0.0, 0.0);
        if delta == 1 {
            gamma1 = r_num.leading() / den.leading();
            // r − γ₁/u = s_num/(den·u); its y^{-2} coefficient survives when
            // the degree gap against den·u is exactly two.
            let s_num = r_num.mul(&u_power(1)).sub(&den.scale(gamma1));
            if !s_num.is_zero() && den.degree() == s_num.degree() + 1 {
                gamma2 = s_num.leading() / den.leading();
            }
        } else if delta == 2 {
            gamma2 = r_num.leading() / den.leading();
        }

        let u1 = u_power(1);
        let u2 = u_power(2);
        let residual = move |y: f64| -> Complex64 {
            let yy = Complex64::new(y, 0.0);
            let mut v = r_num.eval(yy) / den.eval(yy);
            if gamma1.norm() > 0.0 {
                v -= gamma1 / u1.eval(yy);
            }
            if gamma2.norm() > 0.0 {
                v -= gamma2 / u2.eval(yy);
            }
            v
        };

        // The transform decays like e^{-c|t|}, c the distance of the poles to
        // the real axis (the split-off tails add poles at ±i). Beyond t_cut
        // the samples underflow; skip them and cover with the tail bound.
        let c = self
            .den_roots
            .iter()
            .map(|z| z.im.abs())
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        let t_cut = (38.0 / c).min(half_width);

        let y_max: f64 = 1024.0;
        let values: Vec<Complex64> = (0..=2 * n)
            .into_par_iter()
            .map(|i| {
                let t = -half_width + i as f64 * step;
                if t.abs() > t_cut {
                    return Complex64::new(0.0, 0.0);
                }
                let mut v = oscillatory_transform(&residual, t, y_max);
                if gamma1.norm() > 0.0 {
                    v += gamma1 * u_inv_transform(t);
                }
                if gamma2.norm() > 0.0 {
                    v += gamma2 * u_inv2_transform(t);
                }
                v
            })
            .collect();

        // Fit the exponential envelope on the mid-range of computed samples.
        let mut amp: f64 = 0.0;
        for (i, v) in values.iter().enumerate() {
            let t = (-half_width + i as f64 * step).abs();
            if t > 2.0 / c && t <= t_cut {
                amp = amp.max(v.norm() * (c * t).exp());
            }
        }
        amp = amp.max(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
        let from = t_cut.min(half_width);
        let tail_bound = 2.0 * amp * (-c * from).exp() / c;

        // Per-sample error from truncating the residual integral at y_max:
        // |∫_{|y|>Y} g| ≤ c₃/(2Y²)·2 with c₃ estimated as |g(Y)|·Y³.
        let res_edge = residual(y_max).norm().max(residual(-y_max).norm());
        let value_error = (res_edge * y_max + 1e-16) / (2.0 * std::f64::consts::PI) * 2.0;

        Ok(FourierProfile {
            m,
            half_width,
            step,
            values,
            tail_bound,
            value_error,
            decay: Some((amp, c, from)),
        })
    }

    /// `‖((f·u^m)^{(k)})^∧‖₁ = ‖ |t|^k (f·u^m)^∧ ‖₁`, as an upper estimate.
    pub fn fourier_weight_norm(&self, m: u32, k: u32) -> Result<f64> {
        if let Some((p, a)) = self.closed_form_transform(m) {
            // ∫ |t|^k |P(t)| e^{-a t²} dt over each half-line + analytic tail.
            let half_width = self.grid.half_width;
            let nodes = 700;
            let mut acc = 0.0;
            for (lo, hi) in [(-half_width, 0.0), (0.0, half_width)] {
                let (xs, ws) = gauss_legendre_on(nodes, lo, hi);
                acc += xs
                    .iter()
                    .zip(&ws)
                    .map(|(&t, &w)| {
                        w * t.abs().powi(k as i32) * p.eval_real(t).norm() * (-a * t * t).exp()
                    })
                    .sum::<f64>();
            }
            let tail = gaussian_poly_tail(&p, a, half_width, k);
            if tail > 0.01 * acc.max(f64::MIN_POSITIVE) {
                return Err(Error::WidenGrid { tail, mass: acc });
            }
            return Ok(acc + tail);
        }

        let profile = self.profile(m)?;
        let mass = profile.weighted_mass(k);
        let w = profile.half_width;
        let sample_err = profile.value_error * 2.0 * w.powi(k as i32 + 1) / (k as f64 + 1.0);
        let tail = profile.weighted_tail(k) + sample_err;
        if tail > 0.01 * mass.max(f64::MIN_POSITIVE) {
            return Err(Error::WidenGrid { tail, mass });
        }
        Ok(mass + tail)
    }

    /// `c_{s,n}(f) = Σ_{k=0}^{min(s,n)} C(s,k) ‖((f u^{s-k})^{(n-k)})^∧‖₁ / (n-k)!`.
    pub fn bound_constant(&self, s: u32, n: u32) -> Result<f64> {
        let mut acc = 0.0;
        for k in 0..=s.min(n) {
            acc += binomial(s as usize, k as usize) * self.fourier_weight_norm(s - k, n - k)?
                / factorial((n - k) as usize);
        }
        Ok(acc)
    }

    /// Smallest constant `C ≥ 1` with
    /// `‖((f u^m)^{(n)})^∧‖₁ ≤ C^{n+1} n!^γ` over all `m ≤ s`, `n ≤ n_max`.
    /// A fitted estimate, not a derived bound.
    pub fn fitted_entire_constant(&self, s: u32, n_max: u32) -> Result<f64> {
        let gamma = self.gamma();
        let mut c: f64 = 1.0;
        for m in 0..=s {
            for n in 0..=n_max {
                let norm = self.fourier_weight_norm(m, n)?;
                let needed =
                    (norm / factorial(n as usize).powf(gamma)).powf(1.0 / (n as f64 + 1.0));
                c = c.max(needed);
            }
        }
        Ok(c)
    }
}

impl OperatorFunction for ScalarFunction {
    fn derivative(&self, order: usize, x: f64) -> Complex64 {
        Complex64::new(self.eval(x, order), 0.0)
    }
}

/// `f·u^m` with `u(x) = x - i`, differentiable via the Leibniz rule.
#[derive(Clone, Debug)]
pub struct WeightedFunction {
    base: ScalarFunction,
    m: u32,
}

impl OperatorFunction for WeightedFunction {
    fn derivative(&self, order: usize, x: f64) -> Complex64 {
        let m = self.m as usize;
        let u = Complex64::new(x, -1.0);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut falling = 1.0; // m (m-1) ... (m-j+1)
        for j in 0..=order.min(m) {
            let upow = u.powi((m - j) as i32);
            acc += binomial(order, j) * falling * upow * self.base.eval(x, order - j);
            falling *= (m - j) as f64;
        }
        acc
    }
}

/// `d^k/dx^k exp(-(αx)²)` via the Hermite recursion
/// `H_{k+1}(y) = 2y H_k(y) - 2k H_{k-1}(y)`.
fn gaussian_derivative(alpha: f64, x: f64, k: usize) -> f64 {
    let y = alpha * x;
    let mut h_prev = 1.0;
    if k == 0 {
        return (-y * y).exp();
    }
    let mut h = 2.0 * y;
    for j in 1..k {
        let next = 2.0 * y * h - 2.0 * (j as f64) * h_prev;
        h_prev = h;
        h = next;
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * alpha.powi(k as i32) * h * (-y * y).exp()
}

/// Transform of `Q(x)·exp(-(x/σ)²)` as `P(t)·exp(-a t²)` with `a = σ²/4`.
///
/// Built from the base pair `(σ/(2√π), a)` by Horner: multiplication by `x`
/// on the function side is `P ↦ i (P' - 2 a t P)` on the transform side.
fn gaussian_poly_transform(q: &Poly, sigma: f64) -> (Poly, f64) {
    let a = sigma * sigma / 4.0;
    let base = Poly::constant(Complex64::new(sigma / (2.0 * std::f64::consts::PI.sqrt()), 0.0));
    let op = |p: &Poly| -> Poly {
        let dp = p.derivative();
        let tp = p.mul(&Poly::from_real(&[0.0, 2.0 * a]));
        dp.sub(&tp).scale(Complex64::new(0.0, 1.0))
    };
    let mut acc = Poly::zero();
    for c in q.coeffs().iter().rev() {
        acc = op(&acc).add(&base.scale(*c));
    }
    (acc, a)
}

/// Upper bound on `∫_{|t|>W} |t|^k |P(t)| e^{-a t²} dt`, term by term via the
/// integration-by-parts recursion `I_M = W^{M-1} e^{-aW²}/(2a) + (M-1)/(2a) I_{M-2}`.
fn gaussian_poly_tail(p: &Poly, a: f64, w: f64, k: u32) -> f64 {
    fn i_m(m: i64, a: f64, w: f64) -> f64 {
        if m <= 0 {
            return (-a * w * w).exp() / (2.0 * a * w);
        }
        if m == 1 {
            return (-a * w * w).exp() / (2.0 * a);
        }
        w.powi((m - 1) as i32) * (-a * w * w).exp() / (2.0 * a)
            + (m as f64 - 1.0) / (2.0 * a) * i_m(m - 2, a, w)
    }
    let mut acc = 0.0;
    for (j, c) in p.coeffs().iter().enumerate() {
        acc += c.norm() * i_m(k as i64 + j as i64, a, w);
    }
    2.0 * acc
}

/// Composite Simpson over equally spaced samples; a trailing odd interval is
/// closed by trapezoid.
fn simpson(g: &[f64], h: f64) -> f64 {
    let n = g.len();
    if n < 2 {
        return 0.0;
    }
    let mut acc = 0.0;
    let pairs = (n - 1) / 2;
    for p in 0..pairs {
        let i = 2 * p;
        acc += h / 3.0 * (g[i] + 4.0 * g[i + 1] + g[i + 2]);
    }
    if (n - 1) % 2 == 1 {
        acc += 0.5 * h * (g[n - 2] + g[n - 1]);
    }
    acc
}

/// Closed-form transform of `1/(x-i)`: `i e^{t}` for `t < 0`, else 0.
fn u_inv_transform(t: f64) -> Complex64 {
    if t < 0.0 {
        Complex64::new(0.0, t.exp())
    } else if t == 0.0 {
        Complex64::new(0.0, 0.5)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Closed-form transform of `1/(x-i)²`: `t e^{t}` for `t < 0`, else 0.
fn u_inv2_transform(t: f64) -> Complex64 {
    if t < 0.0 {
        Complex64::new(t * t.exp(), 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// `(1/2π) ∫ g(y) e^{-iyt} dy` over `[-y_max, y_max]` with geometric panels
/// and oscillation-aware Gauss–Legendre node counts (cached rules).
fn oscillatory_transform(g: &impl Fn(f64) -> Complex64, t: f64, y_max: f64) -> Complex64 {
    let mut edges = vec![0.0, 1.0];
    while *edges.last().unwrap() < y_max {
        let next = (edges.last().unwrap() * 2.0).min(y_max);
        edges.push(next);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for pair in edges.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        let width = hi - lo;
        let nodes = bucket_size(((width * t.abs() / 2.0).ceil() as usize + 16).min(3000));
        let rule = gauss_legendre_cached(nodes);
        for (seg_lo, seg_hi) in [(lo, hi), (-hi, -lo)] {
            let mid = 0.5 * (seg_lo + seg_hi);
            let half = 0.5 * (seg_hi - seg_lo);
            for (&x, &w) in rule.0.iter().zip(&rule.1) {
                let y = mid + half * x;
                let phase = Complex64::new(0.0, -y * t).exp();
                acc += g(y) * phase * (w * half);
            }
        }
    }
    acc / (2.0 * std::f64::consts::PI)
}

// ---------------------------------------------------------------------------
// CLI-facing function specification
// ---------------------------------------------------------------------------

/// Wire format used by configs: `{"kind":"gaussian","scale":1.0}`,
/// `{"kind":"rational","num":[...],"den":[...]}`, or
/// `{"kind":"poly_gaussian","poly":[...],"scale":...}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Gaussian { scale: f64 },
    Rational { num: Vec<f64>, den: Vec<f64> },
    PolyGaussian { poly: Vec<f64>, scale: f64 },
}

impl FunctionSpec {
    pub fn build(&self) -> Result<ScalarFunction> {
        match self {
            FunctionSpec::Gaussian { scale } => ScalarFunction::gaussian(*scale),
            FunctionSpec::Rational { num, den } => ScalarFunction::rational(num, den),
            FunctionSpec::PolyGaussian { poly, scale } => {
                ScalarFunction::poly_gaussian(poly, *scale)
            }
        }
    }
}
