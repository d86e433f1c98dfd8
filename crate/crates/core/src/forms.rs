//! Exact symbolic engine for the universal differential graded algebra over
//! named generators.
//!
//! Elements are kept in left-normal form: every term is a word
//! `h·d(m₁)⋯d(mₙ)` with `h` a monomial in the generators (possibly empty,
//! i.e. the unit) and each letter `mᵢ` a nonempty monomial. Products absorb
//! interior algebra elements rightward through the rewrite
//! `d(x)·c = d(xc) − x·d(c)`, coefficients are exact rationals, and `t`
//! appears only through integer powers with exact `∫₀¹ dt` integration — the
//! Chern–Simons/Yang–Mills regrouping identities are exact combinatorics, so
//! nothing here floats.
//!
//! Generators may be declared as unitary pairs `u, u*`; monomials then reduce
//! by cancelling adjacent `u u*` and `u* u`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::cochains::CochainContext;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Largest word degree the expansion helpers will produce (covers `K ≤ 6`).
pub const DEGREE_CAP: usize = 14;

pub type GenId = u32;

#[derive(Debug)]
struct SymbolInfo {
    name: String,
    /// The other half of a unitary pair, if any.
    partner: Option<GenId>,
}

#[derive(Debug, Default)]
struct AlgebraInner {
    symbols: RwLock<Vec<SymbolInfo>>,
}

/// The generator table shared by all forms of one computation.
#[derive(Debug, Clone, Default)]
pub struct FormAlgebra {
    inner: Arc<AlgebraInner>,
}

impl FormAlgebra {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&self, name: &str, partner: Option<GenId>) -> GenId {
        let mut symbols = self.inner.symbols.write().unwrap();
        if let Some(id) = symbols.iter().position(|s| s.name == name) {
            return id as GenId;
        }
        symbols.push(SymbolInfo { name: name.to_string(), partner });
        (symbols.len() - 1) as GenId
    }

    pub fn generator_id(&self, name: &str) -> Option<GenId> {
        let symbols = self.inner.symbols.read().unwrap();
        symbols.iter().position(|s| s.name == name).map(|i| i as GenId)
    }

    pub fn symbol_name(&self, id: GenId) -> String {
        self.inner.symbols.read().unwrap()[id as usize].name.clone()
    }

    /// A plain generator as a degree-0 form.
    pub fn generator(&self, name: &str) -> FormPoly {
        let id = self.intern(name, None);
        FormPoly::word(self.clone(), Word { head: vec![id], letters: vec![] })
    }

    /// A unitary pair `u, u*` with the relations `u u* = u* u = 1`.
    pub fn unitary_pair(&self, name: &str) -> (FormPoly, FormPoly) {
        let star_name = format!("{name}*");
        let id = self.intern(name, None);
        let star = self.intern(&star_name, Some(id));
        {
            let mut symbols = self.inner.symbols.write().unwrap();
            symbols[id as usize].partner = Some(star);
        }
        (
            FormPoly::word(self.clone(), Word { head: vec![id], letters: vec![] }),
            FormPoly::word(self.clone(), Word { head: vec![star], letters: vec![] }),
        )
    }

    pub fn one(&self) -> FormPoly {
        FormPoly::word(self.clone(), Word { head: vec![], letters: vec![] })
    }

    pub fn zero(&self) -> FormPoly {
        FormPoly { alg: self.clone(), terms: BTreeMap::new() }
    }

    /// Concatenate and cancel adjacent unitary partners.
    fn reduce(&self, parts: impl IntoIterator<Item = GenId>) -> Monomial {
        let symbols = self.inner.symbols.read().unwrap();
        let mut stack: Monomial = Vec::new();
        for g in parts {
            match stack.last() {
                Some(&top) if symbols[top as usize].partner == Some(g) => {
                    stack.pop();
                }
                _ => stack.push(g),
            }
        }
        stack
    }
}

/// Product of generators; empty = the unit.
pub type Monomial = Vec<GenId>;

/// One normal-form word `head · d(letters[0]) ⋯ d(letters[n-1])`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word {
    pub head: Monomial,
    pub letters: Vec<Monomial>,
}

impl Word {
    pub fn degree(&self) -> usize {
        self.letters.len()
    }
}

/// A finite sum of words with exact rational coefficients and explicit
/// integer powers of the parameter `t`.
#[derive(Clone, Debug)]
pub struct FormPoly {
    alg: FormAlgebra,
    terms: BTreeMap<(Word, u32), BigRational>,
}

impl PartialEq for FormPoly {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl FormPoly {
    fn word(alg: FormAlgebra, w: Word) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((w, 0u32), BigRational::one());
        Self { alg, terms }
    }

    pub fn algebra(&self) -> &FormAlgebra {
        &self.alg
    }

    pub fn terms(&self) -> &BTreeMap<(Word, u32), BigRational> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    fn insert(&mut self, w: Word, tpow: u32, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry((w, tpow)).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            // Re-fetch the key to remove; BTreeMap has no entry-removal here.
            let key: Vec<(Word, u32)> = self
                .terms
                .iter()
                .filter(|(_, v)| v.is_zero())
                .map(|(k, _)| k.clone())
                .collect();
            for k in key {
                self.terms.remove(&k);
            }
        }
    }

    pub fn add(&self, other: &FormPoly) -> FormPoly {
        debug_assert!(Arc::ptr_eq(&self.alg.inner, &other.alg.inner));
        let mut out = self.clone();
        for ((w, e), c) in &other.terms {
            out.insert(w.clone(), *e, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &FormPoly) -> FormPoly {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> FormPoly {
        self.scale(&-BigRational::one())
    }

    pub fn scale(&self, c: &BigRational) -> FormPoly {
        if c.is_zero() {
            return self.alg.zero();
        }
        FormPoly {
            alg: self.alg.clone(),
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    pub fn scale_int(&self, num: i64, den: i64) -> FormPoly {
        self.scale(&ratio(num, den))
    }

    /// Multiply by `t^power`.
    pub fn times_t(&self, power: u32) -> FormPoly {
        FormPoly {
            alg: self.alg.clone(),
            terms: self
                .terms
                .iter()
                .map(|((w, e), c)| ((w.clone(), e + power), c.clone()))
                .collect(),
        }
    }

    /// Noncommutative product, renormalizing to left-normal form.
    pub fn mul(&self, other: &FormPoly) -> FormPoly {
        debug_assert!(Arc::ptr_eq(&self.alg.inner, &other.alg.inner));
        let mut out = self.alg.zero();
        for ((w1, e1), c1) in &self.terms {
            for ((w2, e2), c2) in &other.terms {
                let coeff = c1 * c2;
                for (absorbed, sign) in absorb(&self.alg, w1, &w2.head) {
                    let mut word = absorbed;
                    word.letters.extend(w2.letters.iter().cloned());
                    let signed =
                        if sign > 0 { coeff.clone() } else { -coeff.clone() };
                    out.insert(word, e1 + e2, signed);
                }
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> FormPoly {
        let mut acc = self.alg.one();
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// The universal differential: `d(h·dm₁⋯dmₙ) = d(h)·dm₁⋯dmₙ`, zero on
    /// unit heads (`d1 = 0` and `d² = 0`).
    pub fn d(&self) -> FormPoly {
        let mut out = self.alg.zero();
        for ((w, e), c) in &self.terms {
            if w.head.is_empty() {
                continue;
            }
            let mut letters = Vec::with_capacity(w.letters.len() + 1);
            letters.push(w.head.clone());
            letters.extend(w.letters.iter().cloned());
            out.insert(Word { head: vec![], letters }, *e, c.clone());
        }
        out
    }

    /// Exact `∫₀¹ … dt`: each `t^e` becomes `1/(e+1)`, the result is t-free.
    pub fn t_integrate(&self) -> FormPoly {
        let mut out = self.alg.zero();
        for ((w, e), c) in &self.terms {
            out.insert(w.clone(), 0, c / BigRational::from(BigInt::from(*e as i64 + 1)));
        }
        out
    }

    /// Substitute `t = 1`.
    pub fn at_t_one(&self) -> FormPoly {
        let mut out = self.alg.zero();
        for ((w, _), c) in &self.terms {
            out.insert(w.clone(), 0, c.clone());
        }
        out
    }

    pub fn is_t_free(&self) -> bool {
        self.terms.keys().all(|(_, e)| *e == 0)
    }

    /// The common degree of all words, if homogeneous.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut degrees = self.terms.keys().map(|(w, _)| w.degree());
        let first = degrees.next()?;
        degrees.all(|d| d == first).then_some(first)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(|(w, _)| w.degree()).max().unwrap_or(0)
    }
}

/// `word · c` for a monomial `c`, as a signed word list:
/// `…d(mₙ)·c = …d(mₙc) − (…·mₙ)·d(c)` applied recursively.
fn absorb(alg: &FormAlgebra, word: &Word, c: &Monomial) -> Vec<(Word, i32)> {
    if c.is_empty() {
        return vec![(word.clone(), 1)];
    }
    if word.letters.is_empty() {
        let head = alg.reduce(word.head.iter().chain(c.iter()).copied());
        return vec![(Word { head, letters: vec![] }, 1)];
    }
    let mut out = Vec::new();
    let last = word.letters.last().unwrap().clone();
    let prefix =
        Word { head: word.head.clone(), letters: word.letters[..word.letters.len() - 1].to_vec() };
    let merged = alg.reduce(last.iter().chain(c.iter()).copied());
    if !merged.is_empty() {
        let mut w = prefix.clone();
        w.letters.push(merged);
        out.push((w, 1));
    }
    for (mut w, sign) in absorb(alg, &prefix, &last) {
        w.letters.push(c.clone());
        out.push((w, -sign));
    }
    out
}

impl fmt::Display for FormPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((w, e), c) in &self.terms {
            let negative = c.is_negative();
            let mag = if negative { -c.clone() } else { c.clone() };
            if first {
                if negative {
                    write!(f, "-")?;
                }
                first = false;
            } else if negative {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if !mag.is_one() || (w.head.is_empty() && w.letters.is_empty()) {
                write!(f, "{mag} ")?;
            }
            if *e == 1 {
                write!(f, "t ")?;
            } else if *e > 1 {
                write!(f, "t^{e} ")?;
            }
            let name = |id: &GenId| self.alg.symbol_name(*id);
            if !w.head.is_empty() {
                write!(f, "{}", w.head.iter().map(&name).collect::<Vec<_>>().join(" "))?;
                if !w.letters.is_empty() {
                    write!(f, " ")?;
                }
            }
            let mut letter_strs = Vec::new();
            for m in &w.letters {
                letter_strs.push(format!("d({})", m.iter().map(&name).collect::<Vec<_>>().join(" ")));
            }
            write!(f, "{}", letter_strs.join(" "))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Expression AST
// ---------------------------------------------------------------------------

/// Unnormalized expressions over generators, `d`, sums, products, and
/// rational/`t` scalars; [`normalize`] evaluates them into normal form.
#[derive(Debug, Clone)]
pub enum FormExpr {
    Gen(String),
    One,
    D(Box<FormExpr>),
    Mul(Box<FormExpr>, Box<FormExpr>),
    Add(Box<FormExpr>, Box<FormExpr>),
    Scale(i64, i64, Box<FormExpr>),
    TimesT(Box<FormExpr>),
}

impl FormExpr {
    pub fn gen(name: &str) -> Self {
        FormExpr::Gen(name.to_string())
    }

    pub fn d(self) -> Self {
        FormExpr::D(Box::new(self))
    }

    pub fn mul(self, other: FormExpr) -> Self {
        FormExpr::Mul(Box::new(self), Box::new(other))
    }

    pub fn add(self, other: FormExpr) -> Self {
        FormExpr::Add(Box::new(self), Box::new(other))
    }

    pub fn scale(self, num: i64, den: i64) -> Self {
        FormExpr::Scale(num, den, Box::new(self))
    }
}

/// Evaluate an expression tree into canonical left-normal form. Idempotent:
/// normalizing an already-normal form is the identity.
pub fn normalize(alg: &FormAlgebra, expr: &FormExpr) -> FormPoly {
    match expr {
        FormExpr::Gen(name) => alg.generator(name),
        FormExpr::One => alg.one(),
        FormExpr::D(inner) => normalize(alg, inner).d(),
        FormExpr::Mul(a, b) => normalize(alg, a).mul(&normalize(alg, b)),
        FormExpr::Add(a, b) => normalize(alg, a).add(&normalize(alg, b)),
        FormExpr::Scale(num, den, inner) => normalize(alg, inner).scale_int(*num, *den),
        FormExpr::TimesT(inner) => normalize(alg, inner).times_t(1),
    }
}

// ---------------------------------------------------------------------------
// Curvature, Chern–Simons, the 2×2 expansion
// ---------------------------------------------------------------------------

fn require_one_form(a: &FormPoly, what: &str) -> Result<()> {
    if a.homogeneous_degree() != Some(1) || !a.is_t_free() {
        return Err(Error::InvalidParameter(format!(
            "{what} needs a t-free universal one-form"
        )));
    }
    Ok(())
}

fn check_cap(degree: usize) -> Result<()> {
    if degree > DEGREE_CAP {
        return Err(Error::GuardExceeded(format!(
            "form degree {degree} above cap {DEGREE_CAP}"
        )));
    }
    Ok(())
}

/// `F = dA + A²`.
pub fn curvature(a: &FormPoly) -> Result<FormPoly> {
    require_one_form(a, "curvature")?;
    Ok(a.d().add(&a.mul(a)))
}

/// `F^k`, normalized.
pub fn curvature_power(a: &FormPoly, k: usize) -> Result<FormPoly> {
    check_cap(2 * k)?;
    Ok(curvature(a)?.pow(k))
}

/// `F_t = t·dA + t²·A²`, the curvature of `A_t = tA`.
pub fn curvature_t(a: &FormPoly) -> Result<FormPoly> {
    require_one_form(a, "curvature_t")?;
    Ok(a.d().times_t(1).add(&a.mul(a).times_t(2)))
}

/// The Chern–Simons form `cs_{2k-1}(A) = ∫₀¹ A·F_t^{k-1} dt`, t eliminated
/// by exact integration.
///
/// ```
/// use spectral_action::forms::{chern_simons, FormAlgebra};
///
/// let alg = FormAlgebra::new();
/// let a = alg.generator("a").mul(&alg.generator("b").d());
/// // cs₃(A) = ½ A dA + ⅓ A³, exactly.
/// let cs3 = chern_simons(&a, 2).unwrap();
/// let expected = a.mul(&a.d()).scale_int(1, 2).add(&a.pow(3).scale_int(1, 3));
/// assert_eq!(cs3, expected);
/// ```
pub fn chern_simons(a: &FormPoly, k: usize) -> Result<FormPoly> {
    if k == 0 {
        return Err(Error::InvalidParameter("Chern–Simons order k must be ≥ 1".into()));
    }
    check_cap(2 * k - 1)?;
    require_one_form(a, "chern_simons")?;
    let ft = curvature_t(a)?;
    Ok(a.mul(&ft.pow(k - 1)).t_integrate())
}

/// The order-`k` term of the regrouped Taylor series before the `psi`/`phi`
/// split: `∫₀¹ A·F_t^{k-1}·(1 + tA) dt`.
pub fn regrouped_order_term(a: &FormPoly, k: usize) -> Result<FormPoly> {
    if k == 0 {
        return Err(Error::InvalidParameter("order k must be ≥ 1".into()));
    }
    check_cap(2 * k)?;
    require_one_form(a, "regrouped_order_term")?;
    let ft = curvature_t(a)?;
    let tail = a.alg.one().add(&a.times_t(1));
    Ok(a.mul(&ft.pow(k - 1)).mul(&tail).t_integrate())
}

/// `(A 0)·M^{n-1}·e₁` with `M = [[A+dA, −A], [dA, −A]]`: the universal-form
/// expansion of the degree-n Taylor bracket `⟨V,…,V⟩`.
pub fn two_by_two_expansion(a: &FormPoly, n: usize) -> Result<FormPoly> {
    if n == 0 {
        return Err(Error::InvalidParameter("expansion order n must be ≥ 1".into()));
    }
    check_cap(2 * n - 1)?;
    require_one_form(a, "two_by_two_expansion")?;
    let da = a.d();
    let m = [
        [a.add(&da), a.neg()],
        [da.clone(), a.neg()],
    ];
    // v = M^{n-1} e₁, tracked as a 2-vector of forms.
    let mut v = [a.alg.one(), a.alg.zero()];
    for _ in 0..(n - 1) {
        let top = m[0][0].mul(&v[0]).add(&m[0][1].mul(&v[1]));
        let bottom = m[1][0].mul(&v[0]).add(&m[1][1].mul(&v[1]));
        v = [top, bottom];
    }
    Ok(a.mul(&v[0]))
}

// ---------------------------------------------------------------------------
// Truncation index sets
// ---------------------------------------------------------------------------

/// One exponent pattern `A·A^{2v₁}(dA)^{w₁}⋯A^{2vₘ}(dA)^{wₘ}·A^p`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, serde::Serialize)]
pub struct IndexTriple {
    pub v: Vec<u32>,
    pub w: Vec<u32>,
    pub p: u32,
}

impl IndexTriple {
    pub fn v_sum(&self) -> u32 {
        self.v.iter().sum()
    }

    pub fn w_sum(&self) -> u32 {
        self.w.iter().sum()
    }

    /// The Taylor order the pattern came from: `2|v| + |w| + p + 1`.
    pub fn taylor_order(&self) -> u32 {
        2 * self.v_sum() + self.w_sum() + self.p + 1
    }

    /// `1/(2|v| + |w| + p + 1)`.
    pub fn coefficient(&self) -> BigRational {
        ratio(1, self.taylor_order() as i64)
    }

    /// `A·A^{2v₁}(dA)^{w₁}⋯A^{2vₘ}(dA)^{wₘ}·A^p` for a concrete one-form.
    pub fn word(&self, a: &FormPoly) -> Result<FormPoly> {
        let da = a.d();
        let mut acc = a.clone();
        for (vi, wi) in self.v.iter().zip(self.w.iter()) {
            acc = acc.mul(&a.pow(2 * *vi as usize));
            acc = acc.mul(&da.pow(*wi as usize));
        }
        acc = acc.mul(&a.pow(self.p as usize));
        check_cap(acc.max_degree())?;
        Ok(acc)
    }

    /// `(X²)^{v₁} Y^{w₁} ⋯ (X²)^{vₘ} Y^{wₘ} X^p` for arbitrary forms.
    pub fn xy_word(&self, x: &FormPoly, y: &FormPoly) -> FormPoly {
        let xsq = x.mul(x);
        let mut acc = x.algebra().one();
        for (vi, wi) in self.v.iter().zip(self.w.iter()) {
            acc = acc.mul(&xsq.pow(*vi as usize));
            acc = acc.mul(&y.pow(*wi as usize));
        }
        acc.mul(&x.pow(self.p as usize))
    }
}

/// The three index families of the truncation analysis at order `K`:
/// `S_K` (|v|+|w|+⌊p/2⌋ < K), `P_K` (2|v|+|w|+p < K), and the correction set
/// `T_K = S_K \ P_K`.
#[derive(Debug, Clone)]
pub struct IndexSets {
    pub s_set: Vec<IndexTriple>,
    pub p_set: Vec<IndexTriple>,
    pub t_set: Vec<IndexTriple>,
}

pub fn enumerate_index_sets(cap_k: usize) -> Result<IndexSets> {
    if cap_k == 0 {
        return Err(Error::InvalidParameter("K must be ≥ 1".into()));
    }
    let k = cap_k as u32;
    let mut s_set = Vec::new();
    // Enumerate all (v, w) prefixes with |v| + |w| < K, then all p with
    // ⌊p/2⌋ < K − |v| − |w|.
    let mut stack: Vec<(Vec<u32>, Vec<u32>)> = vec![(vec![], vec![])];
    while let Some((v, w)) = stack.pop() {
        let used: u32 = v.iter().sum::<u32>() + w.iter().sum::<u32>();
        let room = k - used; // ≥ 1 by construction
        for p in 0..(2 * room) {
            s_set.push(IndexTriple { v: v.clone(), w: w.clone(), p });
        }
        // Extend with one more (v_i, w_i) segment; v₁ may be 0, later ones ≥ 1.
        let v_lo = if v.is_empty() { 0 } else { 1 };
        for vi in v_lo..room {
            for wi in 1..=(room - vi) {
                if vi + wi < room + 1 && used + vi + wi < k {
                    let mut v2 = v.clone();
                    v2.push(vi);
                    let mut w2 = w.clone();
                    w2.push(wi);
                    stack.push((v2, w2));
                }
            }
        }
    }
    s_set.sort();
    s_set.dedup();

    let in_p = |t: &IndexTriple| 2 * t.v_sum() + t.w_sum() + t.p < k;
    let p_set: Vec<IndexTriple> = s_set.iter().filter(|t| in_p(t)).cloned().collect();
    let t_set: Vec<IndexTriple> = s_set.iter().filter(|t| !in_p(t)).cloned().collect();
    // P_K ⊂ S_K: 2|v|+|w|+p < K implies |v|+|w|+⌊p/2⌋ < K, so filtering the
    // enumerated S_K really does produce all of P_K.
    Ok(IndexSets { s_set, p_set, t_set })
}

/// `Σ_{T_K} 1/(2|v|+|w|+p+1) · A A^{2v₁}(dA)^{w₁}⋯A^p`: the correction sum
/// between the Taylor and Chern–Simons/Yang–Mills truncations.
pub fn truncation_correction(a: &FormPoly, cap_k: usize) -> Result<FormPoly> {
    let sets = enumerate_index_sets(cap_k)?;
    let mut acc = a.algebra().zero();
    for t in &sets.t_set {
        acc = acc.add(&t.word(a)?.scale(&t.coefficient()));
    }
    Ok(acc)
}

/// A one-form whose representation `π_D` is self-adjoint:
/// for each pair `(a, b)` the combination
/// `a·db + b*·d(a*) − d(b* a*)` represents `a[D,b] + (a[D,b])*`.
/// The starred names (`a*`, `b*`) are independent generators that callers
/// bind to the adjoint matrices.
pub fn hermitian_one_form(alg: &FormAlgebra, pairs: &[(String, String)]) -> FormPoly {
    let mut acc = alg.zero();
    for (a_name, b_name) in pairs {
        let a = alg.generator(a_name);
        let b = alg.generator(b_name);
        let a_star = alg.generator(&format!("{a_name}*"));
        let b_star = alg.generator(&format!("{b_name}*"));
        let direct = a.mul(&b.d());
        let mirrored = b_star.mul(&a_star.d()).sub(&b_star.mul(&a_star).d());
        acc = acc.add(&direct).add(&mirrored);
    }
    acc
}

// ---------------------------------------------------------------------------
// Evaluation against the cochains
// ---------------------------------------------------------------------------

/// Generator-name → matrix bindings used to evaluate forms on a triple.
#[derive(Debug, Clone, Default)]
pub struct GeneratorBindings {
    map: HashMap<String, ComplexMatrix>,
}

impl GeneratorBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, matrix: ComplexMatrix) {
        self.map.insert(name.to_string(), matrix);
    }

    pub fn get(&self, name: &str) -> Option<&ComplexMatrix> {
        self.map.get(name)
    }

    fn bind_monomial(
        &self,
        alg: &FormAlgebra,
        mon: &Monomial,
        dim: usize,
    ) -> Result<ComplexMatrix> {
        let mut acc = ComplexMatrix::identity(dim);
        for id in mon {
            let name = alg.symbol_name(*id);
            let m = self
                .map
                .get(&name)
                .ok_or_else(|| Error::UnboundGenerator(name.clone()))?;
            acc = &acc * m;
        }
        Ok(acc)
    }
}

/// Which cochain family a form is integrated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CochainSelector {
    /// `∫_φ`: each degree-n word feeds `phi_n`.
    Phi,
    /// `∫_ψ`: each odd-degree word `2k-1` feeds `psi_{2k-1} = phi_{2k-1} − ½B₀phi_{2k}`.
    Psi,
}

/// `Σ_w coeff(w) · φ_(deg w)(head, letters…)` (or `psi`), the numerical value
/// of a t-free form on bound generators. Words evaluate in parallel.
pub fn integrate_form(
    ctx: &CochainContext,
    bindings: &GeneratorBindings,
    form: &FormPoly,
    selector: CochainSelector,
) -> Result<Complex64> {
    if !form.is_t_free() {
        return Err(Error::InvalidParameter(
            "form still depends on t; integrate or substitute first".into(),
        ));
    }
    let dim = ctx.dim();
    let alg = form.algebra();
    let entries: Vec<(&Word, f64)> = form
        .terms
        .iter()
        .map(|((w, _), c)| {
            (w, c.to_f64().expect("rational coefficient representable as f64"))
        })
        .collect();
    for (w, _) in &entries {
        if w.degree() > ctx.max_order() {
            return Err(Error::GuardExceeded(format!(
                "word degree {} above cochain context limit {}",
                w.degree(),
                ctx.max_order()
            )));
        }
        if selector == CochainSelector::Psi && w.degree() % 2 == 0 {
            return Err(Error::InvalidParameter(
                "psi-integration needs odd-degree words".into(),
            ));
        }
    }

    let values: Vec<Result<Complex64>> = entries
        .par_iter()
        .map(|(w, coeff)| {
            let mut args = Vec::with_capacity(w.degree() + 1);
            args.push(bindings.bind_monomial(alg, &w.head, dim)?);
            for m in &w.letters {
                args.push(bindings.bind_monomial(alg, m, dim)?);
            }
            let value = match selector {
                CochainSelector::Phi => ctx.phi(&args)?,
                CochainSelector::Psi => ctx.psi(&args)?,
            };
            Ok(value * *coeff)
        })
        .collect();

    let mut acc = Complex64::new(0.0, 0.0);
    for v in values {
        acc += v?;
    }
    Ok(acc)
}

/// Shorthand for `∫_φ`.
pub fn integrate_phi(
    ctx: &CochainContext,
    bindings: &GeneratorBindings,
    form: &FormPoly,
) -> Result<Complex64> {
    integrate_form(ctx, bindings, form, CochainSelector::Phi)
}

/// Shorthand for `∫_ψ`.
pub fn integrate_psi(
    ctx: &CochainContext,
    bindings: &GeneratorBindings,
    form: &FormPoly,
) -> Result<Complex64> {
    integrate_form(ctx, bindings, form, CochainSelector::Psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_form(alg: &FormAlgebra) -> FormPoly {
        // A = a·db
        let a = alg.generator("a");
        let b = alg.generator("b");
        a.mul(&b.d())
    }

    #[test]
    fn leibniz_rewrite_of_da_times_b() {
        // (da)·b = d(ab) − a·db
        let alg = FormAlgebra::new();
        let a = alg.generator("a");
        let b = alg.generator("b");
        let lhs = a.d().mul(&b);
        let ab = a.mul(&b);
        let rhs = ab.d().sub(&a.mul(&b.d()));
        assert_eq!(lhs, rhs, "lhs = {lhs}, rhs = {rhs}");
    }

    #[test]
    fn d_squared_vanishes() {
        let alg = FormAlgebra::new();
        let a = alg.generator("a");
        assert!(a.d().d().is_zero());
        let b = alg.generator("b");
        let prod = a.mul(&b.d());
        assert!(prod.d().d().is_zero());
    }

    #[test]
    fn one_form_square_normalizes_to_spec_shape() {
        // (a db)(a db) = a d(ba) db − ab da db
        let alg = FormAlgebra::new();
        let a = alg.generator("a");
        let b = alg.generator("b");
        let big_a = a.mul(&b.d());
        let sq = big_a.mul(&big_a);

        let expected = {
            let ba = b.mul(&a);
            let t1 = a.mul(&ba.d()).mul(&b.d());
            let t2 = a.mul(&b).mul(&a.d()).mul(&b.d());
            t1.sub(&t2)
        };
        assert_eq!(sq, expected, "sq = {sq}");
        assert_eq!(sq.term_count(), 2);
    }

    #[test]
    fn normalization_is_idempotent_via_ast() {
        let alg = FormAlgebra::new();
        // ((da)b)·a + d(d(a))·b
        let expr = FormExpr::gen("a")
            .d()
            .mul(FormExpr::gen("b"))
            .mul(FormExpr::gen("a"))
            .add(FormExpr::gen("a").d().d().mul(FormExpr::gen("b")));
        let once = normalize(&alg, &expr);
        // Feeding the normal form back through products/sums must not move it.
        let again = once.add(&alg.zero()).mul(&alg.one());
        assert_eq!(once, again);
    }

    #[test]
    fn graded_leibniz_for_d() {
        let alg = FormAlgebra::new();
        let a = alg.generator("a");
        let b = alg.generator("b");
        let c = alg.generator("c");
        // X = a·db (odd degree), Y = c (even degree 0):
        let x = a.mul(&b.d());
        let y = c.clone();
        let lhs = x.mul(&y).d();
        let rhs = x.d().mul(&y).sub(&x.mul(&y.d())); // (−1)^{|X|} = −1
        assert_eq!(lhs, rhs);
        // X even (degree 2):
        let x2 = a.d().mul(&b.d());
        let lhs = x2.mul(&y).d();
        let rhs = x2.d().mul(&y).add(&x2.mul(&y.d()));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn chern_simons_first_three_match_printed_forms() {
        let alg = FormAlgebra::new();
        let a = one_form(&alg);
        // cs₁ = A
        assert_eq!(chern_simons(&a, 1).unwrap(), a);
        // cs₃ = ½(A dA + ⅔ A³)
        let cs3 = chern_simons(&a, 2).unwrap();
        let expected = a
            .mul(&a.d())
            .scale_int(1, 2)
            .add(&a.mul(&a).mul(&a).scale_int(1, 3));
        assert_eq!(cs3, expected, "cs₃ = {cs3}");
        // cs₅ = ⅓(A(dA)² + ¾ A dA A² + ¾ A³ dA + ⅗ A⁵)
        let cs5 = chern_simons(&a, 3).unwrap();
        let da = a.d();
        let asq = a.mul(&a);
        let expected = a
            .mul(&da)
            .mul(&da)
            .scale_int(1, 3)
            .add(&a.mul(&da).mul(&asq).scale_int(1, 4))
            .add(&a.mul(&asq).mul(&da).scale_int(1, 4))
            .add(&a.pow(5).scale_int(1, 5));
        assert_eq!(cs5, expected, "cs₅ = {cs5}");
    }

    #[test]
    fn curvature_powers() {
        let alg = FormAlgebra::new();
        let a = one_form(&alg);
        let f1 = curvature(&a).unwrap();
        assert_eq!(f1, a.d().add(&a.mul(&a)));
        let f2 = curvature_power(&a, 2).unwrap();
        let da = a.d();
        let asq = a.mul(&a);
        let expected = da
            .mul(&da)
            .add(&da.mul(&asq))
            .add(&asq.mul(&da))
            .add(&asq.mul(&asq));
        assert_eq!(f2, expected);
    }

    #[test]
    fn curvature_of_pure_gauge_vanishes() {
        // F(u* du) = 0 with u u* = u* u = 1.
        let alg = FormAlgebra::new();
        let (u, ustar) = alg.unitary_pair("u");
        let a = ustar.mul(&u.d());
        let f = curvature(&a).unwrap();
        assert!(f.is_zero(), "F(u*du) = {f}");
    }

    #[test]
    fn two_by_two_expansion_first_orders() {
        let alg = FormAlgebra::new();
        let a = one_form(&alg);
        // n = 1: A
        assert_eq!(two_by_two_expansion(&a, 1).unwrap(), a);
        // n = 2: A² + A dA
        let got = two_by_two_expansion(&a, 2).unwrap();
        let expected = a.mul(&a).add(&a.mul(&a.d()));
        assert_eq!(got, expected);
        // n = 4: A⁴ + A³dA + A dA A² + A dA dA A + A dA dA dA
        let got = two_by_two_expansion(&a, 4).unwrap();
        let da = a.d();
        let expected = a
            .pow(4)
            .add(&a.pow(3).mul(&da))
            .add(&a.mul(&da).mul(&a.pow(2)))
            .add(&a.mul(&da).mul(&da).mul(&a))
            .add(&a.mul(&da).mul(&da).mul(&da));
        assert_eq!(got, expected);
    }

    #[test]
    fn index_set_k1_is_the_half_a_squared_pattern() {
        let sets = enumerate_index_sets(1).unwrap();
        assert_eq!(sets.t_set.len(), 1);
        let t = &sets.t_set[0];
        assert!(t.v.is_empty() && t.w.is_empty() && t.p == 1);
        assert_eq!(t.coefficient(), ratio(1, 2));
        // The word is A·A = A².
        let alg = FormAlgebra::new();
        let a = one_form(&alg);
        assert_eq!(t.word(&a).unwrap(), a.mul(&a));
    }

    #[test]
    fn index_set_cardinality_bound() {
        for k in 1..=8 {
            let sets = enumerate_index_sets(k).unwrap();
            assert!(
                sets.t_set.len() <= 1 << (k + 1),
                "K = {k}: |T_K| = {} > 2^{}",
                sets.t_set.len(),
                k + 1
            );
            // And |S_K| obeys the same 2^{K+1} bound.
            assert!(sets.s_set.len() <= 1 << (k + 1));
        }
    }

    #[test]
    fn expansion_identities_for_xy_words() {
        // Σ_{n≤K} e₁ᵗ(αX+βY)^{n-1}e₁ = Σ_{P_K} (X²)^{v₁}Y^{w₁}⋯X^p and
        // Σ_{k≤K} (X²+Y)^{k-1}(1+X) = Σ_{S_K} …, with X = tA, Y = tdA.
        let alg = FormAlgebra::new();
        let a = one_form(&alg);
        let x = a.times_t(1);
        let y = a.d().times_t(1);

        for cap_k in 1..=5usize {
            let sets = enumerate_index_sets(cap_k).unwrap();

            // α = [[1,-1],[0,-1]], β = [[1,0],[1,0]] as 2×2 form matrices.
            let m = [
                [x.add(&y), x.neg()],
                [y.clone(), x.neg()],
            ];
            let mut v = [alg.one(), alg.zero()];
            let mut lhs_p = alg.zero();
            for _ in 0..cap_k {
                lhs_p = lhs_p.add(&v[0]);
                let top = m[0][0].mul(&v[0]).add(&m[0][1].mul(&v[1]));
                let bottom = m[1][0].mul(&v[0]).add(&m[1][1].mul(&v[1]));
                v = [top, bottom];
            }
            let mut rhs_p = alg.zero();
            for t in &sets.p_set {
                rhs_p = rhs_p.add(&t.xy_word(&x, &y));
            }
            assert_eq!(lhs_p, rhs_p, "P_{cap_k} identity");

            let fxy = x.mul(&x).add(&y);
            let mut lhs_s = alg.zero();
            for k in 1..=cap_k {
                lhs_s = lhs_s.add(&fxy.pow(k - 1).mul(&alg.one().add(&x)));
            }
            let mut rhs_s = alg.zero();
            for t in &sets.s_set {
                rhs_s = rhs_s.add(&t.xy_word(&x, &y));
            }
            assert_eq!(lhs_s, rhs_s, "S_{cap_k} identity");
        }
    }

    #[test]
    fn bianchi_identity_symbolic() {
        // d(F_t^{k-1}) = −[A_t, F_t^{k-1}] = F_t^{k-1} A_t − A_t F_t^{k-1}.
        let alg = FormAlgebra::new();
        // Two-term one-form for generality.
        let a1 = alg.generator("a").mul(&alg.generator("b").d());
        let a2 = alg.generator("c").mul(&alg.generator("e").d());
        let a = a1.add(&a2);
        let at = a.times_t(1);
        let ft = curvature_t(&a).unwrap();
        for k in 1..=4usize {
            let fpow = ft.pow(k - 1);
            let lhs = fpow.d();
            let rhs = fpow.mul(&at).sub(&at.mul(&fpow));
            assert_eq!(lhs, rhs, "Bianchi at k = {k}");
        }
    }

    #[test]
    fn pretty_printer_smoke() {
        let alg = FormAlgebra::new();
        let a = one_form(&alg);
        let cs3 = chern_simons(&a, 2).unwrap();
        let text = format!("{cs3}");
        assert!(text.contains("1/3"), "printed: {text}");
        assert!(text.contains("d(b)"), "printed: {text}");
    }
}
