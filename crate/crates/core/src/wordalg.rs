//! Exact model of the dense *-algebra spanned by `A` and the reduced words.
//!
//! An element is an `A`-part plus a finite combination of reduced words
//! `x₀u^{ε₁}x₁…u^{εₙ}xₙ`. Each letter is stored as an index into an
//! orthonormal basis of `A` (for `φ_A`): the kernel basis of `E_{εᵢ}` at a
//! sign change, the adapted basis of `A` everywhere else. Reducedness is
//! therefore a property of the key type, not a runtime check.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::qgroup::{HnnInput, Sign};
use crate::starcore::{AlgElement, ComplexMatrix, ComplexVector, C64, DROP, ONE, ZERO};

static NEXT_CONTEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Coefficients below this are discarded when a letter is expanded.
const LETTER_DROP: f64 = 1e-13;
/// Relative eigenvalue cutoff separating a word Gram matrix from its null space.
const GRAM_NULL: f64 = 1e-10;
/// A sign-change letter whose expectation is below this is treated as reduced.
const REDUCED_TOL: f64 = 1e-12;

#[derive(Debug)]
struct LetterBasis {
    elems: Vec<AlgElement>,
    /// Row `k` evaluates `φ_A(e_k* ·)` on matrix-unit coordinates.
    dual: ComplexMatrix,
}

impl LetterBasis {
    fn new(input: &HnnInput, elems: &[AlgElement]) -> Self {
        let alg = input.a().algebra();
        let n = alg.linear_dim();
        let mut dual = ComplexMatrix::zeros(elems.len(), n);
        for (k, e) in elems.iter().enumerate() {
            let es = e.star();
            for i in 0..n {
                dual[(k, i)] = input.phi_a(&(&es * &AlgElement::matrix_unit(alg, i)));
            }
        }
        LetterBasis { elems: elems.to_vec(), dual }
    }

    fn expand(&self, a: &AlgElement) -> Vec<(u16, C64)> {
        let coords = a.coords();
        let scale = a.max_abs().max(1.0);
        let mut out = Vec::new();
        for k in 0..self.elems.len() {
            let c: C64 = self.dual.row(k).iter().zip(coords).map(|(d, x)| d * x).sum();
            if c.norm() > LETTER_DROP * scale {
                out.push((k as u16, c));
            }
        }
        out
    }
}

/// Shared data for symbolic computations over one HNN input.
#[derive(Debug)]
pub struct WordContext {
    id: u64,
    input: HnnInput,
    full: LetterBasis,
    kernel: [LetterBasis; 2],
}

pub type Context = Arc<WordContext>;

pub fn context(input: HnnInput) -> Context {
    let full = LetterBasis::new(&input, input.adapted_onb(Sign::Plus));
    let kernel = [
        LetterBasis::new(&input, input.kernel_onb(Sign::Plus)),
        LetterBasis::new(&input, input.kernel_onb(Sign::Minus)),
    ];
    Arc::new(WordContext { id: NEXT_CONTEXT_ID.fetch_add(1, Ordering::Relaxed), input, full, kernel })
}

impl WordContext {
    pub fn input(&self) -> &HnnInput {
        &self.input
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    fn basis_at(&self, signs: &[Sign], i: usize) -> &LetterBasis {
        match letter_kind(signs, i) {
            LetterKind::Full => &self.full,
            LetterKind::Kernel(s) => &self.kernel[s.index()],
        }
    }

    /// The orthonormal basis used for letter `i` of a word with the given signs.
    pub fn letter_basis(&self, signs: &[Sign], i: usize) -> &[AlgElement] {
        &self.basis_at(signs, i).elems
    }

    pub fn letter(&self, signs: &[Sign], i: usize, k: u16) -> &AlgElement {
        &self.basis_at(signs, i).elems[k as usize]
    }
}

/// Which basis a letter position is expanded over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LetterKind {
    Full,
    Kernel(Sign),
}

/// Letter `i` sits between `u^{ε_i}` and `u^{ε_{i+1}}` (signs are 0-based).
pub fn letter_kind(signs: &[Sign], i: usize) -> LetterKind {
    let n = signs.len();
    if i == 0 || i >= n || signs[i - 1] == signs[i] {
        LetterKind::Full
    } else {
        LetterKind::Kernel(signs[i - 1])
    }
}

/// Sign pattern plus letter indices; `letters.len() == signs.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordKey {
    pub signs: Vec<Sign>,
    pub letters: Vec<u16>,
}

impl WordKey {
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// Word with arbitrary letters, possibly not reduced.
#[derive(Debug, Clone)]
pub struct RawWord {
    pub signs: Vec<Sign>,
    pub letters: Vec<AlgElement>,
}

impl RawWord {
    pub fn new(signs: Vec<Sign>, letters: Vec<AlgElement>) -> Result<Self> {
        if letters.len() != signs.len() + 1 {
            return Err(Error::InvalidInput("a word needs one more letter than signs".into()));
        }
        Ok(RawWord { signs, letters })
    }

    /// Concatenation, merging the two boundary letters.
    pub fn concat(&self, other: &RawWord) -> RawWord {
        let mut signs = self.signs.clone();
        signs.extend_from_slice(&other.signs);
        let mut letters: Vec<AlgElement> = self.letters[..self.letters.len() - 1].to_vec();
        letters.push(self.letters.last().unwrap() * &other.letters[0]);
        letters.extend_from_slice(&other.letters[1..]);
        RawWord { signs, letters }
    }
}

/// Element of the dense *-algebra: `a_part + Σ c_w · w`.
#[derive(Clone)]
pub struct SymbolicElement {
    ctx: Context,
    a_part: AlgElement,
    words: BTreeMap<WordKey, C64>,
}

impl fmt::Debug for SymbolicElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolicElement")
            .field("a_part", &self.a_part.coords())
            .field("words", &self.words)
            .finish()
    }
}

impl SymbolicElement {
    pub fn zero(ctx: &Context) -> Self {
        SymbolicElement {
            ctx: ctx.clone(),
            a_part: AlgElement::zero(ctx.input.a().algebra()),
            words: BTreeMap::new(),
        }
    }

    pub fn one(ctx: &Context) -> Self {
        Self::from_a(ctx, &AlgElement::one(ctx.input.a().algebra()))
    }

    pub fn from_a(ctx: &Context, a: &AlgElement) -> Self {
        SymbolicElement { ctx: ctx.clone(), a_part: a.clone(), words: BTreeMap::new() }
    }

    /// `u` or `u*`.
    pub fn generator(ctx: &Context, s: Sign) -> Self {
        let mut x = Self::zero(ctx);
        // The first element of the adapted basis is the unit.
        x.words.insert(WordKey { signs: vec![s], letters: vec![0, 0] }, ONE);
        x
    }

    /// `u^n` for an integer `n` (`u^{−n} = (u*)^n`).
    pub fn generator_power(ctx: &Context, n: i32) -> Self {
        if n == 0 {
            return Self::one(ctx);
        }
        let s = if n > 0 { Sign::Plus } else { Sign::Minus };
        let mut x = Self::zero(ctx);
        x.words.insert(
            WordKey { signs: vec![s; n.unsigned_abs() as usize], letters: vec![0; n.unsigned_abs() as usize + 1] },
            ONE,
        );
        x
    }

    /// Basis word with the given key (coefficient 1).
    pub fn basis_word(ctx: &Context, key: WordKey) -> Result<Self> {
        if key.letters.len() != key.signs.len() + 1 || key.signs.is_empty() {
            return Err(Error::InvalidInput("malformed word key".into()));
        }
        for (i, &k) in key.letters.iter().enumerate() {
            if k as usize >= ctx.letter_basis(&key.signs, i).len() {
                return Err(Error::InvalidInput(format!("letter index {k} out of range at {i}")));
            }
        }
        let mut x = Self::zero(ctx);
        x.words.insert(key, ONE);
        Ok(x)
    }

    /// A word given by its letters; fails unless it is reduced.
    pub fn reduced_word(ctx: &Context, x0: &AlgElement, tail: &[(Sign, AlgElement)]) -> Result<Self> {
        let signs: Vec<Sign> = tail.iter().map(|t| t.0).collect();
        let mut letters = vec![x0.clone()];
        letters.extend(tail.iter().map(|t| t.1.clone()));
        for i in 1..signs.len() {
            if signs[i - 1] != signs[i] {
                let e = ctx.input.expect(signs[i - 1], &letters[i]);
                if e.max_abs() > REDUCED_TOL * letters[i].max_abs().max(1.0) {
                    return Err(Error::InvalidInput(format!(
                        "letter {i} has nonzero expectation at a sign change"
                    )));
                }
            }
        }
        Ok(Self::from_raw(ctx, &RawWord::new(signs, letters)?, ONE))
    }

    /// Reduces an arbitrary word using `u^ε b u^{−ε} = θ^ε(b)`.
    pub fn from_raw(ctx: &Context, raw: &RawWord, coef: C64) -> Self {
        let mut out = Self::zero(ctx);
        let bound = raw.signs.len() / 2;
        reduce_raw(ctx, raw.signs.clone(), raw.letters.clone(), 1, coef, &mut out, 0, bound);
        out
    }

    pub fn context(&self) -> &Context {
        &self.ctx
    }

    pub fn a_part(&self) -> &AlgElement {
        &self.a_part
    }

    pub fn words(&self) -> &BTreeMap<WordKey, C64> {
        &self.words
    }

    /// Largest word length (0 for a pure `A`-part).
    pub fn length(&self) -> usize {
        self.words.keys().map(|k| k.len()).max().unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.words.len() + usize::from(!self.a_part.is_negligible())
    }

    fn check(&self, other: &SymbolicElement) -> Result<()> {
        if self.ctx.id == other.ctx.id {
            Ok(())
        } else {
            Err(Error::ContextMismatch)
        }
    }

    fn add_word(&mut self, key: WordKey, c: C64) {
        let e = self.words.entry(key).or_insert(ZERO);
        *e += c;
    }

    fn prune(&mut self) {
        self.words.retain(|_, c| c.norm() > DROP);
    }

    pub fn checked_add(&self, other: &SymbolicElement) -> Result<SymbolicElement> {
        self.check(other)?;
        let mut out = self.clone();
        out.a_part = &out.a_part + &other.a_part;
        for (k, &c) in &other.words {
            out.add_word(k.clone(), c);
        }
        out.prune();
        Ok(out)
    }

    pub fn checked_sub(&self, other: &SymbolicElement) -> Result<SymbolicElement> {
        self.checked_add(&other.scale(-ONE))
    }

    pub fn scale(&self, c: C64) -> SymbolicElement {
        SymbolicElement {
            ctx: self.ctx.clone(),
            a_part: self.a_part.scale(c),
            words: self.words.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    /// Letters of a stored word as elements of `A`.
    pub fn raw_letters(&self, key: &WordKey) -> Vec<AlgElement> {
        (0..key.letters.len()).map(|i| self.ctx.letter(&key.signs, i, key.letters[i]).clone()).collect()
    }

    /// Terms as raw words; the `A`-part (if nonzero) comes first with no signs.
    pub fn raw_terms(&self) -> Vec<(RawWord, C64)> {
        let mut out = Vec::with_capacity(self.words.len() + 1);
        if !self.a_part.is_negligible() {
            out.push((RawWord { signs: Vec::new(), letters: vec![self.a_part.clone()] }, ONE));
        }
        for (k, &c) in &self.words {
            out.push((RawWord { signs: k.signs.clone(), letters: self.raw_letters(k) }, c));
        }
        out
    }
}

/// `φ_A(E_A(v*w))` for two reduced words with the same signs.
fn word_inner(input: &HnnInput, signs: &[Sign], v: &[AlgElement], w: &[AlgElement]) -> C64 {
    let mut c = &v[0].star() * &w[0];
    for (step, &s) in signs.iter().enumerate() {
        // u^{−s} c u^{s} keeps only the part of c that passes through.
        let tb = input.contract(s, &c);
        c = &(&v[step + 1].star() * &tb) * &w[step + 1];
    }
    input.phi_a(&c)
}

/// Expands a reduced raw word over the letter bases and adds it to `out`.
fn expand_into(ctx: &Context, signs: &[Sign], letters: &[AlgElement], coef: C64, out: &mut SymbolicElement) {
    if signs.is_empty() {
        out.a_part = &out.a_part + &letters[0].scale(coef);
        return;
    }
    let expansions: Vec<Vec<(u16, C64)>> =
        letters.iter().enumerate().map(|(i, l)| ctx.basis_at(signs, i).expand(l)).collect();
    if expansions.iter().any(|e| e.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; letters.len()];
    loop {
        let mut c = coef;
        let mut key = Vec::with_capacity(letters.len());
        for (i, &j) in idx.iter().enumerate() {
            let (k, v) = expansions[i][j];
            c *= v;
            key.push(k);
        }
        out.add_word(WordKey { signs: signs.to_vec(), letters: key }, c);
        let mut p = letters.len();
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            idx[p] += 1;
            if idx[p] < expansions[p].len() {
                break;
            }
            idx[p] = 0;
        }
    }
}

/// Reduces positions `start..` of a word whose earlier letters are already reduced.
#[allow(clippy::too_many_arguments)]
fn reduce_raw(
    ctx: &Context,
    signs: Vec<Sign>,
    letters: Vec<AlgElement>,
    start: usize,
    coef: C64,
    out: &mut SymbolicElement,
    collapses: usize,
    bound: usize,
) {
    // Every collapse removes two generator letters.
    assert!(collapses <= bound, "rewriting exceeded its collapse bound");
    let n = signs.len();
    let mut i = start.max(1);
    while i < n {
        if signs[i - 1] != signs[i] {
            let s = signs[i - 1];
            let b = ctx.input.expect(s, &letters[i]);
            if b.max_abs() > REDUCED_TOL * letters[i].max_abs().max(1.0) {
                let reduced = &letters[i] - &b;
                let mut kept = letters.clone();
                kept[i] = reduced;
                reduce_raw(ctx, signs.clone(), kept, i + 1, coef, out, collapses, bound);
                // u^{ε} b u^{−ε} = θ^{ε}(b) merges letters i−1 and i+1.
                let tb = ctx.input.transport(s, &b);
                let merged = &(&letters[i - 1] * &tb) * &letters[i + 1];
                let mut new_signs = signs[..i - 1].to_vec();
                new_signs.extend_from_slice(&signs[i + 1..]);
                let mut new_letters = letters[..i - 1].to_vec();
                new_letters.push(merged);
                new_letters.extend_from_slice(&letters[i + 2..]);
                reduce_raw(ctx, new_signs, new_letters, i - 1, coef, out, collapses + 1, bound);
                return;
            }
        }
        i += 1;
    }
    expand_into(ctx, &signs, &letters, coef, out);
}

impl SymbolicElement {
    /// Product with full rewriting at every junction.
    pub fn reduce_product(&self, other: &SymbolicElement) -> Result<SymbolicElement> {
        self.check(other)?;
        let mut out = Self::zero(&self.ctx);
        let left = self.raw_terms();
        let right = other.raw_terms();
        for (lw, lc) in &left {
            for (rw, rc) in &right {
                let raw = lw.concat(rw);
                let bound = raw.signs.len() / 2;
                reduce_raw(&self.ctx, raw.signs, raw.letters, lw.signs.len(), lc * rc, &mut out, 0, bound);
            }
        }
        out.prune();
        Ok(out)
    }

    /// Reverses words, negates signs and conjugates letters. The adjoint of a
    /// reduced word is reduced, so only re-expansion is needed.
    pub fn star(&self) -> SymbolicElement {
        let mut out = Self::zero(&self.ctx);
        out.a_part = self.a_part.star();
        for (k, &c) in &self.words {
            let signs: Vec<Sign> = k.signs.iter().rev().map(|s| s.flip()).collect();
            let letters: Vec<AlgElement> = self.raw_letters(k).iter().rev().map(|l| l.star()).collect();
            expand_into(&self.ctx, &signs, &letters, c.conj(), &mut out);
        }
        out.prune();
        out
    }

    /// `E_A(x)`: the `A`-part.
    pub fn expect_a(&self) -> AlgElement {
        self.a_part.clone()
    }

    /// `E_B(x) = E₁(E_A(x))`, as an element of `ι(B) ⊂ A`.
    pub fn expect_b(&self) -> AlgElement {
        self.ctx.input.expect(Sign::Plus, &self.a_part)
    }

    /// `E_B(x)` pulled back to `B`.
    pub fn expect_b_in_b(&self) -> AlgElement {
        self.ctx.input.to_b(&self.expect_b())
    }

    /// `E_{θ(B)}(x) = E₋₁(E_A(x))`.
    pub fn expect_theta_b(&self) -> AlgElement {
        self.ctx.input.expect(Sign::Minus, &self.a_part)
    }

    /// Haar state `φ_A∘E_A`.
    pub fn phi_m(&self) -> C64 {
        self.ctx.input.phi_a(&self.a_part)
    }

    /// Counit of the HNN quantum group: the character with `ε(u) = 1` extending `ε_A`.
    pub fn counit_m(&self) -> C64 {
        let mut total = self.ctx.input.counit_a(&self.a_part);
        for (k, &c) in &self.words {
            let mut t = c;
            for (i, &l) in k.letters.iter().enumerate() {
                t *= self.ctx.input.counit_a(self.ctx.letter(&k.signs, i, l));
            }
            total += t;
        }
        total
    }

    /// `E_A(self · other)` following only the collapse chains.
    pub fn expect_a_product(&self, other: &SymbolicElement) -> Result<AlgElement> {
        self.check(other)?;
        let input = &self.ctx.input;
        let mut total = &self.a_part * &other.a_part;
        for (lk, &lc) in &self.words {
            let ll = self.raw_letters(lk);
            for (rk, &rc) in &other.words {
                if lk.len() != rk.len() {
                    continue;
                }
                let n = lk.len();
                let rl = other.raw_letters(rk);
                let mut c = &ll[n] * &rl[0];
                let mut alive = true;
                for step in 0..n {
                    let s = lk.signs[n - 1 - step];
                    if rk.signs[step] != s.flip() {
                        alive = false;
                        break;
                    }
                    let tb = input.transport(s, &input.expect(s, &c));
                    c = &(&ll[n - 1 - step] * &tb) * &rl[step + 1];
                }
                if alive {
                    total = &total + &c.scale(lc * rc);
                }
            }
        }
        Ok(total)
    }

    /// `‖(x − y)Ω‖`; zero exactly when `x = y` in the algebra.
    pub fn distance(&self, other: &SymbolicElement) -> Result<f64> {
        Ok(self.checked_sub(other)?.gns_norm())
    }

    /// `‖xΩ‖ = φ_m(x*x)^{1/2}`.
    ///
    /// Word keys overcount when `dim B > 1`, so a zero element can carry large
    /// coefficients. Expanding `φ_m(x*x)` directly would cancel them only to
    /// `ε·|c|²`; instead each sign pattern's Gram matrix is diagonalized and
    /// the coefficients are projected, which cancels to `ε·|c|`. Eigenvalues
    /// below `GRAM_NULL` (relative) are roundoff in the null space.
    pub fn gns_norm(&self) -> f64 {
        let input = &self.ctx.input;
        let mut total = input.phi_a(&(&self.a_part.star() * &self.a_part)).re.max(0.0);
        let mut groups: BTreeMap<&[Sign], Vec<(Vec<AlgElement>, C64)>> = BTreeMap::new();
        for (k, &c) in &self.words {
            groups.entry(&k.signs).or_default().push((self.raw_letters(k), c));
        }
        for (signs, terms) in groups {
            let m = terms.len();
            let mut gram = ComplexMatrix::zeros(m, m);
            for i in 0..m {
                for j in i..m {
                    let g = word_inner(input, signs, &terms[i].0, &terms[j].0);
                    gram[(i, j)] = g;
                    gram[(j, i)] = g.conj();
                }
            }
            let c = ComplexVector::from_iterator(m, terms.iter().map(|t| t.1));
            let eig = gram.symmetric_eigen();
            let cutoff = GRAM_NULL * eig.eigenvalues.iter().fold(1.0f64, |a, &b| a.max(b));
            for (j, lambda) in eig.eigenvalues.iter().enumerate() {
                if *lambda > cutoff {
                    total += lambda * eig.eigenvectors.column(j).dotc(&c).norm_sqr();
                }
            }
        }
        total.sqrt()
    }

    /// Largest coefficient, counting the `A`-part by its largest coordinate.
    pub fn max_coefficient(&self) -> f64 {
        self.words.values().map(|c| c.norm()).fold(self.a_part.max_abs(), f64::max)
    }
}

impl std::ops::Mul for &SymbolicElement {
    type Output = SymbolicElement;
    fn mul(self, rhs: &SymbolicElement) -> SymbolicElement {
        self.reduce_product(rhs).expect("product across HNN contexts")
    }
}

impl std::ops::Add for &SymbolicElement {
    type Output = SymbolicElement;
    fn add(self, rhs: &SymbolicElement) -> SymbolicElement {
        self.checked_add(rhs).expect("sum across HNN contexts")
    }
}

impl std::ops::Sub for &SymbolicElement {
    type Output = SymbolicElement;
    fn sub(self, rhs: &SymbolicElement) -> SymbolicElement {
        self.checked_sub(rhs).expect("difference across HNN contexts")
    }
}

/// Word over basis letters of `A` and generators, in the literal grammar
/// `a[i]`, `u`, `u*` joined by `.`, e.g. `a[3].u.a[1].u*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Token {
    Letter(usize),
    Gen(Sign),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct WordLiteral(pub Vec<Token>);

impl WordLiteral {
    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for part in text.trim().split('.') {
            let part = part.trim();
            let tok = match part {
                "u" => Token::Gen(Sign::Plus),
                "u*" => Token::Gen(Sign::Minus),
                "1" => continue,
                _ => {
                    let inner = part
                        .strip_prefix("a[")
                        .and_then(|r| r.strip_suffix(']'))
                        .ok_or_else(|| Error::InvalidInput(format!("bad word token '{part}'")))?;
                    let i = inner
                        .parse::<usize>()
                        .map_err(|_| Error::InvalidInput(format!("bad letter index '{inner}'")))?;
                    Token::Letter(i)
                }
            };
            tokens.push(tok);
        }
        Ok(WordLiteral(tokens))
    }

    pub fn generator_count(&self) -> usize {
        self.0.iter().filter(|t| matches!(t, Token::Gen(_))).count()
    }

    /// Random literal with `len` generator letters, each surrounded by random basis letters.
    pub fn random<R: Rng>(rng: &mut R, dim_a: usize, len: usize) -> Self {
        let mut tokens = vec![Token::Letter(rng.gen_range(0..dim_a))];
        for _ in 0..len {
            let s = if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus };
            tokens.push(Token::Gen(s));
            tokens.push(Token::Letter(rng.gen_range(0..dim_a)));
        }
        WordLiteral(tokens)
    }

    pub fn to_raw(&self, input: &HnnInput) -> Result<RawWord> {
        let alg = input.a().algebra();
        let mut signs = Vec::new();
        let mut letters = vec![AlgElement::one(alg)];
        for t in &self.0 {
            match *t {
                Token::Letter(i) => {
                    if i >= input.a().dim() {
                        return Err(Error::InvalidInput(format!("letter a[{i}] out of range")));
                    }
                    let last = letters.pop().unwrap();
                    letters.push(&last * input.a().basis_element(i));
                }
                Token::Gen(s) => {
                    signs.push(s);
                    letters.push(AlgElement::one(alg));
                }
            }
        }
        RawWord::new(signs, letters)
    }

    pub fn evaluate(&self, ctx: &Context) -> Result<SymbolicElement> {
        Ok(SymbolicElement::from_raw(ctx, &self.to_raw(&ctx.input)?, ONE))
    }
}

impl fmt::Display for WordLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|t| match t {
                Token::Letter(i) => format!("a[{i}]"),
                Token::Gen(Sign::Plus) => "u".to_string(),
                Token::Gen(Sign::Minus) => "u*".to_string(),
            })
            .collect();
        write!(f, "{}", parts.join("."))
    }
}

/// Random element: a few random literals with random complex coefficients,
/// each with at most `max_len` generator letters.
pub fn random_element<R: Rng>(ctx: &Context, rng: &mut R, max_len: usize, terms: usize) -> SymbolicElement {
    let mut out = SymbolicElement::zero(ctx);
    let dim = ctx.input.a().dim();
    for _ in 0..terms {
        let len = rng.gen_range(0..=max_len);
        let lit = WordLiteral::random(rng, dim, len);
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let raw = lit.to_raw(&ctx.input).expect("random literal is in range");
        let x = SymbolicElement::from_raw(ctx, &raw, c);
        out = &out + &x;
    }
    out
}

/// All basis words of exactly length `n`.
pub fn basis_words(ctx: &Context, n: usize) -> Vec<WordKey> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for mask in 0..(1usize << n) {
        let signs: Vec<Sign> =
            (0..n).map(|i| if mask >> (n - 1 - i) & 1 == 0 { Sign::Plus } else { Sign::Minus }).collect();
        let sizes: Vec<usize> = (0..=n).map(|i| ctx.letter_basis(&signs, i).len()).collect();
        if sizes.contains(&0) {
            continue;
        }
        let mut idx = vec![0usize; n + 1];
        'outer: loop {
            out.push(WordKey { signs: signs.clone(), letters: idx.iter().map(|&i| i as u16).collect() });
            let mut p = n + 1;
            loop {
                if p == 0 {
                    break 'outer;
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < sizes[p] {
                    break;
                }
                idx[p] = 0;
            }
        }
    }
    out
}

/// Finite sum `Σ xᵢ ⊗ yᵢ` of elementary tensors.
#[derive(Debug, Clone)]
pub struct SymbolicTensor {
    pub pairs: Vec<(SymbolicElement, SymbolicElement)>,
}

impl SymbolicTensor {
    /// `(id⊗φ_m)(t) = Σ φ_m(yᵢ) xᵢ`.
    pub fn id_phi(&self, ctx: &Context) -> SymbolicElement {
        let mut out = SymbolicElement::zero(ctx);
        for (x, y) in &self.pairs {
            out = &out + &x.scale(y.phi_m());
        }
        out
    }

    /// `(φ_m⊗id)(t) = Σ φ_m(xᵢ) yᵢ`.
    pub fn phi_id(&self, ctx: &Context) -> SymbolicElement {
        let mut out = SymbolicElement::zero(ctx);
        for (x, y) in &self.pairs {
            out = &out + &y.scale(x.phi_m());
        }
        out
    }
}

/// Raw word over basis letters of `A`, cached after reduction.
struct NormalizedWords<'a> {
    ctx: &'a Context,
    cache: HashMap<(Vec<Sign>, Vec<usize>), SymbolicElement>,
}

impl<'a> NormalizedWords<'a> {
    fn new(ctx: &'a Context) -> Self {
        NormalizedWords { ctx, cache: HashMap::new() }
    }

    fn get(&mut self, signs: &[Sign], idx: &[usize]) -> &SymbolicElement {
        let ctx = self.ctx;
        self.cache.entry((signs.to_vec(), idx.to_vec())).or_insert_with(|| {
            let a = ctx.input.a();
            let letters = idx.iter().map(|&i| a.basis_element(i).clone()).collect();
            SymbolicElement::from_raw(ctx, &RawWord { signs: signs.to_vec(), letters }, ONE)
        })
    }
}

/// `Δ(ℓ)` for a letter, as a dense `n × n` matrix over `e_j ⊗ e_k`.
fn letter_coproduct(input: &HnnInput, letter: &AlgElement) -> ComplexMatrix {
    let a = input.a();
    let n = a.dim();
    let d = a.comultiply_coords(&a.basis_coords(letter));
    ComplexMatrix::from_row_slice(n, n, &d)
}

fn multi_indices(n: usize, order: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = n.pow(order as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; order];
        for p in (0..order).rev() {
            idx[p] = flat % n;
            flat /= n;
        }
        idx
    })
}

/// Contracts mode `mode` of a row-major tensor with `n^order` entries: `T'[..j..] = Σ_k m[j,k] T[..k..]`.
fn contract_mode(t: &[C64], n: usize, order: usize, mode: usize, m: &ComplexMatrix) -> Vec<C64> {
    let stride = n.pow((order - 1 - mode) as u32);
    let mut out = vec![ZERO; t.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        let j = (flat / stride) % n;
        let base = flat - j * stride;
        let mut acc = ZERO;
        for k in 0..n {
            let v = t[base + k * stride];
            if v != ZERO {
                acc += m[(j, k)] * v;
            }
        }
        *o = acc;
    }
    out
}

impl SymbolicElement {
    /// `Δ_m(x)` with `Δ(u) = u⊗u` and `Δ_m = Δ_A` on `A`. Letters are expanded
    /// over the distinguished basis of `A`; terms are grouped by the right factor.
    pub fn comultiply(&self) -> SymbolicTensor {
        let ctx = &self.ctx;
        let input = &ctx.input;
        let n = input.a().dim();
        let mut pairs = Vec::new();
        let mut cache = NormalizedWords::new(ctx);
        let d = input.a().comultiply_coords(&input.a().basis_coords(&self.a_part));
        for j in 0..n {
            for k in 0..n {
                let c = d[j * n + k];
                if c.norm() > DROP {
                    pairs.push((
                        SymbolicElement::from_a(ctx, &input.a().basis_element(j).scale(c)),
                        SymbolicElement::from_a(ctx, input.a().basis_element(k)),
                    ));
                }
            }
        }
        for (key, &coef) in &self.words {
            let letters = self.raw_letters(key);
            let deltas: Vec<Vec<(usize, usize, C64)>> = letters
                .iter()
                .map(|l| {
                    let m = letter_coproduct(input, l);
                    let mut v = Vec::new();
                    for j in 0..n {
                        for k in 0..n {
                            if m[(j, k)].norm() > DROP {
                                v.push((j, k, m[(j, k)]));
                            }
                        }
                    }
                    v
                })
                .collect();
            let mut grouped: BTreeMap<Vec<usize>, Vec<(Vec<usize>, C64)>> = BTreeMap::new();
            let sizes: Vec<usize> = deltas.iter().map(|d| d.len()).collect();
            let order = letters.len();
            let total: usize = sizes.iter().product();
            for mut flat in 0..total {
                let mut js = vec![0; order];
                let mut ks = vec![0; order];
                let mut c = coef;
                for p in (0..order).rev() {
                    let (j, k, v) = deltas[p][flat % sizes[p]];
                    flat /= sizes[p];
                    js[p] = j;
                    ks[p] = k;
                    c *= v;
                }
                grouped.entry(ks).or_default().push((js, c));
            }
            for (ks, lefts) in grouped {
                let right = cache.get(&key.signs, &ks).clone();
                let mut left = SymbolicElement::zero(ctx);
                for (js, c) in lefts {
                    left = &left + &cache.get(&key.signs, &js).scale(c);
                }
                pairs.push((left, right));
            }
        }
        SymbolicTensor { pairs }
    }

    /// Residuals of `(id⊗φ_m)Δ_m(x) = φ_m(x)1` and `(φ_m⊗id)Δ_m(x) = φ_m(x)1`.
    ///
    /// Uses a factored contraction: with `D⁽ⁱ⁾[j,k]` the coproduct matrix of letter `i`
    /// and `Φ[k⃗] = φ_m(e_{k₀}u^{ε₁}…e_{kₙ})`, the left slice is
    /// `Σ_{j⃗} (Σ_{k⃗} Π D⁽ⁱ⁾[jᵢ,kᵢ] Φ[k⃗]) e_{j₀}u^{ε₁}…e_{jₙ}`. The residual is the
    /// largest canonical coefficient of the difference.
    pub fn haar_invariance_residual(&self) -> (f64, f64) {
        let ctx = &self.ctx;
        let input = &ctx.input;
        let a = input.a();
        let n = a.dim();
        let phi_basis = a.haar_basis();
        let target = self.phi_m();
        let coords = a.basis_coords(&self.a_part);
        let d = a.comultiply_coords(&coords);
        let mut left_a = vec![ZERO; n];
        let mut right_a = vec![ZERO; n];
        for j in 0..n {
            for k in 0..n {
                left_a[j] += d[j * n + k] * phi_basis[k];
                right_a[k] += d[j * n + k] * phi_basis[j];
            }
        }
        let mut left = SymbolicElement::from_a(ctx, &a.from_basis_coords(&left_a));
        let mut right = SymbolicElement::from_a(ctx, &a.from_basis_coords(&right_a));
        let mut cache = NormalizedWords::new(ctx);
        let mut phi_tables: HashMap<Vec<Sign>, Vec<C64>> = HashMap::new();
        for (key, &coef) in &self.words {
            let order = key.letters.len();
            let phi_t = phi_tables
                .entry(key.signs.clone())
                .or_insert_with(|| {
                    multi_indices(n, order).map(|idx| cache.get(&key.signs, &idx).phi_m()).collect()
                })
                .clone();
            let mats: Vec<ComplexMatrix> =
                self.raw_letters(key).iter().map(|l| letter_coproduct(input, l)).collect();
            let mut kl = phi_t.clone();
            let mut kr = phi_t;
            for (mode, m) in mats.iter().enumerate() {
                kl = contract_mode(&kl, n, order, mode, m);
                kr = contract_mode(&kr, n, order, mode, &m.transpose());
            }
            for (flat, idx) in multi_indices(n, order).enumerate() {
                if kl[flat] != ZERO {
                    left = &left + &cache.get(&key.signs, &idx).scale(coef * kl[flat]);
                }
                if kr[flat] != ZERO {
                    right = &right + &cache.get(&key.signs, &idx).scale(coef * kr[flat]);
                }
            }
        }
        let expected = SymbolicElement::one(ctx).scale(target);
        let rl = (&left - &expected).max_coefficient();
        let rr = (&right - &expected).max_coefficient();
        (rl, rr)
    }

    /// Coassociativity residual of `Δ_m` on the raw basis-letter expansion of `x`.
    ///
    /// Both sides factor letter by letter (`u ↦ u⊗u⊗u`), so with `Lᵢ`, `Rᵢ` the
    /// two iterated coproducts of letter `i` the ℓ¹ distance of a word's images is
    /// at most `Σᵢ ‖Lᵢ − Rᵢ‖₁ Π_{j≠i} max(‖Lⱼ‖₁, ‖Rⱼ‖₁)`; the residual sums this
    /// bound over the terms of `x`.
    pub fn coassociativity_residual(&self) -> f64 {
        let a = self.ctx.input.a();
        let n = a.dim();
        let mut total = 0.0;
        for (raw, coef) in self.raw_terms() {
            let mut diffs = Vec::with_capacity(raw.letters.len());
            let mut norms = Vec::with_capacity(raw.letters.len());
            for l in &raw.letters {
                let mut left = vec![ZERO; n * n * n];
                let mut right = vec![ZERO; n * n * n];
                for (q, cq) in a.basis_coords(l).into_iter().enumerate() {
                    if cq.norm() <= DROP {
                        continue;
                    }
                    for &(j, k, c) in &a.comul()[q] {
                        for &(p, r, d) in &a.comul()[j] {
                            left[(p * n + r) * n + k] += cq * c * d;
                        }
                        for &(p, r, d) in &a.comul()[k] {
                            right[(j * n + p) * n + r] += cq * c * d;
                        }
                    }
                }
                let l1 = |v: &[C64]| v.iter().map(|c| c.norm()).sum::<f64>();
                diffs.push(left.iter().zip(&right).map(|(x, y)| (x - y).norm()).sum::<f64>());
                norms.push(l1(&left).max(l1(&right)));
            }
            for i in 0..diffs.len() {
                let others: f64 = norms.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).product();
                total += coef.norm() * diffs[i] * others;
            }
        }
        total
    }
}

/// `π(x)` on the truncated Fock space, exact on summands of length `≤ L − |x|`.
pub fn fock_evaluate(x: &SymbolicElement, fock: &crate::fock::TruncatedFock) -> Result<crate::fock::FockOperator> {
    let n = x.length();
    if n > fock.l() {
        return Err(Error::Truncation { length: n, max: fock.l() });
    }
    let u = [fock.u_epsilon(Sign::Plus).matrix, fock.u_epsilon(Sign::Minus).matrix];
    let dim = fock.total_dim();
    let mut total = ComplexMatrix::zeros(dim, dim);
    for (raw, c) in x.raw_terms() {
        let mut m = fock.pi_action(&raw.letters[0]).matrix;
        for (s, letter) in raw.signs.iter().zip(&raw.letters[1..]) {
            m = m * &u[s.index()] * fock.pi_action(letter).matrix;
        }
        total += m * c;
    }
    Ok(crate::fock::FockOperator { matrix: total, domain_mask: fock.length_mask(fock.l() - n) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::fock::{build_truncated_fock, masked_residual, DEFAULT_DIM_CAP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx(name: &str) -> Context {
        context(builtin(name).unwrap())
    }

    #[test]
    fn generator_is_unitary() {
        for name in ["z2-free", "z4-sigma2", "s3-quotient"] {
            let c = ctx(name);
            let u = SymbolicElement::generator(&c, Sign::Plus);
            let us = SymbolicElement::generator(&c, Sign::Minus);
            let one = SymbolicElement::one(&c);
            assert!((&u * &us).distance(&one).unwrap() < 1e-12, "{name}");
            assert!((&us * &u).distance(&one).unwrap() < 1e-12, "{name}");
            assert!(u.star().distance(&us).unwrap() < 1e-12, "{name}");
            assert!((u.counit_m() - ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugation_by_u_implements_theta() {
        for name in ["z4-sigma2", "s3-quotient"] {
            let c = ctx(name);
            let input = c.input();
            let u = SymbolicElement::generator(&c, Sign::Plus);
            let us = SymbolicElement::generator(&c, Sign::Minus);
            for b in input.b_basis_in(Sign::Plus) {
                let lhs = &(&u * &SymbolicElement::from_a(&c, &b)) * &us;
                assert_eq!(lhs.length(), 0, "{name}");
                let rhs = SymbolicElement::from_a(&c, &input.transport(Sign::Plus, &b));
                assert!(lhs.distance(&rhs).unwrap() < 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn conjugating_off_sigma_stays_reduced() {
        let c = ctx("z4-sigma2");
        let g = c.input().a().basis_element(1).clone();
        let w = &(&SymbolicElement::generator(&c, Sign::Minus) * &SymbolicElement::from_a(&c, &g))
            * &SymbolicElement::generator(&c, Sign::Plus);
        assert_eq!(w.length(), 2);
        assert!(w.phi_m().norm() < 1e-12);
    }

    #[test]
    fn haar_vanishes_on_powers_of_u() {
        let c = ctx("z2-free");
        for n in [-3, -1, 1, 2, 4] {
            assert!(SymbolicElement::generator_power(&c, n).phi_m().norm() < 1e-12);
        }
        assert!((SymbolicElement::generator_power(&c, 0).phi_m() - ONE).norm() < 1e-12);
    }

    #[test]
    fn product_is_associative_and_star_reverses() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["z4-sigma2", "s3-quotient"] {
            let c = ctx(name);
            for _ in 0..4 {
                let x = random_element(&c, &mut rng, 2, 3);
                let y = random_element(&c, &mut rng, 2, 3);
                let z = random_element(&c, &mut rng, 1, 2);
                let l = &(&x * &y) * &z;
                let r = &x * &(&y * &z);
                assert!(l.distance(&r).unwrap() < 1e-9, "{name}");
                let s1 = (&x * &y).star();
                let s2 = &y.star() * &x.star();
                assert!(s1.distance(&s2).unwrap() < 1e-9, "{name}");
                assert!(x.star().star().distance(&x).unwrap() < 1e-12, "{name}");
            }
        }
    }

    #[test]
    fn fock_model_agrees_with_symbolic_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (name, l) in [("z4-sigma2", 2), ("s3-quotient", 1)] {
            let c = ctx(name);
            let fock = build_truncated_fock(c.input(), l, DEFAULT_DIM_CAP).unwrap();
            let omega = fock.vacuum();
            for _ in 0..4 {
                let x = random_element(&c, &mut rng, 1, 3);
                let y = random_element(&c, &mut rng, l - 1, 3);
                let xy = &x * &y;
                let px = fock_evaluate(&x, &fock).unwrap();
                let py = fock_evaluate(&y, &fock).unwrap();
                let pxy = fock_evaluate(&xy, &fock).unwrap();
                let mask = fock.length_mask(l - x.length() - y.length());
                assert!(masked_residual(&(&px.matrix * &py.matrix), &pxy.matrix, &mask) < 1e-9, "{name}");
                let expect = omega.dotc(&(&pxy.matrix * &omega));
                assert!((expect - xy.phi_m()).norm() < 1e-9, "{name}");
            }
        }
    }

    #[test]
    fn too_long_words_are_rejected_by_the_fock_model() {
        let c = ctx("z2-free");
        let fock = build_truncated_fock(c.input(), 1, DEFAULT_DIM_CAP).unwrap();
        let w = SymbolicElement::generator_power(&c, 2);
        assert!(matches!(fock_evaluate(&w, &fock), Err(Error::Truncation { .. })));
    }

    #[test]
    fn coproduct_is_coassociative_and_haar_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for name in ["z4-sigma2", "s3-quotient", "z2-free"] {
            let c = ctx(name);
            let x = random_element(&c, &mut rng, 2, 3);
            assert!(x.coassociativity_residual() < 1e-9, "{name}");
            let (l, r) = x.haar_invariance_residual();
            assert!(l < 1e-9 && r < 1e-9, "{name}: {l} {r}");
            let u = SymbolicElement::generator(&c, Sign::Plus);
            let t = u.comultiply();
            assert!(t.id_phi(&c).distance(&SymbolicElement::zero(&c)).unwrap() < 1e-12);
        }
    }

    #[test]
    fn literals_round_trip() {
        let lit = WordLiteral::parse("a[1].u.a[0].u*").unwrap();
        assert_eq!(lit.to_string(), "a[1].u.a[0].u*");
        assert_eq!(lit.generator_count(), 2);
        assert!(WordLiteral::parse("b[1]").is_err());
    }
}
