//! Check suites run by the CLI and the acceptance tests.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::britton::{oracle_values, GroupWord, HnnGroupData};
use crate::error::{Error, Result};
use crate::fock::{build_truncated_fock, masked_residual};
use crate::jvkk::{build_gns_trunc, build_jv, homotopy, JvData, Side, DEFAULT_WORD_CAP};
use crate::qgroup::{HnnInput, Sign};
use crate::report::{CheckReport, SuiteReport};
use crate::starcore::{AlgElement, ComplexMatrix, MaxAbs, C64, ONE, TAU_ALG, TAU_GRAM};
use crate::wordalg::{basis_words, context, fock_evaluate, random_element, Context, SymbolicElement, WordLiteral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Construction,
    Wordalg,
    Oracle,
    Haar,
    Fock,
    Jv,
    Homotopy,
}

impl Suite {
    pub const ALL: [Suite; 7] =
        [Suite::Construction, Suite::Wordalg, Suite::Oracle, Suite::Haar, Suite::Fock, Suite::Jv, Suite::Homotopy];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Construction => "construction",
            Suite::Wordalg => "wordalg",
            Suite::Oracle => "oracle",
            Suite::Haar => "haar",
            Suite::Fock => "fock",
            Suite::Jv => "jv",
            Suite::Homotopy => "homotopy",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Algebraic identities (relations, commutators with `A`, oracle agreement).
    pub alg: f64,
    /// Gram-level identities (unitarity, GNS norms, homotopy).
    pub gram: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { alg: TAU_ALG, gram: TAU_GRAM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub l: usize,
    pub suites: Vec<Suite>,
    pub seed: u64,
    pub dim_cap: usize,
    pub tolerances: Tolerances,
    pub oracle_words: usize,
    pub oracle_max_len: usize,
    pub gns_samples: usize,
    pub homotopy_samples: Vec<f64>,
    pub homotopy_words: usize,
}

impl RunOptions {
    pub fn new(l: usize, seed: u64) -> Self {
        RunOptions {
            l,
            suites: Suite::ALL.to_vec(),
            seed,
            dim_cap: crate::fock::DEFAULT_DIM_CAP,
            tolerances: Tolerances::default(),
            oracle_words: 1000,
            oracle_max_len: 6,
            gns_samples: 200,
            homotopy_samples: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            homotopy_words: 50,
        }
    }
}

/// Independent RNG stream for one suite.
fn rng_for(seed: u64, suite: Suite) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ((suite as u64 + 1) << 32))
}

fn algebra_basis(input: &HnnInput) -> &[AlgElement] {
    input.a().basis()
}

/// Structural checks on the input data.
pub fn construction_suite(input: &HnnInput, tol: &Tolerances) -> SuiteReport {
    let mut rep = SuiteReport::new("construction");
    let a = input.a();
    let b = input.b();
    rep.push(CheckReport::new("Haar invariance of phi_A", a.invariance_residual(&a.haar_basis()), tol.alg, "basis of A"));
    rep.push(CheckReport::new("Haar invariance of phi_B", b.invariance_residual(&b.haar_basis()), tol.alg, "basis of B"));
    rep.push(CheckReport::flag("iota intertwines the coproducts", input.iota().intertwines(), "basis of B"));
    rep.push(CheckReport::flag("theta intertwines the coproducts", input.theta().intertwines(), "basis of B"));
    let mut unit: f64 = 0.0;
    let mut idem: f64 = 0.0;
    let mut bimod: f64 = 0.0;
    let mut phi: f64 = 0.0;
    let one = AlgElement::one(a.algebra());
    for s in Sign::both() {
        unit = unit.max(input.expect(s, &one).distance(&one));
        let image = input.b_basis_in(s);
        for x in algebra_basis(input) {
            let e = input.expect(s, x);
            idem = idem.max(input.expect(s, &e).distance(&e));
            phi = phi.max((input.phi_a(&e) - input.phi_a(x)).norm());
            for y in &image {
                bimod = bimod.max(input.expect(s, &(y * x)).distance(&(y * &e)));
                bimod = bimod.max(input.expect(s, &(x * y)).distance(&(&e * y)));
            }
        }
    }
    rep.push(CheckReport::new("E_s(1) = 1", unit, tol.alg, "both signs"));
    rep.push(CheckReport::new("E_s idempotent", idem, tol.alg, "basis of A, both signs"));
    rep.push(CheckReport::new("E_s bimodule property", bimod, tol.alg, "basis of A x basis of B_s"));
    rep.push(CheckReport::new("phi_A o E_s = phi_A", phi, tol.alg, "basis of A, both signs"));
    rep.push(CheckReport::new("E_s invariant: (id x E)Delta = Delta E", input.invariance_residual(), tol.alg, "basis of A"));
    rep.push(CheckReport::new("eps o theta = eps", input.counit_theta_residual(), tol.alg, "basis of B"));
    let mut theta_mult: f64 = 0.0;
    let theta = input.theta();
    for x in input.b().basis() {
        for y in input.b().basis() {
            theta_mult = match (theta.apply(&(x * y)), theta.apply(x), theta.apply(y)) {
                (Ok(l), Ok(tx), Ok(ty)) => theta_mult.max(l.distance(&(&tx * &ty))),
                _ => f64::INFINITY,
            };
        }
    }
    rep.push(CheckReport::new("theta multiplicative", theta_mult, tol.alg, "basis of B"));
    rep.push(
        CheckReport::flag("kernel dimensions", input.kernel_onb(Sign::Plus).len() == a.dim() - b.dim(), "A")
            .with_note(format!("dim A = {}, dim B = {}", a.dim(), b.dim())),
    );
    rep
}

/// Largest residual of the two isometry identities over basis words
/// `x₀u^{ε₁}…u^{εₙ}` (trailing letter 1) of length `1..=max_len`, and the word count.
pub fn lemma_iso_residual(ctx: &Context, max_len: usize) -> Result<(f64, usize)> {
    let input = ctx.input();
    let u = SymbolicElement::generator(ctx, Sign::Plus);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in 1..=max_len {
        for key in basis_words(ctx, n) {
            if key.letters[n] != 0 {
                continue;
            }
            let last = key.signs[n - 1];
            let x = SymbolicElement::basis_word(ctx, key)?;
            let xs = x.star();
            let ea = xs.expect_a_product(&x)?;
            let r = if last == Sign::Minus {
                let xu = &x * &u;
                let eb = input.expect(Sign::Plus, &xu.star().expect_a_product(&xu)?);
                ea.distance(&input.transport(Sign::Plus, &eb))
            } else {
                ea.distance(&input.expect(Sign::Plus, &ea))
            };
            worst = worst.max(r);
            count += 1;
        }
    }
    Ok((worst, count))
}

/// Relations and algebra laws of the symbolic engine.
pub fn wordalg_suite(ctx: &Context, opts: &RunOptions) -> Result<SuiteReport> {
    let tol = &opts.tolerances;
    let mut rep = SuiteReport::new("wordalg");
    let input = ctx.input();
    let one = SymbolicElement::one(ctx);
    let u = SymbolicElement::generator(ctx, Sign::Plus);
    let us = SymbolicElement::generator(ctx, Sign::Minus);
    let unitary = (&u * &us).distance(&one)?.max((&us * &u).distance(&one)?);
    rep.push(CheckReport::new("u u* = u* u = 1", unitary, tol.alg, "exact"));
    let mut rel: f64 = 0.0;
    for b in input.b_basis_in(Sign::Plus) {
        let sb = SymbolicElement::from_a(ctx, &b);
        let tb = SymbolicElement::from_a(ctx, &input.transport(Sign::Plus, &b));
        rel = rel.max((&(&u * &sb) * &us).distance(&tb)?);
        rel = rel.max((&(&us * &tb) * &u).distance(&sb)?);
    }
    rep.push(CheckReport::new("u b u* = theta(b), u* theta(b) u = b", rel, tol.alg, "basis of B"));
    let mut rng = rng_for(opts.seed, Suite::Wordalg);
    let (mut assoc, mut inv, mut anti, mut counit): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    let trials = 10;
    for _ in 0..trials {
        let x = random_element(ctx, &mut rng, opts.l, 3);
        let y = random_element(ctx, &mut rng, opts.l, 3);
        let z = random_element(ctx, &mut rng, opts.l, 2);
        assoc = assoc.max((&(&x * &y) * &z).distance(&(&x * &(&y * &z)))?);
        inv = inv.max(x.star().star().distance(&x)?);
        anti = anti.max((&x * &y).star().distance(&(&y.star() * &x.star()))?);
        counit = counit.max(((&x * &y).counit_m() - x.counit_m() * y.counit_m()).norm());
    }
    let note = format!("{trials} random triples, seed {}", opts.seed);
    rep.push(CheckReport::new("associativity", assoc, tol.alg, "random elements").with_note(note.clone()));
    rep.push(CheckReport::new("x** = x", inv, tol.alg, "random elements").with_note(note.clone()));
    rep.push(CheckReport::new("(xy)* = y* x*", anti, tol.alg, "random elements").with_note(note.clone()));
    rep.push(CheckReport::new("counit multiplicative", counit, tol.alg, "random elements").with_note(note));
    let iso_len = opts.l + 1;
    let (iso, count) = lemma_iso_residual(ctx, iso_len)?;
    rep.push(
        CheckReport::new("isometry lemma: E_A(x*x) vs E_B", iso, tol.alg, format!("basis words of length <= {iso_len}"))
            .with_note(format!("{count} words")),
    );
    Ok(rep)
}

/// Agreement of `φ_m` with the Britton oracle on random `λ`-words.
pub fn oracle_suite(ctx: &Context, data: Option<&HnnGroupData>, opts: &RunOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("oracle");
    let Some(data) = data else {
        rep.note = Some("not a group-algebra family; no classical oracle".into());
        return Ok(rep);
    };
    let (worst, words) = oracle_phi_agreement(ctx, data, opts.oracle_words, opts.oracle_max_len, opts.seed)?;
    rep.push(
        CheckReport::new("phi_m agrees with the Britton oracle", worst, opts.tolerances.alg, format!("random words of length <= {}", opts.oracle_max_len))
            .with_note(format!("{words} words, seed {}", opts.seed)),
    );
    let (worst, words) = oracle_expect_agreement(ctx, data, opts.l.min(2))?;
    rep.push(
        CheckReport::new("E_A(lambda-word) = lambda_h0 iff in base", worst, opts.tolerances.alg, format!("all lambda-words of length <= {}", opts.l.min(2)))
            .with_note(format!("{words} words")),
    );
    Ok(rep)
}

/// Max `|φ_m(x) − δ(nf(x) = e)|` over seeded random words.
pub fn oracle_phi_agreement(ctx: &Context, data: &HnnGroupData, words: usize, max_len: usize, seed: u64) -> Result<(f64, usize)> {
    let mut rng = rng_for(seed, Suite::Oracle);
    let dim = ctx.input().a().dim();
    let mut worst: f64 = 0.0;
    for _ in 0..words {
        let len = rng.gen_range(0..=max_len);
        let lit = WordLiteral::random(&mut rng, dim, len);
        let phi = lit.evaluate(ctx)?.phi_m();
        let expected = if oracle_values(&GroupWord::from_literal(&lit, data), data).is_identity { 1.0 } else { 0.0 };
        worst = worst.max((phi - ONE * expected).norm());
    }
    Ok((worst, words))
}

/// Over all `λ`-words up to `max_len`: `E_A(x) = λ_{h₀}` when the normal form lies in `H`, else 0.
pub fn oracle_expect_agreement(ctx: &Context, data: &HnnGroupData, max_len: usize) -> Result<(f64, usize)> {
    let input = ctx.input();
    let n = input.a().dim();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for len in 0..=max_len {
        let total = n.pow(len as u32 + 1) << len;
        for mut code in 0..total {
            let mut tokens = Vec::new();
            tokens.push(crate::wordalg::Token::Letter(code % n));
            code /= n;
            for _ in 0..len {
                let s = if code % 2 == 0 { Sign::Plus } else { Sign::Minus };
                code /= 2;
                tokens.push(crate::wordalg::Token::Gen(s));
                tokens.push(crate::wordalg::Token::Letter(code % n));
                code /= n;
            }
            let lit = WordLiteral(tokens);
            let ea = lit.evaluate(ctx)?.expect_a();
            let gw = GroupWord::from_literal(&lit, data);
            let nf = crate::britton::normal_form(&gw, data);
            let expected = if nf.is_empty() {
                input.a().basis_element(nf.h0).clone()
            } else {
                AlgElement::zero(input.a().algebra())
            };
            worst = worst.max(ea.distance(&expected));
            count += 1;
        }
    }
    Ok((worst, count))
}

/// Haar invariance and coassociativity of `Δ_m` on basis words.
pub fn haar_suite(ctx: &Context, opts: &RunOptions) -> Result<SuiteReport> {
    let tol = &opts.tolerances;
    let mut rep = SuiteReport::new("haar");
    let max_len = opts.l.min(2);
    let mut elements: Vec<SymbolicElement> =
        algebra_basis(ctx.input()).iter().map(|a| SymbolicElement::from_a(ctx, a)).collect();
    for n in 1..=max_len {
        for key in basis_words(ctx, n) {
            elements.push(SymbolicElement::basis_word(ctx, key)?);
        }
    }
    let (mut left, mut right, mut coassoc): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for x in &elements {
        let (l, r) = x.haar_invariance_residual();
        left = left.max(l);
        right = right.max(r);
        coassoc = coassoc.max(x.coassociativity_residual());
    }
    let mask = format!("basis of A and basis words of length <= {max_len}");
    let note = format!("{} elements", elements.len());
    rep.push(CheckReport::new("(id x phi_m) Delta_m(x) = phi_m(x) 1", left, tol.alg, mask.clone()).with_note(note.clone()));
    rep.push(CheckReport::new("(phi_m x id) Delta_m(x) = phi_m(x) 1", right, tol.alg, mask.clone()).with_note(note));
    rep.push(CheckReport::new("Delta_m coassociative", coassoc, tol.alg, mask));
    let u = SymbolicElement::generator(ctx, Sign::Plus);
    let grouplike = grouplike_residual(ctx, &u)?;
    rep.push(CheckReport::new("Delta_m(u) = u x u", grouplike, tol.alg, "slices by phi_m(z .), |z| <= 1"));
    rep.push(CheckReport::new("phi_m(u^n) = 0 for n != 0", phi_powers(ctx, 2 * opts.l as i32 + 1), tol.alg, "powers of u"));
    Ok(rep)
}

/// Slices `Σ φ_m(z yᵢ) xᵢ` and `Σ φ_m(z xᵢ) yᵢ` of `Δ_m(u)` against `φ_m(zu) u`,
/// for `z` ranging over `1, u^{±1}` and the stars of basis words of length 1.
fn grouplike_residual(ctx: &Context, u: &SymbolicElement) -> Result<f64> {
    let t = u.comultiply();
    let mut probes = vec![SymbolicElement::one(ctx), u.clone(), u.star()];
    for key in basis_words(ctx, 1) {
        probes.push(SymbolicElement::basis_word(ctx, key)?.star());
    }
    let mut worst: f64 = 0.0;
    for z in &probes {
        let expected = u.scale((z * u).phi_m());
        let mut left = SymbolicElement::zero(ctx);
        let mut right = SymbolicElement::zero(ctx);
        for (x, y) in &t.pairs {
            left = &left + &x.scale((z * y).phi_m());
            right = &right + &y.scale((z * x).phi_m());
        }
        worst = worst.max(left.distance(&expected)?).max(right.distance(&expected)?);
    }
    Ok(worst)
}

fn phi_powers(ctx: &Context, max: i32) -> f64 {
    let mut worst: f64 = 0.0;
    for n in -max..=max {
        let expected = if n == 0 { ONE } else { ONE * 0.0 };
        worst = worst.max((SymbolicElement::generator_power(ctx, n).phi_m() - expected).norm());
    }
    worst
}

/// Relations, `*`-structure and GNS consistency on the truncated Fock space.
pub fn fock_suite(ctx: &Context, opts: &RunOptions) -> Result<SuiteReport> {
    let tol = &opts.tolerances;
    let input = ctx.input();
    let fock = build_truncated_fock(input, opts.l, opts.dim_cap)?;
    let mut rep = SuiteReport::new("fock");
    rep.note = Some(format!("L = {}, dim = {}", opts.l, fock.total_dim()));
    let n = fock.total_dim();
    let id = ComplexMatrix::identity(n, n);
    let interior = fock.interior_mask();
    let il = format!("length <= {}", opts.l.saturating_sub(1));
    let up = fock.u_epsilon(Sign::Plus).matrix;
    let um = fock.u_epsilon(Sign::Minus).matrix;
    let unitary = masked_residual(&(&up * &um), &id, &interior).max(masked_residual(&(&um * &up), &id, &interior));
    rep.push(CheckReport::new("u unitary", unitary, tol.alg, il.clone()));
    rep.push(CheckReport::new("u^(-1) = u*", (up.adjoint() - &um).max_abs(), tol.alg, "all"));
    let mut rel: f64 = 0.0;
    for b in input.b_basis_in(Sign::Plus) {
        let lhs = &up * fock.pi_action(&b).matrix * &um;
        let rhs = fock.pi_action(&input.transport(Sign::Plus, &b)).matrix;
        rel = rel.max(masked_residual(&lhs, &rhs, &interior));
    }
    rep.push(CheckReport::new("u pi(b) u* = pi(theta(b))", rel, tol.alg, il));
    let basis = algebra_basis(input);
    let (mut mult, mut star): (f64, f64) = (0.0, 0.0);
    for x in basis {
        let px = fock.pi_action(x).matrix;
        star = star.max((fock.pi_action(&x.star()).matrix - px.adjoint()).max_abs());
        for y in basis {
            mult = mult.max((fock.pi_action(&(x * y)).matrix - &px * fock.pi_action(y).matrix).max_abs());
        }
    }
    rep.push(CheckReport::new("pi multiplicative on A", mult, tol.alg, "all"));
    rep.push(CheckReport::new("pi(a*) = pi(a)*", star, tol.alg, "all"));
    let omega = fock.vacuum();
    let mut rng = rng_for(opts.seed, Suite::Fock);
    let (mut gns, mut state): (f64, f64) = (0.0, 0.0);
    for _ in 0..opts.gns_samples {
        let x = random_element(ctx, &mut rng, opts.l, 3);
        let v = fock_evaluate(&x, &fock)?.matrix * &omega;
        let expected = (&x.star() * &x).phi_m();
        gns = gns.max((C64::new(v.norm_squared(), 0.0) - expected).norm() / expected.norm().max(1.0));
        state = state.max((omega.dotc(&v) - x.phi_m()).norm());
    }
    let note = format!("{} random elements, seed {}", opts.gns_samples, opts.seed);
    let rl = format!("random elements of length <= {}", opts.l);
    rep.push(CheckReport::new("|pi(x) Omega|^2 = phi_m(x*x)", gns, tol.gram, rl.clone()).with_note(note.clone()));
    rep.push(CheckReport::new("<Omega, pi(x) Omega> = phi_m(x)", state, tol.gram, rl).with_note(note));
    let mut simple: f64 = 0.0;
    let mut count = 0;
    for len in 1..=opts.l {
        for key in basis_words(ctx, len) {
            let signs = key.signs.clone();
            let x = SymbolicElement::basis_word(ctx, key)?;
            let letters = x.raw_letters(x.words().keys().next().expect("basis word has one term"));
            let v = fock_evaluate(&x, &fock)?.matrix * &omega;
            simple = simple.max((v - fock.simple_tensor(input, &signs, &letters)?).max_abs());
            count += 1;
        }
    }
    rep.push(
        CheckReport::new("pi(x0 u x1 ... xn) Omega = x0^ (x) ... (x) xn^", simple, tol.alg, format!("basis words of length <= {}", opts.l))
            .with_note(format!("{count} words")),
    );
    Ok(rep)
}

/// The JV unitary `F` and its commutator estimates.
pub fn build_jv_data(ctx: &Context, l: usize) -> Result<JvData> {
    let h = build_gns_trunc(ctx, Side::H, l, DEFAULT_WORD_CAP)?;
    let k = build_gns_trunc(ctx, Side::K, l, DEFAULT_WORD_CAP)?;
    build_jv(h, k)
}

pub fn jv_suite(jv: &JvData) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("jv");
    rep.note = Some(format!(
        "L = {}, dim H = {}, dim K = {}, {} H words, {} K words",
        jv.h().l(),
        jv.h().dim(),
        jv.k().dim(),
        jv.h().num_words(),
        jv.k().num_words()
    ));
    rep.extend(jv.verify_commutators()?);
    rep.extend(jv.verify_augmented());
    Ok(rep)
}

pub fn homotopy_suite(jv: &JvData, opts: &RunOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("homotopy");
    let (path, checks) = homotopy(jv, &opts.homotopy_samples, opts.seed, opts.homotopy_words)?;
    rep.note = path.branch_note.clone();
    rep.extend(checks);
    Ok(rep)
}

fn failed(suite: Suite, e: String) -> SuiteReport {
    let mut rep = SuiteReport::new(suite.name());
    rep.error = Some(e);
    rep
}

/// Runs the requested suites in dependency order; errors are recorded per suite.
pub fn run_suites(input: &HnnInput, group: Option<&HnnGroupData>, opts: &RunOptions) -> Vec<SuiteReport> {
    let mut wanted = opts.suites.clone();
    wanted.sort();
    wanted.dedup();
    let ctx = context(input.clone());
    let mut jv: Option<std::result::Result<JvData, String>> = None;
    let mut out = Vec::new();
    for suite in wanted {
        let rep = match suite {
            Suite::Construction => Ok(construction_suite(input, &opts.tolerances)),
            Suite::Wordalg => wordalg_suite(&ctx, opts).map_err(|e| e.to_string()),
            Suite::Oracle => oracle_suite(&ctx, group, opts).map_err(|e| e.to_string()),
            Suite::Haar => haar_suite(&ctx, opts).map_err(|e| e.to_string()),
            Suite::Fock => fock_suite(&ctx, opts).map_err(|e| e.to_string()),
            Suite::Jv | Suite::Homotopy => {
                let data = jv.get_or_insert_with(|| build_jv_data(&ctx, opts.l).map_err(|e| e.to_string()));
                match data {
                    Ok(d) if suite == Suite::Jv => jv_suite(d).map_err(|e| e.to_string()),
                    Ok(d) => homotopy_suite(d, opts).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                }
            }
        };
        out.push(rep.unwrap_or_else(|e| failed(suite, e)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::{builtin, builtin_group_data};

    fn run(name: &str, l: usize) -> Vec<SuiteReport> {
        let input = builtin(name).unwrap();
        let group = builtin_group_data(name).unwrap();
        let mut opts = RunOptions::new(l, 7);
        opts.oracle_words = 200;
        opts.gns_samples = 40;
        opts.homotopy_words = 10;
        run_suites(&input, group.as_ref(), &opts)
    }

    fn assert_all_pass(reports: &[SuiteReport]) {
        for r in reports {
            assert!(r.error.is_none(), "{}: {:?}", r.suite, r.error);
            if let Some(c) = r.failures().next() {
                panic!("{}: {} residual {:e} > {:e} ({:?})", r.suite, c.name, c.residual, c.threshold, c.note);
            }
        }
    }

    #[test]
    fn z2_free_passes_everything() {
        let reports = run("z2-free", 2);
        assert_eq!(reports.len(), Suite::ALL.len());
        assert_all_pass(&reports);
    }

    #[test]
    fn s3_quotient_passes_and_skips_the_oracle() {
        let reports = run("s3-quotient", 1);
        assert_all_pass(&reports);
        let oracle = reports.iter().find(|r| r.suite == "oracle").unwrap();
        assert!(oracle.checks.is_empty() && oracle.note.is_some());
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn jv_errors_are_reported_per_suite() {
        let input = builtin("trivial").unwrap();
        let mut opts = RunOptions::new(0, 1);
        opts.suites = vec![Suite::Fock, Suite::Construction];
        let reports = run_suites(&input, None, &opts);
        assert_eq!(reports[0].suite, "construction");
        assert!(reports[1].error.is_some());
    }
}
