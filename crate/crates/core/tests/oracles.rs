//! Independent oracles for the builtin families: coset averaging, Britton
//! normal-form counts, and the group-algebra Haar state.

use std::collections::{HashMap, HashSet};

use hnn_core::britton::{normal_form, GroupWord, HnnGroupData};
use hnn_core::builtins::{builtin, builtin_group_data, group_algebra_family};
use hnn_core::fock::{build_truncated_fock, sign_words, DEFAULT_DIM_CAP};
use hnn_core::group::{FiniteGroup, SubgroupData};
use hnn_core::qgroup::{HnnInput, Sign};
use hnn_core::wordalg::{context, SymbolicElement, WordLiteral};
use hnn_core::{AlgElement, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[test]
fn s3_expectation_is_averaging_over_a3_cosets() {
    let input = builtin("s3-quotient").unwrap();
    let g = FiniteGroup::symmetric3();
    let a3: Vec<usize> = (0..6).filter(|&x| x == g.identity() || g.mul(x, x) != g.identity()).collect();
    assert_eq!(a3.len(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let f: Vec<C64> = (0..6).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let averaged: Vec<C64> = (0..6)
            .map(|x| a3.iter().map(|&n| f[g.mul(x, n)]).sum::<C64>() / c(3.0))
            .collect();
        let x = input.a().from_basis_coords(&f);
        for s in Sign::both() {
            let e = input.a().basis_coords(&input.expect(s, &x));
            for (p, q) in e.iter().zip(&averaged) {
                assert!((p - q).norm() < 1e-12);
            }
        }
    }
}

fn sigma_projection_oracle(input: &HnnInput, data: &HnnGroupData, s: Sign) {
    let members: HashSet<usize> = match s {
        Sign::Plus => data.subgroup_data().sigma.iter().copied().collect(),
        Sign::Minus => data.subgroup_data().image().into_iter().collect(),
    };
    for h in 0..data.group().order() {
        let e = input.expect(s, input.a().basis_element(h));
        let expected = if members.contains(&h) {
            input.a().basis_element(h).clone()
        } else {
            AlgElement::zero(input.a().algebra())
        };
        assert!(e.distance(&expected) < 1e-12, "h = {h}");
    }
}

#[test]
fn group_algebra_expectation_keeps_the_subgroup() {
    for name in ["z2-free", "z4-sigma2"] {
        let input = builtin(name).unwrap();
        let data = builtin_group_data(name).unwrap().unwrap();
        for s in Sign::both() {
            sigma_projection_oracle(&input, &data, s);
        }
    }
}

fn twisted_c6() -> (HnnInput, HnnGroupData) {
    let h = FiniteGroup::cyclic(6);
    let data = SubgroupData::new(&h, &[0, 2, 4], &[0, 4, 2]).unwrap();
    let input = group_algebra_family("c6-twisted", &h, &data).unwrap();
    (input, HnnGroupData::new(h, data).unwrap())
}

/// Number of distinct normal forms of each sign pattern, by enumerating every word.
fn normal_form_counts(data: &HnnGroupData, n: usize) -> HashMap<Vec<Sign>, usize> {
    let order = data.group().order();
    let mut seen: HashSet<GroupWord> = HashSet::new();
    for signs in sign_words(n) {
        let total = order.pow(n as u32 + 1);
        for mut code in 0..total {
            let h0 = code % order;
            code /= order;
            let tail = signs
                .iter()
                .map(|&s| {
                    let l = code % order;
                    code /= order;
                    (s, l)
                })
                .collect();
            let nf = normal_form(&GroupWord { h0, tail, normal: false }, data);
            if nf.len() == n {
                seen.insert(nf);
            }
        }
    }
    let mut counts = HashMap::new();
    for w in seen {
        *counts.entry(w.tail.iter().map(|p| p.0).collect()).or_insert(0) += 1;
    }
    counts
}

#[test]
fn fock_summands_count_reduced_group_elements() {
    let mut cases: Vec<(HnnInput, HnnGroupData)> = ["z2-free", "z4-sigma2"]
        .iter()
        .map(|n| (builtin(n).unwrap(), builtin_group_data(n).unwrap().unwrap()))
        .collect();
    cases.push(twisted_c6());
    for (input, data) in &cases {
        let fock = build_truncated_fock(input, 2, DEFAULT_DIM_CAP).unwrap();
        assert_eq!(fock.summand(&[]).unwrap().dim(), data.group().order());
        for n in 1..=2 {
            for (signs, count) in normal_form_counts(data, n) {
                assert_eq!(fock.summand(&signs).unwrap().dim(), count, "{} {signs:?}", input.name());
            }
        }
    }
}

/// `φ_m(x*x) = Σ |Σ_{nf(wᵢ) = γ} cᵢ|²` for `x = Σ cᵢ λ_{wᵢ}`.
#[test]
fn haar_norm_matches_the_regular_representation() {
    let (input, data) = twisted_c6();
    let ctx = context(input);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let mut x = SymbolicElement::zero(&ctx);
        let mut by_element: HashMap<GroupWord, C64> = HashMap::new();
        for _ in 0..4 {
            let len = rng.gen_range(0..4);
            let lit = WordLiteral::random(&mut rng, 6, len);
            let coef = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            x = &x + &lit.evaluate(&ctx).unwrap().scale(coef);
            *by_element.entry(normal_form(&GroupWord::from_literal(&lit, &data), &data)).or_default() += coef;
        }
        let expected: f64 = by_element.values().map(|v| v.norm_sqr()).sum();
        let got = (&x.star() * &x).phi_m();
        assert!((got - c(expected)).norm() < 1e-9, "{got} vs {expected}");
    }
}

#[test]
fn twisted_theta_satisfies_the_relation_symbolically() {
    let (input, _) = twisted_c6();
    let ctx = context(input);
    let u = SymbolicElement::generator(&ctx, Sign::Plus);
    let lam = |g: usize| SymbolicElement::from_a(&ctx, ctx.input().a().basis_element(g));
    let lhs = &(&u * &lam(2)) * &u.star();
    assert!(lhs.distance(&lam(4)).unwrap() < 1e-12);
    let w = &(&u.star() * &lam(1)) * &u;
    assert_eq!(w.length(), 2);
    assert!(w.phi_m().norm() < 1e-12);
}
