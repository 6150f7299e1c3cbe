use hnn_core::britton::{multiply, normal_form, oracle_values, GroupWord, HnnGroupData};
use hnn_core::builtins::{builtin, builtin_group_data};
use hnn_core::group::{FiniteGroup, SubgroupData};
use hnn_core::qgroup::Sign;
use hnn_core::wordalg::{context, random_element, Context, Token, WordLiteral};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c6() -> HnnGroupData {
    let h = FiniteGroup::cyclic(6);
    let d = SubgroupData::new(&h, &[0, 2, 4], &[0, 4, 2]).unwrap();
    HnnGroupData::new(h, d).unwrap()
}

fn word(order: usize, max_len: usize) -> impl Strategy<Value = GroupWord> {
    (0..order, prop::collection::vec((any::<bool>(), 0..order), 0..=max_len)).prop_map(|(h0, tail)| GroupWord {
        h0,
        tail: tail.into_iter().map(|(p, l)| (if p { Sign::Plus } else { Sign::Minus }, l)).collect(),
        normal: false,
    })
}

fn literal(dim: usize, max_len: usize) -> impl Strategy<Value = WordLiteral> {
    prop::collection::vec((any::<bool>(), 0..dim), 0..=max_len).prop_flat_map(move |gens| {
        (0..dim).prop_map(move |first| {
            let mut t = vec![Token::Letter(first)];
            for (p, l) in &gens {
                t.push(Token::Gen(if *p { Sign::Plus } else { Sign::Minus }));
                t.push(Token::Letter(*l));
            }
            WordLiteral(t)
        })
    })
}

fn z4() -> (Context, HnnGroupData) {
    (context(builtin("z4-sigma2").unwrap()), builtin_group_data("z4-sigma2").unwrap().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn britton_group_laws(a in word(6, 4), b in word(6, 3), c in word(6, 3)) {
        let d = c6();
        let nf = normal_form(&a, &d);
        prop_assert_eq!(normal_form(&nf, &d), nf.clone());
        prop_assert_eq!(multiply(&a, &a.inverse(&d), &d), GroupWord::identity(&d));
        let l = multiply(&multiply(&a, &b, &d), &c, &d);
        let r = multiply(&a, &multiply(&b, &c, &d), &d);
        prop_assert_eq!(l, r);
    }

    #[test]
    fn phi_m_is_the_identity_indicator(lit in literal(4, 5)) {
        let (ctx, data) = z4();
        let phi = lit.evaluate(&ctx).unwrap().phi_m();
        let expected = if oracle_values(&GroupWord::from_literal(&lit, &data), &data).is_identity { 1.0 } else { 0.0 };
        prop_assert!((phi.re - expected).abs() < 1e-9 && phi.im.abs() < 1e-9);
    }

    #[test]
    fn star_algebra_laws(seed in any::<u64>()) {
        let (ctx, _) = z4();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_element(&ctx, &mut rng, 2, 3);
        let y = random_element(&ctx, &mut rng, 2, 3);
        let z = random_element(&ctx, &mut rng, 1, 2);
        prop_assert!((&(&x * &y) * &z).distance(&(&x * &(&y * &z))).unwrap() < 1e-9);
        prop_assert!((&x * &y).star().distance(&(&y.star() * &x.star())).unwrap() < 1e-9);
        let n = (&x.star() * &x).phi_m();
        prop_assert!(n.re >= -1e-12 && n.im.abs() < 1e-9);
        prop_assert!((x.star().phi_m() - x.phi_m().conj()).norm() < 1e-12);
    }
}
