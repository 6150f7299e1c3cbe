//! Classical oracle: Britton normal forms in `Γ = ⟨H, t : θ(σ) = tσt⁻¹⟩`.
//!
//! Used to validate the symbolic engine on group-algebra inputs, where the
//! HNN quantum group is the dual of `Γ` and `φ_m(λ_γ) = δ_{γ,e}`.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::group::{FiniteGroup, SubgroupData};
use crate::qgroup::Sign;
use crate::wordalg::{Token, WordLiteral};

#[derive(Debug, Clone)]
pub struct HnnGroupData {
    h: FiniteGroup,
    data: SubgroupData,
    in_sigma: Vec<bool>,
    in_image: Vec<bool>,
    /// Transversal of `H/Σ`, identity first.
    reps_plus: Vec<usize>,
    /// Transversal of `H/θ(Σ)`, identity first.
    reps_minus: Vec<usize>,
    /// Representative index of `hΣ` and of `hθ(Σ)` for each `h`.
    rep_of_plus: Vec<usize>,
    rep_of_minus: Vec<usize>,
}

fn transversal(h: &FiniteGroup, sub: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut reps = Vec::new();
    let mut rep_of = vec![usize::MAX; h.order()];
    let order = std::iter::once(h.identity()).chain((0..h.order()).filter(|&x| x != h.identity()));
    for x in order {
        if rep_of[x] != usize::MAX {
            continue;
        }
        for &s in sub {
            rep_of[h.mul(x, s)] = x;
        }
        reps.push(x);
    }
    (reps, rep_of)
}

impl HnnGroupData {
    pub fn new(h: FiniteGroup, data: SubgroupData) -> Result<Self> {
        h.check_injective_hom(&data.sigma, &data.theta)?;
        let n = h.order();
        let image = data.image();
        let mut in_sigma = vec![false; n];
        for &s in &data.sigma {
            in_sigma[s] = true;
        }
        let mut in_image = vec![false; n];
        for &s in &image {
            in_image[s] = true;
        }
        let (reps_plus, rep_of_plus) = transversal(&h, &data.sigma);
        let (reps_minus, rep_of_minus) = transversal(&h, &image);
        Ok(HnnGroupData { h, data, in_sigma, in_image, reps_plus, reps_minus, rep_of_plus, rep_of_minus })
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.h
    }

    pub fn subgroup_data(&self) -> &SubgroupData {
        &self.data
    }

    pub fn reps_plus(&self) -> &[usize] {
        &self.reps_plus
    }

    pub fn reps_minus(&self) -> &[usize] {
        &self.reps_minus
    }

    /// Pinch set before `t^{−s}` closing `t^s · l`: `Σ` for `s = +1`, `θ(Σ)` for `s = −1`.
    fn pinches(&self, s: Sign, l: usize) -> bool {
        match s {
            Sign::Plus => self.in_sigma[l],
            Sign::Minus => self.in_image[l],
        }
    }

    /// `t^s l t^{−s}` for `l` in the pinch set.
    fn collapse(&self, s: Sign, l: usize) -> usize {
        match s {
            Sign::Plus => self.data.theta_of(l).expect("pinch letter in Σ"),
            Sign::Minus => self.data.theta_inv_of(l).expect("pinch letter in θ(Σ)"),
        }
    }
}

/// `h₀ t^{ε₁} h₁ … t^{εₙ} hₙ`, letters as element indices of `H`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GroupWord {
    pub h0: usize,
    pub tail: Vec<(Sign, usize)>,
    pub normal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleValues {
    pub in_base: bool,
    pub is_identity: bool,
}

impl GroupWord {
    pub fn base(h: usize) -> Self {
        GroupWord { h0: h, tail: Vec::new(), normal: false }
    }

    pub fn t(data: &HnnGroupData, s: Sign) -> Self {
        let e = data.h.identity();
        GroupWord { h0: e, tail: vec![(s, e)], normal: false }
    }

    pub fn identity(data: &HnnGroupData) -> Self {
        GroupWord { h0: data.h.identity(), tail: Vec::new(), normal: true }
    }

    pub fn len(&self) -> usize {
        self.tail.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tail.is_empty()
    }

    pub fn inverse(&self, data: &HnnGroupData) -> GroupWord {
        let h = &data.h;
        let mut letters: Vec<usize> = std::iter::once(self.h0).chain(self.tail.iter().map(|p| p.1)).collect();
        letters.reverse();
        let signs: Vec<Sign> = self.tail.iter().rev().map(|p| p.0.flip()).collect();
        GroupWord {
            h0: h.inv(letters[0]),
            tail: signs.into_iter().zip(letters[1..].iter().map(|&l| h.inv(l))).collect(),
            normal: false,
        }
    }

    /// Text form such as `g·t·e·t⁻¹·g2`.
    pub fn display(&self, data: &HnnGroupData) -> String {
        let mut s = data.h.label(self.h0).to_string();
        for (e, l) in &self.tail {
            s.push_str(if *e == Sign::Plus { "·t·" } else { "·t⁻¹·" });
            s.push_str(data.h.label(*l));
        }
        s
    }

    /// `λ`-word literal over the basis `a[i] = λ_{hᵢ}`.
    pub fn to_literal(&self) -> WordLiteral {
        let mut tokens = vec![Token::Letter(self.h0)];
        for (e, l) in &self.tail {
            tokens.push(Token::Gen(*e));
            tokens.push(Token::Letter(*l));
        }
        WordLiteral(tokens)
    }

    pub fn from_literal(lit: &WordLiteral, data: &HnnGroupData) -> GroupWord {
        let h = &data.h;
        let mut w = GroupWord::base(h.identity());
        for t in &lit.0 {
            match *t {
                Token::Letter(i) => match w.tail.last_mut() {
                    Some(last) => last.1 = h.mul(last.1, i),
                    None => w.h0 = h.mul(w.h0, i),
                },
                Token::Gen(s) => w.tail.push((s, h.identity())),
            }
        }
        w
    }

    pub fn random<R: Rng>(rng: &mut R, data: &HnnGroupData, len: usize) -> GroupWord {
        let n = data.h.order();
        GroupWord {
            h0: rng.gen_range(0..n),
            tail: (0..len)
                .map(|_| (if rng.gen_bool(0.5) { Sign::Plus } else { Sign::Minus }, rng.gen_range(0..n)))
                .collect(),
            normal: false,
        }
    }
}

/// Britton reduction followed by transversal normalization.
pub fn normal_form(w: &GroupWord, data: &HnnGroupData) -> GroupWord {
    let h = &data.h;
    // Stack reduction: letters[i] sits after signs[i-1].
    let mut signs: Vec<Sign> = Vec::with_capacity(w.tail.len());
    let mut letters: Vec<usize> = vec![w.h0];
    for &(e, l) in &w.tail {
        let n = signs.len();
        if n > 0 && signs[n - 1] == e.flip() && data.pinches(signs[n - 1], letters[n]) {
            let c = data.collapse(signs[n - 1], letters[n]);
            signs.pop();
            letters.pop();
            let prev = letters.pop().expect("letter before a generator");
            letters.push(h.mul(h.mul(prev, c), l));
        } else {
            signs.push(e);
            letters.push(l);
        }
    }
    // Normalize: hᵢ = r·c with c in the subgroup that passes through t^{εᵢ₊₁}.
    for i in 0..signs.len() {
        let x = letters[i];
        let (r, moved) = match signs[i] {
            // θ(σ)·t = t·σ
            Sign::Plus => {
                let r = data.rep_of_minus[x];
                let c = h.mul(h.inv(r), x);
                (r, data.data.theta_inv_of(c).expect("coset element in θ(Σ)"))
            }
            // σ·t⁻¹ = t⁻¹·θ(σ)
            Sign::Minus => {
                let r = data.rep_of_plus[x];
                let c = h.mul(h.inv(r), x);
                (r, data.data.theta_of(c).expect("coset element in Σ"))
            }
        };
        letters[i] = r;
        letters[i + 1] = h.mul(moved, letters[i + 1]);
    }
    GroupWord { h0: letters[0], tail: signs.into_iter().zip(letters[1..].iter().copied()).collect(), normal: true }
}

pub fn multiply(w1: &GroupWord, w2: &GroupWord, data: &HnnGroupData) -> GroupWord {
    let h = &data.h;
    let mut w = w1.clone();
    match w.tail.last_mut() {
        Some(last) => last.1 = h.mul(last.1, w2.h0),
        None => w.h0 = h.mul(w.h0, w2.h0),
    }
    w.tail.extend_from_slice(&w2.tail);
    normal_form(&w, data)
}

pub fn oracle_values(w: &GroupWord, data: &HnnGroupData) -> OracleValues {
    let nf = normal_form(w, data);
    let in_base = nf.tail.is_empty();
    OracleValues { in_base, is_identity: in_base && nf.h0 == data.h.identity() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z4() -> HnnGroupData {
        let h = FiniteGroup::cyclic(4);
        let d = SubgroupData::new(&h, &[0, 2], &[0, 2]).unwrap();
        HnnGroupData::new(h, d).unwrap()
    }

    fn twisted() -> HnnGroupData {
        let h = FiniteGroup::cyclic(6);
        let d = SubgroupData::new(&h, &[0, 3], &[0, 3]).unwrap();
        HnnGroupData::new(h, d).unwrap()
    }

    #[test]
    fn defining_relation_collapses() {
        let d = z4();
        let w = GroupWord { h0: 0, tail: vec![(Sign::Plus, 2), (Sign::Minus, 0)], normal: false };
        assert_eq!(normal_form(&w, &d), GroupWord { h0: 2, tail: vec![], normal: true });
        let w = GroupWord { h0: 0, tail: vec![(Sign::Plus, 0), (Sign::Minus, 0)], normal: false };
        assert_eq!(normal_form(&w, &d), GroupWord::identity(&d));
    }

    #[test]
    fn conjugating_a_generator_is_already_reduced() {
        let d = z4();
        let w = GroupWord { h0: 0, tail: vec![(Sign::Minus, 1), (Sign::Plus, 0)], normal: false };
        let nf = normal_form(&w, &d);
        assert_eq!(nf.len(), 2);
        assert!(!oracle_values(&w, &d).in_base);
    }

    #[test]
    fn transversals_start_with_identity() {
        let d = z4();
        assert_eq!(d.reps_plus()[0], 0);
        assert_eq!(d.reps_minus().len(), 2);
    }

    #[test]
    fn group_axioms_hold_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [z4(), twisted()] {
            for _ in 0..200 {
                let len = rng.gen_range(0..5);
                let w = GroupWord::random(&mut rng, &d, len);
                let e = multiply(&w, &w.inverse(&d), &d);
                assert_eq!(e, GroupWord::identity(&d));
                let (a, b) = (GroupWord::random(&mut rng, &d, 2), GroupWord::random(&mut rng, &d, 3));
                let l = multiply(&multiply(&w, &a, &d), &b, &d);
                let r = multiply(&w, &multiply(&a, &b, &d), &d);
                assert_eq!(l, r);
                let nf = normal_form(&w, &d);
                assert_eq!(normal_form(&nf, &d), nf);
                assert!(nf.len() <= w.len());
            }
        }
    }

    #[test]
    fn literal_round_trip() {
        let d = z4();
        let w = GroupWord { h0: 1, tail: vec![(Sign::Plus, 3), (Sign::Minus, 2)], normal: false };
        assert_eq!(GroupWord::from_literal(&w.to_literal(), &d), w);
    }
}
