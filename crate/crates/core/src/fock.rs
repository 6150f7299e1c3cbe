//! Fock space of the reduced HNN extension, truncated at word length `L`.
//!
//! Every leg is scalarified by pairing its `B`-valued form with `φ_B`; since
//! `φ_A∘E_ε = φ_A` and `φ_A∘θ = φ_B`, each leg is `L²(A, φ_A)` (or its subspace
//! `ker E_ε`), and `ℋ_{ε₁…εₙ} = H_{−ε₁} ⊗ T` with `T` the tensor product of the
//! remaining legs. Splitting `H_{−ε₁} = η B ⊕ H°_{−ε₁}` gives
//!
//! * the `B`-part `1̂ ⊗ T ≅ T`, with the basis of `T`;
//! * the reduced part `H°_{−ε₁} ⊗ T`, whose Gram matrix is
//!   `⟨â°_k⊗ζ_t, â°_l⊗ζ_s⟩ = ⟨ζ_t, ρ(θ^{ε₁}… E(a°_k* a°_l)) ζ_s⟩`.
//!
//! `T` is `H₁` for `n = 1`, `ℋ_{ε₂…εₙ}` when `ε₁ = ε₂`, and the reduced part of
//! `ℋ_{ε₂…εₙ}` when `ε₁ ≠ ε₂`. In these bases `u^ε` is a partial permutation.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::qgroup::{HnnInput, Sign};
use crate::starcore::{gram_quotient, AlgElement, ComplexMatrix, ComplexVector, C64, ONE, TAU_GRAM};

/// Default cap on the estimated total dimension.
pub const DEFAULT_DIM_CAP: usize = 20000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tail {
    Vacuum,
    Full(usize),
    Reduced(usize),
}

/// One orthogonal summand: the vacuum sector `H₁` or some `ℋ_{ε₁…εₙ}`.
#[derive(Debug, Clone)]
pub struct Summand {
    signs: Vec<Sign>,
    offset: usize,
    dim: usize,
    bpart_dim: usize,
    tail: Option<Tail>,
    /// Columns: orthonormal basis of the reduced part over the `(k, t)` index set.
    red_onb: ComplexMatrix,
    /// `red_onbᴴ · Gram`: simple-tensor coefficients → reduced-part coordinates.
    red_coords: ComplexMatrix,
    /// `π(e_i)` on this summand, one matrix per matrix unit of `A`.
    pi_units: Vec<ComplexMatrix>,
}

impl Summand {
    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bpart_dim(&self) -> usize {
        self.bpart_dim
    }

    pub fn reduced_dim(&self) -> usize {
        self.dim - self.bpart_dim
    }

    /// Columns: orthonormal basis of the reduced part over the `(k, t)` index set.
    pub fn reduced_onb(&self) -> &ComplexMatrix {
        &self.red_onb
    }

    fn pi(&self, a: &AlgElement) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        for (i, c) in a.coords().iter().enumerate() {
            if c.norm() > 0.0 {
                out += &self.pi_units[i] * *c;
            }
        }
        out
    }
}

/// Operator on the truncated Fock space, with the basis vectors on which it
/// agrees with the untruncated operator.
#[derive(Debug, Clone)]
pub struct FockOperator {
    pub matrix: ComplexMatrix,
    pub domain_mask: Vec<bool>,
}

impl FockOperator {
    pub fn mask_size(&self) -> usize {
        self.domain_mask.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SummandInfo {
    pub signs: String,
    pub dim: usize,
    pub bpart_dim: usize,
    pub reduced_dim: usize,
}

#[derive(Debug, Clone)]
pub struct TruncatedFock {
    l: usize,
    summands: Vec<Summand>,
    index: HashMap<Vec<Sign>, usize>,
    total_dim: usize,
    dim_a: usize,
}

pub fn sign_string(signs: &[Sign]) -> String {
    if signs.is_empty() {
        return "()".into();
    }
    let parts: Vec<&str> = signs.iter().map(|s| if *s == Sign::Plus { "+" } else { "-" }).collect();
    format!("({})", parts.join(","))
}

/// All sign words of length `n` in lexicographic order with `+` first.
pub fn sign_words(n: usize) -> Vec<Vec<Sign>> {
    (0..1usize << n)
        .map(|mask| {
            (0..n).map(|i| if mask >> (n - 1 - i) & 1 == 0 { Sign::Plus } else { Sign::Minus }).collect()
        })
        .collect()
}

/// Free-module estimate `dim A · Π dim K_i / dim Bⁿ` summed over all sign words.
pub fn estimate_dim(dim_a: usize, dim_b: usize, l: usize) -> usize {
    let full = dim_a as f64;
    let red = (dim_a - dim_b) as f64;
    let b = dim_b as f64;
    let mut total = full;
    for n in 1..=l {
        for w in sign_words(n) {
            let mut d = full * full;
            for i in 1..n {
                d *= if w[i - 1] == w[i] { full } else { red };
            }
            total += d / b.powi(n as i32);
        }
    }
    total.round() as usize
}

/// Builds all summands of length ≤ `l`, refusing when the estimate exceeds `cap`.
pub fn build_truncated_fock(input: &HnnInput, l: usize, cap: usize) -> Result<TruncatedFock> {
    if l == 0 {
        return Err(Error::InvalidInput("truncation length must be at least 1".into()));
    }
    let estimate = estimate_dim(input.a().dim(), input.b().dim(), l);
    if estimate > cap {
        return Err(Error::SizeLimit { estimate, cap });
    }
    let alg = input.a().algebra();
    let units: Vec<AlgElement> = (0..alg.linear_dim()).map(|i| AlgElement::matrix_unit(alg, i)).collect();
    let full = input.adapted_onb(Sign::Plus);
    let dim_a = full.len();
    let vac_pi: Vec<ComplexMatrix> = units
        .iter()
        .map(|e| {
            ComplexMatrix::from_fn(dim_a, dim_a, |k, l| input.phi_a(&(&(&full[k].star() * e) * &full[l])))
        })
        .collect();
    let mut summands = vec![Summand {
        signs: Vec::new(),
        offset: 0,
        dim: dim_a,
        bpart_dim: dim_a,
        tail: None,
        red_onb: ComplexMatrix::zeros(0, 0),
        red_coords: ComplexMatrix::zeros(0, 0),
        pi_units: vac_pi,
    }];
    let mut index = HashMap::new();
    index.insert(Vec::new(), 0);
    let mut offset = dim_a;
    for n in 1..=l {
        for signs in sign_words(n) {
            let s = build_summand(input, &summands, &index, &units, signs.clone(), offset)?;
            offset += s.dim;
            index.insert(signs, summands.len());
            summands.push(s);
        }
    }
    Ok(TruncatedFock { l, summands, index, total_dim: offset, dim_a })
}

/// `π_T(x)` on the tail space of a summand.
fn tail_rep(summands: &[Summand], tail: Tail, x: &AlgElement) -> ComplexMatrix {
    match tail {
        Tail::Vacuum => summands[0].pi(x),
        Tail::Full(i) => summands[i].pi(x),
        Tail::Reduced(i) => {
            let s = &summands[i];
            let p = s.pi(x);
            p.view((s.bpart_dim, s.bpart_dim), (s.reduced_dim(), s.reduced_dim())).into_owned()
        }
    }
}

fn tail_dim(summands: &[Summand], tail: Tail) -> usize {
    match tail {
        Tail::Vacuum => summands[0].dim,
        Tail::Full(i) => summands[i].dim,
        Tail::Reduced(i) => summands[i].reduced_dim(),
    }
}

fn build_summand(
    input: &HnnInput,
    summands: &[Summand],
    index: &HashMap<Vec<Sign>, usize>,
    units: &[AlgElement],
    signs: Vec<Sign>,
    offset: usize,
) -> Result<Summand> {
    let e1 = signs[0];
    let tail = if signs.len() == 1 {
        Tail::Vacuum
    } else {
        let rest = index[&signs[1..].to_vec()];
        if signs[1] == e1 {
            Tail::Full(rest)
        } else {
            Tail::Reduced(rest)
        }
    };
    let dt = tail_dim(summands, tail);
    let kernel = input.kernel_onb(-e1);
    let dk = kernel.len();
    // τ(x) = θ^{−ε₁}(E_{−ε₁}(x)) ∈ B_{ε₁} contracts the first leg.
    let tau = |x: &AlgElement| input.contract(e1, x);
    let mut gram = ComplexMatrix::zeros(dk * dt, dk * dt);
    for k in 0..dk {
        let ks = kernel[k].star();
        for l in 0..dk {
            let block = tail_rep(summands, tail, &tau(&(&ks * &kernel[l])));
            gram.view_mut((k * dt, l * dt), (dt, dt)).copy_from(&block);
        }
    }
    let red = gram_quotient(&gram, TAU_GRAM)
        .map_err(|e| Error::NumericalDegeneracy(format!("summand {}: {e}", sign_string(&signs))))?;
    let red_onb = red.onb().clone();
    let red_coords = red.coord_map().clone();
    let dr = red.dim();
    let dim = dt + dr;
    let alpha = |x: &AlgElement| -> Vec<C64> { kernel.iter().map(|a| input.phi_a(&(&a.star() * x))).collect() };
    // (α ⊗ I) as a (dk·dt × dt) matrix.
    let alpha_tensor = |al: &[C64]| -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dk * dt, dt);
        for (k, c) in al.iter().enumerate() {
            for t in 0..dt {
                m[(k * dt + t, t)] = *c;
            }
        }
        m
    };
    let c_slices: Vec<ComplexMatrix> =
        (0..dk).map(|k| red_onb.view((k * dt, 0), (dt, dr)).into_owned()).collect();
    let mut pi_units = Vec::with_capacity(units.len());
    for e in units {
        let mut p = ComplexMatrix::zeros(dim, dim);
        p.view_mut((0, 0), (dt, dt)).copy_from(&tail_rep(summands, tail, &tau(e)));
        if dr > 0 {
            let rb = &red_coords * alpha_tensor(&alpha(e));
            p.view_mut((dt, 0), (dr, dt)).copy_from(&rb);
            let mut br = ComplexMatrix::zeros(dt, dr);
            let mut rr_pre = ComplexMatrix::zeros(dk * dt, dr);
            for k in 0..dk {
                let ea = e * &kernel[k];
                br += tail_rep(summands, tail, &tau(&ea)) * &c_slices[k];
                rr_pre += alpha_tensor(&alpha(&ea)) * &c_slices[k];
            }
            p.view_mut((0, dt), (dt, dr)).copy_from(&br);
            p.view_mut((dt, dt), (dr, dr)).copy_from(&(&red_coords * rr_pre));
        }
        pi_units.push(p);
    }
    Ok(Summand { signs, offset, dim, bpart_dim: dt, tail: Some(tail), red_onb, red_coords, pi_units })
}

impl TruncatedFock {
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn summands(&self) -> &[Summand] {
        &self.summands
    }

    pub fn summand(&self, signs: &[Sign]) -> Option<&Summand> {
        self.index.get(signs).map(|&i| &self.summands[i])
    }

    pub fn summand_info(&self) -> Vec<SummandInfo> {
        self.summands
            .iter()
            .map(|s| SummandInfo {
                signs: sign_string(&s.signs),
                dim: s.dim,
                bpart_dim: s.bpart_dim,
                reduced_dim: s.reduced_dim(),
            })
            .collect()
    }

    /// The vacuum `Ω = η₁`: the class of `1` in `H₁`, the first basis vector.
    pub fn vacuum(&self) -> ComplexVector {
        let mut v = ComplexVector::zeros(self.total_dim);
        v[0] = ONE;
        v
    }

    /// Basis vectors in summands of length at most `max_len`.
    pub fn length_mask(&self, max_len: usize) -> Vec<bool> {
        let mut mask = vec![false; self.total_dim];
        for s in &self.summands {
            if s.len() <= max_len {
                for m in &mut mask[s.offset..s.offset + s.dim] {
                    *m = true;
                }
            }
        }
        mask
    }

    /// Interior: summands of length ≤ `L − 1`, where `u^{±1}` is exact.
    pub fn interior_mask(&self) -> Vec<bool> {
        self.length_mask(self.l - 1)
    }

    /// `π(a)`, block diagonal; exact on every summand.
    pub fn pi_action(&self, a: &AlgElement) -> FockOperator {
        let mut m = ComplexMatrix::zeros(self.total_dim, self.total_dim);
        for s in &self.summands {
            m.view_mut((s.offset, s.offset), (s.dim, s.dim)).copy_from(&s.pi(a));
        }
        FockOperator { matrix: m, domain_mask: vec![true; self.total_dim] }
    }

    /// `u^ε`; vectors whose image would leave the truncation are sent to 0.
    pub fn u_epsilon(&self, eps: Sign) -> FockOperator {
        let mut m = ComplexMatrix::zeros(self.total_dim, self.total_dim);
        for s in &self.summands {
            if s.is_empty() {
                let target = self.summand(&[eps]).expect("length-one summand");
                for t in 0..s.dim {
                    m[(target.offset + t, t)] = ONE;
                }
                continue;
            }
            if s.signs[0] == eps {
                let mut longer = vec![eps];
                longer.extend_from_slice(&s.signs);
                if let Some(target) = self.summand(&longer) {
                    for t in 0..s.dim {
                        m[(target.offset + t, s.offset + t)] = ONE;
                    }
                }
                continue;
            }
            // First leg is H_ε: the B-part collapses, the reduced part grows.
            let rest_offset = match s.tail.expect("non-vacuum summand") {
                Tail::Vacuum => 0,
                Tail::Full(i) => self.summands[i].offset,
                Tail::Reduced(i) => self.summands[i].offset + self.summands[i].bpart_dim,
            };
            for t in 0..s.bpart_dim {
                m[(rest_offset + t, s.offset + t)] = ONE;
            }
            let mut longer = vec![eps];
            longer.extend_from_slice(&s.signs);
            if let Some(target) = self.summand(&longer) {
                for r in 0..s.reduced_dim() {
                    m[(target.offset + r, s.offset + s.bpart_dim + r)] = ONE;
                }
            }
        }
        FockOperator { matrix: m, domain_mask: self.interior_mask() }
    }

    /// Projection onto the vacuum sector `H₁`.
    pub fn q_projection(&self) -> FockOperator {
        let mut m = ComplexMatrix::zeros(self.total_dim, self.total_dim);
        for i in 0..self.dim_a {
            m[(i, i)] = ONE;
        }
        FockOperator { matrix: m, domain_mask: vec![true; self.total_dim] }
    }

    /// Coordinates of `x̂` in `H₁`.
    pub fn vacuum_vector(&self, input: &HnnInput, x: &AlgElement) -> ComplexVector {
        let full = input.adapted_onb(Sign::Plus);
        ComplexVector::from_iterator(full.len(), full.iter().map(|e| input.phi_a(&(&e.star() * x))))
    }

    /// `x̂₀ ⊗ … ⊗ x̂ₙ` in summand coordinates (`letters.len() = signs.len() + 1`).
    fn simple_local(&self, input: &HnnInput, signs: &[Sign], letters: &[AlgElement]) -> Result<ComplexVector> {
        if signs.is_empty() {
            return Ok(self.vacuum_vector(input, &letters[0]));
        }
        let idx = *self.index.get(signs).ok_or(Error::Truncation { length: signs.len(), max: self.l })?;
        let s = &self.summands[idx];
        let inner = self.simple_local(input, &signs[1..], &letters[1..])?;
        let zeta = match s.tail.expect("non-vacuum summand") {
            Tail::Vacuum | Tail::Full(_) => inner,
            Tail::Reduced(i) => {
                let rest = &self.summands[i];
                inner.rows(rest.bpart_dim, rest.reduced_dim()).into_owned()
            }
        };
        Ok(self.embed(input, idx, &letters[0], &zeta))
    }

    /// `â ⊗ ζ` in summand `idx`, for `ζ` in the tail space.
    fn embed(&self, input: &HnnInput, idx: usize, a: &AlgElement, zeta: &ComplexVector) -> ComplexVector {
        let s = &self.summands[idx];
        let tail = s.tail.expect("non-vacuum summand");
        let e1 = s.signs[0];
        let dt = s.bpart_dim;
        let mut out = ComplexVector::zeros(s.dim);
        let b = tail_rep(&self.summands, tail, &input.contract(e1, a)) * zeta;
        out.rows_mut(0, dt).copy_from(&b);
        if s.reduced_dim() > 0 {
            let kernel = input.kernel_onb(-e1);
            let mut t = ComplexVector::zeros(kernel.len() * dt);
            for (k, ak) in kernel.iter().enumerate() {
                let c = input.phi_a(&(&ak.star() * a));
                for j in 0..dt {
                    t[k * dt + j] = c * zeta[j];
                }
            }
            out.rows_mut(dt, s.reduced_dim()).copy_from(&(&s.red_coords * t));
        }
        out
    }

    /// `x̂₀ ⊗ … ⊗ x̂ₙ ∈ ℋ_{ε₁…εₙ}` as a vector of the whole truncated space.
    pub fn simple_tensor(&self, input: &HnnInput, signs: &[Sign], letters: &[AlgElement]) -> Result<ComplexVector> {
        if letters.len() != signs.len() + 1 {
            return Err(Error::InvalidInput("a simple tensor needs one more letter than signs".into()));
        }
        let local = self.simple_local(input, signs, letters)?;
        let offset = self.summand(signs).map(|s| s.offset).unwrap_or(0);
        let mut v = ComplexVector::zeros(self.total_dim);
        v.rows_mut(offset, local.len()).copy_from(&local);
        Ok(v)
    }
}

/// Largest entry of `|P (X − Y) P|` restricted to the masked basis vectors.
pub fn masked_residual(x: &ComplexMatrix, y: &ComplexMatrix, mask: &[bool]) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..x.ncols() {
        if !mask[j] {
            continue;
        }
        for i in 0..x.nrows() {
            worst = worst.max((x[(i, j)] - y[(i, j)]).norm());
        }
    }
    worst
}

/// Operator norm of `(X − Y)` restricted to the masked columns.
pub fn masked_norm(x: &ComplexMatrix, y: &ComplexMatrix, mask: &[bool]) -> f64 {
    let cols: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
    if cols.is_empty() {
        return 0.0;
    }
    let mut d = ComplexMatrix::zeros(x.nrows(), cols.len());
    for (c, &j) in cols.iter().enumerate() {
        d.set_column(c, &(x.column(j) - y.column(j)));
    }
    crate::starcore::spectral_norm(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::starcore::MaxAbs;

    fn fock_for(name: &str, l: usize) -> (HnnInput, TruncatedFock) {
        let input = builtin(name).unwrap();
        let fock = build_truncated_fock(&input, l, DEFAULT_DIM_CAP).unwrap();
        (input, fock)
    }

    #[test]
    fn dimensions_match_the_free_module_count() {
        for (name, l, dim) in [("z2-free", 2, 34), ("z4-sigma2", 2, 68), ("s3-quotient", 1, 42), ("trivial", 2, 5)] {
            let (input, fock) = fock_for(name, l);
            assert_eq!(fock.total_dim(), dim, "{name}");
            assert_eq!(estimate_dim(input.a().dim(), input.b().dim(), l), dim, "{name}");
        }
    }

    #[test]
    fn size_cap_is_enforced() {
        let input = builtin("z4-sigma2").unwrap();
        match build_truncated_fock(&input, 3, 10) {
            Err(Error::SizeLimit { cap, .. }) => assert_eq!(cap, 10),
            other => panic!("expected a size error, got {other:?}"),
        }
    }

    #[test]
    fn pi_is_a_star_representation() {
        let (input, fock) = fock_for("s3-quotient", 1);
        let alg = input.a().algebra();
        let n = alg.linear_dim();
        for i in 0..n {
            for j in 0..n {
                let (x, y) = (AlgElement::matrix_unit(alg, i), AlgElement::matrix_unit(alg, j));
                let lhs = fock.pi_action(&(&x * &y)).matrix;
                let rhs = fock.pi_action(&x).matrix * fock.pi_action(&y).matrix;
                assert!((lhs - rhs).max_abs() < 1e-9);
            }
            let x = AlgElement::matrix_unit(alg, i);
            let d = fock.pi_action(&x.star()).matrix - fock.pi_action(&x).matrix.adjoint();
            assert!(d.max_abs() < 1e-9);
        }
    }

    #[test]
    fn u_is_unitary_and_implements_theta_on_the_interior() {
        for (name, l) in [("z4-sigma2", 2), ("s3-quotient", 1), ("z2-free", 2)] {
            let (input, fock) = fock_for(name, l);
            let up = fock.u_epsilon(Sign::Plus);
            let um = fock.u_epsilon(Sign::Minus);
            assert!((up.matrix.adjoint() - &um.matrix).max_abs() < 1e-12, "{name}");
            let id = ComplexMatrix::identity(fock.total_dim(), fock.total_dim());
            let mask = fock.interior_mask();
            assert!(masked_residual(&(&up.matrix * &um.matrix), &id, &mask) < 1e-12, "{name}");
            assert!(masked_residual(&(&um.matrix * &up.matrix), &id, &mask) < 1e-12, "{name}");
            for b in input.b_basis_in(Sign::Plus) {
                let lhs = &up.matrix * fock.pi_action(&b).matrix * &um.matrix;
                let rhs = fock.pi_action(&input.transport(Sign::Plus, &b)).matrix;
                assert!(masked_residual(&lhs, &rhs, &mask) < 1e-9, "{name}");
            }
        }
    }

    #[test]
    fn vacuum_sector_is_cyclic_for_a() {
        let (input, fock) = fock_for("z4-sigma2", 1);
        let q = fock.q_projection().matrix;
        let one = AlgElement::one(input.a().algebra());
        let v = fock.vacuum();
        assert!((fock.pi_action(&one).matrix * &v - &v).max_abs() < 1e-12);
        assert!((&q * &v - &v).max_abs() < 1e-12);
        let x = &input.kernel_onb(Sign::Plus)[0];
        let xv = fock.pi_action(x).matrix * &v;
        assert!((xv - fock.vacuum_vector(&input, x).resize_vertically(fock.total_dim(), C64::new(0.0, 0.0))).max_abs() < 1e-12);
    }
}
