//! GNS spaces of `ε∘E_A` and `ε∘E_B`, the Julg–Valette operator, and the
//! operator identities behind K-amenability, certified on truncations.
//!
//! Both spaces are spanned by cyclic images of reduced words, cut at word
//! length `L`. Each sector is filtered by word length and orthonormalized level
//! by level, so "word length ≤ m" is a coordinate mask. Operators are
//! compressions `Cᴴ·⟨wᵢ, g wⱼ⟩·C`; they agree with the true operator on every
//! vector whose image stays inside the truncated span.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qgroup::Sign;
use crate::report::CheckReport;
use crate::starcore::{gram_quotient, ComplexMatrix, ComplexVector, MaxAbs, C64, ONE, TAU_GRAM, ZERO};
use crate::wordalg::{basis_words, Context, SymbolicElement, Token, WordLiteral};

/// Default cap on the number of spanning words per side.
pub const DEFAULT_WORD_CAP: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    /// GNS of `ε∘E_A`, cyclic vector `ξ`.
    H,
    /// GNS of `ε∘E_B`, cyclic vector `η`.
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Sector {
    H0,
    HMinus,
    HPlus,
    KMinus,
    KPlus,
}

impl Sector {
    pub fn label(self) -> &'static str {
        match self {
            Sector::H0 => "H0",
            Sector::HMinus => "H-1",
            Sector::HPlus => "H+1",
            Sector::KMinus => "K-1",
            Sector::KPlus => "K+1",
        }
    }
}

/// Truncated GNS space with a length-filtered orthonormal basis.
#[derive(Debug, Clone)]
pub struct GnsTrunc {
    side: Side,
    l: usize,
    words: Vec<SymbolicElement>,
    word_stars: Vec<SymbolicElement>,
    word_sector: Vec<Sector>,
    /// Columns: basis vectors as combinations of spanning words.
    onb: ComplexMatrix,
    sector_of: Vec<Sector>,
    level_of: Vec<usize>,
    cyclic: ComplexVector,
    cross_sector: f64,
}

/// The state defining a side, evaluated on an element of the dense algebra.
pub fn side_state(side: Side, z: &SymbolicElement) -> C64 {
    let input = z.context().input();
    match side {
        Side::H => input.counit_a(z.a_part()),
        Side::K => input.counit_a(&input.expect(Sign::Plus, z.a_part())),
    }
}

fn side_state_of_product(side: Side, x_star: &SymbolicElement, y: &SymbolicElement) -> Result<C64> {
    let input = x_star.context().input();
    let ea = x_star.expect_a_product(y)?;
    Ok(match side {
        Side::H => input.counit_a(&ea),
        Side::K => input.counit_a(&input.expect(Sign::Plus, &ea)),
    })
}

/// Spanning words of one side with their sector and length.
fn spanning_words(ctx: &Context, side: Side, l: usize) -> Result<Vec<(SymbolicElement, Sector, usize)>> {
    let input = ctx.input();
    let dim_b = input.b().dim();
    let mut out = Vec::new();
    match side {
        Side::H => out.push((SymbolicElement::one(ctx), Sector::H0, 0)),
        Side::K => {
            // A-part: 1 and ker E_B; B-letters only rescale η.
            let full = input.adapted_onb(Sign::Plus);
            out.push((SymbolicElement::from_a(ctx, &full[0]), Sector::KMinus, 0));
            for e in &full[dim_b..] {
                out.push((SymbolicElement::from_a(ctx, e), Sector::KMinus, 0));
            }
        }
    }
    for n in 1..=l {
        for key in basis_words(ctx, n) {
            let last = key.signs[n - 1];
            let trailing = key.letters[n] as usize;
            let sector = match side {
                Side::H => {
                    if trailing != 0 {
                        continue;
                    }
                    if last == Sign::Plus {
                        Sector::HPlus
                    } else {
                        Sector::HMinus
                    }
                }
                Side::K => {
                    if trailing != 0 && trailing < dim_b {
                        continue;
                    }
                    if last == Sign::Plus && trailing == 0 {
                        Sector::KPlus
                    } else {
                        // Images of H₋₁ words of length n + 1.
                        if n + 1 > l {
                            continue;
                        }
                        Sector::KMinus
                    }
                }
            };
            out.push((SymbolicElement::basis_word(ctx, key)?, sector, n));
        }
    }
    Ok(out)
}

/// Orthonormal basis of the span of `words[idx]` modulo the span of `prev`,
/// as new coefficient columns.
fn level_onb(gram: &ComplexMatrix, prev: &ComplexMatrix, idx: &[usize]) -> Result<ComplexMatrix> {
    let n = gram.nrows();
    let mut r = ComplexMatrix::zeros(n, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        r[(i, c)] = ONE;
    }
    if prev.ncols() > 0 {
        let proj = prev * (prev.adjoint() * gram * &r);
        r -= proj;
    }
    let g = r.adjoint() * gram * &r;
    let q = gram_quotient(&g, TAU_GRAM)?;
    Ok(r * q.onb())
}

impl GnsTrunc {
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn dim(&self) -> usize {
        self.onb.ncols()
    }

    pub fn num_words(&self) -> usize {
        self.words.len()
    }

    pub fn sector_of(&self) -> &[Sector] {
        &self.sector_of
    }

    pub fn level_of(&self) -> &[usize] {
        &self.level_of
    }

    /// Coordinates of `ξ` or `η`.
    pub fn cyclic(&self) -> &ComplexVector {
        &self.cyclic
    }

    /// Largest Gram entry between basis vectors of different sectors.
    pub fn cross_sector_residual(&self) -> f64 {
        self.cross_sector
    }

    pub fn sector_dim(&self, sector: Sector) -> usize {
        self.sector_of.iter().filter(|&&s| s == sector).count()
    }

    /// Basis vectors whose spanning words have length (level) at most `max_level` in `sector`.
    pub fn level_mask(&self, sector: Sector, max_level: i64) -> Vec<bool> {
        (0..self.dim()).map(|j| self.sector_of[j] == sector && (self.level_of[j] as i64) <= max_level).collect()
    }

    /// Vectors coming from `H`-words of length at most `m`: `H`-side levels `≤ m`;
    /// on `K`, the `+1` sector up to `m` and the `−1` sector up to `m − 1`.
    pub fn h_length_mask(&self, m: i64) -> Vec<bool> {
        (0..self.dim())
            .map(|j| {
                let lv = self.level_of[j] as i64;
                match self.sector_of[j] {
                    Sector::H0 | Sector::HMinus | Sector::HPlus | Sector::KPlus => lv <= m,
                    Sector::KMinus => lv < m,
                }
            })
            .collect()
    }

    /// Interior: vectors whose images under the generators stay in the truncation.
    pub fn interior_mask(&self) -> Vec<bool> {
        self.h_length_mask(self.l as i64 - 1)
    }

    /// Coordinates of the cyclic image of `z` (projected onto the truncated span).
    pub fn coords_of(&self, z: &SymbolicElement) -> Result<ComplexVector> {
        let mut s = ComplexVector::zeros(self.words.len());
        for (i, ws) in self.word_stars.iter().enumerate() {
            s[i] = side_state_of_product(self.side, ws, z)?;
        }
        Ok(self.onb.adjoint() * s)
    }

    /// `state(z*z) − ‖coords‖²`: zero iff the cyclic image of `z` lies in the truncated span.
    pub fn coverage_residual(&self, z: &SymbolicElement) -> Result<f64> {
        let c = self.coords_of(z)?;
        let full = side_state_of_product(self.side, &z.star(), z)?.re;
        Ok((full - c.norm_squared()).abs())
    }

    /// Compression of left multiplication by `g`.
    pub fn compress(&self, g: &SymbolicElement) -> Result<ComplexMatrix> {
        let n = self.words.len();
        let mut s = ComplexMatrix::zeros(n, n);
        for (j, w) in self.words.iter().enumerate() {
            let gw = g * w;
            for (i, ws) in self.word_stars.iter().enumerate() {
                s[(i, j)] = side_state_of_product(self.side, ws, &gw)?;
            }
        }
        Ok(self.onb.adjoint() * s * &self.onb)
    }

    /// Matrix of a map sending the cyclic image of `wⱼ` to the cyclic image of `f(wⱼ)` in `target`.
    pub fn transfer<F>(&self, target: &GnsTrunc, f: F) -> Result<ComplexMatrix>
    where
        F: Fn(&SymbolicElement, Sector) -> Option<SymbolicElement>,
    {
        let mut s = ComplexMatrix::zeros(target.words.len(), self.words.len());
        for (j, w) in self.words.iter().enumerate() {
            if let Some(img) = f(w, self.word_sector[j]) {
                for (i, ws) in target.word_stars.iter().enumerate() {
                    s[(i, j)] = side_state_of_product(target.side, ws, &img)?;
                }
            }
        }
        Ok(target.onb.adjoint() * s * &self.onb)
    }
}

/// Builds the truncated GNS space of one side.
pub fn build_gns_trunc(ctx: &Context, side: Side, l: usize, word_cap: usize) -> Result<GnsTrunc> {
    if l == 0 {
        return Err(Error::InvalidInput("truncation length must be at least 1".into()));
    }
    let mut spanning = spanning_words(ctx, side, l)?;
    if spanning.len() > word_cap {
        return Err(Error::SizeLimit { estimate: spanning.len(), cap: word_cap });
    }
    spanning.sort_by_key(|(_, s, lv)| (*s, *lv));
    let words: Vec<SymbolicElement> = spanning.iter().map(|t| t.0.clone()).collect();
    let word_sector: Vec<Sector> = spanning.iter().map(|t| t.1).collect();
    let word_level: Vec<usize> = spanning.iter().map(|t| t.2).collect();
    let word_stars: Vec<SymbolicElement> = words.iter().map(|w| w.star()).collect();
    let n = words.len();
    let mut gram = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = side_state_of_product(side, &word_stars[i], &words[j])?;
            gram[(i, j)] = v;
            gram[(j, i)] = v.conj();
        }
    }
    let mut sectors: Vec<Sector> = word_sector.clone();
    sectors.dedup();
    let mut columns: Vec<ComplexMatrix> = Vec::new();
    let mut sector_of = Vec::new();
    let mut level_of = Vec::new();
    let mut per_sector: Vec<ComplexMatrix> = Vec::new();
    for &sector in &sectors {
        let mut sec = ComplexMatrix::zeros(n, 0);
        for lv in 0..=l {
            let idx: Vec<usize> = (0..n).filter(|&i| word_sector[i] == sector && word_level[i] == lv).collect();
            if idx.is_empty() {
                continue;
            }
            let new = level_onb(&gram, &sec, &idx)
                .map_err(|e| Error::NumericalDegeneracy(format!("{} level {lv}: {e}", sector.label())))?;
            for _ in 0..new.ncols() {
                sector_of.push(sector);
                level_of.push(lv);
            }
            columns.push(new.clone());
            let mut grown = ComplexMatrix::zeros(n, sec.ncols() + new.ncols());
            grown.columns_mut(0, sec.ncols()).copy_from(&sec);
            grown.columns_mut(sec.ncols(), new.ncols()).copy_from(&new);
            sec = grown;
        }
        per_sector.push(sec);
    }
    let dim: usize = columns.iter().map(|c| c.ncols()).sum();
    let mut onb = ComplexMatrix::zeros(n, dim);
    let mut at = 0;
    for c in &columns {
        onb.columns_mut(at, c.ncols()).copy_from(c);
        at += c.ncols();
    }
    let mut cross_sector: f64 = 0.0;
    for a in 0..per_sector.len() {
        for b in a + 1..per_sector.len() {
            let m = per_sector[a].adjoint() * &gram * &per_sector[b];
            cross_sector = cross_sector.max(m.max_abs());
        }
    }
    let mut t = GnsTrunc {
        side,
        l,
        words,
        word_stars,
        word_sector,
        onb,
        sector_of,
        level_of,
        cyclic: ComplexVector::zeros(0),
        cross_sector,
    };
    t.cyclic = t.coords_of(&SymbolicElement::one(ctx))?;
    Ok(t)
}

/// Julg–Valette operator and the generator images on both sides.
#[derive(Debug, Clone)]
pub struct JvData {
    h: GnsTrunc,
    k: GnsTrunc,
    /// `𝓕 : H → K`, zero on `ξ`.
    script_f: ComplexMatrix,
    p: ComplexMatrix,
    /// `F̃ : H → K̃ = K ⊕ ℂΩ̃`.
    f_aug: ComplexMatrix,
    pi_a: Vec<ComplexMatrix>,
    pi_u: ComplexMatrix,
    rho_a: Vec<ComplexMatrix>,
    rho_u: ComplexMatrix,
    rho_aug_a: Vec<ComplexMatrix>,
    rho_aug_w: ComplexMatrix,
    v: ComplexMatrix,
    counit_a: Vec<C64>,
    /// `ι(b)` and `θ(b)` for the basis of `B`, as elements of `A`.
    b_pairs: Vec<(crate::starcore::AlgElement, crate::starcore::AlgElement)>,
    rho_b_aug: Vec<ComplexMatrix>,
    rho_theta_b_aug: Vec<ComplexMatrix>,
    rho_u_eta: ComplexVector,
    unitarity: (f64, f64),
}

fn augment(m: &ComplexMatrix, corner: C64) -> ComplexMatrix {
    let n = m.nrows();
    let mut out = ComplexMatrix::zeros(n + 1, n + 1);
    out.view_mut((0, 0), (n, n)).copy_from(m);
    out[(n, n)] = corner;
    out
}

fn extend_vec(x: &ComplexVector, last: C64) -> ComplexVector {
    let mut out = ComplexVector::zeros(x.len() + 1);
    out.rows_mut(0, x.len()).copy_from(x);
    out[x.len()] = last;
    out
}

/// Columns of `m` selected by `mask`.
pub fn masked_columns(m: &ComplexMatrix, mask: &[bool]) -> ComplexMatrix {
    let cols: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
    let mut out = ComplexMatrix::zeros(m.nrows(), cols.len());
    for (c, &j) in cols.iter().enumerate() {
        out.set_column(c, &m.column(j));
    }
    out
}

/// Largest entry of `x − y` over the masked columns.
pub fn masked_max(x: &ComplexMatrix, y: &ComplexMatrix, mask: &[bool]) -> f64 {
    masked_columns(&(x - y), mask).max_abs()
}

fn mask_label(mask: &[bool], what: &str) -> String {
    format!("{what} ({} of {} basis vectors)", mask.iter().filter(|&&b| b).count(), mask.len())
}

/// Builds `F`, `𝓕`, `F̃`, `v` and the generator images.
pub fn build_jv(h: GnsTrunc, k: GnsTrunc) -> Result<JvData> {
    if h.side != Side::H || k.side != Side::K || h.l != k.l {
        return Err(Error::InvalidInput("build_jv needs an H-side and a K-side of equal length".into()));
    }
    let ctx = h.words[0].context().clone();
    let input = ctx.input();
    let u = SymbolicElement::generator(&ctx, Sign::Plus);
    let script_f = h.transfer(&k, |w, sector| match sector {
        Sector::H0 => None,
        Sector::HPlus => Some(w.clone()),
        _ => Some(w * &u),
    })?;
    let dh = h.dim();
    let dk = k.dim();
    let xi = h.cyclic().clone();
    let p = &xi * xi.adjoint();
    let id_h = ComplexMatrix::identity(dh, dh);
    let id_k = ComplexMatrix::identity(dk, dk);
    let r1 = (script_f.adjoint() * &script_f - (&id_h - &p)).max_abs();
    let r2 = (&script_f * script_f.adjoint() - &id_k).max_abs();
    if r1.max(r2) > TAU_GRAM {
        return Err(Error::LemmaViolation(format!("F is not unitary: residuals {r1:.3e}, {r2:.3e}")));
    }
    let mut f_aug = ComplexMatrix::zeros(dk + 1, dh);
    f_aug.view_mut((0, 0), (dk, dh)).copy_from(&script_f);
    f_aug.row_mut(dk).copy_from(&xi.adjoint());
    let a = input.a();
    let mut pi_a = Vec::with_capacity(a.dim());
    let mut rho_a = Vec::with_capacity(a.dim());
    let mut rho_aug_a = Vec::with_capacity(a.dim());
    let mut counit_a = Vec::with_capacity(a.dim());
    for x in a.basis() {
        let sx = SymbolicElement::from_a(&ctx, x);
        pi_a.push(h.compress(&sx)?);
        let r = k.compress(&sx)?;
        let e = input.counit_a(x);
        rho_aug_a.push(augment(&r, e));
        rho_a.push(r);
        counit_a.push(e);
    }
    let pi_u = h.compress(&u)?;
    let rho_u = k.compress(&u)?;
    let rho_aug_w = augment(&rho_u, ONE);
    let eta = extend_vec(k.cyclic(), ZERO);
    let mut omega = ComplexVector::zeros(dk + 1);
    omega[dk] = ONE;
    let v = ComplexMatrix::identity(dk + 1, dk + 1) - &eta * eta.adjoint() - &omega * omega.adjoint()
        + &omega * eta.adjoint()
        + &eta * omega.adjoint();
    let mut b_pairs = Vec::new();
    let mut rho_b_aug = Vec::new();
    let mut rho_theta_b_aug = Vec::new();
    for b in input.b_basis_in(Sign::Plus) {
        let tb = input.transport(Sign::Plus, &b);
        rho_b_aug.push(augment(&k.compress(&SymbolicElement::from_a(&ctx, &b))?, input.counit_a(&b)));
        rho_theta_b_aug.push(augment(&k.compress(&SymbolicElement::from_a(&ctx, &tb))?, input.counit_a(&tb)));
        b_pairs.push((b, tb));
    }
    let rho_u_eta = k.coords_of(&u)?;
    Ok(JvData {
        h,
        k,
        script_f,
        p,
        f_aug,
        pi_a,
        pi_u,
        rho_a,
        rho_u,
        rho_aug_a,
        rho_aug_w,
        v,
        counit_a,
        b_pairs,
        rho_b_aug,
        rho_theta_b_aug,
        rho_u_eta,
        unitarity: (r1, r2),
    })
}

/// Rank-one thresholds: the top singular value must exceed `RANK_ONE_TOP·scale`,
/// all others must stay below `RANK_ONE_REST·scale`.
pub const RANK_ONE_TOP: f64 = 1e-6;
pub const RANK_ONE_REST: f64 = 1e-8;

/// Singular-value profile of `m` and the distance of its top left singular
/// vector from the line through `expected`.
fn rank_one_profile(m: &ComplexMatrix, expected: &ComplexVector) -> (f64, f64, f64) {
    if m.ncols() == 0 {
        return (0.0, 0.0, f64::NAN);
    }
    let svd = m.clone().svd(true, false);
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal));
    let top = sv[order[0]];
    let second = order.get(1).map(|&i| sv[i]).unwrap_or(0.0);
    let left = svd.u.as_ref().expect("left vectors requested").column(order[0]).into_owned();
    let e = expected / C64::new(expected.norm(), 0.0);
    let along = e.dotc(&left);
    let off = (&left - &e * along).norm();
    (top, second, off)
}

impl JvData {
    pub fn h(&self) -> &GnsTrunc {
        &self.h
    }

    pub fn k(&self) -> &GnsTrunc {
        &self.k
    }

    pub fn script_f(&self) -> &ComplexMatrix {
        &self.script_f
    }

    pub fn f_aug(&self) -> &ComplexMatrix {
        &self.f_aug
    }

    pub fn v(&self) -> &ComplexMatrix {
        &self.v
    }

    /// `(ι(b), θ(b))` for the basis of `B`.
    pub fn b_pairs(&self) -> &[(crate::starcore::AlgElement, crate::starcore::AlgElement)] {
        &self.b_pairs
    }

    pub fn p(&self) -> &ComplexMatrix {
        &self.p
    }

    pub fn pi_u(&self) -> &ComplexMatrix {
        &self.pi_u
    }

    pub fn rho_u(&self) -> &ComplexMatrix {
        &self.rho_u
    }

    pub fn rho_aug_w(&self) -> &ComplexMatrix {
        &self.rho_aug_w
    }

    /// `(‖𝓕*𝓕 − (1 − p)‖, ‖𝓕𝓕* − 1‖)` as measured at build time.
    pub fn unitarity(&self) -> (f64, f64) {
        self.unitarity
    }

    /// `K̃` mask of vectors `F̃(π(x)ξ)` for words `x` of length at most `m`.
    pub fn aug_mask(&self, m: i64) -> Vec<bool> {
        let mut mask = self.k.h_length_mask(m);
        mask.push(m >= 0);
        mask
    }

    fn k_aug_vec(&self, x: &ComplexVector) -> ComplexVector {
        extend_vec(x, ZERO)
    }

    fn omega_aug(&self) -> ComplexVector {
        let mut o = ComplexVector::zeros(self.k.dim() + 1);
        o[self.k.dim()] = ONE;
        o
    }

    /// Isometry, sector bookkeeping, and the three commutator statements.
    pub fn verify_commutators(&self) -> Result<Vec<CheckReport>> {
        let mut out = Vec::new();
        let (r1, r2) = self.unitarity;
        out.push(CheckReport::new("F*F = 1 - p", r1, TAU_GRAM, "all of H"));
        out.push(CheckReport::new("FF* = 1", r2, TAU_GRAM, "all of K"));
        out.push(CheckReport::new("H sectors orthogonal", self.h.cross_sector, TAU_GRAM, "all of H"));
        out.push(CheckReport::new("K sectors orthogonal", self.k.cross_sector, TAU_GRAM, "all of K"));
        let mut cross: f64 = 0.0;
        for i in 0..self.k.dim() {
            for j in 0..self.h.dim() {
                let ok = matches!(
                    (self.h.sector_of[j], self.k.sector_of[i]),
                    (Sector::HMinus, Sector::KMinus) | (Sector::HPlus, Sector::KPlus)
                );
                if !ok {
                    cross = cross.max(self.script_f[(i, j)].norm());
                }
            }
        }
        out.push(CheckReport::new("F maps H-1 to K-1 and H+1 to K+1", cross, TAU_GRAM, "all of H"));
        let h_dims = format!(
            "dims H0/H-1/H+1 = {}/{}/{}, K-1/K+1 = {}/{}",
            self.h.sector_dim(Sector::H0),
            self.h.sector_dim(Sector::HMinus),
            self.h.sector_dim(Sector::HPlus),
            self.k.sector_dim(Sector::KMinus),
            self.k.sector_dim(Sector::KPlus)
        );
        out.push(CheckReport::flag("H0 = span(xi)", self.h.sector_dim(Sector::H0) == 1, "all of H").with_note(h_dims));
        let mask = self.h.interior_mask();
        let ml = mask_label(&mask, "H interior");
        let xi = self.h.cyclic().clone();
        let mut worst_a: f64 = 0.0;
        let mut worst_eps: f64 = 0.0;
        for (i, pa) in self.pi_a.iter().enumerate() {
            let lhs = &self.script_f * pa;
            let rhs = &self.rho_a[i] * &self.script_f;
            worst_a = worst_a.max(masked_max(&lhs, &rhs, &mask));
            worst_eps = worst_eps.max((pa * &xi - &xi * self.counit_a[i]).norm());
        }
        out.push(CheckReport::new("[F, pi(a)] = 0 for basis a", worst_a, 1e-9, ml.clone()));
        out.push(CheckReport::new("pi(a) xi = eps(a) xi", worst_eps, TAU_GRAM, "xi"));
        let eta = self.k.cyclic().clone();
        let mut worst_b: f64 = 0.0;
        let dk = self.k.dim();
        for rb in &self.rho_b_aug {
            let e = rb[(dk, dk)];
            let r = rb.view((0, 0), (self.k.dim(), self.k.dim())).into_owned();
            worst_b = worst_b.max((r * &eta - &eta * e).norm());
        }
        out.push(CheckReport::new("rho(b) eta = eps(b) eta", worst_b, TAU_GRAM, "eta"));
        let comm_u = &self.script_f * &self.pi_u - &self.rho_u * &self.script_f;
        let pi_us = self.pi_u.adjoint();
        let rho_us = self.rho_u.adjoint();
        let comm_us = &self.script_f * &pi_us - &rho_us * &self.script_f;
        for (name, comm, expected) in [("u", &comm_u, &self.rho_u_eta), ("u*", &comm_us, &eta)] {
            let restricted = masked_columns(comm, &mask);
            let (top, second, off) = rank_one_profile(&restricted, expected);
            let what = if name == "u" { "rho(u) eta" } else { "eta" };
            out.push(CheckReport::at_least(format!("[F, pi({name})] top singular value"), top, RANK_ONE_TOP, ml.clone()));
            out.push(CheckReport::new(format!("[F, pi({name})] other singular values"), second, RANK_ONE_REST, ml.clone()));
            out.push(CheckReport::new(format!("[F, pi({name})] image is C {what}"), off, TAU_GRAM, ml.clone()));
        }
        let at_xi = &comm_u * &xi - &self.rho_u_eta;
        out.push(CheckReport::new("(F pi(u) - rho(u) F) xi = rho(u) eta", at_xi.norm(), TAU_GRAM, "xi"));
        let us_xi = &pi_us * &xi;
        let at_us = &comm_u * &us_xi + &self.rho_u_eta;
        out.push(CheckReport::new("(F pi(u) - rho(u) F) pi(u*) xi = -rho(u) eta", at_us.norm(), TAU_GRAM, "pi(u*) xi"));
        Ok(out)
    }
}

impl JvData {
    /// `F̃` unitary, `F̃π(a)F̃* = ρ̃(a)`, `F̃π(w)F̃* = ρ̃(w)v`, and `v ∈ ρ̃(B)′`.
    pub fn verify_augmented(&self) -> Vec<CheckReport> {
        let mut out = Vec::new();
        let dh = self.h.dim();
        let f = &self.f_aug;
        let fs = f.adjoint();
        let id = ComplexMatrix::identity(dh, dh);
        out.push(CheckReport::new(
            "F~ unitary",
            (&fs * f - &id).max_abs().max((f * &fs - &id).max_abs()),
            TAU_GRAM,
            "all of K~",
        ));
        let mask = self.aug_mask(self.h.l as i64 - 1);
        let ml = mask_label(&mask, "K~ interior");
        let omega = self.omega_aug();
        let eta = self.k_aug_vec(self.k.cyclic());
        let mut worst: f64 = 0.0;
        let mut worst_omega: f64 = 0.0;
        for (i, pa) in self.pi_a.iter().enumerate() {
            let conj = f * pa * &fs;
            worst = worst.max(masked_max(&conj, &self.rho_aug_a[i], &mask));
            worst_omega = worst_omega.max((&conj * &omega - &omega * self.counit_a[i]).norm());
        }
        out.push(CheckReport::new("F~ pi(a) F~* = rho~(a)", worst, TAU_GRAM, ml.clone()));
        out.push(CheckReport::new("F~ pi(a) F~* Omega = eps(a) Omega", worst_omega, TAU_GRAM, "Omega"));
        let conj_w = f * &self.pi_u * &fs;
        let target = &self.rho_aug_w * &self.v;
        out.push(CheckReport::new("F~ pi(w) F~* = rho~(w) v", masked_max(&conj_w, &target, &mask), TAU_GRAM, ml));
        out.push(CheckReport::new("F~ pi(w) F~* eta = Omega", (&conj_w * &eta - &omega).norm(), TAU_GRAM, "eta"));
        let n = self.v.nrows();
        let id_k = ComplexMatrix::identity(n, n);
        out.push(CheckReport::new("v unitary", (self.v.adjoint() * &self.v - &id_k).max_abs(), TAU_GRAM, "all of K~"));
        let swap = (&self.v * &eta - &omega).norm().max((&self.v * &omega - &eta).norm());
        out.push(CheckReport::new("v eta = Omega, v Omega = eta", swap, TAU_GRAM, "eta, Omega"));
        let mut worst_b: f64 = 0.0;
        for rb in &self.rho_b_aug {
            worst_b = worst_b.max((&self.v * rb * self.v.adjoint() - rb).max_abs());
        }
        out.push(CheckReport::new("v rho~(b) v* = rho~(b)", worst_b, TAU_GRAM, "all of K~"));
        out
    }

    /// `π(x)` for a literal over basis letters and `u`, `u*`.
    pub fn pi_literal(&self, lit: &WordLiteral) -> ComplexMatrix {
        let pi_us = self.pi_u.adjoint();
        let dh = self.h.dim();
        let mut m = ComplexMatrix::identity(dh, dh);
        for t in &lit.0 {
            m = match *t {
                Token::Letter(i) => m * &self.pi_a[i],
                Token::Gen(Sign::Plus) => m * &self.pi_u,
                Token::Gen(Sign::Minus) => m * &pi_us,
            };
        }
        m
    }

    /// `ρ_s(x)` with `ρ_s(a) = ρ̃(a)` and `ρ_s(w) = w_s`.
    pub fn rho_s_literal(&self, lit: &WordLiteral, w_s: &ComplexMatrix) -> ComplexMatrix {
        let ws_star = w_s.adjoint();
        let n = w_s.nrows();
        let mut m = ComplexMatrix::identity(n, n);
        for t in &lit.0 {
            m = match *t {
                Token::Letter(i) => m * &self.rho_aug_a[i],
                Token::Gen(Sign::Plus) => m * w_s,
                Token::Gen(Sign::Minus) => m * &ws_star,
            };
        }
        m
    }
}

/// Eigenvalues this close to `−1` sit on the branch cut of the logarithm.
pub const BRANCH_TOL: f64 = 1e-12;

/// `v = e^{ia}` with `a` self-adjoint, spectrum in `[−π, π]`, and the path `v_s = e^{isa}`.
#[derive(Debug, Clone)]
pub struct HomotopyPath {
    pub generator_a: ComplexMatrix,
    pub samples: Vec<f64>,
    pub v_s: Vec<ComplexMatrix>,
    pub w_s: Vec<ComplexMatrix>,
    pub branch_note: Option<String>,
    q: ComplexMatrix,
    angles: Vec<f64>,
}

impl HomotopyPath {
    pub fn at(&self, s: f64) -> ComplexMatrix {
        let d = ComplexVector::from_iterator(self.angles.len(), self.angles.iter().map(|t| C64::from_polar(1.0, s * t)));
        &self.q * ComplexMatrix::from_diagonal(&d) * self.q.adjoint()
    }
}

/// Principal logarithm of a unitary via the complex Schur form; eigenvalues at `−1` are sent to `π`.
pub fn unitary_log(v: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, Option<String>)> {
    let schur = v.clone().try_schur(1e-15, 10_000).ok_or_else(|| Error::NumericalDegeneracy("Schur form did not converge".into()))?;
    let (q, t) = schur.unpack();
    let mut off: f64 = 0.0;
    for i in 0..t.nrows() {
        for j in i + 1..t.ncols() {
            off = off.max(t[(i, j)].norm());
        }
    }
    if off > TAU_GRAM {
        return Err(Error::NumericalDegeneracy(format!("v is not normal: Schur off-diagonal {off:.3e}")));
    }
    let mut angles = Vec::with_capacity(t.nrows());
    let mut at_branch = 0;
    for i in 0..t.nrows() {
        let lambda = t[(i, i)];
        if (lambda + ONE).norm() < BRANCH_TOL {
            at_branch += 1;
            angles.push(std::f64::consts::PI);
        } else {
            angles.push(lambda.arg());
        }
    }
    let note = (at_branch > 0).then(|| {
        format!("{at_branch} eigenvalue(s) of v at -1 (spectrum boundary); branch chosen as +pi")
    });
    Ok((q, angles, note))
}

/// Builds `v_s`, `w_s = ρ̃(w)v_s` at the samples and certifies the path.
pub fn homotopy(jv: &JvData, samples: &[f64], seed: u64, random_words: usize) -> Result<(HomotopyPath, Vec<CheckReport>)> {
    let (q, angles, branch_note) = unitary_log(&jv.v)?;
    let d = ComplexVector::from_iterator(angles.len(), angles.iter().map(|t| C64::new(*t, 0.0)));
    let generator_a = &q * ComplexMatrix::from_diagonal(&d) * q.adjoint();
    let mut path = HomotopyPath {
        generator_a,
        samples: samples.to_vec(),
        v_s: Vec::new(),
        w_s: Vec::new(),
        branch_note: branch_note.clone(),
        q,
        angles,
    };
    for &s in samples {
        let vs = path.at(s);
        path.w_s.push(&jv.rho_aug_w * &vs);
        path.v_s.push(vs);
    }
    let mut out = Vec::new();
    let a = &path.generator_a;
    let mut a_check = CheckReport::new("a self-adjoint", (a - a.adjoint()).max_abs(), TAU_GRAM, "all of K~");
    if let Some(n) = &branch_note {
        a_check = a_check.with_note(n.clone());
    }
    out.push(a_check);
    let spec = path.angles.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    out.push(CheckReport::new("spectrum of a within [-pi, pi]", (spec - std::f64::consts::PI).max(0.0), 1e-12, "all of K~"));
    let n = jv.v.nrows();
    let id = ComplexMatrix::identity(n, n);
    out.push(CheckReport::new("v_0 = 1", (path.at(0.0) - &id).max_abs(), 1e-10, "all of K~"));
    out.push(CheckReport::new("v_1 = v", (path.at(1.0) - &jv.v).max_abs(), 1e-10, "all of K~"));
    let mut unit: f64 = 0.0;
    let mut lip: f64 = 0.0;
    let mut group: f64 = 0.0;
    for (i, &s) in samples.iter().enumerate() {
        unit = unit.max((path.v_s[i].adjoint() * &path.v_s[i] - &id).max_abs());
        for (j, &t) in samples.iter().enumerate() {
            let dist = crate::starcore::spectral_norm(&(&path.v_s[i] - &path.v_s[j]));
            lip = lip.max(dist - std::f64::consts::PI * (s - t).abs());
            if s + t <= 1.0 + 1e-12 {
                group = group.max((&path.v_s[i] * &path.v_s[j] - path.at(s + t)).max_abs());
            }
        }
    }
    out.push(CheckReport::new("v_s unitary", unit, TAU_GRAM, "all of K~"));
    out.push(CheckReport::new("|v_s - v_t| <= pi |s - t|", lip.max(0.0), 1e-12, "all of K~"));
    out.push(CheckReport::new("v_s v_t = v_(s+t)", group, TAU_GRAM, "all of K~"));
    let mask = jv.aug_mask(jv.h.l as i64 - 1);
    let ml = mask_label(&mask, "K~ interior");
    for (i, &s) in samples.iter().enumerate() {
        let ws = &path.w_s[i];
        let mut worst: f64 = 0.0;
        for (rb, rtb) in jv.rho_b_aug.iter().zip(&jv.rho_theta_b_aug) {
            worst = worst.max(masked_max(&(ws * rb * ws.adjoint()), rtb, &mask));
        }
        out.push(CheckReport::new(format!("s = {s}: w_s rho~(b) w_s* = rho~(theta(b))"), worst, TAU_GRAM, ml.clone()));
    }
    let w1 = &jv.rho_aug_w * &jv.v;
    let f = &jv.f_aug;
    let fs = f.adjoint();
    let mut gen: f64 = masked_max(&(f * &jv.pi_u * &fs), &w1, &mask);
    for (i, pa) in jv.pi_a.iter().enumerate() {
        gen = gen.max(masked_max(&(f * pa * &fs), &jv.rho_aug_a[i], &mask));
    }
    out.push(CheckReport::new("s = 1: F~ intertwines pi~ and rho_1 on generators", gen, TAU_GRAM, ml));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = jv.h.l;
    let dim_a = jv.pi_a.len();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for _ in 0..random_words {
        let r = rng.gen_range(0..=l);
        let lit = WordLiteral::random(&mut rng, dim_a, r);
        let mask = jv.aug_mask(l as i64 - r as i64);
        let lhs = f * jv.pi_literal(&lit) * &fs;
        let rhs = jv.rho_s_literal(&lit, &w1);
        worst = worst.max(masked_max(&lhs, &rhs, &mask));
        checked += 1;
    }
    out.push(
        CheckReport::new("s = 1: F~ intertwines pi~ and rho_1 on random words", worst, TAU_GRAM, "K~ vectors of length <= L - r for r generators")
            .with_note(format!("{checked} words, seed {seed}")),
    );
    Ok((path, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::wordalg::context;

    fn jv(name: &str, l: usize) -> JvData {
        let ctx = context(builtin(name).unwrap());
        let h = build_gns_trunc(&ctx, Side::H, l, DEFAULT_WORD_CAP).unwrap();
        let k = build_gns_trunc(&ctx, Side::K, l, DEFAULT_WORD_CAP).unwrap();
        build_jv(h, k).unwrap()
    }

    fn assert_all_pass(reports: &[CheckReport]) {
        for r in reports {
            assert!(r.pass, "{} failed: residual {:e} > {:e} ({:?})", r.name, r.residual, r.threshold, r.note);
        }
    }

    #[test]
    fn free_product_sectors_at_length_one() {
        let ctx = context(builtin("z2-free").unwrap());
        let h = build_gns_trunc(&ctx, Side::H, 1, DEFAULT_WORD_CAP).unwrap();
        assert_eq!(
            (h.sector_dim(Sector::H0), h.sector_dim(Sector::HMinus), h.sector_dim(Sector::HPlus)),
            (1, 2, 2)
        );
    }

    #[test]
    fn jv_identities_hold_for_z4() {
        let d = jv("z4-sigma2", 2);
        assert_all_pass(&d.verify_commutators().unwrap());
        assert_all_pass(&d.verify_augmented());
        let (path, checks) = homotopy(&d, &[0.0, 0.25, 0.5, 0.75, 1.0], 1, 20).unwrap();
        assert_all_pass(&checks);
        assert!(path.branch_note.is_some());
    }

    #[test]
    fn jv_identities_hold_for_s3() {
        let d = jv("s3-quotient", 1);
        assert_all_pass(&d.verify_commutators().unwrap());
        assert_all_pass(&d.verify_augmented());
    }
}
