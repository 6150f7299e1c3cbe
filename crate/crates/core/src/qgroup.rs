//! Finite-dimensional compact quantum groups and HNN input data.
//!
//! A [`FiniteCQG`] carries a distinguished linear basis `x_0, …, x_{n−1}` of
//! its algebra (group elements, point masses, or user-supplied elements)
//! together with the structure constants of the comultiplication in that
//! basis. The Haar state and the counit are solved for, never assumed.

use serde::{Deserialize, Serialize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::group::FiniteGroup;
use crate::starcore::{
    conditional_expectation, hermitian_eigen, make_multimatrix, numerical_rank, pseudo_inverse,
    Algebra, AlgElement, ComplexMatrix, ComplexVector, CondExpectation, Functional, MaxAbs, StarMorphism,
    State, C64, DROP, ONE, TAU_ALG, ZERO,
};

/// `Δ(x_i) = Σ c · x_j ⊗ x_k`, stored as `(j, k, c)` triples per basis index.
pub type Comultiplication = Vec<Vec<(usize, usize, C64)>>;

#[derive(Clone, Debug)]
pub struct FiniteCQG {
    algebra: Algebra,
    labels: Vec<String>,
    basis: Vec<AlgElement>,
    /// Maps matrix-unit coordinates to coordinates over `basis`.
    to_basis: ComplexMatrix,
    comul: Comultiplication,
    /// `x_i x_j = Σ_p m · x_p` as sparse `(p, m)` lists, row-major in `(i, j)`.
    products: Vec<Vec<(usize, C64)>>,
    unit_coords: Vec<C64>,
    haar: State,
    counit: Functional,
    counit_basis: Vec<C64>,
}

fn sparse(v: &ComplexVector) -> Vec<(usize, C64)> {
    v.iter().enumerate().filter(|(_, c)| c.norm() > DROP).map(|(i, c)| (i, *c)).collect()
}

impl FiniteCQG {
    /// Validates the comultiplication (unital *-homomorphism, coassociative,
    /// density conditions) and solves for the Haar state and the counit.
    pub fn new(
        algebra: &Algebra,
        labels: Vec<String>,
        basis: Vec<AlgElement>,
        comul: Comultiplication,
    ) -> Result<Self> {
        let n = algebra.linear_dim();
        if basis.len() != n || labels.len() != n || comul.len() != n {
            return Err(Error::NotACqg(format!("expected {n} basis elements, labels and coproducts")));
        }
        if comul.iter().flatten().any(|&(j, k, _)| j >= n || k >= n) {
            return Err(Error::NotACqg("coproduct index out of range".into()));
        }
        let mut bm = ComplexMatrix::zeros(n, n);
        for (i, x) in basis.iter().enumerate() {
            if !x.same_algebra(&AlgElement::one(algebra)) {
                return Err(Error::AlgebraMismatch { left: algebra.id(), right: x.algebra().id() });
            }
            bm.set_column(i, &x.to_vector());
        }
        if numerical_rank(&bm, 1e-10) != n {
            return Err(Error::NotACqg("distinguished elements are not a basis".into()));
        }
        let to_basis = bm.clone().try_inverse().ok_or_else(|| Error::NotACqg("singular basis".into()))?;
        let mut products = Vec::with_capacity(n * n);
        for x in &basis {
            for y in &basis {
                products.push(sparse(&(&to_basis * (x * y).to_vector())));
            }
        }
        let unit_coords: Vec<C64> = (&to_basis * AlgElement::one(algebra).to_vector()).iter().copied().collect();
        // Placeholders until the solvers run.
        let trivial = Functional::new(algebra, vec![ZERO; n])?;
        let mut qg = FiniteCQG {
            algebra: algebra.clone(),
            labels,
            basis,
            to_basis,
            comul,
            products,
            unit_coords,
            haar: State::new(Functional::new(algebra, uniform_trace(algebra))?)?,
            counit: trivial,
            counit_basis: vec![ZERO; n],
        };
        qg.check_coassociative()?;
        qg.check_homomorphism()?;
        qg.check_density()?;
        qg.haar = qg.solve_haar()?;
        let (counit_basis, counit) = qg.solve_counit()?;
        qg.counit_basis = counit_basis;
        qg.counit = counit;
        Ok(qg)
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn basis(&self) -> &[AlgElement] {
        &self.basis
    }

    pub fn basis_element(&self, i: usize) -> &AlgElement {
        &self.basis[i]
    }

    pub fn comul(&self) -> &Comultiplication {
        &self.comul
    }

    pub fn haar(&self) -> &State {
        &self.haar
    }

    pub fn counit(&self) -> &Functional {
        &self.counit
    }

    /// Counit on the distinguished basis.
    pub fn counit_basis(&self) -> &[C64] {
        &self.counit_basis
    }

    pub fn basis_coords(&self, a: &AlgElement) -> Vec<C64> {
        (&self.to_basis * a.to_vector()).iter().copied().collect()
    }

    pub fn from_basis_coords(&self, coords: &[C64]) -> AlgElement {
        let mut out = AlgElement::zero(&self.algebra);
        for (i, c) in coords.iter().enumerate() {
            if c.norm() > 0.0 {
                out = &out + &self.basis[i].scale(*c);
            }
        }
        out
    }

    /// `Δ(a)` as an `n × n` coefficient array over `x_j ⊗ x_k` (row-major in `j`).
    pub fn comultiply_coords(&self, a: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let mut out = vec![ZERO; n * n];
        for (i, &c) in a.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            for &(j, k, d) in &self.comul[i] {
                out[j * n + k] += c * d;
            }
        }
        out
    }

    fn product_coords(&self, a: &[C64], b: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let mut out = vec![ZERO; n];
        for (i, &ca) in a.iter().enumerate() {
            if ca.norm() == 0.0 {
                continue;
            }
            for (j, &cb) in b.iter().enumerate() {
                if cb.norm() == 0.0 {
                    continue;
                }
                for &(p, m) in &self.products[i * n + j] {
                    out[p] += ca * cb * m;
                }
            }
        }
        out
    }

    /// Product in `A ⊗ A` of two `n²` coefficient arrays.
    fn tensor_product(&self, s: &[C64], t: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let mut out = vec![ZERO; n * n];
        for (st, &cs) in s.iter().enumerate() {
            if cs.norm() <= DROP {
                continue;
            }
            let (a, b) = (st / n, st % n);
            for (tt, &ct) in t.iter().enumerate() {
                if ct.norm() <= DROP {
                    continue;
                }
                let (c, d) = (tt / n, tt % n);
                for &(p, m1) in &self.products[a * n + c] {
                    for &(q, m2) in &self.products[b * n + d] {
                        out[p * n + q] += cs * ct * m1 * m2;
                    }
                }
            }
        }
        out
    }

    fn star_coords(&self, a: &[C64]) -> Vec<C64> {
        self.basis_coords(&self.from_basis_coords(a).star())
    }

    fn check_coassociative(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            let mut left = vec![ZERO; n * n * n];
            let mut right = vec![ZERO; n * n * n];
            for &(j, k, c) in &self.comul[i] {
                for &(p, q, d) in &self.comul[j] {
                    left[(p * n + q) * n + k] += c * d;
                }
                for &(p, q, d) in &self.comul[k] {
                    right[(j * n + p) * n + q] += c * d;
                }
            }
            let r = left.iter().zip(&right).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if r > TAU_ALG {
                return Err(Error::NotACqg(format!(
                    "comultiplication not coassociative on {} (residual {r:.3e})",
                    self.labels[i]
                )));
            }
        }
        Ok(())
    }

    fn check_homomorphism(&self) -> Result<()> {
        let n = self.dim();
        let delta_one = self.comultiply_coords(&self.unit_coords);
        let mut one_one = vec![ZERO; n * n];
        for (j, &a) in self.unit_coords.iter().enumerate() {
            for (k, &b) in self.unit_coords.iter().enumerate() {
                one_one[j * n + k] = a * b;
            }
        }
        let r = max_diff(&delta_one, &one_one);
        if r > TAU_ALG {
            return Err(Error::NotACqg(format!("Δ(1) ≠ 1⊗1 (residual {r:.3e})")));
        }
        let deltas: Vec<Vec<C64>> = (0..n).map(|i| self.comultiply_coords(&unit_vec(n, i))).collect();
        for i in 0..n {
            let star_i = self.star_coords(&unit_vec(n, i));
            let lhs = self.comultiply_coords(&star_i);
            let mut rhs = vec![ZERO; n * n];
            for (jk, &c) in deltas[i].iter().enumerate() {
                if c.norm() <= DROP {
                    continue;
                }
                let sj = self.star_coords(&unit_vec(n, jk / n));
                let sk = self.star_coords(&unit_vec(n, jk % n));
                for (p, &a) in sj.iter().enumerate() {
                    for (q, &b) in sk.iter().enumerate() {
                        rhs[p * n + q] += c.conj() * a * b;
                    }
                }
            }
            let r = max_diff(&lhs, &rhs);
            if r > TAU_ALG {
                return Err(Error::NotACqg(format!("Δ is not *-preserving (residual {r:.3e})")));
            }
            for j in 0..n {
                let prod = self.product_coords(&unit_vec(n, i), &unit_vec(n, j));
                let lhs = self.comultiply_coords(&prod);
                let rhs = self.tensor_product(&deltas[i], &deltas[j]);
                let r = max_diff(&lhs, &rhs);
                if r > TAU_ALG {
                    return Err(Error::NotACqg(format!(
                        "Δ is not multiplicative on ({}, {}) (residual {r:.3e})",
                        self.labels[i], self.labels[j]
                    )));
                }
            }
        }
        Ok(())
    }

    /// `Δ(A)(A⊗1)` and `Δ(A)(1⊗A)` both span `A⊗A`.
    fn check_density(&self) -> Result<()> {
        let n = self.dim();
        for side in 0..2 {
            let mut span = ComplexMatrix::zeros(n * n, n * n);
            for i in 0..n {
                let d = self.comultiply_coords(&unit_vec(n, i));
                for j in 0..n {
                    let mut t = vec![ZERO; n * n];
                    for (p, &c) in self.unit_coords.iter().enumerate() {
                        if side == 0 {
                            t[j * n + p] = c;
                        } else {
                            t[p * n + j] = c;
                        }
                    }
                    let col = self.tensor_product(&d, &t);
                    span.set_column(i * n + j, &ComplexVector::from_vec(col));
                }
            }
            if numerical_rank(&span, 1e-10) != n * n {
                return Err(Error::NotACqg("density condition fails".into()));
            }
        }
        Ok(())
    }

    /// Unique invariant state: null space of the stacked invariance equations.
    fn solve_haar(&self) -> Result<State> {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(2 * n * n, n);
        for i in 0..n {
            for &(j, k, c) in &self.comul[i] {
                // (id⊗φ)Δ(x_i), component along x_j, and (φ⊗id)Δ(x_i) along x_k.
                m[(i * n + j, k)] += c;
                m[(n * n + i * n + k, j)] += c;
            }
            for p in 0..n {
                m[(i * n + p, i)] -= self.unit_coords[p];
                m[(n * n + i * n + p, i)] -= self.unit_coords[p];
            }
        }
        let null = null_space(&m, 1e-9);
        if null.ncols() != 1 {
            return Err(Error::NotACqg(format!(
                "Haar solution space has dimension {} instead of 1",
                null.ncols()
            )));
        }
        let v = null.column(0);
        let norm: C64 = v.iter().zip(&self.unit_coords).map(|(a, b)| a * b).sum();
        if norm.norm() < 1e-12 {
            return Err(Error::NotACqg("invariant functional vanishes on the unit".into()));
        }
        let phi_basis: Vec<C64> = v.iter().map(|x| x / norm).collect();
        let residual = (&m * ComplexVector::from_vec(phi_basis.clone())).max_abs();
        if residual > TAU_ALG {
            return Err(Error::NotACqg(format!("Haar residual {residual:.3e}")));
        }
        let units = self.to_basis.transpose() * ComplexVector::from_vec(phi_basis);
        State::new(Functional::new(&self.algebra, units.iter().copied().collect())?)
            .map_err(|e| Error::NotACqg(format!("invariant functional is not a state: {e}")))
    }

    fn solve_counit(&self) -> Result<(Vec<C64>, Functional)> {
        let n = self.dim();
        let mut m = ComplexMatrix::zeros(2 * n * n, n);
        let mut rhs = ComplexVector::zeros(2 * n * n);
        for i in 0..n {
            for &(j, k, c) in &self.comul[i] {
                m[(i * n + j, k)] += c;
                m[(n * n + i * n + k, j)] += c;
            }
            rhs[i * n + i] = ONE;
            rhs[n * n + i * n + i] = ONE;
        }
        let eps = pseudo_inverse(&m) * &rhs;
        let residual = (&m * &eps - &rhs).max_abs();
        if residual > TAU_ALG {
            return Err(Error::NotACqg(format!("no counit (residual {residual:.3e})")));
        }
        let eps: Vec<C64> = eps.iter().copied().collect();
        for i in 0..n {
            let si = self.star_coords(&unit_vec(n, i));
            let e_star: C64 = si.iter().zip(&eps).map(|(a, b)| a * b).sum();
            if (e_star - eps[i].conj()).norm() > TAU_ALG {
                return Err(Error::NotACqg("counit is not *-preserving".into()));
            }
            for j in 0..n {
                let p = self.product_coords(&unit_vec(n, i), &unit_vec(n, j));
                let e_p: C64 = p.iter().zip(&eps).map(|(a, b)| a * b).sum();
                if (e_p - eps[i] * eps[j]).norm() > TAU_ALG {
                    return Err(Error::NotACqg("counit is not multiplicative".into()));
                }
            }
        }
        let units = self.to_basis.transpose() * ComplexVector::from_vec(eps.clone());
        Ok((eps, Functional::new(&self.algebra, units.iter().copied().collect())?))
    }

    /// Left and right invariance residual of a functional given on the basis.
    pub fn invariance_residual(&self, phi_basis: &[C64]) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut left = vec![ZERO; n];
            let mut right = vec![ZERO; n];
            for &(j, k, c) in &self.comul[i] {
                left[j] += c * phi_basis[k];
                right[k] += c * phi_basis[j];
            }
            for p in 0..n {
                let target = phi_basis[i] * self.unit_coords[p];
                worst = worst.max((left[p] - target).norm()).max((right[p] - target).norm());
            }
        }
        worst
    }

    /// Haar state on the distinguished basis.
    pub fn haar_basis(&self) -> Vec<C64> {
        self.basis.iter().map(|x| self.haar.eval(x)).collect()
    }
}

fn unit_vec(n: usize, i: usize) -> Vec<C64> {
    let mut v = vec![ZERO; n];
    v[i] = ONE;
    v
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn uniform_trace(algebra: &Algebra) -> Vec<C64> {
    let total: usize = algebra.block_dims().iter().sum();
    let mut f = vec![ZERO; algebra.linear_dim()];
    for (k, &d) in algebra.block_dims().iter().enumerate() {
        for i in 0..d {
            f[algebra.unit_index(k, i, i)] = C64::new(1.0 / total as f64, 0.0);
        }
    }
    f
}

/// Orthonormal basis of the right null space (singular values below `rel_tol · s_max`).
pub(crate) fn null_space(m: &ComplexMatrix, rel_tol: f64) -> ComplexMatrix {
    let n = m.ncols();
    let padded = if m.nrows() < n {
        let mut p = ComplexMatrix::zeros(n, n);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max).max(1.0);
    let cols: Vec<usize> =
        (0..n).filter(|&i| svd.singular_values[i] <= rel_tol * smax).collect();
    let mut out = ComplexMatrix::zeros(n, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        out.set_column(c, &vt.row(i).adjoint());
    }
    out
}

/// `C(G)`: `|G|` one-dimensional blocks, `Δ(δ_g) = Σ_{hk=g} δ_h⊗δ_k`.
pub fn function_algebra_qg(group: &FiniteGroup) -> Result<FiniteCQG> {
    let n = group.order();
    let algebra = make_multimatrix(&vec![1; n])?;
    let basis: Vec<AlgElement> = (0..n).map(|g| AlgElement::matrix_unit(&algebra, g)).collect();
    let labels = (0..n).map(|g| format!("δ_{}", group.label(g))).collect();
    let comul = (0..n)
        .map(|g| (0..n).map(|h| (h, group.mul(group.inv(h), g), ONE)).collect())
        .collect();
    FiniteCQG::new(&algebra, labels, basis, comul)
}

/// `C*(G)` realized block-diagonally through its irreducible representations,
/// `Δ(λ_g) = λ_g⊗λ_g`.
pub fn group_algebra_qg(group: &FiniteGroup) -> Result<FiniteCQG> {
    let irreps = irreducible_representations(group)?;
    let dims: Vec<usize> = irreps.iter().map(|r| r[0].nrows()).collect();
    let algebra = make_multimatrix(&dims)?;
    let n = group.order();
    let mut basis = Vec::with_capacity(n);
    for g in 0..n {
        let blocks: Vec<ComplexMatrix> = irreps.iter().map(|r| r[g].clone()).collect();
        basis.push(AlgElement::from_blocks(&algebra, &blocks)?);
    }
    let labels = (0..n).map(|g| format!("λ_{}", group.label(g))).collect();
    let comul = (0..n).map(|g| vec![(g, g, ONE)]).collect();
    FiniteCQG::new(&algebra, labels, basis, comul)
}

/// One unitary representative per irreducible representation, sorted by dimension.
///
/// A random Hermitian element of the right-regular commutant splits the left
/// regular representation into irreducible eigenspaces; equal characters are
/// then identified.
pub fn irreducible_representations(group: &FiniteGroup) -> Result<Vec<Vec<ComplexMatrix>>> {
    let n = group.order();
    let left: Vec<ComplexMatrix> = (0..n)
        .map(|g| {
            let mut m = ComplexMatrix::zeros(n, n);
            for h in 0..n {
                m[(group.mul(g, h), h)] = ONE;
            }
            m
        })
        .collect();
    let right: Vec<ComplexMatrix> = (0..n)
        .map(|g| {
            let mut m = ComplexMatrix::zeros(n, n);
            for h in 0..n {
                m[(group.mul(h, group.inv(g)), h)] = ONE;
            }
            m
        })
        .collect();
    for seed in 0..16u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed + seed);
        let mut x = ComplexMatrix::zeros(n, n);
        for r in &right {
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            x += r * c;
            x += r.adjoint() * c.conj();
        }
        let eig = hermitian_eigen(&x);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for &i in &order {
            match clusters.last_mut() {
                Some(c) if (eig.eigenvalues[i] - eig.eigenvalues[*c.last().unwrap()]).abs() < 1e-7 => {
                    c.push(i)
                }
                _ => clusters.push(vec![i]),
            }
        }
        let mut reps: Vec<(Vec<C64>, Vec<ComplexMatrix>)> = Vec::new();
        let mut ok = true;
        for cl in &clusters {
            let mut v = ComplexMatrix::zeros(n, cl.len());
            for (c, &i) in cl.iter().enumerate() {
                v.set_column(c, &eig.eigenvectors.column(i));
            }
            let rho: Vec<ComplexMatrix> = left.iter().map(|l| v.adjoint() * l * &v).collect();
            let invariant = left.iter().all(|l| {
                let lv = l * &v;
                (&lv - &v * (v.adjoint() * &lv)).max_abs() < 1e-8
            });
            if !invariant {
                ok = false;
                break;
            }
            let chi: Vec<C64> = rho.iter().map(|r| r.trace()).collect();
            if !reps.iter().any(|(c, _)| max_diff(c, &chi) < 1e-6) {
                reps.push((chi, rho));
            }
        }
        let sq: usize = reps.iter().map(|(_, r)| r[0].nrows().pow(2)).sum();
        if !ok || sq != n {
            continue;
        }
        let mut out: Vec<Vec<ComplexMatrix>> = reps.into_iter().map(|(_, r)| r).collect();
        out.sort_by_key(|r| r[0].nrows());
        return Ok(out);
    }
    Err(Error::NumericalDegeneracy("could not split the regular representation".into()))
}

/// Embedding of quantum groups `src → dst` intertwining the comultiplications.
#[derive(Clone, Debug)]
pub struct QGEmbedding {
    morphism: StarMorphism,
    /// The morphism over the distinguished bases (`dst` coordinates × `src` coordinates).
    basis_matrix: ComplexMatrix,
    intertwines: bool,
}

impl QGEmbedding {
    pub fn morphism(&self) -> &StarMorphism {
        &self.morphism
    }

    pub fn intertwines(&self) -> bool {
        self.intertwines
    }

    pub fn apply(&self, x: &AlgElement) -> Result<AlgElement> {
        self.morphism.apply(x)
    }

    pub fn basis_matrix(&self) -> &ComplexMatrix {
        &self.basis_matrix
    }
}

/// Checks that `morphism` is a unital injective *-homomorphism intertwining
/// `Δ_src` and `Δ_dst`.
pub fn validate_embedding(
    src: &FiniteCQG,
    dst: &FiniteCQG,
    action: ComplexMatrix,
) -> Result<QGEmbedding> {
    let morphism = StarMorphism::new(src.algebra(), dst.algebra(), action)
        .map_err(|e| Error::EmbeddingInvalid { axiom: "*-homomorphism", detail: e.to_string() })?;
    if !morphism.is_unital() {
        return Err(Error::EmbeddingInvalid { axiom: "unital", detail: "m(1) ≠ 1".into() });
    }
    if !morphism.is_injective() {
        return Err(Error::EmbeddingInvalid { axiom: "injective", detail: "rank deficient".into() });
    }
    let ns = src.dim();
    let nd = dst.dim();
    let mut basis_matrix = ComplexMatrix::zeros(nd, ns);
    for i in 0..ns {
        let img = morphism.apply(src.basis_element(i))?;
        basis_matrix.set_column(i, &ComplexVector::from_vec(dst.basis_coords(&img)));
    }
    let mut worst: f64 = 0.0;
    for i in 0..ns {
        let lhs = dst.comultiply_coords(&basis_matrix.column(i).iter().copied().collect::<Vec<_>>());
        let mut rhs = vec![ZERO; nd * nd];
        for &(j, k, c) in &src.comul()[i] {
            for p in 0..nd {
                let a = basis_matrix[(p, j)];
                if a.norm() <= DROP {
                    continue;
                }
                for q in 0..nd {
                    rhs[p * nd + q] += c * a * basis_matrix[(q, k)];
                }
            }
        }
        worst = worst.max(max_diff(&lhs, &rhs));
    }
    if worst > TAU_ALG {
        return Err(Error::EmbeddingInvalid {
            axiom: "intertwining",
            detail: format!("Δ∘m ≠ (m⊗m)∘Δ (residual {worst:.3e})"),
        });
    }
    Ok(QGEmbedding { morphism, basis_matrix, intertwines: true })
}

/// Matrix (over matrix units) of the map sending basis element `x_i` of `src`
/// to `Σ_p images[i][p] y_p` in `dst`.
pub fn morphism_from_basis_images(
    src: &FiniteCQG,
    dst: &FiniteCQG,
    images: &[Vec<C64>],
) -> Result<ComplexMatrix> {
    if images.len() != src.dim() || images.iter().any(|v| v.len() != dst.dim()) {
        return Err(Error::InvalidInput("basis image table has the wrong shape".into()));
    }
    let mut on_basis = ComplexMatrix::zeros(dst.algebra().linear_dim(), src.dim());
    for (i, v) in images.iter().enumerate() {
        on_basis.set_column(i, &dst.from_basis_coords(v).to_vector());
    }
    Ok(on_basis * &src.to_basis)
}

/// Sign of a generator letter: `u^{+1} = u`, `u^{−1} = u*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn both() -> [Sign; 2] {
        [Sign::Plus, Sign::Minus]
    }
}

impl std::ops::Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        self.flip()
    }
}

/// The datum `(A, B, ι, θ, E₁, E₋₁)` plus the adapted bases shared by the
/// symbolic engine and the Fock builder. `B₁ = ι(B)` and `B₋₁ = θ(B)`.
#[derive(Clone, Debug)]
pub struct HnnInput {
    name: String,
    a: FiniteCQG,
    b: FiniteCQG,
    iota: QGEmbedding,
    theta: QGEmbedding,
    expectations: [CondExpectation; 2],
    /// `θ^ε : B_ε → B_{−ε}` as matrices over the matrix units of `A`.
    transport: [ComplexMatrix; 2],
    /// `ι⁻¹` on `ι(B)`, matrix units of `A` → matrix units of `B`.
    iota_inverse: ComplexMatrix,
    kernel: [Vec<AlgElement>; 2],
    adapted: [Vec<AlgElement>; 2],
}

/// Builds `E₁`, `E₋₁` from the Haar state of `A` and checks Haar compatibility
/// and the invariance property `(id⊗E)∘Δ_A = (E⊗id)∘Δ_A = Δ_A∘E`.
pub fn build_hnn_input(
    name: &str,
    a: FiniteCQG,
    b: FiniteCQG,
    iota: QGEmbedding,
    theta: QGEmbedding,
) -> Result<HnnInput> {
    for emb in [&iota, &theta] {
        if emb.morphism().domain().id() != b.algebra().id()
            || emb.morphism().codomain().id() != a.algebra().id()
        {
            return Err(Error::InvalidInput("embeddings must map B into A".into()));
        }
    }
    let phi_a = a.haar().clone();
    let mut exps = Vec::with_capacity(2);
    for emb in [&iota, &theta] {
        let images: Vec<AlgElement> =
            b.basis().iter().map(|x| emb.apply(x)).collect::<Result<_>>()?;
        exps.push(conditional_expectation(a.algebra(), &images, &phi_a)?);
    }
    let expectations: [CondExpectation; 2] = [exps[0].clone(), exps[1].clone()];
    let iota_inverse = iota.morphism().left_inverse();
    let theta_inverse = theta.morphism().left_inverse();
    let transport = [
        theta.morphism().action() * &iota_inverse,
        iota.morphism().action() * &theta_inverse,
    ];
    let mut kernel: [Vec<AlgElement>; 2] = [Vec::new(), Vec::new()];
    let mut adapted: [Vec<AlgElement>; 2] = [Vec::new(), Vec::new()];
    for s in Sign::both() {
        let e = &expectations[s.index()];
        kernel[s.index()] = e.kernel_onb(a.basis());
        let mut full = e.image_onb().to_vec();
        full.extend(kernel[s.index()].iter().cloned());
        if full.len() != a.dim() {
            return Err(Error::NumericalDegeneracy("adapted basis has the wrong size".into()));
        }
        adapted[s.index()] = full;
    }
    let input = HnnInput {
        name: name.to_string(),
        a,
        b,
        iota,
        theta,
        expectations,
        transport,
        iota_inverse,
        kernel,
        adapted,
    };
    input.check_haar_compatibility()?;
    Ok(input)
}

impl HnnInput {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a(&self) -> &FiniteCQG {
        &self.a
    }

    pub fn b(&self) -> &FiniteCQG {
        &self.b
    }

    pub fn iota(&self) -> &QGEmbedding {
        &self.iota
    }

    pub fn theta(&self) -> &QGEmbedding {
        &self.theta
    }

    pub fn expectation(&self, s: Sign) -> &CondExpectation {
        &self.expectations[s.index()]
    }

    /// `E_ε(x)`.
    pub fn expect(&self, s: Sign, x: &AlgElement) -> AlgElement {
        self.expectations[s.index()].apply(x)
    }

    /// `θ^ε(x)` for `x ∈ B_ε`.
    pub fn transport(&self, s: Sign, x: &AlgElement) -> AlgElement {
        AlgElement::from_vector(self.a.algebra(), &(&self.transport[s.index()] * x.to_vector()))
    }

    pub fn transport_matrix(&self, s: Sign) -> &ComplexMatrix {
        &self.transport[s.index()]
    }

    /// `θ^{−ε}∘E_{−ε}`, the `B_ε`-valued map contracting a `H_{−ε}` leg.
    pub fn contract(&self, s: Sign, x: &AlgElement) -> AlgElement {
        self.transport(-s, &self.expect(-s, x))
    }

    /// Pulls an element of `ι(B)` back to `B`.
    pub fn to_b(&self, x: &AlgElement) -> AlgElement {
        AlgElement::from_vector(self.b.algebra(), &(&self.iota_inverse * x.to_vector()))
    }

    /// Images in `A` of the distinguished basis of `B` inside `B_ε`.
    pub fn b_basis_in(&self, s: Sign) -> Vec<AlgElement> {
        let emb = match s {
            Sign::Plus => &self.iota,
            Sign::Minus => &self.theta,
        };
        self.b.basis().iter().map(|x| emb.apply(x).expect("basis of B")).collect()
    }

    /// φ-orthonormal basis of `ker E_ε` from ordered Gram–Schmidt on the basis of `A`.
    pub fn kernel_onb(&self, s: Sign) -> &[AlgElement] {
        &self.kernel[s.index()]
    }

    /// Orthonormal basis of `A` adapted to `B_ε ⊕ ker E_ε`; the first element is `1`.
    pub fn adapted_onb(&self, s: Sign) -> &[AlgElement] {
        &self.adapted[s.index()]
    }

    pub fn phi_a(&self, x: &AlgElement) -> C64 {
        self.a.haar().eval(x)
    }

    pub fn counit_a(&self, x: &AlgElement) -> C64 {
        self.a.counit().eval(x)
    }

    /// Worst residual of the Haar-compatibility identities.
    pub fn check_haar_compatibility(&self) -> Result<()> {
        let phi_a = self.a.haar();
        let phi_b = self.b.haar();
        let mut worst: f64 = 0.0;
        for x in self.a.basis() {
            for s in Sign::both() {
                worst = worst.max((phi_a.eval(&self.expect(s, x)) - phi_a.eval(x)).norm());
            }
        }
        for y in self.b.basis() {
            for emb in [&self.iota, &self.theta] {
                worst = worst.max((phi_a.eval(&emb.apply(y)?) - phi_b.eval(y)).norm());
            }
        }
        if worst > TAU_ALG {
            return Err(Error::HaarIncompatible(format!("φ_A∘E or φ_A∘θ mismatch ({worst:.3e})")));
        }
        let r = self.invariance_residual();
        if r > TAU_ALG {
            return Err(Error::HaarIncompatible(format!("invariance residual {r:.3e}")));
        }
        Ok(())
    }

    /// `max |(id⊗E)Δ − ΔE|, |(E⊗id)Δ − ΔE|` over the basis of `A`, both signs.
    pub fn invariance_residual(&self) -> f64 {
        let n = self.a.dim();
        let mut worst: f64 = 0.0;
        for s in Sign::both() {
            let e_basis: Vec<Vec<C64>> =
                self.a.basis().iter().map(|x| self.a.basis_coords(&self.expect(s, x))).collect();
            for i in 0..n {
                let rhs = self.a.comultiply_coords(&e_basis[i]);
                let mut left = vec![ZERO; n * n];
                let mut right = vec![ZERO; n * n];
                for &(j, k, c) in &self.a.comul()[i] {
                    for p in 0..n {
                        left[j * n + p] += c * e_basis[k][p];
                        right[p * n + k] += c * e_basis[j][p];
                    }
                }
                worst = worst.max(max_diff(&left, &rhs)).max(max_diff(&right, &rhs));
            }
        }
        worst
    }

    /// `max |ε(θ(b)) − ε(ι(b))|` over the basis of `B`.
    pub fn counit_theta_residual(&self) -> f64 {
        self.b
            .basis()
            .iter()
            .map(|y| {
                let t = self.theta.apply(y).expect("basis of B");
                let i = self.iota.apply(y).expect("basis of B");
                (self.counit_a(&t) - self.counit_a(&i)).norm()
            })
            .fold(0.0, f64::max)
    }
}
