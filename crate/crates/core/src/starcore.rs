//! Finite-dimensional C*-algebras realized as direct sums of matrix blocks.
//!
//! Everything downstream (the base algebra `A`, the subalgebra `B`, the image
//! `θ(B)`) is an instance of [`MultiMatrixAlgebra`]. Elements are stored as a
//! flat coordinate vector over the matrix-unit basis, block by block, row
//! major inside each block.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Absolute tolerance for algebraic identities on unit-normalized data.
pub const TAU_ALG: f64 = 1e-9;
/// Relative tolerance for Gram-matrix rank decisions.
pub const TAU_GRAM: f64 = 1e-8;

/// Coefficients below this are treated as exact zeros when expanding over a basis.
pub(crate) const DROP: f64 = 1e-13;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

static NEXT_ALGEBRA_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, PartialEq, Eq)]
pub struct MultiMatrixAlgebra {
    id: u64,
    block_dims: Vec<usize>,
    offsets: Vec<usize>,
    linear_dim: usize,
}

pub type Algebra = Arc<MultiMatrixAlgebra>;

/// Builds `M_{d₁} ⊕ … ⊕ M_{d_m}`.
pub fn make_multimatrix(block_dims: &[usize]) -> Result<Algebra> {
    if block_dims.is_empty() {
        return Err(Error::InvalidInput("block list is empty".into()));
    }
    if block_dims.contains(&0) {
        return Err(Error::InvalidInput("block dimension 0".into()));
    }
    let mut offsets = Vec::with_capacity(block_dims.len());
    let mut acc = 0;
    for &d in block_dims {
        offsets.push(acc);
        acc += d * d;
    }
    Ok(Arc::new(MultiMatrixAlgebra {
        id: NEXT_ALGEBRA_ID.fetch_add(1, Ordering::Relaxed),
        block_dims: block_dims.to_vec(),
        offsets,
        linear_dim: acc,
    }))
}

impl MultiMatrixAlgebra {
    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn linear_dim(&self) -> usize {
        self.linear_dim
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Flat index of the matrix unit `e_{ij}` in block `k`.
    pub fn unit_index(&self, k: usize, i: usize, j: usize) -> usize {
        self.offsets[k] + i * self.block_dims[k] + j
    }

    /// Inverse of [`Self::unit_index`].
    pub fn unit_position(&self, idx: usize) -> (usize, usize, usize) {
        let k = match self.offsets.binary_search(&idx) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let d = self.block_dims[k];
        let r = idx - self.offsets[k];
        (k, r / d, r % d)
    }
}

/// Element of a [`MultiMatrixAlgebra`]. Arithmetic between elements of
/// different algebras panics through the operator impls and returns
/// [`Error::AlgebraMismatch`] through the `checked_*` methods.
#[derive(Clone)]
pub struct AlgElement {
    algebra: Algebra,
    data: Vec<C64>,
}

impl fmt::Debug for AlgElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgElement")
            .field("algebra", &self.algebra.id)
            .field("blocks", &self.algebra.block_dims)
            .field("data", &self.data)
            .finish()
    }
}

impl AlgElement {
    pub fn zero(algebra: &Algebra) -> Self {
        AlgElement { algebra: algebra.clone(), data: vec![ZERO; algebra.linear_dim] }
    }

    pub fn one(algebra: &Algebra) -> Self {
        let mut e = Self::zero(algebra);
        for (k, &d) in algebra.block_dims.iter().enumerate() {
            for i in 0..d {
                e.data[algebra.unit_index(k, i, i)] = ONE;
            }
        }
        e
    }

    pub fn matrix_unit(algebra: &Algebra, idx: usize) -> Self {
        let mut e = Self::zero(algebra);
        e.data[idx] = ONE;
        e
    }

    pub fn from_coords(algebra: &Algebra, data: Vec<C64>) -> Result<Self> {
        if data.len() != algebra.linear_dim {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                algebra.linear_dim,
                data.len()
            )));
        }
        Ok(AlgElement { algebra: algebra.clone(), data })
    }

    pub(crate) fn from_vector(algebra: &Algebra, v: &ComplexVector) -> Self {
        debug_assert_eq!(v.len(), algebra.linear_dim);
        AlgElement { algebra: algebra.clone(), data: v.iter().copied().collect() }
    }

    pub fn from_blocks(algebra: &Algebra, blocks: &[ComplexMatrix]) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(Error::InvalidInput("wrong number of blocks".into()));
        }
        let mut e = Self::zero(algebra);
        for (k, b) in blocks.iter().enumerate() {
            let d = algebra.block_dims[k];
            if b.nrows() != d || b.ncols() != d {
                return Err(Error::InvalidInput(format!("block {k} must be {d}x{d}")));
            }
            for i in 0..d {
                for j in 0..d {
                    e.data[algebra.unit_index(k, i, j)] = b[(i, j)];
                }
            }
        }
        Ok(e)
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn coords(&self) -> &[C64] {
        &self.data
    }

    pub fn to_vector(&self) -> ComplexVector {
        ComplexVector::from_column_slice(&self.data)
    }

    pub fn block(&self, k: usize) -> ComplexMatrix {
        let d = self.algebra.block_dims[k];
        let off = self.algebra.offsets[k];
        ComplexMatrix::from_row_slice(d, d, &self.data[off..off + d * d])
    }

    pub fn same_algebra(&self, other: &AlgElement) -> bool {
        self.algebra.id == other.algebra.id
    }

    fn check(&self, other: &AlgElement) -> Result<()> {
        if self.same_algebra(other) {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch { left: self.algebra.id, right: other.algebra.id })
        }
    }

    pub fn checked_mul(&self, other: &AlgElement) -> Result<AlgElement> {
        self.check(other)?;
        let mut out = vec![ZERO; self.data.len()];
        for (k, &d) in self.algebra.block_dims.iter().enumerate() {
            let off = self.algebra.offsets[k];
            let a = &self.data[off..off + d * d];
            let b = &other.data[off..off + d * d];
            let c = &mut out[off..off + d * d];
            for i in 0..d {
                for l in 0..d {
                    let ail = a[i * d + l];
                    if ail == ZERO {
                        continue;
                    }
                    for j in 0..d {
                        c[i * d + j] += ail * b[l * d + j];
                    }
                }
            }
        }
        Ok(AlgElement { algebra: self.algebra.clone(), data: out })
    }

    pub fn checked_add(&self, other: &AlgElement) -> Result<AlgElement> {
        self.check(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(AlgElement { algebra: self.algebra.clone(), data })
    }

    pub fn checked_sub(&self, other: &AlgElement) -> Result<AlgElement> {
        self.check(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(AlgElement { algebra: self.algebra.clone(), data })
    }

    pub fn scale(&self, c: C64) -> AlgElement {
        AlgElement { algebra: self.algebra.clone(), data: self.data.iter().map(|x| x * c).collect() }
    }

    /// Blockwise conjugate transpose.
    pub fn star(&self) -> AlgElement {
        let mut out = vec![ZERO; self.data.len()];
        for (k, &d) in self.algebra.block_dims.iter().enumerate() {
            let off = self.algebra.offsets[k];
            for i in 0..d {
                for j in 0..d {
                    out[off + j * d + i] = self.data[off + i * d + j].conj();
                }
            }
        }
        AlgElement { algebra: self.algebra.clone(), data: out }
    }

    /// Largest absolute coordinate.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_negligible(&self) -> bool {
        self.max_abs() <= DROP
    }

    /// Operator norm distance `‖self − other‖`.
    pub fn distance(&self, other: &AlgElement) -> f64 {
        operator_norm(&(self - other))
    }
}

impl PartialEq for AlgElement {
    fn eq(&self, other: &Self) -> bool {
        self.same_algebra(other) && self.data == other.data
    }
}

impl<'a> Mul<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn mul(self, rhs: &'a AlgElement) -> AlgElement {
        self.checked_mul(rhs).expect("product of elements from different algebras")
    }
}

impl<'a> Add<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn add(self, rhs: &'a AlgElement) -> AlgElement {
        self.checked_add(rhs).expect("sum of elements from different algebras")
    }
}

impl<'a> Sub<&'a AlgElement> for &'a AlgElement {
    type Output = AlgElement;
    fn sub(self, rhs: &'a AlgElement) -> AlgElement {
        self.checked_sub(rhs).expect("difference of elements from different algebras")
    }
}

impl Neg for &AlgElement {
    type Output = AlgElement;
    fn neg(self) -> AlgElement {
        self.scale(-ONE)
    }
}

/// Largest entry modulus of a complex matrix or vector.
pub trait MaxAbs {
    fn max_abs(&self) -> f64;
}

impl<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<C64, R, C>> MaxAbs
    for nalgebra::Matrix<C64, R, C, S>
{
    fn max_abs(&self) -> f64 {
        self.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Max over blocks of the largest singular value.
pub fn operator_norm(a: &AlgElement) -> f64 {
    (0..a.algebra.num_blocks())
        .map(|k| {
            let b = a.block(k);
            if b.len() == 1 {
                b[(0, 0)].norm()
            } else {
                spectral_norm(&b)
            }
        })
        .fold(0.0, f64::max)
}

/// Largest singular value of a dense matrix (0 for an empty matrix).
pub fn spectral_norm(m: &ComplexMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Singular values sorted in decreasing order.
pub fn sorted_singular_values(m: &ComplexMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Star-homomorphism between multimatrix algebras, given by its matrix over the
/// matrix-unit bases.
#[derive(Clone, Debug)]
pub struct StarMorphism {
    domain: Algebra,
    codomain: Algebra,
    action: ComplexMatrix,
    unital: bool,
    injective: bool,
}

impl StarMorphism {
    /// Validates multiplicativity and *-compatibility on the full matrix-unit basis.
    pub fn new(domain: &Algebra, codomain: &Algebra, action: ComplexMatrix) -> Result<Self> {
        if action.nrows() != codomain.linear_dim || action.ncols() != domain.linear_dim {
            return Err(Error::InvalidInput("morphism matrix has the wrong shape".into()));
        }
        let m = StarMorphism {
            domain: domain.clone(),
            codomain: codomain.clone(),
            action,
            unital: false,
            injective: false,
        };
        let units: Vec<AlgElement> =
            (0..domain.linear_dim).map(|i| AlgElement::matrix_unit(domain, i)).collect();
        let images: Vec<AlgElement> = units.iter().map(|u| m.apply_unchecked(u)).collect();
        for (i, ui) in units.iter().enumerate() {
            let star_res = m.apply_unchecked(&ui.star()).distance(&images[i].star());
            if star_res > TAU_ALG {
                return Err(Error::InvalidMorphism(format!(
                    "not *-preserving on unit {i} (residual {star_res:.3e})"
                )));
            }
            for (j, uj) in units.iter().enumerate() {
                let lhs = m.apply_unchecked(&(ui * uj));
                let rhs = &images[i] * &images[j];
                let r = lhs.distance(&rhs);
                if r > TAU_ALG {
                    return Err(Error::InvalidMorphism(format!(
                        "not multiplicative on units ({i},{j}) (residual {r:.3e})"
                    )));
                }
            }
        }
        let unital = m.apply_unchecked(&AlgElement::one(domain)).distance(&AlgElement::one(codomain))
            <= TAU_ALG;
        let injective = numerical_rank(&m.action, TAU_ALG) == domain.linear_dim;
        Ok(StarMorphism { unital, injective, ..m })
    }

    fn apply_unchecked(&self, x: &AlgElement) -> AlgElement {
        AlgElement::from_vector(&self.codomain, &(&self.action * x.to_vector()))
    }

    pub fn apply(&self, x: &AlgElement) -> Result<AlgElement> {
        if x.algebra.id != self.domain.id {
            return Err(Error::AlgebraMismatch { left: self.domain.id, right: x.algebra.id });
        }
        Ok(self.apply_unchecked(x))
    }

    pub fn domain(&self) -> &Algebra {
        &self.domain
    }

    pub fn codomain(&self) -> &Algebra {
        &self.codomain
    }

    pub fn action(&self) -> &ComplexMatrix {
        &self.action
    }

    pub fn is_unital(&self) -> bool {
        self.unital
    }

    pub fn is_injective(&self) -> bool {
        self.injective
    }

    /// Left inverse on the image, as a codomain → domain linear map.
    pub fn left_inverse(&self) -> ComplexMatrix {
        pseudo_inverse(&self.action)
    }
}

/// Moore–Penrose pseudo-inverse through the SVD.
pub fn pseudo_inverse(m: &ComplexMatrix) -> ComplexMatrix {
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut out = ComplexMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-12 * smax.max(1e-300) {
            let vk = vt.row(k).adjoint();
            let uk = u.column(k).adjoint();
            out += (vk * uk) * C64::new(1.0 / s, 0.0);
        }
    }
    out
}

pub fn numerical_rank(m: &ComplexMatrix, rel_tol: f64) -> usize {
    let s = sorted_singular_values(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Linear functional `a ↦ Σ f_i a_i` over the matrix-unit coordinates.
#[derive(Clone, Debug)]
pub struct Functional {
    algebra: Algebra,
    coeffs: Vec<C64>,
}

impl Functional {
    pub fn new(algebra: &Algebra, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != algebra.linear_dim {
            return Err(Error::InvalidInput("functional has the wrong length".into()));
        }
        Ok(Functional { algebra: algebra.clone(), coeffs })
    }

    pub fn eval(&self, a: &AlgElement) -> C64 {
        assert!(a.algebra.id == self.algebra.id, "functional applied to a foreign element");
        self.coeffs.iter().zip(&a.data).map(|(f, x)| f * x).sum()
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Density matrix of block `k`: `φ(a) = Σ_k tr(ρ_k a_k)`.
    pub fn density(&self, k: usize) -> ComplexMatrix {
        let d = self.algebra.block_dims[k];
        ComplexMatrix::from_fn(d, d, |j, i| self.coeffs[self.algebra.unit_index(k, i, j)])
    }
}

/// Positive unital functional.
#[derive(Clone, Debug)]
pub struct State {
    functional: Functional,
    faithful: bool,
}

impl State {
    pub fn new(functional: Functional) -> Result<Self> {
        let alg = functional.algebra.clone();
        let unit = functional.eval(&AlgElement::one(&alg));
        if (unit - ONE).norm() > TAU_ALG {
            return Err(Error::InvalidState(format!("φ(1) = {unit}, expected 1")));
        }
        let mut faithful = true;
        for k in 0..alg.num_blocks() {
            let rho = functional.density(k);
            let herm = (&rho - rho.adjoint()).max_abs();
            if herm > TAU_ALG {
                return Err(Error::InvalidState(format!("density of block {k} is not Hermitian")));
            }
            let eig = hermitian_eigen(&rho);
            for &l in eig.eigenvalues.iter() {
                if l < -TAU_ALG {
                    return Err(Error::InvalidState(format!(
                        "negative weight {l:.3e} in block {k}"
                    )));
                }
                if l <= TAU_ALG {
                    faithful = false;
                }
            }
        }
        Ok(State { functional, faithful })
    }

    pub fn eval(&self, a: &AlgElement) -> C64 {
        self.functional.eval(a)
    }

    /// `⟨x, y⟩ = φ(x*y)`.
    pub fn inner(&self, x: &AlgElement, y: &AlgElement) -> C64 {
        self.eval(&(&x.star() * y))
    }

    pub fn is_faithful(&self) -> bool {
        self.faithful
    }

    pub fn algebra(&self) -> &Algebra {
        &self.functional.algebra
    }

    pub fn functional(&self) -> &Functional {
        &self.functional
    }
}

pub(crate) struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

/// Eigendecomposition of a Hermitian matrix (Hermitian part is taken first).
pub(crate) fn hermitian_eigen(m: &ComplexMatrix) -> HermitianEigen {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = h.symmetric_eigen();
    HermitianEigen { eigenvalues: e.eigenvalues.iter().copied().collect(), eigenvectors: e.eigenvectors }
}

/// Quotient of a finite-dimensional pre-Hilbert space by the kernel of its Gram form.
#[derive(Clone, Debug)]
pub struct FHilbert {
    ambient_dim: usize,
    /// Columns are coordinates (over the spanning set) of an orthonormal basis.
    onb: ComplexMatrix,
    /// `onbᴴ · gram`: maps spanning-set coefficients to coordinates in the basis.
    coord_map: ComplexMatrix,
    kernel_dim: usize,
}

impl FHilbert {
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.onb.ncols()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim
    }

    pub fn onb(&self) -> &ComplexMatrix {
        &self.onb
    }

    pub fn coord_map(&self) -> &ComplexMatrix {
        &self.coord_map
    }
}

/// Separation step of a GNS-type construction: orthonormal basis of the quotient
/// of the span of the index set by the kernel of `gram`.
///
/// Eigenvalues below `tau · λ_max` are kernel; eigenvalues below `−tau · λ_max`
/// are rejected.
pub fn gram_quotient(gram: &ComplexMatrix, tau: f64) -> Result<FHilbert> {
    let n = gram.nrows();
    if gram.ncols() != n {
        return Err(Error::InvalidInput("Gram matrix is not square".into()));
    }
    if n == 0 {
        return Ok(FHilbert {
            ambient_dim: 0,
            onb: ComplexMatrix::zeros(0, 0),
            coord_map: ComplexMatrix::zeros(0, 0),
            kernel_dim: 0,
        });
    }
    let scale = gram.max_abs().max(1e-300);
    let asym = (gram - gram.adjoint()).max_abs();
    if asym > tau * scale {
        return Err(Error::NotPositive(format!("Gram matrix is not Hermitian ({asym:.3e})")));
    }
    let eig = hermitian_eigen(gram);
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    if let Some(&min) = eig.eigenvalues.iter().min_by(|a, b| a.partial_cmp(b).unwrap()) {
        if min < -tau * lmax.max(scale) {
            return Err(Error::NotPositive(format!(
                "Gram eigenvalue {min:.3e} below −τ·λmax"
            )));
        }
    }
    let keep: Vec<usize> =
        order.into_iter().filter(|&i| lmax > 0.0 && eig.eigenvalues[i] > tau * lmax).collect();
    let r = keep.len();
    let mut onb = ComplexMatrix::zeros(n, r);
    let mut coord_map = ComplexMatrix::zeros(r, n);
    for (c, &i) in keep.iter().enumerate() {
        let l = eig.eigenvalues[i];
        let v = eig.eigenvectors.column(i);
        onb.set_column(c, &(v * C64::new(1.0 / l.sqrt(), 0.0)));
        coord_map.set_row(c, &(v.adjoint() * C64::new(l.sqrt(), 0.0)));
    }
    Ok(FHilbert { ambient_dim: n, onb, coord_map, kernel_dim: n - r })
}

/// GNS space of a state, spanned by the matrix units.
#[derive(Clone, Debug)]
pub struct GnsSpace {
    state: State,
    units: Vec<AlgElement>,
    space: FHilbert,
}

/// GNS construction of a positive unital functional.
pub fn gns_space(algebra: &Algebra, phi: &State) -> Result<GnsSpace> {
    if phi.algebra().id != algebra.id {
        return Err(Error::InvalidState("state lives on another algebra".into()));
    }
    let units: Vec<AlgElement> =
        (0..algebra.linear_dim).map(|i| AlgElement::matrix_unit(algebra, i)).collect();
    let n = units.len();
    let gram = ComplexMatrix::from_fn(n, n, |i, j| phi.inner(&units[i], &units[j]));
    let space = gram_quotient(&gram, TAU_GRAM)?;
    Ok(GnsSpace { state: phi.clone(), units, space })
}

impl GnsSpace {
    pub fn space(&self) -> &FHilbert {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Coordinates of the class `x̂`.
    pub fn vector(&self, x: &AlgElement) -> ComplexVector {
        let ip = ComplexVector::from_iterator(
            self.units.len(),
            self.units.iter().map(|u| self.state.inner(u, x)),
        );
        self.space.onb.adjoint() * ip
    }

    /// Left multiplication by `a` on the quotient.
    pub fn represent(&self, a: &AlgElement) -> ComplexMatrix {
        let n = self.units.len();
        let ip = ComplexMatrix::from_fn(n, n, |i, j| {
            self.state.inner(&self.units[i], &(a * &self.units[j]))
        });
        self.space.onb.adjoint() * ip * &self.space.onb
    }
}

/// Ordered Gram–Schmidt under `inner`, skipping vectors that are dependent
/// (relative residual norm below `1e-10`). Preserves sparsity for
/// already-orthogonal inputs.
pub fn orthonormalize<F>(vectors: &[AlgElement], inner: F) -> Vec<AlgElement>
where
    F: Fn(&AlgElement, &AlgElement) -> C64,
{
    let mut out: Vec<AlgElement> = Vec::new();
    for v in vectors {
        let n0 = inner(v, v).re.max(0.0).sqrt();
        if n0 <= DROP {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &out {
                let c = inner(e, &w);
                if c.norm() > 0.0 {
                    w = &w - &e.scale(c);
                }
            }
        }
        let n = inner(&w, &w).re.max(0.0).sqrt();
        if n > 1e-10 * n0 {
            let mut e = w.scale(C64::new(1.0 / n, 0.0));
            clean(&mut e);
            out.push(e);
        }
    }
    out
}

/// Zeroes coordinates that are numerically zero.
pub(crate) fn clean(e: &mut AlgElement) {
    for c in e.data.iter_mut() {
        if c.re.abs() <= 1e-15 {
            c.re = 0.0;
        }
        if c.im.abs() <= 1e-15 {
            c.im = 0.0;
        }
    }
}

/// Conditional expectation onto a unital *-subalgebra, realized as the
/// orthogonal projection for the form `φ(x*y)`.
#[derive(Clone, Debug)]
pub struct CondExpectation {
    algebra: Algebra,
    state: State,
    onb: Vec<AlgElement>,
    projection: ComplexMatrix,
}

/// Builds the φ-preserving conditional expectation onto the *-subalgebra
/// spanned by `image_basis` (the unit is adjoined to the spanning set).
pub fn conditional_expectation(
    algebra: &Algebra,
    image_basis: &[AlgElement],
    phi: &State,
) -> Result<CondExpectation> {
    if !phi.is_faithful() {
        return Err(Error::InvalidState("conditional expectation needs a faithful state".into()));
    }
    if phi.algebra().id != algebra.id {
        return Err(Error::InvalidState("state lives on another algebra".into()));
    }
    let mut span = vec![AlgElement::one(algebra)];
    for b in image_basis {
        if b.algebra.id != algebra.id {
            return Err(Error::AlgebraMismatch { left: algebra.id, right: b.algebra.id });
        }
        span.push(b.clone());
    }
    let onb = orthonormalize(&span, |x, y| phi.inner(x, y));
    let n = algebra.linear_dim;
    let mut projection = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let u = AlgElement::matrix_unit(algebra, i);
        let mut img = AlgElement::zero(algebra);
        for e in &onb {
            img = &img + &e.scale(phi.inner(e, &u));
        }
        projection.set_column(i, &img.to_vector());
    }
    let e = CondExpectation { algebra: algebra.clone(), state: phi.clone(), onb, projection };
    e.verify_subalgebra()?;
    e.verify_expectation()?;
    Ok(e)
}

impl CondExpectation {
    pub fn apply(&self, a: &AlgElement) -> AlgElement {
        assert!(a.algebra.id == self.algebra.id, "expectation applied to a foreign element");
        AlgElement::from_vector(&self.algebra, &(&self.projection * a.to_vector()))
    }

    /// φ-orthonormal basis of the image, starting with the unit.
    pub fn image_onb(&self) -> &[AlgElement] {
        &self.onb
    }

    pub fn image_dim(&self) -> usize {
        self.onb.len()
    }

    pub fn projection(&self) -> &ComplexMatrix {
        &self.projection
    }

    pub fn algebra(&self) -> &Algebra {
        &self.algebra
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Orthonormal basis of `ker E`, obtained by ordered Gram–Schmidt of
    /// `(1 − E)` applied to `spanning`.
    pub fn kernel_onb(&self, spanning: &[AlgElement]) -> Vec<AlgElement> {
        let projected: Vec<AlgElement> = spanning.iter().map(|x| x - &self.apply(x)).collect();
        let onb = orthonormalize(&projected, |x, y| self.state.inner(x, y));
        debug_assert_eq!(onb.len() + self.onb.len(), self.algebra.linear_dim);
        onb
    }

    fn verify_subalgebra(&self) -> Result<()> {
        for x in &self.onb {
            let r = x.star().distance(&self.apply(&x.star()));
            if r > TAU_ALG {
                return Err(Error::NotASubalgebra(format!("not closed under *: residual {r:.3e}")));
            }
            for y in &self.onb {
                let p = x * y;
                let r = p.distance(&self.apply(&p));
                if r > TAU_ALG {
                    return Err(Error::NotASubalgebra(format!(
                        "not closed under products: residual {r:.3e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bimodule property over the image basis and the full matrix-unit basis,
    /// idempotence, and positivity on squares of matrix units.
    fn verify_expectation(&self) -> Result<()> {
        let n = self.algebra.linear_dim;
        let sq = &self.projection * &self.projection;
        let idem = (&sq - &self.projection).max_abs();
        if idem > TAU_ALG {
            return Err(Error::NotASubalgebra(format!("projection not idempotent ({idem:.3e})")));
        }
        for i in 0..n {
            let a = AlgElement::matrix_unit(&self.algebra, i);
            let ea = self.apply(&a);
            for b1 in &self.onb {
                for b2 in &self.onb {
                    let lhs = self.apply(&(&(b1 * &a) * b2));
                    let rhs = &(b1 * &ea) * b2;
                    let r = lhs.distance(&rhs);
                    if r > TAU_ALG {
                        return Err(Error::NotASubalgebra(format!(
                            "orthogonal projection is not a bimodule map (residual {r:.3e})"
                        )));
                    }
                }
            }
            let pos = self.apply(&(&a.star() * &a));
            for k in 0..self.algebra.num_blocks() {
                let eig = hermitian_eigen(&pos.block(k));
                if eig.eigenvalues.iter().any(|&l| l < -TAU_ALG) {
                    return Err(Error::NotASubalgebra("expectation is not positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// `[re, im]` pairs for JSON dumps of matrices.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixDump {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl From<&ComplexMatrix> for MatrixDump {
    fn from(m: &ComplexMatrix) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        MatrixDump { rows: m.nrows(), cols: m.ncols(), entries }
    }
}

impl MatrixDump {
    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        if self.entries.len() != self.rows * self.cols {
            return Err(Error::InvalidInput("entries array has the wrong length".into()));
        }
        Ok(ComplexMatrix::from_row_iterator(
            self.rows,
            self.cols,
            self.entries.iter().map(|[re, im]| C64::new(*re, *im)),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_element(alg: &Algebra, rng: &mut ChaCha8Rng) -> AlgElement {
        let data =
            (0..alg.linear_dim()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        AlgElement::from_coords(alg, data.collect()).unwrap()
    }

    #[test]
    fn multimatrix_shapes() {
        let a = make_multimatrix(&[1]).unwrap();
        assert_eq!(a.linear_dim(), 1);
        assert_eq!(make_multimatrix(&[1, 1]).unwrap().linear_dim(), 2);
        assert_eq!(make_multimatrix(&[1, 1, 2]).unwrap().linear_dim(), 6);
        assert!(matches!(make_multimatrix(&[]), Err(Error::InvalidInput(_))));
        assert!(matches!(make_multimatrix(&[2, 0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn unit_is_two_sided_identity() {
        let alg = make_multimatrix(&[1, 2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one = AlgElement::one(&alg);
        for _ in 0..10 {
            let a = random_element(&alg, &mut rng);
            assert!((&one * &a).distance(&a) < 1e-14);
            assert!((&a * &one).distance(&a) < 1e-14);
        }
    }

    #[test]
    fn involution_reverses_products() {
        let alg = make_multimatrix(&[2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_element(&alg, &mut rng);
        let b = random_element(&alg, &mut rng);
        assert!(a.star().star().distance(&a) < 1e-15);
        assert!((&a * &b).star().distance(&(&b.star() * &a.star())) < 1e-12);
    }

    #[test]
    fn mixing_algebras_is_an_error() {
        let a = make_multimatrix(&[1, 1]).unwrap();
        let b = make_multimatrix(&[1, 1]).unwrap();
        let x = AlgElement::one(&a);
        let y = AlgElement::one(&b);
        assert!(matches!(x.checked_mul(&y), Err(Error::AlgebraMismatch { .. })));
        assert!(x.checked_add(&y).is_err());
    }

    #[test]
    fn operator_norm_examples() {
        let alg = make_multimatrix(&[1, 2]).unwrap();
        assert!((operator_norm(&AlgElement::one(&alg)) - 1.0).abs() < 1e-14);
        let p = AlgElement::from_blocks(
            &alg,
            &[
                ComplexMatrix::from_element(1, 1, c(0.0)),
                ComplexMatrix::from_row_slice(2, 2, &[c(0.5), c(0.5), c(0.5), c(0.5)]),
            ],
        )
        .unwrap();
        assert!((operator_norm(&p) - 1.0).abs() < 1e-12);
        // (1 + λ_g)/2 in C[Z/2] ≅ C ⊕ C is (1, 0).
        let z2 = make_multimatrix(&[1, 1]).unwrap();
        let lam = AlgElement::from_coords(&z2, vec![c(1.0), c(-1.0)]).unwrap();
        let half = (&AlgElement::one(&z2) + &lam).scale(c(0.5));
        assert!((operator_norm(&half) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn c_star_identity_on_random_elements() {
        let alg = make_multimatrix(&[1, 2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = random_element(&alg, &mut rng);
            let n = operator_norm(&a);
            let lhs = operator_norm(&(&a.star() * &a));
            assert!((lhs - n * n).abs() <= TAU_ALG * n * n);
        }
    }

    #[test]
    fn gram_quotient_examples() {
        let id = ComplexMatrix::identity(3, 3);
        let h = gram_quotient(&id, TAU_GRAM).unwrap();
        assert_eq!((h.dim(), h.kernel_dim()), (3, 0));
        let ones = ComplexMatrix::from_element(2, 2, c(1.0));
        let h = gram_quotient(&ones, TAU_GRAM).unwrap();
        assert_eq!((h.dim(), h.kernel_dim()), (1, 1));
        let check = h.onb().adjoint() * &ones * h.onb();
        assert!((check[(0, 0)] - c(1.0)).norm() < 1e-12);
        let bad = ComplexMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        assert!(matches!(gram_quotient(&bad, TAU_GRAM), Err(Error::NotPositive(_))));
    }

    #[test]
    fn gram_quotient_onb_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = ComplexMatrix::from_fn(6, 4, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let gram = v.adjoint() * &v;
        let gram = ComplexMatrix::from_fn(6, 6, |i, j| if i < 4 && j < 4 { gram[(i, j)] } else { c(0.0) });
        let h = gram_quotient(&gram, TAU_GRAM).unwrap();
        assert_eq!(h.dim() + h.kernel_dim(), 6);
        let check = h.onb().adjoint() * &gram * h.onb();
        assert!((check - ComplexMatrix::identity(h.dim(), h.dim())).max_abs() < TAU_GRAM);
    }

    fn uniform_state(alg: &Algebra) -> State {
        let n = alg.linear_dim();
        State::new(Functional::new(alg, vec![c(1.0 / n as f64); n]).unwrap()).unwrap()
    }

    #[test]
    fn gns_examples() {
        let cc = make_multimatrix(&[1]).unwrap();
        let phi = State::new(Functional::new(&cc, vec![c(1.0)]).unwrap()).unwrap();
        let g = gns_space(&cc, &phi).unwrap();
        assert_eq!(g.dim(), 1);

        let z2 = make_multimatrix(&[1, 1]).unwrap();
        let tr = uniform_state(&z2);
        let g = gns_space(&z2, &tr).unwrap();
        assert_eq!(g.dim(), 2);
        let lam = AlgElement::from_coords(&z2, vec![c(1.0), c(-1.0)]).unwrap();
        let rep = g.represent(&lam);
        assert!((&rep * &rep - ComplexMatrix::identity(2, 2)).max_abs() < 1e-12);

        let ev = State::new(Functional::new(&z2, vec![c(1.0), c(0.0)]).unwrap()).unwrap();
        assert!(!ev.is_faithful());
        let g = gns_space(&z2, &ev).unwrap();
        assert_eq!((g.dim(), g.space().kernel_dim()), (1, 1));
    }

    #[test]
    fn gns_representation_is_a_star_homomorphism() {
        let alg = make_multimatrix(&[1, 2]).unwrap();
        let f = Functional::new(&alg, vec![c(0.2), c(0.3), c(0.0), c(0.0), c(0.5)]).unwrap();
        let phi = State::new(f).unwrap();
        let g = gns_space(&alg, &phi).unwrap();
        assert!((g.represent(&AlgElement::one(&alg)) - ComplexMatrix::identity(g.dim(), g.dim())).max_abs() < 1e-12);
        for i in 0..alg.linear_dim() {
            let a = AlgElement::matrix_unit(&alg, i);
            assert!((g.represent(&a.star()) - g.represent(&a).adjoint()).max_abs() < TAU_ALG);
            for j in 0..alg.linear_dim() {
                let b = AlgElement::matrix_unit(&alg, j);
                let lhs = g.represent(&(&a * &b));
                let rhs = g.represent(&a) * g.represent(&b);
                assert!((lhs - rhs).max_abs() < TAU_ALG);
            }
        }
    }

    #[test]
    fn non_positive_functional_is_rejected() {
        let z2 = make_multimatrix(&[1, 1]).unwrap();
        let f = Functional::new(&z2, vec![c(2.0), c(-1.0)]).unwrap();
        assert!(matches!(State::new(f), Err(Error::InvalidState(_))));
    }

    #[test]
    fn expectation_onto_whole_algebra_and_scalars() {
        let alg = make_multimatrix(&[1, 1, 1]).unwrap();
        let phi = uniform_state(&alg);
        let units: Vec<AlgElement> = (0..3).map(|i| AlgElement::matrix_unit(&alg, i)).collect();
        let e = conditional_expectation(&alg, &units, &phi).unwrap();
        assert!((e.projection() - ComplexMatrix::identity(3, 3)).max_abs() < 1e-12);
        let e1 = conditional_expectation(&alg, &[], &phi).unwrap();
        let a = AlgElement::from_coords(&alg, vec![c(3.0), c(0.0), c(6.0)]).unwrap();
        assert!(e1.apply(&a).distance(&AlgElement::one(&alg).scale(c(3.0))) < 1e-12);
    }

    #[test]
    fn non_subalgebra_is_rejected() {
        let alg = make_multimatrix(&[1, 1, 1]).unwrap();
        let phi = uniform_state(&alg);
        let x = AlgElement::from_coords(&alg, vec![c(1.0), c(2.0), c(0.0)]).unwrap();
        assert!(matches!(
            conditional_expectation(&alg, &[x], &phi),
            Err(Error::NotASubalgebra(_))
        ));
    }

    #[test]
    fn morphism_checks() {
        let cc = make_multimatrix(&[1]).unwrap();
        let z2 = make_multimatrix(&[1, 1]).unwrap();
        let unit = StarMorphism::new(&cc, &z2, ComplexMatrix::from_element(2, 1, c(1.0))).unwrap();
        assert!(unit.is_unital() && unit.is_injective());
        let bad = StarMorphism::new(&cc, &z2, ComplexMatrix::from_element(2, 1, c(2.0)));
        assert!(matches!(bad, Err(Error::InvalidMorphism(_))));
    }

    #[test]
    fn matrix_dump_round_trip() {
        let m = ComplexMatrix::from_row_slice(1, 2, &[C64::new(1.0, 2.0), C64::new(-3.0, 0.5)]);
        let dump = MatrixDump::from(&m);
        let json = serde_json::to_string(&dump).unwrap();
        let back: MatrixDump = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
    }
}
