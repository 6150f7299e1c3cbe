//! Input families and the named builtin HNN data.

use serde::{Deserialize, Serialize};

use crate::britton::HnnGroupData;
use crate::error::{Error, Result};
use crate::group::{FiniteGroup, SubgroupData};
use crate::qgroup::{
    build_hnn_input, function_algebra_qg, group_algebra_qg, morphism_from_basis_images,
    validate_embedding, Comultiplication, FiniteCQG, HnnInput,
};
use crate::starcore::{make_multimatrix, AlgElement, C64, ONE, ZERO};

/// Restriction of the Cayley table to a subgroup, keeping the ambient labels.
pub fn restrict(group: &FiniteGroup, sub: &[usize]) -> Result<FiniteGroup> {
    let labels = sub.iter().map(|&s| group.label(s).to_string()).collect();
    let pos = |x: usize| sub.iter().position(|&s| s == x).expect("closed subgroup");
    let table = sub.iter().map(|&a| sub.iter().map(|&b| pos(group.mul(a, b))).collect()).collect();
    FiniteGroup::from_table(labels, table)
}

fn indicator(n: usize, support: impl Iterator<Item = usize>) -> Vec<C64> {
    let mut v = vec![ZERO; n];
    for i in support {
        v[i] = ONE;
    }
    v
}

/// Group-algebra family: `A = C*(H)`, `B = C*(Σ)`, `ι` the inclusion and
/// `θ(λ_σ) = λ_{θ(σ)}`.
pub fn group_algebra_family(name: &str, h: &FiniteGroup, data: &SubgroupData) -> Result<HnnInput> {
    let a = group_algebra_qg(h)?;
    let sigma = restrict(h, &data.sigma)?;
    let b = group_algebra_qg(&sigma)?;
    let n = h.order();
    let iota_images: Vec<Vec<C64>> =
        data.sigma.iter().map(|&s| indicator(n, std::iter::once(s))).collect();
    let theta_images: Vec<Vec<C64>> =
        data.theta.iter().map(|&t| indicator(n, std::iter::once(t))).collect();
    hnn_from_images(name, a, b, &iota_images, &theta_images)
}

/// Function-algebra family: `A = C(G)`, `B = C(G/N)` viewed as `N`-invariant
/// functions, and `θ(f) = f∘q∘α` for an endomorphism `α` of `G` (`q` the quotient map).
pub fn function_algebra_quotient_family(
    name: &str,
    g: &FiniteGroup,
    normal: &[usize],
    alpha: &[usize],
) -> Result<HnnInput> {
    let n_sub = g.subgroup(normal)?;
    if !g.is_normal(&n_sub) {
        return Err(Error::InvalidGroup("quotient needs a normal subgroup".into()));
    }
    if alpha.len() != g.order() {
        return Err(Error::InvalidGroup("α must be defined on all of G".into()));
    }
    for x in 0..g.order() {
        for y in 0..g.order() {
            if alpha[g.mul(x, y)] != g.mul(alpha[x], alpha[y]) {
                return Err(Error::InvalidGroup("α is not a homomorphism".into()));
            }
        }
    }
    let cosets = g.left_cosets(&n_sub);
    let coset_of = |x: usize| cosets.iter().position(|c| c.contains(&x)).expect("cosets cover G");
    let k = cosets.len();
    let labels = cosets.iter().map(|c| format!("{}N", g.label(c[0]))).collect();
    let table = (0..k).map(|i| (0..k).map(|j| coset_of(g.mul(cosets[i][0], cosets[j][0]))).collect()).collect();
    let quotient = FiniteGroup::from_table(labels, table)?;
    let a = function_algebra_qg(g)?;
    let b = function_algebra_qg(&quotient)?;
    let n = g.order();
    let iota_images: Vec<Vec<C64>> =
        (0..k).map(|c| indicator(n, (0..n).filter(|&x| coset_of(x) == c))).collect();
    let theta_images: Vec<Vec<C64>> =
        (0..k).map(|c| indicator(n, (0..n).filter(|&x| coset_of(alpha[x]) == c))).collect();
    hnn_from_images(name, a, b, &iota_images, &theta_images)
}

/// Assembles an [`HnnInput`] from basis images of `ι` and `θ`.
pub fn hnn_from_images(
    name: &str,
    a: FiniteCQG,
    b: FiniteCQG,
    iota_images: &[Vec<C64>],
    theta_images: &[Vec<C64>],
) -> Result<HnnInput> {
    let iota = validate_embedding(&b, &a, morphism_from_basis_images(&b, &a, iota_images)?)?;
    let theta = validate_embedding(&b, &a, morphism_from_basis_images(&b, &a, theta_images)?)?;
    build_hnn_input(name, a, b, iota, theta)
}

/// Finite quantum group given by its block sizes, a basis in matrix-unit
/// coordinates, and the structure constants of the coproduct.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExplicitQg {
    pub block_dims: Vec<usize>,
    pub labels: Vec<String>,
    pub basis: Vec<Vec<C64>>,
    /// `comul[i]` lists `(j, k, c)` with `Δ(x_i) = Σ c x_j ⊗ x_k`.
    pub comul: Comultiplication,
}

impl ExplicitQg {
    pub fn build(&self) -> Result<FiniteCQG> {
        let alg = make_multimatrix(&self.block_dims)?;
        let basis =
            self.basis.iter().map(|c| AlgElement::from_coords(&alg, c.clone())).collect::<Result<Vec<_>>>()?;
        FiniteCQG::new(&alg, self.labels.clone(), basis, self.comul.clone())
    }

    pub fn from_cqg(qg: &FiniteCQG) -> Self {
        ExplicitQg {
            block_dims: qg.algebra().block_dims().to_vec(),
            labels: qg.labels().to_vec(),
            basis: qg.basis().iter().map(|x| x.coords().to_vec()).collect(),
            comul: qg.comul().clone(),
        }
    }
}

/// Explicit HNN data: `A`, `B`, and the images of the basis of `B` under `ι`
/// and `θ` in basis coordinates of `A`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExplicitFamily {
    pub a: ExplicitQg,
    pub b: ExplicitQg,
    pub iota: Vec<Vec<C64>>,
    pub theta: Vec<Vec<C64>>,
}

impl ExplicitFamily {
    pub fn build(&self, name: &str) -> Result<HnnInput> {
        hnn_from_images(name, self.a.build()?, self.b.build()?, &self.iota, &self.theta)
    }

    pub fn from_input(input: &HnnInput) -> Result<Self> {
        let images = |emb: &crate::qgroup::QGEmbedding| -> Result<Vec<Vec<C64>>> {
            input.b().basis().iter().map(|x| Ok(input.a().basis_coords(&emb.apply(x)?))).collect()
        };
        Ok(ExplicitFamily {
            a: ExplicitQg::from_cqg(input.a()),
            b: ExplicitQg::from_cqg(input.b()),
            iota: images(input.iota())?,
            theta: images(input.theta())?,
        })
    }
}

/// Short description of a builtin family.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct BuiltinInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub default_l: usize,
}

pub const BUILTINS: &[BuiltinInfo] = &[
    BuiltinInfo {
        name: "z2-free",
        description: "group algebra of Z/2, trivial Σ (the free product Z/2 * Z)",
        default_l: 2,
    },
    BuiltinInfo {
        name: "z4-sigma2",
        description: "group algebra of Z/4, Σ = {e, g²}, θ the inclusion",
        default_l: 2,
    },
    BuiltinInfo {
        name: "s3-quotient",
        description: "functions on S3, B = A3-invariant functions, θ the pullback along S3 → Z/2",
        default_l: 1,
    },
    BuiltinInfo {
        name: "trivial",
        description: "trivial group with trivial Σ (the dual of Z)",
        default_l: 2,
    },
];

/// Classical data of a group-algebra builtin, for the Britton oracle.
pub fn builtin_group_data(name: &str) -> Result<Option<HnnGroupData>> {
    let (h, sigma, theta): (FiniteGroup, Vec<usize>, Vec<usize>) = match name {
        "z2-free" => (FiniteGroup::cyclic(2), vec![0], vec![0]),
        "z4-sigma2" => (FiniteGroup::cyclic(4), vec![0, 2], vec![0, 2]),
        "trivial" => (FiniteGroup::cyclic(1), vec![0], vec![0]),
        "s3-quotient" => return Ok(None),
        other => return Err(Error::InvalidInput(format!("unknown builtin {other}"))),
    };
    let data = SubgroupData::new(&h, &sigma, &theta)?;
    Ok(Some(HnnGroupData::new(h, data)?))
}

/// Builds a builtin by name.
pub fn builtin(name: &str) -> Result<HnnInput> {
    match name {
        "z2-free" => {
            let h = FiniteGroup::cyclic(2);
            let data = SubgroupData::new(&h, &[h.identity()], &[h.identity()])?;
            group_algebra_family(name, &h, &data)
        }
        "z4-sigma2" => {
            let h = FiniteGroup::cyclic(4);
            let data = SubgroupData::new(&h, &[0, 2], &[0, 2])?;
            group_algebra_family(name, &h, &data)
        }
        "s3-quotient" => {
            let g = FiniteGroup::symmetric3();
            let a3: Vec<usize> = (0..g.order())
                .filter(|&x| x == g.identity() || g.mul(x, x) != g.identity())
                .collect();
            let alpha: Vec<usize> = (0..g.order()).collect();
            function_algebra_quotient_family(name, &g, &a3, &alpha)
        }
        "trivial" => {
            let h = FiniteGroup::cyclic(1);
            let data = SubgroupData::new(&h, &[0], &[0])?;
            group_algebra_family(name, &h, &data)
        }
        other => Err(Error::InvalidInput(format!("unknown builtin {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qgroup::Sign;

    #[test]
    fn builtins_have_expected_dimensions() {
        let expected = [("z2-free", 2, 1), ("z4-sigma2", 4, 2), ("s3-quotient", 6, 2), ("trivial", 1, 1)];
        for (name, da, db) in expected {
            let input = builtin(name).unwrap();
            assert_eq!(input.a().dim(), da, "{name}");
            assert_eq!(input.b().dim(), db, "{name}");
            for s in Sign::both() {
                assert_eq!(input.kernel_onb(s).len(), da - db, "{name}");
            }
        }
    }

    #[test]
    fn unknown_builtin_is_rejected() {
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn explicit_round_trip_preserves_the_input() {
        let input = builtin("s3-quotient").unwrap();
        let fam = ExplicitFamily::from_input(&input).unwrap();
        let json = serde_json::to_string(&fam).unwrap();
        let back: ExplicitFamily = serde_json::from_str(&json).unwrap();
        let rebuilt = back.build("copy").unwrap();
        assert_eq!(rebuilt.a().dim(), 6);
        assert_eq!(rebuilt.b().dim(), 2);
        assert_eq!(rebuilt.a().haar_basis(), input.a().haar_basis());
    }

    #[test]
    fn explicit_rejects_a_non_coassociative_coproduct() {
        let mut fam = ExplicitFamily::from_input(&builtin("z4-sigma2").unwrap()).unwrap();
        fam.a.comul[1] = vec![(1, 0, ONE)];
        assert!(fam.build("bad").is_err());
    }
}
