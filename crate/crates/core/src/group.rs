//! Finite groups given by Cayley tables.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk group description: labels, a product table of labels, the identity label.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GroupFile {
    pub elements: Vec<String>,
    pub table: Vec<Vec<String>>,
    pub identity: String,
}

/// On-disk subgroup and homomorphism description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SubgroupFile {
    pub subgroup: Vec<String>,
    pub theta: HashMap<String, String>,
}

/// Validated finite group; elements are addressed by index into `labels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    labels: Vec<String>,
    table: Vec<Vec<usize>>,
    identity: usize,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    pub fn from_table(labels: Vec<String>, table: Vec<Vec<usize>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty element list".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::InvalidGroup(format!("duplicate label {l}")));
            }
        }
        if table.len() != n || table.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidGroup("table is not |G|×|G|".into()));
        }
        if table.iter().flatten().any(|&x| x >= n) {
            return Err(Error::InvalidGroup("table entry out of range".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| Error::InvalidGroup("no identity element".into()))?;
        Self::validate(labels, table, identity)
    }

    fn validate(labels: Vec<String>, table: Vec<Vec<usize>>, identity: usize) -> Result<Self> {
        let n = labels.len();
        for g in 0..n {
            if table[identity][g] != g || table[g][identity] != g {
                return Err(Error::InvalidGroup(format!("{} is not an identity", labels[identity])));
            }
        }
        let mut inverse = vec![usize::MAX; n];
        for g in 0..n {
            match (0..n).find(|&h| table[g][h] == identity && table[h][g] == identity) {
                Some(h) => inverse[g] = h,
                None => return Err(Error::InvalidGroup(format!("{} has no inverse", labels[g]))),
            }
        }
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::InvalidGroup(format!(
                            "associativity fails on ({}, {}, {})",
                            labels[a], labels[b], labels[c]
                        )));
                    }
                }
            }
        }
        Ok(FiniteGroup { labels, table, identity, inverse })
    }

    pub fn from_file(file: &GroupFile) -> Result<Self> {
        let index = label_index(&file.elements)?;
        let identity = *index
            .get(&file.identity)
            .ok_or_else(|| Error::InvalidGroup(format!("unknown identity {}", file.identity)))?;
        if file.table.len() != file.elements.len() {
            return Err(Error::InvalidGroup("table is not |G|×|G|".into()));
        }
        let mut table = Vec::with_capacity(file.table.len());
        for row in &file.table {
            if row.len() != file.elements.len() {
                return Err(Error::InvalidGroup("table is not |G|×|G|".into()));
            }
            let r: Result<Vec<usize>> = row
                .iter()
                .map(|l| {
                    index.get(l).copied().ok_or_else(|| Error::InvalidGroup(format!("unknown label {l}")))
                })
                .collect();
            table.push(r?);
        }
        Self::validate(file.elements.clone(), table, identity)
    }

    pub fn to_file(&self) -> GroupFile {
        GroupFile {
            elements: self.labels.clone(),
            table: self
                .table
                .iter()
                .map(|r| r.iter().map(|&x| self.labels[x].clone()).collect())
                .collect(),
            identity: self.labels[self.identity].clone(),
        }
    }

    /// Cyclic group `ℤ/n` with labels `e, g, g2, …`.
    pub fn cyclic(n: usize) -> Self {
        let labels = (0..n)
            .map(|k| match k {
                0 => "e".to_string(),
                1 => "g".to_string(),
                _ => format!("g{k}"),
            })
            .collect();
        let table = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::from_table(labels, table).expect("cyclic group table is valid")
    }

    /// Symmetric group on three letters; permutations in lexicographic order,
    /// product `(pq)(i) = p(q(i))`.
    pub fn symmetric3() -> Self {
        let perms: Vec<[usize; 3]> =
            vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let labels = perms.iter().map(|p| format!("{}{}{}", p[0], p[1], p[2])).collect();
        let pos = |q: [usize; 3]| perms.iter().position(|p| *p == q).unwrap();
        let table = perms
            .iter()
            .map(|p| perms.iter().map(|q| pos([p[q[0]], p[q[1]], p[q[2]]])).collect())
            .collect();
        Self::from_table(labels, table).expect("S3 table is valid")
    }

    pub fn order(&self) -> usize {
        self.labels.len()
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a][b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn label(&self, a: usize) -> &str {
        &self.labels[a]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Checks that `elements` is a subgroup; returns it sorted with duplicates removed.
    pub fn subgroup(&self, elements: &[usize]) -> Result<Vec<usize>> {
        let mut s: Vec<usize> = elements.to_vec();
        s.sort_unstable();
        s.dedup();
        if !s.contains(&self.identity) {
            return Err(Error::InvalidGroup("subgroup misses the identity".into()));
        }
        for &a in &s {
            if s.binary_search(&self.inverse[a]).is_err() {
                return Err(Error::InvalidGroup("subgroup not closed under inverses".into()));
            }
            for &b in &s {
                if s.binary_search(&self.mul(a, b)).is_err() {
                    return Err(Error::InvalidGroup("subgroup not closed under products".into()));
                }
            }
        }
        Ok(s)
    }

    /// Whether the subgroup (sorted) is normal.
    pub fn is_normal(&self, sub: &[usize]) -> bool {
        (0..self.order()).all(|g| {
            sub.iter().all(|&n| sub.binary_search(&self.mul(self.mul(g, n), self.inv(g))).is_ok())
        })
    }

    /// Left cosets `gS` in order of first occurrence, each listed as `g·s` for
    /// `s` in the order of `sub`. The first coset is `S` itself.
    pub fn left_cosets(&self, sub: &[usize]) -> Vec<Vec<usize>> {
        let mut assigned = vec![false; self.order()];
        let mut out = Vec::new();
        let mut start = vec![self.identity];
        start.extend((0..self.order()).filter(|&g| g != self.identity));
        for g in start {
            if assigned[g] {
                continue;
            }
            let coset: Vec<usize> = sub.iter().map(|&s| self.mul(g, s)).collect();
            for &x in &coset {
                assigned[x] = true;
            }
            out.push(coset);
        }
        out
    }

    /// Checks that `map` (indexed like `domain`) is an injective homomorphism from the
    /// subgroup `domain` into this group.
    pub fn check_injective_hom(&self, domain: &[usize], map: &[usize]) -> Result<()> {
        if domain.len() != map.len() {
            return Err(Error::InvalidGroup("homomorphism table has the wrong length".into()));
        }
        let pos = |x: usize| domain.iter().position(|&d| d == x);
        for (i, &a) in domain.iter().enumerate() {
            for (j, &b) in domain.iter().enumerate() {
                let ab = pos(self.mul(a, b))
                    .ok_or_else(|| Error::InvalidGroup("domain is not a subgroup".into()))?;
                if map[ab] != self.mul(map[i], map[j]) {
                    return Err(Error::InvalidGroup(format!(
                        "θ is not multiplicative on ({}, {})",
                        self.label(a),
                        self.label(b)
                    )));
                }
            }
        }
        let mut img = map.to_vec();
        img.sort_unstable();
        img.dedup();
        if img.len() != map.len() {
            return Err(Error::InvalidGroup("θ is not injective".into()));
        }
        Ok(())
    }
}

fn label_index(labels: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        if index.insert(l.clone(), i).is_some() {
            return Err(Error::InvalidGroup(format!("duplicate label {l}")));
        }
    }
    Ok(index)
}

/// Subgroup `Σ ⊂ H` with an injective homomorphism `θ : Σ → H`, resolved to indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupData {
    pub sigma: Vec<usize>,
    pub theta: Vec<usize>,
}

impl SubgroupData {
    pub fn new(group: &FiniteGroup, sigma: &[usize], theta: &[usize]) -> Result<Self> {
        let mut pairs: Vec<(usize, usize)> = sigma.iter().copied().zip(theta.iter().copied()).collect();
        if sigma.len() != theta.len() {
            return Err(Error::InvalidGroup("θ must be given on every element of Σ".into()));
        }
        pairs.sort_unstable();
        pairs.dedup();
        let sigma: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let checked = group.subgroup(&sigma)?;
        if checked.len() != sigma.len() {
            return Err(Error::InvalidGroup("θ assigns two values to one element".into()));
        }
        let theta: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        group.check_injective_hom(&sigma, &theta)?;
        Ok(SubgroupData { sigma, theta })
    }

    pub fn from_file(group: &FiniteGroup, file: &SubgroupFile) -> Result<Self> {
        let idx = |l: &str| {
            group.index_of(l).ok_or_else(|| Error::InvalidGroup(format!("unknown label {l}")))
        };
        let mut sigma = Vec::new();
        let mut theta = Vec::new();
        for l in &file.subgroup {
            let t = file
                .theta
                .get(l)
                .ok_or_else(|| Error::InvalidGroup(format!("θ undefined on {l}")))?;
            sigma.push(idx(l)?);
            theta.push(idx(t)?);
        }
        if file.theta.len() != file.subgroup.len() {
            return Err(Error::InvalidGroup("θ defined outside the subgroup".into()));
        }
        Self::new(group, &sigma, &theta)
    }

    pub fn theta_of(&self, s: usize) -> Option<usize> {
        self.sigma.iter().position(|&x| x == s).map(|i| self.theta[i])
    }

    pub fn theta_inv_of(&self, t: usize) -> Option<usize> {
        self.theta.iter().position(|&x| x == t).map(|i| self.sigma[i])
    }

    /// `θ(Σ)`, sorted.
    pub fn image(&self) -> Vec<usize> {
        let mut v = self.theta.clone();
        v.sort_unstable();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_and_symmetric_groups_validate() {
        let z4 = FiniteGroup::cyclic(4);
        assert_eq!(z4.order(), 4);
        assert_eq!(z4.inv(1), 3);
        let s3 = FiniteGroup::symmetric3();
        assert_eq!(s3.order(), 6);
        // S3 is not abelian.
        assert!((0..6).any(|a| (0..6).any(|b| s3.mul(a, b) != s3.mul(b, a))));
    }

    #[test]
    fn rejects_non_group_tables() {
        let labels = vec!["a".to_string(), "b".to_string()];
        let bad = vec![vec![0, 1], vec![1, 1]];
        assert!(matches!(FiniteGroup::from_table(labels, bad), Err(Error::InvalidGroup(_))));
    }

    #[test]
    fn file_round_trip() {
        let s3 = FiniteGroup::symmetric3();
        let f = s3.to_file();
        let json = serde_json::to_string(&f).unwrap();
        let back: GroupFile = serde_json::from_str(&json).unwrap();
        assert_eq!(FiniteGroup::from_file(&back).unwrap(), s3);
    }

    #[test]
    fn cosets_cover_the_group() {
        let s3 = FiniteGroup::symmetric3();
        let a3: Vec<usize> = (0..6).filter(|&g| s3.mul(g, g) != s3.identity() || g == s3.identity()).collect();
        let a3 = s3.subgroup(&a3).unwrap();
        assert_eq!(a3.len(), 3);
        assert!(s3.is_normal(&a3));
        let cosets = s3.left_cosets(&a3);
        assert_eq!(cosets.len(), 2);
        assert_eq!(cosets[0][0], s3.identity());
    }

    #[test]
    fn subgroup_data_checks_theta() {
        let z4 = FiniteGroup::cyclic(4);
        assert!(SubgroupData::new(&z4, &[0, 2], &[0, 2]).is_ok());
        assert!(SubgroupData::new(&z4, &[0, 2], &[0, 1]).is_err());
        assert!(SubgroupData::new(&z4, &[0, 1], &[0, 1]).is_err());
    }
}
