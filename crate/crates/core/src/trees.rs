//! Labelled trees and collision sequences indexing the cluster expansions,
//! plus a brute-force quadrature of the cluster mass density for small `k`.

use crate::analytics::KineticTime;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_TREE_VERTICES: usize = 9;
pub const MAX_SEQUENCE_LENGTH: usize = 10;
pub const MAX_ORACLE_VERTICES: usize = 5;

/// Tree on vertices `1..=k`, edges stored as sorted `(lo, hi)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelledTree {
    k: usize,
    edges: Vec<(u32, u32)>,
}

impl LabelledTree {
    /// Validates that `edges` form a spanning tree on `1..=k`.
    pub fn new(k: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("tree needs at least one vertex".into()));
        }
        let mut edges: Vec<(u32, u32)> = edges.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort_unstable();
        if edges.len() != k - 1 {
            return Err(Error::InvalidArgument(format!("{} edges for {k} vertices", edges.len())));
        }
        let mut parent: Vec<usize> = (0..=k).collect();
        fn root(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in &edges {
            if a == 0 || b as usize > k || a == b {
                return Err(Error::InvalidArgument(format!("bad edge ({a}, {b}) for k = {k}")));
            }
            let (ra, rb) = (root(&mut parent, a as usize), root(&mut parent, b as usize));
            if ra == rb {
                return Err(Error::InvalidArgument(format!("edge ({a}, {b}) closes a cycle")));
            }
            parent[ra] = rb;
        }
        Ok(Self { k, edges })
    }

    pub fn vertices(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.k + 1];
        for &(a, b) in &self.edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        deg
    }

    /// Prüfer code of the tree (empty for `k <= 2`).
    pub fn to_pruefer(&self) -> PrueferCode {
        let k = self.k;
        if k <= 2 {
            return PrueferCode { k, code: Vec::new() };
        }
        let mut adj = vec![Vec::new(); k + 1];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b as usize);
            adj[b as usize].push(a as usize);
        }
        let mut deg = self.degrees();
        let mut removed = vec![false; k + 1];
        let mut code = Vec::with_capacity(k - 2);
        for _ in 0..k - 2 {
            let leaf = (1..=k).find(|&v| !removed[v] && deg[v] == 1).expect("tree has a leaf");
            let nb = adj[leaf].iter().copied().find(|&u| !removed[u]).expect("leaf has a neighbour");
            code.push(nb as u32);
            removed[leaf] = true;
            deg[nb] -= 1;
        }
        PrueferCode { k, code }
    }
}

/// Sequence of `k - 2` labels in `1..=k`, in bijection with labelled trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrueferCode {
    k: usize,
    code: Vec<u32>,
}

impl PrueferCode {
    /// The single-vertex tree has the empty code, like `k = 2`.
    pub fn new(k: usize, code: Vec<u32>) -> Result<Self> {
        if k == 0 || code.len() != k.saturating_sub(2) || code.iter().any(|&c| c == 0 || c as usize > k) {
            return Err(Error::InvalidArgument(format!("invalid Prüfer code {code:?} for k = {k}")));
        }
        Ok(Self { k, code })
    }

    pub fn code(&self) -> &[u32] {
        &self.code
    }

    pub fn decode(&self) -> LabelledTree {
        let k = self.k;
        if k == 1 {
            return LabelledTree { k, edges: Vec::new() };
        }
        let mut deg = vec![1usize; k + 1];
        for &c in &self.code {
            deg[c as usize] += 1;
        }
        let mut edges = Vec::with_capacity(k.saturating_sub(1));
        for &c in &self.code {
            let leaf = (1..=k).find(|&v| deg[v] == 1).expect("a leaf remains");
            edges.push((leaf as u32, c));
            deg[leaf] = 0;
            deg[c as usize] -= 1;
        }
        let mut rest = (1..=k).filter(|&v| deg[v] == 1);
        let a = rest.next().expect("two vertices remain");
        let b = rest.next().expect("two vertices remain");
        edges.push((a as u32, b as u32));
        LabelledTree::new(k, edges).expect("decoded Prüfer code is a tree")
    }
}

/// `k^{k-2}`, the number of labelled trees on `k` vertices.
pub fn cayley_count(k: usize) -> Result<u128> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k <= 2 {
        return Ok(1);
    }
    let exp = u32::try_from(k - 2).map_err(|_| Error::Overflow(format!("{k}^{}", k - 2)))?;
    (k as u128).checked_pow(exp).ok_or_else(|| Error::Overflow(format!("{k}^{}", k - 2)))
}

/// Iterator over all labelled trees on `k` vertices.
pub struct TreeIter {
    k: usize,
    code: Vec<u32>,
    done: bool,
}

impl Iterator for TreeIter {
    type Item = LabelledTree;

    fn next(&mut self) -> Option<LabelledTree> {
        if self.done {
            return None;
        }
        let tree = match self.k {
            1 => LabelledTree { k: 1, edges: Vec::new() },
            _ => PrueferCode { k: self.k, code: self.code.clone() }.decode(),
        };
        // odometer over {1..k}^{k-2}
        self.done = true;
        for digit in self.code.iter_mut().rev() {
            if (*digit as usize) < self.k {
                *digit += 1;
                self.done = false;
                break;
            }
            *digit = 1;
        }
        Some(tree)
    }
}

/// Yields every labelled tree on `k <= 9` vertices exactly once.
pub fn enumerate_trees(k: usize) -> Result<TreeIter> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > MAX_TREE_VERTICES {
        return Err(Error::CapExceeded { what: "tree vertices", value: k, cap: MAX_TREE_VERTICES });
    }
    Ok(TreeIter { k, code: vec![1; k.saturating_sub(2)], done: false })
}

/// `(k_1, ..., k_n)` with `k_r ∈ {1, ..., r}`: which existing member the
/// `(r+1)`-th particle of a backward cluster collides with.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CollisionSequence(Vec<u32>);

impl CollisionSequence {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        for (r, &e) in entries.iter().enumerate() {
            if e == 0 || e as usize > r + 1 {
                return Err(Error::InvalidArgument(format!("entry {e} at position {} out of range", r + 1)));
            }
        }
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }
}

pub struct SequenceIter {
    current: Vec<u32>,
    done: bool,
}

impl Iterator for SequenceIter {
    type Item = CollisionSequence;

    fn next(&mut self) -> Option<CollisionSequence> {
        if self.done {
            return None;
        }
        let out = CollisionSequence(self.current.clone());
        self.done = true;
        for (r, digit) in self.current.iter_mut().enumerate().rev() {
            if (*digit as usize) < r + 1 {
                *digit += 1;
                self.done = false;
                break;
            }
            *digit = 1;
        }
        Some(out)
    }
}

/// All `n!` collision sequences of length `n <= 10`.
pub fn enumerate_gamma(n: usize) -> Result<SequenceIter> {
    if n > MAX_SEQUENCE_LENGTH {
        return Err(Error::CapExceeded { what: "sequence length", value: n, cap: MAX_SEQUENCE_LENGTH });
    }
    Ok(SequenceIter { current: vec![1; n], done: false })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

const ORACLE_NODES: usize = 8;

/// Cluster mass density of the Maxwell gas by direct evaluation of the tree
/// expansion: sum over all labelled trees, tensor Gauss–Legendre quadrature
/// over the cube of edge collision times.
///
/// Every velocity and scattering integral is one under the kernel
/// normalization, so the integrand is the product of free-flight factors
/// `exp(-k (t_{ℓ_r} - t_{ℓ_{r+1}}))` between consecutive ordered collision
/// times, with `t_{ℓ_0} = t` and `t_{ℓ_k} = 0`.
pub fn quadrature_oracle_f<T: Real>(k: usize, t: KineticTime<T>) -> Result<T> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("oracle needs k >= 2, got {k}")));
    }
    if k > MAX_ORACLE_VERTICES {
        return Err(Error::CapExceeded { what: "oracle vertices", value: k, cap: MAX_ORACLE_VERTICES });
    }
    let t = t.get();
    let dims = k - 1;
    let half = t * T::lit(0.5);
    let rule: Vec<(T, T)> = gauss_legendre(ORACLE_NODES)
        .into_iter()
        .map(|(x, w)| (half * (T::one() + T::lit(x)), half * T::lit(w)))
        .collect();
    // Each particle collides at unit rate, so k particles fly freely at rate k.
    let flight_rate = T::from_usize_lossy(k);

    let mut total = T::zero();
    let mut index = vec![0usize; dims];
    let mut times = vec![T::zero(); dims];
    for tree in enumerate_trees(k)? {
        debug_assert_eq!(tree.edges().len(), dims);
        let mut tree_sum = T::zero();
        index.iter_mut().for_each(|i| *i = 0);
        loop {
            let mut weight = T::one();
            for (d, &i) in index.iter().enumerate() {
                times[d] = rule[i].0;
                weight = weight * rule[i].1;
            }
            let mut ordered = times.clone();
            ordered.sort_by(|a, b| b.partial_cmp(a).expect("finite times"));
            let mut upper = t;
            let mut log_survival = T::zero();
            for &lower in ordered.iter().chain(std::iter::once(&T::zero())) {
                log_survival = log_survival - flight_rate * (upper - lower);
                upper = lower;
            }
            tree_sum = tree_sum + weight * log_survival.exp();

            let mut d = 0;
            while d < dims {
                index[d] += 1;
                if index[d] < ORACLE_NODES {
                    break;
                }
                index[d] = 0;
                d += 1;
            }
            if d == dims {
                break;
            }
        }
        total = total + tree_sum;
    }
    let factorial: usize = (1..k).product();
    Ok(total / T::from_usize_lossy(factorial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn kt(t: f64) -> KineticTime<f64> {
        KineticTime::new(t).unwrap()
    }

    #[test]
    fn tree_counts() {
        assert_eq!(enumerate_trees(1).unwrap().count(), 1);
        let single = enumerate_trees(1).unwrap().next().unwrap();
        assert!(single.edges().is_empty());
        let three: Vec<_> = enumerate_trees(3).unwrap().collect();
        assert_eq!(three.len(), 3);
        // paths centred at 1, 2 and 3
        let centres: HashSet<u32> = three
            .iter()
            .map(|t| {
                let deg = t.degrees();
                (1..=3).find(|&v| deg[v] == 2).unwrap() as u32
            })
            .collect();
        assert_eq!(centres, HashSet::from([1, 2, 3]));
        let four: HashSet<_> = enumerate_trees(4).unwrap().collect();
        assert_eq!(four.len(), 16);
    }

    #[test]
    fn cap_exceeded() {
        assert!(matches!(enumerate_trees(10), Err(Error::CapExceeded { .. })));
        assert!(matches!(enumerate_gamma(11), Err(Error::CapExceeded { .. })));
        assert!(matches!(quadrature_oracle_f(6, kt(1.0)), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn cayley_examples() {
        assert_eq!(cayley_count(2).unwrap(), 1);
        assert_eq!(cayley_count(1).unwrap(), 1);
        assert_eq!(cayley_count(7).unwrap(), 16807);
        assert_eq!(enumerate_trees(7).unwrap().count() as u128, cayley_count(7).unwrap());
        assert!(matches!(cayley_count(40), Err(Error::Overflow(_))));
    }

    #[test]
    fn invalid_trees_rejected() {
        assert!(LabelledTree::new(3, [(1, 2), (2, 1)]).is_err());
        assert!(LabelledTree::new(3, [(1, 2)]).is_err());
        assert!(LabelledTree::new(3, [(1, 4), (2, 3)]).is_err());
        assert!(LabelledTree::new(4, [(1, 2), (2, 3), (3, 1)]).is_err());
        assert!(PrueferCode::new(4, vec![5, 1]).is_err());
    }

    #[test]
    fn gamma_examples() {
        let zero: Vec<_> = enumerate_gamma(0).unwrap().collect();
        assert_eq!(zero.len(), 1);
        assert!(zero[0].is_empty());
        assert_eq!(enumerate_gamma(3).unwrap().count(), 6);
        assert_eq!(enumerate_gamma(5).unwrap().count(), 120);
        assert!(CollisionSequence::new(vec![1, 3]).is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre(8);
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_examples() {
        let two = quadrature_oracle_f(2, kt(1.0)).unwrap();
        assert!((two - (-2.0f64).exp()).abs() < 1e-8);
        let three = quadrature_oracle_f(3, kt(1.0)).unwrap();
        assert!((three - 1.5 * (-3.0f64).exp()).abs() < 1e-8);
        assert_eq!(quadrature_oracle_f(2, kt(0.0)).unwrap(), 0.0);
    }
}
