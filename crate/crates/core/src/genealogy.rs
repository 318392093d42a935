//! Backward genealogy of the present-day population of a [`Tree`].
//!
//! Present-day individuals are numbered `1..=K` from left to right. For an
//! individual `i` the ancestor at generation `-n` is its spine node at depth
//! `n`; `D_i(n)` counts the daughters of that node, strictly to the right of
//! the spine, with present-day descendants of rank at least `i`.

use std::fmt;

use crate::error::{Error, Result};
use crate::tree::Tree;

/// Coalescent point process of a realization: `K` survivors and the
/// coalescence times `A_i = C_{i,i+1}` for `i < K`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cpp {
    survivors: usize,
    times: Vec<u32>,
}

impl Cpp {
    pub fn new(survivors: usize, times: Vec<u32>) -> Result<Self> {
        if survivors == 0 || times.len() + 1 != survivors {
            return Err(Error::OutOfRange(format!(
                "{survivors} survivors need {} coalescence times, got {}",
                survivors.saturating_sub(1),
                times.len()
            )));
        }
        if times.contains(&0) {
            return Err(Error::OutOfRange("coalescence times are at least 1".into()));
        }
        Ok(Cpp { survivors, times })
    }

    pub fn from_times(times: Vec<u32>) -> Result<Self> {
        Self::new(times.len() + 1, times)
    }

    pub fn survivors(&self) -> usize {
        self.survivors
    }

    pub fn times(&self) -> &[u32] {
        &self.times
    }

    /// Canonical outcome string, e.g. `K=3;A=1,2`.
    pub fn key(&self) -> String {
        outcome_key(self.survivors, &self.times)
    }

    /// Depth of the most recent common ancestor of everyone, `0` when `K = 1`.
    pub fn mrca_depth(&self) -> u32 {
        self.times.iter().copied().max().unwrap_or(0)
    }
}

/// Canonical encoding of a `(K, A)` outcome.
pub fn outcome_key(survivors: usize, times: &[u32]) -> String {
    let a: Vec<String> = times.iter().map(u32::to_string).collect();
    format!("K={survivors};A={}", a.join(","))
}

/// Pairwise coalescence times `C_{i,j}` for `1 <= i < j <= K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoalescentTable {
    survivors: usize,
    /// Row-major upper triangle.
    entries: Vec<u32>,
}

impl CoalescentTable {
    pub fn survivors(&self) -> usize {
        self.survivors
    }

    fn slot(k: usize, i: usize, j: usize) -> usize {
        // rows 1..i-1 hold (k - 1) + ... + (k - i + 1) entries
        (i - 1) * (2 * k - i) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        if i == 0 || i == j || j > self.survivors {
            return None;
        }
        Some(self.entries[Self::slot(self.survivors, i, j)])
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn from_fn(k: usize, mut f: impl FnMut(usize, usize) -> u32) -> Self {
        let mut entries = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for i in 1..=k {
            for j in (i + 1)..=k {
                entries.push(f(i, j));
            }
        }
        CoalescentTable { survivors: k, entries }
    }
}

/// `C_{i,j} = max(A_i, ..., A_{j-1})`.
pub fn genealogy_from_cpp(cpp: &Cpp) -> CoalescentTable {
    let k = cpp.survivors();
    let mut entries = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for i in 1..=k {
        let mut running = 0;
        for j in (i + 1)..=k {
            running = running.max(cpp.times[j - 2]);
            entries.push(running);
        }
    }
    CoalescentTable { survivors: k, entries }
}

/// `C_{i,j} = min{n >= 1 : a_i(n) = a_j(n)}`, read directly off the tree.
pub fn pairwise_coalescence(tree: &Tree) -> CoalescentTable {
    CoalescentTable::from_fn(tree.survivors(), |i, j| coalescence_time(tree, i, j))
}

fn coalescence_time(tree: &Tree, i: usize, j: usize) -> u32 {
    (1..=tree.horizon())
        .find(|&n| tree.ancestor_node(i, n) == tree.ancestor_node(j, n))
        .expect("every lineage meets at the founder") as u32
}

/// The coalescent point process of a tree with at least one survivor.
pub fn coalescent_times(tree: &Tree) -> Result<Cpp> {
    let k = tree.survivors();
    if k == 0 {
        return Err(Error::OutOfRange("tree has no survivors at generation 0".into()));
    }
    // Walk the two lineages up together until they merge.
    let times = (1..k)
        .map(|i| {
            let (mut a, mut b) = (i - 1, i);
            let mut n = 0u32;
            for d in (1..=tree.horizon()).rev() {
                n += 1;
                a = tree.parents_at(d)[a];
                b = tree.parents_at(d)[b];
                if a == b {
                    break;
                }
            }
            n
        })
        .collect();
    Cpp::new(k, times)
}

/// `D_i(n)`: daughters of the generation `-n` ancestor of `i` with
/// present-day descendants of rank `>= i`, minus one.
pub fn extract_d(tree: &Tree, i: usize, n: usize) -> Result<u32> {
    tree.check_individual(i)?;
    tree.check_generation(n)?;
    Ok(d_entry(tree, i, n))
}

fn d_entry(tree: &Tree, i: usize, n: usize) -> u32 {
    let d = tree.horizon() - n;
    let anc = tree.ancestor_node(i, n);
    let reaching = tree
        .children(d, anc)
        .filter(|&c| {
            let r = tree.leaf_range(d + 1, c);
            !r.is_empty() && r.end > i - 1
        })
        .count();
    (reaching - 1) as u32
}

/// The full vector `(D_i(1), ..., D_i(N))`.
pub fn d_vector(tree: &Tree, i: usize) -> Result<Vec<u32>> {
    tree.check_individual(i)?;
    Ok((1..=tree.horizon()).map(|n| d_entry(tree, i, n)).collect())
}

/// `B_i`: the first `l_i` entries of `D_i`, with `l_i = l_{i-1} v A_i`.
/// For `i = K` (no individual `K + 1`) the length is capped at `N`.
pub fn extract_b(tree: &Tree, i: usize) -> Result<Vec<u32>> {
    tree.check_individual(i)?;
    let k = tree.survivors();
    let cpp = coalescent_times(tree)?;
    let len = if i < k {
        cpp.times()[..i].iter().copied().max().unwrap_or(0) as usize
    } else {
        tree.horizon()
    };
    Ok((1..=len).map(|n| d_entry(tree, i, n)).collect())
}

/// All of `B_1, ..., B_{K-1}`.
pub fn b_sequence(tree: &Tree) -> Result<Vec<Vec<u32>>> {
    let k = tree.survivors();
    let cpp = coalescent_times(tree)?;
    let mut len = 0usize;
    (1..k)
        .map(|i| {
            len = len.max(cpp.times()[i - 1] as usize);
            Ok((1..=len).map(|n| d_entry(tree, i, n)).collect())
        })
        .collect()
}

/// Finite point measure on `{1, 2, ...}`: sorted `(position, multiplicity)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BTildeState {
    atoms: Vec<(u32, u32)>,
}

impl BTildeState {
    pub fn null() -> Self {
        BTildeState::default()
    }

    pub fn from_atoms(mut atoms: Vec<(u32, u32)>) -> Self {
        atoms.retain(|&(_, m)| m > 0);
        atoms.sort_unstable();
        BTildeState { atoms }
    }

    pub fn atoms(&self) -> &[(u32, u32)] {
        &self.atoms
    }

    pub fn is_null(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Smallest position in the support, `None` for the null measure.
    pub fn min_support(&self) -> Option<u32> {
        self.atoms.first().map(|&(n, _)| n)
    }

    /// The measure with one unit removed at the minimum of its support.
    pub fn star(&self) -> Self {
        let mut atoms = self.atoms.clone();
        if let Some(first) = atoms.first_mut() {
            first.1 -= 1;
            if first.1 == 0 {
                atoms.remove(0);
            }
        }
        BTildeState { atoms }
    }

    fn with_atom(mut self, position: u32, mult: u32) -> Self {
        if mult == 0 {
            return self;
        }
        match self.atoms.binary_search_by_key(&position, |&(n, _)| n) {
            Ok(idx) => self.atoms[idx].1 += mult,
            Err(idx) => self.atoms.insert(idx, (position, mult)),
        }
        self
    }

    /// One step of the point-measure recursion, given `A_{i+1}` and
    /// `D_{i+1}(A_{i+1})`.
    pub fn next(&self, time: u32, mult_at_time: u32) -> Self {
        let star = self.star();
        let below_star = star.min_support().is_none_or(|s| time < s);
        if Some(time) != self.min_support() && below_star {
            star.with_atom(time, mult_at_time)
        } else {
            star
        }
    }
}

impl fmt::Display for BTildeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .atoms
            .iter()
            .map(|&(n, m)| if m == 1 { format!("d{n}") } else { format!("{m}d{n}") })
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// `B~_1, ..., B~_{len}` from the pairs `(A_i, D_i(A_i))`, starting at the null measure.
pub fn btilde_from_pairs(pairs: &[(u32, u32)]) -> Vec<BTildeState> {
    let mut out = Vec::with_capacity(pairs.len());
    let mut state = BTildeState::null();
    for &(a, d) in pairs {
        state = state.next(a, d);
        out.push(state.clone());
    }
    out
}

/// `B~_1, ..., B~_{K-1}` of a tree with at least two survivors.
pub fn extract_btilde(tree: &Tree) -> Result<Vec<BTildeState>> {
    if tree.survivors() < 2 {
        return Err(Error::OutOfRange("B~ needs at least two survivors".into()));
    }
    let cpp = coalescent_times(tree)?;
    let pairs: Vec<(u32, u32)> = cpp
        .times()
        .iter()
        .enumerate()
        .map(|(idx, &a)| (a, d_entry(tree, idx + 1, a as usize)))
        .collect();
    Ok(btilde_from_pairs(&pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Environment;
    use crate::pgf::OffspringLaw;
    use crate::tree::{simulate_tree, SimOptions};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary2() -> Tree {
        Tree::from_level_counts(2, vec![vec![2], vec![2, 2]]).unwrap()
    }

    fn random_trees(count: usize, seed: u64) -> Vec<Tree> {
        let env = Environment::new(vec![
            OffspringLaw::finite(vec![0.1, 0.3, 0.4, 0.2]).unwrap(),
            OffspringLaw::finite(vec![0.2, 0.3, 0.5]).unwrap(),
            OffspringLaw::linear_fractional(0.8, 0.5).unwrap(),
            OffspringLaw::finite(vec![0.25, 0.25, 0.5]).unwrap(),
            OffspringLaw::finite(vec![0.3, 0.3, 0.4]).unwrap(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| simulate_tree(&env, &mut rng, &SimOptions::default()).unwrap())
            .filter(|t| t.survivors() > 0)
            .collect()
    }

    #[test]
    fn binary_tree_examples() {
        let t = binary2();
        let cpp = coalescent_times(&t).unwrap();
        assert_eq!(cpp.times(), &[1, 2, 1]);
        assert_eq!(cpp.mrca_depth(), 2);
        assert_eq!(extract_d(&t, 1, 1).unwrap(), 1);
        assert_eq!(extract_d(&t, 1, 2).unwrap(), 1);
        assert_eq!(extract_d(&t, 4, 2).unwrap(), 0);
        assert!(extract_d(&t, 5, 1).is_err());
        assert!(extract_d(&t, 1, 3).is_err());
        assert_eq!(extract_b(&t, 1).unwrap(), vec![1]);
        assert_eq!(extract_b(&t, 2).unwrap(), vec![0, 1]);
        assert_eq!(extract_b(&t, 3).unwrap(), vec![1, 0]);
        assert_eq!(extract_b(&t, 4).unwrap(), vec![0, 0]);
    }

    #[test]
    fn path_tree() {
        let t = Tree::from_level_counts(3, vec![vec![1], vec![1], vec![1]]).unwrap();
        let cpp = coalescent_times(&t).unwrap();
        assert_eq!(cpp.survivors(), 1);
        assert!(cpp.times().is_empty());
        assert_eq!(d_vector(&t, 1).unwrap(), vec![0, 0, 0]);
        assert!(genealogy_from_cpp(&cpp).is_empty());
        assert!(extract_btilde(&t).is_err());
        let dead = Tree::from_level_counts(2, vec![vec![1], vec![0]]).unwrap();
        assert!(coalescent_times(&dead).is_err());
    }

    #[test]
    fn table_from_cpp() {
        let cpp = Cpp::from_times(vec![1, 2, 1]).unwrap();
        let table = genealogy_from_cpp(&cpp);
        assert_eq!(table.get(1, 4), Some(2));
        assert_eq!(table.get(3, 4), Some(1));
        assert_eq!(table.get(4, 1), Some(2));
        assert_eq!(table.get(2, 2), None);
        assert_eq!(table.get(1, 5), None);
        assert_eq!(table, pairwise_coalescence(&binary2()));
        assert_eq!(cpp.key(), "K=4;A=1,2,1");
        assert!(Cpp::new(3, vec![1]).is_err());
        assert!(Cpp::new(2, vec![0]).is_err());
    }

    #[test]
    fn btilde_base_case() {
        let t = binary2();
        let seq = extract_btilde(&t).unwrap();
        assert_eq!(seq[0], BTildeState::from_atoms(vec![(1, 1)]));
        assert_eq!(seq[0].to_string(), "d1");
        let s = BTildeState::from_atoms(vec![(2, 1), (1, 2)]);
        assert_eq!(s.to_string(), "2d1+d2");
        assert_eq!(s.star().to_string(), "d1+d2");
        assert_eq!(BTildeState::null().star(), BTildeState::null());
    }

    #[test]
    fn structural_identities_on_random_trees() {
        for t in random_trees(1000, 5) {
            let k = t.survivors();
            let cpp = coalescent_times(&t).unwrap();
            // C from A equals C from ancestor indices
            assert_eq!(genealogy_from_cpp(&cpp), pairwise_coalescence(&t));
            assert_eq!(
                cpp.mrca_depth(),
                if k > 1 { pairwise_coalescence(&t).get(1, k).unwrap() } else { 0 }
            );
            let mut l = 0u32;
            for i in 1..=k {
                let d = d_vector(&t, i).unwrap();
                let first = d.iter().position(|&x| x != 0).map(|p| p as u32 + 1);
                if i < k {
                    let a = cpp.times()[i - 1];
                    // A_i = first nonzero index of D_i
                    assert_eq!(first, Some(a));
                    l = l.max(a);
                    let b = extract_b(&t, i).unwrap();
                    assert_eq!(b.len() as u32, l);
                    assert_eq!(&b[..], &d[..l as usize]);
                    // A_i = first nonzero entry of B_i
                    assert_eq!(b.iter().position(|&x| x != 0).map(|p| p as u32 + 1), Some(a));
                } else {
                    assert_eq!(first, None);
                }
            }
            // planar monotonicity of ancestor indices
            for n in 1..=t.horizon() {
                let idx: Vec<usize> = (1..=k).map(|i| t.ancestor_index(i, n).unwrap()).collect();
                assert!(idx.windows(2).all(|w| w[0] <= w[1]));
            }
            assert_eq!(t.ancestor_index(k, t.horizon()).unwrap(), 1);
            // D rows rebuild a tree with the same genealogy
            let rows: Vec<Vec<u32>> = (1..=k).map(|i| d_vector(&t, i).unwrap()).collect();
            let rebuilt = Tree::from_d_rows(t.horizon(), &rows).unwrap();
            assert_eq!(coalescent_times(&rebuilt).unwrap(), cpp);
            let rows2: Vec<Vec<u32>> = (1..=k).map(|i| d_vector(&rebuilt, i).unwrap()).collect();
            assert_eq!(rows, rows2);
            if k >= 2 {
                assert_eq!(b_sequence(&t).unwrap().len(), k - 1);
                assert_eq!(extract_btilde(&t).unwrap(), extract_btilde(&rebuilt).unwrap());
            }
        }
    }
}
