//! Planar Galton-Watson trees in a varying environment.
//!
//! A [`Tree`] is rooted at generation `-N` and stored level by level: level
//! `d` holds the individuals of generation `-N + d` in planar order (left to
//! right). Children of one individual occupy a contiguous block of the next
//! level, in the order given by the mother rule, so lineages never cross and
//! the present-day individuals (level `N`) are numbered in lexicographic
//! Ulam-Harris order.

use std::fmt::Write as _;

use rand::Rng;

use crate::environment::Environment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    horizon: usize,
    /// `child_counts[d][j]` for levels `0..N`.
    child_counts: Vec<Vec<u32>>,
    /// Prefix sums of `child_counts[d]`, one longer.
    offsets: Vec<Vec<usize>>,
    /// `parents[d][j]` is the index in level `d - 1`; empty for the root level.
    parents: Vec<Vec<usize>>,
    /// First present-day rank (0-based) among the descendants of each node.
    leaf_lo: Vec<Vec<usize>>,
    /// Number of present-day descendants of each node.
    leaf_count: Vec<Vec<usize>>,
}

/// Resource limits for forward simulation.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub max_nodes: usize,
    pub max_attempts: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { max_nodes: 10_000_000, max_attempts: 1_000_000 }
    }
}

impl Tree {
    /// Builds a tree from per-level child counts. `counts[0]` has one entry
    /// (the founder) and `counts[d + 1].len()` equals the sum of `counts[d]`.
    pub fn from_level_counts(horizon: usize, counts: Vec<Vec<u32>>) -> Result<Tree> {
        if horizon == 0 {
            return Err(Error::InvalidEnvironment("horizon must be at least 1".into()));
        }
        if counts.len() != horizon {
            return Err(Error::OutOfRange(format!(
                "expected {horizon} levels of child counts, got {}",
                counts.len()
            )));
        }
        if counts[0].len() != 1 {
            return Err(Error::OutOfRange("the root level must hold exactly one node".into()));
        }
        for d in 1..horizon {
            let expected: usize = counts[d - 1].iter().map(|&c| c as usize).sum();
            if counts[d].len() != expected {
                return Err(Error::OutOfRange(format!(
                    "level {d} has {} nodes, parents declare {expected}",
                    counts[d].len()
                )));
            }
        }
        Ok(Self::assemble(horizon, counts))
    }

    fn assemble(horizon: usize, child_counts: Vec<Vec<u32>>) -> Tree {
        let mut offsets = Vec::with_capacity(horizon);
        let mut parents = vec![Vec::new()];
        for level in &child_counts {
            let mut off = Vec::with_capacity(level.len() + 1);
            let mut acc = 0usize;
            off.push(0);
            let mut par = Vec::new();
            for (j, &c) in level.iter().enumerate() {
                acc += c as usize;
                off.push(acc);
                par.extend(std::iter::repeat_n(j, c as usize));
            }
            offsets.push(off);
            parents.push(par);
        }
        let leaves = parents[horizon].len();
        let mut leaf_count = vec![Vec::new(); horizon + 1];
        let mut leaf_lo = vec![Vec::new(); horizon + 1];
        leaf_count[horizon] = vec![1; leaves];
        leaf_lo[horizon] = (0..leaves).collect();
        for d in (0..horizon).rev() {
            let counts: Vec<usize> = (0..child_counts[d].len())
                .map(|j| leaf_count[d + 1][offsets[d][j]..offsets[d][j + 1]].iter().sum())
                .collect();
            let mut lo = Vec::with_capacity(counts.len());
            let mut acc = 0;
            for &c in &counts {
                lo.push(acc);
                acc += c;
            }
            leaf_count[d] = counts;
            leaf_lo[d] = lo;
        }
        Tree { horizon, child_counts, offsets, parents, leaf_lo, leaf_count }
    }

    /// Rebuilds the tree of surviving lineages from the full sequences
    /// `D_1, ..., D_K` (each of length `N`). The last row must be null.
    pub fn from_d_rows(horizon: usize, rows: &[Vec<u32>]) -> Result<Tree> {
        if rows.is_empty() {
            return Err(Error::OutOfRange("at least one row is required".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != horizon) {
            return Err(Error::OutOfRange(format!(
                "row {} does not have length {horizon}",
                bad + 1
            )));
        }
        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); horizon + 1];
        let mut level_len = vec![0usize; horizon + 1];
        level_len[0] = 1;
        let mut spine = vec![0usize; horizon + 1];
        let mut grow = |from: usize, spine: &mut Vec<usize>| {
            for d in from..=horizon {
                parents[d].push(spine[d - 1]);
                spine[d] = level_len[d];
                level_len[d] += 1;
            }
        };
        grow(1, &mut spine);
        // remaining[n - 1] = right-hand surviving daughters still to visit at generation -n
        let mut remaining = rows[0].clone();
        for (i, pair) in rows.windows(2).enumerate() {
            if remaining != pair[0] {
                return Err(Error::InconsistentState(format!(
                    "row {} disagrees with the tree built so far",
                    i + 1
                )));
            }
            let a = pair[0].iter().position(|&x| x != 0).ok_or_else(|| {
                Error::InconsistentState(format!("row {} is null but more rows follow", i + 1))
            })? + 1;
            remaining[a - 1] -= 1;
            grow(horizon - a + 1, &mut spine);
            remaining[..a - 1].copy_from_slice(&pair[1][..a - 1]);
        }
        if &remaining != rows.last().unwrap() || remaining.iter().any(|&x| x != 0) {
            return Err(Error::InconsistentState("the last row must be null".into()));
        }
        let child_counts = (0..horizon)
            .map(|d| {
                let mut c = vec![0u32; level_len[d]];
                for &p in &parents[d + 1] {
                    c[p] += 1;
                }
                c
            })
            .collect();
        Ok(Self::assemble(horizon, child_counts))
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of individuals alive at generation 0.
    pub fn survivors(&self) -> usize {
        self.parents[self.horizon].len()
    }

    pub fn nodes_at_level(&self, d: usize) -> usize {
        if d == 0 {
            1
        } else {
            self.parents[d].len()
        }
    }

    pub fn total_nodes(&self) -> usize {
        (0..=self.horizon).map(|d| self.nodes_at_level(d)).sum()
    }

    /// Per-level child counts, root level first.
    pub fn child_counts(&self) -> &[Vec<u32>] {
        &self.child_counts
    }

    pub fn child_count(&self, d: usize, j: usize) -> u32 {
        if d == self.horizon {
            0
        } else {
            self.child_counts[d][j]
        }
    }

    pub fn survives(&self, d: usize, j: usize) -> bool {
        self.leaf_count[d][j] > 0
    }

    /// Children of node `j` at level `d < N`, as indices into level `d + 1`.
    pub(crate) fn children(&self, d: usize, j: usize) -> std::ops::Range<usize> {
        self.offsets[d][j]..self.offsets[d][j + 1]
    }

    pub(crate) fn parents_at(&self, d: usize) -> &[usize] {
        &self.parents[d]
    }

    pub(crate) fn leaf_range(&self, d: usize, j: usize) -> std::ops::Range<usize> {
        let lo = self.leaf_lo[d][j];
        lo..lo + self.leaf_count[d][j]
    }

    pub(crate) fn check_individual(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.survivors() {
            return Err(Error::OutOfRange(format!(
                "individual {i} outside [1, {}]",
                self.survivors()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_generation(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.horizon {
            return Err(Error::OutOfRange(format!("n = {n} outside [1, {}]", self.horizon)));
        }
        Ok(())
    }

    /// Level index (0-based, planar order) of the ancestor of present-day
    /// individual `i` at generation `-n`.
    pub(crate) fn ancestor_node(&self, i: usize, n: usize) -> usize {
        let mut j = i - 1;
        for d in ((self.horizon - n + 1)..=self.horizon).rev() {
            j = self.parents[d][j];
        }
        j
    }

    /// Rank (1-based, planar order among all individuals of generation `-n`)
    /// of the ancestor of present-day individual `i`.
    pub fn ancestor_index(&self, i: usize, n: usize) -> Result<usize> {
        self.check_individual(i)?;
        self.check_generation(n)?;
        Ok(self.ancestor_node(i, n) + 1)
    }

    /// One line per node, `label child_count survives_flag`, in lexicographic
    /// Ulam-Harris order. The root is labelled `root`; other labels are
    /// dot-joined child positions.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut label: Vec<usize> = Vec::new();
        self.dump_node(0, 0, &mut label, &mut out);
        out
    }

    fn dump_node(&self, d: usize, j: usize, label: &mut Vec<usize>, out: &mut String) {
        let text = if label.is_empty() {
            "root".to_string()
        } else {
            label.iter().map(usize::to_string).collect::<Vec<_>>().join(".")
        };
        let _ =
            writeln!(out, "{text} {} {}", self.child_count(d, j), u8::from(self.survives(d, j)));
        if d < self.horizon {
            for (pos, c) in self.children(d, j).enumerate() {
                label.push(pos + 1);
                self.dump_node(d + 1, c, label, out);
                label.pop();
            }
        }
    }
}

/// Grows a tree from a single founder at generation `-N`; each individual at
/// generation `m` draws its number of children independently from the law of
/// that generation.
pub fn simulate_tree<R: Rng + ?Sized>(
    env: &Environment,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<Tree> {
    let horizon = env.horizon();
    let mut counts: Vec<Vec<u32>> = Vec::with_capacity(horizon);
    let mut width = 1usize;
    let mut total = 1usize;
    for d in 0..horizon {
        let law = env.law_at_depth_from_root(d);
        let level: Vec<u32> = (0..width).map(|_| law.sample(rng) as u32).collect();
        width = level.iter().map(|&c| c as usize).sum();
        total += width;
        if total > opts.max_nodes {
            return Err(Error::TreeTooLarge(opts.max_nodes));
        }
        counts.push(level);
    }
    Ok(Tree::assemble(horizon, counts))
}

/// Rejection-samples trees until one has a survivor at generation 0.
/// Returns the tree and the number of attempts used.
pub fn condition_on_survival<R: Rng + ?Sized>(
    env: &Environment,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<(Tree, u64)> {
    if env.survival_prob(env.horizon())? <= 0.0 {
        return Err(Error::Degenerate("the founder cannot survive to generation 0".into()));
    }
    for attempt in 1..=opts.max_attempts {
        let tree = simulate_tree(env, rng, opts)?;
        if tree.survivors() > 0 {
            return Ok((tree, attempt));
        }
    }
    Err(Error::AttemptCap(opts.max_attempts))
}
