//! Exact law of `(K, A)` computed from the trees themselves.

use std::collections::BTreeMap;

use super::dist::DistTable;
use super::weight::{law_table, Weight};
use super::EnumOptions;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::genealogy::{coalescent_times, outcome_key};
use crate::tree::Tree;

/// Law of `(K, A)` given `K >= 1`, by listing every tree with its probability
/// and reading the coalescent point process off each one. Needs finite support.
pub fn brute_force_tree_law<W: Weight>(env: &Environment, opts: &EnumOptions) -> Result<DistTable> {
    if env.max_support().is_none() {
        return Err(Error::InvalidLaw("brute-force enumeration needs finite support".into()));
    }
    let horizon = env.horizon();
    let tables = env
        .laws()
        .iter()
        .map(|law| law_table::<W>(law, 0.0).map(|t| t.0))
        .collect::<Result<Vec<_>>>()?;
    let mut acc: BTreeMap<String, W> = BTreeMap::new();
    let mut visited = 0usize;
    let mut counts: Vec<Vec<u32>> = Vec::with_capacity(horizon);
    enumerate_levels(&tables, horizon, 1, W::one(), &mut counts, &mut acc, &mut visited, opts)?;
    condition_on_survival(env, acc, 0.0)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_levels<W: Weight>(
    tables: &[Vec<W>],
    horizon: usize,
    width: usize,
    weight: W,
    counts: &mut Vec<Vec<u32>>,
    acc: &mut BTreeMap<String, W>,
    visited: &mut usize,
    opts: &EnumOptions,
) -> Result<()> {
    let d = counts.len();
    if d == horizon {
        *visited += 1;
        if *visited > opts.max_states {
            return Err(Error::EnumerationGuard(format!(
                "more than {} trees to enumerate",
                opts.max_states
            )));
        }
        let tree = Tree::from_level_counts(horizon, counts.clone())?;
        if tree.survivors() > 0 {
            let cpp = coalescent_times(&tree)?;
            let slot = acc.entry(cpp.key()).or_insert_with(W::zero);
            *slot = slot.clone() + weight;
        }
        return Ok(());
    }
    let probs = &tables[d];
    // odometer over the child counts of the `width` individuals at this level
    let mut level = vec![0u32; width];
    loop {
        let w = level.iter().fold(weight.clone(), |w, &c| w * probs[c as usize].clone());
        if !w.is_zero() {
            let next_width = level.iter().map(|&c| c as usize).sum();
            counts.push(level.clone());
            enumerate_levels(tables, horizon, next_width, w, counts, acc, visited, opts)?;
            counts.pop();
        }
        let mut pos = 0;
        loop {
            if pos == width {
                return Ok(());
            }
            if (level[pos] as usize) + 1 < probs.len() {
                level[pos] += 1;
                break;
            }
            level[pos] = 0;
            pos += 1;
        }
    }
}

/// A subtree outcome: `None` if it has no descendant at generation 0,
/// otherwise the coalescence times among its descendants.
type SubOutcome = Option<Vec<u32>>;

/// Law of `(K, A)` given `K >= 1` from the branching property: the process
/// below an individual at generation `-h` is the concatenation of the
/// processes below its children, separated by coalescence time `h`.
/// Linear-fractional laws are truncated and pruned, with the lost mass
/// reported in the table.
pub fn exact_tree_law<W: Weight>(env: &Environment, opts: &EnumOptions) -> Result<DistTable> {
    let mut below: BTreeMap<SubOutcome, W> = BTreeMap::new();
    below.insert(Some(Vec::new()), W::one());
    for h in 1..=env.horizon() {
        let (probs, tail) = law_table::<W>(env.law_for_generation(-(h as i64))?, opts.law_tail)?;
        // at_least[k] = P(at least k children), used to prune partial products
        let mut at_least = vec![tail; probs.len() + 1];
        for k in (0..probs.len()).rev() {
            at_least[k] = at_least[k + 1] + probs[k].to_f64();
        }
        let mut with_k: BTreeMap<SubOutcome, W> = BTreeMap::new();
        with_k.insert(None, W::one());
        let mut law: BTreeMap<SubOutcome, W> = BTreeMap::new();
        for (k, p) in probs.iter().enumerate() {
            if k > 0 {
                with_k = append_child(&with_k, &below, h as u32, at_least[k], opts)?;
            }
            if p.is_zero() {
                continue;
            }
            for (o, w) in &with_k {
                let slot = law.entry(o.clone()).or_insert_with(W::zero);
                *slot = slot.clone() + w.clone() * p.clone();
            }
        }
        below = law;
    }
    let mut acc = BTreeMap::new();
    let mut represented = 0.0;
    for (o, w) in below {
        represented += w.to_f64();
        if let Some(times) = o {
            acc.insert(outcome_key(times.len() + 1, &times), w);
        }
    }
    let missing = if W::EXACT { 0.0 } else { (1.0 - represented).max(0.0) };
    condition_on_survival(env, acc, missing)
}

fn append_child<W: Weight>(
    left: &BTreeMap<SubOutcome, W>,
    child: &BTreeMap<SubOutcome, W>,
    h: u32,
    weight_bound: f64,
    opts: &EnumOptions,
) -> Result<BTreeMap<SubOutcome, W>> {
    let mut out: BTreeMap<SubOutcome, W> = BTreeMap::new();
    for (a, wa) in left {
        for (b, wb) in child {
            let w = wa.clone() * wb.clone();
            if !W::EXACT && w.to_f64() * weight_bound < opts.prune {
                continue;
            }
            let joined = match (a, b) {
                (None, x) | (x, None) => x.clone(),
                (Some(x), Some(y)) => {
                    let mut v = x.clone();
                    v.push(h);
                    v.extend_from_slice(y);
                    Some(v)
                }
            };
            let slot = out.entry(joined).or_insert_with(W::zero);
            *slot = slot.clone() + w;
        }
    }
    if out.len() > opts.max_states {
        return Err(Error::EnumerationGuard(format!(
            "more than {} subtree outcomes at height {h}",
            opts.max_states
        )));
    }
    Ok(out)
}

/// Divides by `P(K >= 1)`: the exact table total for rationals, the pgf value
/// otherwise (so truncation shows up as missing mass rather than being
/// renormalized away).
fn condition_on_survival<W: Weight>(
    env: &Environment,
    acc: BTreeMap<String, W>,
    missing: f64,
) -> Result<DistTable> {
    let survival_f = env.survival_prob(env.horizon())?;
    if survival_f <= 0.0 {
        return Err(Error::Degenerate("the founder cannot survive to generation 0".into()));
    }
    let survival = if W::EXACT {
        acc.values().fold(W::zero(), |a, b| a + b.clone())
    } else {
        W::from_f64(survival_f).unwrap()
    };
    let conditioned = acc.into_iter().map(|(k, w)| (k, w / survival.clone())).collect();
    Ok(DistTable::from_weights(conditioned, missing / survival_f))
}
