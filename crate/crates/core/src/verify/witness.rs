//! Search for a pair of `B~` histories that share their last state but
//! predict different next states, which rules out the Markov property.

use std::collections::BTreeMap;

use super::chain_law::EtaTables;
use super::EnumOptions;
use crate::chains::{d_transition, DState};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::genealogy::{extract_btilde, BTildeState};
use crate::montecarlo::par_map;
use crate::tree::{condition_on_survival, SimOptions};

/// Label of the next state after the last individual.
pub const END: &str = "end";

/// Two histories `(B~_{i-1}, B~_i)` ending in the same state with different
/// conditional laws of `B~_{i+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub env: Environment,
    pub step: usize,
    pub current: BTildeState,
    pub prev_a: BTildeState,
    pub prev_b: BTildeState,
    /// Probabilities of the two histories.
    pub mass_a: f64,
    pub mass_b: f64,
    /// Conditional laws of the next state, keyed by its display form or [`END`].
    pub law_a: BTreeMap<String, f64>,
    pub law_b: BTreeMap<String, f64>,
    pub tv: f64,
}

impl Witness {
    /// The next-state label where the two conditional laws differ most, and
    /// the difference `law_a - law_b` there.
    pub fn largest_gap(&self) -> (String, f64) {
        let mut best = (String::new(), 0.0f64);
        for key in self.law_a.keys().chain(self.law_b.keys()) {
            let gap = self.law_a.get(key).unwrap_or(&0.0) - self.law_b.get(key).unwrap_or(&0.0);
            if gap.abs() > best.1.abs() {
                best = (key.clone(), gap);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessSearch {
    Found(Box<Witness>),
    /// No pair exceeded the threshold; `max_tv` is the largest distance seen.
    NotFound {
        pairs: usize,
        max_tv: f64,
    },
}

type Laws = BTreeMap<(usize, BTildeState, BTildeState), BTreeMap<String, f64>>;

/// Exact joint law of `(i, B~_i, B~_{i-1}, next)` for `i >= 2`, by a sweep of
/// the `D` chain carrying the last two `B~` states.
fn history_laws(env: &Environment, opts: &EnumOptions) -> Result<Laws> {
    let eta = EtaTables::<f64>::new(env, opts)?;
    let horizon = eta.horizon();
    type Key = (DState, Option<BTildeState>, BTildeState);
    let mut laws: Laws = BTreeMap::new();
    let mut frontier: BTreeMap<Key, f64> = BTreeMap::new();
    for (d, p) in eta.enumerate(|draw| d_transition(&DState::null(horizon), horizon, draw))? {
        if let Some(a) = d.coalescence_time() {
            let first = BTildeState::null().next(a, d.entries()[a as usize - 1]);
            *frontier.entry((d, None, first)).or_insert(0.0) += p;
        }
    }
    let mut step = 1;
    while !frontier.is_empty() {
        let mut next: BTreeMap<Key, f64> = BTreeMap::new();
        for ((d, prev, cur), w) in frontier {
            let moves = eta.enumerate(|draw| d_transition(&d, horizon, draw))?;
            for (d2, p) in moves {
                let label = match d2.coalescence_time() {
                    None => END.to_string(),
                    Some(a) => {
                        let b = cur.next(a, d2.entries()[a as usize - 1]);
                        let label = b.to_string();
                        *next.entry((d2, Some(cur.clone()), b)).or_insert(0.0) += w * p;
                        label
                    }
                };
                if let Some(prev) = &prev {
                    let law = laws.entry((step, cur.clone(), prev.clone())).or_default();
                    *law.entry(label).or_insert(0.0) += w * p;
                }
            }
        }
        next.retain(|_, w| *w >= opts.prune);
        if next.len() > opts.max_states {
            return Err(Error::EnumerationGuard(format!("more than {} D states", opts.max_states)));
        }
        frontier = next;
        step += 1;
    }
    Ok(laws)
}

/// Previous state, its mass and the conditional law that follows it.
type History = (BTildeState, f64, BTreeMap<String, f64>);

/// Exact search over histories of length two. Pairs are tried in decreasing
/// order of the smaller history probability and the first with a conditional
/// total-variation distance above `threshold` is returned.
pub fn btilde_witness_search(
    env: &Environment,
    threshold: f64,
    opts: &EnumOptions,
) -> Result<WitnessSearch> {
    if env.max_support().is_none_or(|m| m > 3) || env.horizon() > 6 {
        return Err(Error::OutOfRange(
            "witness search needs support within {0,...,3} and horizon at most 6".into(),
        ));
    }
    let laws = history_laws(env, opts)?;
    let mut groups: BTreeMap<(usize, BTildeState), Vec<History>> = BTreeMap::new();
    for ((step, cur, prev), law) in laws {
        let mass: f64 = law.values().sum();
        let cond = law.into_iter().map(|(k, p)| (k, p / mass)).collect();
        groups.entry((step, cur)).or_default().push((prev, mass, cond));
    }
    let mut candidates = Vec::new();
    for ((step, cur), hist) in &groups {
        for (x, a) in hist.iter().enumerate() {
            for b in &hist[x + 1..] {
                let tv = conditional_tv(&a.2, &b.2);
                candidates.push((a.1.min(b.1), tv, *step, cur, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0));
    let max_tv = candidates.iter().map(|c| c.1).fold(0.0, f64::max);
    let pairs = candidates.len();
    for (_, tv, step, cur, a, b) in candidates {
        if tv > threshold {
            return Ok(WitnessSearch::Found(Box::new(Witness {
                env: env.clone(),
                step,
                current: cur.clone(),
                prev_a: a.0.clone(),
                prev_b: b.0.clone(),
                mass_a: a.1,
                mass_b: b.1,
                law_a: a.2.clone(),
                law_b: b.2.clone(),
                tv,
            })));
        }
    }
    Ok(WitnessSearch::NotFound { pairs, max_tv })
}

fn conditional_tv(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let mut sum = 0.0;
    for key in a.keys().chain(b.keys().filter(|k| !a.contains_key(*k))) {
        sum += (a.get(key).unwrap_or(&0.0) - b.get(key).unwrap_or(&0.0)).abs();
    }
    sum / 2.0
}

/// Conditional frequencies of the witness's largest-gap outcome among
/// simulated trees.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessValidation {
    pub samples: u64,
    pub outcome: String,
    pub exact_gap: f64,
    pub count_a: u64,
    pub hits_a: u64,
    pub count_b: u64,
    pub hits_b: u64,
    pub empirical_gap: f64,
    /// Two-sample z statistic of the empirical gap.
    pub z: f64,
}

impl WitnessValidation {
    /// Same sign as the exact gap, at least two standard errors away from zero.
    pub fn agrees(&self) -> bool {
        self.empirical_gap.signum() == self.exact_gap.signum() && self.z.abs() >= 2.0
    }
}

/// Re-estimates the witness by simulating `samples` trees conditioned on
/// survival and reading `B~` off each one.
pub fn validate_witness(
    witness: &Witness,
    samples: u64,
    seed: u64,
    threads: usize,
) -> Result<WitnessValidation> {
    let (outcome, exact_gap) = witness.largest_gap();
    let i = witness.step;
    let opts = SimOptions::default();
    let per_run = par_map(seed, samples, threads, |_, rng| -> Result<Option<(bool, bool)>> {
        let (tree, _) = condition_on_survival(&witness.env, rng, &opts)?;
        if tree.survivors() < 2 {
            return Ok(None);
        }
        let bt = extract_btilde(&tree)?;
        if bt.len() < i || bt[i - 1] != witness.current {
            return Ok(None);
        }
        let prev = &bt[i - 2];
        let is_a = *prev == witness.prev_a;
        if !is_a && *prev != witness.prev_b {
            return Ok(None);
        }
        let next = bt.get(i).map_or_else(|| END.to_string(), |b| b.to_string());
        Ok(Some((is_a, next == outcome)))
    });
    let (mut count_a, mut hits_a, mut count_b, mut hits_b) = (0u64, 0u64, 0u64, 0u64);
    for r in per_run {
        match r? {
            Some((true, hit)) => {
                count_a += 1;
                hits_a += hit as u64;
            }
            Some((false, hit)) => {
                count_b += 1;
                hits_b += hit as u64;
            }
            None => {}
        }
    }
    let fa = hits_a as f64 / count_a.max(1) as f64;
    let fb = hits_b as f64 / count_b.max(1) as f64;
    let se =
        (fa * (1.0 - fa) / count_a.max(1) as f64 + fb * (1.0 - fb) / count_b.max(1) as f64).sqrt();
    let empirical_gap = fa - fb;
    let z = if se > 0.0 { empirical_gap / se } else { 0.0 };
    Ok(WitnessValidation {
        samples,
        outcome,
        exact_gap,
        count_a,
        hits_a,
        count_b,
        hits_b,
        empirical_gap,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgf::OffspringLaw;

    #[test]
    fn critical_identity_has_no_witness() {
        let env = Environment::constant(OffspringLaw::dirac(1), 4).unwrap();
        let out = btilde_witness_search(&env, 0.01, &EnumOptions::default()).unwrap();
        assert_eq!(out, WitnessSearch::NotFound { pairs: 0, max_tv: 0.0 });
    }

    #[test]
    fn deterministic_binary_tree_has_no_witness() {
        // every history occurs with probability one or zero
        let env = Environment::constant(OffspringLaw::dirac(2), 3).unwrap();
        let out = btilde_witness_search(&env, 0.01, &EnumOptions::default()).unwrap();
        assert!(matches!(out, WitnessSearch::NotFound { .. }));
    }

    #[test]
    fn rejects_large_support() {
        let env = Environment::constant(OffspringLaw::dirac(4), 2).unwrap();
        assert!(btilde_witness_search(&env, 0.01, &EnumOptions::default()).is_err());
    }

    #[test]
    fn histories_are_a_sub_law() {
        let env =
            Environment::constant(OffspringLaw::finite(vec![0.25, 0.5, 0.25]).unwrap(), 3).unwrap();
        let laws = history_laws(&env, &EnumOptions::default()).unwrap();
        for ((step, _, _), law) in &laws {
            assert!(*step >= 2);
            assert!(law.values().all(|&p| p > 0.0));
        }
        // total mass at each step is P(K > step) <= 1
        let mut by_step: BTreeMap<usize, f64> = BTreeMap::new();
        for ((step, _, _), law) in &laws {
            *by_step.entry(*step).or_default() += law.values().sum::<f64>();
        }
        assert!(by_step.values().all(|&m| m <= 1.0 + 1e-12));
        assert!(by_step.values().zip(by_step.values().skip(1)).all(|(a, b)| b <= a));
    }
}
