//! Exact laws of the backward chains by forward sweeps of their kernels.
//!
//! Kernels are enumerated by replaying the samplers' own transition functions
//! with every admissible script of `eta` values, so the sweep checks the code
//! that generates samples, not a second transcription of it.

use std::collections::{BTreeMap, HashMap};

use super::dist::DistTable;
use super::weight::Weight;
use super::EnumOptions;
use crate::chains::{b_transition, d_transition, BState, DState, StepOutcome};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::genealogy::outcome_key;

/// Tables of `P(eta^(-depth) = k)` for `depth = 1..=N`, plus the largest
/// mass left out of any of them.
pub struct EtaTables<W> {
    tables: Vec<Vec<W>>,
    pub missing: f64,
}

impl<W: Weight> EtaTables<W> {
    pub fn new(env: &Environment, opts: &EnumOptions) -> Result<Self> {
        if env.survival_prob(env.horizon())? <= 0.0 {
            return Err(Error::Degenerate("the founder cannot survive to generation 0".into()));
        }
        let mut tables = Vec::new();
        let mut missing: f64 = 0.0;
        for depth in 1..=env.horizon() {
            let (t, tail) = W::eta_table(env, depth, opts.eta_tail)?;
            missing = missing.max(tail);
            tables.push(t);
        }
        Ok(EtaTables { tables, missing })
    }

    pub fn horizon(&self) -> usize {
        self.tables.len()
    }

    pub fn table(&self, depth: usize) -> &[W] {
        &self.tables[depth - 1]
    }

    /// Every outcome of `step` with its probability. `step` must request
    /// draws through the supplied closure; the depth requested at each
    /// position may depend on earlier draws only.
    pub fn enumerate<T>(
        &self,
        mut step: impl FnMut(&mut dyn FnMut(usize) -> u32) -> Result<T>,
    ) -> Result<Vec<(T, W)>> {
        let mut out = Vec::new();
        let mut script: Vec<(usize, u32)> = Vec::new();
        loop {
            let mut pos = 0;
            let outcome = step(&mut |depth| {
                if pos == script.len() {
                    script.push((depth, 0));
                }
                debug_assert_eq!(script[pos].0, depth);
                pos += 1;
                script[pos - 1].1
            })?;
            script.truncate(pos);
            let w =
                script.iter().fold(W::one(), |w, &(d, v)| w * self.table(d)[v as usize].clone());
            if !w.is_zero() {
                out.push((outcome, w));
            }
            loop {
                match script.last_mut() {
                    None => return Ok(out),
                    Some(last) if (last.1 as usize) + 1 < self.table(last.0).len() => {
                        last.1 += 1;
                        break;
                    }
                    Some(_) => {
                        script.pop();
                    }
                }
            }
        }
    }
}

fn add<K: Ord, W: Weight>(map: &mut BTreeMap<K, W>, key: K, w: W) {
    let slot = map.entry(key).or_insert_with(W::zero);
    *slot = slot.clone() + w;
}

fn guard(len: usize, opts: &EnumOptions, what: &str) -> Result<()> {
    if len > opts.max_states {
        return Err(Error::EnumerationGuard(format!("more than {} {what}", opts.max_states)));
    }
    Ok(())
}

fn prune<K: Ord, W: Weight>(map: &mut BTreeMap<K, W>, opts: &EnumOptions) {
    if !W::EXACT {
        map.retain(|_, w| w.to_f64() >= opts.prune);
    }
}

fn finish<W: Weight>(acc: BTreeMap<String, W>) -> DistTable {
    let missing = if W::EXACT { 0.0 } else { 1.0 - acc.values().map(|w| w.to_f64()).sum::<f64>() };
    DistTable::from_weights(acc, missing)
}

/// Sweeps the `B` chain from `B_0`. With `steps = None` the result is the law
/// of `(K, A)`; with `Some(s)` paths still alive after `s` transitions are
/// collected under `A=a1,...,as;K>=s+1`.
fn sweep_b<W: Weight>(
    env: &Environment,
    steps: Option<usize>,
    opts: &EnumOptions,
) -> Result<DistTable> {
    let eta = EtaTables::<W>::new(env, opts)?;
    let horizon = eta.horizon();
    let mut kernel: HashMap<BState, Vec<(StepOutcome, W)>> = HashMap::new();
    let mut frontier: BTreeMap<(Vec<u32>, BState), W> = BTreeMap::new();
    frontier.insert((Vec::new(), BState::initial()), W::one());
    let mut acc: BTreeMap<String, W> = BTreeMap::new();
    let mut step = 0;
    while !frontier.is_empty() {
        if steps == Some(step) {
            for ((hist, _), w) in frontier {
                let joined: Vec<String> = hist.iter().map(|a| a.to_string()).collect();
                add(&mut acc, format!("A={};K>={}", joined.join(","), step + 1), w);
            }
            break;
        }
        step += 1;
        let mut next: BTreeMap<(Vec<u32>, BState), W> = BTreeMap::new();
        for ((hist, state), w) in frontier {
            if !kernel.contains_key(&state) {
                let moves = eta.enumerate(|draw| b_transition(&state, horizon, draw))?;
                kernel.insert(state.clone(), moves);
            }
            for (outcome, p) in &kernel[&state] {
                let m = w.clone() * p.clone();
                match outcome {
                    StepOutcome::Terminated => add(&mut acc, outcome_key(hist.len() + 1, &hist), m),
                    StepOutcome::Next(s) => {
                        let mut h = hist.clone();
                        h.push(s.coalescence_time().expect("non-null state"));
                        add(&mut next, (h, s.clone()), m);
                    }
                }
            }
        }
        prune(&mut next, opts);
        guard(next.len(), opts, "chain paths")?;
        frontier = next;
    }
    Ok(finish(acc))
}

/// Exact law of `(K, A)` emitted by the `B` chain.
pub fn exact_chain_law<W: Weight>(env: &Environment, opts: &EnumOptions) -> Result<DistTable> {
    sweep_b::<W>(env, None, opts)
}

/// Law of the first `steps` coalescence times of the `B` chain, with early
/// termination recorded as `K=k;A=...` and surviving paths as
/// `A=a1,...;K>=steps+1`.
pub fn exact_chain_prefix_law<W: Weight>(
    env: &Environment,
    steps: usize,
    opts: &EnumOptions,
) -> Result<DistTable> {
    sweep_b::<W>(env, Some(steps), opts)
}

/// Exact law of `(K, A)` emitted by the `D` chain, `K` being the index of the
/// first null state.
pub fn exact_d_chain_law<W: Weight>(env: &Environment, opts: &EnumOptions) -> Result<DistTable> {
    let eta = EtaTables::<W>::new(env, opts)?;
    let horizon = eta.horizon();
    let mut kernel: HashMap<DState, Vec<(DState, W)>> = HashMap::new();
    let mut frontier: BTreeMap<(Vec<u32>, DState), W> = BTreeMap::new();
    frontier.insert((Vec::new(), DState::null(horizon)), W::one());
    let mut acc: BTreeMap<String, W> = BTreeMap::new();
    while !frontier.is_empty() {
        let mut next: BTreeMap<(Vec<u32>, DState), W> = BTreeMap::new();
        for ((hist, state), w) in frontier {
            if !kernel.contains_key(&state) {
                let moves = eta.enumerate(|draw| d_transition(&state, horizon, draw))?;
                kernel.insert(state.clone(), moves);
            }
            for (d, p) in &kernel[&state] {
                let m = w.clone() * p.clone();
                match d.coalescence_time() {
                    None => add(&mut acc, outcome_key(hist.len() + 1, &hist), m),
                    Some(a) => {
                        let mut h = hist.clone();
                        h.push(a);
                        add(&mut next, (h, d.clone()), m);
                    }
                }
            }
        }
        prune(&mut next, opts);
        guard(next.len(), opts, "chain paths")?;
        frontier = next;
    }
    Ok(finish(acc))
}

/// Joint law of `(A_1, ..., A_{i-1}, D_i)` for `i = 1..=steps`, running the
/// `D` chain through null states (a null state redraws every entry). A time
/// beyond the horizon is written `inf`. Keys are `A=...;D=...`.
pub fn d_chain_joint_laws<W: Weight>(
    env: &Environment,
    steps: usize,
    opts: &EnumOptions,
) -> Result<Vec<DistTable>> {
    let eta = EtaTables::<W>::new(env, opts)?;
    let horizon = eta.horizon();
    let mut kernel: HashMap<DState, Vec<(DState, W)>> = HashMap::new();
    let mut frontier: BTreeMap<(Vec<Option<u32>>, DState), W> = BTreeMap::new();
    frontier.insert((Vec::new(), DState::null(horizon)), W::one());
    let mut laws = Vec::new();
    for _ in 0..steps {
        let mut next: BTreeMap<(Vec<Option<u32>>, DState), W> = BTreeMap::new();
        for ((hist, state), w) in &frontier {
            if !kernel.contains_key(state) {
                let moves = eta.enumerate(|draw| d_transition(state, horizon, draw))?;
                kernel.insert(state.clone(), moves);
            }
            for (d, p) in &kernel[state] {
                add(&mut next, (hist.clone(), d.clone()), w.clone() * p.clone());
            }
        }
        prune(&mut next, opts);
        guard(next.len(), opts, "chain paths")?;
        let mut table: BTreeMap<String, W> = BTreeMap::new();
        for ((hist, d), w) in &next {
            add(&mut table, joint_key(hist, d.entries()), w.clone());
        }
        laws.push(finish(table));
        // append A_i of the new state to the history for the next round
        frontier = next
            .into_iter()
            .map(|((mut hist, d), w)| {
                hist.push(d.coalescence_time());
                ((hist, d), w)
            })
            .collect();
    }
    Ok(laws)
}

fn time_label(a: Option<u32>) -> String {
    a.map_or_else(|| "inf".to_string(), |a| a.to_string())
}

pub(crate) fn joint_key(hist: &[Option<u32>], d: &[u32]) -> String {
    let hist: Vec<String> = hist.iter().map(|&a| time_label(a)).collect();
    let d: Vec<String> = d.iter().map(|x| x.to_string()).collect();
    format!("A={};D={}", hist.join(","), d.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgf::OffspringLaw;
    use num_rational::BigRational;
    use num_traits::One;

    fn opts() -> EnumOptions {
        EnumOptions::default()
    }

    #[test]
    fn kernel_enumeration_is_a_law() {
        let env = Environment::new(vec![
            OffspringLaw::finite(vec![0.25, 0.5, 0.25]).unwrap(),
            OffspringLaw::finite(vec![0.125, 0.5, 0.125, 0.25]).unwrap(),
            OffspringLaw::finite(vec![0.25, 0.25, 0.5]).unwrap(),
        ])
        .unwrap();
        let eta = EtaTables::<BigRational>::new(&env, &opts()).unwrap();
        for entries in [vec![], vec![1], vec![0, 2], vec![0, 0, 1], vec![2, 0, 1]] {
            let state = BState::from_entries(entries).unwrap();
            let moves = eta.enumerate(|draw| b_transition(&state, 3, draw)).unwrap();
            let total = moves.iter().fold(BigRational::from_integer(0.into()), |a, (_, w)| a + w);
            assert!(total.is_one(), "{state:?}");
        }
    }

    #[test]
    fn deterministic_chain() {
        let env = Environment::constant(OffspringLaw::dirac(2), 2).unwrap();
        let t = exact_chain_law::<f64>(&env, &opts()).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("K=4;A=1,2,1"), 1.0);
        assert_eq!(exact_d_chain_law::<f64>(&env, &opts()).unwrap().get("K=4;A=1,2,1"), 1.0);
        let prefix = exact_chain_prefix_law::<f64>(&env, 2, &opts()).unwrap();
        assert_eq!(prefix.get("A=1,2;K>=3"), 1.0);
    }

    #[test]
    fn first_time_marginal_matches_tail() {
        let env = Environment::new(vec![
            OffspringLaw::finite(vec![0.25, 0.5, 0.25]).unwrap(),
            OffspringLaw::finite(vec![0.5, 0.25, 0.25]).unwrap(),
        ])
        .unwrap();
        let t = exact_chain_law::<BigRational>(&env, &opts()).unwrap();
        assert!(t.exact_total().unwrap().is_one());
        for n in 1..=2u32 {
            let tail = t.mass_where(|k| {
                let (_, a) = super::super::dist::parse_outcome(k).unwrap();
                a.first().is_none_or(|&a1| a1 > n)
            });
            assert!((tail - crate::eta::a1_tail(&env, n as usize).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn joint_laws_are_laws() {
        let env =
            Environment::constant(OffspringLaw::finite(vec![0.25, 0.5, 0.25]).unwrap(), 2).unwrap();
        let laws = d_chain_joint_laws::<BigRational>(&env, 3, &opts()).unwrap();
        assert_eq!(laws.len(), 3);
        for t in &laws {
            assert!(t.exact_total().unwrap().is_one());
        }
        assert!(laws[0].entries().keys().all(|k| k.starts_with("A=;D=")));
        assert!(laws[2].entries().keys().any(|k| k.contains("inf")));
    }
}
