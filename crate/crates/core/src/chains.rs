//! Direct samplers for the backward processes.
//!
//! * [`b_step`] / [`b_run`]: the finite-information vector chain `B`.
//! * [`d_step`] / [`d_run`]: the sequence chain `D`, truncated to the horizon.
//! * [`lf_cpp_sample`] / [`lf_run`]: i.i.d. coalescence times for
//!   linear-fractional environments.
//!
//! All samplers work with a finite horizon `N`: the founder sits at
//! generation `-N`, so every coalescence time is at most `N`, and a step that
//! finds no non-zero `eta` within the horizon means there is no further
//! individual.

use rand::Rng;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::eta::{eta_at_depth, EtaLaw};
use crate::genealogy::Cpp;

/// The laws of `eta^(-1), ..., eta^(-N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaKernel {
    laws: Vec<EtaLaw>,
}

impl EtaKernel {
    pub fn new(env: &Environment) -> Result<Self> {
        if env.survival_prob(env.horizon())? <= 0.0 {
            return Err(Error::Degenerate("the founder cannot survive to generation 0".into()));
        }
        let laws = (1..=env.horizon()).map(|d| eta_at_depth(env, d)).collect::<Result<_>>()?;
        Ok(EtaKernel { laws })
    }

    pub fn horizon(&self) -> usize {
        self.laws.len()
    }

    /// Law of `eta^(-depth)`, `1 <= depth <= N`.
    pub fn law(&self, depth: usize) -> &EtaLaw {
        &self.laws[depth - 1]
    }

    pub fn sample<R: Rng + ?Sized>(&self, depth: usize, rng: &mut R) -> u32 {
        self.law(depth).sample(rng) as u32
    }
}

/// State of the `B` chain: the vector `(b(1), ..., b(l))`. The empty vector is
/// the initial state `B_0`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BState {
    entries: Vec<u32>,
}

impl BState {
    pub fn initial() -> Self {
        BState::default()
    }

    /// A non-initial state must carry a non-zero entry.
    pub fn from_entries(entries: Vec<u32>) -> Result<Self> {
        if !entries.is_empty() && entries.iter().all(|&x| x == 0) {
            return Err(Error::InconsistentState("a non-empty B state must be non-null".into()));
        }
        Ok(BState { entries })
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    /// Number of entries, `l_i`.
    pub fn length(&self) -> usize {
        self.entries.len()
    }

    pub fn is_initial(&self) -> bool {
        self.entries.is_empty()
    }

    /// First non-zero position (1-based): the coalescence time carried by the state.
    pub fn coalescence_time(&self) -> Option<u32> {
        first_nonzero(&self.entries)
    }
}

fn first_nonzero(v: &[u32]) -> Option<u32> {
    v.iter().position(|&x| x != 0).map(|p| p as u32 + 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Next(BState),
    /// No further individual exists within the horizon.
    Terminated,
}

/// One transition of the `B` chain with the `eta` values supplied by `draw(depth)`.
///
/// Entries strictly above `A` are copied, the entry at `A` loses one, entries
/// below `A` are redrawn; if that leaves the first `l` entries null the vector
/// is extended with fresh draws at depths `l + 1, l + 2, ...` until one is
/// non-zero.
pub fn b_transition(
    state: &BState,
    horizon: usize,
    mut draw: impl FnMut(usize) -> u32,
) -> Result<StepOutcome> {
    let ell = state.length();
    if ell > horizon {
        return Err(Error::InconsistentState(format!(
            "state length {ell} exceeds horizon {horizon}"
        )));
    }
    let mut next = state.entries.clone();
    match state.coalescence_time() {
        Some(a) => {
            let a = a as usize;
            next[a - 1] -= 1;
            for m in 1..a {
                next[m - 1] = draw(m);
            }
        }
        None if ell != 0 => {
            return Err(Error::InconsistentState("null vector is not a B state".into()));
        }
        None => {}
    }
    if next.iter().all(|&x| x == 0) {
        for k in (ell + 1)..=horizon {
            let v = draw(k);
            next.push(v);
            if v != 0 {
                return Ok(StepOutcome::Next(BState { entries: next }));
            }
        }
        return Ok(StepOutcome::Terminated);
    }
    Ok(StepOutcome::Next(BState { entries: next }))
}

pub fn b_step<R: Rng + ?Sized>(
    state: &BState,
    kernel: &EtaKernel,
    rng: &mut R,
) -> Result<StepOutcome> {
    b_transition(state, kernel.horizon(), |depth| kernel.sample(depth, rng))
}

/// A sampled path of a backward chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainRun {
    /// `B_1, B_2, ...` (or `D_1, D_2, ...`); empty for the linear-fractional sampler.
    pub states: Vec<Vec<u32>>,
    /// Emitted coalescence times `A_1, A_2, ...`.
    pub times: Vec<u32>,
    /// Whether the run ended because no further individual exists.
    pub terminated: bool,
}

impl ChainRun {
    /// The `(K, A)` realization of a terminated run.
    pub fn cpp(&self) -> Option<Cpp> {
        if self.terminated {
            Cpp::from_times(self.times.clone()).ok()
        } else {
            None
        }
    }

    pub fn trace(&self) -> Vec<TraceRow> {
        let mut l = 0u32;
        self.states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let a = first_nonzero(s);
                l = l.max(a.unwrap_or(0));
                TraceRow { step: i + 1, l: l as usize, time: a, entries: s.clone() }
            })
            .collect()
    }
}

/// Iterates [`b_step`] from `B_0` until termination or until `max_individuals`
/// individuals have been produced.
pub fn b_run<R: Rng + ?Sized>(
    kernel: &EtaKernel,
    rng: &mut R,
    max_individuals: usize,
) -> Result<ChainRun> {
    let mut run = ChainRun { states: Vec::new(), times: Vec::new(), terminated: false };
    let mut state = BState::initial();
    while run.times.len() + 1 < max_individuals {
        match b_step(&state, kernel, rng)? {
            StepOutcome::Terminated => {
                run.terminated = true;
                break;
            }
            StepOutcome::Next(next) => {
                run.times.push(next.coalescence_time().expect("non-null state"));
                run.states.push(next.entries.clone());
                state = next;
            }
        }
    }
    Ok(run)
}

/// State of the `D` chain, truncated to the horizon.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DState {
    entries: Vec<u32>,
}

impl DState {
    pub fn null(horizon: usize) -> Self {
        DState { entries: vec![0; horizon] }
    }

    pub fn from_entries(entries: Vec<u32>) -> Self {
        DState { entries }
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn coalescence_time(&self) -> Option<u32> {
        first_nonzero(&self.entries)
    }
}

/// One transition of the `D` chain with `eta` values from `draw(depth)`:
/// entries above `A` copied, entry `A` minus one, entries below `A` redrawn.
/// A null state redraws every entry.
pub fn d_transition(
    state: &DState,
    horizon: usize,
    mut draw: impl FnMut(usize) -> u32,
) -> Result<DState> {
    if state.entries.len() != horizon {
        return Err(Error::InconsistentState(format!(
            "D state has length {}, horizon is {horizon}",
            state.entries.len()
        )));
    }
    let mut next = state.entries.clone();
    let a = match state.coalescence_time() {
        Some(a) => {
            next[a as usize - 1] -= 1;
            a as usize
        }
        None => horizon + 1,
    };
    for m in 1..a {
        next[m - 1] = draw(m);
    }
    Ok(DState { entries: next })
}

pub fn d_step<R: Rng + ?Sized>(state: &DState, kernel: &EtaKernel, rng: &mut R) -> Result<DState> {
    d_transition(state, kernel.horizon(), |depth| kernel.sample(depth, rng))
}

/// Runs the `D` chain from the null sequence; `D_i` yields `A_i` until a null
/// `D_K` marks the last individual.
pub fn d_run<R: Rng + ?Sized>(
    kernel: &EtaKernel,
    rng: &mut R,
    max_individuals: usize,
) -> Result<ChainRun> {
    let mut run = ChainRun { states: Vec::new(), times: Vec::new(), terminated: false };
    let mut state = DState::null(kernel.horizon());
    while run.times.len() + 1 < max_individuals {
        state = d_step(&state, kernel, rng)?;
        run.states.push(state.entries.clone());
        match state.coalescence_time() {
            Some(a) => run.times.push(a),
            None => {
                run.terminated = true;
                break;
            }
        }
    }
    Ok(run)
}

/// One draw of a coalescence time, truncated at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoalescenceDraw {
    Time(u32),
    BeyondHorizon,
}

/// Tail `P(A > n)` for `n = 0..=N` of a linear-fractional environment.
pub fn lf_tail_curve(env: &Environment) -> Result<Vec<f64>> {
    let mut tail = vec![1.0];
    for n in 1..=env.horizon() {
        tail.push(env.lf_a1_tail(n)?);
    }
    Ok(tail)
}

fn draw_from_tail<R: Rng + ?Sized>(tail: &[f64], rng: &mut R) -> CoalescenceDraw {
    let u: f64 = rng.random();
    tail.iter()
        .skip(1)
        .position(|&t| u >= t)
        .map_or(CoalescenceDraw::BeyondHorizon, |p| CoalescenceDraw::Time(p as u32 + 1))
}

/// `count` independent coalescence times of a linear-fractional environment.
pub fn lf_cpp_sample<R: Rng + ?Sized>(
    env: &Environment,
    rng: &mut R,
    count: usize,
) -> Result<Vec<CoalescenceDraw>> {
    let tail = lf_tail_curve(env)?;
    Ok((0..count).map(|_| draw_from_tail(&tail, rng)).collect())
}

/// Independent coalescence times until the first one beyond the horizon.
pub fn lf_run<R: Rng + ?Sized>(
    env: &Environment,
    rng: &mut R,
    max_individuals: usize,
) -> Result<ChainRun> {
    let tail = lf_tail_curve(env)?;
    let mut run = ChainRun { states: Vec::new(), times: Vec::new(), terminated: false };
    while run.times.len() + 1 < max_individuals {
        match draw_from_tail(&tail, rng) {
            CoalescenceDraw::Time(a) => run.times.push(a),
            CoalescenceDraw::BeyondHorizon => {
                run.terminated = true;
                break;
            }
        }
    }
    Ok(run)
}

/// One row of a chain trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRow {
    pub step: usize,
    /// `l_i`, the running maximum of the emitted coalescence times.
    pub l: usize,
    pub time: Option<u32>,
    pub entries: Vec<u32>,
}

/// Checks the pathwise transition invariants of a `B` or `D` trace: `A` is
/// the first non-zero entry, `l` is the running maximum of `A`, and between
/// consecutive rows the entry at `A` drops by one while entries above it (up
/// to the previous length) are unchanged. For `B` traces the row length must
/// also equal `l`.
pub fn validate_trace(rows: &[TraceRow], is_b: bool) -> std::result::Result<(), String> {
    let mut prev: Option<&TraceRow> = None;
    let mut l = 0usize;
    for row in rows {
        let a = first_nonzero(&row.entries);
        if a != row.time {
            return Err(format!("step {}: A is not the first non-zero entry", row.step));
        }
        l = l.max(a.unwrap_or(0) as usize);
        if row.l != l {
            return Err(format!(
                "step {}: l = {} but the running max of A is {l}",
                row.step, row.l
            ));
        }
        if is_b && row.entries.len() != l {
            return Err(format!("step {}: B has length {} != l", row.step, row.entries.len()));
        }
        if let Some(p) = prev {
            if let Some(a) = p.time {
                let a = a as usize;
                if row.entries.len() < p.entries.len() {
                    return Err(format!("step {}: state shrank", row.step));
                }
                if row.entries[a - 1] + 1 != p.entries[a - 1] {
                    return Err(format!("step {}: entry {a} was not decremented", row.step));
                }
                if row.entries[a..p.entries.len()] != p.entries[a..] {
                    return Err(format!("step {}: entries above {a} changed", row.step));
                }
            }
        }
        prev = Some(row);
    }
    Ok(())
}
