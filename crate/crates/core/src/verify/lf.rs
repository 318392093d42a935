//! Independence checks specific to linear-fractional environments.

use std::collections::BTreeMap;

use super::chain_law::{d_chain_joint_laws, exact_chain_prefix_law};
use super::dist::{tv_distance, DistTable};
use super::{CheckReport, EnumOptions};
use crate::environment::Environment;
use crate::error::{Error, Result};

/// Joint law of `(A_1, A_2)` given `K >= 3` against the product of its
/// marginals, and the marginals against the closed-form law of `A` given
/// `A <= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct IidCheck {
    pub joint: DistTable,
    pub product: DistTable,
    pub joint_tv: f64,
    /// Largest pointwise gap between either marginal and the closed form
    /// (zero when the environment is not linear-fractional).
    pub marginal_error: f64,
    /// Bound on the effect of truncation on `joint_tv`.
    pub truncation: f64,
}

impl IidCheck {
    pub fn factorizes(&self, tolerance: f64) -> bool {
        self.joint_tv < tolerance + self.truncation
            && self.marginal_error < tolerance + self.truncation
    }
}

/// Works for any environment; for non-linear-fractional ones the marginal
/// comparison is skipped and the factorization is expected to fail.
pub fn lf_iid_check(env: &Environment, opts: &EnumOptions) -> Result<IidCheck> {
    let prefix = exact_chain_prefix_law::<f64>(env, 2, opts)?;
    let mut joint_raw: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    for (key, p) in prefix.entries() {
        if let Some(rest) = key.strip_prefix("A=") {
            if let Some((times, _)) = rest.split_once(';') {
                let (a1, a2) = times.split_once(',').expect("two times");
                joint_raw.insert((a1.parse().unwrap(), a2.parse().unwrap()), *p);
            }
        }
    }
    let z: f64 = joint_raw.values().sum();
    if z <= 0.0 {
        return Err(Error::Degenerate("K >= 3 has probability zero".into()));
    }
    let mut m1: BTreeMap<u32, f64> = BTreeMap::new();
    let mut m2: BTreeMap<u32, f64> = BTreeMap::new();
    let mut joint = BTreeMap::new();
    for (&(a1, a2), &p) in &joint_raw {
        *m1.entry(a1).or_default() += p / z;
        *m2.entry(a2).or_default() += p / z;
        joint.insert(format!("A1={a1};A2={a2}"), p / z);
    }
    let mut product = BTreeMap::new();
    for (&a1, &p1) in &m1 {
        for (&a2, &p2) in &m2 {
            product.insert(format!("A1={a1};A2={a2}"), p1 * p2);
        }
    }
    let relative_missing = prefix.missing() / z;
    let joint = DistTable::new(joint, relative_missing);
    let product = DistTable::new(product, 2.0 * relative_missing);
    let joint_tv = tv_distance(&joint, &product);

    let mut marginal_error: f64 = 0.0;
    if env.is_linear_fractional() {
        let horizon = env.horizon();
        let tail_n = env.lf_a1_tail(horizon)?;
        for n in 1..=horizon as u32 {
            let before = if n == 1 { 1.0 } else { env.lf_a1_tail(n as usize - 1)? };
            let closed = (before - env.lf_a1_tail(n as usize)?) / (1.0 - tail_n);
            for m in [&m1, &m2] {
                marginal_error = marginal_error.max((m.get(&n).unwrap_or(&0.0) - closed).abs());
            }
        }
    }
    Ok(IidCheck { joint, product, joint_tv, marginal_error, truncation: 3.0 * relative_missing })
}

/// Joint law of `(A_1, ..., A_{i-1}, D_i)` against the law of the times
/// times independent geometric entries `P(D_i(n) = k) = lambda_n (1 - lambda_n)^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricCheck {
    /// Distance at each step `i = 1..=steps`.
    pub tv: Vec<f64>,
    pub truncation: f64,
}

impl GeometricCheck {
    pub fn max_tv(&self) -> f64 {
        self.tv.iter().copied().fold(0.0, f64::max)
    }
}

pub fn geometric_entries_check(
    env: &Environment,
    steps: usize,
    opts: &EnumOptions,
) -> Result<GeometricCheck> {
    let horizon = env.horizon();
    let lambda = (1..=horizon).map(|n| env.lf_failure_prob(n)).collect::<Result<Vec<f64>>>()?;
    let laws = d_chain_joint_laws::<f64>(env, steps, opts)?;
    let mut tv = Vec::new();
    let mut truncation: f64 = 0.0;
    for law in &laws {
        // law of the history part alone
        let mut hist: BTreeMap<String, f64> = BTreeMap::new();
        for (key, p) in law.entries() {
            let (h, _) = key.split_once(";D=").expect("joint key");
            *hist.entry(h.to_string()).or_default() += p;
        }
        let mut sum = 0.0;
        let mut covered = 0.0;
        for (key, p) in law.entries() {
            let (h, d) = key.split_once(";D=").expect("joint key");
            let geo: f64 = d
                .split(',')
                .zip(&lambda)
                .map(|(x, l)| l * (1.0 - l).powi(x.parse::<i32>().unwrap()))
                .product();
            let q = hist[h] * geo;
            covered += q;
            sum += (p - q).abs();
        }
        // reference mass on outcomes the sweep never produced
        sum += (1.0 - covered).max(0.0);
        tv.push(sum / 2.0);
        truncation = truncation.max(law.missing());
    }
    Ok(GeometricCheck { tv, truncation })
}

/// Runs both checks and reports them.
pub fn lf_reports(
    env: &Environment,
    tolerance: f64,
    opts: &EnumOptions,
) -> Result<Vec<CheckReport>> {
    if !env.is_linear_fractional() {
        return Err(Error::NotLinearFractional { generation: -(env.horizon() as i64) });
    }
    let digest = env.digest();
    let iid = lf_iid_check(env, opts)?;
    let geo = geometric_entries_check(env, 3, opts)?;
    Ok(vec![
        CheckReport::below("lf_iid_joint_tv", &digest, iid.joint_tv, tolerance + iid.truncation),
        CheckReport::below(
            "lf_iid_marginal",
            &digest,
            iid.marginal_error,
            tolerance + iid.truncation,
        ),
        CheckReport::below(
            "lf_geometric_entries",
            &digest,
            geo.max_tv(),
            tolerance + geo.truncation,
        ),
    ])
}
