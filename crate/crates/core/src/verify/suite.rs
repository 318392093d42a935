//! The per-environment verification suite shared by the CLI and the tests.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::dist::{exact_tv, parse_outcome, tv_upper_bound, DistTable};
use super::lf::lf_reports;
use super::witness::{btilde_witness_search, validate_witness, WitnessSearch};
use super::{
    brute_force_tree_law, exact_chain_law, exact_d_chain_law, exact_tree_law, rational_available,
    CheckReport, EnumOptions, Status,
};
use crate::environment::Environment;
use crate::error::Result;
use crate::eta::{a1_tail, a1_tail_product};
use crate::genealogy::outcome_key;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    /// Threshold for exact-law agreement and the `A_1` identities.
    pub tolerance: f64,
    /// Threshold for the linear-fractional factorization checks.
    pub lf_tolerance: f64,
    pub witness: bool,
    pub witness_threshold: f64,
    pub witness_samples: u64,
    pub seed: u64,
    pub threads: usize,
    /// Longest horizon for which the exact laws of `(K, A)` are compared.
    pub exact_horizon: usize,
    pub enumeration: EnumOptions,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            tolerance: 1e-10,
            lf_tolerance: 1e-8,
            witness: false,
            witness_threshold: 0.01,
            witness_samples: 1_000_000,
            seed: 0,
            threads: 0,
            exact_horizon: 3,
            enumeration: EnumOptions::default(),
        }
    }
}

/// The tree-side and chain-side laws of `(K, A)` for one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct LawPair {
    pub tree: DistTable,
    pub chain: DistTable,
    pub d_chain: DistTable,
    pub exact: bool,
}

/// Horizons up to which the tree side lists explicit trees.
pub const BRUTE_FORCE_HORIZON: usize = 3;

/// Exact rationals when every probability is dyadic, doubles otherwise. The
/// tree side lists explicit trees for finite support and short horizons and
/// uses the branching factorization otherwise.
pub fn law_pair(env: &Environment, opts: &EnumOptions) -> Result<LawPair> {
    let brute = env.max_support().is_some() && env.horizon() <= BRUTE_FORCE_HORIZON;
    if rational_available(env) {
        let tree = if brute {
            brute_force_tree_law::<BigRational>(env, opts)?
        } else {
            exact_tree_law::<BigRational>(env, opts)?
        };
        Ok(LawPair {
            tree,
            chain: exact_chain_law::<BigRational>(env, opts)?,
            d_chain: exact_d_chain_law::<BigRational>(env, opts)?,
            exact: true,
        })
    } else {
        let tree = if brute {
            brute_force_tree_law::<f64>(env, opts)?
        } else {
            exact_tree_law::<f64>(env, opts)?
        };
        Ok(LawPair {
            tree,
            chain: exact_chain_law::<f64>(env, opts)?,
            d_chain: exact_d_chain_law::<f64>(env, opts)?,
            exact: false,
        })
    }
}

fn agreement(name: &str, digest: &str, a: &DistTable, b: &DistTable, tol: f64) -> CheckReport {
    match exact_tv(a, b) {
        Some(tv) => {
            let metric = tv.to_f64().unwrap_or(f64::NAN);
            let mut report = CheckReport::below(name, digest, metric, tol);
            report.status = if tv.is_zero() { Status::Pass } else { Status::Fail };
            report.with_detail("exact rational arithmetic")
        }
        None => CheckReport::below(name, digest, tv_upper_bound(a, b), tol).with_detail(format!(
            "truncated mass {:.3e} / {:.3e}",
            a.missing(),
            b.missing()
        )),
    }
}

/// Largest gap among the closed form, the product over depths and, when
/// given, the marginal of the enumerated tree law, over `n = 1..=N`.
pub fn a1_identity_gap(env: &Environment, tree: Option<&DistTable>) -> Result<f64> {
    let mut gap: f64 = 0.0;
    for n in 1..=env.horizon() {
        let closed = a1_tail(env, n)?;
        gap = gap.max((closed - a1_tail_product(env, n)?).abs());
        if let Some(tree) = tree {
            let marginal = tree.mass_where(|k| {
                parse_outcome(k).is_some_and(|(_, a)| a.first().is_none_or(|&a1| a1 as usize > n))
            });
            gap = gap.max((closed - marginal).abs());
        }
    }
    if let Some(tree) = tree {
        // P(Z_N = 1 | Z_N > 0)
        let single = tree.get(&outcome_key(1, &[]));
        gap = gap.max((a1_tail(env, env.horizon())? - single).abs());
    }
    Ok(gap)
}

/// Runs every applicable check on `env`.
pub fn run_env_suite(env: &Environment, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let digest = env.digest();
    let mut reports = Vec::new();
    if env.horizon() <= opts.exact_horizon {
        let laws = law_pair(env, &opts.enumeration)?;
        let gap = a1_identity_gap(env, Some(&laws.tree))?;
        reports.push(agreement("tree_vs_chain", &digest, &laws.tree, &laws.chain, opts.tolerance));
        reports.push(agreement(
            "tree_vs_d_chain",
            &digest,
            &laws.tree,
            &laws.d_chain,
            opts.tolerance,
        ));
        reports.push(CheckReport::below(
            "a1_identities",
            &digest,
            gap,
            opts.tolerance + laws.tree.missing(),
        ));
    } else {
        let gap = a1_identity_gap(env, None)?;
        reports.push(
            CheckReport::below("a1_identities", &digest, gap, opts.tolerance)
                .with_detail("closed form against product; horizon too long for enumeration"),
        );
    }
    if env.is_linear_fractional() && env.horizon() <= opts.exact_horizon {
        reports.extend(lf_reports(env, opts.lf_tolerance, &opts.enumeration)?);
    }
    if opts.witness {
        reports.push(witness_report(env, opts)?);
    }
    Ok(reports)
}

/// Exact search followed by Monte Carlo validation. Not finding a witness is
/// inconclusive rather than a failure.
pub fn witness_report(env: &Environment, opts: &SuiteOptions) -> Result<CheckReport> {
    let digest = env.digest();
    let threshold = opts.witness_threshold;
    match btilde_witness_search(env, threshold, &opts.enumeration)? {
        WitnessSearch::NotFound { pairs, max_tv } => Ok(CheckReport {
            check: "btilde_witness".into(),
            env_digest: digest,
            metric: max_tv,
            threshold,
            status: Status::Inconclusive,
            detail: Some(format!("no witness among {pairs} history pairs")),
        }),
        WitnessSearch::Found(w) => {
            let v = validate_witness(&w, opts.witness_samples, opts.seed, opts.threads)?;
            let status = if v.agrees() { Status::Pass } else { Status::Fail };
            Ok(CheckReport {
                check: "btilde_witness".into(),
                env_digest: digest,
                metric: w.tv,
                threshold,
                status,
                detail: Some(format!(
                    "step {}: ({}, {}) vs ({}, {}); next {} exact gap {:.4} simulated {:.4} (z = {:.1}, {} + {} matching trees of {})",
                    w.step,
                    w.prev_a,
                    w.current,
                    w.prev_b,
                    w.current,
                    v.outcome,
                    v.exact_gap,
                    v.empirical_gap,
                    v.z,
                    v.count_a,
                    v.count_b,
                    v.samples
                )),
            })
        }
    }
}
