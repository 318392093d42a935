//! Probability weights for the enumeration oracles: `f64`, or exact rationals
//! when every input probability is a dyadic number summing exactly to one.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::eta::eta_at_depth;
use crate::pgf::OffspringLaw;

pub trait Weight:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    /// Exact weights are never pruned and carry no truncation error.
    const EXACT: bool;

    fn from_f64(x: f64) -> Option<Self>;
    fn to_f64(&self) -> f64;
    fn to_rational(&self) -> Option<BigRational>;

    /// Table of `P(eta^(-depth) = k)` and the mass left out of it.
    fn eta_table(env: &Environment, depth: usize, tail_tol: f64) -> Result<(Vec<Self>, f64)>;
}

impl Weight for f64 {
    const EXACT: bool = false;

    fn from_f64(x: f64) -> Option<Self> {
        Some(x)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<BigRational> {
        None
    }

    fn eta_table(env: &Environment, depth: usize, tail_tol: f64) -> Result<(Vec<f64>, f64)> {
        Ok(eta_at_depth(env, depth)?.materialize(tail_tol))
    }
}

impl Weight for BigRational {
    const EXACT: bool = true;

    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }

    fn eta_table(env: &Environment, depth: usize, _tail_tol: f64) -> Result<(Vec<Self>, f64)> {
        Ok((thinned_eta(env, depth)?, 0.0))
    }
}

/// Probabilities of a law as weights, with the mass beyond the table.
/// Exact weights need finite support and must sum to exactly one.
pub fn law_table<W: Weight>(law: &OffspringLaw, tail_tol: f64) -> Result<(Vec<W>, f64)> {
    if W::EXACT && law.is_linear_fractional() {
        return Err(Error::InvalidLaw("exact arithmetic needs finite-support laws".into()));
    }
    let (probs, tail) = law.pmf_prefix(tail_tol);
    let table = probs
        .iter()
        .map(|&p| W::from_f64(p).ok_or_else(|| Error::InvalidLaw(format!("{p} is not finite"))))
        .collect::<Result<Vec<W>>>()?;
    if W::EXACT {
        let total = table.iter().fold(W::zero(), |acc, p| acc + p.clone());
        if !total.is_one() {
            return Err(Error::InvalidLaw("probabilities do not sum to exactly one".into()));
        }
    }
    Ok((table, tail))
}

/// Whether every law has finite support with probabilities summing to exactly one.
pub fn rational_available(env: &Environment) -> bool {
    env.laws().iter().all(|law| law_table::<BigRational>(law, 0.0).is_ok())
}

fn pgf<W: Weight>(probs: &[W], s: &W) -> W {
    probs.iter().rev().fold(W::zero(), |acc, p| acc * s.clone() + p.clone())
}

fn power<W: Weight>(x: &W, k: usize) -> W {
    (0..k).fold(W::one(), |acc, _| acc * x.clone())
}

fn choose<W: Weight>(n: usize, k: usize) -> W {
    (0..k).fold(W::one(), |acc, i| {
        acc * W::from_f64((n - i) as f64).unwrap() / W::from_f64((i + 1) as f64).unwrap()
    })
}

/// Law of `eta^(-depth)` by thinning: each child of the generation `-depth`
/// individual survives independently, and `eta` is the number of surviving
/// children minus one given at least one survives.
pub fn thinned_eta<W: Weight>(env: &Environment, depth: usize) -> Result<Vec<W>> {
    let recent = env.recent(depth)?;
    let tables = recent
        .laws()
        .iter()
        .map(|law| law_table::<W>(law, 0.0).map(|t| t.0))
        .collect::<Result<Vec<_>>>()?;
    // extinction probability of a child born at generation -depth + 1
    let x = tables[1..].iter().rev().fold(W::zero(), |s, probs| pgf(probs, &s));
    let first = &tables[0];
    let surviving = |j: usize| {
        (j..first.len()).fold(W::zero(), |acc, k| {
            acc + first[k].clone()
                * choose::<W>(k, j)
                * power(&(W::one() - x.clone()), j)
                * power(&x, k - j)
        })
    };
    let survival = W::one() - surviving(0);
    if survival <= W::zero() {
        return Err(Error::Degenerate(format!("no survival from depth {depth}")));
    }
    Ok((1..first.len().max(2)).map(|j| surviving(j) / survival.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eta::eta_at_depth;

    fn env() -> Environment {
        Environment::new(vec![
            OffspringLaw::finite(vec![0.25, 0.5, 0.25]).unwrap(),
            OffspringLaw::finite(vec![0.125, 0.5, 0.375]).unwrap(),
            OffspringLaw::finite(vec![0.5, 0.25, 0.125, 0.125]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn rational_eta_matches_library() {
        let env = env();
        assert!(rational_available(&env));
        for depth in 1..=3 {
            let exact = thinned_eta::<BigRational>(&env, depth).unwrap();
            let total = exact.iter().fold(BigRational::zero(), |a, b| a + b);
            assert!(total.is_one());
            let lib = eta_at_depth(&env, depth).unwrap();
            for (k, p) in exact.iter().enumerate() {
                assert!((Weight::to_f64(p) - lib.pmf(k)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn availability() {
        let tenths = Environment::new(vec![OffspringLaw::finite(vec![0.1, 0.9]).unwrap()]).unwrap();
        assert!(!rational_available(&tenths));
        let lf =
            Environment::new(vec![OffspringLaw::linear_fractional(0.5, 0.5).unwrap()]).unwrap();
        assert!(!rational_available(&lf));
        let (t, tail) = law_table::<f64>(&lf.laws()[0], 1e-10).unwrap();
        assert!(tail <= 1e-10 && (t.iter().sum::<f64>() + tail - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_thinning() {
        let env = Environment::new(vec![OffspringLaw::dirac(2), OffspringLaw::dirac(0)]).unwrap();
        assert!(matches!(thinned_eta::<f64>(&env, 2), Err(Error::Degenerate(_))));
    }
}
