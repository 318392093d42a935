//! Offspring laws and their probability generating functions.
//!
//! Two families are supported: laws with finite support given by an explicit
//! probability vector, and linear-fractional laws
//! `P(0) = 1 - r`, `P(k) = r p q^(k-1)` for `k >= 1` (with `q = 1 - p`).
//! Derivatives are exact in both cases: finite support uses falling-factorial
//! sums over the support, linear fractional uses the closed form.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a finite-support law.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// A probability law on `{0, 1, 2, ...}`.
#[derive(Debug, Clone, PartialEq)]
pub enum OffspringLaw {
    FiniteSupport { probs: Vec<f64> },
    LinearFractional { r: f64, p: f64 },
}

impl OffspringLaw {
    pub fn finite(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidLaw("empty probability vector".into()));
        }
        for (k, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidLaw(format!("P({k}) = {p} is not a probability")));
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!("probabilities sum to {total}, not 1")));
        }
        Ok(OffspringLaw::FiniteSupport { probs })
    }

    pub fn linear_fractional(r: f64, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::InvalidLaw(format!("r = {r} outside [0, 1]")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidLaw(format!("p = {p} outside (0, 1)")));
        }
        Ok(OffspringLaw::LinearFractional { r, p })
    }

    /// Point mass at `k`.
    pub fn dirac(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        OffspringLaw::FiniteSupport { probs }
    }

    pub fn is_linear_fractional(&self) -> bool {
        matches!(self, OffspringLaw::LinearFractional { .. })
    }

    /// `(r, p)` for a linear-fractional law.
    pub fn lf_params(&self) -> Option<(f64, f64)> {
        match *self {
            OffspringLaw::LinearFractional { r, p } => Some((r, p)),
            OffspringLaw::FiniteSupport { .. } => None,
        }
    }

    /// Largest outcome with positive probability, `None` when the support is unbounded.
    pub fn max_support(&self) -> Option<usize> {
        match self {
            OffspringLaw::FiniteSupport { probs } => {
                Some(probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
            }
            OffspringLaw::LinearFractional { r, .. } if *r == 0.0 => Some(0),
            OffspringLaw::LinearFractional { .. } => None,
        }
    }

    pub fn prob(&self, k: usize) -> f64 {
        match *self {
            OffspringLaw::FiniteSupport { ref probs } => probs.get(k).copied().unwrap_or(0.0),
            OffspringLaw::LinearFractional { r, p } => {
                if k == 0 {
                    1.0 - r
                } else {
                    r * p * (1.0 - p).powi(k as i32 - 1)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            OffspringLaw::FiniteSupport { ref probs } => {
                probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
            }
            OffspringLaw::LinearFractional { r, p } => r / p,
        }
    }

    /// Probabilities `P(0..=K)` where `K` is the first index whose remaining
    /// tail is at most `tail_tol`, together with that tail mass.
    pub fn pmf_prefix(&self, tail_tol: f64) -> (Vec<f64>, f64) {
        match *self {
            OffspringLaw::FiniteSupport { ref probs } => {
                let end = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                (probs[..=end].to_vec(), 0.0)
            }
            OffspringLaw::LinearFractional { r, p } => {
                let q = 1.0 - p;
                let mut out = vec![1.0 - r];
                // P(xi > k) = r q^k for k >= 0
                let mut tail = r;
                let mut k = 0usize;
                while tail > tail_tol {
                    k += 1;
                    out.push(self.prob(k));
                    tail = r * q.powi(k as i32);
                }
                (out, tail)
            }
        }
    }

    /// `E[s^xi]`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        check_unit(s)?;
        Ok(self.pgf_unchecked(s))
    }

    /// `k`-th derivative of the generating function at `s`, `k >= 1`.
    pub fn pgf_derivative(&self, s: f64, k: usize) -> Result<f64> {
        check_unit(s)?;
        if k == 0 {
            return Ok(self.pgf_unchecked(s));
        }
        Ok(self.taylor_unchecked(s, k) * factorial(k))
    }

    /// `f^(k)(s) / k!`, the `k`-th Taylor coefficient of the generating function at `s`.
    pub fn taylor_coefficient(&self, s: f64, k: usize) -> Result<f64> {
        check_unit(s)?;
        Ok(self.taylor_unchecked(s, k))
    }

    pub(crate) fn pgf_unchecked(&self, s: f64) -> f64 {
        match *self {
            OffspringLaw::FiniteSupport { ref probs } => {
                probs.iter().rev().fold(0.0, |acc, &p| acc * s + p).clamp(0.0, 1.0)
            }
            OffspringLaw::LinearFractional { r, p } => {
                let q = 1.0 - p;
                (1.0 - r * (1.0 - s) / (1.0 - q * s)).clamp(0.0, 1.0)
            }
        }
    }

    pub(crate) fn taylor_unchecked(&self, s: f64, k: usize) -> f64 {
        if k == 0 {
            return self.pgf_unchecked(s);
        }
        match *self {
            OffspringLaw::FiniteSupport { ref probs } => {
                if probs.len() <= k {
                    return 0.0;
                }
                // sum_{x >= k} C(x, k) p_x s^(x - k), by Horner in s
                let mut acc = 0.0;
                for x in (k..probs.len()).rev() {
                    acc = acc * s + binomial(x, k) * probs[x];
                }
                acc
            }
            OffspringLaw::LinearFractional { r, p } => {
                let q = 1.0 - p;
                r * p * q.powi(k as i32 - 1) / (1.0 - q * s).powi(k as i32 + 1)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            OffspringLaw::FiniteSupport { ref probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, &p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k;
                    }
                }
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
            }
            OffspringLaw::LinearFractional { r, p } => {
                let u: f64 = rng.random();
                if u >= r {
                    0
                } else {
                    1 + Geometric::new(p).expect("p in (0, 1)").sample(rng) as usize
                }
            }
        }
    }
}

fn check_unit(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain { value: s })
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tri() -> OffspringLaw {
        OffspringLaw::finite(vec![0.25, 0.5, 0.25]).unwrap()
    }

    fn lf_half() -> OffspringLaw {
        OffspringLaw::linear_fractional(0.5, 0.5).unwrap()
    }

    // Power series evaluated outside the unit interval, used as a finite-difference oracle.
    fn series(law: &OffspringLaw, s: f64) -> f64 {
        let (probs, _) = law.pmf_prefix(1e-300);
        probs.iter().enumerate().map(|(k, p)| p * s.powi(k as i32)).sum()
    }

    fn series_deriv(law: &OffspringLaw, s: f64, k: usize) -> f64 {
        let (probs, _) = law.pmf_prefix(1e-300);
        probs
            .iter()
            .enumerate()
            .skip(k)
            .map(|(x, p)| {
                let ff: f64 = (0..k).map(|i| (x - i) as f64).product();
                ff * p * s.powi((x - k) as i32)
            })
            .sum()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(tri().pgf(1.0).unwrap(), 1.0);
        assert!((lf_half().pgf(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lf_half().pgf(0.0).unwrap(), 0.5);
        assert!((tri().pgf(0.5).unwrap() - 9.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(tri().pgf(1.5), Err(Error::Domain { value: 1.5 }));
        assert!(lf_half().pgf_derivative(-0.1, 2).is_err());
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(tri().pgf_derivative(0.0, 1).unwrap(), 0.5);
        let closed = lf_half().pgf_derivative(0.0, 1).unwrap();
        assert!((closed - 0.25).abs() < 1e-15);
        assert!((closed - series_deriv(&lf_half(), 0.0, 1)).abs() < 1e-10);
        for k in 1..6 {
            for &s in &[0.0, 0.3, 0.7, 1.0] {
                let a = lf_half().pgf_derivative(s, k).unwrap();
                let b = series_deriv(&lf_half(), s, k);
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "k={k} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let h = 1e-5;
        let laws = [
            tri(),
            lf_half(),
            OffspringLaw::finite(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            OffspringLaw::linear_fractional(0.8, 0.3).unwrap(),
        ];
        for law in &laws {
            for &s in &[0.0, 0.25, 0.5, 0.75] {
                for k in 1..=3 {
                    let lower = |x: f64| {
                        if k == 1 {
                            series(law, x)
                        } else {
                            series_deriv(law, x, k - 1)
                        }
                    };
                    let fd = (lower(s + h) - lower(s - h)) / (2.0 * h);
                    let exact = law.pgf_derivative(s, k).unwrap();
                    if exact == 0.0 {
                        assert!(fd.abs() < 1e-8);
                    } else {
                        assert!(((fd - exact) / exact).abs() < 1e-6, "{law:?} s={s} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn lf_identity() {
        // 1/(1-f(s)) = 1/(f'(1)(1-s)) + f''(1)/(2 f'(1)^2)
        for &(r, p) in &[(0.5, 0.5), (0.9, 0.3), (0.2, 0.75)] {
            let law = OffspringLaw::linear_fractional(r, p).unwrap();
            let m = law.pgf_derivative(1.0, 1).unwrap();
            let f2 = law.pgf_derivative(1.0, 2).unwrap();
            assert!((m - r / p).abs() < 1e-12);
            assert!((f2 / (m * m) - 2.0 * (1.0 - p) / r).abs() < 1e-10);
            for &s in &[0.0, 0.3, 0.9] {
                let lhs = 1.0 / (1.0 - law.pgf(s).unwrap());
                let rhs = 1.0 / (m * (1.0 - s)) + f2 / (2.0 * m * m);
                assert!((lhs - rhs).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn validation() {
        assert!(OffspringLaw::finite(vec![0.5, 0.4]).is_err());
        assert!(OffspringLaw::finite(vec![1.2, -0.2]).is_err());
        assert!(OffspringLaw::finite(vec![]).is_err());
        assert!(OffspringLaw::linear_fractional(0.5, 1.0).is_err());
        assert!(OffspringLaw::linear_fractional(1.1, 0.5).is_err());
        assert!(OffspringLaw::linear_fractional(0.0, 0.5).is_ok());
    }

    #[test]
    fn pmf_prefix_tail() {
        let (probs, tail) = lf_half().pmf_prefix(1e-12);
        assert!(tail <= 1e-12);
        assert!((probs.iter().sum::<f64>() + tail - 1.0).abs() < 1e-14);
        assert_eq!(tri().pmf_prefix(0.0), (vec![0.25, 0.5, 0.25], 0.0));
    }

    #[test]
    fn sampling_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        for law in [tri(), lf_half()] {
            let mut counts = [0usize; 4];
            for _ in 0..n {
                let k = law.sample(&mut rng);
                if k < 4 {
                    counts[k] += 1;
                }
            }
            for (k, &c) in counts.iter().enumerate() {
                let p = law.prob(k);
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!((c as f64 / n as f64 - p).abs() < 4.0 * se + 1e-12, "{law:?} k={k}");
            }
        }
    }
}
