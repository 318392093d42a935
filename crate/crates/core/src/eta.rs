//! Laws of the number of extra surviving daughters (`eta`) and the law of `A_1`.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::pgf::{factorial, OffspringLaw};

/// Tolerance for identities asserted between two routes to the same quantity.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Law of `eta_n`: the number of daughters of the founder, beyond one, with
/// descendants alive `n` generations later, conditioned on at least one.
#[derive(Debug, Clone, PartialEq)]
pub enum EtaLaw {
    /// Exact probabilities for `k = 0..len`.
    Finite { pmf: Vec<f64> },
    /// Failures before the first success, `P(k) = success (1 - success)^k`.
    Geometric { success: f64 },
}

impl EtaLaw {
    pub fn pmf(&self, k: usize) -> f64 {
        match self {
            EtaLaw::Finite { pmf } => pmf.get(k).copied().unwrap_or(0.0),
            EtaLaw::Geometric { success } => success * (1.0 - success).powi(k as i32),
        }
    }

    pub fn zero_prob(&self) -> f64 {
        self.pmf(0)
    }

    /// `P(eta > k)`.
    pub fn tail(&self, k: usize) -> f64 {
        match self {
            EtaLaw::Finite { pmf } => pmf.iter().skip(k + 1).sum(),
            EtaLaw::Geometric { success } => (1.0 - success).powi(k as i32 + 1),
        }
    }

    /// Largest value with positive probability, `None` when unbounded.
    pub fn max_value(&self) -> Option<usize> {
        match self {
            EtaLaw::Finite { pmf } => Some(pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)),
            EtaLaw::Geometric { success } if *success >= 1.0 => Some(0),
            EtaLaw::Geometric { .. } => None,
        }
    }

    /// Probabilities up to the first `k` whose remaining tail is at most
    /// `tail_tol`, and that tail.
    pub fn materialize(&self, tail_tol: f64) -> (Vec<f64>, f64) {
        match self {
            EtaLaw::Finite { pmf } => {
                let end = pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                (pmf[..=end].to_vec(), 0.0)
            }
            EtaLaw::Geometric { .. } => {
                let mut out = Vec::new();
                let mut k = 0;
                loop {
                    out.push(self.pmf(k));
                    let tail = self.tail(k);
                    if tail <= tail_tol {
                        return (out, tail);
                    }
                    k += 1;
                }
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            EtaLaw::Finite { pmf } => pmf.iter().sum(),
            EtaLaw::Geometric { .. } => 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            EtaLaw::Finite { pmf } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (k, &p) in pmf.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return k;
                    }
                }
                pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
            }
            EtaLaw::Geometric { success } => {
                if *success >= 1.0 {
                    0
                } else {
                    Geometric::new(*success).expect("success in (0, 1)").sample(rng) as usize
                }
            }
        }
    }
}

/// Returns `(f_{1,n}(0), 1 - f_{0,n}(0))` in forward indexing for the founder of `env`.
fn forward_extinction(env: &Environment, n: usize) -> Result<(f64, f64)> {
    if n == 0 || n > env.horizon() {
        return Err(Error::Horizon(format!("n = {n} outside [1, {}]", env.horizon())));
    }
    let h = env.horizon() as i64;
    let inner = env.compose(-h + 1, -h + n as i64, 0.0)?;
    let survival = env.survival_prob(n)?;
    if survival <= 0.0 {
        return Err(Error::Degenerate(format!(
            "survival probability over {n} generations is zero; eta is undefined"
        )));
    }
    Ok((inner, survival))
}

/// Law of `eta_n` for the founder of `env` (forward indexing, `1 <= n <= N`).
pub fn eta_pmf(env: &Environment, n: usize) -> Result<EtaLaw> {
    let (x, survival) = forward_extinction(env, n)?;
    let first = env.law_at_depth_from_root(0);
    match *first {
        OffspringLaw::LinearFractional { p, .. } => {
            let q = 1.0 - p;
            Ok(EtaLaw::Geometric { success: (1.0 - q) / (1.0 - q * x) })
        }
        OffspringLaw::FiniteSupport { ref probs } => {
            let len = probs.len().saturating_sub(1).max(1);
            let pmf = (0..len)
                .map(|k| (1.0 - x).powi(k as i32 + 1) * first.taylor_unchecked(x, k + 1) / survival)
                .collect();
            Ok(EtaLaw::Finite { pmf })
        }
    }
}

/// `P(eta_n = k)` straight from the derivative formula
/// `(1 - f_{1,n}(0))^(k+1) f_1^(k+1)(f_{1,n}(0)) / ((k+1)! (1 - f_{0,n}(0)))`.
pub fn eta_prob_from_derivatives(env: &Environment, n: usize, k: usize) -> Result<f64> {
    let (x, survival) = forward_extinction(env, n)?;
    let first = env.law_at_depth_from_root(0);
    let deriv = first.pgf_derivative(x, k + 1)?;
    Ok((1.0 - x).powi(k as i32 + 1) * deriv / (factorial(k + 1) * survival))
}

/// Law of `eta^(-depth)`, the variable attached to an individual at generation `-depth`.
pub fn eta_at_depth(env: &Environment, depth: usize) -> Result<EtaLaw> {
    eta_pmf(&env.recent(depth)?, depth)
}

/// `P(eta^(m) = 0)` for `-N <= m <= -1`.
pub fn eta_zero_prob(env: &Environment, m: i64) -> Result<f64> {
    let law = env.law_for_generation(m)?;
    let x = env.compose(m + 1, 0, 0.0)?;
    let survival = env.survival_from_generation(m)?;
    if survival <= 0.0 {
        return Err(Error::Degenerate(format!(
            "no survival from generation {m}; eta is undefined"
        )));
    }
    Ok((1.0 - x) * law.pgf_derivative(x, 1)? / survival)
}

/// `prod_{i=1..n} P(eta^(-i) = 0)`.
pub fn a1_tail_product(env: &Environment, n: usize) -> Result<f64> {
    check_depth(env, n)?;
    (1..=n as i64).map(|i| eta_zero_prob(env, -i)).product()
}

/// `P(A_1 > n) = f'_{-n,0}(0) / (1 - f_{-n,0}(0))`, checked against the product form.
pub fn a1_tail(env: &Environment, n: usize) -> Result<f64> {
    check_depth(env, n)?;
    let m = -(n as i64);
    let survival = env.survival_from_generation(m)?;
    if survival <= 0.0 {
        return Err(Error::Degenerate(format!("no survival from generation {m}")));
    }
    let closed = env.compose_derivative(m, 0, 0.0)? / survival;
    let product = a1_tail_product(env, n)?;
    if (closed - product).abs() > IDENTITY_TOLERANCE {
        return Err(Error::Mismatch(format!(
            "P(A_1 > {n}): closed form {closed} vs product {product}"
        )));
    }
    Ok(closed)
}

fn check_depth(env: &Environment, n: usize) -> Result<()> {
    if n == 0 || n > env.horizon() {
        return Err(Error::Horizon(format!("n = {n} outside [1, {}]", env.horizon())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> OffspringLaw {
        OffspringLaw::finite(vec![0.25, 0.5, 0.25]).unwrap()
    }

    fn lf(r: f64, p: f64) -> OffspringLaw {
        OffspringLaw::linear_fractional(r, p).unwrap()
    }

    // P(zeta = j) by thinning: xi ~ law, each child survives independently with prob `keep`.
    fn zeta_by_enumeration(law: &OffspringLaw, keep: f64, j: usize) -> f64 {
        let (probs, _) = law.pmf_prefix(1e-300);
        probs
            .iter()
            .enumerate()
            .filter(|&(x, _)| x >= j)
            .map(|(x, p)| {
                let c: f64 = (0..j).map(|i| (x - i) as f64 / (i + 1) as f64).product();
                p * c * keep.powi(j as i32) * (1.0 - keep).powi((x - j) as i32)
            })
            .sum()
    }

    #[test]
    fn eta_one_generation() {
        let env = Environment::constant(tri(), 1).unwrap();
        let law = eta_pmf(&env, 1).unwrap();
        assert!((law.pmf(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((law.pmf(1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(law.pmf(2), 0.0);
    }

    #[test]
    fn eta_two_generations() {
        let env = Environment::constant(tri(), 2).unwrap();
        let law = eta_pmf(&env, 2).unwrap();
        // thinning oracle: children survive one more generation w.p. 3/4
        let z0 = zeta_by_enumeration(&tri(), 0.75, 0);
        let z1 = zeta_by_enumeration(&tri(), 0.75, 1);
        let z2 = zeta_by_enumeration(&tri(), 0.75, 2);
        assert!((z1 - 0.46875).abs() < 1e-15);
        assert!((law.pmf(0) - z1 / (1.0 - z0)).abs() < 1e-15);
        assert!((law.pmf(1) - z2 / (1.0 - z0)).abs() < 1e-15);
        assert!((law.pmf(0) - 10.0 / 13.0).abs() < 1e-15);
        assert!((law.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_dirac_one() {
        let env = Environment::constant(OffspringLaw::dirac(1), 3).unwrap();
        for n in 1..=3 {
            assert_eq!(eta_pmf(&env, n).unwrap().pmf(0), 1.0);
            assert_eq!(eta_zero_prob(&env, -(n as i64)).unwrap(), 1.0);
            assert_eq!(a1_tail(&env, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn eta_degenerate() {
        let env = Environment::new(vec![OffspringLaw::dirac(0), tri()]).unwrap();
        assert!(matches!(eta_pmf(&env, 1), Err(Error::Degenerate(_))));
        assert!(matches!(eta_zero_prob(&env, -2), Err(Error::Degenerate(_))));
        assert!(eta_zero_prob(&env, -1).is_ok());
        let dead_late = Environment::new(vec![tri(), OffspringLaw::dirac(0)]).unwrap();
        assert!(matches!(a1_tail(&dead_late, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn eta_zero_matches_shifted_pmf() {
        let env = Environment::new(vec![
            OffspringLaw::finite(vec![0.1, 0.3, 0.4, 0.2]).unwrap(),
            tri(),
            lf(0.7, 0.4),
            OffspringLaw::finite(vec![0.2, 0.2, 0.6]).unwrap(),
        ])
        .unwrap();
        for depth in 1..=4usize {
            let via_pmf = eta_at_depth(&env, depth).unwrap().zero_prob();
            let direct = eta_zero_prob(&env, -(depth as i64)).unwrap();
            assert!((via_pmf - direct).abs() < 1e-12);
        }
        let two = Environment::constant(tri(), 2).unwrap();
        assert!((eta_zero_prob(&two, -2).unwrap() - 10.0 / 13.0).abs() < 1e-15);
        let lf_env = Environment::constant(lf(0.5, 0.5), 1).unwrap();
        assert!((eta_zero_prob(&lf_env, -1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lf_eta_geometric_matches_generic() {
        let envs = [
            Environment::constant(lf(0.5, 0.5), 4).unwrap(),
            Environment::new(vec![lf(0.9, 0.3), lf(0.5, 0.5), lf(0.2, 0.6), lf(1.0, 0.45)])
                .unwrap(),
            Environment::new(vec![lf(0.8, 0.35), tri(), lf(0.6, 0.5)]).unwrap(),
        ];
        for env in &envs {
            for n in 1..=env.horizon() {
                let law = eta_pmf(env, n).unwrap();
                assert!(matches!(law, EtaLaw::Geometric { .. }));
                for k in 0..=50 {
                    let generic = eta_prob_from_derivatives(env, n, k).unwrap();
                    assert!((generic - law.pmf(k)).abs() < 1e-10, "n={n} k={k}");
                }
            }
        }
        // success probability equals lambda_n, from the s coefficients
        let env = &envs[1];
        for n in 1..=4 {
            let law = eta_at_depth(env, n).unwrap();
            match law {
                EtaLaw::Geometric { success } => {
                    assert!((success - env.lf_failure_prob(n).unwrap()).abs() < 1e-12)
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn eta_mass_sums_to_one() {
        let env = Environment::new(vec![
            OffspringLaw::finite(vec![0.05, 0.15, 0.3, 0.3, 0.2]).unwrap(),
            tri(),
            OffspringLaw::finite(vec![0.3, 0.0, 0.7]).unwrap(),
        ])
        .unwrap();
        for n in 1..=3 {
            let law = eta_pmf(&env, n).unwrap();
            assert!((law.total_mass() - 1.0).abs() < 1e-10);
            let (m, tail) = eta_pmf(&Environment::constant(lf(0.5, 0.5), 3).unwrap(), n)
                .unwrap()
                .materialize(1e-14);
            assert!((m.iter().sum::<f64>() + tail - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn a1_tail_examples() {
        let env = Environment::constant(lf(0.5, 0.5), 6).unwrap();
        for n in 1..=6 {
            let t = a1_tail(&env, n).unwrap();
            assert!((t - 1.0 / (n as f64 + 1.0)).abs() < 1e-12);
            assert!((env.lf_a1_tail(n).unwrap() - t).abs() < 1e-12);
        }
        // one generation: P(Z_1 = 1) / P(Z_1 > 0)
        let env = Environment::constant(tri(), 2).unwrap();
        assert!((a1_tail(&env, 1).unwrap() - 0.5 / 0.75).abs() < 1e-15);
        assert!(a1_tail(&env, 3).is_err());
        assert!(a1_tail(&env, 0).is_err());
    }
}
