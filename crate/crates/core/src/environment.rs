//! Finite-horizon varying environments.
//!
//! An [`Environment`] of horizon `N` stores `N` offspring laws ordered from
//! the oldest generation to the newest: entry `j` is the law of individuals
//! living at generation `-N + j`. Generation `0` is the present and has no
//! law of its own. The generating function `f_k` belongs to the law of
//! generation `k - 1`, so `f_{m,n} = f_{m+1} o ... o f_n` composes the laws of
//! generations `m, ..., n - 1`.
//!
//! Every translation between generation numbers and storage offsets lives in
//! this module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgf::OffspringLaw;

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    laws: Vec<OffspringLaw>,
}

impl Environment {
    pub fn new(laws: Vec<OffspringLaw>) -> Result<Self> {
        if laws.is_empty() {
            return Err(Error::InvalidEnvironment("horizon must be at least 1".into()));
        }
        Ok(Environment { laws })
    }

    /// `horizon` copies of the same law.
    pub fn constant(law: OffspringLaw, horizon: usize) -> Result<Self> {
        Self::new(vec![law; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.laws.len()
    }

    /// Laws ordered oldest (generation `-N`) to newest (generation `-1`).
    pub fn laws(&self) -> &[OffspringLaw] {
        &self.laws
    }

    /// Offspring law of individuals at generation `m`, `-N <= m <= -1`.
    pub fn law_for_generation(&self, m: i64) -> Result<&OffspringLaw> {
        let n = self.horizon() as i64;
        if m < -n || m > -1 {
            return Err(Error::Horizon(format!("generation {m} outside [-{n}, -1]")));
        }
        Ok(&self.laws[(m + n) as usize])
    }

    /// Law at storage offset `depth_from_root`, i.e. generation `-N + depth_from_root`.
    pub(crate) fn law_at_depth_from_root(&self, d: usize) -> &OffspringLaw {
        &self.laws[d]
    }

    /// Drops the `k` oldest laws.
    pub fn shift(&self, k: usize) -> Result<Environment> {
        if k > self.horizon() {
            return Err(Error::Horizon(format!("shift {k} exceeds horizon {}", self.horizon())));
        }
        if k == self.horizon() {
            return Err(Error::InvalidEnvironment("shift would leave an empty environment".into()));
        }
        Environment::new(self.laws[k..].to_vec())
    }

    /// The environment seen by an individual at generation `-n`: the `n` most recent laws.
    pub fn recent(&self, n: usize) -> Result<Environment> {
        if n == 0 || n > self.horizon() {
            return Err(Error::Horizon(format!("depth {n} outside [1, {}]", self.horizon())));
        }
        self.shift(self.horizon() - n)
    }

    fn check_range(&self, m: i64, n: i64) -> Result<()> {
        let h = self.horizon() as i64;
        if m < -h || n > 0 || m > n {
            return Err(Error::Horizon(format!("range ({m}, {n}) not within -{h} <= m <= n <= 0")));
        }
        Ok(())
    }

    /// `f_{m,n}(s)` for `-N <= m <= n <= 0`.
    pub fn compose(&self, m: i64, n: i64, s: f64) -> Result<f64> {
        self.check_range(m, n)?;
        check_unit(s)?;
        let mut x = s;
        for g in (m..n).rev() {
            x = self.law_for_generation(g)?.pgf_unchecked(x);
        }
        Ok(x)
    }

    /// `f'_{m,n}(s) = prod_{l=m+1..n} f'_l(f_{l,n}(s))`.
    pub fn compose_derivative(&self, m: i64, n: i64, s: f64) -> Result<f64> {
        self.check_range(m, n)?;
        check_unit(s)?;
        let mut x = s;
        let mut product = 1.0;
        for g in (m..n).rev() {
            let law = self.law_for_generation(g)?;
            product *= law.taylor_unchecked(x, 1);
            x = law.pgf_unchecked(x);
        }
        Ok(product)
    }

    /// Probability that an individual at generation `m` has descendants at generation 0:
    /// `1 - f_{m,0}(0)`.
    pub fn survival_from_generation(&self, m: i64) -> Result<f64> {
        Ok(1.0 - self.compose(m, 0, 0.0)?)
    }

    /// Probability that the founder (generation `-N`) has descendants `n`
    /// generations later, `0 <= n <= N`.
    pub fn survival_prob(&self, n: usize) -> Result<f64> {
        let h = self.horizon() as i64;
        if n as i64 > h {
            return Err(Error::Horizon(format!("n = {n} exceeds horizon {h}")));
        }
        Ok(1.0 - self.compose(-h, -h + n as i64, 0.0)?)
    }

    /// `(r, p)` of the law `f_k`, i.e. of generation `k - 1`.
    fn lf_params_of(&self, k: i64) -> Result<(f64, f64)> {
        let law = self.law_for_generation(k - 1)?;
        law.lf_params().ok_or(Error::NotLinearFractional { generation: k - 1 })
    }

    /// Parameters of the linear-fractional composite `f_{m,n}`.
    pub fn lf_compose(&self, m: i64, n: i64) -> Result<LfParams> {
        self.check_range(m, n)?;
        let params: Vec<(f64, f64)> =
            ((m + 1)..=n).map(|k| self.lf_params_of(k)).collect::<Result<_>>()?;
        if params.is_empty() {
            return Ok(LfParams::IDENTITY);
        }
        if params.iter().any(|&(r, _)| r == 0.0) {
            return Ok(LfParams { r: 0.0, p: params[0].1 });
        }
        let mean: f64 = params.iter().map(|&(r, p)| r / p).product();
        let (r1, p1) = params[0];
        let mut nsfm = 2.0 * (1.0 - p1) / r1;
        // running p_{m+1}...p_{k-1} and r_{m+1}...r_{k-1}
        let mut p_prod = p1;
        let mut r_prod = r1;
        for &(rk, pk) in &params[1..] {
            nsfm += 2.0 * p_prod * (1.0 - pk) / (r_prod * rk);
            p_prod *= pk;
            r_prod *= rk;
        }
        Ok(LfParams::from_moments(mean, nsfm))
    }

    /// `s_i` for `-n + 1 <= i <= 0`, oldest first.
    pub fn lf_s_coefficients(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 || n > self.horizon() {
            return Err(Error::Horizon(format!("n = {n} outside [1, {}]", self.horizon())));
        }
        let mut out = vec![0.0; n];
        // ratio = prod_{j=i+1..0} r_j / p_j
        let mut ratio = 1.0;
        for (slot, i) in (-(n as i64) + 1..=0).rev().enumerate() {
            let (r, p) = self.lf_params_of(i)?;
            out[n - 1 - slot] = (1.0 - p) / p * ratio;
            ratio *= r / p;
        }
        Ok(out)
    }

    /// `P(A_1 > n) = (1 + sum s_i)^-1` for a linear-fractional environment.
    pub fn lf_a1_tail(&self, n: usize) -> Result<f64> {
        let total: f64 = self.lf_s_coefficients(n)?.iter().sum();
        Ok(1.0 / (1.0 + total))
    }

    /// Success probability of the geometric law of `eta^(-n)` in a
    /// linear-fractional environment.
    pub fn lf_failure_prob(&self, n: usize) -> Result<f64> {
        let s = self.lf_s_coefficients(n)?;
        let all: f64 = s.iter().sum();
        let without_oldest: f64 = s[1..].iter().sum();
        Ok((1.0 + without_oldest) / (1.0 + all))
    }

    pub fn is_linear_fractional(&self) -> bool {
        self.laws.iter().all(OffspringLaw::is_linear_fractional)
    }

    /// Largest offspring count with positive probability over all generations.
    pub fn max_support(&self) -> Option<usize> {
        self.laws.iter().map(OffspringLaw::max_support).try_fold(0, |acc, m| m.map(|m| acc.max(m)))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EnvFile = serde_json::from_str(text)
            .map_err(|e| Error::InvalidEnvironment(format!("malformed environment file: {e}")))?;
        file.into_environment()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&EnvFile::from(self)).expect("environment serializes")
    }

    /// Short stable fingerprint of the environment, used in reports.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(&EnvFile::from(self)).expect("serializes");
        // 64-bit FNV-1a
        let mut h: u64 = 0xcbf29ce484222325;
        for b in canonical.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

fn check_unit(s: f64) -> Result<()> {
    if (0.0..=1.0).contains(&s) {
        Ok(())
    } else {
        Err(Error::Domain { value: s })
    }
}

/// Parameters of a linear-fractional generating function. Unlike
/// [`OffspringLaw::LinearFractional`], `p = 1` is allowed so the identity
/// `f_{n,n}(s) = s` is representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfParams {
    pub r: f64,
    pub p: f64,
}

impl LfParams {
    pub const IDENTITY: LfParams = LfParams { r: 1.0, p: 1.0 };

    /// Recovers `(r, p)` from the mean `r/p` and the normalized second
    /// factorial moment `2q/r`.
    pub fn from_moments(mean: f64, nsfm: f64) -> Self {
        let d = 2.0 + mean * nsfm;
        LfParams { r: 2.0 * mean / d, p: 2.0 / d }
    }

    pub fn mean(&self) -> f64 {
        self.r / self.p
    }

    pub fn nsfm(&self) -> f64 {
        if self.r == 0.0 {
            return f64::INFINITY;
        }
        2.0 * (1.0 - self.p) / self.r
    }

    pub fn pgf(&self, s: f64) -> f64 {
        let q = 1.0 - self.p;
        1.0 - self.r * (1.0 - s) / (1.0 - q * s)
    }

    pub fn pgf_derivative(&self, s: f64) -> f64 {
        let q = 1.0 - self.p;
        self.r * self.p / ((1.0 - q * s) * (1.0 - q * s))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EnvFile {
    horizon: usize,
    laws: Vec<LawSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
enum LawSpec {
    #[serde(rename = "pmf")]
    Pmf { p: Vec<f64> },
    #[serde(rename = "lf")]
    Lf { r: f64, p: f64 },
}

impl EnvFile {
    fn into_environment(self) -> Result<Environment> {
        if self.horizon != self.laws.len() {
            return Err(Error::InvalidEnvironment(format!(
                "horizon {} does not match {} laws",
                self.horizon,
                self.laws.len()
            )));
        }
        let laws = self
            .laws
            .into_iter()
            .enumerate()
            .map(|(index, spec)| {
                match spec {
                    LawSpec::Pmf { p } => OffspringLaw::finite(p),
                    LawSpec::Lf { r, p } => OffspringLaw::linear_fractional(r, p),
                }
                .map_err(|e| Error::InvalidEntry { index, reason: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        Environment::new(laws)
    }
}

impl From<&Environment> for EnvFile {
    fn from(env: &Environment) -> Self {
        EnvFile {
            horizon: env.horizon(),
            laws: env
                .laws
                .iter()
                .map(|law| match law {
                    OffspringLaw::FiniteSupport { probs } => LawSpec::Pmf { p: probs.clone() },
                    OffspringLaw::LinearFractional { r, p } => LawSpec::Lf { r: *r, p: *p },
                })
                .collect(),
        }
    }
}
