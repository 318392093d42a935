//! Discrete laws over canonical outcome keys and distances between them.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::weight::Weight;

/// A discrete law keyed by canonical outcome strings such as `K=3;A=1,2`.
///
/// `missing` is the probability mass known to be left out by truncation or
/// pruning; it is zero for complete tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistTable {
    entries: BTreeMap<String, f64>,
    exact: Option<BTreeMap<String, BigRational>>,
    missing: f64,
}

impl DistTable {
    pub fn new(entries: BTreeMap<String, f64>, missing: f64) -> Self {
        DistTable { entries, exact: None, missing: missing.max(0.0) }
    }

    /// Table from weights; exact weights also fill the rational payload.
    pub fn from_weights<W: Weight>(weights: BTreeMap<String, W>, missing: f64) -> Self {
        let entries = weights.iter().map(|(k, w)| (k.clone(), w.to_f64())).collect();
        let exact = if W::EXACT {
            Some(weights.iter().filter_map(|(k, w)| Some((k.clone(), w.to_rational()?))).collect())
        } else {
            None
        };
        DistTable { entries, exact, missing: missing.max(0.0) }
    }

    pub fn get(&self, key: &str) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> &BTreeMap<String, f64> {
        &self.entries
    }

    pub fn exact(&self) -> Option<&BTreeMap<String, BigRational>> {
        self.exact.as_ref()
    }

    pub fn missing(&self) -> f64 {
        self.missing
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Exact total mass, if the table carries rationals.
    pub fn exact_total(&self) -> Option<BigRational> {
        self.exact.as_ref().map(|m| m.values().fold(BigRational::zero(), |a, b| a + b))
    }

    /// Total mass of the outcomes whose key satisfies `pred`.
    pub fn mass_where(&self, pred: impl Fn(&str) -> bool) -> f64 {
        self.entries.iter().filter(|(k, _)| pred(k)).map(|(_, p)| p).sum()
    }

    /// Image law under a relabelling of the outcomes.
    pub fn map_keys(&self, f: impl Fn(&str) -> String) -> DistTable {
        let mut entries = BTreeMap::new();
        for (k, p) in &self.entries {
            *entries.entry(f(k)).or_insert(0.0) += p;
        }
        let exact = self.exact.as_ref().map(|m| {
            let mut out: BTreeMap<String, BigRational> = BTreeMap::new();
            for (k, p) in m {
                let slot = out.entry(f(k)).or_insert_with(BigRational::zero);
                *slot = slot.clone() + p;
            }
            out
        });
        DistTable { entries, exact, missing: self.missing }
    }

    /// `key,probability` lines sorted by key.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("outcome,probability\n");
        for (k, p) in &self.entries {
            out.push_str(&format!("{k},{p:.17e}\n"));
        }
        out
    }
}

/// Parses `K=k;A=a1,...` into `(k, [a1, ...])`.
pub fn parse_outcome(key: &str) -> Option<(usize, Vec<u32>)> {
    let (k, a) = key.split_once(';')?;
    let k = k.strip_prefix("K=")?.parse().ok()?;
    let a = a.strip_prefix("A=")?;
    let times = if a.is_empty() {
        Vec::new()
    } else {
        a.split(',').map(|x| x.parse().ok()).collect::<Option<Vec<u32>>>()?
    };
    Some((k, times))
}

/// Half the L1 distance; missing keys count as zero.
pub fn tv_distance(a: &DistTable, b: &DistTable) -> f64 {
    let mut sum = 0.0;
    for (k, p) in &a.entries {
        sum += (p - b.get(k)).abs();
    }
    for (k, p) in &b.entries {
        if !a.entries.contains_key(k) {
            sum += p.abs();
        }
    }
    sum / 2.0
}

/// Upper bound on the distance between the untruncated laws.
pub fn tv_upper_bound(a: &DistTable, b: &DistTable) -> f64 {
    tv_distance(a, b) + (a.missing + b.missing) / 2.0
}

/// Exact distance when both tables carry rationals.
pub fn exact_tv(a: &DistTable, b: &DistTable) -> Option<BigRational> {
    let (ea, eb) = (a.exact.as_ref()?, b.exact.as_ref()?);
    let zero = BigRational::zero();
    let mut sum = BigRational::zero();
    for (k, p) in ea {
        sum += (p - eb.get(k).unwrap_or(&zero)).abs();
    }
    for (k, p) in eb {
        if !ea.contains_key(k) {
            sum += p.abs();
        }
    }
    Some(sum / BigRational::from_integer(2.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(pairs: &[(&str, f64)]) -> DistTable {
        DistTable::new(pairs.iter().map(|&(k, p)| (k.to_string(), p)).collect(), 0.0)
    }

    #[test]
    fn tv_examples() {
        let t = table(&[("x", 0.3), ("y", 0.7)]);
        assert_eq!(tv_distance(&t, &t), 0.0);
        assert_eq!(tv_distance(&table(&[("x", 1.0)]), &table(&[("y", 1.0)])), 1.0);
        let mut truncated = table(&[("x", 0.3)]);
        truncated.missing = 0.7;
        assert!((tv_upper_bound(&t, &truncated) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn exact_payload() {
        let half = BigRational::new(1.into(), 2.into());
        let a: BTreeMap<String, BigRational> =
            [("x".to_string(), half.clone()), ("y".to_string(), half.clone())].into();
        let ta = DistTable::from_weights(a, 0.0);
        assert_eq!(ta.exact_total(), Some(BigRational::from_integer(1.into())));
        assert_eq!(exact_tv(&ta, &ta), Some(BigRational::zero()));
        let b: BTreeMap<String, BigRational> = [("x".to_string(), half.clone() + half)].into();
        assert_eq!(
            exact_tv(&ta, &DistTable::from_weights(b, 0.0)),
            Some(BigRational::new(1.into(), 2.into()))
        );
        assert_eq!(ta.map_keys(|_| "z".into()).exact_total(), ta.exact_total());
    }

    #[test]
    fn outcome_keys() {
        assert_eq!(parse_outcome("K=3;A=1,2"), Some((3, vec![1, 2])));
        assert_eq!(parse_outcome("K=1;A="), Some((1, vec![])));
        assert_eq!(parse_outcome("A=1"), None);
    }

    proptest! {
        #[test]
        fn tv_symmetric_and_bounded(
            a in proptest::collection::vec(0.0f64..1.0, 1..6),
            b in proptest::collection::vec(0.0f64..1.0, 1..6),
        ) {
            let norm = |v: &[f64], tag: &str| {
                let s: f64 = v.iter().sum::<f64>().max(1e-12);
                DistTable::new(v.iter().enumerate().map(|(i, p)| (format!("{tag}{i}"), p / s)).collect(), 0.0)
            };
            let (ta, tb) = (norm(&a, "k"), norm(&b, "k"));
            let d = tv_distance(&ta, &tb);
            prop_assert!((d - tv_distance(&tb, &ta)).abs() < 1e-15);
            prop_assert!((-1e-15..=1.0 + 1e-12).contains(&d));
            prop_assert!(tv_distance(&ta, &ta) == 0.0);
        }
    }
}
