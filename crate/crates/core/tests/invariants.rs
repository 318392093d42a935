//! Property-based invariants across modules.

use gwve::chains::{b_run, d_run, validate_trace, EtaKernel};
use gwve::environment::Environment;
use gwve::eta::{a1_tail, a1_tail_product, eta_at_depth, eta_pmf, eta_prob_from_derivatives};
use gwve::genealogy::{coalescent_times, d_vector, genealogy_from_cpp, pairwise_coalescence};
use gwve::pgf::OffspringLaw;
use gwve::tree::{condition_on_survival, SimOptions};
use gwve::verify::suite::law_pair;
use gwve::verify::{exact_tv, EnumOptions};
use num_traits::Zero;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Finite-support law with up to four atoms and positive mass at 1.
fn finite_law() -> impl Strategy<Value = OffspringLaw> {
    prop::collection::vec(1u32..20, 2..=4).prop_map(|mut w| {
        w[1] += 5;
        let total: u32 = w.iter().sum();
        OffspringLaw::finite(w.iter().map(|&x| x as f64 / total as f64).collect()).unwrap()
    })
}

fn lf_law() -> impl Strategy<Value = OffspringLaw> {
    (0.2f64..1.0, 0.3f64..0.95).prop_map(|(r, p)| OffspringLaw::linear_fractional(r, p).unwrap())
}

fn any_law() -> impl Strategy<Value = OffspringLaw> {
    prop_oneof![finite_law(), lf_law()]
}

fn env_of(
    law: impl Strategy<Value = OffspringLaw>,
    max_n: usize,
) -> impl Strategy<Value = Environment> {
    prop::collection::vec(law, 1..=max_n).prop_map(|laws| Environment::new(laws).unwrap())
}

/// Dyadic law on {0, 1, 2} with denominator 8.
fn dyadic_law() -> impl Strategy<Value = OffspringLaw> {
    (0u32..=7, 1u32..=8).prop_filter_map("sums to 8", |(a, b)| {
        (a + b <= 8).then(|| {
            OffspringLaw::finite(vec![a as f64 / 8.0, b as f64 / 8.0, (8 - a - b) as f64 / 8.0])
                .unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgf_endpoints_and_monotonicity(law in any_law(), s in 0.0f64..1.0) {
        prop_assert!((law.pgf(1.0).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((law.pgf(0.0).unwrap() - law.prob(0)).abs() < 1e-12);
        let t = (s + 0.01).min(1.0);
        prop_assert!(law.pgf(s).unwrap() <= law.pgf(t).unwrap() + 1e-15);
        prop_assert!((law.pgf_derivative(1.0, 1).unwrap() - law.mean()).abs() < 1e-9 * law.mean().max(1.0));
    }

    #[test]
    fn composition_splits(env in env_of(any_law(), 6), s in 0.0f64..=1.0, cut in 0usize..7) {
        let n = env.horizon() as i64;
        let k = -(cut as i64 % (n + 1));
        let whole = env.compose(-n, 0, s).unwrap();
        let split = env.compose(-n, k, env.compose(k, 0, s).unwrap()).unwrap();
        prop_assert!((whole - split).abs() < 1e-12);
        if env.horizon() > 1 {
            let shifted = env.shift(1).unwrap();
            prop_assert!((shifted.compose(-n + 1, 0, s).unwrap() - env.compose(-n + 1, 0, s).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn lf_composite_is_lf(env in env_of(lf_law(), 6), s in 0.0f64..1.0) {
        let n = env.horizon() as i64;
        for m in -n..0 {
            let params = env.lf_compose(m, 0).unwrap();
            prop_assert!((params.pgf(s) - env.compose(m, 0, s).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn eta_laws_are_laws(env in env_of(any_law(), 5)) {
        for d in 1..=env.horizon() {
            let law = eta_at_depth(&env, d).unwrap();
            prop_assert!((law.total_mass() - 1.0).abs() < 1e-10);
        }
        let n = env.horizon();
        let eta = eta_pmf(&env, n).unwrap();
        for k in 0..6 {
            prop_assert!((eta.pmf(k) - eta_prob_from_derivatives(&env, n, k).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn a1_tail_is_a_decreasing_product(env in env_of(any_law(), 6)) {
        let mut prev = 1.0;
        for n in 1..=env.horizon() {
            let t = a1_tail(&env, n).unwrap();
            prop_assert!((t - a1_tail_product(&env, n).unwrap()).abs() < 1e-10);
            prop_assert!(t <= prev + 1e-15);
            prev = t;
        }
        if env.is_linear_fractional() {
            for n in 1..=env.horizon() {
                prop_assert!((env.lf_a1_tail(n).unwrap() - a1_tail(&env, n).unwrap()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn genealogy_is_read_off_the_cpp(env in env_of(finite_law(), 5), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (tree, _) = condition_on_survival(&env, &mut rng, &SimOptions::default()).unwrap();
        let cpp = coalescent_times(&tree).unwrap();
        prop_assert_eq!(cpp.survivors(), tree.survivors());
        prop_assert_eq!(genealogy_from_cpp(&cpp), pairwise_coalescence(&tree));
        prop_assert!(cpp.times().iter().all(|&a| a >= 1 && a as usize <= env.horizon()));
        // the first D vector counts the survivors to the right of the spine
        let d1 = d_vector(&tree, 1).unwrap();
        prop_assert!((d1.iter().sum::<u32>() as usize) < tree.survivors());
    }

    #[test]
    fn sampled_chain_paths_are_valid(env in env_of(any_law(), 5), seed in any::<u64>()) {
        let kernel = EtaKernel::new(&env).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = b_run(&kernel, &mut rng, 500).unwrap();
        prop_assert_eq!(validate_trace(&b.trace(), true), Ok(()));
        prop_assert!(b.times.iter().all(|&a| a as usize <= env.horizon()));
        let d = d_run(&kernel, &mut rng, 500).unwrap();
        prop_assert_eq!(validate_trace(&d.trace(), false), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn tree_and_chain_laws_coincide_exactly(env in env_of(dyadic_law(), 2)) {
        let laws = law_pair(&env, &EnumOptions::default()).unwrap();
        prop_assert!(laws.exact);
        prop_assert!(exact_tv(&laws.tree, &laws.chain).unwrap().is_zero());
        prop_assert!(exact_tv(&laws.tree, &laws.d_chain).unwrap().is_zero());
    }
}
