use proptest::prelude::*;
use qfb_core::channel::{capacity, sample_gammas, RicianSpec};
use qfb_core::feedback::{analytic_goodput, empirical_goodput, FeedbackScheme};
use qfb_core::oracle::brute_force;

const SNR: f64 = 100.0;

fn interior_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(1u32..3000, 1..5)
        .prop_map(|s| s.into_iter().map(|v| v as f64 / 1000.0).collect())
}

/// Mean and standard error of per-sample rewards, computed directly.
fn sample_stats(scheme: &FeedbackScheme<f64>, gammas: &[f64]) -> (f64, f64) {
    let rewards: Vec<f64> = gammas
        .iter()
        .map(|&g| {
            let r = scheme.rates()[scheme.quantize(g)];
            if r <= capacity(g, SNR) { r } else { 0.0 }
        })
        .collect();
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantize_is_monotone(interior in interior_strategy(), a in 0.0f64..4.0, b in 0.0f64..4.0) {
        let s = FeedbackScheme::from_interior(&interior, SNR).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(s.quantize(lo) <= s.quantize(hi));
        let l = s.quantize(lo);
        prop_assert!(s.lambdas()[l] <= lo && lo < s.lambdas()[l + 1]);
    }

    #[test]
    fn region_masses_sum_to_one(interior in interior_strategy(), k in 0.0f64..50.0) {
        let spec = RicianSpec::new(k, 1.0, SNR).unwrap();
        let s = FeedbackScheme::from_interior(&interior, SNR).unwrap();
        let rep = analytic_goodput(&s, &spec);
        prop_assert!((rep.per_region_mass.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert_eq!(rep.outage_rate, 0.0);
        prop_assert!(rep.goodput >= 0.0);
    }

    #[test]
    fn splitting_a_region_at_its_own_rate_changes_nothing(
        interior in interior_strategy(), k in 0.0f64..20.0, frac in 0.01f64..0.99, pick in 0usize..8,
    ) {
        let spec = RicianSpec::new(k, 1.0, SNR).unwrap();
        let s = FeedbackScheme::from_interior(&interior, SNR).unwrap();
        let l = pick % s.num_regions();
        let lam = s.lambdas();
        let upper = if lam[l + 1].is_finite() { lam[l + 1] } else { lam[l] + 1.0 };
        let x = lam[l] + frac * (upper - lam[l]);
        prop_assume!(x > lam[l] && x < upper);
        let mut lambdas = lam.to_vec();
        lambdas.insert(l + 1, x);
        let mut rates = s.rates().to_vec();
        rates.insert(l + 1, rates[l]);
        let split = FeedbackScheme::new(lambdas, rates, SNR).unwrap();
        let a = analytic_goodput(&s, &spec).goodput;
        let b = analytic_goodput(&split, &spec).goodput;
        prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn rate_matched_schemes_never_outage(interior in interior_strategy(), seed in 0u64..1000) {
        let spec = RicianSpec::new(4.0, 1.0, SNR).unwrap();
        let s = FeedbackScheme::from_interior(&interior, SNR).unwrap();
        let gammas: Vec<f64> = sample_gammas(&spec, 2000, seed).unwrap().iter().map(|g| g.gamma()).collect();
        prop_assert_eq!(empirical_goodput(&s, &gammas).unwrap().outage_rate, 0.0);
    }
}

#[test]
fn rate_matched_scheme_has_no_outage_over_many_samples() {
    let spec = RicianSpec::new(10.0, 1.0, SNR).unwrap();
    let s = FeedbackScheme::from_interior(&[0.6, 0.9, 1.1], SNR).unwrap();
    let gammas: Vec<f64> = sample_gammas(&spec, 100_000, 4).unwrap().iter().map(|g| g.gamma()).collect();
    assert_eq!(empirical_goodput(&s, &gammas).unwrap().outage_rate, 0.0);
}

#[test]
fn region_histogram_matches_distribution_function() {
    let spec = RicianSpec::new(2.0, 1.0, SNR).unwrap();
    let s = FeedbackScheme::from_interior(&[0.5, 1.0, 1.4], SNR).unwrap();
    let n = 200_000;
    let gammas: Vec<f64> = sample_gammas(&spec, n, 8).unwrap().iter().map(|g| g.gamma()).collect();
    let emp = empirical_goodput(&s, &gammas).unwrap();
    let lam = s.lambdas();
    for (l, &freq) in emp.per_region_mass.iter().enumerate() {
        let p = spec.cdf(lam[l + 1].min(1e9)).unwrap() - spec.cdf(lam[l]).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 4.0 * se, "region {l}: {freq} vs {p}");
    }
}

#[test]
fn empirical_and_analytic_goodput_agree_on_random_schemes() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
    for case in 0..20 {
        let k: f64 = rng.random_range(0.0..30.0);
        let spec = RicianSpec::new(k, 1.0, SNR).unwrap();
        let mut interior: Vec<f64> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0.05..2.0)).collect();
        interior.sort_by(f64::total_cmp);
        interior.dedup();
        // general rates, some above rate matching so outage is exercised
        let mut lambdas = vec![0.0];
        lambdas.extend(&interior);
        lambdas.push(f64::INFINITY);
        let rates: Vec<f64> = lambdas[..lambdas.len() - 1]
            .iter()
            .map(|&l: &f64| capacity(l + rng.random_range(0.0..0.3), SNR))
            .collect();
        let s = FeedbackScheme::new(lambdas, rates, SNR).unwrap();
        let gammas: Vec<f64> = sample_gammas(&spec, 200_000, case).unwrap().iter().map(|g| g.gamma()).collect();
        let (mean, se) = sample_stats(&s, &gammas);
        let emp = empirical_goodput(&s, &gammas).unwrap();
        assert!((emp.goodput - mean).abs() < 1e-9);
        let ana = analytic_goodput(&s, &spec);
        // a sample of n cannot resolve mass below 1/n
        let floor = s.rates().iter().fold(0.0f64, |a, &b| a.max(b)) / gammas.len() as f64;
        assert!((ana.goodput - mean).abs() < 4.0 * se + floor, "case {case}: {} vs {mean} ± {se}", ana.goodput);
    }
}

#[test]
fn analytic_goodput_matches_million_draws_at_k10() {
    let spec = RicianSpec::new(10.0, 1.0, SNR).unwrap();
    let s = FeedbackScheme::new(vec![0.0, 0.7, 1.0, f64::INFINITY], vec![3.0, capacity(0.75, SNR), capacity(1.0, SNR)], SNR).unwrap();
    let gammas: Vec<f64> = sample_gammas(&spec, 1_000_000, 77).unwrap().iter().map(|g| g.gamma()).collect();
    let (mean, se) = sample_stats(&s, &gammas);
    let ana = analytic_goodput(&s, &spec);
    assert!(ana.outage_rate > 0.0);
    assert!((ana.goodput - mean).abs() < 3.0 * se);
}

#[test]
fn moving_boundaries_to_the_optimizer_never_hurts() {
    let spec = RicianSpec::new(10.0, 1.0, SNR).unwrap();
    let goodput = |interior: &[f64]| analytic_goodput(&FeedbackScheme::from_interior(interior, SNR).unwrap(), &spec).goodput;
    // a rate-matched scheme with Λ regions is a free chain of Λ-1 levels
    let opt = brute_force(&spec, 3, 256).unwrap();
    let target = opt.reconstruction_points.clone().unwrap();
    assert!((goodput(&target) - opt.goodput).abs() < 1e-12);
    let mut current = vec![0.5, 0.8, 1.1];
    // move one boundary at a time towards the optimizer output, in an order
    // that keeps the boundaries sorted
    let order: Vec<usize> = if target[0] < current[0] { vec![0, 1, 2] } else { vec![2, 1, 0] };
    for _ in 0..3 {
        for &l in &order {
            let mut next = current.clone();
            next[l] = target[l];
            if next.windows(2).all(|w| w[0] < w[1]) {
                current = next;
            }
        }
    }
    assert_eq!(current, target);
    assert!(goodput(&current) >= goodput(&[0.5, 0.8, 1.1]));
}
