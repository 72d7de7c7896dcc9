use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use spikedrop::stats::{
    compare_samples, ecdf_sup_distance, ks_p_value, ks_two_sample, pvalue_uniformity, shared_histogram,
};

fn normals(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect()
}

#[test]
fn identical_samples_give_zero_distance_and_unit_p() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = normals(&mut rng, 100, 0.0);
    let r = ks_two_sample(&a, &a).unwrap();
    assert_eq!((r.statistic_d, r.p_value, r.n, r.m), (0.0, 1.0, 100, 100));
}

#[test]
fn shifted_normals_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, b) = (normals(&mut rng, 100, 0.0), normals(&mut rng, 100, 5.0));
    assert!(ks_two_sample(&a, &b).unwrap().p_value < 1e-6);
}

#[test]
fn equal_distributions_are_rarely_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let kept = (0..100)
        .filter(|_| {
            let (a, b) = (normals(&mut rng, 100, 0.0), normals(&mut rng, 100, 0.0));
            ks_two_sample(&a, &b).unwrap().p_value > 0.01
        })
        .count();
    assert!(kept >= 95, "{kept}/100");
}

#[test]
fn null_rejection_rate_is_near_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rejected = (0..2000)
        .filter(|_| {
            let (a, b) = (normals(&mut rng, 100, 0.0), normals(&mut rng, 100, 0.0));
            ks_two_sample(&a, &b).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejected as f64 / 2000.0;
    assert!((0.03..=0.07).contains(&rate), "{rate}");
}

#[test]
fn uniform_draws_pass_the_uniformity_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
    let r = pvalue_uniformity(&u).unwrap();
    assert!(r.ks_vs_uniform_p > 0.01, "{}", r.ks_vs_uniform_p);
    assert_eq!(r.histogram.iter().sum::<usize>(), 1000);
}

#[test]
fn report_recounts_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..12)
        .map(|i| (normals(&mut rng, 50, 0.0), normals(&mut rng, 60, if i % 3 == 0 { 1.0 } else { 0.0 })))
        .collect();
    let pairs: Vec<(usize, &[f64], &[f64])> = samples.iter().enumerate().map(|(i, (a, b))| (i, a.as_slice(), b.as_slice())).collect();
    let report = compare_samples(&pairs, 20).unwrap();
    let below = report.observations.iter().filter(|o| o.p < 0.05).count();
    assert_eq!(report.uniformity.fraction_below_0_05, below as f64 / 12.0);
    for o in &report.observations {
        assert_eq!(o.histogram.a.iter().sum::<usize>(), 50);
        assert_eq!(o.histogram.b.iter().sum::<usize>(), 60);
        assert_eq!(o.histogram.edges.len(), 21);
    }
    let json = serde_json::to_value(&report).unwrap();
    assert!(json["observations"][0].get("D").is_some());
    assert!(json["uniformity"].get("fraction_below_0_05").is_some());
}

#[test]
fn self_comparison_is_exact() {
    let a = [0.5, 1.5, -2.0, 3.0];
    let report = compare_samples(&[(0, &a, &a), (1, &a, &a)], 20).unwrap();
    assert!(report.observations.iter().all(|o| o.d == 0.0 && o.p == 1.0));
    assert_eq!(shared_histogram(&a, &a, 20).unwrap().a, shared_histogram(&a, &a, 20).unwrap().b);
}

proptest! {
    #[test]
    fn distance_is_symmetric_and_bounded(
        a in prop::collection::vec(-100.0f64..100.0, 1..60),
        b in prop::collection::vec(-100.0f64..100.0, 1..60),
    ) {
        let d = ecdf_sup_distance(&a, &b).unwrap();
        prop_assert_eq!(d, ecdf_sup_distance(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        let p = ks_two_sample(&a, &b).unwrap().p_value;
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn distance_ignores_monotone_transforms(
        a in prop::collection::vec(-5.0f64..5.0, 1..60),
        b in prop::collection::vec(-5.0f64..5.0, 1..60),
    ) {
        let f = |v: &[f64]| v.iter().map(|x| x.exp() * 3.0 + 1.0).collect::<Vec<_>>();
        prop_assert_eq!(ecdf_sup_distance(&a, &b).unwrap(), ecdf_sup_distance(&f(&a), &f(&b)).unwrap());
    }

    #[test]
    fn ties_within_a_small_grid_are_handled(
        a in prop::collection::vec(0u8..4, 1..30),
        b in prop::collection::vec(0u8..4, 1..30),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = (a.iter().map(|&v| v as f64).collect(), b.iter().map(|&v| v as f64).collect());
        let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        let brute = (0..4).map(|x| (cdf(&a, x as f64) - cdf(&b, x as f64)).abs()).fold(0.0, f64::max);
        prop_assert_eq!(ecdf_sup_distance(&a, &b).unwrap(), brute);
    }

    #[test]
    fn p_value_is_non_increasing_in_d(d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, n in 1usize..500, m in 1usize..500) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(ks_p_value(hi, n, m) <= ks_p_value(lo, n, m));
    }
}
