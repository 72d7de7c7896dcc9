use std::collections::HashSet;

use proptest::prelude::*;

use spikedrop::network::{
    forward, init_weights, sample_masks, validate, DropMasks, NetworkSpec, WeightStore,
};
use spikedrop::neuron::NeuronParams;
use spikedrop::training::{train_step, Adam, TrainConfig};
use spikedrop::{AnalogNetwork64, SpecError};

fn params() -> NeuronParams<f64> {
    NeuronParams::default().with_amplitude(0.01)
}

/// Weights of a plain MLP with each dropped neuron's outgoing column
/// zeroed and surviving columns divided by the keep probability.
fn fold_masks(spec: &NetworkSpec, weights: &WeightStore<f64>, masks: &DropMasks) -> WeightStore<f64> {
    let mut edited = weights.clone();
    for (k, site) in spec.sites().iter().enumerate().skip(1) {
        let prev = &spec.head[k - 1];
        let next = edited.layers.get_mut(&site.param_key).unwrap();
        for c in 0..prev.out_dim {
            let factor = if masks.masks[k - 1][c] { 1.0 / prev.keep_prob } else { 0.0 };
            for r in 0..next.weight.rows() {
                let v = next.weight.get(r, c);
                next.weight.set(r, c, v * factor);
            }
        }
    }
    edited
}

#[test]
fn masked_forward_equals_forward_with_deleted_weights() {
    let spec = NetworkSpec::mlp(3, &[6, 5], 1, 0.8);
    let dense = NetworkSpec::mlp(3, &[6, 5], 1, 1.0);
    let weights = init_weights(&spec, 9, &params());
    let x = [0.4, -1.1, 0.8];
    for seed in 0..20 {
        let masks = sample_masks(&spec, seed);
        let masked = forward(&spec, &weights, &x, Some(&masks), &params()).unwrap().output[0];
        let edited = fold_masks(&spec, &weights, &masks);
        let oracle = forward(&dense, &edited, &x, None, &params()).unwrap().output[0];
        assert!((masked - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "seed {seed}: {masked} vs {oracle}");
    }
}

#[test]
fn all_ones_masks_reproduce_deterministic_forward_bitwise() {
    let spec = NetworkSpec::combo(4, 3, 6, 8, 1.0);
    let weights = init_weights(&spec, 1, &params());
    let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
    let masks = sample_masks(&spec, 123);
    assert_eq!(masks, DropMasks::all_active(&spec));
    let det = forward(&spec, &weights, &x, None, &params()).unwrap();
    let masked = forward(&spec, &weights, &x, Some(&masks), &params()).unwrap();
    assert_eq!(det.output[0].to_bits(), masked.output[0].to_bits());
}

#[test]
fn mask_average_approximates_deterministic_output() {
    let spec = NetworkSpec::mlp(3, &[16], 1, 0.8);
    let model = AnalogNetwork64::new(spec.clone(), params(), init_weights(&spec, 5, &params())).unwrap();
    let x = [0.3, 0.9, -0.5];
    let det = model.forward(&x, None).unwrap().output[0];
    let n = 10_000;
    let mean = (0..n)
        .map(|s| model.forward(&x, Some(&sample_masks(&spec, s))).unwrap().output[0])
        .sum::<f64>()
        / n as f64;
    assert!(((mean - det) / det).abs() < 0.05, "{mean} vs {det}");
}

#[test]
fn wide_layer_keeps_about_keep_prob() {
    let spec = NetworkSpec::mlp(2, &[10_000], 1, 0.8);
    let masks = sample_masks(&spec, 77);
    let frac = masks.masks[0].iter().filter(|&&m| m).count() as f64 / 10_000.0;
    assert!((0.78..=0.82).contains(&frac), "{frac}");
    assert!(masks.masks[1].iter().all(|&m| m));
    assert_eq!(sample_masks(&spec, 77), masks);
}

#[test]
fn shared_towers_see_updated_weights() {
    let p = params();
    let spec = NetworkSpec::combo(2, 3, 4, 5, 1.0);
    let mut weights = init_weights(&spec, 3, &p);
    assert!(!weights.layers.contains_key("drug_a.0"));
    let drug = [0.5, -0.2, 0.9];
    let x: Vec<f64> = [1.0, -1.0].iter().chain(&drug).chain(&drug).copied().collect();
    let before = forward(&spec, &weights, &x, None, &p).unwrap();

    let mut adam = Adam::new(&spec, &TrainConfig::default());
    train_step(&spec, &mut weights, &mut adam, &[(&x, 3.0)], None, &p).unwrap();
    let after = forward(&spec, &weights, &x, None, &p).unwrap();

    let (a, b) = (&after.sites[1].activation, &after.sites[2].activation);
    assert_eq!(a, b);
    assert_ne!(a, &before.sites[1].activation);
    let shared = &weights.layers["drug.0"];
    let recomputed = shared.weight.affine(&drug, &shared.bias);
    assert_eq!(after.sites[1].current, recomputed);
    assert_eq!(after.sites[2].current, recomputed);
}

#[test]
fn spec_guards() {
    let mut spec = NetworkSpec::mlp(3, &[4], 1, 0.8);
    spec.head[1].keep_prob = 0.5;
    assert!(matches!(validate(&spec), Err(SpecError::OutputDropout { .. })));
    let mut spec = NetworkSpec::mlp(3, &[4], 1, 0.8);
    spec.head[0].keep_prob = 0.0;
    assert!(matches!(validate(&spec), Err(SpecError::KeepProbability { .. })));
    let mut spec = NetworkSpec::mlp(3, &[4], 1, 0.8);
    spec.head[1].in_dim = 5;
    assert!(validate(&spec).is_err());
    let spec = NetworkSpec::combo(3, 2, 4, 5, 0.8);
    let w = init_weights::<f64>(&spec, 0, &params());
    let x = [0.0; 6];
    assert!(forward(&spec, &w, &x, None, &params()).is_err());
}

#[test]
fn init_weights_is_seeded() {
    let spec = NetworkSpec::combo(3, 2, 4, 5, 0.8);
    let a = init_weights::<f64>(&spec, 42, &params());
    assert_eq!(a, init_weights(&spec, 42, &params()));
    assert_ne!(a, init_weights(&spec, 43, &params()));
    assert!(a.layers.values().all(|l| l.bias.iter().all(|&b| b == 1.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn forward_is_pure(seed in 0u64..1000, mask_seed in 0u64..1000, x in prop::collection::vec(-3.0f64..3.0, 7)) {
        let spec = NetworkSpec::combo(3, 2, 4, 5, 0.7);
        let w = init_weights(&spec, seed, &params());
        let masks = sample_masks(&spec, mask_seed);
        let a = forward(&spec, &w, &x, Some(&masks), &params()).unwrap();
        let b = forward(&spec, &w, &x, Some(&masks), &params()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn masks_are_deterministic_and_shaped(seed in any::<u64>(), keep in 0.05f64..1.0) {
        let spec = NetworkSpec::combo(3, 2, 7, 9, keep);
        let m = sample_masks(&spec, seed);
        prop_assert!(m.check_against(&spec).is_ok());
        prop_assert_eq!(&m, &sample_masks(&spec, seed));
        prop_assert!(m.masks.last().unwrap().iter().all(|&on| on));
    }

    #[test]
    fn distinct_seeds_give_distinct_wide_masks(a in 0u64..1_000_000, offset in 1u64..1_000_000) {
        let spec = NetworkSpec::mlp(2, &[512], 1, 0.5);
        let set: HashSet<_> = [sample_masks(&spec, a), sample_masks(&spec, a + offset)].into_iter().collect();
        prop_assert_eq!(set.len(), 2);
    }
}
