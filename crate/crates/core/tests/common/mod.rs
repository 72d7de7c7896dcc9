#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spikedrop::data::{standardize, synth_combo, train_test_split, SynthConfig};
use spikedrop::network::{forward, init_weights, sample_masks, DropMasks, NetworkSpec, WeightStore};
use spikedrop::neuron::NeuronParams;
use spikedrop::training::{backward, loss_mse, train, TrainConfig};
use spikedrop::{AnalogNetwork64, Dataset64};

/// Largest relative disagreement between analytic and central-difference
/// gradients of the single-example squared error.
pub fn gradient_check(
    spec: &NetworkSpec,
    weights: &WeightStore<f64>,
    input: &[f64],
    target: f64,
    masks: Option<&DropMasks>,
    params: &NeuronParams<f64>,
    h: f64,
) -> f64 {
    let loss = |w: &WeightStore<f64>| {
        let out = forward(spec, w, input, masks, params).unwrap().output;
        loss_mse(&out, &[target]).unwrap()
    };
    let pass = forward(spec, weights, input, masks, params).unwrap();
    let grads = backward(spec, weights, &pass, masks, &[target], params).unwrap();
    let mut worst: f64 = 0.0;
    for (key, layer) in &weights.layers {
        let n_w = layer.weight.as_slice().len();
        for idx in 0..n_w + layer.bias.len() {
            let bump = |delta: f64| {
                let mut w = weights.clone();
                let l = w.layers.get_mut(key).unwrap();
                if idx < n_w {
                    l.weight.as_mut_slice()[idx] += delta;
                } else {
                    l.bias[idx - n_w] += delta;
                }
                loss(&w)
            };
            let numeric = (bump(h) - bump(-h)) / (2.0 * h);
            let g = &grads.layers[key];
            let analytic = if idx < n_w { g.weight.as_slice()[idx] } else { g.bias[idx - n_w] };
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-8 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    worst
}

/// One seeded 3-4-1 gradient-check configuration: random weights, input,
/// target and (for odd seeds) a dropout mask.
pub fn tiny_gradient_case(seed: u64) -> f64 {
    let params = NeuronParams::default();
    let keep = if seed % 2 == 1 { 0.7 } else { 1.0 };
    let spec = NetworkSpec::mlp(3, &[4], 1, keep);
    let weights = init_weights(&spec, seed, &params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let target = rng.gen_range(-2.0..2.0);
    let masks = sample_masks(&spec, seed);
    gradient_check(&spec, &weights, &input, target, Some(&masks), &params, 1e-5)
}

/// The trained desk-scale two-drug model and its standardised test split.
pub struct DeskModel {
    pub model: AnalogNetwork64,
    pub test: Dataset64,
    pub test_mse: f64,
}

/// Output gain that brings hidden activations to order one.
pub const DESK_AMPLITUDE: f64 = 0.003;

pub fn desk_spec() -> NetworkSpec {
    NetworkSpec::combo(8, 8, 16, 32, 0.8)
}

pub fn desk_model() -> DeskModel {
    let data: Dataset64 = synth_combo(&SynthConfig::default()).unwrap();
    let (train_raw, test_raw) = train_test_split(&data, 0.2, 0);
    let (train_set, others, _) = standardize(&train_raw, &[&test_raw]).unwrap();
    let test = others.into_iter().next().unwrap();
    let spec = desk_spec();
    let params = NeuronParams::default().with_amplitude(DESK_AMPLITUDE);
    let outcome = train(&spec, &train_set, Some(&test), &TrainConfig::default(), &params).unwrap();
    let test_mse = outcome.history.last().unwrap().test_mse.unwrap();
    DeskModel {
        model: AnalogNetwork64::new(spec, params, outcome.weights).unwrap(),
        test,
        test_mse,
    }
}

/// A 2-4-1 network with hand-set weights and dropout on its four hidden
/// neurons, plus the observation it is probed at.
pub fn four_neuron_net(keep: f64) -> (AnalogNetwork64, Vec<f64>) {
    let params = NeuronParams::default();
    let spec = NetworkSpec::mlp(2, &[4], 1, keep);
    let mut w = WeightStore::zeros(&spec);
    let hidden = w.layers.get_mut("head.0").unwrap();
    for (i, row) in [[1.0, 0.5], [-0.5, 1.5], [0.8, -0.3], [0.2, 0.9]].iter().enumerate() {
        hidden.weight.row_mut(i).copy_from_slice(row);
        hidden.bias[i] = 1.0;
    }
    let out = w.layers.get_mut("head.1").unwrap();
    out.weight.row_mut(0).copy_from_slice(&[0.01, -0.02, 0.015, 0.005]);
    out.bias[0] = 0.3;
    (AnalogNetwork64::new(spec, params, w).unwrap(), vec![0.6, 0.4])
}

/// Expected masked output of [`four_neuron_net`] by enumerating all 16
/// hidden masks with their Bernoulli weights.
pub fn exhaustive_mask_mean(model: &AnalogNetwork64, x: &[f64], keep: f64) -> f64 {
    let mut expected = 0.0;
    for bits in 0..16u32 {
        let mut masks = DropMasks::all_active(&model.spec);
        let mut prob = 1.0;
        for i in 0..4 {
            let on = bits >> i & 1 == 1;
            masks.masks[0][i] = on;
            prob *= if on { keep } else { 1.0 - keep };
        }
        expected += prob * model.forward(x, Some(&masks)).unwrap().output[0];
    }
    expected
}
