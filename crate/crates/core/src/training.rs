//! Minibatch Adam training of SoftLIF rate networks with dropout, for
//! squared-error regression.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{
    activate_grad, forward, init_weights, keep_scale, sample_masks, validate, DropMasks, ForwardPass,
    InputRoute, NetworkSpec, SiteInputs, WeightStore,
};
use crate::neuron::NeuronParams;
use crate::scalar::Scalar;

/// Mean squared residual.
pub fn loss_mse<S: Scalar>(predictions: &[S], targets: &[S]) -> Result<S> {
    if predictions.len() != targets.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::EmptySample);
    }
    let sum: S = predictions
        .iter()
        .zip(targets)
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(sum / S::lit(predictions.len() as f64))
}

/// Gradient of `loss_mse(pass.output, targets)` with respect to every weight
/// and bias, for one example.
///
/// `pass` must come from [`forward`] with the same `weights` and `masks`.
/// Shared parameter sets accumulate the contributions of every tower that
/// uses them; a dropped neuron passes no gradient.
pub fn backward<S: Scalar>(
    spec: &NetworkSpec,
    weights: &WeightStore<S>,
    pass: &ForwardPass<S>,
    masks: Option<&DropMasks>,
    targets: &[S],
    params: &NeuronParams<S>,
) -> Result<WeightStore<S>> {
    let mut grads = WeightStore::zeros(spec);
    backward_into(spec, weights, pass, masks, targets, params, &mut grads)?;
    Ok(grads)
}

/// As [`backward`], adding into an existing gradient store.
pub fn backward_into<S: Scalar>(
    spec: &NetworkSpec,
    weights: &WeightStore<S>,
    pass: &ForwardPass<S>,
    masks: Option<&DropMasks>,
    targets: &[S],
    params: &NeuronParams<S>,
    grads: &mut WeightStore<S>,
) -> Result<()> {
    if targets.len() != pass.output.len() {
        return Err(Error::Dimension(format!(
            "{} targets for {} outputs",
            targets.len(),
            pass.output.len()
        )));
    }
    let routes = SiteInputs::new(spec);
    let sites = routes.sites();
    if pass.sites.len() != sites.len() {
        return Err(Error::Dimension("forward cache does not match network".into()));
    }
    if let Some(m) = masks {
        m.check_against(spec)?;
    }

    let n_out = S::lit(targets.len() as f64);
    let two = S::lit(2.0);
    let mut upstream: Vec<Option<Vec<S>>> = vec![None; sites.len()];
    upstream[sites.len() - 1] = Some(
        pass.output
            .iter()
            .zip(targets)
            .map(|(&y, &t)| two * (y - t) / n_out)
            .collect(),
    );

    for k in (0..sites.len()).rev() {
        let Some(d_act) = upstream[k].take() else {
            continue;
        };
        let site = &sites[k];
        let cache = &pass.sites[k];
        let scale: S = keep_scale(site.layer.keep_prob);
        let d_current: Vec<S> = d_act
            .iter()
            .zip(&cache.current)
            .enumerate()
            .map(|(i, (&g, &z))| {
                let gate = match masks {
                    Some(m) if m.masks[k][i] => scale,
                    Some(_) => S::zero(),
                    None => S::one(),
                };
                if gate == S::zero() {
                    S::zero()
                } else {
                    g * gate * activate_grad(site.layer.activation, z, params)
                }
            })
            .collect();

        let w = weights.layer(&site.param_key)?;
        let g = grads.layer_mut(&site.param_key)?;
        for (r, &dz) in d_current.iter().enumerate() {
            if dz == S::zero() {
                continue;
            }
            g.bias[r] += dz;
            for (gw, &x) in g.weight.row_mut(r).iter_mut().zip(&cache.input) {
                *gw += dz * x;
            }
        }

        match routes.input_routes(k) {
            InputRoute::Network => {}
            InputRoute::Previous(j) => {
                upstream[j] = Some(w.weight.transpose_mul(&d_current));
            }
            InputRoute::Concat(sources) => {
                let d_in = w.weight.transpose_mul(&d_current);
                let mut offset = 0;
                for &s in sources {
                    let len = pass.sites[s].activation.len();
                    upstream[s] = Some(d_in[offset..offset + len].to_vec());
                    offset += len;
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("learning_rate = {}", self.learning_rate)));
        }
        let (b1, b2) = self.adam_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::InvalidParameter(format!("adam betas ({b1}, {b2}) outside [0, 1)")));
        }
        if !(self.adam_eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("adam_eps = {}", self.adam_eps)));
        }
        Ok(())
    }
}

/// Adam optimiser state over a [`WeightStore`].
#[derive(Debug, Clone)]
pub struct Adam<S: Scalar> {
    lr: S,
    beta1: S,
    beta2: S,
    eps: S,
    step: i32,
    first: WeightStore<S>,
    second: WeightStore<S>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(spec: &NetworkSpec, cfg: &TrainConfig) -> Self {
        Self {
            lr: S::lit(cfg.learning_rate),
            beta1: S::lit(cfg.adam_betas.0),
            beta2: S::lit(cfg.adam_betas.1),
            eps: S::lit(cfg.adam_eps),
            step: 0,
            first: WeightStore::zeros(spec),
            second: WeightStore::zeros(spec),
        }
    }

    pub fn step(&mut self, weights: &mut WeightStore<S>, grads: &WeightStore<S>) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let one = S::one();
        self.first.zip_mut(grads, |m, g| *m = b1 * *m + (one - b1) * g);
        self.second.zip_mut(grads, |v, g| *v = b2 * *v + (one - b2) * g * g);
        let c1 = one - b1.powi(self.step);
        let c2 = one - b2.powi(self.step);
        let (lr, eps) = (self.lr, self.eps);
        for (key, layer) in weights.layers.iter_mut() {
            let m = &self.first.layers[key];
            let v = &self.second.layers[key];
            let params = layer.weight.as_mut_slice().iter_mut().chain(layer.bias.iter_mut());
            let moments = m
                .weight
                .as_slice()
                .iter()
                .chain(&m.bias)
                .zip(v.weight.as_slice().iter().chain(&v.bias));
            for (w, (&mk, &vk)) in params.zip(moments) {
                let m_hat = mk / c1;
                let v_hat = vk / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 0 is the untrained network.
    pub epoch: usize,
    /// Deterministic (dropout-free) MSE over the training set.
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S: Scalar> {
    pub weights: WeightStore<S>,
    pub history: Vec<EpochRecord>,
}

/// Deterministic-forward MSE over a whole dataset.
pub fn evaluate_mse<S: Scalar>(
    spec: &NetworkSpec,
    weights: &WeightStore<S>,
    data: &Dataset<S>,
    params: &NeuronParams<S>,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut total = 0.0;
    for (x, &t) in data.features.iter().zip(&data.targets) {
        let out = forward(spec, weights, x, None, params)?;
        total += loss_mse(&out.output, &[t])?.as_f64();
    }
    Ok(total / data.len() as f64)
}

fn mask_seed(seed: u64, step: u64) -> u64 {
    // splitmix64 of (seed, step)
    let mut z = seed ^ step.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One optimiser update on a minibatch; returns the minibatch loss.
pub fn train_step<S: Scalar>(
    spec: &NetworkSpec,
    weights: &mut WeightStore<S>,
    optimizer: &mut Adam<S>,
    batch: &[(&[S], S)],
    masks: Option<&DropMasks>,
    params: &NeuronParams<S>,
) -> Result<f64> {
    let mut grads = WeightStore::zeros(spec);
    let mut loss = 0.0;
    for &(x, t) in batch {
        let pass = forward(spec, weights, x, masks, params)?;
        loss += loss_mse(&pass.output, &[t])?.as_f64();
        backward_into(spec, weights, &pass, masks, &[t], params, &mut grads)?;
    }
    grads.scale(S::lit(1.0 / batch.len() as f64));
    optimizer.step(weights, &grads);
    Ok(loss / batch.len() as f64)
}

/// Trains `spec` from seeded initial weights.
///
/// Each minibatch gets a freshly sampled set of dropout masks. The run is a
/// deterministic function of its arguments.
pub fn train<S: Scalar>(
    spec: &NetworkSpec,
    train_set: &Dataset<S>,
    test_set: Option<&Dataset<S>>,
    cfg: &TrainConfig,
    params: &NeuronParams<S>,
) -> Result<TrainOutcome<S>> {
    let initial = init_weights(spec, cfg.seed, params);
    fit(spec, initial, train_set, test_set, cfg, params)
}

/// Continues training from `weights`.
pub fn fit<S: Scalar>(
    spec: &NetworkSpec,
    mut weights: WeightStore<S>,
    train_set: &Dataset<S>,
    test_set: Option<&Dataset<S>>,
    cfg: &TrainConfig,
    params: &NeuronParams<S>,
) -> Result<TrainOutcome<S>> {
    validate(spec)?;
    cfg.validate()?;
    params.validate()?;
    weights.check_against(spec)?;
    if train_set.is_empty() {
        return Err(Error::EmptySample);
    }
    if spec.output_dim != 1 {
        return Err(Error::Dimension(format!(
            "regression training needs one output, network has {}",
            spec.output_dim
        )));
    }
    let record = |epoch: usize, w: &WeightStore<S>| -> Result<EpochRecord> {
        Ok(EpochRecord {
            epoch,
            train_mse: evaluate_mse(spec, w, train_set, params)?,
            test_mse: test_set.map(|t| evaluate_mse(spec, w, t, params)).transpose()?,
        })
    };

    let mut optimizer = Adam::new(spec, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = vec![record(0, &weights)?];
    let mut step = 0u64;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&[S], S)> = chunk
                .iter()
                .map(|&i| (train_set.features[i].as_slice(), train_set.targets[i]))
                .collect();
            let masks = sample_masks(spec, mask_seed(cfg.seed, step));
            step += 1;
            let loss = train_step(spec, &mut weights, &mut optimizer, &batch, Some(&masks), params)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b, loss });
            }
        }
        let rec = record(epoch, &weights)?;
        if !rec.train_mse.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: 0,
                loss: rec.train_mse,
            });
        }
        history.push(rec);
    }
    Ok(TrainOutcome { weights, history })
}

/// Writes `epoch,train_mse,test_mse` rows; the test column is empty when no
/// test set was given.
pub fn write_history<W: Write>(history: &[EpochRecord], mut out: W) -> Result<()> {
    writeln!(out, "epoch,train_mse,test_mse")?;
    for r in history {
        match r.test_mse {
            Some(t) => writeln!(out, "{},{},{}", r.epoch, r.train_mse, t)?,
            None => writeln!(out, "{},{},", r.epoch, r.train_mse)?,
        }
    }
    Ok(())
}
