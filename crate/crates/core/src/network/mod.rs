//! Rate-based (analog) feedforward networks: architecture, parameters,
//! forward passes with optional dropout masks, and mask sampling.
//!
//! A network is a set of encoder towers, each fed by named slices of the
//! input vector, whose outputs are concatenated and passed through a dense
//! head. Towers with the same share tag reuse one parameter set, so one
//! drug encoder can process both drugs of a pair.

mod spec;
mod weights;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use self::spec::{
    validate, Activation, EncoderSpec, InputSlice, LayerSite, LayerSpec, NetworkSpec, SiteGroup,
};
pub use self::weights::{init_weights, LayerParams, Matrix, WeightStore};

use crate::error::{Error, Result};
use crate::neuron::{softlif_rate, softlif_rate_grad, NeuronParams};
use crate::scalar::Scalar;

/// A trained or initialised rate network together with its neuron constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogNetwork<S: Scalar> {
    pub spec: NetworkSpec,
    pub neuron_params: NeuronParams<S>,
    pub weights: WeightStore<S>,
}

impl<S: Scalar> AnalogNetwork<S> {
    pub fn new(spec: NetworkSpec, neuron_params: NeuronParams<S>, weights: WeightStore<S>) -> Result<Self> {
        validate(&spec)?;
        neuron_params.validate()?;
        weights.check_against(&spec)?;
        Ok(Self {
            spec,
            neuron_params,
            weights,
        })
    }

    pub fn forward(&self, input: &[S], masks: Option<&DropMasks>) -> Result<ForwardPass<S>> {
        forward(&self.spec, &self.weights, input, masks, &self.neuron_params)
    }

    /// Copy with every layer's keep probability set to one.
    pub fn without_dropout(&self) -> Self {
        let mut out = self.clone();
        out.spec = spec_without_dropout(&self.spec);
        out
    }
}

/// `spec` with every keep probability set to one.
pub fn spec_without_dropout(spec: &NetworkSpec) -> NetworkSpec {
    let mut spec = spec.clone();
    for layer in spec
        .encoders
        .iter_mut()
        .flat_map(|e| e.layers.iter_mut())
        .chain(spec.head.iter_mut())
    {
        layer.keep_prob = 1.0;
    }
    spec
}

/// Per-site binary activity vectors, in [`NetworkSpec::sites`] order.
/// `true` means the neuron is active for this draw.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DropMasks {
    pub masks: Vec<Vec<bool>>,
}

impl DropMasks {
    pub fn all_active(spec: &NetworkSpec) -> Self {
        Self {
            masks: spec.sites().iter().map(|s| vec![true; s.layer.out_dim]).collect(),
        }
    }

    pub fn check_against(&self, spec: &NetworkSpec) -> Result<()> {
        let sites = spec.sites();
        if sites.len() != self.masks.len() {
            return Err(Error::Dimension(format!(
                "{} masks for {} layers",
                self.masks.len(),
                sites.len()
            )));
        }
        for (site, mask) in sites.iter().zip(&self.masks) {
            if mask.len() != site.layer.out_dim {
                return Err(Error::Dimension(format!(
                    "mask for {} has length {}, layer width is {}",
                    site.name,
                    mask.len(),
                    site.layer.out_dim
                )));
            }
        }
        Ok(())
    }

    pub fn active_count(&self) -> usize {
        self.masks.iter().flatten().filter(|&&m| m).count()
    }
}

/// Draws one independent Bernoulli(keep_prob) mask per layer.
///
/// Layers with keep probability one get all-ones masks and consume no
/// randomness.
pub fn sample_masks(spec: &NetworkSpec, seed: u64) -> DropMasks {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let masks = spec
        .sites()
        .iter()
        .map(|site| {
            let keep = site.layer.keep_prob;
            if keep >= 1.0 {
                vec![true; site.layer.out_dim]
            } else {
                (0..site.layer.out_dim).map(|_| rng.gen_bool(keep)).collect()
            }
        })
        .collect();
    DropMasks { masks }
}

/// Values cached for one layer evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteCache<S> {
    pub input: Vec<S>,
    pub current: Vec<S>,
    /// Post-activation, post-mask output.
    pub activation: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass<S> {
    pub output: Vec<S>,
    pub sites: Vec<SiteCache<S>>,
}

pub(crate) fn activate<S: Scalar>(activation: Activation, current: S, params: &NeuronParams<S>) -> S {
    match activation {
        Activation::SoftLif => params.amplitude * softlif_rate(current, params),
        Activation::Linear => current,
        Activation::Relu => current.max(S::zero()),
    }
}

pub(crate) fn activate_grad<S: Scalar>(activation: Activation, current: S, params: &NeuronParams<S>) -> S {
    match activation {
        Activation::SoftLif => params.amplitude * softlif_rate_grad(current, params),
        Activation::Linear => S::one(),
        Activation::Relu => {
            if current > S::zero() {
                S::one()
            } else {
                S::zero()
            }
        }
    }
}

/// Multiplier applied to an active neuron's output (inverted dropout).
pub(crate) fn keep_scale<S: Scalar>(keep_prob: f64) -> S {
    S::lit(1.0 / keep_prob)
}

/// Builds the input vector of every site given what has been computed so far.
pub(crate) struct SiteInputs {
    sites: Vec<LayerSite>,
    /// For encoder-first sites: indices into the network input.
    gather: Vec<Option<Vec<usize>>>,
    /// For the first head site: sites whose outputs are concatenated.
    head_sources: Vec<usize>,
    first_head: usize,
}

impl SiteInputs {
    pub(crate) fn new(spec: &NetworkSpec) -> Self {
        let sites = spec.sites();
        let mut gather = vec![None; sites.len()];
        let mut head_sources = Vec::new();
        let mut k = 0;
        for (e, enc) in spec.encoders.iter().enumerate() {
            gather[k] = Some(spec.encoder_input_indices(e));
            k += enc.layers.len();
            head_sources.push(k - 1);
        }
        if spec.encoders.is_empty() {
            gather[k] = Some((0..spec.input_dim()).collect());
        }
        Self {
            sites,
            gather,
            head_sources,
            first_head: k,
        }
    }

    pub(crate) fn sites(&self) -> &[LayerSite] {
        &self.sites
    }

    /// Input of site `k`, built from the network input and previous outputs.
    pub(crate) fn input_for<S: Scalar>(&self, k: usize, input: &[S], outputs: &[Vec<S>]) -> Vec<S> {
        if let Some(idx) = &self.gather[k] {
            idx.iter().map(|&i| input[i]).collect()
        } else if k == self.first_head {
            self.head_sources
                .iter()
                .flat_map(|&s| outputs[s].iter().copied())
                .collect()
        } else {
            outputs[k - 1].clone()
        }
    }

    /// Where the gradient of site `k`'s input flows: either straight to the
    /// previous site, or split across the encoder outputs, or nowhere.
    pub(crate) fn input_routes(&self, k: usize) -> InputRoute<'_> {
        if self.gather[k].is_some() {
            InputRoute::Network
        } else if k == self.first_head {
            InputRoute::Concat(&self.head_sources)
        } else {
            InputRoute::Previous(k - 1)
        }
    }
}

pub(crate) enum InputRoute<'a> {
    Network,
    Previous(usize),
    Concat(&'a [usize]),
}

/// Evaluates the rate network on one input vector.
///
/// Each layer computes `current = W a + b`, applies its activation and,
/// when `masks` is given, zeroes dropped neurons and divides survivors by the
/// layer's keep probability.
pub fn forward<S: Scalar>(
    spec: &NetworkSpec,
    weights: &WeightStore<S>,
    input: &[S],
    masks: Option<&DropMasks>,
    params: &NeuronParams<S>,
) -> Result<ForwardPass<S>> {
    if input.len() != spec.input_dim() {
        return Err(Error::Dimension(format!(
            "input has length {}, network expects {}",
            input.len(),
            spec.input_dim()
        )));
    }
    if let Some(m) = masks {
        m.check_against(spec)?;
    }
    let routes = SiteInputs::new(spec);
    let mut outputs: Vec<Vec<S>> = Vec::with_capacity(routes.sites().len());
    let mut caches = Vec::with_capacity(routes.sites().len());
    for (k, site) in routes.sites().iter().enumerate() {
        let layer_in = routes.input_for(k, input, &outputs);
        let p = weights.layer(&site.param_key)?;
        if p.weight.shape() != (site.layer.out_dim, layer_in.len()) {
            return Err(Error::Dimension(format!(
                "weights for {} are {:?}, layer needs ({}, {})",
                site.name,
                p.weight.shape(),
                site.layer.out_dim,
                layer_in.len()
            )));
        }
        let current = p.weight.affine(&layer_in, &p.bias);
        let mut activation: Vec<S> = current
            .iter()
            .map(|&c| activate(site.layer.activation, c, params))
            .collect();
        if let Some(m) = masks {
            let scale: S = keep_scale(site.layer.keep_prob);
            for (a, &on) in activation.iter_mut().zip(&m.masks[k]) {
                *a = if on { *a * scale } else { S::zero() };
            }
        }
        outputs.push(activation.clone());
        caches.push(SiteCache {
            input: layer_in,
            current,
            activation,
        });
    }
    Ok(ForwardPass {
        output: outputs.pop().unwrap_or_default(),
        sites: caches,
    })
}
