use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::SpecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// SoftLIF rate function; becomes a population of LIF neurons on conversion.
    SoftLif,
    /// Identity; stays an affine map on conversion.
    Linear,
    /// Plain rectifier. Trainable, but has no spiking counterpart.
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::SoftLif => "softlif",
            Activation::Linear => "linear",
            Activation::Relu => "relu",
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    /// Probability that a neuron of this layer stays active under dropout.
    #[serde(default = "one")]
    pub keep_prob: f64,
    /// Layers with the same tag share one weight matrix and bias.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share_tag: Option<String>,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
            keep_prob: 1.0,
            share_tag: None,
        }
    }

    pub fn softlif(in_dim: usize, out_dim: usize) -> Self {
        Self::new(in_dim, out_dim, Activation::SoftLif)
    }

    pub fn linear(in_dim: usize, out_dim: usize) -> Self {
        Self::new(in_dim, out_dim, Activation::Linear)
    }

    pub fn keep(mut self, keep_prob: f64) -> Self {
        self.keep_prob = keep_prob;
        self
    }

    pub fn shared(mut self, tag: impl Into<String>) -> Self {
        self.share_tag = Some(tag.into());
        self
    }
}

/// Named contiguous range of the input vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSlice {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

impl InputSlice {
    pub fn new(name: impl Into<String>, offset: usize, len: usize) -> Self {
        Self {
            name: name.into(),
            offset,
            len,
        }
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// A tower of layers fed by the concatenation of one or more input slices.
///
/// Encoders carrying the same `share_tag` reuse a single parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub slices: Vec<String>,
    pub layers: Vec<LayerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub share_tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_slices: Vec<InputSlice>,
    #[serde(default)]
    pub encoders: Vec<EncoderSpec>,
    /// Applied to the concatenated encoder outputs, or to the raw input
    /// when there are no encoders.
    pub head: Vec<LayerSpec>,
    pub output_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteGroup {
    Encoder(usize),
    Head,
}

/// One evaluated layer of the network. Shared parameter sets appear as
/// several sites with the same `param_key`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSite {
    pub name: String,
    pub param_key: String,
    pub group: SiteGroup,
    pub layer: LayerSpec,
}

impl NetworkSpec {
    /// Plain multilayer perceptron: SoftLIF hidden layers with dropout,
    /// linear output.
    pub fn mlp(input_dim: usize, hidden: &[usize], output_dim: usize, keep_prob: f64) -> Self {
        let mut head = Vec::with_capacity(hidden.len() + 1);
        let mut prev = input_dim;
        for &width in hidden {
            head.push(LayerSpec::softlif(prev, width).keep(keep_prob));
            prev = width;
        }
        head.push(LayerSpec::linear(prev, output_dim));
        Self {
            input_slices: vec![InputSlice::new("x", 0, input_dim)],
            encoders: Vec::new(),
            head,
            output_dim,
        }
    }

    /// Two-drug layout: a cell-line encoder plus one drug encoder applied
    /// with shared weights to both drug slices, followed by a dense head.
    pub fn combo(
        cell_dim: usize,
        drug_dim: usize,
        encoder_width: usize,
        head_width: usize,
        keep_prob: f64,
    ) -> Self {
        let encoder = |slice: &str, in_dim: usize, tag: Option<&str>| EncoderSpec {
            slices: vec![slice.to_string()],
            layers: vec![LayerSpec::softlif(in_dim, encoder_width).keep(keep_prob)],
            share_tag: tag.map(str::to_string),
        };
        Self {
            input_slices: vec![
                InputSlice::new("cell", 0, cell_dim),
                InputSlice::new("drug_a", cell_dim, drug_dim),
                InputSlice::new("drug_b", cell_dim + drug_dim, drug_dim),
            ],
            encoders: vec![
                encoder("cell", cell_dim, None),
                encoder("drug_a", drug_dim, Some("drug")),
                encoder("drug_b", drug_dim, Some("drug")),
            ],
            head: vec![
                LayerSpec::softlif(3 * encoder_width, head_width).keep(keep_prob),
                LayerSpec::linear(head_width, 1),
            ],
            output_dim: 1,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_slices.iter().map(|s| s.len).sum()
    }

    /// Every layer evaluation in forward order: encoders first, then head.
    pub fn sites(&self) -> Vec<LayerSite> {
        let mut sites = Vec::new();
        for (e, enc) in self.encoders.iter().enumerate() {
            for (i, layer) in enc.layers.iter().enumerate() {
                let param_key = match (&layer.share_tag, &enc.share_tag) {
                    (Some(tag), _) => tag.clone(),
                    (None, Some(tag)) => format!("{tag}.{i}"),
                    (None, None) => format!("encoder{e}.{i}"),
                };
                sites.push(LayerSite {
                    name: format!("encoder{e}.{i}"),
                    param_key,
                    group: SiteGroup::Encoder(e),
                    layer: layer.clone(),
                });
            }
        }
        for (i, layer) in self.head.iter().enumerate() {
            sites.push(LayerSite {
                name: format!("head.{i}"),
                param_key: layer.share_tag.clone().unwrap_or_else(|| format!("head.{i}")),
                group: SiteGroup::Head,
                layer: layer.clone(),
            });
        }
        sites
    }

    /// Distinct parameter sets with their (out_dim, in_dim) shapes.
    pub fn param_shapes(&self) -> BTreeMap<String, (usize, usize)> {
        self.sites()
            .into_iter()
            .map(|s| (s.param_key, (s.layer.out_dim, s.layer.in_dim)))
            .collect()
    }

    /// Input-vector indices feeding encoder `e`, in concatenation order.
    pub(crate) fn encoder_input_indices(&self, e: usize) -> Vec<usize> {
        self.encoders[e]
            .slices
            .iter()
            .flat_map(|name| {
                self.input_slices
                    .iter()
                    .find(|s| &s.name == name)
                    .map(InputSlice::range)
                    .into_iter()
                    .flatten()
            })
            .collect()
    }
}

/// Checks every structural invariant of `spec`, reporting the first violation.
pub fn validate(spec: &NetworkSpec) -> Result<(), SpecError> {
    // slices: non-empty, unique, disjoint, covering [0, total)
    let mut names = HashSet::new();
    for s in &spec.input_slices {
        if s.len == 0 {
            return Err(SpecError::EmptySlice(s.name.clone()));
        }
        if !names.insert(s.name.as_str()) {
            return Err(SpecError::DuplicateSlice(s.name.clone()));
        }
    }
    let mut ordered: Vec<&InputSlice> = spec.input_slices.iter().collect();
    ordered.sort_by_key(|s| s.offset);
    let mut cursor = 0;
    for (k, s) in ordered.iter().enumerate() {
        if s.offset < cursor {
            return Err(SpecError::OverlappingSlices(
                ordered[k - 1].name.clone(),
                s.name.clone(),
            ));
        }
        if s.offset > cursor {
            return Err(SpecError::SliceGap(cursor));
        }
        cursor = s.offset + s.len;
    }

    let sites = spec.sites();
    for site in &sites {
        let l = &site.layer;
        if l.in_dim == 0 || l.out_dim == 0 {
            return Err(SpecError::ZeroDimension(site.name.clone()));
        }
        if !(l.keep_prob > 0.0 && l.keep_prob <= 1.0) {
            return Err(SpecError::KeepProbability {
                site: site.name.clone(),
                keep_prob: l.keep_prob,
            });
        }
    }

    let mut head_input = 0;
    for (e, enc) in spec.encoders.iter().enumerate() {
        if enc.layers.is_empty() {
            return Err(SpecError::EmptyEncoder(e));
        }
        let mut width = 0;
        for name in &enc.slices {
            match spec.input_slices.iter().find(|s| &s.name == name) {
                Some(s) => width += s.len,
                None => {
                    return Err(SpecError::UnknownSlice {
                        encoder: e,
                        slice: name.clone(),
                    })
                }
            }
        }
        for (i, layer) in enc.layers.iter().enumerate() {
            if layer.in_dim != width {
                return Err(SpecError::LayerChain {
                    site: format!("encoder{e}.{i}"),
                    expected: layer.in_dim,
                    actual: width,
                });
            }
            width = layer.out_dim;
        }
        head_input += width;
    }
    if spec.encoders.is_empty() {
        head_input = spec.input_dim();
    }

    let Some(first) = spec.head.first() else {
        return Err(SpecError::EmptyHead);
    };
    if first.in_dim != head_input {
        return Err(SpecError::HeadDimension {
            expected: first.in_dim,
            actual: head_input,
        });
    }
    for (i, pair) in spec.head.windows(2).enumerate() {
        if pair[1].in_dim != pair[0].out_dim {
            return Err(SpecError::LayerChain {
                site: format!("head.{}", i + 1),
                expected: pair[1].in_dim,
                actual: pair[0].out_dim,
            });
        }
    }
    let last = spec.head.last().expect("head checked non-empty");
    if last.out_dim != spec.output_dim {
        return Err(SpecError::OutputDimension {
            head: last.out_dim,
            declared: spec.output_dim,
        });
    }
    if last.keep_prob != 1.0 {
        return Err(SpecError::OutputDropout(last.keep_prob));
    }

    let mut shapes: BTreeMap<&str, &LayerSpec> = BTreeMap::new();
    for site in &sites {
        match shapes.get(site.param_key.as_str()) {
            Some(prev)
                if prev.in_dim != site.layer.in_dim
                    || prev.out_dim != site.layer.out_dim
                    || prev.activation != site.layer.activation =>
            {
                return Err(SpecError::SharedShapeConflict(site.param_key.clone()));
            }
            Some(_) => {}
            None => {
                shapes.insert(&site.param_key, &site.layer);
            }
        }
    }
    Ok(())
}
