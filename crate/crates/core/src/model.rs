//! JSON model files shared by the analog and spiking networks.
//!
//! ```json
//! {
//!   "format": "spikedrop-model",
//!   "version": 1,
//!   "kind": "analog",
//!   "spec": { ... NetworkSpec ... },
//!   "neuron_params": { "tau_ref": 0.002, "tau_rc": 0.02, "v_th": 1.0, "gamma": 0.02, "amplitude": 1.0 },
//!   "weights": { "layers": { "<param key>": { "weight": [[...], ...], "bias": [...] } } },
//!   "input_scaler": { "mean": [...], "scale": [...] }
//! }
//! ```
//!
//! `input_scaler` is optional; when present, raw feature rows are
//! standardised with it before entering the network.
//!
//! Numbers are written in shortest round-trip form, so `load(save(x))`
//! reproduces every value exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::convert::SpikingNetwork;
use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::network::{validate, AnalogNetwork, NetworkSpec, WeightStore};
use crate::neuron::NeuronParams;
use crate::scalar::Scalar;

pub const FORMAT_TAG: &str = "spikedrop-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Analog,
    Spiking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile<S: Scalar> {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub spec: NetworkSpec,
    pub neuron_params: NeuronParams<S>,
    pub weights: WeightStore<S>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_scaler: Option<Scaler<S>>,
}

impl<S: Scalar> ModelFile<S> {
    pub fn analog(net: &AnalogNetwork<S>) -> Self {
        Self {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            kind: ModelKind::Analog,
            spec: net.spec.clone(),
            neuron_params: net.neuron_params,
            weights: net.weights.clone(),
            input_scaler: None,
        }
    }

    pub fn with_scaler(self, scaler: Scaler<S>) -> Self {
        Self {
            input_scaler: Some(scaler),
            ..self
        }
    }

    pub fn spiking(net: &SpikingNetwork<S>) -> Self {
        Self {
            kind: ModelKind::Spiking,
            ..Self::analog(&net.to_analog())
        }
    }

    /// The stored network as a rate network, whatever its kind.
    pub fn into_analog(self) -> Result<AnalogNetwork<S>> {
        AnalogNetwork::new(self.spec, self.neuron_params, self.weights)
    }
}

impl<S: Scalar + Serialize + DeserializeOwned> ModelFile<S> {

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let file: Self = serde_json::from_reader(input)?;
        if file.format != FORMAT_TAG {
            return Err(Error::Format(format!("not a model file (format tag {:?})", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", file.version)));
        }
        validate(&file.spec)?;
        file.neuron_params.validate()?;
        file.weights.check_against(&file.spec)?;
        if let Some(sc) = &file.input_scaler {
            let n = file.spec.input_dim();
            if sc.mean.len() != n || sc.scale.len() != n {
                return Err(Error::Format(format!("input scaler does not cover {n} features")));
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
