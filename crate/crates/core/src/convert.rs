//! Rate-to-spike conversion: the trained SoftLIF network is reused as-is,
//! with every SoftLIF layer becoming a population of LIF neurons and every
//! linear layer an affine readout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Activation, AnalogNetwork, NetworkSpec, WeightStore};
use crate::neuron::NeuronParams;
use crate::scalar::Scalar;

/// Spiking counterpart of an [`AnalogNetwork`]. `neuron_params.gamma` is
/// carried along but unused: the simulated neurons have a hard threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikingNetwork<S: Scalar> {
    pub spec: NetworkSpec,
    pub neuron_params: NeuronParams<S>,
    pub weights: WeightStore<S>,
}

/// Transfers structure and weights unchanged.
pub fn convert<S: Scalar>(analog: &AnalogNetwork<S>) -> Result<SpikingNetwork<S>> {
    for site in analog.spec.sites() {
        match site.layer.activation {
            Activation::SoftLif | Activation::Linear => {}
            other => return Err(Error::UnsupportedActivation(format!("{} ({})", other.name(), site.name))),
        }
    }
    Ok(SpikingNetwork {
        spec: analog.spec.clone(),
        neuron_params: analog.neuron_params,
        weights: analog.weights.clone(),
    })
}

impl<S: Scalar> SpikingNetwork<S> {
    /// The rate network this spiking network was converted from.
    pub fn to_analog(&self) -> AnalogNetwork<S> {
        AnalogNetwork {
            spec: self.spec.clone(),
            neuron_params: self.neuron_params,
            weights: self.weights.clone(),
        }
    }
}
