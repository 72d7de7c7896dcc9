//! Approximate Bayesian inference with Monte-Carlo dropout on spiking
//! networks.
//!
//! The pipeline: train a feedforward regression network whose hidden units
//! use the SoftLIF rate function ([`training`]), copy its weights into a
//! network of leaky integrate-and-fire neurons ([`convert`]), then build
//! predictive distributions by repeatedly sampling dropout masks and
//! evaluating either network ([`mcinfer`], [`snn`]). [`stats`] checks that
//! the two predictive distributions agree.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the usual double-precision instantiation.

pub mod convert;
pub mod data;
pub mod error;
pub mod mcinfer;
pub mod model;
pub mod network;
pub mod neuron;
pub mod scalar;
pub mod snn;
pub mod stats;
pub mod training;

pub use error::{Error, Result, SpecError};
pub use scalar::Scalar;

pub type NeuronParams64 = neuron::NeuronParams<f64>;
pub type WeightStore64 = network::WeightStore<f64>;
pub type AnalogNetwork64 = network::AnalogNetwork<f64>;
pub type SpikingNetwork64 = convert::SpikingNetwork<f64>;
pub type SimConfig64 = snn::SimConfig<f64>;
pub type Dataset64 = data::Dataset<f64>;
pub type ModelFile64 = model::ModelFile<f64>;

pub type NeuronParams32 = neuron::NeuronParams<f32>;
pub type AnalogNetwork32 = network::AnalogNetwork<f32>;
pub type SpikingNetwork32 = convert::SpikingNetwork<f32>;
pub type SimConfig32 = snn::SimConfig<f32>;
