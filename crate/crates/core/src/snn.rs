//! Clock-driven simulation of a converted network under one fixed dropout
//! mask.
//!
//! Inputs are injected as constant currents. Each SoftLIF layer is a
//! population of LIF neurons whose spikes (impulses of area `1/dt`, so rates
//! come out in Hz) pass through a first-order lowpass before feeding the next
//! layer, scaled by the neuron amplitude as in the rate network. Linear layers are evaluated as affine maps every tick; the last
//! one is the output potential recorded in the trace.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convert::SpikingNetwork;
use crate::error::{Error, Result};
use crate::network::{keep_scale, Activation, DropMasks, InputRoute, SiteInputs};
use crate::neuron::{lif_step, LifState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<S> {
    /// Seconds per tick.
    pub dt: S,
    pub n_steps: usize,
    /// Leading ticks excluded from the summary mean.
    pub burn_in_steps: usize,
    /// Synaptic lowpass time constant in seconds; 0 passes spikes through.
    pub tau_syn: S,
    /// Seed for initial membrane voltages, drawn uniformly in `[0, v_th)`.
    /// 0 starts every neuron at rest.
    pub init_seed: u64,
}

impl<S: Scalar> Default for SimConfig<S> {
    fn default() -> Self {
        Self {
            dt: S::lit(0.001),
            n_steps: 1000,
            burn_in_steps: 200,
            tau_syn: S::lit(0.005),
            init_seed: 1,
        }
    }
}

impl<S: Scalar> SimConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > S::zero() && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if self.burn_in_steps >= self.n_steps {
            return Err(Error::BurnIn {
                burn_in: self.burn_in_steps,
                len: self.n_steps,
            });
        }
        if !(self.tau_syn >= S::zero() && self.tau_syn.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau_syn = {} must be >= 0", self.tau_syn)));
        }
        Ok(())
    }
}

/// Output potential per tick.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputTrace<S> {
    pub dt: S,
    /// `values[tick][output]`.
    pub values: Vec<Vec<S>>,
}

impl<S: Scalar> OutputTrace<S> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First output component over time.
    pub fn first_output(&self) -> Vec<S> {
        self.values.iter().map(|v| v[0]).collect()
    }
}

/// Everything recorded during one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun<S> {
    pub trace: OutputTrace<S>,
    /// Spikes per neuron over the whole run (empty rows for linear layers).
    pub spike_counts: Vec<Vec<usize>>,
    /// Time-averaged filtered rate per neuron after burn-in, before dropout
    /// scaling (empty rows for linear layers).
    pub mean_rates: Vec<Vec<S>>,
}

/// Runs one simulation and returns the output trace.
pub fn simulate<S: Scalar>(
    net: &SpikingNetwork<S>,
    input: &[S],
    masks: &DropMasks,
    sim: &SimConfig<S>,
) -> Result<OutputTrace<S>> {
    Ok(simulate_detailed(net, input, masks, sim)?.trace)
}

struct Population<S> {
    states: Vec<LifState<S>>,
    filtered: Vec<S>,
    spikes: Vec<usize>,
    rate_sums: Vec<S>,
}

/// As [`simulate`], also returning per-neuron spike counts and mean rates.
pub fn simulate_detailed<S: Scalar>(
    net: &SpikingNetwork<S>,
    input: &[S],
    masks: &DropMasks,
    sim: &SimConfig<S>,
) -> Result<SimulationRun<S>> {
    sim.validate()?;
    let spec = &net.spec;
    let params = &net.neuron_params;
    if input.len() != spec.input_dim() {
        return Err(Error::Dimension(format!(
            "input has length {}, network expects {}",
            input.len(),
            spec.input_dim()
        )));
    }
    masks.check_against(spec)?;
    let routes = SiteInputs::new(spec);
    let sites = routes.sites();

    let mut layer_params = Vec::with_capacity(sites.len());
    for site in sites {
        if !matches!(site.layer.activation, Activation::SoftLif | Activation::Linear) {
            return Err(Error::UnsupportedActivation(site.layer.activation.name().into()));
        }
        let p = net.weights.layer(&site.param_key)?;
        if p.weight.shape() != (site.layer.out_dim, site.layer.in_dim) {
            return Err(Error::Dimension(format!("weights for {} have shape {:?}", site.name, p.weight.shape())));
        }
        layer_params.push(p);
    }

    // Layers reading the network input see a constant current.
    let constant_current: Vec<Option<Vec<S>>> = (0..sites.len())
        .map(|k| match routes.input_routes(k) {
            InputRoute::Network => {
                let x = routes.input_for(k, input, &[]);
                Some(layer_params[k].weight.affine(&x, &layer_params[k].bias))
            }
            _ => None,
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(sim.init_seed);
    let mut pops: Vec<Population<S>> = sites
        .iter()
        .map(|site| {
            let n = if site.layer.activation == Activation::SoftLif {
                site.layer.out_dim
            } else {
                0
            };
            let states = (0..n)
                .map(|_| LifState {
                    voltage: if sim.init_seed == 0 {
                        S::zero()
                    } else {
                        S::lit(rng.gen::<f64>()) * params.v_th
                    },
                    refractory_remaining: S::zero(),
                })
                .collect();
            Population {
                states,
                filtered: vec![S::zero(); n],
                spikes: vec![0; n],
                rate_sums: vec![S::zero(); n],
            }
        })
        .collect();

    let dt = sim.dt;
    let impulse = dt.recip();
    let alpha = if sim.tau_syn == S::zero() {
        S::one()
    } else {
        (dt / sim.tau_syn).min(S::one())
    };
    let scales: Vec<S> = sites.iter().map(|s| keep_scale(s.layer.keep_prob)).collect();

    let mut outputs: Vec<Vec<S>> = sites.iter().map(|s| vec![S::zero(); s.layer.out_dim]).collect();
    let mut values = Vec::with_capacity(sim.n_steps);
    for tick in 0..sim.n_steps {
        let counting = tick >= sim.burn_in_steps;
        for k in 0..sites.len() {
            let current = match &constant_current[k] {
                Some(c) => c.clone(),
                None => {
                    let x = routes.input_for(k, input, &outputs);
                    layer_params[k].weight.affine(&x, &layer_params[k].bias)
                }
            };
            let mask = &masks.masks[k];
            let scale = scales[k];
            let gain = scale * params.amplitude;
            let out = &mut outputs[k];
            match sites[k].layer.activation {
                Activation::SoftLif => {
                    let pop = &mut pops[k];
                    for i in 0..out.len() {
                        if !mask[i] {
                            out[i] = S::zero();
                            continue;
                        }
                        let (state, spiked) = lif_step(pop.states[i], current[i], dt, params);
                        pop.states[i] = state;
                        let drive = if spiked {
                            pop.spikes[i] += 1;
                            impulse
                        } else {
                            S::zero()
                        };
                        let f = pop.filtered[i];
                        pop.filtered[i] = f + alpha * (drive - f);
                        if counting {
                            pop.rate_sums[i] += pop.filtered[i];
                        }
                        out[i] = pop.filtered[i] * gain;
                    }
                }
                _ => {
                    for i in 0..out.len() {
                        out[i] = if mask[i] { current[i] * scale } else { S::zero() };
                    }
                }
            }
        }
        values.push(outputs.last().cloned().unwrap_or_default());
    }

    let counted = S::lit((sim.n_steps - sim.burn_in_steps) as f64);
    Ok(SimulationRun {
        trace: OutputTrace { dt, values },
        spike_counts: pops.iter().map(|p| p.spikes.clone()).collect(),
        mean_rates: pops
            .iter()
            .map(|p| p.rate_sums.iter().map(|&r| r / counted).collect())
            .collect(),
    })
}

/// Mean output potential over the ticks after the burn-in window, one value
/// per output.
pub fn summarize_trace<S: Scalar>(trace: &OutputTrace<S>, burn_in_steps: usize) -> Result<Vec<S>> {
    if burn_in_steps >= trace.len() {
        return Err(Error::BurnIn {
            burn_in: burn_in_steps,
            len: trace.len(),
        });
    }
    let kept = &trace.values[burn_in_steps..];
    let width = kept[0].len();
    let n = S::lit(kept.len() as f64);
    Ok((0..width)
        .map(|j| kept.iter().map(|v| v[j]).sum::<S>() / n)
        .collect())
}

/// Writes `tick,time_s,output_potential` rows, preceded by `# key=value`
/// comment lines. Multi-output traces get one `output_potential_<j>` column
/// per output.
pub fn write_trace<S: Scalar, W: Write>(trace: &OutputTrace<S>, header: &[(String, String)], mut out: W) -> Result<()> {
    for (k, v) in header {
        writeln!(out, "# {k}={v}")?;
    }
    let width = trace.values.first().map_or(1, Vec::len);
    if width == 1 {
        writeln!(out, "tick,time_s,output_potential")?;
    } else {
        let cols: Vec<String> = (0..width).map(|j| format!("output_potential_{j}")).collect();
        writeln!(out, "tick,time_s,{}", cols.join(","))?;
    }
    let dt = trace.dt.as_f64();
    for (tick, v) in trace.values.iter().enumerate() {
        let cells: Vec<String> = v.iter().map(|x| x.as_f64().to_string()).collect();
        writeln!(out, "{tick},{},{}", (tick + 1) as f64 * dt, cells.join(","))?;
    }
    Ok(())
}
