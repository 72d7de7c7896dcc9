//! Leaky integrate-and-fire neurons.
//!
//! Two views of the same neuron live here: the closed-form steady-state
//! firing rate under constant input current (hard-threshold LIF and its
//! smoothed SoftLIF variant used for training), and the discrete-time
//! membrane dynamics used by the spiking simulator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Below this argument `ln(1 + e^t)` is replaced by its asymptote `e^t`.
const SOFTPLUS_TAIL: f64 = -30.0;

/// LIF and SoftLIF constants. Times are in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams<S> {
    /// Absolute refractory period.
    pub tau_ref: S,
    /// Membrane time constant.
    pub tau_rc: S,
    /// Firing threshold.
    pub v_th: S,
    /// SoftLIF smoothing width; unused by the spiking simulator.
    pub gamma: S,
    /// Output gain of a network neuron: a layer emits `amplitude` times the
    /// firing rate in Hz, and each spike carries area `amplitude / dt`.
    pub amplitude: S,
}


impl<S: Scalar> Default for NeuronParams<S> {
    fn default() -> Self {
        Self {
            tau_ref: S::lit(0.002),
            tau_rc: S::lit(0.02),
            v_th: S::one(),
            gamma: S::lit(0.02),
            amplitude: S::one(),
        }
    }
}

impl<S: Scalar> NeuronParams<S> {
    pub fn with_gamma(self, gamma: S) -> Self {
        Self { gamma, ..self }
    }

    pub fn with_amplitude(self, amplitude: S) -> Self {
        Self { amplitude, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.tau_ref, self.tau_rc, self.v_th, self.gamma, self.amplitude]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("neuron parameters must be finite".into()));
        }
        if self.tau_ref < S::zero() {
            return Err(Error::InvalidParameter(format!("tau_ref = {} < 0", self.tau_ref)));
        }
        if self.tau_rc <= S::zero() {
            return Err(Error::InvalidParameter(format!("tau_rc = {} <= 0", self.tau_rc)));
        }
        if self.v_th <= S::zero() {
            return Err(Error::InvalidParameter(format!("v_th = {} <= 0", self.v_th)));
        }
        if self.gamma <= S::zero() {
            return Err(Error::InvalidParameter(format!("gamma = {} <= 0", self.gamma)));
        }
        if self.amplitude <= S::zero() {
            return Err(Error::InvalidParameter(format!("amplitude = {} <= 0", self.amplitude)));
        }
        Ok(())
    }
}

/// Steady-state firing rate (Hz) of a LIF neuron under constant `current`.
///
/// Zero at or below threshold.
pub fn lif_rate<S: Scalar>(current: S, params: &NeuronParams<S>) -> S {
    let excess = current - params.v_th;
    if excess <= S::zero() {
        return S::zero();
    }
    let denom = params.tau_ref + params.tau_rc * (params.v_th / excess).ln_1p();
    denom.recip()
}

/// `ln(1 + e^t)` without overflow.
fn softplus<S: Scalar>(t: S) -> S {
    if t > S::zero() {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `ln(ln(1 + e^t))`, finite for every finite `t`.
fn ln_softplus<S: Scalar>(t: S) -> S {
    if t < S::lit(SOFTPLUS_TAIL) {
        t
    } else {
        softplus(t).ln()
    }
}

/// Logistic function, evaluated on the stable branch for either sign.
fn logistic<S: Scalar>(t: S) -> S {
    if t >= S::zero() {
        (S::one() + (-t).exp()).recip()
    } else {
        let e = t.exp();
        e / (S::one() + e)
    }
}

/// Smoothed rectifier `gamma * ln(1 + e^(x / gamma))`.
///
/// Tends to `max(0, x)` as `gamma -> 0`.
pub fn softplus_gamma<S: Scalar>(x: S, gamma: S) -> S {
    gamma * softplus(x / gamma)
}

/// `ln(1 + v_th / softplus_gamma(current - v_th))` evaluated in log space so
/// that deep subthreshold currents give a large finite value instead of
/// an infinity.
fn log_term<S: Scalar>(current: S, params: &NeuronParams<S>) -> S {
    let t = (current - params.v_th) / params.gamma;
    let sigma = params.gamma * softplus(t);
    if sigma > S::zero() && (params.v_th / sigma).is_finite() {
        (params.v_th / sigma).ln_1p()
    } else {
        // sigma underflowed: ln(1 + v/sigma) = ln v - ln sigma + ln(1 + sigma/v)
        params.v_th.ln() - (params.gamma.ln() + ln_softplus(t))
    }
}

/// SoftLIF rate: the LIF rate with the rectifier replaced by
/// [`softplus_gamma`]. Strictly positive and smooth in `current`.
pub fn softlif_rate<S: Scalar>(current: S, params: &NeuronParams<S>) -> S {
    (params.tau_ref + params.tau_rc * log_term(current, params)).recip()
}

/// Analytic derivative of [`softlif_rate`] with respect to the current.
pub fn softlif_rate_grad<S: Scalar>(current: S, params: &NeuronParams<S>) -> S {
    let t = (current - params.v_th) / params.gamma;
    let rate = softlif_rate(current, params);
    // logistic(t) / softplus(t) tends to 1 in the far negative tail
    let ratio = if t < S::lit(SOFTPLUS_TAIL) {
        S::one()
    } else {
        logistic(t) / softplus(t)
    };
    let sigma = params.gamma * softplus(t);
    rate * rate * params.tau_rc * params.v_th * ratio / (params.gamma * (sigma + params.v_th))
}

/// Membrane state of one simulated neuron.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LifState<S> {
    pub voltage: S,
    /// Seconds of refractoriness left.
    pub refractory_remaining: S,
}

/// Advances one neuron by `dt` seconds under constant `input_current`.
///
/// The membrane relaxes exactly towards the input
/// (`v <- J + (v - J) e^(-dt/tau_rc)`), clipped below at zero. Refractory
/// time is consumed first; a step that ends the refractory period only
/// integrates the remainder of `dt`. A threshold crossing is reported at the
/// end of the step, but the refractory clock starts at the crossing time
/// solved from the exponential trajectory, so the time the neuron spent
/// past threshold within the step counts against `tau_ref`.
pub fn lif_step<S: Scalar>(
    state: LifState<S>,
    input_current: S,
    dt: S,
    params: &NeuronParams<S>,
) -> (LifState<S>, bool) {
    let zero = S::zero();
    let mut refractory = state.refractory_remaining;
    let mut active = dt;
    if refractory > zero {
        if refractory >= dt {
            return (
                LifState {
                    voltage: state.voltage,
                    refractory_remaining: refractory - dt,
                },
                false,
            );
        }
        active = dt - refractory;
        refractory = zero;
    }

    let j = input_current;
    let decay = (-active / params.tau_rc).exp();
    let voltage = (j + (state.voltage - j) * decay).max(zero);
    if voltage < params.v_th {
        return (
            LifState {
                voltage,
                refractory_remaining: refractory,
            },
            false,
        );
    }

    // Crossing happened `active - to_threshold` seconds before the step end.
    let to_threshold = params.tau_rc * ((j - state.voltage) / (j - params.v_th)).ln();
    let since_spike = (active - to_threshold).max(zero).min(active);
    let mut next = LifState {
        voltage: zero,
        refractory_remaining: params.tau_ref - since_spike,
    };
    if next.refractory_remaining < zero {
        // Refractory period already over inside this step.
        let leftover = -next.refractory_remaining;
        let v = j * (S::one() - (-leftover / params.tau_rc).exp());
        next.voltage = v.max(zero).min(params.v_th);
        next.refractory_remaining = zero;
    }
    (next, true)
}
