//! Monte-Carlo dropout inference.
//!
//! Every draw samples fresh dropout masks and evaluates the network once,
//! either as a rate network or as a spiking simulation summarised by its
//! post-burn-in mean. Draw `k` uses mask seed `base_seed + k`, so both
//! backends see exactly the same mask sequence for the same base seed, and
//! draws can be computed in any order.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convert::{convert, SpikingNetwork};
use crate::error::{Error, Result};
use crate::network::{sample_masks, AnalogNetwork};
use crate::scalar::Scalar;
use crate::snn::{simulate, summarize_trace, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Analog,
    Spiking,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Analog => "analog",
            Backend::Spiking => "spiking",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analog" => Ok(Backend::Analog),
            "spiking" => Ok(Backend::Spiking),
            other => Err(Error::Format(format!("unknown backend {other:?}"))),
        }
    }
}

/// Predictive draws for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub observation_id: usize,
    pub draws: Vec<f64>,
    pub backend: Backend,
    pub base_seed: u64,
}

/// Mask seed used by draw `draw` of a run started at `base_seed`.
pub fn draw_seed(base_seed: u64, draw: usize) -> u64 {
    base_seed.wrapping_add(draw as u64)
}

/// Evaluator shared across draws: the rate network, or its spiking
/// conversion plus simulation settings.
pub enum Evaluator<'a, S: Scalar> {
    Analog(&'a AnalogNetwork<S>),
    Spiking(SpikingNetwork<S>, SimConfig<S>),
}

impl<'a, S: Scalar> Evaluator<'a, S> {
    pub fn new(model: &'a AnalogNetwork<S>, backend: Backend, sim: Option<&SimConfig<S>>) -> Result<Self> {
        if model.spec.output_dim != 1 {
            return Err(Error::Dimension(format!(
                "predictive sampling needs one output, network has {}",
                model.spec.output_dim
            )));
        }
        Ok(match backend {
            Backend::Analog => Evaluator::Analog(model),
            Backend::Spiking => {
                let sim = sim.copied().unwrap_or_default();
                sim.validate()?;
                Evaluator::Spiking(convert(model)?, sim)
            }
        })
    }

    pub fn backend(&self) -> Backend {
        match self {
            Evaluator::Analog(_) => Backend::Analog,
            Evaluator::Spiking(..) => Backend::Spiking,
        }
    }

    /// One prediction under the masks drawn from `mask_seed`.
    pub fn draw(&self, observation: &[S], mask_seed: u64) -> Result<f64> {
        match self {
            Evaluator::Analog(net) => {
                let masks = sample_masks(&net.spec, mask_seed);
                Ok(net.forward(observation, Some(&masks))?.output[0].as_f64())
            }
            Evaluator::Spiking(net, sim) => {
                let masks = sample_masks(&net.spec, mask_seed);
                let trace = simulate(net, observation, &masks, sim)?;
                Ok(summarize_trace(&trace, sim.burn_in_steps)?[0].as_f64())
            }
        }
    }

    /// `n_draws` predictions for one observation, in draw order.
    pub fn sample(&self, observation_id: usize, observation: &[S], n_draws: usize, base_seed: u64) -> Result<SampleSet> {
        if n_draws == 0 {
            return Err(Error::InvalidParameter("n_draws must be at least 1".into()));
        }
        let draws = (0..n_draws)
            .into_par_iter()
            .map(|k| self.draw(observation, draw_seed(base_seed, k)))
            .collect::<Result<Vec<f64>>>()?;
        if let Some(bad) = draws.iter().find(|d| !d.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite prediction {bad}")));
        }
        Ok(SampleSet {
            observation_id,
            draws,
            backend: self.backend(),
            base_seed,
        })
    }
}

/// Builds the predictive distribution of one observation.
pub fn predictive_distribution<S: Scalar>(
    model: &AnalogNetwork<S>,
    observation: &[S],
    n_draws: usize,
    base_seed: u64,
    backend: Backend,
    sim: Option<&SimConfig<S>>,
) -> Result<SampleSet> {
    Evaluator::new(model, backend, sim)?.sample(0, observation, n_draws, base_seed)
}

/// Predictive distributions for several observations (ids are row indices),
/// parallel over (observation, draw) pairs with results in
/// observation-major, draw-minor order.
pub fn predictive_distributions<S: Scalar>(
    model: &AnalogNetwork<S>,
    observations: &[Vec<S>],
    n_draws: usize,
    base_seed: u64,
    backend: Backend,
    sim: Option<&SimConfig<S>>,
) -> Result<Vec<SampleSet>> {
    if n_draws == 0 {
        return Err(Error::InvalidParameter("n_draws must be at least 1".into()));
    }
    let eval = Evaluator::new(model, backend, sim)?;
    let flat = (0..observations.len() * n_draws)
        .into_par_iter()
        .map(|idx| eval.draw(&observations[idx / n_draws], draw_seed(base_seed, idx % n_draws)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(flat
        .chunks(n_draws)
        .enumerate()
        .map(|(id, draws)| SampleSet {
            observation_id: id,
            draws: draws.to_vec(),
            backend,
            base_seed,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator; 0 for a single draw).
    pub std: f64,
    pub q025: f64,
    pub q500: f64,
    pub q975: f64,
}

/// Linear-interpolated quantile of sorted data (position `q * (n - 1)`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize(samples: &SampleSet) -> Result<DistributionSummary> {
    let x = &samples.draws;
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let std = if x.len() > 1 {
        (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(DistributionSummary {
        mean,
        std,
        q025: quantile_sorted(&sorted, 0.025),
        q500: quantile_sorted(&sorted, 0.5),
        q975: quantile_sorted(&sorted, 0.975),
    })
}

/// Writes `observation_id,draw_id,backend,prediction` rows, preceded by
/// `# key=value` comment lines.
pub fn write_samples<W: Write>(sets: &[SampleSet], header: &[(String, String)], mut out: W) -> Result<()> {
    for (k, v) in header {
        writeln!(out, "# {k}={v}")?;
    }
    writeln!(out, "observation_id,draw_id,backend,prediction")?;
    for set in sets {
        for (k, d) in set.draws.iter().enumerate() {
            writeln!(out, "{},{},{},{}", set.observation_id, k, set.backend, d)?;
        }
    }
    Ok(())
}

/// Reads a samples file back into per-observation sets ordered by id.
///
/// The base seed is taken from a `# base_seed=` comment when present.
pub fn read_samples<R: Read>(input: R, source: &str) -> Result<Vec<SampleSet>> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let base_seed = text
        .lines()
        .filter_map(|l| l.strip_prefix("# base_seed="))
        .find_map(|v| v.trim().parse().ok())
        .unwrap_or(0);

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let expected = ["observation_id", "draw_id", "backend", "prediction"];
    if header != expected {
        return Err(Error::Format(format!("{source}: unexpected samples header {header:?}")));
    }
    let mut sets: BTreeMap<usize, SampleSet> = BTreeMap::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Table {
            path: source.into(),
            row,
            column: String::new(),
            detail: e.to_string(),
        })?;
        let field = |c: usize| -> Result<&str> {
            rec.get(c).ok_or_else(|| Error::Table {
                path: source.into(),
                row,
                column: expected[c].into(),
                detail: "missing field".into(),
            })
        };
        let bad = |c: usize, v: &str| Error::Table {
            path: source.into(),
            row,
            column: expected[c].into(),
            detail: format!("cannot parse {v:?}"),
        };
        let id: usize = field(0)?.parse().map_err(|_| bad(0, field(0).unwrap_or("")))?;
        let backend: Backend = field(2)?.parse().map_err(|_| bad(2, field(2).unwrap_or("")))?;
        let value: f64 = field(3)?.parse().map_err(|_| bad(3, field(3).unwrap_or("")))?;
        let set = sets.entry(id).or_insert_with(|| SampleSet {
            observation_id: id,
            draws: Vec::new(),
            backend,
            base_seed,
        });
        set.draws.push(value);
    }
    Ok(sets.into_values().collect())
}
