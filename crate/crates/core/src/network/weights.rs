use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::spec::NetworkSpec;
use crate::error::{Error, Result};
use crate::neuron::NeuronParams;
use crate::scalar::Scalar;

/// Dense row-major matrix. Serialized as an array of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: S) {
        self.data[r * self.cols + c] = value;
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.data
    }

    /// `self * x + bias`.
    pub fn affine(&self, x: &[S], bias: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(bias[r], |acc, (&w, &xi)| acc + w * xi)
            })
            .collect()
    }

    /// `self^T * y`.
    pub fn transpose_mul(&self, y: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == S::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o += w * yr;
            }
        }
        out
    }
}

impl<S: Scalar + Serialize> Serialize for Matrix<S> {
    fn serialize<Z: Serializer>(&self, serializer: Z) -> std::result::Result<Z::Ok, Z::Error> {
        let rows: Vec<&[S]> = (0..self.rows).map(|r| self.row(r)).collect();
        rows.serialize(serializer)
    }
}

impl<'de, S: Scalar + Deserialize<'de>> Deserialize<'de> for Matrix<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<S>>::deserialize(deserializer)?;
        Matrix::from_rows(rows).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams<S: Scalar> {
    /// `out_dim x in_dim`.
    pub weight: Matrix<S>,
    pub bias: Vec<S>,
}

impl<S: Scalar> LayerParams<S> {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![S::zero(); out_dim],
        }
    }
}

/// Learned parameters keyed by parameter set (see
/// [`super::LayerSite::param_key`]). A shared layer is stored once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStore<S: Scalar> {
    pub layers: BTreeMap<String, LayerParams<S>>,
}

impl<S: Scalar> WeightStore<S> {
    /// All-zero store shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .param_shapes()
            .into_iter()
            .map(|(key, (out_dim, in_dim))| (key, LayerParams::zeros(out_dim, in_dim)))
            .collect();
        Self { layers }
    }

    pub fn layer(&self, key: &str) -> Result<&LayerParams<S>> {
        self.layers
            .get(key)
            .ok_or_else(|| Error::Dimension(format!("no parameters for layer {key:?}")))
    }

    pub fn layer_mut(&mut self, key: &str) -> Result<&mut LayerParams<S>> {
        self.layers
            .get_mut(key)
            .ok_or_else(|| Error::Dimension(format!("no parameters for layer {key:?}")))
    }

    /// Confirms every parameter set of `spec` is present with the right shape
    /// and finite entries.
    pub fn check_against(&self, spec: &NetworkSpec) -> Result<()> {
        let shapes = spec.param_shapes();
        if shapes.len() != self.layers.len() {
            return Err(Error::Dimension(format!(
                "spec has {} parameter sets, weights have {}",
                shapes.len(),
                self.layers.len()
            )));
        }
        for (key, (out_dim, in_dim)) in shapes {
            let p = self.layer(&key)?;
            if p.weight.shape() != (out_dim, in_dim) || p.bias.len() != out_dim {
                return Err(Error::Dimension(format!(
                    "layer {key:?} is {:?} with {} biases, expected ({out_dim}, {in_dim})",
                    p.weight.shape(),
                    p.bias.len()
                )));
            }
            if !p.weight.as_slice().iter().chain(&p.bias).all(|x| x.is_finite()) {
                return Err(Error::InvalidParameter(format!("layer {key:?} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// Visits matching entries of two identically-shaped stores.
    pub fn zip_mut(&mut self, other: &Self, mut f: impl FnMut(&mut S, S)) {
        for (key, dst) in self.layers.iter_mut() {
            let src = &other.layers[key];
            for (d, &s) in dst.weight.as_mut_slice().iter_mut().zip(src.weight.as_slice()) {
                f(d, s);
            }
            for (d, &s) in dst.bias.iter_mut().zip(&src.bias) {
                f(d, s);
            }
        }
    }

    pub fn scale(&mut self, factor: S) {
        for p in self.layers.values_mut() {
            for x in p.weight.as_mut_slice().iter_mut().chain(p.bias.iter_mut()) {
                *x *= factor;
            }
        }
    }

    /// Largest absolute entrywise difference; infinite when shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> S {
        let mut worst = S::zero();
        for (key, a) in &self.layers {
            let Some(b) = other.layers.get(key) else {
                return S::infinity();
            };
            if a.weight.shape() != b.weight.shape() || a.bias.len() != b.bias.len() {
                return S::infinity();
            }
            for (x, y) in a.weight.as_slice().iter().chain(&a.bias).zip(b.weight.as_slice().iter().chain(&b.bias)) {
                worst = worst.max((*x - *y).abs());
            }
        }
        if other.layers.len() != self.layers.len() {
            return S::infinity();
        }
        worst
    }
}

/// Random parameters for `spec`: weights ~ N(0, 2 / in_dim), biases at the
/// firing threshold so initial currents straddle it.
pub fn init_weights<S: Scalar>(spec: &NetworkSpec, seed: u64, params: &NeuronParams<S>) -> WeightStore<S> {
    let bias_value = params.v_th;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .param_shapes()
        .into_iter()
        .map(|(key, (out_dim, in_dim))| {
            let std = (2.0 / in_dim as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive standard deviation");
            let mut params = LayerParams::zeros(out_dim, in_dim);
            for w in params.weight.as_mut_slice() {
                *w = S::lit(normal.sample(&mut rng));
            }
            params.bias.fill(bias_value);
            (key, params)
        })
        .collect();
    WeightStore { layers }
}
