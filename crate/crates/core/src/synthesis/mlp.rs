//! Fully connected network with manually derived backpropagation.
//!
//! All weights and biases live in one flat vector so a single Adam state
//! covers the whole network. Layer `k` stores an `out × in` row-major weight
//! block followed by its `out` biases.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Layer outputs kept for the backward pass.
pub struct ForwardCache {
    /// `inputs[k]` is the batch entering layer `k`; the last entry is the
    /// network output.
    inputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.inputs.last().expect("cache holds at least the input")
    }
}

impl Mlp {
    /// ReLU on every hidden layer, linear output, uniform ±1/√fan_in weights
    /// and zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(widths)?;
        let mut offset = 0;
        for k in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[k], widths[k + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for w in &mut mlp.params[offset..offset + fan_in * fan_out] {
                *w = rng.random_range(-bound..bound);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(mlp)
    }

    /// Same shape as [`new`](Self::new) with every parameter zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidConfig(
                "an MLP needs at least two positive layer widths".into(),
            ));
        }
        let n_layers = widths.len() - 1;
        let activations = (0..n_layers)
            .map(|k| {
                if k + 1 == n_layers {
                    Activation::Linear
                } else {
                    Activation::Relu
                }
            })
            .collect();
        let len = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            widths: widths.to_vec(),
            activations,
            params: vec![0.0; len],
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_inputs(&self) -> usize {
        self.widths[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Structural consistency after deserialization.
    pub fn validate(&self) -> Result<()> {
        let expected: usize = self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if self.widths.len() < 2 || self.activations.len() != self.widths.len() - 1 {
            return Err(Error::InvalidConfig("MLP widths and activations disagree".into()));
        }
        if self.params.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "MLP parameters",
                expected,
                actual: self.params.len(),
            });
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Degenerate("MLP has non-finite parameters".into()));
        }
        Ok(())
    }

    fn layer<'a>(&self, params: &'a [f64], k: usize, offset: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let (n_in, n_out) = (self.widths[k], self.widths[k + 1]);
        let w = ArrayView2::from_shape((n_out, n_in), &params[offset..offset + n_in * n_out])
            .expect("layer block matches its shape");
        let b = ArrayView1::from(&params[offset + n_in * n_out..offset + n_in * n_out + n_out]);
        (w, b)
    }

    /// Batched forward pass; `x` is `batch × n_inputs`.
    pub fn forward(&self, x: Array2<f64>) -> Result<ForwardCache> {
        self.forward_with(&self.params, x)
    }

    /// Parameter gradient for an output gradient `d_out` (`batch × n_outputs`).
    pub fn backward(&self, cache: &ForwardCache, d_out: Array2<f64>) -> Vec<f64> {
        self.backward_with(&self.params, cache, d_out)
    }

    /// Forward pass with this network's shape and an external parameter
    /// vector.
    pub(crate) fn forward_with(&self, params: &[f64], x: Array2<f64>) -> Result<ForwardCache> {
        assert_eq!(params.len(), self.params.len());
        if x.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                what: "MLP input",
                expected: self.n_inputs(),
                actual: x.ncols(),
            });
        }
        let mut inputs = vec![x];
        let mut offset = 0;
        for k in 0..self.activations.len() {
            let (w, b) = self.layer(params, k, offset);
            let mut z = inputs[k].dot(&w.t());
            z += &b;
            if self.activations[k] == Activation::Relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(z);
            offset += w.len() + b.len();
        }
        Ok(ForwardCache { inputs })
    }

    /// Gradient of a loss with respect to all parameters, given the loss
    /// gradient with respect to the batch output.
    pub(crate) fn backward_with(&self, params: &[f64], cache: &ForwardCache, d_out: Array2<f64>) -> Vec<f64> {
        let mut grads = vec![0.0; params.len()];
        let mut offsets = Vec::with_capacity(self.activations.len());
        let mut offset = 0;
        for k in 0..self.activations.len() {
            offsets.push(offset);
            offset += self.widths[k] * self.widths[k + 1] + self.widths[k + 1];
        }
        let mut delta = d_out;
        for k in (0..self.activations.len()).rev() {
            let out = &cache.inputs[k + 1];
            if self.activations[k] == Activation::Relu {
                delta.zip_mut_with(out, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            let input = &cache.inputs[k];
            let dw = delta.t().dot(input);
            let db = delta.sum_axis(Axis(0));
            let start = offsets[k];
            let n_w = dw.len();
            grads[start..start + n_w].copy_from_slice(dw.as_standard_layout().as_slice().unwrap());
            grads[start + n_w..start + n_w + db.len()].copy_from_slice(db.as_slice().unwrap());
            if k > 0 {
                let (w, _) = self.layer(params, k, start);
                delta = delta.dot(&w);
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use ndarray::array;

    #[test]
    fn zero_network_outputs_zero() {
        let mlp = Mlp::zeros(&[3, 5, 2]).unwrap();
        let out = mlp.forward(array![[1.0, 2.0, 3.0]]).unwrap();
        assert!(out.output().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_forward() {
        let mut mlp = Mlp::zeros(&[2, 2, 1]).unwrap();
        // W1 = [[1, -1], [2, 0]], b1 = [0, -1], W2 = [[1, 3]], b2 = [0.5]
        mlp.params_mut()
            .copy_from_slice(&[1.0, -1.0, 2.0, 0.0, 0.0, -1.0, 1.0, 3.0, 0.5]);
        let out = mlp.forward(array![[1.0, 2.0]]).unwrap();
        // h = relu([-1, 1]) = [0, 1]; y = 3 + 0.5
        assert_eq!(out.output()[[0, 0]], 3.5);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = rng_for(7, 0);
        let mlp = Mlp::new(&[4, 8, 4], &mut rng).unwrap();
        let x = Array2::from_shape_fn((3, 4), |(i, j)| ((i * 4 + j) as f64 * 0.37).sin());
        let c = Array2::from_shape_fn((3, 4), |(i, j)| ((i + 2 * j) as f64 * 0.91).cos());
        let loss = |m: &Mlp| -> f64 { (m.forward(x.clone()).unwrap().output() * &c).sum() };
        let cache = mlp.forward(x.clone()).unwrap();
        let grads = mlp.backward(&cache, c.clone());
        let h = 1e-6;
        let mut max_err = 0.0f64;
        let mut max_g = 0.0f64;
        for k in 0..mlp.params().len() {
            let mut plus = mlp.clone();
            plus.params_mut()[k] += h;
            let mut minus = mlp.clone();
            minus.params_mut()[k] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            max_err = max_err.max((fd - grads[k]).abs());
            max_g = max_g.max(grads[k].abs());
        }
        assert!(max_err / max_g < 1e-5, "relative error {}", max_err / max_g);
    }

    #[test]
    fn json_round_trip() {
        let mut rng = rng_for(3, 1);
        let mlp = Mlp::new(&[3, 4, 2], &mut rng).unwrap();
        let back: Mlp = serde_json::from_str(&serde_json::to_string(&mlp).unwrap()).unwrap();
        assert_eq!(back, mlp);
    }
}
