use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{xavier, Params};
use crate::error::{ensure_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the layer output.
    #[inline]
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `y = act(W x + b)` with `W` stored `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(input: usize, output: usize, activation: Activation, rng: &mut impl Rng) -> Self {
        let w = xavier(rng, input, output, input * output);
        DenseLayer {
            weight: Array2::from_shape_vec((output, input), w).expect("shape"),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        DenseLayer {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn from_parts(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        ensure_dim("dense bias", weight.nrows(), bias.len())?;
        let layer = DenseLayer {
            weight,
            bias,
            activation,
        };
        if !layer.is_finite() {
            return Err(Error::NonFinite("dense parameters"));
        }
        Ok(layer)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.output_dim(), self.activation)
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        ensure_dim("dense input", self.input_dim(), x.len())?;
        let mut y = self.weight.dot(&x) + &self.bias;
        y.mapv_inplace(|z| self.activation.apply(z));
        Ok(y)
    }

    /// Row-wise forward over a `batch × in` matrix.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        ensure_dim("dense batch input", self.input_dim(), x.ncols())?;
        let mut y = x.dot(&self.weight.t());
        y += &self.bias;
        y.mapv_inplace(|z| self.activation.apply(z));
        Ok(y)
    }

    /// Gradients for one input. Returns `dx` and the parameter gradient.
    pub fn backward(&self, x: ArrayView1<f64>, dy: ArrayView1<f64>) -> Result<(Array1<f64>, DenseLayer)> {
        ensure_dim("dense output grad", self.output_dim(), dy.len())?;
        let y = self.forward(x)?;
        let x2 = x.insert_axis(Axis(0));
        let y2 = y.view().insert_axis(Axis(0));
        let dy2 = dy.insert_axis(Axis(0));
        let (dx, g) = self.backward_batch(x2, y2, dy2)?;
        Ok((dx.row(0).to_owned(), g))
    }

    /// Batched backward given the cached outputs `y` of [`forward_batch`].
    /// Parameter gradients are summed over the batch.
    pub fn backward_batch(
        &self,
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        dy: ArrayView2<f64>,
    ) -> Result<(Array2<f64>, DenseLayer)> {
        ensure_dim("dense batch input", self.input_dim(), x.ncols())?;
        ensure_dim("dense batch output grad", self.output_dim(), dy.ncols())?;
        let mut dz = dy.to_owned();
        if self.activation != Activation::Identity {
            dz.zip_mut_with(&y, |d, &out| *d *= self.activation.grad_from_output(out));
        }
        let dw = dz.t().dot(&x).as_standard_layout().into_owned();
        let db = dz.sum_axis(Axis(0));
        let dx = dz.dot(&self.weight);
        Ok((
            dx,
            DenseLayer {
                weight: dw,
                bias: db,
                activation: self.activation,
            },
        ))
    }
}

impl Params for DenseLayer {
    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        vec![
            ("weight".into(), self.weight.shape().to_vec()),
            ("bias".into(), self.bias.shape().to_vec()),
        ]
    }

    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.weight.as_slice().expect("contiguous"),
            self.bias.as_slice().expect("contiguous"),
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.weight.as_slice_mut().expect("contiguous"),
            self.bias.as_slice_mut().expect("contiguous"),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_layer_passes_input_through() {
        let layer = DenseLayer::from_parts(Array2::eye(3), Array1::zeros(3), Activation::Identity).unwrap();
        let x = array![1.5, -2.0, 0.25];
        assert_eq!(layer.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn relu_clamps_negatives() {
        let layer = DenseLayer::from_parts(Array2::eye(2), Array1::zeros(2), Activation::Relu).unwrap();
        assert_eq!(layer.forward(array![-1.0, 2.0].view()).unwrap(), array![0.0, 2.0]);
    }

    #[test]
    fn batch_matches_single() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        use rand::SeedableRng;
        let layer = DenseLayer::new(4, 3, Activation::Relu, &mut rng);
        let x = array![[0.1, -0.3, 0.7, 1.0], [1.0, 2.0, -1.0, 0.5]];
        let yb = layer.forward_batch(x.view()).unwrap();
        for r in 0..2 {
            let y = layer.forward(x.row(r)).unwrap();
            for (a, b) in y.iter().zip(yb.row(r)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let layer = DenseLayer::zeros(3, 2, Activation::Identity);
        assert!(layer.forward(array![1.0, 2.0].view()).is_err());
    }
}
