use ndarray::{Array1, ArrayView1};
use rand::Rng;

use super::{mse_loss, prefixed, Activation, DenseLayer, Params};
use crate::error::Result;
use crate::features::DEEP_LATENT_DIM;

/// Two linear layers: `H → 510 → H`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoEncoder {
    pub encoder: DenseLayer,
    pub decoder: DenseLayer,
}

impl AutoEncoder {
    pub fn new(input: usize, rng: &mut impl Rng) -> Self {
        Self::with_latent(input, DEEP_LATENT_DIM, rng)
    }

    pub fn with_latent(input: usize, latent: usize, rng: &mut impl Rng) -> Self {
        AutoEncoder {
            encoder: DenseLayer::new(input, latent, Activation::Identity, rng),
            decoder: DenseLayer::new(latent, input, Activation::Identity, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        AutoEncoder {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn encode(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.encoder.forward(x)
    }

    pub fn reconstruct(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let z = self.encoder.forward(x)?;
        self.decoder.forward(z.view())
    }

    /// `mse(decode(encode(x)), x)` with its gradient w.r.t. `x` (both the
    /// encoder path and the target path) and the parameter gradient.
    pub fn reconstruction_loss(&self, x: ArrayView1<f64>) -> Result<(f64, Array1<f64>, AutoEncoder)> {
        let z = self.encoder.forward(x)?;
        let rec = self.decoder.forward(z.view())?;
        let (loss, d_rec) = mse_loss(rec.as_slice().expect("contiguous"), x.as_slice().expect("contiguous"))?;
        let d_rec = Array1::from(d_rec);
        let (dz, g_dec) = self.decoder.backward(z.view(), d_rec.view())?;
        let (dx_enc, g_enc) = self.encoder.backward(x, dz.view())?;
        let dx = dx_enc - &d_rec;
        Ok((
            loss,
            dx,
            AutoEncoder {
                encoder: g_enc,
                decoder: g_dec,
            },
        ))
    }
}

impl Params for AutoEncoder {
    fn shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = prefixed("encoder", self.encoder.shapes());
        v.extend(prefixed("decoder", self.decoder.shapes()));
        v
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut v = self.encoder.slices();
        v.extend(self.decoder.slices());
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.encoder.slices_mut();
        v.extend(self.decoder.slices_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn latent_is_510_for_any_width() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for h in [1, 7, 64, 1024] {
            let ae = AutoEncoder::new(h, &mut rng);
            assert_eq!(ae.latent_dim(), 510);
            let z = ae.encode(Array1::zeros(h).view()).unwrap();
            assert_eq!(z.len(), 510);
        }
    }
}
