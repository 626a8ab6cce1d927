use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::autoencoder::KERNEL;
use super::layers::{Binding, Conv1dLayer, DenseLayer, Init, Network};
use crate::error::{Error, Result};
use crate::gradnet::{Mode, Tape, Tensor, Var};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const DROPOUT: f64 = 0.3;

/// Real-vs-generated classifier over `[N, 1, 512]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorModel {
    pub seed: u64,
    pub convs: [Conv1dLayer; 3],
    pub head: DenseLayer,
}

pub fn build_discriminator(seed: u64) -> DiscriminatorModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let convs = [
        Conv1dLayer::new(&mut rng, 1, 16, KERNEL, Init::Kaiming),
        Conv1dLayer::new(&mut rng, 16, 32, KERNEL, Init::Kaiming),
        Conv1dLayer::new(&mut rng, 32, 64, KERNEL, Init::Kaiming),
    ];
    let head = DenseLayer::new(&mut rng, 64 * 64, 1, Init::Xavier);
    DiscriminatorModel { seed, convs, head }
}

impl DiscriminatorModel {
    /// Returns probabilities of shape `[N, 1]`. `rng` drives dropout in `Train`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        x: Var,
        mode: Mode,
        b: &mut Binding,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        let n = match *tape.value(x).shape() {
            [n, 1, 512] => n,
            ref s => return Err(Error::ShapeMismatch(format!("discriminator input {s:?}"))),
        };
        let mut h = x;
        for conv in &self.convs {
            h = conv.forward(tape, h, b)?;
            h = tape.leaky_relu(h, LEAKY_SLOPE);
            h = tape.dropout(h, DROPOUT, mode, rng)?;
            h = tape.maxpool2(h)?;
        }
        let h = tape.reshape(h, &[n, 64 * 64])?;
        let h = self.head.forward(tape, h, b)?;
        Ok(tape.sigmoid(h))
    }

    /// Eval-mode probabilities for a batch of 512-sample rows.
    pub fn infer(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![rows.len(), 1, 512], data)?);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let y = self.forward(&mut tape, x, Mode::Eval, &mut Binding::frozen(), &mut rng)?;
        Ok(tape.value(y).data().to_vec())
    }
}

impl Network for DiscriminatorModel {
    fn architecture(&self) -> &'static str {
        "discriminator-v1"
    }

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{i}.weight"), &c.weight));
            out.push((format!("conv{i}.bias"), &c.bias));
        }
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for c in &mut self.convs {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out.push(&mut self.head.weight);
        out.push(&mut self.head.bias);
        out
    }
}
