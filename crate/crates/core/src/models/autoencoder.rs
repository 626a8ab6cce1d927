use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{BatchNormLayer, Binding, Conv1dLayer, Init, Network};
use crate::error::{Error, Result};
use crate::gradnet::{Mode, RunningStats, Tape, Tensor, Var};

pub const KERNEL: usize = 5;

/// One conv → BN → ReLU stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub conv: Conv1dLayer,
    pub bn: BatchNormLayer,
}

impl ConvBlock {
    fn new(rng: &mut ChaCha8Rng, cin: usize, cout: usize) -> Self {
        Self {
            conv: Conv1dLayer::new(rng, cin, cout, KERNEL, Init::Kaiming),
            bn: BatchNormLayer::new(cout),
        }
    }

    fn forward(&mut self, tape: &mut Tape, x: Var, mode: Mode, b: &mut Binding) -> Result<Var> {
        let h = self.conv.forward(tape, x, b)?;
        let h = self.bn.forward(tape, h, mode, b)?;
        Ok(tape.relu(h))
    }
}

/// Convolutional denoising autoencoder over `[N, 1, L]` with `L` divisible by 4.
///
/// Encoder 32, 64 (each pooled), latent 128, decoder 64, 32 (each upsampled),
/// then a single sigmoid output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub seed: u64,
    pub enc1: ConvBlock,
    pub enc2: ConvBlock,
    pub latent: ConvBlock,
    pub dec1: ConvBlock,
    pub dec2: ConvBlock,
    pub out: Conv1dLayer,
}

pub fn build_autoencoder(seed: u64) -> AutoencoderModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AutoencoderModel {
        seed,
        enc1: ConvBlock::new(&mut rng, 1, 32),
        enc2: ConvBlock::new(&mut rng, 32, 64),
        latent: ConvBlock::new(&mut rng, 64, 128),
        dec1: ConvBlock::new(&mut rng, 128, 64),
        dec2: ConvBlock::new(&mut rng, 64, 32),
        out: Conv1dLayer::new(&mut rng, 32, 1, KERNEL, Init::Xavier),
    }
}

impl AutoencoderModel {
    /// Records a forward pass. `x` must be `[N, 1, L]`; the result has the same shape.
    pub fn forward(&mut self, tape: &mut Tape, x: Var, mode: Mode, b: &mut Binding) -> Result<Var> {
        let l = *tape.value(x).shape().last().unwrap_or(&0);
        if !l.is_multiple_of(4) {
            return Err(Error::ShapeMismatch(format!(
                "autoencoder input length {l} is not a multiple of 4"
            )));
        }
        let h = self.enc1.forward(tape, x, mode, b)?;
        let h = tape.maxpool2(h)?;
        let h = self.enc2.forward(tape, h, mode, b)?;
        let h = tape.maxpool2(h)?;
        let h = self.latent.forward(tape, h, mode, b)?;
        let h = self.dec1.forward(tape, h, mode, b)?;
        let h = tape.upsample2(h);
        let h = self.dec2.forward(tape, h, mode, b)?;
        let h = tape.upsample2(h);
        let h = self.out.forward(tape, h, b)?;
        Ok(tape.sigmoid(h))
    }

    /// Eval-mode reconstruction of a batch of equal-length rows. Leaves `self` untouched.
    pub fn infer(&self, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let l = rows.first().map_or(0, |r| r.len());
        if rows.is_empty() || l == 0 {
            return Err(Error::InvalidCount(0));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != l) {
            return Err(Error::LengthMismatch {
                left: l,
                right: r.len(),
            });
        }
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![rows.len(), 1, l], data)?);
        let mut scratch = self.clone();
        let y = scratch.forward(&mut tape, x, Mode::Eval, &mut Binding::frozen())?;
        Ok(tape.value(y).data().chunks(l).map(<[f64]>::to_vec).collect())
    }

    fn blocks(&self) -> [(&'static str, &ConvBlock); 5] {
        [
            ("enc1", &self.enc1),
            ("enc2", &self.enc2),
            ("latent", &self.latent),
            ("dec1", &self.dec1),
            ("dec2", &self.dec2),
        ]
    }
}

impl Network for AutoencoderModel {
    fn architecture(&self) -> &'static str {
        "autoencoder-v1"
    }

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (name, blk) in self.blocks() {
            out.push((format!("{name}.conv.weight"), &blk.conv.weight));
            out.push((format!("{name}.conv.bias"), &blk.conv.bias));
            out.push((format!("{name}.bn.gamma"), &blk.bn.gamma));
            out.push((format!("{name}.bn.beta"), &blk.bn.beta));
        }
        out.push(("out.conv.weight".into(), &self.out.weight));
        out.push(("out.conv.bias".into(), &self.out.bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for blk in [
            &mut self.enc1,
            &mut self.enc2,
            &mut self.latent,
            &mut self.dec1,
            &mut self.dec2,
        ] {
            out.push(&mut blk.conv.weight);
            out.push(&mut blk.conv.bias);
            out.push(&mut blk.bn.gamma);
            out.push(&mut blk.bn.beta);
        }
        out.push(&mut self.out.weight);
        out.push(&mut self.out.bias);
        out
    }

    fn named_stats(&self) -> Vec<(String, &RunningStats)> {
        self.blocks()
            .into_iter()
            .map(|(name, blk)| (format!("{name}.bn"), &blk.bn.stats))
            .collect()
    }

    fn stats_mut(&mut self) -> Vec<&mut RunningStats> {
        vec![
            &mut self.enc1.bn.stats,
            &mut self.enc2.bn.stats,
            &mut self.latent.bn.stats,
            &mut self.dec1.bn.stats,
            &mut self.dec2.bn.stats,
        ]
    }
}
