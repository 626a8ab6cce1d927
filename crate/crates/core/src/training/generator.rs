use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{LossWeights, TrainConfig};
use crate::error::{Error, Result};
use crate::gradnet::{AdamState, Mode, Tape, Tensor};
use crate::models::{AutoencoderModel, Binding, DiscriminatorModel, Network};
use crate::sigcore::{derive_seed, normalize_minmax, ContaminatedPair, SEGMENT_LEN};
use crate::training::calibration::pair_level;
use crate::training::CalibrationStats;

/// Training pairs flattened into the row layout the networks consume.
#[derive(Debug, Clone)]
pub struct PreparedPairs {
    /// Min-max normalized mixtures.
    pub inputs: Vec<Vec<f64>>,
    pub truths: Vec<Vec<f64>>,
    pub levels: Vec<usize>,
}

impl PreparedPairs {
    pub fn new(pairs: &[ContaminatedPair]) -> Result<Self> {
        let mut out = Self {
            inputs: Vec::with_capacity(pairs.len()),
            truths: Vec::with_capacity(pairs.len()),
            levels: Vec::with_capacity(pairs.len()),
        };
        for p in pairs {
            if p.mixture.len() != SEGMENT_LEN {
                return Err(Error::LengthMismatch {
                    left: p.mixture.len(),
                    right: SEGMENT_LEN,
                });
            }
            out.inputs.push(normalize_minmax(&p.mixture)?.0.into_samples());
            out.truths.push(p.clean.samples().to_vec());
            out.levels.push(pair_level(p)?.index());
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Seeded permutation for one epoch.
pub(crate) fn epoch_order(seed: u64, stream: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, stream), epoch));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

pub(crate) fn gather(rows: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    idx.iter().flat_map(|&i| rows[i].iter().copied()).collect()
}

/// Adversarial term of the generator objective.
pub(crate) struct AdvTerm<'a> {
    pub disc: &'a DiscriminatorModel,
    pub calibration: &'a CalibrationStats,
    pub w_adv: f64,
}

/// Adam-driven autoencoder optimisation with a persistent epoch counter, so that
/// runs split across calls replay the same shuffles as a single long run.
pub struct AeTrainer {
    pub model: AutoencoderModel,
    opt: AdamState,
    epoch: u64,
    seed: u64,
    batch: usize,
    weights: LossWeights,
}

impl AeTrainer {
    pub fn new(model: AutoencoderModel, config: &TrainConfig) -> Self {
        Self {
            model,
            opt: AdamState::new(config.lr),
            epoch: 0,
            seed: config.seed,
            batch: config.batch,
            weights: config.loss,
        }
    }

    pub fn epochs_done(&self) -> u64 {
        self.epoch
    }

    /// One pass over `data`; returns the mean per-batch objective.
    pub fn run_epoch(&mut self, data: &PreparedPairs) -> Result<f64> {
        self.run_epoch_with(data, None)
    }

    pub(crate) fn run_epoch_with(&mut self, data: &PreparedPairs, adv: Option<&AdvTerm>) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let order = epoch_order(self.seed, 1, self.epoch, data.len());
        self.epoch += 1;
        let mut total = 0.0;
        let mut batches = 0;
        for idx in order.chunks(self.batch) {
            let n = idx.len();
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(vec![n, 1, SEGMENT_LEN], gather(&data.inputs, idx))?);
            let mut bind = Binding::trainable();
            let y = self.model.forward(&mut tape, x, Mode::Train, &mut bind)?;
            let truth = gather(&data.truths, idx);
            let mut loss = super::ae_loss(&mut tape, y, &truth, &self.weights)?;
            if let Some(adv) = adv.filter(|a| a.w_adv != 0.0) {
                let (rho, mu) = row_calibration(adv.calibration, idx.iter().map(|&i| data.levels[i]))?;
                let g = tape.row_affine(y, &rho, &mu, 1.0 / adv.calibration.p99)?;
                let mut unused = ChaCha8Rng::seed_from_u64(0);
                let p = adv
                    .disc
                    .forward(&mut tape, g, Mode::Eval, &mut Binding::frozen(), &mut unused)?;
                let fool = tape.bce(p, &vec![1.0; n])?;
                loss = tape.weighted_sum(&[(loss, 1.0), (fool, adv.w_adv)])?;
            }
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFinite(batches));
            }
            let grads = tape.backward(loss)?;
            let g: Vec<Tensor> = bind.vars.iter().map(|&v| grads.wrt(v)).collect();
            self.opt.step(&mut self.model.params_mut(), &g)?;
            total += value;
            batches += 1;
        }
        Ok(total / batches as f64)
    }
}

pub(crate) fn row_calibration(
    cal: &CalibrationStats,
    levels: impl Iterator<Item = usize>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rho = Vec::new();
    let mut mu = Vec::new();
    for l in levels {
        let c = cal.level(crate::SnrLevel::from_index(l).expect("valid level"))?;
        rho.push(c.rho);
        mu.push(c.mu);
    }
    Ok((rho, mu))
}

/// Result of plain autoencoder training.
#[derive(Debug, Clone)]
pub struct PretrainOutput {
    pub model: AutoencoderModel,
    /// Mean objective per epoch.
    pub losses: Vec<f64>,
}

/// Trains a fresh autoencoder seeded from `config.seed` for `config.pretrain_epochs`.
pub fn pretrain_autoencoder(pairs: &[ContaminatedPair], config: &TrainConfig) -> Result<PretrainOutput> {
    let ae = crate::models::build_autoencoder(config.seed);
    continue_pretraining(ae, pairs, config, config.pretrain_epochs)
}

/// Runs `epochs` further reconstruction-only epochs from `ae` with a fresh optimiser.
pub fn continue_pretraining(
    ae: AutoencoderModel,
    pairs: &[ContaminatedPair],
    config: &TrainConfig,
    epochs: usize,
) -> Result<PretrainOutput> {
    config.validate()?;
    let data = PreparedPairs::new(pairs)?;
    let mut trainer = AeTrainer::new(ae, config);
    let losses = (0..epochs)
        .map(|_| trainer.run_epoch(&data))
        .collect::<Result<Vec<_>>>()?;
    Ok(PretrainOutput {
        model: trainer.model,
        losses,
    })
}
