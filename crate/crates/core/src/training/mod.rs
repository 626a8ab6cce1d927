//! Reconstruction loss, autoencoder pretraining, adversarial cycles, meta-targeter
//! training and calibration statistics.

mod adversarial;
mod calibration;
mod generator;
mod loss;
mod meta;

use std::fmt::Write as _;
use std::path::Path;

pub use adversarial::{
    adversarial_train, discriminator_accuracy, evaluate_heldout, AdversarialOutput, CycleEntry,
    CycleReport, HeldoutMetrics,
};
pub use calibration::{
    compute_calibration, compute_calibration_with, pair_level, raw_ae_outputs, CalibrationStats,
    LevelCalibration, MIN_PER_LEVEL,
};
pub use generator::{continue_pretraining, pretrain_autoencoder, AeTrainer, PreparedPairs, PretrainOutput};
pub use loss::{ae_loss, ae_loss_value, LossWeights};
pub use meta::{evaluate_meta, retrain_meta, train_meta_targeter, MetaConfig, MetaOutcome};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub cycles: usize,
    pub epochs_per_cycle_gen: usize,
    pub epochs_per_cycle_disc: usize,
    pub batch: usize,
    pub w_adv: f64,
    pub seed: u64,
    /// Pairs drawn for autoencoder training.
    pub train_size: usize,
    pub pretrain_epochs: usize,
    pub lr: f64,
    pub disc_lr: f64,
    pub loss: LossWeights,
    /// Recompute calibration from the current autoencoder at the start of each cycle.
    pub refresh_calibration: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            cycles: 5,
            epochs_per_cycle_gen: 4,
            epochs_per_cycle_disc: 2,
            batch: 16,
            w_adv: 0.2,
            seed: 0,
            train_size: 300,
            pretrain_epochs: 10,
            lr: 1e-3,
            disc_lr: 1e-3,
            loss: LossWeights::default(),
            refresh_calibration: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(Error::InvalidParams("cycles must be at least 1".into()));
        }
        if self.batch == 0 {
            return Err(Error::InvalidParams("batch must be at least 1".into()));
        }
        if !(self.w_adv >= 0.0 && self.w_adv.is_finite()) {
            return Err(Error::InvalidParams(format!("w_adv {}", self.w_adv)));
        }
        if !(self.lr > 0.0 && self.disc_lr > 0.0) {
            return Err(Error::InvalidParams("learning rates must be positive".into()));
        }
        self.loss.validate()
    }
}

/// One line of the training log. Empty cells mean "not measured at this step".
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub cycle: usize,
    pub epoch: usize,
    pub gen_loss: Option<f64>,
    pub disc_loss: Option<f64>,
    pub heldout_cc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub const HEADER: &'static str = "cycle,epoch,gen_loss,disc_loss,heldout_cc";

    /// Rows for plain pretraining, logged as cycle 0.
    pub fn from_pretrain(losses: &[f64]) -> Self {
        Self {
            rows: losses
                .iter()
                .enumerate()
                .map(|(e, &l)| LogRow {
                    cycle: 0,
                    epoch: e,
                    gen_loss: Some(l),
                    disc_loss: None,
                    heldout_cc: None,
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.cycle,
                r.epoch,
                cell(r.gen_loss),
                cell(r.disc_loss),
                cell(r.heldout_cc)
            );
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
