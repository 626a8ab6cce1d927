use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::calibration::{compute_calibration, raw_ae_outputs};
use super::generator::{epoch_order, gather, AdvTerm, AeTrainer, PreparedPairs};
use super::{CalibrationStats, LogRow, TrainConfig, TrainingLog};
use crate::error::{Error, Result};
use crate::gradnet::{AdamState, Mode, Tape, Tensor};
use crate::models::{AutoencoderModel, Binding, DiscriminatorModel, Network};
use crate::sigcore::{self, derive_seed, metrics_triple, ContaminatedPair, Segment, SnrLevel, SEGMENT_LEN};
use crate::targeting::standard_rescale;

/// Held-out means of the three metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldoutMetrics {
    pub cc: f64,
    pub trrmse: f64,
    pub srrmse: f64,
}

/// Per-cycle monitoring values.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleEntry {
    pub cycle: usize,
    pub gen_loss: f64,
    pub disc_loss: f64,
    /// Held-out real-vs-generated accuracy of the discriminator.
    pub disc_accuracy: f64,
    pub heldout: HeldoutMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    /// Held-out metrics before the first cycle.
    pub initial: HeldoutMetrics,
    pub cycles: Vec<CycleEntry>,
}

impl CycleReport {
    pub fn final_metrics(&self) -> HeldoutMetrics {
        self.cycles.last().map_or(self.initial, |c| c.heldout)
    }
}

#[derive(Debug, Clone)]
pub struct AdversarialOutput {
    pub ae: AutoencoderModel,
    pub disc: DiscriminatorModel,
    pub calibration: CalibrationStats,
    pub report: CycleReport,
    pub log: TrainingLog,
}

/// Standard-rescaled autoencoder outputs scored against truth.
pub fn evaluate_heldout(
    ae: &AutoencoderModel,
    pairs: &[ContaminatedPair],
    cal: &CalibrationStats,
) -> Result<HeldoutMetrics> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (mut cc, mut tr, mut sr) = (0.0, 0.0, 0.0);
    for chunk in pairs.chunks(32) {
        let rows: Vec<&[f64]> = chunk.iter().map(|p| p.mixture.samples()).collect();
        for (p, out) in chunk.iter().zip(raw_ae_outputs(ae, &rows)?) {
            let level = super::calibration::pair_level(p)?;
            let y = standard_rescale(&Segment::new(out)?, cal, level)?;
            let m = metrics_triple(&y, &p.clean)?;
            cc += m.cc;
            tr += m.trrmse;
            sr += m.srrmse;
        }
    }
    let n = pairs.len() as f64;
    Ok(HeldoutMetrics {
        cc: cc / n,
        trrmse: tr / n,
        srrmse: sr / n,
    })
}

/// Discriminator inputs for generated samples: standard rescale, then `1/p99`.
fn generated_rows(ae: &AutoencoderModel, data: &PreparedPairs, cal: &CalibrationStats) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(data.len());
    for (chunk, lv) in data.inputs.chunks(32).zip(data.levels.chunks(32)) {
        let rows: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
        for (raw, &l) in ae.infer(&rows)?.into_iter().zip(lv) {
            let c = cal.level(SnrLevel::from_index(l).expect("valid level"))?;
            let m = sigcore::mean(&raw);
            out.push(
                raw.iter()
                    .map(|v| ((v - m) * c.rho + m + c.mu) / cal.p99)
                    .collect(),
            );
        }
    }
    Ok(out)
}

fn real_rows(data: &PreparedPairs, cal: &CalibrationStats) -> Vec<Vec<f64>> {
    data.truths
        .iter()
        .map(|t| t.iter().map(|v| v / cal.p99).collect())
        .collect()
}

struct DiscTrainer {
    model: DiscriminatorModel,
    opt: AdamState,
    epoch: u64,
    seed: u64,
    batch: usize,
}

impl DiscTrainer {
    /// One BCE pass; each batch stacks real rows (label 1) over generated rows (label 0).
    fn run_epoch(&mut self, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
        let order = epoch_order(self.seed, 2, self.epoch, real.len());
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(self.seed, 3), self.epoch));
        self.epoch += 1;
        let (mut total, mut batches) = (0.0, 0);
        for idx in order.chunks(self.batch) {
            let n = idx.len();
            let mut rows = gather(real, idx);
            rows.extend(gather(fake, idx));
            let mut labels = vec![1.0; n];
            labels.extend(vec![0.0; n]);
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(vec![2 * n, 1, SEGMENT_LEN], rows)?);
            let mut bind = Binding::trainable();
            let p = self.model.forward(&mut tape, x, Mode::Train, &mut bind, &mut rng)?;
            let loss = tape.bce(p, &labels)?;
            let grads = tape.backward(loss)?;
            let g: Vec<Tensor> = bind.vars.iter().map(|&v| grads.wrt(v)).collect();
            self.opt.step(&mut self.model.params_mut(), &g)?;
            total += tape.value(loss).item();
            batches += 1;
        }
        Ok(total / batches as f64)
    }
}

/// Fraction of real rows scored above 0.5 and generated rows at or below it.
pub fn discriminator_accuracy(disc: &DiscriminatorModel, real: &[Vec<f64>], fake: &[Vec<f64>]) -> Result<f64> {
    let mut hits = 0usize;
    for (rows, is_real) in [(real, true), (fake, false)] {
        for chunk in rows.chunks(32) {
            let r: Vec<&[f64]> = chunk.iter().map(Vec::as_slice).collect();
            hits += disc
                .infer(&r)?
                .iter()
                .filter(|&&p| (p > 0.5) == is_real)
                .count();
        }
    }
    Ok(hits as f64 / (real.len() + fake.len()) as f64)
}

/// Alternating discriminator/generator cycles.
///
/// Each cycle refreshes calibration from the current autoencoder (when enabled),
/// trains the discriminator, then the generator against it, and scores the held-out
/// pairs. With `w_adv = 0` the generator never consults the discriminator, so its
/// weights equal a plain continuation of reconstruction training.
pub fn adversarial_train(
    ae: AutoencoderModel,
    disc: DiscriminatorModel,
    pairs: &[ContaminatedPair],
    heldout: &[ContaminatedPair],
    calibration: &CalibrationStats,
    config: &TrainConfig,
) -> Result<AdversarialOutput> {
    config.validate()?;
    let data = PreparedPairs::new(pairs)?;
    let held = PreparedPairs::new(heldout)?;
    let mut cal = calibration.clone();
    if !(cal.p99 > 0.0) {
        return Err(Error::InvalidParams("calibration p99 must be positive".into()));
    }
    let mut gen = AeTrainer::new(ae, config);
    let mut dt = DiscTrainer {
        model: disc,
        opt: AdamState::new(config.disc_lr),
        epoch: 0,
        seed: config.seed,
        batch: config.batch,
    };
    let mut log = TrainingLog::default();
    let initial = evaluate_heldout(&gen.model, heldout, &cal)?;
    let mut cycles = Vec::with_capacity(config.cycles);
    for cycle in 1..=config.cycles {
        if config.refresh_calibration {
            let p99 = cal.p99;
            cal = compute_calibration(pairs, &gen.model)?;
            cal.p99 = p99;
        }
        let real = real_rows(&data, &cal);
        let fake = generated_rows(&gen.model, &data, &cal)?;
        let mut disc_loss = f64::NAN;
        for e in 0..config.epochs_per_cycle_disc {
            disc_loss = dt.run_epoch(&real, &fake)?;
            log.rows.push(LogRow {
                cycle,
                epoch: e,
                gen_loss: None,
                disc_loss: Some(disc_loss),
                heldout_cc: None,
            });
        }
        // parity is judged on the discriminator the generator is about to face
        let disc_accuracy = discriminator_accuracy(
            &dt.model,
            &real_rows(&held, &cal),
            &generated_rows(&gen.model, &held, &cal)?,
        )?;
        let mut gen_loss = f64::NAN;
        for e in 0..config.epochs_per_cycle_gen {
            let adv = AdvTerm {
                disc: &dt.model,
                calibration: &cal,
                w_adv: config.w_adv,
            };
            gen_loss = gen.run_epoch_with(&data, Some(&adv))?;
            log.rows.push(LogRow {
                cycle,
                epoch: config.epochs_per_cycle_disc + e,
                gen_loss: Some(gen_loss),
                disc_loss: None,
                heldout_cc: None,
            });
        }
        let heldout_metrics = evaluate_heldout(&gen.model, heldout, &cal)?;
        if let Some(last) = log.rows.last_mut() {
            last.heldout_cc = Some(heldout_metrics.cc);
        }
        cycles.push(CycleEntry {
            cycle,
            gen_loss,
            disc_loss,
            disc_accuracy,
            heldout: heldout_metrics,
        });
    }
    Ok(AdversarialOutput {
        ae: gen.model,
        disc: dt.model,
        calibration: cal,
        report: CycleReport { initial, cycles },
        log,
    })
}
