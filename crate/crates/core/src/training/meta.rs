use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::calibration::pair_level;
use super::generator::{epoch_order, gather};
use crate::error::{Error, Result};
use crate::gradnet::{AdamState, Tape, Tensor};
use crate::models::{argmax_level, build_lc_ensemble, Binding, LcEnsembleModel, Network, BASES, CLASSES};
use crate::sigcore::{derive_seed, normalize_minmax, ContaminatedPair, SnrLevel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetaConfig {
    /// Epochs for each base predictor.
    pub epochs: usize,
    /// Epochs for the meta-classifier over frozen base outputs.
    pub meta_epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            meta_epochs: 100,
            batch: 16,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MetaOutcome {
    pub model: LcEnsembleModel,
    /// Held-out accuracy of the full stack.
    pub accuracy: f64,
    /// Held-out mean cross-entropy of the stack's probabilities.
    pub mean_loss: f64,
    /// Held-out accuracy of each base alone.
    pub base_accuracy: [f64; BASES],
}

struct Labeled {
    rows: Vec<Vec<f64>>,
    classes: Vec<usize>,
}

fn label(pairs: &[ContaminatedPair]) -> Result<Labeled> {
    let mut rows = Vec::with_capacity(pairs.len());
    let mut classes = Vec::with_capacity(pairs.len());
    for p in pairs {
        rows.push(normalize_minmax(&p.mixture)?.0.into_samples());
        classes.push(pair_level(p)?.index());
    }
    Ok(Labeled { rows, classes })
}

fn require_all_levels(l: &Labeled) -> Result<()> {
    for level in SnrLevel::ALL {
        if !l.classes.contains(&level.index()) {
            return Err(Error::InsufficientData(format!("no training pairs at {level}")));
        }
    }
    Ok(())
}

/// Rows of `idx`, each circularly shifted by a random offset. Level labels do not
/// depend on where in the segment the contamination sits, so this costs nothing
/// and keeps the flattened heads from keying on absolute position.
fn shifted_batch(rows: &[Vec<f64>], idx: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(idx.len() * rows[0].len());
    for &i in idx {
        let r = &rows[i];
        let k = rng.random_range(0..r.len());
        out.extend_from_slice(&r[k..]);
        out.extend_from_slice(&r[..k]);
    }
    out
}

/// Trains the three bases, then the meta-classifier on their frozen outputs, and
/// scores the stack on `test`.
pub fn train_meta_targeter(
    train: &[ContaminatedPair],
    test: &[ContaminatedPair],
    config: &MetaConfig,
) -> Result<MetaOutcome> {
    if config.batch == 0 {
        return Err(Error::InvalidParams("batch must be at least 1".into()));
    }
    let tr = label(train)?;
    require_all_levels(&tr)?;
    let mut model = build_lc_ensemble(config.seed);
    for b in 0..BASES {
        let mut opt = AdamState::new(config.lr);
        let mut shift_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 30 + b as u64));
        for epoch in 0..config.epochs {
            let order = epoch_order(config.seed, 10 + b as u64, epoch as u64, tr.rows.len());
            for idx in order.chunks(config.batch) {
                let mut tape = Tape::new();
                let rows = shifted_batch(&tr.rows, idx, &mut shift_rng);
                let x = tape.constant(Tensor::new(vec![idx.len(), tr.rows[0].len()], rows)?);
                let mut bind = Binding::trainable();
                let base = model.base_mut(b);
                let y = base.logits(&mut tape, x, &mut bind)?;
                let cls: Vec<usize> = idx.iter().map(|&i| tr.classes[i]).collect();
                let loss = tape.cross_entropy(y, &cls)?;
                let grads = tape.backward(loss)?;
                let g: Vec<Tensor> = bind.vars.iter().map(|&v| grads.wrt(v)).collect();
                opt.step(&mut base.params_mut(), &g)?;
            }
        }
    }
    finish(model, &tr, test, config)
}

/// Retrains only the meta-classifier of `model`, honouring its ablation mask.
/// The meta-classifier restarts from its seeded initialisation.
pub fn retrain_meta(
    model: &LcEnsembleModel,
    train: &[ContaminatedPair],
    test: &[ContaminatedPair],
    config: &MetaConfig,
) -> Result<MetaOutcome> {
    let tr = label(train)?;
    require_all_levels(&tr)?;
    let mut m = model.clone();
    m.meta = build_lc_ensemble(m.seed).meta;
    finish(m, &tr, test, config)
}

fn finish(mut model: LcEnsembleModel, tr: &Labeled, test: &[ContaminatedPair], config: &MetaConfig) -> Result<MetaOutcome> {
    let refs: Vec<&[f64]> = tr.rows.iter().map(Vec::as_slice).collect();
    let feats = model.meta_features(&refs)?;
    let width = BASES * CLASSES;
    let feat_rows: Vec<Vec<f64>> = feats.chunks(width).map(<[f64]>::to_vec).collect();
    let mut opt = AdamState::new(config.lr);
    for epoch in 0..config.meta_epochs {
        let order = epoch_order(config.seed, 20, epoch as u64, feat_rows.len());
        for idx in order.chunks(config.batch) {
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(vec![idx.len(), width], gather(&feat_rows, idx))?);
            let mut bind = Binding::trainable();
            let y = model.meta.logits(&mut tape, x, &mut bind)?;
            let cls: Vec<usize> = idx.iter().map(|&i| tr.classes[i]).collect();
            let loss = tape.cross_entropy(y, &cls)?;
            let grads = tape.backward(loss)?;
            let g: Vec<Tensor> = bind.vars.iter().map(|&v| grads.wrt(v)).collect();
            opt.step(&mut model.meta.params_mut(), &g)?;
        }
    }
    let (accuracy, mean_loss) = evaluate_meta(&model, test)?;
    let te = label(test)?;
    let trefs: Vec<&[f64]> = te.rows.iter().map(Vec::as_slice).collect();
    let mut base_accuracy = [0.0; BASES];
    let tf = model.meta_features(&trefs)?;
    for (b, acc) in base_accuracy.iter_mut().enumerate() {
        if !model.active[b] {
            continue;
        }
        let hits = tf
            .chunks(width)
            .zip(&te.classes)
            .filter(|(f, &c)| {
                let p = &f[b * CLASSES..(b + 1) * CLASSES];
                argmax_level(&[p[0], p[1], p[2]]).index() == c
            })
            .count();
        *acc = hits as f64 / te.classes.len() as f64;
    }
    Ok(MetaOutcome {
        model,
        accuracy,
        mean_loss,
        base_accuracy,
    })
}

/// Accuracy and mean cross-entropy of the stacked prediction on labelled pairs.
pub fn evaluate_meta(model: &LcEnsembleModel, pairs: &[ContaminatedPair]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let te = label(pairs)?;
    let refs: Vec<&[f64]> = te.rows.iter().map(Vec::as_slice).collect();
    let probs = model.predict_normalized(&refs)?;
    let mut hits = 0;
    let mut loss = 0.0;
    for (p, &c) in probs.iter().zip(&te.classes) {
        if argmax_level(p).index() == c {
            hits += 1;
        }
        loss -= p[c].max(1e-300).ln();
    }
    let n = pairs.len() as f64;
    Ok((hits as f64 / n, loss / n))
}
