use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::autoencoder::KERNEL;
use super::layers::{Binding, Conv1dLayer, DenseLayer, Init, LstmLayer, Network};
use crate::error::{Error, Result};
use crate::gradnet::{Tape, Tensor, Var};
use crate::sigcore::{normalize_minmax, Segment, SnrLevel};

/// Samples per LSTM step: a 512-sample row is read as 64 frames of 8.
pub const FRAME: usize = 8;
pub const CLASSES: usize = 3;
pub const BASES: usize = 3;

fn check_rows(tape: &Tape, x: Var) -> Result<(usize, usize)> {
    match *tape.value(x).shape() {
        [n, l] if l % (FRAME * 8) == 0 => Ok((n, l)),
        ref s => Err(Error::ShapeMismatch(format!("ensemble input {s:?}"))),
    }
}

/// A base predictor mapping `[N, L]` rows to `[N, 3]` class logits.
pub trait BaseModel: Network {
    fn logits(&self, tape: &mut Tape, x: Var, b: &mut Binding) -> Result<Var>;
}

/// LSTM(32) over frames, flattened into a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmBase {
    pub lstm: LstmLayer,
    pub head: DenseLayer,
}

impl BaseModel for LstmBase {
    fn logits(&self, tape: &mut Tape, x: Var, b: &mut Binding) -> Result<Var> {
        let (n, l) = check_rows(tape, x)?;
        let steps = l / FRAME;
        let f = tape.reshape(x, &[n, steps, FRAME])?;
        let h = self.lstm.forward(tape, f, b)?;
        let h = tape.reshape(h, &[n, steps * self.lstm.hidden()])?;
        self.head.forward(tape, h, b)
    }
}

impl Network for LstmBase {
    fn architecture(&self) -> &'static str {
        "lc-lstm-v1"
    }

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("lstm.w_ih".into(), &self.lstm.w_ih),
            ("lstm.w_hh".into(), &self.lstm.w_hh),
            ("lstm.bias".into(), &self.lstm.bias),
            ("head.weight".into(), &self.head.weight),
            ("head.bias".into(), &self.head.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.lstm.w_ih,
            &mut self.lstm.w_hh,
            &mut self.lstm.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

/// Two conv/ReLU/pool stages and a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnBase {
    pub conv1: Conv1dLayer,
    pub conv2: Conv1dLayer,
    pub head: DenseLayer,
}

impl BaseModel for CnnBase {
    fn logits(&self, tape: &mut Tape, x: Var, b: &mut Binding) -> Result<Var> {
        let (n, l) = check_rows(tape, x)?;
        let h = tape.reshape(x, &[n, 1, l])?;
        let h = self.conv1.forward(tape, h, b)?;
        let h = tape.relu(h);
        let h = tape.maxpool2(h)?;
        let h = self.conv2.forward(tape, h, b)?;
        let h = tape.relu(h);
        let h = tape.maxpool2(h)?;
        let h = tape.reshape(h, &[n, 32 * l / 4])?;
        self.head.forward(tape, h, b)
    }
}

impl Network for CnnBase {
    fn architecture(&self) -> &'static str {
        "lc-cnn-v1"
    }

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("conv1.weight".into(), &self.conv1.weight),
            ("conv1.bias".into(), &self.conv1.bias),
            ("conv2.weight".into(), &self.conv2.weight),
            ("conv2.bias".into(), &self.conv2.bias),
            ("head.weight".into(), &self.head.weight),
            ("head.bias".into(), &self.head.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

/// LSTM(16) frame features and a conv(16) feature map pooled three times,
/// concatenated into a two-layer MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBase {
    pub lstm: LstmLayer,
    pub conv: Conv1dLayer,
    pub hidden: DenseLayer,
    pub head: DenseLayer,
}

impl BaseModel for HybridBase {
    fn logits(&self, tape: &mut Tape, x: Var, b: &mut Binding) -> Result<Var> {
        let (n, l) = check_rows(tape, x)?;
        let steps = l / FRAME;
        let f = tape.reshape(x, &[n, steps, FRAME])?;
        let seq = self.lstm.forward(tape, f, b)?;
        let seq = tape.reshape(seq, &[n, steps * self.lstm.hidden()])?;
        let c = tape.reshape(x, &[n, 1, l])?;
        let c = self.conv.forward(tape, c, b)?;
        let mut c = tape.relu(c);
        for _ in 0..3 {
            c = tape.maxpool2(c)?;
        }
        let c = tape.reshape(c, &[n, 16 * l / 8])?;
        let h = tape.concat(&[seq, c])?;
        let h = self.hidden.forward(tape, h, b)?;
        let h = tape.relu(h);
        self.head.forward(tape, h, b)
    }
}

impl Network for HybridBase {
    fn architecture(&self) -> &'static str {
        "lc-hybrid-v1"
    }

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("lstm.w_ih".into(), &self.lstm.w_ih),
            ("lstm.w_hh".into(), &self.lstm.w_hh),
            ("lstm.bias".into(), &self.lstm.bias),
            ("conv.weight".into(), &self.conv.weight),
            ("conv.bias".into(), &self.conv.bias),
            ("hidden.weight".into(), &self.hidden.weight),
            ("hidden.bias".into(), &self.hidden.bias),
            ("head.weight".into(), &self.head.weight),
            ("head.bias".into(), &self.head.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.lstm.w_ih,
            &mut self.lstm.w_hh,
            &mut self.lstm.bias,
            &mut self.conv.weight,
            &mut self.conv.bias,
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

/// MLP over the nine concatenated base probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaClassifier {
    pub hidden: DenseLayer,
    pub head: DenseLayer,
}

impl MetaClassifier {
    /// `x` is `[N, 9]`; returns `[N, 3]` logits.
    pub fn logits(&self, tape: &mut Tape, x: Var, b: &mut Binding) -> Result<Var> {
        let h = self.hidden.forward(tape, x, b)?;
        let h = tape.relu(h);
        self.head.forward(tape, h, b)
    }
}

impl Network for MetaClassifier {
    fn architecture(&self) -> &'static str {
        "lc-meta-v1"
    }

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("hidden.weight".into(), &self.hidden.weight),
            ("hidden.bias".into(), &self.hidden.bias),
            ("head.weight".into(), &self.head.weight),
            ("head.bias".into(), &self.head.bias),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.head.weight,
            &mut self.head.bias,
        ]
    }
}

/// Stacked SNR-level classifier: three base predictors and a meta-classifier.
///
/// Inputs are min-max normalized rows. An inactive base contributes zeros to the
/// meta-classifier input, which is how ablations are expressed.
#[derive(Debug, Clone, PartialEq)]
pub struct LcEnsembleModel {
    pub seed: u64,
    pub lstm: LstmBase,
    pub cnn: CnnBase,
    pub hybrid: HybridBase,
    pub meta: MetaClassifier,
    pub active: [bool; BASES],
}

pub fn build_lc_ensemble(seed: u64) -> LcEnsembleModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let steps = 512 / FRAME;
    let lstm = LstmBase {
        lstm: LstmLayer::new(r, FRAME, 32),
        head: DenseLayer::new(r, steps * 32, CLASSES, Init::Xavier),
    };
    let cnn = CnnBase {
        conv1: Conv1dLayer::new(r, 1, 16, KERNEL, Init::Kaiming),
        conv2: Conv1dLayer::new(r, 16, 32, KERNEL, Init::Kaiming),
        head: DenseLayer::new(r, 32 * 128, CLASSES, Init::Xavier),
    };
    let hybrid = HybridBase {
        lstm: LstmLayer::new(r, FRAME, 16),
        conv: Conv1dLayer::new(r, 1, 16, KERNEL, Init::Kaiming),
        hidden: DenseLayer::new(r, steps * 16 + 16 * 64, 64, Init::Kaiming),
        head: DenseLayer::new(r, 64, CLASSES, Init::Xavier),
    };
    let meta = MetaClassifier {
        hidden: DenseLayer::new(r, BASES * CLASSES, 16, Init::Kaiming),
        head: DenseLayer::new(r, 16, CLASSES, Init::Xavier),
    };
    LcEnsembleModel {
        seed,
        lstm,
        cnn,
        hybrid,
        meta,
        active: [true; BASES],
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl LcEnsembleModel {
    pub fn base(&self, i: usize) -> &dyn BaseModel {
        match i {
            0 => &self.lstm,
            1 => &self.cnn,
            _ => &self.hybrid,
        }
    }

    pub fn base_mut(&mut self, i: usize) -> &mut dyn BaseModel {
        match i {
            0 => &mut self.lstm,
            1 => &mut self.cnn,
            _ => &mut self.hybrid,
        }
    }

    /// Copy with base `i` switched off.
    pub fn ablated(&self, i: usize) -> Self {
        let mut m = self.clone();
        m.active[i] = false;
        m
    }

    /// Meta-classifier inputs: per row, the softmax of each base's logits,
    /// zeroed for inactive bases.
    pub fn meta_features(&self, rows: &[&[f64]]) -> Result<Vec<f64>> {
        let l = rows.first().map_or(0, |r| r.len());
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let mut feats = vec![0.0; rows.len() * BASES * CLASSES];
        for i in 0..BASES {
            if !self.active[i] {
                continue;
            }
            let mut tape = Tape::new();
            let x = tape.constant(Tensor::new(vec![rows.len(), l], data.clone())?);
            let y = self.base(i).logits(&mut tape, x, &mut Binding::frozen())?;
            for (r, lg) in tape.value(y).data().chunks(CLASSES).enumerate() {
                let p = softmax(lg);
                let off = r * BASES * CLASSES + i * CLASSES;
                feats[off..off + CLASSES].copy_from_slice(&p);
            }
        }
        Ok(feats)
    }

    /// Class probabilities for min-max normalized rows.
    pub fn predict_normalized(&self, rows: &[&[f64]]) -> Result<Vec<[f64; CLASSES]>> {
        let feats = self.meta_features(rows)?;
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![rows.len(), BASES * CLASSES], feats)?);
        let y = self.meta.logits(&mut tape, x, &mut Binding::frozen())?;
        Ok(tape
            .value(y)
            .data()
            .chunks(CLASSES)
            .map(|lg| {
                let p = softmax(lg);
                [p[0], p[1], p[2]]
            })
            .collect())
    }

    /// Normalizes the segment and returns the arg-max level with its probabilities.
    pub fn predict(&self, seg: &Segment) -> Result<(SnrLevel, [f64; CLASSES])> {
        let (norm, _, _) = normalize_minmax(seg)?;
        let p = self.predict_normalized(&[norm.samples()])?[0];
        Ok((argmax_level(&p), p))
    }
}

pub fn argmax_level(p: &[f64; CLASSES]) -> SnrLevel {
    let mut best = 0;
    for i in 1..CLASSES {
        if p[i] > p[best] {
            best = i;
        }
    }
    SnrLevel::from_index(best).expect("three classes")
}

impl Network for LcEnsembleModel {
    fn architecture(&self) -> &'static str {
        "lc-ensemble-v1"
    }

    fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (prefix, net) in [
            ("lstm", &self.lstm as &dyn Network),
            ("cnn", &self.cnn),
            ("hybrid", &self.hybrid),
            ("meta", &self.meta),
        ] {
            for (n, t) in net.named_params() {
                out.push((format!("{prefix}.{n}"), t));
            }
        }
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.lstm.params_mut();
        out.extend(self.cnn.params_mut());
        out.extend(self.hybrid.params_mut());
        out.extend(self.meta.params_mut());
        out
    }

    fn to_weights(&self) -> crate::gradnet::WeightFile {
        let mut wf = crate::gradnet::WeightFile::new();
        wf.set_meta("architecture", self.architecture());
        let mask: Vec<&str> = self.active.iter().map(|&a| if a { "1" } else { "0" }).collect();
        wf.set_meta("active", mask.join(","));
        for (name, t) in self.named_params() {
            wf.push(name, t.clone());
        }
        wf
    }
}
