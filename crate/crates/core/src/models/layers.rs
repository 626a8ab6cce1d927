use rand::Rng;

use crate::error::Result;
use crate::gradnet::init::{kaiming_uniform, xavier_uniform};
use crate::gradnet::{Mode, RunningStats, Tape, Tensor, Var, WeightFile};

/// Records the tape handles of parameters in the order a forward pass binds them.
/// Frozen bindings put parameters on the tape as constants.
pub struct Binding {
    pub vars: Vec<Var>,
    trainable: bool,
}

impl Binding {
    pub fn trainable() -> Self {
        Self {
            vars: Vec::new(),
            trainable: true,
        }
    }

    pub fn frozen() -> Self {
        Self {
            vars: Vec::new(),
            trainable: false,
        }
    }

    pub(crate) fn bind(&mut self, tape: &mut Tape, t: &Tensor) -> Var {
        let v = if self.trainable {
            tape.leaf(t.clone())
        } else {
            tape.constant(t.clone())
        };
        self.vars.push(v);
        v
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Init {
    /// Feeds a ReLU-family activation.
    Kaiming,
    /// Feeds a sigmoid or tanh.
    Xavier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Conv1dLayer {
    pub(crate) fn new<R: Rng + ?Sized>(rng: &mut R, cin: usize, cout: usize, k: usize, init: Init) -> Self {
        let shape = [cout, cin, k];
        let weight = match init {
            Init::Kaiming => kaiming_uniform(rng, &shape, cin * k),
            Init::Xavier => xavier_uniform(rng, &shape, cin * k, cout * k),
        };
        Self {
            weight,
            bias: Tensor::zeros(&[cout]),
        }
    }

    pub(crate) fn forward(&self, tape: &mut Tape, x: Var, b: &mut Binding) -> Result<Var> {
        let w = b.bind(tape, &self.weight);
        let bias = b.bind(tape, &self.bias);
        tape.conv1d(x, w, bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub stats: RunningStats,
}

impl BatchNormLayer {
    pub(crate) fn new(c: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[c], 1.0),
            beta: Tensor::zeros(&[c]),
            stats: RunningStats::new(c),
        }
    }

    pub(crate) fn forward(&mut self, tape: &mut Tape, x: Var, mode: Mode, b: &mut Binding) -> Result<Var> {
        let g = b.bind(tape, &self.gamma);
        let be = b.bind(tape, &self.beta);
        tape.batchnorm1d(x, g, be, mode, &mut self.stats)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DenseLayer {
    pub(crate) fn new<R: Rng + ?Sized>(rng: &mut R, fin: usize, fout: usize, init: Init) -> Self {
        let shape = [fout, fin];
        let weight = match init {
            Init::Kaiming => kaiming_uniform(rng, &shape, fin),
            Init::Xavier => xavier_uniform(rng, &shape, fin, fout),
        };
        Self {
            weight,
            bias: Tensor::zeros(&[fout]),
        }
    }

    pub(crate) fn forward(&self, tape: &mut Tape, x: Var, b: &mut Binding) -> Result<Var> {
        let w = b.bind(tape, &self.weight);
        let bias = b.bind(tape, &self.bias);
        tape.dense(x, w, bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

impl LstmLayer {
    pub(crate) fn new<R: Rng + ?Sized>(rng: &mut R, input: usize, hidden: usize) -> Self {
        let w_ih = xavier_uniform(rng, &[4 * hidden, input], input, hidden);
        let w_hh = xavier_uniform(rng, &[4 * hidden, hidden], hidden, hidden);
        let mut bias = Tensor::zeros(&[4 * hidden]);
        bias.data_mut()[hidden..2 * hidden]
            .iter_mut()
            .for_each(|v| *v = 1.0);
        Self { w_ih, w_hh, bias }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.shape()[1]
    }

    pub(crate) fn forward(&self, tape: &mut Tape, x: Var, b: &mut Binding) -> Result<Var> {
        let wi = b.bind(tape, &self.w_ih);
        let wh = b.bind(tape, &self.w_hh);
        let bias = b.bind(tape, &self.bias);
        tape.lstm(x, wi, wh, bias)
    }
}

/// Uniform access to the parameters and persistent state of a network.
///
/// `params_mut` must list tensors in the same order a trainable forward pass binds
/// them, so gradients line up with parameters positionally.
pub trait Network {
    /// Architecture tag written into bundles.
    fn architecture(&self) -> &'static str;

    fn named_params(&self) -> Vec<(String, &Tensor)>;

    fn params_mut(&mut self) -> Vec<&mut Tensor>;

    fn named_stats(&self) -> Vec<(String, &RunningStats)> {
        Vec::new()
    }

    fn stats_mut(&mut self) -> Vec<&mut RunningStats> {
        Vec::new()
    }

    /// Trainable scalar count (running statistics excluded).
    fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.len()).sum()
    }

    fn to_weights(&self) -> WeightFile {
        let mut wf = WeightFile::new();
        wf.set_meta("architecture", self.architecture());
        for (name, t) in self.named_params() {
            wf.push(name, t.clone());
        }
        for (name, s) in self.named_stats() {
            wf.push(format!("{name}.running_mean"), Tensor::vector(&s.mean));
            wf.push(format!("{name}.running_var"), Tensor::vector(&s.var));
        }
        wf
    }

    fn load_weights(&mut self, wf: &WeightFile) -> Result<()> {
        if let Some(arch) = wf.meta("architecture") {
            if arch != self.architecture() {
                return Err(crate::Error::Format(format!(
                    "bundle holds '{arch}', expected '{}'",
                    self.architecture()
                )));
            }
        }
        let names: Vec<String> = self.named_params().into_iter().map(|(n, _)| n).collect();
        for (name, dst) in names.iter().zip(self.params_mut()) {
            wf.load_into(name, dst)?;
        }
        let snames: Vec<String> = self.named_stats().into_iter().map(|(n, _)| n).collect();
        for (name, dst) in snames.iter().zip(self.stats_mut()) {
            let mut m = Tensor::vector(&dst.mean);
            let mut v = Tensor::vector(&dst.var);
            wf.load_into(&format!("{name}.running_mean"), &mut m)?;
            wf.load_into(&format!("{name}.running_var"), &mut v)?;
            dst.mean = m.into_data();
            dst.var = v.into_data();
        }
        Ok(())
    }
}

/// Trainable parameter count of any network.
pub fn count_params(model: &dyn Network) -> usize {
    model.param_count()
}
