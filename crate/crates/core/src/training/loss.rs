use crate::error::{Error, Result};
use crate::gradnet::{Tape, Tensor, Var};
use crate::sigcore::Segment;

/// Weights of the reconstruction loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub w_cc: f64,
    pub w_spec: f64,
    pub w_ent: f64,
    pub eps_var: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            w_cc: 1.0,
            w_spec: 0.5,
            w_ent: 0.01,
            eps_var: 1e-6,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_cc, self.w_spec, self.w_ent, self.eps_var];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.eps_var == 0.0 {
            return Err(Error::InvalidParams(format!("loss weights {self:?}")));
        }
        Ok(())
    }
}

/// Records `w_cc (1 - CC) + w_spec SpecDiv + w_ent (-ln(Var + eps))`, averaged over
/// rows. `truth` holds one target row per output row; its scale is irrelevant.
pub fn ae_loss(tape: &mut Tape, output: Var, truth: &[f64], w: &LossWeights) -> Result<Var> {
    let cc = tape.pearson_loss(output, truth)?;
    let spec = tape.spectral_divergence(output, truth)?;
    let ent = tape.neg_log_var(output, w.eps_var);
    tape.weighted_sum(&[(cc, w.w_cc), (spec, w.w_spec), (ent, w.w_ent)])
}

/// Scalar loss of a single output segment against its truth.
pub fn ae_loss_value(output: &Segment, truth: &Segment, w: &LossWeights) -> Result<f64> {
    if output.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: output.len(),
            right: truth.len(),
        });
    }
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::vector(output.samples()));
    let l = ae_loss(&mut tape, x, truth.samples(), w)?;
    Ok(tape.value(l).item())
}
