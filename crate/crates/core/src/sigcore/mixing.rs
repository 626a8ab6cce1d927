use super::{check_same_len, rms, Segment};
use crate::error::{Error, Result};

/// A clean segment, the artifact that contaminates it and the resulting mixture
/// `mixture = clean + lambda * artifact`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminatedPair {
    pub clean: Segment,
    pub artifact: Segment,
    pub lambda: f64,
    pub mixture: Segment,
    pub snr_db: f64,
}

impl ContaminatedPair {
    /// SNR recomputed from the stored components.
    pub fn realized_snr_db(&self) -> f64 {
        realized_snr_db(&self.clean, &self.artifact, self.lambda)
    }
}

/// `10 * log10(RMS(clean) / RMS(lambda * artifact))`.
pub fn realized_snr_db(clean: &Segment, artifact: &Segment, lambda: f64) -> f64 {
    10.0 * (clean.rms() / (lambda.abs() * artifact.rms())).log10()
}

/// Scales `artifact` so that the mixture hits `snr_db` under the RMS-ratio convention.
pub fn mix_at_snr(clean: &Segment, artifact: &Segment, snr_db: f64) -> Result<ContaminatedPair> {
    check_same_len(clean.samples(), artifact.samples())?;
    let rms_noise = rms(artifact.samples());
    if rms_noise == 0.0 {
        return Err(Error::DegenerateArtifact);
    }
    let rms_clean = rms(clean.samples());
    if rms_clean == 0.0 {
        return Err(Error::DegenerateClean);
    }
    if !snr_db.is_finite() {
        return Err(Error::Format(format!("non-finite SNR {snr_db}")));
    }
    let lambda = rms_clean / (rms_noise * 10f64.powf(snr_db / 10.0));
    let mixture = clean
        .samples()
        .iter()
        .zip(artifact.samples())
        .map(|(x, n)| x + lambda * n)
        .collect();
    Ok(ContaminatedPair {
        clean: clean.clone(),
        artifact: artifact.clone(),
        lambda,
        mixture: Segment::with_rate(mixture, clean.rate_hz())?,
        snr_db,
    })
}
