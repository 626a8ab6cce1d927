use super::spectrum::power_spectrum_of;
use super::{check_same_len, mean, rms, Segment};
use crate::error::{Error, Result};

/// CC, temporal RRMSE and spectral RRMSE of one estimate against its ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsTriple {
    pub cc: f64,
    pub trrmse: f64,
    pub srrmse: f64,
}

/// Population Pearson correlation. Zero-variance inputs yield 0.
pub fn pearson_cc(a: &Segment, b: &Segment) -> Result<f64> {
    pearson_slices(a.samples(), b.samples())
}

pub(crate) fn pearson_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    check_same_len(a, b)?;
    if a.len() < 2 {
        return Err(Error::TooShort(a.len()));
    }
    Ok(pearson_unchecked(a, b))
}

pub(crate) fn pearson_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

fn relative_rms(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    check_same_len(estimate, truth)?;
    let denom = rms(truth);
    if denom == 0.0 {
        return Err(Error::DegenerateTruth);
    }
    let num = (estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t) * (e - t))
        .sum::<f64>()
        / truth.len() as f64)
        .sqrt();
    Ok(num / denom)
}

/// `RMS(estimate - truth) / RMS(truth)`.
pub fn trrmse(estimate: &Segment, truth: &Segment) -> Result<f64> {
    relative_rms(estimate.samples(), truth.samples())
}

/// Relative RMS error between power spectra.
pub fn srrmse(estimate: &Segment, truth: &Segment) -> Result<f64> {
    check_same_len(estimate.samples(), truth.samples())?;
    let pe = power_spectrum_of(estimate.samples())?;
    let pt = power_spectrum_of(truth.samples())?;
    relative_rms(&pe.bins, &pt.bins)
}

pub fn metrics_triple(estimate: &Segment, truth: &Segment) -> Result<MetricsTriple> {
    Ok(MetricsTriple {
        cc: pearson_cc(estimate, truth)?,
        trrmse: trrmse(estimate, truth)?,
        srrmse: srrmse(estimate, truth)?,
    })
}
