use std::path::Path;

use crate::error::{Error, Result};
use crate::gradnet::{Tensor, WeightFile};
use crate::models::AutoencoderModel;
use crate::sigcore::{self, normalize_minmax, ContaminatedPair, SnrLevel};

/// Fewest pairs per level accepted by [`compute_calibration`].
pub const MIN_PER_LEVEL: usize = 30;

/// Dataset-average offset and amplitude ratio for one SNR level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelCalibration {
    /// Mean of `mean(truth) - mean(raw output)`.
    pub mu: f64,
    /// Mean of `std(truth) / std(raw output)`.
    pub rho: f64,
    pub count: usize,
}

/// Fallback rescale statistics plus the amplitude scale used for discriminator inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationStats {
    pub levels: [Option<LevelCalibration>; 3],
    /// 99th percentile of absolute ground-truth amplitude.
    pub p99: f64,
}

impl CalibrationStats {
    pub fn uniform(mu: f64, rho: f64, p99: f64) -> Self {
        let c = Some(LevelCalibration { mu, rho, count: 0 });
        Self {
            levels: [c; 3],
            p99,
        }
    }

    pub fn level(&self, level: SnrLevel) -> Result<&LevelCalibration> {
        self.levels[level.index()]
            .as_ref()
            .ok_or(Error::MissingCalibration(level.name()))
    }

    pub fn to_weights(&self) -> WeightFile {
        let mut wf = WeightFile::new();
        wf.set_meta("architecture", "calibration-v1");
        for level in SnrLevel::ALL {
            if let Some(c) = &self.levels[level.index()] {
                wf.push(
                    format!("level.{}", level.name()),
                    Tensor::vector(&[c.mu, c.rho, c.count as f64]),
                );
            }
        }
        wf.push("p99", Tensor::scalar(self.p99));
        wf
    }

    pub fn from_weights(wf: &WeightFile) -> Result<Self> {
        let mut levels = [None; 3];
        for level in SnrLevel::ALL {
            if let Ok(t) = wf.get(&format!("level.{}", level.name())) {
                let d = t.data();
                if d.len() != 3 || !(d[1] > 0.0) {
                    return Err(Error::Format(format!("bad calibration for {level}")));
                }
                levels[level.index()] = Some(LevelCalibration {
                    mu: d[0],
                    rho: d[1],
                    count: d[2] as usize,
                });
            }
        }
        let p99 = wf.get("p99")?.item();
        Ok(Self { levels, p99 })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_weights().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_weights(&WeightFile::load(path)?)
    }
}

/// Nearest-rank percentile of absolute values.
pub(crate) fn abs_percentile(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    let mut v: Vec<f64> = values.map(f64::abs).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Level of a pair from its SNR label.
pub fn pair_level(pair: &ContaminatedPair) -> Result<SnrLevel> {
    SnrLevel::from_db(pair.snr_db).ok_or_else(|| {
        Error::InsufficientData(format!("{} dB is not one of the three levels", pair.snr_db))
    })
}

/// Statistics from an arbitrary raw denoiser `f`, which maps mixtures to raw outputs.
pub fn compute_calibration_with<F>(pairs: &[ContaminatedPair], f: F) -> Result<CalibrationStats>
where
    F: Fn(&[&[f64]]) -> Result<Vec<Vec<f64>>>,
{
    let mut sums = [(0.0, 0.0, 0usize); 3];
    for chunk in pairs.chunks(32) {
        let rows: Vec<&[f64]> = chunk.iter().map(|p| p.mixture.samples()).collect();
        let outs = f(&rows)?;
        for (p, out) in chunk.iter().zip(&outs) {
            let level = pair_level(p)?;
            let truth = p.clean.samples();
            let sd_out = sigcore::variance(out).sqrt();
            if sd_out == 0.0 {
                return Err(Error::InsufficientData(
                    "raw output with zero variance".into(),
                ));
            }
            let s = &mut sums[level.index()];
            s.0 += sigcore::mean(truth) - sigcore::mean(out);
            s.1 += sigcore::variance(truth).sqrt() / sd_out;
            s.2 += 1;
        }
    }
    let mut levels = [None; 3];
    for level in SnrLevel::ALL {
        let (mu, rho, n) = sums[level.index()];
        if n < MIN_PER_LEVEL {
            return Err(Error::InsufficientData(format!(
                "{n} pairs at {level}, need {MIN_PER_LEVEL}"
            )));
        }
        levels[level.index()] = Some(LevelCalibration {
            mu: mu / n as f64,
            rho: rho / n as f64,
            count: n,
        });
    }
    let p99 = abs_percentile(pairs.iter().flat_map(|p| p.clean.samples().iter().copied()), 0.99);
    Ok(CalibrationStats { levels, p99 })
}

/// Raw (unscaled) autoencoder outputs for mixtures: min-max normalize, then Eval forward.
pub fn raw_ae_outputs(ae: &AutoencoderModel, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    let norm: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let seg = sigcore::Segment::new(r.to_vec())?;
            Ok(normalize_minmax(&seg)?.0.into_samples())
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&[f64]> = norm.iter().map(Vec::as_slice).collect();
    ae.infer(&refs)
}

pub fn compute_calibration(pairs: &[ContaminatedPair], ae: &AutoencoderModel) -> Result<CalibrationStats> {
    compute_calibration_with(pairs, |rows| raw_ae_outputs(ae, rows))
}
