//! End-to-end inference, the benchmark harness and report emission.
//!
//! A mixture is classified by the ensemble, min-max normalized, reconstructed by
//! the autoencoder and finally rescaled against the original mixture. The
//! normalization constants are never inverted: scale targeting recovers amplitude
//! from the mixture itself.

mod bench;
mod config;
mod corpus;
mod report;

use std::time::Instant;

pub use bench::{bench_corpus, bench_pairs, bench_run, BenchReport, Denoiser, LevelSummary, MetricStats, SegmentRecord};
pub use config::{parse_entries, DatasetSource, PipelineConfig};
pub use corpus::{load_corpus_dir, save_corpus_dir};
pub use report::{histogram, report_emit, Histogram, HIST_BINS};

use crate::error::{Error, Result};
use crate::models::{
    count_params, load_autoencoder, load_lc_ensemble, AutoencoderModel, LcEnsembleModel,
};
use crate::sigcore::{normalize_minmax, Segment, SnrLevel};
use crate::targeting::{scale_targeting, RescaleOutcome};
use crate::training::CalibrationStats;

/// Everything the inference path needs.
#[derive(Debug, Clone)]
pub struct Models {
    pub lc: LcEnsembleModel,
    pub ae: AutoencoderModel,
    pub calibration: CalibrationStats,
}

impl Models {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        config.check_paths()?;
        let get = |p: &Option<std::path::PathBuf>| p.clone().expect("checked above");
        Ok(Self {
            lc: load_lc_ensemble(&get(&config.lc_path))?,
            ae: load_autoencoder(&get(&config.ae_path))?,
            calibration: CalibrationStats::load(&get(&config.calibration_path))?,
        })
    }

    pub fn param_count(&self) -> usize {
        count_params(&self.lc) + count_params(&self.ae)
    }
}

/// Wall-clock time per stage, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageLatency {
    pub meta_us: f64,
    pub ae_us: f64,
    pub rescale_us: f64,
}

impl StageLatency {
    pub fn total_us(&self) -> f64 {
        self.meta_us + self.ae_us + self.rescale_us
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseResult {
    pub output: Segment,
    pub level: SnrLevel,
    pub probabilities: [f64; 3],
    pub outcome: RescaleOutcome,
    pub latency: StageLatency,
}

fn elapsed_us(t: Instant) -> f64 {
    // Keep latencies strictly positive even on coarse clocks.
    (t.elapsed().as_secs_f64() * 1e6).max(1e-3)
}

pub fn denoise_segment(mixture: &Segment, models: &Models, config: &PipelineConfig) -> Result<DenoiseResult> {
    let t = Instant::now();
    let (norm, _, _) = normalize_minmax(mixture)?;
    let probs = models.lc.predict_normalized(&[norm.samples()])?[0];
    let level = crate::models::argmax_level(&probs);
    let meta_us = elapsed_us(t);

    let t = Instant::now();
    let raw = models
        .ae
        .infer(&[norm.samples()])?
        .pop()
        .ok_or(Error::InvalidCount(0))?;
    let raw = Segment::with_rate(raw, mixture.rate_hz())?;
    let ae_us = elapsed_us(t);

    let t = Instant::now();
    let (output, outcome) = scale_targeting(
        &raw,
        mixture,
        config.params_for(level),
        &models.calibration,
        level,
    )?;
    let rescale_us = elapsed_us(t);

    Ok(DenoiseResult {
        output,
        level,
        probabilities: probs,
        outcome,
        latency: StageLatency {
            meta_us,
            ae_us,
            rescale_us,
        },
    })
}
