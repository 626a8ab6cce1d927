//! Seeded proxy generators standing in for a recorded clean/artifact corpus.
//!
//! Clean segments are sums of a handful of low-frequency sinusoids with 1/f
//! amplitudes. Artifacts are band-limited 20–120 Hz noise, either spread over the
//! whole segment or confined to a few short bursts.

use std::f64::consts::PI;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::spectrum::fft_in_place;
use super::{mean, rms, Segment, SAMPLE_RATE_HZ, SEGMENT_LEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    Continuous,
    Spike,
}

impl std::str::FromStr for ArtifactKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Ok(ArtifactKind::Continuous),
            "spike" => Ok(ArtifactKind::Spike),
            other => Err(Error::Format(format!("unknown artifact kind '{other}'"))),
        }
    }
}

/// An artifact segment together with the sample ranges of its bursts
/// (empty for continuous artifacts).
#[derive(Debug, Clone)]
pub struct AnnotatedArtifact {
    pub segment: Segment,
    pub kind: ArtifactKind,
    pub bursts: Vec<Range<usize>>,
}

/// Deterministic proxy clean segments (512 samples, zero mean).
pub fn synth_clean(seed: u64, n: usize) -> Result<Vec<Segment>> {
    if n == 0 {
        return Err(Error::InvalidCount(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| clean_one(&mut rng)).collect())
}

fn clean_one(rng: &mut ChaCha8Rng) -> Segment {
    let components = rng.random_range(5..=12);
    let mut x = vec![0.0; SEGMENT_LEN];
    for _ in 0..components {
        let f = rng.random_range(1.0..40.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        let amp = rng.random_range(0.5..1.5) / f;
        for (t, v) in x.iter_mut().enumerate() {
            *v += amp * (2.0 * PI * f * t as f64 / SAMPLE_RATE_HZ + phase).sin();
        }
    }
    let floor = 0.03 * rms(&x);
    for v in x.iter_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += floor * e;
    }
    let m = mean(&x);
    let gain = rng.random_range(10.0..40.0) / rms(&x).max(f64::MIN_POSITIVE);
    for v in x.iter_mut() {
        *v = (*v - m) * gain;
    }
    Segment::from_finite(x, SAMPLE_RATE_HZ)
}

/// Deterministic proxy artifact segments of one kind.
pub fn synth_artifact(seed: u64, n: usize, kind: ArtifactKind) -> Result<Vec<Segment>> {
    Ok(synth_artifact_annotated(seed, n, kind)?
        .into_iter()
        .map(|a| a.segment)
        .collect())
}

pub fn synth_artifact_annotated(
    seed: u64,
    n: usize,
    kind: ArtifactKind,
) -> Result<Vec<AnnotatedArtifact>> {
    if n == 0 {
        return Err(Error::InvalidCount(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| match kind {
            ArtifactKind::Continuous => continuous_one(&mut rng),
            ArtifactKind::Spike => spike_one(&mut rng),
        })
        .collect())
}

/// Unit-RMS Gaussian noise restricted to `[lo_hz, hi_hz]`.
fn band_noise(rng: &mut ChaCha8Rng, n: usize, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    let mut re: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut im = vec![0.0; n];
    fft_in_place(&mut re, &mut im, false);
    for k in 0..n {
        let kk = if k <= n / 2 { k } else { n - k };
        let hz = kk as f64 * SAMPLE_RATE_HZ / n as f64;
        if hz < lo_hz || hz > hi_hz {
            re[k] = 0.0;
            im[k] = 0.0;
        }
    }
    fft_in_place(&mut re, &mut im, true);
    let scale = rms(&re);
    re.iter().map(|v| v / scale).collect()
}

fn continuous_one(rng: &mut ChaCha8Rng) -> AnnotatedArtifact {
    let noise = band_noise(rng, SEGMENT_LEN, 20.0, 120.0);
    let fm = rng.random_range(0.5..3.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    let depth = rng.random_range(0.1..0.4);
    let x = noise
        .iter()
        .enumerate()
        .map(|(t, v)| v * (1.0 + depth * (2.0 * PI * fm * t as f64 / SAMPLE_RATE_HZ + phase).sin()))
        .collect();
    AnnotatedArtifact {
        segment: Segment::from_finite(x, SAMPLE_RATE_HZ),
        kind: ArtifactKind::Continuous,
        bursts: Vec::new(),
    }
}

fn spike_one(rng: &mut ChaCha8Rng) -> AnnotatedArtifact {
    let noise = band_noise(rng, SEGMENT_LEN, 20.0, 120.0);
    let count = rng.random_range(1..=3);
    let max_len = (0.2 * SAMPLE_RATE_HZ) as usize;
    let mut x: Vec<f64> = (0..SEGMENT_LEN)
        .map(|_| 0.01 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let mut bursts = Vec::with_capacity(count);
    for _ in 0..count {
        let len = rng.random_range(13..=max_len);
        let start = rng.random_range(0..=SEGMENT_LEN - len);
        let amp = rng.random_range(1.0..3.0);
        for j in 0..len {
            let env = 0.5 - 0.5 * (2.0 * PI * (j as f64 + 0.5) / len as f64).cos();
            x[start + j] += amp * env * noise[start + j];
        }
        bursts.push(start..start + len);
    }
    AnnotatedArtifact {
        segment: Segment::from_finite(x, SAMPLE_RATE_HZ),
        kind: ArtifactKind::Spike,
        bursts,
    }
}
