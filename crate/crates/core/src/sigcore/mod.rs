//! Signal representation, SNR-controlled mixing, spectra and evaluation metrics.

mod corpus;
mod io;
mod metrics;
mod mixing;
mod spectrum;
mod synth;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use corpus::synth_corpus;
pub(crate) use corpus::derive_seed;
pub use io::{read_segments, write_segments, SegmentFormat, BIN_MAGIC};
pub use metrics::{metrics_triple, pearson_cc, srrmse, trrmse, MetricsTriple};
pub(crate) use metrics::pearson_unchecked;
pub use mixing::{mix_at_snr, realized_snr_db, ContaminatedPair};
pub use spectrum::{power_spectrum, PowerSpectrum};
pub(crate) use spectrum::fft_in_place;
pub use synth::{
    synth_artifact, synth_artifact_annotated, synth_clean, AnnotatedArtifact, ArtifactKind,
};

/// Samples per pipeline segment (2 s at 256 Hz).
pub const SEGMENT_LEN: usize = 512;
/// Default sampling rate in Hz.
pub const SAMPLE_RATE_HZ: f64 = 256.0;

/// A finite, fixed-rate, real-valued time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    samples: Vec<f64>,
    rate_hz: f64,
}

impl Segment {
    /// Builds a segment at the default rate, rejecting non-finite samples.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        Self::with_rate(samples, SAMPLE_RATE_HZ)
    }

    pub fn with_rate(samples: Vec<f64>, rate_hz: f64) -> Result<Self> {
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::Format(format!("invalid sampling rate {rate_hz}")));
        }
        Ok(Self { samples, rate_hz })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_finite(samples: Vec<f64>, rate_hz: f64) -> Self {
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self { samples, rate_hz }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        variance(&self.samples).sqrt()
    }

    /// Applies `f` samplewise; the result must stay finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Segment> {
        Segment::with_rate(self.samples.iter().map(|&v| f(v)).collect(), self.rate_hz)
    }

    /// Circular shift to the right by `k` samples.
    pub fn rotate(&self, k: usize) -> Segment {
        let mut s = self.samples.clone();
        if !s.is_empty() {
            let k = k % s.len();
            s.rotate_right(k);
        }
        Segment::from_finite(s, self.rate_hz)
    }
}

/// Contamination level targeted by the mixing protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SnrLevel {
    Low,
    Mid,
    High,
}

impl SnrLevel {
    pub const ALL: [SnrLevel; 3] = [SnrLevel::Low, SnrLevel::Mid, SnrLevel::High];

    pub fn db(self) -> f64 {
        match self {
            SnrLevel::Low => -7.0,
            SnrLevel::Mid => -2.5,
            SnrLevel::High => 2.0,
        }
    }

    /// Class index used by the meta-targeter (ascending SNR).
    pub fn index(self) -> usize {
        match self {
            SnrLevel::Low => 0,
            SnrLevel::Mid => 1,
            SnrLevel::High => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Exact match against one of the three dB values.
    pub fn from_db(db: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|l| (l.db() - db).abs() < 1e-9)
    }

    pub fn name(self) -> &'static str {
        match self {
            SnrLevel::Low => "low",
            SnrLevel::Mid => "mid",
            SnrLevel::High => "high",
        }
    }
}

impl fmt::Display for SnrLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SnrLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" | "-7" => Ok(SnrLevel::Low),
            "mid" | "-2.5" => Ok(SnrLevel::Mid),
            "high" | "2" => Ok(SnrLevel::High),
            other => Err(Error::Format(format!("unknown SNR level '{other}'"))),
        }
    }
}

/// Min-max normalization to [0, 1], returning the offset and span that invert it.
pub fn normalize_minmax(seg: &Segment) -> Result<(Segment, f64, f64)> {
    let (lo, hi) = seg
        .samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if seg.is_empty() || !(span > 0.0) {
        return Err(Error::DegenerateSpan);
    }
    let out = seg.samples.iter().map(|&v| (v - lo) / span).collect();
    Ok((Segment::from_finite(out, seg.rate_hz), lo, span))
}

/// Inverse of [`normalize_minmax`].
pub fn denormalize_minmax(seg: &Segment, offset: f64, span: f64) -> Segment {
    let out = seg.samples.iter().map(|&v| v * span + offset).collect();
    Segment::from_finite(out, seg.rate_hz)
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub(crate) fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Segment::new(vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
    }

    #[test]
    fn minmax_example() {
        let seg = Segment::new(vec![0.0, 5.0, 10.0]).unwrap();
        let (n, off, span) = normalize_minmax(&seg).unwrap();
        assert_eq!(n.samples(), &[0.0, 0.5, 1.0]);
        assert_eq!(off, 0.0);
        assert_eq!(span, 10.0);
    }

    #[test]
    fn minmax_constant_is_degenerate() {
        let seg = Segment::new(vec![3.0; 8]).unwrap();
        assert!(matches!(normalize_minmax(&seg), Err(Error::DegenerateSpan)));
    }

    #[test]
    fn snr_level_round_trip() {
        for l in SnrLevel::ALL {
            assert_eq!(SnrLevel::from_index(l.index()), Some(l));
            assert_eq!(SnrLevel::from_db(l.db()), Some(l));
            assert_eq!(l.name().parse::<SnrLevel>().unwrap(), l);
        }
        assert_eq!(SnrLevel::Low.db(), -7.0);
        assert_eq!(SnrLevel::Mid.db(), -2.5);
        assert_eq!(SnrLevel::High.db(), 2.0);
    }

    proptest::proptest! {
        #[test]
        fn minmax_round_trip(xs in proptest::collection::vec(-1e3f64..1e3, 2..600)) {
            let seg = Segment::new(xs).unwrap();
            if let Ok((n, off, span)) = normalize_minmax(&seg) {
                proptest::prop_assert!(n.samples().iter().all(|v| (0.0..=1.0).contains(v)));
                let back = denormalize_minmax(&n, off, span);
                for (a, b) in back.samples().iter().zip(seg.samples()) {
                    proptest::prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }
}
