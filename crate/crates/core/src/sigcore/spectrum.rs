use std::f64::consts::PI;

use super::Segment;
use crate::error::{Error, Result};

/// Squared DFT magnitudes from DC through Nyquist (`N/2 + 1` bins), unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub bins: Vec<f64>,
}

impl PowerSpectrum {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Frequency of bin `k` for a segment of length `n` sampled at `rate_hz`.
    pub fn bin_hz(k: usize, n: usize, rate_hz: f64) -> f64 {
        k as f64 * rate_hz / n as f64
    }

    /// Power-weighted mean frequency.
    pub fn centroid_hz(&self, n: usize, rate_hz: f64) -> f64 {
        let total: f64 = self.bins.iter().sum();
        if total == 0.0 {
            return 0.0;
        }
        self.bins
            .iter()
            .enumerate()
            .map(|(k, p)| Self::bin_hz(k, n, rate_hz) * p)
            .sum::<f64>()
            / total
    }
}

/// In-place iterative radix-2 FFT. `inverse` flips the twiddle sign and does not
/// divide by `n`.
pub(crate) fn fft_in_place(re: &mut [f64], im: &mut [f64], inverse: bool) {
    let n = re.len();
    debug_assert_eq!(n, im.len());
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        // twiddles computed directly per index; repeated multiplication drifts
        let tw: Vec<(f64, f64)> = (0..half)
            .map(|k| {
                let a = step * k as f64;
                (a.cos(), a.sin())
            })
            .collect();
        for start in (0..n).step_by(len) {
            for (k, &(wr, wi)) in tw.iter().enumerate() {
                let a = start + k;
                let b = a + half;
                let tr = re[b] * wr - im[b] * wi;
                let ti = re[b] * wi + im[b] * wr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
            }
        }
        len <<= 1;
    }
}

/// Squared-magnitude spectrum of a real signal whose length is a power of two.
pub fn power_spectrum(seg: &Segment) -> Result<PowerSpectrum> {
    power_spectrum_of(seg.samples())
}

pub(crate) fn power_spectrum_of(x: &[f64]) -> Result<PowerSpectrum> {
    let n = x.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::NonPowerOfTwoLength(n));
    }
    let mut re = x.to_vec();
    let mut im = vec![0.0; n];
    fft_in_place(&mut re, &mut im, false);
    let bins = (0..=n / 2).map(|k| re[k] * re[k] + im[k] * im[k]).collect();
    Ok(PowerSpectrum { bins })
}
