//! Covariance-driven logistic scale targeting.
//!
//! The raw autoencoder output `A` is affinely mapped onto the amplitude scale of the
//! contaminated input `B`, using only windows where the two agree strongly. Two
//! fallbacks exist: no agreeing window at all, and an output whose peak exceeds
//! `B`'s envelope by more than `anomaly_factor`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sigcore::{self, pearson_unchecked, Segment, SnrLevel};
use crate::training::CalibrationStats;

/// Logistic steepness applied to `r - tau`.
pub const STEEPNESS: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetingParams {
    pub tau: f64,
    pub window: usize,
    pub fir_taps: usize,
    pub anomaly_factor: f64,
}

impl Default for TargetingParams {
    fn default() -> Self {
        Self {
            tau: 0.8,
            window: 32,
            fir_taps: 5,
            anomaly_factor: 1.5,
        }
    }
}

impl TargetingParams {
    pub fn new(tau: f64, window: usize, fir_taps: usize, anomaly_factor: f64) -> Result<Self> {
        let p = Self {
            tau,
            window,
            fir_taps,
            anomaly_factor,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParams(format!("tau {} outside (0, 1)", self.tau)));
        }
        if self.window < 2 {
            return Err(Error::InvalidParams(format!("window {} below 2", self.window)));
        }
        if self.fir_taps == 0 || self.fir_taps.is_multiple_of(2) {
            return Err(Error::InvalidTaps(self.fir_taps));
        }
        if !(self.anomaly_factor > 1.0 && self.anomaly_factor.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "anomaly factor {} must exceed 1",
                self.anomaly_factor
            )));
        }
        Ok(())
    }
}

/// Sliding-window correlations, one per window start.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub values: Vec<f64>,
    /// Moving-average length applied so far (1 for raw correlations).
    pub taps: usize,
}

impl CorrelationSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Population Pearson correlation of every length-`w` window pair, `i = 0..=L-w`,
/// after truncating both inputs to the shorter length. Flat windows give 0.
pub fn running_correlation(a: &[f64], b: &[f64], w: usize) -> Result<CorrelationSeries> {
    let l = a.len().min(b.len());
    if w < 2 || w > l {
        return Err(Error::WindowTooLarge { window: w, len: l });
    }
    let values = (0..=l - w)
        .map(|i| pearson_unchecked(&a[i..i + w], &b[i..i + w]))
        .collect();
    Ok(CorrelationSeries { values, taps: 1 })
}

/// Centered moving average with edge replication. `taps = 1` is the identity.
pub fn fir_smooth(series: &CorrelationSeries, taps: usize) -> Result<CorrelationSeries> {
    if taps == 0 || taps.is_multiple_of(2) {
        return Err(Error::InvalidTaps(taps));
    }
    let v = &series.values;
    let n = v.len() as isize;
    let half = (taps / 2) as isize;
    let values = (0..n)
        .map(|i| {
            let s: f64 = (i - half..=i + half)
                .map(|j| v[j.clamp(0, n - 1) as usize])
                .sum();
            s / taps as f64
        })
        .collect();
    Ok(CorrelationSeries {
        values,
        taps: series.taps * taps,
    })
}

pub fn logistic_weight(r: f64, tau: f64) -> f64 {
    1.0 / (1.0 + (-STEEPNESS * (r - tau)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RescaleMethod {
    Targeted,
    StandardFallback,
    AnomalyFallback,
}

impl RescaleMethod {
    pub const ALL: [RescaleMethod; 3] = [
        RescaleMethod::Targeted,
        RescaleMethod::StandardFallback,
        RescaleMethod::AnomalyFallback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RescaleMethod::Targeted => "targeted",
            RescaleMethod::StandardFallback => "standard",
            RescaleMethod::AnomalyFallback => "anomaly",
        }
    }

    pub fn is_fallback(self) -> bool {
        self != RescaleMethod::Targeted
    }
}

impl fmt::Display for RescaleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RescaleMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RescaleMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown rescale method '{s}'")))
    }
}

/// What a rescale did, with the accumulators it was derived from.
///
/// The output always equals `scale * A + offset` elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaleOutcome {
    pub method: RescaleMethod,
    pub scale: f64,
    pub offset: f64,
    pub omega_c: f64,
    pub omega_p: f64,
    pub omega: f64,
    pub mu_c: f64,
    pub mu_p: f64,
    pub var_c: f64,
    pub var_p: f64,
    pub qualifying: usize,
    /// Truncated length both inputs were cut to.
    pub len: usize,
    /// Set when qualifying windows existed but `A` was flat over them.
    pub degenerate_scale: bool,
}

impl RescaleOutcome {
    pub const CSV_HEADER: &'static str = "method,scale,offset,omega,qualifying";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.method, self.scale, self.offset, self.omega, self.qualifying
        )
    }
}

/// `(A - mean A) * rho + mean A + mu` with the level's calibration.
pub fn standard_rescale(a: &Segment, calibration: &CalibrationStats, level: SnrLevel) -> Result<Segment> {
    let (out, _, _) = standard_parts(a.samples(), calibration, level)?;
    Ok(Segment::from_finite(out, a.rate_hz()))
}

fn standard_parts(
    a: &[f64],
    calibration: &CalibrationStats,
    level: SnrLevel,
) -> Result<(Vec<f64>, f64, f64)> {
    let c = calibration.level(level)?;
    let m = sigcore::mean(a);
    let out = a.iter().map(|v| (v - m) * c.rho + m + c.mu).collect();
    Ok((out, c.rho, m * (1.0 - c.rho) + c.mu))
}

/// True when `max|rescaled| > kappa * max|B|`.
pub fn is_anomalous(rescaled: &[f64], b: &[f64], kappa: f64) -> bool {
    let peak = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    peak(rescaled) > kappa * peak(b)
}

/// Passes `rescaled` through unless it breaks `B`'s envelope, in which case the
/// standard rescale of the pre-rescale `A` is returned. The flag reports a revert.
pub fn anomaly_filtration(
    rescaled: &Segment,
    a: &Segment,
    b: &Segment,
    kappa: f64,
    calibration: &CalibrationStats,
    level: SnrLevel,
) -> Result<(Segment, bool)> {
    if is_anomalous(rescaled.samples(), b.samples(), kappa) {
        Ok((standard_rescale(a, calibration, level)?, true))
    } else {
        Ok((rescaled.clone(), false))
    }
}

/// Maps raw output `a` onto the scale of contaminated input `b`.
pub fn scale_targeting(
    a: &Segment,
    b: &Segment,
    params: &TargetingParams,
    calibration: &CalibrationStats,
    level: SnrLevel,
) -> Result<(Segment, RescaleOutcome)> {
    params.validate()?;
    // Surface missing calibration even when the targeted path would not need it.
    calibration.level(level)?;
    let rate = a.rate_hz();
    let l = a.len().min(b.len());
    let (a, b) = (&a.samples()[..l], &b.samples()[..l]);
    let w = params.window;
    let r = fir_smooth(&running_correlation(a, b, w)?, params.fir_taps)?;

    let mut out = RescaleOutcome {
        method: RescaleMethod::Targeted,
        scale: 1.0,
        offset: 0.0,
        omega_c: 0.0,
        omega_p: 0.0,
        omega: 0.0,
        mu_c: 0.0,
        mu_p: 0.0,
        var_c: 0.0,
        var_p: 0.0,
        qualifying: 0,
        len: l,
        degenerate_scale: false,
    };
    let mut pool_c = Vec::new();
    let mut pool_p = Vec::new();
    for (i, &ri) in r.values.iter().enumerate() {
        if ri > params.tau {
            let wgt = logistic_weight(ri, params.tau);
            out.omega_c += sigcore::mean(&b[i..i + w]) * wgt;
            out.omega_p += sigcore::mean(&a[i..i + w]) * wgt;
            out.omega += wgt;
            out.qualifying += 1;
            pool_c.extend_from_slice(&b[i..i + w]);
            pool_p.extend_from_slice(&a[i..i + w]);
        }
    }

    let fallback = |out: &mut RescaleOutcome, method| -> Result<Segment> {
        let (y, scale, offset) = standard_parts(a, calibration, level)?;
        out.method = method;
        out.scale = scale;
        out.offset = offset;
        Ok(Segment::from_finite(y, rate))
    };

    if out.omega == 0.0 {
        let y = fallback(&mut out, RescaleMethod::StandardFallback)?;
        return Ok((y, out));
    }
    out.mu_c = out.omega_c / out.omega;
    out.mu_p = out.omega_p / out.omega;
    out.var_c = sigcore::variance(&pool_c);
    out.var_p = sigcore::variance(&pool_p);
    let scale = (out.var_c / out.var_p).sqrt();
    if out.var_p == 0.0 || !scale.is_finite() || scale <= 0.0 {
        out.degenerate_scale = true;
        let y = fallback(&mut out, RescaleMethod::StandardFallback)?;
        return Ok((y, out));
    }
    let rescaled: Vec<f64> = a.iter().map(|v| (v - out.mu_p) * scale + out.mu_c).collect();
    if is_anomalous(&rescaled, b, params.anomaly_factor) {
        let y = fallback(&mut out, RescaleMethod::AnomalyFallback)?;
        return Ok((y, out));
    }
    out.scale = scale;
    out.offset = out.mu_c - out.mu_p * scale;
    Ok((Segment::from_finite(rescaled, rate), out))
}
