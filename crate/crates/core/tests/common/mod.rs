//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the code it checks: the DFT is the O(N^2) textbook sum,
//! gradients are central differences of forward values, and the scale-targeting
//! reference recomputes every window statistic from scratch.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tada::gradnet::{Tape, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn pop_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// `|X_k|^2` for k = 0..=N/2 by direct summation.
pub fn naive_power_spectrum(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                // reduce k*t mod n first so the angle stays small
                let a = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re * re + im * im
        })
        .collect()
}

pub const FD_STEP: f64 = 1e-5;

/// Relative error with an absolute floor so that near-zero gradients do not
/// amplify rounding noise.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// A scalar function of several tensors, built on a fresh tape each call.
pub type Graph<'a> = dyn Fn(&mut Tape, &[Var]) -> Var + 'a;

/// Max relative error between reverse-mode and central-difference gradients of
/// `f` with respect to every element of every input.
pub fn gradient_error(inputs: &[Tensor], f: &Graph) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = f(&mut tape, &vars);
    let grads = tape.backward(out).expect("scalar output");
    let eval = |ins: &[Tensor]| {
        let mut t = Tape::new();
        let vs: Vec<Var> = ins.iter().map(|x| t.constant(x.clone())).collect();
        let o = f(&mut t, &vs);
        t.value(o).item()
    };
    let mut worst = 0.0f64;
    for (k, &v) in vars.iter().enumerate() {
        let analytic = grads.wrt(v);
        for j in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[j] -= FD_STEP;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic.data()[j], numeric));
        }
    }
    worst
}

/// Result of the reference scale-targeting transcription.
#[derive(Debug, Clone, PartialEq)]
pub struct RefTargeting {
    pub output: Vec<f64>,
    /// "targeted", "standard" or "anomaly".
    pub method: &'static str,
}

/// Direct transcription of covariance-driven logistic scale targeting: every
/// window correlation, mean and pooled variance is recomputed from raw samples.
/// `taps` is the moving-average length applied to the correlation series with
/// edge replication; `mu`, `rho` are the standard-rescale offset and amplitude ratio.
#[allow(clippy::too_many_arguments)]
pub fn reference_targeting(
    a: &[f64],
    b: &[f64],
    tau: f64,
    w: usize,
    taps: usize,
    kappa: f64,
    mu: f64,
    rho: f64,
) -> RefTargeting {
    let l = a.len().min(b.len());
    let (a, b) = (&a[..l], &b[..l]);
    let standard = |method| {
        let m = mean(a);
        RefTargeting {
            output: a.iter().map(|v| (v - m) * rho + m + mu).collect(),
            method,
        }
    };

    let raw: Vec<f64> = (0..=l - w).map(|i| pearson(&a[i..i + w], &b[i..i + w])).collect();
    let n = raw.len() as isize;
    let h = (taps / 2) as isize;
    let r: Vec<f64> = (0..n)
        .map(|i| {
            let mut s = 0.0;
            for j in i - h..=i + h {
                s += raw[j.clamp(0, n - 1) as usize];
            }
            s / taps as f64
        })
        .collect();

    let (mut omega_c, mut omega_p, mut omega) = (0.0, 0.0, 0.0);
    let mut set_c = Vec::new();
    let mut set_p = Vec::new();
    for (i, &ri) in r.iter().enumerate() {
        if ri > tau {
            let wt = 1.0 / (1.0 + (-20.0 * (ri - tau)).exp());
            omega_c += mean(&b[i..i + w]) * wt;
            omega_p += mean(&a[i..i + w]) * wt;
            omega += wt;
            set_c.extend_from_slice(&b[i..i + w]);
            set_p.extend_from_slice(&a[i..i + w]);
        }
    }
    if omega == 0.0 {
        return standard("standard");
    }
    let mu_c = omega_c / omega;
    let mu_p = omega_p / omega;
    let sigma_c = pop_var(&set_c).sqrt();
    let sigma_p = pop_var(&set_p).sqrt();
    if sigma_p == 0.0 || sigma_c == 0.0 {
        return standard("standard");
    }
    let rescaled: Vec<f64> = a.iter().map(|v| (v - mu_p) * (sigma_c / sigma_p) + mu_c).collect();
    let peak = |x: &[f64]| x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if peak(&rescaled) > kappa * peak(b) {
        return standard("anomaly");
    }
    RefTargeting {
        output: rescaled,
        method: "targeted",
    }
}

/// Signal-to-noise ratio in dB of `clean` against `lambda * artifact`.
pub fn snr_db(clean: &[f64], artifact: &[f64], lambda: f64) -> f64 {
    10.0 * (rms(clean) / (lambda.abs() * rms(artifact))).log10()
}
