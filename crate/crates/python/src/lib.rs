//! Python bindings: `import pytada`.
//!
//! Segments cross the boundary as lists of floats. Library errors become
//! `OSError` for filesystem failures and `ValueError` otherwise.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use tada::pipeline::{self, PipelineConfig};
use tada::sigcore::{self, Segment, SnrLevel};
use tada::targeting::{self, TargetingParams};
use tada::training::CalibrationStats;

fn py_err(e: tada::Error) -> PyErr {
    if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn segment(x: Vec<f64>) -> PyResult<Segment> {
    Segment::new(x).map_err(py_err)
}

fn level(name: &str) -> PyResult<SnrLevel> {
    name.parse().map_err(py_err)
}

/// A clean segment, its artifact, and their mixture at a target SNR.
#[pyclass(name = "Pair", frozen)]
struct PyPair(sigcore::ContaminatedPair);

#[pymethods]
impl PyPair {
    #[getter]
    fn clean(&self) -> Vec<f64> {
        self.0.clean.samples().to_vec()
    }

    #[getter]
    fn artifact(&self) -> Vec<f64> {
        self.0.artifact.samples().to_vec()
    }

    #[getter]
    fn mixture(&self) -> Vec<f64> {
        self.0.mixture.samples().to_vec()
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn snr_db(&self) -> f64 {
        self.0.snr_db
    }

    fn realized_snr_db(&self) -> f64 {
        self.0.realized_snr_db()
    }

    fn __repr__(&self) -> String {
        format!("Pair(snr_db={}, lam={:.6})", self.0.snr_db, self.0.lambda)
    }
}

/// Per-level offset and amplitude ratio used by the standard rescale.
#[pyclass(name = "Calibration", frozen)]
struct PyCalibration(CalibrationStats);

#[pymethods]
impl PyCalibration {
    /// Same `mu` and `rho` for every level.
    #[staticmethod]
    #[pyo3(signature = (mu, rho, p99 = 1.0))]
    fn uniform(mu: f64, rho: f64, p99: f64) -> Self {
        Self(CalibrationStats::uniform(mu, rho, p99))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        CalibrationStats::load(&path).map(Self).map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(py_err)
    }

    /// `(mu, rho)` for a level name: `low`, `mid` or `high`.
    fn level(&self, name: &str) -> PyResult<(f64, f64)> {
        let c = self.0.level(level(name)?).map_err(py_err)?;
        Ok((c.mu, c.rho))
    }

    #[getter]
    fn p99(&self) -> f64 {
        self.0.p99
    }
}

/// Trained models plus targeting parameters, loaded from a configuration file.
#[pyclass(name = "Pipeline")]
struct PyPipeline {
    config: PipelineConfig,
    models: pipeline::Models,
}

#[pymethods]
impl PyPipeline {
    #[new]
    fn new(config_path: PathBuf) -> PyResult<Self> {
        let config = PipelineConfig::load(&config_path).map_err(py_err)?;
        let models = pipeline::Models::load(&config).map_err(py_err)?;
        Ok(Self { config, models })
    }

    /// Returns `(output, predicted level, rescale method)`.
    fn denoise(&self, mixture: Vec<f64>) -> PyResult<(Vec<f64>, String, String)> {
        let r = pipeline::denoise_segment(&segment(mixture)?, &self.models, &self.config).map_err(py_err)?;
        Ok((
            r.output.into_samples(),
            r.level.name().to_string(),
            r.outcome.method.name().to_string(),
        ))
    }

    /// Benchmarks the configured corpus, writes the report to `out_dir` and
    /// returns the summary table as CSV text.
    fn bench(&self, out_dir: PathBuf) -> PyResult<String> {
        let pairs = pipeline::bench_pairs(&self.config).map_err(py_err)?;
        let report = pipeline::bench_corpus(&pairs, pipeline::Denoiser::Pipeline(&self.models, &self.config))
            .map_err(py_err)?;
        pipeline::report_emit(&report, &out_dir).map_err(py_err)?;
        Ok(report.summary_csv())
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.models.param_count()
    }
}

/// Mix `clean` with `artifact` scaled to reach `snr_db`.
#[pyfunction]
fn mix_at_snr(clean: Vec<f64>, artifact: Vec<f64>, snr_db: f64) -> PyResult<PyPair> {
    sigcore::mix_at_snr(&segment(clean)?, &segment(artifact)?, snr_db)
        .map(PyPair)
        .map_err(py_err)
}

/// Seeded proxy corpus with `per_level` pairs at each of the three SNR levels.
#[pyfunction]
fn synth_corpus(seed: u64, per_level: usize) -> PyResult<Vec<PyPair>> {
    sigcore::synth_corpus(seed, per_level)
        .map(|v| v.into_iter().map(PyPair).collect())
        .map_err(py_err)
}

/// `(cc, trrmse, srrmse)` of `estimate` against `truth`.
#[pyfunction]
fn metrics(estimate: Vec<f64>, truth: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let m = sigcore::metrics_triple(&segment(estimate)?, &segment(truth)?).map_err(py_err)?;
    Ok((m.cc, m.trrmse, m.srrmse))
}

/// One-sided power spectrum, bins 0..=N/2.
#[pyfunction]
fn power_spectrum(x: Vec<f64>) -> PyResult<Vec<f64>> {
    sigcore::power_spectrum(&segment(x)?).map(|p| p.bins).map_err(py_err)
}

/// Rescale raw output `a` onto contaminated input `b`; returns `(output, method)`.
/// Omitted parameters take the library defaults.
#[pyfunction]
#[pyo3(signature = (a, b, calibration, level_name, tau = None, window = None, fir_taps = None, anomaly_factor = None))]
#[allow(clippy::too_many_arguments)]
fn scale_targeting(
    a: Vec<f64>,
    b: Vec<f64>,
    calibration: &PyCalibration,
    level_name: &str,
    tau: Option<f64>,
    window: Option<usize>,
    fir_taps: Option<usize>,
    anomaly_factor: Option<f64>,
) -> PyResult<(Vec<f64>, String)> {
    let d = TargetingParams::default();
    let params = TargetingParams::new(
        tau.unwrap_or(d.tau),
        window.unwrap_or(d.window),
        fir_taps.unwrap_or(d.fir_taps),
        anomaly_factor.unwrap_or(d.anomaly_factor),
    )
    .map_err(py_err)?;
    let (y, out) = targeting::scale_targeting(
        &segment(a)?,
        &segment(b)?,
        &params,
        &calibration.0,
        level(level_name)?,
    )
    .map_err(py_err)?;
    Ok((y.into_samples(), out.method.name().to_string()))
}

/// Trainable parameters on the inference path of freshly seeded models.
#[pyfunction]
fn default_param_count(seed: u64) -> usize {
    let lc = tada::models::build_lc_ensemble(seed);
    let ae = tada::models::build_autoencoder(seed);
    tada::models::inference_param_count(&lc, &ae)
}

/// Runs the `tada` command line with `args` (without the program name) and
/// returns its exit code.
#[pyfunction]
fn cli(args: Vec<String>) -> i32 {
    tada::cli::run(std::iter::once("tada".to_string()).chain(args))
}

#[pymodule]
fn pytada(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPair>()?;
    m.add_class::<PyCalibration>()?;
    m.add_class::<PyPipeline>()?;
    m.add_function(wrap_pyfunction!(mix_at_snr, m)?)?;
    m.add_function(wrap_pyfunction!(synth_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(power_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(scale_targeting, m)?)?;
    m.add_function(wrap_pyfunction!(default_param_count, m)?)?;
    m.add_function(wrap_pyfunction!(cli, m)?)?;
    Ok(())
}
