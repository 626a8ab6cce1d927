use std::fmt::Write as _;

use super::{denoise_segment, Models, PipelineConfig, StageLatency};
use super::{load_corpus_dir, DatasetSource};
use crate::error::{Error, Result};
use crate::sigcore::{derive_seed, metrics_triple, pearson_cc, synth_corpus, ContaminatedPair, MetricsTriple, SnrLevel};
use crate::targeting::{RescaleMethod, RescaleOutcome};
use crate::training::pair_level;

/// What produces the output segment for each mixture.
#[derive(Debug, Clone, Copy)]
pub enum Denoiser<'a> {
    Pipeline(&'a Models, &'a PipelineConfig),
    /// Pass-through baseline: the mixture itself is the estimate.
    Identity,
}

/// Per-segment outcome in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub index: usize,
    pub level: SnrLevel,
    /// `None` for the pass-through baseline.
    pub predicted: Option<SnrLevel>,
    pub metrics: MetricsTriple,
    /// CC of the untouched mixture against truth.
    pub input_cc: f64,
    pub outcome: Option<RescaleOutcome>,
    pub latency: StageLatency,
}

impl SegmentRecord {
    /// `targeted`, `standard`, `anomaly`, or `bypass` for the baseline.
    pub fn method_name(&self) -> &'static str {
        self.outcome.as_ref().map_or("bypass", |o| o.method.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricStats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl MetricStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: f64::NAN,
                median: f64::NAN,
                std: f64::NAN,
            };
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        Self {
            mean: crate::sigcore::mean(values),
            median,
            std: crate::sigcore::variance(values).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: SnrLevel,
    pub count: usize,
    pub cc: MetricStats,
    pub trrmse: MetricStats,
    pub srrmse: MetricStats,
    pub input_cc: f64,
    /// Counts for `targeted`, `standard`, `anomaly`, `bypass`.
    pub methods: [usize; 4],
    /// Fraction of segments whose level was predicted correctly (NaN for the baseline).
    pub meta_accuracy: f64,
}

impl LevelSummary {
    /// Share of segments that took either fallback path.
    pub fn fallback_rate(&self) -> f64 {
        (self.methods[1] + self.methods[2]) as f64 / self.count.max(1) as f64
    }
}

pub const METHOD_COLUMNS: [&str; 4] = ["targeted", "standard", "anomaly", "bypass"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub records: Vec<SegmentRecord>,
    /// Inference-path trainable parameters (0 for the baseline).
    pub param_count: usize,
}

fn level_header(level: SnrLevel) -> String {
    format!("{}_{}db", level.name(), level.db())
}

impl BenchReport {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn level_records(&self, level: SnrLevel) -> impl Iterator<Item = &SegmentRecord> {
        self.records.iter().filter(move |r| r.level == level)
    }

    pub fn level_summary(&self, level: SnrLevel) -> LevelSummary {
        let recs: Vec<&SegmentRecord> = self.level_records(level).collect();
        let col = |f: fn(&MetricsTriple) -> f64| -> Vec<f64> { recs.iter().map(|r| f(&r.metrics)).collect() };
        let mut methods = [0usize; 4];
        for r in &recs {
            let i = METHOD_COLUMNS.iter().position(|m| *m == r.method_name()).expect("known");
            methods[i] += 1;
        }
        let predicted: Vec<_> = recs.iter().filter_map(|r| r.predicted).collect();
        let meta_accuracy = if predicted.is_empty() {
            f64::NAN
        } else {
            predicted.iter().filter(|&&p| p == level).count() as f64 / predicted.len() as f64
        };
        let input: Vec<f64> = recs.iter().map(|r| r.input_cc).collect();
        LevelSummary {
            level,
            count: recs.len(),
            cc: MetricStats::of(&col(|m| m.cc)),
            trrmse: MetricStats::of(&col(|m| m.trrmse)),
            srrmse: MetricStats::of(&col(|m| m.srrmse)),
            input_cc: crate::sigcore::mean(&input),
            methods,
            meta_accuracy,
        }
    }

    /// Mean latency share of each stage (meta, ae, rescale).
    pub fn latency_shares(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for r in &self.records {
            s[0] += r.latency.meta_us;
            s[1] += r.latency.ae_us;
            s[2] += r.latency.rescale_us;
        }
        let total: f64 = s.iter().sum();
        if total > 0.0 {
            s.iter_mut().for_each(|v| *v /= total);
        }
        s
    }

    /// Mean metric per level: one row per metric, one column per level.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("metric");
        for level in SnrLevel::ALL {
            let _ = write!(s, ",{}", level_header(level));
        }
        s.push('\n');
        let sums: Vec<LevelSummary> = SnrLevel::ALL.iter().map(|&l| self.level_summary(l)).collect();
        let rows: [(&str, fn(&LevelSummary) -> f64); 3] = [
            ("CC", |l| l.cc.mean),
            ("TRRMSE", |l| l.trrmse.mean),
            ("SRRMSE", |l| l.srrmse.mean),
        ];
        for (name, f) in rows {
            s.push_str(name);
            for l in &sums {
                let _ = write!(s, ",{:.6}", f(l));
            }
            s.push('\n');
        }
        s
    }

    /// Median and standard deviation companions to the summary table, plus input CC
    /// and level-prediction accuracy.
    pub fn detail_csv(&self) -> String {
        let mut s = String::from("level,count,input_cc,meta_accuracy");
        for m in ["cc", "trrmse", "srrmse"] {
            let _ = write!(s, ",{m}_mean,{m}_median,{m}_std");
        }
        s.push('\n');
        for level in SnrLevel::ALL {
            let l = self.level_summary(level);
            let _ = write!(s, "{},{},{:.6},{:.6}", level.name(), l.count, l.input_cc, l.meta_accuracy);
            for m in [l.cc, l.trrmse, l.srrmse] {
                let _ = write!(s, ",{:.6},{:.6},{:.6}", m.mean, m.median, m.std);
            }
            s.push('\n');
        }
        s
    }

    pub fn fallback_csv(&self) -> String {
        let mut s = format!("level,{},total\n", METHOD_COLUMNS.join(","));
        for level in SnrLevel::ALL {
            let l = self.level_summary(level);
            let m = l.methods;
            let _ = writeln!(s, "{},{},{},{},{},{}", level.name(), m[0], m[1], m[2], m[3], l.count);
        }
        s
    }

    pub const SEGMENTS_HEADER: &'static str =
        "index,level,predicted,cc,trrmse,srrmse,input_cc,method,scale,offset,omega,qualifying";

    /// One row per segment; contains no timing, so it is reproducible byte for byte.
    pub fn segments_csv(&self) -> String {
        let mut s = String::from(Self::SEGMENTS_HEADER);
        s.push('\n');
        for r in &self.records {
            let pred = r.predicted.map_or("", |p| p.name());
            let tail = match &r.outcome {
                Some(o) => o.csv_row(),
                None => "bypass,1,0,0,0".to_string(),
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.index,
                r.level.name(),
                pred,
                r.metrics.cc,
                r.metrics.trrmse,
                r.metrics.srrmse,
                r.input_cc,
                tail
            );
        }
        s
    }

    pub fn latency_csv(&self) -> String {
        let mut s = String::from("index,meta_us,ae_us,rescale_us\n");
        for r in &self.records {
            let l = r.latency;
            let _ = writeln!(s, "{},{:.3},{:.3},{:.3}", r.index, l.meta_us, l.ae_us, l.rescale_us);
        }
        let sh = self.latency_shares();
        let _ = writeln!(s, "share,{:.4},{:.4},{:.4}", sh[0], sh[1], sh[2]);
        s
    }

    /// Rebuilds a report (without timings or rescale diagnostics beyond the method)
    /// from [`Self::segments_csv`] output.
    pub fn from_segments_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(Self::SEGMENTS_HEADER) {
            return Err(Error::Format("not a segments CSV".into()));
        }
        let mut records = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 12 {
                return Err(Error::Format(format!("segments row '{line}'")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number '{s}'")))
            };
            let outcome = if f[7] == "bypass" {
                None
            } else {
                Some(RescaleOutcome {
                    method: f[7].parse::<RescaleMethod>()?,
                    scale: num(f[8])?,
                    offset: num(f[9])?,
                    omega_c: 0.0,
                    omega_p: 0.0,
                    omega: num(f[10])?,
                    mu_c: 0.0,
                    mu_p: 0.0,
                    var_c: 0.0,
                    var_p: 0.0,
                    qualifying: f[11]
                        .parse()
                        .map_err(|_| Error::Format(format!("bad count '{}'", f[11])))?,
                    len: 0,
                    degenerate_scale: false,
                })
            };
            records.push(SegmentRecord {
                index: f[0]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad index '{}'", f[0])))?,
                level: f[1].parse()?,
                predicted: if f[2].is_empty() { None } else { Some(f[2].parse()?) },
                metrics: MetricsTriple {
                    cc: num(f[3])?,
                    trrmse: num(f[4])?,
                    srrmse: num(f[5])?,
                },
                input_cc: num(f[6])?,
                outcome,
                latency: StageLatency::default(),
            });
        }
        Ok(Self {
            records,
            param_count: 0,
        })
    }
}

/// Runs `denoiser` over every pair in order and scores it against the clean truth.
pub fn bench_corpus(pairs: &[ContaminatedPair], denoiser: Denoiser) -> Result<BenchReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut records = Vec::with_capacity(pairs.len());
    for (index, p) in pairs.iter().enumerate() {
        let level = pair_level(p)?;
        let input_cc = pearson_cc(&p.mixture, &p.clean)?;
        let rec = match denoiser {
            Denoiser::Identity => SegmentRecord {
                index,
                level,
                predicted: None,
                metrics: metrics_triple(&p.mixture, &p.clean)?,
                input_cc,
                outcome: None,
                latency: StageLatency::default(),
            },
            Denoiser::Pipeline(models, config) => {
                let r = denoise_segment(&p.mixture, models, config)?;
                SegmentRecord {
                    index,
                    level,
                    predicted: Some(r.level),
                    metrics: metrics_triple(&r.output, &p.clean)?,
                    input_cc,
                    outcome: Some(r.outcome),
                    latency: r.latency,
                }
            }
        };
        records.push(rec);
    }
    let param_count = match denoiser {
        Denoiser::Pipeline(m, _) => m.param_count(),
        Denoiser::Identity => 0,
    };
    Ok(BenchReport {
        records,
        param_count,
    })
}

/// Benchmark pairs named by the configuration. Synthetic pairs use a stream
/// disjoint from the ones training commands draw from.
pub fn bench_pairs(config: &PipelineConfig) -> Result<Vec<ContaminatedPair>> {
    match &config.source {
        DatasetSource::SyntheticProxy => synth_corpus(derive_seed(config.seed, 0xBE7C), config.per_level),
        DatasetSource::FileCorpus(dir) => load_corpus_dir(dir),
    }
}

/// Loads models and the configured corpus, then benchmarks the full pipeline.
pub fn bench_run(config: &PipelineConfig) -> Result<BenchReport> {
    let models = Models::load(config)?;
    let pairs = bench_pairs(config)?;
    bench_corpus(&pairs, Denoiser::Pipeline(&models, config))
}
