use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::BenchReport;
use crate::error::{Error, Result};
use crate::sigcore::{MetricsTriple, SnrLevel};

pub const HIST_BINS: usize = 20;

/// Fixed-range histogram; values outside `[lo, hi]` land in the edge bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Histogram {
    let mut counts = vec![0; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let i = ((v - lo) / width).floor();
        let i = if i.is_nan() { 0 } else { (i.max(0.0) as usize).min(bins - 1) };
        counts[i] += 1;
    }
    Histogram { lo, hi, counts }
}

type MetricFn = fn(&MetricsTriple) -> f64;

const METRICS: [(&str, MetricFn); 3] = [
    ("cc", |m| m.cc),
    ("trrmse", |m| m.trrmse),
    ("srrmse", |m| m.srrmse),
];

fn metric_range(name: &str, values: &[f64]) -> (f64, f64) {
    if name == "cc" {
        return (-1.0, 1.0);
    }
    let max = values.iter().copied().fold(0.0f64, f64::max);
    (0.0, (max * 2.0).ceil().max(2.0) / 2.0)
}

fn svg(title: &str, h: &Histogram) -> String {
    let (w, ht, pad) = (480.0, 300.0, 40.0);
    let plot_w = w - 2.0 * pad;
    let plot_h = ht - 2.0 * pad;
    let peak = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bw = plot_w / h.counts.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{ht}" viewBox="0 0 {w} {ht}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{title}</text>"#,
        w / 2.0
    );
    for (i, &c) in h.counts.iter().enumerate() {
        let bh = plot_h * c as f64 / peak;
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a7bb7" stroke="white"><title>{c}</title></rect>"##,
            pad + i as f64 * bw,
            ht - pad - bh,
            bw,
            bh
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{pad}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
        ht - pad,
        w - pad
    );
    for (x, v) in [(pad, h.lo), (w - pad, h.hi)] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{v}</text>"#,
            ht - pad + 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
        pad - 4.0,
        pad + 4.0,
        peak as usize
    );
    s.push_str("</svg>\n");
    s
}

fn write(path: PathBuf, body: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    out.push(path);
    Ok(())
}

/// Writes summary, detail, fallback, segment, latency and histogram files to
/// `out_dir` and returns their paths. An empty report writes nothing.
pub fn report_emit(report: &BenchReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if report.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut out = Vec::new();
    write(out_dir.join("summary.csv"), &report.summary_csv(), &mut out)?;
    write(out_dir.join("detail.csv"), &report.detail_csv(), &mut out)?;
    write(out_dir.join("fallback.csv"), &report.fallback_csv(), &mut out)?;
    write(out_dir.join("segments.csv"), &report.segments_csv(), &mut out)?;
    if report.records.iter().any(|r| r.latency.total_us() > 0.0) {
        write(out_dir.join("latency.csv"), &report.latency_csv(), &mut out)?;
    }
    let mut hist_csv = String::from("metric,level,bin,lo,hi,count\n");
    for (name, f) in METRICS {
        let all: Vec<f64> = report.records.iter().map(|r| f(&r.metrics)).collect();
        let (lo, hi) = metric_range(name, &all);
        for level in SnrLevel::ALL {
            let vals: Vec<f64> = report.level_records(level).map(|r| f(&r.metrics)).collect();
            if vals.is_empty() {
                continue;
            }
            let h = histogram(&vals, lo, hi, HIST_BINS);
            let bw = (hi - lo) / HIST_BINS as f64;
            for (i, c) in h.counts.iter().enumerate() {
                let _ = writeln!(
                    hist_csv,
                    "{name},{},{i},{},{},{c}",
                    level.name(),
                    lo + i as f64 * bw,
                    lo + (i + 1) as f64 * bw
                );
            }
            let title = format!("{} at {} dB (n = {})", name.to_uppercase(), level.db(), vals.len());
            write(
                out_dir.join(format!("hist_{name}_{}.svg", level.name())),
                &svg(&title, &h),
                &mut out,
            )?;
        }
    }
    write(out_dir.join("histograms.csv"), &hist_csv, &mut out)?;
    Ok(out)
}
