//! Corpus directories: `clean`, `artifact` and `mixture` segment files in one
//! format plus `labels.csv` with one `snr_db,lambda` row per pair.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sigcore::{read_segments, write_segments, ContaminatedPair, SegmentFormat};

const LABELS: &str = "labels.csv";

pub fn save_corpus_dir(dir: &Path, pairs: &[ContaminatedPair], format: SegmentFormat) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ext = format.extension();
    let col = |f: fn(&ContaminatedPair) -> &crate::Segment| -> Vec<crate::Segment> {
        pairs.iter().map(|p| f(p).clone()).collect()
    };
    write_segments(&dir.join(format!("clean.{ext}")), &col(|p| &p.clean), format)?;
    write_segments(&dir.join(format!("artifact.{ext}")), &col(|p| &p.artifact), format)?;
    write_segments(&dir.join(format!("mixture.{ext}")), &col(|p| &p.mixture), format)?;
    let mut labels = String::from("snr_db,lambda\n");
    for p in pairs {
        let _ = writeln!(labels, "{},{}", p.snr_db, p.lambda);
    }
    let path = dir.join(LABELS);
    fs::write(&path, labels).map_err(|e| Error::io(&path, e))
}

pub fn load_corpus_dir(dir: &Path) -> Result<Vec<ContaminatedPair>> {
    let format = [SegmentFormat::Csv, SegmentFormat::Bin]
        .into_iter()
        .find(|f| dir.join(format!("mixture.{}", f.extension())).exists())
        .ok_or_else(|| Error::io(dir.join("mixture.csv"), std::io::ErrorKind::NotFound.into()))?;
    let ext = format.extension();
    let clean = read_segments(&dir.join(format!("clean.{ext}")), format)?;
    let artifact = read_segments(&dir.join(format!("artifact.{ext}")), format)?;
    let mixture = read_segments(&dir.join(format!("mixture.{ext}")), format)?;
    let path = dir.join(LABELS);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let labels: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (a, b) = l
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("bad label row '{l}'")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad label value '{s}'")))
            };
            Ok((parse(a)?, parse(b)?))
        })
        .collect::<Result<_>>()?;
    let n = mixture.len();
    if clean.len() != n || artifact.len() != n || labels.len() != n {
        return Err(Error::Format(format!(
            "corpus counts differ: {} clean, {} artifact, {n} mixture, {} labels",
            clean.len(),
            artifact.len(),
            labels.len()
        )));
    }
    Ok(clean
        .into_iter()
        .zip(artifact)
        .zip(mixture)
        .zip(labels)
        .map(|(((clean, artifact), mixture), (snr_db, lambda))| ContaminatedPair {
            clean,
            artifact,
            lambda,
            mixture,
            snr_db,
        })
        .collect())
}
