//! `tada` command-line front end.
//!
//! Exit status: 0 on success, 1 on invalid input (arguments, config, data), 2 on
//! filesystem failures. Failures print one `error:` line on stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::models::{
    build_autoencoder, build_discriminator, build_lc_ensemble, count_params, load_autoencoder,
    save_autoencoder, save_discriminator, save_lc_ensemble, BASES,
};
use crate::pipeline::{
    bench_run, denoise_segment, load_corpus_dir, parse_entries, report_emit, save_corpus_dir, BenchReport,
    Models, PipelineConfig,
};
use crate::sigcore::{
    derive_seed, mix_at_snr, read_segments, synth_artifact, synth_clean, write_segments, ArtifactKind,
    ContaminatedPair, Segment, SegmentFormat, SnrLevel,
};
use crate::training::{
    adversarial_train, compute_calibration, pretrain_autoencoder, train_meta_targeter, CalibrationStats,
    MetaConfig, TrainConfig, TrainingLog,
};

// Synthetic stream ids, disjoint from the benchmark stream.
const STREAM_TRAIN: u64 = 0x7A1;
const STREAM_HELD: u64 = 0x4E1D;
const STREAM_SYNTH: u64 = 0x5E9;

#[derive(Debug, Parser)]
#[command(name = "tada", version, about = "Targeted adversarial denoising of single-channel time series")]
struct Cli {
    /// Flat `section.key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Segment file format for written corpora (default: by extension, else csv).
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Bin,
}

impl From<FormatArg> for SegmentFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => SegmentFormat::Csv,
            FormatArg::Bin => SegmentFormat::Bin,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Mixed,
    Continuous,
    Spike,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write proxy clean and artifact segment files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        count: usize,
        #[arg(long, value_enum, default_value_t = KindArg::Mixed)]
        kind: KindArg,
    },
    /// Mix clean and artifact files into a labelled corpus directory.
    Mix {
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated levels assigned round-robin (low, mid, high).
        #[arg(long, default_value = "low,mid,high")]
        levels: String,
    },
    /// Train the contamination-level ensemble.
    TrainMeta {
        #[arg(long)]
        out: PathBuf,
        /// Corpus directory; the last tenth is held out. Default: synthetic.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Pretrain the autoencoder on reconstruction alone.
    TrainAe {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Adversarial cycles from a pretrained autoencoder.
    TrainAdv {
        #[arg(long)]
        ae: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Starting calibration; computed from `--ae` when absent.
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        calibration_out: Option<PathBuf>,
        #[arg(long)]
        disc_out: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        cycles: Option<usize>,
    },
    /// Per-level offset and amplitude statistics of an autoencoder.
    Calibrate {
        #[arg(long)]
        ae: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Denoise every segment of one file.
    Denoise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Benchmark the configured pipeline and write CSV and SVG results.
    Bench {
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-plot a `segments.csv` written by `bench`.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the trainable parameter audit.
    Params,
}

/// Parses `args` (program name first) and runs the command. Returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

struct Ctx {
    config: PipelineConfig,
    entries: BTreeMap<String, String>,
    format: Option<SegmentFormat>,
}

impl Ctx {
    fn load(cli: &Cli) -> Result<Self> {
        let (mut config, entries) = match &cli.config {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let base = p.parent().unwrap_or(Path::new("."));
                (PipelineConfig::parse(&text, base)?, parse_entries(&text)?)
            }
            None => (PipelineConfig::default(), BTreeMap::new()),
        };
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        Ok(Self {
            config,
            entries,
            format: cli.format.map(Into::into),
        })
    }

    fn format_for(&self, path: &Path) -> SegmentFormat {
        self.format.unwrap_or_else(|| SegmentFormat::from_path(path))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
            })
            .transpose()
    }

    fn check_section(&self, section: &str, keys: &[&str]) -> Result<()> {
        for k in self.entries.keys() {
            if let Some(rest) = k.strip_prefix(section) {
                if !keys.contains(&rest) {
                    return Err(Error::Config(format!("unknown key '{k}'")));
                }
            }
        }
        Ok(())
    }

    fn train_config(&self) -> Result<TrainConfig> {
        self.check_section(
            "train.",
            &[
                "cycles",
                "gen_epochs",
                "disc_epochs",
                "batch",
                "w_adv",
                "train_size",
                "pretrain_epochs",
                "lr",
                "disc_lr",
                "refresh_calibration",
            ],
        )?;
        let mut c = TrainConfig {
            seed: self.config.seed,
            ..TrainConfig::default()
        };
        macro_rules! set {
            ($field:expr, $key:literal) => {
                if let Some(v) = self.get($key)? {
                    $field = v;
                }
            };
        }
        set!(c.cycles, "train.cycles");
        set!(c.epochs_per_cycle_gen, "train.gen_epochs");
        set!(c.epochs_per_cycle_disc, "train.disc_epochs");
        set!(c.batch, "train.batch");
        set!(c.w_adv, "train.w_adv");
        set!(c.train_size, "train.train_size");
        set!(c.pretrain_epochs, "train.pretrain_epochs");
        set!(c.lr, "train.lr");
        set!(c.disc_lr, "train.disc_lr");
        set!(c.refresh_calibration, "train.refresh_calibration");
        c.validate()?;
        Ok(c)
    }

    fn meta_config(&self) -> Result<(MetaConfig, usize)> {
        self.check_section("meta.", &["epochs", "meta_epochs", "batch", "lr", "per_level"])?;
        let mut c = MetaConfig {
            seed: self.config.seed,
            ..MetaConfig::default()
        };
        if let Some(v) = self.get("meta.epochs")? {
            c.epochs = v;
        }
        if let Some(v) = self.get("meta.meta_epochs")? {
            c.meta_epochs = v;
        }
        if let Some(v) = self.get("meta.batch")? {
            c.batch = v;
        }
        if let Some(v) = self.get("meta.lr")? {
            c.lr = v;
        }
        let per_level = self.get("meta.per_level")?.unwrap_or(300);
        Ok((c, per_level))
    }

    /// Training and held-out pairs: a corpus directory split 9:1, or two
    /// independent synthetic draws.
    fn split(&self, corpus: Option<&Path>, per_level: usize) -> Result<(Vec<ContaminatedPair>, Vec<ContaminatedPair>)> {
        match corpus {
            Some(dir) => {
                let mut pairs = load_corpus_dir(dir)?;
                if pairs.len() < 2 {
                    return Err(Error::InsufficientData(format!("{} pairs in corpus", pairs.len())));
                }
                let cut = pairs.len() - (pairs.len() / 10).max(1);
                let held = pairs.split_off(cut);
                Ok((pairs, held))
            }
            None => {
                let seed = self.config.seed;
                let train = crate::sigcore::synth_corpus(derive_seed(seed, STREAM_TRAIN), per_level.max(1))?;
                let held = crate::sigcore::synth_corpus(derive_seed(seed, STREAM_HELD), (per_level / 9).max(1))?;
                Ok((train, held))
            }
        }
    }
}

fn parse_levels(s: &str) -> Result<Vec<SnrLevel>> {
    let levels = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(SnrLevel::from_str)
        .collect::<Result<Vec<_>>>()?;
    if levels.is_empty() {
        return Err(Error::InvalidParams("no levels given".into()));
    }
    Ok(levels)
}

fn execute(cli: Cli) -> Result<()> {
    let ctx = Ctx::load(&cli)?;
    let seed = ctx.config.seed;
    match cli.command {
        Command::Synth { out, count, kind } => {
            if count == 0 {
                return Err(Error::InvalidCount(0));
            }
            let fmt = ctx.format.unwrap_or(SegmentFormat::Csv);
            let clean = synth_clean(derive_seed(seed, STREAM_SYNTH), count)?;
            let cont = synth_artifact(derive_seed(seed, STREAM_SYNTH + 1), count, ArtifactKind::Continuous)?;
            let spike = synth_artifact(derive_seed(seed, STREAM_SYNTH + 2), count, ArtifactKind::Spike)?;
            let artifact: Vec<Segment> = match kind {
                KindArg::Continuous => cont,
                KindArg::Spike => spike,
                KindArg::Mixed => cont
                    .into_iter()
                    .zip(spike)
                    .enumerate()
                    .map(|(i, (c, s))| if (i / 3) % 2 == 0 { c } else { s })
                    .collect(),
            };
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let ext = fmt.extension();
            write_segments(&out.join(format!("clean.{ext}")), &clean, fmt)?;
            write_segments(&out.join(format!("artifact.{ext}")), &artifact, fmt)?;
            println!("wrote {count} clean and {count} artifact segments to {}", out.display());
        }
        Command::Mix {
            clean,
            artifact,
            out,
            levels,
        } => {
            let levels = parse_levels(&levels)?;
            let c = read_segments(&clean, SegmentFormat::from_path(&clean))?;
            let a = read_segments(&artifact, SegmentFormat::from_path(&artifact))?;
            if c.len() != a.len() {
                return Err(Error::LengthMismatch {
                    left: c.len(),
                    right: a.len(),
                });
            }
            let pairs = c
                .iter()
                .zip(&a)
                .enumerate()
                .map(|(i, (c, a))| mix_at_snr(c, a, levels[i % levels.len()].db()))
                .collect::<Result<Vec<_>>>()?;
            save_corpus_dir(&out, &pairs, ctx.format.unwrap_or(SegmentFormat::Csv))?;
            println!("wrote {} pairs to {}", pairs.len(), out.display());
        }
        Command::TrainMeta { out, corpus, epochs } => {
            let (mut mc, per_level) = ctx.meta_config()?;
            if let Some(e) = epochs {
                mc.epochs = e;
                mc.meta_epochs = e;
            }
            let (train, test) = ctx.split(corpus.as_deref(), per_level)?;
            let r = train_meta_targeter(&train, &test, &mc)?;
            save_lc_ensemble(&r.model, &out)?;
            println!(
                "held-out accuracy {:.4}, mean loss {:.6}, bases {:?}",
                r.accuracy, r.mean_loss, r.base_accuracy
            );
        }
        Command::TrainAe {
            out,
            corpus,
            epochs,
            log,
        } => {
            let mut tc = ctx.train_config()?;
            if let Some(e) = epochs {
                tc.pretrain_epochs = e;
            }
            let (train, _) = ctx.split(corpus.as_deref(), tc.train_size / 3)?;
            let r = pretrain_autoencoder(&train, &tc)?;
            save_autoencoder(&r.model, &out)?;
            if let Some(p) = log {
                TrainingLog::from_pretrain(&r.losses).save(&p)?;
            }
            println!("final loss {:.6}", r.losses.last().copied().unwrap_or(f64::NAN));
        }
        Command::TrainAdv {
            ae,
            out,
            corpus,
            calibration,
            calibration_out,
            disc_out,
            log,
            cycles,
        } => {
            let mut tc = ctx.train_config()?;
            if let Some(c) = cycles {
                tc.cycles = c;
                tc.validate()?;
            }
            let (train, held) = ctx.split(corpus.as_deref(), tc.train_size / 3)?;
            let model = load_autoencoder(&ae)?;
            let cal = match calibration {
                Some(p) => CalibrationStats::load(&p)?,
                None => compute_calibration(&train, &model)?,
            };
            let r = adversarial_train(model, build_discriminator(seed), &train, &held, &cal, &tc)?;
            save_autoencoder(&r.ae, &out)?;
            if let Some(p) = disc_out {
                save_discriminator(&r.disc, &p)?;
            }
            if let Some(p) = calibration_out {
                r.calibration.save(&p)?;
            }
            if let Some(p) = log {
                r.log.save(&p)?;
            }
            println!(
                "held-out CC {:.4} -> {:.4}",
                r.report.initial.cc,
                r.report.final_metrics().cc
            );
        }
        Command::Calibrate { ae, out, corpus } => {
            let tc = ctx.train_config()?;
            let (train, _) = ctx.split(corpus.as_deref(), tc.train_size / 3)?;
            let cal = compute_calibration(&train, &load_autoencoder(&ae)?)?;
            cal.save(&out)?;
            for level in SnrLevel::ALL {
                let c = cal.level(level)?;
                println!("{}: mu {:.6} rho {:.6} n {}", level.name(), c.mu, c.rho, c.count);
            }
        }
        Command::Denoise { input, output } => {
            let models = Models::load(&ctx.config)?;
            let segs = read_segments(&input, SegmentFormat::from_path(&input))?;
            let out = segs
                .iter()
                .map(|s| denoise_segment(s, &models, &ctx.config).map(|r| r.output))
                .collect::<Result<Vec<_>>>()?;
            write_segments(&output, &out, ctx.format_for(&output))?;
            println!("denoised {} segments", out.len());
        }
        Command::Bench { out } => {
            let report = bench_run(&ctx.config)?;
            report_emit(&report, &out)?;
            print!("{}", report.summary_csv());
        }
        Command::Report { input, out } => {
            let text = fs::read_to_string(&input).map_err(|e| Error::io(&input, e))?;
            let report = BenchReport::from_segments_csv(&text)?;
            let files = report_emit(&report, &out)?;
            println!("wrote {} files to {}", files.len(), out.display());
        }
        Command::Params => {
            let (lc, ae) = if ctx.config.lc_path.is_some() || ctx.config.ae_path.is_some() {
                let m = Models::load(&ctx.config)?;
                (m.lc, m.ae)
            } else {
                (build_lc_ensemble(seed), build_autoencoder(seed))
            };
            let names = ["lstm", "cnn", "hybrid"];
            for (b, name) in names.iter().enumerate().take(BASES) {
                println!("lc.{name} {}", count_params(lc.base(b)));
            }
            println!("lc.meta {}", count_params(&lc.meta));
            println!("lc {}", count_params(&lc));
            println!("ae {}", count_params(&ae));
            println!("total {}", count_params(&lc) + count_params(&ae));
        }
    }
    Ok(())
}
