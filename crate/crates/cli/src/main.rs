//! `udsift` command-line pipeline.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage or input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use udsift::classify::{evaluate, train_mdc, EvalResult};
use udsift::config::PipelineConfig;
use udsift::diversity::{diversity_report, DiversityReport};
use udsift::gpca_sift::{sift, TOLERANCE_PRESETS};
use udsift::hyperopt::{optimize, FitnessData};
use udsift::kinsim::{make_dataset, ActivityClass};
use udsift::pipeline::preprocess_manifest;
use udsift::sigcore::Manifest;
use udsift::Error;

#[derive(Parser)]
#[command(name = "udsift", version, about = "Micro-Doppler signature simulation, sifting and evaluation")]
struct Cli {
    /// TOML pipeline configuration; keys it sets take precedence over flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a labelled dataset of power spectrograms.
    Simulate {
        /// Comma-separated class names (default: all eight).
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
        #[arg(long)]
        n_per_class: Option<usize>,
        /// Fraction of each class replaced by kinematic defects.
        #[arg(long)]
        defect_frac: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Full-band SNR in dB.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Resample, STFT, grayscale 100×100 and eCLEAN every record.
    Preprocess {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_eclean: bool,
    },
    /// Accept candidates inside the per-class GPCA hulls of a real set.
    Sift {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        /// Hull tolerance, or a preset name (tol-1.0, tol-0.5).
        #[arg(long)]
        tol: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip the kinematic rule pre-filter.
        #[arg(long)]
        no_rules: bool,
        #[arg(long)]
        p1: Option<usize>,
        #[arg(long)]
        p2: Option<usize>,
    },
    /// Per-class MS-SSIM diversity over random image pairs.
    Diversity {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        n_pairs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the minimum-distance classifier and evaluate it.
    Classify {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        p1: Option<usize>,
        #[arg(long)]
        p2: Option<usize>,
    },
    /// Genetic search over sampling rate and STFT parameters.
    Tune {
        /// Manifest with raw returns.
        #[arg(long)]
        train: PathBuf,
        /// Validation manifest; without it every other record per class of
        /// the training manifest is held out.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        generations: Option<usize>,
    },
    /// Render figures from evaluation and diversity CSVs.
    Report {
        #[arg(long)]
        eval: Option<PathBuf>,
        #[arg(long)]
        diversity: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    PrintConfig,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { source, .. } => match source.kind() {
                std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData => 2,
                _ => 1,
            },
            _ => 2,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

type Outcome = std::result::Result<(), Failure>;

fn out_dir(flag: Option<PathBuf>, cfg: &PipelineConfig) -> std::result::Result<PathBuf, Failure> {
    cfg.paths
        .out_dir
        .clone()
        .or(flag)
        .ok_or_else(|| usage("an output directory is required (--out or paths.out_dir)"))
}

/// Flags first, then the config file on top.
fn finish_config(cfg: PipelineConfig, file: &Option<PathBuf>) -> std::result::Result<PipelineConfig, Failure> {
    match file {
        Some(p) => Ok(cfg.overlay_file(p)?),
        None => Ok(cfg),
    }
}

fn parse_tolerance(s: &str) -> std::result::Result<f64, Failure> {
    if let Some((_, v)) = TOLERANCE_PRESETS.iter().find(|(name, _)| *name == s) {
        return Ok(*v);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| *v > 0.0 && v.is_finite())
        .ok_or_else(|| usage(format!("--tol must be a positive number or a preset, got `{s}`")))
}

fn init_threads() -> Outcome {
    if let Ok(v) = std::env::var("UDSIFT_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| usage(format!("UDSIFT_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 1, msg: e.to_string() })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let mut cfg = PipelineConfig::default();
    match cli.command {
        Command::Simulate {
            classes,
            n_per_class,
            defect_frac,
            seed,
            snr,
            out,
        } => {
            if let Some(names) = classes {
                cfg.dataset.classes = names
                    .iter()
                    .map(|n| n.trim().parse::<ActivityClass>())
                    .collect::<udsift::Result<_>>()?;
            }
            if let Some(v) = n_per_class {
                cfg.dataset.n_per_class = v;
            }
            if let Some(v) = defect_frac {
                cfg.dataset.defect_fraction = v;
            }
            if let Some(v) = seed {
                cfg.dataset.seed = v;
            }
            if snr.is_some() {
                cfg.dataset.radar.snr_db = snr;
            }
            let cfg = finish_config(cfg, &cli.config)?;
            let dir = out_dir(out, &cfg)?;
            let m = make_dataset(&cfg.dataset, &dir)?;
            println!("wrote {} records to {}", m.len(), dir.join("manifest.jsonl").display());
        }
        Command::Preprocess { input, out, no_eclean } => {
            if no_eclean {
                cfg.preprocess.eclean = None;
            }
            let cfg = finish_config(cfg, &cli.config)?;
            let input = input
                .or_else(|| cfg.paths.dataset_root.as_ref().map(|d| d.join("manifest.jsonl")))
                .ok_or_else(|| usage("an input manifest is required (--in or paths.dataset_root)"))?;
            let dir = out_dir(out, &cfg)?;
            let m = Manifest::read(&input)?;
            let out_m = preprocess_manifest(&cfg.preprocess, &cfg.sift.rules, &m, &dir)?;
            println!("processed {} records into {}", out_m.len(), dir.display());
        }
        Command::Sift {
            real,
            candidates,
            tol,
            out,
            no_rules,
            p1,
            p2,
        } => {
            if let Some(t) = tol {
                cfg.sift.tolerance = parse_tolerance(&t)?;
            }
            if no_rules {
                cfg.sift.apply_rules = false;
            }
            if let Some(v) = p1 {
                cfg.sift.gpca.p1 = v;
            }
            if let Some(v) = p2 {
                cfg.sift.gpca.p2 = v;
            }
            let cfg = finish_config(cfg, &cli.config)?;
            let dir = out_dir(out, &cfg)?;
            let res = sift(&Manifest::read(&real)?, &Manifest::read(&candidates)?, &cfg.sift)?;
            res.accepted.write(&dir.join("manifest.jsonl"))?;
            res.report.write_csv(&dir.join("sift_report.csv"))?;
            let n_in: usize = res.report.rows.iter().map(|r| r.n_input).sum();
            println!(
                "accepted {} of {} candidates at tolerance {}",
                res.report.total_accepted(),
                n_in,
                cfg.sift.tolerance
            );
        }
        Command::Diversity {
            input,
            n_pairs,
            seed,
            out,
        } => {
            if let Some(v) = n_pairs {
                cfg.diversity.n_pairs = v;
            }
            if let Some(v) = seed {
                cfg.diversity.seed = v;
            }
            let cfg = finish_config(cfg, &cli.config)?;
            let dir = out_dir(out, &cfg)?;
            let d = &cfg.diversity;
            let rep = diversity_report(&Manifest::read(&input)?, d.n_pairs, d.seed, &d.msssim)?;
            for s in &rep.skipped {
                eprintln!("warning: class `{s}` has fewer than 2 samples; skipped");
            }
            rep.write_csv(&dir.join("diversity.csv"))?;
            for c in &rep.classes {
                println!("{}: mean={:.4} median={:.4} pairs={}", c.class, c.mean, c.median, c.n_pairs);
            }
        }
        Command::Classify {
            train,
            test,
            out,
            p1,
            p2,
        } => {
            if let Some(v) = p1 {
                cfg.classify.p1 = v;
            }
            if let Some(v) = p2 {
                cfg.classify.p2 = v;
            }
            let cfg = finish_config(cfg, &cli.config)?;
            let dir = out_dir(out, &cfg)?;
            let model = train_mdc(&Manifest::read(&train)?, &cfg.classify)?;
            let res = evaluate(&model, &Manifest::read(&test)?)?;
            res.write_csv(&dir.join("eval.csv"))?;
            println!("accuracy={:.4}", res.accuracy);
        }
        Command::Tune {
            train,
            val,
            out,
            seed,
            population,
            generations,
        } => {
            if let Some(v) = seed {
                cfg.tune.ga.seed = v;
            }
            if let Some(v) = population {
                cfg.tune.ga.population = v;
            }
            if let Some(v) = generations {
                cfg.tune.ga.generations = v;
            }
            let cfg = finish_config(cfg, &cli.config)?;
            let dir = out_dir(out, &cfg)?;
            let train_m = Manifest::read(&train)?;
            let (tr, va) = match val {
                Some(v) => (FitnessData::load_raw(&train_m)?, FitnessData::load_raw(&Manifest::read(&v)?)?),
                None => split_alternate(FitnessData::load_raw(&train_m)?),
            };
            let mut data = FitnessData::new(tr, va);
            data.mdc = cfg.classify;
            data.image_rows = cfg.preprocess.image_rows;
            data.image_cols = cfg.preprocess.image_cols;
            data.eclean = cfg.preprocess.eclean;
            let res = optimize(&cfg.tune.bounds, &cfg.tune.ga, None, |g, _| data.fitness(g))?;
            res.write_history(&dir.join("history.csv"))?;
            println!("best={} fitness={:.4}", res.best, res.best_fitness);
        }
        Command::Report { eval, diversity, out } => {
            let cfg = finish_config(cfg, &cli.config)?;
            if eval.is_none() && diversity.is_none() {
                return Err(usage("report needs --eval and/or --diversity"));
            }
            let dir = out_dir(out, &cfg)?;
            let read = |p: &Path| -> std::result::Result<String, Failure> {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::from(Error::Io { path: p.into(), source: e }))?;
                if text.lines().filter(|l| !l.trim().is_empty()).count() < 2 {
                    return Err(usage(format!("{}: no data rows", p.display())));
                }
                Ok(text)
            };
            if let Some(p) = eval {
                let res = EvalResult::from_csv(&read(&p)?)?;
                res.render_png(&dir.join("confusion.png"))?;
                println!("accuracy={:.4}", res.accuracy);
            }
            if let Some(p) = diversity {
                let rep = DiversityReport::from_csv(&read(&p)?)?;
                rep.render_boxplot_png(&dir.join("diversity.png"))?;
            }
        }
        Command::PrintConfig => {
            let cfg = finish_config(cfg, &cli.config)?;
            print!("{}", cfg.to_toml()?);
        }
    }
    Ok(())
}

/// Hold out every second record of each class.
fn split_alternate<T>(items: Vec<(String, T)>) -> (Vec<(String, T)>, Vec<(String, T)>) {
    let mut seen = std::collections::HashMap::<String, usize>::new();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (c, x) in items {
        let k = seen.entry(c.clone()).or_default();
        if *k % 2 == 0 {
            train.push((c, x));
        } else {
            val.push((c, x));
        }
        *k += 1;
    }
    (train, val)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(f) = init_threads().and_then(|_| run(cli)) {
        eprintln!("error: {}", f.msg);
        return ExitCode::from(f.code);
    }
    ExitCode::SUCCESS
}
