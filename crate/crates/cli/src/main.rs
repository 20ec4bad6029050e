//! `uniproc` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Stdout carries
//! CSV only; everything else goes to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use uniproc::check;
use uniproc::degrade::{apply, DegradationKind, DegradationSpec, SeverityPreset};
use uniproc::image::{load_ppm, save_ppm};
use uniproc::metrics::{evaluate_table, format_sig, psnr, ssim};
use uniproc::model::{load_checkpoint, save_checkpoint};
use uniproc::train::{build_patches, load_testset, loss_log_csv, ModelRestorer, PatchManifest, TrainConfig, Trainer};

#[derive(Parser)]
#[command(name = "uniproc", version, about = "Text-conditioned all-in-one image restoration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply one degradation and print `kind,severity,seed,psnr_db,ssim`.
    Degrade {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        kind: String,
        /// A number in (0, 1] or slight / middle / heavy.
        #[arg(long, default_value = "heavy")]
        severity: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cut sources into square patches and write a manifest.
    DatasetBuild {
        #[arg(long)]
        src: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 512)]
        size: usize,
        #[arg(long, default_value_t = 416)]
        stride: usize,
    },
    /// Train a model; writes the checkpoint and `<out>.loss.csv`.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Loss log path (default `<out>.loss.csv`).
        #[arg(long)]
        loss_log: Option<PathBuf>,
    },
    /// Per-kind PSNR/SSIM of a checkpoint on a directory of PPM images.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        testset: PathBuf,
        /// Comma-separated kind names, or `all` (every degrading kind).
        #[arg(long, default_value = "all")]
        kinds: String,
        #[arg(long, default_value = "heavy")]
        preset: String,
        #[arg(long)]
        report: PathBuf,
        /// Fixed subject for every prompt instead of the applied kind.
        #[arg(long)]
        prompt_subject: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// PSNR and SSIM between two images.
    Metrics {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Double-precision finite-difference check of the backward passes.
    Gradcheck {
        #[arg(long, default_value = "all")]
        op: String,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type CmdResult = Result<(), Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Degrade {
            input,
            out,
            kind,
            severity,
            seed,
        } => degrade(&input, &out, &kind, &severity, seed),
        Command::DatasetBuild { src, out, size, stride } => dataset_build(&src, &out, size, stride),
        Command::Train {
            config,
            manifest,
            out,
            loss_log,
        } => train(&config, &manifest, &out, loss_log),
        Command::Eval {
            ckpt,
            testset,
            kinds,
            preset,
            report,
            prompt_subject,
            seed,
        } => eval(&ckpt, &testset, &kinds, &preset, &report, prompt_subject, seed),
        Command::Metrics { a, b } => metrics(&a, &b),
        Command::Gradcheck { op } => gradcheck(&op),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_severity(s: &str) -> Result<f64, Failure> {
    if let Ok(p) = s.parse::<SeverityPreset>() {
        return Ok(p.value());
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 1.0 => Ok(v),
        _ => Err(usage(format!("severity must be a number in (0, 1] or slight/middle/heavy, got {s:?}"))),
    }
}

fn degrade(input: &Path, out: &Path, kind: &str, severity: &str, seed: u64) -> CmdResult {
    let kind: DegradationKind = kind.parse().map_err(usage)?;
    let severity = parse_severity(severity)?;
    let spec = DegradationSpec::new(kind, severity, seed).map_err(usage)?;
    let clean = load_ppm(input).map_err(|e| runtime(format!("{}: {e}", input.display())))?;
    let degraded = apply(&clean, &spec).map_err(runtime)?;
    save_ppm(out, &degraded).map_err(|e| runtime(format!("{}: {e}", out.display())))?;
    // Scores are taken on the written (8-bit) image.
    let written = degraded.quantize_u8();
    let p = psnr(&written, &clean).map_err(runtime)?;
    let s = ssim(&written, &clean).map_err(runtime)?;
    println!("{},{},{},{},{}", kind.name(), severity, seed, format_sig(p), format_sig(s));
    Ok(())
}

fn dataset_build(src: &Path, out: &Path, size: usize, stride: usize) -> CmdResult {
    if size == 0 || stride == 0 {
        return Err(usage("size and stride must be positive"));
    }
    if !src.is_dir() {
        return Err(runtime(format!("source directory {} does not exist", src.display())));
    }
    let manifest = build_patches(src, out, size, stride).map_err(runtime)?;
    info!("wrote {} patches to {}", manifest.entries.len(), out.display());
    Ok(())
}

fn train(config: &Path, manifest: &Path, out: &Path, loss_log: Option<PathBuf>) -> CmdResult {
    let text = fs::read_to_string(config).map_err(|e| runtime(format!("{}: {e}", config.display())))?;
    let cfg = TrainConfig::from_json(&text).map_err(usage)?;
    let list = PatchManifest::load(manifest).map_err(|e| runtime(format!("{}: {e}", manifest.display())))?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let patches = list.load_patches(dir).map_err(runtime)?;
    info!(
        "training on {} patches for {} steps",
        patches.len(),
        cfg.total_steps(patches.len())
    );
    let mut trainer = Trainer::new(cfg).map_err(usage)?;
    let log = trainer
        .run(&patches, |step, ckpt| {
            let path = suffixed(out, &format!(".step{step}"));
            info!("checkpoint {}", path.display());
            save_checkpoint(&path, ckpt)
        })
        .map_err(runtime)?;
    save_checkpoint(out, &trainer.checkpoint()).map_err(runtime)?;
    let log_path = loss_log.unwrap_or_else(|| suffixed(out, ".loss.csv"));
    fs::write(&log_path, loss_log_csv(&log)).map_err(runtime)?;
    info!("wrote {} and {}", out.display(), log_path.display());
    Ok(())
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn eval(
    ckpt: &Path,
    testset: &Path,
    kinds: &str,
    preset: &str,
    report: &Path,
    prompt_subject: Option<String>,
    seed: u64,
) -> CmdResult {
    let kinds: Vec<DegradationKind> = if kinds == "all" {
        DegradationKind::degrading()
    } else {
        kinds
            .split(',')
            .map(|k| k.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(usage)?
    };
    let preset: SeverityPreset = preset.parse().map_err(usage)?;
    let checkpoint = load_checkpoint(ckpt).map_err(|e| runtime(format!("{}: {e}", ckpt.display())))?;
    let images = load_testset(testset).map_err(runtime)?;
    let restorer = ModelRestorer {
        model: &checkpoint.model,
        subject: prompt_subject,
    };
    let table = evaluate_table(&restorer, &images, &kinds, preset, seed).map_err(runtime)?;
    let csv = table.to_csv();
    fs::write(report, &csv).map_err(|e| runtime(format!("{}: {e}", report.display())))?;
    print!("{csv}");
    Ok(())
}

fn metrics(a: &Path, b: &Path) -> CmdResult {
    let x = load_ppm(a).map_err(|e| runtime(format!("{}: {e}", a.display())))?;
    let y = load_ppm(b).map_err(|e| runtime(format!("{}: {e}", b.display())))?;
    let p = psnr(&x, &y).map_err(usage)?;
    let s = ssim(&x, &y).map_err(usage)?;
    println!("psnr_db,ssim");
    println!("{},{}", format_sig(p), format_sig(s));
    Ok(())
}

fn gradcheck(op: &str) -> CmdResult {
    if !check::is_known(op) {
        return Err(usage(format!(
            "unknown op {op:?}; valid: all, {}",
            check::SUITE.join(", ")
        )));
    }
    let results = check::run(op).map_err(runtime)?;
    println!("op,coordinates,max_rel_err,p95_rel_err,passed");
    let mut failed = Vec::new();
    for r in &results {
        let ok = r.report.passed();
        println!(
            "{},{},{:e},{:e},{}",
            r.name, r.report.coordinates, r.report.max_rel_err, r.report.p95_rel_err, ok
        );
        if !ok {
            failed.push(r.name.as_str());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(runtime(format!("gradient check failed for {}", failed.join(", "))))
    }
}
