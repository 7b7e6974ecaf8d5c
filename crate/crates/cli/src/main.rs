//! `vessel-aug`: augment, evaluate, overlay and replay.
//!
//! Exit codes: 0 success, 2 partial failure, 64 usage error, 65 data error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use vessel_aug::dataset::{load_sample, png_stems, FOV_DIR, IMAGES_DIR, MASKS_DIR};
use vessel_aug::eval::{evaluate_dataset, DEFAULT_THRESHOLD};
use vessel_aug::metrics::render_overlay;
use vessel_aug::pipeline::{expand_dataset, replay, Manifest, MANIFEST_FILE};
use vessel_aug::png_io::{load_image, load_mask, save_image, save_mask};
use vessel_aug::{default_plan, AugmentationPlan, ProbabilityMap};

const EXIT_PARTIAL: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;

#[derive(Parser, Debug)]
#[command(name = "vessel-aug", version, about = "Paired image/mask augmentation and vessel segmentation metrics")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Expand a dataset (images/, masks/, optional fov/) with an augmentation plan.
    Augment(AugmentArgs),
    /// Score probability maps against vessel masks.
    Evaluate(EvaluateArgs),
    /// Render prediction/truth overlays (red prediction over white truth).
    Overlay(OverlayArgs),
    /// Regenerate outputs from a manifest and check their checksums.
    Replay(ReplayArgs),
    /// Print the built-in default plan as TOML.
    PrintDefaultPlan,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    /// Source dataset root.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Plan file (TOML). The built-in default plan is used when omitted.
    #[arg(long, value_name = "FILE")]
    plan: Option<PathBuf>,
    /// Overrides the plan's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Worker threads. Affects speed only, never output bytes.
    #[arg(long, env = "VESSEL_AUG_THREADS")]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Directory of probability maps (PNG, 8 or 16 bit).
    #[arg(long, value_name = "DIR")]
    pred: PathBuf,
    /// Directory of vessel masks.
    #[arg(long, value_name = "DIR")]
    truth: PathBuf,
    /// Directory of fov masks. Without it every pixel counts.
    #[arg(long, value_name = "DIR")]
    fov: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f32,
    /// Where to write report.jsonl and report.txt. The table goes to stdout otherwise.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, env = "VESSEL_AUG_THREADS")]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct OverlayArgs {
    /// Prediction PNG, or a directory of them.
    #[arg(long)]
    pred: PathBuf,
    /// Truth mask PNG, or a directory of them.
    #[arg(long)]
    truth: PathBuf,
    /// Binarization threshold for predictions.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f32,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Manifest file, or the output directory holding it.
    #[arg(long)]
    manifest: PathBuf,
    /// Source dataset root used for the original run.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Replay only this output stem. Every record is replayed otherwise.
    #[arg(long)]
    stem: Option<String>,
    /// Write regenerated samples here.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, env = "VESSEL_AUG_THREADS")]
    threads: Option<usize>,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_USAGE, error }
}

fn data(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_DATA,
        error: error.into(),
    }
}

type CmdResult = Result<u8, Failure>;

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, Failure> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(usage(anyhow!("--threads must be at least 1"))),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| usage(anyhow!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn require_dir(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(anyhow!("{what} {} is not a directory", path.display())))
    }
}

fn cmd_augment(args: AugmentArgs) -> CmdResult {
    let mut plan = match &args.plan {
        Some(p) if !p.is_file() => return Err(usage(anyhow!("plan file {} not found", p.display()))),
        Some(p) => AugmentationPlan::load(p).map_err(|e| usage(e.into()))?,
        None => default_plan(),
    };
    if let Some(seed) = args.seed {
        plan.master_seed = seed;
    }
    plan.validate().map_err(|e| usage(e.into()))?;
    require_dir(&args.input, "input")?;
    if args.out.exists() && args.out.canonicalize().ok() == args.input.canonicalize().ok() {
        return Err(usage(anyhow!("output directory must differ from the input")));
    }
    log::info!(
        "plan {} seed {} composition {:?} channels {:?}",
        plan.hash(),
        plan.master_seed,
        plan.composition,
        plan.channels
    );

    let exp = with_threads(args.threads, || expand_dataset(&args.input, &plan, &args.out))?.map_err(data)?;
    println!("{}", args.out.join(MANIFEST_FILE).display());
    println!(
        "{} outputs from {} sources",
        exp.manifest.records.len(),
        exp.manifest.header.sources
    );
    if exp.is_complete() {
        Ok(0)
    } else {
        for f in &exp.failures {
            eprintln!("failed {}: {}", f.stem, f.message);
        }
        eprintln!("{} outputs failed", exp.failures.len());
        Ok(EXIT_PARTIAL)
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> CmdResult {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage(anyhow!("--threshold must lie in [0, 1]")));
    }
    require_dir(&args.pred, "--pred")?;
    require_dir(&args.truth, "--truth")?;
    if let Some(f) = &args.fov {
        require_dir(f, "--fov")?;
    }
    let report = with_threads(args.threads, || {
        evaluate_dataset(&args.pred, &args.truth, args.fov.as_deref(), args.threshold)
    })?
    .map_err(data)?;
    match &args.out {
        Some(dir) => report.write(dir).map_err(data)?,
        None => print!("{}", report.to_table()),
    }
    println!("{}", report.summary_line());
    Ok(0)
}

fn overlay_one(pred: &Path, truth: &Path, threshold: f32, out: &Path, stem: &str) -> anyhow::Result<()> {
    let p = ProbabilityMap::from_plane(&load_image(pred)?).binarize(threshold);
    let t = load_mask(truth)?.mask;
    let img = render_overlay(&p, &t).with_context(|| format!("stem {stem}"))?;
    save_image(&img, out.join(format!("{stem}_overlay.png")))?;
    Ok(())
}

fn cmd_overlay(args: OverlayArgs) -> CmdResult {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage(anyhow!("--threshold must lie in [0, 1]")));
    }
    let pairs: Vec<(String, PathBuf, PathBuf)> = match (args.pred.is_dir(), args.truth.is_dir()) {
        (true, true) => {
            let preds = png_stems(&args.pred).map_err(data)?;
            let truths = png_stems(&args.truth).map_err(data)?;
            let pairs: Vec<_> = preds
                .iter()
                .filter_map(|(s, p)| truths.get(s).map(|t| (s.clone(), p.clone(), t.clone())))
                .collect();
            if pairs.is_empty() {
                return Err(data(vessel_aug::Error::NoMatchingStems(args.pred, args.truth)));
            }
            pairs
        }
        (false, false) if args.pred.is_file() && args.truth.is_file() => {
            let stem = args
                .pred
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| usage(anyhow!("cannot take a stem from {}", args.pred.display())))?
                .to_string();
            vec![(stem, args.pred.clone(), args.truth.clone())]
        }
        _ => {
            return Err(usage(anyhow!(
                "--pred and --truth must both be files or both be directories"
            )))
        }
    };
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(data)?;
    for (stem, p, t) in &pairs {
        overlay_one(p, t, args.threshold, &args.out, stem).map_err(data)?;
    }
    println!("{} overlays written to {}", pairs.len(), args.out.display());
    Ok(0)
}

fn cmd_replay(args: ReplayArgs) -> CmdResult {
    let path = if args.manifest.is_dir() {
        args.manifest.join(MANIFEST_FILE)
    } else {
        args.manifest.clone()
    };
    if !path.is_file() {
        return Err(usage(anyhow!("manifest {} not found", path.display())));
    }
    require_dir(&args.input, "input")?;
    let manifest = Manifest::read(&path).map_err(data)?;
    let records: Vec<_> = match &args.stem {
        Some(s) => vec![manifest
            .find(s)
            .ok_or_else(|| data(anyhow!("no record for stem {s}")))?
            .clone()],
        None => manifest.records.clone(),
    };
    let channels = manifest.header.channels;
    if let Some(out) = &args.out {
        for d in [IMAGES_DIR, MASKS_DIR, FOV_DIR] {
            std::fs::create_dir_all(out.join(d)).map_err(data)?;
        }
    }
    let results = with_threads(args.threads, || {
        use rayon::prelude::*;
        records
            .par_iter()
            .map(|rec| -> anyhow::Result<(String, bool)> {
                let source = load_sample(&args.input, &rec.source_id, channels)?;
                let r = replay(&manifest.header, rec, &source)?;
                if let Some(out) = &args.out {
                    let file = format!("{}.png", rec.stem);
                    save_image(&r.sample.image, out.join(IMAGES_DIR).join(&file))?;
                    save_mask(&r.sample.vessels, out.join(MASKS_DIR).join(&file))?;
                    if let Some(f) = &r.sample.fov {
                        save_mask(f, out.join(FOV_DIR).join(&file))?;
                    }
                }
                Ok((rec.stem.clone(), r.matches))
            })
            .collect::<Vec<_>>()
    });
    let results = results?;
    let mut mismatched = 0;
    for r in results {
        let (stem, ok) = r.map_err(data)?;
        if !ok {
            mismatched += 1;
            eprintln!("checksum mismatch: {stem}");
        }
    }
    println!("{} of {} records reproduced", records.len() - mismatched, records.len());
    if mismatched > 0 {
        Ok(EXIT_DATA)
    } else {
        Ok(0)
    }
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Augment(a) => cmd_augment(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Overlay(a) => cmd_overlay(a),
        Command::Replay(a) => cmd_replay(a),
        Command::PrintDefaultPlan => {
            let text = default_plan().to_toml_string().map_err(data)?;
            print!("{text}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("VESSEL_AUG_LOG")
        .init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
