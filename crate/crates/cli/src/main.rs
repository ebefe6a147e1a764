use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdtw_core::eval::EvalConfig;
use pdtw_core::features::NormalizationScope;
use pdtw_core::pipeline::{
    generate_synthetic_corpus, run_discover, run_eval, write_synthetic_corpus, EvalInputs,
    FeatureSource, PipelineConfig, SynthSpec,
};
use pdtw_core::stage2::DtwCostMode;
use pdtw_core::vad::SpeechRule;

#[derive(Parser)]
#[command(
    name = "pdtw",
    version,
    about = "Unsupervised spoken pattern discovery with probabilistic DTW"
)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discover recurring pattern pairs in the inputs listed by a manifest.
    Discover(DiscoverArgs),
    /// Score a class file against gold phone and word tiers.
    Eval(EvalArgs),
    /// Write a synthetic planted-pattern corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DiscoverArgs {
    /// Text file with one input path per line.
    manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Flat key=value config; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    window_frames: Option<usize>,
    #[arg(long)]
    shift_frames: Option<usize>,
    #[arg(long)]
    downsample_frames: Option<usize>,
    #[arg(long)]
    knn: Option<usize>,
    #[arg(long)]
    expand_frames: Option<usize>,
    #[arg(long)]
    min_path_steps: Option<usize>,
    #[arg(long)]
    calib_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Keep every frame.
    #[arg(long)]
    no_vad: bool,
    #[arg(long)]
    vad_threshold: Option<f64>,
    /// Which GMM component is speech: weight or mean.
    #[arg(long)]
    vad_speech_rule: Option<SpeechRule>,
    /// Input kind: mfcc (WAV) or files (PDTWFEAT/CSV).
    #[arg(long)]
    features: Option<FeatureSource>,
    /// Normalization scope: per-file or per-corpus.
    #[arg(long)]
    normalization: Option<NormalizationScope>,
    /// DTW local cost: raw or log.
    #[arg(long)]
    dtw_cost: Option<DtwCostMode>,
    /// Frame shift in seconds assumed for CSV feature files.
    #[arg(long)]
    csv_frame_shift: Option<f64>,
}

impl DiscoverArgs {
    fn config(&self) -> pdtw_core::Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        set!(
            alpha => alpha,
            window_frames => window_frames,
            shift_frames => shift_frames,
            downsample_frames => downsample_frames,
            knn => knn,
            expand_frames => expand_frames,
            min_path_steps => min_path_steps,
            calib_samples => calib_samples,
            seed => rng_seed,
            threads => threads,
            vad_threshold => vad_threshold,
            vad_speech_rule => vad_rule,
            features => features,
            normalization => normalization,
            dtw_cost => dtw_cost,
            csv_frame_shift => csv_frame_shift,
        );
        if self.no_vad {
            c.vad_enabled = false;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Class file of discovered pairs.
    #[arg(long)]
    pairs: PathBuf,
    /// Gold phone tier TSV.
    #[arg(long)]
    phones: PathBuf,
    /// Gold word tier TSV.
    #[arg(long)]
    words: PathBuf,
    /// Speech mask TSV written by `discover`.
    #[arg(long)]
    masks: PathBuf,
    /// Frame shift of the masks, seconds.
    #[arg(long, default_value_t = 0.01)]
    frame_shift: f64,
    /// Time of frame 0; read from stats.txt next to the masks when omitted.
    #[arg(long)]
    frame_offset: Option<f64>,
    /// Also write the report as key=value lines.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    words: usize,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// Noise std relative to the trajectory scale.
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Tempo warp range, e.g. 0.2 for +-20%.
    #[arg(long, default_value_t = 0.2)]
    warp: f64,
    /// Seconds of background frames over the whole corpus.
    #[arg(long, default_value_t = 600.0)]
    background_s: f64,
    #[arg(long, default_value_t = 10)]
    files: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn offset_from_stats(masks: &Path) -> Option<f64> {
    let stats = masks.parent()?.join("stats.txt");
    let text = fs::read_to_string(stats).ok()?;
    text.lines()
        .find_map(|l| l.strip_prefix("frame_offset="))
        .and_then(|v| v.trim().parse().ok())
}

fn run(cli: Cli) -> pdtw_core::Result<()> {
    match cli.command {
        Command::Discover(args) => {
            let cfg = args.config()?;
            let out = run_discover(&args.manifest, &cfg, &args.out)?;
            println!("{}", out.stats);
            println!("pairs written to {}", out.pairs.display());
        }
        Command::Eval(args) => {
            let inputs = EvalInputs {
                frame_offset: args
                    .frame_offset
                    .or_else(|| offset_from_stats(&args.masks))
                    .unwrap_or(0.0),
                pairs: args.pairs,
                phones: args.phones,
                words: args.words,
                masks: args.masks,
                frame_shift: args.frame_shift,
            };
            let report = run_eval(&inputs, &EvalConfig::default())?;
            print!("{report}");
            if let Some(p) = args.out {
                fs::write(&p, report.to_key_values())
                    .map_err(|e| pdtw_core::Error::Io { path: p, source: e })?;
            }
        }
        Command::Synth(args) => {
            let spec = SynthSpec {
                words: args.words,
                instances: args.instances,
                noise_sigma: args.noise,
                warp: args.warp,
                background_s: args.background_s,
                files: args.files,
                rng_seed: args.seed,
                ..SynthSpec::default()
            };
            let corpus = generate_synthetic_corpus(&spec)?;
            let paths = write_synthetic_corpus(&corpus, &args.out)?;
            println!(
                "{} files, {} planted instances; manifest {}",
                corpus.matrices.len(),
                corpus.planted.len(),
                paths.manifest.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                msg.push_str(&format!("\n  caused by: {s}"));
                src = s.source();
            }
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
