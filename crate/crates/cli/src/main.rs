//! `avq`: command line front end for the audio-visual quality toolkit.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use avq_core::ablate::{builtin_presets, load_config, load_suite, run_suite, RunOptions};
use avq_core::audio::extract_audio_features;
use avq_core::eval::{
    cached_audio, cached_video, prepare_features, write_audio_cache, write_video_cache,
};
use avq_core::media::{load_manifest, load_media, load_synth_spec, read_wav, read_y4m,
    synth_dataset, RawMedia};
use avq_core::model::{
    load_model, merge_features, predict_sequence, save_model, train_model, FeatureSelection,
};
use avq_core::video::extract_video_features;

#[derive(Parser)]
#[command(
    name = "avq",
    version,
    about = "No-reference audio-visual quality assessment toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark dataset with known subjective scores
    SynthData(SynthDataArgs),
    /// Extract features for every manifest sequence into a cache directory
    Extract(ExtractArgs),
    /// Train one model on every sequence in a manifest
    Train(TrainArgs),
    /// Score a single sequence with a trained model
    Predict(PredictArgs),
    /// Evaluate a suite of configurations with shared cross-validation folds
    Ablate(AblateArgs),
}

#[derive(Args)]
struct SynthDataArgs {
    /// Dataset spec (TOML)
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for media files and the manifest
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Modality {
    Video,
    Audio,
    All,
}

#[derive(Args)]
struct ExtractArgs {
    /// Manifest CSV listing the sequences
    #[arg(long)]
    manifest: PathBuf,
    /// Which feature matrices to extract
    #[arg(long, value_enum, default_value = "all")]
    modality: Modality,
    /// Cache directory; defaults to `features` next to the manifest
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Model configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Manifest CSV listing the training sequences
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file
    #[arg(long)]
    out: PathBuf,
    /// Feature cache directory; defaults to `features` next to the manifest
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,
    /// Degraded video (Y4M)
    #[arg(long)]
    video: Option<PathBuf>,
    /// Degraded audio (WAV)
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Frame rate override; required for audio-only models without --video
    #[arg(long)]
    fps: Option<f64>,
}

#[derive(Args)]
struct AblateArgs {
    /// Suite definition (TOML); mutually exclusive with --presets
    #[arg(long, conflicts_with = "presets", required_unless_present = "presets")]
    suite: Option<PathBuf>,
    /// Run the built-in nine-configuration suite
    #[arg(long)]
    presets: bool,
    /// Manifest CSV listing the sequences
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for reports, fold CSVs, and the merged table
    #[arg(long)]
    out: PathBuf,
    /// Configurations evaluated concurrently
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Skip configurations already completed in a previous run
    #[arg(long)]
    resume: bool,
}

fn default_cache(manifest: &Path) -> PathBuf {
    manifest
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join("features")
}

fn cmd_synth_data(args: &SynthDataArgs) -> Result<()> {
    let spec = load_synth_spec(&args.spec)
        .with_context(|| format!("loading spec {}", args.spec.display()))?;
    let manifest = synth_dataset(&spec, &args.out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let records = load_manifest(&args.manifest)?;
    let cache = args
        .cache
        .clone()
        .unwrap_or_else(|| default_cache(&args.manifest));

    let mut extracted = 0usize;
    let mut reused = 0usize;
    for record in &records {
        let need_video = matches!(args.modality, Modality::Video | Modality::All)
            && cached_video(&cache, record).is_none();
        let need_audio = matches!(args.modality, Modality::Audio | Modality::All)
            && cached_audio(&cache, record).is_none();
        if !need_video && !need_audio {
            reused += 1;
            continue;
        }
        let media = load_media(record)
            .with_context(|| format!("loading media for `{}`", record.id))?;
        if need_video {
            let video = extract_video_features(&media)
                .with_context(|| format!("video features for `{}`", record.id))?;
            write_video_cache(&cache, record, &video)?;
        }
        if need_audio {
            let audio = extract_audio_features(&media, media.frame_count(), record.fps)
                .with_context(|| format!("audio features for `{}`", record.id))?;
            write_audio_cache(&cache, record, &audio)?;
        }
        extracted += 1;
    }
    log::info!(
        "extracted {} sequences, {} already cached, cache at {}",
        extracted,
        reused,
        cache.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let config = load_config(&args.config)?;
    let records = load_manifest(&args.manifest)?;
    let cache = args
        .cache
        .clone()
        .unwrap_or_else(|| default_cache(&args.manifest));
    let data = prepare_features(&records, &cache)?;

    let mut train_set = Vec::with_capacity(data.len());
    for seq in &data {
        let merged = merge_features(
            Some(&seq.video),
            Some(&seq.audio),
            config.feature_selection,
        )?;
        train_set.push((merged, seq.record.mos));
    }
    let model = train_model(&train_set, &config)?;
    save_model(&args.out, &model)?;
    log::info!(
        "trained `{}` on {} sequences, model at {}",
        config.name,
        train_set.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let selection = model.selection;

    let video = match (&args.video, selection) {
        (Some(path), _) => Some(read_y4m(path)?),
        (None, FeatureSelection::Av | FeatureSelection::VideoOnly) => {
            bail!("model selects {} features, --video is required", selection)
        }
        (None, FeatureSelection::AudioOnly) => None,
    };

    let video_features = match (&video, selection) {
        (Some((frames, _)), FeatureSelection::Av | FeatureSelection::VideoOnly) => {
            let media = RawMedia {
                frames: frames.clone(),
                audio: Vec::new(),
                sample_rate: 0,
                fps: 0.0,
            };
            Some(extract_video_features(&media)?)
        }
        _ => None,
    };

    let audio_features = match selection {
        FeatureSelection::Av | FeatureSelection::AudioOnly => {
            let path = args
                .audio
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!(
                    "model selects {} features, --audio is required",
                    selection
                ))?;
            let (samples, sample_rate) = read_wav(path)?;
            let fps = args
                .fps
                .or_else(|| video.as_ref().map(|(_, f)| *f).filter(|f| *f > 0.0))
                .context("need --fps (or a --video with a frame rate header)")?;
            let frame_count = match &video {
                Some((frames, _)) => frames.len(),
                None => {
                    let duration = samples.len() as f64 / sample_rate as f64;
                    (duration * fps).floor().max(1.0) as usize
                }
            };
            let media = RawMedia {
                frames: Vec::new(),
                audio: samples,
                sample_rate,
                fps,
            };
            Some(extract_audio_features(&media, frame_count, fps)?)
        }
        FeatureSelection::VideoOnly => None,
    };

    let features = merge_features(video_features.as_ref(), audio_features.as_ref(), selection)?;
    let (score, per_frame_scores) = predict_sequence(&model, &features)?;
    let out = serde_json::json!({
        "score": score,
        "per_frame_scores": per_frame_scores,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let suite = match &args.suite {
        Some(path) => load_suite(path)?,
        None => builtin_presets(),
    };
    let records = load_manifest(&args.manifest)?;
    let cache = default_cache(&args.manifest);
    let data = prepare_features(&records, &cache)?;

    let options = RunOptions {
        workers: args.workers.max(1),
        resume: args.resume,
    };
    let outcome = run_suite(&suite, &data, &args.out, &options)?;

    for o in &outcome.outcomes {
        match (&o.report, &o.error) {
            (Some(report), _) => {
                let overall = report.overall();
                println!(
                    "{:<12} pcc={} scc={} rmse={}{}",
                    o.name,
                    fmt_opt(overall.pcc),
                    fmt_opt(overall.scc),
                    fmt_opt(overall.rmse),
                    if o.reused { "  (cached)" } else { "" },
                );
            }
            (None, Some(err)) => println!("{:<12} FAILED: {}", o.name, err),
            (None, None) => unreachable!("outcome without report or error"),
        }
    }
    println!("merged table: {}", outcome.merged_csv.display());

    if !outcome.all_succeeded() {
        bail!("some configurations failed");
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{:.4}", x)).unwrap_or_else(|| "n/a".into())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::SynthData(args) => cmd_synth_data(args),
        Command::Extract(args) => cmd_extract(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Ablate(args) => cmd_ablate(args),
    }
}
