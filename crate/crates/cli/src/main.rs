//! `spkid`: command-line front end for the speaker identification toolkit.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spkid::audio::{load_wav, write_wav};
use spkid::bench::{
    generate_synthetic_corpus, roc_points, run_sweep, speaker_scaling_curve, write_curve_csv, write_report,
    write_roc_csv, BenchOptions, BenchmarkReport, Combination, CorpusManifest, SweepGrid,
};
use spkid::classify::{train, ClassifierKind, ClassifierParams, LabeledDataset};
use spkid::features::{extract, DctMode, ExtractorConfig, ExtractorKind};
use spkid::interchange::{FrameTable, ModelFile, EMBEDDING_PREFIX, FEATURE_PREFIX};
use spkid::preprocessing::{fit_silence_model, remove_silence, trim_silence, SilenceConfig};
use spkid::reduce::{reduce_for_pipeline, ReducerConfig, ReducerKind, SneKernel};
use spkid::{Error, Result};

#[derive(Parser)]
#[command(name = "spkid", version, about = "Text-independent speaker identification toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic corpus and its manifest.
    Synth(SynthArgs),
    /// Remove silence from a WAV file.
    Vad(VadArgs),
    /// Extract per-frame cepstral features from a WAV file or a manifest.
    Extract(ExtractArgs),
    /// Reduce a feature table with PCA or SNE.
    Reduce(ReduceArgs),
    /// Train a frame classifier on a labelled embedding table.
    Train(TrainArgs),
    /// Classify the frames of an embedding table with a saved model.
    Predict(PredictArgs),
    /// Run the extractor x reducer x classifier sweep over a corpus.
    Bench(BenchArgs),
    /// Accuracy of one combination as the number of speakers grows.
    Curve(CurveArgs),
    /// Export one speaker's ROC curve from a benchmark report.
    Roc(RocArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    speakers: usize,
    #[arg(long, default_value_t = 3)]
    samples: usize,
    #[arg(long, default_value_t = 3.0)]
    seconds: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct SilenceArgs {
    /// Standardized amplitude (multiples of sigma) above which a sample is non-silent.
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
    #[arg(long, default_value_t = 10.0)]
    block_ms: f64,
    /// Fraction of a block's samples that must exceed the threshold.
    #[arg(long, default_value_t = 0.2)]
    voiced_fraction: f64,
    #[arg(long, default_value_t = 50.0)]
    min_segment_ms: f64,
    /// Trim only leading and trailing silence.
    #[arg(long)]
    endpoints_only: bool,
}

impl SilenceArgs {
    fn config(&self) -> SilenceConfig {
        SilenceConfig {
            u_threshold: self.threshold,
            block_ms: self.block_ms,
            voiced_fraction: self.voiced_fraction,
            min_segment_ms: self.min_segment_ms,
            endpoints_only: self.endpoints_only,
        }
    }
}

#[derive(Args)]
struct VadArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    silence: SilenceArgs,
    /// JSON report with the kept segments.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    /// A WAV file, or a manifest CSV (`path,speaker,sample`).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "mfcc")]
    method: ExtractorKind,
    #[arg(long)]
    out: PathBuf,
    /// Speaker id recorded for a single WAV input.
    #[arg(long)]
    speaker: Option<u32>,
    #[arg(long)]
    pre_emphasis: Option<f64>,
    #[arg(long)]
    frame_ms: Option<f64>,
    #[arg(long)]
    hop_ms: Option<f64>,
    #[arg(long)]
    fft_size: Option<usize>,
    /// Mel filters (MFCC) or Bark bands (PLP).
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    lpc_order: Option<usize>,
    #[arg(long)]
    num_ceps: Option<usize>,
    #[arg(long)]
    dct: Option<DctMode>,
    #[arg(long)]
    include_c0: bool,
    /// Skip silence removal.
    #[arg(long)]
    no_vad: bool,
    #[command(flatten)]
    silence: SilenceArgs,
}

impl ExtractArgs {
    fn config(&self) -> Result<ExtractorConfig> {
        let mut c = ExtractorConfig::new(self.method);
        c.pre_emphasis = self.pre_emphasis.unwrap_or(c.pre_emphasis);
        c.frame_ms = self.frame_ms.unwrap_or(c.frame_ms);
        c.hop_ms = self.hop_ms.unwrap_or(c.hop_ms);
        c.fft_size = self.fft_size.unwrap_or(c.fft_size);
        c.filter_count = self.filters.unwrap_or(c.filter_count);
        c.lpc_order = self.lpc_order.unwrap_or(c.lpc_order);
        c.num_ceps = self.num_ceps.unwrap_or(c.num_ceps);
        c.dct = self.dct.unwrap_or(c.dct);
        c.include_c0 = self.include_c0;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "sne")]
    method: ReducerKind,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Defaults to min(30, (n - 1) / 3).
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, default_value = "gaussian")]
    kernel: SneKernel,
    #[arg(long)]
    out: PathBuf,
    /// Sidecar CSV with the SNE cost per iteration.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    model: ClassifierKind,
    /// Comma-separated overrides, e.g. `k=5,hidden=30x15`.
    #[arg(long, default_value = "")]
    params: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV of predicted speakers and per-speaker scores.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// TOML or JSON grid; the full 3 x 2 x 5 grid when omitted.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Recall above which a speaker counts as distinguishable.
    #[arg(long)]
    threshold: Option<f64>,
    /// Frames kept per recording; 0 keeps all.
    #[arg(long)]
    max_frames: Option<usize>,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "mfcc")]
    extractor: ExtractorKind,
    #[arg(long, default_value = "sne")]
    reducer: ReducerKind,
    #[arg(long, default_value = "knn")]
    classifier: ClassifierKind,
    /// Comma-separated speaker counts.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7")]
    speakers: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frames kept per recording; 0 keeps all.
    #[arg(long)]
    max_frames: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RocArgs {
    #[arg(long)]
    report: PathBuf,
    /// Speaker id as listed in the manifest.
    #[arg(long)]
    speaker: u32,
    /// Combination id, `extractor-reducer-classifier`.
    #[arg(long, default_value = "mfcc-sne-knn")]
    combination: String,
    #[arg(long)]
    out: PathBuf,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::InvalidConfig(format!("writing {}: {e}", path.display())))
}

fn synth(a: &SynthArgs) -> Result<()> {
    let m = generate_synthetic_corpus(&a.out, a.speakers, a.samples, a.seconds, a.seed)?;
    println!("wrote {} recordings and manifest.csv to {}", m.entries().len(), a.out.display());
    Ok(())
}

fn vad(a: &VadArgs) -> Result<()> {
    let signal = load_wav(&a.input)?;
    let model = fit_silence_model(&signal, &a.silence.config())?;
    let voiced = remove_silence(&signal, &model)?;
    write_wav(&a.out, &voiced.trimmed)?;
    if let Some(path) = &a.report {
        let rate = f64::from(signal.sample_rate());
        let segments: Vec<serde_json::Value> = voiced
            .segments
            .iter()
            .map(|&(s, e)| {
                serde_json::json!({
                    "start_sample": s,
                    "end_sample": e,
                    "start_s": s as f64 / rate,
                    "end_s": e as f64 / rate,
                })
            })
            .collect();
        let report = serde_json::json!({
            "input": a.input.display().to_string(),
            "sample_rate": signal.sample_rate(),
            "input_samples": signal.len(),
            "kept_samples": voiced.trimmed.len(),
            "silence_model": { "mu": model.mu, "sigma": model.sigma },
            "blocks": voiced.blocks,
            "voiced_blocks": voiced.voiced_blocks,
            "contamination_suspected": voiced.contamination_suspected,
            "segments": segments,
        });
        write_json(path, &report)?;
    }
    println!(
        "kept {} of {} samples in {} segment(s)",
        voiced.trimmed.len(),
        signal.len(),
        voiced.segments.len()
    );
    Ok(())
}

fn extract_cmd(a: &ExtractArgs) -> Result<()> {
    let config = a.config()?;
    let silence = a.silence.config();
    let features_of = |path: &Path, source: String, speaker: Option<u32>| -> Result<FrameTable> {
        let mut signal = load_wav(path)?;
        if !a.no_vad {
            signal = trim_silence(&signal, &silence)?.trimmed;
        }
        let f = extract(&signal, &config)?.with_source(source, speaker);
        if f.unstable_frames > 0 {
            log::warn!("{}: {} unstable frame(s) zeroed", path.display(), f.unstable_frames);
        }
        Ok(FrameTable::from_features(&f))
    };
    let is_manifest = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let table = if is_manifest {
        let manifest = CorpusManifest::load(&a.input)?;
        let mut table: Option<FrameTable> = None;
        for e in manifest.entries() {
            let t = features_of(&manifest.resolve(e), e.path.display().to_string(), Some(e.speaker))?;
            match table.as_mut() {
                Some(all) => all.append(&t)?,
                None => table = Some(t),
            }
        }
        table.expect("validated manifest is non-empty")
    } else {
        features_of(&a.input, a.input.display().to_string(), a.speaker)?
    };
    table.write_csv(&a.out, FEATURE_PREFIX)?;
    println!("wrote {} frames x {} coefficients to {}", table.len(), table.dim(), a.out.display());
    Ok(())
}

fn reduce_cmd(a: &ReduceArgs) -> Result<()> {
    let table = FrameTable::read_csv(&a.input)?;
    let mut config = ReducerConfig::new(a.method);
    config.pca_dim = a.dim;
    config.sne.target_dim = a.dim;
    config.sne.perplexity = a.perplexity;
    config.sne.seed = a.seed;
    config.sne.kernel = a.kernel;
    config.sne.max_iter = a.max_iter.unwrap_or(config.sne.max_iter);
    config.sne.learning_rate = a.learning_rate.unwrap_or(config.sne.learning_rate);
    // without split information every row is treated as training data
    let reduced = reduce_for_pipeline(table.values.view(), &vec![true; table.len()], &config)?;
    if let Some(path) = &a.trace {
        let mut text = String::from("iteration,cost\n");
        for (i, c) in reduced.cost_trace.iter().enumerate() {
            text.push_str(&format!("{i},{c}\n"));
        }
        std::fs::write(path, text).map_err(|e| Error::InvalidConfig(format!("writing {}: {e}", path.display())))?;
    }
    let out = table.with_values(reduced.coords)?;
    out.write_csv(&a.out, EMBEDDING_PREFIX)?;
    match reduced.final_cost {
        Some(c) => println!("embedded {} rows into {} dimensions, final cost {c:.6}", out.len(), out.dim()),
        None => println!("projected {} rows onto {} components", out.len(), out.dim()),
    }
    Ok(())
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let table = FrameTable::read_csv(&a.input)?;
    let speakers = table.speaker_ids()?;
    let labels: Vec<usize> = table
        .speakers
        .iter()
        .map(|s| speakers.binary_search(&s.expect("checked by speaker_ids")).expect("listed"))
        .collect();
    let data = LabeledDataset::all_train(table.values.clone(), labels)?;
    let params = ClassifierParams::default().with_overrides(&a.params)?;
    let model = train(a.model, &data, &params)?;
    let file = ModelFile::new(model, speakers, params);
    file.save(&a.out)?;
    println!("trained {} on {} frames of {} speakers", a.model, table.len(), file.speakers.len());
    Ok(())
}

fn predict_cmd(a: &PredictArgs) -> Result<()> {
    let table = FrameTable::read_csv(&a.input)?;
    let file = ModelFile::load(&a.model)?;
    let prediction = file.classifier.predict(table.values.view())?;
    let mut text = String::from("source,speaker,frame,predicted");
    for s in &file.speakers {
        text.push_str(&format!(",score_{s}"));
    }
    text.push('\n');
    let (mut known, mut correct) = (0usize, 0usize);
    for i in 0..table.len() {
        let predicted = file.speakers[prediction.labels[i]];
        if let Some(truth) = table.speakers[i] {
            known += 1;
            correct += usize::from(truth == predicted);
        }
        let source = if table.sources[i].contains([',', '"']) {
            format!("\"{}\"", table.sources[i].replace('"', "\"\""))
        } else {
            table.sources[i].clone()
        };
        text.push_str(&format!(
            "{source},{},{},{predicted}",
            table.speakers[i].map(|s| s.to_string()).unwrap_or_default(),
            table.frames[i]
        ));
        for v in prediction.scores.row(i) {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    std::fs::write(&a.out, text).map_err(|e| Error::InvalidConfig(format!("writing {}: {e}", a.out.display())))?;
    if known > 0 {
        println!("frame accuracy {:.1}% on {known} labelled frames", 100.0 * correct as f64 / known as f64);
    } else {
        println!("classified {} frames", table.len());
    }
    Ok(())
}

fn frame_budget(flag: Option<usize>, default: Option<usize>) -> Option<usize> {
    match flag {
        Some(0) => None,
        Some(n) => Some(n),
        None => default,
    }
}

fn bench(a: &BenchArgs) -> Result<()> {
    let manifest = CorpusManifest::load(&a.manifest)?;
    let mut grid = match &a.grid {
        Some(path) => SweepGrid::load(path)?,
        None => SweepGrid::default(),
    };
    if let Some(t) = a.threshold {
        grid.options.distinguishable_threshold = t;
    }
    grid.options.max_frames_per_recording = frame_budget(a.max_frames, grid.options.max_frames_per_recording);
    let report = run_sweep(&manifest, &grid, a.seed)?;
    let written = write_report(&a.out, &report)?;
    let failed = report.entries.iter().filter(|e| e.failure.is_some()).count();
    println!(
        "{} combinations ({failed} failed); {} files written to {}",
        report.entries.len(),
        written.len(),
        a.out.display()
    );
    Ok(())
}

fn curve(a: &CurveArgs) -> Result<()> {
    let manifest = CorpusManifest::load(&a.manifest)?;
    let combo = Combination::new(a.extractor, a.reducer, a.classifier);
    let defaults = BenchOptions::default();
    let options = BenchOptions {
        max_frames_per_recording: frame_budget(a.max_frames, defaults.max_frames_per_recording),
        ..defaults
    };
    let points = speaker_scaling_curve(&manifest, &combo, &a.speakers, &options, a.seed)?;
    write_curve_csv(&a.out, &points)?;
    for p in &points {
        println!("{:>3} speakers: {:.1}%", p.speakers, p.accuracy_pct);
    }
    Ok(())
}

fn roc(a: &RocArgs) -> Result<()> {
    let report = BenchmarkReport::load(&a.report)?;
    let entry = report
        .entry(&a.combination)
        .ok_or_else(|| Error::InvalidConfig(format!("no combination '{}' in the report", a.combination)))?;
    let points = roc_points(entry, a.speaker)?;
    write_roc_csv(&a.out, &points)?;
    println!("wrote {} ROC points to {}", points.len(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Vad(a) => vad(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Reduce(a) => reduce_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Curve(a) => curve(a),
        Command::Roc(a) => roc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
