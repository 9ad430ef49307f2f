//! Comparative benchmark over every extractor x reducer x classifier
//! combination.
//!
//! A run goes manifest -> silence trimming -> per-recording features ->
//! reduction over the pooled frames -> classifier trained on the training
//! recordings -> metrics on the held-out recordings. The split is always by
//! recording, so no frame of a test recording is ever seen in training.
//!
//! Stages shared between combinations are computed once per sweep: audio once,
//! features once per extractor, embeddings once per extractor and reducer.
//! Every stage owns a seed derived from the master seed and a stable textual
//! id, and parallel work is collected in index order, so reports do not
//! depend on the thread count.

mod metrics;
mod report;
mod synth;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{load_wav, AudioSignal};
use crate::classify::{train, ClassifierKind, ClassifierParams, LabeledDataset};
use crate::derive_seed;
use crate::features::{extract, ExtractorConfig, ExtractorKind};
use crate::preprocessing::{trim_silence, SilenceConfig};
use crate::reduce::{reduce_for_pipeline, Reduced, ReducerConfig, ReducerKind, SneConfig};
use crate::{Error, Result};

pub use metrics::{auc, confusion_matrix, evaluate, roc_curve, roc_points, Metrics, SpeakerRoc};
pub use report::{
    round_sig, write_curve_csv, write_report, write_roc_csv, BenchmarkReport, CombinationResult, CurvePoint,
    PublishedReference, RunMetadata, REPORT_FORMAT, REPORT_VERSION,
};
pub use synth::{
    generate_synthetic_corpus, synthesize, voice_profiles, VoiceProfile, LEADING_SILENCE_MS, SYNTH_SAMPLE_RATE,
};

/// One recording in a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative paths are resolved against the manifest's directory.
    pub path: PathBuf,
    pub speaker: u32,
    pub sample: u32,
}

/// Recordings with speaker ids, ordered by `(speaker, sample)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
    sample_rate: u32,
}

impl CorpusManifest {
    /// Needs at least two speakers with at least two recordings each and no
    /// repeated `(speaker, sample)` pair.
    pub fn new(root: impl Into<PathBuf>, mut entries: Vec<ManifestEntry>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidDataset("sample rate must be positive".into()));
        }
        entries.sort_by_key(|e| (e.speaker, e.sample));
        if let Some(w) = entries.windows(2).find(|w| (w[0].speaker, w[0].sample) == (w[1].speaker, w[1].sample)) {
            return Err(Error::InvalidDataset(format!(
                "speaker {} sample {} listed twice",
                w[0].speaker, w[0].sample
            )));
        }
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for e in &entries {
            *counts.entry(e.speaker).or_default() += 1;
        }
        if counts.len() < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 speakers, got {}", counts.len())));
        }
        if let Some((s, c)) = counts.iter().find(|(_, &c)| c < 2) {
            return Err(Error::InvalidDataset(format!("speaker {s} has {c} recording(s); need at least 2")));
        }
        Ok(Self { root: root.into(), entries, sample_rate })
    }

    /// Reads a `path,speaker,sample` CSV. The sample rate is taken from the
    /// first recording; the others are checked when loaded.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let entries: Vec<ManifestEntry> = r.deserialize().collect::<std::result::Result<_, _>>()?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let first = entries.first().ok_or_else(|| Error::InvalidDataset("manifest is empty".into()))?;
        let rate = load_wav(root.join(&first.path))?.sample_rate();
        Self::new(root, entries, rate)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// Distinct speaker ids, ascending. Class `i` of every model is speaker
    /// `speakers()[i]`.
    pub fn speakers(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.entries.iter().map(|e| e.speaker).collect();
        s.dedup();
        s
    }

    /// The corpus restricted to the `n` lowest speaker ids.
    pub fn first_speakers(&self, n: usize) -> Result<Self> {
        let speakers = self.speakers();
        if n > speakers.len() {
            return Err(Error::InvalidConfig(format!(
                "asked for {n} speakers but the manifest has {}",
                speakers.len()
            )));
        }
        let keep = &speakers[..n];
        let entries = self.entries.iter().filter(|e| keep.contains(&e.speaker)).cloned().collect();
        Self::new(self.root.clone(), entries, self.sample_rate)
    }
}

/// Which recordings are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SplitPolicy {
    /// Per speaker, one recording is held out for testing and the rest train.
    /// `rotation = Some(r)` holds out the `r mod count`-th sample of every
    /// speaker; `None` picks one per speaker from the master seed.
    HoldOut { rotation: Option<usize> },
    /// Trains and evaluates on every frame. Only useful as a sanity check.
    TestEqualsTrain,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy::HoldOut { rotation: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchOptions {
    pub silence: SilenceConfig,
    /// Evenly strided subsample of each recording's frames. SNE cost grows
    /// with the square of the pooled frame count; `None` keeps every frame.
    pub max_frames_per_recording: Option<usize>,
    pub split: SplitPolicy,
    /// A speaker counts as distinguishable when its test recall exceeds this.
    pub distinguishable_threshold: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            silence: SilenceConfig::default(),
            max_frames_per_recording: Some(40),
            split: SplitPolicy::default(),
            distinguishable_threshold: 0.5,
        }
    }
}

impl BenchOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_frames_per_recording == Some(0) {
            return Err(Error::InvalidConfig("max_frames_per_recording must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.distinguishable_threshold) {
            return Err(Error::InvalidConfig(format!(
                "distinguishable_threshold {} outside [0, 1]",
                self.distinguishable_threshold
            )));
        }
        Ok(())
    }
}

/// One extractor, reducer and classifier with their settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub extractor: ExtractorConfig,
    pub reducer: ReducerConfig,
    pub classifier: ClassifierKind,
    pub params: ClassifierParams,
}

impl Combination {
    /// Default settings for each stage.
    pub fn new(extractor: ExtractorKind, reducer: ReducerKind, classifier: ClassifierKind) -> Self {
        Self {
            extractor: ExtractorConfig::new(extractor),
            reducer: ReducerConfig::new(reducer),
            classifier,
            params: ClassifierParams::default(),
        }
    }

    /// `extractor-reducer`, the seed id of the embedding.
    pub fn embedding_id(&self) -> String {
        format!("{}-{}", self.extractor.kind.as_str(), self.reducer.kind.as_str())
    }

    /// `extractor-reducer-classifier`, e.g. `mfcc-sne-knn`.
    pub fn id(&self) -> String {
        format!("{}-{}", self.embedding_id(), self.classifier.as_str())
    }
}

/// The sweep definition, readable from TOML or JSON. Every field is
/// optional; the default is the full 3 x 2 x 5 grid.
///
/// ```toml
/// extractors = ["mfcc", "plp"]
/// reducers = ["sne"]
/// classifiers = ["knn", "svm"]
///
/// [sne]
/// perplexity = 20.0
///
/// [classifier_params]
/// k = 5
///
/// [options]
/// max_frames_per_recording = 30
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub extractors: Vec<ExtractorKind>,
    pub reducers: Vec<ReducerKind>,
    pub classifiers: Vec<ClassifierKind>,
    pub pca_dim: usize,
    pub sne: SneConfig,
    pub classifier_params: ClassifierParams,
    pub options: BenchOptions,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            extractors: ExtractorKind::ALL.to_vec(),
            reducers: ReducerKind::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            pca_dim: 2,
            sne: SneConfig::default(),
            classifier_params: ClassifierParams::default(),
            options: BenchOptions::default(),
        }
    }
}

impl SweepGrid {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("grid: {e}")))
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let grid = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)?
        } else {
            Self::from_toml_str(&text)?
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.extractors.is_empty() || self.reducers.is_empty() || self.classifiers.is_empty() {
            return Err(Error::InvalidConfig("grid needs at least one extractor, reducer and classifier".into()));
        }
        self.options.validate()
    }

    /// Every combination, extractor-major, in grid order.
    pub fn combinations(&self) -> Vec<Combination> {
        let mut out = Vec::new();
        for &e in &self.extractors {
            for &r in &self.reducers {
                for &c in &self.classifiers {
                    let mut combo = Combination::new(e, r, c);
                    combo.reducer.pca_dim = self.pca_dim;
                    combo.reducer.sne = self.sne;
                    combo.params = self.classifier_params;
                    out.push(combo);
                }
            }
        }
        out
    }
}

/// A trimmed recording and its place in the split.
struct Recording {
    source: String,
    class: usize,
    test: bool,
    signal: AudioSignal,
}

struct Prepared {
    speakers: Vec<u32>,
    recordings: Vec<Recording>,
    evaluate_all: bool,
}

impl Prepared {
    fn held_out(&self) -> Vec<String> {
        self.recordings.iter().filter(|r| r.test).map(|r| r.source.clone()).collect()
    }
}

/// Test flag per manifest entry.
fn split_flags(manifest: &CorpusManifest, policy: SplitPolicy, seed: u64) -> Vec<bool> {
    let entries = manifest.entries();
    match policy {
        SplitPolicy::TestEqualsTrain => vec![false; entries.len()],
        SplitPolicy::HoldOut { rotation } => {
            let mut flags = vec![false; entries.len()];
            let mut start = 0;
            while start < entries.len() {
                let speaker = entries[start].speaker;
                let count = entries[start..].iter().take_while(|e| e.speaker == speaker).count();
                let pick = match rotation {
                    Some(r) => r % count,
                    None => (derive_seed(seed, &format!("holdout-{speaker}")) % count as u64) as usize,
                };
                flags[start + pick] = true;
                start += count;
            }
            flags
        }
    }
}

fn prepare(manifest: &CorpusManifest, options: &BenchOptions, seed: u64) -> Result<Prepared> {
    options.validate()?;
    let speakers = manifest.speakers();
    let flags = split_flags(manifest, options.split, seed);
    let recordings = manifest
        .entries()
        .par_iter()
        .zip(flags.par_iter())
        .map(|(entry, &test)| {
            let signal = load_wav(manifest.resolve(entry))?;
            if signal.sample_rate() != manifest.sample_rate() {
                return Err(Error::InvalidDataset(format!(
                    "{} is {} Hz; the corpus is {} Hz",
                    entry.path.display(),
                    signal.sample_rate(),
                    manifest.sample_rate()
                )));
            }
            let trimmed = trim_silence(&signal, &options.silence)?;
            Ok(Recording {
                source: entry.path.display().to_string(),
                class: speakers.binary_search(&entry.speaker).expect("speaker listed"),
                test,
                signal: trimmed.trimmed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        speakers,
        recordings,
        evaluate_all: options.split == SplitPolicy::TestEqualsTrain,
    })
}

/// Pooled frames of all recordings for one extractor.
struct FrameSet {
    values: Array2<f64>,
    classes: Vec<usize>,
    train_mask: Vec<bool>,
    eval_rows: Vec<usize>,
    /// Recording index of each row.
    recording: Vec<usize>,
    unstable_frames: usize,
}

/// `m` evenly spaced indices out of `n`, centred in their strata.
fn strided(n: usize, m: usize) -> Vec<usize> {
    if m >= n {
        return (0..n).collect();
    }
    (0..m).map(|i| (2 * i + 1) * n / (2 * m)).collect()
}

fn build_frames(prepared: &Prepared, config: &ExtractorConfig, options: &BenchOptions) -> Result<FrameSet> {
    let per_recording = prepared
        .recordings
        .par_iter()
        .map(|rec| {
            let f = extract(&rec.signal, config)?;
            let rows = strided(f.frame_count(), options.max_frames_per_recording.unwrap_or(usize::MAX));
            Ok((f.values.select(Axis(0), &rows), f.unstable_frames))
        })
        .collect::<Result<Vec<_>>>()?;

    let dim = per_recording.first().map_or(0, |(v, _)| v.ncols());
    let total: usize = per_recording.iter().map(|(v, _)| v.nrows()).sum();
    let mut flat = Vec::with_capacity(total * dim);
    let mut set = FrameSet {
        values: Array2::zeros((0, dim)),
        classes: Vec::with_capacity(total),
        train_mask: Vec::with_capacity(total),
        eval_rows: Vec::new(),
        recording: Vec::with_capacity(total),
        unstable_frames: 0,
    };
    for (r, ((values, unstable), rec)) in per_recording.iter().zip(&prepared.recordings).enumerate() {
        set.unstable_frames += unstable;
        for row in values.rows() {
            let idx = set.classes.len();
            flat.extend(row.iter());
            set.classes.push(rec.class);
            set.train_mask.push(!rec.test);
            set.recording.push(r);
            if rec.test || prepared.evaluate_all {
                set.eval_rows.push(idx);
            }
        }
    }
    set.values = Array2::from_shape_vec((total, dim), flat).expect("rows of equal width");
    Ok(set)
}

fn reduce_frames(frames: &FrameSet, config: &ReducerConfig) -> Result<Reduced> {
    reduce_for_pipeline(frames.values.view(), &frames.train_mask, config)
}

fn classify_frames(
    frames: &FrameSet,
    reduced: &Reduced,
    combo: &Combination,
    params: &ClassifierParams,
    speakers: &[u32],
    options: &BenchOptions,
) -> Result<Metrics> {
    let data = LabeledDataset::new(reduced.coords.clone(), frames.classes.clone(), frames.train_mask.clone())?;
    let model = train(combo.classifier, &data, params)?;
    let x = reduced.coords.select(Axis(0), &frames.eval_rows);
    let prediction = model.predict(x.view())?;
    let truth: Vec<usize> = frames.eval_rows.iter().map(|&i| frames.classes[i]).collect();
    let recording: Vec<usize> = frames.eval_rows.iter().map(|&i| frames.recording[i]).collect();
    evaluate(&truth, &prediction, &recording, speakers, options.distinguishable_threshold)
}

fn metadata(combo: &Combination, prepared: &Prepared, seed: u64) -> RunMetadata {
    let mut reducer = combo.reducer;
    reducer.sne.seed = derive_seed(seed, &combo.embedding_id());
    let mut params = combo.params;
    params.seed = derive_seed(seed, &combo.id());
    RunMetadata {
        master_seed: seed,
        reducer_seed: reducer.sne.seed,
        classifier_seed: params.seed,
        transductive: combo.reducer.kind == ReducerKind::Sne,
        extractor: combo.extractor,
        reducer,
        classifier_params: params,
        speakers: prepared.speakers.clone(),
        held_out: prepared.held_out(),
        evaluated_on_training_data: prepared.evaluate_all,
        train_frames: 0,
        test_frames: 0,
        unstable_frames: 0,
        reducer_final_cost: None,
    }
}

fn finish(
    combo: &Combination,
    mut meta: RunMetadata,
    frames: &std::result::Result<FrameSet, String>,
    reduced: &std::result::Result<Reduced, String>,
    prepared: &Prepared,
    options: &BenchOptions,
) -> CombinationResult {
    let outcome = match (frames, reduced) {
        (Err(e), _) => Err(format!("feature extraction: {e}")),
        (Ok(_), Err(e)) => Err(format!("reduction: {e}")),
        (Ok(f), Ok(r)) => {
            meta.train_frames = f.train_mask.iter().filter(|&&t| t).count();
            meta.test_frames = f.eval_rows.len();
            meta.unstable_frames = f.unstable_frames;
            meta.reducer_final_cost = r.final_cost;
            meta.transductive = r.transductive;
            classify_frames(f, r, combo, &meta.classifier_params, &prepared.speakers, options)
                .map_err(|e| format!("classifier: {e}"))
        }
    };
    match &outcome {
        Ok(m) => log::info!("{}: {:.1}% frame accuracy", combo.id(), m.frame_accuracy_pct),
        Err(e) => log::warn!("{} failed: {e}", combo.id()),
    }
    let (metrics, failure) = match outcome {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(e)),
    };
    CombinationResult {
        id: combo.id(),
        extractor: combo.extractor.kind,
        reducer: combo.reducer.kind,
        classifier: combo.classifier,
        metadata: meta,
        metrics,
        failure,
    }
}

/// Runs one combination end to end. Stage failures are returned as errors;
/// [`run_sweep`] records them in the report instead.
pub fn run_combination(
    manifest: &CorpusManifest,
    combo: &Combination,
    options: &BenchOptions,
    seed: u64,
) -> Result<CombinationResult> {
    let prepared = prepare(manifest, options, seed)?;
    let meta = metadata(combo, &prepared, seed);
    let frames = build_frames(&prepared, &combo.extractor, options)?;
    let reduced = reduce_frames(&frames, &meta.reducer)?;
    let result = finish(combo, meta, &Ok(frames), &Ok(reduced), &prepared, options);
    match &result.failure {
        Some(reason) => Err(Error::InvalidDataset(format!("{}: {reason}", result.id))),
        None => Ok(result),
    }
}

/// Runs every combination of `grid`. Entries follow
/// [`SweepGrid::combinations`]; a failing combination becomes an entry with
/// a failure reason.
pub fn run_sweep(manifest: &CorpusManifest, grid: &SweepGrid, seed: u64) -> Result<BenchmarkReport> {
    grid.validate()?;
    let options = &grid.options;
    let prepared = prepare(manifest, options, seed)?;
    let combos = grid.combinations();

    let frame_sets: Vec<std::result::Result<FrameSet, String>> = grid
        .extractors
        .par_iter()
        .map(|&kind| build_frames(&prepared, &ExtractorConfig::new(kind), options).map_err(|e| e.to_string()))
        .collect();

    let stage_keys: Vec<(usize, usize)> =
        (0..grid.extractors.len()).flat_map(|e| (0..grid.reducers.len()).map(move |r| (e, r))).collect();
    let embeddings: Vec<std::result::Result<Reduced, String>> = stage_keys
        .par_iter()
        .map(|&(e, r)| {
            // the first combination with this extractor and reducer carries the stage config
            let combo = &combos[(e * grid.reducers.len() + r) * grid.classifiers.len()];
            let meta = metadata(combo, &prepared, seed);
            match &frame_sets[e] {
                Ok(f) => reduce_frames(f, &meta.reducer).map_err(|err| err.to_string()),
                Err(err) => Err(err.clone()),
            }
        })
        .collect();

    let entries: Vec<CombinationResult> = (0..combos.len())
        .into_par_iter()
        .map(|i| {
            let combo = &combos[i];
            let stage = i / grid.classifiers.len();
            let e = stage / grid.reducers.len();
            let meta = metadata(combo, &prepared, seed);
            finish(combo, meta, &frame_sets[e], &embeddings[stage], &prepared, options)
        })
        .collect();

    Ok(BenchmarkReport::new(seed, prepared.speakers.clone(), manifest.entries().len(), *options, entries))
}

/// Runs `combo` on the first `n` speakers for each `n` in `speaker_counts`
/// and adds the per-speaker rate of change between consecutive rows.
pub fn speaker_scaling_curve(
    manifest: &CorpusManifest,
    combo: &Combination,
    speaker_counts: &[usize],
    options: &BenchOptions,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if speaker_counts.is_empty() {
        return Err(Error::InvalidConfig("no speaker counts given".into()));
    }
    let available = manifest.speakers().len();
    if let Some(&n) = speaker_counts.iter().find(|&&n| n > available || n < 2) {
        return Err(Error::InvalidConfig(format!(
            "speaker count {n} outside [2, {available}]"
        )));
    }
    let accuracies = speaker_counts
        .par_iter()
        .map(|&n| {
            let subset = manifest.first_speakers(n)?;
            let result = run_combination(&subset, combo, options, seed)?;
            Ok(result.metrics.expect("successful run has metrics").frame_accuracy_pct)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(speaker_counts
        .iter()
        .zip(&accuracies)
        .enumerate()
        .map(|(i, (&n, &acc))| CurvePoint {
            speakers: n,
            accuracy_pct: acc,
            delta_per_speaker: (i > 0).then(|| {
                (acc - accuracies[i - 1]) / (n as f64 - speaker_counts[i - 1] as f64)
            }),
        })
        .collect())
}
