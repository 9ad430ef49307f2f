//! Report types and their JSON/CSV renderings.
//!
//! Every float written to disk is rounded to six significant digits first, so
//! reports are stable across platforms whose last-bit arithmetic differs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::metrics::Metrics;
use super::BenchOptions;
use crate::classify::{ClassifierKind, ClassifierParams};
use crate::features::{ExtractorConfig, ExtractorKind};
use crate::reduce::{ReducerConfig, ReducerKind};
use crate::{Error, Result};

pub const REPORT_FORMAT: &str = "spkid-bench-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub master_seed: u64,
    pub reducer_seed: u64,
    pub classifier_seed: u64,
    /// True when test frames took part in fitting the reducer.
    pub transductive: bool,
    pub extractor: ExtractorConfig,
    pub reducer: ReducerConfig,
    pub classifier_params: ClassifierParams,
    /// Speaker id of each class index.
    pub speakers: Vec<u32>,
    /// Manifest paths of the test recordings.
    pub held_out: Vec<String>,
    pub evaluated_on_training_data: bool,
    pub train_frames: usize,
    pub test_frames: usize,
    pub unstable_frames: usize,
    pub reducer_final_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationResult {
    pub id: String,
    pub extractor: ExtractorKind,
    pub reducer: ReducerKind,
    pub classifier: ClassifierKind,
    pub metadata: RunMetadata,
    pub metrics: Option<Metrics>,
    pub failure: Option<String>,
}

/// One row of a speaker-count curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub speakers: usize,
    pub accuracy_pct: f64,
    /// Accuracy change per added speaker since the previous row.
    pub delta_per_speaker: Option<f64>,
}

/// Published figures for the same protocol on a different, private corpus.
/// Shipped for side-by-side reading only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedReference {
    pub label: String,
    pub extractors: Vec<ExtractorKind>,
    pub classifiers: Vec<ClassifierKind>,
    /// Frame accuracy in percent, `[classifier][extractor]`.
    pub accuracy_sne: Vec<Vec<f64>>,
    pub accuracy_pca: Vec<Vec<f64>>,
    /// Distinguishable speakers out of 7, `[classifier][extractor]`.
    pub distinguishable_sne: Vec<Vec<u32>>,
    pub distinguishable_pca: Vec<Vec<u32>>,
    pub curve_speakers: Vec<usize>,
    /// SNE + weighted k-NN accuracy per speaker count, `[extractor][count]`.
    pub curve_sne_knn: Vec<Vec<f64>>,
}

impl Default for PublishedReference {
    fn default() -> Self {
        Self {
            label: "published reference, different corpus".into(),
            extractors: ExtractorKind::ALL.to_vec(),
            classifiers: ClassifierKind::ALL.to_vec(),
            accuracy_sne: vec![
                vec![51.2, 33.4, 44.0],
                vec![68.9, 51.3, 66.3],
                vec![57.9, 38.0, 52.8],
                vec![51.5, 47.0, 50.3],
                vec![67.4, 47.3, 66.2],
            ],
            accuracy_pca: vec![
                vec![20.2, 22.1, 24.0],
                vec![17.1, 25.0, 26.4],
                vec![23.0, 18.5, 22.0],
                vec![18.0, 17.5, 20.0],
                vec![13.7, 18.6, 22.4],
            ],
            distinguishable_sne: vec![vec![4, 2, 3], vec![7, 5, 7], vec![6, 2, 6], vec![4, 3, 5], vec![7, 5, 7]],
            distinguishable_pca: vec![vec![2, 1, 2], vec![1, 1, 2], vec![1, 1, 1], vec![2, 1, 1], vec![1, 1, 1]],
            curve_speakers: vec![2, 3, 4, 5, 6, 7],
            curve_sne_knn: vec![
                vec![87.2, 81.2, 74.5, 69.7, 67.1, 66.9],
                vec![81.3, 70.0, 60.2, 54.9, 53.1, 49.1],
                vec![86.2, 79.6, 74.6, 70.4, 68.5, 66.3],
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub format: String,
    pub version: u32,
    pub master_seed: u64,
    pub speakers: Vec<u32>,
    pub recordings: usize,
    pub options: BenchOptions,
    pub entries: Vec<CombinationResult>,
    pub published_reference: PublishedReference,
}

impl BenchmarkReport {
    pub fn new(
        master_seed: u64,
        speakers: Vec<u32>,
        recordings: usize,
        options: BenchOptions,
        entries: Vec<CombinationResult>,
    ) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            master_seed,
            speakers,
            recordings,
            options,
            entries,
            published_reference: PublishedReference::default(),
        }
    }

    pub fn entry(&self, id: &str) -> Option<&CombinationResult> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Pretty JSON with floats rounded to six significant digits.
    pub fn to_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        round_json(&mut v);
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let report: Self = serde_json::from_str(&text)?;
        if report.format != REPORT_FORMAT || report.version != REPORT_VERSION {
            return Err(Error::Parse(format!(
                "{} is not a version {REPORT_VERSION} benchmark report",
                path.display()
            )));
        }
        Ok(report)
    }
}

/// `x` rounded to six significant digits. Zero and non-finite values pass
/// through.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

fn fmt(x: f64) -> String {
    round_sig(x).to_string()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut w = create(path)?;
    for line in lines {
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `classifier,<extractors>` table, rows in the canonical classifier order.
fn table_lines<F>(extractors: &[ExtractorKind], classifiers: &[ClassifierKind], cell: F) -> Vec<String>
where
    F: Fn(ClassifierKind, ExtractorKind) -> String,
{
    let mut lines = vec![std::iter::once("classifier")
        .chain(extractors.iter().map(|e| e.as_str()))
        .collect::<Vec<_>>()
        .join(",")];
    for &c in classifiers {
        let mut row = vec![c.table_label().to_string()];
        row.extend(extractors.iter().map(|&e| cell(c, e)));
        lines.push(row.join(","));
    }
    lines
}

pub fn write_roc_csv(path: impl AsRef<Path>, points: &[(f64, f64)]) -> Result<()> {
    let mut lines = vec!["fpr,tpr".to_string()];
    lines.extend(points.iter().map(|(x, y)| format!("{},{}", fmt(*x), fmt(*y))));
    write_lines(path.as_ref(), &lines)
}

/// `speakers,accuracy_pct,delta_per_speaker`; the first delta is empty.
pub fn write_curve_csv(path: impl AsRef<Path>, points: &[CurvePoint]) -> Result<()> {
    let mut lines = vec!["speakers,accuracy_pct,delta_per_speaker".to_string()];
    lines.extend(points.iter().map(|p| {
        format!("{},{},{}", p.speakers, fmt(p.accuracy_pct), p.delta_per_speaker.map(fmt).unwrap_or_default())
    }));
    write_lines(path.as_ref(), &lines)
}

/// Writes `report.json`, per-reducer accuracy and distinguishable-count
/// tables, one ROC CSV per defined speaker curve under `roc/`, and the
/// published reference tables. Returns the paths written.
pub fn write_report(dir: impl AsRef<Path>, report: &BenchmarkReport) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir.join("roc")).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let json_path = dir.join("report.json");
    std::fs::write(&json_path, report.to_json()?).map_err(|e| Error::io(&json_path, e))?;
    written.push(json_path);

    let present = |all: &[ExtractorKind]| -> Vec<ExtractorKind> {
        all.iter().copied().filter(|e| report.entries.iter().any(|r| r.extractor == *e)).collect()
    };
    let extractors = present(&ExtractorKind::ALL);
    let classifiers: Vec<ClassifierKind> = ClassifierKind::ALL
        .into_iter()
        .filter(|c| report.entries.iter().any(|r| r.classifier == *c))
        .collect();
    for reducer in ReducerKind::ALL {
        if !report.entries.iter().any(|r| r.reducer == reducer) {
            continue;
        }
        let find = |c: ClassifierKind, e: ExtractorKind| {
            report.entries.iter().find(|r| r.reducer == reducer && r.classifier == c && r.extractor == e)
        };
        let cell = |c, e, f: &dyn Fn(&Metrics) -> String| match find(c, e) {
            Some(CombinationResult { metrics: Some(m), .. }) => f(m),
            Some(_) => "failed".to_string(),
            None => String::new(),
        };
        let acc = table_lines(&extractors, &classifiers, |c, e| cell(c, e, &|m| fmt(m.frame_accuracy_pct)));
        let dist = table_lines(&extractors, &classifiers, |c, e| {
            cell(c, e, &|m| m.distinguishable_count.to_string())
        });
        for (name, lines) in [("accuracy", acc), ("distinguishable", dist)] {
            let path = dir.join(format!("table_{name}_{}.csv", reducer.as_str()));
            write_lines(&path, &lines)?;
            written.push(path);
        }
    }

    for entry in &report.entries {
        let Some(m) = &entry.metrics else { continue };
        for roc in m.roc_curves.iter().filter(|r| r.undefined.is_none()) {
            let path = dir.join("roc").join(format!("{}_speaker{}.csv", entry.id, roc.speaker));
            write_roc_csv(&path, &roc.points)?;
            written.push(path);
        }
    }

    let reference = &report.published_reference;
    let idx = |c: ClassifierKind, e: ExtractorKind| {
        let ci = reference.classifiers.iter().position(|&x| x == c).expect("reference row");
        let ei = reference.extractors.iter().position(|&x| x == e).expect("reference column");
        (ci, ei)
    };
    let all_e = ExtractorKind::ALL;
    let all_c = ClassifierKind::ALL;
    let tables: [(&str, Vec<String>); 4] = [
        ("reference_accuracy_sne", table_lines(&all_e, &all_c, |c, e| {
            let (i, j) = idx(c, e);
            fmt(reference.accuracy_sne[i][j])
        })),
        ("reference_accuracy_pca", table_lines(&all_e, &all_c, |c, e| {
            let (i, j) = idx(c, e);
            fmt(reference.accuracy_pca[i][j])
        })),
        ("reference_distinguishable_sne", table_lines(&all_e, &all_c, |c, e| {
            let (i, j) = idx(c, e);
            reference.distinguishable_sne[i][j].to_string()
        })),
        ("reference_distinguishable_pca", table_lines(&all_e, &all_c, |c, e| {
            let (i, j) = idx(c, e);
            reference.distinguishable_pca[i][j].to_string()
        })),
    ];
    for (name, lines) in tables {
        let path = dir.join(format!("{name}.csv"));
        write_lines(&path, &lines)?;
        written.push(path);
    }
    let mut curve = vec![std::iter::once("speakers")
        .chain(reference.extractors.iter().map(|e| e.as_str()))
        .collect::<Vec<_>>()
        .join(",")];
    for (k, n) in reference.curve_speakers.iter().enumerate() {
        let mut row = vec![n.to_string()];
        row.extend(reference.curve_sne_knn.iter().map(|col| fmt(col[k])));
        curve.push(row.join(","));
    }
    let path = dir.join("reference_curve_sne_knn.csv");
    write_lines(&path, &curve)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(round_sig(68.94321987), 68.9432);
        assert_eq!(round_sig(-0.000123456789), -0.000123457);
        assert_eq!(round_sig(1234567.0), 1234570.0);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::NAN).is_nan());
        let mut v = serde_json::json!({"a": [1.23456789, 3], "b": {"c": 2.0e-10 / 3.0}});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[1.23457,3],"b":{"c":6.66667e-11}}"#);
    }

    #[test]
    fn reference_rows_follow_table_order() {
        let r = PublishedReference::default();
        assert_eq!(r.classifiers[0].table_label(), "complex tree");
        assert_eq!(r.accuracy_sne[1][0], 68.9);
        assert_eq!(r.curve_sne_knn[0], vec![87.2, 81.2, 74.5, 69.7, 67.1, 66.9]);
        assert_eq!(r.distinguishable_sne[4], vec![7, 5, 7]);
    }

    #[test]
    fn curve_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let pts = [
            CurvePoint { speakers: 2, accuracy_pct: 90.0, delta_per_speaker: None },
            CurvePoint { speakers: 4, accuracy_pct: 80.0, delta_per_speaker: Some(-5.0) },
        ];
        write_curve_csv(&path, &pts).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "speakers,accuracy_pct,delta_per_speaker\n2,90,\n4,80,-5\n");
    }
}
