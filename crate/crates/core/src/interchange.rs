//! File formats shared by the command-line tools.
//!
//! * Frame tables: CSV with header `source,speaker,frame,<p>1..<p>N`, where
//!   the prefix is `c` for cepstral features and `y` for embeddings. An empty
//!   speaker cell means the speaker is unknown.
//! * Model files: versioned JSON wrapping a [`TrainedClassifier`] and the
//!   mapping from class index to speaker id.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierParams, TrainedClassifier};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

pub const FEATURE_PREFIX: &str = "c";
pub const EMBEDDING_PREFIX: &str = "y";

/// Rows of per-frame vectors with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTable {
    pub sources: Vec<String>,
    pub speakers: Vec<Option<u32>>,
    pub frames: Vec<usize>,
    pub values: Array2<f64>,
}

impl FrameTable {
    pub fn empty(dim: usize) -> Self {
        Self {
            sources: Vec::new(),
            speakers: Vec::new(),
            frames: Vec::new(),
            values: Array2::zeros((0, dim)),
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn from_features(features: &FeatureMatrix) -> Self {
        let n = features.frame_count();
        Self {
            sources: vec![features.source.clone(); n],
            speakers: vec![features.speaker_label; n],
            frames: (0..n).collect(),
            values: features.values.clone(),
        }
    }

    /// Appends `other` below `self`.
    pub fn append(&mut self, other: &FrameTable) -> Result<()> {
        if !self.is_empty() && other.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        if self.is_empty() {
            self.values = other.values.clone();
        } else {
            self.values = ndarray::concatenate(ndarray::Axis(0), &[self.values.view(), other.values.view()])
                .expect("matching widths");
        }
        self.sources.extend(other.sources.iter().cloned());
        self.speakers.extend(&other.speakers);
        self.frames.extend(&other.frames);
        Ok(())
    }

    /// Same provenance with new values (e.g. after dimensionality reduction).
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: values.nrows() });
        }
        Ok(Self { values, ..self.clone() })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, prefix: &str) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(BufWriter::new(file), prefix)
    }

    pub fn write_csv_to<W: Write>(&self, writer: W, prefix: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["source".to_string(), "speaker".into(), "frame".into()];
        header.extend((1..=self.dim()).map(|i| format!("{prefix}{i}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.sources[i].clone(),
                self.speakers[i].map(|s| s.to_string()).unwrap_or_default(),
                self.frames[i].to_string(),
            ];
            rec.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::Parse(format!("flushing CSV: {e}")))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(BufReader::new(file))
    }

    pub fn read_csv_from<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 4 || &header[0] != "source" || &header[1] != "speaker" || &header[2] != "frame" {
            return Err(Error::Parse("expected header source,speaker,frame,<values>".into()));
        }
        let dim = header.len() - 3;
        let mut table = FrameTable::empty(dim);
        let mut flat = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 1));
            table.sources.push(rec[0].to_string());
            table.speakers.push(if rec[1].is_empty() {
                None
            } else {
                Some(rec[1].parse().map_err(|_| bad("speaker"))?)
            });
            table.frames.push(rec[2].parse().map_err(|_| bad("frame"))?);
            for v in rec.iter().skip(3) {
                flat.push(v.trim().parse::<f64>().map_err(|_| bad("value"))?);
            }
        }
        table.values = Array2::from_shape_vec((table.frames.len(), dim), flat)
            .map_err(|e| Error::Parse(format!("ragged rows: {e}")))?;
        Ok(table)
    }

    /// Distinct speaker ids, ascending. Fails if any row lacks a speaker.
    pub fn speaker_ids(&self) -> Result<Vec<u32>> {
        let mut ids = Vec::new();
        for (i, s) in self.speakers.iter().enumerate() {
            let s = s.ok_or_else(|| Error::InvalidDataset(format!("row {i} has no speaker label")))?;
            ids.push(s);
        }
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    /// Rows `range`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            sources: self.sources[start..end].to_vec(),
            speakers: self.speakers[start..end].to_vec(),
            frames: self.frames[start..end].to_vec(),
            values: self.values.slice(s![start..end, ..]).to_owned(),
        }
    }
}

pub const MODEL_FORMAT: &str = "spkid-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    /// Speaker id of each class index.
    pub speakers: Vec<u32>,
    pub params: ClassifierParams,
    pub classifier: TrainedClassifier,
}

impl ModelFile {
    pub fn new(classifier: TrainedClassifier, speakers: Vec<u32>, params: ClassifierParams) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            speakers,
            params,
            classifier,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let m: ModelFile = serde_json::from_reader(BufReader::new(file))?;
        if m.format != MODEL_FORMAT {
            return Err(Error::Parse(format!("not a model file (format '{}')", m.format)));
        }
        if m.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "model file version {} is not supported (expected {MODEL_VERSION})",
                m.version
            )));
        }
        if m.speakers.len() != m.classifier.class_count {
            return Err(Error::Parse("speaker map does not match class count".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{knn_train, LabeledDataset};
    use ndarray::array;

    fn table() -> FrameTable {
        FrameTable {
            sources: vec!["a.wav".into(), "a.wav".into(), "b, c.wav".into()],
            speakers: vec![Some(3), Some(3), None],
            frames: vec![0, 1, 0],
            values: array![[1.5, -2.0], [0.1, 1e-300], [f64::MAX, -0.0]],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = table();
        let mut buf = Vec::new();
        t.write_csv_to(&mut buf, FEATURE_PREFIX).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("source,speaker,frame,c1,c2\n"));
        let back = FrameTable::read_csv_from(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_header_and_values() {
        assert!(FrameTable::read_csv_from("a,b,c,d\n".as_bytes()).is_err());
        assert!(FrameTable::read_csv_from("source,speaker,frame,y1\nx,1,0,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn speaker_ids_need_labels() {
        assert!(table().speaker_ids().is_err());
        assert_eq!(table().slice(0, 2).speaker_ids().unwrap(), vec![3]);
    }

    #[test]
    fn model_file_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let d = LabeledDataset::all_train(array![[0.0], [1.0]], vec![0, 1]).unwrap();
        let m = ModelFile::new(knn_train(&d, 1).unwrap(), vec![7, 9], ClassifierParams::default());
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(ModelFile::load(&path).unwrap(), m);

        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        v["version"] = 99.into();
        std::fs::write(&path, v.to_string()).unwrap();
        assert!(ModelFile::load(&path).is_err());
    }
}
