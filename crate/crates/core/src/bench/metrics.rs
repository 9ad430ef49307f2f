//! Frame-level metrics and one-vs-rest ROC curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::CombinationResult;
use crate::classify::Prediction;
use crate::{Error, Result};

/// ROC data of one speaker against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerRoc {
    pub speaker: u32,
    /// `(false positive rate, true positive rate)`, from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: Option<f64>,
    /// Why the curve is missing, when it is.
    pub undefined: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub frame_accuracy_pct: f64,
    /// Indexed by class; `None` when a speaker has no test frames.
    pub per_speaker_recall: Vec<Option<f64>>,
    pub distinguishable_count: usize,
    /// `confusion[true][predicted]` frame counts.
    pub confusion: Vec<Vec<u64>>,
    /// Majority vote over each test recording's frames.
    pub utterance_accuracy_pct: f64,
    pub roc_curves: Vec<SpeakerRoc>,
    pub test_labels: Vec<usize>,
    pub test_scores: Vec<Vec<f64>>,
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], classes: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t][p] += 1;
    }
    m
}

/// One-vs-rest ROC for the given scores, one point per distinct threshold.
/// Tied scores move both rates at once, so the trapezoid area equals the
/// probability that a random positive outscores a random negative (ties
/// counting one half).
pub fn roc_curve(scores: &[f64], positives: &[bool]) -> std::result::Result<Vec<(f64, f64)>, &'static str> {
    assert_eq!(scores.len(), positives.len(), "one label per score");
    let p = positives.iter().filter(|&&x| x).count();
    let n = positives.len() - p;
    if p == 0 {
        return Err("no positive test frames");
    }
    if n == 0 {
        return Err("no negative test frames");
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err("non-finite scores");
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positives[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(points)
}

/// Trapezoid area under a curve given as ordered points.
pub fn auc(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

/// Metrics over evaluated frames. `recording` groups frames for the
/// utterance vote; `speakers[c]` is the speaker id of class `c`.
pub fn evaluate(
    truth: &[usize],
    prediction: &Prediction,
    recording: &[usize],
    speakers: &[u32],
    threshold: f64,
) -> Result<Metrics> {
    let k = speakers.len();
    let n = truth.len();
    if n == 0 {
        return Err(Error::InvalidDataset("no test frames".into()));
    }
    for len in [prediction.labels.len(), prediction.scores.nrows(), recording.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    if prediction.scores.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, got: prediction.scores.ncols() });
    }
    if let Some(&bad) = truth.iter().chain(&prediction.labels).find(|&&c| c >= k) {
        return Err(Error::InvalidDataset(format!("class {bad} outside 0..{k}")));
    }

    let confusion = confusion_matrix(truth, &prediction.labels, k);
    let correct: u64 = (0..k).map(|c| confusion[c][c]).sum();
    let per_speaker_recall: Vec<Option<f64>> = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: u64 = row.iter().sum();
            (total > 0).then(|| row[c] as f64 / total as f64)
        })
        .collect();
    let distinguishable_count = per_speaker_recall.iter().filter(|r| r.is_some_and(|r| r > threshold)).count();

    let mut votes: BTreeMap<usize, (usize, Vec<usize>)> = BTreeMap::new();
    for i in 0..n {
        let (_, counts) = votes.entry(recording[i]).or_insert_with(|| (truth[i], vec![0; k]));
        counts[prediction.labels[i]] += 1;
    }
    let utterances_right = votes
        .values()
        .filter(|(t, counts)| {
            let best = counts.iter().copied().max().unwrap_or(0);
            counts.iter().position(|&c| c == best) == Some(*t)
        })
        .count();

    let roc_curves = (0..k)
        .map(|c| {
            let scores: Vec<f64> = prediction.scores.column(c).to_vec();
            let positives: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            match roc_curve(&scores, &positives) {
                Ok(points) => SpeakerRoc { speaker: speakers[c], auc: Some(auc(&points)), points, undefined: None },
                Err(reason) => {
                    SpeakerRoc { speaker: speakers[c], points: Vec::new(), auc: None, undefined: Some(reason.into()) }
                }
            }
        })
        .collect();

    Ok(Metrics {
        frame_accuracy_pct: 100.0 * correct as f64 / n as f64,
        per_speaker_recall,
        distinguishable_count,
        confusion,
        utterance_accuracy_pct: 100.0 * utterances_right as f64 / votes.len() as f64,
        roc_curves,
        test_labels: truth.to_vec(),
        test_scores: prediction.scores.rows().into_iter().map(|r| r.to_vec()).collect(),
    })
}

/// ROC of `speaker` recomputed from an entry's stored test scores.
pub fn roc_points(entry: &CombinationResult, speaker: u32) -> Result<Vec<(f64, f64)>> {
    let metrics = entry
        .metrics
        .as_ref()
        .ok_or_else(|| Error::InvalidDataset(format!("combination {} has no scores", entry.id)))?;
    let class = entry
        .metadata
        .speakers
        .iter()
        .position(|&s| s == speaker)
        .ok_or_else(|| Error::InvalidConfig(format!("speaker {speaker} is not in {}", entry.id)))?;
    let scores: Vec<f64> = metrics.test_scores.iter().map(|row| row[class]).collect();
    let positives: Vec<bool> = metrics.test_labels.iter().map(|&t| t == class).collect();
    roc_curve(&scores, &positives).map_err(|reason| Error::UndefinedRoc { speaker: speaker as usize, reason })
}
