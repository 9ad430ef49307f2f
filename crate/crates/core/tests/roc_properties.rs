use ndarray::Array2;
use proptest::prelude::*;

use spkid::bench::{auc, evaluate, roc_curve, round_sig};
use spkid::classify::Prediction;

fn pairwise_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let (mut good, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positives[i] && !positives[j] {
                pairs += 1.0;
                good += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    good / pairs
}

fn labelled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60).prop_flat_map(|n| {
        (prop::collection::vec(0u8..12, n), prop::collection::vec(any::<bool>(), n)).prop_map(|(s, mut p)| {
            p[0] = true;
            p[1] = false;
            (s.into_iter().map(|v| f64::from(v) / 11.0).collect(), p)
        })
    })
}

proptest! {
    #[test]
    fn roc_is_monotone_and_matches_pairwise_auc((scores, positives) in labelled_scores()) {
        let pts = roc_curve(&scores, &positives).unwrap();
        prop_assert_eq!(pts[0], (0.0, 0.0));
        prop_assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        prop_assert!(pts.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1));
        let a = auc(&pts);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a - pairwise_auc(&scores, &positives)).abs() < 1e-9);
    }

    #[test]
    fn flipping_scores_mirrors_auc((scores, positives) in labelled_scores()) {
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auc(&roc_curve(&scores, &positives).unwrap());
        let b = auc(&roc_curve(&flipped, &positives).unwrap());
        prop_assert!((a + b - 1.0).abs() < 1e-9);
    }

    #[test]
    fn evaluation_invariants(
        rows in prop::collection::vec((0usize..4, 0usize..4, 0usize..5), 1..80),
        threshold in 0.0f64..1.0,
    ) {
        let truth: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let recording: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let scores = Array2::from_shape_fn((rows.len(), 4), |(i, c)| if c == labels[i] { 1.0 } else { 0.0 });
        let m = evaluate(&truth, &Prediction { labels, scores }, &recording, &[3, 5, 7, 9], threshold).unwrap();
        let total: u64 = m.confusion.iter().flatten().sum();
        prop_assert_eq!(total as usize, rows.len());
        let trace: u64 = (0..4).map(|c| m.confusion[c][c]).sum();
        prop_assert!((100.0 * trace as f64 / total as f64 - m.frame_accuracy_pct).abs() < 1e-9);
        prop_assert!((0.0..=100.0).contains(&m.frame_accuracy_pct));
        prop_assert!((0.0..=100.0).contains(&m.utterance_accuracy_pct));
        prop_assert!(m.distinguishable_count <= 4);
        for (c, r) in m.per_speaker_recall.iter().enumerate() {
            let present = truth.contains(&c);
            prop_assert_eq!(r.is_some(), present);
            if let Some(r) = r {
                prop_assert!((0.0..=1.0).contains(r));
            }
        }
    }

    #[test]
    fn six_digit_rounding_is_idempotent(x in -1e12f64..1e12) {
        let r = round_sig(x);
        prop_assert_eq!(round_sig(r), r);
        prop_assert!((r - x).abs() <= 5e-6 * x.abs());
    }
}
