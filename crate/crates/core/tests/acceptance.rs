//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit status if
//! any criterion fails. Each check computes its expected values with an
//! independent oracle or a hand-evaluated closed form.

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use spkid::audio::{frame_signal, hamming_window, AudioSignal};
use spkid::bench::{
    auc, generate_synthetic_corpus, roc_curve, run_sweep, speaker_scaling_curve, write_report, BenchOptions,
    Combination, CorpusManifest, SweepGrid,
};
use spkid::classify::{
    knn_train, svm_train, tree_train, ClassifierKind, ClassifierParams, FfnnNetwork, LabeledDataset, Model, KNN_EPSILON,
};
use spkid::features::{autocorrelation, bark_scale, frame_lpc, levinson_durbin, mel_scale, ExtractorKind};
use spkid::preprocessing::{fit_silence_model, SilenceConfig};
use spkid::reduce::{
    conditional_q, covariance, pca_fit, sne_conditional_p, sne_cost_and_gradient, sne_fit, ReducerKind, SneConfig,
    SneKernel,
};

type Check = Result<String, String>;

const MASTER_SEED: u64 = 7;
const CORPUS_SPEAKERS: usize = 7;
const CORPUS_SAMPLES: usize = 3;
const CORPUS_SECONDS: f64 = 3.0;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn formula_fidelity() -> Check {
    let mel = mel_scale(700.0);
    let mel_oracle = 1125.0 * 2f64.ln();
    ensure((mel - mel_oracle).abs() <= 1e-9, || format!("Mel(700) = {mel}, expected {mel_oracle}"))?;
    let bark = bark_scale(1200.0 * PI);
    let bark_oracle = 6.0 * (1.0 + 2f64.sqrt()).ln();
    ensure((bark - bark_oracle).abs() <= 1e-9, || format!("Bark(1200 pi) = {bark}, expected {bark_oracle}"))?;
    for len in [400, 401] {
        let w = hamming_window(len).map_err(|e| e.to_string())?;
        ensure((w[0] - 0.08).abs() <= 1e-12 && (w[len - 1] - 0.08).abs() <= 1e-12, || {
            format!("Hamming ends {} / {} for N = {len}", w[0], w[len - 1])
        })?;
    }
    Ok(format!("Mel(700) = {mel:.10}, Bark(1200 pi) = {bark:.10}, w(0) = 0.08"))
}

fn normal_masses() -> Check {
    // 200 ms at 500 kHz is exactly 1e5 samples, all of them in the fitted window
    let rate = 500_000;
    let n = 100_000;
    let (mu, sigma) = (0.01, 0.002);
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let dist = Normal::new(mu, sigma).expect("valid normal");
    let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
    let signal = AudioSignal::new(draws.clone(), rate).map_err(|e| e.to_string())?;
    let model = fit_silence_model(&signal, &SilenceConfig::default()).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for (k, expected) in [(1.0, 68.0), (2.0, 95.0), (3.0, 99.7)] {
        let inside = draws.iter().filter(|&&x| model.standardize(x).abs() <= k).count();
        let pct = 100.0 * inside as f64 / n as f64;
        ensure((pct - expected).abs() <= 1.5, || format!("|u| <= {k}: {pct:.2}% vs {expected}%"))?;
        detail.push(format!("{pct:.2}%"));
    }
    Ok(format!("within 1/2/3 sigma: {}", detail.join(" / ")))
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).expect("rows");
        m.swap(col, p);
        b.swap(col, p);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / m[i][i];
    }
    x
}

fn levinson_vs_dense() -> Check {
    let order = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let (mut worst, mut worst_dense) = (0.0f64, 0.0f64);
    for trial in 0..50 {
        let seq: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = autocorrelation(&seq, order);
        let toeplitz: Vec<Vec<f64>> =
            (0..order).map(|i| (0..order).map(|j| r[i.abs_diff(j)]).collect()).collect();
        let rhs = r[1..].to_vec();
        let a = levinson_durbin(&r).map_err(|e| format!("system {trial}: {e}"))?.coefficients;
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = (0..order)
            .map(|i| ((0..order).map(|j| toeplitz[i][j] * a[j]).sum::<f64>() - rhs[i]).abs())
            .fold(0.0, f64::max)
            / scale;
        let dense = dense_solve(toeplitz, rhs);
        let gap = a.iter().zip(&dense).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        worst = worst.max(residual);
        worst_dense = worst_dense.max(gap);
    }
    ensure(worst <= 1e-8, || format!("max relative residual {worst:e}"))?;
    Ok(format!("max relative residual {worst:.2e}, max gap to dense solve {worst_dense:.2e}"))
}

fn ar2_recovery() -> Check {
    // poles at 0.9 exp(+-i pi/5)
    let (radius, angle) = (0.9, PI / 5.0);
    let truth = [2.0 * radius * angle.cos(), -radius * radius];
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let noise = Normal::new(0.0, 0.01).expect("valid normal");
    let mut x = vec![0.0; 32_000];
    for n in 2..x.len() {
        x[n] = truth[0] * x[n - 1] + truth[1] * x[n - 2] + noise.sample(&mut rng);
    }
    let signal = AudioSignal::new(x, 16_000).map_err(|e| e.to_string())?;
    let frames = frame_signal(&signal, 25.0, 10.0).map_err(|e| e.to_string())?;
    let fits = frame_lpc(&frames, 2).map_err(|e| e.to_string())?;
    let mut mean = [0.0; 2];
    for fit in &fits {
        let c = &fit.as_ref().map_err(|e| e.to_string())?.coefficients;
        mean[0] += c[0] / fits.len() as f64;
        mean[1] += c[1] / fits.len() as f64;
    }
    let rel: Vec<f64> = (0..2).map(|k| ((mean[k] - truth[k]) / truth[k]).abs()).collect();
    ensure(rel.iter().all(|&r| r < 0.05), || format!("estimated {mean:?} vs {truth:?}"))?;
    Ok(format!(
        "a = ({:.4}, {:.4}) vs ({:.4}, {:.4}), relative errors {:.2}% / {:.2}%",
        mean[0],
        mean[1],
        truth[0],
        truth[1],
        100.0 * rel[0],
        100.0 * rel[1]
    ))
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// Summed conditional KL computed straight from the definition.
fn direct_kl(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let q = conditional_q(y.view(), SneKernel::Gaussian);
    let mut total = 0.0;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            if i != j && p[[i, j]] > 0.0 {
                total += p[[i, j]] * (p[[i, j]] / q[[i, j]]).ln();
            }
        }
    }
    total
}

fn sne_gradient_and_descent() -> Check {
    let x = random_matrix(10, 4, MASTER_SEED);
    let p = sne_conditional_p(x.view(), 3.0).map_err(|e| e.to_string())?;
    let y = random_matrix(10, 2, MASTER_SEED + 1);
    let (_, grad) = sne_cost_and_gradient(&p, &y, SneKernel::Gaussian);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..10 {
        for k in 0..2 {
            let mut plus = y.clone();
            plus[[i, k]] += h;
            let mut minus = y.clone();
            minus[[i, k]] -= h;
            let fd = (direct_kl(&p, &plus) - direct_kl(&p, &minus)) / (2.0 * h);
            worst = worst.max((grad[[i, k]] - fd).abs() / fd.abs().max(1e-8));
        }
    }
    ensure(worst < 1e-4, || format!("max relative gradient error {worst:e}"))?;
    let config = SneConfig { perplexity: Some(3.0), ..SneConfig::default() };
    let emb = sne_fit(x.view(), &config).map_err(|e| e.to_string())?;
    let (first, last) = (emb.cost_trace[0], emb.final_cost);
    ensure(last < first, || format!("cost {first} -> {last}"))?;
    Ok(format!("max relative gradient error {worst:.2e}; cost {first:.4} -> {last:.4}"))
}

fn pca_identities() -> Check {
    let base = random_matrix(300, 6, MASTER_SEED);
    let mix = random_matrix(6, 6, MASTER_SEED + 1);
    let data = base.dot(&mix);
    let model = pca_fit(data.view(), 6).map_err(|e| e.to_string())?;
    let (_, cov) = covariance(data.view());
    let trace: f64 = cov.diag().sum();
    let eig_sum: f64 = model.eigenvalues.iter().sum();
    ensure((eig_sum - trace).abs() <= 1e-8, || format!("eigenvalue sum {eig_sum} vs trace {trace}"))?;
    let z = model.transform(data.view()).map_err(|e| e.to_string())?;
    let (_, zc) = covariance(z.view());
    let mut off = 0.0f64;
    for i in 0..6 {
        for j in 0..6 {
            if i != j {
                off = off.max(zc[[i, j]].abs());
            }
        }
    }
    ensure(off < 1e-8, || format!("largest off-diagonal covariance {off:e}"))?;
    let back = model.inverse_transform(z.view()).map_err(|e| e.to_string())?;
    let err = (&back - &data).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ensure(err <= 1e-8, || format!("round-trip error {err:e}"))?;
    Ok(format!("trace gap {:.1e}, off-diagonal {off:.1e}, round trip {err:.1e}", (eig_sum - trace).abs()))
}

fn classifier_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);

    // weighted k-NN against a full sort
    let points = random_matrix(200, 3, MASTER_SEED);
    let labels: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
    let data = LabeledDataset::all_train(points.clone(), labels.clone()).map_err(|e| e.to_string())?;
    let k = 10;
    let model = knn_train(&data, k).map_err(|e| e.to_string())?;
    let queries = random_matrix(100, 3, MASTER_SEED + 1);
    let predicted = model.predict(queries.view()).map_err(|e| e.to_string())?.labels;
    for (qi, q) in queries.rows().into_iter().enumerate() {
        let mut d: Vec<(f64, usize)> = points
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = [0.0; 4];
        for &(d2, i) in &d[..k] {
            votes[labels[i]] += 1.0 / (KNN_EPSILON + d2);
        }
        let best = votes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let oracle = votes.iter().position(|&v| v == best).expect("non-empty");
        ensure(predicted[qi] == oracle, || format!("k-NN query {qi}: {} vs oracle {oracle}", predicted[qi]))?;
    }

    // feed-forward backprop against central differences
    let x = random_matrix(12, 5, MASTER_SEED + 2);
    let y: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let net = FfnnNetwork::init(5, (6, 4), 3, MASTER_SEED);
    let (_, grad) = net.loss_and_gradient(x.view(), &y).map_err(|e| e.to_string())?;
    let theta = net.parameters();
    let h = 1e-5;
    let mut worst_ffnn = 0.0f64;
    for i in 0..theta.len() {
        let mut plus = theta.clone();
        plus[i] += h;
        let mut minus = theta.clone();
        minus[i] -= h;
        let lp = net.with_parameters(&plus).and_then(|n| n.loss_and_gradient(x.view(), &y)).map_err(|e| e.to_string())?.0;
        let lm = net.with_parameters(&minus).and_then(|n| n.loss_and_gradient(x.view(), &y)).map_err(|e| e.to_string())?.0;
        let fd = (lp - lm) / (2.0 * h);
        worst_ffnn = worst_ffnn.max((grad[i] - fd).abs() / fd.abs().max(1e-8));
    }
    ensure(worst_ffnn < 1e-4, || format!("FFNN max relative gradient error {worst_ffnn:e}"))?;

    // SVM dual feasibility
    let centres = [(0.0, 0.0), (2.0, 0.0), (1.0, 1.7)];
    let noise = Normal::new(0.0, 0.7).expect("valid normal");
    let mut flat = Vec::new();
    let mut svm_labels = Vec::new();
    for (c, &(cx, cy)) in centres.iter().enumerate() {
        for _ in 0..30 {
            flat.push(cx + noise.sample(&mut rng));
            flat.push(cy + noise.sample(&mut rng));
            svm_labels.push(c);
        }
    }
    let svm_x = Array2::from_shape_vec((90, 2), flat).expect("90 x 2");
    let svm_data = LabeledDataset::all_train(svm_x, svm_labels).map_err(|e| e.to_string())?;
    let params = ClassifierParams::default();
    let svm = svm_train(&svm_data, &params).map_err(|e| e.to_string())?;
    let Model::Svm(s) = &svm.model else { return Err("svm_train returned another model".into()) };
    let mut worst_eq = 0.0f64;
    for m in &s.machines {
        ensure(m.alpha.iter().all(|&a| (-params.svm_tol..=s.box_c + params.svm_tol).contains(&a)), || {
            "alpha outside the box".to_string()
        })?;
        let eq: f64 = m.alpha.iter().zip(&m.targets).map(|(a, t)| a * t).sum();
        worst_eq = worst_eq.max(eq.abs());
    }
    ensure(worst_eq <= params.svm_tol, || format!("|y'alpha| = {worst_eq:e}"))?;

    // single tree on separable 1-D data
    let tx = Array2::from_shape_fn((60, 1), |(i, _)| i as f64 * 0.1);
    let ty: Vec<usize> = (0..60).map(|i| usize::from(i >= 23) + usize::from(i >= 41)).collect();
    let tdata = LabeledDataset::all_train(tx.clone(), ty.clone()).map_err(|e| e.to_string())?;
    let tree = tree_train(&tdata, params.max_splits, params.min_leaf).map_err(|e| e.to_string())?;
    let tp = tree.predict(tx.view()).map_err(|e| e.to_string())?.labels;
    ensure(tp == ty, || "tree misclassifies its own separable training data".to_string())?;

    Ok(format!(
        "k-NN 100/100 queries match; FFNN gradient error {worst_ffnn:.1e}; SVM max |y'alpha| {worst_eq:.1e} over {} machines; tree 60/60",
        s.machines.len()
    ))
}

fn synthetic_corpus(dir: &Path) -> Result<CorpusManifest, String> {
    generate_synthetic_corpus(dir, CORPUS_SPEAKERS, CORPUS_SAMPLES, CORPUS_SECONDS, MASTER_SEED)
        .map_err(|e| e.to_string())
}

fn end_to_end_trend() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = synthetic_corpus(dir.path())?;

    let start = Instant::now();
    let report = run_sweep(&manifest, &SweepGrid::default(), MASTER_SEED).map_err(|e| e.to_string())?;
    let sweep_time = start.elapsed();
    ensure(report.entries.len() == 30, || format!("{} sweep entries", report.entries.len()))?;
    ensure(sweep_time < Duration::from_secs(600), || format!("sweep took {sweep_time:?}"))?;
    let failed = report.entries.iter().filter(|e| e.failure.is_some()).count();

    let combo = Combination::new(ExtractorKind::Mfcc, ReducerKind::Sne, ClassifierKind::WeightedKnn);
    let counts = [2, 3, 4, 5, 6, 7];
    let curve = speaker_scaling_curve(&manifest, &combo, &counts, &BenchOptions::default(), MASTER_SEED)
        .map_err(|e| e.to_string())?;
    let acc: Vec<f64> = curve.iter().map(|p| p.accuracy_pct).collect();
    let shown = acc.iter().map(|a| format!("{a:.1}")).collect::<Vec<_>>().join(", ");
    for (&n, &a) in counts.iter().zip(&acc) {
        ensure(a >= 2.0 * 100.0 / n as f64, || format!("N = {n}: {a:.1}% is below twice chance [{shown}]"))?;
    }
    ensure(acc[0] > acc[5], || format!("accuracy at N = 2 does not exceed N = 7 [{shown}]"))?;
    let rises: Vec<f64> = acc.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).collect();
    ensure(rises.len() <= 1 && rises.iter().all(|&d| d <= 2.0), || {
        format!("curve rises {rises:?} [{shown}]")
    })?;
    Ok(format!(
        "sweep of 30 in {:.0}s ({failed} failed); MFCC-SNE-kNN accuracy for N = 2..7: [{shown}]",
        sweep_time.as_secs_f64()
    ))
}

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

fn roc_integrity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut worst = 0.0f64;
    for trial in 0..40 {
        let n = 50 + trial * 5;
        let positives: Vec<bool> = (0..n).map(|i| i % 4 == 0 || rng.random_bool(0.2)).collect();
        // coarse quantisation on half the trials produces ties
        let levels: f64 = if trial % 2 == 0 { 8.0 } else { 1e9 };
        let scores: Vec<f64> = positives
            .iter()
            .map(|&p| ((rng.random_range(0.0..1.0f64) + if p { 0.3 } else { 0.0 }) * levels).round() / levels)
            .collect();
        let points = roc_curve(&scores, &positives).map_err(|e| e.to_string())?;
        ensure(points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1), || {
            format!("trial {trial}: curve not monotone")
        })?;
        worst = worst.max((auc(&points) - pairwise_auc(&scores, &positives)).abs());
    }
    ensure(worst <= 1e-6, || format!("AUC differs from the pairwise oracle by {worst:e}"))?;
    let perfect = roc_curve(&[0.9, 0.8, 0.7, 0.3, 0.2], &[true, true, true, false, false]).map_err(|e| e.to_string())?;
    let perfect_auc = auc(&perfect);
    ensure(perfect_auc == 1.0, || format!("perfect scores give AUC {perfect_auc}"))?;
    Ok(format!("max |AUC - pairwise oracle| = {worst:.1e} over 40 trials; perfect AUC = 1"))
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).expect("under dir").display().to_string();
                out.push((rel, std::fs::read(&path).expect("readable file")));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = synthetic_corpus(&dir.path().join("corpus"))?;
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        let report = pool
            .install(|| run_sweep(&manifest, &SweepGrid::default(), MASTER_SEED))
            .map_err(|e| e.to_string())?;
        let out = dir.path().join(format!("report_{threads}"));
        write_report(&out, &report).map_err(|e| e.to_string())?;
        outputs.push(files_under(&out));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    ensure(a.len() == b.len(), || format!("{} vs {} report files", a.len(), b.len()))?;
    for ((na, ba), (nb, bb)) in a.iter().zip(b) {
        ensure(na == nb && ba == bb, || format!("{na} differs between 1 and 4 threads"))?;
    }
    let bytes: usize = a.iter().map(|(_, b)| b.len()).sum();
    Ok(format!("{} files ({bytes} bytes) identical under 1 and 4 threads", a.len()))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Check); 10] = [
        ("formula fidelity", 1, formula_fidelity),
        ("standard normal masses", 1, normal_masses),
        ("Levinson-Durbin vs dense solve", 5, levinson_vs_dense),
        ("LPC AR(2) recovery", 5, ar2_recovery),
        ("SNE gradient and descent", 10, sne_gradient_and_descent),
        ("PCA identities", 1, pca_identities),
        ("classifier oracles", 30, classifier_oracles),
        ("end-to-end trend", 1200, end_to_end_trend),
        ("ROC integrity", 5, roc_integrity),
        ("determinism", 1200, determinism),
    ];
    let mut failures = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > Duration::from_secs(*limit) => {
                Err(format!("{detail}; took {:.1}s, limit {limit}s", elapsed.as_secs_f64()))
            }
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({:.2}s): {detail}", i + 1, elapsed.as_secs_f64()),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({:.2}s): {detail}", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    if failures > 0 {
        println!("{failures} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
