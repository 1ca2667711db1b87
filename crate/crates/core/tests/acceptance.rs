//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use veritas::calibration::{
    apply_calibration, calibration_report, ece, fit_histogram_binning, ConfidenceRecord,
};
use veritas::data::{make_folds, ConversationTree, Embedder, FoldScheme, FoldSpec};
use veritas::harness::{
    cross_validate, generate_synthetic, kruskal_wallis, min_uncertainty_prediction, timeline_report, CvOutput,
    SyntheticSpec, TimelineSeries,
};
use veritas::nn::gradcheck::max_relative_error;
use veritas::nn::{softmax, Activation, Dense, DropoutSpec, Lstm, RngState};
use veritas::rejection::{
    random_curve, random_reject, rejection_curve, remove_top, supervised_reject_folded, train_meta, unsupervised_reject,
    records_to_csv, FoldedMeta, Measure, MetaBackend, MetaHyperparams, PredictionRecord,
};
use veritas::uncertainty::{
    bundle, max_variance, predictive_entropy, softmax_confidences, variation_ratio, SampleSet, UncertaintyBundle,
    UncertaintyConfig,
};
use veritas::verifier::{
    draw_noise, encode_tree, loss_l1, loss_l2, Architecture, ModelParams, Optimizer, TrainingConfig, VarianceMode,
};

const SEED: u64 = 0;
const FRACTIONS: [f64; 9] = [1.0, 0.975, 0.95, 0.9, 0.85, 0.8, 0.7, 0.6, 0.5];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------------------------------------------------------------- pipeline

struct Setup {
    trees: Vec<ConversationTree>,
    folds: FoldSpec,
    embedder: Embedder,
    training: TrainingConfig,
    uncertainty: UncertaintyConfig,
}

fn setup() -> Setup {
    let spec = SyntheticSpec {
        n_trees_per_class: 200,
        n_classes: 3,
        label_noise: 0.15,
        signal_min: 0.2,
        signal_max: 1.0,
        vocab_per_class: 20,
        shared_vocab: 60,
        tokens_per_tweet: 6,
        min_tweets: 3,
        max_tweets: 8,
        seed: SEED,
        ..Default::default()
    };
    let trees = generate_synthetic(&spec).expect("synthetic data");
    let mut folds = make_folds(&trees, FoldScheme::KFold, Some(5), SEED).expect("folds");
    folds.dev_fold = Some(0);
    let training = TrainingConfig {
        hidden_size: 32,
        num_relu_layers: 1,
        epochs: 30,
        learning_rate: 0.005,
        optimizer: Optimizer::Adam,
        dropout_rate_train: 0.3,
        w2: 0.5,
        aleatoric_samples: 20,
        grad_clip: None,
        seed: SEED,
        ..Default::default()
    };
    let uncertainty = UncertaintyConfig { n_samples: 25, dropout_rate_test: 0.3, seed: SEED, ..Default::default() };
    Setup { trees, folds, embedder: Embedder::hashing(32, SEED).expect("embedder"), training, uncertainty }
}

struct Pipeline {
    cv: CvOutput,
    elapsed: Duration,
}

fn run_pipeline(s: &Setup) -> Pipeline {
    let start = Instant::now();
    let cv = cross_validate(&s.trees, &s.folds, &s.embedder, &s.training, &s.uncertainty, true).expect("cross validation");
    Pipeline { cv, elapsed: start.elapsed() }
}

fn shared() -> &'static (Setup, Pipeline) {
    static CELL: OnceLock<(Setup, Pipeline)> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = setup();
        let p = run_pipeline(&s);
        (s, p)
    })
}

fn accuracy(r: &[&PredictionRecord]) -> f64 {
    r.iter().filter(|x| x.correct).count() as f64 / r.len() as f64
}

fn folded_meta(cv: &CvOutput, backend: MetaBackend) -> FoldedMeta {
    let by_fold = cv
        .folds
        .iter()
        .map(|f| (f.fold, train_meta(&f.dev, backend, &MetaHyperparams::default(), SEED).expect("meta")))
        .collect();
    FoldedMeta { by_fold }
}

fn timelines(s: &Setup, cv: &CvOutput) -> Vec<(TimelineSeries, &'static str, PredictionRecord)> {
    let jobs: Vec<(usize, &PredictionRecord, &'static str)> = cv
        .folds
        .iter()
        .enumerate()
        .flat_map(|(i, f)| f.test.iter().map(move |r| (i, r, "test")).chain(f.dev.iter().map(move |r| (i, r, "dev"))))
        .collect();
    jobs.par_iter()
        .map(|&(i, r, kind)| {
            let tree = s.trees.iter().find(|t| t.tree_id == r.tree_id).expect("tree");
            let series =
                timeline_report(&cv.folds[i].params, tree, &s.embedder, s.training.max_branch_len, &s.uncertainty)
                    .expect("timeline");
            (series, kind, r.clone())
        })
        .collect()
}

/// Every CSV the pipeline emits, in a fixed order.
fn reports(s: &Setup, cv: &CvOutput) -> Vec<(String, String)> {
    let mut out = vec![
        ("records".to_string(), records_to_csv(&cv.records).expect("csv")),
        ("dev_records".to_string(), records_to_csv(&cv.all_dev_records()).expect("csv")),
    ];
    let mut curves = String::new();
    for m in Measure::ALL {
        curves.push_str(&rejection_curve(&cv.records, m, &FRACTIONS).expect("curve").to_csv(curves.is_empty()));
    }
    curves.push_str(&random_curve(&cv.records, &FRACTIONS, SEED).expect("curve").to_csv(false));
    out.push(("curves".to_string(), curves));
    let dev = cv.all_dev_records();
    let mut cal = String::from(veritas::calibration::CalibrationReport::CSV_HEADER);
    cal.push('\n');
    for m in Measure::ALL {
        cal.push_str(&calibration_report(&dev, &cv.records, m, 10).expect("calibration").0.csv_row());
        cal.push('\n');
    }
    out.push(("calibration".to_string(), cal));
    let mut tl = String::new();
    for (series, kind, _) in timelines(s, cv) {
        if kind == "test" {
            tl.push_str(&series.to_csv(tl.is_empty()));
        }
    }
    out.push(("timelines".to_string(), tl));
    out
}

// ---------------------------------------------------------------- criteria

fn gradients() -> Verdict {
    let start = Instant::now();
    let (step, floor) = (1e-5, 1e-6);
    let mut layer_err: f64 = 0.0;
    let mut loss_err: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = RngState::new(1000 + seed);
        for act in [Activation::Linear, Activation::Relu] {
            let layer = Dense::glorot(6, 4, &mut rng);
            let x: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
            let w: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let f = |l: &Dense| l.forward(&x, act).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let (_, cache) = layer.forward_cached(&x, act).unwrap();
            let mut grad = Dense::zeros(6, 4);
            layer.backward(&cache, &w, &mut grad);
            layer_err = layer_err.max(max_relative_error(&layer, &grad, step, floor, f));
        }

        let lstm = Lstm::glorot(3, 5, &mut rng);
        let xs: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
        let ws: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
        let dropout = DropoutSpec::active(0.3).unwrap();
        let masks = RngState::new(2000 + seed);
        let f = |l: &Lstm| {
            let t = l.forward(&xs, dropout, &mut masks.clone()).unwrap();
            t.outputs().iter().zip(&ws).map(|(h, w)| h.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).sum::<f64>()
        };
        let trace = lstm.forward(&xs, dropout, &mut masks.clone()).unwrap();
        let mut grad = Lstm::zeros(3, 5);
        lstm.backward(&trace, &ws, &mut grad).unwrap();
        layer_err = layer_err.max(max_relative_error(&lstm, &grad, step, floor, f));

        for mode in [VarianceMode::Scalar, VarianceMode::PerClass] {
            let arch = Architecture { input_dim: 3, hidden_size: 4, num_relu_layers: 2, n_classes: 3, variance_mode: mode };
            let mut params = ModelParams::init(arch, &mut RngState::new(3000 + seed)).unwrap();
            for l in &mut params.relu {
                l.bias.data_mut().iter_mut().for_each(|b| *b = 0.3);
            }
            let xs: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
            let target = rng.below(3);
            let noise = draw_noise(5, 3, &mut rng);
            let dropout = DropoutSpec::active(0.2).unwrap();
            let masks = RngState::new(4000 + seed);
            let f = |p: &ModelParams| p.loss(&xs, target, &noise, 1.0, 0.5, dropout, &mut masks.clone()).unwrap().total;
            let mut grads = params.zeros_like();
            params.loss_and_grad(&xs, target, &noise, 1.0, 0.5, dropout, &mut masks.clone(), &mut grads).unwrap();
            loss_err = loss_err.max(max_relative_error(&params, &grads, step, floor, f));
        }
    }
    let t = start.elapsed();
    verdict(
        layer_err < 1e-4 && loss_err < 1e-3 && t < Duration::from_secs(30),
        format!("20 seeds, layer max rel err {layer_err:.2e}, full loss max rel err {loss_err:.2e}, {t:.2?}"),
    )
}

fn zero_noise() -> Verdict {
    let mut rng = RngState::new(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let c = 2 + rng.below(5);
        let v: Vec<f64> = (0..c).map(|_| 4.0 * rng.normal()).collect();
        let y = rng.below(c);
        let t = 1 + rng.below(50);
        let l2 = loss_l2(&v, &vec![0.0; c], y, t, &mut rng).unwrap();
        let l1 = loss_l1(&softmax(&v).unwrap(), y).unwrap();
        worst = worst.max((l2 - l1).abs());
    }
    verdict(worst <= 1e-12, format!("1000 draws, max |l2 - l1| = {worst:.2e}"))
}

fn random_probs(rng: &mut RngState, c: usize) -> Vec<f64> {
    let z: Vec<f64> = (0..c).map(|_| 2.0 * rng.normal()).collect();
    softmax(&z).unwrap()
}

fn oracle_argmax(p: &[f64]) -> usize {
    (0..p.len()).find(|&i| (0..p.len()).all(|j| p[i] >= p[j])).unwrap()
}

fn oracle_entropy(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &x in p {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

fn oracle_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let c = rows[0].len();
    (0..c).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64).collect()
}

fn oracle_bin(c: f64, m: usize) -> usize {
    if c <= 0.0 {
        return 0;
    }
    (1..=m).find(|&k| c <= k as f64 / m as f64).unwrap_or(m) - 1
}

fn oracle_ece(recs: &[(f64, bool)], m: usize) -> f64 {
    let mut total = 0.0;
    for b in 0..m {
        let members: Vec<&(f64, bool)> = recs.iter().filter(|r| oracle_bin(r.0, m) == b).collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let acc = members.iter().filter(|r| r.1).count() as f64 / n;
        let conf = members.iter().map(|r| r.0).sum::<f64>() / n;
        total += n / recs.len() as f64 * (acc - conf).abs();
    }
    total
}

fn estimators() -> Verdict {
    let mut rng = RngState::new(12);
    let mut worst = [0.0f64; 6];
    for _ in 0..1000 {
        let c = 2 + rng.below(5);
        let n = 1 + rng.below(30);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| random_probs(&mut rng, c)).collect();
        let s = SampleSet::new(rows.clone()).unwrap();

        let mut counts = vec![0usize; c];
        for r in &rows {
            counts[oracle_argmax(r)] += 1;
        }
        let vr = 1.0 - *counts.iter().max().unwrap() as f64 / n as f64;
        worst[0] = worst[0].max((variation_ratio(&s) - vr).abs());

        let mean = oracle_mean(&rows);
        worst[1] = worst[1].max((predictive_entropy(&s) - oracle_entropy(&mean)).abs());

        let var = (0..c)
            .map(|k| rows.iter().map(|r| r[k] * r[k]).sum::<f64>() / n as f64 - mean[k] * mean[k])
            .fold(0.0, f64::max);
        worst[2] = worst[2].max((max_variance(&s) - var).abs());

        let p = &rows[0];
        let top = oracle_argmax(p);
        let first = p[top];
        let second = (0..c).filter(|&k| k != top).map(|k| p[k]).fold(f64::NEG_INFINITY, f64::max);
        let got = softmax_confidences(p);
        let err = [got.lcs - first, got.margin - (first - second), got.ratio - second / first, got.entropy - oracle_entropy(p)]
            .iter()
            .fold(0.0f64, |a, e| a.max(e.abs()));
        worst[3] = worst[3].max(err);

        let m = 1 + rng.below(20);
        let k = 1 + rng.below(200);
        let draw = |rng: &mut RngState| -> Vec<(f64, bool)> {
            (0..k)
                .map(|_| {
                    let c = if rng.bernoulli(0.05) { 0.0 } else { rng.uniform() };
                    (c, rng.bernoulli(c))
                })
                .collect()
        };
        let dev = draw(&mut rng);
        let test = draw(&mut rng);
        let as_records = |v: &[(f64, bool)]| -> Vec<ConfidenceRecord> {
            v.iter().map(|&(c, ok)| ConfidenceRecord::new(c, ok).unwrap()).collect()
        };
        worst[4] = worst[4].max((ece(&as_records(&test), m).unwrap() - oracle_ece(&test, m)).abs());

        let map = fit_histogram_binning(&as_records(&dev), m).unwrap();
        for &(c, _) in &test {
            let b = oracle_bin(c, m);
            let members: Vec<bool> = dev.iter().filter(|r| oracle_bin(r.0, m) == b).map(|r| r.1).collect();
            let want = if members.is_empty() {
                (b as f64 + 0.5) / m as f64
            } else {
                members.iter().filter(|&&x| x).count() as f64 / members.len() as f64
            };
            worst[5] = worst[5].max((apply_calibration(&map, c) - want).abs());
        }
    }
    let hand: Vec<ConfidenceRecord> = [(0.9, true), (0.9, false), (0.6, true), (0.6, false)]
        .iter()
        .map(|&(c, ok)| ConfidenceRecord::new(c, ok).unwrap())
        .collect();
    let hand_ece = ece(&hand, 10).unwrap();
    let pass = worst.iter().all(|&w| w <= 1e-10) && hand_ece == 0.25;
    verdict(
        pass,
        format!(
            "max err vr {:.1e}, entropy {:.1e}, variance {:.1e}, softmax {:.1e}, ece {:.1e}, binning {:.1e}; hand ece {hand_ece}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    )
}

fn dropout_sanity() -> Verdict {
    let (s, p) = shared();
    let off = UncertaintyConfig { dropout_rate_test: 0.0, ..s.uncertainty };
    let params = &p.cv.folds[0].params;
    let nonzero = s
        .trees
        .par_iter()
        .filter(|t| {
            let b = bundle(params, &encode_tree(t, &s.embedder, s.training.max_branch_len), &off, &off.tree_rng(&t.tree_id))
                .unwrap();
            b.variation_ratio != 0.0 || b.variance != 0.0
        })
        .count();
    let spec = DropoutSpec::active(0.3).unwrap();
    let mut rng = RngState::new(13);
    let (mut zeros, mut total) = (0usize, 0usize);
    for _ in 0..10_000 {
        let mask = spec.sample_mask(1, &mut rng).unwrap();
        zeros += mask.iter().filter(|&&x| x == 0.0).count();
        total += mask.len();
    }
    let frac = zeros as f64 / total as f64;
    verdict(
        nonzero == 0 && (frac - 0.3).abs() <= 0.02,
        format!("{} trees at rate 0 with nonzero vr/variance: {nonzero}; zeroed fraction {frac:.4}", s.trees.len()),
    )
}

fn end_to_end() -> Verdict {
    let (s, p) = shared();
    let recs = &p.cv.records;
    let all: Vec<&PredictionRecord> = recs.iter().collect();
    let base = accuracy(&all);
    let gain = |m| accuracy(&unsupervised_reject(recs, m, 0.8).unwrap().retained) - base;
    let (vr_gain, al_gain) = (gain(Measure::VariationRatio), gain(Measure::Aleatoric));
    let random_gain =
        (0..50).map(|seed| accuracy(&random_reject(recs, 0.8, seed).unwrap().retained) - base).sum::<f64>() / 50.0;
    let mut sup = Vec::new();
    for backend in [MetaBackend::LinearHinge, MetaBackend::RandomForest] {
        let out = supervised_reject_folded(&folded_meta(&p.cv, backend), recs).unwrap();
        let best = Measure::ALL
            .iter()
            .map(|&m| accuracy(&remove_top(recs, m, out.n_removed).retained))
            .fold(0.0, f64::max);
        sup.push((backend, out.n_removed, accuracy(&out.retained), best));
    }
    let a = base >= 0.70;
    let b = vr_gain >= 0.02 && al_gain >= 0.02;
    let c = random_gain.abs() <= 0.01;
    let d = sup.iter().any(|&(_, _, acc, best)| acc >= best - 0.01);
    let sup_text: Vec<String> = sup
        .iter()
        .map(|(b, n, acc, best)| format!("{b:?} removed {n} acc {acc:.4} vs best unsup {best:.4}"))
        .collect();
    verdict(
        a && b && c && d && p.elapsed < Duration::from_secs(300),
        format!(
            "{} trees, {} test records, {:.1?}; (a) acc {base:.4} {}; (b) vr +{vr_gain:.4} aleatoric +{al_gain:.4} {}; (c) random {random_gain:+.4} {}; (d) {} {}",
            s.trees.len(),
            recs.len(),
            p.elapsed,
            ok(a),
            ok(b),
            ok(c),
            sup_text.join(", "),
            ok(d)
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAILED"
    }
}

/// Records whose confidence under every measure is `c`, correct with
/// probability `c^2`.
fn miscalibrated(n: usize, rng: &mut RngState) -> Vec<PredictionRecord> {
    let ln3 = 3f64.ln();
    (0..n)
        .map(|i| {
            let c = rng.uniform();
            let correct = rng.bernoulli(c * c);
            let u = 1.0 - c;
            let b = UncertaintyBundle {
                variation_ratio: u,
                entropy: u * ln3,
                variance: u,
                aleatoric: u,
                softmax_lcs: c,
                softmax_margin: c,
                softmax_ratio: u,
                softmax_entropy: u * ln3,
                mean_probs: vec![1.0 / 3.0; 3],
                predicted_class: 0,
            };
            PredictionRecord::new(format!("r{i:05}"), if correct { 0 } else { 1 }, b, 0, 1)
        })
        .collect()
}

fn calibration() -> Verdict {
    let mut rng = RngState::new(14);
    let dev = miscalibrated(5000, &mut rng);
    let test = miscalibrated(5000, &mut rng);
    let mut pass = true;
    let mut parts = Vec::new();
    for m in Measure::ALL {
        let (r, _) = calibration_report(&dev, &test, m, 10).unwrap();
        pass &= r.ece_after < r.ece_before && r.ece_after <= 0.05;
        parts.push(format!("{m} {:.4}->{:.4}", r.ece_before, r.ece_after));
    }
    verdict(pass, parts.join(", "))
}

fn kruskal() -> Verdict {
    let h = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap().h;
    let mut rng = RngState::new(15);
    let trials = 1000;
    let rejected = (0..trials)
        .filter(|_| {
            let groups: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| rng.normal()).collect()).collect();
            kruskal_wallis(&groups).unwrap().p < 0.05
        })
        .count();
    let rate = rejected as f64 / trials as f64;
    verdict(
        (h - 3.857).abs() <= 1e-3 && (0.03..=0.07).contains(&rate),
        format!("H {h:.4}; null rejection rate {rate:.3} over {trials} trials"),
    )
}

fn timeline() -> Verdict {
    let (s, p) = shared();
    let all = timelines(s, &p.cv);
    let mismatched = all
        .iter()
        .filter(|(series, _, r)| !bits_equal(&series.steps.last().unwrap().bundle, &r.bundle))
        .count();
    let test: Vec<&TimelineSeries> = all.iter().filter(|x| x.1 == "test").map(|x| &x.0).collect();
    let n = test.len() as f64;
    let final_acc = test.iter().filter(|t| t.steps.last().unwrap().predicted() == t.label).count() as f64 / n;
    let mut pass = mismatched == 0;
    let mut parts = vec![format!("{} timelines, final-step mismatches {mismatched}, final acc {final_acc:.4}", all.len())];
    for m in [Measure::VariationRatio, Measure::Aleatoric] {
        let acc = test.iter().filter(|t| min_uncertainty_prediction(t, m).unwrap() == t.label).count() as f64 / n;
        pass &= acc >= final_acc - 0.01;
        parts.push(format!("min-{m} acc {acc:.4}"));
    }
    verdict(pass, parts.join(", "))
}

fn bits_equal(a: &UncertaintyBundle, b: &UncertaintyBundle) -> bool {
    let f = |x: &UncertaintyBundle| -> Vec<u64> {
        let mut v: Vec<u64> = [
            x.variation_ratio,
            x.entropy,
            x.variance,
            x.aleatoric,
            x.softmax_lcs,
            x.softmax_margin,
            x.softmax_ratio,
            x.softmax_entropy,
        ]
        .iter()
        .map(|f| f.to_bits())
        .collect();
        v.extend(x.mean_probs.iter().map(|f| f.to_bits()));
        v.push(x.predicted_class as u64);
        v
    };
    f(a) == f(b)
}

fn determinism() -> Verdict {
    let (s, p) = shared();
    let first = reports(s, &p.cv);
    let again = setup();
    let second = reports(&again, &run_pipeline(&again).cv);
    let differing: Vec<&str> =
        first.iter().zip(&second).filter(|(a, b)| a.1 != b.1).map(|(a, _)| a.0.as_str()).collect();
    let bytes: usize = first.iter().map(|r| r.1.len()).sum();
    verdict(
        differing.is_empty() && first.len() == second.len(),
        format!("{} reports, {bytes} bytes; differing: {}", first.len(), if differing.is_empty() { "none".into() } else { differing.join(" ") }),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("1 gradient suite", gradients),
        ("2 zero-noise reduction", zero_noise),
        ("3 estimator oracles", estimators),
        ("4 dropout sanity", dropout_sanity),
        ("5 synthetic end-to-end", end_to_end),
        ("6 calibration", calibration),
        ("7 kruskal-wallis", kruskal),
        ("8 timeline", timeline),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
