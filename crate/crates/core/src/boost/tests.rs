use super::*;
use crate::data::{quantize, RawDataset};
use crate::tree::{Node, Tree};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn staircase(n: usize) -> (RawDataset<f64>, BinnedDataset<f64>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
    let y: Vec<f64> = (0..n).map(|i| (i / 10) as f64).collect();
    let raw = RawDataset::from_rows(&rows, y).unwrap();
    let binned = quantize(&raw, 255).unwrap();
    (raw, binned)
}

fn classification(n: usize, seed: u64) -> (RawDataset<f64>, BinnedDataset<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| {
            let z = 3.0 * r[0] * r[1] + r[2] - 0.5 * r[3];
            if rng.random::<f64>() < crate::loss::sigmoid(z) { 1.0 } else { 0.0 }
        })
        .collect();
    let raw = RawDataset::from_rows(&rows, y).unwrap();
    let binned = quantize(&raw, 32).unwrap();
    (raw, binned)
}

fn mse(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64
}

#[test]
fn single_constant_tree_predicts_mean() {
    let (raw, binned) = staircase(50);
    let params = BoostParams {
        n_iterations: 1,
        loss: LossKind::SquaredError,
        tree: TreeParams { max_depth: 0, ..TreeParams::default() },
        ..BoostParams::default()
    };
    let out = train(&binned, &raw.targets, &params).unwrap();
    let mean = raw.targets.iter().sum::<f64>() / 50.0;
    let pred = out.ensemble.predict(&raw, OutputKind::Raw).unwrap();
    assert!(pred.iter().all(|p| (p - mean).abs() < 1e-12));
}

#[test]
fn staircase_loss_decreases_each_iteration() {
    let (raw, binned) = staircase(50);
    let params = BoostParams {
        n_iterations: 40,
        learning_rate: 0.5,
        loss: LossKind::SquaredError,
        tree: TreeParams { max_depth: 3, ..TreeParams::default() },
        ..BoostParams::default()
    };
    let out = train(&binned, &raw.targets, &params).unwrap();
    let losses: Vec<f64> = out.log.iter().map(|l| l.train_loss).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{losses:?}");
    assert!(losses.last().unwrap() < &1e-3);
    // Partial ensembles agree with the logged loss.
    let mut partial = out.ensemble.clone();
    partial.trees.truncate(10);
    let p = partial.predict(&raw, OutputKind::Raw).unwrap();
    assert!((0.5 * mse(&p, &raw.targets) - losses[9]).abs() < 1e-9);
}

#[test]
fn training_is_deterministic() {
    let (raw, binned) = classification(600, 1);
    for sampling in [
        SamplingConfig::mvs(0.3, 0.1, 17),
        SamplingConfig::mvs_adaptive(0.3, 17),
        SamplingConfig::sgb(0.3, 17),
        SamplingConfig::goss(0.2, 0.1, 17),
    ] {
        let params = BoostParams {
            n_iterations: 15,
            sampling,
            ..BoostParams::default()
        };
        let a = train(&binned, &raw.targets, &params).unwrap().ensemble.to_json();
        let b = train(&binned, &raw.targets, &params).unwrap().ensemble.to_json();
        assert_eq!(a, b);
    }
}

#[test]
fn full_rate_mvs_equals_no_sampling() {
    let (raw, binned) = classification(500, 2);
    let base = BoostParams {
        n_iterations: 10,
        ..BoostParams::<f64>::default()
    };
    let mvs = BoostParams {
        sampling: SamplingConfig::mvs(1.0, 0.1, 3),
        ..base
    };
    let a = train(&binned, &raw.targets, &base).unwrap().ensemble;
    let b = train(&binned, &raw.targets, &mvs).unwrap().ensemble;
    assert_eq!(a.to_json(), b.to_json());
}

#[derive(Default)]
struct Recorder {
    steps: Vec<(usize, Step)>,
    logs: usize,
}

impl TrainObserver<f64> for Recorder {
    fn step(&mut self, iteration: usize, step: Step) {
        self.steps.push((iteration, step));
    }
    fn iteration(&mut self, _log: &IterationLog<f64>) {
        self.logs += 1;
    }
}

#[test]
fn mvs_iteration_follows_algorithm_order() {
    let (raw, binned) = classification(300, 3);
    let params = BoostParams {
        n_iterations: 3,
        sampling: SamplingConfig::mvs(0.5, 0.1, 1),
        ..BoostParams::default()
    };
    let mut rec = Recorder::default();
    train_observed(&binned, &raw.targets, &params, &mut rec).unwrap();
    let per_iteration = [
        Step::Predict,
        Step::Derivatives,
        Step::Lambda,
        Step::RegularizedGradients,
        Step::Threshold,
        Step::Probabilities,
        Step::Weights,
        Step::Select,
        Step::TrainTree,
        Step::Append,
    ];
    let mut expected = vec![(0, Step::InitialGuess)];
    for it in 0..3 {
        expected.extend(per_iteration.iter().map(|&s| (it, s)));
    }
    assert_eq!(rec.steps, expected);
    assert_eq!(rec.logs, 3);
}

#[test]
fn log_reports_threshold_and_lambda() {
    let (raw, binned) = classification(400, 4);
    let params = BoostParams {
        n_iterations: 4,
        sampling: SamplingConfig::mvs_adaptive(0.25, 2),
        ..BoostParams::default()
    };
    let out = train(&binned, &raw.targets, &params).unwrap();
    for entry in &out.log {
        assert!(entry.threshold.unwrap() > 0.0);
        assert!(entry.lambda.unwrap() >= 0.0);
        assert!(entry.sampled > 0 && entry.sampled < 400);
    }
    let fixed = BoostParams {
        sampling: SamplingConfig::mvs(0.25, 0.3, 2),
        ..params
    };
    let out = train(&binned, &raw.targets, &fixed).unwrap();
    assert!(out.log.iter().all(|l| l.lambda == Some(0.3)));
}

#[test]
fn first_order_uses_unit_hessians() {
    let (raw, binned) = classification(200, 5);
    let params = BoostParams {
        n_iterations: 1,
        order: Order::First,
        tree: TreeParams { max_depth: 0, ..TreeParams::default() },
        ..BoostParams::default()
    };
    let out = train(&binned, &raw.targets, &params).unwrap();
    let p0 = out.ensemble.initial;
    let g: f64 = raw.targets.iter().map(|&y| crate::loss::sigmoid(p0) - y).sum();
    let Node::Leaf { value } = out.ensemble.trees[0].nodes[0] else { panic!() };
    assert!((value + g / (200.0 + 1e-3)).abs() < 1e-12);
}

#[test]
fn rejects_bad_inputs() {
    let (raw, binned) = staircase(30);
    let logloss = BoostParams::<f64>::default();
    assert!(matches!(train(&binned, &raw.targets, &logloss), Err(Error::NonBinaryTarget { .. })));
    let mut y = raw.targets.clone();
    y[3] = f64::NAN;
    let mse_params = BoostParams { loss: LossKind::SquaredError, ..logloss };
    assert!(matches!(train(&binned, &y, &mse_params), Err(Error::InvalidParameter(_))));
    assert!(train(&binned, &raw.targets[..5], &mse_params).is_err());
    let bad_rate = BoostParams { learning_rate: 1.5, ..mse_params };
    assert!(train(&binned, &raw.targets, &bad_rate).is_err());
    let no_iter = BoostParams { n_iterations: 0, ..mse_params };
    assert!(train(&binned, &raw.targets, &no_iter).is_err());
}

fn random_ensemble(seed: u64, n_features: usize) -> Ensemble<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bin_edges: Vec<Vec<f64>> = (0..n_features)
        .map(|_| {
            let mut e: Vec<f64> = (0..rng.random_range(1..10)).map(|_| rng.random::<f64>()).collect();
            e.sort_by(f64::total_cmp);
            e.dedup();
            e
        })
        .collect();
    let mut ens = Ensemble::new(rng.random::<f64>(), 0.3, LossKind::LogLoss, bin_edges.clone());
    for _ in 0..rng.random_range(1..8) {
        let mut nodes = Vec::new();
        fn grow(nodes: &mut Vec<Node<f64>>, edges: &[Vec<f64>], rng: &mut ChaCha8Rng, depth: usize) -> usize {
            let id = nodes.len();
            nodes.push(Node::Leaf { value: rng.random::<f64>() - 0.5 });
            if depth > 0 && rng.random::<f64>() < 0.8 {
                let feature = rng.random_range(0..edges.len());
                let bin = rng.random_range(0..edges[feature].len());
                let left = grow(nodes, edges, rng, depth - 1);
                let right = grow(nodes, edges, rng, depth - 1);
                nodes[id] = Node::Split { feature, bin, left, right };
            }
            id
        }
        grow(&mut nodes, &bin_edges, &mut rng, 4);
        ens.trees.push(Tree { nodes });
    }
    ens
}

#[test]
fn prediction_compositions() {
    let rows: Vec<Vec<f64>> = vec![vec![0.1, 0.9], vec![0.5, 0.2]];
    let raw = RawDataset::from_rows(&rows, vec![0.0, 1.0]).unwrap();
    let mut ens = Ensemble::new(0.4, 0.1, LossKind::LogLoss, vec![vec![0.3], vec![0.5]]);
    assert_eq!(ens.predict(&raw, OutputKind::Raw).unwrap(), vec![0.4, 0.4]);
    ens.trees.push(Tree::leaf(2.0));
    assert_eq!(ens.predict(&raw, OutputKind::Raw).unwrap(), vec![0.4 + 0.1 * 2.0; 2]);
    let prob = ens.predict(&raw, OutputKind::Probability).unwrap();
    assert!(prob.iter().all(|&p| p > 0.0 && p < 1.0));

    let wrong = RawDataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
    assert!(matches!(ens.predict(&wrong, OutputKind::Raw), Err(Error::DimensionMismatch { .. })));

    let ens = random_ensemble(9, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..500 {
        let row: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let bins: Vec<usize> = (0..3).map(|f| crate::data::bin_of(&ens.bin_edges[f], row[f])).collect();
        let per_tree: f64 = ens.trees.iter().map(|t| t.predict_bins(&bins)).sum();
        let expected = ens.initial + ens.learning_rate * per_tree;
        assert!((ens.predict_row(&row) - expected).abs() <= 1e-12);
    }
}

#[test]
fn model_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let ens = random_ensemble(seed, 4);
        let path = dir.path().join(format!("m{seed}.json"));
        ens.save(&path).unwrap();
        let back = Ensemble::<f64>::load(&path).unwrap();
        assert_eq!(back, ens);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..100 {
            let row: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            assert!((back.predict_row(&row) - ens.predict_row(&row)).abs() <= 1e-15);
        }
    }
}

#[test]
fn malformed_models() {
    let text = random_ensemble(1, 2).to_json();
    let truncated = &text[..text.len() / 2];
    match Ensemble::<f64>::from_json(truncated) {
        Err(Error::ModelParse { offset, .. }) => assert!(offset <= truncated.len() && offset > 0),
        other => panic!("expected parse error, got {other:?}"),
    }
    let v2 = text.replacen("\"version\": 1", "\"version\": 2", 1);
    assert!(matches!(
        Ensemble::<f64>::from_json(&v2),
        Err(Error::UnsupportedVersion { supported: 1, .. })
    ));
    let no_version = text.replacen("\"version\": 1,", "", 1);
    assert!(matches!(Ensemble::<f64>::from_json(&no_version), Err(Error::ModelParse { .. })));
    assert!(Ensemble::<f64>::from_json("[1, 2]").is_err());

    let bad_split = Ensemble {
        trees: vec![Tree {
            nodes: vec![
                Node::Split { feature: 0, bin: 40, left: 1, right: 2 },
                Node::Leaf { value: 0.0 },
                Node::Leaf { value: 1.0 },
            ],
        }],
        ..random_ensemble(1, 2)
    };
    assert!(Ensemble::<f64>::from_json(&bad_split.to_json()).is_err());
}

#[test]
fn f32_training_works() {
    let rows: Vec<Vec<f32>> = (0..100).map(|i| vec![i as f32]).collect();
    let y: Vec<f32> = (0..100).map(|i| if i > 50 { 1.0 } else { 0.0 }).collect();
    let raw = RawDataset::from_rows(&rows, y).unwrap();
    let binned = quantize(&raw, 16).unwrap();
    let params = BoostParams::<f32> {
        n_iterations: 20,
        sampling: SamplingConfig::mvs(0.5, 0.1, 1),
        ..BoostParams::default()
    };
    let out = train(&binned, &raw.targets, &params).unwrap();
    assert!(out.log.last().unwrap().train_loss < out.log[0].train_loss);
    let back = Ensemble::<f32>::from_json(&out.ensemble.to_json()).unwrap();
    assert_eq!(back, out.ensemble);
}
