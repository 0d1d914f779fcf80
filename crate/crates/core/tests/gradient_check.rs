use genfl_core::data::{LabeledDataset, Provenance};
use genfl_core::nn::{self, init_model, loss_and_grad, LayerShape, ModelParams};
use genfl_core::rng;
use rand::Rng;

const EPS: f64 = 1e-5;

fn random_case(seed: u64) -> (ModelParams, LabeledDataset, Vec<usize>) {
    let mut r = rng::stream(&[0xfd, seed]);
    let in_dim = r.random_range(2..=5);
    let classes = r.random_range(2..=4);
    let shapes: Vec<LayerShape> = if r.random_bool(0.5) {
        vec![(in_dim, classes)]
    } else {
        let hidden = r.random_range(2..=8);
        vec![(in_dim, hidden), (hidden, classes)]
    };
    let mut model = init_model(&shapes, seed).unwrap();
    // nonzero biases so every coordinate is exercised
    let values: Vec<f64> = model
        .values()
        .iter()
        .map(|v| v + r.random_range(-0.5..0.5))
        .collect();
    model = ModelParams::from_values(&shapes, values).unwrap();
    let mut data = LabeledDataset::new(in_dim, classes);
    let n = r.random_range(1..=8);
    for _ in 0..n {
        let x: Vec<f64> = (0..in_dim).map(|_| r.random_range(-2.0..2.0)).collect();
        data.push(&x, r.random_range(0..classes), Provenance::Real).unwrap();
    }
    let idx = (0..n).collect();
    (model, data, idx)
}

fn loss_at(model: &ModelParams, data: &LabeledDataset, idx: &[usize]) -> f64 {
    loss_and_grad(model, data, idx).unwrap().0
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut worst = 0.0f64;
    for seed in 0..60 {
        let (model, data, idx) = random_case(seed);
        assert!(model.len() <= 200);
        let (_, grad) = loss_and_grad(&model, &data, &idx).unwrap();
        for (k, &g) in grad.values().iter().enumerate() {
            let mut plus = model.values().to_vec();
            let mut minus = plus.clone();
            plus[k] += EPS;
            minus[k] -= EPS;
            let shapes = model.layer_shapes();
            let lp = loss_at(&ModelParams::from_values(shapes, plus).unwrap(), &data, &idx);
            let lm = loss_at(&ModelParams::from_values(shapes, minus).unwrap(), &data, &idx);
            let fd = (lp - lm) / (2.0 * EPS);
            if g.abs().max(fd.abs()) > 1e-8 {
                let rel = (g - fd).abs() / g.abs().max(fd.abs());
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst < 1e-5, "max relative error {worst:e}");
}

#[test]
fn duplicated_batch_leaves_loss_and_gradient_unchanged() {
    let (model, data, idx) = random_case(7);
    let doubled: Vec<usize> = idx.iter().chain(idx.iter()).copied().collect();
    let (l1, g1) = loss_and_grad(&model, &data, &idx).unwrap();
    let (l2, g2) = loss_and_grad(&model, &data, &doubled).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    for (a, b) in g1.values().iter().zip(g2.values()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn twenty_parameter_model_on_eight_samples() {
    // 3 inputs, 5 classes: 15 weights + 5 biases
    let shapes = [(3, 5)];
    assert_eq!(nn::param_count(&shapes), 20);
    let model = init_model(&shapes, 99).unwrap();
    let mut r = rng::stream(&[0xfe]);
    let mut data = LabeledDataset::new(3, 5);
    for i in 0..8 {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        data.push(&x, i % 5, Provenance::Real).unwrap();
    }
    let idx: Vec<usize> = (0..8).collect();
    let (_, grad) = loss_and_grad(&model, &data, &idx).unwrap();
    for (k, &g) in grad.values().iter().enumerate() {
        let mut p = model.values().to_vec();
        let mut m = p.clone();
        p[k] += EPS;
        m[k] -= EPS;
        let fd = (loss_at(&ModelParams::from_values(&shapes, p).unwrap(), &data, &idx)
            - loss_at(&ModelParams::from_values(&shapes, m).unwrap(), &data, &idx))
            / (2.0 * EPS);
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-300);
        assert!(rel < 1e-5, "coordinate {k}: analytic {g}, numeric {fd}");
    }
}
