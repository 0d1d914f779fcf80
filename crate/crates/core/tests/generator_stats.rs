use genfl_core::data::{make_synthetic_dataset, ClassGeometry, LabelHistogram};
use genfl_core::generator::{accrue, generate, select_labels, GenPool, GeneratorConfig};
use genfl_core::rng;

fn config(label_noise: f64, center_shift: f64) -> GeneratorConfig {
    GeneratorConfig {
        label_noise,
        center_shift,
        ..GeneratorConfig::default()
    }
}

#[test]
fn label_noise_rate_is_honoured() {
    let g = ClassGeometry::new(10, 10, 1.0).unwrap();
    let labels: Vec<usize> = (0..10_000).map(|i| i % 10).collect();
    let out = generate(&labels, &config(0.3, 0.0), &g, &mut rng::stream(&[31]));
    let flipped = (0..out.len()).filter(|&i| out.label(i) != labels[i]).count();
    let rate = flipped as f64 / labels.len() as f64;
    assert!((rate - 0.3).abs() <= 0.02, "flip rate {rate}");
}

#[test]
fn perfect_generator_matches_real_class_means() {
    let g = ClassGeometry::new(4, 6, 1.0).unwrap();
    let n = 2000;
    let real = make_synthetic_dataset(4, 6, n, 1.0, 8).unwrap();
    let labels: Vec<usize> = (0..4).flat_map(|c| std::iter::repeat_n(c, n)).collect();
    let fake = generate(&labels, &config(0.0, 0.0), &g, &mut rng::stream(&[8]));
    // difference of two means, each with variance 1/n per coordinate
    let bound = 5.0 * (2.0 / n as f64).sqrt();
    for c in 0..4 {
        for k in 0..6 {
            let mean = |d: &genfl_core::LabeledDataset| {
                let rows: Vec<usize> = (0..d.len()).filter(|&i| d.label(i) == c).collect();
                rows.iter().map(|&i| d.features(i)[k]).sum::<f64>() / rows.len() as f64
            };
            let diff = mean(&real) - mean(&fake);
            assert!(diff.abs() < bound, "class {c} dim {k}: {diff}");
        }
    }
}

#[test]
fn generated_center_moves_by_shift() {
    let g = ClassGeometry::new(3, 3, 0.5).unwrap();
    let n = 4000;
    let out = generate(&vec![0; n], &config(0.0, 0.5), &g, &mut rng::stream(&[2]));
    let mut mean = [0.0; 3];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(out.features(i)) {
            *m += x / n as f64;
        }
    }
    let moved: f64 = mean
        .iter()
        .zip(g.center(0))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!((moved - 0.5).abs() < 0.05, "moved {moved}");
}

#[test]
fn least_covered_class_is_filled_first() {
    let clients = [
        LabelHistogram::from_counts(vec![10, 0, 5, 5]),
        LabelHistogram::from_counts(vec![10, 2, 5, 0]),
    ];
    let pool = GenPool::new(2, 4);
    // coverage (20, 2, 10, 5): class 1 climbs to 5, then classes 1 and 3
    // alternate with ties going to the lower index
    assert_eq!(select_labels(&clients, &pool, 3, 100), vec![1, 1, 1]);
    assert_eq!(select_labels(&clients, &pool, 5, 100), vec![1, 1, 1, 1, 3]);
    assert_eq!(select_labels(&clients, &pool, 6, 100), vec![1, 1, 1, 1, 1, 3]);
}

#[test]
fn never_covered_class_caps_on_schedule() {
    let g = ClassGeometry::new(10, 10, 1.0).unwrap();
    let cfg = GeneratorConfig {
        rate_per_round: 10,
        cap_per_class: 300,
        ..GeneratorConfig::default()
    };
    let clients = [LabelHistogram::zeros(10)];
    let mut pool = GenPool::new(10, 10);
    for round in 1..=301 {
        let labels = select_labels(&clients, &pool, cfg.rate_per_round, cfg.cap_per_class);
        let expected = if round <= 300 { 10 } else { 0 };
        assert_eq!(labels.len(), expected, "round {round}");
        let fresh = generate(&labels, &cfg, &g, &mut rng::stream(&[round]));
        pool = accrue(pool, &fresh, cfg.cap_per_class).unwrap();
        assert!(pool.per_class_counts().counts().iter().all(|&n| n <= 300));
        if round == 299 {
            assert!(pool.per_class_counts().counts().iter().all(|&n| n == 299));
        }
    }
    assert_eq!(pool.per_class_counts().counts(), &[300; 10]);
}
