//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use genfl_cli::config::{apply_override, parse_config, RunConfig};
use genfl_cli::{plot_files, run, write_run, METRICS_FILE};
use genfl_core::costmodel::{round_cost, CostConfig, RoundMetrics, RoundWorkload};
use genfl_core::data::{emd_heterogeneity, LabelHistogram, LabeledDataset, Provenance};
use genfl_core::generator::{accrue, generate, select_labels, GenPool, GeneratorConfig};
use genfl_core::nn::{init_model, loss_and_grad, LayerShape, ModelParams, TrainSpec};
use genfl_core::protocol::{
    aggregate, compute_rho, round_to_threshold, run_experiment, AggregationPolicy, ExperimentConfig, Mode,
    Simulation,
};
use genfl_core::rng;
use genfl_core::data::ClassGeometry;
use rand::Rng;
use rayon::prelude::*;

const DIRECTIONAL_CFG: &str = include_str!("../configs/directional.cfg");
const GOLDEN_CFG: &str = include_str!("../configs/golden.cfg");

/// Rounds averaged into "final accuracy".
const FINAL_WINDOW: usize = 10;
const THRESHOLD: f64 = 0.6;
const SEEDS: u64 = 10;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn report(id: usize, name: &str, budget: Duration, elapsed: Duration, o: Outcome) -> bool {
    let in_time = elapsed <= budget;
    let pass = o.pass && in_time;
    let timing = if in_time {
        format!("{:.2}s", elapsed.as_secs_f64())
    } else {
        format!("{:.2}s, over the {}s budget", elapsed.as_secs_f64(), budget.as_secs())
    };
    println!(
        "{} {id:>2} {name}: {} ({timing})",
        if pass { "PASS" } else { "FAIL" },
        o.detail
    );
    pass
}

fn timed<F: FnOnce() -> Outcome>(f: F) -> (Outcome, Duration) {
    let t = Instant::now();
    let o = f();
    (o, t.elapsed())
}

// 1 ------------------------------------------------------------------------

fn gradient_oracle() -> Outcome {
    const EPS: f64 = 1e-5;
    let cases = 60;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut max_params = 0usize;
    for seed in 0..cases {
        let mut r = rng::stream(&[0x6772_6164, seed]);
        let in_dim = r.random_range(2..=6);
        let classes = r.random_range(2..=5);
        let shapes: Vec<LayerShape> = if seed % 3 == 0 {
            vec![(in_dim, classes)]
        } else {
            let hidden = r.random_range(2..=10);
            vec![(in_dim, hidden), (hidden, classes)]
        };
        let base = init_model(&shapes, seed).unwrap();
        let values: Vec<f64> = base.values().iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
        let model = ModelParams::from_values(&shapes, values).unwrap();
        max_params = max_params.max(model.len());
        let mut data = LabeledDataset::new(in_dim, classes);
        let n = r.random_range(1..=10);
        for _ in 0..n {
            let x: Vec<f64> = (0..in_dim).map(|_| r.random_range(-2.0..2.0)).collect();
            data.push(&x, r.random_range(0..classes), Provenance::Real).unwrap();
        }
        let idx: Vec<usize> = (0..n).collect();
        let (_, grad) = loss_and_grad(&model, &data, &idx).unwrap();
        let loss = |v: Vec<f64>| {
            let m = ModelParams::from_values(&shapes, v).unwrap();
            loss_and_grad(&m, &data, &idx).unwrap().0
        };
        for (k, &g) in grad.values().iter().enumerate() {
            let mut plus = model.values().to_vec();
            let mut minus = plus.clone();
            plus[k] += EPS;
            minus[k] -= EPS;
            let fd = (loss(plus) - loss(minus)) / (2.0 * EPS);
            let scale = g.abs().max(fd.abs());
            if scale > 1e-8 {
                worst = worst.max((g - fd).abs() / scale);
                checked += 1;
            }
        }
    }
    outcome(
        worst < 1e-5 && max_params <= 200,
        format!("max relative error {worst:.2e} over {checked} coordinates in {cases} models (<= {max_params} params)"),
    )
}

// 2 ------------------------------------------------------------------------

fn aggregation_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let cases = 120;
    for case in 0..cases {
        let mut r = rng::stream(&[0x6167_67, case]);
        let kappa1 = match case % 4 {
            0 => 1.0,
            1 => 0.0,
            _ => r.random_range(0.0..=1.0),
        };
        let shapes = [(r.random_range(1..5), r.random_range(1..5))];
        let len = shapes[0].0 * shapes[0].1 + shapes[0].1;
        let k = r.random_range(1..=6);
        let mut model = || {
            ModelParams::from_values(&shapes, (0..len).map(|_| r.random_range(-10.0..10.0)).collect()).unwrap()
        };
        let locals: Vec<ModelParams> = (0..k).map(|_| model()).collect();
        let omega_a = model();
        let sizes: Vec<usize> = (0..k).map(|i| 1 + (case as usize * 7 + i * 13) % 97).collect();
        let rho = compute_rho(&sizes).unwrap();
        let policy = AggregationPolicy::genfl(kappa1, 1.0 - kappa1).unwrap();
        let out = aggregate(&locals, &rho, Some(&omega_a), &policy).unwrap();
        let total: usize = sizes.iter().sum();
        for j in 0..len {
            let mut expect = (1.0 - kappa1) * omega_a.values()[j];
            for n in 0..k {
                expect += kappa1 * (sizes[n] as f64 / total as f64) * locals[n].values()[j];
            }
            worst = worst.max((out.values()[j] - expect).abs());
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max abs deviation {worst:.2e} over {cases} cases incl. kappa (1,0) and (0,1)"),
    )
}

// 3 ------------------------------------------------------------------------

fn same_numbers(a: &[RoundMetrics], b: &[RoundMetrics]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.round == y.round
                && x.test_accuracy.to_bits() == y.test_accuracy.to_bits()
                && x.test_loss.to_bits() == y.test_loss.to_bits()
                && x.mean_client_emd.to_bits() == y.mean_client_emd.to_bits()
                && x.round_time_sec.to_bits() == y.round_time_sec.to_bits()
                && x.round_energy_joules.to_bits() == y.round_energy_joules.to_bits()
                && x.pool_size == y.pool_size
        })
}

fn mode_reduction() -> Outcome {
    let mut failures = Vec::new();
    for seed in 1..=3 {
        let cfg = |mode, k1: f64| ExperimentConfig {
            seed,
            num_clients: 10,
            clients_per_round: 4,
            rounds: 20,
            samples_per_class: 60,
            hidden_width: 16,
            mode,
            kappa1: k1,
            kappa2: 1.0 - k1,
            ..ExperimentConfig::default()
        };
        let pairs = [
            ("GenFL(1,0) vs FL-only", cfg(Mode::GenFl, 1.0), cfg(Mode::FlOnly, 1.0)),
            ("GenFL(0,1) vs AIGC-only", cfg(Mode::GenFl, 0.0), cfg(Mode::AigcOnly, 0.0)),
        ];
        for (name, a, b) in pairs {
            let ta = run_experiment(&a).unwrap();
            let tb = run_experiment(&b).unwrap();
            if !same_numbers(&ta, &tb) {
                failures.push(format!("{name} seed {seed}"));
            }
        }
    }
    if failures.is_empty() {
        outcome(true, "bit-identical traces for both reductions over 3 seeds, 10 clients, 20 rounds")
    } else {
        outcome(false, format!("traces differ: {}", failures.join(", ")))
    }
}

// 4, 5, 6 ------------------------------------------------------------------

#[derive(Clone, Copy)]
struct Summary {
    final_acc: f64,
    rounds_to_threshold: usize,
}

struct Directional {
    fl_low: Vec<Summary>,
    fl_high: Vec<Summary>,
    gen_low: Vec<Summary>,
    aigc_low: Vec<Summary>,
    gen_high: Vec<Summary>,
    elapsed: Duration,
}

fn summarize(trace: &[RoundMetrics], rounds: usize) -> Summary {
    let tail = &trace[trace.len() - FINAL_WINDOW..];
    Summary {
        final_acc: tail.iter().map(|m| m.test_accuracy).sum::<f64>() / FINAL_WINDOW as f64,
        rounds_to_threshold: round_to_threshold(trace, THRESHOLD).unwrap_or(rounds + 1),
    }
}

fn directional_sweep() -> Directional {
    let t = Instant::now();
    let base = parse_config(DIRECTIONAL_CFG).expect("pinned config is valid");
    let arms = [
        (Mode::FlOnly, "0.1"),
        (Mode::FlOnly, "1.0"),
        (Mode::GenFl, "0.1"),
        (Mode::AigcOnly, "0.1"),
        (Mode::GenFl, "1.0"),
    ];
    let jobs: Vec<(usize, u64, RunConfig)> = arms
        .iter()
        .enumerate()
        .flat_map(|(a, &(mode, alpha))| {
            let base = &base;
            (1..=SEEDS).map(move |seed| {
                let mut cfg = base.clone();
                apply_override(&mut cfg, "mode", &mode.to_string()).unwrap();
                apply_override(&mut cfg, "alpha", alpha).unwrap();
                apply_override(&mut cfg, "seed", &seed.to_string()).unwrap();
                (a, seed, cfg)
            })
        })
        .collect();
    let mut results: Vec<(usize, u64, Summary)> = jobs
        .into_par_iter()
        .map(|(a, seed, cfg)| {
            let table = run(&cfg).expect("directional run");
            (a, seed, summarize(table.rows(), cfg.experiment.rounds))
        })
        .collect();
    results.sort_by_key(|&(a, s, _)| (a, s));
    let arm = |k: usize| results.iter().filter(|r| r.0 == k).map(|r| r.2).collect::<Vec<_>>();
    Directional {
        fl_low: arm(0),
        fl_high: arm(1),
        gen_low: arm(2),
        aigc_low: arm(3),
        gen_high: arm(4),
        elapsed: t.elapsed(),
    }
}

fn count<F: Fn(usize) -> bool>(f: F) -> usize {
    (0..SEEDS as usize).filter(|&i| f(i)).count()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn heterogeneity_hurts_fedavg(d: &Directional) -> Outcome {
    let acc = count(|i| d.fl_high[i].final_acc > d.fl_low[i].final_acc);
    let speed = count(|i| d.fl_high[i].rounds_to_threshold < d.fl_low[i].rounds_to_threshold);
    outcome(
        acc >= 8 && speed >= 8,
        format!(
            "FL-only alpha=1.0 beats alpha=0.1 on final accuracy in {acc}/10 seeds, reaches {THRESHOLD} sooner in {speed}/10"
        ),
    )
}

fn genfl_is_best(d: &Directional) -> Outcome {
    let best = count(|i| {
        d.gen_low[i].final_acc >= d.fl_low[i].final_acc && d.gen_low[i].final_acc >= d.aigc_low[i].final_acc
    });
    let aigc_below = count(|i| d.aigc_low[i].final_acc < d.fl_low[i].final_acc);
    let mean = |v: &[Summary]| v.iter().map(|s| s.final_acc).sum::<f64>() / v.len() as f64;
    outcome(
        best >= 8 && aigc_below >= 8,
        format!(
            "GenFL >= both baselines in {best}/10, AIGC-only < FL-only in {aigc_below}/10 (mean final {:.3} / {:.3} / {:.3})",
            mean(&d.gen_low),
            mean(&d.fl_low),
            mean(&d.aigc_low)
        ),
    )
}

fn acceleration_shrinks(d: &Directional) -> Outcome {
    let faster = count(|i| d.gen_low[i].rounds_to_threshold < d.fl_low[i].rounds_to_threshold);
    let gap = |fl: &[Summary], gen: &[Summary]| {
        median(
            fl.iter()
                .zip(gen)
                .map(|(f, g)| f.rounds_to_threshold as f64 - g.rounds_to_threshold as f64)
                .collect(),
        )
    };
    let low = gap(&d.fl_low, &d.gen_low);
    let high = gap(&d.fl_high, &d.gen_high);
    outcome(
        faster >= 7 && high < low,
        format!("GenFL reaches {THRESHOLD} sooner in {faster}/10 at alpha=0.1; median gap {low} rounds at 0.1, {high} at 1.0"),
    )
}

// 7 ------------------------------------------------------------------------

fn emd_suite() -> Outcome {
    let mut r = rng::stream(&[0x656d64]);
    let mut hist = |classes: usize| {
        LabelHistogram::from_counts((0..classes).map(|_| r.random_range(0..50u64) + u64::from(r.random_bool(0.5))).collect())
    };
    let mut problems = Vec::new();
    for _ in 0..500 {
        let (a, b, c) = (hist(8), hist(8), hist(8));
        if [&a, &b, &c].iter().any(|h| h.total() == 0) {
            continue;
        }
        let scaled = LabelHistogram::from_counts(a.counts().iter().map(|n| n * 3).collect());
        let ab = emd_heterogeneity(&a, &b).unwrap();
        let ba = emd_heterogeneity(&b, &a).unwrap();
        let ac = emd_heterogeneity(&a, &c).unwrap();
        let cb = emd_heterogeneity(&c, &b).unwrap();
        if emd_heterogeneity(&a, &a).unwrap() != 0.0 || emd_heterogeneity(&a, &scaled).unwrap() > 1e-15 {
            problems.push("identity");
        }
        if ab != ba {
            problems.push("symmetry");
        }
        if ab > ac + cb + 1e-12 {
            problems.push("triangle");
        }
        if !(0.0..=2.0).contains(&ab) {
            problems.push("range");
        }
    }
    let mut one_hot = vec![0u64; 10];
    one_hot[3] = 17;
    let value = emd_heterogeneity(&LabelHistogram::from_counts(one_hot), &LabelHistogram::from_counts(vec![5; 10]))
        .unwrap();
    if (value - 1.8).abs() > 1e-12 {
        problems.push("one-hot vs uniform");
    }
    let mean_emd = |alpha: f64, seed: u64| {
        let cfg = ExperimentConfig {
            seed,
            alpha,
            ..ExperimentConfig::default()
        };
        Simulation::new(&cfg).unwrap().initial_metrics().unwrap().mean_client_emd
    };
    let wins = (1..=20).filter(|&s| mean_emd(0.1, s) > mean_emd(1.0, s)).count();
    // one-sided sign test at the 5% level needs 15 of 20
    if wins < 15 {
        problems.push("Dirichlet monotonicity");
    }
    problems.dedup();
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("identity, symmetry, triangle hold; one-hot vs uniform = {value:.6}; alpha=0.1 more skewed than 1.0 in {wins}/20 seeds")
        } else {
            format!("violated: {}", problems.join(", "))
        },
    )
}

// 8 ------------------------------------------------------------------------

fn cap_and_rate() -> Outcome {
    let mut problems: Vec<String> = Vec::new();

    // every class uncovered: one sample per class per round, capped at 300
    let geometry = ClassGeometry::new(10, 10, 1.0).unwrap();
    let cfg = GeneratorConfig {
        rate_per_round: 10,
        cap_per_class: 300,
        label_noise: 0.0,
        ..GeneratorConfig::default()
    };
    let clients = [LabelHistogram::zeros(10)];
    let mut pool = GenPool::new(10, 10);
    let mut capped_at = None;
    for round in 1..=320u64 {
        let labels = select_labels(&clients, &pool, cfg.rate_per_round, cfg.cap_per_class);
        let expected = if round <= 300 { 10 } else { 0 };
        if labels.len() != expected {
            problems.push(format!("round {round} generated {}", labels.len()));
        }
        let fresh = generate(&labels, &cfg, &geometry, &mut rng::stream(&[round]));
        pool = accrue(pool, &fresh, cfg.cap_per_class).unwrap();
        let class0 = pool.per_class_counts().counts()[0];
        if class0 > 300 {
            problems.push(format!("round {round} exceeds cap"));
        }
        if class0 == 300 && capped_at.is_none() {
            capped_at = Some(round);
        }
    }
    if capped_at != Some(300) {
        problems.push(format!("class 0 capped at {capped_at:?}"));
    }

    // random schedules with label noise
    for case in 0..40u64 {
        let mut r = rng::stream(&[0x636170, case]);
        let classes = r.random_range(2..=8);
        let cfg = GeneratorConfig {
            rate_per_round: r.random_range(1..=25),
            cap_per_class: r.random_range(1..=40),
            label_noise: 0.3,
            ..GeneratorConfig::default()
        };
        let geometry = ClassGeometry::new(classes, classes, 1.0).unwrap();
        let clients: Vec<LabelHistogram> = (0..3)
            .map(|_| LabelHistogram::from_counts((0..classes).map(|_| r.random_range(0..30)).collect()))
            .collect();
        let mut pool = GenPool::new(classes, classes);
        for round in 0..60u64 {
            let room: u64 = pool
                .per_class_counts()
                .counts()
                .iter()
                .map(|&n| cfg.cap_per_class as u64 - n)
                .sum();
            let labels = select_labels(&clients, &pool, cfg.rate_per_round, cfg.cap_per_class);
            if labels.len() as u64 != room.min(cfg.rate_per_round as u64) {
                problems.push(format!("case {case} round {round}: {} labels, room {room}", labels.len()));
            }
            let fresh = generate(&labels, &cfg, &geometry, &mut r);
            pool = accrue(pool, &fresh, cfg.cap_per_class).unwrap();
            if pool.per_class_counts().counts().iter().any(|&n| n > cfg.cap_per_class as u64) {
                problems.push(format!("case {case} round {round}: cap exceeded"));
            }
        }
    }
    problems.truncate(3);
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "10 per round until every class hits 300 at round 300, then 0; cap never exceeded over 40 random schedules".to_string()
        } else {
            problems.join("; ")
        },
    )
}

// 9 ------------------------------------------------------------------------

fn produce(dir: &Path, parallel: bool) -> (Vec<u8>, Vec<u8>) {
    let mut cfg = parse_config(GOLDEN_CFG).unwrap();
    cfg.experiment.parallel_clients = parallel;
    cfg.output_dir = dir.to_path_buf();
    let table = run(&cfg).unwrap();
    write_run(&cfg, &table).unwrap();
    let csv = dir.join(METRICS_FILE);
    let svg = dir.join("plot.svg");
    plot_files(&[csv.clone()], &svg, "golden").unwrap();
    (std::fs::read(csv).unwrap(), std::fs::read(svg).unwrap())
}

fn golden_files() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let first = produce(&tmp.path().join("a"), true);
    let second = produce(&tmp.path().join("b"), true);
    let serial = produce(&tmp.path().join("c"), false);
    let golden_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    if std::env::var_os("GENFL_BLESS").is_some() {
        std::fs::write(golden_dir.join(METRICS_FILE), &first.0).unwrap();
        std::fs::write(golden_dir.join("plot.svg"), &first.1).unwrap();
    }
    let stored = (
        std::fs::read(golden_dir.join(METRICS_FILE)).unwrap_or_default(),
        std::fs::read(golden_dir.join("plot.svg")).unwrap_or_default(),
    );
    let checks = [
        ("rerun", first == second),
        ("serial vs parallel", first == serial),
        ("stored golden files", first == stored),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        failed.is_empty(),
        if failed.is_empty() {
            format!(
                "metrics.csv ({} bytes) and plot.svg ({} bytes) identical across rerun, serial/parallel and stored copies",
                first.0.len(),
                first.1.len()
            )
        } else {
            format!("bytes differ: {}", failed.join(", "))
        },
    )
}

// 10 -----------------------------------------------------------------------

fn cost_oracle() -> Outcome {
    let cost = CostConfig {
        client_flops_per_sec: 1e6,
        uplink_bps: 1e6,
        downlink_bps: 1e6,
        bytes_per_param: 4,
        ..CostConfig::default()
    };
    let spec = TrainSpec {
        epochs: 1,
        batch_size: 10,
        learning_rate: 0.1,
    };
    let work = RoundWorkload {
        client_sizes: &[100],
        param_count: 1000,
        generated_samples: 0,
        augmented_samples: 0,
    };
    let c = round_cost(&work, &spec, &cost);
    let compute: f64 = 2.0 * 1000.0 * 100.0 / 1e6;
    let transfer: f64 = 1000.0 * 4.0 * 8.0 / 1e6;
    let arithmetic = (compute - 0.2).abs() <= 1e-12
        && (transfer - 0.032).abs() <= 1e-12
        && (c.time_sec - 0.264).abs() <= 1e-12
        && (c.client_path_sec - (compute + 2.0 * transfer)).abs() <= 1e-12
        && c.server_path_sec == 0.0
        && (c.energy_joules - cost.client_power_watts * 0.264).abs() <= 1e-12;

    let mut homogeneous = true;
    for (sizes, generated, augmented) in [(vec![100], 0, 0), (vec![10, 400, 37], 50, 900), (vec![], 3000, 3000)] {
        let work = RoundWorkload {
            client_sizes: &sizes,
            param_count: 1234,
            generated_samples: generated,
            augmented_samples: augmented,
        };
        let base = CostConfig::default();
        let fast = CostConfig {
            client_flops_per_sec: 2.0 * base.client_flops_per_sec,
            server_flops_per_sec: 2.0 * base.server_flops_per_sec,
            uplink_bps: 2.0 * base.uplink_bps,
            downlink_bps: 2.0 * base.downlink_bps,
            ..base
        };
        let slow_t = round_cost(&work, &spec, &base).time_sec;
        let fast_t = round_cost(&work, &spec, &fast).time_sec;
        homogeneous &= fast_t == slow_t / 2.0;
    }
    outcome(
        arithmetic && homogeneous,
        format!(
            "single client: {:.3}s ({compute} compute + 2 x {transfer} transfer); doubling rates halves time exactly: {homogeneous}",
            c.time_sec
        ),
    )
}

fn main() {
    let mut all = true;
    let secs = Duration::from_secs;

    let (o, e) = timed(gradient_oracle);
    all &= report(1, "gradient oracle", secs(10), e, o);
    let (o, e) = timed(aggregation_oracle);
    all &= report(2, "aggregation oracle", secs(1), e, o);
    let (o, e) = timed(mode_reduction);
    all &= report(3, "mode reduction", secs(60), e, o);

    let sweep = directional_sweep();
    let t = sweep.elapsed;
    all &= report(4, "heterogeneity slows FL-only", secs(600), t, heterogeneity_hurts_fedavg(&sweep));
    all &= report(5, "GenFL highest accuracy", secs(900), t, genfl_is_best(&sweep));
    all &= report(6, "GenFL acceleration", secs(900), t, acceleration_shrinks(&sweep));

    let (o, e) = timed(emd_suite);
    all &= report(7, "EMD metric suite", secs(30), e, o);
    let (o, e) = timed(cap_and_rate);
    all &= report(8, "generator cap and rate", secs(5), e, o);
    let (o, e) = timed(golden_files);
    all &= report(9, "determinism golden files", secs(60), e, o);
    let (o, e) = timed(cost_oracle);
    all &= report(10, "cost model oracle", secs(1), e, o);

    if !all {
        std::process::exit(1);
    }
}
