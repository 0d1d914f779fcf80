//! Round-based simulation of federated averaging with a server-side
//! augmented model.
//!
//! Each round the server samples a cohort, optionally tops up its generated
//! pool, broadcasts the global model, collects the cohort's locally trained
//! models, trains its own augmented model on the pool and mixes the two:
//!
//! ```text
//! global' = kappa1 * sum_n rho_n * local_n + kappa2 * augmented
//! ```
//!
//! with `rho_n` the cohort-normalized local dataset sizes. `FL-only` and
//! `AIGC-only` are the `kappa2 = 0` and `kappa1 = 0` corners of the same
//! rule, and are executed by the same code path.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use thiserror::Error;

use crate::costmodel::{round_cost, CostConfig, RoundMetrics, RoundWorkload};
use crate::data::{
    dirichlet_partition, emd_heterogeneity, label_histogram, sample_dataset, stratified_holdout,
    ClassGeometry, DataError, LabelHistogram, LabeledDataset, DEFAULT_CENTER_SEPARATION,
};
use crate::generator::{accrue, generate, select_labels, GenError, GenPool, GeneratorConfig};
use crate::nn::{self, evaluate, init_model, LayerShape, ModelParams, NnError, TrainSpec};
use crate::rng::{self, tag, RngStream};

/// Fraction of the real dataset held out for evaluation.
pub const TEST_FRACTION: f64 = 0.2;

/// Tolerance on `kappa1 + kappa2 = 1` and on `sum(rho) = 1`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("client {0} has no local data")]
    EmptyClient(usize),
    #[error("cannot select {per_round} of {clients} clients")]
    CohortTooLarge { per_round: usize, clients: usize },
    #[error("{locals} local models but {weights} weights")]
    WeightCountMismatch { locals: usize, weights: usize },
    #[error("aggregation weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("model shapes differ")]
    ShapeMismatch,
    #[error("kappa2 > 0 but no augmented model is available")]
    MissingAugmented,
    #[error("invalid aggregation policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

fn format_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A single failed configuration check, keyed by config file key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigViolation {
    pub key: &'static str,
    pub message: String,
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    GenFl,
    FlOnly,
    AigcOnly,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::FlOnly, Mode::AigcOnly, Mode::GenFl];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::GenFl => "GenFL",
            Mode::FlOnly => "FL-only",
            Mode::AigcOnly => "AIGC-only",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "genfl" => Ok(Mode::GenFl),
            "flonly" | "fl" => Ok(Mode::FlOnly),
            "aigconly" | "aigc" => Ok(Mode::AigcOnly),
            _ => Err(format!("unknown mode `{s}` (expected GenFL, FL-only or AIGC-only)")),
        }
    }
}

/// Convex mixing weights of the cohort average (`kappa1`) and the augmented
/// model (`kappa2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregationPolicy {
    kappa1: f64,
    kappa2: f64,
    mode: Mode,
}

impl AggregationPolicy {
    pub fn new(mode: Mode, kappa1: f64, kappa2: f64) -> Result<Self> {
        let bad = |m: String| Err(ProtocolError::InvalidPolicy(m));
        if !(kappa1.is_finite() && kappa1 >= 0.0 && kappa2.is_finite() && kappa2 >= 0.0) {
            return bad(format!("kappas must be >= 0 (got {kappa1}, {kappa2})"));
        }
        if ((kappa1 + kappa2) - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return bad(format!("kappa1 + kappa2 must be 1 (got {})", kappa1 + kappa2));
        }
        match mode {
            Mode::FlOnly if kappa2 != 0.0 => bad("FL-only requires kappa2 = 0".into()),
            Mode::AigcOnly if kappa1 != 0.0 => bad("AIGC-only requires kappa1 = 0".into()),
            _ => Ok(Self {
                kappa1,
                kappa2,
                mode,
            }),
        }
    }

    pub fn genfl(kappa1: f64, kappa2: f64) -> Result<Self> {
        Self::new(Mode::GenFl, kappa1, kappa2)
    }

    pub fn fl_only() -> Self {
        Self {
            kappa1: 1.0,
            kappa2: 0.0,
            mode: Mode::FlOnly,
        }
    }

    pub fn aigc_only() -> Self {
        Self {
            kappa1: 0.0,
            kappa2: 1.0,
            mode: Mode::AigcOnly,
        }
    }

    pub fn kappa1(&self) -> f64 {
        self.kappa1
    }

    pub fn kappa2(&self) -> f64 {
        self.kappa2
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Clients train only when their average carries weight.
    pub fn uses_clients(&self) -> bool {
        self.kappa1 > 0.0
    }

    /// The server generates and trains only when the augmented model carries
    /// weight.
    pub fn uses_augmented(&self) -> bool {
        self.kappa2 > 0.0
    }
}

/// A client: private local data plus the label histogram it shares.
///
/// The local features never leave this type; the rest of the protocol only
/// sees the histogram, the dataset size and trained parameters.
#[derive(Debug, Clone)]
pub struct ClientState {
    id: usize,
    local_data: LabeledDataset,
    shared_histogram: LabelHistogram,
    rng_seed_base: u64,
}

impl ClientState {
    pub fn new(id: usize, local_data: LabeledDataset, rng_seed_base: u64) -> Result<Self> {
        if local_data.is_empty() {
            return Err(ProtocolError::EmptyClient(id));
        }
        let shared_histogram = label_histogram(&local_data);
        Ok(Self {
            id,
            local_data,
            shared_histogram,
            rng_seed_base,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shared_histogram(&self) -> &LabelHistogram {
        &self.shared_histogram
    }

    pub fn dataset_len(&self) -> usize {
        self.local_data.len()
    }

    /// The stream this client trains with in `round`.
    pub fn rng_stream(&self, round: usize) -> RngStream {
        rng::stream(&[tag::CLIENT, self.rng_seed_base, round as u64, self.id as u64])
    }

    /// Trains a copy of `global` on the local data.
    pub fn train_local(&self, global: &ModelParams, spec: &TrainSpec, round: usize) -> Result<ModelParams> {
        let mut stream = self.rng_stream(round);
        Ok(nn::train(global, &self.local_data, spec, &mut stream)?)
    }
}

/// Server-side state carried from round to round.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub global_model: ModelParams,
    pub gen_pool: GenPool,
    pub round_index: usize,
    pub client_histograms: Vec<LabelHistogram>,
}

/// Histograms indexed by client id.
pub fn share_labels(clients: &[ClientState]) -> Vec<LabelHistogram> {
    let mut out: Vec<(usize, LabelHistogram)> = clients
        .iter()
        .map(|c| (c.id, c.shared_histogram.clone()))
        .collect();
    out.sort_by_key(|(id, _)| *id);
    out.into_iter().map(|(_, h)| h).collect()
}

/// Uniform sample without replacement, returned in ascending id order.
pub fn sample_clients(num_clients: usize, per_round: usize, round: usize, seed: u64) -> Result<Vec<usize>> {
    if per_round > num_clients {
        return Err(ProtocolError::CohortTooLarge {
            per_round,
            clients: num_clients,
        });
    }
    let mut stream = rng::stream(&[tag::SAMPLE, seed, round as u64]);
    let mut ids = index::sample(&mut stream, num_clients, per_round).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// `rho_n = |D_n| / sum_m |D_m|` over the cohort.
pub fn compute_rho(sizes: &[usize]) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(ProtocolError::EmptyCohort);
    }
    if let Some(i) = sizes.iter().position(|&n| n == 0) {
        return Err(ProtocolError::EmptyClient(i));
    }
    let total: usize = sizes.iter().sum();
    Ok(sizes.iter().map(|&n| n as f64 / total as f64).collect())
}

/// Trains the augmented model from the current global model on the pool.
/// Returns `None` when the pool is empty.
pub fn train_augmented(
    global: &ModelParams,
    pool: &GenPool,
    spec: &TrainSpec,
    stream: &mut RngStream,
) -> Result<Option<ModelParams>> {
    if pool.is_empty() {
        return Ok(None);
    }
    Ok(Some(nn::train(global, pool.dataset(), spec, stream)?))
}

/// Weighted policy: `kappa1 * sum(rho_n * locals_n) + kappa2 * omega_a`.
///
/// `kappa1 = 0` returns `omega_a` unchanged and ignores `locals`;
/// `kappa2 = 0` returns the plain weighted average and ignores `omega_a`.
pub fn aggregate(
    locals: &[ModelParams],
    rho: &[f64],
    omega_a: Option<&ModelParams>,
    policy: &AggregationPolicy,
) -> Result<ModelParams> {
    if policy.kappa1 == 0.0 {
        return omega_a.cloned().ok_or(ProtocolError::MissingAugmented);
    }
    if locals.is_empty() {
        return Err(ProtocolError::EmptyCohort);
    }
    if locals.len() != rho.len() {
        return Err(ProtocolError::WeightCountMismatch {
            locals: locals.len(),
            weights: rho.len(),
        });
    }
    let rho_sum: f64 = rho.iter().sum();
    if (rho_sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(ProtocolError::WeightSum(rho_sum));
    }
    let first = &locals[0];
    if locals.iter().any(|m| !m.same_shape(first)) {
        return Err(ProtocolError::ShapeMismatch);
    }

    let mut avg = ModelParams::zeros(first.layer_shapes())?;
    for (m, &w) in locals.iter().zip(rho) {
        avg.add_scaled(m, w)?;
    }
    if policy.kappa2 == 0.0 {
        return Ok(avg);
    }

    let omega_a = omega_a.ok_or(ProtocolError::MissingAugmented)?;
    if !omega_a.same_shape(first) {
        return Err(ProtocolError::ShapeMismatch);
    }
    avg.scale(policy.kappa1);
    avg.add_scaled(omega_a, policy.kappa2)?;
    Ok(avg)
}

/// Every knob of one simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub samples_per_class: usize,
    pub cluster_spread: f64,
    /// Distance between any two class centers.
    pub class_separation: f64,
    pub num_clients: usize,
    pub clients_per_round: usize,
    pub rounds: usize,
    pub alpha: f64,
    pub mode: Mode,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Width of the tanh hidden layer; 0 gives a plain softmax regression.
    pub hidden_width: usize,
    pub train: TrainSpec,
    pub generator: GeneratorConfig,
    pub cost: CostConfig,
    /// Train the cohort on the rayon pool instead of one after another.
    pub parallel_clients: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            num_classes: 10,
            feature_dim: 10,
            samples_per_class: 200,
            cluster_spread: 1.0,
            class_separation: DEFAULT_CENTER_SEPARATION,
            num_clients: 20,
            clients_per_round: 5,
            rounds: 100,
            alpha: 0.1,
            mode: Mode::GenFl,
            kappa1: 0.7,
            kappa2: 0.3,
            hidden_width: 64,
            train: TrainSpec {
                epochs: 5,
                batch_size: 16,
                learning_rate: 0.01,
            },
            generator: GeneratorConfig {
                rate_per_round: 10,
                cap_per_class: 300,
                label_noise: 0.1,
                center_shift: 0.5,
                spread_factor: 1.0,
            },
            cost: CostConfig::default(),
            parallel_clients: true,
        }
    }
}

impl ExperimentConfig {
    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> std::result::Result<(), Vec<ConfigViolation>> {
        let mut v = Vec::new();
        let mut fail = |key: &'static str, message: String| v.push(ConfigViolation { key, message });

        if self.num_classes < 2 {
            fail("num_classes", "must be >= 2".into());
        }
        if self.feature_dim < self.num_classes {
            fail(
                "feature_dim",
                format!("must be >= num_classes ({})", self.num_classes),
            );
        }
        if self.samples_per_class < 5 {
            fail("samples_per_class", "must be >= 5".into());
        }
        if !(self.cluster_spread.is_finite() && self.cluster_spread > 0.0) {
            fail("cluster_spread", "must be > 0".into());
        }
        if !(self.class_separation.is_finite() && self.class_separation > 0.0) {
            fail("class_separation", "must be > 0".into());
        }
        let train_size = self.num_classes * (self.samples_per_class - train_holdout(self.samples_per_class));
        if self.num_clients == 0 {
            fail("num_clients", "must be >= 1".into());
        } else if self.samples_per_class >= 5 && self.num_clients > train_size {
            fail(
                "num_clients",
                format!("must not exceed the {train_size} training samples"),
            );
        }
        if self.clients_per_round == 0 || self.clients_per_round > self.num_clients {
            fail("clients_per_round", "must be in 1..=num_clients".into());
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            fail("alpha", "must be > 0".into());
        }
        if !(self.kappa1.is_finite() && self.kappa1 >= 0.0) {
            fail("kappa1", "must be >= 0".into());
        }
        if !(self.kappa2.is_finite() && self.kappa2 >= 0.0) {
            fail("kappa2", "must be >= 0".into());
        }
        if ((self.kappa1 + self.kappa2) - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            fail("kappa2", "kappa1 + kappa2 must equal 1".into());
        }
        match self.mode {
            Mode::FlOnly if self.kappa2 != 0.0 => fail("kappa2", "must be 0 in FL-only mode".into()),
            Mode::AigcOnly if self.kappa1 != 0.0 => fail("kappa1", "must be 0 in AIGC-only mode".into()),
            _ => {}
        }
        if self.train.epochs == 0 {
            fail("epochs", "must be >= 1".into());
        }
        if self.train.batch_size == 0 {
            fail("batch_size", "must be >= 1".into());
        }
        if !(self.train.learning_rate.is_finite() && self.train.learning_rate > 0.0) {
            fail("learning_rate", "must be > 0".into());
        }
        let g = &self.generator;
        if g.rate_per_round == 0 {
            fail("rate_per_round", "must be >= 1".into());
        }
        if g.cap_per_class == 0 {
            fail("cap_per_class", "must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&g.label_noise) {
            fail("label_noise", "must be in [0, 1]".into());
        }
        if !(g.center_shift.is_finite() && g.center_shift >= 0.0) {
            fail("center_shift", "must be >= 0".into());
        }
        if !(g.spread_factor.is_finite() && g.spread_factor > 0.0) {
            fail("spread_factor", "must be > 0".into());
        }
        if let Err(e) = self.cost.validate() {
            fail(e.0, "must be finite and > 0".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    pub fn policy(&self) -> Result<AggregationPolicy> {
        AggregationPolicy::new(self.mode, self.kappa1, self.kappa2)
    }

    pub fn layer_shapes(&self) -> Vec<LayerShape> {
        if self.hidden_width == 0 {
            vec![(self.feature_dim, self.num_classes)]
        } else {
            vec![
                (self.feature_dim, self.hidden_width),
                (self.hidden_width, self.num_classes),
            ]
        }
    }
}

fn train_holdout(samples_per_class: usize) -> usize {
    (samples_per_class as f64 * TEST_FRACTION).floor() as usize
}

/// Read-only inputs shared by every round of one experiment.
#[derive(Debug, Clone)]
pub struct RoundContext {
    pub seed: u64,
    pub clients_per_round: usize,
    pub policy: AggregationPolicy,
    pub train: TrainSpec,
    pub generator: GeneratorConfig,
    pub cost: CostConfig,
    pub geometry: ClassGeometry,
    pub test_set: LabeledDataset,
    pub population: LabelHistogram,
    pub parallel_clients: bool,
}

fn mean_emd(hists: &[&LabelHistogram], population: &LabelHistogram) -> Result<f64> {
    if hists.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for h in hists {
        sum += emd_heterogeneity(h, population)?;
    }
    Ok(sum / hists.len() as f64)
}

/// Executes one full round. `server` is left untouched; on success the
/// advanced state is returned alongside the round's metrics.
pub fn run_round(
    server: &ServerState,
    clients: &[ClientState],
    ctx: &RoundContext,
) -> Result<(ServerState, RoundMetrics)> {
    let round = server.round_index + 1;
    let policy = ctx.policy;
    let cohort_ids = sample_clients(clients.len(), ctx.clients_per_round, round, ctx.seed)?;
    let cohort: Vec<&ClientState> = cohort_ids.iter().map(|&i| &clients[i]).collect();

    let mut pool = server.gen_pool.clone();
    let mut generated = 0;
    if policy.uses_augmented() {
        let labels = select_labels(
            &server.client_histograms,
            &pool,
            ctx.generator.rate_per_round,
            ctx.generator.cap_per_class,
        );
        let mut stream = rng::stream(&[tag::GENERATE, ctx.seed, round as u64]);
        let fresh = generate(&labels, &ctx.generator, &ctx.geometry, &mut stream);
        generated = fresh.len();
        pool = accrue(pool, &fresh, ctx.generator.cap_per_class)?;
    }

    let global = &server.global_model;
    let locals: Vec<ModelParams> = if !policy.uses_clients() {
        Vec::new()
    } else if ctx.parallel_clients {
        cohort
            .par_iter()
            .map(|c| c.train_local(global, &ctx.train, round))
            .collect::<Result<_>>()?
    } else {
        cohort
            .iter()
            .map(|c| c.train_local(global, &ctx.train, round))
            .collect::<Result<_>>()?
    };

    let augmented = if policy.uses_augmented() {
        let mut stream = rng::stream(&[tag::AUGMENT, ctx.seed, round as u64]);
        train_augmented(global, &pool, &ctx.train, &mut stream)?
    } else {
        None
    };

    let sizes: Vec<usize> = cohort.iter().map(|c| c.dataset_len()).collect();
    let next_model = match (&augmented, policy.uses_clients()) {
        // no generated data yet: the augmented share falls back to the cohort
        (None, true) if policy.uses_augmented() => {
            aggregate(&locals, &compute_rho(&sizes)?, None, &AggregationPolicy::fl_only())?
        }
        // nothing to learn from this round
        (None, false) => global.clone(),
        _ => aggregate(&locals, &compute_rho(&sizes)?, augmented.as_ref(), &policy)?,
    };

    let eval = evaluate(&next_model, &ctx.test_set)?;
    let emd = mean_emd(
        &cohort.iter().map(|c| c.shared_histogram()).collect::<Vec<_>>(),
        &ctx.population,
    )?;
    let trained_sizes: &[usize] = if policy.uses_clients() { &sizes } else { &[] };
    let cost = round_cost(
        &RoundWorkload {
            client_sizes: trained_sizes,
            param_count: next_model.len(),
            generated_samples: generated,
            augmented_samples: if augmented.is_some() { pool.len() } else { 0 },
        },
        &ctx.train,
        &ctx.cost,
    );

    let metrics = RoundMetrics {
        round,
        mode: policy.mode(),
        test_accuracy: eval.accuracy,
        test_loss: eval.mean_loss,
        mean_client_emd: emd,
        round_time_sec: cost.time_sec,
        round_energy_joules: cost.energy_joules,
        pool_size: pool.len(),
    };
    let next = ServerState {
        global_model: next_model,
        gen_pool: pool,
        round_index: round,
        client_histograms: server.client_histograms.clone(),
    };
    Ok((next, metrics))
}

/// A prepared experiment: dataset built, partitioned, model initialized.
#[derive(Debug, Clone)]
pub struct Simulation {
    ctx: RoundContext,
    clients: Vec<ClientState>,
    server: ServerState,
}

impl Simulation {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate().map_err(ProtocolError::InvalidConfig)?;
        let policy = config.policy()?;
        let geometry = ClassGeometry::with_separation(
            config.num_classes,
            config.feature_dim,
            config.cluster_spread,
            config.class_separation,
        )?;
        let full = sample_dataset(&geometry, config.samples_per_class, config.seed);
        let (train, test_set) = stratified_holdout(&full, TEST_FRACTION);
        let plan = dirichlet_partition(&train, config.num_clients, config.alpha, config.seed)?;
        let clients = plan
            .assignments()
            .iter()
            .enumerate()
            .map(|(id, idx)| ClientState::new(id, train.subset(idx), config.seed))
            .collect::<Result<Vec<_>>>()?;
        let client_histograms = share_labels(&clients);
        let mut population = LabelHistogram::zeros(config.num_classes);
        for h in &client_histograms {
            population.add(h)?;
        }
        let global_model = init_model(&config.layer_shapes(), config.seed)?;
        Ok(Self {
            ctx: RoundContext {
                seed: config.seed,
                clients_per_round: config.clients_per_round,
                policy,
                train: config.train,
                generator: config.generator,
                cost: config.cost,
                geometry,
                test_set,
                population,
                parallel_clients: config.parallel_clients,
            },
            clients,
            server: ServerState {
                global_model,
                gen_pool: GenPool::new(config.feature_dim, config.num_classes),
                round_index: 0,
                client_histograms,
            },
        })
    }

    pub fn context(&self) -> &RoundContext {
        &self.ctx
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    /// Round-0 record: the initial model, before any training.
    pub fn initial_metrics(&self) -> Result<RoundMetrics> {
        let eval = evaluate(&self.server.global_model, &self.ctx.test_set)?;
        let emd = mean_emd(&self.server.client_histograms.iter().collect::<Vec<_>>(), &self.ctx.population)?;
        Ok(RoundMetrics {
            round: 0,
            mode: self.ctx.policy.mode(),
            test_accuracy: eval.accuracy,
            test_loss: eval.mean_loss,
            mean_client_emd: emd,
            round_time_sec: 0.0,
            round_energy_joules: 0.0,
            pool_size: 0,
        })
    }

    /// Advances one round; on error the simulation is left as it was.
    pub fn step(&mut self) -> Result<RoundMetrics> {
        let (next, metrics) = run_round(&self.server, &self.clients, &self.ctx)?;
        self.server = next;
        Ok(metrics)
    }
}

/// Runs `config.rounds` rounds and returns the round-0 record followed by
/// one record per round.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RoundMetrics>> {
    let mut sim = Simulation::new(config)?;
    let mut trace = Vec::with_capacity(config.rounds + 1);
    trace.push(sim.initial_metrics()?);
    for _ in 0..config.rounds {
        trace.push(sim.step()?);
    }
    Ok(trace)
}

/// First round whose test accuracy reaches `threshold`.
pub fn round_to_threshold(trace: &[RoundMetrics], threshold: f64) -> Option<usize> {
    trace
        .iter()
        .find(|m| m.test_accuracy >= threshold)
        .map(|m| m.round)
}
