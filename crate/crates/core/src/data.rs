//! Synthetic Gaussian-cluster datasets, Dirichlet label-skew partitioning and
//! label-distribution heterogeneity.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

use crate::rng;

/// Default distance between any two class centers.
pub const DEFAULT_CENTER_SEPARATION: f64 = 6.0;

/// Attempts made by [`dirichlet_partition`] before giving up on finding a
/// partition with no empty client.
pub const MAX_PARTITION_ATTEMPTS: u64 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("feature vector has {got} entries, dataset dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("cannot split {samples} samples across {clients} clients")]
    TooManyClients { clients: usize, samples: usize },
    #[error("every partition attempt left a client empty ({attempts} attempts)")]
    PartitionFailed { attempts: u64 },
    #[error("histogram has zero total")]
    ZeroTotal,
    #[error("histograms have different class counts ({0} vs {1})")]
    ClassCountMismatch(usize, usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Real,
    Generated,
}

impl Provenance {
    pub fn flag(self) -> char {
        match self {
            Provenance::Real => 'r',
            Provenance::Generated => 'g',
        }
    }
}

/// Feature/label samples with per-sample provenance. Features are stored
/// row-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    num_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
    provenance: Vec<Provenance>,
}

impl LabeledDataset {
    pub fn new(dim: usize, num_classes: usize) -> Self {
        Self {
            dim,
            num_classes,
            features: Vec::new(),
            labels: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn push(&mut self, features: &[f64], label: usize, provenance: Provenance) -> Result<()> {
        if features.len() != self.dim {
            return Err(DataError::DimensionMismatch {
                expected: self.dim,
                got: features.len(),
            });
        }
        if label >= self.num_classes {
            return Err(DataError::LabelOutOfRange {
                label,
                classes: self.num_classes,
            });
        }
        self.features.extend_from_slice(features);
        self.labels.push(label);
        self.provenance.push(provenance);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn provenance(&self, i: usize) -> Provenance {
        self.provenance[i]
    }

    pub fn provenances(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Copies `indices` (in that order) into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = Self::new(self.dim, self.num_classes);
        for &i in indices {
            out.features.extend_from_slice(self.features(i));
            out.labels.push(self.labels[i]);
            out.provenance.push(self.provenance[i]);
        }
        out
    }

    /// Appends every sample of `other`.
    pub fn extend_from(&mut self, other: &LabeledDataset) -> Result<()> {
        if other.dim != self.dim {
            return Err(DataError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if other.num_classes != self.num_classes {
            return Err(DataError::ClassCountMismatch(self.num_classes, other.num_classes));
        }
        self.features.extend_from_slice(&other.features);
        self.labels.extend_from_slice(&other.labels);
        self.provenance.extend_from_slice(&other.provenance);
        Ok(())
    }
}

/// Per-class sample counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelHistogram {
    counts: Vec<u64>,
}

impl LabelHistogram {
    pub fn zeros(num_classes: usize) -> Self {
        Self {
            counts: vec![0; num_classes],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn increment(&mut self, class: usize) {
        self.counts[class] += 1;
    }

    pub fn add(&mut self, other: &LabelHistogram) -> Result<()> {
        if other.num_classes() != self.num_classes() {
            return Err(DataError::ClassCountMismatch(self.num_classes(), other.num_classes()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn normalized(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if total == 0 {
            return Err(DataError::ZeroTotal);
        }
        Ok(self.counts.iter().map(|&c| c as f64 / total as f64).collect())
    }
}

pub fn label_histogram(data: &LabeledDataset) -> LabelHistogram {
    let mut h = LabelHistogram::zeros(data.num_classes());
    for &y in data.labels() {
        h.increment(y);
    }
    h
}

/// L1 distance between the normalized label marginals; lies in `[0, 2]`.
pub fn emd_heterogeneity(client: &LabelHistogram, population: &LabelHistogram) -> Result<f64> {
    if client.num_classes() != population.num_classes() {
        return Err(DataError::ClassCountMismatch(client.num_classes(), population.num_classes()));
    }
    let p = client.normalized()?;
    let q = population.normalized()?;
    Ok(p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum())
}

/// True class-conditional geometry of the synthetic task: isotropic Gaussians
/// around one center per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGeometry {
    centers: Vec<Vec<f64>>,
    spread: f64,
}

impl ClassGeometry {
    /// Geometry with [`DEFAULT_CENTER_SEPARATION`].
    pub fn new(num_classes: usize, dim: usize, spread: f64) -> Result<Self> {
        Self::with_separation(num_classes, dim, spread, DEFAULT_CENTER_SEPARATION)
    }

    /// Class `c` is centered at `s * e_c`, a scaled corner of the unit
    /// hypercube adjacent to the origin; `s` puts every pair of centers
    /// exactly `separation` apart. Needs `dim >= num_classes`.
    pub fn with_separation(num_classes: usize, dim: usize, spread: f64, separation: f64) -> Result<Self> {
        if num_classes == 0 || dim == 0 {
            return Err(DataError::InvalidArgument(
                "num_classes and dim must be positive".into(),
            ));
        }
        if dim < num_classes {
            return Err(DataError::InvalidArgument(format!(
                "feature dim {dim} must be at least num_classes {num_classes}"
            )));
        }
        if !(spread.is_finite() && spread > 0.0) {
            return Err(DataError::InvalidArgument("cluster_spread must be > 0".into()));
        }
        if !(separation.is_finite() && separation > 0.0) {
            return Err(DataError::InvalidArgument("class separation must be > 0".into()));
        }
        let scale = separation / std::f64::consts::SQRT_2;
        let centers = (0..num_classes)
            .map(|c| {
                let mut v = vec![0.0; dim];
                v[c] = scale;
                v
            })
            .collect();
        Ok(Self { centers, spread })
    }

    pub fn num_classes(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn center(&self, class: usize) -> &[f64] {
        &self.centers[class]
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    /// Draws one point from `N(center + offset, (spread * spread_factor)^2 I)`.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        class: usize,
        offset: Option<&[f64]>,
        spread_factor: f64,
        rng: &mut R,
        out: &mut Vec<f64>,
    ) {
        let sigma = self.spread * spread_factor;
        out.clear();
        for (k, &mu) in self.centers[class].iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            let shift = offset.map_or(0.0, |o| o[k]);
            out.push(mu + shift + sigma * z);
        }
    }

    /// Index of the nearest center (lowest index on ties).
    pub fn nearest_center(&self, x: &[f64]) -> usize {
        let dist = |c: &[f64]| -> f64 { c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum() };
        let mut best = 0;
        let mut best_d = dist(&self.centers[0]);
        for (c, center) in self.centers.iter().enumerate().skip(1) {
            let d = dist(center);
            if d < best_d {
                best = c;
                best_d = d;
            }
        }
        best
    }
}

/// Balanced dataset of `samples_per_class` real samples per class, generated
/// class by class.
pub fn make_synthetic_dataset(
    num_classes: usize,
    dim: usize,
    samples_per_class: usize,
    cluster_spread: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if samples_per_class == 0 {
        return Err(DataError::InvalidArgument("samples_per_class must be positive".into()));
    }
    let geometry = ClassGeometry::new(num_classes, dim, cluster_spread)?;
    Ok(sample_dataset(&geometry, samples_per_class, seed))
}

/// Same as [`make_synthetic_dataset`] for an existing geometry.
pub fn sample_dataset(geometry: &ClassGeometry, samples_per_class: usize, seed: u64) -> LabeledDataset {
    let mut rng = rng::stream(&[rng::tag::DATASET, seed]);
    let mut data = LabeledDataset::new(geometry.dim(), geometry.num_classes());
    let mut x = Vec::with_capacity(geometry.dim());
    for c in 0..geometry.num_classes() {
        for _ in 0..samples_per_class {
            geometry.sample_into(c, None, 1.0, &mut rng, &mut x);
            data.push(&x, c, Provenance::Real).expect("geometry matches dataset");
        }
    }
    data
}

/// Splits off the last `floor(n_c * fraction)` samples of every class as a
/// held-out set. Returns `(train, holdout)`.
pub fn stratified_holdout(data: &LabeledDataset, fraction: f64) -> (LabeledDataset, LabeledDataset) {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.num_classes()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    let mut train = Vec::new();
    let mut holdout = Vec::new();
    for idx in by_class {
        let k = (idx.len() as f64 * fraction).floor() as usize;
        let cut = idx.len() - k;
        train.extend_from_slice(&idx[..cut]);
        holdout.extend_from_slice(&idx[cut..]);
    }
    (data.subset(&train), data.subset(&holdout))
}

/// Per-client sample indices into a parent dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    assignments: Vec<Vec<usize>>,
}

impl PartitionPlan {
    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn num_clients(&self) -> usize {
        self.assignments.len()
    }

    pub fn client_sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }
}

/// Splits `n` items according to `proportions` with the largest-remainder
/// method; ties on the remainder go to the lower index.
pub fn largest_remainder(proportions: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = proportions.iter().sum();
    let quotas: Vec<f64> = proportions.iter().map(|p| p / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    if assigned <= n {
        for &k in order.iter().cycle().take(n - assigned) {
            counts[k] += 1;
        }
    } else {
        // rounding pushed the floors past n; take back from the smallest remainders
        let mut excess = assigned - n;
        for &k in order.iter().rev() {
            if excess == 0 {
                break;
            }
            if counts[k] > 0 {
                counts[k] -= 1;
                excess -= 1;
            }
        }
    }
    counts
}

fn dirichlet_proportions<R: Rng + ?Sized>(k: usize, gamma: &Gamma<f64>, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.into_iter().map(|g| g / total).collect()
    } else {
        // every gamma draw underflowed (tiny alpha): the limit is a one-hot
        let mut p = vec![0.0; k];
        p[rng.random_range(0..k)] = 1.0;
        p
    }
}

fn partition_attempt(
    by_class: &[Vec<usize>],
    num_clients: usize,
    gamma: &Gamma<f64>,
    seed: u64,
) -> PartitionPlan {
    let mut rng = rng::stream(&[rng::tag::PARTITION, seed]);
    let mut assignments = vec![Vec::new(); num_clients];
    for class_indices in by_class {
        let mut idx = class_indices.clone();
        idx.shuffle(&mut rng);
        let p = dirichlet_proportions(num_clients, gamma, &mut rng);
        let counts = largest_remainder(&p, idx.len());
        let mut start = 0;
        for (client, &n) in counts.iter().enumerate() {
            assignments[client].extend_from_slice(&idx[start..start + n]);
            start += n;
        }
    }
    PartitionPlan { assignments }
}

/// Per class, draws client proportions from `Dirichlet(alpha)` and splits that
/// class's samples accordingly. A draw that leaves some client with no data
/// is discarded and redrawn with the next seed.
pub fn dirichlet_partition(
    data: &LabeledDataset,
    num_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<PartitionPlan> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(DataError::InvalidArgument("alpha must be > 0".into()));
    }
    if num_clients == 0 {
        return Err(DataError::InvalidArgument("num_clients must be >= 1".into()));
    }
    if num_clients > data.len() {
        return Err(DataError::TooManyClients {
            clients: num_clients,
            samples: data.len(),
        });
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| DataError::InvalidArgument(e.to_string()))?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.num_classes()];
    for (i, &y) in data.labels().iter().enumerate() {
        by_class[y].push(i);
    }
    for attempt in 0..MAX_PARTITION_ATTEMPTS {
        let plan = partition_attempt(&by_class, num_clients, &gamma, seed.wrapping_add(attempt));
        if plan.assignments.iter().all(|a| !a.is_empty()) {
            return Ok(plan);
        }
    }
    Err(DataError::PartitionFailed {
        attempts: MAX_PARTITION_ATTEMPTS,
    })
}

/// Writes one sample per line as `label,flag,f1,f2,...` where `flag` is `r`
/// (real) or `g` (generated). Floats use the shortest round-trip form.
pub fn write_dataset<W: Write>(data: &LabeledDataset, mut out: W) -> Result<()> {
    let io = |e: std::io::Error| DataError::Io(e.to_string());
    for i in 0..data.len() {
        write!(out, "{},{}", data.label(i), data.provenance(i).flag()).map_err(io)?;
        for v in data.features(i) {
            write!(out, ",{v}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    Ok(())
}

/// Parses the format produced by [`write_dataset`]. The feature dimension is
/// taken from the first sample; blank lines are skipped.
pub fn read_dataset<R: BufRead>(input: R, num_classes: usize) -> Result<LabeledDataset> {
    let mut data: Option<LabeledDataset> = None;
    for (n, line) in input.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| DataError::Io(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| DataError::Parse {
            line: line_no,
            message,
        };
        let mut fields = line.split(',');
        let label: usize = fields
            .next()
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad label: {e}")))?;
        let provenance = match fields.next().map(str::trim) {
            Some("r") => Provenance::Real,
            Some("g") => Provenance::Generated,
            other => return Err(parse_err(format!("bad provenance flag {other:?}"))),
        };
        let features = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("bad feature: {e}")))?;
        if features.is_empty() {
            return Err(parse_err("sample has no features".into()));
        }
        let d = data.get_or_insert_with(|| LabeledDataset::new(features.len(), num_classes));
        d.push(&features, label, provenance)
            .map_err(|e| parse_err(e.to_string()))?;
    }
    data.ok_or_else(|| DataError::Parse {
        line: 0,
        message: "no samples".into(),
    })
}
