//! Server-side stand-in for a generative model.
//!
//! The server picks which labels to synthesize from the label histograms the
//! clients shared, draws samples for them from a deliberately imperfect copy
//! of the true class geometry, and accumulates them in a per-class capped
//! pool.

use rand::Rng;
use thiserror::Error;

use crate::data::{ClassGeometry, LabelHistogram, LabeledDataset, Provenance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(&'static str),
    #[error("sample {0} in a generated batch is not marked as generated")]
    RealSample(usize),
    #[error("generated batch does not match the pool's shape")]
    ShapeMismatch,
}

pub type Result<T> = std::result::Result<T, GenError>;

/// Rate/cap schedule plus the three quality knobs of the stand-in generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    /// Samples requested per round.
    pub rate_per_round: usize,
    /// Maximum number of stored samples per class.
    pub cap_per_class: usize,
    /// Probability that a generated sample carries a wrong label.
    pub label_noise: f64,
    /// Norm of the displacement of each generated class center.
    pub center_shift: f64,
    /// Multiplier on the true cluster spread.
    pub spread_factor: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            rate_per_round: 10,
            cap_per_class: 300,
            label_noise: 0.0,
            center_shift: 0.0,
            spread_factor: 1.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rate_per_round == 0 {
            return Err(GenError::InvalidConfig("rate_per_round must be >= 1"));
        }
        if self.cap_per_class == 0 {
            return Err(GenError::InvalidConfig("cap_per_class must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(GenError::InvalidConfig("label_noise must be in [0, 1]"));
        }
        if !(self.center_shift.is_finite() && self.center_shift >= 0.0) {
            return Err(GenError::InvalidConfig("center_shift must be >= 0"));
        }
        if !(self.spread_factor.is_finite() && self.spread_factor > 0.0) {
            return Err(GenError::InvalidConfig("spread_factor must be > 0"));
        }
        Ok(())
    }
}

/// Accumulated generated samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GenPool {
    dataset: LabeledDataset,
    per_class_counts: LabelHistogram,
}

impl GenPool {
    pub fn new(dim: usize, num_classes: usize) -> Self {
        Self {
            dataset: LabeledDataset::new(dim, num_classes),
            per_class_counts: LabelHistogram::zeros(num_classes),
        }
    }

    pub fn dataset(&self) -> &LabeledDataset {
        &self.dataset
    }

    pub fn per_class_counts(&self) -> &LabelHistogram {
        &self.per_class_counts
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }
}

/// Chooses up to `rate` labels, one at a time, always taking the class with
/// the smallest combined count (clients + pool + already chosen this round);
/// ties go to the lower class index. Classes at `cap` are never chosen, so
/// the result is shorter than `rate` only when everything is capped.
///
/// The returned labels are sorted ascending.
pub fn select_labels(
    client_histograms: &[LabelHistogram],
    pool: &GenPool,
    rate: usize,
    cap: usize,
) -> Vec<usize> {
    let classes = pool.per_class_counts.num_classes();
    let pool_counts = pool.per_class_counts.counts();
    let mut coverage: Vec<u64> = pool_counts.to_vec();
    for h in client_histograms {
        for (c, &n) in h.counts().iter().enumerate().take(classes) {
            coverage[c] += n;
        }
    }
    let mut stored: Vec<u64> = pool_counts.to_vec();
    let mut picked = Vec::with_capacity(rate);
    for _ in 0..rate {
        let choice = (0..classes)
            .filter(|&c| stored[c] < cap as u64)
            .min_by_key(|&c| (coverage[c], c));
        let Some(c) = choice else { break };
        coverage[c] += 1;
        stored[c] += 1;
        picked.push(c);
    }
    picked.sort_unstable();
    picked
}

/// Displacement applied to the generated center of `class`: length
/// `center_shift`, pointing at the next class's center, so the generator
/// blurs each class into its neighbour.
pub fn center_offset(geometry: &ClassGeometry, class: usize, center_shift: f64) -> Vec<f64> {
    let dim = geometry.dim();
    let classes = geometry.num_classes();
    let mut dir = vec![0.0; dim];
    if classes > 1 {
        let next = (class + 1) % classes;
        for (k, d) in dir.iter_mut().enumerate() {
            *d = geometry.center(next)[k] - geometry.center(class)[k];
        }
    } else {
        dir[0] = 1.0;
    }
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    dir.iter().map(|v| v / norm * center_shift).collect()
}

/// Draws one sample per requested label from the shifted, rescaled class
/// Gaussian. With probability `label_noise` the emitted label is replaced by
/// a uniformly chosen different class.
pub fn generate<R: Rng + ?Sized>(
    labels: &[usize],
    config: &GeneratorConfig,
    geometry: &ClassGeometry,
    rng: &mut R,
) -> LabeledDataset {
    let classes = geometry.num_classes();
    let offsets: Vec<Vec<f64>> = (0..classes)
        .map(|c| center_offset(geometry, c, config.center_shift))
        .collect();
    let mut out = LabeledDataset::new(geometry.dim(), classes);
    let mut x = Vec::with_capacity(geometry.dim());
    for &c in labels {
        geometry.sample_into(c, Some(&offsets[c]), config.spread_factor, rng, &mut x);
        let mut label = c;
        let u: f64 = rng.random();
        if classes > 1 && u < config.label_noise {
            let other = rng.random_range(0..classes - 1);
            label = if other >= c { other + 1 } else { other };
        }
        out.push(&x, label, Provenance::Generated)
            .expect("geometry matches dataset");
    }
    out
}

/// Appends `fresh` to the pool in order, dropping samples whose class is
/// already at `cap`.
pub fn accrue(mut pool: GenPool, fresh: &LabeledDataset, cap: usize) -> Result<GenPool> {
    if fresh.dim() != pool.dataset.dim() || fresh.num_classes() != pool.dataset.num_classes() {
        return Err(GenError::ShapeMismatch);
    }
    if let Some(i) = fresh
        .provenances()
        .iter()
        .position(|&p| p != Provenance::Generated)
    {
        return Err(GenError::RealSample(i));
    }
    for i in 0..fresh.len() {
        let c = fresh.label(i);
        if pool.per_class_counts.counts()[c] < cap as u64 {
            pool.dataset
                .push(fresh.features(i), c, Provenance::Generated)
                .expect("shape checked above");
            pool.per_class_counts.increment(c);
        }
    }
    Ok(pool)
}
