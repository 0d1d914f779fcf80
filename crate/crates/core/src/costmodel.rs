//! Simulated wall-clock time and energy of one round.
//!
//! Clients download the global model, train and upload; the server
//! generates samples and trains the augmented model at the same time. The
//! round ends when the slower of the two paths finishes. Every actor burns
//! its rated power for exactly as long as it is busy.

use thiserror::Error;

use crate::nn::TrainSpec;
use crate::protocol::Mode;

/// Floating point operations charged per parameter for one forward+backward
/// pass over one sample.
pub const FLOPS_PER_PARAM_PER_SAMPLE: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cost config field `{0}` must be finite and > 0")]
pub struct CostConfigError(pub &'static str);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConfig {
    pub client_flops_per_sec: f64,
    pub server_flops_per_sec: f64,
    pub uplink_bps: f64,
    pub downlink_bps: f64,
    pub client_power_watts: f64,
    pub server_power_watts: f64,
    /// Server compute units spent per generated sample.
    pub gen_cost_per_sample: f64,
    pub bytes_per_param: u64,
}

impl Default for CostConfig {
    /// Arbitrary desk-scale defaults: an edge device, a datacenter server and
    /// a constrained wireless uplink.
    fn default() -> Self {
        Self {
            client_flops_per_sec: 1e9,
            server_flops_per_sec: 1e11,
            uplink_bps: 1e6,
            downlink_bps: 1e7,
            client_power_watts: 5.0,
            server_power_watts: 300.0,
            gen_cost_per_sample: 1e9,
            bytes_per_param: 4,
        }
    }
}

impl CostConfig {
    pub fn validate(&self) -> Result<(), CostConfigError> {
        let fields = [
            ("client_flops_per_sec", self.client_flops_per_sec),
            ("server_flops_per_sec", self.server_flops_per_sec),
            ("uplink_bps", self.uplink_bps),
            ("downlink_bps", self.downlink_bps),
            ("client_power_watts", self.client_power_watts),
            ("server_power_watts", self.server_power_watts),
            ("gen_cost_per_sample", self.gen_cost_per_sample),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(CostConfigError(name));
            }
        }
        if self.bytes_per_param == 0 {
            return Err(CostConfigError("bytes_per_param"));
        }
        Ok(())
    }
}

/// Work done in one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundWorkload<'a> {
    /// Local dataset size of every client that trained.
    pub client_sizes: &'a [usize],
    pub param_count: usize,
    /// Samples the server generated this round.
    pub generated_samples: usize,
    /// Size of the pool the augmented model was trained on (0 if skipped).
    pub augmented_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundCost {
    pub time_sec: f64,
    pub energy_joules: f64,
    /// Slowest client's download + compute + upload.
    pub client_path_sec: f64,
    /// Generation followed by augmented training.
    pub server_path_sec: f64,
}

fn train_flops(param_count: usize, samples: usize, epochs: usize) -> f64 {
    FLOPS_PER_PARAM_PER_SAMPLE * param_count as f64 * samples as f64 * epochs as f64
}

pub fn round_cost(work: &RoundWorkload<'_>, spec: &TrainSpec, cost: &CostConfig) -> RoundCost {
    let model_bits = work.param_count as f64 * cost.bytes_per_param as f64 * 8.0;
    let download = model_bits / cost.downlink_bps;
    let upload = model_bits / cost.uplink_bps;

    let mut client_path = 0.0f64;
    let mut client_busy = 0.0;
    for &n in work.client_sizes {
        let compute = train_flops(work.param_count, n, spec.epochs) / cost.client_flops_per_sec;
        let t = download + compute + upload;
        client_path = client_path.max(t);
        client_busy += t;
    }

    let generation = work.generated_samples as f64 * cost.gen_cost_per_sample / cost.server_flops_per_sec;
    let augmented =
        train_flops(work.param_count, work.augmented_samples, spec.epochs) / cost.server_flops_per_sec;
    let server_path = generation + augmented;

    RoundCost {
        time_sec: client_path.max(server_path),
        energy_joules: cost.client_power_watts * client_busy + cost.server_power_watts * server_path,
        client_path_sec: client_path,
        server_path_sec: server_path,
    }
}

/// Per-round record of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub mode: Mode,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub mean_client_emd: f64,
    pub round_time_sec: f64,
    pub round_energy_joules: f64,
    pub pool_size: usize,
}
