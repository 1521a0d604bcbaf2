//! Static baseline, dynamic prediction and the dynamic-vs-static rule.

use serde::{Deserialize, Serialize};

use crate::calibration::{KernelModel, OverheadModel};
use crate::simulator::ScheduleMode;
use crate::workloads::{kernel_time, WorkloadSpec};

/// Recommendation at one rank count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub p: u32,
    pub choice: ScheduleMode,
    pub t_static_hat: f64,
    pub t_dyn_hat: f64,
    /// `t_static_hat - t_dyn_hat`; positive favors dynamic.
    pub margin: f64,
}

/// `(N^2 / P) c N log2 N` for one distributed-FFT stage under ideal balance.
pub fn static_time_fft(n: f64, p: u32, c: f64) -> f64 {
    n * n / f64::from(p) * c * n * n.log2()
}

/// Static kernel time inflated by a load-imbalance penalty (>= 1).
pub fn static_time(spec: &WorkloadSpec, p: u32, imbalance_penalty: f64) -> f64 {
    kernel_time(spec, p) * imbalance_penalty
}

/// `A / p + T_overhead(p)`.
pub fn dynamic_time_hat(kernel: &KernelModel, overhead: &OverheadModel, p: u32) -> f64 {
    let p = f64::from(p);
    kernel.at(p) + overhead.at(p)
}

/// Dynamic only when strictly faster; ties go to static.
pub fn decide(static_hat: f64, kernel: &KernelModel, overhead: &OverheadModel, p: u32) -> Verdict {
    let t_dyn_hat = dynamic_time_hat(kernel, overhead, p);
    let margin = static_hat - t_dyn_hat;
    Verdict {
        p,
        choice: if margin > 0.0 {
            ScheduleMode::Dynamic
        } else {
            ScheduleMode::Static
        },
        t_static_hat: static_hat,
        t_dyn_hat,
        margin,
    }
}

/// First rank count at which the recommendation switches from dynamic to
/// static, if the table contains such a switch.
pub fn flip_point(verdicts: &[Verdict]) -> Option<u32> {
    verdicts
        .windows(2)
        .find(|w| w[0].choice == ScheduleMode::Dynamic && w[1].choice == ScheduleMode::Static)
        .map(|w| w[1].p)
}
