//! Workload presets: topology class, kernel-work law and default parameters.
//!
//! The scheduler constants (`k`, `rho`, `tau_s`, `tau_e`, `imbalance`) and
//! the per-unit costs `c` are synthetic. They are chosen so the presets
//! reproduce the qualitative strong-scaling behavior of each dependency
//! class over 4 to 256 ranks, and every one of them can be overridden.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PhaseParams;
use crate::topology::{Boundary, TopologyClass};

pub const PRESET_NAMES: [&str; 8] = [
    "fft", "stencil", "sweep", "gemm", "spmv", "conv2d", "pagerank", "nbody",
];

/// Work units as a function of the problem dimension `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum KernelLaw {
    /// `N^2` lines of length-`N` transforms: `N^3 log2 N`.
    FftVolume,
    /// `N^2` grid points.
    GridPoints,
    /// `N^3` multiply-adds.
    Cubic,
    /// `N^2` particle pairs.
    PairInteractions,
    /// `N * avg_degree` graph edges for `N` vertices.
    GraphEdges { avg_degree: f64 },
    /// `N` units.
    Linear,
}

impl KernelLaw {
    pub fn work_units(self, n: f64) -> f64 {
        match self {
            KernelLaw::FftVolume => n * n * n * n.log2(),
            KernelLaw::GridPoints | KernelLaw::PairInteractions => n * n,
            KernelLaw::Cubic => n * n * n,
            KernelLaw::GraphEdges { avg_degree } => n * avg_degree,
            KernelLaw::Linear => n,
        }
    }
}

/// A workload: dependency class, kernel cost and scheduler parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    pub topology: TopologyClass,
    #[serde(default)]
    pub boundary: Boundary,
    pub law: KernelLaw,
    /// Problem dimension.
    pub n: f64,
    /// Cost per work unit, ms.
    pub c: f64,
    /// Subtasks per rank-slot.
    pub k: u32,
    pub rho: f64,
    pub tau_s: f64,
    pub tau_e: f64,
    /// Coefficient of variation of subtask durations.
    pub imbalance: f64,
    /// Problem dimensions swept in evaluations; `n` is normally the first.
    pub sizes: Vec<f64>,
}

/// Optional replacements for preset fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadOverrides {
    pub topology: Option<TopologyClass>,
    pub boundary: Option<Boundary>,
    pub n: Option<f64>,
    pub c: Option<f64>,
    pub k: Option<u32>,
    pub rho: Option<f64>,
    pub tau_s: Option<f64>,
    pub tau_e: Option<f64>,
    pub imbalance: Option<f64>,
}

const DEFAULT_K: u32 = 4;
const DEFAULT_RHO: f64 = 0.5;
const DEFAULT_TAU_S: f64 = 0.05;
const DEFAULT_TAU_E: f64 = 0.002;
const DEFAULT_IMBALANCE: f64 = 0.2;

const GRID_SIZES: [f64; 3] = [7525.0, 11560.0, 21285.0];

pub fn preset(name: &str) -> Result<WorkloadSpec> {
    let key = name.trim().to_ascii_lowercase();
    let (topology, law, c, sizes): (TopologyClass, KernelLaw, f64, Vec<f64>) = match key.as_str() {
        "fft" => (
            TopologyClass::Global,
            KernelLaw::FftVolume,
            8.0e-6,
            vec![384.0, 512.0, 768.0],
        ),
        "stencil" => (
            TopologyClass::LocalStencil,
            KernelLaw::GridPoints,
            8.8e-6,
            GRID_SIZES.to_vec(),
        ),
        "sweep" => (
            TopologyClass::LocalSweep,
            KernelLaw::GridPoints,
            8.8e-6,
            GRID_SIZES.to_vec(),
        ),
        "gemm" => (
            TopologyClass::Independent,
            KernelLaw::Cubic,
            5.0e-9,
            GRID_SIZES.to_vec(),
        ),
        "spmv" => (
            TopologyClass::LocalStencil,
            KernelLaw::GridPoints,
            1.5e-7,
            vec![21285.0],
        ),
        "conv2d" => (
            TopologyClass::LocalStencil,
            KernelLaw::GridPoints,
            8.0e-7,
            vec![21285.0],
        ),
        "pagerank" => (
            TopologyClass::Global,
            KernelLaw::GraphEdges { avg_degree: 15.0 },
            2.5e-5,
            vec![30.2e6],
        ),
        "nbody" => (
            TopologyClass::Global,
            KernelLaw::PairInteractions,
            2.0e-5,
            vec![21285.0],
        ),
        _ => {
            return Err(Error::UnknownWorkload {
                name: name.to_string(),
                valid: PRESET_NAMES.join(", "),
            })
        }
    };
    Ok(WorkloadSpec {
        name: key,
        topology,
        boundary: Boundary::Clamp,
        law,
        n: sizes[0],
        c,
        k: DEFAULT_K,
        rho: DEFAULT_RHO,
        tau_s: DEFAULT_TAU_S,
        tau_e: DEFAULT_TAU_E,
        imbalance: DEFAULT_IMBALANCE,
        sizes,
    })
}

/// Kernel time per rank at `P` ranks, ideal strong scaling.
pub fn kernel_time(spec: &WorkloadSpec, ranks: u32) -> f64 {
    spec.kernel_work(ranks)
}

impl WorkloadSpec {
    /// `T_kernel(P) = c * work(N) / P`.
    pub fn kernel_work(&self, ranks: u32) -> f64 {
        self.a() / f64::from(ranks)
    }

    /// Single-rank kernel time, the `A` of `A / P`.
    pub fn a(&self) -> f64 {
        self.c * self.law.work_units(self.n)
    }

    pub fn with_size(&self, n: f64) -> WorkloadSpec {
        WorkloadSpec { n, ..self.clone() }
    }

    pub fn apply(&mut self, o: &WorkloadOverrides) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f { self.$f = v; } )* };
        }
        set!(topology, boundary, n, c, k, rho, tau_s, tau_e, imbalance);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("workload `{}`: {msg}", self.name)));
        if !(self.n.is_finite() && self.n > 0.0) {
            return bad(format!("problem dimension n = {} must be positive", self.n));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad(format!("cost c = {} must be positive", self.c));
        }
        if !(self.imbalance.is_finite() && self.imbalance >= 0.0) {
            return bad(format!("imbalance = {} must be >= 0", self.imbalance));
        }
        let a = self.a();
        if !(a.is_finite() && a > 0.0) {
            return bad(format!("kernel work A = {a} is degenerate"));
        }
        self.phase_params(1)
            .validate()
            .or_else(|e| bad(e.to_string()))
    }

    /// Model parameters for one phase at `P` ranks, no communication term.
    pub fn phase_params(&self, ranks: u32) -> PhaseParams {
        PhaseParams {
            t_comp: self.kernel_work(ranks.max(1)),
            t_comm: 0.0,
            rho: self.rho,
            k: self.k,
            tau_s: self.tau_s,
            tau_e: self.tau_e,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn preset_topologies() {
        let topo = |n| preset(n).unwrap().topology;
        assert_eq!(topo("fft"), TopologyClass::Global);
        assert_eq!(topo("pagerank"), TopologyClass::Global);
        assert_eq!(topo("nbody"), TopologyClass::Global);
        assert_eq!(topo("stencil"), TopologyClass::LocalStencil);
        assert_eq!(topo("spmv"), TopologyClass::LocalStencil);
        assert_eq!(topo("conv2d"), TopologyClass::LocalStencil);
        assert_eq!(topo("sweep"), TopologyClass::LocalSweep);
        assert_eq!(topo("gemm"), TopologyClass::Independent);
    }

    #[test]
    fn unknown_preset_lists_names() {
        let err = preset("lu").unwrap_err();
        let msg = err.to_string();
        for name in PRESET_NAMES {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn kernel_time_examples() {
        let mut gemm = preset("gemm").unwrap();
        gemm.n = 2.0;
        gemm.c = 1.0;
        assert_eq!(kernel_time(&gemm, 1), 8.0);

        gemm.n = 4.0;
        gemm.c = 0.5;
        assert_eq!(kernel_time(&gemm, 4), 8.0);

        let mut fft = preset("fft").unwrap();
        fft.n = 8.0;
        fft.c = 1.0;
        assert_eq!(kernel_time(&fft, 2), 768.0);
        assert_eq!(kernel_time(&fft, 1), fft.a());
    }

    #[test]
    fn ideal_strong_scaling() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            let a = spec.a();
            for p in (2..=8).map(|e| 1u32 << e) {
                let t = kernel_time(&spec, p);
                assert!(t > 0.0);
                assert_relative_eq!(t * f64::from(p), a, max_relative = 1e-9);
                assert_relative_eq!(kernel_time(&spec, 2 * p), t / 2.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn larger_problems_cost_more() {
        for name in PRESET_NAMES {
            let spec = preset(name).unwrap();
            assert!(spec.with_size(spec.n * 1.5).a() > spec.a(), "{name}");
            assert!(spec
                .sizes
                .windows(2)
                .all(|w| spec.with_size(w[1]).a() > spec.with_size(w[0]).a()));
        }
    }

    #[test]
    fn nbody_and_pagerank_do_comparable_work() {
        let nbody = preset("nbody").unwrap();
        let pagerank = preset("pagerank").unwrap();
        let pairs = nbody.law.work_units(21285.0);
        let edges = pagerank.law.work_units(pagerank.n);
        assert!((pairs - edges).abs() / edges < 0.01, "{pairs} vs {edges}");
        assert!((edges - 453e6).abs() / 453e6 < 0.01);
    }

    #[test]
    fn overrides_apply() {
        let mut spec = preset("stencil").unwrap();
        spec.apply(&WorkloadOverrides {
            k: Some(9),
            rho: Some(0.25),
            ..Default::default()
        });
        assert_eq!(spec.k, 9);
        assert_eq!(spec.rho, 0.25);
        assert_eq!(spec.tau_s, DEFAULT_TAU_S);
        spec.rho = 2.0;
        assert!(spec.validate().is_err());
    }
}
