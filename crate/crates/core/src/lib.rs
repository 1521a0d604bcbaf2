//! Simulator and analyzer for task-scheduling overhead under strong scaling.
//!
//! The crate models how exposed scheduler cost grows with the dependency
//! topology of a phase-based task graph, measures it with a deterministic
//! discrete-event simulation, fits topology-dictated overhead models to the
//! measurements, predicts the crossover rank count `P★` where overhead equals
//! useful work, and recommends dynamic or static execution.
//!
//! ```
//! use granulyzer::{calibration, model, topology::TopologyClass};
//!
//! let samples: Vec<_> = [4u32, 8, 16, 32]
//!     .iter()
//!     .map(|&p| {
//!         let p_f = f64::from(p);
//!         calibration::ScalingSample::new(p, 1000.0 / p_f, 0.5 * p_f * p_f + 2.0).unwrap()
//!     })
//!     .collect();
//! let kernel = calibration::fit_kernel(&samples).unwrap();
//! let fit = calibration::fit_overhead(TopologyClass::Global, &samples).unwrap();
//! let crossover = calibration::predict_crossover(&fit.model, &kernel, 256).unwrap();
//! assert!(crossover.p_star > 1.0);
//! assert_eq!(model::overhead_fraction_percent(model::Granularity::new(1.0).unwrap()), 50.0);
//! ```

#![forbid(unsafe_code)]
#![warn(rust_2018_idioms, missing_debug_implementations)]

pub mod calibration;
pub mod decision;
pub mod error;
pub mod harness;
pub mod model;
pub mod simulator;
pub mod topology;
pub mod workloads;

pub use error::{Error, Result};
