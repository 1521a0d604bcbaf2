//! Phase-time model, granularity number, overhead fractions and regimes.
//!
//! All durations are milliseconds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::TopologyClass;

/// Inputs of the per-phase runtime model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseParams {
    pub t_comp: f64,
    pub t_comm: f64,
    /// Fraction of scheduler time hidden behind execution.
    pub rho: f64,
    /// Scheduled tasks per worker.
    pub k: u32,
    /// Per-task scheduling cost.
    pub tau_s: f64,
    /// Per-dependency-edge resolution cost.
    pub tau_e: f64,
}

impl PhaseParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Domain(format!("rho = {} outside [0, 1]", self.rho)));
        }
        for (name, v) in [
            ("t_comp", self.t_comp),
            ("t_comm", self.t_comm),
            ("tau_s", self.tau_s),
            ("tau_e", self.tau_e),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::Domain("k must be positive".into()));
        }
        Ok(())
    }
}

/// Measured (or modeled) kernel and overhead time of one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTiming {
    pub t_kernel: f64,
    pub t_overhead: f64,
}

impl PhaseTiming {
    pub fn new(t_kernel: f64, t_overhead: f64) -> Result<Self> {
        if !(t_kernel >= 0.0 && t_overhead >= 0.0) {
            return Err(Error::Domain(format!(
                "timings must be non-negative (kernel {t_kernel}, overhead {t_overhead})"
            )));
        }
        Ok(PhaseTiming {
            t_kernel,
            t_overhead,
        })
    }

    pub fn phase_time(&self) -> f64 {
        self.t_kernel + self.t_overhead
    }
}

/// Ratio of kernel time to exposed overhead. `f64::INFINITY` encodes the
/// unbounded case of zero overhead.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Granularity(f64);

impl Granularity {
    pub fn new(g: f64) -> Result<Self> {
        if g.is_nan() || g < 0.0 {
            return Err(Error::Domain(format!("granularity {g} must be >= 0")));
        }
        Ok(Granularity(g))
    }

    pub const UNBOUNDED: Granularity = Granularity(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_unbounded(self) -> bool {
        self.0.is_infinite()
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unbounded() {
            f.write_str("unbounded")
        } else {
            write!(f, "{:.4}", self.0)
        }
    }
}

/// Operating range of dynamic scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Beneficial,
    Marginal,
    Detrimental,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Beneficial => "beneficial",
            Regime::Marginal => "marginal",
            Regime::Detrimental => "detrimental",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Regime boundaries. Beneficial above `beneficial`, detrimental at or
/// below `detrimental`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub beneficial: f64,
    pub detrimental: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            beneficial: 10.0,
            detrimental: 1.0,
        }
    }
}

/// `max(t_comp, t_comm) + (1 - rho) k tau_s`
pub fn phase_time(p: &PhaseParams) -> f64 {
    p.t_comp.max(p.t_comm) + exposed_overhead(p.rho, p.k, p.tau_s)
}

/// Scheduler cost left on the critical path: `(1 - rho) k tau_s`.
pub fn exposed_overhead(rho: f64, k: u32, tau_s: f64) -> f64 {
    (1.0 - rho) * f64::from(k) * tau_s
}

/// Exposed cost including serialized edge resolution:
/// `(1 - rho) (k tau_s + tau_e |E|)`. Reduces to [`exposed_overhead`] when
/// there are no edges.
pub fn exposed_overhead_with_edges(rho: f64, k: u32, tau_s: f64, tau_e: f64, edges: u64) -> f64 {
    (1.0 - rho) * (f64::from(k) * tau_s + tau_e * edges as f64)
}

/// `T_kernel / T_overhead`; zero overhead is unbounded.
pub fn granularity(t: PhaseTiming) -> Granularity {
    if t.t_overhead == 0.0 {
        Granularity::UNBOUNDED
    } else {
        Granularity(t.t_kernel / t.t_overhead)
    }
}

/// Overhead relative to kernel time, `1 / G`.
pub fn overhead_ratio(g: Granularity) -> f64 {
    1.0 / g.0
}

/// Overhead share of total phase time in percent, `100 / (G + 1)`.
pub fn overhead_fraction_percent(g: Granularity) -> f64 {
    100.0 / (g.0 + 1.0)
}

pub fn classify_regime(g: Granularity) -> Regime {
    classify_regime_with(g, &Thresholds::default())
}

pub fn classify_regime_with(g: Granularity, thresholds: &Thresholds) -> Regime {
    if g.0 > thresholds.beneficial {
        Regime::Beneficial
    } else if g.0 > thresholds.detrimental {
        Regime::Marginal
    } else {
        Regime::Detrimental
    }
}

/// Exponent of the asymptotic `G(P)` power law under strong scaling.
pub fn decay_exponent(topology: TopologyClass) -> i32 {
    match topology {
        TopologyClass::Global => -3,
        TopologyClass::LocalStencil | TopologyClass::LocalSweep => -2,
        TopologyClass::Independent => -1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(t_comp: f64, t_comm: f64, rho: f64, k: u32, tau_s: f64) -> PhaseParams {
        PhaseParams {
            t_comp,
            t_comm,
            rho,
            k,
            tau_s,
            tau_e: 0.0,
        }
    }

    fn g(v: f64) -> Granularity {
        Granularity::new(v).unwrap()
    }

    #[test]
    fn phase_time_examples() {
        assert_relative_eq!(phase_time(&params(10.0, 4.0, 0.5, 8, 0.25)), 11.0);
        assert_relative_eq!(phase_time(&params(10.0, 4.0, 1.0, 8, 0.25)), 10.0);
        assert_relative_eq!(phase_time(&params(0.0, 0.0, 0.0, 1, 1.0)), 1.0);
    }

    #[test]
    fn exposed_overhead_examples() {
        assert_relative_eq!(exposed_overhead(0.0, 100, 0.01), 1.0);
        assert_eq!(exposed_overhead(1.0, 1_000_000, 5.0), 0.0);
        assert_relative_eq!(exposed_overhead(0.75, 40, 0.1), 1.0, max_relative = 1e-12);
        assert_eq!(
            exposed_overhead_with_edges(0.3, 7, 0.2, 9.0, 0),
            exposed_overhead(0.3, 7, 0.2)
        );
    }

    #[test]
    fn params_validation() {
        assert!(params(1.0, 1.0, 1.5, 1, 1.0).validate().is_err());
        assert!(params(1.0, 1.0, 0.5, 0, 1.0).validate().is_err());
        assert!(params(-1.0, 1.0, 0.5, 1, 1.0).validate().is_err());
        assert!(params(1.0, 1.0, 0.5, 1, 1.0).validate().is_ok());
    }

    #[test]
    fn granularity_examples() {
        assert_eq!(
            granularity(PhaseTiming::new(100.0, 10.0).unwrap()).value(),
            10.0
        );
        assert_eq!(
            granularity(PhaseTiming::new(5.0, 5.0).unwrap()).value(),
            1.0
        );
        assert_eq!(
            granularity(PhaseTiming::new(90.0, 10.0).unwrap()).value(),
            9.0
        );
        let unbounded = granularity(PhaseTiming::new(3.0, 0.0).unwrap());
        assert!(unbounded.is_unbounded());
        assert_eq!(classify_regime(unbounded), Regime::Beneficial);
        let zero = granularity(PhaseTiming::new(0.0, 2.0).unwrap());
        assert_eq!(zero.value(), 0.0);
        assert_eq!(classify_regime(zero), Regime::Detrimental);
        assert!(PhaseTiming::new(-1.0, 0.0).is_err());
        assert!(Granularity::new(f64::NAN).is_err());
    }

    #[test]
    fn ratio_and_fraction_examples() {
        assert_eq!(overhead_ratio(g(1.0)), 1.0);
        assert_relative_eq!(overhead_ratio(g(10.0)), 0.1);
        assert_eq!(overhead_ratio(g(0.5)), 2.0);
        assert_eq!(overhead_ratio(Granularity::UNBOUNDED), 0.0);

        assert_eq!(overhead_fraction_percent(g(1.0)), 50.0);
        assert_relative_eq!(overhead_fraction_percent(g(10.0)), 100.0 / 11.0);
        assert!((overhead_fraction_percent(g(10.0)) - 9.09).abs() < 0.01);
        assert_eq!(overhead_fraction_percent(g(0.0)), 100.0);
        assert_eq!(overhead_fraction_percent(Granularity::UNBOUNDED), 0.0);
    }

    #[test]
    fn regime_boundaries() {
        assert_eq!(classify_regime(g(10.0001)), Regime::Beneficial);
        assert_eq!(classify_regime(g(10.0)), Regime::Marginal);
        assert_eq!(classify_regime(g(1.0000001)), Regime::Marginal);
        assert_eq!(classify_regime(g(1.0)), Regime::Detrimental);
        let custom = Thresholds {
            beneficial: 4.0,
            detrimental: 2.0,
        };
        assert_eq!(classify_regime_with(g(3.0), &custom), Regime::Marginal);
        assert_eq!(classify_regime_with(g(2.0), &custom), Regime::Detrimental);
    }

    #[test]
    fn decay_exponents() {
        assert_eq!(decay_exponent(TopologyClass::Global), -3);
        assert_eq!(decay_exponent(TopologyClass::LocalStencil), -2);
        assert_eq!(decay_exponent(TopologyClass::LocalSweep), -2);
        assert_eq!(decay_exponent(TopologyClass::Independent), -1);
    }

    proptest! {
        #[test]
        fn fraction_identity(kernel in 1e-6f64..1e6, overhead in 1e-6f64..1e6) {
            let t = PhaseTiming::new(kernel, overhead).unwrap();
            let direct = 100.0 * overhead / (kernel + overhead);
            let via_g = overhead_fraction_percent(granularity(t));
            prop_assert!((via_g - direct).abs() <= 1e-12 * direct);
        }

        #[test]
        fn fraction_strictly_decreasing(a in 0.0f64..1e4, d in 1e-6f64..1e3) {
            prop_assert!(overhead_fraction_percent(g(a + d)) < overhead_fraction_percent(g(a)));
        }

        #[test]
        fn regime_consistent_with_fraction(v in 0.0f64..1e4) {
            let omega = overhead_fraction_percent(g(v));
            match classify_regime(g(v)) {
                Regime::Beneficial => prop_assert!(omega < 100.0 / 11.0),
                Regime::Detrimental => prop_assert!(omega >= 50.0),
                Regime::Marginal => prop_assert!((100.0 / 11.0..50.0).contains(&omega)),
            }
        }

        #[test]
        fn ratio_times_g_is_one(v in 1e-9f64..1e9) {
            prop_assert!((overhead_ratio(g(v)) * v - 1.0).abs() < 1e-12);
        }

        #[test]
        fn reduced_model_matches(kernel in 0.0f64..1e3, comm_frac in 0.0f64..1.0,
                                 rho in 0.0f64..1.0, k in 1u32..64, tau_s in 0.0f64..1.0) {
            let p = PhaseParams { t_comp: kernel, t_comm: kernel * comm_frac, rho, k, tau_s, tau_e: 0.0 };
            let reduced = kernel + exposed_overhead(rho, k, tau_s);
            prop_assert!((phase_time(&p) - reduced).abs() <= 1e-12 * reduced.max(1.0));
        }
    }
}
