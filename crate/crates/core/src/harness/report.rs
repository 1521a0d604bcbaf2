//! The sweep → fit → predict → decide pipeline and its JSON report.

use serde::{Deserialize, Serialize};

use super::config::Resolved;
use super::{
    cmd_decide, cmd_fit, cmd_predict, cmd_sweep, ModelsDoc, StaticSource, SweepOutput, TableRow,
};
use crate::calibration::{CrossoverPrediction, CurvePoint, FitOptions, ScalingSample};
use crate::decision::Verdict;
use crate::error::{Error, Result};
use crate::model::Regime;
use crate::simulator::{median, ScheduleMode};
use crate::topology::TopologyClass;

/// Empirical detrimental-transition interval of a measured sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    /// Measured point just before the first detrimental one.
    pub last_non_detrimental: Option<u32>,
    pub first_detrimental: Option<u32>,
    /// Whether the predicted crossover lies inside the interval widened by
    /// one sweep point on each side. `None` when neither the prediction nor
    /// the sweep shows a crossover in range.
    pub consistent: Option<bool>,
}

impl Bracket {
    pub fn from_table(table: &[TableRow], prediction: &CrossoverPrediction) -> Bracket {
        let first_d = table.iter().position(|r| r.regime == Regime::Detrimental);
        let last_nd = match first_d {
            Some(0) => None,
            Some(i) => Some(i - 1),
            None if table.is_empty() => None,
            None => Some(table.len() - 1),
        };
        let consistent = if !prediction.exists_in_range && first_d.is_none() {
            None
        } else {
            let lo = match last_nd {
                Some(i) => table[i.saturating_sub(1)].p as f64,
                None => 0.0,
            };
            let hi = match first_d {
                Some(i) => table[(i + 1).min(table.len() - 1)].p as f64,
                None => f64::INFINITY,
            };
            let p = if prediction.exists_in_range {
                prediction.p_star
            } else {
                f64::INFINITY
            };
            Some(lo <= p && p <= hi)
        };
        Bracket {
            last_non_detrimental: last_nd.map(|i| table[i].p),
            first_detrimental: first_d.map(|i| table[i].p),
            consistent,
        }
    }
}

/// Median over rank counts of the static-to-dynamic kernel ratio, floored
/// at 1. Samples are matched by rank count.
pub fn estimate_penalty(dynamic: &[ScalingSample], stat: &[ScalingSample]) -> Result<f64> {
    let ratios: Vec<f64> = dynamic
        .iter()
        .filter_map(|d| {
            stat.iter()
                .find(|s| s.ranks == d.ranks)
                .map(|s| s.t_kernel / d.t_kernel)
        })
        .collect();
    if ratios.is_empty() {
        return Err(Error::Argument(
            "no rank count shared by the dynamic and static samples".into(),
        ));
    }
    Ok(median(&ratios).max(1.0))
}

/// First rank count where simulated dynamic time (kernel plus overhead)
/// stops beating the static kernel, after being ahead at the previous point.
pub fn simulated_flip(dynamic: &[ScalingSample], stat: &[ScalingSample]) -> Option<u32> {
    let wins: Vec<(u32, bool)> = dynamic
        .iter()
        .zip(stat)
        .map(|(d, s)| {
            (
                d.ranks,
                d.t_kernel + d.t_overhead < s.t_kernel + s.t_overhead,
            )
        })
        .collect();
    wins.windows(2).find(|w| w[0].1 && !w[1].1).map(|w| w[1].0)
}

/// Whether two flip points are equal or one sweep point apart.
pub fn flips_agree(ranks: &[u32], a: Option<u32>, b: Option<u32>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => {
            let ia = ranks.iter().position(|&p| p == a);
            let ib = ranks.iter().position(|&p| p == b);
            matches!((ia, ib), (Some(x), Some(y)) if x.abs_diff(y) <= 1)
        }
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub workload: String,
    pub topology: TopologyClass,
    pub seed: u64,
    pub phases: u32,
    pub ranks: Vec<u32>,
    pub aggregation: String,
    pub table: Vec<TableRow>,
    pub models: ModelsDoc,
    pub prediction: CrossoverPrediction,
    pub curve: Vec<CurvePoint>,
    pub bracket: Bracket,
    pub penalty: f64,
    pub penalty_estimated: bool,
    pub verdicts: Vec<Verdict>,
    pub decide_flip: Option<u32>,
    pub static_kernel: Vec<f64>,
    pub simulated_flip: Option<u32>,
    pub flips_agree: bool,
    pub samples_csv: String,
    pub static_samples_csv: String,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialize") + "\n"
    }
}

#[derive(Debug)]
pub struct ReportOutput {
    pub report: Report,
    pub dynamic: SweepOutput,
    pub stat: SweepOutput,
}

pub fn cmd_report(cfg: &Resolved) -> Result<ReportOutput> {
    let dynamic = cmd_sweep(cfg, ScheduleMode::Dynamic)?;
    let stat = cmd_sweep(cfg, ScheduleMode::Static)?;
    let dyn_samples = dynamic.scaling_samples();
    let static_samples = stat.scaling_samples();

    let models = cmd_fit(
        &dynamic.samples,
        Some(cfg.workload.topology),
        FitOptions::default(),
    )?;
    let predicted = cmd_predict(&models, cfg.range_hi, &cfg.ranks, &cfg.thresholds)?;
    let bracket = Bracket::from_table(&dynamic.table, &predicted.prediction);

    let (penalty, penalty_estimated) = match cfg.penalty {
        Some(p) => (p, false),
        None => (estimate_penalty(&dyn_samples, &static_samples)?, true),
    };
    let decided = cmd_decide(&models, &StaticSource::Penalty(penalty), &cfg.ranks)?;
    let sim_flip = simulated_flip(&dyn_samples, &static_samples);

    let report = Report {
        workload: cfg.workload.name.clone(),
        topology: cfg.workload.topology,
        seed: cfg.seed,
        phases: cfg.phases,
        ranks: cfg.ranks.clone(),
        aggregation: super::AGGREGATION.to_string(),
        table: dynamic.table.clone(),
        models,
        prediction: predicted.prediction,
        curve: predicted.curve,
        bracket,
        penalty,
        penalty_estimated,
        flips_agree: flips_agree(&cfg.ranks, decided.flip_point, sim_flip),
        verdicts: decided.verdicts,
        decide_flip: decided.flip_point,
        static_kernel: static_samples.iter().map(|s| s.t_kernel).collect(),
        simulated_flip: sim_flip,
        samples_csv: dynamic.samples_csv()?,
        static_samples_csv: stat.samples_csv()?,
    };
    Ok(ReportOutput {
        report,
        dynamic,
        stat,
    })
}
