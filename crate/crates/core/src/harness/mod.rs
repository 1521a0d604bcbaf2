//! Command implementations behind the `granulyzer` binary.
//!
//! Each `cmd_*` function is a pure library call returning structured output;
//! the binary only parses flags, reads inputs and writes results.

pub mod config;
pub mod csv_io;
pub mod report;
pub mod svg;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::calibration::{
    self, fit_kernel, fit_overhead_with, CrossoverPrediction, CurvePoint, FitOptions, KernelModel,
    OverheadModel, ScalingSample,
};
use crate::decision::{self, Verdict};
use crate::error::{Error, Result};
use crate::model::{self, Granularity, Regime, Thresholds};
use crate::simulator::{self, ExecutionTrace, ScheduleMode};
use crate::topology::{OverheadForm, TopologyClass};
use crate::workloads::WorkloadSpec;

pub use config::{ExperimentConfig, Resolved};
pub use csv_io::{SampleRow, TraceRow};
pub use report::{cmd_report, Bracket, Report};

/// Aggregation used when reducing traces to samples.
pub const AGGREGATION: &str = "per-phase median";

/// One line of a per-`P` regime table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub p: u32,
    pub t_kernel: f64,
    pub t_overhead: f64,
    pub g: Granularity,
    pub omega_pct: f64,
    pub regime: Regime,
}

pub fn table_row(sample: &ScalingSample, thresholds: &Thresholds) -> TableRow {
    let g = model::granularity(sample.timing());
    TableRow {
        p: sample.ranks,
        t_kernel: sample.t_kernel,
        t_overhead: sample.t_overhead,
        g,
        omega_pct: model::overhead_fraction_percent(g),
        regime: model::classify_regime_with(g, thresholds),
    }
}

pub fn format_table(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:>6}  {:>14}  {:>14}  {:>12}  {:>8}  {}\n",
        "P", "t_kernel_ms", "t_overhead_ms", "G", "omega%", "regime"
    );
    for r in rows {
        writeln!(
            out,
            "{:>6}  {:>14.6}  {:>14.6}  {:>12}  {:>8.3}  {}",
            r.p, r.t_kernel, r.t_overhead, r.g, r.omega_pct, r.regime
        )
        .expect("string write");
    }
    out
}

/// Output of a simulated sweep in one mode.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub mode: ScheduleMode,
    pub traces: Vec<ExecutionTrace>,
    pub samples: Vec<SampleRow>,
    pub table: Vec<TableRow>,
}

impl SweepOutput {
    pub fn scaling_samples(&self) -> Vec<ScalingSample> {
        self.samples.iter().map(|r| r.sample).collect()
    }

    pub fn samples_csv(&self) -> Result<String> {
        csv_io::write_samples(&self.samples)
    }

    pub fn trace_rows(&self, seed: u64, workload: &WorkloadSpec) -> Vec<TraceRow> {
        let ranks = self.samples.iter().map(|r| r.sample.ranks);
        ranks
            .zip(&self.traces)
            .flat_map(|(p, t)| csv_io::trace_rows(&workload.name, workload.topology, p, seed, t))
            .collect()
    }
}

pub fn cmd_sweep(cfg: &Resolved, mode: ScheduleMode) -> Result<SweepOutput> {
    let w = &cfg.workload;
    let traces = simulator::sweep_traces_with_budget(
        w,
        &cfg.ranks,
        cfg.phases,
        cfg.seed,
        mode,
        cfg.edge_budget,
    )?;
    let samples = cfg
        .ranks
        .iter()
        .zip(&traces)
        .map(|(&p, t)| {
            Ok(SampleRow {
                workload: w.name.clone(),
                topology: w.topology,
                sample: simulator::aggregate(p, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let table = samples
        .iter()
        .map(|r| table_row(&r.sample, &cfg.thresholds))
        .collect();
    Ok(SweepOutput {
        mode,
        traces,
        samples,
        table,
    })
}

/// Fit diagnostics carried in the models document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub residual_norm: f64,
    pub points_used: Vec<u32>,
    pub points_total: usize,
    pub clamped: bool,
    pub pre_collapse: bool,
    pub aggregation: String,
}

/// Fitted kernel and overhead models, as read and written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologyClass>,
    pub a: f64,
    pub form: OverheadForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<FitDiagnostics>,
}

impl ModelsDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelsDoc = serde_json::from_str(text)
            .map_err(|e| Error::Argument(format!("invalid models JSON: {e}")))?;
        doc.kernel()?;
        doc.overhead()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize") + "\n"
    }

    pub fn kernel(&self) -> Result<KernelModel> {
        KernelModel::new(self.a)
    }

    pub fn overhead(&self) -> Result<OverheadModel> {
        let alpha = match self.form {
            OverheadForm::Constant => self.alpha,
            _ => Some(self.alpha.unwrap_or(0.0)),
        };
        let m = OverheadModel {
            form: self.form,
            alpha,
            beta: self.beta,
        };
        m.validate()?;
        Ok(m)
    }
}

/// Fit models to samples. The topology comes from `topology` or, if absent,
/// from the samples, which must then agree.
pub fn cmd_fit(
    rows: &[SampleRow],
    topology: Option<TopologyClass>,
    options: FitOptions,
) -> Result<ModelsDoc> {
    if rows.is_empty() {
        return Err(Error::Argument(
            "insufficient samples: the CSV holds no data rows".into(),
        ));
    }
    let topology = match topology {
        Some(t) => t,
        None => {
            let first = rows[0].topology;
            if rows.iter().any(|r| r.topology != first) {
                return Err(Error::Argument(
                    "samples mix topologies; pass --topology or split the file".into(),
                ));
            }
            first
        }
    };
    let workload = {
        let first = &rows[0].workload;
        rows.iter()
            .all(|r| &r.workload == first)
            .then(|| first.clone())
    };
    let samples: Vec<ScalingSample> = rows.iter().map(|r| r.sample).collect();
    let kernel = fit_kernel(&samples)?;
    let fit = fit_overhead_with(topology, &samples, options)?;
    Ok(ModelsDoc {
        workload,
        topology: Some(topology),
        a: kernel.a,
        form: fit.model.form,
        alpha: fit.model.alpha,
        beta: fit.model.beta,
        diagnostics: Some(FitDiagnostics {
            residual_norm: fit.residual_norm,
            points_used: fit.points_used,
            points_total: samples.len(),
            clamped: fit.clamped,
            pre_collapse: options.pre_collapse && fit.model.form == OverheadForm::Quadratic,
            aggregation: AGGREGATION.to_string(),
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictOutput {
    pub prediction: CrossoverPrediction,
    pub curve: Vec<CurvePoint>,
}

pub fn cmd_predict(
    models: &ModelsDoc,
    range_hi: u32,
    ranks: &[u32],
    thresholds: &Thresholds,
) -> Result<PredictOutput> {
    let kernel = models.kernel()?;
    let overhead = models.overhead()?;
    let prediction = calibration::predict_crossover(&overhead, &kernel, range_hi)?;
    let ps: Vec<f64> = ranks.iter().map(|&p| f64::from(p)).collect();
    let curve = calibration::granularity_curve_with(&overhead, &kernel, &ps, thresholds);
    Ok(PredictOutput { prediction, curve })
}

/// Where the static-execution estimate comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum StaticSource {
    /// `penalty * A / P` with the fitted kernel constant.
    Penalty(f64),
    /// Workload kernel law times a penalty.
    Workload { spec: WorkloadSpec, penalty: f64 },
    /// Measured static kernel times, matched by rank count.
    Samples(Vec<ScalingSample>),
}

impl StaticSource {
    pub fn static_hat(&self, kernel: &KernelModel, p: u32) -> Result<f64> {
        match self {
            StaticSource::Penalty(penalty) => Ok(penalty * kernel.at(f64::from(p))),
            StaticSource::Workload { spec, penalty } => {
                Ok(decision::static_time(spec, p, *penalty))
            }
            StaticSource::Samples(samples) => samples
                .iter()
                .find(|s| s.ranks == p)
                .map(|s| s.t_kernel)
                .ok_or_else(|| Error::Argument(format!("no static sample at P={p}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecideOutput {
    pub verdicts: Vec<Verdict>,
    /// First rank count where the recommendation switches to static.
    pub flip_point: Option<u32>,
}

pub fn cmd_decide(
    models: &ModelsDoc,
    source: &StaticSource,
    ranks: &[u32],
) -> Result<DecideOutput> {
    let kernel = models.kernel()?;
    let overhead = models.overhead()?;
    if let StaticSource::Penalty(p) | StaticSource::Workload { penalty: p, .. } = source {
        if !(*p >= 1.0 && p.is_finite()) {
            return Err(Error::Argument(format!("penalty {p} must be >= 1")));
        }
    }
    let verdicts = ranks
        .iter()
        .map(|&p| {
            Ok(decision::decide(
                source.static_hat(&kernel, p)?,
                &kernel,
                &overhead,
                p,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let flip_point = decision::flip_point(&verdicts);
    Ok(DecideOutput {
        verdicts,
        flip_point,
    })
}

pub fn format_verdicts(out: &DecideOutput) -> String {
    let mut s = format!(
        "{:>6}  {:>14}  {:>14}  {:>14}  {}\n",
        "P", "t_static_hat", "t_dyn_hat", "margin", "choice"
    );
    for v in &out.verdicts {
        writeln!(
            s,
            "{:>6}  {:>14.6}  {:>14.6}  {:>14.6}  {}",
            v.p, v.t_static_hat, v.t_dyn_hat, v.margin, v.choice
        )
        .expect("string write");
    }
    match out.flip_point {
        Some(p) => writeln!(s, "flip to static at P={p}").expect("string write"),
        None => writeln!(s, "no dynamic-to-static flip in range").expect("string write"),
    }
    s
}

pub const CURVE_HEADER: &str = "series,workload,topology,P,G,omega_pct,regime";

/// Points of the overhead-fraction versus granularity plot.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveOutput {
    pub measured: Vec<(SampleRow, TableRow)>,
    pub reference: Vec<(f64, f64)>,
    pub csv: String,
}

/// Log-uniform reference curve `100 / (G + 1)` over `G` in `[1e-2, 1e3]`.
pub fn reference_curve() -> Vec<(f64, f64)> {
    (0..=100)
        .map(|i| {
            let g = 10f64.powf(-2.0 + 5.0 * f64::from(i) / 100.0);
            (g, 100.0 / (g + 1.0))
        })
        .collect()
}

pub fn cmd_curve(rows: &[SampleRow], thresholds: &Thresholds) -> CurveOutput {
    let measured: Vec<(SampleRow, TableRow)> = rows
        .iter()
        .map(|r| (r.clone(), table_row(&r.sample, thresholds)))
        .collect();
    let reference = reference_curve();
    let mut csv = String::from(CURVE_HEADER);
    csv.push('\n');
    for (r, t) in &measured {
        writeln!(
            csv,
            "measured,{},{},{},{},{},{}",
            r.workload,
            r.topology,
            t.p,
            t.g.value(),
            t.omega_pct,
            t.regime
        )
        .expect("string write");
    }
    for (g, omega) in &reference {
        let regime =
            model::classify_regime_with(Granularity::new(*g).expect("positive"), thresholds);
        writeln!(csv, "reference,,,,{g},{omega},{regime}").expect("string write");
    }
    for g in [thresholds.detrimental, thresholds.beneficial] {
        let gran = Granularity::new(g).expect("validated thresholds");
        let omega = model::overhead_fraction_percent(gran);
        let regime = model::classify_regime_with(gran, thresholds);
        writeln!(csv, "boundary,,,,{g},{omega},{regime}").expect("string write");
    }
    CurveOutput {
        measured,
        reference,
        csv,
    }
}
