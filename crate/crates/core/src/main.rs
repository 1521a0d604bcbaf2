use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use granulyzer::calibration::{FitOptions, ScalingSample};
use granulyzer::harness::config::{ExperimentConfig, RanksField, WorkloadRef};
use granulyzer::harness::{self, csv_io, svg, ModelsDoc, Resolved, StaticSource};
use granulyzer::model::Thresholds;
use granulyzer::simulator::ScheduleMode;
use granulyzer::topology::TopologyClass;
use granulyzer::workloads::preset;
use granulyzer::{Error, Result};

#[derive(Parser)]
#[command(
    name = "granulyzer",
    version,
    about = "Task-scheduling overhead simulator and granularity analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a strong-scaling sweep and write aggregated samples.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// Scheduling mode (overrides the config's first mode).
        #[arg(long)]
        mode: Option<ScheduleMode>,
        /// Samples CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-phase trace CSV path.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Also write an SVG scatter of overhead fraction against G.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Fit kernel and overhead models to a samples CSV.
    Fit {
        samples: PathBuf,
        /// Topology class; inferred from the CSV when absent.
        #[arg(long)]
        topology: Option<TopologyClass>,
        /// Skip the pre-collapse filter for quadratic fits.
        #[arg(long)]
        no_pre_collapse: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the crossover rank count from fitted models.
    Predict {
        models: PathBuf,
        #[arg(long, default_value_t = 256)]
        range_hi: u32,
        #[arg(long, default_value = "4:256:x2")]
        ranks: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recommend dynamic or static execution per rank count.
    Decide {
        models: PathBuf,
        /// Static imbalance penalty over the fitted kernel (>= 1).
        #[arg(long, default_value_t = 1.0)]
        penalty: f64,
        /// Use a workload's kernel law, times the penalty, for the static estimate.
        #[arg(long, conflicts_with = "static_samples")]
        workload: Option<String>,
        /// Use measured static kernel times instead of a penalty.
        #[arg(long)]
        static_samples: Option<PathBuf>,
        #[arg(long, default_value = "4:256:x2")]
        ranks: String,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Emit plot-ready overhead-fraction points plus the reference curve.
    Curve {
        /// Samples CSV files; when none are given a sweep is run instead.
        samples: Vec<PathBuf>,
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run sweep, fit, predict and decide and write a JSON report.
    Report {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct ExpArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Workload preset name.
    #[arg(long)]
    workload: Option<String>,
    /// Rank list: `a:b:xF`, `a:b:+S` or `4,8,16`.
    #[arg(long)]
    ranks: Option<String>,
    #[arg(long)]
    phases: Option<u32>,
    /// Seed; overrides the config file and GRANULYZER_SEED.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    penalty: Option<f64>,
    #[arg(long)]
    range_hi: Option<u32>,
    #[arg(long)]
    edge_budget: Option<u64>,
}

impl ExpArgs {
    fn has_source(&self) -> bool {
        self.config.is_some() || self.workload.is_some()
    }

    fn resolve(&self) -> Result<Resolved> {
        let mut cfg = match (&self.config, &self.workload) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(name)) => ExperimentConfig::for_workload(name),
            (None, None) => return Err(Error::Config("pass --workload or --config".into())),
        };
        if let (Some(_), Some(name)) = (&self.config, &self.workload) {
            cfg.workload = WorkloadRef::Preset(name.clone());
        }
        if let Some(r) = &self.ranks {
            cfg.ranks = Some(RanksField::Expr(r.clone()));
        }
        cfg.phases = self.phases.or(cfg.phases);
        cfg.penalty = self.penalty.or(cfg.penalty);
        cfg.range_hi = self.range_hi.or(cfg.range_hi);
        cfg.edge_budget = self.edge_budget.or(cfg.edge_budget);
        let mut resolved = cfg.resolve()?;
        if let Some(seed) = self.seed {
            resolved.seed = seed;
        }
        Ok(resolved)
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => csv_io::write_file(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| Error::Config(format!("stdout: {e}")))
        }
    }
}

fn ranks_arg(expr: &str) -> Result<Vec<u32>> {
    let ranks = harness::config::parse_ranks(expr)?;
    granulyzer::simulator::validate_ranks(&ranks)?;
    Ok(ranks)
}

fn measured_points(rows: &[harness::TableRow]) -> Vec<(f64, f64)> {
    rows.iter().map(|r| (r.g.value(), r.omega_pct)).collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep {
            exp,
            mode,
            out,
            traces,
            svg: svg_path,
        } => {
            let cfg = exp.resolve()?;
            let mode = mode.unwrap_or(cfg.modes[0]);
            let sweep = harness::cmd_sweep(&cfg, mode)?;
            let csv = sweep.samples_csv()?;
            let out = out.or_else(|| cfg.output.samples_csv.clone());
            let table = harness::format_table(&sweep.table);
            if out.is_some() {
                print!("{table}");
            } else {
                eprint!("{table}");
            }
            emit(out.as_deref(), &csv)?;
            if let Some(path) = traces.or_else(|| cfg.output.traces_csv.clone()) {
                let rows = sweep.trace_rows(cfg.seed, &cfg.workload);
                csv_io::write_file(&path, &csv_io::write_traces(&rows)?)?;
            }
            if let Some(path) = svg_path.or_else(|| cfg.output.svg.clone()) {
                let doc = svg::scatter(&measured_points(&sweep.table), &harness::reference_curve());
                csv_io::write_file(&path, &doc)?;
            }
        }
        Command::Fit {
            samples,
            topology,
            no_pre_collapse,
            out,
        } => {
            let rows = csv_io::read_samples_file(&samples)?;
            let doc = harness::cmd_fit(
                &rows,
                topology,
                FitOptions {
                    pre_collapse: !no_pre_collapse,
                },
            )?;
            emit(out.as_deref(), &doc.to_json())?;
        }
        Command::Predict {
            models,
            range_hi,
            ranks,
            out,
        } => {
            let doc = ModelsDoc::from_json(&csv_io::read_text(&models)?)?;
            let ranks = ranks_arg(&ranks)?;
            let pred = harness::cmd_predict(&doc, range_hi, &ranks, &Thresholds::default())?;
            let json = serde_json::to_string_pretty(&pred).expect("prediction serialize") + "\n";
            emit(out.as_deref(), &json)?;
        }
        Command::Decide {
            models,
            penalty,
            workload,
            static_samples,
            ranks,
            json,
        } => {
            let doc = ModelsDoc::from_json(&csv_io::read_text(&models)?)?;
            let ranks = ranks_arg(&ranks)?;
            let source = match (workload, static_samples) {
                (Some(name), _) => StaticSource::Workload {
                    spec: preset(&name)?,
                    penalty,
                },
                (None, Some(path)) => StaticSource::Samples(
                    csv_io::read_samples_file(&path)?
                        .into_iter()
                        .map(|r| r.sample)
                        .collect::<Vec<ScalingSample>>(),
                ),
                (None, None) => StaticSource::Penalty(penalty),
            };
            let out = harness::cmd_decide(&doc, &source, &ranks)?;
            if json {
                emit(
                    None,
                    &(serde_json::to_string_pretty(&out).expect("verdicts serialize") + "\n"),
                )?;
            } else {
                emit(None, &harness::format_verdicts(&out))?;
            }
        }
        Command::Curve {
            samples,
            exp,
            out,
            svg: svg_path,
        } => {
            let (rows, thresholds, cfg_out) = if samples.is_empty() && exp.has_source() {
                let cfg = exp.resolve()?;
                let sweep = harness::cmd_sweep(&cfg, cfg.modes[0])?;
                (sweep.samples, cfg.thresholds, Some(cfg.output))
            } else {
                let mut rows = Vec::new();
                for path in &samples {
                    rows.extend(csv_io::read_samples_file(path)?);
                }
                (rows, Thresholds::default(), None)
            };
            let curve = harness::cmd_curve(&rows, &thresholds);
            let out = out.or_else(|| cfg_out.as_ref().and_then(|o| o.curve_csv.clone()));
            emit(out.as_deref(), &curve.csv)?;
            if let Some(path) = svg_path.or_else(|| cfg_out.and_then(|o| o.svg)) {
                let pts: Vec<(f64, f64)> = curve
                    .measured
                    .iter()
                    .map(|(_, t)| (t.g.value(), t.omega_pct))
                    .collect();
                csv_io::write_file(&path, &svg::scatter(&pts, &curve.reference))?;
            }
        }
        Command::Report {
            exp,
            out,
            svg: svg_path,
        } => {
            let cfg = exp.resolve()?;
            let result = harness::cmd_report(&cfg)?;
            let report = &result.report;
            eprint!("{}", harness::format_table(&report.table));
            let out = out.or_else(|| cfg.output.report_json.clone());
            emit(out.as_deref(), &report.to_json())?;
            if let Some(path) = &cfg.output.samples_csv {
                csv_io::write_file(path, &report.samples_csv)?;
            }
            if let Some(path) = svg_path.or_else(|| cfg.output.svg.clone()) {
                let doc =
                    svg::scatter(&measured_points(&report.table), &harness::reference_curve());
                csv_io::write_file(&path, &doc)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
