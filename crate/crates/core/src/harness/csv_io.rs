//! CSV schemas for traces and aggregated samples.
//!
//! Durations are written with Rust's shortest round-trip decimal format, so
//! reading a file back yields bit-identical values and rewriting it yields
//! identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::calibration::ScalingSample;
use crate::error::{Error, Result};
use crate::simulator::{ExecutionTrace, ScheduleMode};
use crate::topology::TopologyClass;

pub const TRACE_HEADER: &str = "workload,topology,P,phase,t_kernel_ms,t_overhead_ms,mode,seed";
pub const SAMPLE_HEADER: &str = "workload,topology,P,t_kernel_ms,t_overhead_ms";

/// One aggregated sample with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub workload: String,
    pub topology: TopologyClass,
    pub sample: ScalingSample,
}

/// One phase of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub workload: String,
    pub topology: TopologyClass,
    pub ranks: u32,
    pub phase: u32,
    pub t_kernel: f64,
    pub t_overhead: f64,
    pub mode: ScheduleMode,
    pub seed: u64,
}

pub fn trace_rows(
    workload: &str,
    topology: TopologyClass,
    ranks: u32,
    seed: u64,
    trace: &ExecutionTrace,
) -> Vec<TraceRow> {
    trace
        .per_phase
        .iter()
        .enumerate()
        .map(|(t, p)| TraceRow {
            workload: workload.to_string(),
            topology,
            ranks,
            phase: t as u32,
            t_kernel: p.t_kernel,
            t_overhead: p.t_overhead,
            mode: trace.mode,
            seed,
        })
        .collect()
}

fn check_field(name: &str) -> Result<()> {
    if name.contains([',', '"', '\n', '\r']) {
        return Err(Error::Argument(format!(
            "workload name `{name}` cannot be written to CSV"
        )));
    }
    Ok(())
}

pub fn write_samples(rows: &[SampleRow]) -> Result<String> {
    let mut out = String::from(SAMPLE_HEADER);
    out.push('\n');
    for r in rows {
        check_field(&r.workload)?;
        let s = &r.sample;
        writeln!(
            out,
            "{},{},{},{},{}",
            r.workload, r.topology, s.ranks, s.t_kernel, s.t_overhead
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn write_traces(rows: &[TraceRow]) -> Result<String> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        check_field(&r.workload)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.workload, r.topology, r.ranks, r.phase, r.t_kernel, r.t_overhead, r.mode, r.seed
        )
        .expect("string write");
    }
    Ok(out)
}

fn records(text: &str, origin: &str, header: &str) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let csv_err = |line: u64, message: String| Error::Csv {
        path: origin.to_string(),
        line,
        message,
    };
    let found = reader.headers().map_err(|e| csv_err(1, e.to_string()))?;
    let found: Vec<&str> = found.iter().collect();
    if found.join(",") != header {
        return Err(csv_err(
            1,
            format!("expected header `{header}`, found `{}`", found.join(",")),
        ));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            csv_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
    origin: &str,
    line: u64,
) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<T>().map_err(|_| Error::Csv {
        path: origin.to_string(),
        line,
        message: format!("bad {name} value `{raw}`"),
    })
}

/// Parse a samples CSV. `origin` labels error messages.
pub fn read_samples(text: &str, origin: &str) -> Result<Vec<SampleRow>> {
    records(text, origin, SAMPLE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            let topology = field::<TopologyClass>(&rec, 1, "topology", origin, line)?;
            let ranks = field::<u32>(&rec, 2, "P", origin, line)?;
            let t_kernel = field::<f64>(&rec, 3, "t_kernel_ms", origin, line)?;
            let t_overhead = field::<f64>(&rec, 4, "t_overhead_ms", origin, line)?;
            let sample =
                ScalingSample::new(ranks, t_kernel, t_overhead).map_err(|e| Error::Csv {
                    path: origin.to_string(),
                    line,
                    message: e.to_string(),
                })?;
            Ok(SampleRow {
                workload: rec.get(0).unwrap_or("").to_string(),
                topology,
                sample,
            })
        })
        .collect()
}

pub fn read_traces(text: &str, origin: &str) -> Result<Vec<TraceRow>> {
    records(text, origin, TRACE_HEADER)?
        .into_iter()
        .map(|(line, rec)| {
            Ok(TraceRow {
                workload: rec.get(0).unwrap_or("").to_string(),
                topology: field(&rec, 1, "topology", origin, line)?,
                ranks: field(&rec, 2, "P", origin, line)?,
                phase: field(&rec, 3, "phase", origin, line)?,
                t_kernel: field(&rec, 4, "t_kernel_ms", origin, line)?,
                t_overhead: field(&rec, 5, "t_overhead_ms", origin, line)?,
                mode: field(&rec, 6, "mode", origin, line)?,
                seed: field(&rec, 7, "seed", origin, line)?,
            })
        })
        .collect()
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_samples_file(path: &Path) -> Result<Vec<SampleRow>> {
    let text = read_text(path)?;
    read_samples(&text, &path.display().to_string())
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(p: u32, k: f64, o: f64) -> SampleRow {
        SampleRow {
            workload: "fft".into(),
            topology: TopologyClass::Global,
            sample: ScalingSample::new(p, k, o).unwrap(),
        }
    }

    #[test]
    fn sample_header_is_exact() {
        let text = write_samples(&[row(4, 1.5, 0.25)]).unwrap();
        assert_eq!(
            text,
            "workload,topology,P,t_kernel_ms,t_overhead_ms\nfft,global,4,1.5,0.25\n"
        );
    }

    #[test]
    fn trace_header_is_exact() {
        let rows = vec![TraceRow {
            workload: "gemm".into(),
            topology: TopologyClass::Independent,
            ranks: 8,
            phase: 2,
            t_kernel: 3.0,
            t_overhead: 0.1,
            mode: ScheduleMode::Dynamic,
            seed: 7,
        }];
        let text = write_traces(&rows).unwrap();
        assert_eq!(
            text,
            "workload,topology,P,phase,t_kernel_ms,t_overhead_ms,mode,seed\ngemm,independent,8,2,3,0.1,dynamic,7\n"
        );
        assert_eq!(read_traces(&text, "t").unwrap(), rows);
    }

    #[test]
    fn malformed_row_reports_line() {
        let text =
            "workload,topology,P,t_kernel_ms,t_overhead_ms\nfft,global,4,1,0\nfft,global,x,1,0\n";
        match read_samples(text, "in.csv").unwrap_err() {
            Error::Csv { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("P"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let negative = "workload,topology,P,t_kernel_ms,t_overhead_ms\nfft,global,4,-1,0\n";
        assert!(matches!(
            read_samples(negative, "n").unwrap_err(),
            Error::Csv { line: 2, .. }
        ));
        let short = "workload,topology,P,t_kernel_ms,t_overhead_ms\nfft,global,4\n";
        assert!(read_samples(short, "s").is_err());
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(
            read_samples("a,b,c\n", "h").unwrap_err(),
            Error::Csv { line: 1, .. }
        ));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(
            read_samples("workload,topology,P,t_kernel_ms,t_overhead_ms\n", "h")
                .unwrap()
                .is_empty()
        );
    }

    proptest! {
        #[test]
        fn write_read_write_is_identical(values in proptest::collection::vec((1u32..100_000, 1e-12f64..1e9, 0.0f64..1e9), 0..20)) {
            let rows: Vec<SampleRow> = values.iter().map(|&(p, k, o)| row(p, k, o)).collect();
            let first = write_samples(&rows).unwrap();
            let parsed = read_samples(&first, "p").unwrap();
            prop_assert_eq!(&parsed, &rows);
            prop_assert_eq!(write_samples(&parsed).unwrap(), first);
        }
    }
}
