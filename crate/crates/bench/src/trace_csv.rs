//! Trace files.
//!
//! Floats use Rust's shortest round-trip formatting (`{:?}`), so every column
//! except `wall_seconds` is reproducible byte-for-byte.

use std::fs;
use std::path::Path;

use grlm::IterationRecord;

use crate::spec::HarnessError;

pub const TRACE_HEADER: &str = "t,grad_norm,merit,lambda,r,jv_cumulative,wall_seconds,snapshot";

pub fn format_trace_csv(trace: &[IterationRecord<f64>]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?},{},{:?},{}\n",
            r.t,
            r.grad_norm,
            r.merit,
            r.lambda,
            r.step_norm,
            r.jv_cumulative,
            r.wall_seconds,
            u8::from(r.snapshot_refreshed)
        ));
    }
    out
}

pub fn emit_trace_csv(trace: &[IterationRecord<f64>], path: &Path) -> Result<(), HarnessError> {
    fs::write(path, format_trace_csv(trace)).map_err(|e| HarnessError::io(path, e))
}

/// Whitespace-separated columns with a `#` header, for gnuplot.
pub fn emit_trace_dat(trace: &[IterationRecord<f64>], path: &Path) -> Result<(), HarnessError> {
    let mut out = format!("# {}\n", TRACE_HEADER.replace(',', " "));
    for r in trace {
        out.push_str(&format!(
            "{} {:?} {:?} {:?} {:?} {} {:?} {}\n",
            r.t,
            r.grad_norm,
            r.merit,
            r.lambda,
            r.step_norm,
            r.jv_cumulative,
            r.wall_seconds,
            u8::from(r.snapshot_refreshed)
        ));
    }
    fs::write(path, out).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: usize) -> IterationRecord<f64> {
        IterationRecord {
            t,
            grad_norm: 0.1,
            merit: 1e-7,
            lambda: 2.5,
            step_norm: 0.0,
            jv_cumulative: 10 * (t as u64 + 1),
            wall_seconds: 0.5,
            snapshot_refreshed: t == 0,
            gram_norm: 1.0,
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        assert_eq!(format_trace_csv(&[]), format!("{TRACE_HEADER}\n"));
    }

    #[test]
    fn one_line_per_record() {
        let trace: Vec<_> = (0..3).map(record).collect();
        let csv = format_trace_csv(&trace);
        assert_eq!(csv.lines().count(), 4);
        assert_eq!(csv.lines().nth(1).unwrap(), "0,0.1,1e-7,2.5,0.0,10,0.5,1");
        assert!(csv.lines().nth(2).unwrap().ends_with(",0"));
    }

    #[test]
    fn floats_round_trip() {
        let mut r = record(0);
        r.grad_norm = 0.1 + 0.2;
        r.merit = 1.0 / 3.0;
        let csv = format_trace_csv(&[r.clone()]);
        let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), r.grad_norm);
        assert_eq!(fields[2].parse::<f64>().unwrap(), r.merit);
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = emit_trace_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
