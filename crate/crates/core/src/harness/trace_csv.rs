//! CSV serialization of run traces.
//!
//! Schema (header mandatory, UTF-8, '.' decimal):
//!
//! ```text
//! method,matrix,n,b,seed,eta,gamma,oracle_calls,gap,elapsed_s
//! ```
//!
//! One row per trace checkpoint; floats print in Rust's shortest round-trip
//! form, so export followed by import reproduces traces exactly.

use super::HarnessError;
use crate::solvers::{RunRecord, TracePoint};
use std::path::Path;

pub const TRACE_HEADER: &str = "method,matrix,n,b,seed,eta,gamma,oracle_calls,gap,elapsed_s";

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        for t in &r.trace {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.method,
                r.matrix,
                r.n,
                r.b,
                r.seed,
                r.eta,
                r.gamma,
                t.oracle_calls,
                t.gap,
                t.elapsed_s
            ));
        }
    }
    out
}

pub fn write_records_csv(records: &[RunRecord], path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, records_to_csv(records)).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parse a trace CSV; consecutive rows with the same configuration key are
/// grouped back into one record. Malformed rows report their line number.
pub fn parse_trace_csv(text: &str, path_label: &str) -> Result<Vec<RunRecord>, HarnessError> {
    let err = |line: usize, reason: String| HarnessError::Csv {
        path: path_label.to_string(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == TRACE_HEADER => {}
        Some((_, header)) => {
            return Err(err(1, format!("bad header '{}', expected '{TRACE_HEADER}'", header.trim())))
        }
        None => return Err(err(1, "empty file".into())),
    }
    let mut records: Vec<RunRecord> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(err(lineno, format!("expected 10 fields, found {}", fields.len())));
        }
        let parse_u = |s: &str, what: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| err(lineno, format!("bad {what} '{s}': {e}")))
        };
        let parse_f = |s: &str, what: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| err(lineno, format!("bad {what} '{s}': {e}")))
        };
        let method = fields[0].trim().to_string();
        let matrix = fields[1].trim().to_string();
        let n = parse_u(fields[2], "n")? as usize;
        let b = parse_u(fields[3], "b")? as usize;
        let seed = parse_u(fields[4], "seed")?;
        let eta = parse_f(fields[5], "eta")?;
        let gamma = parse_f(fields[6], "gamma")?;
        let point = TracePoint {
            oracle_calls: parse_u(fields[7], "oracle_calls")?,
            gap: parse_f(fields[8], "gap")?,
            elapsed_s: parse_f(fields[9], "elapsed_s")?,
        };
        let same_key = records.last().map(|r: &RunRecord| {
            r.method == method
                && r.matrix == matrix
                && r.n == n
                && r.b == b
                && r.seed == seed
                && r.eta == eta
                && r.gamma == gamma
        });
        if same_key == Some(true) {
            records.last_mut().unwrap().trace.push(point);
        } else {
            records.push(RunRecord {
                method,
                matrix,
                n,
                b,
                seed,
                eta,
                gamma,
                trace: vec![point],
                final_point: Vec::new(),
                total_calls: 0,
                inner_steps: 0,
                refreshes: 0,
                gap_meter_units: 0,
                iterate_log: None,
            });
        }
    }
    for r in &mut records {
        r.total_calls = r.trace.last().map(|t| t.oracle_calls).unwrap_or(0);
    }
    Ok(records)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<RunRecord>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace_csv(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> RunRecord {
        RunRecord {
            method: "omb".into(),
            matrix: "pb50".into(),
            n: 50,
            b: 2,
            seed: 7,
            eta: 0.012345678901234567,
            gamma: 1.0 / 17.0,
            trace: Vec::new(),
            final_point: vec![],
            total_calls: 0,
            inner_steps: 0,
            refreshes: 0,
            gap_meter_units: 0,
            iterate_log: None,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rec = sample_record();
        rec.trace = vec![
            TracePoint { oracle_calls: 0, gap: 1.9832775610168344, elapsed_s: 0.0 },
            TracePoint { oracle_calls: 50, gap: 0.4421002239991357, elapsed_s: 0.0 },
            TracePoint { oracle_calls: 100, gap: 1e-13, elapsed_s: 0.0 },
        ];
        let csv = records_to_csv(&[rec.clone()]);
        let back = parse_trace_csv(&csv, "test").unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].method, rec.method);
        assert_eq!(back[0].eta.to_bits(), rec.eta.to_bits());
        assert_eq!(back[0].gamma.to_bits(), rec.gamma.to_bits());
        for (a, b) in back[0].trace.iter().zip(&rec.trace) {
            assert_eq!(a.oracle_calls, b.oracle_calls);
            assert_eq!(a.gap.to_bits(), b.gap.to_bits());
            assert_eq!(a.elapsed_s.to_bits(), b.elapsed_s.to_bits());
        }
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let text = format!("{TRACE_HEADER}\nomb,pb,50,1,0,0.1,0.05,0,1.0,0\nomb,pb,50,1,0,0.1,0.05,xx,1.0,0\n");
        match parse_trace_csv(&text, "t.csv") {
            Err(HarnessError::Csv { line, reason, .. }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("oracle_calls"));
            }
            other => panic!("expected csv error, got {other:?}"),
        }
        match parse_trace_csv("nope\n", "t.csv") {
            Err(HarnessError::Csv { line: 1, .. }) => {}
            other => panic!("expected header error, got {other:?}"),
        }
    }

    #[test]
    fn grouping_splits_on_key_change() {
        let text = format!(
            "{TRACE_HEADER}\n\
             omb,pb,4,1,0,0.1,0.5,0,1.0,0\n\
             omb,pb,4,1,0,0.1,0.5,10,0.5,0\n\
             omb,pb,4,1,1,0.1,0.5,0,1.0,0\n\
             mirror-prox,pb,4,4,0,0.2,0,0,1.0,0\n"
        );
        let records = parse_trace_csv(&text, "t.csv").unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].trace.len(), 2);
        assert_eq!(records[1].seed, 1);
        assert_eq!(records[2].method, "mirror-prox");
    }
}
