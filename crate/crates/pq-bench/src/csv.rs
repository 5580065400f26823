//! CSV emission and parsing for benchmark reports.
//!
//! Stable column order: `queue,threads,run,duration_s,ops_total,
//! throughput,cas_failures,restructures`. One data row per run, then
//! one aggregate comment line. Floats are printed shortest-roundtrip,
//! so parsing a report back yields the exact numeric values.

use crate::{BenchReport, RunStats};

pub const CSV_HEADER: &str = "queue,threads,run,duration_s,ops_total,throughput,cas_failures,restructures";

/// One parsed data row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub queue: String,
    pub threads: usize,
    pub run: usize,
    pub duration_s: f64,
    pub ops_total: u64,
    pub throughput: f64,
    pub cas_failures: u64,
    pub restructures: u64,
}

pub fn emit_csv(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &report.runs {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            report.queue.name(),
            report.threads,
            r.run,
            r.duration_s,
            r.ops_total,
            r.throughput,
            r.cas_failures,
            r.restructures
        ));
    }
    out.push_str(&format!(
        "# mean_throughput={} stddev_throughput={}\n",
        report.mean_throughput, report.stddev_throughput
    ));
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, String> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == CSV_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(format!("line {}: expected 8 fields, got {}", i + 1, fields.len()));
        }
        let parse_err = |field: &str| format!("line {}: bad field {field:?}", i + 1);
        rows.push(CsvRow {
            queue: fields[0].to_string(),
            threads: fields[1].parse().map_err(|_| parse_err(fields[1]))?,
            run: fields[2].parse().map_err(|_| parse_err(fields[2]))?,
            duration_s: fields[3].parse().map_err(|_| parse_err(fields[3]))?,
            ops_total: fields[4].parse().map_err(|_| parse_err(fields[4]))?,
            throughput: fields[5].parse().map_err(|_| parse_err(fields[5]))?,
            cas_failures: fields[6].parse().map_err(|_| parse_err(fields[6]))?,
            restructures: fields[7].parse().map_err(|_| parse_err(fields[7]))?,
        });
    }
    Ok(rows)
}

impl CsvRow {
    pub fn matches(&self, stats: &RunStats) -> bool {
        self.run == stats.run
            && self.duration_s == stats.duration_s
            && self.ops_total == stats.ops_total
            && self.throughput == stats.throughput
            && self.cas_failures == stats.cas_failures
            && self.restructures == stats.restructures
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::QueueKind;

    fn sample_report(runs: usize) -> BenchReport {
        let runs: Vec<RunStats> = (0..runs)
            .map(|i| RunStats {
                run: i,
                duration_s: 1.0 + i as f64 * 0.125,
                ops_total: 1000 + i as u64,
                inserts: 500,
                pops: 500 + i as u64,
                throughput: (1000 + i as u64) as f64 / (1.0 + i as f64 * 0.125),
                cas_failures: 3 * i as u64,
                restructures: i as u64,
                resprays: 0,
            })
            .collect();
        let mean = runs.iter().map(|r| r.throughput).sum::<f64>() / runs.len() as f64;
        BenchReport {
            queue: QueueKind::Linden,
            threads: 4,
            runs,
            mean_throughput: mean,
            stddev_throughput: 0.0,
        }
    }

    #[test]
    fn one_run_one_row() {
        let text = emit_csv(&sample_report(1));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3); // header, row, aggregate comment
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[2].starts_with('#'));
    }

    #[test]
    fn ten_runs_ten_rows_plus_aggregate() {
        let text = emit_csv(&sample_report(10));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 12);
        assert!(lines[11].starts_with("# mean_throughput="));
    }

    #[test]
    fn roundtrip_preserves_numeric_fields() {
        let report = sample_report(10);
        let rows = parse_csv(&emit_csv(&report)).unwrap();
        assert_eq!(rows.len(), report.runs.len());
        for (row, stats) in rows.iter().zip(&report.runs) {
            assert!(row.matches(stats), "row {row:?} != stats {stats:?}");
            assert_eq!(row.queue, "linden");
            assert_eq!(row.threads, 4);
        }
    }
}
