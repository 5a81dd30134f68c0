//! Result export as CSV rows or a JSON document.

use std::io;

use serde::{Deserialize, Serialize};

use crate::simengine::{BatchResult, Metrics};

pub const CSV_HEADER: [&str; 14] = [
    "scenario",
    "policy",
    "seed",
    "run",
    "total_s",
    "read_s",
    "write_s",
    "rps",
    "slo_violations",
    "slo_violation_pct",
    "mean_hops",
    "local_availability",
    "storage_ops",
    "bytes_moved",
];

/// Label of summary rows in the `run` column.
pub const SUMMARY_RUN: &str = "mean";

/// One CSV row: a single run, or a policy's mean over all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub run: String,
    pub total_s: f64,
    pub read_s: f64,
    pub write_s: f64,
    pub rps: f64,
    pub slo_violations: f64,
    pub slo_violation_pct: f64,
    pub mean_hops: f64,
    pub local_availability: f64,
    pub storage_ops: f64,
    pub bytes_moved: f64,
}

impl ResultRow {
    fn new(scenario: &str, policy: &str, seed: u64, run: String, m: &Metrics) -> Self {
        ResultRow {
            scenario: scenario.to_owned(),
            policy: policy.to_owned(),
            seed,
            run,
            total_s: m.total_s,
            read_s: m.read_s,
            write_s: m.write_s,
            rps: m.rps,
            slo_violations: m.slo_violations,
            slo_violation_pct: m.slo_violation_pct,
            mean_hops: m.mean_hops,
            local_availability: m.local_availability,
            storage_ops: m.storage_ops,
            bytes_moved: m.bytes_moved,
        }
    }

    pub fn is_summary(&self) -> bool {
        self.run == SUMMARY_RUN
    }
}

/// Per-run rows for every batch followed by one summary row per batch.
pub fn result_rows(scenario: &str, batches: &[BatchResult]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for b in batches {
        for (i, r) in b.runs.iter().enumerate() {
            rows.push(ResultRow::new(scenario, b.policy.as_str(), r.seed, i.to_string(), &r.metrics()));
        }
    }
    for b in batches {
        rows.push(ResultRow::new(scenario, b.policy.as_str(), b.base_seed, SUMMARY_RUN.into(), &b.summary.mean));
    }
    rows
}

pub fn write_csv<W: io::Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub policy: String,
    pub seed: u64,
    pub runs: usize,
    pub mean: Metrics,
    pub stddev: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub scenario: String,
    pub runs: Vec<ResultRow>,
    pub summary: Vec<SummaryEntry>,
}

impl ResultsDocument {
    pub fn new(scenario: &str, batches: &[BatchResult]) -> Self {
        let runs = result_rows(scenario, batches).into_iter().filter(|r| !r.is_summary()).collect();
        let summary = batches
            .iter()
            .map(|b| SummaryEntry {
                policy: b.policy.as_str().to_owned(),
                seed: b.base_seed,
                runs: b.runs.len(),
                mean: b.summary.mean,
                stddev: b.summary.stddev,
            })
            .collect();
        ResultsDocument { scenario: scenario.to_owned(), runs, summary }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("results serialize")
    }
}
