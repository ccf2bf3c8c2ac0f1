//! Search ledger: newline-delimited JSON. The first line is a header object,
//! every following line one trial record in iteration order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::space::SearchSpace;
use super::SearchError;
use crate::nn::ModelConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialStatus {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// 1-based.
    pub iteration: usize,
    pub config: ModelConfig,
    pub status: TrialStatus,
    /// Best validation accuracy in [0, 1]; 0 when infeasible.
    pub accuracy: f64,
    pub wall_time: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub search_id: String,
    pub base_seed: u64,
    pub space: SearchSpace,
    /// Free-form settings that must match for a resume to be valid.
    #[serde(default)]
    pub settings: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub header: LedgerHeader,
    pub records: Vec<TrialRecord>,
}

/// Result of reading a ledger file that may end in a partially written line.
#[derive(Debug)]
pub(crate) struct Loaded {
    pub ledger: Ledger,
    /// Byte length of the intact prefix.
    pub valid_len: usize,
}

impl Ledger {
    pub fn new(header: LedgerHeader) -> Self {
        Self { header, records: Vec::new() }
    }

    /// Reads a ledger file, ignoring a torn final line.
    pub fn load(path: &Path) -> Result<Self, SearchError> {
        Ok(read_ledger(path)?.ledger)
    }

    /// Whole-file serialization, identical to what `run_search` appends.
    pub fn to_ndjson(&self) -> String {
        let mut out = header_line(&self.header);
        for r in &self.records {
            out.push_str(&record_line(r));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), SearchError> {
        fs::write(path, self.to_ndjson()).map_err(|e| SearchError::io(path, e))
    }

    /// Running maximum of accuracy.
    pub fn best_so_far(&self) -> Vec<f64> {
        accuracy_trace(self).into_iter().map(|t| t.best).collect()
    }

    pub fn best(&self) -> Option<&TrialRecord> {
        leaderboard_order(&self.records).into_iter().next()
    }
}

pub(crate) fn header_line(header: &LedgerHeader) -> String {
    let mut s = serde_json::to_string(header).expect("header serializes");
    s.push('\n');
    s
}

pub(crate) fn record_line(record: &TrialRecord) -> String {
    let mut s = serde_json::to_string(record).expect("record serializes");
    s.push('\n');
    s
}

pub(crate) fn read_ledger(path: &Path) -> Result<Loaded, SearchError> {
    let bytes = fs::read(path).map_err(|e| SearchError::io(path, e))?;
    parse_ledger(&bytes)
}

pub(crate) fn parse_ledger(bytes: &[u8]) -> Result<Loaded, SearchError> {
    let mut offset = 0;
    let mut header: Option<LedgerHeader> = None;
    let mut records: Vec<TrialRecord> = Vec::new();
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            // torn last line from an interrupted append
            break;
        };
        let line = &bytes[offset..offset + nl];
        match header {
            None => {
                header = Some(
                    serde_json::from_slice(line)
                        .map_err(|e| SearchError::Ledger(format!("line {line_no}: bad header: {e}")))?,
                );
            }
            Some(_) => {
                let rec: TrialRecord = serde_json::from_slice(line)
                    .map_err(|e| SearchError::Ledger(format!("line {line_no}: bad record: {e}")))?;
                let expected = records.len() + 1;
                if rec.iteration != expected {
                    return Err(SearchError::Ledger(format!(
                        "line {line_no}: iteration {} where {expected} was expected",
                        rec.iteration
                    )));
                }
                records.push(rec);
            }
        }
        offset += nl + 1;
    }
    let header = header.ok_or_else(|| SearchError::Ledger("missing header line".into()))?;
    Ok(Loaded { ledger: Ledger { header, records }, valid_len: offset })
}

fn leaderboard_order(records: &[TrialRecord]) -> Vec<&TrialRecord> {
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    // stable sort keeps earlier iterations first on ties
    sorted.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    sorted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub iteration: usize,
    pub hidden_layers: usize,
    pub config: String,
    /// Fraction in [0, 1].
    pub accuracy: f64,
}

/// Top `k` records by accuracy, earlier iteration first on ties.
pub fn leaderboard(ledger: &Ledger, k: usize) -> Result<Vec<LeaderboardRow>, SearchError> {
    if ledger.records.is_empty() {
        return Err(SearchError::EmptyLedger);
    }
    Ok(leaderboard_order(&ledger.records)
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, r)| LeaderboardRow {
            rank: i + 1,
            iteration: r.iteration,
            hidden_layers: r.config.hidden_layers.len(),
            config: r.config.render(),
            accuracy: r.accuracy,
        })
        .collect())
}

/// Accuracy as a percentage with at most two decimals and at least one:
/// 0.634 -> "63.4", 0.6223 -> "62.23", 0.62 -> "62.0".
pub fn format_percent(accuracy: f64) -> String {
    let s = format!("{:.2}", accuracy * 100.0);
    match s.strip_suffix('0') {
        Some(t) if !t.ends_with('.') => t.to_string(),
        _ => s,
    }
}

/// Plain-text table: hidden layer count, configuration, best accuracy.
pub fn render_leaderboard(rows: &[LeaderboardRow]) -> String {
    let width = rows.iter().map(|r| r.config.len()).max().unwrap_or(0).max("Layer Configuration".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<4} {:<13} {:<width$} {:>13}", "Rank", "Hidden layers", "Layer Configuration", "Best Accuracy");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<4} {:<13} {:<width$} {:>13}",
            r.rank,
            r.hidden_layers,
            r.config,
            format_percent(r.accuracy)
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub accuracy: f64,
    pub best: f64,
}

pub fn accuracy_trace(ledger: &Ledger) -> Vec<TracePoint> {
    let mut best = f64::NEG_INFINITY;
    ledger
        .records
        .iter()
        .map(|r| {
            best = best.max(r.accuracy);
            TracePoint { iteration: r.iteration, accuracy: r.accuracy, best }
        })
        .collect()
}

/// CSV with header `iteration,accuracy,best`.
pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("iteration,accuracy,best\n");
    for t in trace {
        let _ = writeln!(out, "{},{},{}", t.iteration, t.accuracy, t.best);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;

    fn rec(iteration: usize, accuracy: f64, layers: Vec<LayerSpec>) -> TrialRecord {
        TrialRecord {
            iteration,
            config: ModelConfig { hidden_layers: layers, learning_rate: 0.001 },
            status: if accuracy > 0.0 { TrialStatus::Feasible } else { TrialStatus::Infeasible },
            accuracy,
            wall_time: 0.0,
            seed: iteration as u64,
            reason: None,
            best_epoch: None,
        }
    }

    fn ledger(accs: &[f64]) -> Ledger {
        let header = LedgerHeader {
            search_id: "t".into(),
            base_seed: 1,
            space: SearchSpace::default(),
            settings: serde_json::Value::Null,
        };
        let mut l = Ledger::new(header);
        for (i, &a) in accs.iter().enumerate() {
            l.records.push(rec(i + 1, a, vec![LayerSpec::Fc { units: i + 1 }]));
        }
        l
    }

    #[test]
    fn percent_formatting() {
        let got: Vec<String> = [0.634, 0.6223, 0.622, 0.62, 0.619, 0.0, 1.0].iter().map(|&a| format_percent(a)).collect();
        assert_eq!(got, ["63.4", "62.23", "62.2", "62.0", "61.9", "0.0", "100.0"]);
    }

    #[test]
    fn leaderboard_orders_and_breaks_ties_by_iteration() {
        let l = ledger(&[0.5, 0.7, 0.5, 0.9]);
        let rows = leaderboard(&l, 10).unwrap();
        let its: Vec<usize> = rows.iter().map(|r| r.iteration).collect();
        assert_eq!(its, [4, 2, 1, 3]);
        assert_eq!(rows[0].rank, 1);
        assert_eq!(leaderboard(&l, 2).unwrap().len(), 2);
        assert!(matches!(leaderboard(&ledger(&[]), 5), Err(SearchError::EmptyLedger)));
        let zeros = leaderboard(&ledger(&[0.0, 0.0, 0.0]), 2).unwrap();
        assert!(zeros.iter().all(|r| r.accuracy == 0.0));
    }

    #[test]
    fn trace_is_running_max() {
        let t = accuracy_trace(&ledger(&[0.0, 0.5, 0.3]));
        assert_eq!(t.iter().map(|p| p.best).collect::<Vec<_>>(), [0.0, 0.5, 0.5]);
        assert_eq!(trace_csv(&t), "iteration,accuracy,best\n1,0,0\n2,0.5,0.5\n3,0.3,0.5\n");
        assert!(accuracy_trace(&ledger(&[])).is_empty());
    }

    #[test]
    fn ndjson_round_trip_and_torn_tail() {
        let l = ledger(&[0.25, 0.5]);
        let text = l.to_ndjson();
        let back = parse_ledger(text.as_bytes()).unwrap();
        assert_eq!(back.ledger, l);
        assert_eq!(back.valid_len, text.len());
        let torn = &text.as_bytes()[..text.len() - 7];
        let back = parse_ledger(torn).unwrap();
        assert_eq!(back.ledger.records.len(), 1);
        let mut gap = ledger(&[0.1, 0.2]);
        gap.records[1].iteration = 5;
        assert!(parse_ledger(gap.to_ndjson().as_bytes()).is_err());
    }
}
