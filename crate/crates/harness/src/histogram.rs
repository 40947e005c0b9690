//! Instanton length histogram: CSV in and out, text bar chart.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

const BAR_WIDTH: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    /// Instanton length to number of trials that found it.
    pub bins: BTreeMap<usize, u64>,
    pub trials_attempted: u64,
    /// Starting vectors that basis pursuit decoded correctly.
    pub trials_discarded: u64,
    /// Trials that ended in an error.
    pub trials_failed: u64,
    pub min_length: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct Row {
    length: usize,
    count: u64,
}

impl Histogram {
    pub fn record_instanton(&mut self, length: usize) {
        self.trials_attempted += 1;
        *self.bins.entry(length).or_insert(0) += 1;
        self.min_length = Some(self.min_length.map_or(length, |m| m.min(length)));
    }

    pub fn record_discard(&mut self) {
        self.trials_attempted += 1;
        self.trials_discarded += 1;
    }

    pub fn record_failure(&mut self) {
        self.trials_attempted += 1;
        self.trials_failed += 1;
    }

    pub fn instantons(&self) -> u64 {
        self.bins.values().sum()
    }

    /// Bin counts plus discards and failures equal the attempted trials.
    pub fn reconciles(&self) -> bool {
        self.instantons() + self.trials_discarded + self.trials_failed == self.trials_attempted
    }

    pub fn discard_rate(&self) -> f64 {
        if self.trials_attempted == 0 {
            0.0
        } else {
            self.trials_discarded as f64 / self.trials_attempted as f64
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["length", "count"])?;
        for (&length, &count) in &self.bins {
            w.write_record([length.to_string(), count.to_string()])?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| HarnessError::Usage(format!("csv: {}", e.error())))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    /// Reads the bins of a `length,count` CSV. Only the bins are stored in
    /// the file, so the trial counters reflect instantons alone.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut h = Histogram::default();
        let mut r = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = r.headers()?.clone();
        if !headers.is_empty()
            && (headers.len() != 2 || &headers[0] != "length" || &headers[1] != "count")
        {
            return Err(HarnessError::Usage(format!(
                "expected header \"length,count\", found {:?}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        for row in r.deserialize() {
            let row: Row = row?;
            if h.bins.insert(row.length, row.count).is_some() {
                return Err(HarnessError::Usage(format!(
                    "duplicate length {}",
                    row.length
                )));
            }
            h.trials_attempted += row.count;
            if row.count > 0 {
                h.min_length = Some(h.min_length.map_or(row.length, |m| m.min(row.length)));
            }
        }
        Ok(h)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_csv(&text)
    }

    /// Fixed-width bar chart, one line per length in ascending order.
    pub fn render(&self) -> String {
        let max = self.bins.values().copied().max().unwrap_or(0);
        if max == 0 {
            return "no data\n".to_string();
        }
        let label_width = self
            .bins
            .keys()
            .map(|k| k.to_string().len())
            .max()
            .unwrap_or(1);
        let count_width = max.to_string().len();
        let mut out = String::new();
        for (&length, &count) in &self.bins {
            let bar = ((count as f64 / max as f64) * BAR_WIDTH as f64).round() as usize;
            let bar = if count > 0 { bar.max(1) } else { 0 };
            let _ = writeln!(
                out,
                "{length:>label_width$} | {:<BAR_WIDTH$} {count:>count_width$}",
                "#".repeat(bar)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut h = Histogram::default();
        for len in [5, 3, 5, 7] {
            h.record_instanton(len);
        }
        h.record_discard();
        assert!(h.reconciles());
        assert_eq!(h.min_length, Some(3));
        let csv = h.to_csv().unwrap();
        assert_eq!(csv, "length,count\n3,1\n5,2\n7,1\n");
        let back = Histogram::from_csv(&csv).unwrap();
        assert_eq!(back.bins, h.bins);
        assert_eq!(back.min_length, Some(3));
    }

    #[test]
    fn single_bin_is_full_width() {
        let h = Histogram::from_csv("length,count\n3,5\n").unwrap();
        let text = h.render();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("3 | "));
        assert_eq!(text.matches('#').count(), BAR_WIDTH);
        assert!(text.trim_end().ends_with('5'));
    }

    #[test]
    fn bins_render_in_ascending_order() {
        let h = Histogram::from_csv("length,count\n12,2\n4,8\n").unwrap();
        let text = h.render();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].trim_start().starts_with("4 |"));
        assert!(lines[1].starts_with("12 |"));
        assert_eq!(lines[1].matches('#').count(), 13);
    }

    #[test]
    fn empty_input_has_no_data() {
        assert_eq!(Histogram::from_csv("").unwrap().render(), "no data\n");
        assert_eq!(
            Histogram::from_csv("length,count\n").unwrap().render(),
            "no data\n"
        );
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(Histogram::from_csv("length,count\nx,1\n").is_err());
        assert!(Histogram::from_csv("size,n\n1,1\n").is_err());
        assert!(Histogram::from_csv("length,count\n3,1\n3,2\n").is_err());
    }
}
