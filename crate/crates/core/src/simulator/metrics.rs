//! Run metrics in long format: one `section,key,field,value` row per figure.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("unknown report format {0:?} (expected csv or table)")]
    UnknownFormat(String),
    #[error("malformed metrics file: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Table,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "table" | "text" | "text-table" => Ok(Self::Table),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetricRow {
    pub section: String,
    pub key: String,
    pub field: String,
    pub value: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetricsReport {
    rows: Vec<MetricRow>,
}

pub const HEADER: [&str; 4] = ["section", "key", "field", "value"];

impl MetricsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, section: &str, key: impl fmt::Display, field: &str, value: impl fmt::Display) {
        self.rows.push(MetricRow {
            section: section.to_string(),
            key: key.to_string(),
            field: field.to_string(),
            value: value.to_string(),
        });
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn section<'a>(&'a self, section: &'a str) -> impl Iterator<Item = &'a MetricRow> + 'a {
        self.rows.iter().filter(move |r| r.section == section)
    }

    pub fn get(&self, section: &str, key: &str, field: &str) -> Option<&str> {
        self.rows
            .iter()
            .find(|r| r.section == section && r.key == key && r.field == field)
            .map(|r| r.value.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).expect("in-memory csv");
        for r in &self.rows {
            w.write_record([&r.section, &r.key, &r.field, &r.value]).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
    }

    pub fn from_csv(text: &str) -> Result<Self, ReportError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| ReportError::Malformed(e.to_string()))?.clone();
        if headers.iter().ne(HEADER) {
            return Err(ReportError::Malformed(format!("unexpected header {:?}", headers)));
        }
        let rows = rdr
            .deserialize()
            .collect::<Result<Vec<MetricRow>, _>>()
            .map_err(|e| ReportError::Malformed(e.to_string()))?;
        Ok(Self { rows })
    }

    /// Fixed-width text table with the same cells as the CSV.
    pub fn to_table(&self) -> String {
        let cells: Vec<[&str; 4]> = std::iter::once(HEADER)
            .chain(self.rows.iter().map(|r| [r.section.as_str(), r.key.as_str(), r.field.as_str(), r.value.as_str()]))
            .collect();
        let mut widths = [0usize; 4];
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        for (i, row) in cells.iter().enumerate() {
            let line: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
            out.push_str(line.join(" | ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                out.push_str(&rule.join("-+-"));
                out.push('\n');
            }
        }
        out
    }

    /// Inverse of [`to_table`](Self::to_table).
    pub fn from_table(text: &str) -> Result<Self, ReportError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| ReportError::Malformed("empty table".into()))?;
        let names: Vec<&str> = header.split('|').map(str::trim).collect();
        if names != HEADER {
            return Err(ReportError::Malformed("unexpected table header".into()));
        }
        lines.next();
        let mut rows = Vec::new();
        for line in lines {
            let parts: Vec<&str> = line.splitn(4, '|').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(ReportError::Malformed(format!("bad row {line:?}")));
            }
            rows.push(MetricRow {
                section: parts[0].into(),
                key: parts[1].into(),
                field: parts[2].into(),
                value: parts[3].into(),
            });
        }
        Ok(Self { rows })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Table => self.to_table(),
        }
    }
}

/// Render a metrics document in the requested format.
pub fn report(metrics: &MetricsReport, format: &str) -> Result<String, ReportError> {
    Ok(metrics.render(format.parse()?))
}
