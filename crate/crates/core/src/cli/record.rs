//! Result records and their two serializations: JSON Lines (`records`) and
//! flat CSV (`csv`). Both are described in `schema/` at the repository root.

use serde::{Deserialize, Serialize};

use super::config::{Command, ExperimentConfig, OutputFormat};
use crate::qkd::QkdSessionReport;

pub const TOOL_NAME: &str = "pbs-entangle";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordHeader {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config_hash: String,
    pub config: ExperimentConfig,
}

/// One named result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ResultEntry {
    Scalar {
        name: String,
        value: f64,
    },
    Series {
        name: String,
        x: Vec<f64>,
        y: Vec<f64>,
    },
    /// `values[i][j]` at `(x[i], y[j])`.
    Surface {
        name: String,
        x: Vec<f64>,
        y: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
    QkdReport {
        name: String,
        report: QkdSessionReport,
    },
}

impl ResultEntry {
    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        ResultEntry::Scalar {
            name: name.into(),
            value,
        }
    }

    pub fn series(name: impl Into<String>, points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let (x, y) = points.into_iter().unzip();
        ResultEntry::Series {
            name: name.into(),
            x,
            y,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ResultEntry::Scalar { name, .. }
            | ResultEntry::Series { name, .. }
            | ResultEntry::Surface { name, .. }
            | ResultEntry::QkdReport { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
enum RecordLine {
    Header(RecordHeader),
    #[serde(untagged)]
    Entry(ResultEntry),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub header: RecordHeader,
    pub entries: Vec<ResultEntry>,
}

impl ResultRecord {
    pub fn new(command: Command, config: &ExperimentConfig) -> Self {
        let experiment = ExperimentConfig {
            command: Some(command),
            ..config.experiment()
        };
        Self {
            header: RecordHeader {
                tool: TOOL_NAME.into(),
                version: TOOL_VERSION.into(),
                command,
                config_hash: experiment.hash(),
                config: experiment,
            },
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, entry: ResultEntry) {
        self.entries.push(entry);
    }

    pub fn get(&self, name: &str) -> Option<&ResultEntry> {
        self.entries.iter().find(|e| e.name() == name)
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        match self.get(name)? {
            ResultEntry::Scalar { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Records => self.to_json_lines(),
            OutputFormat::Csv => self.to_csv(),
        }
    }

    /// Header line followed by one line per entry.
    pub fn to_json_lines(&self) -> String {
        let mut out = serde_json::to_string(&RecordLine::Header(self.header.clone()))
            .expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = match lines.next().map(serde_json::from_str::<RecordLine>) {
            Some(Ok(RecordLine::Header(h))) => h,
            Some(Ok(_)) => return Err("first line is not a header".into()),
            Some(Err(e)) => return Err(e.to_string()),
            None => return Err("empty record".into()),
        };
        let entries = lines
            .map(|l| serde_json::from_str::<ResultEntry>(l).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        Ok(Self { header, entries })
    }

    /// Columns `command,config_hash,name,x,y,value`; one row per number.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let cmd = self.header.command.name();
        let hash = self.header.config_hash.as_str();
        let mut row = |name: &str, x: Option<f64>, y: Option<f64>, value: f64| {
            let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([cmd, hash, name, &fmt(x), &fmt(y), &value.to_string()])
                .expect("in-memory csv write");
        };
        for e in &self.entries {
            match e {
                ResultEntry::Scalar { name, value } => row(name, None, None, *value),
                ResultEntry::Series { name, x, y } => {
                    for (xi, yi) in x.iter().zip(y) {
                        row(name, Some(*xi), None, *yi);
                    }
                }
                ResultEntry::Surface { name, x, y, values } => {
                    for (xi, line) in x.iter().zip(values) {
                        for (yj, v) in y.iter().zip(line) {
                            row(name, Some(*xi), Some(*yj), *v);
                        }
                    }
                }
                ResultEntry::QkdReport { name, report } => {
                    let value = serde_json::to_value(report).expect("report serializes");
                    for (field, v) in value.as_object().expect("report is an object") {
                        let key = format!("{name}.{field}");
                        match v {
                            serde_json::Value::Array(items) => {
                                for (i, item) in items.iter().enumerate() {
                                    row(&key, Some(i as f64), None, item.as_f64().unwrap_or(0.0));
                                }
                            }
                            other => {
                                if let Some(f) = other.as_f64() {
                                    row(&key, None, None, f);
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut header = csv::Writer::from_writer(Vec::new());
        header
            .write_record(["command", "config_hash", "name", "x", "y", "value"])
            .expect("in-memory csv write");
        let mut bytes = header.into_inner().expect("flush");
        bytes.extend(w.into_inner().expect("flush"));
        String::from_utf8(bytes).expect("csv is utf-8")
    }
}
