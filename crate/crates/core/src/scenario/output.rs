//! Result records and their CSV / JSON files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ScenarioError, ScenarioResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format `{other}` (expected csv, json or both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Flag(bool),
    Text(String),
}

impl Value {
    /// Numeric form used in CSV tables; flags become 0 or 1.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(v) => Some(*v),
            Value::Flag(b) => Some(*b as u8 as f64),
            Value::Text(_) => None,
        }
    }
}

/// A named output with its unit (`"dimensionless"` when it has none).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub value: Value,
    pub unit: String,
}

impl Quantity {
    pub fn number(name: &str, value: f64, unit: &str) -> Self {
        Self {
            name: name.into(),
            value: Value::Number(value),
            unit: unit.into(),
        }
    }

    pub fn flag(name: &str, value: bool) -> Self {
        Self {
            name: name.into(),
            value: Value::Flag(value),
            unit: "boolean".into(),
        }
    }

    pub fn text(name: &str, value: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            value: Value::Text(value.into()),
            unit: "text".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            columns: columns
                .iter()
                .map(|(n, u)| Column {
                    name: (*n).into(),
                    unit: (*u).into(),
                })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Header row plus one line per row, LF endings. `f64` Display gives the
    /// shortest text that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = self
            .columns
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join(",");
        out.push('\n');
        for row in &self.rows {
            let line = row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub tool_version: String,
    pub scenario_hash: String,
    pub timestamp: String,
    pub mode: String,
    pub seed: u64,
    pub outputs: Vec<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Series>,
}

impl ResultRecord {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.outputs.iter().find(|q| q.name == name).map(|q| &q.value)
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(Value::as_f64)
    }
}

pub fn tool_version() -> String {
    match option_env!("CLOCKNET_GIT_REV") {
        Some(rev) => format!("v{}-g{rev}", env!("CARGO_PKG_VERSION")),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct WrittenFiles {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub extra: Vec<PathBuf>,
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
fn write_atomic(path: &Path, contents: &[u8]) -> ScenarioResult<()> {
    let io = |e: std::io::Error| ScenarioError::Io(format!("{}: {e}", path.display()));
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Writes `<stem>.csv` (the series), `<stem>.json` (the record) and any extra
/// `(suffix, contents)` artifacts as `<stem>.<suffix>`.
pub fn write_outputs(
    record: &ResultRecord,
    extra: &[(String, String)],
    dir: &Path,
    stem: &str,
    format: OutputFormat,
) -> ScenarioResult<WrittenFiles> {
    std::fs::create_dir_all(dir).map_err(|e| ScenarioError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = WrittenFiles::default();
    if format.csv() {
        if let Some(series) = &record.series {
            let path = dir.join(format!("{stem}.csv"));
            write_atomic(&path, series.to_csv().as_bytes())?;
            written.csv = Some(path);
        }
    }
    if format.json() {
        let path = dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(record).map_err(|e| ScenarioError::Io(e.to_string()))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        written.json = Some(path);
    }
    for (suffix, contents) in extra {
        let path = dir.join(format!("{stem}.{suffix}"));
        write_atomic(&path, contents.as_bytes())?;
        written.extra.push(path);
    }
    Ok(written)
}
