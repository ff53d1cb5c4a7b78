//! Tables, run reports and their CSV/JSON renderings.

use serde::Serialize;
use serde_json::{json, Value};
use std::io::{self, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Float,
    Int,
    Str,
    Bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Cell {
    pub fn kind(&self) -> Kind {
        match self {
            Cell::F(_) => Kind::Float,
            Cell::I(_) => Kind::Int,
            Cell::S(_) => Kind::Str,
            Cell::B(_) => Kind::Bool,
        }
    }

    /// 17 significant digits, so parsing the text gives back the same f64.
    pub fn render(&self) -> String {
        match self {
            Cell::F(x) if x.is_nan() => "nan".into(),
            Cell::F(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::F(x) => format!("{x:.16e}"),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::F(x) => json!(x),
            Cell::I(i) => json!(i),
            Cell::S(s) => json!(s),
            Cell::B(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::I(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub columns: Vec<(String, Kind)>,
}

impl Schema {
    pub fn new(columns: &[(&str, Kind)]) -> Self {
        Self {
            columns: columns.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
        }
    }

    /// Every row has one cell per column with the declared kind.
    pub fn check(&self, rows: &[Vec<Cell>]) -> io::Result<()> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("row {i} has {} cells, schema has {}", row.len(), self.columns.len()),
                ));
            }
            for (cell, (name, kind)) in row.iter().zip(&self.columns) {
                if cell.kind() != *kind {
                    return Err(io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("row {i} column {name}: expected {kind:?}, got {:?}", cell.kind()),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub schema: Schema,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[(&str, Kind)]) -> Self {
        Self {
            name: name.to_string(),
            schema: Schema::new(columns),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.schema.columns.iter().map(|(n, _)| n.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()
    }

    fn to_json(&self) -> Value {
        json!({
            "name": self.name,
            "columns": self.schema.columns.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }
}

/// Write one table as CSV to `path`, header only when `rows` is empty.
/// Rows are checked against the schema before anything touches the disk.
pub fn emit_table(rows: &[Vec<Cell>], schema: &Schema, path: &Path) -> io::Result<()> {
    schema.check(rows)?;
    let table = Table {
        name: String::new(),
        schema: schema.clone(),
        rows: rows.to_vec(),
    };
    let mut buf = Vec::new();
    table.write_csv(&mut buf)?;
    write_atomic(path, &buf)
}

/// Write through a temporary file in the destination directory and rename it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Efficiency counters. Wall time is only filled in when timing is requested,
/// since it would otherwise break byte-identical reruns.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub proposal_draws: u64,
    pub samples_emitted: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples_per_second: Option<f64>,
}

impl RunReport {
    pub fn new(proposal_draws: u64, samples_emitted: u64) -> Self {
        Self {
            proposal_draws,
            samples_emitted,
            ..Self::default()
        }
    }

    pub fn with_wall(mut self, seconds: f64) -> Self {
        self.wall_seconds = Some(seconds);
        self.samples_per_second = Some(self.samples_emitted as f64 / seconds);
        self
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: &'static str,
    pub config: Value,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub summary: Value,
    pub tables: Vec<Table>,
    pub run: RunReport,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render_csv(&self) -> io::Result<Vec<u8>> {
        for t in &self.tables {
            t.schema.check(&t.rows)?;
        }
        let mut buf = Vec::new();
        writeln!(buf, "# tool: regensim {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(buf, "# command: {}", self.command)?;
        writeln!(buf, "# seed: {}", self.seed)?;
        writeln!(buf, "# config: {}", self.config)?;
        for c in &self.checks {
            let status = if c.pass { "pass" } else { "fail" };
            writeln!(buf, "# check: {} {} {}", c.name, status, c.detail)?;
        }
        writeln!(buf, "# summary: {}", self.summary)?;
        writeln!(buf, "# run: {}", serde_json::to_string(&self.run)?)?;
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                writeln!(buf)?;
            }
            writeln!(buf, "# table: {}", t.name)?;
            t.write_csv(&mut buf)?;
        }
        Ok(buf)
    }

    pub fn render_json(&self) -> io::Result<Vec<u8>> {
        for t in &self.tables {
            t.schema.check(&t.rows)?;
        }
        let doc = json!({
            "tool": format!("regensim {}", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "seed": self.seed,
            "config": self.config,
            "checks": self.checks,
            "summary": self.summary,
            "run": self.run,
            "tables": self.tables.iter().map(Table::to_json).collect::<Vec<_>>(),
        });
        let mut buf = serde_json::to_vec_pretty(&doc)?;
        buf.push(b'\n');
        Ok(buf)
    }
}
