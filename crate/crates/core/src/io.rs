//! File formats: partition and data CSVs, constraint lists, benchmark
//! manifests, JSON reports and CSV tables.
//!
//! All observation indices are 0-based.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{ConstraintPoint, MethodSummary, ProtocolResult, Stat};
use crate::indices::DataMatrix;
use crate::partition::{Ensemble, Partition};
use crate::scoring::{ConstraintSet, ScoreReport};

fn parse_error(path: &str, line: u64, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Rows of trimmed CSV cells with their 1-based line numbers. Blank lines are
/// skipped.
fn csv_rows(text: &str, source: &str) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(source, line, 1, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

/// Ensemble read from a partitions file, with the header names if present.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionsFile {
    pub names: Option<Vec<String>>,
    pub ensemble: Ensemble,
}

/// Parse a label matrix: row `r`, column `c` is the label of observation `r`
/// under model `c`. A first row containing any non-integer cell is a header.
pub fn parse_partitions(text: &str, source: &str) -> Result<PartitionsFile> {
    let mut rows = csv_rows(text, source)?;
    if rows.is_empty() {
        return Err(parse_error(source, 1, 1, "no rows"));
    }
    let names = if rows[0].1.iter().any(|c| c.parse::<usize>().is_err()) {
        Some(rows.remove(0).1)
    } else {
        None
    };
    let width = names
        .as_ref()
        .map_or_else(|| rows.first().map_or(0, |r| r.1.len()), Vec::len);
    if rows.is_empty() {
        return Err(parse_error(source, 2, 1, "header without label rows"));
    }
    if width == 0 {
        return Err(parse_error(source, rows[0].0, 1, "no columns"));
    }
    let mut columns: Vec<Vec<usize>> = vec![Vec::with_capacity(rows.len()); width];
    for (line, cells) in &rows {
        if cells.len() != width {
            return Err(parse_error(
                source,
                *line,
                cells.len().min(width) + 1,
                format!("expected {width} columns, found {}", cells.len()),
            ));
        }
        for (c, cell) in cells.iter().enumerate() {
            let label = cell.parse::<usize>().map_err(|_| {
                parse_error(source, *line, c + 1, format!("`{cell}` is not a non-negative integer"))
            })?;
            columns[c].push(label);
        }
    }
    Ok(PartitionsFile {
        names,
        ensemble: Ensemble::from_labels(&columns)?,
    })
}

pub fn read_partitions(path: &Path) -> Result<PartitionsFile> {
    parse_partitions(&read_text(path)?, &path.display().to_string())
}

/// Single-column label file (targets or ground truth).
pub fn read_labels(path: &Path) -> Result<Partition> {
    let file = read_partitions(path)?;
    if file.ensemble.len() != 1 {
        return Err(parse_error(
            &path.display().to_string(),
            1,
            2,
            format!("expected one label column, found {}", file.ensemble.len()),
        ));
    }
    Ok(file.ensemble.partitions()[0].clone())
}

/// Write labels as CSV with a `model_0,model_1,...` header.
pub fn write_partitions<W: Write>(models: &[&[usize]], mut w: W) -> Result<()> {
    let n = models.first().map_or(0, |m| m.len());
    let header: Vec<String> = (0..models.len()).map(|c| format!("model_{c}")).collect();
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for r in 0..n {
        line.clear();
        for (c, m) in models.iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            write!(line, "{}", m[r]).expect("writing to a String");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_ensemble<W: Write>(ensemble: &Ensemble, w: W) -> Result<()> {
    let cols: Vec<&[usize]> = ensemble.partitions().iter().map(|p| p.labels()).collect();
    write_partitions(&cols, w)
}

/// Numeric CSV, one observation per row. A non-numeric first row is a header.
pub fn parse_data(text: &str, source: &str) -> Result<DataMatrix> {
    let mut rows = csv_rows(text, source)?;
    if rows.is_empty() {
        return Err(parse_error(source, 1, 1, "no rows"));
    }
    if rows[0].1.iter().any(|c| c.parse::<f64>().is_err()) {
        rows.remove(0);
    }
    let d = rows.first().map_or(0, |r| r.1.len());
    let mut values = Vec::with_capacity(rows.len() * d);
    for (line, cells) in &rows {
        if cells.len() != d {
            return Err(parse_error(
                source,
                *line,
                cells.len().min(d) + 1,
                format!("expected {d} columns, found {}", cells.len()),
            ));
        }
        for (c, cell) in cells.iter().enumerate() {
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(source, *line, c + 1, format!("`{cell}` is not a finite number")))?;
            values.push(v);
        }
    }
    DataMatrix::new(rows.len(), d, values)
}

pub fn read_data(path: &Path) -> Result<DataMatrix> {
    parse_data(&read_text(path)?, &path.display().to_string())
}

/// Parse `ML i j` / `CL i j` lines. `#` starts a comment. Indices must be
/// below `n` when given.
pub fn parse_constraints(text: &str, source: &str, n: Option<usize>) -> Result<ConstraintSet> {
    let mut ml: Vec<(usize, usize, u64)> = Vec::new();
    let mut cl: Vec<(usize, usize, u64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let content = raw.split('#').next().unwrap_or("");
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 3 {
            return Err(parse_error(
                source,
                line_no,
                1,
                format!("expected `ML i j` or `CL i j`, found `{}`", content.trim()),
            ));
        }
        let column_of = |k: usize| raw.find(fields[k]).map_or(1, |p| p + 1);
        let index = |k: usize| -> Result<usize> {
            let v = fields[k].parse::<usize>().map_err(|_| {
                parse_error(source, line_no, column_of(k), format!("`{}` is not an index", fields[k]))
            })?;
            if let Some(n) = n {
                if v >= n {
                    return Err(parse_error(
                        source,
                        line_no,
                        column_of(k),
                        format!("index {v} out of range for {n} observations"),
                    ));
                }
            }
            Ok(v)
        };
        let (a, b) = (index(1)?, index(2)?);
        if a == b {
            return Err(parse_error(source, line_no, column_of(1), "self-pair"));
        }
        let pair = (a.min(b), a.max(b), line_no);
        match fields[0].to_ascii_uppercase().as_str() {
            "ML" => ml.push(pair),
            "CL" => cl.push(pair),
            other => {
                return Err(parse_error(
                    source,
                    line_no,
                    column_of(0),
                    format!("unknown constraint kind `{other}`"),
                ))
            }
        }
    }
    for &(a, b, line) in &cl {
        if ml.iter().any(|&(x, y, _)| (x, y) == (a, b)) {
            return Err(parse_error(
                source,
                line,
                1,
                format!("pair ({a}, {b}) is both must-link and cannot-link"),
            ));
        }
    }
    ConstraintSet::new(
        ml.into_iter().map(|(a, b, _)| (a, b)),
        cl.into_iter().map(|(a, b, _)| (a, b)),
    )
}

pub fn read_constraints(path: &Path, n: Option<usize>) -> Result<ConstraintSet> {
    parse_constraints(&read_text(path)?, &path.display().to_string(), n)
}

pub fn write_constraints<W: Write>(cs: &ConstraintSet, mut w: W) -> Result<()> {
    for (a, b) in cs.must_link() {
        writeln!(w, "ML {a} {b}")?;
    }
    for (a, b) in cs.cannot_link() {
        writeln!(w, "CL {a} {b}")?;
    }
    Ok(())
}

/// Provenance block attached to every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        Metadata {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile<T> {
    pub metadata: Metadata,
    pub report: T,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

/// `rank,model,score` lines, best first, with 1-based ranks.
pub fn ranking_csv(report: &ScoreReport) -> String {
    let mut out = String::from("rank,model,score\n");
    for (r, &t) in report.ranking.iter().enumerate() {
        writeln!(out, "{},{},{}", r + 1, t, report.totals[t]).expect("writing to a String");
    }
    out
}

/// Dense square matrix as CSV without a header.
pub fn matrix_csv<T: std::fmt::Display>(rows: &[Vec<T>]) -> String {
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// One benchmark entry. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub partitions: PathBuf,
    pub targets: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub datasets: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<(Manifest, PathBuf)> {
        let manifest: Manifest = read_json(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }
}

fn fmt_stat(s: &Stat) -> String {
    match (s.mean, s.std) {
        (Some(m), Some(sd)) => format!("{m:.3}±{sd:.3}"),
        _ => "NA".to_string(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"))
}

/// Methods × dataset-groups tables: `(file suffix, csv text)`.
pub fn protocol_tables(result: &ProtocolResult) -> Vec<(&'static str, String)> {
    let mut columns: Vec<(&str, &[MethodSummary])> = vec![("all", &result.summary)];
    for g in &result.groups {
        columns.push((g.group.as_str(), &g.methods));
    }
    let header = {
        let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
        format!("method,{}\n", names.join(","))
    };
    let table = |cell: &dyn Fn(&MethodSummary) -> String| -> String {
        let mut out = header.clone();
        for (m, method) in result.methods.iter().enumerate() {
            let cells: Vec<String> = columns.iter().map(|c| cell(&c.1[m])).collect();
            writeln!(out, "{},{}", method, cells.join(",")).expect("writing to a String");
        }
        out
    };
    let mut tables = vec![
        ("kendall", table(&|s| fmt_stat(&s.kendall))),
        ("pearson", table(&|s| fmt_stat(&s.pearson))),
        ("regret_kendall", table(&|s| fmt_opt(s.regret_kendall))),
        ("regret_pearson", table(&|s| fmt_opt(s.regret_pearson))),
        ("regret_ari", table(&|s| fmt_opt(s.regret_ari))),
    ];
    if let Some(curve) = &result.constraint_curve {
        tables.push(("constraints", constraint_table(curve)));
    }
    tables
}

fn constraint_table(curve: &[ConstraintPoint]) -> String {
    let mut out =
        String::from("observations,method,kendall_mean,kendall_std,pearson_mean,pearson_std,count\n");
    for p in curve {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.observations,
            p.method,
            fmt_opt(p.kendall.mean),
            fmt_opt(p.kendall.std),
            fmt_opt(p.pearson.mean),
            fmt_opt(p.pearson.std),
            p.kendall.count
        )
        .expect("writing to a String");
    }
    out
}
