//! Writers and readers for records, datasets, traces and summaries.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::experiment::{Aggregate, DecayFit, ExperimentResult, Record};
use crate::error::{Error, Result};
use crate::models::Dataset;

pub const RECORD_HEADER: [&str; 7] = ["experiment", "n", "trial", "error", "runtime_ms", "converged", "seed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
    Table,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json-lines" => Ok(Format::Jsonl),
            "table" => Ok(Format::Table),
            other => Err(Error::config(format!("unknown format {other:?}"))),
        }
    }
}

/// Floats are written with Rust's shortest round-trip representation, so
/// parsing the CSV gives back bit-identical values.
pub fn write_records<W: Write>(records: &[Record], format: Format, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(RECORD_HEADER)?;
            for r in records {
                w.write_record([
                    r.experiment.clone(),
                    r.n.to_string(),
                    r.trial.to_string(),
                    r.error.to_string(),
                    r.runtime_ms.to_string(),
                    r.converged.to_string(),
                    r.seed.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Format::Jsonl => {
            let mut out = out;
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = records
                .iter()
                .map(|r| {
                    vec![
                        r.experiment.clone(),
                        r.n.to_string(),
                        r.trial.to_string(),
                        format!("{:.6e}", r.error),
                        format!("{:.3}", r.runtime_ms),
                        r.converged.to_string(),
                        r.seed.to_string(),
                    ]
                })
                .collect();
            write_table(&RECORD_HEADER, &rows, out)?;
        }
    }
    Ok(())
}

/// Parses CSV or JSON lines written by [`write_records`]. Tables are for
/// reading by people and are rejected.
pub fn read_records<R: Read>(format: Format, input: R) -> Result<Vec<Record>> {
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(input);
            let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
            if header != RECORD_HEADER {
                return Err(Error::Parse(format!("unexpected results header {header:?}")));
            }
            r.deserialize().map(|row| row.map_err(Error::from)).collect()
        }
        Format::Jsonl => {
            let mut text = String::new();
            let mut input = input;
            input.read_to_string(&mut text)?;
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).map_err(Error::from))
                .collect()
        }
        Format::Table => Err(Error::config("table output cannot be parsed back")),
    }
}

pub fn write_records_path(records: &[Record], format: Format, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_records(records, format, std::io::BufWriter::new(file))
}

pub fn read_records_path(path: &Path) -> Result<Vec<Record>> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => Format::Jsonl,
        _ => Format::Csv,
    };
    read_records(format, std::fs::File::open(path)?)
}

/// Left-aligned, space-padded columns.
pub fn write_table<W: Write, S: AsRef<str>>(header: &[S], rows: &[Vec<String>], mut out: W) -> Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.as_ref().len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{c:<w$}");
        }
        s.trim_end().to_owned()
    };
    writeln!(out, "{}", line(header.iter().map(|h| h.as_ref()).collect()))?;
    for row in rows {
        writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

/// Dataset as CSV with columns `x1..xp,y`.
pub fn write_dataset<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = data.p();
    let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = (0..p).map(|j| data.inputs[(i, j)].to_string()).collect();
        row.push(data.outputs[i].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let cols = header.len();
    if cols < 2 || header.get(cols - 1) != Some("y") {
        return Err(Error::Parse("dataset CSV must end with a y column".into()));
    }
    let p = cols - 1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in r.records() {
        let row = row?;
        for j in 0..p {
            xs.push(parse_f64(&row[j])?);
        }
        ys.push(parse_f64(&row[p])?);
    }
    let n = ys.len();
    Dataset::new(DMatrix::from_row_slice(n, p, &xs), DVector::from_vec(ys))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

/// Objective trace as CSV with columns `iteration,objective`.
pub fn write_trace<W: Write>(trace: &[f64], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "objective"])?;
    for (i, f) in trace.iter().enumerate() {
        w.write_record([i.to_string(), f.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub records: usize,
    pub aggregates: Vec<Aggregate>,
    pub decay: Option<DecayFit>,
}

impl From<&ExperimentResult> for Summary {
    fn from(r: &ExperimentResult) -> Self {
        Summary {
            name: r.name.clone(),
            config_hash: r.config_hash.clone(),
            master_seed: r.master_seed,
            records: r.records.len(),
            aggregates: r.aggregates.clone(),
            decay: r.decay,
        }
    }
}

pub fn write_summary<W: Write>(result: &ExperimentResult, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &Summary::from(result))?;
    Ok(())
}

/// Aggregates as a table or CSV (`n,median,q25,q75,trials,converged`).
pub fn write_aggregates<W: Write>(aggs: &[Aggregate], format: Format, mut out: W) -> Result<()> {
    match format {
        Format::Jsonl => {
            for a in aggs {
                serde_json::to_writer(&mut out, a)?;
                out.write_all(b"\n")?;
            }
            Ok(())
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for a in aggs {
                w.serialize(a)?;
            }
            w.flush()?;
            Ok(())
        }
        Format::Table => {
            let rows: Vec<Vec<String>> = aggs
                .iter()
                .map(|a| {
                    vec![
                        a.n.to_string(),
                        format!("{:.6e}", a.median),
                        format!("{:.6e}", a.q25),
                        format!("{:.6e}", a.q75),
                        a.trials.to_string(),
                        a.converged.to_string(),
                    ]
                })
                .collect();
            write_table(&["n", "median", "q25", "q75", "trials", "converged"], &rows, out)
        }
    }
}
