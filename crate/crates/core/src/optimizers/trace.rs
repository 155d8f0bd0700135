use std::io::{Read, Write};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::fmt::sig6;
use crate::scalar::Scalar;

/// State after iteration `t` (record 0 is the initial point).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    pub t: usize,
    pub x: Vec<T>,
    pub f: T,
    pub g: Vec<T>,
    pub h: Vec<T>,
    pub lambda: Vec<T>,
    pub mu: Vec<T>,
    /// Infinity norm of the domain-projected primal direction.
    pub stationarity: T,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub seed: u64,
    pub scheme: String,
    pub primal: String,
    pub dual: String,
    pub iterations: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub records: Vec<TraceRecord<T>>,
    pub metadata: RunMetadata,
}

impl<T: Scalar> Trace<T> {
    pub fn last(&self) -> &TraceRecord<T> {
        self.records.last().expect("a trace always holds the initial record")
    }

    pub fn final_x(&self) -> &[T] {
        &self.last().x
    }

    /// Series of primal coordinate `index` across all records.
    pub fn coordinate(&self, index: usize) -> Vec<T> {
        self.records.iter().map(|r| r.x[index]).collect()
    }

    /// Column names: `iter, x_*, f, g_*, h_*, lambda_*, mu_*, stationarity, feasible`.
    pub fn csv_header(d: usize, m: usize, n: usize) -> Vec<String> {
        let mut cols = vec!["iter".to_string()];
        cols.extend((0..d).map(|i| format!("x_{i}")));
        cols.push("f".into());
        cols.extend((0..m).map(|i| format!("g_{i}")));
        cols.extend((0..n).map(|i| format!("h_{i}")));
        cols.extend((0..m).map(|i| format!("lambda_{i}")));
        cols.extend((0..n).map(|i| format!("mu_{i}")));
        cols.push("stationarity".into());
        cols.push("feasible".into());
        cols
    }

    /// Numbers are written with six significant digits; the wall time is not
    /// written, so equal runs give byte-identical files.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let first = &self.records[0];
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::csv_header(first.x.len(), first.g.len(), first.h.len()))?;
        let num = |v: T| sig6(v.to_f64_lossy());
        for r in &self.records {
            let mut row = vec![r.t.to_string()];
            row.extend(r.x.iter().map(|&v| num(v)));
            row.push(num(r.f));
            row.extend(r.g.iter().map(|&v| num(v)));
            row.extend(r.h.iter().map(|&v| num(v)));
            row.extend(r.lambda.iter().map(|&v| num(v)));
            row.extend(r.mu.iter().map(|&v| num(v)));
            row.push(num(r.stationarity));
            row.push(if r.feasible { "1" } else { "0" }.into());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parse a trace CSV written by [`Trace::write_csv`]. Metadata is not
    /// stored in the file and comes back empty.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let count = |prefix: &str| headers.iter().filter(|h| h.starts_with(prefix)).count();
        let (d, m, n) = (count("x_"), count("g_"), count("h_"));
        let expected = Self::csv_header(d, m, n);
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!("unexpected trace header {headers:?}")));
        }
        let mut records = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| -> Result<T> {
                rec[i]
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Parse(format!("row {row}, column {i}: {e}")))
            };
            let block = |start: usize, len: usize| -> Result<Vec<T>> { (start..start + len).map(field).collect() };
            let t = rec[0]
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("row {row}, iter: {e}")))?;
            let mut at = 1;
            let x = block(at, d)?;
            at += d;
            let f = field(at)?;
            at += 1;
            let g = block(at, m)?;
            at += m;
            let h = block(at, n)?;
            at += n;
            let lambda = block(at, m)?;
            at += m;
            let mu = block(at, n)?;
            at += n;
            let stationarity = field(at)?;
            let feasible = match &rec[at + 1] {
                "1" => true,
                "0" => false,
                other => return Err(Error::Parse(format!("row {row}, feasible flag {other:?}"))),
            };
            records.push(TraceRecord { t, x, f, g, h, lambda, mu, stationarity, feasible });
        }
        if records.is_empty() {
            return Err(Error::Parse("trace has no records".into()));
        }
        Ok(Trace {
            records,
            metadata: RunMetadata {
                seed: 0,
                scheme: String::new(),
                primal: String::new(),
                dual: String::new(),
                iterations: 0,
                wall_time: Duration::ZERO,
            },
        })
    }
}
