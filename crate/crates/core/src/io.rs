// SPDX-License-Identifier: Apache-2.0

//! File formats: JSON Lines log-belief traces (optionally gzip-compressed),
//! ground-truth and learned-estimate JSON, and centrality CSV.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CombinationMatrix, MatrixJson, PerronVector};
use crate::likelihood::LikelihoodModel;
use crate::simulator::SimulationTrace;

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub i: usize,
    /// `Λ_i` as N rows of H−1 entries.
    pub lambda: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<usize>,
}

impl TraceRecord {
    pub fn new(i: usize, lambda: &DMatrix<f64>) -> Self {
        Self {
            i,
            lambda: matrix_rows(lambda),
            map: None,
            theta_star: None,
        }
    }

    pub fn lambda_matrix(&self) -> Result<DMatrix<f64>> {
        rows_matrix(&self.lambda)
    }
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if n == 0 || c == 0 {
        return Err(Error::EmptyInput("matrix without rows or columns".into()));
    }
    if rows.iter().any(|r| r.len() != c) {
        return Err(Error::DimensionMismatch("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(n, c, |i, j| rows[i][j]))
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Line-oriented trace writer; compresses when the path ends in `.gz`.
pub struct TraceWriter {
    out: Box<dyn Write + Send>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = BufWriter::new(File::create(path)?);
        let out: Box<dyn Write + Send> = if is_gzip(path) {
            Box::new(GzEncoder::new(file, Compression::default()))
        } else {
            Box::new(file)
        };
        Ok(Self { out })
    }

    pub fn from_writer<W: Write + Send + 'static>(w: W) -> Self {
        Self { out: Box::new(w) }
    }

    pub fn write(&mut self, record: &TraceRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

impl Drop for TraceWriter {
    fn drop(&mut self) {
        let _ = self.out.flush();
    }
}

/// Streams records from a trace file, line by line.
pub struct TraceReader {
    lines: std::io::Lines<Box<dyn BufRead + Send>>,
    line: usize,
}

impl TraceReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let inner: Box<dyn BufRead + Send> = if is_gzip(path) {
            Box::new(BufReader::new(MultiGzDecoder::new(file)))
        } else {
            Box::new(BufReader::new(file))
        };
        Ok(Self::from_bufread(inner))
    }

    pub fn from_bufread(inner: Box<dyn BufRead + Send>) -> Self {
        Self {
            lines: inner.lines(),
            line: 0,
        }
    }
}

impl Iterator for TraceReader {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: self.line,
                reason: e.to_string(),
            }));
        }
    }
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    TraceReader::open(path)?.collect()
}

pub fn write_trace(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let mut w = TraceWriter::create(path)?;
    for r in records {
        w.write(r)?;
    }
    w.finish()
}

impl SimulationTrace {
    pub fn to_records(&self) -> Vec<TraceRecord> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| TraceRecord {
                i,
                lambda: matrix_rows(&s.lambda),
                map: Some(s.map.clone()),
                theta_star: Some(s.theta_star),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationSegment {
    pub start: usize,
    #[serde(rename = "A")]
    pub a: CombinationMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSegment {
    pub start: usize,
    pub theta_star: usize,
}

/// Ground truth behind a trace. Iteration `i` of the trace was generated
/// with the last segment whose `start ≤ i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub delta: f64,
    pub combinations: Vec<CombinationSegment>,
    pub models: LikelihoodModel,
    pub truth: Vec<TruthSegment>,
}

impl TruthFile {
    pub fn from_trace(trace: &SimulationTrace, models: &LikelihoodModel) -> Self {
        let combinations = trace
            .combinations
            .iter()
            .map(|(start, a)| CombinationSegment {
                start: *start,
                a: a.clone(),
            })
            .collect();
        let mut truth: Vec<TruthSegment> = Vec::new();
        for (i, s) in trace.steps.iter().enumerate() {
            if truth.last().is_none_or(|t| t.theta_star != s.theta_star) {
                truth.push(TruthSegment {
                    start: i,
                    theta_star: s.theta_star,
                });
            }
        }
        if truth.is_empty() {
            truth.push(TruthSegment {
                start: 0,
                theta_star: models.truth(),
            });
        }
        Self {
            delta: trace.delta,
            combinations,
            models: models.clone(),
            truth,
        }
    }

    /// Combination matrix in force at iteration `i`.
    pub fn combination_at(&self, i: usize) -> &CombinationMatrix {
        let idx = self.combinations.partition_point(|s| s.start <= i);
        &self.combinations[idx.saturating_sub(1)].a
    }

    pub fn theta_star_at(&self, i: usize) -> usize {
        let idx = self.truth.partition_point(|s| s.start <= i);
        self.truth[idx.saturating_sub(1)].theta_star
    }

    pub fn load(path: &Path) -> Result<Self> {
        let t: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if t.combinations.is_empty() || t.truth.is_empty() {
            return Err(Error::EmptyInput("truth file without segments".into()));
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        serde_json::to_writer(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }
}

/// Final learner estimates: `{"A": {"n", "weights"}, "L_hat": rows}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedJson {
    #[serde(rename = "A")]
    pub a: MatrixJson,
    #[serde(rename = "L_hat")]
    pub llr: Vec<Vec<f64>>,
}

impl LearnedJson {
    pub fn new(a: &DMatrix<f64>, llr: &DMatrix<f64>) -> Self {
        Self {
            a: MatrixJson::from_matrix(a),
            llr: matrix_rows(llr),
        }
    }

    pub fn a_matrix(&self) -> Result<DMatrix<f64>> {
        self.a.to_matrix()
    }

    pub fn llr_matrix(&self) -> Result<DMatrix<f64>> {
        rows_matrix(&self.llr)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), self)?;
        Ok(())
    }
}

/// CSV `agent_id,u`.
pub fn write_perron_csv<W: Write>(u: &PerronVector, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent_id", "u"])?;
    for (k, x) in u.as_slice().iter().enumerate() {
        w.write_record([k.to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
