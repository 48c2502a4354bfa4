//! File formats: problem and result documents (JSON) and residual traces (CSV).
//!
//! Matrices are nested row-major arrays. Floats are written in the shortest
//! form that parses back to the same `f64`, so a written problem reads back
//! bit-for-bit.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::admm::{Mode, ResidualRecord, ResidualTrace};
use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows};
use crate::lmi::LocalCertificate;
use crate::model::{InterconnectionProblem, Subsystem};
use crate::synthesis::{SynthesisResult, VerificationReport};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SubsystemDoc {
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B")]
    b: Rows,
    #[serde(rename = "G")]
    g: Rows,
    #[serde(rename = "C")]
    c: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterconnectionDoc {
    wy: Rows,
    wd: Rows,
    zy: Rows,
    zd: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    subsystems: Vec<SubsystemDoc>,
    #[serde(rename = "M")]
    m: InterconnectionDoc,
    n_d: usize,
    n_z: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<Mode>,
}

/// A problem plus the synthesis mode stored alongside it, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub problem: InterconnectionProblem,
    pub mode: Option<Mode>,
}

impl ProblemFile {
    pub fn new(problem: InterconnectionProblem, mode: Option<Mode>) -> Self {
        Self { problem, mode }
    }

    /// Parses and validates a problem document. Syntax errors carry the line
    /// and column reported by the JSON parser.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ProblemDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let subsystems = doc
            .subsystems
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let ctx = |name: &str, e: Error| Error::Format(format!("subsystem {}: {name}: {e}", i + 1));
                let a = from_rows(&s.a, s.a.len()).map_err(|e| ctx("A", e))?;
                let n = a.nrows();
                let b = from_rows(&s.b, 0).map_err(|e| ctx("B", e))?;
                let g = from_rows(&s.g, 0).map_err(|e| ctx("G", e))?;
                let c = from_rows(&s.c, n).map_err(|e| ctx("C", e))?;
                // row-less B/G are only valid for n = 0, where the column count is unknowable
                Ok(Subsystem::new(a, b, g, c))
            })
            .collect::<Result<Vec<_>>>()?;
        let n_w: usize = subsystems.iter().map(|s| s.g.ncols()).sum();
        let n_y: usize = subsystems.iter().map(|s| s.c.nrows()).sum();
        let block = |name: &str, rows: &Rows, cols: usize| {
            from_rows(rows, cols).map_err(|e| Error::Format(format!("M.{name}: {e}")))
        };
        let problem = InterconnectionProblem {
            m_wy: block("wy", &doc.m.wy, n_y)?,
            m_wd: block("wd", &doc.m.wd, doc.n_d)?,
            m_zy: block("zy", &doc.m.zy, n_y)?,
            m_zd: block("zd", &doc.m.zd, doc.n_d)?,
            subsystems,
            n_d: doc.n_d,
            n_z: doc.n_z,
        };
        let problem = fix_empty_rows(problem, n_w);
        problem.ensure_valid()?;
        Ok(Self { problem, mode: doc.mode })
    }

    pub fn to_json(&self) -> String {
        let p = &self.problem;
        let doc = ProblemDoc {
            subsystems: p
                .subsystems
                .iter()
                .map(|s| SubsystemDoc { a: to_rows(&s.a), b: to_rows(&s.b), g: to_rows(&s.g), c: to_rows(&s.c) })
                .collect(),
            m: InterconnectionDoc {
                wy: to_rows(&p.m_wy),
                wd: to_rows(&p.m_wd),
                zy: to_rows(&p.m_zy),
                zd: to_rows(&p.m_zd),
            },
            n_d: p.n_d,
            n_z: p.n_z,
            mode: self.mode,
        };
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json().as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

/// Matrices with zero rows lose their column count in nested-array form;
/// the problem dimensions restore it.
fn fix_empty_rows(mut p: InterconnectionProblem, n_w: usize) -> InterconnectionProblem {
    if p.m_wy.nrows() == 0 && n_w == 0 {
        p.m_wy = DMatrix::zeros(0, p.m_wy.ncols());
    }
    if p.m_zy.nrows() == 0 {
        p.m_zy = DMatrix::zeros(0, p.n_y());
    }
    if p.m_zd.nrows() == 0 {
        p.m_zd = DMatrix::zeros(0, p.n_d);
    }
    for s in &mut p.subsystems {
        if s.b.nrows() == 0 {
            s.b = DMatrix::zeros(s.a.nrows(), 0);
        }
        if s.g.nrows() == 0 {
            s.g = DMatrix::zeros(s.a.nrows(), 0);
        }
    }
    p
}

#[derive(Debug, Clone, Serialize)]
struct CertificateDoc {
    #[serde(rename = "S")]
    s: Rows,
    #[serde(rename = "P")]
    p: Rows,
    #[serde(rename = "Y")]
    y: Rows,
}

impl From<&LocalCertificate> for CertificateDoc {
    fn from(c: &LocalCertificate) -> Self {
        Self { s: to_rows(&c.s), p: to_rows(&c.p), y: to_rows(&c.y) }
    }
}

#[derive(Debug, Clone, Serialize)]
struct ResultDoc<'a> {
    status: String,
    mode: Mode,
    admm_status: String,
    iterations: usize,
    eta: Option<f64>,
    bound: Option<f64>,
    gains: Vec<Rows>,
    certificates: Vec<CertificateDoc>,
    verification: Option<&'a VerificationReport>,
    failures: Vec<String>,
}

/// JSON document with gains, certificates, `eta` and the verification report.
pub fn result_json(result: &SynthesisResult) -> String {
    let doc = ResultDoc {
        status: result.status.to_string(),
        mode: result.mode,
        admm_status: result.admm_status.to_string(),
        iterations: result.iterations,
        eta: result.eta,
        bound: result.bound,
        gains: result.gains.iter().map(to_rows).collect(),
        certificates: result.certificates.iter().map(CertificateDoc::from).collect(),
        verification: result.report.as_ref(),
        failures: result.report.as_ref().map(|r| r.failures()).unwrap_or_default(),
    };
    // non-finite values (an unbounded norm, say) become null
    serde_json::to_string_pretty(&doc).expect("plain data serializes")
}

pub fn write_result(result: &SynthesisResult, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, result_json(result) + "\n")?;
    Ok(())
}

/// One CSV row of a residual trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub eta: Option<f64>,
    pub elapsed_ms: f64,
}

impl From<&ResidualRecord> for TraceRow {
    fn from(r: &ResidualRecord) -> Self {
        Self { k: r.k, primal_residual: r.primal, dual_residual: r.dual, eta: r.eta, elapsed_ms: r.elapsed_ms }
    }
}

pub const TRACE_HEADER: &str = "k,primal_residual,dual_residual,eta,elapsed_ms";

/// Writes the trace as CSV; `eta` is left empty in stabilize mode.
pub fn write_trace<W: Write>(trace: &ResidualTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &trace.records {
        w.serialize(TraceRow::from(r)).map_err(csv_error)?;
    }
    if trace.records.is_empty() {
        w.write_record(TRACE_HEADER.split(',')).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(trace: &ResidualTrace, path: impl AsRef<Path>) -> Result<()> {
    write_trace(trace, std::fs::File::create(path)?)
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if header.join(",") != TRACE_HEADER {
        return Err(Error::Format(format!("unexpected trace header {:?}", header.join(","))));
    }
    let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>().map_err(csv_error)?;
    if rows.iter().enumerate().any(|(i, row)| row.k != i + 1) {
        return Err(Error::Format("trace iterations must count up from 1".into()));
    }
    Ok(rows)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("trace: {e}"))
}
