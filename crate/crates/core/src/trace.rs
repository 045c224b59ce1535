//! Convergence traces keyed by per-block oracle counts, stopping policies,
//! and reference optima.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::BlockVector;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("stopping policy must set a target or an iteration cap")]
    EmptyPolicy,
    #[error("stopping target requires a reference optimum, none was supplied")]
    MissingReference,
    #[error("malformed trace CSV at line {line}: {msg}")]
    MalformedCsv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A known optimum used for gaps and Lyapunov diagnostics.
///
/// Closed-form for quadratics; a persisted high-accuracy run otherwise.
#[derive(Debug, Clone)]
pub struct Reference {
    pub optimum: BlockVector,
    pub f_star: f64,
}

/// When to stop a solver run.
///
/// `f_gap` and `psi_ratio` are targets against a supplied [`Reference`];
/// `max_outer` caps the iteration count. Solvers with a target but no
/// explicit cap derive a safety cap of `ceil(10 sqrt(kappa) ln(1/eps))` from
/// their own condition number and error if they hit it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct StoppingPolicy {
    pub f_gap: Option<f64>,
    pub psi_ratio: Option<f64>,
    pub max_outer: Option<usize>,
}

impl StoppingPolicy {
    pub fn f_gap(eps: f64) -> Self {
        Self {
            f_gap: Some(eps),
            ..Self::default()
        }
    }

    pub fn psi_ratio(ratio: f64) -> Self {
        Self {
            psi_ratio: Some(ratio),
            ..Self::default()
        }
    }

    pub fn max_outer(k: usize) -> Self {
        Self {
            max_outer: Some(k),
            ..Self::default()
        }
    }

    pub fn with_max_outer(mut self, k: usize) -> Self {
        self.max_outer = Some(k);
        self
    }

    pub fn validate(&self, has_reference: bool) -> Result<(), TraceError> {
        if self.f_gap.is_none() && self.psi_ratio.is_none() && self.max_outer.is_none() {
            return Err(TraceError::EmptyPolicy);
        }
        if (self.f_gap.is_some() || self.psi_ratio.is_some()) && !has_reference {
            return Err(TraceError::MissingReference);
        }
        Ok(())
    }

    /// Tightest requested accuracy, used to derive safety caps.
    pub fn tightest_eps(&self) -> Option<f64> {
        match (self.f_gap, self.psi_ratio) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) => Some(a),
            (None, Some(b)) => Some(b),
            (None, None) => None,
        }
    }

    /// `ceil(10 sqrt(kappa) ln(1/eps))` with the log clamped below at 1.
    pub fn safety_cap(&self, kappa: f64) -> Option<usize> {
        if let Some(k) = self.max_outer {
            return Some(k);
        }
        self.tightest_eps()
            .map(|eps| (10.0 * kappa.sqrt() * (1.0 / eps).ln().max(1.0)).ceil() as usize)
    }
}

/// One sampled instant of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub outer_iter: u64,
    pub grad_x_calls: u64,
    pub grad_y_calls: u64,
    /// Objective value at the recorded iterate (not written to CSV).
    pub f_value: f64,
    /// `f_value - f_star`; NaN when no reference is available.
    pub f_gap: f64,
    pub wall_time_s: f64,
    pub psi: Option<f64>,
    pub lemma1_residual: Option<f64>,
    pub contraction_ratio: Option<f64>,
}

/// Convergence history of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    /// Whether the optional diagnostic columns are populated.
    pub diagnostics: bool,
}

impl Trace {
    pub fn new(diagnostics: bool) -> Self {
        Self {
            rows: Vec::new(),
            diagnostics,
        }
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn final_f_gap(&self) -> Option<f64> {
        self.last().map(|r| r.f_gap)
    }

    pub fn csv_header(&self) -> &'static str {
        if self.diagnostics {
            "outer_iter,grad_x_calls,grad_y_calls,f_gap,wall_time_s,psi,lemma1_residual,contraction_ratio"
        } else {
            "outer_iter,grad_x_calls,grad_y_calls,f_gap,wall_time_s"
        }
    }

    /// Writes the pinned CSV schema:
    /// `outer_iter,grad_x_calls,grad_y_calls,f_gap,wall_time_s[,psi,lemma1_residual,contraction_ratio]`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        for r in &self.rows {
            write!(
                w,
                "{},{},{},{:e},{:.6}",
                r.outer_iter, r.grad_x_calls, r.grad_y_calls, r.f_gap, r.wall_time_s
            )?;
            if self.diagnostics {
                write!(
                    w,
                    ",{:e},{:e},{:e}",
                    r.psi.unwrap_or(f64::NAN),
                    r.lemma1_residual.unwrap_or(f64::NAN),
                    r.contraction_ratio.unwrap_or(f64::NAN)
                )?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Parses a trace written by [`write_csv`](Self::write_csv).
    pub fn from_csv_str(text: &str) -> Result<Self, TraceError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(TraceError::MalformedCsv {
            line: 1,
            msg: "empty file".into(),
        })?;
        let diagnostics = match header.matches(',').count() {
            4 => false,
            7 => true,
            _ => {
                return Err(TraceError::MalformedCsv {
                    line: 1,
                    msg: format!("unexpected header: {header}"),
                })
            }
        };
        let mut trace = Trace::new(diagnostics);
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let bad = |msg: String| TraceError::MalformedCsv { line: lineno, msg };
            let fields: Vec<&str> = line.split(',').collect();
            let expected = if diagnostics { 8 } else { 5 };
            if fields.len() != expected {
                return Err(bad(format!("expected {expected} fields, got {}", fields.len())));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|e| bad(e.to_string()));
            let float = |s: &str| s.parse::<f64>().map_err(|e| bad(e.to_string()));
            let opt = |s: &str| -> Result<Option<f64>, TraceError> {
                let v = float(s)?;
                Ok(if v.is_nan() { None } else { Some(v) })
            };
            let f_gap = float(fields[3])?;
            trace.rows.push(TraceRow {
                outer_iter: int(fields[0])?,
                grad_x_calls: int(fields[1])?,
                grad_y_calls: int(fields[2])?,
                f_value: f64::NAN,
                f_gap,
                wall_time_s: float(fields[4])?,
                psi: if diagnostics { opt(fields[5])? } else { None },
                lemma1_residual: if diagnostics { opt(fields[6])? } else { None },
                contraction_ratio: if diagnostics { opt(fields[7])? } else { None },
            });
        }
        Ok(trace)
    }

    /// Counters must never decrease along a trace.
    pub fn counters_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].grad_x_calls >= w[0].grad_x_calls && w[1].grad_y_calls >= w[0].grad_y_calls
        })
    }
}
