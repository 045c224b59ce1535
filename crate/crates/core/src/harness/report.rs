//! Summarizes an experiment directory into a per-method comparison table.
//! Randomized methods are aggregated by the median over their seeds.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::harness::{io_err, HarnessError};
use crate::trace::Trace;

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    /// Medians over seeds (exact values for deterministic methods).
    pub final_f_gap: f64,
    pub grad_x_calls: f64,
    pub grad_y_calls: f64,
    pub iterations: f64,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in medians"));
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Reads every `<method>[_seed<k>].csv` in `dir` and aggregates final rows.
pub fn summarize_dir(dir: &Path) -> Result<Vec<MethodSummary>, HarnessError> {
    let mut groups: BTreeMap<String, Vec<[f64; 4]>> = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(io_err(dir))?;
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(stem) = name.strip_suffix(".csv") else {
            continue;
        };
        let method = stem.split("_seed").next().unwrap_or(stem).to_string();
        let text = fs::read_to_string(entry.path()).map_err(io_err(&entry.path()))?;
        let trace = Trace::from_csv_str(&text)?;
        let Some(last) = trace.last() else { continue };
        groups.entry(method).or_default().push([
            last.f_gap,
            last.grad_x_calls as f64,
            last.grad_y_calls as f64,
            last.outer_iter as f64,
        ]);
    }
    if groups.is_empty() {
        return Err(HarnessError::Config(format!(
            "no trace CSVs found in {dir:?}"
        )));
    }
    Ok(groups
        .into_iter()
        .map(|(method, rows)| {
            let column = |i: usize| {
                let mut v: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                median(&mut v)
            };
            MethodSummary {
                method,
                runs: rows.len(),
                final_f_gap: column(0),
                grad_x_calls: column(1),
                grad_y_calls: column(2),
                iterations: column(3),
            }
        })
        .collect())
}

pub fn render_table(summaries: &[MethodSummary]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>5} {:>14} {:>14} {:>14} {:>12}\n",
        "method", "runs", "final_f_gap", "grad_x_calls", "grad_y_calls", "iterations"
    ));
    for s in summaries {
        out.push_str(&format!(
            "{:<14} {:>5} {:>14.3e} {:>14.0} {:>14.0} {:>12.0}\n",
            s.method, s.runs, s.final_f_gap, s.grad_x_calls, s.grad_y_calls, s.iterations
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{
        run_experiment, ExperimentConfig, MethodName, MethodSpec, ProblemSpec, StoppingSpec,
    };
    use crate::problems::QuadraticSpec;

    #[test]
    fn summarize_groups_by_method_with_medians() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig {
            problem: ProblemSpec::Quadratic(QuadraticSpec {
                d_x: 4,
                d_y: 2,
                mu_x: 0.5,
                l_x: 5.0,
                mu_y: 0.5,
                l_y: 10.0,
                coupling_rho: 0.0,
                seed: 8,
            }),
            methods: vec![
                MethodSpec {
                    method: MethodName::Bam,
                    seeds: None,
                    diagnostics: false,
                },
                MethodSpec {
                    method: MethodName::Lincoupling,
                    seeds: Some(vec![0, 1, 2]),
                    diagnostics: false,
                },
            ],
            stopping: StoppingSpec {
                eps: Some(1e-6),
                psi_ratio: None,
                max_outer: None,
            },
            output_dir: dir.path().to_string_lossy().into_owned(),
            stride: 1,
            deterministic_timing: true,
            reference_tol: 1e-12,
        };
        run_experiment(&config).unwrap();
        let summaries = summarize_dir(dir.path()).unwrap();
        assert_eq!(summaries.len(), 2);
        let lc = summaries.iter().find(|s| s.method == "lincoupling").unwrap();
        assert_eq!(lc.runs, 3);
        assert!(lc.final_f_gap <= 1e-6);
        let table = render_table(&summaries);
        assert!(table.contains("bam"));
        assert!(table.contains("lincoupling"));
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(summarize_dir(dir.path()).is_err());
    }
}
