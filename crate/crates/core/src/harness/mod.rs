//! Declarative experiment runner: JSON configs in, CSV traces and a metadata
//! record out, deterministic given the configured seeds.

pub mod check;
pub mod data;
pub mod fit;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bam::{self, BamOptions, SolverError};
use crate::baselines::{acdm, lincoupling, nag, BaselineOptions};
use crate::block::{BlockConstants, BlockVector};
use crate::oracle::BlockObjective;
use crate::problems::{
    gen_quadratic, make_logistic, LibsvmError, ProblemArchive, ProblemError, QuadraticProblem,
    QuadraticSpec,
};
use crate::trace::{StoppingPolicy, Trace, TraceError};

pub use fit::{fit_rate, FitMode};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Libsvm(#[from] LibsvmError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error(transparent)]
    Stopping(#[from] TraceError),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// What to solve. Unknown JSON keys are rejected everywhere in the config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic(QuadraticSpec),
    Logistic {
        dataset: String,
        d_x: usize,
        d_y: usize,
        lambda_x: f64,
        lambda_y: f64,
        /// Optional known data-smoothness bound; estimated when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        l_data: Option<f64>,
    },
    /// A problem archive produced by `generate`.
    Archive { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Bam,
    Nag,
    Acdm,
    Lincoupling,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Bam => "bam",
            MethodName::Nag => "nag",
            MethodName::Acdm => "acdm",
            MethodName::Lincoupling => "lincoupling",
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, MethodName::Acdm | MethodName::Lincoupling)
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bam" => Some(MethodName::Bam),
            "nag" => Some(MethodName::Nag),
            "acdm" => Some(MethodName::Acdm),
            "lincoupling" => Some(MethodName::Lincoupling),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: MethodName,
    /// Seeds for randomized methods; defaults to `[0, 1, 2, 3, 4]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Record Lyapunov/descent diagnostics (only meaningful for `bam`).
    #[serde(default)]
    pub diagnostics: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StoppingSpec {
    /// Objective-gap target against the reference optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_outer: Option<usize>,
}

impl StoppingSpec {
    pub fn to_policy(self) -> StoppingPolicy {
        StoppingPolicy {
            f_gap: self.eps,
            psi_ratio: self.psi_ratio,
            max_outer: self.max_outer,
        }
    }
}

fn default_stride() -> usize {
    1
}

fn default_true() -> bool {
    true
}

fn default_reference_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodSpec>,
    pub stopping: StoppingSpec,
    pub output_dir: String,
    /// Record every `stride`-th sampling instant.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Write zeros into the per-row `wall_time_s` column so that re-runs are
    /// byte-identical; measured totals always go to the metadata. Set to
    /// false to record real per-row wall time at the cost of reproducible
    /// trace bytes.
    #[serde(default = "default_true")]
    pub deterministic_timing: bool,
    /// Certified-gap tolerance for computed reference optima.
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::Config("methods list is empty".into()));
        }
        if self.stride == 0 {
            return Err(HarnessError::Config("stride must be at least 1".into()));
        }
        let s = self.stopping;
        if s.eps.is_none() && s.psi_ratio.is_none() && s.max_outer.is_none() {
            return Err(HarnessError::Config(
                "stopping must set eps, psi_ratio or max_outer".into(),
            ));
        }
        for m in &self.methods {
            if m.seeds.is_some() && !m.method.is_randomized() {
                return Err(HarnessError::Config(format!(
                    "method {} is deterministic and takes no seeds",
                    m.method.as_str()
                )));
            }
            if s.psi_ratio.is_some() && m.method != MethodName::Bam {
                return Err(HarnessError::Config(
                    "psi_ratio stopping only applies to bam".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        data::hex_digest(serde_json::to_string(self).expect("serializable").as_bytes())
    }
}

/// A built problem plus everything the runner needs to describe it.
pub struct PreparedProblem {
    pub problem: Box<dyn BlockObjective>,
    pub reference: crate::trace::Reference,
    pub descriptor: ProblemDescriptor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    pub kind: String,
    pub d_x: usize,
    pub d_y: usize,
    pub constants: BlockConstants,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_sha256: Option<String>,
}

/// Builds the problem and its reference optimum (closed form for quadratics,
/// cached high-accuracy run for logistic regression).
pub fn prepare_problem(
    spec: &ProblemSpec,
    reference_tol: f64,
) -> Result<PreparedProblem, HarnessError> {
    match spec {
        ProblemSpec::Quadratic(q) => {
            let problem = gen_quadratic(q)?;
            let reference = problem.reference();
            let descriptor = ProblemDescriptor {
                kind: "quadratic".into(),
                d_x: q.d_x,
                d_y: q.d_y,
                constants: problem.constants(),
                seed: Some(q.seed),
                dataset_sha256: None,
            };
            Ok(PreparedProblem {
                problem: Box::new(problem),
                reference,
                descriptor,
            })
        }
        ProblemSpec::Logistic {
            dataset,
            d_x,
            d_y,
            lambda_x,
            lambda_y,
            l_data,
        } => prepare_logistic(dataset, *d_x, *d_y, *lambda_x, *lambda_y, *l_data, reference_tol),
        ProblemSpec::Archive { path } => {
            let path = PathBuf::from(path);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let archive: ProblemArchive =
                serde_json::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
            match archive {
                ProblemArchive::Quadratic(q) => {
                    let problem = QuadraticProblem::from_archive(&q)?;
                    let reference = problem.reference();
                    let descriptor = ProblemDescriptor {
                        kind: "quadratic".into(),
                        d_x: q.d_x,
                        d_y: q.d_y,
                        constants: problem.constants(),
                        seed: q.seed,
                        dataset_sha256: None,
                    };
                    Ok(PreparedProblem {
                        problem: Box::new(problem),
                        reference,
                        descriptor,
                    })
                }
                ProblemArchive::Logistic(l) => prepare_logistic(
                    &l.dataset,
                    l.d_x,
                    l.d_y,
                    l.lambda_x,
                    l.lambda_y,
                    l.l_data,
                    reference_tol,
                ),
            }
        }
    }
}

fn prepare_logistic(
    dataset: &str,
    d_x: usize,
    d_y: usize,
    lambda_x: f64,
    lambda_y: f64,
    l_data: Option<f64>,
    reference_tol: f64,
) -> Result<PreparedProblem, HarnessError> {
    let path = data::resolve_dataset(dataset);
    let data_hash = data::sha256_file(&path)?;
    let parsed = data::load_dataset(dataset)?;
    let problem = make_logistic(&parsed, d_x, d_y, lambda_x, lambda_y, l_data)?;
    let constants = problem.constants();
    let problem_hash = data::hex_digest(
        format!(
            "logistic:{data_hash}:{d_x}:{d_y}:{:x}:{:x}",
            lambda_x.to_bits(),
            lambda_y.to_bits()
        )
        .as_bytes(),
    );
    let reference = data::reference_for(&problem, &problem_hash, reference_tol)?;
    Ok(PreparedProblem {
        problem: Box::new(problem),
        reference,
        descriptor: ProblemDescriptor {
            kind: "logistic".into(),
            d_x,
            d_y,
            constants,
            seed: None,
            dataset_sha256: Some(data_hash),
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub csv: String,
    pub outer_iters: u64,
    pub grad_x_calls: u64,
    pub grad_y_calls: u64,
    pub final_f_gap: f64,
    pub wall_time_s_total: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub format_version: u32,
    pub config_hash: String,
    pub library_version: String,
    pub created_utc: String,
    pub config: ExperimentConfig,
    pub problem: ProblemDescriptor,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bam_params: Option<BamParamsRecord>,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BamParamsRecord {
    pub alpha: f64,
    pub eta_x: f64,
    pub eta_y: f64,
}

/// Outcome of [`run_experiment`].
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub metadata: RunMetadata,
}

impl RunSummary {
    /// True when every method run finished without a solver error.
    pub fn all_ok(&self) -> bool {
        self.metadata.runs.iter().all(|r| r.error.is_none())
    }
}

const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// Runs every configured (method, seed) pair on a fresh counter state and
/// writes one CSV per run plus `metadata.json` into the output directory.
///
/// A solver failure (for example an exhausted inner budget) is recorded in
/// the metadata for that run and does not stop the other runs; I/O errors
/// abort.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary, HarnessError> {
    config.validate()?;
    let prepared = prepare_problem(&config.problem, config.reference_tol)?;
    let problem = prepared.problem.as_ref();
    let out_dir = PathBuf::from(&config.output_dir);
    fs::create_dir_all(&out_dir).map_err(io_err(&out_dir))?;

    let start = BlockVector::zeros(problem.dim_x(), problem.dim_y());
    let stop = config.stopping.to_policy();
    let bam_params = bam::compute_parameters(&problem.constants())
        .ok()
        .map(|p| BamParamsRecord {
            alpha: p.alpha,
            eta_x: p.eta_x,
            eta_y: p.eta_y,
        });

    let mut runs = Vec::new();
    for spec in &config.methods {
        let seeds: Vec<Option<u64>> = if spec.method.is_randomized() {
            spec.seeds
                .clone()
                .unwrap_or_else(|| DEFAULT_SEEDS.to_vec())
                .into_iter()
                .map(Some)
                .collect()
        } else {
            vec![None]
        };
        for seed in seeds {
            problem.counters().reset();
            let clock = Instant::now();
            let result = dispatch(spec, seed, problem, &start, &stop, &prepared, config);
            let elapsed = clock.elapsed().as_secs_f64();
            let csv_name = match seed {
                Some(s) => format!("{}_seed{}.csv", spec.method.as_str(), s),
                None => format!("{}.csv", spec.method.as_str()),
            };
            match result {
                Ok(trace) => {
                    let csv_path = out_dir.join(&csv_name);
                    let mut buf = Vec::new();
                    trace.write_csv(&mut buf).expect("write to Vec cannot fail");
                    fs::write(&csv_path, buf).map_err(io_err(&csv_path))?;
                    let last = trace.last().expect("traces record at least the start");
                    runs.push(RunRecord {
                        method: spec.method.as_str().into(),
                        seed,
                        csv: csv_name,
                        outer_iters: last.outer_iter,
                        grad_x_calls: last.grad_x_calls,
                        grad_y_calls: last.grad_y_calls,
                        final_f_gap: last.f_gap,
                        wall_time_s_total: elapsed,
                        error: None,
                    });
                }
                Err(e) => {
                    runs.push(RunRecord {
                        method: spec.method.as_str().into(),
                        seed,
                        csv: csv_name,
                        outer_iters: 0,
                        grad_x_calls: 0,
                        grad_y_calls: 0,
                        final_f_gap: f64::NAN,
                        wall_time_s_total: elapsed,
                        error: Some(e.to_string()),
                    });
                }
            }
        }
    }

    let metadata = RunMetadata {
        format_version: 1,
        config_hash: config.config_hash(),
        library_version: env!("CARGO_PKG_VERSION").into(),
        created_utc: chrono::Utc::now().to_rfc3339(),
        config: config.clone(),
        problem: prepared.descriptor.clone(),
        bam_params,
        runs,
    };
    let meta_path = out_dir.join("metadata.json");
    fs::write(
        &meta_path,
        serde_json::to_string_pretty(&metadata).expect("serializable"),
    )
    .map_err(io_err(&meta_path))?;
    Ok(RunSummary {
        output_dir: out_dir,
        metadata,
    })
}

fn dispatch(
    spec: &MethodSpec,
    seed: Option<u64>,
    problem: &dyn BlockObjective,
    start: &BlockVector,
    stop: &StoppingPolicy,
    prepared: &PreparedProblem,
    config: &ExperimentConfig,
) -> Result<Trace, SolverError> {
    let reference = Some(&prepared.reference);
    let baseline_opts = BaselineOptions {
        stride: config.stride,
        record_wall_time: !config.deterministic_timing,
    };
    match spec.method {
        MethodName::Bam => {
            let opts = BamOptions {
                stop: *stop,
                diagnostics: spec.diagnostics,
                inner_budget: None,
                stride: config.stride,
                record_wall_time: !config.deterministic_timing,
            };
            bam::run(problem, start, &opts, reference).map(|r| r.trace)
        }
        MethodName::Nag => {
            // psi stopping is bam-specific; validated away earlier
            nag(problem, start, stop, reference, &baseline_opts)
        }
        MethodName::Acdm => acdm(
            problem,
            start,
            stop,
            seed.expect("randomized methods always get a seed"),
            reference,
            &baseline_opts,
        ),
        MethodName::Lincoupling => lincoupling(
            problem,
            start,
            stop,
            seed.expect("randomized methods always get a seed"),
            reference,
            &baseline_opts,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_config(dir: &str) -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemSpec::Quadratic(QuadraticSpec {
                d_x: 6,
                d_y: 3,
                mu_x: 0.5,
                l_x: 10.0,
                mu_y: 0.2,
                l_y: 40.0,
                coupling_rho: 0.2,
                seed: 3,
            }),
            methods: vec![
                MethodSpec {
                    method: MethodName::Bam,
                    seeds: None,
                    diagnostics: true,
                },
                MethodSpec {
                    method: MethodName::Nag,
                    seeds: None,
                    diagnostics: false,
                },
                MethodSpec {
                    method: MethodName::Acdm,
                    seeds: Some(vec![0, 1]),
                    diagnostics: false,
                },
            ],
            stopping: StoppingSpec {
                eps: Some(1e-8),
                psi_ratio: None,
                max_outer: None,
            },
            output_dir: dir.into(),
            stride: 1,
            deterministic_timing: true,
            reference_tol: 1e-12,
        }
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let json = r#"{
            "problem": {"kind": "quadratic", "d_x": 2, "d_y": 2, "mu_x": 1.0,
                        "l_x": 2.0, "mu_y": 1.0, "l_y": 2.0, "seed": 1},
            "methods": [{"method": "bam"}],
            "stopping": {"eps": 1e-6},
            "output_dir": "unused",
            "surprise": 1
        }"#;
        match ExperimentConfig::from_json(json) {
            Err(HarnessError::Config(msg)) => assert!(msg.contains("surprise"), "{msg}"),
            other => panic!("expected config error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn seeds_on_deterministic_method_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = quadratic_config(dir.path().to_str().unwrap());
        config.methods[1].seeds = Some(vec![1]);
        assert!(matches!(
            config.validate(),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn experiment_writes_expected_files_and_hits_target() {
        let dir = tempfile::tempdir().unwrap();
        let config = quadratic_config(dir.path().to_str().unwrap());
        let summary = run_experiment(&config).unwrap();
        assert!(summary.all_ok());
        for name in ["bam.csv", "nag.csv", "acdm_seed0.csv", "acdm_seed1.csv", "metadata.json"] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
        for run in &summary.metadata.runs {
            assert!(run.final_f_gap <= 1e-8, "{}: {}", run.method, run.final_f_gap);
        }
        // bam row count obeys the contraction bound
        let bam_run = &summary.metadata.runs[0];
        let alpha = summary.metadata.bam_params.unwrap().alpha;
        let psi_bound = ((1e8f64).ln() / (1.0 + alpha).ln()).ceil() as u64 + 1;
        assert!(bam_run.outer_iters <= psi_bound);
    }

    #[test]
    fn reruns_are_byte_identical() {
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let c1 = quadratic_config(dir1.path().to_str().unwrap());
        let c2 = quadratic_config(dir2.path().to_str().unwrap());
        run_experiment(&c1).unwrap();
        run_experiment(&c2).unwrap();
        for name in ["bam.csv", "nag.csv", "acdm_seed0.csv", "acdm_seed1.csv"] {
            let a = fs::read(dir1.path().join(name)).unwrap();
            let b = fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn logistic_archive_loads_and_runs() {
        let dir = tempfile::tempdir().unwrap();
        let dataset_path = dir.path().join("toy.libsvm");
        let dataset = crate::harness::data::synthetic_dataset(60, 10, 5);
        fs::write(&dataset_path, dataset.to_text()).unwrap();
        let archive = crate::problems::ProblemArchive::Logistic(crate::problems::LogisticArchive {
            format_version: 1,
            d_x: 6,
            d_y: 4,
            dataset: dataset_path.to_string_lossy().into_owned(),
            lambda_x: 0.01,
            lambda_y: 0.002,
            l_data: None,
        });
        let archive_path = dir.path().join("problem.json");
        fs::write(&archive_path, serde_json::to_string(&archive).unwrap()).unwrap();

        // reference cache lands under the data dir; point it at the tempdir
        std::env::set_var(crate::harness::data::DATA_DIR_ENV, dir.path());
        let prepared = prepare_problem(
            &ProblemSpec::Archive {
                path: archive_path.to_string_lossy().into_owned(),
            },
            1e-10,
        );
        std::env::remove_var(crate::harness::data::DATA_DIR_ENV);
        let prepared = prepared.unwrap();
        assert_eq!(prepared.descriptor.kind, "logistic");
        assert_eq!(prepared.problem.dim_x(), 6);
        assert!(prepared.reference.f_star.is_finite());
        // cached reference file exists under the tempdir
        assert!(dir.path().join("ref_cache").read_dir().unwrap().count() == 1);
    }

    #[test]
    fn config_hash_ignores_output_dir_changes_only_if_config_changes() {
        let c1 = quadratic_config("a");
        let c2 = quadratic_config("a");
        assert_eq!(c1.config_hash(), c2.config_hash());
        let c3 = quadratic_config("b");
        assert_ne!(c1.config_hash(), c3.config_hash());
    }
}
