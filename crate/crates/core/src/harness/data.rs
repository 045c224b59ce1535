//! Dataset location and reference-optimum caching.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::reference_run;
use crate::block::BlockVector;
use crate::harness::HarnessError;
use crate::oracle::BlockObjective;
use crate::problems::{parse_libsvm, LibsvmDataset, LibsvmRow, A1A_DECLARED_FEATURES};
use crate::trace::Reference;

/// Environment variable pointing at the dataset cache directory.
pub const DATA_DIR_ENV: &str = "BLOCKSPLIT_DATA_DIR";

/// Resolves the dataset directory: `$BLOCKSPLIT_DATA_DIR` if set, else
/// `./data`.
pub fn data_dir() -> PathBuf {
    env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

/// Resolves a dataset argument: explicit paths are used as-is, bare names are
/// looked up in the data directory.
pub fn resolve_dataset(name: &str) -> PathBuf {
    let p = Path::new(name);
    if p.components().count() > 1 || p.exists() {
        p.to_path_buf()
    } else {
        data_dir().join(name)
    }
}

/// Loads a LIBSVM dataset by name or path. The `a1a` family is declared at
/// its collection width of 123 features even though the training split only
/// realizes 119.
pub fn load_dataset(name: &str) -> Result<LibsvmDataset, HarnessError> {
    let path = resolve_dataset(name);
    let text = fs::read_to_string(&path).map_err(|e| {
        HarnessError::Config(format!(
            "cannot read dataset {:?} (set {DATA_DIR_ENV} or pass a path): {e}",
            path
        ))
    })?;
    let data = parse_libsvm(&text)?;
    let stem = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
    Ok(if stem.starts_with("a1a") {
        data.with_declared_features(A1A_DECLARED_FEATURES)
    } else {
        data
    })
}

pub fn sha256_file(path: &Path) -> Result<String, HarnessError> {
    let bytes = fs::read(path)
        .map_err(|e| HarnessError::Config(format!("cannot hash {:?}: {e}", path)))?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// A persisted high-accuracy reference optimum, keyed by a problem hash.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReferenceCache {
    pub format_version: u32,
    pub problem_hash: String,
    pub tol: f64,
    pub f_star: f64,
    pub optimum_x: Vec<f64>,
    pub optimum_y: Vec<f64>,
}

/// Returns the cached reference for `problem_hash`, or computes one with a
/// long uncounted accelerated-gradient run (certified gap at most `tol`) and
/// persists it under `<data_dir>/ref_cache`.
pub fn reference_for(
    problem: &dyn BlockObjective,
    problem_hash: &str,
    tol: f64,
) -> Result<Reference, HarnessError> {
    reference_for_at(&data_dir().join("ref_cache"), problem, problem_hash, tol)
}

/// As [`reference_for`], with an explicit cache directory.
pub fn reference_for_at(
    cache_dir: &Path,
    problem: &dyn BlockObjective,
    problem_hash: &str,
    tol: f64,
) -> Result<Reference, HarnessError> {
    let path = cache_dir.join(format!("{problem_hash}.json"));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(cache) = serde_json::from_str::<ReferenceCache>(&text) {
            if cache.problem_hash == problem_hash && cache.tol <= tol {
                return Ok(Reference {
                    optimum: BlockVector {
                        x: nalgebra::DVector::from_row_slice(&cache.optimum_x),
                        y: nalgebra::DVector::from_row_slice(&cache.optimum_y),
                    },
                    f_star: cache.f_star,
                });
            }
        }
    }
    let start = BlockVector::zeros(problem.dim_x(), problem.dim_y());
    let reference = reference_run(problem, &start, tol)?;
    let cache = ReferenceCache {
        format_version: 1,
        problem_hash: problem_hash.to_string(),
        tol,
        f_star: reference.f_star,
        optimum_x: reference.optimum.x.as_slice().to_vec(),
        optimum_y: reference.optimum.y.as_slice().to_vec(),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| HarnessError::Config(format!("cannot create {:?}: {e}", parent)))?;
    }
    fs::write(&path, serde_json::to_string_pretty(&cache).expect("serializable"))
        .map_err(|e| HarnessError::Config(format!("cannot write {:?}: {e}", path)))?;
    Ok(reference)
}

/// Deterministic synthetic binary-classification dataset in LIBSVM form,
/// used by check suites and tests that should not depend on downloads.
pub fn synthetic_dataset(n: usize, d: usize, seed: u64) -> LibsvmDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let teacher: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rows = (0..n)
        .map(|_| {
            let mut features = Vec::new();
            let mut margin = 0.0;
            for (j, w) in teacher.iter().enumerate() {
                if rng.gen::<f64>() < 0.4 {
                    let v: f64 = rng.gen_range(-2.0..2.0);
                    margin += v * w;
                    features.push((j, v));
                }
            }
            let noise: f64 = rng.gen_range(-0.3..0.3);
            LibsvmRow {
                label: if margin + noise >= 0.0 { 1.0 } else { -1.0 },
                features,
            }
        })
        .collect();
    LibsvmDataset {
        rows,
        n_features: d,
    }
}
