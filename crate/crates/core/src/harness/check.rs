//! Runtime invariant-check suites: the release gate behind the `check` CLI
//! subcommand. Each suite re-verifies one family of guarantees on freshly
//! generated seeded problems and reports counts and worst residuals.

use serde::Serialize;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bam::{self, BamOptions};
use crate::baselines::{acdm, nag, BaselineOptions};
use crate::block::BlockVector;
use crate::fd;
use crate::harness::data::synthetic_dataset;
use crate::harness::HarnessError;
use crate::inner::ogmg_thetas;
use crate::oracle::{BlockObjective, CountingProbe};
use crate::problems::{gen_quadratic, make_logistic, QuadraticSpec};
use crate::trace::{Reference, StoppingPolicy};

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub max_residual: f64,
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            passed: true,
            cases: 0,
            max_residual: 0.0,
            failures: Vec::new(),
        }
    }

    fn case(&mut self, residual: f64, limit: f64, context: impl Fn() -> String) {
        self.cases += 1;
        if residual > self.max_residual {
            self.max_residual = residual;
        }
        // NaN must fail, hence not `residual > limit`
        if residual.is_nan() || residual > limit {
            self.passed = false;
            if self.failures.len() < 16 {
                self.failures
                    .push(format!("{}: residual {residual} > {limit}", context()));
            }
        }
    }

    fn fail(&mut self, msg: String) {
        self.passed = false;
        self.cases += 1;
        if self.failures.len() < 16 {
            self.failures.push(msg);
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub suites: Vec<SuiteResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!(
                "{:<22} {}  cases: {:>5}  max residual: {:.3e}\n",
                s.name,
                if s.passed { "PASS" } else { "FAIL" },
                s.cases,
                s.max_residual
            ));
            for f in &s.failures {
                out.push_str(&format!("    {f}\n"));
            }
        }
        out
    }
}

pub const SUITE_NAMES: [&str; 5] = [
    "finite-diff",
    "theta-recursion",
    "lemma1",
    "contraction",
    "counters",
];

/// Runs the selected suite (all when `selector` is `None`).
pub fn run_checks(selector: Option<&str>) -> Result<CheckReport, HarnessError> {
    let mut suites = Vec::new();
    let want = |name: &str| selector.is_none() || selector == Some(name);
    if let Some(sel) = selector {
        if !SUITE_NAMES.contains(&sel) {
            return Err(HarnessError::Config(format!(
                "unknown suite {sel:?}; available: {}",
                SUITE_NAMES.join(", ")
            )));
        }
    }
    if want("finite-diff") {
        suites.push(finite_diff_suite()?);
    }
    if want("theta-recursion") {
        suites.push(theta_suite());
    }
    if want("lemma1") || want("contraction") {
        let (lemma1, contraction) = bam_diagnostic_suites()?;
        if want("lemma1") {
            suites.push(lemma1);
        }
        if want("contraction") {
            suites.push(contraction);
        }
    }
    if want("counters") {
        suites.push(counter_suite()?);
    }
    Ok(CheckReport { suites })
}

fn sample_quadratic(seed: u64) -> QuadraticSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let kappa_x = 10f64.powf(rng.gen_range(1.0..3.0));
    let kappa_y = 10f64.powf(rng.gen_range(1.0..3.0));
    let mu = rng.gen_range(0.05..0.5);
    QuadraticSpec {
        d_x: 8,
        d_y: 5,
        mu_x: mu,
        l_x: mu * kappa_x,
        mu_y: mu,
        l_y: mu * kappa_y,
        coupling_rho: if seed.is_multiple_of(2) { 0.0 } else { 0.3 },
        seed,
    }
}

fn random_point(rng: &mut ChaCha8Rng, d_x: usize, d_y: usize, scale: f64) -> BlockVector {
    BlockVector {
        x: DVector::from_iterator(d_x, (0..d_x).map(|_| rng.gen_range(-scale..scale))),
        y: DVector::from_iterator(d_y, (0..d_y).map(|_| rng.gen_range(-scale..scale))),
    }
}

/// Analytic gradients against central finite differences, quadratic and
/// logistic, 100 random points each, 1e-5 relative.
fn finite_diff_suite() -> Result<SuiteResult, HarnessError> {
    let mut suite = SuiteResult::new("finite-diff");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    for seed in [1u64, 2] {
        let p = gen_quadratic(&sample_quadratic(seed))?;
        for i in 0..50 {
            let point = random_point(&mut rng, p.dim_x(), p.dim_y(), 3.0);
            let err = fd::max_gradient_error(&p, &point)?;
            suite.case(err, 1e-5, || format!("quadratic seed {seed} point {i}"));
        }
    }

    let data = synthetic_dataset(120, 15, 7);
    let logistic = make_logistic(&data, 9, 6, 0.01, 0.002, None)?;
    for i in 0..100 {
        let point = random_point(&mut rng, 9, 6, 2.0);
        let err = fd::max_gradient_error(&logistic, &point)?;
        suite.case(err, 1e-5, || format!("logistic point {i}"));
    }
    Ok(suite)
}

/// OGM-G coefficient ladder recursion residuals up to N = 10^4. Squaring the
/// defining recursions gives the exact identities
/// `theta_i^2 - theta_i = theta_{i+1}^2` for inner indices and
/// `theta_0^2 - theta_0 = 2 theta_1^2` at the 8-coefficient head.
fn theta_suite() -> SuiteResult {
    let mut suite = SuiteResult::new("theta-recursion");
    for n in [1usize, 2, 3, 10, 100, 1000, 10_000] {
        let t = match ogmg_thetas(n) {
            Ok(t) => t,
            Err(e) => {
                suite.fail(format!("N = {n}: {e}"));
                continue;
            }
        };
        if t[n] != 1.0 {
            suite.fail(format!("N = {n}: terminal theta is {}", t[n]));
        }
        for i in 1..n {
            let r = (t[i] * t[i] - t[i] - t[i + 1] * t[i + 1]).abs();
            suite.case(r / (t[i] * t[i]), 1e-12, || format!("N = {n}, i = {i}"));
        }
        let r0 = (t[0] * t[0] - t[0] - 2.0 * t[1] * t[1]).abs();
        suite.case(r0 / (t[0] * t[0]), 1e-12, || format!("N = {n}, i = 0"));
    }
    // spot values pinned by the recursion
    let t1 = ogmg_thetas(1).unwrap();
    if (t1[0] - 2.0).abs() > 1e-15 {
        suite.fail(format!("theta_0(N=1) = {} != 2", t1[0]));
    }
    let t2 = ogmg_thetas(2).unwrap();
    if (t2[1] - (1.0 + 5.0f64.sqrt()) / 2.0).abs() > 1e-15 {
        suite.fail(format!("theta_1(N=2) = {} != golden ratio", t2[1]));
    }
    suite
}

/// Descent-lemma residuals and Lyapunov contraction across seeded runs.
fn bam_diagnostic_suites() -> Result<(SuiteResult, SuiteResult), HarnessError> {
    let mut lemma1 = SuiteResult::new("lemma1");
    let mut contraction = SuiteResult::new("contraction");
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..5u64 {
        let p = gen_quadratic(&sample_quadratic(seed))?;
        let reference = p.reference();
        let start = random_point(&mut rng, p.dim_x(), p.dim_y(), 5.0);
        contraction_check(&p, &reference, &start, &mut lemma1, &mut contraction)?;
    }
    Ok((lemma1, contraction))
}

/// Audits one BAM run against the descent and contraction guarantees,
/// appending to the given suites. Public so fault-injection tests can feed
/// deliberately corrupted problems through the same code path.
pub fn contraction_check(
    problem: &dyn BlockObjective,
    reference: &Reference,
    start: &BlockVector,
    lemma1: &mut SuiteResult,
    contraction: &mut SuiteResult,
) -> Result<(), HarnessError> {
    let opts = BamOptions {
        stop: StoppingPolicy::psi_ratio(1e-8).with_max_outer(3000),
        diagnostics: true,
        ..Default::default()
    };
    let run = bam::run(problem, start, &opts, Some(reference))?;
    let alpha = run.params.alpha;
    for w in run.trace.rows.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        if let (Some(a), Some(b)) = (prev.psi, next.psi) {
            // psi_{k+1} (1 + alpha) <= psi_k up to relative slack
            let lhs = b * (1.0 + alpha);
            let residual = if a > 0.0 { (lhs - a) / a } else { lhs };
            contraction.case(residual, 1e-8, || {
                format!("iteration {}", next.outer_iter)
            });
        }
        if let Some(r) = prev.lemma1_residual {
            let scale = 1.0 + prev.f_value.abs();
            lemma1.case(r / scale, 1e-9, || format!("iteration {}", prev.outer_iter));
        }
    }
    Ok(())
}

/// Counter discipline audited through an independent counting decorator.
fn counter_suite() -> Result<SuiteResult, HarnessError> {
    let mut suite = SuiteResult::new("counters");
    let p = gen_quadratic(&sample_quadratic(3))?;
    let reference = p.reference();
    let start = BlockVector::zeros(p.dim_x(), p.dim_y());
    let start = BlockVector {
        x: start.x.add_scalar(1.5),
        y: start.y.add_scalar(-2.0),
    };

    // BAM: exactly one grad_x per outer step; probe tally matches counters.
    {
        let probe = CountingProbe::new(&p);
        let opts = BamOptions {
            stop: StoppingPolicy::max_outer(40),
            ..Default::default()
        };
        let run = bam::run(&probe, &start, &opts, Some(&reference))?;
        let observed = probe.observed();
        let k = run.state.k;
        if observed.grad_x_calls != k {
            suite.fail(format!(
                "bam made {} grad_x calls over {k} outer steps",
                observed.grad_x_calls
            ));
        } else {
            suite.case(0.0, 1.0, String::new);
        }
        let last = run.trace.last().unwrap();
        if (last.grad_x_calls, last.grad_y_calls)
            != (observed.grad_x_calls, observed.grad_y_calls)
        {
            suite.fail("bam trace counters disagree with the decorator".into());
        } else {
            suite.case(0.0, 1.0, String::new);
        }
        if observed.eval_calls != 0 {
            suite.fail(format!(
                "bam spent {} counted evaluations; measurements must be uncounted",
                observed.eval_calls
            ));
        } else {
            suite.case(0.0, 1.0, String::new);
        }
    }

    // NAG: both block counters advance together, one call each per step.
    {
        let probe = CountingProbe::new(&p);
        let trace = nag(
            &probe,
            &start,
            &StoppingPolicy::max_outer(25),
            Some(&reference),
            &BaselineOptions::default(),
        )?;
        let observed = probe.observed();
        let k = trace.last().unwrap().outer_iter;
        if observed.grad_x_calls != k || observed.grad_y_calls != k {
            suite.fail(format!(
                "nag counters ({}, {}) after {k} steps",
                observed.grad_x_calls, observed.grad_y_calls
            ));
        } else {
            suite.case(0.0, 1.0, String::new);
        }
    }

    // ACDM: exactly one block gradient per draw.
    {
        let probe = CountingProbe::new(&p);
        let trace = acdm(
            &probe,
            &start,
            &StoppingPolicy::max_outer(200),
            11,
            Some(&reference),
            &BaselineOptions::default(),
        )?;
        let observed = probe.observed();
        let k = trace.last().unwrap().outer_iter;
        if observed.grad_x_calls + observed.grad_y_calls != k {
            suite.fail(format!(
                "acdm made {} + {} block calls over {k} draws",
                observed.grad_x_calls, observed.grad_y_calls
            ));
        } else {
            suite.case(0.0, 1.0, String::new);
        }
    }
    Ok(suite)
}
