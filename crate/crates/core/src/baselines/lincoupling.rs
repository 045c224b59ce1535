//! Linear coupling of gradient and mirror steps, block-randomized with
//! square-root-of-smoothness sampling, made linearly convergent by restarts:
//! the sublinear phase halves the expected gap every
//! `ceil(2 sqrt(2) S / sqrt(mu))` draws, after which both sequences restart
//! from the current primal point.

use crate::bam::SolverError;
use crate::block::BlockVector;
use crate::oracle::BlockObjective;
use crate::trace::{Reference, StoppingPolicy, Trace};

use super::acdm::{randomized_block_run, Scheme};
use super::BaselineOptions;

/// Runs restarted linear coupling from `start` with the given seed.
pub fn lincoupling(
    problem: &dyn BlockObjective,
    start: &BlockVector,
    stop: &StoppingPolicy,
    seed: u64,
    reference: Option<&Reference>,
    opts: &BaselineOptions,
) -> Result<Trace, SolverError> {
    randomized_block_run(
        problem,
        start,
        stop,
        seed,
        reference,
        opts,
        Scheme::LinCoupling,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_quadratic, QuadraticProblem, QuadraticSpec};

    fn symmetric_problem(seed: u64) -> QuadraticProblem {
        gen_quadratic(&QuadraticSpec {
            d_x: 5,
            d_y: 5,
            mu_x: 0.3,
            l_x: 40.0,
            mu_y: 0.3,
            l_y: 40.0,
            coupling_rho: 0.0,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn stationary_at_optimum() {
        let p = symmetric_problem(1);
        let r = p.reference();
        let trace = lincoupling(
            &p,
            &r.optimum,
            &StoppingPolicy::max_outer(100),
            3,
            Some(&r),
            &BaselineOptions::default(),
        )
        .unwrap();
        // all gradients vanish at the optimum, so the iterate never moves
        assert!(trace.rows.iter().all(|row| row.f_gap.abs() <= 1e-12));
    }

    #[test]
    fn symmetric_problem_balances_block_counters() {
        let start = BlockVector::from_slices(&[2.0; 5], &[2.0; 5]).unwrap();
        let mut totals = Vec::new();
        for seed in 0..10u64 {
            let p = symmetric_problem(4);
            let r = p.reference();
            let trace = lincoupling(
                &p,
                &start,
                &StoppingPolicy::max_outer(2000),
                seed,
                Some(&r),
                &BaselineOptions::default(),
            )
            .unwrap();
            let last = trace.last().unwrap();
            totals.push((last.grad_x_calls as f64, last.grad_y_calls as f64));
        }
        let (sx, sy): (f64, f64) = totals
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        // p_x = p_y = 1/2: totals agree within sampling noise (~4 sigma of a
        // binomial over 20000 draws).
        let n = sx + sy;
        assert!(
            (sx - sy).abs() <= 4.0 * n.sqrt(),
            "block draws unbalanced: {sx} vs {sy}"
        );
    }

    #[test]
    fn linear_convergence_per_epoch() {
        // f-gap ratio per recorded epoch stays below 1 on seeded runs.
        let start = BlockVector::from_slices(&[4.0; 5], &[-3.0; 5]).unwrap();
        for seed in [0u64, 1, 2] {
            let p = symmetric_problem(9);
            let r = p.reference();
            let trace = lincoupling(
                &p,
                &start,
                &StoppingPolicy::f_gap(1e-8),
                seed,
                Some(&r),
                &BaselineOptions::default(),
            )
            .unwrap();
            let last = trace.last().unwrap();
            assert!(last.f_gap <= 1e-8, "seed {seed}: gap {}", last.f_gap);
            // geometric trend across epochs: every 5-epoch window decreases
            let gaps: Vec<f64> = trace.rows.iter().map(|r| r.f_gap).collect();
            for w in gaps.windows(6) {
                assert!(
                    w[5] < w[0],
                    "seed {seed}: no decrease across epochs {w:?}"
                );
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let start = BlockVector::from_slices(&[1.0; 5], &[2.0; 5]).unwrap();
        let run = |seed: u64| {
            let p = symmetric_problem(6);
            lincoupling(
                &p,
                &start,
                &StoppingPolicy::max_outer(400),
                seed,
                Some(&p.reference()),
                &BaselineOptions::default(),
            )
            .unwrap()
            .to_csv_string()
        };
        assert_eq!(run(11), run(11));
        assert_ne!(run(11), run(12));
    }
}
