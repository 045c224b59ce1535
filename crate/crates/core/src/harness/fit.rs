//! Least-squares rate fitting for complexity-scaling checks.

use crate::harness::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    /// Slope of `ln y` against `ln x` (power laws).
    LogLog,
    /// Slope of `ln y` against `x` (geometric rates).
    SemiLog,
}

/// Least-squares slope of `log(ys)` against `log(xs)` (or against `xs` in
/// [`FitMode::SemiLog`]). Needs at least 4 points and positive `ys`.
pub fn fit_rate(xs: &[f64], ys: &[f64], mode: FitMode) -> Result<f64, HarnessError> {
    if xs.len() != ys.len() {
        return Err(HarnessError::Config(format!(
            "fit_rate needs matching lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 4 {
        return Err(HarnessError::Config(format!(
            "fit_rate needs at least 4 points, got {}",
            xs.len()
        )));
    }
    if ys.iter().any(|&y| !y.is_finite() || y <= 0.0) {
        return Err(HarnessError::Config("fit_rate needs positive finite ys".into()));
    }
    let txs: Vec<f64> = match mode {
        FitMode::LogLog => {
            if xs.iter().any(|&x| !x.is_finite() || x <= 0.0) {
                return Err(HarnessError::Config(
                    "log-log fit needs positive finite xs".into(),
                ));
            }
            xs.iter().map(|x| x.ln()).collect()
        }
        FitMode::SemiLog => {
            if xs.iter().any(|x| !x.is_finite()) {
                return Err(HarnessError::Config("fit needs finite xs".into()));
            }
            xs.to_vec()
        }
    };
    let tys: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = txs.len() as f64;
    let mean_x = txs.iter().sum::<f64>() / n;
    let mean_y = tys.iter().sum::<f64>() / n;
    let sxx: f64 = txs.iter().map(|x| (x - mean_x).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(HarnessError::Config("degenerate xs: zero variance".into()));
    }
    let sxy: f64 = txs
        .iter()
        .zip(&tys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn halving_per_unit_x_in_semilog() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let ys: Vec<f64> = (0..8).map(|i| 2f64.powi(-i)).collect();
        let slope = fit_rate(&xs, &ys, FitMode::SemiLog).unwrap();
        assert_relative_eq!(slope, -std::f64::consts::LN_2, max_relative = 1e-12);
    }

    #[test]
    fn inverse_square_power_law() {
        let xs: Vec<f64> = (1..9).map(|i| (i * i) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powi(-2)).collect();
        let slope = fit_rate(&xs, &ys, FitMode::LogLog).unwrap();
        assert_relative_eq!(slope, -2.0, max_relative = 1e-12);
    }

    #[test]
    fn noisy_power_law_within_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xs: Vec<f64> = (1..21).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.powf(-1.5) * (1.0 + rng.gen_range(-0.05..0.05)))
            .collect();
        let slope = fit_rate(&xs, &ys, FitMode::LogLog).unwrap();
        assert!((slope + 1.5).abs() <= 0.15, "slope {slope}");
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(fit_rate(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], FitMode::LogLog).is_err());
        assert!(fit_rate(
            &[1.0, 2.0, 3.0, 4.0],
            &[1.0, -1.0, 1.0, 1.0],
            FitMode::LogLog
        )
        .is_err());
        assert!(fit_rate(
            &[2.0, 2.0, 2.0, 2.0],
            &[1.0, 1.0, 1.0, 1.0],
            FitMode::LogLog
        )
        .is_err());
    }
}
