//! One-sample Kolmogorov–Smirnov test of line angles against Uniform(0°, 180°).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this many samples the asymptotic p-value is not trusted and the
/// sample is never declared uniform.
pub const MIN_SAMPLES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub uniform: bool,
}

/// `sup |F_n(x) − F(x)|` for the uniform distribution on `[lo, hi)`.
pub fn ks_statistic_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            let above = (i + 1) as f64 / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² λ²)`.
///
/// Small λ uses the Jacobi theta transform of the same series, which
/// converges quickly there.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let pi2 = std::f64::consts::PI.powi(2);
        let series: f64 = (1..=8)
            .map(|j| {
                let k = (2 * j - 1) as f64;
                (-k * k * pi2 / (8.0 * lambda * lambda)).exp()
            })
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * series
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-18 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

/// Asymptotic p-value for statistic `d` on `n` samples, with the
/// `√n + 0.12 + 0.11/√n` small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sqrt_n = (n as f64).sqrt();
    kolmogorov_survival(d * (sqrt_n + 0.12 + 0.11 / sqrt_n))
}

/// Tests whether `thetas` (degrees) look uniform on [0°, 180°). The sample
/// is declared uniform when the p-value exceeds `alpha` and there are at
/// least [`MIN_SAMPLES`] angles.
pub fn ks_uniformity_test(thetas: &[f64], alpha: f64) -> Result<KsOutcome> {
    if thetas.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let statistic = ks_statistic_uniform(thetas, 0.0, 180.0);
    let p_value = ks_p_value(statistic, thetas.len());
    Ok(KsOutcome {
        statistic,
        p_value,
        uniform: thetas.len() >= MIN_SAMPLES && p_value > alpha,
    })
}
