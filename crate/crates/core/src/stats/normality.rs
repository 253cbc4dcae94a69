use super::{check_finite, mean, StatsError, TestMethod, TestResult};

/// Jarque–Bera normality test, `JB = m/6 (S² + K²/4)`.
///
/// `S` and `K` use population (biased) central moments, `K` is excess
/// kurtosis. The χ² distribution with 2 dof has survival `exp(-x/2)`.
pub fn jarque_bera(sample: &[f64]) -> Result<TestResult, StatsError> {
    let m = sample.len();
    if m < 4 {
        return Err(StatsError::TooFewPoints { got: m, need: 4 });
    }
    check_finite(sample)?;
    let mu = mean(sample);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in sample {
        let d = x - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let n = m as f64;
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if m2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    let jb = n / 6.0 * (skew * skew + kurt * kurt / 4.0);
    Ok(TestResult {
        statistic: jb,
        p_value: (-jb / 2.0).exp().clamp(0.0, 1.0),
        n_effective: m,
        dof: Some(2.0),
        method: TestMethod::JarqueBera,
    })
}
