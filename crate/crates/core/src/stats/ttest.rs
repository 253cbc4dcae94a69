use super::dist::student_t_two_sided_p;
use super::{check_finite, mean, sample_variance, StatsError, TestMethod, TestResult};

/// One-sample t test on the differences `x - y`, `m - 1` dof.
pub fn t_test_paired(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let m = x.len();
    if m < 2 {
        return Err(StatsError::TooFewPoints { got: m, need: 2 });
    }
    check_finite(x)?;
    check_finite(y)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let var = sample_variance(&d);
    if var == 0.0 {
        return Err(StatsError::ZeroVarianceDifferences);
    }
    let t = mean(&d) / (var / m as f64).sqrt();
    let dof = (m - 1) as f64;
    Ok(TestResult {
        statistic: t,
        p_value: student_t_two_sided_p(t, dof),
        n_effective: m,
        dof: Some(dof),
        method: TestMethod::TPaired,
    })
}

/// Two-sample unequal-variance t test with Welch–Satterthwaite dof.
pub fn t_test_welch(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(StatsError::TooFewPoints { got: s.len(), need: 2 });
        }
        check_finite(s)?;
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (sx, sy) = (sample_variance(x) / nx, sample_variance(y) / ny);
    let se2 = sx + sy;
    if se2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (mean(x) - mean(y)) / se2.sqrt();
    let dof = se2 * se2 / (sx * sx / (nx - 1.0) + sy * sy / (ny - 1.0));
    Ok(TestResult {
        statistic: t,
        p_value: student_t_two_sided_p(t, dof),
        n_effective: x.len() + y.len(),
        dof: Some(dof),
        method: TestMethod::TWelch,
    })
}
