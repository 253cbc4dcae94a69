use super::{check_finite, StatsError};

/// Linear interpolation between order statistics (the "type 7" rule).
///
/// For a sorted sample `x[0..n]` and probability `p`, `h = (n - 1) p` and the
/// result is `x[⌊h⌋] + (h - ⌊h⌋) (x[⌊h⌋ + 1] - x[⌊h⌋])`.
pub fn quantiles(values: &[f64], probs: &[f64]) -> Result<Vec<f64>, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(values)?;
    if let Some(p) = probs.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(StatsError::BadProbability(p.to_string()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = sorted.len() - 1;
    Ok(probs
        .iter()
        .map(|&p| {
            let h = last as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(last);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type7_values() {
        let q = quantiles(&[4.0, 1.0, 3.0, 2.0, 5.0], &[0.25, 0.5, 0.75]).unwrap();
        assert_eq!(q, vec![2.0, 3.0, 4.0]);
        let q = quantiles(&[1.0, 2.0, 3.0, 4.0], &[0.25, 0.5, 0.75]).unwrap();
        assert_eq!(q, vec![1.75, 2.5, 3.25]);
        assert_eq!(quantiles(&[7.0], &[0.25, 0.5, 0.75]).unwrap(), vec![7.0; 3]);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(quantiles(&[], &[0.5]), Err(StatsError::Empty));
        assert!(matches!(quantiles(&[1.0], &[1.0]), Err(StatsError::BadProbability(_))));
        assert_eq!(quantiles(&[f64::NAN], &[0.5]), Err(StatsError::NonFinite));
    }
}
