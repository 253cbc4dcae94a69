//! Householder-QR least squares for tall, thin design matrices.

use nalgebra::DMatrix;

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Solution {
    pub coefficients: Vec<f64>,
    /// Singular values of the design matrix, descending.
    pub singular_values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RankDeficient {
    /// Smallest over largest singular value.
    pub ratio: f64,
}

/// Minimizes `|y - A x|` for a column-major `A` (`columns[j][i]`).
///
/// `A = QR` by Householder reflections applied in place; `Qᵀ y` is
/// accumulated alongside. The singular values of `A` equal those of the
/// `p x p` factor `R`, which is what the rank test inspects.
pub(crate) fn solve(mut columns: Vec<Vec<f64>>, mut y: Vec<f64>) -> Result<Solution, RankDeficient> {
    let p = columns.len();
    let n = y.len();
    assert!(p > 0 && n >= p);
    assert!(columns.iter().all(|c| c.len() == n));

    let mut v = vec![0.0; n];
    for j in 0..p {
        let norm = columns[j][j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if columns[j][j] > 0.0 { -norm } else { norm };
        let v = &mut v[j..];
        v.copy_from_slice(&columns[j][j..]);
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        let reflect = |target: &mut [f64]| {
            let s = 2.0 * v.iter().zip(target.iter()).map(|(a, b)| a * b).sum::<f64>() / vv;
            for (t, vi) in target.iter_mut().zip(v.iter()) {
                *t -= s * vi;
            }
        };
        for col in columns.iter_mut().skip(j) {
            reflect(&mut col[j..]);
        }
        reflect(&mut y[j..]);
    }

    let r = DMatrix::from_fn(p, p, |i, k| if i <= k { columns[k][i] } else { 0.0 });
    let mut singular_values: Vec<f64> = r.singular_values().iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let largest = singular_values[0];
    let smallest = singular_values[p - 1];
    if !(largest > 0.0) || smallest <= RANK_TOLERANCE * largest {
        return Err(RankDeficient {
            ratio: if largest > 0.0 { smallest / largest } else { 0.0 },
        });
    }

    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let tail: f64 = ((i + 1)..p).map(|k| columns[k][i] * x[k]).sum();
        x[i] = (y[i] - tail) / columns[i][i];
    }
    Ok(Solution {
        coefficients: x,
        singular_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_system_is_solved_exactly() {
        // [[2, 1], [1, 3]] x = [3, 5] -> x = [0.8, 1.4]
        let s = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((s.coefficients[0] - 0.8).abs() < 1e-14);
        assert!((s.coefficients[1] - 1.4).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_line_fit() {
        // slope = 7/5, intercept = 4 - 1.4 * 1.5
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![2.0, 3.0, 5.0, 6.0];
        let s = solve(vec![x, vec![1.0; 4]], y).unwrap();
        assert!((s.coefficients[0] - 1.4).abs() < 1e-12);
        assert!((s.coefficients[1] - 1.9).abs() < 1e-12);
    }

    #[test]
    fn collinear_columns_are_rank_deficient() {
        let ones = vec![1.0; 5];
        let fifty = vec![50.0; 5];
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let err = solve(vec![x, fifty, ones], vec![1.0; 5]).unwrap_err();
        assert!(err.ratio < RANK_TOLERANCE);
        assert!(solve(vec![vec![0.0; 3]], vec![1.0; 3]).is_err());
    }
}
