//! Small numeric helpers shared by the estimators: moments, correlations,
//! least squares with collinearity detection, and the standard normal.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Fraction of a regressor's variance left unexplained by the preceding
/// regressors below which the system is treated as singular.
pub const COLLINEARITY_TOL: f64 = 1e-12;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample (n - 1) standard deviation.
pub fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// Centers and scales a column to mean 0 and sample sd 1 in place.
/// Returns `None` when the column is constant.
pub fn standardize_in_place(x: &mut [f64]) -> Option<(f64, f64)> {
    let m = mean(x);
    let sd = sample_sd(x);
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    // rounding noise around a constant is still a constant
    if !(sd > 1e-12 * scale) || !sd.is_finite() {
        return None;
    }
    for v in x.iter_mut() {
        *v = (*v - m) / sd;
    }
    Some((m, sd))
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
}

/// Least squares of `y` on the columns of `x` after centering both, so no
/// intercept appears in the result. `label` names the regression in errors.
pub fn ols_centered(x: &DMatrix<f64>, y: &[f64], label: &str) -> Result<OlsFit> {
    let n = x.nrows();
    let k = x.ncols();
    assert_eq!(n, y.len());
    if k == 0 {
        return Ok(OlsFit {
            coefficients: Vec::new(),
            r_squared: 0.0,
        });
    }
    let mut xc = x.clone();
    for mut col in xc.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let ym = mean(y);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - ym));

    let xtx = xc.tr_mul(&xc);
    let xty = xc.tr_mul(&yc);
    let coef = solve_spd(xtx, xty, label)?;

    let fitted = &xc * &coef;
    let sse: f64 = (&yc - fitted).iter().map(|e| e * e).sum();
    let sst: f64 = yc.iter().map(|e| e * e).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - sse / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(OlsFit {
        coefficients: coef.iter().copied().collect(),
        r_squared,
    })
}

/// Solves `a x = b` for symmetric positive semi-definite `a` by Cholesky,
/// rejecting systems where some column is (numerically) a linear
/// combination of the ones before it.
pub fn solve_spd(a: DMatrix<f64>, b: DVector<f64>, label: &str) -> Result<DVector<f64>> {
    let k = a.nrows();
    let mut l = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let diag = a[(j, j)];
        if !(diag > 0.0) {
            return Err(Error::Singular(label.to_string()));
        }
        let mut s = diag;
        for p in 0..j {
            s -= l[(j, p)] * l[(j, p)];
        }
        if s / diag < COLLINEARITY_TOL {
            return Err(Error::Singular(label.to_string()));
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..k {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    // forward then backward substitution
    let mut z = b;
    for i in 0..k {
        let mut s = z[i];
        for p in 0..i {
            s -= l[(i, p)] * z[p];
        }
        z[i] = s / l[(i, i)];
    }
    for i in (0..k).rev() {
        let mut s = z[i];
        for p in (i + 1)..k {
            s -= l[(p, i)] * z[p];
        }
        z[i] = s / l[(i, i)];
    }
    Ok(z)
}

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Two-tailed p value of a standard normal statistic.
pub fn two_tailed_p(z: f64) -> f64 {
    (2.0 * std_normal().sf(z.abs())).min(1.0)
}

/// Empirical quantile with linear interpolation between order statistics
/// (h = (n - 1) p). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_of_affine_copy_is_one() {
        let a = [1.0, 2.0, 4.0, 7.0];
        let b: Vec<f64> = a.iter().map(|v| 3.0 * v - 2.0).collect();
        assert!((correlation(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_recovers_exact_linear_relation() {
        let x = DMatrix::from_row_slice(5, 2, &[1., 0., 2., 1., 3., 0., 4., 1., 5., 3.]);
        let y: Vec<f64> = (0..5).map(|i| 2.0 * x[(i, 0)] - 0.5 * x[(i, 1)] + 7.0).collect();
        let fit = ols_centered(&x, &y, "t").unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((fit.coefficients[1] + 0.5).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_regressor_is_singular() {
        let x = DMatrix::from_row_slice(4, 2, &[1., 2., 2., 4., 3., 6., 5., 10.]);
        let err = ols_centered(&x, &[1., 2., 3., 4.], "blk").unwrap_err();
        assert!(matches!(err, Error::Singular(ref s) if s == "blk"));
    }

    #[test]
    fn normal_tail_values() {
        assert!((two_tailed_p(1.96) - 0.05).abs() < 5e-5);
        assert_eq!(two_tailed_p(0.0), 1.0);
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn interpolated_quantile() {
        let s = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&s, 0.5), 1.5);
        assert_eq!(quantile_sorted(&s, 0.0), 0.0);
        assert_eq!(quantile_sorted(&s, 1.0), 3.0);
    }
}
