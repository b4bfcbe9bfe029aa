//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Matrices whose condition number exceeds this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// Condition number (ratio of extreme singular values). Infinite when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a x = b`, returning `None` when `a` is singular or too badly conditioned.
pub fn solve_checked(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Some(DMatrix::zeros(0, b.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(min > 0.0) || !max.is_finite() || max / min > MAX_CONDITION {
        return None;
    }
    svd.solve(b, 0.0).ok()
}

/// Vector right-hand side variant of [`solve_checked`].
pub fn solve_vec_checked(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let rhs = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    solve_checked(a, &rhs).map(|x| x.column(0).into_owned())
}

/// Least squares through the normal equations with a condition check.
/// Returns coefficients with one column per response column of `y`.
pub fn least_squares(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let xt = x.transpose();
    solve_checked(&(&xt * x), &(&xt * y))
}

/// Square-root factor `L` with `L Lᵀ = cov` for a symmetric PSD matrix.
///
/// Cholesky is tried first; singular PSD matrices fall back to an eigen
/// factorization with tiny negative eigenvalues clamped to zero. Returns
/// `None` when the smallest eigenvalue is clearly negative.
pub fn psd_factor(cov: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = cov.clone().cholesky() {
        return Some(ch.l());
    }
    let eig = SymmetricEigen::new(cov.clone());
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < -1e-10 * scale) {
        return None;
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Some(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

/// Sample covariance (denominator `rows - 1`) of the rows of `x`.
pub fn sample_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let denom = (n.max(2) - 1) as f64;
    centered.transpose() * centered / denom
}

/// A multivariate Gaussian law with a cached Cholesky factor of its covariance.
#[derive(Debug, Clone)]
pub struct Gaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    log_det: f64,
}

impl Gaussian {
    /// Builds the law; a covariance that is not positive definite is
    /// regularized by `1e-8 I`. The returned flag reports whether that happened.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> (Self, bool) {
        let sym = (&cov + cov.transpose()) * 0.5;
        let (chol, regularized) = match sym.clone().cholesky() {
            Some(c) if condition_number(&sym) <= MAX_CONDITION => (c, false),
            _ => {
                let d = sym.nrows();
                let reg = &sym + DMatrix::identity(d, d) * 1e-8;
                let c = reg
                    .clone()
                    .cholesky()
                    .unwrap_or_else(|| DMatrix::<f64>::identity(d, d).cholesky().unwrap());
                (c, true)
            }
        };
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        (
            Gaussian {
                mean,
                cov: sym,
                chol_l: l,
                log_det,
            },
            regularized,
        )
    }

    /// Mahalanobis quadratic form `(x - mean)ᵀ Σ⁻¹ (x - mean)`.
    pub fn mahalanobis(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let z = self
            .chol_l
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        z.norm_squared()
    }

    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = self.mean.len() as f64;
        -0.5 * (self.mahalanobis(x) + self.log_det + d * (2.0 * std::f64::consts::PI).ln())
    }
}

/// Result of a ridge fit with an unpenalized intercept.
#[derive(Debug, Clone)]
pub struct RidgeFit {
    pub intercept: f64,
    pub coef: DVector<f64>,
    pub penalty: f64,
    pub gcv: f64,
}

/// Log-spaced penalty grid `[lo, hi]` with `count` points.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Ridge regression of `y` on the columns of `x` plus an unpenalized
/// intercept, with the penalty picked by generalized cross-validation over
/// `grid`. Ties go to the smaller penalty.
pub fn ridge_gcv(x: &DMatrix<f64>, y: &DVector<f64>, grid: &[f64]) -> Option<RidgeFit> {
    let n = x.nrows();
    let p = x.ncols();
    if n < 2 || grid.is_empty() {
        return None;
    }
    let x_mean = x.row_mean();
    let y_mean = y.mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = y.map(|v| v - y_mean);
    let svd = xc.svd(true, true);
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let sv = &svd.singular_values;
    let uty = u.transpose() * &yc;
    // Residual part of y outside the column space of U.
    let outside = (yc.norm_squared() - uty.norm_squared()).max(0.0);

    let mut best: Option<(f64, f64)> = None;
    let mut sorted: Vec<f64> = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &lambda in &sorted {
        let mut rss = outside;
        let mut df = 1.0;
        for k in 0..sv.len() {
            let s2 = sv[k] * sv[k];
            let shrink = s2 / (s2 + lambda);
            df += shrink;
            let r = (1.0 - shrink) * uty[k];
            rss += r * r;
        }
        let denom = n as f64 - df;
        let score = if denom > 0.0 {
            n as f64 * rss / (denom * denom)
        } else {
            f64::INFINITY
        };
        match best {
            Some((_, s)) if score >= s => {}
            _ => best = Some((lambda, score)),
        }
    }
    let (lambda, gcv) = best?;
    let mut w = DVector::zeros(sv.len());
    for k in 0..sv.len() {
        let s = sv[k];
        w[k] = if s > 0.0 { s / (s * s + lambda) * uty[k] } else { 0.0 };
    }
    let coef = v_t.transpose() * w;
    debug_assert_eq!(coef.len(), p);
    let intercept = y_mean - (x_mean * &coef)[0];
    Some(RidgeFit {
        intercept,
        coef,
        penalty: lambda,
        gcv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_rejects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(solve_checked(&a, &b).is_none());
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve_checked(&a, &b).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-14 && (x[(1, 0)] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn psd_factor_handles_singular_psd() {
        // rank one, PSD
        let v = DVector::from_vec(vec![1.0, -1.0, 2.0]);
        let cov = &v * v.transpose();
        let l = psd_factor(&cov).unwrap();
        assert!((&l * l.transpose() - &cov).norm() < 1e-10);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_factor(&bad).is_none());
    }

    #[test]
    fn gaussian_density_matches_scalar_formula() {
        let (g, reg) = Gaussian::new(DVector::from_vec(vec![1.0]), DMatrix::from_element(1, 1, 4.0));
        assert!(!reg);
        let x = DVector::from_vec(vec![2.5]);
        let expect = -0.5 * (1.5f64 * 1.5 / 4.0) - 0.5 * (2.0 * std::f64::consts::PI * 4.0).ln();
        assert!((g.log_density(&x) - expect).abs() < 1e-12);
    }

    #[test]
    fn ridge_gcv_recovers_noiseless_line() {
        let x = DMatrix::from_fn(20, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0 + j as f64 * 0.3);
        let y = DVector::from_fn(20, |i, _| 1.5 + 2.0 * x[(i, 0)] - 0.5 * x[(i, 1)]);
        let fit = ridge_gcv(&x, &y, &log_grid(1e-8, 1e2, 25)).unwrap();
        assert_eq!(fit.penalty, 1e-8);
        assert!((fit.intercept - 1.5).abs() < 1e-6);
        assert!((fit.coef[0] - 2.0).abs() < 1e-6 && (fit.coef[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-8, 1e2, 25);
        assert_eq!(g.len(), 25);
        assert!((g[0] - 1e-8).abs() < 1e-20);
        assert!((g[24] - 1e2).abs() < 1e-9);
    }
}
