//! Weighted least squares and weighted ridge regression with k-fold
//! cross-validated penalty selection. Solved by dense normal equations:
//! p is roster-sized here, so this stays exact and reproducible.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum RegressionError {
    #[error("normal matrix is singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },
    #[error("{rows} rows is fewer than {folds} folds")]
    InsufficientData { rows: usize, folds: usize },
}

/// A fitted (possibly cross-validated) ridge model.
#[derive(Clone, Debug)]
pub struct RidgeFit {
    pub beta: DVector<f64>,
    pub lambda: f64,
    pub fitted: DVector<f64>,
    /// (lambda, cv_error) pairs when CV was used, empty otherwise.
    pub cv_curve: Vec<(f64, f64)>,
    pub intercept: Option<f64>,
}

impl RidgeFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = x * &self.beta;
        if let Some(b0) = self.intercept {
            out.add_scalar_mut(b0);
        }
        out
    }
}

/// Cross-validation settings for penalty selection.
#[derive(Clone, Debug)]
pub struct CvConfig {
    /// Candidate penalties, ascending. None picks the default log grid.
    pub lambda_grid: Option<Vec<f64>>,
    pub folds: usize,
    pub seed: u64,
    pub intercept: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            lambda_grid: None,
            folds: 10,
            seed: 0,
            intercept: false,
        }
    }
}

/// 100 log-spaced penalties spanning [1e-4, 1e4] x scale(X'WY).
pub fn default_lambda_grid(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>) -> Vec<f64> {
    let xtwy = x.transpose() * component_mul(w, y);
    let scale = xtwy.abs().max().max(f64::MIN_POSITIVE);
    let lo = (1e-4 * scale).ln();
    let hi = (1e4 * scale).ln();
    (0..100)
        .map(|i| (lo + (hi - lo) * i as f64 / 99.0).exp())
        .collect()
}

fn component_mul(w: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(y.len(), |i, _| w[i] * y[i])
}

/// X'WX (+ lambda on the diagonal of the non-intercept block) and X'WY,
/// optionally augmented with an unpenalized intercept column.
fn normal_system(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    lambda: f64,
    intercept: bool,
) -> (DMatrix<f64>, DVector<f64>) {
    let (n, p) = (x.nrows(), x.ncols());
    let cols = if intercept { p + 1 } else { p };
    let mut xa = DMatrix::zeros(n, cols);
    xa.view_mut((0, 0), (n, p)).copy_from(x);
    if intercept {
        for i in 0..n {
            xa[(i, p)] = 1.0;
        }
    }
    let wx = DMatrix::from_fn(n, cols, |i, j| w[i] * xa[(i, j)]);
    let mut a = xa.transpose() * wx;
    for j in 0..p {
        a[(j, j)] += lambda;
    }
    let b = xa.transpose() * component_mul(w, y);
    (a, b)
}

fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, RegressionError> {
    match a.clone().cholesky() {
        Some(chol) => Ok(chol.solve(b)),
        None => {
            // fall back to LU; if that also fails, report conditioning
            match a.clone().lu().solve(b) {
                Some(sol) if sol.iter().all(|v| v.is_finite()) => Ok(sol),
                _ => {
                    let eig = nalgebra::linalg::SymmetricEigen::new(a.clone());
                    let max = eig.eigenvalues.abs().max();
                    let min = eig.eigenvalues.abs().min();
                    Err(RegressionError::SingularSystem {
                        condition: max / min.max(f64::MIN_POSITIVE),
                    })
                }
            }
        }
    }
}

/// Weighted ordinary least squares: argmin sum w_i (y_i - x_i'b)^2.
pub fn ols(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<DVector<f64>, RegressionError> {
    let (a, b) = normal_system(x, y, w, 0.0, false);
    solve_spd(&a, &b)
}

/// Weighted ridge at a fixed penalty. Always solvable for lambda > 0.
pub fn ridge(x: &DMatrix<f64>, y: &DVector<f64>, w: &DVector<f64>, lambda: f64) -> RidgeFit {
    ridge_opts(x, y, w, lambda, false)
}

pub fn ridge_opts(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    lambda: f64,
    intercept: bool,
) -> RidgeFit {
    let (a, b) = normal_system(x, y, w, lambda, intercept);
    let sol = solve_spd(&a, &b).unwrap_or_else(|_| DVector::zeros(b.len()));
    let p = x.ncols();
    let beta = DVector::from_fn(p, |j, _| sol[j]);
    let b0 = intercept.then(|| sol[p]);
    let mut fitted = x * &beta;
    if let Some(c) = b0 {
        fitted.add_scalar_mut(c);
    }
    RidgeFit {
        beta,
        lambda,
        fitted,
        cv_curve: Vec::new(),
        intercept: b0,
    }
}

/// k-fold cross-validation over a penalty grid, minimizing weighted squared
/// validation error. Fold assignment is a seeded shuffle; ties in CV error
/// break toward the larger penalty.
pub fn ridge_cv(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    config: &CvConfig,
) -> Result<RidgeFit, RegressionError> {
    let n = x.nrows();
    let folds = config.folds;
    if folds < 2 || n < folds {
        return Err(RegressionError::InsufficientData { rows: n, folds });
    }
    let mut grid = config
        .lambda_grid
        .clone()
        .unwrap_or_else(|| default_lambda_grid(x, y, w));
    grid.sort_by(f64::total_cmp);
    if grid.len() == 1 {
        let mut fit = ridge_opts(x, y, w, grid[0], config.intercept);
        fit.cv_curve = vec![(grid[0], f64::NAN)];
        return Ok(fit);
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    indices.shuffle(&mut rng);
    let fold_of: Vec<usize> = {
        let mut f = vec![0usize; n];
        for (pos, &i) in indices.iter().enumerate() {
            f[i] = pos % folds;
        }
        f
    };

    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &lambda in &grid {
        let mut err = 0.0;
        let mut wsum = 0.0;
        for fold in 0..folds {
            let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
            let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
            let xt = DMatrix::from_fn(train.len(), x.ncols(), |i, j| x[(train[i], j)]);
            let yt = DVector::from_fn(train.len(), |i, _| y[train[i]]);
            let wt = DVector::from_fn(train.len(), |i, _| w[train[i]]);
            let fit = ridge_opts(&xt, &yt, &wt, lambda, config.intercept);
            for &i in &test {
                let mut pred = x.row(i).transpose().dot(&fit.beta);
                if let Some(c) = fit.intercept {
                    pred += c;
                }
                err += w[i] * (y[i] - pred).powi(2);
                wsum += w[i];
            }
        }
        let cv_err = err / wsum.max(f64::MIN_POSITIVE);
        curve.push((lambda, cv_err));
        // <= keeps the larger lambda on ties (grid is ascending)
        if best.map_or(true, |(_, e)| cv_err <= e) {
            best = Some((lambda, cv_err));
        }
    }
    let (lambda, _) = best.expect("nonempty grid");
    let mut fit = ridge_opts(x, y, w, lambda, config.intercept);
    fit.cv_curve = curve;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy() -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let x = DMatrix::from_row_slice(
            5,
            5,
            &[
                1.0, 1.0, 1.0, 0.0, 0.0, //
                1.0, 1.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0, 1.0, 1.0, //
                0.0, 1.0, 0.0, 1.0, 1.0, //
                1.0, 1.0, 0.0, 0.0, 1.0,
            ],
        );
        let y = DVector::from_row_slice(&[3.0, 2.0, -1.0, -2.0, 0.0]);
        let w = DVector::from_row_slice(&[180.0, 180.0, 120.0, 60.0, 60.0]);
        (x, y, w)
    }

    use crate::testutil::gauss_solve;

    #[test]
    fn ols_recovers_toy_coefficients() {
        let (x, y, _) = toy();
        let unit = DVector::from_element(5, 1.0);
        let beta = ols(&x, &y, &unit).unwrap();
        let expect = [2.0, 0.0, 1.0, 0.0, -2.0];
        for j in 0..5 {
            assert_abs_diff_eq!(beta[j], expect[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn ols_zero_response_gives_zero_beta() {
        let (x, _, w) = toy();
        let beta = ols(&x, &DVector::zeros(5), &w).unwrap();
        assert!(beta.abs().max() < 1e-12);
    }

    #[test]
    fn ols_weight_halving_with_duplicated_rows_is_invariant() {
        let (x, y, w) = toy();
        let beta = ols(&x, &y, &w).unwrap();
        let x2 = DMatrix::from_fn(10, 5, |i, j| x[(i % 5, j)]);
        let y2 = DVector::from_fn(10, |i, _| y[i % 5]);
        let w2 = DVector::from_fn(10, |i, _| w[i % 5] / 2.0);
        let beta2 = ols(&x2, &y2, &w2).unwrap();
        assert!((beta - beta2).abs().max() < 1e-9);
    }

    #[test]
    fn ols_singular_system_errors() {
        // duplicate column makes X'WX singular
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let y = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        let w = DVector::from_element(3, 1.0);
        assert!(matches!(
            ols(&x, &y, &w),
            Err(RegressionError::SingularSystem { .. })
        ));
    }

    #[test]
    fn ridge_at_zero_equals_ols() {
        let (x, y, _) = toy();
        let unit = DVector::from_element(5, 1.0);
        let fit = ridge(&x, &y, &unit, 0.0);
        let expect = [2.0, 0.0, 1.0, 0.0, -2.0];
        for j in 0..5 {
            assert_abs_diff_eq!(fit.beta[j], expect[j], epsilon = 1e-9);
        }
    }

    #[test]
    fn ridge_huge_lambda_shrinks_to_zero() {
        let (x, y, w) = toy();
        let fit = ridge(&x, &y, &w, 1e12);
        assert!(fit.beta.norm() < 1e-6);
    }

    #[test]
    fn ridge_matches_independent_dense_solve() {
        let (x, y, _) = toy();
        let unit = DVector::from_element(5, 1.0);
        let fit = ridge(&x, &y, &unit, 1.0);
        let mut a = x.transpose() * &x;
        for j in 0..5 {
            a[(j, j)] += 1.0;
        }
        let expect = gauss_solve(&a, &(x.transpose() * &y));
        assert!((fit.beta - expect).abs().max() < 1e-10);
    }

    #[test]
    fn normal_equation_residual_is_small() {
        let (x, y, w) = toy();
        for lambda in [0.0, 0.5, 10.0, 500.0] {
            let fit = ridge(&x, &y, &w, lambda);
            let wx = DMatrix::from_fn(5, 5, |i, j| w[i] * x[(i, j)]);
            let mut a = x.transpose() * wx;
            for j in 0..5 {
                a[(j, j)] += lambda;
            }
            let rhs = x.transpose() * component_mul(&w, &y);
            let resid = (&a * &fit.beta - &rhs).abs().max();
            assert!(resid < 1e-8 * rhs.abs().max().max(1.0), "lambda {lambda}");
        }
    }

    #[test]
    fn penalized_objective_and_norm_monotonicity() {
        let (x, y, w) = toy();
        let obj = |beta: &DVector<f64>, lambda: f64| {
            let r = &y - &x * beta;
            (0..5).map(|i| w[i] * r[i] * r[i]).sum::<f64>() + lambda * beta.norm_squared()
        };
        let beta_ols = ols(&x, &y, &w).unwrap();
        let mut prev_norm = f64::INFINITY;
        for lambda in [0.1, 1.0, 10.0, 100.0, 1000.0] {
            let fit = ridge(&x, &y, &w, lambda);
            assert!(obj(&fit.beta, lambda) <= obj(&beta_ols, lambda) + 1e-9);
            assert!(fit.beta.norm() <= prev_norm + 1e-12);
            prev_norm = fit.beta.norm();
        }
    }

    #[test]
    fn ridge_gradient_matches_finite_differences() {
        let (x, y, w) = toy();
        let lambda = 3.0;
        let obj = |beta: &DVector<f64>| {
            let r = &y - &x * beta;
            (0..5).map(|i| w[i] * r[i] * r[i]).sum::<f64>() + lambda * beta.norm_squared()
        };
        let beta = DVector::from_row_slice(&[0.3, -0.7, 1.1, 0.2, -0.5]);
        // analytic: -2 X'W(y - Xb) + 2 lambda b
        let r = &y - &x * &beta;
        let grad = -2.0 * x.transpose() * component_mul(&w, &r) + 2.0 * lambda * &beta;
        let h = 1e-6;
        for j in 0..5 {
            let mut bp = beta.clone();
            let mut bm = beta.clone();
            bp[j] += h;
            bm[j] -= h;
            let fd = (obj(&bp) - obj(&bm)) / (2.0 * h);
            let rel = (grad[j] - fd).abs() / grad[j].abs().max(1.0);
            assert!(rel < 1e-5, "coord {j}: analytic {} fd {fd}", grad[j]);
        }
    }

    #[test]
    fn cv_single_lambda_grid_equals_fixed_ridge() {
        let (x, y, w) = toy();
        let cfg = CvConfig {
            lambda_grid: Some(vec![2.5]),
            folds: 5,
            ..Default::default()
        };
        let cv = ridge_cv(&x, &y, &w, &cfg).unwrap();
        let fixed = ridge(&x, &y, &w, 2.5);
        assert!((cv.beta - fixed.beta).abs().max() < 1e-12);
    }

    #[test]
    fn cv_is_deterministic_under_seed() {
        let (x, y, w) = toy();
        let cfg = CvConfig {
            folds: 5,
            seed: 42,
            ..Default::default()
        };
        let a = ridge_cv(&x, &y, &w, &cfg).unwrap();
        let b = ridge_cv(&x, &y, &w, &cfg).unwrap();
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.cv_curve, b.cv_curve);
        assert!((a.beta - b.beta).abs().max() == 0.0);
    }

    #[test]
    fn cv_rejects_fewer_rows_than_folds() {
        let (x, y, w) = toy();
        let cfg = CvConfig {
            folds: 10,
            ..Default::default()
        };
        assert!(matches!(
            ridge_cv(&x, &y, &w, &cfg),
            Err(RegressionError::InsufficientData { rows: 5, folds: 10 })
        ));
    }

    #[test]
    fn cv_recovers_planted_coefficients() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (n, p) = (400, 5);
        let truth = DVector::from_row_slice(&[1.5, -0.8, 0.0, 2.0, -1.2]);
        let x = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(n, |i, _| {
            x.row(i).transpose().dot(&truth) + rng.gen_range(-0.3..0.3)
        });
        let w = DVector::from_element(n, 1.0);
        let fit = ridge_cv(&x, &y, &w, &CvConfig { folds: 10, seed: 1, ..Default::default() }).unwrap();
        let rmse = ((&fit.beta - &truth).norm_squared() / p as f64).sqrt();
        assert!(rmse < 0.1, "rmse {rmse}");
    }

    #[test]
    fn fitted_values_equal_x_beta() {
        let (x, y, w) = toy();
        let fit = ridge(&x, &y, &w, 2.0);
        assert!((&x * &fit.beta - &fit.fitted).abs().max() < 1e-10);
    }
}
