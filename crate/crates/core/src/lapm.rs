//! LAPM: Bayesian vertex regression on the extended line graph.
//!
//! Model: Y_v | beta ~ N(beta_v, sigma^2) independently, with a Gaussian
//! prior on beta whose precision is lambda * L_w. Expanding beta in the
//! Laplacian eigenbasis (beta = Phi theta) diagonalizes both likelihood
//! and prior, so the MAP is closed-form per coordinate and the penalty's
//! null directions (one per connected component) are simply unpenalized.
//! Posterior sampling uses MALA on theta, with sigma^2 either held fixed,
//! refreshed by a Gibbs step from its inverse-gamma conditional, or moved
//! jointly with theta in log space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use thiserror::Error;

use crate::model::{GeneralizedLineup, LineGraph};
use crate::rank::{table_from_scores, RankedTable};

#[derive(Error, Debug)]
pub enum LapmError {
    #[error("sigma2 must be positive, got {0}")]
    Domain(f64),
}

/// How many eigenvectors to keep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauPolicy {
    /// Largest sequential eigenvalue gap (last maximizer on ties).
    Elbow,
    Fixed(usize),
    Full,
}

/// The first tau eigenvectors of L_w, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    pub phi: DMatrix<f64>,
    pub xi: Vec<f64>,
    pub tau: usize,
    /// Sequential eigenvalue differences examined by the elbow rule.
    pub elbow_diagnostics: Vec<f64>,
}

impl SpectralBasis {
    pub fn from_line_graph(lg: &LineGraph, policy: TauPolicy) -> SpectralBasis {
        let n = lg.n();
        let xi_full: Vec<f64> = lg.eigenvalues.iter().cloned().collect();
        let gaps: Vec<f64> = xi_full.windows(2).map(|w| w[1] - w[0]).collect();
        let tau = match policy {
            TauPolicy::Elbow => select_tau(&xi_full),
            TauPolicy::Fixed(t) => t.min(n).max(1),
            TauPolicy::Full => n,
        };
        let phi = DMatrix::from_fn(n, tau, |i, j| lg.eigenvectors[(i, j)]);
        SpectralBasis {
            phi,
            xi: xi_full[..tau].to_vec(),
            tau,
            elbow_diagnostics: gaps,
        }
    }

    pub fn n(&self) -> usize {
        self.phi.nrows()
    }
}

/// Elbow rule: keep eigenvectors 1..=i where i maximizes the forward
/// difference xi[i+1] - xi[i]; the last maximizer wins on ties (keeps more
/// basis directions).
pub fn select_tau(xi: &[f64]) -> usize {
    if xi.len() < 2 {
        return xi.len().max(1);
    }
    let mut best = 1;
    let mut best_gap = f64::NEG_INFINITY;
    for i in 1..xi.len() {
        let gap = xi[i] - xi[i - 1];
        if gap >= best_gap {
            best_gap = gap;
            best = i;
        }
    }
    best
}

/// MAP fit: vertex scores and eigenbasis coefficients at combined shrinkage
/// kappa = lambda * sigma^2.
#[derive(Clone, Debug)]
pub struct LapmFit {
    pub beta_map: DVector<f64>,
    pub theta_map: DVector<f64>,
    pub kappa: f64,
    pub sigma2_hat: f64,
}

/// Closed-form MAP in the eigenbasis: theta_i = (phi_i . Y) / (1 + kappa xi_i).
pub fn lapm_map(lg: &LineGraph, basis: &SpectralBasis, kappa: f64) -> LapmFit {
    let y = lg.y();
    let proj = basis.phi.transpose() * &y;
    let theta_map = DVector::from_fn(basis.tau, |i, _| proj[i] / (1.0 + kappa * basis.xi[i]));
    let beta_map = &basis.phi * &theta_map;
    let resid = &y - &beta_map;
    let sigma2_hat = resid.norm_squared() / lg.n().max(1) as f64;
    LapmFit {
        beta_map,
        theta_map,
        kappa,
        sigma2_hat,
    }
}

/// Select kappa by k-fold CV over a log grid: held-out vertices are predicted
/// by the smooth field fit on the training vertices (likelihood restricted to
/// the training rows, prior unchanged).
pub fn lapm_map_cv(
    lg: &LineGraph,
    basis: &SpectralBasis,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> (LapmFit, Vec<(f64, f64)>) {
    let n = lg.n();
    let y = lg.y();
    let folds = folds.min(n).max(2);
    let mut indices: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
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
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &kappa in &sorted {
        let mut err = 0.0;
        for fold in 0..folds {
            // mask held-out rows out of the likelihood: solve
            // (M + kappa L) beta = M y with M the train-row indicator
            let mut a = lg.laplacian.clone() * kappa;
            let mut rhs = DVector::zeros(n);
            for i in 0..n {
                if fold_of[i] != fold {
                    a[(i, i)] += 1.0;
                    rhs[i] = y[i];
                }
            }
            if let Some(chol) = a.cholesky() {
                let beta = chol.solve(&rhs);
                for i in 0..n {
                    if fold_of[i] == fold {
                        err += (y[i] - beta[i]).powi(2);
                    }
                }
            } else {
                err = f64::INFINITY;
            }
        }
        curve.push((kappa, err));
        if best.map_or(true, |(_, e)| err <= e) {
            best = Some((kappa, err));
        }
    }
    let (kappa, _) = best.expect("nonempty grid");
    (lapm_map(lg, basis, kappa), curve)
}

/// Log posterior over (theta, sigma2) with the improper 1/sigma^2 prior
/// (additive constants dropped). With `include_sigma_terms` false this is
/// the fixed-sigma2 target over theta alone.
pub fn log_posterior(
    theta: &DVector<f64>,
    sigma2: f64,
    y: &DVector<f64>,
    basis: &SpectralBasis,
    lambda: f64,
    include_sigma_terms: bool,
) -> f64 {
    let resid = y - &basis.phi * theta;
    let n = y.len() as f64;
    let mut lp = -resid.norm_squared() / (2.0 * sigma2);
    for i in 0..basis.tau {
        lp -= 0.5 * lambda * basis.xi[i] * theta[i] * theta[i];
    }
    if include_sigma_terms {
        lp += -(n / 2.0) * sigma2.ln() - sigma2.ln();
    }
    lp
}

/// Gradient of the log posterior: per-theta components and the derivative
/// with respect to log sigma^2 (including the -1 from the 1/sigma^2 prior).
pub fn grad_log_posterior(
    theta: &DVector<f64>,
    sigma2: f64,
    y: &DVector<f64>,
    basis: &SpectralBasis,
    lambda: f64,
) -> Result<(DVector<f64>, f64), LapmError> {
    if sigma2 <= 0.0 {
        return Err(LapmError::Domain(sigma2));
    }
    let resid = y - &basis.phi * theta;
    let proj = basis.phi.transpose() * &resid;
    let grad_theta = DVector::from_fn(basis.tau, |i, _| {
        proj[i] / sigma2 - lambda * basis.xi[i] * theta[i]
    });
    let n = y.len() as f64;
    let grad_log_sigma2 = -n / 2.0 + resid.norm_squared() / (2.0 * sigma2) - 1.0;
    Ok((grad_theta, grad_log_sigma2))
}

/// Retention schedule: `retained` draws kept after a burn-in fraction and
/// thinning.
#[derive(Clone, Copy, Debug)]
pub struct MalaSchedule {
    pub retained: usize,
    pub burn_in_fraction: f64,
    pub thin: usize,
}

impl Default for MalaSchedule {
    fn default() -> Self {
        MalaSchedule {
            retained: 1000,
            burn_in_fraction: 0.10,
            thin: 5,
        }
    }
}

impl MalaSchedule {
    pub fn total_iterations(&self) -> usize {
        let post = self.retained * self.thin;
        (post as f64 / (1.0 - self.burn_in_fraction)).ceil() as usize
    }

    pub fn burn_in(&self) -> usize {
        self.total_iterations() - self.retained * self.thin
    }
}

/// How sigma^2 moves during sampling.
#[derive(Clone, Copy, Debug)]
pub enum SigmaPolicy {
    /// Hold sigma^2 at a known value.
    Fixed(f64),
    /// Gibbs refresh from the inverse-gamma conditional between MALA steps.
    Gibbs,
    /// Move log sigma^2 jointly with theta inside the MALA proposal.
    JointMala,
}

/// Posterior draws of (theta, sigma^2) plus sampler diagnostics.
#[derive(Clone, Debug)]
pub struct PosteriorSamples {
    pub theta_draws: Vec<DVector<f64>>,
    pub sigma2_draws: Vec<f64>,
    pub schedule: MalaSchedule,
    pub step_size: f64,
    pub acceptance_rate: f64,
    pub seed: u64,
    /// Set when the post-adaptation acceptance rate leaves [0.1, 0.9].
    pub adaptation_warning: Option<String>,
}

impl PosteriorSamples {
    /// Vertex-score draws: beta = Phi theta per retained draw.
    pub fn beta_draws(&self, basis: &SpectralBasis) -> Vec<DVector<f64>> {
        self.theta_draws.iter().map(|t| &basis.phi * t).collect()
    }

    pub fn posterior_mean_beta(&self, basis: &SpectralBasis) -> DVector<f64> {
        let mut acc = DVector::zeros(basis.n());
        for t in &self.theta_draws {
            acc += &basis.phi * t;
        }
        acc / self.theta_draws.len().max(1) as f64
    }
}

const MALA_TARGET_ACCEPT: f64 = 0.574;

/// Metropolis-adjusted Langevin sampling of the LAPM posterior. The step
/// size adapts toward the 0.574 acceptance target during burn-in and is
/// frozen afterwards. Fully deterministic under a fixed seed.
pub fn mala_sample(
    lg: &LineGraph,
    basis: &SpectralBasis,
    lambda: f64,
    schedule: MalaSchedule,
    sigma: SigmaPolicy,
    seed: u64,
) -> PosteriorSamples {
    let y = lg.y();
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // start at the mode for the initial sigma2 guess
    let mut sigma2 = match sigma {
        SigmaPolicy::Fixed(s) => s,
        _ => {
            let pilot = lapm_map(lg, basis, 0.0);
            pilot.sigma2_hat.max(1e-6)
        }
    };
    let map = lapm_map(lg, basis, lambda * sigma2);
    let theta = map.theta_map.clone();

    let joint = matches!(sigma, SigmaPolicy::JointMala);
    let max_precision = basis
        .xi
        .iter()
        .map(|&xi| 1.0 / sigma2 + lambda * xi)
        .fold(1.0 / sigma2, f64::max);
    let mut eps = 1.0 / max_precision.sqrt();

    let total = schedule.total_iterations();
    let burn = schedule.burn_in();
    let mut theta_draws = Vec::with_capacity(schedule.retained);
    let mut sigma2_draws = Vec::with_capacity(schedule.retained);
    let mut accepted_post = 0usize;
    let mut post_steps = 0usize;

    let dim = basis.tau + usize::from(joint);
    // target over the MALA state: theta, plus log sigma2 when joint. The
    // joint target carries the change-of-variables Jacobian (+log sigma2).
    let state_target = |v: &DVector<f64>, fixed_sigma2: f64| -> f64 {
        let th = v.rows(0, basis.tau).into_owned();
        let s2 = if joint { v[basis.tau].exp() } else { fixed_sigma2 };
        let lp = log_posterior(&th, s2, &y, basis, lambda, joint);
        if joint {
            lp + s2.ln()
        } else {
            lp
        }
    };
    let state_grad = |v: &DVector<f64>, fixed_sigma2: f64| -> DVector<f64> {
        let th = v.rows(0, basis.tau).into_owned();
        let s2 = if joint { v[basis.tau].exp() } else { fixed_sigma2 };
        let (gt, gs) = grad_log_posterior(&th, s2, &y, basis, lambda)
            .expect("sigma2 stays positive by construction");
        let mut g = DVector::zeros(dim);
        g.rows_mut(0, basis.tau).copy_from(&gt);
        if joint {
            // joint moves in u = log sigma2; add the Jacobian derivative
            g[basis.tau] = gs + 1.0;
        }
        g
    };

    let mut state = DVector::zeros(dim);
    state.rows_mut(0, basis.tau).copy_from(&theta);
    if joint {
        state[basis.tau] = sigma2.ln();
    }
    let mut lp = state_target(&state, sigma2);
    let mut g = state_grad(&state, sigma2);

    for iter in 0..total {
        // Gibbs refresh of sigma2 from its inverse-gamma conditional
        if matches!(sigma, SigmaPolicy::Gibbs) {
            let th = state.rows(0, basis.tau).into_owned();
            let ss = (&y - &basis.phi * &th).norm_squared();
            let shape = n as f64 / 2.0;
            let rate = (ss / 2.0).max(1e-300);
            let gamma = Gamma::new(shape, 1.0 / rate).expect("valid gamma");
            sigma2 = (1.0 / gamma.sample(&mut rng)).max(1e-12);
            lp = state_target(&state, sigma2);
            g = state_grad(&state, sigma2);
        }

        let noise = DVector::from_fn(dim, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let mean_fwd = &state + (eps * eps / 2.0) * &g;
        let proposal = &mean_fwd + eps * noise;
        let lp_prop = state_target(&proposal, sigma2);
        let g_prop = state_grad(&proposal, sigma2);
        let mean_rev = &proposal + (eps * eps / 2.0) * &g_prop;
        let log_q_fwd = -(&proposal - &mean_fwd).norm_squared() / (2.0 * eps * eps);
        let log_q_rev = -(&state - &mean_rev).norm_squared() / (2.0 * eps * eps);
        let log_alpha = (lp_prop - lp + log_q_rev - log_q_fwd).min(0.0);
        let accept_prob = log_alpha.exp();
        let u: f64 = rng.gen();
        if u.ln() < log_alpha {
            state = proposal;
            lp = lp_prop;
            g = g_prop;
        }

        if iter < burn {
            // Robbins-Monro drift toward the optimal-scaling target
            eps *= (0.05 * (accept_prob - MALA_TARGET_ACCEPT)).exp();
        } else {
            post_steps += 1;
            if u.ln() < log_alpha {
                accepted_post += 1;
            }
            if (iter - burn + 1) % schedule.thin == 0 {
                theta_draws.push(state.rows(0, basis.tau).into_owned());
                let s2 = if joint { state[basis.tau].exp() } else { sigma2 };
                sigma2_draws.push(s2);
            }
        }
    }

    let acceptance_rate = if post_steps > 0 {
        accepted_post as f64 / post_steps as f64
    } else {
        0.0
    };
    let adaptation_warning = (!(0.1..=0.9).contains(&acceptance_rate)).then(|| {
        format!("acceptance rate {acceptance_rate:.3} outside [0.1, 0.9] after adaptation")
    });
    PosteriorSamples {
        theta_draws,
        sigma2_draws,
        schedule,
        step_size: eps,
        acceptance_rate,
        seed,
        adaptation_warning,
    }
}

/// Within-size ranking of vertex scores (MAP estimates or posterior means).
pub fn lapm_rank(lg: &LineGraph, beta: &DVector<f64>, m: usize) -> RankedTable {
    let units: Vec<(GeneralizedLineup, f64)> = lg
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, r)| r.lineup.size() == m)
        .map(|(i, r)| (r.lineup.clone(), beta[i]))
        .collect();
    table_from_scores("lapm", m, units)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::toy_fixture;
    use crate::model::{build_line_graph, enumerate_generalized, AggregatedRecord, PlayerId};
    use crate::testutil::gauss_solve;
    use nalgebra::DMatrix;

    fn toy_line_graph() -> LineGraph {
        let recs = enumerate_generalized(&toy_fixture(), 3).unwrap();
        build_line_graph(&recs)
    }

    fn gl(ids: &[&str]) -> GeneralizedLineup {
        GeneralizedLineup::canonicalize(ids.iter().map(|s| PlayerId::new(*s)).collect()).unwrap()
    }

    /// 3-node path: AB - BC - CD (AB and CD are disjoint).
    fn path_graph() -> LineGraph {
        let recs = vec![
            AggregatedRecord { lineup: gl(&["A", "B"]), pm: 2, seconds: 10.0, games: 1 },
            AggregatedRecord { lineup: gl(&["B", "C"]), pm: 0, seconds: 10.0, games: 1 },
            AggregatedRecord { lineup: gl(&["C", "D"]), pm: -1, seconds: 10.0, games: 1 },
        ];
        build_line_graph(&recs)
    }

    #[test]
    fn select_tau_largest_gap() {
        assert_eq!(select_tau(&[0.0, 0.1, 0.2, 5.0, 5.1]), 3);
    }

    #[test]
    fn select_tau_equal_gaps_takes_last() {
        assert_eq!(select_tau(&[0.0, 1.0, 2.0, 3.0]), 3);
    }

    #[test]
    fn select_tau_matches_brute_force_on_toy() {
        let lg = toy_line_graph();
        let xi: Vec<f64> = lg.eigenvalues.iter().cloned().collect();
        let brute = (1..xi.len())
            .rev()
            .max_by(|&a, &b| (xi[a] - xi[a - 1]).total_cmp(&(xi[b] - xi[b - 1])))
            .unwrap();
        assert_eq!(select_tau(&xi), brute);
    }

    #[test]
    fn map_kappa_zero_full_basis_is_identity() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let fit = lapm_map(&lg, &basis, 0.0);
        assert!((fit.beta_map - lg.y()).abs().max() < 1e-8);
    }

    #[test]
    fn map_null_direction_is_unshrunk() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let fit = lapm_map(&lg, &basis, 25.0);
        let proj0 = basis.phi.column(0).dot(&lg.y());
        assert!(basis.xi[0].abs() < 1e-10);
        assert!((fit.theta_map[0] - proj0).abs() < 1e-10);
    }

    #[test]
    fn map_full_basis_equals_dense_solve() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        for kappa in [0.1, 1.0, 2.0, 10.0] {
            let fit = lapm_map(&lg, &basis, kappa);
            let a = DMatrix::identity(lg.n(), lg.n()) + kappa * &lg.laplacian;
            let expect = gauss_solve(&a, &lg.y());
            let err = (&fit.beta_map - &expect).abs().max();
            assert!(err < 1e-8, "kappa {kappa}: err {err}");
        }
    }

    #[test]
    fn map_is_a_posterior_maximum() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let sigma2 = 2.0;
        let lambda = 1.5;
        let fit = lapm_map(&lg, &basis, lambda * sigma2);
        let y = lg.y();
        let at_mode = log_posterior(&fit.theta_map, sigma2, &y, &basis, lambda, false);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let delta = DVector::from_fn(basis.tau, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z
            });
            let delta = delta.normalize() * 1e-3;
            let perturbed = &fit.theta_map + delta;
            assert!(log_posterior(&perturbed, sigma2, &y, &basis, lambda, false) <= at_mode);
        }
    }

    #[test]
    fn map_shrinks_laplacian_quadratic_form() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let y = lg.y();
        let smooth = |v: &DVector<f64>| (v.transpose() * &lg.laplacian * v)[(0, 0)];
        let base = smooth(&y);
        for kappa in [0.0, 0.5, 5.0, 50.0] {
            let fit = lapm_map(&lg, &basis, kappa);
            assert!(smooth(&fit.beta_map) <= base + 1e-9, "kappa {kappa}");
        }
    }

    #[test]
    fn gradient_is_zero_at_mode() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let sigma2 = 1.7;
        let lambda = 2.0;
        let fit = lapm_map(&lg, &basis, lambda * sigma2);
        let (g, _) = grad_log_posterior(&fit.theta_map, sigma2, &lg.y(), &basis, lambda).unwrap();
        assert!(g.abs().max() < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let y = lg.y();
        let lambda = 0.8;
        let sigma2 = 1.3;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let theta = DVector::from_fn(basis.tau, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let (g, gs) = grad_log_posterior(&theta, sigma2, &y, &basis, lambda).unwrap();
        let h = 1e-6;
        for i in 0..basis.tau {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += h;
            tm[i] -= h;
            let fd = (log_posterior(&tp, sigma2, &y, &basis, lambda, false)
                - log_posterior(&tm, sigma2, &y, &basis, lambda, false))
                / (2.0 * h);
            let rel = (g[i] - fd).abs() / g[i].abs().max(1.0);
            assert!(rel < 1e-5, "theta[{i}]: analytic {} fd {fd}", g[i]);
        }
        // log sigma2 direction, against the sigma-including posterior
        let u = sigma2.ln();
        let lp = |u: f64| log_posterior(&theta, u.exp(), &y, &basis, lambda, true);
        let fd = (lp(u + h) - lp(u - h)) / (2.0 * h);
        let rel = (gs - fd).abs() / gs.abs().max(1.0);
        assert!(rel < 1e-5, "log sigma2: analytic {gs} fd {fd}");
    }

    #[test]
    fn gradient_lambda_zero_is_least_squares() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let y = lg.y();
        let theta = DVector::from_element(basis.tau, 0.25);
        let (g, _) = grad_log_posterior(&theta, 1.0, &y, &basis, 0.0).unwrap();
        let expect = basis.phi.transpose() * (&y - &basis.phi * &theta);
        assert!((g - expect).abs().max() < 1e-12);
    }

    #[test]
    fn gradient_rejects_nonpositive_sigma2() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let theta = DVector::zeros(basis.tau);
        assert!(matches!(
            grad_log_posterior(&theta, 0.0, &lg.y(), &basis, 1.0),
            Err(LapmError::Domain(_))
        ));
    }

    #[test]
    fn schedule_totals() {
        let s = MalaSchedule::default();
        assert_eq!(s.total_iterations(), 5556);
        assert_eq!(s.burn_in(), 556);
    }

    #[test]
    fn mala_is_deterministic_under_seed() {
        let lg = path_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let sched = MalaSchedule { retained: 50, ..Default::default() };
        let a = mala_sample(&lg, &basis, 1.0, sched, SigmaPolicy::Fixed(1.0), 99);
        let b = mala_sample(&lg, &basis, 1.0, sched, SigmaPolicy::Fixed(1.0), 99);
        assert_eq!(a.theta_draws.len(), 50);
        for (x, y) in a.theta_draws.iter().zip(b.theta_draws.iter()) {
            assert_eq!(x, y);
        }
    }

    /// Batch-means Monte Carlo standard error.
    fn batch_mean_se(values: &[f64], batches: usize) -> f64 {
        let per = values.len() / batches;
        let means: Vec<f64> = (0..batches)
            .map(|b| values[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    }

    #[test]
    fn mala_fixed_sigma_matches_analytic_gaussian() {
        let lg = toy_line_graph();
        // restrict to the 5 full-lineup nodes for a <=10-node graph
        let recs: Vec<AggregatedRecord> = lg
            .nodes
            .iter()
            .filter(|r| r.lineup.size() == 3)
            .cloned()
            .collect();
        let small = build_line_graph(&recs);
        let basis = SpectralBasis::from_line_graph(&small, TauPolicy::Full);
        let sigma2 = 1.0;
        let lambda = 2.0;
        let samples = mala_sample(
            &small,
            &basis,
            lambda,
            MalaSchedule::default(),
            SigmaPolicy::Fixed(sigma2),
            7,
        );
        assert_eq!(samples.theta_draws.len(), 1000);
        assert!(samples.adaptation_warning.is_none(), "{:?}", samples.adaptation_warning);
        // analytic posterior mean: (I/sigma2 + lambda L)^-1 Y / sigma2
        let n = small.n();
        let a = DMatrix::identity(n, n) / sigma2 + lambda * &small.laplacian;
        let mean = gauss_solve(&a, &(small.y() / sigma2));
        let beta_draws = samples.beta_draws(&basis);
        for coord in 0..n {
            let series: Vec<f64> = beta_draws.iter().map(|b| b[coord]).collect();
            let est = series.iter().sum::<f64>() / series.len() as f64;
            let se = batch_mean_se(&series, 20).max(1e-12);
            let z = (est - mean[coord]).abs() / se;
            assert!(z < 3.0, "coord {coord}: est {est}, analytic {}, z {z}", mean[coord]);
        }
    }

    #[test]
    fn mala_path_graph_variance_close_to_analytic() {
        let lg = path_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let sigma2 = 1.0;
        let lambda = 1.5;
        let samples = mala_sample(
            &lg,
            &basis,
            lambda,
            MalaSchedule::default(),
            SigmaPolicy::Fixed(sigma2),
            21,
        );
        // theta posterior is independent Gaussian: var = 1/(1/sigma2 + lambda xi)
        for i in 0..basis.tau {
            let series: Vec<f64> = samples.theta_draws.iter().map(|t| t[i]).collect();
            let mean = series.iter().sum::<f64>() / series.len() as f64;
            let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (series.len() - 1) as f64;
            let analytic = 1.0 / (1.0 / sigma2 + lambda * basis.xi[i]);
            let rel = (var - analytic).abs() / analytic;
            assert!(rel < 0.2, "theta[{i}]: var {var} vs {analytic}");
        }
    }

    #[test]
    fn mala_large_lambda_flattens_beta() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let sched = MalaSchedule { retained: 200, ..Default::default() };
        let samples = mala_sample(&lg, &basis, 1e6, sched, SigmaPolicy::Fixed(1.0), 5);
        let mean_beta = samples.posterior_mean_beta(&basis);
        let avg = mean_beta.sum() / mean_beta.len() as f64;
        let spread = mean_beta.iter().map(|b| (b - avg).powi(2)).sum::<f64>()
            / mean_beta.len() as f64;
        assert!(spread < 1e-3, "vertex spread {spread}");
    }

    #[test]
    fn gibbs_sigma_samples_are_positive_and_plausible() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let sched = MalaSchedule { retained: 200, ..Default::default() };
        let samples = mala_sample(&lg, &basis, 0.5, sched, SigmaPolicy::Gibbs, 13);
        assert!(samples.sigma2_draws.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn joint_mala_runs_and_keeps_sigma_positive() {
        let lg = path_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let sched = MalaSchedule { retained: 100, ..Default::default() };
        let samples = mala_sample(&lg, &basis, 0.5, sched, SigmaPolicy::JointMala, 17);
        assert_eq!(samples.sigma2_draws.len(), 100);
        assert!(samples.sigma2_draws.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn rank_kappa_zero_singletons_follow_raw_pm() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let fit = lapm_map(&lg, &basis, 0.0);
        let table = lapm_rank(&lg, &fit.beta_map, 1);
        let ids: Vec<&str> = table.rows.iter().map(|r| r.lineup.members()[0].as_str()).collect();
        assert_eq!(ids, vec!["A", "B", "C", "D", "E"]);
    }

    #[test]
    fn rank_absent_size_is_empty() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let fit = lapm_map(&lg, &basis, 1.0);
        assert!(lapm_rank(&lg, &fit.beta_map, 4).is_empty());
    }

    #[test]
    fn rank_kappa_two_matches_dense_solve_ranking() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let fit = lapm_map(&lg, &basis, 2.0);
        let a = DMatrix::identity(lg.n(), lg.n()) + 2.0 * &lg.laplacian;
        let expect = gauss_solve(&a, &lg.y());
        for m in 1..=3 {
            let table = lapm_rank(&lg, &fit.beta_map, m);
            let oracle = lapm_rank(&lg, &expect, m);
            let a_order: Vec<&GeneralizedLineup> = table.rows.iter().map(|r| &r.lineup).collect();
            let b_order: Vec<&GeneralizedLineup> = oracle.rows.iter().map(|r| &r.lineup).collect();
            assert_eq!(a_order, b_order, "size {m}");
        }
    }

    #[test]
    fn map_cv_selects_finite_kappa_and_returns_curve() {
        let lg = toy_line_graph();
        let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
        let grid = [0.01, 0.1, 1.0, 10.0, 100.0];
        let (fit, curve) = lapm_map_cv(&lg, &basis, &grid, 5, 0);
        assert_eq!(curve.len(), 5);
        assert!(grid.contains(&fit.kappa));
    }
}
