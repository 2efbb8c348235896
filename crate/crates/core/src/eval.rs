//! Rank uncertainty and evaluation harnesses.
//!
//! Bootstrap intervals refit the ridge on row-resampled designs and track
//! where each unit's rank lands across replicates; posterior intervals do
//! the same over MALA draws. Comparisons between methods, seasons, and
//! external metrics all reduce to Spearman rank correlation over the key
//! intersection.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ingest::{aggregate_team_season, build_league_rows};
use crate::lapm::{lapm_map_cv, lapm_rank, PosteriorSamples, SpectralBasis, TauPolicy};
use crate::metrics::{
    apm, apm_league, hapm, papm, papm_league, predict_lineup, raw_pm, LambdaPolicy, Method,
    MetricsError,
};
use crate::model::{
    build_design, build_line_graph, enumerate_generalized, ExtendedDesign, GeneralizedLineup,
    LineGraph, ModelError, PlayerId, StintRecord, WeightPolicy,
};
use crate::rank::{competition_ranks_desc, rank_interval_50, table_from_scores, RankedTable};
use crate::regression::{ols, ridge, ridge_cv, RegressionError};

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("need at least 3 common keys for rank correlation, found {found}")]
    InsufficientOverlap { found: usize },
    #[error("bootstrap replicate design stayed degenerate after {retries} retries")]
    BootstrapDegenerate { retries: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("evaluation input invalid: {0}")]
    Input(String),
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    crate::rank::average_ranks_desc(values)
}

/// Spearman correlation of two aligned score slices, average ranks for ties.
pub fn spearman_slices(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::Input(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(EvalError::InsufficientOverlap { found: x.len() });
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    let denom = (vx * vy).sqrt();
    if denom == 0.0 {
        // a fully tied ranking carries no ordering information
        return Ok(0.0);
    }
    Ok(cov / denom)
}

/// Spearman over the key intersection of two score maps.
pub fn spearman<K: Ord>(x: &BTreeMap<K, f64>, y: &BTreeMap<K, f64>) -> Result<f64, EvalError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &vx) in x {
        if let Some(&vy) = y.get(k) {
            xs.push(vx);
            ys.push(vy);
        }
    }
    spearman_slices(&xs, &ys)
}

/// Year-over-year stability: Spearman over the players scored in both
/// years, team changes ignored (keys are bare player ids).
pub fn year_over_year(
    year_a: &BTreeMap<PlayerId, f64>,
    year_b: &BTreeMap<PlayerId, f64>,
) -> Result<f64, EvalError> {
    spearman(year_a, year_b)
}

const BOOTSTRAP_RETRIES: usize = 20;

fn resolve_lambda(design: &ExtendedDesign, policy: &LambdaPolicy) -> Result<f64, EvalError> {
    match policy {
        LambdaPolicy::Fixed(l) => Ok(*l),
        LambdaPolicy::Cv(cfg) => Ok(ridge_cv(&design.x, &design.y, &design.w, cfg)?.lambda),
    }
}

fn fit_resampled(
    design: &ExtendedDesign,
    idx: &[usize],
    lambda: f64,
) -> Result<DVector<f64>, RegressionError> {
    let n = idx.len();
    let p = design.p();
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    let mut w = DVector::zeros(n);
    for (r, &i) in idx.iter().enumerate() {
        x.row_mut(r).copy_from(&design.x.row(i));
        y[r] = design.y[i];
        w[r] = design.w[i];
    }
    if lambda == 0.0 {
        ols(&x, &y, &w)
    } else {
        Ok(ridge(&x, &y, &w, lambda).beta)
    }
}

/// Bootstrap rank intervals for a ridge fit on the extended design: B refits
/// on row-resampled designs, every original row re-scored per replicate, and
/// per-unit ranks summarized by their [25%, 75%] quantiles. The penalty is
/// resolved once on the full design and held fixed across replicates.
pub fn bootstrap_hapm(
    design: &ExtendedDesign,
    policy: &LambdaPolicy,
    b: usize,
    seed: u64,
) -> Result<Vec<RankedTable>, EvalError> {
    if b == 0 {
        return Err(EvalError::Input("bootstrap needs B >= 1".into()));
    }
    let lambda = resolve_lambda(design, policy)?;
    let point = hapm(design, &LambdaPolicy::Fixed(lambda))?;

    let sizes: Vec<usize> = {
        let mut s: Vec<usize> = design.rows.iter().map(|r| r.size()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    // replicate ranks per size, unit order matching units_of_size
    let mut replicate_ranks: BTreeMap<usize, Vec<Vec<usize>>> = sizes
        .iter()
        .map(|&m| (m, vec![Vec::with_capacity(b); point.units_of_size(m).len()]))
        .collect();
    let by_size_rows: BTreeMap<usize, Vec<usize>> = sizes
        .iter()
        .map(|&m| {
            let rows = point
                .units_of_size(m)
                .into_iter()
                .map(|(l, _)| {
                    design
                        .rows
                        .iter()
                        .position(|r| *r == l)
                        .expect("every scored unit is a design row")
                })
                .collect();
            (m, rows)
        })
        .collect();

    let n = design.n();
    for r in 0..b {
        // per-replicate stream derived from the master seed
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut beta = None;
        for _ in 0..BOOTSTRAP_RETRIES {
            // a single replicate carries no resampling spread; keep it at the
            // point fit so the interval degenerates to the point rank
            let idx: Vec<usize> = if b == 1 {
                (0..n).collect()
            } else {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            };
            if let Ok(bhat) = fit_resampled(design, &idx, lambda) {
                beta = Some(bhat);
                break;
            }
        }
        let beta = beta.ok_or(EvalError::BootstrapDegenerate {
            retries: BOOTSTRAP_RETRIES,
        })?;
        let fitted = &design.x * &beta;
        for (&m, rows) in &by_size_rows {
            let scores: Vec<f64> = rows.iter().map(|&i| fitted[i]).collect();
            let ranks = competition_ranks_desc(&scores);
            let store = replicate_ranks.get_mut(&m).expect("size present");
            for (u, rank) in ranks.into_iter().enumerate() {
                store[u].push(rank);
            }
        }
    }

    let mut tables = Vec::new();
    for &m in &sizes {
        let mut table = table_from_scores(&point.method.to_string(), m, point.units_of_size(m));
        let store = &replicate_ranks[&m];
        // table rows are score-sorted; map back to the canonical unit order
        let units = point.units_of_size(m);
        for row in &mut table.rows {
            let u = units
                .iter()
                .position(|(l, _)| l == &row.lineup)
                .expect("ranked unit came from the score map");
            row.rank_interval = Some(rank_interval_50(&store[u]));
        }
        table.n_replicates = b;
        tables.push(table);
    }
    Ok(tables)
}

/// Posterior rank intervals from MALA draws: per draw, vertex scores are
/// beta = Phi theta and ranks are taken within each size; the point score is
/// the posterior mean.
pub fn posterior_ranks(
    lg: &LineGraph,
    basis: &SpectralBasis,
    samples: &PosteriorSamples,
) -> Vec<RankedTable> {
    let beta_draws = samples.beta_draws(basis);
    let mean = samples.posterior_mean_beta(basis);
    let sizes: Vec<usize> = {
        let mut s: Vec<usize> = lg.nodes.iter().map(|r| r.lineup.size()).collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    let mut tables = Vec::new();
    for &m in &sizes {
        let node_idx: Vec<usize> = (0..lg.n())
            .filter(|&i| lg.nodes[i].lineup.size() == m)
            .collect();
        let mut replicate_ranks = vec![Vec::with_capacity(beta_draws.len()); node_idx.len()];
        for draw in &beta_draws {
            let scores: Vec<f64> = node_idx.iter().map(|&i| draw[i]).collect();
            for (u, rank) in competition_ranks_desc(&scores).into_iter().enumerate() {
                replicate_ranks[u].push(rank);
            }
        }
        let mut table = lapm_rank(lg, &mean, m);
        for row in &mut table.rows {
            let u = node_idx
                .iter()
                .position(|&i| lg.nodes[i].lineup == row.lineup)
                .expect("ranked unit is a node");
            row.rank_interval = Some(rank_interval_50(&replicate_ranks[u]));
        }
        table.n_replicates = beta_draws.len();
        tables.push(table);
    }
    tables
}

/// What the second half-season is scored against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    /// Observed PM of the second half.
    ObservedPm,
    /// The same method refit on the second half.
    SelfRefit,
}

/// Split stints into half seasons by per-team game index: each team's games
/// are ordered by date, and its first ceil(G/2) games form half one.
pub fn split_stints(stints: &[StintRecord]) -> (Vec<StintRecord>, Vec<StintRecord>) {
    let mut games: BTreeMap<&str, Vec<(&str, &str)>> = BTreeMap::new();
    for s in stints {
        let list = games.entry(s.team.as_str()).or_default();
        if !list.iter().any(|&(_, g)| g == s.game_id) {
            list.push((s.date.as_str(), s.game_id.as_str()));
        }
    }
    let mut first_half: BTreeMap<(&str, &str), bool> = BTreeMap::new();
    for (team, mut list) in games {
        list.sort();
        let cut = list.len().div_ceil(2);
        for (i, (_, game)) in list.into_iter().enumerate() {
            first_half.insert((team, game), i < cut);
        }
    }
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    for s in stints {
        if first_half[&(s.team.as_str(), s.game_id.as_str())] {
            h1.push(s.clone());
        } else {
            h2.push(s.clone());
        }
    }
    (h1, h2)
}

/// Score every generalized lineup (up to size k) of a single-team stint set
/// with the given method. League-mode methods score units by the sum of
/// member coefficients from the league fit.
pub fn score_method(
    stints: &[StintRecord],
    k: usize,
    method: Method,
    policy: &LambdaPolicy,
) -> Result<BTreeMap<GeneralizedLineup, f64>, EvalError> {
    if stints.is_empty() {
        return Err(EvalError::Input("no stints to score".into()));
    }
    let records = enumerate_generalized(stints, k)?;
    let players: Vec<PlayerId> = {
        let mut set = std::collections::BTreeSet::new();
        for r in &records {
            for p in r.lineup.members() {
                set.insert(p.clone());
            }
        }
        set.into_iter().collect()
    };
    let design = build_design(&records, &players, WeightPolicy::PerGameAverage)?;
    let full = design.restrict_to_size(k);
    let result = match method {
        Method::Pm => raw_pm(&records),
        Method::Apm => apm(&full, policy)?,
        Method::Papm => papm(&full, policy, None)?,
        Method::Hapm => hapm(&design, policy)?,
        Method::SumApm => {
            let base = apm(&full, policy)?;
            let mut scores = BTreeMap::new();
            for r in &records {
                scores.insert(r.lineup.clone(), predict_lineup(&base, &r.lineup)?);
            }
            return Ok(scores);
        }
        Method::ApmLeague | Method::PapmLeague => {
            let season = stints[0].season.clone();
            let (_, league) =
                build_league_rows(stints, &season).map_err(|e| EvalError::Input(e.to_string()))?;
            let base = if method == Method::ApmLeague {
                apm_league(&league, policy)?
            } else {
                papm_league(&league, policy, None)?
            };
            let mut scores = BTreeMap::new();
            for r in &records {
                scores.insert(r.lineup.clone(), predict_lineup(&base, &r.lineup)?);
            }
            return Ok(scores);
        }
        Method::Lapm => {
            let lg = build_line_graph(&records);
            let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Elbow);
            let grid = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
            let (fit, _) = lapm_map_cv(&lg, &basis, &grid, 5, 0);
            let mut scores = BTreeMap::new();
            for (i, node) in lg.nodes.iter().enumerate() {
                scores.insert(node.lineup.clone(), fit.beta_map[i]);
            }
            return Ok(scores);
        }
    };
    Ok(result.scores)
}

/// Split-half evaluation: fit on half one, then Spearman against either the
/// second half's observed PM or the same method refit on half two.
pub fn split_half_eval(
    stints: &[StintRecord],
    k: usize,
    method: Method,
    policy: &LambdaPolicy,
    target: Target,
) -> Result<f64, EvalError> {
    let (h1, h2) = split_stints(stints);
    if h1.is_empty() || h2.is_empty() {
        return Err(EvalError::Input(
            "split-half needs at least 2 games per team".into(),
        ));
    }
    let fitted = score_method(&h1, k, method, policy)?;
    let target_scores = match target {
        Target::ObservedPm => {
            let records = enumerate_generalized(&h2, k)?;
            raw_pm(&records).scores
        }
        Target::SelfRefit => score_method(&h2, k, method, policy)?,
    };
    spearman(&fitted, &target_scores)
}

/// Aggregated observed PM per unit, convenience for report plumbing.
pub fn observed_pm_map(
    stints: &[StintRecord],
    team: &str,
    season: &str,
) -> Result<BTreeMap<GeneralizedLineup, f64>, EvalError> {
    let records = aggregate_team_season(stints, team, season);
    Ok(records
        .iter()
        .map(|r| (r.lineup.clone(), r.pm as f64))
        .collect())
}
