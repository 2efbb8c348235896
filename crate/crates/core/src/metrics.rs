//! The estimator family: raw PM, APM, PAPM (pair interaction columns), and
//! HAPM (ridge on the extended design). Coefficients score players, fitted
//! values score generalized lineups, and unused lineups are scored by
//! summing member coefficients.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{AggregatedRecord, ExtendedDesign, GeneralizedLineup, PlayerId};
use crate::rank::{table_from_scores, RankedTable};
use crate::regression::{ridge_opts, ridge_cv, CvConfig, RegressionError, RidgeFit};

#[derive(Error, Debug)]
pub enum MetricsError {
    #[error("unknown player id: {0}")]
    UnknownPlayer(String),
    #[error("design would have {cols} predictor columns (cap {cap}); consider HAPM")]
    Feasibility { cols: usize, cap: usize },
    #[error(transparent)]
    Regression(#[from] RegressionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Pm,
    Apm,
    ApmLeague,
    Papm,
    PapmLeague,
    Hapm,
    SumApm,
    Lapm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Pm => "pm",
            Method::Apm => "apm",
            Method::ApmLeague => "apm_league",
            Method::Papm => "papm",
            Method::PapmLeague => "papm_league",
            Method::Hapm => "hapm",
            Method::SumApm => "sum_apm",
            Method::Lapm => "lapm",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pm" => Ok(Method::Pm),
            "apm" => Ok(Method::Apm),
            "apm_league" => Ok(Method::ApmLeague),
            "papm" => Ok(Method::Papm),
            "papm_league" => Ok(Method::PapmLeague),
            "hapm" => Ok(Method::Hapm),
            "sum_apm" => Ok(Method::SumApm),
            "lapm" => Ok(Method::Lapm),
            other => Err(format!("unknown method: {other}")),
        }
    }
}

/// Penalty selection: a fixed value or cross-validation.
#[derive(Clone, Debug)]
pub enum LambdaPolicy {
    Fixed(f64),
    Cv(CvConfig),
}

/// Fit provenance carried alongside every scored result.
#[derive(Clone, Debug, Default)]
pub struct FitMeta {
    pub lambda: Option<f64>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub n_rows: usize,
    pub n_cols: usize,
}

/// Per-unit scores from one estimator, plus per-player coefficients where
/// the estimator has them.
#[derive(Clone, Debug)]
pub struct MetricResult {
    pub method: Method,
    pub scores: BTreeMap<GeneralizedLineup, f64>,
    pub coefficients: BTreeMap<PlayerId, f64>,
    pub meta: FitMeta,
}

impl MetricResult {
    /// Units of a given size, in canonical order.
    pub fn units_of_size(&self, m: usize) -> Vec<(GeneralizedLineup, f64)> {
        self.scores
            .iter()
            .filter(|(l, _)| l.size() == m)
            .map(|(l, &s)| (l.clone(), s))
            .collect()
    }
}

fn fit_design(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    w: &DVector<f64>,
    policy: &LambdaPolicy,
) -> Result<(RidgeFit, FitMeta), MetricsError> {
    let (fit, meta) = match policy {
        LambdaPolicy::Fixed(lambda) => {
            let fit = ridge_opts(x, y, w, *lambda, false);
            let meta = FitMeta {
                lambda: Some(*lambda),
                folds: None,
                seed: None,
                n_rows: x.nrows(),
                n_cols: x.ncols(),
            };
            (fit, meta)
        }
        LambdaPolicy::Cv(cfg) => {
            let fit = ridge_cv(x, y, w, cfg)?;
            let meta = FitMeta {
                lambda: Some(fit.lambda),
                folds: Some(cfg.folds),
                seed: Some(cfg.seed),
                n_rows: x.nrows(),
                n_cols: x.ncols(),
            };
            (fit, meta)
        }
    };
    Ok((fit, meta))
}

/// Raw cumulative plus-minus: score(S) = pm(S) for every aggregated lineup.
pub fn raw_pm(records: &[AggregatedRecord]) -> MetricResult {
    let scores = records
        .iter()
        .map(|r| (r.lineup.clone(), r.pm as f64))
        .collect();
    MetricResult {
        method: Method::Pm,
        scores,
        coefficients: BTreeMap::new(),
        meta: FitMeta::default(),
    }
}

fn ridge_result(
    method: Method,
    design: &ExtendedDesign,
    policy: &LambdaPolicy,
) -> Result<MetricResult, MetricsError> {
    let (fit, meta) = fit_design(&design.x, &design.y, &design.w, policy)?;
    let mut scores = BTreeMap::new();
    for (i, row) in design.rows.iter().enumerate() {
        scores.insert(row.clone(), fit.fitted[i]);
    }
    let mut coefficients = BTreeMap::new();
    for (j, p) in design.players.iter().enumerate() {
        coefficients.insert(p.clone(), fit.beta[j]);
        // individuals are scored by their coefficient even when the singleton
        // row is absent from the design (e.g. plain APM)
        let singleton = GeneralizedLineup::canonicalize(vec![p.clone()]).expect("nonempty");
        scores.entry(singleton).or_insert(fit.beta[j]);
    }
    Ok(MetricResult {
        method,
        scores,
        coefficients,
        meta,
    })
}

/// APM: weighted ridge on a full-lineups-only design. Coefficients rank
/// players; fitted values rank the full lineups.
pub fn apm(design: &ExtendedDesign, policy: &LambdaPolicy) -> Result<MetricResult, MetricsError> {
    ridge_result(Method::Apm, design, policy)
}

/// League-mode APM on the +1/-1 design.
pub fn apm_league(
    design: &ExtendedDesign,
    policy: &LambdaPolicy,
) -> Result<MetricResult, MetricsError> {
    ridge_result(Method::ApmLeague, design, policy)
}

/// HAPM: the same weighted ridge, with the design extended to all
/// generalized-lineup rows. Fitted values score every generalized lineup.
pub fn hapm(design: &ExtendedDesign, policy: &LambdaPolicy) -> Result<MetricResult, MetricsError> {
    ridge_result(Method::Hapm, design, policy)
}

/// Observed pairs: those appearing together in at least one design row with
/// the same sign (both on court for the same side).
fn observed_pairs(design: &ExtendedDesign) -> Vec<(usize, usize)> {
    let p = design.p();
    let mut pairs = Vec::new();
    for a in 0..p {
        for b in (a + 1)..p {
            let seen = (0..design.n()).any(|i| {
                let xa = design.x[(i, a)];
                let xb = design.x[(i, b)];
                xa != 0.0 && xa == xb
            });
            if seen {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// PAPM: APM plus one interaction column per observed pair. Team mode sets
/// the pair column to 1 when both players are in the row's lineup; league
/// mode (+1/-1 design) sets +1 when both are home, -1 when both are away.
pub fn papm(
    design: &ExtendedDesign,
    policy: &LambdaPolicy,
    column_cap: Option<usize>,
) -> Result<MetricResult, MetricsError> {
    papm_impl(Method::Papm, design, policy, column_cap)
}

pub fn papm_league(
    design: &ExtendedDesign,
    policy: &LambdaPolicy,
    column_cap: Option<usize>,
) -> Result<MetricResult, MetricsError> {
    papm_impl(Method::PapmLeague, design, policy, column_cap)
}

fn papm_impl(
    method: Method,
    design: &ExtendedDesign,
    policy: &LambdaPolicy,
    column_cap: Option<usize>,
) -> Result<MetricResult, MetricsError> {
    let pairs = observed_pairs(design);
    let (n, p) = (design.n(), design.p());
    let cols = p + pairs.len();
    if let Some(cap) = column_cap {
        if cols > cap {
            return Err(MetricsError::Feasibility { cols, cap });
        }
    }
    let mut x = DMatrix::zeros(n, cols);
    x.view_mut((0, 0), (n, p)).copy_from(&design.x);
    for (q, &(a, b)) in pairs.iter().enumerate() {
        for i in 0..n {
            let (xa, xb) = (design.x[(i, a)], design.x[(i, b)]);
            if xa != 0.0 && xa == xb {
                x[(i, p + q)] = xa; // 1 in team mode, +/-1 in league mode
            }
        }
    }
    let (fit, mut meta) = fit_design(&x, &design.y, &design.w, policy)?;
    meta.n_cols = cols;
    let mut scores = BTreeMap::new();
    let mut coefficients = BTreeMap::new();
    for (j, player) in design.players.iter().enumerate() {
        coefficients.insert(player.clone(), fit.beta[j]);
        let singleton = GeneralizedLineup::canonicalize(vec![player.clone()]).expect("nonempty");
        scores.insert(singleton, fit.beta[j]);
    }
    for (q, &(a, b)) in pairs.iter().enumerate() {
        let pair = GeneralizedLineup::canonicalize(vec![
            design.players[a].clone(),
            design.players[b].clone(),
        ])
        .expect("nonempty");
        scores.insert(pair, fit.beta[p + q]);
    }
    Ok(MetricResult {
        method,
        scores,
        coefficients,
        meta,
    })
}

/// Score any lineup from a coefficient fit: the hypothetical design row
/// times the coefficient vector, i.e. the sum of member coefficients.
pub fn predict_lineup(
    result: &MetricResult,
    lineup: &GeneralizedLineup,
) -> Result<f64, MetricsError> {
    lineup
        .members()
        .iter()
        .map(|p| {
            result
                .coefficients
                .get(p)
                .copied()
                .ok_or_else(|| MetricsError::UnknownPlayer(p.as_str().to_string()))
        })
        .sum()
}

/// The naive baseline: sum the APM of the individual members. Same formula
/// as `predict_lineup`, kept separate so reports label it distinctly.
pub fn sum_apm(result: &MetricResult, lineup: &GeneralizedLineup) -> Result<f64, MetricsError> {
    predict_lineup(result, lineup)
}

/// Sort units of size `m` by descending score; rank 1 is best, ties share
/// the minimum rank and are flagged.
pub fn rank_within_size(result: &MetricResult, m: usize) -> RankedTable {
    table_from_scores(&result.method.to_string(), m, result.units_of_size(m))
}
