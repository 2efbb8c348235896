//! Ranked tables: within-size ordering of generalized-lineup scores with
//! optional 50% rank intervals.
//!
//! Point tables use shared-minimum ranks for ties (ties are flagged, never
//! broken arbitrarily). Spearman correlation elsewhere uses average ranks.

use serde::Serialize;

use crate::model::GeneralizedLineup;

/// Scores within `tol` of each other count as tied; absorbs float noise so
/// an exact-arithmetic tie (e.g. two zero OLS coefficients) stays a tie.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct RankedRow {
    pub lineup: GeneralizedLineup,
    pub score: f64,
    /// 1 = best; tied units share the minimum rank.
    pub rank: usize,
    pub tied: bool,
    /// [25th, 75th] percentile of the rank distribution, when uncertainty
    /// replicates were run.
    pub rank_interval: Option<(usize, usize)>,
}

/// A within-size ranking for one estimator.
#[derive(Clone, Debug, Serialize)]
pub struct RankedTable {
    pub method: String,
    pub size: usize,
    pub rows: Vec<RankedRow>,
    pub n_replicates: usize,
}

impl RankedTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rank_of(&self, lineup: &GeneralizedLineup) -> Option<usize> {
        self.rows.iter().find(|r| &r.lineup == lineup).map(|r| r.rank)
    }
}

/// Descending competition ranks (shared minimum on ties) for a score slice.
/// Returned in the order of the input slice.
pub fn competition_ranks_desc(scores: &[f64]) -> Vec<usize> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0usize; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && (scores[order[end - 1]] - scores[order[end]]).abs() <= TIE_TOL {
            end += 1;
        }
        for &i in &order[pos..end] {
            ranks[i] = pos + 1;
        }
        pos = end;
    }
    ranks
}

/// Average (fractional) descending ranks; the tie convention for Spearman.
pub fn average_ranks_desc(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; n];
    let mut pos = 0;
    while pos < n {
        let mut end = pos + 1;
        while end < n && scores[order[end - 1]] == scores[order[end]] {
            end += 1;
        }
        let avg = (pos + 1..=end).sum::<usize>() as f64 / (end - pos) as f64;
        for &i in &order[pos..end] {
            ranks[i] = avg;
        }
        pos = end;
    }
    ranks
}

/// Build a point-estimate table (no intervals) from (lineup, score) pairs,
/// all of one size.
pub fn table_from_scores(
    method: &str,
    size: usize,
    units: Vec<(GeneralizedLineup, f64)>,
) -> RankedTable {
    let scores: Vec<f64> = units.iter().map(|(_, s)| *s).collect();
    let ranks = competition_ranks_desc(&scores);
    let tied: Vec<bool> = (0..units.len())
        .map(|i| ranks.iter().enumerate().any(|(j, &r)| j != i && r == ranks[i]))
        .collect();
    let mut rows: Vec<RankedRow> = units
        .into_iter()
        .zip(ranks.iter().zip(tied.iter()))
        .map(|((lineup, score), (&rank, &tied))| RankedRow {
            lineup,
            score,
            rank,
            tied,
            rank_interval: None,
        })
        .collect();
    rows.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.lineup.cmp(&b.lineup)));
    RankedTable {
        method: method.to_string(),
        size,
        rows,
        n_replicates: 0,
    }
}

/// Empirical quantile of integer ranks: 25th rounded down, 75th rounded up
/// ("rounded outward"), so the interval always covers whole ranks.
pub fn rank_interval_50(replicate_ranks: &[usize]) -> (usize, usize) {
    debug_assert!(!replicate_ranks.is_empty());
    let mut sorted: Vec<usize> = replicate_ranks.to_vec();
    sorted.sort_unstable();
    let q = |p: f64| -> f64 {
        let h = p * (sorted.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        let frac = h - lo as f64;
        sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
    };
    (q(0.25).floor() as usize, q(0.75).ceil() as usize)
}
