//! Domain types and the hypergraph machinery: generalized lineups, stint
//! records, the extended design matrix, and the Jaccard-weighted line graph
//! with its Laplacian eigendecomposition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Eigenvalues of the Laplacian in [-EIG_CLAMP, 0) are treated as
/// floating-point noise and clamped to 0 (L_w is PSD analytically).
pub const EIG_CLAMP: f64 = 1e-10;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("lineup has no members")]
    EmptyLineup,
    #[error("records mix teams or seasons: {0}")]
    HeterogeneousInput(String),
    #[error("unknown player id: {0}")]
    UnknownPlayer(String),
}

/// League-unique opaque player token. Ordering is lexicographic on the id,
/// which fixes the column order of every design matrix.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct PlayerId(pub String);

impl PlayerId {
    pub fn new<S: Into<String>>(id: S) -> Self {
        PlayerId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PlayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Roster entry: id plus a human-readable name.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Player {
    pub id: PlayerId,
    pub display_name: String,
}

/// A canonical set of 1..=k players: an individual, pair, trio, ..., or full
/// lineup. Members are sorted by id and deduplicated, so two lineups with the
/// same member set compare equal regardless of input order.
///
/// Ordering is (size, lexicographic member ids), which is also the row order
/// of the extended design matrix.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct GeneralizedLineup {
    members: Vec<PlayerId>,
}

impl GeneralizedLineup {
    /// Sort, deduplicate, and validate a member list.
    pub fn canonicalize(members: Vec<PlayerId>) -> Result<Self, ModelError> {
        if members.is_empty() {
            return Err(ModelError::EmptyLineup);
        }
        let mut members = members;
        members.sort();
        members.dedup();
        Ok(GeneralizedLineup { members })
    }

    pub fn members(&self) -> &[PlayerId] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, p: &PlayerId) -> bool {
        self.members.binary_search(p).is_ok()
    }

    pub fn is_subset_of(&self, other: &GeneralizedLineup) -> bool {
        self.members.iter().all(|p| other.contains(p))
    }

    pub fn intersection_size(&self, other: &GeneralizedLineup) -> usize {
        self.members.iter().filter(|p| other.contains(p)).count()
    }

    pub fn union_size(&self, other: &GeneralizedLineup) -> usize {
        self.size() + other.size() - self.intersection_size(other)
    }

    pub fn overlaps(&self, other: &GeneralizedLineup) -> bool {
        self.intersection_size(other) > 0
    }

    /// All subsets of sizes 1..=max_size, each canonical.
    pub fn subsets(&self, max_size: usize) -> Vec<GeneralizedLineup> {
        let mut out = Vec::new();
        let n = self.members.len();
        let cap = max_size.min(n);
        let mut current: Vec<PlayerId> = Vec::new();
        fn rec(
            members: &[PlayerId],
            start: usize,
            cap: usize,
            current: &mut Vec<PlayerId>,
            out: &mut Vec<GeneralizedLineup>,
        ) {
            if !current.is_empty() {
                out.push(GeneralizedLineup {
                    members: current.clone(),
                });
            }
            if current.len() == cap {
                return;
            }
            for i in start..members.len() {
                current.push(members[i].clone());
                rec(members, i + 1, cap, current, out);
                current.pop();
            }
        }
        rec(&self.members, 0, cap, &mut current, &mut out);
        out
    }
}

impl PartialOrd for GeneralizedLineup {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GeneralizedLineup {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.size()
            .cmp(&other.size())
            .then_with(|| self.members.cmp(&other.members))
    }
}

impl fmt::Display for GeneralizedLineup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.members.iter().map(|p| p.as_str()).collect();
        f.write_str(&ids.join(";"))
    }
}

/// One contiguous on-court interval during which both lineups are unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StintRecord {
    pub season: String,
    pub game_id: String,
    pub date: String,
    pub team: String,
    pub opponent: String,
    pub is_home: bool,
    pub lineup: GeneralizedLineup,
    pub opp_lineup: GeneralizedLineup,
    pub seconds: f64,
    pub points_for: i64,
    pub points_against: i64,
}

impl StintRecord {
    pub fn pm(&self) -> i64 {
        self.points_for - self.points_against
    }
}

/// Season-level totals for one generalized lineup: summed PM, summed seconds,
/// and the number of distinct games it appeared in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregatedRecord {
    pub lineup: GeneralizedLineup,
    pub pm: i64,
    pub seconds: f64,
    pub games: u32,
}

impl AggregatedRecord {
    /// Average seconds per game the lineup appeared in.
    pub fn seconds_per_game(&self) -> f64 {
        self.seconds / self.games.max(1) as f64
    }
}

/// Which quantity fills the weight vector W.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightPolicy {
    /// Average seconds per game appearing (team-mode convention).
    PerGameAverage,
    /// Total seconds (league-mode convention).
    TotalSeconds,
}

/// Rows = generalized lineups, columns = players: the transpose of the
/// extended hypergraph's incidence matrix, with the PM response Y and
/// weight vector W alongside.
#[derive(Clone, Debug)]
pub struct ExtendedDesign {
    pub rows: Vec<GeneralizedLineup>,
    pub players: Vec<PlayerId>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
}

impl ExtendedDesign {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.players.len()
    }

    /// Keep only rows whose lineup has exactly `size` members. Restricting
    /// an extended design to full lineups recovers the ordinary APM design.
    pub fn restrict_to_size(&self, size: usize) -> ExtendedDesign {
        let keep: Vec<usize> = (0..self.n())
            .filter(|&i| self.rows[i].size() == size)
            .collect();
        let x = DMatrix::from_fn(keep.len(), self.p(), |i, j| self.x[(keep[i], j)]);
        let y = DVector::from_fn(keep.len(), |i, _| self.y[keep[i]]);
        let w = DVector::from_fn(keep.len(), |i, _| self.w[keep[i]]);
        ExtendedDesign {
            rows: keep.iter().map(|&i| self.rows[i].clone()).collect(),
            players: self.players.clone(),
            x,
            y,
            w,
        }
    }
}

/// Aggregate every subset (size 1..=max_size) of the observed full lineups:
/// pm(S) and seconds(S) sum over all stints whose lineup contains S. Subsets
/// never on court together are absent. Rows come back sorted by
/// (size, member ids).
pub fn enumerate_generalized(
    stints: &[StintRecord],
    max_size: usize,
) -> Result<Vec<AggregatedRecord>, ModelError> {
    if let Some(first) = stints.first() {
        for s in stints {
            if s.team != first.team || s.season != first.season {
                return Err(ModelError::HeterogeneousInput(format!(
                    "expected {}/{}, found {}/{}",
                    first.team, first.season, s.team, s.season
                )));
            }
        }
    }
    let mut acc: BTreeMap<GeneralizedLineup, (i64, f64, BTreeSet<String>)> = BTreeMap::new();
    for s in stints {
        for subset in s.lineup.subsets(max_size) {
            let e = acc
                .entry(subset)
                .or_insert_with(|| (0, 0.0, BTreeSet::new()));
            e.0 += s.pm();
            e.1 += s.seconds;
            e.2.insert(s.game_id.clone());
        }
    }
    Ok(acc
        .into_iter()
        .filter(|(_, (_, secs, _))| *secs > 0.0)
        .map(|(lineup, (pm, seconds, games))| AggregatedRecord {
            lineup,
            pm,
            seconds,
            games: games.len() as u32,
        })
        .collect())
}

/// Assemble X, Y, W from aggregated records in team mode (entries in {0,1}).
pub fn build_design(
    records: &[AggregatedRecord],
    players: &[PlayerId],
    weight: WeightPolicy,
) -> Result<ExtendedDesign, ModelError> {
    let col: BTreeMap<&PlayerId, usize> = players.iter().zip(0..).collect();
    let mut rows: Vec<AggregatedRecord> = records.to_vec();
    rows.sort_by(|a, b| a.lineup.cmp(&b.lineup));
    let n = rows.len();
    let p = players.len();
    let mut x = DMatrix::zeros(n, p);
    for (i, r) in rows.iter().enumerate() {
        for m in r.lineup.members() {
            let j = *col
                .get(m)
                .ok_or_else(|| ModelError::UnknownPlayer(m.as_str().to_string()))?;
            x[(i, j)] = 1.0;
        }
    }
    let y = DVector::from_fn(n, |i, _| rows[i].pm as f64);
    let w = DVector::from_fn(n, |i, _| match weight {
        WeightPolicy::PerGameAverage => rows[i].seconds_per_game(),
        WeightPolicy::TotalSeconds => rows[i].seconds,
    });
    Ok(ExtendedDesign {
        rows: rows.into_iter().map(|r| r.lineup).collect(),
        players: players.to_vec(),
        x,
        y,
        w,
    })
}

/// Jaccard similarity |intersection| / |union| of two player sets.
pub fn jaccard(a: &GeneralizedLineup, b: &GeneralizedLineup) -> f64 {
    a.intersection_size(b) as f64 / a.union_size(b) as f64
}

/// The line graph of the extended hypergraph: one node per generalized
/// lineup carrying its PM, an edge wherever two lineups share a player,
/// weighted by Jaccard similarity. Holds the weighted Laplacian and its
/// full eigendecomposition (eigenvalues ascending, eigenvectors orthonormal).
#[derive(Clone, Debug)]
pub struct LineGraph {
    pub nodes: Vec<AggregatedRecord>,
    pub adjacency: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl LineGraph {
    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Per-node PM response vector, in node order.
    pub fn y(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| self.nodes[i].pm as f64)
    }

    pub fn node_index(&self, lineup: &GeneralizedLineup) -> Option<usize> {
        self.nodes.iter().position(|r| &r.lineup == lineup)
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&j| self.adjacency[(i, j)] > 0.0)
            .collect()
    }
}

pub fn build_line_graph(records: &[AggregatedRecord]) -> LineGraph {
    let mut nodes: Vec<AggregatedRecord> = records.to_vec();
    nodes.sort_by(|a, b| a.lineup.cmp(&b.lineup));
    let n = nodes.len();
    let mut adjacency = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if nodes[i].lineup.overlaps(&nodes[j].lineup) {
                let w = jaccard(&nodes[i].lineup, &nodes[j].lineup);
                adjacency[(i, j)] = w;
                adjacency[(j, i)] = w;
            }
        }
    }
    let mut laplacian = -adjacency.clone();
    for i in 0..n {
        laplacian[(i, i)] = adjacency.row(i).sum();
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(laplacian.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_fn(n, |i, _| {
        let xi = eig.eigenvalues[order[i]];
        if xi < 0.0 && xi >= -EIG_CLAMP {
            0.0
        } else {
            xi
        }
    });
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    LineGraph {
        nodes,
        adjacency,
        laplacian,
        eigenvalues,
        eigenvectors,
    }
}
