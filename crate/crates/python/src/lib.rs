//! Python bindings: a thin surface over the core types and estimators.
//!
//! Build the extension with `cargo build -p lineuplab-python`, then import
//! the produced cdylib as `lineuplab_py` (see python/smoke_test.py).

use std::collections::BTreeMap;
use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lineuplab_core::eval::spearman_slices;
use lineuplab_core::ingest::{filter_qualified, parse_stints, qualify_players};
use lineuplab_core::lapm::{lapm_map, SpectralBasis, TauPolicy};
use lineuplab_core::metrics::{apm, hapm, raw_pm, LambdaPolicy, Method};
use lineuplab_core::model::{
    build_design, build_line_graph, enumerate_generalized, jaccard as jaccard_rs, WeightPolicy,
};
use lineuplab_core::{GeneralizedLineup, PlayerId, StintRecord};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn lineup_from(members: Vec<String>) -> PyResult<GeneralizedLineup> {
    GeneralizedLineup::canonicalize(members.into_iter().map(PlayerId::new).collect())
        .map_err(value_err)
}

fn load_records(
    path: &str,
    k: usize,
    season: &str,
    team: &str,
    max_size: usize,
    min_seconds: f64,
) -> PyResult<Vec<lineuplab_core::AggregatedRecord>> {
    let stints = parse_stints(Path::new(path), k).map_err(value_err)?;
    let qualified = qualify_players(&stints, min_seconds);
    let stints = filter_qualified(&stints, &qualified);
    let team_stints: Vec<StintRecord> = stints
        .into_iter()
        .filter(|s| s.season == season && s.team == team)
        .collect();
    if team_stints.is_empty() {
        return Err(PyValueError::new_err(format!(
            "no stints for team {team} in season {season}"
        )));
    }
    enumerate_generalized(&team_stints, max_size).map_err(value_err)
}

/// Jaccard similarity of two player sets.
#[pyfunction]
fn jaccard(a: Vec<String>, b: Vec<String>) -> PyResult<f64> {
    Ok(jaccard_rs(&lineup_from(a)?, &lineup_from(b)?))
}

/// Canonical member order: sorted, deduplicated.
#[pyfunction]
fn canonicalize(members: Vec<String>) -> PyResult<Vec<String>> {
    Ok(lineup_from(members)?
        .members()
        .iter()
        .map(|p| p.as_str().to_string())
        .collect())
}

/// All generalized lineups of a team season with aggregated plus-minus:
/// a list of (members, pm, seconds) tuples.
#[pyfunction]
#[pyo3(signature = (path, k, season, team, max_size=None, min_seconds=0.0))]
fn enumerate_lineups(
    path: &str,
    k: usize,
    season: &str,
    team: &str,
    max_size: Option<usize>,
    min_seconds: f64,
) -> PyResult<Vec<(Vec<String>, i64, f64)>> {
    let records = load_records(path, k, season, team, max_size.unwrap_or(k), min_seconds)?;
    Ok(records
        .iter()
        .map(|r| {
            (
                r.lineup.members().iter().map(|p| p.as_str().to_string()).collect(),
                r.pm,
                r.seconds,
            )
        })
        .collect())
}

/// Method scores keyed by ';'-joined members. Supported methods: pm, apm,
/// hapm, lapm. `lam` is the ridge penalty (apm/hapm) or the smoothing
/// strength kappa (lapm); pm ignores it.
#[pyfunction]
#[pyo3(signature = (path, k, season, team, method, lam=1.0, max_size=None, min_seconds=0.0))]
#[allow(clippy::too_many_arguments)]
fn scores(
    path: &str,
    k: usize,
    season: &str,
    team: &str,
    method: &str,
    lam: f64,
    max_size: Option<usize>,
    min_seconds: f64,
) -> PyResult<BTreeMap<String, f64>> {
    let method: Method = method.parse().map_err(value_err)?;
    let records = load_records(path, k, season, team, max_size.unwrap_or(k), min_seconds)?;
    let score_map: BTreeMap<GeneralizedLineup, f64> = match method {
        Method::Pm => raw_pm(&records).scores,
        Method::Apm | Method::Hapm => {
            let players: Vec<PlayerId> = {
                let mut set = std::collections::BTreeSet::new();
                for r in &records {
                    for p in r.lineup.members() {
                        set.insert(p.clone());
                    }
                }
                set.into_iter().collect()
            };
            let design = build_design(&records, &players, WeightPolicy::PerGameAverage)
                .map_err(value_err)?;
            let policy = LambdaPolicy::Fixed(lam);
            let result = if method == Method::Apm {
                apm(&design.restrict_to_size(k), &policy).map_err(runtime_err)?
            } else {
                hapm(&design, &policy).map_err(runtime_err)?
            };
            result.scores
        }
        Method::Lapm => {
            let lg = build_line_graph(&records);
            let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Full);
            let fit = lapm_map(&lg, &basis, lam);
            lg.nodes
                .iter()
                .enumerate()
                .map(|(i, node)| (node.lineup.clone(), fit.beta_map[i]))
                .collect()
        }
        other => {
            return Err(PyValueError::new_err(format!(
                "method {other} is not exposed to Python; use pm, apm, hapm, or lapm"
            )))
        }
    };
    Ok(score_map
        .into_iter()
        .map(|(l, s)| (l.to_string(), s))
        .collect())
}

/// Spearman rank correlation of two aligned score lists.
#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    spearman_slices(&x, &y).map_err(value_err)
}

#[pymodule]
fn lineuplab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(canonicalize, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_lineups, m)?)?;
    m.add_function(wrap_pyfunction!(scores, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    Ok(())
}
