//! Table and graph writers: 6-significant-digit CSV, full-precision JSON,
//! and DOT export of player / generalized-lineup incidence graphs.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use lineuplab_core::rank::RankedTable;
use lineuplab_core::GeneralizedLineup;
use serde::Serialize;

use crate::error::CliError;

/// Round to 6 significant digits and print the shortest representation.
/// Magnitudes below the ranking tie tolerance display as 0 so solver noise
/// does not leak into tables.
pub fn format_sig(v: f64) -> String {
    if v.abs() < lineuplab_core::rank::TIE_TOL {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor();
    let factor = 10f64.powf(5.0 - magnitude);
    format!("{}", (v * factor).round() / factor)
}

/// `size,members,score,rank,rank_lo,rank_hi` across all tables; rank bounds
/// stay blank when no uncertainty was computed.
pub fn tables_to_csv(tables: &[RankedTable]) -> String {
    let mut out = String::from("size,members,score,rank,rank_lo,rank_hi\n");
    for table in tables {
        for row in &table.rows {
            let (lo, hi) = match row.rank_interval {
                Some((lo, hi)) => (lo.to_string(), hi.to_string()),
                None => (String::new(), String::new()),
            };
            writeln!(
                out,
                "{},{},{},{},{},{}",
                table.size,
                row.lineup,
                format_sig(row.score),
                row.rank,
                lo,
                hi
            )
            .expect("string write");
        }
    }
    out
}

#[derive(Serialize)]
struct JsonRow<'a> {
    size: usize,
    members: Vec<&'a str>,
    score: f64,
    rank: usize,
    tied: bool,
    rank_lo: Option<usize>,
    rank_hi: Option<usize>,
}

#[derive(Serialize)]
struct JsonTable<'a> {
    method: &'a str,
    size: usize,
    n_replicates: usize,
    rows: Vec<JsonRow<'a>>,
}

/// Full-precision JSON twin of the CSV tables.
pub fn tables_to_json(tables: &[RankedTable]) -> Result<String, CliError> {
    let doc: Vec<JsonTable> = tables
        .iter()
        .map(|t| JsonTable {
            method: &t.method,
            size: t.size,
            n_replicates: t.n_replicates,
            rows: t
                .rows
                .iter()
                .map(|r| JsonRow {
                    size: t.size,
                    members: r.lineup.members().iter().map(|p| p.as_str()).collect(),
                    score: r.score,
                    rank: r.rank,
                    tied: r.tied,
                    rank_lo: r.rank_interval.map(|(lo, _)| lo),
                    rank_hi: r.rank_interval.map(|(_, hi)| hi),
                })
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&doc).map_err(|e| CliError::Input(e.to_string()))
}

fn node_id(lineup: &GeneralizedLineup) -> String {
    let joined: Vec<&str> = lineup.members().iter().map(|p| p.as_str()).collect();
    format!("\"{}\"", joined.join(";"))
}

const WIDTH_MIN: f64 = 0.4;
const WIDTH_MAX: f64 = 1.6;

/// DOT graph: every individual player as a node, the top-n units per listed
/// size as lineup nodes, and an edge from each member player to each lineup
/// node containing it. Node width is linear in the min-max-normalized score
/// within its size class; negative scores get a distinct border color.
pub fn export_dot(player_table: &RankedTable, group_tables: &[RankedTable], top_n: usize) -> String {
    let mut out = String::from("graph lineups {\n  node [shape=circle fixedsize=true];\n");
    let mut players: BTreeSet<&str> = BTreeSet::new();
    for row in &player_table.rows {
        players.insert(row.lineup.members()[0].as_str());
    }
    let emit_nodes = |table: &RankedTable, limit: usize, out: &mut String| {
        let kept = &table.rows[..limit.min(table.rows.len())];
        let lo = kept.iter().map(|r| r.score).fold(f64::INFINITY, f64::min);
        let hi = kept.iter().map(|r| r.score).fold(f64::NEG_INFINITY, f64::max);
        for row in kept {
            let norm = if hi > lo { (row.score - lo) / (hi - lo) } else { 0.5 };
            let width = WIDTH_MIN + (WIDTH_MAX - WIDTH_MIN) * norm;
            let color = if row.score < 0.0 { "crimson" } else { "black" };
            writeln!(
                out,
                "  {} [width={:.3} color={} score={}];",
                node_id(&row.lineup),
                width,
                color,
                format_sig(row.score)
            )
            .expect("string write");
        }
    };
    emit_nodes(player_table, player_table.rows.len(), &mut out);
    for table in group_tables {
        emit_nodes(table, top_n, &mut out);
    }
    for table in group_tables {
        for row in table.rows.iter().take(top_n) {
            for member in row.lineup.members() {
                if players.contains(member.as_str()) {
                    writeln!(out, "  \"{}\" -- {};", member.as_str(), node_id(&row.lineup))
                        .expect("string write");
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Minimal DOT reader for round-trip checks: returns (node ids, edges).
/// Handles exactly the subset `export_dot` emits.
#[cfg_attr(not(test), allow(dead_code))]
pub fn parse_dot(text: &str) -> Result<(Vec<String>, Vec<(String, String)>), CliError> {
    let body = text
        .trim()
        .strip_prefix("graph")
        .and_then(|rest| rest.split_once('{'))
        .map(|(_, b)| b)
        .ok_or_else(|| CliError::Input("not a DOT graph".into()))?;
    let body = body
        .strip_suffix('}')
        .ok_or_else(|| CliError::Input("unterminated DOT graph".into()))?;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let unquote = |s: &str| -> Result<String, CliError> {
        let t = s.trim();
        let t = t
            .strip_prefix('"')
            .and_then(|t| t.strip_suffix('"'))
            .ok_or_else(|| CliError::Input(format!("unquoted DOT id: {s:?}")))?;
        Ok(t.to_string())
    };
    // one statement per line; lineup ids contain ';' inside their quotes,
    // so statements are delimited by newlines rather than semicolons
    for raw in body.lines() {
        let stmt = raw.trim().trim_end_matches(';').trim();
        if stmt.is_empty() || stmt.starts_with("node ") || stmt.starts_with("node[") {
            continue;
        }
        if let Some((a, b)) = stmt.split_once("--") {
            edges.push((unquote(a)?, unquote(b)?));
        } else {
            let id = stmt.split('[').next().unwrap_or(stmt);
            nodes.push(unquote(id)?);
        }
    }
    Ok((nodes, edges))
}
