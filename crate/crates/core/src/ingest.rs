//! Stint-file parsing, season-level aggregation, qualification filters, and
//! league-mode (+1/-1) design assembly.
//!
//! Stint CSV schema (UTF-8, header row):
//! `season,game_id,date,team,opponent,is_home,lineup,opp_lineup,seconds,points_for,points_against`
//! where lineup fields are `;`-separated player ids. Roster CSV:
//! `season,team,player_id,display_name`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{
    AggregatedRecord, ExtendedDesign, GeneralizedLineup, Player, PlayerId, StintRecord,
};

#[derive(Error, Debug)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: lineup has {found} players, expected {expected}")]
    Schema {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("home and away lineups share players: {0}")]
    DataIntegrity(String),
}

/// Default qualification threshold: 10,000 seconds of playing time,
/// about 2 minutes per game over a full season.
pub const DEFAULT_MIN_SECONDS: f64 = 10_000.0;

fn parse_lineup(field: &str, line: usize) -> Result<GeneralizedLineup, IngestError> {
    let members: Vec<PlayerId> = field
        .split(';')
        .filter(|s| !s.is_empty())
        .map(PlayerId::new)
        .collect();
    GeneralizedLineup::canonicalize(members).map_err(|e| IngestError::Parse {
        line,
        message: e.to_string(),
    })
}

/// Parse a stint CSV, validating every lineup against size `k`.
pub fn parse_stints(path: &Path, k: usize) -> Result<Vec<StintRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| IngestError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
    let mut out = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let rec = result.map_err(|e| IngestError::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != 11 {
            return Err(IngestError::Parse {
                line,
                message: format!("expected 11 fields, found {}", rec.len()),
            });
        }
        let field = |idx: usize| rec.get(idx).unwrap_or("").to_string();
        let num = |idx: usize, name: &str| -> Result<f64, IngestError> {
            rec.get(idx)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|_| IngestError::Parse {
                    line,
                    message: format!("bad {name}: {:?}", rec.get(idx).unwrap_or("")),
                })
        };
        let is_home = match rec.get(5).unwrap_or("") {
            "true" | "1" => true,
            "false" | "0" => false,
            other => {
                return Err(IngestError::Parse {
                    line,
                    message: format!("bad is_home: {other:?}"),
                })
            }
        };
        let lineup = parse_lineup(rec.get(6).unwrap_or(""), line)?;
        let opp_lineup = parse_lineup(rec.get(7).unwrap_or(""), line)?;
        for l in [&lineup, &opp_lineup] {
            if l.size() != k {
                return Err(IngestError::Schema {
                    line,
                    found: l.size(),
                    expected: k,
                });
            }
        }
        let seconds = num(8, "seconds")?;
        if seconds < 0.0 {
            return Err(IngestError::Parse {
                line,
                message: "negative seconds".into(),
            });
        }
        out.push(StintRecord {
            season: field(0),
            game_id: field(1),
            date: field(2),
            team: field(3),
            opponent: field(4),
            is_home,
            lineup,
            opp_lineup,
            seconds,
            points_for: num(9, "points_for")? as i64,
            points_against: num(10, "points_against")? as i64,
        });
    }
    Ok(out)
}

/// Serialize stints back to the canonical CSV form.
pub fn write_stints<W: std::io::Write>(out: W, stints: &[StintRecord]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "season",
        "game_id",
        "date",
        "team",
        "opponent",
        "is_home",
        "lineup",
        "opp_lineup",
        "seconds",
        "points_for",
        "points_against",
    ])
    .map_err(io_err)?;
    for s in stints {
        wtr.write_record([
            s.season.clone(),
            s.game_id.clone(),
            s.date.clone(),
            s.team.clone(),
            s.opponent.clone(),
            s.is_home.to_string(),
            s.lineup.to_string(),
            s.opp_lineup.to_string(),
            format_seconds(s.seconds),
            s.points_for.to_string(),
            s.points_against.to_string(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> IngestError {
    IngestError::Parse {
        line: 0,
        message: e.to_string(),
    }
}

fn format_seconds(s: f64) -> String {
    if s.fract() == 0.0 {
        format!("{}", s as i64)
    } else {
        format!("{s}")
    }
}

/// Roster CSV: `season,team,player_id,display_name`.
pub fn parse_roster(path: &Path) -> Result<Vec<(String, String, Player)>, IngestError> {
    let mut reader = csv::Reader::from_path(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let rec = result.map_err(|e| IngestError::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        out.push((
            rec.get(0).unwrap_or("").to_string(),
            rec.get(1).unwrap_or("").to_string(),
            Player {
                id: PlayerId::new(rec.get(2).unwrap_or("")),
                display_name: rec.get(3).unwrap_or("").to_string(),
            },
        ));
    }
    Ok(out)
}

/// Full-lineup season aggregation for one team: unique lineups with summed
/// PM, total seconds, and distinct-game counts (the per-game-average weight
/// is `seconds / games`).
pub fn aggregate_team_season(
    stints: &[StintRecord],
    team: &str,
    season: &str,
) -> Vec<AggregatedRecord> {
    let mut acc: BTreeMap<GeneralizedLineup, (i64, f64, BTreeSet<String>)> = BTreeMap::new();
    for s in stints {
        if s.team != team || s.season != season || s.seconds <= 0.0 {
            continue;
        }
        let e = acc
            .entry(s.lineup.clone())
            .or_insert_with(|| (0, 0.0, BTreeSet::new()));
        e.0 += s.pm();
        e.1 += s.seconds;
        e.2.insert(s.game_id.clone());
    }
    acc.into_iter()
        .map(|(lineup, (pm, seconds, games))| AggregatedRecord {
            lineup,
            pm,
            seconds,
            games: games.len() as u32,
        })
        .collect()
}

/// Total on-court seconds per player over the given stints.
pub fn player_seconds(stints: &[StintRecord]) -> BTreeMap<PlayerId, f64> {
    let mut totals = BTreeMap::new();
    for s in stints {
        for p in s.lineup.members() {
            *totals.entry(p.clone()).or_insert(0.0) += s.seconds;
        }
    }
    totals
}

/// Players with at least `min_seconds` of playing time.
pub fn qualify_players(stints: &[StintRecord], min_seconds: f64) -> BTreeSet<PlayerId> {
    player_seconds(stints)
        .into_iter()
        .filter(|(_, secs)| *secs >= min_seconds)
        .map(|(p, _)| p)
        .collect()
}

/// Drop every stint containing an unqualified player (on the team side).
pub fn filter_qualified(stints: &[StintRecord], qualified: &BTreeSet<PlayerId>) -> Vec<StintRecord> {
    stints
        .iter()
        .filter(|s| s.lineup.members().iter().all(|p| qualified.contains(p)))
        .cloned()
        .collect()
}

/// One league-mode observation: a home lineup vs an away lineup with the
/// PM taken with respect to the home team.
#[derive(Clone, Debug)]
pub struct LeagueDesignRow {
    pub home_lineup: GeneralizedLineup,
    pub away_lineup: GeneralizedLineup,
    pub pm_home: i64,
    pub seconds: f64,
}

/// Aggregate stints into unique home-vs-away lineup observations and build
/// the league-mode design: +1 for home players, -1 for away players, so each
/// row has exactly k entries of +1 and k of -1.
pub fn build_league_rows(
    stints: &[StintRecord],
    season: &str,
) -> Result<(Vec<LeagueDesignRow>, ExtendedDesign), IngestError> {
    let mut acc: BTreeMap<(GeneralizedLineup, GeneralizedLineup), (i64, f64)> = BTreeMap::new();
    for s in stints {
        if s.season != season || s.seconds <= 0.0 {
            continue;
        }
        let (home, away, pm_home) = if s.is_home {
            (s.lineup.clone(), s.opp_lineup.clone(), s.pm())
        } else {
            (s.opp_lineup.clone(), s.lineup.clone(), -s.pm())
        };
        if home.intersection_size(&away) > 0 {
            return Err(IngestError::DataIntegrity(format!("{home} vs {away}")));
        }
        let e = acc.entry((home, away)).or_insert((0, 0.0));
        e.0 += pm_home;
        e.1 += s.seconds;
    }
    let rows: Vec<LeagueDesignRow> = acc
        .into_iter()
        .map(|((home_lineup, away_lineup), (pm_home, seconds))| LeagueDesignRow {
            home_lineup,
            away_lineup,
            pm_home,
            seconds,
        })
        .collect();

    let mut player_set: BTreeSet<PlayerId> = BTreeSet::new();
    for r in &rows {
        player_set.extend(r.home_lineup.members().iter().cloned());
        player_set.extend(r.away_lineup.members().iter().cloned());
    }
    let players: Vec<PlayerId> = player_set.into_iter().collect();
    let col: BTreeMap<&PlayerId, usize> = players.iter().zip(0..).collect();
    let n = rows.len();
    let mut x = DMatrix::zeros(n, players.len());
    let mut design_rows = Vec::with_capacity(n);
    for (i, r) in rows.iter().enumerate() {
        for p in r.home_lineup.members() {
            x[(i, col[p])] = 1.0;
        }
        for p in r.away_lineup.members() {
            x[(i, col[p])] = -1.0;
        }
        // design row label: the union of both lineups
        let mut union = r.home_lineup.members().to_vec();
        union.extend(r.away_lineup.members().iter().cloned());
        design_rows.push(GeneralizedLineup::canonicalize(union).expect("nonempty"));
    }
    let y = DVector::from_fn(n, |i, _| rows[i].pm_home as f64);
    let w = DVector::from_fn(n, |i, _| rows[i].seconds);
    Ok((
        rows,
        ExtendedDesign {
            rows: design_rows,
            players,
            x,
            y,
            w,
        },
    ))
}

/// A season's stints grouped by team, with per-team rosters and the
/// qualified-player set.
#[derive(Clone, Debug)]
pub struct SeasonDataset {
    pub season: String,
    pub team_stints: BTreeMap<String, Vec<StintRecord>>,
    pub roster: BTreeMap<String, Vec<(Player, f64)>>,
    pub qualified: BTreeSet<PlayerId>,
}

impl SeasonDataset {
    pub fn from_stints(season: &str, stints: &[StintRecord], min_seconds: f64) -> SeasonDataset {
        let season_stints: Vec<StintRecord> = stints
            .iter()
            .filter(|s| s.season == season)
            .cloned()
            .collect();
        let mut team_stints: BTreeMap<String, Vec<StintRecord>> = BTreeMap::new();
        for s in &season_stints {
            team_stints
                .entry(s.team.clone())
                .or_default()
                .push(s.clone());
        }
        let mut roster = BTreeMap::new();
        for (team, ts) in &team_stints {
            let entries: Vec<(Player, f64)> = player_seconds(ts)
                .into_iter()
                .map(|(id, secs)| {
                    (
                        Player {
                            display_name: id.as_str().to_string(),
                            id,
                        },
                        secs,
                    )
                })
                .collect();
            roster.insert(team.clone(), entries);
        }
        let qualified = qualify_players(&season_stints, min_seconds);
        SeasonDataset {
            season: season.to_string(),
            team_stints,
            roster,
            qualified,
        }
    }

    pub fn teams(&self) -> Vec<&str> {
        self.team_stints.keys().map(|s| s.as_str()).collect()
    }
}

/// The single-game 3-on-3 sample used throughout the tests: five stints for
/// team TOY totalling 600 seconds.
pub fn toy_fixture() -> Vec<StintRecord> {
    let gl = |ids: &[&str]| {
        GeneralizedLineup::canonicalize(ids.iter().map(|s| PlayerId::new(*s)).collect()).unwrap()
    };
    let rows: [(&[&str], f64, i64, i64); 5] = [
        (&["A", "B", "C"], 180.0, 3, 0),
        (&["A", "B", "D"], 180.0, 2, 0),
        (&["C", "D", "E"], 120.0, 0, 1),
        (&["B", "D", "E"], 60.0, 0, 2),
        (&["A", "B", "E"], 60.0, 0, 0),
    ];
    rows.iter()
        .map(|(ids, seconds, pf, pa)| StintRecord {
            season: "2024".into(),
            game_id: "G1".into(),
            date: "2024-01-01".into(),
            team: "TOY".into(),
            opponent: "OPP".into(),
            is_home: true,
            lineup: gl(ids),
            opp_lineup: gl(&["V", "W", "X"]),
            seconds: *seconds,
            points_for: *pf,
            points_against: *pa,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy_csv() -> String {
        let mut buf = Vec::new();
        write_stints(&mut buf, &toy_fixture()).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn parse_toy_csv() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(toy_csv().as_bytes()).unwrap();
        let stints = parse_stints(f.path(), 3).unwrap();
        assert_eq!(stints.len(), 5);
        let total: f64 = stints.iter().map(|s| s.seconds).sum();
        assert_eq!(total, 600.0);
    }

    #[test]
    fn parse_empty_file_is_empty() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"season,game_id,date,team,opponent,is_home,lineup,opp_lineup,seconds,points_for,points_against\n")
            .unwrap();
        assert!(parse_stints(f.path(), 3).unwrap().is_empty());
    }

    #[test]
    fn parse_wrong_lineup_size_is_schema_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "season,game_id,date,team,opponent,is_home,lineup,opp_lineup,seconds,points_for,points_against").unwrap();
        writeln!(f, "2024,G1,2024-01-01,TOY,OPP,true,A;B;C;D,V;W;X,60,1,0").unwrap();
        match parse_stints(f.path(), 3) {
            Err(IngestError::Schema { line, found, expected }) => {
                assert_eq!((line, found, expected), (2, 4, 3));
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn parse_round_trip_is_byte_identical() {
        let text = toy_csv();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        let stints = parse_stints(f.path(), 3).unwrap();
        let mut buf = Vec::new();
        write_stints(&mut buf, &stints).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn aggregate_single_game_weights_are_stint_seconds() {
        let recs = aggregate_team_season(&toy_fixture(), "TOY", "2024");
        assert_eq!(recs.len(), 5);
        for r in &recs {
            assert_eq!(r.games, 1);
            assert_eq!(r.seconds_per_game(), r.seconds);
        }
    }

    #[test]
    fn aggregate_two_games_averages_per_game() {
        let mut stints = Vec::new();
        let mut a = toy_fixture()[0].clone();
        a.seconds = 300.0;
        a.points_for = 4;
        a.points_against = 0;
        a.game_id = "G1".into();
        let mut b = a.clone();
        b.seconds = 100.0;
        b.points_for = 0;
        b.points_against = 1;
        b.game_id = "G2".into();
        stints.push(a);
        stints.push(b);
        let recs = aggregate_team_season(&stints, "TOY", "2024");
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].pm, 3);
        assert_eq!(recs[0].seconds_per_game(), 200.0);
    }

    #[test]
    fn aggregate_skips_zero_second_stints() {
        let mut stints = toy_fixture();
        stints[0].seconds = 0.0;
        let recs = aggregate_team_season(&stints, "TOY", "2024");
        assert_eq!(recs.len(), 4);
    }

    #[test]
    fn qualification_thresholds() {
        let stints = toy_fixture();
        // per-player totals: A=420, B=480, C=300, D=360, E=240
        let secs = player_seconds(&stints);
        let get = |id: &str| secs[&PlayerId::new(id)];
        assert_eq!(get("A"), 420.0);
        assert_eq!(get("B"), 480.0);
        assert_eq!(get("C"), 300.0);
        assert_eq!(get("D"), 360.0);
        assert_eq!(get("E"), 240.0);
        assert!(qualify_players(&stints, 10_000.0).is_empty());
        assert_eq!(qualify_players(&stints, 0.0).len(), 5);
        // boundary: threshold exactly at a player's total keeps them
        assert!(qualify_players(&stints, 240.0).contains(&PlayerId::new("E")));
        assert!(!qualify_players(&stints, 241.0).contains(&PlayerId::new("E")));
        // 250 excludes only E
        let q = qualify_players(&stints, 250.0);
        assert_eq!(q.len(), 4);
        assert!(!q.contains(&PlayerId::new("E")));
    }

    #[test]
    fn qualification_is_monotone() {
        let stints = toy_fixture();
        let mut prev = qualify_players(&stints, 0.0).len();
        for t in [100.0, 250.0, 350.0, 450.0, 600.0] {
            let now = qualify_players(&stints, t).len();
            assert!(now <= prev);
            prev = now;
        }
    }

    #[test]
    fn league_rows_sign_structure() {
        let stints = toy_fixture();
        let (rows, design) = build_league_rows(&stints, "2024").unwrap();
        assert!(!rows.is_empty());
        for i in 0..design.n() {
            let plus = design.x.row(i).iter().filter(|&&v| v == 1.0).count();
            let minus = design.x.row(i).iter().filter(|&&v| v == -1.0).count();
            assert_eq!((plus, minus), (3, 3));
        }
    }

    #[test]
    fn league_rows_away_pm_is_negated() {
        let mut stints = toy_fixture();
        for s in &mut stints {
            s.is_home = false;
        }
        // away lineup outscores by 2 -> Y = -2
        stints[1].points_for = 2;
        stints[1].points_against = 0;
        let (rows, _) = build_league_rows(&stints[1..2], "2024").unwrap();
        assert_eq!(rows[0].pm_home, -2);
    }

    #[test]
    fn league_rows_reject_overlapping_lineups() {
        let mut stints = toy_fixture();
        stints[0].opp_lineup = stints[0].lineup.clone();
        assert!(matches!(
            build_league_rows(&stints[..1], "2024"),
            Err(IngestError::DataIntegrity(_))
        ));
    }

    #[test]
    fn aggregation_conserves_totals() {
        let stints = toy_fixture();
        let recs = aggregate_team_season(&stints, "TOY", "2024");
        let pm_total: i64 = recs.iter().map(|r| r.pm).sum();
        let stint_pm: i64 = stints.iter().map(|s| s.pm()).sum();
        assert_eq!(pm_total, stint_pm);
        let sec_total: f64 = recs.iter().map(|r| r.seconds).sum();
        assert_eq!(sec_total, 600.0);
    }
}
