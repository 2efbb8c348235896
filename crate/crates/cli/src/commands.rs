//! The six subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use lineuplab_core::eval::{
    bootstrap_hapm, posterior_ranks, spearman, split_half_eval, year_over_year, Target,
};
use lineuplab_core::ingest::{
    build_league_rows, filter_qualified, parse_stints, qualify_players, write_stints,
};
use lineuplab_core::lapm::{
    lapm_map, lapm_map_cv, lapm_rank, mala_sample, MalaSchedule, SigmaPolicy, SpectralBasis,
    TauPolicy,
};
use lineuplab_core::metrics::{
    apm, apm_league, hapm, papm, papm_league, rank_within_size, raw_pm, LambdaPolicy, Method,
    MetricResult,
};
use lineuplab_core::model::{
    build_design, build_line_graph, enumerate_generalized, WeightPolicy,
};
use lineuplab_core::rank::{table_from_scores, RankedTable};
use lineuplab_core::regression::CvConfig;
use lineuplab_core::synth::{generate_synthetic, SynthConfig};
use lineuplab_core::{GeneralizedLineup, PlayerId, StintRecord};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{export_dot, tables_to_csv, tables_to_json};

pub struct CommonOpts {
    pub stints: PathBuf,
    pub k: usize,
    pub min_seconds: f64,
    pub season: String,
    pub team: String,
    pub max_size: usize,
    pub seed: u64,
}

pub fn load_filtered(opts: &CommonOpts) -> Result<Vec<StintRecord>, CliError> {
    let stints = parse_stints(&opts.stints, opts.k)?;
    let qualified = qualify_players(&stints, opts.min_seconds);
    Ok(filter_qualified(&stints, &qualified))
}

fn team_season(stints: &[StintRecord], season: &str, team: &str) -> Vec<StintRecord> {
    stints
        .iter()
        .filter(|s| s.season == season && s.team == team)
        .cloned()
        .collect()
}

fn players_of(records: &[lineuplab_core::AggregatedRecord]) -> Vec<PlayerId> {
    let mut set = BTreeSet::new();
    for r in records {
        for p in r.lineup.members() {
            set.insert(p.clone());
        }
    }
    set.into_iter().collect()
}

#[derive(Clone, Debug)]
pub enum LambdaArg {
    Cv,
    Fixed(f64),
}

impl std::str::FromStr for LambdaArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(LambdaArg::Cv);
        }
        s.parse::<f64>()
            .map(LambdaArg::Fixed)
            .map_err(|_| format!("lambda must be 'cv' or a number, got {s:?}"))
    }
}

impl LambdaArg {
    pub fn to_policy(&self, folds: usize, seed: u64) -> LambdaPolicy {
        match self {
            LambdaArg::Fixed(v) => LambdaPolicy::Fixed(*v),
            LambdaArg::Cv => LambdaPolicy::Cv(CvConfig {
                folds,
                seed,
                ..Default::default()
            }),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum TauArg {
    Elbow,
    Full,
    Fixed(usize),
}

impl std::str::FromStr for TauArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "elbow" => Ok(TauArg::Elbow),
            "full" => Ok(TauArg::Full),
            other => other
                .parse::<usize>()
                .map(TauArg::Fixed)
                .map_err(|_| format!("tau must be 'elbow', 'full', or an integer, got {other:?}")),
        }
    }
}

impl From<TauArg> for TauPolicy {
    fn from(t: TauArg) -> TauPolicy {
        match t {
            TauArg::Elbow => TauPolicy::Elbow,
            TauArg::Full => TauPolicy::Full,
            TauArg::Fixed(n) => TauPolicy::Fixed(n),
        }
    }
}

pub fn cmd_ingest(
    opts: &CommonOpts,
    output: &Path,
    dry_run: bool,
) -> Result<String, CliError> {
    let stints = parse_stints(&opts.stints, opts.k)?;
    let qualified = qualify_players(&stints, opts.min_seconds);
    let kept = filter_qualified(&stints, &qualified);
    let summary = format!(
        "parsed {} stints, {} qualified players, kept {} stints",
        stints.len(),
        qualified.len(),
        kept.len()
    );
    if dry_run {
        return Ok(summary);
    }
    let mut buf = Vec::new();
    write_stints(&mut buf, &kept)?;
    fs::write(output, buf)?;
    Ok(format!("{summary}; wrote {}", output.display()))
}

/// Fit one method on a single team-season and rank every unit size.
#[allow(clippy::too_many_arguments)]
pub fn rank_tables(
    stints: &[StintRecord],
    opts: &CommonOpts,
    method: Method,
    lambda: &LambdaArg,
    folds: usize,
    tau: TauArg,
    weight: WeightPolicy,
) -> Result<Vec<RankedTable>, CliError> {
    let policy = lambda.to_policy(folds, opts.seed);
    let league_mode = matches!(method, Method::ApmLeague | Method::PapmLeague);
    if league_mode {
        let season_stints: Vec<StintRecord> = stints
            .iter()
            .filter(|s| s.season == opts.season)
            .cloned()
            .collect();
        let (_, design) = build_league_rows(&season_stints, &opts.season)?;
        let result = if method == Method::ApmLeague {
            apm_league(&design, &policy)?
        } else {
            papm_league(&design, &policy, None)?
        };
        // league table: player coefficients pooled across all teams
        let units: Vec<(GeneralizedLineup, f64)> = result
            .coefficients
            .iter()
            .map(|(p, &s)| {
                (
                    GeneralizedLineup::canonicalize(vec![p.clone()]).expect("nonempty"),
                    s,
                )
            })
            .collect();
        return Ok(vec![table_from_scores(&method.to_string(), 1, units)]);
    }

    let team_stints = team_season(stints, &opts.season, &opts.team);
    if team_stints.is_empty() {
        return Err(CliError::Input(format!(
            "no stints for team {} in season {}",
            opts.team, opts.season
        )));
    }
    let records = enumerate_generalized(&team_stints, opts.max_size)?;
    let result: MetricResult = match method {
        Method::Pm => raw_pm(&records),
        Method::Apm | Method::SumApm => {
            let players = players_of(&records);
            let design = build_design(&records, &players, weight)?.restrict_to_size(opts.k);
            let base = apm(&design, &policy)?;
            if method == Method::SumApm {
                let mut scores = BTreeMap::new();
                for r in &records {
                    scores.insert(
                        r.lineup.clone(),
                        lineuplab_core::metrics::predict_lineup(&base, &r.lineup)?,
                    );
                }
                MetricResult { scores, ..base }
            } else {
                base
            }
        }
        Method::Papm => {
            let players = players_of(&records);
            let design = build_design(&records, &players, weight)?.restrict_to_size(opts.k);
            papm(&design, &policy, None)?
        }
        Method::Hapm => {
            let players = players_of(&records);
            let design = build_design(&records, &players, weight)?;
            hapm(&design, &policy)?
        }
        Method::Lapm => {
            let lg = build_line_graph(&records);
            let basis = SpectralBasis::from_line_graph(&lg, tau.into());
            let fit = match &policy {
                LambdaPolicy::Fixed(kappa) => lapm_map(&lg, &basis, *kappa),
                LambdaPolicy::Cv(_) => {
                    let grid = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
                    lapm_map_cv(&lg, &basis, &grid, folds, opts.seed).0
                }
            };
            let mut tables = Vec::new();
            for m in 1..=opts.max_size {
                let table = lapm_rank(&lg, &fit.beta_map, m);
                if !table.is_empty() {
                    tables.push(table);
                }
            }
            return Ok(tables);
        }
        Method::ApmLeague | Method::PapmLeague => unreachable!("handled above"),
    };
    let mut tables = Vec::new();
    for m in 1..=opts.max_size {
        let table = rank_within_size(&result, m);
        if !table.is_empty() {
            tables.push(table);
        }
    }
    Ok(tables)
}

pub fn write_tables(
    tables: &[RankedTable],
    out_dir: &Path,
    method: Method,
    season: &str,
    team: &str,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out_dir)?;
    let stem = format!("rankings_{method}_{season}_{team}");
    let csv_path = out_dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, tables_to_csv(tables))?;
    fs::write(out_dir.join(format!("{stem}.json")), tables_to_json(tables)?)?;
    Ok(csv_path)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_rank(
    opts: &CommonOpts,
    method: Method,
    lambda: &LambdaArg,
    folds: usize,
    tau: TauArg,
    weight: WeightPolicy,
    out_dir: &Path,
    dry_run: bool,
) -> Result<String, CliError> {
    let stints = load_filtered(opts)?;
    if dry_run {
        return Ok(format!("validated {} stints", stints.len()));
    }
    let tables = rank_tables(&stints, opts, method, lambda, folds, tau, weight)?;
    let team = if matches!(method, Method::ApmLeague | Method::PapmLeague) {
        "league"
    } else {
        opts.team.as_str()
    };
    let path = write_tables(&tables, out_dir, method, &opts.season, team)?;
    Ok(format!("wrote {}", path.display()))
}

pub struct UncertaintyOpts {
    pub replicates: usize,
    pub lambda: LambdaArg,
    pub folds: usize,
    pub tau: TauArg,
    pub sigma2: Option<f64>,
    pub retained: usize,
    pub thin: usize,
    pub burn_in: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_uncertainty(
    opts: &CommonOpts,
    method: Method,
    unc: &UncertaintyOpts,
    weight: WeightPolicy,
    out_dir: &Path,
    dry_run: bool,
) -> Result<String, CliError> {
    let stints = load_filtered(opts)?;
    if dry_run {
        return Ok(format!("validated {} stints", stints.len()));
    }
    let team_stints = team_season(&stints, &opts.season, &opts.team);
    if team_stints.is_empty() {
        return Err(CliError::Input(format!(
            "no stints for team {} in season {}",
            opts.team, opts.season
        )));
    }
    let records = enumerate_generalized(&team_stints, opts.max_size)?;
    let tables = match method {
        Method::Hapm => {
            let players = players_of(&records);
            let design = build_design(&records, &players, weight)?;
            let policy = unc.lambda.to_policy(unc.folds, opts.seed);
            bootstrap_hapm(&design, &policy, unc.replicates, opts.seed)?
        }
        Method::Lapm => {
            let lg = build_line_graph(&records);
            let basis = SpectralBasis::from_line_graph(&lg, unc.tau.into());
            let lambda = match unc.lambda {
                LambdaArg::Fixed(v) => v,
                LambdaArg::Cv => {
                    let grid = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
                    lapm_map_cv(&lg, &basis, &grid, unc.folds, opts.seed).0.kappa
                }
            };
            let schedule = MalaSchedule {
                retained: unc.retained,
                burn_in_fraction: unc.burn_in,
                thin: unc.thin,
            };
            let sigma = match unc.sigma2 {
                Some(s) => SigmaPolicy::Fixed(s),
                None => SigmaPolicy::Gibbs,
            };
            let samples = mala_sample(&lg, &basis, lambda, schedule, sigma, opts.seed);
            if let Some(w) = &samples.adaptation_warning {
                eprintln!("warning: {w}");
            }
            posterior_ranks(&lg, &basis, &samples)
        }
        other => {
            return Err(CliError::Input(format!(
                "uncertainty supports hapm (bootstrap) and lapm (posterior), not {other}"
            )))
        }
    };
    let path = write_tables(&tables, out_dir, method, &opts.season, &opts.team)?;
    Ok(format!("wrote {}", path.display()))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_export_graph(
    opts: &CommonOpts,
    method: Method,
    lambda: &LambdaArg,
    folds: usize,
    tau: TauArg,
    weight: WeightPolicy,
    top_n: usize,
    out_prefix: &Path,
    dry_run: bool,
) -> Result<String, CliError> {
    let stints = load_filtered(opts)?;
    if dry_run {
        return Ok(format!("validated {} stints", stints.len()));
    }
    let tables = rank_tables(&stints, opts, method, lambda, folds, tau, weight)?;
    let players = tables
        .iter()
        .find(|t| t.size == 1)
        .ok_or_else(|| CliError::Input("no individual scores to export".into()))?;
    let groups: Vec<RankedTable> = tables.iter().filter(|t| t.size > 1).cloned().collect();
    let dot = export_dot(players, &groups, top_n);
    let dot_path = out_prefix.with_extension("dot");
    let json_path = out_prefix.with_extension("json");
    if let Some(parent) = dot_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&dot_path, dot)?;
    let mut all = vec![players.clone()];
    all.extend(groups);
    fs::write(&json_path, tables_to_json(&all)?)?;
    Ok(format!("wrote {} and {}", dot_path.display(), json_path.display()))
}

#[derive(Serialize)]
pub struct EvalReport {
    pub seasons: Vec<String>,
    pub methods: Vec<String>,
    /// season -> metric_name -> method -> spearman
    pub advanced_metric_correlations: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    /// "a->b" -> method -> spearman
    pub year_over_year: BTreeMap<String, BTreeMap<String, f64>>,
    /// season -> team -> method -> target -> spearman
    pub split_half: BTreeMap<String, BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>>,
    pub warnings: Vec<String>,
}

fn parse_metric_file(
    path: &Path,
) -> Result<BTreeMap<String, BTreeMap<String, BTreeMap<PlayerId, f64>>>, CliError> {
    // season -> metric_name -> player -> value
    let text = fs::read_to_string(path)?;
    let mut out: BTreeMap<String, BTreeMap<String, BTreeMap<PlayerId, f64>>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            let expected = "season,player_id,metric_name,value";
            if line.trim() != expected {
                return Err(CliError::Input(format!(
                    "metric file header mismatch: expected {expected:?}, got {line:?}"
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(CliError::Input(format!(
                "metric file line {}: expected 4 fields, got {}",
                i + 1,
                parts.len()
            )));
        }
        let value: f64 = parts[3]
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("metric file line {}: bad value", i + 1)))?;
        out.entry(parts[0].trim().to_string())
            .or_default()
            .entry(parts[2].trim().to_string())
            .or_default()
            .insert(PlayerId::new(parts[1].trim()), value);
    }
    Ok(out)
}

/// Player coefficient map for one method over every team in a season.
fn season_player_scores(
    stints: &[StintRecord],
    season: &str,
    k: usize,
    max_size: usize,
    method: Method,
    policy: &LambdaPolicy,
) -> Result<BTreeMap<PlayerId, f64>, CliError> {
    let mut out = BTreeMap::new();
    let teams: BTreeSet<&str> = stints
        .iter()
        .filter(|s| s.season == season)
        .map(|s| s.team.as_str())
        .collect();
    for team in teams {
        let team_stints = team_season(stints, season, team);
        let records = enumerate_generalized(&team_stints, max_size)?;
        let players = players_of(&records);
        let scores: BTreeMap<PlayerId, f64> = match method {
            Method::Pm => {
                let result = raw_pm(&records);
                players
                    .iter()
                    .filter_map(|p| {
                        let singleton =
                            GeneralizedLineup::canonicalize(vec![p.clone()]).expect("nonempty");
                        result.scores.get(&singleton).map(|&s| (p.clone(), s))
                    })
                    .collect()
            }
            Method::Apm | Method::SumApm => {
                let design = build_design(&records, &players, WeightPolicy::PerGameAverage)?
                    .restrict_to_size(k);
                apm(&design, policy)?.coefficients
            }
            Method::Papm => {
                let design = build_design(&records, &players, WeightPolicy::PerGameAverage)?
                    .restrict_to_size(k);
                papm(&design, policy, None)?.coefficients
            }
            Method::Hapm => {
                let design = build_design(&records, &players, WeightPolicy::PerGameAverage)?;
                hapm(&design, policy)?.coefficients
            }
            Method::Lapm => {
                let lg = build_line_graph(&records);
                let basis = SpectralBasis::from_line_graph(&lg, TauPolicy::Elbow);
                let grid = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];
                let fit = lapm_map_cv(&lg, &basis, &grid, 5, 0).0;
                players
                    .iter()
                    .filter_map(|p| {
                        let singleton =
                            GeneralizedLineup::canonicalize(vec![p.clone()]).expect("nonempty");
                        lg.node_index(&singleton)
                            .map(|i| (p.clone(), fit.beta_map[i]))
                    })
                    .collect()
            }
            Method::ApmLeague | Method::PapmLeague => continue,
        };
        out.extend(scores);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    opts: &CommonOpts,
    methods: &[Method],
    lambda: &LambdaArg,
    folds: usize,
    metric_file: Option<&Path>,
    out: &Path,
    dry_run: bool,
) -> Result<String, CliError> {
    let stints = load_filtered(opts)?;
    if dry_run {
        return Ok(format!("validated {} stints", stints.len()));
    }
    let policy = lambda.to_policy(folds, opts.seed);
    let seasons: Vec<String> = {
        let mut s: BTreeSet<String> = stints.iter().map(|x| x.season.clone()).collect();
        s.remove("");
        let mut v: Vec<String> = s.into_iter().collect();
        v.sort();
        v
    };
    let mut warnings = Vec::new();

    let metric_data = match metric_file {
        Some(path) if path.exists() => Some(parse_metric_file(path)?),
        Some(path) => {
            warnings.push(format!(
                "metric file {} not found; advanced-metric section omitted",
                path.display()
            ));
            None
        }
        None => None,
    };

    let mut per_season_players: BTreeMap<(String, Method), BTreeMap<PlayerId, f64>> =
        BTreeMap::new();
    for season in &seasons {
        for &method in methods {
            let scores =
                season_player_scores(&stints, season, opts.k, opts.max_size, method, &policy)?;
            per_season_players.insert((season.clone(), method), scores);
        }
    }

    let mut advanced = BTreeMap::new();
    if let Some(metric_data) = &metric_data {
        for season in &seasons {
            let Some(by_metric) = metric_data.get(season) else {
                continue;
            };
            let mut season_block = BTreeMap::new();
            for (metric_name, values) in by_metric {
                let mut method_block = BTreeMap::new();
                for &method in methods {
                    let scores = &per_season_players[&(season.clone(), method)];
                    match spearman(scores, values) {
                        Ok(rho) => {
                            method_block.insert(method.to_string(), rho);
                        }
                        Err(e) => warnings.push(format!(
                            "{season}/{metric_name}/{method}: {e}"
                        )),
                    }
                }
                season_block.insert(metric_name.clone(), method_block);
            }
            advanced.insert(season.clone(), season_block);
        }
    }

    let mut yoy = BTreeMap::new();
    for pair in seasons.windows(2) {
        let mut method_block = BTreeMap::new();
        for &method in methods {
            let a = &per_season_players[&(pair[0].clone(), method)];
            let b = &per_season_players[&(pair[1].clone(), method)];
            match year_over_year(a, b) {
                Ok(rho) => {
                    method_block.insert(method.to_string(), rho);
                }
                Err(e) => warnings.push(format!("{}->{}/{method}: {e}", pair[0], pair[1])),
            }
        }
        yoy.insert(format!("{}->{}", pair[0], pair[1]), method_block);
    }

    let mut split = BTreeMap::new();
    for season in &seasons {
        let teams: BTreeSet<String> = stints
            .iter()
            .filter(|s| &s.season == season)
            .map(|s| s.team.clone())
            .collect();
        let mut season_block = BTreeMap::new();
        for team in teams {
            let team_stints = team_season(&stints, season, &team);
            let mut method_block = BTreeMap::new();
            for &method in methods {
                let mut target_block = BTreeMap::new();
                for (label, target) in
                    [("observed_pm", Target::ObservedPm), ("self_refit", Target::SelfRefit)]
                {
                    match split_half_eval(&team_stints, opts.k, method, &policy, target) {
                        Ok(rho) => {
                            target_block.insert(label.to_string(), rho);
                        }
                        Err(e) => {
                            warnings.push(format!("{season}/{team}/{method}/{label}: {e}"))
                        }
                    }
                }
                method_block.insert(method.to_string(), target_block);
            }
            season_block.insert(team, method_block);
        }
        split.insert(season.clone(), season_block);
    }

    let report = EvalReport {
        seasons,
        methods: methods.iter().map(|m| m.to_string()).collect(),
        advanced_metric_correlations: advanced,
        year_over_year: yoy,
        split_half: split,
        warnings,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(out, json)?;
    Ok(format!("wrote {}", out.display()))
}

#[derive(Serialize)]
struct TruthDump {
    seed: u64,
    substitution_bias: f64,
    true_individual: BTreeMap<String, f64>,
    true_pair_synergy: BTreeMap<String, f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_synth(
    config: &SynthConfig,
    seed: u64,
    out: &Path,
    truth_out: Option<&Path>,
    dry_run: bool,
) -> Result<String, CliError> {
    if dry_run {
        // surface config validation without generating anything
        generate_synthetic(&SynthConfig { games: 0, ..config.clone() }, seed)?;
        return Ok("synth config valid".to_string());
    }
    let season = generate_synthetic(config, seed)?;
    let mut buf = Vec::new();
    write_stints(&mut buf, &season.stints)?;
    fs::write(out, buf)?;
    if let Some(truth_path) = truth_out {
        let dump = TruthDump {
            seed,
            substitution_bias: config.substitution_bias,
            true_individual: season
                .true_individual
                .iter()
                .map(|(p, &v)| (p.as_str().to_string(), v))
                .collect(),
            true_pair_synergy: season
                .true_pair_synergy
                .iter()
                .map(|(l, &v)| (l.to_string(), v))
                .collect(),
        };
        let json =
            serde_json::to_string_pretty(&dump).map_err(|e| CliError::Input(e.to_string()))?;
        fs::write(truth_path, json)?;
    }
    Ok(format!(
        "wrote {} stints to {}",
        season.stints.len(),
        out.display()
    ))
}
