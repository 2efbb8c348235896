//! lineuplab: rank players and generalized lineups from plus-minus stints.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lineuplab_core::ingest::DEFAULT_MIN_SECONDS;
use lineuplab_core::metrics::Method;
use lineuplab_core::model::WeightPolicy;
use lineuplab_core::synth::SynthConfig;

use commands::{CommonOpts, LambdaArg, TauArg, UncertaintyOpts};
use config::{resolve_seed, ConfigFile};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "lineuplab",
    about = "Rank players and generalized lineups from plus-minus stint data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SharedArgs {
    /// Stint CSV input.
    #[arg(long)]
    stints: Option<PathBuf>,
    /// Players on court per lineup.
    #[arg(long)]
    k: Option<usize>,
    /// Minimum total seconds for a player to qualify.
    #[arg(long)]
    min_seconds: Option<f64>,
    #[arg(long)]
    season: Option<String>,
    #[arg(long)]
    team: Option<String>,
    /// Largest generalized-lineup size to score (default k).
    #[arg(long)]
    max_size: Option<usize>,
    /// Flat key=value config file; CLI flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; falls back to config, then LINEUPLAB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Validate inputs without computing.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    method: Option<String>,
    /// 'cv' or a fixed penalty value.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// 'elbow', 'full', or a fixed eigenvector count.
    #[arg(long)]
    tau: Option<String>,
    /// 'per-game' or 'total'.
    #[arg(long)]
    weight: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, qualify, and rewrite stints as canonical CSV.
    Ingest {
        #[command(flatten)]
        shared: SharedArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit a method and write ranked tables per unit size.
    Rank {
        #[command(flatten)]
        shared: SharedArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Ranked tables with rank intervals (bootstrap or posterior).
    Uncertainty {
        #[command(flatten)]
        shared: SharedArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Bootstrap replicate count (hapm).
        #[arg(long)]
        replicates: Option<usize>,
        /// Fixed noise variance for lapm sampling; Gibbs-sampled when absent.
        #[arg(long)]
        sigma2: Option<f64>,
        /// Retained posterior draws (lapm).
        #[arg(long)]
        retained: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        burn_in: Option<f64>,
    },
    /// Spearman evaluation report: external metrics, year-over-year, split-half.
    Eval {
        #[command(flatten)]
        shared: SharedArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Comma-separated method list.
        #[arg(long)]
        methods: Option<String>,
        /// Advanced-metric CSV (season,player_id,metric_name,value).
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DOT + JSON incidence graph of players and top generalized lineups.
    ExportGraph {
        #[command(flatten)]
        shared: SharedArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long)]
        top_n: Option<usize>,
        /// Output path prefix; writes prefix.dot and prefix.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic season with planted ground truth.
    Synth {
        #[command(flatten)]
        shared: SharedArgs,
        #[arg(long)]
        roster_size: Option<usize>,
        #[arg(long)]
        games: Option<usize>,
        #[arg(long)]
        stints_per_game: Option<usize>,
        #[arg(long)]
        effect_scale: Option<f64>,
        #[arg(long)]
        synergy_scale: Option<f64>,
        #[arg(long)]
        synergy_density: Option<f64>,
        #[arg(long)]
        noise_sd: Option<f64>,
        #[arg(long)]
        bias: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional JSON dump of the planted effects and synergies.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile, CliError> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn merged<T: std::str::FromStr + Clone>(
    flag: &Option<T>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<Option<T>, CliError> {
    if let Some(v) = flag {
        return Ok(Some(v.clone()));
    }
    cfg.parse::<T>(key)
}

fn required<T: std::str::FromStr + Clone>(
    flag: &Option<T>,
    cfg: &ConfigFile,
    key: &str,
) -> Result<T, CliError> {
    merged(flag, cfg, key)?
        .ok_or_else(|| CliError::Input(format!("missing required option --{}", key.replace('_', "-"))))
}

fn or_default<T: std::str::FromStr + Clone>(
    flag: &Option<T>,
    cfg: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    Ok(merged(flag, cfg, key)?.unwrap_or(default))
}

fn common_opts(shared: &SharedArgs, cfg: &ConfigFile) -> Result<CommonOpts, CliError> {
    Ok(CommonOpts {
        stints: required(&shared.stints, cfg, "stints")?,
        k: required(&shared.k, cfg, "k")?,
        min_seconds: or_default(&shared.min_seconds, cfg, "min_seconds", DEFAULT_MIN_SECONDS)?,
        season: or_default(&shared.season, cfg, "season", String::new())?,
        team: or_default(&shared.team, cfg, "team", String::new())?,
        max_size: 0, // filled below once k is known
        seed: resolve_seed(shared.seed, cfg)?,
    })
}

fn finish_common(mut opts: CommonOpts, shared: &SharedArgs, cfg: &ConfigFile) -> Result<CommonOpts, CliError> {
    opts.max_size = or_default(&shared.max_size, cfg, "max_size", opts.k)?;
    Ok(opts)
}

struct FitSettings {
    method: Method,
    lambda: LambdaArg,
    folds: usize,
    tau: TauArg,
    weight: WeightPolicy,
}

fn parse_weight(s: &str) -> Result<WeightPolicy, CliError> {
    match s {
        "per-game" => Ok(WeightPolicy::PerGameAverage),
        "total" => Ok(WeightPolicy::TotalSeconds),
        other => Err(CliError::Input(format!(
            "weight must be 'per-game' or 'total', got {other:?}"
        ))),
    }
}

fn fit_settings(fit: &FitArgs, cfg: &ConfigFile, default_method: Method) -> Result<FitSettings, CliError> {
    let method = match merged(&fit.method, cfg, "method")? {
        Some(raw) => raw.parse::<Method>().map_err(CliError::Input)?,
        None => default_method,
    };
    let lambda = or_default(&fit.lambda, cfg, "lambda", "cv".to_string())?
        .parse::<LambdaArg>()
        .map_err(CliError::Input)?;
    let folds = or_default(&fit.folds, cfg, "folds", 10)?;
    let tau = or_default(&fit.tau, cfg, "tau", "elbow".to_string())?
        .parse::<TauArg>()
        .map_err(CliError::Input)?;
    let weight = parse_weight(&or_default(&fit.weight, cfg, "weight", "per-game".to_string())?)?;
    Ok(FitSettings {
        method,
        lambda,
        folds,
        tau,
        weight,
    })
}

fn run() -> Result<String, CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest { shared, output } => {
            let cfg = load_config(&shared.config)?;
            let opts = finish_common(common_opts(&shared, &cfg)?, &shared, &cfg)?;
            let output = or_default(&output, &cfg, "output", PathBuf::from("stints_clean.csv"))?;
            commands::cmd_ingest(&opts, &output, shared.dry_run)
        }
        Command::Rank { shared, fit, out_dir } => {
            let cfg = load_config(&shared.config)?;
            let opts = finish_common(common_opts(&shared, &cfg)?, &shared, &cfg)?;
            let settings = fit_settings(&fit, &cfg, Method::Hapm)?;
            let out_dir = or_default(&out_dir, &cfg, "out_dir", PathBuf::from("."))?;
            commands::cmd_rank(
                &opts,
                settings.method,
                &settings.lambda,
                settings.folds,
                settings.tau,
                settings.weight,
                &out_dir,
                shared.dry_run,
            )
        }
        Command::Uncertainty {
            shared,
            fit,
            out_dir,
            replicates,
            sigma2,
            retained,
            thin,
            burn_in,
        } => {
            let cfg = load_config(&shared.config)?;
            let opts = finish_common(common_opts(&shared, &cfg)?, &shared, &cfg)?;
            let settings = fit_settings(&fit, &cfg, Method::Hapm)?;
            let out_dir = or_default(&out_dir, &cfg, "out_dir", PathBuf::from("."))?;
            let unc = UncertaintyOpts {
                replicates: or_default(&replicates, &cfg, "replicates", 200)?,
                lambda: settings.lambda.clone(),
                folds: settings.folds,
                tau: settings.tau,
                sigma2: merged(&sigma2, &cfg, "sigma2")?,
                retained: or_default(&retained, &cfg, "retained", 1000)?,
                thin: or_default(&thin, &cfg, "thin", 5)?,
                burn_in: or_default(&burn_in, &cfg, "burn_in", 0.10)?,
            };
            commands::cmd_uncertainty(
                &opts,
                settings.method,
                &unc,
                settings.weight,
                &out_dir,
                shared.dry_run,
            )
        }
        Command::Eval {
            shared,
            fit,
            methods,
            metrics,
            out,
        } => {
            let cfg = load_config(&shared.config)?;
            let opts = finish_common(common_opts(&shared, &cfg)?, &shared, &cfg)?;
            let settings = fit_settings(&fit, &cfg, Method::Hapm)?;
            let method_list = or_default(
                &methods,
                &cfg,
                "methods",
                "pm,apm,sum_apm,hapm,lapm".to_string(),
            )?;
            let methods: Vec<Method> = method_list
                .split(',')
                .map(|s| s.trim().parse::<Method>().map_err(CliError::Input))
                .collect::<Result<_, _>>()?;
            let metrics = merged(&metrics, &cfg, "metrics")?;
            let out = or_default(&out, &cfg, "out", PathBuf::from("eval_report.json"))?;
            commands::cmd_eval(
                &opts,
                &methods,
                &settings.lambda,
                settings.folds,
                metrics.as_deref(),
                &out,
                shared.dry_run,
            )
        }
        Command::ExportGraph {
            shared,
            fit,
            top_n,
            out,
        } => {
            let cfg = load_config(&shared.config)?;
            let opts = finish_common(common_opts(&shared, &cfg)?, &shared, &cfg)?;
            let settings = fit_settings(&fit, &cfg, Method::Hapm)?;
            let top_n = or_default(&top_n, &cfg, "top_n", 15)?;
            let out = or_default(&out, &cfg, "out", PathBuf::from("lineup_graph"))?;
            commands::cmd_export_graph(
                &opts,
                settings.method,
                &settings.lambda,
                settings.folds,
                settings.tau,
                settings.weight,
                top_n,
                &out,
                shared.dry_run,
            )
        }
        Command::Synth {
            shared,
            roster_size,
            games,
            stints_per_game,
            effect_scale,
            synergy_scale,
            synergy_density,
            noise_sd,
            bias,
            out,
            truth_out,
        } => {
            let cfg = load_config(&shared.config)?;
            let seed = resolve_seed(shared.seed, &cfg)?;
            let defaults = SynthConfig::default();
            let config = SynthConfig {
                roster_size: or_default(&roster_size, &cfg, "roster_size", defaults.roster_size)?,
                k: or_default(&shared.k, &cfg, "k", defaults.k)?,
                games: or_default(&games, &cfg, "games", defaults.games)?,
                stints_per_game: or_default(
                    &stints_per_game,
                    &cfg,
                    "stints_per_game",
                    defaults.stints_per_game,
                )?,
                seconds_per_stint: defaults.seconds_per_stint,
                effect_scale: or_default(&effect_scale, &cfg, "effect_scale", defaults.effect_scale)?,
                synergy_scale: or_default(
                    &synergy_scale,
                    &cfg,
                    "synergy_scale",
                    defaults.synergy_scale,
                )?,
                synergy_density: or_default(
                    &synergy_density,
                    &cfg,
                    "synergy_density",
                    defaults.synergy_density,
                )?,
                noise_sd: or_default(&noise_sd, &cfg, "noise_sd", defaults.noise_sd)?,
                substitution_bias: or_default(&bias, &cfg, "bias", defaults.substitution_bias)?,
                season: or_default(&shared.season, &cfg, "season", defaults.season)?,
                team: or_default(&shared.team, &cfg, "team", defaults.team)?,
            };
            let out = or_default(&out, &cfg, "out", PathBuf::from("synthetic_stints.csv"))?;
            let truth_out = merged(&truth_out, &cfg, "truth_out")?;
            commands::cmd_synth(&config, seed, &out, truth_out.as_deref(), shared.dry_run)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(message) => {
            println!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
