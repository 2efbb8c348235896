//! Synthetic seasons with planted ground truth.
//!
//! Each player carries a points-per-second effect and selected pairs carry
//! an additional synergy. A stint's expected PM is seconds times the sum of
//! member effects plus the synergies of member pairs, with Gaussian noise.
//! `substitution_bias` tilts lineup selection toward high-synergy pairs,
//! which confounds playing time with quality the way real rotations do.

use std::collections::BTreeMap;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use thiserror::Error;

use crate::model::{GeneralizedLineup, PlayerId, StintRecord};

#[derive(Error, Debug)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub roster_size: usize,
    /// Players on court per stint.
    pub k: usize,
    pub games: usize,
    pub stints_per_game: usize,
    pub seconds_per_stint: f64,
    /// SD of the per-second individual effects.
    pub effect_scale: f64,
    /// SD of planted pair synergies (per second).
    pub synergy_scale: f64,
    /// Fraction of pairs that receive a nonzero synergy.
    pub synergy_density: f64,
    /// Per-second SD of the PM noise.
    pub noise_sd: f64,
    /// 0 = uniform lineups; 1 = always seeded from a high-synergy pair.
    pub substitution_bias: f64,
    pub season: String,
    pub team: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            roster_size: 10,
            k: 5,
            games: 200,
            stints_per_game: 8,
            seconds_per_stint: 360.0,
            effect_scale: 0.01,
            synergy_scale: 0.01,
            synergy_density: 0.2,
            noise_sd: 0.005,
            substitution_bias: 0.0,
            season: "2024".to_string(),
            team: "SYN".to_string(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSeason {
    pub config: SynthConfig,
    pub seed: u64,
    pub stints: Vec<StintRecord>,
    /// Per-second effect per player.
    pub true_individual: BTreeMap<PlayerId, f64>,
    /// Per-second synergy for planted pairs (absent pairs have zero).
    pub true_pair_synergy: BTreeMap<GeneralizedLineup, f64>,
}

impl SyntheticSeason {
    /// Per-second expected PM rate of a lineup: member effects plus the
    /// synergies of every member pair.
    pub fn true_lineup_rate(&self, lineup: &GeneralizedLineup) -> f64 {
        let members = lineup.members();
        let mut rate: f64 = members
            .iter()
            .map(|p| self.true_individual.get(p).copied().unwrap_or(0.0))
            .sum();
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let pair = GeneralizedLineup::canonicalize(vec![
                    members[i].clone(),
                    members[j].clone(),
                ])
                .expect("nonempty pair");
                rate += self.true_pair_synergy.get(&pair).copied().unwrap_or(0.0);
            }
        }
        rate
    }

    /// Ground-truth map over all roster pairs: combined rate e_i + e_j + s_ij.
    pub fn true_pair_rates(&self) -> BTreeMap<GeneralizedLineup, f64> {
        let players: Vec<&PlayerId> = self.true_individual.keys().collect();
        let mut out = BTreeMap::new();
        for i in 0..players.len() {
            for j in (i + 1)..players.len() {
                let pair = GeneralizedLineup::canonicalize(vec![
                    players[i].clone(),
                    players[j].clone(),
                ])
                .expect("nonempty pair");
                let rate = self.true_lineup_rate(&pair);
                out.insert(pair, rate);
            }
        }
        out
    }
}

fn synth_date(game: usize) -> String {
    let year = 2024 + game / 336;
    let month = (game % 336) / 28 + 1;
    let day = game % 28 + 1;
    format!("{year:04}-{month:02}-{day:02}")
}

pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SyntheticSeason, SynthError> {
    if config.k == 0 {
        return Err(SynthError::InvalidConfig("k must be positive".into()));
    }
    if config.roster_size < config.k {
        return Err(SynthError::InvalidConfig(format!(
            "roster {} smaller than lineup size {}",
            config.roster_size, config.k
        )));
    }
    if !(0.0..=1.0).contains(&config.substitution_bias) {
        return Err(SynthError::InvalidConfig(format!(
            "substitution_bias {} outside [0, 1]",
            config.substitution_bias
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roster: Vec<PlayerId> = (0..config.roster_size)
        .map(|i| PlayerId::new(format!("P{:02}", i + 1)))
        .collect();
    let opp_lineup = GeneralizedLineup::canonicalize(
        (0..config.k)
            .map(|i| PlayerId::new(format!("Q{:02}", i + 1)))
            .collect(),
    )
    .expect("nonempty opponent lineup");

    let effect_dist = Normal::new(0.0, config.effect_scale.max(1e-300)).unwrap();
    let mut true_individual = BTreeMap::new();
    for p in &roster {
        let e = if config.effect_scale > 0.0 {
            effect_dist.sample(&mut rng)
        } else {
            0.0
        };
        true_individual.insert(p.clone(), e);
    }

    let synergy_dist = Normal::new(0.0, config.synergy_scale.max(1e-300)).unwrap();
    let mut true_pair_synergy = BTreeMap::new();
    let mut planted_pairs: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..roster.len() {
        for j in (i + 1)..roster.len() {
            if config.synergy_scale > 0.0 && rng.gen::<f64>() < config.synergy_density {
                let s = synergy_dist.sample(&mut rng);
                let pair = GeneralizedLineup::canonicalize(vec![
                    roster[i].clone(),
                    roster[j].clone(),
                ])
                .expect("nonempty pair");
                true_pair_synergy.insert(pair, s);
                planted_pairs.push((i, j, s));
            }
        }
    }

    // seeding weights for biased selection favor the strongest synergies
    let seed_weights: Option<WeightedIndex<f64>> = if planted_pairs.is_empty() {
        None
    } else {
        let scale = config.synergy_scale.max(1e-12);
        WeightedIndex::new(planted_pairs.iter().map(|&(_, _, s)| (s / scale).exp())).ok()
    };

    // a small persistent rotation book built around the strongest planted
    // pairs: biased substitution reuses these cores game after game, the way
    // a coach leans on set rotations
    let rotation_book: Vec<Vec<usize>> = if planted_pairs.is_empty() {
        Vec::new()
    } else {
        let mut by_strength = planted_pairs.clone();
        by_strength.sort_by(|a, b| b.2.total_cmp(&a.2));
        let n_book = config.roster_size.div_ceil(config.k.max(1)) + 1;
        let core: Vec<usize> = by_strength
            .iter()
            .take(n_book)
            .flat_map(|&(i, j, _)| [i, j])
            .collect();
        (0..n_book)
            .map(|b| {
                let (i, j, _) = by_strength[b % by_strength.len()];
                let mut lineup = vec![i];
                if config.k > 1 {
                    lineup.push(j);
                }
                let mut rest: Vec<usize> = (0..roster.len())
                    .filter(|x| !lineup.contains(x))
                    .collect();
                rest.shuffle(&mut rng);
                rest.sort_by_key(|x| usize::from(!core.contains(x)));
                lineup.extend(rest.into_iter().take(config.k - lineup.len()));
                lineup
            })
            .collect()
    };

    let season = SyntheticSeason {
        config: config.clone(),
        seed,
        stints: Vec::new(),
        true_individual,
        true_pair_synergy,
    };

    let mut stints = Vec::with_capacity(config.games * config.stints_per_game);
    for game in 0..config.games {
        let game_id = format!("G{:04}", game + 1);
        let date = synth_date(game);
        for _ in 0..config.stints_per_game {
            let mut chosen: Vec<usize> = Vec::with_capacity(config.k);
            if !rotation_book.is_empty() && rng.gen::<f64>() < config.substitution_bias {
                // reuse a set rotation built around the favored pairs
                chosen = rotation_book[rng.gen_range(0..rotation_book.len())].clone();
            } else if let Some(weights) = &seed_weights {
                // otherwise an unscripted stint may still seed one hot pair
                if rng.gen::<f64>() < config.substitution_bias {
                    let (i, j, _) = planted_pairs[weights.sample(&mut rng)];
                    chosen.push(i);
                    if config.k > 1 {
                        chosen.push(j);
                    }
                }
            }
            let mut rest: Vec<usize> =
                (0..roster.len()).filter(|i| !chosen.contains(i)).collect();
            rest.shuffle(&mut rng);
            chosen.extend(rest.into_iter().take(config.k - chosen.len()));
            let lineup = GeneralizedLineup::canonicalize(
                chosen.iter().map(|&i| roster[i].clone()).collect(),
            )
            .expect("nonempty lineup");

            let seconds = config.seconds_per_stint;
            let mean_pm = seconds * season.true_lineup_rate(&lineup);
            let pm = if config.noise_sd > 0.0 {
                let noise = Normal::new(0.0, config.noise_sd * seconds).unwrap();
                (mean_pm + noise.sample(&mut rng)).round() as i64
            } else {
                mean_pm.round() as i64
            };
            stints.push(StintRecord {
                season: config.season.clone(),
                game_id: game_id.clone(),
                date: date.clone(),
                team: config.team.clone(),
                opponent: "OPP".to_string(),
                is_home: true,
                lineup,
                opp_lineup: opp_lineup.clone(),
                seconds,
                points_for: pm.max(0),
                points_against: (-pm).max(0),
            });
        }
    }

    Ok(SyntheticSeason { stints, ..season })
}
