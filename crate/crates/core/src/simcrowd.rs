//! Synthetic prediction rounds.
//!
//! A round is a geometric Brownian motion price path on weekdays plus a
//! crowd of agents who arrive one at a time. Each agent forms a noisy prior
//! around the last close it can see, looks at the revised beliefs of every
//! earlier agent and at the trailing price history, and revises with the
//! closed-form update of its assigned type.

use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc, Weekday};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefmodels::{degroot, gaussian_price, gaussian_social, ModelError, MonteCarloConfig};
use crate::dataset::{write_dataset, DatasetError, DatasetFormat, PredictionSet, PricePoint, Round};
use crate::seeds::{self, tag};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    ConfigInvalid(String),
    #[error("agent {agent}: {source}")]
    Model { agent: String, source: ModelError },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    SocialGaussian,
    PriceGaussian,
    DeGroot,
    RandomNoise,
}

/// Fractions of each agent type; must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentMix {
    pub social_gaussian: f64,
    pub price_gaussian: f64,
    pub degroot: f64,
    pub random_noise: f64,
}

impl Default for AgentMix {
    fn default() -> Self {
        AgentMix { social_gaussian: 0.5, price_gaussian: 0.5, degroot: 0.0, random_noise: 0.0 }
    }
}

impl AgentMix {
    fn entries(&self) -> [(AgentKind, f64); 4] {
        [
            (AgentKind::SocialGaussian, self.social_gaussian),
            (AgentKind::PriceGaussian, self.price_gaussian),
            (AgentKind::DeGroot, self.degroot),
            (AgentKind::RandomNoise, self.random_noise),
        ]
    }

    /// Agent counts by largest remainder, summing to `n`.
    pub fn counts(&self, n: usize) -> [(AgentKind, usize); 4] {
        let e = self.entries();
        let raw: Vec<f64> = e.iter().map(|(_, f)| f * n as f64).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
        let short = n.saturating_sub(counts.iter().sum());
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        [0, 1, 2, 3].map(|i| (e[i].0, counts[i]))
    }
}

/// Daily log-drift and volatility of the simulated asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbmParams {
    pub initial_price: f64,
    pub drift: f64,
    pub volatility: f64,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams { initial_price: 100.0, drift: 0.0, volatility: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Defaults to `sim`, or `round-<k>` when generating several rounds.
    pub round_id: Option<String>,
    pub asset_symbol: String,
    pub start_date: NaiveDate,
    pub n_agents: usize,
    pub agent_mix: AgentMix,
    pub gbm: GbmParams,
    /// Trading days from the round's start to its end, inclusive.
    pub round_days: u32,
    pub history_days: u32,
    pub prior_noise_std: f64,
    pub update_noise_std: f64,
    pub seed: u64,
    /// Settings price-learning agents use to build their evidence.
    pub mc: MonteCarloConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            round_id: None,
            asset_symbol: "SIM".into(),
            start_date: NaiveDate::from_ymd_opt(2016, 6, 1).expect("valid date"),
            n_agents: 100,
            agent_mix: AgentMix::default(),
            gbm: GbmParams::default(),
            round_days: 20,
            history_days: 126,
            prior_noise_std: 0.02,
            update_noise_std: 0.001,
            seed: 0,
            mc: MonteCarloConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ConfigInvalid(m));
        let mix: Vec<f64> = self.agent_mix.entries().iter().map(|e| e.1).collect();
        if mix.iter().any(|f| !(*f >= 0.0)) {
            return bad("agent_mix fractions must be non-negative".into());
        }
        if (mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("agent_mix sums to {}, expected 1", mix.iter().sum::<f64>()));
        }
        if !(self.gbm.initial_price > 0.0 && self.gbm.initial_price.is_finite()) {
            return bad("gbm.initial_price must be positive".into());
        }
        if !(self.gbm.volatility >= 0.0) || !self.gbm.drift.is_finite() {
            return bad("gbm.volatility must be non-negative and drift finite".into());
        }
        if !(self.prior_noise_std >= 0.0) || !(self.update_noise_std >= 0.0) {
            return bad("noise std parameters must be non-negative".into());
        }
        if self.n_agents == 0 {
            return bad("n_agents must be at least 1".into());
        }
        if self.history_days < 2 {
            return bad("history_days must be at least 2".into());
        }
        let days = round_calendar(self.start_date, self.round_days);
        let cutoff = Round::default_cutoff(*days.last().expect("non-empty"));
        if self.round_days == 0 || cutoff <= days[0] {
            return bad(format!(
                "round_days = {} leaves no trading day before the analysis cutoff",
                self.round_days
            ));
        }
        Ok(())
    }
}

fn is_weekday(d: NaiveDate) -> bool {
    !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

/// `n` consecutive weekdays starting at `first` (moved forward off a weekend).
pub fn weekdays_from(first: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = first;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        if is_weekday(d) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

fn weekdays_before(last_exclusive: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut d = last_exclusive;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        d -= Duration::days(1);
        if is_weekday(d) {
            out.push(d);
        }
    }
    out.reverse();
    out
}

fn round_calendar(start: NaiveDate, round_days: u32) -> Vec<NaiveDate> {
    weekdays_from(start, round_days.max(1) as usize)
}

/// Closes on `n_days` consecutive weekdays from `first_date`; the first close
/// is the initial price.
pub fn simulate_price_path(gbm: &GbmParams, first_date: NaiveDate, n_days: usize, seed: u64) -> Vec<PricePoint> {
    let mut rng = seeds::rng(seed);
    let step = gbm.drift - 0.5 * gbm.volatility * gbm.volatility;
    let mut s = gbm.initial_price;
    weekdays_from(first_date, n_days)
        .into_iter()
        .enumerate()
        .map(|(i, date)| {
            if i > 0 {
                let z: f64 = rng.sample(StandardNormal);
                s *= (step + gbm.volatility * z).exp();
            }
            PricePoint { date, close: s }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedRound {
    pub round: Round,
    /// Agent type behind each prediction set, in set order.
    pub agents: Vec<AgentKind>,
}

impl SimulatedRound {
    pub fn kind_of(&self, set_id: &str) -> Option<AgentKind> {
        self.round.prediction_sets.iter().position(|s| s.id == set_id).map(|i| self.agents[i])
    }
}

pub fn simulate_round(config: &SimConfig) -> Result<SimulatedRound, SimError> {
    config.validate()?;
    let round_id = config.round_id.clone().unwrap_or_else(|| "sim".into());
    let days = round_calendar(config.start_date, config.round_days);
    let start_date = days[0];
    let end_date = *days.last().expect("non-empty");
    let history_dates = weekdays_before(start_date, config.history_days as usize);
    let n_path = history_dates.len() + days.len();
    let path = simulate_price_path(&config.gbm, history_dates[0], n_path, seeds::derive(config.seed, &[tag::SIM_PATH]));

    let mut round = Round {
        round_id: round_id.clone(),
        asset_symbol: config.asset_symbol.clone(),
        start_date,
        end_date,
        ground_truth: path.last().expect("non-empty path").close,
        analysis_cutoff: Round::default_cutoff(end_date),
        futures: None,
        prediction_sets: Vec::with_capacity(config.n_agents),
    };

    let mut rng = seeds::rng(seeds::derive(config.seed, &[tag::SIM_AGENTS]));
    let mut kinds: Vec<AgentKind> = config
        .agent_mix
        .counts(config.n_agents)
        .iter()
        .flat_map(|&(k, c)| std::iter::repeat(k).take(c))
        .collect();
    kinds.shuffle(&mut rng);
    let open_days: Vec<NaiveDate> = days.iter().copied().filter(|d| *d <= round.analysis_cutoff).collect();
    let mut arrivals: Vec<NaiveDate> = (0..config.n_agents).map(|_| open_days[rng.gen_range(0..open_days.len())]).collect();
    arrivals.sort();

    for (i, (&kind, &day)) in kinds.iter().zip(&arrivals).enumerate() {
        let id = format!("{round_id}-{i:05}");
        let visible = path.partition_point(|p| p.date < day);
        let history = path[visible.saturating_sub(config.history_days as usize)..visible].to_vec();
        let last_close = history.last().expect("history precedes the round").close;
        let z_prior: f64 = rng.sample(StandardNormal);
        let z_update: f64 = rng.sample(StandardNormal);
        let z_guess: f64 = rng.sample(StandardNormal);
        let b_pre = last_close * (config.prior_noise_std * z_prior).exp();
        let timestamp = Utc.from_utc_datetime(&day.and_hms_opt(9, 0, 0).expect("valid time")) + Duration::seconds(i as i64);
        let mut set = PredictionSet {
            id: id.clone(),
            round_id: round_id.clone(),
            timestamp,
            b_pre,
            b_post: b_pre,
            social_histogram: round.prediction_sets.iter().map(|s| s.b_post).collect(),
            social_histogram_timestamps: Some(round.prediction_sets.iter().map(|s| s.timestamp).collect()),
            price_history: history,
        };
        let model = |r: Result<crate::beliefmodels::PosteriorEstimate, ModelError>| {
            r.map(|p| p.mean).map_err(|source| SimError::Model { agent: id.clone(), source })
        };
        let no_peers = set.social_histogram.is_empty();
        let target = match kind {
            AgentKind::SocialGaussian if no_peers => b_pre,
            AgentKind::DeGroot if no_peers => b_pre,
            AgentKind::SocialGaussian => model(gaussian_social(&set))?,
            AgentKind::DeGroot => model(degroot(&set))?,
            AgentKind::PriceGaussian => model(gaussian_price(&set, round.horizon_days(&set), &config.mc))?,
            AgentKind::RandomNoise => last_close * (config.prior_noise_std * z_guess).exp(),
        };
        set.b_post = target * (config.update_noise_std * z_update).exp();
        round.prediction_sets.push(set);
    }
    Ok(SimulatedRound { round, agents: kinds })
}

/// Simulates one round per config, in parallel, naming unnamed rounds
/// `round-<k>` by position.
pub fn simulate_rounds(configs: &[SimConfig]) -> Result<Vec<SimulatedRound>, SimError> {
    configs
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let mut c = c.clone();
            if c.round_id.is_none() {
                c.round_id = Some(format!("round-{}", k + 1));
            }
            simulate_round(&c)
        })
        .collect()
}

/// Simulates every config and writes the rounds as a JSONL dataset.
pub fn generate_dataset(configs: &[SimConfig], dir: &Path) -> Result<Vec<SimulatedRound>, SimError> {
    let sims = simulate_rounds(configs)?;
    let rounds: Vec<Round> = sims.iter().map(|s| s.round.clone()).collect();
    write_dataset(&rounds, dir, DatasetFormat::Jsonl)?;
    Ok(sims)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SimConfig {
        SimConfig { n_agents: 40, history_days: 30, seed: 3, ..Default::default() }
    }

    #[test]
    fn flat_and_drifting_paths() {
        let d = NaiveDate::from_ymd_opt(2016, 1, 4).unwrap();
        let flat = simulate_price_path(&GbmParams { initial_price: 50.0, drift: 0.0, volatility: 0.0 }, d, 10, 1);
        assert!(flat.iter().all(|p| p.close == 50.0));
        let up = simulate_price_path(&GbmParams { initial_price: 50.0, drift: 0.01, volatility: 0.0 }, d, 10, 1);
        for w in up.windows(2) {
            assert!((w[1].close / w[0].close - 0.01f64.exp()).abs() < 1e-12);
            assert!(w[0].date < w[1].date && is_weekday(w[1].date));
        }
    }

    #[test]
    fn mix_counts_sum() {
        let m = AgentMix { social_gaussian: 0.35, price_gaussian: 0.35, degroot: 0.2, random_noise: 0.1 };
        let c = m.counts(7);
        assert_eq!(c.iter().map(|e| e.1).sum::<usize>(), 7);
        assert_eq!(AgentMix::default().counts(500)[0].1, 250);
    }

    #[test]
    fn round_is_valid_and_causal() {
        let s = simulate_round(&cfg()).unwrap();
        let r = &s.round;
        assert!(r.violations().is_empty(), "{:?}", r.violations());
        assert!(r.prediction_sets.iter().all(|p| p.violations().is_empty()));
        assert_eq!(r.n_analysis_sets(), 40);
        for (i, p) in r.prediction_sets.iter().enumerate() {
            let earlier: Vec<f64> = r.prediction_sets[..i].iter().map(|q| q.b_post).collect();
            assert_eq!(p.social_histogram, earlier);
            assert!(p.price_history.len() <= 30 && p.price_history.last().unwrap().date < p.date());
        }
        assert!(r.end_date > r.analysis_cutoff);
        let c = cfg();
        let hist = weekdays_before(r.start_date, c.history_days as usize);
        let path = simulate_price_path(&c.gbm, hist[0], hist.len() + 20, seeds::derive(c.seed, &[tag::SIM_PATH]));
        assert_eq!(path.last().unwrap().date, r.end_date);
        assert_eq!(path.last().unwrap().close, r.ground_truth);
    }

    #[test]
    fn first_social_agent_keeps_prior() {
        let c = SimConfig {
            agent_mix: AgentMix { social_gaussian: 1.0, price_gaussian: 0.0, degroot: 0.0, random_noise: 0.0 },
            update_noise_std: 0.0,
            ..cfg()
        };
        let r = simulate_round(&c).unwrap().round;
        assert_eq!(r.prediction_sets[0].b_post, r.prediction_sets[0].b_pre);
        for p in &r.prediction_sets[1..] {
            assert_eq!(p.b_post, gaussian_social(p).unwrap().mean);
        }
    }

    #[test]
    fn price_agents_on_flat_path() {
        let c = SimConfig {
            agent_mix: AgentMix { social_gaussian: 0.0, price_gaussian: 1.0, degroot: 0.0, random_noise: 0.0 },
            gbm: GbmParams { initial_price: 80.0, drift: 0.0, volatility: 0.0 },
            prior_noise_std: 0.0,
            update_noise_std: 0.0,
            ..cfg()
        };
        let r = simulate_round(&c).unwrap().round;
        assert!(r.prediction_sets.iter().all(|p| p.b_post == 80.0));
    }

    #[test]
    fn deterministic() {
        assert_eq!(simulate_round(&cfg()).unwrap(), simulate_round(&cfg()).unwrap());
        assert_ne!(
            simulate_round(&cfg()).unwrap(),
            simulate_round(&SimConfig { seed: 4, ..cfg() }).unwrap()
        );
    }

    #[test]
    fn invalid_configs() {
        let mut c = cfg();
        c.agent_mix.degroot = 0.2;
        assert!(matches!(simulate_round(&c), Err(SimError::ConfigInvalid(_))));
        assert!(simulate_round(&SimConfig { round_days: 3, ..cfg() }).is_err());
        assert!(simulate_round(&SimConfig { prior_noise_std: -0.1, ..cfg() }).is_err());
        let bad_gbm = GbmParams { initial_price: 0.0, ..Default::default() };
        assert!(simulate_round(&SimConfig { gbm: bad_gbm, ..cfg() }).is_err());
    }
}
