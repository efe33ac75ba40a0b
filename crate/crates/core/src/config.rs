//! Simulation parameters and the flat key-value config file.
//!
//! Every tunable in the simulator is reachable from a single flat TOML file
//! whose keys mirror the struct field names below, e.g.
//!
//! ```toml
//! scenario = "allotment"
//! grid_width = 16
//! h_decay = -0.01
//! rawle_sanction_magnitude = 0.4
//! learning_rate = 0.0001
//! ```
//!
//! Reward keys are prefixed with the society column they belong to
//! (`baseline_` or `rawle_`).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Result, SimError};
use crate::ethics::EthicsConfig;
use crate::experiment::ExperimentConfig;
use crate::learner::{LearnerConfig, Optimizer};
use crate::norms::NormsConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Capabilities,
    Allotment,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Capabilities => "capabilities",
            Scenario::Allotment => "allotment",
        })
    }
}

impl FromStr for Scenario {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "capabilities" => Ok(Scenario::Capabilities),
            "allotment" => Ok(Scenario::Allotment),
            other => Err(SimError::config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Society {
    /// Plain DQN agents with cooperative environment rewards.
    Baseline,
    /// DQN agents that shape their reward with the maximin sanction.
    Rawle,
}

impl Society {
    pub const ALL: [Society; 2] = [Society::Baseline, Society::Rawle];

    /// Column label used in the paired CSV outputs.
    pub fn column(self) -> &'static str {
        match self {
            Society::Baseline => "baseline",
            Society::Rawle => "maximin",
        }
    }
}

impl fmt::Display for Society {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Society::Baseline => "baseline",
            Society::Rawle => "rawle",
        })
    }
}

impl FromStr for Society {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Society::Baseline),
            "rawle" | "maximin" => Ok(Society::Rawle),
            other => Err(SimError::config(format!("unknown society `{other}`"))),
        }
    }
}

/// Rewards for one society type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardColumn {
    pub survive_episode: f64,
    pub eat_berry: f64,
    pub forage_hit: f64,
    pub throw_berry: f64,
    pub try_eat_empty: f64,
    pub try_throw_empty: f64,
    pub try_throw_low_health: f64,
    pub try_throw_no_recipient: f64,
    pub die: f64,
    pub sanction_magnitude: f64,
}

impl RewardColumn {
    pub const BASELINE: RewardColumn = RewardColumn {
        survive_episode: 1.0,
        eat_berry: 1.0,
        forage_hit: 1.0,
        throw_berry: 0.5,
        try_eat_empty: -0.2,
        try_throw_empty: -0.2,
        try_throw_low_health: -0.2,
        try_throw_no_recipient: -0.2,
        die: -1.0,
        sanction_magnitude: 0.0,
    };

    pub const RAWLE: RewardColumn = RewardColumn {
        survive_episode: 1.0,
        eat_berry: 0.8,
        forage_hit: 0.8,
        throw_berry: 0.5,
        try_eat_empty: -0.1,
        try_throw_empty: -0.1,
        try_throw_low_health: -0.1,
        try_throw_no_recipient: -0.1,
        die: -1.0,
        sanction_magnitude: 0.4,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardTable {
    pub baseline: RewardColumn,
    pub rawle: RewardColumn,
}

impl RewardTable {
    pub fn column(&self, society: Society) -> &RewardColumn {
        match society {
            Society::Baseline => &self.baseline,
            Society::Rawle => &self.rawle,
        }
    }
}

impl Default for RewardTable {
    fn default() -> Self {
        RewardTable {
            baseline: RewardColumn::BASELINE,
            rawle: RewardColumn::RAWLE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub grid_width: usize,
    pub grid_height: usize,
    pub n_agents: usize,
    pub b_initial: usize,
    pub h_initial: f64,
    pub h_gain: f64,
    pub h_decay: f64,
    pub h_throw: f64,
    pub t_max: usize,
    pub seed: u64,
    pub reward_table: RewardTable,
    pub society: Society,
    /// Initial berries per allotment (allotment scenario only). Must have
    /// one entry per agent and sum to `b_initial`.
    pub allotment_profile: Vec<usize>,
}

impl SimConfig {
    pub fn capabilities() -> Self {
        SimConfig {
            scenario: Scenario::Capabilities,
            grid_width: 8,
            grid_height: 4,
            n_agents: 4,
            b_initial: 12,
            h_initial: 5.0,
            h_gain: 0.1,
            h_decay: -0.01,
            h_throw: 0.6,
            t_max: 50,
            seed: 0,
            reward_table: RewardTable::default(),
            society: Society::Baseline,
            allotment_profile: vec![6, 3, 2, 1],
        }
    }

    pub fn allotment() -> Self {
        SimConfig {
            scenario: Scenario::Allotment,
            grid_width: 16,
            ..Self::capabilities()
        }
    }

    pub fn for_scenario(scenario: Scenario) -> Self {
        match scenario {
            Scenario::Capabilities => Self::capabilities(),
            Scenario::Allotment => Self::allotment(),
        }
    }

    pub fn rewards(&self) -> &RewardColumn {
        self.reward_table.column(self.society)
    }

    /// Well-being of an agent at spawn, `h_initial / |h_decay|`.
    pub fn spawn_wellbeing(&self) -> f64 {
        self.h_initial / self.h_decay.abs()
    }

    /// Width of allotment `index`; the last allotment absorbs the remainder.
    pub fn allotment_columns(&self, index: usize) -> std::ops::Range<usize> {
        let width = self.grid_width / self.n_agents.max(1);
        let start = index * width;
        let end = if index + 1 == self.n_agents {
            self.grid_width
        } else {
            start + width
        };
        start..end
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.grid_width * self.grid_height;
        if self.n_agents == 0 {
            return Err(SimError::config("n_agents must be at least 1"));
        }
        if self.grid_width == 0 || self.grid_height == 0 {
            return Err(SimError::config("grid dimensions must be positive"));
        }
        if cells < self.b_initial + self.n_agents {
            return Err(SimError::config(format!(
                "{}x{} grid has {cells} cells, fewer than b_initial + n_agents = {}",
                self.grid_width,
                self.grid_height,
                self.b_initial + self.n_agents
            )));
        }
        if !(self.h_initial > 0.0) {
            return Err(SimError::config("h_initial must be > 0"));
        }
        if !(self.h_gain > 0.0) {
            return Err(SimError::config("h_gain must be > 0"));
        }
        if !(self.h_decay < 0.0) {
            return Err(SimError::config("h_decay must be < 0"));
        }
        if !(self.h_throw > 0.0) {
            return Err(SimError::config("h_throw must be > 0"));
        }
        if self.t_max == 0 {
            return Err(SimError::config("t_max must be at least 1"));
        }
        if self.scenario == Scenario::Allotment {
            if self.grid_width < self.n_agents {
                return Err(SimError::config(
                    "allotment scenario needs grid_width >= n_agents",
                ));
            }
            if self.allotment_profile.len() != self.n_agents {
                return Err(SimError::config(format!(
                    "allotment_profile has {} entries, expected one per agent ({})",
                    self.allotment_profile.len(),
                    self.n_agents
                )));
            }
            let total: usize = self.allotment_profile.iter().sum();
            if total != self.b_initial {
                return Err(SimError::config(format!(
                    "allotment_profile sums to {total}, expected b_initial = {}",
                    self.b_initial
                )));
            }
            for (i, &count) in self.allotment_profile.iter().enumerate() {
                let plot = self.allotment_columns(i).len() * self.grid_height;
                if plot < count + 1 {
                    return Err(SimError::config(format!(
                        "allotment {i} has {plot} cells, too few for {count} berries and its agent"
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        Self::capabilities()
    }
}

/// Flat view of every configurable key. Absent keys keep their current
/// value when applied.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    // simulation
    pub scenario: Option<Scenario>,
    pub grid_width: Option<usize>,
    pub grid_height: Option<usize>,
    pub n_agents: Option<usize>,
    pub b_initial: Option<usize>,
    pub h_initial: Option<f64>,
    pub h_gain: Option<f64>,
    pub h_decay: Option<f64>,
    pub h_throw: Option<f64>,
    pub t_max: Option<usize>,
    pub seed: Option<u64>,
    pub society: Option<String>,
    pub allotment_profile: Option<Vec<usize>>,

    // rewards
    pub baseline_survive_episode: Option<f64>,
    pub baseline_eat_berry: Option<f64>,
    pub baseline_forage_hit: Option<f64>,
    pub baseline_throw_berry: Option<f64>,
    pub baseline_try_eat_empty: Option<f64>,
    pub baseline_try_throw_empty: Option<f64>,
    pub baseline_try_throw_low_health: Option<f64>,
    pub baseline_try_throw_no_recipient: Option<f64>,
    pub baseline_die: Option<f64>,
    pub baseline_sanction_magnitude: Option<f64>,
    pub rawle_survive_episode: Option<f64>,
    pub rawle_eat_berry: Option<f64>,
    pub rawle_forage_hit: Option<f64>,
    pub rawle_throw_berry: Option<f64>,
    pub rawle_try_eat_empty: Option<f64>,
    pub rawle_try_throw_empty: Option<f64>,
    pub rawle_try_throw_low_health: Option<f64>,
    pub rawle_try_throw_no_recipient: Option<f64>,
    pub rawle_die: Option<f64>,
    pub rawle_sanction_magnitude: Option<f64>,

    // learner
    pub batch_size: Option<usize>,
    pub target_sync_period: Option<usize>,
    pub epsilon_start: Option<f64>,
    pub epsilon_end: Option<f64>,
    pub learning_rate: Option<f64>,
    pub discount: Option<f64>,
    pub replay_capacity: Option<usize>,
    pub hidden_units: Option<usize>,
    pub hidden_layers: Option<usize>,
    pub huber_delta: Option<f64>,
    pub optimizer: Option<Optimizer>,

    // norms
    pub fitness_decay: Option<f64>,
    pub behaviour_max_len: Option<usize>,
    pub t_clip_behaviours: Option<usize>,
    pub t_clip_norms: Option<usize>,
    pub norm_convergence: Option<f64>,

    // ethics
    pub penalise_worsened: Option<bool>,
    pub penalise_unused_improvement: Option<bool>,
    pub sanction_at_eval: Option<bool>,

    // experiment
    pub train_episodes: Option<usize>,
    pub eval_episodes: Option<usize>,
    pub replicates: Option<usize>,
}

macro_rules! set {
    ($($src:expr => $dst:expr),* $(,)?) => {
        $(if let Some(v) = $src { $dst = v; })*
    };
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::parse(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Overlay the keys present in this file onto `cfg`. A `scenario` key
    /// first resets the grid defaults for that scenario.
    pub fn apply(self, cfg: &mut ExperimentConfig) -> Result<()> {
        if let Some(scenario) = self.scenario {
            let fresh = SimConfig::for_scenario(scenario);
            cfg.sim.scenario = scenario;
            cfg.sim.grid_width = fresh.grid_width;
            cfg.sim.grid_height = fresh.grid_height;
        }
        if let Some(s) = &self.society {
            cfg.societies = parse_societies(s)?;
            cfg.sim.society = cfg.societies[0];
        }
        let sim = &mut cfg.sim;
        set! {
            self.grid_width => sim.grid_width,
            self.grid_height => sim.grid_height,
            self.n_agents => sim.n_agents,
            self.b_initial => sim.b_initial,
            self.h_initial => sim.h_initial,
            self.h_gain => sim.h_gain,
            self.h_decay => sim.h_decay,
            self.h_throw => sim.h_throw,
            self.t_max => sim.t_max,
            self.seed => sim.seed,
            self.allotment_profile => sim.allotment_profile,
        }
        let b = &mut sim.reward_table.baseline;
        set! {
            self.baseline_survive_episode => b.survive_episode,
            self.baseline_eat_berry => b.eat_berry,
            self.baseline_forage_hit => b.forage_hit,
            self.baseline_throw_berry => b.throw_berry,
            self.baseline_try_eat_empty => b.try_eat_empty,
            self.baseline_try_throw_empty => b.try_throw_empty,
            self.baseline_try_throw_low_health => b.try_throw_low_health,
            self.baseline_try_throw_no_recipient => b.try_throw_no_recipient,
            self.baseline_die => b.die,
            self.baseline_sanction_magnitude => b.sanction_magnitude,
        }
        let r = &mut sim.reward_table.rawle;
        set! {
            self.rawle_survive_episode => r.survive_episode,
            self.rawle_eat_berry => r.eat_berry,
            self.rawle_forage_hit => r.forage_hit,
            self.rawle_throw_berry => r.throw_berry,
            self.rawle_try_eat_empty => r.try_eat_empty,
            self.rawle_try_throw_empty => r.try_throw_empty,
            self.rawle_try_throw_low_health => r.try_throw_low_health,
            self.rawle_try_throw_no_recipient => r.try_throw_no_recipient,
            self.rawle_die => r.die,
            self.rawle_sanction_magnitude => r.sanction_magnitude,
        }
        let l: &mut LearnerConfig = &mut cfg.learner;
        set! {
            self.batch_size => l.batch_size,
            self.target_sync_period => l.target_sync_period,
            self.epsilon_start => l.epsilon_start,
            self.epsilon_end => l.epsilon_end,
            self.learning_rate => l.learning_rate,
            self.discount => l.discount,
            self.replay_capacity => l.replay_capacity,
            self.hidden_units => l.hidden_units,
            self.hidden_layers => l.hidden_layers,
            self.huber_delta => l.huber_delta,
            self.optimizer => l.optimizer,
        }
        let n: &mut NormsConfig = &mut cfg.norms;
        set! {
            self.fitness_decay => n.fitness_decay,
            self.behaviour_max_len => n.behaviour_max_len,
            self.t_clip_behaviours => n.t_clip_behaviours,
            self.t_clip_norms => n.t_clip_norms,
            self.norm_convergence => n.convergence,
        }
        let e: &mut EthicsConfig = &mut cfg.ethics;
        set! {
            self.penalise_worsened => e.penalise_worsened,
            self.penalise_unused_improvement => e.penalise_unused_improvement,
            self.sanction_at_eval => e.sanction_at_eval,
        }
        set! {
            self.train_episodes => cfg.train_episodes,
            self.eval_episodes => cfg.eval_episodes,
            self.replicates => cfg.replicates,
        }
        Ok(())
    }
}

/// `baseline`, `rawle` or `both`.
pub fn parse_societies(s: &str) -> Result<Vec<Society>> {
    if s == "both" {
        Ok(Society::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_parameter_tables() {
        let c = SimConfig::capabilities();
        assert_eq!((c.grid_width, c.grid_height), (8, 4));
        assert_eq!((c.n_agents, c.b_initial), (4, 12));
        assert_eq!(c.h_initial, 5.0);
        assert_eq!(c.h_gain, 0.1);
        assert_eq!(c.h_decay, -0.01);
        assert_eq!(c.h_throw, 0.6);
        assert_eq!(c.t_max, 50);
        let a = SimConfig::allotment();
        assert_eq!((a.grid_width, a.grid_height), (16, 4));
        c.validate().unwrap();
        a.validate().unwrap();
    }

    #[test]
    fn reward_columns() {
        let t = RewardTable::default();
        let b = t.baseline;
        assert_eq!(
            [
                b.survive_episode,
                b.eat_berry,
                b.forage_hit,
                b.throw_berry,
                b.try_eat_empty,
                b.try_throw_empty,
                b.try_throw_low_health,
                b.try_throw_no_recipient,
                b.die,
                b.sanction_magnitude
            ],
            [1.0, 1.0, 1.0, 0.5, -0.2, -0.2, -0.2, -0.2, -1.0, 0.0]
        );
        let r = t.rawle;
        assert_eq!(
            [
                r.survive_episode,
                r.eat_berry,
                r.forage_hit,
                r.throw_berry,
                r.try_eat_empty,
                r.try_throw_empty,
                r.try_throw_low_health,
                r.try_throw_no_recipient,
                r.die,
                r.sanction_magnitude
            ],
            [1.0, 0.8, 0.8, 0.5, -0.1, -0.1, -0.1, -0.1, -1.0, 0.4]
        );
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = SimConfig::capabilities();
        c.n_agents = 0;
        assert!(c.validate().is_err());

        let mut c = SimConfig::capabilities();
        c.grid_width = 2;
        c.grid_height = 2;
        assert!(c.validate().is_err());

        let mut c = SimConfig::capabilities();
        c.h_decay = 0.01;
        assert!(c.validate().is_err());

        let mut c = SimConfig::allotment();
        c.allotment_profile = vec![6, 3, 2];
        assert!(c.validate().is_err());

        let mut c = SimConfig::allotment();
        c.allotment_profile = vec![6, 3, 2, 2];
        assert!(c.validate().is_err());
    }

    #[test]
    fn allotment_columns_partition_the_grid() {
        let c = SimConfig::allotment();
        let cols: Vec<_> = (0..4).map(|i| c.allotment_columns(i)).collect();
        assert_eq!(cols, vec![0..4, 4..8, 8..12, 12..16]);
    }

    #[test]
    fn config_file_overlays_keys() {
        let text = r#"
scenario = "allotment"
h_decay = -0.1
rawle_sanction_magnitude = 0.5
learning_rate = 0.001
optimizer = "adam"
behaviour_max_len = 20
train_episodes = 7
society = "both"
"#;
        let file = ConfigFile::parse(text, Path::new("test.toml")).unwrap();
        let mut cfg = ExperimentConfig::default();
        file.apply(&mut cfg).unwrap();
        assert_eq!(cfg.sim.scenario, Scenario::Allotment);
        assert_eq!(cfg.sim.grid_width, 16);
        assert_eq!(cfg.sim.h_decay, -0.1);
        assert_eq!(cfg.sim.reward_table.rawle.sanction_magnitude, 0.5);
        assert_eq!(cfg.learner.learning_rate, 0.001);
        assert_eq!(cfg.learner.optimizer, Optimizer::Adam);
        assert_eq!(cfg.norms.behaviour_max_len, 20);
        assert_eq!(cfg.train_episodes, 7);
        assert_eq!(cfg.societies, Society::ALL.to_vec());
    }

    #[test]
    fn config_file_rejects_unknown_keys() {
        let err = ConfigFile::parse("grid_widht = 3", Path::new("x.toml")).unwrap_err();
        assert!(err.to_string().contains("x.toml"));
    }
}
