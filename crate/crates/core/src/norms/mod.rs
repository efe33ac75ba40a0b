//! Behaviour mining and norm emergence.
//!
//! Each agent keeps a [`BehaviourBase`] of `IF <view> THEN <action>` rules
//! mined from its own turns. A rule held by at least a convergence fraction
//! of the society is admitted to the shared [`NormBase`].

mod generalise;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use generalise::{generalise, Rule, RuleTree};

use crate::config::SimConfig;
use crate::env::{Action, Observation};
use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    fn label(self) -> &'static str {
        match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "low" => Some(Level::Low),
            "medium" => Some(Level::Medium),
            "high" => Some(Level::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BerryLevel {
    None,
    Low,
    Medium,
    High,
}

impl BerryLevel {
    pub fn from_count(n: usize) -> Self {
        match n {
            0 => BerryLevel::None,
            1 => BerryLevel::Low,
            2..=4 => BerryLevel::Medium,
            _ => BerryLevel::High,
        }
    }

    fn label(self) -> &'static str {
        match self {
            BerryLevel::None => "no",
            BerryLevel::Low => "low",
            BerryLevel::Medium => "medium",
            BerryLevel::High => "high",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "no" => Some(BerryLevel::None),
            "low" => Some(BerryLevel::Low),
            "medium" => Some(BerryLevel::Medium),
            "high" => Some(BerryLevel::High),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionClass {
    Move,
    Eat,
    Throw,
}

impl From<Action> for ActionClass {
    fn from(a: Action) -> Self {
        match a {
            Action::Move(_) => ActionClass::Move,
            Action::Eat => ActionClass::Eat,
            Action::Throw(_) => ActionClass::Throw,
        }
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionClass::Move => "move",
            ActionClass::Eat => "eat",
            ActionClass::Throw => "throw",
        })
    }
}

impl FromStr for ActionClass {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        match s {
            "move" => Ok(ActionClass::Move),
            "eat" => Ok(ActionClass::Eat),
            "throw" => Ok(ActionClass::Throw),
            other => Err(SimError::Contract(format!("unknown action class `{other}`"))),
        }
    }
}

/// Discretised precondition of a behaviour.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct View {
    pub health: Level,
    pub berries: BerryLevel,
    /// Well-being levels of the other agents, worst-off first.
    pub neighbours: Vec<Level>,
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} health, {} berries", self.health.label(), self.berries.label())?;
        for n in &self.neighbours {
            write!(f, ", {} days", n.label())?;
        }
        Ok(())
    }
}

impl FromStr for View {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        let bad = || SimError::Contract(format!("malformed view `{s}`"));
        let mut parts = s.split(", ");
        let health = parts
            .next()
            .and_then(|p| p.strip_suffix(" health"))
            .and_then(Level::parse)
            .ok_or_else(bad)?;
        let berries = parts
            .next()
            .and_then(|p| p.strip_suffix(" berries"))
            .and_then(BerryLevel::parse)
            .ok_or_else(bad)?;
        let neighbours = parts
            .map(|p| p.strip_suffix(" days").and_then(Level::parse).ok_or_else(bad))
            .collect::<Result<_, _>>()?;
        Ok(View {
            health,
            berries,
            neighbours,
        })
    }
}

/// Cut points for bucketing an observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewThresholds {
    /// Health below this is low.
    pub health_low: f64,
    /// Health at or above this is high.
    pub health_high: f64,
    pub days_low: f64,
    pub days_high: f64,
}

impl ViewThresholds {
    pub fn from_config(cfg: &SimConfig) -> Self {
        let spawn = cfg.spawn_wellbeing();
        ViewThresholds {
            health_low: 0.3 * cfg.h_initial,
            health_high: 0.7 * cfg.h_initial,
            days_low: spawn / 3.0,
            days_high: 2.0 * spawn / 3.0,
        }
    }

    fn level(value: f64, low: f64, high: f64) -> Level {
        if value < low {
            Level::Low
        } else if value < high {
            Level::Medium
        } else {
            Level::High
        }
    }
}

pub fn make_view(obs: &Observation, th: &ViewThresholds) -> View {
    let mut neighbours: Vec<Level> = obs
        .wellbeing
        .iter()
        .enumerate()
        .filter(|&(id, _)| id != obs.agent_id)
        .map(|(_, &w)| ViewThresholds::level(w, th.days_low, th.days_high))
        .collect();
    neighbours.sort();
    View {
        health: ViewThresholds::level(obs.health, th.health_low, th.health_high),
        berries: BerryLevel::from_count(obs.bag),
        neighbours,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormsConfig {
    /// Per-step decay of behaviour fitness.
    pub fitness_decay: f64,
    pub behaviour_max_len: usize,
    pub t_clip_behaviours: usize,
    pub t_clip_norms: usize,
    /// Fraction of agents that must hold a behaviour for it to be a norm.
    pub convergence: f64,
}

impl Default for NormsConfig {
    fn default() -> Self {
        NormsConfig {
            fitness_decay: 0.99,
            behaviour_max_len: 50,
            t_clip_behaviours: 10,
            t_clip_norms: 5,
            convergence: 0.9,
        }
    }
}

impl NormsConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.fitness_decay > 0.0 && self.fitness_decay <= 1.0) {
            return Err(SimError::config("fitness_decay must lie in (0, 1]"));
        }
        if self.t_clip_behaviours == 0 || self.t_clip_norms == 0 {
            return Err(SimError::config("clip periods must be at least 1"));
        }
        if !(self.convergence > 0.0 && self.convergence <= 1.0) {
            return Err(SimError::config("norm_convergence must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Number of holders needed out of `k` agents, `ceil(convergence * k)`.
    pub fn quorum(&self, k: usize) -> usize {
        ((self.convergence * k as f64) - 1e-9).ceil().max(1.0) as usize
    }
}

pub type BehaviourKey = (View, ActionClass);

#[derive(Debug, Clone, PartialEq)]
pub struct Behaviour {
    pub num: u64,
    /// Sum of shaped rewards received when this behaviour fired.
    pub reward: f64,
    /// Steps since creation.
    pub age: u64,
}

/// `num * reward * decay^age`.
pub fn fitness(num: u64, reward: f64, decay: f64, age: u64) -> f64 {
    num as f64 * reward * decay.powf(age as f64)
}

impl Behaviour {
    pub fn fitness(&self, decay: f64) -> f64 {
        fitness(self.num, self.reward, decay, self.age)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BehaviourBase {
    entries: BTreeMap<BehaviourKey, Behaviour>,
}

impl BehaviourBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, view: &View, act: ActionClass) -> Option<&Behaviour> {
        self.entries.get(&(view.clone(), act))
    }

    pub fn contains(&self, key: &BehaviourKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BehaviourKey, &Behaviour)> {
        self.entries.iter()
    }

    pub fn record(&mut self, view: View, act: ActionClass, reward: f64) {
        self.entries
            .entry((view, act))
            .and_modify(|b| {
                b.num += 1;
                b.reward += reward;
            })
            .or_insert(Behaviour {
                num: 1,
                reward,
                age: 0,
            });
    }

    pub fn age_all(&mut self) {
        for b in self.entries.values_mut() {
            b.age += 1;
        }
    }

    /// On clip steps, drop the least fit behaviours (older first on ties)
    /// until at most `behaviour_max_len` remain. Returns the removed keys.
    pub fn clip(&mut self, step: usize, cfg: &NormsConfig) -> Vec<BehaviourKey> {
        if step % cfg.t_clip_behaviours != 0 || self.entries.len() <= cfg.behaviour_max_len {
            return Vec::new();
        }
        let mut ranked: Vec<(f64, u64, &BehaviourKey)> = self
            .entries
            .iter()
            .map(|(k, b)| (b.fitness(cfg.fitness_decay), b.age, k))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
        let excess = self.entries.len() - cfg.behaviour_max_len;
        let doomed: Vec<BehaviourKey> = ranked[..excess].iter().map(|(_, _, k)| (*k).clone()).collect();
        for k in &doomed {
            self.entries.remove(k);
        }
        doomed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Norm {
    /// Summed usage count across holders.
    pub num: u64,
    /// Summed fitness across holders.
    pub fitness: f64,
    pub holders: usize,
}

/// Society-wide set of emerged norms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormBase {
    norms: BTreeMap<BehaviourKey, Norm>,
}

impl NormBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn get(&self, key: &BehaviourKey) -> Option<&Norm> {
        self.norms.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BehaviourKey, &Norm)> {
        self.norms.iter()
    }

    /// Admit every behaviour held by a quorum of `bases`, refreshing the
    /// aggregates of existing norms. On norm-clip steps, norms that lost
    /// their quorum are dropped.
    pub fn update_emerged(&mut self, bases: &[&BehaviourBase], step: usize, cfg: &NormsConfig) {
        let quorum = cfg.quorum(bases.len());
        let mut tally: BTreeMap<&BehaviourKey, Norm> = BTreeMap::new();
        for base in bases {
            for (key, b) in base.iter() {
                let e = tally.entry(key).or_insert(Norm {
                    num: 0,
                    fitness: 0.0,
                    holders: 0,
                });
                e.num += b.num;
                e.fitness += b.fitness(cfg.fitness_decay);
                e.holders += 1;
            }
        }
        if step % cfg.t_clip_norms == 0 {
            self.norms
                .retain(|k, _| tally.get(k).is_some_and(|n| n.holders >= quorum));
        }
        for (key, norm) in tally {
            if norm.holders >= quorum {
                self.norms.insert(key.clone(), norm);
            }
        }
    }
}

/// Norms accumulated over many episodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormSummary {
    pub norms: BTreeMap<BehaviourKey, Norm>,
}

impl NormSummary {
    /// Add an episode's final norm base; `holders` counts episodes.
    pub fn absorb(&mut self, base: &NormBase) {
        for (k, n) in base.iter() {
            let e = self.norms.entry(k.clone()).or_insert(Norm {
                num: 0,
                fitness: 0.0,
                holders: 0,
            });
            e.num += n.num;
            e.fitness += n.fitness;
            e.holders += 1;
        }
    }

    pub fn merge(&mut self, other: &NormSummary) {
        for (k, n) in &other.norms {
            let e = self.norms.entry(k.clone()).or_insert(Norm {
                num: 0,
                fitness: 0.0,
                holders: 0,
            });
            e.num += n.num;
            e.fitness += n.fitness;
            e.holders += n.holders;
        }
    }

    /// Total numerosity of norms whose consequent is `act`.
    pub fn numerosity_of(&self, act: ActionClass) -> u64 {
        self.norms
            .iter()
            .filter(|((_, a), _)| *a == act)
            .map(|(_, n)| n.num)
            .sum()
    }

    /// `IF <view> THEN <act>\tnum\tfitness`, one line per norm.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        for ((view, act), n) in &self.norms {
            out.push_str(&format!("IF <{view}> THEN <{act}>\t{}\t{:?}\n", n.num, n.fitness));
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self, SimError> {
        let mut summary = NormSummary::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || SimError::Contract(format!("line {}: malformed norm `{line}`", lineno + 1));
            let mut cols = line.split('\t');
            let rule = cols.next().ok_or_else(bad)?;
            let num: u64 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let fit: f64 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let body = rule.strip_prefix("IF <").ok_or_else(bad)?;
            let (view, act) = body.split_once("> THEN <").ok_or_else(bad)?;
            let act = act.strip_suffix('>').ok_or_else(bad)?;
            let key = (view.parse::<View>()?, act.parse::<ActionClass>()?);
            summary.norms.insert(
                key,
                Norm {
                    num,
                    fitness: fit,
                    holders: 1,
                },
            );
        }
        Ok(summary)
    }
}
