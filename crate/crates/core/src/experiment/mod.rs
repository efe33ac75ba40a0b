//! Training and evaluation of whole societies, per-episode metrics and the
//! CSV artifacts written to a result directory.
//!
//! A run is one (seed, society) pair: agents train for `train_episodes`
//! with a linearly decaying ε, then act greedily without learning for
//! `eval_episodes`. Only evaluation episodes are measured. Both societies
//! use the same seeds, so they see the same initial grids and networks.
//!
//! Files written by [`ExperimentResult::write`]:
//!
//! - `episodes_<col>.csv`: one [`MetricsRecord`] per evaluation episode
//! - `gini_days_left_to_live.csv`, `gini_berries_consumed.csv`,
//!   `total_days_left_to_live.csv`, `total_berries_consumed.csv`: per-episode
//!   means, one column per society
//! - `min_days_left_to_live.csv`: `day` plus the mean minimum well-being at
//!   that step over the episodes still running
//! - `processed_episode_df_<col>.csv`: the same per-day means for every metric
//! - `stats.csv`: the [`StatsReport`], when both societies ran
//! - `norms_<col>.txt` and `norm_tree_<col>.txt`: emerged norms and their
//!   generalised rule tree
//!
//! `<col>` is `baseline` or `maximin`.

pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, StepContext};
use crate::config::{SimConfig, Society};
use crate::env::{init_episode, GridState, SimRng};
use crate::error::{Result, SimError};
use crate::ethics::EthicsConfig;
use crate::learner::LearnerConfig;
use crate::norms::{generalise, BehaviourBase, NormBase, NormSummary, NormsConfig, ViewThresholds};

pub use stats::{
    cohens_d, cohens_d_from_summary, gini, magnitude_label, mann_whitney_u, min_value, robustness,
    social_welfare, MannWhitney, MetricComparison, StatsReport,
};

/// Metric columns of a [`MetricsRecord`], in file order.
pub const METRICS: [&str; 7] = [
    "gini_wellbeing",
    "min_wellbeing",
    "welfare_wellbeing",
    "gini_resource",
    "min_resource",
    "welfare_resource",
    "episode_length",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub learner: LearnerConfig,
    pub norms: NormsConfig,
    pub ethics: EthicsConfig,
    pub societies: Vec<Society>,
    pub train_episodes: usize,
    pub eval_episodes: usize,
    /// Independent seeds `sim.seed, sim.seed + 1, ...`.
    pub replicates: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sim: SimConfig::capabilities(),
            learner: LearnerConfig::default(),
            norms: NormsConfig::default(),
            ethics: EthicsConfig::default(),
            societies: Society::ALL.to_vec(),
            train_episodes: 500,
            eval_episodes: 2000,
            replicates: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.learner.validate()?;
        self.norms.validate()?;
        if self.societies.is_empty() {
            return Err(SimError::config("at least one society is required"));
        }
        if self.eval_episodes == 0 {
            return Err(SimError::config("eval_episodes must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(SimError::config("replicates must be at least 1"));
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.replicates as u64).map(|i| self.sim.seed.wrapping_add(i))
    }
}

/// Values of one variable across the alive agents after a step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Snapshot {
    pub gini: f64,
    pub min: f64,
    pub welfare: f64,
}

impl Snapshot {
    pub fn of(values: &[f64]) -> Result<Self> {
        Ok(Snapshot {
            gini: gini(values)?,
            min: min_value(values),
            welfare: social_welfare(values),
        })
    }
}

/// Measurements after one step: well-being (days left to live) and
/// resource (berries consumed so far) over alive agents.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepMetrics {
    pub wellbeing: Snapshot,
    pub resource: Snapshot,
}

impl StepMetrics {
    pub fn measure(state: &GridState, sim: &SimConfig) -> Result<Self> {
        let alive = state.agents.iter().filter(|a| a.alive);
        let wb: Vec<f64> = alive.clone().map(|a| crate::env::wellbeing(a, sim)).collect();
        let res: Vec<f64> = alive.map(|a| a.berries_eaten as f64).collect();
        Ok(StepMetrics {
            wellbeing: Snapshot::of(&wb)?,
            resource: Snapshot::of(&res)?,
        })
    }
}

/// Per-episode means of the per-step measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub seed: u64,
    pub episode: usize,
    pub gini_wellbeing: f64,
    pub min_wellbeing: f64,
    pub welfare_wellbeing: f64,
    pub gini_resource: f64,
    pub min_resource: f64,
    pub welfare_resource: f64,
    pub episode_length: usize,
}

impl MetricsRecord {
    pub fn from_steps(seed: u64, episode: usize, steps: &[StepMetrics]) -> Self {
        let n = steps.len().max(1) as f64;
        let mean = |f: fn(&StepMetrics) -> f64| steps.iter().map(f).sum::<f64>() / n;
        MetricsRecord {
            seed,
            episode,
            gini_wellbeing: mean(|s| s.wellbeing.gini),
            min_wellbeing: mean(|s| s.wellbeing.min),
            welfare_wellbeing: mean(|s| s.wellbeing.welfare),
            gini_resource: mean(|s| s.resource.gini),
            min_resource: mean(|s| s.resource.min),
            welfare_resource: mean(|s| s.resource.welfare),
            episode_length: steps.len(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        Some(match name {
            "gini_wellbeing" => self.gini_wellbeing,
            "min_wellbeing" => self.min_wellbeing,
            "welfare_wellbeing" => self.welfare_wellbeing,
            "gini_resource" => self.gini_resource,
            "min_resource" => self.min_resource,
            "welfare_resource" => self.welfare_resource,
            "episode_length" => self.episode_length as f64,
            _ => return None,
        })
    }
}

/// One episode of a society.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub steps: Vec<StepMetrics>,
    /// Norm base at the end of the episode.
    pub norms: NormBase,
}

/// A society of learning agents in its gridworld, advanced one step or one
/// episode at a time. Networks and replay memories persist across
/// episodes; behaviour and norm bases are reset at each episode start.
#[derive(Debug, Clone)]
pub struct SocietyRun {
    pub sim: SimConfig,
    pub agents: Vec<Agent>,
    pub state: GridState,
    pub norms: NormBase,
    env_rng: SimRng,
    thresholds: ViewThresholds,
}

impl SocietyRun {
    /// Agents are initialised and the first episode is laid out.
    pub fn new(cfg: &ExperimentConfig, society: Society, seed: u64) -> Result<Self> {
        let mut sim = cfg.sim.clone();
        sim.society = society;
        sim.seed = seed;
        sim.validate()?;
        let mut env_rng = SimRng::seed_from_u64(seed);
        let agents = (0..sim.n_agents)
            .map(|id| Agent::new(id, &sim, &cfg.learner, seed))
            .collect();
        let state = init_episode(&sim, &mut env_rng)?;
        Ok(SocietyRun {
            thresholds: ViewThresholds::from_config(&sim),
            sim,
            agents,
            state,
            norms: NormBase::new(),
            env_rng,
        })
    }

    /// Lay out a fresh grid and clear behaviour and norm bases.
    pub fn reset_episode(&mut self) -> Result<()> {
        self.state = init_episode(&self.sim, &mut self.env_rng)?;
        for a in &mut self.agents {
            a.reset_behaviours();
        }
        self.norms = NormBase::new();
        Ok(())
    }

    pub fn is_done(&self) -> bool {
        self.state.is_done(&self.sim)
    }

    /// Every alive agent takes one turn in random order; the norm base is
    /// refreshed after each turn. `None` once the episode is over.
    pub fn step(&mut self, cfg: &ExperimentConfig, epsilon: f64, train: bool) -> Result<Option<StepMetrics>> {
        if self.is_done() {
            return Ok(None);
        }
        let ctx = StepContext {
            sim: &self.sim,
            learner: &cfg.learner,
            ethics: &cfg.ethics,
            thresholds: &self.thresholds,
            epsilon,
            train,
        };
        let clock = self.state.step + 1;
        for id in self.state.turn_order(&mut self.env_rng) {
            if !self.state.agents[id].alive {
                continue;
            }
            self.agents[id].agent_step(&mut self.state, &mut self.env_rng, &ctx)?;
            let bases: Vec<&BehaviourBase> = self.agents.iter().map(|a| &a.behaviours).collect();
            self.norms.update_emerged(&bases, clock, &cfg.norms);
        }
        for a in &mut self.agents {
            a.behaviours.age_all();
            a.behaviours.clip(clock, &cfg.norms);
        }
        self.state.end_step();
        StepMetrics::measure(&self.state, &self.sim).map(Some)
    }

    /// Play one full episode. A grid that has not been stepped yet is used
    /// as is; otherwise a fresh one is laid out.
    pub fn run_episode(&mut self, cfg: &ExperimentConfig, epsilon: f64, train: bool) -> Result<EpisodeTrace> {
        if self.state.step > 0 {
            self.reset_episode()?;
        }
        let mut steps = Vec::with_capacity(self.sim.t_max);
        while let Some(m) = self.step(cfg, epsilon, train)? {
            steps.push(m);
        }
        Ok(EpisodeTrace {
            steps,
            norms: self.norms.clone(),
        })
    }
}

/// Sums of per-step measurements over episodes, indexed by day (step).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DaySeries {
    /// Episodes still running at each day.
    pub running: Vec<usize>,
    pub sums: Vec<StepMetrics>,
}

impl DaySeries {
    fn add(&mut self, steps: &[StepMetrics]) {
        if self.sums.len() < steps.len() {
            self.sums.resize(steps.len(), StepMetrics::default());
            self.running.resize(steps.len(), 0);
        }
        for (i, s) in steps.iter().enumerate() {
            self.running[i] += 1;
            let t = &mut self.sums[i];
            t.wellbeing.gini += s.wellbeing.gini;
            t.wellbeing.min += s.wellbeing.min;
            t.wellbeing.welfare += s.wellbeing.welfare;
            t.resource.gini += s.resource.gini;
            t.resource.min += s.resource.min;
            t.resource.welfare += s.resource.welfare;
        }
    }

    fn merge(&mut self, other: &DaySeries) {
        if self.sums.len() < other.sums.len() {
            self.sums.resize(other.sums.len(), StepMetrics::default());
            self.running.resize(other.sums.len(), 0);
        }
        for (i, s) in other.sums.iter().enumerate() {
            self.running[i] += other.running[i];
            let t = &mut self.sums[i];
            t.wellbeing.gini += s.wellbeing.gini;
            t.wellbeing.min += s.wellbeing.min;
            t.wellbeing.welfare += s.wellbeing.welfare;
            t.resource.gini += s.resource.gini;
            t.resource.min += s.resource.min;
            t.resource.welfare += s.resource.welfare;
        }
    }

    /// Mean over the episodes still running on each day.
    pub fn means(&self) -> Vec<StepMetrics> {
        self.sums
            .iter()
            .zip(&self.running)
            .map(|(s, &n)| {
                let n = n.max(1) as f64;
                let d = |x: Snapshot| Snapshot {
                    gini: x.gini / n,
                    min: x.min / n,
                    welfare: x.welfare / n,
                };
                StepMetrics {
                    wellbeing: d(s.wellbeing),
                    resource: d(s.resource),
                }
            })
            .collect()
    }
}

/// Evaluation output of one (seed, society) run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub society: Society,
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub days: DaySeries,
    pub norms: NormSummary,
}

pub fn run_single(cfg: &ExperimentConfig, society: Society, seed: u64) -> Result<RunResult> {
    let mut run = SocietyRun::new(cfg, society, seed)?;
    for ep in 0..cfg.train_episodes {
        let eps = cfg.learner.epsilon_for(ep, cfg.train_episodes);
        run.run_episode(cfg, eps, true)?;
    }
    let mut result = RunResult {
        society,
        seed,
        records: Vec::with_capacity(cfg.eval_episodes),
        days: DaySeries::default(),
        norms: NormSummary::default(),
    };
    for ep in 0..cfg.eval_episodes {
        let trace = run.run_episode(cfg, 0.0, false)?;
        result.records.push(MetricsRecord::from_steps(seed, ep, &trace.steps));
        result.days.add(&trace.steps);
        result.norms.absorb(&trace.norms);
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Ordered by seed, then by society as listed in the config.
    pub runs: Vec<RunResult>,
}

/// Train and evaluate every (seed, society) pair. Runs execute in parallel
/// and are gathered in a fixed order, so results do not depend on
/// scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let jobs: Vec<(u64, Society)> = cfg
        .seeds()
        .flat_map(|seed| cfg.societies.iter().map(move |&s| (seed, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(seed, society)| run_single(cfg, society, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        runs,
    })
}

impl ExperimentResult {
    pub fn societies(&self) -> &[Society] {
        &self.config.societies
    }

    /// Evaluation records of `society`, pooled over seeds.
    pub fn records(&self, society: Society) -> Vec<MetricsRecord> {
        self.runs
            .iter()
            .filter(|r| r.society == society)
            .flat_map(|r| r.records.iter().cloned())
            .collect()
    }

    pub fn days(&self, society: Society) -> DaySeries {
        let mut days = DaySeries::default();
        for r in self.runs.iter().filter(|r| r.society == society) {
            days.merge(&r.days);
        }
        days
    }

    pub fn norms(&self, society: Society) -> NormSummary {
        let mut all = NormSummary::default();
        for r in self.runs.iter().filter(|r| r.society == society) {
            all.merge(&r.norms);
        }
        all
    }

    /// `None` unless both societies ran.
    pub fn stats(&self) -> Result<Option<StatsReport>> {
        let has = |s| self.config.societies.contains(&s);
        if !has(Society::Baseline) || !has(Society::Rawle) {
            return Ok(None);
        }
        compare(&self.records(Society::Baseline), &self.records(Society::Rawle)).map(Some)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
        let societies = self.societies();
        let mut per_episode: Vec<(Society, Vec<MetricsRecord>)> = Vec::new();
        for &s in societies {
            let records = self.records(s);
            write_records(&dir.join(format!("episodes_{}.csv", s.column())), &records)?;
            let days = self.days(s).means();
            write_days(&dir.join(format!("processed_episode_df_{}.csv", s.column())), &days, &self.days(s).running)?;
            let norms = self.norms(s);
            write_text(&dir.join(format!("norms_{}.txt", s.column())), &norms.to_dump())?;
            let tree = generalise(norms.norms.keys());
            write_text(&dir.join(format!("norm_tree_{}.txt", s.column())), &tree.render())?;
            per_episode.push((s, records));
        }

        let column_file = |name: &str, pick: fn(&MetricsRecord) -> f64| -> Result<()> {
            let header: Vec<&str> = per_episode.iter().map(|(s, _)| s.column()).collect();
            let rows = per_episode.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
            let path = dir.join(name);
            let mut w = csv::Writer::from_path(&path).map_err(|e| SimError::csv(&path, e))?;
            w.write_record(&header).map_err(|e| SimError::csv(&path, e))?;
            for i in 0..rows {
                let row: Vec<String> = per_episode
                    .iter()
                    .map(|(_, r)| r.get(i).map_or(String::new(), |m| pick(m).to_string()))
                    .collect();
                w.write_record(&row).map_err(|e| SimError::csv(&path, e))?;
            }
            w.flush().map_err(|e| SimError::io(&path, e))
        };
        column_file("gini_days_left_to_live.csv", |m| m.gini_wellbeing)?;
        column_file("gini_berries_consumed.csv", |m| m.gini_resource)?;
        column_file("total_days_left_to_live.csv", |m| m.welfare_wellbeing)?;
        column_file("total_berries_consumed.csv", |m| m.welfare_resource)?;

        let series: Vec<Vec<StepMetrics>> = societies.iter().map(|&s| self.days(s).means()).collect();
        let path = dir.join("min_days_left_to_live.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| SimError::csv(&path, e))?;
        let mut header = vec!["day"];
        header.extend(societies.iter().map(|s| s.column()));
        w.write_record(&header).map_err(|e| SimError::csv(&path, e))?;
        let days = series.iter().map(Vec::len).max().unwrap_or(0);
        for day in 0..days {
            let mut row = vec![(day + 1).to_string()];
            row.extend(
                series
                    .iter()
                    .map(|s| s.get(day).map_or(String::new(), |m| m.wellbeing.min.to_string())),
            );
            w.write_record(&row).map_err(|e| SimError::csv(&path, e))?;
        }
        w.flush().map_err(|e| SimError::io(&path, e))?;

        if let Some(report) = self.stats()? {
            write_stats(&dir.join("stats.csv"), &report)?;
        }
        Ok(())
    }
}

/// Compare pooled evaluation episodes of the two societies on every metric.
pub fn compare(baseline: &[MetricsRecord], maximin: &[MetricsRecord]) -> Result<StatsReport> {
    let mut rows = Vec::with_capacity(METRICS.len());
    for name in METRICS {
        let pick = |r: &[MetricsRecord]| -> Vec<f64> {
            r.iter().map(|m| m.metric(name).expect("known metric")).collect()
        };
        rows.push(MetricComparison::compute(name, &pick(baseline), &pick(maximin))?);
    }
    Ok(StatsReport { rows })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SimError::io(path, e))
}

fn write_records(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::csv(path, e))?;
    if records.is_empty() {
        w.write_record(["seed", "episode"].iter().chain(METRICS.iter()))
            .map_err(|e| SimError::csv(path, e))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| SimError::csv(path, e))?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

fn write_days(path: &Path, days: &[StepMetrics], running: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::csv(path, e))?;
    let mut header = vec!["day", "running_episodes"];
    header.extend(&METRICS[..6]);
    w.write_record(&header).map_err(|e| SimError::csv(path, e))?;
    for (i, (d, n)) in days.iter().zip(running).enumerate() {
        let row = [
            (i + 1).to_string(),
            n.to_string(),
            d.wellbeing.gini.to_string(),
            d.wellbeing.min.to_string(),
            d.wellbeing.welfare.to_string(),
            d.resource.gini.to_string(),
            d.resource.min.to_string(),
            d.resource.welfare.to_string(),
        ];
        w.write_record(&row).map_err(|e| SimError::csv(path, e))?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

fn write_stats(path: &Path, report: &StatsReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::csv(path, e))?;
    w.write_record([
        "metric",
        "baseline_mean",
        "baseline_sd",
        "maximin_mean",
        "maximin_sd",
        "u",
        "p",
        "d",
        "effect",
    ])
    .map_err(|e| SimError::csv(path, e))?;
    for r in &report.rows {
        w.write_record([
            r.metric.clone(),
            r.baseline_mean.to_string(),
            r.baseline_sd.to_string(),
            r.maximin_mean.to_string(),
            r.maximin_sd.to_string(),
            r.u.to_string(),
            r.p.to_string(),
            r.d.map_or(String::new(), |d| d.to_string()),
            r.label().to_string(),
        ])
        .map_err(|e| SimError::csv(path, e))?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

/// Evaluation records previously written for `society`, if present.
pub fn read_records(dir: &Path, society: Society) -> Result<Option<Vec<MetricsRecord>>> {
    let path = dir.join(format!("episodes_{}.csv", society.column()));
    if !path.exists() {
        return Ok(None);
    }
    let mut r = csv::Reader::from_path(&path).map_err(|e| SimError::csv(&path, e))?;
    let records = r
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRecord>, _>>()
        .map_err(|e| SimError::csv(&path, e))?;
    Ok(Some(records))
}

/// Recompute the statistics from a result directory.
pub fn load_stats(dir: &Path) -> Result<StatsReport> {
    let missing = |s: Society| {
        SimError::contract(format!(
            "{} has no episodes_{}.csv; stats need both societies",
            dir.display(),
            s.column()
        ))
    };
    let b = read_records(dir, Society::Baseline)?.ok_or_else(|| missing(Society::Baseline))?;
    let m = read_records(dir, Society::Rawle)?.ok_or_else(|| missing(Society::Rawle))?;
    if b.is_empty() || m.is_empty() {
        return Err(SimError::contract("stats need at least one episode per society"));
    }
    compare(&b, &m)
}

/// Norm dumps found in a result directory.
pub fn load_norms(dir: &Path) -> Result<Vec<(Society, NormSummary)>> {
    let mut out = Vec::new();
    for s in Society::ALL {
        let path: PathBuf = dir.join(format!("norms_{}.txt", s.column()));
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| SimError::io(&path, e))?;
        let summary =
            NormSummary::from_dump(&text).map_err(|e| SimError::parse(&path, e.to_string()))?;
        out.push((s, summary));
    }
    if out.is_empty() {
        return Err(SimError::contract(format!("{} holds no norm dumps", dir.display())));
    }
    Ok(out)
}
