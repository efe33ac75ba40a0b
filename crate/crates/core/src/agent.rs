//! One learning agent and its per-turn update: act, shape the reward with
//! the maximin sanction, learn from replay, and mine the behaviour.

use rand::SeedableRng;

use crate::config::{SimConfig, Society};
use crate::env::{act_and_forage, settle_turn, Action, AgentId, GridState, Observation, SimRng, StepOutcome, ACTION_COUNT};
use crate::error::Result;
use crate::ethics::{could_improve_min, sanction, EthicsConfig, Sanction};
use crate::learner::{
    select_action, sync_target, train_batch, LearnerConfig, OptimizerState, QNetwork, ReplayBuffer,
};
use crate::norms::{make_view, ActionClass, BehaviourBase, View, ViewThresholds};

pub use crate::learner::Transition;

/// Settings shared by every agent for one turn.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub sim: &'a SimConfig,
    pub learner: &'a LearnerConfig,
    pub ethics: &'a EthicsConfig,
    pub thresholds: &'a ViewThresholds,
    pub epsilon: f64,
    /// Store transitions and update the network.
    pub train: bool,
}

impl StepContext<'_> {
    /// Whether sanctions are added to the environment reward this turn.
    pub fn shaping(&self) -> bool {
        self.sim.society == Society::Rawle && (self.train || self.ethics.sanction_at_eval)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentStepReport {
    pub agent: AgentId,
    pub action: Action,
    pub outcome: StepOutcome,
    /// Environment reward.
    pub reward: f64,
    pub sanction: Sanction,
    /// `reward + sanction value`.
    pub shaped_reward: f64,
    pub wellbeing_before: Vec<f64>,
    pub wellbeing_after: Vec<f64>,
    pub improvable: bool,
    pub view: View,
    pub loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Agent {
    pub id: AgentId,
    pub online: QNetwork,
    pub target: QNetwork,
    pub replay: ReplayBuffer,
    pub behaviours: BehaviourBase,
    optimizer: OptimizerState,
    rng: SimRng,
    /// Training turns taken so far, drives target synchronisation.
    steps: u64,
}

impl Agent {
    pub fn new(id: AgentId, sim: &SimConfig, learner: &LearnerConfig, seed: u64) -> Self {
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(1 + id as u64);
        let dims = learner.network_dims(Observation::feature_len(sim.n_agents), ACTION_COUNT);
        let online = QNetwork::new(&dims, &mut rng);
        Agent {
            id,
            target: online.clone(),
            online,
            replay: ReplayBuffer::new(learner.replay_capacity),
            behaviours: BehaviourBase::new(),
            optimizer: OptimizerState::new(learner.optimizer),
            rng,
            steps: 0,
        }
    }

    pub fn training_steps(&self) -> u64 {
        self.steps
    }

    /// Fresh behaviour base for a new episode; network and replay persist.
    pub fn reset_behaviours(&mut self) {
        self.behaviours = BehaviourBase::new();
    }

    pub fn agent_step(&mut self, state: &mut GridState, env_rng: &mut SimRng, ctx: &StepContext) -> Result<AgentStepReport> {
        let sim = ctx.sim;
        let obs = state.observe(self.id, sim)?;
        let features = obs.features(sim);
        let wellbeing_before = obs.wellbeing.clone();
        let improvable = could_improve_min(state, self.id, sim);

        let index = select_action(&self.online, &features, ctx.epsilon, &mut self.rng)?;
        let action = state.resolve_action(self.id, index, sim);
        // the sanction judges the action, so U_{t+1} is taken before the
        // passive health decay closes the turn
        let mut outcome = act_and_forage(state, self.id, action, sim, env_rng)?;
        let wellbeing_after = state.wellbeing_vector(sim);
        settle_turn(state, self.id, sim, &mut outcome);
        let verdict = if ctx.shaping() {
            sanction(&wellbeing_before, &wellbeing_after, improvable, ctx.ethics)
        } else {
            Sanction::Neutral
        };
        let reward = outcome.reward;
        let shaped_reward = reward + verdict.value(sim.rewards().sanction_magnitude);

        let mut loss = None;
        if ctx.train {
            let next = state.observe(self.id, sim)?.features(sim);
            self.replay.push(Transition {
                state: features,
                action: index,
                reward: shaped_reward,
                next_state: next,
                done: outcome.done,
            });
            self.steps += 1;
            if self.replay.len() >= ctx.learner.batch_size {
                let batch = self.replay.sample(ctx.learner.batch_size, &mut self.rng);
                loss = Some(train_batch(
                    &mut self.online,
                    &self.target,
                    &batch,
                    ctx.learner,
                    &mut self.optimizer,
                )?);
            }
            sync_target(&self.online, &mut self.target, self.steps, ctx.learner.target_sync_period);
        }

        let view = make_view(&obs, ctx.thresholds);
        self.behaviours
            .record(view.clone(), ActionClass::from(action), shaped_reward);

        Ok(AgentStepReport {
            agent: self.id,
            action,
            outcome,
            reward,
            sanction: verdict,
            shaped_reward,
            wellbeing_before,
            wellbeing_after,
            improvable,
            view,
            loss,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AgentState, BerryKind, Cell, Trait};

    fn state_with(health: &[f64], bags: &[usize], cfg: &SimConfig) -> GridState {
        GridState {
            width: cfg.grid_width,
            height: cfg.grid_height,
            berries: vec![None; cfg.grid_width * cfg.grid_height],
            agents: health
                .iter()
                .zip(bags)
                .enumerate()
                .map(|(id, (&h, &b))| AgentState {
                    id,
                    position: Some(Cell::new(id, 0)),
                    health: h,
                    bag: vec![BerryKind::Tree; b],
                    alive: true,
                    trait_: Trait::Tall,
                    berries_eaten: 0,
                })
                .collect(),
            step: 0,
        }
    }

    /// Agent whose greedy choice is always `index`.
    fn scripted(id: AgentId, sim: &SimConfig, learner: &LearnerConfig, index: usize) -> Agent {
        let mut a = Agent::new(id, sim, learner, 1);
        for l in &mut a.online.layers {
            l.weights.fill(0.0);
            l.bias.fill(0.0);
        }
        a.online.layers.last_mut().unwrap().bias[index] = 1.0;
        a
    }

    fn run(society: Society, index: usize, health: &[f64], bags: &[usize]) -> AgentStepReport {
        let mut sim = SimConfig::capabilities();
        sim.society = society;
        let learner = LearnerConfig::default();
        let ethics = EthicsConfig::default();
        let th = ViewThresholds::from_config(&sim);
        let ctx = StepContext {
            sim: &sim,
            learner: &learner,
            ethics: &ethics,
            thresholds: &th,
            epsilon: 0.0,
            train: true,
        };
        let mut state = state_with(health, bags, &sim);
        let mut agent = scripted(0, &sim, &learner, index);
        let mut env_rng = SimRng::seed_from_u64(0);
        agent.agent_step(&mut state, &mut env_rng, &ctx).unwrap()
    }

    #[test]
    fn baseline_is_unshaped() {
        let r = run(Society::Baseline, 5, &[4.0, 2.0, 4.0, 4.0], &[1, 0, 0, 0]);
        assert_eq!(r.sanction, Sanction::Neutral);
        assert_eq!(r.shaped_reward, r.reward);
        assert_eq!(r.reward, 0.5);
    }

    #[test]
    fn throw_to_minimum_is_rewarded() {
        let r = run(Society::Rawle, 5, &[4.0, 2.0, 4.0, 4.0], &[1, 0, 0, 0]);
        assert_eq!(r.outcome.threw_to, Some(1));
        assert_eq!(r.sanction, Sanction::Positive);
        assert!((r.shaped_reward - 0.9).abs() < 1e-12);
    }

    #[test]
    fn eating_instead_of_helping_is_penalised() {
        let r = run(Society::Rawle, 4, &[4.0, 2.0, 4.0, 4.0], &[1, 0, 0, 0]);
        assert!(r.outcome.ate);
        assert!(r.improvable);
        assert_eq!(r.sanction, Sanction::Negative);
        assert!((r.shaped_reward - 0.4).abs() < 1e-12);
    }

    #[test]
    fn stores_one_transition_and_records_one_behaviour() {
        let r = run(Society::Rawle, 0, &[4.0, 2.0, 4.0, 4.0], &[0, 0, 0, 0]);
        assert_eq!(r.action.index(), 0);
        assert_eq!(r.view.neighbours.len(), 3);
    }
}
