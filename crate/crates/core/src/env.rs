//! Harvest gridworld: capabilities and allotment variants.
//!
//! The grid is `grid_width` columns by `grid_height` rows, with `(0, 0)` in
//! the north-west corner. Each cell holds at most one berry. Agents do not
//! block each other; several may stand on the same cell.

use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Scenario, SimConfig};
use crate::error::{Result, SimError};

pub type AgentId = usize;

/// Seeded generator used for every stochastic decision in a run.
pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BerryKind {
    /// Visible to short agents.
    Ground,
    /// Visible to tall agents.
    Tree,
    /// Grows in the given allotment.
    Allotment(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trait {
    Tall,
    Short,
    Allotment(usize),
}

impl Trait {
    pub fn can_harvest(self, kind: BerryKind) -> bool {
        matches!(
            (self, kind),
            (Trait::Tall, BerryKind::Tree) | (Trait::Short, BerryKind::Ground)
        ) || matches!((self, kind), (Trait::Allotment(a), BerryKind::Allotment(b)) if a == b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    /// `None` once the agent has died and been removed from the grid.
    pub position: Option<Cell>,
    pub health: f64,
    /// Carried berries; the most recently acquired berry is last.
    pub bag: Vec<BerryKind>,
    pub alive: bool,
    pub trait_: Trait,
    pub berries_eaten: usize,
}

impl AgentState {
    pub fn bag_len(&self) -> usize {
        self.bag.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Move(Direction),
    Eat,
    /// Throw one berry to `target`; `None` when nobody can receive it.
    Throw(Option<AgentId>),
}

/// Number of discrete actions a policy chooses between. The throw action's
/// recipient is resolved by the environment, see [`GridState::throw_target`].
pub const ACTION_COUNT: usize = 6;

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Move(Direction::North) => 0,
            Action::Move(Direction::East) => 1,
            Action::Move(Direction::South) => 2,
            Action::Move(Direction::West) => 3,
            Action::Eat => 4,
            Action::Throw(_) => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub agent_id: AgentId,
    pub health: f64,
    pub bag: usize,
    /// Manhattan distance to the nearest berry this agent can harvest, or
    /// `grid_width + grid_height` when there is none.
    pub berry_distance: usize,
    /// Well-being of every agent in id order; dead agents report 0.
    pub wellbeing: Vec<f64>,
}

impl Observation {
    pub fn feature_len(n_agents: usize) -> usize {
        3 + n_agents
    }

    /// Network input: each entry scaled to roughly unit range.
    pub fn features(&self, cfg: &SimConfig) -> Vec<f64> {
        let mut out = Vec::with_capacity(Self::feature_len(self.wellbeing.len()));
        out.push(self.health / cfg.h_initial);
        out.push(self.bag as f64 / cfg.b_initial.max(1) as f64);
        out.push(self.berry_distance as f64 / (cfg.grid_width + cfg.grid_height) as f64);
        let scale = cfg.spawn_wellbeing();
        out.extend(self.wellbeing.iter().map(|w| w / scale));
        out
    }
}

/// What happened during one agent's turn.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub foraged: bool,
    pub ate: bool,
    pub threw_to: Option<AgentId>,
    pub died: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub width: usize,
    pub height: usize,
    /// Row-major berry occupancy, `y * width + x`.
    pub berries: Vec<Option<BerryKind>>,
    pub agents: Vec<AgentState>,
    pub step: usize,
}

/// Days an agent can survive on its current health and bag.
pub fn wellbeing(agent: &AgentState, cfg: &SimConfig) -> f64 {
    if !agent.alive {
        return 0.0;
    }
    (agent.health + agent.bag.len() as f64 * cfg.h_gain) / cfg.h_decay.abs()
}

pub fn init_episode(cfg: &SimConfig, rng: &mut SimRng) -> Result<GridState> {
    cfg.validate()?;
    let (w, h) = (cfg.grid_width, cfg.grid_height);
    let mut state = GridState {
        width: w,
        height: h,
        berries: vec![None; w * h],
        agents: Vec::with_capacity(cfg.n_agents),
        step: 0,
    };
    let spawn_agent = |id, cell, trait_| AgentState {
        id,
        position: Some(cell),
        health: cfg.h_initial,
        bag: Vec::new(),
        alive: true,
        trait_,
        berries_eaten: 0,
    };

    match cfg.scenario {
        Scenario::Capabilities => {
            let picked = (0..w * h).choose_multiple(rng, cfg.n_agents + cfg.b_initial);
            let mut picked: Vec<usize> = picked;
            // choose_multiple does not promise a random order
            picked.shuffle(rng);
            let tall = cfg.n_agents.div_ceil(2);
            for (id, &idx) in picked[..cfg.n_agents].iter().enumerate() {
                let t = if id < tall { Trait::Tall } else { Trait::Short };
                state.agents.push(spawn_agent(id, state.cell_of(idx), t));
            }
            for &idx in &picked[cfg.n_agents..] {
                let kind = if rng.gen_bool(0.5) {
                    BerryKind::Ground
                } else {
                    BerryKind::Tree
                };
                state.berries[idx] = Some(kind);
            }
        }
        Scenario::Allotment => {
            for id in 0..cfg.n_agents {
                let plot: Vec<usize> = state.plot_cells(cfg, id).collect();
                let mut picked = plot
                    .iter()
                    .copied()
                    .choose_multiple(rng, cfg.allotment_profile[id] + 1);
                picked.shuffle(rng);
                state
                    .agents
                    .push(spawn_agent(id, state.cell_of(picked[0]), Trait::Allotment(id)));
                for &idx in &picked[1..] {
                    state.berries[idx] = Some(BerryKind::Allotment(id));
                }
            }
        }
    }
    Ok(state)
}

impl GridState {
    fn cell_of(&self, idx: usize) -> Cell {
        Cell::new(idx % self.width, idx / self.width)
    }

    fn index_of(&self, cell: Cell) -> usize {
        cell.y * self.width + cell.x
    }

    fn plot_cells<'a>(&'a self, cfg: &SimConfig, plot: usize) -> impl Iterator<Item = usize> + 'a {
        let cols = cfg.allotment_columns(plot);
        let w = self.width;
        (0..self.height).flat_map(move |y| cols.clone().map(move |x| y * w + x))
    }

    pub fn berry_at(&self, cell: Cell) -> Option<BerryKind> {
        self.berries[self.index_of(cell)]
    }

    pub fn berries_on_grid(&self) -> usize {
        self.berries.iter().filter(|b| b.is_some()).count()
    }

    /// Berries on the grid plus berries in every bag, dead agents included.
    pub fn total_berries(&self) -> usize {
        self.berries_on_grid() + self.agents.iter().map(|a| a.bag.len()).sum::<usize>()
    }

    pub fn alive_ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.agents.iter().filter(|a| a.alive).map(|a| a.id)
    }

    pub fn alive_count(&self) -> usize {
        self.agents.iter().filter(|a| a.alive).count()
    }

    pub fn agent(&self, id: AgentId) -> Result<&AgentState> {
        self.agents
            .get(id)
            .ok_or_else(|| SimError::contract(format!("unknown agent id {id}")))
    }

    pub fn wellbeing_vector(&self, cfg: &SimConfig) -> Vec<f64> {
        self.agents.iter().map(|a| wellbeing(a, cfg)).collect()
    }

    pub fn is_done(&self, cfg: &SimConfig) -> bool {
        self.step >= cfg.t_max || self.alive_count() == 0
    }

    /// Recipient of a throw by `giver`: the alive agent other than the giver
    /// with the lowest well-being, lowest id on ties.
    pub fn throw_target(&self, giver: AgentId, cfg: &SimConfig) -> Option<AgentId> {
        self.agents
            .iter()
            .filter(|a| a.alive && a.id != giver)
            .map(|a| (wellbeing(a, cfg), a.id))
            .min_by(|l, r| l.0.total_cmp(&r.0).then(l.1.cmp(&r.1)))
            .map(|(_, id)| id)
    }

    /// Map a policy's action index onto a concrete action for `agent`.
    pub fn resolve_action(&self, agent: AgentId, index: usize, cfg: &SimConfig) -> Action {
        match index {
            0 => Action::Move(Direction::North),
            1 => Action::Move(Direction::East),
            2 => Action::Move(Direction::South),
            3 => Action::Move(Direction::West),
            4 => Action::Eat,
            _ => Action::Throw(self.throw_target(agent, cfg)),
        }
    }

    pub fn observe(&self, id: AgentId, cfg: &SimConfig) -> Result<Observation> {
        let agent = self.agent(id)?;
        let sentinel = self.width + self.height;
        let berry_distance = match agent.position {
            Some(pos) => self
                .berries
                .iter()
                .enumerate()
                .filter_map(|(i, b)| {
                    b.filter(|k| agent.trait_.can_harvest(*k))
                        .map(|_| pos.manhattan(self.cell_of(i)))
                })
                .min()
                .unwrap_or(sentinel),
            None => sentinel,
        };
        Ok(Observation {
            agent_id: id,
            health: agent.health,
            bag: agent.bag.len(),
            berry_distance,
            wellbeing: self.wellbeing_vector(cfg),
        })
    }

    /// A fresh random order over the agents alive now.
    pub fn turn_order<R: Rng>(&self, rng: &mut R) -> Vec<AgentId> {
        let mut ids: Vec<AgentId> = self.alive_ids().collect();
        ids.shuffle(rng);
        ids
    }

    pub fn end_step(&mut self) {
        self.step += 1;
    }

    fn regrow<R: Rng>(&mut self, cfg: &SimConfig, eaten: BerryKind, rng: &mut R) {
        let occupied: Vec<usize> = self
            .agents
            .iter()
            .filter_map(|a| a.position)
            .map(|c| self.index_of(c))
            .collect();
        let candidates: Vec<usize> = match (cfg.scenario, eaten) {
            (Scenario::Allotment, BerryKind::Allotment(plot)) => self.plot_cells(cfg, plot).collect(),
            _ => (0..self.berries.len()).collect(),
        };
        let free: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&i| self.berries[i].is_none() && !occupied.contains(&i))
            .collect();
        let pool = if free.is_empty() {
            candidates
                .into_iter()
                .filter(|&i| self.berries[i].is_none())
                .collect()
        } else {
            free
        };
        let Some(&idx) = pool.choose(rng) else {
            return;
        };
        let kind = match eaten {
            BerryKind::Allotment(plot) => BerryKind::Allotment(plot),
            BerryKind::Ground | BerryKind::Tree => {
                if rng.gen_bool(0.5) {
                    BerryKind::Ground
                } else {
                    BerryKind::Tree
                }
            }
        };
        self.berries[idx] = Some(kind);
    }
}

/// Apply one agent's turn: act, forage, decay, and settle episode-end
/// rewards. Invalid eats and throws are penalised and change nothing.
pub fn step_agent<R: Rng>(
    state: &mut GridState,
    id: AgentId,
    action: Action,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    let mut out = act_and_forage(state, id, action, cfg, rng)?;
    settle_turn(state, id, cfg, &mut out);
    Ok(out)
}

/// First half of [`step_agent`]: the action itself and foraging at the
/// resulting cell, without the health decay.
pub fn act_and_forage<R: Rng>(
    state: &mut GridState,
    id: AgentId,
    action: Action,
    cfg: &SimConfig,
    rng: &mut R,
) -> Result<StepOutcome> {
    let agent = state.agent(id)?;
    if !agent.alive {
        return Err(SimError::contract(format!("agent {id} is dead")));
    }
    let rewards = *cfg.rewards();
    let mut out = StepOutcome::default();

    match action {
        Action::Move(dir) => {
            let pos = agent.position.expect("alive agents have a position");
            let next = match dir {
                Direction::North => Cell::new(pos.x, pos.y.saturating_sub(1)),
                Direction::South => Cell::new(pos.x, (pos.y + 1).min(state.height - 1)),
                Direction::West => Cell::new(pos.x.saturating_sub(1), pos.y),
                Direction::East => Cell::new((pos.x + 1).min(state.width - 1), pos.y),
            };
            state.agents[id].position = Some(next);
        }
        Action::Eat => {
            if let Some(kind) = state.agents[id].bag.pop() {
                let a = &mut state.agents[id];
                a.health += cfg.h_gain;
                a.berries_eaten += 1;
                out.reward += rewards.eat_berry;
                out.ate = true;
                state.regrow(cfg, kind, rng);
            } else {
                out.reward += rewards.try_eat_empty;
            }
        }
        Action::Throw(target) => {
            let giver = &state.agents[id];
            let recipient = target.filter(|&t| t != id && state.agents.get(t).is_some_and(|a| a.alive));
            if giver.bag.is_empty() {
                out.reward += rewards.try_throw_empty;
            } else if giver.health < cfg.h_throw {
                out.reward += rewards.try_throw_low_health;
            } else if let Some(t) = recipient {
                let berry = state.agents[id].bag.pop().expect("bag checked non-empty");
                state.agents[t].bag.push(berry);
                out.reward += rewards.throw_berry;
                out.threw_to = Some(t);
            } else {
                out.reward += rewards.try_throw_no_recipient;
            }
        }
    }

    // forage at the (possibly new) cell
    let pos = state.agents[id].position.expect("alive agents have a position");
    let idx = state.index_of(pos);
    if let Some(kind) = state.berries[idx] {
        if state.agents[id].trait_.can_harvest(kind) {
            state.berries[idx] = None;
            state.agents[id].bag.push(kind);
            out.reward += rewards.forage_hit;
            out.foraged = true;
        }
    }
    Ok(out)
}

/// Second half of [`step_agent`]: health decay, death and the episode-end
/// reward.
pub fn settle_turn(state: &mut GridState, id: AgentId, cfg: &SimConfig, out: &mut StepOutcome) {
    let rewards = *cfg.rewards();
    let a = &mut state.agents[id];
    a.health += cfg.h_decay;
    if a.health <= 0.0 {
        a.alive = false;
        a.position = None;
        out.reward += rewards.die;
        out.died = true;
        out.done = true;
    } else if state.step + 1 >= cfg.t_max {
        out.reward += rewards.survive_episode;
        out.done = true;
    }
}

/// Advance the whole society by one step. Each alive agent, in a fresh
/// random order, observes the grid and acts through `policy`.
pub fn run_step<R, P>(
    state: &mut GridState,
    cfg: &SimConfig,
    rng: &mut R,
    mut policy: P,
) -> Result<Vec<(AgentId, Action, StepOutcome)>>
where
    R: Rng,
    P: FnMut(&GridState, &Observation) -> Action,
{
    if state.is_done(cfg) {
        return Ok(Vec::new());
    }
    let order = state.turn_order(rng);
    let mut log = Vec::with_capacity(order.len());
    for id in order {
        let obs = state.observe(id, cfg)?;
        let action = policy(state, &obs);
        let outcome = step_agent(state, id, action, cfg, rng)?;
        log.push((id, action, outcome));
    }
    state.end_step();
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> SimRng {
        SimRng::seed_from_u64(seed)
    }

    fn distinct_cells(state: &GridState) -> bool {
        let mut cells: Vec<usize> = state
            .agents
            .iter()
            .filter_map(|a| a.position)
            .map(|c| state.index_of(c))
            .collect();
        let n = cells.len();
        cells.sort();
        cells.dedup();
        cells.len() == n && cells.iter().all(|&i| state.berries[i].is_none())
    }

    #[test]
    fn init_capabilities_seed_7() {
        let cfg = SimConfig::capabilities();
        let s = init_episode(&cfg, &mut rng(7)).unwrap();
        assert_eq!((s.width, s.height), (8, 4));
        assert_eq!(s.agents.len(), 4);
        assert_eq!(s.berries_on_grid(), 12);
        assert!(s.agents.iter().all(|a| a.health == 5.0 && a.bag.is_empty() && a.alive));
        assert_eq!(s.step, 0);
        assert!(distinct_cells(&s));
        let tall = s.agents.iter().filter(|a| a.trait_ == Trait::Tall).count();
        assert_eq!(tall, 2);
    }

    #[test]
    fn init_allotment_follows_profile() {
        let cfg = SimConfig::allotment();
        let s = init_episode(&cfg, &mut rng(3)).unwrap();
        assert!(distinct_cells(&s));
        for (plot, &expected) in cfg.allotment_profile.iter().enumerate() {
            let cols = cfg.allotment_columns(plot);
            let count = s
                .berries
                .iter()
                .enumerate()
                .filter(|(i, b)| {
                    **b == Some(BerryKind::Allotment(plot)) && cols.contains(&(i % s.width))
                })
                .count();
            assert_eq!(count, expected);
            let pos = s.agents[plot].position.unwrap();
            assert!(cols.contains(&pos.x));
        }
    }

    #[test]
    fn init_rejects_zero_agents() {
        let mut cfg = SimConfig::capabilities();
        cfg.n_agents = 0;
        assert!(init_episode(&cfg, &mut rng(1)).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = SimConfig::allotment();
        let a = init_episode(&cfg, &mut rng(11)).unwrap();
        let b = init_episode(&cfg, &mut rng(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wellbeing_values() {
        let cfg = SimConfig::capabilities();
        let mut a = AgentState {
            id: 0,
            position: Some(Cell::new(0, 0)),
            health: 5.0,
            bag: vec![],
            alive: true,
            trait_: Trait::Tall,
            berries_eaten: 0,
        };
        assert!((wellbeing(&a, &cfg) - 500.0).abs() < 1e-9);
        a.health = 1.0;
        a.bag = vec![BerryKind::Tree; 10];
        assert!((wellbeing(&a, &cfg) - 200.0).abs() < 1e-9);
        a.alive = false;
        a.health = 0.0;
        assert_eq!(wellbeing(&a, &cfg), 0.0);
    }

    /// One agent on an otherwise empty 8x4 grid.
    fn lone_state(cfg: &SimConfig, trait_: Trait) -> GridState {
        let mut s = GridState {
            width: cfg.grid_width,
            height: cfg.grid_height,
            berries: vec![None; cfg.grid_width * cfg.grid_height],
            agents: vec![],
            step: 0,
        };
        for id in 0..cfg.n_agents {
            s.agents.push(AgentState {
                id,
                position: Some(Cell::new(id, 0)),
                health: cfg.h_initial,
                bag: vec![],
                alive: true,
                trait_: if id == 0 { trait_ } else { Trait::Short },
                berries_eaten: 0,
            });
        }
        s
    }

    #[test]
    fn move_onto_berry_forages() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        s.berries[1 * cfg.grid_width] = Some(BerryKind::Tree); // (0, 1)
        let out = step_agent(&mut s, 0, Action::Move(Direction::South), &cfg, &mut rng(0)).unwrap();
        assert_eq!(out.reward, 1.0);
        assert!(out.foraged);
        assert_eq!(s.agents[0].bag, vec![BerryKind::Tree]);
        assert_eq!(s.berries_on_grid(), 0);
    }

    #[test]
    fn tall_agent_ignores_ground_berry() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        s.berries[cfg.grid_width] = Some(BerryKind::Ground);
        let out = step_agent(&mut s, 0, Action::Move(Direction::South), &cfg, &mut rng(0)).unwrap();
        assert_eq!(out.reward, 0.0);
        assert!(s.agents[0].bag.is_empty());
        assert_eq!(s.berries_on_grid(), 1);
    }

    #[test]
    fn eat_with_empty_bag_is_penalised() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        let before = s.clone();
        let out = step_agent(&mut s, 0, Action::Eat, &cfg, &mut rng(0)).unwrap();
        assert_eq!(out.reward, -0.2);
        assert!(!out.ate);
        let mut expected = before;
        expected.agents[0].health += cfg.h_decay;
        assert_eq!(s, expected);
    }

    #[test]
    fn eat_regrows_a_berry() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        s.agents[0].bag = vec![BerryKind::Tree, BerryKind::Ground];
        let total = s.total_berries();
        let out = step_agent(&mut s, 0, Action::Eat, &cfg, &mut rng(0)).unwrap();
        assert!(out.ate);
        assert_eq!(out.reward, 1.0);
        assert_eq!(s.agents[0].bag.len(), 1);
        assert_eq!(s.agents[0].berries_eaten, 1);
        assert!((s.agents[0].health - (5.0 + 0.1 - 0.01)).abs() < 1e-12);
        assert_eq!(s.total_berries(), total);
        assert_eq!(s.berries_on_grid(), 1);
    }

    #[test]
    fn throw_below_health_threshold_is_penalised() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        s.agents[0].health = 0.5;
        s.agents[0].bag = vec![BerryKind::Tree];
        let target = s.throw_target(0, &cfg);
        let out = step_agent(&mut s, 0, Action::Throw(target), &cfg, &mut rng(0)).unwrap();
        assert_eq!(out.reward, -0.2);
        assert_eq!(out.threw_to, None);
        assert_eq!(s.agents[0].bag.len(), 1);
        assert!(s.agents.iter().skip(1).all(|a| a.bag.is_empty()));
    }

    #[test]
    fn throw_transfers_to_poorest() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        s.agents[0].bag = vec![BerryKind::Tree, BerryKind::Tree];
        s.agents[2].health = 4.0;
        let target = s.throw_target(0, &cfg);
        assert_eq!(target, Some(2));
        let out = step_agent(&mut s, 0, Action::Throw(target), &cfg, &mut rng(0)).unwrap();
        assert_eq!(out.reward, 0.5);
        assert_eq!(out.threw_to, Some(2));
        assert_eq!(s.agents[2].bag, vec![BerryKind::Tree]);
        assert_eq!(s.agents[0].bag.len(), 1);
    }

    #[test]
    fn throw_without_berries_or_recipient() {
        let mut cfg = SimConfig::capabilities();
        cfg.n_agents = 1;
        let mut s = lone_state(&cfg, Trait::Tall);
        let out = step_agent(&mut s, 0, Action::Throw(None), &cfg, &mut rng(0)).unwrap();
        assert_eq!(out.reward, -0.2);
        s.agents[0].bag = vec![BerryKind::Tree];
        assert_eq!(s.throw_target(0, &cfg), None);
        let out = step_agent(&mut s, 0, Action::Throw(None), &cfg, &mut rng(0)).unwrap();
        assert_eq!(out.reward, cfg.rewards().try_throw_no_recipient);
        assert_eq!(s.agents[0].bag.len(), 1);
    }

    #[test]
    fn movement_clamps_at_edges() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        step_agent(&mut s, 0, Action::Move(Direction::North), &cfg, &mut rng(0)).unwrap();
        step_agent(&mut s, 0, Action::Move(Direction::West), &cfg, &mut rng(0)).unwrap();
        assert_eq!(s.agents[0].position, Some(Cell::new(0, 0)));
    }

    #[test]
    fn death_removes_agent() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        s.agents[0].health = 0.005;
        let out = step_agent(&mut s, 0, Action::Move(Direction::East), &cfg, &mut rng(0)).unwrap();
        assert!(out.died && out.done);
        assert_eq!(out.reward, -1.0);
        assert!(!s.agents[0].alive);
        assert_eq!(s.agents[0].position, None);
        assert!(step_agent(&mut s, 0, Action::Eat, &cfg, &mut rng(0)).is_err());
    }

    #[test]
    fn survive_reward_on_last_step() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        s.step = cfg.t_max - 1;
        let out = step_agent(&mut s, 0, Action::Move(Direction::East), &cfg, &mut rng(0)).unwrap();
        assert!(out.done);
        assert_eq!(out.reward, 1.0);
    }

    #[test]
    fn unknown_agent_is_a_contract_violation() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        assert!(matches!(
            step_agent(&mut s, 9, Action::Eat, &cfg, &mut rng(0)),
            Err(SimError::Contract(_))
        ));
    }

    #[test]
    fn observation_hides_unharvestable_berries() {
        let cfg = SimConfig::capabilities();
        let mut s = lone_state(&cfg, Trait::Tall);
        s.berries[3] = Some(BerryKind::Ground);
        let obs = s.observe(0, &cfg).unwrap();
        assert_eq!(obs.berry_distance, cfg.grid_width + cfg.grid_height);
        s.berries[cfg.grid_width + 2] = Some(BerryKind::Tree); // (2, 1)
        let obs = s.observe(0, &cfg).unwrap();
        assert_eq!(obs.berry_distance, 3);
        assert_eq!(obs.wellbeing.len(), cfg.n_agents);
        assert_eq!(obs.features(&cfg).len(), Observation::feature_len(cfg.n_agents));
    }

    #[test]
    fn run_step_each_alive_agent_acts_once() {
        let cfg = SimConfig::capabilities();
        let mut s = init_episode(&cfg, &mut rng(5)).unwrap();
        let log = run_step(&mut s, &cfg, &mut rng(6), |_, _| Action::Eat).unwrap();
        let mut ids: Vec<_> = log.iter().map(|(id, _, _)| *id).collect();
        ids.sort();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn run_step_noop_when_all_dead() {
        let cfg = SimConfig::capabilities();
        let mut s = init_episode(&cfg, &mut rng(5)).unwrap();
        for a in &mut s.agents {
            a.alive = false;
            a.position = None;
        }
        let before = s.clone();
        let log = run_step(&mut s, &cfg, &mut rng(6), |_, _| Action::Eat).unwrap();
        assert!(log.is_empty());
        assert_eq!(s, before);
    }

    #[test]
    fn turn_order_is_seeded() {
        let cfg = SimConfig::capabilities();
        let s = init_episode(&cfg, &mut rng(5)).unwrap();
        let a: Vec<_> = (0..10).map(|_| ()).scan(rng(9), |r, _| Some(s.turn_order(r))).collect();
        let b: Vec<_> = (0..10).map(|_| ()).scan(rng(9), |r, _| Some(s.turn_order(r))).collect();
        assert_eq!(a, b);
    }
}
