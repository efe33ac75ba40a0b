//! Maximin evaluation of a transition and the self-directed sanction it
//! produces.
//!
//! An agent compares the minimum well-being of the society before and after
//! its own action. Raising the minimum earns `+ξ`; lowering it costs `-ξ`,
//! as does leaving it unchanged while holding an action that would have
//! raised it.

use crate::config::SimConfig;
use crate::env::{wellbeing, AgentId, GridState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EthicsConfig {
    /// Sanction `-ξ` when the minimum well-being falls.
    pub penalise_worsened: bool,
    /// Sanction `-ξ` when the minimum is unchanged but could have been raised.
    pub penalise_unused_improvement: bool,
    /// Keep shaping rewards during evaluation episodes.
    pub sanction_at_eval: bool,
}

impl Default for EthicsConfig {
    fn default() -> Self {
        EthicsConfig {
            penalise_worsened: true,
            penalise_unused_improvement: true,
            sanction_at_eval: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sanction {
    Positive,
    Neutral,
    Negative,
}

impl Sanction {
    pub fn value(self, magnitude: f64) -> f64 {
        match self {
            Sanction::Positive => magnitude,
            Sanction::Neutral => 0.0,
            Sanction::Negative => -magnitude,
        }
    }
}

/// Lowest well-being among alive agents and the lowest id attaining it.
/// Dead agents carry well-being 0 and are skipped; `None` means every agent
/// is dead.
pub fn min_experience(u: &[f64]) -> Option<(f64, AgentId)> {
    u.iter()
        .copied()
        .enumerate()
        .filter(|&(_, v)| v > 0.0)
        .fold(None, |best, (id, v)| match best {
            Some((b, _)) if b <= v => best,
            _ => Some((v, id)),
        })
}

pub fn sanction(u_t: &[f64], u_next: &[f64], improvable: bool, cfg: &EthicsConfig) -> Sanction {
    debug_assert_eq!(u_t.len(), u_next.len());
    let (Some((before, _)), Some((after, _))) = (min_experience(u_t), min_experience(u_next)) else {
        return Sanction::Neutral;
    };
    if after > before {
        Sanction::Positive
    } else if after < before {
        if cfg.penalise_worsened {
            Sanction::Negative
        } else {
            Sanction::Neutral
        }
    } else if improvable && cfg.penalise_unused_improvement {
        Sanction::Negative
    } else {
        Sanction::Neutral
    }
}

/// Whether `id` holds an action that raises the society's minimum: eating
/// when it is the unique minimum (eating adds `h_gain` health), or throwing
/// when the throw would lift the minimum, i.e. the recipient is the unique
/// minimum and the giver stays above the old minimum after giving.
pub fn could_improve_min(state: &GridState, id: AgentId, cfg: &SimConfig) -> bool {
    let Some(agent) = state.agents.get(id).filter(|a| a.alive) else {
        return false;
    };
    if agent.bag.is_empty() {
        return false;
    }
    let mut u = state.wellbeing_vector(cfg);
    let Some((min, _)) = min_experience(&u) else {
        return false;
    };
    let at_min = u.iter().filter(|&&v| v > 0.0 && v == min).count();
    if wellbeing(agent, cfg) == min {
        return at_min == 1;
    }
    if agent.health < cfg.h_throw {
        return false;
    }
    let Some(target) = state.throw_target(id, cfg) else {
        return false;
    };
    let berry = cfg.h_gain / cfg.h_decay.abs();
    u[target] += berry;
    u[id] -= berry;
    min_experience(&u).is_some_and(|(after, _)| after > min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AgentState, BerryKind, Cell, Trait};
    use proptest::prelude::*;

    const XI: f64 = 0.4;

    fn both() -> EthicsConfig {
        EthicsConfig::default()
    }

    #[test]
    fn min_experience_examples() {
        assert_eq!(min_experience(&[500.0; 4]), Some((500.0, 0)));
        assert_eq!(min_experience(&[510.0, 490.0, 505.0, 500.0]), Some((490.0, 1)));
        assert_eq!(min_experience(&[0.0, 490.0, 505.0]), Some((490.0, 1)));
        assert_eq!(min_experience(&[0.0, 0.0]), None);
    }

    #[test]
    fn sanction_examples() {
        let s = sanction(&[490.0, 500.0], &[500.0, 500.0], false, &both());
        assert_eq!(s.value(XI), 0.4);
        let s = sanction(&[490.0, 500.0], &[490.0, 520.0], false, &both());
        assert_eq!(s.value(XI), 0.0);
        let s = sanction(&[490.0, 500.0], &[490.0, 520.0], true, &both());
        assert_eq!(s.value(XI), -0.4);
    }

    #[test]
    fn pure_forms_are_selectable() {
        let only_eq2 = EthicsConfig {
            penalise_unused_improvement: false,
            ..both()
        };
        assert_eq!(sanction(&[1.0, 2.0], &[1.0, 2.0], true, &only_eq2), Sanction::Neutral);
        let only_unused = EthicsConfig {
            penalise_worsened: false,
            ..both()
        };
        assert_eq!(sanction(&[2.0, 2.0], &[1.0, 2.0], false, &only_unused), Sanction::Neutral);
        assert_eq!(sanction(&[2.0, 2.0], &[2.0, 3.0], true, &only_unused), Sanction::Negative);
    }

    #[test]
    fn all_dead_is_neutral() {
        assert_eq!(sanction(&[1.0, 0.0], &[0.0, 0.0], true, &both()), Sanction::Neutral);
    }

    fn society(wb_health: &[f64], bags: &[usize]) -> (GridState, SimConfig) {
        let cfg = SimConfig::capabilities();
        let agents = wb_health
            .iter()
            .zip(bags)
            .enumerate()
            .map(|(id, (&h, &b))| AgentState {
                id,
                position: Some(Cell::new(id, 0)),
                health: h,
                bag: vec![BerryKind::Tree; b],
                alive: h > 0.0,
                trait_: Trait::Tall,
                berries_eaten: 0,
            })
            .collect();
        let state = GridState {
            width: 8,
            height: 4,
            berries: vec![None; 32],
            agents,
            step: 0,
        };
        (state, cfg)
    }

    #[test]
    fn could_improve_examples() {
        // no berry
        let (s, cfg) = society(&[3.0, 1.0, 4.0, 4.0], &[0, 0, 0, 0]);
        assert!(!could_improve_min(&s, 0, &cfg));
        // healthy with berries, someone else is minimum
        let (s, cfg) = society(&[3.0, 1.0, 4.0, 4.0], &[2, 0, 0, 0]);
        assert!(could_improve_min(&s, 0, &cfg));
        // itself the unique minimum
        let (s, cfg) = society(&[1.0, 3.0, 4.0, 4.0], &[1, 0, 0, 0]);
        assert!(could_improve_min(&s, 0, &cfg));
        // too weak to throw
        let (s, cfg) = society(&[0.5, 0.1, 4.0, 4.0], &[1, 0, 0, 0]);
        assert!(!could_improve_min(&s, 0, &cfg));
        // tied at the minimum with another agent
        let (s, cfg) = society(&[1.0, 1.0, 4.0, 4.0], &[0, 0, 0, 0]);
        assert!(!could_improve_min(&s, 0, &cfg));
        // two agents share the minimum: one throw cannot lift it
        let (s, cfg) = society(&[3.0, 1.0, 1.0, 4.0], &[2, 0, 0, 0]);
        assert!(!could_improve_min(&s, 0, &cfg));
        // giving the berry away would drop the giver below the old minimum
        let (s, cfg) = society(&[0.98, 1.0, 4.0, 4.0], &[1, 0, 0, 0]);
        assert!(!could_improve_min(&s, 0, &cfg));
    }

    proptest! {
        #[test]
        fn sanction_is_three_valued(
            a in proptest::collection::vec(0.0f64..600.0, 1..8),
            b in proptest::collection::vec(0.0f64..600.0, 1..8),
            improvable: bool,
        ) {
            let n = a.len().min(b.len());
            let v = sanction(&a[..n], &b[..n], improvable, &both()).value(XI);
            prop_assert!(v == XI || v == 0.0 || v == -XI);
        }

        #[test]
        fn raising_post_min_never_lowers_sanction(
            a in proptest::collection::vec(1.0f64..600.0, 2..8),
            bump in 0.0f64..50.0,
            improvable: bool,
        ) {
            let mut b = a.clone();
            b[0] = (a[0] - 5.0).max(0.5);
            let low = sanction(&a, &b, improvable, &both()).value(XI);
            let mut raised = b.clone();
            let (_, argmin) = min_experience(&b).unwrap();
            raised[argmin] += bump;
            let high = sanction(&a, &raised, improvable, &both()).value(XI);
            prop_assert!(high >= low);
        }

        #[test]
        fn reversal_flips_sign(
            a in proptest::collection::vec(1.0f64..600.0, 1..8),
            b in proptest::collection::vec(1.0f64..600.0, 1..8),
        ) {
            let n = a.len().min(b.len());
            let fwd = sanction(&a[..n], &b[..n], false, &both()).value(XI);
            let back = sanction(&b[..n], &a[..n], false, &both()).value(XI);
            prop_assert_eq!(fwd, -back);
        }

        #[test]
        fn scaling_preserves_argmin_and_sign(
            a in proptest::collection::vec(1.0f64..600.0, 1..8),
            b in proptest::collection::vec(1.0f64..600.0, 1..8),
            c in 0.5f64..4.0,
        ) {
            let n = a.len().min(b.len());
            let (a, b) = (&a[..n], &b[..n]);
            let sa: Vec<f64> = a.iter().map(|v| v * c).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * c).collect();
            prop_assert_eq!(min_experience(a).unwrap().1, min_experience(&sa).unwrap().1);
            prop_assert_eq!(sanction(a, b, false, &both()), sanction(&sa, &sb, false, &both()));
        }
    }
}
