//! Collapse specific norms into general rules.
//!
//! A set of conditions becomes a rule when every norm matching it has the
//! same consequent and at least two distinct norms match. Rules are picked
//! greedily, smallest condition sets first and, among those, the one that
//! absorbs the most not-yet-covered norms. Norms that never merge are kept
//! verbatim.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{ActionClass, BehaviourKey, BerryLevel, Level, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Health(Level),
    Berries(BerryLevel),
    /// Level of the neighbour at this rank (0 = worst-off).
    Neighbour(usize, Level),
}

impl Condition {
    fn feature(self) -> usize {
        match self {
            Condition::Health(_) => 0,
            Condition::Berries(_) => 1,
            Condition::Neighbour(rank, _) => 2 + rank,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Health(l) => write!(f, "{} health", l.label()),
            Condition::Berries(b) => write!(f, "{} berries", b.label()),
            Condition::Neighbour(rank, l) => write!(f, "{} days #{}", l.label(), rank + 1),
        }
    }
}

fn conditions(view: &View) -> Vec<Condition> {
    let mut c = vec![Condition::Health(view.health), Condition::Berries(view.berries)];
    c.extend(
        view.neighbours
            .iter()
            .enumerate()
            .map(|(rank, &l)| Condition::Neighbour(rank, l)),
    );
    c
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rule {
    /// Sorted by feature.
    pub conditions: Vec<Condition>,
    pub act: ActionClass,
}

impl Rule {
    fn matches(&self, full: &[Condition]) -> bool {
        self.conditions
            .iter()
            .all(|c| full.get(c.feature()) == Some(c))
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let conds: Vec<String> = self.conditions.iter().map(ToString::to_string).collect();
        write!(f, "IF <{}> THEN <{}>", conds.join(", "), self.act)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleTree {
    pub rules: Vec<Rule>,
}

#[derive(Default)]
struct Node {
    children: BTreeMap<Condition, Node>,
    actions: BTreeSet<ActionClass>,
}

impl Node {
    fn render(&self, depth: usize, out: &mut String) {
        for act in &self.actions {
            out.push_str(&"  ".repeat(depth));
            out.push_str(&act.to_string());
            out.push('\n');
        }
        for (cond, child) in &self.children {
            out.push_str(&"  ".repeat(depth));
            out.push_str(&cond.to_string());
            out.push('\n');
            child.render(depth + 1, out);
        }
    }
}

impl RuleTree {
    /// Every consequent the rules prescribe for `view`.
    pub fn decide(&self, view: &View) -> BTreeSet<ActionClass> {
        let full = conditions(view);
        self.rules
            .iter()
            .filter(|r| r.matches(&full))
            .map(|r| r.act)
            .collect()
    }

    /// One `IF <...> THEN <...>` rule per line.
    pub fn to_rules_text(&self) -> String {
        self.rules.iter().map(|r| format!("{r}\n")).collect()
    }

    /// Indented tree, conditions nested in feature order, consequents as
    /// leaves.
    pub fn render(&self) -> String {
        let mut root = Node::default();
        for rule in &self.rules {
            let mut node = &mut root;
            for c in &rule.conditions {
                node = node.children.entry(*c).or_default();
            }
            node.actions.insert(rule.act);
        }
        let mut out = String::new();
        root.render(0, &mut out);
        out
    }
}

pub fn generalise<'a, I>(norms: I) -> RuleTree
where
    I: IntoIterator<Item = &'a BehaviourKey>,
{
    let mut items: Vec<(Vec<Condition>, ActionClass)> = norms
        .into_iter()
        .map(|(view, act)| (conditions(view), *act))
        .collect();
    items.sort();
    items.dedup();

    let n_features = items.iter().map(|(c, _)| c.len()).max().unwrap_or(0);
    let mut remaining: BTreeSet<usize> = (0..items.len()).collect();
    let mut rules = Vec::new();

    while !remaining.is_empty() {
        let mut chosen: Option<(Rule, Vec<usize>)> = None;
        'sizes: for size in 1..n_features {
            let mut candidates: BTreeSet<Vec<Condition>> = BTreeSet::new();
            for &i in &remaining {
                let full = &items[i].0;
                for mask in 1u64..(1 << full.len()) {
                    if mask.count_ones() as usize == size {
                        candidates.insert(
                            (0..full.len())
                                .filter(|b| mask & (1 << b) != 0)
                                .map(|b| full[b])
                                .collect(),
                        );
                    }
                }
            }
            let mut best: Option<(usize, Rule, Vec<usize>)> = None;
            for conds in candidates {
                let probe = Rule {
                    conditions: conds,
                    act: ActionClass::Move,
                };
                let covered: Vec<usize> = (0..items.len())
                    .filter(|&i| probe.matches(&items[i].0))
                    .collect();
                let acts: BTreeSet<ActionClass> = covered.iter().map(|&i| items[i].1).collect();
                let antecedents: BTreeSet<&Vec<Condition>> =
                    covered.iter().map(|&i| &items[i].0).collect();
                if acts.len() != 1 || antecedents.len() < 2 {
                    continue;
                }
                let fresh = covered.iter().filter(|i| remaining.contains(i)).count();
                if fresh > best.as_ref().map_or(0, |b| b.0) {
                    let act = *acts.iter().next().expect("one action");
                    best = Some((fresh, Rule { act, ..probe }, covered));
                }
            }
            if let Some((_, rule, covered)) = best {
                chosen = Some((rule, covered));
                break 'sizes;
            }
        }
        match chosen {
            Some((rule, covered)) => {
                for i in covered {
                    remaining.remove(&i);
                }
                rules.push(rule);
            }
            None => {
                for &i in &remaining {
                    rules.push(Rule {
                        conditions: items[i].0.clone(),
                        act: items[i].1,
                    });
                }
                remaining.clear();
            }
        }
    }
    rules.sort();
    RuleTree { rules }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(h: Level, b: BerryLevel, n: &[Level], act: ActionClass) -> BehaviourKey {
        (
            View {
                health: h,
                berries: b,
                neighbours: n.to_vec(),
            },
            act,
        )
    }

    const HHH: [Level; 3] = [Level::High; 3];

    #[test]
    fn no_berries_collapses_to_move() {
        let norms = [
            key(Level::Low, BerryLevel::None, &HHH, ActionClass::Move),
            key(Level::High, BerryLevel::None, &HHH, ActionClass::Move),
        ];
        let tree = generalise(&norms);
        assert_eq!(tree.to_rules_text(), "IF <no berries> THEN <move>\n");
        assert_eq!(tree.render(), "no berries\n  move\n");
    }

    #[test]
    fn singleton_is_kept() {
        let norms = [key(Level::High, BerryLevel::Medium, &HHH, ActionClass::Throw)];
        let tree = generalise(&norms);
        assert_eq!(tree.rules.len(), 1);
        assert_eq!(tree.rules[0].conditions.len(), 5);
        assert_eq!(
            tree.to_rules_text(),
            "IF <high health, medium berries, high days #1, high days #2, high days #3> THEN <throw>\n"
        );
    }

    #[test]
    fn conflicting_actions_block_merge() {
        let norms = [
            key(Level::High, BerryLevel::None, &HHH, ActionClass::Move),
            key(Level::Low, BerryLevel::None, &HHH, ActionClass::Eat),
        ];
        let tree = generalise(&norms);
        assert_eq!(tree.rules.len(), 2);
        assert!(tree.rules.iter().all(|r| r.conditions.len() == 5));
    }

    #[test]
    fn mixed_consequents_on_one_antecedent() {
        let norms = [
            key(Level::Medium, BerryLevel::Medium, &HHH, ActionClass::Eat),
            key(Level::Medium, BerryLevel::Medium, &HHH, ActionClass::Throw),
            key(Level::Low, BerryLevel::None, &HHH, ActionClass::Move),
            key(Level::Medium, BerryLevel::None, &HHH, ActionClass::Move),
        ];
        let tree = generalise(&norms);
        let v = &norms[0].0;
        assert_eq!(
            tree.decide(v),
            [ActionClass::Eat, ActionClass::Throw].into_iter().collect()
        );
        assert!(tree.to_rules_text().contains("IF <no berries> THEN <move>"));
    }

    fn arb_key() -> impl Strategy<Value = BehaviourKey> {
        (0usize..3, 0usize..4, proptest::collection::vec(0usize..3, 2), 0usize..3).prop_map(
            |(h, b, n, a)| {
                let lv = [Level::Low, Level::Medium, Level::High];
                let neighbours: Vec<Level> = n.into_iter().map(|i| lv[i]).collect();
                key(
                    lv[h],
                    [BerryLevel::None, BerryLevel::Low, BerryLevel::Medium, BerryLevel::High][b],
                    &neighbours,
                    [ActionClass::Move, ActionClass::Eat, ActionClass::Throw][a],
                )
            },
        )
    }

    proptest! {
        #[test]
        fn decisions_are_preserved(norms in proptest::collection::vec(arb_key(), 0..30)) {
            let tree = generalise(&norms);
            for (view, _) in &norms {
                let expected: BTreeSet<ActionClass> = norms
                    .iter()
                    .filter(|(v, _)| v == view)
                    .map(|(_, a)| *a)
                    .collect();
                prop_assert_eq!(tree.decide(view), expected);
            }
            let again = generalise(&norms);
            prop_assert_eq!(tree, again);
        }
    }
}
