//! Exact fractional-optimum oracles: the plain fractional knapsack, the
//! capped-linear program, and the piecewise-linear-concave program, plus
//! leave-one-out optima.
//!
//! All three run on exact rationals. The capped solver certifies its own
//! optimality with dual multipliers and complementary slackness on every
//! call; the concave solver reduces to the others in the degenerate cases
//! (identity valuation, pure caps), which the tests pin down.

mod capped;
mod concave;

pub(crate) use capped::greedy_value_capped;
pub use capped::{opt_capped, opt_capped_excl, CappedSolution, DualCertificate};
pub(crate) use concave::ConcaveEvaluator;
pub use concave::{opt_concave, opt_concave_excl, ConcaveOptSolution, Pwl};

use crate::instance::{Agent, AgentId, Efficiency};
use crate::num::Rat;
use num_traits::{Signed, Zero};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("agent {0} has no type assigned")]
    MissingType(AgentId),
    #[error("no valuation for type {0}")]
    MissingValuation(usize),
    #[error("duality certificate failed: {0}")]
    Certificate(String),
}

/// Fractional optimum of a linear instance restricted to the given agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OptSolution {
    /// opt value, exactly.
    pub value: Rat,
    /// Fractions for the agents that were passed in, sorted by agent id.
    pub x: Vec<(AgentId, Rat)>,
    /// Agents by non-increasing efficiency; ties by ascending id.
    pub order: Vec<AgentId>,
    /// The unique agent with 0 < x < 1, when the budget stops mid-agent.
    pub marginal_index: Option<AgentId>,
}

impl OptSolution {
    pub fn x_of(&self, id: AgentId) -> Rat {
        self.x
            .binary_search_by_key(&id, |(i, _)| *i)
            .map(|pos| self.x[pos].1.clone())
            .unwrap_or_else(|_| Rat::zero())
    }
}

/// Non-increasing efficiency order; zero-cost agents count as infinitely
/// efficient and come first; all ties break by ascending agent id.
pub fn efficiency_order(agents: &[Agent]) -> Vec<AgentId> {
    let mut order: Vec<&Agent> = agents.iter().collect();
    order.sort_by(|a, b| {
        Efficiency::of(&b.value, &b.cost)
            .cmp(&Efficiency::of(&a.value, &a.cost))
            .then(a.id.cmp(&b.id))
    });
    order.iter().map(|a| a.id).collect()
}

/// Greedy prefix fill in efficiency order. The first agent that does not
/// fully fit receives the leftover budget as a fraction; zero-value agents
/// with positive cost are never selected.
pub fn opt_linear(agents: &[Agent], budget: &Rat) -> OptSolution {
    let order = efficiency_order(agents);
    let by_id: std::collections::BTreeMap<AgentId, &Agent> =
        agents.iter().map(|a| (a.id, a)).collect();
    let mut remaining = budget.clone();
    let mut value = Rat::zero();
    let mut x: Vec<(AgentId, Rat)> = agents.iter().map(|a| (a.id, Rat::zero())).collect();
    x.sort_by_key(|(id, _)| *id);
    let set = |xs: &mut Vec<(AgentId, Rat)>, id: AgentId, v: Rat| {
        let pos = xs.binary_search_by_key(&id, |(i, _)| *i).expect("id present");
        xs[pos].1 = v;
    };
    let mut marginal_index = None;
    let mut exhausted = false;
    for &id in &order {
        let agent = by_id[&id];
        if agent.cost.is_zero() {
            set(&mut x, id, Rat::from_integer(1.into()));
            value += &agent.value;
            continue;
        }
        if exhausted {
            break;
        }
        if agent.value.is_zero() {
            continue;
        }
        if agent.cost <= remaining {
            set(&mut x, id, Rat::from_integer(1.into()));
            remaining -= &agent.cost;
            value += &agent.value;
        } else {
            let frac = &remaining / &agent.cost;
            if !frac.is_zero() {
                value += &agent.value * &frac;
                set(&mut x, id, frac.clone());
                if frac < Rat::from_integer(1.into()) {
                    marginal_index = Some(id);
                }
            }
            remaining = Rat::zero();
            exhausted = true;
        }
    }
    OptSolution { value, x, order, marginal_index }
}

/// opt over the given agents minus one; the leave-one-out optimum.
pub fn opt_linear_excl(agents: &[Agent], budget: &Rat, excluded: AgentId) -> Rat {
    let mut order: Vec<&Agent> = agents.iter().collect();
    order.sort_by(|a, b| eff_cmp(a, b));
    greedy_value(&order, budget, Some(excluded))
}

/// Descending-efficiency comparator with ascending-id tie break, shared by
/// the sort paths that work on references. Compares v_a/c_a against
/// v_b/c_b by raw integer cross-multiplication, with no reductions.
pub(crate) fn eff_cmp(a: &Agent, b: &Agent) -> std::cmp::Ordering {
    match (a.cost.is_zero(), b.cost.is_zero()) {
        (true, true) => a.id.cmp(&b.id),
        (true, false) => std::cmp::Ordering::Less,
        (false, true) => std::cmp::Ordering::Greater,
        (false, false) => {
            // a.value/a.cost = (av.n * ac.d) / (av.d * ac.n)
            let lhs = a.value.numer() * a.cost.denom() * b.value.denom() * b.cost.numer();
            let rhs = b.value.numer() * b.cost.denom() * a.value.denom() * a.cost.numer();
            rhs.cmp(&lhs).then(a.id.cmp(&b.id))
        }
    }
}

/// Value of the greedy prefix fill over pre-sorted agents, optionally
/// skipping one; allocation-free hot path for leave-one-out optima.
pub(crate) fn greedy_value(order: &[&Agent], budget: &Rat, skip: Option<AgentId>) -> Rat {
    let mut remaining = budget.clone();
    let mut value = Rat::zero();
    for agent in order {
        if Some(agent.id) == skip {
            continue;
        }
        if agent.cost.is_zero() {
            value += &agent.value;
            continue;
        }
        if agent.value.is_zero() {
            continue;
        }
        if agent.cost <= remaining {
            remaining -= &agent.cost;
            value += &agent.value;
        } else {
            if remaining.is_positive() {
                value += &agent.value * &remaining / &agent.cost;
            }
            break;
        }
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Instance;
    use crate::num::{rat, rint};

    fn plain(agents: Vec<(i64, i64)>) -> Vec<Agent> {
        Instance::plain(
            rint(1),
            agents.into_iter().map(|(v, c)| (rint(v), rint(c))).collect(),
        )
        .agents
    }

    #[test]
    fn order_by_efficiency() {
        // efficiencies 3, 1, 1/2
        let agents = plain(vec![(6, 2), (4, 4), (5, 10)]);
        assert_eq!(efficiency_order(&agents), vec![0, 1, 2]);
    }

    #[test]
    fn order_zero_cost_first() {
        let agents = plain(vec![(1, 0), (9, 1)]);
        assert_eq!(efficiency_order(&agents), vec![0, 1]);
        let agents = plain(vec![(9, 1), (1, 0)]);
        assert_eq!(efficiency_order(&agents), vec![1, 0]);
    }

    #[test]
    fn order_ties_by_id() {
        let agents = plain(vec![(2, 2), (1, 1)]);
        assert_eq!(efficiency_order(&agents), vec![0, 1]);
    }

    #[test]
    fn greedy_with_fractional_tail() {
        let agents = plain(vec![(6, 2), (4, 4), (5, 10)]);
        let sol = opt_linear(&agents, &rint(10));
        // 6 and 4 fit at cost 6; the leftover 4 buys 2/5 of the last agent.
        assert_eq!(sol.value, rint(12));
        assert_eq!(sol.x_of(0), rint(1));
        assert_eq!(sol.x_of(1), rint(1));
        assert_eq!(sol.x_of(2), rat(2, 5));
        assert_eq!(sol.marginal_index, Some(2));
    }

    #[test]
    fn single_agent_fraction() {
        let agents = plain(vec![(1, 2)]);
        let sol = opt_linear(&agents, &rint(1));
        assert_eq!(sol.value, rat(1, 2));
        assert_eq!(sol.x_of(0), rat(1, 2));
    }

    #[test]
    fn exact_fit_has_no_marginal() {
        let agents = plain(vec![(4, 2); 5]);
        let sol = opt_linear(&agents, &rint(10));
        assert_eq!(sol.value, rint(20));
        assert!(sol.x.iter().all(|(_, x)| *x == rint(1)));
        assert_eq!(sol.marginal_index, None);
    }

    #[test]
    fn leave_one_out() {
        let agents = plain(vec![(6, 2), (4, 4), (5, 10)]);
        // Without agent 0: 4 fits, leftover 6 buys 3/5 of the last: 4 + 3 = 7.
        assert_eq!(opt_linear_excl(&agents, &rint(10), 0), rint(7));
        let one = plain(vec![(5, 4)]);
        assert_eq!(opt_linear_excl(&one, &rint(10), 0), rint(0));
        let five = plain(vec![(4, 2); 5]);
        assert_eq!(opt_linear_excl(&five, &rint(10), 3), rint(16));
    }

    #[test]
    fn budget_exactly_exhausted_mid_list() {
        let agents = plain(vec![(6, 2), (4, 4), (5, 10)]);
        let sol = opt_linear(&agents, &rint(6));
        assert_eq!(sol.value, rint(10));
        assert_eq!(sol.x_of(2), rint(0));
        assert_eq!(sol.marginal_index, None);
    }

    #[test]
    fn zero_value_agents_are_skipped() {
        let agents = plain(vec![(0, 1), (3, 2)]);
        let sol = opt_linear(&agents, &rint(10));
        assert_eq!(sol.value, rint(3));
        assert_eq!(sol.x_of(0), rint(0));
        // zero-cost agents ride along for free
        let agents = plain(vec![(2, 0), (3, 2)]);
        let sol = opt_linear(&agents, &rint(1));
        assert_eq!(sol.value, rint(2) + rat(3, 2));
        assert_eq!(sol.x_of(0), rint(1));
        assert_eq!(sol.x_of(1), rat(1, 2));
    }
}
