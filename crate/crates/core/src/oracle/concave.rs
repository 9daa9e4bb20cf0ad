//! The concave program: per-type piecewise-linear concave valuations over
//! accumulated type value, maximized under the budget.
//!
//! Each agent is decomposed (in its type's efficiency order) into pieces
//! whose marginal value per unit cost is the valuation slope at the
//! relevant prefix times the agent's own efficiency. Concavity makes piece
//! densities non-increasing within a type, so a single global greedy over
//! pieces is optimal and leaves at most one fractionally selected agent per
//! type. A normalization pass re-establishes that structure from any
//! allocation; on the greedy output it is a no-op.

use super::{efficiency_order, OracleError};
use crate::instance::{Agent, AgentId, TypeId, TypeValuation};
use crate::num::Rat;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

/// Piecewise-linear concave curve in evaluated form: breakpoints plus the
/// final slope that extends to infinity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pwl {
    points: Vec<(Rat, Rat)>,
    last_slope: Rat,
}

impl Pwl {
    pub fn from_valuation(v: &TypeValuation) -> Pwl {
        let points = v.as_breakpoints();
        debug_assert!(points.len() >= 2);
        let n = points.len();
        let last_slope = (&points[n - 1].1 - &points[n - 2].1) / (&points[n - 1].0 - &points[n - 2].0);
        Pwl { points, last_slope }
    }

    pub fn eval(&self, x: &Rat) -> Rat {
        debug_assert!(!x.is_negative());
        for w in self.points.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        let (xn, yn) = self.points.last().unwrap();
        yn + &self.last_slope * (x - xn)
    }

    /// Kink positions on the value axis, excluding the origin.
    pub fn kinks(&self) -> impl Iterator<Item = &Rat> {
        self.points.iter().skip(1).map(|(x, _)| x)
    }

    /// Evaluation at a (possibly irrational) non-negative argument.
    pub fn eval_surd(&self, x: &crate::surd::Surd) -> crate::surd::Surd {
        use crate::surd::Surd;
        debug_assert!(!x.is_negative());
        for w in self.points.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if x <= &Surd::from_rat(x1.clone()) {
                let slope = (y1 - y0) / (x1 - x0);
                return Surd::from_rat(y0.clone())
                    + Surd::from_rat(slope) * (x - &Surd::from_rat(x0.clone()));
            }
        }
        let (xn, yn) = self.points.last().unwrap();
        Surd::from_rat(yn.clone())
            + Surd::from_rat(self.last_slope.clone()) * (x - &Surd::from_rat(xn.clone()))
    }

    /// Smallest w >= lo with eval(w) - eval(lo) = gain; None when the curve
    /// can never gain that much past lo.
    pub fn solve_gain(&self, lo: &Rat, gain: &Rat) -> Option<Rat> {
        debug_assert!(!gain.is_negative());
        if gain.is_zero() {
            return Some(lo.clone());
        }
        let base = self.eval(lo);
        let target = &base + gain;
        let mut prev = lo.clone();
        for (x, _) in self.points.iter().skip_while(|(x, _)| x <= lo) {
            let y = self.eval(x);
            if y >= target {
                let y_prev = self.eval(&prev);
                let slope = (&y - &y_prev) / (x - &prev);
                return Some(&prev + (target - y_prev) / slope);
            }
            prev = x.clone();
        }
        if self.last_slope.is_positive() {
            let y_prev = self.eval(&prev);
            Some(&prev + (target - y_prev) / &self.last_slope)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcaveOptSolution {
    /// Objective value, sum over types of l_t(V_t), exactly.
    pub value: Rat,
    /// Fractions for the provided agents, sorted by agent id.
    pub x_star: Vec<(AgentId, Rat)>,
    /// Marginal value of each agent at the optimum prefix (v*_i).
    pub v_star: Vec<(AgentId, Rat)>,
    /// Marginal value at the full-selection prefix (v-hat_i).
    pub v_hat: Vec<(AgentId, Rat)>,
    /// Per type: its agents by non-increasing efficiency.
    pub per_type_order: BTreeMap<TypeId, Vec<AgentId>>,
}

impl ConcaveOptSolution {
    fn lookup(list: &[(AgentId, Rat)], id: AgentId) -> Rat {
        list.binary_search_by_key(&id, |(i, _)| *i)
            .map(|pos| list[pos].1.clone())
            .unwrap_or_else(|_| Rat::zero())
    }

    pub fn x_of(&self, id: AgentId) -> Rat {
        Self::lookup(&self.x_star, id)
    }

    pub fn v_star_of(&self, id: AgentId) -> Rat {
        Self::lookup(&self.v_star, id)
    }

    pub fn v_hat_of(&self, id: AgentId) -> Rat {
        Self::lookup(&self.v_hat, id)
    }
}

struct Piece {
    type_id: TypeId,
    agent: AgentId,
    /// Order of the piece inside its type (nested consumption order).
    seq: usize,
    gain: Rat,
    cost: Rat,
    /// Fraction of the agent covered by this piece.
    x_mass: Rat,
}

fn denser(a: &Piece, b: &Piece) -> std::cmp::Ordering {
    // gain_a/cost_a vs gain_b/cost_b by cross-multiplication; zero-cost
    // pieces with positive gain are infinitely dense.
    let lhs = &a.gain * &b.cost;
    let rhs = &b.gain * &a.cost;
    lhs.cmp(&rhs)
        .then_with(|| {
            let inf_a = a.cost.is_zero() && a.gain.is_positive();
            let inf_b = b.cost.is_zero() && b.gain.is_positive();
            inf_a.cmp(&inf_b)
        })
        .reverse()
        .then(a.type_id.cmp(&b.type_id))
        .then(a.agent.cmp(&b.agent))
        .then(a.seq.cmp(&b.seq))
}

/// Groups agents by type, each group in efficiency order. Zero-value agents
/// sit at the back of their group and never carry pieces.
fn type_orders(agents: &[Agent]) -> Result<BTreeMap<TypeId, Vec<AgentId>>, OracleError> {
    let mut groups: BTreeMap<TypeId, Vec<Agent>> = BTreeMap::new();
    for agent in agents {
        let t = agent.type_id.ok_or(OracleError::MissingType(agent.id))?;
        groups.entry(t).or_default().push(agent.clone());
    }
    Ok(groups
        .into_iter()
        .map(|(t, group)| (t, efficiency_order(&group)))
        .collect())
}

/// Decomposes agents into constant-slope pieces along each type's value
/// axis, sorted globally by density (ties: type, agent id, piece order).
fn build_pieces(
    per_type_order: &BTreeMap<TypeId, Vec<AgentId>>,
    by_id: &BTreeMap<AgentId, &Agent>,
    curves: &BTreeMap<TypeId, Pwl>,
) -> Vec<Piece> {
    let mut pieces: Vec<Piece> = Vec::new();
    for (t, order) in per_type_order {
        let curve = &curves[t];
        let mut prefix = Rat::zero();
        let mut seq = 0usize;
        for &id in order {
            let agent = by_id[&id];
            if agent.value.is_zero() {
                continue;
            }
            let hi = &prefix + &agent.value;
            let mut cuts: Vec<Rat> = vec![prefix.clone()];
            for k in curve.kinks() {
                if k > &prefix && k < &hi {
                    cuts.push(k.clone());
                }
            }
            cuts.push(hi.clone());
            for w in cuts.windows(2) {
                let width = &w[1] - &w[0];
                let gain = curve.eval(&w[1]) - curve.eval(&w[0]);
                let x_mass = &width / &agent.value;
                pieces.push(Piece {
                    type_id: *t,
                    agent: id,
                    seq,
                    gain,
                    cost: &agent.cost * &x_mass,
                    x_mass,
                });
                seq += 1;
            }
            prefix = hi;
        }
    }
    pieces.sort_by(denser);
    pieces
}

/// Pieces of one type's agents (already efficiency-sorted), in nested
/// consumption order, which by concavity is also density order.
fn pieces_of_type(t: TypeId, group: &[&Agent], curve: &Pwl, skip: Option<AgentId>) -> Vec<Piece> {
    let mut pieces = Vec::new();
    let mut prefix = Rat::zero();
    let mut seq = 0usize;
    for agent in group {
        if Some(agent.id) == skip || agent.value.is_zero() {
            continue;
        }
        let hi = &prefix + &agent.value;
        let mut cuts: Vec<Rat> = vec![prefix.clone()];
        for k in curve.kinks() {
            if k > &prefix && k < &hi {
                cuts.push(k.clone());
            }
        }
        cuts.push(hi.clone());
        for w in cuts.windows(2) {
            let width = &w[1] - &w[0];
            let gain = curve.eval(&w[1]) - curve.eval(&w[0]);
            let x_mass = &width / &agent.value;
            pieces.push(Piece {
                type_id: t,
                agent: agent.id,
                seq,
                gain,
                cost: &agent.cost * &x_mass,
                x_mass,
            });
            seq += 1;
        }
        prefix = hi;
    }
    pieces
}

/// Leave-one-out evaluator: per-type piece lists are built once; excluding
/// an agent rebuilds only its own type, and the lists merge by density.
pub(crate) struct ConcaveEvaluator<'a> {
    groups: BTreeMap<TypeId, Vec<&'a Agent>>,
    full: BTreeMap<TypeId, Vec<Piece>>,
    curves: &'a BTreeMap<TypeId, Pwl>,
}

impl<'a> ConcaveEvaluator<'a> {
    pub fn new(
        agents: &'a [Agent],
        curves: &'a BTreeMap<TypeId, Pwl>,
    ) -> Result<ConcaveEvaluator<'a>, OracleError> {
        let mut groups: BTreeMap<TypeId, Vec<&Agent>> = BTreeMap::new();
        for agent in agents {
            let t = agent.type_id.ok_or(OracleError::MissingType(agent.id))?;
            groups.entry(t).or_default().push(agent);
        }
        let mut full = BTreeMap::new();
        for (t, group) in groups.iter_mut() {
            let curve = curves.get(t).ok_or(OracleError::MissingValuation(*t))?;
            group.sort_by(|a, b| super::eff_cmp(a, b));
            full.insert(*t, pieces_of_type(*t, group, curve, None));
        }
        Ok(ConcaveEvaluator { groups, full, curves })
    }

    /// Objective value of the piece greedy, optionally without one agent.
    pub fn value_excluding(&self, budget: &Rat, skip: Option<AgentId>) -> Rat {
        let rebuilt: Option<(TypeId, Vec<Piece>)> = skip.and_then(|id| {
            self.groups.iter().find_map(|(t, group)| {
                group.iter().any(|a| a.id == id).then(|| {
                    (*t, pieces_of_type(*t, group, &self.curves[t], Some(id)))
                })
            })
        });
        let lists: Vec<&[Piece]> = self
            .full
            .iter()
            .map(|(t, pieces)| match &rebuilt {
                Some((rt, replacement)) if rt == t => replacement.as_slice(),
                _ => pieces.as_slice(),
            })
            .collect();
        // k-way merge in density order; each list is already sorted.
        let mut heads = vec![0usize; lists.len()];
        let mut budget_left = budget.clone();
        let mut value = Rat::zero();
        loop {
            let mut best: Option<usize> = None;
            for (li, list) in lists.iter().enumerate() {
                if heads[li] >= list.len() {
                    continue;
                }
                match best {
                    None => best = Some(li),
                    Some(bi) => {
                        if denser(&list[heads[li]], &lists[bi][heads[bi]])
                            == std::cmp::Ordering::Less
                        {
                            best = Some(li);
                        }
                    }
                }
            }
            let Some(li) = best else { break };
            let piece = &lists[li][heads[li]];
            heads[li] += 1;
            if !piece.gain.is_positive() {
                continue;
            }
            if piece.cost.is_zero() || piece.cost <= budget_left {
                budget_left -= &piece.cost;
                value += &piece.gain;
            } else {
                if budget_left.is_positive() {
                    value += &piece.gain * &budget_left / &piece.cost;
                }
                break;
            }
        }
        value
    }
}

/// Objective value of the piece greedy over the agents, optionally skipping
/// one; convenience wrapper over the evaluator.
pub(crate) fn greedy_value_concave(
    agents: &[Agent],
    budget: &Rat,
    curves: &BTreeMap<TypeId, Pwl>,
    skip: Option<AgentId>,
) -> Result<Rat, OracleError> {
    Ok(ConcaveEvaluator::new(agents, curves)?.value_excluding(budget, skip))
}

/// Optimum of the concave program with the canonical per-type prefix
/// structure: at most one agent of each type is fractionally selected.
pub fn opt_concave(
    agents: &[Agent],
    budget: &Rat,
    curves: &BTreeMap<TypeId, Pwl>,
) -> Result<ConcaveOptSolution, OracleError> {
    let by_id: BTreeMap<AgentId, &Agent> = agents.iter().map(|a| (a.id, a)).collect();
    let per_type_order = type_orders(agents)?;
    for t in per_type_order.keys() {
        if !curves.contains_key(t) {
            return Err(OracleError::MissingValuation(*t));
        }
    }

    let pieces = build_pieces(&per_type_order, &by_id, curves);

    let mut x: BTreeMap<AgentId, Rat> = agents.iter().map(|a| (a.id, Rat::zero())).collect();
    let mut remaining = budget.clone();
    for piece in &pieces {
        if !piece.gain.is_positive() {
            break; // density-sorted: nothing of value remains
        }
        let take = if piece.cost.is_zero() {
            Rat::one()
        } else if piece.cost <= remaining {
            Rat::one()
        } else {
            &remaining / &piece.cost
        };
        if take.is_zero() {
            break;
        }
        remaining -= &piece.cost * &take;
        *x.get_mut(&piece.agent).unwrap() += &piece.x_mass * &take;
        if take < Rat::one() {
            break;
        }
    }

    normalize_fractional(&mut x, &per_type_order, &by_id);

    // Marginal values at the optimum prefix and at the full prefix.
    let mut v_star: Vec<(AgentId, Rat)> = Vec::with_capacity(agents.len());
    let mut v_hat: Vec<(AgentId, Rat)> = Vec::with_capacity(agents.len());
    let mut value = Rat::zero();
    for (t, order) in &per_type_order {
        let curve = &curves[t];
        let mut star_prefix = Rat::zero();
        let mut full_prefix = Rat::zero();
        for &id in order {
            let agent = by_id[&id];
            let star_next = &star_prefix + &agent.value * &x[&id];
            let full_next = &full_prefix + &agent.value;
            v_star.push((id, curve.eval(&star_next) - curve.eval(&star_prefix)));
            v_hat.push((id, curve.eval(&full_next) - curve.eval(&full_prefix)));
            star_prefix = star_next;
            full_prefix = full_next;
        }
        value += curve.eval(&star_prefix);
    }
    v_star.sort_by_key(|(id, _)| *id);
    v_hat.sort_by_key(|(id, _)| *id);
    let mut x_star: Vec<(AgentId, Rat)> = x.into_iter().collect();
    x_star.sort_by_key(|(id, _)| *id);

    Ok(ConcaveOptSolution { value, x_star, v_star, v_hat, per_type_order })
}

/// Re-establishes the per-type prefix structure: each type's value mass is
/// redistributed onto its most efficient agents, leaving at most one
/// fractional agent. Value is preserved exactly; cost can only decrease.
fn normalize_fractional(
    x: &mut BTreeMap<AgentId, Rat>,
    per_type_order: &BTreeMap<TypeId, Vec<AgentId>>,
    by_id: &BTreeMap<AgentId, &Agent>,
) {
    for order in per_type_order.values() {
        let mut mass: Rat = order
            .iter()
            .map(|id| &by_id[id].value * &x[id])
            .sum();
        for &id in order {
            let agent = by_id[&id];
            if agent.value.is_zero() {
                continue;
            }
            let fill = (&mass / &agent.value).min(Rat::one());
            mass -= &agent.value * &fill;
            x.insert(id, fill);
        }
        debug_assert!(mass.is_zero());
    }
}

pub fn opt_concave_excl(
    agents: &[Agent],
    budget: &Rat,
    curves: &BTreeMap<TypeId, Pwl>,
    excluded: AgentId,
) -> Result<Rat, OracleError> {
    greedy_value_concave(agents, budget, curves, Some(excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, rint};
    use crate::oracle::{opt_capped, opt_linear};

    fn typed(agents: Vec<(i64, i64, usize)>) -> Vec<Agent> {
        agents
            .into_iter()
            .enumerate()
            .map(|(id, (v, c, t))| Agent { id, value: rint(v), cost: rint(c), type_id: Some(t) })
            .collect()
    }

    fn identity() -> Pwl {
        Pwl::from_valuation(&TypeValuation::PiecewiseConcave {
            breakpoints: vec![(rint(0), rint(0)), (rint(1_000_000), rint(1_000_000))],
        })
    }

    fn bent() -> Pwl {
        // slope 1 up to 5, then slope 1/2
        Pwl::from_valuation(&TypeValuation::PiecewiseConcave {
            breakpoints: vec![(rint(0), rint(0)), (rint(5), rint(5)), (rint(7), rint(6))],
        })
    }

    #[test]
    fn identity_matches_linear() {
        let agents = typed(vec![(6, 2, 0), (4, 4, 0), (5, 10, 0)]);
        let curves = BTreeMap::from([(0, identity())]);
        let sol = opt_concave(&agents, &rint(10), &curves).unwrap();
        let linear = opt_linear(&agents, &rint(10));
        assert_eq!(sol.value, linear.value);
        for (id, x) in &sol.x_star {
            assert_eq!(x, &linear.x_of(*id));
            assert_eq!(sol.v_star_of(*id), &by_value(&agents, *id) * x);
            assert_eq!(sol.v_hat_of(*id), by_value(&agents, *id));
        }
    }

    fn by_value(agents: &[Agent], id: AgentId) -> Rat {
        agents.iter().find(|a| a.id == id).unwrap().value.clone()
    }

    #[test]
    fn bent_curve_marginals() {
        let agents = typed(vec![(5, 2, 0), (5, 2, 0), (5, 2, 0)]);
        let curves = BTreeMap::from([(0, bent())]);
        let sol = opt_concave(&agents, &rint(6), &curves).unwrap();
        assert!(sol.x_star.iter().all(|(_, x)| x == &rint(1)));
        assert_eq!(sol.value, rint(10)); // l(15) = 5 + 10/2
        assert_eq!(sol.v_star_of(0), rint(5));
        assert_eq!(sol.v_star_of(1), rat(5, 2));
        assert_eq!(sol.v_star_of(2), rat(5, 2));
        assert_eq!(sol.v_hat_of(0), rint(5));
        assert_eq!(sol.v_hat_of(1), rat(5, 2));
        assert_eq!(sol.v_hat_of(2), rat(5, 2));
    }

    #[test]
    fn caps_encoded_as_pwl_match_capped_oracle() {
        let agents = typed(vec![(4, 2, 0), (4, 2, 0), (4, 2, 0), (4, 4, 1), (4, 4, 1)]);
        let caps = BTreeMap::from([(0, rint(6)), (1, rint(8))]);
        let curves: BTreeMap<TypeId, Pwl> = caps
            .iter()
            .map(|(t, cap)| {
                (*t, Pwl::from_valuation(&TypeValuation::LinearCap { cap: cap.clone() }))
            })
            .collect();
        let concave = opt_concave(&agents, &rint(10), &curves).unwrap();
        let capped = opt_capped(&agents, &rint(10), &caps).unwrap();
        assert_eq!(concave.value, capped.opt.value);
        for (id, x) in &concave.x_star {
            assert_eq!(x, &capped.opt.x_of(*id), "agent {id}");
        }
    }

    #[test]
    fn budget_stops_inside_a_piece() {
        let agents = typed(vec![(5, 2, 0), (5, 2, 0), (5, 2, 0)]);
        let curves = BTreeMap::from([(0, bent())]);
        let sol = opt_concave(&agents, &rint(3), &curves).unwrap();
        // One full agent (cost 2) plus half of the second.
        assert_eq!(sol.x_of(0), rint(1));
        assert_eq!(sol.x_of(1), rat(1, 2));
        assert_eq!(sol.x_of(2), rint(0));
        // l(7.5) = 5 + 2.5/2
        assert_eq!(sol.value, rat(25, 4));
        // at most one fractional agent
        let fractional = sol
            .x_star
            .iter()
            .filter(|(_, x)| x.is_positive() && x < &rint(1))
            .count();
        assert_eq!(fractional, 1);
    }

    #[test]
    fn sum_of_marginals_equals_value() {
        let agents = typed(vec![(5, 2, 0), (3, 2, 0), (4, 3, 1), (2, 1, 1)]);
        let curves = BTreeMap::from([(0, bent()), (1, identity())]);
        let sol = opt_concave(&agents, &rint(5), &curves).unwrap();
        let total: Rat = sol.v_star.iter().map(|(_, v)| v.clone()).sum();
        assert_eq!(total, sol.value);
        // x* . v_hat <= v_star pointwise
        for (id, x) in &sol.x_star {
            assert!(x * sol.v_hat_of(*id) <= sol.v_star_of(*id), "agent {id}");
        }
    }

    #[test]
    fn normalization_rebuilds_prefixes() {
        let agents = typed(vec![(4, 2, 0), (4, 3, 0), (4, 4, 0)]);
        let by_id: BTreeMap<AgentId, &Agent> = agents.iter().map(|a| (a.id, a)).collect();
        let per_type_order = type_orders(&agents).unwrap();
        // Hand-built allocation with two fractional agents of one type.
        let mut x = BTreeMap::from([(0, rat(1, 2)), (1, rat(1, 2)), (2, rint(0))]);
        normalize_fractional(&mut x, &per_type_order, &by_id);
        assert_eq!(x[&0], rint(1));
        assert_eq!(x[&1], rint(0));
        assert_eq!(x[&2], rint(0));
    }

    #[test]
    fn solve_gain_walks_kinks() {
        let curve = bent();
        assert_eq!(curve.solve_gain(&rint(0), &rint(5)), Some(rint(5)));
        assert_eq!(curve.solve_gain(&rint(0), &rat(11, 2)), Some(rint(6)));
        assert_eq!(curve.solve_gain(&rint(4), &rint(2)), Some(rint(7)));
        let capped = Pwl::from_valuation(&TypeValuation::LinearCap { cap: rint(3) });
        assert_eq!(capped.solve_gain(&rint(0), &rint(4)), None);
    }
}
