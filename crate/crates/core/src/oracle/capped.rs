//! The capped-linear program: fractional knapsack where each type's
//! accumulated value is capped at M_j, with the cap constraint enforced on
//! the allocation itself (no budget is spent past a cap).
//!
//! Solved greedily in efficiency order with per-type truncation. Instead of
//! trusting the greedy, every call constructs dual multipliers (lambda for
//! the budget, mu_j per cap) and verifies complementary slackness exactly;
//! a failure is reported as an error, never ignored.

use super::{efficiency_order, OracleError, OptSolution};
use crate::instance::{Agent, AgentId, TypeId};
use crate::num::Rat;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualCertificate {
    pub lambda: Rat,
    pub mu: BTreeMap<TypeId, Rat>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CappedSolution {
    pub opt: OptSolution,
    /// Accumulated value per type, V_j <= M_j exactly.
    pub value_by_type: BTreeMap<TypeId, Rat>,
    pub certificate: DualCertificate,
}

struct GreedyRun {
    x: BTreeMap<AgentId, Rat>,
    value_by_type: BTreeMap<TypeId, Rat>,
    budget_left: Rat,
    /// Fractional agent limited strictly by the budget, if any.
    budget_marginal: Option<AgentId>,
    /// Per type: fractional agent limited by the cap (including ties with
    /// the budget, which behave as cap-limited for the certificate).
    cap_marginal: BTreeMap<TypeId, AgentId>,
    order: Vec<AgentId>,
}

fn greedy(agents: &[Agent], budget: &Rat, caps: &BTreeMap<TypeId, Rat>) -> Result<GreedyRun, OracleError> {
    let order = efficiency_order(agents);
    let by_id: BTreeMap<AgentId, &Agent> = agents.iter().map(|a| (a.id, a)).collect();
    let mut cap_left: BTreeMap<TypeId, Rat> = BTreeMap::new();
    for agent in agents {
        let t = agent.type_id.ok_or(OracleError::MissingType(agent.id))?;
        let cap = caps.get(&t).ok_or(OracleError::MissingValuation(t))?;
        cap_left.entry(t).or_insert_with(|| cap.clone());
    }
    let mut run = GreedyRun {
        x: agents.iter().map(|a| (a.id, Rat::zero())).collect(),
        value_by_type: cap_left.keys().map(|t| (*t, Rat::zero())).collect(),
        budget_left: budget.clone(),
        budget_marginal: None,
        cap_marginal: BTreeMap::new(),
        order: order.clone(),
    };
    for &id in &order {
        let agent = by_id[&id];
        let t = agent.type_id.unwrap();
        if agent.value.is_zero() && agent.cost.is_positive() {
            continue;
        }
        let from_budget = if agent.cost.is_zero() {
            Rat::one()
        } else {
            (&run.budget_left / &agent.cost).min(Rat::one())
        };
        let from_cap = if agent.value.is_zero() {
            Rat::one()
        } else {
            (&cap_left[&t] / &agent.value).min(Rat::one())
        };
        let x = from_budget.clone().min(from_cap.clone());
        if x.is_positive() {
            run.budget_left -= &agent.cost * &x;
            *cap_left.get_mut(&t).unwrap() -= &agent.value * &x;
            *run.value_by_type.get_mut(&t).unwrap() += &agent.value * &x;
            run.x.insert(id, x.clone());
        }
        if x < Rat::one() && x.is_positive() {
            if from_budget < from_cap {
                run.budget_marginal = Some(id);
            } else {
                run.cap_marginal.insert(t, id);
            }
        }
    }
    Ok(run)
}

fn build_certificate(
    agents: &[Agent],
    caps: &BTreeMap<TypeId, Rat>,
    run: &GreedyRun,
) -> DualCertificate {
    let by_id: BTreeMap<AgentId, &Agent> = agents.iter().map(|a| (a.id, a)).collect();
    let cap_tight: BTreeMap<TypeId, bool> = run
        .value_by_type
        .iter()
        .map(|(t, v)| (*t, v == &caps[t]))
        .collect();
    let budget_tight = run.budget_left.is_zero();
    let lambda = if let Some(m) = run.budget_marginal {
        let a = by_id[&m];
        &a.value / &a.cost
    } else if budget_tight {
        // Tight at an agent boundary: the highest efficiency among agents
        // blocked by the budget alone (their type cap still has room).
        agents
            .iter()
            .filter(|a| {
                run.x[&a.id].is_zero()
                    && a.value.is_positive()
                    && a.cost.is_positive()
                    && !cap_tight[&a.type_id.unwrap()]
            })
            .map(|a| &a.value / &a.cost)
            .max()
            .unwrap_or_else(Rat::zero)
    } else {
        Rat::zero()
    };
    let mut mu = BTreeMap::new();
    for (t, tight) in &cap_tight {
        if !tight {
            mu.insert(*t, Rat::zero());
            continue;
        }
        let value = if let Some(&m) = run.cap_marginal.get(t) {
            let a = by_id[&m];
            // stationarity for the cap-limited fractional agent
            Rat::one() - &lambda * &a.cost / &a.value
        } else {
            agents
                .iter()
                .filter(|a| {
                    a.type_id == Some(*t) && run.x[&a.id].is_zero() && a.value.is_positive()
                })
                .map(|a| Rat::one() - &lambda * &a.cost / &a.value)
                .max()
                .unwrap_or_else(Rat::zero)
                .max(Rat::zero())
        };
        mu.insert(*t, value);
    }
    DualCertificate { lambda, mu }
}

/// Exact complementary-slackness verification of a primal/dual pair.
fn verify_certificate(
    agents: &[Agent],
    budget: &Rat,
    caps: &BTreeMap<TypeId, Rat>,
    run: &GreedyRun,
    cert: &DualCertificate,
) -> Result<(), String> {
    if cert.lambda.is_negative() {
        return Err("lambda < 0".into());
    }
    let spent: Rat = agents.iter().map(|a| &a.cost * &run.x[&a.id]).sum();
    if &spent > budget {
        return Err("budget exceeded".into());
    }
    if cert.lambda.is_positive() && &spent != budget {
        return Err("lambda > 0 but budget not tight".into());
    }
    for (t, v) in &run.value_by_type {
        if v > &caps[t] {
            return Err(format!("cap {t} exceeded"));
        }
        let mu = &cert.mu[t];
        if mu.is_negative() {
            return Err(format!("mu_{t} < 0"));
        }
        if mu.is_positive() && v != &caps[t] {
            return Err(format!("mu_{t} > 0 but cap {t} not tight"));
        }
    }
    for agent in agents {
        let x = &run.x[&agent.id];
        if x.is_negative() || x > &Rat::one() {
            return Err(format!("x_{} out of [0,1]", agent.id));
        }
        let mu = &cert.mu[&agent.type_id.unwrap()];
        let slack = &agent.value - &cert.lambda * &agent.cost - mu * &agent.value;
        if x == &Rat::one() && slack.is_negative() {
            return Err(format!("agent {}: fully selected but negative reduced value", agent.id));
        }
        if x.is_zero() && slack.is_positive() {
            return Err(format!("agent {}: unselected but positive reduced value", agent.id));
        }
        if x.is_positive() && x < &Rat::one() && !slack.is_zero() {
            return Err(format!("agent {}: fractional but reduced value nonzero", agent.id));
        }
    }
    Ok(())
}

/// Optimum of the capped-linear program. The returned solution carries the
/// verified dual certificate.
pub fn opt_capped(
    agents: &[Agent],
    budget: &Rat,
    caps: &BTreeMap<TypeId, Rat>,
) -> Result<CappedSolution, OracleError> {
    let run = greedy(agents, budget, caps)?;
    let certificate = build_certificate(agents, caps, &run);
    verify_certificate(agents, budget, caps, &run, &certificate)
        .map_err(OracleError::Certificate)?;
    let value: Rat = run.value_by_type.values().sum();
    let mut x: Vec<(AgentId, Rat)> = run.x.clone().into_iter().collect();
    x.sort_by_key(|(id, _)| *id);
    Ok(CappedSolution {
        opt: OptSolution {
            value,
            x,
            order: run.order.clone(),
            marginal_index: run.budget_marginal,
        },
        value_by_type: run.value_by_type,
        certificate,
    })
}

pub fn opt_capped_excl(
    agents: &[Agent],
    budget: &Rat,
    caps: &BTreeMap<TypeId, Rat>,
    excluded: AgentId,
) -> Result<Rat, OracleError> {
    let mut order: Vec<&Agent> = agents.iter().collect();
    order.sort_by(|a, b| super::eff_cmp(a, b));
    greedy_value_capped(&order, budget, caps, Some(excluded))
}


/// Value of the cap-truncated greedy over pre-sorted agents, optionally
/// skipping one; allocation-light path for leave-one-out optima.
pub(crate) fn greedy_value_capped(
    order: &[&Agent],
    budget: &Rat,
    caps: &BTreeMap<TypeId, Rat>,
    skip: Option<AgentId>,
) -> Result<Rat, OracleError> {
    let mut cap_left: BTreeMap<TypeId, Rat> = BTreeMap::new();
    for agent in order {
        let t = agent.type_id.ok_or(OracleError::MissingType(agent.id))?;
        if !cap_left.contains_key(&t) {
            let cap = caps.get(&t).ok_or(OracleError::MissingValuation(t))?;
            cap_left.insert(t, cap.clone());
        }
    }
    let mut budget_left = budget.clone();
    let mut value = Rat::zero();
    for agent in order {
        if Some(agent.id) == skip {
            continue;
        }
        let t = agent.type_id.unwrap();
        if agent.value.is_zero() && agent.cost.is_positive() {
            continue;
        }
        let from_budget = if agent.cost.is_zero() {
            Rat::one()
        } else {
            (&budget_left / &agent.cost).min(Rat::one())
        };
        let from_cap = if agent.value.is_zero() {
            Rat::one()
        } else {
            (&cap_left[&t] / &agent.value).min(Rat::one())
        };
        let x = from_budget.min(from_cap);
        if x.is_positive() {
            budget_left -= &agent.cost * &x;
            let gained = &agent.value * &x;
            *cap_left.get_mut(&t).unwrap() -= &gained;
            value += gained;
        }
    }
    Ok(value)
}
