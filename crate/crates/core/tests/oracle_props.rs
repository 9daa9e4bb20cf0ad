//! Property tests for the fractional-optimum oracles, checked against
//! independent enumeration oracles and the exact prefix inequalities.

use budgetmech::instance::{Agent, Instance, TypeValuation};
use budgetmech::num::{rat, rint, Rat};
use budgetmech::oracle::{
    efficiency_order, opt_capped, opt_concave, opt_linear, opt_linear_excl, Pwl,
};
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn small_rat() -> impl Strategy<Value = Rat> {
    (1i64..=32, prop_oneof![Just(1i64), Just(2), Just(4)]).prop_map(|(n, d)| rat(n, d))
}

fn agents_strategy(max_n: usize) -> impl Strategy<Value = Vec<(Rat, Rat)>> {
    prop::collection::vec((small_rat(), small_rat()), 1..=max_n)
}

fn to_agents(pairs: &[(Rat, Rat)]) -> Vec<Agent> {
    Instance::plain(rint(1), pairs.to_vec()).agents
}

/// Independent oracle: the best feasible value over prefixes of the
/// efficiency order plus a fractional extension of the next agent.
fn prefix_enumeration_opt(agents: &[Agent], budget: &Rat) -> Rat {
    let order = efficiency_order(agents);
    let by_id: BTreeMap<usize, &Agent> = agents.iter().map(|a| (a.id, a)).collect();
    let mut best = Rat::zero();
    for m in 0..=order.len() {
        let prefix: Vec<&Agent> = order[..m].iter().map(|id| by_id[id]).collect();
        let cost: Rat = prefix.iter().map(|a| a.cost.clone()).sum();
        if &cost > budget {
            continue;
        }
        let value: Rat = prefix.iter().map(|a| a.value.clone()).sum();
        if value > best {
            best = value.clone();
        }
        if m < order.len() {
            let next = by_id[&order[m]];
            let frac = if next.cost.is_zero() {
                Rat::one()
            } else {
                ((budget - &cost) / &next.cost).min(Rat::one())
            };
            let extended = value + &next.value * frac;
            if extended > best {
                best = extended;
            }
        }
    }
    best
}

/// Second independent oracle: all subsets taken fully plus the best
/// fractional extension; the fractional-knapsack optimum is the max.
fn subset_enumeration_opt(agents: &[Agent], budget: &Rat) -> Rat {
    let n = agents.len();
    let mut best = Rat::zero();
    for mask in 0u32..(1 << n) {
        let mut cost = Rat::zero();
        let mut value = Rat::zero();
        for (i, agent) in agents.iter().enumerate() {
            if mask & (1 << i) != 0 {
                cost += &agent.cost;
                value += &agent.value;
            }
        }
        if &cost > budget {
            continue;
        }
        if value > best {
            best = value.clone();
        }
        for (i, agent) in agents.iter().enumerate() {
            if mask & (1 << i) == 0 {
                let frac = if agent.cost.is_zero() {
                    Rat::one()
                } else {
                    ((budget - &cost) / &agent.cost).min(Rat::one())
                };
                let extended = &value + &agent.value * frac;
                if extended > best {
                    best = extended;
                }
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn linear_matches_prefix_enumeration(
        pairs in agents_strategy(8),
        budget in small_rat(),
    ) {
        let agents = to_agents(&pairs);
        let sol = opt_linear(&agents, &budget);
        prop_assert_eq!(sol.value, prefix_enumeration_opt(&agents, &budget));
    }

    #[test]
    fn linear_matches_subset_enumeration(
        pairs in agents_strategy(7),
        budget in small_rat(),
    ) {
        let agents = to_agents(&pairs);
        let sol = opt_linear(&agents, &budget);
        prop_assert_eq!(sol.value, subset_enumeration_opt(&agents, &budget));
    }

    #[test]
    fn solution_is_feasible_prefix(
        pairs in agents_strategy(8),
        budget in small_rat(),
    ) {
        let agents = to_agents(&pairs);
        let sol = opt_linear(&agents, &budget);
        // budget holds exactly
        let spent: Rat = agents.iter().map(|a| &a.cost * sol.x_of(a.id)).sum();
        prop_assert!(spent <= budget);
        // value matches the allocation
        let value: Rat = agents.iter().map(|a| &a.value * sol.x_of(a.id)).sum();
        prop_assert_eq!(&value, &sol.value);
        // at most one strictly fractional agent
        let fractional = sol.x.iter().filter(|(_, x)| x.is_positive() && x < &Rat::one()).count();
        prop_assert!(fractional <= 1);
    }

    #[test]
    fn excl_equals_removal(
        pairs in agents_strategy(6),
        budget in small_rat(),
        pick in 0usize..6,
    ) {
        let agents = to_agents(&pairs);
        let excluded = pick % agents.len();
        let rest: Vec<Agent> = agents.iter().filter(|a| a.id != excluded).cloned().collect();
        prop_assert_eq!(
            opt_linear_excl(&agents, &budget, excluded),
            opt_linear(&rest, &budget).value
        );
    }

    // (c_k / v_k) (1 - alpha) opt <= B, with k the first index whose optimal
    // prefix value reaches alpha opt.
    #[test]
    fn prefix_threat_floor_inequality(
        pairs in agents_strategy(8),
        budget in small_rat(),
        alpha_num in 1i64..=10,
    ) {
        let agents = to_agents(&pairs);
        let alpha = rat(alpha_num, 10);
        let sol = opt_linear(&agents, &budget);
        if sol.value.is_zero() { return Ok(()); }
        let target = &alpha * &sol.value;
        let mut prefix = Rat::zero();
        for id in &sol.order {
            let agent = &agents[*id];
            prefix += &agent.value * sol.x_of(*id);
            if prefix >= target {
                let lhs = &agent.cost * (Rat::one() - &alpha) * &sol.value;
                let rhs = &budget * &agent.value;
                prop_assert!(lhs <= rhs, "agent {}: {} > {}", id, lhs, rhs);
                break;
            }
        }
    }

    // Prefix cost of the alpha-fraction of x*: sum c_i x_i <= alpha B.
    #[test]
    fn prefix_cost_inequality(
        pairs in agents_strategy(8),
        budget in small_rat(),
        alpha_num in 1i64..=10,
    ) {
        let agents = to_agents(&pairs);
        let alpha = rat(alpha_num, 10);
        let sol = opt_linear(&agents, &budget);
        if sol.value.is_zero() { return Ok(()); }
        let target = &alpha * &sol.value;
        let mut value = Rat::zero();
        let mut cost = Rat::zero();
        for id in &sol.order {
            let agent = &agents[*id];
            let step = &agent.value * sol.x_of(*id);
            if &value + &step >= target {
                if !agent.value.is_zero() {
                    cost += &agent.cost * (&target - &value) / &agent.value;
                }
                prop_assert!(&cost <= &(&alpha * &budget), "{} > alpha B", cost);
                break;
            }
            cost += &agent.cost * sol.x_of(*id);
            value += step;
        }
    }
}

fn typed_agents(pairs: &[(Rat, Rat)], types: usize) -> Vec<Agent> {
    let mut agents = to_agents(pairs);
    for (i, agent) in agents.iter_mut().enumerate() {
        agent.type_id = Some(i % types);
    }
    agents
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // The capped greedy self-certifies; this re-checks it never errors and
    // obeys caps and budget exactly, and collapses to the linear oracle
    // when caps cannot bind.
    #[test]
    fn capped_certificate_and_slack_collapse(
        pairs in agents_strategy(10),
        budget in small_rat(),
        caps_num in prop::collection::vec(0i64..=50, 3),
    ) {
        let types = 3.min(pairs.len());
        let agents = typed_agents(&pairs, types);
        let caps: BTreeMap<usize, Rat> =
            (0..types).map(|t| (t, rint(caps_num[t]))).collect();
        let sol = opt_capped(&agents, &budget, &caps).unwrap();
        for (t, consumed) in &sol.value_by_type {
            prop_assert!(consumed <= &caps[t]);
        }
        let spent: Rat = agents.iter().map(|a| &a.cost * sol.opt.x_of(a.id)).sum();
        prop_assert!(spent <= budget);

        let total: Rat = pairs.iter().map(|(v, _)| v.clone()).sum();
        let slack: BTreeMap<usize, Rat> = (0..types).map(|t| (t, &total + rint(1))).collect();
        let relaxed = opt_capped(&agents, &budget, &slack).unwrap();
        let linear = opt_linear(&agents, &budget);
        prop_assert_eq!(relaxed.opt.value, linear.value);
        prop_assert_eq!(relaxed.opt.x, linear.x);
    }

    // Identity valuations collapse the concave program to the linear one;
    // marginal values sum to the objective and x* v-hat <= v*.
    #[test]
    fn concave_identity_collapse_and_marginals(
        pairs in agents_strategy(8),
        budget in small_rat(),
    ) {
        let agents = typed_agents(&pairs, 1);
        let identity = Pwl::from_valuation(&TypeValuation::PiecewiseConcave {
            breakpoints: vec![(rint(0), rint(0)), (rint(1), rint(1))],
        });
        let curves = BTreeMap::from([(0usize, identity)]);
        let sol = opt_concave(&agents, &budget, &curves).unwrap();
        let linear = opt_linear(&agents, &budget);
        prop_assert_eq!(&sol.value, &linear.value);
        for agent in &agents {
            prop_assert_eq!(sol.x_of(agent.id), linear.x_of(agent.id));
        }
        let total: Rat = sol.v_star.iter().map(|(_, v)| v.clone()).sum();
        prop_assert_eq!(&total, &sol.value);
        for agent in &agents {
            prop_assert!(sol.x_of(agent.id) * sol.v_hat_of(agent.id) <= sol.v_star_of(agent.id));
        }
    }

    // Piecewise-concave instances: budget feasibility, per-type prefix
    // structure with at most one fractional agent, and marginal-sum
    // consistency.
    #[test]
    fn concave_structure(
        pairs in agents_strategy(8),
        budget in small_rat(),
        widths in prop::collection::vec((1i64..=8, 1i64..=4), 2),
    ) {
        let types = 2.min(pairs.len());
        let agents = typed_agents(&pairs, types);
        let mut curves = BTreeMap::new();
        for t in 0..types {
            let (w, s) = (rint(widths[t].0), rint(widths[t].1));
            curves.insert(
                t,
                Pwl::from_valuation(&TypeValuation::PiecewiseConcave {
                    breakpoints: vec![
                        (Rat::zero(), Rat::zero()),
                        (w.clone(), &s * &w),
                        (&w + rint(4), &s * &w + rint(2)),
                    ],
                }),
            );
        }
        let sol = opt_concave(&agents, &budget, &curves).unwrap();
        let spent: Rat = agents.iter().map(|a| &a.cost * sol.x_of(a.id)).sum();
        prop_assert!(spent <= budget);
        let total: Rat = sol.v_star.iter().map(|(_, v)| v.clone()).sum();
        prop_assert_eq!(&total, &sol.value);
        for order in sol.per_type_order.values() {
            let mut seen_partial = false;
            let mut fractional = 0;
            for id in order {
                let x = sol.x_of(*id);
                if seen_partial {
                    prop_assert!(x.is_zero(), "prefix structure violated");
                }
                if x < Rat::one() {
                    seen_partial = true;
                }
                if x.is_positive() && x < Rat::one() {
                    fractional += 1;
                }
            }
            prop_assert!(fractional <= 1);
        }
    }
}

#[test]
fn instance_roundtrip_property() {
    // serialize . parse = identity over generated instances
    use budgetmech::gen::{gen_random, Profile};
    for seed in 0..50 {
        for profile in [
            Profile::Plain,
            Profile::Theta(rat(3, 2)),
            Profile::Capped(2),
            Profile::Concave(3),
        ] {
            let instance = gen_random(seed, 1 + (seed as usize % 8), &profile);
            let text = budgetmech::serialize_instance(&instance);
            let parsed = budgetmech::parse_instance(text.as_bytes()).unwrap();
            assert_eq!(instance, parsed, "{profile:?} seed {seed}");
        }
    }
}
