//! Cross-cutting mechanism properties on randomized instances: monotone
//! allocation curves, curve/mechanism agreement, and outcome determinism,
//! across all four rules.

use budgetmech::curve::{allocation_curve, mechanism_x_at};
use budgetmech::gen::{gen_random, Profile};
use budgetmech::mechanisms::{allocate, params_default, MechanismKind, ParamsAux};
use budgetmech::num::{rat, rint};
use budgetmech::surd::Surd;

fn kinds_with_instances(seed: u64, n: usize) -> Vec<(budgetmech::Instance, budgetmech::MechanismParams)> {
    vec![
        (
            gen_random(seed, n, &Profile::Plain),
            params_default(MechanismKind::Da, ParamsAux::None).unwrap(),
        ),
        (
            gen_random(seed, n, &Profile::Theta(rat(3, 2))),
            params_default(MechanismKind::DaTheta, ParamsAux::Theta(rat(3, 2))).unwrap(),
        ),
        (
            gen_random(seed, n, &Profile::Capped(2)),
            params_default(MechanismKind::DaCap, ParamsAux::None).unwrap(),
        ),
        (
            gen_random(seed, n, &Profile::Concave(2)),
            params_default(MechanismKind::DaCon, ParamsAux::TypeCount(2)).unwrap(),
        ),
    ]
}

#[test]
fn curves_are_monotone_and_match_the_mechanism() {
    for seed in 0..12u64 {
        let n = 2 + (seed as usize % 4);
        for (instance, params) in kinds_with_instances(seed, n) {
            for agent in 0..instance.n() {
                let curve = allocation_curve(&instance, &params, agent).unwrap();
                for seg in &curve.segments {
                    assert!(
                        seg.is_nonincreasing(),
                        "seed {seed} kind {:?} agent {agent}",
                        params.kind
                    );
                }
                for pair in curve.segments.windows(2) {
                    let boundary = &pair[0].u_hi;
                    assert!(pair[0].value_at(boundary) >= pair[1].value_at(boundary));
                }
                // pointwise sweep against fresh mechanism runs
                for k in 1..16 {
                    let u = &instance.budget * rat(k, 17);
                    let expect = mechanism_x_at(&instance, &params, agent, &u).unwrap();
                    assert_eq!(
                        curve.value_at(&Surd::from_rat(u.clone())),
                        expect,
                        "seed {seed} kind {:?} agent {agent} at u = {u}",
                        params.kind
                    );
                }
            }
        }
    }
}

#[test]
fn declared_cost_sweeps_never_increase_allocation() {
    for seed in 0..12u64 {
        let n = 2 + (seed as usize % 4);
        for (instance, params) in kinds_with_instances(seed + 100, n) {
            for agent in 0..instance.n() {
                let mut prev: Option<Surd> = None;
                for k in 0..=24 {
                    let u = &instance.budget * rat(k, 24);
                    let x = mechanism_x_at(&instance, &params, agent, &u).unwrap();
                    if let Some(p) = &prev {
                        assert!(
                            &x <= p,
                            "seed {seed} kind {:?} agent {agent}: x increased at u = {u}",
                            params.kind
                        );
                    }
                    prev = Some(x);
                }
            }
        }
    }
}

#[test]
fn outcomes_are_deterministic() {
    for seed in [5u64, 17, 40] {
        for (instance, params) in kinds_with_instances(seed, 4) {
            let a = allocate(&instance, &params).unwrap();
            let b = allocate(&instance, &params).unwrap();
            assert_eq!(a, b, "kind {:?}", params.kind);
        }
    }
}

#[test]
fn star_branch_allocates_exactly_one_agent() {
    let instance = budgetmech::Instance::plain(rint(10), vec![(rint(5), rint(4))]);
    let params = params_default(MechanismKind::Da, ParamsAux::None).unwrap();
    let alloc = allocate(&instance, &params).unwrap();
    let winners = alloc.winners();
    assert_eq!(winners.len(), 1);
    assert_eq!(alloc.x[winners[0]], Surd::one());
}
