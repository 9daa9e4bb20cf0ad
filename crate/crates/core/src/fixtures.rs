//! Named benchmark instances: the two-instance families behind the lower
//! bound arguments, the tight family for the plain mechanism, and every
//! hand-worked example used in the unit tests.

use crate::instance::{Instance, TypeValuation};
use crate::num::{rat, rint, Rat};
use std::collections::BTreeMap;

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub instance: Instance,
    /// Known fractional optimum of the instance, when pinned.
    pub expected_opt: Option<Rat>,
}

impl Fixture {
    fn new(name: &str, instance: Instance, expected_opt: Rat) -> Fixture {
        assert!(
            instance.errors().is_empty(),
            "fixture {name} failed validation: {:?}",
            instance.errors()
        );
        Fixture { name: name.to_string(), instance, expected_opt: Some(expected_opt) }
    }
}

/// All named fixtures. Lower-bound instances use B = 1 and epsilon = 1/100.
pub fn fixtures() -> Vec<Fixture> {
    let mut out = Vec::new();

    // Two equal agents priced at the budget: opt = 1.
    out.push(Fixture::new(
        "LB-3-I1",
        Instance::plain(rint(1), vec![(rint(1), rint(1)), (rint(1), rint(1))]),
        rint(1),
    ));
    // One nearly-free agent: opt = 2 - eps/B.
    out.push(Fixture::new(
        "LB-3-I2",
        Instance::plain(rint(1), vec![(rint(1), rat(1, 100)), (rint(1), rint(1))]),
        rat(199, 100),
    ));

    // Competitive-market pairs for theta in {2, 3}: costs theta/(theta+1)
    // and 1/(theta+1) of the budget.
    for theta in [2i64, 3] {
        let heavy = rat(theta, theta + 1);
        let light = rat(1, theta + 1);
        let mut i1 = Instance::plain(rint(1), vec![(rint(1), heavy.clone()), (rint(1), heavy.clone())]);
        i1.theta = Some(rint(theta));
        // one full agent plus 1/theta of the other
        out.push(Fixture::new(
            &format!("LB-4-I1(theta={theta})"),
            i1,
            rint(1) + rat(1, theta),
        ));
        let mut i2 = Instance::plain(rint(1), vec![(rint(1), light), (rint(1), heavy)]);
        i2.theta = Some(rint(theta));
        out.push(Fixture::new(&format!("LB-4-I2(theta={theta})"), i2, rint(2)));
    }

    // Tight family: n identical agents with n c = B; opt = n.
    for n in 2..=10usize {
        let agents = vec![(rint(1), Rat::new(1.into(), (n as i64).into())); n];
        out.push(Fixture::new(
            &format!("tight-{n}"),
            Instance::plain(rint(1), agents),
            rint(n as i64),
        ));
    }

    // Hand-worked examples.
    out.push(Fixture::new(
        "five-identical",
        Instance::plain(rint(10), vec![(rint(4), rint(2)); 5]),
        rint(20),
    ));
    out.push(Fixture::new(
        "star-trio",
        Instance::plain(rint(10), vec![(rint(6), rint(2)), (rint(4), rint(4)), (rint(5), rint(10))]),
        rint(12),
    ));
    out.push(Fixture::new(
        "single",
        Instance::plain(rint(10), vec![(rint(5), rint(4))]),
        rint(5),
    ));
    let mut theta_five = Instance::plain(rint(10), vec![(rint(4), rint(2)); 5]);
    theta_five.theta = Some(rint(1));
    out.push(Fixture::new("theta-five", theta_five, rint(20)));

    // Capped worked example: type 0 capped at 6, type 1 at 8.
    let mut capped = Instance::plain(
        rint(10),
        vec![(rint(4), rint(2)), (rint(4), rint(2)), (rint(4), rint(2)), (rint(4), rint(4)), (rint(4), rint(4))],
    );
    for (i, agent) in capped.agents.iter_mut().enumerate() {
        agent.type_id = Some(if i < 3 { 0 } else { 1 });
    }
    capped.type_valuations = Some(BTreeMap::from([
        (0, TypeValuation::LinearCap { cap: rint(6) }),
        (1, TypeValuation::LinearCap { cap: rint(8) }),
    ]));
    out.push(Fixture::new("capped-worked", capped, rint(13)));

    // Concave worked example: slope 1 to 5 then 1/2, three (5, 2) agents.
    let mut concave = Instance::plain(rint(6), vec![(rint(5), rint(2)); 3]);
    for agent in concave.agents.iter_mut() {
        agent.type_id = Some(0);
    }
    concave.type_valuations = Some(BTreeMap::from([(
        0,
        TypeValuation::PiecewiseConcave {
            breakpoints: vec![(rint(0), rint(0)), (rint(5), rint(5)), (rint(7), rint(6))],
        },
    )]));
    out.push(Fixture::new("concave-worked", concave, rint(10)));

    out
}

pub fn fixture(name: &str) -> Option<Fixture> {
    fixtures().into_iter().find(|f| f.name == name)
}

/// Approximation lower bounds for theta-competitive markets, exactly:
/// (5 theta^2 - 1)/(4 theta^2) for the divisible case and 3 - 1/theta for
/// the indivisible case.
pub fn lower_bounds(theta: &Rat) -> (Rat, Rat) {
    let t2 = theta * theta;
    let divisible = (rint(5) * &t2 - rint(1)) / (rint(4) * t2);
    let indivisible = rint(3) - theta.recip();
    (divisible, indivisible)
}
