//! Deterministic random instance generation.
//!
//! Instances are drawn from a seeded ChaCha20 stream, so a (seed, n,
//! profile) triple always reproduces the same instance. All numbers are
//! rationals with small denominators: values in [1, 32] and costs in
//! [1, 24] over denominators {1, 2, 4}, budgets in [8, 40] over {1, 2}.
//! The theta profile derives costs from bounded efficiency ratios so the
//! competitiveness bound holds with the requested theta exactly attainable;
//! the concave profile emits piecewise-linear valuations with at most four
//! breakpoints and strictly decreasing slopes.

use crate::instance::{Instance, TypeValuation};
use crate::num::{rat, rint, Rat};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Profile {
    Plain,
    Theta(Rat),
    Capped(u64),
    Concave(u64),
}

fn small_rat(rng: &mut ChaCha20Rng, max_num: i64, dens: &[i64]) -> Rat {
    let num = rng.gen_range(1..=max_num);
    let den = dens[rng.gen_range(0..dens.len())];
    rat(num, den)
}

/// Deterministic instance generation; panics on n = 0 or invalid profile
/// parameters (theta < 1, zero types).
pub fn gen_random(seed: u64, n: usize, profile: &Profile) -> Instance {
    assert!(n >= 1, "need at least one agent");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    match profile {
        Profile::Plain => gen_plain(&mut rng, n),
        Profile::Theta(theta) => {
            assert!(theta >= &rint(1), "theta must be at least 1");
            gen_theta(&mut rng, n, theta)
        }
        Profile::Capped(t) => {
            assert!(*t >= 1, "need at least one type");
            gen_typed(&mut rng, n, *t as usize, false)
        }
        Profile::Concave(t) => {
            assert!(*t >= 1, "need at least one type");
            gen_typed(&mut rng, n, *t as usize, true)
        }
    }
}

fn gen_budget(rng: &mut ChaCha20Rng) -> Rat {
    let num = rng.gen_range(8..=40);
    let den = [1i64, 2][rng.gen_range(0..2)];
    rat(num, den)
}

fn gen_agents(rng: &mut ChaCha20Rng, n: usize) -> Vec<(Rat, Rat)> {
    (0..n)
        .map(|_| {
            let v = small_rat(rng, 32, &[1, 2, 4]);
            let c = small_rat(rng, 24, &[1, 2, 4]);
            (v, c)
        })
        .collect()
}

fn gen_plain(rng: &mut ChaCha20Rng, n: usize) -> Instance {
    let budget = gen_budget(rng);
    Instance::plain(budget, gen_agents(rng, n))
}

fn gen_theta(rng: &mut ChaCha20Rng, n: usize, theta: &Rat) -> Instance {
    // Efficiencies e_i = base * r_i with r_i on a grid in [1, theta]; the
    // first two agents pin the endpoints so the ratio is attained exactly.
    let base = small_rat(rng, 8, &[1, 2]);
    let mut agents = Vec::with_capacity(n);
    let mut max_cost = Rat::from_integer(0.into());
    for i in 0..n {
        let v = small_rat(rng, 32, &[1, 2, 4]);
        let step = match i {
            0 => rint(0),
            1 => rint(8),
            _ => rint(rng.gen_range(0..=8)),
        };
        let ratio = rint(1) + (theta - rint(1)) * step / rint(8);
        let eff = &base * ratio;
        let c = &v / eff;
        if c > max_cost {
            max_cost = c.clone();
        }
        agents.push((v, c));
    }
    // budget at or above every cost, so all agents stay eligible
    let scale = [rat(1, 1), rat(3, 2), rat(2, 1)][rng.gen_range(0..3)].clone();
    let mut instance = Instance::plain(max_cost * scale, agents);
    instance.theta = Some(theta.clone());
    debug_assert!(instance.errors().is_empty());
    instance
}

fn gen_typed(rng: &mut ChaCha20Rng, n: usize, t: usize, concave: bool) -> Instance {
    let budget = gen_budget(rng);
    let mut instance = Instance::plain(budget, gen_agents(rng, n));
    for (i, agent) in instance.agents.iter_mut().enumerate() {
        // the first t agents cover all types, the rest draw uniformly
        let type_id = if i < t { i } else { rng.gen_range(0..t) };
        agent.type_id = Some(type_id);
    }
    let mut valuations = BTreeMap::new();
    for type_id in 0..t {
        let valuation = if concave {
            gen_concave_valuation(rng)
        } else {
            TypeValuation::LinearCap { cap: small_rat(rng, 40, &[1, 2]) }
        };
        valuations.insert(type_id, valuation);
    }
    instance.type_valuations = Some(valuations);
    debug_assert!(instance.errors().is_empty());
    instance
}

fn gen_concave_valuation(rng: &mut ChaCha20Rng) -> TypeValuation {
    let segments = rng.gen_range(1..=3);
    let mut slope = small_rat(rng, 8, &[1, 2]) + rint(1);
    let mut x = Rat::from_integer(0.into());
    let mut y = Rat::from_integer(0.into());
    let mut breakpoints = vec![(x.clone(), y.clone())];
    for _ in 0..segments {
        let width = rint(rng.gen_range(2..=10));
        x += &width;
        y += &slope * &width;
        breakpoints.push((x.clone(), y.clone()));
        // strictly decreasing slopes
        slope = slope * [rat(1, 2), rat(2, 3), rat(3, 4)][rng.gen_range(0..3)].clone();
    }
    TypeValuation::PiecewiseConcave { breakpoints }
}
