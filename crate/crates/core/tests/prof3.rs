use budgetmech::gen::{gen_random, Profile};
use budgetmech::num::Rat;
use budgetmech::oracle::{opt_concave, opt_concave_excl, Pwl};
use budgetmech::instance::TypeValuation;
use std::collections::BTreeMap;
use std::time::Instant;

#[test]
fn prof_con_parts() {
    let instance = gen_random(8, 10, &Profile::Concave(3));
    let curves: BTreeMap<usize, Pwl> = instance
        .type_valuations
        .as_ref()
        .unwrap()
        .iter()
        .map(|(t, v)| (*t, Pwl::from_valuation(v)))
        .collect();
    let b = &instance.budget;
    let t = Instant::now();
    for _ in 0..500 {
        let _ = opt_concave(&instance.agents, b, &curves).unwrap();
    }
    println!("opt_concave full: {:?}", t.elapsed() / 500);
    let t = Instant::now();
    for _ in 0..500 {
        for a in 0..3 {
            let _ = opt_concave_excl(&instance.agents, b, &curves, a).unwrap();
        }
    }
    println!("excl x3: {:?}", t.elapsed() / 500);
}
