use budgetmech::gen::{gen_random, Profile};
use budgetmech::mechanisms::{allocate, params_default, MechanismKind, ParamsAux};
use budgetmech::curve::allocation_curve;
use std::time::Instant;

#[test]
fn prof_con() {
    let params = params_default(MechanismKind::DaCon, ParamsAux::TypeCount(3)).unwrap();
    let instance = gen_random(8, 10, &Profile::Concave(3));
    let t = Instant::now();
    for _ in 0..200 {
        let _ = allocate(&instance, &params).unwrap();
    }
    println!("con allocate: {:?}/call", t.elapsed() / 200);
    let t = Instant::now();
    let mut segs = 0;
    for agent in 0..10 {
        let c = allocation_curve(&instance, &params, agent).unwrap();
        segs += c.segments.len();
    }
    println!("con curves: {:?} total, {segs} segments", t.elapsed());

    let cap_params = params_default(MechanismKind::DaCap, ParamsAux::None).unwrap();
    let instance = gen_random(8, 10, &Profile::Capped(3));
    let t = Instant::now();
    for _ in 0..200 {
        let _ = allocate(&instance, &cap_params).unwrap();
    }
    println!("cap allocate: {:?}/call", t.elapsed() / 200);
}
