//! Allocation-curve construction.
//!
//! The curve u -> x_i(u, c_-i) is produced by re-running the allocation
//! rule as a black box at probe points, with analytically seeded candidate
//! breakpoints: efficiency-tie points against every other agent, budget
//! prefix-exhaustion points, the threat crossing, and the budget itself.
//! Between consecutive candidates the value is one of three closed forms
//! (constant, affine, or a + b u + d/u), so it is fitted exactly through
//! three interior samples and verified on two more. A verification
//! mismatch means an event was missed: the interval is bisected, and once
//! two stable forms bracket the event the exact boundary is recovered by
//! intersecting them (continuous events) or isolated down to a
//! 10^-12-of-budget window whose width is charged to the curve's error
//! slack (discontinuous events such as star-branch flips).

use crate::instance::{Agent, AgentId, Efficiency, Instance};
use crate::mechanisms::{MechanismError, MechanismKind, MechanismParams, Prepared};
use crate::num::{rat, Rat};
use crate::payments::{AllocationCurve, Segment};
use crate::surd::{rational_between, Surd};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug)]
pub struct CurveConfig {
    /// Hard cap on produced segments (and refinement intervals).
    pub segment_cap: usize,
    /// Bisection floor, as a fraction of the budget.
    pub floor_scale: Rat,
    /// Width (fraction of budget) below which exact boundary resolution is
    /// attempted before further bisection.
    pub early_scale: Rat,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            segment_cap: 10_000,
            floor_scale: Rat::new(BigInt::one(), BigInt::from(10u64.pow(12))),
            early_scale: rat(1, 1000),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CurveError {
    #[error("curve for agent {agent} exceeded the segment cap {cap}")]
    SegmentCap { agent: AgentId, cap: usize },
    #[error("unresolved interval [{lo}, {hi}] at the refinement floor for agent {agent}")]
    Unresolved { agent: AgentId, lo: String, hi: String },
    #[error("curve construction is inconsistent: {0}")]
    Internal(String),
    #[error(transparent)]
    Mechanism(Box<MechanismError>),
}

impl From<MechanismError> for CurveError {
    fn from(e: MechanismError) -> Self {
        CurveError::Mechanism(Box::new(e))
    }
}

/// x(u) = a + b u + d/u.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Form {
    a: Surd,
    b: Surd,
    d: Surd,
}

impl Form {
    fn constant(v: Surd) -> Form {
        Form { a: v, b: Surd::zero(), d: Surd::zero() }
    }

    fn eval(&self, u: &Surd) -> Surd {
        let mut v = &self.a + &self.b * u;
        if !self.d.is_zero() {
            v = v + &self.d / u;
        }
        v
    }

    fn eval_rat(&self, u: &Rat) -> Surd {
        self.eval(&Surd::from_rat(u.clone()))
    }
}

/// Memoized black-box access to the allocation rule with one agent's cost
/// replaced.
struct Probe<'a> {
    prepared: &'a Prepared<'a>,
    agent: AgentId,
    costs: RefCell<Vec<Rat>>,
    memo: RefCell<BTreeMap<Rat, Rec>>,
    evals: Cell<usize>,
}

#[derive(Clone)]
struct Rec {
    x: Surd,
    opt: Rat,
    tau: Option<Surd>,
}

impl<'a> Probe<'a> {
    fn new(prepared: &'a Prepared<'a>, agent: AgentId) -> Probe<'a> {
        let costs = prepared.instance.agents.iter().map(|a| a.cost.clone()).collect();
        Probe {
            prepared,
            agent,
            costs: RefCell::new(costs),
            memo: RefCell::new(BTreeMap::new()),
            evals: Cell::new(0),
        }
    }

    fn eval(&self, u: &Rat) -> Result<Rec, CurveError> {
        if let Some(rec) = self.memo.borrow().get(u) {
            return Ok(rec.clone());
        }
        self.evals.set(self.evals.get() + 1);
        let alloc = {
            let mut costs = self.costs.borrow_mut();
            costs[self.agent] = u.clone();
            self.prepared.allocate_with(&costs)?
        };
        let tau = alloc
            .diagnostics
            .tau
            .iter()
            .find(|(id, _)| *id == self.agent)
            .map(|(_, t)| t.clone());
        let rec = Rec { x: alloc.x[self.agent].clone(), opt: alloc.diagnostics.opt.clone(), tau };
        self.memo.borrow_mut().insert(u.clone(), rec.clone());
        Ok(rec)
    }

    fn x_at(&self, u: &Rat) -> Result<Surd, CurveError> {
        Ok(self.eval(u)?.x)
    }
}

/// k interior rational sample points in disjoint windows of (lo, hi).
fn sample_points(lo: &Surd, hi: &Surd, k: usize) -> Vec<Rat> {
    let span = hi - lo;
    let denom = 2 * (k as i64) + 2;
    (1..=k)
        .map(|j| {
            let w_lo = lo + &span * Surd::from_rat(rat(2 * j as i64 - 1, denom));
            let w_hi = lo + &span * Surd::from_rat(rat(2 * j as i64 + 1, denom));
            rational_between(&w_lo, &w_hi)
        })
        .collect()
}

/// Probes hard against the interval ends (within span/65536 of each).
fn end_points(lo: &Surd, hi: &Surd) -> (Rat, Rat) {
    let span = hi - lo;
    let near_lo = rational_between(
        &(lo + &span * Surd::from_rat(rat(1, 65536))),
        &(lo + &span * Surd::from_rat(rat(3, 65536))),
    );
    let near_hi = rational_between(
        &(hi - &span * Surd::from_rat(rat(3, 65536))),
        &(hi - &span * Surd::from_rat(rat(1, 65536))),
    );
    (near_lo, near_hi)
}

/// Five interior samples plus one probe hard against each end.
fn sample_points_with_ends(lo: &Surd, hi: &Surd) -> Vec<Rat> {
    let (near_lo, near_hi) = end_points(lo, hi);
    let mut out = Vec::with_capacity(7);
    out.push(near_lo);
    out.extend(sample_points(lo, hi, 5));
    out.push(near_hi);
    out
}

/// Fits one of the closed forms through the samples, trying the simplest
/// first; every sample must match exactly. Fast path: the allocation rule
/// is monotone non-increasing in the declared cost, so equal values at the
/// two near-end probes pin the whole interval to a constant.
fn try_fit(probe: &Probe, lo: &Surd, hi: &Surd) -> Result<Option<Form>, CurveError> {
    let (near_lo, near_hi) = end_points(lo, hi);
    let y_lo = probe.x_at(&near_lo)?;
    let y_hi = probe.x_at(&near_hi)?;
    if y_lo == y_hi {
        return Ok(Some(Form::constant(y_lo)));
    }
    let mut us = Vec::with_capacity(7);
    us.push(near_lo);
    us.extend(sample_points(lo, hi, 5));
    us.push(near_hi);
    let mut ys = Vec::with_capacity(us.len());
    for u in &us {
        ys.push(probe.x_at(u)?);
    }
    Ok(fit_samples(&us, &ys))
}

fn fit_samples(us: &[Rat], ys: &[Surd]) -> Option<Form> {
    let n = us.len();
    debug_assert!(n >= 5);
    let matches = |form: &Form| us.iter().zip(ys).all(|(u, y)| &form.eval_rat(u) == y);

    // constant
    let form = Form::constant(ys[0].clone());
    if matches(&form) {
        return Some(form);
    }
    // affine through the outer samples
    let (u0, un) = (Surd::from_rat(us[0].clone()), Surd::from_rat(us[n - 1].clone()));
    let b = (&ys[n - 1] - &ys[0]) / (&un - &u0);
    let a = &ys[0] - &b * &u0;
    let form = Form { a, b, d: Surd::zero() };
    if matches(&form) {
        return Some(form);
    }
    // a + d/u through the outer samples
    let (i0, i_n) = (u0.recip(), un.recip());
    let d = (&ys[0] - &ys[n - 1]) / (&i0 - &i_n);
    let a = &ys[0] - &d * &i0;
    let form = Form { a, b: Surd::zero(), d };
    if matches(&form) {
        return Some(form);
    }
    // general a + b u + d/u through samples 0, mid, last
    let mid = n / 2;
    let form = solve_general(&us[0], &us[mid], &us[n - 1], &ys[0], &ys[mid], &ys[n - 1]);
    if matches(&form) {
        return Some(form);
    }
    None
}

/// Interpolates a + b u + d/u through three points; {1, u, 1/u} is a
/// Chebyshev system on (0, inf) so the system is always nonsingular.
fn solve_general(u0: &Rat, u1: &Rat, u2: &Rat, y0: &Surd, y1: &Surd, y2: &Surd) -> Form {
    let us = [u0, u1, u2];
    let ys = [y0, y1, y2];
    // rows: [1, u, 1/u | y]
    let mut m: Vec<[Surd; 4]> = (0..3)
        .map(|i| {
            let u = Surd::from_rat(us[i].clone());
            [Surd::one(), u.clone(), u.recip(), ys[i].clone()]
        })
        .collect();
    for col in 0..3 {
        let pivot = (col..3)
            .find(|&r| !m[r][col].is_zero())
            .expect("nonsingular interpolation system");
        m.swap(col, pivot);
        let p = m[col][col].clone();
        for c in col..4 {
            m[col][c] = &m[col][c] / &p;
        }
        for r in 0..3 {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..4 {
                    m[r][c] = &m[r][c] - &f * &m[col][c];
                }
            }
        }
    }
    Form { a: m[0][3].clone(), b: m[1][3].clone(), d: m[2][3].clone() }
}

/// Square root of a rational if exactly representable.
fn rat_sqrt(x: &Rat) -> Option<Rat> {
    if x.is_negative() {
        return None;
    }
    let sn = x.numer().sqrt();
    let sd = x.denom().sqrt();
    if &(&sn * &sn) == x.numer() && &(&sd * &sd) == x.denom() {
        Some(Rat::new(sn, sd))
    } else {
        None
    }
}

/// Square root of a field element if it stays in the same field Q(sqrt r)
/// (or is rational). Returns None otherwise.
fn surd_sqrt(x: &Surd, field: u64) -> Option<Surd> {
    if x.is_negative() {
        return None;
    }
    if let Some(q) = x.as_rat() {
        if let Some(s) = rat_sqrt(q) {
            return Some(Surd::from_rat(s));
        }
        if field > 1 {
            // sqrt(q) = b sqrt(field) iff q / field is a rational square
            let b2 = q / crate::num::rint(field as i64);
            if let Some(b) = rat_sqrt(&b2) {
                return Some(Surd::new(Rat::zero(), b, field));
            }
        }
        return None;
    }
    // (p + q sqrt r)^2 = x: p^2 + q^2 r = x.a, 2 p q = x.b
    let r = x.radicand();
    let rr = crate::num::rint(r as i64);
    let inner = x.rational_part() * x.rational_part() - x.radical_coeff() * x.radical_coeff() * rr;
    let s = rat_sqrt(&inner)?;
    for sign in [1i64, -1i64] {
        let cand = (x.rational_part() + crate::num::rint(sign) * &s) / crate::num::rint(2);
        if let Some(p) = rat_sqrt(&cand) {
            if p.is_zero() {
                continue;
            }
            let q = x.radical_coeff() / (crate::num::rint(2) * &p);
            let root = Surd::new(p, q, r);
            if &(&root * &root) == x && !root.is_negative() {
                return Some(root);
            }
            let neg = -&root;
            if &(&neg * &neg) == x && !neg.is_negative() {
                return Some(neg);
            }
        }
    }
    None
}

/// Roots of q2 u^2 + q1 u + q0 = 0 that are exactly representable in the
/// parameter field; None when the radical leaves the field.
fn solve_quadratic(q2: &Surd, q1: &Surd, q0: &Surd, field: u64) -> Option<Vec<Surd>> {
    if q2.is_zero() {
        if q1.is_zero() {
            return None; // identical forms, no isolated root
        }
        return Some(vec![-(q0 / q1)]);
    }
    let four = Surd::from_int(4);
    let two = Surd::from_int(2);
    let disc = q1 * q1 - four * q2 * q0;
    if disc.is_negative() {
        return Some(vec![]);
    }
    if disc.is_zero() {
        return Some(vec![-(q1 / (&two * q2))]);
    }
    let s = surd_sqrt(&disc, field)?;
    let r1 = (-q1 + &s) / (&two * q2);
    let r2 = (-q1 - &s) / (&two * q2);
    Some(vec![r1, r2])
}

enum RawPiece {
    Fit { lo: Surd, hi: Surd, form: Form },
    Gap { lo: Surd, hi: Surd },
}

struct Builder<'a> {
    probe: Probe<'a>,
    cfg: &'a CurveConfig,
    floor: Surd,
    early: Surd,
    field: u64,
    pieces_budget: Cell<usize>,
}

impl Builder<'_> {
    fn check_budget(&self) -> Result<(), CurveError> {
        let left = self.pieces_budget.get();
        if left == 0 {
            return Err(CurveError::SegmentCap { agent: self.probe.agent, cap: self.cfg.segment_cap });
        }
        self.pieces_budget.set(left - 1);
        Ok(())
    }

    fn push_fit(&self, out: &mut Vec<RawPiece>, lo: Surd, hi: Surd, form: Form) {
        if let Some(RawPiece::Fit { hi: prev_hi, form: prev_form, .. }) = out.last_mut() {
            if *prev_hi == lo && *prev_form == form {
                *prev_hi = hi;
                return;
            }
        }
        out.push(RawPiece::Fit { lo, hi, form });
    }

    fn build(&self, lo: Surd, hi: Surd, out: &mut Vec<RawPiece>) -> Result<(), CurveError> {
        self.check_budget()?;
        if let Some(form) = try_fit(&self.probe, &lo, &hi)? {
            self.push_fit(out, lo, hi, form);
            return Ok(());
        }
        let width = &hi - &lo;
        if width <= self.floor {
            out.push(RawPiece::Gap { lo, hi });
            return Ok(());
        }
        if width <= self.early {
            if let Some((boundary, fl, fr)) = self.try_resolve(&lo, &hi)? {
                self.push_fit(out, lo, boundary.clone(), fl);
                self.push_fit(out, boundary, hi, fr);
                return Ok(());
            }
        }
        // Bracket the event with the failed samples when possible, so the
        // recursion descends on a six-fold smaller window.
        let (cut_lo, cut_hi) = self.event_bracket(&lo, &hi)?;
        if cut_lo > lo {
            self.build(lo, cut_lo.clone(), out)?;
        }
        if cut_lo < cut_hi {
            self.build(cut_lo, cut_hi.clone(), out)?;
        }
        if cut_hi < hi {
            self.build(cut_hi, hi, out)?;
        }
        Ok(())
    }

    /// Narrows the failing interval using the sample values: under a single
    /// missed event the samples split into a prefix on one form and a
    /// suffix on another.
    fn event_bracket(&self, lo: &Surd, hi: &Surd) -> Result<(Surd, Surd), CurveError> {
        let us = sample_points_with_ends(lo, hi);
        let n = us.len();
        let mut ys = Vec::with_capacity(n);
        for u in &us {
            ys.push(self.probe.x_at(u)?);
        }
        // form anchored on the left samples
        let left = solve_general(&us[0], &us[1], &us[2], &ys[0], &ys[1], &ys[2]);
        let mut j = 2;
        while j + 1 < n && left.eval_rat(&us[j + 1]) == ys[j + 1] {
            j += 1;
        }
        if j + 1 < n && us.iter().take(j + 1).zip(&ys).all(|(u, y)| &left.eval_rat(u) == y) {
            return Ok((Surd::from_rat(us[j].clone()), Surd::from_rat(us[j + 1].clone())));
        }
        // form anchored on the right samples
        let right =
            solve_general(&us[n - 3], &us[n - 2], &us[n - 1], &ys[n - 3], &ys[n - 2], &ys[n - 1]);
        let mut j = n - 3;
        while j > 0 && right.eval_rat(&us[j - 1]) == ys[j - 1] {
            j -= 1;
        }
        if j > 0 && us.iter().skip(j).zip(ys.iter().skip(j)).all(|(u, y)| &right.eval_rat(u) == y) {
            return Ok((Surd::from_rat(us[j - 1].clone()), Surd::from_rat(us[j].clone())));
        }
        // several events: plain bisection around the middle window
        let span = hi - lo;
        let m_lo = lo + &span * Surd::from_rat(rat(2, 5));
        let m_hi = lo + &span * Surd::from_rat(rat(3, 5));
        let m = rational_between(&m_lo, &m_hi);
        Ok((Surd::from_rat(m.clone()), Surd::from_rat(m)))
    }

    /// Fits the two edges of a narrow interval and intersects the forms to
    /// recover a continuous event boundary exactly.
    fn try_resolve(&self, lo: &Surd, hi: &Surd) -> Result<Option<(Surd, Form, Form)>, CurveError> {
        let span = hi - lo;
        let eps = &span * Surd::from_rat(rat(1, 16));
        let fl = match try_fit(&self.probe, lo, &(lo + &eps))? {
            Some(f) => f,
            None => return Ok(None),
        };
        let fr = match try_fit(&self.probe, &(hi - &eps), hi)? {
            Some(f) => f,
            None => return Ok(None),
        };
        if fl == fr {
            return Ok(None);
        }
        let roots = match solve_quadratic(&(&fl.b - &fr.b), &(&fl.a - &fr.a), &(&fl.d - &fr.d), self.field)
        {
            Some(r) => r,
            None => return Ok(None),
        };
        let delta = &span * Surd::from_rat(rat(1, 64));
        for root in roots {
            if &root <= lo || &root >= hi {
                continue;
            }
            // verify on both flanks of the proposed boundary
            let left_probe = rational_between(&(&root - &delta).max(lo.clone()), &root);
            let right_probe = rational_between(&root, &(&root + &delta).min(hi.clone()));
            if self.probe.x_at(&left_probe)? == fl.eval_rat(&left_probe)
                && self.probe.x_at(&right_probe)? == fr.eval_rat(&right_probe)
            {
                return Ok(Some((root, fl, fr)));
            }
        }
        Ok(None)
    }
}

/// Candidate breakpoint seeds for one agent's curve: efficiency-tie points,
/// budget prefix-exhaustion points, the threat value, and the budget.
fn seed_candidates(
    prepared: &Prepared,
    agent: AgentId,
    probe: &Probe,
) -> Result<BTreeSet<Surd>, CurveError> {
    let instance = prepared.instance;
    let budget = &instance.budget;
    let me = &instance.agents[agent];
    let mut seeds: BTreeSet<Surd> = BTreeSet::new();
    let b_surd = Surd::from_rat(budget.clone());
    let inside = |s: &Surd| s.is_positive() && s < &b_surd;

    // value measures whose ratios drive orderings, per mechanism kind
    let mut measures: Vec<Box<dyn Fn(&Agent) -> Rat>> = vec![Box::new(|a: &Agent| a.value.clone())];
    match prepared.params.kind {
        MechanismKind::DaCap => {
            let caps = prepared.caps.clone().unwrap();
            measures.push(Box::new(move |a: &Agent| {
                a.value.clone().min(caps[&a.type_id.unwrap()].clone())
            }));
        }
        MechanismKind::DaCon => {
            let curves = prepared.curves.clone().unwrap();
            measures.push(Box::new(move |a: &Agent| {
                curves[&a.type_id.unwrap()].eval(&a.value)
            }));
        }
        _ => {}
    }
    for other in instance.agents.iter().filter(|a| a.id != agent) {
        for measure in &measures {
            let (mi, mj) = (measure(me), measure(other));
            if mj.is_positive() {
                let tie = Surd::from_rat(&mi * &other.cost / &mj);
                if inside(&tie) {
                    seeds.insert(tie);
                }
            }
        }
    }

    // budget prefix-exhaustion points over the other agents, in their own
    // efficiency order (it does not depend on u)
    let mut others: Vec<&Agent> = instance.agents.iter().filter(|a| a.id != agent).collect();
    others.sort_by(|a, b| {
        Efficiency::of(&b.value, &b.cost)
            .cmp(&Efficiency::of(&a.value, &a.cost))
            .then(a.id.cmp(&b.id))
    });
    let mut prefix = Rat::zero();
    let exhaust = Surd::from_rat(budget.clone());
    if inside(&exhaust) {
        seeds.insert(exhaust);
    }
    for other in &others {
        if other.cost > *budget {
            continue;
        }
        prefix += &other.cost;
        let point = Surd::from_rat(budget - &prefix);
        if inside(&point) {
            seeds.insert(point);
        }
    }

    // threat crossing: constant in u for the plain and capped mechanisms
    if matches!(prepared.params.kind, MechanismKind::Da | MechanismKind::DaCap) {
        let eligible_others: Vec<Agent> = instance
            .agents
            .iter()
            .filter(|a| a.id != agent && a.cost <= *budget)
            .cloned()
            .collect();
        let opt_excl = match prepared.params.kind {
            MechanismKind::Da => crate::oracle::opt_linear(&eligible_others, budget).value,
            MechanismKind::DaCap => {
                crate::oracle::opt_capped(&eligible_others, budget, prepared.caps.as_ref().unwrap())
                    .map_err(MechanismError::from)?
                    .opt
                    .value
            }
            _ => unreachable!(),
        };
        if opt_excl.is_positive() {
            let denom = &prepared.params.alpha * (Surd::one() + &prepared.params.beta);
            let tau = Surd::from_rat(&me.value * budget / &opt_excl) / denom;
            if inside(&tau) {
                seeds.insert(tau);
            }
        }
    } else if prepared.params.kind == MechanismKind::DaCon {
        // tau depends on v-hat, which is piecewise constant in u: probe each
        // seeded interval once and seed the local threat value.
        let snapshot: Vec<Surd> = seeds.iter().cloned().collect();
        let mut walls = vec![Surd::zero()];
        walls.extend(snapshot);
        walls.push(b_surd.clone());
        for pair in walls.windows(2) {
            if pair[0] >= pair[1] {
                continue;
            }
            let mid = rational_between(&pair[0], &pair[1]);
            if let Some(tau) = probe.eval(&mid)?.tau {
                if inside(&tau) {
                    seeds.insert(tau);
                }
            }
        }
    }

    Ok(seeds)
}

/// For the linear mechanisms, the greedy target alpha opt(u) crossing a
/// prefix-value boundary of the ordering moves the marginal agent by one;
/// those crossings are the only continuous events the stage-A seeds miss.
/// opt(u) is single-form between the seeded walls (its own events are
/// reorder and budget-exhaustion points, which are seeded), so it can be
/// fitted from probes and the crossings solved exactly in the field.
fn seed_kshift_roots(
    prepared: &Prepared,
    agent: AgentId,
    probe: &Probe,
    walls: &[Surd],
    field: u64,
) -> Result<Vec<Surd>, CurveError> {
    let instance = prepared.instance;
    let budget = &instance.budget;
    let alpha = &prepared.params.alpha;
    let me = &instance.agents[agent];
    let mut others: Vec<&Agent> = instance
        .agents
        .iter()
        .filter(|a| a.id != agent && a.cost <= *budget)
        .collect();
    others.sort_by(|a, b| {
        Efficiency::of(&b.value, &b.cost)
            .cmp(&Efficiency::of(&a.value, &a.cost))
            .then(a.id.cmp(&b.id))
    });
    let mut roots = Vec::new();
    for pair in walls.windows(2) {
        if pair[0] >= pair[1] {
            continue;
        }
        let us = sample_points(&pair[0], &pair[1], 5);
        let mut opts = Vec::with_capacity(us.len());
        for u in &us {
            opts.push(Surd::from_rat(probe.eval(u)?.opt));
        }
        let Some(form) = fit_samples(&us, &opts) else { continue };
        // prefix-value boundaries of the ordering at the interval midpoint
        let mid = &us[2];
        let my_eff = Efficiency::of(&me.value, mid);
        let mut values: Vec<Rat> = Vec::new();
        let mut placed = false;
        for other in &others {
            let other_eff = Efficiency::of(&other.value, &other.cost);
            if !placed && (my_eff > other_eff || (my_eff == other_eff && agent < other.id)) {
                values.push(me.value.clone());
                placed = true;
            }
            values.push(other.value.clone());
        }
        if !placed {
            values.push(me.value.clone());
        }
        let mut prefix = Rat::zero();
        for v in values {
            prefix += &v;
            // alpha (a + b u + d/u) = prefix <=> b u^2 + (a - prefix/alpha) u + d = 0
            let target = Surd::from_rat(prefix.clone()) / alpha;
            let c1 = &form.a - &target;
            if let Some(sol) = solve_quadratic(&form.b, &c1, &form.d, field) {
                for root in sol {
                    if root > pair[0] && root < pair[1] {
                        roots.push(root);
                    }
                }
            }
        }
    }
    Ok(roots)
}

/// Builds the allocation curve for one agent with the default settings.
pub fn allocation_curve(
    instance: &Instance,
    params: &MechanismParams,
    agent: AgentId,
) -> Result<AllocationCurve, CurveError> {
    allocation_curve_with(instance, params, agent, &CurveConfig::default())
}

pub fn allocation_curve_with(
    instance: &Instance,
    params: &MechanismParams,
    agent: AgentId,
    cfg: &CurveConfig,
) -> Result<AllocationCurve, CurveError> {
    let prepared = Prepared::new(instance, params)?;
    build_curve(&prepared, agent, cfg)
}

pub(crate) fn build_curve(
    prepared: &Prepared,
    agent: AgentId,
    cfg: &CurveConfig,
) -> Result<AllocationCurve, CurveError> {
    let budget = &prepared.instance.budget;
    let probe = Probe::new(prepared, agent);
    let seeds = seed_candidates(prepared, agent, &probe)?;
    let field = radicand_of(prepared.params);
    let builder = Builder {
        probe,
        cfg,
        floor: Surd::from_rat(budget * &cfg.floor_scale),
        early: Surd::from_rat(budget * &cfg.early_scale),
        field,
        pieces_budget: Cell::new(cfg.segment_cap.saturating_mul(4).max(64)),
    };

    let mut walls = vec![Surd::zero()];
    walls.extend(seeds);
    walls.push(Surd::from_rat(budget.clone()));
    if matches!(prepared.params.kind, MechanismKind::Da | MechanismKind::DaTheta) {
        let extra = seed_kshift_roots(prepared, agent, &builder.probe, &walls, field)?;
        if !extra.is_empty() {
            let mut set: BTreeSet<Surd> = walls.into_iter().collect();
            set.extend(extra);
            walls = set.into_iter().collect();
        }
    }
    let mut pieces: Vec<RawPiece> = Vec::new();
    for pair in walls.windows(2) {
        if pair[0] >= pair[1] {
            continue;
        }
        builder.build(pair[0].clone(), pair[1].clone(), &mut pieces)?;
    }

    assemble(agent, pieces, cfg)
}

fn radicand_of(params: &MechanismParams) -> u64 {
    if params.alpha.radicand() != 0 {
        params.alpha.radicand()
    } else {
        params.beta.radicand()
    }
}

/// Turns raw pieces into a contiguous, trimmed segment list; unresolved
/// gaps collapse onto their midpoint and charge the curve's error slack.
fn assemble(
    agent: AgentId,
    pieces: Vec<RawPiece>,
    cfg: &CurveConfig,
) -> Result<AllocationCurve, CurveError> {
    let mut segments: Vec<Segment> = Vec::new();
    let mut slack = Rat::zero();
    let mut inexact = 0usize;
    let mut pending_gap: Option<(Surd, Surd)> = None;

    for piece in pieces {
        match piece {
            RawPiece::Fit { lo, hi, form } => {
                let mut lo = lo;
                let mut exact_lo = true;
                if let Some((gap_lo, gap_hi)) = pending_gap.take() {
                    // stretch this segment back over the isolated window
                    let mid = (&gap_lo + &gap_hi) / Surd::from_int(2);
                    let width = &gap_hi - &gap_lo;
                    let (w, w_err) = width.approx_rat(64);
                    slack += w + w_err;
                    inexact += 1;
                    if let Some(prev) = segments.last_mut() {
                        if prev.u_hi == gap_lo {
                            prev.u_hi = mid.clone();
                        }
                    }
                    lo = mid;
                    exact_lo = false;
                }
                segments.push(Segment {
                    u_lo: lo,
                    u_hi: hi,
                    a: form.a,
                    b: form.b,
                    d: form.d,
                    exact_lo,
                });
            }
            RawPiece::Gap { lo, hi } => {
                if pending_gap.is_some() {
                    return Err(CurveError::Unresolved {
                        agent,
                        lo: format!("{lo}"),
                        hi: format!("{hi}"),
                    });
                }
                pending_gap = Some((lo, hi));
            }
        }
    }
    if let Some((gap_lo, gap_hi)) = pending_gap {
        // gap at the very end: stretch the previous segment forward
        let width = &gap_hi - &gap_lo;
        let (w, w_err) = width.approx_rat(64);
        slack += w + w_err;
        inexact += 1;
        match segments.last_mut() {
            Some(prev) if prev.u_hi == gap_lo => prev.u_hi = gap_hi,
            _ => {
                return Err(CurveError::Unresolved {
                    agent,
                    lo: format!("{gap_lo}"),
                    hi: format!("{gap_hi}"),
                })
            }
        }
    }

    if segments.len() > cfg.segment_cap {
        return Err(CurveError::SegmentCap { agent, cap: cfg.segment_cap });
    }

    // trim trailing zero segments; x = 0 beyond u_max by convention
    while segments.last().is_some_and(|s| s.a.is_zero() && s.b.is_zero() && s.d.is_zero()) {
        segments.pop();
    }
    let u_max = segments.last().map(|s| s.u_hi.clone()).unwrap_or_else(Surd::zero);

    // structural sanity: contiguity from zero, no hyperbolic part at zero
    if let Some(first) = segments.first() {
        if !first.u_lo.is_zero() {
            return Err(CurveError::Internal("segments do not start at zero".into()));
        }
        if !first.d.is_zero() {
            return Err(CurveError::Internal("hyperbolic segment touching zero".into()));
        }
    }
    for pair in segments.windows(2) {
        if pair[0].u_hi != pair[1].u_lo {
            return Err(CurveError::Internal("segments are not contiguous".into()));
        }
    }

    Ok(AllocationCurve { agent, segments, u_max, inexact_boundaries: inexact, boundary_slack: slack })
}

/// Convenience wrapper used in tests: evaluates the mechanism at a given
/// declared cost for one agent, straight through the probe path.
pub fn mechanism_x_at(
    instance: &Instance,
    params: &MechanismParams,
    agent: AgentId,
    declared: &Rat,
) -> Result<Surd, CurveError> {
    let prepared = Prepared::new(instance, params)?;
    let probe = Probe::new(&prepared, agent);
    probe.x_at(declared)
}

/// Batched mechanism re-runs for one agent, sharing one prepared view.
pub fn mechanism_x_batch(
    instance: &Instance,
    params: &MechanismParams,
    agent: AgentId,
    declared: &[Rat],
) -> Result<Vec<Surd>, CurveError> {
    let prepared = Prepared::new(instance, params)?;
    let probe = Probe::new(&prepared, agent);
    declared.iter().map(|u| probe.x_at(u)).collect()
}
