//! The four allocation rules and their parameterization.
//!
//! Every rule follows the same skeleton: filter N = { i : c_i <= B },
//! compute how individually valuable each agent is (rho_i = its value
//! contribution over the optimum without it), and either select the single
//! most valuable agent outright (rho_{i*} >= beta, the "star" branch) or
//! greedily fill an alpha-fraction of the fractional optimum, optionally
//! deselecting agents whose declared cost exceeds their threat tau_i.
//!
//! All branch conditions are decided exactly: parameters live in Q(sqrt r)
//! (see [`crate::surd`]), everything else is rational.

use crate::instance::{Agent, AgentId, Efficiency, Instance, TypeId, TypeValuation};
use crate::num::{rat, Rat};
use crate::oracle::{self, OracleError, Pwl};
use crate::payments::Payment;
use crate::surd::Surd;
use num_traits::{One, Zero};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MechanismKind {
    Da,
    DaTheta,
    DaCap,
    DaCon,
}

impl MechanismKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MechanismKind::Da => "da",
            MechanismKind::DaTheta => "da-theta",
            MechanismKind::DaCap => "da-cap",
            MechanismKind::DaCon => "da-con",
        }
    }

    pub fn parse(s: &str) -> Option<MechanismKind> {
        match s {
            "da" => Some(MechanismKind::Da),
            "da-theta" => Some(MechanismKind::DaTheta),
            "da-cap" => Some(MechanismKind::DaCap),
            "da-con" => Some(MechanismKind::DaCon),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MechanismParams {
    pub kind: MechanismKind,
    pub alpha: Surd,
    pub beta: Surd,
}

impl MechanismParams {
    pub fn new(kind: MechanismKind, alpha: Surd, beta: Surd) -> Result<Self, MechanismError> {
        if !alpha.is_positive() || alpha > Surd::one() {
            return Err(MechanismError::BadParams("alpha must be in (0, 1]".into()));
        }
        if !beta.is_positive() {
            return Err(MechanismError::BadParams("beta must be positive".into()));
        }
        Ok(MechanismParams { kind, alpha, beta })
    }
}

/// Auxiliary input for the canonical parameter choices.
#[derive(Clone, Debug)]
pub enum ParamsAux {
    None,
    Theta(Rat),
    TypeCount(u64),
}

/// Canonical parameters per mechanism: the golden-ratio pair for the plain
/// and capped rules, (min{1/2, 1/theta}, 1) for the competitive rule, and
/// the type-count-dependent root for the concave rule.
pub fn params_default(kind: MechanismKind, aux: ParamsAux) -> Result<MechanismParams, MechanismError> {
    match (kind, aux) {
        (MechanismKind::Da, ParamsAux::None) | (MechanismKind::DaCap, ParamsAux::None) => {
            // alpha = (sqrt 5 - 1)/(sqrt 5 + 1) = (3 - sqrt 5)/2,
            // beta = (sqrt 5 - 1)/2; exactly alpha (1 + beta) = 1 - alpha = beta.
            let alpha = Surd::new(rat(3, 2), rat(-1, 2), 5);
            let beta = Surd::new(rat(-1, 2), rat(1, 2), 5);
            MechanismParams::new(kind, alpha, beta)
        }
        (MechanismKind::DaTheta, ParamsAux::Theta(theta)) => {
            if theta < Rat::one() {
                return Err(MechanismError::BadParams("theta must be at least 1".into()));
            }
            let alpha = rat(1, 2).min(theta.recip());
            MechanismParams::new(kind, Surd::from_rat(alpha), Surd::one())
        }
        (MechanismKind::DaCon, ParamsAux::TypeCount(t)) => {
            if t < 1 {
                return Err(MechanismError::BadParams("type count must be at least 1".into()));
            }
            // beta = sqrt(t^2 + 6t + 5) / (2 (1 + t)) - 1/2, alpha = beta/(1+beta)
            let r = t * t + 6 * t + 5;
            let beta = Surd::new(rat(-1, 2), Rat::new(1.into(), (2 * (t + 1)).into()), r);
            let alpha = &beta / (Surd::one() + &beta);
            MechanismParams::new(kind, alpha, beta)
        }
        (kind, aux) => Err(MechanismError::BadParams(format!(
            "mechanism {} does not take auxiliary input {aux:?}",
            kind.as_str()
        ))),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MechanismError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("instance has no theta bound but the competitive mechanism requires one")]
    ThetaMissing,
    #[error("instance is not theta-competitive: witness agents {0} and {1}")]
    ThetaViolated(AgentId, AgentId),
    #[error("parameters infeasible: alpha must be at most min(1/theta, 1/(1+beta))")]
    ParamsInfeasible,
    #[error("agent {0} has no type but mechanism {1} requires typed agents")]
    UntypedAgent(AgentId, &'static str),
    #[error("type {0} needs a linear-cap valuation for the capped mechanism")]
    NotCapped(TypeId),
    #[error("missing valuation for type {0}")]
    MissingValuation(TypeId),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("payment computation failed: {0}")]
    Payment(#[from] crate::payments::PaymentError),
}

/// rho_i = (value measure of i) / opt_{-i}(N); infinite when nothing of
/// value remains without i.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rho {
    Finite(Rat),
    Infinite,
}

impl Rho {
    pub fn at_least(&self, threshold: &Surd) -> bool {
        match self {
            Rho::Infinite => true,
            Rho::Finite(r) => &Surd::from_rat(r.clone()) >= threshold,
        }
    }

    fn exceeds(&self, other: &Rho) -> bool {
        match (self, other) {
            (Rho::Infinite, Rho::Infinite) => false,
            (Rho::Infinite, Rho::Finite(_)) => true,
            (Rho::Finite(_), Rho::Infinite) => false,
            (Rho::Finite(a), Rho::Finite(b)) => a > b,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Rho::Infinite => f64::INFINITY,
            Rho::Finite(r) => crate::num::rat_to_f64(r),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Branch {
    Star {
        winner: AgentId,
    },
    Greedy {
        /// Position (into `Diagnostics::order`) of the last selected agent
        /// before threat deselection; `None` when nothing was selected.
        k: Option<usize>,
        deselected_by_threat: BTreeSet<AgentId>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostics {
    /// N: agents with declared cost within budget.
    pub eligible: Vec<AgentId>,
    /// Greedy ordering of N (efficiency, or marginal-value efficiency).
    pub order: Vec<AgentId>,
    pub rho: Vec<(AgentId, Rho)>,
    /// Threats for the agents the greedy branch considered (i <= k).
    pub tau: Vec<(AgentId, Surd)>,
    pub opt: Rat,
    pub opt_excl: Vec<(AgentId, Rat)>,
}

impl Diagnostics {
    pub fn rho_of(&self, id: AgentId) -> Option<&Rho> {
        self.rho.iter().find(|(i, _)| *i == id).map(|(_, r)| r)
    }

    pub fn opt_excl_of(&self, id: AgentId) -> Option<&Rat> {
        self.opt_excl.iter().find(|(i, _)| *i == id).map(|(_, v)| v)
    }
}

/// An allocation before payments: the mechanism's x plus everything the
/// audit needs to retrace the run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Allocation {
    pub x: Vec<Surd>,
    pub branch: Branch,
    pub diagnostics: Diagnostics,
}

impl Allocation {
    pub fn winners(&self) -> Vec<AgentId> {
        self.x
            .iter()
            .enumerate()
            .filter(|(_, x)| x.is_positive())
            .map(|(i, _)| i)
            .collect()
    }

    /// Plain linear value sum v_i x_i of the allocation.
    pub fn linear_value(&self, agents: &[Agent]) -> Surd {
        let mut total = Surd::zero();
        for agent in agents {
            if agent.id < self.x.len() && self.x[agent.id].is_positive() {
                total = total + &self.x[agent.id] * Surd::from_rat(agent.value.clone());
            }
        }
        total
    }
}

/// Full mechanism outcome: allocation plus threshold payments.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub x: Vec<Surd>,
    pub payments: Vec<Payment>,
    pub branch: Branch,
    pub diagnostics: Diagnostics,
}

/// Pre-validated view of an instance for one mechanism, reusable across
/// counterfactual cost profiles (the payment curves re-run the allocation
/// rule many times with one agent's cost replaced).
pub(crate) struct Prepared<'a> {
    pub instance: &'a Instance,
    pub params: &'a MechanismParams,
    pub caps: Option<BTreeMap<TypeId, Rat>>,
    pub curves: Option<BTreeMap<TypeId, Pwl>>,
}

impl<'a> Prepared<'a> {
    pub fn new(instance: &'a Instance, params: &'a MechanismParams) -> Result<Self, MechanismError> {
        let mut caps = None;
        let mut curves = None;
        match params.kind {
            MechanismKind::Da => {}
            MechanismKind::DaTheta => {
                let theta = instance.theta.as_ref().ok_or(MechanismError::ThetaMissing)?;
                if let Err((i, j)) = instance.check_theta(theta) {
                    return Err(MechanismError::ThetaViolated(i, j));
                }
                // Budget feasibility requires alpha <= min(1/theta, 1/(1+beta)).
                let limit =
                    Surd::from_rat(theta.recip()).min((Surd::one() + &params.beta).recip());
                if params.alpha > limit {
                    return Err(MechanismError::ParamsInfeasible);
                }
            }
            MechanismKind::DaCap => {
                let mut out = BTreeMap::new();
                for agent in &instance.agents {
                    let t = agent
                        .type_id
                        .ok_or(MechanismError::UntypedAgent(agent.id, "da-cap"))?;
                    match instance.valuation_of(t) {
                        Some(TypeValuation::LinearCap { cap }) => {
                            out.insert(t, cap.clone());
                        }
                        Some(TypeValuation::PiecewiseConcave { .. }) => {
                            return Err(MechanismError::NotCapped(t))
                        }
                        None => return Err(MechanismError::MissingValuation(t)),
                    }
                }
                caps = Some(out);
            }
            MechanismKind::DaCon => {
                let mut out = BTreeMap::new();
                for agent in &instance.agents {
                    let t = agent
                        .type_id
                        .ok_or(MechanismError::UntypedAgent(agent.id, "da-con"))?;
                    let valuation = instance
                        .valuation_of(t)
                        .ok_or(MechanismError::MissingValuation(t))?;
                    out.entry(t).or_insert_with(|| Pwl::from_valuation(valuation));
                }
                curves = Some(out);
            }
        }
        Ok(Prepared { instance, params, caps, curves })
    }

    /// Runs the allocation rule with the given declared costs (indexed by
    /// agent id; normally the instance costs themselves).
    pub fn allocate_with(&self, costs: &[Rat]) -> Result<Allocation, MechanismError> {
        debug_assert_eq!(costs.len(), self.instance.n());
        let budget = &self.instance.budget;
        let eligible: Vec<Agent> = self
            .instance
            .agents
            .iter()
            .filter(|a| costs[a.id] <= *budget)
            .map(|a| Agent { cost: costs[a.id].clone(), ..a.clone() })
            .collect();
        let n = self.instance.n();
        let zeros = vec![Surd::zero(); n];
        if eligible.is_empty() {
            return Ok(Allocation {
                x: zeros,
                branch: Branch::Greedy { k: None, deselected_by_threat: BTreeSet::new() },
                diagnostics: Diagnostics {
                    eligible: vec![],
                    order: vec![],
                    rho: vec![],
                    tau: vec![],
                    opt: Rat::zero(),
                    opt_excl: vec![],
                },
            });
        }

        let solved = self.solve(&eligible, budget)?;
        let mut rho = Vec::with_capacity(eligible.len());
        for agent in &eligible {
            let excl = solved.opt_excl_of(agent.id);
            let numerator = solved.rho_numerator(agent);
            // A lone valuable agent is infinitely valuable; an agent whose
            // value measure is zero is not, even when opt_{-i} = 0.
            let value = if numerator.is_zero() {
                Rho::Finite(Rat::zero())
            } else if excl.is_zero() {
                Rho::Infinite
            } else {
                Rho::Finite(&numerator / excl)
            };
            rho.push((agent.id, value));
        }
        // argmax rho, ties to the lowest id (rho lists ids in ascending order)
        let star = rho
            .iter()
            .fold(None::<&(AgentId, Rho)>, |best, cur| match best {
                None => Some(cur),
                Some(b) if cur.1.exceeds(&b.1) => Some(cur),
                Some(b) => Some(b),
            })
            .expect("eligible set is non-empty")
            .clone();

        let mut diagnostics = Diagnostics {
            eligible: eligible.iter().map(|a| a.id).collect(),
            order: solved.order.clone(),
            rho,
            tau: vec![],
            opt: solved.opt_value.clone(),
            opt_excl: solved.opt_excl.clone(),
        };

        if star.1.at_least(&self.params.beta) {
            let mut x = zeros;
            x[star.0] = Surd::one();
            return Ok(Allocation { x, branch: Branch::Star { winner: star.0 }, diagnostics });
        }

        // Greedy branch: fill the order until the objective reaches
        // alpha * opt, the marginal agent taking a partial fraction.
        let mut x = zeros;
        let target = &self.params.alpha * Surd::from_rat(solved.opt_value.clone());
        let mut k = None;
        if target.is_positive() {
            let mut walker = solved.walker();
            let mut cum = Surd::zero();
            for (pos, &id) in solved.order.iter().enumerate() {
                let agent = eligible.iter().find(|a| a.id == id).unwrap();
                let full = walker.full_step(agent);
                let next = &cum + Surd::from_rat(full.gain.clone());
                if next >= target {
                    let need = &target - &cum;
                    x[id] = walker.fractional(agent, &need, &full);
                    k = Some(pos);
                    break;
                }
                x[id] = Surd::from_rat(full.x.clone());
                walker.commit(agent, &full);
                cum = next;
            }
            debug_assert!(k.is_some(), "target below opt must be reachable");
        }

        // Threat deselection (not part of the competitive variant). The loop
        // inspects the initially selected set only and never re-runs the fill.
        let mut deselected = BTreeSet::new();
        if self.params.kind != MechanismKind::DaTheta {
            if let Some(k) = k {
                let denom = &self.params.alpha * (Surd::one() + &self.params.beta);
                for &id in &solved.order[..=k] {
                    let agent = eligible.iter().find(|a| a.id == id).unwrap();
                    let excl = solved.opt_excl_of(id);
                    if excl.is_zero() {
                        continue; // threat is infinite, never binds
                    }
                    let tau =
                        Surd::from_rat(&solved.threat_numerator(agent) * budget / excl) / &denom;
                    if Surd::from_rat(agent.cost.clone()) > tau {
                        x[id] = Surd::zero();
                        deselected.insert(id);
                    }
                    diagnostics.tau.push((id, tau));
                }
            }
        }

        Ok(Allocation {
            x,
            branch: Branch::Greedy { k, deselected_by_threat: deselected },
            diagnostics,
        })
    }

    fn solve(&self, eligible: &[Agent], budget: &Rat) -> Result<Solved, MechanismError> {
        let mut sorted: Vec<&Agent> = eligible.iter().collect();
        sorted.sort_by(|a, b| oracle::eff_cmp(a, b));
        match self.params.kind {
            MechanismKind::Da | MechanismKind::DaTheta => {
                let order: Vec<AgentId> = sorted.iter().map(|a| a.id).collect();
                let opt_value = oracle::greedy_value(&sorted, budget, None);
                let opt_excl = eligible
                    .iter()
                    .map(|a| (a.id, oracle::greedy_value(&sorted, budget, Some(a.id))))
                    .collect();
                Ok(Solved { opt_value, order, opt_excl, kind: SolvedKind::Linear })
            }
            MechanismKind::DaCap => {
                let caps = self.caps.as_ref().unwrap();
                let sol = oracle::opt_capped(eligible, budget, caps)?;
                let opt_excl = eligible
                    .iter()
                    .map(|a| {
                        Ok((a.id, oracle::greedy_value_capped(&sorted, budget, caps, Some(a.id))?))
                    })
                    .collect::<Result<Vec<_>, OracleError>>()?;
                Ok(Solved {
                    opt_value: sol.opt.value.clone(),
                    order: sol.opt.order.clone(),
                    opt_excl,
                    kind: SolvedKind::Capped { caps: caps.clone(), x_star: sol.opt.x.clone() },
                })
            }
            MechanismKind::DaCon => {
                let curves = self.curves.as_ref().unwrap();
                let sol = oracle::opt_concave(eligible, budget, curves)?;
                let evaluator = oracle::ConcaveEvaluator::new(eligible, curves)?;
                let opt_excl = eligible
                    .iter()
                    .map(|a| (a.id, evaluator.value_excluding(budget, Some(a.id))))
                    .collect::<Vec<_>>();
                // Order by v*_i / c_i, agents with v*_i = 0 last, ties by id.
                let mut order: Vec<AgentId> = eligible.iter().map(|a| a.id).collect();
                let vstar: BTreeMap<AgentId, Rat> = sol.v_star.iter().cloned().collect();
                let cost: BTreeMap<AgentId, Rat> =
                    eligible.iter().map(|a| (a.id, a.cost.clone())).collect();
                order.sort_by(|a, b| {
                    let (va, vb) = (&vstar[a], &vstar[b]);
                    match (va.is_zero(), vb.is_zero()) {
                        (true, true) => a.cmp(b),
                        (true, false) => std::cmp::Ordering::Greater,
                        (false, true) => std::cmp::Ordering::Less,
                        (false, false) => Efficiency::of(vb, &cost[b])
                            .cmp(&Efficiency::of(va, &cost[a]))
                            .then(a.cmp(b)),
                    }
                });
                Ok(Solved {
                    opt_value: sol.value.clone(),
                    order,
                    opt_excl,
                    kind: SolvedKind::Concave { curves: curves.clone(), sol },
                })
            }
        }
    }
}

enum SolvedKind {
    Linear,
    Capped {
        caps: BTreeMap<TypeId, Rat>,
        x_star: Vec<(AgentId, Rat)>,
    },
    Concave {
        curves: BTreeMap<TypeId, Pwl>,
        sol: oracle::ConcaveOptSolution,
    },
}

struct Solved {
    opt_value: Rat,
    order: Vec<AgentId>,
    opt_excl: Vec<(AgentId, Rat)>,
    kind: SolvedKind,
}

impl Solved {
    fn opt_excl_of(&self, id: AgentId) -> &Rat {
        &self
            .opt_excl
            .iter()
            .find(|(i, _)| *i == id)
            .expect("eligible agent")
            .1
    }

    /// The value measure rho uses: plain value, cap-clipped value, or the
    /// type valuation applied to the agent's own value.
    fn rho_numerator(&self, agent: &Agent) -> Rat {
        match &self.kind {
            SolvedKind::Linear => agent.value.clone(),
            SolvedKind::Capped { caps, .. } => {
                agent.value.clone().min(caps[&agent.type_id.unwrap()].clone())
            }
            SolvedKind::Concave { curves, .. } => {
                curves[&agent.type_id.unwrap()].eval(&agent.value)
            }
        }
    }

    /// The value measure the threat uses (v-hat in the concave setting).
    fn threat_numerator(&self, agent: &Agent) -> Rat {
        match &self.kind {
            SolvedKind::Linear | SolvedKind::Capped { .. } => agent.value.clone(),
            SolvedKind::Concave { sol, .. } => sol.v_hat_of(agent.id),
        }
    }

    fn walker(&self) -> GreedyWalker<'_> {
        GreedyWalker { solved: self, type_value: BTreeMap::new() }
    }
}

struct FullStep {
    /// Fraction the agent takes when fully stepped (1 or x*_i).
    x: Rat,
    /// Objective gain of that step.
    gain: Rat,
}

/// Walks the greedy order accumulating the mechanism's objective, so the
/// fill can stop exactly at alpha * opt.
struct GreedyWalker<'a> {
    solved: &'a Solved,
    /// Concave case: accumulated value mass per type so far.
    type_value: BTreeMap<TypeId, Rat>,
}

impl GreedyWalker<'_> {
    fn full_step(&self, agent: &Agent) -> FullStep {
        match &self.solved.kind {
            SolvedKind::Linear => FullStep { x: Rat::one(), gain: agent.value.clone() },
            SolvedKind::Capped { x_star, .. } => {
                let x = x_star
                    .iter()
                    .find(|(i, _)| *i == agent.id)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_else(Rat::zero);
                let gain = &agent.value * &x;
                FullStep { x, gain }
            }
            SolvedKind::Concave { curves, sol } => {
                let t = agent.type_id.unwrap();
                let x = sol.x_of(agent.id);
                let curve = &curves[&t];
                let lo = self.type_value.get(&t).cloned().unwrap_or_else(Rat::zero);
                let hi = &lo + &agent.value * &x;
                FullStep { gain: curve.eval(&hi) - curve.eval(&lo), x }
            }
        }
    }

    fn commit(&mut self, agent: &Agent, step: &FullStep) {
        if let SolvedKind::Concave { .. } = self.solved.kind {
            let t = agent.type_id.unwrap();
            *self.type_value.entry(t).or_insert_with(Rat::zero) += &agent.value * &step.x;
        }
    }

    /// Fraction in (0, full.x] whose objective gain is exactly `need`.
    fn fractional(&self, agent: &Agent, need: &Surd, full: &FullStep) -> Surd {
        match &self.solved.kind {
            SolvedKind::Linear | SolvedKind::Capped { .. } => {
                need / Surd::from_rat(agent.value.clone())
            }
            SolvedKind::Concave { curves, .. } => {
                let t = agent.type_id.unwrap();
                let lo = self.type_value.get(&t).cloned().unwrap_or_else(Rat::zero);
                let hi = &lo + &agent.value * &full.x;
                let w = solve_gain_surd(&curves[&t], &lo, need, &hi);
                (w - Surd::from_rat(lo.clone())) / Surd::from_rat(agent.value.clone())
            }
        }
    }
}

/// Smallest w >= lo with l(w) - l(lo) = gain, where gain may be irrational
/// (it comes from alpha * opt) but is known to be reachable within `hi`.
fn solve_gain_surd(curve: &Pwl, lo: &Rat, gain: &Surd, hi: &Rat) -> Surd {
    debug_assert!(gain.is_positive());
    let base = curve.eval(lo);
    let mut prev = lo.clone();
    let mut prev_y = Surd::zero();
    for kink in curve.kinks() {
        if kink <= lo {
            continue;
        }
        let stop = kink.min(hi);
        let y = Surd::from_rat(curve.eval(stop) - &base);
        if &y >= gain {
            let slope = (&y - &prev_y) / Surd::from_rat(stop - &prev);
            return Surd::from_rat(prev.clone()) + (gain - &prev_y) / slope;
        }
        prev = stop.clone();
        prev_y = y;
        if &prev >= hi {
            break;
        }
    }
    let y = Surd::from_rat(curve.eval(hi) - &base);
    debug_assert!(&y >= gain, "gain must be reachable within hi");
    let slope = (&y - &prev_y) / Surd::from_rat(hi - &prev);
    Surd::from_rat(prev.clone()) + (gain - &prev_y) / slope
}

/// Runs the allocation rule only (no payments).
pub fn allocate(instance: &Instance, params: &MechanismParams) -> Result<Allocation, MechanismError> {
    let prepared = Prepared::new(instance, params)?;
    let costs: Vec<Rat> = instance.agents.iter().map(|a| a.cost.clone()).collect();
    prepared.allocate_with(&costs)
}

/// Runs the full mechanism: allocation plus threshold payments.
pub fn run(instance: &Instance, params: &MechanismParams) -> Result<Outcome, MechanismError> {
    let allocation = allocate(instance, params)?;
    let payments = crate::payments::payment_vector(instance, params)?;
    Ok(Outcome {
        x: allocation.x,
        payments,
        branch: allocation.branch,
        diagnostics: allocation.diagnostics,
    })
}

pub fn run_da(instance: &Instance, params: &MechanismParams) -> Result<Outcome, MechanismError> {
    expect_kind(params, MechanismKind::Da)?;
    run(instance, params)
}

pub fn run_da_theta(instance: &Instance, params: &MechanismParams) -> Result<Outcome, MechanismError> {
    expect_kind(params, MechanismKind::DaTheta)?;
    run(instance, params)
}

pub fn run_da_cap(instance: &Instance, params: &MechanismParams) -> Result<Outcome, MechanismError> {
    expect_kind(params, MechanismKind::DaCap)?;
    run(instance, params)
}

pub fn run_da_con(instance: &Instance, params: &MechanismParams) -> Result<Outcome, MechanismError> {
    expect_kind(params, MechanismKind::DaCon)?;
    run(instance, params)
}

fn expect_kind(params: &MechanismParams, kind: MechanismKind) -> Result<(), MechanismError> {
    if params.kind != kind {
        return Err(MechanismError::BadParams(format!(
            "parameters are for {}, expected {}",
            params.kind.as_str(),
            kind.as_str()
        )));
    }
    Ok(())
}
