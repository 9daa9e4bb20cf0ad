//! Executable verification of the mechanism properties: truthfulness (on a
//! deviation grid), individual rationality, budget feasibility,
//! monotonicity, the approximation guarantee, and the exact prefix
//! inequalities the proofs rest on.
//!
//! Grid truthfulness is necessary-but-not-sufficient: the report records
//! the grid density so failures are concrete witnesses while passes are
//! evidence, not proofs. The grid always includes every curve breakpoint
//! (shifted by the tolerance), which is where violations would appear.

use crate::curve::{allocation_curve_with, CurveConfig, CurveError};
use crate::instance::{Agent, AgentId, Instance};
use crate::mechanisms::{
    allocate, params_default, Allocation, Branch, MechanismError, MechanismKind, MechanismParams,
    ParamsAux, Rho,
};
use crate::num::{rat, rat_to_f64, Rat};
use crate::oracle;
use crate::payments::{quadrature_tail, AllocationCurve, Payment, TailTable};
use crate::surd::{rational_between, Surd};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Clone, Debug)]
pub struct AuditConfig {
    /// Uniform deviation points per agent, on top of breakpoints and
    /// segment midpoints.
    pub uniform_grid: usize,
    /// Random points per agent for the curve/mechanism agreement check.
    pub pointwise_samples: usize,
    pub curve: CurveConfig,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { uniform_grid: 32, pointwise_samples: 64, curve: CurveConfig::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// For failures: the concrete witness (agent, deviation, delta). For
    /// passes: empty or a short note.
    pub worst_witness: String,
    /// How much room was left before the check would flip (f64, for the
    /// report only; the verdict itself is decided exactly).
    pub slack: f64,
}

impl CheckResult {
    fn pass(name: &str, witness: impl Into<String>, slack: f64) -> CheckResult {
        CheckResult { name: name.into(), status: CheckStatus::Pass, worst_witness: witness.into(), slack }
    }

    fn fail(name: &str, witness: impl Into<String>, slack: f64) -> CheckResult {
        CheckResult { name: name.into(), status: CheckStatus::Fail, worst_witness: witness.into(), slack }
    }
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub instance_digest: String,
    pub kind: MechanismKind,
    pub alpha: f64,
    pub beta: f64,
    pub checks: Vec<CheckResult>,
    /// Measured opt / v(x); 1.0 when opt = 0.
    pub approx_ratio: f64,
    /// Largest utility gain any tested deviation achieved (negative =
    /// strictly dominated everywhere).
    pub max_truthfulness_violation: f64,
    pub total_payment: f64,
    pub budget: f64,
    pub deviation_grid_size: usize,
    pub segment_counts: Vec<(AgentId, usize)>,
    pub segment_anomalies: Vec<AgentId>,
}

impl AuditReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }

    /// One CSV line per check: `check_name,status,worst_witness,slack`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check_name,status,worst_witness,slack\n");
        for check in &self.checks {
            out.push_str(&format!(
                "{},{},{},{:.3e}\n",
                check.name,
                match check.status {
                    CheckStatus::Pass => "pass",
                    CheckStatus::Fail => "fail",
                },
                check.worst_witness.replace(',', ";"),
                check.slack
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "instance_digest": self.instance_digest,
            "mechanism": self.kind.as_str(),
            "alpha": self.alpha,
            "beta": self.beta,
            "all_pass": self.all_pass(),
            "approx_ratio": self.approx_ratio,
            "max_truthfulness_violation": self.max_truthfulness_violation,
            "total_payment": self.total_payment,
            "budget": self.budget,
            "deviation_grid_size": self.deviation_grid_size,
            "segment_counts": self.segment_counts,
            "segment_anomalies": self.segment_anomalies,
            "checks": self.checks.iter().map(|c| serde_json::json!({
                "name": c.name,
                "status": match c.status { CheckStatus::Pass => "pass", CheckStatus::Fail => "fail" },
                "worst_witness": c.worst_witness,
                "slack": c.slack,
            })).collect::<Vec<_>>(),
        })
    }
}

fn tol_truth(budget: &Rat) -> Rat {
    budget * rat(1, 1_000_000)
}

fn tol_payment(budget: &Rat) -> Rat {
    budget * Rat::new(1.into(), 1_000_000_000i64.into())
}

/// Per-agent grid truthfulness: utilities of deviations never beat the
/// truthful utility by more than the tolerance.
pub struct TruthfulnessOutcome {
    pub worst_violation: f64,
    pub grid_size: usize,
    pub witness: Option<String>,
}

pub fn check_truthfulness(
    instance: &Instance,
    agent: AgentId,
    curve: &AllocationCurve,
    table: &TailTable,
) -> TruthfulnessOutcome {
    let budget = &instance.budget;
    let cost = &instance.agents[agent].cost;
    let tol = tol_truth(budget);
    let truth = table.tail(cost);

    let mut grid: Vec<Rat> = Vec::new();
    let eps = tol_truth(budget);
    for bp in curve.breakpoints() {
        let (approx, _) = bp.approx_rat(80);
        if approx > eps {
            grid.push(&approx - &eps);
        }
        grid.push(&approx + &eps);
    }
    for seg in &curve.segments {
        grid.push(rational_between(&seg.u_lo, &seg.u_hi));
    }
    for j in 1..=32i64 {
        grid.push(budget * rat(j, 33));
    }
    grid.sort();
    grid.dedup();

    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for b in &grid {
        if b.is_negative() {
            continue;
        }
        let x_b = curve.value_at(&Surd::from_rat(b.clone()));
        let gain_exact = Surd::from_rat(b - cost) * x_b;
        let (gain, gain_err) = gain_exact.approx_rat(130);
        let dev_tail = table.tail(b);
        let delta = &gain + &dev_tail.value - &truth.value;
        let err = gain_err + dev_tail.error_bound + &truth.error_bound;
        let violation = rat_to_f64(&delta);
        if violation > worst {
            worst = violation;
        }
        if delta > &tol + &err && witness.is_none() {
            witness = Some(format!(
                "agent {agent} gains {:.3e} by declaring {}",
                violation,
                crate::num::fmt_rat(b)
            ));
        }
    }
    TruthfulnessOutcome { worst_violation: worst, grid_size: grid.len(), witness }
}

/// Monotone non-increasing curves: within segments, across boundaries, and
/// with values inside [0, 1].
pub fn check_monotonicity(curves: &[AllocationCurve]) -> CheckResult {
    for curve in curves {
        for seg in &curve.segments {
            if !seg.is_nonincreasing() {
                return CheckResult::fail(
                    "monotonicity",
                    format!("agent {}: increasing segment starting at {}", curve.agent, seg.u_lo),
                    0.0,
                );
            }
            let top = if seg.u_lo.is_zero() { seg.value_at(&seg.u_hi) } else { seg.value_at(&seg.u_lo) };
            let top = if seg.u_lo.is_zero() && seg.d.is_zero() {
                seg.value_at(&seg.u_lo)
            } else {
                top
            };
            let bottom = seg.value_at(&seg.u_hi);
            if top > Surd::one() || bottom.is_negative() {
                return CheckResult::fail(
                    "monotonicity",
                    format!("agent {}: segment value outside [0,1] near {}", curve.agent, seg.u_lo),
                    0.0,
                );
            }
        }
        for pair in curve.segments.windows(2) {
            let boundary = &pair[0].u_hi;
            if pair[0].value_at(boundary) < pair[1].value_at(boundary) {
                return CheckResult::fail(
                    "monotonicity",
                    format!("agent {}: value increases across {}", curve.agent, boundary),
                    0.0,
                );
            }
        }
    }
    CheckResult::pass("monotonicity", "", 0.0)
}

/// The mechanism's objective value of an allocation (linear, capped, or
/// concave depending on the kind).
fn objective_value(instance: &Instance, params: &MechanismParams, x: &[Surd]) -> Surd {
    match params.kind {
        MechanismKind::Da | MechanismKind::DaTheta => instance
            .agents
            .iter()
            .fold(Surd::zero(), |acc, a| acc + Surd::from_rat(a.value.clone()) * &x[a.id]),
        MechanismKind::DaCap | MechanismKind::DaCon => {
            let mut by_type: std::collections::BTreeMap<usize, Surd> = Default::default();
            for a in &instance.agents {
                let mass = Surd::from_rat(a.value.clone()) * &x[a.id];
                let entry = by_type.entry(a.type_id.unwrap()).or_insert_with(Surd::zero);
                *entry = &*entry + mass;
            }
            let mut total = Surd::zero();
            for (t, mass) in by_type {
                let pwl = oracle::Pwl::from_valuation(instance.valuation_of(t).unwrap());
                total = total + pwl.eval_surd(&mass);
            }
            total
        }
    }
}

/// gamma v(x) >= opt (1 - 1e-9) with gamma = max(1/alpha, (1+beta)/beta),
/// decided exactly; the measured ratio is reported alongside.
pub fn check_approximation(
    instance: &Instance,
    params: &MechanismParams,
    alloc: &Allocation,
) -> (f64, CheckResult) {
    let opt = &alloc.diagnostics.opt;
    let value = objective_value(instance, params, &alloc.x);
    let gamma = params.alpha.recip().max((Surd::one() + &params.beta) / &params.beta);
    if opt.is_zero() {
        return (1.0, CheckResult::pass("approximation", "opt = 0", 0.0));
    }
    let ratio = if value.is_zero() { f64::INFINITY } else { rat_to_f64(opt) / value.to_f64() };
    let lhs = &gamma * &value;
    let rhs = Surd::from_rat(opt * (Rat::one() - Rat::new(1.into(), 1_000_000_000i64.into())));
    let slack = lhs.to_f64() - rhs.to_f64();
    if lhs >= rhs {
        (ratio, CheckResult::pass("approximation", format!("ratio {ratio:.6}"), slack))
    } else {
        (
            ratio,
            CheckResult::fail(
                "approximation",
                format!("gamma v(x) = {:.6} < opt = {:.6}", lhs.to_f64(), rat_to_f64(opt)),
                slack,
            ),
        )
    }
}

/// Exact prefix inequalities from the analysis, evaluated on the eligible
/// set. `NotApplicable` is reported as a pass with a note.
enum LemmaOutcome {
    Holds(f64),
    NotApplicable(&'static str),
    Violated(String),
}

fn lemma_result(name: &str, outcome: LemmaOutcome) -> CheckResult {
    match outcome {
        LemmaOutcome::Holds(slack) => CheckResult::pass(name, "", slack),
        LemmaOutcome::NotApplicable(note) => CheckResult::pass(name, note, 0.0),
        LemmaOutcome::Violated(witness) => CheckResult::fail(name, witness, 0.0),
    }
}

/// (c_k / v_k) (1 - alpha) opt <= B where k is the first index whose
/// optimal-prefix value reaches alpha opt.
fn lemma_threat_floor(
    eligible: &[Agent],
    budget: &Rat,
    alpha: &Surd,
    order: &[AgentId],
    x_star: &dyn Fn(AgentId) -> Rat,
    opt: &Rat,
) -> LemmaOutcome {
    if opt.is_zero() {
        return LemmaOutcome::NotApplicable("opt = 0");
    }
    let target = alpha * Surd::from_rat(opt.clone());
    let mut prefix = Surd::zero();
    for &id in order {
        let agent = eligible.iter().find(|a| a.id == id).unwrap();
        prefix = prefix + Surd::from_rat(&agent.value * x_star(id));
        if prefix >= target {
            // c_k (1 - alpha) opt <= B v_k
            let lhs = Surd::from_rat(agent.cost.clone())
                * (Surd::one() - alpha)
                * Surd::from_rat(opt.clone());
            let rhs = Surd::from_rat(budget * &agent.value);
            return if lhs <= rhs {
                LemmaOutcome::Holds((&rhs - &lhs).to_f64())
            } else {
                LemmaOutcome::Violated(format!("agent {id}: {} > {}", lhs.to_f64(), rhs.to_f64()))
            };
        }
    }
    LemmaOutcome::NotApplicable("prefix never reaches alpha opt")
}

/// Prefix cost of the alpha-fraction of x*: sum c_i x_i <= alpha B.
fn lemma_prefix_cost(
    eligible: &[Agent],
    budget: &Rat,
    alpha: &Surd,
    order: &[AgentId],
    x_star: &dyn Fn(AgentId) -> Rat,
    opt: &Rat,
) -> LemmaOutcome {
    if opt.is_zero() {
        return LemmaOutcome::NotApplicable("opt = 0");
    }
    let target = alpha * Surd::from_rat(opt.clone());
    let mut value = Surd::zero();
    let mut cost = Surd::zero();
    for &id in order {
        let agent = eligible.iter().find(|a| a.id == id).unwrap();
        let step_value = Surd::from_rat(&agent.value * x_star(id));
        let next = &value + &step_value;
        if next >= target {
            if !agent.value.is_zero() {
                let x_frac = (&target - &value) / Surd::from_rat(agent.value.clone());
                cost = cost + Surd::from_rat(agent.cost.clone()) * x_frac;
            }
            let bound = alpha * Surd::from_rat(budget.clone());
            return if cost <= bound {
                LemmaOutcome::Holds((&bound - &cost).to_f64())
            } else {
                LemmaOutcome::Violated(format!("prefix cost {} > {}", cost.to_f64(), bound.to_f64()))
            };
        }
        cost = cost + Surd::from_rat(&agent.cost * x_star(id));
        value = next;
    }
    LemmaOutcome::NotApplicable("prefix never reaches alpha opt")
}

/// Concave analogue: (c_k / v*_k) (1 - alpha - t beta) opt <= B under the
/// hypothesis rho_{i*} <= beta.
fn lemma_concave_floor(
    instance: &Instance,
    params: &MechanismParams,
    alloc: &Allocation,
) -> LemmaOutcome {
    let hypothesis_ok = alloc
        .diagnostics
        .rho
        .iter()
        .all(|(_, rho)| match rho {
            Rho::Infinite => false,
            Rho::Finite(r) => &Surd::from_rat(r.clone()) <= &params.beta,
        });
    if !hypothesis_ok {
        return LemmaOutcome::NotApplicable("rho_{i*} > beta");
    }
    let opt = &alloc.diagnostics.opt;
    if opt.is_zero() {
        return LemmaOutcome::NotApplicable("opt = 0");
    }
    let budget = &instance.budget;
    let eligible: Vec<Agent> = instance
        .agents
        .iter()
        .filter(|a| a.cost <= *budget)
        .cloned()
        .collect();
    let curves: std::collections::BTreeMap<usize, oracle::Pwl> = instance
        .type_valuations
        .as_ref()
        .unwrap()
        .iter()
        .map(|(t, v)| (*t, oracle::Pwl::from_valuation(v)))
        .collect();
    let sol = match oracle::opt_concave(&eligible, budget, &curves) {
        Ok(s) => s,
        Err(e) => return LemmaOutcome::Violated(format!("oracle failed: {e}")),
    };
    let t = instance.type_valuations.as_ref().unwrap().len() as i64;
    let coeff = Surd::one() - &params.alpha - Surd::from_int(t) * &params.beta;
    let target = &params.alpha * Surd::from_rat(opt.clone());
    // order by v*_i / c_i, zeros last
    let mut order: Vec<AgentId> = eligible.iter().map(|a| a.id).collect();
    order.sort_by(|a, b| {
        let (va, vb) = (sol.v_star_of(*a), sol.v_star_of(*b));
        let (ca, cb) = (
            &eligible.iter().find(|x| x.id == *a).unwrap().cost,
            &eligible.iter().find(|x| x.id == *b).unwrap().cost,
        );
        match (va.is_zero(), vb.is_zero()) {
            (true, true) => a.cmp(b),
            (true, false) => std::cmp::Ordering::Greater,
            (false, true) => std::cmp::Ordering::Less,
            _ => (&vb * ca).cmp(&(&va * cb)).then(a.cmp(b)),
        }
    });
    let mut prefix = Surd::zero();
    for &id in &order {
        let v_star = sol.v_star_of(id);
        prefix = prefix + Surd::from_rat(v_star.clone());
        if prefix >= target {
            let cost = &eligible.iter().find(|x| x.id == id).unwrap().cost;
            let lhs = Surd::from_rat(cost.clone()) * &coeff * Surd::from_rat(opt.clone());
            let rhs = Surd::from_rat(budget * &v_star);
            return if lhs <= rhs {
                LemmaOutcome::Holds((&rhs - &lhs).to_f64())
            } else {
                LemmaOutcome::Violated(format!("agent {id}: {} > {}", lhs.to_f64(), rhs.to_f64()))
            };
        }
    }
    LemmaOutcome::NotApplicable("prefix never reaches alpha opt")
}

/// Lemma-level inequality checks for the given mechanism run.
pub fn check_lemma_inequalities(
    instance: &Instance,
    params: &MechanismParams,
    alloc: &Allocation,
) -> Vec<CheckResult> {
    let budget = &instance.budget;
    let eligible: Vec<Agent> = instance
        .agents
        .iter()
        .filter(|a| a.cost <= *budget)
        .cloned()
        .collect();
    let mut out = Vec::new();
    match params.kind {
        MechanismKind::Da | MechanismKind::DaTheta => {
            let sol = oracle::opt_linear(&eligible, budget);
            let x_of = |id: AgentId| sol.x_of(id);
            out.push(lemma_result(
                "lemma_threat_floor",
                lemma_threat_floor(&eligible, budget, &params.alpha, &sol.order, &x_of, &sol.value),
            ));
            out.push(lemma_result(
                "lemma_prefix_cost",
                lemma_prefix_cost(&eligible, budget, &params.alpha, &sol.order, &x_of, &sol.value),
            ));
        }
        MechanismKind::DaCap => {
            let caps = instance
                .type_valuations
                .as_ref()
                .unwrap()
                .iter()
                .map(|(t, v)| match v {
                    crate::instance::TypeValuation::LinearCap { cap } => (*t, cap.clone()),
                    _ => unreachable!("validated capped instance"),
                })
                .collect();
            match oracle::opt_capped(&eligible, budget, &caps) {
                Ok(sol) => {
                    let x_of = |id: AgentId| sol.opt.x_of(id);
                    out.push(lemma_result(
                        "lemma_threat_floor",
                        lemma_threat_floor(
                            &eligible,
                            budget,
                            &params.alpha,
                            &sol.opt.order,
                            &x_of,
                            &sol.opt.value,
                        ),
                    ));
                    out.push(lemma_result(
                        "lemma_prefix_cost",
                        lemma_prefix_cost(
                            &eligible,
                            budget,
                            &params.alpha,
                            &sol.opt.order,
                            &x_of,
                            &sol.opt.value,
                        ),
                    ));
                }
                Err(e) => out.push(CheckResult::fail("lemma_threat_floor", format!("oracle: {e}"), 0.0)),
            }
        }
        MechanismKind::DaCon => {
            out.push(lemma_result(
                "lemma_concave_floor",
                lemma_concave_floor(instance, params, alloc),
            ));
        }
    }
    out
}

fn canonical_params_for(instance: &Instance, kind: MechanismKind) -> Option<MechanismParams> {
    let aux = match kind {
        MechanismKind::Da | MechanismKind::DaCap => ParamsAux::None,
        MechanismKind::DaTheta => ParamsAux::Theta(instance.theta.clone()?),
        MechanismKind::DaCon => {
            ParamsAux::TypeCount(instance.type_valuations.as_ref()?.len() as u64)
        }
    };
    params_default(kind, aux).ok()
}

/// Runs every check and assembles the report. Property failures are
/// reported, never raised; only construction failures error out.
pub fn run_audit(
    instance: &Instance,
    params: &MechanismParams,
    config: &AuditConfig,
) -> Result<AuditReport, AuditError> {
    let n = instance.n();
    let budget = &instance.budget;
    let alloc = allocate(instance, params)?;

    let mut curves = Vec::with_capacity(n);
    for agent in 0..n {
        curves.push(allocation_curve_with(instance, params, agent, &config.curve)?);
    }
    let tables: Vec<TailTable> = curves.iter().map(TailTable::new).collect();

    // payments straight from the curves (one construction per agent)
    let mut payments = vec![Payment::zero(); n];
    for agent in 0..n {
        if alloc.x[agent].is_positive() {
            let tail = tables[agent].tail(&instance.agents[agent].cost);
            let (base, base_err) = (Surd::from_rat(instance.agents[agent].cost.clone())
                * &alloc.x[agent])
                .approx_rat(130);
            payments[agent] =
                Payment { value: base + tail.value, error_bound: base_err + tail.error_bound };
        }
    }

    let mut checks = Vec::new();

    // individual rationality: p_i >= c_i x_i - tol
    let pay_tol = tol_payment(budget);
    let mut ir_ok = true;
    let mut ir_witness = String::new();
    let mut ir_slack = f64::INFINITY;
    for agent in 0..n {
        if !alloc.x[agent].is_positive() {
            continue;
        }
        let (cx, cx_err) = (Surd::from_rat(instance.agents[agent].cost.clone()) * &alloc.x[agent])
            .approx_rat(130);
        let margin = &payments[agent].value + &payments[agent].error_bound + &pay_tol + cx_err
            - cx;
        ir_slack = ir_slack.min(rat_to_f64(&margin));
        if margin.is_negative() {
            ir_ok = false;
            ir_witness = format!("agent {agent} paid below incurred cost");
            break;
        }
    }
    checks.push(if ir_ok {
        CheckResult::pass("individual_rationality", "", ir_slack.min(1e300))
    } else {
        CheckResult::fail("individual_rationality", ir_witness, ir_slack)
    });

    // budget feasibility: sum p <= B (1 + 1e-6)
    let mut total = Rat::zero();
    for p in &payments {
        total += &p.value + &p.error_bound;
    }
    let bound = budget * (Rat::one() + rat(1, 1_000_000));
    let budget_slack = rat_to_f64(&(&bound - &total));
    checks.push(if total <= bound {
        CheckResult::pass("budget_feasibility", "", budget_slack)
    } else {
        CheckResult::fail(
            "budget_feasibility",
            format!("total payment {:.6} over budget {:.6}", rat_to_f64(&total), rat_to_f64(budget)),
            budget_slack,
        )
    });

    // truthfulness over the deviation grid
    let mut worst_violation = f64::NEG_INFINITY;
    let mut grid_total = 0usize;
    let mut truth_witness: Option<String> = None;
    for agent in 0..n {
        let outcome = check_truthfulness(instance, agent, &curves[agent], &tables[agent]);
        grid_total += outcome.grid_size;
        if outcome.worst_violation > worst_violation {
            worst_violation = outcome.worst_violation;
        }
        if truth_witness.is_none() {
            truth_witness = outcome.witness;
        }
    }
    checks.push(match &truth_witness {
        None => CheckResult::pass(
            "truthfulness",
            format!("worst delta {worst_violation:.3e}"),
            rat_to_f64(&tol_truth(budget)) - worst_violation,
        ),
        Some(w) => CheckResult::fail("truthfulness", w.clone(), 0.0),
    });

    checks.push(check_monotonicity(&curves));

    let (ratio, approx_check) = check_approximation(instance, params, &alloc);
    checks.push(approx_check);

    // curve/mechanism pointwise agreement at seeded random points
    checks.push(check_pointwise(instance, params, &curves, config));

    // closed-form integration vs adaptive quadrature
    checks.push(check_quadrature(budget, &curves, &tables));

    checks.extend(check_lemma_inequalities(instance, params, &alloc));

    // canonical parameters never deselect by threat
    if params.kind != MechanismKind::DaTheta {
        if let Some(canonical) = canonical_params_for(instance, params.kind) {
            if &canonical == params {
                let deselected = match &alloc.branch {
                    Branch::Greedy { deselected_by_threat, .. } => deselected_by_threat.len(),
                    Branch::Star { .. } => 0,
                };
                checks.push(if deselected == 0 {
                    CheckResult::pass("threat_noop", "", 0.0)
                } else {
                    CheckResult::fail("threat_noop", format!("{deselected} agents deselected"), 0.0)
                });
            }
        }
    }

    // star branch: winner's value measure covers beta/(1+beta) of opt
    if let Branch::Star { winner } = &alloc.branch {
        let measure = star_measure(instance, params, *winner);
        let lhs = Surd::from_rat(measure) * (Surd::one() + &params.beta);
        let rhs = &params.beta * Surd::from_rat(alloc.diagnostics.opt.clone());
        checks.push(if lhs >= rhs {
            CheckResult::pass("star_branch_bound", "", (&lhs - &rhs).to_f64())
        } else {
            CheckResult::fail("star_branch_bound", format!("winner {winner}"), (&lhs - &rhs).to_f64())
        });
    }

    // competitive variant: threshold bids capped at min(B, theta c_i)
    if params.kind == MechanismKind::DaTheta {
        checks.push(check_theta_thresholds(instance, &alloc, &curves));
    }

    // greedy winners never paid above their threat
    if let Branch::Greedy { .. } = &alloc.branch {
        checks.push(check_payment_below_threat(instance, &alloc, &payments));
    }

    // breakpoint accounting: segment counts against n (kinks + 2)
    let kinks: usize = instance
        .type_valuations
        .as_ref()
        .map(|m| m.values().map(|v| v.as_breakpoints().len().saturating_sub(1)).sum())
        .unwrap_or(0);
    let limit = n * (kinks + 2);
    let segment_counts: Vec<(AgentId, usize)> =
        curves.iter().map(|c| (c.agent, c.segments.len())).collect();
    let segment_anomalies: Vec<AgentId> = segment_counts
        .iter()
        .filter(|(_, count)| *count > limit)
        .map(|(a, _)| *a)
        .collect();
    checks.push(if segment_anomalies.is_empty() {
        CheckResult::pass("breakpoint_bound", format!("limit {limit}"), 0.0)
    } else {
        CheckResult::fail("breakpoint_bound", format!("agents {segment_anomalies:?} over {limit}"), 0.0)
    });

    Ok(AuditReport {
        instance_digest: instance.digest(),
        kind: params.kind,
        alpha: params.alpha.to_f64(),
        beta: params.beta.to_f64(),
        checks,
        approx_ratio: ratio,
        max_truthfulness_violation: worst_violation,
        total_payment: rat_to_f64(&total),
        budget: rat_to_f64(budget),
        deviation_grid_size: grid_total,
        segment_counts,
        segment_anomalies,
    })
}

fn star_measure(instance: &Instance, params: &MechanismParams, winner: AgentId) -> Rat {
    let agent = &instance.agents[winner];
    match params.kind {
        MechanismKind::Da | MechanismKind::DaTheta => agent.value.clone(),
        MechanismKind::DaCap => match instance.valuation_of(agent.type_id.unwrap()).unwrap() {
            crate::instance::TypeValuation::LinearCap { cap } => agent.value.clone().min(cap.clone()),
            _ => unreachable!(),
        },
        MechanismKind::DaCon => {
            let pwl = oracle::Pwl::from_valuation(instance.valuation_of(agent.type_id.unwrap()).unwrap());
            pwl.eval(&agent.value)
        }
    }
}

fn check_pointwise(
    instance: &Instance,
    params: &MechanismParams,
    curves: &[AllocationCurve],
    config: &AuditConfig,
) -> CheckResult {
    let budget = &instance.budget;
    let mut rng = ChaCha20Rng::seed_from_u64(0x706f696e74);
    for curve in curves {
        let us: Vec<Rat> = (0..config.pointwise_samples)
            .map(|_| budget * rat(rng.gen_range(1..4096), 4096))
            .collect();
        let expected = match crate::curve::mechanism_x_batch(instance, params, curve.agent, &us) {
            Ok(xs) => xs,
            Err(e) => {
                return CheckResult::fail("curve_pointwise", format!("probe failed: {e}"), 0.0)
            }
        };
        for (u, expect) in us.iter().zip(&expected) {
            if &curve.value_at(&Surd::from_rat(u.clone())) != expect {
                return CheckResult::fail(
                    "curve_pointwise",
                    format!("agent {} disagrees at u = {}", curve.agent, crate::num::fmt_rat(u)),
                    0.0,
                );
            }
        }
    }
    CheckResult::pass("curve_pointwise", "", 0.0)
}

fn check_quadrature(budget: &Rat, curves: &[AllocationCurve], tables: &[TailTable]) -> CheckResult {
    let tol = rat_to_f64(budget) * 1e-9;
    let mut worst = 0.0f64;
    for (curve, table) in curves.iter().zip(tables) {
        if curve.segments.is_empty() {
            continue;
        }
        for from in [Rat::zero(), budget * rat(1, 3)] {
            let closed = table.tail(&from);
            let numeric = quadrature_tail(curve, rat_to_f64(&from));
            let diff = (closed.value_f64() - numeric).abs();
            if diff > worst {
                worst = diff;
            }
            if diff > tol {
                return CheckResult::fail(
                    "integration_quadrature",
                    format!("agent {}: closed form and quadrature differ by {diff:.3e}", curve.agent),
                    tol - diff,
                );
            }
        }
    }
    CheckResult::pass("integration_quadrature", format!("worst {worst:.3e}"), tol - worst)
}

fn check_theta_thresholds(
    instance: &Instance,
    alloc: &Allocation,
    curves: &[AllocationCurve],
) -> CheckResult {
    let theta = instance.theta.as_ref().expect("theta instance");
    if !matches!(alloc.branch, Branch::Greedy { .. }) {
        return CheckResult::pass("theta_threshold_bound", "star branch", 0.0);
    }
    for agent in alloc.winners() {
        let cap = Surd::from_rat(instance.budget.clone().min(theta * &instance.agents[agent].cost));
        let threshold = crate::payments::threshold_bid(&curves[agent]);
        if threshold > cap {
            return CheckResult::fail(
                "theta_threshold_bound",
                format!(
                    "agent {agent}: threshold {:.6} above min(B, theta c) = {:.6}",
                    threshold.to_f64(),
                    cap.to_f64()
                ),
                (&cap - &threshold).to_f64(),
            );
        }
    }
    CheckResult::pass("theta_threshold_bound", "", 0.0)
}

fn check_payment_below_threat(
    instance: &Instance,
    alloc: &Allocation,
    payments: &[Payment],
) -> CheckResult {
    let tol = tol_payment(&instance.budget);
    for (agent, tau) in &alloc.diagnostics.tau {
        if !alloc.x[*agent].is_positive() {
            continue;
        }
        let (bound, bound_err) = (&alloc.x[*agent] * tau).approx_rat(130);
        let margin = bound + bound_err + &tol + &payments[*agent].error_bound - &payments[*agent].value;
        if margin.is_negative() {
            return CheckResult::fail(
                "payment_below_threat",
                format!("agent {agent} paid above x_i tau_i"),
                rat_to_f64(&margin),
            );
        }
    }
    CheckResult::pass("payment_below_threat", "", 0.0)
}

pub fn run_audit_default(
    instance: &Instance,
    params: &MechanismParams,
) -> Result<AuditReport, AuditError> {
    run_audit(instance, params, &AuditConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Instance;
    use crate::num::rint;
    use crate::payments::Segment;

    fn canonical() -> MechanismParams {
        params_default(MechanismKind::Da, ParamsAux::None).unwrap()
    }

    #[test]
    fn single_agent_audit_passes() {
        let instance = Instance::plain(rint(10), vec![(rint(5), rint(4))]);
        let report = run_audit_default(&instance, &canonical()).unwrap();
        assert!(report.all_pass(), "{}", report.to_csv());
        // utility is constant at 10 - 4 = 6; no deviation helps
        assert!(report.max_truthfulness_violation <= 1e-9);
        // star payment is exactly the budget
        assert!((report.total_payment - 10.0).abs() < 1e-9);
    }

    #[test]
    fn five_identical_audit_passes() {
        let instance = Instance::plain(rint(10), vec![(rint(4), rint(2)); 5]);
        let report = run_audit_default(&instance, &canonical()).unwrap();
        assert!(report.all_pass(), "{}", report.to_csv());
        // measured ratio on the tight family is exactly 1/alpha
        assert!((report.approx_ratio - 2.618034).abs() < 1e-4);
    }

    #[test]
    fn theta_audit_ratio_two() {
        let mut instance = Instance::plain(rint(10), vec![(rint(4), rint(2)); 5]);
        instance.theta = Some(rint(1));
        let params = params_default(MechanismKind::DaTheta, ParamsAux::Theta(rint(1))).unwrap();
        let report = run_audit_default(&instance, &params).unwrap();
        assert!(report.all_pass(), "{}", report.to_csv());
        assert!((report.approx_ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn star_trio_ratio() {
        let instance = Instance::plain(
            rint(10),
            vec![(rint(6), rint(2)), (rint(4), rint(4)), (rint(5), rint(10))],
        );
        let report = run_audit_default(&instance, &canonical()).unwrap();
        assert!(report.all_pass(), "{}", report.to_csv());
        assert!((report.approx_ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn corrupted_curve_fails_monotonicity() {
        let increasing = AllocationCurve {
            agent: 0,
            segments: vec![Segment {
                u_lo: Surd::zero(),
                u_hi: Surd::from_int(10),
                a: Surd::from_rat(rat(1, 2)),
                b: Surd::from_rat(rat(1, 100)),
                d: Surd::zero(),
                exact_lo: true,
            }],
            u_max: Surd::from_int(10),
            inexact_boundaries: 0,
            boundary_slack: Rat::zero(),
        };
        let result = check_monotonicity(&[increasing]);
        assert_eq!(result.status, CheckStatus::Fail);
        assert!(result.worst_witness.contains("agent 0"));
    }

    #[test]
    fn lemma_checks_on_five_identical() {
        let instance = Instance::plain(rint(10), vec![(rint(4), rint(2)); 5]);
        let params = canonical();
        let alloc = allocate(&instance, &params).unwrap();
        let results = check_lemma_inequalities(&instance, &params, &alloc);
        assert!(results.iter().all(|r| r.status == CheckStatus::Pass), "{results:?}");
        // Lemma slack: B v_k - c_k (1-alpha) opt = 10*4 - 2 * beta * 20
        let threat_floor = results.iter().find(|r| r.name == "lemma_threat_floor").unwrap();
        let expect = 40.0 - 2.0 * 0.6180339887 * 20.0;
        assert!((threat_floor.slack - expect).abs() < 1e-6);
    }

    #[test]
    fn lemma_trivial_when_alpha_one() {
        let instance = Instance::plain(rint(10), vec![(rint(4), rint(2)); 5]);
        let params =
            MechanismParams::new(MechanismKind::Da, Surd::one(), Surd::one()).unwrap();
        let alloc = allocate(&instance, &params).unwrap();
        let results = check_lemma_inequalities(&instance, &params, &alloc);
        let floor = results.iter().find(|r| r.name == "lemma_threat_floor").unwrap();
        assert_eq!(floor.status, CheckStatus::Pass);
    }

    #[test]
    fn lemma_prefix_cost_on_star_trio_with_half() {
        let instance = Instance::plain(
            rint(10),
            vec![(rint(6), rint(2)), (rint(4), rint(4)), (rint(5), rint(10))],
        );
        let params = MechanismParams::new(
            MechanismKind::Da,
            Surd::from_rat(rat(1, 2)),
            Surd::from_rat(rat(618, 1000)),
        )
        .unwrap();
        let alloc = allocate(&instance, &params).unwrap();
        let results = check_lemma_inequalities(&instance, &params, &alloc);
        let prefix = results.iter().find(|r| r.name == "lemma_prefix_cost").unwrap();
        assert_eq!(prefix.status, CheckStatus::Pass);
        // prefix to value 6 costs 2, bound is alpha B = 5: slack 3
        assert!((prefix.slack - 3.0).abs() < 1e-9);
    }

    fn rat(n: i64, d: i64) -> Rat {
        crate::num::rat(n, d)
    }
}
