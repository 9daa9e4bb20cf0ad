//! Instance data model, validation, and file I/O.
//!
//! An instance is a budget, a list of agents (value, cost, optional type),
//! optional per-type valuation functions, and an optional competitiveness
//! bound theta. All numbers are exact rationals; the file format writes
//! them as `"p/q"` or decimal strings.

use crate::num::{fmt_rat, parse_rat, Rat};
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

pub type AgentId = usize;
pub type TypeId = usize;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Agent {
    pub id: AgentId,
    /// Public valuation v_i.
    pub value: Rat,
    /// Cost c_i. Also carries the declared cost: deviations are modeled by
    /// building a modified instance, matching the paper's convention.
    pub cost: Rat,
    pub type_id: Option<TypeId>,
}

/// Per-type valuation function l_j mapping accumulated selected value of a
/// type to obtained value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeValuation {
    /// l(x) = x up to the cap, constant after.
    LinearCap { cap: Rat },
    /// Piecewise-linear concave: first breakpoint (0,0), strictly increasing
    /// inputs, non-decreasing outputs, non-increasing slopes. The last
    /// segment's slope extends beyond the final breakpoint.
    PiecewiseConcave { breakpoints: Vec<(Rat, Rat)> },
}

impl TypeValuation {
    /// Breakpoints in canonical piecewise form (a linear cap becomes a kink
    /// at the cap followed by a flat extension).
    pub fn as_breakpoints(&self) -> Vec<(Rat, Rat)> {
        match self {
            TypeValuation::LinearCap { cap } => {
                if cap.is_zero() {
                    vec![(Rat::zero(), Rat::zero()), (crate::num::rint(1), Rat::zero())]
                } else {
                    vec![
                        (Rat::zero(), Rat::zero()),
                        (cap.clone(), cap.clone()),
                        (cap + cap, cap.clone()),
                    ]
                }
            }
            TypeValuation::PiecewiseConcave { breakpoints } => breakpoints.clone(),
        }
    }

    /// Evaluates l at `x >= 0`, extending the last slope indefinitely.
    pub fn eval(&self, x: &Rat) -> Rat {
        match self {
            TypeValuation::LinearCap { cap } => x.min(cap).clone(),
            TypeValuation::PiecewiseConcave { breakpoints } => {
                let pts = breakpoints;
                debug_assert!(!pts.is_empty());
                if *x <= pts[0].0 {
                    return pts[0].1.clone();
                }
                for w in pts.windows(2) {
                    let (x0, y0) = &w[0];
                    let (x1, y1) = &w[1];
                    if x <= x1 {
                        return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
                    }
                }
                let n = pts.len();
                let (x0, y0) = &pts[n - 2];
                let (x1, y1) = &pts[n - 1];
                let slope = (y1 - y0) / (x1 - x0);
                y1 + slope * (x - x1)
            }
        }
    }

    fn check(&self) -> Result<(), String> {
        match self {
            TypeValuation::LinearCap { cap } => {
                if cap.is_negative() {
                    return Err("cap must be non-negative".into());
                }
            }
            TypeValuation::PiecewiseConcave { breakpoints } => {
                if breakpoints.len() < 2 {
                    return Err("piecewise valuation needs at least two breakpoints".into());
                }
                if !breakpoints[0].0.is_zero() || !breakpoints[0].1.is_zero() {
                    return Err("first breakpoint must be (0, 0)".into());
                }
                let mut prev_slope: Option<Rat> = None;
                for w in breakpoints.windows(2) {
                    let (x0, y0) = &w[0];
                    let (x1, y1) = &w[1];
                    if x1 <= x0 {
                        return Err("breakpoint inputs must be strictly increasing".into());
                    }
                    if y1 < y0 {
                        return Err("breakpoint outputs must be non-decreasing".into());
                    }
                    let slope = (y1 - y0) / (x1 - x0);
                    if let Some(p) = &prev_slope {
                        if &slope > p {
                            return Err("slopes must be non-increasing (concavity)".into());
                        }
                    }
                    prev_slope = Some(slope);
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub budget: Rat,
    pub agents: Vec<Agent>,
    pub type_valuations: Option<BTreeMap<TypeId, TypeValuation>>,
    pub theta: Option<Rat>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("malformed instance file: {0}")]
    Syntax(String),
    #[error("invalid number: {0}")]
    Number(#[from] crate::num::NumError),
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// Efficiency v/c as an exactly comparable key. Zero-cost agents have
/// infinite efficiency, matching the convention in the problem setup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Efficiency {
    Finite(Rat),
    Infinite,
}

impl Efficiency {
    pub fn of(value: &Rat, cost: &Rat) -> Efficiency {
        if cost.is_zero() {
            Efficiency::Infinite
        } else {
            Efficiency::Finite(value / cost)
        }
    }
}

impl PartialOrd for Efficiency {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Efficiency {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Efficiency::*;
        match (self, other) {
            (Infinite, Infinite) => std::cmp::Ordering::Equal,
            (Infinite, Finite(_)) => std::cmp::Ordering::Greater,
            (Finite(_), Infinite) => std::cmp::Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl Instance {
    pub fn plain(budget: Rat, agents: Vec<(Rat, Rat)>) -> Instance {
        Instance {
            budget,
            agents: agents
                .into_iter()
                .enumerate()
                .map(|(id, (value, cost))| Agent { id, value, cost, type_id: None })
                .collect(),
            type_valuations: None,
            theta: None,
        }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    /// Agents eligible for any mechanism: N = { i : c_i <= B }.
    pub fn eligible(&self) -> Vec<AgentId> {
        self.agents
            .iter()
            .filter(|a| a.cost <= self.budget)
            .map(|a| a.id)
            .collect()
    }

    pub fn valuation_of(&self, type_id: TypeId) -> Option<&TypeValuation> {
        self.type_valuations.as_ref().and_then(|m| m.get(&type_id))
    }

    /// Structural violations (errors) and advisory findings (warnings).
    /// Agents with cost above the budget are warnings only: mechanisms
    /// filter them out rather than rejecting the instance.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut err = |message: String| {
            out.push(Violation { severity: Severity::Error, message });
        };
        if !self.budget.is_positive() {
            err("budget must be positive".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for (pos, agent) in self.agents.iter().enumerate() {
            if agent.id != pos {
                err(format!("agent ids must be dense from 0; found id {} at position {pos}", agent.id));
            }
            if !seen.insert(agent.id) {
                err(format!("duplicate agent id {}", agent.id));
            }
            if agent.value.is_negative() {
                err(format!("agent {} has negative value", agent.id));
            }
            if agent.cost.is_negative() {
                err(format!("agent {} has negative cost", agent.id));
            }
        }
        let typed = self.agents.iter().filter(|a| a.type_id.is_some()).count();
        if typed > 0 && typed < self.agents.len() {
            err("either all agents have a type or none do".into());
        }
        for agent in &self.agents {
            if let Some(t) = agent.type_id {
                if self.valuation_of(t).is_none() {
                    err(format!("agent {} references type {t} with no valuation", agent.id));
                }
            }
        }
        if let Some(types) = &self.type_valuations {
            for (t, v) in types {
                if let Err(msg) = v.check() {
                    err(format!("type {t}: {msg}"));
                }
            }
        }
        if let Some(theta) = &self.theta {
            if theta < &crate::num::rint(1) {
                err("theta must be at least 1".into());
            } else if let Err((i, j)) = self.check_theta(theta) {
                err(format!(
                    "theta-competitiveness violated: agents {i} and {j} have efficiency ratio above {}",
                    fmt_rat(theta)
                ));
            }
        }
        for agent in &self.agents {
            if agent.cost > self.budget {
                out.push(Violation {
                    severity: Severity::Warning,
                    message: format!(
                        "agent {} has cost above the budget and is excluded from N",
                        agent.id
                    ),
                });
            }
        }
        out
    }

    /// Checks the competitiveness bound over agents with cost <= budget:
    /// max efficiency <= theta * min efficiency. On failure returns the
    /// (max, min) witness pair.
    pub fn check_theta(&self, theta: &Rat) -> Result<(), (AgentId, AgentId)> {
        let eligible: Vec<&Agent> = self.agents.iter().filter(|a| a.cost <= self.budget).collect();
        if eligible.len() < 2 {
            return Ok(());
        }
        let hi = eligible
            .iter()
            .max_by(|a, b| {
                Efficiency::of(&a.value, &a.cost)
                    .cmp(&Efficiency::of(&b.value, &b.cost))
                    .then(b.id.cmp(&a.id))
            })
            .unwrap();
        let lo = eligible
            .iter()
            .min_by(|a, b| {
                Efficiency::of(&a.value, &a.cost)
                    .cmp(&Efficiency::of(&b.value, &b.cost))
                    .then(b.id.cmp(&a.id))
            })
            .unwrap();
        let ok = match (
            Efficiency::of(&hi.value, &hi.cost),
            Efficiency::of(&lo.value, &lo.cost),
        ) {
            (Efficiency::Infinite, Efficiency::Infinite) => true,
            (Efficiency::Infinite, Efficiency::Finite(_)) => false,
            (Efficiency::Finite(_), Efficiency::Infinite) => unreachable!("max below min"),
            (Efficiency::Finite(h), Efficiency::Finite(l)) => h <= theta * l,
        };
        if ok {
            Ok(())
        } else {
            Err((hi.id, lo.id))
        }
    }

    /// Structural errors only (validation errors, not warnings).
    pub fn errors(&self) -> Vec<Violation> {
        self.validate()
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .collect()
    }

    /// Hex SHA-256 of the canonical serialization, used to key audit reports.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(serialize_instance(self).as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileInstance {
    budget: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<String>,
    agents: Vec<FileAgent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    types: Option<BTreeMap<String, FileTypeValuation>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAgent {
    v: String,
    c: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<TypeId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTypeValuation {
    #[serde(skip_serializing_if = "Option::is_none")]
    cap: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pwl: Option<Vec<[String; 2]>>,
}

/// Parses and validates an instance from its canonical UTF-8 format.
pub fn parse_instance(bytes: &[u8]) -> Result<Instance, ParseError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ParseError::Syntax(e.to_string()))?;
    let file: FileInstance =
        serde_json::from_str(text).map_err(|e| ParseError::Syntax(e.to_string()))?;
    let budget = parse_rat(&file.budget)?;
    let theta = file.theta.as_deref().map(parse_rat).transpose()?;
    let mut agents = Vec::with_capacity(file.agents.len());
    for (id, a) in file.agents.iter().enumerate() {
        agents.push(Agent {
            id,
            value: parse_rat(&a.v)?,
            cost: parse_rat(&a.c)?,
            type_id: a.t,
        });
    }
    let type_valuations = match file.types {
        None => None,
        Some(map) => {
            let mut out = BTreeMap::new();
            for (key, tv) in map {
                let type_id: TypeId = key
                    .parse()
                    .map_err(|_| ParseError::Syntax(format!("type key `{key}` is not a natural number")))?;
                let parsed = match (tv.cap, tv.pwl) {
                    (Some(cap), None) => TypeValuation::LinearCap { cap: parse_rat(&cap)? },
                    (None, Some(points)) => {
                        let mut breakpoints = Vec::with_capacity(points.len());
                        for [x, y] in &points {
                            breakpoints.push((parse_rat(x)?, parse_rat(y)?));
                        }
                        TypeValuation::PiecewiseConcave { breakpoints }
                    }
                    _ => {
                        return Err(ParseError::Syntax(format!(
                            "type {key} must have exactly one of `cap` or `pwl`"
                        )))
                    }
                };
                out.insert(type_id, parsed);
            }
            Some(out)
        }
    };
    let instance = Instance { budget, agents, type_valuations, theta };
    let errors = instance.errors();
    if !errors.is_empty() {
        return Err(ParseError::Invalid(
            errors.iter().map(|v| v.message.clone()).collect::<Vec<_>>().join("; "),
        ));
    }
    Ok(instance)
}

/// Canonical serialization; `parse_instance(serialize_instance(i)) == i`.
pub fn serialize_instance(instance: &Instance) -> String {
    let file = FileInstance {
        budget: fmt_rat(&instance.budget),
        theta: instance.theta.as_ref().map(fmt_rat),
        agents: instance
            .agents
            .iter()
            .map(|a| FileAgent { v: fmt_rat(&a.value), c: fmt_rat(&a.cost), t: a.type_id })
            .collect(),
        types: instance.type_valuations.as_ref().map(|m| {
            m.iter()
                .map(|(t, v)| {
                    let tv = match v {
                        TypeValuation::LinearCap { cap } => {
                            FileTypeValuation { cap: Some(fmt_rat(cap)), pwl: None }
                        }
                        TypeValuation::PiecewiseConcave { breakpoints } => FileTypeValuation {
                            cap: None,
                            pwl: Some(
                                breakpoints
                                    .iter()
                                    .map(|(x, y)| [fmt_rat(x), fmt_rat(y)])
                                    .collect(),
                            ),
                        },
                    };
                    (t.to_string(), tv)
                })
                .collect()
        }),
    };
    serde_json::to_string(&file).expect("instance serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, rint};

    #[test]
    fn parse_minimal() {
        let inst = parse_instance(br#"{"budget":"10","agents":[{"v":"5","c":"4"}]}"#).unwrap();
        assert_eq!(inst.budget, rint(10));
        assert_eq!(inst.n(), 1);
        assert_eq!(inst.agents[0].value, rint(5));
        assert_eq!(inst.agents[0].cost, rint(4));
    }

    #[test]
    fn parse_lower_bound_instance() {
        // The two-agent instance with both costs at the budget.
        let inst =
            parse_instance(br#"{"budget":"1","agents":[{"v":"1","c":"1"},{"v":"1","c":"1"}]}"#)
                .unwrap();
        assert_eq!(inst.budget, rint(1));
        assert_eq!(inst.eligible(), vec![0, 1]);
    }

    #[test]
    fn parse_rejects_theta_violation() {
        // Efficiencies 1 and 1/8 have ratio 8 > 2.
        let err = parse_instance(
            br#"{"budget":"10","theta":"2","agents":[{"v":"1","c":"1"},{"v":"1","c":"8"}]}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("theta-competitiveness violated"), "{msg}");
        assert!(msg.contains("agents 0 and 1"), "{msg}");
    }

    #[test]
    fn theta_accepts_tight_instances() {
        let inst = parse_instance(
            br#"{"budget":"10","theta":"2","agents":[{"v":"1","c":"1"},{"v":"1","c":"2"}]}"#,
        )
        .unwrap();
        assert_eq!(inst.theta, Some(rint(2)));
    }

    #[test]
    fn cost_above_budget_is_warning_only() {
        let inst =
            parse_instance(br#"{"budget":"1","agents":[{"v":"1","c":"2"}]}"#).unwrap();
        let violations = inst.validate();
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].severity, Severity::Warning);
        assert!(violations[0].message.contains("excluded from N"));
        assert!(inst.eligible().is_empty());
    }

    #[test]
    fn missing_type_valuation_is_error() {
        let mut inst = Instance::plain(rint(10), vec![(rint(1), rint(1))]);
        inst.agents[0].type_id = Some(0);
        let errs = inst.errors();
        assertromatch(&errs, "no valuation");
    }

    fn assertromatch(errs: &[Violation], needle: &str) {
        assert!(
            errs.iter().any(|v| v.message.contains(needle)),
            "expected a violation containing `{needle}`, got {errs:?}"
        );
    }

    #[test]
    fn typed_roundtrip() {
        let input = br#"{"budget":"10","agents":[{"v":"4","c":"2","t":0},{"v":"4","c":"4","t":1}],"types":{"0":{"cap":"6"},"1":{"pwl":[["0","0"],["5","5"],["7","6"]]}}}"#;
        let inst = parse_instance(input).unwrap();
        let text = serialize_instance(&inst);
        let again = parse_instance(text.as_bytes()).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn pwl_eval_extends_last_slope() {
        let l = TypeValuation::PiecewiseConcave {
            breakpoints: vec![(rint(0), rint(0)), (rint(5), rint(5)), (rint(7), rint(6))],
        };
        assert_eq!(l.eval(&rint(3)), rint(3));
        assert_eq!(l.eval(&rint(5)), rint(5));
        assert_eq!(l.eval(&rint(6)), rat(11, 2));
        // slope 1/2 extends past the last breakpoint
        assert_eq!(l.eval(&rint(15)), rint(10));
    }

    #[test]
    fn pwl_concavity_enforced() {
        let bad = TypeValuation::PiecewiseConcave {
            breakpoints: vec![(rint(0), rint(0)), (rint(1), rint(1)), (rint(2), rint(4))],
        };
        assert!(bad.check().is_err());
        let good = TypeValuation::PiecewiseConcave {
            breakpoints: vec![(rint(0), rint(0)), (rint(1), rint(2)), (rint(2), rint(3))],
        };
        assert!(good.check().is_ok());
    }

    #[test]
    fn linear_cap_matches_equivalent_pwl() {
        let cap = TypeValuation::LinearCap { cap: rint(6) };
        let pwl = TypeValuation::PiecewiseConcave {
            breakpoints: cap.as_breakpoints(),
        };
        for x in [rint(0), rint(3), rint(6), rint(9), rint(100)] {
            assert_eq!(cap.eval(&x), pwl.eval(&x));
        }
    }

    #[test]
    fn digest_is_stable() {
        let a = Instance::plain(rint(10), vec![(rint(4), rint(2))]);
        let b = Instance::plain(rint(10), vec![(rint(4), rint(2))]);
        assert_eq!(a.digest(), b.digest());
        let c = Instance::plain(rint(10), vec![(rint(4), rint(3))]);
        assert_ne!(a.digest(), c.digest());
    }
}
