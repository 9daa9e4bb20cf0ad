//! Command-line front end: run mechanisms, dump allocation curves, audit
//! properties, generate seeded instances, and emit the competitive-market
//! bound curves.
//!
//! Exit codes are a stable contract: 0 success, 1 property failure (audit),
//! 2 input error (unreadable or invalid instance), 3 parameter
//! infeasibility.

use budgetmech::audit::{run_audit, AuditConfig};
use budgetmech::curve::{allocation_curve_with, CurveConfig};
use budgetmech::fixtures::lower_bounds;
use budgetmech::gen::{gen_random, Profile};
use budgetmech::instance::{parse_instance, serialize_instance, Instance};
use budgetmech::mechanisms::{
    params_default, run, MechanismError, MechanismKind, MechanismParams, ParamsAux, Rho,
};
use budgetmech::num::{fmt_rat, fmt_rat_decimal, parse_rat, rat_to_f64, Rat};
use budgetmech::payments::SegmentForm;
use budgetmech::surd::Surd;
use clap::{Args, Parser, Subcommand};
use num_traits::One;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_PARAMS_INFEASIBLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "budgetmech", about = "Budget-feasible procurement mechanisms for divisible agents", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mech {
    Da,
    #[value(name = "da-theta")]
    DaTheta,
    #[value(name = "da-cap")]
    DaCap,
    #[value(name = "da-con")]
    DaCon,
}

impl From<Mech> for MechanismKind {
    fn from(m: Mech) -> MechanismKind {
        match m {
            Mech::Da => MechanismKind::Da,
            Mech::DaTheta => MechanismKind::DaTheta,
            Mech::DaCap => MechanismKind::DaCap,
            Mech::DaCon => MechanismKind::DaCon,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    #[value(name = "summary-object")]
    SummaryObject,
}

#[derive(Args, Debug)]
pub struct MechArgs {
    /// Mechanism kind.
    #[arg(long, value_enum, default_value = "da")]
    pub mech: Mech,
    /// Override alpha (rational or decimal string).
    #[arg(long)]
    pub alpha: Option<String>,
    /// Override beta.
    #[arg(long)]
    pub beta: Option<String>,
    /// Competitiveness bound (da-theta default parameters; gen profile).
    #[arg(long)]
    pub theta: Option<String>,
    /// Number of agent types (da-con default parameters; gen profiles).
    #[arg(long)]
    pub types: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a mechanism on an instance file and print the outcome.
    Run {
        instance: PathBuf,
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "summary-object")]
        format: Format,
    },
    /// Dump one agent's allocation curve as CSV.
    Curve {
        instance: PathBuf,
        /// Agent id.
        #[arg(long)]
        agent: usize,
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit the mechanism's properties on an instance.
    Audit {
        instance: PathBuf,
        #[command(flatten)]
        mech: MechArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Generate a deterministic random instance.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// plain | theta | capped | concave
        #[arg(long, default_value = "plain")]
        profile: String,
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        types: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the theta-competitive lower-bound curves as CSV.
    Bounds {
        #[arg(long, default_value = "1")]
        from: String,
        #[arg(long, default_value = "3")]
        to: String,
        #[arg(long, default_value = "1/4")]
        step: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Writes atomically when a path is given, otherwise to stdout.
fn emit(out: &Option<PathBuf>, content: &str) -> std::io::Result<()> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, content)?;
            std::fs::rename(&tmp, path)
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_instance(&bytes).map_err(|e| e.to_string())
}

/// Canonical parameters for the requested mechanism, with optional
/// alpha/beta overrides. Overrides are validated here; deeper feasibility
/// checks (the competitive-market constraint) run inside the mechanism.
fn build_params(args: &MechArgs, instance: Option<&Instance>) -> Result<MechanismParams, CliError> {
    let kind: MechanismKind = args.mech.into();
    let aux = match kind {
        MechanismKind::Da | MechanismKind::DaCap => ParamsAux::None,
        MechanismKind::DaTheta => {
            let theta = match (&args.theta, instance.and_then(|i| i.theta.as_ref())) {
                (Some(s), _) => parse_rat(s).map_err(|e| CliError::Input(e.to_string()))?,
                (None, Some(t)) => t.clone(),
                (None, None) => {
                    return Err(CliError::Input(
                        "da-theta needs --theta or an instance with a theta bound".into(),
                    ))
                }
            };
            ParamsAux::Theta(theta)
        }
        MechanismKind::DaCon => {
            let t = args
                .types
                .or_else(|| {
                    instance
                        .and_then(|i| i.type_valuations.as_ref())
                        .map(|m| m.len() as u64)
                })
                .ok_or_else(|| {
                    CliError::Input("da-con needs --types or a typed instance".into())
                })?;
            ParamsAux::TypeCount(t)
        }
    };
    let mut params = params_default(kind, aux).map_err(CliError::from)?;
    if let Some(alpha) = &args.alpha {
        params.alpha = Surd::from_rat(parse_rat(alpha).map_err(|e| CliError::Input(e.to_string()))?);
    }
    if let Some(beta) = &args.beta {
        params.beta = Surd::from_rat(parse_rat(beta).map_err(|e| CliError::Input(e.to_string()))?);
    }
    // re-validate the (possibly overridden) pair
    MechanismParams::new(params.kind, params.alpha, params.beta).map_err(CliError::from)
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Params(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT_ERROR,
            CliError::Params(_) => EXIT_PARAMS_INFEASIBLE,
            CliError::Internal(_) => EXIT_INPUT_ERROR,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Params(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<MechanismError> for CliError {
    fn from(e: MechanismError) -> CliError {
        match e {
            MechanismError::ParamsInfeasible | MechanismError::BadParams(_) => {
                CliError::Params(e.to_string())
            }
            MechanismError::ThetaMissing
            | MechanismError::ThetaViolated(_, _)
            | MechanismError::UntypedAgent(_, _)
            | MechanismError::NotCapped(_)
            | MechanismError::MissingValuation(_) => CliError::Input(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

/// Exact values print as p/q; irrational field elements as 40-digit
/// decimals (unambiguous: they always carry a decimal point).
fn fmt_surd(x: &Surd) -> String {
    match x.as_rat() {
        Some(r) => fmt_rat(r),
        None => {
            let (approx, _) = x.approx_rat(140);
            let mut s = fmt_rat_decimal(&approx, 40);
            if !s.contains('.') {
                s.push_str(".0");
            }
            s
        }
    }
}

fn curve_config_from_env() -> CurveConfig {
    let mut config = CurveConfig::default();
    if let Ok(cap) = std::env::var("BUDGETMECH_SEGMENT_CAP") {
        if let Ok(cap) = cap.trim().parse::<usize>() {
            config.segment_cap = cap;
        }
    }
    config
}

pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { instance, mech, out, format } => {
            let inst = load_instance(&instance).map_err(CliError::Input)?;
            let params = build_params(&mech, Some(&inst))?;
            let outcome = run(&inst, &params).map_err(CliError::from)?;
            let content = match format {
                Format::Csv => outcome_csv(&inst, &outcome),
                Format::SummaryObject => {
                    let mut json = outcome_json(&inst, &params, &outcome);
                    json["instance"] = serde_json::Value::String(inst.digest());
                    format!("{}\n", serde_json::to_string_pretty(&json).unwrap())
                }
            };
            emit(&out, &content).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(EXIT_OK)
        }
        Command::Curve { instance, agent, mech, out } => {
            let inst = load_instance(&instance).map_err(CliError::Input)?;
            if agent >= inst.n() {
                return Err(CliError::Input(format!("agent {agent} out of range")));
            }
            let params = build_params(&mech, Some(&inst))?;
            let config = curve_config_from_env();
            let curve = allocation_curve_with(&inst, &params, agent, &config)
                .map_err(|e| CliError::Internal(e.to_string()))?;
            let mut content = String::from("u_lo,u_hi,form,a,b,d\n");
            for seg in &curve.segments {
                let form = match seg.form() {
                    SegmentForm::Const => "const",
                    SegmentForm::Affine => "affine",
                    SegmentForm::Hyperbolic => "hyperbolic",
                };
                content.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_surd(&seg.u_lo),
                    fmt_surd(&seg.u_hi),
                    form,
                    fmt_surd(&seg.a),
                    fmt_surd(&seg.b),
                    fmt_surd(&seg.d),
                ));
            }
            emit(&out, &content).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(EXIT_OK)
        }
        Command::Audit { instance, mech, out, format } => {
            let inst = load_instance(&instance).map_err(CliError::Input)?;
            let params = build_params(&mech, Some(&inst))?;
            let config = AuditConfig { curve: curve_config_from_env(), ..AuditConfig::default() };
            let report = run_audit(&inst, &params, &config).map_err(|e| match e {
                budgetmech::audit::AuditError::Mechanism(m) => CliError::from(m),
                other => CliError::Internal(other.to_string()),
            })?;
            let content = match format {
                Format::Csv => report.to_csv(),
                Format::SummaryObject => {
                    format!("{}\n", serde_json::to_string_pretty(&report.to_json()).unwrap())
                }
            };
            emit(&out, &content).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(if report.all_pass() { EXIT_OK } else { EXIT_PROPERTY_FAILURE })
        }
        Command::Gen { seed, n, profile, theta, types, out } => {
            let profile = match profile.as_str() {
                "plain" => Profile::Plain,
                "theta" => {
                    let theta = theta.ok_or_else(|| {
                        CliError::Input("theta profile needs --theta".into())
                    })?;
                    Profile::Theta(parse_rat(&theta).map_err(|e| CliError::Input(e.to_string()))?)
                }
                "capped" => Profile::Capped(types.unwrap_or(2)),
                "concave" => Profile::Concave(types.unwrap_or(2)),
                other => return Err(CliError::Input(format!("unknown profile `{other}`"))),
            };
            if n == 0 {
                return Err(CliError::Input("need at least one agent".into()));
            }
            let instance = gen_random(seed, n, &profile);
            let content = format!("{}\n", serialize_instance(&instance));
            emit(&out, &content).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(EXIT_OK)
        }
        Command::Bounds { from, to, step, out } => {
            let from = parse_rat(&from).map_err(|e| CliError::Input(e.to_string()))?;
            let to = parse_rat(&to).map_err(|e| CliError::Input(e.to_string()))?;
            let step = parse_rat(&step).map_err(|e| CliError::Input(e.to_string()))?;
            if from < Rat::one() || to < from || !num_traits::Signed::is_positive(&step) {
                return Err(CliError::Input(
                    "need 1 <= from <= to and a positive step".into(),
                ));
            }
            let mut content = String::from("theta,divisible_lower_bound,indivisible_lower_bound\n");
            let mut theta = from;
            while theta <= to {
                let (divisible, indivisible) = lower_bounds(&theta);
                content.push_str(&format!(
                    "{},{},{}\n",
                    fmt_rat(&theta),
                    fmt_rat(&divisible),
                    fmt_rat(&indivisible)
                ));
                theta += &step;
            }
            emit(&out, &content).map_err(|e| CliError::Internal(e.to_string()))?;
            Ok(EXIT_OK)
        }
    }
}

fn outcome_csv(instance: &Instance, outcome: &budgetmech::Outcome) -> String {
    let mut out = String::from("agent,x,payment,payment_error_bound,rho,tau\n");
    for agent in &instance.agents {
        let rho = outcome
            .diagnostics
            .rho_of(agent.id)
            .map(|r| match r {
                Rho::Infinite => "inf".to_string(),
                Rho::Finite(v) => fmt_rat(v),
            })
            .unwrap_or_default();
        let tau = outcome
            .diagnostics
            .tau
            .iter()
            .find(|(id, _)| *id == agent.id)
            .map(|(_, t)| fmt_surd(t))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{:.3e},{},{}\n",
            agent.id,
            fmt_surd(&outcome.x[agent.id]),
            fmt_rat_decimal(&outcome.payments[agent.id].value, 20),
            outcome.payments[agent.id].error_f64(),
            rho,
            tau,
        ));
    }
    out
}

fn outcome_json(
    instance: &Instance,
    params: &MechanismParams,
    outcome: &budgetmech::Outcome,
) -> serde_json::Value {
    let branch = match &outcome.branch {
        budgetmech::mechanisms::Branch::Star { winner } => {
            serde_json::json!({"kind": "star", "winner": winner})
        }
        budgetmech::mechanisms::Branch::Greedy { k, deselected_by_threat } => serde_json::json!({
            "kind": "greedy",
            "k": k,
            "deselected_by_threat": deselected_by_threat.iter().collect::<Vec<_>>(),
        }),
    };
    serde_json::json!({
        "mechanism": params.kind.as_str(),
        "alpha": params.alpha.to_f64(),
        "beta": params.beta.to_f64(),
        "branch": branch,
        "eligible": outcome.diagnostics.eligible,
        "order": outcome.diagnostics.order,
        "opt": fmt_rat(&outcome.diagnostics.opt),
        "opt_excl": outcome.diagnostics.opt_excl.iter()
            .map(|(id, v)| serde_json::json!([id, fmt_rat(v)])).collect::<Vec<_>>(),
        "agents": instance.agents.iter().map(|a| serde_json::json!({
            "id": a.id,
            "x": fmt_surd(&outcome.x[a.id]),
            "x_approx": outcome.x[a.id].to_f64(),
            "payment": fmt_rat_decimal(&outcome.payments[a.id].value, 20),
            "payment_approx": outcome.payments[a.id].value_f64(),
            "payment_error_bound": outcome.payments[a.id].error_f64(),
            "rho": outcome.diagnostics.rho_of(a.id).map(|r| r.to_f64()),
            "tau": outcome.diagnostics.tau.iter().find(|(id, _)| *id == a.id).map(|(_, t)| t.to_f64()),
        })).collect::<Vec<_>>(),
        "total_payment": outcome.payments.iter().map(|p| rat_to_f64(&p.value)).sum::<f64>(),
        "budget": rat_to_f64(&instance.budget),
    })
}
