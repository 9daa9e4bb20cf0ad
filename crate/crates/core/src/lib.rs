//! Budget-feasible procurement mechanisms for divisible agents.
//!
//! The crate implements four allocation rules over exact rational
//! arithmetic — the plain divisible-agents mechanism, its competitive-market
//! variant, and the capped-linear and concave typed extensions — together
//! with the exact fractional-optimum oracles they query, threshold payments
//! computed from piecewise allocation curves, and an audit harness that
//! verifies truthfulness, individual rationality, budget feasibility, and
//! approximation bounds on arbitrary instances.

pub mod audit;
pub mod curve;
pub mod fixtures;
pub mod gen;
pub mod instance;
pub mod mechanisms;
pub mod num;
pub mod oracle;
pub mod payments;
pub mod surd;

pub use instance::{parse_instance, serialize_instance, Agent, Instance, TypeValuation};
pub use mechanisms::{params_default, run, MechanismKind, MechanismParams, Outcome};
pub use num::Rat;
pub use surd::Surd;
