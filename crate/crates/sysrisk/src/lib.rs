//! Robust market-adjusted systemic risk measures on finite scenario spaces.
//!
//! The library computes the capital requirement `rho(X)` of an N-agent
//! financial system: the minimal total capital, allocated across agents
//! before aggregation, that makes the aggregate position acceptable after
//! each agent is allowed to add a zero-cost market payoff. Everything is
//! scenario-pointwise (no reference probability) and polyhedral, so every
//! quantity reduces to a linear program solved by the built-in simplex
//! kernel:
//!
//! * [`model`] — scenario spaces, payoff profiles, vectors of measures and
//!   the bilinear pairing between them.
//! * [`aggregation`] — concave increasing aggregation functions behind a
//!   common trait, each with a polyhedral hypograph for LP embedding.
//! * [`acceptance`] — monotone acceptance sets as LP constraint generators.
//! * [`market`] — achievable zero-cost payoff sets, optionally generated
//!   from multi-period price paths on a scenario tree.
//! * [`lp`] — dense two-phase primal simplex with Bland's rule, returning
//!   dual multipliers and infeasibility/unboundedness certificates.
//! * [`risk`] — the risk measures `rho` and `rho_gamma`, their dual
//!   representations, regulatory-arbitrage detection, fair measure
//!   extraction and penalty decomposition.
//! * [`io`] — JSON schemas for instances and byte-stable report output.
//!
//! Aggregation and acceptance variants are registered by name and selected
//! at runtime from instance files; see [`aggregation::registry`] and
//! [`acceptance::registry`].

pub mod acceptance;
pub mod aggregation;
pub mod io;
pub mod lp;
pub mod market;
pub mod model;
pub mod risk;

// Brute-force reference implementations used by the test suites. Not part
// of the supported API surface.
#[doc(hidden)]
pub mod oracle;

pub use model::{pairing, MeasureVector, ProbabilityVector, RandomVector, ScenarioSpace};
pub use risk::{Instance, RiskResult, RiskStatus};
