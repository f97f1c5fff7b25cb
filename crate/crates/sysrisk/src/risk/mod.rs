//! Market-adjusted systemic risk measures and their dual side.
//!
//! [`compute_rho`] solves the primal capital-requirement program,
//! [`compute_dual`] extracts the maximizing vector of probability measures
//! from the LP multipliers and independently rebuilds its penalty from
//! support functions, and the remaining operations cover
//! regulatory-arbitrage detection, fair-measure extraction and the market
//! richness condition.

pub mod assemble;
mod arbitrage;
mod assumption;
mod dual;
mod fair;
mod verify;

pub use arbitrage::{detect_regulatory_arbitrage, ArbitrageCertificate, ArbitrageReport};
pub use assumption::{check_assumption_a, AssumptionAEntry, AssumptionAReport};
pub use dual::{
    compute_dual, dual_objective_at, penalty_decomposition, support_function, DualResult,
    PenaltyDecomposition, SupportTarget,
};
pub use fair::{find_fair_measure, is_fair, FairMeasure};
pub use verify::{verify_instance, PropertyResult, VerifyReport};

use serde::Serialize;
use thiserror::Error;

use crate::acceptance::{AcceptanceError, AcceptanceRef};
use crate::aggregation::{AggregationError, AggregationRef};
use crate::lp::{LpError, LpResult};
use crate::market::{MarketError, MarketSet};
use crate::model::{ModelError, RandomVector, SpaceRef};

use assemble::{assemble_primal, assemble_primal_gamma, AssembledLp};

#[derive(Debug, Error)]
pub enum RiskError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("instance has no second aggregation function")]
    MissingGamma,
    #[error("operation requires a finite risk value, got {0:?}")]
    NotFinite(RiskStatus),
    #[error("dual extraction failed: {0}")]
    DualExtractionFailed(String),
    #[error("fair-measure validation failed: {0}")]
    FairValidationFailed(String),
    #[error("fairness is defined for span markets only")]
    NotASpan,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Acceptance(#[from] AcceptanceError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Extended real value used for penalties, support functions and the
/// risk threshold. Serialized as a number or the strings `"+inf"/"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PlusInf,
    MinusInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Sum with the convention `+inf + -inf` forbidden (panics).
    pub fn add(self, other: ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            (ExtReal::PlusInf, ExtReal::MinusInf) | (ExtReal::MinusInf, ExtReal::PlusInf) => {
                panic!("undefined extended sum")
            }
            (ExtReal::PlusInf, _) | (_, ExtReal::PlusInf) => ExtReal::PlusInf,
            (ExtReal::MinusInf, _) | (_, ExtReal::MinusInf) => ExtReal::MinusInf,
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => serializer.serialize_f64(*v),
            ExtReal::PlusInf => serializer.serialize_str("+inf"),
            ExtReal::MinusInf => serializer.serialize_str("-inf"),
        }
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PlusInf => write!(f, "+inf"),
            ExtReal::MinusInf => write!(f, "-inf"),
        }
    }
}

/// Tolerances used by the engine. All configurable; the defaults leave
/// headroom over the LP kernel's reported 1e-8 residuals.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Additive tolerance on acceptance-constraint residuals.
    pub acceptance: f64,
    /// Row-sum tolerance when validating dual multipliers as probabilities.
    pub probability: f64,
    /// Tolerance on `sum_i E^{Q_i}[g^i]` in fairness checks.
    pub fairness: f64,
    /// Relative tolerance on the primal-dual gap.
    pub dual_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { acceptance: 1e-9, probability: 1e-7, fairness: 1e-9, dual_gap: 1e-6 }
    }
}

/// A fully wired risk-measurement problem: scenario space, aggregation,
/// acceptance set, market, and optionally a second aggregation for the
/// trade side. Components are validated for mutual consistency at
/// construction; the structural standing assumptions (monotone acceptance
/// with `0` acceptable, concave increasing aggregation vanishing at zero,
/// convex market) then hold by construction of the component types.
#[derive(Debug, Clone)]
pub struct Instance {
    space: SpaceRef,
    agents: usize,
    lambda: AggregationRef,
    acceptance: AcceptanceRef,
    market: MarketSet,
    gamma_agg: Option<AggregationRef>,
    tol: Tolerances,
}

impl Instance {
    pub fn new(
        space: SpaceRef,
        agents: usize,
        lambda: AggregationRef,
        acceptance: AcceptanceRef,
        market: MarketSet,
    ) -> Result<Self, RiskError> {
        if agents == 0 {
            return Err(RiskError::InvalidInput("need at least one agent".into()));
        }
        if lambda.agents() != agents {
            return Err(RiskError::DimensionMismatch(format!(
                "aggregation is {}-dimensional, instance has {agents} agents",
                lambda.agents()
            )));
        }
        if let Some(required) = acceptance.scenario_requirement() {
            if required != space.len() {
                return Err(RiskError::DimensionMismatch(format!(
                    "acceptance set is pinned to {required} scenarios, space has {}",
                    space.len()
                )));
            }
        }
        if let Some(required) = acceptance.agent_requirement() {
            if required != agents {
                return Err(RiskError::DimensionMismatch(format!(
                    "acceptance set is pinned to {required} agents, instance has {agents}"
                )));
            }
        }
        if !market.space().same_as(&space) || market.agents() != agents {
            return Err(RiskError::DimensionMismatch(
                "market references a different space or agent count".into(),
            ));
        }
        Ok(Instance {
            space,
            agents,
            lambda,
            acceptance,
            market,
            gamma_agg: None,
            tol: Tolerances::default(),
        })
    }

    /// Attaches the second aggregation function for the trade side.
    pub fn with_gamma_agg(mut self, gamma_agg: AggregationRef) -> Result<Self, RiskError> {
        if gamma_agg.agents() != self.agents {
            return Err(RiskError::DimensionMismatch(format!(
                "second aggregation is {}-dimensional, instance has {} agents",
                gamma_agg.agents(),
                self.agents
            )));
        }
        self.gamma_agg = Some(gamma_agg);
        Ok(self)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn lambda(&self) -> &AggregationRef {
        &self.lambda
    }

    pub fn acceptance(&self) -> &AcceptanceRef {
        &self.acceptance
    }

    pub fn market(&self) -> &MarketSet {
        &self.market
    }

    pub fn gamma_agg(&self) -> Option<&AggregationRef> {
        self.gamma_agg.as_ref()
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Same instance with the trivial market `G = {0}`.
    pub fn without_market(&self) -> Instance {
        let mut inst = self.clone();
        inst.market = MarketSet::zero(self.space.clone(), self.agents);
        inst
    }

    pub fn zero_position(&self) -> RandomVector {
        RandomVector::zero(self.space.clone(), self.agents)
    }

    fn check_position(&self, x: &RandomVector) -> Result<(), RiskError> {
        x.check_compatible(&self.space, self.agents)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskStatus {
    /// The program attains a finite optimum.
    Finite,
    /// Unbounded below: the regulatory-arbitrage regime.
    MinusInfinity,
    /// The defining set is empty.
    PlusInfinity,
}

/// Result of a risk computation. On `Finite` the optimal allocation and
/// trade satisfy the acceptance test within tolerance and the allocation
/// total equals the value.
#[derive(Debug)]
pub struct RiskResult {
    pub status: RiskStatus,
    /// Optimal value when finite.
    pub value: Option<f64>,
    /// Optimal capital allocation `m*`.
    pub allocation: Option<Vec<f64>>,
    /// Optimal trade coefficients over the market basis.
    pub trade: Option<Vec<f64>>,
    /// Feasible point and improving direction when unbounded, as
    /// `(allocation, trade)` pairs.
    pub ray: Option<RiskRay>,
    /// The assembled LP and its raw solution, for dual extraction.
    pub assembled: AssembledLp,
    pub lp_result: LpResult,
}

#[derive(Debug, Clone)]
pub struct RiskRay {
    pub base_allocation: Vec<f64>,
    pub base_trade: Vec<f64>,
    pub dir_allocation: Vec<f64>,
    pub dir_trade: Vec<f64>,
}

impl RiskResult {
    pub fn ext_value(&self) -> ExtReal {
        match self.status {
            RiskStatus::Finite => ExtReal::Finite(self.value.expect("finite result has value")),
            RiskStatus::MinusInfinity => ExtReal::MinusInf,
            RiskStatus::PlusInfinity => ExtReal::PlusInf,
        }
    }
}

fn pick(primal: &[f64], vars: &[usize]) -> Vec<f64> {
    vars.iter().map(|&v| primal[v]).collect()
}

fn finish(inst: &Instance, x: &RandomVector, assembled: AssembledLp) -> Result<RiskResult, RiskError> {
    let lp_result = assembled.lp.solve()?;
    let result = match &lp_result {
        LpResult::Optimal(sol) => RiskResult {
            status: RiskStatus::Finite,
            value: Some(sol.value),
            allocation: Some(pick(&sol.primal, &assembled.m_vars)),
            trade: Some(pick(&sol.primal, &assembled.h_vars)),
            ray: None,
            assembled,
            lp_result,
        },
        LpResult::Unbounded(ray) => RiskResult {
            status: RiskStatus::MinusInfinity,
            value: None,
            allocation: None,
            trade: None,
            ray: Some(RiskRay {
                base_allocation: pick(&ray.point, &assembled.m_vars),
                base_trade: pick(&ray.point, &assembled.h_vars),
                dir_allocation: pick(&ray.direction, &assembled.m_vars),
                dir_trade: pick(&ray.direction, &assembled.h_vars),
            }),
            assembled,
            lp_result,
        },
        LpResult::Infeasible(_) => RiskResult {
            status: RiskStatus::PlusInfinity,
            value: None,
            allocation: None,
            trade: None,
            ray: None,
            assembled,
            lp_result,
        },
    };
    if cfg!(debug_assertions) {
        if let RiskStatus::Finite = result.status {
            debug_validate_finite(inst, x, &result)?;
        }
    }
    Ok(result)
}

/// Feasibility of the reported optimum, checked in debug builds: the
/// aggregate of `m* + X + g*` (plus the trade aggregate in the
/// second-aggregation form) is acceptable and the allocation sums to the
/// value.
fn debug_validate_finite(
    inst: &Instance,
    x: &RandomVector,
    result: &RiskResult,
) -> Result<(), RiskError> {
    let m = result.allocation.as_ref().expect("finite");
    let h = result.trade.as_ref().expect("finite");
    let value = result.value.expect("finite");
    let total: f64 = m.iter().sum();
    debug_assert!(
        (total - value).abs() <= 1e-8 * (1.0 + value.abs()),
        "allocation total {total} differs from value {value}"
    );
    let k = inst.space().len();
    let g = inst.market().combine(h)?;
    let mut aggregate = vec![0.0; k];
    match inst.gamma_agg() {
        None => {
            let shifted = x.add(&g)?.add_constant(m)?;
            for w in 0..k {
                aggregate[w] = inst.lambda().evaluate(&shifted.column(w))?;
            }
        }
        Some(gamma_agg) => {
            let shifted = x.add_constant(m)?;
            for w in 0..k {
                aggregate[w] = inst.lambda().evaluate(&shifted.column(w))?
                    + gamma_agg.evaluate(&g.column(w))?;
            }
        }
    }
    let ok = inst
        .acceptance()
        .is_acceptable(&aggregate, inst.tolerances().acceptance.max(1e-6))?;
    debug_assert!(ok, "reported optimum is not acceptable: aggregate {aggregate:?}");
    Ok(())
}

/// The market-adjusted systemic risk measure `rho(X)`: the least total
/// capital `sum_i m_i` such that some achievable zero-cost payoff makes
/// the aggregated system acceptable.
pub fn compute_rho(inst: &Instance, x: &RandomVector) -> Result<RiskResult, RiskError> {
    finish(inst, x, assemble_primal(inst, x)?)
}

/// The variant with a second aggregation applied to the trade:
/// acceptability of `L(m + X) + G2(g)`.
pub fn compute_rho_gamma(inst: &Instance, x: &RandomVector) -> Result<RiskResult, RiskError> {
    finish(inst, x, assemble_primal_gamma(inst, x)?)
}

/// Dispatches on whether the instance carries a second aggregation.
pub fn compute_risk(inst: &Instance, x: &RandomVector) -> Result<RiskResult, RiskError> {
    if inst.gamma_agg().is_some() {
        compute_rho_gamma(inst, x)
    } else {
        compute_rho(inst, x)
    }
}

/// The canonical threshold `gamma* = rho(0)` of the instance.
pub fn compute_gamma(inst: &Instance) -> Result<ExtReal, RiskError> {
    Ok(compute_risk(inst, &inst.zero_position())?.ext_value())
}
