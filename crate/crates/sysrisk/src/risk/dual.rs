//! Dual representation: extraction of the maximizing measure vector from
//! LP multipliers and independent reconstruction of its penalty from
//! support functions.
//!
//! The penalty of a generalized scenario `Q` splits into the support
//! function of the aggregate-acceptance set and that of the market:
//! `rho*(-Q) = sigma_{L^{-1}(A)}(Q) + sigma_G(-Q)`. In the
//! second-aggregation variant the market is absorbed into the acceptance
//! side (`L(W) + G2(g) in A` for some `g`), and the market component is
//! identically zero.

use crate::lp::LpResult;
use crate::model::{pairing, validate_probability_rows, ProbabilityVector, RandomVector};

use super::assemble::{assemble_support_acceptance, assemble_support_acceptance_gamma};
use super::{compute_risk, ExtReal, Instance, RiskError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportTarget {
    /// `sigma_{L^{-1}(A)}(sign Q) = sup { sum_i E^{(sign Q)_i}[-W^i] : L(W) in A }`.
    AggregateAcceptance,
    /// `sigma_G(sign Q) = sup { sum_i E^{(sign Q)_i}[-g^i] : g in G }`.
    Market,
}

/// Support function of the chosen set at `sign * Q`; unboundedness is the
/// value `+inf`.
pub fn support_function(
    inst: &Instance,
    target: SupportTarget,
    q: &ProbabilityVector,
    sign: i8,
) -> Result<ExtReal, RiskError> {
    if sign != 1 && sign != -1 {
        return Err(RiskError::InvalidInput(format!("sign must be +1 or -1, got {sign}")));
    }
    if !q.space().same_as(inst.space()) || q.agents() != inst.agents() {
        return Err(RiskError::DimensionMismatch(
            "measure vector does not match the instance".into(),
        ));
    }
    match target {
        SupportTarget::AggregateAcceptance => {
            let weights: Vec<Vec<f64>> = q
                .weights()
                .iter()
                .map(|row| row.iter().map(|&v| sign as f64 * v).collect())
                .collect();
            support_lp_value(assemble_support_acceptance(inst, &weights)?)
        }
        SupportTarget::Market => {
            let tol = inst.tolerances().fairness;
            let mut value = ExtReal::Finite(0.0);
            for g in inst.market().basis() {
                let ip = pairing(g, q.as_measure())?;
                let gain = -(sign as f64) * ip;
                let unbounded = if inst.market().is_span() {
                    ip.abs() > tol
                } else {
                    gain > tol
                };
                if unbounded {
                    value = ExtReal::PlusInf;
                    break;
                }
            }
            Ok(value)
        }
    }
}

fn support_lp_value(lp: crate::lp::LinearProgram) -> Result<ExtReal, RiskError> {
    match lp.solve()? {
        LpResult::Optimal(sol) => Ok(ExtReal::Finite(sol.value)),
        LpResult::Unbounded(_) => Ok(ExtReal::PlusInf),
        LpResult::Infeasible(_) => Err(RiskError::InvalidInput(
            "support-function LP is infeasible; the acceptance set is empty".into(),
        )),
    }
}

/// The two penalty components at `Q`.
#[derive(Debug, Clone, Copy)]
pub struct PenaltyDecomposition {
    /// `sigma_{L^{-1}(A)}(Q)`, with the market absorbed in the
    /// second-aggregation form.
    pub acceptance_component: ExtReal,
    /// `sigma_G(-Q)`; zero in the second-aggregation form.
    pub market_component: ExtReal,
}

impl PenaltyDecomposition {
    pub fn total(&self) -> ExtReal {
        self.acceptance_component.add(self.market_component)
    }
}

/// Computes `(sigma_{L^{-1}(A)}(Q), sigma_G(-Q))`. Their sum dominates
/// `rho*(-Q)` everywhere and matches it at every dual optimizer.
pub fn penalty_decomposition(
    inst: &Instance,
    q: &ProbabilityVector,
) -> Result<PenaltyDecomposition, RiskError> {
    match inst.gamma_agg() {
        None => Ok(PenaltyDecomposition {
            acceptance_component: support_function(inst, SupportTarget::AggregateAcceptance, q, 1)?,
            market_component: support_function(inst, SupportTarget::Market, q, -1)?,
        }),
        Some(_) => {
            let weights = q.weights().to_vec();
            let lp = assemble_support_acceptance_gamma(inst, &weights)?;
            Ok(PenaltyDecomposition {
                acceptance_component: support_lp_value(lp)?,
                market_component: ExtReal::Finite(0.0),
            })
        }
    }
}

/// The dual objective `sum_i E^{Q_i}[-X^i] - penalty(Q)` at an arbitrary
/// `Q`; by weak duality it never exceeds the primal value.
pub fn dual_objective_at(
    inst: &Instance,
    x: &RandomVector,
    q: &ProbabilityVector,
) -> Result<ExtReal, RiskError> {
    let expectation = -pairing(x, q.as_measure())?;
    let penalty = penalty_decomposition(inst, q)?.total();
    Ok(match penalty {
        ExtReal::Finite(p) => ExtReal::Finite(expectation - p),
        ExtReal::PlusInf => ExtReal::MinusInf,
        ExtReal::MinusInf => ExtReal::PlusInf,
    })
}

/// The dual side of a finite risk computation.
#[derive(Debug)]
pub struct DualResult {
    /// The maximizing vector of probability measures.
    pub q: ProbabilityVector,
    /// `rho*(-Q*)`, rebuilt independently from the support functions.
    pub penalty: f64,
    pub decomposition: PenaltyDecomposition,
    /// `sum_i E^{Q*_i}[-X^i] - penalty`.
    pub dual_value: f64,
    pub primal_value: f64,
}

/// Solves the primal, reads the multipliers of the scenario rows off the
/// optimal basis, validates them as a vector of probability measures and
/// rebuilds the penalty via [`penalty_decomposition`]. The reported dual
/// value matches the primal value within the dual-gap tolerance, realizing
/// the attained maximum of the dual representation.
pub fn compute_dual(inst: &Instance, x: &RandomVector) -> Result<DualResult, RiskError> {
    let result = compute_risk(inst, x)?;
    let sol = match &result.lp_result {
        LpResult::Optimal(sol) => sol,
        _ => return Err(RiskError::NotFinite(result.status)),
    };
    let q_rows = result.assembled.extract_q_rows(&sol.duals);
    let q = validate_probability_rows(inst.space().clone(), q_rows, inst.tolerances().probability)
        .map_err(|e| RiskError::DualExtractionFailed(e.to_string()))?;
    let decomposition = penalty_decomposition(inst, &q)?;
    let penalty = match decomposition.total() {
        ExtReal::Finite(p) => p,
        other => {
            return Err(RiskError::DualExtractionFailed(format!(
                "penalty is {other} at the extracted optimizer"
            )))
        }
    };
    let dual_value = -pairing(x, q.as_measure())? - penalty;
    let primal_value = sol.value;
    let gap = (dual_value - primal_value).abs();
    if gap > inst.tolerances().dual_gap * (1.0 + primal_value.abs()) {
        return Err(RiskError::DualExtractionFailed(format!(
            "duality gap {gap} between primal {primal_value} and dual {dual_value}"
        )));
    }
    Ok(DualResult { q, penalty, decomposition, dual_value, primal_value })
}
