//! The market-richness condition (assumption A).
//!
//! For a threshold `gamma` the condition asks, for every `n`, for a
//! `z >= 0` and a trade `g in G` making the uniform buffer profile
//! `[gamma/N + 1/n - n(Z - z)^+] 1` acceptable. On a finite space the
//! choice `z = max Z` kills the `(Z - z)^+` term (the compact-sample-space
//! case), leaving an LP feasibility question per `n`. The condition
//! implies `rho(-n(Z - z_n)^+ 1) <= N/n + gamma`, which is re-checked
//! through a full risk computation.

use serde::Serialize;

use crate::lp::LpResult;
use crate::model::RandomVector;

use super::assemble::assemble_buffer_feasibility;
use super::{compute_risk, ExtReal, Instance, RiskError};

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionAEntry {
    pub n: usize,
    /// `gamma/N + 1/n`.
    pub buffer: f64,
    pub holds: bool,
    /// Witnessing trade coefficients when the buffer is achievable.
    pub witness: Option<Vec<f64>>,
    /// `rho(-n(Z - z)^+ 1)`.
    pub implied_bound_lhs: ExtReal,
    /// `N/n + gamma`.
    pub implied_bound_rhs: f64,
    pub implied_bound_holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionAReport {
    pub gamma: f64,
    /// `z` used for every `n`; the maximum of `Z` over the space.
    pub z: f64,
    pub entries: Vec<AssumptionAEntry>,
    /// Condition verified for every `n` up to `n_max`.
    pub all_hold: bool,
}

pub fn check_assumption_a(
    inst: &Instance,
    gamma: f64,
    n_max: usize,
) -> Result<AssumptionAReport, RiskError> {
    if n_max == 0 {
        return Err(RiskError::InvalidInput("n_max must be at least 1".into()));
    }
    if !gamma.is_finite() {
        return Err(RiskError::InvalidInput(format!("gamma must be finite, got {gamma}")));
    }
    let n_agents = inst.agents() as f64;
    let z = inst.space().max_z();
    let mut entries = Vec::with_capacity(n_max);
    let mut all_hold = true;
    for n in 1..=n_max {
        let buffer = gamma / n_agents + 1.0 / n as f64;
        let (lp, h_vars) = assemble_buffer_feasibility(inst, buffer)?;
        let (holds, witness) = match lp.solve()? {
            LpResult::Optimal(sol) => {
                (true, Some(h_vars.iter().map(|&v| sol.primal[v]).collect()))
            }
            LpResult::Infeasible(_) => (false, None),
            LpResult::Unbounded(_) => {
                return Err(RiskError::InvalidInput(
                    "feasibility LP with zero objective reported unbounded".into(),
                ))
            }
        };
        // rho(-n (Z - z)^+ 1); with z = max Z the payoff vanishes, but the
        // profile is built from the formula rather than assumed zero.
        let payoff: Vec<f64> = inst
            .space()
            .z_values()
            .iter()
            .map(|&zv| -(n as f64) * (zv - z).max(0.0))
            .collect();
        let profile = RandomVector::new(
            inst.space().clone(),
            vec![payoff; inst.agents()],
        )?;
        let lhs = compute_risk(inst, &profile)?.ext_value();
        let rhs = n_agents / n as f64 + gamma;
        let implied_bound_holds = match lhs {
            ExtReal::Finite(v) => v <= rhs + 1e-8,
            ExtReal::MinusInf => true,
            ExtReal::PlusInf => false,
        };
        all_hold = all_hold && holds && implied_bound_holds;
        entries.push(AssumptionAEntry {
            n,
            buffer,
            holds,
            witness,
            implied_bound_lhs: lhs,
            implied_bound_rhs: rhs,
            implied_bound_holds,
        });
    }
    Ok(AssumptionAReport { gamma, z, entries, all_hold })
}
