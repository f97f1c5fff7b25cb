//! Fair measure vectors: probability vectors under which every achievable
//! zero-cost payoff profile has zero total expectation.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::market::MarketSet;
use crate::model::{pairing, ProbabilityVector, RandomVector};

use super::{compute_dual, compute_gamma, compute_risk, ExtReal, Instance, RiskError, RiskStatus};

/// True iff `|sum_i E^{Q_i}[g^i]| <= tol` for every basis payoff. Stated
/// for linear spaces of payoffs, so cone-mode markets are rejected.
pub fn is_fair(q: &ProbabilityVector, market: &MarketSet, tol: f64) -> Result<bool, RiskError> {
    if !market.is_span() {
        return Err(RiskError::NotASpan);
    }
    if !q.space().same_as(market.space()) || q.agents() != market.agents() {
        return Err(RiskError::DimensionMismatch(
            "measure vector does not match the market".into(),
        ));
    }
    for g in market.basis() {
        if pairing(g, q.as_measure())?.abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A fair measure together with its sampled validation evidence.
#[derive(Debug)]
pub struct FairMeasure {
    pub q: ProbabilityVector,
    pub gamma_requested: f64,
    pub gamma_star: f64,
    pub samples: usize,
    pub seed: u64,
    /// Smallest sampled value of `sum_i E^{Q_i}[X^i] - gamma`; the dual
    /// argument guarantees it is nonnegative up to solver noise.
    pub worst_margin: f64,
}

/// Extracts the dual optimizer at `X = 0` as the evaluation measure of
/// the theorem's second condition, provided `gamma <= rho(0)`. Returns
/// `None` when no fair measure can exist for this threshold (above
/// `rho(0)`, or `rho(0) = -inf`).
///
/// The returned vector is post-validated on `samples` random positions
/// `X` that trading makes acceptable, drawn from the given seed:
/// each must satisfy `sum_i E^{Q_i}[X^i] >= gamma - 1e-6`.
pub fn find_fair_measure(
    inst: &Instance,
    gamma: f64,
    seed: u64,
    samples: usize,
) -> Result<Option<FairMeasure>, RiskError> {
    let gamma_star = match compute_gamma(inst)? {
        ExtReal::Finite(v) => v,
        ExtReal::MinusInf => return Ok(None),
        ExtReal::PlusInf => return Err(RiskError::NotFinite(RiskStatus::PlusInfinity)),
    };
    if gamma > gamma_star {
        return Ok(None);
    }
    let dual = compute_dual(inst, &inst.zero_position())?;
    let q = dual.q;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = inst.agents();
    let k = inst.space().len();
    let mut worst_margin = f64::INFINITY;
    for sample in 0..samples {
        // A position in the acceptable-after-trading set: start anywhere,
        // shift by an optimal allocation plus nonnegative slack, and (in
        // the plain form) subtract a random market payoff.
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let w0 = RandomVector::new(inst.space().clone(), raw)?;
        let rr = compute_risk(inst, &w0)?;
        let m = match rr.allocation {
            Some(m) => m,
            None => {
                return Err(RiskError::FairValidationFailed(format!(
                    "sample {sample}: risk of a bounded position is not finite"
                )))
            }
        };
        let shift: Vec<f64> = m.iter().map(|&mi| mi + rng.gen_range(0.0..1.0)).collect();
        let mut x = w0.add_constant(&shift)?;
        if inst.gamma_agg().is_none() && !inst.market().basis().is_empty() {
            let coefs: Vec<f64> = (0..inst.market().basis().len())
                .map(|_| {
                    if inst.market().is_span() {
                        rng.gen_range(-1.0..1.0)
                    } else {
                        rng.gen_range(0.0..1.0)
                    }
                })
                .collect();
            let g = inst.market().combine(&coefs)?;
            x = x.add(&g.scale(-1.0))?;
        }
        let margin = pairing(&x, q.as_measure())? - gamma;
        worst_margin = worst_margin.min(margin);
        if margin < -1e-6 {
            return Err(RiskError::FairValidationFailed(format!(
                "sample {sample}: total expectation undercuts gamma by {}",
                -margin
            )));
        }
    }
    Ok(Some(FairMeasure {
        q,
        gamma_requested: gamma,
        gamma_star,
        samples,
        seed,
        worst_margin,
    }))
}
