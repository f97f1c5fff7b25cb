//! Regulatory-arbitrage detection.
//!
//! The instance is arbitrage-free at threshold `gamma` exactly when no
//! allocation with total capital below `gamma` can be made acceptable by
//! zero-cost trading, i.e. when `gamma <= rho(0)`. When it fails, the
//! optimal allocation (or a point far enough along the unbounded ray)
//! certifies the opportunity.

use serde::Serialize;

use super::{compute_risk, ExtReal, Instance, RiskError, RiskStatus};

#[derive(Debug, Clone, Serialize)]
pub struct ArbitrageCertificate {
    /// Allocation with `sum m < gamma` that trading makes acceptable.
    pub allocation: Vec<f64>,
    /// Trade coefficients over the market basis.
    pub trade: Vec<f64>,
    pub total_capital: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArbitrageReport {
    /// Threshold tested.
    pub gamma: f64,
    /// Canonical threshold `rho(0)` of the instance.
    pub gamma_star: ExtReal,
    pub arbitrage_free: bool,
    pub certificate: Option<ArbitrageCertificate>,
    /// The theory fixes `gamma <= 0`; a positive `rho(0)` is flagged
    /// rather than rejected.
    pub positive_gamma_star: bool,
}

pub fn detect_regulatory_arbitrage(
    inst: &Instance,
    gamma: f64,
) -> Result<ArbitrageReport, RiskError> {
    if !gamma.is_finite() {
        return Err(RiskError::InvalidInput(format!("threshold must be finite, got {gamma}")));
    }
    let result = compute_risk(inst, &inst.zero_position())?;
    match result.status {
        RiskStatus::Finite => {
            let gamma_star = result.value.expect("finite");
            let arbitrage_free = gamma_star >= gamma;
            let certificate = if arbitrage_free {
                None
            } else {
                Some(ArbitrageCertificate {
                    allocation: result.allocation.clone().expect("finite"),
                    trade: result.trade.clone().expect("finite"),
                    total_capital: gamma_star,
                })
            };
            Ok(ArbitrageReport {
                gamma,
                gamma_star: ExtReal::Finite(gamma_star),
                arbitrage_free,
                certificate,
                positive_gamma_star: gamma_star > 0.0,
            })
        }
        RiskStatus::MinusInfinity => {
            // Walk the improving ray until the total drops below gamma.
            let ray = result.ray.as_ref().expect("unbounded result carries a ray");
            let base_total: f64 = ray.base_allocation.iter().sum();
            let dir_total: f64 = ray.dir_allocation.iter().sum();
            debug_assert!(dir_total < 0.0, "unbounded ray must decrease the objective");
            let needed = base_total - (gamma - 1.0);
            let t = if needed > 0.0 { needed / (-dir_total) } else { 0.0 };
            let allocation: Vec<f64> = ray
                .base_allocation
                .iter()
                .zip(&ray.dir_allocation)
                .map(|(b, d)| b + t * d)
                .collect();
            let trade: Vec<f64> = ray
                .base_trade
                .iter()
                .zip(&ray.dir_trade)
                .map(|(b, d)| b + t * d)
                .collect();
            let total_capital: f64 = allocation.iter().sum();
            Ok(ArbitrageReport {
                gamma,
                gamma_star: ExtReal::MinusInf,
                arbitrage_free: false,
                certificate: Some(ArbitrageCertificate { allocation, trade, total_capital }),
                positive_gamma_star: false,
            })
        }
        RiskStatus::PlusInfinity => Err(RiskError::NotFinite(RiskStatus::PlusInfinity)),
    }
}
