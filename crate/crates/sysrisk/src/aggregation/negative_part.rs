//! Aggregate loss as the weighted sum of the agents' debts:
//! `L(x) = -sum_i alpha_i (x_i)^-`.

use serde::Deserialize;
use serde_json::Value;

use super::{Aggregation, AggregationError, AggregationRef, Hypograph, HypographRow};

#[derive(Debug, Clone)]
pub struct NegativePart {
    alpha_i: Vec<f64>,
}

impl NegativePart {
    pub fn new(alpha_i: Vec<f64>) -> Result<Self, AggregationError> {
        if alpha_i.is_empty() {
            return Err(AggregationError::InvalidSpec("need at least one agent".into()));
        }
        if alpha_i.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(AggregationError::InvalidSpec(
                "negative_part coefficients must be finite and nonnegative".into(),
            ));
        }
        let support = alpha_i.iter().filter(|&&a| a > 0.0).count();
        if support > 16 {
            return Err(AggregationError::InvalidSpec(format!(
                "hypograph expansion has 2^{support} pieces; this variant is desk-scale only"
            )));
        }
        Ok(NegativePart { alpha_i })
    }

    pub fn alpha_i(&self) -> &[f64] {
        &self.alpha_i
    }
}

impl Aggregation for NegativePart {
    fn kind(&self) -> &'static str {
        "negative_part"
    }

    fn agents(&self) -> usize {
        self.alpha_i.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, AggregationError> {
        if x.len() != self.alpha_i.len() {
            return Err(AggregationError::DimensionMismatch {
                expected: self.alpha_i.len(),
                got: x.len(),
            });
        }
        Ok(-self
            .alpha_i
            .iter()
            .zip(x)
            .map(|(&a, &xi)| a * (-xi).max(0.0))
            .sum::<f64>())
    }

    /// Each term is `min(0, alpha_i x_i)`, so the sum is the minimum over
    /// agent subsets `S` of `sum_{i in S} alpha_i x_i`; one piece per
    /// subset of the support.
    fn hypograph(&self) -> Hypograph {
        let n = self.alpha_i.len();
        let support: Vec<usize> =
            (0..n).filter(|&i| self.alpha_i[i] > 0.0).collect();
        let mut rows = Vec::with_capacity(1 << support.len());
        for mask in 0u32..(1 << support.len()) {
            let mut x_coef = vec![0.0; n];
            for (bit, &i) in support.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    x_coef[i] = -self.alpha_i[i];
                }
            }
            rows.push(HypographRow { x_coef, u_coef: 1.0, aux_coef: Vec::new(), rhs: 0.0 });
        }
        Hypograph { agents: n, aux: 0, aux_upper: Vec::new(), rows }
    }
}

#[derive(Deserialize)]
struct NegativePartSpec {
    alpha_i: Vec<f64>,
}

pub(super) fn load(value: &Value) -> Result<AggregationRef, AggregationError> {
    let spec: NegativePartSpec = serde_json::from_value(value.clone())
        .map_err(|e| AggregationError::Json(e.to_string()))?;
    Ok(std::sync::Arc::new(NegativePart::new(spec.alpha_i)?))
}
