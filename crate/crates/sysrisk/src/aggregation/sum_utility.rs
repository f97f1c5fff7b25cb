//! Utility-sum aggregation:
//! `L(x) = alpha u(sum_i x_i) + sum_i alpha_i u_i(x_i)` with concave
//! increasing piecewise-linear `u`, `u_i` vanishing at zero.

use serde::Deserialize;
use serde_json::Value;

use super::{
    check_zero_at_origin, Aggregation, AggregationError, AggregationRef, Hypograph, HypographRow,
    PiecewiseLinear,
};

#[derive(Debug, Clone)]
pub struct SumUtility {
    alpha: f64,
    u: PiecewiseLinear,
    alpha_i: Vec<f64>,
    u_i: Vec<PiecewiseLinear>,
}

impl SumUtility {
    pub fn new(
        alpha: f64,
        u: PiecewiseLinear,
        alpha_i: Vec<f64>,
        u_i: Vec<PiecewiseLinear>,
    ) -> Result<Self, AggregationError> {
        if alpha_i.is_empty() {
            return Err(AggregationError::InvalidSpec("need at least one agent".into()));
        }
        if alpha_i.len() != u_i.len() {
            return Err(AggregationError::InvalidSpec(format!(
                "{} agent coefficients but {} agent utilities",
                alpha_i.len(),
                u_i.len()
            )));
        }
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(AggregationError::InvalidSpec(format!(
                "alpha must be finite and nonnegative, got {alpha}"
            )));
        }
        if alpha_i.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(AggregationError::InvalidSpec(
                "alpha_i must be finite and nonnegative".into(),
            ));
        }
        let agg = SumUtility { alpha, u, alpha_i, u_i };
        check_zero_at_origin(&agg, 1e-9)?;
        Ok(agg)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_i(&self) -> &[f64] {
        &self.alpha_i
    }

    pub fn common_utility(&self) -> &PiecewiseLinear {
        &self.u
    }

    pub fn agent_utilities(&self) -> &[PiecewiseLinear] {
        &self.u_i
    }
}

impl Aggregation for SumUtility {
    fn kind(&self) -> &'static str {
        "sum_utility"
    }

    fn agents(&self) -> usize {
        self.alpha_i.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, AggregationError> {
        let n = self.alpha_i.len();
        if x.len() != n {
            return Err(AggregationError::DimensionMismatch { expected: n, got: x.len() });
        }
        let total: f64 = x.iter().sum();
        let mut v = self.alpha * self.u.evaluate(total);
        for i in 0..n {
            if self.alpha_i[i] != 0.0 {
                v += self.alpha_i[i] * self.u_i[i].evaluate(x[i]);
            }
        }
        Ok(v)
    }

    /// One auxiliary variable per active utility term (`s` for the common
    /// term, `s_i` per agent term); the term pieces bound the auxiliaries
    /// and a combining row bounds `u` by their weighted sum. Keeps the row
    /// count linear in the number of pieces instead of multiplying the
    /// pieces out.
    fn hypograph(&self) -> Hypograph {
        let n = self.alpha_i.len();
        let mut aux = 0usize;
        let mut rows = Vec::new();
        let mut combine: Vec<(usize, f64)> = Vec::new();

        if self.alpha > 0.0 {
            let s = aux;
            aux += 1;
            combine.push((s, -self.alpha));
            for p in self.u.pieces() {
                rows.push(HypographRow {
                    x_coef: vec![-p.slope; n],
                    u_coef: 0.0,
                    aux_coef: vec![(s, 1.0)],
                    rhs: p.intercept,
                });
            }
        }
        for i in 0..n {
            if self.alpha_i[i] == 0.0 {
                continue;
            }
            let s_i = aux;
            aux += 1;
            combine.push((s_i, -self.alpha_i[i]));
            for p in self.u_i[i].pieces() {
                let mut x_coef = vec![0.0; n];
                x_coef[i] = -p.slope;
                rows.push(HypographRow {
                    x_coef,
                    u_coef: 0.0,
                    aux_coef: vec![(s_i, 1.0)],
                    rhs: p.intercept,
                });
            }
        }
        // u <= alpha s + sum_i alpha_i s_i; with no active term, u <= 0.
        rows.push(HypographRow {
            x_coef: vec![0.0; n],
            u_coef: 1.0,
            aux_coef: combine,
            rhs: 0.0,
        });
        Hypograph { agents: n, aux, aux_upper: vec![None; aux], rows }
    }
}

#[derive(Deserialize)]
struct SumUtilitySpec {
    alpha: f64,
    u: PwlSpec,
    alpha_i: Vec<f64>,
    u_i: Vec<PwlSpec>,
}

#[derive(Deserialize)]
struct PwlSpec {
    pieces: Vec<super::Piece>,
}

pub(super) fn load(value: &Value) -> Result<AggregationRef, AggregationError> {
    let spec: SumUtilitySpec = serde_json::from_value(value.clone())
        .map_err(|e| AggregationError::Json(e.to_string()))?;
    let u = PiecewiseLinear::new(spec.u.pieces)?;
    let u_i = spec
        .u_i
        .into_iter()
        .map(|p| PiecewiseLinear::new(p.pieces))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(std::sync::Arc::new(SumUtility::new(spec.alpha, u, spec.alpha_i, u_i)?))
}
