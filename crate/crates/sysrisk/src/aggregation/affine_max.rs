//! Generic concave piecewise-linear aggregation: the pointwise minimum of
//! finitely many affine functions with nonnegative gradients.

use serde::Deserialize;
use serde_json::Value;

use super::{
    check_zero_at_origin, Aggregation, AggregationError, AggregationRef, Hypograph, HypographRow,
};

#[derive(Debug, Clone)]
pub struct AffineMax {
    /// `(a_k, b_k)` with `L(x) = min_k a_k . x + b_k`.
    pieces: Vec<(Vec<f64>, f64)>,
    agents: usize,
}

impl AffineMax {
    pub fn new(pieces: Vec<(Vec<f64>, f64)>) -> Result<Self, AggregationError> {
        let agents = match pieces.first() {
            Some((a, _)) => a.len(),
            None => {
                return Err(AggregationError::InvalidSpec(
                    "affine_max needs at least one piece".into(),
                ))
            }
        };
        if agents == 0 {
            return Err(AggregationError::InvalidSpec("pieces must have dimension >= 1".into()));
        }
        let mut min_b = f64::INFINITY;
        for (a, b) in &pieces {
            if a.len() != agents {
                return Err(AggregationError::InvalidSpec(
                    "pieces have inconsistent dimension".into(),
                ));
            }
            if !b.is_finite() || a.iter().any(|c| !c.is_finite()) {
                return Err(AggregationError::InvalidSpec("non-finite piece".into()));
            }
            if a.iter().any(|&c| c < 0.0) {
                return Err(AggregationError::InvalidSpec(
                    "negative gradient component breaks monotonicity".into(),
                ));
            }
            min_b = min_b.min(*b);
        }
        if min_b.abs() > 1e-9 {
            return Err(AggregationError::InvalidSpec(format!(
                "min intercept is {min_b}, so the aggregation does not vanish at 0"
            )));
        }
        let agg = AffineMax { pieces, agents };
        check_zero_at_origin(&agg, 1e-9)?;
        Ok(agg)
    }

    pub fn sum(agents: usize) -> Self {
        AffineMax { pieces: vec![(vec![1.0; agents], 0.0)], agents }
    }

    pub fn pieces(&self) -> &[(Vec<f64>, f64)] {
        &self.pieces
    }
}

impl Aggregation for AffineMax {
    fn kind(&self) -> &'static str {
        "affine_max"
    }

    fn agents(&self) -> usize {
        self.agents
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, AggregationError> {
        if x.len() != self.agents {
            return Err(AggregationError::DimensionMismatch {
                expected: self.agents,
                got: x.len(),
            });
        }
        Ok(self
            .pieces
            .iter()
            .map(|(a, b)| a.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>() + b)
            .fold(f64::INFINITY, f64::min))
    }

    fn hypograph(&self) -> Hypograph {
        let rows = self
            .pieces
            .iter()
            .map(|(a, b)| HypographRow {
                x_coef: a.iter().map(|c| -c).collect(),
                u_coef: 1.0,
                aux_coef: Vec::new(),
                rhs: *b,
            })
            .collect();
        Hypograph { agents: self.agents, aux: 0, aux_upper: Vec::new(), rows }
    }
}

#[derive(Deserialize)]
struct AffineMaxSpec {
    pieces: Vec<PieceSpec>,
}

#[derive(Deserialize)]
struct PieceSpec {
    a: Vec<f64>,
    b: f64,
}

pub(super) fn load(value: &Value) -> Result<AggregationRef, AggregationError> {
    let spec: AffineMaxSpec = serde_json::from_value(value.clone())
        .map_err(|e| AggregationError::Json(e.to_string()))?;
    let pieces = spec.pieces.into_iter().map(|p| (p.a, p.b)).collect();
    Ok(std::sync::Arc::new(AffineMax::new(pieces)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_piece_hypograph_is_that_inequality() {
        let agg = AffineMax::new(vec![(vec![1.0], 0.0)]).unwrap();
        let h = agg.hypograph();
        assert_eq!(h.rows.len(), 1);
        assert_eq!(h.aux, 0);
        assert_eq!(h.rows[0].u_coef, 1.0);
        assert_eq!(h.rows[0].x_coef, vec![-1.0]);
        assert_eq!(h.rows[0].rhs, 0.0);
    }

    #[test]
    fn evaluates_min_over_pieces() {
        let agg = AffineMax::new(vec![(vec![1.0, 0.0], 0.0), (vec![0.0, 2.0], 1.0)]).unwrap();
        assert_eq!(agg.evaluate(&[3.0, 0.5]).unwrap(), 2.0);
        assert_eq!(agg.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_nonvanishing_origin() {
        assert!(AffineMax::new(vec![(vec![1.0], 1.0)]).is_err());
    }
}
