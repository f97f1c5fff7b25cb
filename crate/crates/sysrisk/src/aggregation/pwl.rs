//! Piecewise-linear concave increasing functions through the origin,
//! stored as the pointwise minimum of finitely many affine pieces.

use serde::{Deserialize, Serialize};

use super::AggregationError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub slope: f64,
    pub intercept: f64,
}

/// `f(t) = min_k (slope_k * t + intercept_k)`, with all slopes
/// nonnegative (increasing) and minimal intercept zero (`f(0) = 0`).
/// Concavity is automatic for a minimum of affine functions.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    pieces: Vec<Piece>,
}

impl PiecewiseLinear {
    pub fn new(pieces: Vec<Piece>) -> Result<Self, AggregationError> {
        if pieces.is_empty() {
            return Err(AggregationError::InvalidSpec(
                "piecewise-linear function needs at least one piece".into(),
            ));
        }
        let mut min_intercept = f64::INFINITY;
        for p in &pieces {
            if !p.slope.is_finite() || !p.intercept.is_finite() {
                return Err(AggregationError::InvalidSpec(
                    "non-finite piecewise-linear coefficients".into(),
                ));
            }
            if p.slope < 0.0 {
                return Err(AggregationError::InvalidSpec(format!(
                    "negative slope {} breaks monotonicity",
                    p.slope
                )));
            }
            min_intercept = min_intercept.min(p.intercept);
        }
        if min_intercept.abs() > 1e-9 {
            return Err(AggregationError::InvalidSpec(format!(
                "minimal intercept is {min_intercept}, so the function does not vanish at 0"
            )));
        }
        Ok(PiecewiseLinear { pieces })
    }

    /// The identity, `f(t) = t`.
    pub fn identity() -> Self {
        PiecewiseLinear { pieces: vec![Piece { slope: 1.0, intercept: 0.0 }] }
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.slope * t + p.intercept)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest slope; the function is strictly increasing iff positive.
    pub fn min_slope(&self) -> f64 {
        self.pieces.iter().map(|p| p.slope).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_of_pieces_with_origin_anchor() {
        let f = PiecewiseLinear::new(vec![
            Piece { slope: 2.0, intercept: 0.0 },
            Piece { slope: 0.5, intercept: 1.5 },
        ])
        .unwrap();
        assert_eq!(f.evaluate(0.0), 0.0);
        assert_eq!(f.evaluate(1.0), 2.0);
        assert_eq!(f.evaluate(2.0), 2.5);
        assert_eq!(f.evaluate(-1.0), -2.0);
    }

    #[test]
    fn rejects_missing_origin() {
        let err = PiecewiseLinear::new(vec![Piece { slope: 1.0, intercept: 0.5 }]).unwrap_err();
        assert!(matches!(err, AggregationError::InvalidSpec(_)));
    }

    #[test]
    fn rejects_decreasing_piece() {
        let err = PiecewiseLinear::new(vec![Piece { slope: -0.1, intercept: 0.0 }]).unwrap_err();
        assert!(matches!(err, AggregationError::InvalidSpec(_)));
    }
}
