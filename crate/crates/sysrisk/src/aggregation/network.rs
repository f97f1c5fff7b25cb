//! Network aggregation: the value of clearing mutual debts.
//!
//! `Pi[j][i]` is the fraction of firm `j`'s total debt owed to firm `i`;
//! `y_i <= 0` is capital relief routed through the network, `b_i <= 0` is
//! direct debt reduction, priced `gamma_net` times as dear:
//!
//! `L(x) = max { sum_i y_i + gamma_net sum_i b_i :
//!               y, b <= 0,  x_i >= b_i + y_i - sum_j Pi[j][i] y_j }`.
//!
//! The maximum is always attained: `y = 0, b = x^-` is feasible and the
//! objective is nonpositive, so a solver failure is an error, not a value.

use serde::Deserialize;
use serde_json::Value;

use super::{
    check_zero_at_origin, Aggregation, AggregationError, AggregationRef, Hypograph, HypographRow,
};
use crate::lp::{LinearProgram, LpResult, Rel, Sense};

#[derive(Debug, Clone)]
pub struct Network {
    pi: Vec<Vec<f64>>,
    gamma_net: f64,
}

impl Network {
    pub fn new(pi: Vec<Vec<f64>>, gamma_net: f64) -> Result<Self, AggregationError> {
        let n = pi.len();
        if n == 0 {
            return Err(AggregationError::InvalidSpec("empty liability matrix".into()));
        }
        if !(gamma_net > 1.0) || !gamma_net.is_finite() {
            return Err(AggregationError::InvalidSpec(format!(
                "gamma_net must exceed 1, got {gamma_net}"
            )));
        }
        for (j, row) in pi.iter().enumerate() {
            if row.len() != n {
                return Err(AggregationError::InvalidSpec(
                    "liability matrix must be square".into(),
                ));
            }
            let mut row_sum = 0.0;
            for (i, &p) in row.iter().enumerate() {
                if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                    return Err(AggregationError::InvalidSpec(format!(
                        "liability fraction Pi[{j}][{i}] = {p} outside [0, 1]"
                    )));
                }
                if i == j && p != 0.0 {
                    return Err(AggregationError::InvalidSpec(
                        "liability matrix must have zero diagonal".into(),
                    ));
                }
                row_sum += p;
            }
            if row_sum > 1.0 + 1e-12 {
                return Err(AggregationError::InvalidSpec(format!(
                    "row {j} of the liability matrix sums to {row_sum} > 1"
                )));
            }
        }
        let agg = Network { pi, gamma_net };
        check_zero_at_origin(&agg, 1e-9)?;
        Ok(agg)
    }

    pub fn pi(&self) -> &[Vec<f64>] {
        &self.pi
    }

    pub fn gamma_net(&self) -> f64 {
        self.gamma_net
    }
}

impl Aggregation for Network {
    fn kind(&self) -> &'static str {
        "network"
    }

    fn agents(&self) -> usize {
        self.pi.len()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, AggregationError> {
        let n = self.pi.len();
        if x.len() != n {
            return Err(AggregationError::DimensionMismatch { expected: n, got: x.len() });
        }
        let mut lp = LinearProgram::new(Sense::Max);
        let y: Vec<usize> =
            (0..n).map(|i| lp.add_var(format!("y{i}"), f64::NEG_INFINITY, 0.0, 1.0)).collect();
        let b: Vec<usize> = (0..n)
            .map(|i| lp.add_var(format!("b{i}"), f64::NEG_INFINITY, 0.0, self.gamma_net))
            .collect();
        for i in 0..n {
            // b_i + y_i - sum_j Pi[j][i] y_j <= x_i
            let mut coefs = vec![(b[i], 1.0), (y[i], 1.0)];
            for j in 0..n {
                let p = self.pi[j][i];
                if p != 0.0 {
                    coefs.push((y[j], -p));
                }
            }
            lp.add_row(format!("clear{i}"), Rel::Le, x[i], &coefs);
        }
        match lp.solve().map_err(|e| AggregationError::InnerLpFailed(e.to_string()))? {
            LpResult::Optimal(sol) => Ok(sol.value),
            other => Err(AggregationError::InnerLpFailed(format!(
                "network clearing LP not optimal: {other:?}"
            ))),
        }
    }

    fn hypograph(&self) -> Hypograph {
        let n = self.pi.len();
        // aux layout: y_0..y_{n-1}, b_0..b_{n-1}, all bounded above by 0.
        let mut rows = Vec::with_capacity(n + 1);
        let mut objective = vec![(0usize, 0.0); 0];
        for i in 0..n {
            objective.push((i, -1.0));
            objective.push((n + i, -self.gamma_net));
        }
        rows.push(HypographRow {
            x_coef: vec![0.0; n],
            u_coef: 1.0,
            aux_coef: objective,
            rhs: 0.0,
        });
        for i in 0..n {
            let mut aux_coef = vec![(n + i, 1.0), (i, 1.0)];
            for j in 0..n {
                let p = self.pi[j][i];
                if p != 0.0 {
                    aux_coef.push((j, -p));
                }
            }
            let mut x_coef = vec![0.0; n];
            x_coef[i] = -1.0;
            rows.push(HypographRow { x_coef, u_coef: 0.0, aux_coef, rhs: 0.0 });
        }
        Hypograph { agents: n, aux: 2 * n, aux_upper: vec![Some(0.0); 2 * n], rows }
    }
}

#[derive(Deserialize)]
struct NetworkSpec {
    pi: Vec<Vec<f64>>,
    gamma_net: f64,
}

pub(super) fn load(value: &Value) -> Result<AggregationRef, AggregationError> {
    let spec: NetworkSpec = serde_json::from_value(value.clone())
        .map_err(|e| AggregationError::Json(e.to_string()))?;
    Ok(std::sync::Arc::new(Network::new(spec.pi, spec.gamma_net)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_firm_reduces_to_negative_part() {
        // max { y + 2b : y, b <= 0, y + b <= -3 } puts everything on y.
        let agg = Network::new(vec![vec![0.0]], 2.0).unwrap();
        assert!((agg.evaluate(&[-3.0]).unwrap() + 3.0).abs() <= 1e-9);
        // min(x, 0) on a grid.
        for k in -5..=5 {
            let x = k as f64;
            let v = agg.evaluate(&[x]).unwrap();
            assert!((v - x.min(0.0)).abs() <= 1e-9, "x={x}, v={v}");
        }
    }

    #[test]
    fn nonnegative_positions_need_no_clearing() {
        let agg = Network::new(vec![vec![0.0, 0.4], vec![0.6, 0.0]], 1.5).unwrap();
        assert!(agg.evaluate(&[2.0, 0.0]).unwrap().abs() <= 1e-9);
        assert!(agg.evaluate(&[0.0, 0.0]).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn projection_of_single_firm_hypograph_is_min_x_zero() {
        let agg = Network::new(vec![vec![0.0]], 2.0).unwrap();
        let h = agg.hypograph();
        assert_eq!(h.aux, 2);
        assert_eq!(h.rows.len(), 2);
        for k in -5..=5 {
            let x = k as f64;
            let proj = h.max_u(&[x]).unwrap();
            assert!((proj - x.min(0.0)).abs() <= 1e-8, "x={x}, proj={proj}");
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(Network::new(vec![vec![0.5]], 2.0).is_err()); // diagonal
        assert!(Network::new(vec![vec![0.0, 0.9], vec![0.8, 0.3]], 2.0).is_err()); // diag + sum
        assert!(Network::new(vec![vec![0.0]], 1.0).is_err()); // gamma_net
    }
}
