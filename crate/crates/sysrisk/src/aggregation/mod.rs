//! Concave increasing aggregation functions.
//!
//! Every variant sits behind the [`Aggregation`] trait: pointwise
//! evaluation plus a polyhedral [`Hypograph`] whose feasible set projects
//! onto `{(x, u) : u <= L(x)}`, which is what the risk LPs embed. Variants
//! are registered by name in [`REGISTRY`] and selected at runtime from the
//! `kind` field of instance files.

mod affine_max;
mod negative_part;
mod network;
mod pwl;
mod sum_utility;

pub use affine_max::AffineMax;
pub use negative_part::NegativePart;
pub use network::Network;
pub use pwl::{Piece, PiecewiseLinear};
pub use sum_utility::SumUtility;

use std::fmt;
use std::sync::Arc;

use serde_json::Value;
use thiserror::Error;

use crate::lp::{LinearProgram, LpResult, Sense};

#[derive(Debug, Error)]
pub enum AggregationError {
    #[error("dimension mismatch: expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("inner LP failed: {0}")]
    InnerLpFailed(String),
    #[error("invalid aggregation spec: {0}")]
    InvalidSpec(String),
    #[error("unknown aggregation kind `{0}`")]
    UnknownKind(String),
    #[error("malformed aggregation JSON: {0}")]
    Json(String),
}

/// A concave, componentwise-increasing aggregation with `L(0) = 0`.
pub trait Aggregation: fmt::Debug + Send + Sync {
    fn kind(&self) -> &'static str;

    /// Number of agent components the function aggregates.
    fn agents(&self) -> usize;

    /// Pointwise value `L(x)`.
    fn evaluate(&self, x: &[f64]) -> Result<f64, AggregationError>;

    /// Polyhedral description of `{(x, u) : u <= L(x)}`.
    fn hypograph(&self) -> Hypograph;
}

pub type AggregationRef = Arc<dyn Aggregation>;

/// One affine inequality of a hypograph:
/// `u_coef * u + x_coef . x + aux_coef . aux <= rhs`.
#[derive(Debug, Clone)]
pub struct HypographRow {
    pub x_coef: Vec<f64>,
    pub u_coef: f64,
    pub aux_coef: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Finite system of affine inequalities in `(x, u, aux)` whose projection
/// onto `(x, u)` is the hypograph of the aggregation function. Auxiliary
/// variables are free below; `aux_upper` lists optional upper bounds.
#[derive(Debug, Clone)]
pub struct Hypograph {
    pub agents: usize,
    pub aux: usize,
    pub aux_upper: Vec<Option<f64>>,
    pub rows: Vec<HypographRow>,
}

impl Hypograph {
    /// `max { u : (x, u, aux) feasible }` at a fixed `x`, via the LP
    /// kernel. This is the projection the hypograph contract promises to
    /// equal `evaluate(x)`; production code embeds the rows directly and
    /// only tests call this.
    pub fn max_u(&self, x: &[f64]) -> Result<f64, AggregationError> {
        if x.len() != self.agents {
            return Err(AggregationError::DimensionMismatch {
                expected: self.agents,
                got: x.len(),
            });
        }
        let mut lp = LinearProgram::new(Sense::Max);
        let u = lp.add_var("u", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let aux: Vec<usize> = (0..self.aux)
            .map(|a| {
                let upper = self.aux_upper[a].unwrap_or(f64::INFINITY);
                lp.add_var(format!("aux{a}"), f64::NEG_INFINITY, upper, 0.0)
            })
            .collect();
        for (r, row) in self.rows.iter().enumerate() {
            let fixed: f64 = row.x_coef.iter().zip(x).map(|(c, xi)| c * xi).sum();
            let mut coefs = vec![(u, row.u_coef)];
            for &(a, c) in &row.aux_coef {
                coefs.push((aux[a], c));
            }
            lp.add_row(format!("h{r}"), crate::lp::Rel::Le, row.rhs - fixed, &coefs);
        }
        match lp.solve().map_err(|e| AggregationError::InnerLpFailed(e.to_string()))? {
            LpResult::Optimal(sol) => Ok(sol.value),
            other => Err(AggregationError::InnerLpFailed(format!(
                "hypograph projection LP not optimal: {other:?}"
            ))),
        }
    }
}

type Loader = fn(&Value) -> Result<AggregationRef, AggregationError>;

/// Aggregation variants by registered name.
pub const REGISTRY: &[(&str, Loader)] = &[
    ("sum_utility", sum_utility::load),
    ("negative_part", negative_part::load),
    ("network", network::load),
    ("affine_max", affine_max::load),
];

pub fn resolve(kind: &str) -> Option<Loader> {
    REGISTRY.iter().find(|(k, _)| *k == kind).map(|&(_, l)| l)
}

/// Builds an aggregation from its tagged JSON form.
pub fn from_json(value: &Value) -> Result<AggregationRef, AggregationError> {
    let kind = value
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| AggregationError::Json("missing string field `kind`".into()))?;
    let loader =
        resolve(kind).ok_or_else(|| AggregationError::UnknownKind(kind.to_string()))?;
    loader(value)
}

/// Asserts `|L(0)| <= tol`; every constructor calls this.
pub(crate) fn check_zero_at_origin(
    agg: &dyn Aggregation,
    tol: f64,
) -> Result<(), AggregationError> {
    let zero = vec![0.0; agg.agents()];
    let at_zero = agg.evaluate(&zero)?;
    if at_zero.abs() > tol {
        return Err(AggregationError::InvalidSpec(format!(
            "aggregation must vanish at the origin, found {at_zero}"
        )));
    }
    Ok(())
}
