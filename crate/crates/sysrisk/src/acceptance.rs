//! Monotone acceptance sets for univariate positions, as membership tests
//! and LP constraint generators.
//!
//! Both variants are polyhedral and upward closed with `0` acceptable:
//!
//! * [`Pointwise`]: `Y` is acceptable iff `Y(w) >= c` in every scenario,
//!   for a threshold `c <= 0`.
//! * [`ExpectationFamily`]: `Y` is acceptable iff
//!   `sum_i E^{P_k^i}[Y] + alpha_k >= 0` for every test `k` in a finite
//!   family of penalized probability vectors. Restricting the penalty to a
//!   finite family keeps the set polyhedral and the risk primal an exact
//!   LP.
//!
//! Variants are registered by name in [`REGISTRY`] and picked at runtime
//! from the `kind` field of instance files.

use std::fmt;
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::model::{
    validate_probability_vector, MeasureVector, ModelError, ProbabilityVector, SpaceRef,
};

#[derive(Debug, Error)]
pub enum AcceptanceError {
    #[error("expectation family must contain at least one test")]
    EmptyFamily,
    #[error("pointwise threshold must satisfy c <= 0, got {0}")]
    PositiveThreshold(f64),
    #[error("test penalty must satisfy alpha >= 0, got {0}")]
    NegativeAlpha(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown acceptance kind `{0}`")]
    UnknownKind(String),
    #[error("malformed acceptance JSON: {0}")]
    Json(String),
}

/// One affine inequality `coefs . Y >= rhs` over the scenario variables.
#[derive(Debug, Clone)]
pub struct AcceptanceRow {
    pub coefs: Vec<f64>,
    pub rhs: f64,
}

/// A monotone acceptance set containing zero.
pub trait Acceptance: fmt::Debug + Send + Sync {
    fn kind(&self) -> &'static str;

    /// Defining inequalities over the `scenarios` variables `Y(w)`.
    fn constraints(&self, scenarios: usize) -> Result<Vec<AcceptanceRow>, AcceptanceError>;

    /// Scenario count the set is pinned to, if any.
    fn scenario_requirement(&self) -> Option<usize> {
        None
    }

    /// Agent count the set is pinned to, if any.
    fn agent_requirement(&self) -> Option<usize> {
        None
    }

    /// Membership within additive tolerance on every defining inequality.
    /// Agrees with [`Acceptance::constraints`] by construction.
    fn is_acceptable(&self, y: &[f64], tol: f64) -> Result<bool, AcceptanceError> {
        let rows = self.constraints(y.len())?;
        Ok(rows.iter().all(|row| {
            let act: f64 = row.coefs.iter().zip(y).map(|(c, yi)| c * yi).sum();
            act >= row.rhs - tol
        }))
    }
}

pub type AcceptanceRef = Arc<dyn Acceptance>;

/// Acceptance by a pointwise floor: `A = { Y : Y(w) >= c for all w }`.
#[derive(Debug, Clone)]
pub struct Pointwise {
    c: f64,
}

impl Pointwise {
    pub fn new(c: f64) -> Result<Self, AcceptanceError> {
        if !c.is_finite() || c > 0.0 {
            return Err(AcceptanceError::PositiveThreshold(c));
        }
        Ok(Pointwise { c })
    }

    pub fn threshold(&self) -> f64 {
        self.c
    }
}

impl Acceptance for Pointwise {
    fn kind(&self) -> &'static str {
        "pointwise"
    }

    fn constraints(&self, scenarios: usize) -> Result<Vec<AcceptanceRow>, AcceptanceError> {
        Ok((0..scenarios)
            .map(|w| {
                let mut coefs = vec![0.0; scenarios];
                coefs[w] = 1.0;
                AcceptanceRow { coefs, rhs: self.c }
            })
            .collect())
    }
}

/// Acceptance tested against a finite family of penalized probability
/// vectors: `A = { Y : sum_i E^{P_k^i}[Y] + alpha_k >= 0 for all k }`.
/// `alpha_k >= 0` keeps `0` acceptable; each constraint is increasing in
/// `Y`, so the set is monotone without an explicit positive-cone hull.
#[derive(Debug, Clone)]
pub struct ExpectationFamily {
    tests: Vec<(ProbabilityVector, f64)>,
    scenarios: usize,
    agents: usize,
}

impl ExpectationFamily {
    pub fn new(tests: Vec<(ProbabilityVector, f64)>) -> Result<Self, AcceptanceError> {
        let (first, _) = tests.first().ok_or(AcceptanceError::EmptyFamily)?;
        let scenarios = first.space().len();
        let agents = first.agents();
        for (p, alpha) in &tests {
            if !alpha.is_finite() || *alpha < 0.0 {
                return Err(AcceptanceError::NegativeAlpha(*alpha));
            }
            if p.space().len() != scenarios || p.agents() != agents {
                return Err(AcceptanceError::DimensionMismatch(
                    "tests reference inconsistent spaces or agent counts".into(),
                ));
            }
        }
        Ok(ExpectationFamily { tests, scenarios, agents })
    }

    pub fn tests(&self) -> &[(ProbabilityVector, f64)] {
        &self.tests
    }

    pub fn min_alpha(&self) -> f64 {
        self.tests.iter().map(|(_, a)| *a).fold(f64::INFINITY, f64::min)
    }
}

impl Acceptance for ExpectationFamily {
    fn kind(&self) -> &'static str {
        "expectation_family"
    }

    fn constraints(&self, scenarios: usize) -> Result<Vec<AcceptanceRow>, AcceptanceError> {
        if scenarios != self.scenarios {
            return Err(AcceptanceError::DimensionMismatch(format!(
                "family is defined on {} scenarios, asked for {scenarios}",
                self.scenarios
            )));
        }
        Ok(self
            .tests
            .iter()
            .map(|(p, alpha)| {
                let coefs = (0..scenarios)
                    .map(|w| (0..self.agents).map(|i| p.weight(i, w)).sum())
                    .collect();
                AcceptanceRow { coefs, rhs: -alpha }
            })
            .collect())
    }

    fn scenario_requirement(&self) -> Option<usize> {
        Some(self.scenarios)
    }

    fn agent_requirement(&self) -> Option<usize> {
        Some(self.agents)
    }
}

type Loader = fn(&Value, &SpaceRef) -> Result<AcceptanceRef, AcceptanceError>;

/// Acceptance variants by registered name.
pub const REGISTRY: &[(&str, Loader)] = &[
    ("pointwise", load_pointwise),
    ("expectation_family", load_expectation_family),
];

pub fn resolve(kind: &str) -> Option<Loader> {
    REGISTRY.iter().find(|(k, _)| *k == kind).map(|&(_, l)| l)
}

pub fn from_json(value: &Value, space: &SpaceRef) -> Result<AcceptanceRef, AcceptanceError> {
    let kind = value
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| AcceptanceError::Json("missing string field `kind`".into()))?;
    let loader = resolve(kind).ok_or_else(|| AcceptanceError::UnknownKind(kind.to_string()))?;
    loader(value, space)
}

#[derive(Deserialize)]
struct PointwiseSpec {
    c: f64,
}

fn load_pointwise(value: &Value, _space: &SpaceRef) -> Result<AcceptanceRef, AcceptanceError> {
    let spec: PointwiseSpec =
        serde_json::from_value(value.clone()).map_err(|e| AcceptanceError::Json(e.to_string()))?;
    Ok(Arc::new(Pointwise::new(spec.c)?))
}

#[derive(Deserialize)]
struct FamilySpec {
    tests: Vec<TestSpec>,
}

#[derive(Deserialize)]
struct TestSpec {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    alpha: f64,
}

fn load_expectation_family(
    value: &Value,
    space: &SpaceRef,
) -> Result<AcceptanceRef, AcceptanceError> {
    let spec: FamilySpec =
        serde_json::from_value(value.clone()).map_err(|e| AcceptanceError::Json(e.to_string()))?;
    let tests = spec
        .tests
        .into_iter()
        .map(|t| {
            let mv = MeasureVector::new(space.clone(), t.p)?;
            let p = validate_probability_vector(&mv, 1e-9)?;
            Ok((p, t.alpha))
        })
        .collect::<Result<Vec<_>, AcceptanceError>>()?;
    Ok(Arc::new(ExpectationFamily::new(tests)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScenarioSpace;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn space2() -> SpaceRef {
        ScenarioSpace::new(vec!["w1".into(), "w2".into()], vec![1.0, 1.0]).unwrap()
    }

    fn family_half_half(alpha: f64) -> ExpectationFamily {
        let s = space2();
        let mv = MeasureVector::new(s, vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let p = validate_probability_vector(&mv, 1e-10).unwrap();
        ExpectationFamily::new(vec![(p, alpha)]).unwrap()
    }

    #[test]
    fn zero_is_always_acceptable() {
        let pw = Pointwise::new(-0.5).unwrap();
        assert!(pw.is_acceptable(&[0.0, 0.0], 1e-9).unwrap());
        let fam = family_half_half(0.0);
        assert!(fam.is_acceptable(&[0.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn pointwise_rejects_a_dip() {
        let pw = Pointwise::new(0.0).unwrap();
        assert!(!pw.is_acceptable(&[-0.1, 5.0], 1e-9).unwrap());
    }

    #[test]
    fn family_offsets_by_alpha() {
        // sum_i E[Y] = 2 * (-0.5) = -1, plus alpha 1 -> acceptable.
        let fam = family_half_half(1.0);
        assert!(fam.is_acceptable(&[-1.0, 0.0], 1e-9).unwrap());
        assert!(!fam.is_acceptable(&[-1.5, -0.6], 1e-9).unwrap());
    }

    #[test]
    fn pointwise_constraints_are_unit_rows() {
        let rows = Pointwise::new(0.0).unwrap().constraints(2).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].coefs, vec![1.0, 0.0]);
        assert_eq!(rows[1].coefs, vec![0.0, 1.0]);
        assert_eq!(rows[0].rhs, 0.0);
    }

    #[test]
    fn family_constraints_aggregate_agent_weights() {
        let rows = family_half_half(1.0).constraints(2).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].coefs, vec![1.0, 1.0]);
        assert_eq!(rows[0].rhs, -1.0);
    }

    #[test]
    fn empty_family_is_rejected() {
        assert!(matches!(
            ExpectationFamily::new(vec![]).unwrap_err(),
            AcceptanceError::EmptyFamily
        ));
    }

    #[test]
    fn positive_threshold_is_rejected() {
        assert!(matches!(
            Pointwise::new(0.25).unwrap_err(),
            AcceptanceError::PositiveThreshold(_)
        ));
    }

    #[test]
    fn upward_closure_on_random_positions() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let sets: Vec<AcceptanceRef> = vec![
            Arc::new(Pointwise::new(-1.0).unwrap()),
            Arc::new(family_half_half(0.5)),
        ];
        for set in sets {
            for _ in 0..500 {
                let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
                if set.is_acceptable(&y, 1e-9).unwrap() {
                    let up: Vec<f64> = y.iter().map(|v| v + rng.gen_range(0.0..2.0)).collect();
                    assert!(set.is_acceptable(&up, 1e-9).unwrap(), "{}: {y:?} -> {up:?}", set.kind());
                }
            }
        }
    }

    #[test]
    fn zero_min_alpha_rejects_negative_constants() {
        let fam = family_half_half(0.0);
        for c in [-0.1, -1.0, -5.0] {
            assert!(!fam.is_acceptable(&[c, c], 1e-9).unwrap());
        }
    }

    #[test]
    fn membership_agrees_with_generated_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let fam = family_half_half(0.25);
        let rows = fam.constraints(2).unwrap();
        for _ in 0..500 {
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let by_rows = rows.iter().all(|r| {
                r.coefs.iter().zip(&y).map(|(c, yi)| c * yi).sum::<f64>() >= r.rhs - 1e-9
            });
            assert_eq!(fam.is_acceptable(&y, 1e-9).unwrap(), by_rows);
        }
    }

    #[test]
    fn json_loading_round_trips() {
        let s = space2();
        let v = serde_json::json!({"kind": "pointwise", "c": -0.5});
        let a = from_json(&v, &s).unwrap();
        assert_eq!(a.kind(), "pointwise");
        let v = serde_json::json!({
            "kind": "expectation_family",
            "tests": [{"P": [[0.5, 0.5], [0.25, 0.75]], "alpha": 1.0}]
        });
        let a = from_json(&v, &s).unwrap();
        assert_eq!(a.kind(), "expectation_family");
        assert_eq!(a.agent_requirement(), Some(2));
    }
}
