//! Finite scenario spaces, payoff profiles and vectors of measures.
//!
//! A [`ScenarioSpace`] fixes an ordered list of scenario labels together
//! with the weight function `Z >= 1`. All dependent objects (payoffs,
//! measures) index their columns by that fixed order, so no label lookup
//! happens after construction. Everything is immutable.

use std::sync::Arc;

use thiserror::Error;

/// Default tolerance for probability-row validation. LP dual multipliers
/// carry solver noise, so callers may pass a looser value.
pub const PROBABILITY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("scenario space must contain at least one scenario")]
    EmptySpace,
    #[error("duplicate scenario id `{0}`")]
    DuplicateId(String),
    #[error("Z({id}) = {z}, but Z must map into [1, +inf)")]
    ZBelowOne { id: String, z: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not a probability vector: {0}")]
    NotAProbability(String),
}

/// Raw per-scenario price paths: `values[scenario][t][asset]` for
/// `t = 0..=periods` and assets `0..=risky_assets` (asset 0 is the
/// numeraire). Validated and consumed by the market module.
#[derive(Debug, Clone, PartialEq)]
pub struct PathData {
    pub periods: usize,
    pub risky_assets: usize,
    pub values: Vec<Vec<Vec<f64>>>,
}

/// A finite sample space with the weight function `Z` evaluated pointwise.
///
/// `Z` never restricts membership on a finite space; it is carried because
/// the richness condition on the market (assumption A) is phrased through
/// it.
#[derive(Debug)]
pub struct ScenarioSpace {
    ids: Vec<String>,
    z: Vec<f64>,
    path_data: Option<PathData>,
}

pub type SpaceRef = Arc<ScenarioSpace>;

impl ScenarioSpace {
    pub fn new(ids: Vec<String>, z: Vec<f64>) -> Result<SpaceRef, ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptySpace);
        }
        if ids.len() != z.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "{} scenario ids but {} z-values",
                ids.len(),
                z.len()
            )));
        }
        for (id, &zv) in ids.iter().zip(&z) {
            if !zv.is_finite() {
                return Err(ModelError::NonFinite("z-values"));
            }
            if zv < 1.0 {
                return Err(ModelError::ZBelowOne { id: id.clone(), z: zv });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(ModelError::DuplicateId(id.clone()));
            }
        }
        Ok(Arc::new(ScenarioSpace { ids, z, path_data: None }))
    }

    pub fn with_paths(
        ids: Vec<String>,
        z: Vec<f64>,
        paths: PathData,
    ) -> Result<SpaceRef, ModelError> {
        let space = Self::new(ids, z)?;
        let mut inner = Arc::try_unwrap(space).expect("fresh space has a single owner");
        if paths.values.len() != inner.ids.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "{} scenarios but {} price paths",
                inner.ids.len(),
                paths.values.len()
            )));
        }
        inner.path_data = Some(paths);
        Ok(Arc::new(inner))
    }

    /// Number of scenarios.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|s| s == id)
    }

    /// Pointwise values of the weight function `Z`.
    pub fn z_values(&self) -> &[f64] {
        &self.z
    }

    pub fn max_z(&self) -> f64 {
        self.z.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn path_data(&self) -> Option<&PathData> {
        self.path_data.as_ref()
    }

    /// Scenario ordering is fixed at construction, so two spaces are the
    /// same exactly when their id lists agree.
    pub fn same_as(&self, other: &ScenarioSpace) -> bool {
        std::ptr::eq(self, other) || self.ids == other.ids
    }
}

/// An N-agent payoff profile: entry `(i, w)` is agent `i`'s payoff in
/// scenario `w`. Houses positions `X`, tradeable payoffs `g` and constant
/// allocations alike.
#[derive(Debug, Clone)]
pub struct RandomVector {
    space: SpaceRef,
    values: Vec<Vec<f64>>,
}

impl RandomVector {
    pub fn new(space: SpaceRef, values: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        if values.is_empty() {
            return Err(ModelError::DimensionMismatch(
                "payoff profile needs at least one agent".into(),
            ));
        }
        for row in &values {
            if row.len() != space.len() {
                return Err(ModelError::DimensionMismatch(format!(
                    "agent row has {} entries, space has {} scenarios",
                    row.len(),
                    space.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite("payoff values"));
            }
        }
        Ok(RandomVector { space, values })
    }

    /// The zero profile for `agents` agents.
    pub fn zero(space: SpaceRef, agents: usize) -> Self {
        let k = space.len();
        RandomVector { values: vec![vec![0.0; k]; agents], space }
    }

    /// Constant profile: agent `i` pays `c[i]` in every scenario.
    pub fn constant(space: SpaceRef, c: &[f64]) -> Result<Self, ModelError> {
        let k = space.len();
        Self::new(space, c.iter().map(|&ci| vec![ci; k]).collect())
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn agents(&self) -> usize {
        self.values.len()
    }

    pub fn scenarios(&self) -> usize {
        self.space.len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, agent: usize, scenario: usize) -> f64 {
        self.values[agent][scenario]
    }

    /// Column of the profile at one scenario, one entry per agent.
    pub fn column(&self, scenario: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[scenario]).collect()
    }

    /// `self + other`, entrywise.
    pub fn add(&self, other: &RandomVector) -> Result<RandomVector, ModelError> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `self + c` where `c` is a per-agent constant.
    pub fn add_constant(&self, c: &[f64]) -> Result<RandomVector, ModelError> {
        if c.len() != self.agents() {
            return Err(ModelError::DimensionMismatch(format!(
                "{} constants for {} agents",
                c.len(),
                self.agents()
            )));
        }
        let values = self
            .values
            .iter()
            .zip(c)
            .map(|(row, &ci)| row.iter().map(|v| v + ci).collect())
            .collect();
        Ok(RandomVector { space: self.space.clone(), values })
    }

    pub fn scale(&self, factor: f64) -> RandomVector {
        let values = self
            .values
            .iter()
            .map(|row| row.iter().map(|v| v * factor).collect())
            .collect();
        RandomVector { space: self.space.clone(), values }
    }

    fn zip_with(
        &self,
        other: &RandomVector,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<RandomVector, ModelError> {
        self.check_compatible(other.space(), other.agents())?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Ok(RandomVector { space: self.space.clone(), values })
    }

    pub fn check_compatible(&self, space: &ScenarioSpace, agents: usize) -> Result<(), ModelError> {
        if !self.space.same_as(space) {
            return Err(ModelError::DimensionMismatch(
                "profiles reference different scenario spaces".into(),
            ));
        }
        if self.agents() != agents {
            return Err(ModelError::DimensionMismatch(format!(
                "profile has {} agents, expected {}",
                self.agents(),
                agents
            )));
        }
        Ok(())
    }
}

/// A vector of nonnegative measures, one per agent: entry `(i, w)` is
/// `mu_i({w})`. The positive cone; integrability against `Z` is automatic
/// on a finite space.
#[derive(Debug, Clone)]
pub struct MeasureVector {
    space: SpaceRef,
    weights: Vec<Vec<f64>>,
}

impl MeasureVector {
    pub fn new(space: SpaceRef, weights: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::DimensionMismatch(
                "measure vector needs at least one agent".into(),
            ));
        }
        for (i, row) in weights.iter().enumerate() {
            if row.len() != space.len() {
                return Err(ModelError::DimensionMismatch(format!(
                    "measure row has {} entries, space has {} scenarios",
                    row.len(),
                    space.len()
                )));
            }
            for (w, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ModelError::NonFinite("measure weights"));
                }
                if v < 0.0 {
                    return Err(ModelError::NotAProbability(format!(
                        "negative weight {v} at agent {i}, scenario {w}"
                    )));
                }
            }
        }
        Ok(MeasureVector { space, weights })
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn agents(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn weight(&self, agent: usize, scenario: usize) -> f64 {
        self.weights[agent][scenario]
    }
}

/// A vector of probability measures: a [`MeasureVector`] whose rows each
/// sum to one. Obtained through [`validate_probability_vector`].
#[derive(Debug, Clone)]
pub struct ProbabilityVector {
    inner: MeasureVector,
}

impl ProbabilityVector {
    pub fn as_measure(&self) -> &MeasureVector {
        &self.inner
    }

    pub fn space(&self) -> &SpaceRef {
        self.inner.space()
    }

    pub fn agents(&self) -> usize {
        self.inner.agents()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        self.inner.weights()
    }

    pub fn weight(&self, agent: usize, scenario: usize) -> f64 {
        self.inner.weight(agent, scenario)
    }

    /// Expectation of a univariate payoff under agent `i`'s measure.
    pub fn expectation(&self, agent: usize, payoff: &[f64]) -> f64 {
        self.inner.weights[agent]
            .iter()
            .zip(payoff)
            .map(|(&q, &y)| q * y)
            .sum()
    }

    /// `sum_i E^{Q_i}[X^i]`, the total expectation of a profile.
    pub fn total_expectation(&self, x: &RandomVector) -> Result<f64, ModelError> {
        pairing(x, &self.inner)
    }
}

/// The bilinear pairing `<X, mu> = sum_i sum_w X^i(w) mu^i({w})` between
/// payoff profiles and measure vectors.
pub fn pairing(x: &RandomVector, mu: &MeasureVector) -> Result<f64, ModelError> {
    if !x.space().same_as(mu.space()) {
        return Err(ModelError::DimensionMismatch(
            "pairing of objects on different scenario spaces".into(),
        ));
    }
    if x.agents() != mu.agents() {
        return Err(ModelError::DimensionMismatch(format!(
            "pairing of {}-agent payoff with {}-agent measure",
            x.agents(),
            mu.agents()
        )));
    }
    let mut total = 0.0;
    for (xrow, mrow) in x.values().iter().zip(mu.weights()) {
        for (&xv, &mv) in xrow.iter().zip(mrow) {
            total += xv * mv;
        }
    }
    Ok(total)
}

/// Checks that every row of `mu` sums to one within `tol` and that no
/// weight is materially negative. Negatives within `tol` are clamped to
/// zero and each row is renormalized so it sums to one exactly.
pub fn validate_probability_vector(
    mu: &MeasureVector,
    tol: f64,
) -> Result<ProbabilityVector, ModelError> {
    validate_probability_rows(mu.space().clone(), mu.weights().to_vec(), tol)
}

/// Row-level variant used by dual extraction, where raw multipliers may
/// carry sub-tolerance negatives that [`MeasureVector::new`] would reject.
pub fn validate_probability_rows(
    space: SpaceRef,
    mut rows: Vec<Vec<f64>>,
    tol: f64,
) -> Result<ProbabilityVector, ModelError> {
    if rows.is_empty() {
        return Err(ModelError::DimensionMismatch(
            "probability vector needs at least one agent".into(),
        ));
    }
    for (i, row) in rows.iter_mut().enumerate() {
        if row.len() != space.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "row has {} entries, space has {} scenarios",
                row.len(),
                space.len()
            )));
        }
        for (w, v) in row.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(ModelError::NonFinite("probability weights"));
            }
            if *v < -tol {
                return Err(ModelError::NotAProbability(format!(
                    "weight {v} at agent {i}, scenario {w} is below -tol"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(ModelError::NotAProbability(format!(
                "row {i} sums to {sum}, outside 1 +/- {tol}"
            )));
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        // Push the leftover rounding residual into the largest weight so
        // the row sums to one exactly.
        let residual = 1.0 - row.iter().sum::<f64>();
        if residual != 0.0 {
            let argmax = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]))
                .expect("nonempty row");
            row[argmax] += residual;
        }
    }
    let inner = MeasureVector::new(space, rows)?;
    Ok(ProbabilityVector { inner })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space2() -> SpaceRef {
        ScenarioSpace::new(vec!["a".into(), "b".into()], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn single_scenario_space_is_valid() {
        let s = ScenarioSpace::new(vec!["a".into()], vec![1.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.max_z(), 1.0);
    }

    #[test]
    fn z_below_one_is_rejected() {
        let err = ScenarioSpace::new(vec!["a".into(), "b".into()], vec![1.0, 0.5]).unwrap_err();
        assert!(matches!(err, ModelError::ZBelowOne { .. }));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = ScenarioSpace::new(vec!["a".into(), "a".into()], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateId(_)));
    }

    #[test]
    fn empty_space_is_rejected() {
        assert!(matches!(
            ScenarioSpace::new(vec![], vec![]).unwrap_err(),
            ModelError::EmptySpace
        ));
    }

    #[test]
    fn pairing_of_zero_profile_vanishes() {
        let s = space2();
        let x = RandomVector::zero(s.clone(), 3);
        let mu = MeasureVector::new(s, vec![vec![0.3, 0.7]; 3]).unwrap();
        assert_eq!(pairing(&x, &mu).unwrap(), 0.0);
    }

    #[test]
    fn pairing_single_agent_mean() {
        let s = space2();
        let x = RandomVector::new(s.clone(), vec![vec![2.0, 4.0]]).unwrap();
        let mu = MeasureVector::new(s, vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(pairing(&x, &mu).unwrap(), 3.0);
    }

    #[test]
    fn pairing_two_agents_direct_sum() {
        // Direct-summation oracle: 1*1 + 0*0 + 0*0 + 1*2 = 3.
        let s = space2();
        let x = RandomVector::new(s.clone(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let mu = MeasureVector::new(s, vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(pairing(&x, &mu).unwrap(), 3.0);
    }

    #[test]
    fn pairing_rejects_mismatched_agents() {
        let s = space2();
        let x = RandomVector::zero(s.clone(), 2);
        let mu = MeasureVector::new(s, vec![vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            pairing(&x, &mu).unwrap_err(),
            ModelError::DimensionMismatch(_)
        ));
    }

    #[test]
    fn probability_validation_accepts_exact_rows() {
        let s = space2();
        let mu = MeasureVector::new(s, vec![vec![0.5, 0.5]]).unwrap();
        let q = validate_probability_vector(&mu, 1e-10).unwrap();
        assert_eq!(q.weights()[0], vec![0.5, 0.5]);
    }

    #[test]
    fn probability_validation_rejects_bad_sum() {
        let s = space2();
        let mu = MeasureVector::new(s, vec![vec![0.6, 0.6]]).unwrap();
        assert!(matches!(
            validate_probability_vector(&mu, 1e-10).unwrap_err(),
            ModelError::NotAProbability(_)
        ));
    }

    #[test]
    fn probability_validation_clamps_tolerated_negatives() {
        let s = space2();
        let q =
            validate_probability_rows(s, vec![vec![1.0 + 1e-12, -1e-12]], 1e-10).unwrap();
        assert_eq!(q.weight(0, 1), 0.0);
        let sum: f64 = q.weights()[0].iter().sum();
        assert_eq!(sum, 1.0);
    }

    #[test]
    fn constant_profile_pairs_to_total_constant() {
        let s = space2();
        let c = RandomVector::constant(s.clone(), &[1.5, -0.5]).unwrap();
        let mu = MeasureVector::new(s, vec![vec![0.25, 0.75], vec![0.9, 0.1]]).unwrap();
        let q = validate_probability_vector(&mu, 1e-10).unwrap();
        assert_eq!(q.total_expectation(&c).unwrap(), 1.0);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn entries(k: usize, lo: f64, hi: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
            proptest::collection::vec(proptest::collection::vec(lo..hi, k), 2)
        }

        proptest! {
            #[test]
            fn pairing_is_bilinear(
                xv in entries(3, -5.0, 5.0),
                yv in entries(3, -5.0, 5.0),
                mv in entries(3, 0.0, 4.0),
                a in -3.0..3.0f64,
                b in -3.0..3.0f64,
            ) {
                let s = ScenarioSpace::new(
                    vec!["a".into(), "b".into(), "c".into()],
                    vec![1.0, 1.0, 1.0],
                ).unwrap();
                let x = RandomVector::new(s.clone(), xv).unwrap();
                let y = RandomVector::new(s.clone(), yv).unwrap();
                let mu = MeasureVector::new(s, mv).unwrap();
                let combo = x.scale(a).add(&y.scale(b)).unwrap();
                let lhs = pairing(&combo, &mu).unwrap();
                let rhs = a * pairing(&x, &mu).unwrap() + b * pairing(&y, &mu).unwrap();
                let scale = 1.0 + lhs.abs().max(rhs.abs());
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            }

            #[test]
            fn pairing_of_nonnegative_profiles_is_nonnegative(
                xv in entries(3, 0.0, 5.0),
                mv in entries(3, 0.0, 4.0),
            ) {
                let s = ScenarioSpace::new(
                    vec!["a".into(), "b".into(), "c".into()],
                    vec![1.0, 1.0, 1.0],
                ).unwrap();
                let x = RandomVector::new(s.clone(), xv).unwrap();
                let mu = MeasureVector::new(s, mv).unwrap();
                prop_assert!(pairing(&x, &mu).unwrap() >= 0.0);
            }
        }
    }
}
