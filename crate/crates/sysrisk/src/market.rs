//! The set `G` of achievable zero-cost payoffs.
//!
//! `G` is a span or a cone of basis payoff profiles, supplied directly or
//! generated from multi-period price paths on a scenario tree: for every
//! period, cell of the period's information partition and risky asset, the
//! discounted one-step gain `1_cell (S_{t+1}/S^0_{t+1} - S_t/S^0_t)` is a
//! basis vector, embedded in the trading agent's coordinate. The span of
//! these is the set of terminal discounted gains of predictable
//! self-financing zero-initial-cost strategies.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lp::{LinearProgram, LpResult, Rel, Sense};
use crate::model::{ModelError, PathData, RandomVector, SpaceRef};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("price S_{t}^{asset} is not constant on filtration cell {cell}: {a} vs {b}")]
    NonMeasurablePrices { t: usize, asset: usize, cell: usize, a: f64, b: f64 },
    #[error("invalid filtration: {0}")]
    InvalidFiltration(String),
    #[error("invalid price paths: {0}")]
    InvalidPaths(String),
    #[error("invalid market basis: {0}")]
    InvalidBasis(String),
    #[error("market arbitrage threshold must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("LP failure during arbitrage search: {0}")]
    Lp(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarketMode {
    /// All real linear combinations of the basis.
    Span,
    /// Nonnegative combinations only.
    Cone,
}

/// The achievable set `G`. The empty combination is always available, so
/// `0` belongs to `G` in both modes.
#[derive(Debug, Clone)]
pub struct MarketSet {
    space: SpaceRef,
    agents: usize,
    mode: MarketMode,
    basis: Vec<RandomVector>,
    per_agent: bool,
}

impl MarketSet {
    pub fn new(
        space: SpaceRef,
        agents: usize,
        mode: MarketMode,
        basis: Vec<RandomVector>,
        per_agent: bool,
    ) -> Result<Self, MarketError> {
        for g in &basis {
            g.check_compatible(&space, agents)?;
        }
        if per_agent {
            for (b, g) in basis.iter().enumerate() {
                let supported: Vec<usize> = (0..agents)
                    .filter(|&i| g.values()[i].iter().any(|&v| v != 0.0))
                    .collect();
                if supported.len() > 1 {
                    return Err(MarketError::InvalidBasis(format!(
                        "per_agent market, but basis element {b} is nonzero for agents {supported:?}"
                    )));
                }
            }
        }
        Ok(MarketSet { space, agents, mode, basis, per_agent })
    }

    /// The trivial market `G = {0}`.
    pub fn zero(space: SpaceRef, agents: usize) -> Self {
        MarketSet { space, agents, mode: MarketMode::Span, basis: Vec::new(), per_agent: true }
    }

    pub fn space(&self) -> &SpaceRef {
        &self.space
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn mode(&self) -> MarketMode {
        self.mode
    }

    pub fn is_span(&self) -> bool {
        self.mode == MarketMode::Span
    }

    pub fn basis(&self) -> &[RandomVector] {
        &self.basis
    }

    pub fn per_agent(&self) -> bool {
        self.per_agent
    }

    /// The payoff `sum_b coefs[b] g_b`.
    pub fn combine(&self, coefs: &[f64]) -> Result<RandomVector, MarketError> {
        if coefs.len() != self.basis.len() {
            return Err(MarketError::InvalidBasis(format!(
                "{} coefficients for {} basis elements",
                coefs.len(),
                self.basis.len()
            )));
        }
        let mut g = RandomVector::zero(self.space.clone(), self.agents);
        for (c, b) in coefs.iter().zip(&self.basis) {
            if *c != 0.0 {
                g = g.add(&b.scale(*c))?;
            }
        }
        Ok(g)
    }
}

/// Validated per-scenario price paths `S_t = (S_t^0, ..., S_t^J)`.
#[derive(Debug, Clone)]
pub struct PricePaths {
    space: SpaceRef,
    periods: usize,
    risky_assets: usize,
    values: Vec<Vec<Vec<f64>>>,
}

impl PricePaths {
    pub fn new(space: SpaceRef, data: PathData) -> Result<Self, MarketError> {
        let k = space.len();
        if data.values.len() != k {
            return Err(MarketError::InvalidPaths(format!(
                "{} paths for {} scenarios",
                data.values.len(),
                k
            )));
        }
        let t_rows = data.periods + 1;
        let width = data.risky_assets + 1;
        for (w, path) in data.values.iter().enumerate() {
            if path.len() != t_rows {
                return Err(MarketError::InvalidPaths(format!(
                    "scenario {w} has {} price rows, expected {t_rows}",
                    path.len()
                )));
            }
            for (t, row) in path.iter().enumerate() {
                if row.len() != width {
                    return Err(MarketError::InvalidPaths(format!(
                        "scenario {w}, period {t}: {} assets, expected {width}",
                        row.len()
                    )));
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(MarketError::InvalidPaths(format!(
                        "non-finite price in scenario {w}, period {t}"
                    )));
                }
                if row[0] <= 0.0 {
                    return Err(MarketError::InvalidPaths(format!(
                        "numeraire S_{t}^0 = {} in scenario {w} must be positive",
                        row[0]
                    )));
                }
            }
        }
        // Initial prices are scenario-independent.
        for w in 1..k {
            for a in 0..width {
                if !close(data.values[w][0][a], data.values[0][0][a]) {
                    return Err(MarketError::InvalidPaths(format!(
                        "initial price of asset {a} differs across scenarios: {} vs {}",
                        data.values[w][0][a], data.values[0][0][a]
                    )));
                }
            }
        }
        Ok(PricePaths {
            space,
            periods: data.periods,
            risky_assets: data.risky_assets,
            values: data.values,
        })
    }

    /// Builds from the path data attached to the space itself.
    pub fn from_space(space: &SpaceRef) -> Result<Self, MarketError> {
        let data = space
            .path_data()
            .cloned()
            .ok_or_else(|| MarketError::InvalidPaths("space carries no path data".into()))?;
        Self::new(space.clone(), data)
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn risky_assets(&self) -> usize {
        self.risky_assets
    }

    pub fn price(&self, scenario: usize, t: usize, asset: usize) -> f64 {
        self.values[scenario][t][asset]
    }

    /// Discounted price `S_t^asset / S_t^0`.
    pub fn discounted(&self, scenario: usize, t: usize, asset: usize) -> f64 {
        self.values[scenario][t][asset] / self.values[scenario][t][0]
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * 1.0_f64.max(a.abs()).max(b.abs())
}

/// Information structure: one partition of the scenario set per period
/// `t = 0..=T`, trivial at `t = 0`, each refining the previous.
#[derive(Debug, Clone)]
pub struct Filtration {
    partitions: Vec<Vec<Vec<usize>>>,
}

impl Filtration {
    pub fn new(partitions: Vec<Vec<Vec<usize>>>, scenarios: usize) -> Result<Self, MarketError> {
        if partitions.is_empty() {
            return Err(MarketError::InvalidFiltration("no partitions supplied".into()));
        }
        for (t, cells) in partitions.iter().enumerate() {
            let mut seen = vec![false; scenarios];
            for cell in cells {
                if cell.is_empty() {
                    return Err(MarketError::InvalidFiltration(format!(
                        "empty cell in partition {t}"
                    )));
                }
                for &w in cell {
                    if w >= scenarios {
                        return Err(MarketError::InvalidFiltration(format!(
                            "partition {t} references scenario {w} out of range"
                        )));
                    }
                    if seen[w] {
                        return Err(MarketError::InvalidFiltration(format!(
                            "scenario {w} appears twice in partition {t}"
                        )));
                    }
                    seen[w] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(MarketError::InvalidFiltration(format!(
                    "partition {t} does not cover all scenarios"
                )));
            }
        }
        if partitions[0].len() != 1 {
            return Err(MarketError::InvalidFiltration(
                "partition at t = 0 must be trivial".into(),
            ));
        }
        // Refinement: each cell at t+1 lies inside a single cell at t.
        for t in 0..partitions.len() - 1 {
            for cell in &partitions[t + 1] {
                let inside_one = partitions[t]
                    .iter()
                    .any(|coarse| cell.iter().all(|w| coarse.contains(w)));
                if !inside_one {
                    return Err(MarketError::InvalidFiltration(format!(
                        "partition {} does not refine partition {t}",
                        t + 1
                    )));
                }
            }
        }
        Ok(Filtration { partitions })
    }

    /// The natural filtration on `0..scenarios` for a one-period model.
    pub fn one_period(scenarios: usize) -> Self {
        let all: Vec<usize> = (0..scenarios).collect();
        let fine: Vec<Vec<usize>> = (0..scenarios).map(|w| vec![w]).collect();
        Filtration { partitions: vec![vec![all], fine] }
    }

    pub fn partitions(&self) -> &[Vec<Vec<usize>>] {
        &self.partitions
    }
}

/// Discounted one-step gain payoffs of predictable unit positions, one per
/// (period, information cell, risky asset, assigned agent), embedded in
/// the assigned agent's coordinate. `agent_assignment` maps each risky
/// asset (1-based, 0 is the numeraire) to the agents trading it.
pub fn build_gain_basis(
    paths: &PricePaths,
    agent_assignment: &BTreeMap<usize, Vec<usize>>,
    filtration: &Filtration,
    agents: usize,
) -> Result<Vec<RandomVector>, MarketError> {
    let t_max = paths.periods();
    if filtration.partitions().len() != t_max + 1 {
        return Err(MarketError::InvalidFiltration(format!(
            "{} partitions for {} periods; need one per t = 0..=T",
            filtration.partitions().len(),
            t_max
        )));
    }
    for (&asset, assigned) in agent_assignment {
        if asset == 0 || asset > paths.risky_assets() {
            return Err(MarketError::InvalidBasis(format!(
                "agent assignment references asset {asset}; risky assets are 1..={}",
                paths.risky_assets()
            )));
        }
        for &i in assigned {
            if i >= agents {
                return Err(MarketError::InvalidBasis(format!(
                    "agent assignment references agent {i}, but there are {agents}"
                )));
            }
        }
    }
    // Measurability: S_t constant on every cell of the t-th partition.
    for (t, cells) in filtration.partitions().iter().enumerate() {
        for (cell_idx, cell) in cells.iter().enumerate() {
            let w0 = cell[0];
            for asset in 0..=paths.risky_assets() {
                let reference = paths.price(w0, t, asset);
                for &w in &cell[1..] {
                    let v = paths.price(w, t, asset);
                    if !close(v, reference) {
                        return Err(MarketError::NonMeasurablePrices {
                            t,
                            asset,
                            cell: cell_idx,
                            a: reference,
                            b: v,
                        });
                    }
                }
            }
        }
    }

    let k = paths.space.len();
    let mut basis = Vec::new();
    for t in 0..t_max {
        for cell in &filtration.partitions()[t] {
            for (&asset, assigned) in agent_assignment {
                let mut payoff = vec![0.0; k];
                for &w in cell {
                    payoff[w] =
                        paths.discounted(w, t + 1, asset) - paths.discounted(w, t, asset);
                }
                for &agent in assigned {
                    let mut values = vec![vec![0.0; k]; agents];
                    values[agent] = payoff.clone();
                    basis.push(RandomVector::new(paths.space.clone(), values)?);
                }
            }
        }
    }
    Ok(basis)
}

/// Certificate of a (model independent) market arbitrage: a combination
/// of basis payoffs supported on one agent that clears `eps` in every
/// scenario.
#[derive(Debug, Clone)]
pub struct MarketArbitrage {
    pub agent: usize,
    /// Combination coefficients per basis index.
    pub coefficients: Vec<f64>,
    /// Best uniform floor achievable per unit l1-norm of coefficients.
    pub rate: f64,
}

/// Searches, agent by agent, for an element of `G` of the form
/// `(0, ..., g^i, ..., 0)` with `g^i >= eps` everywhere. The inner LP
/// maximizes the uniform floor under an l1 normalization of the
/// coefficients; a positive optimum scales to any `eps`.
pub fn contains_market_arbitrage(
    market: &MarketSet,
    eps: f64,
) -> Result<Option<MarketArbitrage>, MarketError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(MarketError::NonPositiveEpsilon(eps));
    }
    let k = market.space().len();
    let nb = market.basis().len();
    for agent in 0..market.agents() {
        // Candidate basis elements; under per_agent, only those supported
        // on this agent may carry nonzero coefficients.
        let candidates: Vec<usize> = if market.per_agent() {
            (0..nb)
                .filter(|&b| {
                    let g = &market.basis()[b];
                    (0..market.agents()).all(|j| {
                        j == agent || g.values()[j].iter().all(|&v| v == 0.0)
                    })
                })
                .collect()
        } else {
            (0..nb).collect()
        };

        let mut lp = LinearProgram::new(Sense::Max);
        let t = lp.add_var("floor", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        // Coefficients, split for the l1 norm in span mode.
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for &b in &candidates {
            pos.push((b, lp.add_var(format!("hp{b}"), 0.0, f64::INFINITY, 0.0)));
            if market.is_span() {
                neg.push((b, lp.add_var(format!("hn{b}"), 0.0, f64::INFINITY, 0.0)));
            }
        }
        let mut norm_coefs: Vec<(usize, f64)> = Vec::new();
        for &(_, v) in pos.iter().chain(&neg) {
            norm_coefs.push((v, 1.0));
        }
        lp.add_row("l1", Rel::Le, 1.0, &norm_coefs);
        for w in 0..k {
            let mut coefs = vec![(t, -1.0)];
            for &(b, v) in &pos {
                let gv = market.basis()[b].value(agent, w);
                if gv != 0.0 {
                    coefs.push((v, gv));
                }
            }
            for &(b, v) in &neg {
                let gv = market.basis()[b].value(agent, w);
                if gv != 0.0 {
                    coefs.push((v, -gv));
                }
            }
            lp.add_row(format!("floor{w}"), Rel::Ge, 0.0, &coefs);
        }
        if !market.per_agent() {
            for j in 0..market.agents() {
                if j == agent {
                    continue;
                }
                for w in 0..k {
                    let mut coefs = Vec::new();
                    for &(b, v) in &pos {
                        let gv = market.basis()[b].value(j, w);
                        if gv != 0.0 {
                            coefs.push((v, gv));
                        }
                    }
                    for &(b, v) in &neg {
                        let gv = market.basis()[b].value(j, w);
                        if gv != 0.0 {
                            coefs.push((v, -gv));
                        }
                    }
                    if !coefs.is_empty() {
                        lp.add_row(format!("zero{j}_{w}"), Rel::Eq, 0.0, &coefs);
                    }
                }
            }
        }
        let sol = match lp.solve().map_err(|e| MarketError::Lp(e.to_string()))? {
            LpResult::Optimal(sol) => sol,
            other => return Err(MarketError::Lp(format!("arbitrage LP not optimal: {other:?}"))),
        };
        if sol.value > 1e-9 {
            let scale = eps / sol.value;
            let mut coefficients = vec![0.0; nb];
            for &(b, v) in &pos {
                coefficients[b] += sol.primal[v] * scale;
            }
            for &(b, v) in &neg {
                coefficients[b] -= sol.primal[v] * scale;
            }
            return Ok(Some(MarketArbitrage { agent, coefficients, rate: sol.value }));
        }
    }
    Ok(None)
}
