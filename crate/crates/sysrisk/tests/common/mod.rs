//! Shared helpers for the integration and acceptance suites: random LP
//! generation with a vertex-enumeration oracle, and random risk-instance
//! generation across all aggregation/acceptance/market families.

#![allow(dead_code)]

use std::sync::Arc;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sysrisk::acceptance::{AcceptanceRef, ExpectationFamily, Pointwise};
use sysrisk::aggregation::{AffineMax, AggregationRef, NegativePart};
use sysrisk::lp::{LinearProgram, Rel, Sense};
use sysrisk::market::{MarketMode, MarketSet};
use sysrisk::model::{
    validate_probability_vector, MeasureVector, ProbabilityVector, RandomVector, ScenarioSpace,
    SpaceRef,
};
use sysrisk::risk::Instance;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------
// Small instance builders
// ---------------------------------------------------------------------

pub fn space(k: usize) -> SpaceRef {
    ScenarioSpace::new((0..k).map(|i| format!("w{i}")).collect(), vec![1.0; k]).unwrap()
}

pub fn sum_lambda(n: usize) -> AggregationRef {
    Arc::new(AffineMax::sum(n))
}

pub fn negative_part(alpha: Vec<f64>) -> AggregationRef {
    Arc::new(NegativePart::new(alpha).unwrap())
}

pub fn pointwise(c: f64) -> AcceptanceRef {
    Arc::new(Pointwise::new(c).unwrap())
}

pub fn prob_vector(s: &SpaceRef, rows: Vec<Vec<f64>>) -> ProbabilityVector {
    let mv = MeasureVector::new(s.clone(), rows).unwrap();
    validate_probability_vector(&mv, 1e-9).unwrap()
}

pub fn efamily(s: &SpaceRef, rows: Vec<Vec<f64>>, alpha: f64) -> AcceptanceRef {
    let p = prob_vector(s, rows);
    Arc::new(ExpectationFamily::new(vec![(p, alpha)]).unwrap())
}

pub fn payoff(s: &SpaceRef, rows: Vec<Vec<f64>>) -> RandomVector {
    RandomVector::new(s.clone(), rows).unwrap()
}

pub fn span_market(s: &SpaceRef, agents: usize, basis: Vec<RandomVector>) -> MarketSet {
    MarketSet::new(s.clone(), agents, MarketMode::Span, basis, false).unwrap()
}

/// The two-scenario running instance: two agents, plain-sum aggregation,
/// pointwise floor at zero, trivial market.
pub fn running_instance() -> (Instance, RandomVector) {
    let s = space(2);
    let inst = Instance::new(
        s.clone(),
        2,
        sum_lambda(2),
        pointwise(0.0),
        MarketSet::zero(s.clone(), 2),
    )
    .unwrap();
    let x = payoff(&s, vec![vec![1.0, -2.0], vec![0.0, 1.0]]);
    (inst, x)
}

// ---------------------------------------------------------------------
// Random risk instances across the aggregation/acceptance/market families
// ---------------------------------------------------------------------

use sysrisk::aggregation::{Network, Piece, PiecewiseLinear, SumUtility};
use sysrisk::risk::{compute_gamma, ExtReal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaKind {
    SumUtility,
    NegativePart,
    Network,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceKind {
    Pointwise,
    Family,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaKind {
    Sum,
    NegativePart,
}

#[derive(Debug, Clone, Copy)]
pub struct GenConfig {
    pub lambda: LambdaKind,
    pub acceptance: AcceptanceKind,
    pub with_market: bool,
    pub gamma_agg: Option<GammaKind>,
    pub max_scenarios: usize,
    pub max_agents: usize,
    /// Keeps sensitivities and thresholds in ranges where optimal
    /// allocations stay within a few units, so grid oracles with fixed
    /// windows provably bracket the optimum.
    pub tame: bool,
}

impl GenConfig {
    pub fn cell(lambda: LambdaKind, acceptance: AcceptanceKind, with_market: bool) -> Self {
        GenConfig {
            lambda,
            acceptance,
            with_market,
            gamma_agg: None,
            max_scenarios: 12,
            max_agents: 3,
            tame: false,
        }
    }
}

/// Random simplex point bounded away from the boundary.
fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Concave increasing piecewise-linear utility through the origin: slopes
/// strictly decreasing from a positive start, intercepts increasing from
/// zero.
fn random_pwl(rng: &mut ChaCha8Rng, tame: bool) -> PiecewiseLinear {
    let pieces = rng.gen_range(1..=3);
    let mut slope =
        if tame { rng.gen_range(0.8..2.0) } else { rng.gen_range(0.6..2.5) };
    let decay = if tame { 0.5..0.85 } else { 0.3..0.85 };
    let mut intercept = 0.0;
    let mut out = Vec::with_capacity(pieces);
    for _ in 0..pieces {
        out.push(Piece { slope, intercept });
        slope *= rng.gen_range(decay.clone());
        intercept += rng.gen_range(0.2..1.0);
    }
    PiecewiseLinear::new(out).unwrap()
}

fn random_lambda(rng: &mut ChaCha8Rng, kind: LambdaKind, n: usize, tame: bool) -> AggregationRef {
    match kind {
        LambdaKind::SumUtility => {
            // Every agent keeps a strictly increasing own-utility term, so
            // the aggregate is sensitive to each coordinate and support
            // functions stay finite at vectors of equal components.
            let alpha = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.2..1.2) };
            let u = random_pwl(rng, tame);
            let lo = if tame { 0.6 } else { 0.3 };
            let alpha_i: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..1.5)).collect();
            let u_i: Vec<PiecewiseLinear> = (0..n).map(|_| random_pwl(rng, tame)).collect();
            Arc::new(SumUtility::new(alpha, u, alpha_i, u_i).unwrap())
        }
        LambdaKind::NegativePart => {
            let lo = if tame { 0.6 } else { 0.3 };
            let alpha_i: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..2.0)).collect();
            Arc::new(NegativePart::new(alpha_i).unwrap())
        }
        LambdaKind::Network => {
            let mut pi = vec![vec![0.0; n]; n];
            for (j, row) in pi.iter_mut().enumerate() {
                let scale: f64 = rng.gen_range(0.0..0.9);
                let mut raw: Vec<f64> =
                    (0..n).map(|i| if i == j { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
                let sum: f64 = raw.iter().sum();
                if sum > 0.0 {
                    raw.iter_mut().for_each(|v| *v *= scale / sum);
                }
                *row = raw;
            }
            let gamma_net = rng.gen_range(1.2..3.0);
            Arc::new(Network::new(pi, gamma_net).unwrap())
        }
    }
}

/// One random instance of the requested cell. The basis payoffs are
/// centered under a common anchor measure, which keeps the dual side
/// nonempty and the threshold finite with high probability; a residual of
/// degenerate draws is filtered by the caller.
fn random_instance_raw(rng: &mut ChaCha8Rng, cfg: GenConfig) -> Instance {
    let k = rng.gen_range(2..=cfg.max_scenarios.max(2));
    let n = rng.gen_range(1..=cfg.max_agents.max(1));
    let ids = (0..k).map(|i| format!("w{i}")).collect();
    let z: Vec<f64> =
        (0..k).map(|_| if rng.gen_bool(0.5) { 1.0 } else { 1.0 + rng.gen_range(0.0..2.0) }).collect();
    let s = ScenarioSpace::new(ids, z).unwrap();

    let anchor = random_simplex(rng, k);
    let lambda = random_lambda(rng, cfg.lambda, n, cfg.tame);

    let c_range = if cfg.tame { 0.0..1.0 } else { 0.0..2.0 };
    let acceptance: AcceptanceRef = match cfg.acceptance {
        AcceptanceKind::Pointwise => pointwise(-rng.gen_range(c_range)),
        AcceptanceKind::Family => {
            let mut tests = Vec::new();
            // First test anchored at the common measure.
            tests.push((
                prob_vector(&s, vec![anchor.clone(); n]),
                rng.gen_range(c_range),
            ));
            if rng.gen_bool(0.4) {
                let rows: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(rng, k)).collect();
                tests.push((prob_vector(&s, rows), rng.gen_range(0.5..2.5)));
            }
            Arc::new(ExpectationFamily::new(tests).unwrap())
        }
    };

    let market = if cfg.with_market {
        let nb = rng.gen_range(1..=3);
        let mut basis = Vec::with_capacity(nb);
        for _ in 0..nb {
            let single_agent = rng.gen_bool(0.5);
            let owner = rng.gen_range(0..n);
            let mut rows = vec![vec![0.0; k]; n];
            for (i, row) in rows.iter_mut().enumerate() {
                if single_agent && i != owner {
                    continue;
                }
                for v in row.iter_mut() {
                    *v = rng.gen_range(-1.0..1.0);
                }
                // Center under the anchor so the anchor prices it to zero.
                let mean: f64 = row.iter().zip(&anchor).map(|(v, q)| v * q).sum();
                for v in row.iter_mut() {
                    *v -= mean;
                }
            }
            basis.push(RandomVector::new(s.clone(), rows).unwrap());
        }
        MarketSet::new(s.clone(), n, MarketMode::Span, basis, false).unwrap()
    } else {
        MarketSet::zero(s.clone(), n)
    };

    let mut inst = Instance::new(s, n, lambda, acceptance, market).unwrap();
    if let Some(gk) = cfg.gamma_agg {
        let n = inst.agents();
        let gamma_agg: AggregationRef = match gk {
            GammaKind::Sum => sum_lambda(n),
            GammaKind::NegativePart => {
                negative_part((0..n).map(|_| rng.gen_range(0.3..1.5)).collect())
            }
        };
        inst = inst.with_gamma_agg(gamma_agg).unwrap();
    }
    inst
}

/// Single raw draw without the finiteness filter; test-debugging hook.
pub fn raw_instance(rng: &mut ChaCha8Rng, cfg: GenConfig) -> Instance {
    random_instance_raw(rng, cfg)
}

/// Draws until the canonical threshold is finite (degenerate draws are
/// rare by construction; a hard retry cap guards against generator bugs).
pub fn finite_instance(rng: &mut ChaCha8Rng, cfg: GenConfig) -> Instance {
    for _ in 0..100 {
        let inst = random_instance_raw(rng, cfg);
        if let ExtReal::Finite(_) = compute_gamma(&inst).expect("gamma computes") {
            return inst;
        }
    }
    panic!("could not draw a finite-threshold instance for {cfg:?}");
}

/// A random bounded position on the instance's space.
pub fn random_position(inst: &Instance, rng: &mut ChaCha8Rng, scale: f64) -> RandomVector {
    let values = (0..inst.agents())
        .map(|_| (0..inst.space().len()).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect();
    RandomVector::new(inst.space().clone(), values).unwrap()
}

/// Adds a strictly positive single-agent payoff to the basis, creating a
/// regulatory-arbitrage opportunity (for aggregations where trades enter
/// the position side or through an unbounded-above trade aggregation).
pub fn poison_with_arbitrage(inst: &Instance, rng: &mut ChaCha8Rng) -> Instance {
    let n = inst.agents();
    let k = inst.space().len();
    let owner = rng.gen_range(0..n);
    let mut rows = vec![vec![0.0; k]; n];
    rows[owner] = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let positive = RandomVector::new(inst.space().clone(), rows).unwrap();
    let mut basis = inst.market().basis().to_vec();
    basis.push(positive);
    let market = MarketSet::new(
        inst.space().clone(),
        n,
        MarketMode::Span,
        basis,
        false,
    )
    .unwrap();
    let mut poisoned = Instance::new(
        inst.space().clone(),
        n,
        inst.lambda().clone(),
        inst.acceptance().clone(),
        market,
    )
    .unwrap();
    if let Some(g) = inst.gamma_agg() {
        poisoned = poisoned.with_gamma_agg(g.clone()).unwrap();
    }
    poisoned
}

pub const LAMBDA_KINDS: [LambdaKind; 3] =
    [LambdaKind::SumUtility, LambdaKind::NegativePart, LambdaKind::Network];
pub const ACCEPTANCE_KINDS: [AcceptanceKind; 2] =
    [AcceptanceKind::Pointwise, AcceptanceKind::Family];

// ---------------------------------------------------------------------
// Random LPs and the vertex-enumeration oracle
// ---------------------------------------------------------------------

/// Outcome of exhaustive vertex enumeration over rows-as-equalities and
/// active bounds. Only sound when every variable carries finite bounds.
#[derive(Debug, PartialEq)]
pub enum VertexOracle {
    Optimal(f64),
    Infeasible,
}

/// LPs with free variables and one-sided bounds; may be unbounded.
pub fn random_open_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
    let sense = if rng.gen_bool(0.5) { Sense::Min } else { Sense::Max };
    let mut lp = LinearProgram::new(sense);
    for j in 0..n {
        let (lower, upper) = match rng.gen_range(0..4) {
            0 => (f64::NEG_INFINITY, f64::INFINITY),
            1 => (0.0, f64::INFINITY),
            2 => (f64::NEG_INFINITY, rng.gen_range(0..=5) as f64),
            _ => (-(rng.gen_range(0..=5) as f64), f64::INFINITY),
        };
        lp.add_var(format!("x{j}"), lower, upper, rng.gen_range(-5..=5) as f64);
    }
    for r in 0..m {
        let mut coefs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                let c = rng.gen_range(-5..=5) as f64;
                if c != 0.0 {
                    coefs.push((j, c));
                }
            }
        }
        if coefs.is_empty() {
            coefs.push((rng.gen_range(0..n), 1.0));
        }
        let rel = if rng.gen_bool(0.5) { Rel::Le } else { Rel::Ge };
        lp.add_row(format!("r{r}"), rel, rhs_int(rng), &coefs);
    }
    lp
}

fn rhs_int(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(-5..=5) as f64
}

/// Exhaustive vertex enumeration for a fully boxed LP built by
/// `random_boxed_lp`-style generators. `rows` are (dense coefs, rel, rhs).
pub fn vertex_enumerate(
    n: usize,
    sense: Sense,
    obj: &[f64],
    rows: &[(Vec<f64>, Rel, f64)],
    lower: &[f64],
    upper: &[f64],
) -> VertexOracle {
    // Hyperplane set: every row as equality, every finite bound.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for (coefs, _, rhs) in rows {
        planes.push((coefs.clone(), *rhs));
    }
    for j in 0..n {
        if lower[j].is_finite() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e, lower[j]));
        }
        if upper[j].is_finite() {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e, upper[j]));
        }
    }
    let p = planes.len();
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    let feas_tol = 1e-7;

    loop {
        // Solve the n x n system for the current subset.
        if let Some(x) = solve_square(&subset, &planes, n) {
            if is_feasible(&x, rows, lower, upper, feas_tol) {
                let v: f64 = obj.iter().zip(&x).map(|(c, xi)| c * xi).sum();
                best = Some(match (best, sense) {
                    (None, _) => v,
                    (Some(b), Sense::Min) => b.min(v),
                    (Some(b), Sense::Max) => b.max(v),
                });
            }
        }
        // Next combination.
        let mut i = n;
        loop {
            if i == 0 {
                return match best {
                    Some(v) => VertexOracle::Optimal(v),
                    None => VertexOracle::Infeasible,
                };
            }
            i -= 1;
            if subset[i] != i + p - n {
                subset[i] += 1;
                for k in i + 1..n {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn solve_square(subset: &[usize], planes: &[(Vec<f64>, f64)], n: usize) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = subset.iter().map(|&i| planes[i].0.clone()).collect();
    let mut b: Vec<f64> = subset.iter().map(|&i| planes[i].1).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = a[i][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[i][k] -= f * a[col][k];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn is_feasible(
    x: &[f64],
    rows: &[(Vec<f64>, Rel, f64)],
    lower: &[f64],
    upper: &[f64],
    tol: f64,
) -> bool {
    for (j, &xi) in x.iter().enumerate() {
        if xi < lower[j] - tol || xi > upper[j] + tol {
            return false;
        }
    }
    for (coefs, rel, rhs) in rows {
        let act: f64 = coefs.iter().zip(x).map(|(c, xi)| c * xi).sum();
        let ok = match rel {
            Rel::Le => act <= rhs + tol,
            Rel::Ge => act >= rhs - tol,
            Rel::Eq => (act - rhs).abs() <= tol,
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Boxed LP generated together with its dense mirror for the oracle.
pub struct BoxedLpCase {
    pub lp: LinearProgram,
    pub n: usize,
    pub sense: Sense,
    pub obj: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Rel, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub fn random_boxed_case(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BoxedLpCase {
    let sense = if rng.gen_bool(0.5) { Sense::Min } else { Sense::Max };
    let mut lp = LinearProgram::new(sense);
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut obj = Vec::new();
    for j in 0..n {
        let l = if rng.gen_bool(0.5) { 0.0 } else { -(rng.gen_range(1..=10) as f64) };
        let u = rng.gen_range(1..=10) as f64;
        let c = rng.gen_range(-5..=5) as f64;
        lp.add_var(format!("x{j}"), l, u, c);
        lower.push(l);
        upper.push(u);
        obj.push(c);
    }
    let mut rows = Vec::new();
    for r in 0..m {
        let mut dense = vec![0.0; n];
        let mut coefs = Vec::new();
        for (j, d) in dense.iter_mut().enumerate() {
            if rng.gen_bool(0.7) {
                let c = rng.gen_range(-5..=5) as f64;
                if c != 0.0 {
                    *d = c;
                    coefs.push((j, c));
                }
            }
        }
        if coefs.is_empty() {
            let j = rng.gen_range(0..n);
            dense[j] = 1.0;
            coefs.push((j, 1.0));
        }
        let rel = match rng.gen_range(0..6) {
            0 | 1 => Rel::Le,
            2 | 3 => Rel::Ge,
            4 => Rel::Eq,
            _ => Rel::Le,
        };
        let rhs = rng.gen_range(-5..=5) as f64;
        lp.add_row(format!("r{r}"), rel, rhs, &coefs);
        rows.push((dense, rel, rhs));
    }
    BoxedLpCase { lp, n, sense, obj, rows, lower, upper }
}
