//! Brute-force reference implementations used only by the test suites.
//!
//! These deliberately avoid the LP assembly path: risk values come from
//! grid search over allocations and trade coefficients with pointwise
//! aggregation and direct acceptance tests, and the network aggregation
//! value from grid search over the clearing variables.

use thiserror::Error;

use crate::model::RandomVector;
use crate::risk::Instance;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid misconfigured: {0}")]
    BadGrid(String),
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("evaluation failed: {0}")]
    Eval(String),
}

/// Uniform per-variable grid.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(lower: f64, upper: f64, step: f64) -> Result<Self, OracleError> {
        if !(lower < upper) || !(step > 0.0) {
            return Err(OracleError::BadGrid(format!(
                "need lower < upper and step > 0, got [{lower}, {upper}] step {step}"
            )));
        }
        if (upper - lower) / step > 1e6 {
            return Err(OracleError::BadGrid(
                "more than 1e6 points per variable".into(),
            ));
        }
        Ok(GridSpec { lower, upper, step })
    }

    fn points(&self) -> usize {
        ((self.upper - self.lower) / self.step).floor() as usize + 1
    }

    fn at(&self, idx: usize) -> f64 {
        self.lower + idx as f64 * self.step
    }
}

fn check_budget(total: u128) -> Result<(), OracleError> {
    if total > 100_000_000 {
        return Err(OracleError::BudgetExceeded(format!("{total} grid points")));
    }
    Ok(())
}

/// Grid-search reference for the risk value: the minimum of `sum_i m_i`
/// over grid points `(m, h)` whose traded aggregate passes the acceptance
/// test, `+inf` if no grid point is feasible. Budget-capped to two agents
/// and two basis elements.
pub fn brute_force_rho(
    inst: &Instance,
    x: &RandomVector,
    m_grid: GridSpec,
    h_grid: GridSpec,
) -> Result<f64, OracleError> {
    let n = inst.agents();
    let nb = inst.market().basis().len();
    if n > 2 {
        return Err(OracleError::BudgetExceeded(format!("{n} agents (max 2)")));
    }
    if nb > 2 {
        return Err(OracleError::BudgetExceeded(format!("{nb} basis elements (max 2)")));
    }
    let k = inst.space().len();
    let m_pts = m_grid.points();
    let h_pts = h_grid.points();
    let total = (m_pts as u128).pow(n as u32) * (h_pts as u128).pow(nb as u32);
    check_budget(total)?;

    let tol = inst.tolerances().acceptance.max(1e-9);
    // Precompute the acceptance rows and the per-scenario data once; the
    // inner loop runs over millions of grid points.
    let rows = inst
        .acceptance()
        .constraints(k)
        .map_err(|e| OracleError::Eval(e.to_string()))?;
    let x_cols: Vec<Vec<f64>> = (0..k).map(|w| x.column(w)).collect();
    let basis_cols: Vec<Vec<Vec<f64>>> = inst
        .market()
        .basis()
        .iter()
        .map(|g| (0..k).map(|w| g.column(w)).collect())
        .collect();

    let mut best = f64::INFINITY;
    let mut m_idx = vec![0usize; n];
    let mut aggregate = vec![0.0; k];
    let mut arg = vec![0.0; n];
    let mut trade = vec![0.0; n];
    loop {
        let m: Vec<f64> = m_idx.iter().map(|&i| m_grid.at(i)).collect();
        let m_total: f64 = m.iter().sum();
        if m_total < best {
            let mut h_idx = vec![0usize; nb];
            'h_loop: loop {
                let feasible = (|| -> Result<bool, OracleError> {
                    for w in 0..k {
                        trade.iter_mut().for_each(|t| *t = 0.0);
                        for (b, cols) in basis_cols.iter().enumerate() {
                            let hb = h_grid.at(h_idx[b]);
                            for (t, gv) in trade.iter_mut().zip(&cols[w]) {
                                *t += hb * gv;
                            }
                        }
                        for i in 0..n {
                            arg[i] = m[i] + x_cols[w][i];
                        }
                        match inst.gamma_agg() {
                            None => {
                                for i in 0..n {
                                    arg[i] += trade[i];
                                }
                                aggregate[w] = inst
                                    .lambda()
                                    .evaluate(&arg)
                                    .map_err(|e| OracleError::Eval(e.to_string()))?;
                            }
                            Some(gamma_agg) => {
                                aggregate[w] = inst
                                    .lambda()
                                    .evaluate(&arg)
                                    .map_err(|e| OracleError::Eval(e.to_string()))?
                                    + gamma_agg
                                        .evaluate(&trade)
                                        .map_err(|e| OracleError::Eval(e.to_string()))?;
                            }
                        }
                    }
                    Ok(rows.iter().all(|row| {
                        let act: f64 =
                            row.coefs.iter().zip(&aggregate).map(|(c, a)| c * a).sum();
                        act >= row.rhs - tol
                    }))
                })()?;
                if feasible {
                    best = best.min(m_total);
                    break 'h_loop; // m_total does not depend on h
                }
                if !advance(&mut h_idx, h_pts) {
                    break;
                }
            }
        }
        if !advance(&mut m_idx, m_pts) {
            break;
        }
    }
    Ok(best)
}

/// Odometer-style index advance; false once exhausted.
fn advance(idx: &mut [usize], limit: usize) -> bool {
    for slot in idx.iter_mut() {
        *slot += 1;
        if *slot < limit {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Grid-search reference for the network aggregation value: maximum of
/// `sum_i y_i + gamma_net sum_i b_i` over nonpositive grid points
/// satisfying the clearing constraints. The LP optimum sits at a vertex,
/// so refining the grid approaches it at rate `(1 + gamma_net) N step`.
pub fn brute_force_network_lambda(
    pi: &[Vec<f64>],
    gamma_net: f64,
    x: &[f64],
    grid: GridSpec,
) -> Result<f64, OracleError> {
    let n = pi.len();
    if n > 3 {
        return Err(OracleError::BudgetExceeded(format!("{n} firms (max 3)")));
    }
    if x.len() != n {
        return Err(OracleError::BadGrid(format!(
            "{} positions for {n} firms",
            x.len()
        )));
    }
    let pts = grid.points();
    let total = (pts as u128).pow(2 * n as u32);
    check_budget(total)?;

    let mut best = f64::NEG_INFINITY;
    let mut idx = vec![0usize; 2 * n];
    loop {
        let y: Vec<f64> = (0..n).map(|i| grid.at(idx[i]).min(0.0)).collect();
        let b: Vec<f64> = (0..n).map(|i| grid.at(idx[n + i]).min(0.0)).collect();
        let feasible = (0..n).all(|i| {
            let inflow: f64 = (0..n).map(|j| pi[j][i] * y[j]).sum();
            x[i] >= b[i] + y[i] - inflow - 1e-12
        });
        if feasible {
            let value =
                y.iter().sum::<f64>() + gamma_net * b.iter().sum::<f64>();
            best = best.max(value);
        }
        if !advance(&mut idx, pts) {
            break;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(OracleError::BadGrid(
            "no feasible grid point; widen the grid".into(),
        ));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::Pointwise;
    use crate::aggregation::AffineMax;
    use crate::market::MarketSet;
    use crate::model::{RandomVector, ScenarioSpace};
    use crate::risk::Instance;
    use std::sync::Arc;

    fn running() -> (Instance, RandomVector) {
        let s = ScenarioSpace::new(vec!["w1".into(), "w2".into()], vec![1.0, 1.0]).unwrap();
        let inst = Instance::new(
            s.clone(),
            2,
            Arc::new(AffineMax::sum(2)),
            Arc::new(Pointwise::new(0.0).unwrap()),
            MarketSet::zero(s.clone(), 2),
        )
        .unwrap();
        let x =
            RandomVector::new(s, vec![vec![1.0, -2.0], vec![0.0, 1.0]]).unwrap();
        (inst, x)
    }

    #[test]
    fn running_example_close_to_closed_form() {
        let (inst, x) = running();
        let grid = GridSpec::new(-5.0, 5.0, 0.01).unwrap();
        let h_grid = GridSpec::new(0.0, 0.0 + 1e-9, 1.0).unwrap();
        let v = brute_force_rho(&inst, &x, grid, h_grid).unwrap();
        assert!((v - 1.0).abs() <= 0.02, "oracle {v}");
    }

    #[test]
    fn zero_position_close_to_zero() {
        let (inst, _) = running();
        let x = inst.zero_position();
        let grid = GridSpec::new(-5.0, 5.0, 0.01).unwrap();
        let h_grid = GridSpec::new(0.0, 1e-9, 1.0).unwrap();
        let v = brute_force_rho(&inst, &x, grid, h_grid).unwrap();
        assert!(v.abs() <= 0.02, "oracle {v}");
    }

    #[test]
    fn infeasible_grid_reports_plus_infinity() {
        // A grid that never reaches the feasible region.
        let (inst, x) = running();
        let grid = GridSpec::new(-5.0, -4.0, 0.5).unwrap();
        let h_grid = GridSpec::new(0.0, 1e-9, 1.0).unwrap();
        let v = brute_force_rho(&inst, &x, grid, h_grid).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn network_oracle_single_firm() {
        let grid = GridSpec::new(-6.0, 0.0, 0.1).unwrap();
        let v = brute_force_network_lambda(&[vec![0.0]], 2.0, &[-3.0], grid).unwrap();
        assert!((v + 3.0).abs() <= 0.3, "oracle {v}");
    }

    #[test]
    fn network_oracle_nonnegative_positions() {
        let grid = GridSpec::new(-2.0, 0.0, 0.5).unwrap();
        let v = brute_force_network_lambda(
            &[vec![0.0, 0.5], vec![0.5, 0.0]],
            2.0,
            &[1.0, 0.5],
            grid,
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn refinement_approaches_the_lp_value_monotonically() {
        use crate::aggregation::{Aggregation, Network};
        let pi = vec![vec![0.0, 0.5], vec![0.4, 0.0]];
        let gamma_net = 2.0;
        let x = [-1.3, 0.7];
        let net = Network::new(pi.clone(), gamma_net).unwrap();
        let exact = net.evaluate(&x).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for step in [0.5, 0.25, 0.125] {
            let grid = GridSpec::new(-4.0, 0.0, step).unwrap();
            let v = brute_force_network_lambda(&pi, gamma_net, &x, grid).unwrap();
            // Nested grids: halving the step only adds feasible points.
            assert!(v >= prev - 1e-12, "refinement went backwards: {v} < {prev}");
            assert!(v <= exact + 1e-9);
            assert!(exact - v <= (1.0 + gamma_net) * 2.0 * step, "step {step}: gap {}", exact - v);
            prev = v;
        }
    }

    #[test]
    fn budgets_are_enforced() {
        assert!(GridSpec::new(0.0, 1.0, 1e-9).is_err());
        let grid = GridSpec::new(-1.0, 0.0, 0.5).unwrap();
        let pi4 = vec![vec![0.0; 4]; 4];
        assert!(matches!(
            brute_force_network_lambda(&pi4, 2.0, &[0.0; 4], grid),
            Err(OracleError::BudgetExceeded(_))
        ));
    }
}
