//! Assembly of the risk LPs.
//!
//! The primal for `rho(X)` minimizes `sum_i m_i` over allocations `m`,
//! trade coefficients `h` and per-scenario aggregate values `u(w)` subject
//! to the aggregation hypograph instantiated at `m + X(., w) + (G h)(., w)`
//! and the acceptance constraints on the profile `u`. Replacing
//! `L(...) in A` by `u <= L(...), u in A` is valid because the acceptance
//! set is monotone.
//!
//! The variant with a second aggregation splits the argument: `u(w)` is
//! bounded by `L(m + X(., w))`, `v(w)` by `G2((G h)(., w))`, and the
//! acceptance rows apply to `u + v`.
//!
//! Every hypograph row of the position aggregation also records its
//! `x`-sensitivity, from which the dual measure vector is recovered:
//! `Q_i({w}) = sum_{rows r at w} dual_r * x_coef_r[i]`.

use crate::acceptance::AcceptanceRow;
use crate::aggregation::Hypograph;
use crate::lp::{LinearProgram, Rel, Sense};
use crate::market::MarketSet;
use crate::model::RandomVector;

use super::{Instance, RiskError};

/// An assembled LP together with the variable maps and the dual-extraction
/// bookkeeping.
#[derive(Debug)]
pub struct AssembledLp {
    pub lp: LinearProgram,
    pub m_vars: Vec<usize>,
    pub h_vars: Vec<usize>,
    pub u_vars: Vec<usize>,
    pub v_vars: Option<Vec<usize>>,
    hypo: Hypograph,
    /// Per scenario: (LP row, hypograph row index) of the position rows.
    lambda_rows: Vec<Vec<(usize, usize)>>,
}

impl AssembledLp {
    /// Raw dual measure rows (agents x scenarios) from LP multipliers.
    pub fn extract_q_rows(&self, duals: &[f64]) -> Vec<Vec<f64>> {
        let n = self.hypo.agents;
        let k = self.lambda_rows.len();
        let mut rows = vec![vec![0.0; k]; n];
        for (w, entries) in self.lambda_rows.iter().enumerate() {
            for &(lp_row, hrow) in entries {
                let y = duals[lp_row];
                if y != 0.0 {
                    for i in 0..n {
                        rows[i][w] += y * self.hypo.rows[hrow].x_coef[i];
                    }
                }
            }
        }
        rows
    }
}

/// Linear expression of the aggregation argument at one scenario: per
/// agent a list of variable terms plus a constant.
struct ArgAtScenario {
    terms: Vec<Vec<(usize, f64)>>,
    consts: Vec<f64>,
}

/// Instantiates the hypograph at the given argument, binding the value
/// variable `u_var`. Fresh auxiliary variables are created per call.
/// Returns (LP row, hypograph row index) pairs.
fn add_hypograph_rows(
    lp: &mut LinearProgram,
    hypo: &Hypograph,
    arg: &ArgAtScenario,
    u_var: usize,
    tag: &str,
) -> Vec<(usize, usize)> {
    let aux: Vec<usize> = (0..hypo.aux)
        .map(|a| {
            let upper = hypo.aux_upper[a].unwrap_or(f64::INFINITY);
            lp.add_var(format!("{tag}.aux{a}"), f64::NEG_INFINITY, upper, 0.0)
        })
        .collect();
    let mut out = Vec::with_capacity(hypo.rows.len());
    for (hidx, hrow) in hypo.rows.iter().enumerate() {
        let mut coefs: Vec<(usize, f64)> = Vec::new();
        if hrow.u_coef != 0.0 {
            coefs.push((u_var, hrow.u_coef));
        }
        let mut rhs = hrow.rhs;
        for (i, &xc) in hrow.x_coef.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            for &(var, c) in &arg.terms[i] {
                coefs.push((var, xc * c));
            }
            rhs -= xc * arg.consts[i];
        }
        for &(a, c) in &hrow.aux_coef {
            coefs.push((aux[a], c));
        }
        let row = lp.add_row(format!("{tag}.h{hidx}"), Rel::Le, rhs, &coefs);
        out.push((row, hidx));
    }
    out
}

fn add_acceptance_rows(
    lp: &mut LinearProgram,
    rows: &[AcceptanceRow],
    u_vars: &[usize],
    v_vars: Option<&[usize]>,
) {
    for (t, row) in rows.iter().enumerate() {
        let mut coefs: Vec<(usize, f64)> = Vec::new();
        for (w, &c) in row.coefs.iter().enumerate() {
            if c != 0.0 {
                coefs.push((u_vars[w], c));
                if let Some(v) = v_vars {
                    coefs.push((v[w], c));
                }
            }
        }
        lp.add_row(format!("acc{t}"), Rel::Ge, row.rhs, &coefs);
    }
}

fn add_trade_vars(lp: &mut LinearProgram, market: &MarketSet) -> Vec<usize> {
    let lower = if market.is_span() { f64::NEG_INFINITY } else { 0.0 };
    (0..market.basis().len())
        .map(|b| lp.add_var(format!("h{b}"), lower, f64::INFINITY, 0.0))
        .collect()
}

/// The primal LP for `rho(X)`.
pub fn assemble_primal(inst: &Instance, x: &RandomVector) -> Result<AssembledLp, RiskError> {
    inst.check_position(x)?;
    let n = inst.agents();
    let k = inst.space().len();
    let hypo = inst.lambda().hypograph();
    let mut lp = LinearProgram::new(Sense::Min);
    let m_vars: Vec<usize> =
        (0..n).map(|i| lp.add_var(format!("m{i}"), f64::NEG_INFINITY, f64::INFINITY, 1.0)).collect();
    let h_vars = add_trade_vars(&mut lp, inst.market());
    let u_vars: Vec<usize> =
        (0..k).map(|w| lp.add_var(format!("u{w}"), f64::NEG_INFINITY, f64::INFINITY, 0.0)).collect();

    let mut lambda_rows = Vec::with_capacity(k);
    for w in 0..k {
        let arg = ArgAtScenario {
            terms: (0..n)
                .map(|i| {
                    let mut t = vec![(m_vars[i], 1.0)];
                    for (b, g) in inst.market().basis().iter().enumerate() {
                        let gv = g.value(i, w);
                        if gv != 0.0 {
                            t.push((h_vars[b], gv));
                        }
                    }
                    t
                })
                .collect(),
            consts: x.column(w),
        };
        lambda_rows.push(add_hypograph_rows(&mut lp, &hypo, &arg, u_vars[w], &format!("s{w}")));
    }
    let acc = inst.acceptance().constraints(k)?;
    add_acceptance_rows(&mut lp, &acc, &u_vars, None);
    Ok(AssembledLp { lp, m_vars, h_vars, u_vars, v_vars: None, hypo, lambda_rows })
}

/// The primal LP for the second-aggregation variant `rho_Gamma(X)`.
pub fn assemble_primal_gamma(inst: &Instance, x: &RandomVector) -> Result<AssembledLp, RiskError> {
    inst.check_position(x)?;
    let gamma_agg = inst.gamma_agg().ok_or(RiskError::MissingGamma)?;
    let n = inst.agents();
    let k = inst.space().len();
    let hypo = inst.lambda().hypograph();
    let hypo_g = gamma_agg.hypograph();
    let mut lp = LinearProgram::new(Sense::Min);
    let m_vars: Vec<usize> =
        (0..n).map(|i| lp.add_var(format!("m{i}"), f64::NEG_INFINITY, f64::INFINITY, 1.0)).collect();
    let h_vars = add_trade_vars(&mut lp, inst.market());
    let u_vars: Vec<usize> =
        (0..k).map(|w| lp.add_var(format!("u{w}"), f64::NEG_INFINITY, f64::INFINITY, 0.0)).collect();
    let v_vars: Vec<usize> =
        (0..k).map(|w| lp.add_var(format!("v{w}"), f64::NEG_INFINITY, f64::INFINITY, 0.0)).collect();

    let mut lambda_rows = Vec::with_capacity(k);
    for w in 0..k {
        let arg = ArgAtScenario {
            terms: (0..n).map(|i| vec![(m_vars[i], 1.0)]).collect(),
            consts: x.column(w),
        };
        lambda_rows.push(add_hypograph_rows(&mut lp, &hypo, &arg, u_vars[w], &format!("s{w}")));

        let trade_arg = ArgAtScenario {
            terms: (0..n)
                .map(|i| {
                    inst.market()
                        .basis()
                        .iter()
                        .enumerate()
                        .filter_map(|(b, g)| {
                            let gv = g.value(i, w);
                            (gv != 0.0).then_some((h_vars[b], gv))
                        })
                        .collect()
                })
                .collect(),
            consts: vec![0.0; n],
        };
        add_hypograph_rows(&mut lp, &hypo_g, &trade_arg, v_vars[w], &format!("t{w}"));
    }
    let acc = inst.acceptance().constraints(k)?;
    add_acceptance_rows(&mut lp, &acc, &u_vars, Some(&v_vars));
    Ok(AssembledLp { lp, m_vars, h_vars, u_vars, v_vars: Some(v_vars), hypo, lambda_rows })
}

/// Support-function LP over the plain aggregate-acceptance set:
/// `sup { sum_i E^{Q_i}[-W^i] : L(W) in A }` with `Q` weights given
/// (already sign-adjusted by the caller).
pub fn assemble_support_acceptance(
    inst: &Instance,
    weights: &[Vec<f64>],
) -> Result<LinearProgram, RiskError> {
    let n = inst.agents();
    let k = inst.space().len();
    let hypo = inst.lambda().hypograph();
    let mut lp = LinearProgram::new(Sense::Max);
    let w_vars: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..k)
                .map(|w| {
                    lp.add_var(
                        format!("W{i}_{w}"),
                        f64::NEG_INFINITY,
                        f64::INFINITY,
                        -weights[i][w],
                    )
                })
                .collect()
        })
        .collect();
    let u_vars: Vec<usize> =
        (0..k).map(|w| lp.add_var(format!("u{w}"), f64::NEG_INFINITY, f64::INFINITY, 0.0)).collect();
    for w in 0..k {
        let arg = ArgAtScenario {
            terms: (0..n).map(|i| vec![(w_vars[i][w], 1.0)]).collect(),
            consts: vec![0.0; n],
        };
        add_hypograph_rows(&mut lp, &hypo, &arg, u_vars[w], &format!("s{w}"));
    }
    let acc = inst.acceptance().constraints(k)?;
    add_acceptance_rows(&mut lp, &acc, &u_vars, None);
    Ok(lp)
}

/// Support-function LP for the second-aggregation variant, where the
/// market is absorbed into the acceptance side:
/// `sup { sum_i E^{Q_i}[-W^i] : L(W) + G2(g) in A for some g in G }`.
pub fn assemble_support_acceptance_gamma(
    inst: &Instance,
    weights: &[Vec<f64>],
) -> Result<LinearProgram, RiskError> {
    let gamma_agg = inst.gamma_agg().ok_or(RiskError::MissingGamma)?;
    let n = inst.agents();
    let k = inst.space().len();
    let hypo = inst.lambda().hypograph();
    let hypo_g = gamma_agg.hypograph();
    let mut lp = LinearProgram::new(Sense::Max);
    let w_vars: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..k)
                .map(|w| {
                    lp.add_var(
                        format!("W{i}_{w}"),
                        f64::NEG_INFINITY,
                        f64::INFINITY,
                        -weights[i][w],
                    )
                })
                .collect()
        })
        .collect();
    let h_vars = add_trade_vars(&mut lp, inst.market());
    let u_vars: Vec<usize> =
        (0..k).map(|w| lp.add_var(format!("u{w}"), f64::NEG_INFINITY, f64::INFINITY, 0.0)).collect();
    let v_vars: Vec<usize> =
        (0..k).map(|w| lp.add_var(format!("v{w}"), f64::NEG_INFINITY, f64::INFINITY, 0.0)).collect();
    for w in 0..k {
        let arg = ArgAtScenario {
            terms: (0..n).map(|i| vec![(w_vars[i][w], 1.0)]).collect(),
            consts: vec![0.0; n],
        };
        add_hypograph_rows(&mut lp, &hypo, &arg, u_vars[w], &format!("s{w}"));
        let trade_arg = ArgAtScenario {
            terms: (0..n)
                .map(|i| {
                    inst.market()
                        .basis()
                        .iter()
                        .enumerate()
                        .filter_map(|(b, g)| {
                            let gv = g.value(i, w);
                            (gv != 0.0).then_some((h_vars[b], gv))
                        })
                        .collect()
                })
                .collect(),
            consts: vec![0.0; n],
        };
        add_hypograph_rows(&mut lp, &hypo_g, &trade_arg, v_vars[w], &format!("t{w}"));
    }
    let acc = inst.acceptance().constraints(k)?;
    add_acceptance_rows(&mut lp, &acc, &u_vars, Some(&v_vars));
    Ok(lp)
}

/// Feasibility LP asking for a trade `g in G` that makes the uniform
/// buffer acceptable: `L(buffer 1 + g) in A` for the plain form,
/// `L(buffer 1) + G2(g) in A` for the second-aggregation form.
pub fn assemble_buffer_feasibility(
    inst: &Instance,
    buffer: f64,
) -> Result<(LinearProgram, Vec<usize>), RiskError> {
    let n = inst.agents();
    let k = inst.space().len();
    let mut lp = LinearProgram::new(Sense::Min);
    let h_vars = add_trade_vars(&mut lp, inst.market());
    match inst.gamma_agg() {
        None => {
            let hypo = inst.lambda().hypograph();
            let u_vars: Vec<usize> = (0..k)
                .map(|w| lp.add_var(format!("u{w}"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
                .collect();
            for w in 0..k {
                let arg = ArgAtScenario {
                    terms: (0..n)
                        .map(|i| {
                            inst.market()
                                .basis()
                                .iter()
                                .enumerate()
                                .filter_map(|(b, g)| {
                                    let gv = g.value(i, w);
                                    (gv != 0.0).then_some((h_vars[b], gv))
                                })
                                .collect()
                        })
                        .collect(),
                    consts: vec![buffer; n],
                };
                add_hypograph_rows(&mut lp, &hypo, &arg, u_vars[w], &format!("s{w}"));
            }
            let acc = inst.acceptance().constraints(k)?;
            add_acceptance_rows(&mut lp, &acc, &u_vars, None);
        }
        Some(gamma_agg) => {
            // L(buffer 1) is a scenario-independent constant.
            let lambda_at_buffer = inst.lambda().evaluate(&vec![buffer; n])?;
            let hypo_g = gamma_agg.hypograph();
            let v_vars: Vec<usize> = (0..k)
                .map(|w| lp.add_var(format!("v{w}"), f64::NEG_INFINITY, f64::INFINITY, 0.0))
                .collect();
            for w in 0..k {
                let trade_arg = ArgAtScenario {
                    terms: (0..n)
                        .map(|i| {
                            inst.market()
                                .basis()
                                .iter()
                                .enumerate()
                                .filter_map(|(b, g)| {
                                    let gv = g.value(i, w);
                                    (gv != 0.0).then_some((h_vars[b], gv))
                                })
                                .collect()
                        })
                        .collect(),
                    consts: vec![0.0; n],
                };
                add_hypograph_rows(&mut lp, &hypo_g, &trade_arg, v_vars[w], &format!("t{w}"));
            }
            let acc = inst.acceptance().constraints(k)?;
            for (t, row) in acc.iter().enumerate() {
                let weight: f64 = row.coefs.iter().sum();
                let coefs: Vec<(usize, f64)> = row
                    .coefs
                    .iter()
                    .enumerate()
                    .filter_map(|(w, &c)| (c != 0.0).then_some((v_vars[w], c)))
                    .collect();
                lp.add_row(
                    format!("acc{t}"),
                    Rel::Ge,
                    row.rhs - weight * lambda_at_buffer,
                    &coefs,
                );
            }
        }
    }
    Ok((lp, h_vars))
}
