//! Self-contained linear-programming kernel.
//!
//! Dense-tableau two-phase primal simplex with Bland's anti-cycling rule.
//! The risk programs are small and heavily degenerate (many zero right-hand
//! sides), so termination guarantees outrank speed. The solver is fully
//! deterministic: fixed pivoting order, no perturbation.
//!
//! Dual multipliers follow the shadow-price convention: the reported vector
//! `duals` is the gradient of the reported optimal value with respect to
//! the row right-hand sides, for both senses. For a minimization a binding
//! `>=` row therefore carries a nonnegative multiplier.

use thiserror::Error;

/// Internal feasibility/optimality tolerance.
const TOL: f64 = 1e-9;
/// Residual level guaranteed on reported solutions.
pub const REPORT_TOL: f64 = 1e-8;
/// Pivot magnitudes below this are never accepted.
const BREAKDOWN_TOL: f64 = 1e-11;
/// Refactorize the tableau from the pristine matrix this often.
const REFRESH_EVERY: usize = 25;
/// Claimed-optimum re-verification attempts per phase.
const MAX_RESTARTS: usize = 60;
/// Global pivot budget.
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("numerical breakdown in simplex: {0}")]
    NumericalBreakdown(String),
    #[error("malformed linear program: {0}")]
    BadInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

impl Rel {
    fn symbol(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Ge => ">=",
            Rel::Eq => "=",
        }
    }
}

#[derive(Debug, Clone)]
struct RowData {
    name: String,
    coefs: Vec<(usize, f64)>,
    rel: Rel,
    rhs: f64,
}

/// A linear program over named variables with per-variable bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    sense: Sense,
    names: Vec<String>,
    obj: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<RowData>,
}

/// Solution of a solved LP, see [`LinearProgram::solve`].
#[derive(Debug, Clone)]
pub enum LpResult {
    Optimal(OptimalSolution),
    Unbounded(UnboundedRay),
    Infeasible(FarkasCertificate),
}

impl LpResult {
    pub fn optimal(&self) -> Option<&OptimalSolution> {
        match self {
            LpResult::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub value: f64,
    pub primal: Vec<f64>,
    /// One multiplier per row; gradient of `value` w.r.t. the row rhs.
    pub duals: Vec<f64>,
    /// `obj_j - sum_r duals_r a_{rj}` in the user's sense.
    pub reduced_costs: Vec<f64>,
}

/// Certificate of unboundedness: `point + t * direction` is feasible for
/// every `t >= 0` and improves the objective strictly. The direction is
/// normalized to unit maximum absolute component.
#[derive(Debug, Clone)]
pub struct UnboundedRay {
    pub point: Vec<f64>,
    pub direction: Vec<f64>,
}

/// Farkas certificate of infeasibility. With the stated sign conditions,
/// aggregating rows by `row_multipliers` and bounds by the bound
/// multipliers yields the identically-zero functional on the left and a
/// strictly positive constant on the right.
#[derive(Debug, Clone)]
pub struct FarkasCertificate {
    /// Per original row; `>= 0` on `>=` rows, `<= 0` on `<=` rows.
    pub row_multipliers: Vec<f64>,
    /// Per variable, `>= 0`, zero where the lower bound is infinite.
    pub lower_multipliers: Vec<f64>,
    /// Per variable, `<= 0`, zero where the upper bound is infinite.
    pub upper_multipliers: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram {
            sense,
            names: Vec::new(),
            obj: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Adds a variable with bounds (`f64::NEG_INFINITY` / `f64::INFINITY`
    /// for free sides) and objective coefficient; returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, obj: f64) -> usize {
        self.names.push(name.into());
        self.lower.push(lower);
        self.upper.push(upper);
        self.obj.push(obj);
        self.names.len() - 1
    }

    /// Adds `sum coefs . x  rel  rhs`; returns the row index.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        rel: Rel,
        rhs: f64,
        coefs: &[(usize, f64)],
    ) -> usize {
        self.rows.push(RowData { name: name.into(), coefs: coefs.to_vec(), rel, rhs });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var_name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn row_name(&self, r: usize) -> &str {
        &self.rows[r].name
    }

    fn validate(&self) -> Result<(), LpError> {
        for (j, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::BadInput(format!("bad bounds on {}", self.names[j])));
            }
            if l > u {
                return Err(LpError::BadInput(format!(
                    "lower bound exceeds upper bound on {}",
                    self.names[j]
                )));
            }
            if !self.obj[j].is_finite() {
                return Err(LpError::BadInput(format!(
                    "non-finite objective coefficient on {}",
                    self.names[j]
                )));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(LpError::BadInput(format!("non-finite rhs in row {}", row.name)));
            }
            for &(j, c) in &row.coefs {
                if j >= self.num_vars() {
                    return Err(LpError::BadInput(format!(
                        "row {} references unknown variable {j}",
                        row.name
                    )));
                }
                if !c.is_finite() {
                    return Err(LpError::BadInput(format!(
                        "non-finite coefficient in row {}",
                        row.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Text export, one constraint per line, byte-stable ordering.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Min => "min",
            Sense::Max => "max",
        };
        write!(out, "objective {sense}:").unwrap();
        for (j, &c) in self.obj.iter().enumerate() {
            if c != 0.0 {
                write!(out, " {} {}", fmt17(c), self.names[j]).unwrap();
            }
        }
        out.push('\n');
        for row in &self.rows {
            write!(out, "row {} {}:", row.name, row.rel.symbol()).unwrap();
            let mut dense = vec![0.0; self.num_vars()];
            for &(j, c) in &row.coefs {
                dense[j] += c;
            }
            for (j, &c) in dense.iter().enumerate() {
                if c != 0.0 {
                    write!(out, " {} {}", fmt17(c), self.names[j]).unwrap();
                }
            }
            write!(out, " rhs {}", fmt17(row.rhs)).unwrap();
            out.push('\n');
        }
        for j in 0..self.num_vars() {
            let l = self.lower[j];
            let u = self.upper[j];
            let lo = if l == f64::NEG_INFINITY { "-inf".to_string() } else { fmt17(l) };
            let hi = if u == f64::INFINITY { "+inf".to_string() } else { fmt17(u) };
            writeln!(out, "bound {} in [{lo}, {hi}]", self.names[j]).unwrap();
        }
        out
    }

    pub fn solve(&self) -> Result<LpResult, LpError> {
        self.validate()?;
        let mut tableau = Tableau::build(self)?;
        tableau.refresh_every = REFRESH_EVERY;
        match tableau.run(self) {
            Err(LpError::NumericalBreakdown(msg)) if msg.contains("singular") => {
                // A pivot on a drifted near-zero entry produced a singular
                // basis. Restart refactorizing after every pivot, so each
                // pivot decision sees exact data.
                let mut paranoid = Tableau::build(self)?;
                paranoid.refresh_every = 1;
                paranoid.run(self)
            }
            other => other,
        }
    }

    /// Maximum scaled feasibility/optimality residual of a reported optimal
    /// solution: primal feasibility, bound feasibility, dual sign
    /// conditions, complementary slackness and the primal-dual gap.
    pub fn check_optimal(&self, sol: &OptimalSolution) -> f64 {
        let mut worst: f64 = 0.0;
        let sign = match self.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        for (r, row) in self.rows.iter().enumerate() {
            let act: f64 = row.coefs.iter().map(|&(j, c)| c * sol.primal[j]).sum();
            let scale = row
                .coefs
                .iter()
                .map(|&(_, c)| c.abs())
                .fold(1.0_f64.max(row.rhs.abs()), f64::max);
            let viol = match row.rel {
                Rel::Le => (act - row.rhs).max(0.0),
                Rel::Ge => (row.rhs - act).max(0.0),
                Rel::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol / scale);
            // Dual sign: for Min, >= rows need y >= 0 and <= rows y <= 0;
            // flipped for Max.
            let y = sol.duals[r] * sign;
            let sign_viol = match row.rel {
                Rel::Ge => (-y).max(0.0),
                Rel::Le => y.max(0.0),
                Rel::Eq => 0.0,
            };
            worst = worst.max(sign_viol);
            // Complementary slackness on rows.
            worst = worst.max((sol.duals[r] * (act - row.rhs)).abs() / scale);
        }
        let mut dual_value: f64 = self
            .rows
            .iter()
            .zip(&sol.duals)
            .map(|(row, &y)| y * row.rhs)
            .sum();
        for j in 0..self.num_vars() {
            let x = sol.primal[j];
            worst = worst.max((self.lower[j] - x).max(0.0));
            worst = worst.max((x - self.upper[j]).max(0.0));
            let rc = sol.reduced_costs[j] * sign;
            // Stationarity: rc must price some bound; positive rc needs a
            // finite lower bound (for Min) and vice versa.
            if rc > 0.0 {
                if self.lower[j] == f64::NEG_INFINITY {
                    worst = worst.max(rc);
                } else {
                    worst = worst.max(rc * (x - self.lower[j]).abs());
                    dual_value += sol.reduced_costs[j] * self.lower[j];
                }
            } else if rc < 0.0 {
                if self.upper[j] == f64::INFINITY {
                    worst = worst.max(-rc);
                } else {
                    worst = worst.max((-rc) * (x - self.upper[j]).abs());
                    dual_value += sol.reduced_costs[j] * self.upper[j];
                }
            }
        }
        worst = worst.max((sol.value - dual_value).abs() / (1.0 + sol.value.abs()));
        worst
    }

    /// Verifies an unboundedness certificate; returns the worst violation.
    pub fn check_ray(&self, ray: &UnboundedRay) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let act: f64 = row.coefs.iter().map(|&(j, c)| c * ray.point[j]).sum();
            let dir: f64 = row.coefs.iter().map(|&(j, c)| c * ray.direction[j]).sum();
            let scale = row
                .coefs
                .iter()
                .map(|&(_, c)| c.abs())
                .fold(1.0_f64.max(row.rhs.abs()), f64::max);
            let viol = match row.rel {
                Rel::Le => (act - row.rhs).max(0.0).max(dir.max(0.0)),
                Rel::Ge => (row.rhs - act).max(0.0).max((-dir).max(0.0)),
                Rel::Eq => (act - row.rhs).abs().max(dir.abs()),
            };
            worst = worst.max(viol / scale);
        }
        for j in 0..self.num_vars() {
            worst = worst.max((self.lower[j] - ray.point[j]).max(0.0));
            worst = worst.max((ray.point[j] - self.upper[j]).max(0.0));
            if self.lower[j].is_finite() {
                worst = worst.max((-ray.direction[j]).max(0.0));
            }
            if self.upper[j].is_finite() {
                worst = worst.max(ray.direction[j].max(0.0));
            }
        }
        let slope: f64 = self
            .obj
            .iter()
            .zip(&ray.direction)
            .map(|(&c, &d)| c * d)
            .sum();
        let improving = match self.sense {
            Sense::Min => -slope,
            Sense::Max => slope,
        };
        if improving < TOL {
            worst = worst.max(TOL - improving);
        }
        worst
    }

    /// Verifies a Farkas certificate; returns the worst violation of the
    /// sign conditions and of the aggregated contradiction.
    pub fn check_farkas(&self, cert: &FarkasCertificate) -> f64 {
        let mut worst: f64 = 0.0;
        let mut combined = vec![0.0; self.num_vars()];
        let mut rhs_total = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            let y = cert.row_multipliers[r];
            match row.rel {
                Rel::Ge => worst = worst.max((-y).max(0.0)),
                Rel::Le => worst = worst.max(y.max(0.0)),
                Rel::Eq => {}
            }
            for &(j, c) in &row.coefs {
                combined[j] += y * c;
            }
            rhs_total += y * row.rhs;
        }
        for j in 0..self.num_vars() {
            let wl = cert.lower_multipliers[j];
            let wu = cert.upper_multipliers[j];
            worst = worst.max((-wl).max(0.0));
            worst = worst.max(wu.max(0.0));
            if self.lower[j] == f64::NEG_INFINITY {
                worst = worst.max(wl.abs());
            } else {
                rhs_total += wl * self.lower[j];
            }
            if self.upper[j] == f64::INFINITY {
                worst = worst.max(wu.abs());
            } else {
                rhs_total += wu * self.upper[j];
            }
            combined[j] += wl + wu;
            worst = worst.max(combined[j].abs());
        }
        // Any feasible point would force 0 >= rhs_total, so a valid
        // certificate has rhs_total strictly positive.
        if rhs_total <= 0.0 {
            worst = worst.max(-rhs_total + TOL);
        }
        worst
    }
}

fn fmt17(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Dense LU factorization with partial pivoting, used to refactorize the
/// simplex basis. `PB = LU` with `perm[i]` the original row in position
/// `i`; `L` has unit diagonal and is stored below it.
struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
    n: usize,
}

impl Lu {
    /// Factors the matrix given by columns; `None` if singular.
    fn factor(cols: Vec<Vec<f64>>) -> Option<Lu> {
        let n = cols.len();
        let mut lu: Vec<Vec<f64>> =
            (0..n).map(|r| (0..n).map(|c| cols[c][r]).collect()).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))?;
            if lu[piv][k].abs() < 1e-12 {
                return None;
            }
            lu.swap(k, piv);
            perm.swap(k, piv);
            for i in k + 1..n {
                let f = lu[i][k] / lu[k][k];
                lu[i][k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i][j] -= f * lu[k][j];
                    }
                }
            }
        }
        Some(Lu { lu, perm, n })
    }

    /// Solves `Bx = v` in place.
    fn solve(&self, v: &mut Vec<f64>) {
        let n = self.n;
        let permuted: Vec<f64> = (0..n).map(|i| v[self.perm[i]]).collect();
        *v = permuted;
        for i in 1..n {
            let mut acc = v[i];
            for j in 0..i {
                acc -= self.lu[i][j] * v[j];
            }
            v[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = v[i];
            for j in i + 1..n {
                acc -= self.lu[i][j] * v[j];
            }
            v[i] = acc / self.lu[i][i];
        }
    }

    /// Solves `B^T y = c` in place.
    fn solve_transposed(&self, c: &mut Vec<f64>) {
        let n = self.n;
        // U^T z = c (forward), then L^T w = z (backward), then y = P^T w.
        for i in 0..n {
            let mut acc = c[i];
            for j in 0..i {
                acc -= self.lu[j][i] * c[j];
            }
            c[i] = acc / self.lu[i][i];
        }
        for i in (0..n).rev() {
            let mut acc = c[i];
            for j in i + 1..n {
                acc -= self.lu[j][i] * c[j];
            }
            c[i] = acc;
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[self.perm[i]] = c[i];
        }
        *c = y;
    }
}

/// How an original variable maps into the standardized columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lower + col`, optional upper-bound row.
    Shifted { col: usize, bound_row: Option<usize> },
    /// `x = upper - col`, optional (lower-)bound row.
    NegShifted { col: usize, bound_row: Option<usize> },
    /// `x = pos - neg`.
    Split { pos: usize, neg: usize },
}

struct Tableau {
    /// Working constraint matrix, rows x (structural + slack + artificial)
    /// columns; mutated by pivoting, periodically rebuilt from `a0`.
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    obj_row: Vec<f64>,
    obj_rhs: f64,
    /// Pristine standardized matrix and right-hand side. The risk LPs are
    /// heavily degenerate, so pivoting drifts; every phase boundary (and
    /// every `REFRESH_EVERY` pivots) the working state is refactorized
    /// from these through an LU of the current basis.
    a0: Vec<Vec<f64>>,
    rhs0: Vec<f64>,
    /// Current phase costs over all columns.
    phase_costs: Vec<f64>,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    n_real: usize,
    n_cols: usize,
    art_start: usize,
    /// Standardized min-sense objective per structural/slack column.
    costs: Vec<f64>,
    obj_const: f64,
    var_map: Vec<VarMap>,
    /// Internal row index of each original row.
    orig_row: Vec<usize>,
    /// Sign applied to each internal row during b >= 0 normalization.
    row_sign: Vec<f64>,
    pivots: usize,
    refresh_every: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Tableau, LpError> {
        let n = lp.num_vars();
        // Assign structural columns.
        let mut var_map = Vec::with_capacity(n);
        let mut n_struct = 0usize;
        for j in 0..n {
            let l = lp.lower[j];
            let u = lp.upper[j];
            if l.is_finite() {
                var_map.push(VarMap::Shifted { col: n_struct, bound_row: None });
                n_struct += 1;
            } else if u.is_finite() {
                var_map.push(VarMap::NegShifted { col: n_struct, bound_row: None });
                n_struct += 1;
            } else {
                var_map.push(VarMap::Split { pos: n_struct, neg: n_struct + 1 });
                n_struct += 2;
            }
        }
        // Internal rows: original rows first, then bound rows.
        let mut dense_rows: Vec<(Vec<f64>, Rel, f64)> = Vec::new();
        for row in &lp.rows {
            let mut dense = vec![0.0; n_struct];
            let mut rhs = row.rhs;
            for &(j, c) in &row.coefs {
                match var_map[j] {
                    VarMap::Shifted { col, .. } => {
                        dense[col] += c;
                        rhs -= c * lp.lower[j];
                    }
                    VarMap::NegShifted { col, .. } => {
                        dense[col] -= c;
                        rhs -= c * lp.upper[j];
                    }
                    VarMap::Split { pos, neg } => {
                        dense[pos] += c;
                        dense[neg] -= c;
                    }
                }
            }
            dense_rows.push((dense, row.rel, rhs));
        }
        for j in 0..n {
            let l = lp.lower[j];
            let u = lp.upper[j];
            if l.is_finite() && u.is_finite() {
                let col = match var_map[j] {
                    VarMap::Shifted { col, .. } => col,
                    _ => unreachable!(),
                };
                let mut dense = vec![0.0; n_struct];
                dense[col] = 1.0;
                let idx = dense_rows.len();
                dense_rows.push((dense, Rel::Le, u - l));
                var_map[j] = VarMap::Shifted { col, bound_row: Some(idx) };
            }
        }

        let m = dense_rows.len();
        // Count slacks.
        let n_slack = dense_rows.iter().filter(|(_, rel, _)| *rel != Rel::Eq).count();
        let n_real = n_struct + n_slack;
        let n_cols = n_real + m;
        let art_start = n_real;

        let mut a = vec![vec![0.0; n_cols]; m];
        let mut rhs = vec![0.0; m];
        let mut row_sign = vec![1.0; m];
        let mut slack_idx = n_struct;
        for (i, (dense, rel, b)) in dense_rows.into_iter().enumerate() {
            a[i][..n_struct].copy_from_slice(&dense);
            match rel {
                Rel::Le => {
                    a[i][slack_idx] = 1.0;
                    slack_idx += 1;
                }
                Rel::Ge => {
                    a[i][slack_idx] = -1.0;
                    slack_idx += 1;
                }
                Rel::Eq => {}
            }
            rhs[i] = b;
            if b < 0.0 {
                row_sign[i] = -1.0;
                for v in a[i].iter_mut() {
                    *v = -*v;
                }
                rhs[i] = -b;
            }
            a[i][art_start + i] = 1.0;
        }

        // Standardized min-sense costs on structural columns.
        let flip = match lp.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let mut costs = vec![0.0; n_real];
        let mut obj_const = 0.0;
        for j in 0..n {
            let c = flip * lp.obj[j];
            match var_map[j] {
                VarMap::Shifted { col, .. } => {
                    costs[col] = c;
                    obj_const += c * lp.lower[j];
                }
                VarMap::NegShifted { col, .. } => {
                    costs[col] = -c;
                    obj_const += c * lp.upper[j];
                }
                VarMap::Split { pos, neg } => {
                    costs[pos] = c;
                    costs[neg] = -c;
                }
            }
        }

        let orig_row = (0..lp.num_rows()).collect();
        Ok(Tableau {
            a0: a.clone(),
            rhs0: rhs.clone(),
            a,
            rhs,
            obj_row: vec![0.0; n_cols],
            obj_rhs: 0.0,
            phase_costs: vec![0.0; n_cols],
            basis: Vec::new(),
            in_basis: vec![false; n_cols],
            n_real,
            n_cols,
            art_start,
            costs,
            obj_const,
            var_map,
            orig_row,
            row_sign,
            pivots: 0,
            refresh_every: REFRESH_EVERY,
        })
    }

    fn m(&self) -> usize {
        self.a.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        for i in 0..self.m() {
            if i == r {
                continue;
            }
            let f = self.a[i][c];
            if f != 0.0 {
                for j in 0..self.n_cols {
                    self.a[i][j] -= f * self.a[r][j];
                }
                self.a[i][c] = 0.0;
                self.rhs[i] -= f * self.rhs[r];
                if self.rhs[i].abs() < 1e-13 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let f = self.obj_row[c];
        if f != 0.0 {
            for j in 0..self.n_cols {
                self.obj_row[j] -= f * self.a[r][j];
            }
            self.obj_row[c] = 0.0;
            self.obj_rhs -= f * self.rhs[r];
        }
        self.in_basis[self.basis[r]] = false;
        self.in_basis[c] = true;
        self.basis[r] = c;
    }

    /// Refactorizes the working state from the pristine matrix through an
    /// LU of the current basis: tableau rows, right-hand side, reduced
    /// costs and objective value are all recomputed from first principles,
    /// clearing accumulated pivoting drift.
    fn refresh(&mut self) -> Result<(), LpError> {
        let m = self.m();
        if m == 0 {
            self.obj_row.copy_from_slice(&self.phase_costs);
            self.obj_rhs = 0.0;
            return Ok(());
        }
        let b_cols: Vec<Vec<f64>> =
            (0..m).map(|i| (0..m).map(|r| self.a0[r][self.basis[i]]).collect()).collect();
        let lu = Lu::factor(b_cols).ok_or_else(|| {
            LpError::NumericalBreakdown("basis matrix is numerically singular".into())
        })?;
        // x_B = B^-1 b.
        let mut xb = self.rhs0.clone();
        lu.solve(&mut xb);
        self.rhs.copy_from_slice(&xb);
        // Tableau columns: B^-1 A_j for non-basic j, unit for basic.
        for j in 0..self.n_cols {
            if self.in_basis[j] {
                continue;
            }
            let mut col: Vec<f64> = (0..m).map(|r| self.a0[r][j]).collect();
            lu.solve(&mut col);
            for r in 0..m {
                self.a[r][j] = col[r];
            }
        }
        for (i, &bj) in self.basis.iter().enumerate() {
            for r in 0..m {
                self.a[r][bj] = if r == i { 1.0 } else { 0.0 };
            }
        }
        // Duals y = B^-T c_B, reduced costs straight from the original
        // data, objective value from the basic solution.
        let mut y: Vec<f64> = (0..m).map(|i| self.phase_costs[self.basis[i]]).collect();
        lu.solve_transposed(&mut y);
        for j in 0..self.n_cols {
            if self.in_basis[j] {
                self.obj_row[j] = 0.0;
            } else {
                let dot: f64 = (0..m).map(|r| y[r] * self.a0[r][j]).sum();
                self.obj_row[j] = self.phase_costs[j] - dot;
            }
        }
        self.obj_rhs = -(0..m)
            .map(|i| self.phase_costs[self.basis[i]] * self.rhs[i])
            .sum::<f64>();
        Ok(())
    }

    fn set_phase1_costs(&mut self) {
        for j in 0..self.n_cols {
            self.phase_costs[j] = if j >= self.art_start { 1.0 } else { 0.0 };
        }
    }

    fn set_phase2_costs(&mut self) {
        for j in 0..self.n_cols {
            self.phase_costs[j] = if j < self.costs.len() { self.costs[j] } else { 0.0 };
        }
    }

    fn has_improving(&self, col_limit: usize) -> bool {
        (0..col_limit).any(|j| !self.in_basis[j] && self.obj_row[j] < -TOL)
    }

    /// Bland's rule iteration until claimed optimality or unboundedness,
    /// refactorizing every `REFRESH_EVERY` pivots. `allow_art` permits
    /// artificial columns to enter (phase 1 only, where they never want
    /// to). Claims are re-verified against refreshed data by the caller.
    fn iterate(&mut self, allow_art: bool) -> Result<Option<usize>, LpError> {
        let col_limit = if allow_art { self.n_cols } else { self.art_start };
        let mut since_refresh = 0usize;
        loop {
            let mut entering = None;
            for j in 0..col_limit {
                if !self.in_basis[j] && self.obj_row[j] < -TOL {
                    entering = Some(j);
                    break;
                }
            }
            let c = match entering {
                Some(c) => c,
                None => return Ok(None),
            };
            // Ratio test: Bland tie-break by basic index, except that
            // candidates with well-scaled pivots are preferred inside the
            // tie window; dividing by a near-zero pivot is what erodes
            // the tableau.
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m() {
                let piv = self.a[i][c];
                if piv > TOL {
                    best_ratio = best_ratio.min(self.rhs[i] / piv);
                }
            }
            if best_ratio == f64::INFINITY {
                return Ok(Some(c));
            }
            let window = 1e-9 * (1.0 + best_ratio.abs());
            let mut leave: Option<(usize, bool)> = None; // (row, well_scaled)
            for i in 0..self.m() {
                let piv = self.a[i][c];
                if piv > TOL && self.rhs[i] / piv <= best_ratio + window {
                    let well = piv >= 1e-7;
                    let better = match leave {
                        None => true,
                        Some((best_i, best_well)) => {
                            (well && !best_well)
                                || (well == best_well && self.basis[i] < self.basis[best_i])
                        }
                    };
                    if better {
                        leave = Some((i, well));
                    }
                }
            }
            let (r, _) = leave.expect("ratio test found a candidate");
            if self.a[r][c].abs() < BREAKDOWN_TOL {
                return Err(LpError::NumericalBreakdown(format!(
                    "pivot magnitude {} below {BREAKDOWN_TOL}",
                    self.a[r][c].abs()
                )));
            }
            self.pivot(r, c);
            self.pivots += 1;
            since_refresh += 1;
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::NumericalBreakdown(format!(
                    "no convergence within {MAX_PIVOTS} pivots"
                )));
            }
            if since_refresh >= self.refresh_every {
                self.refresh()?;
                since_refresh = 0;
            }
        }
    }

    fn run(&mut self, lp: &LinearProgram) -> Result<LpResult, LpError> {
        let m = self.m();
        self.basis = (0..m).map(|i| self.art_start + i).collect();
        for i in 0..m {
            self.in_basis[self.art_start + i] = true;
        }

        // Phase 1: minimize the sum of artificials. Each claimed optimum
        // is re-verified against a fresh factorization; if refreshed
        // reduced costs still show an improving column, iteration resumes.
        self.set_phase1_costs();
        self.refresh()?;
        for attempt in 0.. {
            if attempt > MAX_RESTARTS {
                return Err(LpError::NumericalBreakdown(
                    "phase 1 failed to stabilize".into(),
                ));
            }
            if self.iterate(true)?.is_some() {
                return Err(LpError::NumericalBreakdown(
                    "phase-1 objective is bounded below but simplex reported otherwise".into(),
                ));
            }
            self.refresh()?;
            if !self.has_improving(self.n_cols) {
                break;
            }
        }
        let infeas = -self.obj_rhs;
        if infeas > 1e-7 {
            return Ok(LpResult::Infeasible(self.extract_farkas(lp)));
        }

        // Drive remaining artificials out of the basis where possible.
        for i in 0..m {
            if self.basis[i] >= self.art_start {
                let piv_col = (0..self.n_real).find(|&j| self.a[i][j].abs() > 1e-7);
                if let Some(c) = piv_col {
                    self.pivot(i, c);
                }
            }
        }

        // Phase 2, with the same verified-claim loop.
        self.set_phase2_costs();
        self.refresh()?;
        for attempt in 0.. {
            if attempt > MAX_RESTARTS {
                return Err(LpError::NumericalBreakdown(
                    "phase 2 failed to stabilize".into(),
                ));
            }
            match self.iterate(false)? {
                None => {
                    self.refresh()?;
                    if !self.has_improving(self.art_start) {
                        return Ok(LpResult::Optimal(self.extract_optimal(lp)));
                    }
                }
                Some(col) => {
                    self.refresh()?;
                    if self.obj_row[col] < -TOL
                        && !self.in_basis[col]
                        && (0..m).all(|i| self.a[i][col] <= TOL)
                    {
                        return Ok(LpResult::Unbounded(self.extract_ray(lp, col)));
                    }
                    // Spurious claim on drifted data; resume.
                }
            }
        }
        unreachable!("stabilization loop always returns")
    }

    fn internal_primal(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_cols];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.rhs[i];
        }
        x
    }

    fn user_primal(&self, lp: &LinearProgram, xhat: &[f64]) -> Vec<f64> {
        (0..lp.num_vars())
            .map(|j| match self.var_map[j] {
                VarMap::Shifted { col, .. } => lp.lower[j] + xhat[col],
                VarMap::NegShifted { col, .. } => lp.upper[j] - xhat[col],
                VarMap::Split { pos, neg } => xhat[pos] - xhat[neg],
            })
            .collect()
    }

    /// Internal duals from the reduced costs of the artificial columns,
    /// using the current (phase-cost-dependent) objective row.
    fn internal_duals(&self, art_cost: f64) -> Vec<f64> {
        (0..self.m())
            .map(|i| art_cost - self.obj_row[self.art_start + i])
            .collect()
    }

    fn extract_optimal(&self, lp: &LinearProgram) -> OptimalSolution {
        let xhat = self.internal_primal();
        let primal = self.user_primal(lp, &xhat);
        let value_min = -self.obj_rhs + self.obj_const;
        let y_int = self.internal_duals(0.0);
        let sense_flip = match lp.sense {
            Sense::Min => 1.0,
            Sense::Max => -1.0,
        };
        let mut duals = vec![0.0; lp.num_rows()];
        for (&orig, i) in self.orig_row.iter().zip(0..) {
            duals[orig] = sense_flip * self.row_sign[i] * y_int[i];
        }
        let reduced_costs = (0..lp.num_vars())
            .map(|j| {
                let mut rc = lp.obj[j];
                for (r, row) in lp.rows.iter().enumerate() {
                    if duals[r] != 0.0 {
                        rc -= duals[r] * row.coefs.iter().filter(|&&(v, _)| v == j).map(|&(_, c)| c).sum::<f64>();
                    }
                }
                rc
            })
            .collect();
        OptimalSolution {
            value: sense_flip * value_min,
            primal,
            duals,
            reduced_costs,
        }
    }

    fn extract_ray(&self, lp: &LinearProgram, col: usize) -> UnboundedRay {
        let xhat = self.internal_primal();
        let point = self.user_primal(lp, &xhat);
        let mut dhat = vec![0.0; self.n_cols];
        dhat[col] = 1.0;
        for i in 0..self.m() {
            dhat[self.basis[i]] = -self.a[i][col];
        }
        let mut direction: Vec<f64> = (0..lp.num_vars())
            .map(|j| match self.var_map[j] {
                VarMap::Shifted { col, .. } => dhat[col],
                VarMap::NegShifted { col, .. } => -dhat[col],
                VarMap::Split { pos, neg } => dhat[pos] - dhat[neg],
            })
            .collect();
        let norm = direction.iter().map(|d| d.abs()).fold(0.0, f64::max);
        if norm > 0.0 {
            for d in direction.iter_mut() {
                *d /= norm;
                if *d == 0.0 {
                    *d = 0.0; // normalize -0.0
                }
            }
        }
        UnboundedRay { point, direction }
    }

    fn extract_farkas(&self, lp: &LinearProgram) -> FarkasCertificate {
        // Phase-1 duals: artificial cost is 1.
        let y_int = self.internal_duals(1.0);
        let mut row_multipliers = vec![0.0; lp.num_rows()];
        for (&orig, i) in self.orig_row.iter().zip(0..) {
            row_multipliers[orig] = self.row_sign[i] * y_int[i];
        }
        // sigma_p = y_int' Ahat_p for each structural column (phase-1
        // reduced cost is -sigma_p, and is >= -tol at optimality).
        let sigma = |p: usize| -self.obj_row[p];
        let mut lower_multipliers = vec![0.0; lp.num_vars()];
        let mut upper_multipliers = vec![0.0; lp.num_vars()];
        for j in 0..lp.num_vars() {
            match self.var_map[j] {
                VarMap::Shifted { col, bound_row } => {
                    let ybnd = bound_row
                        .map(|br| self.row_sign[br] * y_int[br])
                        .unwrap_or(0.0);
                    upper_multipliers[j] = ybnd.min(0.0);
                    lower_multipliers[j] = (-sigma(col)).max(0.0);
                }
                VarMap::NegShifted { col, bound_row } => {
                    let ybnd = bound_row
                        .map(|br| self.row_sign[br] * y_int[br])
                        .unwrap_or(0.0);
                    lower_multipliers[j] = (-ybnd).max(0.0);
                    upper_multipliers[j] = sigma(col).min(0.0);
                }
                VarMap::Split { .. } => {}
            }
        }
        FarkasCertificate { row_multipliers, lower_multipliers, upper_multipliers }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_with_single_ge_row() {
        let mut lp = LinearProgram::new(Sense::Min);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row("r", Rel::Ge, 3.0, &[(x, 1.0)]);
        let sol = match lp.solve().unwrap() {
            LpResult::Optimal(s) => s,
            other => panic!("expected optimal, got {other:?}"),
        };
        assert!((sol.value - 3.0).abs() < 1e-9);
        assert!((sol.primal[0] - 3.0).abs() < 1e-9);
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);
        assert!(lp.check_optimal(&sol) < REPORT_TOL);
    }

    #[test]
    fn max_unbounded_with_unit_ray() {
        let mut lp = LinearProgram::new(Sense::Max);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        lp.add_row("r", Rel::Ge, 0.0, &[(x, 1.0)]);
        let ray = match lp.solve().unwrap() {
            LpResult::Unbounded(r) => r,
            other => panic!("expected unbounded, got {other:?}"),
        };
        assert!((ray.direction[0] - 1.0).abs() < 1e-9);
        assert!(lp.check_ray(&ray) < REPORT_TOL);
    }

    #[test]
    fn covering_pair_with_dual_on_binding_row() {
        let mut lp = LinearProgram::new(Sense::Min);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = lp.add_var("y", 0.0, f64::INFINITY, 1.0);
        lp.add_row("cover", Rel::Ge, 1.0, &[(x, 1.0), (y, 1.0)]);
        let sol = match lp.solve().unwrap() {
            LpResult::Optimal(s) => s,
            other => panic!("expected optimal, got {other:?}"),
        };
        assert!((sol.value - 1.0).abs() < 1e-9);
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);
        assert!(lp.check_optimal(&sol) < REPORT_TOL);
    }

    #[test]
    fn infeasible_box_produces_verifying_farkas() {
        let mut lp = LinearProgram::new(Sense::Min);
        let x = lp.add_var("x", 0.0, 1.0, 0.0);
        lp.add_row("r", Rel::Ge, 2.0, &[(x, 1.0)]);
        let cert = match lp.solve().unwrap() {
            LpResult::Infeasible(c) => c,
            other => panic!("expected infeasible, got {other:?}"),
        };
        assert!(lp.check_farkas(&cert) < REPORT_TOL, "{cert:?}");
    }

    #[test]
    fn conflicting_equalities_are_infeasible() {
        let mut lp = LinearProgram::new(Sense::Max);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = lp.add_var("y", f64::NEG_INFINITY, f64::INFINITY, -1.0);
        lp.add_row("a", Rel::Eq, 1.0, &[(x, 1.0), (y, 1.0)]);
        lp.add_row("b", Rel::Eq, 3.0, &[(x, 1.0), (y, 1.0)]);
        let cert = match lp.solve().unwrap() {
            LpResult::Infeasible(c) => c,
            other => panic!("expected infeasible, got {other:?}"),
        };
        assert!(lp.check_farkas(&cert) < REPORT_TOL, "{cert:?}");
    }

    #[test]
    fn equality_with_free_variables() {
        // min x + 2y s.t. x + y = 1 -> put everything on x.
        let mut lp = LinearProgram::new(Sense::Min);
        let x = lp.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let y = lp.add_var("y", f64::NEG_INFINITY, f64::INFINITY, 2.0);
        lp.add_row("bal", Rel::Eq, 1.0, &[(x, 1.0), (y, 1.0)]);
        let ray = match lp.solve().unwrap() {
            LpResult::Unbounded(r) => r,
            other => panic!("expected unbounded, got {other:?}"),
        };
        assert!(lp.check_ray(&ray) < REPORT_TOL);
    }

    #[test]
    fn bounded_max_with_upper_bounds() {
        // max 2x + 3y, x <= 4, y <= 5, x + y <= 6, x,y >= 0.
        let mut lp = LinearProgram::new(Sense::Max);
        let x = lp.add_var("x", 0.0, 4.0, 2.0);
        let y = lp.add_var("y", 0.0, 5.0, 3.0);
        lp.add_row("cap", Rel::Le, 6.0, &[(x, 1.0), (y, 1.0)]);
        let sol = match lp.solve().unwrap() {
            LpResult::Optimal(s) => s,
            other => panic!("expected optimal, got {other:?}"),
        };
        // Vertices: (0,5)->15, (1,5)->17, (4,2)->14, ...
        assert!((sol.value - 17.0).abs() < 1e-9, "value {}", sol.value);
        assert!(lp.check_optimal(&sol) < REPORT_TOL);
    }

    #[test]
    fn dual_is_rhs_gradient_for_max_sense() {
        let mut lp = LinearProgram::new(Sense::Max);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("cap", Rel::Le, 2.0, &[(x, 1.0)]);
        let sol = lp.solve().unwrap().optimal().unwrap().clone();
        assert!((sol.value - 2.0).abs() < 1e-9);
        // Raising the cap raises the max: gradient +1.
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_lower_bounds_shift_correctly() {
        let mut lp = LinearProgram::new(Sense::Min);
        let x = lp.add_var("x", -5.0, -1.0, 1.0);
        lp.add_row("r", Rel::Ge, -3.0, &[(x, 1.0)]);
        let sol = lp.solve().unwrap().optimal().unwrap().clone();
        assert!((sol.value + 3.0).abs() < 1e-9);
        assert!(lp.check_optimal(&sol) < REPORT_TOL);
    }

    #[test]
    fn determinism_bit_for_bit() {
        let build = || {
            let mut lp = LinearProgram::new(Sense::Min);
            let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
            let y = lp.add_var("y", 0.0, f64::INFINITY, 1.3);
            let z = lp.add_var("z", f64::NEG_INFINITY, f64::INFINITY, -0.2);
            lp.add_row("a", Rel::Ge, 1.0, &[(x, 1.0), (y, 2.0), (z, -1.0)]);
            lp.add_row("b", Rel::Le, 4.0, &[(x, 3.0), (z, 1.0)]);
            lp.add_row("c", Rel::Eq, 0.5, &[(y, 1.0), (z, 1.0)]);
            lp
        };
        let s1 = build().solve().unwrap().optimal().unwrap().clone();
        let s2 = build().solve().unwrap().optimal().unwrap().clone();
        assert_eq!(s1.value.to_bits(), s2.value.to_bits());
        for (a, b) in s1.primal.iter().zip(&s2.primal) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in s1.duals.iter().zip(&s2.duals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn text_export_is_stable() {
        let mut lp = LinearProgram::new(Sense::Min);
        let x = lp.add_var("x", 0.0, f64::INFINITY, 1.0);
        lp.add_row("r", Rel::Ge, 3.0, &[(x, 1.0)]);
        let a = lp.to_text();
        let b = lp.to_text();
        assert_eq!(a, b);
        assert!(a.contains("row r >=:"));
        assert!(a.contains("bound x in"));
    }

    #[test]
    fn degenerate_covering_terminates() {
        // Many zero right-hand sides; exercises Bland's rule.
        let mut lp = LinearProgram::new(Sense::Min);
        let vars: Vec<usize> = (0..6)
            .map(|i| lp.add_var(format!("x{i}"), 0.0, f64::INFINITY, 1.0))
            .collect();
        for i in 0..5 {
            lp.add_row(
                format!("r{i}"),
                Rel::Ge,
                0.0,
                &[(vars[i], 1.0), (vars[i + 1], -1.0)],
            );
        }
        lp.add_row("anchor", Rel::Ge, 1.0, &[(vars[0], 1.0), (vars[5], 1.0)]);
        let sol = lp.solve().unwrap().optimal().unwrap().clone();
        assert!(lp.check_optimal(&sol) < REPORT_TOL);
    }
}
