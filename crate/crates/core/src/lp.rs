//! Exact linear programming.
//!
//! A dense two-phase tableau simplex with Bland's pivot rule. Every
//! quantity is an exact [`Scalar`], so optimal outcomes carry a dual vector
//! whose objective equals the primal objective with no gap at all.
//!
//! Dual values follow one convention for both senses: `dual[i]` is the
//! shadow price of row `i`, i.e. the rate of change of the optimal
//! objective with respect to that row's right-hand side.

use serde::Serialize;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `lower_bounds[j] == None` marks variable `j` as free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearProgram<T> {
    pub sense: Sense,
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub lower_bounds: Vec<Option<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpOutcome<T> {
    pub status: LpStatus,
    pub primal: Vec<T>,
    pub dual: Vec<T>,
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl<T: Scalar> LinearProgram<T> {
    /// A program over `objective.len()` nonnegative variables and no rows.
    pub fn new(sense: Sense, objective: Vec<T>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            constraints: Vec::new(),
            lower_bounds: vec![Some(T::zero()); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.lower_bounds[var] = None;
        self
    }

    pub fn set_lower_bound(&mut self, var: usize, bound: T) -> &mut Self {
        self.lower_bounds[var] = Some(bound);
        self
    }

    pub fn check_dimensions(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower_bounds.len() != n {
            return Err(LpError::DimensionMismatch(format!(
                "{} lower bounds for {n} variables",
                self.lower_bounds.len()
            )));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::DimensionMismatch(format!(
                    "row {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        dot(&self.objective, x)
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        if x.is_zero() || y.is_zero() {
            continue;
        }
        let mut t = x.clone();
        t *= y;
        acc += &t;
    }
    acc
}

/// How an original variable maps onto nonnegative tableau columns.
enum ColumnMap<T> {
    Shifted { col: usize, lower: T },
    Split { pos: usize, neg: usize },
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    reduced: Vec<T>,
    value: T,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v /= &p;
                }
            }
            self.rhs[r] /= &p;
        }
        let support: Vec<usize> = self.rows[r]
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(j, _)| j)
            .collect();
        let (pivot_row, pivot_rhs) = (self.rows[r].clone(), self.rhs[r].clone());
        let eliminate = |row: &mut Vec<T>, rhs: &mut T, factor: &T| {
            for &j in &support {
                let mut t = factor.clone();
                t *= &pivot_row[j];
                row[j] -= &t;
            }
            let mut t = factor.clone();
            t *= &pivot_rhs;
            *rhs -= &t;
        };
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let factor = self.rows[i][c].clone();
            let (row, rhs) = (&mut self.rows[i], &mut self.rhs[i]);
            eliminate(row, rhs, &factor);
        }
        let factor = self.reduced[c].clone();
        if !factor.is_zero() {
            let mut gain = factor.clone();
            gain *= &pivot_rhs;
            self.value += &gain;
            for &j in &support {
                let mut t = factor.clone();
                t *= &pivot_row[j];
                self.reduced[j] -= &t;
            }
        }
        self.basis[r] = c;
    }

    /// Recomputes reduced costs and objective value for cost vector `cost`.
    fn price(&mut self, cost: &[T]) {
        let mut reduced = cost.to_vec();
        let mut value = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &cost[b];
            if cb.is_zero() {
                continue;
            }
            for (j, a) in self.rows[i].iter().enumerate() {
                if !a.is_zero() {
                    let mut t = cb.clone();
                    t *= a;
                    reduced[j] -= &t;
                }
            }
            let mut t = cb.clone();
            t *= &self.rhs[i];
            value += &t;
        }
        self.reduced = reduced;
        self.value = value;
    }

    /// Maximizes the priced objective with Bland's rule over columns for
    /// which `allowed` holds. Returns false when unbounded.
    fn optimize(&mut self, allowed: impl Fn(usize) -> bool) -> bool {
        loop {
            let entering =
                (0..self.reduced.len()).find(|&j| allowed(j) && self.reduced[j].is_positive());
            let Some(c) = entering else { return true };
            let mut best: Option<(usize, T)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs[i].clone() / a.clone();
                let better = match &best {
                    None => true,
                    Some((bi, br)) => {
                        ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi])
                    }
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Solves `lp` exactly. Infeasible and unbounded programs are reported via
/// [`LpOutcome::status`]; identical inputs always give identical outputs.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpOutcome<T>, LpError> {
    lp.check_dimensions()?;
    let n = lp.num_vars();
    let m = lp.constraints.len();

    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    for bound in &lp.lower_bounds {
        match bound {
            Some(l) => {
                maps.push(ColumnMap::Shifted {
                    col: ncols,
                    lower: l.clone(),
                });
                ncols += 1;
            }
            None => {
                maps.push(ColumnMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
    }
    let structural = ncols;

    // Internal problem: maximize sense_sign * c . x over z >= 0.
    let sense_sign = match lp.sense {
        Sense::Maximize => T::one(),
        Sense::Minimize => -T::one(),
    };

    let mut rows: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut rhs: Vec<T> = Vec::with_capacity(m);
    let mut relations = Vec::with_capacity(m);
    let mut row_sign = Vec::with_capacity(m);
    for con in &lp.constraints {
        let mut row = vec![T::zero(); structural];
        let mut b = con.rhs.clone();
        for (j, a) in con.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            match &maps[j] {
                ColumnMap::Shifted { col, lower } => {
                    row[*col] = a.clone();
                    if !lower.is_zero() {
                        let mut t = a.clone();
                        t *= lower;
                        b -= &t;
                    }
                }
                ColumnMap::Split { pos, neg } => {
                    row[*pos] = a.clone();
                    row[*neg] = -a.clone();
                }
            }
        }
        let mut rel = con.relation;
        let mut sign = T::one();
        if b.is_negative() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
            b = -b;
            sign = -T::one();
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push(row);
        rhs.push(b);
        relations.push(rel);
        row_sign.push(sign);
    }

    // Auxiliary columns: slack for <=, surplus + artificial for >=,
    // artificial for =. `unit_col[i]` starts as the i-th unit vector.
    let mut unit_col = vec![0usize; m];
    let mut is_artificial = vec![false; structural];
    let mut extra: Vec<(usize, T)> = Vec::new();
    for (i, rel) in relations.iter().enumerate() {
        match rel {
            Relation::Le => {
                unit_col[i] = structural + extra.len();
                extra.push((i, T::one()));
                is_artificial.push(false);
            }
            Relation::Ge => {
                extra.push((i, -T::one()));
                is_artificial.push(false);
                unit_col[i] = structural + extra.len();
                extra.push((i, T::one()));
                is_artificial.push(true);
            }
            Relation::Eq => {
                unit_col[i] = structural + extra.len();
                extra.push((i, T::one()));
                is_artificial.push(true);
            }
        }
    }
    let total = structural + extra.len();
    for row in rows.iter_mut() {
        row.resize(total, T::zero());
    }
    for (k, (i, v)) in extra.into_iter().enumerate() {
        rows[i][structural + k] = v;
    }

    let mut tab = Tableau {
        rows,
        rhs,
        basis: unit_col.clone(),
        reduced: Vec::new(),
        value: T::zero(),
    };

    let phase1_cost: Vec<T> = (0..total)
        .map(|j| {
            if is_artificial[j] {
                -T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    if is_artificial.iter().any(|&a| a) {
        tab.price(&phase1_cost);
        tab.optimize(|_| true);
        if tab.value.is_negative() {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                dual: Vec::new(),
                objective: T::zero(),
            });
        }
        for r in 0..m {
            if !is_artificial[tab.basis[r]] {
                continue;
            }
            if let Some(c) = (0..total).find(|&j| !is_artificial[j] && !tab.rows[r][j].is_zero()) {
                tab.pivot(r, c);
            }
        }
    }

    let mut cost = vec![T::zero(); total];
    for (j, c) in lp.objective.iter().enumerate() {
        let c = c.clone() * sense_sign.clone();
        match &maps[j] {
            ColumnMap::Shifted { col, .. } => cost[*col] = c,
            ColumnMap::Split { pos, neg } => {
                cost[*neg] = -c.clone();
                cost[*pos] = c;
            }
        }
    }
    tab.price(&cost);
    if !tab.optimize(|j| !is_artificial[j]) {
        return Ok(LpOutcome {
            status: LpStatus::Unbounded,
            primal: Vec::new(),
            dual: Vec::new(),
            objective: T::zero(),
        });
    }

    let mut z = vec![T::zero(); total];
    for (i, &b) in tab.basis.iter().enumerate() {
        z[b] = tab.rhs[i].clone();
    }
    let primal: Vec<T> = maps
        .iter()
        .map(|map| match map {
            ColumnMap::Shifted { col, lower } => lower.clone() + z[*col].clone(),
            ColumnMap::Split { pos, neg } => z[*pos].clone() - z[*neg].clone(),
        })
        .collect();
    let dual: Vec<T> = (0..m)
        .map(|i| -tab.reduced[unit_col[i]].clone() * row_sign[i].clone() * sense_sign.clone())
        .collect();
    let objective = lp.objective_value(&primal);
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        primal,
        dual,
        objective,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LpViolation {
    NotOptimal,
    PrimalRow {
        row: usize,
        lhs: String,
        relation: Relation,
        rhs: String,
    },
    PrimalBound {
        var: usize,
        value: String,
        lower: String,
    },
    DualSign {
        row: usize,
        value: String,
    },
    ReducedCost {
        var: usize,
        value: String,
    },
    ObjectiveMismatch {
        primal: String,
        dual: String,
        reported: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LpCertificateReport {
    pub violations: Vec<LpViolation>,
}

impl LpCertificateReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Independently re-checks primal feasibility, dual feasibility and the
/// absence of a duality gap for an optimal outcome.
pub fn verify_lp_certificate<T: Scalar>(
    lp: &LinearProgram<T>,
    out: &LpOutcome<T>,
) -> Result<LpCertificateReport, LpError> {
    lp.check_dimensions()?;
    let mut violations = Vec::new();
    if out.status != LpStatus::Optimal {
        violations.push(LpViolation::NotOptimal);
        return Ok(LpCertificateReport { violations });
    }
    let (n, m) = (lp.num_vars(), lp.constraints.len());
    if out.primal.len() != n || out.dual.len() != m {
        return Err(LpError::DimensionMismatch(format!(
            "outcome has {} primal / {} dual entries for {n} variables / {m} rows",
            out.primal.len(),
            out.dual.len()
        )));
    }
    let x = &out.primal;
    let y = &out.dual;

    for (i, con) in lp.constraints.iter().enumerate() {
        let lhs = dot(&con.coeffs, x);
        let ok = match con.relation {
            Relation::Le => lhs <= con.rhs,
            Relation::Eq => lhs == con.rhs,
            Relation::Ge => lhs >= con.rhs,
        };
        if !ok {
            violations.push(LpViolation::PrimalRow {
                row: i,
                lhs: lhs.to_string(),
                relation: con.relation,
                rhs: con.rhs.to_string(),
            });
        }
    }
    for (j, bound) in lp.lower_bounds.iter().enumerate() {
        if let Some(l) = bound {
            if x[j] < *l {
                violations.push(LpViolation::PrimalBound {
                    var: j,
                    value: x[j].to_string(),
                    lower: l.to_string(),
                });
            }
        }
    }

    let maximize = lp.sense == Sense::Maximize;
    for (i, con) in lp.constraints.iter().enumerate() {
        // Shadow prices: >= rows push a minimum up, <= rows push a maximum up.
        let ok = match (con.relation, maximize) {
            (Relation::Eq, _) => true,
            (Relation::Ge, false) | (Relation::Le, true) => !y[i].is_negative(),
            (Relation::Le, false) | (Relation::Ge, true) => !y[i].is_positive(),
        };
        if !ok {
            violations.push(LpViolation::DualSign {
                row: i,
                value: y[i].to_string(),
            });
        }
    }

    let mut dual_objective = dot(
        y,
        &lp.constraints
            .iter()
            .map(|c| c.rhs.clone())
            .collect::<Vec<_>>(),
    );
    for j in 0..n {
        let mut r = lp.objective[j].clone();
        for (i, con) in lp.constraints.iter().enumerate() {
            if !con.coeffs[j].is_zero() && !y[i].is_zero() {
                let mut t = y[i].clone();
                t *= &con.coeffs[j];
                r -= &t;
            }
        }
        let ok = match &lp.lower_bounds[j] {
            None => r.is_zero(),
            Some(_) if maximize => !r.is_positive(),
            Some(_) => !r.is_negative(),
        };
        if !ok {
            violations.push(LpViolation::ReducedCost {
                var: j,
                value: r.to_string(),
            });
        }
        if let Some(l) = &lp.lower_bounds[j] {
            let mut t = r;
            t *= l;
            dual_objective += &t;
        }
    }

    let primal_objective = lp.objective_value(x);
    if primal_objective != dual_objective || primal_objective != out.objective {
        violations.push(LpViolation::ObjectiveMismatch {
            primal: primal_objective.to_string(),
            dual: dual_objective.to_string(),
            reported: out.objective.to_string(),
        });
    }
    Ok(LpCertificateReport { violations })
}
