//! Thin dense front-end over the `minilp` simplex solver.
//!
//! Every LP in the crate goes through [`LinearProgram`]: point feasibility,
//! the free-initial-state support program, support functions of H-polytopes,
//! Chebyshev centers and the scaling LPs. Solver panics are caught and
//! reported as [`LpOutcome::Failed`] so callers can apply their own
//! conservative fallback.

use std::panic::{catch_unwind, AssertUnwindSafe};

use minilp::{ComparisonOp, OptimizationDirection, Problem};

/// Coefficients with magnitude below this are dropped from rows.
const COEFF_EPS: f64 = 1e-14;

/// Tolerance for rows whose coefficients all vanish.
const CONST_ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// Solver status reported alongside certificates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    /// The solver claimed feasibility but the independent re-check rejected it.
    ValidationFailed,
    /// No LP was needed (trivially infeasible constant constraint).
    Trivial,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Solved { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    Failed(String),
}

impl LpOutcome {
    pub fn status(&self) -> LpStatus {
        match self {
            LpOutcome::Solved { .. } => LpStatus::Optimal,
            LpOutcome::Infeasible => LpStatus::Infeasible,
            LpOutcome::Unbounded => LpStatus::Unbounded,
            LpOutcome::Failed(_) => LpStatus::NumericalFailure,
        }
    }
}

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(usize, f64)>,
    cmp: Cmp,
    rhs: f64,
}

/// A linear program over `n` variables, free by default, with a zero objective.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    lower: Vec<f64>,
    upper: Vec<f64>,
    objective: Vec<f64>,
    maximize: bool,
    rows: Vec<Row>,
    trivially_infeasible: bool,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            objective: vec![0.0; n_vars],
            maximize: false,
            rows: Vec::new(),
            trivially_infeasible: false,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lower[var] = lo;
        self.upper[var] = hi;
        if lo > hi + CONST_ROW_TOL {
            self.trivially_infeasible = true;
        }
    }

    pub fn maximize(&mut self, coeffs: &[f64]) {
        self.objective.copy_from_slice(coeffs);
        self.maximize = true;
    }

    pub fn minimize(&mut self, coeffs: &[f64]) {
        self.objective.copy_from_slice(coeffs);
        self.maximize = false;
    }

    /// Adds `coeffs · x (cmp) rhs`; `coeffs` is dense over the first `coeffs.len()` variables
    /// starting at `offset`.
    pub fn add_row_at(&mut self, offset: usize, coeffs: &[f64], cmp: Cmp, rhs: f64) {
        let terms = coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > COEFF_EPS)
            .map(|(i, &c)| (offset + i, c))
            .collect();
        self.push(terms, cmp, rhs);
    }

    pub fn add_row(&mut self, coeffs: &[f64], cmp: Cmp, rhs: f64) {
        self.add_row_at(0, coeffs, cmp, rhs);
    }

    /// Adds a row given as (variable, coefficient) pairs; variables must be distinct.
    pub fn add_sparse_row(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        let terms = terms.into_iter().filter(|(_, c)| c.abs() > COEFF_EPS).collect();
        self.push(terms, cmp, rhs);
    }

    fn push(&mut self, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) {
        if terms.is_empty() {
            let ok = match cmp {
                Cmp::Le => rhs >= -CONST_ROW_TOL,
                Cmp::Ge => rhs <= CONST_ROW_TOL,
                Cmp::Eq => rhs.abs() <= CONST_ROW_TOL,
            };
            if !ok {
                self.trivially_infeasible = true;
            }
            return;
        }
        self.rows.push(Row { terms, cmp, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        if self.trivially_infeasible {
            return LpOutcome::Infeasible;
        }
        if self.rows.iter().any(|r| !r.rhs.is_finite())
            || self.objective.iter().any(|c| !c.is_finite())
        {
            return LpOutcome::Failed("non-finite problem data".into());
        }
        let direction = if self.maximize {
            OptimizationDirection::Maximize
        } else {
            OptimizationDirection::Minimize
        };
        let mut problem = Problem::new(direction);
        let vars: Vec<_> = (0..self.num_vars())
            .map(|i| problem.add_var(self.objective[i], (self.lower[i], self.upper[i])))
            .collect();
        for row in &self.rows {
            let op = match row.cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            let expr: Vec<_> = row.terms.iter().map(|&(i, c)| (vars[i], c)).collect();
            problem.add_constraint(expr.as_slice(), op, row.rhs);
        }

        match catch_unwind(AssertUnwindSafe(|| problem.solve())) {
            Ok(Ok(sol)) => {
                let x: Vec<f64> = vars.iter().map(|&v| *sol.var_value(v)).collect();
                if x.iter().any(|v| !v.is_finite()) {
                    // minilp can report an "optimal" point at infinity for free variables.
                    if sol.objective().is_infinite() || self.objective.iter().any(|c| *c != 0.0) {
                        return LpOutcome::Unbounded;
                    }
                    return LpOutcome::Failed("non-finite solution".into());
                }
                LpOutcome::Solved {
                    x,
                    objective: sol.objective(),
                }
            }
            Ok(Err(minilp::Error::Infeasible)) => LpOutcome::Infeasible,
            Ok(Err(minilp::Error::Unbounded)) => LpOutcome::Unbounded,
            Err(payload) => {
                let msg = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "solver panicked".into());
                LpOutcome::Failed(msg)
            }
        }
    }
}
