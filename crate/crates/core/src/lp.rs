//! Exact two-phase primal simplex over rationals with Bland's rule.
//!
//! The solver is tableau based and dense. It serves the small feasibility
//! systems of the reduction procedure and the polyhedron routines, where
//! every answer must be exact.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

/// `maximize objective·x` subject to `rows[i]·x (sense) rhs[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<Rational>,
    pub rows: Vec<Vec<Rational>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<Rational>,
    pub bounds: Vec<VarBound>,
}

impl LinearProgram {
    /// A program over `n` nonnegative variables with zero objective.
    pub fn feasibility(n: usize) -> Self {
        LinearProgram {
            objective: vec![Rational::zero(); n],
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![VarBound::NonNegative; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, row: Vec<Rational>, sense: Sense, rhs: Rational) {
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    pub fn with_objective(mut self, objective: Vec<Rational>) -> Self {
        self.objective = objective;
        self
    }

    /// True when `x` satisfies every row and bound exactly.
    pub fn is_feasible(&self, x: &[Rational]) -> bool {
        if x.len() != self.num_vars() {
            return false;
        }
        let bounds_ok = x
            .iter()
            .zip(&self.bounds)
            .all(|(xi, b)| *b == VarBound::Free || !xi.is_negative());
        bounds_ok
            && self.rows.iter().zip(&self.senses).zip(&self.rhs).all(|((row, s), r)| {
                let lhs = crate::rational::dot(row, x);
                match s {
                    Sense::Le => lhs <= *r,
                    Sense::Eq => lhs == *r,
                    Sense::Ge => lhs >= *r,
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[Rational]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("LP has no variables")]
    NoVariables,
    #[error("row {row} has {found} coefficients, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("{rows} rows but {senses} senses and {rhs} right-hand sides")]
    RowCountMismatch { rows: usize, senses: usize, rhs: usize },
}

struct Tableau {
    /// `rows × (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = Rational::one() / &self.t[r][c];
        for x in self.t[r].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *x -= &f * p;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost·x` over columns flagged in `allowed`. Returns false
    /// when the objective is unbounded below.
    fn minimize(&mut self, cost: &[Rational], allowed: &[bool]) -> bool {
        loop {
            // reduced costs r_j = c_j − Σ_i c_{B_i} t_ij
            let entering = (0..self.cols).filter(|&j| allowed[j]).find(|&j| {
                let mut r = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.t[i][j].is_zero() {
                        r -= &cost[b] * &self.t[i][j];
                    }
                }
                r.is_negative()
            });
            let Some(c) = entering else {
                return true;
            };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.t.len() {
                if self.t[i][c].is_positive() {
                    let ratio = &self.t[i][self.cols] / &self.t[i][c];
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    let n = lp.num_vars();
    if n == 0 {
        return Err(LpError::NoVariables);
    }
    if lp.bounds.len() != n {
        return Err(LpError::DimensionMismatch {
            row: usize::MAX,
            expected: n,
            found: lp.bounds.len(),
        });
    }
    if lp.senses.len() != lp.rows.len() || lp.rhs.len() != lp.rows.len() {
        return Err(LpError::RowCountMismatch {
            rows: lp.rows.len(),
            senses: lp.senses.len(),
            rhs: lp.rhs.len(),
        });
    }
    for (i, row) in lp.rows.iter().enumerate() {
        if row.len() != n {
            return Err(LpError::DimensionMismatch {
                row: i,
                expected: n,
                found: row.len(),
            });
        }
    }

    // Structural columns: one per nonnegative variable, two per free one.
    let mut structural: Vec<(usize, bool)> = Vec::new();
    for (j, b) in lp.bounds.iter().enumerate() {
        structural.push((j, true));
        if *b == VarBound::Free {
            structural.push((j, false));
        }
    }
    let ns = structural.len();
    let m = lp.rows.len();

    // Normalize rhs ≥ 0, then count slack and artificial columns.
    let mut rows: Vec<(Vec<Rational>, Sense, Rational)> = Vec::with_capacity(m);
    for ((row, &sense), rhs) in lp.rows.iter().zip(&lp.senses).zip(&lp.rhs) {
        let mut coeffs: Vec<Rational> = structural
            .iter()
            .map(|&(j, pos)| if pos { row[j].clone() } else { -row[j].clone() })
            .collect();
        let (mut sense, mut rhs) = (sense, rhs.clone());
        if rhs.is_negative() {
            for c in coeffs.iter_mut() {
                *c = -c.clone();
            }
            rhs = -rhs;
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        rows.push((coeffs, sense, rhs));
    }
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = ns + n_slack + n_art;
    let art_start = ns + n_slack;

    let mut t = vec![vec![Rational::zero(); cols + 1]; m];
    let mut basis = vec![0; m];
    let (mut next_slack, mut next_art) = (ns, art_start);
    for (i, (coeffs, sense, rhs)) in rows.into_iter().enumerate() {
        t[i][..ns].clone_from_slice(&coeffs);
        t[i][cols] = rhs;
        match sense {
            Sense::Le => {
                t[i][next_slack] = Rational::one();
                basis[i] = next_slack;
                next_slack += 1;
            }
            Sense::Ge => {
                t[i][next_slack] = -Rational::one();
                next_slack += 1;
                t[i][next_art] = Rational::one();
                basis[i] = next_art;
                next_art += 1;
            }
            Sense::Eq => {
                t[i][next_art] = Rational::one();
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, cols };

    // Phase one: minimize the sum of artificials.
    if n_art > 0 {
        let cost: Vec<Rational> = (0..cols)
            .map(|j| if j >= art_start { Rational::one() } else { Rational::zero() })
            .collect();
        let allowed = vec![true; cols];
        tab.minimize(&cost, &allowed);
        let infeasibility = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .fold(Rational::zero(), |acc, (i, _)| acc + &tab.t[i][cols]);
        if infeasibility.is_positive() {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.t.len() {
            if tab.basis[i] >= art_start {
                match (0..art_start).find(|&j| !tab.t[i][j].is_zero()) {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.t.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    // Phase two over structural and slack columns.
    let mut cost = vec![Rational::zero(); cols];
    for (k, &(j, pos)) in structural.iter().enumerate() {
        cost[k] = if pos { -lp.objective[j].clone() } else { lp.objective[j].clone() };
    }
    let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
    if !tab.minimize(&cost, &allowed) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut values = vec![Rational::zero(); cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        values[b] = tab.t[i][cols].clone();
    }
    let mut x = vec![Rational::zero(); n];
    for (k, &(j, pos)) in structural.iter().enumerate() {
        if pos {
            x[j] += &values[k];
        } else {
            x[j] -= &values[k];
        }
    }
    let value = crate::rational::dot(&lp.objective, &x);
    debug_assert!(lp.is_feasible(&x));
    Ok(LpOutcome::Optimal { x, value })
}
