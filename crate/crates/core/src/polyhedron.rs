//! Minimal points of standard-form polyhedra `P = {x ≥ 0 : Σ xᵢCᵢ = b}`.
//!
//! A point is minimal when no other point of `P` lies coordinatewise below
//! it; equivalently its active columns are positively independent. Every
//! point dominates a minimal one, minimal points are convex combinations of
//! vertices, and their norms are bounded by a constant depending only on the
//! columns. Everything here is exact.

use num_traits::{One, Signed, Zero};
use serde::Deserialize;
use serde_json::value::RawValue;
use thiserror::Error;

use crate::distribution::{parse_json_scalar, FileError};
use crate::exact::{self, Matrix};
use crate::lp::{self, LinearProgram, LpOutcome, Sense};
use crate::rational::{self, Rational};

/// Column count above which the subset enumerations refuse to run.
pub const MAX_COLUMNS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyhedronError {
    #[error("point is not in the polyhedron")]
    NotInP,
    #[error("point is not in the extended polyhedron")]
    NotInEP,
    #[error("point is not minimal")]
    NotMinimal,
    #[error("{n} columns exceed the enumeration cap of {MAX_COLUMNS}")]
    TooLarge { n: usize },
    #[error("inconsistent dimensions: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardPolyhedron {
    columns: Vec<Vec<Rational>>,
    b: Vec<Rational>,
}

impl StandardPolyhedron {
    pub fn new(columns: Vec<Vec<Rational>>, b: Vec<Rational>) -> Result<Self, PolyhedronError> {
        let m = b.len();
        if m == 0 || columns.is_empty() {
            return Err(PolyhedronError::Shape("need at least one row and one column".into()));
        }
        if let Some(i) = columns.iter().position(|c| c.len() != m) {
            return Err(PolyhedronError::Shape(format!("column {} has length {}, expected {m}", i + 1, columns[i].len())));
        }
        Ok(StandardPolyhedron { columns, b })
    }

    pub fn from_integers(columns: &[&[i64]], b: &[i64]) -> Result<Self, PolyhedronError> {
        let cols = columns.iter().map(|c| c.iter().map(|&x| rational::int(x)).collect()).collect();
        Self::new(cols, b.iter().map(|&x| rational::int(x)).collect())
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<Rational>] {
        &self.columns
    }

    pub fn b(&self) -> &[Rational] {
        &self.b
    }

    /// `Σ xᵢCᵢ`.
    pub fn apply(&self, x: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.rows()];
        for (c, xi) in self.columns.iter().zip(x) {
            if xi.is_zero() {
                continue;
            }
            for (o, ci) in out.iter_mut().zip(c) {
                *o += ci * xi;
            }
        }
        out
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.cols() && x.iter().all(|v| !v.is_negative()) && self.apply(x) == self.b
    }

    fn require(&self, x: &[Rational]) -> Result<(), PolyhedronError> {
        if x.len() != self.cols() {
            return Err(PolyhedronError::Shape(format!("point has {} coordinates, expected {}", x.len(), self.cols())));
        }
        if self.contains(x) {
            Ok(())
        } else {
            Err(PolyhedronError::NotInP)
        }
    }

    fn submatrix(&self, idx: &[usize]) -> Matrix {
        let cols: Vec<&Vec<Rational>> = idx.iter().map(|&i| &self.columns[i]).collect();
        exact::from_columns(&cols, self.rows())
    }
}

/// `P = {x ≥ 0 : L x = b, ⟨φ, x⟩ ≥ c}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPolyhedron {
    /// Row-major.
    pub l: Matrix,
    pub phi: Vec<Rational>,
    pub b: Vec<Rational>,
    pub c: Rational,
}

impl ExtendedPolyhedron {
    pub fn new(l: Matrix, phi: Vec<Rational>, b: Vec<Rational>, c: Rational) -> Result<Self, PolyhedronError> {
        let n = phi.len();
        if n == 0 || l.is_empty() {
            return Err(PolyhedronError::Shape("empty linear map".into()));
        }
        if l.len() != b.len() || l.iter().any(|r| r.len() != n) {
            return Err(PolyhedronError::Shape("L, phi and b disagree in size".into()));
        }
        Ok(ExtendedPolyhedron { l, phi, b, c })
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.phi.len()
            && x.iter().all(|v| !v.is_negative())
            && self.l.iter().zip(&self.b).all(|(row, bi)| &rational::dot(row, x) == bi)
            && rational::dot(&self.phi, x) >= self.c
    }

    /// Standard form in one more variable, `x_{n+1} = ⟨φ, x⟩ − c ≥ 0`.
    pub fn lift(&self) -> StandardPolyhedron {
        let n = self.phi.len();
        let mut columns: Vec<Vec<Rational>> = (0..n)
            .map(|j| {
                let mut col: Vec<Rational> = self.l.iter().map(|r| r[j].clone()).collect();
                col.push(self.phi[j].clone());
                col
            })
            .collect();
        let mut ghost = vec![Rational::zero(); self.b.len()];
        ghost.push(-Rational::one());
        columns.push(ghost);
        let mut b = self.b.clone();
        b.push(self.c.clone());
        StandardPolyhedron { columns, b }
    }

    pub fn lift_point(&self, x: &[Rational]) -> Vec<Rational> {
        let mut out = x.to_vec();
        out.push(rational::dot(&self.phi, x) - &self.c);
        out
    }
}

/// Indices with `xᵢ > 0`.
pub fn active_set(p: &StandardPolyhedron, x: &[Rational]) -> Result<Vec<usize>, PolyhedronError> {
    p.require(x)?;
    Ok(support(x))
}

fn support(x: &[Rational]) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i].is_positive()).collect()
}

pub fn is_vertex(p: &StandardPolyhedron, x: &[Rational]) -> Result<bool, PolyhedronError> {
    let active = active_set(p, x)?;
    Ok(exact::rank(&p.submatrix(&active)) == active.len())
}

/// A probability vector `u` on the active set with `Σ uᵢCᵢ = 0`, if any.
fn cancellation(p: &StandardPolyhedron, active: &[usize]) -> Option<Vec<Rational>> {
    if active.is_empty() {
        return None;
    }
    let k = active.len();
    let mut prog = LinearProgram::feasibility(k);
    for r in 0..p.rows() {
        prog.push(active.iter().map(|&i| p.columns[i][r].clone()).collect(), Sense::Eq, Rational::zero());
    }
    prog.push(vec![Rational::one(); k], Sense::Eq, Rational::one());
    match lp::solve(&prog).expect("well-formed program") {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

pub fn is_minimal(p: &StandardPolyhedron, x: &[Rational]) -> Result<bool, PolyhedronError> {
    let active = active_set(p, x)?;
    Ok(cancellation(p, &active).is_none())
}

/// Minimal point below `x` together with the number of cancellation steps.
pub fn reduce_to_minimal_counted(p: &StandardPolyhedron, x: &[Rational]) -> Result<(Vec<Rational>, usize), PolyhedronError> {
    p.require(x)?;
    let mut y = x.to_vec();
    let mut steps = 0;
    loop {
        let active = support(&y);
        let Some(u) = cancellation(p, &active) else {
            return Ok((y, steps));
        };
        let t0 = active
            .iter()
            .zip(&u)
            .filter(|(_, ui)| ui.is_positive())
            .map(|(&i, ui)| &y[i] / ui)
            .min()
            .expect("u sums to one");
        for (&i, ui) in active.iter().zip(&u) {
            y[i] -= &t0 * ui;
        }
        steps += 1;
    }
}

pub fn reduce_to_minimal(p: &StandardPolyhedron, x: &[Rational]) -> Result<Vec<Rational>, PolyhedronError> {
    reduce_to_minimal_counted(p, x).map(|(y, _)| y)
}

/// Writes `y` as a convex combination of vertices. Duplicate vertices are
/// merged; the list is sorted by vertex.
pub fn decompose_minimal(p: &StandardPolyhedron, y: &[Rational]) -> Result<Vec<(Vec<Rational>, Rational)>, PolyhedronError> {
    if !is_minimal(p, y)? {
        return Err(PolyhedronError::NotMinimal);
    }
    let mut acc: Vec<(Vec<Rational>, Rational)> = Vec::new();
    split(p, y.to_vec(), Rational::one(), &mut acc)?;
    acc.sort_by(|a, b| a.0.cmp(&b.0));
    let mut merged: Vec<(Vec<Rational>, Rational)> = Vec::new();
    for (v, w) in acc {
        match merged.last_mut() {
            Some((last, lw)) if *last == v => *lw += w,
            _ => merged.push((v, w)),
        }
    }
    Ok(merged)
}

fn split(p: &StandardPolyhedron, x: Vec<Rational>, weight: Rational, acc: &mut Vec<(Vec<Rational>, Rational)>) -> Result<(), PolyhedronError> {
    let active = support(&x);
    let kernel = exact::nullspace(&p.submatrix(&active), active.len());
    let Some(u) = kernel.into_iter().next() else {
        acc.push((x, weight));
        return Ok(());
    };
    // A dependence among positively independent columns has both signs.
    if !u.iter().any(|v| v.is_negative()) || !u.iter().any(|v| v.is_positive()) {
        return Err(PolyhedronError::NotMinimal);
    }
    let ratios = |positive: bool| {
        active
            .iter()
            .zip(&u)
            .filter(|(_, ui)| if positive { ui.is_positive() } else { ui.is_negative() })
            .map(|(&i, ui)| (&x[i] / ui).abs())
            .min()
            .expect("both signs present")
    };
    let t_plus = ratios(false);
    let t_minus = ratios(true);
    let mut x_plus = x.clone();
    let mut x_minus = x;
    for (&i, ui) in active.iter().zip(&u) {
        x_plus[i] += &t_plus * ui;
        x_minus[i] -= &t_minus * ui;
    }
    let total = &t_plus + &t_minus;
    let w_plus = &weight * &t_minus / &total;
    let w_minus = &weight * &t_plus / &total;
    split(p, x_plus, w_plus, acc)?;
    split(p, x_minus, w_minus, acc)
}

fn subsets(n: usize) -> Result<impl Iterator<Item = Vec<usize>>, PolyhedronError> {
    if n > MAX_COLUMNS {
        return Err(PolyhedronError::TooLarge { n });
    }
    Ok((1u32..(1u32 << n)).map(move |mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect()))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `‖C_I⁻¹‖₁` for a full-column-rank `C_I`: the smallest maximum column norm
/// among the left inverses obtained from invertible square row blocks.
fn left_inverse_norm(c: &Matrix, k: usize) -> Option<Rational> {
    combinations(c.len(), k)
        .into_iter()
        .filter_map(|rows| {
            let block: Matrix = rows.iter().map(|&r| c[r].clone()).collect();
            exact::inverse(&block).map(|inv| exact::column_l1_norm(&inv))
        })
        .min()
}

/// Constant `M` with `‖y‖₁ ≤ M‖b‖₁` for every minimal point `y`.
pub fn bound_m(p: &StandardPolyhedron) -> Result<Rational, PolyhedronError> {
    let mut best = Rational::zero();
    for idx in subsets(p.cols())? {
        let c = p.submatrix(&idx);
        if exact::rank(&c) != idx.len() {
            continue;
        }
        if let Some(norm) = left_inverse_norm(&c, idx.len()) {
            if norm > best {
                best = norm;
            }
        }
    }
    Ok(best)
}

/// All vertices, one per independent column subset whose solution is
/// strictly positive; the origin comes first when `b = 0`.
pub fn enumerate_vertices(p: &StandardPolyhedron) -> Result<Vec<Vec<Rational>>, PolyhedronError> {
    let n = p.cols();
    let mut out = Vec::new();
    if p.b.iter().all(Zero::is_zero) {
        out.push(vec![Rational::zero(); n]);
    }
    for idx in subsets(n)? {
        let c = p.submatrix(&idx);
        let Some(sol) = exact::solve_unique(&c, &p.b) else {
            continue;
        };
        if sol.iter().all(Signed::is_positive) {
            let mut v = vec![Rational::zero(); n];
            for (&i, s) in idx.iter().zip(sol) {
                v[i] = s;
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Minimal point below `x` in the extended polyhedron, computed in the
/// standard-form lift and projected back.
pub fn extended_reduce(ep: &ExtendedPolyhedron, x: &[Rational]) -> Result<Vec<Rational>, PolyhedronError> {
    if !ep.contains(x) {
        return Err(PolyhedronError::NotInEP);
    }
    let lifted = ep.lift();
    let mut y = reduce_to_minimal(&lifted, &ep.lift_point(x))?;
    y.pop();
    Ok(y)
}

// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct RawPolyhedron {
    columns: Vec<Vec<Box<RawValue>>>,
    b: Vec<Box<RawValue>>,
}

#[derive(Deserialize)]
struct RawExtended {
    #[serde(rename = "L")]
    l: Vec<Vec<Box<RawValue>>>,
    phi: Vec<Box<RawValue>>,
    b: Vec<Box<RawValue>>,
    c: Box<RawValue>,
}

#[derive(Debug, Error)]
pub enum PolyhedronFileError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Shape(#[from] PolyhedronError),
}

fn scalars(raw: &[Box<RawValue>]) -> Result<Vec<Rational>, FileError> {
    raw.iter().map(|x| parse_json_scalar(x)).collect()
}

/// `{"columns": [[..], ..], "b": [..]}`.
pub fn polyhedron_from_json(json: &str) -> Result<StandardPolyhedron, PolyhedronFileError> {
    let raw: RawPolyhedron = serde_json::from_str(json)?;
    let columns = raw.columns.iter().map(|c| scalars(c)).collect::<Result<Vec<_>, _>>()?;
    Ok(StandardPolyhedron::new(columns, scalars(&raw.b)?)?)
}

/// `{"L": [[..], ..], "phi": [..], "b": [..], "c": ..}` with `L` row-major.
pub fn extended_from_json(json: &str) -> Result<ExtendedPolyhedron, PolyhedronFileError> {
    let raw: RawExtended = serde_json::from_str(json)?;
    let l = raw.l.iter().map(|r| scalars(r)).collect::<Result<Vec<_>, _>>()?;
    Ok(ExtendedPolyhedron::new(l, scalars(&raw.phi)?, scalars(&raw.b)?, parse_json_scalar(&raw.c)?)?)
}
