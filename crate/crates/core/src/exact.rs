//! Dense exact linear algebra over [`Rational`].
//!
//! Matrices are row-major `Vec<Vec<Rational>>`. All routines are
//! deterministic: pivots are chosen as the first nonzero entry in index order.

use num_traits::{One, Zero};

use crate::rational::Rational;

pub type Matrix = Vec<Vec<Rational>>;

/// Reduced row echelon form in place. Returns the pivot column of each
/// nonzero row; rows past `pivots.len()` are zero afterwards.
pub fn rref(m: &mut Matrix) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Rational::one() / &m[r][c];
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in c..cols {
                    let delta = &f * &m[r][j];
                    m[i][j] -= delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(m: &[Vec<Rational>]) -> usize {
    let mut work = m.to_vec();
    rref(&mut work).len()
}

/// Basis of `{x : m x = 0}` for a matrix with `cols` columns. One basis vector
/// per free column, in increasing column order, with a 1 in that column.
pub fn nullspace(m: &[Vec<Rational>], cols: usize) -> Vec<Vec<Rational>> {
    let mut work = m.to_vec();
    let pivots = rref(&mut work);
    let mut is_pivot = vec![false; cols];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    (0..cols)
        .filter(|&c| !is_pivot[c])
        .map(|free| {
            let mut v = vec![Rational::zero(); cols];
            v[free] = Rational::one();
            for (row, &p) in pivots.iter().enumerate() {
                v[p] = -work[row][free].clone();
            }
            v
        })
        .collect()
}

/// Solves `A x = b` when the solution exists and is unique.
pub fn solve_unique(a: &[Vec<Rational>], b: &[Rational]) -> Option<Vec<Rational>> {
    let cols = a.first().map_or(0, Vec::len);
    let mut aug: Matrix = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.last() == Some(&cols) {
        return None;
    }
    if pivots.len() != cols {
        return None;
    }
    Some((0..cols).map(|i| aug[i][cols].clone()).collect())
}

pub fn inverse(a: &[Vec<Rational>]) -> Option<Matrix> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return None;
    }
    let mut aug: Matrix = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Columns given as vectors, assembled into an `m × k` matrix.
pub fn from_columns(columns: &[&Vec<Rational>], m: usize) -> Matrix {
    (0..m)
        .map(|i| columns.iter().map(|c| c[i].clone()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<Rational>], cols: usize) -> Matrix {
    (0..cols)
        .map(|j| a.iter().map(|r| r[j].clone()).collect())
        .collect()
}

/// Largest absolute column sum, the operator norm induced by `‖·‖₁`.
pub fn column_l1_norm(a: &[Vec<Rational>]) -> Rational {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| {
            a.iter()
                .fold(Rational::zero(), |acc, r| acc + num_traits::Signed::abs(&r[j]))
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Greedy maximal independent subset of `vectors`, keeping input order.
pub fn independent_subset(vectors: &[Vec<Rational>]) -> Vec<usize> {
    let mut kept: Matrix = Vec::new();
    let mut idx = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        kept.push(v.clone());
        if rank(&kept) == kept.len() {
            idx.push(i);
        } else {
            kept.pop();
        }
    }
    idx
}
