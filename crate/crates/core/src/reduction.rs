//! Reduced support of a badly oriented increment law.
//!
//! A direction `u` in the orthant is admissible for the current subspace `W`
//! when every atom of μ lying in `W` satisfies `⟨u, y⟩ ≤ 0` and `u` is
//! independent of the directions already chosen. Stacking admissible
//! directions until none is left gives a maximal tuple `(u₁..u_r)`; its
//! orthogonal complement `V` is the reduced support. The walk is well
//! oriented exactly when the tuple is empty.

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::distribution::{FiniteDistribution, Subspace};
use crate::lp::{self, LinearProgram, LpOutcome, Sense};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReductionError {
    #[error("point is not in the reduced support V")]
    NotInV,
    #[error("point is not in the orthant")]
    NotInOrthant,
    #[error("point has {found} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedSupport {
    /// Maximal admissible tuple, each vector normalized to coordinate sum 1.
    pub tuple: Vec<Vec<Rational>>,
    /// `V = [u₁..u_r]⊥`.
    pub v: Subspace,
    /// Indices `i` (0-based) with `eᵢ ∈ V`.
    pub i_set: Vec<usize>,
    /// Indices `i` (0-based) with `eᵢ ∈ V⊥`.
    pub i_perp: Vec<usize>,
    pub well_oriented: bool,
}

fn orthant_simplex_lp(dist: &FiniteDistribution, w: &Subspace) -> LinearProgram {
    let d = dist.dimension();
    let mut prog = LinearProgram::feasibility(d);
    prog.push(vec![rational::int(1); d], Sense::Eq, rational::int(1));
    for atom in dist.atoms().iter().filter(|a| w.contains(&a.point)) {
        prog.push(atom.point.clone(), Sense::Le, Rational::zero());
    }
    prog
}

/// Finds `u ≥ 0`, `Σuᵢ = 1`, with `⟨u, y⟩ ≤ 0` for every atom `y ∈ W` and
/// `u ∉ span_so_far`; `None` certifies that no such direction exists.
pub fn find_admissible_direction(
    dist: &FiniteDistribution,
    w: &Subspace,
    span_so_far: &Subspace,
) -> Option<Vec<Rational>> {
    let order: Vec<usize> = (0..span_so_far.complement_basis().len()).collect();
    find_admissible_direction_ordered(dist, w, span_so_far, &order)
}

/// As [`find_admissible_direction`], probing the complement basis of
/// `span_so_far` in the given order (maximize, then minimize, each vector).
pub fn find_admissible_direction_ordered(
    dist: &FiniteDistribution,
    w: &Subspace,
    span_so_far: &Subspace,
    complement_order: &[usize],
) -> Option<Vec<Rational>> {
    let base = orthant_simplex_lp(dist, w);
    let first = match lp::solve(&base).expect("well-formed LP") {
        LpOutcome::Optimal { x, .. } => x,
        _ => return None,
    };
    if !span_so_far.contains(&first) {
        return Some(first);
    }
    let complement = span_so_far.complement_basis();
    for &k in complement_order {
        let c = &complement[k];
        for sign in [1i64, -1] {
            let objective = c.iter().map(|x| x * rational::int(sign)).collect();
            let prog = base.clone().with_objective(objective);
            if let LpOutcome::Optimal { x, value } = lp::solve(&prog).expect("well-formed LP") {
                if value.is_positive() {
                    debug_assert!(!span_so_far.contains(&x));
                    return Some(x);
                }
            }
        }
    }
    None
}

/// Builds a maximal admissible tuple with the default probe order.
pub fn build_reduced_support(dist: &FiniteDistribution) -> ReducedSupport {
    build_reduced_support_with(dist, |k| (0..k).collect())
}

/// `order(k)` supplies the probe permutation for a complement basis of size `k`.
pub fn build_reduced_support_with<F>(dist: &FiniteDistribution, mut order: F) -> ReducedSupport
where
    F: FnMut(usize) -> Vec<usize>,
{
    let d = dist.dimension();
    let mut tuple: Vec<Vec<Rational>> = Vec::new();
    let mut span = Subspace::zero(d);
    loop {
        let w = span.orthogonal_complement();
        let perm = order(span.complement_basis().len());
        match find_admissible_direction_ordered(dist, &w, &span, &perm) {
            Some(u) => {
                tuple.push(u);
                span = Subspace::new(d, tuple.clone()).expect("admissible directions are independent");
            }
            None => break,
        }
    }
    let v = span.orthogonal_complement();
    let i_set = (0..d).filter(|&i| v.contains_unit(i)).collect();
    let i_perp = (0..d).filter(|&i| span.contains_unit(i)).collect();
    ReducedSupport {
        well_oriented: tuple.is_empty(),
        tuple,
        v,
        i_set,
        i_perp,
    }
}

/// Exact check of the admissibility conditions: independence, membership in
/// the orthant, and `⟨u_k, y⟩ ≤ 0` for every atom in `u₁⊥ ∩ … ∩ u_{k−1}⊥`.
pub fn is_admissible(dist: &FiniteDistribution, tuple: &[Vec<Rational>]) -> bool {
    let d = dist.dimension();
    if tuple.iter().any(|u| u.len() != d || u.iter().any(Signed::is_negative)) {
        return false;
    }
    if crate::exact::rank(tuple) != tuple.len() {
        return false;
    }
    (0..tuple.len()).all(|k| {
        let w = Subspace::span(d, &tuple[..k]).orthogonal_complement();
        dist.atoms()
            .iter()
            .filter(|a| w.contains(&a.point))
            .all(|a| !rational::dot(&tuple[k], &a.point).is_positive())
    })
}

impl ReducedSupport {
    pub fn dimension(&self) -> usize {
        self.v.ambient_dimension()
    }

    pub fn v_perp(&self) -> Subspace {
        self.v.orthogonal_complement()
    }

    /// `V₂`: the part of `V` orthogonal to every `eᵢ`, `i ∈ I`.
    pub fn v2(&self) -> Subspace {
        let d = self.dimension();
        let others: Vec<Vec<Rational>> = (0..d)
            .filter(|i| !self.i_set.contains(i))
            .map(|i| rational::unit(d, i))
            .collect();
        self.v.intersect(&Subspace::span(d, &others))
    }

    /// Membership in `V⁺ = {x ∈ V : xᵢ ≥ 0 for i ∈ I}`.
    pub fn v_plus_contains(&self, x: &[Rational]) -> Result<bool, ReductionError> {
        if x.len() != self.dimension() {
            return Err(ReductionError::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        if !self.v.contains(x) {
            return Err(ReductionError::NotInV);
        }
        Ok(self.i_set.iter().all(|&i| !x[i].is_negative()))
    }

    /// Depth `d(x) = min xᵢ` over indices outside `I ∪ I⊥`; infinite when
    /// there are none.
    pub fn depth(&self, x: &[f64]) -> Result<f64, ReductionError> {
        if x.len() != self.dimension() {
            return Err(ReductionError::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        if x.iter().any(|&xi| !(xi >= 0.0)) {
            return Err(ReductionError::NotInOrthant);
        }
        Ok((0..x.len())
            .filter(|i| !self.i_set.contains(i) && !self.i_perp.contains(i))
            .map(|i| x[i])
            .fold(f64::INFINITY, f64::min))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn example1() -> FiniteDistribution {
        FiniteDistribution::from_integer_atoms(&[&[1, -1], &[-1, 1], &[-1, -1]], &[(1, 4), (1, 4), (1, 2)]).unwrap()
    }
    fn example2() -> FiniteDistribution {
        FiniteDistribution::from_integer_atoms(&[&[-1, 0], &[0, 1], &[0, -1]], &[(1, 5), (3, 10), (1, 2)]).unwrap()
    }
    fn example3() -> FiniteDistribution {
        FiniteDistribution::from_integer_atoms(&[&[-1, -1], &[-1, 1], &[1, -1]], &[(1, 3), (1, 3), (1, 3)]).unwrap()
    }
    fn simple_walk() -> FiniteDistribution {
        FiniteDistribution::from_integer_atoms(&[&[1, 0], &[-1, 0], &[0, 1], &[0, -1]], &[(1, 4); 4]).unwrap()
    }

    #[test]
    fn first_direction_examples() {
        let full = Subspace::full(2);
        let none = Subspace::zero(2);
        assert_eq!(
            find_admissible_direction(&example1(), &full, &none),
            Some(vec![ratio(1, 2), ratio(1, 2)])
        );
        assert_eq!(
            find_admissible_direction(&example2(), &full, &none),
            Some(vec![int(1), int(0)])
        );
        let e1 = Subspace::new(2, vec![vec![int(1), int(0)]]).unwrap();
        assert_eq!(
            find_admissible_direction(&example2(), &e1.orthogonal_complement(), &e1),
            None
        );
    }

    #[test]
    fn reduced_supports_of_examples() {
        let rs = build_reduced_support(&simple_walk());
        assert!(rs.well_oriented);
        assert_eq!(rs.v.dim(), 2);
        assert_eq!(rs.i_set, vec![0, 1]);
        assert!(rs.i_perp.is_empty());

        let rs = build_reduced_support(&example2());
        assert!(!rs.well_oriented);
        assert!(rs.v.same_span(&Subspace::new(2, vec![vec![int(0), int(1)]]).unwrap()));
        assert_eq!(rs.i_set, vec![1]);
        assert_eq!(rs.i_perp, vec![0]);

        let rs = build_reduced_support(&example3());
        assert!(rs.v.same_span(&Subspace::new(2, vec![vec![int(1), int(-1)]]).unwrap()));
        assert!(rs.i_set.is_empty() && rs.i_perp.is_empty());

        let rs = build_reduced_support(&example1());
        assert_eq!(rs.tuple, vec![vec![ratio(1, 2), ratio(1, 2)]]);
        assert!(rs.i_set.is_empty() && rs.i_perp.is_empty());
    }

    #[test]
    fn tuples_are_admissible_and_maximal() {
        for dist in [example1(), example2(), example3(), simple_walk()] {
            let rs = build_reduced_support(&dist);
            assert!(is_admissible(&dist, &rs.tuple));
            for u in &rs.tuple {
                let s: Rational = u.iter().sum();
                assert_eq!(s, int(1));
            }
            let span = rs.v_perp();
            assert_eq!(find_admissible_direction(&dist, &rs.v, &span), None);
            assert_eq!(rs.v.dim(), dist.dimension() - rs.tuple.len());
        }
    }

    #[test]
    fn v_plus_membership() {
        let rs = build_reduced_support(&example2());
        assert_eq!(rs.v_plus_contains(&[int(0), int(5)]), Ok(true));
        assert_eq!(rs.v_plus_contains(&[int(0), int(-1)]), Ok(false));
        assert_eq!(rs.v_plus_contains(&[int(1), int(1)]), Err(ReductionError::NotInV));

        let rs = build_reduced_support(&example3());
        assert_eq!(rs.v_plus_contains(&[int(-4), int(4)]), Ok(true));
        assert_eq!(rs.v_plus_contains(&[int(3), int(-3)]), Ok(true));

        let rs = build_reduced_support(&simple_walk());
        assert_eq!(rs.v_plus_contains(&[int(1), int(0)]), Ok(true));
        assert_eq!(rs.v_plus_contains(&[int(1), int(-1)]), Ok(false));
    }

    #[test]
    fn depth_function() {
        assert_eq!(build_reduced_support(&example3()).depth(&[3.0, 7.0]), Ok(3.0));
        assert_eq!(build_reduced_support(&example2()).depth(&[4.0, 9.0]), Ok(f64::INFINITY));
        let rs = build_reduced_support(&example1());
        assert_eq!(rs.depth(&[5.0, 2.0]), Ok(2.0));
        assert_eq!(rs.depth(&[-1.0, 2.0]), Err(ReductionError::NotInOrthant));
    }

    #[test]
    fn two_step_tuple() {
        // e1 first (all atoms have y1 ≤ 0), then e2 inside e1⊥.
        let dist = FiniteDistribution::from_integer_atoms(
            &[&[-1, 3, 0], &[0, -1, 1], &[0, -1, -1], &[0, 0, 1], &[0, 0, -1]],
            &[(1, 5); 5],
        )
        .unwrap();
        let rs = build_reduced_support(&dist);
        assert_eq!(rs.tuple.len(), 2);
        assert!(is_admissible(&dist, &rs.tuple));
        assert_eq!(rs.i_set, vec![2]);
        assert_eq!(rs.i_perp, vec![0, 1]);
    }

    #[test]
    fn degenerate_zero_mass_support() {
        let dist = FiniteDistribution::from_integer_atoms(&[&[-1]], &[(1, 1)]).unwrap();
        let rs = build_reduced_support(&dist);
        assert_eq!(rs.v.dim(), 0);
        assert!(dist.mass_in(&rs.v).is_zero());
    }
}
