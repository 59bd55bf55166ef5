//! Finitely supported probability measures on ℝᵈ with exact rational atoms.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::exact;
use crate::rational::{self, ParseRationalError, Rational};

/// Soft cap on the ambient dimension.
pub const MAX_DIMENSION: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub point: Vec<Rational>,
    pub weight: Rational,
}

impl Atom {
    pub fn new(point: Vec<Rational>, weight: Rational) -> Self {
        Atom { point, weight }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationIssue {
    ZeroDimension,
    DimensionTooLarge(usize),
    EmptySupport,
    WrongPointDimension { atom: usize, found: usize },
    NonPositiveWeight { atom: usize },
    MassNotOne { total: Rational },
    DuplicatePoint { first: usize, second: usize },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::ZeroDimension => write!(f, "dimension must be positive"),
            ValidationIssue::DimensionTooLarge(d) => {
                write!(f, "dimension {d} exceeds the cap of {MAX_DIMENSION}")
            }
            ValidationIssue::EmptySupport => write!(f, "distribution has no atoms"),
            ValidationIssue::WrongPointDimension { atom, found } => {
                write!(f, "atom {atom} has {found} coordinates")
            }
            ValidationIssue::NonPositiveWeight { atom } => {
                write!(f, "atom {atom} has a non-positive weight")
            }
            ValidationIssue::MassNotOne { total } => write!(f, "total mass {total} is not 1"),
            ValidationIssue::DuplicatePoint { first, second } => {
                write!(f, "atoms {first} and {second} share the same point")
            }
        }
    }
}

/// Every invariant violated by a candidate distribution; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.issues.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join("; "))
    }
}

pub fn validate(dimension: usize, atoms: &[Atom]) -> ValidationReport {
    let mut issues = Vec::new();
    if dimension == 0 {
        issues.push(ValidationIssue::ZeroDimension);
    }
    if dimension > MAX_DIMENSION {
        issues.push(ValidationIssue::DimensionTooLarge(dimension));
    }
    if atoms.is_empty() {
        issues.push(ValidationIssue::EmptySupport);
    }
    let mut total = Rational::zero();
    for (i, a) in atoms.iter().enumerate() {
        if a.point.len() != dimension {
            issues.push(ValidationIssue::WrongPointDimension {
                atom: i,
                found: a.point.len(),
            });
        }
        if !a.weight.is_positive() {
            issues.push(ValidationIssue::NonPositiveWeight { atom: i });
        }
        total += &a.weight;
    }
    if !atoms.is_empty() && !total.is_one() {
        issues.push(ValidationIssue::MassNotOne { total });
    }
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            if atoms[i].point == atoms[j].point {
                issues.push(ValidationIssue::DuplicatePoint { first: i, second: j });
            }
        }
    }
    ValidationReport { issues }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("invalid distribution: {0}")]
    Invalid(ValidationReport),
    #[error("no atom lies in the subspace (zero mass)")]
    ZeroMass,
    #[error("subspace lives in dimension {found}, distribution in {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// The measure μ: distinct atoms with positive rational weights summing to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteDistribution {
    dimension: usize,
    atoms: Vec<Atom>,
    lattice: bool,
}

impl FiniteDistribution {
    pub fn new(dimension: usize, atoms: Vec<Atom>) -> Result<Self, DistributionError> {
        let report = validate(dimension, &atoms);
        if !report.is_valid() {
            return Err(DistributionError::Invalid(report));
        }
        let lattice = atoms.iter().all(|a| rational::is_integer_vec(&a.point));
        Ok(FiniteDistribution {
            dimension,
            atoms,
            lattice,
        })
    }

    /// Builds from integer points and `(numerator, denominator)` weights.
    pub fn from_integer_atoms(points: &[&[i64]], weights: &[(i64, i64)]) -> Result<Self, DistributionError> {
        let dimension = points.first().map_or(0, |p| p.len());
        let atoms = points
            .iter()
            .zip(weights)
            .map(|(p, &(n, d))| Atom::new(p.iter().map(|&x| rational::int(x)).collect(), rational::ratio(n, d)))
            .collect();
        FiniteDistribution::new(dimension, atoms)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice
    }

    pub fn mean(&self) -> Vec<Rational> {
        let mut m = vec![Rational::zero(); self.dimension];
        for a in &self.atoms {
            for (mi, yi) in m.iter_mut().zip(&a.point) {
                *mi += &a.weight * yi;
            }
        }
        m
    }

    /// Mass μ(S) of the atoms lying in `sub`.
    pub fn mass_in(&self, sub: &Subspace) -> Rational {
        self.atoms
            .iter()
            .filter(|a| sub.contains(&a.point))
            .fold(Rational::zero(), |acc, a| acc + &a.weight)
    }

    /// The conditional law μ|S together with μ(S).
    pub fn restrict(&self, sub: &Subspace) -> Result<(FiniteDistribution, Rational), DistributionError> {
        if sub.ambient_dimension() != self.dimension {
            return Err(DistributionError::DimensionMismatch {
                expected: self.dimension,
                found: sub.ambient_dimension(),
            });
        }
        let inside: Vec<&Atom> = self.atoms.iter().filter(|a| sub.contains(&a.point)).collect();
        let mass = inside.iter().fold(Rational::zero(), |acc, a| acc + &a.weight);
        if mass.is_zero() {
            return Err(DistributionError::ZeroMass);
        }
        let atoms = inside
            .into_iter()
            .map(|a| Atom::new(a.point.clone(), &a.weight / &mass))
            .collect();
        Ok((FiniteDistribution::new(self.dimension, atoms)?, mass))
    }

    /// Same measure with atoms listed in the given order.
    pub fn permuted(&self, order: &[usize]) -> FiniteDistribution {
        let atoms = order.iter().map(|&i| self.atoms[i].clone()).collect();
        FiniteDistribution {
            dimension: self.dimension,
            atoms,
            lattice: self.lattice,
        }
    }

    pub fn to_float(&self) -> FloatMeasure {
        FloatMeasure {
            dimension: self.dimension,
            points: self.atoms.iter().map(|a| rational::vec_to_f64(&a.point)).collect(),
            weights: self.atoms.iter().map(|a| rational::to_f64(&a.weight)).collect(),
        }
    }

    /// Integer support points, when the distribution is a lattice one.
    pub fn lattice_steps(&self) -> Option<Vec<Vec<i64>>> {
        if !self.lattice {
            return None;
        }
        self.atoms
            .iter()
            .map(|a| {
                a.point
                    .iter()
                    .map(|x| num_traits::ToPrimitive::to_i64(x.numer()))
                    .collect::<Option<Vec<i64>>>()
            })
            .collect()
    }
}

/// Float image of a measure: same support points, float weights. Tilted
/// measures live here since their weights are transcendental.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatMeasure {
    pub dimension: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl FloatMeasure {
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dimension];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (mi, yi) in m.iter_mut().zip(p) {
                *mi += w * yi;
            }
        }
        m
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubspaceError {
    #[error("basis vectors are linearly dependent")]
    DependentBasis,
    #[error("vector of length {found} in ambient dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A linear subspace of ℚᵈ given by an independent basis. The orthogonal
/// complement basis is kept alongside for exact membership tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vec<Rational>>,
    complement: Vec<Vec<Rational>>,
}

impl Subspace {
    pub fn new(ambient: usize, basis: Vec<Vec<Rational>>) -> Result<Self, SubspaceError> {
        if let Some(v) = basis.iter().find(|v| v.len() != ambient) {
            return Err(SubspaceError::DimensionMismatch {
                expected: ambient,
                found: v.len(),
            });
        }
        if exact::rank(&basis) != basis.len() {
            return Err(SubspaceError::DependentBasis);
        }
        let complement = exact::nullspace(&basis, ambient);
        Ok(Subspace {
            ambient,
            basis,
            complement,
        })
    }

    /// Span of arbitrary vectors; dependent vectors are dropped greedily.
    pub fn span(ambient: usize, vectors: &[Vec<Rational>]) -> Self {
        let keep = exact::independent_subset(vectors);
        let basis = keep.into_iter().map(|i| vectors[i].clone()).collect();
        Subspace::new(ambient, basis).expect("independent subset")
    }

    pub fn zero(ambient: usize) -> Self {
        Subspace::new(ambient, Vec::new()).expect("empty basis")
    }

    pub fn full(ambient: usize) -> Self {
        Subspace::new(ambient, (0..ambient).map(|i| rational::unit(ambient, i)).collect())
            .expect("standard basis")
    }

    pub fn ambient_dimension(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<Rational>] {
        &self.basis
    }

    pub fn complement_basis(&self) -> &[Vec<Rational>] {
        &self.complement
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        x.len() == self.ambient && self.complement.iter().all(|c| rational::dot(c, x).is_zero())
    }

    pub fn orthogonal_complement(&self) -> Subspace {
        Subspace {
            ambient: self.ambient,
            basis: self.complement.clone(),
            complement: exact::nullspace(&self.complement, self.ambient),
        }
    }

    pub fn intersect(&self, other: &Subspace) -> Subspace {
        let mut normals = self.complement.clone();
        normals.extend(other.complement.iter().cloned());
        let basis = exact::nullspace(&normals, self.ambient);
        Subspace::new(self.ambient, basis).expect("nullspace basis is independent")
    }

    /// Smallest subspace containing both.
    pub fn join(&self, other: &Subspace) -> Subspace {
        let mut vs = self.basis.clone();
        vs.extend(other.basis.iter().cloned());
        Subspace::span(self.ambient, &vs)
    }

    pub fn same_span(&self, other: &Subspace) -> bool {
        if self.ambient != other.ambient || self.dim() != other.dim() {
            return false;
        }
        let mut all = self.basis.clone();
        all.extend(other.basis.iter().cloned());
        exact::rank(&all) == self.dim()
    }

    pub fn contains_unit(&self, i: usize) -> bool {
        self.contains(&rational::unit(self.ambient, i))
    }
}

// ---------------------------------------------------------------------------
// JSON file format
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum FileError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad number: {0}")]
    Number(#[from] ParseRationalError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Deserialize)]
struct RawAtom {
    point: Vec<Box<RawValue>>,
    weight: Box<RawValue>,
}

#[derive(Deserialize)]
struct RawDistribution {
    dimension: usize,
    atoms: Vec<RawAtom>,
}

/// A JSON scalar read exactly: a `"p/q"` string, or a plain number whose
/// reduced denominator is at most 10⁹.
pub fn parse_json_scalar(raw: &RawValue) -> Result<Rational, FileError> {
    let text = raw.get().trim();
    if text.starts_with('"') {
        let s: String = serde_json::from_str(text)?;
        Ok(rational::parse_fraction(&s)?)
    } else if text.contains(['.', 'e', 'E']) {
        Ok(rational::parse_decimal(text)?)
    } else {
        Ok(rational::parse_fraction(text)?)
    }
}

/// Reads the atoms of a distribution document without validating them.
pub fn parse_atoms(json: &str) -> Result<(usize, Vec<Atom>), FileError> {
    let raw: RawDistribution = serde_json::from_str(json)?;
    let atoms = raw
        .atoms
        .iter()
        .map(|a| {
            let point = a
                .point
                .iter()
                .map(|x| parse_json_scalar(x))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Atom::new(point, parse_json_scalar(&a.weight)?))
        })
        .collect::<Result<Vec<_>, FileError>>()?;
    Ok((raw.dimension, atoms))
}

pub fn from_json(json: &str) -> Result<FiniteDistribution, FileError> {
    let (dimension, atoms) = parse_atoms(json)?;
    Ok(FiniteDistribution::new(dimension, atoms)?)
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct AtomDocument {
    pub point: Vec<String>,
    pub weight: String,
}

/// Canonical serialized form: every scalar as a `"p/q"` string.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct DistributionDocument {
    pub dimension: usize,
    pub atoms: Vec<AtomDocument>,
}

impl From<&FiniteDistribution> for DistributionDocument {
    fn from(d: &FiniteDistribution) -> Self {
        DistributionDocument {
            dimension: d.dimension,
            atoms: d
                .atoms
                .iter()
                .map(|a| AtomDocument {
                    point: rational::format_vec(&a.point),
                    weight: rational::format(&a.weight),
                })
                .collect(),
        }
    }
}

pub fn to_json(d: &FiniteDistribution) -> String {
    serde_json::to_string_pretty(&DistributionDocument::from(d)).expect("serializable")
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

    #[test]
    fn example1_is_valid() {
        let d = example1();
        assert!(validate(2, d.atoms()).is_valid());
        assert!(d.is_lattice());
    }

    #[test]
    fn validation_reports_every_issue() {
        let atoms = vec![
            Atom::new(vec![int(0)], ratio(1, 2)),
            Atom::new(vec![int(1)], ratio(2, 5)),
        ];
        let r = validate(1, &atoms);
        assert_eq!(r.issues, vec![ValidationIssue::MassNotOne { total: ratio(9, 10) }]);

        let dup = vec![
            Atom::new(vec![int(1), int(1)], ratio(1, 2)),
            Atom::new(vec![int(1), int(1)], ratio(1, 2)),
        ];
        assert_eq!(
            validate(2, &dup).issues,
            vec![ValidationIssue::DuplicatePoint { first: 0, second: 1 }]
        );

        let bad = vec![
            Atom::new(vec![int(1)], ratio(0, 1)),
            Atom::new(vec![int(1), int(2)], ratio(1, 1)),
        ];
        let r = validate(1, &bad);
        assert!(r.issues.contains(&ValidationIssue::NonPositiveWeight { atom: 0 }));
        assert!(r.issues.contains(&ValidationIssue::WrongPointDimension { atom: 1, found: 2 }));
        assert!(validate(0, &[]).issues.contains(&ValidationIssue::EmptySupport));
    }

    #[test]
    fn means() {
        let pm = FiniteDistribution::from_integer_atoms(&[&[3, -2]], &[(1, 1)]).unwrap();
        assert_eq!(pm.mean(), vec![int(3), int(-2)]);
        assert_eq!(example1().mean(), vec![ratio(-1, 2), ratio(-1, 2)]);
        assert_eq!(example2().mean(), vec![ratio(-1, 5), ratio(-1, 5)]);
    }

    #[test]
    fn restrict_example2_to_e1_perp() {
        let e1_perp = Subspace::new(2, vec![vec![int(0), int(1)]]).unwrap();
        let (nu, mass) = example2().restrict(&e1_perp).unwrap();
        assert_eq!(mass, ratio(4, 5));
        assert_eq!(
            nu.atoms(),
            &[
                Atom::new(vec![int(0), int(1)], ratio(3, 8)),
                Atom::new(vec![int(0), int(-1)], ratio(5, 8)),
            ]
        );
    }

    #[test]
    fn restrict_full_and_empty() {
        let d = example1();
        let (same, mass) = d.restrict(&Subspace::full(2)).unwrap();
        assert_eq!(same, d);
        assert!(mass.is_one());

        let pm = FiniteDistribution::from_integer_atoms(&[&[1, 1]], &[(1, 1)]).unwrap();
        let anti = Subspace::new(2, vec![vec![int(1), int(-1)]]).unwrap();
        assert_eq!(pm.restrict(&anti), Err(DistributionError::ZeroMass));
    }

    #[test]
    fn restrict_composes_over_nested_subspaces() {
        let d = FiniteDistribution::from_integer_atoms(
            &[&[0, 0, 1], &[1, -1, 0], &[0, 0, 0], &[2, -2, 3], &[1, 1, 1]],
            &[(1, 5), (1, 5), (1, 5), (1, 5), (1, 5)],
        )
        .unwrap();
        let s1 = Subspace::new(3, vec![vec![int(1), int(-1), int(0)], vec![int(0), int(0), int(1)]]).unwrap();
        let s2 = Subspace::new(3, vec![vec![int(1), int(-1), int(0)]]).unwrap();
        let (r1, m1) = d.restrict(&s1).unwrap();
        let (r12, m12) = r1.restrict(&s2).unwrap();
        let (direct, md) = d.restrict(&s1.intersect(&s2)).unwrap();
        assert_eq!(r12, direct);
        assert_eq!(m1 * m12, md);
    }

    #[test]
    fn subspace_algebra() {
        let full = Subspace::full(3);
        assert_eq!(full.complement_basis().len(), 0);
        let z = Subspace::zero(3);
        assert!(z.contains(&[int(0), int(0), int(0)]));
        assert!(!z.contains(&[int(1), int(0), int(0)]));
        let a = Subspace::new(3, vec![vec![int(1), int(1), int(0)]]).unwrap();
        let b = Subspace::new(3, vec![vec![int(2), int(2), int(0)]]).unwrap();
        assert!(a.same_span(&b));
        assert_eq!(a.orthogonal_complement().dim(), 2);
        assert!(a.orthogonal_complement().contains_unit(2));
        assert_eq!(a.join(&a.orthogonal_complement()).dim(), 3);
        assert!(matches!(
            Subspace::new(2, vec![vec![int(1), int(1)], vec![int(2), int(2)]]),
            Err(SubspaceError::DependentBasis)
        ));
    }

    #[test]
    fn json_round_trip_and_number_forms() {
        let json = r#"{"dimension": 2, "atoms": [
            {"point": [-1, 0], "weight": 0.2},
            {"point": [0, 1], "weight": "3/10"},
            {"point": [0, -1], "weight": "1/2"}]}"#;
        let d = from_json(json).unwrap();
        assert_eq!(d, example2());
        assert_eq!(from_json(&to_json(&d)).unwrap(), d);

        let bad = r#"{"dimension": 1, "atoms": [{"point": [0], "weight": 0.0000000001},
                     {"point": [1], "weight": "1"}]}"#;
        assert!(matches!(from_json(bad), Err(FileError::Number(_))));
        let unnormalized = r#"{"dimension": 1, "atoms": [{"point": [0], "weight": 0.5}, {"point": [1], "weight": 0.4}]}"#;
        assert!(matches!(
            from_json(unnormalized),
            Err(FileError::Distribution(DistributionError::Invalid(_)))
        ));
    }
}
