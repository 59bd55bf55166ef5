#![allow(dead_code)]

use orthant_exit::distribution::{Atom, FiniteDistribution};
use orthant_exit::polyhedron::{ExtendedPolyhedron, StandardPolyhedron};
use orthant_exit::rational::{int, ratio, Rational};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn example1(q: (i64, i64), p: (i64, i64)) -> FiniteDistribution {
    FiniteDistribution::from_integer_atoms(&[&[1, -1], &[-1, 1], &[-1, -1]], &[q, q, p]).unwrap()
}

pub fn example2(a: (i64, i64), b: (i64, i64), g: (i64, i64)) -> FiniteDistribution {
    FiniteDistribution::from_integer_atoms(&[&[-1, 0], &[0, 1], &[0, -1]], &[a, b, g]).unwrap()
}

pub fn example3(a: (i64, i64), b: (i64, i64), g: (i64, i64)) -> FiniteDistribution {
    FiniteDistribution::from_integer_atoms(&[&[-1, -1], &[-1, 1], &[1, -1]], &[a, b, g]).unwrap()
}

pub fn ints(v: &[i64]) -> Vec<Rational> {
    v.iter().map(|&x| int(x)).collect()
}

/// Integer support in `[-2, 2]^d`, 2 to 5 distinct atoms, weights `k/Σk`
/// with `k ∈ 1..=9`.
pub fn random_distribution(rng: &mut ChaCha8Rng, d: usize) -> FiniteDistribution {
    let atoms = rng.random_range(2..=5usize);
    let mut points: Vec<Vec<i64>> = Vec::new();
    while points.len() < atoms {
        let p: Vec<i64> = (0..d).map(|_| rng.random_range(-2..=2)).collect();
        if !points.contains(&p) {
            points.push(p);
        }
    }
    let raw: Vec<i64> = (0..atoms).map(|_| rng.random_range(1..=9)).collect();
    let total: i64 = raw.iter().sum();
    let atoms = points
        .into_iter()
        .zip(raw)
        .map(|(p, w)| Atom::new(ints(&p), ratio(w, total)))
        .collect();
    FiniteDistribution::new(d, atoms).unwrap()
}

/// The three worked examples followed by 20 seeded random laws in d ≤ 3.
pub fn corpus() -> Vec<(String, FiniteDistribution)> {
    let mut out = vec![
        ("example1".to_string(), example1((1, 4), (1, 2))),
        ("example2".to_string(), example2((1, 5), (3, 10), (1, 2))),
        ("example3".to_string(), example3((1, 3), (1, 3), (1, 3))),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    for k in 0..20 {
        let d = 1 + k % 3;
        out.push((format!("random{k:02}_d{d}"), random_distribution(&mut rng, d)));
    }
    out
}

fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    ratio(rng.random_range(-9..=9), rng.random_range(1..=9))
}

/// Random `P = {x ≥ 0 : Cx = b}` with `n ≤ 6`, `m ≤ 3`, entries `p/q`,
/// `|p|, q ≤ 9`, together with a member point used to build `b`.
pub fn random_polyhedron(rng: &mut ChaCha8Rng) -> (StandardPolyhedron, Vec<Rational>) {
    let m = rng.random_range(1..=3usize);
    let n = rng.random_range(m..=6usize);
    let columns: Vec<Vec<Rational>> = (0..n).map(|_| (0..m).map(|_| small_rational(rng)).collect()).collect();
    let x: Vec<Rational> = (0..n)
        .map(|_| {
            if rng.random_bool(0.25) {
                int(0)
            } else {
                ratio(rng.random_range(1..=9), rng.random_range(1..=9))
            }
        })
        .collect();
    let shell = StandardPolyhedron::new(columns.clone(), vec![int(0); m]).unwrap();
    let b = shell.apply(&x);
    (StandardPolyhedron::new(columns, b).unwrap(), x)
}

/// Random `{x ≥ 0 : Lx = b, ⟨φ,x⟩ ≥ c}` with `n ≤ 5`, `m ≤ 2`, built
/// around a member point which is returned alongside.
pub fn random_extended(rng: &mut ChaCha8Rng) -> (ExtendedPolyhedron, Vec<Rational>) {
    let m = rng.random_range(1..=2usize);
    let n = rng.random_range(2..=5usize);
    let l: Vec<Vec<Rational>> = (0..m).map(|_| (0..n).map(|_| small_rational(rng)).collect()).collect();
    let phi: Vec<Rational> = (0..n).map(|_| small_rational(rng)).collect();
    let x: Vec<Rational> = (0..n).map(|_| ratio(rng.random_range(0..=9), rng.random_range(1..=4))).collect();
    let b = l.iter().map(|row| orthant_exit::rational::dot(row, &x)).collect();
    let slack = ratio(rng.random_range(0..=3), rng.random_range(1..=3));
    let c = orthant_exit::rational::dot(&phi, &x) - slack;
    (ExtendedPolyhedron::new(l, phi, b, c).unwrap(), x)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Brute-force exact helpers, independent of the library solver.
pub mod brute {
    use num_traits::{One, Zero};
    use orthant_exit::rational::Rational;

    /// Gauss–Jordan solve of a square system; `None` when singular.
    pub fn gauss(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
        let n = a.len();
        for col in 0..n {
            let p = (col..n).find(|&r| !a[r][col].is_zero())?;
            a.swap(col, p);
            b.swap(col, p);
            let inv = Rational::one() / &a[col][col];
            for v in a[col].iter_mut() {
                *v *= &inv;
            }
            b[col] *= &inv;
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for c in 0..n {
                        let t = &f * &a[col][c];
                        a[r][c] -= t;
                    }
                    let t = &f * &b[col];
                    b[r] -= t;
                }
            }
        }
        Some(b)
    }

    /// Rank by forward elimination.
    pub fn rank(rows: &[Vec<Rational>]) -> usize {
        let mut a = rows.to_vec();
        let cols = a.first().map_or(0, Vec::len);
        let mut r = 0;
        for col in 0..cols {
            let Some(p) = (r..a.len()).find(|&i| !a[i][col].is_zero()) else { continue };
            a.swap(r, p);
            for i in r + 1..a.len() {
                if !a[i][col].is_zero() {
                    let f = &a[i][col] / &a[r][col];
                    for c in col..cols {
                        let t = &f * &a[r][c];
                        a[i][c] -= t;
                    }
                }
            }
            r += 1;
        }
        r
    }

    /// All `k`-subsets of `0..n` in lexicographic order.
    pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, n, k, &mut Vec::new(), &mut out);
        out
    }

    pub fn dot(a: &[Rational], b: &[Rational]) -> Rational {
        a.iter().zip(b).fold(Rational::zero(), |acc, (x, y)| acc + x * y)
    }

    pub fn satisfies(rows: &[(Vec<Rational>, Rational)], x: &[Rational]) -> bool {
        rows.iter().all(|(g, h)| dot(g, x) <= *h)
    }

    /// Vertices of `{g·x ≤ h}` plus optional equalities, by trying every
    /// combination of tight inequalities.
    pub fn vertices(rows: &[(Vec<Rational>, Rational)], eqs: &[(Vec<Rational>, Rational)], n: usize) -> Vec<Vec<Rational>> {
        let mut out = Vec::new();
        for pick in subsets(rows.len(), n - eqs.len()) {
            let mut a: Vec<Vec<Rational>> = eqs.iter().map(|(g, _)| g.clone()).collect();
            let mut b: Vec<Rational> = eqs.iter().map(|(_, h)| h.clone()).collect();
            for &i in &pick {
                a.push(rows[i].0.clone());
                b.push(rows[i].1.clone());
            }
            if let Some(x) = gauss(a, b) {
                if satisfies(rows, &x) {
                    out.push(x);
                }
            }
        }
        out
    }
}

/// Fixed-seed proptest settings so every run sees the same cases.
pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Default::default()
    }
}

pub fn data_file(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}
