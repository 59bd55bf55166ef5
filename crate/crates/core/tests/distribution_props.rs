mod common;

use num_traits::{One, Zero};
use orthant_exit::distribution::Subspace;
use orthant_exit::rational::{int, Rational};

fn subspaces(d: usize) -> Vec<Subspace> {
    let mut out = vec![Subspace::full(d)];
    for i in 0..d {
        let mut u = vec![int(0); d];
        u[i] = int(1);
        out.push(Subspace::span(d, &[u]).orthogonal_complement());
    }
    out.push(Subspace::span(d, &[vec![int(1); d]]).orthogonal_complement());
    out.push(Subspace::span(d, &[vec![int(1); d]]));
    out
}

#[test]
fn restricted_weights_reconstruct_subspace_mass() {
    for (name, dist) in common::corpus() {
        for s in subspaces(dist.dimension()) {
            let direct: Rational = dist
                .atoms()
                .iter()
                .filter(|a| s.contains(&a.point))
                .fold(Rational::zero(), |acc, a| acc + &a.weight);
            match dist.restrict(&s) {
                Ok((r, mass)) => {
                    let total = r.atoms().iter().fold(Rational::zero(), |acc, a| acc + &a.weight);
                    assert_eq!(total, Rational::one(), "{name}");
                    assert_eq!(&mass * &total, direct, "{name}");
                    for a in r.atoms() {
                        let orig = dist.atoms().iter().find(|b| b.point == a.point).unwrap();
                        assert_eq!(&a.weight * &mass, orig.weight, "{name}");
                    }
                }
                Err(_) => assert!(direct.is_zero(), "{name}"),
            }
        }
    }
}

#[test]
fn nested_restriction_equals_intersection() {
    for (name, dist) in common::corpus() {
        let d = dist.dimension();
        for s1 in subspaces(d) {
            for t in subspaces(d) {
                let s2 = s1.intersect(&t);
                let Ok((outer, _)) = dist.restrict(&s1) else { continue };
                let twice = outer.restrict(&s2).map(|(r, _)| r);
                let once = dist.restrict(&s2).map(|(r, _)| r);
                match (twice, once) {
                    (Ok(a), Ok(b)) => assert_eq!(a, b, "{name}"),
                    (Err(_), Err(_)) => {}
                    (a, b) => panic!("{name}: {a:?} vs {b:?}"),
                }
            }
        }
    }
}

#[test]
fn json_round_trip_is_exact() {
    for (name, dist) in common::corpus() {
        let text = orthant_exit::distribution::to_json(&dist);
        let back = orthant_exit::distribution::from_json(&text).unwrap();
        assert_eq!(back, dist, "{name}");
    }
}
