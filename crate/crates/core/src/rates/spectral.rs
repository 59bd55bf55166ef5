//! Spectral radius of the killed transition matrix on the states reachable
//! from a start point.
//!
//! The reachable graph is split into strongly connected classes; the radius
//! of a block-triangular matrix is the largest radius of its diagonal blocks.
//! Each irreducible block is handled by power iteration on the lazy chain
//! `(P + I)/2`, which is aperiodic, with Collatz–Wielandt bounds as the
//! stopping rule.

use std::collections::HashMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::dp::MAX_STATES;
use super::RatesError;

pub const RELATIVE_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub radius: f64,
    pub states: usize,
    pub classes: usize,
    /// Iterations spent on the class attaining the radius.
    pub iterations: usize,
    /// Final relative Collatz–Wielandt gap of that class.
    pub gap: f64,
}

/// Sparse killed chain on the states of `Q ∩ box` reachable from `start`.
#[derive(Debug, Clone)]
pub struct ReachableChain {
    pub states: Vec<Vec<i64>>,
    /// Outgoing `(target, probability)` lists; mass leaving is killed.
    pub edges: Vec<Vec<(usize, f64)>>,
}

impl ReachableChain {
    pub fn build(steps: &[Vec<i64>], probs: &[f64], caps: &[i64], start: &[i64]) -> Result<Self, RatesError> {
        if start.iter().any(|&v| v < 0) {
            return Err(RatesError::NotInQ);
        }
        if start.iter().zip(caps).any(|(v, c)| v > c) {
            return Err(RatesError::OutsideBox);
        }
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut states = vec![start.to_vec()];
        let mut edges: Vec<Vec<(usize, f64)>> = Vec::new();
        index.insert(start.to_vec(), 0);
        let mut head = 0;
        while head < states.len() {
            let from = states[head].clone();
            let mut out: Vec<(usize, f64)> = Vec::new();
            for (s, &p) in steps.iter().zip(probs) {
                let to: Vec<i64> = from.iter().zip(s).map(|(a, b)| a + b).collect();
                if to.iter().zip(caps).any(|(&v, &c)| v < 0 || v > c) {
                    continue;
                }
                let next = match index.get(&to) {
                    Some(&j) => j,
                    None => {
                        let j = states.len();
                        if j as u128 >= MAX_STATES {
                            return Err(RatesError::StateExplosion { states: j as u128 + 1 });
                        }
                        index.insert(to.clone(), j);
                        states.push(to);
                        j
                    }
                };
                // repeated steps to the same target merge
                match out.iter_mut().find(|(t, _)| *t == next) {
                    Some(e) => e.1 += p,
                    None => out.push((next, p)),
                }
            }
            edges.push(out);
            head += 1;
        }
        Ok(ReachableChain { states, edges })
    }

    fn classes(&self) -> Vec<Vec<usize>> {
        let mut g: DiGraph<(), ()> = DiGraph::with_capacity(self.states.len(), 0);
        let nodes: Vec<NodeIndex> = (0..self.states.len()).map(|_| g.add_node(())).collect();
        for (i, out) in self.edges.iter().enumerate() {
            for &(j, _) in out {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
        let mut classes: Vec<Vec<usize>> = tarjan_scc(&g)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        classes.sort();
        classes
    }

    pub fn spectral_radius(&self) -> Result<SpectralResult, RatesError> {
        let classes = self.classes();
        let mut best = SpectralResult {
            radius: 0.0,
            states: self.states.len(),
            classes: classes.len(),
            iterations: 0,
            gap: 0.0,
        };
        let mut local = vec![usize::MAX; self.states.len()];
        for class in &classes {
            for (k, &s) in class.iter().enumerate() {
                local[s] = k;
            }
            let block: Vec<Vec<(usize, f64)>> = class
                .iter()
                .map(|&s| {
                    self.edges[s]
                        .iter()
                        .filter(|(t, _)| local[*t] != usize::MAX)
                        .map(|&(t, p)| (local[t], p))
                        .collect()
                })
                .collect();
            let (radius, iterations, gap) = class_radius(&block)?;
            if radius > best.radius {
                best.radius = radius;
                best.iterations = iterations;
                best.gap = gap;
            }
            for &s in class {
                local[s] = usize::MAX;
            }
        }
        Ok(best)
    }
}

/// Perron root of an irreducible nonnegative block given as sparse rows.
fn class_radius(block: &[Vec<(usize, f64)>]) -> Result<(f64, usize, f64), RatesError> {
    let n = block.len();
    if n == 1 {
        let self_loop = block[0].iter().map(|&(_, p)| p).sum();
        return Ok((self_loop, 0, 0.0));
    }
    let mut v = vec![1.0; n];
    let mut w = vec![0.0; n];
    let mut gap = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        for (i, row) in block.iter().enumerate() {
            let mut acc = 0.5 * v[i];
            for &(j, p) in row {
                acc += 0.5 * p * v[j];
            }
            w[i] = acc;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (a, b) in w.iter().zip(&v) {
            let r = a / b;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        gap = (hi - lo) / hi;
        let scale = w.iter().copied().fold(0.0f64, f64::max);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / scale;
        }
        if gap <= RELATIVE_TOLERANCE {
            let lazy = 0.5 * (lo + hi);
            return Ok(((2.0 * lazy - 1.0).max(0.0), it, gap));
        }
    }
    Err(RatesError::NonConvergence {
        iterations: MAX_ITERATIONS,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1_chain(n: i64) -> ReachableChain {
        let steps = vec![vec![1, -1], vec![-1, 1], vec![-1, -1]];
        let probs = vec![0.25, 0.25, 0.5];
        ReachableChain::build(&steps, &probs, &[2 * n, 2 * n], &[n, n]).unwrap()
    }

    #[test]
    fn example1_levels() {
        for n in 1..=4 {
            let r = example1_chain(n).spectral_radius().unwrap();
            let expected = 0.5 * (std::f64::consts::PI / (2.0 * n as f64 + 2.0)).cos();
            assert!((r.radius - expected).abs() < 1e-9, "N={n}: {} vs {expected}", r.radius);
        }
    }

    #[test]
    fn periodic_class_converges() {
        // ±1 walk on {0,1,2}: period two, radius cos(π/4)
        let steps = vec![vec![1], vec![-1]];
        let chain = ReachableChain::build(&steps, &[0.5, 0.5], &[2], &[1]).unwrap();
        let r = chain.spectral_radius().unwrap();
        assert!((r.radius - (std::f64::consts::PI / 4.0).cos()).abs() < 1e-9);
        assert_eq!(r.classes, 1);
    }

    #[test]
    fn transient_states_and_self_loops() {
        let steps = vec![vec![0], vec![-1]];
        let chain = ReachableChain::build(&steps, &[0.3, 0.7], &[5], &[3]).unwrap();
        let r = chain.spectral_radius().unwrap();
        assert_eq!(r.states, 4);
        assert_eq!(r.classes, 4);
        assert!((r.radius - 0.3).abs() < 1e-15);
        let chain = ReachableChain::build(&[vec![-1]], &[1.0], &[5], &[3]).unwrap();
        assert_eq!(chain.spectral_radius().unwrap().radius, 0.0);
    }
}
