//! Exact forward dynamic programming for lattice walks on `Q ∩ box`.

use num_traits::{Signed, ToPrimitive};

use super::RatesError;
use crate::distribution::FiniteDistribution;
use crate::lp::{self, LinearProgram, LpOutcome, Sense};
use crate::rational::{self, Rational};

/// Largest box the engines will allocate.
pub const MAX_STATES: u128 = 10_000_000;

/// Per-coordinate upper limits of the state box, `0 ≤ xᵢ ≤ caps[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    pub caps: Vec<i64>,
    /// True when no trajectory staying in `Q` can leave the box, so nothing
    /// is ever dropped.
    pub exact: bool,
}

/// Largest value coordinate `i` can take before the walk leaves `Q`, when
/// some `u ≥ 0` with `uᵢ = 1` is non-increasing along every step.
pub fn coordinate_ceiling(dist: &FiniteDistribution, x: &[i64], i: usize) -> Option<i64> {
    let d = dist.dimension();
    let objective = x.iter().map(|&v| -rational::int(v)).collect();
    let mut prog = LinearProgram::feasibility(d).with_objective(objective);
    prog.push(rational::unit(d, i), Sense::Eq, rational::int(1));
    for a in dist.atoms() {
        prog.push(a.point.clone(), Sense::Le, rational::int(0));
    }
    match lp::solve(&prog).ok()? {
        LpOutcome::Optimal { value, .. } => {
            // ⟨u, S⟩ ≤ ⟨u, x⟩ and uᵢ Sᵢ ≤ ⟨u, S⟩ inside Q
            let ceiling: Rational = -value;
            ceiling.floor().to_integer().to_i64()
        }
        _ => None,
    }
}

/// Box for horizon `n`: coordinates with a ceiling use it, the others get
/// room for `n` steps of maximal growth. `trunc` caps every coordinate.
pub fn default_truncation(dist: &FiniteDistribution, x: &[i64], n: usize, trunc: Option<i64>) -> Truncation {
    let mut exact = true;
    let caps = (0..dist.dimension())
        .map(|i| {
            let natural = match coordinate_ceiling(dist, x, i) {
                Some(c) => c,
                None => {
                    exact = false;
                    let growth = dist
                        .atoms()
                        .iter()
                        .map(|a| a.point[i].ceil().to_integer().to_i64().unwrap_or(i64::MAX))
                        .max()
                        .unwrap_or(0)
                        .max(0);
                    x[i].saturating_add(growth.saturating_mul(n as i64))
                }
            };
            match trunc {
                Some(t) if t < natural => {
                    exact = false;
                    t.max(x[i])
                }
                _ => natural,
            }
        })
        .collect();
    Truncation { caps, exact }
}

fn state_count(caps: &[i64]) -> u128 {
    caps.iter().fold(1u128, |acc, &c| acc.saturating_mul((c.max(0) as u128) + 1))
}

/// Walk with integer steps killed on leaving `Q` and cut off at the box.
#[derive(Debug, Clone)]
pub struct LatticeWalk {
    steps: Vec<Vec<i64>>,
    probs: Vec<f64>,
    caps: Vec<i64>,
    strides: Vec<usize>,
    states: usize,
}

/// Survival probabilities `P(τ > k)` for `k = 0..=n` and the mass cut off
/// by the box up to each horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTrace {
    pub survival: Vec<f64>,
    /// `ln P(τ > k)`, finite even after `survival` underflows.
    pub log_survival: Vec<f64>,
    pub dropped: Vec<f64>,
}

/// Mass is renormalized once the surviving total falls below this.
const RESCALE_BELOW: f64 = 1e-100;

impl LatticeWalk {
    pub fn new(steps: Vec<Vec<i64>>, probs: Vec<f64>, caps: Vec<i64>) -> Result<Self, RatesError> {
        let d = caps.len();
        if steps.len() != probs.len() || steps.iter().any(|s| s.len() != d) {
            return Err(RatesError::DimensionMismatch {
                expected: d,
                found: steps.iter().map(Vec::len).find(|&l| l != d).unwrap_or(probs.len()),
            });
        }
        let count = state_count(&caps);
        if count > MAX_STATES {
            return Err(RatesError::StateExplosion { states: count });
        }
        let mut strides = vec![1usize; d];
        for i in 1..d {
            strides[i] = strides[i - 1] * (caps[i - 1] as usize + 1);
        }
        Ok(LatticeWalk {
            steps,
            probs,
            caps,
            strides,
            states: count as usize,
        })
    }

    pub fn from_distribution(dist: &FiniteDistribution, caps: Vec<i64>) -> Result<Self, RatesError> {
        let steps = dist.lattice_steps().ok_or(RatesError::NotLattice)?;
        let probs = dist.to_float().weights;
        Self::new(steps, probs, caps)
    }

    pub fn caps(&self) -> &[i64] {
        &self.caps
    }

    pub fn steps(&self) -> &[Vec<i64>] {
        &self.steps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn index(&self, x: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for ((&xi, &c), &s) in x.iter().zip(&self.caps).zip(&self.strides) {
            if xi < 0 || xi > c {
                return None;
            }
            idx += xi as usize * s;
        }
        Some(idx)
    }

    pub fn coordinates(&self, mut idx: usize) -> Vec<i64> {
        self.caps
            .iter()
            .map(|&c| {
                let w = c as usize + 1;
                let v = idx % w;
                idx /= w;
                v as i64
            })
            .collect()
    }

    pub fn run(&self, start: &[i64], n: usize) -> Result<DpTrace, RatesError> {
        self.run_observed(start, n, |_, _| {})
    }

    /// Like [`run`](Self::run), calling `observe(k, mass)` with the
    /// sub-probability mass over box states after each step `k ≥ 0`.
    pub fn run_observed<F>(&self, start: &[i64], n: usize, mut observe: F) -> Result<DpTrace, RatesError>
    where
        F: FnMut(usize, &LatticeMass<'_>),
    {
        let d = self.caps.len();
        if start.len() != d {
            return Err(RatesError::DimensionMismatch {
                expected: d,
                found: start.len(),
            });
        }
        if start.iter().any(|&v| v < 0) {
            return Err(RatesError::NotInQ);
        }
        let origin = self.index(start).ok_or(RatesError::OutsideBox)?;
        let mut mass = vec![0.0; self.states];
        let mut next = vec![0.0; self.states];
        mass[origin] = 1.0;
        let mut lo = start.to_vec();
        let mut hi = start.to_vec();
        let mut survival = vec![1.0];
        let mut log_survival = vec![0.0];
        let mut dropped = vec![0.0];
        let mut dropped_total = 0.0;
        // stored mass times e^{log_scale} is the true sub-probability
        let mut log_scale = 0.0f64;
        observe(
            0,
            &LatticeMass {
                walk: self,
                mass: &mass,
                log_scale,
            },
        );
        let step_lo: Vec<i64> = (0..d).map(|i| self.steps.iter().map(|s| s[i]).min().unwrap_or(0)).collect();
        let step_hi: Vec<i64> = (0..d).map(|i| self.steps.iter().map(|s| s[i]).max().unwrap_or(0)).collect();
        for k in 1..=n {
            let mut cut = 0.0;
            let mut coords = lo.clone();
            'outer: loop {
                let idx: usize = coords.iter().zip(&self.strides).map(|(&c, &s)| c as usize * s).sum();
                let m = mass[idx];
                if m != 0.0 {
                    mass[idx] = 0.0;
                    for (step, &p) in self.steps.iter().zip(&self.probs) {
                        let mut target = 0usize;
                        let mut state = 0u8; // 0 inside, 1 exited Q, 2 beyond the box
                        for i in 0..d {
                            let v = coords[i] + step[i];
                            if v < 0 {
                                state = 1;
                                break;
                            }
                            if v > self.caps[i] {
                                state = 2;
                            }
                            target += v as usize * self.strides[i];
                        }
                        match state {
                            0 => next[target] += m * p,
                            2 => cut += m * p,
                            _ => {}
                        }
                    }
                }
                for i in 0..d {
                    if coords[i] < hi[i] {
                        coords[i] += 1;
                        continue 'outer;
                    }
                    coords[i] = lo[i];
                }
                break;
            }
            for i in 0..d {
                lo[i] = (lo[i] + step_lo[i]).max(0);
                hi[i] = (hi[i] + step_hi[i]).min(self.caps[i]);
            }
            std::mem::swap(&mut mass, &mut next);
            dropped_total += cut * log_scale.exp();
            let total = sum_box(&mass, &lo, &hi, &self.strides);
            let log_total = log_scale + total.ln();
            survival.push(if log_scale == 0.0 { total } else { log_total.exp() });
            log_survival.push(log_total);
            dropped.push(dropped_total);
            observe(
                k,
                &LatticeMass {
                    walk: self,
                    mass: &mass,
                    log_scale,
                },
            );
            if total == 0.0 || lo.iter().zip(&hi).any(|(l, h)| l > h) {
                // every trajectory has left; the rest of the curve is zero
                survival.resize(n + 1, 0.0);
                log_survival.resize(n + 1, f64::NEG_INFINITY);
                dropped.resize(n + 1, dropped_total);
                break;
            }
            if total < RESCALE_BELOW {
                scale_box(&mut mass, &lo, &hi, &self.strides, 1.0 / total);
                log_scale = log_total;
            }
        }
        Ok(DpTrace {
            survival,
            log_survival,
            dropped,
        })
    }
}

/// Visits every index of the sub-box `lo..=hi`.
fn for_box<F: FnMut(usize)>(lo: &[i64], hi: &[i64], strides: &[usize], mut f: F) {
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        return;
    }
    let d = lo.len();
    let mut coords = lo.to_vec();
    'outer: loop {
        f(coords.iter().zip(strides).map(|(&c, &s)| c as usize * s).sum());
        for i in 0..d {
            if coords[i] < hi[i] {
                coords[i] += 1;
                continue 'outer;
            }
            coords[i] = lo[i];
        }
        return;
    }
}

fn sum_box(mass: &[f64], lo: &[i64], hi: &[i64], strides: &[usize]) -> f64 {
    let mut total = 0.0;
    for_box(lo, hi, strides, |i| total += mass[i]);
    total
}

fn scale_box(mass: &mut [f64], lo: &[i64], hi: &[i64], strides: &[usize], factor: f64) {
    for_box(lo, hi, strides, |i| mass[i] *= factor);
}

/// Read-only view of the mass vector handed to observers.
pub struct LatticeMass<'a> {
    walk: &'a LatticeWalk,
    mass: &'a [f64],
    log_scale: f64,
}

impl LatticeMass<'_> {
    /// Nonzero entries as `(state, mass)`, in index order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        let scale = self.log_scale.exp();
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m != 0.0)
            .map(move |(i, &m)| (self.walk.coordinates(i), m * scale))
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() * self.log_scale.exp()
    }
}

/// Integer start vector, or an error naming why it cannot be one.
pub fn integer_start(x: &[Rational]) -> Result<Vec<i64>, RatesError> {
    if x.iter().any(Signed::is_negative) {
        return Err(RatesError::NotInQ);
    }
    x.iter()
        .map(|v| {
            if v.is_integer() {
                v.to_integer().to_i64().ok_or(RatesError::NonIntegerStart)
            } else {
                Err(RatesError::NonIntegerStart)
            }
        })
        .collect()
}

/// `P(τ > k)` for `k = 0..=n` from the integer start `x`.
pub fn survival_dp(dist: &FiniteDistribution, x: &[i64], n: usize, trunc: Option<i64>) -> Result<(DpTrace, Truncation), RatesError> {
    if !dist.is_lattice() {
        return Err(RatesError::NotLattice);
    }
    if x.len() != dist.dimension() {
        return Err(RatesError::DimensionMismatch {
            expected: dist.dimension(),
            found: x.len(),
        });
    }
    if x.iter().any(|&v| v < 0) {
        return Err(RatesError::NotInQ);
    }
    let t = default_truncation(dist, x, n, trunc);
    let walk = LatticeWalk::from_distribution(dist, t.caps.clone())?;
    Ok((walk.run(x, n)?, t))
}
