//! Monte Carlo survival estimates, direct and Cramér-tilted.
//!
//! Replicate `r` of a run with seed `s` draws from `ChaCha8Rng` seeded by
//! `seed_from_u64(s)` and switched to stream `r`. Replicates are grouped in
//! fixed chunks of [`CHUNK`] whose results are combined in chunk order, so
//! output does not depend on the number of worker threads.
//!
//! Positions are tracked exactly: atoms and start are scaled by the least
//! common denominator of their coordinates and walked in integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Engine, RatesError, SurvivalCurve};
use crate::distribution::FiniteDistribution;
use crate::exec::{pairwise_sum, Execution};
use crate::laplace;
use crate::rational::Rational;

pub const CHUNK: usize = 1024;

/// RNG for replicate `replicate` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Extra survival requirement `max_{k≤n} χ(S_k − v) ≤ R` with
/// `χ(z) = max(maxᵢ∈K |zᵢ|, ‖P z‖)`, `P` the orthogonal projection onto the
/// span of the orthonormal rows of `plane`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiConstraint {
    pub center: Vec<f64>,
    pub coordinates: Vec<usize>,
    pub plane: Vec<Vec<f64>>,
    pub radius: f64,
}

impl ChiConstraint {
    pub fn value(&self, z: &[f64]) -> f64 {
        let diff: Vec<f64> = z.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let on_coords = self.coordinates.iter().map(|&i| diff[i].abs()).fold(0.0, f64::max);
        let sq: f64 = self
            .plane
            .iter()
            .map(|h| {
                let c: f64 = h.iter().zip(&diff).map(|(a, b)| a * b).sum();
                c * c
            })
            .sum();
        on_coords.max(sq.sqrt())
    }

    fn holds(&self, z: &[f64]) -> bool {
        self.value(z) <= self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    pub chi: Option<ChiConstraint>,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        McOptions {
            samples,
            seed,
            chi: None,
        }
    }
}

/// Integer image of the walk: steps and start multiplied by `scale`.
struct ScaledWalk {
    scale: f64,
    steps: Vec<Vec<i128>>,
    start: Vec<i128>,
}

impl ScaledWalk {
    fn new(dist: &FiniteDistribution, x: &[Rational]) -> Result<Self, RatesError> {
        let mut lcm = BigInt::one();
        for v in dist.atoms().iter().flat_map(|a| a.point.iter()).chain(x) {
            lcm = lcm.lcm(v.denom());
        }
        let to_int = |v: &Rational| -> Result<i128, RatesError> {
            (v * Rational::from_integer(lcm.clone()))
                .to_integer()
                .to_i128()
                .ok_or(RatesError::ScaleOverflow)
        };
        let steps = dist
            .atoms()
            .iter()
            .map(|a| a.point.iter().map(to_int).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let start = x.iter().map(to_int).collect::<Result<Vec<_>, _>>()?;
        let scale = lcm.to_f64().ok_or(RatesError::ScaleOverflow)?;
        Ok(ScaledWalk { scale, steps, start })
    }

    fn real(&self, pos: &[i128]) -> Vec<f64> {
        pos.iter().map(|&p| p as f64 / self.scale).collect()
    }
}

fn check_start(dist: &FiniteDistribution, x: &[Rational], opts: &McOptions) -> Result<(), RatesError> {
    if x.len() != dist.dimension() {
        return Err(RatesError::DimensionMismatch {
            expected: dist.dimension(),
            found: x.len(),
        });
    }
    if x.iter().any(Signed::is_negative) {
        return Err(RatesError::NotInQ);
    }
    if opts.samples == 0 {
        return Err(RatesError::NoSamples);
    }
    Ok(())
}

/// Runs one replicate and calls `visit(k, position)` after every step that
/// keeps the walk alive; returns the exit time, or `n + 1` for survivors.
fn trajectory<F>(walk: &ScaledWalk, sampler: &WeightedIndex<f64>, rng: &mut ChaCha8Rng, n: usize, chi: Option<&ChiConstraint>, mut visit: F) -> usize
where
    F: FnMut(usize, &[i128]),
{
    let mut pos = walk.start.clone();
    if let Some(c) = chi {
        if !c.holds(&walk.real(&pos)) {
            return 1;
        }
    }
    for k in 1..=n {
        let step = &walk.steps[sampler.sample(rng)];
        for (p, s) in pos.iter_mut().zip(step) {
            *p += s;
        }
        if pos.iter().any(|&p| p < 0) {
            return k;
        }
        if let Some(c) = chi {
            if !c.holds(&walk.real(&pos)) {
                return k;
            }
        }
        visit(k, &pos);
    }
    n + 1
}

fn chunks(samples: usize) -> usize {
    samples.div_ceil(CHUNK)
}

fn sampler(weights: &[f64]) -> WeightedIndex<f64> {
    WeightedIndex::new(weights).expect("positive weights")
}

/// Empirical `P(τ > k)`, `k = 0..=n`, with binomial standard errors.
pub fn mc_survival(dist: &FiniteDistribution, x: &[Rational], n: usize, opts: &McOptions, exec: Execution) -> Result<SurvivalCurve, RatesError> {
    check_start(dist, x, opts)?;
    let walk = ScaledWalk::new(dist, x)?;
    let sampler = sampler(&dist.to_float().weights);
    let samples = opts.samples;
    let histograms: Vec<Vec<u64>> = exec.map_indexed(chunks(samples), |c| {
        let mut hist = vec![0u64; n + 2];
        for r in c * CHUNK..((c + 1) * CHUNK).min(samples) {
            let mut rng = replicate_rng(opts.seed, r as u64);
            let tau = trajectory(&walk, &sampler, &mut rng, n, opts.chi.as_ref(), |_, _| {});
            hist[tau] += 1;
        }
        hist
    });
    let mut exits = vec![0u64; n + 2];
    for h in &histograms {
        for (e, v) in exits.iter_mut().zip(h) {
            *e += v;
        }
    }
    let total = samples as f64;
    let mut alive = samples as u64;
    let mut probabilities = Vec::with_capacity(n + 1);
    let mut stderr = Vec::with_capacity(n + 1);
    for k in 0..=n {
        alive -= exits[k];
        let p = alive as f64 / total;
        probabilities.push(p);
        stderr.push((p * (1.0 - p) / total).sqrt());
    }
    Ok(SurvivalCurve {
        engine: Engine::Mc,
        start: x.to_vec(),
        horizons: (0..=n).collect(),
        probabilities,
        stderr: Some(stderr),
        ess: None,
        truncation: None,
        log_probabilities: None,
    })
}

/// Importance-sampling estimate of `P(τ > k)` through the identity
/// `P^x(τ > k) = L(x₀)ᵏ e^{⟨x₀,x⟩} E₀[e^{−⟨x₀,S_k⟩}; τ > k]`, simulating
/// under the tilt at `x0`. Not monotone in `k` pathwise, since weights vary.
pub fn mc_tilted_survival(
    dist: &FiniteDistribution,
    x0: &[f64],
    x: &[Rational],
    n: usize,
    opts: &McOptions,
    exec: Execution,
) -> Result<SurvivalCurve, RatesError> {
    check_start(dist, x, opts)?;
    if x0.len() != dist.dimension() {
        return Err(RatesError::DimensionMismatch {
            expected: dist.dimension(),
            found: x0.len(),
        });
    }
    let walk = ScaledWalk::new(dist, x)?;
    let base = dist.to_float();
    let identity = x0.iter().all(|&v| v == 0.0);
    let (weights, log_l) = if identity {
        (base.weights.clone(), 0.0)
    } else {
        let tilted = laplace::tilt(&base, x0).map_err(|_| RatesError::Overflow { log_value: f64::INFINITY })?;
        let log_l = laplace::log_eval(&base, x0).map_err(|_| RatesError::Overflow { log_value: f64::INFINITY })?;
        (tilted.weights, log_l)
    };
    let start_real = walk.real(&walk.start);
    let x0_dot_x: f64 = x0.iter().zip(&start_real).map(|(a, b)| a * b).sum();
    let prefactor = (0..=n)
        .map(|k| k as f64 * log_l + x0_dot_x)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(prefactor < f64::MAX.ln()) {
        return Err(RatesError::Overflow { log_value: prefactor });
    }
    let sampler = sampler(&weights);
    let samples = opts.samples;
    let scale = walk.scale;

    let sums: Vec<(Vec<f64>, Vec<f64>)> = exec.map_indexed(chunks(samples), |c| {
        let mut s1 = vec![0.0; n + 1];
        let mut s2 = vec![0.0; n + 1];
        for r in c * CHUNK..((c + 1) * CHUNK).min(samples) {
            let mut rng = replicate_rng(opts.seed, r as u64);
            s1[0] += 1.0;
            s2[0] += 1.0;
            trajectory(&walk, &sampler, &mut rng, n, opts.chi.as_ref(), |k, pos| {
                let drift: f64 = x0
                    .iter()
                    .zip(pos.iter().zip(&walk.start))
                    .map(|(a, (&p, &s))| a * ((s - p) as f64 / scale))
                    .sum();
                let w = (k as f64 * log_l + drift).exp();
                s1[k] += w;
                s2[k] += w * w;
            });
        }
        (s1, s2)
    });
    let total = samples as f64;
    let mut probabilities = Vec::with_capacity(n + 1);
    let mut stderr = Vec::with_capacity(n + 1);
    let mut ess = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let a: Vec<f64> = sums.iter().map(|(s1, _)| s1[k]).collect();
        let b: Vec<f64> = sums.iter().map(|(_, s2)| s2[k]).collect();
        let (sum, sum_sq) = (pairwise_sum(&a), pairwise_sum(&b));
        if !sum_sq.is_finite() {
            return Err(RatesError::Overflow { log_value: f64::INFINITY });
        }
        let mean = sum / total;
        let var = (sum_sq / total - mean * mean).max(0.0);
        probabilities.push(mean);
        stderr.push((var / total).sqrt());
        ess.push(if sum_sq > 0.0 { sum * sum / sum_sq } else { 0.0 });
    }
    Ok(SurvivalCurve {
        engine: Engine::McTilted,
        start: x.to_vec(),
        horizons: (0..=n).collect(),
        probabilities,
        stderr: Some(stderr),
        ess: Some(ess),
        truncation: None,
        log_probabilities: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn point_masses() {
        let up = FiniteDistribution::from_integer_atoms(&[&[1, 1]], &[(1, 1)]).unwrap();
        let c = mc_survival(&up, &ints(&[0, 3]), 20, &McOptions::new(100, 1), Execution::Sequential).unwrap();
        assert!(c.probabilities.iter().all(|&p| p == 1.0));
        let down = FiniteDistribution::from_integer_atoms(&[&[-1, -1]], &[(1, 1)]).unwrap();
        let c = mc_survival(&down, &ints(&[0, 0]), 3, &McOptions::new(100, 1), Execution::Sequential).unwrap();
        assert_eq!(c.probabilities, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn identity_tilt_matches_direct() {
        let d = FiniteDistribution::from_integer_atoms(&[&[-1, -1], &[-1, 1], &[1, -1]], &[(1, 3), (1, 3), (1, 3)]).unwrap();
        let opts = McOptions::new(3000, 7);
        let x = ints(&[3, 2]);
        let a = mc_survival(&d, &x, 15, &opts, Execution::Sequential).unwrap();
        let b = mc_tilted_survival(&d, &[0.0, 0.0], &x, 15, &opts, Execution::Sequential).unwrap();
        assert_eq!(a.probabilities, b.probabilities);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let d = FiniteDistribution::from_integer_atoms(&[&[-1, 0], &[0, 1], &[0, -1]], &[(1, 5), (3, 10), (1, 2)]).unwrap();
        let opts = McOptions::new(2500, 42);
        let x = ints(&[2, 2]);
        let a = mc_survival(&d, &x, 12, &opts, Execution::Sequential).unwrap();
        let b = mc_survival(&d, &x, 12, &opts, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let a = mc_tilted_survival(&d, &[0.0, 0.3], &x, 12, &opts, Execution::Sequential).unwrap();
        let b = mc_tilted_survival(&d, &[0.0, 0.3], &x, 12, &opts, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rational_steps_are_exact() {
        // thirds never produce spurious exits from rounding
        let d = FiniteDistribution::new(
            1,
            vec![
                crate::distribution::Atom::new(vec![ratio(1, 3)], ratio(1, 2)),
                crate::distribution::Atom::new(vec![ratio(-1, 3)], ratio(1, 2)),
            ],
        )
        .unwrap();
        let c = mc_survival(&d, &[ratio(1, 3)], 1, &McOptions::new(200, 3), Execution::Sequential).unwrap();
        assert_eq!(c.probabilities[1], 1.0);
    }

    #[test]
    fn chi_constraint_kills_far_walks() {
        let up = FiniteDistribution::from_integer_atoms(&[&[1]], &[(1, 1)]).unwrap();
        let mut opts = McOptions::new(10, 0);
        opts.chi = Some(ChiConstraint {
            center: vec![0.0],
            coordinates: vec![0],
            plane: vec![],
            radius: 2.5,
        });
        let c = mc_survival(&up, &ints(&[0]), 4, &opts, Execution::Sequential).unwrap();
        assert_eq!(c.probabilities, vec![1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        let d = FiniteDistribution::from_integer_atoms(&[&[1]], &[(1, 1)]).unwrap();
        assert_eq!(
            mc_survival(&d, &ints(&[-1]), 1, &McOptions::new(1, 0), Execution::Sequential).unwrap_err(),
            RatesError::NotInQ
        );
        assert_eq!(
            mc_survival(&d, &ints(&[1]), 1, &McOptions::new(0, 0), Execution::Sequential).unwrap_err(),
            RatesError::NoSamples
        );
        assert!(matches!(
            mc_tilted_survival(&d, &[800.0], &ints(&[1]), 1, &McOptions::new(1, 0), Execution::Sequential),
            Err(RatesError::Overflow { .. })
        ));
    }
}
