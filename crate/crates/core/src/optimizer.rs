//! Infimum of the Laplace transform over the orthant.
//!
//! `inf_Q L_μ = μ(V) · min_{V⁺} L_{μ|V}`, where `V` is the reduced support.
//! The minimum on `V⁺` is attained, so it is computed by a bound-constrained
//! projected Newton method in coordinates `v = Σ_{i∈I} aᵢ eᵢ + Σ_j b_j h_j`
//! with `aᵢ ≥ 0` and `(h_j)` an orthonormal basis of `V₂ = V ∩ [eᵢ, i∈I]⊥`.
//! The objective is `log L`, which has the same minimizer and whose gradient
//! is the drift of the tilted law.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_traits::{One, Zero};
use thiserror::Error;

use crate::distribution::{FiniteDistribution, FloatMeasure};
use crate::laplace;
use crate::rational::{self, Rational};
use crate::reduction::{self, ReducedSupport};

/// Slack allowed when comparing a rate against the infimum.
pub const UPPER_BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizerError {
    #[error("μ(V) = 0: the infimum over the orthant is 0")]
    DegenerateZero,
    #[error("no convergence after {iterations} iterations (projected gradient {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("tolerance must be positive")]
    BadTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub tol: f64,
    pub max_iterations: usize,
    /// Eigenvalue ratio above which the Newton system counts as singular.
    pub max_condition: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            tol: 1e-9,
            max_iterations: 10_000,
            max_condition: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerReport {
    /// `inf_Q L_μ`.
    pub inf_value: f64,
    /// Minimizer of `L_{μ|V}` on `V⁺`, ambient coordinates.
    pub v0: Vec<f64>,
    /// `min_{V⁺} L_{μ|V}`.
    pub lambda: f64,
    pub mu_v: Rational,
    /// Indices `i ∈ I` with `⟨v₀, eᵢ⟩` above the activity threshold (0-based).
    pub k_set: Vec<usize>,
    pub kkt_residual: f64,
    /// Whether the infimum over the orthant is a minimum (`μ(V) = 1`).
    pub attained: bool,
    /// Drift `m₀ = ∇L_{μ|V}(v₀)/λ` of the tilted conditioned law.
    pub tilt_drift: Vec<f64>,
    pub drift_v2_norm: f64,
    pub drift_active_max: f64,
    pub iterations: usize,
}

/// Coordinate bound for the box-constrained engine.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound {
    lo: f64,
    hi: f64,
}

impl Bound {
    const FREE: Bound = Bound {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };
    const NONNEG: Bound = Bound {
        lo: 0.0,
        hi: f64::INFINITY,
    };

    fn clamp(self, x: f64) -> f64 {
        x.max(self.lo).min(self.hi)
    }
}

struct Solution {
    theta: Vec<f64>,
    log_value: f64,
    iterations: usize,
}

fn objective(m: &FloatMeasure, theta: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    // log L with gradient E₀[p] and Hessian Cov₀[p] under the tilt at θ.
    let (shift, value, g, h) = laplace::scaled_derivatives(m, theta);
    let k = theta.len();
    let mean: Vec<f64> = g.iter().map(|x| x / value).collect();
    let mut cov = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            cov[i][j] = h[i][j] / value - mean[i] * mean[j];
        }
    }
    (shift + value.ln(), mean, cov)
}

fn log_objective(m: &FloatMeasure, theta: &[f64]) -> f64 {
    laplace::log_eval(m, theta).unwrap_or(f64::INFINITY)
}

/// Projection gap `θ − P(θ − g)`; zero exactly at KKT points of the box.
fn projection_gap(theta: &[f64], g: &[f64], bounds: &[Bound]) -> Vec<f64> {
    theta
        .iter()
        .zip(g)
        .zip(bounds)
        .map(|((&t, &gi), b)| t - b.clamp(t - gi))
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton direction on the free block; `None` when no usable descent
/// direction comes out of the (pseudo-)inverse.
fn newton_direction(cov: &[Vec<f64>], g: &[f64], free: &[usize], max_condition: f64) -> Option<Vec<f64>> {
    let n = free.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let h = DMatrix::from_fn(n, n, |i, j| cov[free[i]][free[j]]);
    let gf = DVector::from_iterator(n, free.iter().map(|&i| g[i]));
    let eig = SymmetricEigen::new(h);
    let top = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if !(top > 0.0) {
        return None;
    }
    let floor = top / max_condition;
    let well_conditioned = eig.eigenvalues.iter().all(|&l| l > floor);
    // Solve on the eigenvectors with usable eigenvalues; on a singular
    // system this is the minimum-norm step, kept only if it descends.
    let coeffs = eig.eigenvectors.transpose() * &gf;
    let mut step = DVector::zeros(n);
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > floor {
            step -= eig.eigenvectors.column(k) * (coeffs[k] / l);
        }
    }
    let slope = step.dot(&gf);
    if !well_conditioned && !(slope < 0.0) {
        return None;
    }
    Some(step.iter().copied().collect())
}

/// Minimizes `log L_m` over the box given by `bounds`, starting at `start`.
/// Convergence is declared when the projection gap, measured on the
/// gradient of `L` itself, is at most `tol · (1 + L)`.
fn minimize_log_laplace(
    m: &FloatMeasure,
    bounds: &[Bound],
    start: Vec<f64>,
    opts: &OptimizerOptions,
) -> Result<Solution, OptimizerError> {
    const ARMIJO: f64 = 1e-4;
    let k = bounds.len();
    let mut theta: Vec<f64> = start.iter().zip(bounds).map(|(&t, b)| b.clamp(t)).collect();
    if k == 0 {
        return Ok(Solution {
            theta,
            log_value: log_objective(m, &[]),
            iterations: 0,
        });
    }
    let mut residual = f64::INFINITY;
    for iter in 0..opts.max_iterations {
        let (f, g, cov) = objective(m, &theta);
        let value = f.exp();
        let gap = projection_gap(&theta, &g, bounds);
        residual = value * norm(&gap);
        if residual <= opts.tol * (1.0 + value) {
            return Ok(Solution {
                theta,
                log_value: f,
                iterations: iter,
            });
        }
        // Near-active bounds are handled by gradient steps, the rest by Newton.
        let eps = norm(&gap).min(1e-3);
        let active: Vec<bool> = (0..k)
            .map(|i| {
                (theta[i] <= bounds[i].lo + eps && g[i] > 0.0) || (theta[i] >= bounds[i].hi - eps && g[i] < 0.0)
            })
            .collect();
        let free: Vec<usize> = (0..k).filter(|&i| !active[i]).collect();

        let gradient_dir: Vec<f64> = g.iter().map(|x| -x).collect();
        let newton = newton_direction(&cov, &g, &free, opts.max_condition).map(|step| {
            let mut d = gradient_dir.clone();
            for (&i, s) in free.iter().zip(step) {
                d[i] = s;
            }
            d
        });

        let mut moved = false;
        for dir in newton.iter().chain(std::iter::once(&gradient_dir)) {
            let mut alpha = 1.0;
            while alpha > 1e-20 {
                let trial: Vec<f64> = (0..k).map(|i| bounds[i].clamp(theta[i] + alpha * dir[i])).collect();
                let decrease: f64 = (0..k).map(|i| g[i] * (trial[i] - theta[i])).sum();
                let ft = log_objective(m, &trial);
                if ft <= f + ARMIJO * decrease && trial != theta {
                    theta = trial;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if moved {
                break;
            }
        }
        if !moved {
            // Stalled at machine precision; accept if the residual is within
            // reach of rounding on the objective.
            if residual <= 1e3 * opts.tol * (1.0 + value) {
                return Ok(Solution {
                    theta,
                    log_value: f,
                    iterations: iter,
                });
            }
            return Err(OptimizerError::NoConvergence {
                iterations: iter,
                residual,
            });
        }
    }
    Err(OptimizerError::NoConvergence {
        iterations: opts.max_iterations,
        residual,
    })
}

fn gram_schmidt(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &out {
                let c: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi -= c * ui;
                }
            }
        }
        let n = norm(&w);
        if n > 1e-12 {
            out.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    out
}

/// Orthonormal float basis of `V₂`.
pub fn v2_orthonormal_basis(rs: &ReducedSupport) -> Vec<Vec<f64>> {
    let exact = rs.v2();
    let vs: Vec<Vec<f64>> = exact.basis().iter().map(|b| rational::vec_to_f64(b)).collect();
    gram_schmidt(&vs)
}

pub fn minimize_on_vplus(
    dist: &FiniteDistribution,
    rs: &ReducedSupport,
    tol: f64,
) -> Result<MinimizerReport, OptimizerError> {
    minimize_on_vplus_with(
        dist,
        rs,
        &OptimizerOptions {
            tol,
            ..OptimizerOptions::default()
        },
    )
}

pub fn minimize_on_vplus_with(
    dist: &FiniteDistribution,
    rs: &ReducedSupport,
    opts: &OptimizerOptions,
) -> Result<MinimizerReport, OptimizerError> {
    if !(opts.tol > 0.0) {
        return Err(OptimizerError::BadTolerance);
    }
    let d = dist.dimension();
    let (nu, mass) = match dist.restrict(&rs.v) {
        Ok(r) => r,
        Err(_) => return Err(OptimizerError::DegenerateZero),
    };
    let nu_f = nu.to_float();

    // Coordinate frame: bounded eᵢ (i ∈ I) first, then free V₂ directions.
    let v2 = v2_orthonormal_basis(rs);
    let mut frame: Vec<Vec<f64>> = rs
        .i_set
        .iter()
        .map(|&i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    frame.extend(v2.iter().cloned());
    let mut bounds = vec![Bound::NONNEG; rs.i_set.len()];
    bounds.extend(std::iter::repeat(Bound::FREE).take(v2.len()));

    let projected = FloatMeasure {
        dimension: frame.len(),
        points: nu_f
            .points
            .iter()
            .map(|y| frame.iter().map(|b| b.iter().zip(y).map(|(p, q)| p * q).sum()).collect())
            .collect(),
        weights: nu_f.weights.clone(),
    };
    let sol = minimize_log_laplace(&projected, &bounds, vec![0.0; frame.len()], opts)?;

    let mut v0 = vec![0.0; d];
    for (t, b) in sol.theta.iter().zip(&frame) {
        for (vi, bi) in v0.iter_mut().zip(b) {
            *vi += t * bi;
        }
    }
    for &i in &rs.i_set {
        v0[i] = v0[i].max(0.0);
    }
    let lambda = sol.log_value.exp();
    let mu_v = rational::to_f64(&mass);

    let grad = laplace::grad(&nu_f, &v0).unwrap_or_else(|_| vec![f64::NAN; d]);
    let tilt_drift: Vec<f64> = grad.iter().map(|g| g / lambda).collect();
    let tol_active = 1e-7 * (1.0 + norm(&v0));
    let k_set: Vec<usize> = rs.i_set.iter().copied().filter(|&i| v0[i] > tol_active).collect();

    let mut kkt: f64 = 0.0;
    let mut drift_active_max: f64 = 0.0;
    for &i in &rs.i_set {
        if k_set.contains(&i) {
            kkt = kkt.max(grad[i].abs());
            drift_active_max = drift_active_max.max(tilt_drift[i].abs());
        } else {
            kkt = kkt.max((-grad[i]).max(0.0));
        }
    }
    let mut v2_sq = 0.0;
    for h in &v2 {
        let gh: f64 = grad.iter().zip(h).map(|(a, b)| a * b).sum();
        kkt = kkt.max(gh.abs());
        let mh: f64 = tilt_drift.iter().zip(h).map(|(a, b)| a * b).sum();
        v2_sq += mh * mh;
    }

    Ok(MinimizerReport {
        inf_value: mu_v * lambda,
        v0,
        lambda,
        attained: mass.is_one(),
        mu_v: mass,
        k_set,
        kkt_residual: kkt,
        tilt_drift,
        drift_v2_norm: v2_sq.sqrt(),
        drift_active_max,
        iterations: sol.iterations,
    })
}

/// `inf_Q L_μ`, with the degenerate case `μ(V) = 0` reported as 0.
pub fn infimum_on_orthant(dist: &FiniteDistribution) -> Result<f64, OptimizerError> {
    let rs = reduction::build_reduced_support(dist);
    match minimize_on_vplus(dist, &rs, OptimizerOptions::default().tol) {
        Ok(r) => Ok(r.inf_value),
        Err(OptimizerError::DegenerateZero) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Minimum of `L_μ` over the box `[0, cap]ᵈ`, returned with its argmin.
pub fn minimize_on_box(dist: &FloatMeasure, cap: f64, opts: &OptimizerOptions) -> Result<(f64, Vec<f64>), OptimizerError> {
    let bounds = vec![Bound { lo: 0.0, hi: cap }; dist.dimension];
    let sol = minimize_log_laplace(dist, &bounds, vec![0.0; dist.dimension], opts)?;
    Ok((sol.log_value.exp(), sol.theta))
}

/// The universal upper bound: a decay rate can never exceed `inf_Q L_μ`.
pub fn upper_bound_check(inf_value: f64, rate: f64) -> bool {
    rate <= inf_value + UPPER_BOUND_SLACK
}

#[doc(hidden)]
pub fn zero_mass_report(d: usize) -> MinimizerReport {
    MinimizerReport {
        inf_value: 0.0,
        v0: vec![0.0; d],
        lambda: f64::NAN,
        mu_v: Rational::zero(),
        k_set: Vec::new(),
        kkt_residual: 0.0,
        attained: false,
        tilt_drift: vec![0.0; d],
        drift_v2_norm: 0.0,
        drift_active_max: 0.0,
        iterations: 0,
    }
}
