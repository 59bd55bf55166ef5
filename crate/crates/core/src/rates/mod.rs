//! Survival probabilities `P^x(τ_Q > n)` and decay-rate estimates.
//!
//! Engines: exact dynamic programming ([`dp`]), the spectral radius of the
//! killed chain on the reachable states ([`spectral`]), and direct or
//! Cramér-tilted Monte Carlo ([`mc`]). All engines return finite-horizon
//! proxies for the rate, reported next to the universal bound `inf_Q L_μ`.

pub mod dp;
pub mod mc;
pub mod spectral;

use std::fmt;

use thiserror::Error;

use crate::distribution::FiniteDistribution;
use crate::exec::Execution;
use crate::laplace;
use crate::optimizer::{self, MinimizerReport, OptimizerError};
use crate::rational::{self, Rational};
use crate::reduction::{self, ReducedSupport};

pub use dp::{survival_dp, DpTrace, LatticeWalk, Truncation};
pub use mc::{mc_survival, mc_tilted_survival, ChiConstraint, McOptions};
pub use spectral::{ReachableChain, SpectralResult};

/// Number of trailing horizons the ratio estimator averages over.
pub const RATIO_WINDOW: usize = 10;
/// Agreement required between a rate and its doubled-box recomputation.
pub const DOUBLING_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RatesError {
    #[error("the engine needs integer support points")]
    NotLattice,
    #[error("start point is not in the orthant")]
    NotInQ,
    #[error("the engine needs an integer start point")]
    NonIntegerStart,
    #[error("start point lies outside the truncation box")]
    OutsideBox,
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("truncated state space has {states} states")]
    StateExplosion { states: u128 },
    #[error("power iteration stopped after {iterations} iterations with relative gap {gap:e}")]
    NonConvergence { iterations: usize, gap: f64 },
    #[error("importance weights overflow (log prefactor {log_value})")]
    Overflow { log_value: f64 },
    #[error("at least one sample is required")]
    NoSamples,
    #[error("coordinates too large for exact integer simulation")]
    ScaleOverflow,
    #[error("at least one horizon is required")]
    NoHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Dp,
    Spectral,
    Mc,
    McTilted,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Dp => "dp",
            Engine::Spectral => "spectral",
            Engine::Mc => "mc",
            Engine::McTilted => "mc-tilted",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMethod {
    Ratio,
    NthRoot,
    Spectral,
}

impl RateMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RateMethod::Ratio => "ratio",
            RateMethod::NthRoot => "nth_root",
            RateMethod::Spectral => "spectral",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    pub engine: Engine,
    pub start: Vec<Rational>,
    pub horizons: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
    /// Effective sample size per horizon, for importance sampling.
    pub ess: Option<Vec<f64>>,
    pub truncation: Option<Vec<i64>>,
    /// `ln P(τ > k)` when the engine tracks it past `f64` underflow.
    pub log_probabilities: Option<Vec<f64>>,
}

impl SurvivalCurve {
    pub fn from_dp(engine: Engine, start: &[Rational], trace: &DpTrace, truncation: &Truncation) -> Self {
        SurvivalCurve {
            engine,
            start: start.to_vec(),
            horizons: (0..trace.survival.len()).collect(),
            probabilities: trace.survival.clone(),
            stderr: None,
            ess: None,
            truncation: Some(truncation.caps.clone()),
            log_probabilities: Some(trace.log_survival.clone()),
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.probabilities.windows(2).all(|w| w[1] <= w[0])
    }

    /// `ln P(τ > k)`, from the tracked logs when present.
    pub fn logs(&self) -> Vec<f64> {
        self.log_probabilities
            .clone()
            .unwrap_or_else(|| self.probabilities.iter().map(|p| p.ln()).collect())
    }
}

/// `(P_n / P_{n−w})^{1/w}` over the last `w = min(10, n)` horizons.
pub fn ratio_rate(probabilities: &[f64]) -> f64 {
    let logs: Vec<f64> = probabilities.iter().map(|p| p.ln()).collect();
    ratio_rate_log(&logs)
}

/// [`ratio_rate`] from `ln P(τ > k)`.
pub fn ratio_rate_log(logs: &[f64]) -> f64 {
    let n = logs.len().saturating_sub(1);
    let w = n.min(RATIO_WINDOW);
    if w == 0 {
        return f64::NAN;
    }
    let (last, first) = (logs[n], logs[n - w]);
    if !last.is_finite() || !first.is_finite() {
        return 0.0;
    }
    ((last - first) / w as f64).exp()
}

/// `P_n^{1/n}`.
pub fn nth_root_rate(probabilities: &[f64]) -> f64 {
    let logs: Vec<f64> = probabilities.iter().map(|p| p.max(0.0).ln()).collect();
    nth_root_rate_log(&logs)
}

/// [`nth_root_rate`] from `ln P(τ > k)`.
pub fn nth_root_rate_log(logs: &[f64]) -> f64 {
    let n = logs.len().saturating_sub(1);
    if n == 0 {
        return f64::NAN;
    }
    (logs[n] / n as f64).exp()
}

/// Reduced support and infimum, computed once per distribution.
#[derive(Debug, Clone)]
pub struct RateContext {
    pub reduced: ReducedSupport,
    /// `None` when `μ(V) = 0`.
    pub minimizer: Option<MinimizerReport>,
    pub bound: f64,
}

impl RateContext {
    pub fn new(dist: &FiniteDistribution) -> Result<Self, OptimizerError> {
        let reduced = reduction::build_reduced_support(dist);
        let minimizer = match optimizer::minimize_on_vplus(dist, &reduced, optimizer::OptimizerOptions::default().tol) {
            Ok(r) => Some(r),
            Err(OptimizerError::DegenerateZero) => None,
            Err(e) => return Err(e),
        };
        let bound = minimizer.as_ref().map_or(0.0, |m| m.inf_value);
        Ok(RateContext { reduced, minimizer, bound })
    }

    /// Minimizer `v₀`, or the origin in the degenerate case.
    pub fn default_tilt(&self) -> Vec<f64> {
        self.minimizer
            .as_ref()
            .map_or_else(|| vec![0.0; self.reduced.dimension()], |m| m.v0.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub engine: Engine,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub trunc: Option<i64>,
    /// Tilt point for the tilted engine; defaults to the minimizer `v₀`.
    pub tilt: Option<Vec<f64>>,
    pub chi: Option<ChiConstraint>,
}

impl EngineConfig {
    pub fn new(engine: Engine, n: usize) -> Self {
        EngineConfig {
            engine,
            n,
            samples: 10_000,
            seed: 0,
            trunc: None,
            tilt: None,
            chi: None,
        }
    }

    fn mc_options(&self) -> McOptions {
        McOptions {
            samples: self.samples,
            seed: self.seed,
            chi: self.chi.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub engine: Engine,
    pub start: Vec<Rational>,
    pub rate: f64,
    pub method: RateMethod,
    /// `P_n^{1/n}` from the same curve, for comparison.
    pub nth_root: f64,
    /// `inf_Q L_μ`.
    pub bound: f64,
    pub d_of_x: f64,
    pub curve: SurvivalCurve,
    /// Whether doubling the truncation box leaves the rate unchanged
    /// (`Some(true)` also when nothing was truncated); `None` when the
    /// doubled box was too large to check.
    pub truncation_converged: Option<bool>,
    pub spectral: Option<SpectralResult>,
}

impl RateReport {
    pub fn within_bound(&self) -> bool {
        optimizer::upper_bound_check(self.bound, self.rate)
    }
}

fn doubled(t: &Truncation, dist: &FiniteDistribution, x: &[i64], n: usize) -> Truncation {
    let ceilings = dp::default_truncation(dist, x, n, None);
    let caps = t
        .caps
        .iter()
        .zip(&ceilings.caps)
        .map(|(&c, &natural)| c.saturating_mul(2).min(if ceilings.exact { natural } else { i64::MAX }))
        .collect();
    Truncation { caps, exact: false }
}

fn dp_report(dist: &FiniteDistribution, x: &[Rational], cfg: &EngineConfig) -> Result<(SurvivalCurve, f64, Option<bool>), RatesError> {
    let xi = dp::integer_start(x)?;
    let (trace, t) = survival_dp(dist, &xi, cfg.n, cfg.trunc)?;
    let curve = SurvivalCurve::from_dp(Engine::Dp, x, &trace, &t);
    let rate = ratio_rate_log(&trace.log_survival);
    let converged = if trace.dropped.last().copied().unwrap_or(0.0) == 0.0 {
        Some(true)
    } else {
        let big = doubled(&t, dist, &xi, cfg.n);
        match LatticeWalk::from_distribution(dist, big.caps).and_then(|w| w.run(&xi, cfg.n)) {
            Ok(tr) => Some((ratio_rate_log(&tr.log_survival) - rate).abs() < DOUBLING_TOLERANCE),
            Err(RatesError::StateExplosion { .. }) => None,
            Err(e) => return Err(e),
        }
    };
    Ok((curve, rate, converged))
}

fn spectral_report(dist: &FiniteDistribution, x: &[Rational], cfg: &EngineConfig) -> Result<(SurvivalCurve, SpectralResult, Option<bool>), RatesError> {
    let xi = dp::integer_start(x)?;
    if !dist.is_lattice() {
        return Err(RatesError::NotLattice);
    }
    let steps = dist.lattice_steps().ok_or(RatesError::NotLattice)?;
    let probs = dist.to_float().weights;
    let t = dp::default_truncation(dist, &xi, cfg.n, cfg.trunc);
    let result = ReachableChain::build(&steps, &probs, &t.caps, &xi)?.spectral_radius()?;
    let walk = LatticeWalk::new(steps.clone(), probs.clone(), t.caps.clone())?;
    let curve = SurvivalCurve::from_dp(Engine::Spectral, x, &walk.run(&xi, cfg.n)?, &t);
    let converged = if t.exact {
        Some(true)
    } else {
        let big = doubled(&t, dist, &xi, cfg.n);
        match ReachableChain::build(&steps, &probs, &big.caps, &xi).and_then(|c| c.spectral_radius()) {
            Ok(r) => Some((r.radius - result.radius).abs() < DOUBLING_TOLERANCE),
            Err(RatesError::StateExplosion { .. }) => None,
            Err(e) => return Err(e),
        }
    };
    Ok((curve, result, converged))
}

/// Survival curve of the requested engine from `x`.
pub fn survival_curve(dist: &FiniteDistribution, ctx: &RateContext, x: &[Rational], cfg: &EngineConfig, exec: Execution) -> Result<SurvivalCurve, RatesError> {
    Ok(estimate_rate(dist, ctx, x, cfg, exec)?.curve)
}

/// Rate estimate from one start point with the configured engine.
pub fn estimate_rate(dist: &FiniteDistribution, ctx: &RateContext, x: &[Rational], cfg: &EngineConfig, exec: Execution) -> Result<RateReport, RatesError> {
    if x.len() != dist.dimension() {
        return Err(RatesError::DimensionMismatch {
            expected: dist.dimension(),
            found: x.len(),
        });
    }
    if cfg.n == 0 {
        return Err(RatesError::NoHorizon);
    }
    let d_of_x = ctx
        .reduced
        .depth(&rational::vec_to_f64(x))
        .map_err(|_| RatesError::NotInQ)?;
    let (curve, rate, method, converged, spectral) = match cfg.engine {
        Engine::Dp => {
            let (curve, rate, conv) = dp_report(dist, x, cfg)?;
            (curve, rate, RateMethod::Ratio, conv, None)
        }
        Engine::Spectral => {
            let (curve, result, conv) = spectral_report(dist, x, cfg)?;
            (curve, result.radius, RateMethod::Spectral, conv, Some(result))
        }
        Engine::Mc => {
            let curve = mc_survival(dist, x, cfg.n, &cfg.mc_options(), exec)?;
            let rate = ratio_rate(&curve.probabilities);
            (curve, rate, RateMethod::Ratio, None, None)
        }
        Engine::McTilted => {
            let tilt = cfg.tilt.clone().unwrap_or_else(|| ctx.default_tilt());
            let curve = mc_tilted_survival(dist, &tilt, x, cfg.n, &cfg.mc_options(), exec)?;
            let rate = ratio_rate(&curve.probabilities);
            (curve, rate, RateMethod::Ratio, None, None)
        }
    };
    Ok(RateReport {
        engine: cfg.engine,
        start: x.to_vec(),
        nth_root: nth_root_rate_log(&curve.logs()),
        rate,
        method,
        bound: ctx.bound,
        d_of_x,
        curve,
        truncation_converged: converged,
        spectral,
    })
}

/// One report per start, ordered by depth `d(x)` (ties keep input order).
pub fn rate_sweep(
    dist: &FiniteDistribution,
    ctx: &RateContext,
    xs: &[Vec<Rational>],
    cfg: &EngineConfig,
    exec: Execution,
) -> Result<Vec<RateReport>, RatesError> {
    let mut reports = exec
        .map(xs, |x| estimate_rate(dist, ctx, x, cfg, exec))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    reports.sort_by(|a, b| a.d_of_x.total_cmp(&b.d_of_x));
    Ok(reports)
}

/// Right-hand side of the Cramér identity,
/// `L(x₀)ᵏ e^{⟨x₀,x⟩} E₀[e^{−⟨x₀,S_k⟩}; τ > k]` for `k = 0..=n`, with the
/// expectation under the tilted law computed by exact DP on `caps`.
pub fn cramer_identity_dp(dist: &FiniteDistribution, x0: &[f64], x: &[i64], n: usize, caps: Vec<i64>) -> Result<Vec<f64>, RatesError> {
    let steps = dist.lattice_steps().ok_or(RatesError::NotLattice)?;
    let base = dist.to_float();
    let tilted = laplace::tilt(&base, x0).map_err(|_| RatesError::Overflow { log_value: f64::INFINITY })?;
    let log_l = laplace::log_eval(&base, x0).map_err(|_| RatesError::Overflow { log_value: f64::INFINITY })?;
    let walk = LatticeWalk::new(steps, tilted.weights, caps)?;
    let x0_dot_x: f64 = x0.iter().zip(x).map(|(a, &b)| a * b as f64).sum();
    let mut out = vec![0.0; n + 1];
    walk.run_observed(x, n, |k, mass| {
        let expectation: f64 = mass
            .entries()
            .map(|(s, m)| {
                let dot: f64 = x0.iter().zip(&s).map(|(a, &b)| a * b as f64).sum();
                m * (-dot).exp()
            })
            .sum();
        out[k] = (k as f64 * log_l + x0_dot_x).exp() * expectation;
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    fn ex1() -> FiniteDistribution {
        FiniteDistribution::from_integer_atoms(&[&[1, -1], &[-1, 1], &[-1, -1]], &[(1, 4), (1, 4), (1, 2)]).unwrap()
    }

    fn ex2() -> FiniteDistribution {
        FiniteDistribution::from_integer_atoms(&[&[-1, 0], &[0, 1], &[0, -1]], &[(1, 5), (3, 10), (1, 2)]).unwrap()
    }

    #[test]
    fn ratio_and_root() {
        let geometric: Vec<f64> = (0..=20).map(|k| 0.5f64.powi(k)).collect();
        assert!((ratio_rate(&geometric) - 0.5).abs() < 1e-14);
        assert!((nth_root_rate(&geometric) - 0.5).abs() < 1e-14);
        assert_eq!(ratio_rate(&[1.0, 0.0]), 0.0);
        assert!(ratio_rate(&[1.0]).is_nan());
    }

    #[test]
    fn spectral_engine_example1() {
        let d = ex1();
        let ctx = RateContext::new(&d).unwrap();
        let cfg = EngineConfig::new(Engine::Spectral, 20);
        let r = estimate_rate(&d, &ctx, &ints(&[1, 1]), &cfg, Execution::Sequential).unwrap();
        assert!((r.rate - 0.25 * 2f64.sqrt()).abs() < 1e-9);
        assert_eq!(r.truncation_converged, Some(true));
        assert!(r.within_bound());
        assert!(r.curve.is_nonincreasing());
    }

    #[test]
    fn sweep_orders_by_depth() {
        let d = ex1();
        let ctx = RateContext::new(&d).unwrap();
        let cfg = EngineConfig::new(Engine::Spectral, 10);
        let xs = vec![ints(&[3, 3]), ints(&[1, 1]), ints(&[2, 2])];
        let rs = rate_sweep(&d, &ctx, &xs, &cfg, Execution::Parallel).unwrap();
        let depths: Vec<f64> = rs.iter().map(|r| r.d_of_x).collect();
        assert_eq!(depths, vec![1.0, 2.0, 3.0]);
        assert!(rs.windows(2).all(|w| w[0].rate <= w[1].rate));
    }

    #[test]
    fn cramer_identity_matches_direct_dp() {
        let d = ex2();
        let x = [2, 1];
        let t = dp::default_truncation(&d, &x, 8, None);
        let (direct, _) = survival_dp(&d, &x, 8, None).unwrap();
        let rhs = cramer_identity_dp(&d, &[0.2, 0.4], &x, 8, t.caps).unwrap();
        for (a, b) in direct.survival.iter().zip(&rhs) {
            assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn non_lattice_engines() {
        let d = FiniteDistribution::new(
            1,
            vec![
                crate::distribution::Atom::new(vec![rational::ratio(1, 2)], rational::ratio(1, 2)),
                crate::distribution::Atom::new(vec![rational::ratio(-1, 2)], rational::ratio(1, 2)),
            ],
        )
        .unwrap();
        let ctx = RateContext::new(&d).unwrap();
        let x = ints(&[1]);
        let err = estimate_rate(&d, &ctx, &x, &EngineConfig::new(Engine::Dp, 10), Execution::Sequential).unwrap_err();
        assert_eq!(err, RatesError::NotLattice);
        let mut cfg = EngineConfig::new(Engine::Mc, 10);
        cfg.samples = 500;
        let r = estimate_rate(&d, &ctx, &x, &cfg, Execution::Sequential).unwrap();
        assert!(r.curve.is_nonincreasing());
    }
}
