//! Laplace transform L(z) = Σ wᵢ exp⟨z, yᵢ⟩ of a finite measure, its
//! derivatives, and the exponential (Cramér) tilt.
//!
//! Sums are evaluated with the largest exponent factored out, so only the
//! final scale `e^M` can overflow.

use thiserror::Error;

use crate::distribution::FloatMeasure;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LaplaceError {
    #[error("Laplace transform overflows f64 (log value {log_value})")]
    Overflow { log_value: f64 },
    #[error("argument has {found} coordinates, measure lives in dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite argument")]
    NonFinite,
}

/// A tilt location together with the transform value there.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltPoint {
    pub vector: Vec<f64>,
    pub value: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check(m: &FloatMeasure, z: &[f64]) -> Result<(), LaplaceError> {
    if z.len() != m.dimension {
        return Err(LaplaceError::DimensionMismatch {
            expected: m.dimension,
            found: z.len(),
        });
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(LaplaceError::NonFinite);
    }
    Ok(())
}

/// Shift `M = maxᵢ⟨z,yᵢ⟩` and the scaled terms `wᵢ e^{⟨z,yᵢ⟩−M}`.
fn scaled_terms(m: &FloatMeasure, z: &[f64]) -> (f64, Vec<f64>) {
    let exps: Vec<f64> = m.points.iter().map(|y| dot(z, y)).collect();
    let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let terms = exps
        .iter()
        .zip(&m.weights)
        .map(|(e, w)| w * (e - shift).exp())
        .collect();
    (shift, terms)
}

fn rescale(shift: f64, scaled: f64) -> Result<f64, LaplaceError> {
    if scaled == 0.0 {
        return Ok(0.0);
    }
    let scale = shift.exp();
    let direct = scaled * scale;
    if scale.is_finite() && direct.is_finite() {
        return Ok(direct);
    }
    let log_value = shift + scaled.abs().ln();
    if log_value >= f64::MAX.ln() {
        return Err(LaplaceError::Overflow { log_value });
    }
    Ok(scaled.signum() * log_value.exp())
}

pub fn log_eval(m: &FloatMeasure, z: &[f64]) -> Result<f64, LaplaceError> {
    check(m, z)?;
    let (shift, terms) = scaled_terms(m, z);
    Ok(shift + terms.iter().sum::<f64>().ln())
}

pub fn eval(m: &FloatMeasure, z: &[f64]) -> Result<f64, LaplaceError> {
    check(m, z)?;
    let (shift, terms) = scaled_terms(m, z);
    rescale(shift, terms.iter().sum())
}

pub fn grad(m: &FloatMeasure, z: &[f64]) -> Result<Vec<f64>, LaplaceError> {
    check(m, z)?;
    let (shift, terms) = scaled_terms(m, z);
    let mut g = vec![0.0; m.dimension];
    for (y, t) in m.points.iter().zip(&terms) {
        for (gi, yi) in g.iter_mut().zip(y) {
            *gi += t * yi;
        }
    }
    g.into_iter().map(|gi| rescale(shift, gi)).collect()
}

pub fn hess(m: &FloatMeasure, z: &[f64]) -> Result<Vec<Vec<f64>>, LaplaceError> {
    check(m, z)?;
    let d = m.dimension;
    let (shift, terms) = scaled_terms(m, z);
    let mut h = vec![vec![0.0; d]; d];
    for (y, t) in m.points.iter().zip(&terms) {
        for i in 0..d {
            for j in i..d {
                h[i][j] += t * y[i] * y[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            h[i][j] = rescale(shift, h[i][j])?;
            h[j][i] = h[i][j];
        }
    }
    Ok(h)
}

/// Value, gradient and Hessian in one pass, all divided by the common factor
/// `e^M` that `shift` reports. Used by the optimizer, which only needs
/// ratios and works on log scale when values get large.
pub fn scaled_derivatives(m: &FloatMeasure, z: &[f64]) -> (f64, f64, Vec<f64>, Vec<Vec<f64>>) {
    let d = m.dimension;
    let (shift, terms) = scaled_terms(m, z);
    let mut value = 0.0;
    let mut g = vec![0.0; d];
    let mut h = vec![vec![0.0; d]; d];
    for (y, t) in m.points.iter().zip(&terms) {
        value += t;
        for i in 0..d {
            g[i] += t * y[i];
            for j in i..d {
                h[i][j] += t * y[i] * y[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            h[i][j] = h[j][i];
        }
    }
    (shift, value, g, h)
}

/// Cramér tilt: weights `wᵢ e^{⟨x₀,yᵢ⟩} / L(x₀)` on the same support.
pub fn tilt(m: &FloatMeasure, x0: &[f64]) -> Result<FloatMeasure, LaplaceError> {
    check(m, x0)?;
    let (_, terms) = scaled_terms(m, x0);
    let total: f64 = terms.iter().sum();
    Ok(FloatMeasure {
        dimension: m.dimension,
        points: m.points.clone(),
        weights: terms.iter().map(|t| t / total).collect(),
    })
}

pub fn tilt_point(m: &FloatMeasure, x0: &[f64]) -> Result<TiltPoint, LaplaceError> {
    Ok(TiltPoint {
        vector: x0.to_vec(),
        value: eval(m, x0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::FiniteDistribution;

    fn example1(q: (i64, i64), p: (i64, i64)) -> FloatMeasure {
        FiniteDistribution::from_integer_atoms(&[&[1, -1], &[-1, 1], &[-1, -1]], &[q, q, p])
            .unwrap()
            .to_float()
    }

    fn example2() -> FloatMeasure {
        FiniteDistribution::from_integer_atoms(&[&[-1, 0], &[0, 1], &[0, -1]], &[(1, 5), (3, 10), (1, 2)])
            .unwrap()
            .to_float()
    }

    fn example3() -> FloatMeasure {
        FiniteDistribution::from_integer_atoms(&[&[-1, -1], &[-1, 1], &[1, -1]], &[(1, 3), (1, 3), (1, 3)])
            .unwrap()
            .to_float()
    }

    #[test]
    fn value_at_origin_is_one() {
        for m in [example1((1, 4), (1, 2)), example2(), example3()] {
            assert!((eval(&m, &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn example1_diagonal_closed_form() {
        let m = example1((1, 4), (1, 2));
        for t in [0.0, 0.5, 3.0, 10.0] {
            let expected = 0.5 + 0.5 * (-2.0 * t as f64).exp();
            assert!((eval(&m, &[t, t]).unwrap() - expected).abs() < 1e-14);
        }
        // general point: 2q cosh(i - j) + p e^{-(i+j)}
        let (i, j) = (0.7f64, -0.3f64);
        let expected = 0.5 * (i - j).cosh() + 0.5 * (-(i + j)).exp();
        assert!((eval(&m, &[i, j]).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn example2_closed_form() {
        let m = example2();
        let (a, b, g) = (0.2, 0.3, 0.5);
        for (i, j) in [(0.0, 0.0), (1.0, 2.0), (-0.5, 0.25)] {
            let expected = a * (-i as f64).exp() + b * (j as f64).exp() + g * (-j as f64).exp();
            assert!((eval(&m, &[i, j]).unwrap() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_at_origin_is_mean_and_point_mass() {
        let m = example2();
        let g = grad(&m, &[0.0, 0.0]).unwrap();
        assert!((g[0] + 0.2).abs() < 1e-15 && (g[1] + 0.2).abs() < 1e-15);

        let pm = FiniteDistribution::from_integer_atoms(&[&[2, -1]], &[(1, 1)]).unwrap().to_float();
        let z = [0.3, 0.4];
        let e = (0.6f64 - 0.4).exp();
        let g = grad(&pm, &z).unwrap();
        assert!((g[0] - 2.0 * e).abs() < 1e-14 && (g[1] + e).abs() < 1e-14);
    }

    #[test]
    fn central_difference_gradient_example3() {
        let m = example3();
        let z = [0.4, -0.2];
        let g = grad(&m, &z).unwrap();
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let h = 1e-5;
        for k in 0..2 {
            let mut zp = z;
            let mut zm = z;
            zp[k] += h;
            zm[k] -= h;
            let fd = (eval(&m, &zp).unwrap() - eval(&m, &zm).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + gnorm));
        }
    }

    #[test]
    fn overflow_is_reported_not_saturated() {
        let m = example2();
        // shifted evaluation at moderately large argument stays finite
        assert!(eval(&m, &[0.0, 700.0]).unwrap().is_finite());
        assert!(matches!(
            eval(&m, &[0.0, 800.0]),
            Err(LaplaceError::Overflow { .. })
        ));
        assert!((log_eval(&m, &[0.0, 800.0]).unwrap() - (800.0 + 0.3f64.ln())).abs() < 1e-9);
        assert_eq!(eval(&m, &[f64::NAN, 0.0]), Err(LaplaceError::NonFinite));
    }

    #[test]
    fn tilt_identity_and_drift() {
        let m = example3();
        let same = tilt(&m, &[0.0, 0.0]).unwrap();
        for (a, b) in same.weights.iter().zip(&m.weights) {
            assert!((a - b).abs() < 1e-15);
        }
        let x0 = [0.3, 0.8];
        let tilted = tilt(&m, &x0).unwrap();
        let l = eval(&m, &x0).unwrap();
        let g = grad(&m, &x0).unwrap();
        let drift = tilted.mean();
        for k in 0..2 {
            assert!((drift[k] - g[k] / l).abs() < 1e-14);
        }
    }

    #[test]
    fn hessian_is_symmetric_psd() {
        let m = example1((1, 4), (1, 2));
        let h = hess(&m, &[0.2, -0.1]).unwrap();
        assert_eq!(h[0][1], h[1][0]);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        assert!(h[0][0] >= 0.0 && det >= -1e-14);
    }
}
