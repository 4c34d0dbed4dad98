//! Value functions: a trainer plus a held-out score in `[0, 1]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: f64,
}

impl Example {
    pub fn new(features: Vec<f64>, label: f64) -> Self {
        Self { features, label }
    }
}

/// Shared feature width of a collection of example sets.
pub fn feature_dim<'a>(sets: impl IntoIterator<Item = &'a [Example]>) -> Result<Option<usize>> {
    let mut dim = None;
    for set in sets {
        for ex in set {
            if ex.features.iter().chain([&ex.label]).any(|x| !x.is_finite()) {
                return Err(Error::data("example contains a non-finite value"));
            }
            match dim {
                None => dim = Some(ex.features.len()),
                Some(d) if d != ex.features.len() => {
                    return Err(Error::data(format!(
                        "feature width mismatch: {d} vs {}",
                        ex.features.len()
                    )))
                }
                _ => {}
            }
        }
    }
    Ok(dim)
}

pub trait ValueFunction: Sync {
    /// Parameters fitted on `data`. Must be deterministic.
    fn train(&self, data: &[Example], dim: usize) -> Result<Vec<f64>>;
    /// Held-out score in `[0, 1]`.
    fn evaluate(&self, params: &[f64], holdout: &[Example]) -> f64;
}

/// A value function whose training objective is `Σ loss + (λ/2)‖θ‖²`.
pub trait Differentiable: ValueFunction {
    /// Summed loss gradient over `data`, without the regularizer.
    fn loss_gradient(&self, params: &[f64], data: &[Example]) -> Vec<f64>;
    /// Product of the regularized objective's Hessian with `v`.
    fn hessian_vector(&self, params: &[f64], data: &[Example], v: &[f64]) -> Vec<f64>;
    fn hessian(&self, params: &[f64], data: &[Example]) -> DMatrix<f64>;
    /// Gradient of a smooth surrogate of the held-out value.
    fn value_gradient(&self, params: &[f64], holdout: &[Example]) -> Vec<f64>;
}

fn augmented(x: &[f64]) -> impl Iterator<Item = f64> + '_ {
    x.iter().copied().chain([1.0])
}

fn dot_aug(params: &[f64], x: &[f64]) -> f64 {
    params.iter().zip(augmented(x)).map(|(p, x)| p * x).sum()
}

fn axpy_aug(acc: &mut [f64], a: f64, x: &[f64]) {
    for (o, xi) in acc.iter_mut().zip(augmented(x)) {
        *o += a * xi;
    }
}

fn check_params(params: Vec<f64>) -> Result<Vec<f64>> {
    if params.iter().all(|p| p.is_finite()) {
        Ok(params)
    } else {
        Err(Error::Numeric {
            context: None,
            reason: "training diverged".into(),
            residual: f64::INFINITY,
        })
    }
}

/// Ridge regression with intercept, solved in closed form. Value is
/// `1 / (1 + MSE)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeRegression {
    pub l2: f64,
}

impl Default for RidgeRegression {
    fn default() -> Self {
        Self { l2: 1.0 }
    }
}

impl RidgeRegression {
    fn mse(&self, params: &[f64], holdout: &[Example]) -> f64 {
        holdout
            .iter()
            .map(|e| (dot_aug(params, &e.features) - e.label).powi(2))
            .sum::<f64>()
            / holdout.len() as f64
    }
}

impl ValueFunction for RidgeRegression {
    fn train(&self, data: &[Example], dim: usize) -> Result<Vec<f64>> {
        let p = dim + 1;
        let mut a = DMatrix::<f64>::identity(p, p) * self.l2;
        let mut b = DVector::<f64>::zeros(p);
        for e in data {
            let x = DVector::from_iterator(p, augmented(&e.features));
            a += &x * x.transpose();
            b += &x * e.label;
        }
        let solved = a
            .cholesky()
            .ok_or_else(|| Error::Numeric {
                context: None,
                reason: "normal equations are not positive definite".into(),
                residual: f64::NAN,
            })?
            .solve(&b);
        check_params(solved.iter().copied().collect())
    }

    fn evaluate(&self, params: &[f64], holdout: &[Example]) -> f64 {
        1.0 / (1.0 + self.mse(params, holdout))
    }
}

impl Differentiable for RidgeRegression {
    fn loss_gradient(&self, params: &[f64], data: &[Example]) -> Vec<f64> {
        let mut g = vec![0.0; params.len()];
        for e in data {
            axpy_aug(&mut g, dot_aug(params, &e.features) - e.label, &e.features);
        }
        g
    }

    fn hessian_vector(&self, _params: &[f64], data: &[Example], v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().map(|x| self.l2 * x).collect();
        for e in data {
            axpy_aug(&mut out, dot_aug(v, &e.features), &e.features);
        }
        out
    }

    fn hessian(&self, params: &[f64], data: &[Example]) -> DMatrix<f64> {
        let p = params.len();
        let mut h = DMatrix::<f64>::identity(p, p) * self.l2;
        for e in data {
            let x = DVector::from_iterator(p, augmented(&e.features));
            h += &x * x.transpose();
        }
        h
    }

    fn value_gradient(&self, params: &[f64], holdout: &[Example]) -> Vec<f64> {
        let m = holdout.len() as f64;
        let scale = -(1.0 + self.mse(params, holdout)).powi(-2) * 2.0 / m;
        let mut g = vec![0.0; params.len()];
        for e in holdout {
            axpy_aug(&mut g, scale * (dot_aug(params, &e.features) - e.label), &e.features);
        }
        g
    }
}

/// L2-regularized logistic regression with intercept, fitted by full-batch
/// gradient descent. Labels are 0 or 1; value is held-out accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub l2: f64,
    pub learning_rate: f64,
    pub steps: usize,
}

impl Default for LogisticRegression {
    fn default() -> Self {
        Self {
            l2: 1.0,
            learning_rate: 1.0,
            steps: 2000,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ValueFunction for LogisticRegression {
    fn train(&self, data: &[Example], dim: usize) -> Result<Vec<f64>> {
        let mut params = vec![0.0; dim + 1];
        let step = self.learning_rate / (data.len() as f64 + self.l2);
        for _ in 0..self.steps {
            let mut g = self.loss_gradient(&params, data);
            for (gi, p) in g.iter_mut().zip(&params) {
                *gi += self.l2 * p;
            }
            for (p, gi) in params.iter_mut().zip(&g) {
                *p -= step * gi;
            }
        }
        check_params(params)
    }

    fn evaluate(&self, params: &[f64], holdout: &[Example]) -> f64 {
        let correct = holdout
            .iter()
            .filter(|e| (dot_aug(params, &e.features) >= 0.0) == (e.label >= 0.5))
            .count();
        correct as f64 / holdout.len() as f64
    }
}

impl Differentiable for LogisticRegression {
    fn loss_gradient(&self, params: &[f64], data: &[Example]) -> Vec<f64> {
        let mut g = vec![0.0; params.len()];
        for e in data {
            axpy_aug(&mut g, sigmoid(dot_aug(params, &e.features)) - e.label, &e.features);
        }
        g
    }

    fn hessian_vector(&self, params: &[f64], data: &[Example], v: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().map(|x| self.l2 * x).collect();
        for e in data {
            let p = sigmoid(dot_aug(params, &e.features));
            axpy_aug(&mut out, p * (1.0 - p) * dot_aug(v, &e.features), &e.features);
        }
        out
    }

    fn hessian(&self, params: &[f64], data: &[Example]) -> DMatrix<f64> {
        let n = params.len();
        let mut h = DMatrix::<f64>::identity(n, n) * self.l2;
        for e in data {
            let p = sigmoid(dot_aug(params, &e.features));
            let x = DVector::from_iterator(n, augmented(&e.features));
            h += (&x * x.transpose()) * (p * (1.0 - p));
        }
        h
    }

    /// Gradient of the negative mean held-out log loss.
    fn value_gradient(&self, params: &[f64], holdout: &[Example]) -> Vec<f64> {
        let mut g = self.loss_gradient(params, holdout);
        let m = holdout.len() as f64;
        g.iter_mut().for_each(|x| *x /= -m);
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, f64)]) -> Vec<Example> {
        points.iter().map(|(x, y)| Example::new(vec![*x], *y)).collect()
    }

    fn finite_difference<F: Fn(&[f64]) -> f64>(f: F, at: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..at.len())
            .map(|k| {
                let mut up = at.to_vec();
                let mut down = at.to_vec();
                up[k] += h;
                down[k] -= h;
                (f(&up) - f(&down)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn ridge_fits_exact_line_with_tiny_penalty() {
        let data = line(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        let r = RidgeRegression { l2: 1e-10 };
        let theta = r.train(&data, 1).unwrap();
        assert!((theta[0] - 2.0).abs() < 1e-6 && (theta[1] - 1.0).abs() < 1e-6);
        assert!((r.evaluate(&theta, &data) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ridge_gradients_match_finite_differences() {
        let data = line(&[(0.0, 1.0), (1.0, 2.5), (2.0, 5.5)]);
        let holdout = line(&[(0.5, 2.0), (1.5, 4.0)]);
        let r = RidgeRegression { l2: 0.7 };
        let theta = vec![0.3, -0.2];
        let loss = |t: &[f64]| {
            data.iter()
                .map(|e| 0.5 * (dot_aug(t, &e.features) - e.label).powi(2))
                .sum::<f64>()
        };
        let fd = finite_difference(loss, &theta);
        for (a, b) in r.loss_gradient(&theta, &data).iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6);
        }
        let fd = finite_difference(|t| r.evaluate(t, &holdout), &theta);
        for (a, b) in r.value_gradient(&theta, &holdout).iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn hessian_vector_agrees_with_explicit_hessian() {
        let data = line(&[(0.0, 0.0), (1.0, 1.0), (-1.5, 0.0), (2.0, 1.0)]);
        let theta = vec![0.4, -0.1];
        let v = [0.7, -1.3];
        let logistic = LogisticRegression::default();
        let ridge = RidgeRegression::default();
        for (hv, h) in [
            (logistic.hessian_vector(&theta, &data, &v), logistic.hessian(&theta, &data)),
            (ridge.hessian_vector(&theta, &data, &v), ridge.hessian(&theta, &data)),
        ] {
            let explicit = h * DVector::from_column_slice(&v);
            for (a, b) in hv.iter().zip(explicit.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn logistic_separates_and_is_deterministic() {
        let data = line(&[(-2.0, 0.0), (-1.0, 0.0), (1.0, 1.0), (2.0, 1.0)]);
        let l = LogisticRegression::default();
        let a = l.train(&data, 1).unwrap();
        let b = l.train(&data, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(l.evaluate(&a, &data), 1.0);
        // Converged: the regularized gradient vanishes.
        let mut g = l.loss_gradient(&a, &data);
        g.iter_mut().zip(&a).for_each(|(g, p)| *g += l.l2 * p);
        assert!(g.iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn feature_width_mismatch_rejected() {
        let a = vec![Example::new(vec![1.0], 0.0)];
        let b = vec![Example::new(vec![1.0, 2.0], 0.0)];
        assert!(feature_dim([&a[..], &b[..]]).is_err());
        assert_eq!(feature_dim([&a[..]]).unwrap(), Some(1));
    }
}
