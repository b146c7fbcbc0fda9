//! One-hidden-layer perceptron (tanh hidden, logistic output) trained by
//! scaled conjugate gradient on mean cross-entropy.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const SIGMA0: f64 = 1e-4;
const LAMBDA0: f64 = 1e-6;
const LAMBDA_MAX: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub inputs: usize,
    pub hidden: usize,
}

impl MlpShape {
    /// Parameter layout: `W1` row-major (`hidden × inputs`), `b1`, `w2`, `b2`.
    pub fn n_params(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Unpacked {
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DVector<f64>,
    b2: f64,
}

fn unpack(shape: MlpShape, theta: &[f64]) -> Unpacked {
    let (h, d) = (shape.hidden, shape.inputs);
    Unpacked {
        w1: DMatrix::from_row_slice(h, d, &theta[..h * d]),
        b1: DVector::from_row_slice(&theta[h * d..h * d + h]),
        w2: DVector::from_row_slice(&theta[h * d + h..h * d + 2 * h]),
        b2: theta[h * d + 2 * h],
    }
}

fn hidden_activations(p: &Unpacked, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut a = &p.w1 * x;
    for mut col in a.column_iter_mut() {
        col += &p.b1;
        col.apply(|v| *v = v.tanh());
    }
    a
}

/// Output logits for the columns of `x` (`inputs × n`).
pub fn logits(shape: MlpShape, theta: &[f64], x: &DMatrix<f64>) -> Vec<f64> {
    let p = unpack(shape, theta);
    let a = hidden_activations(&p, x);
    (a.transpose() * &p.w2).iter().map(|o| o + p.b2).collect()
}

/// Mean cross-entropy and its gradient. `y` holds 1 for the positive class
/// and 0 otherwise.
pub fn loss_and_gradient(shape: MlpShape, theta: &[f64], x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let p = unpack(shape, theta);
    let n = x.ncols() as f64;
    let a = hidden_activations(&p, x);
    let o: Vec<f64> = (a.transpose() * &p.w2).iter().map(|v| v + p.b2).collect();
    let loss = o.iter().zip(y).map(|(&oi, &yi)| softplus(oi) - yi * oi).sum::<f64>() / n;
    let go = DVector::from_iterator(o.len(), o.iter().zip(y).map(|(&oi, &yi)| (sigmoid(oi) - yi) / n));

    let g_w2 = &a * &go;
    let g_b2 = go.sum();
    let mut gz = &p.w2 * go.transpose();
    gz.component_mul_assign(&a.map(|v| 1.0 - v * v));
    let g_w1 = &gz * x.transpose();
    let g_b1 = gz.column_sum();

    let mut grad = Vec::with_capacity(shape.n_params());
    for r in 0..shape.hidden {
        grad.extend(g_w1.row(r).iter());
    }
    grad.extend(g_b1.iter());
    grad.extend(g_w2.iter());
    grad.push(g_b2);
    (loss, grad)
}

/// Uniform in `±1/√fan-in` for each layer.
pub fn init_params(shape: MlpShape, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r1 = 1.0 / (shape.inputs.max(1) as f64).sqrt();
    let r2 = 1.0 / (shape.hidden as f64).sqrt();
    let mut theta = Vec::with_capacity(shape.n_params());
    for _ in 0..shape.hidden * shape.inputs + shape.hidden {
        theta.push(rng.random_range(-r1..=r1));
    }
    for _ in 0..shape.hidden + 1 {
        theta.push(rng.random_range(-r2..=r2));
    }
    theta
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(w: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    w.iter().zip(p).map(|(a, b)| a + alpha * b).collect()
}

/// Møller's scaled conjugate gradient for `iterations` steps.
pub fn scg<F>(mut w: Vec<f64>, iterations: usize, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = w.len();
    let (mut e, g) = f(&w);
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut lambda = LAMBDA0;
    let mut lambda_bar = 0.0;
    let mut success = true;
    let mut delta = 0.0;
    for k in 1..=iterations {
        let p2 = dot(&p, &p);
        if p2 == 0.0 || dot(&r, &r) < 1e-30 {
            break;
        }
        if success {
            let sigma = SIGMA0 / p2.sqrt();
            let (_, g_shift) = f(&axpy(&w, sigma, &p));
            // r = −E'(w), so E'(w + σp) − E'(w) = g_shift + r
            let s: Vec<f64> = g_shift.iter().zip(&r).map(|(gs, ri)| (gs + ri) / sigma).collect();
            delta = dot(&p, &s);
        }
        delta += (lambda - lambda_bar) * p2;
        if delta <= 0.0 {
            lambda_bar = 2.0 * (lambda - delta / p2);
            delta = -delta + lambda * p2;
            lambda = lambda_bar;
        }
        let mu = dot(&p, &r);
        let alpha = mu / delta;
        let w_new = axpy(&w, alpha, &p);
        let (e_new, g_new) = f(&w_new);
        let comparison = 2.0 * delta * (e - e_new) / (mu * mu);
        if comparison >= 0.0 && e_new.is_finite() {
            w = w_new;
            e = e_new;
            let r_new: Vec<f64> = g_new.iter().map(|v| -v).collect();
            lambda_bar = 0.0;
            success = true;
            if k % n == 0 {
                p = r_new.clone();
            } else {
                let beta = (dot(&r_new, &r_new) - dot(&r_new, &r)) / mu;
                p = axpy(&r_new, beta, &p);
            }
            r = r_new;
            if comparison >= 0.75 {
                lambda /= 4.0;
            }
        } else {
            lambda_bar = lambda;
            success = false;
        }
        if comparison < 0.25 {
            lambda += delta * (1.0 - comparison) / p2;
        }
        lambda = lambda.min(LAMBDA_MAX);
    }
    w
}

/// Trained network with the input standardization it was fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub shape: MlpShape,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub theta: Vec<f64>,
}

impl MlpModel {
    /// `points` are samples, `y` is 1 for the positive class and 0 otherwise.
    pub fn fit(points: &[Vec<f64>], y: &[f64], hidden: usize, iterations: usize, seed: u64) -> Result<Self> {
        let d = points.first().map(Vec::len).ok_or_else(|| Error::InsufficientData("no samples".into()))?;
        let n = points.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
        let scale: Vec<f64> = (0..d)
            .map(|j| {
                let v = points.iter().map(|p| (p[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let shape = MlpShape { inputs: d, hidden };
        let mut model = Self {
            shape,
            mean,
            scale,
            theta: Vec::new(),
        };
        let x = model.standardize(points);
        model.theta = scg(init_params(shape, seed), iterations, |t| loss_and_gradient(shape, t, &x, y));
        Ok(model)
    }

    fn standardize(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(self.shape.inputs, points.len(), |i, j| (points[j][i] - self.mean[i]) / self.scale[i])
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        logits(self.shape, &self.theta, &self.standardize(&[x.to_vec()]))[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn data(n: usize, d: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(d, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = (0..n).map(|i| if x[(0, i)] + 0.5 * x[(1, i)] > 0.0 { 1.0 } else { 0.0 }).collect();
        (x, y)
    }

    fn columns(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
        x.column_iter().map(|c| c.iter().copied().collect()).collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let shape = MlpShape { inputs: 4, hidden: 15 };
        let (x, y) = data(30, 4, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let theta: Vec<f64> = (0..shape.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, g) = loss_and_gradient(shape, &theta, &x, &y);
            let h = 1e-6;
            let num: Vec<f64> = (0..theta.len())
                .map(|k| {
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[k] += h;
                    tm[k] -= h;
                    (loss_and_gradient(shape, &tp, &x, &y).0 - loss_and_gradient(shape, &tm, &x, &y).0) / (2.0 * h)
                })
                .collect();
            let diff: f64 = g.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff / norm < 1e-5, "{}", diff / norm);
        }
    }

    #[test]
    fn scg_lowers_loss_and_fits_linear_rule() {
        let (x, y) = data(100, 3, 3);
        let points = columns(&x);
        let m = MlpModel::fit(&points, &y, 15, 150, 9).unwrap();
        let correct = points.iter().zip(&y).filter(|(p, t)| (m.logit(p) > 0.0) == (**t == 1.0)).count();
        assert!(correct >= 97, "{correct}");
        let x_std = m.standardize(&points);
        let start = loss_and_gradient(m.shape, &init_params(m.shape, 9), &x_std, &y).0;
        let end = loss_and_gradient(m.shape, &m.theta, &x_std, &y).0;
        assert!(end < start * 0.2);
    }

    #[test]
    fn deterministic() {
        let (x, y) = data(40, 3, 4);
        let points = columns(&x);
        let a = MlpModel::fit(&points, &y, 15, 50, 1).unwrap();
        let b = MlpModel::fit(&points, &y, 15, 50, 1).unwrap();
        assert_eq!(a, b);
    }
}
