//! Two-class linear discriminant with pooled covariance and equal priors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative ridge added only when the pooled covariance is singular.
const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub w: Vec<f64>,
    pub b: f64,
}

impl LdaModel {
    /// `y > 0` marks the positive class.
    pub fn fit(points: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let d = points.first().map(Vec::len).unwrap_or(0);
        let mut means = [DVector::zeros(d), DVector::zeros(d)];
        let mut counts = [0usize; 2];
        for (p, &t) in points.iter().zip(y) {
            let c = usize::from(t <= 0.0);
            means[c] += DVector::from_row_slice(p);
            counts[c] += 1;
        }
        if counts.contains(&0) {
            return Err(Error::InsufficientData("LDA needs both classes".into()));
        }
        for c in 0..2 {
            means[c] /= counts[c] as f64;
        }
        let mut pooled = DMatrix::zeros(d, d);
        for (p, &t) in points.iter().zip(y) {
            let r = DVector::from_row_slice(p) - &means[usize::from(t <= 0.0)];
            pooled.ger(1.0, &r, &r, 1.0);
        }
        pooled /= (points.len().saturating_sub(2)).max(1) as f64;
        let diff = &means[0] - &means[1];
        let w = match pooled.clone().cholesky() {
            Some(ch) => ch.solve(&diff),
            None => {
                let nu = (pooled.trace() / d as f64).max(f64::MIN_POSITIVE);
                let ridged = pooled + DMatrix::identity(d, d) * (RIDGE * nu);
                ridged
                    .cholesky()
                    .ok_or_else(|| Error::NotSpd("pooled covariance is degenerate".into()))?
                    .solve(&diff)
            }
        };
        let b = -w.dot(&(&means[0] + &means[1])) / 2.0;
        Ok(Self {
            w: w.iter().copied().collect(),
            b,
        })
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn symmetric_means_put_boundary_at_midpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = [1.5, -0.5];
        let mut pts = Vec::new();
        let mut y = Vec::new();
        for _ in 0..200 {
            let e: Vec<f64> = (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            pts.push(vec![m[0] + e[0], m[1] + e[1]]);
            pts.push(vec![-m[0] - e[0], -m[1] - e[1]]);
            y.extend([1.0, -1.0]);
        }
        let lda = LdaModel::fit(&pts, &y).unwrap();
        assert!(lda.b.abs() < 1e-12);
        assert!(lda.decision(&[0.0, 0.0]).abs() < 1e-12);
        assert!(lda.decision(&m) > 0.0);
    }

    #[test]
    fn single_class_rejected() {
        assert!(LdaModel::fit(&[vec![1.0], vec![2.0]], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn collinear_features_fall_back_to_ridge() {
        let pts = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![-1.0, -2.0], vec![-2.0, -4.0]];
        let lda = LdaModel::fit(&pts, &[1.0, 1.0, -1.0, -1.0]).unwrap();
        assert!(lda.decision(&[1.5, 3.0]) > 0.0);
        assert!(lda.decision(&[-1.5, -3.0]) < 0.0);
    }
}
