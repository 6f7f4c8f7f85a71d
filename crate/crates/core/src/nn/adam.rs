use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    t: u64,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_eps(mut self, eps: T) -> Self {
        self.eps = eps;
        self
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [Matrix<T>], grads: &[Matrix<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::LengthMismatch {
                context: "adam params vs grads",
                left: params.len(),
                right: grads.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::DimensionMismatch {
                    context: "adam gradient shape",
                    expected: p.len(),
                    got: g.len(),
                });
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len()
            || self.m.iter().zip(params.iter()).any(|(m, p)| m.shape() != p.shape())
        {
            return Err(Error::DimensionMismatch {
                context: "adam moment shape",
                expected: self.m.len(),
                got: params.len(),
            });
        }
        self.t += 1;
        let t = self.t as i32;
        let one = T::one();
        let c1 = one - self.beta1.powi(t);
        let c2 = one - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let it = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice().iter_mut()));
            for ((x, &gi), (mi, vi)) in it {
                *mi = self.beta1 * *mi + (one - self.beta1) * gi;
                *vi = self.beta2 * *vi + (one - self.beta2) * gi * gi;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *x = *x - self.lr * mhat / (vhat.sqrt() + self.eps);
                debug_assert!(x.is_finite(), "adam produced a non-finite parameter");
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so their joint L2 norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm<T: Scalar>(grads: &mut [Matrix<T>], max_norm: T) -> T {
    let norm = grads
        .iter()
        .flat_map(|g| g.as_slice())
        .map(|&x| x * x)
        .sum::<T>()
        .sqrt();
    if norm > max_norm && norm > T::zero() {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for x in g.as_mut_slice() {
                *x = *x * s;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = vec![Matrix::row_vector(vec![1.0, -2.0])];
        let g = vec![Matrix::zeros(1, 2)];
        let mut adam = Adam::new(0.1);
        for _ in 0..5 {
            adam.step(&mut p, &g).unwrap();
        }
        assert_eq!(p[0].as_slice(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m1 = 0.1, v1 = 0.001; bias-corrected ratio is 1/(1 + eps)
        let mut p = vec![Matrix::scalar(0.5f64)];
        let mut adam = Adam::new(0.001);
        adam.step(&mut p, &[Matrix::scalar(1.0)]).unwrap();
        let moved = 0.5 - p[0].get(0, 0);
        assert!((moved - 0.001 / (1.0 + 1e-8)).abs() < 1e-12, "{moved}");
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut p = vec![Matrix::zeros(2, 2)];
        let mut adam = Adam::<f64>::new(0.1);
        assert!(adam.step(&mut p, &[Matrix::zeros(1, 2)]).is_err());
        assert!(adam.step(&mut p, &[]).is_err());
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut p = vec![Matrix::row_vector(vec![0.3, 0.4])];
            let mut adam = Adam::new(0.01);
            for k in 0..100 {
                let g = Matrix::row_vector(vec![(k as f64).sin(), p[0].get(0, 0)]);
                adam.step(&mut p, &[g]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn clipping() {
        let mut g = vec![Matrix::row_vector(vec![3.0f64, 4.0])];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0].get(0, 0) - 0.6).abs() < 1e-12);
    }
}
