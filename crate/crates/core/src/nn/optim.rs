use alloc::vec::Vec;

use crate::linalg::Matrix;

/// Adam with bias-corrected moments. Each parameter tensor has its own
/// learning rate and L2 weight decay (added to the gradient).
#[derive(Debug, Clone)]
pub struct Adam {
    lr: Vec<f64>,
    weight_decay: Vec<f64>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(params: &[Matrix], lr: Vec<f64>, weight_decay: Vec<f64>) -> Self {
        assert_eq!(params.len(), lr.len());
        assert_eq!(params.len(), weight_decay.len());
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) {
        self.step += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (lr, wd) = (self.lr[k], self.weight_decay[k]);
            let m = self.m[k].as_mut_slice();
            let v = self.v[k].as_mut_slice();
            for (((x, &gx), mi), vi) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                let gx = gx + wd * *x;
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gx;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gx * gx;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x -= lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut params = vec![Matrix::from_rows(&[&[1.0, -2.0]]).unwrap()];
        let before = params.clone();
        let mut opt = Adam::new(&params, vec![0.0], vec![5e-4]);
        opt.step(&mut params, &[Matrix::from_rows(&[&[0.3, 7.0]]).unwrap()]);
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = vec![Matrix::from_rows(&[&[1.0, 1.0]]).unwrap()];
        let mut opt = Adam::new(&params, vec![0.1], vec![0.0]);
        opt.step(&mut params, &[Matrix::from_rows(&[&[2.0, -0.5]]).unwrap()]);
        // Bias correction makes the first step ±lr (up to eps).
        assert!((params[0][(0, 0)] - 0.9).abs() < 1e-8);
        assert!((params[0][(0, 1)] - 1.1).abs() < 1e-8);
    }
}
