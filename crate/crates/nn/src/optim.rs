//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl AdamW {
    pub fn new(params: &[Matrix], learning_rate: f64, weight_decay: f64) -> Self {
        let zeros = |p: &Matrix| Matrix::zeros(p.rows(), p.cols());
        AdamW {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// True when the moment buffers fit `params`.
    pub fn matches(&self, params: &[Matrix]) -> bool {
        self.m.len() == params.len() && self.m.iter().zip(params).all(|(m, p)| m.shape() == p.shape())
    }

    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) {
        assert!(self.matches(params), "optimizer state does not fit parameters");
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let lr = self.learning_rate;
        let decay = lr * self.weight_decay;
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pv, &gv), mv), vv) in
                p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut())
            {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let update = (*mv / c1) / ((*vv / c2).sqrt() + self.epsilon);
                *pv -= decay * *pv + lr * update;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic() {
        let mut p = vec![Matrix::from_vec(1, 2, vec![3.0, -2.0])];
        let mut opt = AdamW::new(&p, 0.1, 0.0);
        for _ in 0..500 {
            let g = vec![p[0].map(|x| 2.0 * x)];
            opt.step(&mut p, &g);
        }
        assert!(p[0].max_abs() < 1e-2);
    }

    #[test]
    fn zero_rate_leaves_parameters() {
        let mut p = vec![Matrix::from_vec(1, 2, vec![0.3, -0.7])];
        let before = p.clone();
        let mut opt = AdamW::new(&p, 0.0, 0.1);
        opt.step(&mut p, &[Matrix::from_vec(1, 2, vec![1.0, -5.0])]);
        assert_eq!(p, before);
    }

    #[test]
    fn decay_is_decoupled() {
        let mut p = vec![Matrix::from_vec(1, 1, vec![2.0])];
        let mut opt = AdamW::new(&p, 0.5, 0.1);
        opt.step(&mut p, &[Matrix::zeros(1, 1)]);
        assert!((p[0].get(0, 0) - 1.9).abs() < 1e-12);
    }
}
