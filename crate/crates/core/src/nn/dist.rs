//! Closed-form operations on diagonal-Gaussian and binary-categorical
//! action distributions, plus the partial derivatives the policy updates
//! need (with respect to means and log standard deviations).

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};

use crate::rng::Prng;

/// Per-state Gaussian with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Self {
        assert_eq!(mean.len(), std.len(), "mean/std length mismatch");
        debug_assert!(std.iter().all(|&s| s.is_finite() && s >= 0.0));
        DiagGaussian { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density at `action`. Requires strictly positive stds.
    pub fn log_prob(&self, action: &[f64]) -> f64 {
        debug_assert_eq!(action.len(), self.dim());
        let mut lp = 0.0;
        for i in 0..self.dim() {
            let z = (action[i] - self.mean[i]) / self.std[i];
            lp += -0.5 * z * z - self.std[i].ln() - 0.5 * (2.0 * PI).ln();
        }
        lp
    }

    /// d log_prob / d mean and d log_prob / d log(std).
    pub fn log_prob_grad(&self, action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut d_mean = vec![0.0; self.dim()];
        let mut d_log_std = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            let var = self.std[i] * self.std[i];
            let diff = action[i] - self.mean[i];
            d_mean[i] = diff / var;
            d_log_std[i] = diff * diff / var - 1.0;
        }
        (d_mean, d_log_std)
    }

    /// Differential entropy.
    pub fn entropy(&self) -> f64 {
        self.std
            .iter()
            .map(|s| 0.5 + 0.5 * (2.0 * PI).ln() + s.ln())
            .sum()
    }

    /// mean + std ⊙ z with z drawn from the supplied source.
    pub fn sample(&self, rng: &mut Prng) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                self.mean[i] + self.std[i] * z
            })
            .collect()
    }
}

/// KL(p || q) for diagonal Gaussians of equal dimension. Non-negative and
/// zero exactly when p == q.
pub fn gauss_kl(p: &DiagGaussian, q: &DiagGaussian) -> f64 {
    assert_eq!(p.dim(), q.dim(), "KL dimension mismatch");
    let mut kl = 0.0;
    for i in 0..p.dim() {
        let (sp, sq) = (p.std[i], q.std[i]);
        let dm = p.mean[i] - q.mean[i];
        kl += (sq / sp).ln() + (sp * sp + dm * dm) / (2.0 * sq * sq) - 0.5;
    }
    kl
}

/// Gradients of KL(p || q) with respect to q's mean and log(std); used where
/// q is the policy being updated and p is a fixed reference.
pub fn gauss_kl_grad_wrt_q(p: &DiagGaussian, q: &DiagGaussian) -> (Vec<f64>, Vec<f64>) {
    let n = p.dim();
    let mut d_mean = vec![0.0; n];
    let mut d_log_std = vec![0.0; n];
    for i in 0..n {
        let var_q = q.std[i] * q.std[i];
        let dm = p.mean[i] - q.mean[i];
        d_mean[i] = (q.mean[i] - p.mean[i]) / var_q;
        d_log_std[i] = 1.0 - (p.std[i] * p.std[i] + dm * dm) / var_q;
    }
    (d_mean, d_log_std)
}

/// Gradients of KL(p || q) with respect to p's mean and log(std); used where
/// p is the policy being updated (distillation) and q is a fixed target.
pub fn gauss_kl_grad_wrt_p(p: &DiagGaussian, q: &DiagGaussian) -> (Vec<f64>, Vec<f64>) {
    let n = p.dim();
    let mut d_mean = vec![0.0; n];
    let mut d_log_std = vec![0.0; n];
    for i in 0..n {
        let var_q = q.std[i] * q.std[i];
        d_mean[i] = (p.mean[i] - q.mean[i]) / var_q;
        d_log_std[i] = p.std[i] * p.std[i] / var_q - 1.0;
    }
    (d_mean, d_log_std)
}

/// Two-way categorical over {parent x, parent y}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Binary2 {
    probs: [f64; 2],
}

impl Binary2 {
    pub fn probs(&self) -> [f64; 2] {
        self.probs
    }

    pub fn p_x(&self) -> f64 {
        self.probs[0]
    }
}

/// Numerically stable softmax over a 2-logit head.
pub fn binary_head(logits: [f64; 2]) -> Binary2 {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    Binary2 {
        probs: [e0 / z, e1 / z],
    }
}
