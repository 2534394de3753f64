//! Gaussian MLP policy: an MLP producing the action mean, plus a learned
//! state-independent log-std vector. Storing stds in log space keeps them
//! positive under any gradient step.

use std::path::Path;

use crate::error::{GpoError, Result};
use crate::nn::dist::DiagGaussian;
use crate::nn::mlp::{self, MlpParams};
use crate::rng::Prng;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub mean_net: MlpParams,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    /// Random mean net, log-std initialized to zero (std = 1).
    pub fn init(layer_sizes: &[usize], rng: &mut Prng) -> Self {
        let mean_net = MlpParams::init(layer_sizes, rng);
        let act_dim = mean_net.output_dim();
        GaussianPolicy {
            mean_net,
            log_std: vec![0.0; act_dim],
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.mean_net.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.mean_net.output_dim()
    }

    /// Network parameters plus the log-std vector.
    pub fn param_count(&self) -> usize {
        self.mean_net.param_count() + self.log_std.len()
    }

    /// Action distribution at an observation.
    pub fn dist(&self, obs: &[f64]) -> Result<DiagGaussian> {
        let mean = self.mean_net.forward(obs)?;
        let std = self.log_std.iter().map(|l| l.exp()).collect();
        Ok(DiagGaussian::new(mean, std))
    }

    /// Flat parameter vector: mean-net layout, then log-std entries.
    pub fn flatten(&self) -> Vec<f64> {
        let mut flat = self.mean_net.flatten();
        flat.extend_from_slice(&self.log_std);
        flat
    }

    pub fn from_flat(layer_sizes: &[usize], flat: &[f64]) -> Result<Self> {
        let act_dim = *layer_sizes.last().unwrap();
        let net_count = mlp::param_count_for(layer_sizes);
        if flat.len() != net_count + act_dim {
            return Err(GpoError::DimensionMismatch {
                what: "policy flat parameter vector",
                expected: net_count + act_dim,
                got: flat.len(),
            });
        }
        let mean_net = MlpParams::from_flat(layer_sizes, &flat[..net_count])?;
        Ok(GaussianPolicy {
            mean_net,
            log_std: flat[net_count..].to_vec(),
        })
    }

    /// Overwrite all parameters from a flat vector of matching length.
    pub fn load_flat(&mut self, flat: &[f64]) {
        debug_assert_eq!(flat.len(), self.param_count());
        let net_count = self.mean_net.param_count();
        self.mean_net.load_flat(&flat[..net_count]);
        self.log_std.copy_from_slice(&flat[net_count..]);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        mlp::write_snapshot(path, self.mean_net.sizes(), &self.flatten())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (sizes, flat) = mlp::read_snapshot(path)?;
        if sizes.len() < 2 {
            return Err(GpoError::BadSnapshot("fewer than two layers".into()));
        }
        GaussianPolicy::from_flat(&sizes, &flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::rng::Stream;
    use proptest::prelude::*;

    #[test]
    fn std_is_positive_after_arbitrary_updates() {
        let mut r = rng::derive(31, 0, 0, Stream::PolicyInit);
        let mut p = GaussianPolicy::init(&[3, 8, 2], &mut r);
        // Push log-std hard in both directions; std stays > 0.
        p.log_std = vec![-40.0, 35.0];
        let d = p.dist(&[0.1, 0.2, 0.3]).unwrap();
        assert!(d.std.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.bin");
        let mut r = rng::derive(32, 0, 0, Stream::PolicyInit);
        let mut p = GaussianPolicy::init(&[4, 6, 2], &mut r);
        p.log_std = vec![-0.25, 0.5];
        p.save(&path).unwrap();
        let q = GaussianPolicy::load(&path).unwrap();
        assert_eq!(p, q);
    }

    proptest! {
        #[test]
        fn flatten_unflatten_is_bit_identical(seed in 0u64..500) {
            let mut r = rng::derive(seed, 0, 0, Stream::PolicyInit);
            let mut p = GaussianPolicy::init(&[3, 5, 4, 2], &mut r);
            p.log_std = vec![0.3, -1.7];
            let flat = p.flatten();
            let q = GaussianPolicy::from_flat(&[3, 5, 4, 2], &flat).unwrap();
            prop_assert_eq!(&p, &q);
            let again = q.flatten();
            prop_assert!(flat.iter().zip(&again).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
