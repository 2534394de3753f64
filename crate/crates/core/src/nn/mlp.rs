//! Fixed-topology multilayer perceptron with exact reverse-mode gradients.
//!
//! Hidden layers use tanh, the output layer is linear. Parameters flatten to
//! a single `Vec<f64>` (per layer: row-major weights, then biases), and that
//! flat order is also the order every gradient in this crate uses.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{GpoError, Result};
use crate::rng::Prng;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    /// weights[l] has shape (sizes[l+1], sizes[l]), row-major.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Zero-initialized network for the given layer-size list.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output layer");
        assert!(sizes.iter().all(|&s| s >= 1));
        let weights = (0..sizes.len() - 1)
            .map(|l| vec![0.0; sizes[l + 1] * sizes[l]])
            .collect();
        let biases = (0..sizes.len() - 1)
            .map(|l| vec![0.0; sizes[l + 1]])
            .collect();
        MlpParams {
            sizes: sizes.to_vec(),
            weights,
            biases,
        }
    }

    /// Uniform(-sqrt(6/(fan_in+fan_out))) weight init, zero biases.
    pub fn init(sizes: &[usize], rng: &mut Prng) -> Self {
        let mut p = MlpParams::zeros(sizes);
        for l in 0..p.sizes.len() - 1 {
            let bound = (6.0 / (p.sizes[l] + p.sizes[l + 1]) as f64).sqrt();
            for w in p.weights[l].iter_mut() {
                *w = rng.random_range(-bound..=bound);
            }
        }
        p
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Total parameter count; a pure function of the layer-size list.
    pub fn param_count(&self) -> usize {
        param_count_for(&self.sizes)
    }

    /// Forward pass. `input` length must equal the first layer size.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.sizes[0] {
            return Err(GpoError::DimensionMismatch {
                what: "mlp input",
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        let mut act = input.to_vec();
        let last = self.sizes.len() - 2;
        for l in 0..=last {
            act = self.layer_forward(l, &act, l < last);
        }
        Ok(act)
    }

    fn layer_forward(&self, l: usize, input: &[f64], hidden: bool) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.weights[l];
        let mut out = self.biases[l].clone();
        for o in 0..n_out {
            let row = &w[o * n_in..(o + 1) * n_in];
            let mut acc = 0.0;
            for i in 0..n_in {
                acc += row[i] * input[i];
            }
            out[o] += acc;
            if hidden {
                out[o] = out[o].tanh();
            }
        }
        out
    }

    /// Forward pass keeping every layer's post-activation output;
    /// `acts[0]` is the input, `acts.last()` the network output.
    pub fn forward_cached(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.sizes[0] {
            return Err(GpoError::DimensionMismatch {
                what: "mlp input",
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        let last = self.sizes.len() - 2;
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for l in 0..=last {
            let next = self.layer_forward(l, &acts[l], l < last);
            acts.push(next);
        }
        Ok(acts)
    }

    /// Reverse-mode gradient of `upstream . output` with respect to the flat
    /// parameter vector, accumulated into `grad` (length `param_count()`).
    pub fn backward_acc(&self, acts: &[Vec<f64>], upstream: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(upstream.len(), self.output_dim());
        debug_assert_eq!(grad.len(), self.param_count());
        let n_layers = self.sizes.len() - 1;
        let mut delta = upstream.to_vec();
        // Offsets of each layer's weight block in the flat vector.
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l + 1] * (self.sizes[l] + 1);
        }
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &acts[l];
            let w_off = offsets[l];
            let b_off = w_off + n_out * n_in;
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                for i in 0..n_in {
                    row[i] += d * input[i];
                }
                grad[b_off + o] += d;
            }
            if l > 0 {
                // d(loss)/d(previous activation), then through tanh.
                let w = &self.weights[l];
                let mut prev = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        prev[i] += d * row[i];
                    }
                }
                for i in 0..n_in {
                    let a = acts[l][i];
                    prev[i] *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }

    /// Convenience wrapper: full backward pass from scratch.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(GpoError::DimensionMismatch {
                what: "mlp upstream gradient",
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let acts = self.forward_cached(input)?;
        let mut grad = vec![0.0; self.param_count()];
        self.backward_acc(&acts, upstream, &mut grad);
        Ok(grad)
    }

    /// Flatten to a single parameter vector (per layer: weights, biases).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in 0..self.sizes.len() - 1 {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten); exact round-trip.
    pub fn from_flat(sizes: &[usize], flat: &[f64]) -> Result<Self> {
        let expected = param_count_for(sizes);
        if flat.len() != expected {
            return Err(GpoError::DimensionMismatch {
                what: "flat parameter vector",
                expected,
                got: flat.len(),
            });
        }
        let mut p = MlpParams::zeros(sizes);
        p.load_flat(flat);
        Ok(p)
    }

    /// Overwrite parameters from a flat vector of matching length.
    pub fn load_flat(&mut self, flat: &[f64]) {
        debug_assert_eq!(flat.len(), self.param_count());
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            let nw = self.weights[l].len();
            self.weights[l].copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = self.biases[l].len();
            self.biases[l].copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
    }

    /// Apply `f` to every parameter alongside the matching flat-vector slot.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut idx = 0;
        for l in 0..self.sizes.len() - 1 {
            for w in self.weights[l].iter_mut() {
                f(idx, w);
                idx += 1;
            }
            for b in self.biases[l].iter_mut() {
                f(idx, b);
                idx += 1;
            }
        }
    }
}

pub fn param_count_for(sizes: &[usize]) -> usize {
    (0..sizes.len() - 1)
        .map(|l| sizes[l + 1] * (sizes[l] + 1))
        .sum()
}

/// Write a parameter snapshot: layer-size list as little-endian u32, then the
/// flat parameter data as little-endian f64.
pub fn write_snapshot(path: &Path, sizes: &[usize], flat: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(4 + 4 * sizes.len() + 8 * flat.len());
    buf.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        buf.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for &x in flat {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Read a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 4 {
        return Err(GpoError::BadSnapshot("file shorter than header".into()));
    }
    let n = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let header = 4 + 4 * n;
    if bytes.len() < header {
        return Err(GpoError::BadSnapshot("truncated layer-size list".into()));
    }
    let mut sizes = Vec::with_capacity(n);
    for i in 0..n {
        let off = 4 + 4 * i;
        sizes.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize);
    }
    let body = &bytes[header..];
    if body.len() % 8 != 0 {
        return Err(GpoError::BadSnapshot("parameter data not f64-aligned".into()));
    }
    let flat: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((sizes, flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::rng::Stream;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
    }

    /// Independent straight-line evaluator used as the forward oracle.
    fn naive_forward(p: &MlpParams, input: &[f64]) -> Vec<f64> {
        let flat = p.flatten();
        let sizes = p.sizes().to_vec();
        let mut act: Vec<f64> = input.to_vec();
        let mut off = 0;
        for l in 0..sizes.len() - 1 {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let mut next = vec![0.0; n_out];
            for o in 0..n_out {
                let mut z = flat[off + n_out * n_in + o]; // bias
                for i in 0..n_in {
                    z += flat[off + o * n_in + i] * act[i];
                }
                next[o] = if l < sizes.len() - 2 { z.tanh() } else { z };
            }
            off += n_out * (n_in + 1);
            act = next;
        }
        act
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = MlpParams::zeros(&[3, 4, 2]);
        let out = p.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        let mut p = MlpParams::zeros(&[1, 1]);
        p.load_flat(&[2.0, 1.0]); // W=[[2]], b=[1]
        let out = p.forward(&[3.0]).unwrap();
        assert_eq!(out, vec![7.0]);
    }

    #[test]
    fn forward_matches_independent_evaluator() {
        let mut r = rng::derive(11, 0, 0, Stream::PolicyInit);
        for _ in 0..20 {
            let p = MlpParams::init(&[4, 6, 5, 3], &mut r);
            let input: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..=2.0)).collect();
            let got = p.forward(&input).unwrap();
            let want = naive_forward(&p, &input);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn input_shape_mismatch_is_an_error() {
        let p = MlpParams::zeros(&[3, 2]);
        assert!(p.forward(&[1.0, 2.0]).is_err());
        assert!(p.backward(&[1.0, 2.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let mut r = rng::derive(3, 0, 0, Stream::PolicyInit);
        let p = MlpParams::init(&[3, 5, 2], &mut r);
        let g = p.backward(&[0.3, -0.7, 1.1], &[0.0, 0.0]).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn scalar_net_bias_gradient_is_one() {
        let mut p = MlpParams::zeros(&[1, 1]);
        p.load_flat(&[0.5, 0.2]);
        // loss = output, upstream = 1 => d loss / d bias = 1.
        let g = p.backward(&[0.4], &[1.0]).unwrap();
        assert!((g[1] - 1.0).abs() < 1e-15);
        assert!((g[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng::derive(5, 0, 0, Stream::PolicyInit);
        let h = 1e-5;
        for draw in 0..100 {
            let sizes: &[usize] = if draw % 2 == 0 { &[3, 6, 2] } else { &[2, 4, 4, 1] };
            let p = MlpParams::init(sizes, &mut r);
            let input: Vec<f64> = (0..sizes[0]).map(|_| r.random_range(-1.5..=1.5)).collect();
            let upstream: Vec<f64> = (0..*sizes.last().unwrap())
                .map(|_| r.random_range(-1.0..=1.0))
                .collect();
            let analytic = p.backward(&input, &upstream).unwrap();
            let mut flat = p.flatten();
            for k in 0..flat.len() {
                let orig = flat[k];
                flat[k] = orig + h;
                let plus: f64 = MlpParams::from_flat(sizes, &flat)
                    .unwrap()
                    .forward(&input)
                    .unwrap()
                    .iter()
                    .zip(&upstream)
                    .map(|(o, u)| o * u)
                    .sum();
                flat[k] = orig - h;
                let minus: f64 = MlpParams::from_flat(sizes, &flat)
                    .unwrap()
                    .forward(&input)
                    .unwrap()
                    .iter()
                    .zip(&upstream)
                    .map(|(o, u)| o * u)
                    .sum();
                flat[k] = orig;
                let fd = (plus - minus) / (2.0 * h);
                assert!(
                    rel_err(analytic[k], fd) < 1e-4,
                    "draw {draw} component {k}: analytic {} vs fd {}",
                    analytic[k],
                    fd
                );
            }
        }
    }

    #[test]
    fn snapshot_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.bin");
        let mut r = rng::derive(9, 0, 0, Stream::PolicyInit);
        let p = MlpParams::init(&[4, 8, 3], &mut r);
        write_snapshot(&path, p.sizes(), &p.flatten()).unwrap();
        let (sizes, flat) = read_snapshot(&path).unwrap();
        assert_eq!(sizes, p.sizes());
        let q = MlpParams::from_flat(&sizes, &flat).unwrap();
        assert_eq!(p, q);
    }
}
