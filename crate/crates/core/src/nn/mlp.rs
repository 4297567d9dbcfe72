use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Fully connected network: tanh hidden layers, linear output.
///
/// Parameters live in one flat vector; layer `l` stores its weight matrix
/// (`in x out`, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations kept by [`Mlp::forward_cached`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input followed by the post-activation output of every layer.
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least input")
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// Rows of an orthogonal `rows x cols` matrix (orthonormal along the
/// shorter side), by Gram-Schmidt on Gaussian draws.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (n, d) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut w = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            w[i * cols + j] = if rows <= cols { basis[i][j] } else { basis[j][i] };
        }
    }
    w
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Orthogonal weights scaled by `sqrt(2)` on hidden layers and by
    /// `output_gain` on the last one; zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Result<Self> {
        let mut net = Mlp::zeros(sizes)?;
        let layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (i, o) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == layers { output_gain } else { 2f64.sqrt() };
            let w = orthogonal(i, o, rng);
            for (dst, src) in net.params[off..off + i * o].iter_mut().zip(w) {
                *dst = gain * src;
            }
            off += i * o + o;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Mlp::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension {
                expected: net.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        net.params = params;
        Ok(net)
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

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.sizes[0] {
            return Err(Error::Dimension {
                expected: self.sizes[0],
                got: input.len(),
            });
        }
        Ok(())
    }

    fn layer(&self, l: usize, x: &[f64], out: &mut Vec<f64>, off: usize) {
        let (i_dim, o_dim) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[off..off + i_dim * o_dim];
        let b = &self.params[off + i_dim * o_dim..off + i_dim * o_dim + o_dim];
        out.clear();
        out.extend_from_slice(b);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w[i * o_dim..(i + 1) * o_dim];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += xi * wij;
            }
        }
        if l + 2 < self.sizes.len() {
            out.iter_mut().for_each(|v| *v = v.tanh());
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let mut y = Vec::new();
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            self.layer(l, &x, &mut y, off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
            std::mem::swap(&mut x, &mut y);
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &[f64]) -> Result<MlpCache> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        let mut off = 0;
        for l in 0..self.sizes.len() - 1 {
            let mut y = Vec::new();
            self.layer(l, &acts[l], &mut y, off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
            acts.push(y);
        }
        Ok(MlpCache { acts })
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grads: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = grad_out.to_vec();
        for l in (0..layers).rev() {
            let (i_dim, o_dim) = (self.sizes[l], self.sizes[l + 1]);
            if l + 1 < layers {
                // tanh derivative from the stored activation
                for (d, a) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let off = offsets[l];
            let x = &cache.acts[l];
            {
                let (gw, gb) = grads[off..off + i_dim * o_dim + o_dim].split_at_mut(i_dim * o_dim);
                for (g, d) in gb.iter_mut().zip(&delta) {
                    *g += d;
                }
                for (i, &xi) in x.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    for (g, d) in gw[i * o_dim..(i + 1) * o_dim].iter_mut().zip(&delta) {
                        *g += xi * d;
                    }
                }
            }
            if l > 0 {
                let w = &self.params[off..off + i_dim * o_dim];
                let mut prev = vec![0.0; i_dim];
                for (i, p) in prev.iter_mut().enumerate() {
                    let row = &w[i * o_dim..(i + 1) * o_dim];
                    *p = row.iter().zip(&delta).map(|(a, b)| a * b).sum();
                }
                delta = prev;
            }
        }
    }
}
