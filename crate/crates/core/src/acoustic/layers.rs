//! Differentiable building blocks. Activations are row-major `[time, channels]`.
//! Every `backward` accumulates parameter gradients into `grads` and returns
//! (or accumulates) the gradient with respect to its input.

use rand::Rng;

use super::tensor::{gemm, ParamSet, Tensor};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<R: Rng>(params: &mut ParamSet, name: &str, d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let w = params.add(
            format!("{name}.w"),
            Tensor::normal(&[d_in, d_out], 1.0 / (d_in as f64).sqrt(), rng),
        );
        let b = params.add(format!("{name}.b"), Tensor::zeros(&[d_out]));
        Self { w, b, d_in, d_out }
    }

    pub fn forward(&self, p: &ParamSet, x: &[f64], rows: usize) -> Vec<f64> {
        let mut y = vec![0.0; rows * self.d_out];
        let bias = p.get(self.b);
        for row in y.chunks_exact_mut(self.d_out) {
            row.copy_from_slice(bias);
        }
        gemm(x, false, p.get(self.w), false, rows, self.d_in, self.d_out, &mut y, true);
        y
    }

    pub fn backward(&self, p: &ParamSet, grads: &mut ParamSet, x: &[f64], dy: &[f64], rows: usize) -> Vec<f64> {
        gemm(x, true, dy, false, self.d_in, rows, self.d_out, grads.get_mut(self.w), true);
        let db = grads.get_mut(self.b);
        for row in dy.chunks_exact(self.d_out) {
            for (g, v) in db.iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut dx = vec![0.0; rows * self.d_in];
        gemm(dy, false, p.get(self.w), true, rows, self.d_out, self.d_in, &mut dx, false);
        dx
    }
}

/// Same-padded dilated 1-D convolution, evaluated as im2col + GEMM.
/// Weights are stored `[kernel * ch_in, ch_out]`, tap-major.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: usize,
    pub b: usize,
    pub ch_in: usize,
    pub ch_out: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl Conv1d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        name: &str,
        ch_in: usize,
        ch_out: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = (kernel * ch_in) as f64;
        let w = params.add(format!("{name}.w"), Tensor::normal(&[kernel * ch_in, ch_out], 1.0 / fan_in.sqrt(), rng));
        let b = params.add(format!("{name}.b"), Tensor::zeros(&[ch_out]));
        Self {
            w,
            b,
            ch_in,
            ch_out,
            kernel,
            dilation,
        }
    }

    fn offset(&self, tap: usize) -> isize {
        (tap as isize - (self.kernel as isize - 1) / 2) * self.dilation as isize
    }

    pub fn im2col(&self, x: &[f64], t_len: usize) -> Vec<f64> {
        let kc = self.kernel * self.ch_in;
        let mut col = vec![0.0; t_len * kc];
        for t in 0..t_len {
            for tap in 0..self.kernel {
                let src = t as isize + self.offset(tap);
                if src >= 0 && (src as usize) < t_len {
                    let s = src as usize;
                    col[t * kc + tap * self.ch_in..t * kc + (tap + 1) * self.ch_in]
                        .copy_from_slice(&x[s * self.ch_in..(s + 1) * self.ch_in]);
                }
            }
        }
        col
    }

    /// Returns (output, im2col buffer kept for the backward pass).
    pub fn forward(&self, p: &ParamSet, x: &[f64], t_len: usize) -> (Vec<f64>, Vec<f64>) {
        let col = self.im2col(x, t_len);
        let mut y = vec![0.0; t_len * self.ch_out];
        let bias = p.get(self.b);
        for row in y.chunks_exact_mut(self.ch_out) {
            row.copy_from_slice(bias);
        }
        gemm(&col, false, p.get(self.w), false, t_len, self.kernel * self.ch_in, self.ch_out, &mut y, true);
        (y, col)
    }

    /// Accumulates the input gradient into `dx`.
    pub fn backward(&self, p: &ParamSet, grads: &mut ParamSet, col: &[f64], dy: &[f64], t_len: usize, dx: &mut [f64]) {
        let kc = self.kernel * self.ch_in;
        gemm(col, true, dy, false, kc, t_len, self.ch_out, grads.get_mut(self.w), true);
        let db = grads.get_mut(self.b);
        for row in dy.chunks_exact(self.ch_out) {
            for (g, v) in db.iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut dcol = vec![0.0; t_len * kc];
        gemm(dy, false, p.get(self.w), true, t_len, self.ch_out, kc, &mut dcol, false);
        for t in 0..t_len {
            for tap in 0..self.kernel {
                let src = t as isize + self.offset(tap);
                if src >= 0 && (src as usize) < t_len {
                    let s = src as usize;
                    let from = &dcol[t * kc + tap * self.ch_in..t * kc + (tap + 1) * self.ch_in];
                    for (d, v) in dx[s * self.ch_in..(s + 1) * self.ch_in].iter_mut().zip(from) {
                        *d += v;
                    }
                }
            }
        }
    }
}

/// Layer normalization over the channel axis of each time step.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: usize,
    pub beta: usize,
    pub dim: usize,
}

pub struct LnCache {
    normed: Vec<f64>,
    rstd: Vec<f64>,
}

impl LayerNorm {
    pub fn new(params: &mut ParamSet, name: &str, dim: usize) -> Self {
        let gamma = params.add(format!("{name}.g"), Tensor::filled(&[dim], 1.0));
        let beta = params.add(format!("{name}.b"), Tensor::zeros(&[dim]));
        Self { gamma, beta, dim }
    }

    pub fn forward(&self, p: &ParamSet, x: &[f64]) -> (Vec<f64>, LnCache) {
        let g = p.get(self.gamma);
        let b = p.get(self.beta);
        let mut y = vec![0.0; x.len()];
        let mut normed = vec![0.0; x.len()];
        let mut rstd = Vec::with_capacity(x.len() / self.dim);
        for ((xr, yr), nr) in x
            .chunks_exact(self.dim)
            .zip(y.chunks_exact_mut(self.dim))
            .zip(normed.chunks_exact_mut(self.dim))
        {
            let mean = xr.iter().sum::<f64>() / self.dim as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.dim as f64;
            let r = 1.0 / (var + LN_EPS).sqrt();
            rstd.push(r);
            for i in 0..self.dim {
                nr[i] = (xr[i] - mean) * r;
                yr[i] = nr[i] * g[i] + b[i];
            }
        }
        (y, LnCache { normed, rstd })
    }

    pub fn backward(&self, p: &ParamSet, grads: &mut ParamSet, cache: &LnCache, dy: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let g = p.get(self.gamma);
        let mut dx = vec![0.0; dy.len()];
        let mut dgamma = vec![0.0; d];
        let mut dbeta = vec![0.0; d];
        let mut dn = vec![0.0; d];
        for (t, (dyr, dxr)) in dy.chunks_exact(d).zip(dx.chunks_exact_mut(d)).enumerate() {
            let nr = &cache.normed[t * d..(t + 1) * d];
            for i in 0..d {
                dgamma[i] += dyr[i] * nr[i];
                dbeta[i] += dyr[i];
                dn[i] = dyr[i] * g[i];
            }
            let mean_dn = dn.iter().sum::<f64>() / d as f64;
            let mean_dn_n = dn.iter().zip(nr).map(|(a, b)| a * b).sum::<f64>() / d as f64;
            let r = cache.rstd[t];
            for i in 0..d {
                dxr[i] = r * (dn[i] - mean_dn - nr[i] * mean_dn_n);
            }
        }
        for (a, b) in grads.get_mut(self.gamma).iter_mut().zip(&dgamma) {
            *a += b;
        }
        for (a, b) in grads.get_mut(self.beta).iter_mut().zip(&dbeta) {
            *a += b;
        }
        dx
    }
}

/// `y = x + dropout(gelu(layernorm(conv(x))))`.
#[derive(Debug, Clone)]
pub struct ResBlock {
    pub conv: Conv1d,
    pub ln: LayerNorm,
}

pub struct ResCache {
    col: Vec<f64>,
    ln: LnCache,
    pre_act: Vec<f64>,
    mask: Option<Vec<f64>>,
}

impl ResBlock {
    pub fn new<R: Rng>(params: &mut ParamSet, name: &str, channels: usize, kernel: usize, dilation: usize, rng: &mut R) -> Self {
        Self {
            conv: Conv1d::new(params, &format!("{name}.conv"), channels, channels, kernel, dilation, rng),
            ln: LayerNorm::new(params, &format!("{name}.ln"), channels),
        }
    }

    pub fn forward<R: Rng>(
        &self,
        p: &ParamSet,
        x: &[f64],
        t_len: usize,
        dropout: Option<(f64, &mut R)>,
    ) -> (Vec<f64>, ResCache) {
        let (a, col) = self.conv.forward(p, x, t_len);
        let (l, ln) = self.ln.forward(p, &a);
        let mut h: Vec<f64> = l.iter().map(|&v| gelu(v)).collect();
        let mask = match dropout {
            Some((rate, rng)) if rate > 0.0 => {
                let keep = 1.0 / (1.0 - rate);
                let m: Vec<f64> = (0..h.len())
                    .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                    .collect();
                for (v, k) in h.iter_mut().zip(&m) {
                    *v *= k;
                }
                Some(m)
            }
            _ => None,
        };
        let y = x.iter().zip(&h).map(|(a, b)| a + b).collect();
        (
            y,
            ResCache {
                col,
                ln,
                pre_act: l,
                mask,
            },
        )
    }

    pub fn backward(&self, p: &ParamSet, grads: &mut ParamSet, cache: &ResCache, dy: &[f64], t_len: usize) -> Vec<f64> {
        let mut dx = dy.to_vec();
        let mut dl: Vec<f64> = dy
            .iter()
            .zip(&cache.pre_act)
            .map(|(&g, &l)| g * gelu_grad(l))
            .collect();
        if let Some(mask) = &cache.mask {
            for (v, m) in dl.iter_mut().zip(mask) {
                *v *= m;
            }
        }
        let da = self.ln.backward(p, grads, &cache.ln, &dl);
        self.conv.backward(p, grads, &cache.col, &da, t_len, &mut dx);
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gelu_derivative_matches_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn dilated_conv_reaches_expected_taps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = ParamSet::default();
        let conv = Conv1d::new(&mut p, "c", 1, 1, 3, 4, &mut rng);
        p.get_mut(conv.w).copy_from_slice(&[1.0, 10.0, 100.0]);
        // impulse at t = 5: output sees it at t = 1 (right tap), 5 (centre), 9 (left tap)
        let mut x = vec![0.0; 12];
        x[5] = 1.0;
        let (y, _) = conv.forward(&p, &x, 12);
        let nz: Vec<(usize, f64)> = y.iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect();
        assert_eq!(nz, vec![(1, 100.0), (5, 10.0), (9, 1.0)]);
    }
}
