//! Fully connected tanh network with hand-written backprop.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix in
//! row-major `[out][in]` order followed by the bias `[out]`. Hidden layers use
//! tanh; the output layer is linear.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Post-activation values of every layer for one input, input included.
#[derive(Debug, Clone)]
pub struct Activations {
    layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("at least the input layer")
    }
}

/// Number of parameters of a network with the given layer sizes.
pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; param_count(sizes)],
        }
    }

    /// Orthogonal weights scaled per layer by `gains`, zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], gains: &[f64], rng: &mut R) -> Self {
        assert_eq!(gains.len(), sizes.len() - 1);
        let mut net = Self::zeros(sizes);
        let mut offset = 0;
        for (w, &gain) in sizes.windows(2).zip(gains) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = orthogonal_matrix(fan_out, fan_in, rng);
            for (dst, src) in net.params[offset..offset + fan_in * fan_out].iter_mut().zip(weights) {
                *dst = gain * src;
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && sizes.iter().all(|&s| s > 0) && params.len() == param_count(sizes))
            .then(|| Self {
                sizes: sizes.to_vec(),
                params,
            })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
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

    /// `(weights, bias)` slices of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (start, n_in, n_out) = self.layer_span(l);
        let w_end = start + n_in * n_out;
        (&self.params[start..w_end], &self.params[w_end..w_end + n_out])
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (start, n_in, n_out) = self.layer_span(l);
        let (w, b) = self.params[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out);
        (w, b)
    }

    fn layer_span(&self, l: usize) -> (usize, usize, usize) {
        let start = param_count(&self.sizes[..=l]);
        (start, self.sizes[l], self.sizes[l + 1])
    }

    fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).layers.pop().expect("non-empty")
    }

    pub fn forward_cached(&self, input: &[f64]) -> Activations {
        assert_eq!(input.len(), self.sizes[0]);
        let mut layers = Vec::with_capacity(self.sizes.len());
        layers.push(input.to_vec());
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(l);
            let x = &layers[l];
            let last = l + 1 == self.n_layers();
            let y: Vec<f64> = b
                .iter()
                .zip(w.chunks_exact(x.len()))
                .map(|(bias, row)| {
                    let z = bias + dot(row, x);
                    if last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            layers.push(y);
        }
        Activations { layers }
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output`.
    pub fn backward(&self, acts: &Activations, grad_output: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let mut delta = grad_output.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (start, n_in, n_out) = self.layer_span(l);
            let x = &acts.layers[l];
            let (gw, gb) = grad[start..start + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            for (o, d) in delta.iter().enumerate() {
                gb[o] += d;
                for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            if l == 0 {
                break;
            }
            // Through the weights, then through the previous layer's tanh.
            let (w, _) = self.layer(l);
            let mut prev = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += d * wi;
                }
            }
            for (p, a) in prev.iter_mut().zip(x) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major `rows × cols` matrix with orthonormal rows (if rows ≤ cols) or
/// orthonormal columns (otherwise), by Gram-Schmidt on a Gaussian draw.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Vec<f64> {
    let (n, len) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let proj = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut m = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            m[r * cols + c] = if rows <= cols { basis[r][c] } else { basis[c][r] };
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[2, 64, 64, 1]);
        assert_eq!(net.forward(&[0.7, -3.0]), vec![0.0]);
        assert_eq!(net.num_params(), 2 * 64 + 64 + 64 * 64 + 64 + 64 + 1);
    }

    #[test]
    fn orthogonal_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = orthogonal_matrix(4, 9, &mut rng);
        for i in 0..4 {
            for j in 0..4 {
                let d = dot(&m[i * 9..(i + 1) * 9], &m[j * 9..(j + 1) * 9]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let tall = orthogonal_matrix(9, 4, &mut rng);
        for i in 0..4 {
            let col: Vec<f64> = (0..9).map(|r| tall[r * 4 + i]).collect();
            assert!((dot(&col, &col) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn output_bounded_by_last_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Mlp::orthogonal(&[2, 8, 8, 1], &[3.0, 3.0, 2.0], &mut rng);
        let (w, b) = net.layer(2);
        let bound: f64 = w.iter().map(|x| x.abs()).sum::<f64>() + b[0].abs();
        for x in [[100.0, -100.0], [0.0, 0.0], [1e6, 3.0]] {
            assert!(net.forward(&x)[0].abs() <= bound);
        }
    }

    #[test]
    fn backward_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = Mlp::orthogonal(&[2, 5, 4, 1], &[1.0, 1.0, 1.0], &mut rng);
        for p in net.params_mut() {
            *p += 0.1 * rng.sample::<f64, _>(StandardNormal);
        }
        let x = [0.3, -0.8];
        let acts = net.forward_cached(&x);
        let mut grad = vec![0.0; net.num_params()];
        net.backward(&acts, &[1.0], &mut grad);
        let h = 1e-6;
        for (i, g) in grad.iter().enumerate() {
            let mut plus = net.clone();
            plus.params_mut()[i] += h;
            let mut minus = net.clone();
            minus.params_mut()[i] -= h;
            let fd = (plus.forward(&x)[0] - minus.forward(&x)[0]) / (2.0 * h);
            let scale = fd.abs().max(g.abs()).max(1e-3);
            assert!((fd - *g).abs() / scale < 1e-5, "param {i}: {fd} vs {}", *g);
        }
    }
}
