//! Fully-connected network with exact manual backpropagation, per-layer
//! input-activation capture and per-sample gradient capture.
//!
//! Batches are matrices whose columns are samples. Weights are `out × in`;
//! per-sample weight gradients are rank-one (`δ xᵀ`) and are stored in
//! factored form.

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

const CHECKPOINT_FORMAT_VERSION: u8 = 1;

/// Half-open class interval `[start, end)` a task's labels live in.
/// Single-head runs use the full output range for every task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRange {
    pub start: usize,
    pub end: usize,
}

impl ClassRange {
    pub fn full(n_classes: usize) -> Self {
        ClassRange {
            start: 0,
            end: n_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, c: usize) -> bool {
        c >= self.start && c < self.end
    }
}

/// Per-sample gradients of one layer in factored form: the gradient of
/// sample `j` is `deltas[:,j] · inputs[:,j]ᵀ`.
#[derive(Debug, Clone)]
pub struct PerSampleGrads {
    /// Backpropagated errors, `out × n`.
    pub deltas: Matrix,
    /// Layer inputs, `in × n`.
    pub inputs: Matrix,
}

impl PerSampleGrads {
    pub fn count(&self) -> usize {
        self.deltas.cols()
    }

    /// Materialize sample `j`'s full `out × in` gradient matrix.
    pub fn materialize(&self, j: usize) -> Matrix {
        let out = self.deltas.rows();
        let inp = self.inputs.rows();
        Matrix::from_fn(out, inp, |i, k| self.deltas.get(i, j) * self.inputs.get(k, j))
    }

    /// Average of the per-sample gradients, `(D Xᵀ)/n`.
    pub fn mean(&self) -> Matrix {
        self.deltas.mul_abt(&self.inputs).scale(1.0 / self.count() as f64)
    }
}

/// Everything captured by one backward pass over a batch.
#[derive(Debug, Clone)]
pub struct BatchTrace {
    /// Input activations of each layer (columns are samples).
    pub inputs_per_layer: Vec<Matrix>,
    /// Factored per-sample gradients per layer.
    pub per_sample: Vec<PerSampleGrads>,
    /// Mean weight gradient per layer.
    pub mean_grad: Vec<Matrix>,
    /// Mean bias gradient per layer.
    pub bias_grad: Vec<Vec<f64>>,
    /// Mean softmax cross-entropy over the batch.
    pub loss: f64,
}

/// Multi-layer perceptron. Hidden layers use ReLU; the head emits logits
/// for softmax cross-entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    use_bias: bool,
}

impl Mlp {
    /// Seeded uniform init in `±√(6/(fan_in+fan_out))`; biases start at zero.
    pub fn new(dims: &[usize], use_bias: bool, rng: &mut impl Rng) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Matrix::from_fn(fan_out, fan_in, |_, _| {
                rng.random_range(-a..a)
            }));
            biases.push(vec![0.0; fan_out]);
        }
        Mlp {
            dims: dims.to_vec(),
            weights,
            biases,
            use_bias,
        }
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn set_weights(&mut self, weights: Vec<Matrix>) -> Result<()> {
        if weights.len() != self.weights.len()
            || weights
                .iter()
                .zip(self.weights.iter())
                .any(|(a, b)| a.rows() != b.rows() || a.cols() != b.cols())
        {
            return Err(Error::ShapeMismatch("weight layout mismatch".into()));
        }
        self.weights = weights;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.rows() * w.cols())
            .sum::<usize>()
            + if self.use_bias {
                self.biases.iter().map(|b| b.len()).sum::<usize>()
            } else {
                0
            }
    }

    /// Forward pass with the network's own weights.
    pub fn forward(&self, batch: &Matrix, range: ClassRange) -> Result<(Matrix, Vec<Matrix>)> {
        self.forward_with(&self.weights, batch, range)
    }

    /// Forward pass with substituted weights (biases stay the network's own).
    /// Returns masked logits and the captured per-layer inputs.
    pub fn forward_with(
        &self,
        weights: &[Matrix],
        batch: &Matrix,
        range: ClassRange,
    ) -> Result<(Matrix, Vec<Matrix>)> {
        let (z, inputs) = self.forward_trace(weights, batch, range)?;
        let mut logits = z.into_iter().last().unwrap();
        if range != ClassRange::full(self.output_dim()) {
            for c in 0..self.output_dim() {
                if !range.contains(c) {
                    for j in 0..logits.cols() {
                        logits.set(c, j, f64::NEG_INFINITY);
                    }
                }
            }
        }
        Ok((logits, inputs))
    }

    /// Pre-activations of every layer plus the captured inputs.
    fn forward_trace(
        &self,
        weights: &[Matrix],
        batch: &Matrix,
        range: ClassRange,
    ) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
        if batch.rows() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "batch rows {} vs input dim {}",
                batch.rows(),
                self.input_dim()
            )));
        }
        if range.is_empty() || range.end > self.output_dim() {
            return Err(Error::InvalidInput(format!(
                "class range {}..{} outside output dimension {}",
                range.start,
                range.end,
                self.output_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut x = batch.clone();
        for (l, w) in weights.iter().enumerate() {
            inputs.push(x.clone());
            let mut z = w.mul(&x);
            if self.use_bias {
                for i in 0..z.rows() {
                    let b = self.biases[l][i];
                    for j in 0..z.cols() {
                        z.set(i, j, z.get(i, j) + b);
                    }
                }
            }
            if l + 1 < self.n_layers() {
                x = Matrix::from_fn(z.rows(), z.cols(), |i, j| z.get(i, j).max(0.0));
            }
            pre.push(z);
        }
        Ok((pre, inputs))
    }

    /// Mean softmax cross-entropy with the network's own weights.
    pub fn loss(&self, batch: &Matrix, labels: &[usize], range: ClassRange) -> Result<f64> {
        self.loss_with(&self.weights, batch, labels, range)
    }

    pub fn loss_with(
        &self,
        weights: &[Matrix],
        batch: &Matrix,
        labels: &[usize],
        range: ClassRange,
    ) -> Result<f64> {
        let (pre, _) = self.forward_trace(weights, batch, range)?;
        let logits = pre.last().unwrap();
        validate_labels(labels, logits.cols(), range)?;
        let mut loss = 0.0;
        for (j, &label) in labels.iter().enumerate() {
            let (lse, _) = log_sum_exp(logits, j, range);
            loss += lse - logits.get(label, j);
        }
        Ok(loss / labels.len() as f64)
    }

    /// Exact gradients of the mean softmax cross-entropy; captures per-layer
    /// inputs and per-sample gradients along the way.
    pub fn backward(&self, batch: &Matrix, labels: &[usize], range: ClassRange) -> Result<BatchTrace> {
        self.backward_with(&self.weights, batch, labels, range)
    }

    /// Same as [`Mlp::backward`] but with substituted forward weights.
    pub fn backward_with(
        &self,
        weights: &[Matrix],
        batch: &Matrix,
        labels: &[usize],
        range: ClassRange,
    ) -> Result<BatchTrace> {
        let (pre, inputs) = self.forward_trace(weights, batch, range)?;
        let n = batch.cols();
        validate_labels(labels, n, range)?;
        let logits = pre.last().unwrap();

        // δ at the head: softmax − one-hot, per sample (not yet averaged).
        let mut delta = Matrix::zeros(self.output_dim(), n);
        let mut loss = 0.0;
        for (j, &label) in labels.iter().enumerate() {
            let (lse, _) = log_sum_exp(logits, j, range);
            loss += lse - logits.get(label, j);
            for c in range.start..range.end {
                let p = (logits.get(c, j) - lse).exp();
                delta.set(c, j, p - if c == label { 1.0 } else { 0.0 });
            }
        }
        loss /= n as f64;

        let mut per_sample: Vec<Option<PerSampleGrads>> = (0..self.n_layers()).map(|_| None).collect();
        let mut mean_grad: Vec<Option<Matrix>> = (0..self.n_layers()).map(|_| None).collect();
        let mut bias_grad: Vec<Option<Vec<f64>>> = (0..self.n_layers()).map(|_| None).collect();

        for l in (0..self.n_layers()).rev() {
            mean_grad[l] = Some(delta.mul_abt(&inputs[l]).scale(1.0 / n as f64));
            let mut bg = vec![0.0; delta.rows()];
            for (i, b) in bg.iter_mut().enumerate() {
                *b = delta.row(i).iter().sum::<f64>() / n as f64;
            }
            bias_grad[l] = Some(bg);
            per_sample[l] = Some(PerSampleGrads {
                deltas: delta.clone(),
                inputs: inputs[l].clone(),
            });
            if l > 0 {
                // δ_{l-1} = (W_lᵀ δ_l) ⊙ relu'(z_{l-1}).
                let mut back = weights[l].mul_at_b(&delta);
                let z = &pre[l - 1];
                for i in 0..back.rows() {
                    for j in 0..back.cols() {
                        if z.get(i, j) <= 0.0 {
                            back.set(i, j, 0.0);
                        }
                    }
                }
                delta = back;
            }
        }

        Ok(BatchTrace {
            inputs_per_layer: inputs,
            per_sample: per_sample.into_iter().map(Option::unwrap).collect(),
            mean_grad: mean_grad.into_iter().map(Option::unwrap).collect(),
            bias_grad: bias_grad.into_iter().map(Option::unwrap).collect(),
            loss,
        })
    }

    /// `W ← W − lr·grad` per layer (biases likewise when enabled). Refuses
    /// non-finite gradients so a numerical blow-up can't corrupt the model.
    pub fn sgd_step(
        &mut self,
        grads: &[Matrix],
        bias_grads: &[Vec<f64>],
        lr: f64,
    ) -> Result<()> {
        if grads.len() != self.n_layers() || bias_grads.len() != self.n_layers() {
            return Err(Error::ShapeMismatch("gradient count mismatch".into()));
        }
        for (l, g) in grads.iter().enumerate() {
            if g.rows() != self.weights[l].rows() || g.cols() != self.weights[l].cols() {
                return Err(Error::ShapeMismatch(format!("gradient shape, layer {l}")));
            }
            if !g.is_finite() || bias_grads[l].iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical {
                    what: format!("non-finite gradient in layer {l}"),
                    iterations: 0,
                });
            }
        }
        for (l, g) in grads.iter().enumerate() {
            self.weights[l].add_scaled(-lr, g);
            if self.use_bias {
                for (b, &gb) in self.biases[l].iter_mut().zip(bias_grads[l].iter()) {
                    *b -= lr * gb;
                }
            }
        }
        Ok(())
    }

    /// Fraction of samples whose arg-max logit (within the class range)
    /// matches the label.
    pub fn accuracy(&self, batch: &Matrix, labels: &[usize], range: ClassRange) -> Result<f64> {
        self.accuracy_with(&self.weights, batch, labels, range)
    }

    pub fn accuracy_with(
        &self,
        weights: &[Matrix],
        batch: &Matrix,
        labels: &[usize],
        range: ClassRange,
    ) -> Result<f64> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("empty evaluation set".into()));
        }
        let (pre, _) = self.forward_trace(weights, batch, range)?;
        let logits = pre.last().unwrap();
        validate_labels(labels, batch.cols(), range)?;
        let mut correct = 0usize;
        for (j, &label) in labels.iter().enumerate() {
            let mut best = range.start;
            for c in range.start..range.end {
                if logits.get(c, j) > logits.get(best, j) {
                    best = c;
                }
            }
            if best == label {
                correct += 1;
            }
        }
        Ok(correct as f64 / labels.len() as f64)
    }

    /// Versioned binary checkpoint: layer dims, weights (row-major), biases.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&[CHECKPOINT_FORMAT_VERSION])?;
        w.write_all(&[u8::from(self.use_bias)])?;
        w.write_all(&(self.dims.len() as u64).to_le_bytes())?;
        for d in &self.dims {
            w.write_all(&(*d as u64).to_le_bytes())?;
        }
        for m in &self.weights {
            for v in m.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for b in &self.biases {
            for v in b {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut tag = [0u8; 2];
        r.read_exact(&mut tag)?;
        if tag[0] != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Format {
                path: "<checkpoint stream>".into(),
                offset: 0,
                what: format!("unsupported format version {}", tag[0]),
            });
        }
        let use_bias = tag[1] != 0;
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf)?;
        let n_dims = u64::from_le_bytes(buf) as usize;
        let mut dims = Vec::with_capacity(n_dims);
        for _ in 0..n_dims {
            r.read_exact(&mut buf)?;
            dims.push(u64::from_le_bytes(buf) as usize);
        }
        if dims.len() < 2 {
            return Err(Error::Format {
                path: "<checkpoint stream>".into(),
                offset: 2,
                what: "fewer than two layer dimensions".into(),
            });
        }
        let mut weights = Vec::new();
        for w in dims.windows(2) {
            let mut data = vec![0.0f64; w[1] * w[0]];
            for v in data.iter_mut() {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            weights.push(Matrix::from_row_major(w[1], w[0], data)?);
        }
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let mut b = vec![0.0f64; w[1]];
            for v in b.iter_mut() {
                r.read_exact(&mut buf)?;
                *v = f64::from_le_bytes(buf);
            }
            biases.push(b);
        }
        Ok(Mlp {
            dims,
            weights,
            biases,
            use_bias,
        })
    }
}

fn validate_labels(labels: &[usize], n: usize, range: ClassRange) -> Result<()> {
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            n
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| !range.contains(l)) {
        return Err(Error::InvalidInput(format!(
            "label {bad} outside class range {}..{}",
            range.start, range.end
        )));
    }
    Ok(())
}

/// Stable log-sum-exp over the class range of column `j`; also returns the max.
fn log_sum_exp(logits: &Matrix, j: usize, range: ClassRange) -> (f64, f64) {
    let mut m = f64::NEG_INFINITY;
    for c in range.start..range.end {
        m = m.max(logits.get(c, j));
    }
    let mut s = 0.0;
    for c in range.start..range.end {
        s += (logits.get(c, j) - m).exp();
    }
    (m + s.ln(), m)
}

/// Compares `backward`'s mean gradient against central finite differences of
/// the loss on `n_coords` randomly chosen weight coordinates; returns the max
/// relative error. The relative error uses `max(|fd| + |analytic|, 1e-6)` as
/// denominator.
pub fn finite_diff_check(
    net: &Mlp,
    batch: &Matrix,
    labels: &[usize],
    range: ClassRange,
    step: f64,
    n_coords: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if step <= 0.0 {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let trace = net.backward(batch, labels, range)?;
    let mut probe = net.clone();
    let mut max_rel: f64 = 0.0;
    for _ in 0..n_coords {
        let l = rng.random_range(0..net.n_layers());
        let i = rng.random_range(0..net.weights[l].rows());
        let j = rng.random_range(0..net.weights[l].cols());
        let orig = net.weights[l].get(i, j);

        probe.weights[l].set(i, j, orig + step);
        let up = probe.loss(batch, labels, range)?;
        probe.weights[l].set(i, j, orig - step);
        let down = probe.loss(batch, labels, range)?;
        probe.weights[l].set(i, j, orig);

        let fd = (up - down) / (2.0 * step);
        let analytic = trace.mean_grad[l].get(i, j);
        let rel = (fd - analytic).abs() / (fd.abs() + analytic.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

/// Central-difference derivative of an arbitrary scalar function; exact for
/// quadratics up to roundoff. Used to validate the checking machinery itself.
pub fn central_diff(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn full(net: &Mlp) -> ClassRange {
        ClassRange::full(net.output_dim())
    }

    #[test]
    fn zero_weights_give_zero_logits_uniform_softmax() {
        let mut rng = substream(1, "net-zero", &[]);
        let mut net = Mlp::new(&[4, 3], true, &mut rng);
        net.weights[0] = Matrix::zeros(3, 4);
        let batch = Matrix::from_fn(4, 2, |i, j| (i + j) as f64);
        let (logits, _) = net.forward(&batch, full(&net)).unwrap();
        assert_eq!(logits.max_abs(), 0.0);
        // Uniform softmax means loss = ln(3) for any labels.
        let loss = net.loss(&batch, &[0, 2], full(&net)).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_single_layer_logits_equal_batch() {
        let mut rng = substream(2, "net-id", &[]);
        let mut net = Mlp::new(&[3, 3], false, &mut rng);
        net.weights[0] = Matrix::identity(3);
        let batch = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 / 7.0);
        let (logits, inputs) = net.forward(&batch, full(&net)).unwrap();
        assert_eq!(logits, batch);
        assert_eq!(inputs.len(), 1);
        assert_eq!(inputs[0], batch);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = substream(3, "net-det", &[]);
        let net = Mlp::new(&[6, 5, 4], true, &mut rng);
        let batch = Matrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).sin());
        let (a, _) = net.forward(&batch, full(&net)).unwrap();
        let (b, _) = net.forward(&batch, full(&net)).unwrap();
        assert!(a
            .data()
            .iter()
            .zip(b.data().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let a = Mlp::new(&[5, 4, 3], true, &mut substream(9, "init", &[]));
        let b = Mlp::new(&[5, 4, 3], true, &mut substream(9, "init", &[]));
        assert_eq!(a, b);
    }

    #[test]
    fn saturated_softmax_has_vanishing_gradient() {
        let mut rng = substream(4, "net-sat", &[]);
        let mut net = Mlp::new(&[2, 2], false, &mut rng);
        // Huge margin toward class 0 for input e1.
        net.weights[0] = Matrix::from_rows(&[vec![50.0, 0.0], vec![-50.0, 0.0]]).unwrap();
        let batch = Matrix::from_columns(2, &[vec![1.0, 0.0]]).unwrap();
        let trace = net.backward(&batch, &[0], full(&net)).unwrap();
        assert!(trace.mean_grad[0].max_abs() < 1e-6);
    }

    #[test]
    fn single_linear_layer_closed_form() {
        let mut rng = substream(5, "net-closed", &[]);
        let net = Mlp::new(&[3, 2], false, &mut rng);
        let x = vec![0.4, -0.2, 0.9];
        let batch = Matrix::from_columns(3, &[x.clone()]).unwrap();
        let trace = net.backward(&batch, &[1], full(&net)).unwrap();
        // softmax − onehot times xᵀ.
        let z = net.weights[0].mul_vec(&x);
        let m = z[0].max(z[1]);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let sum: f64 = e.iter().sum();
        let p: Vec<f64> = e.iter().map(|v| v / sum).collect();
        for i in 0..2 {
            let coeff = p[i] - if i == 1 { 1.0 } else { 0.0 };
            for (j, &xj) in x.iter().enumerate() {
                assert!((trace.mean_grad[0].get(i, j) - coeff * xj).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn per_sample_grads_average_to_mean() {
        let mut rng = substream(6, "net-mean", &[]);
        let net = Mlp::new(&[5, 4, 3], true, &mut rng);
        let batch = Matrix::from_fn(5, 7, |i, j| ((i * 7 + j) as f64).cos());
        let labels = vec![0, 1, 2, 0, 1, 2, 0];
        let trace = net.backward(&batch, &labels, full(&net)).unwrap();
        for l in 0..net.n_layers() {
            let mut acc = Matrix::zeros(
                trace.mean_grad[l].rows(),
                trace.mean_grad[l].cols(),
            );
            for j in 0..batch.cols() {
                acc.add_scaled(1.0 / batch.cols() as f64, &trace.per_sample[l].materialize(j));
            }
            assert!(acc.sub(&trace.mean_grad[l]).max_abs() < 1e-10);
            assert!(trace.per_sample[l].mean().sub(&trace.mean_grad[l]).max_abs() < 1e-10);
        }
    }

    #[test]
    fn finite_difference_agreement() {
        let mut rng = substream(7, "net-fd", &[]);
        let net = Mlp::new(&[6, 5, 4], true, &mut rng);
        let batch = Matrix::from_fn(6, 9, |i, j| ((i + 2 * j) as f64 * 0.37).sin());
        let labels: Vec<usize> = (0..9).map(|j| j % 4).collect();
        let err = finite_diff_check(&net, &batch, &labels, full(&net), 1e-5, 120, &mut rng)
            .unwrap();
        assert!(err < 1e-4, "max relative error {err}");
        // Halving the step must not grow the error by more than ~4x
        // (second-order truncation behavior, with slack for roundoff).
        let mut rng2 = substream(7, "net-fd2", &[]);
        let err_half =
            finite_diff_check(&net, &batch, &labels, full(&net), 5e-6, 120, &mut rng2).unwrap();
        assert!(err_half < 4.0 * err.max(1e-9), "{err_half} vs {err}");
    }

    #[test]
    fn central_diff_exact_on_quadratic() {
        let f = |x: f64| 3.0 * x * x - 2.0 * x + 1.0;
        let d = central_diff(f, 0.7, 1e-4);
        assert!((d - (6.0 * 0.7 - 2.0)).abs() < 1e-9);
    }

    #[test]
    fn sgd_step_semantics() {
        let mut rng = substream(8, "net-sgd", &[]);
        let mut net = Mlp::new(&[2, 2], true, &mut rng);
        let orig = net.clone();
        let g = vec![Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap()];
        let bg = vec![vec![0.5, -0.5]];
        // lr = 0 leaves parameters unchanged.
        net.sgd_step(&g, &bg, 0.0).unwrap();
        assert_eq!(net, orig);
        // Two steps equal one step at summed displacement.
        let mut one = orig.clone();
        one.sgd_step(&g, &bg, 0.2).unwrap();
        let mut two = orig.clone();
        two.sgd_step(&g, &bg, 0.1).unwrap();
        two.sgd_step(&g, &bg, 0.1).unwrap();
        for l in 0..1 {
            assert!(one.weights[l].sub(&two.weights[l]).max_abs() < 1e-15);
        }
        // Non-finite gradients are refused.
        let mut bad = Matrix::zeros(2, 2);
        bad.set(0, 0, f64::NAN);
        assert!(matches!(
            net.sgd_step(&[bad], &bg, 0.1),
            Err(Error::Numerical { .. })
        ));
    }

    #[test]
    fn multi_head_masks_logits_and_loss() {
        let mut rng = substream(10, "net-head", &[]);
        let net = Mlp::new(&[4, 6], true, &mut rng);
        let batch = Matrix::from_fn(4, 3, |i, j| (i as f64 - j as f64) * 0.2);
        let range = ClassRange { start: 2, end: 4 };
        let (logits, _) = net.forward(&batch, range).unwrap();
        for c in [0usize, 1, 4, 5] {
            for j in 0..3 {
                assert_eq!(logits.get(c, j), f64::NEG_INFINITY);
            }
        }
        // Labels outside the range are rejected.
        assert!(net.backward(&batch, &[0, 2, 3], range).is_err());
        let trace = net.backward(&batch, &[2, 3, 2], range).unwrap();
        // No gradient may leak into out-of-range head rows.
        for c in [0usize, 1, 4, 5] {
            for j in 0..trace.mean_grad[0].cols() {
                assert_eq!(trace.mean_grad[0].get(c, j), 0.0);
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = substream(11, "net-ckpt", &[]);
        let net = Mlp::new(&[5, 4, 3], true, &mut rng);
        let mut buf = Vec::new();
        net.write_to(&mut buf).unwrap();
        let back = Mlp::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(net, back);
    }
}
