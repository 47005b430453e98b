//! Two-layer classification head: dropout → linear(D, H) → ReLU → linear(H, 2) → softmax.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::embedding::SparseVec;
use super::loss::{soft_bootstrap_grad_logits, soft_bootstrap_loss, softmax};
use super::DetectorError;

pub const DEFAULT_HIDDEN: usize = 512;
pub const NUM_CLASSES: usize = 2;

/// Parameters live in one flat vector laid out as `[W1 | b1 | W2 | b2]`.
///
/// `W1` is stored input-major (row `i` holds the weights from input `i` to
/// every hidden unit) so that sparse inputs touch contiguous rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    input_dim: usize,
    hidden: usize,
    dropout: f64,
    params: Vec<f64>,
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub input: SparseVec,
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub probs: [f64; NUM_CLASSES],
}

impl ClassifierHead {
    /// Xavier-uniform first layer; output layer and biases start at zero so
    /// every initial prediction is exactly uniform.
    pub fn new(input_dim: usize, hidden: usize, dropout: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&dropout), "dropout rate must be in [0, 1)");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = Self::param_count(input_dim, hidden);
        let mut params = vec![0.0; n];
        let l1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let head = Self {
            input_dim,
            hidden,
            dropout,
            params: Vec::new(),
        };
        for p in &mut params[head.w1_range()] {
            *p = rng.random_range(-l1..l1);
        }
        Self { params, ..head }
    }

    pub fn from_params(input_dim: usize, hidden: usize, dropout: f64, params: Vec<f64>) -> Result<Self, DetectorError> {
        let expected = Self::param_count(input_dim, hidden);
        if params.len() != expected {
            return Err(DetectorError::DimensionMismatch {
                expected,
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(DetectorError::ModelFile("non-finite parameter".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(DetectorError::ModelFile(format!(
                "dropout rate {dropout} outside [0, 1)"
            )));
        }
        Ok(Self {
            input_dim,
            hidden,
            dropout,
            params,
        })
    }

    pub fn param_count(input_dim: usize, hidden: usize) -> usize {
        input_dim * hidden + hidden + hidden * NUM_CLASSES + NUM_CLASSES
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.input_dim * self.hidden
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.input_dim * self.hidden;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.b1_range().end;
        s..s + self.hidden * NUM_CLASSES
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.w2_range().end;
        s..s + NUM_CLASSES
    }

    /// Start and end of the row of `W1` belonging to input `i`.
    pub(crate) fn w1_row(&self, i: usize) -> std::ops::Range<usize> {
        i * self.hidden..(i + 1) * self.hidden
    }

    /// Offset where the dense tail `[b1 | W2 | b2]` starts.
    pub(crate) fn dense_tail_start(&self) -> usize {
        self.b1_range().start
    }

    fn check_dim(&self, x: &SparseVec) -> Result<(), DetectorError> {
        if x.dim != self.input_dim {
            return Err(DetectorError::DimensionMismatch {
                expected: self.input_dim,
                found: x.dim,
            });
        }
        Ok(())
    }

    /// Class probabilities. Dropout on the input is applied only in `train_mode`.
    pub fn forward(
        &self,
        x: &SparseVec,
        train_mode: bool,
        rng: &mut impl Rng,
    ) -> Result<[f64; NUM_CLASSES], DetectorError> {
        self.check_dim(x)?;
        let input = if train_mode {
            self.apply_dropout(x, rng)
        } else {
            x.clone()
        };
        Ok(self.forward_cached(input).probs)
    }

    pub fn forward_dense(
        &self,
        x: &[f64],
        train_mode: bool,
        rng: &mut impl Rng,
    ) -> Result<[f64; NUM_CLASSES], DetectorError> {
        self.forward(&SparseVec::from_dense(x), train_mode, rng)
    }

    /// Evaluation-mode probabilities.
    pub fn predict(&self, x: &SparseVec) -> Result<[f64; NUM_CLASSES], DetectorError> {
        self.check_dim(x)?;
        Ok(self.forward_cached(x.clone()).probs)
    }

    /// Inverted dropout over the non-zero inputs.
    pub(crate) fn apply_dropout(&self, x: &SparseVec, rng: &mut impl Rng) -> SparseVec {
        if self.dropout == 0.0 {
            return x.clone();
        }
        let keep = 1.0 - self.dropout;
        let mut out = SparseVec {
            dim: x.dim,
            indices: Vec::with_capacity(x.nnz()),
            values: Vec::with_capacity(x.nnz()),
        };
        for (&i, &v) in x.indices.iter().zip(&x.values) {
            if rng.random::<f64>() < keep {
                out.indices.push(i);
                out.values.push(v / keep);
            }
        }
        out
    }

    pub(crate) fn forward_cached(&self, input: SparseVec) -> ForwardCache {
        let h = self.hidden;
        let mut pre = self.params[self.b1_range()].to_vec();
        for (&i, &v) in input.indices.iter().zip(&input.values) {
            let row = &self.params[self.w1_row(i as usize)];
            for (p, w) in pre.iter_mut().zip(row) {
                *p += v * w;
            }
        }
        let hidden: Vec<f64> = pre.iter().map(|&p| p.max(0.0)).collect();
        let w2 = &self.params[self.w2_range()];
        let b2 = &self.params[self.b2_range()];
        let mut logits = [b2[0], b2[1]];
        for j in 0..h {
            let hj = hidden[j];
            if hj != 0.0 {
                logits[0] += hj * w2[j * NUM_CLASSES];
                logits[1] += hj * w2[j * NUM_CLASSES + 1];
            }
        }
        let q = softmax(&logits);
        ForwardCache {
            input,
            pre,
            hidden,
            probs: [q[0], q[1]],
        }
    }

    /// Adds `scale * dL/dθ` into `grad` given `dL/dz` at the logits.
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn accumulate_gradient(
        &self,
        cache: &ForwardCache,
        dz: [f64; NUM_CLASSES],
        scale: f64,
        grad: &mut [f64],
    ) {
        let h = self.hidden;
        let w2 = self.w2_range();
        let b2 = self.b2_range();
        let b1 = self.b1_range();
        grad[b2.start] += scale * dz[0];
        grad[b2.start + 1] += scale * dz[1];
        let mut dpre = vec![0.0; h];
        for j in 0..h {
            let hj = cache.hidden[j];
            let w = w2.start + j * NUM_CLASSES;
            grad[w] += scale * hj * dz[0];
            grad[w + 1] += scale * hj * dz[1];
            if cache.pre[j] > 0.0 {
                dpre[j] = self.params[w] * dz[0] + self.params[w + 1] * dz[1];
            }
        }
        for (g, d) in grad[b1].iter_mut().zip(&dpre) {
            *g += scale * d;
        }
        for (&i, &v) in cache.input.indices.iter().zip(&cache.input.values) {
            let row = self.w1_row(i as usize);
            for (g, d) in grad[row].iter_mut().zip(&dpre) {
                *g += scale * v * d;
            }
        }
    }

    /// Evaluation-mode loss and full parameter gradient for one example.
    pub fn loss_and_gradient(
        &self,
        x: &SparseVec,
        target: [f64; NUM_CLASSES],
        beta: f64,
    ) -> Result<(f64, Vec<f64>), DetectorError> {
        self.check_dim(x)?;
        let cache = self.forward_cached(x.clone());
        let loss = soft_bootstrap_loss(&cache.probs, &target, beta);
        let dz = soft_bootstrap_grad_logits(&cache.probs, &target, beta);
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_gradient(&cache, [dz[0], dz[1]], 1.0, &mut grad);
        Ok((loss, grad))
    }

    /// Evaluation-mode loss only.
    pub fn loss(&self, x: &SparseVec, target: [f64; NUM_CLASSES], beta: f64) -> Result<f64, DetectorError> {
        let q = self.predict(x)?;
        Ok(soft_bootstrap_loss(&q, &target, beta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(dim: usize) -> SparseVec {
        SparseVec::from_dense(&(0..dim).map(|i| ((i as f64) * 0.37).sin()).collect::<Vec<_>>())
    }

    #[test]
    fn probabilities_sum_to_one() {
        let head = ClassifierHead::new(16, DEFAULT_HIDDEN, 0.1, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for train in [false, true] {
            let q = head.forward(&input(16), train, &mut rng).unwrap();
            assert!((q[0] + q[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let head = ClassifierHead::new(16, 8, 0.0, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            head.forward(&input(15), false, &mut rng),
            Err(DetectorError::DimensionMismatch {
                expected: 16,
                found: 15
            })
        ));
    }

    #[test]
    fn eval_mode_ignores_dropout() {
        let head = ClassifierHead::new(16, 8, 0.5, 1);
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(
            head.forward(&input(16), false, &mut a).unwrap(),
            head.forward(&input(16), false, &mut b).unwrap()
        );
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradient_matches_finite_differences() {
        let mut head = ClassifierHead::new(6, 12, 0.0, 9);
        let x = input(6);
        let (_, g) = head.loss_and_gradient(&x, [0.0, 1.0], 0.2).unwrap();
        let h = 1e-6;
        for k in 0..head.params().len() {
            let orig = head.params()[k];
            head.params_mut()[k] = orig + h;
            let lp = head.loss(&x, [0.0, 1.0], 0.2).unwrap();
            head.params_mut()[k] = orig - h;
            let lm = head.loss(&x, [0.0, 1.0], 0.2).unwrap();
            head.params_mut()[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6, "param {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn from_params_validates_length() {
        assert!(ClassifierHead::from_params(4, 3, 0.1, vec![0.0; 5]).is_err());
        let n = ClassifierHead::param_count(4, 3);
        assert!(ClassifierHead::from_params(4, 3, 0.1, vec![0.0; n]).is_ok());
    }
}
