//! Mini-batch Adam training of the classification head.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embedding::{EmbeddingProvider, SparseVec};
use super::head::{ClassifierHead, DEFAULT_HIDDEN, NUM_CLASSES};
use super::loss::{soft_bootstrap_grad_logits, soft_bootstrap_loss};
use super::metrics::evaluate_examples;
use super::DetectorError;
use crate::weak_label::{Label, LabeledSpan};

/// Learning rate suited to the native hashed provider.
pub const HASHED_LEARNING_RATE: f64 = 3e-4;
/// Learning rate for frozen 768-dimensional transformer embeddings.
pub const EXTERNAL_LEARNING_RATE: f64 = 3e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the observed label in the bootstrap target.
    pub beta: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Global gradient norm cap.
    pub clip_norm: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub dropout: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 0.20,
            learning_rate: HASHED_LEARNING_RATE,
            batch_size: 32,
            clip_norm: 1.0,
            epochs: 35,
            seed: 0,
            hidden: DEFAULT_HIDDEN,
            dropout: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Defaults with the learning rate used for precomputed transformer embeddings.
    pub fn for_external_embeddings() -> Self {
        Self {
            learning_rate: EXTERNAL_LEARNING_RATE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |m: &str| Err(DetectorError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta must be in [0, 1]");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad("clip_norm must be positive");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return bad("batch_size and hidden must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        Ok(())
    }
}

/// An embedded training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: SparseVec,
    /// Class index: 0 non-descriptive, 1 descriptive.
    pub class: usize,
}

impl Example {
    pub fn from_span(span: &LabeledSpan, provider: &dyn EmbeddingProvider) -> Self {
        Self {
            x: provider.embed_sparse(&span.text),
            class: span.label.class_index(),
        }
    }
}

pub fn embed_spans(spans: &[LabeledSpan], provider: &dyn EmbeddingProvider) -> Vec<Example> {
    spans.iter().map(|s| Example::from_span(s, provider)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean bootstrap loss over the epoch's training examples.
    pub train_loss: f64,
    /// Descriptive-class F1 on the validation split, when one is given.
    pub val_f1: Option<f64>,
}

/// Trains a head on spans embedded by `provider`. The provider is only read.
pub fn train(
    corpus: &[LabeledSpan],
    provider: &dyn EmbeddingProvider,
    cfg: &TrainConfig,
) -> Result<ClassifierHead, DetectorError> {
    train_with_validation(corpus, &[], provider, cfg).map(|(h, _)| h)
}

pub fn train_with_validation(
    corpus: &[LabeledSpan],
    validation: &[LabeledSpan],
    provider: &dyn EmbeddingProvider,
    cfg: &TrainConfig,
) -> Result<(ClassifierHead, Vec<EpochLog>), DetectorError> {
    let labels: Vec<Label> = corpus.iter().map(|s| s.label).collect();
    if !labels.contains(&Label::Descriptive) || !labels.contains(&Label::NonDescriptive) {
        return Err(DetectorError::DegenerateCorpus);
    }
    let train = embed_spans(corpus, provider);
    let val = embed_spans(validation, provider);
    train_examples(&train, &val, provider.dim(), cfg)
}

/// Trains on pre-embedded examples. Deterministic in `cfg.seed`.
pub fn train_examples(
    train: &[Example],
    validation: &[Example],
    input_dim: usize,
    cfg: &TrainConfig,
) -> Result<(ClassifierHead, Vec<EpochLog>), DetectorError> {
    cfg.validate()?;
    let has = |c| train.iter().any(|e| e.class == c);
    if !has(0) || !has(1) {
        return Err(DetectorError::DegenerateCorpus);
    }
    if let Some(e) = train.iter().chain(validation).find(|e| e.x.dim != input_dim) {
        return Err(DetectorError::DimensionMismatch {
            expected: input_dim,
            found: e.x.dim,
        });
    }

    let mut head = ClassifierHead::new(input_dim, cfg.hidden, cfg.dropout, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005E_ED0F_DA7A);
    let mut adam = Adam::new(head.params().len(), cfg);
    let mut grad = vec![0.0; head.params().len()];
    let mut touched = vec![false; input_dim];
    let mut touched_rows: Vec<usize> = Vec::new();
    let mut order: Vec<usize> = Vec::with_capacity(train.len());
    let mut log = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        stratified_order(train, &mut rng, &mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for &idx in batch {
                let ex = &train[idx];
                let input = head.apply_dropout(&ex.x, &mut rng);
                for &i in &input.indices {
                    let i = i as usize;
                    if !touched[i] {
                        touched[i] = true;
                        touched_rows.push(i);
                    }
                }
                let cache = head.forward_cached(input);
                let mut target = [0.0; NUM_CLASSES];
                target[ex.class] = 1.0;
                loss_sum += soft_bootstrap_loss(&cache.probs, &target, cfg.beta);
                let dz = soft_bootstrap_grad_logits(&cache.probs, &target, cfg.beta);
                head.accumulate_gradient(&cache, [dz[0], dz[1]], scale, &mut grad);
            }

            // W1 gradient is non-zero only on rows of inputs seen in this batch
            let tail = head.dense_tail_start();
            let mut sq: f64 = grad[tail..].iter().map(|g| g * g).sum();
            for &r in &touched_rows {
                sq += grad[head.w1_row(r)].iter().map(|g| g * g).sum::<f64>();
            }
            let norm = sq.sqrt();
            let clip = if norm > cfg.clip_norm {
                cfg.clip_norm / norm
            } else {
                1.0
            };

            adam.step(head.params_mut(), &grad, clip);

            grad[tail..].fill(0.0);
            for &r in &touched_rows {
                let row = head.w1_row(r);
                grad[row].fill(0.0);
                touched[r] = false;
            }
            touched_rows.clear();
        }
        let train_loss = loss_sum / train.len() as f64;
        let val_f1 = (!validation.is_empty()).then(|| evaluate_examples(&head, validation, 0.5).descriptive.f1);
        match val_f1 {
            Some(f1) => log::info!(
                "epoch {epoch}/{}: train loss {train_loss:.5}, val F1 {f1:.4}",
                cfg.epochs
            ),
            None => log::info!("epoch {epoch}/{}: train loss {train_loss:.5}", cfg.epochs),
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_f1,
        });
    }
    Ok((head, log))
}

/// Shuffles each observed class separately and interleaves them in proportion,
/// so every mini-batch carries close to the corpus label ratio.
fn stratified_order(train: &[Example], rng: &mut ChaCha8Rng, order: &mut Vec<usize>) {
    let mut by_class: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, e) in train.iter().enumerate() {
        by_class[e.class].push(i);
    }
    for c in &mut by_class {
        c.shuffle(rng);
    }
    let share = by_class[1].len() as f64 / train.len() as f64;
    order.clear();
    let (mut a, mut b) = (by_class[0].iter(), by_class[1].iter());
    let mut ones = 0;
    for k in 1..=train.len() {
        // class 1 goes next whenever it is behind its share of the prefix
        let next = if (k as f64 * share).round() as usize > ones {
            b.next().or_else(|| a.next())
        } else {
            a.next().or_else(|| b.next())
        };
        let i = *next.expect("one list is non-empty");
        ones += usize::from(train[i].class == 1);
        order.push(i);
    }
}

/// Adam with PyTorch-style bias correction.
struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self {
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// Applies one update with gradient `grad * grad_scale`.
    fn step(&mut self, params: &mut [f64], grad: &[f64], grad_scale: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2_sqrt = (1.0 - self.beta2.powi(self.t)).sqrt();
        let step = self.lr / bc1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            let g = g * grad_scale;
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= step * *m / (v.sqrt() / bc2_sqrt + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::embedding::HashedNgramProvider;

    fn span(text: &str, label: Label) -> LabeledSpan {
        LabeledSpan::new(text, label, "test").unwrap()
    }

    fn toy_corpus() -> Vec<LabeledSpan> {
        let d = "leaves opposite petals white fruit berry bark smooth leaflets ovate";
        let n = "the war ended in the year when the treaty was signed";
        (0..20)
            .flat_map(|_| [span(d, Label::Descriptive), span(n, Label::NonDescriptive)])
            .collect()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            hidden: 16,
            batch_size: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let corpus: Vec<_> = toy_corpus()
            .into_iter()
            .filter(|s| s.label == Label::Descriptive)
            .collect();
        let p = HashedNgramProvider::new(64, 0);
        assert!(matches!(
            train(&corpus, &p, &small_cfg()),
            Err(DetectorError::DegenerateCorpus)
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let p = HashedNgramProvider::new(64, 0);
        let cfg = TrainConfig {
            beta: 1.5,
            ..small_cfg()
        };
        assert!(matches!(train(&toy_corpus(), &p, &cfg), Err(DetectorError::Config(_))));
        let cfg = TrainConfig {
            clip_norm: 0.0,
            ..small_cfg()
        };
        assert!(train(&toy_corpus(), &p, &cfg).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let p = HashedNgramProvider::new(64, 0);
        let a = train(&toy_corpus(), &p, &small_cfg()).unwrap();
        let b = train(&toy_corpus(), &p, &small_cfg()).unwrap();
        assert_eq!(a.params(), b.params());
        let c = train(&toy_corpus(), &p, &TrainConfig { seed: 1, ..small_cfg() }).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn learns_a_separable_toy_problem() {
        let p = HashedNgramProvider::new(64, 0);
        let corpus = toy_corpus();
        let cfg = TrainConfig {
            epochs: 40,
            ..small_cfg()
        };
        let (head, log) = train_with_validation(&corpus, &corpus, &p, &cfg).unwrap();
        assert_eq!(log.len(), 40);
        assert!(log.last().unwrap().train_loss.is_finite());
        assert_eq!(log.last().unwrap().val_f1, Some(1.0));
        let q = head.predict(&p.embed_sparse("fruit berry petals white")).unwrap();
        assert!(q[1] > 0.5);
    }

    #[test]
    fn provider_is_untouched() {
        let p = HashedNgramProvider::new(64, 0);
        let probe = ["leaves opposite", "the war", ""];
        let before: Vec<_> = probe.iter().map(|t| p.embed(t)).collect();
        train(&toy_corpus(), &p, &small_cfg()).unwrap();
        let after: Vec<_> = probe.iter().map(|t| p.embed(t)).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn stratified_batches_keep_the_label_ratio() {
        let examples: Vec<Example> = (0..100)
            .map(|i| Example {
                x: SparseVec::default(),
                class: usize::from(i % 4 == 0),
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut order = Vec::new();
        stratified_order(&examples, &mut rng, &mut order);
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
        for chunk in order.chunks(20) {
            assert_eq!(chunk.iter().filter(|&&i| examples[i].class == 1).count(), 5);
        }
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(2, &cfg);
        let mut p = vec![1.0, 1.0];
        adam.step(&mut p, &[0.5, -2.0], 1.0);
        // bias-corrected first step is lr * sign(g), up to eps
        assert!((p[0] - (1.0 - cfg.learning_rate)).abs() < 1e-9);
        assert!((p[1] - (1.0 + cfg.learning_rate)).abs() < 1e-9);
    }
}
