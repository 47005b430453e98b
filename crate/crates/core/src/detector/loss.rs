//! Soft bootstrapping loss for noisy labels.
//!
//! `L(q, t) = -Σ_k [β t_k + (1-β) q_k] log q_k`
//!
//! The target is the observed label diluted by the model's own prediction, so
//! examples the model confidently disagrees with pull less on the weights.
//! At β = 1 this is cross-entropy; at β = 0 it is the prediction entropy.
//! The prediction inside the target is differentiated through.

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-7;

fn clamp(q: f64) -> f64 {
    q.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

pub fn soft_bootstrap_loss(q: &[f64], t: &[f64], beta: f64) -> f64 {
    debug_assert_eq!(q.len(), t.len());
    -q.iter()
        .zip(t)
        .map(|(&qk, &tk)| {
            let qc = clamp(qk);
            (beta * tk + (1.0 - beta) * qc) * qc.ln()
        })
        .sum::<f64>()
}

/// Plain cross-entropy `-Σ t_k log q_k` with the same clamping.
pub fn cross_entropy(q: &[f64], t: &[f64]) -> f64 {
    -q.iter().zip(t).map(|(&qk, &tk)| tk * clamp(qk).ln()).sum::<f64>()
}

/// Prediction entropy `-Σ q_k log q_k` with the same clamping.
pub fn prediction_entropy(q: &[f64]) -> f64 {
    -q.iter().map(|&qk| clamp(qk) * clamp(qk).ln()).sum::<f64>()
}

/// dL/dq_k. Components outside the clamp range have zero derivative.
pub fn soft_bootstrap_grad_probs(q: &[f64], t: &[f64], beta: f64) -> Vec<f64> {
    q.iter()
        .zip(t)
        .map(|(&qk, &tk)| {
            if qk <= PROB_EPS || qk >= 1.0 - PROB_EPS {
                return 0.0;
            }
            -(beta * tk + (1.0 - beta) * qk) / qk - (1.0 - beta) * qk.ln()
        })
        .collect()
}

/// dL/dz for `q = softmax(z)`.
pub fn soft_bootstrap_grad_logits(q: &[f64], t: &[f64], beta: f64) -> Vec<f64> {
    let g = soft_bootstrap_grad_probs(q, t, beta);
    let gq: f64 = g.iter().zip(q).map(|(a, b)| a * b).sum();
    q.iter().zip(&g).map(|(&qj, &gj)| qj * (gj - gq)).collect()
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
