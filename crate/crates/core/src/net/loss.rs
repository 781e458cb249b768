//! Masked softmax cross-entropy over per-position tag scores.

#![allow(clippy::needless_range_loop)]

use super::mat::{logsumexp, Mat};

/// Mean over unmasked positions of −log softmax(scores)[gold]. The returned
/// gradient is with respect to the scores of that mean: (softmax − onehot)
/// scaled by 1/#unmasked, exactly zero at masked positions.
pub fn softmax_xent(scores: &Mat, gold: &[usize], mask: &[bool]) -> (f64, Mat) {
    let (len, k) = (scores.rows(), scores.cols());
    assert_eq!(gold.len(), len);
    assert_eq!(mask.len(), len);
    let mut grad = Mat::zeros(len, k);
    let active = mask.iter().filter(|&&m| m).count();
    if active == 0 {
        return (0.0, grad);
    }
    let scale = 1.0 / active as f64;
    let mut loss = 0.0;
    for t in 0..len {
        if !mask[t] {
            continue;
        }
        let row = scores.row(t);
        let lse = logsumexp(row);
        loss += lse - row[gold[t]];
        for j in 0..k {
            let p = (row[j] - lse).exp();
            let indicator = if j == gold[t] { 1.0 } else { 0.0 };
            grad.set(t, j, (p - indicator) * scale);
        }
    }
    (loss * scale, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_scores_cost_ln_k() {
        let scores = Mat::zeros(4, 3);
        let (loss, _) = softmax_xent(&scores, &[0, 1, 2, 0], &[true; 4]);
        assert_relative_eq!(loss, 3.0_f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn confident_correct_scores_cost_nothing() {
        let mut scores = Mat::zeros(2, 3);
        scores.set(0, 1, 1e6);
        scores.set(1, 0, 1e6);
        let (loss, _) = softmax_xent(&scores, &[1, 0], &[true, true]);
        assert!(loss < 1e-9);
    }

    #[test]
    fn masked_positions_contribute_nothing() {
        let mut scores = Mat::zeros(2, 3);
        scores.set(1, 2, 50.0); // would be a huge loss if unmasked
        let (loss, grad) = softmax_xent(&scores, &[0, 0], &[true, false]);
        assert_relative_eq!(loss, 3.0_f64.ln(), max_relative = 1e-12);
        assert!(grad.row(1).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut scores = Mat::zeros(3, 3);
        let vals = [0.3, -1.2, 0.8, 2.0, 0.1, -0.4, -0.9, 0.55, 1.3];
        for t in 0..3 {
            for j in 0..3 {
                scores.set(t, j, vals[t * 3 + j]);
            }
        }
        let gold = [2, 0, 1];
        let mask = [true, true, false];
        let (_, grad) = softmax_xent(&scores, &gold, &mask);
        let eps = 1e-6;
        for t in 0..3 {
            for j in 0..3 {
                let orig = scores.at(t, j);
                scores.set(t, j, orig + eps);
                let (lp, _) = softmax_xent(&scores, &gold, &mask);
                scores.set(t, j, orig - eps);
                let (lm, _) = softmax_xent(&scores, &gold, &mask);
                scores.set(t, j, orig);
                let numeric = (lp - lm) / (2.0 * eps);
                assert!(
                    (grad.at(t, j) - numeric).abs() < 1e-8,
                    "({t},{j}): analytic {} vs numeric {numeric}",
                    grad.at(t, j)
                );
            }
        }
    }
}
