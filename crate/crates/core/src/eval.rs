//! Exact-match chunk F1 and the percentage-improvement measure.
//!
//! A predicted chunk is a true positive only when its (first, last)
//! token-index span equals a gold span exactly; chunks are compared by
//! position, never by surface text, so repeated identical terms count
//! separately.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold and prediction have different sentence counts: {gold} vs {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("improvement is undefined for a baseline F1 of {0} >= 100")]
    BaselineAtCeiling(f64),
}

/// Micro-averaged chunk counts with derived precision/recall/F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EvalReport {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> EvalReport {
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        EvalReport { tp, fp, fn_, precision, recall, f1 }
    }
}

/// One method/embedding cell of a results grid, as a percentage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    pub embedding: String,
    pub f1: f64,
    pub std: f64,
}

pub type Chunk = (usize, usize);

/// Micro-averaged exact-match F1: TP/FP/FN counts are summed over all
/// sentences before deriving precision, recall, and F1.
pub fn exact_f1(gold: &[Vec<Chunk>], pred: &[Vec<Chunk>]) -> Result<EvalReport, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch { gold: gold.len(), pred: pred.len() });
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (g, p) in gold.iter().zip(pred) {
        let gset: std::collections::HashSet<Chunk> = g.iter().copied().collect();
        let pset: std::collections::HashSet<Chunk> = p.iter().copied().collect();
        tp += gset.intersection(&pset).count() as u64;
        fp += pset.difference(&gset).count() as u64;
        fn_ += gset.difference(&pset).count() as u64;
    }
    Ok(EvalReport::from_counts(tp, fp, fn_))
}

/// How much of the headroom left by a baseline F1 (`m1`, percent) a second
/// method (`m2`, percent) captures: (m2 − m1) / (100 − m1), as a percent.
pub fn improvement(m1: f64, m2: f64) -> Result<f64, EvalError> {
    if m1 >= 100.0 {
        return Err(EvalError::BaselineAtCeiling(m1));
    }
    Ok((m2 - m1) / (100.0 - m1) * 100.0)
}
