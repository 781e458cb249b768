//! Linear-chain CRF over the three IOB tags: gold-path scoring, log-partition
//! by the forward recursion, negative log-likelihood with exact gradients
//! from forward-backward marginals, and Viterbi decoding with an optional
//! hard IOB constraint mask.

#![allow(clippy::needless_range_loop)]

use rand::Rng;

use crate::corpus::{IobTag, NUM_TAGS};
use crate::net::mat::{logsumexp, Mat};
use crate::net::ParamSet;

/// Transition, start, and end scores. `trans[i][j]` scores moving from tag i
/// to tag j; all three blocks are learned jointly with the network.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    pub trans: Mat, // K×K
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl CrfParams {
    pub fn zeros() -> CrfParams {
        CrfParams {
            trans: Mat::zeros(NUM_TAGS, NUM_TAGS),
            start: vec![0.0; NUM_TAGS],
            end: vec![0.0; NUM_TAGS],
        }
    }

    pub fn init<R: Rng>(rng: &mut R) -> CrfParams {
        CrfParams {
            trans: Mat::uniform(NUM_TAGS, NUM_TAGS, -0.1, 0.1, rng),
            start: (0..NUM_TAGS).map(|_| rng.gen_range(-0.1..=0.1)).collect(),
            end: (0..NUM_TAGS).map(|_| rng.gen_range(-0.1..=0.1)).collect(),
        }
    }
}

impl ParamSet for CrfParams {
    fn visit_groups(&self, f: &mut dyn FnMut(&str, &[f64], &[usize])) {
        f("trans", self.trans.data(), &[NUM_TAGS, NUM_TAGS]);
        f("start", &self.start, &[NUM_TAGS]);
        f("end", &self.end, &[NUM_TAGS]);
    }

    fn visit_groups_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("trans", self.trans.data_mut());
        f("start", &mut self.start);
        f("end", &mut self.end);
    }
}

/// Score of one tag path: start + emissions along the path + transitions +
/// end.
pub fn path_score(emissions: &Mat, tags: &[usize], p: &CrfParams) -> f64 {
    assert_eq!(emissions.rows(), tags.len());
    assert!(!tags.is_empty());
    let mut score = p.start[tags[0]] + emissions.at(0, tags[0]);
    for t in 1..tags.len() {
        score += p.trans.at(tags[t - 1], tags[t]) + emissions.at(t, tags[t]);
    }
    score + p.end[tags[tags.len() - 1]]
}

fn forward_alphas(emissions: &Mat, p: &CrfParams) -> Vec<Vec<f64>> {
    let (len, k) = (emissions.rows(), emissions.cols());
    let mut alpha = vec![vec![0.0; k]; len];
    for j in 0..k {
        alpha[0][j] = p.start[j] + emissions.at(0, j);
    }
    let mut scratch = vec![0.0; k];
    for t in 1..len {
        for j in 0..k {
            for i in 0..k {
                scratch[i] = alpha[t - 1][i] + p.trans.at(i, j);
            }
            alpha[t][j] = logsumexp(&scratch) + emissions.at(t, j);
        }
    }
    alpha
}

fn backward_betas(emissions: &Mat, p: &CrfParams) -> Vec<Vec<f64>> {
    let (len, k) = (emissions.rows(), emissions.cols());
    let mut beta = vec![vec![0.0; k]; len];
    beta[len - 1].copy_from_slice(&p.end);
    let mut scratch = vec![0.0; k];
    for t in (0..len - 1).rev() {
        for i in 0..k {
            for j in 0..k {
                scratch[j] = p.trans.at(i, j) + emissions.at(t + 1, j) + beta[t + 1][j];
            }
            beta[t][i] = logsumexp(&scratch);
        }
    }
    beta
}

/// log Σ over all K^L paths of exp(path_score), by the forward recursion in
/// log space.
pub fn log_partition(emissions: &Mat, p: &CrfParams) -> f64 {
    assert!(emissions.rows() >= 1);
    let alpha = forward_alphas(emissions, p);
    let last = alpha.last().unwrap();
    let terms: Vec<f64> = last.iter().zip(&p.end).map(|(a, e)| a + e).collect();
    logsumexp(&terms)
}

/// Per-position tag marginals P(y_t = j), for diagnostics and tests.
pub fn marginals(emissions: &Mat, p: &CrfParams) -> Mat {
    let (len, k) = (emissions.rows(), emissions.cols());
    let alpha = forward_alphas(emissions, p);
    let beta = backward_betas(emissions, p);
    let log_z = log_partition(emissions, p);
    let mut mu = Mat::zeros(len, k);
    for t in 0..len {
        for j in 0..k {
            mu.set(t, j, (alpha[t][j] + beta[t][j] - log_z).exp());
        }
    }
    mu
}

/// Negative log-likelihood of the gold path with exact gradients: expected
/// feature counts (forward-backward marginals) minus gold indicator counts.
/// Returns (loss, d_emissions, d_params).
pub fn crf_nll(emissions: &Mat, gold: &[usize], p: &CrfParams) -> (f64, Mat, CrfParams) {
    let (len, k) = (emissions.rows(), emissions.cols());
    assert_eq!(gold.len(), len);

    let alpha = forward_alphas(emissions, p);
    let beta = backward_betas(emissions, p);
    let last_terms: Vec<f64> = alpha[len - 1].iter().zip(&p.end).map(|(a, e)| a + e).collect();
    let log_z = logsumexp(&last_terms);
    let loss = log_z - path_score(emissions, gold, p);

    let mut d_emissions = Mat::zeros(len, k);
    let mut d_p = CrfParams::zeros();

    // unary marginals
    for t in 0..len {
        for j in 0..k {
            let m = (alpha[t][j] + beta[t][j] - log_z).exp();
            let indicator = if gold[t] == j { 1.0 } else { 0.0 };
            d_emissions.set(t, j, m - indicator);
            if t == 0 {
                d_p.start[j] = m - indicator;
            }
            if t == len - 1 {
                d_p.end[j] = m - indicator;
            }
        }
    }

    // pairwise marginals
    for t in 0..len - 1 {
        for i in 0..k {
            for j in 0..k {
                let lp = alpha[t][i] + p.trans.at(i, j) + emissions.at(t + 1, j) + beta[t + 1][j]
                    - log_z;
                let mut v = d_p.trans.at(i, j) + lp.exp();
                if gold[t] == i && gold[t + 1] == j {
                    v -= 1.0;
                }
                d_p.trans.set(i, j, v);
            }
        }
    }

    (loss, d_emissions, d_p)
}

/// Highest-scoring tag path. Ties break toward the lower tag index at every
/// backpointer. Constrained mode forbids the transitions `start → I-aspect`
/// and `O → I-aspect`, so the output is always IOB-valid.
pub fn viterbi(emissions: &Mat, p: &CrfParams, constrained: bool) -> (Vec<usize>, f64) {
    let (len, k) = (emissions.rows(), emissions.cols());
    assert!(len >= 1);
    let banned_start = |j: usize| constrained && j == IobTag::I.index();
    let banned_trans =
        |i: usize, j: usize| constrained && i == IobTag::O.index() && j == IobTag::I.index();

    let mut delta = vec![vec![f64::NEG_INFINITY; k]; len];
    let mut back = vec![vec![0usize; k]; len];
    for j in 0..k {
        delta[0][j] = if banned_start(j) {
            f64::NEG_INFINITY
        } else {
            p.start[j] + emissions.at(0, j)
        };
    }
    for t in 1..len {
        for j in 0..k {
            let mut best_i = 0usize;
            let mut best = f64::NEG_INFINITY;
            for i in 0..k {
                let score = if banned_trans(i, j) {
                    f64::NEG_INFINITY
                } else {
                    delta[t - 1][i] + p.trans.at(i, j)
                };
                if score > best {
                    best = score;
                    best_i = i;
                }
            }
            delta[t][j] = best + emissions.at(t, j);
            back[t][j] = best_i;
        }
    }

    let mut best_j = 0usize;
    let mut best = f64::NEG_INFINITY;
    for j in 0..k {
        let score = delta[len - 1][j] + p.end[j];
        if score > best {
            best = score;
            best_j = j;
        }
    }
    let mut path = vec![0usize; len];
    path[len - 1] = best_j;
    for t in (0..len - 1).rev() {
        path[t] = back[t + 1][path[t + 1]];
    }
    (path, best)
}
