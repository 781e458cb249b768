//! LSTM cell and sequence runners with hand-derived backpropagation through
//! time.
//!
//! Gate order everywhere is `i, f, g, o` (input, forget, candidate, output):
//!
//! ```text
//! i = σ(W_i x + U_i h₋ + b_i)      f = σ(W_f x + U_f h₋ + b_f)
//! g = tanh(W_g x + U_g h₋ + b_g)   o = σ(W_o x + U_o h₋ + b_o)
//! c = f ⊙ c₋ + i ⊙ g               h = o ⊙ tanh(c)
//! ```

#![allow(clippy::needless_range_loop)]

use rand::Rng;

use super::mat::{add_assign, sigmoid, Mat};
use super::params::ParamSet;
use super::NetError;

pub const GATE_NAMES: [&str; 4] = ["i", "f", "g", "o"];

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Input weights per gate, H×D.
    pub w: [Mat; 4],
    /// Recurrent weights per gate, H×H.
    pub u: [Mat; 4],
    /// Biases per gate, H.
    pub b: [Vec<f64>; 4],
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> LstmParams {
        LstmParams {
            input_dim,
            hidden_dim,
            w: std::array::from_fn(|_| Mat::zeros(hidden_dim, input_dim)),
            u: std::array::from_fn(|_| Mat::zeros(hidden_dim, hidden_dim)),
            b: std::array::from_fn(|_| vec![0.0; hidden_dim]),
        }
    }

    /// Glorot-uniform weights, zero biases, forget-gate bias +1.
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> LstmParams {
        let mut p = LstmParams {
            input_dim,
            hidden_dim,
            w: std::array::from_fn(|_| Mat::glorot(hidden_dim, input_dim, rng)),
            u: std::array::from_fn(|_| Mat::glorot(hidden_dim, hidden_dim, rng)),
            b: std::array::from_fn(|_| vec![0.0; hidden_dim]),
        };
        for v in p.b[1].iter_mut() {
            *v = 1.0;
        }
        p
    }
}

impl ParamSet for LstmParams {
    fn visit_groups(&self, f: &mut dyn FnMut(&str, &[f64], &[usize])) {
        let (h, d) = (self.hidden_dim, self.input_dim);
        for (gate, name) in GATE_NAMES.iter().enumerate() {
            f(&format!("w_{name}"), self.w[gate].data(), &[h, d]);
        }
        for (gate, name) in GATE_NAMES.iter().enumerate() {
            f(&format!("u_{name}"), self.u[gate].data(), &[h, h]);
        }
        for (gate, name) in GATE_NAMES.iter().enumerate() {
            f(&format!("b_{name}"), &self.b[gate], &[h]);
        }
    }

    fn visit_groups_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (gate, name) in GATE_NAMES.iter().enumerate() {
            f(&format!("w_{name}"), self.w[gate].data_mut());
        }
        for (gate, name) in GATE_NAMES.iter().enumerate() {
            f(&format!("u_{name}"), self.u[gate].data_mut());
        }
        for (gate, name) in GATE_NAMES.iter().enumerate() {
            f(&format!("b_{name}"), &mut self.b[gate]);
        }
    }
}

/// One LSTM step from `(h_prev, c_prev)`. Fails on non-finite input.
pub fn lstm_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    p: &LstmParams,
) -> Result<(Vec<f64>, Vec<f64>), NetError> {
    if x.iter().chain(h_prev).chain(c_prev).any(|v| !v.is_finite()) {
        return Err(NetError::NonFinite("lstm_step input".into()));
    }
    let step = step_with_cache(x, h_prev, c_prev, p);
    Ok((step.h, step.c))
}

/// Everything the backward pass needs from one step.
#[derive(Debug, Clone)]
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates, order i, f, g, o.
    gates: [Vec<f64>; 4],
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn step_with_cache(x: &[f64], h_prev: &[f64], c_prev: &[f64], p: &LstmParams) -> StepCache {
    let h_dim = p.hidden_dim;
    let mut pre: [Vec<f64>; 4] = std::array::from_fn(|g| p.b[g].clone());
    for g in 0..4 {
        p.w[g].matvec_acc(x, &mut pre[g]);
        p.u[g].matvec_acc(h_prev, &mut pre[g]);
    }
    let gates: [Vec<f64>; 4] = [
        pre[0].iter().map(|&v| sigmoid(v)).collect(),
        pre[1].iter().map(|&v| sigmoid(v)).collect(),
        pre[2].iter().map(|&v| v.tanh()).collect(),
        pre[3].iter().map(|&v| sigmoid(v)).collect(),
    ];
    let mut c = vec![0.0; h_dim];
    for j in 0..h_dim {
        c[j] = gates[1][j] * c_prev[j] + gates[0][j] * gates[2][j];
    }
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..h_dim).map(|j| gates[3][j] * tanh_c[j]).collect();
    StepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c,
        tanh_c,
        h,
    }
}

/// Forward scan over a sequence from zero initial state, retaining the
/// per-step intermediates for [`lstm_backward`].
#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<StepCache>,
    hidden_dim: usize,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn hidden(&self, t: usize) -> &[f64] {
        &self.steps[t].h
    }

    pub fn last_hidden(&self) -> &[f64] {
        &self.steps.last().expect("empty trace").h
    }
}

pub fn lstm_forward(seq: &[Vec<f64>], p: &LstmParams) -> Result<LstmTrace, NetError> {
    if seq.is_empty() {
        return Err(NetError::EmptySequence);
    }
    let mut h = vec![0.0; p.hidden_dim];
    let mut c = vec![0.0; p.hidden_dim];
    let mut steps = Vec::with_capacity(seq.len());
    for x in seq {
        let step = step_with_cache(x, &h, &c, p);
        h = step.h.clone();
        c = step.c.clone();
        steps.push(step);
    }
    Ok(LstmTrace { steps, hidden_dim: p.hidden_dim })
}

/// Backpropagation through time. `d_hidden[t]` is the upstream gradient on
/// the step-`t` hidden output; parameter gradients accumulate into `grads`
/// (same shape as the params). Returns the gradient on each input vector.
pub fn lstm_backward(
    trace: &LstmTrace,
    p: &LstmParams,
    d_hidden: &[Vec<f64>],
    grads: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let len = trace.steps.len();
    assert_eq!(d_hidden.len(), len);
    let h_dim = trace.hidden_dim;
    let mut dx = vec![vec![0.0; p.input_dim]; len];
    let mut dh_next = vec![0.0; h_dim]; // grad flowing from step t+1 into h_t
    let mut dc_next = vec![0.0; h_dim]; // grad flowing from step t+1 into c_t

    for t in (0..len).rev() {
        let s = &trace.steps[t];
        let (gi, gf, gg, go) = (&s.gates[0], &s.gates[1], &s.gates[2], &s.gates[3]);

        let mut dh = d_hidden[t].clone();
        add_assign(&mut dh, &dh_next);

        // h = o ⊙ tanh(c)
        let mut dc = dc_next.clone();
        let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; h_dim]);
        for j in 0..h_dim {
            let d_o = dh[j] * s.tanh_c[j];
            da[3][j] = d_o * go[j] * (1.0 - go[j]);
            dc[j] += dh[j] * go[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);

            let d_i = dc[j] * gg[j];
            let d_f = dc[j] * s.c_prev[j];
            let d_g = dc[j] * gi[j];
            da[0][j] = d_i * gi[j] * (1.0 - gi[j]);
            da[1][j] = d_f * gf[j] * (1.0 - gf[j]);
            da[2][j] = d_g * (1.0 - gg[j] * gg[j]);
        }

        let mut dh_prev = vec![0.0; h_dim];
        for g in 0..4 {
            grads.w[g].add_outer(&da[g], &s.x);
            grads.u[g].add_outer(&da[g], &s.h_prev);
            add_assign(&mut grads.b[g], &da[g]);
            p.w[g].t_matvec_acc(&da[g], &mut dx[t]);
            p.u[g].t_matvec_acc(&da[g], &mut dh_prev);
        }

        dh_next = dh_prev;
        for j in 0..h_dim {
            dc_next[j] = dc[j] * gf[j];
        }
    }
    dx
}

/// Forward + backward scans with per-position concatenated outputs.
#[derive(Debug, Clone)]
pub struct BilstmTrace {
    pub fwd: LstmTrace,
    /// Scan over the reversed sequence; `bwd.hidden(j)` covers original
    /// position `len - 1 - j`.
    pub bwd: LstmTrace,
}

impl BilstmTrace {
    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    /// Output at original position t: concat(forward h_t, backward h_t).
    pub fn output(&self, t: usize) -> Vec<f64> {
        let len = self.len();
        let mut out = self.fwd.hidden(t).to_vec();
        out.extend_from_slice(self.bwd.hidden(len - 1 - t));
        out
    }

    pub fn outputs(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|t| self.output(t)).collect()
    }
}

pub fn bilstm_forward(
    seq: &[Vec<f64>],
    fwd: &LstmParams,
    bwd: &LstmParams,
) -> Result<BilstmTrace, NetError> {
    let reversed: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
    Ok(BilstmTrace { fwd: lstm_forward(seq, fwd)?, bwd: lstm_forward(&reversed, bwd)? })
}

/// Run a BiLSTM and return the per-position concatenated outputs (L × 2H).
pub fn run_bilstm(
    seq: &[Vec<f64>],
    fwd: &LstmParams,
    bwd: &LstmParams,
) -> Result<Vec<Vec<f64>>, NetError> {
    Ok(bilstm_forward(seq, fwd, bwd)?.outputs())
}

/// Backward through both directions; `d_out[t]` is the gradient on the
/// concatenated output at position t. Returns per-position input gradients.
pub fn bilstm_backward(
    trace: &BilstmTrace,
    fwd: &LstmParams,
    bwd: &LstmParams,
    d_out: &[Vec<f64>],
    g_fwd: &mut LstmParams,
    g_bwd: &mut LstmParams,
) -> Vec<Vec<f64>> {
    let len = trace.len();
    let h = fwd.hidden_dim;
    let d_fwd: Vec<Vec<f64>> = (0..len).map(|t| d_out[t][..h].to_vec()).collect();
    // reversed-scan position j corresponds to original position len-1-j
    let d_bwd: Vec<Vec<f64>> = (0..len).map(|j| d_out[len - 1 - j][h..].to_vec()).collect();
    let dx_fwd = lstm_backward(&trace.fwd, fwd, &d_fwd, g_fwd);
    let dx_bwd = lstm_backward(&trace.bwd, bwd, &d_bwd, g_bwd);
    (0..len)
        .map(|t| {
            let mut d = dx_fwd[t].clone();
            add_assign(&mut d, &dx_bwd[len - 1 - t]);
            d
        })
        .collect()
}

/// Final hidden state of a forward scan from zero initial state.
pub fn run_lstm_last_state(seq: &[Vec<f64>], p: &LstmParams) -> Result<Vec<f64>, NetError> {
    Ok(lstm_forward(seq, p)?.last_hidden().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_state_gives_zero() {
        let p = LstmParams::zeros(3, 2);
        let (h, c) = lstm_step(&[1.0, -2.0, 0.5], &[0.0, 0.0], &[0.0, 0.0], &p).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_params_halve_previous_cell() {
        let p = LstmParams::zeros(1, 2);
        let c_prev = [0.8, -0.4];
        let (h, c) = lstm_step(&[0.0], &[0.0, 0.0], &c_prev, &p).unwrap();
        for j in 0..2 {
            assert_relative_eq!(c[j], 0.5 * c_prev[j], max_relative = 1e-12);
            assert_relative_eq!(h[j], 0.5 * (0.5 * c_prev[j]).tanh(), max_relative = 1e-12);
        }
    }

    /// Scalar-by-scalar re-evaluation of the recurrence, independent of the
    /// vectorized code path.
    fn scalar_step(
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        p: &LstmParams,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut h = vec![0.0; p.hidden_dim];
        let mut c = vec![0.0; p.hidden_dim];
        for j in 0..p.hidden_dim {
            let mut a = [p.b[0][j], p.b[1][j], p.b[2][j], p.b[3][j]];
            for g in 0..4 {
                for (k, xv) in x.iter().enumerate() {
                    a[g] += p.w[g].at(j, k) * xv;
                }
                for (k, hv) in h_prev.iter().enumerate() {
                    a[g] += p.u[g].at(j, k) * hv;
                }
            }
            let i = sigmoid(a[0]);
            let f = sigmoid(a[1]);
            let g = a[2].tanh();
            let o = sigmoid(a[3]);
            c[j] = f * c_prev[j] + i * g;
            h[j] = o * c[j].tanh();
        }
        (h, c)
    }

    #[test]
    fn step_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = LstmParams::init(2, 2, &mut rng);
        let x = [0.3, -0.7];
        let h_prev = [0.1, 0.2];
        let c_prev = [-0.4, 0.6];
        let (h, c) = lstm_step(&x, &h_prev, &c_prev, &p).unwrap();
        let (h2, c2) = scalar_step(&x, &h_prev, &c_prev, &p);
        for j in 0..2 {
            assert_relative_eq!(h[j], h2[j], max_relative = 1e-12);
            assert_relative_eq!(c[j], c2[j], max_relative = 1e-12);
        }
    }

    #[test]
    fn step_rejects_non_finite_input() {
        let p = LstmParams::zeros(1, 1);
        assert!(lstm_step(&[f64::NAN], &[0.0], &[0.0], &p).is_err());
    }

    #[test]
    fn hidden_output_strictly_inside_unit_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = LstmParams::init(4, 3, &mut rng);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let h_prev: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c_prev: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (h, _) = lstm_step(&x, &h_prev, &c_prev, &p).unwrap();
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn bilstm_length_one_is_two_single_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let fwd = LstmParams::init(3, 2, &mut rng);
        let bwd = LstmParams::init(3, 2, &mut rng);
        let x = vec![vec![0.5, -0.5, 1.0]];
        let out = run_bilstm(&x, &fwd, &bwd).unwrap();
        let (hf, _) = lstm_step(&x[0], &[0.0; 2], &[0.0; 2], &fwd).unwrap();
        let (hb, _) = lstm_step(&x[0], &[0.0; 2], &[0.0; 2], &bwd).unwrap();
        assert_eq!(out[0][..2], hf[..]);
        assert_eq!(out[0][2..], hb[..]);
    }

    #[test]
    fn bilstm_palindrome_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LstmParams::init(2, 3, &mut rng);
        let a = vec![0.2, -0.1];
        let b = vec![-0.5, 0.4];
        let seq = vec![a.clone(), b, a];
        let out = run_bilstm(&seq, &p, &p).unwrap();
        let len = seq.len();
        for t in 0..len {
            let mirror = &out[len - 1 - t];
            // halves swap under reversal when both directions share params
            for j in 0..3 {
                assert_relative_eq!(out[t][j], mirror[3 + j], max_relative = 1e-12);
                assert_relative_eq!(out[t][3 + j], mirror[j], max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn bilstm_zero_params_zero_output() {
        let p = LstmParams::zeros(2, 2);
        let seq = vec![vec![1.0, 2.0], vec![-1.0, 0.5]];
        let out = run_bilstm(&seq, &p, &p).unwrap();
        assert!(out.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let p = LstmParams::zeros(2, 2);
        assert!(lstm_forward(&[], &p).is_err());
        assert!(run_lstm_last_state(&[], &p).is_err());
    }

    #[test]
    fn last_state_matches_manual_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = LstmParams::init(2, 2, &mut rng);
        let seq: Vec<Vec<f64>> =
            (0..4).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let mut h = vec![0.0; 2];
        let mut c = vec![0.0; 2];
        for x in &seq {
            let (h2, c2) = lstm_step(x, &h, &c, &p).unwrap();
            h = h2;
            c = c2;
        }
        assert_eq!(run_lstm_last_state(&seq, &p).unwrap(), h);
    }
}
