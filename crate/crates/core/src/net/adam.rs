//! Adam with bias correction, carried per named parameter group.

use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::NetError;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone)]
struct MomentGroup {
    name: String,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub hyper: AdamHyper,
    /// Step counter; incremented once per update call.
    pub t: u64,
    groups: Vec<MomentGroup>,
}

impl AdamState {
    pub fn new<P: ParamSet>(params: &P, hyper: AdamHyper) -> AdamState {
        let mut groups = Vec::new();
        params.visit_groups(&mut |name, data, _| {
            groups.push(MomentGroup {
                name: name.to_string(),
                m: vec![0.0; data.len()],
                v: vec![0.0; data.len()],
            });
        });
        AdamState { hyper, t: 0, groups }
    }
}

/// One Adam step: `θ ← θ − lr · m̂ / (√v̂ + ε)` with bias-corrected moments.
/// A non-finite gradient aborts with the offending group's name.
pub fn adam_update<P: ParamSet>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
) -> Result<(), NetError> {
    // snapshot gradients group by group (visit order is fixed)
    let mut grad_data: Vec<(String, Vec<f64>)> = Vec::with_capacity(state.groups.len());
    grads.visit_groups(&mut |name, data, _| {
        grad_data.push((name.to_string(), data.to_vec()));
    });
    for ((name, g), group) in grad_data.iter().zip(&state.groups) {
        if name != &group.name || g.len() != group.m.len() {
            return Err(NetError::GroupMismatch {
                expected: group.name.clone(),
                found: name.clone(),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(NetError::NonFinite(format!("gradient of group {name}")));
        }
    }

    state.t += 1;
    let h = state.hyper;
    let bc1 = 1.0 - h.beta1.powi(state.t as i32);
    let bc2 = 1.0 - h.beta2.powi(state.t as i32);

    let mut gi = 0usize;
    params.visit_groups_mut(&mut |_, data| {
        let group = &mut state.groups[gi];
        let g = &grad_data[gi].1;
        for j in 0..data.len() {
            group.m[j] = h.beta1 * group.m[j] + (1.0 - h.beta1) * g[j];
            group.v[j] = h.beta2 * group.v[j] + (1.0 - h.beta2) * g[j] * g[j];
            let m_hat = group.m[j] / bc1;
            let v_hat = group.v[j] / bc2;
            data[j] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
        }
        gi += 1;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// A single flat vector as a one-group ParamSet, for exercising the
    /// optimizer in isolation.
    #[derive(Clone)]
    struct Flat(Vec<f64>);

    impl ParamSet for Flat {
        fn visit_groups(&self, f: &mut dyn FnMut(&str, &[f64], &[usize])) {
            f("flat", &self.0, &[self.0.len()]);
        }
        fn visit_groups_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
            f("flat", &mut self.0);
        }
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut p = Flat(vec![0.0]);
        let g = Flat(vec![1.0]);
        let mut st = AdamState::new(&p, AdamHyper::default());
        adam_update(&mut p, &g, &mut st).unwrap();
        assert_relative_eq!(p.0[0], -1e-3, max_relative = 1e-6);
    }

    #[test]
    fn zero_gradients_are_a_fixed_point() {
        let mut p = Flat(vec![0.7, -0.3]);
        let g = Flat(vec![0.0, 0.0]);
        let mut st = AdamState::new(&p, AdamHyper::default());
        for _ in 0..10 {
            adam_update(&mut p, &g, &mut st).unwrap();
        }
        assert_eq!(p.0, vec![0.7, -0.3]);
    }

    #[test]
    fn two_steps_match_hand_recurrence() {
        let h = AdamHyper::default();
        let mut p = Flat(vec![0.0]);
        let g = Flat(vec![2.0]);
        let mut st = AdamState::new(&p, h);
        adam_update(&mut p, &g, &mut st).unwrap();
        adam_update(&mut p, &g, &mut st).unwrap();

        // scalar recurrence evaluated by hand
        let (mut m, mut v, mut theta) = (0.0, 0.0, 0.0_f64);
        for t in 1..=2 {
            m = h.beta1 * m + (1.0 - h.beta1) * 2.0;
            v = h.beta2 * v + (1.0 - h.beta2) * 4.0;
            let m_hat = m / (1.0 - h.beta1.powi(t));
            let v_hat = v / (1.0 - h.beta2.powi(t));
            theta -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
        }
        assert_relative_eq!(p.0[0], theta, max_relative = 1e-12);
    }

    #[test]
    fn non_finite_gradient_is_fatal_and_names_the_group() {
        let mut p = Flat(vec![0.0]);
        let g = Flat(vec![f64::NAN]);
        let mut st = AdamState::new(&p, AdamHyper::default());
        let err = adam_update(&mut p, &g, &mut st).unwrap_err();
        assert!(err.to_string().contains("flat"));
    }
}
