//! Uniform access to the learnable arrays of a model component.
//!
//! Every parameter container exposes its arrays as named flat groups; the
//! optimizer, gradient clipping, the finite-difference checker, and the
//! checkpoint writer all walk parameters exclusively through this trait, so
//! a group registered here is a group trained, checked, and saved.

/// Visitor-style access to named parameter groups. Gradients reuse the same
/// container types, so a `ParamSet` doubles as its own gradient mirror.
pub trait ParamSet {
    /// Visit each group in a fixed order: `f(name, data, shape)`.
    #[allow(clippy::type_complexity)]
    fn visit_groups(&self, f: &mut dyn FnMut(&str, &[f64], &[usize]));

    /// Mutable visit, same order and names as [`ParamSet::visit_groups`].
    fn visit_groups_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));
}

/// (name, length, shape) of every group, in visit order.
pub fn group_meta<P: ParamSet>(p: &P) -> Vec<(String, usize, Vec<usize>)> {
    let mut out = Vec::new();
    p.visit_groups(&mut |name, data, shape| {
        out.push((name.to_string(), data.len(), shape.to_vec()));
    });
    out
}

/// Total number of scalar parameters.
pub fn param_count<P: ParamSet>(p: &P) -> usize {
    let mut n = 0;
    p.visit_groups(&mut |_, data, _| n += data.len());
    n
}

/// Read one coordinate addressed by (group index, offset within group).
pub fn get_coord<P: ParamSet>(p: &P, group: usize, idx: usize) -> f64 {
    let mut g = 0usize;
    let mut out = f64::NAN;
    p.visit_groups(&mut |_, data, _| {
        if g == group {
            out = data[idx];
        }
        g += 1;
    });
    out
}

/// Write one coordinate addressed by (group index, offset within group).
pub fn set_coord<P: ParamSet>(p: &mut P, group: usize, idx: usize, value: f64) {
    let mut g = 0usize;
    p.visit_groups_mut(&mut |_, data| {
        if g == group {
            data[idx] = value;
        }
        g += 1;
    });
}

/// Scale every group of `grads` so the global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<P: ParamSet>(grads: &mut P, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    grads.visit_groups(&mut |_, data, _| {
        for v in data {
            sq += v * v;
        }
    });
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grads.visit_groups_mut(&mut |_, data| {
            for v in data {
                *v *= scale;
            }
        });
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    struct TwoGroups(Vec<f64>, Vec<f64>);

    impl ParamSet for TwoGroups {
        fn visit_groups(&self, f: &mut dyn FnMut(&str, &[f64], &[usize])) {
            f("a", &self.0, &[self.0.len()]);
            f("b", &self.1, &[self.1.len()]);
        }
        fn visit_groups_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
            f("a", &mut self.0);
            f("b", &mut self.1);
        }
    }

    #[test]
    fn clipping_rescales_only_above_the_threshold() {
        // global norm 5 (3-4-0 triangle over two groups)
        let mut g = TwoGroups(vec![3.0], vec![4.0, 0.0]);
        let norm = clip_global_norm(&mut g, 10.0);
        assert_eq!(norm, 5.0);
        assert_eq!((g.0[0], g.1[0]), (3.0, 4.0)); // untouched under the cap

        let norm = clip_global_norm(&mut g, 2.5);
        assert_eq!(norm, 5.0);
        assert!((g.0[0] - 1.5).abs() < 1e-12);
        assert!((g.1[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coordinate_addressing_round_trips() {
        let mut g = TwoGroups(vec![1.0, 2.0], vec![3.0]);
        assert_eq!(get_coord(&g, 0, 1), 2.0);
        assert_eq!(get_coord(&g, 1, 0), 3.0);
        set_coord(&mut g, 1, 0, -7.0);
        assert_eq!(g.1[0], -7.0);
        assert_eq!(param_count(&g), 3);
    }
}
