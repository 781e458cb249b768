//! Central finite-difference validation of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::{get_coord, group_meta, set_coord, ParamSet};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_COORDS_PER_GROUP: usize = 200;

#[derive(Debug, Clone)]
pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub groups: Vec<GroupCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max)
    }
}

/// Compare `analytic` (same shape as `params`) against central differences
/// of `loss` on a sampled subset of coordinates per group (all coordinates
/// when a group is smaller than `coords_per_group`).
///
/// Relative error per coordinate: |a − n| / max(1e-8, |a| + |n|). The loss
/// closure must be deterministic in the parameters (dropout disabled, fixed
/// inputs); `params` is restored to its original values.
pub fn grad_check<P, F>(
    params: &mut P,
    analytic: &P,
    mut loss: F,
    eps: f64,
    coords_per_group: usize,
    seed: u64,
) -> GradCheckReport
where
    P: ParamSet,
    F: FnMut(&P) -> f64,
{
    let meta = group_meta(params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::with_capacity(meta.len());

    for (g, (name, len, _)) in meta.iter().enumerate() {
        let picks: Vec<usize> = if *len <= coords_per_group {
            (0..*len).collect()
        } else {
            sample(&mut rng, *len, coords_per_group).into_vec()
        };
        let mut max_rel = 0.0_f64;
        for &idx in &picks {
            let orig = get_coord(params, g, idx);
            set_coord(params, g, idx, orig + eps);
            let up = loss(params);
            set_coord(params, g, idx, orig - eps);
            let down = loss(params);
            set_coord(params, g, idx, orig);
            let numeric = (up - down) / (2.0 * eps);
            let a = get_coord(analytic, g, idx);
            let rel = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
            if rel > max_rel {
                max_rel = rel;
            }
        }
        groups.push(GroupCheck { name: name.clone(), checked: picks.len(), max_rel_err: max_rel });
    }
    GradCheckReport { groups }
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn quadratic_loss_checks_out() {
        // f(θ) = Σ cᵢ θᵢ², df/dθᵢ = 2 cᵢ θᵢ
        let c = [0.5, 1.5, -2.0, 3.0];
        let mut p = Flat(vec![0.3, -0.7, 1.1, 0.9]);
        let analytic = Flat(p.0.iter().zip(&c).map(|(t, ci)| 2.0 * ci * t).collect());
        let report = grad_check(
            &mut p,
            &analytic,
            |q: &Flat| q.0.iter().zip(&c).map(|(t, ci)| ci * t * t).sum(),
            DEFAULT_EPS,
            DEFAULT_COORDS_PER_GROUP,
            7,
        );
        assert!(report.max_rel_err() < 1e-9, "max rel err {}", report.max_rel_err());
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let c = [0.5, 1.5, -2.0, 3.0];
        let mut p = Flat(vec![0.3, -0.7, 1.1, 0.9]);
        let mut corrupted = Flat(p.0.iter().zip(&c).map(|(t, ci)| 2.0 * ci * t).collect());
        corrupted.0[2] *= 1.5;
        let report = grad_check(
            &mut p,
            &corrupted,
            |q: &Flat| q.0.iter().zip(&c).map(|(t, ci)| ci * t * t).sum(),
            DEFAULT_EPS,
            DEFAULT_COORDS_PER_GROUP,
            7,
        );
        assert!(report.max_rel_err() > 1e-2);
    }

    #[test]
    fn params_are_restored() {
        let mut p = Flat(vec![0.25, -0.5]);
        let before = p.0.clone();
        let analytic = Flat(vec![0.5, -1.0]);
        grad_check(
            &mut p,
            &analytic,
            |q: &Flat| q.0.iter().map(|t| 0.5 * t * t).sum(),
            DEFAULT_EPS,
            10,
            1,
        );
        assert_eq!(p.0, before);
    }
}
