//! Affine layer `y = W x + b`.

use rand::Rng;

use super::mat::{add_assign, Mat};
use super::params::ParamSet;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// out × in
    pub w: Mat,
    pub b: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(input_dim: usize, output_dim: usize) -> DenseParams {
        DenseParams { w: Mat::zeros(output_dim, input_dim), b: vec![0.0; output_dim] }
    }

    pub fn init<R: Rng>(input_dim: usize, output_dim: usize, rng: &mut R) -> DenseParams {
        DenseParams { w: Mat::glorot(output_dim, input_dim, rng), b: vec![0.0; output_dim] }
    }

    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        self.w.matvec_acc(x, &mut y);
        y
    }

    /// Accumulates parameter gradients; returns the input gradient.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut DenseParams) -> Vec<f64> {
        grads.w.add_outer(dy, x);
        add_assign(&mut grads.b, dy);
        let mut dx = vec![0.0; self.input_dim()];
        self.w.t_matvec_acc(dy, &mut dx);
        dx
    }
}

impl ParamSet for DenseParams {
    fn visit_groups(&self, f: &mut dyn FnMut(&str, &[f64], &[usize])) {
        f("w", self.w.data(), &[self.w.rows(), self.w.cols()]);
        f("b", &self.b, &[self.b.len()]);
    }

    fn visit_groups_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("w", self.w.data_mut());
        f("b", &mut self.b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_is_affine() {
        let mut p = DenseParams::zeros(2, 2);
        p.w.set(0, 0, 1.0);
        p.w.set(0, 1, 2.0);
        p.w.set(1, 0, -1.0);
        p.b = vec![0.5, 0.0];
        assert_eq!(p.forward(&[1.0, 1.0]), vec![3.5, -1.0]);
    }

    #[test]
    fn backward_shapes_and_values() {
        let mut p = DenseParams::zeros(2, 1);
        p.w.set(0, 0, 3.0);
        p.w.set(0, 1, -2.0);
        let mut g = DenseParams::zeros(2, 1);
        let dx = p.backward(&[0.5, 1.0], &[2.0], &mut g);
        assert_eq!(dx, vec![6.0, -4.0]);
        assert_eq!(g.w.row(0), &[1.0, 2.0]);
        assert_eq!(g.b, vec![2.0]);
    }
}
