//! Inverted dropout: kept units are scaled by 1/(1-rate) at train time so
//! inference is a plain identity.

use rand::Rng;

/// Forward/infer switch for layers whose behavior differs between training
/// and prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-unit multipliers (0 or 1/(1-rate)); the same mask backpropagates the
/// gradient.
#[derive(Debug, Clone)]
pub struct DropoutMask {
    keep: Vec<f64>,
}

impl DropoutMask {
    pub fn identity(len: usize) -> DropoutMask {
        DropoutMask { keep: vec![1.0; len] }
    }

    pub fn sample<R: Rng>(len: usize, rate: f64, rng: &mut R) -> DropoutMask {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        if rate == 0.0 {
            return DropoutMask::identity(len);
        }
        let scale = 1.0 / (1.0 - rate);
        let keep = (0..len)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { scale })
            .collect();
        DropoutMask { keep }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.keep).map(|(v, k)| v * k).collect()
    }

    /// Gradient through the mask is the same elementwise product.
    pub fn backward(&self, dy: &[f64]) -> Vec<f64> {
        self.apply(dy)
    }
}

/// One-shot form: identity in infer mode or at rate 0.
pub fn dropout<R: Rng>(x: &[f64], rate: f64, mode: Mode, rng: &mut R) -> Vec<f64> {
    match mode {
        Mode::Infer => x.to_vec(),
        Mode::Train => DropoutMask::sample(x.len(), rate, rng).apply(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn infer_mode_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(dropout(&x, 0.5, Mode::Infer, &mut rng), x);
    }

    #[test]
    fn rate_zero_is_identity_in_train_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = vec![1.0, -2.0, 3.0];
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut rng), x);
    }

    #[test]
    fn keeps_about_half_at_rate_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let n = 100_000;
        let x = vec![1.0; n];
        let y = dropout(&x, 0.5, Mode::Train, &mut rng);
        let kept = y.iter().filter(|&&v| v != 0.0).count();
        let frac = kept as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "kept fraction {frac}");
        // kept units are scaled by 1/(1-rate) = 2
        assert!(y.iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
