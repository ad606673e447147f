use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// One-hidden-layer perceptron `x -> W2ᵀ relu(W1ᵀ x + b1) + b2`.
///
/// `w1` is `dim × hidden` and `w2` is `hidden × dim`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpParams {
    /// He-normal weights, zero biases.
    pub fn he<R: Rng>(dim: usize, hidden: usize, rng: &mut R) -> Self {
        let n1 = Normal::new(0.0, (2.0 / dim as f64).sqrt()).expect("positive std");
        let n2 = Normal::new(0.0, (2.0 / hidden as f64).sqrt()).expect("positive std");
        MlpParams {
            dim,
            hidden,
            w1: (0..dim * hidden).map(|_| n1.sample(rng)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden * dim).map(|_| n2.sample(rng)).collect(),
            b2: vec![0.0; dim],
        }
    }

    /// Identity weight matrices (requires `hidden == dim`), zero biases.
    pub fn identity(dim: usize) -> Self {
        let mut eye = vec![0.0; dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = 1.0;
        }
        MlpParams { dim, hidden: dim, w1: eye.clone(), b1: vec![0.0; dim], w2: eye, b2: vec![0.0; dim] }
    }

    /// Sets `b2` so the expected output is zero for inputs with independent
    /// entries uniform on `[-range, range]`, treating each hidden
    /// pre-activation as Gaussian. Assumes `b1` is zero.
    pub fn center_output(&mut self, range: f64) {
        let var_x = range * range / 3.0;
        let mut mean_act = vec![0.0; self.hidden];
        for (j, m) in mean_act.iter_mut().enumerate() {
            let var: f64 = (0..self.dim).map(|i| self.w1[i * self.hidden + j].powi(2)).sum::<f64>() * var_x;
            *m = (var / (2.0 * std::f64::consts::PI)).sqrt();
        }
        for (k, b) in self.b2.iter_mut().enumerate() {
            *b = -(0..self.hidden).map(|j| mean_act[j] * self.w2[j * self.dim + k]).sum::<f64>();
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        mlp_forward(x, &self.w1, &self.b1, &self.w2, &self.b2).1
    }

    pub fn is_consistent(&self) -> bool {
        self.w1.len() == self.dim * self.hidden
            && self.b1.len() == self.hidden
            && self.w2.len() == self.hidden * self.dim
            && self.b2.len() == self.dim
            && self.all_values().all(f64::is_finite)
    }

    fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied()
    }
}

/// Forward pass returning `(hidden pre-activations, output)`.
pub(crate) fn mlp_forward(x: &[f64], w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dim = x.len();
    let hidden = b1.len();
    let mut pre = b1.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w1[i * hidden..(i + 1) * hidden];
        for (p, &w) in pre.iter_mut().zip(row) {
            *p += xi * w;
        }
    }
    let mut out = b2.to_vec();
    debug_assert_eq!(out.len(), dim);
    for (j, &p) in pre.iter().enumerate() {
        let a = p.max(0.0);
        if a == 0.0 {
            continue;
        }
        let row = &w2[j * dim..(j + 1) * dim];
        for (o, &w) in out.iter_mut().zip(row) {
            *o += a * w;
        }
    }
    (pre, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_mlp_is_relu() {
        let m = MlpParams::identity(3);
        assert_eq!(m.forward(&[0.5, -1.0, 2.0]), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn he_init_shapes_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = MlpParams::he(4, 6, &mut rng);
        assert!(m.is_consistent());
        assert!(m.b1.iter().chain(&m.b2).all(|&b| b == 0.0));
        assert_eq!(m.forward(&[1.0, 0.0, 0.0, 0.0]).len(), 4);
    }

    #[test]
    fn centered_output_has_near_zero_mean() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (d, r) = (16, 0.25);
        let mut m = MlpParams::he(d, d, &mut rng);
        let n = 20_000;
        let mean = |m: &MlpParams, rng: &mut ChaCha8Rng| {
            let mut acc = vec![0.0; d];
            let mut sq = 0.0;
            for _ in 0..n {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-r..=r)).collect();
                let y = m.forward(&x);
                sq += y.iter().map(|v| v * v).sum::<f64>();
                acc.iter_mut().zip(&y).for_each(|(a, v)| *a += v / n as f64);
            }
            (acc.iter().map(|a| a * a).sum::<f64>().sqrt(), (sq / n as f64).sqrt())
        };
        let (before, rms) = mean(&m, &mut rng);
        m.center_output(r);
        let (after, _) = mean(&m, &mut rng);
        assert!(before > 0.4 * rms, "{before} {rms}");
        assert!(after < 0.1 * rms, "{after} {rms}");
    }

    #[test]
    fn forward_matches_naive_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = MlpParams::he(3, 2, &mut rng);
        m.b1 = vec![0.1, -0.2];
        m.b2 = vec![0.3, 0.0, -0.1];
        let x = [0.2, -0.7, 1.1];
        let mut expected = m.b2.clone();
        for j in 0..2 {
            let mut h = m.b1[j];
            for i in 0..3 {
                h += x[i] * m.w1[i * 2 + j];
            }
            let h = h.max(0.0);
            for k in 0..3 {
                expected[k] += h * m.w2[j * 3 + k];
            }
        }
        let got = m.forward(&x);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }
}
