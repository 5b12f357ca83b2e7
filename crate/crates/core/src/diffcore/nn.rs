use ndarray::Array2;
use rand::Rng;

use super::error::DiffError;
use super::param::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::scalar::{lit, Real};

/// Fully connected layer `y = x W + b` with `W: in x out`, `b: 1 x out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var, DiffError> {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let xw = tape.matmul(x, w)?;
        tape.add(xw, b)
    }
}

/// ReLU multilayer perceptron with a linear output layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    /// Layer widths `sizes[0] -> sizes[1] -> ... -> sizes[last]`.
    ///
    /// Weights and biases start from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        sizes: &[usize],
        rng: &mut R,
    ) -> Self {
        assert!(
            sizes.len() >= 2,
            "an MLP needs at least input and output widths"
        );
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = |r, c| {
                    Array2::from_shape_simple_fn((r, c), || {
                        lit::<T>(rng.random_range(-bound..bound))
                    })
                };
                let weight = store.add(format!("{name}.{i}.weight"), draw(fan_in, fan_out));
                let bias = store.add(format!("{name}.{i}.bias"), draw(1, fan_out));
                Linear {
                    weight,
                    bias,
                    fan_in,
                    fan_out,
                }
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    /// Widths including input and output, e.g. `[20, 64, 10]`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].fan_in];
        s.extend(self.layers.iter().map(|l| l.fan_out));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }

    pub fn forward<T: Real>(&self, tape: &mut Tape<'_, T>, x: Var) -> Result<Var, DiffError> {
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, h)?;
            if i + 1 < self.layers.len() {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Sets every weight and bias to zero.
    pub fn zero<T: Real>(&self, store: &mut ParamStore<T>) {
        for l in &self.layers {
            store.get_mut(l.weight).value.fill(T::zero());
            store.get_mut(l.bias).value.fill(T::zero());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matmul_oracle(x: &[f64], w: &Array2<f64>, b: &Array2<f64>) -> Vec<f64> {
        (0..w.ncols())
            .map(|j| b[[0, j]] + (0..x.len()).map(|i| x[i] * w[[i, j]]).sum::<f64>())
            .collect()
    }

    #[test]
    fn two_layer_forward_matches_hand_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f64>::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 4, 2], &mut rng);
        let x = [0.5, -1.0, 2.0];
        let l0 = mlp.layers()[0];
        let l1 = mlp.layers()[1];
        let h: Vec<f64> = matmul_oracle(&x, store.value(l0.weight), store.value(l0.bias))
            .into_iter()
            .map(|v| v.max(0.0))
            .collect();
        let expected = matmul_oracle(&h, store.value(l1.weight), store.value(l1.bias));

        let mut tape = Tape::new(&store);
        let xv = tape.constant(array![[0.5, -1.0, 2.0]]);
        let y = mlp.forward(&mut tape, xv).unwrap();
        for (a, b) in tape.value(y).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(mlp.sizes(), vec![3, 4, 2]);
    }

    #[test]
    fn wrong_input_width_is_a_shape_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let mlp = Mlp::new(&mut store, "m", &[3, 2], &mut rng);
        let mut tape = Tape::new(&store);
        let xv = tape.constant(Array2::zeros((1, 4)));
        assert!(mlp.forward(&mut tape, xv).is_err());
    }
}
