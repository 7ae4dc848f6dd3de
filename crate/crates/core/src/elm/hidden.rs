//! Random hidden layer: MLP and RBF input kernels.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{ElmConfig, FanIn};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::rng_from_seed;

/// Input weights `W`, dense or restricted to a fixed sparse pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum InputWeights<T> {
    /// `ℓ × n`, every input connected.
    Dense(Array2<T>),
    /// Unit `u` reads inputs `indices[u, ..]` (ascending) with weights
    /// `weights[u, ..]`; both are `ℓ × k`.
    Sparse {
        indices: Array2<usize>,
        weights: Array2<T>,
    },
}

/// Gaussian units `exp(−‖x − c‖² / (2 w²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfUnits<T> {
    pub centers: Array2<T>,
    pub widths: Array1<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer<T> {
    input_dim: usize,
    weights: InputWeights<T>,
    bias: Array1<T>,
    rbf: Option<RbfUnits<T>>,
}

impl<T: Real> HiddenLayer<T> {
    /// Draws a layer from `config.seed`.
    ///
    /// Draw order on one ChaCha8 stream: input weights (row by row; for a
    /// sparse layer each row draws its `k` input indices then its `k`
    /// weights), then biases, then RBF centers when `alpha < 1`. All normal
    /// draws are standard normal, centers are uniform on `[0, 1)`.
    pub fn init(config: &ElmConfig, input_dim: usize) -> Result<Self> {
        config.validate_for_input(input_dim)?;
        let units = config.hidden_neurons;
        let mut rng = rng_from_seed(config.seed);

        let weights = match config.fan_in {
            FanIn::Sparse(k) if k < input_dim => {
                let mut indices = Array2::zeros((units, k));
                let mut w = Array2::zeros((units, k));
                for u in 0..units {
                    let mut picked = rand::seq::index::sample(&mut rng, input_dim, k).into_vec();
                    picked.sort_unstable();
                    for (j, idx) in picked.into_iter().enumerate() {
                        indices[[u, j]] = idx;
                    }
                    for j in 0..k {
                        w[[u, j]] = draw_normal(&mut rng);
                    }
                }
                InputWeights::Sparse {
                    indices,
                    weights: w,
                }
            }
            _ => InputWeights::Dense(Array2::from_shape_simple_fn((units, input_dim), || {
                draw_normal(&mut rng)
            })),
        };
        let bias = Array1::from_shape_simple_fn(units, || draw_normal(&mut rng));

        let rbf = if config.uses_rbf() {
            let centers = Array2::from_shape_simple_fn((units, input_dim), || {
                T::from_f64_lossy(rng.random::<f64>())
            });
            let width = config.rbf_width_scale * (input_dim as f64).sqrt() / 2.0;
            Some(RbfUnits {
                centers,
                widths: Array1::from_elem(units, T::from_f64_lossy(width)),
            })
        } else {
            None
        };

        Ok(Self {
            input_dim,
            weights,
            bias,
            rbf,
        })
    }

    /// Builds a fully connected layer from explicit parameters.
    pub fn from_dense(weights: Array2<T>, bias: Array1<T>) -> Result<Self> {
        let (units, input_dim) = weights.dim();
        if units == 0 || input_dim == 0 {
            return Err(Error::invalid("weights", "matrix must be non-empty"));
        }
        if bias.len() != units {
            return Err(Error::DimensionMismatch {
                context: "bias length vs hidden units",
                expected: units,
                actual: bias.len(),
            });
        }
        Ok(Self {
            input_dim,
            weights: InputWeights::Dense(weights),
            bias,
            rbf: None,
        })
    }

    /// Builds a sparsely connected layer from explicit parameters.
    pub fn from_sparse(
        input_dim: usize,
        indices: Array2<usize>,
        weights: Array2<T>,
        bias: Array1<T>,
    ) -> Result<Self> {
        if indices.dim() != weights.dim() {
            return Err(Error::invalid("weights", "index and weight blocks differ in shape"));
        }
        let (units, k) = indices.dim();
        if units == 0 || k == 0 || k > input_dim {
            return Err(Error::invalid("dropout-fanin", "fan-in must be in 1..=input_dim"));
        }
        if bias.len() != units {
            return Err(Error::DimensionMismatch {
                context: "bias length vs hidden units",
                expected: units,
                actual: bias.len(),
            });
        }
        for row in indices.rows() {
            let ok = row.iter().all(|&i| i < input_dim) && row.windows(2).into_iter().all(|w| w[0] < w[1]);
            if !ok {
                return Err(Error::invalid(
                    "mask",
                    "each row must hold strictly increasing indices below input_dim",
                ));
            }
        }
        Ok(Self {
            input_dim,
            weights: InputWeights::Sparse { indices, weights },
            bias,
            rbf: None,
        })
    }

    /// Attaches RBF units (`ℓ × n` centers, `ℓ` positive widths).
    pub fn with_rbf(mut self, centers: Array2<T>, widths: Array1<T>) -> Result<Self> {
        if centers.dim() != (self.units(), self.input_dim) {
            return Err(Error::invalid("rbf centers", "shape must be hidden units x input_dim"));
        }
        if widths.len() != self.units() || widths.iter().any(|w| !(*w > T::zero())) {
            return Err(Error::invalid("rbf widths", "need one positive width per unit"));
        }
        self.rbf = Some(RbfUnits { centers, widths });
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn units(&self) -> usize {
        self.bias.len()
    }

    pub fn weights(&self) -> &InputWeights<T> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<T> {
        &self.bias
    }

    pub fn rbf(&self) -> Option<&RbfUnits<T>> {
        self.rbf.as_ref()
    }

    /// Inputs per unit: `n` when dense.
    pub fn fan_in(&self) -> usize {
        match &self.weights {
            InputWeights::Dense(_) => self.input_dim,
            InputWeights::Sparse { indices, .. } => indices.ncols(),
        }
    }

    /// `ℓ × n` connectivity matrix of 0/1.
    pub fn mask(&self) -> Array2<u8> {
        match &self.weights {
            InputWeights::Dense(_) => Array2::ones((self.units(), self.input_dim)),
            InputWeights::Sparse { indices, .. } => {
                let mut m = Array2::zeros((self.units(), self.input_dim));
                for (u, row) in indices.rows().into_iter().enumerate() {
                    for &i in row {
                        m[[u, i]] = 1;
                    }
                }
                m
            }
        }
    }

    /// `W ⊙ mask` as a dense `ℓ × n` matrix.
    pub fn dense_weights(&self) -> Array2<T> {
        match &self.weights {
            InputWeights::Dense(w) => w.clone(),
            InputWeights::Sparse { indices, weights } => {
                let mut m = Array2::zeros((self.units(), self.input_dim));
                for u in 0..self.units() {
                    for j in 0..indices.ncols() {
                        m[[u, indices[[u, j]]]] = weights[[u, j]];
                    }
                }
                m
            }
        }
    }

    fn check_batch(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "feature vector length vs model input dimension",
                expected: self.input_dim,
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// `M(x) = (W ⊙ mask) x + B` for every row of `x`; returns `N × ℓ`.
    pub fn mlp_kernel(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_batch(&x)?;
        let out = match &self.weights {
            InputWeights::Dense(w) => {
                let mut out = x.dot(&w.t());
                for mut row in out.rows_mut() {
                    row.zip_mut_with(&self.bias, |a, &b| *a = *a + b);
                }
                out
            }
            InputWeights::Sparse { indices, weights } => {
                let units = self.units();
                let k = indices.ncols();
                let mut out = Array2::zeros((x.nrows(), units));
                for (xi, mut row) in x.rows().into_iter().zip(out.rows_mut()) {
                    for u in 0..units {
                        let mut s = self.bias[u];
                        for j in 0..k {
                            s = s + weights[[u, j]] * xi[indices[[u, j]]];
                        }
                        row[u] = s;
                    }
                }
                out
            }
        };
        Ok(out)
    }

    /// `R_u(x) = exp(−‖x − c_u‖² / (2 w_u²))`; returns `N × ℓ` in `(0, 1]`.
    pub fn rbf_kernel(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let rbf = self.rbf.as_ref().ok_or(Error::RbfParametersAbsent)?;
        self.check_batch(&x)?;
        let two = T::one() + T::one();
        let inv_two_w2: Vec<T> = rbf.widths.iter().map(|&w| T::one() / (two * w * w)).collect();
        let centers = rbf.centers.as_standard_layout();
        let mut out = Array2::zeros((x.nrows(), self.units()));
        for (xi, mut row) in x.rows().into_iter().zip(out.rows_mut()) {
            let xi = xi.to_vec();
            for (u, c) in centers.rows().into_iter().enumerate() {
                let d2 = squared_distance(&xi, c.as_slice().expect("standard layout"));
                row[u] = (-d2 * inv_two_w2[u]).exp();
            }
        }
        Ok(out)
    }

    /// `C(x) = α M(x) + (1 − α) R(x)`. At `α = 1` only the MLP kernel runs,
    /// at `α = 0` only the RBF kernel.
    pub fn input_activation(&self, x: ArrayView2<T>, alpha: f64) -> Result<Array2<T>> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha", format!("{alpha} is outside [0, 1]")));
        }
        if alpha == 1.0 {
            return self.mlp_kernel(x);
        }
        if alpha == 0.0 {
            return self.rbf_kernel(x);
        }
        let a = T::from_f64_lossy(alpha);
        let b = T::from_f64_lossy(1.0 - alpha);
        let mut m = self.mlp_kernel(x)?;
        let r = self.rbf_kernel(x)?;
        ndarray::Zip::from(&mut m).and(&r).for_each(|mv, &rv| *mv = a * *mv + b * rv);
        Ok(m)
    }
}

#[inline]
fn draw_normal<T: Real, R: Rng>(rng: &mut R) -> T {
    T::from_f64_lossy(rng.sample::<f64, _>(StandardNormal))
}

#[inline]
fn squared_distance<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] = acc[l] + d * d;
        }
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = *x - *y;
        tail = tail + d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elm::Activation;
    use rand::Rng;
    use ndarray::array;
    use proptest::prelude::*;

    fn cfg(units: usize, fan_in: FanIn, alpha: f64, seed: u64) -> ElmConfig {
        ElmConfig {
            hidden_neurons: units,
            activation: Activation::Relu,
            alpha,
            fan_in,
            rbf_width_scale: 1.0,
            seed,
            ridge: None,
        }
    }

    #[test]
    fn fan_in_equal_to_input_is_full() {
        let layer = HiddenLayer::<f64>::init(&cfg(4, FanIn::Sparse(4), 1.0, 1), 4).unwrap();
        assert!(layer.mask().iter().all(|&m| m == 1));
    }

    #[test]
    fn fan_in_above_input_is_error() {
        assert!(HiddenLayer::<f64>::init(&cfg(4, FanIn::Sparse(5), 1.0, 1), 4).is_err());
    }

    #[test]
    fn seeded_init_is_deterministic() {
        for fan in [FanIn::Full, FanIn::Sparse(3)] {
            let c = cfg(16, fan, 0.5, 42);
            let a = HiddenLayer::<f64>::init(&c, 10).unwrap();
            let b = HiddenLayer::<f64>::init(&c, 10).unwrap();
            assert_eq!(a, b);
            let other = HiddenLayer::<f64>::init(&c.clone().with_seed(43), 10).unwrap();
            assert_ne!(a, other);
        }
    }

    #[test]
    fn sparse_mask_has_k_ones_per_row() {
        let layer = HiddenLayer::<f64>::init(&cfg(1024, FanIn::Sparse(4), 1.0, 7), 4096).unwrap();
        let mask = layer.mask();
        assert_eq!(mask.dim(), (1024, 4096));
        for row in mask.rows() {
            assert_eq!(row.iter().map(|&v| v as usize).sum::<usize>(), 4);
        }
        assert_eq!(mask.iter().map(|&v| v as usize).sum::<usize>(), 4096);
    }

    #[test]
    fn alpha_one_has_no_rbf() {
        let layer = HiddenLayer::<f64>::init(&cfg(8, FanIn::Full, 1.0, 3), 5).unwrap();
        assert!(layer.rbf().is_none());
        let x = Array2::zeros((2, 5));
        assert!(matches!(layer.rbf_kernel(x.view()), Err(Error::RbfParametersAbsent)));
        let with = HiddenLayer::<f64>::init(&cfg(8, FanIn::Full, 0.99, 3), 5).unwrap();
        let rbf = with.rbf().unwrap();
        assert!(rbf.centers.iter().all(|&c| (0.0..1.0).contains(&c)));
        let w = 5f64.sqrt() / 2.0;
        assert!(rbf.widths.iter().all(|&v| v == w));
    }

    #[test]
    fn mlp_examples() {
        let eye = HiddenLayer::from_dense(Array2::<f64>::eye(3), Array1::zeros(3)).unwrap();
        let x = array![[0.2, 0.5, 0.9]];
        assert_eq!(eye.mlp_kernel(x.view()).unwrap(), x);

        let layer = HiddenLayer::<f64>::init(&cfg(6, FanIn::Full, 1.0, 9), 4).unwrap();
        let zero = Array2::zeros((1, 4));
        let out = layer.mlp_kernel(zero.view()).unwrap();
        assert_eq!(out.row(0), layer.bias().view());

        let l2 = HiddenLayer::from_dense(array![[1.0, 2.0], [3.0, 4.0]], array![1.0, -1.0]).unwrap();
        let out = l2.mlp_kernel(array![[1.0, 1.0]].view()).unwrap();
        assert_eq!(out, array![[4.0, 6.0]]);

        assert!(matches!(
            l2.mlp_kernel(array![[1.0, 1.0, 1.0]].view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sparse_kernel_matches_masked_dense() {
        let layer = HiddenLayer::<f64>::init(&cfg(32, FanIn::Sparse(4), 1.0, 5), 20).unwrap();
        let dense = HiddenLayer::from_dense(layer.dense_weights(), layer.bias().clone()).unwrap();
        let mut rng = rng_from_seed(1);
        let x = Array2::from_shape_simple_fn((7, 20), || rng.random::<f64>());
        let a = layer.mlp_kernel(x.view()).unwrap();
        let b = dense.mlp_kernel(x.view()).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn rbf_examples() {
        let base = HiddenLayer::from_dense(Array2::<f64>::zeros((2, 2)), Array1::zeros(2)).unwrap();
        let layer = base
            .with_rbf(array![[0.5, 0.5], [0.0, 0.0]], array![1.0, 1.0])
            .unwrap();
        let out = layer.rbf_kernel(array![[0.5, 0.5]].view()).unwrap();
        assert_eq!(out[[0, 0]], 1.0);
        // second unit: distance 1 from (1, 0)
        let out = layer.rbf_kernel(array![[1.0, 0.0]].view()).unwrap();
        assert!((out[[0, 1]] - 0.606_530_659_712_633_4).abs() < 1e-6);

        let mut prev = 1.0;
        for step in 1..20 {
            let d = step as f64 * 0.5;
            let v = layer.rbf_kernel(array![[d, 0.0]].view()).unwrap()[[0, 1]];
            assert!(v < prev && v > 0.0 || v == 0.0);
            prev = v;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn mixing_examples() {
        let layer = HiddenLayer::<f64>::init(&cfg(5, FanIn::Full, 0.5, 11), 3).unwrap();
        let x = array![[0.1, 0.2, 0.3], [0.9, 0.8, 0.7]];
        let m = layer.mlp_kernel(x.view()).unwrap();
        let r = layer.rbf_kernel(x.view()).unwrap();
        assert_eq!(layer.input_activation(x.view(), 1.0).unwrap(), m);
        assert_eq!(layer.input_activation(x.view(), 0.0).unwrap(), r);
        let c = layer.input_activation(x.view(), 0.5).unwrap();
        for ((cv, mv), rv) in c.iter().zip(m.iter()).zip(r.iter()) {
            assert!((cv - (0.5 * mv + 0.5 * rv)).abs() < 1e-15);
        }

        // one unit with M = 2.0, R = 0.5
        let one = HiddenLayer::from_dense(array![[0.0]], array![2.0])
            .unwrap()
            .with_rbf(array![[0.0]], array![1.0])
            .unwrap();
        let d = (2.0 * 0.5f64.ln().abs()).sqrt();
        let out = one.input_activation(array![[d]].view(), 0.5).unwrap();
        assert!((out[[0, 0]] - 1.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn masked_inputs_never_matter(seed in any::<u64>(), probe in any::<u64>()) {
            let layer = HiddenLayer::<f64>::init(&cfg(12, FanIn::Sparse(4), 1.0, seed), 30).unwrap();
            let mask = layer.mask();
            let mut rng = rng_from_seed(probe);
            let x = Array2::from_shape_simple_fn((1, 30), || rng.random::<f64>());
            let base = layer.mlp_kernel(x.view()).unwrap();
            let i = rng.random_range(0..30);
            let mut x2 = x.clone();
            x2[[0, i]] += rng.random_range(-5.0..5.0);
            let moved = layer.mlp_kernel(x2.view()).unwrap();
            for u in 0..12 {
                if mask[[u, i]] == 0 {
                    prop_assert_eq!(base[[0, u]], moved[[0, u]]);
                }
            }
        }
    }
}
