#![allow(dead_code)]

use malelm::seed::rng_from_seed;
use malelm::Dataset;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn randn(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = rng_from_seed(seed);
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `(HᵀH)⁻¹ HᵀY` by Gauss-Jordan elimination with partial pivoting.
/// Valid only for small, full-column-rank, reasonably conditioned `H`.
pub fn normal_equations(h: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    let l = h.ncols();
    let m = y.ncols();
    let hth = h.t().dot(h);
    let hty = h.t().dot(y);
    let mut aug = Array2::zeros((l, l + m));
    aug.slice_mut(ndarray::s![.., ..l]).assign(&hth);
    aug.slice_mut(ndarray::s![.., l..]).assign(&hty);
    for c in 0..l {
        let p = (c..l)
            .max_by(|&a, &b| aug[[a, c]].abs().total_cmp(&aug[[b, c]].abs()))
            .unwrap();
        for k in 0..l + m {
            aug.swap([c, k], [p, k]);
        }
        let d = aug[[c, c]];
        for k in 0..l + m {
            aug[[c, k]] /= d;
        }
        for r in 0..l {
            if r != c {
                let f = aug[[r, c]];
                if f != 0.0 {
                    for k in 0..l + m {
                        aug[[r, k]] -= f * aug[[c, k]];
                    }
                }
            }
        }
    }
    aug.slice(ndarray::s![.., l..]).to_owned()
}

pub fn class_names(m: usize) -> Vec<String> {
    (0..m).map(|j| format!("class{j:02}")).collect()
}

/// Isotropic Gaussian blobs: class centers `spread · N(0, I)`, unit noise.
pub fn gaussian_blobs(counts: &[usize], dim: usize, spread: f64, seed: u64) -> Dataset<f64> {
    let mut rng = rng_from_seed(seed);
    let centers: Vec<Vec<f64>> = counts
        .iter()
        .map(|_| (0..dim).map(|_| spread * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let n: usize = counts.iter().sum();
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (c, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            for k in 0..dim {
                features[[row, k]] = centers[c][k] + rng.sample::<f64, _>(StandardNormal);
            }
            labels.push(c);
            row += 1;
        }
    }
    Dataset::from_labeled(features, labels, class_names(counts.len())).unwrap()
}

/// Uniform `[0, 1)` features with labels `i mod classes`.
pub fn uniform_samples(n: usize, dim: usize, classes: usize, seed: u64) -> Dataset<f64> {
    let mut rng = rng_from_seed(seed);
    let features = Array2::from_shape_simple_fn((n, dim), || rng.random::<f64>());
    let labels = (0..n).map(|i| i % classes).collect();
    Dataset::from_labeled(features, labels, class_names(classes)).unwrap()
}
