//! Minimum-norm linear least squares.
//!
//! `least_squares_solve(H, Y)` returns `β = H⁺Y`, the minimizer of `‖Hβ − Y‖_F`
//! with the smallest Frobenius norm. The route is a complete orthogonal
//! decomposition:
//!
//! 1. Householder QR with column pivoting, `H P = Q R`, which reveals the
//!    numerical rank `r` from the decay of `|R_kk|`.
//! 2. An unpivoted QR of the leading `r` rows of `R` transposed,
//!    `R[..r, :]ᵀ = Z L`, so that `H P = Q [Lᵀ Zᵀ; 0]`.
//! 3. `β = P Z L⁻ᵀ (QᵀY)[..r]`.
//!
//! Nothing here forms `HᵀH`.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Columns below this many rows are updated serially.
const PAR_MIN_ROWS: usize = 256;

/// Dense column-major matrix used as the factorization workspace.
#[derive(Clone)]
struct ColMajor<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> ColMajor<T> {
    fn from_view(a: ArrayView2<T>) -> Self {
        let (rows, cols) = a.dim();
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            data.extend(a.column(j).iter().copied());
        }
        Self { rows, cols, data }
    }

    #[inline]
    fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[j * self.rows + i]
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (left, right) = self.data.split_at_mut(hi * self.rows);
        left[lo * self.rows..(lo + 1) * self.rows].swap_with_slice(&mut right[..self.rows]);
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        acc[0] = acc[0] + x[0] * y[0];
        acc[1] = acc[1] + x[1] * y[1];
        acc[2] = acc[2] + x[2] * y[2];
        acc[3] = acc[3] + x[3] * y[3];
    }
    let mut tail = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail = tail + *x * *y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

fn norm2<T: Real>(x: &[T]) -> T {
    // scaled to avoid overflow on large entries
    let scale = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    let ss = x.iter().fold(T::zero(), |acc, &v| {
        let s = v / scale;
        acc + s * s
    });
    scale * ss.sqrt()
}

/// Elementary reflector `I − τ v vᵀ` with `v[0] = 1` implied.
struct Reflector<T> {
    tau: T,
}

/// Turns `x` into `(β, 0, …, 0)`; overwrites `x[1..]` with the tail of `v`.
fn make_reflector<T: Real>(x: &mut [T]) -> Reflector<T> {
    let alpha = x[0];
    let tail_norm = norm2(&x[1..]);
    if tail_norm == T::zero() {
        return Reflector { tau: T::zero() };
    }
    let mut beta = alpha.hypot(tail_norm);
    if alpha >= T::zero() {
        beta = -beta;
    }
    let tau = (beta - alpha) / beta;
    let scale = T::one() / (alpha - beta);
    for v in &mut x[1..] {
        *v = *v * scale;
    }
    x[0] = beta;
    Reflector { tau }
}

/// Applies `I − τ v vᵀ` to `target[k..]`, where `v = (1, v_tail)`.
#[inline]
fn apply_reflector<T: Real>(tau: T, v_tail: &[T], target: &mut [T]) {
    if tau == T::zero() {
        return;
    }
    let (head, tail) = target.split_first_mut().expect("nonempty target");
    let w = *head + dot(v_tail, tail);
    let s = -tau * w;
    *head = *head + s;
    axpy(s, v_tail, tail);
}

/// Applies reflector `k` (stored below the diagonal of `a`) to columns
/// `first..` of `a`.
fn update_trailing<T: Real>(a: &mut ColMajor<T>, k: usize, tau: T, first: usize) {
    if tau == T::zero() || first >= a.cols {
        return;
    }
    let rows = a.rows;
    let (head, rest) = a.data.split_at_mut(first * rows);
    let v_tail = &head[k * rows + k + 1..(k + 1) * rows];
    let work = |col: &mut [T]| apply_reflector(tau, v_tail, &mut col[k..]);
    if rows - k >= PAR_MIN_ROWS && a.cols - first > 1 {
        rest.par_chunks_mut(rows).for_each(work);
    } else {
        rest.chunks_mut(rows).for_each(work);
    }
}

struct PivotedQr<T> {
    /// `R` on and above the diagonal, reflector tails below it.
    qr: ColMajor<T>,
    taus: Vec<T>,
    /// `perm[j]` is the original column now at position `j`.
    perm: Vec<usize>,
}

fn pivoted_qr<T: Real>(mut a: ColMajor<T>) -> PivotedQr<T> {
    let (m, n) = (a.rows, a.cols);
    let steps = m.min(n);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut norms: Vec<T> = (0..n).map(|j| norm2(a.col(j))).collect();
    let mut ref_norms = norms.clone();
    let mut taus = Vec::with_capacity(steps);
    let recompute_tol = T::epsilon().sqrt();

    for k in 0..steps {
        let p = (k..n)
            .fold((k, T::neg_infinity()), |(bi, bv), j| {
                if norms[j] > bv {
                    (j, norms[j])
                } else {
                    (bi, bv)
                }
            })
            .0;
        if p != k {
            a.swap_cols(k, p);
            perm.swap(k, p);
            norms.swap(k, p);
            ref_norms.swap(k, p);
        }

        let refl = make_reflector(&mut a.col_mut(k)[k..]);
        update_trailing(&mut a, k, refl.tau, k + 1);
        taus.push(refl.tau);

        // Downdate the remaining partial column norms, recomputing when
        // cancellation has eaten too many digits.
        for j in k + 1..n {
            if norms[j] == T::zero() {
                continue;
            }
            let r = a.at(k, j).abs() / norms[j];
            let t = (T::one() - r * r).max(T::zero());
            let ratio = norms[j] / ref_norms[j];
            if t * ratio * ratio <= recompute_tol {
                let fresh = norm2(&a.col(j)[k + 1..]);
                norms[j] = fresh;
                ref_norms[j] = fresh;
            } else {
                norms[j] = norms[j] * t.sqrt();
            }
        }
    }
    PivotedQr { qr: a, taus, perm }
}

impl<T: Real> PivotedQr<T> {
    /// Numerical rank: diagonal entries above `max(m, n) · ε · |R₀₀|`.
    fn rank(&self) -> usize {
        let steps = self.taus.len();
        if steps == 0 {
            return 0;
        }
        let r00 = self.qr.at(0, 0).abs();
        if r00 == T::zero() {
            return 0;
        }
        let tol = T::from_usize_lossy(self.qr.rows.max(self.qr.cols)) * T::epsilon() * r00;
        (0..steps)
            .take_while(|&k| self.qr.at(k, k).abs() > tol)
            .count()
    }

    /// Overwrites each column of `b` with `Qᵀ b`.
    fn apply_qt(&self, b: &mut ColMajor<T>) {
        let m = self.qr.rows;
        for (k, &tau) in self.taus.iter().enumerate() {
            let v_tail = &self.qr.col(k)[k + 1..m];
            for j in 0..b.cols {
                apply_reflector(tau, v_tail, &mut b.col_mut(j)[k..]);
            }
        }
    }
}

/// Minimum-norm least-squares solution of `H β ≈ Y`.
pub fn least_squares_solve<T: Real>(h: ArrayView2<T>, y: ArrayView2<T>) -> Result<Array2<T>> {
    let (n_rows, n_cols) = h.dim();
    if n_rows == 0 || n_cols == 0 {
        return Err(Error::invalid("H", "matrix must have at least one row and one column"));
    }
    if y.nrows() != n_rows {
        return Err(Error::DimensionMismatch {
            context: "least squares targets (rows of Y vs rows of H)",
            expected: n_rows,
            actual: y.nrows(),
        });
    }
    let m_out = y.ncols();
    let qr = pivoted_qr(ColMajor::from_view(h));
    let rank = qr.rank();
    let mut beta = Array2::zeros((n_cols, m_out));
    if rank == 0 || m_out == 0 {
        return Ok(beta);
    }

    let mut rhs = ColMajor::from_view(y);
    qr.apply_qt(&mut rhs);

    // Solution in the permuted basis, one column per target.
    let mut z = ColMajor {
        rows: n_cols,
        cols: m_out,
        data: vec![T::zero(); n_cols * m_out],
    };

    if rank == n_cols {
        // Full column rank: back substitution against R.
        for j in 0..m_out {
            let c = &rhs.col(j)[..rank];
            let zj = z.col_mut(j);
            for i in (0..rank).rev() {
                let mut s = c[i];
                for k in i + 1..rank {
                    s = s - qr.qr.at(i, k) * zj[k];
                }
                zj[i] = s / qr.qr.at(i, i);
            }
        }
    } else {
        // Trapezoidal R[..r, :]; factor its transpose (n_cols × r).
        let mut rt = ColMajor {
            rows: n_cols,
            cols: rank,
            data: vec![T::zero(); n_cols * rank],
        };
        for i in 0..rank {
            let col = rt.col_mut(i);
            for k in i..n_cols {
                col[k] = qr.qr.at(i, k);
            }
        }
        let mut ztaus = Vec::with_capacity(rank);
        for k in 0..rank {
            let refl = make_reflector(&mut rt.col_mut(k)[k..]);
            update_trailing(&mut rt, k, refl.tau, k + 1);
            ztaus.push(refl.tau);
        }
        // Lᵀ w = c with L upper triangular (stored in rt[..r, ..r]).
        for j in 0..m_out {
            let c = &rhs.col(j)[..rank];
            let zj = z.col_mut(j);
            for i in 0..rank {
                let mut s = c[i];
                for k in 0..i {
                    s = s - rt.at(k, i) * zj[k];
                }
                zj[i] = s / rt.at(i, i);
            }
            // z = Z [w; 0] = H_0 H_1 … H_{r−1} [w; 0]
            for k in (0..rank).rev() {
                let v_tail = &rt.col(k)[k + 1..];
                apply_reflector(ztaus[k], v_tail, &mut zj[k..]);
            }
        }
    }

    for (pos, &orig) in qr.perm.iter().enumerate() {
        for j in 0..m_out {
            beta[[orig, j]] = z.at(pos, j);
        }
    }
    Ok(beta)
}

/// Least squares with a Tikhonov term: minimizes `‖Hβ − Y‖² + λ‖β‖²` by
/// stacking `√λ I` under `H` and zeros under `Y`.
pub fn ridge_solve<T: Real>(h: ArrayView2<T>, y: ArrayView2<T>, lambda: T) -> Result<Array2<T>> {
    if !(lambda >= T::zero()) {
        return Err(Error::invalid("ridge", "must be non-negative"));
    }
    if lambda == T::zero() {
        return least_squares_solve(h, y);
    }
    let (n, l) = h.dim();
    if y.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "least squares targets (rows of Y vs rows of H)",
            expected: n,
            actual: y.nrows(),
        });
    }
    let mut h_aug = Array2::zeros((n + l, l));
    h_aug.slice_mut(ndarray::s![..n, ..]).assign(&h);
    let s = lambda.sqrt();
    for i in 0..l {
        h_aug[[n + i, i]] = s;
    }
    let mut y_aug = Array2::zeros((n + l, y.ncols()));
    y_aug.slice_mut(ndarray::s![..n, ..]).assign(&y);
    least_squares_solve(h_aug.view(), y_aug.view())
}

/// Moore-Penrose pseudoinverse, column by column against the identity.
pub fn pseudo_inverse<T: Real>(h: ArrayView2<T>) -> Result<Array2<T>> {
    let eye = Array2::eye(h.nrows());
    least_squares_solve(h, eye.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    use crate::seed::rng_from_seed;

    fn randn(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
    }

    fn max_abs(a: &Array2<f64>) -> f64 {
        a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Normal-equations oracle via Gauss-Jordan elimination with partial
    /// pivoting on HᵀH. Only valid for small, well-conditioned, full column
    /// rank H.
    fn normal_equations(h: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
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
                    for k in 0..l + m {
                        aug[[r, k]] -= f * aug[[c, k]];
                    }
                }
            }
        }
        aug.slice(ndarray::s![.., l..]).to_owned()
    }

    #[test]
    fn identity_returns_targets() {
        let h = Array2::<f64>::eye(4);
        let y = randn(4, 3, 1);
        let beta = least_squares_solve(h.view(), y.view()).unwrap();
        assert!(max_abs(&(&beta - &y)) < 1e-14);
    }

    #[test]
    fn square_nonsingular_is_exact() {
        let h = randn(12, 12, 2);
        let y = randn(12, 5, 3);
        let beta = least_squares_solve(h.view(), y.view()).unwrap();
        assert!(max_abs(&(h.dot(&beta) - &y)) < 1e-8);
    }

    #[test]
    fn tall_matches_normal_equations() {
        for seed in 0..10 {
            let h = randn(20, 8, 100 + seed);
            let y = randn(20, 3, 200 + seed);
            let beta = least_squares_solve(h.view(), y.view()).unwrap();
            let oracle = normal_equations(&h, &y);
            assert!(max_abs(&(&beta - &oracle)) < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn rank_deficient_gives_minimum_norm() {
        // H = [a a] duplicates a column; min-norm solution splits weight evenly.
        let h: Array2<f64> = array![[1.0, 1.0], [2.0, 2.0], [0.0, 0.0]];
        let y: Array2<f64> = array![[1.0], [2.0], [0.0]];
        let beta = least_squares_solve(h.view(), y.view()).unwrap();
        assert!((beta[[0, 0]] - 0.5).abs() < 1e-12);
        assert!((beta[[1, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wide_system_interpolates_with_min_norm() {
        let h = randn(6, 15, 9);
        let y = randn(6, 2, 10);
        let beta = least_squares_solve(h.view(), y.view()).unwrap();
        assert!(max_abs(&(h.dot(&beta) - &y)) < 1e-10);
        // Minimum norm ⇔ β lies in the row space of H: β = Hᵀ w.
        let w = least_squares_solve(h.t(), beta.view()).unwrap();
        assert!(max_abs(&(h.t().dot(&w) - &beta)) < 1e-10);
    }

    #[test]
    fn zero_matrix_gives_zero() {
        let h = Array2::<f64>::zeros((3, 4));
        let y = randn(3, 2, 4);
        let beta = least_squares_solve(h.view(), y.view()).unwrap();
        assert_eq!(beta, Array2::<f64>::zeros((4, 2)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = randn(4, 3, 1);
        let y = randn(5, 1, 1);
        assert!(matches!(
            least_squares_solve(h.view(), y.view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ridge_shrinks_toward_zero() {
        let h = randn(10, 4, 5);
        let y = randn(10, 1, 6);
        let plain = least_squares_solve(h.view(), y.view()).unwrap();
        let tiny = ridge_solve(h.view(), y.view(), 1e-8).unwrap();
        let big = ridge_solve(h.view(), y.view(), 1e3).unwrap();
        assert!(max_abs(&(&plain - &tiny)) < 1e-6);
        assert!(max_abs(&big) < max_abs(&plain));
    }

    #[test]
    fn penrose_identity_on_rank_deficient_products() {
        for seed in 0..20u64 {
            let (m, n, r) = (30, 20, 1 + (seed as usize % 15));
            let h = randn(m, r, seed).dot(&randn(r, n, seed + 1000));
            let pinv = pseudo_inverse(h.view()).unwrap();
            let recon = h.dot(&pinv).dot(&h);
            assert!(max_abs(&(&recon - &h)) < 1e-8, "seed {seed} rank {r}");
        }
    }

    #[test]
    fn works_in_f32() {
        let h = randn(16, 6, 11).mapv(|v| v as f32);
        let y = randn(16, 2, 12).mapv(|v| v as f32);
        let beta = least_squares_solve(h.view(), y.view()).unwrap();
        let beta64 = least_squares_solve(h.mapv(f64::from).view(), y.mapv(f64::from).view()).unwrap();
        for (a, b) in beta.iter().zip(beta64.iter()) {
            assert!((*a as f64 - b).abs() < 1e-3);
        }
    }
}
