//! Internal dense kernels: deterministic truncated SVD used for factor
//! initialization and the matrix (PCA) baseline.
//!
//! Small problems take the exact route: eigendecomposition of the Gram
//! matrix on the shorter side. Once both sides exceed a few hundred the
//! Gram matrix is no longer cheap, so a seeded randomized subspace
//! iteration (Gaussian sketch, QR re-orthonormalization, a few power
//! iterations) extracts the leading subspace instead. Both paths are
//! fully deterministic for a fixed seed.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest short-side size for which the exact Gram-eigen route is used.
const GRAM_EIGEN_MAX: usize = 256;

const OVERSAMPLE: usize = 8;
const POWER_ITERATIONS: usize = 4;

pub(crate) struct TruncatedSvd {
    /// Leading left singular vectors, orthonormal columns `[rows x rank]`.
    pub u: Array2<f64>,
    /// Matching singular values, descending. Callers that need scale
    /// re-derive it from projections; kept for diagnostics and tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub sigma: Vec<f64>,
}

pub(crate) fn nd_to_na(a: &ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn na_to_nd(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Eigendecomposition of a symmetric PSD matrix with eigenvalues sorted
/// descending.
fn symmetric_eigen_desc(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Thin Q factor of a skinny matrix.
fn thin_q(m: &Array2<f64>) -> Array2<f64> {
    let qr = nd_to_na(&m.view()).qr();
    na_to_nd(&qr.q())
}

/// Overwrites column `l` of `u` with a unit vector orthogonal to the
/// columns before it. Used when a singular direction is numerically
/// unresolvable and the basis still has to come out orthonormal.
fn fill_orthogonal_column(u: &mut Array2<f64>, l: usize) {
    let rows = u.nrows();
    // start from the coordinate vector least represented in the span
    // of the previous columns, then Gram-Schmidt it twice
    let mut best = 0;
    let mut best_overlap = f64::INFINITY;
    for b in 0..rows {
        let overlap: f64 = (0..l).map(|p| u[[b, p]] * u[[b, p]]).sum();
        if overlap < best_overlap {
            best_overlap = overlap;
            best = b;
        }
    }
    let mut cand = vec![0.0; rows];
    cand[best] = 1.0;
    for _ in 0..2 {
        for p in 0..l {
            let dot: f64 = (0..rows).map(|i| cand[i] * u[[i, p]]).sum();
            for i in 0..rows {
                cand[i] -= dot * u[[i, p]];
            }
        }
        let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut cand {
            *x /= norm;
        }
    }
    for (i, x) in cand.iter().enumerate() {
        u[[i, l]] = *x;
    }
}

fn exact_svd(m: &ArrayView2<f64>, rank: usize) -> TruncatedSvd {
    let (rows, cols) = m.dim();
    if rows <= cols {
        // M M^T is rows x rows; its eigenvectors are the left singular
        // vectors directly
        let gram = m.dot(&m.t());
        let (values, vectors) = symmetric_eigen_desc(nd_to_na(&gram.view()));
        let u = Array2::from_shape_fn((rows, rank), |(i, l)| vectors[(i, l)]);
        let sigma = values[..rank].iter().map(|&v| v.max(0.0).sqrt()).collect();
        TruncatedSvd { u, sigma }
    } else {
        // work on M^T M and map right singular vectors through M
        let gram = m.t().dot(m);
        let (values, vectors) = symmetric_eigen_desc(nd_to_na(&gram.view()));
        let sigma: Vec<f64> = values[..rank].iter().map(|&v| v.max(0.0).sqrt()).collect();
        let v = Array2::from_shape_fn((cols, rank), |(j, l)| vectors[(j, l)]);
        let mut u = m.dot(&v);
        // directions below the Gram route's noise floor come out as
        // rounding noise inside the dominant range; rebuild those
        // columns as an orthonormal completion instead of dividing by
        // a vanishing singular value
        let floor = sigma.first().copied().unwrap_or(0.0) * 1e-7;
        for (l, &s) in sigma.iter().enumerate() {
            if s > floor && s > 0.0 {
                u.column_mut(l).mapv_inplace(|x| x / s);
            } else {
                fill_orthogonal_column(&mut u, l);
            }
        }
        TruncatedSvd { u, sigma }
    }
}

fn randomized_svd(m: &ArrayView2<f64>, rank: usize, seed: u64) -> TruncatedSvd {
    let (rows, cols) = m.dim();
    let sketch = (rank + OVERSAMPLE).min(rows.min(cols));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = Array2::from_shape_fn((cols, sketch), |_| StandardNormal.sample(&mut rng));

    let mut q = thin_q(&m.dot(&omega));
    for _ in 0..POWER_ITERATIONS {
        let z = thin_q(&m.t().dot(&q));
        q = thin_q(&m.dot(&z));
    }

    // project, then take the exact factorization of the small projection
    let b = q.t().dot(m); // sketch x cols
    let gram = b.dot(&b.t());
    let (values, vectors) = symmetric_eigen_desc(nd_to_na(&gram.view()));
    let p = Array2::from_shape_fn((sketch, rank), |(i, l)| vectors[(i, l)]);
    let u = q.dot(&p);
    let sigma = values[..rank].iter().map(|&v| v.max(0.0).sqrt()).collect();
    TruncatedSvd { u, sigma }
}

/// Leading `rank` left singular vectors and singular values of `m`.
/// Deterministic for fixed inputs and seed.
pub(crate) fn truncated_svd(m: &ArrayView2<f64>, rank: usize, seed: u64) -> TruncatedSvd {
    let max_rank = m.nrows().min(m.ncols());
    let rank = rank.min(max_rank);
    if max_rank <= GRAM_EIGEN_MAX {
        exact_svd(m, rank)
    } else {
        randomized_svd(m, rank, seed)
    }
}
