//! Dense complex linear algebra helpers.
//!
//! nalgebra ships complex LU and Hermitian eigendecompositions but no
//! general complex eigensolver, so everything here is arranged to need only
//! those two primitives: operator norms and smallest singular values go
//! through the Gram matrix `m* m`, and unitary matrices are diagonalized by
//! splitting into their commuting Hermitian parts.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };
pub const IM: C64 = Complex { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// `(m + m*)/2`.  Exactly Hermitian in floating point: the `(i,j)` and
/// `(j,i)` entries are computed from the same two numbers.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|x| x * cr(0.5))
}

/// `(m - m*)/(2i)`, the "imaginary part".  Exactly Hermitian in floating
/// point, and `m = hermitian_part(m) + i * skew_part(m)` up to rounding.
pub fn skew_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()).map(|x| x * c(0.0, -0.5))
}

/// Operator-norm distance of `m` from its own adjoint.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    operator_norm(&(m - m.adjoint()))
}

/// Eigendecomposition of a Hermitian matrix.  Returns eigenvalues in
/// ascending order with the matching orthonormal eigenvector columns.
/// The input is symmetrized first, so tiny defects are harmless.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let d = h.nrows();
    assert_eq!(d, h.ncols(), "hermitian_eigen: square matrix required");
    if d == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let se = hermitian_part(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vecs = CMatrix::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(k));
    }
    (vals, vecs)
}

/// Smallest eigenvalue of a (nominally) Hermitian matrix.
pub fn min_hermitian_eigenvalue(h: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(h);
    vals.first().copied().unwrap_or(0.0)
}

/// Operator (spectral) norm via the Gram matrix.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let g = m.adjoint() * m;
    let (vals, _) = hermitian_eigen(&g);
    vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Smallest singular value via the Gram matrix.  Zero for non-square
/// matrices with more columns than rows.
pub fn smallest_singular_value(m: &CMatrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    let g = m.adjoint() * m;
    let (vals, _) = hermitian_eigen(&g);
    vals.first().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Why an inversion was refused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singularity {
    /// Smallest singular value observed.
    pub sigma_min: f64,
    /// Scale `max(1, ||m||)` the guard was relative to.
    pub scale: f64,
}

fn singular_guard(m: &CMatrix) -> Result<f64, Singularity> {
    let sigma = smallest_singular_value(m);
    let scale = operator_norm(m).max(1.0);
    if sigma < crate::tol::SINGULAR * scale {
        Err(Singularity {
            sigma_min: sigma,
            scale,
        })
    } else {
        Ok(sigma)
    }
}

/// LU inverse gated by the relative smallest-singular-value guard.
pub fn guarded_inverse(m: &CMatrix) -> Result<CMatrix, Singularity> {
    assert_eq!(m.nrows(), m.ncols(), "guarded_inverse: square matrix required");
    if m.nrows() == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let sigma = singular_guard(m)?;
    m.clone().lu().try_inverse().ok_or(Singularity {
        sigma_min: sigma,
        scale: operator_norm(m).max(1.0),
    })
}

/// LU solve `m x = rhs` under the same guard as [`guarded_inverse`].
pub fn guarded_solve(m: &CMatrix, rhs: &CMatrix) -> Result<CMatrix, Singularity> {
    assert_eq!(m.nrows(), m.ncols(), "guarded_solve: square matrix required");
    assert_eq!(m.ncols(), rhs.nrows(), "guarded_solve: shape mismatch");
    if m.nrows() == 0 {
        return Ok(CMatrix::zeros(0, rhs.ncols()));
    }
    let sigma = singular_guard(m)?;
    m.clone().lu().solve(rhs).ok_or(Singularity {
        sigma_min: sigma,
        scale: operator_norm(m).max(1.0),
    })
}

/// Eigendecomposition of a unitary (more generally normal) matrix.
///
/// `u = V diag(vals) V*` with `V` unitary.  Works by diagonalizing the
/// Hermitian part, then diagonalizing the compression of the skew part
/// inside each eigenvalue cluster; the two parts commute exactly when `u`
/// is normal, so the clusters are invariant for both.  Eigenvalues are
/// ordered by ascending real part, ties by ascending imaginary part.
pub fn unitary_eigen(u: &CMatrix) -> (Vec<C64>, CMatrix) {
    let d = u.nrows();
    assert_eq!(d, u.ncols(), "unitary_eigen: square matrix required");
    if d == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let h = hermitian_part(u);
    let k = skew_part(u);
    let (hvals, hvecs) = hermitian_eigen(&h);
    let cluster_tol = 1e-8 * (1.0 + operator_norm(u));
    let mut vals = vec![ZERO; d];
    let mut vecs = CMatrix::zeros(d, d);
    let mut start = 0;
    let mut col = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && hvals[end] - hvals[end - 1] <= cluster_tol {
            end += 1;
        }
        let span = hvecs.columns(start, end - start).into_owned();
        let kc = span.adjoint() * &k * &span;
        let (_, kvecs) = hermitian_eigen(&kc);
        let sub = &span * &kvecs;
        for j in 0..sub.ncols() {
            let v = sub.column(j).into_owned();
            // Rayleigh quotient; v is a unit eigenvector of the normal u
            vals[col] = (v.adjoint() * u * &v)[(0, 0)];
            vecs.set_column(col, &v);
            col += 1;
        }
        start = end;
    }
    (vals, vecs)
}

/// Least squares `min ||a x - y||` through the normal equations, solved
/// spectrally.  Returns `(x, relative residual, condition number of a)`.
/// Rank deficiency is handled by dropping Gram eigenvalues below
/// `1e-28 * lambda_max` (condition number then reports as infinite).
pub fn least_squares(a: &CMatrix, y: &CVector) -> (CVector, f64, f64) {
    assert_eq!(a.nrows(), y.nrows(), "least_squares: shape mismatch");
    let g = a.adjoint() * a;
    let rhs = a.adjoint() * y;
    let (vals, vecs) = hermitian_eigen(&g);
    let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let lmin = vals.first().copied().unwrap_or(0.0);
    let cutoff = lmax * 1e-28;
    let mut x = CVector::zeros(a.ncols());
    for (j, &lam) in vals.iter().enumerate() {
        if lam > cutoff && lam > 0.0 {
            let v = vecs.column(j);
            let coeff = (v.adjoint() * &rhs)[(0, 0)] / cr(lam);
            x += v.map(|e| e * coeff);
        }
    }
    let cond = if lmin <= cutoff || lmin <= 0.0 {
        f64::INFINITY
    } else {
        (lmax / lmin).sqrt()
    };
    let ynorm = y.norm();
    let res = if ynorm == 0.0 {
        0.0
    } else {
        (a * &x - y).norm() / ynorm
    };
    (x, res, cond)
}

/// Kronecker product `a (x) b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `k`-th power of a square matrix by repeated multiplication.
pub fn mat_pow(m: &CMatrix, k: usize) -> CMatrix {
    let d = m.nrows();
    assert_eq!(d, m.ncols(), "mat_pow: square matrix required");
    let mut out = CMatrix::identity(d, d);
    for _ in 0..k {
        out = &out * m;
    }
    out
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Deterministic per-trial RNG: the pair `(seed, stream)` is mixed into a
/// ChaCha8 seed, so trial `k` of a suite is reproducible in isolation.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}

/// Standard complex Gaussian: variance 1, independent real and imaginary
/// parts.
pub fn gaussian_c64<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * cr(std::f64::consts::FRAC_1_SQRT_2)
}

/// Matrix with independent standard complex Gaussian entries.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian_c64(rng))
}

/// Random Hermitian matrix, normalized so the operator norm is O(1)
/// independent of dimension.
pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    if d == 0 {
        return CMatrix::zeros(0, 0);
    }
    let g = ginibre(rng, d, d);
    hermitian_part(&g).map(|x| x * cr(1.0 / (d as f64).sqrt()))
}

/// Haar-ish random unitary: eigenvectors of a random Hermitian matrix with
/// independent random phases.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let (_, vecs) = hermitian_eigen(&random_hermitian(rng, d));
    let mut u = vecs;
    for j in 0..d {
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let phase = c(theta.cos(), theta.sin());
        let col = u.column(j).map(|e| e * phase);
        u.set_column(j, &col);
    }
    u
}

/// Random isometry: `cols` orthonormal columns in dimension `rows`
/// (requires `cols <= rows`).
pub fn random_isometry<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    assert!(cols <= rows, "random_isometry: cols must not exceed rows");
    random_unitary(rng, rows).columns(0, cols).into_owned()
}
