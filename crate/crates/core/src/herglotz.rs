//! Ball-picture Herglotz representations and the constructive extraction
//! back to half-plane (Nevanlinna) resolvent form.
//!
//! Data on the ball side is a triple `(T, L, V)`: a Hermitian constant, a
//! unitary `L` on a carrier space, and a vessel `V` mapping into it, with
//!
//! ```text
//! f(Z) = T + i h(cayley(Z)),    h(X) = V* (L (x) I - X)^{-1} (L (x) I + X) V.
//! ```
//!
//! [`extract`](HerglotzData::extract) rebuilds resolvent data: split off
//! `ker(1 - L)` (which `V` must avoid), set `A = i(1 + L0)(1 - L0)^{-1}`
//! on the complement, and fold the Cayley transform into the vessel.  The
//! algebra behind the folding, with `w` running over the kept eigenvalues
//! `L0 = diag(w)` and `a = i(1+w)/(1-w)`:
//!
//! ```text
//! i (w - x)^{-1} (w + x) = -a + (a^2 + 1)(a - z)^{-1},   x = cayley(z),
//! ```
//!
//! so the constant picks up `-V*AV` and the resolvent vessel is
//! `W = 2 (I - L0*)^{-1} V0` with `V0` the compressed `V`: row by row
//! `|2/(1 - conj w)|^2 = a^2 + 1`, and row phases cancel against the
//! diagonal resolvent.  The reconstructed function is
//!
//! ```text
//! f(Z) = C (x) I + W* (A (x) I - P Z P*)^{-1} W,    C = T - V0* A V0,
//! ```
//!
//! and `C = 0` is exactly the Cauchy-transform case.
//!
//! Carrier shapes: over scalar `B` the carrier dimension is free and
//! points embed as `z (x) I`; over a general block algebra the carrier is
//! the enveloping space of `B` itself and `L`, `V` are block-diagonal, so
//! evaluation never leaves the algebra.

use crate::algebra::{
    amplify, classify_region, sample_hermitian_element, AlgebraError, AlgebraSpec, AlgElement,
    MatPoint,
};
use crate::linalg::{
    c, cr, gaussian_c64, kron, operator_norm, trial_rng, unitary_eigen, CMatrix, C64, IM, ONE,
};
use crate::tol;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HerglotzError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("L is not unitary: ||L*L - I|| = {defect:.3e}")]
    NotUnitary { defect: f64 },
    #[error("carrier dimension {carrier} incompatible with algebra of dimension {algebra}")]
    CarrierMismatch { carrier: usize, algebra: usize },
    #[error("point is not in the open upper half plane: min Im eigenvalue {min_im:.3e}")]
    PointNotInUpperHalfPlane { min_im: f64 },
    #[error("argument is not a strict contraction: norm {norm:.6}")]
    NotContractive { norm: f64 },
    #[error("resolvent is singular: sigma_min {sigma_min:.3e}")]
    SingularResolvent { sigma_min: f64 },
    #[error("range of V meets ker(1 - L): overlap {overlap:.3e}")]
    RangeNotPerpendicular { overlap: f64 },
    #[error("compressed L retains an eigenvalue at 1: gap {gap:.3e}")]
    SingularCompression { gap: f64 },
    #[error("weights must be strictly positive and sum to 1")]
    BadWeights,
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

fn map_singular(err: AlgebraError) -> HerglotzError {
    match err {
        AlgebraError::Singular { sigma_min, .. } => HerglotzError::SingularResolvent { sigma_min },
        other => HerglotzError::Algebra(other),
    }
}

/// `(T, L, V)` over an output algebra `B`.
#[derive(Debug, Clone)]
pub struct HerglotzData {
    b: AlgebraSpec,
    t: AlgElement,
    l: CMatrix,
    v: CMatrix,
}

impl HerglotzData {
    /// Validates shapes and invariants: `L` unitary to 1e-10, `T`
    /// Hermitian up to the standard band (then symmetrized), and `V` of
    /// shape `d' x dim(B)`.  Over a non-scalar `B` the carrier must be
    /// the enveloping space of `B` (`d' = dim(B)`) and both `L` and `V`
    /// must be supported on its blocks, which is what makes `V* x V`
    /// land in `B` for every `x` in the amplified carrier algebra.
    pub fn new(
        b: AlgebraSpec,
        t: AlgElement,
        l: CMatrix,
        v: CMatrix,
    ) -> Result<Self, HerglotzError> {
        let d = b.total_dim();
        let dc = l.nrows();
        if l.ncols() != dc {
            return Err(HerglotzError::BadParameter(
                "L must be square".to_string(),
            ));
        }
        if v.nrows() != dc || v.ncols() != d {
            return Err(HerglotzError::BadParameter(format!(
                "V must be {dc} x {d} to map the carrier onto B"
            )));
        }
        if t.spec() != &b {
            return Err(HerglotzError::Algebra(AlgebraError::SpecMismatch));
        }
        let unitary_defect = operator_norm(&(l.adjoint() * &l - CMatrix::identity(dc, dc)));
        if unitary_defect > 1e-10 {
            return Err(HerglotzError::NotUnitary {
                defect: unitary_defect,
            });
        }
        let t = t.hermitianize(tol::HERMITIAN)?;
        let (l, v) = if d > 1 {
            if dc != d {
                return Err(HerglotzError::CarrierMismatch {
                    carrier: dc,
                    algebra: d,
                });
            }
            let l = AlgElement::new(b.clone(), l)?.into_data();
            let v = AlgElement::new(b.clone(), v)?.into_data();
            (l, v)
        } else {
            (l, v)
        };
        Ok(HerglotzData { b, t, l, v })
    }

    pub fn b(&self) -> &AlgebraSpec {
        &self.b
    }

    pub fn t(&self) -> &AlgElement {
        &self.t
    }

    pub fn l(&self) -> &CMatrix {
        &self.l
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    /// Carrier dimension `d'`.
    pub fn carrier_dim(&self) -> usize {
        self.l.nrows()
    }

    /// Carrier ranges along which `L` and `V` decompose: the blocks of
    /// `B` for a non-scalar algebra, the whole carrier otherwise.
    fn sectors(&self) -> Vec<(usize, usize)> {
        if self.b.total_dim() == 1 {
            vec![(0, self.carrier_dim())]
        } else {
            self.b.block_ranges()
        }
    }

    /// Eigensplit of `L` along `ker(1 - L)`, sector by sector.
    pub fn kernel_split(&self, tol_ker: f64) -> KernelSplit {
        kernel_split_sectors(&self.l, &self.sectors(), tol_ker)
    }

    /// Full constructive extraction; see the module header for the
    /// algebra.  `tol_ker` drives kernel detection on the eigenvalues of
    /// `L`, `tol` bounds both the permitted overlap of `V` with the
    /// kernel and the size of the constant below which the data is
    /// declared an honest Cauchy transform.
    pub fn extract(&self, tol_ker: f64, tol: f64) -> Result<NevanlinnaData, HerglotzError> {
        let split = self.kernel_split(tol_ker);
        let overlap = range_perp_defect(&self.v, &split);
        if overlap > tol {
            return Err(HerglotzError::RangeNotPerpendicular { overlap });
        }
        let m = split.basis.ncols();
        let mut gap = f64::INFINITY;
        let mut a = CMatrix::zeros(m, m);
        let mut fold = CMatrix::zeros(m, m);
        for j in 0..m {
            let w = split.l0[(j, j)];
            let w = w / cr(w.norm());
            gap = gap.min((ONE - w).norm());
            // a = i(1+w)/(1-w) is real for unimodular w != 1
            let alpha = (IM * (ONE + w) / (ONE - w)).re;
            a[(j, j)] = cr(alpha);
            fold[(j, j)] = cr(2.0) / (ONE - w.conj());
        }
        if m > 0 && gap < tol_ker {
            return Err(HerglotzError::SingularCompression { gap });
        }
        let v0 = split.basis.adjoint() * &self.v;
        let w_vessel = fold * &v0;
        let c_mat = self.t.data() - v0.adjoint() * &a * &v0;
        let c = AlgElement::new(self.b.clone(), c_mat)?.hermitianize(tol::HERMITIAN)?;
        let is_cauchy = c.norm() <= tol;
        Ok(NevanlinnaData {
            b: self.b.clone(),
            a,
            p: split.basis.adjoint(),
            w: w_vessel,
            c,
            is_cauchy,
        })
    }
}

/// Eigensplit of a unitary along `ker(1 - L)`.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    /// Orthogonal projector onto `ker(1 - L)`-complement, on the carrier.
    pub projector: CMatrix,
    /// Orthonormal basis (columns) of that complement.
    pub basis: CMatrix,
    /// Compression of `L` to the complement in the basis above; diagonal,
    /// with no eigenvalue at 1.
    pub l0: CMatrix,
    pub kernel_dim: usize,
    /// All eigenvalues of `L`, kernel ones included: the point masses of
    /// the representation's spectral data.
    pub eigenvalues: Vec<C64>,
}

/// [`KernelSplit`] of a single unitary block.
pub fn kernel_split(l: &CMatrix, tol_ker: f64) -> KernelSplit {
    kernel_split_sectors(l, &[(0, l.nrows())], tol_ker)
}

fn kernel_split_sectors(l: &CMatrix, sectors: &[(usize, usize)], tol_ker: f64) -> KernelSplit {
    let dc = l.nrows();
    let mut eigenvalues = Vec::with_capacity(dc);
    let mut kept: Vec<(usize, C64, CVectorCol)> = Vec::new();
    let mut kernel_dim = 0;
    for &(start, size) in sectors {
        let sub = l.view((start, start), (size, size)).into_owned();
        let (vals, vecs) = unitary_eigen(&sub);
        for (j, &w) in vals.iter().enumerate() {
            eigenvalues.push(w);
            if (w - ONE).norm() <= tol_ker {
                kernel_dim += 1;
            } else {
                kept.push((start, w, vecs.column(j).into_owned()));
            }
        }
    }
    let m = kept.len();
    let mut basis = CMatrix::zeros(dc, m);
    let mut l0 = CMatrix::zeros(m, m);
    for (col, (start, w, vec)) in kept.iter().enumerate() {
        basis
            .view_mut((*start, col), (vec.nrows(), 1))
            .copy_from(vec);
        l0[(col, col)] = *w;
    }
    let projector = &basis * basis.adjoint();
    KernelSplit {
        projector,
        basis,
        l0,
        kernel_dim,
        eigenvalues,
    }
}

type CVectorCol = nalgebra::OMatrix<C64, nalgebra::Dyn, nalgebra::U1>;

/// `||(I - P) V||`: how much of the vessel leaks into `ker(1 - L)`.
pub fn range_perp_defect(v: &CMatrix, split: &KernelSplit) -> f64 {
    let dc = split.projector.nrows();
    let leak = (CMatrix::identity(dc, dc) - &split.projector) * v;
    operator_norm(&leak)
}

pub fn check_range_perp(v: &CMatrix, split: &KernelSplit, tol: f64) -> bool {
    range_perp_defect(v, split) <= tol
}

/// Resolvent data on the half-plane side.
#[derive(Debug, Clone)]
pub struct NevanlinnaData {
    pub b: AlgebraSpec,
    /// Hermitian (here diagonal real) operator on the compressed carrier.
    pub a: CMatrix,
    /// Compression from the carrier onto the complement of `ker(1 - L)`;
    /// rows orthonormal.
    pub p: CMatrix,
    /// Folded vessel on the compressed carrier, `m x dim(B)`.
    pub w: CMatrix,
    /// Affine constant; zero exactly when the data is a Cauchy transform.
    pub c: AlgElement,
    pub is_cauchy: bool,
}

impl NevanlinnaData {
    /// `C (x) I + W* (A (x) I - P Z P*)^{-1} W` at a half-plane point
    /// over `B`.  With an empty compressed carrier this is the constant.
    pub fn eval(&self, z: &MatPoint) -> Result<MatPoint, HerglotzError> {
        if z.spec() != &self.b {
            return Err(HerglotzError::Algebra(AlgebraError::SpecMismatch));
        }
        let region = classify_region(z, tol::PSD);
        if !region.in_open_upper_half_plane {
            return Err(HerglotzError::PointNotInUpperHalfPlane {
                min_im: region.min_im_eigenvalue,
            });
        }
        let n = z.level();
        let z_emb = embed_point(&self.b, self.p.ncols(), z)?;
        let constant = amplify(&self.c, n);
        let m = self.a.nrows();
        if m == 0 {
            return Ok(constant);
        }
        let eye = CMatrix::identity(n, n);
        let p_amp = kron(&eye, &self.p);
        let z_psi = &p_amp * z_emb * p_amp.adjoint();
        let pencil = kron(&eye, &self.a) - z_psi;
        let w_amp = kron(&eye, &self.w);
        let resolved = crate::linalg::guarded_solve(&pencil, &w_amp).map_err(|s| {
            HerglotzError::SingularResolvent {
                sigma_min: s.sigma_min,
            }
        })?;
        let flat = constant.flat() + w_amp.adjoint() * resolved;
        Ok(MatPoint::from_flat_tol(self.b.clone(), n, flat, 1e-8)?)
    }
}

fn embed_point(b: &AlgebraSpec, carrier: usize, z: &MatPoint) -> Result<CMatrix, HerglotzError> {
    let d = b.total_dim();
    if carrier == d {
        Ok(z.flat().clone())
    } else if d == 1 {
        Ok(kron(z.flat(), &CMatrix::identity(carrier, carrier)))
    } else {
        Err(HerglotzError::CarrierMismatch {
            carrier,
            algebra: d,
        })
    }
}

/// `(Z + i)^{-1} (Z - i)`: open upper half plane to the open unit ball.
pub fn cayley(z: &MatPoint) -> Result<MatPoint, HerglotzError> {
    let region = classify_region(z, tol::PSD);
    if !region.in_open_upper_half_plane {
        return Err(HerglotzError::PointNotInUpperHalfPlane {
            min_im: region.min_im_eigenvalue,
        });
    }
    let i_point = MatPoint::scalar(z.spec().clone(), IM, z.level());
    let num = z - &i_point;
    let den = z + &i_point;
    let inv = den.try_inverse().map_err(map_singular)?;
    Ok(&inv * &num)
}

/// `i (I + X)(I - X)^{-1}`: inverse of [`cayley`] on strict contractions.
pub fn inverse_cayley(x: &MatPoint) -> Result<MatPoint, HerglotzError> {
    let norm = x.norm();
    if norm >= 1.0 {
        return Err(HerglotzError::NotContractive { norm });
    }
    let one = MatPoint::scalar(x.spec().clone(), ONE, x.level());
    let num = (&one + x).scale(IM);
    let inv = (&one - x).try_inverse().map_err(map_singular)?;
    Ok(&num * &inv)
}

/// `V* (L (x) I - X)^{-1} (L (x) I + X) V` at a strict contraction over
/// `B`.  The resolvent sits on the left, matching the half-plane
/// convention after Cayley; swapping the factors changes the value.
pub fn herglotz_eval(data: &HerglotzData, x: &MatPoint) -> Result<MatPoint, HerglotzError> {
    if x.spec() != &data.b {
        return Err(HerglotzError::Algebra(AlgebraError::SpecMismatch));
    }
    let norm = x.norm();
    if norm >= 1.0 {
        return Err(HerglotzError::NotContractive { norm });
    }
    let n = x.level();
    let d = data.b.total_dim();
    if data.carrier_dim() == d {
        let l_el = AlgElement::new(data.b.clone(), data.l.clone())?;
        let v_el = AlgElement::new(data.b.clone(), data.v.clone())?;
        let l_amp = amplify(&l_el, n);
        let v_amp = amplify(&v_el, n);
        let inv = (&l_amp - x).try_inverse().map_err(map_singular)?;
        let h = &inv * &(&l_amp + x);
        Ok(&(&v_amp.adjoint() * &h) * &v_amp)
    } else {
        let x_emb = embed_point(&data.b, data.carrier_dim(), x)?;
        let eye = CMatrix::identity(n, n);
        let l_amp = kron(&eye, &data.l);
        let pencil = &l_amp - &x_emb;
        let h = crate::linalg::guarded_solve(&pencil, &(l_amp + x_emb)).map_err(|s| {
            HerglotzError::SingularResolvent {
                sigma_min: s.sigma_min,
            }
        })?;
        let v_amp = kron(&eye, &data.v);
        let flat = v_amp.adjoint() * h * v_amp;
        Ok(MatPoint::from_flat_tol(data.b.clone(), n, flat, 1e-8)?)
    }
}

/// Ball-side data of the scalar atomic-measure transform
/// `f(z) = sum_i weights[i] / (atoms[i] - z)`: `L` carries the Cayley
/// transforms of the atoms and the vessel folds the weights, inverting
/// the extraction so that `extract` recovers the atoms exactly and a
/// zero constant.
pub fn herglotz_from_classical(
    atoms: &[f64],
    weights: &[f64],
) -> Result<HerglotzData, HerglotzError> {
    if atoms.is_empty() || atoms.len() != weights.len() {
        return Err(HerglotzError::BadParameter(
            "need equally many atoms and weights, at least one".to_string(),
        ));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(HerglotzError::BadWeights);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(HerglotzError::BadWeights);
    }
    let k = atoms.len();
    let b = AlgebraSpec::scalar();
    let mut l = CMatrix::zeros(k, k);
    let mut v = CMatrix::zeros(k, 1);
    let mut t_val = 0.0;
    for (j, (&t, &w)) in atoms.iter().zip(weights).enumerate() {
        let ell = (cr(t) - IM) / (cr(t) + IM);
        l[(j, j)] = ell;
        v[(j, 0)] = cr(w.sqrt()) * (ONE - ell.conj()) * cr(0.5);
        t_val += w * t / (t * t + 1.0);
    }
    let t = AlgElement::new(b.clone(), CMatrix::from_element(1, 1, cr(t_val)))?;
    HerglotzData::new(b, t, l, v)
}

/// Random valid data: per carrier sector, a unitary with the requested
/// number of eigenvalues pinned at 1 and the rest at angles at least 0.4
/// away, and a vessel projected exactly onto the kernel complement.
/// Over a non-scalar `B` the carrier dims must equal its block sizes.
pub fn sample_data(
    spec: &AlgebraSpec,
    carrier_dims: &[usize],
    kernel_dims: &[usize],
    t_scale: f64,
    seed: u64,
) -> Result<HerglotzData, HerglotzError> {
    let (data, _) = sample_data_inner(spec, carrier_dims, kernel_dims, t_scale, seed)?;
    Ok(data)
}

/// Like [`sample_data`] but also returns a spoiled variant whose vessel
/// leaks into `ker(1 - L)`; extraction must reject the first and accept
/// the second.  Requires a nontrivial kernel.
pub fn sample_data_with_overlap(
    spec: &AlgebraSpec,
    carrier_dims: &[usize],
    kernel_dims: &[usize],
    t_scale: f64,
    seed: u64,
) -> Result<(HerglotzData, HerglotzData), HerglotzError> {
    if kernel_dims.iter().sum::<usize>() == 0 {
        return Err(HerglotzError::BadParameter(
            "overlap fixture needs a nontrivial kernel".to_string(),
        ));
    }
    let (clean, dirty) = sample_data_inner(spec, carrier_dims, kernel_dims, t_scale, seed)?;
    let dirty = dirty.expect("kernel is nontrivial");
    Ok((dirty, clean))
}

fn sample_data_inner(
    spec: &AlgebraSpec,
    carrier_dims: &[usize],
    kernel_dims: &[usize],
    t_scale: f64,
    seed: u64,
) -> Result<(HerglotzData, Option<HerglotzData>), HerglotzError> {
    let d = spec.total_dim();
    let sectors: Vec<usize> = if d == 1 {
        if carrier_dims.len() != 1 {
            return Err(HerglotzError::BadParameter(
                "scalar algebra takes a single carrier dimension".to_string(),
            ));
        }
        carrier_dims.to_vec()
    } else {
        if carrier_dims != spec.blocks() {
            return Err(HerglotzError::BadParameter(
                "carrier dims over a block algebra must equal its block sizes".to_string(),
            ));
        }
        carrier_dims.to_vec()
    };
    if kernel_dims.len() != sectors.len()
        || kernel_dims.iter().zip(&sectors).any(|(&k, &s)| k > s)
    {
        return Err(HerglotzError::BadParameter(
            "kernel dims must fit sector by sector".to_string(),
        ));
    }
    let mut rng = trial_rng(seed, 0x4e2907);
    let dc: usize = sectors.iter().sum();
    let widths: Vec<usize> = if d == 1 {
        vec![1]
    } else {
        spec.blocks().to_vec()
    };
    let mut l = CMatrix::zeros(dc, dc);
    let mut v_clean = CMatrix::zeros(dc, d);
    let mut v_dirty = CMatrix::zeros(dc, d);
    let mut row_off = 0;
    let mut col_off = 0;
    for (sec, (&size, &kdim)) in sectors.iter().zip(kernel_dims).enumerate() {
        let u = crate::linalg::random_unitary(&mut rng, size);
        let mut phases = CMatrix::zeros(size, size);
        for j in 0..size {
            phases[(j, j)] = if j < kdim {
                ONE
            } else {
                let theta: f64 = rng.random_range(0.4..std::f64::consts::TAU - 0.4);
                c(theta.cos(), theta.sin())
            };
        }
        let l_sec = &u * phases * u.adjoint();
        l.view_mut((row_off, row_off), (size, size)).copy_from(&l_sec);
        let width = widths[sec];
        let mut raw = CMatrix::zeros(size, width);
        for i in 0..size {
            for j in 0..width {
                raw[(i, j)] = gaussian_c64(&mut rng);
            }
        }
        // kernel eigenvectors are the first kdim columns of u
        let kernel_basis = u.view((0, kdim), (size, size - kdim)).into_owned();
        let clean_sec = &kernel_basis * (kernel_basis.adjoint() * &raw);
        let mut dirty_sec = clean_sec.clone();
        for j in 0..kdim {
            let leak = u.column(j).into_owned();
            for i in 0..size {
                dirty_sec[(i, 0)] += leak[i] * cr(0.8);
            }
        }
        v_clean
            .view_mut((row_off, col_off), (size, width))
            .copy_from(&clean_sec);
        v_dirty
            .view_mut((row_off, col_off), (size, width))
            .copy_from(&dirty_sec);
        row_off += size;
        col_off += width;
    }
    let t = sample_hermitian_element(spec, &mut rng).scale(cr(t_scale));
    let clean = HerglotzData::new(spec.clone(), t.clone(), l.clone(), v_clean)?;
    let dirty = if kernel_dims.iter().sum::<usize>() > 0 {
        Some(HerglotzData::new(spec.clone(), t, l, v_dirty)?)
    } else {
        None
    };
    Ok((clean, dirty))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::sample_uhp;
    use crate::cauchy::classical_model;
    use crate::linalg::{hermitian_part, min_hermitian_eigenvalue};

    fn scalar_data(l: C64, v: C64, t: f64) -> HerglotzData {
        let b = AlgebraSpec::scalar();
        HerglotzData::new(
            b.clone(),
            AlgElement::new(b, CMatrix::from_element(1, 1, cr(t))).unwrap(),
            CMatrix::from_element(1, 1, l),
            CMatrix::from_element(1, 1, v),
        )
        .unwrap()
    }

    fn scalar_point(z: C64) -> MatPoint {
        MatPoint::scalar(AlgebraSpec::scalar(), z, 1)
    }

    #[test]
    fn cayley_sends_i_to_zero_and_round_trips() {
        let b = AlgebraSpec::new(vec![2, 1]).unwrap();
        let i_point = MatPoint::scalar(b.clone(), IM, 2);
        assert!(cayley(&i_point).unwrap().norm() < 1e-14);
        for seed in 0..20 {
            let z = sample_uhp(&b, 1 + (seed as usize % 3), 0.2, seed);
            let lam = cayley(&z).unwrap();
            assert!(lam.norm() < 1.0, "seed {seed}: ||cayley|| = {}", lam.norm());
            let back = inverse_cayley(&lam).unwrap();
            assert!(
                (&back - &z).norm() < 1e-10 * (1.0 + z.norm()),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn cayley_rejects_real_points() {
        let b = AlgebraSpec::scalar();
        let z = MatPoint::scalar(b, cr(0.7), 1);
        assert!(matches!(
            cayley(&z),
            Err(HerglotzError::PointNotInUpperHalfPlane { .. })
        ));
        let x = scalar_point(c(0.0, 0.99));
        assert!(matches!(
            inverse_cayley(&scalar_point(cr(1.3))),
            Err(HerglotzError::NotContractive { .. })
        ));
        let _ = inverse_cayley(&x).unwrap();
    }

    #[test]
    fn herglotz_eval_at_zero_is_gram_of_vessel() {
        let data = sample_data(&AlgebraSpec::scalar(), &[4], &[0], 0.3, 9).unwrap();
        let zero = scalar_point(cr(0.0));
        let h = herglotz_eval(&data, &zero).unwrap();
        let vv = data.v().adjoint() * data.v();
        assert!((h.flat()[(0, 0)] - vv[(0, 0)]).norm() < 1e-12);
    }

    #[test]
    fn scalar_pin_reconstructs_reciprocal() {
        // L = -1, V = 1, T = 0 represents f(z) = -1/z
        let data = scalar_data(cr(-1.0), ONE, 0.0);
        for z in [c(0.0, 2.0), c(0.7, 0.9), c(-1.2, 0.4)] {
            let lam = cayley(&scalar_point(z)).unwrap();
            let h = herglotz_eval(&data, &lam).unwrap();
            let f = cr(0.0) + IM * h.flat()[(0, 0)];
            assert!((f - (-ONE / z)).norm() < 1e-12, "z = {z}");
        }
        let nd = data.extract(1e-8, 1e-9).unwrap();
        assert_eq!(nd.a.nrows(), 1);
        assert!(nd.a[(0, 0)].norm() < 1e-12, "A = 0");
        assert!((nd.w[(0, 0)].norm() - 1.0).abs() < 1e-12, "|W| = 1");
        assert!(nd.is_cauchy);
        let z = scalar_point(c(0.3, 1.4));
        let f = nd.eval(&z).unwrap();
        let expected = -ONE / c(0.3, 1.4);
        assert!((f.flat()[(0, 0)] - expected).norm() < 1e-12);
    }

    #[test]
    fn extraction_formula_at_l_equals_i() {
        // L0 = i: A = i(1+i)/(1-i) = -1, and the represented function is
        // (z-1)/(z+1) with constant 1, so is_cauchy must come out false
        let data = scalar_data(IM, ONE, 0.0);
        let nd = data.extract(1e-8, 1e-9).unwrap();
        assert!((nd.a[(0, 0)] - cr(-1.0)).norm() < 1e-12);
        assert!((nd.c.data()[(0, 0)] - ONE).norm() < 1e-12);
        assert!(!nd.is_cauchy);
        let z = c(0.4, 1.1);
        let f = nd.eval(&scalar_point(z)).unwrap();
        let expected = (z - ONE) / (z + ONE);
        assert!((f.flat()[(0, 0)] - expected).norm() < 1e-12);
    }

    #[test]
    fn kernel_split_matches_direct_eigenstructure() {
        let mut l = CMatrix::zeros(2, 2);
        l[(0, 0)] = ONE;
        l[(1, 1)] = IM;
        let split = kernel_split(&l, 1e-8);
        assert_eq!(split.kernel_dim, 1);
        assert_eq!(split.l0.nrows(), 1);
        assert!((split.l0[(0, 0)] - IM).norm() < 1e-12);
        assert_eq!(split.eigenvalues.len(), 2);

        let eye = CMatrix::identity(3, 3);
        let split = kernel_split(&eye, 1e-8);
        assert_eq!(split.kernel_dim, 3);
        assert_eq!(split.basis.ncols(), 0);

        let neg = eye.map(|x| -x);
        let split = kernel_split(&neg, 1e-8);
        assert_eq!(split.kernel_dim, 0);
        assert!((split.l0[(2, 2)] + ONE).norm() < 1e-12);
    }

    #[test]
    fn classical_herglotz_data_agrees_with_model() {
        let atoms = [-1.0, 2.0];
        let weights = [0.5, 0.5];
        let data = herglotz_from_classical(&atoms, &weights).unwrap();
        let model = classical_model(&atoms, &weights).unwrap();
        let b = AlgebraSpec::scalar();
        for seed in 0..10 {
            let z = sample_uhp(&b, 1 + (seed as usize % 2), 0.3, 200 + seed);
            let lam = cayley(&z).unwrap();
            let h = herglotz_eval(&data, &lam).unwrap();
            let f_ball = &amplify(data.t(), z.level()) + &h.scale(IM);
            let f_model = model.eval(&z).unwrap();
            assert!(
                (&f_ball - &f_model).norm() < 1e-10,
                "seed {seed}: {}",
                (&f_ball - &f_model).norm()
            );
        }
        let nd = data.extract(1e-8, 1e-9).unwrap();
        assert!(nd.is_cauchy);
        let mut recovered: Vec<f64> = (0..nd.a.nrows()).map(|j| nd.a[(j, j)].re).collect();
        recovered.sort_by(f64::total_cmp);
        assert!((recovered[0] + 1.0).abs() < 1e-8);
        assert!((recovered[1] - 2.0).abs() < 1e-8);
        for seed in 0..5 {
            let z = sample_uhp(&b, 2, 0.3, 300 + seed);
            let f_nev = nd.eval(&z).unwrap();
            let f_model = model.eval(&z).unwrap();
            assert!((&f_nev - &f_model).norm() < 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn extraction_round_trips_on_random_data() {
        let cases: Vec<(AlgebraSpec, Vec<usize>, Vec<usize>)> = vec![
            (AlgebraSpec::scalar(), vec![5], vec![0]),
            (AlgebraSpec::scalar(), vec![6], vec![2]),
            (AlgebraSpec::diagonal(2), vec![1, 1], vec![0, 0]),
            (AlgebraSpec::full(2), vec![2], vec![0]),
            (AlgebraSpec::new(vec![2, 1]).unwrap(), vec![2, 1], vec![1, 0]),
        ];
        for (idx, (spec, carrier, kernel)) in cases.into_iter().enumerate() {
            let data = sample_data(&spec, &carrier, &kernel, 0.5, 17 + idx as u64).unwrap();
            let nd = data.extract(1e-8, 1e-9).unwrap();
            for lvl in 1..=2 {
                let z = sample_uhp(&spec, lvl, 0.3, 400 + idx as u64 * 7 + lvl as u64);
                let lam = cayley(&z).unwrap();
                let h = herglotz_eval(&data, &lam).unwrap();
                let f_ball = &amplify(data.t(), z.level()) + &h.scale(IM);
                let f_nev = nd.eval(&z).unwrap();
                assert!(
                    (&f_ball - &f_nev).norm() < 1e-8 * (1.0 + f_ball.norm()),
                    "case {idx} level {lvl}: {}",
                    (&f_ball - &f_nev).norm()
                );
            }
        }
    }

    #[test]
    fn overlapping_vessel_is_rejected_and_projection_heals_it() {
        for seed in 0..5 {
            let (dirty, clean) =
                sample_data_with_overlap(&AlgebraSpec::scalar(), &[5], &[2], 0.4, seed).unwrap();
            assert!(matches!(
                dirty.extract(1e-8, 1e-9),
                Err(HerglotzError::RangeNotPerpendicular { .. })
            ));
            assert!(clean.extract(1e-8, 1e-9).is_ok(), "seed {seed}");
        }
    }

    #[test]
    fn full_kernel_degenerates_to_constant() {
        let b = AlgebraSpec::scalar();
        let data = HerglotzData::new(
            b.clone(),
            AlgElement::new(b, CMatrix::from_element(1, 1, cr(0.7))).unwrap(),
            CMatrix::identity(3, 3),
            CMatrix::zeros(3, 1),
        )
        .unwrap();
        let nd = data.extract(1e-8, 1e-9).unwrap();
        assert_eq!(nd.a.nrows(), 0);
        assert!(!nd.is_cauchy);
        let f = nd.eval(&scalar_point(c(0.0, 1.0))).unwrap();
        assert!((f.flat()[(0, 0)] - cr(0.7)).norm() < 1e-14);
    }

    #[test]
    fn herglotz_values_have_positive_real_part() {
        let mut rng = trial_rng(77, 3);
        let data = sample_data(&AlgebraSpec::full(2), &[2], &[0], 0.5, 21).unwrap();
        for _ in 0..50 {
            let raw = crate::algebra::sample_point(&AlgebraSpec::full(2), 2, &mut rng);
            let x = raw.scale(cr(0.8 / (1.0 + raw.norm())));
            let h = herglotz_eval(&data, &x).unwrap();
            let re_min = min_hermitian_eigenvalue(&hermitian_part(h.flat()));
            assert!(re_min >= -1e-9, "Re h >= 0 violated: {re_min}");
        }
    }

    #[test]
    fn rejects_non_unitary_l() {
        let b = AlgebraSpec::scalar();
        let result = HerglotzData::new(
            b.clone(),
            AlgElement::zero(b),
            CMatrix::from_element(1, 1, cr(0.5)),
            CMatrix::from_element(1, 1, ONE),
        );
        assert!(matches!(result, Err(HerglotzError::NotUnitary { .. })));
    }
}
