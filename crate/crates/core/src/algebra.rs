//! Block-diagonal matrix algebras, their elements, and matrix points.
//!
//! A finite-dimensional C*-algebra is fixed here as a direct sum of full
//! matrix blocks `B = M_{r_1} + ... + M_{r_m}`, embedded block-diagonally
//! in its enveloping algebra `M_d`, `d = r_1 + ... + r_m`.  An
//! [`AlgElement`] is a `d x d` matrix supported on the blocks; a
//! [`MatPoint`] of level `n` is an `n x n` grid of such elements,
//! identified with the flat `nd x nd` matrix
//!
//! ```text
//! sum_{i,j} e_ij (x) grid[i][j]
//! ```
//!
//! (grid index outer, algebra index inner), so that amplifications of maps
//! and elements act as `I_n (x) .` on flats.  The operator upper half
//! plane at level `n` is the set of points with `Im Z > 0` as an
//! `nd x nd` matrix, where `Im Z = (Z - Z*)/2i`.

use crate::linalg::{
    self, cr, guarded_inverse, hermitian_eigen, hermitian_part, kron, operator_norm, skew_part,
    smallest_singular_value, trial_rng, CMatrix, C64, IM, ZERO,
};
use crate::tol;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("algebra must have at least one block")]
    EmptyBlocks,
    #[error("block sizes must be positive")]
    ZeroBlock,
    #[error("level must be positive")]
    ZeroLevel,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("element specs do not match")]
    SpecMismatch,
    #[error("grid must hold level^2 cells: expected {expected}, got {got}")]
    GridSize { expected: usize, got: usize },
    #[error("support off the blocks: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    OffBlockSupport { defect: f64, tol: f64 },
    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error("singular element: sigma_min {sigma_min:.3e} at scale {scale:.3e}")]
    Singular { sigma_min: f64, scale: f64 },
}

/// Shape of a block-diagonal matrix algebra: the sizes of its full matrix
/// blocks, in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlgebraSpec {
    blocks: Vec<usize>,
}

impl AlgebraSpec {
    pub fn new(blocks: Vec<usize>) -> Result<Self, AlgebraError> {
        if blocks.is_empty() {
            return Err(AlgebraError::EmptyBlocks);
        }
        if blocks.iter().any(|&b| b == 0) {
            return Err(AlgebraError::ZeroBlock);
        }
        Ok(AlgebraSpec { blocks })
    }

    /// The complex numbers: a single 1x1 block.
    pub fn scalar() -> Self {
        AlgebraSpec { blocks: vec![1] }
    }

    /// The diagonal algebra C^m.
    pub fn diagonal(m: usize) -> Self {
        assert!(m > 0, "diagonal algebra needs at least one block");
        AlgebraSpec { blocks: vec![1; m] }
    }

    /// The full matrix algebra M_d.
    pub fn full(d: usize) -> Self {
        assert!(d > 0, "full algebra needs positive dimension");
        AlgebraSpec { blocks: vec![d] }
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    /// Dimension of the enveloping matrix algebra.
    pub fn total_dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// `(offset, size)` of each block inside the enveloping algebra.
    pub fn block_ranges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut offset = 0;
        for &b in &self.blocks {
            out.push((offset, b));
            offset += b;
        }
        out
    }

    /// Index of the block containing enveloping coordinate `i`.
    pub fn block_of(&self, i: usize) -> usize {
        let mut offset = 0;
        for (k, &b) in self.blocks.iter().enumerate() {
            offset += b;
            if i < offset {
                return k;
            }
        }
        panic!("coordinate {i} outside algebra of dimension {}", self.total_dim());
    }

    fn same_block(&self, i: usize, j: usize) -> bool {
        self.block_of(i) == self.block_of(j)
    }

    /// Operator norm of the part of `data` supported off the blocks.
    pub fn off_block_defect(&self, data: &CMatrix) -> f64 {
        let d = self.total_dim();
        let off = CMatrix::from_fn(d, d, |i, j| {
            if self.same_block(i, j) {
                ZERO
            } else {
                data[(i, j)]
            }
        });
        operator_norm(&off)
    }

    fn zero_off_blocks(&self, data: &CMatrix) -> CMatrix {
        let d = self.total_dim();
        CMatrix::from_fn(d, d, |i, j| if self.same_block(i, j) { data[(i, j)] } else { ZERO })
    }
}

/// An element of a block-diagonal algebra: a matrix of the enveloping
/// dimension whose support lies exactly on the blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgElement {
    spec: AlgebraSpec,
    data: CMatrix,
}

impl AlgElement {
    /// Accepts a matrix whose off-block part is numerically negligible
    /// (relative tolerance [`tol::BLOCK`]) and zeroes that part exactly.
    pub fn new(spec: AlgebraSpec, data: CMatrix) -> Result<Self, AlgebraError> {
        Self::new_with_tol(spec, data, tol::BLOCK)
    }

    pub(crate) fn new_with_tol(
        spec: AlgebraSpec,
        data: CMatrix,
        rel: f64,
    ) -> Result<Self, AlgebraError> {
        let d = spec.total_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(AlgebraError::DimMismatch {
                expected: d,
                got: data.nrows().max(data.ncols()),
            });
        }
        let defect = spec.off_block_defect(&data);
        let bound = rel * (1.0 + operator_norm(&data));
        if defect > bound {
            return Err(AlgebraError::OffBlockSupport { defect, tol: bound });
        }
        let data = spec.zero_off_blocks(&data);
        Ok(AlgElement { spec, data })
    }

    /// Assembles an element from one matrix per block.
    pub fn from_blocks(spec: AlgebraSpec, blocks: &[CMatrix]) -> Result<Self, AlgebraError> {
        if blocks.len() != spec.blocks().len() {
            return Err(AlgebraError::GridSize {
                expected: spec.blocks().len(),
                got: blocks.len(),
            });
        }
        let d = spec.total_dim();
        let mut data = CMatrix::zeros(d, d);
        for ((offset, size), blk) in spec.block_ranges().into_iter().zip(blocks) {
            if blk.nrows() != size || blk.ncols() != size {
                return Err(AlgebraError::DimMismatch {
                    expected: size,
                    got: blk.nrows().max(blk.ncols()),
                });
            }
            data.view_mut((offset, offset), (size, size)).copy_from(blk);
        }
        Ok(AlgElement { spec, data })
    }

    /// The canonical conditional expectation of the enveloping algebra onto
    /// the blocks: keeps the block entries, zeroes the rest.
    pub fn project(spec: AlgebraSpec, data: &CMatrix) -> Result<Self, AlgebraError> {
        let d = spec.total_dim();
        if data.nrows() != d || data.ncols() != d {
            return Err(AlgebraError::DimMismatch {
                expected: d,
                got: data.nrows().max(data.ncols()),
            });
        }
        Ok(AlgElement {
            data: spec.zero_off_blocks(data),
            spec,
        })
    }

    pub fn zero(spec: AlgebraSpec) -> Self {
        let d = spec.total_dim();
        AlgElement {
            spec,
            data: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(spec: AlgebraSpec) -> Self {
        let d = spec.total_dim();
        AlgElement {
            spec,
            data: CMatrix::identity(d, d),
        }
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_data(self) -> CMatrix {
        self.data
    }

    /// The `k`-th diagonal block.
    pub fn block(&self, k: usize) -> CMatrix {
        let (offset, size) = self.spec.block_ranges()[k];
        self.data.view((offset, offset), (size, size)).into_owned()
    }

    pub fn adjoint(&self) -> Self {
        AlgElement {
            spec: self.spec.clone(),
            data: self.data.adjoint(),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        AlgElement {
            spec: self.spec.clone(),
            data: self.data.map(|x| x * z),
        }
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.data)
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.data)
    }

    /// Symmetrizes when the defect is within `tol * (1 + norm)`, errors
    /// otherwise.
    pub fn hermitianize(&self, rel: f64) -> Result<Self, AlgebraError> {
        let defect = self.hermitian_defect();
        let bound = rel * (1.0 + self.norm());
        if defect > bound {
            return Err(AlgebraError::NotHermitian { defect, tol: bound });
        }
        Ok(AlgElement {
            spec: self.spec.clone(),
            data: hermitian_part(&self.data),
        })
    }

    /// Blockwise inverse; exact zeros stay off the blocks.
    pub fn try_inverse(&self) -> Result<Self, AlgebraError> {
        let data = structured_inverse(&self.spec, 1, &self.data)?;
        Ok(AlgElement {
            spec: self.spec.clone(),
            data,
        })
    }
}

impl std::ops::Add for &AlgElement {
    type Output = AlgElement;
    fn add(self, rhs: &AlgElement) -> AlgElement {
        assert_eq!(self.spec, rhs.spec, "element spec mismatch");
        AlgElement {
            spec: self.spec.clone(),
            data: &self.data + &rhs.data,
        }
    }
}

impl std::ops::Sub for &AlgElement {
    type Output = AlgElement;
    fn sub(self, rhs: &AlgElement) -> AlgElement {
        assert_eq!(self.spec, rhs.spec, "element spec mismatch");
        AlgElement {
            spec: self.spec.clone(),
            data: &self.data - &rhs.data,
        }
    }
}

impl std::ops::Mul for &AlgElement {
    type Output = AlgElement;
    fn mul(self, rhs: &AlgElement) -> AlgElement {
        assert_eq!(self.spec, rhs.spec, "element spec mismatch");
        AlgElement {
            spec: self.spec.clone(),
            data: &self.data * &rhs.data,
        }
    }
}

impl std::ops::Neg for &AlgElement {
    type Output = AlgElement;
    fn neg(self) -> AlgElement {
        self.scale(cr(-1.0))
    }
}

/// A matrix point of level `n` over a block-diagonal algebra, stored as its
/// flat `nd x nd` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatPoint {
    spec: AlgebraSpec,
    level: usize,
    flat: CMatrix,
}

/// Indices of the flat matrix belonging to algebra block `beta`
/// (all grid rows), in grid-major order.
fn block_indices(spec: &AlgebraSpec, level: usize, beta: usize) -> Vec<usize> {
    let d = spec.total_dim();
    let (offset, size) = spec.block_ranges()[beta];
    let mut idx = Vec::with_capacity(level * size);
    for i in 0..level {
        for a in 0..size {
            idx.push(i * d + offset + a);
        }
    }
    idx
}

/// Blockwise inverse of a structured flat matrix: each algebra block of a
/// level-`n` point is inverted on its own, so entries off the blocks stay
/// exactly zero.  The guard is global: the smallest singular value across
/// blocks is compared against the largest block norm.
fn structured_inverse(
    spec: &AlgebraSpec,
    level: usize,
    flat: &CMatrix,
) -> Result<CMatrix, AlgebraError> {
    let nblocks = spec.blocks().len();
    let mut subs = Vec::with_capacity(nblocks);
    let mut sigma_min = f64::INFINITY;
    let mut scale: f64 = 1.0;
    for beta in 0..nblocks {
        let idx = block_indices(spec, level, beta);
        let sub = flat.select_rows(idx.iter()).select_columns(idx.iter());
        sigma_min = sigma_min.min(smallest_singular_value(&sub));
        scale = scale.max(operator_norm(&sub));
        subs.push((idx, sub));
    }
    if sigma_min < tol::SINGULAR * scale {
        return Err(AlgebraError::Singular { sigma_min, scale });
    }
    let mut out = CMatrix::zeros(flat.nrows(), flat.ncols());
    for (idx, sub) in subs {
        let inv = guarded_inverse(&sub).map_err(|s| AlgebraError::Singular {
            sigma_min: s.sigma_min,
            scale: s.scale,
        })?;
        for (r, &gr) in idx.iter().enumerate() {
            for (s, &gc) in idx.iter().enumerate() {
                out[(gr, gc)] = inv[(r, s)];
            }
        }
    }
    Ok(out)
}

impl MatPoint {
    /// Builds a point from `level^2` cells in row-major order.
    pub fn from_grid(
        spec: AlgebraSpec,
        level: usize,
        cells: Vec<AlgElement>,
    ) -> Result<Self, AlgebraError> {
        if level == 0 {
            return Err(AlgebraError::ZeroLevel);
        }
        if cells.len() != level * level {
            return Err(AlgebraError::GridSize {
                expected: level * level,
                got: cells.len(),
            });
        }
        let d = spec.total_dim();
        let mut flat = CMatrix::zeros(level * d, level * d);
        for i in 0..level {
            for j in 0..level {
                let cell = &cells[i * level + j];
                if cell.spec() != &spec {
                    return Err(AlgebraError::SpecMismatch);
                }
                flat.view_mut((i * d, j * d), (d, d)).copy_from(cell.data());
            }
        }
        Ok(MatPoint { spec, level, flat })
    }

    /// Builds a point from its flat matrix, checking that every cell is
    /// supported on the blocks (relative tolerance [`tol::BLOCK`]).
    pub fn from_flat(spec: AlgebraSpec, level: usize, flat: CMatrix) -> Result<Self, AlgebraError> {
        Self::from_flat_tol(spec, level, flat, tol::BLOCK)
    }

    pub(crate) fn from_flat_tol(
        spec: AlgebraSpec,
        level: usize,
        flat: CMatrix,
        rel: f64,
    ) -> Result<Self, AlgebraError> {
        if level == 0 {
            return Err(AlgebraError::ZeroLevel);
        }
        let d = spec.total_dim();
        if flat.nrows() != level * d || flat.ncols() != level * d {
            return Err(AlgebraError::DimMismatch {
                expected: level * d,
                got: flat.nrows().max(flat.ncols()),
            });
        }
        let scale = 1.0 + operator_norm(&flat);
        let mut defect: f64 = 0.0;
        for i in 0..level {
            for j in 0..level {
                let cell = flat.view((i * d, j * d), (d, d)).into_owned();
                defect = defect.max(spec.off_block_defect(&cell));
            }
        }
        if defect > rel * scale {
            return Err(AlgebraError::OffBlockSupport {
                defect,
                tol: rel * scale,
            });
        }
        let mut clean = flat;
        for i in 0..level {
            for j in 0..level {
                let cell = clean.view((i * d, j * d), (d, d)).into_owned();
                clean
                    .view_mut((i * d, j * d), (d, d))
                    .copy_from(&spec.zero_off_blocks(&cell));
            }
        }
        Ok(MatPoint {
            spec,
            level,
            flat: clean,
        })
    }

    pub(crate) fn from_flat_unchecked(spec: AlgebraSpec, level: usize, flat: CMatrix) -> Self {
        MatPoint { spec, level, flat }
    }

    /// Level-1 point holding a single element.
    pub fn from_element(el: AlgElement) -> Self {
        MatPoint {
            spec: el.spec().clone(),
            level: 1,
            flat: el.into_data(),
        }
    }

    pub fn zero(spec: AlgebraSpec, level: usize) -> Self {
        let d = spec.total_dim();
        MatPoint {
            spec,
            level,
            flat: CMatrix::zeros(level * d, level * d),
        }
    }

    pub fn identity(spec: AlgebraSpec, level: usize) -> Self {
        let d = spec.total_dim();
        MatPoint {
            spec,
            level,
            flat: CMatrix::identity(level * d, level * d),
        }
    }

    /// `z` times the identity at the given level.
    pub fn scalar(spec: AlgebraSpec, z: C64, level: usize) -> Self {
        let d = spec.total_dim();
        MatPoint {
            spec,
            level,
            flat: CMatrix::identity(level * d, level * d).map(|x| x * z),
        }
    }

    pub fn spec(&self) -> &AlgebraSpec {
        &self.spec
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn flat(&self) -> &CMatrix {
        &self.flat
    }

    /// Total flat dimension `level * total_dim`.
    pub fn dim(&self) -> usize {
        self.flat.nrows()
    }

    pub fn grid_cell(&self, i: usize, j: usize) -> AlgElement {
        assert!(i < self.level && j < self.level, "grid index out of range");
        let d = self.spec.total_dim();
        AlgElement {
            spec: self.spec.clone(),
            data: self.flat.view((i * d, j * d), (d, d)).into_owned(),
        }
    }

    pub fn adjoint(&self) -> Self {
        MatPoint {
            spec: self.spec.clone(),
            level: self.level,
            flat: self.flat.adjoint(),
        }
    }

    pub fn scale(&self, z: C64) -> Self {
        MatPoint {
            spec: self.spec.clone(),
            level: self.level,
            flat: self.flat.map(|x| x * z),
        }
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.flat)
    }

    pub fn hermitian_defect(&self) -> f64 {
        linalg::hermitian_defect(&self.flat)
    }

    /// Block-diagonal join: the level adds, the algebra stays.
    pub fn direct_sum(&self, other: &MatPoint) -> Self {
        assert_eq!(self.spec, other.spec, "point spec mismatch");
        let d = self.spec.total_dim();
        let (n, m) = (self.level, other.level);
        let mut flat = CMatrix::zeros((n + m) * d, (n + m) * d);
        flat.view_mut((0, 0), (n * d, n * d)).copy_from(&self.flat);
        flat.view_mut((n * d, n * d), (m * d, m * d))
            .copy_from(&other.flat);
        MatPoint {
            spec: self.spec.clone(),
            level: n + m,
            flat,
        }
    }

    /// Inverse in the level-`n` algebra, computed blockwise so that exact
    /// zeros stay off the blocks.
    pub fn try_inverse(&self) -> Result<Self, AlgebraError> {
        let flat = structured_inverse(&self.spec, self.level, &self.flat)?;
        Ok(MatPoint {
            spec: self.spec.clone(),
            level: self.level,
            flat,
        })
    }
}

impl std::ops::Add for &MatPoint {
    type Output = MatPoint;
    fn add(self, rhs: &MatPoint) -> MatPoint {
        assert_eq!(self.spec, rhs.spec, "point spec mismatch");
        assert_eq!(self.level, rhs.level, "point level mismatch");
        MatPoint {
            spec: self.spec.clone(),
            level: self.level,
            flat: &self.flat + &rhs.flat,
        }
    }
}

impl std::ops::Sub for &MatPoint {
    type Output = MatPoint;
    fn sub(self, rhs: &MatPoint) -> MatPoint {
        assert_eq!(self.spec, rhs.spec, "point spec mismatch");
        assert_eq!(self.level, rhs.level, "point level mismatch");
        MatPoint {
            spec: self.spec.clone(),
            level: self.level,
            flat: &self.flat - &rhs.flat,
        }
    }
}

impl std::ops::Mul for &MatPoint {
    type Output = MatPoint;
    fn mul(self, rhs: &MatPoint) -> MatPoint {
        assert_eq!(self.spec, rhs.spec, "point spec mismatch");
        assert_eq!(self.level, rhs.level, "point level mismatch");
        MatPoint {
            spec: self.spec.clone(),
            level: self.level,
            flat: &self.flat * &rhs.flat,
        }
    }
}

impl std::ops::Neg for &MatPoint {
    type Output = MatPoint;
    fn neg(self) -> MatPoint {
        self.scale(cr(-1.0))
    }
}

/// `(Z - Z*)/2i` as a point over the same algebra.
pub fn imaginary_part(z: &MatPoint) -> MatPoint {
    MatPoint {
        spec: z.spec().clone(),
        level: z.level(),
        flat: skew_part(z.flat()),
    }
}

/// `(Z + Z*)/2` as a point over the same algebra.
pub fn real_part(z: &MatPoint) -> MatPoint {
    MatPoint {
        spec: z.spec().clone(),
        level: z.level(),
        flat: hermitian_part(z.flat()),
    }
}

/// `b (x) I_n`: the element repeated down the grid diagonal.
pub fn amplify(b: &AlgElement, level: usize) -> MatPoint {
    assert!(level > 0, "amplification level must be positive");
    let eye = CMatrix::identity(level, level);
    MatPoint {
        spec: b.spec().clone(),
        level,
        flat: kron(&eye, b.data()),
    }
}

/// Membership of a point in the standard operator regions, with the
/// quantities the calls were decided on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionReport {
    pub min_im_eigenvalue: f64,
    pub min_re_eigenvalue: f64,
    pub operator_norm: f64,
    pub hermitian_defect: f64,
    /// `Im Z >= tol` (strict positivity with quantitative margin).
    pub in_open_upper_half_plane: bool,
    /// `Im Z >= -tol`.
    pub in_closed_upper_half_plane: bool,
    /// `||Z|| <= 1 - tol`.
    pub in_open_ball: bool,
    /// `||Z|| <= 1 + tol`.
    pub in_closed_ball: bool,
    /// `Re Z >= -tol`.
    pub in_closed_right_half_plane: bool,
}

pub fn classify_region(z: &MatPoint, tol: f64) -> RegionReport {
    let min_im = min_eig_of(&imaginary_part(z));
    let min_re = min_eig_of(&real_part(z));
    let norm = z.norm();
    RegionReport {
        min_im_eigenvalue: min_im,
        min_re_eigenvalue: min_re,
        operator_norm: norm,
        hermitian_defect: z.hermitian_defect(),
        in_open_upper_half_plane: min_im >= tol,
        in_closed_upper_half_plane: min_im >= -tol,
        in_open_ball: norm <= 1.0 - tol,
        in_closed_ball: norm <= 1.0 + tol,
        in_closed_right_half_plane: min_re >= -tol,
    }
}

fn min_eig_of(h: &MatPoint) -> f64 {
    let (vals, _) = hermitian_eigen(h.flat());
    vals.first().copied().unwrap_or(0.0)
}

/// Random element with independent Gaussian block entries, operator norm
/// O(1).
pub fn sample_element<R: Rng>(spec: &AlgebraSpec, rng: &mut R) -> AlgElement {
    let d = spec.total_dim();
    let mut data = CMatrix::zeros(d, d);
    for (offset, size) in spec.block_ranges() {
        let g = linalg::ginibre(rng, size, size).map(|x| x * cr(1.0 / (size as f64).sqrt()));
        data.view_mut((offset, offset), (size, size)).copy_from(&g);
    }
    AlgElement {
        spec: spec.clone(),
        data,
    }
}

/// Random Hermitian element.
pub fn sample_hermitian_element<R: Rng>(spec: &AlgebraSpec, rng: &mut R) -> AlgElement {
    let e = sample_element(spec, rng);
    AlgElement {
        spec: e.spec,
        data: hermitian_part(&e.data),
    }
}

/// Random point of the given level, Gaussian cells, norm O(1).
pub fn sample_point<R: Rng>(spec: &AlgebraSpec, level: usize, rng: &mut R) -> MatPoint {
    assert!(level > 0, "level must be positive");
    let d = spec.total_dim();
    let mut flat = CMatrix::zeros(level * d, level * d);
    for i in 0..level {
        for j in 0..level {
            let cell = sample_element(spec, rng);
            flat.view_mut((i * d, j * d), (d, d)).copy_from(cell.data());
        }
    }
    let flat = flat.map(|x| x * cr(1.0 / (level as f64).sqrt()));
    MatPoint {
        spec: spec.clone(),
        level,
        flat,
    }
}

/// Random self-adjoint point of the given level.
pub fn sample_hermitian_point<R: Rng>(spec: &AlgebraSpec, level: usize, rng: &mut R) -> MatPoint {
    let p = sample_point(spec, level, rng);
    MatPoint {
        spec: p.spec,
        level: p.level,
        flat: hermitian_part(&p.flat),
    }
}

/// Random point of the upper half plane over `spec` at the given level:
/// `Z = H + i (G G* + margin I)` with `H` self-adjoint and `G` Gaussian,
/// so `Im Z >= margin` by construction.
pub fn sample_uhp_rng<R: Rng>(
    spec: &AlgebraSpec,
    level: usize,
    margin: f64,
    rng: &mut R,
) -> MatPoint {
    assert!(margin > 0.0, "upper half plane margin must be positive");
    let h = sample_hermitian_point(spec, level, rng);
    let g = sample_point(spec, level, rng);
    let pos = g.flat() * g.flat().adjoint()
        + CMatrix::identity(g.dim(), g.dim()).map(|x| x * cr(margin));
    let flat = h.flat() + pos.map(|x| x * IM);
    MatPoint {
        spec: spec.clone(),
        level,
        flat,
    }
}

/// Seeded variant of [`sample_uhp_rng`].
pub fn sample_uhp(spec: &AlgebraSpec, level: usize, margin: f64, seed: u64) -> MatPoint {
    let mut rng = trial_rng(seed, 0x5eed);
    sample_uhp_rng(spec, level, margin, &mut rng)
}

/// A pair of upper-half-plane points with a scalar intertwiner:
/// `(Gamma (x) 1) X = Y (Gamma (x) 1)`.  Free Pick functions must carry
/// the same relation over to their values.
#[derive(Debug, Clone)]
pub struct IntertwinerCase {
    pub label: &'static str,
    pub x: MatPoint,
    pub y: MatPoint,
    /// Scalar `level(y) x level(x)` matrix acting as `gamma (x) I_d`.
    pub gamma: CMatrix,
}

/// `|| (gamma (x) I_d) a - b (gamma (x) I_d) ||` for points `a`, `b` over
/// the same algebra.
pub fn intertwine_defect(gamma: &CMatrix, a: &MatPoint, b: &MatPoint) -> f64 {
    let d = a.spec().total_dim();
    let g = kron(gamma, &CMatrix::identity(d, d));
    operator_norm(&(&g * a.flat() - b.flat() * &g))
}

/// Standard intertwiner test family through a given point: the identity,
/// direct-sum embeddings (co-isometric corners), unitary conjugation, and
/// an invertible near-unitary conjugation (kept only when the conjugated
/// point stays in the open upper half plane).
pub fn make_intertwiner_cases(x: &MatPoint, seed: u64) -> Vec<IntertwinerCase> {
    let mut rng = trial_rng(seed, 0x17e7);
    let n = x.level();
    let d = x.spec().total_dim();
    let mut out = Vec::new();

    out.push(IntertwinerCase {
        label: "identity",
        x: x.clone(),
        y: x.clone(),
        gamma: CMatrix::identity(n, n),
    });

    let w = sample_uhp_rng(x.spec(), 2, 0.3, &mut rng);
    let m = w.level();
    let mut top = CMatrix::zeros(n + m, n);
    top.view_mut((0, 0), (n, n)).copy_from(&CMatrix::identity(n, n));
    out.push(IntertwinerCase {
        label: "direct-sum-top",
        x: x.clone(),
        y: x.direct_sum(&w),
        gamma: top,
    });

    let w2 = sample_uhp_rng(x.spec(), 1, 0.3, &mut rng);
    let m2 = w2.level();
    let mut bottom = CMatrix::zeros(n + m2, n);
    bottom
        .view_mut((m2, 0), (n, n))
        .copy_from(&CMatrix::identity(n, n));
    out.push(IntertwinerCase {
        label: "direct-sum-bottom",
        x: x.clone(),
        y: w2.direct_sum(x),
        gamma: bottom,
    });

    let u = linalg::random_unitary(&mut rng, n);
    let ue = kron(&u, &CMatrix::identity(d, d));
    let y_flat = &ue * x.flat() * ue.adjoint();
    out.push(IntertwinerCase {
        label: "unitary-conjugation",
        x: x.clone(),
        y: MatPoint::from_flat_tol(x.spec().clone(), n, y_flat, 1e-8)
            .expect("unitary conjugation preserves block support"),
        gamma: u.clone(),
    });

    let s = &u + linalg::ginibre(&mut rng, n, n).map(|e| e * cr(0.08));
    if let Ok(s_inv) = guarded_inverse(&s) {
        let se = kron(&s, &CMatrix::identity(d, d));
        let se_inv = kron(&s_inv, &CMatrix::identity(d, d));
        let y_flat = &se * x.flat() * &se_inv;
        if let Ok(y) = MatPoint::from_flat_tol(x.spec().clone(), n, y_flat, 1e-8) {
            if classify_region(&y, tol::PSD).in_open_upper_half_plane {
                out.push(IntertwinerCase {
                    label: "invertible-conjugation",
                    x: x.clone(),
                    y,
                    gamma: s,
                });
            }
        }
    }

    out
}

/// Convenience: `z * I` at level 1 over the scalars.
pub fn scalar_point(z: C64) -> MatPoint {
    MatPoint::scalar(AlgebraSpec::scalar(), z, 1)
}
