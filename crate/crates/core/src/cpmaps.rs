//! Linear maps between block-diagonal algebras: complete positivity,
//! multiplicativity, and conditional-expectation diagnostics.
//!
//! A [`LinMap`] from an algebra with enveloping dimension `p` to one with
//! enveloping dimension `q` is stored as the `q^2 x p^2` matrix acting on
//! column-stacked matrices, `vec(m)[j*p + i] = m[(i,j)]`.  Maps defined by
//! an action on the block algebra are extended to the enveloping algebra
//! by pre-composing with the canonical block truncation, so a map "from
//! `C^2`" is simultaneously a map from `M_2` that kills the off-diagonal.
//!
//! Complete positivity is decided through the Choi matrix
//! `C = sum_{ij} e_ij (x) Phi(e_ij)`; multiplicativity of a map on the
//! subalgebra generated by a family is decided on an orthonormal basis of
//! the word span, which is equivalent to checking all word pairs because
//! `(x, y) -> Phi(xy) - Phi(x)Phi(y)` is bilinear.

use crate::algebra::{AlgebraError, AlgebraSpec, AlgElement, MatPoint};
use crate::linalg::{
    cr, ginibre, hermitian_eigen, hermitian_part, min_hermitian_eigenvalue, operator_norm,
    trial_rng, CMatrix, CVector, C64, ZERO,
};
use crate::tol;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("map expects {expected}-dimensional input, got {got}")]
    InputDim { expected: usize, got: usize },
    #[error("map matrix must be {rows} x {cols}, got {got_rows} x {got_cols}")]
    MatrixShape {
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("argument lives over the wrong algebra")]
    SpecMismatch,
    #[error("map is not completely positive: Choi minimum eigenvalue {min_eigenvalue:.3e}")]
    NotCompletelyPositive { min_eigenvalue: f64 },
    #[error("generator family is empty")]
    EmptyGenerators,
}

/// Certifications recorded on a map.  These are conclusions of explicit
/// numerical checks, never assumptions; a deserialized flag is re-checked
/// before anything relies on it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MapFlags {
    pub unital: bool,
    pub cp_verified: bool,
    /// Generators on whose word span multiplicativity was verified.
    pub homomorphic_on: Option<Vec<AlgElement>>,
}

/// A linear map between block-diagonal algebras in matrix form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinMap {
    dom: AlgebraSpec,
    cod: AlgebraSpec,
    matrix: CMatrix,
    pub flags: MapFlags,
}

pub(crate) fn vec_mat(m: &CMatrix) -> CVector {
    let (r, c) = (m.nrows(), m.ncols());
    CVector::from_fn(r * c, |k, _| m[(k % r, k / r)])
}

pub(crate) fn unvec_mat(v: &CVector, rows: usize) -> CMatrix {
    let cols = v.nrows() / rows;
    CMatrix::from_fn(rows, cols, |i, j| v[j * rows + i])
}

impl LinMap {
    /// Wraps a raw `q^2 x p^2` matrix.
    pub fn from_matrix(
        dom: AlgebraSpec,
        cod: AlgebraSpec,
        matrix: CMatrix,
    ) -> Result<Self, MapError> {
        let p = dom.total_dim();
        let q = cod.total_dim();
        if matrix.nrows() != q * q || matrix.ncols() != p * p {
            return Err(MapError::MatrixShape {
                rows: q * q,
                cols: p * p,
                got_rows: matrix.nrows(),
                got_cols: matrix.ncols(),
            });
        }
        Ok(LinMap {
            dom,
            cod,
            matrix,
            flags: MapFlags::default(),
        })
    }

    /// Builds the matrix of a map given by its action on matrix units of
    /// the enveloping domain algebra.  Units are block-truncated before
    /// the action is taken (off-block units map to zero), and every image
    /// must be supported on the codomain blocks.
    pub fn from_action<F>(dom: AlgebraSpec, cod: AlgebraSpec, action: F) -> Result<Self, MapError>
    where
        F: Fn(&CMatrix) -> CMatrix,
    {
        let p = dom.total_dim();
        let q = cod.total_dim();
        let mut matrix = CMatrix::zeros(q * q, p * p);
        for j in 0..p {
            for i in 0..p {
                let col = j * p + i;
                if !same_block(&dom, i, j) {
                    continue;
                }
                let mut unit = CMatrix::zeros(p, p);
                unit[(i, j)] = crate::linalg::ONE;
                let img = action(&unit);
                if img.nrows() != q || img.ncols() != q {
                    return Err(MapError::InputDim {
                        expected: q,
                        got: img.nrows().max(img.ncols()),
                    });
                }
                let img = AlgElement::new(cod.clone(), img)?;
                matrix.set_column(col, &vec_mat(img.data()));
            }
        }
        Ok(LinMap {
            dom,
            cod,
            matrix,
            flags: MapFlags::default(),
        })
    }

    pub fn dom(&self) -> &AlgebraSpec {
        &self.dom
    }

    pub fn cod(&self) -> &AlgebraSpec {
        &self.cod
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Applies the map to a full matrix of the enveloping domain algebra.
    pub fn apply_enveloping(&self, m: &CMatrix) -> Result<AlgElement, MapError> {
        let p = self.dom.total_dim();
        if m.nrows() != p || m.ncols() != p {
            return Err(MapError::InputDim {
                expected: p,
                got: m.nrows().max(m.ncols()),
            });
        }
        let out = &self.matrix * vec_mat(m);
        let q = self.cod.total_dim();
        Ok(AlgElement::new_with_tol(
            self.cod.clone(),
            unvec_mat(&out, q),
            tol::BLOCK,
        )?)
    }

    pub fn apply(&self, x: &AlgElement) -> Result<AlgElement, MapError> {
        if x.spec() != &self.dom {
            return Err(MapError::SpecMismatch);
        }
        self.apply_enveloping(x.data())
    }

    /// Cellwise amplification `Phi (x) id_n` on a matrix point.
    pub fn apply_amplified(&self, z: &MatPoint) -> Result<MatPoint, MapError> {
        if z.spec() != &self.dom {
            return Err(MapError::SpecMismatch);
        }
        let n = z.level();
        let p = self.dom.total_dim();
        let q = self.cod.total_dim();
        let mut flat = CMatrix::zeros(n * q, n * q);
        for i in 0..n {
            for j in 0..n {
                let cell = z.flat().view((i * p, j * p), (p, p)).into_owned();
                let out = &self.matrix * vec_mat(&cell);
                flat.view_mut((i * q, j * q), (q, q))
                    .copy_from(&unvec_mat(&out, q));
            }
        }
        Ok(MatPoint::from_flat_tol(self.cod.clone(), n, flat, tol::BLOCK)?)
    }

    /// Choi matrix `sum_{ij} e_ij (x) Phi(e_ij)` over the enveloping
    /// domain, with its Hermiticity defect and minimum eigenvalue.
    pub fn choi(&self) -> ChoiMatrix {
        let p = self.dom.total_dim();
        let q = self.cod.total_dim();
        let data = CMatrix::from_fn(p * q, p * q, |r, s| {
            let (i, a) = (r / q, r % q);
            let (j, b) = (s / q, s % q);
            self.matrix[(b * q + a, j * p + i)]
        });
        let hermiticity_defect = operator_norm(&(&data - data.adjoint()));
        let min_eigenvalue = min_hermitian_eigenvalue(&hermitian_part(&data));
        ChoiMatrix {
            data,
            min_eigenvalue,
            hermiticity_defect,
        }
    }

    /// Complete positivity, decided on the Choi matrix: Hermitian up to
    /// the standard band and minimum eigenvalue at least `-tol`.
    pub fn is_completely_positive(&self, tol: f64) -> bool {
        let choi = self.choi();
        let scale = 1.0 + operator_norm(&choi.data);
        choi.hermiticity_defect <= tol::HERMITIAN * scale && choi.min_eigenvalue >= -tol
    }

    pub fn is_unital(&self, tol: f64) -> bool {
        let p = self.dom.total_dim();
        match self.apply_enveloping(&CMatrix::identity(p, p)) {
            Ok(img) => (&img - &AlgElement::identity(self.cod.clone())).norm() <= tol,
            Err(_) => false,
        }
    }

    /// `max || Phi(u*) - Phi(u)* ||` over matrix units; zero for maps that
    /// respect adjoints.
    pub fn adjoint_defect(&self) -> f64 {
        let p = self.dom.total_dim();
        let q = self.cod.total_dim();
        let mut worst: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                let img_ij = unvec_mat(&self.matrix.column(j * p + i).into_owned(), q);
                let img_ji = unvec_mat(&self.matrix.column(i * p + j).into_owned(), q);
                worst = worst.max(operator_norm(&(img_ji - img_ij.adjoint())));
            }
        }
        worst
    }

    /// Runs the positivity and unitality checks and records the outcome.
    pub fn certify(&mut self, tol: f64) -> &MapFlags {
        self.flags.unital = self.is_unital(tol.max(tol::IDENTITY));
        self.flags.cp_verified = self.is_completely_positive(tol);
        &self.flags
    }

    /// Largest multiplicativity and adjoint residual of the map on an
    /// orthonormal basis of the word span of `generators` (word length at
    /// most `depth`, adjoints included as letters).
    pub fn homomorphy_defect_on(
        &self,
        generators: &[AlgElement],
        depth: usize,
    ) -> Result<f64, MapError> {
        if generators.is_empty() {
            return Err(MapError::EmptyGenerators);
        }
        for g in generators {
            if g.spec() != &self.dom {
                return Err(MapError::SpecMismatch);
            }
        }
        let basis = word_span_basis(&self.dom, generators, depth);
        let mut worst: f64 = 0.0;
        let images: Vec<CMatrix> = basis
            .iter()
            .map(|b| self.apply_enveloping(b).map(|e| e.into_data()))
            .collect::<Result<_, _>>()?;
        for (bi, img_i) in basis.iter().zip(&images) {
            let adj = self.apply_enveloping(&bi.adjoint())?.into_data();
            worst = worst.max(operator_norm(&(adj - img_i.adjoint())));
            for (bj, img_j) in basis.iter().zip(&images) {
                let prod = self.apply_enveloping(&(bi * bj))?.into_data();
                let defect = operator_norm(&(prod - img_i * img_j));
                worst = worst.max(defect);
            }
        }
        Ok(worst)
    }

    /// Multiplicativity of the map on the unital *-algebra spanned by
    /// words of length at most `depth` in the generators.
    pub fn is_homomorphic_on(
        &self,
        generators: &[AlgElement],
        depth: usize,
        tol: f64,
    ) -> Result<bool, MapError> {
        Ok(self.homomorphy_defect_on(generators, depth)? <= tol)
    }

    /// Runs the multiplicativity check and on success records the
    /// generating family.
    pub fn certify_homomorphic_on(
        &mut self,
        generators: &[AlgElement],
        depth: usize,
        tol: f64,
    ) -> Result<bool, MapError> {
        let ok = self.is_homomorphic_on(generators, depth, tol)?;
        self.flags.homomorphic_on = if ok { Some(generators.to_vec()) } else { None };
        Ok(ok)
    }

    /// Kraus decomposition `Phi(x) = sum_k K_k x K_k*` from the spectral
    /// decomposition of the Choi matrix.  Diagnostic: fails unless the map
    /// is completely positive up to `tol`.
    pub fn kraus(&self, tol: f64) -> Result<Vec<CMatrix>, MapError> {
        let choi = self.choi();
        if choi.min_eigenvalue < -tol {
            return Err(MapError::NotCompletelyPositive {
                min_eigenvalue: choi.min_eigenvalue,
            });
        }
        let p = self.dom.total_dim();
        let q = self.cod.total_dim();
        let (vals, vecs) = hermitian_eigen(&hermitian_part(&choi.data));
        let lmax = vals.last().copied().unwrap_or(0.0).max(0.0);
        let mut out = Vec::new();
        for (k, &lam) in vals.iter().enumerate() {
            if lam > 1e-12 * lmax.max(1.0) {
                let w = vecs.column(k);
                let root = cr(lam.sqrt());
                let kmat = CMatrix::from_fn(q, p, |a, i| w[i * q + a] * root);
                out.push(kmat);
            }
        }
        Ok(out)
    }
}

/// Choi matrix of a map together with the two numbers positivity checks
/// are decided on.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    pub data: CMatrix,
    pub min_eigenvalue: f64,
    pub hermiticity_defect: f64,
}

fn same_block(spec: &AlgebraSpec, i: usize, j: usize) -> bool {
    spec.block_of(i) == spec.block_of(j)
}

fn fro_inner(a: &CMatrix, b: &CMatrix) -> C64 {
    let mut acc = ZERO;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc
}

fn fro_norm(a: &CMatrix) -> f64 {
    fro_inner(a, a).re.max(0.0).sqrt()
}

/// Orthonormal (Frobenius) basis of the span of words of length at most
/// `depth` in the generators and their adjoints, together with the
/// identity.  Modified Gram-Schmidt with a relative rank cutoff; the
/// result has at most `total_dim^2` members.
pub fn word_span_basis(
    spec: &AlgebraSpec,
    generators: &[AlgElement],
    depth: usize,
) -> Vec<CMatrix> {
    let d = spec.total_dim();
    let mut letters: Vec<CMatrix> = Vec::new();
    for g in generators {
        letters.push(g.data().clone());
        letters.push(g.data().adjoint());
    }
    let mut basis: Vec<CMatrix> = Vec::new();
    let add = |basis: &mut Vec<CMatrix>, cand: &CMatrix| -> bool {
        let mut v = cand.clone();
        let scale = fro_norm(&v);
        if scale == 0.0 {
            return false;
        }
        for _ in 0..2 {
            for b in basis.iter() {
                let coeff = fro_inner(b, &v);
                v -= b.map(|x| x * coeff);
            }
        }
        let rem = fro_norm(&v);
        if rem > 1e-10 * scale.max(1.0) {
            basis.push(v.map(|x| x * cr(1.0 / rem)));
            true
        } else {
            false
        }
    };
    add(&mut basis, &CMatrix::identity(d, d));
    let mut layer: Vec<CMatrix> = vec![CMatrix::identity(d, d)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for w in &layer {
            for l in &letters {
                let cand = w * l;
                if add(&mut basis, &cand) {
                    next.push(cand);
                }
                if basis.len() == d * d {
                    return basis;
                }
            }
        }
        if next.is_empty() {
            break;
        }
        layer = next;
    }
    basis
}

/// `max_b || E(psi(b)) - b ||` over matrix units of the common block
/// algebra: how far the pair is from a dilation `E . psi = id`.
pub fn dilation_defect(e: &LinMap, psi: &LinMap) -> Result<f64, MapError> {
    if e.dom() != psi.cod() || e.cod() != psi.dom() {
        return Err(MapError::SpecMismatch);
    }
    let b_spec = psi.dom().clone();
    let r = b_spec.total_dim();
    let mut worst: f64 = 0.0;
    for i in 0..r {
        for j in 0..r {
            if !same_block(&b_spec, i, j) {
                continue;
            }
            let mut unit = CMatrix::zeros(r, r);
            unit[(i, j)] = crate::linalg::ONE;
            let through = e.apply(&psi.apply_enveloping(&unit)?)?;
            worst = worst.max(operator_norm(&(through.into_data() - unit)));
        }
    }
    Ok(worst)
}

pub fn is_dilation_pair(e: &LinMap, psi: &LinMap, tol: f64) -> Result<bool, MapError> {
    Ok(dilation_defect(e, psi)? <= tol)
}

/// One counterexample to a module or projection identity.
#[derive(Debug, Clone)]
pub struct TomiyamaWitness {
    pub kind: &'static str,
    pub left: CMatrix,
    pub middle: CMatrix,
    pub right: CMatrix,
    pub residual: f64,
}

/// Outcome of the randomized conditional-expectation test.
#[derive(Debug, Clone)]
pub struct TomiyamaReport {
    pub samples: usize,
    pub projection_samples: usize,
    pub max_module_residual: f64,
    pub max_projection_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Option<TomiyamaWitness>,
}

/// Tests the module property of `e` over the algebra generated by
/// `generators`: for random words `w1, w2` and random `m`,
///
/// ```text
/// E(w1 m w2) = E(w1) E(m) E(w2)
/// ```
///
/// and, for spectral projections `p` of random Hermitian words and random
/// PSD `x`,
///
/// ```text
/// E(p x p) = E(p) E(p x p) E(p).
/// ```
///
/// Residuals are compared against `tol * (1 + product of norms)`.
pub fn tomiyama_check(
    e: &LinMap,
    generators: &[AlgElement],
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<TomiyamaReport, MapError> {
    if generators.is_empty() {
        return Err(MapError::EmptyGenerators);
    }
    for g in generators {
        if g.spec() != e.dom() {
            return Err(MapError::SpecMismatch);
        }
    }
    let d = e.dom().total_dim();
    let mut rng = trial_rng(seed, 0x70a1);
    let mut max_module: f64 = 0.0;
    let mut max_proj: f64 = 0.0;
    let mut witness: Option<TomiyamaWitness> = None;

    let random_word = |rng: &mut rand_chacha::ChaCha8Rng| -> CMatrix {
        let len = rng.random_range(1..=3);
        let mut w = CMatrix::identity(d, d);
        for _ in 0..len {
            let g = generators[rng.random_range(0..generators.len())].data();
            w = if rng.random_bool(0.25) {
                w * g.adjoint()
            } else {
                w * g
            };
        }
        w
    };

    for _ in 0..samples {
        let w1 = random_word(&mut rng);
        let w2 = random_word(&mut rng);
        let m = ginibre(&mut rng, d, d);
        let lhs = e.apply_enveloping(&(&w1 * &m * &w2))?.into_data();
        let rhs = e.apply_enveloping(&w1)?.into_data()
            * e.apply_enveloping(&m)?.into_data()
            * e.apply_enveloping(&w2)?.into_data();
        let scale = 1.0 + operator_norm(&w1) * operator_norm(&m) * operator_norm(&w2);
        let res = operator_norm(&(lhs - rhs)) / scale;
        if res > max_module {
            max_module = res;
            if res > tol {
                witness = Some(TomiyamaWitness {
                    kind: "module",
                    left: w1.clone(),
                    middle: m.clone(),
                    right: w2.clone(),
                    residual: res,
                });
            }
        }
    }

    let projection_samples = samples / 10 + 1;
    let mut done = 0;
    'outer: for _ in 0..projection_samples {
        // a Hermitian element of the generated algebra with well separated
        // spectral clusters; resample on near-degeneracy so the projection
        // is computed accurately
        let mut attempt = 0;
        let p = loop {
            attempt += 1;
            if attempt > 20 {
                continue 'outer;
            }
            let w = random_word(&mut rng);
            let h = hermitian_part(&w);
            let (vals, vecs) = hermitian_eigen(&h);
            let spread = (vals[d - 1] - vals[0]).max(1e-6);
            let mut clusters: Vec<Vec<usize>> = vec![vec![0]];
            for k in 1..d {
                if vals[k] - vals[k - 1] <= 1e-2 * spread {
                    clusters.last_mut().unwrap().push(k);
                } else {
                    clusters.push(vec![k]);
                }
            }
            if clusters.len() < 2 {
                continue;
            }
            let gap_ok = (1..d).all(|k| {
                let g = vals[k] - vals[k - 1];
                g <= 1e-2 * spread || g >= 5e-2 * spread
            });
            if !gap_ok {
                continue;
            }
            let mut order: Vec<usize> = (0..clusters.len()).collect();
            order.shuffle(&mut rng);
            let take = rng.random_range(1..clusters.len());
            let mut proj = CMatrix::zeros(d, d);
            for &ci in order.iter().take(take) {
                for &k in &clusters[ci] {
                    let v = vecs.column(k);
                    proj += &v * v.adjoint();
                }
            }
            break hermitian_part(&proj);
        };
        let g = ginibre(&mut rng, d, d);
        let x = &g * g.adjoint();
        let pxp = &p * &x * &p;
        let e_pxp = e.apply_enveloping(&pxp)?.into_data();
        let e_p = e.apply_enveloping(&p)?.into_data();
        let rhs = &e_p * &e_pxp * &e_p;
        let scale = 1.0 + operator_norm(&x);
        let res = operator_norm(&(&e_pxp - &rhs)) / scale;
        if res > max_proj {
            max_proj = res;
            if res > tol {
                witness = Some(TomiyamaWitness {
                    kind: "projection",
                    left: p.clone(),
                    middle: x.clone(),
                    right: p.clone(),
                    residual: res,
                });
            }
        }
        done += 1;
    }

    let pass = max_module <= tol && max_proj <= tol;
    Ok(TomiyamaReport {
        samples,
        projection_samples: done,
        max_module_residual: max_module,
        max_projection_residual: max_proj,
        tolerance: tol,
        pass,
        witness: if pass { None } else { witness },
    })
}
