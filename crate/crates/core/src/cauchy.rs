//! Cauchy-transform models and their diagnostics.
//!
//! A model is a tuple `(B, M, A, E, psi)`: block-diagonal algebras `B` and
//! `M`, a unital embedding `psi : B -> M`, a unital map `E : M -> B` with
//! `E(psi(b)) = b`, and a Hermitian `A` in `M`.  Its Cauchy transform at a
//! level-`n` point `Z` over `B` is
//!
//! ```text
//! f(Z) = (E (x) id_n)[ (A (x) I_n - (psi (x) id_n)(Z))^{-1} ]
//! ```
//!
//! When `E` is completely positive, unital, and multiplicative on the
//! subalgebra generated by `psi(B)`, `f` is a free Pick function with
//! `f(sZ) -> -(sZ)^{-1}` decay and exact moment recovery; the
//! [`counterexample_model`] shows what survives (and what fails) when
//! multiplicativity holds but the function escapes every fixed rational
//! degree, and the [`nonhomomorphic_fixture`] shows the decay and moment
//! identities breaking outright when multiplicativity fails.
//!
//! Constructors enforce only structure (shapes, Hermitian `A`, the
//! dilation identity); positivity and multiplicativity are *certified*
//! into [`ModelCertificate`], never assumed, so dishonest inputs are
//! representable and honestly reported.

use crate::algebra::{
    amplify, classify_region, sample_hermitian_element, AlgebraError, AlgebraSpec, AlgElement,
    MatPoint,
};
use crate::cpmaps::{dilation_defect, LinMap, MapError};
use crate::linalg::{
    c, cr, least_squares, mat_pow, trial_rng, CMatrix, CVector, C64, IM, ONE, ZERO,
};
use crate::tol;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CauchyError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("maps do not close up into a model: need E : M -> B and psi : B -> M")]
    SpecIncoherent,
    #[error("dilation identity fails: max ||E(psi(b)) - b|| = {defect:.3e}")]
    DilationFailed { defect: f64 },
    #[error("point is not in the open upper half plane: min Im eigenvalue {min_im:.3e}")]
    PointNotInUpperHalfPlane { min_im: f64 },
    #[error("resolvent is singular at this point: sigma_min {sigma_min:.3e}")]
    SingularResolvent { sigma_min: f64 },
    #[error("atom weights must sum to 1: got {sum}")]
    WeightNormalization { sum: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Outcome of the positivity and multiplicativity checks run on a model at
/// construction time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCertificate {
    pub e_completely_positive: bool,
    pub e_unital: bool,
    pub psi_completely_positive: bool,
    pub psi_unital: bool,
    pub dilation_defect: f64,
    pub homomorphy_defect: f64,
    /// `E` multiplicative (and adjoint-compatible) on the unital *-algebra
    /// generated by `psi(B)`.
    pub homomorphic: bool,
}

impl ModelCertificate {
    /// Everything needed for the transform to be an honest Cauchy
    /// transform of a homomorphic conditional expectation.
    pub fn fully_certified(&self) -> bool {
        self.e_completely_positive
            && self.e_unital
            && self.psi_completely_positive
            && self.psi_unital
            && self.homomorphic
    }
}

/// `(B, M, A, E, psi)` with its certificate.
#[derive(Debug, Clone)]
pub struct CauchyModel {
    b: AlgebraSpec,
    m: AlgebraSpec,
    a: AlgElement,
    e: LinMap,
    psi: LinMap,
    cert: ModelCertificate,
}

impl CauchyModel {
    /// Builds and certifies a model.  Structural requirements are hard
    /// errors: the specs must close up, `A` must be Hermitian up to the
    /// standard band (then it is symmetrized), and `E . psi = id` must
    /// hold to [`tol::DILATION`].  Positivity and multiplicativity are
    /// *recorded*, not required.
    pub fn new(a: AlgElement, e: LinMap, psi: LinMap) -> Result<Self, CauchyError> {
        let model = Self::assemble(a, e, psi, true)?;
        Ok(model)
    }

    /// Like [`CauchyModel::new`] but keeps structurally degenerate input
    /// alive for negative testing: the dilation identity is measured and
    /// recorded instead of enforced, and `A` is kept as given.
    pub fn new_unchecked(a: AlgElement, e: LinMap, psi: LinMap) -> Result<Self, CauchyError> {
        Self::assemble(a, e, psi, false)
    }

    fn assemble(
        a: AlgElement,
        mut e: LinMap,
        mut psi: LinMap,
        strict: bool,
    ) -> Result<Self, CauchyError> {
        if e.dom() != psi.cod() || e.cod() != psi.dom() {
            return Err(CauchyError::SpecIncoherent);
        }
        let m = e.dom().clone();
        let b = e.cod().clone();
        if a.spec() != &m {
            return Err(CauchyError::SpecIncoherent);
        }
        let a = if strict {
            a.hermitianize(tol::HERMITIAN)?
        } else {
            a
        };
        let dil = dilation_defect(&e, &psi)?;
        if strict && dil > tol::DILATION {
            return Err(CauchyError::DilationFailed { defect: dil });
        }
        e.certify(tol::PSD);
        psi.certify(tol::PSD);
        let gens = bhat_generators(&psi)?;
        let homomorphy_defect = e.homomorphy_defect_on(&gens, 4)?;
        let homomorphic = homomorphy_defect <= tol::HOMOMORPHY;
        if homomorphic {
            e.flags.homomorphic_on = Some(gens);
        }
        let cert = ModelCertificate {
            e_completely_positive: e.flags.cp_verified,
            e_unital: e.flags.unital,
            psi_completely_positive: psi.flags.cp_verified,
            psi_unital: psi.flags.unital,
            dilation_defect: dil,
            homomorphy_defect,
            homomorphic,
        };
        Ok(CauchyModel {
            b,
            m,
            a,
            e,
            psi,
            cert,
        })
    }

    pub fn b(&self) -> &AlgebraSpec {
        &self.b
    }

    pub fn m(&self) -> &AlgebraSpec {
        &self.m
    }

    pub fn a(&self) -> &AlgElement {
        &self.a
    }

    pub fn e(&self) -> &LinMap {
        &self.e
    }

    pub fn psi(&self) -> &LinMap {
        &self.psi
    }

    pub fn certificate(&self) -> &ModelCertificate {
        &self.cert
    }

    pub fn homomorphic_certified(&self) -> bool {
        self.cert.fully_certified()
    }

    /// Images under `psi` of the matrix units of `B`: generators of the
    /// subalgebra the multiplicativity certificate speaks about.
    pub fn bhat_generators(&self) -> Result<Vec<AlgElement>, CauchyError> {
        Ok(bhat_generators(&self.psi)?)
    }

    /// The Cauchy transform at a point of the open upper half plane over
    /// `B` (any level).
    pub fn eval(&self, z: &MatPoint) -> Result<MatPoint, CauchyError> {
        if z.spec() != &self.b {
            return Err(CauchyError::Algebra(AlgebraError::SpecMismatch));
        }
        let region = classify_region(z, tol::PSD);
        if !region.in_open_upper_half_plane {
            return Err(CauchyError::PointNotInUpperHalfPlane {
                min_im: region.min_im_eigenvalue,
            });
        }
        self.eval_unchecked(z)
    }

    /// Evaluation without the half-plane precondition; the resolvent guard
    /// is still in force.  Used for analytic continuation along circles in
    /// the witness extraction, where the transform stays well defined
    /// without the argument staying in the half plane.
    pub(crate) fn eval_unchecked(&self, z: &MatPoint) -> Result<MatPoint, CauchyError> {
        let n = z.level();
        let psi_z = self.psi.apply_amplified(z)?;
        let pencil = &amplify(&self.a, n) - &psi_z;
        let resolvent = pencil.try_inverse().map_err(|err| match err {
            AlgebraError::Singular { sigma_min, .. } => {
                CauchyError::SingularResolvent { sigma_min }
            }
            other => CauchyError::Algebra(other),
        })?;
        Ok(self.e.apply_amplified(&resolvent)?)
    }

    /// Measures the decay `f(sZ) ~ -(sZ)^{-1}` along a geometric grid
    /// `s in [s_min, s_max]`: records `r(s) = ||s f(sZ) + Z^{-1}||`, fits
    /// a log-log slope, and issues a verdict.  Slope near `-1` (or better)
    /// together with a decade of decay, or residuals at the numerical
    /// floor, count as Cauchy-like; a plateau does not.
    pub fn asymptotic_residual(
        &self,
        z: &MatPoint,
        s_min: f64,
        s_max: f64,
        points: usize,
    ) -> Result<AsymptoticReport, CauchyError> {
        if !(s_min > 0.0 && s_max > s_min) {
            return Err(CauchyError::BadParameter(
                "need 0 < s_min < s_max".to_string(),
            ));
        }
        if points < 2 {
            return Err(CauchyError::BadParameter(
                "need at least two grid points".to_string(),
            ));
        }
        let z_inv = z.try_inverse()?;
        let scale = 1.0 + z_inv.norm();
        let ratio = s_max / s_min;
        let mut s_values = Vec::with_capacity(points);
        let mut residuals = Vec::with_capacity(points);
        for k in 0..points {
            let t = k as f64 / (points - 1) as f64;
            let s = s_min * ratio.powf(t);
            let f = self.eval(&z.scale(cr(s)))?;
            let r = (&f.scale(cr(s)) + &z_inv).norm();
            s_values.push(s);
            residuals.push(r);
        }
        let floored = *residuals.last().unwrap() <= 1e-13 * scale;
        let slope = log_log_slope(&s_values, &residuals);
        let first = residuals[0];
        let last = *residuals.last().unwrap();
        let decade_decay = last > 0.0 && first / last >= 10.0;
        let verdict = if floored || (slope <= -0.7 && decade_decay) {
            Verdict::CauchyLike
        } else {
            Verdict::Fails
        };
        Ok(AsymptoticReport {
            s_values,
            residuals,
            slope,
            floored,
            verdict,
        })
    }

    /// Moment recovery: for level-`n` points `H_1, ..., H_k` over `B`, the
    /// top-right `n x n` grid corner of `(E (x) id)[((psi (x) id) H)^k]`,
    /// where `H` is the level-`n(k+1)` point with `H_1, ..., H_k` on the
    /// block superdiagonal, equals `E(psi(H_1) ... psi(H_k))`.  For
    /// multiplicative `E` this is exactly `H_1 ... H_k`; the result carries
    /// both sides and their distance.
    pub fn moment(&self, hs: &[MatPoint]) -> Result<MomentResult, CauchyError> {
        if hs.is_empty() {
            return Err(CauchyError::BadParameter(
                "need at least one moment factor".to_string(),
            ));
        }
        let k = hs.len();
        if k > 16 {
            return Err(CauchyError::BadParameter(
                "moment order capped at 16".to_string(),
            ));
        }
        let n = hs[0].level();
        for h in hs {
            if h.spec() != &self.b {
                return Err(CauchyError::Algebra(AlgebraError::SpecMismatch));
            }
            if h.level() != n {
                return Err(CauchyError::BadParameter(
                    "moment factors must share one level".to_string(),
                ));
            }
        }
        let d = self.b.total_dim();
        let nd = n * d;
        let big_level = n * (k + 1);
        let mut big = CMatrix::zeros(big_level * d, big_level * d);
        for (i, h) in hs.iter().enumerate() {
            big.view_mut((i * nd, (i + 1) * nd), (nd, nd))
                .copy_from(h.flat());
        }
        let big = MatPoint::from_flat_unchecked(self.b.clone(), big_level, big);
        let psi_big = self.psi.apply_amplified(&big)?;
        let dm = self.m.total_dim();
        let powered = MatPoint::from_flat_unchecked(
            self.m.clone(),
            big_level,
            mat_pow(psi_big.flat(), k),
        );
        debug_assert_eq!(powered.flat().nrows(), big_level * dm);
        let projected = self.e.apply_amplified(&powered)?;
        let entry = MatPoint::from_flat_unchecked(
            self.b.clone(),
            n,
            projected
                .flat()
                .view((0, k * nd), (nd, nd))
                .into_owned(),
        );
        let mut reference = hs[0].clone();
        for h in &hs[1..] {
            reference = &reference * h;
        }
        let residual = (&entry - &reference).norm();
        Ok(MomentResult {
            entry,
            reference,
            residual,
        })
    }
}

/// Verdict of the asymptotic decay test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CauchyLike,
    Fails,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::CauchyLike => write!(f, "cauchy_like"),
            Verdict::Fails => write!(f, "fails"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    pub s_values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Ordinary least squares slope of `ln r` against `ln s`.
    pub slope: f64,
    /// Residuals reached the numerical floor; the slope is then noise.
    pub floored: bool,
    pub verdict: Verdict,
}

fn log_log_slope(s: &[f64], r: &[f64]) -> f64 {
    let xs: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = r.iter().map(|v| v.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

#[derive(Debug, Clone)]
pub struct MomentResult {
    /// Top-right grid corner of the amplified, projected `k`-th power.
    pub entry: MatPoint,
    /// The plain product `H_1 ... H_k`.
    pub reference: MatPoint,
    pub residual: f64,
}

fn bhat_generators(psi: &LinMap) -> Result<Vec<AlgElement>, MapError> {
    let b = psi.dom();
    let r = b.total_dim();
    let mut gens = Vec::new();
    for i in 0..r {
        for j in 0..r {
            if b.block_of(i) != b.block_of(j) {
                continue;
            }
            let mut unit = CMatrix::zeros(r, r);
            unit[(i, j)] = ONE;
            gens.push(psi.apply_enveloping(&unit)?);
        }
    }
    Ok(gens)
}

/// Scalar atomic measure model: `B = C`, `M = C^k` diagonal,
/// `A = diag(atoms)`, `psi(z) = z I`, `E(m) = sum_i weights[i] m_ii`.
/// Its transform is `f(z) = sum_i weights[i] / (atoms[i] - z)`.
/// Weights must be strictly positive and sum to 1.
pub fn classical_model(atoms: &[f64], weights: &[f64]) -> Result<CauchyModel, CauchyError> {
    if atoms.is_empty() || atoms.len() != weights.len() {
        return Err(CauchyError::BadParameter(
            "need equally many atoms and weights, at least one".to_string(),
        ));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(CauchyError::BadParameter(
            "weights must be strictly positive".to_string(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(CauchyError::WeightNormalization { sum });
    }
    let k = atoms.len();
    let b = AlgebraSpec::scalar();
    let m = AlgebraSpec::diagonal(k);
    let a = AlgElement::from_blocks(
        m.clone(),
        &atoms
            .iter()
            .map(|&t| CMatrix::from_element(1, 1, cr(t)))
            .collect::<Vec<_>>(),
    )?;
    let psi = LinMap::from_action(b.clone(), m.clone(), |z| {
        CMatrix::identity(k, k).map(|x| x * z[(0, 0)])
    })?;
    let weights_owned = weights.to_vec();
    let e = LinMap::from_action(m, b, move |mm| {
        let mut acc = ZERO;
        for (i, &w) in weights_owned.iter().enumerate() {
            acc += mm[(i, i)] * cr(w);
        }
        CMatrix::from_element(1, 1, acc)
    })?;
    CauchyModel::new(a, e, psi)
}

/// The two-variable counterexample: `B = C^2`, `M = M_3`,
///
/// ```text
/// psi(z1, z2) = diag(z1, z2, (z1 + z2)/2),    E(m) = (m_11, m_22),
/// A = e_23 + e_32.
/// ```
///
/// `E` is completely positive, unital, and multiplicative on the algebra
/// generated by `psi(B)` (the diagonal of `M_3`), so the transform is an
/// honest free Pick function; but its second component
/// `f_2 = (2 (Z1 + Z2)^{-1} - Z2)^{-1}` is not expressible with any fixed
/// number of matrix inversions bounded independently of the expansion
/// order, which is what the [`nonpolynomial_witness`] quantifies.
pub fn counterexample_model() -> CauchyModel {
    let b = AlgebraSpec::diagonal(2);
    let m = AlgebraSpec::full(3);
    let mut a_mat = CMatrix::zeros(3, 3);
    a_mat[(1, 2)] = ONE;
    a_mat[(2, 1)] = ONE;
    let a = AlgElement::new(m.clone(), a_mat).expect("A is supported on M_3");
    let psi = LinMap::from_action(b.clone(), m.clone(), |z| {
        let avg = (z[(0, 0)] + z[(1, 1)]) * cr(0.5);
        let mut out = CMatrix::zeros(3, 3);
        out[(0, 0)] = z[(0, 0)];
        out[(1, 1)] = z[(1, 1)];
        out[(2, 2)] = avg;
        out
    })
    .expect("psi lands in M_3");
    let e = LinMap::from_action(m, b, |mm| {
        let mut out = CMatrix::zeros(2, 2);
        out[(0, 0)] = mm[(0, 0)];
        out[(1, 1)] = mm[(1, 1)];
        out
    })
    .expect("E lands in the diagonal pair");
    CauchyModel::new(a, e, psi).expect("counterexample model is structurally sound")
}

/// Closed form of the counterexample transform at a scalar pair in the
/// upper half plane:
///
/// ```text
/// f_1 = -1/z1,    f_2 = -s / (s z2 - 1),    s = (z1 + z2)/2.
/// ```
pub fn counterexample_closed_form(z1: C64, z2: C64) -> Result<(C64, C64), CauchyError> {
    let s = (z1 + z2) * cr(0.5);
    let denom = s * z2 - ONE;
    if z1.norm() < 1e-14 || denom.norm() < 1e-14 {
        return Err(CauchyError::SingularResolvent {
            sigma_min: z1.norm().min(denom.norm()),
        });
    }
    Ok((-ONE / z1, -s / denom))
}

/// The counterexample transform as expressions in the noncommutative
/// rational language of [`crate::ncrat`]: one per component of `B = C^2`,
/// valid at matrix points (`Z1`, `Z2` the two diagonal components).
pub const COUNTEREXAMPLE_EXPR: [&str; 2] = ["-inv(Z1)", "inv(2*inv(Z1+Z2) - Z2)"];

/// Expanded form of the second component; equal to
/// `COUNTEREXAMPLE_EXPR[1]` as a matrix function, exercising a different
/// inversion arrangement.
pub const COUNTEREXAMPLE_EXPR_EXPANDED: &str = "-inv(Z2)*inv(1 - 2*inv(Z1+Z2)*inv(Z2))";

/// A dilation tuple that is *not* a conditional expectation: `B = C^2`,
/// `M = C^3`, the same `psi` as the counterexample, and
///
/// ```text
/// E(m1, m2, m3) = (m1 + delta, m2 - delta),   delta = m3 - (m1 + m2)/2.
/// ```
///
/// `E . psi = id` still holds exactly and `E` is unital, but `E` is not
/// positive (so in particular not completely positive) and not
/// multiplicative on the algebra generated by `psi(B)`.  The `-Z^{-1}`
/// decay and the moment identities both fail on this fixture, which pins
/// down multiplicativity as the property the theory actually runs on.
pub fn nonhomomorphic_fixture() -> CauchyModel {
    let b = AlgebraSpec::diagonal(2);
    let m = AlgebraSpec::diagonal(3);
    let a = AlgElement::from_blocks(
        m.clone(),
        &[
            CMatrix::from_element(1, 1, cr(0.5)),
            CMatrix::from_element(1, 1, cr(-0.5)),
            CMatrix::from_element(1, 1, cr(0.25)),
        ],
    )
    .expect("A is diagonal");
    let psi = LinMap::from_action(b.clone(), m.clone(), |z| {
        let avg = (z[(0, 0)] + z[(1, 1)]) * cr(0.5);
        let mut out = CMatrix::zeros(3, 3);
        out[(0, 0)] = z[(0, 0)];
        out[(1, 1)] = z[(1, 1)];
        out[(2, 2)] = avg;
        out
    })
    .expect("psi lands in the diagonal triple");
    let e = LinMap::from_action(m, b, |mm| {
        let delta = mm[(2, 2)] - (mm[(0, 0)] + mm[(1, 1)]) * cr(0.5);
        let mut out = CMatrix::zeros(2, 2);
        out[(0, 0)] = mm[(0, 0)] + delta;
        out[(1, 1)] = mm[(1, 1)] - delta;
        out
    })
    .expect("E lands in the diagonal pair");
    CauchyModel::new(a, e, psi).expect("fixture is structurally sound")
}

/// Random certified model: `M = B + C` with `psi(b) = b + phi(b)for
/// isometric compressions `phi`, and `E` the projection onto the `B`
/// summand.  `E` is multiplicative on the algebra generated by `psi(B)`
/// by construction, and `A` carries a definite `B`-summand so the
/// `-Z^{-1}` correction term is visibly of order `1/s`.
pub fn sample_homomorphic_model(seed: u64) -> CauchyModel {
    let mut rng = trial_rng(seed, 0x40de1);
    let b_choices: [&[usize]; 5] = [&[1], &[2], &[1, 1], &[2, 1], &[3]];
    let b_blocks = b_choices[rng.random_range(0..b_choices.len())].to_vec();
    let b = AlgebraSpec::new(b_blocks).expect("nonempty block list");
    let db = b.total_dim();
    let extra = rng.random_range(1..=2usize);
    let mut m_blocks = b.blocks().to_vec();
    let mut isometries = Vec::new();
    for _ in 0..extra {
        let cg = rng.random_range(1..=db);
        m_blocks.push(cg);
        isometries.push(crate::linalg::random_isometry(&mut rng, db, cg));
    }
    let m = AlgebraSpec::new(m_blocks).expect("nonempty block list");
    let dm = m.total_dim();
    let iso = isometries.clone();
    let psi = LinMap::from_action(b.clone(), m.clone(), move |x| {
        let mut out = CMatrix::zeros(dm, dm);
        out.view_mut((0, 0), (db, db)).copy_from(x);
        let mut offset = db;
        for v in &iso {
            let cg = v.ncols();
            let img = v.adjoint() * x * v;
            out.view_mut((offset, offset), (cg, cg)).copy_from(&img);
            offset += cg;
        }
        out
    })
    .expect("psi lands on the blocks of M");
    let b_for_e = b.clone();
    let e = LinMap::from_action(m.clone(), b.clone(), move |mm| {
        let corner = mm.view((0, 0), (db, db)).into_owned();
        AlgElement::project(b_for_e.clone(), &corner)
            .expect("corner has the enveloping dimension of B")
            .into_data()
    })
    .expect("E lands on the blocks of B");
    let mut a = sample_hermitian_element(&m, &mut rng);
    let mut bump = CMatrix::zeros(dm, dm);
    bump.view_mut((0, 0), (db, db))
        .copy_from(&CMatrix::identity(db, db));
    a = &a + &AlgElement::new(m.clone(), bump).expect("bump is supported on the B corner");
    CauchyModel::new(a, e, psi).expect("sampled model is structurally sound")
}

/// Which component of the counterexample transform a witness talks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    First,
    Second,
}

/// Outcome of the rational-degree witness fit.
#[derive(Debug, Clone)]
pub struct WitnessReport {
    pub component: Component,
    pub degree: usize,
    pub samples: usize,
    /// Norm of the extracted homogeneous part over the sample set; the
    /// fit residual is relative to this.
    pub coefficient_scale: f64,
    /// Relative least-squares distance of the homogeneous part from the
    /// span of inverse monomials `z1^{-a} z2^{-b}`, `a + b = degree`.
    pub fit_residual: f64,
    pub condition_number: f64,
}

/// Extracts the homogeneous degree-`m` part of the counterexample
/// transform at infinity and fits it against inverse monomials.
///
/// `f(t^{-1} z) = sum_{m >= 1} t^m g_m(z)` for small `t`; the coefficient
/// `g_m` is recovered by a discrete circle integral in `t` and compared,
/// in least squares over random scalar sample pairs, with the span of
/// `z1^{-a} z2^{-b}`, `a + b = m`.  For the first component `g_1 = -1/z1`
/// lies in the span (residual at rounding level); for the second
/// component `g_3 = -2 z2^{-2} (z1+z2)^{-1}` does not, and the residual
/// stays bounded away from zero no matter how many samples are taken.
pub fn nonpolynomial_witness(
    component: Component,
    degree: usize,
    samples: usize,
    seed: u64,
) -> Result<WitnessReport, CauchyError> {
    if degree == 0 {
        return Err(CauchyError::BadParameter(
            "witness degree must be at least 1".to_string(),
        ));
    }
    if samples < 4 * degree {
        return Err(CauchyError::BadParameter(format!(
            "need at least {} samples for degree {degree}",
            4 * degree
        )));
    }
    let model = counterexample_model();
    let b = model.b().clone();
    let comp_index = match component {
        Component::First => 0,
        Component::Second => 1,
    };
    let nodes = 48usize;
    let rho = 0.15f64;
    // After the row normalization below, the fit depends only on the ratio
    // w = z1/z2 (each row is a unit phase times a function of w), so the
    // cloud is drawn as a seed-shifted low-discrepancy lattice in log-polar
    // w with z2 pinned at i.  That keeps the residual stable under doubling
    // the sample count; an iid 4d cloud wanders by tens of percent.
    let alphas = [2.0f64.sqrt().fract(), 3.0f64.sqrt().fract()];
    let shift: Vec<f64> = (0..2)
        .map(|i| (crate::linalg::splitmix64(seed.wrapping_add(i)) >> 11) as f64 / (1u64 << 53) as f64)
        .collect();
    let coord = |k: usize, i: usize| (shift[i] + k as f64 * alphas[i]).fract();
    let mut g_values = CVector::zeros(samples);
    let mut monomials = CMatrix::zeros(samples, degree + 1);
    for row in 0..samples {
        // |w| in [1/4, 4], |arg w| <= 2.4: wide spread in the ratio,
        // including near-antipodal pairs, is what separates rational
        // coefficients from monomial ones, while staying clear of the
        // w = -1 pole of the degree-3 coefficient
        let radius = (4.0f64.ln() * (2.0 * coord(row, 0) - 1.0)).exp();
        let angle = 2.4 * (2.0 * coord(row, 1) - 1.0);
        let w = c(angle.cos(), angle.sin()) * cr(radius);
        let z2 = IM;
        let z1 = IM * w;
        let z = MatPoint::from_element(AlgElement::from_blocks(
            b.clone(),
            &[
                CMatrix::from_element(1, 1, z1),
                CMatrix::from_element(1, 1, z2),
            ],
        )?);
        // g_m(z) = (1/N) sum_nu f(t_nu^{-1} z) t_nu^{-m},  t_nu on |t| = rho.
        // Poles of t -> f(t^{-1} z) sit at |t|^2 = |s z2| = |1 + w|/2 >= 0.36
        // on this cloud, so aliasing is ~ (rho/0.6)^nodes, below rounding.
        let mut acc = ZERO;
        for nu in 0..nodes {
            let theta = std::f64::consts::TAU * nu as f64 / nodes as f64;
            let t = c(theta.cos(), theta.sin()) * cr(rho);
            let f = model.eval_unchecked(&z.scale(ONE / t))?;
            let value = f.flat()[(comp_index, comp_index)];
            let t_pow_m = mat_c64_powi(t, degree as i32);
            acc += value / t_pow_m;
        }
        g_values[row] = acc / cr(nodes as f64);
        for a in 0..=degree {
            let bexp = degree - a;
            monomials[(row, a)] =
                ONE / (mat_c64_powi(z1, a as i32) * mat_c64_powi(z2, bexp as i32));
        }
    }
    let scale = g_values.norm();
    // Row weights 1/|g(z)| turn the fit residual into a mean squared
    // relative error; without them a handful of near-antipodal samples
    // carry the whole norm and the residual wanders with the sample count.
    for row in 0..samples {
        let w = cr(1.0 / g_values[row].norm().max(1e-8));
        g_values[row] *= w;
        for col in 0..=degree {
            monomials[(row, col)] *= w;
        }
    }
    let (_, fit_residual, condition_number) = least_squares(&monomials, &g_values);
    Ok(WitnessReport {
        component,
        degree,
        samples,
        coefficient_scale: scale,
        fit_residual,
        condition_number,
    })
}

fn mat_c64_powi(z: C64, k: i32) -> C64 {
    let mut out = ONE;
    for _ in 0..k {
        out *= z;
    }
    out
}

/// Random upper-half-plane scalar pair over the counterexample base
/// algebra, handy for fidelity sweeps.
pub fn sample_scalar_pair<R: Rng>(b: &AlgebraSpec, rng: &mut R) -> (C64, C64, MatPoint) {
    let z1 = c(rng.random_range(-2.0..2.0), rng.random_range(0.2..2.0));
    let z2 = c(rng.random_range(-2.0..2.0), rng.random_range(0.2..2.0));
    let el = AlgElement::from_blocks(
        b.clone(),
        &[
            CMatrix::from_element(1, 1, z1),
            CMatrix::from_element(1, 1, z2),
        ],
    )
    .expect("scalar pair is diagonal");
    (z1, z2, MatPoint::from_element(el))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{imaginary_part, sample_uhp, sample_uhp_rng};
    use crate::linalg::{min_hermitian_eigenvalue, operator_norm, IM};

    fn scalar_pair_point(b: &AlgebraSpec, z1: C64, z2: C64) -> MatPoint {
        MatPoint::from_element(
            AlgElement::from_blocks(
                b.clone(),
                &[
                    CMatrix::from_element(1, 1, z1),
                    CMatrix::from_element(1, 1, z2),
                ],
            )
            .unwrap(),
        )
    }

    #[test]
    fn counterexample_is_certified_homomorphic() {
        let model = counterexample_model();
        let cert = model.certificate();
        assert!(cert.e_completely_positive);
        assert!(cert.e_unital);
        assert!(cert.psi_completely_positive);
        assert!(cert.psi_unital);
        assert!(cert.homomorphic, "defect {}", cert.homomorphy_defect);
        assert!(model.homomorphic_certified());
        assert!(cert.dilation_defect < 1e-14);
    }

    #[test]
    fn counterexample_matches_hand_computed_values() {
        // (i, i)   -> (i, i/2)
        // (i, 2i)  -> (i, 0.375 i)     [2x2 block resolvent by hand]
        // (2i, i)  -> (i/2, 0.6 i)
        let model = counterexample_model();
        let b = model.b().clone();
        let cases = [
            (IM, IM, IM, c(0.0, 0.5)),
            (IM, c(0.0, 2.0), IM, c(0.0, 0.375)),
            (c(0.0, 2.0), IM, c(0.0, 0.5), c(0.0, 0.6)),
        ];
        for (z1, z2, f1, f2) in cases {
            let out = model.eval(&scalar_pair_point(&b, z1, z2)).unwrap();
            assert!((out.flat()[(0, 0)] - f1).norm() < 1e-13);
            assert!((out.flat()[(1, 1)] - f2).norm() < 1e-13);
        }
    }

    #[test]
    fn closed_form_matches_eval_on_random_scalar_pairs() {
        let model = counterexample_model();
        let b = model.b().clone();
        let mut rng = trial_rng(41, 0);
        for _ in 0..50 {
            let (z1, z2, z) = sample_scalar_pair(&b, &mut rng);
            let (f1, f2) = counterexample_closed_form(z1, z2).unwrap();
            let out = model.eval(&z).unwrap();
            assert!((out.flat()[(0, 0)] - f1).norm() < 1e-12);
            assert!((out.flat()[(1, 1)] - f2).norm() < 1e-12);
        }
    }

    #[test]
    fn eval_requires_upper_half_plane() {
        let model = counterexample_model();
        let b = model.b().clone();
        let z = scalar_pair_point(&b, -IM, IM);
        assert!(matches!(
            model.eval(&z),
            Err(CauchyError::PointNotInUpperHalfPlane { .. })
        ));
    }

    #[test]
    fn eval_satisfies_resolvent_identity() {
        // f(Z) - f(W) = (E x id)[ R_Z (psi x id)(Z - W) R_W ]
        let model = counterexample_model();
        let b = model.b().clone();
        let z = sample_uhp(&b, 2, 0.5, 7);
        let w = sample_uhp(&b, 2, 0.5, 8);
        let n = z.level();
        let fz = model.eval(&z).unwrap();
        let fw = model.eval(&w).unwrap();
        let rz = (&amplify(model.a(), n) - &model.psi.apply_amplified(&z).unwrap())
            .try_inverse()
            .unwrap();
        let rw = (&amplify(model.a(), n) - &model.psi.apply_amplified(&w).unwrap())
            .try_inverse()
            .unwrap();
        let mid = model.psi.apply_amplified(&(&z - &w)).unwrap();
        let rhs = model.e.apply_amplified(&(&(&rz * &mid) * &rw)).unwrap();
        assert!((&(&fz - &fw) - &rhs).norm() < 1e-12);
    }

    #[test]
    fn pick_positivity_on_random_points() {
        let model = counterexample_model();
        let b = model.b().clone();
        for lvl in 1..=3 {
            let z = sample_uhp(&b, lvl, 0.3, 100 + lvl as u64);
            let f = model.eval(&z).unwrap();
            let min_eig = min_hermitian_eigenvalue(imaginary_part(&f).flat());
            assert!(min_eig >= -tol::PSD, "level {lvl}: {min_eig}");
        }
    }

    #[test]
    fn moment_identity_holds_for_counterexample() {
        let model = counterexample_model();
        let b = model.b().clone();
        let mut rng = trial_rng(55, 1);
        for k in 1..=5 {
            let hs: Vec<MatPoint> = (0..k)
                .map(|_| sample_uhp_rng(&b, 2, 0.4, &mut rng))
                .collect();
            let res = model.moment(&hs).unwrap();
            assert!(
                res.residual < 1e-10 * (1.0 + res.reference.norm()),
                "k = {k}: residual {}",
                res.residual
            );
        }
    }

    #[test]
    fn fixture_is_honestly_uncertified() {
        let fixture = nonhomomorphic_fixture();
        let cert = fixture.certificate();
        assert!(cert.dilation_defect < 1e-14, "dilation still holds");
        assert!(cert.e_unital);
        assert!(!cert.e_completely_positive, "E is not even positive");
        assert!(!cert.homomorphic);
        assert!(cert.homomorphy_defect > 1e-3);
        assert!(!fixture.homomorphic_certified());
    }

    #[test]
    fn fixture_breaks_moment_identity() {
        let fixture = nonhomomorphic_fixture();
        let b = fixture.b().clone();
        let mut rng = trial_rng(56, 2);
        let mut worst: f64 = 0.0;
        for k in 1..=3 {
            let hs: Vec<MatPoint> = (0..k)
                .map(|_| sample_uhp_rng(&b, 1, 0.4, &mut rng))
                .collect();
            let res = fixture.moment(&hs).unwrap();
            worst = worst.max(res.residual);
        }
        assert!(worst > 1e-3, "moment residuals stay at {worst}");
    }

    #[test]
    fn classical_model_matches_atomic_sum() {
        let model = classical_model(&[-1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(model.homomorphic_certified());
        let z = MatPoint::scalar(AlgebraSpec::scalar(), IM, 1);
        let f = model.eval(&z).unwrap();
        // 0.5/(-1-i) + 0.5/(1-i) = i/2
        assert!((f.flat()[(0, 0)] - c(0.0, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn classical_model_validates_weights() {
        assert!(matches!(
            classical_model(&[0.0], &[0.7]),
            Err(CauchyError::WeightNormalization { .. })
        ));
        assert!(classical_model(&[0.0, 1.0], &[0.5, -0.5]).is_err());
        assert!(classical_model(&[], &[]).is_err());
    }

    #[test]
    fn asymptotics_classical_slope_is_minus_one() {
        // asymmetric atoms so the 1/s correction term has nonzero weight
        let model = classical_model(&[-1.0, 2.0], &[0.5, 0.5]).unwrap();
        let z = MatPoint::scalar(AlgebraSpec::scalar(), c(0.3, 1.1), 1);
        let report = model.asymptotic_residual(&z, 1e2, 1e6, 9).unwrap();
        assert_eq!(report.verdict, Verdict::CauchyLike);
        assert!(
            (report.slope + 1.0).abs() < 0.1,
            "slope {}",
            report.slope
        );
    }

    #[test]
    fn asymptotics_counterexample_decays_quadratically() {
        // E(psi(Z)^{-1} A psi(Z)^{-1}) vanishes for this model, so the
        // first correction term is one order better than generic
        let model = counterexample_model();
        let b = model.b().clone();
        let z = scalar_pair_point(&b, c(0.2, 1.0), c(-0.4, 1.3));
        let report = model.asymptotic_residual(&z, 1e2, 1e6, 9).unwrap();
        assert_eq!(report.verdict, Verdict::CauchyLike);
        assert!(
            (report.slope + 2.0).abs() < 0.2 || report.floored,
            "slope {}",
            report.slope
        );
    }

    #[test]
    fn asymptotics_fixture_plateaus() {
        let fixture = nonhomomorphic_fixture();
        let b = fixture.b().clone();
        let z = scalar_pair_point(&b, c(0.2, 1.0), c(-0.3, 1.2));
        let report = fixture.asymptotic_residual(&z, 1e2, 1e6, 9).unwrap();
        assert_eq!(report.verdict, Verdict::Fails);
        assert!(*report.residuals.last().unwrap() > 1e-3);
    }

    #[test]
    fn sampled_models_are_certified_and_decay() {
        for seed in 0..4 {
            let model = sample_homomorphic_model(seed);
            assert!(model.homomorphic_certified(), "seed {seed}");
            let z = sample_uhp(model.b(), 1, 0.5, seed * 31 + 7);
            let report = model.asymptotic_residual(&z, 1e2, 1e6, 9).unwrap();
            assert_eq!(report.verdict, Verdict::CauchyLike, "seed {seed}");
            assert!(
                report.floored || (-1.3..=-0.7).contains(&report.slope),
                "seed {seed}: slope {}",
                report.slope
            );
        }
    }

    #[test]
    fn witness_control_lies_in_monomial_span() {
        let report = nonpolynomial_witness(Component::First, 1, 40, 3).unwrap();
        assert!(report.coefficient_scale > 1.0);
        assert!(
            report.fit_residual <= 1e-10,
            "control residual {}",
            report.fit_residual
        );
    }

    #[test]
    fn witness_degree_three_escapes_monomial_span() {
        let report = nonpolynomial_witness(Component::Second, 3, 40, 3).unwrap();
        assert!(report.coefficient_scale > 0.1);
        assert!(
            report.fit_residual > 0.1,
            "degree-3 residual {}",
            report.fit_residual
        );
    }

    #[test]
    fn witness_validates_parameters() {
        assert!(nonpolynomial_witness(Component::First, 0, 40, 1).is_err());
        assert!(nonpolynomial_witness(Component::First, 3, 4, 1).is_err());
    }

    #[test]
    fn moment_top_corner_is_read_from_the_right_block() {
        // k = 1: the identity reduces to E(psi(H)) = H, which already
        // pins the corner convention
        let model = counterexample_model();
        let b = model.b().clone();
        let h = sample_uhp(&b, 3, 0.4, 5);
        let res = model.moment(std::slice::from_ref(&h)).unwrap();
        assert!((&res.entry - &h).norm() < 1e-12);
        assert!(operator_norm(&(res.reference.flat() - h.flat())) < 1e-12);
    }
}
