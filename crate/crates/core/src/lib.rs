//! Finite-dimensional models of noncommutative Cauchy transforms and free
//! Pick functions.
//!
//! Everything happens over block-diagonal matrix algebras
//! `B = M_{r_1} + ... + M_{r_m}` (direct sums, embedded as block-diagonal
//! subalgebras of the enveloping matrix algebra).  A *model* is a tuple
//! `(B, M, A, E, psi)` with `psi : B -> M` a unital embedding, `E : M -> B`
//! unital and satisfying `E(psi(b)) = b`, and `A` a Hermitian element of `M`.
//! Its *Cauchy transform* at a matrix point `Z` of level `n` over `B` is
//!
//! ```text
//! f(Z) = (E tensor id_n)[ (A tensor I_n - (psi tensor id_n)(Z))^{-1} ]
//! ```
//!
//! which maps the operator upper half plane over `B` at every level back
//! into (the closure of) itself and respects direct sums and intertwiners,
//! i.e. is a free Pick function.  The crate provides:
//!
//! * [`algebra`]: block-diagonal algebras, their elements, matrix points,
//!   amplification, region classification, and samplers.
//! * [`cpmaps`]: linear maps between such algebras with Choi matrices,
//!   complete positivity, multiplicativity, and conditional-expectation
//!   (Tomiyama) diagnostics.
//! * [`cauchy`]: model evaluation, `-Z^{-1}` asymptotics, moment recovery,
//!   the two-variable counterexample showing that Cauchy transforms of
//!   non-homomorphic expectations need not be rational of bounded degree,
//!   and samplers for honestly homomorphic models.
//! * [`herglotz`]: the Cayley transform, Herglotz representations
//!   `h(Lambda) = V* (L - Lambda)^{-1} (L + Lambda) V` of free Pick
//!   functions on the operator ball, and the extraction of Nevanlinna data
//!   `(A, W, C)` that exhibits any such function with vanishing linear term
//!   as a Cauchy transform.
//! * [`ncrat`]: a small noncommutative rational expression language, used
//!   to state closed forms and cross-check them against model evaluations.
//! * [`io`]: JSON encodings of every exchange type.
//!
//! Numerical conventions live in [`tol`]; all matrices are dense
//! `nalgebra` matrices over `Complex<f64>`.

pub mod algebra;
pub mod cauchy;
pub mod cpmaps;
pub mod herglotz;
pub mod io;
pub mod linalg;
pub mod ncrat;
pub mod tol;
