//! Numerical tolerances used across the crate.
//!
//! Conventions:
//!
//! * "relative" tolerances are applied as `tol * (1 + scale)` where `scale`
//!   is an operator norm of the data involved, so they behave sensibly for
//!   both tiny and large inputs;
//! * positivity of Hermitian matrices is always tested as
//!   `lambda_min >= -slack`, never as exact PSD;
//! * inversions are refused, not attempted, when the smallest singular
//!   value falls under the guard, so failures surface as typed errors
//!   rather than as garbage output.

/// Slack for positivity tests (region membership, Pick positivity,
/// complete positivity of Choi matrices).
pub const PSD: f64 = 1e-9;

/// Hermiticity acceptance band, relative.  A matrix with defect
/// `||m - m*|| <= HERMITIAN * (1 + ||m||)` is silently symmetrized to
/// `(m + m*)/2`; a larger defect is a hard error.
pub const HERMITIAN: f64 = 1e-8;

/// Block-structure leak tolerance, relative.  Outputs of maps into a
/// block-diagonal algebra must vanish off the blocks up to this; the
/// off-block part is then zeroed exactly.
pub const BLOCK: f64 = 1e-10;

/// Relative smallest-singular-value guard for inversions and solves:
/// refuse when `sigma_min < SINGULAR * max(1, ||m||)`.
pub const SINGULAR: f64 = 1e-12;

/// Kernel detection band for unitaries: an eigenvalue `lambda` with
/// `|lambda - 1| <= KERNEL` counts as kernel of `1 - L`.
pub const KERNEL: f64 = 1e-8;

/// Tolerance for the dilation identity `E(psi(b)) = b`, relative.
pub const DILATION: f64 = 1e-10;

/// Tolerance for multiplicativity and Tomiyama (module) identities.
pub const HOMOMORPHY: f64 = 1e-10;

/// Default tolerance for identities that hold exactly in finite dimension
/// (moment recovery, closed forms, round trips).
pub const IDENTITY: f64 = 1e-10;
