//! Numerical laboratory for space-dependent entanglement.
//!
//! * [`bell`]: singlet spin correlations, CHSH combinations, a local
//!   hidden-variable baseline and the spatial localization factor `g(O1, O2)`.
//! * [`franson`]: interferometer coincidence rate and fringe visibility.
//! * [`formfactor`] and [`field`]: the driven massless field model, whose
//!   amplitude `phi(r, t)` is built from half-line oscillatory transforms.
//! * [`asymptotics`]: envelope extraction and log-log decay fits.
//! * [`cli`]: the `entangle-lab` command-line front end.

// Negated comparisons are how NaN inputs get rejected alongside out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bell;
pub mod cli;
pub mod field;
pub mod formfactor;
pub mod franson;
pub mod grid;
pub mod quadrature;

pub use field::{phi_direct3d, phi_radial, r0, CoincidenceBase, FieldAmplitude};
pub use formfactor::{Formfactor, TransformMethod, TransformValue};
pub use quadrature::QuadratureSpec;
