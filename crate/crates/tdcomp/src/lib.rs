//! Delay-compensating functional observers for linear systems.
//!
//! Given a plant `ẋ = Ax + Bu` whose output is only available after a
//! measurement delay, this crate synthesizes observers that estimate the
//! *current* functional `z(t) = Fx(t)` from the delayed data, certifies the
//! estimation-error dynamics with Lyapunov–Krasovskii LMI conditions solved
//! by an internal semidefinite feasibility engine, and validates designs by
//! delay-differential simulation and rightmost characteristic roots.
//!
//! Layering, bottom up:
//!
//! * [`linalg`] — dense matrix kernel (SVD, eigenvalues, factorizations)
//! * [`model`] — plant/measurement/observer data model and the
//!   error-coefficient algebra deciding decoupling
//! * [`synthesis`] — gain determination: rank conditions, null-space
//!   parameterization, augmentation, two-delay assembly
//! * [`lmi`] — stability and stabilization conditions as affine
//!   symmetric-matrix constraints
//! * [`sdp`] — feasibility engine with independent certification, gain
//!   extraction, and delay sweeps
//! * [`dde`] — method-of-steps simulation and rightmost characteristic
//!   roots
//! * [`pipeline`] — end-to-end design runs with recorded certificates
//! * [`catalog`] — built-in reference scenarios with expected outcomes
//!
//! The narrative guide lives in `book/` and is re-exported as [`guide`];
//! its code listings run as doc-tests, so the book and the library cannot
//! drift apart.

// `!(x > 0.0)` style guards are deliberate: they reject NaN where the
// inverted comparison would let it through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// index-based loops mirror the matrix formulas they implement
#![allow(clippy::needless_range_loop)]

pub mod catalog;
pub mod dde;
pub mod guide;
pub mod linalg;
pub mod lmi;
pub mod model;
pub mod pipeline;
pub mod sdp;
pub mod synthesis;

pub use linalg::Mat;
