//! Fidelity certificates for partially entangled two-qubit states from
//! observed steering-inequality violations.
//!
//! Layout:
//! - [`qmat`]: dense complex linear algebra.
//! - [`model`]: target states, Bob's observables and the inequality families.
//! - [`certify_analytic`]: closed-form certificates `F >= s S + tau` from local extraction channels.
//! - [`sos`]: numerical verification of sum-of-squares identities, self-testing relations and the SWAP isometry.
//! - [`certify_sdp`]: moment-matrix fidelity bound solved with a dense interior-point method.
//! - [`sampling`]: guessing probabilities and sample-size plans.

pub mod certify_analytic;
pub mod certify_sdp;
pub mod model;
pub mod qmat;
pub mod sampling;
pub mod sos;
