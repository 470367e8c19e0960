//! Exponential convexity of `f(t) = tr e^{tA + B}` for Hermitian `A`, `B`.
//!
//! [`reduction`] brings a pair with rank-one `A` to the form
//! `(λ e_n e_n*, M)` with `M` entrywise nonnegative off the diagonal.
//! [`convexity`] tests the Gram matrices `[f(t_r + t_s)]` for positive
//! semidefiniteness, [`transform`] relates `f` to its representing measure,
//! and [`verify`] runs all of it over a seeded random ensemble.

pub mod convexity;
pub mod ensemble;
pub mod hermitian;
mod nnls;
pub mod par;
pub mod reduction;
pub mod transform;
pub mod verify;
