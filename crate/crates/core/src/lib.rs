//! Numerical laboratory for the 2D incompressible Euler equation with a
//! loglog-singular vortex plus a smooth compactly supported perturbation.
//!
//! The vorticity is decomposed as `w(x,t) = w_s(x - phi*(t)) + g(x,t)` where
//! `w_s` is a fixed radial profile equal to `loglog(1/|x|)` near the origin
//! and `g` solves a forced transport equation. The crate provides:
//!
//! * closed-form/quadrature evaluation of the singular profile and its induced
//!   velocity ([`vortex`]),
//! * moduli of continuity and sampled `C^mu` norm estimators ([`moc`]),
//! * uniform grids, bicubic sampling, and free-space Biot-Savart velocity
//!   recovery by FFT or direct summation ([`field`], [`biot`]),
//! * the four-block mollified initial perturbation and its hyperbolicity
//!   certificate ([`initial`]),
//! * a semi-Lagrangian transport solver with a Picard iteration mode
//!   ([`solver`], [`picard`]),
//! * trajectory probes and the conservation/breakdown statistics ([`traj`]),
//! * the cross-method oracle suite ([`oracles`]).
//!
//! With the default `parallel` feature the data-parallel inner loops (pair
//! scans, per-node backtracing, direct quadrature, FFT rows) run on rayon;
//! without it every kernel falls back to an equivalent sequential loop.
//! Results are bitwise identical either way: reductions use max operations or
//! fixed-order partial sums.

pub mod biot;
pub mod cheby;
pub mod error;
pub mod field;
pub mod fft2;
pub mod initial;
pub mod moc;
pub mod oracles;
pub mod par;
pub mod picard;
pub mod quad;
pub mod report;
pub mod solver;
pub mod traj;
pub mod util;
pub mod vortex;

pub use error::Error;
pub use util::{Mat2, Vec2};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
