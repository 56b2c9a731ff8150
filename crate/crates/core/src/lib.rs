//! Numerical laboratory for the magnetic two-component Hunter–Saxton system
//! on the circle.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`] – grids, initial data, conserved quantities, characteristic
//!   frequencies and the periodic trapezoid quadrature shared by everything.
//! * [`lagrangian`] – the Riccati reduction along characteristics, its closed
//!   forms and blow-up detection.
//! * [`weakflow`] – the Hilbert-sphere curve γ, the relaxed configuration
//!   (φ, τ) and the weak magnetic geodesic checks.
//! * [`eulerian`] – pull-back of (φ, τ) to Eulerian (u, ρ), PDE residuals and
//!   conservation reporting.
//! * [`oracle`] – brute-force integrators used to certify the closed forms.

// `!(x > tol)` is used on purpose so that NaN lands on the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod eulerian;
pub mod lagrangian;
pub mod oracle;
pub mod weakflow;

pub use num_complex::Complex64;

pub use domain::{
    contact_angle, cumulative_integral, cumulative_integral_corrected, energy, fourier_synthesize, normalize, seeded_profile,
    thetas, trapezoid, Grid, InitialData, Mode, SimParams,
};
pub use error::{Error, Result};
pub use eulerian::{EulerianState, ResidualNorms};
pub use lagrangian::{BlowupReport, BlowupSite, RiccatiField};
pub use oracle::OdeRunConfig;
pub use weakflow::{GammaField, LagrangianState, TauVariant};
