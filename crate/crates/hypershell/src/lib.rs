//! Constructive solvers for the linear strain equation `sym ∇y = U` on
//! noncharacteristic regions of hyperbolic graph surfaces.
//!
//! The pipeline reduces the tensorial strain equation to a scalar hyperbolic
//! PDE for the normal component, integrates that equation with a
//! characteristic (Goursat) scheme in asymptotic coordinates, reconstructs
//! the displacement by path integration, and builds on the same machinery to
//! generate infinitesimal isometries, match higher-order metric corrections,
//! and evaluate thin-shell bending energies.
//!
//! Module layout:
//!
//! - [`geometry`] — hyperbolic graph surfaces with exact (polynomial)
//!   curvature data, sampled tensor fields, covariant derivatives, the
//!   in-plane rotation `Q`, and the trace operator `Λ`.
//! - [`asymptotic`] — asymptotic direction fields, asymptotic coordinate
//!   charts (closed-form and ODE-net based), chart normalization along a
//!   curve, and the normal form of the scalar equation.
//! - [`goursat`] — the planar characteristic solver: Picard iteration on
//!   curvilinear triangles and rectangles, with subdivide-and-paste region
//!   composition (`E`, rectangles, `P1`/`P2`, `Ξ1`, `Ξ2`, `Φ`).
//! - [`strain`] — noncharacteristic regions, assembly of the scalar problem
//!   from a strain field, boundary operators `T_i`, the end-to-end strain
//!   solve, and displacement reconstruction.
//! - [`isometry`] — infinitesimal isometries, metric-defect measurement, and
//!   higher-order matching of isometry expansions.
//! - [`energy`] — bending energy of an infinitesimal isometry, quadratic-form
//!   reduction `Q2`, and the recovery-sequence energy sweep.
//! - [`cli`] — config-driven batch driver (`solve` / `verify` / `sweep`).

pub mod asymptotic;
pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod goursat;
pub mod interp;
pub mod isometry;
pub mod par;
pub mod strain;
pub mod verify;

pub use error::{Error, Result};
