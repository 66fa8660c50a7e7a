//! Hyperbolic graph surfaces and tensor calculus on them.
//!
//! A surface is the graph `M = {(x, h(x)) : x ∈ D ⊂ R²}` of a polynomial
//! height function with negative Gauss curvature on `D`. Because every
//! catalog entry is polynomial, the metric, second fundamental form, Gauss
//! curvature, Christoffel symbols, and their derivatives are all evaluated
//! in closed form; finite differences are reserved for *sampled* fields
//! (strain inputs, solved displacements).
//!
//! Conventions (all verified by unit tests):
//!
//! - unit normal `ν = (-∇h, 1)/√(1+|∇h|²)` (upward),
//! - second fundamental form `Π(α,β) = ⟨∇_α ν, β⟩`, with matrix
//!   `Π = -∇²h/√(1+|∇h|²)` in the graph chart,
//! - Gauss curvature `κ = det ∇²h / (1+|∇h|²)²`,
//! - `Q` rotates tangent vectors clockwise by `π/2` in the surface metric
//!   (`Q e₁ = -e₂` for a positively oriented orthonormal frame), so
//!   `Qᵀ = -Q` and `Q² = -Id`.

mod surface;
mod tensor;

pub use surface::{Poly2, SurfacePatch};
pub use tensor::{
    inner2, lambda_op, sym, AffineMap, ParamMap, TensorFieldGrid,
};

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

/// 2-vector of chart components.
pub type V2 = Vector2<f64>;
/// Ambient 3-vector.
pub type V3 = Vector3<f64>;
/// 2×2 chart-component matrix.
pub type M2 = Matrix2<f64>;
/// 3×3 ambient matrix.
pub type M3 = Matrix3<f64>;

/// First and second fundamental forms at a point (covariant components in
/// the graph chart).
#[derive(Debug, Clone, Copy)]
pub struct FundamentalForms {
    pub g: M2,
    pub pi: M2,
}

/// Tangent vector attached to a base point of the surface chart.
#[derive(Debug, Clone, Copy)]
pub struct TangentVec {
    /// Base point in the graph chart.
    pub base: V2,
    /// Chart components (contravariant).
    pub v: V2,
}

impl TangentVec {
    pub fn new(base: V2, v: V2) -> Self {
        TangentVec { base, v }
    }
}
