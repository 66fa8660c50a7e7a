//! Planar characteristic (Goursat) solver for
//! `w_{x1x2} = f + f0·w + X¹ w_{x1} + X² w_{x2}`
//! on characteristic-aligned regions of the plane.
//!
//! Regions are composed from three primitives, each solved by Picard
//! iteration of an explicit integral operator on a characteristic-aligned
//! grid:
//!
//! - `E(γ)` — curvilinear triangle to the lower-right of a noncharacteristic
//!   curve `γ` (`γ1' > 0 > γ2'`), with `w` and a transversal derivative
//!   prescribed on `γ`;
//! - rectangles with `w` prescribed on the bottom and left edges;
//! - `P1(β)` / `P2(β)` — curvilinear triangles beside an increasing curve
//!   `β` carrying `w_{x2}` (resp. `w_{x1}`) data, closed by an edge trace.
//!
//! Larger regions (`Ξ1`, `Ξ2`, `Φ`) are pasted from these primitives in the
//! dependency order of the construction, with seams shared exactly at
//! transfer nodes. Each Picard sub-block is sized by the contraction gate
//! `C_T · max{λ, λ²} ≤ 1/2`, where `C_T = sup(|f0| + |X|)` over the region
//! and `λ` is the block extent.

mod compose;
pub mod manufactured;
mod diag;
mod mesh;
#[cfg(test)]
mod tests;

pub use compose::{picard_solve_small, solve_on_composite, solve_on_e, solve_on_p1, solve_on_p2, solve_on_rect, GridSpec};
pub use diag::{check_compatibility_order1, trace_diagnostics, CompatReport, TraceDiagnostics};

use crate::error::{Error, Result};
use crate::interp;
use std::sync::Arc;

/// Scalar function of one variable with an optional exact derivative
/// (fourth-order finite differences otherwise).
#[derive(Clone)]
pub struct ScalarFn1 {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl ScalarFn1 {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn1 { f: Arc::new(f), df: None }
    }

    pub fn with_deriv(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarFn1 { f: Arc::new(f), df: Some(Arc::new(df)) }
    }

    pub fn zero() -> Self {
        Self::with_deriv(|_| 0.0, |_| 0.0)
    }

    pub fn val(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match &self.df {
            Some(d) => d(t),
            None => interp::fd_deriv(&*self.f, t, 1e-4 * (1.0 + t.abs())),
        }
    }
}

/// Planar curve `t ↦ (x1(t), x2(t))` on `[0, t_end]`.
#[derive(Clone)]
pub struct Curve2 {
    pub x1: ScalarFn1,
    pub x2: ScalarFn1,
    pub t_end: f64,
}

impl Curve2 {
    pub fn point(&self, t: f64) -> (f64, f64) {
        (self.x1.val(t), self.x2.val(t))
    }
    pub fn tangent(&self, t: f64) -> (f64, f64) {
        (self.x1.deriv(t), self.x2.deriv(t))
    }

    /// Verifies strict componentwise monotonicity with the given signs on a
    /// 65-point sample.
    fn check_monotone(&self, s1: f64, s2: f64, what: &str) -> Result<()> {
        for k in 0..=64 {
            let t = self.t_end * k as f64 / 64.0;
            let (d1, d2) = self.tangent(t);
            if d1 * s1 <= 0.0 || d2 * s2 <= 0.0 {
                return Err(Error::Characteristic(format!(
                    "curve '{what}' is characteristic or misoriented at t = {t:.6}: \
                     tangent = ({d1:.3e}, {d2:.3e}), expected signs ({s1}, {s2})"
                )));
            }
        }
        Ok(())
    }
}

/// Coefficient field on the plane.
#[derive(Clone)]
pub struct CoeffField(pub Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl CoeffField {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        CoeffField(Arc::new(f))
    }
    pub fn zero() -> Self {
        Self::new(|_, _| 0.0)
    }
    pub fn val(&self, x1: f64, x2: f64) -> f64 {
        (self.0)(x1, x2)
    }
}

/// The planar problem `w_{x1x2} = f + f0 w + x1c w_{x1} + x2c w_{x2}`.
#[derive(Clone)]
pub struct GoursatProblem {
    pub f: CoeffField,
    pub f0: CoeffField,
    pub x1c: CoeffField,
    pub x2c: CoeffField,
}

impl GoursatProblem {
    /// Pure wave problem `w_{x1x2} = f`.
    pub fn pure(f: CoeffField) -> Self {
        GoursatProblem { f, f0: CoeffField::zero(), x1c: CoeffField::zero(), x2c: CoeffField::zero() }
    }

    /// Swaps the roles of `x1` and `x2` (used to solve `P2` regions with
    /// the `P1` machinery).
    pub fn transposed(&self) -> Self {
        let (f, f0, x1c, x2c) =
            (self.f.clone(), self.f0.clone(), self.x1c.clone(), self.x2c.clone());
        GoursatProblem {
            f: CoeffField::new(move |a, b| f.val(b, a)),
            f0: CoeffField::new(move |a, b| f0.val(b, a)),
            x1c: CoeffField::new(move |a, b| x2c.val(b, a)),
            x2c: CoeffField::new(move |a, b| x1c.val(b, a)),
        }
    }
}

/// Region descriptors for the planar solver (chart coordinates).
#[derive(Clone)]
pub enum RegionDescriptor {
    /// Curvilinear triangle right of `γ` (`γ1' > 0 > γ2'`).
    E { gamma: Curve2 },
    /// Axis rectangle `[z1, z1+a] × [z2, z2+b]`.
    Rect { z: (f64, f64), a: f64, b: f64 },
    /// Triangle right of an increasing curve `β`, above its start height.
    P1 { beta: Curve2 },
    /// Triangle left of an increasing curve `β`, right of its start abscissa.
    P2 { beta: Curve2 },
    /// `P1(β) ∪ rectangle ∪ E(γ)` with `β(0) = γ(0)` and `β1(t0) ≤ γ1(t1)`.
    Xi1 { beta: Curve2, gamma: Curve2 },
    /// `E(γ) ∪ rectangle ∪ P2(β)` with `γ(t1) = β(0)` and `β2(t0) ≤ γ2(0)`.
    Xi2 { gamma: Curve2, beta: Curve2 },
    /// `Ξ1(β,γ) ∪ rectangle ∪ P2(β̂)` with `β(0) = γ(0)`, `β̂(0) = γ(t1)`.
    Phi { beta: Curve2, gamma: Curve2, beta_hat: Curve2 },
}

impl RegionDescriptor {
    /// Validates monotonicity and junction invariants.
    pub fn validate(&self) -> Result<()> {
        let junction = |p: (f64, f64), q: (f64, f64), what: &str| -> Result<()> {
            let d = ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
            if d > 1e-9 {
                return Err(Error::Config(format!(
                    "junction mismatch for {what}: |{p:?} - {q:?}| = {d:.3e}"
                )));
            }
            Ok(())
        };
        match self {
            RegionDescriptor::E { gamma } => gamma.check_monotone(1.0, -1.0, "gamma"),
            RegionDescriptor::Rect { a, b, .. } => {
                if *a <= 0.0 || *b <= 0.0 {
                    Err(Error::Config(format!("degenerate rectangle a={a}, b={b}")))
                } else {
                    Ok(())
                }
            }
            RegionDescriptor::P1 { beta } => beta.check_monotone(1.0, 1.0, "beta"),
            RegionDescriptor::P2 { beta } => beta.check_monotone(1.0, 1.0, "beta"),
            RegionDescriptor::Xi1 { beta, gamma } => {
                beta.check_monotone(1.0, 1.0, "beta")?;
                gamma.check_monotone(1.0, -1.0, "gamma")?;
                junction(beta.point(0.0), gamma.point(0.0), "Xi1 (beta(0) = gamma(0))")?;
                if beta.x1.val(beta.t_end) > gamma.x1.val(gamma.t_end) + 1e-12 {
                    return Err(Error::Config(
                        "Xi1 requires beta1(t0) <= gamma1(t1)".to_string(),
                    ));
                }
                Ok(())
            }
            RegionDescriptor::Xi2 { gamma, beta } => {
                gamma.check_monotone(1.0, -1.0, "gamma")?;
                beta.check_monotone(1.0, 1.0, "beta")?;
                junction(gamma.point(gamma.t_end), beta.point(0.0), "Xi2 (gamma(t1) = beta(0))")?;
                if beta.x2.val(beta.t_end) > gamma.x2.val(0.0) + 1e-12 {
                    return Err(Error::Config(
                        "Xi2 requires beta2(t0) <= gamma2(0)".to_string(),
                    ));
                }
                Ok(())
            }
            RegionDescriptor::Phi { beta, gamma, beta_hat } => {
                beta.check_monotone(1.0, 1.0, "beta")?;
                gamma.check_monotone(1.0, -1.0, "gamma")?;
                beta_hat.check_monotone(1.0, 1.0, "beta_hat")?;
                junction(beta.point(0.0), gamma.point(0.0), "Phi (beta(0) = gamma(0))")?;
                junction(
                    gamma.point(gamma.t_end),
                    beta_hat.point(0.0),
                    "Phi (beta_hat(0) = gamma(t1))",
                )?;
                if beta.x1.val(beta.t_end) > gamma.x1.val(gamma.t_end) + 1e-12 {
                    return Err(Error::Config(
                        "Phi requires beta1(t0) <= gamma1(t1)".to_string(),
                    ));
                }
                if beta_hat.x2.val(beta_hat.t_end) > beta.x2.val(beta.t_end) + 1e-12 {
                    return Err(Error::Config(
                        "Phi requires beta_hat2(t2) <= beta2(t0)".to_string(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Boundary data for the matching [`RegionDescriptor`] variant.
#[derive(Clone)]
pub enum GoursatData {
    /// `w∘γ = q0`, `⟨∇w, Fγ'⟩∘γ = q1` with `F(x) = (x2, -x1)`.
    E { q0: ScalarFn1, q1: ScalarFn1 },
    /// `w` on the bottom edge (`p1(x1)`) and left edge (`p2(x2)`).
    Rect { p1: ScalarFn1, p2: ScalarFn1 },
    /// `w_{x2}∘β = p`, `w` on the bottom edge (`p1(x1)`).
    P1 { p: ScalarFn1, p1: ScalarFn1 },
    /// `w_{x1}∘β = p`, `w` on the left edge (`p2(x2)`).
    P2 { p: ScalarFn1, p2: ScalarFn1 },
    /// γ-data plus `w_{x2}∘β = p`.
    Xi1 { q0: ScalarFn1, q1: ScalarFn1, p: ScalarFn1 },
    /// γ-data plus `w_{x1}∘β = p`.
    Xi2 { q0: ScalarFn1, q1: ScalarFn1, p: ScalarFn1 },
    /// γ-data plus `w_{x2}∘β = p_beta` and `w_{x1}∘β̂ = p_beta_hat`.
    Phi { q0: ScalarFn1, q1: ScalarFn1, p_beta: ScalarFn1, p_beta_hat: ScalarFn1 },
}

/// One rectangular-index patch of a solution, with a node-validity mask for
/// curvilinear boundaries.
#[derive(Clone)]
pub struct PatchGrid {
    pub label: String,
    /// Ascending axis nodes.
    pub xs1: Vec<f64>,
    pub xs2: Vec<f64>,
    /// Node validity, index `j * xs1.len() + i`.
    pub mask: Vec<bool>,
    pub w: Vec<f64>,
    pub wx1: Vec<f64>,
    pub wx2: Vec<f64>,
    /// Stored characteristic derivative `w_{x1x2}` (the converged η).
    pub wx12: Vec<f64>,
}

/// Which stored field to interpolate.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Field {
    W,
    Wx1,
    Wx2,
    Wx12,
}

impl PatchGrid {
    fn values(&self, f: Field) -> &[f64] {
        match f {
            Field::W => &self.w,
            Field::Wx1 => &self.wx1,
            Field::Wx2 => &self.wx2,
            Field::Wx12 => &self.wx12,
        }
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.xs1.len() + i
    }

    /// Whether the point lies in the patch bounding box (loose test; the
    /// mask-aware window search decides actual evaluability).
    pub fn in_bbox(&self, x1: f64, x2: f64, tol: f64) -> bool {
        x1 >= self.xs1[0] - tol
            && x1 <= self.xs1[self.xs1.len() - 1] + tol
            && x2 >= self.xs2[0] - tol
            && x2 <= self.xs2[self.xs2.len() - 1] + tol
    }

    /// Finds a fully valid m×m interpolation window near `(x1, x2)`,
    /// shrinking m from 4 to 1; returns `(i0, j0, m)`. Windows containing
    /// the query point are preferred over extrapolating ones, so that
    /// evaluation at a valid node reproduces the stored value exactly.
    fn find_window(&self, x1: f64, x2: f64) -> Option<(usize, usize, usize)> {
        let (n1, n2) = (self.xs1.len(), self.xs2.len());
        let iq = self.xs1.partition_point(|&v| v < x1);
        let jq = self.xs2.partition_point(|&v| v < x2);
        let eps1 = 1e-9 * (self.xs1[n1 - 1] - self.xs1[0]).max(1e-12);
        let eps2 = 1e-9 * (self.xs2[n2 - 1] - self.xs2[0]).max(1e-12);
        for require_containment in [true, false] {
            for m in (1..=4usize.min(n1).min(n2)).rev() {
                // Candidate origins around the query, nearest-first.
                let cands = |q: usize, n: usize| -> Vec<usize> {
                    let lo = q.saturating_sub(m + 1);
                    let hi = (q + 2).min(n - m);
                    let center = q.saturating_sub(m / 2).min(n - m);
                    let mut v: Vec<usize> = (lo..=hi).collect();
                    v.sort_by_key(|&c| (c as i64 - center as i64).abs());
                    v
                };
                for &i0 in &cands(iq, n1) {
                    for &j0 in &cands(jq, n2) {
                        if require_containment
                            && !(self.xs1[i0] - eps1 <= x1
                                && x1 <= self.xs1[i0 + m - 1] + eps1
                                && self.xs2[j0] - eps2 <= x2
                                && x2 <= self.xs2[j0 + m - 1] + eps2)
                        {
                            continue;
                        }
                        let ok = (0..m).all(|dj| {
                            (0..m).all(|di| self.mask[self.idx(i0 + di, j0 + dj)])
                        });
                        if ok {
                            return Some((i0, j0, m));
                        }
                    }
                }
            }
        }
        None
    }

    /// Interpolates a stored field at a point using the largest fully valid
    /// local Lagrange window (≤ 4×4).
    pub fn eval(&self, f: Field, x1: f64, x2: f64) -> Option<f64> {
        let (i0, j0, m) = self.find_window(x1, x2)?;
        let vals = self.values(f);
        let xw = &self.xs1[i0..i0 + m];
        let mut col = [0.0f64; 4];
        for dj in 0..m {
            let row: Vec<f64> = (0..m).map(|di| vals[self.idx(i0 + di, j0 + dj)]).collect();
            col[dj] = interp::lagrange4(xw, &row, x1);
        }
        Some(interp::lagrange4(&self.xs2[j0..j0 + m], &col[..m], x2))
    }
}

/// Solve diagnostics shared by all region solvers.
#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    /// Observed contraction ratio (sup-change ratio of the final Picard
    /// sweep) per solved sub-block.
    pub contraction_ratios: Vec<f64>,
    /// Picard iteration counts per sub-block.
    pub iterations: Vec<usize>,
    /// Sup of seam disagreement measured at transfer nodes.
    pub seam_max_err: f64,
    /// Corner/junction compatibility residuals recorded during assembly.
    pub compat_residuals: Vec<f64>,
    /// Contraction gate values `C_T · max(λ, λ²)` per sub-block.
    pub gate_values: Vec<f64>,
}

/// A solved region: a patchwork of index grids with exactly matching seams.
#[derive(Clone)]
pub struct SolutionGrid {
    pub patches: Vec<PatchGrid>,
    pub report: SolveReport,
}

impl SolutionGrid {
    /// Interpolates a field at a point, trying patches in order.
    pub fn eval(&self, f: Field, x1: f64, x2: f64) -> Option<f64> {
        let tol = 1e-9;
        for p in &self.patches {
            if p.in_bbox(x1, x2, tol) {
                if let Some(v) = p.eval(f, x1, x2) {
                    return Some(v);
                }
            }
        }
        None
    }

    /// Sup over interior valid nodes of the defect between a second-order
    /// cross difference of `w` and the stored characteristic derivative.
    pub fn equation_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in &self.patches {
            let (n1, n2) = (p.xs1.len(), p.xs2.len());
            for j in 1..n2.saturating_sub(1) {
                for i in 1..n1.saturating_sub(1) {
                    let all = p.mask[p.idx(i - 1, j - 1)]
                        && p.mask[p.idx(i + 1, j - 1)]
                        && p.mask[p.idx(i - 1, j + 1)]
                        && p.mask[p.idx(i + 1, j + 1)]
                        && p.mask[p.idx(i, j)];
                    if !all {
                        continue;
                    }
                    let num = p.w[p.idx(i + 1, j + 1)] - p.w[p.idx(i - 1, j + 1)]
                        - p.w[p.idx(i + 1, j - 1)]
                        + p.w[p.idx(i - 1, j - 1)];
                    let den =
                        (p.xs1[i + 1] - p.xs1[i - 1]) * (p.xs2[j + 1] - p.xs2[j - 1]);
                    worst = worst.max((num / den - p.wx12[p.idx(i, j)]).abs());
                }
            }
        }
        worst
    }
}
