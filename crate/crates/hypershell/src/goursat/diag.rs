//! Data-compatibility checks and boundary-trace diagnostics.

use super::{Curve2, Field, GoursatData, RegionDescriptor, ScalarFn1, SolutionGrid};
use crate::error::{Error, Result};
use crate::interp;

/// First-order junction compatibility residuals. A residual measures how
/// far the derivative datum carried by a side curve at a junction is from
/// the derivative trace implied by the main-curve data; it is *recorded*,
/// not enforced, since the solver tolerates (and propagates) incompatible
/// corners along characteristics.
#[derive(Clone, Debug, Default)]
pub struct CompatReport {
    pub residuals: Vec<f64>,
}

/// Residual of `|γ'|² p = γ2' q0' - γ1' q1` at parameter `t` (the `w_{x2}`
/// trace identity on γ).
fn wx2_junction_residual(gamma: &Curve2, q0: &ScalarFn1, q1: &ScalarFn1, t: f64, p0: f64) -> f64 {
    let (d1, d2) = gamma.tangent(t);
    (d1 * d1 + d2 * d2) * p0 - (d2 * q0.deriv(t) - d1 * q1.val(t))
}

/// Residual of `|γ'|² p = γ1' q0' + γ2' q1` at parameter `t` (the `w_{x1}`
/// trace identity on γ).
fn wx1_junction_residual(gamma: &Curve2, q0: &ScalarFn1, q1: &ScalarFn1, t: f64, p0: f64) -> f64 {
    let (d1, d2) = gamma.tangent(t);
    (d1 * d1 + d2 * d2) * p0 - (d1 * q0.deriv(t) + d2 * q1.val(t))
}

/// Computes the first-order compatibility residuals of a region/data pair
/// at every curve junction (and the corner `w` mismatch for rectangles).
pub fn check_compatibility_order1(region: &RegionDescriptor, data: &GoursatData) -> CompatReport {
    let residuals = match (region, data) {
        (RegionDescriptor::Rect { z, .. }, GoursatData::Rect { p1, p2 }) => {
            vec![p1.val(z.0) - p2.val(z.1)]
        }
        (RegionDescriptor::Xi1 { beta: _, gamma }, GoursatData::Xi1 { q0, q1, p }) => {
            vec![wx2_junction_residual(gamma, q0, q1, 0.0, p.val(0.0))]
        }
        (RegionDescriptor::Xi2 { gamma, .. }, GoursatData::Xi2 { q0, q1, p }) => {
            vec![wx1_junction_residual(gamma, q0, q1, gamma.t_end, p.val(0.0))]
        }
        (
            RegionDescriptor::Phi { gamma, .. },
            GoursatData::Phi { q0, q1, p_beta, p_beta_hat },
        ) => vec![
            wx2_junction_residual(gamma, q0, q1, 0.0, p_beta.val(0.0)),
            wx1_junction_residual(gamma, q0, q1, gamma.t_end, p_beta_hat.val(0.0)),
        ],
        _ => Vec::new(),
    };
    CompatReport { residuals }
}

/// Boundary-trace diagnostic of a solved field along a curve `γ` on
/// `[0, t0]`:
///
/// `Γ = ‖w∘γ‖² + ‖∇w∘γ‖² + ∫ |w_{x1x1}∘γ|² t + |w_{x2x2}∘γ|² (t0 - t) dt`,
///
/// all `L²` norms taken in the curve parameter.
#[derive(Clone, Debug)]
pub struct TraceDiagnostics {
    pub l2_w: f64,
    pub l2_grad: f64,
    pub l2_second_weighted: f64,
    pub total: f64,
}

/// Pure second derivative of the solution in one axis direction, by central
/// differencing of the stored first-derivative field, falling back to
/// one-sided stencils at region boundaries.
fn second_deriv(sol: &SolutionGrid, f: Field, x1: f64, x2: f64, axis: usize, h: f64) -> Result<f64> {
    let at = |d: f64| -> Option<f64> {
        if axis == 0 {
            sol.eval(f, x1 + d, x2)
        } else {
            sol.eval(f, x1, x2 + d)
        }
    };
    match (at(-h), at(h)) {
        (Some(a), Some(b)) => Ok((b - a) / (2.0 * h)),
        (None, Some(b)) => {
            let c = at(0.0).ok_or_else(|| trace_oob(x1, x2))?;
            Ok((b - c) / h)
        }
        (Some(a), None) => {
            let c = at(0.0).ok_or_else(|| trace_oob(x1, x2))?;
            Ok((c - a) / h)
        }
        (None, None) => Err(trace_oob(x1, x2)),
    }
}

fn trace_oob(x1: f64, x2: f64) -> Error {
    Error::Numerical(format!("trace diagnostic left the solved region at ({x1:.6}, {x2:.6})"))
}

/// Evaluates the boundary-trace diagnostic of a solution along `γ` with a
/// 400-interval trapezoid rule in the curve parameter.
pub fn trace_diagnostics(sol: &SolutionGrid, gamma: &Curve2) -> Result<TraceDiagnostics> {
    let nq = 400usize;
    let ts = interp::linspace(0.0, gamma.t_end, nq);
    let mut span: f64 = 0.0;
    for p in &sol.patches {
        span = span
            .max(p.xs1[p.xs1.len() - 1] - p.xs1[0])
            .max(p.xs2[p.xs2.len() - 1] - p.xs2[0]);
    }
    let h = 1e-3 * span.max(1e-6);

    let mut g0 = vec![0.0; ts.len()];
    let mut g1 = vec![0.0; ts.len()];
    let mut g2 = vec![0.0; ts.len()];
    for (k, &t) in ts.iter().enumerate() {
        let (x1, x2) = gamma.point(t);
        let w = sol.eval(Field::W, x1, x2).ok_or_else(|| trace_oob(x1, x2))?;
        let wx1 = sol.eval(Field::Wx1, x1, x2).ok_or_else(|| trace_oob(x1, x2))?;
        let wx2 = sol.eval(Field::Wx2, x1, x2).ok_or_else(|| trace_oob(x1, x2))?;
        let w11 = second_deriv(sol, Field::Wx1, x1, x2, 0, h)?;
        let w22 = second_deriv(sol, Field::Wx2, x1, x2, 1, h)?;
        g0[k] = w * w;
        g1[k] = wx1 * wx1 + wx2 * wx2;
        g2[k] = w11 * w11 * t + w22 * w22 * (gamma.t_end - t);
    }
    let l2_w = interp::trapz(&ts, &g0);
    let l2_grad = interp::trapz(&ts, &g1);
    let l2_second_weighted = interp::trapz(&ts, &g2);
    Ok(TraceDiagnostics { l2_w, l2_grad, l2_second_weighted, total: l2_w + l2_grad + l2_second_weighted })
}
