//! Infinitesimal isometries and the matching iteration.
//!
//! An *infinitesimal isometry* of the surface is a displacement `V` with
//! `sym∇V = 0` — a first-order metric-preserving deformation. This module
//! generates them (a zero-strain solve with prescribed boundary data),
//! measures the metric pullback defect of deformation families
//! `u_ε = id + εV + …`, and upgrades a first-order isometry to an *m-th
//! order* one (defect `O(ε^{m+1})`) by the matching cascade
//!
//! ```text
//! sym∇w_i = −½ Σ_{j=1}^{i−1} sym(∇ᵀw_j ∇w_{i−j})_tan,   i = 2 … m,
//! ```
//!
//! with homogeneous boundary data, yielding
//! `u_ε = id + εV + ε² Σ_{j≥2} ε^{j−2} w_j`. The observed defect order is
//! estimated by a floor-censored log-log slope fit over a geometric ε
//! list.

use crate::error::{Error, Result};
use crate::geometry::{SurfacePatch, M2, V2, V3};
use crate::interp;
use crate::strain::{
    reconstruct_displacement, sample_strain_input, scalar_problem_from_rhs, solve_strain,
    strain_data_from_scalar, assemble_scalar_problem, DisplacementField, NoncharRegion,
    StrainData, StrainParams, SymField,
};
use std::sync::Arc;

/// A deformation family `u_ε = id + εV + ε²w₂ + … + ε^m w_m`.
pub struct IsometryFamily {
    pub surf: Arc<SurfacePatch>,
    pub region: Arc<NoncharRegion>,
    /// `fields[0] = V` (order 1), `fields[i-1] = w_i` for `i ≥ 2`.
    pub fields: Vec<Arc<DisplacementField>>,
}

impl IsometryFamily {
    pub fn order(&self) -> usize {
        self.fields.len()
    }
}

/// Solves `sym∇V = 0` with the given boundary data and reconstructs the
/// displacement on an `nt × nt` parameter grid.
pub fn solve_isometry(
    surf: &Arc<SurfacePatch>,
    region: &Arc<NoncharRegion>,
    data: &StrainData,
    params: &StrainParams,
    nt: usize,
) -> Result<DisplacementField> {
    let f: Arc<dyn Fn(V2) -> f64 + Send + Sync> = Arc::new(|_| 0.0);
    let problem = scalar_problem_from_rhs(region, f, 1.0, 96);
    let sol = solve_strain(surf, region, &problem, data, params)?;
    reconstruct_displacement(surf, region, &problem, &sol, nt, nt)
}

/// The deterministic sample isometry data used by benchmarks and the
/// verification suites: operator-form traces of a fixed smooth rotation
/// scalar (automatically order-1 compatible).
pub fn sample_isometry_data(
    surf: &Arc<SurfacePatch>,
    region: &Arc<NoncharRegion>,
) -> StrainData {
    let v: Arc<dyn Fn(V2) -> f64 + Send + Sync> =
        Arc::new(|x| 0.2 * (1.1 * x[0] + 0.3).sin() * (0.7 * x[1] - 0.2).cos());
    let vb = Arc::clone(&v);
    let dv: Arc<dyn Fn(V2) -> V2 + Send + Sync> = Arc::new(move |x| {
        let h = 1e-6;
        V2::new(
            (vb(x + V2::new(h, 0.0)) - vb(x - V2::new(h, 0.0))) / (2.0 * h),
            (vb(x + V2::new(0.0, h)) - vb(x - V2::new(0.0, h))) / (2.0 * h),
        )
    });
    strain_data_from_scalar(surf, region, v, dv)
}

/// Chart-direction ambient gradient `(∂_{x1}y, ∂_{x2}y)` of a displacement
/// grid at a surface-chart point, by local Lagrange differentiation of the
/// stored grid (mild extrapolation just outside the parameter box is
/// permitted — sampling margins need it).
pub fn gradient_closure(
    field: Arc<DisplacementField>,
) -> Arc<dyn Fn(V2) -> (V3, V3) + Send + Sync> {
    Arc::new(move |x: V2| {
        let region = &field.region;
        let (t, s) = region.invert(x).expect("gradient closure point inversion");
        let (nt1, ns1) = (field.ts.len(), field.ss.len());
        // 6-point derivative windows along the derivative axis, 4-point
        // value interpolation across it: the cascade differentiates the
        // assembled strain twice more, so gradient noise must stay small.
        let m = 4usize.min(nt1).min(ns1);
        let i0 = interp::window_start(&field.ts, t, m);
        let j0 = interp::window_start(&field.ss, s, m);
        let mut dpar = (V3::zeros(), V3::zeros());
        for c in 0..3 {
            let mut dt_vals = Vec::with_capacity(m);
            let mut ds_vals = Vec::with_capacity(m);
            for k in 0..m {
                let row: Vec<f64> =
                    (0..nt1).map(|ii| field.y[(j0 + k) * nt1 + ii][c]).collect();
                dt_vals.push(interp::lagrange_deriv_m(&field.ts, &row, t, 6));
                let col: Vec<f64> =
                    (0..ns1).map(|jj| field.y[jj * nt1 + i0 + k][c]).collect();
                ds_vals.push(interp::lagrange_deriv_m(&field.ss, &col, s, 6));
            }
            dpar.0[c] = interp::lagrange4(&field.ss[j0..j0 + m], &dt_vals, s);
            dpar.1[c] = interp::lagrange4(&field.ts[i0..i0 + m], &ds_vals, t);
        }
        let jinv = region.map.jacobian(t, s).try_inverse().expect("region Jacobian");
        (
            dpar.0.scale(jinv[(0, 0)]) + dpar.1.scale(jinv[(1, 0)]),
            dpar.0.scale(jinv[(0, 1)]) + dpar.1.scale(jinv[(1, 1)]),
        )
    })
}

/// Runs the matching cascade: for `i = 2 … m` solves
/// `sym∇w_i = −½ Σ_{j=1}^{i−1} sym(∇ᵀw_j ∇w_{i−j})_tan` with homogeneous
/// data and appends `w_i` to the family.
pub fn match_higher_order(
    surf: &Arc<SurfacePatch>,
    region: &Arc<NoncharRegion>,
    v_field: Arc<DisplacementField>,
    m: usize,
    params: &StrainParams,
    nt: usize,
) -> Result<IsometryFamily> {
    if !(1..=4).contains(&m) {
        return Err(Error::Config(format!("matching order m = {m} outside the supported 1..=4")));
    }
    let mut fields = vec![v_field];
    let mut grads: Vec<Arc<dyn Fn(V2) -> (V3, V3) + Send + Sync>> =
        vec![gradient_closure(Arc::clone(&fields[0]))];
    for i in 2..=m {
        let terms: Vec<_> = (1..i).map(|j| (Arc::clone(&grads[j - 1]), Arc::clone(&grads[i - j - 1]))).collect();
        let u_i: SymField = Arc::new(move |x: V2| {
            let mut acc = M2::zeros();
            for (ga, gb) in &terms {
                let (a1, a2) = ga(x);
                let (b1, b2) = gb(x);
                acc += M2::new(a1.dot(&b1), a1.dot(&b2), a2.dot(&b1), a2.dot(&b2));
            }
            (acc + acc.transpose()).scale(-0.25)
        });
        let grid = sample_strain_input(region, &u_i, 160, 0.0);
        let problem = assemble_scalar_problem(surf, grid, 1.0)?;
        let sol = solve_strain(surf, region, &problem, &StrainData::zero(), params)?;
        let w = Arc::new(reconstruct_displacement(surf, region, &problem, &sol, nt, nt)?);
        grads.push(gradient_closure(Arc::clone(&w)));
        fields.push(w);
    }
    Ok(IsometryFamily { surf: Arc::clone(surf), region: Arc::clone(region), fields })
}

/// Displacement value at arbitrary region parameters by local Lagrange
/// interpolation of the stored grid.
pub fn field_at(field: &DisplacementField, t: f64, s: f64) -> V3 {
    let (nt1, ns1) = (field.ts.len(), field.ss.len());
    let m = 4usize.min(nt1).min(ns1);
    let i0 = interp::window_start(&field.ts, t, m);
    let j0 = interp::window_start(&field.ss, s, m);
    let mut out = V3::zeros();
    for c in 0..3 {
        let mut col = Vec::with_capacity(m);
        for jj in j0..j0 + m {
            let row: Vec<f64> = (i0..i0 + m).map(|ii| field.y[jj * nt1 + ii][c]).collect();
            col.push(interp::lagrange4(&field.ts[i0..i0 + m], &row, t));
        }
        out[c] = interp::lagrange4(&field.ss[j0..j0 + m], &col, s);
    }
    out
}

/// A sampled ambient deformation of the region, ready for pullback
/// differentiation.
pub struct DeformationGrid {
    pub ts: Vec<f64>,
    pub ss: Vec<f64>,
    pub pos: Vec<V3>,
    pub region: Arc<NoncharRegion>,
}

impl DeformationGrid {
    /// Samples a closed-form deformation on an `nt × nt` grid.
    pub fn from_closure(
        region: &Arc<NoncharRegion>,
        f: &dyn Fn(V2) -> V3,
        nt: usize,
    ) -> DeformationGrid {
        let ts = interp::linspace(0.0, region.a, nt);
        let ss = interp::linspace(0.0, region.b, nt);
        let mut pos = Vec::with_capacity(ts.len() * ss.len());
        for &s in &ss {
            for &t in &ts {
                pos.push(f(region.point(t, s)));
            }
        }
        DeformationGrid { ts, ss, pos, region: Arc::clone(region) }
    }
}

impl IsometryFamily {
    /// Assembles `u_ε` on the grid of the order-1 field; correction fields
    /// on other grids are interpolated onto it.
    pub fn deformation(&self, eps: f64) -> DeformationGrid {
        let base = &self.fields[0];
        let mut pos = Vec::with_capacity(base.y.len());
        for j in 0..base.ss.len() {
            for i in 0..base.ts.len() {
                let (t, s) = (base.ts[i], base.ss[j]);
                let x = self.region.point(t, s);
                let mut p = self.surf.embed(x) + base.y[j * base.ts.len() + i].scale(eps);
                for (ord, w) in self.fields.iter().enumerate().skip(1) {
                    p += field_at(w, t, s).scale(eps.powi(ord as i32 + 1));
                }
                pos.push(p);
            }
        }
        DeformationGrid {
            ts: base.ts.clone(),
            ss: base.ss.clone(),
            pos,
            region: Arc::clone(&self.region),
        }
    }
}

/// Sup over interior nodes of the metric pullback defect
/// `‖∇ᵀu ∇u − g‖` in the chart basis (componentwise max), derivatives by
/// 6-point Lagrange windows on the deformation grid.
pub fn metric_defect(surf: &SurfacePatch, def: &DeformationGrid) -> f64 {
    let (nt1, ns1) = (def.ts.len(), def.ss.len());
    // Exclude a thin boundary ring: there the one-sided stencils act on
    // reconstruction-edge data and report differentiation artifacts, not
    // family behavior.
    let mt = 2.max(nt1 / 24);
    let ms = 2.max(ns1 / 24);
    let mut worst = 0.0f64;
    for j in ms..ns1.saturating_sub(ms) {
        for i in mt..nt1.saturating_sub(mt) {
            let (t, s) = (def.ts[i], def.ss[j]);
            let x = def.region.point(t, s);
            let jinv = def.region.map.jacobian(t, s).try_inverse().expect("region Jacobian");
            let mut dpar = [V3::zeros(), V3::zeros()];
            for c in 0..3 {
                let row: Vec<f64> = (0..nt1).map(|ii| def.pos[j * nt1 + ii][c]).collect();
                let col: Vec<f64> = (0..ns1).map(|jj| def.pos[jj * nt1 + i][c]).collect();
                dpar[0][c] = interp::lagrange_deriv_m(&def.ts, &row, t, 6);
                dpar[1][c] = interp::lagrange_deriv_m(&def.ss, &col, s, 6);
            }
            let du = [
                dpar[0].scale(jinv[(0, 0)]) + dpar[1].scale(jinv[(1, 0)]),
                dpar[0].scale(jinv[(0, 1)]) + dpar[1].scale(jinv[(1, 1)]),
            ];
            let g = surf.metric_at(x);
            for a in 0..2 {
                for b in 0..2 {
                    worst = worst.max((du[a].dot(&du[b]) - g[(a, b)]).abs());
                }
            }
        }
    }
    worst
}

/// Defect of `u_ε` for each ε in the list.
pub fn defect_sweep(family: &IsometryFamily, eps_list: &[f64]) -> Vec<(f64, f64)> {
    eps_list
        .iter()
        .map(|&e| (e, metric_defect(&family.surf, &family.deformation(e))))
        .collect()
}

/// Floor-censored log-log slope fit.
#[derive(Clone, Debug)]
pub struct SlopeReport {
    /// Least-squares slope of `log defect` vs `log ε`, `None` when fewer
    /// than two points survive the floor (inconclusive).
    pub slope: Option<f64>,
    pub used: Vec<(f64, f64)>,
    pub censored: usize,
}

/// Fits the defect order from `(ε, defect)` pairs, excluding points at or
/// below the discretization floor.
pub fn fit_order(points: &[(f64, f64)], floor: f64) -> SlopeReport {
    let used: Vec<(f64, f64)> = points.iter().copied().filter(|&(_, d)| d > floor).collect();
    let censored = points.len() - used.len();
    if used.len() < 2 {
        return SlopeReport { slope: None, used, censored };
    }
    let n = used.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(e, d) in &used {
        let (lx, ly) = (e.ln(), d.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    SlopeReport { slope: Some(slope), used, censored }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strain::residual_sym_grad;

    fn saddle() -> Arc<SurfacePatch> {
        Arc::new(SurfacePatch::saddle([-2.0, 2.0, -2.0, 2.0]).unwrap())
    }

    fn bench_region() -> Arc<NoncharRegion> {
        NoncharRegion::saddle_diag_box(V2::new(0.0, 0.0), 0.5, 0.5)
    }

    /// Oracle: an exact finite rotation is an exact isometry, so the
    /// defect measured by `metric_defect` is pure differentiation noise.
    #[test]
    fn metric_defect_vanishes_on_exact_rotations() {
        let surf = saddle();
        let region = bench_region();
        let angle = 0.3f64;
        let (c, s) = (angle.cos(), angle.sin());
        let rot = move |p: V3| {
            V3::new(c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]) + V3::new(0.1, -0.2, 0.05)
        };
        let sc = Arc::clone(&surf);
        let def = DeformationGrid::from_closure(&region, &move |x| rot(sc.embed(x)), 96);
        let d = metric_defect(&surf, &def);
        assert!(d < 1e-10, "exact rotation defect {d:.3e}");
        // And the identity map is exactly defect-free up to the same noise.
        let sc = Arc::clone(&surf);
        let idm = DeformationGrid::from_closure(&region, &move |x| sc.embed(x), 96);
        assert!(metric_defect(&surf, &idm) < 1e-10);
    }

    #[test]
    fn non_isometric_field_has_first_order_defect() {
        let surf = saddle();
        let region = bench_region();
        let stretch: Arc<dyn Fn(V2) -> V3 + Send + Sync> =
            Arc::new(|x| V3::new(x[0], 0.0, 0.0));
        let mut defects = Vec::new();
        for &eps in &[1e-2, 5e-3, 2.5e-3] {
            let sc = Arc::clone(&surf);
            let st = Arc::clone(&stretch);
            let def =
                DeformationGrid::from_closure(&region, &move |x| sc.embed(x) + st(x).scale(eps), 64);
            defects.push((eps, metric_defect(&surf, &def)));
        }
        let fit = fit_order(&defects, 1e-13);
        let slope = fit.slope.unwrap();
        assert!(
            (0.8..=1.2).contains(&slope),
            "non-isometric defect slope {slope:.2} ({defects:?})"
        );
    }

    #[test]
    fn solve_isometry_produces_nonrigid_strain_free_field() {
        let surf = saddle();
        let region = bench_region();
        let data = sample_isometry_data(&surf, &region);
        let params = StrainParams { n: 96, ..Default::default() };
        let v = solve_isometry(&surf, &region, &data, &params, 96).unwrap();
        let zero: SymField = Arc::new(|_| M2::zeros());
        let (sup, _) = residual_sym_grad(&surf, &v, &zero);
        assert!(sup < 5e-6, "isometry residual {sup:.3e}");
        // Genuinely non-rigid: the ambient gradient is not a constant skew
        // matrix — compare chart-direction gradients at two points.
        let grad = gradient_closure(Arc::new(v));
        let (a1, _) = grad(region.point(0.25 * region.a, 0.25 * region.b));
        let (b1, _) = grad(region.point(0.75 * region.a, 0.7 * region.b));
        assert!((a1 - b1).norm() > 1e-3, "sample isometry looks rigid");
    }

    #[test]
    fn matching_raises_the_defect_order() {
        let surf = saddle();
        let region = bench_region();
        let data = sample_isometry_data(&surf, &region);
        let params = StrainParams { n: 256, ..Default::default() };
        let v = Arc::new(solve_isometry(&surf, &region, &data, &params, 192).unwrap());
        let eps_list = [0.1, 0.05, 0.025, 0.0125];

        let fam1 = match_higher_order(&surf, &region, Arc::clone(&v), 1, &params, 192).unwrap();
        let pts1 = defect_sweep(&fam1, &eps_list);
        let floor = 10.0 * metric_defect(&surf, &fam1.deformation(0.0));
        let s1 = fit_order(&pts1, floor).slope.unwrap();
        assert!((1.7..=2.4).contains(&s1), "m=1 slope {s1:.2} ({pts1:?})");

        let fam2 = match_higher_order(&surf, &region, v, 2, &params, 192).unwrap();
        let pts2 = defect_sweep(&fam2, &eps_list);
        let s2 = fit_order(&pts2, floor).slope.unwrap();
        assert!((2.6..=3.4).contains(&s2), "m=2 slope {s2:.2} ({pts2:?})");
        // Bounded ratio defect/ε^{m+1} once above the floor.
        let ratios: Vec<f64> =
            pts2.iter().filter(|&&(_, d)| d > floor).map(|&(e, d)| d / e.powi(3)).collect();
        if ratios.len() >= 2 {
            let (lo, hi) = ratios
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
            assert!(hi / lo <= 5.0, "m=2 ratio spread {:.2} ({ratios:?})", hi / lo);
        }
    }

    #[test]
    fn rigid_matching_benchmark() {
        // For rigid V the matched family reproduces the rotation expansion:
        // defect slopes 2 (m=1) and ≥3 (m=2).
        let surf = saddle();
        let region = bench_region();
        let axis = V3::new(0.25, -0.15, 0.4);
        let sc = Arc::clone(&surf);
        let v_fn: Arc<dyn Fn(V2) -> f64 + Send + Sync> =
            Arc::new(move |x| axis.dot(&sc.normal(x)));
        let sc = Arc::clone(&surf);
        let dv_fn: Arc<dyn Fn(V2) -> V2 + Send + Sync> = Arc::new(move |x| {
            let s = sc.shape_operator_at(x);
            V2::new(
                axis.dot(&sc.embed_tangent(x, s.column(0).into_owned())),
                axis.dot(&sc.embed_tangent(x, s.column(1).into_owned())),
            )
        });
        let data = strain_data_from_scalar(&surf, &region, v_fn, dv_fn);
        let params = StrainParams { n: 128, ..Default::default() };
        let v = Arc::new(solve_isometry(&surf, &region, &data, &params, 128).unwrap());
        let fam2 = match_higher_order(&surf, &region, v, 2, &params, 192).unwrap();
        let pts = defect_sweep(&fam2, &[0.2, 0.1, 0.05, 0.025]);
        let floor = 10.0 * metric_defect(&surf, &fam2.deformation(0.0));
        let s2 = fit_order(&pts, floor).slope.unwrap();
        assert!(s2 >= 2.6, "rigid m=2 slope {s2:.2} ({pts:?})");
    }

    #[test]
    fn zero_family_is_inconclusive() {
        let pts = [(0.1, 0.0), (0.05, 0.0)];
        assert!(fit_order(&pts, 1e-14).slope.is_none());
    }
}

