//! Manufactured-solution tests for the planar characteristic solver.
//!
//! The reference field is `w*(x, y) = sin(x)·e^{y/2}`; the source term is
//! chosen so that `w*` solves `w_{x1x2} = f + f0 w + X¹ w_{x1} + X² w_{x2}`
//! with fixed constant lower-order coefficients.

use super::*;
use crate::goursat::{
    check_compatibility_order1, picard_solve_small, solve_on_composite, solve_on_e, solve_on_p1,
    solve_on_p2, solve_on_rect, trace_diagnostics, GridSpec,
};

const F0: f64 = 0.3;
const C1: f64 = -0.2;
const C2: f64 = 0.1;

fn wst(x: f64, y: f64) -> f64 {
    x.sin() * (0.5 * y).exp()
}
fn wst_x1(x: f64, y: f64) -> f64 {
    x.cos() * (0.5 * y).exp()
}
fn wst_x2(x: f64, y: f64) -> f64 {
    0.5 * x.sin() * (0.5 * y).exp()
}
fn wst_x12(x: f64, y: f64) -> f64 {
    0.5 * x.cos() * (0.5 * y).exp()
}

fn mfg_problem() -> GoursatProblem {
    GoursatProblem {
        f: CoeffField::new(|x, y| {
            wst_x12(x, y) - F0 * wst(x, y) - C1 * wst_x1(x, y) - C2 * wst_x2(x, y)
        }),
        f0: CoeffField::new(|_, _| F0),
        x1c: CoeffField::new(|_, _| C1),
        x2c: CoeffField::new(|_, _| C2),
    }
}

fn line_curve(a1: f64, d1: f64, a2: f64, d2: f64, t_end: f64) -> Curve2 {
    Curve2 {
        x1: ScalarFn1::with_deriv(move |t| a1 + d1 * t, move |_| d1),
        x2: ScalarFn1::with_deriv(move |t| a2 + d2 * t, move |_| d2),
        t_end,
    }
}

fn gamma_std() -> Curve2 {
    line_curve(0.0, 1.0, 0.0, -1.0, 1.0)
}

/// `(q0, q1)` data of `w*` on the standard curve `γ(t) = (t, -t)`.
fn e_data_std() -> (ScalarFn1, ScalarFn1) {
    let q0 = ScalarFn1::with_deriv(|t| wst(t, -t), |t| wst_x1(t, -t) - wst_x2(t, -t));
    let q1 = ScalarFn1::new(|t| -wst_x1(t, -t) - wst_x2(t, -t));
    (q0, q1)
}

/// `w_{x2}` datum of `w*` along a straight curve.
fn p_data_on(c: &Curve2, which_x1: bool) -> ScalarFn1 {
    let c = c.clone();
    ScalarFn1::new(move |s| {
        let (x, y) = c.point(s);
        if which_x1 {
            wst_x1(x, y)
        } else {
            wst_x2(x, y)
        }
    })
}

fn sup_err(sol: &SolutionGrid, field: Field, exact: fn(f64, f64) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for p in &sol.patches {
        let vals = match field {
            Field::W => &p.w,
            Field::Wx1 => &p.wx1,
            Field::Wx2 => &p.wx2,
            Field::Wx12 => &p.wx12,
        };
        for j in 0..p.xs2.len() {
            for i in 0..p.xs1.len() {
                let k = p.idx(i, j);
                if p.mask[k] {
                    worst = worst.max((vals[k] - exact(p.xs1[i], p.xs2[j])).abs());
                }
            }
        }
    }
    worst
}

fn sup_err_all(sol: &SolutionGrid) -> f64 {
    sup_err(sol, Field::W, wst)
        .max(sup_err(sol, Field::Wx1, wst_x1))
        .max(sup_err(sol, Field::Wx2, wst_x2))
}

fn check_report(rep: &SolveReport) {
    for &g in &rep.gate_values {
        assert!(g <= 0.5 + 1e-9, "contraction gate exceeded: {g}");
    }
    for &r in &rep.contraction_ratios {
        assert!(r <= 0.75, "contraction ratio too large: {r}");
    }
}

#[test]
fn pure_wave_is_reproduced_exactly_on_e() {
    // w = x1² + x2² solves the homogeneous wave equation, and all boundary
    // integrands are linear in t, so the trapezoid operator is exact.
    let prob = GoursatProblem::pure(CoeffField::zero());
    let q0 = ScalarFn1::with_deriv(|t| 2.0 * t * t, |t| 4.0 * t);
    let q1 = ScalarFn1::zero();
    let sol = solve_on_e(&prob, &gamma_std(), &q0, &q1, &GridSpec { n: 32 }).unwrap();
    let e = sup_err(&sol, Field::W, |x, y| x * x + y * y)
        .max(sup_err(&sol, Field::Wx1, |x, _| 2.0 * x))
        .max(sup_err(&sol, Field::Wx2, |_, y| 2.0 * y));
    assert!(e < 1e-10, "pure wave error {e}");
}

#[test]
fn e_solver_is_second_order() {
    let prob = mfg_problem();
    let (q0, q1) = e_data_std();
    let mut errs = Vec::new();
    for n in [16usize, 32] {
        let sol = solve_on_e(&prob, &gamma_std(), &q0, &q1, &GridSpec { n }).unwrap();
        check_report(&sol.report);
        errs.push(sup_err_all(&sol));
        assert!(sol.equation_residual() < 1e-2);
    }
    let order = (errs[0] / errs[1]).log2();
    assert!(errs[1] < 1e-3, "error too large: {:?}", errs);
    assert!((1.7..=2.3).contains(&order), "order {order} from {errs:?}");
}

#[test]
fn rect_solver_matches_manufactured_solution() {
    let prob = mfg_problem();
    let z = (0.2, -0.5);
    let p1 = ScalarFn1::with_deriv(move |x| wst(x, z.1), move |x| wst_x1(x, z.1));
    let p2 = ScalarFn1::with_deriv(move |y| wst(z.0, y), move |y| wst_x2(z.0, y));
    let mut errs = Vec::new();
    for n in [16usize, 32] {
        let sol = solve_on_rect(&prob, z, 1.0, 0.8, &p1, &p2, &GridSpec { n }).unwrap();
        check_report(&sol.report);
        errs.push(sup_err_all(&sol));
    }
    let order = (errs[0] / errs[1]).log2();
    assert!(errs[1] < 1e-3, "error too large: {:?}", errs);
    assert!((1.7..=2.3).contains(&order), "order {order} from {errs:?}");
}

#[test]
fn p1_solver_matches_manufactured_solution() {
    let prob = mfg_problem();
    let beta = line_curve(0.0, 1.0, 0.0, 0.8, 1.0);
    let p = p_data_on(&beta, false);
    let p1 = ScalarFn1::with_deriv(|x| wst(x, 0.0), |x| wst_x1(x, 0.0));
    let mut errs = Vec::new();
    for n in [16usize, 32] {
        let sol = solve_on_p1(&prob, &beta, &p, &p1, &GridSpec { n }).unwrap();
        check_report(&sol.report);
        errs.push(sup_err_all(&sol));
    }
    let order = (errs[0] / errs[1]).log2();
    assert!(errs[1] < 1e-3, "error too large: {:?}", errs);
    assert!((1.7..=2.3).contains(&order), "order {order} from {errs:?}");
}

#[test]
fn p2_solver_matches_manufactured_solution() {
    let prob = mfg_problem();
    let beta = line_curve(0.0, 1.0, 0.0, 0.8, 1.0);
    let p = p_data_on(&beta, true);
    let p2 = ScalarFn1::with_deriv(|y| wst(0.0, y), |y| wst_x2(0.0, y));
    let sol = solve_on_p2(&prob, &beta, &p, &p2, &GridSpec { n: 32 }).unwrap();
    check_report(&sol.report);
    let e = sup_err_all(&sol);
    assert!(e < 1e-3, "P2 error {e}");
}

#[test]
fn xi1_composite_is_consistent_and_accurate() {
    let prob = mfg_problem();
    let gamma = gamma_std();
    let beta = line_curve(0.0, 0.4, 0.0, 0.6, 1.0);
    let (q0, q1) = e_data_std();
    let p = p_data_on(&beta, false);
    let region = RegionDescriptor::Xi1 { beta: beta.clone(), gamma: gamma.clone() };
    let data = GoursatData::Xi1 { q0, q1, p };
    let sol = solve_on_composite(&prob, &region, &data, &GridSpec { n: 32 }).unwrap();
    check_report(&sol.report);
    assert_eq!(sol.patches.len(), 3);
    assert!(sol.report.seam_max_err < 1e-9, "seam error {}", sol.report.seam_max_err);
    let e = sup_err_all(&sol);
    assert!(e < 5e-3, "Xi1 error {e}");
    assert!(sol.report.compat_residuals[0].abs() < 1e-10);
    // Interior spot checks via interpolation across patches.
    for &(x, y) in &[(0.3, 0.3), (0.7, 0.2), (0.5, -0.3), (0.9, 0.5)] {
        let v = sol.eval(Field::W, x, y).unwrap();
        assert!((v - wst(x, y)).abs() < 5e-3, "eval at ({x},{y})");
    }
}

#[test]
fn xi2_composite_is_consistent_and_accurate() {
    let prob = mfg_problem();
    let gamma = gamma_std();
    let beta = line_curve(1.0, 0.5, -1.0, 0.7, 1.0);
    let (q0, q1) = e_data_std();
    let p = p_data_on(&beta, true);
    let region = RegionDescriptor::Xi2 { gamma: gamma.clone(), beta: beta.clone() };
    let data = GoursatData::Xi2 { q0, q1, p };
    let sol = solve_on_composite(&prob, &region, &data, &GridSpec { n: 32 }).unwrap();
    check_report(&sol.report);
    assert!(sol.report.seam_max_err < 1e-9, "seam error {}", sol.report.seam_max_err);
    let e = sup_err_all(&sol);
    assert!(e < 5e-3, "Xi2 error {e}");
    assert!(sol.report.compat_residuals[0].abs() < 1e-10);
    for &(x, y) in &[(1.2, -0.6), (1.1, -0.2), (1.4, -0.35)] {
        let v = sol.eval(Field::W, x, y).unwrap();
        assert!((v - wst(x, y)).abs() < 5e-3, "eval at ({x},{y})");
    }
}

#[test]
fn phi_composite_is_consistent_and_accurate() {
    let prob = mfg_problem();
    let gamma = gamma_std();
    let beta = line_curve(0.0, 0.4, 0.0, 0.6, 1.0);
    let beta_hat = line_curve(1.0, 0.5, -1.0, 0.6, 1.0);
    let (q0, q1) = e_data_std();
    let region = RegionDescriptor::Phi {
        beta: beta.clone(),
        gamma: gamma.clone(),
        beta_hat: beta_hat.clone(),
    };
    let data = GoursatData::Phi {
        q0,
        q1,
        p_beta: p_data_on(&beta, false),
        p_beta_hat: p_data_on(&beta_hat, true),
    };
    let sol = solve_on_composite(&prob, &region, &data, &GridSpec { n: 32 }).unwrap();
    check_report(&sol.report);
    assert_eq!(sol.patches.len(), 5);
    assert!(sol.report.seam_max_err < 1e-9, "seam error {}", sol.report.seam_max_err);
    let e = sup_err_all(&sol);
    assert!(e < 5e-3, "Phi error {e}");
    for r in &sol.report.compat_residuals {
        assert!(r.abs() < 1e-10);
    }
    for &(x, y) in &[(0.3, 0.3), (0.7, 0.2), (1.2, -0.7), (1.2, 0.0), (1.4, 0.4)] {
        let v = sol.eval(Field::W, x, y).unwrap();
        assert!((v - wst(x, y)).abs() < 5e-3, "eval at ({x},{y})");
    }
}

#[test]
fn solver_is_linear_in_data_and_source() {
    // Solutions of the linear problem superpose: solving with summed data
    // and source reproduces the sum of the individual solutions.
    let base = mfg_problem();
    let fa = CoeffField::new(|x, y| {
        -(F0 * (x * x + y * y)) - C1 * 2.0 * x - C2 * 2.0 * y
    });
    let prob_a = GoursatProblem { f: fa.clone(), ..base.clone() };
    let fsum = {
        let fb = base.f.clone();
        CoeffField::new(move |x, y| fa.val(x, y) + fb.val(x, y))
    };
    let prob_sum = GoursatProblem { f: fsum, ..base.clone() };

    let gamma = gamma_std();
    let q0a = ScalarFn1::with_deriv(|t| 2.0 * t * t, |t| 4.0 * t);
    let q1a = ScalarFn1::zero();
    let (q0b, q1b) = e_data_std();
    let spec = GridSpec { n: 24 };
    let sa = solve_on_e(&prob_a, &gamma, &q0a, &q1a, &spec).unwrap();
    let sb = solve_on_e(&base, &gamma, &q0b, &q1b, &spec).unwrap();
    let q0s = {
        let (a, b) = (q0a.clone(), q0b.clone());
        ScalarFn1::with_deriv(move |t| a.val(t) + b.val(t), {
            let (a, b) = (q0a.clone(), q0b.clone());
            move |t| a.deriv(t) + b.deriv(t)
        })
    };
    let q1s = {
        let (a, b) = (q1a.clone(), q1b.clone());
        ScalarFn1::new(move |t| a.val(t) + b.val(t))
    };
    let ss = solve_on_e(&prob_sum, &gamma, &q0s, &q1s, &spec).unwrap();
    let (pa, pb, ps) = (&sa.patches[0], &sb.patches[0], &ss.patches[0]);
    let mut worst: f64 = 0.0;
    for k in 0..ps.w.len() {
        if ps.mask[k] {
            worst = worst.max((ps.w[k] - pa.w[k] - pb.w[k]).abs());
        }
    }
    assert!(worst < 1e-9, "superposition defect {worst}");
}

#[test]
fn rect_corner_mismatch_is_recorded() {
    let prob = GoursatProblem::pure(CoeffField::zero());
    let p1 = ScalarFn1::with_deriv(|x| x, |_| 1.0);
    let p2 = ScalarFn1::with_deriv(|y| y + 1e-3, |_| 1.0);
    let sol = solve_on_rect(&prob, (0.0, 0.0), 0.5, 0.5, &p1, &p2, &GridSpec { n: 16 }).unwrap();
    let r = sol.report.compat_residuals[0].abs();
    assert!((0.9e-3..=1.1e-3).contains(&r), "corner residual {r}");
}

#[test]
fn trace_diagnostic_matches_closed_form() {
    // For w = x1² + x2² along γ(t) = (t, -t) on [0, 1]:
    //   ‖w∘γ‖² = ∫ 4t⁴ = 4/5, ‖∇w∘γ‖² = ∫ 8t² = 8/3,
    //   weighted second-derivative term = ∫ 4t + 4(1-t) = 4.
    let prob = GoursatProblem::pure(CoeffField::zero());
    let q0 = ScalarFn1::with_deriv(|t| 2.0 * t * t, |t| 4.0 * t);
    let q1 = ScalarFn1::zero();
    let gamma = gamma_std();
    let sol = solve_on_e(&prob, &gamma, &q0, &q1, &GridSpec { n: 32 }).unwrap();
    let d = trace_diagnostics(&sol, &gamma).unwrap();
    assert!((d.l2_w - 0.8).abs() < 2e-4, "l2_w = {}", d.l2_w);
    assert!((d.l2_grad - 8.0 / 3.0).abs() < 1e-3, "l2_grad = {}", d.l2_grad);
    assert!((d.l2_second_weighted - 4.0).abs() < 1e-3, "second = {}", d.l2_second_weighted);
    assert!((d.total - (0.8 + 8.0 / 3.0 + 4.0)).abs() < 2e-3);
}

#[test]
fn single_block_solver_rejects_supercritical_domains() {
    let prob = GoursatProblem {
        f: CoeffField::zero(),
        f0: CoeffField::new(|_, _| 5.0),
        x1c: CoeffField::zero(),
        x2c: CoeffField::zero(),
    };
    let gamma = line_curve(0.0, 1.0, 0.0, -1.0, 3.0);
    let region = RegionDescriptor::E { gamma };
    let data = GoursatData::E { q0: ScalarFn1::zero(), q1: ScalarFn1::zero() };
    let err = match picard_solve_small(&prob, &region, &data, &GridSpec { n: 16 }) {
        Err(e) => e,
        Ok(_) => panic!("supercritical domain was accepted"),
    };
    assert!(matches!(err, crate::Error::Contraction(_)), "unexpected error: {err}");
}

#[test]
fn order1_compatibility_residual_detects_mismatched_data() {
    let gamma = gamma_std();
    let beta = line_curve(0.0, 0.4, 0.0, 0.6, 1.0);
    let (q0, q1) = e_data_std();
    let region = RegionDescriptor::Xi1 { beta: beta.clone(), gamma };
    let shift = 2e-3;
    let p_bad = {
        let p = p_data_on(&beta, false);
        ScalarFn1::new(move |s| p.val(s) + shift)
    };
    let rep = check_compatibility_order1(&region, &GoursatData::Xi1 { q0, q1, p: p_bad });
    // |γ'(0)|² = 2, so the residual is twice the datum shift.
    assert!((rep.residuals[0] - 2.0 * shift).abs() < 1e-9, "residual {:?}", rep.residuals);
}
