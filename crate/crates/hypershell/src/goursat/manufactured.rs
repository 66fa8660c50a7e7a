//! Built-in manufactured verification problems for the characteristic
//! solver, shared by the verification suites and the acceptance tests.
//!
//! The reference field is `w*(x, y) = sin(x)·e^{y/2}`; the source term is
//! chosen so that `w*` solves `w_{x1x2} = f + f0 w + X¹ w_{x1} + X² w_{x2}`
//! with fixed constant lower-order coefficients. Each case solves the same
//! problem on one of the six planar region types at a list of grid
//! resolutions and records sup errors (over `w, w_{x1}, w_{x2}`) together
//! with the worst observed Picard contraction ratio and gate value.

use super::{
    solve_on_composite, solve_on_e, solve_on_p1, solve_on_p2, solve_on_rect, CoeffField, Curve2,
    Field, GoursatData, GoursatProblem, GridSpec, RegionDescriptor, ScalarFn1, SolutionGrid,
};
use crate::error::Result;

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

fn e_data_std() -> (ScalarFn1, ScalarFn1) {
    let q0 = ScalarFn1::with_deriv(|t| wst(t, -t), |t| wst_x1(t, -t) - wst_x2(t, -t));
    let q1 = ScalarFn1::new(|t| -wst_x1(t, -t) - wst_x2(t, -t));
    (q0, q1)
}

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

/// Outcome of one manufactured case across the resolution list.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    /// Sup errors per resolution, same order as the input list.
    pub errors: Vec<f64>,
    /// Least-squares slope of log₂(error) against log₂(Δ).
    pub order: f64,
    /// Worst Picard contraction ratio observed across resolutions.
    pub worst_contraction: f64,
    /// Worst contraction gate value `C_T·max(λ, λ²)`.
    pub worst_gate: f64,
}

fn fit_order(ns: &[usize], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        ns.iter().zip(errors).map(|(&n, &e)| (-(n as f64).log2(), e.log2())).collect();
    let m = pts.len() as f64;
    let (sx, sy): (f64, f64) = (pts.iter().map(|p| p.0).sum(), pts.iter().map(|p| p.1).sum());
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}

/// Runs the six-region manufactured suite at the given resolutions.
pub fn run_manufactured_suite(ns: &[usize]) -> Result<Vec<ManufacturedCase>> {
    let prob = mfg_problem();
    let gamma = gamma_std();
    let (q0, q1) = e_data_std();

    type Solver = Box<dyn Fn(&GridSpec) -> Result<SolutionGrid>>;
    let mut cases: Vec<(&'static str, Solver)> = Vec::new();

    {
        let (prob, gamma, q0, q1) = (prob.clone(), gamma.clone(), q0.clone(), q1.clone());
        cases.push((
            "triangle E(gamma)",
            Box::new(move |spec| solve_on_e(&prob, &gamma, &q0, &q1, spec)),
        ));
    }
    {
        let prob = prob.clone();
        let z = (0.2, -0.5);
        let p1 = ScalarFn1::with_deriv(move |x| wst(x, z.1), move |x| wst_x1(x, z.1));
        let p2 = ScalarFn1::with_deriv(move |y| wst(z.0, y), move |y| wst_x2(z.0, y));
        cases.push((
            "rectangle R(z,a,b)",
            Box::new(move |spec| solve_on_rect(&prob, z, 1.0, 0.8, &p1, &p2, spec)),
        ));
    }
    {
        let prob = prob.clone();
        let beta = line_curve(0.0, 1.0, 0.0, 0.8, 1.0);
        let p = p_data_on(&beta, false);
        let p1 = ScalarFn1::with_deriv(|x| wst(x, 0.0), |x| wst_x1(x, 0.0));
        cases.push((
            "curved sector P1(beta)",
            Box::new(move |spec| solve_on_p1(&prob, &beta, &p, &p1, spec)),
        ));
    }
    {
        let prob = prob.clone();
        let beta = line_curve(0.0, 1.0, 0.0, 0.8, 1.0);
        let p = p_data_on(&beta, true);
        let p2 = ScalarFn1::with_deriv(|y| wst(0.0, y), |y| wst_x2(0.0, y));
        cases.push((
            "curved sector P2(beta)",
            Box::new(move |spec| solve_on_p2(&prob, &beta, &p, &p2, spec)),
        ));
    }
    {
        let prob = prob.clone();
        let beta = line_curve(0.0, 0.4, 0.0, 0.6, 1.0);
        let region = RegionDescriptor::Xi1 { beta: beta.clone(), gamma: gamma.clone() };
        let data =
            GoursatData::Xi1 { q0: q0.clone(), q1: q1.clone(), p: p_data_on(&beta, false) };
        cases.push((
            "composite Xi1(beta,gamma)",
            Box::new(move |spec| solve_on_composite(&prob, &region, &data, spec)),
        ));
    }
    {
        let prob = prob.clone();
        let beta = line_curve(0.0, 0.4, 0.0, 0.6, 1.0);
        let beta_hat = line_curve(1.0, 0.5, -1.0, 0.6, 1.0);
        let region = RegionDescriptor::Phi {
            beta: beta.clone(),
            gamma: gamma.clone(),
            beta_hat: beta_hat.clone(),
        };
        let data = GoursatData::Phi {
            q0: q0.clone(),
            q1: q1.clone(),
            p_beta: p_data_on(&beta, false),
            p_beta_hat: p_data_on(&beta_hat, true),
        };
        cases.push((
            "full region Phi(beta,gamma,beta_hat)",
            Box::new(move |spec| solve_on_composite(&prob, &region, &data, spec)),
        ));
    }

    let mut out = Vec::with_capacity(cases.len());
    for (name, solver) in cases {
        let mut errors = Vec::with_capacity(ns.len());
        let mut worst_contraction = 0.0f64;
        let mut worst_gate = 0.0f64;
        for &n in ns {
            let sol = solver(&GridSpec { n })?;
            errors.push(sup_err_all(&sol));
            for &r in &sol.report.contraction_ratios {
                worst_contraction = worst_contraction.max(r);
            }
            for &g in &sol.report.gate_values {
                worst_gate = worst_gate.max(g);
            }
        }
        let order = fit_order(ns, &errors);
        out.push(ManufacturedCase { name, errors, order, worst_contraction, worst_gate });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_converges_at_second_order() {
        let cases = run_manufactured_suite(&[16, 32, 64]).unwrap();
        assert_eq!(cases.len(), 6);
        for c in &cases {
            eprintln!(
                "{}: errors {:?} order {:.3} contraction {:.3} gate {:.3}",
                c.name, c.errors, c.order, c.worst_contraction, c.worst_gate
            );
            assert!((1.7..=2.3).contains(&c.order), "{}: order {}", c.name, c.order);
            assert!(c.worst_contraction <= 0.6, "{}: contraction {}", c.name, c.worst_contraction);
        }
    }
}
