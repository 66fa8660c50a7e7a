//! Region solvers and composite pasting.
//!
//! Each primitive region (`E`, rectangle, `P1`, `P2`) is meshed along its
//! data curve, split into contraction-sized sub-blocks, and solved by the
//! Picard sweeps in [`super::mesh`]. Composite regions (`Ξ1`, `Ξ2`, `Φ`)
//! are assembled in dependency order; each new patch takes its edge data
//! from already-solved patches — exactly at shared nodes where the grids
//! coincide, through windowed Lagrange interpolation otherwise.

use super::mesh::{diag_e_block, diag_p_block, rect_block, subdivide, BlockStats, ETrace, Mesh};
use super::{
    Curve2, Field, GoursatData, GoursatProblem, PatchGrid, RegionDescriptor, ScalarFn1,
    SolutionGrid, SolveReport,
};
use crate::error::{Error, Result};
use crate::interp;

/// Mesh resolution: number of segments along each primitive axis.
#[derive(Clone, Copy, Debug)]
pub struct GridSpec {
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 64 }
    }
}

/// Sup of `|f0| + |X|` over the sampled mesh (the contraction constant).
fn coeff_sup(m: &Mesh) -> f64 {
    let mut ct: f64 = 0.0;
    for k in 0..m.f0v.len() {
        ct = ct.max(m.f0v[k].abs() + m.c1v[k].hypot(m.c2v[k]));
    }
    ct
}

/// Implicit-trapezoid solve of the edge transport `v' = a + b v` along
/// ascending nodes `xs`, with `v(xs[0]) = v0`.
fn linear_edge_ode(xs: &[f64], a: &[f64], b: &[f64], v0: f64) -> Result<Vec<f64>> {
    let mut v = vec![0.0; xs.len()];
    v[0] = v0;
    for i in 1..xs.len() {
        let h = xs[i] - xs[i - 1];
        let den = 1.0 - 0.5 * h * b[i];
        if den.abs() < 1e-8 {
            return Err(Error::Numerical("edge transport step is singular".to_string()));
        }
        v[i] = (v[i - 1] * (1.0 + 0.5 * h * b[i - 1]) + 0.5 * h * (a[i - 1] + a[i])) / den;
    }
    Ok(v)
}

fn mesh_to_patch(m: &Mesh, label: &str) -> PatchGrid {
    let mut mask = vec![false; m.n1 * m.n2];
    for j in 0..m.n2 {
        for i in 0..m.n1 {
            mask[m.idx(i, j)] = m.valid(i, j);
        }
    }
    PatchGrid {
        label: label.to_string(),
        xs1: m.x1.clone(),
        xs2: m.x2.clone(),
        mask,
        w: m.w.clone(),
        wx1: m.wx1.clone(),
        wx2: m.wx2.clone(),
        wx12: m.eta.clone(),
    }
}

fn push_stats(rep: &mut SolveReport, stats: &[BlockStats]) {
    for s in stats {
        rep.iterations.push(s.iterations);
        rep.contraction_ratios.push(s.last_ratio);
        rep.gate_values.push(s.gate);
    }
}

/// Interpolates a field from the first patch whose bounding box and mask
/// admit the point.
fn eval_any(patches: &[&PatchGrid], f: Field, x1: f64, x2: f64) -> Result<f64> {
    for p in patches {
        if p.in_bbox(x1, x2, 1e-9) {
            if let Some(v) = p.eval(f, x1, x2) {
                return Ok(v);
            }
        }
    }
    Err(Error::Numerical(format!(
        "seam interpolation failed at ({x1:.6}, {x2:.6}): no patch covers the point"
    )))
}

fn require_ascending(xs: &[f64], what: &str) -> Result<()> {
    for i in 1..xs.len() {
        if xs[i] <= xs[i - 1] {
            return Err(Error::Characteristic(format!(
                "{what} is not strictly monotone on the mesh sample"
            )));
        }
    }
    Ok(())
}

/// Solves on `E(γ)`: mesh columns at `γ1(t_i)`, rows at `γ2(t_{N-j})`,
/// valid nodes `i + j ≥ N`, diagonal blocks along the curve followed by the
/// rectangles they unlock.
fn e_core(
    prob: &GoursatProblem,
    gamma: &Curve2,
    q0: &ScalarFn1,
    q1: &ScalarFn1,
    n: usize,
    single: bool,
) -> Result<(Mesh, Vec<BlockStats>)> {
    let ts = interp::linspace(0.0, gamma.t_end, n);
    let x1t: Vec<f64> = ts.iter().map(|&t| gamma.x1.val(t)).collect();
    let x2t: Vec<f64> = ts.iter().map(|&t| gamma.x2.val(t)).collect();
    require_ascending(&x1t, "gamma1")?;
    let x2desc: Vec<f64> = x2t.iter().rev().copied().collect();
    require_ascending(&x2desc, "reversed gamma2")?;

    let lcol: Vec<usize> = (0..=n).map(|j| n - j).collect();
    let brow: Vec<usize> = (0..=n).map(|i| n - i).collect();
    let mut m = Mesh::new(x1t.clone(), x2desc, lcol, brow, prob);

    let mut q0v = vec![0.0; n + 1];
    let mut bdx1 = vec![0.0; n + 1];
    let mut bdx2 = vec![0.0; n + 1];
    let mut psi_int = vec![0.0; n + 1];
    for (k, &t) in ts.iter().enumerate() {
        let (d1, d2) = gamma.tangent(t);
        let nn = d1 * d1 + d2 * d2;
        let q0p = q0.deriv(t);
        let q1v = q1.val(t);
        q0v[k] = q0.val(t);
        bdx1[k] = (d1 * q0p + d2 * q1v) / nn;
        bdx2[k] = (d2 * q0p - d1 * q1v) / nn;
        psi_int[k] = d2 * bdx2[k];
    }
    let psi = interp::cumtrapz(&ts, &psi_int);
    let tr = ETrace { q0: q0v, psi, bdx1, bdx2 };

    let ct = coeff_sup(&m);
    let cuts = if single { vec![0, n] } else { subdivide(&x1t, &x2t, ct) };
    let mut stats = Vec::new();
    for bi in 0..cuts.len() - 1 {
        let (c0, c1) = (cuts[bi], cuts[bi + 1]);
        stats.push(diag_e_block(&mut m, c0, c1, &tr)?);
        for bj in (0..bi).rev() {
            let (r0, r1) = (n - cuts[bj + 1], n - cuts[bj]);
            stats.push(rect_block(&mut m, c0, c1, r0, r1)?);
        }
    }
    Ok((m, stats))
}

/// Solves on `P1(β)`: columns and rows at the curve nodes, valid `i ≥ j`,
/// with `w`/`w_{x1}` node data on the bottom row and `w_{x2} = pv` on the
/// curve. Rectangles below each diagonal block are solved first.
fn p1_core(
    prob: &GoursatProblem,
    beta: &Curve2,
    pv: &[f64],
    bot_w: &[f64],
    bot_wx1: &[f64],
    n: usize,
    single: bool,
) -> Result<(Mesh, Vec<BlockStats>)> {
    let ss = interp::linspace(0.0, beta.t_end, n);
    let x1: Vec<f64> = ss.iter().map(|&s| beta.x1.val(s)).collect();
    let x2: Vec<f64> = ss.iter().map(|&s| beta.x2.val(s)).collect();
    require_ascending(&x1, "beta1")?;
    require_ascending(&x2, "beta2")?;

    let lcol: Vec<usize> = (0..=n).collect();
    let brow = vec![0usize; n + 1];
    let mut m = Mesh::new(x1, x2, lcol, brow, prob);

    for i in 0..=n {
        let k = m.idx(i, 0);
        m.w[k] = bot_w[i];
        m.wx1[k] = bot_wx1[i];
    }
    // Bottom-row w_{x2} by edge transport: its x1-derivative is the stated
    // cross derivative, with w and w_{x1} known on the row.
    let a: Vec<f64> = (0..=n)
        .map(|i| {
            let k = m.idx(i, 0);
            m.fv[k] + m.f0v[k] * m.w[k] + m.c1v[k] * m.wx1[k]
        })
        .collect();
    let b: Vec<f64> = (0..=n).map(|i| m.c2v[m.idx(i, 0)]).collect();
    let xs = m.x1.clone();
    let v = linear_edge_ode(&xs, &a, &b, pv[0])?;
    for i in 0..=n {
        let k = m.idx(i, 0);
        m.wx2[k] = v[i];
    }

    let ct = coeff_sup(&m);
    let cuts = if single { vec![0, n] } else { subdivide(&m.x1.clone(), &m.x2.clone(), ct) };
    let mut stats = Vec::new();
    for bi in 0..cuts.len() - 1 {
        let (c0, c1) = (cuts[bi], cuts[bi + 1]);
        for bj in 0..bi {
            stats.push(rect_block(&mut m, c0, c1, cuts[bj], cuts[bj + 1])?);
        }
        stats.push(diag_p_block(&mut m, c0, c1, pv)?);
    }
    Ok((m, stats))
}

/// Solves on an axis rectangle with node data (`w`, tangential derivative)
/// on the bottom row and left column.
fn rect_core(
    prob: &GoursatProblem,
    x1: Vec<f64>,
    x2: Vec<f64>,
    bot_w: &[f64],
    bot_wx1: &[f64],
    left_w: &[f64],
    left_wx2: &[f64],
    single: bool,
) -> Result<(Mesh, Vec<BlockStats>)> {
    require_ascending(&x1, "rect x1 axis")?;
    require_ascending(&x2, "rect x2 axis")?;
    let (n1, n2) = (x1.len() - 1, x2.len() - 1);
    let lcol = vec![0usize; n2 + 1];
    let brow = vec![0usize; n1 + 1];
    let mut m = Mesh::new(x1, x2, lcol, brow, prob);

    for j in 0..=n2 {
        let k = m.idx(0, j);
        m.w[k] = left_w[j];
        m.wx2[k] = left_wx2[j];
    }
    for i in 0..=n1 {
        let k = m.idx(i, 0);
        m.w[k] = bot_w[i];
        m.wx1[k] = bot_wx1[i];
    }
    // Bottom-row w_{x2} transport.
    let a: Vec<f64> = (0..=n1)
        .map(|i| {
            let k = m.idx(i, 0);
            m.fv[k] + m.f0v[k] * m.w[k] + m.c1v[k] * m.wx1[k]
        })
        .collect();
    let b: Vec<f64> = (0..=n1).map(|i| m.c2v[m.idx(i, 0)]).collect();
    let xs = m.x1.clone();
    let v = linear_edge_ode(&xs, &a, &b, left_wx2[0])?;
    for i in 0..=n1 {
        let k = m.idx(i, 0);
        m.wx2[k] = v[i];
    }
    // Left-column w_{x1} transport.
    let a: Vec<f64> = (0..=n2)
        .map(|j| {
            let k = m.idx(0, j);
            m.fv[k] + m.f0v[k] * m.w[k] + m.c2v[k] * m.wx2[k]
        })
        .collect();
    let b: Vec<f64> = (0..=n2).map(|j| m.c1v[m.idx(0, j)]).collect();
    let ys = m.x2.clone();
    let u = linear_edge_ode(&ys, &a, &b, bot_wx1[0])?;
    for j in 0..=n2 {
        let k = m.idx(0, j);
        m.wx1[k] = u[j];
    }

    let ct = coeff_sup(&m);
    let (cuts1, cuts2) = if single {
        (vec![0, n1], vec![0, n2])
    } else {
        (subdivide(&m.x1.clone(), &m.x1.clone(), ct), subdivide(&m.x2.clone(), &m.x2.clone(), ct))
    };
    let mut stats = Vec::new();
    for bi in 0..cuts1.len() - 1 {
        for bj in 0..cuts2.len() - 1 {
            stats.push(rect_block(&mut m, cuts1[bi], cuts1[bi + 1], cuts2[bj], cuts2[bj + 1])?);
        }
    }
    Ok((m, stats))
}

fn transpose_patch(p: &PatchGrid, label: &str) -> PatchGrid {
    let (n1, n2) = (p.xs1.len(), p.xs2.len());
    let sz = n1 * n2;
    let mut out = PatchGrid {
        label: label.to_string(),
        xs1: p.xs2.clone(),
        xs2: p.xs1.clone(),
        mask: vec![false; sz],
        w: vec![0.0; sz],
        wx1: vec![0.0; sz],
        wx2: vec![0.0; sz],
        wx12: vec![0.0; sz],
    };
    for b in 0..n1 {
        for a in 0..n2 {
            let ko = b * n2 + a;
            let kp = a * n1 + b;
            out.mask[ko] = p.mask[kp];
            out.w[ko] = p.w[kp];
            out.wx1[ko] = p.wx2[kp];
            out.wx2[ko] = p.wx1[kp];
            out.wx12[ko] = p.wx12[kp];
        }
    }
    out
}

/// Sup over seam nodes of the disagreement between a dependent patch's
/// stored `w` and the source patches it was pasted from.
fn seam_check(dep: &PatchGrid, nodes: &[(usize, usize)], src: &[&PatchGrid]) -> f64 {
    let mut worst: f64 = 0.0;
    for &(i, j) in nodes {
        let (x1, x2) = (dep.xs1[i], dep.xs2[j]);
        if let Ok(v) = eval_any(src, Field::W, x1, x2) {
            worst = worst.max((v - dep.w[dep.idx(i, j)]).abs());
        }
    }
    worst
}

pub fn solve_on_e(
    prob: &GoursatProblem,
    gamma: &Curve2,
    q0: &ScalarFn1,
    q1: &ScalarFn1,
    spec: &GridSpec,
) -> Result<SolutionGrid> {
    RegionDescriptor::E { gamma: gamma.clone() }.validate()?;
    let (m, stats) = e_core(prob, gamma, q0, q1, spec.n, false)?;
    let mut report = SolveReport::default();
    push_stats(&mut report, &stats);
    Ok(SolutionGrid { patches: vec![mesh_to_patch(&m, "E")], report })
}

/// Solves on `[z1, z1+a] × [z2, z2+b]` with `w = p1(x1)` on the bottom edge
/// and `w = p2(x2)` on the left edge (absolute coordinates).
pub fn solve_on_rect(
    prob: &GoursatProblem,
    z: (f64, f64),
    a: f64,
    b: f64,
    p1: &ScalarFn1,
    p2: &ScalarFn1,
    spec: &GridSpec,
) -> Result<SolutionGrid> {
    RegionDescriptor::Rect { z, a, b }.validate()?;
    let x1 = interp::linspace(z.0, z.0 + a, spec.n);
    let x2 = interp::linspace(z.1, z.1 + b, spec.n);
    let bot_w: Vec<f64> = x1.iter().map(|&x| p1.val(x)).collect();
    let bot_wx1: Vec<f64> = x1.iter().map(|&x| p1.deriv(x)).collect();
    let mut left_w: Vec<f64> = x2.iter().map(|&y| p2.val(y)).collect();
    let left_wx2: Vec<f64> = x2.iter().map(|&y| p2.deriv(y)).collect();
    let corner_gap = bot_w[0] - left_w[0];
    left_w[0] = bot_w[0];
    let (m, stats) = rect_core(prob, x1, x2, &bot_w, &bot_wx1, &left_w, &left_wx2, false)?;
    let mut report = SolveReport::default();
    report.compat_residuals.push(corner_gap);
    push_stats(&mut report, &stats);
    Ok(SolutionGrid { patches: vec![mesh_to_patch(&m, "R")], report })
}

/// Solves on `P1(β)` with `w_{x2}∘β = p` (a function of the curve
/// parameter) and `w = p1(x1)` on the bottom edge.
pub fn solve_on_p1(
    prob: &GoursatProblem,
    beta: &Curve2,
    p: &ScalarFn1,
    p1: &ScalarFn1,
    spec: &GridSpec,
) -> Result<SolutionGrid> {
    RegionDescriptor::P1 { beta: beta.clone() }.validate()?;
    let n = spec.n;
    let ss = interp::linspace(0.0, beta.t_end, n);
    let pv: Vec<f64> = ss.iter().map(|&s| p.val(s)).collect();
    let bot_w: Vec<f64> = ss.iter().map(|&s| p1.val(beta.x1.val(s))).collect();
    let bot_wx1: Vec<f64> = ss.iter().map(|&s| p1.deriv(beta.x1.val(s))).collect();
    let (m, stats) = p1_core(prob, beta, &pv, &bot_w, &bot_wx1, n, false)?;
    let mut report = SolveReport::default();
    push_stats(&mut report, &stats);
    Ok(SolutionGrid { patches: vec![mesh_to_patch(&m, "P1")], report })
}

/// Solves on `P2(β)` with `w_{x1}∘β = p` and `w = p2(x2)` on the left edge,
/// by transposing the plane and reusing the `P1` machinery.
pub fn solve_on_p2(
    prob: &GoursatProblem,
    beta: &Curve2,
    p: &ScalarFn1,
    p2: &ScalarFn1,
    spec: &GridSpec,
) -> Result<SolutionGrid> {
    RegionDescriptor::P2 { beta: beta.clone() }.validate()?;
    let n = spec.n;
    let ss = interp::linspace(0.0, beta.t_end, n);
    let pv: Vec<f64> = ss.iter().map(|&s| p.val(s)).collect();
    let bot_w: Vec<f64> = ss.iter().map(|&s| p2.val(beta.x2.val(s))).collect();
    let bot_wx1: Vec<f64> = ss.iter().map(|&s| p2.deriv(beta.x2.val(s))).collect();
    let prob_t = prob.transposed();
    let beta_t = Curve2 { x1: beta.x2.clone(), x2: beta.x1.clone(), t_end: beta.t_end };
    let (m, stats) = p1_core(&prob_t, &beta_t, &pv, &bot_w, &bot_wx1, n, false)?;
    let mut report = SolveReport::default();
    push_stats(&mut report, &stats);
    let patch = transpose_patch(&mesh_to_patch(&m, "P2"), "P2");
    Ok(SolutionGrid { patches: vec![patch], report })
}

/// Solves a primitive region as a single Picard block. Fails with a
/// contraction error when the domain exceeds the gate
/// `C_T · max(λ, λ²) ≤ 1/2`.
pub fn picard_solve_small(
    prob: &GoursatProblem,
    region: &RegionDescriptor,
    data: &GoursatData,
    spec: &GridSpec,
) -> Result<SolutionGrid> {
    region.validate()?;
    let mut report = SolveReport::default();
    let patch = match (region, data) {
        (RegionDescriptor::E { gamma }, GoursatData::E { q0, q1 }) => {
            let (m, stats) = e_core(prob, gamma, q0, q1, spec.n, true)?;
            push_stats(&mut report, &stats);
            mesh_to_patch(&m, "E")
        }
        (RegionDescriptor::Rect { z, a, b }, GoursatData::Rect { p1, p2 }) => {
            let x1 = interp::linspace(z.0, z.0 + a, spec.n);
            let x2 = interp::linspace(z.1, z.1 + b, spec.n);
            let bot_w: Vec<f64> = x1.iter().map(|&x| p1.val(x)).collect();
            let bot_wx1: Vec<f64> = x1.iter().map(|&x| p1.deriv(x)).collect();
            let left_w: Vec<f64> = x2.iter().map(|&y| p2.val(y)).collect();
            let left_wx2: Vec<f64> = x2.iter().map(|&y| p2.deriv(y)).collect();
            let (m, stats) = rect_core(prob, x1, x2, &bot_w, &bot_wx1, &left_w, &left_wx2, true)?;
            push_stats(&mut report, &stats);
            mesh_to_patch(&m, "R")
        }
        (RegionDescriptor::P1 { beta }, GoursatData::P1 { p, p1 }) => {
            let n = spec.n;
            let ss = interp::linspace(0.0, beta.t_end, n);
            let pv: Vec<f64> = ss.iter().map(|&s| p.val(s)).collect();
            let bw: Vec<f64> = ss.iter().map(|&s| p1.val(beta.x1.val(s))).collect();
            let bwx1: Vec<f64> = ss.iter().map(|&s| p1.deriv(beta.x1.val(s))).collect();
            let (m, stats) = p1_core(prob, beta, &pv, &bw, &bwx1, n, true)?;
            push_stats(&mut report, &stats);
            mesh_to_patch(&m, "P1")
        }
        (RegionDescriptor::P2 { beta }, GoursatData::P2 { p, p2 }) => {
            let n = spec.n;
            let ss = interp::linspace(0.0, beta.t_end, n);
            let pv: Vec<f64> = ss.iter().map(|&s| p.val(s)).collect();
            let bw: Vec<f64> = ss.iter().map(|&s| p2.val(beta.x2.val(s))).collect();
            let bwx1: Vec<f64> = ss.iter().map(|&s| p2.deriv(beta.x2.val(s))).collect();
            let prob_t = prob.transposed();
            let beta_t = Curve2 { x1: beta.x2.clone(), x2: beta.x1.clone(), t_end: beta.t_end };
            let (m, stats) = p1_core(&prob_t, &beta_t, &pv, &bw, &bwx1, n, true)?;
            push_stats(&mut report, &stats);
            transpose_patch(&mesh_to_patch(&m, "P2"), "P2")
        }
        _ => {
            return Err(Error::Config(
                "picard_solve_small accepts primitive regions with matching data".to_string(),
            ))
        }
    };
    Ok(SolutionGrid { patches: vec![patch], report })
}

/// Pastes `E(γ) ∪ P1(β) ∪ rectangle`; returns the patches in that order.
#[allow(clippy::too_many_arguments)]
fn assemble_xi1(
    prob: &GoursatProblem,
    beta: &Curve2,
    gamma: &Curve2,
    q0: &ScalarFn1,
    q1: &ScalarFn1,
    p: &ScalarFn1,
    n: usize,
    report: &mut SolveReport,
) -> Result<Vec<PatchGrid>> {
    let (me, se) = e_core(prob, gamma, q0, q1, n, false)?;
    push_stats(report, &se);
    let pe = mesh_to_patch(&me, "E");
    let y_top = gamma.x2.val(0.0);

    let ss = interp::linspace(0.0, beta.t_end, n);
    let pv: Vec<f64> = ss.iter().map(|&s| p.val(s)).collect();
    let bx1: Vec<f64> = ss.iter().map(|&s| beta.x1.val(s)).collect();
    let mut bot_w = Vec::with_capacity(n + 1);
    let mut bot_wx1 = Vec::with_capacity(n + 1);
    for &x in &bx1 {
        bot_w.push(eval_any(&[&pe], Field::W, x, y_top)?);
        bot_wx1.push(eval_any(&[&pe], Field::Wx1, x, y_top)?);
    }
    let (mp, sp) = p1_core(prob, beta, &pv, &bot_w, &bot_wx1, n, false)?;
    push_stats(report, &sp);
    let pp = mesh_to_patch(&mp, "P1");
    let seam_nodes: Vec<(usize, usize)> = (0..=n).map(|i| (i, 0)).collect();
    report.seam_max_err = report.seam_max_err.max(seam_check(&pp, &seam_nodes, &[&pe]));

    let mut patches = vec![pe, pp];
    let xl = beta.x1.val(beta.t_end);
    let xr = gamma.x1.val(gamma.t_end);
    if xr - xl > 1e-12 {
        let rx1 = interp::linspace(xl, xr, n);
        let rx2 = mp.x2.clone();
        let mut bw = Vec::with_capacity(n + 1);
        let mut bwx1 = Vec::with_capacity(n + 1);
        for &x in &rx1 {
            bw.push(eval_any(&[&patches[0]], Field::W, x, y_top)?);
            bwx1.push(eval_any(&[&patches[0]], Field::Wx1, x, y_top)?);
        }
        let lw: Vec<f64> = (0..=n).map(|j| mp.w[mp.idx(n, j)]).collect();
        let lwx2: Vec<f64> = (0..=n).map(|j| mp.wx2[mp.idx(n, j)]).collect();
        let (mr, sr) = rect_core(prob, rx1, rx2, &bw, &bwx1, &lw, &lwx2, false)?;
        push_stats(report, &sr);
        let pr = mesh_to_patch(&mr, "R1");
        let left_nodes: Vec<(usize, usize)> = (0..=n).map(|j| (0, j)).collect();
        report.seam_max_err = report
            .seam_max_err
            .max(seam_check(&pr, &left_nodes, &[&patches[1], &patches[0]]));
        patches.push(pr);
    }
    Ok(patches)
}

/// Solves the `P2(β̂)` piece hanging off the right edge `x1 = x_r` of the
/// already-solved patches, taking its left-edge data from them.
fn assemble_p2_off_edge(
    prob: &GoursatProblem,
    beta: &Curve2,
    p: &ScalarFn1,
    x_r: f64,
    sources: &[&PatchGrid],
    n: usize,
    report: &mut SolveReport,
) -> Result<PatchGrid> {
    let ss = interp::linspace(0.0, beta.t_end, n);
    let pv: Vec<f64> = ss.iter().map(|&s| p.val(s)).collect();
    let mut left_w = Vec::with_capacity(n + 1);
    let mut left_wx2 = Vec::with_capacity(n + 1);
    for &s in &ss {
        let y = beta.x2.val(s);
        left_w.push(eval_any(sources, Field::W, x_r, y)?);
        left_wx2.push(eval_any(sources, Field::Wx2, x_r, y)?);
    }
    let prob_t = prob.transposed();
    let beta_t = Curve2 { x1: beta.x2.clone(), x2: beta.x1.clone(), t_end: beta.t_end };
    let (mt, st) = p1_core(&prob_t, &beta_t, &pv, &left_w, &left_wx2, n, false)?;
    push_stats(report, &st);
    let patch = transpose_patch(&mesh_to_patch(&mt, "P2"), "P2");
    let left_nodes: Vec<(usize, usize)> = (0..=n).map(|j| (0, j)).collect();
    report.seam_max_err = report.seam_max_err.max(seam_check(&patch, &left_nodes, sources));
    Ok(patch)
}

/// Rectangle sitting on the full top row of a `P2` patch, with left-edge
/// data interpolated from the given sources; `y_top` is its upper extent.
fn assemble_rect_above_p2(
    prob: &GoursatProblem,
    p2_patch: &PatchGrid,
    y_top: f64,
    sources: &[&PatchGrid],
    n: usize,
    report: &mut SolveReport,
    label: &str,
) -> Result<Option<PatchGrid>> {
    let n2 = p2_patch.xs2.len() - 1;
    let y0 = p2_patch.xs2[n2];
    if y_top - y0 <= 1e-12 {
        return Ok(None);
    }
    let rx1 = p2_patch.xs1.clone();
    let rx2 = interp::linspace(y0, y_top, n);
    let n2_rect = rx2.len();
    let m1 = rx1.len();
    let bot_w: Vec<f64> = (0..m1).map(|i| p2_patch.w[p2_patch.idx(i, n2)]).collect();
    let bot_wx1: Vec<f64> = (0..m1).map(|i| p2_patch.wx1[p2_patch.idx(i, n2)]).collect();
    let mut left_w = Vec::with_capacity(n + 1);
    let mut left_wx2 = Vec::with_capacity(n + 1);
    for &y in &rx2 {
        left_w.push(eval_any(sources, Field::W, rx1[0], y)?);
        left_wx2.push(eval_any(sources, Field::Wx2, rx1[0], y)?);
    }
    let (mr, sr) = rect_core(prob, rx1, rx2, &bot_w, &bot_wx1, &left_w, &left_wx2, false)?;
    push_stats(report, &sr);
    let patch = mesh_to_patch(&mr, label);
    let left_nodes: Vec<(usize, usize)> = (0..n2_rect).map(|j| (0, j)).collect();
    report.seam_max_err = report.seam_max_err.max(seam_check(&patch, &left_nodes, sources));
    Ok(Some(patch))
}

/// Solves any region descriptor, pasting composites from primitives in
/// dependency order.
pub fn solve_on_composite(
    prob: &GoursatProblem,
    region: &RegionDescriptor,
    data: &GoursatData,
    spec: &GridSpec,
) -> Result<SolutionGrid> {
    region.validate()?;
    let n = spec.n;
    match (region, data) {
        (RegionDescriptor::E { gamma }, GoursatData::E { q0, q1 }) => {
            solve_on_e(prob, gamma, q0, q1, spec)
        }
        (RegionDescriptor::Rect { z, a, b }, GoursatData::Rect { p1, p2 }) => {
            solve_on_rect(prob, *z, *a, *b, p1, p2, spec)
        }
        (RegionDescriptor::P1 { beta }, GoursatData::P1 { p, p1 }) => {
            solve_on_p1(prob, beta, p, p1, spec)
        }
        (RegionDescriptor::P2 { beta }, GoursatData::P2 { p, p2 }) => {
            solve_on_p2(prob, beta, p, p2, spec)
        }
        (RegionDescriptor::Xi1 { beta, gamma }, GoursatData::Xi1 { q0, q1, p }) => {
            let mut report = SolveReport::default();
            report.compat_residuals =
                super::diag::check_compatibility_order1(region, data).residuals;
            let patches = assemble_xi1(prob, beta, gamma, q0, q1, p, n, &mut report)?;
            Ok(SolutionGrid { patches, report })
        }
        (RegionDescriptor::Xi2 { gamma, beta }, GoursatData::Xi2 { q0, q1, p }) => {
            let mut report = SolveReport::default();
            report.compat_residuals =
                super::diag::check_compatibility_order1(region, data).residuals;
            let (me, se) = e_core(prob, gamma, q0, q1, n, false)?;
            push_stats(&mut report, &se);
            let pe = mesh_to_patch(&me, "E");
            let x_r = gamma.x1.val(gamma.t_end);
            let p2_patch = assemble_p2_off_edge(prob, beta, p, x_r, &[&pe], n, &mut report)?;
            let y_top = gamma.x2.val(0.0);
            let rect =
                assemble_rect_above_p2(prob, &p2_patch, y_top, &[&pe], n, &mut report, "R2")?;
            let mut patches = vec![pe, p2_patch];
            if let Some(r) = rect {
                patches.push(r);
            }
            Ok(SolutionGrid { patches, report })
        }
        (
            RegionDescriptor::Phi { beta, gamma, beta_hat },
            GoursatData::Phi { q0, q1, p_beta, p_beta_hat },
        ) => {
            let mut report = SolveReport::default();
            report.compat_residuals =
                super::diag::check_compatibility_order1(region, data).residuals;
            let mut patches =
                assemble_xi1(prob, beta, gamma, q0, q1, p_beta, n, &mut report)?;
            let x_r = gamma.x1.val(gamma.t_end);
            let sources: Vec<&PatchGrid> = patches.iter().collect();
            let p2_patch =
                assemble_p2_off_edge(prob, beta_hat, p_beta_hat, x_r, &sources, n, &mut report)?;
            drop(sources);
            let y_top = beta.x2.val(beta.t_end);
            let sources: Vec<&PatchGrid> = patches.iter().collect();
            let rect = assemble_rect_above_p2(
                prob, &p2_patch, y_top, &sources, n, &mut report, "R2",
            )?;
            drop(sources);
            patches.push(p2_patch);
            if let Some(r) = rect {
                patches.push(r);
            }
            Ok(SolutionGrid { patches, report })
        }
        _ => Err(Error::Config(
            "boundary data variant does not match the region descriptor".to_string(),
        )),
    }
}
