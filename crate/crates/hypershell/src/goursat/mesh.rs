//! Characteristic-aligned node arrays and the Picard block sweeps.
//!
//! A [`Mesh`] owns the full node set of one region primitive (`E`, `P1`, or
//! a rectangle) together with sampled coefficient arrays and the solution
//! fields. Region solvers carve the mesh into contraction-sized blocks and
//! run [`diag_e_block`] / [`diag_p_block`] / [`rect_block`] in dependency
//! order; every block iterates the exact integral operator of its problem
//! class with trapezoid quadrature (second order) until the sup-change
//! stalls.

use super::{CoeffField, GoursatProblem};
use crate::error::{Error, Result};

/// Relative fixed-point stall tolerance.
const FIX_TOL: f64 = 1e-13;
/// Maximum Picard sweeps per block.
const MAX_ITERS: usize = 200;

pub struct Mesh {
    pub n1: usize,
    pub n2: usize,
    /// Ascending axis nodes.
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// First valid column per row.
    pub lcol: Vec<usize>,
    /// First valid row per column (curve row for `E`, 0 otherwise).
    pub brow: Vec<usize>,
    pub w: Vec<f64>,
    pub wx1: Vec<f64>,
    pub wx2: Vec<f64>,
    pub eta: Vec<f64>,
    // Sampled coefficients.
    pub fv: Vec<f64>,
    pub f0v: Vec<f64>,
    pub c1v: Vec<f64>,
    pub c2v: Vec<f64>,
}

/// Result of one block sweep.
pub struct BlockStats {
    pub iterations: usize,
    pub last_ratio: f64,
    pub gate: f64,
}

impl Mesh {
    pub fn new(x1: Vec<f64>, x2: Vec<f64>, lcol: Vec<usize>, brow: Vec<usize>, p: &GoursatProblem) -> Self {
        let (n1, n2) = (x1.len(), x2.len());
        let sample = |c: &CoeffField| -> Vec<f64> {
            let x1r = &x1;
            let x2r = &x2;
            let rows = crate::par::map_indexed(n2, |j| {
                (0..n1).map(|i| c.val(x1r[i], x2r[j])).collect::<Vec<f64>>()
            });
            rows.concat()
        };
        Mesh {
            fv: sample(&p.f),
            f0v: sample(&p.f0),
            c1v: sample(&p.x1c),
            c2v: sample(&p.x2c),
            w: vec![0.0; n1 * n2],
            wx1: vec![0.0; n1 * n2],
            wx2: vec![0.0; n1 * n2],
            eta: vec![0.0; n1 * n2],
            n1,
            n2,
            x1,
            x2,
            lcol,
            brow,
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n1 + i
    }

    pub fn valid(&self, i: usize, j: usize) -> bool {
        i >= self.lcol[j] && j >= self.brow[i]
    }

    /// Recomputes `η = f + f0 w + X¹ w_{x1} + X² w_{x2}` on a block.
    fn refresh_eta(&mut self, c0: usize, c1: usize, r0: usize, r1: usize) {
        for j in r0..=r1 {
            for i in c0.max(self.lcol[j])..=c1 {
                let k = self.idx(i, j);
                self.eta[k] =
                    self.fv[k] + self.f0v[k] * self.w[k] + self.c1v[k] * self.wx1[k] + self.c2v[k] * self.wx2[k];
            }
        }
    }

    /// Cumulative row integrals `R_j(i) = ∫_{x1[lcol[j]]}^{x1[i]} η(·, x2_j)`
    /// for rows `r0..=r1`, columns up to `c1`.
    fn row_cums(&self, r0: usize, r1: usize, c1: usize) -> Vec<Vec<f64>> {
        (r0..=r1)
            .map(|j| {
                let start = self.lcol[j];
                let mut cum = vec![0.0; c1 + 1 - start];
                for i in start + 1..=c1 {
                    let k = i - start;
                    cum[k] = cum[k - 1]
                        + 0.5 * (self.eta[self.idx(i, j)] + self.eta[self.idx(i - 1, j)]) * (self.x1[i] - self.x1[i - 1]);
                }
                cum
            })
            .collect()
    }

    /// Contraction gate `C_T · max(λ, λ²)` for a block of chart extents
    /// `(a, b)` with `C_T` measured over the block.
    fn gate(&self, c0: usize, c1: usize, r0: usize, r1: usize) -> f64 {
        let mut ct: f64 = 0.0;
        for j in r0..=r1 {
            for i in c0..=c1 {
                let k = self.idx(i, j);
                ct = ct.max(self.f0v[k].abs() + (self.c1v[k].powi(2) + self.c2v[k].powi(2)).sqrt());
            }
        }
        let lam = (self.x1[c1] - self.x1[c0]).max(self.x2[r1] - self.x2[r0]);
        ct * lam.max(lam * lam)
    }

    fn check_gate(&self, gate: f64, what: &str) -> Result<()> {
        if gate > 0.5 + 1e-9 {
            return Err(Error::Contraction(format!(
                "{what}: C_T·max(λ,λ²) = {gate:.3} > 1/2; sub-block too large"
            )));
        }
        Ok(())
    }
}

/// Boundary arrays for an `E` triangle: per t-node trace values used by the
/// explicit solution operator on the data curve γ.
pub struct ETrace {
    /// `q0(t_i)`.
    pub q0: Vec<f64>,
    /// Cumulative `∫ γ2'/|γ'|² (γ2' q0' - γ1' q1) dt` from `t_0`.
    pub psi: Vec<f64>,
    /// Trace of `w_{x1}` on γ: `(γ1' q0' + γ2' q1)/|γ'|²`.
    pub bdx1: Vec<f64>,
    /// Trace of `w_{x2}` on γ: `(γ2' q0' - γ1' q1)/|γ'|²`.
    pub bdx2: Vec<f64>,
}

/// Picard sweep on a diagonal `E` block.
///
/// Index convention: columns `i` carry `x1 = γ1(t_i)`; rows are stored with
/// `x2` ascending so that the curve node of column `i` is row
/// `brow[i] = N - i`. The block spans columns `c0..=c1` and the matching
/// rows `N-c1..=N-c0`; all nodes with `i + j ≥ N` inside that index square
/// are unknowns.
pub fn diag_e_block(m: &mut Mesh, c0: usize, c1: usize, tr: &ETrace) -> Result<BlockStats> {
    let n = m.n1 - 1;
    let (r0, r1) = (n - c1, n - c0);
    let gate = m.gate(c0, c1, r0, r1);
    m.check_gate(gate, "E block")?;

    let mut prev_delta = f64::INFINITY;
    let mut last_ratio = 0.0;
    for iter in 1..=MAX_ITERS {
        m.refresh_eta(c0, c1, r0, r1);
        let rc = m.row_cums(r0, r1, c1);
        let mut delta: f64 = 0.0;
        let mut newvals: Vec<(usize, f64, f64, f64)> = Vec::new();
        for i in c0..=c1 {
            let jc = n - i; // curve row of this column
            let mut colw = 0.0; // ∫ R dζ2
            let mut cole = 0.0; // ∫ η(x1_i, ·) dζ2
            let rcof = |j: usize| -> f64 {
                let row = &rc[j - r0];
                row[i - m.lcol[j]]
            };
            let mut prev_r = rcof(jc);
            let mut prev_eta = m.eta[m.idx(i, jc)];
            for j in jc..=r1 {
                if j > jc {
                    let dx2 = m.x2[j] - m.x2[j - 1];
                    let r = rcof(j);
                    let e = m.eta[m.idx(i, j)];
                    colw += 0.5 * (r + prev_r) * dx2;
                    cole += 0.5 * (e + prev_eta) * dx2;
                    prev_r = r;
                    prev_eta = e;
                }
                // t-index of this row's curve node is n - j.
                let b = tr.q0[i] + tr.psi[n - j] - tr.psi[i];
                let wn = b + colw;
                let w1n = tr.bdx1[i] + cole;
                let w2n = tr.bdx2[n - j] + rcof(j);
                let k = m.idx(i, j);
                delta = delta
                    .max((wn - m.w[k]).abs())
                    .max((w1n - m.wx1[k]).abs())
                    .max((w2n - m.wx2[k]).abs());
                newvals.push((k, wn, w1n, w2n));
            }
        }
        for (k, a, b, c) in newvals {
            m.w[k] = a;
            m.wx1[k] = b;
            m.wx2[k] = c;
        }
        last_ratio = if prev_delta.is_finite() && prev_delta > 0.0 { delta / prev_delta } else { 0.0 };
        let scale = 1.0 + m.w[m.idx(c1, r1)].abs();
        if delta <= FIX_TOL * scale {
            m.refresh_eta(c0, c1, r0, r1);
            return Ok(BlockStats { iterations: iter, last_ratio, gate });
        }
        prev_delta = delta;
    }
    Err(Error::Numerical(format!(
        "E block Picard iteration stalled after {MAX_ITERS} sweeps (last ratio {last_ratio:.3})"
    )))
}

/// Picard sweep on a diagonal `P1` block (columns and rows `c0..=c1`, valid
/// nodes `i ≥ j`, curve nodes on the main diagonal, bottom row `c0` final).
///
/// `pv[j]` holds the `w_{x2}` datum at the curve node of row `j`.
pub fn diag_p_block(m: &mut Mesh, c0: usize, c1: usize, pv: &[f64]) -> Result<BlockStats> {
    let (r0, r1) = (c0, c1);
    let gate = m.gate(c0, c1, r0, r1);
    m.check_gate(gate, "P block")?;

    let mut prev_delta = f64::INFINITY;
    let mut last_ratio = 0.0;
    for iter in 1..=MAX_ITERS {
        m.refresh_eta(c0, c1, r0, r1);
        let rc = m.row_cums(r0, r1, c1);
        let mut delta: f64 = 0.0;
        let mut newvals: Vec<(usize, f64, f64, f64)> = Vec::new();
        for i in c0..=c1 {
            let rcof = |j: usize| -> f64 { rc[j - r0][i - m.lcol[j]] };
            let mut accw = 0.0;
            let mut acce = 0.0;
            let mut prev_s = pv[r0] + rcof(r0);
            let mut prev_eta = m.eta[m.idx(i, r0)];
            for j in r0 + 1..=r1.min(i) {
                let dx2 = m.x2[j] - m.x2[j - 1];
                let s = pv[j] + rcof(j);
                let e = m.eta[m.idx(i, j)];
                accw += 0.5 * (s + prev_s) * dx2;
                acce += 0.5 * (e + prev_eta) * dx2;
                prev_s = s;
                prev_eta = e;
                let kb = m.idx(i, r0);
                let wn = m.w[kb] + accw;
                let w1n = m.wx1[kb] + acce;
                let w2n = s;
                let k = m.idx(i, j);
                delta = delta
                    .max((wn - m.w[k]).abs())
                    .max((w1n - m.wx1[k]).abs())
                    .max((w2n - m.wx2[k]).abs());
                newvals.push((k, wn, w1n, w2n));
            }
        }
        for (k, a, b, c) in newvals {
            m.w[k] = a;
            m.wx1[k] = b;
            m.wx2[k] = c;
        }
        last_ratio = if prev_delta.is_finite() && prev_delta > 0.0 { delta / prev_delta } else { 0.0 };
        let scale = 1.0 + m.w[m.idx(c1, r1)].abs();
        if delta <= FIX_TOL * scale {
            m.refresh_eta(c0, c1, r0, r1);
            return Ok(BlockStats { iterations: iter, last_ratio, gate });
        }
        prev_delta = delta;
    }
    Err(Error::Numerical(format!(
        "P block Picard iteration stalled after {MAX_ITERS} sweeps (last ratio {last_ratio:.3})"
    )))
}

/// Picard sweep on a rectangular block (columns `c0..=c1`, rows `r0..=r1`)
/// whose left column `c0` and bottom row `r0` already hold final values.
pub fn rect_block(m: &mut Mesh, c0: usize, c1: usize, r0: usize, r1: usize) -> Result<BlockStats> {
    let gate = m.gate(c0, c1, r0, r1);
    m.check_gate(gate, "rect block")?;

    let mut prev_delta = f64::INFINITY;
    let mut last_ratio = 0.0;
    for iter in 1..=MAX_ITERS {
        m.refresh_eta(c0, c1, r0, r1);
        // Row integrals measured from the block's left column.
        let rc: Vec<Vec<f64>> = (r0..=r1)
            .map(|j| {
                let mut cum = vec![0.0; c1 + 1 - c0];
                for i in c0 + 1..=c1 {
                    let k = i - c0;
                    cum[k] = cum[k - 1]
                        + 0.5 * (m.eta[m.idx(i, j)] + m.eta[m.idx(i - 1, j)]) * (m.x1[i] - m.x1[i - 1]);
                }
                cum
            })
            .collect();
        let mut delta: f64 = 0.0;
        let mut newvals: Vec<(usize, f64, f64, f64)> = Vec::new();
        for i in c0 + 1..=c1 {
            let mut dintw = 0.0;
            let mut cole = 0.0;
            let mut prev_r = rc[0][i - c0];
            let mut prev_eta = m.eta[m.idx(i, r0)];
            for j in r0 + 1..=r1 {
                let dx2 = m.x2[j] - m.x2[j - 1];
                let r = rc[j - r0][i - c0];
                let e = m.eta[m.idx(i, j)];
                dintw += 0.5 * (r + prev_r) * dx2;
                cole += 0.5 * (e + prev_eta) * dx2;
                prev_r = r;
                prev_eta = e;
                let wn = m.w[m.idx(c0, j)] + m.w[m.idx(i, r0)] - m.w[m.idx(c0, r0)] + dintw;
                let w1n = m.wx1[m.idx(i, r0)] + cole;
                let w2n = m.wx2[m.idx(c0, j)] + rc[j - r0][i - c0];
                let k = m.idx(i, j);
                delta = delta
                    .max((wn - m.w[k]).abs())
                    .max((w1n - m.wx1[k]).abs())
                    .max((w2n - m.wx2[k]).abs());
                newvals.push((k, wn, w1n, w2n));
            }
        }
        for (k, a, b, c) in newvals {
            m.w[k] = a;
            m.wx1[k] = b;
            m.wx2[k] = c;
        }
        last_ratio = if prev_delta.is_finite() && prev_delta > 0.0 { delta / prev_delta } else { 0.0 };
        let scale = 1.0 + m.w[m.idx(c1, r1)].abs();
        if delta <= FIX_TOL * scale {
            m.refresh_eta(c0, c1, r0, r1);
            return Ok(BlockStats { iterations: iter, last_ratio, gate });
        }
        prev_delta = delta;
    }
    Err(Error::Numerical(format!(
        "rect block Picard iteration stalled after {MAX_ITERS} sweeps (last ratio {last_ratio:.3})"
    )))
}

/// Greedy subdivision of index range `[0, n]` into blocks whose chart
/// extents respect the contraction gate with safety factor 0.9. Returns the
/// cut indices `τ_0 = 0 < τ_1 < … = n`.
pub fn subdivide(x1: &[f64], x2: &[f64], ct: f64) -> Vec<usize> {
    let n = x1.len() - 1;
    let lam_max = if ct <= 1e-300 {
        f64::INFINITY
    } else {
        let l = 1.0 / (2.0 * ct);
        0.9 * if l <= 1.0 { l } else { l.sqrt() }
    };
    let mut cuts = vec![0usize];
    let mut start = 0usize;
    for i in 1..=n {
        let extent = (x1[i] - x1[start]).abs().max((x2[i] - x2[start]).abs());
        if extent > lam_max && i > start + 1 {
            cuts.push(i - 1);
            start = i - 1;
        }
    }
    cuts.push(n);
    cuts.dedup();
    cuts
}
