//! Shared 1-D numerics: local Lagrange interpolation on nonuniform nodes,
//! monotone inversion, finite-difference stencils, and trapezoid weights.
//!
//! All interpolation in the workspace funnels through [`lagrange4`] /
//! [`Interp1`] so that two patches sampling the same trace through the same
//! nodes produce bit-identical values (this is what makes seam checks exact
//! rather than merely small).

/// Index of the first node of the stencil window of width `m` centered
/// near `x` in the sorted node array `xs`.
pub(crate) fn window_start(xs: &[f64], x: f64, m: usize) -> usize {
    debug_assert!(xs.len() >= m);
    // Position of the first node >= x.
    let k = xs.partition_point(|&v| v < x);
    // Center the window and clamp to the array.
    let half = m / 2;
    k.saturating_sub(half).min(xs.len() - m)
}

/// Local 4-point (cubic) Lagrange interpolation on sorted, distinct nodes.
///
/// Falls back to the full node set when fewer than 4 nodes are available.
pub fn lagrange4(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let m = xs.len().min(4);
    let i0 = window_start(xs, x, m);
    lagrange_window(&xs[i0..i0 + m], &ys[i0..i0 + m], x)
}

/// Derivative of the local 4-point Lagrange interpolant.
pub fn lagrange4_deriv(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let m = xs.len().min(4);
    let i0 = window_start(xs, x, m);
    lagrange_window_deriv(&xs[i0..i0 + m], &ys[i0..i0 + m], x)
}

/// Derivative of a local `m`-point Lagrange interpolant (higher-order
/// differentiation of smooth sampled grids).
pub fn lagrange_deriv_m(xs: &[f64], ys: &[f64], x: f64, m: usize) -> f64 {
    let m = xs.len().min(m.max(2));
    let i0 = window_start(xs, x, m);
    lagrange_window_deriv(&xs[i0..i0 + m], &ys[i0..i0 + m], x)
}

fn lagrange_window(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..xs.len() {
        let mut li = 1.0;
        for j in 0..xs.len() {
            if j != i {
                li *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += ys[i] * li;
    }
    acc
}

fn lagrange_window_deriv(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut acc = 0.0;
    for i in 0..n {
        // d/dx prod_{j != i} (x - x_j)/(x_i - x_j)
        let mut dli = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut term = 1.0 / (xs[i] - xs[k]);
            for j in 0..n {
                if j != i && j != k {
                    term *= (x - xs[j]) / (xs[i] - xs[j]);
                }
            }
            dli += term;
        }
        acc += ys[i] * dli;
    }
    acc
}

/// Sampled scalar function of one variable on sorted nodes.
#[derive(Debug, Clone)]
pub struct Interp1 {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Interp1 {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        debug_assert_eq!(xs.len(), ys.len());
        debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));
        Interp1 { xs, ys }
    }

    pub fn eval(&self, x: f64) -> f64 {
        lagrange4(&self.xs, &self.ys, x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        lagrange4_deriv(&self.xs, &self.ys, x)
    }

    /// Inverts a strictly monotone sampled function: returns `x` with
    /// `eval(x) = y`, by bisection on the interpolant to absolute
    /// tolerance `1e-12` of the bracket width.
    pub fn invert_monotone(&self, y: f64) -> f64 {
        let n = self.ys.len();
        let increasing = self.ys[n - 1] > self.ys[0];
        let value = |x: f64| {
            let v = self.eval(x);
            if increasing {
                v
            } else {
                -v
            }
        };
        let target = if increasing { y } else { -y };
        let (mut lo, mut hi) = (self.xs[0], self.xs[n - 1]);
        // Clamp out-of-range queries to the ends (callers stay inside by
        // construction; this guards round-off at the ends).
        if value(lo) >= target {
            return lo;
        }
        if value(hi) <= target {
            return hi;
        }
        while hi - lo > 1e-12 * (1.0 + hi.abs() + lo.abs()) {
            let mid = 0.5 * (lo + hi);
            if value(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Second-order first derivative of sampled values on a (possibly
/// nonuniform) axis: central in the interior, one-sided at the ends.
pub fn diff1(xs: &[f64], ys: &[f64], i: usize) -> f64 {
    let n = xs.len();
    debug_assert!(n >= 3);
    if i == 0 {
        three_point(&xs[..3], &ys[..3], 0)
    } else if i == n - 1 {
        three_point(&xs[n - 3..], &ys[n - 3..], 2)
    } else {
        three_point(&xs[i - 1..i + 2], &ys[i - 1..i + 2], 1)
    }
}

/// Derivative of the quadratic through three nodes, evaluated at node
/// `which` ∈ {0,1,2}. Written with divided differences (differences of `y`
/// first) so it stays stable for very small spacings.
fn three_point(xs: &[f64], ys: &[f64], which: usize) -> f64 {
    let h0 = xs[1] - xs[0];
    let h1 = xs[2] - xs[1];
    let d1 = (ys[1] - ys[0]) / h0;
    let d2 = (ys[2] - ys[1]) / h1;
    let d12 = (d2 - d1) / (h0 + h1);
    // f'(x) = d1 + d12 (2x - x0 - x1).
    match which {
        0 => d1 - d12 * h0,
        1 => d1 + d12 * h0,
        _ => d1 + d12 * (h0 + 2.0 * h1),
    }
}

/// Fourth-order central finite difference of a callable, used to supply
/// derivatives of analytic boundary-data callbacks when no closed-form
/// derivative is given.
pub fn fd_deriv(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

/// Cumulative trapezoid integral along sorted nodes; `out[0] = 0`,
/// `out[i] = ∫_{xs[0]}^{xs[i]}`.
pub fn cumtrapz(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        out[i] = out[i - 1] + 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    out
}

/// Trapezoid integral over sorted nodes.
pub fn trapz(xs: &[f64], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Uniform node array with `n + 1` nodes covering `[a, b]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * (i as f64) / (n as f64)).collect()
}
