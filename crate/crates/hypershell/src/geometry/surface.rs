//! Polynomial graph surfaces with closed-form curvature data.

use super::{FundamentalForms, M2, V2, V3};
use crate::error::{Error, Result};

/// Sparse bivariate polynomial `Σ c · x1^i · x2^j`.
#[derive(Debug, Clone, Default)]
pub struct Poly2 {
    /// `(i, j, c)` monomials; kept deduplicated.
    terms: Vec<(u32, u32, f64)>,
}

impl Poly2 {
    pub fn new(terms: &[(u32, u32, f64)]) -> Self {
        let mut p = Poly2 { terms: Vec::new() };
        for &(i, j, c) in terms {
            p.add_term(i, j, c);
        }
        p
    }

    fn add_term(&mut self, i: u32, j: u32, c: f64) {
        if c == 0.0 {
            return;
        }
        for t in &mut self.terms {
            if t.0 == i && t.1 == j {
                t.2 += c;
                return;
            }
        }
        self.terms.push((i, j, c));
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(i, j, _)| i + j).max().unwrap_or(0)
    }

    pub fn eval(&self, x: V2) -> f64 {
        self.terms
            .iter()
            .map(|&(i, j, c)| c * x[0].powi(i as i32) * x[1].powi(j as i32))
            .sum()
    }

    /// Partial derivative along axis 0 (`x1`) or 1 (`x2`).
    pub fn deriv(&self, axis: usize) -> Poly2 {
        let mut out = Poly2 { terms: Vec::new() };
        for &(i, j, c) in &self.terms {
            match axis {
                0 if i > 0 => out.add_term(i - 1, j, c * i as f64),
                1 if j > 0 => out.add_term(i, j - 1, c * j as f64),
                _ => {}
            }
        }
        out
    }
}

/// A hyperbolic polynomial graph surface over a rectangular chart domain.
#[derive(Debug, Clone)]
pub struct SurfacePatch {
    pub name: String,
    /// Chart domain `[x1min, x1max, x2min, x2max]`.
    pub domain: [f64; 4],
    h: Poly2,
    // Cached derivative polynomials (exact).
    h1: Poly2,
    h2: Poly2,
    h11: Poly2,
    h12: Poly2,
    h22: Poly2,
    h111: Poly2,
    h112: Poly2,
    h122: Poly2,
    h222: Poly2,
}

impl SurfacePatch {
    /// Builds a surface from a height polynomial, verifying strict
    /// hyperbolicity (`κ < 0`) on a 33×33 sample of the domain.
    pub fn new(name: &str, h: Poly2, domain: [f64; 4]) -> Result<Self> {
        let h1 = h.deriv(0);
        let h2 = h.deriv(1);
        let h11 = h1.deriv(0);
        let h12 = h1.deriv(1);
        let h22 = h2.deriv(1);
        let patch = SurfacePatch {
            name: name.to_string(),
            domain,
            h111: h11.deriv(0),
            h112: h11.deriv(1),
            h122: h12.deriv(1),
            h222: h22.deriv(1),
            h,
            h1,
            h2,
            h11,
            h12,
            h22,
        };
        if domain[1] <= domain[0] || domain[3] <= domain[2] {
            return Err(Error::Geometry(format!(
                "degenerate domain {:?} for surface '{name}'",
                domain
            )));
        }
        let mut kappa_max = f64::NEG_INFINITY;
        for i in 0..=32 {
            for j in 0..=32 {
                let x = V2::new(
                    domain[0] + (domain[1] - domain[0]) * i as f64 / 32.0,
                    domain[2] + (domain[3] - domain[2]) * j as f64 / 32.0,
                );
                kappa_max = kappa_max.max(patch.gauss_curvature_at(x));
            }
        }
        if kappa_max >= 0.0 {
            return Err(Error::NotHyperbolic(format!(
                "surface '{name}' has κ = {kappa_max:.3e} ≥ 0 somewhere on {domain:?}"
            )));
        }
        Ok(patch)
    }

    /// Product saddle `h = x1·x2`.
    pub fn saddle(domain: [f64; 4]) -> Result<Self> {
        Self::new("saddle", Poly2::new(&[(1, 1, 1.0)]), domain)
    }

    /// Quadratic saddle `h = (x1² - x2²)/2`.
    pub fn quad_saddle(domain: [f64; 4]) -> Result<Self> {
        Self::new(
            "quad_saddle",
            Poly2::new(&[(2, 0, 0.5), (0, 2, -0.5)]),
            domain,
        )
    }

    /// Monkey saddle `h = x1³ - 3·x1·x2²` (domain must avoid the origin,
    /// where κ = 0).
    pub fn monkey_saddle(domain: [f64; 4]) -> Result<Self> {
        Self::new(
            "monkey_saddle",
            Poly2::new(&[(3, 0, 1.0), (1, 2, -3.0)]),
            domain,
        )
    }

    /// Separable surface `h = h1(x1) + h2(x2)` from univariate coefficient
    /// lists (`coeffs[k]` multiplies `x^k`). Hyperbolicity requires
    /// `h1''·h2'' < 0` on the domain, enforced by the κ sampling in `new`.
    pub fn separable(c1: &[f64], c2: &[f64], domain: [f64; 4]) -> Result<Self> {
        let mut terms = Vec::new();
        for (k, &c) in c1.iter().enumerate() {
            terms.push((k as u32, 0u32, c));
        }
        for (k, &c) in c2.iter().enumerate() {
            if k == 0 {
                // Avoid double-counting a constant offset.
                terms.push((0, 0, c));
            } else {
                terms.push((0, k as u32, c));
            }
        }
        Self::new("separable", Poly2::new(&terms), domain)
    }

    /// User polynomial of total degree at most 6.
    pub fn polynomial(name: &str, terms: &[(u32, u32, f64)], domain: [f64; 4]) -> Result<Self> {
        let p = Poly2::new(terms);
        if p.degree() > 6 {
            return Err(Error::Config(format!(
                "height polynomial degree {} exceeds the supported maximum 6",
                p.degree()
            )));
        }
        Self::new(name, p, domain)
    }

    pub fn height(&self, x: V2) -> f64 {
        self.h.eval(x)
    }

    pub fn grad_h(&self, x: V2) -> V2 {
        V2::new(self.h1.eval(x), self.h2.eval(x))
    }

    pub fn hess_h(&self, x: V2) -> M2 {
        let h12 = self.h12.eval(x);
        M2::new(self.h11.eval(x), h12, h12, self.h22.eval(x))
    }

    /// `w = 1 + |∇h|²  (= det g)`.
    fn w(&self, x: V2) -> f64 {
        let dh = self.grad_h(x);
        1.0 + dh.norm_squared()
    }

    /// Embeds a chart point into R³.
    pub fn embed(&self, x: V2) -> V3 {
        V3::new(x[0], x[1], self.h.eval(x))
    }

    /// Coordinate tangent basis `(∂x1, ∂x2)` as ambient 3-vectors.
    pub fn tangent_basis(&self, x: V2) -> (V3, V3) {
        let dh = self.grad_h(x);
        (V3::new(1.0, 0.0, dh[0]), V3::new(0.0, 1.0, dh[1]))
    }

    /// Embeds chart components of a tangent vector into R³.
    pub fn embed_tangent(&self, x: V2, v: V2) -> V3 {
        let (e1, e2) = self.tangent_basis(x);
        e1 * v[0] + e2 * v[1]
    }

    /// Upward unit normal `ν = (-∇h, 1)/√(1+|∇h|²)`.
    pub fn normal(&self, x: V2) -> V3 {
        let dh = self.grad_h(x);
        V3::new(-dh[0], -dh[1], 1.0) / self.w(x).sqrt()
    }

    /// First and second fundamental forms (covariant chart components).
    pub fn fundamental_forms_at(&self, x: V2) -> FundamentalForms {
        let dh = self.grad_h(x);
        let g = M2::new(
            1.0 + dh[0] * dh[0],
            dh[0] * dh[1],
            dh[0] * dh[1],
            1.0 + dh[1] * dh[1],
        );
        let pi = -self.hess_h(x) / self.w(x).sqrt();
        FundamentalForms { g, pi }
    }

    pub fn metric_at(&self, x: V2) -> M2 {
        self.fundamental_forms_at(x).g
    }

    pub fn metric_inv_at(&self, x: V2) -> M2 {
        let dh = self.grad_h(x);
        let w = 1.0 + dh.norm_squared();
        // (I + ∇h ∇hᵀ)⁻¹ = I - ∇h ∇hᵀ / w.
        M2::new(
            1.0 - dh[0] * dh[0] / w,
            -dh[0] * dh[1] / w,
            -dh[0] * dh[1] / w,
            1.0 - dh[1] * dh[1] / w,
        )
    }

    /// Shape operator `∇ν = g⁻¹Π` (mixed components: `∇_α ν = Sα`).
    pub fn shape_operator_at(&self, x: V2) -> M2 {
        let f = self.fundamental_forms_at(x);
        self.metric_inv_at(x) * f.pi
    }

    /// Gauss curvature `κ = det ∇²h / (1+|∇h|²)²`.
    pub fn gauss_curvature_at(&self, x: V2) -> f64 {
        let hess = self.hess_h(x);
        let w = self.w(x);
        (hess[(0, 0)] * hess[(1, 1)] - hess[(0, 1)] * hess[(0, 1)]) / (w * w)
    }

    /// Chart partials `(∂₁κ, ∂₂κ)` of the Gauss curvature (exact).
    pub fn gauss_curvature_partials(&self, x: V2) -> V2 {
        let (h11, h12, h22) = (self.h11.eval(x), self.h12.eval(x), self.h22.eval(x));
        let dh = self.grad_h(x);
        let w = 1.0 + dh.norm_squared();
        let det = h11 * h22 - h12 * h12;
        let third = [
            [self.h111.eval(x), self.h112.eval(x)],
            [self.h112.eval(x), self.h122.eval(x)],
            [self.h122.eval(x), self.h222.eval(x)],
        ];
        let mut out = V2::zeros();
        for a in 0..2 {
            // ∂a det∇²h = h11a·h22 + h11·h22a - 2·h12·h12a
            let ddet = third[0][a] * h22 + h11 * third[2][a] - 2.0 * h12 * third[1][a];
            // ∂a w = 2(h1·h1a + h2·h2a)
            let hess = self.hess_h(x);
            let dw = 2.0 * (dh[0] * hess[(0, a)] + dh[1] * hess[(1, a)]);
            out[a] = ddet / (w * w) - 2.0 * det * dw / (w * w * w);
        }
        out
    }

    /// Gauss-curvature gradient as a tangent vector (index raised).
    pub fn gauss_curvature_gradient(&self, x: V2) -> V2 {
        self.metric_inv_at(x) * self.gauss_curvature_partials(x)
    }

    /// Christoffel symbols `Γ^k_{ij} = h_{ij} h_k / (1+|∇h|²)`, returned as
    /// `gamma[k]` = the symmetric matrix `(i,j) ↦ Γ^k_{ij}`.
    pub fn christoffel(&self, x: V2) -> [M2; 2] {
        let hess = self.hess_h(x);
        let dh = self.grad_h(x);
        let w = self.w(x);
        [hess * (dh[0] / w), hess * (dh[1] / w)]
    }

    /// Matrix of the clockwise rotation `Q` on chart components
    /// (`(Qα)¹ = α₂/√g`, `(Qα)² = -α₁/√g` with `α_i = g_{ij}α^j`).
    pub fn q_matrix(&self, x: V2) -> M2 {
        let g = self.metric_at(x);
        let sg = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).sqrt();
        M2::new(g[(1, 0)], g[(1, 1)], -g[(0, 0)], -g[(0, 1)]) / sg
    }

    /// Applies the clockwise rotation `Q` to a tangent vector.
    pub fn rotate_q(&self, x: V2, v: V2) -> V2 {
        self.q_matrix(x) * v
    }

    /// Pullback `Q*Π` with `(Q*Π)(α,β) = Π(Qα, Qβ)` (covariant components).
    pub fn q_star_pi(&self, x: V2) -> M2 {
        let q = self.q_matrix(x);
        let pi = self.fundamental_forms_at(x).pi;
        q.transpose() * pi * q
    }

    /// Asymptotic directions at `x`: the two `Π`-null tangent directions,
    /// normalized to unit surface length. Branch choice is deterministic:
    /// each direction is sign-normalized (first nonzero component positive),
    /// and `ξ⁺` is the one with the larger first component (ties broken by
    /// the larger second component).
    pub fn asymptotic_directions_at(&self, x: V2) -> Result<(V2, V2)> {
        let f = self.fundamental_forms_at(x);
        let eig = nalgebra::SymmetricEigen::new(f.pi);
        let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        if l0 * l1 >= 0.0 {
            return Err(Error::Geometry(format!(
                "no real asymptotic directions at {x:?} (Π eigenvalues {l0:.3e}, {l1:.3e})"
            )));
        }
        // Order eigenpairs so that λp > 0 > λm.
        let (lp, up, lm, um) = if l0 > 0.0 {
            (l0, eig.eigenvectors.column(0).into_owned(), l1, eig.eigenvectors.column(1).into_owned())
        } else {
            (l1, eig.eigenvectors.column(1).into_owned(), l0, eig.eigenvectors.column(0).into_owned())
        };
        // Null directions of Π: √(-λm)·up ± √(λp)·um.
        let a = (-lm).sqrt();
        let b = lp.sqrt();
        let d1 = up * a + um * b;
        let d2 = up * a - um * b;
        let g = f.g;
        let canon = |d: V2| -> V2 {
            let n = (d.dot(&(g * d))).sqrt();
            let d = d / n;
            if d[0] > 1e-14 || (d[0].abs() <= 1e-14 && d[1] > 0.0) {
                d
            } else {
                -d
            }
        };
        let (d1, d2) = (canon(d1), canon(d2));
        let first_larger =
            d1[0] > d2[0] + 1e-14 || ((d1[0] - d2[0]).abs() <= 1e-14 && d1[1] >= d2[1]);
        if first_larger {
            Ok((d1, d2))
        } else {
            Ok((d2, d1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn saddle() -> SurfacePatch {
        SurfacePatch::saddle([-1.0, 1.0, -1.0, 1.0]).unwrap()
    }

    #[test]
    fn curvature_spot_values() {
        // h = x1·x2 at the origin: κ = -1 exactly.
        let s = saddle();
        assert_abs_diff_eq!(
            s.gauss_curvature_at(V2::new(0.0, 0.0)),
            -1.0,
            epsilon = 1e-15
        );
        // Monkey saddle at (1,0): κ = -36/100.
        let m = SurfacePatch::monkey_saddle([0.5, 1.5, -0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            m.gauss_curvature_at(V2::new(1.0, 0.0)),
            -0.36,
            epsilon = 1e-15
        );
    }

    #[test]
    fn forms_match_direct_formulas() {
        let s = saddle();
        let x = V2::new(0.3, -0.2);
        let f = s.fundamental_forms_at(x);
        // ∇h = (x2, x1), w = 1 + x1² + x2².
        let w: f64 = 1.0 + 0.09 + 0.04;
        assert_abs_diff_eq!(f.g[(0, 0)], 1.0 + 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(f.g[(0, 1)], -0.06, epsilon = 1e-15);
        assert_abs_diff_eq!(f.pi[(0, 1)], -1.0 / w.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(f.pi[(0, 0)], 0.0, epsilon = 1e-15);
        // det Π / det g = κ.
        let kappa = (f.pi[(0, 0)] * f.pi[(1, 1)] - f.pi[(0, 1)] * f.pi[(1, 0)])
            / (f.g[(0, 0)] * f.g[(1, 1)] - f.g[(0, 1)] * f.g[(1, 0)]);
        assert_abs_diff_eq!(kappa, s.gauss_curvature_at(x), epsilon = 1e-14);
    }

    #[test]
    fn q_is_a_clockwise_isometric_rotation() {
        let s = SurfacePatch::monkey_saddle([0.5, 1.5, -0.5, 0.5]).unwrap();
        let x = V2::new(1.1, 0.2);
        let g = s.metric_at(x);
        let q = s.q_matrix(x);
        let v = V2::new(0.7, -0.4);
        let qv = q * v;
        // Isometry and antisymmetry.
        assert_abs_diff_eq!(qv.dot(&(g * qv)), v.dot(&(g * v)), epsilon = 1e-13);
        assert_abs_diff_eq!(v.dot(&(g * qv)), 0.0, epsilon = 1e-13);
        // Q² = -Id.
        let q2 = q * q;
        assert_abs_diff_eq!(q2[(0, 0)], -1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(q2[(0, 1)], 0.0, epsilon = 1e-13);
        // Clockwise: for the positively oriented orthonormal frame built
        // from ∂x1, Q(e1) should equal -e2.
        let e1 = V2::new(1.0 / g[(0, 0)].sqrt(), 0.0);
        let mut e2 = V2::new(-g[(0, 1)], g[(0, 0)]);
        e2 /= (e2.dot(&(g * e2))).sqrt();
        let qe1 = q * e1;
        assert_abs_diff_eq!(qe1[0], -e2[0], epsilon = 1e-13);
        assert_abs_diff_eq!(qe1[1], -e2[1], epsilon = 1e-13);
    }

    #[test]
    fn asymptotic_directions_are_null_and_deterministic() {
        let m = SurfacePatch::monkey_saddle([0.5, 1.5, -0.5, 0.5]).unwrap();
        let x = V2::new(1.0, 0.25);
        let (dp, dm) = m.asymptotic_directions_at(x).unwrap();
        let f = m.fundamental_forms_at(x);
        for d in [dp, dm] {
            assert_abs_diff_eq!(d.dot(&(f.pi * d)), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(d.dot(&(f.g * d)), 1.0, epsilon = 1e-12);
        }
        assert!(dp[0] >= dm[0]);
        // Product saddle at origin: exactly the coordinate axes.
        let s = saddle();
        let (dp, dm) = s.asymptotic_directions_at(V2::new(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(dp[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dp[1], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dm[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dm[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_hyperbolic_surfaces() {
        // h = x1² + x2² is elliptic.
        let r = SurfacePatch::polynomial(
            "bowl",
            &[(2, 0, 1.0), (0, 2, 1.0)],
            [-1.0, 1.0, -1.0, 1.0],
        );
        assert!(r.is_err());
        // Monkey saddle over a domain containing the origin has κ(0) = 0.
        assert!(SurfacePatch::monkey_saddle([-1.0, 1.0, -1.0, 1.0]).is_err());
    }
}
