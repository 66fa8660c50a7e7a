//! Problem configurations for the batch front end.
//!
//! Configs are JSON documents with a `schema_version` field; unknown keys
//! are rejected so a typo never silently degrades a run. Scalar fields
//! (strain components, boundary traces) are expression strings in the
//! variables `x1, x2, t, s` — see [`crate::expr`] for the grammar.

use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::geometry::{ParamMap, SurfacePatch, M2, V2};
use crate::goursat::ScalarFn1;
use crate::strain::{NoncharRegion, StrainData, StrainParams, SymField};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Version of the config / report schemas emitted and accepted.
pub const SCHEMA_VERSION: u32 = 1;

/// Top-level problem description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema_version: u32,
    pub surface: SurfaceConfig,
    pub region: RegionConfig,
    #[serde(default)]
    pub fields: FieldsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

impl ProblemConfig {
    /// Loads and validates a config file.
    pub fn load(path: &Path) -> Result<ProblemConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ProblemConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.solver.validate()?;
        // Parse every expression eagerly so malformed configs fail before
        // any numerics run.
        self.fields.parse_all()?;
        Ok(())
    }
}

/// Surface catalog entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    /// `saddle | quad_saddle | monkey_saddle | separable | polynomial`.
    pub name: String,
    /// Chart rectangle `[x1min, x1max, x2min, x2max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 4]>,
    /// Coefficients of `c1(x1)` for the separable surface (`Σ c1[k] x1^k`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c1: Option<Vec<f64>>,
    /// Coefficients of `c2(x2)` for the separable surface.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<Vec<f64>>,
    /// Monomial terms `(i, j, coeff)` of a polynomial height function.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<(u32, u32, f64)>>,
}

impl SurfaceConfig {
    pub fn build(&self) -> Result<SurfacePatch> {
        let dom = self.domain.unwrap_or([-1.0, 1.0, -1.0, 1.0]);
        match self.name.as_str() {
            "saddle" => SurfacePatch::saddle(dom),
            "quad_saddle" => SurfacePatch::quad_saddle(dom),
            "monkey_saddle" => SurfacePatch::monkey_saddle(dom),
            "separable" => {
                let c1 = self.c1.as_deref().ok_or_else(|| {
                    Error::Config("separable surface needs coefficient list c1".into())
                })?;
                let c2 = self.c2.as_deref().ok_or_else(|| {
                    Error::Config("separable surface needs coefficient list c2".into())
                })?;
                SurfacePatch::separable(c1, c2, dom)
            }
            "polynomial" => {
                let terms = self.terms.as_deref().ok_or_else(|| {
                    Error::Config("polynomial surface needs a terms list".into())
                })?;
                SurfacePatch::polynomial("polynomial", terms, dom)
            }
            other => Err(Error::Config(format!("unknown surface name {other:?}"))),
        }
    }
}

/// Region description: a catalog constructor or a free-form chart map
/// given by coordinate expressions in `(t, s)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    /// Affine box `origin + t·dir_t + s·dir_s`, `t ∈ [0,a]`, `s ∈ [0,b]`.
    Box { origin: [f64; 2], dir_t: [f64; 2], dir_s: [f64; 2], a: f64, b: f64 },
    /// 45°-rotated box around `center` (noncharacteristic on `h = x1·x2`).
    SaddleDiagBox { center: [f64; 2], a: f64, b: f64 },
    /// Hyperbola-bounded box `x2·x1 ∈ [σ1, σ2]`, `x1 ∈ [ε, 1/ε]`.
    HyperbolaBox { eps: f64, sigma1: f64, sigma2: f64 },
    /// Annular band around `center` (characteristic somewhere — gate demo).
    Annulus { center: [f64; 2], r0: f64, r1: f64 },
    /// Free-form map `x1 = x1(t,s)`, `x2 = x2(t,s)` from expressions.
    Alpha { x1: String, x2: String, a: f64, b: f64 },
}

/// Expression-backed parameter map (Jacobian by central differences).
struct ExprMap {
    x1: Expr,
    x2: Expr,
}

impl ParamMap for ExprMap {
    fn eval(&self, t: f64, s: f64) -> V2 {
        let env = Env::ts(t, s);
        V2::new(self.x1.eval(&env), self.x2.eval(&env))
    }
    fn jacobian(&self, t: f64, s: f64) -> M2 {
        let h = 1e-6;
        let dt = (self.eval(t + h, s) - self.eval(t - h, s)).scale(0.5 / h);
        let ds = (self.eval(t, s + h) - self.eval(t, s - h)).scale(0.5 / h);
        M2::from_columns(&[dt, ds])
    }
}

impl RegionConfig {
    pub fn build(&self) -> Result<Arc<NoncharRegion>> {
        Ok(match self {
            RegionConfig::Box { origin, dir_t, dir_s, a, b } => NoncharRegion::affine_box(
                V2::new(origin[0], origin[1]),
                V2::new(dir_t[0], dir_t[1]),
                V2::new(dir_s[0], dir_s[1]),
                *a,
                *b,
                "config box",
            ),
            RegionConfig::SaddleDiagBox { center, a, b } => {
                NoncharRegion::saddle_diag_box(V2::new(center[0], center[1]), *a, *b)
            }
            RegionConfig::HyperbolaBox { eps, sigma1, sigma2 } => {
                NoncharRegion::hyperbola_box(*eps, *sigma1, *sigma2)
            }
            RegionConfig::Annulus { center, r0, r1 } => {
                NoncharRegion::annulus(V2::new(center[0], center[1]), *r0, *r1)
            }
            RegionConfig::Alpha { x1, x2, a, b } => {
                let map = ExprMap { x1: Expr::parse(x1)?, x2: Expr::parse(x2)? };
                NoncharRegion::from_map(Arc::new(map), *a, *b, "config alpha map")
            }
        })
    }
}

/// Expression strings for the strain input and boundary traces; absent
/// entries are zero.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    /// Strain components in `x1, x2` (covariant chart components).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u11: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u12: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u22: Option<String>,
    /// Bottom-edge traces in `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<String>,
    /// Lateral-edge traces in `s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<String>,
    /// When set, the boundary traces are generated from the rigid motion
    /// `y = axis × X` instead of the trace expressions (which must then be
    /// absent): the exact operator-form data of an infinitesimal rotation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rigid_axis: Option<[f64; 3]>,
}

fn parse_opt(src: &Option<String>) -> Result<Option<Expr>> {
    src.as_deref().map(Expr::parse).transpose()
}

impl FieldsConfig {
    fn parse_all(&self) -> Result<()> {
        for e in [&self.u11, &self.u12, &self.u22, &self.q0, &self.q1, &self.p1, &self.p2] {
            parse_opt(e)?;
        }
        Ok(())
    }

    /// Strain input as a chart-point closure.
    pub fn strain_field(&self) -> Result<SymField> {
        let u11 = parse_opt(&self.u11)?;
        let u12 = parse_opt(&self.u12)?;
        let u22 = parse_opt(&self.u22)?;
        let at = move |e: &Option<Expr>, env: &Env| e.as_ref().map_or(0.0, |e| e.eval(env));
        Ok(Arc::new(move |x: V2| {
            let env = Env::xy(x[0], x[1]);
            let off = at(&u12, &env);
            M2::new(at(&u11, &env), off, off, at(&u22, &env))
        }))
    }

    /// Boundary traces for a solve: rigid-motion data when `rigid_axis`
    /// is set, expression-backed traces otherwise.
    pub fn boundary_data(
        &self,
        surf: &Arc<SurfacePatch>,
        region: &Arc<NoncharRegion>,
    ) -> Result<StrainData> {
        let Some(axis) = self.rigid_axis else {
            return self.strain_data();
        };
        if [&self.q0, &self.q1, &self.p1, &self.p2].iter().any(|e| e.is_some()) {
            return Err(Error::Config(
                "rigid_axis excludes explicit trace expressions (q0, q1, p1, p2)".into(),
            ));
        }
        let axis = crate::geometry::V3::new(axis[0], axis[1], axis[2]);
        let sc = Arc::clone(surf);
        let v_fn: Arc<dyn Fn(V2) -> f64 + Send + Sync> =
            Arc::new(move |x| axis.dot(&sc.normal(x)));
        let sc = Arc::clone(surf);
        let dv_fn: Arc<dyn Fn(V2) -> V2 + Send + Sync> = Arc::new(move |x| {
            let s = sc.shape_operator_at(x);
            V2::new(
                axis.dot(&sc.embed_tangent(x, s.column(0).into_owned())),
                axis.dot(&sc.embed_tangent(x, s.column(1).into_owned())),
            )
        });
        Ok(crate::strain::strain_data_from_scalar(surf, region, v_fn, dv_fn))
    }

    /// Boundary traces in operator form.
    pub fn strain_data(&self) -> Result<StrainData> {
        let f1 = |e: Option<Expr>| -> ScalarFn1 {
            match e {
                None => ScalarFn1::zero(),
                Some(e) => ScalarFn1::new(move |t| e.eval(&Env::t(t))),
            }
        };
        // The lateral traces are functions of s; the shared environment
        // slot keeps the grammar to one variable list.
        let fs = |e: Option<Expr>| -> ScalarFn1 {
            match e {
                None => ScalarFn1::zero(),
                Some(e) => ScalarFn1::new(move |s| e.eval(&Env::ts(0.0, s))),
            }
        };
        Ok(StrainData {
            q0: f1(parse_opt(&self.q0)?),
            q1: f1(parse_opt(&self.q1)?),
            p1: fs(parse_opt(&self.p1)?),
            p2: fs(parse_opt(&self.p2)?),
        })
    }
}

/// Solver knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Goursat grid subdivisions per strip.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Strip count for the subdivide-and-paste solve.
    #[serde(default = "default_strips")]
    pub n_strips: usize,
    /// Reconstruction grid subdivisions per axis.
    #[serde(default = "default_nt")]
    pub nt: usize,
    /// Coefficient factor (1 or 2) multiplying the zero-order scalar term.
    #[serde(default = "default_factor")]
    pub factor: f64,
    /// Residual bound for a solve to count as passing (exit status).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn default_n() -> usize {
    96
}
fn default_strips() -> usize {
    1
}
fn default_nt() -> usize {
    96
}
fn default_factor() -> f64 {
    1.0
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: default_n(),
            n_strips: default_strips(),
            nt: default_nt(),
            factor: default_factor(),
            tolerance: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.factor != 1.0 && self.factor != 2.0 {
            return Err(Error::Config(format!(
                "zero-order coefficient factor must be 1 or 2, got {}",
                self.factor
            )));
        }
        if self.n < 8 || self.nt < 8 {
            return Err(Error::Config("grid subdivisions must be at least 8".into()));
        }
        Ok(())
    }

    pub fn strain_params(&self) -> StrainParams {
        StrainParams { n: self.n, n_strips: self.n_strips, ..StrainParams::default() }
    }
}

/// Sweep block for the match-order and recovery experiments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Matching order.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Thickness exponent `e_h = h^β`.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// ε list for the match-order defect sweep.
    #[serde(default)]
    pub eps_list: Vec<f64>,
    /// Thickness list for the recovery-energy sweep.
    #[serde(default)]
    pub h_list: Vec<f64>,
    /// Amplitude applied to the sample isometry before the experiment.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

fn default_m() -> usize {
    2
}
fn default_beta() -> f64 {
    3.0
}
fn default_amplitude() -> f64 {
    1.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> String {
        r#"{
            "schema_version": 1,
            "surface": {"name": "saddle", "domain": [-2, 2, -2, 2]},
            "region": {"kind": "saddle_diag_box", "center": [0, 0], "a": 0.5, "b": 0.5},
            "fields": {"u11": "sin(x1) * x2", "q0": "t^2"},
            "solver": {"n": 48, "nt": 32, "factor": 2}
        }"#
        .into()
    }

    #[test]
    fn parses_and_builds_a_valid_config() {
        let cfg: ProblemConfig = serde_json::from_str(&sample_json()).unwrap();
        cfg.validate().unwrap();
        let surf = cfg.surface.build().unwrap();
        assert!((surf.gauss_curvature_at(V2::zeros()) + 1.0).abs() < 1e-12);
        let region = cfg.region.build().unwrap();
        assert_eq!(region.a, 0.5);
        let u = cfg.fields.strain_field().unwrap();
        let m = u(V2::new(0.3, 0.7));
        assert!((m[(0, 0)] - 0.3f64.sin() * 0.7).abs() < 1e-15);
        assert_eq!(m[(0, 1)], 0.0);
        let data = cfg.fields.strain_data().unwrap();
        assert!((data.q0.val(0.5) - 0.25).abs() < 1e-15);
        assert_eq!(data.p1.val(0.3), 0.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let with_extra = sample_json().replace("\"solver\"", "\"extra\": 1, \"solver\"");
        assert!(serde_json::from_str::<ProblemConfig>(&with_extra).is_err());

        let bad_factor = sample_json().replace("\"factor\": 2", "\"factor\": 3");
        let cfg: ProblemConfig = serde_json::from_str(&bad_factor).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let bad_version = sample_json().replace("\"schema_version\": 1", "\"schema_version\": 9");
        let cfg: ProblemConfig = serde_json::from_str(&bad_version).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));

        let bad_expr = sample_json().replace("t^2", "t^^2");
        let cfg: ProblemConfig = serde_json::from_str(&bad_expr).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn expression_region_map_matches_affine_box() {
        let json = r#"{
            "schema_version": 1,
            "surface": {"name": "saddle"},
            "region": {"kind": "alpha", "x1": "0.1 + t - s", "x2": "t + s", "a": 0.4, "b": 0.3}
        }"#;
        let cfg: ProblemConfig = serde_json::from_str(json).unwrap();
        cfg.validate().unwrap();
        let region = cfg.region.build().unwrap();
        let x = region.point(0.2, 0.1);
        assert!((x - V2::new(0.2, 0.3)).norm() < 1e-12);
        let j = region.map.jacobian(0.2, 0.1);
        assert!((j - M2::new(1.0, -1.0, 1.0, 1.0)).norm() < 1e-8);
    }
}
