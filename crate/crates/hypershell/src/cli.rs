//! Batch front end: config-driven `solve`, `verify`, and `sweep` commands.
//!
//! Each command loads its inputs, runs the corresponding pipeline, and
//! writes artifacts into an output directory. Artifacts are deterministic:
//! floats are printed with 17 significant digits in lowercase scientific
//! notation, no timestamps appear in data files, and every file is written
//! atomically (temp file + rename) so a crashed run never leaves a partial
//! artifact behind.
//!
//! Exit-code contract (enforced by the binary around these functions):
//! `0` success, `1` verification failure, `2` malformed config, `3`
//! geometry violation (non-hyperbolic surface, characteristic region),
//! `4` solver or I/O failure.

use crate::config::{ProblemConfig, SCHEMA_VERSION};
use crate::energy::{recovery_energy_sweep, ElasticLaw};
use crate::error::{Error, Result};
use crate::geometry::M2;
use crate::isometry::{defect_sweep, fit_order, match_higher_order, metric_defect, solve_isometry};
use crate::strain::{
    assemble_scalar_problem, check_noncharacteristic, reconstruct_displacement,
    residual_sym_grad, sample_strain_input, solve_strain, DisplacementField, SymField,
};
use crate::verify::{fmt_float, run_suites, SuiteReport};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Artifact table format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<OutputFormat> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format {other:?} (csv | json)"))),
        }
    }
}

/// Writes `bytes` to `path` atomically (temp file in the same directory,
/// then rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

/// Residual report of a strain solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReportArtifact {
    pub schema_version: u32,
    /// Sup-norm of `sym∇y − U` over interior grid nodes.
    pub sup_residual: f64,
    /// Grid L² norm of the same residual.
    pub l2_residual: f64,
    /// Disagreement between the two reconstruction path orders.
    pub curl_defect: f64,
    /// Total Picard iterations across all Goursat subproblems.
    pub iterations: usize,
}

/// Runs the full strain pipeline for a problem config: gate check,
/// reduction, Goursat solve, reconstruction. Writes the displacement grid
/// (`displacement.csv` or `.json`) and `residual_report.json` into `out`.
/// An optional `grid` overrides the config's solver refinement.
pub fn cmd_solve(
    config_path: &Path,
    out: &Path,
    grid: Option<usize>,
    format: OutputFormat,
) -> Result<SolveReportArtifact> {
    let cfg = ProblemConfig::load(config_path)?;
    let surf = Arc::new(cfg.surface.build()?);
    let region = cfg.region.build()?;

    let gate = check_noncharacteristic(&surf, &region, 41);
    if !gate.pass {
        return Err(Error::Characteristic(format!(
            "region '{}' violates the noncharacteristic invariants: min |Π(α_t,α_t)| = {}, \
             min lateral |Π(α_s,α_s)| = {}, max lateral |Π(α_t,α_s)| = {}",
            gate.label,
            fmt_float(gate.min_sweep),
            fmt_float(gate.min_lateral),
            fmt_float(gate.max_mixed)
        )));
    }

    let u: SymField = cfg.fields.strain_field()?;
    let data = cfg.fields.boundary_data(&surf, &region)?;
    let mut params = cfg.solver.strain_params();
    if let Some(n) = grid {
        params.n = n;
    }
    let problem = assemble_scalar_problem(
        &surf,
        sample_strain_input(&region, &u, 160, 0.1),
        cfg.solver.factor,
    )?;
    let sol = solve_strain(&surf, &region, &problem, &data, &params)?;
    let field = reconstruct_displacement(&surf, &region, &problem, &sol, cfg.solver.nt, cfg.solver.nt)?;
    let (sup, l2) = residual_sym_grad(&surf, &field, &u);

    let report = SolveReportArtifact {
        schema_version: SCHEMA_VERSION,
        sup_residual: sup,
        l2_residual: l2,
        curl_defect: field.curl_defect,
        iterations: sol.reports.iter().flat_map(|r| r.iterations.iter()).sum(),
    };

    match format {
        OutputFormat::Csv => {
            write_atomic(&out.join("displacement.csv"), displacement_csv(&field).as_bytes())?
        }
        OutputFormat::Json => {
            write_json(&out.join("displacement.json"), &displacement_json(&field))?
        }
    }
    write_json(&out.join("residual_report.json"), &report)?;

    if let Some(tol) = cfg.solver.tolerance {
        if sup > tol {
            return Err(Error::Numerical(format!(
                "solve residual {} exceeds the configured tolerance {}",
                fmt_float(sup),
                fmt_float(tol)
            )));
        }
    }
    Ok(report)
}

fn displacement_csv(field: &DisplacementField) -> String {
    let mut s = String::from("t,s,x1,x2,y1,y2,y3,w_normal,rotation\n");
    for j in 0..field.ss.len() {
        for i in 0..field.ts.len() {
            let (t, ss) = (field.ts[i], field.ss[j]);
            let x = field.region.point(t, ss);
            let k = field.idx(i, j);
            let y = field.y[k];
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                fmt_float(t),
                fmt_float(ss),
                fmt_float(x[0]),
                fmt_float(x[1]),
                fmt_float(y[0]),
                fmt_float(y[1]),
                fmt_float(y[2]),
                fmt_float(field.w_normal[k]),
                fmt_float(field.v[k]),
            );
        }
    }
    s
}

#[derive(Serialize)]
struct DisplacementArtifact {
    schema_version: u32,
    ts: Vec<f64>,
    ss: Vec<f64>,
    /// Row-major (`s` outer, `t` inner) displacement 3-vectors.
    y: Vec<[f64; 3]>,
    w_normal: Vec<f64>,
    rotation: Vec<f64>,
}

fn displacement_json(field: &DisplacementField) -> DisplacementArtifact {
    DisplacementArtifact {
        schema_version: SCHEMA_VERSION,
        ts: field.ts.clone(),
        ss: field.ss.clone(),
        y: field.y.iter().map(|v| [v[0], v[1], v[2]]).collect(),
        w_normal: field.w_normal.clone(),
        rotation: field.v.clone(),
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// Runs the named verification suite (or `all`), writes one
/// `verify_<suite>.json` per suite into `out`, prints the pass/fail table
/// to stdout, and returns the reports. The process exit code is decided by
/// the caller from the aggregate pass flag.
pub fn cmd_verify(suite: &str, out: &Path) -> Result<Vec<SuiteReport>> {
    let reports = run_suites(suite)?;
    for rep in &reports {
        write_json(&out.join(format!("verify_{}.json", rep.suite)), rep)?;
        for case in &rep.cases {
            println!(
                "[{}] {} :: {} — {}",
                if case.pass { "PASS" } else { "FAIL" },
                rep.suite,
                case.name,
                case.detail
            );
        }
    }
    let all_pass = reports.iter().all(|r| r.pass);
    println!("verify {suite}: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(reports)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Sweep experiment selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Metric-defect decay of the matched family against ε.
    MatchOrder,
    /// Recovery-sequence shell energies against thickness h.
    Recovery,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<SweepKind> {
        match s {
            "match-order" => Ok(SweepKind::MatchOrder),
            "recovery" => Ok(SweepKind::Recovery),
            other => {
                Err(Error::Config(format!("unknown sweep kind {other:?} (match-order | recovery)")))
            }
        }
    }
}

/// Summary of a match-order sweep.
#[derive(Debug, Clone, Serialize)]
pub struct MatchOrderSummary {
    pub schema_version: u32,
    pub m: usize,
    /// Fitted log-log slope of the metric defect, `None` when every point
    /// is floor-censored.
    pub slope: Option<f64>,
    /// Censoring floor (10× the zero-amplitude defect).
    pub floor: f64,
    pub censored: usize,
    pub points: Vec<(f64, f64)>,
}

/// Summary of a recovery-energy sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RecoverySummary {
    pub schema_version: u32,
    pub m: usize,
    pub beta: f64,
    /// Bending energy of the underlying isometry.
    pub i_v: f64,
    /// `(h, e_h, E_h/e_h, ratio, resolvable)` per thickness.
    pub rows: Vec<(f64, f64, f64, f64, bool)>,
}

/// Runs a sweep experiment from a config with a `sweep` block: solves the
/// base isometry, then either sweeps the matched family's metric defect
/// over `eps_list` (`match-order`) or the recovery-sequence shell energy
/// over `h_list` (`recovery`). Writes `sweep_<kind>.csv` (or `.json`) plus
/// `sweep_<kind>_summary.json` into `out`.
pub fn cmd_sweep(
    config_path: &Path,
    kind: SweepKind,
    out: &Path,
    format: OutputFormat,
) -> Result<()> {
    let cfg = ProblemConfig::load(config_path)?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep command needs a sweep block in the config".into()))?;
    let surf = Arc::new(cfg.surface.build()?);
    let region = cfg.region.build()?;
    let gate = check_noncharacteristic(&surf, &region, 41);
    if !gate.pass {
        return Err(Error::Characteristic(format!(
            "region '{}' violates the noncharacteristic invariants",
            gate.label
        )));
    }
    let params = cfg.solver.strain_params();
    let data = cfg.fields.boundary_data(&surf, &region)?;
    let data = if cfg.fields.rigid_axis.is_none()
        && [&cfg.fields.q0, &cfg.fields.q1, &cfg.fields.p1, &cfg.fields.p2]
            .iter()
            .all(|e| e.is_none())
    {
        // No explicit data: fall back to the deterministic sample isometry.
        crate::isometry::sample_isometry_data(&surf, &region)
    } else {
        data
    };
    let v = Arc::new(
        solve_isometry(&surf, &region, &data, &params, cfg.solver.nt)?.scaled(sweep.amplitude),
    );
    // The base solve must be strain-free at grid scale before any sweep.
    let zero: SymField = Arc::new(|_| M2::zeros());
    let (sup, _) = residual_sym_grad(&surf, &v, &zero);
    if sup > sweep.amplitude * 1e-3 {
        return Err(Error::Numerical(format!(
            "base isometry residual {} is not at grid scale",
            fmt_float(sup)
        )));
    }

    match kind {
        SweepKind::MatchOrder => {
            if sweep.eps_list.is_empty() {
                return Err(Error::Config("match-order sweep needs a non-empty eps_list".into()));
            }
            let family = match_higher_order(&surf, &region, v, sweep.m, &params, cfg.solver.nt)?;
            let floor = 10.0 * metric_defect(&surf, &family.deformation(0.0));
            let points = defect_sweep(&family, &sweep.eps_list);
            let fit = fit_order(&points, floor);
            let summary = MatchOrderSummary {
                schema_version: SCHEMA_VERSION,
                m: sweep.m,
                slope: fit.slope,
                floor,
                censored: fit.censored,
                points: points.clone(),
            };
            match format {
                OutputFormat::Csv => {
                    let mut table = String::from("eps,defect\n");
                    for &(e, d) in &points {
                        let _ = writeln!(table, "{},{}", fmt_float(e), fmt_float(d));
                    }
                    write_atomic(&out.join("sweep_match_order.csv"), table.as_bytes())?;
                }
                OutputFormat::Json => {
                    write_json(&out.join("sweep_match_order.json"), &summary)?;
                }
            }
            write_json(&out.join("sweep_match_order_summary.json"), &summary)?;
        }
        SweepKind::Recovery => {
            let law = ElasticLaw::default();
            let table = recovery_energy_sweep(
                &surf,
                &region,
                v,
                &law,
                sweep.m,
                sweep.beta,
                &sweep.h_list,
                &params,
                cfg.solver.nt,
            )?;
            let summary = RecoverySummary {
                schema_version: SCHEMA_VERSION,
                m: sweep.m,
                beta: sweep.beta,
                i_v: table.i_v,
                rows: table
                    .rows
                    .iter()
                    .map(|r| (r.h, r.e_h, r.energy_per_eh, r.ratio, r.resolvable))
                    .collect(),
            };
            match format {
                OutputFormat::Csv => {
                    let mut csv = String::from("h,e_h,energy_per_eh,ratio,resolvable\n");
                    for r in &table.rows {
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{}",
                            fmt_float(r.h),
                            fmt_float(r.e_h),
                            fmt_float(r.energy_per_eh),
                            fmt_float(r.ratio),
                            r.resolvable
                        );
                    }
                    write_atomic(&out.join("sweep_recovery.csv"), csv.as_bytes())?;
                }
                OutputFormat::Json => {
                    write_json(&out.join("sweep_recovery.json"), &summary)?;
                }
            }
            write_json(&out.join("sweep_recovery_summary.json"), &summary)?;
        }
    }
    Ok(())
}
