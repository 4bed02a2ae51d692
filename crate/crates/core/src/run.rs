//! Run orchestration: mode dispatch from a parsed configuration, structured
//! artifacts (fields CSV, JSON report, convergence trace CSV), and the exit
//! status contract.

use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::competitive;
use crate::config::{Mode, NonlinearityBlock, RunConfig};
use crate::cooperative::{self, TraceEntry};
use crate::exponents::ExponentField;
use crate::grid::Grid;
use crate::moser;
use crate::nonlinearity::{self, NonlinearitySpec};
use crate::pde::{solve_dirichlet, DirichletProblem};
use crate::space::GridFunction;
use crate::{Error, Result};

/// Exit status: converged and every verification passed.
pub const EXIT_OK: i32 = 0;
/// Exit status: converged with verification failures.
pub const EXIT_VERIFICATION_FAILED: i32 = 2;
/// Exit status: non-convergence.
pub const EXIT_NON_CONVERGENCE: i32 = 3;
/// Exit status: hypothesis validation failure.
pub const EXIT_HYPOTHESIS: i32 = 4;

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub report: Value,
    /// Solution pair for the fields CSV (v is zero for single-equation runs).
    pub fields: Option<(GridFunction, GridFunction)>,
    pub trace: Vec<TraceEntry>,
    pub grid: Arc<Grid>,
}

fn build_grid(cfg: &RunConfig, resolution_override: Option<usize>) -> Result<Arc<Grid>> {
    let r = resolution_override.unwrap_or(cfg.grid.resolution);
    let grid = if cfg.grid.dimension == 1 {
        Grid::interval(cfg.grid.x.0, cfg.grid.x.1, r)?
    } else {
        Grid::rectangle(cfg.grid.x, cfg.grid.y, r, r)?
    };
    Ok(Arc::new(grid))
}

fn build_spec(block: &NonlinearityBlock, grid: &Grid) -> Result<NonlinearitySpec> {
    NonlinearitySpec::new(
        block.form,
        block.m,
        ExponentField::sample(block.alpha.clone(), grid),
        ExponentField::sample(block.beta.clone(), grid),
    )
}

struct Prepared {
    grid: Arc<Grid>,
    p: ExponentField,
    q: ExponentField,
    f: Option<NonlinearitySpec>,
    g: Option<NonlinearitySpec>,
}

fn prepare(cfg: &RunConfig, resolution_override: Option<usize>) -> Result<Prepared> {
    let grid = build_grid(cfg, resolution_override)?;
    let p = ExponentField::sample(cfg.p.clone(), &grid);
    let q = ExponentField::sample(cfg.q.clone(), &grid);
    let f = cfg.f.as_ref().map(|b| build_spec(b, &grid)).transpose()?;
    let g = cfg.g.as_ref().map(|b| build_spec(b, &grid)).transpose()?;
    Ok(Prepared { grid, p, q, f, g })
}

/// Detects whether a system config is cooperative or competitive from the
/// sign of the coupling exponents (used by bare `validate` runs).
fn detect_structure(f: &NonlinearitySpec, g: &NonlinearitySpec) -> Mode {
    if f.beta.inf() > 0.0 && g.alpha.inf() > 0.0 {
        Mode::Cooperative
    } else {
        Mode::Competitive
    }
}

fn validate_for_mode(
    mode: Mode,
    prep: &Prepared,
    cfg: &RunConfig,
) -> Result<Option<nonlinearity::HypothesisReport>> {
    let (f, g) = match (&prep.f, &prep.g) {
        (Some(f), Some(g)) => (f, g),
        _ => return Ok(None),
    };
    let structure = match mode {
        Mode::Cooperative | Mode::VerifyMoser => Mode::Cooperative,
        Mode::Competitive => Mode::Competitive,
        Mode::Validate => detect_structure(f, g),
        Mode::Single => return Ok(None),
    };
    let report = match structure {
        Mode::Cooperative => {
            nonlinearity::validate_cooperative(f, g, &prep.p, &prep.q, cfg.grid.n, &prep.grid)?
        }
        _ => nonlinearity::validate_competitive(f, g, &prep.p, &prep.q, cfg.grid.n)?,
    };
    Ok(Some(report))
}

fn moser_value(
    u: &GridFunction,
    v: &GridFunction,
    prep: &Prepared,
    cfg: &RunConfig,
) -> Result<Value> {
    let f = prep.f.as_ref().unwrap();
    let g = prep.g.as_ref().unwrap();
    let mut chain_u = moser::k_sequences(&prep.p, cfg.grid.n, cfg.n_max, &prep.grid)?;
    let mut chain_v = moser::k_sequences(&prep.q, cfg.grid.n, cfg.n_max, &prep.grid)?;
    moser::norm_chain(u, &mut chain_u);
    moser::norm_chain(v, &mut chain_v);
    let report = moser::fit_and_bound(u, v, &chain_u, &chain_v, &f.beta, &g.alpha);
    Ok(json!({
        "chain_u": chain_u,
        "chain_v": chain_v,
        "report": report,
    }))
}

/// Executes the pipeline selected by `mode` (usually the config's own mode;
/// CLI subcommands may override it).
pub fn execute(
    cfg: &RunConfig,
    mode: Mode,
    resolution_override: Option<usize>,
) -> Result<RunOutcome> {
    let prep = prepare(cfg, resolution_override)?;
    let config_echo = serde_json::to_value(cfg).map_err(io_err)?;
    let hypothesis = match validate_for_mode(mode, &prep, cfg) {
        Ok(h) => h,
        Err(e) => {
            // Structural failures inside the validators (e.g. sigma = 0)
            // are hypothesis failures, not crashes.
            return Ok(RunOutcome {
                exit_code: EXIT_HYPOTHESIS,
                report: json!({
                    "mode": mode,
                    "config": config_echo,
                    "error": e.to_string(),
                }),
                fields: None,
                trace: Vec::new(),
                grid: prep.grid,
            });
        }
    };
    if let Some(h) = &hypothesis {
        if !h.pass {
            return Ok(RunOutcome {
                exit_code: EXIT_HYPOTHESIS,
                report: json!({
                    "mode": mode,
                    "config": config_echo,
                    "hypothesis": h,
                }),
                fields: None,
                trace: Vec::new(),
                grid: prep.grid,
            });
        }
    }

    match mode {
        Mode::Validate => Ok(RunOutcome {
            exit_code: EXIT_OK,
            report: json!({
                "mode": mode,
                "config": config_echo,
                "hypothesis": hypothesis,
            }),
            fields: None,
            trace: Vec::new(),
            grid: prep.grid,
        }),
        Mode::Single => {
            let prob = DirichletProblem::constant_source(
                Arc::clone(&prep.grid),
                prep.p.clone(),
                cfg.single.source,
            )?;
            let (u, rep) = solve_dirichlet(&prob, &cfg.solver, None)?;
            let exit_code = if rep.converged {
                EXIT_OK
            } else {
                EXIT_NON_CONVERGENCE
            };
            let v = GridFunction::zeros(Arc::clone(&prep.grid), true);
            Ok(RunOutcome {
                exit_code,
                report: json!({
                    "mode": mode,
                    "config": config_echo,
                    "solve": rep,
                    "sup_norm": u.sup_norm(),
                }),
                fields: Some((u, v)),
                trace: Vec::new(),
                grid: prep.grid,
            })
        }
        Mode::Cooperative | Mode::VerifyMoser => {
            let f = prep.f.as_ref().unwrap();
            let g = prep.g.as_ref().unwrap();
            let sol = match cooperative::run_fixed_point(
                &prep.grid, f, g, &prep.p, &prep.q, &cfg.solver,
            ) {
                Ok(sol) => sol,
                Err(Error::NonConvergence(msg)) => {
                    return Ok(RunOutcome {
                        exit_code: EXIT_NON_CONVERGENCE,
                        report: json!({
                            "mode": mode,
                            "config": config_echo,
                            "hypothesis": hypothesis,
                            "error": msg,
                        }),
                        fields: None,
                        trace: Vec::new(),
                        grid: prep.grid,
                    })
                }
                Err(e) => return Err(e),
            };
            let system_residual = cooperative::system_residual(
                &sol.u,
                &sol.v,
                f,
                g,
                &prep.p,
                &prep.q,
                cfg.solver.final_eps(),
            )?;
            let moser_report = moser_value(&sol.u, &sol.v, &prep, cfg)?;
            let residual_ok = system_residual <= 10.0 * cfg.solver.residual_tol;
            let exit_code = if !sol.converged {
                EXIT_NON_CONVERGENCE
            } else if sol.box_report.pass && residual_ok {
                EXIT_OK
            } else {
                EXIT_VERIFICATION_FAILED
            };
            let report = json!({
                "mode": mode,
                "config": config_echo,
                "hypothesis": hypothesis,
                "sigma": sol.sigma,
                "torsion": sol.torsion,
                "ceiling": sol.bounds.ceiling,
                "c0": sol.bounds.c0,
                "ceiling_doublings": sol.ceiling_doublings,
                "u_solve": sol.u_solve,
                "v_solve": sol.v_solve,
                "box": sol.box_report,
                "system_residual": system_residual,
                "converged": sol.converged,
                "diagnostic": sol.diagnostic,
                "sup_u": sol.u.sup_norm(),
                "sup_v": sol.v.sup_norm(),
                "moser": moser_report,
            });
            Ok(RunOutcome {
                exit_code,
                report,
                fields: Some((sol.u, sol.v)),
                trace: sol.trace,
                grid: prep.grid,
            })
        }
        Mode::Competitive => {
            let f = prep.f.as_ref().unwrap();
            let g = prep.g.as_ref().unwrap();
            let delta = cfg
                .competitive
                .delta
                .unwrap_or(0.1 * prep.grid.inradius());
            let interval = match competitive::find_lambda(
                &prep.grid, f, g, &prep.p, &prep.q, delta, &cfg.solver,
            ) {
                Ok(i) => i,
                Err(Error::NonConvergence(msg)) => {
                    return Ok(RunOutcome {
                        exit_code: EXIT_NON_CONVERGENCE,
                        report: json!({
                            "mode": mode,
                            "config": config_echo,
                            "hypothesis": hypothesis,
                            "error": msg,
                        }),
                        fields: None,
                        trace: Vec::new(),
                        grid: prep.grid,
                    })
                }
                Err(e) => return Err(e),
            };
            let interval_json = json!({
                "lambda": interval.lambda,
                "delta": interval.delta,
                "checks": interval.checks,
                "subsolutions": interval.sub_report,
                "supersolutions": interval.super_report,
            });
            let sol = competitive::run_order_interval_iteration(
                &prep.grid,
                interval,
                f,
                g,
                &prep.p,
                &prep.q,
                &cfg.solver,
            )?;
            let residual_ok = sol.final_system_residual <= 10.0 * cfg.solver.residual_tol;
            let membership_ok = sol.worst_membership_violation <= competitive::ITERATION_TOL;
            let exit_code = if !sol.converged {
                EXIT_NON_CONVERGENCE
            } else if residual_ok && membership_ok {
                EXIT_OK
            } else {
                EXIT_VERIFICATION_FAILED
            };
            let report = json!({
                "mode": mode,
                "config": config_echo,
                "hypothesis": hypothesis,
                "interval": interval_json,
                "u_solve": sol.u_solve,
                "v_solve": sol.v_solve,
                "worst_membership_violation": sol.worst_membership_violation,
                "system_residual": sol.final_system_residual,
                "converged": sol.converged,
                "diagnostic": sol.diagnostic,
                "sup_u": sol.u.sup_norm(),
                "sup_v": sol.v.sup_norm(),
            });
            Ok(RunOutcome {
                exit_code,
                report,
                fields: Some((sol.u, sol.v)),
                trace: sol.trace,
                grid: prep.grid,
            })
        }
    }
}

fn io_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}

/// Writes fields.csv (`x1,x2,u,v,d`, one row per node, row-major),
/// report.json, and trace.csv (`iter,sup_delta,residual`) into `out_dir`.
/// Float formatting is shortest-round-trip, so identical runs produce
/// bit-identical artifacts.
pub fn write_artifacts(outcome: &RunOutcome, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;

    if let Some((u, v)) = &outcome.fields {
        let grid = &outcome.grid;
        let d = grid.distance_to_boundary();
        let mut csv = String::from("x1,x2,u,v,d\n");
        for i in 0..grid.node_count() {
            let c = grid.node_coord(i);
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                c[0],
                c[1],
                u.values()[i],
                v.values()[i],
                d[i]
            ));
        }
        std::fs::write(out_dir.join("fields.csv"), csv)?;
    }

    let mut report = serde_json::to_string_pretty(&outcome.report).map_err(io_err)?;
    report.push('\n');
    std::fs::write(out_dir.join("report.json"), report)?;

    if !outcome.trace.is_empty() {
        let mut csv = String::from("iter,sup_delta,residual\n");
        for t in &outcome.trace {
            csv.push_str(&format!("{},{},{}\n", t.iter, t.sup_delta, t.residual));
        }
        std::fs::write(out_dir.join("trace.csv"), csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const COOP_SMALL: &str = "\
mode = cooperative
[grid]
resolution = 9
[p]
descriptor = constant 1.8
[f]
form = product
alpha = constant -0.3
beta = constant 0.5
[g]
form = product
alpha = constant 0.5
beta = constant -0.3
";

    #[test]
    fn validate_mode_passes_catalog() {
        let cfg = parse_config(COOP_SMALL).unwrap();
        let out = execute(&cfg, Mode::Validate, None).unwrap();
        assert_eq!(out.exit_code, EXIT_OK);
        assert!(out.report["hypothesis"]["pass"].as_bool().unwrap());
        assert!(out.fields.is_none());
    }

    #[test]
    fn broken_hypothesis_exits_four() {
        let text = COOP_SMALL.replace("alpha = constant -0.3", "alpha = constant -0.6");
        let cfg = parse_config(&text).unwrap();
        let out = execute(&cfg, Mode::Validate, None).unwrap();
        assert_eq!(out.exit_code, EXIT_HYPOTHESIS);
        let out = execute(&cfg, Mode::Cooperative, None).unwrap();
        assert_eq!(out.exit_code, EXIT_HYPOTHESIS);
    }

    #[test]
    fn single_mode_produces_fields() {
        let text = "\
mode = single
[grid]
resolution = 17
dimension = 1
[p]
descriptor = constant 2.0
";
        let cfg = parse_config(text).unwrap();
        let out = execute(&cfg, Mode::Single, None).unwrap();
        assert_eq!(out.exit_code, EXIT_OK);
        let (u, v) = out.fields.as_ref().unwrap();
        assert!((u.sup_norm() - 0.125).abs() < 1e-9);
        assert_eq!(v.sup_norm(), 0.0);
    }

    #[test]
    fn cooperative_small_end_to_end_with_artifacts() {
        let cfg = parse_config(COOP_SMALL).unwrap();
        let out = execute(&cfg, Mode::Cooperative, Some(17)).unwrap();
        assert_eq!(out.exit_code, EXIT_OK, "{}", out.report);
        assert!(!out.trace.is_empty());
        let dir = std::env::temp_dir().join("pxell-run-test");
        let _ = std::fs::remove_dir_all(&dir);
        write_artifacts(&out, &dir).unwrap();
        let fields = std::fs::read_to_string(dir.join("fields.csv")).unwrap();
        assert!(fields.starts_with("x1,x2,u,v,d\n"));
        assert_eq!(fields.lines().count(), 17 * 17 + 1);
        let report = std::fs::read_to_string(dir.join("report.json")).unwrap();
        assert!(report.contains("\"moser\""));
        let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
        assert!(trace.starts_with("iter,sup_delta,residual\n"));
        // Determinism: a second identical run writes identical bytes.
        let out2 = execute(&cfg, Mode::Cooperative, Some(17)).unwrap();
        let dir2 = std::env::temp_dir().join("pxell-run-test-2");
        let _ = std::fs::remove_dir_all(&dir2);
        write_artifacts(&out2, &dir2).unwrap();
        for name in ["fields.csv", "report.json", "trace.csv"] {
            let a = std::fs::read(dir.join(name)).unwrap();
            let b = std::fs::read(dir2.join(name)).unwrap();
            assert_eq!(a, b, "artifact {name} differs between runs");
        }
    }

    #[test]
    fn resolution_override_applies() {
        let cfg = parse_config(COOP_SMALL).unwrap();
        let out = execute(&cfg, Mode::Validate, Some(33)).unwrap();
        assert_eq!(out.grid.resolution()[0], 33);
    }
}
