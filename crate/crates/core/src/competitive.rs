//! Pipeline for the competitive system class: sub- and supersolution pairs
//! built from boundary-strip sources, the geometric search for an admissible
//! scaling constant, and the order-interval iteration of the solution map.

use std::sync::Arc;

use serde::Serialize;

use crate::cooperative::TraceEntry;
use crate::exponents::ExponentField;
use crate::grid::Grid;
use crate::nonlinearity::NonlinearitySpec;
use crate::pde::{
    solve_dirichlet, verify_subsolution, verify_supersolution, weak_residual, DirichletProblem,
    SolveReport, SolverConfig,
};
use crate::space::GridFunction;
use crate::{Error, Result};

/// Sup-norm tolerance for the outer order-interval iteration.
pub const ITERATION_TOL: f64 = 1e-6;
/// Outer iteration cap.
pub const MAX_ITERATIONS: usize = 200;
/// Inner Picard tolerance for the singular supersolution source.
pub const SUPER_INNER_TOL: f64 = 1e-8;
/// Inner Picard cap.
pub const SUPER_INNER_MAX: usize = 100;
/// Floor guarding the singular source on the first inner iterates.
pub const SINGULAR_FLOOR: f64 = 1e-8;
/// Largest scaling constant tried by the geometric search.
pub const LAMBDA_CAP: f64 = 32768.0;
/// One-sided tolerance for the comparison inequalities, absorbing solver
/// error in the constructed pairs.
pub const COMPARISON_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct SubsolutionReport {
    pub lambda: f64,
    pub delta: f64,
    /// Empirical c3 = min over interior nodes of the field over d(x).
    pub c3_u: f64,
    pub c3_v: f64,
    /// Empirical c4 = sup of the field times lambda^{1/(p+ - 1)}.
    pub c4_u: f64,
    pub c4_v: f64,
    pub u_solve: SolveReport,
    pub v_solve: SolveReport,
}

/// Solves the sign-flipping strip problems (+1/lambda off the strip,
/// -1/lambda inside it) for both exponents. Errors if either field fails
/// strict interior positivity (the strip is too wide).
pub fn build_subsolutions(
    grid: &Arc<Grid>,
    lambda: f64,
    delta: f64,
    p: &ExponentField,
    q: &ExponentField,
    cfg: &SolverConfig,
) -> Result<(GridFunction, GridFunction, SubsolutionReport)> {
    if !(lambda > 1.0) {
        return Err(Error::Config(format!("lambda = {lambda} must exceed 1")));
    }
    let strip = grid.boundary_strip(delta)?;
    if strip.covers_domain {
        return Err(Error::Config(format!(
            "strip width {delta} reaches the inradius {}; reduce delta",
            grid.inradius()
        )));
    }
    let source: Vec<f64> = strip
        .cell_in_strip
        .iter()
        .map(|&in_strip| if in_strip { -1.0 / lambda } else { 1.0 / lambda })
        .collect();
    let prob_u = DirichletProblem::new(Arc::clone(grid), p.clone(), source.clone())?;
    let prob_v = DirichletProblem::new(Arc::clone(grid), q.clone(), source)?;
    let (u, u_solve) = solve_dirichlet(&prob_u, cfg, None)?;
    let (v, v_solve) = solve_dirichlet(&prob_v, cfg, None)?;

    let d = grid.distance_to_boundary();
    let mut c3_u = f64::INFINITY;
    let mut c3_v = f64::INFINITY;
    for &i in grid.interior_nodes().iter() {
        if u.values()[i] <= 0.0 || v.values()[i] <= 0.0 {
            return Err(Error::Domain(format!(
                "subsolution is non-positive at interior node {i}; reduce delta (currently {delta})"
            )));
        }
        c3_u = c3_u.min(u.values()[i] / d[i]);
        c3_v = c3_v.min(v.values()[i] / d[i]);
    }
    let (_, p_plus) = p.analytic_extrema();
    let (_, q_plus) = q.analytic_extrema();
    let report = SubsolutionReport {
        lambda,
        delta,
        c3_u,
        c3_v,
        c4_u: u.sup_norm() * lambda.powf(1.0 / (p_plus - 1.0)),
        c4_v: v.sup_norm() * lambda.powf(1.0 / (q_plus - 1.0)),
        u_solve,
        v_solve,
    };
    Ok((u, v, report))
}

#[derive(Debug, Clone, Serialize)]
pub struct SupersolutionReport {
    pub lambda: f64,
    pub delta: f64,
    pub inner_iterations_u: usize,
    pub inner_iterations_v: usize,
    /// Whether min{delta, d(x)} <= field held at every node.
    pub lower_bound_holds_u: bool,
    pub lower_bound_holds_v: bool,
    /// Diagnostic log-log fit exponents of the fields against d in the strip.
    pub theta1: f64,
    pub theta2: f64,
    pub u_solve: SolveReport,
    pub v_solve: SolveReport,
}

/// Solves the singular-strip supersolution problem for one exponent by
/// inner Picard iteration on the strip source lambda * field^{-exp(x)}.
fn solve_supersolution(
    grid: &Arc<Grid>,
    lambda: f64,
    strip: &crate::grid::StripMask,
    s: &ExponentField,
    sing: &ExponentField,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport, usize)> {
    // First iterate: the strip source frozen at the value delta^{-exp}.
    let mut strip_value: Vec<f64> = (0..grid.cell_count())
        .map(|c| strip.delta.powf(-sing.at_cell(c)))
        .collect();
    let mut warm_cfg = cfg.clone();
    warm_cfg.eps_schedule = vec![cfg.final_eps()];
    let mut field: Option<GridFunction> = None;
    for iter in 0..SUPER_INNER_MAX {
        let source: Vec<f64> = (0..grid.cell_count())
            .map(|c| {
                if strip.cell_in_strip[c] {
                    lambda * strip_value[c]
                } else {
                    lambda
                }
            })
            .collect();
        let prob = DirichletProblem::new(Arc::clone(grid), s.clone(), source)?;
        let use_cfg = if field.is_some() { &warm_cfg } else { cfg };
        let (next, rep) = solve_dirichlet(&prob, use_cfg, field.as_ref())?;
        let delta_sup = field
            .as_ref()
            .map(|f| f.sup_distance(&next))
            .unwrap_or(f64::INFINITY);
        for c in 0..grid.cell_count() {
            if strip.cell_in_strip[c] {
                strip_value[c] = next.at_cell(c).max(SINGULAR_FLOOR).powf(-sing.at_cell(c));
            }
        }
        field = Some(next);
        if delta_sup <= SUPER_INNER_TOL {
            return Ok((field.unwrap(), rep, iter + 1));
        }
    }
    Err(Error::NonConvergence(format!(
        "supersolution inner iteration exceeded {SUPER_INNER_MAX} steps at lambda = {lambda}"
    )))
}

/// Log-log regression exponent of `field` against d(x) over interior strip
/// nodes (diagnostic only).
fn fit_theta(field: &GridFunction, grid: &Grid, strip: &crate::grid::StripMask) -> f64 {
    let d = grid.distance_to_boundary();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..grid.node_count() {
        if strip.node_in_strip[i] && d[i] > 0.0 && field.values()[i] > 0.0 {
            xs.push(d[i].ln());
            ys.push(field.values()[i].ln());
        }
    }
    if xs.len() < 2 {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Solves the two singular-strip supersolution problems (exponents alpha1
/// for the first field, beta2 for the second).
pub fn build_supersolutions(
    grid: &Arc<Grid>,
    lambda: f64,
    delta: f64,
    p: &ExponentField,
    q: &ExponentField,
    alpha1: &ExponentField,
    beta2: &ExponentField,
    cfg: &SolverConfig,
) -> Result<(GridFunction, GridFunction, SupersolutionReport)> {
    if !(lambda > 1.0) {
        return Err(Error::Config(format!("lambda = {lambda} must exceed 1")));
    }
    let strip = grid.boundary_strip(delta)?;
    if strip.covers_domain {
        return Err(Error::Config(format!(
            "strip width {delta} reaches the inradius {}; reduce delta",
            grid.inradius()
        )));
    }
    let (u, u_solve, inner_u) = solve_supersolution(grid, lambda, &strip, p, alpha1, cfg)?;
    let (v, v_solve, inner_v) = solve_supersolution(grid, lambda, &strip, q, beta2, cfg)?;
    let d = grid.distance_to_boundary();
    let lower = |f: &GridFunction| {
        f.values()
            .iter()
            .zip(&d)
            .all(|(&val, &di)| val >= di.min(delta) - 1e-12)
    };
    let report = SupersolutionReport {
        lambda,
        delta,
        inner_iterations_u: inner_u,
        inner_iterations_v: inner_v,
        lower_bound_holds_u: lower(&u),
        lower_bound_holds_v: lower(&v),
        theta1: fit_theta(&u, grid, &strip),
        theta2: fit_theta(&v, grid, &strip),
        u_solve,
        v_solve,
    };
    Ok((u, v, report))
}

/// The verified bracketing set K with the constant that produced it.
#[derive(Debug, Clone)]
pub struct OrderInterval {
    pub u_lower: GridFunction,
    pub v_lower: GridFunction,
    pub u_upper: GridFunction,
    pub v_upper: GridFunction,
    pub lambda: f64,
    pub delta: f64,
    pub checks: IntervalChecks,
    pub sub_report: SubsolutionReport,
    pub super_report: SupersolutionReport,
}

/// Pass/fail record for the four comparison inequalities and the ordering.
#[derive(Debug, Clone, Serialize)]
pub struct IntervalChecks {
    /// -Delta_p(lower u) <= f(lower u, upper v).
    pub sub_u: bool,
    /// -Delta_q(lower v) <= g(upper u, lower v).
    pub sub_v: bool,
    /// -Delta_p(upper u) >= f(upper u, lower v).
    pub super_u: bool,
    /// -Delta_q(upper v) >= g(lower u, upper v).
    pub super_v: bool,
    pub ordered_u: bool,
    pub ordered_v: bool,
    pub lower_bound_u: bool,
    pub lower_bound_v: bool,
    pub pass: bool,
    /// Worst one-sided violation across the four inequalities.
    pub worst_violation: f64,
}

fn coupled_source(
    spec: &NonlinearitySpec,
    first: &GridFunction,
    second: &GridFunction,
    grid: &Grid,
) -> Result<Vec<f64>> {
    (0..grid.cell_count())
        .map(|c| spec.eval_cell(first.at_cell(c), second.at_cell(c), c))
        .collect()
}

fn check_interval(
    grid: &Arc<Grid>,
    f: &NonlinearitySpec,
    g: &NonlinearitySpec,
    p: &ExponentField,
    q: &ExponentField,
    ul: &GridFunction,
    vl: &GridFunction,
    uu: &GridFunction,
    vu: &GridFunction,
    sup_rep: &SupersolutionReport,
    eps: f64,
) -> Result<IntervalChecks> {
    let sub_u_prob =
        DirichletProblem::new(Arc::clone(grid), p.clone(), coupled_source(f, ul, vu, grid)?)?;
    let sub_v_prob =
        DirichletProblem::new(Arc::clone(grid), q.clone(), coupled_source(g, uu, vl, grid)?)?;
    let super_u_prob =
        DirichletProblem::new(Arc::clone(grid), p.clone(), coupled_source(f, uu, vl, grid)?)?;
    let super_v_prob =
        DirichletProblem::new(Arc::clone(grid), q.clone(), coupled_source(g, ul, vu, grid)?)?;
    let sub_u = verify_subsolution(ul, &sub_u_prob, eps, COMPARISON_TOL);
    let sub_v = verify_subsolution(vl, &sub_v_prob, eps, COMPARISON_TOL);
    let super_u = verify_supersolution(uu, &super_u_prob, eps, COMPARISON_TOL);
    let super_v = verify_supersolution(vu, &super_v_prob, eps, COMPARISON_TOL);
    let ordered_u = crate::pde::compare_solutions(ul, uu, 1e-10).ordered;
    let ordered_v = crate::pde::compare_solutions(vl, vu, 1e-10).ordered;
    let worst_violation = sub_u
        .worst_violation
        .max(sub_v.worst_violation)
        .max(super_u.worst_violation)
        .max(super_v.worst_violation);
    let pass = sub_u.holds
        && sub_v.holds
        && super_u.holds
        && super_v.holds
        && ordered_u
        && ordered_v
        && sup_rep.lower_bound_holds_u
        && sup_rep.lower_bound_holds_v;
    Ok(IntervalChecks {
        sub_u: sub_u.holds,
        sub_v: sub_v.holds,
        super_u: super_u.holds,
        super_v: super_v.holds,
        ordered_u,
        ordered_v,
        lower_bound_u: sup_rep.lower_bound_holds_u,
        lower_bound_v: sup_rep.lower_bound_holds_v,
        pass,
        worst_violation,
    })
}

/// Geometric search lambda in {2, 4, ..., 2^15}: builds both pairs and
/// accepts the first lambda whose four comparison inequalities and ordering
/// all verify. Failure reports the check that kept failing.
pub fn find_lambda(
    grid: &Arc<Grid>,
    f: &NonlinearitySpec,
    g: &NonlinearitySpec,
    p: &ExponentField,
    q: &ExponentField,
    delta: f64,
    cfg: &SolverConfig,
) -> Result<OrderInterval> {
    let mut lambda = 2.0;
    let mut last_failure = String::new();
    while lambda <= LAMBDA_CAP {
        let (ul, vl, sub_report) = build_subsolutions(grid, lambda, delta, p, q, cfg)?;
        let (uu, vu, super_report) =
            build_supersolutions(grid, lambda, delta, p, q, &f.alpha, &g.beta, cfg)?;
        let checks = check_interval(
            grid,
            f,
            g,
            p,
            q,
            &ul,
            &vl,
            &uu,
            &vu,
            &super_report,
            cfg.final_eps(),
        )?;
        if checks.pass {
            return Ok(OrderInterval {
                u_lower: ul,
                v_lower: vl,
                u_upper: uu,
                v_upper: vu,
                lambda,
                delta,
                checks,
                sub_report,
                super_report,
            });
        }
        last_failure = format!(
            "lambda = {lambda}: sub_u {} sub_v {} super_u {} super_v {} ordered ({}, {}) lower bound ({}, {}), worst violation {:.3e}",
            checks.sub_u,
            checks.sub_v,
            checks.super_u,
            checks.super_v,
            checks.ordered_u,
            checks.ordered_v,
            checks.lower_bound_u,
            checks.lower_bound_v,
            checks.worst_violation
        );
        lambda *= 2.0;
    }
    Err(Error::NonConvergence(format!(
        "no admissible lambda up to {LAMBDA_CAP}; last failure: {last_failure}"
    )))
}

#[derive(Debug, Clone)]
pub struct CompetitiveSolution {
    pub u: GridFunction,
    pub v: GridFunction,
    pub interval: OrderInterval,
    pub trace: Vec<TraceEntry>,
    pub u_solve: SolveReport,
    pub v_solve: SolveReport,
    /// Worst excursion of any iterate outside K (positive = violation).
    pub worst_membership_violation: f64,
    /// Sup norm of the final weak residual of the true coupled system.
    pub final_system_residual: f64,
    pub converged: bool,
    pub diagnostic: Option<String>,
}

fn membership_violation(
    y1: &GridFunction,
    y2: &GridFunction,
    interval: &OrderInterval,
) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..y1.values().len() {
        worst = worst
            .max(interval.u_lower.values()[i] - y1.values()[i])
            .max(y1.values()[i] - interval.u_upper.values()[i])
            .max(interval.v_lower.values()[i] - y2.values()[i])
            .max(y2.values()[i] - interval.v_upper.values()[i]);
    }
    worst
}

/// Picard iteration of the solution map inside K, started from the upper
/// pair. Membership is checked and reported at every step, never clipped.
pub fn run_order_interval_iteration(
    grid: &Arc<Grid>,
    interval: OrderInterval,
    f: &NonlinearitySpec,
    g: &NonlinearitySpec,
    p: &ExponentField,
    q: &ExponentField,
    cfg: &SolverConfig,
) -> Result<CompetitiveSolution> {
    let mut warm_cfg = cfg.clone();
    warm_cfg.eps_schedule = vec![cfg.final_eps()];
    let mut y1 = interval.u_upper.clone();
    let mut y2 = interval.v_upper.clone();
    let mut trace = Vec::new();
    let mut worst_membership = 0.0f64;
    let mut converged = false;
    let mut u_solve = None;
    let mut v_solve = None;
    let mut final_system_residual = f64::INFINITY;
    for iter in 1..=MAX_ITERATIONS {
        let prob_u = DirichletProblem::new(
            Arc::clone(grid),
            p.clone(),
            coupled_source(f, &y1, &y2, grid)?,
        )?;
        let prob_v = DirichletProblem::new(
            Arc::clone(grid),
            q.clone(),
            coupled_source(g, &y1, &y2, grid)?,
        )?;
        let use_cfg = if iter == 1 { cfg } else { &warm_cfg };
        let (u_next, ur) = solve_dirichlet(&prob_u, use_cfg, Some(&y1))?;
        let (v_next, vr) = solve_dirichlet(&prob_v, use_cfg, Some(&y2))?;
        let sup_delta = y1.sup_distance(&u_next).max(y2.sup_distance(&v_next));
        let residual = ur.final_residual.max(vr.final_residual);
        trace.push(TraceEntry {
            iter,
            sup_delta,
            residual,
        });
        y1 = u_next;
        y2 = v_next;
        u_solve = Some(ur);
        v_solve = Some(vr);
        worst_membership = worst_membership.max(membership_violation(&y1, &y2, &interval));
        if worst_membership > ITERATION_TOL {
            break;
        }
        if sup_delta <= ITERATION_TOL {
            converged = true;
            // A posteriori residual of the true coupled system at the
            // current pair; keep contracting until it clears the 10x gate
            // (the Picard lag, not the inner solver, dominates it).
            let rp = DirichletProblem::new(
                Arc::clone(grid),
                p.clone(),
                coupled_source(f, &y1, &y2, grid)?,
            )?;
            let rq = DirichletProblem::new(
                Arc::clone(grid),
                q.clone(),
                coupled_source(g, &y1, &y2, grid)?,
            )?;
            final_system_residual = weak_residual(&y1, &rp, cfg.final_eps())
                .sup_norm()
                .max(weak_residual(&y2, &rq, cfg.final_eps()).sup_norm());
            if final_system_residual <= 10.0 * cfg.residual_tol || sup_delta == 0.0 {
                break;
            }
        }
    }
    let u_solve = u_solve.unwrap();
    let v_solve = v_solve.unwrap();
    if !final_system_residual.is_finite() {
        let rp = DirichletProblem::new(
            Arc::clone(grid),
            p.clone(),
            coupled_source(f, &y1, &y2, grid)?,
        )?;
        let rq = DirichletProblem::new(
            Arc::clone(grid),
            q.clone(),
            coupled_source(g, &y1, &y2, grid)?,
        )?;
        final_system_residual = weak_residual(&y1, &rp, cfg.final_eps())
            .sup_norm()
            .max(weak_residual(&y2, &rq, cfg.final_eps()).sup_norm());
    }

    let diagnostic = if worst_membership > ITERATION_TOL {
        Some(format!(
            "iterate escaped the order interval by {worst_membership:.3e} (tolerance {ITERATION_TOL})"
        ))
    } else if !converged {
        Some(format!(
            "order-interval iteration did not reach sup-delta {ITERATION_TOL} in {MAX_ITERATIONS} steps"
        ))
    } else if final_system_residual > 10.0 * cfg.residual_tol {
        Some(format!(
            "final system residual {final_system_residual:.3e} exceeds 10x solver tolerance"
        ))
    } else {
        None
    };
    let converged = converged && worst_membership <= ITERATION_TOL;
    Ok(CompetitiveSolution {
        u: y1,
        v: y2,
        interval,
        trace,
        u_solve,
        v_solve,
        worst_membership_violation: worst_membership,
        final_system_residual,
        converged,
        diagnostic,
    })
}
