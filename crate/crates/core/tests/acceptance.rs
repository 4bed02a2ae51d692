//! Acceptance suite: one pass/fail line per criterion. Runs as a plain
//! binary (harness = false) so the lines always reach the test output.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pxell::config::{parse_config, Mode};
use pxell::cooperative::{self, SystemSolution};
use pxell::exponents::{Descriptor, ExponentField};
use pxell::grid::Grid;
use pxell::moser;
use pxell::nonlinearity::{Form, NonlinearitySpec};
use pxell::pde::{
    compare_solutions, energy, solve_dirichlet, weak_residual, DirichletProblem, SolverConfig,
};
use pxell::run::{execute, write_artifacts};
use pxell::space::{luxemburg_norm, modular, GridFunction};

const COOP_CFG: &str = include_str!("../../../configs/cooperative.cfg");
const COMP_CFG: &str = include_str!("../../../configs/competitive.cfg");

fn square(n: usize) -> Arc<Grid> {
    Arc::new(Grid::rectangle((0.0, 1.0), (0.0, 1.0), n, n).unwrap())
}

fn catalog_cooperative(grid: &Grid, m: f64) -> (NonlinearitySpec, NonlinearitySpec) {
    let f = NonlinearitySpec::new(
        Form::Product,
        m,
        ExponentField::constant(-0.3, grid),
        ExponentField::constant(0.5, grid),
    )
    .unwrap();
    let g = NonlinearitySpec::new(
        Form::Product,
        m,
        ExponentField::constant(0.5, grid),
        ExponentField::constant(-0.3, grid),
    )
    .unwrap();
    (f, g)
}

/// Criterion 1: Luxemburg-norm suite on 200 random fields with random
/// sinusoidal exponents in [1.2, 1.9].
fn criterion_1() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = square(33);
    for trial in 0..200 {
        let a = rng.gen_range(1.35..1.75);
        let half = (a - 1.2f64).min(1.9 - a);
        let b = rng.gen_range(0.05..half);
        let desc = Descriptor::Sinusoidal {
            a,
            b,
            c: rng.gen_range(0.5..6.0),
            e: rng.gen_range(0.5..6.0),
        };
        let p = ExponentField::sample(desc, &grid);
        let scale = 10.0f64.powf(rng.gen_range(-1.3..1.3));
        let values: Vec<f64> = (0..grid.node_count())
            .map(|_| scale * rng.gen_range(-1.0..1.0))
            .collect();
        let u = GridFunction::from_values(Arc::clone(&grid), values, false);
        let norm = luxemburg_norm(&u, &p);
        assert!(norm > 0.0, "trial {trial}: degenerate norm");

        // L1(ii): the modular at the unit scaling equals one.
        let unit = modular(&u.scaled(1.0 / norm), &p);
        assert!(
            (unit - 1.0).abs() <= 1e-9,
            "trial {trial}: unit modular {unit}"
        );

        // L1(i): norm-modular inequalities with the field extrema.
        let rho = modular(&u, &p);
        let (lo, hi) = (norm.powf(p.min()), norm.powf(p.max()));
        let slack = 1e-9 * (1.0 + rho);
        if norm > 1.0 + 1e-12 {
            assert!(
                lo <= rho + slack && rho <= hi + slack,
                "trial {trial}: L1(i) large side: {lo} {rho} {hi}"
            );
        } else if norm < 1.0 - 1e-12 {
            assert!(
                hi <= rho + slack && rho <= lo + slack,
                "trial {trial}: L1(i) small side: {hi} {rho} {lo}"
            );
        }

        // Homogeneity of the norm.
        let c = rng.gen_range(0.3..4.0);
        let scaled = luxemburg_norm(&u.scaled(c), &p);
        assert!(
            (scaled - c * norm).abs() <= 1e-9 * c * norm.max(1.0),
            "trial {trial}: homogeneity {scaled} vs {}",
            c * norm
        );

        // Constant-exponent agreement: the norm is the modular^{1/p}.
        let pc = rng.gen_range(1.2..1.9);
        let pconst = ExponentField::constant(pc, &grid);
        let nc = luxemburg_norm(&u, &pconst);
        let expect = modular(&u, &pconst).powf(1.0 / pc);
        assert!(
            (nc - expect).abs() <= 1e-9 * expect.max(1.0),
            "trial {trial}: constant-p {nc} vs {expect}"
        );
    }
}

/// Criterion 2: linear (p = 2) oracle against the Fourier torsion series in
/// 2-D and the parabola in 1-D.
fn criterion_2() {
    // Fourier series for -Laplace(u) = 1 on the unit square, at the center.
    let mut oracle = 0.0f64;
    for m in (1..400).step_by(2) {
        for n in (1..400).step_by(2) {
            let (mf, nf) = (m as f64, n as f64);
            let sign = if ((m - 1) / 2 + (n - 1) / 2) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            oracle += 16.0 / std::f64::consts::PI.powi(4) * sign
                / (mf * nf * (mf * mf + nf * nf));
        }
    }

    let grid = square(129);
    let p = ExponentField::constant(2.0, &grid);
    let prob = DirichletProblem::constant_source(Arc::clone(&grid), p, 1.0).unwrap();
    let (u, rep) = solve_dirichlet(&prob, &SolverConfig::default(), None).unwrap();
    assert!(rep.converged);
    let sup = u.sup_norm();
    assert!(
        (sup - oracle).abs() <= 1e-3,
        "2-D sup {sup} vs Fourier {oracle}"
    );

    let grid = Arc::new(Grid::interval(0.0, 1.0, 129).unwrap());
    let p = ExponentField::constant(2.0, &grid);
    let prob = DirichletProblem::constant_source(Arc::clone(&grid), p, 1.0).unwrap();
    let (u, rep) = solve_dirichlet(&prob, &SolverConfig::default(), None).unwrap();
    assert!(rep.converged);
    for i in 0..grid.node_count() {
        let x = grid.node_coord(i)[0];
        let exact = 0.5 * x * (1.0 - x);
        assert!(
            (u.values()[i] - exact).abs() <= 1e-6,
            "1-D node {i}: {} vs {exact}",
            u.values()[i]
        );
    }
}

/// Criterion 3: the weak residual is the gradient of the energy (centered
/// finite differences, 20 random states).
fn criterion_3() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = square(17);
    let descriptors = [
        Descriptor::Constant(1.5),
        Descriptor::Sinusoidal {
            a: 1.6,
            b: 0.2,
            c: 3.0,
            e: 2.0,
        },
    ];
    for trial in 0..20 {
        let p = ExponentField::sample(descriptors[trial % 2].clone(), &grid);
        let prob = DirichletProblem::constant_source(Arc::clone(&grid), p, 1.0).unwrap();
        let values: Vec<f64> = (0..grid.node_count())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let u = GridFunction::from_values(Arc::clone(&grid), values, true);
        let eps = 1e-3;
        let r = weak_residual(&u, &prob, eps);
        let scale = r.sup_norm();
        for &node in &grid.interior_nodes() {
            let delta = 1e-6 * (1.0 + u.values()[node].abs());
            let mut up = u.clone();
            up.values_mut()[node] += delta;
            let mut dn = u.clone();
            dn.values_mut()[node] -= delta;
            let fd = (energy(&up, &prob, eps) - energy(&dn, &prob, eps)) / (2.0 * delta);
            assert!(
                (fd - r.values()[node]).abs() <= 1e-6 * scale,
                "trial {trial} node {node}: fd {fd} vs residual {}",
                r.values()[node]
            );
        }
    }
}

/// Criterion 4: weak comparison on 50 random ordered source pairs.
fn criterion_4() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = square(33);
    let cfg = SolverConfig::default();
    for trial in 0..50 {
        let pv = if trial % 2 == 0 { 1.5 } else { 1.8 };
        let p = ExponentField::constant(pv, &grid);
        let h1: Vec<f64> = (0..grid.cell_count())
            .map(|_| 0.2 + rng.gen_range(0.0..1.0))
            .collect();
        let h2: Vec<f64> = h1.iter().map(|v| v + rng.gen_range(0.0..0.8)).collect();
        let prob1 = DirichletProblem::new(Arc::clone(&grid), p.clone(), h1).unwrap();
        let prob2 = DirichletProblem::new(Arc::clone(&grid), p, h2).unwrap();
        let (u1, r1) = solve_dirichlet(&prob1, &cfg, None).unwrap();
        let (u2, r2) = solve_dirichlet(&prob2, &cfg, Some(&u1)).unwrap();
        assert!(r1.converged && r2.converged, "trial {trial}: non-convergence");
        let ord = compare_solutions(&u1, &u2, 1e-8);
        assert!(
            ord.ordered,
            "trial {trial} (p = {pv}): violation {} at node {}",
            ord.max_violation, ord.worst_node
        );
    }
}

struct CoopRun {
    grid: Arc<Grid>,
    p: ExponentField,
    sol: SystemSolution,
    f: NonlinearitySpec,
    g: NonlinearitySpec,
}

fn cooperative_run(resolution: usize, m: f64) -> CoopRun {
    let grid = square(resolution);
    let p = ExponentField::constant(1.8, &grid);
    let (f, g) = catalog_cooperative(&grid, m);
    let sol =
        cooperative::run_fixed_point(&grid, &f, &g, &p, &p, &SolverConfig::default()).unwrap();
    CoopRun { grid, p, sol, f, g }
}

/// Criterion 5: cooperative catalog system end to end on the 65^2 grid.
fn criterion_5(run: &CoopRun) {
    let cfg = SolverConfig::default();
    let sol = &run.sol;
    let hyp = pxell::nonlinearity::validate_cooperative(&run.f, &run.g, &run.p, &run.p, 2, &run.grid)
        .unwrap();
    assert!(hyp.pass, "validator: {hyp:?}");
    assert!(sol.converged, "{:?}", sol.diagnostic);
    assert!(sol.trace.len() <= cooperative::MAX_PICARD_ITER);
    let last = sol.trace.last().unwrap();
    assert!(last.sup_delta <= cooperative::FIXED_POINT_TOL);
    assert!(sol.box_report.pass, "{:?}", sol.box_report);
    assert!(sol.box_report.truncation_inactive);
    let residual = cooperative::system_residual(
        &sol.u,
        &sol.v,
        &run.f,
        &run.g,
        &run.p,
        &run.p,
        cfg.final_eps(),
    )
    .unwrap();
    assert!(
        residual <= 10.0 * cfg.residual_tol,
        "system residual {residual}"
    );
    let d = run.grid.distance_to_boundary();
    for &i in &run.grid.interior_nodes() {
        let floor = 0.9 * sol.bounds.c0 * d[i];
        assert!(
            sol.u.values()[i] >= floor && sol.v.values()[i] >= floor,
            "node {i}: ({}, {}) below 0.9 c0 d = {floor}",
            sol.u.values()[i],
            sol.v.values()[i]
        );
    }
}

/// Criterion 6: competitive catalog system end to end on the 65^2 grid.
fn criterion_6() {
    let grid = square(65);
    let p = ExponentField::constant(1.8, &grid);
    let f = NonlinearitySpec::new(
        Form::SumInSecond,
        1.0,
        ExponentField::constant(0.5, &grid),
        ExponentField::constant(-0.3, &grid),
    )
    .unwrap();
    let g = NonlinearitySpec::new(
        Form::SumInFirst,
        1.0,
        ExponentField::constant(-0.3, &grid),
        ExponentField::constant(0.5, &grid),
    )
    .unwrap();
    let hyp = pxell::nonlinearity::validate_competitive(&f, &g, &p, &p, 2).unwrap();
    assert!(hyp.pass, "validator: {hyp:?}");

    let cfg = SolverConfig::default();
    let interval = pxell::competitive::find_lambda(&grid, &f, &g, &p, &p, 0.05, &cfg).unwrap();
    assert!(interval.lambda <= pxell::competitive::LAMBDA_CAP);
    let checks = &interval.checks;
    assert!(
        checks.sub_u && checks.sub_v && checks.super_u && checks.super_v,
        "comparison inequalities: {checks:?}"
    );
    assert!(checks.pass, "{checks:?}");

    let sol =
        pxell::competitive::run_order_interval_iteration(&grid, interval, &f, &g, &p, &p, &cfg)
            .unwrap();
    assert!(sol.converged, "{:?}", sol.diagnostic);
    assert!(
        sol.worst_membership_violation <= pxell::competitive::ITERATION_TOL,
        "membership violation {}",
        sol.worst_membership_violation
    );
    assert!(
        sol.final_system_residual <= 10.0 * cfg.residual_tol,
        "system residual {}",
        sol.final_system_residual
    );
}

fn chains_and_fit(run: &CoopRun) -> (moser::MoserChain, moser::MoserChain, moser::MoserReport) {
    let mut chain_u = moser::k_sequences(&run.p, 2, 6, &run.grid).unwrap();
    let mut chain_v = moser::k_sequences(&run.p, 2, 6, &run.grid).unwrap();
    moser::norm_chain(&run.sol.u, &mut chain_u);
    moser::norm_chain(&run.sol.v, &mut chain_v);
    let report = moser::fit_and_bound(
        &run.sol.u,
        &run.sol.v,
        &chain_u,
        &chain_v,
        &run.f.beta,
        &run.g.alpha,
    );
    (chain_u, chain_v, report)
}

/// Criterion 7: Moser chain verification on the criterion-5 solution plus
/// fitted-constant stability across the m family and grid refinement.
fn criterion_7(base: &CoopRun) {
    let (chain_u, _chain_v, report) = chains_and_fit(base);

    // Series partial sums against the closed-form limit.
    let (limit, sums) = moser::series_limit(1.8, 2).unwrap();
    assert!((sums.last().unwrap() - limit).abs() <= 1e-12);
    assert!((chain_u.series_limit - limit).abs() <= 1e-12);
    assert!(report.series_gap_u <= 1e-12 && report.series_gap_v <= 1e-12);

    // Norm chain monotone toward the sup of the excess, final entry within
    // the cell-interpolation allowance plus 1e-3.
    let excess = base.sol.u.positive_excess(1.0);
    let sup = excess.sup_norm();
    let cell_sup = (0..base.grid.cell_count())
        .map(|c| excess.at_cell(c).abs())
        .fold(0.0f64, f64::max);
    let allowance = sup - cell_sup;
    for w in chain_u.norms.windows(2) {
        assert!(w[1] >= w[0] - 1e-9, "chain not monotone: {:?}", chain_u.norms);
    }
    let last = *chain_u.norms.last().unwrap();
    assert!(last <= sup + 1e-9);
    assert!(
        sup - last <= allowance + 1e-3,
        "final entry {last} vs sup {sup} (allowance {allowance})"
    );

    // Chain inequality with one fitted constant at every level.
    assert!(report.chain_holds);

    // Fitted-constant stability: m in {1, 2, 4} and 65^2 -> 129^2.
    let c0 = report.u.c_hat;
    let mut family = vec![("m = 1, 65^2", report.u.c_hat, report.v.c_hat)];
    for m in [2.0, 4.0] {
        let run = cooperative_run(65, m);
        let (_, _, rep) = chains_and_fit(&run);
        assert!(rep.chain_holds, "chain fails at m = {m}");
        family.push(("m family", rep.u.c_hat, rep.v.c_hat));
    }
    let refined = cooperative_run(129, 1.0);
    let (_, _, rep) = chains_and_fit(&refined);
    assert!(rep.chain_holds, "chain fails on the refined grid");
    family.push(("refined", rep.u.c_hat, rep.v.c_hat));
    for (tag, cu, cv) in &family {
        for c in [cu, cv] {
            assert!(
                (*c - c0).abs() <= 0.2 * c0,
                "{tag}: fitted constant {c} vs baseline {c0}"
            );
        }
    }
}

/// Criterion 8: repeated runs produce bit-identical artifacts.
fn criterion_8() {
    let cases = [
        ("coop", COOP_CFG, Mode::Cooperative),
        ("comp", COMP_CFG, Mode::Competitive),
    ];
    for (tag, text, mode) in cases {
        let cfg = parse_config(text).unwrap();
        let base = std::env::temp_dir().join(format!("pxell-acceptance-{tag}"));
        let dirs = [base.join("a"), base.join("b")];
        for dir in &dirs {
            let _ = std::fs::remove_dir_all(dir);
            let out = execute(&cfg, mode, None).unwrap();
            assert_eq!(out.exit_code, 0, "{tag}: {}", out.report);
            write_artifacts(&out, dir).unwrap();
        }
        for name in ["fields.csv", "report.json", "trace.csv"] {
            let a = std::fs::read(dirs[0].join(name)).unwrap();
            let b = std::fs::read(dirs[1].join(name)).unwrap();
            assert!(a == b, "{tag}: artifact {name} differs between runs");
        }
        let _ = std::fs::remove_dir_all(&base);
    }
}

fn main() {
    let mut failures = 0;
    let coop65 = std::cell::OnceCell::new();
    let mut run = |n: usize, name: &str, budget_s: f64, body: &dyn Fn()| {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(body));
        let elapsed = start.elapsed().as_secs_f64();
        let ok = outcome.is_ok() && elapsed < budget_s;
        println!(
            "criterion {n} ({name}): {} [{elapsed:.1} s / budget {budget_s:.0} s]",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failures += 1;
        }
    };

    run(1, "Luxemburg norm suite", 30.0, &criterion_1);
    run(2, "linear torsion oracle", 60.0, &criterion_2);
    run(3, "energy gradient consistency", 30.0, &criterion_3);
    run(4, "weak comparison", 300.0, &criterion_4);
    run(5, "cooperative end-to-end", 600.0, &|| {
        criterion_5(coop65.get_or_init(|| cooperative_run(65, 1.0)))
    });
    run(6, "competitive end-to-end", 900.0, &criterion_6);
    run(7, "Moser chain verification", 600.0, &|| {
        criterion_7(coop65.get_or_init(|| cooperative_run(65, 1.0)))
    });
    run(8, "artifact determinism", 600.0, &criterion_8);

    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
