//! The four subcommands. Exit codes: 0 success, 1 error (bad config, bad
//! dump, solver failure, oracle mismatch), 2 fixed point hit the outer
//! iteration cap (artifacts are still written).

use crate::config::RunConfig;
use crate::dump::{read_dump, write_dump};
use crate::refine::{cauchy_table, validate_levels, Level};
use crate::report;
use mfg_core::coupled::{global_residual, solve, Solution};
use mfg_core::estimates::DiagnosticsReport;
use mfg_core::oracle::{oracle_solve, within_oracle_limits};
use mfg_core::MfgError;
use std::path::Path;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_OUTER: i32 = 2;

fn fail(err: impl std::fmt::Display) -> i32 {
    eprintln!("error: {err}");
    EXIT_ERROR
}

fn write_solution_artifacts(
    config: &RunConfig,
    out_dir: &Path,
    solution: &Solution,
    problem: &mfg_core::ProblemSpec,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    if config.output.dump_fields {
        write_dump(
            &out_dir.join("fields.bin"),
            &solution.u,
            &solution.m,
            problem.nu,
            problem.horizon,
        )?;
    }
    let diagnostics =
        DiagnosticsReport::compute(&solution.u, &solution.m, problem, &config.estimate_options())?;
    report::write_diagnostics_json(&out_dir.join("diagnostics.json"), &diagnostics)?;
    report::write_diagnostics_csv(&out_dir.join("diagnostics.csv"), &diagnostics)?;
    report::write_history_csv(&out_dir.join("history.csv"), &solution.history)?;
    Ok(())
}

/// `solve <config>`: run the coupled solver, write dump + diagnostics +
/// residual history.
pub fn cmd_solve(config_path: &Path, output_root: &Path) -> i32 {
    let config = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return fail(format!("{e:#}")),
    };
    let (problem, solve_config) = match config.problem_spec().and_then(|p| {
        let s = config.solve_config()?;
        Ok((p, s))
    }) {
        Ok(pair) => pair,
        Err(e) => return fail(format!("{e:#}")),
    };
    let out_dir = output_root.join(&config.output.dir);

    match solve(&problem, &solve_config) {
        Ok(solution) => {
            if let Err(e) = write_solution_artifacts(&config, &out_dir, &solution, &problem) {
                return fail(format!("{e:#}"));
            }
            println!(
                "converged in {} outer iterations; artifacts in {}",
                solution.outer_iterations,
                out_dir.display()
            );
            EXIT_OK
        }
        Err(MfgError::MaxOuterExceeded {
            max_outer,
            delta,
            solution,
        }) => {
            if let Err(e) = write_solution_artifacts(&config, &out_dir, &solution, &problem) {
                return fail(format!("{e:#}"));
            }
            eprintln!(
                "fixed point did not converge within {max_outer} iterations (delta {delta:.3e}); \
                 best iterate written to {}",
                out_dir.display()
            );
            EXIT_MAX_OUTER
        }
        Err(e) => fail(e),
    }
}

/// `refine <config> --levels 8x8,16x16,32x32`: solve every level, write the
/// Cauchy difference table and per-level diagnostics.
pub fn cmd_refine(config_path: &Path, levels: &[Level], output_root: &Path) -> i32 {
    if let Err(e) = validate_levels(levels) {
        return fail(e);
    }
    let config = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return fail(format!("{e:#}")),
    };
    let problem = match config.problem_spec() {
        Ok(p) => p,
        Err(e) => return fail(format!("{e:#}")),
    };
    let out_dir = output_root.join(&config.output.dir);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail(e);
    }

    let mut solutions: Vec<Option<(mfg_core::grid::Trajectory, mfg_core::grid::Trajectory)>> =
        Vec::new();
    let mut level_reports: Vec<(Level, Option<DiagnosticsReport>)> = Vec::new();
    let mut any_failed = false;
    for level in levels {
        let solve_config = match config.solve_config_at(level.n_h, level.n_t) {
            Ok(c) => c,
            Err(e) => return fail(format!("{e:#}")),
        };
        let outcome = match solve(&problem, &solve_config) {
            Ok(solution) => Some(solution),
            Err(MfgError::MaxOuterExceeded { solution, delta, .. }) => {
                eprintln!("level {level}: fixed point stalled at delta {delta:.3e}");
                any_failed = true;
                Some(*solution)
            }
            Err(e) => {
                eprintln!("level {level}: {e}");
                any_failed = true;
                None
            }
        };
        match outcome {
            Some(solution) => {
                let diagnostics = DiagnosticsReport::compute(
                    &solution.u,
                    &solution.m,
                    &problem,
                    &config.estimate_options(),
                )
                .ok();
                level_reports.push((*level, diagnostics));
                println!(
                    "level {level}: {} outer iterations",
                    solution.outer_iterations
                );
                solutions.push(Some((solution.u, solution.m)));
            }
            None => {
                level_reports.push((*level, None));
                solutions.push(None);
            }
        }
    }

    let rows = cauchy_table(levels, &solutions);
    if let Err(e) = report::write_refinement_csv(&out_dir.join("refinement.csv"), &rows) {
        return fail(format!("{e:#}"));
    }
    if let Err(e) =
        report::write_level_diagnostics_csv(&out_dir.join("refinement_diagnostics.csv"), &level_reports)
    {
        return fail(format!("{e:#}"));
    }
    for row in &rows {
        println!(
            "{} -> {}: |du|_L1(Q) = {}, |dm|_L1(Q) = {}",
            row.coarse,
            row.fine,
            row.diff_u.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into()),
            row.diff_m.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into()),
        );
    }
    if any_failed {
        EXIT_MAX_OUTER
    } else {
        EXIT_OK
    }
}

/// `check <dump> <config>`: recompute residuals and diagnostics from a dump.
pub fn cmd_check(dump_path: &Path, config_path: &Path, output_root: &Path) -> i32 {
    let config = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return fail(format!("{e:#}")),
    };
    let problem = match config.problem_spec() {
        Ok(p) => p,
        Err(e) => return fail(format!("{e:#}")),
    };
    let dump = match read_dump(dump_path) {
        Ok(d) => d,
        Err(e) => return fail(format!("{e:#}")),
    };
    if dump.u.n_h() != config.discretization.n_h || dump.u.n_t() != config.discretization.n_t {
        return fail(format!(
            "dump discretization {}x{} does not match config {}x{}",
            dump.u.n_h(),
            dump.u.n_t(),
            config.discretization.n_h,
            config.discretization.n_t
        ));
    }
    if dump.nu != problem.nu || dump.horizon != problem.horizon {
        return fail("dump nu/T header does not match config");
    }

    let (bellman, fp) = match global_residual(&dump.u, &dump.m, &problem) {
        Ok(pair) => pair,
        Err(e) => return fail(e),
    };
    let diagnostics = match DiagnosticsReport::compute(
        &dump.u,
        &dump.m,
        &problem,
        &config.estimate_options(),
    ) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    let out_dir = output_root.join(&config.output.dir);
    if std::fs::create_dir_all(&out_dir).is_ok() {
        let _ = report::write_diagnostics_json(&out_dir.join("check_diagnostics.json"), &diagnostics);
    }
    let tol = config.solver.tol_residual_check;
    println!("bellman_linf = {bellman:.6e}");
    println!("fp_linf      = {fp:.6e}");
    println!("duality_residual = {:.6e}", diagnostics.duality_residual);
    println!(
        "kh mass drift {:.3e}, min {:.3e}",
        diagnostics.kh_worst_mass_drift, diagnostics.kh_worst_min
    );
    if bellman <= tol && fp <= tol {
        println!("OK: residuals within {tol:.1e}");
        EXIT_OK
    } else {
        eprintln!("FAIL: residuals exceed {tol:.1e}");
        EXIT_ERROR
    }
}

/// `oracle <config>`: dense space-time Newton vs the modular solver.
pub fn cmd_oracle(config_path: &Path) -> i32 {
    let config = match RunConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => return fail(format!("{e:#}")),
    };
    let (problem, solve_config) = match config.problem_spec().and_then(|p| {
        let s = config.solve_config()?;
        Ok((p, s))
    }) {
        Ok(pair) => pair,
        Err(e) => return fail(format!("{e:#}")),
    };
    if !within_oracle_limits(&solve_config) {
        return fail(format!(
            "instance too large for the dense oracle: need n_h <= 6, n_t <= 4, \
             2 n_t n_h^2 <= 512; got {}x{}",
            solve_config.n_h, solve_config.n_t
        ));
    }
    let oracle = match oracle_solve(&problem, &solve_config) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let modular = match solve(&problem, &solve_config) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let du = oracle.u.linf_distance(&modular.u);
    let dm = oracle.m.linf_distance(&modular.m);
    println!("linf discrepancy u: {du:.6e}");
    println!("linf discrepancy m: {dm:.6e}");
    if du <= 1e-7 && dm <= 1e-7 {
        println!("OK: modular solve matches dense oracle");
        EXIT_OK
    } else {
        eprintln!("FAIL: discrepancy above 1e-7");
        EXIT_ERROR
    }
}
