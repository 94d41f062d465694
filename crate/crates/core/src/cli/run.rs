use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::checks::run_checks;
use super::csv::{control_csv, gamma_sweep_csv, h_sweep_csv, solution_csv, write_text};
use super::{exit, Command, RunConfig};
use crate::analysis::{fit_rate, l2_error, FitWindow};
use crate::assembly::FracOperator;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, P0Function, P1Function};
use crate::ocp::{continuation, recover_multiplier, solve_fixed_gamma, OcpSolution};

/// Result of a run: exit code and the text printed on stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: String,
}

/// Dispatches on the command, inside a thread pool of `workers` threads if set.
pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let go = || match cfg.command {
        Command::Validate => run_validate(cfg),
        Command::Solve => run_solve(cfg),
        Command::GammaSweep => run_gamma_sweep(cfg),
        Command::HSweep => run_h_sweep(cfg),
    };
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot build a pool of {w} workers: {e}")))?
            .install(go),
        None => go(),
    }
}

fn mesh_of(cfg: &RunConfig, n: usize) -> Result<Arc<Mesh>> {
    Mesh::uniform(cfg.a, cfg.b, n).map(Arc::new).map_err(|e| Error::Config(e.to_string()))
}

fn assemble(cfg: &RunConfig, mesh: Arc<Mesh>) -> Result<FracOperator> {
    let op = FracOperator::assemble(mesh, cfg.problem.s)?;
    if cfg.dump_matrices {
        let stem = matrix_stem(cfg, op.mesh().n_cells());
        op.dump(&stem)?;
        log::info!("matrices written next to {}", stem.display());
    }
    Ok(op)
}

fn matrix_stem(cfg: &RunConfig, n: usize) -> PathBuf {
    let base = cfg.out.clone().unwrap_or_else(|| PathBuf::from("frac-ocp.csv"));
    let stem = base.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    base.with_file_name(format!("{stem}_n{n}"))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Runs the self-checks and emits one JSON object per line.
pub fn run_validate(cfg: &RunConfig) -> Result<Outcome> {
    let results = run_checks(cfg.fault_injection);
    let mut report = String::new();
    for r in &results {
        report.push_str(&serde_json::to_string(r).map_err(|e| Error::Oracle(e.to_string()))?);
        report.push('\n');
    }
    if let Some(out) = &cfg.out {
        write_text(out, &report)?;
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    log::info!("{} checks, {failed} failed", results.len());
    Ok(Outcome { exit_code: if failed == 0 { exit::SUCCESS } else { exit::CHECK_FAILED }, report })
}

/// Solves at the configured `gamma`, or along the schedule when none is set,
/// and writes the nodal and control CSVs.
pub fn run_solve(cfg: &RunConfig) -> Result<Outcome> {
    let mesh = mesh_of(cfg, cfg.n)?;
    let op = assemble(cfg, mesh.clone())?;
    let zero = P0Function::zeros(mesh.clone());
    let sol: OcpSolution = match cfg.gamma {
        Some(g) => solve_fixed_gamma(&cfg.problem, &op, g, &zero)?,
        None => {
            let rep = continuation(&cfg.problem, &op, &cfg.schedule, &zero, &zero)?;
            if let Some(f) = rep.failure {
                return Err(Error::NotConverged(f));
            }
            let mut last = rep.last.expect("a completed path has a last solution");
            last.converged &= rep.records.iter().all(|r| r.converged);
            last
        }
    };
    let mult = recover_multiplier(&cfg.problem, &sol.u, sol.gamma)?;
    if let Some(out) = &cfg.out {
        let u_d = cfg.problem.desired_state(&mesh);
        write_text(out, &solution_csv(&sol, u_d.values(), mult.nodal.values(), cfg.precision))?;
        write_text(&sibling(out, "_control"), &control_csv(&sol, cfg.precision))?;
    }
    let report = format!(
        "gamma = {:e}\nJgamma = {:.12e}\nJ = {:.12e}\nkkt = {:.3e}\nmult_l1 = {:.6e}\niterations = {}\nconverged = {}\n",
        sol.gamma, sol.objective, sol.objective_plain, sol.kkt_residual, mult.l1, sol.iterations, sol.converged
    );
    Ok(Outcome { exit_code: if sol.converged { exit::SUCCESS } else { exit::NOT_CONVERGED }, report })
}

/// γ-continuation on a fixed mesh, one CSV row per γ.
pub fn run_gamma_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let mesh = mesh_of(cfg, cfg.n)?;
    let op = assemble(cfg, mesh.clone())?;
    let zero = P0Function::zeros(mesh);
    let rep = continuation(&cfg.problem, &op, &cfg.schedule, &zero, &zero)?;
    let failed_gamma = rep.failure.as_ref().map(|_| cfg.schedule.gammas()[rep.records.len()]);
    let csv = gamma_sweep_csv(&rep.records, failed_gamma, cfg.precision);
    if let Some(out) = &cfg.out {
        write_text(out, &csv)?;
    }
    let code = if rep.all_converged() { exit::SUCCESS } else { exit::NOT_CONVERGED };
    Ok(Outcome { exit_code: code, report: csv })
}

/// Errors of one h-sweep level against the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct HSweepRow {
    pub n: usize,
    pub h: f64,
    pub err_u: f64,
    pub err_z: f64,
    pub converged: bool,
}

struct Level {
    mesh: Arc<Mesh>,
    z: P0Function,
    u: P1Function,
    converged: bool,
}

fn solve_level(cfg: &RunConfig, n: usize, gamma: f64, warm: Option<&P0Function>) -> Result<Level> {
    let mesh = mesh_of(cfg, n)?;
    let op = assemble(cfg, mesh.clone())?;
    let z0 = match warm {
        Some(z) => z.prolong(mesh.clone())?,
        None => P0Function::zeros(mesh.clone()),
    };
    let sol = solve_fixed_gamma(&cfg.problem, &op, gamma, &z0)?;
    log::info!("n = {n}: kkt = {:.2e}, {} iterations", sol.kkt_residual, sol.iterations);
    Ok(Level { mesh, z: sol.z, u: sol.u, converged: sol.converged })
}

fn errors_against(levels: &[Level], reference: &Level) -> Result<Vec<HSweepRow>> {
    levels
        .iter()
        .map(|l| {
            let u_ref = reference.u.inject(l.mesh.clone())?;
            let z_ref = reference.z.project(l.mesh.clone())?;
            let dz: Vec<f64> = l.z.values().iter().zip(z_ref.values()).map(|(a, b)| a - b).collect();
            Ok(HSweepRow {
                n: l.mesh.n_cells(),
                h: l.mesh.h(),
                err_u: l2_error(&l.u, &u_ref)?,
                err_z: P0Function::new(l.mesh.clone(), dz)?.l2_norm(),
                converged: l.converged,
            })
        })
        .collect()
}

/// Fixed-γ solves on `n, 2n, …` and on the reference mesh, each warm-started
/// from the prolonged previous solution; errors use nodal injection of the
/// reference state and cell averages of the reference control.
///
/// Returns the rows, the fitted orders `(u, z)` and, if requested, the largest
/// relative change of the errors when the reference resolution is doubled.
pub fn h_sweep(cfg: &RunConfig) -> Result<(Vec<HSweepRow>, (f64, f64), Option<f64>)> {
    let gamma = cfg.gamma.ok_or_else(|| Error::Config("h-sweep needs a fixed 'gamma'".into()))?;
    let mut levels: Vec<Level> = Vec::new();
    for l in 0..cfg.levels {
        let warm = levels.last().map(|p| p.z.clone());
        levels.push(solve_level(cfg, cfg.n << l, gamma, warm.as_ref())?);
    }
    let mut reference = solve_level(cfg, cfg.ref_n, gamma, levels.last().map(|p| &p.z))?;
    if !reference.converged {
        log::warn!("reference solve did not converge");
    }
    let rows = errors_against(&levels, &reference)?;
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let eu: Vec<f64> = rows.iter().map(|r| r.err_u).collect();
    let ez: Vec<f64> = rows.iter().map(|r| r.err_z).collect();
    let orders = (fit_rate(&hs, &eu, FitWindow::All)?.slope, fit_rate(&hs, &ez, FitWindow::All)?.slope);

    let mut adequacy = None;
    if cfg.check_reference {
        let finer = solve_level(cfg, 2 * cfg.ref_n, gamma, Some(&reference.z))?;
        reference = finer;
        let rows2 = errors_against(&levels, &reference)?;
        let change = rows
            .iter()
            .zip(&rows2)
            .flat_map(|(a, b)| [(a.err_u - b.err_u).abs() / b.err_u, (a.err_z - b.err_z).abs() / b.err_z])
            .fold(0.0f64, f64::max);
        adequacy = Some(change);
    }
    Ok((rows, orders, adequacy))
}

pub fn run_h_sweep(cfg: &RunConfig) -> Result<Outcome> {
    let (rows, orders, adequacy) = h_sweep(cfg)?;
    let csv = h_sweep_csv(&rows, Some(orders), cfg.precision);
    if let Some(out) = &cfg.out {
        write_text(out, &csv)?;
    }
    let mut code = if rows.iter().all(|r| r.converged) { exit::SUCCESS } else { exit::NOT_CONVERGED };
    if let Some(change) = adequacy {
        log::info!("doubling the reference changes the errors by at most {:.1}%", 100.0 * change);
        if change >= 0.1 && code == exit::SUCCESS {
            code = exit::CHECK_FAILED;
        }
    }
    Ok(Outcome { exit_code: code, report: csv })
}
