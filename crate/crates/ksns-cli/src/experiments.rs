//! Time-dependent runs: radial shooting, the 3D box experiment and `simulate`.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ksns::dynamics::{
    fluid_blowup_rates, monitor_bootstrap, BoxSim, DiagnosticsRow, Frame, RadialExperiment, RunConfig, ShootRecord,
    DIAGNOSTICS_HEADER,
};
use ksns::grids::snapshot::{GridKind, Snapshot};

use crate::checks::leray_origin;
use crate::report::{append_csv, fmt_f64, write_csv, Check, Report};
use crate::CliError;

pub const SHOOT_HEADER: &str = "iteration,bracket_lo,bracket_hi,exit_side";

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))
}

pub fn write_diagnostics(path: &Path, rows: &[DiagnosticsRow]) -> Result<(), CliError> {
    write_csv(path, DIAGNOSTICS_HEADER, rows.iter().map(|r| r.values().iter().map(|v| fmt_f64(*v)).collect()))
}

pub fn append_shoot_report(path: &Path, records: &[ShootRecord]) -> Result<(), CliError> {
    append_csv(
        path,
        SHOOT_HEADER,
        records.iter().map(|r| {
            vec![r.iteration.to_string(), fmt_f64(r.bracket_lo), fmt_f64(r.bracket_hi), r.exit_side.to_string()]
        }),
    )
}

fn write_snapshot(path: &Path, s: &Snapshot) -> Result<(), CliError> {
    let f = fs::File::create(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    s.write_to(&mut BufWriter::new(f))?;
    Ok(())
}

/// Shooting for the radial Keller-Segel run, the bootstrap monitor along the shot
/// trajectory, and the wrong-sign control.
pub fn radial_stability(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let mut r = Report::new("radial-stability");
    let exp = RadialExperiment::new(cfg)?;
    let dg = exp.delta_g;
    r.note(format!("delta_g = {dg}, delta budget scaled by {:.6e}", exp.delta_scale));
    let shot = exp.shoot(cfg.shoot.tol, cfg.shoot.max_iter)?;
    write_diagnostics(&out.join("diagnostics.csv"), &shot.trajectory.rows)?;
    append_shoot_report(&out.join("shoot_report.csv"), &shot.records)?;
    r.note(format!("a_1 = {:.16e} after {} bisection steps", shot.a[0], shot.records.len()));
    r.push(Check::flag("shot_stays_in_unstable_ball", shot.converged));
    let mon = monitor_bootstrap(&shot.trajectory.rows, &exp.deltas, dg);
    let end = shot.trajectory.rows.last().map_or(0.0, |row| row.tau);
    r.push(Check::at_least("trajectory_end_tau", end, cfg.tau_end - 1e-9));
    for b in mon.all() {
        r.push(Check::flag(format!("bound_{}", b.name), b.holds()));
        if let Some(t) = b.first_violation {
            r.note(format!("{} first violated at tau = {t}", b.name));
        }
    }
    r.push(Check::at_least("stable_hk_decay_rate", mon.stable.fitted_exponent, 0.5 * dg - 0.02));
    // push a_1 to the edge of the bracket on the side opposite the shot
    let mut a = shot.a.clone();
    a[0] = if shot.a[0] > 0.0 { -exp.deltas.d3 } else { exp.deltas.d3 };
    let control = exp.run(&a, true)?;
    write_diagnostics(&out.join("control_diagnostics.csv"), &control.rows)?;
    match &control.exit {
        Some(e) => {
            r.note(format!("control exits at tau = {} with flux {:.6e}", e.tau, e.flux));
            r.push(Check::at_least("control_exit_flux", e.flux, f64::MIN_POSITIVE));
        }
        None => r.push(Check::flag("control_exits", false)),
    }
    Ok(r)
}

/// The 3D self-similar box run with buoyancy and the fluid blowup-rate fits.
pub fn appendix_b(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let mut r = Report::new("appendix-b");
    let sim = BoxSim::from_config(cfg)?;
    let state = sim.initial_state(cfg);
    let run = sim.run(state, cfg.tau_end, cfg.output_every, |_| {})?;
    write_diagnostics(&out.join("diagnostics.csv"), &run.rows)?;
    if let Some(t) = run.blowup_tau {
        r.note(format!("non-finite values after tau = {t}"));
    }
    r.push(Check::flag("run_completed", run.blowup_tau.is_none()));
    match fluid_blowup_rates(&run.rows) {
        Some(f) => {
            r.note(format!("fitted T = {:.16e} over {:.2} decades of T - t", f.t_blowup, f.decades));
            let worst = f.rho_scaled.iter().map(|v| (v - 6.0).abs() / 6.0).fold(0.0, f64::max);
            r.push(Check::at_most("rho_times_gap_rel_to_6", worst, 0.05));
            r.push(Check::within("gradpi_exponent", f.gradpi_fit.slope, -1.0, 0.1));
            r.push(Check::at_least("u_vs_log_gap_r2", f.u_fit.r2, 0.98));
            r.push(Check::flag("fit_window_reliable", !f.fit_unreliable));
        }
        None => r.push(Check::flag("rate_fit_available", false)),
    }
    let lo = leray_origin(cfg.n, cfg.box_half_width)?;
    r.push(Check::at_most("leray_q_e3_origin_rel_to_4", (lo - 4.0).abs() / 4.0, 0.02));
    Ok(r)
}

/// Options of the `simulate` subcommand.
#[derive(Debug, Clone)]
pub struct SimulateOpts {
    pub out_dir: PathBuf,
    pub snapshot_every: Option<usize>,
}

/// Runs a configuration as given and writes `diagnostics.csv` and snapshots.
pub fn simulate(cfg: &RunConfig, opts: &SimulateOpts) -> Result<Report, CliError> {
    let out = &opts.out_dir;
    let mut r = Report::new(format!("simulate {}", cfg.frame.name()));
    match cfg.frame {
        Frame::RadialSelfsim => {
            let exp = RadialExperiment::new(cfg)?;
            let traj = if cfg.shoot.enabled {
                let shot = exp.shoot(cfg.shoot.tol, cfg.shoot.max_iter)?;
                append_shoot_report(&out.join("shoot_report.csv"), &shot.records)?;
                shot.trajectory
            } else {
                exp.run(&vec![0.0; exp.modes()], false)?
            };
            write_diagnostics(&out.join("diagnostics.csv"), &traj.rows)?;
            if opts.snapshot_every.is_some() {
                let g = exp.ks.grid();
                let tau = traj.rows.last().map_or(0.0, |row| row.tau);
                let snap = Snapshot {
                    kind: GridKind::Radial,
                    dims: vec![g.n() as u64],
                    params: vec![g.map_scale(), g.r_max(), tau],
                    data: traj.final_state.clone(),
                };
                write_snapshot(&out.join("snapshot_final.bllb"), &snap)?;
            }
            r.note(format!("{} rows", traj.rows.len()));
        }
        Frame::Box3dSelfsim | Frame::Box3dPhysical => {
            let sim = BoxSim::from_config(cfg)?;
            let end = if cfg.frame == Frame::Box3dPhysical { cfg.t_end } else { cfg.tau_end };
            let mut err = None;
            let every = opts.snapshot_every;
            let run = sim.run(sim.initial_state(cfg), end, cfg.output_every, |s| {
                if let Some(k) = every {
                    if k > 0 && s.steps % k == 0 && err.is_none() {
                        let p = out.join(format!("snapshot_{:06}.bllb", s.steps));
                        if let Err(e) = write_snapshot(&p, &s.snapshot(&sim.grid)) {
                            err = Some(e);
                        }
                    }
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            write_diagnostics(&out.join("diagnostics.csv"), &run.rows)?;
            if let Some(t) = run.blowup_tau {
                r.note(format!("non-finite values after tau = {t}"));
            }
            r.push(Check::flag("run_completed", run.blowup_tau.is_none()));
        }
    }
    Ok(r)
}

/// The `shoot` subcommand: bisection only, records appended to `shoot_report.csv`.
pub fn shoot(cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    if cfg.frame != Frame::RadialSelfsim {
        return Err(CliError::Usage("shoot needs frame = \"radial_selfsim\"".into()));
    }
    let mut r = Report::new("shoot");
    let exp = RadialExperiment::new(cfg)?;
    let shot = exp.shoot(cfg.shoot.tol, cfg.shoot.max_iter)?;
    append_shoot_report(&out.join("shoot_report.csv"), &shot.records)?;
    r.note(format!("a = {:?}", shot.a.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>()));
    r.push(Check::flag("converged", shot.converged));
    Ok(r)
}
