use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use m1_mcl::config::{Cli, Profile, RunConfig, OUTPUT_ENV};
use m1_mcl::mesh::Mesh;
use m1_mcl::output::{self, AuditReport};
use m1_mcl::time_loop::{RunState, Simulation, SteadyOptions, TransientOptions};
use m1_mcl::{M1Error, Result};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match RunConfig::resolve(&cli, std::env::var_os(OUTPUT_ENV).map(PathBuf::from)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Returns `false` when a steady run hits the step cap.
fn run(cfg: &RunConfig) -> Result<bool> {
    let sc = &cfg.scenario;
    let label = sc.label();
    let n = cfg.nodes;
    let mesh = Mesh::with_nodes(sc.lower, sc.upper, [n, n])?;
    let sim = Simulation::new(mesh, sc)?;
    let u0 = sim.interpolate(|x| sc.initial_state(x));
    let dir = &cfg.output_dir;
    let prefix = format!("{label}_{}_{n}", cfg.scheme);
    let started = Instant::now();
    if !cfg.quiet {
        eprintln!(
            "{label}: {n}x{n} nodes, scheme {}, CFL {}, {}",
            cfg.scheme,
            cfg.cfl,
            if cfg.steady { format!("steady, tol {:e}", cfg.tol) } else { format!("t_final {}", cfg.t_final) }
        );
    }

    let mut frame = |st: &RunState<2>| -> Result<()> {
        if cfg.every > 0 && st.step % cfg.every == 0 {
            let path = dir.join(format!("{prefix}_{:06}.vtk", st.step));
            output::write_fields(&st.u, &sim.mesh, &path, &format!("{label} step {} t {}", st.step, st.t))?;
            if !cfg.quiet {
                match st.residual_history.last() {
                    Some(r) => eprintln!("step {:>7}  t {:.6e}  residual {:.6e}", st.step, st.t, r.residual_l2),
                    None => eprintln!("step {:>7}  t {:.6e}", st.step, st.t),
                }
            }
        }
        Ok(())
    };

    let result = if cfg.steady {
        let opts = SteadyOptions {
            cfl: cfg.cfl,
            tol: cfg.tol,
            max_steps: cfg.max_steps,
            scheme: cfg.scheme,
            ..SteadyOptions::default()
        };
        sim.run_steady(u0, &opts, &mut frame)
    } else {
        let opts = TransientOptions { t_final: cfg.t_final, cfl: cfg.cfl, scheme: cfg.scheme };
        sim.run_transient(u0, &opts, &mut frame)
    };

    let audit_path = dir.join(format!("{prefix}_audit.txt"));
    let state = match result {
        Ok(st) => st,
        Err(e) => {
            if let M1Error::RealizabilityViolation { .. } = e {
                let mut audit = AuditReport::from_stats(&label, &cfg.scheme.to_string(), n, f64::NAN, &Default::default());
                audit.violations = 1;
                audit.failure = Some(e.to_string());
                audit.write(&audit_path)?;
            }
            return Err(e);
        }
    };

    output::write_fields(
        &state.u,
        &sim.mesh,
        &dir.join(format!("{prefix}_final.vtk")),
        &format!("{label} step {} t {}", state.step, state.t),
    )?;
    let center = [0.5 * (sc.lower[0] + sc.upper[0]), 0.5 * (sc.lower[1] + sc.upper[1])];
    for p in &cfg.profiles {
        match p {
            Profile::Radial => {
                let bins = output::radial_profile(&sim.mesh, &state.u, center, sim.mesh.min_spacing());
                output::write_radial_csv(&bins, &dir.join(format!("{prefix}_radial.csv")))?;
            }
            Profile::Axis => {
                let rows = output::axis_profile(&sim.mesh, &state.u, center[1]);
                output::write_axis_csv(&rows, &dir.join(format!("{prefix}_axis.csv")))?;
            }
        }
    }
    if cfg.steady {
        output::write_residual_log(&state.residual_history, &dir.join(format!("{prefix}_residual.csv")))?;
    }
    let audit = AuditReport::from_stats(&label, &cfg.scheme.to_string(), n, state.t, &state.stats);
    audit.write(&audit_path)?;

    if !cfg.quiet {
        eprintln!(
            "done: {} steps, t = {}, min psi0 {:.3e}, max f {:.12}, {:.1} s, output in {}",
            state.step,
            state.t,
            state.stats.min_psi0,
            state.stats.max_flux_ratio,
            started.elapsed().as_secs_f64(),
            dir.display()
        );
    }
    if cfg.steady && !state.converged {
        let last = state.residual_history.last().map_or(f64::NAN, |r| r.residual_l2);
        eprintln!(
            "not converged: residual {last:.3e} above tolerance {:e} after {} steps",
            cfg.tol, state.step
        );
        return Ok(false);
    }
    Ok(true)
}
