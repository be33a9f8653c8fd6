//! Command-line front end: run scenarios, sensitivity sweeps, the MMS
//! verification gate and mesh generation/checking.
//!
//! Exit codes: 0 success, 2 validation error, 3 solver failure, 4
//! verification-gate failure.

use cavernsim::mesh;
use cavernsim::postprocess;
use cavernsim::scenario::{
    self, builtin_scenario, parse_scenario, run_mms_convergence, run_scenario, run_sweep,
    Scenario, ScenarioError, ScenarioKind, SweepAxis,
};
use cavernsim::solver::Event;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cavernsim",
    about = "Finite-element simulation of creep deformation around salt caverns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a TOML file or a builtin (`builtin:NAME`).
    Run {
        /// Scenario file path or `builtin:NAME`.
        scenario: String,
        /// Output directory for CSV/VTK artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the time-integration scheme.
        #[arg(long, value_parser = ["explicit", "implicit"])]
        scheme: Option<String>,
        /// Override the time step [day].
        #[arg(long)]
        dt: Option<f64>,
        /// Override the simulation horizon [day].
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Run a one-at-a-time sensitivity sweep.
    Sweep {
        /// Scenario file path or `builtin:NAME`.
        scenario: String,
        /// Sweep axis as PATH=v1,v2,... (repeatable).
        #[arg(long, required = true)]
        axis: Vec<String>,
        /// Output directory for the merged CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verification gates.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        what: MeshCommand,
    },
    /// List builtin scenario names.
    List,
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Manufactured-solution convergence order gate.
    Mms,
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate the mesh of a scenario and write it to a file.
    Gen {
        /// Scenario file path or `builtin:NAME`.
        scenario: String,
        /// Output mesh file.
        #[arg(long, default_value = "mesh.txt")]
        out: PathBuf,
    },
    /// Load a mesh file and re-validate all invariants.
    Check {
        /// Mesh file path.
        file: PathBuf,
    },
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_GATE: u8 = 4;

fn load_scenario(arg: &str) -> Result<Scenario, ScenarioError> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        builtin_scenario(name)
    } else {
        let text = std::fs::read_to_string(arg)?;
        let (s, warnings) = parse_scenario(&text)?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        Ok(s)
    }
}

fn classify(err: &ScenarioError) -> u8 {
    match err {
        ScenarioError::Solver(_) => EXIT_SOLVER,
        _ => EXIT_VALIDATION,
    }
}

fn write_artifacts(
    out: &Option<PathBuf>,
    scenario: &Scenario,
    run: &scenario::ScenarioRun,
) -> std::io::Result<()> {
    let Some(dir) = out else { return Ok(()) };
    std::fs::create_dir_all(dir)?;
    if scenario.output.csv {
        let path = dir.join("probes.csv");
        let mut f = std::fs::File::create(&path)?;
        postprocess::export_probe_csv(&mut f, &run.artifact.probe_rows)?;
        println!("wrote {}", path.display());
    }
    if scenario.output.vtk {
        for (i, snap) in run.artifact.snapshots.iter().enumerate() {
            let path = dir.join(format!("snapshot_{i:04}.vtk"));
            let mut f = std::fs::File::create(&path)?;
            postprocess::export_vtk(&mut f, &run.built.scene.mesh, snap)?;
        }
        println!(
            "wrote {} VTK snapshots to {}",
            run.artifact.snapshots.len(),
            dir.display()
        );
    }
    Ok(())
}

fn cmd_run(
    arg: &str,
    out: &Option<PathBuf>,
    scheme: Option<&str>,
    dt: Option<f64>,
    t_end: Option<f64>,
) -> u8 {
    let mut s = match load_scenario(arg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match scheme {
        Some("explicit") => s.integrator.scheme = cavernsim::solver::Scheme::Explicit,
        Some("implicit") => s.integrator.scheme = cavernsim::solver::Scheme::Implicit,
        _ => {}
    }
    if let Some(dt) = dt {
        s.integrator.dt = dt;
    }
    if let Some(t_end) = t_end {
        s.integrator.t_end = t_end;
    }

    if s.kind == ScenarioKind::MmsConvergence {
        return cmd_verify_mms();
    }

    match run_scenario(&s) {
        Ok(run) => {
            let final_t = run.artifact.final_state.t;
            println!("completed {final_t} simulated days");
            if let Some((t, eid)) = run.artifact.failure {
                println!("element {eid} reached critical damage at t = {t:.3} day; run halted");
            }
            for e in &run.artifact.events {
                if let Event::ExplicitIncrementWarning { t, element, ratio } = e {
                    println!(
                        "warning: explicit creep increment {:.0}% of elastic strain \
                         (element {element}, t = {t:.3} day)",
                        100.0 * ratio
                    );
                }
            }
            if run.built.initial_cavern_volume > 0.0 {
                let v0 = run.built.initial_cavern_volume;
                let v = postprocess::cavern_volume(
                    &run.built.scene.mesh,
                    &run.artifact.final_state.u,
                )
                .unwrap_or(v0);
                println!(
                    "cavern volume loss: {:.3}%",
                    100.0 * postprocess::convergence(v0, v)
                );
            }
            if let Err(e) = write_artifacts(out, &s, &run) {
                eprintln!("error writing artifacts: {e}");
                return EXIT_VALIDATION;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}

fn parse_axis(arg: &str) -> Result<SweepAxis, String> {
    let (path, values) = arg
        .split_once('=')
        .ok_or_else(|| format!("axis `{arg}` is not PATH=v1,v2,..."))?;
    let values: Result<Vec<f64>, _> = values.split(',').map(str::parse).collect();
    Ok(SweepAxis {
        path: path.to_string(),
        values: values.map_err(|e| format!("axis `{arg}`: {e}"))?,
    })
}

fn cmd_sweep(arg: &str, axes: &[String], out: &Option<PathBuf>) -> u8 {
    let base = match load_scenario(arg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let axes: Result<Vec<SweepAxis>, String> = axes.iter().map(|a| parse_axis(a)).collect();
    let axes = match axes {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match run_sweep(&base, &axes) {
        Ok(results) => {
            println!("completed {} sweep variants", results.len());
            let csv = scenario::sweep_csv(&results);
            if let Some(dir) = out {
                if let Err(e) = std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::write(dir.join("sweep.csv"), &csv))
                {
                    eprintln!("error writing sweep CSV: {e}");
                    return EXIT_VALIDATION;
                }
                println!("wrote {}", dir.join("sweep.csv").display());
            } else {
                print!("{csv}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}

fn cmd_verify_mms() -> u8 {
    match run_mms_convergence() {
        Ok(report) => {
            print!("{}", report.render());
            if report.pass {
                0
            } else {
                EXIT_GATE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

fn cmd_mesh_gen(arg: &str, out: &PathBuf) -> u8 {
    let s = match load_scenario(arg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match scenario::build_scene(&s) {
        Ok(built) => {
            let file = match std::fs::File::create(out) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_VALIDATION;
                }
            };
            if let Err(e) = mesh::save_mesh(&built.scene.mesh, std::io::BufWriter::new(file)) {
                eprintln!("error: {e}");
                return EXIT_VALIDATION;
            }
            println!(
                "wrote {} ({} nodes, {} elements)",
                out.display(),
                built.scene.mesh.num_nodes(),
                built.scene.mesh.num_elements()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            classify(&e)
        }
    }
}

fn cmd_mesh_check(file: &PathBuf) -> u8 {
    let f = match std::fs::File::open(file) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match mesh::load_mesh(std::io::BufReader::new(f)) {
        Ok(m) => {
            println!(
                "ok: {} nodes, {} elements, {} boundary segments, {} probes",
                m.num_nodes(),
                m.num_elements(),
                m.boundary().len(),
                m.probes().len()
            );
            0
        }
        Err(e) => {
            eprintln!("invalid mesh: {e}");
            EXIT_VALIDATION
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run {
            scenario,
            out,
            scheme,
            dt,
            t_end,
        } => cmd_run(scenario, out, scheme.as_deref(), *dt, *t_end),
        Command::Sweep { scenario, axis, out } => cmd_sweep(scenario, axis, out),
        Command::Verify {
            what: VerifyCommand::Mms,
        } => cmd_verify_mms(),
        Command::Mesh {
            what: MeshCommand::Gen { scenario, out },
        } => cmd_mesh_gen(scenario, out),
        Command::Mesh {
            what: MeshCommand::Check { file },
        } => cmd_mesh_check(file),
        Command::List => {
            for name in scenario::BUILTIN_NAMES {
                println!("{name}");
            }
            0
        }
    };
    ExitCode::from(code)
}
