//! `transreg`: registration, transport, mesh transformation and diagnostics.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.
//! Errors are printed to stderr as one JSON object.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use transreg::flowmap::{Backend, Direction, DEFAULT_STEPS_PER_FIELD};
use transreg::io::{
    read_mesh, write_dg_field, write_image, write_mesh, write_vtk, RunConfig, SyntheticCase,
    SyntheticParams,
};
use transreg::pipeline;
use transreg::transport::{
    convergence_study, fitted_order, ConvergenceCase, ConvergenceConfig, DEFAULT_EPSILON,
};
use transreg::Error;

#[derive(Parser)]
#[command(
    name = "transreg",
    version,
    about = "Transport-based image registration and mesh transformation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multi-stage registration from a JSON run config.
    Register {
        #[arg(long)]
        config: PathBuf,
    },
    /// One forward transport solve of an image by a velocity field.
    Transport {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        velocity: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
        /// Output image header (the DG field goes next to it with a `_dg` suffix).
        #[arg(long)]
        out: PathBuf,
    },
    /// Moves a mesh through affine maps and the registration velocities.
    TransformMesh {
        #[arg(long)]
        mesh: PathBuf,
        /// Three homogeneous affine files: mesh-to-input, registration, target.
        #[arg(long, num_args = 3, value_names = ["AA", "A", "AE"])]
        affines: Option<Vec<PathBuf>>,
        #[arg(long)]
        velocities: PathBuf,
        #[arg(long, default_value = "trace")]
        backend: String,
        #[arg(long, default_value = "inverse")]
        direction: String,
        #[arg(long, default_value_t = DEFAULT_STEPS_PER_FIELD)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        /// Optional legacy VTK export with per-cell radius ratios.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Central finite-difference check of the reduced gradient.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        dirs: usize,
        #[arg(long, num_args = 1.., default_values_t = [1e-4, 1e-5, 1e-6])]
        steps: Vec<f64>,
    },
    /// Order-of-accuracy table of the transport solver (CSV on stdout).
    Convergence {
        #[arg(long, default_value = "rotate-blob")]
        case: String,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 16)]
        base: usize,
        #[arg(long, default_value_t = 0.2)]
        cfl: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Writes a synthetic image pair, mesh and run config.
    Synth {
        #[arg(long)]
        case: String,
        #[arg(long, num_args = 2..=3, required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, num_args = 2..=3, allow_negative_numbers = true)]
        shift: Option<Vec<i64>>,
        #[arg(long)]
        angle: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        3
    } else {
        2
    }
}

fn report_error(e: &Error) -> ExitCode {
    let code = exit_code(e);
    let kind = if code == 3 { "numeric" } else { "config" };
    eprintln!(
        "{}",
        json!({ "error": kind, "exit_code": code, "message": e.to_string() })
    );
    ExitCode::from(code)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}.json"))
}

fn run(cmd: Command) -> transreg::Result<()> {
    match cmd {
        Command::Register { config } => {
            let cfg = RunConfig::load(&config)?;
            let run = pipeline::run_registration(&cfg)?;
            let r = &run.result;
            print_json(&json!({
                "output_dir": cfg.output_dir,
                "stages": r.stages.len(),
                "iterations": r.trace().len(),
                "initial_l2": r.initial_l2,
                "final_l2": r.final_l2,
                "relative_l2": r.relative_discrepancy(),
                "trace": run.trace_path,
            }));
        }
        Command::Transport {
            image,
            velocity,
            steps,
            epsilon,
            time,
            out,
        } => {
            let res = pipeline::run_transport(&image, &velocity, steps, epsilon, time)?;
            write_image(&out, &res.image)?;
            write_dg_field(&with_suffix(&out, "_dg"), &res.field)?;
            print_json(&json!({
                "out": out,
                "cfl": res.cfl.number,
                "dt": res.cfl.dt,
                "cfl_advisory": res.cfl.advisory,
            }));
        }
        Command::TransformMesh {
            mesh,
            affines,
            velocities,
            backend,
            direction,
            steps,
            out,
            vtk,
        } => {
            let backend: Backend = backend.parse()?;
            let direction: Direction = direction.parse()?;
            let input = read_mesh(&mesh)?;
            let aff = affines.unwrap_or_default();
            let refs = [0, 1, 2].map(|i| aff.get(i).map(PathBuf::as_path));
            let res =
                pipeline::run_transform_mesh(&input, refs, &velocities, direction, backend, steps)?;
            write_mesh(&out, &res.mesh)?;
            if let Some(v) = vtk {
                write_vtk(&v, &res.mesh, Some(&res.after))?;
            }
            print_json(&json!({
                "out": out,
                "cells": res.mesh.num_cells(),
                "before": { "min_ratio": res.before.min_ratio, "mean_ratio": res.before.mean_ratio,
                            "roughness": res.before.roughness, "inverted": res.before.inverted },
                "after": { "min_ratio": res.after.min_ratio, "mean_ratio": res.after.mean_ratio,
                           "roughness": res.after.roughness, "inverted": res.after.inverted },
                "clamped_vertices": res.clamped,
            }));
        }
        Command::Gradcheck {
            config,
            dirs,
            steps,
        } => {
            let cfg = RunConfig::load(&config)?;
            let reports = pipeline::run_gradcheck(&cfg, dirs, &steps)?;
            let rows: Vec<_> = reports
                .iter()
                .map(|r| {
                    json!({
                        "directional": r.directional,
                        "best_relative_error": r.best_relative_error,
                        "passed": r.passed,
                        "non_smooth": r.non_smooth,
                        "rows": r.rows.iter().map(|x| json!({
                            "step": x.step, "finite_difference": x.finite_difference, "relative_error": x.relative_error
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            print_json(
                &json!({ "directions": rows, "all_passed": reports.iter().all(|r| r.passed) }),
            );
        }
        Command::Convergence {
            case,
            levels,
            base,
            cfl,
            epsilon,
        } => {
            let case: ConvergenceCase = case.parse()?;
            let cfg = ConvergenceConfig {
                case,
                levels,
                base,
                cfl,
                epsilon,
                ..ConvergenceConfig::default()
            };
            let rows = convergence_study(&cfg)?;
            println!("n,steps,dt,cfl,l2_error,order");
            for r in &rows {
                let order = r.order.map(|o| o.to_string()).unwrap_or_default();
                println!(
                    "{},{},{},{},{},{}",
                    r.n, r.steps, r.dt, r.cfl, r.l2_error, order
                );
            }
            if let Some(p) = fitted_order(&rows) {
                eprintln!("fitted order {p:.4}");
            }
        }
        Command::Synth {
            case,
            dims,
            out,
            seed,
            shift,
            angle,
            radius,
            noise,
        } => {
            let case: SyntheticCase = case.parse()?;
            let params = SyntheticParams {
                shift,
                angle,
                radius,
                noise,
            };
            pipeline::write_synthetic(case, &dims, &params, seed, &out)?;
            print_json(&json!({ "out": out, "case": case.name(), "dims": dims, "seed": seed }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!(
                "{}",
                json!({ "error": "config", "exit_code": 2, "message": e.to_string() })
            );
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}
