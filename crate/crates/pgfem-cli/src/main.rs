//! `pgfem` command line: run configured experiments, list the benchmark
//! problems, and validate ASCII mesh files.

use clap::{Parser, Subcommand};
use pgfem_cli::config::RunConfig;
use pgfem_cli::experiment;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "pgfem", about = "Proximal Galerkin benchmark driver", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file (a bare name resolves to
    /// configs/<name>.cfg).
    Run {
        config: String,
        /// Override the number of refinement levels.
        #[arg(long)]
        levels: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<String>,
    },
    /// List the benchmark problems.
    ListProblems,
    /// Validate an ASCII mesh file and print its statistics.
    ValidateMesh { file: PathBuf },
}

fn resolve_config(arg: &str) -> PathBuf {
    let direct = PathBuf::from(arg);
    if direct.exists() {
        return direct;
    }
    PathBuf::from("configs").join(format!("{arg}.cfg"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, levels, out } => {
            let path = resolve_config(&config);
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            let mut cfg = match RunConfig::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(l) = levels {
                cfg.levels = l;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            match experiment::run_experiment(&cfg) {
                Ok(notes) => {
                    for n in notes {
                        println!("{n}");
                    }
                    ExitCode::SUCCESS
                }
                Err(experiment::ExperimentError::UnknownProblem(p)) => {
                    eprintln!("error: unknown problem `{p}`");
                    ExitCode::from(2)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::ListProblems => {
            for (name, desc) in experiment::PROBLEMS {
                println!("{name:20} {desc}");
            }
            ExitCode::SUCCESS
        }
        Command::ValidateMesh { file } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", file.display());
                    return ExitCode::FAILURE;
                }
            };
            match pgfem::mesh::SimplicialMesh::from_text(&text) {
                Ok((mesh, warnings)) => {
                    for w in &warnings {
                        println!("warning: {w:?}");
                    }
                    println!("vertices:          {}", mesh.n_vertices());
                    println!("cells:             {}", mesh.n_cells());
                    println!("facets:            {}", mesh.n_facets());
                    println!("mesh size:         {:.6}", mesh.mesh_size());
                    println!("shape regularity:  {:.3}", mesh.shape_regularity());
                    println!("euler (V-E+T):     {}", mesh.euler_characteristic());
                    println!("boundary loops:    {}", mesh.boundary_loops());
                    println!("total area:        {:.6}", mesh.total_area());
                    let mut tags: Vec<&str> = mesh.tag_names().iter().map(|s| s.as_str()).collect();
                    tags.sort_unstable();
                    println!("boundary tags:     {}", tags.join(", "));
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("invalid mesh: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
