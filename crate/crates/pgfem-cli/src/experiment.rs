//! Experiment driver: runs a configured benchmark, writes convergence
//! tables, per-iteration logs, contour polylines, and field snapshots.

use crate::config::{Method, RunConfig};
use crate::vtk::{self, FieldData};
use pgfem::fospg::{FospgConfig, FospgSolver};
use pgfem::log::IterationRecord;
use pgfem::mesh::{Diagonal, Rect, SimplicialMesh};
use pgfem::pg::{self, PgConfig};
use pgfem::problems::{
    self, biactive_problem, circular_obstacle_problem, dam_problem, free_surface_extract,
    hemker_problem_with_eps, heston_option_problem, semipermeable_problem, DamGeometry,
    DamSecant, VIProblem,
};
use pgfem::reconstruct::{cell_means, oswald_average};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown problem `{0}` (see `pgfem list-problems`)")]
    UnknownProblem(String),
    #[error("problem `{problem}` does not support method `{method}`")]
    UnsupportedMethod { problem: String, method: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mesh(#[from] pgfem::mesh::MeshError),
    #[error("solver: {0}")]
    Pg(#[from] pgfem::pg::PgError),
    #[error("solver: {0}")]
    Fospg(#[from] pgfem::fospg::FospgError),
    #[error("dam driver: {0}")]
    Dam(#[from] problems::DamError),
}

pub const PROBLEMS: &[(&str, &str)] = &[
    ("circular_obstacle", "advected obstacle problem with known solution on (-1,1)^2"),
    ("biactive", "obstacle problem with a biactive half-plane"),
    ("heston", "American put under stochastic volatility (backward Euler + hybrid solver)"),
    ("hemker", "convection-dominated flow past a cylinder with maximum-principle bounds"),
    ("hemker_smooth", "diffusion-dominated control variant of hemker (eps = 1)"),
    ("semipermeable", "channel flow with a semi-permeable membrane on the cylinder"),
    ("dam", "seepage through a dam with a sloping wall (secant on the discharge)"),
];

/// Output root: `PGFEM_OUT` joined with the config's directory when the
/// latter is relative.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    let dir = PathBuf::from(&cfg.output_dir);
    if dir.is_absolute() {
        return dir;
    }
    match std::env::var_os("PGFEM_OUT") {
        Some(root) => PathBuf::from(root).join(dir),
        None => dir,
    }
}

fn fospg_config(cfg: &RunConfig) -> FospgConfig {
    FospgConfig {
        p: cfg.p,
        q: cfg.q,
        alpha0: cfg.alpha0,
        growth: cfg.growth,
        stop_tol: cfg.stop_tol,
        stop_metric: cfg.stop_metric,
        stop_iterate: cfg.stop_iterate,
        max_prox_iters: cfg.max_prox_iters,
        newton_tol: cfg.newton_tol,
        max_newton_iters: cfg.max_newton_iters,
        ..FospgConfig::default()
    }
}

fn pg_config(cfg: &RunConfig) -> PgConfig {
    PgConfig {
        alpha0: cfg.alpha0,
        growth: cfg.growth,
        stop_tol: cfg.stop_tol,
        stop_metric: cfg.stop_metric,
        stop_iterate: cfg.stop_iterate,
        max_prox_iters: cfg.max_prox_iters,
        newton_tol: cfg.newton_tol,
        max_newton_iters: cfg.max_newton_iters,
        ..PgConfig::default()
    }
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_default()
}

/// Fixed per-iteration log schema; the hybrid solver appends flux-error and
/// observable-range columns.
fn write_iteration_csv(path: &Path, records: &[IterationRecord], hybrid: bool) -> std::io::Result<()> {
    let mut s = String::new();
    if hybrid {
        let _ = writeln!(
            s,
            "k,alpha,newton_iters,du_L2,du_H1,err_u_L2,err_avg_L2,err_flux_L2,err_q_L2,dmp_min,dmp_max"
        );
    } else {
        let _ = writeln!(s, "k,alpha,newton_iters,du_L2,du_H1,err_u_L2,err_avg_L2,err_flux_L2");
    }
    for r in records {
        let base = format!(
            "{},{:.6e},{},{:.6e},{:.6e},{},{},{}",
            r.k,
            r.alpha,
            r.newton_iters,
            r.du_l2,
            r.du_h1,
            csv_opt(r.err_u_l2),
            csv_opt(r.err_avg_l2),
            csv_opt(r.err_flux_l2),
        );
        if hybrid {
            let _ = writeln!(s, "{base},{},{:.6e},{:.6e}", csv_opt(r.err_flux_l2), r.dmp_min, r.dmp_max);
        } else {
            let _ = writeln!(s, "{base}");
        }
    }
    vtk::write_atomic(path, &s)
}

struct LevelResult {
    prox_iters: usize,
    err_u: Option<f64>,
    err_avg: Option<f64>,
    err_q: Option<f64>,
}

fn write_convergence_csv(path: &Path, levels: &[LevelResult]) -> std::io::Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "h_ratio,prox_iters,err_u_L2,rate_u,err_avg_L2,rate_avg,err_q_L2,rate_q");
    let rate = |prev: Option<f64>, cur: Option<f64>| -> String {
        match (prev, cur) {
            (Some(p), Some(c)) if p > 0.0 && c > 0.0 => format!("{:.2}", (p / c).log2()),
            _ => String::new(),
        }
    };
    for (i, lv) in levels.iter().enumerate() {
        let prev = if i > 0 { Some(&levels[i - 1]) } else { None };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            1.0 / (1 << i) as f64,
            lv.prox_iters,
            csv_opt(lv.err_u),
            rate(prev.and_then(|p| p.err_u), lv.err_u),
            csv_opt(lv.err_avg),
            rate(prev.and_then(|p| p.err_avg), lv.err_avg),
            csv_opt(lv.err_q),
            rate(prev.and_then(|p| p.err_q), lv.err_q),
        );
    }
    vtk::write_atomic(path, &s)
}

fn base_mesh(cfg: &RunConfig) -> Result<SimplicialMesh, ExperimentError> {
    match &cfg.mesh_source {
        crate::config::MeshSource::Builtin => Ok(SimplicialMesh::structured_rectangle(
            cfg.nx.unwrap_or(32),
            cfg.ny.unwrap_or(cfg.nx.unwrap_or(32)),
            Rect::new(-1.0, -1.0, 1.0, 1.0),
            Diagonal::Slash,
        )?),
        crate::config::MeshSource::File(path) => {
            let text = std::fs::read_to_string(path)?;
            let (mesh, _) = SimplicialMesh::from_text(&text)?;
            Ok(mesh)
        }
    }
}

/// Runs a refinement sweep of a problem with an exact solution.
fn run_sweep(
    cfg: &RunConfig,
    make: &dyn Fn(SimplicialMesh) -> VIProblem,
    out: &Path,
) -> Result<(), ExperimentError> {
    let mut mesh = base_mesh(cfg)?;
    let mut levels = Vec::new();
    for level in 0..cfg.levels {
        let problem = make(mesh.clone());
        let (records, err_q) = match cfg.method {
            Method::Fospg => {
                let mut solver = FospgSolver::new(&problem, fospg_config(cfg))?;
                let run = solver.run()?;
                let err_q = run.iterations.last().and_then(|r| r.err_flux_l2);
                (run.iterations, err_q)
            }
            Method::Conforming => {
                let run = pg::run(&problem, cfg.pair, pg_config(cfg))?;
                let err_q = run.iterations.last().and_then(|r| r.err_flux_l2);
                (run.iterations, err_q)
            }
        };
        let last = records.last().expect("at least one iteration");
        levels.push(LevelResult {
            prox_iters: records.len(),
            err_u: last.err_u_l2,
            err_avg: last.err_avg_l2,
            err_q,
        });
        write_iteration_csv(
            &out.join(format!("iterations_level{level}.csv")),
            &records,
            cfg.method == Method::Fospg,
        )?;
        if level + 1 < cfg.levels {
            mesh = mesh.refine_uniform();
        }
    }
    write_convergence_csv(&out.join("convergence.csv"), &levels)?;
    Ok(())
}

/// Runs one experiment to completion; returns lines for the console.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<String>, ExperimentError> {
    let out = output_dir(cfg);
    std::fs::create_dir_all(&out)?;
    let mut notes = Vec::new();
    match cfg.problem.as_str() {
        "circular_obstacle" => {
            run_sweep(cfg, &circular_obstacle_problem, &out)?;
            notes.push(format!("convergence table: {}", out.join("convergence.csv").display()));
        }
        "biactive" => {
            run_sweep(cfg, &biactive_problem, &out)?;
            notes.push(format!("convergence table: {}", out.join("convergence.csv").display()));
        }
        "heston" => {
            if cfg.method != Method::Fospg {
                return Err(ExperimentError::UnsupportedMethod {
                    problem: cfg.problem.clone(),
                    method: "conforming",
                });
            }
            let setup = heston_option_problem(
                cfg.nx.unwrap_or(88),
                cfg.ny.unwrap_or(40),
                cfg.time_steps,
            );
            let sol = setup.solve()?;
            let mut s = String::from("variance,asset,price_u,price_latent\n");
            for &v in &[0.0625, 0.25] {
                for i in 0..5 {
                    let asset = 8.0 + i as f64;
                    let _ = writeln!(
                        s,
                        "{v},{asset},{:.6},{:.6}",
                        setup.price(&sol, asset, v),
                        setup.latent_price(&sol, asset, v)
                    );
                }
            }
            vtk::write_atomic(&out.join("prices.csv"), &s)?;
            let nodal = oswald_average(
                &setup.problem.mesh,
                &pgfem::space::DiscreteSpace::new(&setup.problem.mesh, pgfem::space::SpaceKind::DgP1),
                &sol.u,
            );
            vtk::write_atomic(
                &out.join("price_field.vtk"),
                &vtk::render(&setup.problem.mesh, "price", &FieldData::Point(&nodal)),
            )?;
            notes.push(format!("price table: {}", out.join("prices.csv").display()));
        }
        "hemker" | "hemker_smooth" => {
            if cfg.method != Method::Fospg {
                return Err(ExperimentError::UnsupportedMethod {
                    problem: cfg.problem.clone(),
                    method: "conforming",
                });
            }
            let eps = cfg.eps.unwrap_or(if cfg.problem == "hemker" { 1e-3 } else { 1.0 });
            let problem = hemker_problem_with_eps(eps, cfg.mesh_level);
            let mut solver = FospgSolver::new(&problem, fospg_config(cfg))?;
            let run = solver.run()?;
            write_iteration_csv(&out.join("iterations.csv"), &run.iterations, true)?;
            // raw broken field (cell means), latent observable, reconstruction
            let means = cell_means(&problem.mesh, &solver.u_space, solver.primal());
            vtk::write_atomic(
                &out.join("u_raw.vtk"),
                &vtk::render(&problem.mesh, "u", &FieldData::Cell(&means)),
            )?;
            let latent = solver.observable_cell_means();
            vtk::write_atomic(
                &out.join("u_latent.vtk"),
                &vtk::render(&problem.mesh, "latent", &FieldData::Cell(&latent)),
            )?;
            let dirichlet_tags = ["left", "circle"];
            let is_dirichlet = |f: usize| {
                problem
                    .mesh
                    .tag_name(f)
                    .map(|t| dirichlet_tags.contains(&t))
                    .unwrap_or(false)
            };
            let recon = pgfem::reconstruct::reconstruct_bounded(
                &problem.mesh,
                &solver.u_space,
                solver.primal(),
                &solver.m_space,
                solver.multiplier(),
                &is_dirichlet,
            )
            .expect("reconstruction weights exist on shape-regular meshes");
            vtk::write_atomic(
                &out.join("u_reconstructed.vtk"),
                &vtk::render(&problem.mesh, "reconstructed", &FieldData::Point(&recon)),
            )?;
            notes.push(format!("fields: {}", out.display()));
        }
        "semipermeable" => {
            if cfg.method != Method::Fospg {
                return Err(ExperimentError::UnsupportedMethod {
                    problem: cfg.problem.clone(),
                    method: "conforming",
                });
            }
            let mut s = String::from("phi,prox_iters,active_length\n");
            let phis: Vec<f64> = match cfg.phi {
                Some(phi) => vec![phi],
                None => vec![0.90, 0.95, 1.0],
            };
            for phi in phis {
                let problem = semipermeable_problem(phi, cfg.mesh_level);
                let mut solver = FospgSolver::new(&problem, fospg_config(cfg))?;
                let run = solver.run()?;
                let mesh = &problem.mesh;
                let mut active = 0.0;
                for f in mesh.facets_with_tag("cylinder") {
                    let dofs = solver.m_space.facet_dofs(f);
                    let gap = dofs
                        .iter()
                        .map(|&d| solver.multiplier()[d] - phi)
                        .sum::<f64>()
                        / dofs.len() as f64;
                    if gap < 1e-6 {
                        active += mesh.facets[f].length;
                    }
                }
                let _ = writeln!(s, "{phi},{},{active:.6}", run.prox_iters());
                let means = cell_means(mesh, &solver.u_space, solver.primal());
                vtk::write_atomic(
                    &out.join(format!("u_phi{phi}.vtk")),
                    &vtk::render(mesh, "u", &FieldData::Cell(&means)),
                )?;
            }
            vtk::write_atomic(&out.join("active_measure.csv"), &s)?;
            notes.push(format!("sweep: {}", out.join("active_measure.csv").display()));
        }
        "dam" => {
            if cfg.method != Method::Conforming {
                return Err(ExperimentError::UnsupportedMethod {
                    problem: cfg.problem.clone(),
                    method: "fospg",
                });
            }
            let geom = DamGeometry::default();
            let mut secant = DamSecant { geom, pg_config: pg_config(cfg), ..DamSecant::default() };
            if let Some(nx) = cfg.nx {
                secant.nx = nx;
            }
            if let Some(ny) = cfg.ny {
                secant.ny = ny;
            }
            let result = secant.run()?;
            let mut s = String::from("r,q,f_q,inner_iters\n");
            for rec in &result.records {
                let _ = writeln!(s, "{},{:.6},{:.6e},{}", rec.r, rec.q, rec.f_q, rec.inner_iters);
            }
            vtk::write_atomic(&out.join("dam_secant.csv"), &s)?;
            let surface = free_surface_extract(&result.mesh, &result.final_run, 1e-4);
            let mut sc = String::from("x,y\n");
            for p in &surface {
                let _ = writeln!(sc, "{:.9e},{:.9e}", p[0], p[1]);
            }
            vtk::write_atomic(&out.join("free_surface.csv"), &sc)?;
            let nodal = result.final_run.u[..result.mesh.n_vertices()].to_vec();
            vtk::write_atomic(
                &out.join("potential.vtk"),
                &vtk::render(&result.mesh, "potential", &FieldData::Point(&nodal)),
            )?;
            notes.push(format!(
                "discharge converged to q = {:.4} in {} outer iterations",
                result.q_final,
                result.records.len()
            ));
            notes.push(format!("secant table: {}", out.join("dam_secant.csv").display()));
        }
        other => {
            let _ = dam_problem; // problem factories re-exported for library users
            return Err(ExperimentError::UnknownProblem(other.to_string()));
        }
    }
    Ok(notes)
}
