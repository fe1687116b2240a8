//! Browser demo: interactive obstacle solves, dam free surfaces, and
//! latent-map curves on a static page.
//!
//! The computation lives in plain functions returning flat arrays (tested
//! natively); `wasm_bindgen` wrappers expose them to JavaScript. Build with
//! `wasm-pack build crates/pgfem-wasm --target web`.

use pgfem::entropy::LegendreMap;
use pgfem::mesh::{Diagonal, Rect, SimplicialMesh};
use pgfem::pg::{self, PairKind, PgConfig};
use pgfem::problems::{circular_obstacle_problem, dam_problem, free_surface_extract, DamGeometry};
use wasm_bindgen::prelude::*;

/// Flat triangle-mesh payload with one nodal scalar field.
pub struct FieldPayload {
    pub vertices: Vec<f32>,
    pub triangles: Vec<u32>,
    pub values: Vec<f32>,
    pub obstacle: Vec<f32>,
    pub active: Vec<u8>,
    pub residuals: Vec<f32>,
    pub iterations: u32,
}

fn flatten_mesh(mesh: &SimplicialMesh) -> (Vec<f32>, Vec<u32>) {
    let vertices = mesh.vertices.iter().flat_map(|p| [p[0] as f32, p[1] as f32]).collect();
    let triangles = mesh.cells.iter().flat_map(|c| c.map(|v| v as u32)).collect();
    (vertices, triangles)
}

/// Solves the advected circular obstacle problem on an n-by-n mesh.
pub fn solve_obstacle_demo(n: usize, max_iters: usize) -> Result<FieldPayload, String> {
    let n = n.clamp(4, 48);
    let mesh = SimplicialMesh::structured_rectangle(
        n,
        n,
        Rect::new(-1.0, -1.0, 1.0, 1.0),
        Diagonal::Slash,
    )
    .map_err(|e| e.to_string())?;
    let problem = circular_obstacle_problem(mesh);
    let config = PgConfig {
        stop_tol: 1e-10,
        max_prox_iters: max_iters.clamp(2, 60),
        require_convergence: false,
        ..PgConfig::default()
    };
    let run = pg::run(&problem, PairKind::P1P1, config).map_err(|e| e.to_string())?;
    let mesh = &problem.mesh;
    let (vertices, triangles) = flatten_mesh(mesh);
    let values: Vec<f32> = (0..mesh.n_vertices()).map(|v| run.u[v] as f32).collect();
    let obstacle: Vec<f32> =
        mesh.vertices.iter().map(|&p| problem.constraint.lower_bound(p) as f32).collect();
    let active: Vec<u8> = (0..mesh.n_vertices())
        .map(|v| {
            let gap = run.u[v] - problem.constraint.lower_bound(mesh.vertices[v]);
            (gap < 1e-5) as u8
        })
        .collect();
    let residuals: Vec<f32> = run.iterations.iter().map(|r| r.du_l2 as f32).collect();
    Ok(FieldPayload {
        vertices,
        triangles,
        values,
        obstacle,
        active,
        residuals,
        iterations: run.iterations.len() as u32,
    })
}

/// Dam payload: potential field plus the extracted free surface.
pub struct DamPayload {
    pub vertices: Vec<f32>,
    pub triangles: Vec<u32>,
    pub values: Vec<f32>,
    pub surface: Vec<f32>,
    pub compatibility: f32,
    pub iterations: u32,
}

/// Solves the dam seepage problem for one trial discharge.
pub fn solve_dam_demo(q: f64, nx: usize, ny: usize) -> Result<DamPayload, String> {
    let nx = nx.clamp(6, 90);
    let ny = ny.clamp(2, 30);
    let geom = DamGeometry::default();
    let problem = dam_problem(geom, q.clamp(0.01, 1.0), nx, ny);
    let config = PgConfig {
        alpha0: 1.2,
        growth: 1.2,
        stop_tol: 1e-9,
        max_prox_iters: 120,
        ..PgConfig::default()
    };
    let run = pg::run(&problem, PairKind::P1BubbleP0, config).map_err(|e| e.to_string())?;
    let mesh = &problem.mesh;
    let (vertices, triangles) = flatten_mesh(mesh);
    let values: Vec<f32> = (0..mesh.n_vertices()).map(|v| run.u[v] as f32).collect();
    let surface: Vec<f32> = free_surface_extract(mesh, &run, 1e-4)
        .iter()
        .flat_map(|p| [p[0] as f32, p[1] as f32])
        .collect();
    // compatibility functional: du/dy at the probe point plus the offset
    let probe = [geom.a_l, geom.h_l - geom.h0 / 2.0];
    let compatibility = match mesh.locate(probe, 1e-10) {
        Some(cell) => {
            let g = pgfem::norms::eval_scalar_gradient(
                mesh,
                &pgfem::space::DiscreteSpace::new(mesh, pgfem::space::SpaceKind::P1),
                &run.u[..mesh.n_vertices()],
                cell,
                mesh.barycentric(cell, probe),
            );
            (-geom.h0 * (g[1] + geom.h0 / 2.0)) as f32
        }
        None => f32::NAN,
    };
    Ok(DamPayload {
        vertices,
        triangles,
        values,
        surface,
        compatibility,
        iterations: run.iterations.len() as u32,
    })
}

/// Samples the latent-to-observable map and its derivative on a psi grid,
/// returning (psi, value, slope) triples.
pub fn sample_latent_map(
    variant: &str,
    phi1: f64,
    phi2: f64,
    n: usize,
) -> Result<Vec<f32>, String> {
    let map = match variant {
        "lower" => LegendreMap::lower(Box::new(move |_| phi1)),
        "upper" => LegendreMap::upper(Box::new(move |_| phi2)),
        "bilateral" => {
            if phi2 <= phi1 {
                return Err("bilateral bounds need phi1 < phi2".to_string());
            }
            LegendreMap::bilateral(Box::new(move |_| phi1), Box::new(move |_| phi2))
        }
        other => return Err(format!("unknown variant `{other}`")),
    };
    let n = n.clamp(16, 2048);
    let mut out = Vec::with_capacity(3 * n);
    for i in 0..n {
        let psi = -10.0 + 20.0 * i as f64 / (n - 1) as f64;
        out.push(psi as f32);
        out.push(map.grad_dual(psi, [0.0, 0.0]) as f32);
        out.push(map.grad_dual_derivative(psi, [0.0, 0.0]) as f32);
    }
    Ok(out)
}

#[wasm_bindgen]
pub struct ObstacleResult(FieldPayload);

#[wasm_bindgen]
impl ObstacleResult {
    #[wasm_bindgen(getter)]
    pub fn vertices(&self) -> Vec<f32> {
        self.0.vertices.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn triangles(&self) -> Vec<u32> {
        self.0.triangles.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f32> {
        self.0.values.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn obstacle(&self) -> Vec<f32> {
        self.0.obstacle.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn active(&self) -> Vec<u8> {
        self.0.active.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn residuals(&self) -> Vec<f32> {
        self.0.residuals.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> u32 {
        self.0.iterations
    }
}

/// Browser entry: circular obstacle solve.
#[wasm_bindgen]
pub fn obstacle_demo(n: u32, max_iters: u32) -> Result<ObstacleResult, JsValue> {
    solve_obstacle_demo(n as usize, max_iters as usize)
        .map(ObstacleResult)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub struct DamResultJs(DamPayload);

#[wasm_bindgen]
impl DamResultJs {
    #[wasm_bindgen(getter)]
    pub fn vertices(&self) -> Vec<f32> {
        self.0.vertices.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn triangles(&self) -> Vec<u32> {
        self.0.triangles.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f32> {
        self.0.values.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn surface(&self) -> Vec<f32> {
        self.0.surface.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn compatibility(&self) -> f32 {
        self.0.compatibility
    }
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> u32 {
        self.0.iterations
    }
}

/// Browser entry: dam seepage solve for one discharge.
#[wasm_bindgen]
pub fn dam_demo(q: f64, nx: u32, ny: u32) -> Result<DamResultJs, JsValue> {
    solve_dam_demo(q, nx as usize, ny as usize)
        .map(DamResultJs)
        .map_err(|e| JsValue::from_str(&e))
}

/// Browser entry: latent map curve samples as (psi, value, slope) triples.
#[wasm_bindgen]
pub fn latent_map(variant: &str, phi1: f64, phi2: f64, n: u32) -> Result<Vec<f32>, JsValue> {
    sample_latent_map(variant, phi1, phi2, n as usize).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obstacle_payload_is_consistent() {
        let payload = solve_obstacle_demo(8, 40).unwrap();
        let nv = payload.vertices.len() / 2;
        assert_eq!(payload.values.len(), nv);
        assert_eq!(payload.obstacle.len(), nv);
        assert_eq!(payload.active.len(), nv);
        assert_eq!(payload.triangles.len() % 3, 0);
        assert!(payload.iterations > 0);
        // the contact disk is active
        assert!(payload.active.iter().any(|&a| a == 1));
        // residual history decays
        let first = payload.residuals[1];
        let last = *payload.residuals.last().unwrap();
        assert!(last < first);
    }

    #[test]
    fn dam_payload_has_sorted_surface() {
        let payload = solve_dam_demo(0.2177, 30, 10).unwrap();
        assert!(!payload.surface.is_empty());
        assert!(payload.compatibility.is_finite());
        let xs: Vec<f32> = payload.surface.iter().step_by(2).cloned().collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn latent_map_stays_in_bounds() {
        let samples = sample_latent_map("bilateral", 0.0, 1.0, 64).unwrap();
        for triple in samples.chunks(3) {
            assert!(triple[1] > 0.0 && triple[1] < 1.0);
            assert!(triple[2] > 0.0);
        }
        assert!(sample_latent_map("nope", 0.0, 1.0, 64).is_err());
    }
}
