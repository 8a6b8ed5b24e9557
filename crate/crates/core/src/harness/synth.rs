//! Synthetic stand-in dataset: bent plates with cutouts and rim flanges,
//! random gates, and closed-form fill-time and deflection fields.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sample::{derive_seed, Provenance, SimulationSample};
use super::HarnessError;
use crate::mesh::{geodesic_distances, Gate, Mesh, MeshGraph, TechnologicalParameters};
use crate::projection::fit_plane;
use crate::scalar::{vec3, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub samples: usize,
    /// Approximate vertex-count range; cutouts can land a sample slightly
    /// below the lower end.
    pub min_vertices: usize,
    pub max_vertices: usize,
    pub min_gates: usize,
    pub max_gates: usize,
    /// Melt-front speed in mm/s.
    pub flow_speed: f64,
    pub deflection_a: f64,
    pub deflection_b: f64,
    pub seed: u64,
    pub max_retries: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            samples: 40,
            min_vertices: 2_000,
            max_vertices: 10_000,
            min_gates: 1,
            max_gates: 5,
            flow_speed: 100.0,
            deflection_a: 1.0,
            deflection_b: 2.0,
            seed: 0,
            max_retries: 8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let ok = self.min_vertices >= 64
            && self.min_vertices <= self.max_vertices
            && self.min_gates >= 1
            && self.min_gates <= self.max_gates
            && self.flow_speed > 0.0
            && self.flow_speed.is_finite()
            && self.deflection_a.is_finite()
            && self.deflection_b.is_finite();
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config("invalid synthetic dataset settings".into()))
        }
    }
}

/// Earliest arrival over gates: `min_g(open_g + geodesic(p, g) / v)`.
pub fn fill_time_oracle<T: Real>(
    graph: &MeshGraph<T>,
    gates: &[Gate],
    flow_speed: f64,
) -> Result<Vec<T>, HarnessError> {
    let v = T::of(flow_speed);
    let mut t = vec![T::infinity(); graph.vertex_count()];
    for g in gates {
        let d = geodesic_distances(graph, g.node_id)?;
        let open = T::of(g.opening_time);
        for (ti, di) in t.iter_mut().zip(d) {
            *ti = ti.min(open + di / v);
        }
    }
    Ok(t)
}

/// `a * t * |p - c| / L + b * h / L` with `c` the vertex centroid, `L` the
/// bounding-box diagonal and `h` the signed height above the fitted plane.
pub fn deflection_oracle<T: Real>(mesh: &Mesh<T>, fill_time: &[T], a: f64, b: f64) -> Result<Vec<T>, HarnessError> {
    let plane = fit_plane(mesh.vertices())?;
    let c = mesh.centroid();
    let l = mesh.diagonal();
    let (a, b) = (T::of(a), T::of(b));
    Ok(mesh
        .vertices()
        .iter()
        .zip(fill_time)
        .map(|(&p, &t)| a * t * (vec3::dist(p, c) / l) + b * (plane.height(p) / l))
        .collect())
}

struct PlateShape {
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    bend_x: f64,
    bend_y: f64,
    twist: f64,
    flange_depth: f64,
    flange_rows: usize,
    cutouts: Vec<[f64; 4]>,
}

impl PlateShape {
    fn random(rng: &mut ChaCha8Rng, target: usize) -> Self {
        let width = rng.gen_range(120.0..240.0);
        let height = rng.gen_range(60.0..120.0);
        let flange_rows = 2;
        // plate grid gets what the flanges leave over
        let aspect: f64 = width / height;
        let approx_side = ((target as f64) / aspect).sqrt();
        let flange_est = (2.0 * (approx_side * aspect + approx_side) * flange_rows as f64) as usize;
        let plate = target.saturating_sub(flange_est).max(64);
        let ny = (((plate as f64) / aspect).sqrt().round() as usize).max(6);
        let nx = (plate / ny).max(6);
        let n_cut = rng.gen_range(0..=2);
        let cutouts = (0..n_cut)
            .map(|_| {
                let cw = rng.gen_range(0.10..0.25) * width;
                let ch = rng.gen_range(0.15..0.30) * height;
                let x0 = rng.gen_range(0.15 * width..(0.85 * width - cw));
                let y0 = rng.gen_range(0.15 * height..(0.85 * height - ch));
                [x0, y0, x0 + cw, y0 + ch]
            })
            .collect();
        Self {
            width,
            height,
            nx,
            ny,
            bend_x: rng.gen_range(-0.4..0.4),
            bend_y: rng.gen_range(-0.3..0.3),
            twist: rng.gen_range(-0.1..0.1),
            flange_depth: rng.gen_range(6.0..12.0),
            flange_rows,
            cutouts,
        }
    }

    fn surface(&self, x: f64, y: f64) -> [f64; 3] {
        let (cx, cy) = (x - self.width / 2.0, y - self.height / 2.0);
        let z = self.bend_x * cx * cx / self.width + self.bend_y * cy * cy / self.height + self.twist * cx * cy / self.width;
        [x, y, z]
    }

    fn build(&self, rng: &mut ChaCha8Rng) -> Result<Mesh<f64>, HarnessError> {
        let (nx, ny) = (self.nx, self.ny);
        let dx = self.width / (nx - 1) as f64;
        let dy = self.height / (ny - 1) as f64;
        let mut verts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let interior = i > 0 && j > 0 && i + 1 < nx && j + 1 < ny;
                let (jx, jy) = if interior {
                    (rng.gen_range(-0.2..0.2) * dx, rng.gen_range(-0.2..0.2) * dy)
                } else {
                    (0.0, 0.0)
                };
                verts.push(self.surface(i as f64 * dx + jx, j as f64 * dy + jy));
            }
        }
        let id = |i: usize, j: usize| j * nx + i;
        let mut faces = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let (mx, my) = ((i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy);
                if self.cutouts.iter().any(|c| mx > c[0] && mx < c[2] && my > c[1] && my < c[3]) {
                    continue;
                }
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                } else {
                    faces.push([a, b, d]);
                    faces.push([b, c, d]);
                }
            }
        }
        // four rim strips hanging below the plate edges, corners left open
        let edges: [Vec<usize>; 4] = [
            (1..nx - 1).map(|i| id(i, 0)).collect(),
            (1..ny - 1).map(|j| id(nx - 1, j)).collect(),
            (1..nx - 1).rev().map(|i| id(i, ny - 1)).collect(),
            (1..ny - 1).rev().map(|j| id(0, j)).collect(),
        ];
        let step = self.flange_depth / self.flange_rows as f64;
        for edge in edges {
            let mut prev = edge.clone();
            for r in 1..=self.flange_rows {
                let row: Vec<usize> = edge
                    .iter()
                    .map(|&v| {
                        let p = verts[v];
                        verts.push([p[0], p[1], p[2] - step * r as f64]);
                        verts.len() - 1
                    })
                    .collect();
                for k in 0..edge.len() - 1 {
                    faces.push([prev[k], prev[k + 1], row[k + 1]]);
                    faces.push([prev[k], row[k + 1], row[k]]);
                }
                prev = row;
            }
        }
        compact(verts, faces)
    }
}

// drops vertices no face references
fn compact(verts: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Mesh<f64>, HarnessError> {
    let mut remap = vec![usize::MAX; verts.len()];
    let mut kept = Vec::new();
    let mut out_faces = Vec::with_capacity(faces.len());
    for f in faces {
        out_faces.push(f.map(|v| {
            if remap[v] == usize::MAX {
                remap[v] = kept.len();
                kept.push(verts[v]);
            }
            remap[v]
        }));
    }
    Ok(Mesh::new(kept, out_faces)?)
}

fn random_parameters(rng: &mut ChaCha8Rng, fill_end: f64) -> TechnologicalParameters {
    let cooling: f64 = rng.gen_range(10.0..30.0);
    TechnologicalParameters {
        melt_temperature: Some(rng.gen_range(220.0..280.0)),
        cooling_time: Some(cooling),
        duration: Some(fill_end + cooling),
        filling_pressure: Some(rng.gen_range(30.0..80.0)),
        ambient_temperature: Some(25.0),
        mold_temperature: Some(rng.gen_range(40.0..80.0)),
        fill_end_time: Some(fill_end),
    }
}

/// One synthetic sample; sample `index` depends only on `(config.seed,
/// index)`.
pub fn synth_sample(config: &SynthConfig, index: usize) -> Result<SimulationSample<f64>, HarnessError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, index as u64));
    for _ in 0..=config.max_retries {
        let target = rng.gen_range(config.min_vertices..=config.max_vertices);
        let shape = PlateShape::random(&mut rng, target);
        let Ok(mesh) = shape.build(&mut rng) else { continue };
        if mesh.component_count() != 1 || fit_plane(mesh.vertices()).is_err() {
            continue;
        }
        let n_gates = rng.gen_range(config.min_gates..=config.max_gates);
        let nodes = rand::seq::index::sample(&mut rng, mesh.vertex_count(), n_gates.min(mesh.vertex_count()));
        let gates: Vec<Gate> = nodes.iter().map(|v| Gate::new(v, rng.gen_range(0.0..2.0))).collect();
        let graph = MeshGraph::build(&mesh);
        let fill = fill_time_oracle(&graph, &gates, config.flow_speed)?;
        let deflection = deflection_oracle(&mesh, &fill, config.deflection_a, config.deflection_b)?;
        let fill_end = fill.iter().copied().fold(0.0, f64::max);
        let parameters = random_parameters(&mut rng, fill_end);
        return Ok(SimulationSample {
            name: format!("synth_{index:04}"),
            mesh,
            gates,
            parameters,
            fill_time: Some(fill),
            deflection: Some(deflection),
            provenance: Provenance::Synthetic,
        });
    }
    Err(HarnessError::Degenerate { index })
}

pub fn synth_generate(config: &SynthConfig) -> Result<Vec<SimulationSample<f64>>, HarnessError> {
    (0..config.samples).map(|i| synth_sample(config, i)).collect()
}
