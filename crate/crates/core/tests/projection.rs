mod common;

use flowsurrogate::harness::{synth_sample, SynthConfig};
use flowsurrogate::mesh::Mesh;
use flowsurrogate::projection::{
    fit_plane, mirror, mirror_variants, project, project_with, reproject, resize_bilinear, upscale_bilinear, Flip,
    Map2, ProjectionPlane, RasterMap, RasterSpec,
};
use flowsurrogate::scalar::vec3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn suite_meshes() -> Vec<Mesh<f64>> {
    let mut out: Vec<Mesh<f64>> = (0..3).map(|s| common::random_grid_mesh(12, 9, s)).collect();
    for seed in 0..3 {
        let cfg = SynthConfig { min_vertices: 2000, max_vertices: 4000, seed, ..Default::default() };
        out.push(synth_sample(&cfg, 0).unwrap().mesh);
    }
    out
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = vec3::norm(v);
        if n > 1e-3 && n <= 1.0 {
            return vec3::scale(v, 1.0 / n);
        }
    }
}

fn plane_sse(points: &[[f64; 3]], origin: [f64; 3], normal: [f64; 3]) -> f64 {
    points.iter().map(|&p| vec3::dot(vec3::sub(p, origin), normal).powi(2)).sum()
}

fn centroid(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let s = points.iter().fold([0.0; 3], |a, p| [a[0] + p[0], a[1] + p[1], a[2] + p[2]]);
    [s[0] / n, s[1] / n, s[2] / n]
}

#[test]
fn fitted_plane_beats_random_centroid_planes_on_every_mesh() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for mesh in suite_meshes() {
        let pts = mesh.vertices();
        let plane = fit_plane(pts).unwrap();
        let best = plane.squared_error(pts);
        let c = centroid(pts);
        for _ in 0..1000 {
            assert!(best <= plane_sse(pts, c, random_unit(&mut rng)));
        }
    }
}

#[test]
fn noisy_plane_beats_random_planes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pts: Vec<[f64; 3]> = (0..10_000)
        .map(|_| {
            let (x, y) = (rng.gen_range(-50.0..50.0), rng.gen_range(-20.0..20.0));
            [x, y, 0.3 * x - 0.2 * y + rng.gen_range(-0.5..0.5)]
        })
        .collect();
    let plane = fit_plane(&pts).unwrap();
    let best = plane.squared_error(&pts);
    let c = centroid(&pts);
    for _ in 0..1000 {
        assert!(best <= plane_sse(&pts, c, random_unit(&mut rng)));
    }
    let n = plane.normal;
    let expect = vec3::scale([-0.3, 0.2, 1.0], 1.0 / (1.0f64 + 0.09 + 0.04).sqrt());
    assert!(vec3::dot(n, expect).abs() > 0.9999);
}

#[test]
fn plane_normal_rotates_with_points() {
    let mesh = common::random_grid_mesh(10, 6, 4);
    let (s, c) = (0.7f64.sin(), 0.7f64.cos());
    let rot = |p: [f64; 3]| [c * p[0] - s * p[2], p[1], s * p[0] + c * p[2]];
    let a = fit_plane(mesh.vertices()).unwrap();
    let moved: Vec<[f64; 3]> = mesh.vertices().iter().map(|&p| rot(p)).collect();
    let b = fit_plane(&moved).unwrap();
    let rn = rot(a.normal);
    let d = vec3::dot(rn, b.normal);
    assert!((d.abs() - 1.0).abs() < 1e-9, "{d}");
}

/// Independent coverage count: pixel centres strictly inside by barycentric
/// coordinates.
fn scanline_cover(tri: [[f64; 2]; 3], h: usize, w: usize) -> Vec<(usize, usize)> {
    let [a, b, c] = tri;
    let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
    let mut out = Vec::new();
    for r in 0..h {
        for col in 0..w {
            let (px, py) = (col as f64 + 0.5, r as f64 + 0.5);
            let l1 = ((b[1] - c[1]) * (px - c[0]) + (c[0] - b[0]) * (py - c[1])) / det;
            let l2 = ((c[1] - a[1]) * (px - c[0]) + (a[0] - c[0]) * (py - c[1])) / det;
            let l3 = 1.0 - l1 - l2;
            if l1 > 0.0 && l2 > 0.0 && l3 > 0.0 {
                out.push((r, col));
            }
        }
    }
    out
}

#[test]
fn single_triangle_mask_matches_scanline_oracle() {
    let mesh = Mesh::new(vec![[0.13, 0.27, 0.0], [10.41, 1.93, 0.0], [3.77, 6.11, 0.0]], vec![[0, 1, 2]]).unwrap();
    let plane = fit_plane(mesh.vertices()).unwrap();
    let spec = RasterSpec { height: 48, width: 96, margin: 4 };
    let (map, corr) = project_with(&mesh, &[1.0, 2.0, 3.0], &plane, spec).unwrap();
    let xy: Vec<[f64; 2]> = mesh.vertices().iter().map(|&p| map.frame.continuous(plane.coordinates(p))).collect();
    let mut expect = vec![0u8; 48 * 96];
    for (r, c) in scanline_cover([xy[0], xy[1], xy[2]], 48, 96) {
        expect[r * 96 + c] = 1;
    }
    for &(r, c) in &corr.pixels {
        expect[r * 96 + c] = 1;
    }
    assert_eq!(map.mask, expect);
    assert!(map.mask_count() > 100);
}

#[test]
fn constant_field_projects_and_reprojects_exactly() {
    for mesh in suite_meshes() {
        for c in [0.0, 1.7, -3.25, 1e-3 / 3.0] {
            let field = vec![c; mesh.vertex_count()];
            let plane = fit_plane(mesh.vertices()).unwrap();
            let (map, corr) = project(&mesh, &field, &plane).unwrap();
            for (i, &m) in map.mask.iter().enumerate() {
                assert_eq!(map.values.data()[i], if m == 1 { c } else { 0.0 });
            }
            assert!(reproject(&map.values, &corr).unwrap().iter().all(|&v| v == c));
            let coarse = Map2::filled(12, 24, c);
            assert!(upscale_bilinear(&coarse).unwrap().data().iter().all(|&v| v == c));
        }
    }
}

#[test]
fn correspondence_consistent_with_frame_and_mask() {
    let mesh = suite_meshes().pop().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let field: Vec<f64> = (0..mesh.vertex_count()).map(|_| rng.gen_range(0.0..5.0)).collect();
    let plane = fit_plane(mesh.vertices()).unwrap();
    let (map, corr) = project(&mesh, &field, &plane).unwrap();
    let f = map.frame;
    for (v, &(r, c)) in corr.pixels.iter().enumerate() {
        assert_eq!(map.mask[r * 768 + c], 1);
        let uv = plane.coordinates(mesh.vertices()[v]);
        let col = ((uv[0] - f.offset[0]) / f.scale).floor() as usize;
        let row = ((uv[1] - f.offset[1]) / f.scale).floor() as usize;
        assert_eq!((row, col), (r, c));
    }
    for (i, &m) in map.mask.iter().enumerate() {
        let v = map.values.data()[i];
        if m == 0 {
            assert_eq!(v, 0.0);
        } else {
            assert!(v.is_finite() && (0.0..5.0).contains(&v));
        }
    }
    // singleton pixels read back their vertex's value
    let mut hits = std::collections::HashMap::new();
    for p in &corr.pixels {
        *hits.entry(*p).or_insert(0) += 1;
    }
    let back = reproject(&map.values, &corr).unwrap();
    let mut singles = 0;
    for (v, p) in corr.pixels.iter().enumerate() {
        if hits[p] == 1 {
            assert!((back[v] - field[v]).abs() < 1e-6);
            singles += 1;
        }
    }
    assert!(singles > 100);
}

#[test]
fn reprojection_is_direct_lookup() {
    let mesh = common::random_grid_mesh(15, 10, 8);
    let plane = fit_plane(mesh.vertices()).unwrap();
    let (_, corr) = project(&mesh, &vec![0.0; 150], &plane).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let img = Map2::from_vec(384, 768, (0..384 * 768).map(|_| rng.gen::<f64>()).collect());
    let got = reproject(&img, &corr).unwrap();
    for (v, &(r, c)) in corr.pixels.iter().enumerate() {
        assert_eq!(got[v], img.data()[r * 768 + c]);
    }
}

#[test]
fn checkerboard_upscale_hits_source_samples() {
    let src = Map2::from_vec(12, 24, (0..288).map(|i| ((i / 24 + i % 24) % 2) as f64).collect());
    let fine = resize_bilinear(&src, 23, 47);
    for r in 0..12 {
        for c in 0..24 {
            assert!((fine.get(2 * r, 2 * c) - src.get(r, c)).abs() < 1e-6);
        }
    }
    let up = upscale_bilinear(&src).unwrap();
    for (r, c) in [(0, 0), (0, 23), (11, 0), (11, 23)] {
        assert!((up.get(r * 383 / 11, c * 767 / 23) - src.get(r, c)).abs() < 1e-6);
    }
}

fn random_raster(h: usize, w: usize, seed: u64) -> RasterMap<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = ProjectionPlane { origin: [0.0; 3], basis_u: [1.0, 0.0, 0.0], basis_v: [0.0, 1.0, 0.0], normal: [0.0, 0.0, 1.0] };
    RasterMap {
        frame: flowsurrogate::projection::RasterFrame { plane, scale: 1.0, offset: [0.0, 0.0], height: h, width: w },
        values: Map2::from_vec(h, w, (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect()),
        mask: (0..h * w).map(|_| rng.gen_range(0..2)).collect(),
    }
}

#[test]
fn horizontal_flip_matches_coordinate_map() {
    let m = random_raster(384, 768, 5);
    let f = mirror(&m, Flip::Horizontal);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5000 {
        let (r, c) = (rng.gen_range(0..384), rng.gen_range(0..768));
        assert_eq!(f.values.get(r, c), m.values.get(r, 767 - c));
        assert_eq!(f.mask[r * 768 + c], m.mask[r * 768 + 767 - c]);
    }
}

#[test]
fn symmetric_map_has_four_equal_variants() {
    let (h, w) = (6, 10);
    let vals: Vec<f64> = (0..h * w).map(|i| {
        let (r, c) = (i / w, i % w);
        (r.min(h - 1 - r) * 7 + c.min(w - 1 - c)) as f64
    }).collect();
    let mut m = random_raster(h, w, 1);
    m.values = Map2::from_vec(h, w, vals);
    m.mask = vec![1; h * w];
    let v = mirror_variants(&m);
    assert!(v.iter().all(|x| x == &m));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn flips_are_bit_exact_involutions(h in 1usize..40, w in 1usize..40, seed in any::<u64>()) {
        let m = random_raster(h, w, seed);
        for f in Flip::ALL {
            let twice = mirror(&mirror(&m, f), f);
            prop_assert_eq!(twice.mask, m.mask.clone());
            let bits = |x: &Map2<f64>| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&twice.values), bits(&m.values));
        }
    }

    #[test]
    fn constant_roundtrip_on_random_meshes(nx in 3usize..14, ny in 3usize..9, seed in any::<u64>(), c in -1e3f64..1e3) {
        let mesh = common::random_grid_mesh(nx, ny, seed);
        let plane = fit_plane(mesh.vertices()).unwrap();
        let (map, corr) = project(&mesh, &vec![c; nx * ny], &plane).unwrap();
        prop_assert!(reproject(&map.values, &corr).unwrap().iter().all(|&v| v == c));
    }
}
