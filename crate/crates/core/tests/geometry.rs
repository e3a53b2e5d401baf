mod common;

use common::{bilinear_hex_volume, bottom_quad, column_volume, flat, perturbed_vertices, smooth, Lcg};
use movmesh::geometry::{
    cell_volume, mesh_fluxes, sample_orography, swept_volume, ColumnMesh, OrographyKind, OrographySpec, Vec3,
};
use proptest::prelude::*;

const L: f64 = 5000.0;
const H: f64 = 1000.0;

fn unit_cube() -> [Vec3; 8] {
    [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 1.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(1.0, 0.0, 1.0),
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(0.0, 1.0, 1.0),
    ]
}

fn offsets(len: usize, scale: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-scale..scale, -scale..scale), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn hex_volume_matches_bilinear_surface_integral(
        shifts in prop::collection::vec((-0.15..0.15f64, -0.15..0.15f64, -0.15..0.15f64), 8),
        scale in 0.01..100.0f64,
    ) {
        let mut v = unit_cube();
        for (p, (dx, dy, dz)) in v.iter_mut().zip(&shifts) {
            *p = (*p + Vec3::new(*dx, *dy, *dz)) * scale;
        }
        let expected = bilinear_hex_volume(&v);
        let got = cell_volume(&v);
        prop_assert!((got - expected).abs() <= 1e-12 * expected.abs(), "{got} vs {expected}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cells_close_on_random_meshes(moves in offsets(81, 0.3)) {
        let base = ColumnMesh::uniform(8, L, H, smooth(L)).unwrap();
        let mesh = base.with_vertices(perturbed_vertices(&base, &moves)).unwrap();
        let scale = mesh.dx() * H;
        for j in 0..8 {
            for i in 0..8 {
                let r = mesh.closure_residual(i, j).norm();
                prop_assert!(r < 1e-12 * scale, "cell ({i}, {j}): {r}");
            }
        }
        prop_assert!(mesh.min_volume() > 0.0);
    }

    #[test]
    fn flat_ground_volume_change_equals_swept_volume(a in offsets(81, 0.3), b in offsets(81, 0.3)) {
        let base = ColumnMesh::uniform(8, L, H, flat(L)).unwrap();
        let old = base.with_vertices(perturbed_vertices(&base, &a)).unwrap();
        let new = base.with_vertices(perturbed_vertices(&base, &b)).unwrap();
        let swept = mesh_fluxes(&old, &new, 1.0).unwrap().volumes;
        for j in 0..8 {
            for i in 0..8 {
                let c = old.cell_index(i, j);
                let dv = new.volumes()[c] - old.volumes()[c];
                let residual = dv - swept.net_outflow(i, j);
                prop_assert!(residual.abs() < 1e-12 * old.volumes()[c], "cell ({i}, {j}): {residual}");
            }
        }
    }

    #[test]
    fn reversing_a_face_motion_negates_the_swept_volume(a in offsets(81, 0.3), b in offsets(81, 0.3)) {
        let base = ColumnMesh::uniform(8, L, H, smooth(L)).unwrap();
        let old = base.with_vertices(perturbed_vertices(&base, &a)).unwrap();
        let new = base.with_vertices(perturbed_vertices(&base, &b)).unwrap();
        for j in 0..8 {
            for i in 1..8 {
                let f = old.x_face_corners(i, j);
                let g = new.x_face_corners(i, j);
                prop_assert_eq!(swept_volume(&f, &g), -swept_volume(&g, &f));
            }
        }
    }
}

#[test]
fn uniform_flat_cells_are_boxes() {
    let mesh = ColumnMesh::uniform(10, L, H, flat(L)).unwrap();
    let dx = 2.0 * L / 10.0;
    for v in mesh.volumes() {
        assert!((v - dx * dx * H).abs() < 1e-12 * v);
    }
}

#[test]
fn total_volume_over_smooth_orography() {
    let n = 100;
    let mesh = ColumnMesh::uniform(n, L, H, smooth(L)).unwrap();

    // exact integral of the bilinear bottom surface the mesh represents
    let mut bilinear = 0.0;
    for j in 0..n {
        for i in 0..n {
            bilinear += column_volume(&bottom_quad(&mesh, i, j), H);
        }
    }
    assert!((mesh.total_volume() - bilinear).abs() < 1e-12 * bilinear);

    // fine midpoint quadrature of the true surface
    let fine = 2000;
    let h = 2.0 * L / fine as f64;
    let spec = smooth(L);
    let mut under = 0.0;
    for j in 0..fine {
        for i in 0..fine {
            let p = [-L + (i as f64 + 0.5) * h, -L + (j as f64 + 0.5) * h];
            under += sample_orography(p, &spec) * h * h;
        }
    }
    let truth = 4.0 * L * L * H - under;

    // bilinear interpolation error is at most dx^2/8 (|h_xx| + |h_yy|) pointwise,
    // nonzero only over the two features
    let dx = mesh.dx();
    let curvature = 0.5 * spec.h_max.abs().max(spec.h_min.abs()) * (std::f64::consts::PI / spec.radius).powi(2);
    let footprint = 2.0 * std::f64::consts::PI * (spec.radius + dx).powi(2);
    let bound = dx * dx / 8.0 * 2.0 * curvature * footprint;
    let err = (mesh.total_volume() - truth).abs();
    assert!(err < bound, "error {err:.3e} exceeds interpolation bound {bound:.3e}");
}

/// Two-by-two mesh whose middle vertex slides towards the summit of a hill
/// placed at the centre of the domain.
fn hill_at_centre() -> OrographySpec {
    let mut spec = OrographySpec::for_domain(OrographyKind::SmoothCosine, 1000.0);
    spec.hill_center = [0.0, 0.0];
    spec.valley_center = [5000.0, 5000.0];
    spec.radius = 800.0;
    spec
}

#[test]
fn moving_a_vertex_up_the_hill_removes_volume() {
    let spec = hill_at_centre();
    let base = ColumnMesh::uniform(2, 1000.0, 1000.0, spec.clone()).unwrap();
    let mut shifted = base.vertices().to_vec();
    shifted[base.vertex_index(1, 1)] = [200.0, 150.0];
    let before = base.with_vertices(shifted.clone()).unwrap();
    shifted[base.vertex_index(1, 1)] = [30.0, -20.0];
    let after = base.with_vertices(shifted).unwrap();

    assert!(sample_orography([30.0, -20.0], &spec) > sample_orography([200.0, 150.0], &spec));
    assert!(after.total_volume() < before.total_volume());
    for mesh in [&before, &after] {
        for j in 0..2 {
            for i in 0..2 {
                let expected = column_volume(&bottom_quad(mesh, i, j), 1000.0);
                let got = mesh.volumes()[mesh.cell_index(i, j)];
                assert!((got - expected).abs() < 1e-12 * expected, "{got} vs {expected}");
            }
        }
    }
}

#[test]
fn volume_change_over_orography_is_swept_plus_bottom_motion() {
    let spec = hill_at_centre();
    let base = ColumnMesh::uniform(4, 1000.0, 1000.0, spec).unwrap();
    let mut rng = Lcg(7);
    let moves: Vec<(f64, f64)> = (0..25)
        .map(|_| (0.3 * rng.symmetric(), 0.3 * rng.symmetric()))
        .collect();
    let old = base.with_vertices(perturbed_vertices(&base, &moves)).unwrap();
    let moves: Vec<(f64, f64)> = (0..25)
        .map(|_| (0.3 * rng.symmetric(), 0.3 * rng.symmetric()))
        .collect();
    let new = base.with_vertices(perturbed_vertices(&base, &moves)).unwrap();

    let swept = mesh_fluxes(&old, &new, 1.0).unwrap().volumes;
    let mut drift = 0.0;
    for j in 0..4 {
        for i in 0..4 {
            let c = old.cell_index(i, j);
            let lateral = {
                let x = |ii: usize| bilinear_hex_volume(&hex(&old.x_face_corners(ii, j), &new.x_face_corners(ii, j)));
                let y = |jj: usize| bilinear_hex_volume(&hex(&old.y_face_corners(i, jj), &new.y_face_corners(i, jj)));
                let inner_x = |ii: usize| if ii == 0 || ii == 4 { 0.0 } else { x(ii) };
                let inner_y = |jj: usize| if jj == 0 || jj == 4 { 0.0 } else { y(jj) };
                inner_x(i + 1) - inner_x(i) + inner_y(j + 1) - inner_y(j)
            };
            assert!((swept.net_outflow(i, j) - lateral).abs() < 1e-9 * old.volumes()[c]);

            let v_old = column_volume(&bottom_quad(&old, i, j), 1000.0);
            let v_new = column_volume(&bottom_quad(&new, i, j), 1000.0);
            let expected = v_new - v_old - lateral;
            let got = new.volumes()[c] - old.volumes()[c] - swept.net_outflow(i, j);
            assert!(
                (got - expected).abs() < 1e-9 * old.volumes()[c],
                "cell ({i}, {j}): {got} vs {expected}"
            );
            drift += got.abs();
        }
    }
    // the bottom motion is not captured by the lateral faces
    assert!(drift > 1.0);
}

fn hex(old: &[Vec3; 4], new: &[Vec3; 4]) -> [Vec3; 8] {
    [old[0], old[1], old[2], old[3], new[0], new[1], new[2], new[3]]
}

#[test]
fn tangled_vertices_are_rejected() {
    let base = ColumnMesh::uniform(3, L, H, flat(L)).unwrap();
    let mut v = base.vertices().to_vec();
    let k = base.vertex_index(1, 1);
    v[k] = base.vertex(2, 2);
    v[k][0] += 100.0;
    assert!(base.with_vertices(v).is_err());
}
