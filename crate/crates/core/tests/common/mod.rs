//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use movmesh::geometry::{ColumnMesh, OrographyKind, OrographySpec, Point2, Vec3};

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

fn bilinear(p: &[Vec3; 4], u: f64, v: f64) -> Vec3 {
    p[0] * ((1.0 - u) * (1.0 - v)) + p[1] * (u * (1.0 - v)) + p[2] * (u * v) + p[3] * ((1.0 - u) * v)
}

/// `(1/3) * integral of x . n dS` over a bilinear patch, by 2x2 Gauss quadrature.
/// The integrand has degree two in each parameter, so this is exact.
fn patch_flux(p: &[Vec3; 4]) -> f64 {
    let mut acc = 0.0;
    for u in GAUSS {
        for v in GAUSS {
            let x = bilinear(p, u, v);
            let xu = (p[1] - p[0]) * (1.0 - v) + (p[2] - p[3]) * v;
            let xv = (p[3] - p[0]) * (1.0 - u) + (p[2] - p[1]) * u;
            acc += 0.25 * x.dot(xu.cross(xv));
        }
    }
    acc / 3.0
}

/// Volume enclosed by a hexahedron with bilinear faces, bottom quad `0..4`
/// counterclockwise from above and top quad `4..8`.
pub fn bilinear_hex_volume(v: &[Vec3; 8]) -> f64 {
    let faces = [
        [v[0], v[3], v[2], v[1]],
        [v[4], v[5], v[6], v[7]],
        [v[0], v[1], v[5], v[4]],
        [v[1], v[2], v[6], v[5]],
        [v[2], v[3], v[7], v[6]],
        [v[3], v[0], v[4], v[7]],
    ];
    faces.iter().map(patch_flux).sum()
}

/// Volume of a column between a bilinear bottom surface and the lid `height`,
/// integrated over its bilinear footprint. `q` is the bottom quad.
pub fn column_volume(q: &[Vec3; 4], height: f64) -> f64 {
    let mut acc = 0.0;
    for u in GAUSS {
        for v in GAUSS {
            let z = bilinear(q, u, v).z;
            let xu = (q[1] - q[0]) * (1.0 - v) + (q[2] - q[3]) * v;
            let xv = (q[3] - q[0]) * (1.0 - u) + (q[2] - q[1]) * u;
            let jac = xu.x * xv.y - xu.y * xv.x;
            acc += 0.25 * (height - z) * jac;
        }
    }
    acc
}

pub fn bottom_quad(mesh: &ColumnMesh, i: usize, j: usize) -> [Vec3; 4] {
    let c = mesh.cell_corners(i, j);
    [c[0], c[1], c[2], c[3]]
}

/// Small deterministic generator so oracle inputs do not depend on proptest.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in `[-1, 1)`.
    pub fn symmetric(&mut self) -> f64 {
        2.0 * self.next() - 1.0
    }
}

/// Vertices of `mesh` moved by `offsets` (fractions of a cell width) with
/// boundary vertices kept on the boundary and corners fixed.
pub fn perturbed_vertices(mesh: &ColumnMesh, offsets: &[(f64, f64)]) -> Vec<Point2> {
    let n = mesh.n();
    let dx = mesh.dx();
    let mut out = mesh.vertices().to_vec();
    for j in 0..=n {
        for i in 0..=n {
            let k = mesh.vertex_index(i, j);
            let (ox, oy) = offsets[k];
            if i != 0 && i != n {
                out[k][0] += ox * dx;
            }
            if j != 0 && j != n {
                out[k][1] += oy * dx;
            }
        }
    }
    out
}

pub fn flat(half_length: f64) -> OrographySpec {
    OrographySpec::for_domain(OrographyKind::Flat, half_length)
}

pub fn smooth(half_length: f64) -> OrographySpec {
    OrographySpec::for_domain(OrographyKind::SmoothCosine, half_length)
}

/// Plain finite-volume advection on a fixed uniform Cartesian grid with flat
/// ground: Gauss gradients with midpoint face values, linear-upwind face
/// values, and the two-stage off-centred scheme. Written against raw arrays
/// with no mesh abstraction.
pub struct PlainAdvection {
    pub n: usize,
    pub dx: f64,
    pub height: f64,
    /// Volume flux through x-face `(i, j)`, `i` in `0..=n`, positive towards +x.
    pub fx: Vec<f64>,
    /// Volume flux through y-face `(i, j)`, `j` in `0..=n`, positive towards +y.
    pub fy: Vec<f64>,
}

impl PlainAdvection {
    pub fn new(n: usize, half_length: f64, height: f64, psi: impl Fn(f64, f64) -> f64) -> Self {
        let dx = 2.0 * half_length / n as f64;
        let at = |i: usize, j: usize| psi(-half_length + i as f64 * dx, -half_length + j as f64 * dx);
        let mut fx = vec![0.0; (n + 1) * n];
        let mut fy = vec![0.0; n * (n + 1)];
        for j in 0..n {
            for i in 0..=n {
                fx[i + j * (n + 1)] = height * (at(i, j) - at(i, j + 1));
            }
        }
        for j in 0..=n {
            for i in 0..n {
                fy[i + j * n] = height * (at(i + 1, j) - at(i, j));
            }
        }
        Self { n, dx, height, fx, fy }
    }

    fn gradient(&self, rho: &[f64]) -> Vec<(f64, f64)> {
        let n = self.n;
        let r = |i: usize, j: usize| rho[i + j * n];
        let mut g = vec![(0.0, 0.0); n * n];
        for j in 0..n {
            for i in 0..n {
                let west = if i == 0 { r(i, j) } else { 0.5 * (r(i - 1, j) + r(i, j)) };
                let east = if i == n - 1 {
                    r(i, j)
                } else {
                    0.5 * (r(i, j) + r(i + 1, j))
                };
                let south = if j == 0 { r(i, j) } else { 0.5 * (r(i, j - 1) + r(i, j)) };
                let north = if j == n - 1 {
                    r(i, j)
                } else {
                    0.5 * (r(i, j) + r(i, j + 1))
                };
                g[i + j * n] = ((east - west) / self.dx, (north - south) / self.dx);
            }
        }
        g
    }

    fn divergence(&self, rho: &[f64]) -> Vec<f64> {
        let n = self.n;
        let g = self.gradient(rho);
        let half = 0.5 * self.dx;
        let mut div = vec![0.0; n * n];
        for j in 0..n {
            for i in 1..n {
                let f = self.fx[i + j * (n + 1)];
                let (l, r) = (i - 1 + j * n, i + j * n);
                let face = if f >= 0.0 {
                    rho[l] + half * g[l].0
                } else {
                    rho[r] - half * g[r].0
                };
                div[l] += face * f;
                div[r] -= face * f;
            }
        }
        for j in 1..n {
            for i in 0..n {
                let f = self.fy[i + j * n];
                let (l, r) = (i + (j - 1) * n, i + j * n);
                let face = if f >= 0.0 {
                    rho[l] + half * g[l].1
                } else {
                    rho[r] - half * g[r].1
                };
                div[l] += face * f;
                div[r] -= face * f;
            }
        }
        div
    }

    pub fn step(&self, rho: &[f64], dt: f64, alpha: f64) -> Vec<f64> {
        let v = self.dx * self.dx * self.height;
        let d0 = self.divergence(rho);
        let predictor: Vec<f64> = rho.iter().zip(&d0).map(|(r, d)| r - dt * d / v).collect();
        let d1 = self.divergence(&predictor);
        (0..rho.len())
            .map(|c| rho[c] - dt * ((1.0 - alpha) * d0[c] + alpha * d1[c]) / v)
            .collect()
    }
}
