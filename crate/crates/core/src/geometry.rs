//! Structured single-layer column mesh over orography.
//!
//! Vertices move horizontally only. Each vertex carries a bottom height
//! sampled from the orography at its current horizontal position and a top
//! height fixed at the domain lid, so every cell is a hexahedron whose bottom
//! face is the bilinear surface through four sampled heights.
//!
//! Volumes and swept volumes use the same decomposition: every quad face is
//! split into four triangles about its vertex average and each triangle forms
//! a signed tetrahedron with the cell's vertex average. For bilinear faces this
//! gives the exact enclosed volume.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Horizontal position in metres.
pub type Point2 = [f64; 2];

fn distance(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrographyKind {
    Flat,
    SmoothCosine,
    SteepCylinder,
}

impl OrographyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OrographyKind::Flat => "flat",
            OrographyKind::SmoothCosine => "smooth",
            OrographyKind::SteepCylinder => "steep",
        }
    }
}

impl std::str::FromStr for OrographyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "flat" => Ok(OrographyKind::Flat),
            "smooth" | "smooth_cosine" => Ok(OrographyKind::SmoothCosine),
            "steep" | "steep_cylinder" => Ok(OrographyKind::SteepCylinder),
            other => Err(format!("unknown orography kind `{other}`")),
        }
    }
}

/// A hill and a valley, either cosine-shaped or cylindrical with vertical cliffs.
#[derive(Clone, Debug, PartialEq)]
pub struct OrographySpec {
    pub kind: OrographyKind,
    pub hill_center: Point2,
    pub valley_center: Point2,
    /// Radius of both features (m).
    pub radius: f64,
    /// Hill summit height of the cosine hill (m).
    pub h_max: f64,
    /// Valley floor height of the cosine valley (m), negative.
    pub h_min: f64,
    /// Cliff height of the cylinders (m).
    pub h_c: f64,
}

impl OrographySpec {
    /// Hill at (-L/2, 0), valley at (L/2, 0), radius L/5, heights of 500 m.
    pub fn for_domain(kind: OrographyKind, half_length: f64) -> Self {
        Self {
            kind,
            hill_center: [-half_length / 2.0, 0.0],
            valley_center: [half_length / 2.0, 0.0],
            radius: half_length / 5.0,
            h_max: 500.0,
            h_min: -500.0,
            h_c: 500.0,
        }
    }

    pub fn height(&self, p: Point2) -> f64 {
        sample_orography(p, self)
    }

    /// Largest height magnitude the surface can reach.
    pub fn max_abs_height(&self) -> f64 {
        match self.kind {
            OrographyKind::Flat => 0.0,
            OrographyKind::SmoothCosine => self.h_max.abs().max(self.h_min.abs()),
            OrographyKind::SteepCylinder => self.h_c.abs(),
        }
    }
}

/// Surface height at a horizontal position.
pub fn sample_orography(p: Point2, spec: &OrographySpec) -> f64 {
    let r_h = distance(p, spec.hill_center);
    let r_v = distance(p, spec.valley_center);
    let a = spec.radius;
    match spec.kind {
        OrographyKind::Flat => 0.0,
        OrographyKind::SmoothCosine => {
            if r_h <= a {
                0.5 * spec.h_max * (1.0 + (std::f64::consts::PI * r_h / a).cos())
            } else if r_v <= a {
                0.5 * spec.h_min * (1.0 + (std::f64::consts::PI * r_v / a).cos())
            } else {
                0.0
            }
        }
        OrographyKind::SteepCylinder => {
            if r_h <= a {
                spec.h_c
            } else if r_v <= a {
                -spec.h_c
            } else {
                0.0
            }
        }
    }
}

/// Outward-oriented faces of a hexahedron whose vertices 0..4 form the bottom
/// quad counterclockwise seen from above and 4..8 the matching top quad.
const HEX_FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [1, 2, 6, 5],
    [2, 3, 7, 6],
    [3, 0, 4, 7],
];

fn average<const K: usize>(v: &[Vec3; K]) -> Vec3 {
    let mut c = Vec3::ZERO;
    for p in v {
        c += *p;
    }
    c * (1.0 / K as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HexGeometry {
    pub volume: f64,
    pub centroid: Vec3,
}

/// Volume and volume-weighted centroid of a hexahedron.
pub fn hex_geometry(v: &[Vec3; 8]) -> HexGeometry {
    let c = average(v);
    let mut volume = 0.0;
    let mut moment = Vec3::ZERO;
    for face in HEX_FACES {
        let q = [v[face[0]], v[face[1]], v[face[2]], v[face[3]]];
        let fc = average(&q);
        for k in 0..4 {
            let a = q[k] - c;
            let b = q[(k + 1) % 4] - c;
            let d = fc - c;
            let tet = a.dot(b.cross(d)) / 6.0;
            volume += tet;
            moment += (q[k] + q[(k + 1) % 4] + fc + c) * (0.25 * tet);
        }
    }
    let centroid = if volume.abs() > f64::MIN_POSITIVE {
        moment * (1.0 / volume)
    } else {
        c
    };
    HexGeometry { volume, centroid }
}

/// Signed volume of a hexahedron; positive for an untangled cell.
pub fn cell_volume(v: &[Vec3; 8]) -> f64 {
    hex_geometry(v).volume
}

/// Volume swept by a quad face moving from `old` to `new`.
///
/// The old face must be ordered so its right-handed normal is the outward
/// normal of the owning cell; motion along that normal gives a positive value.
pub fn swept_volume(old: &[Vec3; 4], new: &[Vec3; 4]) -> f64 {
    if old == new {
        return 0.0;
    }
    // one evaluation order per pair of positions, so swapping them is an exact negation
    let key = |q: &[Vec3; 4]| q.map(|p| [p.x, p.y, p.z]);
    if key(old) < key(new) {
        cell_volume(&[old[0], old[1], old[2], old[3], new[0], new[1], new[2], new[3]])
    } else {
        -cell_volume(&[new[0], new[1], new[2], new[3], old[0], old[1], old[2], old[3]])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FaceGeom {
    /// Area vector, magnitude equal to the face area.
    pub area: Vec3,
    /// Area-weighted centroid.
    pub centre: Vec3,
}

pub fn quad_geometry(q: &[Vec3; 4]) -> FaceGeom {
    let c = average(q);
    let mut tris = [Vec3::ZERO; 4];
    let mut area = Vec3::ZERO;
    for k in 0..4 {
        tris[k] = (q[k] - c).cross(q[(k + 1) % 4] - c) * 0.5;
        area += tris[k];
    }
    let mag = area.norm();
    if mag <= f64::MIN_POSITIVE {
        return FaceGeom { area, centre: c };
    }
    let unit = area * (1.0 / mag);
    let mut weight = 0.0;
    let mut moment = Vec3::ZERO;
    for k in 0..4 {
        let w = tris[k].dot(unit);
        weight += w;
        moment += (q[k] + q[(k + 1) % 4] + c) * (w / 3.0);
    }
    FaceGeom {
        area,
        centre: moment * (1.0 / weight),
    }
}

/// One scalar per lateral face: x-faces (normal +x) then y-faces (normal +y).
///
/// x-face `(i, j)`, `i` in `0..=n`, separates cells `(i-1, j)` and `(i, j)`;
/// y-face `(i, j)`, `j` in `0..=n`, separates cells `(i, j-1)` and `(i, j)`.
/// Values are oriented from the lower-index cell to the higher-index cell.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceField {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            x: vec![0.0; (n + 1) * n],
            y: vec![0.0; n * (n + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn xi(&self, i: usize, j: usize) -> usize {
        i + j * (self.n + 1)
    }

    #[inline]
    pub fn yi(&self, i: usize, j: usize) -> usize {
        i + j * self.n
    }

    /// Net outward value summed over the four lateral faces of cell `(i, j)`.
    #[inline]
    pub fn net_outflow(&self, i: usize, j: usize) -> f64 {
        self.x[self.xi(i + 1, j)] - self.x[self.xi(i, j)] + self.y[self.yi(i, j + 1)] - self.y[self.yi(i, j)]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n: self.n,
            x: self.x.iter().map(|v| v * s).collect(),
            y: self.y.iter().map(|v| v * s).collect(),
        }
    }

    pub fn is_boundary_x(&self, i: usize) -> bool {
        i == 0 || i == self.n
    }

    pub fn is_boundary_y(&self, j: usize) -> bool {
        j == 0 || j == self.n
    }
}

/// Column mesh snapshot. Updates build a new snapshot.
#[derive(Clone, Debug)]
pub struct ColumnMesh {
    n: usize,
    half_length: f64,
    height: f64,
    orography: OrographySpec,
    vertices: Vec<Point2>,
    bottom: Vec<f64>,
    volumes: Vec<f64>,
    centroids: Vec<Vec3>,
    top_area: Vec<Vec3>,
    bottom_area: Vec<Vec3>,
    x_faces: Vec<FaceGeom>,
    y_faces: Vec<FaceGeom>,
}

impl ColumnMesh {
    /// Uniform `(n+1)^2` vertex grid on `[-L, L]^2` with the lid at `height`.
    pub fn uniform(n: usize, half_length: f64, height: f64, orography: OrographySpec) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("N must be ≥ 2".into()));
        }
        if !(half_length > 0.0) {
            return Err(Error::Config("domain half-length must be positive".into()));
        }
        if orography.max_abs_height() >= height {
            return Err(Error::Config(format!(
                "orography height {} reaches the domain height {}",
                orography.max_abs_height(),
                height
            )));
        }
        let dx = 2.0 * half_length / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([grid_coord(i, n, half_length, dx), grid_coord(j, n, half_length, dx)]);
            }
        }
        Self::assemble(n, half_length, height, orography, vertices)
    }

    /// Moves the vertices horizontally, re-sampling the bottom heights.
    pub fn with_vertices(&self, vertices: Vec<Point2>) -> Result<Self> {
        let n = self.n;
        if vertices.len() != (n + 1) * (n + 1) {
            return Err(Error::Shape {
                expected: (n + 1) * (n + 1),
                found: vertices.len(),
            });
        }
        let l = self.half_length;
        for j in 0..=n {
            for i in 0..=n {
                let p = vertices[i + j * (n + 1)];
                let bad_x = (i == 0 && p[0] != -l) || (i == n && p[0] != l);
                let bad_y = (j == 0 && p[1] != -l) || (j == n && p[1] != l);
                if bad_x || bad_y {
                    return Err(Error::BoundaryConstraint { i, j });
                }
            }
        }
        Self::assemble(n, l, self.height, self.orography.clone(), vertices)
    }

    fn assemble(
        n: usize,
        half_length: f64,
        height: f64,
        orography: OrographySpec,
        vertices: Vec<Point2>,
    ) -> Result<Self> {
        let bottom: Vec<f64> = vertices.iter().map(|p| orography.height(*p)).collect();
        let mut mesh = Self {
            n,
            half_length,
            height,
            orography,
            vertices,
            bottom,
            volumes: Vec::with_capacity(n * n),
            centroids: Vec::with_capacity(n * n),
            top_area: Vec::with_capacity(n * n),
            bottom_area: Vec::with_capacity(n * n),
            x_faces: Vec::with_capacity((n + 1) * n),
            y_faces: Vec::with_capacity(n * (n + 1)),
        };
        for j in 0..n {
            for i in 0..n {
                let v = mesh.cell_corners(i, j);
                let g = hex_geometry(&v);
                if !(g.volume > 0.0) {
                    return Err(Error::Tangled { i, j, volume: g.volume });
                }
                mesh.volumes.push(g.volume);
                mesh.centroids.push(g.centroid);
                mesh.bottom_area.push(quad_geometry(&[v[0], v[3], v[2], v[1]]).area);
                mesh.top_area.push(quad_geometry(&[v[4], v[5], v[6], v[7]]).area);
            }
        }
        for j in 0..n {
            for i in 0..=n {
                let f = quad_geometry(&mesh.x_face_corners(i, j));
                mesh.x_faces.push(f);
            }
        }
        for j in 0..=n {
            for i in 0..n {
                let f = quad_geometry(&mesh.y_face_corners(i, j));
                mesh.y_faces.push(f);
            }
        }
        Ok(mesh)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Spacing of the uniform computational grid.
    pub fn dx(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn orography(&self) -> &OrographySpec {
        &self.orography
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + j * self.n
    }

    #[inline]
    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        i + j * (self.n + 1)
    }

    pub fn vertex(&self, i: usize, j: usize) -> Point2 {
        self.vertices[self.vertex_index(i, j)]
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn bottom_heights(&self) -> &[f64] {
        &self.bottom
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn centroids(&self) -> &[Vec3] {
        &self.centroids
    }

    pub fn top_area(&self, c: usize) -> Vec3 {
        self.top_area[c]
    }

    pub fn bottom_area(&self, c: usize) -> Vec3 {
        self.bottom_area[c]
    }

    pub fn x_face(&self, i: usize, j: usize) -> &FaceGeom {
        &self.x_faces[i + j * (self.n + 1)]
    }

    pub fn y_face(&self, i: usize, j: usize) -> &FaceGeom {
        &self.y_faces[i + j * self.n]
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn min_volume(&self) -> f64 {
        self.volumes.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn bottom_point(&self, i: usize, j: usize) -> Vec3 {
        let k = self.vertex_index(i, j);
        Vec3::new(self.vertices[k][0], self.vertices[k][1], self.bottom[k])
    }

    fn top_point(&self, i: usize, j: usize) -> Vec3 {
        let k = self.vertex_index(i, j);
        Vec3::new(self.vertices[k][0], self.vertices[k][1], self.height)
    }

    /// Hexahedron corners of cell `(i, j)` in [`hex_geometry`] order.
    pub fn cell_corners(&self, i: usize, j: usize) -> [Vec3; 8] {
        [
            self.bottom_point(i, j),
            self.bottom_point(i + 1, j),
            self.bottom_point(i + 1, j + 1),
            self.bottom_point(i, j + 1),
            self.top_point(i, j),
            self.top_point(i + 1, j),
            self.top_point(i + 1, j + 1),
            self.top_point(i, j + 1),
        ]
    }

    /// Corners of x-face `(i, j)` ordered so the normal points along +x.
    pub fn x_face_corners(&self, i: usize, j: usize) -> [Vec3; 4] {
        [
            self.bottom_point(i, j),
            self.bottom_point(i, j + 1),
            self.top_point(i, j + 1),
            self.top_point(i, j),
        ]
    }

    /// Corners of y-face `(i, j)` ordered so the normal points along +y.
    pub fn y_face_corners(&self, i: usize, j: usize) -> [Vec3; 4] {
        [
            self.bottom_point(i + 1, j),
            self.bottom_point(i, j),
            self.top_point(i, j),
            self.top_point(i + 1, j),
        ]
    }

    /// Sum of the outward area vectors of cell `(i, j)`; zero for a closed cell.
    pub fn closure_residual(&self, i: usize, j: usize) -> Vec3 {
        let c = self.cell_index(i, j);
        self.x_face(i + 1, j).area - self.x_face(i, j).area + self.y_face(i, j + 1).area - self.y_face(i, j).area
            + self.top_area[c]
            + self.bottom_area[c]
    }
}

fn grid_coord(i: usize, n: usize, half_length: f64, dx: f64) -> f64 {
    // exact endpoints so boundary vertices sit on the boundary
    if i == 0 {
        -half_length
    } else if i == n {
        half_length
    } else {
        -half_length + i as f64 * dx
    }
}

/// Swept volume of every lateral face over one step.
#[derive(Clone, Debug, PartialEq)]
pub struct SweptVolumeSet {
    pub volumes: FaceField,
    pub dt: f64,
}

impl SweptVolumeSet {
    /// Mesh flux, the swept volume per unit time, centred at the half step.
    pub fn mesh_flux(&self) -> FaceField {
        self.volumes.scaled(1.0 / self.dt)
    }
}

/// Swept volumes of the lateral faces between two snapshots of the same mesh.
///
/// Boundary faces slide within the boundary planes and sweep nothing. The
/// motion of the bottom surface is not counted.
pub fn mesh_fluxes(old: &ColumnMesh, new: &ColumnMesh, dt: f64) -> Result<SweptVolumeSet> {
    if old.n != new.n {
        return Err(Error::Shape {
            expected: old.num_cells(),
            found: new.num_cells(),
        });
    }
    let n = old.n;
    let mut volumes = FaceField::zeros(n);
    for j in 0..n {
        for i in 1..n {
            let k = volumes.xi(i, j);
            volumes.x[k] = swept_volume(&old.x_face_corners(i, j), &new.x_face_corners(i, j));
        }
    }
    for j in 1..n {
        for i in 0..n {
            let k = volumes.yi(i, j);
            volumes.y[k] = swept_volume(&old.y_face_corners(i, j), &new.y_face_corners(i, j));
        }
    }
    Ok(SweptVolumeSet { volumes, dt })
}

/// Per-cell mesh Courant numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct CourantField {
    /// `dt / V^n` times the net outward mesh flux.
    pub net: Vec<f64>,
    /// `dt / V^n` times the summed magnitude of inward mesh fluxes; the
    /// volume adjustment stays positive while this is below one.
    pub inward: Vec<f64>,
}

impl CourantField {
    pub fn max_abs(&self) -> f64 {
        self.net.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn max_inward(&self) -> f64 {
        self.inward.iter().fold(0.0, |m: f64, c| m.max(*c))
    }
}

pub fn courant_number(mesh: &ColumnMesh, swept: &SweptVolumeSet) -> CourantField {
    let n = mesh.n;
    let v = &swept.volumes;
    let mut net = Vec::with_capacity(n * n);
    let mut inward = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let outward = [
                -v.x[v.xi(i, j)],
                v.x[v.xi(i + 1, j)],
                -v.y[v.yi(i, j)],
                v.y[v.yi(i, j + 1)],
            ];
            let vol = mesh.volumes[mesh.cell_index(i, j)];
            net.push(outward.iter().sum::<f64>() / vol);
            inward.push(outward.iter().filter(|s| **s < 0.0).map(|s| -s).sum::<f64>() / vol);
        }
    }
    CourantField { net, inward }
}
