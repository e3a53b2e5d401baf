//! Flux-form tracer advection on the moving column mesh.
//!
//! Cell volumes computed from the vertices (`V`) drift as vertices slide over
//! orography. A per-cell volume adjustment `A` is transported with the mesh
//! flux, using the downwind value on each face, so that `A V` tracks the true
//! cell volume. Tracers are advanced with a two-stage off-centred Runge-Kutta
//! scheme in which `A V` replaces `V`; with divergence-free face fluxes a
//! uniform tracer stays uniform and `sum(rho A V)` is conserved exactly.

use crate::error::{Error, Result};
use crate::geometry::{courant_number, mesh_fluxes, ColumnMesh, CourantField, FaceField, Vec3};

/// Advective volume flux through every lateral face from a stream function
/// sampled at the vertices.
///
/// The flux through a face is the lid height times the stream-function
/// difference along it, so the four fluxes of a cell telescope to zero.
pub fn face_fluxes_from_stream(psi: &[f64], mesh: &ColumnMesh) -> FaceField {
    let n = mesh.n();
    let h = mesh.height();
    let v = |i: usize, j: usize| psi[mesh.vertex_index(i, j)];
    let mut f = FaceField::zeros(n);
    for j in 0..n {
        for i in 0..=n {
            let k = f.xi(i, j);
            f.x[k] = h * (v(i, j) - v(i, j + 1));
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let k = f.yi(i, j);
            f.y[k] = h * (v(i + 1, j) - v(i, j));
        }
    }
    f
}

/// Linear interpolation weight of the lower-index cell at a face, by inverse distance.
#[inline]
fn interpolation_weight(face: Vec3, lower: Vec3, upper: Vec3) -> f64 {
    let dl = (face - lower).norm();
    let du = (face - upper).norm();
    du / (dl + du)
}

/// Cell gradients from the divergence theorem, with face values interpolated
/// linearly between neighbouring centres and boundary faces taking the cell value.
pub fn gauss_gradient(rho: &[f64], mesh: &ColumnMesh) -> Vec<Vec3> {
    let n = mesh.n();
    let cen = mesh.centroids();
    let mut grad: Vec<Vec3> = (0..n * n)
        .map(|c| (mesh.top_area(c) + mesh.bottom_area(c)) * rho[c])
        .collect();
    for j in 0..n {
        for i in 0..=n {
            let face = mesh.x_face(i, j);
            if i == 0 {
                let c = mesh.cell_index(0, j);
                grad[c] += -face.area * rho[c];
            } else if i == n {
                let c = mesh.cell_index(n - 1, j);
                grad[c] += face.area * rho[c];
            } else {
                let l = mesh.cell_index(i - 1, j);
                let r = mesh.cell_index(i, j);
                let w = interpolation_weight(face.centre, cen[l], cen[r]);
                let value = w * rho[l] + (1.0 - w) * rho[r];
                grad[l] += face.area * value;
                grad[r] += -face.area * value;
            }
        }
    }
    for j in 0..=n {
        for i in 0..n {
            let face = mesh.y_face(i, j);
            if j == 0 {
                let c = mesh.cell_index(i, 0);
                grad[c] += -face.area * rho[c];
            } else if j == n {
                let c = mesh.cell_index(i, n - 1);
                grad[c] += face.area * rho[c];
            } else {
                let l = mesh.cell_index(i, j - 1);
                let r = mesh.cell_index(i, j);
                let w = interpolation_weight(face.centre, cen[l], cen[r]);
                let value = w * rho[l] + (1.0 - w) * rho[r];
                grad[l] += face.area * value;
                grad[r] += -face.area * value;
            }
        }
    }
    for (g, v) in grad.iter_mut().zip(mesh.volumes()) {
        *g = *g * (1.0 / v);
    }
    grad
}

/// `rho_u + delta . grad_u`, extrapolated from the upwind cell centre to the
/// face centre. Flux zero or positive takes the lower-index cell.
#[inline]
pub fn linear_upwind_face_value(
    rho: &[f64],
    grad: &[Vec3],
    centroids: &[Vec3],
    face_centre: Vec3,
    lower: usize,
    upper: usize,
    flux: f64,
) -> f64 {
    let u = if flux >= 0.0 { lower } else { upper };
    rho[u] + (face_centre - centroids[u]).dot(grad[u])
}

/// Net outward `sum(rho_f F)` per cell for face fluxes `flux`.
fn transport_divergence(rho: &[f64], mesh: &ColumnMesh, flux: &FaceField) -> Vec<f64> {
    let n = mesh.n();
    let grad = gauss_gradient(rho, mesh);
    let cen = mesh.centroids();
    let mut div = vec![0.0; n * n];
    for j in 0..n {
        for i in 1..n {
            let f = flux.x[flux.xi(i, j)];
            if f == 0.0 {
                continue;
            }
            let l = mesh.cell_index(i - 1, j);
            let r = mesh.cell_index(i, j);
            let rf = linear_upwind_face_value(rho, &grad, cen, mesh.x_face(i, j).centre, l, r, f);
            div[l] += rf * f;
            div[r] -= rf * f;
        }
    }
    for j in 1..n {
        for i in 0..n {
            let f = flux.y[flux.yi(i, j)];
            if f == 0.0 {
                continue;
            }
            let l = mesh.cell_index(i, j - 1);
            let r = mesh.cell_index(i, j);
            let rf = linear_upwind_face_value(rho, &grad, cen, mesh.y_face(i, j).centre, l, r, f);
            div[l] += rf * f;
            div[r] -= rf * f;
        }
    }
    div
}

/// Mesh flux weighted by the downwind volume adjustment: a face moving into a
/// cell carries that cell's `A`.
pub fn downwind_weighted(a: &[f64], mesh_flux: &FaceField) -> FaceField {
    let n = mesh_flux.n();
    let mut out = FaceField::zeros(n);
    for j in 0..n {
        for i in 1..n {
            let k = out.xi(i, j);
            let f = mesh_flux.x[k];
            let down = if f > 0.0 { i + j * n } else { i - 1 + j * n };
            out.x[k] = a[down] * f;
        }
    }
    for j in 1..n {
        for i in 0..n {
            let k = out.yi(i, j);
            let f = mesh_flux.y[k];
            let down = if f > 0.0 { i + j * n } else { i + (j - 1) * n };
            out.y[k] = a[down] * f;
        }
    }
    out
}

fn cell_coords(c: usize, n: usize) -> (usize, usize) {
    (c % n, c / n)
}

/// Forward-in-time, downwind-in-space update of the volume adjustment.
///
/// Fails when a cell's inward mesh Courant number reaches one, the bound below
/// which the new value is guaranteed positive.
pub fn advance_a(a: &[f64], old: &ColumnMesh, new: &ColumnMesh, mesh_flux: &FaceField, dt: f64) -> Result<Vec<f64>> {
    let n = old.n();
    let weighted = downwind_weighted(a, mesh_flux);
    let mut out = Vec::with_capacity(n * n);
    for c in 0..n * n {
        let (i, j) = cell_coords(c, n);
        let v_old = old.volumes()[c];
        let outward = [
            -mesh_flux.x[mesh_flux.xi(i, j)],
            mesh_flux.x[mesh_flux.xi(i + 1, j)],
            -mesh_flux.y[mesh_flux.yi(i, j)],
            mesh_flux.y[mesh_flux.yi(i, j + 1)],
        ];
        let inward = outward.iter().filter(|f| **f < 0.0).map(|f| -f).sum::<f64>() * dt / v_old;
        if inward >= 1.0 {
            return Err(Error::Courant { i, j, courant: inward });
        }
        let value = (a[c] * v_old + dt * weighted.net_outflow(i, j)) / new.volumes()[c];
        if !(value > 0.0) {
            return Err(Error::NonPositiveAdjustment { i, j, value });
        }
        out.push(value);
    }
    Ok(out)
}

/// Tracer density and volume adjustment on the current mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjustedState {
    pub rho: Vec<f64>,
    pub a: Vec<f64>,
    /// Further tracers carried with the same fluxes.
    pub companions: Vec<Vec<f64>>,
}

impl AdjustedState {
    pub fn new(rho: Vec<f64>) -> Self {
        let a = vec![1.0; rho.len()];
        Self {
            rho,
            a,
            companions: Vec::new(),
        }
    }
}

/// Everything one RK2 update needs, shared across tracers.
pub struct Rk2Stage<'a> {
    pub old: &'a ColumnMesh,
    pub new: &'a ColumnMesh,
    pub av_old: Vec<f64>,
    pub av_new: Vec<f64>,
    /// `phi^n - A~ phi_m`.
    pub transport_old: FaceField,
    /// `phi^{n+1} - A~ phi_m`.
    pub transport_new: FaceField,
    pub alpha: f64,
    pub dt: f64,
}

fn subtract(a: &FaceField, b: &FaceField) -> FaceField {
    let mut out = a.clone();
    out.x.iter_mut().zip(&b.x).for_each(|(o, v)| *o -= v);
    out.y.iter_mut().zip(&b.y).for_each(|(o, v)| *o -= v);
    out
}

impl<'a> Rk2Stage<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        old: &'a ColumnMesh,
        new: &'a ColumnMesh,
        a_old: &[f64],
        a_new: &[f64],
        flux_old: &FaceField,
        flux_new: &FaceField,
        weighted_mesh_flux: &FaceField,
        alpha: f64,
        dt: f64,
    ) -> Self {
        let av = |a: &[f64], m: &ColumnMesh| a.iter().zip(m.volumes()).map(|(a, v)| a * v).collect();
        Self {
            old,
            new,
            av_old: av(a_old, old),
            av_new: av(a_new, new),
            transport_old: subtract(flux_old, weighted_mesh_flux),
            transport_new: subtract(flux_new, weighted_mesh_flux),
            alpha,
            dt,
        }
    }

    /// Advances one tracer. Old-level face values are reconstructed on the old
    /// mesh, predictor face values on the new mesh.
    pub fn advance(&self, rho: &[f64]) -> Vec<f64> {
        let (alpha, dt) = (self.alpha, self.dt);
        let d_old = transport_divergence(rho, self.old, &self.transport_old);
        let d_new = transport_divergence(rho, self.old, &self.transport_new);
        // the (1 - alpha) part is shared by both stages
        let shared: Vec<f64> = d_old
            .iter()
            .zip(rho.iter().zip(&self.av_old))
            .map(|(o, (r, av))| av * r - dt * (1.0 - alpha) * o)
            .collect();
        let explicit: Vec<f64> = shared.iter().zip(&d_new).map(|(s, d)| s - dt * alpha * d).collect();
        let predictor: Vec<f64> = explicit.iter().zip(&self.av_new).map(|(e, av)| e / av).collect();
        let d_pred = transport_divergence(&predictor, self.new, &self.transport_new);
        shared
            .iter()
            .zip(&d_pred)
            .zip(&self.av_new)
            .map(|((s, d), av)| (s - dt * alpha * d) / av)
            .collect()
    }

    /// Stage-one predictor on its own.
    pub fn predictor(&self, rho: &[f64]) -> Vec<f64> {
        let d_old = transport_divergence(rho, self.old, &self.transport_old);
        let d_new = transport_divergence(rho, self.old, &self.transport_new);
        (0..rho.len())
            .map(|c| {
                (self.av_old[c] * rho[c] - self.dt * ((1.0 - self.alpha) * d_old[c] + self.alpha * d_new[c]))
                    / self.av_new[c]
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSettings {
    pub dt: f64,
    /// Off-centring weight of the new time level.
    pub alpha: f64,
    /// When false `A` is held at one and the raw vertex volumes are used.
    pub volume_adjustment: bool,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: AdjustedState,
    pub mesh_flux: FaceField,
    pub courant: CourantField,
}

/// One time step from `old` to `new`.
///
/// Order: mesh fluxes from the swept volumes, the `A` update, then the RK2
/// tracer update using the advective fluxes at both time levels.
pub fn step(
    state: &AdjustedState,
    old: &ColumnMesh,
    new: &ColumnMesh,
    flux_old: &FaceField,
    flux_new: &FaceField,
    settings: &StepSettings,
) -> Result<StepOutput> {
    let swept = mesh_fluxes(old, new, settings.dt)?;
    let courant = courant_number(old, &swept);
    let mesh_flux = swept.mesh_flux();
    let a_new = if settings.volume_adjustment {
        advance_a(&state.a, old, new, &mesh_flux, settings.dt)?
    } else {
        vec![1.0; state.a.len()]
    };
    let weighted = if settings.volume_adjustment {
        downwind_weighted(&state.a, &mesh_flux)
    } else {
        mesh_flux.clone()
    };
    let stage = Rk2Stage::new(
        old,
        new,
        &state.a,
        &a_new,
        flux_old,
        flux_new,
        &weighted,
        settings.alpha,
        settings.dt,
    );
    let rho = stage.advance(&state.rho);
    let companions = state.companions.iter().map(|c| stage.advance(c)).collect();
    Ok(StepOutput {
        state: AdjustedState {
            rho,
            a: a_new,
            companions,
        },
        mesh_flux,
        courant,
    })
}
