//! Optimally transported meshes from a Newton solver for the Monge-Ampere equation.
//!
//! Physical vertex positions are `x = xi + grad(Phi)` where `xi` is the uniform
//! computational grid and `Phi` a cell-centred mesh potential. Equidistribution
//! of the monitor `m` requires `det(I + H(Phi)) = c / m`.
//!
//! Each outer iteration linearises the determinant about the current potential
//! and solves `div(Q grad eta) = c / m - det(I + H(Phi))` with `Q` the cofactor
//! matrix of `I + H(Phi)`, shifted when needed to stay positive definite. The
//! monitor is held fixed within an outer iteration and refreshed between them.

pub mod monitor;

use crate::error::{Error, Result};
use crate::geometry::{ColumnMesh, Point2};
use crate::sparse_linear::{assemble, solve, SolverControls, Tensor2};

pub use monitor::{monitor_normalise, monitor_raw, monitor_smooth, sample_cell_field, MonitorField, MONITOR_FLOOR};

/// Uniform computational grid of `n x n` square cells on `[-L, L]^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub n: usize,
    pub half_length: f64,
    pub h: f64,
}

impl Grid {
    pub fn new(n: usize, half_length: f64) -> Self {
        Self {
            n,
            half_length,
            h: 2.0 * half_length / n as f64,
        }
    }

    pub fn of_mesh(mesh: &ColumnMesh) -> Self {
        Self::new(mesh.n(), mesh.half_length())
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn centre(&self, i: usize, j: usize) -> (f64, f64) {
        (
            -self.half_length + (i as f64 + 0.5) * self.h,
            -self.half_length + (j as f64 + 0.5) * self.h,
        )
    }
}

/// Second derivatives of a cell field.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Hessian2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Hessian2 {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }
}

/// Centred second differences; out-of-range neighbours mirror the boundary cell.
pub fn hessian(f: &[f64], grid: Grid) -> Vec<Hessian2> {
    let n = grid.n as isize;
    let inv_h2 = 1.0 / (grid.h * grid.h);
    let at = |i: isize, j: isize| f[(i.clamp(0, n - 1) + j.clamp(0, n - 1) * n) as usize];
    let mut out = Vec::with_capacity(f.len());
    for j in 0..n {
        for i in 0..n {
            let c = at(i, j);
            out.push(Hessian2 {
                xx: (at(i + 1, j) - 2.0 * c + at(i - 1, j)) * inv_h2,
                yy: (at(i, j + 1) - 2.0 * c + at(i, j - 1)) * inv_h2,
                xy: 0.25 * (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) * inv_h2,
            });
        }
    }
    out
}

/// Mesh potential on the computational grid, gauge-fixed to zero mean.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshPotential {
    pub values: Vec<f64>,
    pub grid: Grid,
    /// Outer iterations applied so far.
    pub iteration: usize,
}

impl MeshPotential {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            values: vec![0.0; grid.cells()],
            grid,
            iteration: 0,
        }
    }

    fn recentre(&mut self) {
        let mean = self.values.iter().sum::<f64>() / self.values.len() as f64;
        self.values.iter_mut().for_each(|v| *v -= mean);
    }
}

/// Per-cell `det(I + H(Phi))`.
pub fn hessian_determinant(phi: &[f64], grid: Grid) -> Vec<f64> {
    hessian(phi, grid)
        .iter()
        .map(|h| (1.0 + h.xx) * (1.0 + h.yy) - h.xy * h.xy)
        .collect()
}

/// `sum det / sum (1 / m)`, which makes `c / m - det` zero-mean.
pub fn equidistribution_constant(det: &[f64], m3: &[f64]) -> f64 {
    det.iter().sum::<f64>() / m3.iter().map(|m| 1.0 / m).sum::<f64>()
}

/// Cofactor matrices of `I + H(Phi)` and the shift keeping them positive definite.
#[derive(Clone, Debug)]
pub struct CofactorField {
    pub p: Vec<Tensor2>,
    /// Smallest eigenvalue of `P` over all cells.
    pub min_eigenvalue: f64,
    /// Global shift: zero if `P` is already positive definite, else `delta - min_eigenvalue`.
    pub gamma: f64,
}

impl CofactorField {
    /// `Q = P + gamma I`.
    pub fn regularised(&self) -> Vec<Tensor2> {
        self.p
            .iter()
            .map(|t| Tensor2 {
                xx: t.xx + self.gamma,
                xy: t.xy,
                yy: t.yy + self.gamma,
            })
            .collect()
    }
}

/// Shift applied when the cofactor matrix loses definiteness.
pub const DEFAULT_REGULARISATION: f64 = 1e-5;

pub fn cofactor(phi: &[f64], grid: Grid, delta: f64) -> CofactorField {
    let p: Vec<Tensor2> = hessian(phi, grid)
        .iter()
        .map(|h| Tensor2 {
            xx: 1.0 + h.yy,
            xy: -h.xy,
            yy: 1.0 + h.xx,
        })
        .collect();
    let min_eigenvalue = p.iter().map(|t| t.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    CofactorField {
        gamma: regularisation_shift(min_eigenvalue, delta),
        p,
        min_eigenvalue,
    }
}

pub fn regularisation_shift(min_eigenvalue: f64, delta: f64) -> f64 {
    if min_eigenvalue > 0.0 {
        0.0
    } else {
        delta - min_eigenvalue
    }
}

/// `P(Phi) : H(eta)`, the exact first-order change of the discrete determinant.
///
/// Because the discrete Hessian is linear, in two dimensions
/// `det(I + H(Phi + eta)) = det(I + H(Phi)) + P : H(eta) + det(H(eta))` holds
/// cell by cell.
pub fn linearised_determinant(phi: &[f64], eta: &[f64], grid: Grid) -> Vec<f64> {
    hessian(phi, grid)
        .iter()
        .zip(hessian(eta, grid))
        .map(|(hp, he)| (1.0 + hp.yy) * he.xx + (1.0 + hp.xx) * he.yy - 2.0 * hp.xy * he.xy)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    pub max_outer: usize,
    /// Inner linear solve controls, relative to each outer iteration's initial residual.
    pub inner: SolverControls,
    pub delta: f64,
    /// Stop once the initial residual of an outer iteration falls below this value.
    pub early_exit: f64,
    /// Abort when the residual grows by more than this factor between outer iterations.
    pub divergence_factor: f64,
}

impl NewtonSettings {
    pub fn with_max_outer(max_outer: usize) -> Self {
        Self {
            max_outer,
            inner: SolverControls::new(0.01, 1e-4, 10),
            delta: DEFAULT_REGULARISATION,
            early_exit: 1e-10,
            divergence_factor: 10.0,
        }
    }
}

/// One outer iteration of the mesh solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub outer_iter: usize,
    /// RMS of `c / m - det(I + H(Phi))` before the linear solve.
    pub initial_residual: f64,
    pub inner_iters: usize,
    pub c: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NewtonTrace {
    pub entries: Vec<TraceEntry>,
}

impl NewtonTrace {
    pub fn residuals(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.initial_residual).collect()
    }
}

/// Result of [`newton_step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub entry: TraceEntry,
    /// True when the residual was already below the early-exit threshold and
    /// the potential was left unchanged.
    pub converged: bool,
}

/// Applies one Newton update to `phi` for the cell-indexed monitor `m3`.
pub fn newton_step(phi: &mut MeshPotential, m3: &[f64], settings: &NewtonSettings) -> Result<StepOutcome> {
    let grid = phi.grid;
    let det = hessian_determinant(&phi.values, grid);
    let c = equidistribution_constant(&det, m3);
    let mut rhs: Vec<f64> = m3.iter().zip(&det).map(|(m, d)| c / m - d).collect();
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    rhs.iter_mut().for_each(|r| *r -= mean);
    let residual = (rhs.iter().map(|r| r * r).sum::<f64>() / rhs.len() as f64).sqrt();
    let outer_iter = phi.iteration + 1;
    if residual < settings.early_exit {
        return Ok(StepOutcome {
            entry: TraceEntry {
                outer_iter,
                initial_residual: residual,
                inner_iters: 0,
                c,
                gamma: 0.0,
            },
            converged: true,
        });
    }
    let cof = cofactor(&phi.values, grid, settings.delta);
    // solver form: -div(Q grad eta) = -rhs
    rhs.iter_mut().for_each(|r| *r = -*r);
    let problem = assemble(&cof.regularised(), grid.h, 0.0, rhs)?;
    let report = solve(&problem, settings.inner);
    for (p, e) in phi.values.iter_mut().zip(&report.solution) {
        *p += e;
    }
    phi.recentre();
    phi.iteration = outer_iter;
    Ok(StepOutcome {
        entry: TraceEntry {
            outer_iter,
            initial_residual: report.initial_residual(),
            inner_iters: report.iterations,
            c,
            gamma: cof.gamma,
        },
        converged: false,
    })
}

/// Runs up to `settings.max_outer` Newton iterations.
///
/// `monitor` supplies the cell-indexed monitor for the current potential and
/// is called once per outer iteration.
pub fn solve_monge_ampere<F>(
    init: MeshPotential,
    mut monitor: F,
    settings: &NewtonSettings,
) -> Result<(MeshPotential, NewtonTrace)>
where
    F: FnMut(&MeshPotential) -> Result<Vec<f64>>,
{
    let mut phi = init;
    phi.iteration = 0;
    let mut trace = NewtonTrace::default();
    for _ in 0..settings.max_outer {
        let m3 = monitor(&phi)?;
        let outcome = newton_step(&mut phi, &m3, settings)?;
        if let Some(prev) = trace.entries.last() {
            let grew = outcome.entry.initial_residual > settings.divergence_factor * prev.initial_residual;
            if grew && !outcome.converged {
                return Err(Error::Divergence {
                    previous: prev.initial_residual,
                    current: outcome.entry.initial_residual,
                });
            }
        }
        trace.entries.push(outcome.entry);
        if outcome.converged {
            break;
        }
    }
    Ok((phi, trace))
}

/// Vertex positions `xi + grad(Phi)` of the physical mesh.
///
/// The potential is averaged from cell centres to vertices and differentiated
/// with centred differences, one-sided on the boundary. Boundary vertices keep
/// only their tangential displacement; corners stay put.
pub fn mesh_from_potential(phi: &MeshPotential) -> Vec<Point2> {
    let grid = phi.grid;
    let n = grid.n;
    let l = grid.half_length;
    let h = grid.h;
    let nv = n + 1;
    let mut vphi = vec![0.0; nv * nv];
    for j in 0..=n {
        for i in 0..=n {
            let mut sum = 0.0;
            let mut count = 0.0;
            for cj in [j.wrapping_sub(1), j] {
                for ci in [i.wrapping_sub(1), i] {
                    if ci < n && cj < n {
                        sum += phi.values[ci + cj * n];
                        count += 1.0;
                    }
                }
            }
            vphi[i + j * nv] = sum / count;
        }
    }
    let derivative = |k: usize, lo: f64, mid: f64, hi: f64| -> f64 {
        if k == 0 {
            (hi - mid) / h
        } else if k == n {
            (mid - lo) / h
        } else {
            (hi - lo) / (2.0 * h)
        }
    };
    let mut out = Vec::with_capacity(nv * nv);
    for j in 0..=n {
        for i in 0..=n {
            let at = |a: usize, b: usize| vphi[a.min(n) + b.min(n) * nv];
            let mid = at(i, j);
            let gx = derivative(i, at(i.saturating_sub(1), j), mid, at(i + 1, j));
            let gy = derivative(j, at(i, j.saturating_sub(1)), mid, at(i, j + 1));
            let xi = -l + i as f64 * h;
            let eta = -l + j as f64 * h;
            let x = match i {
                0 => -l,
                _ if i == n => l,
                _ => (xi + gx).clamp(-l, l),
            };
            let y = match j {
                0 => -l,
                _ if j == n => l,
                _ => (eta + gy).clamp(-l, l),
            };
            out.push([x, y]);
        }
    }
    out
}

/// Centres of the physical cells, as the average of their four vertices.
pub fn cell_centres(vertices: &[Point2], n: usize) -> Vec<Point2> {
    let nv = n + 1;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let mut c = [0.0, 0.0];
            for k in [i + j * nv, i + 1 + j * nv, i + 1 + (j + 1) * nv, i + (j + 1) * nv] {
                c[0] += 0.25 * vertices[k][0];
                c[1] += 0.25 * vertices[k][1];
            }
            out.push(c);
        }
    }
    out
}

/// Planar areas of the physical cells.
pub fn cell_areas(vertices: &[Point2], n: usize) -> Vec<f64> {
    let nv = n + 1;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let q = [
                vertices[i + j * nv],
                vertices[i + 1 + j * nv],
                vertices[i + 1 + (j + 1) * nv],
                vertices[i + (j + 1) * nv],
            ];
            let mut a = 0.0;
            for k in 0..4 {
                let p = q[k];
                let r = q[(k + 1) % 4];
                a += p[0] * r[1] - r[0] * p[1];
            }
            out.push(0.5 * a);
        }
    }
    out
}
