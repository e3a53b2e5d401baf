//! Monitor function built from the curvature of the tracer density.
//!
//! `m1` is the Frobenius norm of the Hessian, `m2` caps it relative to its mean
//! so the finest cells are at most `r_max` times smaller than the coarsest, and
//! `m3` is `m2` after implicit diffusion on the computational grid.

use crate::error::Result;
use crate::sparse_linear::{assemble, solve_from, SolverControls, Tensor2};

use super::{hessian, Grid};

/// Lower bound applied to the smoothed monitor.
pub const MONITOR_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MonitorField {
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m3: Vec<f64>,
    pub r_max: f64,
    pub smoothing: f64,
}

impl MonitorField {
    pub fn from_density(rho: &[f64], grid: Grid, r_max: f64, smoothing: f64) -> Result<Self> {
        let m1 = monitor_raw(rho, grid);
        let m2 = monitor_normalise(&m1, r_max);
        let m3 = monitor_smooth(&m2, grid, smoothing)?;
        Ok(Self {
            m1,
            m2,
            m3,
            r_max,
            smoothing,
        })
    }
}

/// Frobenius norm of the second-difference Hessian.
pub fn monitor_raw(rho: &[f64], grid: Grid) -> Vec<f64> {
    hessian(rho, grid)
        .iter()
        .map(|h| (h.xx * h.xx + 2.0 * h.xy * h.xy + h.yy * h.yy).sqrt())
        .collect()
}

/// `min(1 + m1 / mean(m1), r_max)`, or one everywhere when `m1` vanishes.
pub fn monitor_normalise(m1: &[f64], r_max: f64) -> Vec<f64> {
    let mean = m1.iter().sum::<f64>() / m1.len() as f64;
    if !(mean > 0.0) {
        return vec![1.0; m1.len()];
    }
    m1.iter().map(|m| (1.0 + m / mean).min(r_max)).collect()
}

/// Solves `(I - (M dx^2 / 4) lap) m3 = m2` with zero-gradient boundaries.
///
/// The Laplacian is the five-point one on the computational grid, so the
/// spacing cancels and only `M / 4` remains.
pub fn monitor_smooth(m2: &[f64], grid: Grid, smoothing: f64) -> Result<Vec<f64>> {
    if smoothing == 0.0 {
        return Ok(m2.iter().map(|m| m.max(MONITOR_FLOOR)).collect());
    }
    let k = 0.25 * smoothing;
    let tensors = vec![Tensor2::scalar(k); grid.cells()];
    let problem = assemble(&tensors, 1.0, 1.0, m2.to_vec())?;
    let scale = m2.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
    let report = solve_from(
        &problem,
        m2.to_vec(),
        SolverControls::new(1e-14, 1e-14 * scale, 10 * grid.n + 100),
    )
    .require_converged()?;
    Ok(report.solution.into_iter().map(|m| m.max(MONITOR_FLOOR)).collect())
}

/// Bilinear interpolation of a cell-centred field on the uniform grid at `p`,
/// constant beyond the outermost cell centres.
pub fn sample_cell_field(field: &[f64], grid: Grid, p: [f64; 2]) -> f64 {
    let n = grid.n;
    let locate = |x: f64| {
        let s = ((x + grid.half_length) / grid.h - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = (s.floor() as usize).min(n - 2);
        (i0, s - i0 as f64)
    };
    let (i0, tx) = locate(p[0]);
    let (j0, ty) = locate(p[1]);
    let f = |i: usize, j: usize| field[i + j * n];
    (1.0 - tx) * (1.0 - ty) * f(i0, j0)
        + tx * (1.0 - ty) * f(i0 + 1, j0)
        + (1.0 - tx) * ty * f(i0, j0 + 1)
        + tx * ty * f(i0 + 1, j0 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> Grid {
        Grid::new(n, 1.0)
    }

    #[test]
    fn constant_density_has_zero_raw_monitor() {
        let g = grid(8);
        assert!(monitor_raw(&vec![3.0; 64], g).iter().all(|m| *m == 0.0));
    }

    #[test]
    fn quadratic_density_has_constant_raw_monitor() {
        let g = grid(10);
        let rho: Vec<f64> = (0..100)
            .map(|k| {
                let (x, _) = g.centre(k % 10, k / 10);
                x * x
            })
            .collect();
        let m1 = monitor_raw(&rho, g);
        for j in 1..9 {
            for i in 1..9 {
                assert_relative_eq!(m1[i + j * 10], 2.0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn normalisation_cases() {
        assert_eq!(monitor_normalise(&[0.0; 5], 4.0), vec![1.0; 5]);
        assert_eq!(monitor_normalise(&[2.5; 4], 4.0), vec![2.0; 4]);
        // mean 1.0 with one cell at ten times the mean
        let mut m1 = vec![0.0; 10];
        m1[0] = 10.0;
        let m2 = monitor_normalise(&m1, 4.0);
        assert_eq!(m2[0], 4.0);
        assert_eq!(m2[1], 1.0);
    }

    #[test]
    fn smoothing_keeps_constants_and_zero_diffusion() {
        let g = grid(6);
        let m = vec![2.5; 36];
        let s = monitor_smooth(&m, g, 20.0).unwrap();
        for v in s {
            assert_relative_eq!(v, 2.5, max_relative = 1e-12);
        }
        let raw: Vec<f64> = (0..36).map(|k| 1.0 + (k % 5) as f64).collect();
        assert_eq!(monitor_smooth(&raw, g, 0.0).unwrap(), raw);
    }

    #[test]
    fn sampling_reproduces_bilinear_fields() {
        let g = Grid::new(8, 2.0);
        let field: Vec<f64> = (0..64)
            .map(|k| {
                let (x, y) = g.centre(k % 8, k / 8);
                1.0 + 2.0 * x - 0.5 * y + 0.25 * x * y
            })
            .collect();
        for p in [[0.1, 0.3], [-1.2, 0.7], [1.4, -1.1]] {
            let exact = 1.0 + 2.0 * p[0] - 0.5 * p[1] + 0.25 * p[0] * p[1];
            assert_relative_eq!(sample_cell_field(&field, g, p), exact, max_relative = 1e-12);
        }
    }
}
