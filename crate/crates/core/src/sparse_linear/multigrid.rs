//! Aggregation multigrid W-cycle, used as a conjugate-gradient preconditioner.
//!
//! Cells are merged in 2x2 blocks and each coarse operator is the Galerkin
//! product with piecewise-constant prolongation, so every level keeps a
//! nine-point stencil. Smoothing is forward Gauss-Seidel before the coarse
//! correction and backward after it, which keeps the cycle symmetric.

use std::ops::Range;

use super::{slot, CENTRE, OFFSETS};

/// Nine-point operator rows on an `n x n` cell grid, indexed by [`slot`].
#[derive(Clone, Debug)]
pub(crate) struct Stencil {
    pub n: usize,
    pub rows: Vec<[f64; 9]>,
}

impl Stencil {
    /// Sum of `row[s] * u[neighbour(s)]` over the slots in `slots`.
    #[inline]
    pub fn row_dot(&self, i: usize, j: usize, u: &[f64], slots: Range<usize>) -> f64 {
        let n = self.n;
        let p = i + j * n;
        let row = &self.rows[p];
        if i > 0 && j > 0 && i + 1 < n && j + 1 < n {
            let ni = n as isize;
            let shift = [-ni - 1, -ni, -ni + 1, -1, 0, 1, ni - 1, ni, ni + 1];
            return slots.map(|s| row[s] * u[(p as isize + shift[s]) as usize]).sum();
        }
        let mut acc = 0.0;
        for s in slots {
            if row[s] != 0.0 {
                let (di, dj) = OFFSETS[s];
                acc += row[s] * u[(i as isize + di) as usize + (j as isize + dj) as usize * n];
            }
        }
        acc
    }

    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for j in 0..self.n {
            for i in 0..self.n {
                out[i + j * self.n] = self.row_dot(i, j, u, 0..9);
            }
        }
    }

    #[inline]
    fn relax(&self, i: usize, j: usize, b: &[f64], x: &mut [f64]) {
        let p = i + j * self.n;
        let off = self.row_dot(i, j, x, 0..CENTRE) + self.row_dot(i, j, x, CENTRE + 1..9);
        x[p] = (b[p] - off) / self.rows[p][CENTRE];
    }

    pub fn forward_sweep(&self, b: &[f64], x: &mut [f64]) {
        for j in 0..self.n {
            for i in 0..self.n {
                self.relax(i, j, b, x);
            }
        }
    }

    pub fn backward_sweep(&self, b: &[f64], x: &mut [f64]) {
        for j in (0..self.n).rev() {
            for i in (0..self.n).rev() {
                self.relax(i, j, b, x);
            }
        }
    }

    fn coarsen(&self) -> Stencil {
        let n = self.n;
        let nc = n.div_ceil(2);
        let mut rows = vec![[0.0; 9]; nc * nc];
        for j in 0..n {
            for i in 0..n {
                let row = &self.rows[i + j * n];
                let coarse = &mut rows[i / 2 + (j / 2) * nc];
                for (s, &(di, dj)) in OFFSETS.iter().enumerate() {
                    if row[s] == 0.0 {
                        continue;
                    }
                    let qi = (i as isize + di) as usize;
                    let qj = (j as isize + dj) as usize;
                    let ci = (qi / 2) as isize - (i / 2) as isize;
                    let cj = (qj / 2) as isize - (j / 2) as isize;
                    coarse[slot(ci, cj)] += row[s];
                }
            }
        }
        Stencil { n: nc, rows }
    }

    fn restrict(&self, fine: &[f64], nc: usize) -> Vec<f64> {
        let mut out = vec![0.0; nc * nc];
        for j in 0..self.n {
            for i in 0..self.n {
                out[i / 2 + (j / 2) * nc] += fine[i + j * self.n];
            }
        }
        out
    }

    fn prolong_add(&self, coarse: &[f64], nc: usize, fine: &mut [f64]) {
        for j in 0..self.n {
            for i in 0..self.n {
                fine[i + j * self.n] += coarse[i / 2 + (j / 2) * nc];
            }
        }
    }
}

const COARSEST: usize = 4;
const COARSE_SWEEPS: usize = 40;
/// Coarse-grid visits per level: 1 gives a V-cycle, 2 a W-cycle.
const CYCLE_INDEX: usize = 2;

#[derive(Clone, Debug)]
pub(crate) struct Multigrid {
    levels: Vec<Stencil>,
    sweeps: usize,
}

impl Multigrid {
    pub fn new(fine: Stencil, sweeps: usize) -> Self {
        let mut levels = vec![fine];
        while levels.last().unwrap().n > COARSEST {
            let coarse = levels.last().unwrap().coarsen();
            levels.push(coarse);
        }
        Self { levels, sweeps }
    }

    /// One cycle for `A z = r` starting from `z = 0`.
    pub fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.fill(0.0);
        self.cycle(0, r, z);
    }

    fn cycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        let a = &self.levels[level];
        if level + 1 == self.levels.len() {
            for _ in 0..COARSE_SWEEPS {
                a.forward_sweep(b, x);
                a.backward_sweep(b, x);
            }
            return;
        }
        for _ in 0..self.sweeps {
            a.forward_sweep(b, x);
        }
        let mut r = vec![0.0; b.len()];
        a.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let nc = self.levels[level + 1].n;
        let rc = a.restrict(&r, nc);
        let mut xc = vec![0.0; nc * nc];
        for _ in 0..CYCLE_INDEX {
            self.cycle(level + 1, &rc, &mut xc);
        }
        a.prolong_add(&xc, nc, x);
        for _ in 0..self.sweeps {
            a.backward_sweep(b, x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> Stencil {
        let mut rows = vec![[0.0; 9]; n * n];
        for j in 0..n {
            for i in 0..n {
                let row = &mut rows[i + j * n];
                for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    let qi = i as isize + di;
                    let qj = j as isize + dj;
                    if qi >= 0 && qj >= 0 && qi < n as isize && qj < n as isize {
                        row[slot(di, dj)] -= 1.0;
                        row[CENTRE] += 1.0;
                    }
                }
                row[CENTRE] += 0.01;
            }
        }
        Stencil { n, rows }
    }

    #[test]
    fn galerkin_coarsening_keeps_row_sums() {
        let fine = laplacian(7);
        let coarse = fine.coarsen();
        assert_eq!(coarse.n, 4);
        let total_fine: f64 = fine.rows.iter().flatten().sum();
        let total_coarse: f64 = coarse.rows.iter().flatten().sum();
        assert!((total_fine - total_coarse).abs() < 1e-12);
    }

    #[test]
    fn precondition_is_a_symmetric_operator() {
        let mg = Multigrid::new(laplacian(12), 2);
        let len = 144;
        let e = |k: usize| {
            let mut v = vec![0.0; len];
            v[k] = 1.0;
            v
        };
        let mut za = vec![0.0; len];
        let mut zb = vec![0.0; len];
        for (a, b) in [(0, 143), (17, 60), (5, 6)] {
            mg.precondition(&e(a), &mut za);
            mg.precondition(&e(b), &mut zb);
            assert!((za[b] - zb[a]).abs() < 1e-12 * za[b].abs().max(1.0));
        }
    }
}
