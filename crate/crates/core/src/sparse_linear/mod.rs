//! Symmetric variable-coefficient Poisson problems on the uniform computational grid.
//!
//! The operator is `a u - div(Q grad u)` on an `n x n` cell grid with spacing
//! `h` and zero-gradient boundaries. `Q` is a symmetric 2x2 tensor per cell,
//! averaged onto faces. Cross-derivative terms give a nine-point stencil which
//! is symmetrised by averaging it with its transpose.
//!
//! Residual norms throughout are root-mean-square over cells so they do not
//! scale with resolution.

mod multigrid;

use crate::error::{Error, Result};

use multigrid::{Multigrid, Stencil};

/// Symmetric 2x2 tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub const IDENTITY: Tensor2 = Tensor2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn scalar(k: f64) -> Self {
        Self { xx: k, xy: 0.0, yy: k }
    }

    fn mean(self, o: Tensor2) -> Tensor2 {
        Tensor2 {
            xx: 0.5 * (self.xx + o.xx),
            xy: 0.5 * (self.xy + o.xy),
            yy: 0.5 * (self.yy + o.yy),
        }
    }

    pub fn is_positive_definite(self) -> bool {
        self.xx > 0.0 && self.yy > 0.0 && self.xx * self.yy - self.xy * self.xy > 0.0
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(self) -> f64 {
        let half_trace = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        half_trace - half_diff.hypot(self.xy)
    }
}

/// Stencil slot of the neighbour at offset `(di, dj)`, each in `-1..=1`.
#[inline]
pub const fn slot(di: isize, dj: isize) -> usize {
    ((di + 1) + 3 * (dj + 1)) as usize
}

const CENTRE: usize = slot(0, 0);

const OFFSETS: [(isize, isize); 9] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (0, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Clone, Debug)]
pub struct PoissonProblem {
    n: usize,
    h: f64,
    /// Symmetrised stencil of `div(Q grad .)`, nine entries per cell.
    divergence: Vec<[f64; 9]>,
    /// Rows of `identity * I - div(Q grad .)`.
    operator: Stencil,
    identity: f64,
    rhs: Vec<f64>,
}

struct Builder {
    n: usize,
    rows: Vec<[f64; 9]>,
}

impl Builder {
    #[inline]
    fn clamp(&self, i: isize) -> usize {
        i.clamp(0, self.n as isize - 1) as usize
    }

    /// Adds `coef * u(qi, qj)` to row `(pi, pj)`, mirroring out-of-range neighbours.
    #[inline]
    fn add(&mut self, pi: usize, pj: usize, qi: isize, qj: isize, coef: f64) {
        let qi = self.clamp(qi);
        let qj = self.clamp(qj);
        let s = slot(qi as isize - pi as isize, qj as isize - pj as isize);
        self.rows[pi + pj * self.n][s] += coef;
    }
}

/// Assembles `identity * u - div(Q grad u) = rhs`.
///
/// `tensors` holds one cell tensor per cell; each face uses the mean of its two
/// cells and must be positive definite.
pub fn assemble(tensors: &[Tensor2], h: f64, identity: f64, rhs: Vec<f64>) -> Result<PoissonProblem> {
    let cells = rhs.len();
    let n = (cells as f64).sqrt().round() as usize;
    if n * n != cells || tensors.len() != cells {
        return Err(Error::Shape {
            expected: n * n,
            found: tensors.len(),
        });
    }
    let mut b = Builder {
        n,
        rows: vec![[0.0; 9]; cells],
    };
    let inv_h2 = 1.0 / (h * h);
    // x-faces between (i, j) and (i+1, j)
    for j in 0..n {
        for i in 0..n.saturating_sub(1) {
            let q = tensors[i + j * n].mean(tensors[i + 1 + j * n]);
            if !q.is_positive_definite() {
                return Err(Error::IndefiniteTensor { face: i + j * n });
            }
            let (ii, jj) = (i as isize, j as isize);
            // flux * h = Qxx (uR - uL) + Qxy (gyL + gyR) h / 2
            let c = 0.25 * q.xy;
            let terms = [
                (ii + 1, jj, q.xx),
                (ii, jj, -q.xx),
                (ii, jj + 1, c),
                (ii, jj - 1, -c),
                (ii + 1, jj + 1, c),
                (ii + 1, jj - 1, -c),
            ];
            for (qi, qj, coef) in terms {
                b.add(i, j, qi, qj, coef * inv_h2);
                b.add(i + 1, j, qi, qj, -coef * inv_h2);
            }
        }
    }
    // y-faces between (i, j) and (i, j+1)
    for j in 0..n.saturating_sub(1) {
        for i in 0..n {
            let q = tensors[i + j * n].mean(tensors[i + (j + 1) * n]);
            if !q.is_positive_definite() {
                return Err(Error::IndefiniteTensor {
                    face: n * n + i + j * n,
                });
            }
            let (ii, jj) = (i as isize, j as isize);
            let c = 0.25 * q.xy;
            let terms = [
                (ii, jj + 1, q.yy),
                (ii, jj, -q.yy),
                (ii + 1, jj, c),
                (ii - 1, jj, -c),
                (ii + 1, jj + 1, c),
                (ii - 1, jj + 1, -c),
            ];
            for (qi, qj, coef) in terms {
                b.add(i, j, qi, qj, coef * inv_h2);
                b.add(i, j + 1, qi, qj, -coef * inv_h2);
            }
        }
    }
    let raw = b.rows;
    let mut divergence = vec![[0.0; 9]; cells];
    for j in 0..n {
        for i in 0..n {
            let p = i + j * n;
            for (s, &(di, dj)) in OFFSETS.iter().enumerate() {
                let qi = i as isize + di;
                let qj = j as isize + dj;
                if qi < 0 || qj < 0 || qi >= n as isize || qj >= n as isize {
                    continue;
                }
                let q = qi as usize + qj as usize * n;
                divergence[p][s] = 0.5 * (raw[p][s] + raw[q][slot(-di, -dj)]);
            }
        }
    }
    let operator = Stencil {
        n,
        rows: divergence
            .iter()
            .map(|row| {
                let mut k = row.map(|v| -v);
                k[CENTRE] += identity;
                k
            })
            .collect(),
    };
    Ok(PoissonProblem {
        n,
        h,
        divergence,
        operator,
        identity,
        rhs,
    })
}

impl PoissonProblem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// True when the operator has the constant vector as its null space.
    pub fn is_pure_neumann(&self) -> bool {
        self.identity == 0.0
    }

    /// Symmetrised `div(Q grad .)` stencil of cell `(i, j)`, indexed by [`slot`].
    pub fn divergence_stencil(&self, i: usize, j: usize) -> [f64; 9] {
        self.divergence[i + j * self.n]
    }

    /// `out = divergence(u)`, the assembled `div(Q grad u)`.
    pub fn apply_divergence(&self, u: &[f64], out: &mut [f64]) {
        self.apply(u, out);
        for (o, v) in out.iter_mut().zip(u) {
            *o = self.identity * v - *o;
        }
    }

    /// `out = K u` with `K = identity * I - div(Q grad .)`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.operator.apply(u, out);
    }
}

/// Preconditioner applied inside the conjugate-gradient iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    /// One symmetric Gauss-Seidel sweep.
    SymmetricGaussSeidel,
    /// One aggregation multigrid W-cycle with symmetric Gauss-Seidel smoothing.
    Multigrid,
}

enum Applied {
    Sgs,
    Mg(Multigrid),
}

impl Applied {
    fn new(kind: Preconditioner, problem: &PoissonProblem) -> Self {
        match kind {
            Preconditioner::SymmetricGaussSeidel => Applied::Sgs,
            Preconditioner::Multigrid => Applied::Mg(Multigrid::new(problem.operator.clone(), 2)),
        }
    }

    fn apply(&self, problem: &PoissonProblem, r: &[f64], z: &mut [f64]) {
        match self {
            Applied::Sgs => {
                z.fill(0.0);
                problem.operator.forward_sweep(r, z);
                problem.operator.backward_sweep(r, z);
            }
            Applied::Mg(mg) => mg.precondition(r, z),
        }
    }
}

/// Stopping rule for [`solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverControls {
    /// Stop once the residual falls below this fraction of the initial residual.
    pub rel_tol: f64,
    /// Stop once the residual falls below this absolute value.
    pub abs_tol: f64,
    pub max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl SolverControls {
    pub fn new(rel_tol: f64, abs_tol: f64, max_iter: usize) -> Self {
        Self {
            rel_tol,
            abs_tol,
            max_iter,
            preconditioner: Preconditioner::Multigrid,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// RMS residual before the first iteration and after each iteration.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveReport {
    pub fn initial_residual(&self) -> f64 {
        self.history[0]
    }

    pub fn final_residual(&self) -> f64 {
        *self.history.last().unwrap()
    }

    /// Turns a non-converged solve into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::SolverNonConvergence {
                residual: self.final_residual(),
                iterations: self.iterations,
            })
        }
    }
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Preconditioned conjugate gradients from a zero initial guess.
pub fn solve(problem: &PoissonProblem, controls: SolverControls) -> SolveReport {
    solve_from(problem, vec![0.0; problem.rhs.len()], controls)
}

/// Preconditioned conjugate gradients with symmetric Gauss-Seidel preconditioning.
///
/// Non-convergence is reported, not raised; callers that need a converged
/// answer use [`SolveReport::require_converged`]. Pure-Neumann solutions are
/// returned with zero mean.
pub fn solve_from(problem: &PoissonProblem, guess: Vec<f64>, controls: SolverControls) -> SolveReport {
    let neumann = problem.is_pure_neumann();
    let len = problem.rhs.len();
    let mut x = guess;
    let mut r = vec![0.0; len];
    problem.apply(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(&problem.rhs) {
        *ri = bi - *ri;
    }
    if neumann {
        remove_mean(&mut r);
    }
    let r0 = rms(&r);
    let mut history = vec![r0];
    let target = (controls.rel_tol * r0).max(controls.abs_tol);
    let mut converged = r0 <= target || r0 == 0.0;
    let mut iterations = 0;
    if !converged {
        let pre = Applied::new(controls.preconditioner, problem);
        let mut z = vec![0.0; len];
        let mut q = vec![0.0; len];
        pre.apply(problem, &r, &mut z);
        if neumann {
            remove_mean(&mut z);
        }
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while iterations < controls.max_iter {
            problem.apply(&p, &mut q);
            let pq = dot(&p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rz / pq;
            for k in 0..len {
                x[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            iterations += 1;
            let res = rms(&r);
            history.push(res);
            if res <= target {
                converged = true;
                break;
            }
            pre.apply(problem, &r, &mut z);
            if neumann {
                remove_mean(&mut z);
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..len {
                p[k] = z[k] + beta * p[k];
            }
        }
    }
    if neumann {
        remove_mean(&mut x);
    }
    SolveReport {
        solution: x,
        history,
        iterations,
        converged,
    }
}
