//! Jacobi-preconditioned conjugate gradients for the implicit Euler systems
//! `(I + dt diag(a) - dt L) x = b`.
//!
//! The operator is applied matrix-free through the grid's neighbor lists.
//! With `a >= 0` and `dt >= 0` it is a symmetric, strictly diagonally
//! dominant M-matrix (all cells share one volume, so the plain Euclidean
//! inner product is the volume-weighted one up to a constant).

use thiserror::Error;

use crate::fields::ScalarField;
use crate::geometry::Grid;
use crate::par;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MIN_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// True relative residual `||A x - b|| / ||b||` of the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    /// Energy `x^T A x / 2 - b^T x` of each iterate, starting with the
    /// initial guess. It differs from `||A x - b||^2_{A^-1} / 2` by a constant,
    /// so it never increases.
    pub energy: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
    #[error("right-hand side contains a non-finite value")]
    NonFiniteRhs,
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error(
        "conjugate gradients did not converge in {} iterations (relative residual {:.3e})",
        .0.iterations, .0.relative_residual
    )]
    NotConverged(SolveReport),
}

/// `x -> x + dt a∘x - dt L x` on one grid.
#[derive(Debug, Clone, Copy)]
pub struct HelmholtzOperator<'a> {
    grid: &'a Grid,
    dt: f64,
    absorption: Option<&'a [f64]>,
}

impl<'a> HelmholtzOperator<'a> {
    pub fn new(grid: &'a Grid, dt: f64, absorption: Option<&'a ScalarField>) -> Result<Self, SolveError> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(SolveError::InvalidOperator(format!("dt must be finite and >= 0, got {dt}")));
        }
        if let Some(a) = absorption {
            if a.len() != grid.num_active() {
                return Err(SolveError::InvalidOperator("absorption length differs from grid".into()));
            }
            if let Some(bad) = a.values().iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                return Err(SolveError::InvalidOperator(format!("absorption must be >= 0, found {bad}")));
            }
        }
        Ok(Self {
            grid,
            dt,
            absorption: absorption.map(|a| a.values()),
        })
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn absorption_at(&self, c: usize) -> f64 {
        self.absorption.map_or(0.0, |a| a[c])
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let g = self.grid;
        par::fill_indexed(out, |c| {
            let xc = x[c];
            let lap: f64 = g
                .links(c)
                .iter()
                .map(|l| g.coupling(g.faces()[l.face].axis) * (x[l.neighbor] - xc))
                .sum();
            xc + self.dt * self.absorption_at(c) * xc - self.dt * lap
        });
    }

    pub fn apply(&self, x: &ScalarField) -> ScalarField {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x.values(), &mut out);
        x.with_values(out)
    }

    /// Diagonal entries of the operator.
    pub fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        par::map_indexed(g.num_active(), |c| {
            let off: f64 = g.links(c).iter().map(|l| g.coupling(g.faces()[l.face].axis)).sum();
            1.0 + self.dt * (self.absorption_at(c) + off)
        })
    }
}

/// Default iteration cap: `10 * N^(1/dim)`, at least [`MIN_MAX_ITER`].
pub fn default_max_iter(grid: &Grid) -> usize {
    let n = grid.num_active() as f64;
    ((10.0 * n.powf(1.0 / grid.dim() as f64)).ceil() as usize).max(MIN_MAX_ITER)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    par::sum_indexed(a.len(), |i| a[i] * b[i])
}

/// Solves `op(x) = b` to `||op(x) - b|| <= tol ||b||`, starting from `x = b`.
pub fn solve_spd(
    op: &HelmholtzOperator<'_>,
    b: &ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, SolveReport), SolveError> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(SolveError::InvalidTolerance(tol));
    }
    let rhs = b.values();
    if rhs.len() != op.grid.num_active() {
        return Err(SolveError::InvalidOperator("right-hand side length differs from grid".into()));
    }
    if rhs.iter().any(|x| !x.is_finite()) {
        return Err(SolveError::NonFiniteRhs);
    }
    let n = rhs.len();
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        let report = SolveReport {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
            energy: vec![0.0],
        };
        return Ok((b.with_values(vec![0.0; n]), report));
    }

    let inv_diag: Vec<f64> = op.diagonal().into_iter().map(|d| 1.0 / d).collect();
    let mut x = rhs.to_vec();
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];

    let residual = |x: &[f64], r: &mut [f64], scratch: &mut [f64]| {
        op.apply_into(x, scratch);
        par::fill_indexed(r, |i| rhs[i] - scratch[i]);
        dot(r, r).sqrt()
    };

    let mut res = residual(&x, &mut r, &mut q);
    par::fill_indexed(&mut z, |i| r[i] * inv_diag[i]);
    let mut rz = dot(&r, &z);
    // x^T A x = x^T (b - r).
    let energy = |x: &[f64], r: &[f64]| -0.5 * (dot(x, rhs) + dot(x, r));
    let mut history = vec![energy(&x, &r)];
    let mut p = z.clone();
    let mut iterations = 0;

    while res > tol * b_norm && iterations < max_iter {
        op.apply_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            break;
        }
        let alpha = rz / pq;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
        iterations += 1;
        res = dot(&r, &r).sqrt();
        if res <= tol * b_norm {
            // Guard against drift of the recursive residual.
            res = residual(&x, &mut r, &mut q);
        }
        par::fill_indexed(&mut z, |i| r[i] * inv_diag[i]);
        let rz_next = dot(&r, &z);
        history.push(energy(&x, &r));
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }

    let report = SolveReport {
        iterations,
        relative_residual: res / b_norm,
        converged: res <= tol * b_norm,
        energy: history,
    };
    if report.converged {
        Ok((b.with_values(x), report))
    } else {
        Err(SolveError::NotConverged(report))
    }
}
