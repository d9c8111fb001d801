//! Smallest nonzero Neumann and smallest Dirichlet eigenvalues of `−Δ_h`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::grid::{DomainSpec, Grid, ScalarField};
use crate::linalg::{pcg, BoundaryKind, CgSettings, ShiftedLaplacian, SolveError};

/// Outer iteration cap of the inverse power method.
pub const MAX_OUTER: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("eigen tolerance must lie in (0, 1e-3], got {0}")]
    BadTolerance(f64),
    #[error("inverse iteration did not converge in {iterations} steps (residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub lambda: f64,
    /// Unit `L²` eigenvector.
    pub eigenfield: ScalarField,
    pub iterations: usize,
    /// `‖(−Δ_h)ψ − λψ‖₂ / ‖ψ‖₂`.
    pub residual: f64,
}

/// Smallest eigenvalue of `−Δ_h` with zero-flux boundary on mean-zero grid
/// functions.
pub fn lambda_neumann(grid: &Grid, tol: f64) -> Result<EigenResult, EigenError> {
    let spec = grid.spec();
    let start = ScalarField::from_fn(grid, |x, y| {
        let (s, t) = (x / spec.lx - 0.5, y / spec.ly - 0.5);
        s + 0.61 * t + 0.23 * s * t + 0.17 * s * s * s
    });
    inverse_iteration(grid, BoundaryKind::Neumann, start, tol)
}

/// Smallest eigenvalue of `−Δ_h` with homogeneous Dirichlet boundary.
pub fn lambda_dirichlet(grid: &Grid, tol: f64) -> Result<EigenResult, EigenError> {
    let spec = grid.spec();
    let start = ScalarField::from_fn(grid, |x, y| {
        let (s, t) = (x / spec.lx, y / spec.ly);
        s * (1.0 - s) * t * (1.0 - t) * (1.0 + 0.3 * s)
    });
    inverse_iteration(grid, BoundaryKind::Dirichlet, start, tol)
}

/// Continuum values `(λ_N, λ_D)` for the rectangle `(0, Lx) × (0, Ly)`.
pub fn rectangle_lambdas(spec: &DomainSpec) -> (f64, f64) {
    let longest = spec.lx.max(spec.ly);
    let neumann = PI * PI / (longest * longest);
    let dirichlet = PI * PI * (1.0 / (spec.lx * spec.lx) + 1.0 / (spec.ly * spec.ly));
    (neumann, dirichlet)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn inverse_iteration(
    grid: &Grid,
    bc: BoundaryKind,
    start: ScalarField,
    tol: f64,
) -> Result<EigenResult, EigenError> {
    if !(tol > 0.0 && tol <= 1e-3) {
        return Err(EigenError::BadTolerance(tol));
    }
    let deflate = bc == BoundaryKind::Neumann;
    let op = ShiftedLaplacian::new(grid, 0.0, 1.0, bc);
    let inner = CgSettings {
        tol: (tol * 1e-2).max(1e-12),
        max_iter: 50_000,
    };
    let n = op.len();
    let mut psi = start.into_values();
    if deflate {
        remove_mean(&mut psi);
    }
    normalize(&mut psi);

    let mut a_psi = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut lambda_prev = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_OUTER {
        next.copy_from_slice(&psi);
        pcg(&op, &psi, &mut next, deflate, inner)?;
        if deflate {
            remove_mean(&mut next);
        }
        normalize(&mut next);
        std::mem::swap(&mut psi, &mut next);

        op.apply(&psi, &mut a_psi);
        if deflate {
            remove_mean(&mut a_psi);
        }
        let lambda = dot(&psi, &a_psi);
        residual = a_psi
            .iter()
            .zip(&psi)
            .map(|(a, p)| (a - lambda * p).powi(2))
            .sum::<f64>()
            .sqrt();
        let settled = (lambda - lambda_prev).abs() <= tol * lambda.abs();
        lambda_prev = lambda;
        if residual <= tol && settled {
            let cell = grid.cell_volume().sqrt();
            let values = psi.iter().map(|v| v / cell).collect();
            return Ok(EigenResult {
                lambda,
                eigenfield: ScalarField::from_values(grid, values).expect("same grid"),
                iterations: it,
                residual,
            });
        }
    }
    Err(EigenError::NotConverged {
        iterations: MAX_OUTER,
        residual,
    })
}
