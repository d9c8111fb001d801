//! Matrix-free Jacobi-preconditioned conjugate gradients for the five-point
//! operators `α I − β Δ_h` used by the implicit steps and the eigen solver.

use thiserror::Error;

use crate::grid::Grid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("conjugate gradients stalled after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(
        "conjugate gradients broke down: operator is not positive definite on the search space"
    )]
    Breakdown,
}

/// Homogeneous boundary treatment of the compact Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Zero flux through every boundary face.
    Neumann,
    /// Zero value on the boundary, imposed through a mirrored ghost cell.
    Dirichlet,
}

/// `A = α I − β Δ_h` on the cell grid.
#[derive(Debug, Clone)]
pub struct ShiftedLaplacian {
    nx: usize,
    ny: usize,
    ihx2: f64,
    ihy2: f64,
    alpha: f64,
    beta: f64,
    bc: BoundaryKind,
}

impl ShiftedLaplacian {
    pub fn new(grid: &Grid, alpha: f64, beta: f64, bc: BoundaryKind) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            ihx2: 1.0 / (grid.hx() * grid.hx()),
            ihy2: 1.0 / (grid.hy() * grid.hy()),
            alpha,
            beta,
            bc,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn boundary(&self) -> BoundaryKind {
        self.bc
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `y = Δ_h x` with the operator's homogeneous boundary condition.
    pub fn laplacian(&self, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let wall = match self.bc {
            BoundaryKind::Neumann => 0.0,
            BoundaryKind::Dirichlet => -2.0,
        };
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let c = x[k];
                let mut s = 0.0;
                s += if i > 0 {
                    (x[k - 1] - c) * self.ihx2
                } else {
                    wall * c * self.ihx2
                };
                s += if i + 1 < nx {
                    (x[k + 1] - c) * self.ihx2
                } else {
                    wall * c * self.ihx2
                };
                s += if j > 0 {
                    (x[k - nx] - c) * self.ihy2
                } else {
                    wall * c * self.ihy2
                };
                s += if j + 1 < ny {
                    (x[k + nx] - c) * self.ihy2
                } else {
                    wall * c * self.ihy2
                };
                y[k] = s;
            }
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.laplacian(x, y);
        for (yk, xk) in y.iter_mut().zip(x) {
            *yk = self.alpha * xk - self.beta * *yk;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let wall = match self.bc {
            BoundaryKind::Neumann => 0.0,
            BoundaryKind::Dirichlet => 2.0,
        };
        let mut d = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let mut s = 0.0;
                s += if i > 0 { self.ihx2 } else { wall * self.ihx2 };
                s += if i + 1 < nx {
                    self.ihx2
                } else {
                    wall * self.ihx2
                };
                s += if j > 0 { self.ihy2 } else { wall * self.ihy2 };
                s += if j + 1 < ny {
                    self.ihy2
                } else {
                    wall * self.ihy2
                };
                d.push(self.alpha + self.beta * s);
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Stop once `‖r‖₂ ≤ tol ‖b‖₂`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Relative residual at exit.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Preconditioned CG on `A x = b`, starting from the contents of `x`.
///
/// With `deflate` set, the iteration runs in the mean-zero subspace: `b`, the
/// iterate, every residual and every preconditioned residual have their mean
/// removed, which makes the singular pure-Neumann operator invertible.
pub fn pcg(
    op: &ShiftedLaplacian,
    b: &[f64],
    x: &mut [f64],
    deflate: bool,
    settings: CgSettings,
) -> Result<CgOutcome, SolveError> {
    let n = b.len();
    let mut rhs = b.to_vec();
    if deflate {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();

    let mut q = vec![0.0; n];
    op.apply(x, &mut q);
    let mut r: Vec<f64> = rhs.iter().zip(&q).map(|(b, a)| b - a).collect();
    if deflate {
        remove_mean(&mut r);
    }
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm <= settings.tol * bnorm {
        return Ok(CgOutcome {
            iterations: 0,
            residual: rnorm / bnorm,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    if deflate {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    for it in 1..=settings.max_iter {
        op.apply(&p, &mut q);
        if deflate {
            remove_mean(&mut q);
        }
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(SolveError::Breakdown);
        }
        let step = rz / pq;
        for k in 0..n {
            x[k] += step * p[k];
            r[k] -= step * q[k];
        }
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= settings.tol * bnorm {
            if deflate {
                remove_mean(x);
            }
            return Ok(CgOutcome {
                iterations: it,
                residual: rnorm / bnorm,
            });
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        if deflate {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(SolveError::NotConverged {
        iterations: settings.max_iter,
        residual: rnorm / bnorm,
    })
}

/// Solves a Neumann problem `(α I − β Δ_h) x = b` by splitting off the
/// constant mode, which the operator maps to itself with eigenvalue `α`.
///
/// The mean-free part is solved by deflated CG with the tolerance taken
/// relative to the mean-free part of `b`; the mean of the result is then
/// `mean(b) / α` to rounding. For `α = 0` the mean of `b` is discarded and the
/// mean-zero solution is returned.
pub fn solve_neumann(
    op: &ShiftedLaplacian,
    b: &[f64],
    x: &mut [f64],
    settings: CgSettings,
) -> Result<CgOutcome, SolveError> {
    debug_assert_eq!(op.boundary(), BoundaryKind::Neumann);
    let mean_b = b.iter().sum::<f64>() / b.len() as f64;
    let outcome = pcg(op, b, x, true, settings)?;
    if op.alpha() != 0.0 {
        let shift = mean_b / op.alpha();
        x.iter_mut().for_each(|v| *v += shift);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;

    fn grid(n: usize) -> Grid {
        Grid::new(DomainSpec::new(1.0, 2.0, n, n + 3).unwrap()).unwrap()
    }

    fn pseudo_random(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn operator_is_symmetric() {
        let g = grid(6);
        for bc in [BoundaryKind::Neumann, BoundaryKind::Dirichlet] {
            let op = ShiftedLaplacian::new(&g, 0.3, 1.7, bc);
            let a = pseudo_random(op.len(), 1);
            let b = pseudo_random(op.len(), 2);
            let (mut aa, mut ab) = (vec![0.0; op.len()], vec![0.0; op.len()]);
            op.apply(&a, &mut aa);
            op.apply(&b, &mut ab);
            assert!((dot(&aa, &b) - dot(&a, &ab)).abs() < 1e-10 * dot(&aa, &aa).sqrt());
        }
    }

    #[test]
    fn diagonal_matches_operator() {
        let g = grid(5);
        for bc in [BoundaryKind::Neumann, BoundaryKind::Dirichlet] {
            let op = ShiftedLaplacian::new(&g, 1.0, 0.01, bc);
            let d = op.diagonal();
            let mut e = vec![0.0; op.len()];
            let mut y = vec![0.0; op.len()];
            for k in [0, 7, op.len() - 1] {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[k] = 1.0;
                op.apply(&e, &mut y);
                assert!((y[k] - d[k]).abs() < 1e-12 * d[k]);
            }
        }
    }

    #[test]
    fn solves_dirichlet_system() {
        let g = grid(12);
        let op = ShiftedLaplacian::new(&g, 0.0, 1.0, BoundaryKind::Dirichlet);
        let exact = pseudo_random(op.len(), 3);
        let mut b = vec![0.0; op.len()];
        op.apply(&exact, &mut b);
        let mut x = vec![0.0; op.len()];
        let out = pcg(
            &op,
            &b,
            &mut x,
            false,
            CgSettings {
                tol: 1e-12,
                max_iter: 5000,
            },
        )
        .unwrap();
        assert!(out.residual <= 1e-12);
        let err = x
            .iter()
            .zip(&exact)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn neumann_split_recovers_mean_exactly() {
        let g = grid(10);
        let op = ShiftedLaplacian::new(&g, 1.0, 0.05, BoundaryKind::Neumann);
        let exact: Vec<f64> = pseudo_random(op.len(), 4).iter().map(|v| v + 2.0).collect();
        let mut b = vec![0.0; op.len()];
        op.apply(&exact, &mut b);
        let mut x = vec![0.0; op.len()];
        solve_neumann(&op, &b, &mut x, CgSettings::default()).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean(&x) - mean(&exact)).abs() < 1e-14);
        let err = x
            .iter()
            .zip(&exact)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9);
    }

    #[test]
    fn singular_neumann_returns_mean_zero_solution() {
        let g = grid(10);
        let op = ShiftedLaplacian::new(&g, 0.0, 1.0, BoundaryKind::Neumann);
        let mut exact = pseudo_random(op.len(), 5);
        remove_mean(&mut exact);
        let mut b = vec![0.0; op.len()];
        op.apply(&exact, &mut b);
        let mut x = vec![1.0; op.len()];
        let out = solve_neumann(
            &op,
            &b,
            &mut x,
            CgSettings {
                tol: 1e-12,
                max_iter: 5000,
            },
        )
        .unwrap();
        assert!(out.iterations > 0);
        let err = x
            .iter()
            .zip(&exact)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn zero_rhs_short_circuits() {
        let g = grid(4);
        let op = ShiftedLaplacian::new(&g, 1.0, 1.0, BoundaryKind::Neumann);
        let mut x = vec![3.0; op.len()];
        let out = pcg(
            &op,
            &vec![0.0; op.len()],
            &mut x,
            false,
            CgSettings::default(),
        )
        .unwrap();
        assert_eq!(out.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = grid(16);
        let op = ShiftedLaplacian::new(&g, 0.0, 1.0, BoundaryKind::Dirichlet);
        let b = pseudo_random(op.len(), 6);
        let mut x = vec![0.0; op.len()];
        let err = pcg(
            &op,
            &b,
            &mut x,
            false,
            CgSettings {
                tol: 1e-14,
                max_iter: 3,
            },
        )
        .unwrap_err();
        assert!(matches!(
            err,
            SolveError::NotConverged { iterations: 3, .. }
        ));
    }
}
