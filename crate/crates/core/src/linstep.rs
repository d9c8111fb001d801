//! Implicit linear steps: Neumann heat with boundary flux and divergence-form
//! forcing, the shifted heat operator `1 − Δ`, the Helmholtz projection, and
//! the Stokes step built on it.

use thiserror::Error;

use crate::grid::{FaceFlux, Grid, GridError, ScalarField, VectorField};
use crate::linalg::{pcg, solve_neumann, BoundaryKind, CgSettings, ShiftedLaplacian, SolveError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinStepError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("theta must lie in [1/2, 1], got {0}")]
    BadTheta(f64),
    #[error("volume source must have zero integral: integral {integral:.3e}, total variation {scale:.3e}")]
    SourceNotMeanZero { integral: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolverOptions {
    /// Relative residual target of the inner conjugate-gradient solves.
    pub tol: f64,
    pub max_iter: usize,
    /// Implicitness of the θ-scheme: 1 is implicit Euler, ½ Crank–Nicolson.
    pub theta: f64,
}

impl Default for LinearSolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
            theta: 1.0,
        }
    }
}

impl LinearSolverOptions {
    fn cg(&self) -> CgSettings {
        CgSettings {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    fn validate(&self, dt: f64) -> Result<(), LinStepError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(LinStepError::BadTimeStep(dt));
        }
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(LinStepError::BadTheta(self.theta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverTag {
    NeumannHeat,
    ShiftedHeat,
    PressurePoisson,
    Stokes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolveReport {
    /// Conjugate-gradient iterations, summed over the inner solves.
    pub iterations: usize,
    /// Largest relative residual among the inner solves.
    pub final_residual: f64,
    pub solver: SolverTag,
}

impl LinearSolveReport {
    fn new(solver: SolverTag) -> Self {
        Self {
            iterations: 0,
            final_residual: 0.0,
            solver,
        }
    }

    fn absorb(&mut self, iterations: usize, residual: f64) {
        self.iterations += iterations;
        self.final_residual = self.final_residual.max(residual);
    }
}

/// One θ-step of `∂t U − ΔU = −∇·F_B + F_E` with `∇U·ν = F_B·ν` on the
/// boundary.
///
/// In flux form the boundary data cancel against the boundary part of
/// `∇·F_B`, so the step reduces to the zero-flux Laplacian with the interior
/// face divergence of `F_B` as source. Face data of `F_B` are used when
/// present, otherwise reconstructed from cell values.
pub fn step_neumann_heat(
    grid: &Grid,
    u: &ScalarField,
    f_b: &VectorField,
    f_e: &ScalarField,
    dt: f64,
    opts: &LinearSolverOptions,
) -> Result<(ScalarField, LinearSolveReport), LinStepError> {
    opts.validate(dt)?;
    grid.check(u.spec())?;
    grid.check(f_b.spec())?;
    grid.check(f_e.spec())?;
    let integral = grid.integrate(f_e)?;
    let scale = f_e.values().iter().map(|v| v.abs()).sum::<f64>() * grid.cell_volume();
    if integral.abs() > 1e-8 * scale {
        return Err(LinStepError::SourceNotMeanZero { integral, scale });
    }

    let theta = opts.theta;
    let div = grid.divergence_interior(&f_b.face_values(grid));
    let lap = grid.laplacian_zero_flux(u.values());
    let rhs: Vec<f64> = (0..u.len())
        .map(|k| {
            u.values()[k] + (1.0 - theta) * dt * lap[k] - dt * div.values()[k]
                + dt * f_e.values()[k]
        })
        .collect();
    let op = ShiftedLaplacian::new(grid, 1.0, theta * dt, BoundaryKind::Neumann);
    let mut x = u.values().to_vec();
    let out = solve_neumann(&op, &rhs, &mut x, opts.cg())?;
    let mut report = LinearSolveReport::new(SolverTag::NeumannHeat);
    report.absorb(out.iterations, out.residual);
    Ok((ScalarField::from_values(grid, x)?, report))
}

/// One θ-step of `∂t c + c − Δc = rhs` with zero normal flux.
pub fn step_shifted_heat(
    grid: &Grid,
    c: &ScalarField,
    rhs: &ScalarField,
    dt: f64,
    opts: &LinearSolverOptions,
) -> Result<(ScalarField, LinearSolveReport), LinStepError> {
    opts.validate(dt)?;
    grid.check(c.spec())?;
    grid.check(rhs.spec())?;
    let theta = opts.theta;
    let explicit = (1.0 - theta) * dt;
    let lap = grid.laplacian_zero_flux(c.values());
    let b: Vec<f64> = (0..c.len())
        .map(|k| (1.0 - explicit) * c.values()[k] + explicit * lap[k] + dt * rhs.values()[k])
        .collect();
    let op = ShiftedLaplacian::new(grid, 1.0 + theta * dt, theta * dt, BoundaryKind::Neumann);
    let mut x = c.values().to_vec();
    let out = solve_neumann(&op, &b, &mut x, opts.cg())?;
    let mut report = LinearSolveReport::new(SolverTag::ShiftedHeat);
    report.absorb(out.iterations, out.residual);
    Ok((ScalarField::from_values(grid, x)?, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Divergence-free field with face data; its boundary normal flux is zero.
    pub field: VectorField,
    /// Mean-zero pressure `p` with `v = Pv + ∇p`.
    pub pressure: ScalarField,
    pub report: LinearSolveReport,
}

/// Helmholtz projection onto discretely divergence-free fields with zero
/// normal trace.
///
/// The pressure solves the compact Poisson problem on face data, so the
/// corrected face fluxes are divergence-free to solver tolerance. Cell values
/// are corrected with the average of the two adjacent face gradients, where on
/// a boundary face the gradient equals the normal data being removed.
pub fn helmholtz_project(
    grid: &Grid,
    v: &VectorField,
    opts: &LinearSolverOptions,
) -> Result<Projection, LinStepError> {
    project_with_guess(grid, v, opts, None)
}

/// As [`helmholtz_project`], warm-starting the pressure solve.
pub fn project_with_guess(
    grid: &Grid,
    v: &VectorField,
    opts: &LinearSolverOptions,
    pressure_guess: Option<&ScalarField>,
) -> Result<Projection, LinStepError> {
    grid.check(v.spec())?;
    let faces = v.face_values(grid);
    faces.check(grid)?;
    let div = grid.divergence_interior(&faces);
    let rhs: Vec<f64> = div.values().iter().map(|d| -d).collect();
    let op = ShiftedLaplacian::new(grid, 0.0, 1.0, BoundaryKind::Neumann);
    let mut p = match pressure_guess {
        Some(g) => {
            grid.check(g.spec())?;
            g.values().to_vec()
        }
        None => vec![0.0; grid.cell_count()],
    };
    let out = pcg(&op, &rhs, &mut p, true, opts.cg())?;
    let mut report = LinearSolveReport::new(SolverTag::PressurePoisson);
    report.absorb(out.iterations, out.residual);

    let (nx, ny) = (grid.nx(), grid.ny());
    let (ihx, ihy) = (1.0 / grid.hx(), 1.0 / grid.hy());
    // Face gradients of p, with boundary entries set to the removed data.
    let mut gx = vec![0.0; grid.x_face_count()];
    let mut gy = vec![0.0; grid.y_face_count()];
    for j in 0..ny {
        for i in 0..=nx {
            let f = grid.x_face(i, j);
            gx[f] = if i == 0 || i == nx {
                faces.x[f]
            } else {
                (p[grid.idx(i, j)] - p[grid.idx(i - 1, j)]) * ihx
            };
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let f = grid.y_face(i, j);
            gy[f] = if j == 0 || j == ny {
                faces.y[f]
            } else {
                (p[grid.idx(i, j)] - p[grid.idx(i, j - 1)]) * ihy
            };
        }
    }
    let corrected = FaceFlux {
        x: faces.x.iter().zip(&gx).map(|(a, b)| a - b).collect(),
        y: faces.y.iter().zip(&gy).map(|(a, b)| a - b).collect(),
    };
    let mut cx = v.x().to_vec();
    let mut cy = v.y().to_vec();
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.idx(i, j);
            cx[k] -= 0.5 * (gx[grid.x_face(i, j)] + gx[grid.x_face(i + 1, j)]);
            cy[k] -= 0.5 * (gy[grid.y_face(i, j)] + gy[grid.y_face(i, j + 1)]);
        }
    }
    let field = VectorField::from_components(
        grid,
        ScalarField::from_values(grid, cx)?,
        ScalarField::from_values(grid, cy)?,
    )?
    .with_faces(grid, corrected)?;
    Ok(Projection {
        field,
        pressure: ScalarField::from_values(grid, p)?,
        report,
    })
}

/// Chorin step for `∂t u − Δu + ∇p = force`, `∇·u = 0`, `u = 0` on the
/// boundary: θ-diffusion of each component with no-slip walls, then
/// projection of the no-slip face interpolant.
pub fn step_stokes(
    grid: &Grid,
    u: &VectorField,
    force: &VectorField,
    dt: f64,
    opts: &LinearSolverOptions,
    pressure_guess: Option<&ScalarField>,
) -> Result<Projection, LinStepError> {
    opts.validate(dt)?;
    grid.check(u.spec())?;
    grid.check(force.spec())?;
    let theta = opts.theta;
    let op = ShiftedLaplacian::new(grid, 1.0, theta * dt, BoundaryKind::Dirichlet);
    let explicit = ShiftedLaplacian::new(grid, 0.0, -1.0, BoundaryKind::Dirichlet);
    let mut report = LinearSolveReport::new(SolverTag::Stokes);
    let mut comps = Vec::with_capacity(2);
    let mut lap = vec![0.0; grid.cell_count()];
    for (cur, f) in [(u.x(), force.x()), (u.y(), force.y())] {
        explicit.apply(cur, &mut lap);
        let b: Vec<f64> = (0..cur.len())
            .map(|k| cur[k] + (1.0 - theta) * dt * lap[k] + dt * f[k])
            .collect();
        let mut x = cur.to_vec();
        let out = pcg(&op, &b, &mut x, false, opts.cg())?;
        report.absorb(out.iterations, out.residual);
        comps.push(ScalarField::from_values(grid, x)?);
    }
    let cy = comps.pop().expect("two components");
    let cx = comps.pop().expect("two components");
    let star = VectorField::from_components(grid, cx, cy)?;
    let mut faces = star.reconstruct_faces(grid);
    let (nx, ny) = (grid.nx(), grid.ny());
    for j in 0..ny {
        faces.x[grid.x_face(0, j)] = 0.0;
        faces.x[grid.x_face(nx, j)] = 0.0;
    }
    for i in 0..nx {
        faces.y[grid.y_face(i, 0)] = 0.0;
        faces.y[grid.y_face(i, ny)] = 0.0;
    }
    let star = star.with_faces(grid, faces)?;
    let mut proj = project_with_guess(grid, &star, opts, pressure_guess)?;
    report.absorb(proj.report.iterations, proj.report.final_residual);
    proj.report = report;
    Ok(proj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DomainSpec, Norm};
    use std::f64::consts::PI;

    fn unit(n: usize) -> Grid {
        Grid::new(DomainSpec::unit_square(n).unwrap()).unwrap()
    }

    fn opts() -> LinearSolverOptions {
        LinearSolverOptions::default()
    }

    fn sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
        a.sub(b).sup_abs()
    }

    #[test]
    fn heat_step_on_eigenmode() {
        let g = unit(64);
        let u0 = ScalarField::from_fn(&g, |x, _| (PI * x).cos());
        let zero_v = VectorField::zeros(&g);
        let zero_s = ScalarField::zeros(&g);
        let dt = 0.01;
        let (u1, rep) = step_neumann_heat(&g, &u0, &zero_v, &zero_s, dt, &opts()).unwrap();
        let expect = u0.scaled(1.0 / (1.0 + dt * PI * PI));
        assert!(sup_diff(&u1, &expect) < 1e-3, "{}", sup_diff(&u1, &expect));
        assert!(rep.final_residual <= 1e-10);
        assert_eq!(rep.solver, SolverTag::NeumannHeat);
    }

    #[test]
    fn heat_step_zero_is_zero() {
        let g = unit(8);
        let z = ScalarField::zeros(&g);
        let (u1, _) = step_neumann_heat(&g, &z, &VectorField::zeros(&g), &z, 0.1, &opts()).unwrap();
        assert!(u1.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn heat_relaxes_to_linear_profile() {
        let g = unit(16);
        let mut u = ScalarField::zeros(&g);
        let fb = VectorField::constant(&g, [1.0, 0.0]);
        let fe = ScalarField::zeros(&g);
        for _ in 0..200 {
            u = step_neumann_heat(&g, &u, &fb, &fe, 0.05, &opts())
                .unwrap()
                .0;
        }
        let target = ScalarField::from_fn(&g, |x, _| x - 0.5);
        assert!(sup_diff(&u, &target) < 1e-6, "{}", sup_diff(&u, &target));
        assert!(g.mean(&u).unwrap().abs() < 1e-12);
    }

    #[test]
    fn heat_rejects_source_with_mass() {
        let g = unit(8);
        let z = ScalarField::zeros(&g);
        let one = ScalarField::constant(&g, 1.0);
        let err =
            step_neumann_heat(&g, &z, &VectorField::zeros(&g), &one, 0.1, &opts()).unwrap_err();
        assert!(matches!(err, LinStepError::SourceNotMeanZero { .. }));
        let err =
            step_neumann_heat(&g, &z, &VectorField::zeros(&g), &z, -0.1, &opts()).unwrap_err();
        assert_eq!(err, LinStepError::BadTimeStep(-0.1));
    }

    #[test]
    fn shifted_heat_examples() {
        let g = unit(32);
        let one = ScalarField::constant(&g, 1.0);
        let (c1, _) = step_shifted_heat(&g, &one, &one, 0.1, &opts()).unwrap();
        assert!(sup_diff(&c1, &one) < 1e-14);

        let two = ScalarField::constant(&g, 2.0);
        let dt = 0.05;
        let (c2, _) = step_shifted_heat(&g, &two, &ScalarField::zeros(&g), dt, &opts()).unwrap();
        assert!(sup_diff(&c2, &two.scaled(1.0 / (1.0 + dt))) < 1e-14);

        let g = unit(64);
        let c0 = ScalarField::from_fn(&g, |x, _| (PI * x).cos());
        let dt = 0.01;
        let (c3, _) = step_shifted_heat(&g, &c0, &ScalarField::zeros(&g), dt, &opts()).unwrap();
        let expect = c0.scaled(1.0 / (1.0 + dt * (1.0 + PI * PI)));
        assert!(sup_diff(&c3, &expect) < 1e-3);
    }

    #[test]
    fn crank_nicolson_mass_recursion() {
        let g = unit(8);
        let c0 = ScalarField::from_fn(&g, |x, y| 1.0 + x * y);
        let rhs = ScalarField::from_fn(&g, |x, _| 2.0 + x);
        let o = LinearSolverOptions {
            theta: 0.5,
            ..opts()
        };
        let dt = 0.1;
        let (c1, _) = step_shifted_heat(&g, &c0, &rhs, dt, &o).unwrap();
        let (m0, m1, mr) = (
            g.integrate(&c0).unwrap(),
            g.integrate(&c1).unwrap(),
            g.integrate(&rhs).unwrap(),
        );
        let expect = ((1.0 - 0.5 * dt) * m0 + dt * mr) / (1.0 + 0.5 * dt);
        assert!((m1 - expect).abs() < 1e-14);
    }

    #[test]
    fn projection_annihilates_gradients() {
        let g = unit(32);
        let v = VectorField::from_fn(&g, |x, y| [x, y]);
        let p = helmholtz_project(&g, &v, &opts()).unwrap();
        assert!(p.field.l2_norm(&g) < 1e-8, "{}", p.field.l2_norm(&g));
    }

    #[test]
    fn projection_keeps_solenoidal_fields() {
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = unit(n);
            let v = VectorField::from_fn(&g, |x, y| {
                [
                    -PI * (PI * x).sin() * (PI * y).cos(),
                    PI * (PI * x).cos() * (PI * y).sin(),
                ]
            });
            let p = helmholtz_project(&g, &v, &opts()).unwrap();
            errs.push(p.field.sub(&v).l2_norm(&g));
        }
        assert!(errs[1] < 2e-2, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn projection_of_zero() {
        let g = unit(8);
        let p = helmholtz_project(&g, &VectorField::zeros(&g), &opts()).unwrap();
        assert_eq!(p.field.sup_magnitude(), 0.0);
    }

    fn rough_field(g: &Grid) -> VectorField {
        VectorField::from_fn(g, |x, y| {
            [
                (3.0 * x + y).sin() + x * x,
                (2.0 * y - x).cos() + 0.5 * x * y,
            ]
        })
    }

    #[test]
    fn projection_result_is_divergence_free_with_zero_trace() {
        let g = unit(24);
        let p = helmholtz_project(&g, &rough_field(&g), &opts()).unwrap();
        let div = g.divergence(&p.field).unwrap();
        assert!(g.norm(&div, Norm::Lp(2.0)).unwrap() < 1e-8);
        assert_eq!(p.field.boundary_normal(&g).sup_abs(), 0.0);
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal() {
        let g = unit(24);
        let tol = 1e-10;
        let v = rough_field(&g);
        let pv = helmholtz_project(&g, &v, &opts()).unwrap().field;
        let ppv = helmholtz_project(&g, &pv, &opts()).unwrap().field;
        assert!(ppv.sub(&pv).sup_magnitude() <= 10.0 * tol);

        let fv = v.face_values(&g);
        let fp = pv.face_values(&g);
        let rest = FaceFlux {
            x: fv.x.iter().zip(&fp.x).map(|(a, b)| a - b).collect(),
            y: fv.y.iter().zip(&fp.y).map(|(a, b)| a - b).collect(),
        };
        let norm2 = fv.inner(&fv, &g);
        assert!(rest.inner(&fp, &g).abs() <= 10.0 * tol * norm2);
    }

    fn vortex(g: &Grid, amp: f64) -> VectorField {
        // Curl of sin²(πx) sin²(πy).
        VectorField::from_fn(g, |x, y| {
            let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
            [
                amp * 2.0 * PI * sx * sx * sy * (PI * y).cos(),
                -amp * 2.0 * PI * sy * sy * sx * (PI * x).cos(),
            ]
        })
    }

    #[test]
    fn stokes_zero_stays_zero() {
        let g = unit(8);
        let z = VectorField::zeros(&g);
        let p = step_stokes(&g, &z, &z, 0.1, &opts(), None).unwrap();
        assert_eq!(p.field.sup_magnitude(), 0.0);
    }

    #[test]
    fn stokes_energy_decreases_and_stays_solenoidal() {
        let g = unit(24);
        let z = VectorField::zeros(&g);
        let mut u = helmholtz_project(&g, &vortex(&g, 0.01), &opts())
            .unwrap()
            .field;
        let mut prev = u.l2_norm(&g);
        let mut guess = None;
        for _ in 0..20 {
            let p = step_stokes(&g, &u, &z, 0.005, &opts(), guess.as_ref()).unwrap();
            u = p.field;
            guess = Some(p.pressure);
            let e = u.l2_norm(&g);
            assert!(e <= prev * (1.0 + 1e-12));
            prev = e;
            let div = g.divergence(&u).unwrap();
            assert!(g.norm(&div, Norm::Lp(2.0)).unwrap() < 1e-8);
            assert_eq!(u.boundary_normal(&g).sup_abs(), 0.0);
        }
    }
}
