use crate::grid::{BoundaryFlux, FaceFlux, Grid, GridError, ScalarField, Side, VectorField};

use super::SensitivitySpec;

/// The chemotactic flux `n S(t,x) ∇c`.
///
/// Cell values use the grid gradient. Interior face values take the normal
/// derivative of `c` across the face, the tangential derivative averaged from
/// the two cells, and `n` from the upwind cell of the resulting drift.
/// Boundary faces use the one-sided normal derivative, extrapolated tangential
/// derivative and extrapolated `n`; these boundary values are exactly the data
/// imposed on `∇n·ν` by the density step.
pub fn chemotactic_flux(
    grid: &Grid,
    n: &ScalarField,
    c: &ScalarField,
    s: &SensitivitySpec,
    t: f64,
) -> Result<VectorField, GridError> {
    grid.check(n.spec())?;
    grid.check(c.spec())?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let px = grid.partial_x(c);
    let py = grid.partial_y(c);
    let (nv, cv, pxv, pyv) = (n.values(), c.values(), px.values(), py.values());

    let mut cx = Vec::with_capacity(nv.len());
    let mut cy = Vec::with_capacity(nv.len());
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.idx(i, j);
            let w = s.apply(t, grid.cell_center(i, j), [pxv[k], pyv[k]]);
            cx.push(nv[k] * w[0]);
            cy.push(nv[k] * w[1]);
        }
    }

    let mut faces = FaceFlux::zeros(grid);
    for j in 0..ny {
        for i in 1..nx {
            let (l, r) = (grid.idx(i - 1, j), grid.idx(i, j));
            let g = [(cv[r] - cv[l]) / hx, 0.5 * (pyv[l] + pyv[r])];
            let w = s.apply(t, [i as f64 * hx, (j as f64 + 0.5) * hy], g)[0];
            faces.x[grid.x_face(i, j)] = w * if w > 0.0 { nv[l] } else { nv[r] };
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let (b, a) = (grid.idx(i, j - 1), grid.idx(i, j));
            let g = [0.5 * (pxv[b] + pxv[a]), (cv[a] - cv[b]) / hy];
            let w = s.apply(t, [(i as f64 + 0.5) * hx, j as f64 * hy], g)[1];
            faces.y[grid.y_face(i, j)] = w * if w > 0.0 { nv[b] } else { nv[a] };
        }
    }
    let boundary = boundary_chemotactic_flux(grid, n, c, s, t, &px, &py);
    faces.set_boundary_normal(grid, &boundary);

    VectorField::from_components(
        grid,
        ScalarField::from_values(grid, cx)?,
        ScalarField::from_values(grid, cy)?,
    )?
    .with_faces(grid, faces)
}

fn boundary_chemotactic_flux(
    grid: &Grid,
    n: &ScalarField,
    c: &ScalarField,
    s: &SensitivitySpec,
    t: f64,
    px: &ScalarField,
    py: &ScalarField,
) -> BoundaryFlux {
    BoundaryFlux(
        grid.boundary_faces()
            .iter()
            .map(|face| {
                let dn = grid.normal_derivative(c.values(), face);
                let sign = face.side.sign();
                let g = match face.side {
                    Side::West | Side::East => {
                        [sign * dn, grid.extrapolate_to_face(py.values(), face)]
                    }
                    Side::South | Side::North => {
                        [grid.extrapolate_to_face(px.values(), face), sign * dn]
                    }
                };
                let w = s.apply(t, face.center, g);
                let wn = w[0] * face.normal[0] + w[1] * face.normal[1];
                grid.extrapolate_to_face(n.values(), face) * wn
            })
            .collect(),
    )
}

/// Outward normal chemotactic flux `n S ∇c · ν` on every boundary face.
pub fn boundary_chemotactic(
    grid: &Grid,
    n: &ScalarField,
    c: &ScalarField,
    s: &SensitivitySpec,
    t: f64,
) -> Result<BoundaryFlux, GridError> {
    grid.check(n.spec())?;
    grid.check(c.spec())?;
    let px = grid.partial_x(c);
    let py = grid.partial_y(c);
    Ok(boundary_chemotactic_flux(grid, n, c, s, t, &px, &py))
}

/// First-order upwind transport flux `U q` on every face, with `U` given as
/// face velocities. Boundary faces take the adjacent cell value.
pub fn advective_flux(grid: &Grid, velocity: &FaceFlux, q: &[f64]) -> FaceFlux {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = FaceFlux::zeros(grid);
    for j in 0..ny {
        for i in 0..=nx {
            let f = grid.x_face(i, j);
            let v = velocity.x[f];
            let l = grid.idx(i.saturating_sub(1), j);
            let r = grid.idx(i.min(nx - 1), j);
            out.x[f] = v * if v > 0.0 { q[l] } else { q[r] };
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let f = grid.y_face(i, j);
            let v = velocity.y[f];
            let b = grid.idx(i, j.saturating_sub(1));
            let a = grid.idx(i, j.min(ny - 1));
            out.y[f] = v * if v > 0.0 { q[b] } else { q[a] };
        }
    }
    out
}

/// Upwind `∇·(U q)`, which equals `U·∇q` for divergence-free `U`.
pub fn advection(grid: &Grid, velocity: &FaceFlux, q: &ScalarField) -> ScalarField {
    grid.face_divergence(&advective_flux(grid, velocity, q.values()), true)
}

/// Upwind `(u·∇)u`, transported by the face velocities of `u`.
pub fn momentum_advection(grid: &Grid, u: &VectorField) -> Result<VectorField, GridError> {
    let faces = u.face_values(grid);
    let ax = advection(grid, &faces, &u.component(0));
    let ay = advection(grid, &faces, &u.component(1));
    VectorField::from_components(grid, ax, ay)
}

/// Sum of two face-flux fields with matching layout.
pub fn add_faces(a: &FaceFlux, b: &FaceFlux) -> FaceFlux {
    FaceFlux {
        x: a.x.iter().zip(&b.x).map(|(p, q)| p + q).collect(),
        y: a.y.iter().zip(&b.y).map(|(p, q)| p + q).collect(),
    }
}
