//! Discrete calculus on the cell-centered grid.

use super::field::{BoundaryFlux, FaceFlux, ScalarField, VectorField};
use super::{BoundaryFace, Grid, GridError};

/// Discrete norms. Sobolev norms sum `‖D^α f‖_r^r` over all multi-indices
/// `|α| ≤ order`, with `D^α` composed from the same first-difference stencil as
/// [`Grid::partial_x`] / [`Grid::partial_y`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    Lp(f64),
    Sup,
    Sobolev { order: usize, r: f64 },
}

impl Norm {
    pub fn w1(r: f64) -> Self {
        Norm::Sobolev { order: 1, r }
    }

    pub fn w2(r: f64) -> Self {
        Norm::Sobolev { order: 2, r }
    }

    pub fn w3(r: f64) -> Self {
        Norm::Sobolev { order: 3, r }
    }
}

impl Grid {
    /// Midpoint rule `Σ f_i hx hy`.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64, GridError> {
        self.check(f.spec())?;
        Ok(f.values().iter().sum::<f64>() * self.cell_volume())
    }

    pub fn mean(&self, f: &ScalarField) -> Result<f64, GridError> {
        Ok(self.integrate(f)? / self.area())
    }

    pub fn norm(&self, f: &ScalarField, kind: Norm) -> Result<f64, GridError> {
        self.check(f.spec())?;
        match kind {
            Norm::Sup => Ok(f.sup_abs()),
            Norm::Lp(r) => {
                check_exponent(r)?;
                Ok(self.lp_power(f.values(), r).powf(1.0 / r))
            }
            Norm::Sobolev { order, r } => {
                check_exponent(r)?;
                Ok(self.sobolev_power(f, order, r).powf(1.0 / r))
            }
        }
    }

    /// `Σ |f|^r hx hy`
    pub(crate) fn lp_power(&self, values: &[f64], r: f64) -> f64 {
        let s: f64 = if r == 2.0 {
            values.iter().map(|v| v * v).sum()
        } else {
            values.iter().map(|v| v.abs().powf(r)).sum()
        };
        s * self.cell_volume()
    }

    /// `Σ_{|α| ≤ order} ‖D^α f‖_r^r`
    pub(crate) fn sobolev_power(&self, f: &ScalarField, order: usize, r: f64) -> f64 {
        let mut total = self.lp_power(f.values(), r);
        // level[a] = ∂x^a ∂y^(m - a) f
        let mut level = vec![f.clone()];
        for m in 1..=order {
            let mut next = Vec::with_capacity(m + 1);
            next.push(self.partial_y(&level[0]));
            for prev in &level {
                next.push(self.partial_x(prev));
            }
            total += next
                .iter()
                .map(|d| self.lp_power(d.values(), r))
                .sum::<f64>();
            level = next;
        }
        total
    }

    /// `∂f/∂x`: central differences inside, second-order one-sided at the
    /// first and last column.
    pub fn partial_x(&self, f: &ScalarField) -> ScalarField {
        let (nx, ny) = (self.nx(), self.ny());
        let v = f.values();
        let inv2h = 0.5 / self.hx();
        let mut out = vec![0.0; v.len()];
        for j in 0..ny {
            let r = j * nx;
            out[r] = (-3.0 * v[r] + 4.0 * v[r + 1] - v[r + 2]) * inv2h;
            for i in 1..nx - 1 {
                out[r + i] = (v[r + i + 1] - v[r + i - 1]) * inv2h;
            }
            let e = r + nx - 1;
            out[e] = (3.0 * v[e] - 4.0 * v[e - 1] + v[e - 2]) * inv2h;
        }
        ScalarField::from_values(self, out).expect("same grid")
    }

    /// `∂f/∂y`, same stencil as [`Self::partial_x`].
    pub fn partial_y(&self, f: &ScalarField) -> ScalarField {
        let (nx, ny) = (self.nx(), self.ny());
        let v = f.values();
        let inv2h = 0.5 / self.hy();
        let mut out = vec![0.0; v.len()];
        for i in 0..nx {
            out[i] = (-3.0 * v[i] + 4.0 * v[nx + i] - v[2 * nx + i]) * inv2h;
            for j in 1..ny - 1 {
                let k = j * nx + i;
                out[k] = (v[k + nx] - v[k - nx]) * inv2h;
            }
            let e = (ny - 1) * nx + i;
            out[e] = (3.0 * v[e] - 4.0 * v[e - nx] + v[e - 2 * nx]) * inv2h;
        }
        ScalarField::from_values(self, out).expect("same grid")
    }

    pub fn gradient(&self, f: &ScalarField) -> Result<VectorField, GridError> {
        self.check(f.spec())?;
        VectorField::from_components(self, self.partial_x(f), self.partial_y(f))
    }

    /// Finite-volume divergence `Σ_faces (v·ν)|face| / |cell|`. Uses the
    /// field's face components when present, otherwise the reconstruction of
    /// [`VectorField::face_values`].
    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField, GridError> {
        self.check(v.spec())?;
        let faces = v.face_values(self);
        Ok(self.face_divergence(&faces, true))
    }

    /// Divergence of face data counting interior faces only (boundary faces
    /// treated as carrying zero flux).
    pub fn divergence_interior(&self, faces: &FaceFlux) -> ScalarField {
        self.face_divergence(faces, false)
    }

    pub(crate) fn face_divergence(&self, faces: &FaceFlux, with_boundary: bool) -> ScalarField {
        let (nx, ny) = (self.nx(), self.ny());
        let (ihx, ihy) = (1.0 / self.hx(), 1.0 / self.hy());
        let fx = |i: usize, j: usize| {
            if !with_boundary && (i == 0 || i == nx) {
                0.0
            } else {
                faces.x[self.x_face(i, j)]
            }
        };
        let fy = |i: usize, j: usize| {
            if !with_boundary && (j == 0 || j == ny) {
                0.0
            } else {
                faces.y[self.y_face(i, j)]
            }
        };
        let mut out = Vec::with_capacity(self.cell_count());
        for j in 0..ny {
            for i in 0..nx {
                out.push((fx(i + 1, j) - fx(i, j)) * ihx + (fy(i, j + 1) - fy(i, j)) * ihy);
            }
        }
        ScalarField::from_values(self, out).expect("same grid")
    }

    /// Finite-volume Laplacian with prescribed outward normal derivative
    /// `∇f·ν = b` on every boundary face.
    pub fn laplacian_with_flux(
        &self,
        f: &ScalarField,
        boundary_flux: &BoundaryFlux,
    ) -> Result<ScalarField, GridError> {
        self.check(f.spec())?;
        if boundary_flux.0.len() != self.boundary_face_count() {
            return Err(GridError::MissingFlux {
                expected: self.boundary_face_count(),
                found: boundary_flux.0.len(),
            });
        }
        let mut out = self.laplacian_zero_flux(f.values());
        for (face, b) in self.boundary_faces().iter().zip(&boundary_flux.0) {
            out[face.cell] += b * face.length / self.cell_volume();
        }
        Ok(ScalarField::from_values(self, out).expect("same grid"))
    }

    /// Compact five-point Laplacian with zero flux through the boundary.
    pub(crate) fn laplacian_zero_flux(&self, v: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx(), self.ny());
        let ihx2 = 1.0 / (self.hx() * self.hx());
        let ihy2 = 1.0 / (self.hy() * self.hy());
        let mut out = vec![0.0; v.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let c = v[k];
                let mut s = 0.0;
                if i > 0 {
                    s += (v[k - 1] - c) * ihx2;
                }
                if i + 1 < nx {
                    s += (v[k + 1] - c) * ihx2;
                }
                if j > 0 {
                    s += (v[k - nx] - c) * ihy2;
                }
                if j + 1 < ny {
                    s += (v[k + nx] - c) * ihy2;
                }
                out[k] = s;
            }
        }
        out
    }

    /// Outward normal derivative at a boundary face from the three nearest
    /// cells on the normal line, second order.
    pub fn normal_derivative(&self, values: &[f64], face: &BoundaryFace) -> f64 {
        let h = self.normal_spacing(face);
        (2.0 * values[face.cell] - 3.0 * values[face.inner] + values[face.inner2]) / h
    }

    /// Linear extrapolation of cell values to a boundary face center.
    pub fn extrapolate_to_face(&self, values: &[f64], face: &BoundaryFace) -> f64 {
        1.5 * values[face.cell] - 0.5 * values[face.inner]
    }

    /// Outward normal derivative on every boundary face.
    pub fn boundary_normal_derivative(&self, f: &ScalarField) -> Result<BoundaryFlux, GridError> {
        self.check(f.spec())?;
        Ok(BoundaryFlux(
            self.boundary_faces()
                .iter()
                .map(|face| self.normal_derivative(f.values(), face))
                .collect(),
        ))
    }
}

fn check_exponent(r: f64) -> Result<(), GridError> {
    if r.is_finite() && r >= 1.0 {
        Ok(())
    } else {
        Err(GridError::BadExponent(r))
    }
}
