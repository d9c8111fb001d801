use super::{DomainSpec, Grid, GridError};

/// One real value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: DomainSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self {
            spec: grid.spec(),
            values: vec![value; grid.cell_count()],
        }
    }

    /// Samples `f(x, y)` at cell centers.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cell_count());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let [x, y] = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        Self {
            spec: grid.spec(),
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.cell_count() {
            return Err(GridError::LengthMismatch {
                expected: grid.cell_count(),
                found: values.len(),
            });
        }
        Ok(Self {
            spec: grid.spec(),
            values,
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.spec, other.spec);
        Self {
            spec: self.spec,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        debug_assert_eq!(self.spec, x.spec);
        for (v, &xv) in self.values.iter_mut().zip(&x.values) {
            *v += a * xv;
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

/// Normal components on every face: `x` holds the `+x` component on the
/// `(nx + 1) * ny` vertical faces, `y` the `+y` component on the `nx * (ny + 1)`
/// horizontal faces. Boundary entries are oriented along the axes, not along
/// the outward normal.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceFlux {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FaceFlux {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            x: vec![0.0; grid.x_face_count()],
            y: vec![0.0; grid.y_face_count()],
        }
    }

    pub fn check(&self, grid: &Grid) -> Result<(), GridError> {
        for (found, expected) in [
            (self.x.len(), grid.x_face_count()),
            (self.y.len(), grid.y_face_count()),
        ] {
            if found != expected {
                return Err(GridError::LengthMismatch { expected, found });
            }
        }
        Ok(())
    }

    /// Outward normal value on every boundary face, in boundary-face order.
    pub fn boundary_normal(&self, grid: &Grid) -> BoundaryFlux {
        BoundaryFlux(
            grid.boundary_faces()
                .iter()
                .map(|face| {
                    let slot = grid.face_slot(face);
                    let v = if face.side.is_x_side() {
                        self.x[slot]
                    } else {
                        self.y[slot]
                    };
                    face.side.sign() * v
                })
                .collect(),
        )
    }

    /// Overwrites boundary entries with the given outward normal values.
    pub fn set_boundary_normal(&mut self, grid: &Grid, flux: &BoundaryFlux) {
        for (face, &b) in grid.boundary_faces().iter().zip(&flux.0) {
            let slot = grid.face_slot(face);
            let v = face.side.sign() * b;
            if face.side.is_x_side() {
                self.x[slot] = v;
            } else {
                self.y[slot] = v;
            }
        }
    }

    fn combine(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            x: self
                .x
                .iter()
                .zip(&other.x)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            y: self
                .y
                .iter()
                .zip(&other.y)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            x: self.x.iter().map(|&a| f(a)).collect(),
            y: self.y.iter().map(|&a| f(a)).collect(),
        }
    }

    /// Staggered `L²` inner product: interior faces carry a full cell volume,
    /// boundary faces half of one.
    pub fn inner(&self, other: &Self, grid: &Grid) -> f64 {
        let (nx, ny) = (grid.nx(), grid.ny());
        let vol = grid.cell_volume();
        let mut sum = 0.0;
        for j in 0..ny {
            for i in 0..=nx {
                let k = grid.x_face(i, j);
                let w = if i == 0 || i == nx { 0.5 } else { 1.0 };
                sum += w * self.x[k] * other.x[k];
            }
        }
        for j in 0..=ny {
            for i in 0..nx {
                let k = grid.y_face(i, j);
                let w = if j == 0 || j == ny { 0.5 } else { 1.0 };
                sum += w * self.y[k] * other.y[k];
            }
        }
        sum * vol
    }
}

/// Outward normal boundary data, one value per boundary face (see
/// [`Grid::boundary_faces`] for the ordering).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFlux(pub Vec<f64>);

impl BoundaryFlux {
    pub fn zeros(grid: &Grid) -> Self {
        Self(vec![0.0; grid.boundary_face_count()])
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self(vec![value; grid.boundary_face_count()])
    }

    /// Evaluates `f(face center, outward normal)` on every boundary face.
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2], [f64; 2]) -> f64) -> Self {
        Self(
            grid.boundary_faces()
                .iter()
                .map(|face| f(face.center, face.normal))
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// `Σ b · |face|`
    pub fn boundary_integral(&self, grid: &Grid) -> f64 {
        grid.boundary_faces()
            .iter()
            .zip(&self.0)
            .map(|(face, b)| b * face.length)
            .sum()
    }
}

/// Cell-centered vector field with optional face-normal components.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    spec: DomainSpec,
    x: Vec<f64>,
    y: Vec<f64>,
    faces: Option<FaceFlux>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, [0.0, 0.0])
    }

    pub fn constant(grid: &Grid, v: [f64; 2]) -> Self {
        let n = grid.cell_count();
        Self {
            spec: grid.spec(),
            x: vec![v[0]; n],
            y: vec![v[1]; n],
            faces: None,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let n = grid.cell_count();
        let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let [cx, cy] = grid.cell_center(i, j);
                let [vx, vy] = f(cx, cy);
                x.push(vx);
                y.push(vy);
            }
        }
        Self {
            spec: grid.spec(),
            x,
            y,
            faces: None,
        }
    }

    pub fn from_components(grid: &Grid, x: ScalarField, y: ScalarField) -> Result<Self, GridError> {
        grid.check(x.spec())?;
        grid.check(y.spec())?;
        Ok(Self {
            spec: grid.spec(),
            x: x.into_values(),
            y: y.into_values(),
            faces: None,
        })
    }

    pub fn with_faces(mut self, grid: &Grid, faces: FaceFlux) -> Result<Self, GridError> {
        grid.check(&self.spec)?;
        faces.check(grid)?;
        self.faces = Some(faces);
        Ok(self)
    }

    pub fn without_faces(mut self) -> Self {
        self.faces = None;
        self
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn faces(&self) -> Option<&FaceFlux> {
        self.faces.as_ref()
    }

    pub fn component(&self, axis: usize) -> ScalarField {
        ScalarField {
            spec: self.spec,
            values: if axis == 0 {
                self.x.clone()
            } else {
                self.y.clone()
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        let faces_ok = self
            .faces
            .as_ref()
            .is_none_or(|f| f.x.iter().chain(&f.y).all(|v| v.is_finite()));
        faces_ok && self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// `max |v|` over cells (Euclidean magnitude).
    pub fn sup_magnitude(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .fold(0.0, |m: f64, (a, b)| m.max(a.hypot(*b)))
    }

    /// Cell-based `L²` norm.
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        self.cell_inner(self, grid).sqrt()
    }

    pub fn cell_inner(&self, other: &Self, grid: &Grid) -> f64 {
        let s: f64 = self
            .x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| a * b)
            .chain(self.y.iter().zip(&other.y).map(|(a, b)| a * b))
            .sum();
        s * grid.cell_volume()
    }

    /// Face components if present, otherwise a reconstruction from cell values:
    /// interior faces average the two neighbours, boundary faces extrapolate
    /// linearly from the two nearest cells.
    pub fn face_values(&self, grid: &Grid) -> FaceFlux {
        match &self.faces {
            Some(f) => f.clone(),
            None => self.reconstruct_faces(grid),
        }
    }

    pub fn reconstruct_faces(&self, grid: &Grid) -> FaceFlux {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut faces = FaceFlux::zeros(grid);
        for j in 0..ny {
            let row = j * nx;
            for i in 1..nx {
                faces.x[grid.x_face(i, j)] = 0.5 * (self.x[row + i - 1] + self.x[row + i]);
            }
            faces.x[grid.x_face(0, j)] = 1.5 * self.x[row] - 0.5 * self.x[row + 1];
            faces.x[grid.x_face(nx, j)] = 1.5 * self.x[row + nx - 1] - 0.5 * self.x[row + nx - 2];
        }
        for i in 0..nx {
            for j in 1..ny {
                faces.y[grid.y_face(i, j)] =
                    0.5 * (self.y[grid.idx(i, j - 1)] + self.y[grid.idx(i, j)]);
            }
            faces.y[grid.y_face(i, 0)] =
                1.5 * self.y[grid.idx(i, 0)] - 0.5 * self.y[grid.idx(i, 1)];
            faces.y[grid.y_face(i, ny)] =
                1.5 * self.y[grid.idx(i, ny - 1)] - 0.5 * self.y[grid.idx(i, ny - 2)];
        }
        faces
    }

    /// Outward normal component on each boundary face.
    pub fn boundary_normal(&self, grid: &Grid) -> BoundaryFlux {
        self.face_values(grid).boundary_normal(grid)
    }

    fn combine(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        debug_assert_eq!(self.spec, other.spec);
        let faces = match (&self.faces, &other.faces) {
            (Some(a), Some(b)) => Some(a.combine(b, f)),
            _ => None,
        };
        Self {
            spec: self.spec,
            x: self
                .x
                .iter()
                .zip(&other.x)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            y: self
                .y
                .iter()
                .zip(&other.y)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            faces,
        }
    }

    /// Sum; face data survive only if both operands carry them.
    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, |a, b| a - b)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            spec: self.spec,
            x: self.x.iter().map(|&a| s * a).collect(),
            y: self.y.iter().map(|&a| s * a).collect(),
            faces: self.faces.as_ref().map(|f| f.map(|a| s * a)),
        }
    }
}
