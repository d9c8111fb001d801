//! Cell-centered finite-volume discretization of a rectangle `[0, Lx] x [0, Ly]`.
//!
//! Cells are stored row-major with `x` varying fastest: cell `(i, j)` lives at
//! index `j * nx + i` and has its center at `((i + 1/2) hx, (j + 1/2) hy)`.
//! Boundary faces are enumerated side by side (west, east, south, north), each
//! side ordered by increasing coordinate along the side.

mod field;
mod ops;
pub mod snapshot;

use std::fmt;

use thiserror::Error;

pub use field::{BoundaryFlux, FaceFlux, ScalarField, VectorField};
pub use ops::Norm;

/// Smallest admissible number of cells per direction.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("domain length {name} = {value} must be finite and positive")]
    BadLength { name: &'static str, value: f64 },
    #[error("cell count {name} = {value} is below the minimum of {min}")]
    TooFewCells {
        name: &'static str,
        value: usize,
        min: usize,
    },
    #[error("field lives on {found}, expected {expected}")]
    GridMismatch {
        expected: DomainSpec,
        found: DomainSpec,
    },
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("boundary flux has {found} entries but the grid has {expected} boundary faces")]
    MissingFlux { expected: usize, found: usize },
    #[error("norm exponent r = {0} must be at least 1")]
    BadExponent(f64),
}

/// Geometry of the rectangle and its resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

impl DomainSpec {
    pub fn new(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self, GridError> {
        let spec = Self { lx, ly, nx, ny };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize) -> Result<Self, GridError> {
        Self::new(1.0, 1.0, n, n)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        for (name, value) in [("Lx", self.lx), ("Ly", self.ly)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(GridError::BadLength { name, value });
            }
        }
        for (name, value) in [("nx", self.nx), ("ny", self.ny)] {
            if value < MIN_CELLS {
                return Err(GridError::TooFewCells {
                    name,
                    value,
                    min: MIN_CELLS,
                });
            }
        }
        let (hx, hy) = (self.lx / self.nx as f64, self.ly / self.ny as f64);
        if !(hx.is_finite() && hx > 0.0 && hy.is_finite() && hy > 0.0) {
            return Err(GridError::BadLength {
                name: "cell size",
                value: hx.min(hy),
            });
        }
        Ok(())
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{} cells on [0,{}]x[0,{}]",
            self.nx, self.ny, self.lx, self.ly
        )
    }
}

/// The four sides of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::West => [-1.0, 0.0],
            Side::East => [1.0, 0.0],
            Side::South => [0.0, -1.0],
            Side::North => [0.0, 1.0],
        }
    }

    /// Sign of the outward normal along its (single) nonzero axis.
    pub fn sign(self) -> f64 {
        match self {
            Side::West | Side::South => -1.0,
            Side::East | Side::North => 1.0,
        }
    }

    /// True for the sides whose normal points along `x`.
    pub fn is_x_side(self) -> bool {
        matches!(self, Side::West | Side::East)
    }
}

/// A boundary face together with its adjacent cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub side: Side,
    /// Position along the side (`j` on west/east, `i` on south/north).
    pub along: usize,
    /// Index of the adjacent cell.
    pub cell: usize,
    /// Index of the next cell inward, on the line normal to the face.
    pub inner: usize,
    /// Index of the second cell inward.
    pub inner2: usize,
    pub normal: [f64; 2],
    pub length: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: DomainSpec,
    hx: f64,
    hy: f64,
    faces: Vec<BoundaryFace>,
}

/// Builds the grid and its boundary-face table.
pub fn build_grid(spec: DomainSpec) -> Result<Grid, GridError> {
    Grid::new(spec)
}

impl Grid {
    pub fn new(spec: DomainSpec) -> Result<Self, GridError> {
        spec.validate()?;
        let (nx, ny) = (spec.nx, spec.ny);
        let hx = spec.lx / nx as f64;
        let hy = spec.ly / ny as f64;
        let idx = |i: usize, j: usize| j * nx + i;

        let mut faces = Vec::with_capacity(2 * (nx + ny));
        for side in Side::ALL {
            let count = if side.is_x_side() { ny } else { nx };
            for along in 0..count {
                let (cell, inner, inner2, center, length) = match side {
                    Side::West => (
                        idx(0, along),
                        idx(1, along),
                        idx(2, along),
                        [0.0, (along as f64 + 0.5) * hy],
                        hy,
                    ),
                    Side::East => (
                        idx(nx - 1, along),
                        idx(nx - 2, along),
                        idx(nx - 3, along),
                        [spec.lx, (along as f64 + 0.5) * hy],
                        hy,
                    ),
                    Side::South => (
                        idx(along, 0),
                        idx(along, 1),
                        idx(along, 2),
                        [(along as f64 + 0.5) * hx, 0.0],
                        hx,
                    ),
                    Side::North => (
                        idx(along, ny - 1),
                        idx(along, ny - 2),
                        idx(along, ny - 3),
                        [(along as f64 + 0.5) * hx, spec.ly],
                        hx,
                    ),
                };
                faces.push(BoundaryFace {
                    side,
                    along,
                    cell,
                    inner,
                    inner2,
                    normal: side.normal(),
                    length,
                    center,
                });
            }
        }
        Ok(Self {
            spec,
            hx,
            hy,
            faces,
        })
    }

    pub fn spec(&self) -> DomainSpec {
        self.spec
    }

    pub fn nx(&self) -> usize {
        self.spec.nx
    }

    pub fn ny(&self) -> usize {
        self.spec.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn cell_count(&self) -> usize {
        self.spec.nx * self.spec.ny
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }

    /// `|Ω|`.
    pub fn area(&self) -> f64 {
        self.spec.lx * self.spec.ly
    }

    /// `|∂Ω|`.
    pub fn perimeter(&self) -> f64 {
        2.0 * (self.spec.lx + self.spec.ly)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.spec.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [(i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy]
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.faces
    }

    pub fn boundary_face_count(&self) -> usize {
        self.faces.len()
    }

    /// Index into [`Self::boundary_faces`] of the face on `side` at position `along`.
    pub fn boundary_face_index(&self, side: Side, along: usize) -> usize {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        match side {
            Side::West => along,
            Side::East => ny + along,
            Side::South => 2 * ny + along,
            Side::North => 2 * ny + nx + along,
        }
    }

    /// Number of `x`-normal faces, `(nx + 1) * ny`.
    pub fn x_face_count(&self) -> usize {
        (self.spec.nx + 1) * self.spec.ny
    }

    /// Number of `y`-normal faces, `nx * (ny + 1)`.
    pub fn y_face_count(&self) -> usize {
        self.spec.nx * (self.spec.ny + 1)
    }

    /// `x`-normal face at `x = i hx`, `i` in `0..=nx`.
    #[inline]
    pub fn x_face(&self, i: usize, j: usize) -> usize {
        j * (self.spec.nx + 1) + i
    }

    /// `y`-normal face at `y = j hy`, `j` in `0..=ny`.
    #[inline]
    pub fn y_face(&self, i: usize, j: usize) -> usize {
        j * self.spec.nx + i
    }

    /// Index of a boundary face inside the matching face-flux array.
    pub fn face_slot(&self, face: &BoundaryFace) -> usize {
        match face.side {
            Side::West => self.x_face(0, face.along),
            Side::East => self.x_face(self.spec.nx, face.along),
            Side::South => self.y_face(face.along, 0),
            Side::North => self.y_face(face.along, self.spec.ny),
        }
    }

    /// Cell size normal to the given face.
    pub fn normal_spacing(&self, face: &BoundaryFace) -> f64 {
        if face.side.is_x_side() {
            self.hx
        } else {
            self.hy
        }
    }

    /// Fails unless `spec` matches this grid.
    pub fn check(&self, spec: &DomainSpec) -> Result<(), GridError> {
        if *spec == self.spec {
            Ok(())
        } else {
            Err(GridError::GridMismatch {
                expected: self.spec,
                found: *spec,
            })
        }
    }
}
