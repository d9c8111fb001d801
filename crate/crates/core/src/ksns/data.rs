use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::grid::{Grid, GridError, Norm, ScalarField, VectorField};

use super::SensitivitySpec;

type ForceFn = Arc<dyn Fn(f64, &Grid) -> VectorField + Send + Sync>;

/// Time-dependent body force `f(t, x)`.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// `e^{−rate t} · profile(x)`.
    Decaying {
        profile: VectorField,
        rate: f64,
    },
    Custom(ForceFn),
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Forcing::Zero"),
            Self::Decaying { rate, .. } => write!(f, "Forcing::Decaying(rate={rate})"),
            Self::Custom(_) => write!(f, "Forcing::Custom"),
        }
    }
}

impl Forcing {
    pub fn eval(&self, grid: &Grid, t: f64) -> VectorField {
        match self {
            Self::Zero => VectorField::zeros(grid),
            Self::Decaying { profile, rate } => profile.scaled((-rate * t).exp()).without_faces(),
            Self::Custom(f) => f(t, grid),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}

/// Initial data, potential gradient, body force and sensitivity.
#[derive(Debug, Clone)]
pub struct GivenData {
    pub n0: ScalarField,
    pub c0: ScalarField,
    pub u0: VectorField,
    /// `∇φ`, independent of time.
    pub phi_grad: VectorField,
    pub f: Forcing,
    pub s: SensitivitySpec,
}

/// How far the data are from the structural hypotheses on the initial
/// values: `∇c₀·ν = 0`, `∇·u₀ = 0` and `u₀ = 0` on the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisResiduals {
    /// Largest one-sided `|∇c₀·ν|` over boundary faces.
    pub c0_flux: f64,
    /// Discrete `L²` norm of `∇·u₀`, from interior face averages with zero
    /// normal flux through the boundary.
    pub u0_divergence: f64,
    /// Largest extrapolated `|u₀|` over boundary faces.
    pub u0_trace: f64,
}

impl GivenData {
    pub fn check(&self, grid: &Grid) -> Result<(), GridError> {
        grid.check(self.n0.spec())?;
        grid.check(self.c0.spec())?;
        grid.check(self.u0.spec())?;
        grid.check(self.phi_grad.spec())
    }

    pub fn hypothesis_residuals(&self, grid: &Grid) -> Result<HypothesisResiduals, GridError> {
        self.check(grid)?;
        let c0_flux = grid.boundary_normal_derivative(&self.c0)?.sup_abs();
        let div = grid.divergence_interior(&self.u0.reconstruct_faces(grid));
        let u0_divergence = grid.norm(&div, Norm::Lp(2.0))?;
        let mut u0_trace: f64 = 0.0;
        for face in grid.boundary_faces() {
            let ux = grid.extrapolate_to_face(self.u0.x(), face);
            let uy = grid.extrapolate_to_face(self.u0.y(), face);
            u0_trace = u0_trace.max(ux.hypot(uy));
        }
        Ok(HypothesisResiduals {
            c0_flux,
            u0_divergence,
            u0_trace,
        })
    }

    /// Data difference `self − other`, used for the Lipschitz experiment.
    /// The sensitivity and potential of `self` are kept.
    pub fn difference(&self, other: &GivenData) -> GivenData {
        let (a, b) = (self.f.clone(), other.f.clone());
        let f = match (&a, &b) {
            (Forcing::Zero, Forcing::Zero) => Forcing::Zero,
            _ => Forcing::Custom(Arc::new(move |t, g| a.eval(g, t).sub(&b.eval(g, t)))),
        };
        GivenData {
            n0: self.n0.sub(&other.n0),
            c0: self.c0.sub(&other.c0),
            u0: self.u0.sub(&other.u0).without_faces(),
            phi_grad: self.phi_grad.clone(),
            f,
            s: self.s.clone(),
        }
    }

    /// Every field multiplied by `s`; the sensitivity and potential are kept.
    pub fn scaled(&self, s: f64) -> GivenData {
        let f = match &self.f {
            Forcing::Zero => Forcing::Zero,
            Forcing::Decaying { profile, rate } => Forcing::Decaying {
                profile: profile.scaled(s),
                rate: *rate,
            },
            Forcing::Custom(g) => {
                let g = g.clone();
                Forcing::Custom(Arc::new(move |t, grid| g(t, grid).scaled(s)))
            }
        };
        GivenData {
            n0: self.n0.scaled(s),
            c0: self.c0.scaled(s),
            u0: self.u0.scaled(s),
            phi_grad: self.phi_grad.clone(),
            f,
            s: self.s.clone(),
        }
    }
}

/// Named initial-data families. Coordinates are normalized by the side
/// lengths, so every preset satisfies `∇c₀·ν = 0` on any rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataPreset {
    /// `n₀ = c₀ = level`, `u₀ = 0`.
    Constant { level: f64 },
    /// `n₀ = level + amp cos(πx)`, `c₀ = level + amp cos(πy)`, `u₀ = 0`.
    Cosine { level: f64, amp: f64 },
    /// `n₀ = level + amp cos(πx)`, `c₀ = amp (1 + cos(πy))`, and a no-slip
    /// vortex of size `amp` for `u₀`.
    Mixed { level: f64, amp: f64 },
}

/// Potential presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialPreset {
    Zero,
    /// `φ = −g y`, a downward pull of strength `g`.
    Gravity(f64),
}

/// Force presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForcingPreset {
    Zero,
    /// A smooth profile of size `amp` damped by `e^{−rate t}`.
    Decaying {
        amp: f64,
        rate: f64,
    },
}

/// `curl(sin²(πx/Lx) sin²(πy/Ly))`: divergence-free and zero on the boundary.
pub fn vortex(grid: &Grid, amp: f64) -> VectorField {
    let s = grid.spec();
    let (kx, ky) = (PI / s.lx, PI / s.ly);
    VectorField::from_fn(grid, |x, y| {
        let (sx, sy) = ((kx * x).sin(), (ky * y).sin());
        [
            amp * 2.0 * ky * sx * sx * sy * (ky * y).cos(),
            -amp * 2.0 * kx * sy * sy * sx * (kx * x).cos(),
        ]
    })
}

pub fn build_data(
    grid: &Grid,
    data: DataPreset,
    potential: PotentialPreset,
    forcing: ForcingPreset,
    s: SensitivitySpec,
) -> GivenData {
    let spec = grid.spec();
    let (kx, ky) = (PI / spec.lx, PI / spec.ly);
    let (n0, c0, u0) = match data {
        DataPreset::Constant { level } => (
            ScalarField::constant(grid, level),
            ScalarField::constant(grid, level),
            VectorField::zeros(grid),
        ),
        DataPreset::Cosine { level, amp } => (
            ScalarField::from_fn(grid, |x, _| level + amp * (kx * x).cos()),
            ScalarField::from_fn(grid, |_, y| level + amp * (ky * y).cos()),
            VectorField::zeros(grid),
        ),
        DataPreset::Mixed { level, amp } => (
            ScalarField::from_fn(grid, |x, _| level + amp * (kx * x).cos()),
            ScalarField::from_fn(grid, |_, y| amp * (1.0 + (ky * y).cos())),
            vortex(grid, amp),
        ),
    };
    let phi_grad = match potential {
        PotentialPreset::Zero => VectorField::zeros(grid),
        PotentialPreset::Gravity(g) => VectorField::constant(grid, [0.0, -g]),
    };
    let f = match forcing {
        ForcingPreset::Zero => Forcing::Zero,
        ForcingPreset::Decaying { amp, rate } => Forcing::Decaying {
            profile: VectorField::from_fn(grid, |x, y| {
                [amp * (ky * y).sin(), amp * (kx * x).sin()]
            }),
            rate,
        },
    };
    GivenData {
        n0,
        c0,
        u0,
        phi_grad,
        f,
        s,
    }
}
