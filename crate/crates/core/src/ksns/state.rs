use crate::grid::{BoundaryFlux, Grid, GridError, ScalarField, VectorField};
use crate::linstep::{helmholtz_project, LinStepError, LinearSolverOptions};

use super::GivenData;

/// Boundary fluxes used by the last step for the cell density: the outward
/// diffusive flux `∇n·ν` imposed in the implicit solve and the chemotactic
/// flux `nS∇c·ν` it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRecord {
    pub diffusive: BoundaryFlux,
    pub chemotactic: BoundaryFlux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub n: ScalarField,
    pub c: ScalarField,
    /// Velocity; stepped states carry divergence-free face fluxes.
    pub u: VectorField,
    /// Mean of `n₀`, fixed at the start of a run.
    pub n_bar0: f64,
    pub(crate) record: Option<BoundaryRecord>,
    pub(crate) pressure: Option<ScalarField>,
}

/// Deviations from the attracting constant state:
/// `ñ = n − n̄₀`, `c̃ = c − (1 − e^{−t}) n̄₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedState {
    pub t: f64,
    pub n: ScalarField,
    pub c: ScalarField,
    pub u: VectorField,
    pub n_bar0: f64,
}

/// `(1 − e^{−t}) n̄₀`, the spatially constant part of `c`.
pub fn c_offset(t: f64, n_bar0: f64) -> f64 {
    -(-t).exp_m1() * n_bar0
}

impl SimState {
    pub fn new(t: f64, n: ScalarField, c: ScalarField, u: VectorField, n_bar0: f64) -> Self {
        Self {
            t,
            n,
            c,
            u,
            n_bar0,
            record: None,
            pressure: None,
        }
    }

    /// State at `t = 0`. The initial velocity is projected so that it carries
    /// divergence-free face fluxes; for admissible `u₀` this changes it by
    /// discretization error only.
    pub fn initial(
        grid: &Grid,
        data: &GivenData,
        opts: &LinearSolverOptions,
    ) -> Result<Self, LinStepError> {
        data.check(grid)?;
        let n_bar0 = grid.mean(&data.n0)?;
        let proj = helmholtz_project(grid, &data.u0, opts)?;
        let mut s = Self::new(0.0, data.n0.clone(), data.c0.clone(), proj.field, n_bar0);
        s.pressure = Some(proj.pressure);
        Ok(s)
    }

    pub fn boundary_record(&self) -> Option<&BoundaryRecord> {
        self.record.as_ref()
    }

    pub fn check(&self, grid: &Grid) -> Result<(), GridError> {
        grid.check(self.n.spec())?;
        grid.check(self.c.spec())?;
        grid.check(self.u.spec())
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.n.is_finite() && self.c.is_finite() && self.u.is_finite()
    }

    /// Copy without solver caches, for storing in trajectories.
    pub fn snapshot(&self) -> Self {
        Self::new(
            self.t,
            self.n.clone(),
            self.c.clone(),
            self.u.clone(),
            self.n_bar0,
        )
    }
}

pub fn shift_transform(state: &SimState) -> ShiftedState {
    let nb = state.n_bar0;
    let off = c_offset(state.t, nb);
    ShiftedState {
        t: state.t,
        n: state.n.map(|v| v - nb),
        c: state.c.map(|v| v - off),
        u: state.u.clone(),
        n_bar0: nb,
    }
}

pub fn unshift(shifted: &ShiftedState) -> SimState {
    let nb = shifted.n_bar0;
    let off = c_offset(shifted.t, nb);
    SimState::new(
        shifted.t,
        shifted.n.map(|v| v + nb),
        shifted.c.map(|v| v + off),
        shifted.u.clone(),
        nb,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DomainSpec;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::new(DomainSpec::unit_square(16).unwrap()).unwrap()
    }

    #[test]
    fn constant_density_shifts_to_zero() {
        let g = grid();
        let s = SimState::new(
            0.7,
            ScalarField::constant(&g, 2.5),
            ScalarField::constant(&g, 1.0),
            VectorField::zeros(&g),
            2.5,
        );
        assert!(shift_transform(&s).n.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cosine_density_has_exact_mean() {
        let g = Grid::new(DomainSpec::unit_square(64).unwrap()).unwrap();
        let n0 = ScalarField::from_fn(&g, |x, _| 2.0 + 0.1 * (PI * x).cos());
        let nb = g.mean(&n0).unwrap();
        assert!((nb - 2.0).abs() < 1e-12);
        let s = SimState::new(0.0, n0, ScalarField::zeros(&g), VectorField::zeros(&g), nb);
        assert!(g.mean(&shift_transform(&s).n).unwrap().abs() < 1e-12);
    }

    #[test]
    fn offset_matches_formula() {
        assert_eq!(c_offset(0.0, 3.0), 0.0);
        assert!((c_offset(1.0, 2.0) - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn shift_round_trip_within_an_ulp(
            vals in proptest::collection::vec(-10.0f64..10.0, 64),
            t in 0.0f64..5.0,
            nb in 0.0f64..5.0,
        ) {
            let g = Grid::new(DomainSpec::unit_square(4).unwrap()).unwrap();
            let n = ScalarField::from_values(&g, vals[..16].to_vec()).unwrap();
            let c = ScalarField::from_values(&g, vals[16..32].to_vec()).unwrap();
            let u = VectorField::from_components(
                &g,
                ScalarField::from_values(&g, vals[32..48].to_vec()).unwrap(),
                ScalarField::from_values(&g, vals[48..].to_vec()).unwrap(),
            ).unwrap();
            let s = SimState::new(t, n, c, u, nb);
            let back = unshift(&shift_transform(&s));
            prop_assert_eq!(&back.u, &s.u);
            for (a, b) in back.n.values().iter().zip(s.n.values())
                .chain(back.c.values().iter().zip(s.c.values()))
            {
                let ulp = 2.0 * f64::EPSILON * a.abs().max(b.abs()).max(nb.max(1.0));
                prop_assert!((a - b).abs() <= ulp);
            }
        }
    }
}
