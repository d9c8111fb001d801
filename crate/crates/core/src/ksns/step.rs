use crate::diagnostics::{
    boundary_residual, compatibility_check, DiagnosticsConfig, DiagnosticsRow, DiagnosticsSeries,
};
use crate::grid::{FaceFlux, Grid, ScalarField, VectorField};
use crate::linstep::{step_neumann_heat, step_shifted_heat, step_stokes, LinearSolverOptions};

use super::flux::{add_faces, advection, advective_flux, chemotactic_flux, momentum_advection};
use super::{BoundaryRecord, GivenData, KsnsError, SimState};

/// Residual above which startup hypothesis and compatibility checks warn.
pub const HYPOTHESIS_WARN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub solver: LinearSolverOptions,
    /// Any `|n|`, `|c|` or `|u|` above this aborts as blow-up.
    pub ceiling: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            solver: LinearSolverOptions::default(),
            ceiling: 1e6,
        }
    }
}

fn blow_up(state: &SimState, t: f64, reason: impl Into<String>) -> KsnsError {
    KsnsError::BlowUp {
        t,
        reason: reason.into(),
        last: Box::new(state.clone()),
        series: None,
    }
}

fn faces_finite(f: &FaceFlux) -> bool {
    f.x.iter().chain(&f.y).all(|v| v.is_finite())
}

/// One step from `state` with the explicit terms evaluated at `frozen`.
fn advance(
    grid: &Grid,
    state: &SimState,
    frozen: &SimState,
    data: &GivenData,
    dt: f64,
    opts: &StepOptions,
) -> Result<SimState, KsnsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(KsnsError::BadTimeStep(dt));
    }
    state.check(grid)?;
    frozen.check(grid)?;
    let t = state.t;
    let nb = state.n_bar0;
    let solver = &opts.solver;
    let velocity = frozen.u.face_values(grid);

    // Cell density: diffusion implicit, chemotaxis and transport as a
    // divergence-form flux whose boundary part is the nonlinear flux condition.
    let chem = chemotactic_flux(grid, &frozen.n, &frozen.c, &data.s, t)?;
    let chem_faces = chem.faces().expect("chemotactic flux carries faces");
    let transport = add_faces(
        chem_faces,
        &advective_flux(grid, &velocity, frozen.n.values()),
    );
    if !faces_finite(&transport) {
        return Err(blow_up(state, t, "non-finite density flux"));
    }
    let record = BoundaryRecord {
        diffusive: transport.boundary_normal(grid),
        chemotactic: chem_faces.boundary_normal(grid),
    };
    let f_b = VectorField::zeros(grid).with_faces(grid, transport)?;
    let n_tilde = state.n.map(|v| v - nb);
    let zero = ScalarField::zeros(grid);
    let (n_tilde_new, _) = step_neumann_heat(grid, &n_tilde, &f_b, &zero, dt, solver)?;

    // Signal: (1 − Δ) implicit in unshifted form, so its mass follows the
    // implicit-Euler recursion exactly.
    let rhs = frozen.n.sub(&advection(grid, &velocity, &frozen.c));
    let (c_new, _) = step_shifted_heat(grid, &state.c, &rhs, dt, solver)?;

    // Fluid, driven by the new density deviation.
    let buoyancy = VectorField::from_components(
        grid,
        n_tilde_new.zip_map(&data.phi_grad.component(0), |a, b| a * b),
        n_tilde_new.zip_map(&data.phi_grad.component(1), |a, b| a * b),
    )?;
    let force = buoyancy
        .sub(&momentum_advection(grid, &frozen.u)?)
        .add(&data.f.eval(grid, t));
    if !force.is_finite() {
        return Err(blow_up(state, t, "non-finite fluid force"));
    }
    let stokes = step_stokes(grid, &state.u, &force, dt, solver, state.pressure.as_ref())?;

    let next = SimState {
        t: t + dt,
        n: n_tilde_new.map(|v| v + nb),
        c: c_new,
        u: stokes.field,
        n_bar0: nb,
        record: Some(record),
        pressure: Some(stokes.pressure),
    };
    if !next.is_finite() {
        return Err(blow_up(state, next.t, "non-finite state"));
    }
    let sup = next
        .n
        .sup_abs()
        .max(next.c.sup_abs())
        .max(next.u.sup_magnitude());
    if sup > opts.ceiling {
        return Err(blow_up(
            state,
            next.t,
            format!("sup norm {sup:.3e} exceeds ceiling {:.3e}", opts.ceiling),
        ));
    }
    Ok(next)
}

/// One IMEX step: density, then signal, then fluid, each with its linear
/// part implicit and the nonlinear terms taken from `state`.
pub fn step(
    grid: &Grid,
    state: &SimState,
    data: &GivenData,
    dt: f64,
    opts: &StepOptions,
) -> Result<SimState, KsnsError> {
    advance(grid, state, state, data, dt, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    pub k_max: usize,
    /// Stop once the combined increment drops below this.
    pub tol: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            k_max: 8,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub state: SimState,
    pub iterations: usize,
    /// Ratio of the last two increments; absent with fewer than two.
    pub contraction: Option<f64>,
    pub increments: Vec<f64>,
    pub converged: bool,
}

fn relative_change(grid: &Grid, new: &[f64], old: &[f64]) -> f64 {
    let vol = grid.cell_volume();
    let diff: f64 = new
        .iter()
        .zip(old)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        * vol;
    let size: f64 = new.iter().map(|a| a * a).sum::<f64>() * vol;
    diff.sqrt() / size.sqrt().max(1.0)
}

/// Largest relative `L²` change over `n`, `c` and the two velocity
/// components; norms below one are not used as denominators.
fn increment(grid: &Grid, new: &SimState, old: &SimState) -> f64 {
    [
        relative_change(grid, new.n.values(), old.n.values()),
        relative_change(grid, new.c.values(), old.c.values()),
        relative_change(grid, new.u.x(), old.u.x()),
        relative_change(grid, new.u.y(), old.u.y()),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Fixed-point iteration of the step map `v ↦ Φv`, starting from the current
/// state; `k_max = 1` reproduces [`step`].
pub fn picard_step(
    grid: &Grid,
    state: &SimState,
    data: &GivenData,
    dt: f64,
    picard: &PicardOptions,
    opts: &StepOptions,
) -> Result<PicardOutcome, KsnsError> {
    if picard.k_max == 0 {
        return Err(KsnsError::BadPicard);
    }
    let mut iterate = state.clone();
    let mut increments = Vec::new();
    let mut converged = false;
    for _ in 0..picard.k_max {
        let next = advance(grid, state, &iterate, data, dt, opts)?;
        let inc = increment(grid, &next, &iterate);
        increments.push(inc);
        iterate = next;
        if inc < picard.tol {
            converged = true;
            break;
        }
    }
    let contraction = match increments.as_slice() {
        [.., prev, last] if *prev > 0.0 => Some(last / prev),
        _ => None,
    };
    Ok(PicardOutcome {
        state: iterate,
        iterations: increments.len(),
        contraction,
        increments,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub step: StepOptions,
    pub picard: Option<PicardOptions>,
    /// Keep every `k`-th state (and the initial one) in the trajectory; 0
    /// keeps none.
    pub snapshot_stride: usize,
    pub diagnostics: DiagnosticsConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub initial: SimState,
    pub trajectory: Vec<SimState>,
    pub series: DiagnosticsSeries,
    pub final_state: SimState,
    pub warnings: Vec<String>,
}

/// Advances the data to `t_end` in steps of `dt` (the last step is shortened
/// if `dt` does not divide `t_end`), recording one diagnostics row per step.
pub fn run(
    grid: &Grid,
    data: &GivenData,
    t_end: f64,
    dt: f64,
    options: &RunOptions,
) -> Result<RunOutput, KsnsError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(KsnsError::BadTimeStep(dt));
    }
    if !(t_end.is_finite() && t_end >= dt) {
        return Err(KsnsError::BadHorizon { t_end, dt });
    }
    data.check(grid)?;

    let mut warnings = Vec::new();
    let hyp = data.hypothesis_residuals(grid)?;
    for (what, value) in [
        ("|grad c0 . nu| on the boundary", hyp.c0_flux),
        ("divergence of u0", hyp.u0_divergence),
        ("|u0| on the boundary", hyp.u0_trace),
    ] {
        if value > HYPOTHESIS_WARN {
            warnings.push(format!("initial data: {what} is {value:.3e}"));
        }
    }
    let cfg = &options.diagnostics;
    if cfg.needs_compatibility() {
        let r = compatibility_check(grid, &data.n0, &data.c0, &data.s)?;
        if r > HYPOTHESIS_WARN {
            warnings.push(format!(
                "compatibility condition violated: boundary residual {r:.3e}"
            ));
        }
    }

    let initial = SimState::initial(grid, data, &options.step.solver)?;
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let stride = options.snapshot_stride;
    let mut trajectory = Vec::new();
    if stride > 0 {
        trajectory.push(initial.snapshot());
    }
    let mut series = DiagnosticsSeries::default();
    let mut state = initial.clone();
    for k in 1..=steps {
        let t_next = if k == steps { t_end } else { k as f64 * dt };
        let h = t_next - state.t;
        let outcome = match &options.picard {
            Some(p) => picard_step(grid, &state, data, h, p, &options.step),
            None => step(grid, &state, data, h, &options.step).map(|s| PicardOutcome {
                state: s,
                iterations: 1,
                contraction: None,
                increments: Vec::new(),
                converged: true,
            }),
        };
        let mut outcome = match outcome {
            Ok(o) => o,
            Err(KsnsError::BlowUp {
                t, reason, last, ..
            }) => {
                return Err(KsnsError::BlowUp {
                    t,
                    reason,
                    last,
                    series: Some(Box::new(series)),
                })
            }
            Err(e) => return Err(e),
        };
        outcome.state.t = t_next;
        state = outcome.state;
        let bc = boundary_residual(grid, &state, data)?;
        series.rows.push(DiagnosticsRow::from_state(
            grid,
            &state,
            bc,
            outcome.iterations,
            outcome.contraction,
        )?);
        if stride > 0 && k % stride == 0 {
            trajectory.push(state.snapshot());
        }
    }
    Ok(RunOutput {
        initial,
        trajectory,
        series,
        final_state: state,
        warnings,
    })
}
