//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ksns::cli::{
    negativity_checks, Check, BC_TOL, LIPSCHITZ_AGREEMENT, MASS_C_TOL_CN, MASS_C_TOL_EULER,
    MASS_N_TOL,
};
use ksns::diagnostics::{
    boundary_residual, compatibility_check, fit_decay_rate, lipschitz_experiment,
    mass_identity_residuals, DiagnosticsConfig, DiagnosticsSeries,
};
use ksns::eigen::{lambda_dirichlet, lambda_neumann};
use ksns::grid::{BoundaryFlux, DomainSpec, Grid, ScalarField, VectorField};
use ksns::ksns::{
    build_data, run, step, vortex, DataPreset, ForcingPreset, GivenData, KsnsError, PicardOptions,
    PotentialPreset, RunOptions, RunOutput, SensitivitySpec, SimState, StepOptions,
};
use ksns::linstep::{helmholtz_project, step_neumann_heat, step_stokes, LinearSolverOptions};

/// Resolution of the nonlinear runs.
const N_RUN: usize = 32;
/// Resolution where `h = 1/64` is prescribed.
const N_FINE: usize = 64;
/// Empirical bound on the Lipschitz ratio.
const LIPSCHITZ_CEILING: f64 = 10.0;

type Outcome = Result<(bool, String), String>;
type DataFamily<'a> = Box<dyn Fn(f64) -> GivenData + 'a>;

fn unit(n: usize) -> Grid {
    Grid::new(DomainSpec::unit_square(n).expect("valid spec")).expect("valid grid")
}

fn solver(theta: f64) -> LinearSolverOptions {
    LinearSolverOptions {
        theta,
        ..LinearSolverOptions::default()
    }
}

fn options(theta: f64, picard: Option<PicardOptions>) -> RunOptions {
    RunOptions {
        step: StepOptions {
            solver: solver(theta),
            ..StepOptions::default()
        },
        picard,
        ..RunOptions::default()
    }
}

/// `n₀ = 2 + a cos(πx)`, `c₀ = 2 + a cos(πy)`, `u₀ = 0`, `S = I`.
fn small_data(grid: &Grid, amp: f64) -> GivenData {
    build_data(
        grid,
        DataPreset::Cosine { level: 2.0, amp },
        PotentialPreset::Zero,
        ForcingPreset::Zero,
        SensitivitySpec::Identity,
    )
}

/// Mixed data of amplitude `10⁻²` with the rotated sensitivity.
fn rotation_data(grid: &Grid) -> GivenData {
    build_data(
        grid,
        DataPreset::Mixed {
            level: 2.0,
            amp: 1e-2,
        },
        PotentialPreset::Zero,
        ForcingPreset::Zero,
        SensitivitySpec::rotation(1.0, 0.5),
    )
}

struct Runs {
    grid: Grid,
    /// Rotation run at `(θ, dt)`.
    rotation: Vec<((f64, f64), RunOutput)>,
    small: Option<RunOutput>,
    /// Largest boundary residual seen in any run.
    bc_max: f64,
    bc_runs: usize,
}

impl Runs {
    fn new() -> Self {
        Self {
            grid: unit(N_RUN),
            rotation: Vec::new(),
            small: None,
            bc_max: 0.0,
            bc_runs: 0,
        }
    }

    fn note(&mut self, series: &DiagnosticsSeries) {
        self.bc_max = self.bc_max.max(series.max_of(|r| r.bc_residual));
        self.bc_runs += 1;
    }

    fn rotation(&mut self, theta: f64, dt: f64) -> Result<&RunOutput, String> {
        if let Some(i) = self.rotation.iter().position(|(k, _)| *k == (theta, dt)) {
            return Ok(&self.rotation[i].1);
        }
        let data = rotation_data(&self.grid);
        let out =
            run(&self.grid, &data, 2.0, dt, &options(theta, None)).map_err(|e| e.to_string())?;
        self.note(&out.series);
        self.rotation.push(((theta, dt), out));
        Ok(&self.rotation.last().expect("just pushed").1)
    }

    fn small(&mut self) -> Result<&RunOutput, String> {
        if self.small.is_none() {
            let data = small_data(&self.grid, 1e-2);
            let out = run(&self.grid, &data, 3.0, 1e-3, &options(1.0, None))
                .map_err(|e| e.to_string())?;
            self.note(&out.series);
            self.small = Some(out);
        }
        Ok(self.small.as_ref().expect("set above"))
    }
}

fn poincare() -> Outcome {
    let g = unit(N_FINE);
    let start = Instant::now();
    let n = lambda_neumann(&g, 1e-10).map_err(|e| e.to_string())?;
    let d = lambda_dirichlet(&g, 1e-10).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let checks = [
        Check::at_most("|lambda_N - pi^2|", (n.lambda - PI * PI).abs(), 0.05),
        Check::at_most("|lambda_D - 2pi^2|", (d.lambda - 2.0 * PI * PI).abs(), 0.1),
        Check::at_most("seconds", secs, 5.0),
    ];
    Ok(summarize(&checks))
}

fn gauss() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let nx = rng.gen_range(4..40);
        let ny = rng.gen_range(4..40);
        let lx = rng.gen_range(0.2..5.0);
        let ly = rng.gen_range(0.2..5.0);
        let g = Grid::new(DomainSpec::new(lx, ly, nx, ny).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let amp = 10f64.powi(rng.gen_range(-3..4));
        let values: Vec<f64> = (0..g.cell_count())
            .map(|_| amp * rng.gen_range(-1.0..1.0))
            .collect();
        let f = ScalarField::from_values(&g, values).map_err(|e| e.to_string())?;
        let flux = BoundaryFlux(
            (0..g.boundary_face_count())
                .map(|_| amp * rng.gen_range(-1.0..1.0))
                .collect(),
        );
        let lap = g
            .laplacian_with_flux(&f, &flux)
            .map_err(|e| e.to_string())?;
        let lhs = g.integrate(&lap).map_err(|e| e.to_string())?;
        let rhs: f64 = g
            .boundary_faces()
            .iter()
            .zip(&flux.0)
            .map(|(face, v)| v * face.length)
            .sum();
        let scale = lap.values().iter().map(|v| v.abs()).sum::<f64>() * g.cell_volume()
            + g.boundary_faces()
                .iter()
                .zip(&flux.0)
                .map(|(face, v)| (v * face.length).abs())
                .sum::<f64>();
        let rel = (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
    }
    Ok(summarize(&[Check::at_most(
        "max |int lap - sum flux| / scale",
        worst,
        1e-12,
    )]))
}

fn neumann_steady() -> Outcome {
    let g = unit(N_FINE);
    let fb = VectorField::constant(&g, [1.0, 0.0]);
    let fe = ScalarField::zeros(&g);
    let opts = solver(1.0);
    let mut u = ScalarField::zeros(&g);
    let mean0 = g.mean(&u).map_err(|e| e.to_string())?;
    let mut drift: f64 = 0.0;
    for _ in 0..10_000 {
        u = step_neumann_heat(&g, &u, &fb, &fe, 1e-3, &opts)
            .map_err(|e| e.to_string())?
            .0;
        drift = drift.max((g.mean(&u).map_err(|e| e.to_string())? - mean0).abs());
    }
    let target = ScalarField::from_fn(&g, |x, _| x - 0.5);
    Ok(summarize(&[
        Check::at_most("sup |U - (x - 1/2)|", u.sub(&target).sup_abs(), 1e-2),
        Check::at_most("mean drift", drift, 1e-10),
    ]))
}

fn semigroup() -> Outcome {
    let opts = solver(1.0);
    let g = unit(N_FINE);
    let start = Instant::now();
    let mut u = ScalarField::from_fn(&g, |x, _| (PI * x).cos());
    let (zv, zs) = (VectorField::zeros(&g), ScalarField::zeros(&g));
    let dt = 1e-3;
    let mut samples = Vec::new();
    for k in 1..=1500 {
        u = step_neumann_heat(&g, &u, &zv, &zs, dt, &opts)
            .map_err(|e| e.to_string())?
            .0;
        samples.push((k as f64 * dt, u.sup_abs()));
    }
    let heat_secs = start.elapsed().as_secs_f64();
    let heat = fit_decay_rate(&samples, (0.5, 1.5)).map_err(|e| e.to_string())?;

    let g = unit(N_RUN);
    let start = Instant::now();
    let mut v = helmholtz_project(&g, &vortex(&g, 1.0), &opts)
        .map_err(|e| e.to_string())?
        .field;
    let zero = VectorField::zeros(&g);
    let mut guess = None;
    let mut samples = Vec::new();
    for k in 1..=300 {
        let p = step_stokes(&g, &v, &zero, dt, &opts, guess.as_ref()).map_err(|e| e.to_string())?;
        v = p.field;
        guess = Some(p.pressure);
        samples.push((k as f64 * dt, v.l2_norm(&g)));
    }
    let stokes_secs = start.elapsed().as_secs_f64();
    let stokes = fit_decay_rate(&samples, (0.1, 0.3)).map_err(|e| e.to_string())?;
    Ok(summarize(&[
        Check::at_most(
            "|heat rate / pi^2 - 1|",
            (heat.rate / (PI * PI) - 1.0).abs(),
            0.05,
        ),
        Check::at_least("stokes rate", stokes.rate, 0.8 * 2.0 * PI * PI),
        Check::at_most("heat seconds", heat_secs, 30.0),
        Check::at_most("stokes seconds", stokes_secs, 30.0),
    ]))
}

fn n_mass(runs: &mut Runs) -> Outcome {
    let g = runs.grid.clone();
    let data = rotation_data(&g);
    let out = runs.rotation(1.0, 1e-3)?;
    let mn0 = g.integrate(&data.n0).map_err(|e| e.to_string())?;
    let mc0 = g.integrate(&data.c0).map_err(|e| e.to_string())?;
    let (rn, _) = mass_identity_residuals(&out.series, mn0, mc0).map_err(|e| e.to_string())?;
    Ok(summarize(&[Check::at_most(
        "relative drift of int n",
        rn / mn0,
        MASS_N_TOL,
    )]))
}

fn c_mass(runs: &mut Runs) -> Outcome {
    let g = runs.grid.clone();
    let data = rotation_data(&g);
    let mn0 = g.integrate(&data.n0).map_err(|e| e.to_string())?;
    let mc0 = g.integrate(&data.c0).map_err(|e| e.to_string())?;
    let mut residual = |theta, dt| -> Result<f64, String> {
        let out = runs.rotation(theta, dt)?;
        Ok(mass_identity_residuals(&out.series, mn0, mc0)
            .map_err(|e| e.to_string())?
            .1)
    };
    let euler = residual(1.0, 1e-3)?;
    let cn = residual(0.5, 1e-3)?;
    let half = residual(1.0, 5e-4)?;
    let ratio = euler / half;
    Ok(summarize(&[
        Check::at_most("implicit Euler residual", euler, MASS_C_TOL_EULER),
        Check::at_most("Crank-Nicolson residual", cn, MASS_C_TOL_CN),
        Check::at_least("halving ratio", ratio, 1.8),
        Check::at_most("halving ratio", ratio, 2.2),
    ]))
}

fn stabilization(runs: &mut Runs) -> Outcome {
    let out = runs.small()?;
    let cfg =
        DiagnosticsConfig::for_domain(&DomainSpec::unit_square(N_RUN).expect("valid"), 4.0, 4.0);
    let lambda1 = 0.5 * (1.0f64).min(PI * PI / 4.0);
    assert_eq!(cfg.lambda1, lambda1);
    let window = (1.0, 3.0);
    let n =
        fit_decay_rate(&out.series.column(|r| r.sup_n_dev), window).map_err(|e| e.to_string())?;
    let c =
        fit_decay_rate(&out.series.column(|r| r.sup_c_dev), window).map_err(|e| e.to_string())?;
    Ok(summarize(&[
        Check::at_least("rate(n)", n.rate, lambda1),
        Check::at_least("rate(c)", c.rate, lambda1),
        Check::at_least("rate(n) vs 0.8 lambda_N [empirical]", n.rate, 0.8 * PI * PI),
    ]))
}

fn nonnegativity(runs: &mut Runs) -> Outcome {
    let g = runs.grid.clone();
    let mut checks = Vec::new();
    let small = small_data(&g, 1e-2);
    let out = runs.small()?;
    checks.extend(negativity_checks(&small, &out.series).map_err(|e| e.to_string())?);
    let rot = rotation_data(&g);
    let out = runs.rotation(1.0, 1e-3)?;
    checks.extend(negativity_checks(&rot, &out.series).map_err(|e| e.to_string())?);
    Ok(summarize(&checks))
}

fn boundary_condition(runs: &mut Runs) -> Outcome {
    let g = unit(N_FINE);
    let state = SimState::new(
        0.0,
        ScalarField::constant(&g, 1.0),
        ScalarField::from_fn(&g, |x, _| (PI * x).cos()),
        VectorField::zeros(&g),
        1.0,
    );
    let mut data = small_data(&g, 0.0);
    data.s = SensitivitySpec::rotation(0.0, 1.0);
    let detector = boundary_residual(&g, &state, &data).map_err(|e| e.to_string())?;
    Ok(summarize(&[
        Check::at_most(
            format!("max bc_residual over {} runs", runs.bc_runs),
            runs.bc_max,
            BC_TOL,
        ),
        Check::at_most("|violation - pi|", (detector - PI).abs(), 0.05),
    ]))
}

fn compatibility() -> Outcome {
    let g = unit(N_FINE);
    let h = g.hx();
    let n0 = ScalarField::constant(&g, 1.0);
    let c0 = ScalarField::from_fn(&g, |x, _| (PI * x).cos());
    let rot = compatibility_check(&g, &n0, &c0, &SensitivitySpec::rotation(0.0, 1.0))
        .map_err(|e| e.to_string())?;
    let id =
        compatibility_check(&g, &n0, &c0, &SensitivitySpec::Identity).map_err(|e| e.to_string())?;
    Ok(summarize(&[
        Check::at_most("|rotation residual - pi|", (rot - PI).abs(), 0.05),
        // Second-order one-sided stencil on cos(πx): the error constant is π³.
        Check::at_most(
            "identity residual / (pi^3 h^2)",
            id / (PI.powi(3) * h * h),
            1.0,
        ),
    ]))
}

fn lipschitz() -> Outcome {
    let g = unit(N_RUN);
    let mut opts = options(1.0, None);
    opts.snapshot_stride = 1;
    let mut checks = Vec::new();
    let scenarios: [(&str, f64, DataFamily); 2] = [
        ("small", 3.0, Box::new(|d| small_data(&g, 1e-2 + d))),
        (
            "rotation",
            2.0,
            Box::new(|d| {
                build_data(
                    &g,
                    DataPreset::Mixed {
                        level: 2.0,
                        amp: 1e-2 + d,
                    },
                    PotentialPreset::Zero,
                    ForcingPreset::Zero,
                    SensitivitySpec::rotation(1.0, 0.5),
                )
            }),
        ),
    ];
    for (name, t_end, make) in &scenarios {
        let base = make(0.0);
        let mut ratios = Vec::new();
        for delta in [1e-3, 1e-4] {
            let rep = lipschitz_experiment(
                &g,
                &base,
                &make(delta),
                &opts.diagnostics,
                *t_end,
                1e-3,
                &opts,
                1,
            )
            .map_err(|e| e.to_string())?;
            ratios.push(rep.ratio);
        }
        let spread = (ratios[0] - ratios[1]).abs() / ratios[0].max(ratios[1]);
        checks.push(Check::at_most(
            format!("{name} ratio spread"),
            spread,
            LIPSCHITZ_AGREEMENT,
        ));
        checks.push(Check::at_most(
            format!("{name} ratio"),
            ratios[0].max(ratios[1]),
            LIPSCHITZ_CEILING,
        ));
    }
    Ok(summarize(&checks))
}

fn picard(runs: &mut Runs) -> Outcome {
    let g = runs.grid.clone();
    let opts = options(1.0, Some(PicardOptions::default()));
    let out = run(&g, &small_data(&g, 1e-2), 3.0, 1e-3, &opts).map_err(|e| e.to_string())?;
    runs.note(&out.series);
    let estimates: Vec<f64> = out
        .series
        .rows
        .iter()
        .filter_map(|r| r.contraction)
        .collect();
    let worst = estimates.iter().cloned().fold(0.0f64, f64::max);
    let mut checks = vec![
        Check::below("max contraction", worst, 1.0),
        Check::at_least("steps with an estimate", estimates.len() as f64, 1.0),
    ];

    // 100× amplitude: either a finite run or a clean blow-up.
    let clean = match run(&g, &small_data(&g, 1.0), 3.0, 1e-3, &opts) {
        Ok(out) => {
            runs.note(&out.series);
            let finite = out.final_state.is_finite()
                && out.series.rows.iter().all(|r| {
                    [r.mass_n, r.mass_c, r.sup_n_dev, r.sup_c_dev, r.sup_u]
                        .iter()
                        .all(|v| v.is_finite())
                });
            let big = out
                .series
                .rows
                .iter()
                .filter_map(|r| r.contraction)
                .fold(0.0f64, f64::max);
            eprintln!("    100x amplitude: finished, max contraction {big:.3e}");
            finite
        }
        Err(KsnsError::BlowUp { last, t, .. }) => {
            eprintln!("    100x amplitude: blow-up at t = {t}");
            last.is_finite()
        }
        Err(e) => return Err(e.to_string()),
    };
    checks.push(Check::at_least(
        "100x amplitude clean",
        f64::from(u8::from(clean)),
        1.0,
    ));
    Ok(summarize(&checks))
}

fn fixed_point(runs: &mut Runs) -> Outcome {
    let g = runs.grid.clone();
    let mut checks = Vec::new();
    for (name, s) in [
        ("identity", SensitivitySpec::Identity),
        ("scaled", SensitivitySpec::Scaled(2.0)),
        ("rotation", SensitivitySpec::rotation(1.0, 0.5)),
    ] {
        let data = build_data(
            &g,
            DataPreset::Constant { level: 2.0 },
            PotentialPreset::Zero,
            ForcingPreset::Zero,
            s,
        );
        let opts = StepOptions::default();
        let mut state = SimState::initial(&g, &data, &opts.solver).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            state = step(&g, &state, &data, 1e-3, &opts).map_err(|e| e.to_string())?;
        }
        let dev = state
            .n
            .sub(&data.n0)
            .sup_abs()
            .max(state.c.sub(&data.c0).sup_abs())
            .max(state.u.sup_magnitude());
        checks.push(Check::at_most(format!("{name} sup deviation"), dev, 1e-9));
    }
    Ok(summarize(&checks))
}

fn summarize(checks: &[Check]) -> (bool, String) {
    let pass = checks.iter().all(Check::passed);
    let detail = checks
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join("; ");
    (pass, detail)
}

fn main() {
    let mut runs = Runs::new();
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let record = |id, name, f: &mut dyn FnMut() -> Outcome, results: &mut Vec<_>| {
        eprintln!("criterion {id}: {name}");
        let start = Instant::now();
        let out = f();
        results.push((id, name, out, start.elapsed().as_secs_f64()));
    };
    record(1, "poincare_constants", &mut poincare, &mut results);
    record(2, "discrete_gauss_identity", &mut gauss, &mut results);
    record(
        3,
        "neumann_heat_steady_state",
        &mut neumann_steady,
        &mut results,
    );
    record(4, "semigroup_decay", &mut semigroup, &mut results);
    record(
        5,
        "n_mass_conservation",
        &mut || n_mass(&mut runs),
        &mut results,
    );
    record(
        6,
        "c_mass_identity",
        &mut || c_mass(&mut runs),
        &mut results,
    );
    record(
        7,
        "exponential_stabilization",
        &mut || stabilization(&mut runs),
        &mut results,
    );
    record(
        8,
        "non_negativity",
        &mut || nonnegativity(&mut runs),
        &mut results,
    );
    record(
        10,
        "compatibility_detector",
        &mut compatibility,
        &mut results,
    );
    record(11, "lipschitz_continuity", &mut lipschitz, &mut results);
    record(
        12,
        "picard_contraction",
        &mut || picard(&mut runs),
        &mut results,
    );
    record(
        13,
        "constant_fixed_point",
        &mut || fixed_point(&mut runs),
        &mut results,
    );
    record(
        9,
        "boundary_condition",
        &mut || boundary_condition(&mut runs),
        &mut results,
    );
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (id, name, out, secs) in &results {
        let (pass, detail) = match out {
            Ok((pass, detail)) => (*pass, detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} [{id:>2}] {name} ({secs:.1}s): {detail}");
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
