//! Verdict quantities: mass identities, decay fits, proxy norms for the data
//! and solution spaces, negativity, boundary and compatibility residuals, and
//! the Lipschitz experiment.
//!
//! The Besov norms of the analysis are replaced by integer-order discrete
//! Sobolev norms (`W^{2,r}` for `n₀`, `u₀`; `W^{3,r}` for `c₀`), built from the
//! grid's difference stencils. They are homogeneous of degree one and are only
//! ever compared through ratios and trends.

use std::io::{self, Write};

use thiserror::Error;

use crate::eigen::rectangle_lambdas;
use crate::grid::{DomainSpec, Grid, GridError, Norm, ScalarField, VectorField};
use crate::ksns::{
    boundary_chemotactic, c_offset, run, shift_transform, GivenData, KsnsError, RunOptions,
    SensitivitySpec, ShiftedState, SimState,
};

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("diagnostics series is empty")]
    EmptySeries,
    #[error("decay fit needs at least 5 positive samples in the window, found {found}")]
    TooFewSamples { found: usize },
    #[error("invalid diagnostics setting `{key}`: {reason}")]
    InvalidConfig { key: &'static str, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Run(#[from] KsnsError),
    #[error("trajectories of the two runs do not line up ({0} vs {1} frames)")]
    MisalignedRuns(usize, usize),
}

/// Exponents and rates of the weighted solution space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    pub r: f64,
    pub q: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for DiagnosticsConfig {
    /// `r = q = 4` with rates set for the unit square.
    fn default() -> Self {
        Self::for_domain(&DomainSpec::unit_square(4).expect("valid"), 4.0, 4.0)
    }
}

impl DiagnosticsConfig {
    /// Rates `λ₁ = λ₂ = ½ min{1, λ_N/q}` for the given rectangle.
    pub fn for_domain(spec: &DomainSpec, r: f64, q: f64) -> Self {
        let (lambda_n, _) = rectangle_lambdas(spec);
        let lambda1 = 0.5 * (1.0f64).min(lambda_n / q);
        Self {
            r,
            q,
            lambda1,
            lambda2: lambda1,
        }
    }

    /// `1/r + 2/q < 1`, where the initial data must satisfy the boundary
    /// compatibility condition.
    pub fn needs_compatibility(&self) -> bool {
        1.0 / self.r + 2.0 / self.q < 1.0
    }

    /// Checks the admissible ranges against the Poincaré constants of the
    /// domain.
    pub fn validate(&self, lambda_n: f64, lambda_d: f64) -> Result<(), DiagError> {
        let bad = |key, reason: String| Err(DiagError::InvalidConfig { key, reason });
        if !(self.r.is_finite() && self.r > 2.0) {
            return bad("r", format!("must exceed 2, got {}", self.r));
        }
        if !(self.q.is_finite() && self.q > 2.0) {
            return bad("q", format!("must exceed 2, got {}", self.q));
        }
        let critical = 1.0 / self.r + 2.0 / self.q;
        if (critical - 1.0).abs() <= 1e-12 {
            return bad(
                "r",
                format!("1/r + 2/q = 1 is excluded (r = {}, q = {})", self.r, self.q),
            );
        }
        let upper1 = (1.0f64).min(lambda_n / self.q);
        if !(self.lambda1 > 0.0 && self.lambda1 < upper1) {
            return bad(
                "lambda1",
                format!("must lie in (0, {upper1:.6}), got {}", self.lambda1),
            );
        }
        let upper2 = lambda_d / self.q;
        if !(self.lambda2 >= 0.0 && self.lambda2 <= self.lambda1 && self.lambda2 < upper2) {
            return bad(
                "lambda2",
                format!(
                    "must lie in [0, {}] and below {upper2:.6}, got {}",
                    self.lambda1, self.lambda2
                ),
            );
        }
        Ok(())
    }
}

pub const CSV_HEADER: &str = "t,mass_n,mass_c,sup_n_dev,sup_c_dev,sup_u,min_n,min_c,bc_residual,neg_energy_n,neg_energy_c,picard_iters,contraction";

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass_n: f64,
    pub mass_c: f64,
    /// `sup |n − n̄₀|`
    pub sup_n_dev: f64,
    /// `sup |c − (1 − e^{−t}) n̄₀|`
    pub sup_c_dev: f64,
    pub sup_u: f64,
    pub min_n: f64,
    pub min_c: f64,
    pub bc_residual: f64,
    pub neg_energy_n: f64,
    pub neg_energy_c: f64,
    pub picard_iters: usize,
    pub contraction: Option<f64>,
}

/// `∫ min{0, f}²`
pub fn negative_energy(grid: &Grid, f: &ScalarField) -> f64 {
    f.values().iter().map(|&v| v.min(0.0).powi(2)).sum::<f64>() * grid.cell_volume()
}

impl DiagnosticsRow {
    pub fn from_state(
        grid: &Grid,
        state: &SimState,
        bc_residual: f64,
        picard_iters: usize,
        contraction: Option<f64>,
    ) -> Result<Self, GridError> {
        state.check(grid)?;
        let nb = state.n_bar0;
        let off = c_offset(state.t, nb);
        let sup_dev =
            |f: &ScalarField, m: f64| f.values().iter().fold(0.0f64, |a, v| a.max((v - m).abs()));
        Ok(Self {
            t: state.t,
            mass_n: grid.integrate(&state.n)?,
            mass_c: grid.integrate(&state.c)?,
            sup_n_dev: sup_dev(&state.n, nb),
            sup_c_dev: sup_dev(&state.c, off),
            sup_u: state.u.sup_magnitude(),
            min_n: state.n.min(),
            min_c: state.c.min(),
            bc_residual,
            neg_energy_n: negative_energy(grid, &state.n),
            neg_energy_c: negative_energy(grid, &state.c),
            picard_iters,
            contraction,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
}

impl DiagnosticsSeries {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// `(t, value)` pairs of one column.
    pub fn column(&self, f: impl Fn(&DiagnosticsRow) -> f64) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.t, f(r))).collect()
    }

    pub fn max_of(&self, f: impl Fn(&DiagnosticsRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_of(&self, f: impl Fn(&DiagnosticsRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(f64::INFINITY, f64::min)
    }

    /// Writes the CSV header and one row per step, in scientific notation with
    /// fifteen significant digits. An absent contraction estimate is written
    /// as zero.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{:.14e},{},{:.14e}",
                r.t,
                r.mass_n,
                r.mass_c,
                r.sup_n_dev,
                r.sup_c_dev,
                r.sup_u,
                r.min_n,
                r.min_c,
                r.bc_residual,
                r.neg_energy_n,
                r.neg_energy_c,
                r.picard_iters,
                r.contraction.unwrap_or(0.0),
            )?;
        }
        Ok(())
    }
}

/// Largest deviations of the recorded masses from `∫n₀` and from
/// `e^{−t}∫c₀ + (1 − e^{−t})∫n₀`.
pub fn mass_identity_residuals(
    series: &DiagnosticsSeries,
    mass_n0: f64,
    mass_c0: f64,
) -> Result<(f64, f64), DiagError> {
    if series.is_empty() {
        return Err(DiagError::EmptySeries);
    }
    let mut rn: f64 = 0.0;
    let mut rc: f64 = 0.0;
    for r in &series.rows {
        let decay = (-r.t).exp();
        let target = decay * mass_c0 + (1.0 - decay) * mass_n0;
        rn = rn.max((r.mass_n - mass_n0).abs());
        rc = rc.max((r.mass_c - target).abs());
    }
    Ok((rn, rc))
}

/// Largest deviation of the recorded signal mass from the θ-scheme recursion
/// `(1 + θτ) M_c' = (1 − (1 − θ)τ) M_c + τ M_n`, with `τ` the recorded step.
pub fn mass_recursion_residual(
    series: &DiagnosticsSeries,
    mass_n0: f64,
    mass_c0: f64,
    theta: f64,
) -> Result<f64, DiagError> {
    if series.is_empty() {
        return Err(DiagError::EmptySeries);
    }
    let (mut t, mut mn, mut mc) = (0.0, mass_n0, mass_c0);
    let mut worst: f64 = 0.0;
    for r in &series.rows {
        let tau = r.t - t;
        let expect = ((1.0 - (1.0 - theta) * tau) * mc + tau * mn) / (1.0 + theta * tau);
        worst = worst.max((r.mass_c - expect).abs());
        (t, mn, mc) = (r.t, r.mass_n, r.mass_c);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub amplitude: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    /// Window actually used, after truncation at the first non-positive
    /// sample.
    pub window: (f64, f64),
    pub samples: usize,
    pub truncated: bool,
}

/// Least-squares fit of `log v = log A − rate · t` over the samples with
/// `t_a ≤ t ≤ t_b`. The window ends before the first non-positive value.
pub fn fit_decay_rate(samples: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit, DiagError> {
    let mut pts = Vec::new();
    let mut truncated = false;
    for &(t, v) in samples
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
    {
        if !(v > 0.0 && v.is_finite()) {
            truncated = true;
            break;
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < 5 {
        return Err(DiagError::TooFewSamples { found: pts.len() });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sty: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        amplitude: intercept.exp(),
        residual,
        window: (pts[0].0, pts[pts.len() - 1].0),
        samples: pts.len(),
        truncated,
    })
}

fn check_exponents(cfg: &DiagnosticsConfig) -> Result<(), DiagError> {
    for (key, v) in [("r", cfg.r), ("q", cfg.q)] {
        if !(v.is_finite() && v >= 1.0) {
            return Err(DiagError::InvalidConfig {
                key,
                reason: format!("exponent must be at least 1, got {v}"),
            });
        }
    }
    Ok(())
}

fn sobolev_power(grid: &Grid, f: &ScalarField, order: usize, r: f64) -> f64 {
    grid.sobolev_power(f, order, r)
}

fn vector_sobolev(grid: &Grid, v: &VectorField, order: usize, r: f64) -> f64 {
    (sobolev_power(grid, &v.component(0), order, r)
        + sobolev_power(grid, &v.component(1), order, r))
    .powf(1.0 / r)
}

fn vector_lp(grid: &Grid, v: &VectorField, r: f64) -> f64 {
    (grid.lp_power(v.x(), r) + grid.lp_power(v.y(), r)).powf(1.0 / r)
}

/// Proxy for the data size `⟦(n₀, c₀, u₀, f)⟧`:
/// `‖n₀‖_{W^{2,r}} + ‖c₀‖_{W^{3,r}} + ‖u₀‖_{W^{2,r}} + ‖e^{λ₂t} f‖_{L^q(0,T;L^r)}`,
/// with the time integral a left Riemann sum at spacing `dt`. Vector norms
/// add the component powers.
pub fn smallness_functional(
    grid: &Grid,
    data: &GivenData,
    cfg: &DiagnosticsConfig,
    t_quad: f64,
    dt: f64,
) -> Result<f64, DiagError> {
    check_exponents(cfg)?;
    data.check(grid)?;
    let r = cfg.r;
    let mut total = grid.norm(&data.n0, Norm::w2(r))?
        + grid.norm(&data.c0, Norm::w3(r))?
        + vector_sobolev(grid, &data.u0, 2, r);
    if !data.f.is_zero() && t_quad > 0.0 && dt > 0.0 {
        let steps = (t_quad / dt).round().max(1.0) as usize;
        let mut acc = 0.0;
        for k in 0..steps {
            let t = k as f64 * dt;
            let f = data.f.eval(grid, t);
            acc += dt * ((cfg.lambda2 * t).exp() * vector_lp(grid, &f, r)).powf(cfg.q);
        }
        total += acc.powf(1.0 / cfg.q);
    }
    Ok(total)
}

/// Proxy for the weighted solution norm `‖(ñ, c̃, u)‖_𝔼` over a trajectory of
/// shifted states: time-`L^q` sums of `e^{λ₁t}‖ñ‖_{W^{2,r}}`,
/// `e^{λ₁t}‖c̃‖_{W^{3,r}}`, `e^{λ₂t}‖u‖_{W^{2,r}}` and of the weighted first
/// time differences in `L^r`, `W^{1,r}`, `L^r`. Sums are left Riemann sums on
/// the frame times; a single frame gets unit weight and no time-difference
/// terms.
pub fn weighted_solution_norm(
    grid: &Grid,
    frames: &[ShiftedState],
    cfg: &DiagnosticsConfig,
) -> Result<f64, DiagError> {
    check_exponents(cfg)?;
    if frames.is_empty() {
        return Err(DiagError::EmptySeries);
    }
    let (r, q) = (cfg.r, cfg.q);
    let weights: Vec<f64> = if frames.len() == 1 {
        vec![1.0]
    } else {
        frames.windows(2).map(|w| w[1].t - w[0].t).collect()
    };
    let mut sums = [0.0f64; 6];
    for (i, &w) in weights.iter().enumerate() {
        let fr = &frames[i];
        grid.check(fr.n.spec())?;
        let e1 = (cfg.lambda1 * fr.t).exp();
        let e2 = (cfg.lambda2 * fr.t).exp();
        sums[0] += w * (e1 * grid.norm(&fr.n, Norm::w2(r))?).powf(q);
        sums[1] += w * (e1 * grid.norm(&fr.c, Norm::w3(r))?).powf(q);
        sums[2] += w * (e2 * vector_sobolev(grid, &fr.u, 2, r)).powf(q);
        if let Some(next) = frames.get(i + 1) {
            let dn = next.n.sub(&fr.n).scaled(1.0 / w);
            let dc = next.c.sub(&fr.c).scaled(1.0 / w);
            let du = next.u.sub(&fr.u).scaled(1.0 / w);
            sums[3] += w * (e1 * grid.norm(&dn, Norm::Lp(r))?).powf(q);
            sums[4] += w * (e1 * grid.norm(&dc, Norm::w1(r))?).powf(q);
            sums[5] += w * (e2 * vector_lp(grid, &du, r)).powf(q);
        }
    }
    Ok(sums.iter().map(|s| s.powf(1.0 / q)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityReport {
    pub min_n: f64,
    pub min_c: f64,
    pub max_neg_energy_n: f64,
    pub max_neg_energy_c: f64,
}

impl NegativityReport {
    pub fn from_series(series: &DiagnosticsSeries) -> Result<Self, DiagError> {
        if series.is_empty() {
            return Err(DiagError::EmptySeries);
        }
        Ok(Self {
            min_n: series.min_of(|r| r.min_n),
            min_c: series.min_of(|r| r.min_c),
            max_neg_energy_n: series.max_of(|r| r.neg_energy_n),
            max_neg_energy_c: series.max_of(|r| r.neg_energy_c),
        })
    }
}

/// Minima of `n`, `c` and largest negative-part energies `∫ min{0,·}²` over a
/// trajectory.
pub fn negativity_report(grid: &Grid, traj: &[SimState]) -> Result<NegativityReport, DiagError> {
    if traj.is_empty() {
        return Err(DiagError::EmptySeries);
    }
    let mut rep = NegativityReport {
        min_n: f64::INFINITY,
        min_c: f64::INFINITY,
        max_neg_energy_n: 0.0,
        max_neg_energy_c: 0.0,
    };
    for s in traj {
        s.check(grid)?;
        rep.min_n = rep.min_n.min(s.n.min());
        rep.min_c = rep.min_c.min(s.c.min());
        rep.max_neg_energy_n = rep.max_neg_energy_n.max(negative_energy(grid, &s.n));
        rep.max_neg_energy_c = rep.max_neg_energy_c.max(negative_energy(grid, &s.c));
    }
    Ok(rep)
}

/// Largest `|∇n·ν − nS∇c·ν|` over boundary faces. Stepped states report the
/// fluxes the step actually used; other states are evaluated from their
/// fields with one-sided derivatives.
pub fn boundary_residual(
    grid: &Grid,
    state: &SimState,
    data: &GivenData,
) -> Result<f64, GridError> {
    state.check(grid)?;
    if let Some(rec) = state.boundary_record() {
        return Ok(rec
            .diffusive
            .0
            .iter()
            .zip(&rec.chemotactic.0)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
    }
    flux_mismatch(grid, &state.n, &state.c, &data.s, state.t)
}

fn flux_mismatch(
    grid: &Grid,
    n: &ScalarField,
    c: &ScalarField,
    s: &SensitivitySpec,
    t: f64,
) -> Result<f64, GridError> {
    let diffusive = grid.boundary_normal_derivative(n)?;
    let chem = boundary_chemotactic(grid, n, c, s, t)?;
    Ok(diffusive
        .0
        .iter()
        .zip(&chem.0)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Largest `|∇n₀·ν − n₀S(0)∇c₀·ν|` over boundary faces.
pub fn compatibility_check(
    grid: &Grid,
    n0: &ScalarField,
    c0: &ScalarField,
    s: &SensitivitySpec,
) -> Result<f64, GridError> {
    flux_mismatch(grid, n0, c0, s, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    /// `‖diff‖_𝔼 / ⟦Δdata⟧`, or 0 when both vanish.
    pub ratio: f64,
    /// `⟦Δdata⟧`
    pub data_gap: f64,
    /// `‖diff‖_𝔼`
    pub solution_gap: f64,
    /// Set when the data coincide and the ratio is the guarded `0/0`.
    pub degenerate: bool,
}

/// Runs `base` and `perturbed` to `t_end` and compares the shifted
/// trajectories in the weighted norm against the data distance. The runs use
/// `options` (its snapshot stride sets the frame spacing; 0 means every step)
/// and execute on two threads when `threads ≥ 2`.
pub fn lipschitz_experiment(
    grid: &Grid,
    base: &GivenData,
    perturbed: &GivenData,
    cfg: &DiagnosticsConfig,
    t_end: f64,
    dt: f64,
    options: &RunOptions,
    threads: usize,
) -> Result<LipschitzReport, DiagError> {
    let mut opts = options.clone();
    if opts.snapshot_stride == 0 {
        opts.snapshot_stride = 1;
    }
    let (a, b) = if threads >= 2 {
        std::thread::scope(|s| {
            let ha = s.spawn(|| run(grid, base, t_end, dt, &opts));
            let hb = s.spawn(|| run(grid, perturbed, t_end, dt, &opts));
            (
                ha.join().expect("run thread panicked"),
                hb.join().expect("run thread panicked"),
            )
        })
    } else {
        (
            run(grid, base, t_end, dt, &opts),
            run(grid, perturbed, t_end, dt, &opts),
        )
    };
    let (a, b) = (a?, b?);
    if a.trajectory.len() != b.trajectory.len() {
        return Err(DiagError::MisalignedRuns(
            a.trajectory.len(),
            b.trajectory.len(),
        ));
    }
    let frames: Vec<ShiftedState> = a
        .trajectory
        .iter()
        .zip(&b.trajectory)
        .map(|(x, y)| {
            let (sx, sy) = (shift_transform(x), shift_transform(y));
            ShiftedState {
                t: sx.t,
                n: sx.n.sub(&sy.n),
                c: sx.c.sub(&sy.c),
                u: sx.u.sub(&sy.u).without_faces(),
                n_bar0: sx.n_bar0 - sy.n_bar0,
            }
        })
        .collect();
    let solution_gap = weighted_solution_norm(grid, &frames, cfg)?;
    let data_gap = smallness_functional(grid, &base.difference(perturbed), cfg, t_end, dt)?;
    let (ratio, degenerate) = if data_gap == 0.0 {
        (0.0, solution_gap == 0.0)
    } else {
        (solution_gap / data_gap, false)
    };
    Ok(LipschitzReport {
        ratio,
        data_gap,
        solution_gap,
        degenerate,
    })
}
