//! Command-line front end: configuration, scenario orchestration and file
//! output.

mod config;

pub use config::{
    load_config, parse_config, ConfigError, DataKind, ForcingKind, PotentialKind, RunConfig,
    SensitivityKind,
};

use std::ffi::OsString;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{
    fit_decay_rate, lipschitz_experiment, mass_identity_residuals, DiagError, DiagnosticsSeries,
    LipschitzReport, NegativityReport,
};
use crate::eigen::{lambda_dirichlet, lambda_neumann, rectangle_lambdas};
use crate::grid::snapshot::write_snapshot;
use crate::grid::{Grid, ScalarField};
use crate::ksns::{build_data, run, GivenData, KsnsError, SimState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;

/// Used when neither `--out`, `KSNS_OUT` nor the config names a directory.
pub const DEFAULT_OUT_DIR: &str = "ksns-out";

/// Relative drift allowed in `∫n`.
pub const MASS_N_TOL: f64 = 1e-10;
/// Largest deviation of `∫c` from its closed form, implicit Euler.
pub const MASS_C_TOL_EULER: f64 = 5e-3;
/// Same for Crank–Nicolson.
pub const MASS_C_TOL_CN: f64 = 5e-5;
pub const BC_TOL: f64 = 1e-12;
/// Lower bound on `min n`, `min c` relative to the initial sup.
pub const MIN_TOL: f64 = 1e-8;
/// Bound on the negative-part energies relative to the squared initial sup.
pub const NEG_ENERGY_TOL: f64 = 1e-16;
/// Agreement of the two Lipschitz ratios.
pub const LIPSCHITZ_AGREEMENT: f64 = 0.2;

#[derive(Debug, Parser)]
#[command(
    name = "ksns",
    about = "Chemotaxis-fluid numerical laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured scenario and check the conservation invariants.
    Run(Common),
    /// Print `lambda_N,lambda_D,h,iterations,residual` for the domain.
    Eigen(Common),
    /// Fit decay rates of the deviations from the constant state.
    Decay(Common),
    /// Compare solution and data distances for two perturbation sizes.
    Lipschitz(Common),
    /// Check non-negativity of density and signal.
    Nonneg(Common),
    /// Print the version.
    Version,
}

#[derive(Debug, Clone, Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
    #[arg(long = "snapshot-stride")]
    snapshot_stride: Option<usize>,
}

/// One verdict line: `PASS name value <= limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
    Below,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            limit,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::Below,
            limit,
        }
    }

    pub fn passed(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.value <= self.limit,
            Relation::AtLeast => self.value >= self.limit,
            Relation::Below => self.value < self.limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Below => "<",
        };
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{verdict} {} {:.6e} {rel} {:.6e}",
            self.name, self.value, self.limit
        )
    }
}

/// Output directory: `--out`, then `KSNS_OUT`, then the config, then
/// [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(flag: Option<&Path>, env: Option<&str>, config: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Invariant checks on a finished run: `∫n` drift, `∫c` against its closed
/// form, boundary residual and non-negativity.
pub fn invariant_checks(
    grid: &Grid,
    data: &GivenData,
    series: &DiagnosticsSeries,
    theta: f64,
) -> Result<Vec<Check>, DiagError> {
    let mn0 = grid.integrate(&data.n0)?;
    let mc0 = grid.integrate(&data.c0)?;
    let (rn, rc) = mass_identity_residuals(series, mn0, mc0)?;
    let c_tol = if theta == 1.0 {
        MASS_C_TOL_EULER
    } else {
        MASS_C_TOL_CN
    };
    let mut checks = vec![
        Check::at_most(
            "mass_n_drift",
            rn / mn0.abs().max(f64::MIN_POSITIVE),
            MASS_N_TOL,
        ),
        Check::at_most("mass_c_identity", rc, c_tol),
        Check::at_most("bc_residual", series.max_of(|r| r.bc_residual), BC_TOL),
    ];
    checks.extend(negativity_checks(data, series)?);
    Ok(checks)
}

/// Minima and negative-part energies against the initial sup of `n₀`, `c₀`.
pub fn negativity_checks(
    data: &GivenData,
    series: &DiagnosticsSeries,
) -> Result<Vec<Check>, DiagError> {
    let rep = NegativityReport::from_series(series)?;
    let scale = data.n0.sup_abs().max(data.c0.sup_abs());
    Ok(vec![
        Check::at_least("min_n", rep.min_n, -MIN_TOL * scale),
        Check::at_least("min_c", rep.min_c, -MIN_TOL * scale),
        Check::at_most(
            "neg_energy_n",
            rep.max_neg_energy_n,
            NEG_ENERGY_TOL * scale * scale,
        ),
        Check::at_most(
            "neg_energy_c",
            rep.max_neg_energy_c,
            NEG_ENERGY_TOL * scale * scale,
        ),
    ])
}

enum Failure {
    Config(String),
    BlowUp(String),
    Other(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Other(e.to_string())
    }
}

impl From<crate::grid::snapshot::SnapshotError> for Failure {
    fn from(e: crate::grid::snapshot::SnapshotError) -> Self {
        Self::Other(e.to_string())
    }
}

impl From<crate::grid::GridError> for Failure {
    fn from(e: crate::grid::GridError) -> Self {
        Self::Other(e.to_string())
    }
}

impl From<DiagError> for Failure {
    fn from(e: DiagError) -> Self {
        match e {
            DiagError::Run(k) => k.into(),
            other => Self::Other(other.to_string()),
        }
    }
}

impl From<KsnsError> for Failure {
    fn from(e: KsnsError) -> Self {
        match e {
            KsnsError::BlowUp { .. } => Self::BlowUp(e.to_string()),
            other => Self::Other(other.to_string()),
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Reports go to `out`, errors and warnings to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Version => {
            let _ = writeln!(out, "ksns {}", env!("CARGO_PKG_VERSION"));
            return EXIT_OK;
        }
        Command::Eigen(c) => cmd_eigen(c, out),
        Command::Run(c) => cmd_run(c, out, err),
        Command::Decay(c) => cmd_decay(c, out, err),
        Command::Lipschitz(c) => cmd_lipschitz(c, out, err),
        Command::Nonneg(c) => cmd_nonneg(c, out, err),
    };
    match result {
        Ok(checks) => {
            for c in &checks {
                let _ = writeln!(out, "{c}");
            }
            if checks.iter().all(Check::passed) {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(Failure::Config(msg)) => {
            let _ = writeln!(err, "config error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::BlowUp(msg)) => {
            let _ = writeln!(out, "FAIL {msg}");
            EXIT_BLOW_UP
        }
        Err(Failure::Other(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_CHECK_FAILED
        }
    }
}

struct Scenario {
    cfg: RunConfig,
    grid: Grid,
    data: GivenData,
    out_dir: PathBuf,
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(k) = common.snapshot_stride {
        cfg.stride = k;
    }
    Ok(cfg)
}

fn prepare(common: &Common) -> Result<Scenario, Failure> {
    let cfg = load(common)?;
    let env = std::env::var("KSNS_OUT").ok();
    let out_dir = resolve_out_dir(
        common.out.as_deref(),
        env.as_deref(),
        cfg.out_dir.as_deref(),
    );
    let grid = Grid::new(cfg.domain)?;
    let data = build_data(
        &grid,
        cfg.data_preset(),
        cfg.potential_preset(),
        cfg.forcing_preset(),
        cfg.sensitivity_spec(),
    );
    fs::create_dir_all(&out_dir)?;
    fs::write(out_dir.join("resolved.ini"), cfg.echo())?;
    Ok(Scenario {
        cfg,
        grid,
        data,
        out_dir,
    })
}

fn write_series(path: &Path, series: &DiagnosticsSeries) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path)?);
    series.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_state(dir: &Path, grid: &Grid, state: &SimState, index: usize) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    let ux = state.u.component(0);
    let uy = state.u.component(1);
    let fields: [(&str, &ScalarField); 4] =
        [("n", &state.n), ("c", &state.c), ("ux", &ux), ("uy", &uy)];
    for (name, field) in fields {
        let path = dir.join(format!("{name}_{index:06}.txt"));
        let mut w = BufWriter::new(File::create(path)?);
        write_snapshot(&mut w, grid, field, name, state.t)?;
        w.flush()?;
    }
    Ok(())
}

/// Runs the scenario, writing the CSV and snapshots; a blow-up still leaves
/// the partial CSV and the last valid state on disk.
fn simulate(s: &Scenario, err: &mut dyn Write) -> Result<DiagnosticsSeries, Failure> {
    let opts = s.cfg.run_options();
    let csv = s.out_dir.join("diagnostics.csv");
    let snaps = s.out_dir.join("snapshots");
    match run(&s.grid, &s.data, s.cfg.t_end, s.cfg.dt, &opts) {
        Ok(output) => {
            for w in &output.warnings {
                let _ = writeln!(err, "warning: {w}");
            }
            write_series(&csv, &output.series)?;
            if opts.snapshot_stride > 0 {
                for (k, state) in output.trajectory.iter().enumerate() {
                    write_state(&snaps, &s.grid, state, k * opts.snapshot_stride)?;
                }
            }
            Ok(output.series)
        }
        Err(KsnsError::BlowUp {
            t,
            reason,
            last,
            series,
        }) => {
            if let Some(series) = &series {
                write_series(&csv, series)?;
            }
            write_state(&s.out_dir.join("blowup"), &s.grid, &last, 0)?;
            Err(Failure::BlowUp(format!("blow-up at t = {t}: {reason}")))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(c: &Common, out: &mut dyn Write, err: &mut dyn Write) -> Result<Vec<Check>, Failure> {
    let s = prepare(c)?;
    let _ = write!(out, "{}", s.cfg.echo());
    let _ = writeln!(out);
    let series = simulate(&s, err)?;
    Ok(invariant_checks(&s.grid, &s.data, &series, s.cfg.theta)?)
}

fn cmd_nonneg(
    c: &Common,
    _out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Vec<Check>, Failure> {
    let s = prepare(c)?;
    let series = simulate(&s, err)?;
    let mut checks = negativity_checks(&s.data, &series)?;
    checks.push(Check::at_most(
        "bc_residual",
        series.max_of(|r| r.bc_residual),
        BC_TOL,
    ));
    Ok(checks)
}

fn cmd_decay(c: &Common, out: &mut dyn Write, err: &mut dyn Write) -> Result<Vec<Check>, Failure> {
    let s = prepare(c)?;
    let series = simulate(&s, err)?;
    let lambda1 = s.cfg.diagnostics.lambda1;
    let n_fit = fit_decay_rate(&series.column(|r| r.sup_n_dev), s.cfg.window)?;
    let c_fit = fit_decay_rate(&series.column(|r| r.sup_c_dev), s.cfg.window)?;
    let (lambda_n, _) = rectangle_lambdas(&s.cfg.domain);
    // Recorded for reference only; it does not enter the exit code.
    let _ = writeln!(
        out,
        "INFO rate_n {:.6e} vs 0.8 lambda_N {:.6e}",
        n_fit.rate,
        0.8 * lambda_n
    );
    Ok(vec![
        Check::at_least("rate_n_dev", n_fit.rate, lambda1),
        Check::at_least("rate_c_dev", c_fit.rate, lambda1),
    ])
}

/// Data whose amplitude is raised by `delta`.
fn perturbed(s: &Scenario, delta: f64) -> GivenData {
    let mut cfg = s.cfg.clone();
    cfg.amp += delta;
    build_data(
        &s.grid,
        cfg.data_preset(),
        cfg.potential_preset(),
        cfg.forcing_preset(),
        cfg.sensitivity_spec(),
    )
}

fn cmd_lipschitz(
    c: &Common,
    out: &mut dyn Write,
    _err: &mut dyn Write,
) -> Result<Vec<Check>, Failure> {
    let s = prepare(c)?;
    let opts = s.cfg.run_options();
    let threads = c.threads as usize;
    let deltas = [s.cfg.lipschitz_delta, 0.1 * s.cfg.lipschitz_delta];
    let mut reports: Vec<LipschitzReport> = Vec::new();
    for delta in deltas {
        let p = perturbed(&s, delta);
        reports.push(lipschitz_experiment(
            &s.grid,
            &s.data,
            &p,
            &s.cfg.diagnostics,
            s.cfg.t_end,
            s.cfg.dt,
            &opts,
            threads,
        )?);
    }
    let mut w = BufWriter::new(File::create(s.out_dir.join("lipschitz.csv"))?);
    writeln!(w, "delta,ratio,data_gap,solution_gap")?;
    for (d, r) in deltas.iter().zip(&reports) {
        writeln!(
            w,
            "{d:.14e},{:.14e},{:.14e},{:.14e}",
            r.ratio, r.data_gap, r.solution_gap
        )?;
        let _ = writeln!(out, "INFO delta {d:.3e} ratio {:.6e}", r.ratio);
    }
    w.flush()?;
    let (a, b) = (reports[0].ratio, reports[1].ratio);
    let spread = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    Ok(vec![
        Check::at_most("lipschitz_ratio_agreement", spread, LIPSCHITZ_AGREEMENT),
        Check::at_most("lipschitz_ratio", a.max(b), s.cfg.lipschitz_ceiling),
    ])
}

fn cmd_eigen(c: &Common, out: &mut dyn Write) -> Result<Vec<Check>, Failure> {
    let cfg = load(c)?;
    let grid = Grid::new(cfg.domain)?;
    let eig = |e: crate::eigen::EigenError| Failure::Other(e.to_string());
    let n = lambda_neumann(&grid, cfg.eigen_tol).map_err(eig)?;
    let d = lambda_dirichlet(&grid, cfg.eigen_tol).map_err(eig)?;
    let _ = writeln!(
        out,
        "{},{},{},{},{:e}",
        n.lambda,
        d.lambda,
        grid.hx().max(grid.hy()),
        n.iterations.max(d.iterations),
        n.residual.max(d.residual)
    );
    Ok(Vec::new())
}
