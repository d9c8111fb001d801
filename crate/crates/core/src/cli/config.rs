//! INI-style run configuration.
//!
//! ```text
//! # comment
//! [section]
//! key = value
//! ```
//!
//! Numbers accept `a/b` fractions. Keys are unique across sections, so a key
//! may also appear before the first header. Unknown sections and keys are
//! errors.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diagnostics::{DiagError, DiagnosticsConfig};
use crate::eigen::rectangle_lambdas;
use crate::grid::{DomainSpec, MIN_CELLS};
use crate::ksns::{
    DataPreset, ForcingPreset, PicardOptions, PotentialPreset, RunOptions, SensitivitySpec,
    StepOptions,
};
use crate::linstep::LinearSolverOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

const KEYS: &[(&str, &str)] = &[
    ("domain", "lx"),
    ("domain", "ly"),
    ("domain", "nx"),
    ("domain", "ny"),
    ("time", "dt"),
    ("time", "t_end"),
    ("time", "theta"),
    ("solver", "cg_tol"),
    ("solver", "cg_max_iter"),
    ("solver", "eigen_tol"),
    ("solver", "ceiling"),
    ("picard", "enabled"),
    ("picard", "k_max"),
    ("picard", "tol"),
    ("data", "preset"),
    ("data", "level"),
    ("data", "amp"),
    ("model", "sensitivity"),
    ("model", "s_a"),
    ("model", "s_b"),
    ("model", "potential"),
    ("model", "gravity"),
    ("model", "forcing"),
    ("model", "forcing_amp"),
    ("model", "forcing_rate"),
    ("diagnostics", "r"),
    ("diagnostics", "q"),
    ("diagnostics", "lambda1"),
    ("diagnostics", "lambda2"),
    ("diagnostics", "window_start"),
    ("diagnostics", "window_end"),
    ("output", "dir"),
    ("output", "stride"),
    ("lipschitz", "delta"),
    ("lipschitz", "ratio_ceiling"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataKind {
    Constant,
    Cosine,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityKind {
    Identity,
    Scaled,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Zero,
    Gravity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingKind {
    Zero,
    Decaying,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub dt: f64,
    pub t_end: f64,
    pub theta: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub eigen_tol: f64,
    pub ceiling: f64,
    pub picard_enabled: bool,
    pub picard_k_max: usize,
    pub picard_tol: f64,
    pub data: DataKind,
    pub level: f64,
    pub amp: f64,
    pub sensitivity: SensitivityKind,
    pub s_a: f64,
    pub s_b: f64,
    pub potential: PotentialKind,
    pub gravity: f64,
    pub forcing: ForcingKind,
    pub forcing_amp: f64,
    pub forcing_rate: f64,
    pub diagnostics: DiagnosticsConfig,
    /// Decay-fit window.
    pub window: (f64, f64),
    /// Output directory set in the file, if any.
    pub out_dir: Option<PathBuf>,
    pub stride: usize,
    pub lipschitz_delta: f64,
    pub lipschitz_ceiling: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

/// Raw `key → (value, line)` pairs after syntax checks.
struct Entries(Vec<(&'static str, &'static str, String, usize)>);

impl Entries {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.0
            .iter()
            .find(|e| e.1 == key)
            .map(|e| (e.2.as_str(), e.3))
    }

    fn path(key: &str) -> String {
        let section = KEYS.iter().find(|k| k.1 == key).map(|k| k.0).unwrap_or("");
        format!("{section}.{key}")
    }

    fn num(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((v, line)) => parse_number(v).ok_or_else(|| ConfigError::Parse {
                line,
                msg: format!("`{}` expects a number, got {v:?}", Self::path(key)),
            }),
        }
    }

    fn opt_num(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        if self.get(key).is_none() {
            return Ok(None);
        }
        self.num(key, 0.0).map(Some)
    }

    fn count(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<usize>().map_err(|_| ConfigError::Parse {
                line,
                msg: format!(
                    "`{}` expects a non-negative integer, got {v:?}",
                    Self::path(key)
                ),
            }),
        }
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(("true" | "yes" | "1", _)) => Ok(true),
            Some(("false" | "no" | "0", _)) => Ok(false),
            Some((v, line)) => Err(ConfigError::Parse {
                line,
                msg: format!("`{}` expects true or false, got {v:?}", Self::path(key)),
            }),
        }
    }

    fn word<T: Copy>(&self, key: &str, default: T, table: &[(&str, T)]) -> Result<T, ConfigError> {
        let Some((v, _)) = self.get(key) else {
            return Ok(default);
        };
        table
            .iter()
            .find(|(name, _)| *name == v)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
                invalid(
                    &Self::path(key),
                    format!("expected one of {}, got {v:?}", names.join(" | ")),
                )
            })
    }
}

/// Decimal number or a fraction `a/b` of two decimals.
fn parse_number(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

fn lex(text: &str) -> Result<Entries, ConfigError> {
    let mut section: Option<&'static str> = None;
    let mut entries: Entries = Entries(Vec::new());
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line,
                msg: format!("unterminated section header {body:?}"),
            })?;
            let name = name.trim();
            section = Some(
                KEYS.iter()
                    .find(|k| k.0 == name)
                    .map(|k| k.0)
                    .ok_or_else(|| ConfigError::Parse {
                        line,
                        msg: format!("unknown section [{name}]"),
                    })?,
            );
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            msg: format!("expected `key = value`, got {body:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(ConfigError::Parse {
                line,
                msg: format!("missing value for `{key}`"),
            });
        }
        let &(home, name) = KEYS
            .iter()
            .find(|k| k.1 == key && section.is_none_or(|s| s == k.0))
            .ok_or_else(|| ConfigError::Parse {
                line,
                msg: match section {
                    Some(s) => format!("unknown key `{key}` in section [{s}]"),
                    None => format!("unknown key `{key}`"),
                },
            })?;
        if let Some((_, prev)) = entries.get(name) {
            return Err(ConfigError::Parse {
                line,
                msg: format!("`{home}.{name}` already set on line {prev}"),
            });
        }
        entries.0.push((home, name, value.to_string(), line));
    }
    Ok(entries)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let e = lex(text)?;

    let lx = e.num("lx", 1.0)?;
    let ly = e.num("ly", 1.0)?;
    for (key, v) in [("domain.lx", lx), ("domain.ly", ly)] {
        if v <= 0.0 {
            return Err(invalid(key, format!("must be positive, got {v}")));
        }
    }
    let nx = e.count("nx", 32)?;
    let ny = e.count("ny", 32)?;
    for (key, v) in [("domain.nx", nx), ("domain.ny", ny)] {
        if v < MIN_CELLS {
            return Err(invalid(
                key,
                format!("needs at least {MIN_CELLS} cells, got {v}"),
            ));
        }
    }
    let domain =
        DomainSpec::new(lx, ly, nx, ny).map_err(|err| invalid("domain", err.to_string()))?;

    let dt = e.num("dt", 1e-3)?;
    if dt <= 0.0 {
        return Err(invalid("time.dt", format!("must be positive, got {dt}")));
    }
    let t_end = e.num("t_end", 1.0)?;
    if t_end < dt {
        return Err(invalid(
            "time.t_end",
            format!("must be at least dt = {dt}, got {t_end}"),
        ));
    }
    let theta = e.num("theta", 1.0)?;
    if theta != 1.0 && theta != 0.5 {
        return Err(invalid(
            "time.theta",
            format!("must be 1 or 1/2, got {theta}"),
        ));
    }

    let cg_tol = e.num("cg_tol", 1e-10)?;
    if !(cg_tol > 0.0 && cg_tol < 1.0) {
        return Err(invalid(
            "solver.cg_tol",
            format!("must lie in (0, 1), got {cg_tol}"),
        ));
    }
    let cg_max_iter = e.count("cg_max_iter", 20_000)?;
    if cg_max_iter == 0 {
        return Err(invalid("solver.cg_max_iter", "must be at least 1"));
    }
    let eigen_tol = e.num("eigen_tol", 1e-10)?;
    if !(eigen_tol > 0.0 && eigen_tol <= 1e-3) {
        return Err(invalid(
            "solver.eigen_tol",
            format!("must lie in (0, 1e-3], got {eigen_tol}"),
        ));
    }
    let ceiling = e.num("ceiling", 1e6)?;
    if ceiling <= 0.0 {
        return Err(invalid(
            "solver.ceiling",
            format!("must be positive, got {ceiling}"),
        ));
    }

    let picard_enabled = e.flag("enabled", false)?;
    let picard_k_max = e.count("k_max", 8)?;
    if picard_k_max == 0 {
        return Err(invalid("picard.k_max", "must be at least 1"));
    }
    let picard_tol = e.num("tol", 1e-8)?;
    if picard_tol <= 0.0 {
        return Err(invalid(
            "picard.tol",
            format!("must be positive, got {picard_tol}"),
        ));
    }

    let data = e.word(
        "preset",
        DataKind::Cosine,
        &[
            ("constant", DataKind::Constant),
            ("cosine", DataKind::Cosine),
            ("mixed", DataKind::Mixed),
        ],
    )?;
    let level = e.num("level", 2.0)?;
    if level <= 0.0 {
        return Err(invalid(
            "data.level",
            format!("must be positive, got {level}"),
        ));
    }
    let amp = e.num("amp", 0.01)?;
    if !(0.0..=level).contains(&amp) {
        return Err(invalid(
            "data.amp",
            format!("must lie in [0, level] to keep n0 non-negative, got {amp}"),
        ));
    }

    let sensitivity = e.word(
        "sensitivity",
        SensitivityKind::Identity,
        &[
            ("identity", SensitivityKind::Identity),
            ("scaled", SensitivityKind::Scaled),
            ("rotation", SensitivityKind::Rotation),
        ],
    )?;
    let s_a = e.num("s_a", 1.0)?;
    let s_b = e.num("s_b", 0.0)?;
    let potential = e.word(
        "potential",
        PotentialKind::Zero,
        &[
            ("zero", PotentialKind::Zero),
            ("gravity", PotentialKind::Gravity),
        ],
    )?;
    let gravity = e.num("gravity", 1.0)?;
    let forcing = e.word(
        "forcing",
        ForcingKind::Zero,
        &[
            ("zero", ForcingKind::Zero),
            ("decaying", ForcingKind::Decaying),
        ],
    )?;
    let forcing_amp = e.num("forcing_amp", 0.01)?;

    let r = e.num("r", 4.0)?;
    let q = e.num("q", 4.0)?;
    let mut diagnostics = DiagnosticsConfig::for_domain(&domain, r, q);
    if let Some(l1) = e.opt_num("lambda1")? {
        diagnostics.lambda1 = l1;
        diagnostics.lambda2 = diagnostics.lambda2.min(l1);
    }
    if let Some(l2) = e.opt_num("lambda2")? {
        diagnostics.lambda2 = l2;
    }
    let (lambda_n, lambda_d) = rectangle_lambdas(&domain);
    diagnostics
        .validate(lambda_n, lambda_d)
        .map_err(|err| match err {
            DiagError::InvalidConfig { key, reason } => {
                invalid(&format!("diagnostics.{key}"), reason)
            }
            other => invalid("diagnostics", other.to_string()),
        })?;
    let forcing_rate = e.num("forcing_rate", 1.0)?;
    if forcing == ForcingKind::Decaying && forcing_rate <= diagnostics.lambda2 {
        return Err(invalid(
            "model.forcing_rate",
            format!(
                "must exceed lambda2 = {} so that e^(lambda2 t) f is integrable, got {forcing_rate}",
                diagnostics.lambda2
            ),
        ));
    }

    let window = (
        e.num("window_start", t_end / 3.0)?,
        e.num("window_end", t_end)?,
    );
    if !(window.0 >= 0.0 && window.0 < window.1 && window.1 <= t_end) {
        return Err(invalid(
            "diagnostics.window_start",
            format!(
                "window [{}, {}] must satisfy 0 <= start < end <= t_end",
                window.0, window.1
            ),
        ));
    }

    let out_dir = e.get("dir").map(|(v, _)| PathBuf::from(v));
    let stride = e.count("stride", 0)?;

    let lipschitz_delta = e.num("delta", 1e-3)?;
    if lipschitz_delta <= 0.0 {
        return Err(invalid(
            "lipschitz.delta",
            format!("must be positive, got {lipschitz_delta}"),
        ));
    }
    let lipschitz_ceiling = e.num("ratio_ceiling", 10.0)?;
    if lipschitz_ceiling <= 0.0 {
        return Err(invalid(
            "lipschitz.ratio_ceiling",
            format!("must be positive, got {lipschitz_ceiling}"),
        ));
    }

    Ok(RunConfig {
        domain,
        dt,
        t_end,
        theta,
        cg_tol,
        cg_max_iter,
        eigen_tol,
        ceiling,
        picard_enabled,
        picard_k_max,
        picard_tol,
        data,
        level,
        amp,
        sensitivity,
        s_a,
        s_b,
        potential,
        gravity,
        forcing,
        forcing_amp,
        forcing_rate,
        diagnostics,
        window,
        out_dir,
        stride,
        lipschitz_delta,
        lipschitz_ceiling,
    })
}

impl RunConfig {
    pub fn solver(&self) -> LinearSolverOptions {
        LinearSolverOptions {
            tol: self.cg_tol,
            max_iter: self.cg_max_iter,
            theta: self.theta,
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            step: StepOptions {
                solver: self.solver(),
                ceiling: self.ceiling,
            },
            picard: self.picard_enabled.then_some(PicardOptions {
                k_max: self.picard_k_max,
                tol: self.picard_tol,
            }),
            snapshot_stride: self.stride,
            diagnostics: self.diagnostics,
        }
    }

    pub fn data_preset(&self) -> DataPreset {
        match self.data {
            DataKind::Constant => DataPreset::Constant { level: self.level },
            DataKind::Cosine => DataPreset::Cosine {
                level: self.level,
                amp: self.amp,
            },
            DataKind::Mixed => DataPreset::Mixed {
                level: self.level,
                amp: self.amp,
            },
        }
    }

    pub fn sensitivity_spec(&self) -> SensitivitySpec {
        match self.sensitivity {
            SensitivityKind::Identity => SensitivitySpec::Identity,
            SensitivityKind::Scaled => SensitivitySpec::Scaled(self.s_a),
            SensitivityKind::Rotation => SensitivitySpec::rotation(self.s_a, self.s_b),
        }
    }

    pub fn potential_preset(&self) -> PotentialPreset {
        match self.potential {
            PotentialKind::Zero => PotentialPreset::Zero,
            PotentialKind::Gravity => PotentialPreset::Gravity(self.gravity),
        }
    }

    pub fn forcing_preset(&self) -> ForcingPreset {
        match self.forcing {
            ForcingKind::Zero => ForcingPreset::Zero,
            ForcingKind::Decaying => ForcingPreset::Decaying {
                amp: self.forcing_amp,
                rate: self.forcing_rate,
            },
        }
    }

    /// The resolved configuration in the input format; parsing it yields
    /// `self` again.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let d = &self.domain;
        let _ = write!(
            s,
            "[domain]\nlx = {:?}\nly = {:?}\nnx = {}\nny = {}\n\n",
            d.lx, d.ly, d.nx, d.ny
        );
        let _ = write!(
            s,
            "[time]\ndt = {:?}\nt_end = {:?}\ntheta = {:?}\n\n",
            self.dt, self.t_end, self.theta
        );
        let _ = write!(
            s,
            "[solver]\ncg_tol = {:?}\ncg_max_iter = {}\neigen_tol = {:?}\nceiling = {:?}\n\n",
            self.cg_tol, self.cg_max_iter, self.eigen_tol, self.ceiling
        );
        let _ = write!(
            s,
            "[picard]\nenabled = {}\nk_max = {}\ntol = {:?}\n\n",
            self.picard_enabled, self.picard_k_max, self.picard_tol
        );
        let _ = write!(
            s,
            "[data]\npreset = {}\nlevel = {:?}\namp = {:?}\n\n",
            self.data, self.level, self.amp
        );
        let _ = write!(
            s,
            "[model]\nsensitivity = {}\ns_a = {:?}\ns_b = {:?}\npotential = {}\ngravity = {:?}\n\
             forcing = {}\nforcing_amp = {:?}\nforcing_rate = {:?}\n\n",
            self.sensitivity,
            self.s_a,
            self.s_b,
            self.potential,
            self.gravity,
            self.forcing,
            self.forcing_amp,
            self.forcing_rate
        );
        let g = &self.diagnostics;
        let _ = write!(
            s,
            "[diagnostics]\nr = {:?}\nq = {:?}\nlambda1 = {:?}\nlambda2 = {:?}\n\
             window_start = {:?}\nwindow_end = {:?}\n\n",
            g.r, g.q, g.lambda1, g.lambda2, self.window.0, self.window.1
        );
        s.push_str("[output]\n");
        if let Some(dir) = &self.out_dir {
            let _ = writeln!(s, "dir = {}", dir.display());
        }
        let _ = write!(s, "stride = {}\n\n", self.stride);
        let _ = write!(
            s,
            "[lipschitz]\ndelta = {:?}\nratio_ceiling = {:?}\n",
            self.lipschitz_delta, self.lipschitz_ceiling
        );
        s
    }
}

impl fmt::Display for DataKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Cosine => "cosine",
            Self::Mixed => "mixed",
        })
    }
}

impl fmt::Display for SensitivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::Scaled => "scaled",
            Self::Rotation => "rotation",
        })
    }
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::Gravity => "gravity",
        })
    }
}

impl fmt::Display for ForcingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::Decaying => "decaying",
        })
    }
}
