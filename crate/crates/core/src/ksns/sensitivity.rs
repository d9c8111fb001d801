use std::fmt;
use std::sync::Arc;

/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
/// Counter-clockwise quarter turn.
pub const QUARTER_TURN: Mat2 = [[0.0, -1.0], [1.0, 0.0]];

pub fn mat_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn frobenius(m: &Mat2) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

type MatFn = Arc<dyn Fn(f64, [f64; 2]) -> Mat2 + Send + Sync>;

/// The sensitivity tensor `S(t, x)` together with `∂t S`.
#[derive(Clone)]
pub enum SensitivitySpec {
    Identity,
    /// `a I`.
    Scaled(f64),
    /// `a I + b J` with `J` the quarter turn.
    Rotation {
        a: f64,
        b: f64,
    },
    /// Spatially constant, piecewise linear in time through the given
    /// `(t, S)` knots and constant outside them.
    Table(Vec<(f64, Mat2)>),
    Custom {
        tag: String,
        s: MatFn,
        dt_s: MatFn,
    },
}

impl fmt::Debug for SensitivitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SensitivitySpec({})", self.tag())
    }
}

fn lerp(a: &Mat2, b: &Mat2, w: f64) -> Mat2 {
    let mut m = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            m[r][c] = (1.0 - w) * a[r][c] + w * b[r][c];
        }
    }
    m
}

impl SensitivitySpec {
    pub fn rotation(a: f64, b: f64) -> Self {
        Self::Rotation { a, b }
    }

    pub fn custom(
        tag: impl Into<String>,
        s: impl Fn(f64, [f64; 2]) -> Mat2 + Send + Sync + 'static,
        dt_s: impl Fn(f64, [f64; 2]) -> Mat2 + Send + Sync + 'static,
    ) -> Self {
        Self::Custom {
            tag: tag.into(),
            s: Arc::new(s),
            dt_s: Arc::new(dt_s),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Self::Identity => "identity".into(),
            Self::Scaled(a) => format!("scaled({a})"),
            Self::Rotation { a, b } => format!("rotation({a},{b})"),
            Self::Table(knots) => format!("table({} knots)", knots.len()),
            Self::Custom { tag, .. } => format!("custom({tag})"),
        }
    }

    pub fn eval(&self, t: f64, x: [f64; 2]) -> Mat2 {
        match self {
            Self::Identity => IDENTITY,
            Self::Scaled(a) => [[*a, 0.0], [0.0, *a]],
            Self::Rotation { a, b } => [[*a, -*b], [*b, *a]],
            Self::Table(knots) => match knots.iter().position(|(tk, _)| *tk > t) {
                None => knots.last().map_or(IDENTITY, |k| k.1),
                Some(0) => knots[0].1,
                Some(i) => {
                    let (t0, m0) = &knots[i - 1];
                    let (t1, m1) = &knots[i];
                    lerp(m0, m1, (t - t0) / (t1 - t0))
                }
            },
            Self::Custom { s, .. } => s(t, x),
        }
    }

    pub fn dt(&self, t: f64, x: [f64; 2]) -> Mat2 {
        match self {
            Self::Identity | Self::Scaled(_) | Self::Rotation { .. } => [[0.0; 2]; 2],
            Self::Table(knots) => match knots.iter().position(|(tk, _)| *tk > t) {
                None | Some(0) => [[0.0; 2]; 2],
                Some(i) => {
                    let (t0, m0) = &knots[i - 1];
                    let (t1, m1) = &knots[i];
                    let mut d = [[0.0; 2]; 2];
                    for r in 0..2 {
                        for c in 0..2 {
                            d[r][c] = (m1[r][c] - m0[r][c]) / (t1 - t0);
                        }
                    }
                    d
                }
            },
            Self::Custom { dt_s, .. } => dt_s(t, x),
        }
    }

    /// `S (gx, gy)` at `(t, x)`.
    pub fn apply(&self, t: f64, x: [f64; 2], g: [f64; 2]) -> [f64; 2] {
        match self {
            Self::Identity => g,
            Self::Scaled(a) => [a * g[0], a * g[1]],
            Self::Rotation { a, b } => [a * g[0] - b * g[1], b * g[0] + a * g[1]],
            _ => mat_vec(&self.eval(t, x), g),
        }
    }

    /// Largest Frobenius norm of `S` over the given sample points.
    pub fn sup_norm(&self, times: &[f64], points: &[[f64; 2]]) -> f64 {
        let mut m: f64 = 0.0;
        for &t in times {
            for &x in points {
                m = m.max(frobenius(&self.eval(t, x)));
            }
        }
        m
    }
}
