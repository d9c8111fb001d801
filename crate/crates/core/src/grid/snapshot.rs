//! Plain-text field snapshots.
//!
//! ```text
//! nx,ny,Lx,Ly,name,t
//! v(0,0),v(1,0),...,v(nx-1,0)
//! ...
//! v(0,ny-1),...,v(nx-1,ny-1)
//! ```
//!
//! The first line carries the values of those six header fields; each
//! following row holds one `y` level, columns run along increasing `x`.
//! Values use the shortest decimal representation that round-trips exactly.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{DomainSpec, Grid, GridError, ScalarField};

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("snapshot line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub spec: DomainSpec,
    pub name: String,
    pub t: f64,
    pub field: ScalarField,
}

pub fn write_snapshot<W: Write>(
    mut out: W,
    grid: &Grid,
    field: &ScalarField,
    name: &str,
    t: f64,
) -> Result<(), SnapshotError> {
    grid.check(field.spec())?;
    if name.contains(',') || name.contains('\n') {
        return Err(SnapshotError::Parse {
            line: 1,
            msg: format!("field name {name:?} may not contain ',' or newlines"),
        });
    }
    let s = grid.spec();
    writeln!(out, "{},{},{},{},{},{}", s.nx, s.ny, s.lx, s.ly, name, t)?;
    let v = field.values();
    let mut line = String::new();
    for j in 0..s.ny {
        line.clear();
        for i in 0..s.nx {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&v[j * s.nx + i].to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<Snapshot, SnapshotError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| SnapshotError::Parse {
        line: 1,
        msg: "empty snapshot".into(),
    })??;
    let parts: Vec<&str> = header.trim().split(',').collect();
    if parts.len() != 6 {
        return Err(SnapshotError::Parse {
            line: 1,
            msg: format!("header needs 6 fields, found {}", parts.len()),
        });
    }
    let bad = |what: &str| SnapshotError::Parse {
        line: 1,
        msg: format!("invalid {what}"),
    };
    let nx: usize = parts[0].parse().map_err(|_| bad("nx"))?;
    let ny: usize = parts[1].parse().map_err(|_| bad("ny"))?;
    let lx: f64 = parts[2].parse().map_err(|_| bad("Lx"))?;
    let ly: f64 = parts[3].parse().map_err(|_| bad("Ly"))?;
    let name = parts[4].to_string();
    let t: f64 = parts[5].parse().map_err(|_| bad("t"))?;
    let spec = DomainSpec::new(lx, ly, nx, ny)?;
    let grid = Grid::new(spec)?;

    let mut values = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        let line_no = row + 2;
        let line = lines.next().ok_or_else(|| SnapshotError::Parse {
            line: line_no,
            msg: "missing row".into(),
        })??;
        let before = values.len();
        for tok in line.trim().split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| SnapshotError::Parse {
                line: line_no,
                msg: format!("bad value {tok:?}"),
            })?;
            values.push(v);
        }
        if values.len() - before != nx {
            return Err(SnapshotError::Parse {
                line: line_no,
                msg: format!("expected {nx} values, found {}", values.len() - before),
            });
        }
    }
    let field = ScalarField::from_values(&grid, values)?;
    Ok(Snapshot {
        spec,
        name,
        t,
        field,
    })
}
