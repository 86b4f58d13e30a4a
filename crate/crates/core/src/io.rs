//! Plain-text CSV formats for patterns, diagrams, curves and surfaces.
//!
//! Numbers are written with the shortest representation that parses back to the
//! same `f64`, in positional notation, so every file round-trips exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geom::{Point, PointPattern, Window};
use crate::mbound::{Feature, Killer, PersistenceDiagram};
use crate::summaries::{SummaryCurve, SummarySurface};

/// Data lines of a CSV stream as `(line number, fields)`, skipping blanks and a
/// header line equal to `header`.
fn records<R: BufRead>(reader: R, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (out.is_empty() && i == 0 && trimmed.replace(' ', "") == header) {
            continue;
        }
        out.push((i + 1, trimmed.split(',').map(|f| f.trim().to_string()).collect()));
    }
    Ok(out)
}

fn number(line: usize, field: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("expected a number, found '{field}'"),
    })
}

fn arity(line: usize, fields: &[String], n: usize) -> Result<()> {
    if fields.len() != n {
        return Err(Error::Parse {
            line,
            msg: format!("expected {n} fields, found {}", fields.len()),
        });
    }
    Ok(())
}

/// Reads `x,y` rows (optional header) into a pattern on `window`.
pub fn read_pattern<R: BufRead>(reader: R, window: Window) -> Result<PointPattern> {
    let mut points = Vec::new();
    for (line, fields) in records(reader, "x,y")? {
        arity(line, &fields, 2)?;
        points.push(Point::new(number(line, &fields[0])?, number(line, &fields[1])?));
    }
    PointPattern::new(points, window)
}

pub fn write_pattern<W: Write>(mut out: W, pattern: &PointPattern) -> Result<()> {
    writeln!(out, "x,y")?;
    for p in pattern.points() {
        writeln!(out, "{},{}", p.x, p.y)?;
    }
    Ok(())
}

/// Writes `dim,birth,death,standard_birth,killer` rows.
pub fn write_diagram<W: Write>(mut out: W, diagram: &PersistenceDiagram) -> Result<()> {
    writeln!(out, "dim,birth,death,standard_birth,killer")?;
    for f in diagram.features() {
        writeln!(
            out,
            "{},{},{},{},{}",
            f.dimension, f.birth, f.death, f.standard_birth, f.killer
        )?;
    }
    Ok(())
}

/// Reads diagram rows; the remaining diagram parameters come from the caller.
pub fn read_diagram<R: BufRead>(
    reader: R,
    m: f64,
    r_f: f64,
    n_points: usize,
    window: Window,
) -> Result<PersistenceDiagram> {
    let mut features = Vec::new();
    for (line, fields) in records(reader, "dim,birth,death,standard_birth,killer")? {
        arity(line, &fields, 5)?;
        let dimension = match fields[0].as_str() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("dimension must be 0 or 1, found '{other}'"),
                })
            }
        };
        let killer: Killer = fields[4].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad killer '{}'", fields[4]),
        })?;
        let f = Feature {
            dimension,
            birth: number(line, &fields[1])?,
            death: number(line, &fields[2])?,
            standard_birth: number(line, &fields[3])?,
            killer,
            creator: None,
        };
        if !(f.birth <= f.death) {
            return Err(Error::Parse {
                line,
                msg: format!("birth {} after death {}", f.birth, f.death),
            });
        }
        features.push(f);
    }
    Ok(PersistenceDiagram::from_features(features, m, r_f, n_points, window))
}

pub fn write_curve<W: Write>(mut out: W, curve: &SummaryCurve) -> Result<()> {
    writeln!(out, "arg,value")?;
    for (a, v) in curve.grid().iter().zip(curve.values()) {
        writeln!(out, "{a},{v}")?;
    }
    Ok(())
}

pub fn write_surface<W: Write>(mut out: W, surface: &SummarySurface) -> Result<()> {
    writeln!(out, "b,l,value")?;
    for (bi, b) in surface.b_grid().iter().enumerate() {
        for (li, l) in surface.l_grid().iter().enumerate() {
            writeln!(out, "{b},{l},{}", surface.get(bi, li))?;
        }
    }
    Ok(())
}

/// Writes `arg,observed,lower,upper` rows.
pub fn write_envelope<W: Write>(
    mut out: W,
    args: &[f64],
    observed: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Result<()> {
    writeln!(out, "arg,observed,lower,upper")?;
    for i in 0..args.len() {
        writeln!(out, "{},{},{},{}", args[i], observed[i], lower[i], upper[i])?;
    }
    Ok(())
}
