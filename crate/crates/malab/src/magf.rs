//! MAGF1 text format for grid functions.
//!
//! ```text
//! MAGF1 <dim> <nx> [<ny> [<nz>]]
//! origin <reals>
//! spacing <reals>
//! domain box <center...> <half_widths...> | domain ball <center...> <radius>
//! <one value per line, first axis slowest; exterior nodes as nan>
//! ```

use std::fmt::Write as _;

use crate::convex::ConvexGridFunction;
use crate::error::{MalabError, Result};
use crate::grid::{Domain, GridSpec, MAX_DIM};

fn err(line: usize, msg: impl Into<String>) -> MalabError {
    MalabError::Parse { line, msg: msg.into() }
}

fn parse_reals(line_no: usize, toks: &[&str], expected: usize) -> Result<Vec<f64>> {
    if toks.len() != expected {
        return Err(err(line_no, format!("expected {expected} numbers, found {}", toks.len())));
    }
    toks.iter()
        .map(|t| {
            let v: f64 = t.parse().map_err(|_| err(line_no, format!("not a number: {t:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(line_no, format!("non-finite header value {t:?}")))
            }
        })
        .collect()
}

fn keyword_line<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str, prev: usize) -> Result<(usize, Vec<&'a str>)> {
    let (no, line) = lines.next().ok_or_else(|| err(prev + 1, format!("missing {key} line")))?;
    let mut toks = line.split_whitespace();
    match toks.next() {
        Some(k) if k == key => Ok((no, toks.collect())),
        other => Err(err(no, format!("expected {key:?}, found {:?}", other.unwrap_or("")))),
    }
}

/// Parses MAGF1 text. Values at in-domain nodes must be finite.
pub fn parse(text: &str) -> Result<ConvexGridFunction> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty input"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.first() != Some(&"MAGF1") {
        return Err(err(1, "missing MAGF1 magic"));
    }
    let dim: usize = toks
        .get(1)
        .ok_or_else(|| err(1, "missing dimension"))?
        .parse()
        .map_err(|_| err(1, "bad dimension"))?;
    if dim == 0 || dim > MAX_DIM {
        return Err(err(1, format!("dimension {dim} not in 1..=3")));
    }
    if toks.len() != 2 + dim {
        return Err(err(1, format!("expected {dim} axis counts")));
    }
    let counts: Vec<usize> = toks[2..]
        .iter()
        .map(|t| t.parse().map_err(|_| err(1, format!("bad count {t:?}"))))
        .collect::<Result<_>>()?;

    let (no2, t) = keyword_line(&mut lines, "origin", 1)?;
    let origin = parse_reals(no2, &t, dim)?;
    let (no3, t) = keyword_line(&mut lines, "spacing", no2)?;
    let spacing = parse_reals(no3, &t, dim)?;
    let (no4, t) = keyword_line(&mut lines, "domain", no3)?;
    let domain = match t.first() {
        Some(&"box") => {
            let p = parse_reals(no4, &t[1..], 2 * dim)?;
            Domain::Box {
                center: p[..dim].to_vec(),
                half_widths: p[dim..].to_vec(),
            }
        }
        Some(&"ball") => {
            let p = parse_reals(no4, &t[1..], dim + 1)?;
            Domain::Ball {
                center: p[..dim].to_vec(),
                radius: p[dim],
            }
        }
        other => return Err(err(no4, format!("unknown domain {:?}", other.unwrap_or(&"")))),
    };
    let grid = GridSpec::new(counts, origin, spacing, domain).map_err(|e| err(1, e.to_string()))?;
    let n = grid.len();
    let mut values = Vec::with_capacity(n.min(1 << 16));
    let mut value_lines = Vec::with_capacity(n.min(1 << 16));
    let mut last = no4;
    for (no, line) in lines {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        if values.len() == n {
            return Err(err(no, "more values than grid nodes"));
        }
        let v: f64 = s.parse().map_err(|_| err(no, format!("not a number: {s:?}")))?;
        values.push(v);
        value_lines.push(no);
        last = no;
    }
    if values.len() != n {
        return Err(err(last + 1, format!("expected {n} values, found {}", values.len())));
    }
    let kinds = grid.node_kinds();
    for (i, (v, k)) in values.iter().zip(&kinds).enumerate() {
        if k.in_domain() && !v.is_finite() {
            return Err(err(value_lines[i], format!("non-finite value at in-domain node {i}")));
        }
    }
    ConvexGridFunction::new(grid, values)
}

/// Parses MAGF1 from raw bytes (UTF-8 required).
pub fn parse_bytes(data: &[u8]) -> Result<ConvexGridFunction> {
    let text = std::str::from_utf8(data).map_err(|e| err(1, format!("invalid UTF-8: {e}")))?;
    parse(text)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// Serialises a grid function. Floats use the shortest round-trip representation.
pub fn write(u: &ConvexGridFunction) -> String {
    let g = u.grid();
    let mut s = String::with_capacity(16 * g.len() + 128);
    let counts: Vec<String> = g.counts.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(s, "MAGF1 {} {}", g.dim, counts.join(" "));
    let _ = writeln!(s, "origin {}", join(&g.origin));
    let _ = writeln!(s, "spacing {}", join(&g.spacing));
    match &g.domain {
        Domain::Box { center, half_widths } => {
            let _ = writeln!(s, "domain box {} {}", join(center), join(half_widths));
        }
        Domain::Ball { center, radius } => {
            let _ = writeln!(s, "domain ball {} {}", join(center), radius);
        }
    }
    for (i, v) in u.values().iter().enumerate() {
        if u.in_domain(i) {
            let _ = writeln!(s, "{v}");
        } else {
            s.push_str("nan\n");
        }
    }
    s
}
