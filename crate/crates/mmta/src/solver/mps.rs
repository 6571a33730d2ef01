//! Free-format MPS export and import.
//!
//! The writer emits `ROWS`, `COLUMNS` (integer columns bracketed by
//! `'MARKER' 'INTORG'` / `'MARKER' 'INTEND'`), `RHS` and an explicit
//! `BOUNDS` entry for every column, with numbers in shortest round-trip
//! notation. [`parse_mps`] reads the same dialect back (plus `RANGES`), and
//! [`matrix_hash`] fingerprints the parts that must survive the trip.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::model::program::{ConstraintFamily, VarFamily};
use crate::model::{MathProgram, Sense};

#[derive(Debug, thiserror::Error)]
pub enum MpsError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("name `{0}` contains whitespace")]
    BadName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn objective_row_name(p: &MathProgram) -> String {
    let mut name = String::from("COST");
    while p.constraints.iter().any(|c| c.name == name) {
        name.push('_');
    }
    name
}

fn check_name(name: &str) -> Result<(), MpsError> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(MpsError::BadName(name.to_string()));
    }
    Ok(())
}

/// Renders `p` as a free-format MPS document.
pub fn to_mps(p: &MathProgram) -> Result<String, MpsError> {
    for v in &p.variables {
        check_name(&v.name)?;
    }
    for c in &p.constraints {
        check_name(&c.name)?;
    }
    let obj = objective_row_name(p);
    let mut out = String::new();
    let name = if p.name.is_empty() || p.name.contains(char::is_whitespace) {
        "PROGRAM"
    } else {
        &p.name
    };
    let _ = writeln!(out, "NAME {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N {obj}");
    for c in &p.constraints {
        let tag = match c.sense {
            Sense::Le => 'L',
            Sense::Ge => 'G',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {tag} {}", c.name);
    }

    let mut entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.num_vars()];
    for (i, c) in p.constraints.iter().enumerate() {
        for &(j, a) in &c.terms {
            entries[j].push((i, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_integer = false;
    let mut marker = 0;
    for (j, v) in p.variables.iter().enumerate() {
        if v.integer != in_integer {
            let kind = if v.integer { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    M{marker} 'MARKER' '{kind}'");
            marker += 1;
            in_integer = v.integer;
        }
        let c = p.objective[j];
        if c != 0.0 || entries[j].is_empty() {
            let _ = writeln!(out, "    {} {obj} {c:?}", v.name);
        }
        for &(i, a) in &entries[j] {
            let _ = writeln!(out, "    {} {} {a:?}", v.name, p.constraints[i].name);
        }
    }
    if in_integer {
        let _ = writeln!(out, "    M{marker} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    if p.objective_offset != 0.0 {
        let _ = writeln!(out, "    RHS {obj} {:?}", -p.objective_offset);
    }
    for c in &p.constraints {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    RHS {} {:?}", c.name, c.rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for v in &p.variables {
        let (lo, hi) = (v.lower, v.upper);
        if lo == hi {
            let _ = writeln!(out, " FX BND {} {lo:?}", v.name);
            continue;
        }
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(out, " FR BND {}", v.name);
            continue;
        }
        if lo == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND {}", v.name);
        } else {
            let _ = writeln!(out, " LO BND {} {lo:?}", v.name);
        }
        if hi == f64::INFINITY {
            let _ = writeln!(out, " PL BND {}", v.name);
        } else {
            let _ = writeln!(out, " UP BND {} {hi:?}", v.name);
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

/// Writes `p` to `path` in free MPS format.
pub fn export_mps(p: &MathProgram, path: impl AsRef<Path>) -> Result<(), MpsError> {
    std::fs::write(path, to_mps(p)?)?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

/// Reads a free-format MPS document into a program whose rows and
/// variables carry the generic family tags.
pub fn parse_mps(text: &str) -> Result<MathProgram, MpsError> {
    let mut p = MathProgram::new("");
    let mut section = Section::None;
    let mut objective: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut integer = false;
    let mut ranges: Vec<(usize, f64)> = Vec::new();
    let generic = || vec![ConstraintFamily::Generic];

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let err = |message: String| MpsError::Syntax { line, message };
        let trimmed = raw.trim();
        if trimmed.is_empty() || raw.starts_with('*') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let number = |s: &str| -> Result<f64, MpsError> {
            s.parse::<f64>()
                .map_err(|_| err(format!("`{s}` is not a number")))
        };
        if !raw.starts_with(char::is_whitespace) {
            section = match fields[0] {
                "NAME" => {
                    p.name = fields.get(1).copied().unwrap_or("").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "OBJSENSE" | "OBJSENS" => {
                    if fields.get(1).is_some_and(|s| s.starts_with("MAX")) {
                        return Err(err("maximization is not supported".into()));
                    }
                    Section::None
                }
                "ENDATA" => break,
                other => return Err(err(format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(err("data line outside of a section".into())),
            Section::Rows => {
                let [kind, name] = fields[..] else {
                    return Err(err("expected `<type> <name>`".into()));
                };
                let sense = match kind {
                    "N" => {
                        if objective.is_none() {
                            objective = Some(name.to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    k => return Err(err(format!("unknown row type `{k}`"))),
                };
                let i = p.add_row(name, Vec::new(), sense, 0.0, generic());
                row_index.insert(name.to_string(), i);
            }
            Section::Columns => {
                if fields.get(1) == Some(&"'MARKER'") {
                    match fields.get(2).copied() {
                        Some("'INTORG'") => integer = true,
                        Some("'INTEND'") => integer = false,
                        other => return Err(err(format!("unknown marker {other:?}"))),
                    }
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err("expected `<column> <row> <value> [<row> <value>]`".into()));
                }
                let name = fields[0];
                let j = match col_index.get(name) {
                    Some(&j) => j,
                    None => {
                        let j = p.add_var(name, 0.0, f64::INFINITY, integer, VarFamily::Generic);
                        col_index.insert(name.to_string(), j);
                        j
                    }
                };
                for pair in fields[1..].chunks(2) {
                    let value = number(pair[1])?;
                    if Some(pair[0]) == objective.as_deref() {
                        p.objective[j] += value;
                    } else {
                        let &i = row_index
                            .get(pair[0])
                            .ok_or_else(|| err(format!("unknown row `{}`", pair[0])))?;
                        p.constraints[i].terms.push((j, value));
                    }
                }
            }
            Section::Rhs | Section::Ranges => {
                let rest = if fields.len() % 2 == 1 { &fields[1..] } else { &fields[..] };
                for pair in rest.chunks(2) {
                    let [row, value] = pair else {
                        return Err(err("expected `<row> <value>` pairs".into()));
                    };
                    let value = number(value)?;
                    if section == Section::Rhs && Some(*row) == objective.as_deref() {
                        p.objective_offset = -value;
                        continue;
                    }
                    let &i = row_index
                        .get(*row)
                        .ok_or_else(|| err(format!("unknown row `{row}`")))?;
                    if section == Section::Rhs {
                        p.constraints[i].rhs = value;
                    } else {
                        ranges.push((i, value));
                    }
                }
            }
            Section::Bounds => {
                let kind = fields[0];
                let needs_value = !matches!(kind, "FR" | "MI" | "PL" | "BV");
                let (name, value) = match (fields.len(), needs_value) {
                    (3, false) => (fields[2], None),
                    (2, false) => (fields[1], None),
                    (4, true) => (fields[2], Some(number(fields[3])?)),
                    (3, true) => (fields[1], Some(number(fields[2])?)),
                    _ => return Err(err(format!("malformed `{kind}` bound"))),
                };
                let &j = col_index
                    .get(name)
                    .ok_or_else(|| err(format!("unknown column `{name}`")))?;
                let v = &mut p.variables[j];
                match (kind, value) {
                    ("LO", Some(x)) => v.lower = x,
                    ("UP", Some(x)) => v.upper = x,
                    ("FX", Some(x)) => {
                        v.lower = x;
                        v.upper = x;
                    }
                    ("LI", Some(x)) => {
                        v.lower = x;
                        v.integer = true;
                    }
                    ("UI", Some(x)) => {
                        v.upper = x;
                        v.integer = true;
                    }
                    ("FR", None) => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    ("MI", None) => v.lower = f64::NEG_INFINITY,
                    ("PL", None) => v.upper = f64::INFINITY,
                    ("BV", None) => {
                        v.lower = 0.0;
                        v.upper = 1.0;
                        v.integer = true;
                    }
                    _ => return Err(err(format!("unknown bound type `{kind}`"))),
                }
            }
        }
    }

    for c in &mut p.constraints {
        c.terms.sort_by_key(|t| t.0);
    }
    for (i, r) in ranges {
        let c = p.constraints[i].clone();
        let (lo, hi) = match c.sense {
            Sense::Le => (c.rhs - r.abs(), c.rhs),
            Sense::Ge => (c.rhs, c.rhs + r.abs()),
            Sense::Eq if r >= 0.0 => (c.rhs, c.rhs + r),
            Sense::Eq => (c.rhs + r, c.rhs),
        };
        p.constraints[i].sense = Sense::Ge;
        p.constraints[i].rhs = lo;
        p.add_row(format!("{}.range", c.name), c.terms, Sense::Le, hi, generic());
    }
    Ok(p)
}

/// SHA-256 over the names, bounds, integrality, objective and constraint
/// matrix of `p`, with every number hashed by its bit pattern.
pub fn matrix_hash(p: &MathProgram) -> String {
    let mut h = Sha256::new();
    let num = |h: &mut Sha256, v: f64| h.update((v + 0.0).to_bits().to_le_bytes());
    num(&mut h, p.objective_offset);
    for (j, v) in p.variables.iter().enumerate() {
        h.update(v.name.as_bytes());
        h.update([0, v.integer as u8]);
        num(&mut h, v.lower);
        num(&mut h, v.upper);
        num(&mut h, p.objective[j]);
    }
    for c in &p.constraints {
        h.update(c.name.as_bytes());
        h.update([0, c.sense.symbol().as_bytes()[0]]);
        num(&mut h, c.rhs);
        let mut terms = c.terms.clone();
        terms.sort_by_key(|t| t.0);
        for (j, a) in terms {
            h.update((j as u64).to_le_bytes());
            num(&mut h, a);
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_round_trip() {
        let mut p = MathProgram::new("one");
        let x = p.add_var("x", 0.0, 4.0, false, VarFamily::Generic);
        p.objective[x] = 2.5;
        let text = to_mps(&p).unwrap();
        let column_lines = text
            .lines()
            .skip_while(|l| *l != "COLUMNS")
            .skip(1)
            .take_while(|l| l.starts_with(' '))
            .count();
        assert_eq!(column_lines, 1);
        let q = parse_mps(&text).unwrap();
        assert_eq!(matrix_hash(&p), matrix_hash(&q));
    }

    #[test]
    fn ranges_become_two_rows() {
        let text = "NAME r\nROWS\n N c\n G a\nCOLUMNS\n    x c 1 a 1\nRHS\n    RHS a 2\nRANGES\n    RNG a 3\nBOUNDS\n UP BND x 9\nENDATA\n";
        let p = parse_mps(text).unwrap();
        assert_eq!(p.constraints.len(), 2);
        assert_eq!(p.constraints[1].sense, Sense::Le);
        assert_eq!(p.constraints[1].rhs, 5.0);
    }

    #[test]
    fn whitespace_in_names_is_rejected() {
        let mut p = MathProgram::new("bad");
        p.add_var("a b", 0.0, 1.0, false, VarFamily::Generic);
        assert!(matches!(to_mps(&p), Err(MpsError::BadName(_))));
    }
}
