//! Sectioned key = value run configuration.
//!
//! ```text
//! # 1D Ising chain observed through σz
//! [model]
//! lattice_dim = 1
//! site_dim = 2
//! observable = pauli:Z
//! term = 0; 1 | pauli:ZZ
//! term = 0 | [[0.3, 0], [0, -0.3]]
//!
//! [run]
//! beta = 0.015
//! order = 4
//! t_grid = -2:2:0.1
//! volumes = 4, 6, 8
//!
//! [output]
//! prefix = ising
//! ```
//!
//! Matrix literals are lists of rows whose entries are `re` or `re+im i`.
//! `pauli:ZZ` is shorthand for Kronecker products of I, X, Y, Z. A term is
//! a `;`-separated list of site offsets (coordinates joined by `,`), a `|`,
//! then the matrix acting on those sites in that order.

use std::fmt;

use qldp_core::model::{site, LatticeBox};
use qldp_core::opalg::{kron, spin, Operator};
use qldp_core::{BaseInteraction, Caps, Model, Potential, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

type Parsed<T> = Result<T, ParseError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Standard,
    Literal,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub model: Model,
    pub beta: f64,
    pub order: usize,
    pub t_grid: Vec<f64>,
    pub x_grid: Vec<f64>,
    pub a_grid: Vec<f64>,
    pub delta: f64,
    pub beta_max: f64,
    pub volumes: Vec<LatticeBox>,
    pub certified_only: bool,
    pub sign: Sign,
    pub caps: Caps,
    pub prefix: Option<String>,
}

/// A value together with where it starts in the source.
struct Field<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl Field<'_> {
    fn err(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column + offset,
            message: message.into(),
        }
    }

    fn f64(&self) -> Parsed<f64> {
        parse_real(self.text).ok_or_else(|| self.err(0, format!("expected a number, found `{}`", self.text)))
    }

    fn usize(&self) -> Parsed<usize> {
        self.text
            .parse()
            .map_err(|_| self.err(0, format!("expected a nonnegative integer, found `{}`", self.text)))
    }

    fn bool(&self) -> Parsed<bool> {
        match self.text {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(self.err(0, format!("expected true or false, found `{}`", other))),
        }
    }
}

fn parse_real(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// `re`, `re+im i`, `re-im i` or `im i`, with optional inner whitespace.
pub fn parse_complex(s: &str) -> Option<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = t.strip_suffix('i') else {
        return parse_real(&t).map(|re| C64::new(re, 0.0));
    };
    // split at the last sign that is not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (parse_real(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => parse_real(other)?,
    };
    Some(C64::new(re, im))
}

/// Parses `[[a, b], [c, d]]` or `pauli:XZ`.
fn parse_matrix(f: &Field) -> Parsed<Operator> {
    let text = f.text;
    if let Some(word) = text.strip_prefix("pauli:") {
        if word.is_empty() {
            return Err(f.err(6, "empty Pauli word"));
        }
        let mut op = Operator::identity(1);
        for (k, ch) in word.chars().enumerate() {
            let p = match ch {
                'I' => spin::id2(),
                'X' => spin::sx(),
                'Y' => spin::sy(),
                'Z' => spin::sz(),
                other => return Err(f.err(6 + k, format!("unknown Pauli letter `{}`", other))),
            };
            op = kron(&op, &p);
        }
        return Ok(op);
    }
    let inner = text
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| f.err(0, "matrix must be written as [[..], ..]"))?;
    let mut rows: Vec<Vec<C64>> = Vec::new();
    let mut pos = 1;
    let mut rest = inner;
    loop {
        let skipped = rest.len() - rest.trim_start().len();
        rest = rest.trim_start();
        pos += skipped;
        if rest.is_empty() {
            break;
        }
        if !rest.starts_with('[') {
            return Err(f.err(pos, "expected `[` to open a matrix row"));
        }
        let close = rest.find(']').ok_or_else(|| f.err(pos, "unterminated matrix row"))?;
        let body = &rest[1..close];
        let mut row = Vec::new();
        let mut entry_pos = pos + 1;
        for entry in body.split(',') {
            let value = parse_complex(entry).ok_or_else(|| {
                let lead = entry.len() - entry.trim_start().len();
                f.err(entry_pos + lead, format!("bad matrix entry `{}`", entry.trim()))
            })?;
            row.push(value);
            entry_pos += entry.len() + 1;
        }
        rows.push(row);
        pos += close + 1;
        rest = &rest[close + 1..];
        let skipped = rest.len() - rest.trim_start().len();
        rest = rest.trim_start();
        pos += skipped;
        if let Some(r) = rest.strip_prefix(',') {
            rest = r;
            pos += 1;
        } else if !rest.is_empty() {
            return Err(f.err(pos, "expected `,` between matrix rows"));
        }
    }
    if rows.is_empty() {
        return Err(f.err(0, "empty matrix"));
    }
    let n = rows.len();
    if let Some(k) = rows.iter().position(|r| r.len() != n) {
        return Err(f.err(0, format!("row {} has {} entries, expected {}", k + 1, rows[k].len(), n)));
    }
    Operator::from_rows(&rows).map_err(|e| f.err(0, e.to_string()))
}

/// `a, b, c` or the inclusive range `start:stop:step`.
fn parse_grid(f: &Field) -> Parsed<Vec<f64>> {
    let parts: Vec<&str> = f.text.split(':').collect();
    let grid = if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| parse_real(p))
            .collect::<Option<_>>()
            .ok_or_else(|| f.err(0, "range must be start:stop:step"))?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if step <= 0.0 || stop < start {
            return Err(f.err(0, "range needs step > 0 and stop ≥ start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| start + k as f64 * step).collect()
    } else {
        let mut out = Vec::new();
        let mut offset = 0;
        for piece in f.text.split(',') {
            let lead = piece.len() - piece.trim_start().len();
            out.push(parse_real(piece).ok_or_else(|| f.err(offset + lead, format!("bad number `{}`", piece.trim())))?);
            offset += piece.len() + 1;
        }
        out
    };
    if grid.is_empty() {
        return Err(f.err(0, "grid is empty"));
    }
    Ok(grid)
}

fn parse_volumes(f: &Field, lattice_dim: usize) -> Parsed<Vec<LatticeBox>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in f.text.split(',') {
        let lead = piece.len() - piece.trim_start().len();
        let col = offset + lead;
        let lengths: Vec<usize> = piece
            .trim()
            .split('x')
            .map(|s| s.trim().parse().ok().filter(|&n: &usize| n > 0))
            .collect::<Option<_>>()
            .ok_or_else(|| f.err(col, format!("bad volume `{}`", piece.trim())))?;
        if lengths.len() != lattice_dim {
            return Err(f.err(col, format!("volume `{}` needs {} side lengths", piece.trim(), lattice_dim)));
        }
        out.push(LatticeBox::new(&lengths).map_err(|e| f.err(col, e.to_string()))?);
        offset += piece.len() + 1;
    }
    Ok(out)
}

fn parse_term(f: &Field, lattice_dim: usize) -> Parsed<BaseInteraction> {
    let bar = f.text.find('|').ok_or_else(|| f.err(0, "term needs `sites | matrix`"))?;
    let mut shape = Vec::new();
    let mut offset = 0;
    for s in f.text[..bar].split(';') {
        let lead = s.len() - s.trim_start().len();
        let coords: Vec<i32> = s
            .trim()
            .split(',')
            .map(|c| c.trim().parse().ok())
            .collect::<Option<_>>()
            .ok_or_else(|| f.err(offset + lead, format!("bad site `{}`", s.trim())))?;
        if coords.len() != lattice_dim {
            return Err(f.err(offset + lead, format!("site `{}` needs {} coordinates", s.trim(), lattice_dim)));
        }
        shape.push(site(&coords));
        offset += s.len() + 1;
    }
    let tail = &f.text[bar + 1..];
    let lead = tail.len() - tail.trim_start().len();
    let m = Field {
        text: tail.trim(),
        line: f.line,
        column: f.column + bar + 1 + lead,
    };
    let op = parse_matrix(&m)?;
    BaseInteraction::new(shape, op).map_err(|e| m.err(0, e.to_string()))
}

/// Parses a configuration file's text.
pub fn parse(text: &str) -> Parsed<RunConfig> {
    let mut section = String::new();
    let mut fields: Vec<(String, String, Field)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            if !matches!(name, "model" | "run" | "output") {
                return Err(ParseError {
                    line,
                    column: indent + 2,
                    message: format!("unknown section `{}`", name),
                });
            }
            section = name.to_string();
            continue;
        }
        let eq = content.find('=').ok_or(ParseError {
            line,
            column: indent + 1,
            message: "expected `key = value`".into(),
        })?;
        if section.is_empty() {
            return Err(ParseError {
                line,
                column: indent + 1,
                message: "key outside of a section".into(),
            });
        }
        let key = content[..eq].trim().to_string();
        let value = &content[eq + 1..];
        let lead = value.len() - value.trim_start().len();
        fields.push((
            section.clone(),
            key,
            Field {
                text: value.trim(),
                line,
                column: eq + 2 + lead,
            },
        ));
    }

    let find = |sec: &str, key: &str| fields.iter().rev().find(|(s, k, _)| s == sec && k == key).map(|f| &f.2);
    let missing = |sec: &str, key: &str| ParseError {
        line: text.lines().count().max(1),
        column: 1,
        message: format!("missing `{}` in [{}]", key, sec),
    };

    for (sec, key, f) in &fields {
        let known: &[&str] = match sec.as_str() {
            "model" => &["lattice_dim", "site_dim", "observable", "term"],
            "run" => &[
                "beta", "order", "t_grid", "x_grid", "a_grid", "delta", "beta_max", "volumes",
                "certified_only", "sign", "max_dim", "max_ursell", "max_clusters",
            ],
            _ => &["prefix"],
        };
        if !known.contains(&key.as_str()) {
            return Err(ParseError {
                line: f.line,
                column: 1,
                message: format!("unknown key `{}` in [{}]", key, sec),
            });
        }
    }

    let lattice_dim = match find("model", "lattice_dim") {
        Some(f) => f.usize()?,
        None => 1,
    };
    if !(1..=3).contains(&lattice_dim) {
        return Err(find("model", "lattice_dim").unwrap().err(0, "lattice_dim must be 1, 2 or 3"));
    }
    let site_dim_field = find("model", "site_dim").ok_or_else(|| missing("model", "site_dim"))?;
    let site_dim = site_dim_field.usize()?;
    if site_dim < 2 {
        return Err(site_dim_field.err(0, "site_dim must be at least 2"));
    }
    let obs_field = find("model", "observable").ok_or_else(|| missing("model", "observable"))?;
    let observable = parse_matrix(obs_field)?;
    let terms = fields
        .iter()
        .filter(|(s, k, _)| s == "model" && k == "term")
        .map(|(_, _, f)| parse_term(f, lattice_dim))
        .collect::<Parsed<Vec<_>>>()?;
    let potential = Potential::new(lattice_dim, site_dim, terms).map_err(|e| site_dim_field.err(0, e.to_string()))?;
    let model = Model::new(potential, observable).map_err(|e| obs_field.err(0, e.to_string()))?;

    let real = |key: &str, default: f64| -> Parsed<f64> { find("run", key).map_or(Ok(default), |f| f.f64()) };
    let grid = |key: &str, default: &[f64]| -> Parsed<Vec<f64>> {
        find("run", key).map_or(Ok(default.to_vec()), parse_grid)
    };
    let count = |key: &str, default: usize| -> Parsed<usize> {
        let Some(f) = find("run", key) else { return Ok(default) };
        let v = f.usize()?;
        if v == 0 {
            return Err(f.err(0, format!("{} must be positive", key)));
        }
        Ok(v)
    };

    let beta = real("beta", 0.0)?;
    let beta_max = real("beta_max", 10.0)?;
    if beta < 0.0 || beta_max <= 0.0 {
        let f = find("run", if beta < 0.0 { "beta" } else { "beta_max" }).unwrap();
        return Err(f.err(0, "must be nonnegative (β) or positive (β_max)"));
    }
    let defaults = Caps::default();
    let caps = Caps {
        max_dim: count("max_dim", defaults.max_dim)?,
        max_ursell: count("max_ursell", defaults.max_ursell)?,
        max_clusters: count("max_clusters", defaults.max_clusters)?,
    };
    let a_grid = grid("a_grid", &[0.05, 0.1, 0.2, 0.4])?;
    if let Some(f) = find("run", "a_grid") {
        if a_grid.iter().any(|&a| a <= 0.0) {
            return Err(f.err(0, "a values must be positive"));
        }
    }
    let sign = match find("run", "sign") {
        None => Sign::Standard,
        Some(f) => match f.text {
            "standard" => Sign::Standard,
            "literal" => Sign::Literal,
            other => return Err(f.err(0, format!("sign must be standard or literal, found `{}`", other))),
        },
    };
    Ok(RunConfig {
        model,
        beta,
        order: count("order", 4)?,
        t_grid: grid("t_grid", &default_grid(2.0, 0.1))?,
        x_grid: grid("x_grid", &default_grid(0.9, 0.1))?,
        a_grid,
        delta: real("delta", 0.0)?,
        beta_max,
        volumes: match find("run", "volumes") {
            Some(f) => parse_volumes(f, lattice_dim)?,
            None => Vec::new(),
        },
        certified_only: find("run", "certified_only").map_or(Ok(true), |f| f.bool())?,
        sign,
        caps,
        prefix: find("output", "prefix").map(|f| f.text.to_string()),
    })
}

fn default_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).round() as i64;
    (-n..=n).map(|k| k as f64 * step).collect()
}
