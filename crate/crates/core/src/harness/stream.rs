//! Text stream format: one update per line, `<+|-> <S|T> <x> <y> [count]`.
//! `#` starts a comment; blank lines are skipped.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::{Domain, Point, SetId, Sign, StreamUpdate};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StreamError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: point ({x}, {y}) outside [1, {delta}]^2")]
    Range { line: usize, x: u64, y: u64, delta: u32 },
}

fn parse_line(line: usize, text: &str, domain: Domain) -> Result<Option<StreamUpdate>, StreamError> {
    let body = text.split('#').next().unwrap_or("").trim();
    if body.is_empty() {
        return Ok(None);
    }
    let err = |message: String| StreamError::Parse { line, message };
    let fields: Vec<&str> = body.split_whitespace().collect();
    if !(4..=5).contains(&fields.len()) {
        return Err(err(format!("expected 4 or 5 fields, found {}", fields.len())));
    }
    let sign = match fields[0] {
        "+" => Sign::Insert,
        "-" => Sign::Delete,
        other => return Err(err(format!("sign must be + or -, found {other:?}"))),
    };
    let set = match fields[1] {
        "S" => SetId::S,
        "T" => SetId::T,
        other => return Err(err(format!("set must be S or T, found {other:?}"))),
    };
    let number = |name: &str, s: &str| -> Result<u64, StreamError> {
        s.parse::<u64>()
            .map_err(|_| err(format!("{name} must be a non-negative integer, found {s:?}")))
    };
    let x = number("x", fields[2])?;
    let y = number("y", fields[3])?;
    let count = match fields.get(4) {
        Some(c) => number("count", c)?,
        None => 1,
    };
    if count == 0 {
        return Err(err("count must be positive".into()));
    }
    let delta = domain.delta();
    if !(1..=delta as u64).contains(&x) || !(1..=delta as u64).contains(&y) {
        return Err(StreamError::Range { line, x, y, delta });
    }
    let point = Point::new(x as u32, y as u32);
    Ok(Some(StreamUpdate { set, sign, point, count }))
}

/// Parses a whole stream; line numbers in errors are 1-based.
pub fn parse_stream(text: &str, domain: Domain) -> Result<Vec<StreamUpdate>, StreamError> {
    text.lines()
        .enumerate()
        .filter_map(|(i, l)| parse_line(i + 1, l, domain).transpose())
        .collect()
}

pub fn format_update(u: &StreamUpdate) -> String {
    let sign = match u.sign {
        Sign::Insert => '+',
        Sign::Delete => '-',
    };
    let set = match u.set {
        SetId::S => 'S',
        SetId::T => 'T',
    };
    if u.count == 1 {
        format!("{sign} {set} {} {}", u.point.x, u.point.y)
    } else {
        format!("{sign} {set} {} {} {}", u.point.x, u.point.y, u.count)
    }
}

pub fn write_stream(updates: &[StreamUpdate]) -> String {
    let mut out = String::new();
    for u in updates {
        let _ = writeln!(out, "{}", format_update(u));
    }
    out
}
