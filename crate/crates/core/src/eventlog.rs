//! Plain-text event logs, one event per line: `t kind x [y] u`.
//!
//! `kind` is one of `D`, `R`, `B`, `I`; vertices are written as
//! comma-separated coordinates; `t` and `u` use 17 significant digits so
//! that reading a log back reproduces the stream bit for bit. Lines starting
//! with `#` are comments.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::events::{Event, EventKind};
use crate::lattice::{Geometry, Vertex};

/// `v` with 17 significant digits, scientific notation.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_vertex(out: &mut String, g: Geometry, x: Vertex) {
    let coords = g.coords(x);
    for (i, c) in coords.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{c}");
    }
}

pub fn format_event(ev: &Event, g: Geometry) -> String {
    let mut s = format!("{} {} ", format_sig17(ev.time), ev.kind.code());
    match ev.kind {
        EventKind::Death(x) | EventKind::Recovery(x) => write_vertex(&mut s, g, x),
        EventKind::Birth { from, to } | EventKind::Infection { from, to } => {
            write_vertex(&mut s, g, from);
            s.push(' ');
            write_vertex(&mut s, g, to);
        }
    }
    s.push(' ');
    s.push_str(&format_sig17(ev.label));
    s
}

/// Log text for `events`, preceded by `# `-prefixed header lines.
pub fn format_log<'a, I>(header: &[String], events: I, g: Geometry) -> String
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut out = String::new();
    for h in header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    for ev in events {
        out.push_str(&format_event(ev, g));
        out.push('\n');
    }
    out
}

fn parse_vertex(tok: &str, g: Geometry, line: usize) -> Result<Vertex> {
    let coords = tok
        .split(',')
        .map(|c| c.parse::<i64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse {
            line,
            reason: format!("bad vertex {tok:?}: {e}"),
        })?;
    if coords.len() != g.dim || coords.iter().any(|&c| c < 0 || c as usize >= g.side) {
        return Err(Error::Parse {
            line,
            reason: format!("vertex {tok:?} is not on the torus"),
        });
    }
    Ok(g.index(&coords))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse().map_err(|e| Error::Parse {
        line,
        reason: format!("bad number {tok:?}: {e}"),
    })
}

pub fn parse_event(text: &str, g: Geometry, line: usize) -> Result<Event> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    let bad = |reason: &str| Error::Parse {
        line,
        reason: reason.to_string(),
    };
    if toks.len() < 4 {
        return Err(bad("too few fields"));
    }
    let time = parse_f64(toks[0], line)?;
    let (kind, label_tok) = match toks[1] {
        "D" | "R" if toks.len() == 4 => {
            let x = parse_vertex(toks[2], g, line)?;
            let k = if toks[1] == "D" {
                EventKind::Death(x)
            } else {
                EventKind::Recovery(x)
            };
            (k, toks[3])
        }
        "B" | "I" if toks.len() == 5 => {
            let from = parse_vertex(toks[2], g, line)?;
            let to = parse_vertex(toks[3], g, line)?;
            let k = if toks[1] == "B" {
                EventKind::Birth { from, to }
            } else {
                EventKind::Infection { from, to }
            };
            (k, toks[4])
        }
        _ => return Err(bad("unknown kind or wrong field count")),
    };
    Ok(Event {
        time,
        kind,
        label: parse_f64(label_tok, line)?,
    })
}

/// Parsed log: header lines (without `# `) and events.
pub fn parse_log(text: &str, g: Geometry) -> Result<(Vec<String>, Vec<Event>)> {
    let mut header = Vec::new();
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            header.push(h.trim_start().to_string());
            continue;
        }
        events.push(parse_event(line, g, i + 1)?);
    }
    Ok((header, events))
}
