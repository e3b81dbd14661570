//! Text trace format.
//!
//! ```text
//! #workload <name>          optional, first directive
//! #phase <id> <weight>      starts a phase
//! #core <n>                 following events belong to core n (resets to 0 per phase)
//! <instr_gap> <R|W> 0x<hex> one memory event
//! #tail <n>                 instructions retired after the phase's last event
//! ```
//!
//! Any other line starting with `#`, and anything after `#` on an event
//! line, is a comment.

use std::io::{BufRead, Write};

use log::warn;

use super::{AccessEvent, AccessKind, PhaseTrace, Workload};
use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_trace_str(source: &str) -> Result<Workload> {
    parse_trace(source.as_bytes())
}

pub fn parse_trace<R: BufRead>(source: R) -> Result<Workload> {
    let mut workload = Workload::default();
    let mut core = 0u32;

    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }

        if let Some(directive) = line.strip_prefix('#') {
            let mut tokens = directive.split_whitespace();
            match tokens.next() {
                Some("workload") => {
                    let name = tokens
                        .next()
                        .ok_or_else(|| parse_err(lineno, "#workload needs a name"))?;
                    workload.name = name.to_string();
                }
                Some("phase") => {
                    let id = tokens
                        .next()
                        .ok_or_else(|| parse_err(lineno, "#phase needs an id"))?;
                    let weight_tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(lineno, "#phase needs a weight"))?;
                    let weight: f64 = weight_tok.parse().map_err(|_| {
                        parse_err(lineno, format!("invalid phase weight `{weight_tok}`"))
                    })?;
                    if !weight.is_finite() || weight < 0.0 {
                        return Err(parse_err(
                            lineno,
                            format!("phase weight must be finite and nonnegative, got {weight_tok}"),
                        ));
                    }
                    workload.phases.push(PhaseTrace::new(id, weight, Vec::new()));
                    core = 0;
                }
                Some("core") => {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(lineno, "#core needs an index"))?;
                    core = tok
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("invalid core index `{tok}`")))?;
                }
                Some("tail") => {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(lineno, "#tail needs a count"))?;
                    let tail: u64 = tok
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("invalid tail count `{tok}`")))?;
                    workload
                        .phases
                        .last_mut()
                        .ok_or_else(|| parse_err(lineno, "#tail before any #phase"))?
                        .trailing_gap = tail;
                }
                _ => {}
            }
            continue;
        }

        let body = line.split('#').next().unwrap_or("");
        let event = parse_event(body, lineno, core)?;
        workload
            .phases
            .last_mut()
            .ok_or_else(|| parse_err(lineno, "event before any #phase header"))?
            .events
            .push(event);
    }

    if workload.phases.is_empty() {
        return Err(Error::EmptyWorkload);
    }
    if workload.normalize_weights() {
        warn!(
            "workload `{}`: phase weights did not sum to 1; normalized",
            workload.name
        );
    }
    Ok(workload)
}

fn parse_event(body: &str, lineno: usize, core: u32) -> Result<AccessEvent> {
    let mut tokens = body.split_whitespace();
    let (Some(gap), Some(kind), Some(addr)) = (tokens.next(), tokens.next(), tokens.next()) else {
        return Err(parse_err(
            lineno,
            "expected `<instr_gap> <R|W> 0x<address>`",
        ));
    };
    if let Some(extra) = tokens.next() {
        return Err(parse_err(lineno, format!("unexpected token `{extra}`")));
    }
    let instr_gap = gap
        .parse()
        .map_err(|_| parse_err(lineno, format!("invalid instr_gap `{gap}`")))?;
    let kind = match kind {
        "R" => AccessKind::Read,
        "W" => AccessKind::Write,
        other => {
            return Err(parse_err(
                lineno,
                format!("invalid access kind `{other}` (expected R or W)"),
            ))
        }
    };
    let hex = addr
        .strip_prefix("0x")
        .or_else(|| addr.strip_prefix("0X"))
        .ok_or_else(|| parse_err(lineno, format!("address `{addr}` must start with 0x")))?;
    let address = u64::from_str_radix(hex, 16)
        .map_err(|_| parse_err(lineno, format!("invalid address `{addr}`")))?;
    Ok(AccessEvent {
        instr_gap,
        kind,
        address,
        core,
    })
}

pub fn write_trace<W: Write>(workload: &Workload, mut out: W) -> std::io::Result<()> {
    if !workload.name.is_empty() {
        writeln!(out, "#workload {}", workload.name)?;
    }
    for phase in &workload.phases {
        writeln!(out, "#phase {} {}", phase.id, phase.weight)?;
        let mut core = 0;
        for e in &phase.events {
            if e.core != core {
                writeln!(out, "#core {}", e.core)?;
                core = e.core;
            }
            let kind = match e.kind {
                AccessKind::Read => 'R',
                AccessKind::Write => 'W',
            };
            writeln!(out, "{} {} 0x{:x}", e.instr_gap, kind, e.address)?;
        }
        if phase.trailing_gap > 0 {
            writeln!(out, "#tail {}", phase.trailing_gap)?;
        }
    }
    Ok(())
}

pub fn write_trace_string(workload: &Workload) -> String {
    let mut buf = Vec::new();
    write_trace(workload, &mut buf).expect("writing to Vec cannot fail");
    String::from_utf8(buf).expect("trace text is ASCII")
}
