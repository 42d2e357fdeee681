//! Wire format.
//!
//! Client to emulator, one ASCII line per frame:
//!
//! ```text
//! SET <seq> <a1> <a2> <a3> <a4>\n
//! GET <seq>\n
//! PING <seq>\n
//! ```
//!
//! Emulator to client:
//!
//! ```text
//! ACK <seq>\n
//! NACK <seq> <reason>\n
//! POS <seq> <a1> <a2> <a3> <a4>\n
//! ```
//!
//! Fields are separated by exactly one space. Angles are radians, written
//! with six decimals; the decoder accepts any plain decimal
//! (`-?digits[.digits]`). Sequence numbers are unsigned decimal integers
//! without leading zeros.

use std::fmt::{self, Write as _};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommandFrame {
    Set { seq: u64, angles: [f64; 4] },
    Get { seq: u64 },
    Ping { seq: u64 },
}

impl CommandFrame {
    pub fn seq(&self) -> u64 {
        match self {
            CommandFrame::Set { seq, .. } | CommandFrame::Get { seq } | CommandFrame::Ping { seq } => *seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Ack { seq: u64 },
    Nack { seq: u64, reason: String },
    Pos { seq: u64, angles: [f64; 4] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    MissingNewline,
    UnknownVerb,
    WrongArity { expected: usize, found: usize },
    BadSequence,
    BadNumber,
    BadSeparator,
    BadReason,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Empty => f.write_str("empty line"),
            ParseErrorKind::MissingNewline => f.write_str("missing newline"),
            ParseErrorKind::UnknownVerb => f.write_str("unknown verb"),
            ParseErrorKind::WrongArity { expected, found } => {
                write!(f, "expected {expected} fields, found {found}")
            }
            ParseErrorKind::BadSequence => f.write_str("bad sequence number"),
            ParseErrorKind::BadNumber => f.write_str("bad number"),
            ParseErrorKind::BadSeparator => f.write_str("fields must be separated by one space"),
            ParseErrorKind::BadReason => f.write_str("bad reason text"),
        }
    }
}

/// Parse failure at byte `offset` of the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(offset: usize, kind: ParseErrorKind) -> Self {
        Self { offset, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EncodeError {
    #[error("angle {index} is not finite")]
    NonFinite { index: usize },
}

fn push_angles(out: &mut String, angles: &[f64; 4]) -> Result<(), EncodeError> {
    for (index, a) in angles.iter().enumerate() {
        if !a.is_finite() {
            return Err(EncodeError::NonFinite { index });
        }
        write!(out, " {a:.6}").expect("writing to a String cannot fail");
    }
    Ok(())
}

pub fn encode(frame: &CommandFrame) -> Result<Vec<u8>, EncodeError> {
    let mut out = String::with_capacity(64);
    match frame {
        CommandFrame::Set { seq, angles } => {
            write!(out, "SET {seq}").expect("writing to a String cannot fail");
            push_angles(&mut out, angles)?;
        }
        CommandFrame::Get { seq } => write!(out, "GET {seq}").expect("writing to a String cannot fail"),
        CommandFrame::Ping { seq } => write!(out, "PING {seq}").expect("writing to a String cannot fail"),
    }
    out.push('\n');
    Ok(out.into_bytes())
}

pub fn encode_reply(reply: &Reply) -> Result<Vec<u8>, EncodeError> {
    let mut out = String::with_capacity(64);
    match reply {
        Reply::Ack { seq } => write!(out, "ACK {seq}").expect("writing to a String cannot fail"),
        Reply::Nack { seq, reason } => {
            let clean: String = reason
                .chars()
                .map(|c| if c.is_ascii_graphic() || c == ' ' { c } else { '?' })
                .collect();
            let clean = clean.split_whitespace().collect::<Vec<_>>().join(" ");
            let clean = if clean.is_empty() { "error" } else { clean.as_str() };
            write!(out, "NACK {seq} {clean}").expect("writing to a String cannot fail");
        }
        Reply::Pos { seq, angles } => {
            write!(out, "POS {seq}").expect("writing to a String cannot fail");
            push_angles(&mut out, angles)?;
        }
    }
    out.push('\n');
    Ok(out.into_bytes())
}

/// Splits a newline-terminated line into `(offset, token)` pairs.
fn tokens(line: &[u8]) -> Result<Vec<(usize, &[u8])>, ParseError> {
    let body = match line.split_last() {
        Some((b'\n', body)) => body,
        _ => return Err(ParseError::at(line.len(), ParseErrorKind::MissingNewline)),
    };
    if body.is_empty() {
        return Err(ParseError::at(0, ParseErrorKind::Empty));
    }
    let mut out = Vec::new();
    let mut start = 0;
    for (i, b) in body.iter().enumerate() {
        if *b == b' ' {
            if i == start {
                return Err(ParseError::at(i, ParseErrorKind::BadSeparator));
            }
            out.push((start, &body[start..i]));
            start = i + 1;
        } else if !b.is_ascii_graphic() {
            return Err(ParseError::at(i, ParseErrorKind::BadSeparator));
        }
    }
    if start == body.len() {
        return Err(ParseError::at(start, ParseErrorKind::BadSeparator));
    }
    out.push((start, &body[start..]));
    Ok(out)
}

fn parse_seq(offset: usize, token: &[u8]) -> Result<u64, ParseError> {
    let bad = ParseError::at(offset, ParseErrorKind::BadSequence);
    if token.is_empty() || !token.iter().all(u8::is_ascii_digit) || (token.len() > 1 && token[0] == b'0') {
        return Err(bad);
    }
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(bad)
}

fn parse_angle(offset: usize, token: &[u8]) -> Result<f64, ParseError> {
    let bad = ParseError::at(offset, ParseErrorKind::BadNumber);
    let digits = token.strip_prefix(b"-").unwrap_or(token);
    let (int, frac) = match digits.iter().position(|b| *b == b'.') {
        Some(dot) => (&digits[..dot], Some(&digits[dot + 1..])),
        None => (digits, None),
    };
    let all_digits = |s: &[u8]| !s.is_empty() && s.iter().all(u8::is_ascii_digit);
    if !all_digits(int) || frac.is_some_and(|f| !all_digits(f)) {
        return Err(bad);
    }
    let value: f64 = std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(bad)?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad)
    }
}

fn expect_arity(toks: &[(usize, &[u8])], expected: usize, line_len: usize) -> Result<(), ParseError> {
    if toks.len() == expected {
        return Ok(());
    }
    let offset = toks.get(expected).map_or(line_len.saturating_sub(1), |t| t.0);
    Err(ParseError::at(
        offset,
        ParseErrorKind::WrongArity {
            expected,
            found: toks.len(),
        },
    ))
}

fn parse_four(toks: &[(usize, &[u8])]) -> Result<[f64; 4], ParseError> {
    let mut angles = [0.0; 4];
    for (slot, (offset, token)) in angles.iter_mut().zip(toks) {
        *slot = parse_angle(*offset, token)?;
    }
    Ok(angles)
}

/// Strictly parses one newline-terminated command line.
pub fn decode(line: &[u8]) -> Result<CommandFrame, ParseError> {
    let toks = tokens(line)?;
    let (verb_at, verb) = toks[0];
    match verb {
        b"SET" => {
            expect_arity(&toks, 6, line.len())?;
            let seq = parse_seq(toks[1].0, toks[1].1)?;
            let angles = parse_four(&toks[2..])?;
            Ok(CommandFrame::Set { seq, angles })
        }
        b"GET" => {
            expect_arity(&toks, 2, line.len())?;
            Ok(CommandFrame::Get {
                seq: parse_seq(toks[1].0, toks[1].1)?,
            })
        }
        b"PING" => {
            expect_arity(&toks, 2, line.len())?;
            Ok(CommandFrame::Ping {
                seq: parse_seq(toks[1].0, toks[1].1)?,
            })
        }
        _ => Err(ParseError::at(verb_at, ParseErrorKind::UnknownVerb)),
    }
}

pub fn decode_reply(line: &[u8]) -> Result<Reply, ParseError> {
    let toks = tokens(line)?;
    let (verb_at, verb) = toks[0];
    match verb {
        b"ACK" => {
            expect_arity(&toks, 2, line.len())?;
            Ok(Reply::Ack {
                seq: parse_seq(toks[1].0, toks[1].1)?,
            })
        }
        b"NACK" => {
            if toks.len() < 3 {
                return Err(ParseError::at(
                    line.len() - 1,
                    ParseErrorKind::WrongArity {
                        expected: 3,
                        found: toks.len(),
                    },
                ));
            }
            let seq = parse_seq(toks[1].0, toks[1].1)?;
            let reason_at = toks[2].0;
            let reason = std::str::from_utf8(&line[reason_at..line.len() - 1])
                .map_err(|_| ParseError::at(reason_at, ParseErrorKind::BadReason))?;
            Ok(Reply::Nack {
                seq,
                reason: reason.to_string(),
            })
        }
        b"POS" => {
            expect_arity(&toks, 6, line.len())?;
            let seq = parse_seq(toks[1].0, toks[1].1)?;
            Ok(Reply::Pos {
                seq,
                angles: parse_four(&toks[2..])?,
            })
        }
        _ => Err(ParseError::at(verb_at, ParseErrorKind::UnknownVerb)),
    }
}
