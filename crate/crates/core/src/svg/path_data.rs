//! Path `d` attribute parsing into cubic segments.
//!
//! Lines and quadratics are raised to cubics exactly. Arcs are replaced by
//! a straight line to their end point. Only the first subpath is kept.

use alloc::vec::Vec;

use super::DialectError;
use crate::geom::{CubicSegment, Point};

pub struct ParsedPath {
    pub start: Point,
    pub segments: Vec<CubicSegment>,
    pub closed: bool,
    /// Constructs that were approximated or dropped.
    pub warnings: usize,
}

struct Lexer<'a> {
    b: &'a [u8],
    i: usize,
}

impl<'a> Lexer<'a> {
    fn skip_sep(&mut self) {
        while self.i < self.b.len() && (self.b[self.i].is_ascii_whitespace() || self.b[self.i] == b',') {
            self.i += 1;
        }
    }

    fn peek_command(&mut self) -> Option<u8> {
        self.skip_sep();
        self.b.get(self.i).copied().filter(|c| c.is_ascii_alphabetic() && *c != b'e' && *c != b'E')
    }

    fn at_number(&mut self) -> bool {
        self.skip_sep();
        matches!(self.b.get(self.i), Some(c) if c.is_ascii_digit() || matches!(c, b'-' | b'+' | b'.'))
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_sep();
        let s = self.i;
        let mut j = s;
        if matches!(self.b.get(j), Some(b'-' | b'+')) {
            j += 1;
        }
        let mut digits = 0;
        while matches!(self.b.get(j), Some(c) if c.is_ascii_digit()) {
            j += 1;
            digits += 1;
        }
        if self.b.get(j) == Some(&b'.') {
            j += 1;
            while matches!(self.b.get(j), Some(c) if c.is_ascii_digit()) {
                j += 1;
                digits += 1;
            }
        }
        if digits == 0 {
            return None;
        }
        if matches!(self.b.get(j), Some(b'e' | b'E')) {
            let mut k = j + 1;
            if matches!(self.b.get(k), Some(b'-' | b'+')) {
                k += 1;
            }
            let es = k;
            while matches!(self.b.get(k), Some(c) if c.is_ascii_digit()) {
                k += 1;
            }
            if k > es {
                j = k;
            }
        }
        let text = core::str::from_utf8(&self.b[s..j]).ok()?;
        let v: f64 = text.parse().ok()?;
        self.i = j;
        v.is_finite().then_some(v)
    }

    fn point(&mut self) -> Option<Point> {
        let x = self.number()?;
        let y = self.number()?;
        Some(Point::new(x, y))
    }
}

fn bad(msg: &str) -> DialectError {
    DialectError::MalformedGeometry(alloc::format!("path data: {msg}"))
}

pub fn parse_path_data(d: &str) -> Result<ParsedPath, DialectError> {
    let mut lx = Lexer { b: d.as_bytes(), i: 0 };
    let mut warnings = 0;
    let cmd = lx.peek_command().ok_or_else(|| bad("must start with a moveto"))?;
    if cmd != b'M' && cmd != b'm' {
        return Err(bad("must start with a moveto"));
    }
    lx.i += 1;
    let start = lx.point().ok_or_else(|| bad("bad moveto coordinates"))?;
    let mut cur = start;
    let mut segments: Vec<CubicSegment> = Vec::new();
    let mut closed = false;
    // implicit lineto after a moveto
    let mut command = if cmd == b'm' { b'l' } else { b'L' };
    // reflection points for smooth curves
    let mut last_cubic_c2: Option<Point> = None;
    let mut last_quad_c: Option<Point> = None;

    loop {
        if let Some(c) = lx.peek_command() {
            lx.i += 1;
            command = c;
            if c == b'Z' || c == b'z' {
                closed = true;
                if lx.peek_command().is_some() || lx.at_number() {
                    warnings += 1;
                }
                break;
            }
            if c == b'M' || c == b'm' {
                // second subpath: dropped
                warnings += 1;
                break;
            }
        } else if !lx.at_number() {
            if lx.i < lx.b.len() {
                warnings += 1;
            }
            break;
        }
        let rel = command.is_ascii_lowercase();
        let base = if rel { cur } else { Point::default() };
        let abs = |p: Point| Point::new(p.x + base.x, p.y + base.y);
        let (seg, cubic_c2, quad_c) = match command.to_ascii_uppercase() {
            b'L' => {
                let p = abs(lx.point().ok_or_else(|| bad("bad lineto"))?);
                (CubicSegment::line(cur, p), None, None)
            }
            b'H' => {
                let x = lx.number().ok_or_else(|| bad("bad horizontal lineto"))?;
                let p = Point::new(if rel { cur.x + x } else { x }, cur.y);
                (CubicSegment::line(cur, p), None, None)
            }
            b'V' => {
                let y = lx.number().ok_or_else(|| bad("bad vertical lineto"))?;
                let p = Point::new(cur.x, if rel { cur.y + y } else { y });
                (CubicSegment::line(cur, p), None, None)
            }
            b'C' => {
                let c1 = abs(lx.point().ok_or_else(|| bad("bad curveto"))?);
                let c2 = abs(lx.point().ok_or_else(|| bad("bad curveto"))?);
                let e = abs(lx.point().ok_or_else(|| bad("bad curveto"))?);
                (CubicSegment::new(c1, c2, e), Some(c2), None)
            }
            b'S' => {
                let c1 = match last_cubic_c2 {
                    Some(p) => Point::new(2.0 * cur.x - p.x, 2.0 * cur.y - p.y),
                    None => cur,
                };
                let c2 = abs(lx.point().ok_or_else(|| bad("bad smooth curveto"))?);
                let e = abs(lx.point().ok_or_else(|| bad("bad smooth curveto"))?);
                (CubicSegment::new(c1, c2, e), Some(c2), None)
            }
            b'Q' | b'T' => {
                let q = if command.eq_ignore_ascii_case(&b'Q') {
                    abs(lx.point().ok_or_else(|| bad("bad quadratic"))?)
                } else {
                    match last_quad_c {
                        Some(p) => Point::new(2.0 * cur.x - p.x, 2.0 * cur.y - p.y),
                        None => cur,
                    }
                };
                let e = abs(lx.point().ok_or_else(|| bad("bad quadratic"))?);
                let c1 = Point::new(cur.x + 2.0 / 3.0 * (q.x - cur.x), cur.y + 2.0 / 3.0 * (q.y - cur.y));
                let c2 = Point::new(e.x + 2.0 / 3.0 * (q.x - e.x), e.y + 2.0 / 3.0 * (q.y - e.y));
                (CubicSegment::new(c1, c2, e), None, Some(q))
            }
            b'A' => {
                for _ in 0..5 {
                    lx.number().ok_or_else(|| bad("bad arc"))?;
                }
                let e = abs(lx.point().ok_or_else(|| bad("bad arc"))?);
                warnings += 1;
                (CubicSegment::line(cur, e), None, None)
            }
            _ => {
                warnings += 1;
                break;
            }
        };
        cur = seg.end;
        segments.push(seg);
        last_cubic_c2 = cubic_c2;
        last_quad_c = quad_c;
    }
    if segments.is_empty() {
        return Err(bad("no drawing segments"));
    }
    Ok(ParsedPath {
        start,
        segments,
        closed,
        warnings,
    })
}
