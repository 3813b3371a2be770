//! Binary (P5) and plain (P2) PGM maps. Values are stored as `v / maxval`.

use postree_core::raster::{BinMap, GrayMap};

use crate::Error;

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(format!("pgm: {}", msg.into()))
}

struct Header {
    width: u32,
    height: u32,
    maxval: u32,
    data_start: usize,
}

fn header(bytes: &[u8]) -> Result<(bool, Header), Error> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(bad("expected P5 or P2 magic")),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for f in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad header number"))?;
    }
    // exactly one whitespace byte separates the header from binary data
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(bad("header not terminated"));
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} out of range")));
    }
    Ok((
        binary,
        Header {
            width,
            height,
            maxval,
            data_start: pos + 1,
        },
    ))
}

pub fn decode(bytes: &[u8]) -> Result<GrayMap, Error> {
    let (binary, h) = header(bytes)?;
    let n = h.width as usize * h.height as usize;
    let max = h.maxval as f32;
    let data = &bytes[h.data_start..];
    let values: Vec<f32> = if binary {
        let wide = h.maxval > 255;
        let need = if wide { 2 * n } else { n };
        if data.len() < need {
            return Err(bad(format!("truncated data: {} of {need} bytes", data.len())));
        }
        if wide {
            data[..need]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / max)
                .collect()
        } else {
            data[..n].iter().map(|v| *v as f32 / max).collect()
        }
    } else {
        let text = std::str::from_utf8(data).map_err(|_| bad("non-ASCII plain data"))?;
        let v: Vec<f32> = text
            .split_ascii_whitespace()
            .take(n)
            .map(|t| t.parse::<u32>().map(|v| v as f32 / max))
            .collect::<Result<_, _>>()
            .map_err(|_| bad("bad plain value"))?;
        if v.len() < n {
            return Err(bad("truncated plain data"));
        }
        v
    };
    if values.iter().any(|v| *v > 1.0) {
        return Err(bad("value above maxval"));
    }
    GrayMap::new(h.width, h.height, values).map_err(|e| bad(e.to_string()))
}

/// 8-bit P5.
pub fn encode(map: &GrayMap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    out.extend(map.values().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn encode_bin(map: &BinMap) -> Vec<u8> {
    encode(&GrayMap::from(map))
}

pub fn read(path: &std::path::Path) -> Result<GrayMap, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Parse {
            path: path.display().to_string(),
            message: m,
        },
        other => other,
    })
}
