//! Native text format for a single scattering matrix:
//!
//! ```text
//! smatrix v1 n=2 z0=50
//! 2.5000000000000000e-1+0.0000000000000000e0j -7.5000000000000000e-1+1.0000000000000000e-3j
//! ...
//! ```
//!
//! Entries carry 17 significant digits so a write/read cycle is bit-exact.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::network::SMatrix;

pub fn format_matrix(s: &SMatrix) -> String {
    let n = s.n();
    let mut out = format!("smatrix v1 n={n} z0={}\n", s.z0());
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| format_complex(s.data()[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn format_complex(v: Complex64) -> String {
    format!("{:.16e}{:+.16e}j", v.re, v.im)
}

fn parse_complex(tok: &str) -> Option<Complex64> {
    let body = tok.strip_suffix('j')?;
    let bytes = body.as_bytes();
    // the sign separating real and imaginary parts is not at the start and not an exponent sign
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re = body[..split].parse().ok()?;
    let im = body[split..].parse().ok()?;
    Some(Complex64::new(re, im))
}

fn header_field<'a>(tok: Option<&'a str>, key: &str, line: usize) -> Result<&'a str> {
    tok.and_then(|t| t.strip_prefix(key))
        .ok_or_else(|| Error::Parse { line, msg: format!("expected `{key}<value>` in header") })
}

pub fn parse_matrix(text: &str) -> Result<SMatrix> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty file".into() })?;
    let mut toks = header.split_whitespace();
    if toks.next() != Some("smatrix") || toks.next() != Some("v1") {
        return Err(Error::Parse { line: 1, msg: "expected header `smatrix v1 n=<N> z0=<ohms>`".into() });
    }
    let n: usize = header_field(toks.next(), "n=", 1)?
        .parse()
        .map_err(|_| Error::Parse { line: 1, msg: "invalid port count".into() })?;
    let z0: f64 = header_field(toks.next(), "z0=", 1)?
        .parse()
        .map_err(|_| Error::Parse { line: 1, msg: "invalid reference impedance".into() })?;

    let mut data = CMatrix::zeros(n, n);
    for i in 0..n {
        let (idx, row) = lines.next().ok_or(Error::Parse {
            line: i + 2,
            msg: format!("expected {n} matrix rows, found {i}"),
        })?;
        let entries: Vec<&str> = row.split_whitespace().collect();
        if entries.len() != n {
            return Err(Error::Parse { line: idx + 1, msg: format!("expected {n} entries, found {}", entries.len()) });
        }
        for (j, tok) in entries.iter().enumerate() {
            data[(i, j)] = parse_complex(tok).ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("invalid complex entry `{tok}`"),
            })?;
        }
    }
    if let Some((idx, _)) = lines.next() {
        return Err(Error::Parse { line: idx + 1, msg: "trailing content after matrix".into() });
    }
    SMatrix::new(data, z0)
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<SMatrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_file(s: &SMatrix, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_matrix(s))?;
    Ok(())
}
