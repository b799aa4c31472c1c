//! Touchstone v1 reader for S-parameter files (`.sNp`).
//!
//! Supports the option line `# <unit> S <RI|MA|DB> R <z0>` (any token order, defaults
//! `GHz S MA R 50`), `!` comments and free-form data records. Two-port records use the
//! v1 column order `S11 S21 S12 S22`; larger networks are row-major. Noise blocks and
//! v2 keywords are not supported.

use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::network::SMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TouchstoneFormat {
    /// real, imaginary
    RealImag,
    /// magnitude, angle in degrees
    MagAngle,
    /// 20·log10 magnitude, angle in degrees
    DbAngle,
}

impl TouchstoneFormat {
    fn decode(self, a: f64, b: f64) -> Complex64 {
        match self {
            Self::RealImag => Complex64::new(a, b),
            Self::MagAngle => Complex64::from_polar(a, b.to_radians()),
            Self::DbAngle => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Touchstone {
    pub z0: f64,
    pub format: TouchstoneFormat,
    /// Hz
    pub frequencies: Vec<f64>,
    pub matrices: Vec<CMatrix>,
}

impl Touchstone {
    /// Matrix at the sample nearest to `frequency` (Hz). Ties go to the lower frequency.
    pub fn nearest(&self, frequency: f64) -> Result<SMatrix> {
        let idx = self
            .frequencies
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| (*a - frequency).abs().total_cmp(&(*b - frequency).abs()))
            .map(|(i, _)| i)
            .ok_or(Error::EmptyData)?;
        SMatrix::new(self.matrices[idx].clone(), self.z0)
    }
}

struct Options {
    unit: f64,
    format: TouchstoneFormat,
    z0: f64,
}

fn parse_options(line: &str) -> Result<Options> {
    let malformed = || Error::MalformedOptionLine(line.trim().to_string());
    let mut opts = Options { unit: 1e9, format: TouchstoneFormat::MagAngle, z0: 50.0 };
    let mut toks = line.trim().trim_start_matches('#').split_whitespace();
    while let Some(tok) = toks.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opts.unit = 1.0,
            "KHZ" => opts.unit = 1e3,
            "MHZ" => opts.unit = 1e6,
            "GHZ" => opts.unit = 1e9,
            "S" => {}
            p @ ("Y" | "Z" | "H" | "G") => return Err(Error::UnsupportedParameter(p.to_string())),
            "RI" => opts.format = TouchstoneFormat::RealImag,
            "MA" => opts.format = TouchstoneFormat::MagAngle,
            "DB" => opts.format = TouchstoneFormat::DbAngle,
            "R" => {
                let z0: f64 = toks.next().and_then(|v| v.parse().ok()).ok_or_else(malformed)?;
                if !(z0.is_finite() && z0 > 0.0) {
                    return Err(malformed());
                }
                opts.z0 = z0;
            }
            _ => return Err(malformed()),
        }
    }
    Ok(opts)
}

/// Parses Touchstone text for an `n_ports`-port network.
pub fn parse_touchstone(text: &str, n_ports: usize) -> Result<Touchstone> {
    if n_ports == 0 {
        return Err(Error::InvalidArgument("Touchstone port count must be >= 1".into()));
    }
    let mut options: Option<Options> = None;
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            // only the first option line counts
            if options.is_none() {
                options = Some(parse_options(line)?);
            }
            continue;
        }
        if line.starts_with('[') {
            return Err(Error::Parse { line: idx + 1, msg: "Touchstone v2 keywords are not supported".into() });
        }
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                msg: format!("invalid number `{tok}`"),
            })?;
            values.push(v);
        }
    }
    let opts = options.unwrap_or(Options { unit: 1e9, format: TouchstoneFormat::MagAngle, z0: 50.0 });

    let record = 1 + 2 * n_ports * n_ports;
    let mut frequencies = Vec::new();
    let mut matrices = Vec::new();
    let mut pos = 0;
    while pos < values.len() {
        let freq = values[pos] * opts.unit;
        // a non-increasing frequency starts a noise block
        if frequencies.last().is_some_and(|&last| freq <= last) {
            break;
        }
        if pos + record > values.len() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("truncated record at frequency {freq} Hz"),
            });
        }
        let pairs = &values[pos + 1..pos + record];
        let mut m = CMatrix::zeros(n_ports, n_ports);
        for k in 0..n_ports * n_ports {
            let (i, j) = if n_ports == 2 { (k % 2, k / 2) } else { (k / n_ports, k % n_ports) };
            m[(i, j)] = opts.format.decode(pairs[2 * k], pairs[2 * k + 1]);
        }
        frequencies.push(freq);
        matrices.push(m);
        pos += record;
    }
    if matrices.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(Touchstone { z0: opts.z0, format: opts.format, frequencies, matrices })
}

fn ports_from_extension(path: &Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    ext.strip_prefix('s')?.strip_suffix('p')?.parse().ok()
}

/// Reads an `.sNp` file and returns the matrix at the frequency nearest `frequency` (Hz).
pub fn read_touchstone(path: impl AsRef<Path>, frequency: f64) -> Result<SMatrix> {
    let path = path.as_ref();
    let n = ports_from_extension(path).ok_or_else(|| {
        Error::InvalidArgument(format!("cannot infer port count from `{}` (expected .sNp)", path.display()))
    })?;
    parse_touchstone(&std::fs::read_to_string(path)?, n)?.nearest(frequency)
}
