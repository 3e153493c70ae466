//! Instance files.
//!
//! Text: a header line `MAXMIN v1 <kind> <n> <d>` followed by `n` lines of
//! `d` whitespace-separated decimals. Binary: the 16-byte header
//! `"MXMN" | u32 n | u32 d | u8 version | u8 kind | 2 zero bytes`, then
//! `n·d` little-endian `f64` values in row-major order.

use std::io::{BufRead, Write};
use std::path::Path;

use maxmin_core::linalg::Matrix;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MAGIC: &[u8; 4] = b"MXMN";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Game,
    Meb,
    Quadratics,
}

impl InstanceKind {
    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::Game => "game",
            InstanceKind::Meb => "meb",
            InstanceKind::Quadratics => "quadratics",
        }
    }

    fn code(self) -> u8 {
        match self {
            InstanceKind::Game => 0,
            InstanceKind::Meb => 1,
            InstanceKind::Quadratics => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(InstanceKind::Game),
            1 => Some(InstanceKind::Meb),
            2 => Some(InstanceKind::Quadratics),
            _ => None,
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "game" => Some(InstanceKind::Game),
            "meb" => Some(InstanceKind::Meb),
            "quadratics" => Some(InstanceKind::Quadratics),
            _ => None,
        }
    }
}

/// One row per strategy, point or center.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub kind: InstanceKind,
    pub rows: Matrix,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub fn write_text<W: Write>(inst: &InstanceFile, mut out: W) -> Result<(), CliError> {
    let m = &inst.rows;
    writeln!(out, "MAXMIN v1 {} {} {}", inst.kind.name(), m.rows(), m.cols())?;
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(inst: &InstanceFile, mut out: W) -> Result<(), CliError> {
    let m = &inst.rows;
    let n = u32::try_from(m.rows()).map_err(|_| bad("n does not fit in u32"))?;
    let d = u32::try_from(m.cols()).map_err(|_| bad("d does not fit in u32"))?;
    out.write_all(MAGIC)?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&d.to_le_bytes())?;
    out.write_all(&[VERSION, inst.kind.code(), 0, 0])?;
    for v in m.data() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_text<R: BufRead>(input: R) -> Result<InstanceFile, CliError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("empty instance file"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 || parts[0] != "MAXMIN" || parts[1] != "v1" {
        return Err(bad(format!("bad header line {header:?}")));
    }
    let kind = InstanceKind::from_name(parts[2]).ok_or_else(|| bad(format!("unknown kind {:?}", parts[2])))?;
    let n: usize = parts[3].parse().map_err(|_| bad("bad n in header"))?;
    let d: usize = parts[4].parse().map_err(|_| bad("bad d in header"))?;
    let mut data = Vec::with_capacity(n * d);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if row.len() != d {
            return Err(bad(format!("row {} has {} values, expected {d}", i + 1, row.len())));
        }
        data.extend(row);
    }
    if data.len() != n * d {
        return Err(bad(format!("expected {n} rows, found {}", data.len() / d.max(1))));
    }
    Ok(InstanceFile {
        kind,
        rows: Matrix::from_row_major(n, d, data)?,
    })
}

pub fn read_binary(bytes: &[u8]) -> Result<InstanceFile, CliError> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing MXMN header"));
    }
    let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let (n, d) = (word(4), word(8));
    if bytes[12] != VERSION {
        return Err(bad(format!("unsupported binary version {}", bytes[12])));
    }
    let kind = InstanceKind::from_code(bytes[13]).ok_or_else(|| bad(format!("unknown kind code {}", bytes[13])))?;
    let body = &bytes[16..];
    if body.len() != n * d * 8 {
        return Err(bad(format!("body has {} bytes, expected {}", body.len(), n * d * 8)));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(InstanceFile {
        kind,
        rows: Matrix::from_row_major(n, d, data)?,
    })
}

/// Detects the format from the magic bytes.
pub fn load(path: &Path) -> Result<InstanceFile, CliError> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        read_binary(&bytes)
    } else {
        read_text(std::io::Cursor::new(bytes))
    }
}

pub fn save(inst: &InstanceFile, path: &Path, binary: bool) -> Result<(), CliError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    if binary {
        write_binary(inst, &mut w)?;
    } else {
        write_text(inst, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> InstanceFile {
        InstanceFile {
            kind: InstanceKind::Game,
            rows: Matrix::from_rows(&[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 0.0]]).unwrap(),
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut buf = Vec::new();
        write_text(&sample(), &mut buf).unwrap();
        assert!(buf.starts_with(b"MAXMIN v1 game 2 2\n"));
        assert_eq!(read_text(&buf[..]).unwrap(), sample());
    }

    #[test]
    fn binary_header_layout() {
        let mut buf = Vec::new();
        write_binary(&sample(), &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 4 * 8);
        assert_eq!(&buf[..4], b"MXMN");
        assert_eq!(&buf[4..8], &2u32.to_le_bytes());
        assert_eq!(&buf[8..12], &2u32.to_le_bytes());
        assert_eq!(read_binary(&buf).unwrap(), sample());
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(read_text(&b"MAXMIN v2 game 1 1\n0\n"[..]).is_err());
        assert!(read_text(&b"MAXMIN v1 game 2 1\n0\n"[..]).is_err());
        assert!(read_binary(b"MXMN").is_err());
    }
}
