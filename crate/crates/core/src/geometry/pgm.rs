//! 16-bit binary PGM (P5, big-endian) with a JSON sidecar holding the grid.
//!
//! Pixels are written in flat cell order: the first axis runs along a row,
//! rows follow the second axis (row 0 is the lowest `y`), and 3-D slices are
//! stacked vertically.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::domain::GridDomain;
use super::grid::GridSpec;
use super::shape::AnalyticTag;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub grid: GridSpec,
    pub analytic: AnalyticTag,
    /// Value represented by the pixel value 65535.
    pub scale: f64,
}

pub fn encode_pgm16(width: usize, height: usize, pixels: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.reserve(2 * pixels.len());
    for p in pixels {
        out.extend_from_slice(&p.to_be_bytes());
    }
    out
}

pub fn decode_pgm16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if tokens[0] != "P5" {
        return Err(Error::Format(format!("expected P5 magic, found {:?}", tokens[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM number {s:?}")));
    let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval != 65535 {
        return Err(Error::Format(format!("expected 16-bit maxval 65535, found {maxval}")));
    }
    let need = 2 * w * h;
    if bytes.len() < pos + need {
        return Err(Error::Format(format!("raster has {} bytes, need {need}", bytes.len().saturating_sub(pos))));
    }
    let pixels = bytes[pos..pos + need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    Ok((w, h, pixels))
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

fn quantize(v: f64, scale: f64) -> u16 {
    if scale <= 0.0 {
        return 0;
    }
    ((v / scale).clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Writes a nonnegative field scaled so that `scale` maps to 65535.
pub fn save_field(path: &Path, spec: &GridSpec, values: &[f64], scale: f64, analytic: &AnalyticTag) -> Result<()> {
    let pixels: Vec<u16> = values.iter().map(|&v| quantize(v, scale)).collect();
    let width = spec.cells_per_axis[0];
    let height = spec.len() / width;
    std::fs::write(path, encode_pgm16(width, height, &pixels))?;
    let side = Sidecar { grid: spec.clone(), analytic: analytic.clone(), scale };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn save_domain(path: &Path, domain: &GridDomain) -> Result<()> {
    save_field(path, &domain.spec, &domain.occupancy, 1.0, &domain.analytic)
}

/// Reads a field and its sidecar; values are rescaled by the sidecar's `scale`.
pub fn load_field(path: &Path) -> Result<(Sidecar, Vec<f64>)> {
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    side.grid.validate()?;
    let (w, h, pixels) = decode_pgm16(&std::fs::read(path)?)?;
    if w * h != side.grid.len() || w != side.grid.cells_per_axis[0] {
        return Err(Error::Format(format!("PGM is {w}x{h}, sidecar grid has {} cells", side.grid.len())));
    }
    let values = pixels.iter().map(|&p| p as f64 / 65535.0 * side.scale).collect();
    Ok((side, values))
}

pub fn load_domain(path: &Path) -> Result<GridDomain> {
    let (side, values) = load_field(path)?;
    GridDomain::from_occupancy(side.grid, values, side.analytic)
}
