use std::fs;
use std::io::Write;
use std::path::Path;

use super::wav::file_stem;
use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const FEAT_MAGIC: &[u8; 8] = b"PDTWFEAT";
const HEADER_LEN: usize = 8 + 4 + 4 + 4;

/// Loads a PDTWFEAT binary file, or a frame-per-row CSV when the magic bytes
/// are absent. `csv_frame_shift` supplies the frame shift for CSV input.
pub fn load_features(path: impl AsRef<Path>, csv_frame_shift: f64) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(FEAT_MAGIC) {
        parse_pdtwfeat(path, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::MalformedHeader {
            path: path.to_path_buf(),
            reason: "neither PDTWFEAT magic nor UTF-8 text".into(),
        })?;
        parse_csv(path, &text, csv_frame_shift)
    }
}

pub fn read_pdtwfeat(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pdtwfeat(path, &bytes)
}

pub fn read_csv_features(path: impl AsRef<Path>, frame_shift: f64) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(path, &text, frame_shift)
}

/// Writes the PDTWFEAT layout: magic, u32 frames, u32 dims, f32 frame shift,
/// then row-major f32 values, all little-endian.
pub fn write_pdtwfeat(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    buf.extend_from_slice(FEAT_MAGIC);
    buf.extend_from_slice(&(m.n_frames() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.dims() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.frame_shift as f32).to_le_bytes());
    for &v in m.as_slice() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

fn parse_pdtwfeat(path: &Path, bytes: &[u8]) -> Result<FeatureMatrix> {
    let bad = |reason: String| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN || !bytes.starts_with(FEAT_MAGIC) {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    let word = |at: usize| [bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]];
    let n_frames = u32::from_le_bytes(word(8)) as usize;
    let dims = u32::from_le_bytes(word(12)) as usize;
    let shift32 = f32::from_le_bytes(word(16));
    if n_frames == 0 || dims == 0 {
        return Err(bad(format!("empty shape {n_frames}x{dims}")));
    }
    if !(shift32 > 0.0 && shift32.is_finite()) {
        return Err(bad(format!("invalid frame shift {shift32}")));
    }
    let expected = n_frames
        .checked_mul(dims)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN));
    if expected != Some(bytes.len()) {
        return Err(bad(format!(
            "{n_frames}x{dims} frames need {expected:?} bytes, file has {}",
            bytes.len()
        )));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let shift = decimal_widen(shift32);
    FeatureMatrix::new(file_stem(path), data, dims, shift, shift, 0.0)
}

// Widens through the shortest decimal form, so 0.01f32 becomes 0.01f64 and
// narrowing back reproduces the same bits.
fn decimal_widen(x: f32) -> f64 {
    x.to_string().parse().unwrap_or(x as f64)
}

fn parse_csv(path: &Path, text: &str, frame_shift: f64) -> Result<FeatureMatrix> {
    let mut data = Vec::new();
    let mut dims = None;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::MalformedLine {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: e.to_string(),
            })?;
        match dims {
            None => dims = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::DimensionMismatch {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    expected: d,
                    found: row.len(),
                })
            }
            _ => {}
        }
        data.extend(row);
    }
    let dims = dims.ok_or_else(|| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: "no frames".into(),
    })?;
    FeatureMatrix::new(file_stem(path), data, dims, frame_shift, frame_shift, 0.0)
}
