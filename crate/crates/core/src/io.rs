//! File formats: binary `F64M` matrices and `F64C` cubes, text label maps and
//! text spectral libraries.
//!
//! Binary layout (all integers little-endian `u32`, values little-endian IEEE-754 `f64`):
//!
//! ```text
//! F64M: "F64M" rows cols values[rows * cols]            (row-major)
//! F64C: "F64C" rows cols bands values[rows * cols * bands] ([row][col][band])
//! ```

use std::fs;
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::data::{HyperCube, LabelMap, Material, SpectralLibrary};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MATRIX_MAGIC: &[u8; 4] = b"F64M";
const CUBE_MAGIC: &[u8; 4] = b"F64C";

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn dim_u32(n: usize, what: &str) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::DimensionOverflow(format!("{what} = {n} exceeds u32")))
}

fn push_values<'a, T: Scalar>(buf: &mut Vec<u8>, values: impl Iterator<Item = &'a T>) {
    for v in values {
        buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
}

/// Encodes a matrix in the `F64M` format.
pub fn encode_matrix<T: Scalar>(m: &Array2<T>) -> Result<Vec<u8>> {
    let (rows, cols) = m.dim();
    let mut buf = Vec::with_capacity(12 + 8 * rows * cols);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&dim_u32(rows, "rows")?.to_le_bytes());
    buf.extend_from_slice(&dim_u32(cols, "cols")?.to_le_bytes());
    // `iter` walks in logical row-major order regardless of memory layout.
    push_values(&mut buf, m.iter());
    Ok(buf)
}

/// Splits off the header of a binary file, returning the dimensions and payload.
fn parse_header<'a>(
    bytes: &'a [u8],
    magic: &'static [u8; 4],
    ndims: usize,
) -> Result<(Vec<usize>, &'a [u8])> {
    let expected = std::str::from_utf8(magic).expect("ascii magic");
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::BadMagic { expected });
    }
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::Truncated {
            expected: header as u64,
            found: bytes.len() as u64,
        });
    }
    let dims: Vec<usize> = (0..ndims)
        .map(|i| {
            let off = 4 + 4 * i;
            u32::from_le_bytes(bytes[off..off + 4].try_into().expect("4 bytes")) as usize
        })
        .collect();
    let count = dims
        .iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d as u64))
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::DimensionOverflow(format!("dimensions {dims:?} overflow")))?;
    let expected = header as u64 + count;
    let found = bytes.len() as u64;
    if found < expected {
        return Err(Error::Truncated { expected, found });
    }
    if found > expected {
        return Err(Error::DimensionMismatch(format!(
            "{} trailing bytes after payload",
            found - expected
        )));
    }
    Ok((dims, &bytes[header..]))
}

fn decode_values<T: Scalar>(payload: &[u8]) -> Vec<T> {
    payload
        .chunks_exact(8)
        .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
        .collect()
}

/// Decodes an `F64M` byte buffer.
pub fn decode_matrix<T: Scalar>(bytes: &[u8]) -> Result<Array2<T>> {
    let (dims, payload) = parse_header(bytes, MATRIX_MAGIC, 2)?;
    Array2::from_shape_vec((dims[0], dims[1]), decode_values(payload))
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}

pub fn save_matrix<T: Scalar>(path: impl AsRef<Path>, m: &Array2<T>) -> Result<()> {
    write(path.as_ref(), &encode_matrix(m)?)
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<Array2<T>> {
    decode_matrix(&read(path.as_ref())?)
}

pub fn encode_cube<T: Scalar>(cube: &HyperCube<T>) -> Result<Vec<u8>> {
    let (rows, cols, bands) = cube.values().dim();
    let mut buf = Vec::with_capacity(16 + 8 * rows * cols * bands);
    buf.extend_from_slice(CUBE_MAGIC);
    buf.extend_from_slice(&dim_u32(rows, "rows")?.to_le_bytes());
    buf.extend_from_slice(&dim_u32(cols, "cols")?.to_le_bytes());
    buf.extend_from_slice(&dim_u32(bands, "bands")?.to_le_bytes());
    push_values(&mut buf, cube.values().iter());
    Ok(buf)
}

pub fn decode_cube<T: Scalar>(bytes: &[u8]) -> Result<HyperCube<T>> {
    let (dims, payload) = parse_header(bytes, CUBE_MAGIC, 3)?;
    let values = Array3::from_shape_vec((dims[0], dims[1], dims[2]), decode_values(payload))
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    HyperCube::new(values)
}

pub fn save_cube<T: Scalar>(path: impl AsRef<Path>, cube: &HyperCube<T>) -> Result<()> {
    write(path.as_ref(), &encode_cube(cube)?)
}

pub fn load_cube<T: Scalar>(path: impl AsRef<Path>) -> Result<HyperCube<T>> {
    decode_cube(&read(path.as_ref())?)
}

/// Yields `(line_number, trimmed_line)` for non-blank, non-`#` lines.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses a comma-separated integer label map, one image row per line.
pub fn parse_label_map(text: &str) -> Result<LabelMap> {
    let mut rows: Vec<Vec<usize>> = Vec::new();
    for (line, content) in content_lines(text) {
        let row = content
            .split(',')
            .map(|f| {
                f.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line,
                    message: format!("bad label {:?}: {e}", f.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} labels, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<usize> = rows.iter().flatten().copied().collect();
    let labels = Array2::from_shape_vec((rows.len(), ncols), flat)
        .map_err(|e| Error::InvalidLabels(e.to_string()))?;
    LabelMap::new(labels)
}

pub fn load_label_map(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_label_map(&text)
}

pub fn format_label_map(map: &LabelMap) -> String {
    let mut out = String::new();
    for row in map.labels().rows() {
        let fields: Vec<String> = row.iter().map(usize::to_string).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_label_map(path: impl AsRef<Path>, map: &LabelMap) -> Result<()> {
    write(path.as_ref(), format_label_map(map).as_bytes())
}

/// Parses a spectral library table: header `wavelength,<name>,...`, then one
/// comma-separated row of reals per wavelength. Lines starting with `#` are
/// comments.
pub fn parse_spectral_library(text: &str) -> Result<SpectralLibrary> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let names: Vec<&str> = header.split(',').map(str::trim).collect();
    if names[0] != "wavelength" {
        return Err(Error::Parse {
            line: hline,
            message: format!("first column must be \"wavelength\", found {:?}", names[0]),
        });
    }
    if names[1..].iter().any(|n| n.is_empty()) {
        return Err(Error::Parse {
            line: hline,
            message: "empty material name".into(),
        });
    }
    let mut wavelengths = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len() - 1];
    for (line, content) in lines {
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", names.len(), fields.len()),
            });
        }
        let values = fields
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("bad number {f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        wavelengths.push(values[0]);
        for (col, v) in columns.iter_mut().zip(&values[1..]) {
            col.push(*v);
        }
    }
    let materials = names[1..]
        .iter()
        .zip(columns)
        .map(|(name, reflectance)| Material {
            name: (*name).to_string(),
            reflectance,
        })
        .collect();
    SpectralLibrary::new(wavelengths, materials)
}

pub fn load_spectral_library(path: impl AsRef<Path>) -> Result<SpectralLibrary> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spectral_library(&text)
}

/// Formats a library so that [`parse_spectral_library`] reproduces it exactly
/// (`f64` `Display` output round-trips).
pub fn format_spectral_library(lib: &SpectralLibrary) -> String {
    let mut out = String::from("wavelength");
    for m in lib.materials() {
        out.push(',');
        out.push_str(&m.name);
    }
    out.push('\n');
    for (b, w) in lib.wavelengths().iter().enumerate() {
        out.push_str(&w.to_string());
        for m in lib.materials() {
            out.push(',');
            out.push_str(&m.reflectance[b].to_string());
        }
        out.push('\n');
    }
    out
}

pub fn save_spectral_library(path: impl AsRef<Path>, lib: &SpectralLibrary) -> Result<()> {
    write(path.as_ref(), format_spectral_library(lib).as_bytes())
}
