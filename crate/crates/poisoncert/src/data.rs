//! Synthetic distribution generators, IDX image ingestion, and dataset CSV
//! persistence.
//!
//! The byte-level parsers (`parse_dataset_csv`, `parse_idx_images`,
//! `parse_idx_labels`) accept untrusted input: they never panic, validate
//! lengths before allocating, and report the byte offset or line number of
//! the first defect.

use std::fs;
use std::path::Path;

use crate::core::{Dataset, Example};
use crate::error::{Error, Result};
use crate::learners::dot;
use crate::seeding::{next_f64, rng_from, sub_seed, sub_seed_indexed};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Two horizontal unit circles in R^3: with probability 1/2 a uniform angle
/// on the circle at z = +1 (label 1), otherwise on the circle at z = -1
/// (label 0). Realizable by the halfspace with normal (0, 0, 1).
pub fn gen_two_circles(m: usize, seed: u64) -> Result<Dataset> {
    let items: Vec<Example> = (0..m)
        .map(|i| {
            let mut rng = rng_from(sub_seed_indexed(seed, "two-circles", i as u64));
            let upper = rng.next_u64() & 1 == 1;
            let angle = next_f64(&mut rng) * std::f64::consts::TAU;
            let z = if upper { 1.0 } else { -1.0 };
            Example::new(vec![angle.cos(), angle.sin(), z], usize::from(upper))
        })
        .collect::<Result<_>>()?;
    Dataset::from_parts(items, 3, 2)
}

use rand_core::RngCore;

/// Uniform samples on the unit sphere labeled by the sign of
/// omega_truth . x (zero dot products take label 1).
pub fn gen_sphere_halfspace(m: usize, d: usize, omega_truth: &[f64], seed: u64) -> Result<Dataset> {
    if d < 2 {
        return Err(crate::error::invalid("sphere data needs d >= 2"));
    }
    if omega_truth.len() != d {
        return Err(crate::error::invalid("omega_truth dimension mismatch"));
    }
    let points = crate::geometry::uniform_sphere_sample(d, m, sub_seed(seed, "sphere-halfspace"));
    let items: Vec<Example> = points
        .into_iter()
        .map(|x| {
            let y = usize::from(dot(omega_truth, &x) >= 0.0);
            Example::new(x, y)
        })
        .collect::<Result<_>>()?;
    Dataset::from_parts(items, d, 2)
}

// ---------------------------------------------------------------------------
// IDX binary format
// ---------------------------------------------------------------------------

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Pixel scaling for image ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelScale {
    /// Divide by 255 into [0, 1].
    Unit,
    /// Keep raw byte values 0..=255.
    Raw,
}

fn idx_err(offset: u64, msg: impl Into<String>) -> Error {
    Error::IdxFormat { offset, msg: msg.into() }
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset
        .checked_add(4)
        .ok_or_else(|| idx_err(offset as u64, "offset overflow"))?;
    if end > bytes.len() {
        return Err(idx_err(offset as u64, format!(
            "truncated: need 4 bytes, file holds {}",
            bytes.len().saturating_sub(offset)
        )));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parsed image file: row-major pixel bytes per image.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

/// Parses an IDX image file (magic 0x00000803, big-endian counts, unsigned
/// byte pixels).
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(idx_err(0, format!("bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let per_image = rows
        .checked_mul(cols)
        .ok_or_else(|| idx_err(8, "rows * cols overflows"))?;
    let need = count
        .checked_mul(per_image)
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| idx_err(4, "count * rows * cols overflows"))?;
    if bytes.len() < need {
        return Err(idx_err(bytes.len() as u64, format!(
            "truncated pixel data: need {need} bytes total, file holds {}",
            bytes.len()
        )));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..need].to_vec(),
    })
}

/// Parses an IDX label file (magic 0x00000801, big-endian count, one byte
/// per label).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(idx_err(0, format!("bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let need = count
        .checked_add(8)
        .ok_or_else(|| idx_err(4, "count overflows"))?;
    if bytes.len() < need {
        return Err(idx_err(bytes.len() as u64, format!(
            "truncated label data: need {need} bytes total, file holds {}",
            bytes.len()
        )));
    }
    Ok(bytes[8..need].to_vec())
}

/// Result of loading an image/label pair: the dataset plus how many
/// examples the files actually held (callers warn when a requested limit
/// exceeded it).
#[derive(Debug, Clone)]
pub struct ImageLoad {
    pub dataset: Dataset,
    pub available: usize,
}

/// Builds a dataset from parsed IDX bytes: images flattened row-major to
/// d = rows*cols vectors, scaled per `scale`; the label universe is fixed
/// at 10 classes. Takes the first `limit` examples in file order.
pub fn dataset_from_idx(
    images: &IdxImages,
    labels: &[u8],
    limit: usize,
    scale: PixelScale,
) -> Result<ImageLoad> {
    if images.count != labels.len() {
        return Err(idx_err(4, format!(
            "count mismatch: {} images vs {} labels",
            images.count,
            labels.len()
        )));
    }
    let d = images.rows * images.cols;
    if d == 0 {
        return Err(idx_err(8, "zero-size images"));
    }
    let take = limit.min(images.count);
    let mut items = Vec::with_capacity(take);
    for i in 0..take {
        let raw = &images.pixels[i * d..(i + 1) * d];
        let x: Vec<f64> = match scale {
            PixelScale::Unit => raw.iter().map(|&p| f64::from(p) / 255.0).collect(),
            PixelScale::Raw => raw.iter().map(|&p| f64::from(p)).collect(),
        };
        let y = labels[i] as usize;
        if y > 9 {
            return Err(idx_err((8 + i) as u64, format!("label {y} outside 0..=9")));
        }
        items.push(Example::new(x, y)?);
    }
    Ok(ImageLoad {
        dataset: Dataset::from_parts(items, d, 10)?,
        available: images.count,
    })
}

/// Loads an IDX image/label file pair from disk.
pub fn load_mnist_idx(
    images_path: &Path,
    labels_path: &Path,
    limit: usize,
    scale: PixelScale,
) -> Result<ImageLoad> {
    let images = parse_idx_images(&fs::read(images_path)?)?;
    let labels = parse_idx_labels(&fs::read(labels_path)?)?;
    dataset_from_idx(&images, &labels, limit, scale)
}

// ---------------------------------------------------------------------------
// CSV format
// ---------------------------------------------------------------------------

fn csv_err(line: usize, msg: impl Into<String>) -> Error {
    Error::CsvFormat { line, msg: msg.into() }
}

/// Serializes a dataset as CSV: header `x0,...,x{d-1},y`, one example per
/// row in sequence order, floats at 17 significant digits (bit-exact round
/// trip).
pub fn dataset_to_csv(s: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..s.dim() {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("y\n");
    for e in s.iter() {
        for v in &e.x {
            out.push_str(&crate::analytics::fmt_f64(*v));
            out.push(',');
        }
        out.push_str(&format!("{}\n", e.y));
    }
    out
}

/// Parses the CSV dataset format. Line numbers in errors are 1-based.
pub fn parse_dataset_csv(bytes: &[u8]) -> Result<Dataset> {
    let text = std::str::from_utf8(bytes).map_err(|e| csv_err(0, format!("not utf-8: {e}")))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| csv_err(1, "missing header"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[cols.len() - 1] != "y" {
        return Err(csv_err(1, "header must be x0,...,x{d-1},y"));
    }
    let d = cols.len() - 1;
    for (i, c) in cols[..d].iter().enumerate() {
        if *c != format!("x{i}") {
            return Err(csv_err(1, format!("column {i} named {c:?}, expected \"x{i}\"")));
        }
    }
    let mut items = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 1 {
            return Err(csv_err(lineno, format!(
                "row has {} fields, expected {}",
                fields.len(),
                d + 1
            )));
        }
        let mut x = Vec::with_capacity(d);
        for (i, f) in fields[..d].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|e| csv_err(lineno, format!("field x{i}: {e}")))?;
            if !v.is_finite() {
                return Err(csv_err(lineno, format!("field x{i} is not finite")));
            }
            x.push(v);
        }
        let y: usize = fields[d]
            .parse()
            .map_err(|e| csv_err(lineno, format!("label: {e}")))?;
        items.push(Example::new(x, y).map_err(|e| csv_err(lineno, e.to_string()))?);
    }
    if items.is_empty() {
        return Dataset::empty(d);
    }
    let labels = items.iter().map(|e| e.y + 1).max().unwrap();
    Dataset::from_parts(items, d, labels)
}

pub fn save_dataset_csv(s: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, dataset_to_csv(s))?;
    Ok(())
}

pub fn load_dataset_csv(path: &Path) -> Result<Dataset> {
    parse_dataset_csv(&fs::read(path)?)
}
