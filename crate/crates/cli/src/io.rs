//! Reading and writing images and matrices.
//!
//! The format follows the file extension:
//!
//! * `.png`, `.pgm`: 8-bit (or 16-bit on input) grayscale. Reading keeps raw
//!   intensities and sets the peak to 255 (65535 for 16-bit). Writing maps
//!   `[0, peak]` onto `[0, 255]`, clamps, and rounds half to even.
//! * `.f64`: the lossless native format. An 8-byte magic, then rows, cols
//!   (u64), the peak (f64) and the row-major payload, all little-endian.
//! * `.csv`: one matrix row per line, no header. The peak is not stored; it
//!   defaults to 1 unless the caller overrides it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use destripe_core::ImageMatrix;
use image::{DynamicImage, GrayImage, ImageFormat};

pub const RAW_MAGIC: &[u8; 8] = b"DSTRF64\x01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Png,
    Pgm,
    Raw,
    Csv,
}

impl FileFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        Ok(match ext.as_str() {
            "png" => Self::Png,
            "pgm" => Self::Pgm,
            "f64" => Self::Raw,
            "csv" => Self::Csv,
            _ => bail!(
                "cannot tell the format of {} (expected .png, .pgm, .f64 or .csv)",
                path.display()
            ),
        })
    }
}

pub fn read_matrix(path: &Path) -> Result<ImageMatrix> {
    let fmt = FileFormat::from_path(path)?;
    let read = || -> Result<ImageMatrix> {
        match fmt {
            FileFormat::Png | FileFormat::Pgm => read_gray(path),
            FileFormat::Raw => read_raw(path),
            FileFormat::Csv => read_csv(path),
        }
    };
    read().with_context(|| format!("reading {}", path.display()))
}

pub fn write_matrix(path: &Path, m: &ImageMatrix) -> Result<()> {
    let fmt = FileFormat::from_path(path)?;
    let write = || -> Result<()> {
        match fmt {
            FileFormat::Png => write_gray(path, m, ImageFormat::Png),
            FileFormat::Pgm => write_gray(path, m, ImageFormat::Pnm),
            FileFormat::Raw => write_raw(path, m),
            FileFormat::Csv => write_csv(path, m),
        }
    };
    write().with_context(|| format!("writing {}", path.display()))
}

/// Quantizes one intensity to 8 bits: clamp to `[0, 255]`, then round half
/// to even, so 2.5 becomes 2 and 3.5 becomes 4.
pub fn quantize_u8(x: f64) -> u8 {
    x.clamp(0.0, 255.0).round_ties_even() as u8
}

fn read_gray(path: &Path) -> Result<ImageMatrix> {
    let img = image::open(path)?;
    let (data, w, h, peak) = match img {
        DynamicImage::ImageLuma16(g) => {
            let (w, h) = g.dimensions();
            (g.into_raw().into_iter().map(f64::from).collect::<Vec<_>>(), w, h, 65535.0)
        }
        DynamicImage::ImageLuma8(_) => {
            let g = img.into_luma8();
            let (w, h) = g.dimensions();
            (g.into_raw().into_iter().map(f64::from).collect(), w, h, 255.0)
        }
        other => bail!("expected a grayscale image, found {:?}", other.color()),
    };
    Ok(ImageMatrix::from_vec(h as usize, w as usize, data)?.with_peak(peak))
}

fn write_gray(path: &Path, m: &ImageMatrix, format: ImageFormat) -> Result<()> {
    let (rows, cols) = m.shape();
    let scale = 255.0 / m.peak();
    let pixels: Vec<u8> = m.as_slice().iter().map(|&x| quantize_u8(x * scale)).collect();
    let img = GrayImage::from_raw(cols as u32, rows as u32, pixels)
        .context("image dimensions overflow")?;
    img.save_with_format(path, format)?;
    Ok(())
}

fn read_raw(path: &Path) -> Result<ImageMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    ensure!(&magic == RAW_MAGIC, "not a native matrix file (bad magic)");
    let mut word = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let rows = u64::from_le_bytes(next(&mut r)?) as usize;
    let cols = u64::from_le_bytes(next(&mut r)?) as usize;
    let peak = f64::from_le_bytes(next(&mut r)?);
    let len = rows.checked_mul(cols).context("matrix dimensions overflow")?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    ensure!(
        payload.len() == len * 8,
        "payload holds {} bytes, expected {} for {rows}x{cols}",
        payload.len(),
        len * 8
    );
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(ImageMatrix::from_vec(rows, cols, data)?.with_peak(peak))
}

fn write_raw(path: &Path, m: &ImageMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(RAW_MAGIC)?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    w.write_all(&m.peak().to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv(path: &Path) -> Result<ImageMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        match cols {
            None => cols = Some(rec.len()),
            Some(c) => ensure!(rec.len() == c, "row {} has {} fields, expected {c}", rows + 1, rec.len()),
        }
        for field in rec.iter() {
            data.push(field.parse::<f64>().with_context(|| format!("bad number {field:?}"))?);
        }
        rows += 1;
    }
    Ok(ImageMatrix::from_vec(rows, cols.unwrap_or(0), data)?)
}

fn write_csv(path: &Path, m: &ImageMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..m.rows() {
        // `Display` for f64 prints the shortest string that parses back exactly.
        w.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
