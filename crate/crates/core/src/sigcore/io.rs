//! On-disk formats.
//!
//! SGRM (little endian):
//!
//! ```text
//! "SGRM" | u32 rows | u32 cols | u32 flags | f32 values[rows*cols] (row-major)
//!        | [f32 freq_hz[rows] | f32 time_s[cols]]   if flags & 1
//! ```
//!
//! Flag bit 1 marks a grayscale (already processed) image. Other bits must be zero.
//!
//! SGIQ raw baseband (little endian):
//!
//! ```text
//! "SGIQ" | u32 version (=1) | f64 sample_rate_hz | u64 count | f32 (re, im)[count]
//! ```
//!
//! PNG export writes 8-bit single-channel images with the highest Doppler
//! frequency on the top row.

use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

use num_complex::Complex64;

use super::series::TimeSeries;
use super::spectrogram::{Axes, Scale, Spectrogram};
use crate::error::{Error, Result};

pub const SGRM_MAGIC: &[u8; 4] = b"SGRM";
pub const SGIQ_MAGIC: &[u8; 4] = b"SGIQ";
pub const SGRM_HEADER_LEN: usize = 16;

const FLAG_AXES: u32 = 1;
const FLAG_GRAYSCALE: u32 = 1 << 1;
const KNOWN_FLAGS: u32 = FLAG_AXES | FLAG_GRAYSCALE;

pub fn encode_sgrm(s: &Spectrogram) -> Vec<u8> {
    let (rows, cols) = s.shape();
    let mut flags = 0;
    if s.axes().is_some() {
        flags |= FLAG_AXES;
    }
    if s.scale() == Scale::Grayscale {
        flags |= FLAG_GRAYSCALE;
    }
    let extra = if s.axes().is_some() { rows + cols } else { 0 };
    let mut out = Vec::with_capacity(SGRM_HEADER_LEN + 4 * (rows * cols + extra));
    out.extend_from_slice(SGRM_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    for v in s.values() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    if let Some(axes) = s.axes() {
        for v in axes.freq_hz.iter().chain(&axes.time_s) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

fn le_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

fn le_f32(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn decode_sgrm(bytes: &[u8]) -> Result<Spectrogram> {
    if bytes.len() < SGRM_HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated SGRM header"));
    }
    if &bytes[..4] != SGRM_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"SGRM\""));
    }
    let rows = le_u32(bytes, 4) as usize;
    let cols = le_u32(bytes, 8) as usize;
    let flags = le_u32(bytes, 12);
    if rows == 0 {
        return Err(Error::format(4, "zero rows"));
    }
    if cols == 0 {
        return Err(Error::format(8, "zero cols"));
    }
    if flags & !KNOWN_FLAGS != 0 {
        return Err(Error::format(12, format!("unknown flag bits {flags:#x}")));
    }
    let has_axes = flags & FLAG_AXES != 0;
    let n = (rows as u64) * (cols as u64);
    let axis_len = if has_axes { rows as u64 + cols as u64 } else { 0 };
    let expected = SGRM_HEADER_LEN as u64 + 4 * (n + axis_len);
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(Error::format(
            actual,
            format!("truncated: {rows}x{cols} grid needs {expected} bytes"),
        ));
    }
    if actual > expected {
        return Err(Error::format(
            expected,
            format!("{} trailing bytes after a {rows}x{cols} grid", actual - expected),
        ));
    }
    let n = n as usize;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let at = SGRM_HEADER_LEN + 4 * i;
        let v = le_f32(bytes, at);
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::format(at as u64, format!("invalid value {v}")));
        }
        values.push(v as f64);
    }
    let scale = if flags & FLAG_GRAYSCALE != 0 {
        Scale::Grayscale
    } else {
        Scale::Power
    };
    let s = Spectrogram::new(rows, cols, values)?.with_scale(scale);
    if !has_axes {
        return Ok(s);
    }
    let base = SGRM_HEADER_LEN + 4 * n;
    let read_axis = |start: usize, len: usize| -> Vec<f64> {
        (0..len).map(|i| le_f32(bytes, start + 4 * i) as f64).collect()
    };
    let axes = Axes {
        freq_hz: read_axis(base, rows),
        time_s: read_axis(base + 4 * rows, cols),
    };
    s.with_axes(axes)
        .map_err(|e| Error::format(base as u64, e.to_string()))
}

pub fn write_signature(s: &Spectrogram, path: &Path) -> Result<()> {
    write_bytes(path, &encode_sgrm(s))
}

pub fn read_signature(path: &Path) -> Result<Spectrogram> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sgrm(&bytes)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// 8-bit grayscale PNG, highest frequency on top. Values are clamped to `[0, 1]`.
pub fn encode_png(s: &Spectrogram) -> Result<Vec<u8>> {
    let (rows, cols) = s.shape();
    let mut pixels = Vec::with_capacity(rows * cols);
    for r in (0..rows).rev() {
        for c in 0..cols {
            pixels.push((s.get(r, c).clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, cols as u32, rows as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::format(0, format!("png encode: {e}")))?;
        w.write_image_data(&pixels)
            .map_err(|e| Error::format(0, format!("png encode: {e}")))?;
    }
    Ok(out)
}

/// Offsets of IHDR fields within a PNG stream.
const PNG_BIT_DEPTH_OFFSET: u64 = 24;
const PNG_COLOR_TYPE_OFFSET: u64 = 25;

pub fn decode_png(bytes: &[u8]) -> Result<Spectrogram> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(0, format!("png decode: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::format(
            PNG_COLOR_TYPE_OFFSET,
            format!(
                "expected single-channel grayscale PNG, found {:?}",
                info.color_type
            ),
        ));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(
            PNG_BIT_DEPTH_OFFSET,
            format!("expected 8-bit PNG, found {:?}", info.bit_depth),
        ));
    }
    let (cols, rows) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(rows * cols)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(0, format!("png decode: {e}")))?;
    let stride = frame.line_size;
    let mut values = vec![0.0; rows * cols];
    for r in 0..rows {
        let line = &buf[(rows - 1 - r) * stride..];
        for c in 0..cols {
            values[r * cols + c] = line[c] as f64 / 255.0;
        }
    }
    Ok(Spectrogram::new(rows, cols, values)?.with_scale(Scale::Grayscale))
}

pub fn write_png(s: &Spectrogram, path: &Path) -> Result<()> {
    write_bytes(path, &encode_png(s)?)
}

pub fn read_png(path: &Path) -> Result<Spectrogram> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes)
}

/// Read a signature, dispatching on the file extension (`.png` or SGRM).
pub fn read_any(path: &Path) -> Result<Spectrogram> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("png") => read_png(path),
        _ => read_signature(path),
    }
}

pub fn encode_sgiq(ts: &TimeSeries) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * ts.len());
    out.extend_from_slice(SGIQ_MAGIC);
    out.extend_from_slice(&1u32.to_le_bytes());
    out.extend_from_slice(&ts.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(ts.len() as u64).to_le_bytes());
    for s in ts.samples() {
        out.extend_from_slice(&(s.re as f32).to_le_bytes());
        out.extend_from_slice(&(s.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_sgiq(bytes: &[u8]) -> Result<TimeSeries> {
    if bytes.len() < 24 {
        return Err(Error::format(bytes.len() as u64, "truncated SGIQ header"));
    }
    if &bytes[..4] != SGIQ_MAGIC {
        return Err(Error::format(0, "bad magic, expected \"SGIQ\""));
    }
    if le_u32(bytes, 4) != 1 {
        return Err(Error::format(4, "unsupported SGIQ version"));
    }
    let fs = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = 24 + 8 * count;
    if bytes.len() as u64 != expected {
        return Err(Error::format(
            (bytes.len() as u64).min(expected),
            format!("expected {expected} bytes for {count} samples"),
        ));
    }
    let samples = (0..count as usize)
        .map(|i| {
            let at = 24 + 8 * i;
            Complex64::new(le_f32(bytes, at) as f64, le_f32(bytes, at + 4) as f64)
        })
        .collect();
    TimeSeries::new(samples, fs).map_err(|e| Error::format(8, e.to_string()))
}

pub fn write_series(ts: &TimeSeries, path: &Path) -> Result<()> {
    write_bytes(path, &encode_sgiq(ts))
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sgiq(&bytes)
}
