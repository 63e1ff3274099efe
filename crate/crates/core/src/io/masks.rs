//! Instance-ID rasters as binary PGM (`P5`) or grayscale PNG.
//!
//! Writers always emit 16-bit samples. Readers accept 8-bit input, widening
//! each value unchanged.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_file, write_file};
use crate::mask::InstanceMask2D;

pub fn load_mask(path: impl AsRef<Path>) -> Result<InstanceMask2D> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    match extension(path).as_deref() {
        Some("pgm") => decode_pgm(&bytes),
        Some("png") => decode_png(&bytes),
        _ => Err(Error::Format(format!(
            "{}: unsupported mask extension (expected .pgm or .png)",
            path.display()
        ))),
    }
}

pub fn save_mask(mask: &InstanceMask2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match extension(path).as_deref() {
        Some("pgm") => encode_pgm(mask),
        Some("png") => encode_png(mask)?,
        _ => {
            return Err(Error::Format(format!(
                "{}: unsupported mask extension (expected .pgm or .png)",
                path.display()
            )))
        }
    };
    write_file(path, &bytes)
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

pub fn encode_pgm(mask: &InstanceMask2D) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", mask.width(), mask.height());
    let mut out = Vec::with_capacity(header.len() + 2 * mask.ids().len());
    out.extend_from_slice(header.as_bytes());
    for id in mask.ids() {
        out.extend_from_slice(&id.to_be_bytes());
    }
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<InstanceMask2D> {
    let mut pos = 0;
    let mut fields = [0usize; 3];
    let magic = next_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Format("PGM magic `P5` expected".into()));
    }
    for f in fields.iter_mut() {
        let tok = next_token(bytes, &mut pos)?;
        *f = std::str::from_utf8(tok)
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let [width, height, maxval] = fields;
    let bytes_per = match maxval {
        1..=255 => 1,
        256..=65535 => 2,
        _ => return Err(Error::Format(format!("unsupported PGM maxval {maxval}"))),
    };
    let n = width * height;
    let raster = bytes
        .get(pos..pos + n * bytes_per)
        .ok_or_else(|| Error::Format("truncated PGM raster".into()))?;
    let ids = if bytes_per == 1 {
        raster.iter().map(|&b| b as u16).collect()
    } else {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    InstanceMask2D::from_vec(width, height, ids)
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if bytes.get(*pos) == Some(&b'#') {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(&bytes[start..*pos])
}

pub fn encode_png(mask: &InstanceMask2D) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, mask.width() as u32, mask.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Format(format!("PNG encode: {e}")))?;
        let data: Vec<u8> = mask.ids().iter().flat_map(|id| id.to_be_bytes()).collect();
        writer
            .write_image_data(&data)
            .map_err(|e| Error::Format(format!("PNG encode: {e}")))?;
    }
    Ok(out)
}

pub fn decode_png(bytes: &[u8]) -> Result<InstanceMask2D> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Format(format!("PNG decode: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale {
        return Err(Error::Format(format!(
            "mask PNG must be grayscale, got {:?}",
            info.color_type
        )));
    }
    let depth = info.bit_depth;
    if !matches!(depth, png::BitDepth::Eight | png::BitDepth::Sixteen) {
        return Err(Error::Format(format!("mask PNG must be 8- or 16-bit, got {depth:?}")));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Format(format!("PNG decode: {e}")))?;
    let data = &buf[..frame.buffer_size()];
    let ids = match depth {
        png::BitDepth::Eight => data.iter().map(|&b| b as u16).collect(),
        _ => data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect(),
    };
    InstanceMask2D::from_vec(width, height, ids)
}
