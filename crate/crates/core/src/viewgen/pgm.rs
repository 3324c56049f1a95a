//! Netpbm graymap I/O. Files carry a `# mm_per_pixel <value>` comment.

use std::path::Path;

use super::pseudo_us::GrayImage;
use super::raster::MaskImage;
use crate::error::{Error, Result};

/// Decoded graymap scaled to [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub values: Vec<f64>,
    pub mm_per_pixel: Option<f64>,
}

fn encode_p5(width: usize, height: usize, maxval: u16, samples: impl Iterator<Item = u16>, mm_per_pixel: Option<f64>) -> Vec<u8> {
    let mut out = b"P5\n".to_vec();
    if let Some(mpp) = mm_per_pixel {
        out.extend(format!("# mm_per_pixel {mpp}\n").bytes());
    }
    out.extend(format!("{width} {height}\n{maxval}\n").bytes());
    for s in samples {
        if maxval < 256 {
            out.push(s as u8);
        } else {
            out.extend(s.to_be_bytes());
        }
    }
    out
}

/// Binary mask as an 8-bit P5 file (0 / 255).
pub fn mask_to_pgm(mask: &MaskImage) -> Vec<u8> {
    encode_p5(mask.width, mask.height, 255, mask.pixels.iter().map(|&p| if p != 0 { 255 } else { 0 }), Some(mask.mm_per_pixel))
}

/// Gray image as a 16-bit P5 file.
pub fn gray_to_pgm(img: &GrayImage, mm_per_pixel: Option<f64>) -> Vec<u8> {
    encode_p5(
        img.width,
        img.height,
        u16::MAX,
        img.pixels.iter().map(|&v| (v.clamp(0.0, 1.0) * f64::from(u16::MAX)).round() as u16),
        mm_per_pixel,
    )
}

pub fn write_mask(path: impl AsRef<Path>, mask: &MaskImage) -> Result<()> {
    std::fs::write(path, mask_to_pgm(mask))?;
    Ok(())
}

pub fn write_gray(path: impl AsRef<Path>, img: &GrayImage, mm_per_pixel: Option<f64>) -> Result<()> {
    std::fs::write(path, gray_to_pgm(img, mm_per_pixel))?;
    Ok(())
}

/// Parses P2 (ASCII) or P5 (binary) graymaps.
pub fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0;
    let mut mm_per_pixel = None;
    let mut header = Vec::new();
    while header.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos >= bytes.len() {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        if bytes[pos] == b'#' {
            let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
            let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
            let mut it = comment.split_whitespace();
            if it.next() == Some("mm_per_pixel") {
                mm_per_pixel = it.next().and_then(|v| v.parse().ok());
            }
            pos = end;
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        header.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let binary = match header[0].as_str() {
        "P5" => true,
        "P2" => false,
        m => return Err(Error::Parse(format!("unsupported PGM magic {m:?}"))),
    };
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad PGM header field {s:?}")));
    let (width, height, maxval) = (num(&header[1])?, num(&header[2])?, num(&header[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("PGM maxval {maxval} out of range")));
    }
    let n = width * height;
    let raw: Vec<u16> = if binary {
        pos += 1; // single whitespace after maxval
        let bps = if maxval < 256 { 1 } else { 2 };
        let data = bytes.get(pos..pos + n * bps).ok_or_else(|| Error::Parse("truncated PGM raster".into()))?;
        if bps == 1 {
            data.iter().map(|&b| u16::from(b)).collect()
        } else {
            data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
        }
    } else {
        let text = String::from_utf8_lossy(&bytes[pos..]);
        let vals: Vec<u16> = text
            .split_whitespace()
            .take(n)
            .map(|t| t.parse::<u16>().map_err(|_| Error::Parse(format!("bad PGM sample {t:?}"))))
            .collect::<Result<_>>()?;
        if vals.len() != n {
            return Err(Error::Parse("truncated PGM raster".into()));
        }
        vals
    };
    let values = raw.iter().map(|&v| f64::from(v.min(maxval as u16)) / maxval as f64).collect();
    Ok(Pgm { width, height, maxval: maxval as u16, values, mm_per_pixel })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Pgm> {
    parse_pgm(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_roundtrip() {
        let mask = MaskImage { width: 3, height: 2, pixels: vec![0, 1, 1, 0, 0, 1], mm_per_pixel: 0.5 };
        let p = parse_pgm(&mask_to_pgm(&mask)).unwrap();
        assert_eq!((p.width, p.height, p.mm_per_pixel), (3, 2, Some(0.5)));
        assert_eq!(p.values, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn gray_16_bit() {
        let img = GrayImage { width: 2, height: 1, pixels: vec![0.25, 1.0] };
        let p = parse_pgm(&gray_to_pgm(&img, None)).unwrap();
        assert!((p.values[0] - 0.25).abs() < 1e-4);
        assert_eq!(p.values[1], 1.0);
    }

    #[test]
    fn ascii_p2() {
        let p = parse_pgm(b"P2\n# mm_per_pixel 2\n2 2\n4\n0 1\n2 4\n").unwrap();
        assert_eq!(p.values, vec![0.0, 0.25, 0.5, 1.0]);
        assert_eq!(p.mm_per_pixel, Some(2.0));
        assert!(parse_pgm(b"P6\n1 1\n255\n\0").is_err());
        assert!(parse_pgm(b"P2\n2 2\n4\n0 1\n").is_err());
    }
}
