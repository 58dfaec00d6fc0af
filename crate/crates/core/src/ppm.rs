//! Binary PPM (P6) encoding and decoding.
//!
//! Writes a fixed canonical header (`P6\n<w> <h>\n255\n`) so identical
//! images produce identical bytes. The reader accepts the general P6 form:
//! `#` comments and any whitespace between header tokens, maxval 255 only.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{SpectrumImage, CHANNELS};

/// Encode to the canonical byte form.
pub fn encode(img: &SpectrumImage) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + img.data().len());
    // Infallible: Vec<u8> writes cannot fail.
    write!(out, "P6\n{} {}\n255\n", img.width(), img.height()).unwrap();
    out.extend_from_slice(img.data());
    out
}

pub fn write_file(img: &SpectrumImage, path: &Path) -> Result<()> {
    std::fs::write(path, encode(img))?;
    Ok(())
}

pub fn read_file(path: &Path) -> Result<SpectrumImage> {
    let bytes = std::fs::read(path)?;
    decode(&bytes).map_err(|e| Error::format(format!("{}: {e}", path.display())))
}

/// Decode a P6 image with maxval 255.
pub fn decode(bytes: &[u8]) -> Result<SpectrumImage> {
    let mut pos = 0usize;

    let magic = take_token(bytes, &mut pos)?;
    if magic != b"P6" {
        return Err(Error::format(format!(
            "not a P6 ppm (magic {:?})",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_dim(take_token(bytes, &mut pos)?, "width")?;
    let height = parse_dim(take_token(bytes, &mut pos)?, "height")?;
    let maxval = parse_dim(take_token(bytes, &mut pos)?, "maxval")?;
    if maxval != 255 {
        return Err(Error::format(format!("unsupported maxval {maxval}, need 255")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format("missing whitespace before raster"));
    }
    pos += 1;

    let expected = width * height * CHANNELS;
    let raster = &bytes[pos..];
    if raster.len() < expected {
        return Err(Error::format(format!(
            "raster truncated: need {expected} bytes, have {}",
            raster.len()
        )));
    }
    if raster.len() > expected {
        return Err(Error::format(format!(
            "trailing bytes after raster: expected {expected}, have {}",
            raster.len()
        )));
    }
    SpectrumImage::new(width, height, raster.to_vec())
}

/// Advance over whitespace and comments, then return the next token.
fn take_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
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
        return Err(Error::format("unexpected end of header"));
    }
    Ok(&bytes[start..*pos])
}

fn parse_dim(token: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| {
            Error::format(format!(
                "bad {what} field {:?}",
                String::from_utf8_lossy(token)
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectrumImage;

    fn tiny() -> SpectrumImage {
        SpectrumImage::new(2, 2, (0u8..12).collect()).unwrap()
    }

    #[test]
    fn header_is_canonical() {
        let bytes = encode(&tiny());
        assert!(bytes.starts_with(b"P6\n2 2\n255\n"));
        assert_eq!(bytes.len(), "P6\n2 2\n255\n".len() + 12);
    }

    #[test]
    fn encode_decode_round_trip() {
        let img = tiny();
        let back = decode(&encode(&img)).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn comments_and_whitespace_are_tolerated() {
        let mut bytes = b"P6 # a comment\n# another\n 2\t2\n255\n".to_vec();
        bytes.extend(0u8..12);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.width(), 2);
        assert_eq!(img.get(0, 0, 0), 0);
        assert_eq!(img.get(1, 1, 2), 11);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(decode(b"P5\n2 2\n255\n").is_err(), "wrong magic");
        assert!(decode(b"P6\n2 2\n65535\n").is_err(), "wrong maxval");
        let mut short = b"P6\n2 2\n255\n".to_vec();
        short.extend([0u8; 5]);
        assert!(decode(&short).is_err(), "truncated raster");
        let mut long = b"P6\n2 2\n255\n".to_vec();
        long.extend([0u8; 13]);
        assert!(decode(&long).is_err(), "trailing bytes");
    }
}
