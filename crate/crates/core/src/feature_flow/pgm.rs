use super::{FlowError, GrayFrame, Result};

fn malformed(msg: &str) -> FlowError {
    FlowError::Malformed(msg.to_string())
}

/// Reads the next whitespace-delimited header token, skipping `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while !matches!(bytes.get(*pos), Some(b'\n') | None) {
                    *pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(malformed("truncated header")),
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(c) if c.is_ascii_digit()) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed("bad header number"))
}

/// Decodes a binary P5 PGM with maxval 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayFrame> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(malformed("expected P5 magic"));
    }
    let mut pos = 2;
    let width = token(bytes, &mut pos)? as usize;
    let height = token(bytes, &mut pos)? as usize;
    let maxval = token(bytes, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(malformed("zero dimension"));
    }
    if maxval != 255 {
        return Err(malformed("maxval must be 255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !matches!(bytes.get(pos), Some(c) if c.is_ascii_whitespace()) {
        return Err(malformed("missing raster separator"));
    }
    pos += 1;
    let n = width * height;
    let raster = bytes.get(pos..pos + n).ok_or_else(|| malformed("short raster"))?;
    GrayFrame::new(width, height, raster.to_vec())
}

pub fn encode_pgm(f: &GrayFrame) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", f.width, f.height).into_bytes();
    out.extend_from_slice(&f.data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_small() {
        let mut bytes = b"P5 2 2 255\n".to_vec();
        bytes.extend([0, 64, 128, 255]);
        let f = decode_pgm(&bytes).unwrap();
        assert_eq!((f.width, f.height), (2, 2));
        assert_eq!(f.data, vec![0, 64, 128, 255]);
    }

    #[test]
    fn comments_skipped() {
        let mut bytes = b"P5\n# made by hand\n2 1\n# another\n255\n".to_vec();
        bytes.extend([7, 9]);
        assert_eq!(decode_pgm(&bytes).unwrap().data, vec![7, 9]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(decode_pgm(b"P6 1 1 255\n\0\0\0"), Err(FlowError::Malformed(_))));
        assert!(matches!(decode_pgm(b"P5 2 2 255\n\0\0"), Err(FlowError::Malformed(_))));
        assert!(matches!(decode_pgm(b"P5 2 2 65535\n"), Err(FlowError::Malformed(_))));
        assert!(matches!(decode_pgm(b"P5 2"), Err(FlowError::Malformed(_))));
    }

    #[test]
    fn round_trip() {
        let f = GrayFrame::new(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(decode_pgm(&encode_pgm(&f)).unwrap(), f);
    }
}
