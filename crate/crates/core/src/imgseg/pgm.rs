use std::path::Path;

use super::{BinaryMask, Result, SegError};

/// Binary P5 PGM: 255 foreground, 0 background.
pub fn write_pgm(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.data.iter().map(|&b| if b { 255u8 } else { 0 }));
    std::fs::write(path, out).map_err(|e| SegError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

/// Read a P5 or P2 PGM; pixels at or above half of maxval become foreground.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| SegError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    parse_pgm(&bytes)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<BinaryMask> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(SegError::Pgm("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| s.parse::<usize>().map_err(|_| SegError::Pgm(format!("bad number {s:?}")));
    let w = num(token()?)?;
    let h = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(SegError::Pgm(format!("bad maxval {maxval}")));
    }
    let half = maxval.div_ceil(2);
    let data: Vec<bool> = match magic.as_str() {
        "P5" => {
            let body = &bytes[pos + 1..];
            let bpp = if maxval > 255 { 2 } else { 1 };
            if body.len() < w * h * bpp {
                return Err(SegError::Pgm("pixel data truncated".into()));
            }
            (0..w * h)
                .map(|i| {
                    let v = if bpp == 1 {
                        body[i] as usize
                    } else {
                        u16::from_be_bytes([body[2 * i], body[2 * i + 1]]) as usize
                    };
                    v >= half
                })
                .collect()
        }
        "P2" => {
            let mut d = Vec::with_capacity(w * h);
            for _ in 0..w * h {
                d.push(num(token()?)? >= half);
            }
            d
        }
        other => return Err(SegError::Pgm(format!("unsupported magic {other}"))),
    };
    Ok(BinaryMask {
        width: w,
        height: h,
        data,
        scale: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_ascii() {
        let m = BinaryMask::from_fn(7, 3, |x, y| (x + y) % 3 == 0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pgm");
        write_pgm(&m, &p).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), m);
        let ascii = parse_pgm(b"P2\n# c\n2 2\n15\n0 15\n8 7\n").unwrap();
        assert_eq!(ascii.data, vec![false, true, true, false]);
    }
}
