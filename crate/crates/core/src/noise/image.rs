//! Grayscale images and their PGM (P2/P5) and CSV encodings.

use crate::error::{Error, Result};

/// Row-major grayscale image with real intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidSample("image has no pixels".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidSample("non-finite pixel".into()));
        }
        Ok(GrayImage { width, height, pixels })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Pixel at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Rows of the `side × side` block with top-left corner `(x, y)`.
    pub fn block(&self, x: usize, y: usize, side: usize) -> Vec<Vec<f64>> {
        (y..y + side)
            .map(|r| self.pixels[r * self.width + x..r * self.width + x + side].to_vec())
            .collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.pixels.iter().map(|&p| f(p)).collect())
    }

    /// Parse PGM (by magic number) or CSV.
    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
            parse_pgm(bytes)
        } else {
            let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse {
                line: 1,
                msg: "image is neither PGM nor UTF-8 CSV".into(),
            })?;
            parse_csv(text)
        }
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }

    fn integer_pixels(&self) -> Result<(Vec<u32>, u32)> {
        let mut out = Vec::with_capacity(self.pixels.len());
        for &p in &self.pixels {
            if p < 0.0 || p > 65535.0 || p.fract() != 0.0 {
                return Err(Error::InvalidSample(format!(
                    "pixel {p} is not an integer in [0, 65535]"
                )));
            }
            out.push(p as u32);
        }
        let maxval = out.iter().copied().max().unwrap_or(0).max(1);
        Ok((out, maxval))
    }

    /// ASCII PGM; pixels must be integers in `[0, 65535]`.
    pub fn to_pgm_p2(&self) -> Result<String> {
        let (px, maxval) = self.integer_pixels()?;
        let mut s = format!("P2\n{} {}\n{}\n", self.width, self.height, maxval);
        for row in px.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        Ok(s)
    }

    /// Binary PGM; one byte per pixel when the maximum is below 256,
    /// otherwise two bytes big-endian.
    pub fn to_pgm_p5(&self) -> Result<Vec<u8>> {
        let (px, maxval) = self.integer_pixels()?;
        let mut out = format!("P5\n{} {}\n{}\n", self.width, self.height, maxval).into_bytes();
        for v in px {
            if maxval < 256 {
                out.push(v as u8);
            } else {
                out.extend_from_slice(&(v as u16).to_be_bytes());
            }
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.pixels.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Header tokens of a PGM with comments removed; returns the tokens and the
/// byte offset just past the single whitespace after the last token.
fn pgm_header(bytes: &[u8], wanted: usize) -> Result<(Vec<(String, usize)>, usize)> {
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while tokens.len() < wanted {
        if i >= bytes.len() {
            return Err(parse_err(line, "truncated PGM header"));
        }
        let c = bytes[i];
        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c.is_ascii_whitespace() {
            if c == b'\n' {
                line += 1;
            }
            i += 1;
        } else {
            let start = i;
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'#' {
                i += 1;
            }
            let tok = String::from_utf8_lossy(&bytes[start..i]).into_owned();
            tokens.push((tok, line));
        }
    }
    Ok((tokens, i))
}

fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let (tokens, end) = pgm_header(bytes, 4)?;
    let num = |k: usize| -> Result<usize> {
        let (t, line) = &tokens[k];
        t.parse::<usize>()
            .map_err(|_| parse_err(*line, format!("expected an integer, found '{t}'")))
    };
    let width = num(1)?;
    let height = num(2)?;
    let maxval = num(3)?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(parse_err(tokens[3].1, "invalid PGM dimensions or maxval"));
    }
    let count = width * height;
    let pixels: Vec<f64> = if tokens[0].0 == "P5" {
        let data = bytes.get(end + 1..).unwrap_or(&[]);
        let bpp = if maxval < 256 { 1 } else { 2 };
        if data.len() < count * bpp {
            return Err(parse_err(tokens[3].1 + 1, "truncated PGM raster"));
        }
        (0..count)
            .map(|k| {
                if bpp == 1 {
                    data[k] as f64
                } else {
                    u16::from_be_bytes([data[2 * k], data[2 * k + 1]]) as f64
                }
            })
            .collect()
    } else {
        let text = String::from_utf8_lossy(&bytes[end..]);
        let mut line = tokens[3].1;
        let mut out = Vec::with_capacity(count);
        for l in text.split('\n') {
            let content = l.split('#').next().unwrap_or("");
            for tok in content.split_ascii_whitespace() {
                let v: u32 = tok
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad pixel value '{tok}'")))?;
                out.push(v as f64);
            }
            line += 1;
        }
        if out.len() != count {
            return Err(parse_err(line, format!("expected {count} pixels, found {}", out.len())));
        }
        out
    };
    if pixels.iter().any(|&p| p > maxval as f64) {
        return Err(parse_err(tokens[3].1, "pixel exceeds maxval"));
    }
    GrayImage::new(width, height, pixels)
}

/// Comma-separated rows of reals; blank lines are skipped.
fn parse_csv(text: &str) -> Result<GrayImage> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let row = l
            .split(',')
            .map(|t| {
                let t = t.trim();
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(k + 1, format!("bad value '{t}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(k + 1, format!("expected {} columns, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "empty image"));
    }
    let width = rows[0].len();
    let height = rows.len();
    GrayImage::new(width, height, rows.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GrayImage {
        GrayImage::from_fn(5, 3, |x, y| (x * 40 + y * 7) as f64).unwrap()
    }

    #[test]
    fn formats_round_trip() {
        let img = sample();
        let p2 = img.to_pgm_p2().unwrap();
        assert_eq!(GrayImage::decode(p2.as_bytes()).unwrap(), img);
        assert_eq!(GrayImage::decode(&img.to_pgm_p5().unwrap()).unwrap(), img);
        assert_eq!(GrayImage::decode(img.to_csv().as_bytes()).unwrap(), img);
        let wide = img.map(|p| p * 300.0).unwrap();
        assert_eq!(GrayImage::decode(&wide.to_pgm_p5().unwrap()).unwrap(), wide);
    }

    #[test]
    fn pgm_comments() {
        let text = "P2\n# made by hand\n3 2 # size\n255\n1 2 3\n# row two\n4 5 6\n";
        let img = GrayImage::decode(text.as_bytes()).unwrap();
        assert_eq!(img.pixels(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn errors_carry_lines() {
        let err = GrayImage::decode(b"1,2\n3,x\n").unwrap_err();
        assert_eq!(err, Error::Parse { line: 2, msg: "bad value 'x'".into() });
        assert!(matches!(GrayImage::decode(b"1,2\n3\n"), Err(Error::Parse { line: 2, .. })));
        assert!(GrayImage::decode(b"").is_err());
        assert!(GrayImage::decode(b"P5\n2 2\n255\n\x01").is_err());
        assert!(GrayImage::decode(b"P2\n2 1\n10\n3 11\n").is_err());
    }

    #[test]
    fn block_extraction() {
        let img = sample();
        assert_eq!(img.block(1, 1, 2), vec![vec![47.0, 87.0], vec![54.0, 94.0]]);
        assert!(img.map(|_| 0.5).unwrap().to_pgm_p2().is_err());
    }
}
