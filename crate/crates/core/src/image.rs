//! Grayscale images with a physical pixel scale, and 8-bit PGM (P5) I/O.
//!
//! Pixel `(col, row)` has its center at
//! `x = (col + 0.5 − W/2)/scale`, `y = (row + 0.5 − H/2)/scale` (mm), so the
//! optical axis sits at the image center and `y` grows with the row index.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Standardized frame size, pixels.
pub const STANDARD_RESOLUTION: usize = 800;
/// Standardized pixel scale, px/mm.
pub const STANDARD_SCALE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    scale: f64,
    values: Vec<f64>,
}

impl ImageGray {
    pub fn zeros(width: usize, height: usize, scale: f64) -> Self {
        Self::filled(width, height, scale, 0.0)
    }

    pub fn filled(width: usize, height: usize, scale: f64, value: f64) -> Self {
        Self {
            width,
            height,
            scale,
            values: vec![value; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, scale: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} image",
                values.len()
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!("pixel scale must be positive, got {scale}")));
        }
        Ok(Self {
            width,
            height,
            scale,
            values,
        })
    }

    /// Samples `f(x_mm, y_mm)` at every pixel center.
    pub fn from_fn(width: usize, height: usize, scale: f64, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut img = Self::zeros(width, height, scale);
        for row in 0..height {
            let y = img.y_of(row);
            for col in 0..width {
                img.values[row * width + col] = f(img.x_of(col), y);
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Pixels per mm.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    pub fn x_of(&self, col: usize) -> f64 {
        (col as f64 + 0.5 - self.width as f64 / 2.0) / self.scale
    }

    pub fn y_of(&self, row: usize) -> f64 {
        (row as f64 + 0.5 - self.height as f64 / 2.0) / self.scale
    }

    pub fn same_shape(&self, other: &ImageGray) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Values clamped to [0, 1] and rounded to the nearest 8-bit level.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().map(|&v| quantize(v)).collect()
    }

    /// The image as it reads back after an 8-bit export.
    pub fn quantized(&self) -> Self {
        Self {
            values: self.values.iter().map(|&v| quantize(v) as f64 / 255.0).collect(),
            ..self.clone()
        }
    }

    /// Binary PGM with the pixel scale recorded in a header comment.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n# px_per_mm {}\n{} {}\n255\n", self.scale, self.width, self.height).into_bytes();
        out.extend(self.to_bytes());
        out
    }

    /// Parses a binary 8-bit PGM. `default_scale` is used when the file has
    /// no `px_per_mm` comment.
    pub fn from_pgm(bytes: &[u8], default_scale: f64) -> Result<Self> {
        let mut cursor = 0usize;
        let mut scale = default_scale;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            skip_space_and_comments(bytes, &mut cursor, &mut scale)?;
            let start = cursor;
            while cursor < bytes.len() && !bytes[cursor].is_ascii_whitespace() && bytes[cursor] != b'#' {
                cursor += 1;
            }
            if start == cursor {
                return Err(Error::MalformedImage("truncated header".into()));
            }
            fields.push(std::str::from_utf8(&bytes[start..cursor]).unwrap_or("").to_string());
        }
        if fields[0] != "P5" {
            return Err(Error::MalformedImage(format!("unsupported magic {:?}", fields[0])));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::MalformedImage(format!("bad {what} {s:?}")))
        };
        let width = parse(&fields[1], "width")?;
        let height = parse(&fields[2], "height")?;
        let maxval = parse(&fields[3], "maxval")?;
        if maxval == 0 || maxval > 255 {
            return Err(Error::MalformedImage(format!("unsupported maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
            return Err(Error::MalformedImage("missing raster separator".into()));
        }
        cursor += 1;
        let raster = &bytes[cursor..];
        if raster.len() != width * height {
            return Err(Error::MalformedImage(format!(
                "expected {} raster bytes, found {}",
                width * height,
                raster.len()
            )));
        }
        let max = maxval as f64;
        let values = raster.iter().map(|&b| b as f64 / max).collect();
        Self::from_values(width, height, scale, values)
    }

    pub fn read_pgm(path: &Path, default_scale: f64) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::MalformedImage(format!("{}: {e}", path.display())))?;
        Self::from_pgm(&bytes, default_scale)
    }

    pub fn write_pgm(&self, path: &Path) -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_pgm())?;
        file.sync_all()
    }

    /// Rotates the content by `angle` (rad, counter-clockwise in the
    /// `x`-right, `y`-down-the-rows frame) about the image center with
    /// bilinear sampling; samples outside the source take `fill`.
    pub fn rotated(&self, angle: f64, fill: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let cx = self.width as f64 / 2.0;
        let cy = self.height as f64 / 2.0;
        let mut out = Self::zeros(self.width, self.height, self.scale);
        for row in 0..self.height {
            let y = row as f64 + 0.5 - cy;
            for col in 0..self.width {
                let x = col as f64 + 0.5 - cx;
                // inverse rotation gives the source location
                let sx = c * x + s * y + cx - 0.5;
                let sy = -s * x + c * y + cy - 0.5;
                out.values[row * self.width + col] = self.bilinear(sx, sy).unwrap_or(fill);
            }
        }
        out
    }

    fn bilinear(&self, sx: f64, sy: f64) -> Option<f64> {
        if sx < 0.0 || sy < 0.0 || sx > (self.width - 1) as f64 || sy > (self.height - 1) as f64 {
            return None;
        }
        let x0 = (sx.floor() as usize).min(self.width - 2);
        let y0 = (sy.floor() as usize).min(self.height - 2);
        let fx = sx - x0 as f64;
        let fy = sy - y0 as f64;
        let v00 = self.get(x0, y0);
        let v10 = self.get(x0 + 1, y0);
        let v01 = self.get(x0, y0 + 1);
        let v11 = self.get(x0 + 1, y0 + 1);
        Some((v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy)
    }

    /// Inclusive-exclusive pixel bounds `(c0, c1, r0, r1)` of the centered
    /// window covering `fraction` of each dimension.
    pub fn central_window(&self, fraction: f64) -> (usize, usize, usize, usize) {
        let window = |n: usize| {
            let keep = ((n as f64 * fraction).round() as usize).clamp(1, n);
            let start = (n - keep) / 2;
            (start, start + keep)
        };
        let (c0, c1) = window(self.width);
        let (r0, r1) = window(self.height);
        (c0, c1, r0, r1)
    }
}

fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn skip_space_and_comments(bytes: &[u8], cursor: &mut usize, scale: &mut f64) -> Result<()> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            let start = *cursor + 1;
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            let comment = String::from_utf8_lossy(&bytes[start..*cursor]);
            let mut words = comment.split_whitespace();
            if words.next() == Some("px_per_mm") {
                if let Some(v) = words.next().and_then(|w| w.parse::<f64>().ok()) {
                    *scale = v;
                }
            }
            continue;
        }
        if *cursor >= bytes.len() {
            return Err(Error::MalformedImage("truncated header".into()));
        }
        return Ok(());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_centers_are_symmetric() {
        let img = ImageGray::zeros(4, 2, 2.0);
        assert_eq!(img.x_of(0), -0.75);
        assert_eq!(img.x_of(3), 0.75);
        assert_eq!(img.y_of(0), -0.25);
        assert_eq!(img.y_of(1), 0.25);
    }

    #[test]
    fn pgm_round_trip() {
        let img = ImageGray::from_fn(7, 5, 20.0, |x, y| 0.5 + 0.4 * (3.0 * x + y).sin());
        let bytes = img.to_pgm();
        let back = ImageGray::from_pgm(&bytes, 1.0).unwrap();
        assert_eq!(back.scale(), 20.0);
        assert_eq!(back, img.quantized());
        assert_eq!(back.to_pgm(), bytes);
    }

    #[test]
    fn pgm_export_rounds_and_clamps() {
        let img = ImageGray::from_values(4, 1, 1.0, vec![-0.5, 0.5, 1.0, 2.0]).unwrap();
        assert_eq!(img.to_bytes(), vec![0, 128, 255, 255]);
    }

    #[test]
    fn pgm_parser_rejects_garbage() {
        assert!(ImageGray::from_pgm(b"P2\n1 1\n255\n\x00", 1.0).is_err());
        assert!(ImageGray::from_pgm(b"P5\n2 2\n255\n\x00", 1.0).is_err());
        assert!(ImageGray::from_pgm(b"P5\n2", 1.0).is_err());
        let plain = ImageGray::from_pgm(b"P5\n# made elsewhere\n1 1\n255\n\xff", 3.0).unwrap();
        assert_eq!(plain.scale(), 3.0);
        assert_eq!(plain.values(), &[1.0]);
    }

    #[test]
    fn rotation_by_zero_is_identity() {
        let img = ImageGray::from_fn(9, 9, 1.0, |x, y| x * 0.1 + y * 0.01);
        let rot = img.rotated(0.0, 0.0);
        for (a, b) in img.values().iter().zip(rot.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn central_window_bounds() {
        let img = ImageGray::zeros(800, 800, 20.0);
        assert_eq!(img.central_window(0.7), (120, 680, 120, 680));
        assert_eq!(img.central_window(1.0), (0, 800, 0, 800));
    }
}
