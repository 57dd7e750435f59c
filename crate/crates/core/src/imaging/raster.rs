//! Raster images with an attached pixel ↔ domain frame, and PNM codecs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Point2;

/// Affine frame placing an image over the box `[lo, hi]`.
///
/// Pixel `(i, j)` (column, row; row 0 at the top) has its center at
/// `(lo.x + (i + ½)·dx, hi.y − (j + ½)·dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoFrame {
    pub lo: Point2,
    pub hi: Point2,
    pub width: usize,
    pub height: usize,
}

impl GeoFrame {
    pub fn new(lo: Point2, hi: Point2, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 || !(hi.x > lo.x && hi.y > lo.y) {
            return Err(Error::Image(
                "frame needs a non-empty pixel grid and box".into(),
            ));
        }
        Ok(GeoFrame {
            lo,
            hi,
            width,
            height,
        })
    }

    pub fn pixel_size(&self) -> (f64, f64) {
        (
            (self.hi.x - self.lo.x) / self.width as f64,
            (self.hi.y - self.lo.y) / self.height as f64,
        )
    }

    /// Domain coordinates of continuous pixel coordinates (centers at integers).
    pub fn to_domain(&self, i: f64, j: f64) -> Point2 {
        let (dx, dy) = self.pixel_size();
        Point2::new(self.lo.x + (i + 0.5) * dx, self.hi.y - (j + 0.5) * dy)
    }

    /// Inverse of [`GeoFrame::to_domain`].
    pub fn to_pixel(&self, p: Point2) -> (f64, f64) {
        let (dx, dy) = self.pixel_size();
        ((p.x - self.lo.x) / dx - 0.5, (self.hi.y - p.y) / dy - 0.5)
    }

    /// The pixel whose cell contains `p`, if any.
    pub fn cell_of(&self, p: Point2) -> Option<(usize, usize)> {
        let (dx, dy) = self.pixel_size();
        let fi = ((p.x - self.lo.x) / dx).floor();
        let fj = ((self.hi.y - p.y) / dy).floor();
        let clampi = |f: f64, n: usize, exact_edge: bool| {
            if f >= 0.0 && f < n as f64 {
                Some(f as usize)
            } else if exact_edge && f == n as f64 {
                Some(n - 1)
            } else {
                None
            }
        };
        Some((
            clampi(fi, self.width, p.x == self.hi.x)?,
            clampi(fj, self.height, p.y == self.lo.y)?,
        ))
    }
}

/// Row-major image with interleaved channels and samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Quantization used when written out.
    pub maxval: u16,
    pub samples: Vec<f64>,
    pub frame: GeoFrame,
}

impl RasterImage {
    /// Black image over the unit box.
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Image(format!(
                "{channels} channels; only 1 or 3 are supported"
            )));
        }
        let frame = GeoFrame::new(Point2::ORIGIN, Point2::new(1.0, 1.0), width, height)?;
        Ok(RasterImage {
            width,
            height,
            channels,
            maxval: 255,
            samples: vec![0.0; width * height * channels],
            frame,
        })
    }

    /// Grayscale image sampled from `f` at pixel centers over `[lo, hi]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        lo: Point2,
        hi: Point2,
        f: impl Fn(Point2) -> f64,
    ) -> Result<Self> {
        let mut img = RasterImage::new(width, height, 1)?.with_frame(lo, hi)?;
        for j in 0..height {
            for i in 0..width {
                let p = img.frame.to_domain(i as f64, j as f64);
                img.samples[j * width + i] = f(p).clamp(0.0, 1.0);
            }
        }
        Ok(img)
    }

    pub fn with_frame(mut self, lo: Point2, hi: Point2) -> Result<Self> {
        self.frame = GeoFrame::new(lo, hi, self.width, self.height)?;
        Ok(self)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.samples[(j * self.width + i) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        self.samples[(j * self.width + i) * self.channels + c] = v;
    }

    /// Rec. 601 luma for color images; a copy for grayscale.
    pub fn luminance(&self) -> RasterImage {
        if self.channels == 1 {
            return self.clone();
        }
        let samples = self
            .samples
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        RasterImage {
            channels: 1,
            samples,
            ..self.clone()
        }
    }

    /// Bilinear interpolation of channel `c` at a domain point; coordinates
    /// outside the pixel-center hull are clamped to it.
    pub fn bilinear(&self, p: Point2, c: usize) -> f64 {
        let (x, y) = self.frame.to_pixel(p);
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let (i0, j0) = (x.floor() as usize, y.floor() as usize);
        let (i1, j1) = ((i0 + 1).min(self.width - 1), (j0 + 1).min(self.height - 1));
        let (tx, ty) = (x - i0 as f64, y - j0 as f64);
        let top = (1.0 - tx) * self.get(i0, j0, c) + tx * self.get(i1, j0, c);
        let bot = (1.0 - tx) * self.get(i0, j1, c) + tx * self.get(i1, j1, c);
        (1.0 - ty) * top + ty * bot
    }

    /// Decodes P2, P3, P5 or P6 data.
    pub fn from_pnm(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { b: bytes, pos: 0 };
        let magic = rd.token()?;
        let (channels, binary) = match magic.as_str() {
            "P2" => (1, false),
            "P3" => (3, false),
            "P5" => (1, true),
            "P6" => (3, true),
            m => return Err(Error::Image(format!("unsupported magic '{m}'"))),
        };
        let width = rd.number()?;
        let height = rd.number()?;
        let maxval = rd.number()?;
        if width == 0 || height == 0 {
            return Err(Error::Image("zero image dimension".into()));
        }
        if maxval == 0 || maxval > 65535 {
            return Err(Error::Image(format!("maxval {maxval} outside 1..=65535")));
        }
        let count = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::Image("image dimensions overflow".into()))?;
        let maxf = maxval as f64;
        let mut samples = Vec::with_capacity(count);
        if binary {
            // Exactly one whitespace byte separates the header from the raster.
            rd.pos += 1;
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            let data = rd.b.get(rd.pos..).unwrap_or(&[]);
            if data.len() < need {
                return Err(Error::Image(format!(
                    "truncated raster: {} of {need} bytes present",
                    data.len()
                )));
            }
            for k in 0..count {
                let v = if wide {
                    u16::from_be_bytes([data[2 * k], data[2 * k + 1]]) as usize
                } else {
                    data[k] as usize
                };
                if v > maxval {
                    return Err(Error::Image(format!("sample {v} exceeds maxval {maxval}")));
                }
                samples.push(v as f64 / maxf);
            }
        } else {
            for _ in 0..count {
                let v = rd.number().map_err(|_| {
                    Error::Image(format!("truncated raster: fewer than {count} samples"))
                })?;
                if v > maxval {
                    return Err(Error::Image(format!("sample {v} exceeds maxval {maxval}")));
                }
                samples.push(v as f64 / maxf);
            }
        }
        let frame = GeoFrame::new(Point2::ORIGIN, Point2::new(1.0, 1.0), width, height)?;
        Ok(RasterImage {
            width,
            height,
            channels,
            maxval: maxval as u16,
            samples,
            frame,
        })
    }

    /// Encodes as P5/P6 (`binary`) or P2/P3.
    pub fn to_pnm(&self, binary: bool) -> Vec<u8> {
        let magic = match (self.channels, binary) {
            (1, false) => "P2",
            (1, true) => "P5",
            (_, false) => "P3",
            (_, true) => "P6",
        };
        let m = self.maxval.max(1);
        let q = |s: f64| (s.clamp(0.0, 1.0) * m as f64).round() as u16;
        let mut out = format!("{magic}\n{} {}\n{m}\n", self.width, self.height).into_bytes();
        if binary {
            for &s in &self.samples {
                if m > 255 {
                    out.extend_from_slice(&q(s).to_be_bytes());
                } else {
                    out.push(q(s) as u8);
                }
            }
        } else {
            let row = self.width * self.channels;
            for line in self.samples.chunks(row) {
                let txt: Vec<String> = line.iter().map(|&s| q(s).to_string()).collect();
                out.extend_from_slice(txt.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        RasterImage::from_pnm(&bytes)
    }

    /// Writes binary PNM.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pnm(true)).map_err(|e| Error::io(path, e))
    }
}

struct Reader<'a> {
    b: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn token(&mut self) -> Result<String> {
        loop {
            match self.b.get(self.pos) {
                Some(b'#') => {
                    while self.b.get(self.pos).is_some_and(|&c| c != b'\n') {
                        self.pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(_) => break,
                None => return Err(Error::Image("unexpected end of header".into())),
            }
        }
        let start = self.pos;
        while self
            .b
            .get(self.pos)
            .is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#')
        {
            self.pos += 1;
        }
        Ok(String::from_utf8_lossy(&self.b[start..self.pos]).into_owned())
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| Error::Image(format!("malformed header field '{t}'")))
    }
}

/// Peak signal-to-noise ratio in dB for samples in `[0, 1]`.
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels) {
        return Err(Error::Image("PSNR of images with different shapes".into()));
    }
    let mse = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.samples.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_gray() {
        let img = RasterImage::from_pnm(b"P2\n# c\n2 2\n255\n0 85\n170 255\n").unwrap();
        assert_eq!(img.samples, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn truncated_binary() {
        let mut b = b"P5 2 2 255\n".to_vec();
        b.extend_from_slice(&[1, 2, 3]);
        let e = RasterImage::from_pnm(&b).unwrap_err();
        assert!(e.to_string().contains("truncated"), "{e}");
    }

    #[test]
    fn sixteen_bit_and_color_round_trip() {
        let mut b = b"P6 2 1 65535\n".to_vec();
        for v in [0u16, 1, 65535, 300, 40000, 7] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        let img = RasterImage::from_pnm(&b).unwrap();
        assert_eq!(img.channels, 3);
        assert_eq!(img.samples[2], 1.0);
        for binary in [true, false] {
            let back = RasterImage::from_pnm(&img.to_pnm(binary)).unwrap();
            assert_eq!(back.samples, img.samples);
        }
    }

    #[test]
    fn malformed_headers() {
        assert!(RasterImage::from_pnm(b"P7 1 1 255\n\0").is_err());
        assert!(RasterImage::from_pnm(b"P5 x 1 255\n\0").is_err());
        assert!(RasterImage::from_pnm(b"P5 1 1 70000\n\0\0").is_err());
        assert!(RasterImage::from_pnm(b"P2 2 1 255 1").is_err());
    }

    #[test]
    fn frame_round_trip() {
        let f = GeoFrame::new(Point2::new(-1.0, -0.5), Point2::new(2.0, 0.5), 37, 11).unwrap();
        for (i, j) in [(0.0, 0.0), (36.0, 10.0), (12.25, 3.5)] {
            let (a, b) = f.to_pixel(f.to_domain(i, j));
            assert!((a - i).abs() < 1e-9 && (b - j).abs() < 1e-9);
        }
        assert_eq!(f.cell_of(Point2::new(2.0, -0.5)), Some((36, 10)));
        assert_eq!(f.cell_of(Point2::new(-1.0, 0.5)), Some((0, 0)));
        assert_eq!(f.cell_of(Point2::new(2.1, 0.0)), None);
    }

    #[test]
    fn bilinear_hits_pixel_centers() {
        let img = RasterImage::from_fn(5, 4, Point2::ORIGIN, Point2::new(1.0, 1.0), |p| {
            p.x * 0.5 + p.y * 0.25
        })
        .unwrap();
        for j in 0..4 {
            for i in 0..5 {
                let p = img.frame.to_domain(i as f64, j as f64);
                assert!((img.bilinear(p, 0) - img.get(i, j, 0)).abs() < 1e-15);
            }
        }
        // Linear data is reproduced between centers.
        let p = Point2::new(0.5, 0.5);
        assert!((img.bilinear(p, 0) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn psnr_of_identical_images() {
        let a = RasterImage::new(3, 3, 1).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let mut b = a.clone();
        b.samples[0] = 0.3;
        assert!((psnr(&a, &b).unwrap() - (-10.0 * (0.09f64 / 9.0).log10())).abs() < 1e-12);
    }
}
